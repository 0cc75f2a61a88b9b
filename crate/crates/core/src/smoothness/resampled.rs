//! Deviations that resample the opposing bids.
//!
//! The deviating bidder draws its own copy of the opposing top-`k` vector,
//! keeps the `x` lowest entries (the copy's `β_1..β_x`) and outbids each by one
//! tick. Under uniform pricing it first drops the largest block of kept
//! entries whose sum exceeds its value for that many units, so that what
//! remains never overbids.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::StandardBid;
use crate::tolerance;
use crate::valuation::Valuation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResampledVariant {
    Discriminatory,
    Uniform,
}

/// Largest `t` such that the `t` largest entries of `kept` sum to more than
/// `v(t)`, or 0 if there is none. `kept` must be non-increasing.
pub fn overbidding_set(val: &Valuation, kept: &[f64]) -> usize {
    let mut prefix = 0.0;
    let mut best = 0;
    for (t, b) in kept.iter().enumerate().take(val.k()) {
        prefix += b;
        if !tolerance::le(prefix, val.value(t + 1)) {
            best = t + 1;
        }
    }
    best
}

/// Deterministic deviation built from one opposing top-`k` sample.
///
/// Returns the bid and the pre-tick entries it keeps (non-increasing).
pub fn resampled_support(
    sample: &[f64],
    x: usize,
    variant: ResampledVariant,
    val: &Valuation,
    tick: f64,
) -> Result<(StandardBid, Vec<f64>)> {
    let k = val.k();
    if x == 0 || x > k {
        return Err(Error::UnitsOutOfRange { x, k });
    }
    if sample.len() > k || sample.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(Error::InvalidBid(format!("bad opposing sample {sample:?}")));
    }
    if !(tick >= 0.0) {
        return Err(Error::Domain(format!(
            "tick must be non-negative, got {tick}"
        )));
    }
    let mut desc = sample.to_vec();
    desc.resize(k, 0.0);
    desc.sort_by(|a, b| b.total_cmp(a));
    // β_1..β_x are the x lowest of the top k, listed here from the highest
    let mut kept = desc[k - x..].to_vec();
    if variant == ResampledVariant::Uniform {
        let t = overbidding_set(val, &kept);
        kept.drain(..t);
    }
    let mut bid: Vec<f64> = kept.iter().map(|b| b + tick).collect();
    bid.resize(k, 0.0);
    Ok((StandardBid::new(bid)?, kept))
}

/// Samples one deviation from a finite distribution of opposing top-`k` vectors.
pub fn resampled_deviation<R: Rng>(
    dist: &[(Vec<f64>, f64)],
    x: usize,
    variant: ResampledVariant,
    val: &Valuation,
    tick: f64,
    rng: &mut R,
) -> Result<StandardBid> {
    if dist.is_empty() {
        return Err(Error::Domain("empty opposing distribution".into()));
    }
    let u: f64 = rng.gen::<f64>() * dist.iter().map(|(_, p)| p).sum::<f64>();
    let mut acc = 0.0;
    let mut pick = dist.len() - 1;
    for (j, (_, p)) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            pick = j;
            break;
        }
    }
    Ok(resampled_support(&dist[pick].0, x, variant, val, tick)?.0)
}
