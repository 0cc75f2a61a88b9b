//! Random bids that respect the no-overbidding limit.

use rand::Rng;

use crate::error::Result;
use crate::mechanism::{BidProfile, StandardBid, UniformBid};
use crate::valuation::Valuation;

/// Non-increasing bid on a random number of slots, scaled by a random factor
/// of the largest multiple that still admits.
pub fn random_standard_bid<R: Rng>(val: &Valuation, rng: &mut R) -> Result<StandardBid> {
    let k = val.k();
    let q = rng.gen_range(0..=k);
    let mut raw: Vec<f64> = (0..q).map(|_| rng.gen::<f64>()).collect();
    raw.sort_by(|a, b| b.total_cmp(a));
    let mut cap = f64::INFINITY;
    let mut prefix = 0.0;
    for (j, b) in raw.iter().enumerate() {
        prefix += b;
        if prefix > 0.0 {
            cap = cap.min(val.value(j + 1) / prefix);
        }
    }
    let scale = if cap.is_finite() {
        cap * rng.gen::<f64>()
    } else {
        0.0
    };
    raw.resize(k, 0.0);
    StandardBid::new(raw.into_iter().map(|b| b * scale).collect())
}

/// Uniform bid on a random quantity at a random price within `v(j)/j` for all
/// `j` up to the quantity.
pub fn random_uniform_bid<R: Rng>(val: &Valuation, rng: &mut R) -> Result<UniformBid> {
    let q = rng.gen_range(1..=val.k());
    let cap = val.min_per_unit(q)?;
    UniformBid::new(cap * rng.gen::<f64>(), q)
}

pub fn random_standard_profile<R: Rng>(vals: &[Valuation], rng: &mut R) -> Result<BidProfile> {
    BidProfile::standard(
        vals.iter()
            .map(|v| random_standard_bid(v, rng))
            .collect::<Result<_>>()?,
    )
}

pub fn random_uniform_profile<R: Rng>(vals: &[Valuation], rng: &mut R) -> Result<BidProfile> {
    let k = vals.first().map_or(0, Valuation::k);
    BidProfile::uniform(
        k,
        vals.iter()
            .map(|v| random_uniform_bid(v, rng))
            .collect::<Result<_>>()?,
    )
}
