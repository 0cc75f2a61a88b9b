//! Valuation curves over unit counts.
//!
//! A [`Valuation`] stores `v(0..=k)` with `v(0) = 0` and `v` non-decreasing.
//! The class predicates follow the usual discrete definitions: submodular means
//! non-increasing marginals, subadditive means `v(x + y) <= v(x) + v(y)` for every
//! split that stays inside `0..=k`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Valuation {
    values: Vec<f64>,
}

/// Class requested from [`random_valuation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValuationClass {
    Submodular,
    Subadditive,
    General,
}

impl ValuationClass {
    pub fn contains(self, val: &Valuation) -> bool {
        match self {
            ValuationClass::Submodular => val.is_submodular(),
            ValuationClass::Subadditive => val.is_subadditive(),
            ValuationClass::General => true,
        }
    }
}

impl Valuation {
    /// Builds a valuation from `v(0..=k)`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidValuation(
                "need at least v(0) and v(1)".into(),
            ));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidValuation(format!(
                "v(0) must be 0, got {}",
                values[0]
            )));
        }
        for (j, w) in values.windows(2).enumerate() {
            if !w[1].is_finite() || w[1] < w[0] {
                return Err(Error::InvalidValuation(format!(
                    "v must be finite and non-decreasing: v({}) = {} < v({}) = {}",
                    j + 1,
                    w[1],
                    j,
                    w[0]
                )));
            }
        }
        Ok(Self { values })
    }

    /// Builds a valuation from marginal values `m(1..=k)` by prefix summation.
    pub fn from_marginals(marginals: &[f64]) -> Result<Self> {
        let mut values = Vec::with_capacity(marginals.len() + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for &m in marginals {
            if m < 0.0 || !m.is_finite() {
                return Err(Error::InvalidValuation(format!("negative marginal {m}")));
            }
            acc += m;
            values.push(acc);
        }
        Self::new(values)
    }

    /// Value `c * j` for every `j`.
    pub fn additive(k: usize, per_unit: f64) -> Result<Self> {
        Self::new((0..=k).map(|j| per_unit * j as f64).collect())
    }

    /// Value `c` for any positive number of units.
    pub fn unit_demand(k: usize, value: f64) -> Result<Self> {
        Self::new((0..=k).map(|j| if j == 0 { 0.0 } else { value }).collect())
    }

    pub fn k(&self) -> usize {
        self.values.len() - 1
    }

    /// `v(j)`; panics if `j > k`.
    pub fn value(&self, j: usize) -> f64 {
        self.values[j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `m(j) = v(j) - v(j-1)` for `j = 1..=k`.
    pub fn marginals(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn marginal(&self, j: usize) -> f64 {
        self.values[j] - self.values[j - 1]
    }

    pub fn is_submodular(&self) -> bool {
        self.marginals()
            .windows(2)
            .all(|w| tolerance::le(w[1], w[0]))
    }

    /// Checks `v(x + y) <= v(x) + v(y)` for all `x, y >= 1` with `x + y <= k`.
    pub fn is_subadditive(&self) -> bool {
        let k = self.k();
        for x in 1..=k {
            for y in x..=k - x {
                if !tolerance::le(self.values[x + y], self.values[x] + self.values[y]) {
                    return false;
                }
            }
        }
        true
    }

    /// Smallest `j` in `1..=x` minimizing the per-unit value `v(j) / j`.
    pub fn tau(&self, x: usize) -> Result<usize> {
        if x == 0 || x > self.k() {
            return Err(Error::UnitsOutOfRange { x, k: self.k() });
        }
        let mut best = 1;
        let mut best_ratio = self.values[1];
        for j in 2..=x {
            let ratio = self.values[j] / j as f64;
            if ratio < best_ratio {
                best = j;
                best_ratio = ratio;
            }
        }
        Ok(best)
    }

    /// `v(tau) / tau` for the `tau` of [`Valuation::tau`].
    pub fn min_per_unit(&self, x: usize) -> Result<f64> {
        let t = self.tau(x)?;
        Ok(self.values[t] / t as f64)
    }

    /// True iff every prefix sum of `bids` stays at or below `v` at the same count.
    pub fn admits(&self, bids: &[f64]) -> bool {
        let mut acc = 0.0;
        for (s, &b) in bids.iter().enumerate().take(self.k()) {
            acc += b;
            if !tolerance::le(acc, self.values[s + 1]) {
                return false;
            }
        }
        true
    }
}

impl TryFrom<Vec<f64>> for Valuation {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<Valuation> for Vec<f64> {
    fn from(v: Valuation) -> Self {
        v.values
    }
}

const SUBADDITIVE_ATTEMPTS: usize = 10_000;

/// Draws a valuation of the requested class, deterministic in `seed`.
pub fn random_valuation(
    class: ValuationClass,
    k: usize,
    scale: f64,
    seed: u64,
) -> Result<Valuation> {
    if k == 0 {
        return Err(Error::InvalidValuation("k must be positive".into()));
    }
    if !(scale > 0.0) {
        return Err(Error::InvalidValuation(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_valuation(class, k, scale, &mut rng)
}

/// Same as [`random_valuation`] but draws from a caller-owned generator.
pub fn sample_valuation<R: Rng>(
    class: ValuationClass,
    k: usize,
    scale: f64,
    rng: &mut R,
) -> Result<Valuation> {
    let val = match class {
        ValuationClass::Submodular => {
            let mut m: Vec<f64> = (0..k).map(|_| scale * rng.gen::<f64>()).collect();
            m.sort_by(|a, b| b.total_cmp(a));
            Valuation::from_marginals(&m)?
        }
        ValuationClass::General => {
            let m: Vec<f64> = (0..k).map(|_| scale * rng.gen::<f64>()).collect();
            Valuation::from_marginals(&m)?
        }
        ValuationClass::Subadditive => sample_subadditive(k, scale, rng)?,
    };
    debug_assert!(class.contains(&val));
    Ok(val)
}

fn sample_subadditive<R: Rng>(k: usize, scale: f64, rng: &mut R) -> Result<Valuation> {
    for _ in 0..SUBADDITIVE_ATTEMPTS {
        let candidate = propose_subadditive(k, scale, rng)?;
        if candidate.is_subadditive() {
            return Ok(candidate);
        }
    }
    Err(Error::InvalidValuation(format!(
        "no subadditive curve accepted after {SUBADDITIVE_ATTEMPTS} proposals"
    )))
}

// Proposals mix a concave part with ceil(j / s) staircases so that most of them
// are subadditive without being submodular; the caller still re-checks.
fn propose_subadditive<R: Rng>(k: usize, scale: f64, rng: &mut R) -> Result<Valuation> {
    if rng.gen_bool(0.25) {
        let m: Vec<f64> = (0..k).map(|_| scale * rng.gen::<f64>()).collect();
        return Valuation::from_marginals(&m);
    }
    let mut concave: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
    concave.sort_by(|a, b| b.total_cmp(a));
    let weight = rng.gen::<f64>();
    let steps = rng.gen_range(1..=3);
    let stairs: Vec<(usize, f64)> = (0..steps)
        .map(|_| (rng.gen_range(1..=k), rng.gen::<f64>()))
        .collect();
    let mut values = vec![0.0; k + 1];
    let mut acc = 0.0;
    for j in 1..=k {
        acc += weight * concave[j - 1];
        let stair: f64 = stairs.iter().map(|&(s, h)| h * j.div_ceil(s) as f64).sum();
        values[j] = acc + stair;
    }
    let top = values[k].max(f64::MIN_POSITIVE);
    let norm = scale * k as f64 / (2.0 * top);
    Valuation::new(values.into_iter().map(|v| v * norm).collect())
}
