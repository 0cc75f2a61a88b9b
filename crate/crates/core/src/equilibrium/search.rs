//! Pure equilibrium search over grid strategy sets.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{best_response_rows, BidGrid, GameInstance};
use crate::error::{Error, Result};
use crate::mechanism::{allocate_rows, payments, BidProfile, StandardBid};
use crate::tolerance;

/// Default cap on evaluated profiles in exhaustive mode.
pub const DEFAULT_PROFILE_CAP: u128 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SearchMode {
    Exhaustive {
        #[serde(default = "default_cap")]
        cap: u128,
    },
    BestResponseDynamics {
        starts: usize,
        max_rounds: usize,
        seed: u64,
    },
}

fn default_cap() -> u128 {
    DEFAULT_PROFILE_CAP
}

impl SearchMode {
    pub fn exhaustive() -> Self {
        SearchMode::Exhaustive {
            cap: DEFAULT_PROFILE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PneSearch {
    pub equilibria: Vec<BidProfile>,
    /// False when the search may have missed equilibria.
    pub exhaustive: bool,
    pub profiles_evaluated: u128,
}

/// `find_pure_nash`: grid profiles whose regret is within the equilibrium tolerance.
pub fn find_pure_nash(
    instance: &GameInstance,
    grid: &BidGrid,
    mode: &SearchMode,
) -> Result<PneSearch> {
    grid.validate()?;
    let k = instance.k();
    let sets = instance
        .valuations
        .iter()
        .map(|v| grid.strategies(v, k))
        .collect::<Result<Vec<_>>>()?;
    match mode {
        SearchMode::Exhaustive { cap } => exhaustive(instance, grid, &sets, *cap),
        SearchMode::BestResponseDynamics {
            starts,
            max_rounds,
            seed,
        } => dynamics(instance, grid, &sets, *starts, *max_rounds, *seed),
    }
}

fn exhaustive(
    instance: &GameInstance,
    grid: &BidGrid,
    sets: &[Vec<StandardBid>],
    cap: u128,
) -> Result<PneSearch> {
    let n = sets.len();
    let size = sets
        .iter()
        .fold(1u128, |acc, s| acc.saturating_mul(s.len() as u128));
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    let auction = &instance.auction;
    // strides of the mixed-radix index over the other bidders
    let others_stride: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut stride = vec![0usize; n];
            let mut s = 1;
            for j in (0..n).rev() {
                if j != i {
                    stride[j] = s;
                    s *= sets[j].len();
                }
            }
            stride
        })
        .collect();
    let mut memo: Vec<Vec<f64>> = (0..n)
        .map(|i| vec![f64::NAN; (0..n).filter(|&j| j != i).map(|j| sets[j].len()).product()])
        .collect();

    let mut idx = vec![0usize; n];
    let mut rows: Vec<Vec<f64>> = (0..n).map(|i| sets[i][0].as_slice().to_vec()).collect();
    let mut equilibria = Vec::new();
    let mut evaluated = 0u128;
    if sets.iter().any(Vec::is_empty) {
        return Ok(PneSearch {
            equilibria,
            exhaustive: true,
            profiles_evaluated: 0,
        });
    }
    loop {
        evaluated += 1;
        let alloc = allocate_rows(&rows, &auction.tie_break, auction.k);
        let pay = payments(&rows, &alloc, auction.pricing);
        let mut stable = true;
        for i in 0..n {
            let current = instance.valuations[i].value(alloc.units[i]) - pay[i];
            let key: usize = (0..n).map(|j| idx[j] * others_stride[i][j]).sum();
            if memo[i][key].is_nan() {
                memo[i][key] =
                    best_response_rows(i, &instance.valuations[i], &rows, grid, auction)?.utility;
            }
            if memo[i][key] - current > tolerance::EQUILIBRIUM {
                stable = false;
                break;
            }
        }
        if stable {
            equilibria.push(BidProfile::standard(
                (0..n).map(|i| sets[i][idx[i]].clone()).collect(),
            )?);
        }
        // odometer step
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(PneSearch {
                    equilibria,
                    exhaustive: true,
                    profiles_evaluated: evaluated,
                });
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < sets[pos].len() {
                rows[pos] = sets[pos][idx[pos]].as_slice().to_vec();
                break;
            }
            idx[pos] = 0;
            rows[pos] = sets[pos][0].as_slice().to_vec();
        }
    }
}

fn dynamics(
    instance: &GameInstance,
    grid: &BidGrid,
    sets: &[Vec<StandardBid>],
    starts: usize,
    max_rounds: usize,
    seed: u64,
) -> Result<PneSearch> {
    let n = sets.len();
    let auction = &instance.auction;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut equilibria = Vec::new();
    let mut evaluated = 0u128;
    for _ in 0..starts {
        let mut rows: Vec<Vec<f64>> = sets
            .iter()
            .map(|s| s[rng.gen_range(0..s.len())].as_slice().to_vec())
            .collect();
        for _ in 0..max_rounds {
            let mut changed = false;
            for i in 0..n {
                evaluated += 1;
                let val = &instance.valuations[i];
                let current = auction.utility_rows(&rows, i, val);
                let br = best_response_rows(i, val, &rows, grid, auction)?;
                if br.utility - current > tolerance::EQUILIBRIUM {
                    rows[i] = br.bid.as_slice().to_vec();
                    changed = true;
                }
            }
            if !changed {
                let key: Vec<u64> = rows.iter().flatten().map(|b| b.to_bits()).collect();
                if seen.insert(key) {
                    equilibria.push(BidProfile::standard(
                        rows.iter()
                            .map(|r| StandardBid::new(r.clone()))
                            .collect::<Result<_>>()?,
                    )?);
                }
                break;
            }
        }
    }
    Ok(PneSearch {
        equilibria,
        exhaustive: false,
        profiles_evaluated: evaluated,
    })
}
