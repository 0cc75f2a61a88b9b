//! Discretized strategy spaces, best responses and equilibrium checks.
//!
//! Deviations for a bidder facing fixed opposing bids are drawn from a finite
//! family: for every target unit count `j` the constant bid that matches or
//! outbids by one tick the `j`-th lowest opposing winning bid, every uniform
//! grid bid when that set is small, and optionally every non-increasing grid
//! vector. Constant vectors minimize every prefix sum among the bids winning a
//! given number of units, so under both pricing rules they are the cheapest way
//! to win `j` units and the easiest to keep within the no-overbidding limit.

mod bayes;
mod search;
mod structure;

pub use bayes::{bayesian_poa, expected_welfare, is_bayes_nash, BayesianGame, MixedBid, Strategy};
pub use search::{find_pure_nash, PneSearch, SearchMode};
pub use structure::{
    check_equal_bid_structure, is_undominated_upa, pne_standard_to_uniform, EqualBidStructure,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{Auction, BidProfile, Interface, OpposingBids, StandardBid};
use crate::tolerance;
use crate::valuation::Valuation;

/// Default cap on uniform grid bids enumerated per best response.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 50_000;

/// Largest `k` for which every non-increasing grid vector may be enumerated.
pub const FULL_STANDARD_MAX_K: usize = 4;

fn default_enumeration_limit() -> usize {
    DEFAULT_ENUMERATION_LIMIT
}

/// Bids restricted to multiples of `tick` in `[0, max_bid]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidGrid {
    pub tick: f64,
    pub max_bid: f64,
    pub interface: Interface,
    pub no_overbidding: bool,
    /// Also enumerate every non-increasing grid vector (`k <= 4` only).
    #[serde(default)]
    pub full_standard: bool,
    /// Uniform grid bids are enumerated only when `k * levels` stays below this.
    #[serde(default = "default_enumeration_limit")]
    pub enumeration_limit: usize,
}

impl BidGrid {
    pub fn new(
        tick: f64,
        max_bid: f64,
        interface: Interface,
        no_overbidding: bool,
    ) -> Result<Self> {
        let grid = Self {
            tick,
            max_bid,
            interface,
            no_overbidding,
            full_standard: false,
            enumeration_limit: DEFAULT_ENUMERATION_LIMIT,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn with_full_standard(mut self, on: bool) -> Self {
        self.full_standard = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tick > 0.0)
            || !self.tick.is_finite()
            || !(self.max_bid >= 0.0)
            || !self.max_bid.is_finite()
        {
            return Err(Error::EmptyGrid);
        }
        Ok(())
    }

    /// Grid levels `0, tick, 2 tick, ...` up to `max_bid`.
    pub fn levels(&self) -> Vec<f64> {
        let top = (self.max_bid / self.tick + 1e-9).floor() as usize;
        (0..=top).map(|i| i as f64 * self.tick).collect()
    }

    /// Nearest grid multiple, computed the same way as [`BidGrid::levels`].
    pub fn snap(&self, x: f64) -> f64 {
        (x / self.tick).round() * self.tick
    }

    fn within(&self, c: f64) -> bool {
        c <= self.max_bid + tolerance::EXACT * self.max_bid.max(1.0)
    }

    /// Every non-zero uniform grid bid in vector form, plus the zero bid.
    pub fn uniform_bids(&self, k: usize) -> Vec<StandardBid> {
        let mut out = vec![StandardBid::zero(k)];
        for q in 1..=k {
            for &c in self.levels().iter().skip(1) {
                out.push(constant(c, q, k));
            }
        }
        out
    }

    /// Every non-increasing vector over grid levels.
    pub fn standard_vectors(&self, k: usize) -> Result<Vec<StandardBid>> {
        if k > FULL_STANDARD_MAX_K {
            return Err(Error::Config(format!(
                "full standard enumeration supports k <= {FULL_STANDARD_MAX_K}, got {k}"
            )));
        }
        let levels = self.levels();
        let mut out = Vec::new();
        let mut idx = vec![0usize; k];
        // idx is non-increasing in level index; enumerate as multisets
        fn rec(
            levels: &[f64],
            idx: &mut Vec<usize>,
            pos: usize,
            bound: usize,
            out: &mut Vec<StandardBid>,
        ) {
            if pos == idx.len() {
                out.push(
                    StandardBid::new(idx.iter().map(|&i| levels[i]).collect()).expect("sorted"),
                );
                return;
            }
            for i in 0..=bound {
                idx[pos] = i;
                rec(levels, idx, pos + 1, i, out);
            }
        }
        rec(&levels, &mut idx, 0, levels.len() - 1, &mut out);
        Ok(out)
    }

    /// Own strategy set of a bidder with valuation `val`.
    pub fn strategies(&self, val: &Valuation, k: usize) -> Result<Vec<StandardBid>> {
        let all = if self.interface == Interface::Standard && self.full_standard {
            self.standard_vectors(k)?
        } else {
            self.uniform_bids(k)
        };
        Ok(all
            .into_iter()
            .filter(|b| !self.no_overbidding || val.admits(b.as_slice()))
            .collect())
    }

    fn enumerate_uniform(&self, k: usize) -> bool {
        k.saturating_mul(self.levels().len()) <= self.enumeration_limit
    }

    /// Deviation family against one opposing bid configuration.
    pub fn deviations(&self, opp: &OpposingBids, val: &Valuation) -> Result<Vec<StandardBid>> {
        let k = opp.k();
        let mut out = vec![StandardBid::zero(k)];
        for j in 1..=k {
            let delta = opp.beta(j);
            for c in [delta, delta + self.tick] {
                if c > 0.0 && self.within(c) {
                    out.push(constant(c, j, k));
                }
            }
        }
        if self.enumerate_uniform(k) {
            out.extend(self.uniform_bids(k).into_iter().skip(1));
        }
        if self.full_standard {
            out.extend(self.standard_vectors(k)?);
        }
        if self.no_overbidding {
            out.retain(|b| val.admits(b.as_slice()));
        }
        Ok(out)
    }
}

/// `c` on the first `q` slots, zero after.
pub fn constant(c: f64, q: usize, k: usize) -> StandardBid {
    StandardBid::new((0..k).map(|j| if j < q { c } else { 0.0 }).collect()).expect("constant bid")
}

/// Complete-information game: valuations plus auction rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameInstance {
    pub valuations: Vec<Valuation>,
    pub auction: Auction,
}

impl GameInstance {
    pub fn new(valuations: Vec<Valuation>, auction: Auction) -> Result<Self> {
        if let Some(v) = valuations.iter().find(|v| v.k() != auction.k) {
            return Err(Error::Dimension(format!(
                "valuation over {} units, auction sells {}",
                v.k(),
                auction.k
            )));
        }
        Ok(Self {
            valuations,
            auction,
        })
    }

    pub fn n(&self) -> usize {
        self.valuations.len()
    }

    pub fn k(&self) -> usize {
        self.auction.k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub bid: StandardBid,
    pub utility: f64,
}

/// Best deviation of bidder `i` in the family against `rows` (row `i` ignored).
pub fn best_response_rows(
    i: usize,
    val: &Valuation,
    rows: &[Vec<f64>],
    grid: &BidGrid,
    auction: &Auction,
) -> Result<BestResponse> {
    grid.validate()?;
    let opp = OpposingBids::from_rows(rows, Some(i), auction.k);
    let mut work = rows.to_vec();
    let mut best: Option<BestResponse> = None;
    for cand in grid.deviations(&opp, val)? {
        work[i].clear();
        work[i].extend_from_slice(cand.as_slice());
        let u = auction.utility_rows(&work, i, val);
        if best.as_ref().is_none_or(|b| u > b.utility) {
            best = Some(BestResponse {
                bid: cand,
                utility: u,
            });
        }
    }
    best.ok_or(Error::EmptyGrid)
}

/// `best_response`: best deviation of bidder `i` against the other bids of `profile`.
pub fn best_response(
    i: usize,
    val: &Valuation,
    profile: &BidProfile,
    grid: &BidGrid,
    auction: &Auction,
) -> Result<BestResponse> {
    best_response_rows(i, val, &rows_of(profile), grid, auction)
}

pub(crate) fn rows_of(profile: &BidProfile) -> Vec<Vec<f64>> {
    profile
        .rows()
        .iter()
        .map(|r| r.as_slice().to_vec())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretEntry {
    pub bidder: usize,
    pub type_index: usize,
    pub current_utility: f64,
    pub best_utility: f64,
    pub regret: f64,
    pub best_deviation: StandardBid,
}

/// Per-(bidder, type) deviation gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub entries: Vec<RegretEntry>,
    /// Largest gain, floored at zero.
    pub max_regret: f64,
}

impl RegretReport {
    pub(crate) fn from_entries(entries: Vec<RegretEntry>) -> Self {
        let max_regret = entries.iter().map(|e| e.regret).fold(0.0, f64::max);
        Self {
            entries,
            max_regret,
        }
    }

    pub fn is_equilibrium(&self) -> bool {
        self.max_regret <= tolerance::EQUILIBRIUM
    }
}

/// `is_pure_nash`: regret of every bidder against the deviation family.
pub fn is_pure_nash(
    profile: &BidProfile,
    instance: &GameInstance,
    grid: &BidGrid,
) -> Result<RegretReport> {
    if profile.n() != instance.n() || profile.k() != instance.k() {
        return Err(Error::Dimension(format!(
            "profile is {}x{}, instance is {}x{}",
            profile.n(),
            profile.k(),
            instance.n(),
            instance.k()
        )));
    }
    let rows = rows_of(profile);
    let entries = instance
        .valuations
        .iter()
        .enumerate()
        .map(|(i, val)| {
            let current = instance.auction.utility_rows(&rows, i, val);
            let br = best_response_rows(i, val, &rows, grid, &instance.auction)?;
            Ok(RegretEntry {
                bidder: i,
                type_index: 0,
                current_utility: current,
                best_utility: br.utility,
                regret: br.utility - current,
                best_deviation: br.bid,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegretReport::from_entries(entries))
}

/// True iff no bidder gains more than `eps` by deviating.
pub fn is_epsilon_equilibrium(
    profile: &BidProfile,
    instance: &GameInstance,
    grid: &BidGrid,
    eps: f64,
) -> Result<bool> {
    Ok(is_pure_nash(profile, instance, grid)?.max_regret <= eps + tolerance::EQUILIBRIUM)
}
