//! Structural facts about pure equilibria.

use serde::{Deserialize, Serialize};

use super::{is_pure_nash, BidGrid, GameInstance, RegretReport};
use crate::error::{Error, Result};
use crate::mechanism::{
    allocate, social_welfare, BidProfile, Pricing, StandardBid, TieBreakRule, UniformBid,
};
use crate::tolerance;
use crate::valuation::Valuation;

/// Uniform-price bids that are not weakly dominated: never above the marginal
/// value, and the first bid equal to `v(1)`.
pub fn is_undominated_upa(val: &Valuation, bid: &StandardBid) -> Result<bool> {
    if !val.is_submodular() {
        return Err(Error::ClassMismatch(
            "undominated check needs a submodular valuation".into(),
        ));
    }
    if bid.len() != val.k() {
        return Err(Error::Dimension(format!(
            "bid over {} units, valuation over {}",
            bid.len(),
            val.k()
        )));
    }
    let below = (1..=val.k()).all(|j| tolerance::le(bid.get(j), val.marginal(j)));
    Ok(below && tolerance::approx_eq(bid.get(1), val.value(1)))
}

/// Result of converting a canonical standard-format equilibrium to uniform bids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvertedEquilibrium {
    pub profile: BidProfile,
    pub allocation: Vec<usize>,
    pub price: f64,
    pub welfare: f64,
    pub regret: RegretReport,
}

fn is_canonical(val: &Valuation, row: &StandardBid, x: usize) -> bool {
    let k = val.k();
    if x == 0 {
        row.get(1) == val.marginal(1) && (2..=k).all(|j| row.get(j) == 0.0)
    } else {
        (1..=x).all(|j| row.get(j) == val.marginal(j)) && (x + 1..=k).all(|j| row.get(j) == 0.0)
    }
}

/// Converts a uniform-price equilibrium in which winners bid their marginals
/// on the units they win and losers bid only their first marginal.
///
/// Winners bid `v(x)/x` on `x` units, losers `m(1)` on one unit. Allocation,
/// price and welfare are checked to be unchanged, and the regret of the new
/// profile is reported under `grid`.
pub fn pne_standard_to_uniform(
    profile: &BidProfile,
    instance: &GameInstance,
    grid: &BidGrid,
) -> Result<ConvertedEquilibrium> {
    if instance.auction.pricing != Pricing::Uniform {
        return Err(Error::Config(
            "conversion applies to uniform pricing".into(),
        ));
    }
    if let Some(i) = instance.valuations.iter().position(|v| !v.is_submodular()) {
        return Err(Error::ClassMismatch(format!(
            "bidder {i} is not submodular"
        )));
    }
    let tb = &instance.auction.tie_break;
    let before = allocate(profile, tb);
    for (i, val) in instance.valuations.iter().enumerate() {
        if !is_canonical(val, profile.row(i), before.units[i]) {
            return Err(Error::NotCanonical(format!(
                "bidder {i} does not bid its marginals"
            )));
        }
    }
    let bids = instance
        .valuations
        .iter()
        .zip(&before.units)
        .map(|(val, &x)| {
            if x >= 1 {
                UniformBid::new(val.value(x) / x as f64, x)
            } else {
                UniformBid::new(val.marginal(1), 1)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let uniform = BidProfile::uniform(instance.k(), bids)?;
    let after = allocate(&uniform, tb);
    if after.units != before.units {
        return Err(Error::Domain("conversion changed the allocation".into()));
    }
    if after.uniform_price != before.uniform_price {
        return Err(Error::Domain("conversion changed the uniform price".into()));
    }
    let welfare = social_welfare(&instance.valuations, &after.units)?;
    if welfare != social_welfare(&instance.valuations, &before.units)? {
        return Err(Error::Domain("conversion changed welfare".into()));
    }
    let regret = is_pure_nash(&uniform, instance, grid)?;
    Ok(ConvertedEquilibrium {
        profile: uniform,
        allocation: after.units,
        price: after.uniform_price,
        welfare,
        regret,
    })
}

/// Equal-bid structure of a discriminatory equilibrium, with `d` the highest
/// losing marginal bid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualBidStructure {
    pub d: f64,
    /// Every winning marginal bid equals `d`.
    pub winning_bids_equal_d: bool,
    /// The top `l` won units of every bidder are worth at least `l * d`.
    pub won_blocks_cover_d: bool,
    /// The next `l` unwon units of every bidder are worth at most `l * d`.
    pub unwon_blocks_below_d: bool,
}

impl EqualBidStructure {
    pub fn holds(&self) -> bool {
        self.winning_bids_equal_d && self.won_blocks_cover_d && self.unwon_blocks_below_d
    }
}

pub fn check_equal_bid_structure(
    profile: &BidProfile,
    vals: &[Valuation],
    tb: &TieBreakRule,
) -> Result<EqualBidStructure> {
    if vals.len() != profile.n() {
        return Err(Error::Dimension(format!(
            "{} valuations for {} bidders",
            vals.len(),
            profile.n()
        )));
    }
    let k = profile.k();
    let alloc = allocate(profile, tb);
    let d = (0..profile.n())
        .flat_map(|i| {
            let x = alloc.units[i];
            profile.row(i).as_slice()[x..].to_vec()
        })
        .fold(0.0, f64::max);
    let mut equal = true;
    let mut won = true;
    let mut unwon = true;
    for (i, val) in vals.iter().enumerate() {
        let x = alloc.units[i];
        let row = profile.row(i);
        equal &= (1..=x).all(|j| row.get(j) == d);
        for l in 1..=x {
            let block: f64 = (x - l + 1..=x).map(|j| val.marginal(j)).sum();
            won &= tolerance::le(l as f64 * d, block);
        }
        for l in 1..=k - x {
            let block: f64 = (x + 1..=x + l).map(|j| val.marginal(j)).sum();
            unwon &= tolerance::le(block, l as f64 * d);
        }
    }
    Ok(EqualBidStructure {
        d,
        winning_bids_equal_d: equal,
        won_blocks_cover_d: won,
        unwon_blocks_below_d: unwon,
    })
}
