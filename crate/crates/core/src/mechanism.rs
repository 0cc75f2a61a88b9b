//! The standard multi-unit auction.
//!
//! The `k` highest marginal bids each win one unit; ties are resolved by an
//! explicit [`TieBreakRule`]. A marginal bid of exactly zero never wins, so fewer
//! than `k` units may be sold. Payments follow either discriminatory
//! (pay-as-bid) or uniform (highest losing bid per unit) pricing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::valuation::Valuation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pricing {
    /// Each winner pays the sum of its winning marginal bids.
    Discriminatory,
    /// Each winner pays the highest losing marginal bid per unit.
    Uniform,
    /// Each winner pays the lowest winning marginal bid per unit.
    UniformLowestWinning,
}

impl Pricing {
    pub fn name(self) -> &'static str {
        match self {
            Pricing::Discriminatory => "discriminatory",
            Pricing::Uniform => "uniform",
            Pricing::UniformLowestWinning => "uniform-lowest-winning",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interface {
    Standard,
    Uniform,
}

impl Interface {
    pub fn name(self) -> &'static str {
        match self {
            Interface::Standard => "standard",
            Interface::Uniform => "uniform",
        }
    }
}

/// Non-increasing, non-negative marginal bids `b(1..=k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StandardBid(Vec<f64>);

impl StandardBid {
    pub fn new(bids: Vec<f64>) -> Result<Self> {
        if bids.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::InvalidBid(format!(
                "bids must be finite and non-negative: {bids:?}"
            )));
        }
        if bids.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidBid(format!(
                "bids must be non-increasing: {bids:?}"
            )));
        }
        Ok(Self(bids))
    }

    pub fn zero(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `b(j)` for 1-based `j`; `b(0)` is taken as 0.
    pub fn get(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.0[j - 1]
        }
    }

    pub fn prefix_sum(&self, x: usize) -> f64 {
        self.0[..x].iter().sum()
    }
}

impl AsRef<[f64]> for StandardBid {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for StandardBid {
    type Error = Error;

    fn try_from(bids: Vec<f64>) -> Result<Self> {
        Self::new(bids)
    }
}

impl From<StandardBid> for Vec<f64> {
    fn from(b: StandardBid) -> Self {
        b.0
    }
}

/// A per-unit price for up to `quantity` units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformBid {
    pub price: f64,
    pub quantity: usize,
}

impl UniformBid {
    pub fn new(price: f64, quantity: usize) -> Result<Self> {
        if !price.is_finite() || price < 0.0 {
            return Err(Error::InvalidBid(format!(
                "uniform price must be non-negative, got {price}"
            )));
        }
        Ok(Self { price, quantity })
    }

    /// Vector form: `price` on the first `quantity` slots, zero after.
    pub fn expand(&self, k: usize) -> StandardBid {
        StandardBid(
            (0..k)
                .map(|j| if j < self.quantity { self.price } else { 0.0 })
                .collect(),
        )
    }
}

/// `expand_uniform`: the standard vector of a uniform bid.
pub fn expand_uniform(ub: UniformBid, k: usize) -> Result<StandardBid> {
    if ub.quantity > k {
        return Err(Error::InvalidBid(format!(
            "quantity {} exceeds k = {k}",
            ub.quantity
        )));
    }
    Ok(ub.expand(k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bid {
    Standard(StandardBid),
    Uniform(UniformBid),
}

impl Bid {
    pub fn to_standard(&self, k: usize) -> StandardBid {
        match self {
            Bid::Standard(b) => b.clone(),
            Bid::Uniform(u) => u.expand(k),
        }
    }
}

impl From<StandardBid> for Bid {
    fn from(b: StandardBid) -> Self {
        Bid::Standard(b)
    }
}

impl From<UniformBid> for Bid {
    fn from(b: UniformBid) -> Self {
        Bid::Uniform(b)
    }
}

/// One bid per bidder, all over the same `k` units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile", into = "RawProfile")]
pub struct BidProfile {
    k: usize,
    interface: Interface,
    bids: Vec<Bid>,
    rows: Vec<StandardBid>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    k: usize,
    interface: Interface,
    bids: Vec<Bid>,
}

impl TryFrom<RawProfile> for BidProfile {
    type Error = Error;

    fn try_from(raw: RawProfile) -> Result<Self> {
        Self::new(raw.k, raw.interface, raw.bids)
    }
}

impl From<BidProfile> for RawProfile {
    fn from(p: BidProfile) -> Self {
        RawProfile {
            k: p.k,
            interface: p.interface,
            bids: p.bids,
        }
    }
}

impl BidProfile {
    pub fn new(k: usize, interface: Interface, bids: Vec<Bid>) -> Result<Self> {
        let mut rows = Vec::with_capacity(bids.len());
        for (i, bid) in bids.iter().enumerate() {
            match bid {
                Bid::Standard(b) => {
                    if interface == Interface::Uniform {
                        return Err(Error::InvalidBid(format!(
                            "bidder {i} submitted a standard bid in a uniform-interface profile"
                        )));
                    }
                    if b.len() != k {
                        return Err(Error::Dimension(format!(
                            "bidder {i} has {} marginal bids, expected {k}",
                            b.len()
                        )));
                    }
                }
                Bid::Uniform(u) => {
                    if u.quantity > k {
                        return Err(Error::InvalidBid(format!(
                            "bidder {i} quantity {} exceeds k = {k}",
                            u.quantity
                        )));
                    }
                }
            }
            rows.push(bid.to_standard(k));
        }
        Ok(Self {
            k,
            interface,
            bids,
            rows,
        })
    }

    pub fn standard(rows: Vec<StandardBid>) -> Result<Self> {
        let k = rows.first().map_or(0, StandardBid::len);
        Self::new(
            k,
            Interface::Standard,
            rows.into_iter().map(Bid::Standard).collect(),
        )
    }

    pub fn uniform(k: usize, bids: Vec<UniformBid>) -> Result<Self> {
        Self::new(
            k,
            Interface::Uniform,
            bids.into_iter().map(Bid::Uniform).collect(),
        )
    }

    /// Convenience constructor from raw vectors; panics on invalid input.
    pub fn from_vecs(rows: Vec<Vec<f64>>) -> Self {
        Self::standard(
            rows.into_iter()
                .map(|r| StandardBid::new(r).expect("valid bid vector"))
                .collect(),
        )
        .expect("valid profile")
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.bids.len()
    }

    pub fn interface(&self) -> Interface {
        self.interface
    }

    pub fn bids(&self) -> &[Bid] {
        &self.bids
    }

    /// Marginal-bid vector of bidder `i`.
    pub fn row(&self, i: usize) -> &StandardBid {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[StandardBid] {
        &self.rows
    }

    /// Copy of the profile with bidder `i`'s bid replaced.
    pub fn with_bid(&self, i: usize, bid: Bid) -> Result<Self> {
        let mut bids = self.bids.clone();
        bids[i] = bid;
        let interface = if matches!(bids[i], Bid::Standard(_)) {
            Interface::Standard
        } else {
            self.interface
        };
        Self::new(self.k, interface, bids)
    }
}

/// Strict priority among equal marginal bids; the lower rank wins the tie.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TieBreakRule {
    /// Lower bidder index first, then lower slot index.
    Lexicographic,
    /// The given bidder first, then the others lexicographically.
    FavorBidder { bidder: usize },
    /// Highest bidder index first.
    FavorLast,
    /// Listed `(bidder, slot)` pairs first in list order, the rest lexicographically.
    /// Slots are 0-based.
    Priority { order: Vec<(usize, usize)> },
}

impl TieBreakRule {
    pub fn favor(bidder: usize) -> Self {
        TieBreakRule::FavorBidder { bidder }
    }

    /// Rank of `(bidder, slot)`; slots are 0-based.
    pub fn rank(&self, n: usize, k: usize, bidder: usize, slot: usize) -> usize {
        let lex = bidder * k + slot;
        match self {
            TieBreakRule::Lexicographic => lex,
            TieBreakRule::FavorBidder { bidder: f } => {
                if bidder == *f {
                    slot
                } else if bidder < *f {
                    (bidder + 1) * k + slot
                } else {
                    lex
                }
            }
            TieBreakRule::FavorLast => (n - 1 - bidder.min(n - 1)) * k + slot,
            TieBreakRule::Priority { order } => {
                match order.iter().position(|&p| p == (bidder, slot)) {
                    Some(pos) => pos,
                    None => order.len() + lex,
                }
            }
        }
    }

    /// Named presets over `n` bidders.
    pub fn presets(n: usize) -> Vec<TieBreakRule> {
        let mut out = vec![TieBreakRule::Lexicographic, TieBreakRule::FavorLast];
        out.extend((0..n).map(TieBreakRule::favor));
        out
    }

    pub fn label(&self) -> String {
        match self {
            TieBreakRule::Lexicographic => "lexicographic".into(),
            TieBreakRule::FavorBidder { bidder } => format!("favor-bidder-{bidder}"),
            TieBreakRule::FavorLast => "favor-last".into(),
            TieBreakRule::Priority { .. } => "priority".into(),
        }
    }
}

/// Units won, winning bids and the uniform price of one run of the auction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// `x_i`, units won per bidder.
    pub units: Vec<usize>,
    /// `β(1..=k)`, winning bids in non-decreasing order, zero-padded in front.
    pub winning_bids: Vec<f64>,
    /// Highest losing marginal bid (0 if none).
    pub uniform_price: f64,
}

impl Allocation {
    /// Lowest positive winning bid, 0 if nothing sold.
    pub fn lowest_winning(&self) -> f64 {
        self.winning_bids
            .iter()
            .copied()
            .find(|b| *b > 0.0)
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub allocation: Vec<usize>,
    pub winning_bids: Vec<f64>,
    pub uniform_price: f64,
    pub payments: Vec<f64>,
}

/// Runs the selection over raw marginal rows. Rows shorter than `k` are
/// treated as zero-padded.
pub fn allocate_rows<R: AsRef<[f64]>>(rows: &[R], tb: &TieBreakRule, k: usize) -> Allocation {
    let n = rows.len();
    let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(n * k);
    for (i, row) in rows.iter().enumerate() {
        for (j, &b) in row.as_ref().iter().enumerate().take(k) {
            if b > 0.0 {
                entries.push((b, tb.rank(n, k, i, j), i));
            }
        }
    }
    entries.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let sold = entries.len().min(k);
    let mut units = vec![0usize; n];
    let mut winning_bids = vec![0.0; k];
    for (pos, &(b, _, i)) in entries[..sold].iter().enumerate() {
        units[i] += 1;
        // highest winner goes last so the vector is non-decreasing
        winning_bids[k - 1 - pos] = b;
    }
    let uniform_price = entries.get(k).map_or(0.0, |e| e.0);
    Allocation {
        units,
        winning_bids,
        uniform_price,
    }
}

/// `allocate`: selection step of the auction on a profile.
pub fn allocate(profile: &BidProfile, tb: &TieBreakRule) -> Allocation {
    allocate_rows(profile.rows(), tb, profile.k())
}

/// `P_i = Σ_{j <= x_i} b_i(j)`.
pub fn price_discriminatory(profile: &BidProfile, alloc: &Allocation) -> Vec<f64> {
    alloc
        .units
        .iter()
        .enumerate()
        .map(|(i, &x)| profile.row(i).prefix_sum(x))
        .collect()
}

/// `P_i = x_i * p`.
pub fn price_uniform(alloc: &Allocation) -> Vec<f64> {
    alloc
        .units
        .iter()
        .map(|&x| x as f64 * alloc.uniform_price)
        .collect()
}

pub fn payments<R: AsRef<[f64]>>(rows: &[R], alloc: &Allocation, pricing: Pricing) -> Vec<f64> {
    match pricing {
        Pricing::Discriminatory => alloc
            .units
            .iter()
            .zip(rows)
            .map(|(&x, r)| r.as_ref()[..x].iter().sum())
            .collect(),
        Pricing::Uniform => price_uniform(alloc),
        Pricing::UniformLowestWinning => {
            let p = alloc.lowest_winning();
            alloc.units.iter().map(|&x| x as f64 * p).collect()
        }
    }
}

/// Auction rules: number of units, pricing rule and tie-break.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Auction {
    pub k: usize,
    pub pricing: Pricing,
    pub tie_break: TieBreakRule,
}

impl Auction {
    pub fn new(k: usize, pricing: Pricing, tie_break: TieBreakRule) -> Self {
        Self {
            k,
            pricing,
            tie_break,
        }
    }

    pub fn run(&self, profile: &BidProfile) -> Outcome {
        let alloc = allocate(profile, &self.tie_break);
        let payments = payments(profile.rows(), &alloc, self.pricing);
        Outcome {
            allocation: alloc.units,
            winning_bids: alloc.winning_bids,
            uniform_price: alloc.uniform_price,
            payments,
        }
    }

    /// Utility of bidder `i` with valuation `val` when bidding `rows[i]`.
    pub fn utility_rows<R: AsRef<[f64]>>(&self, rows: &[R], i: usize, val: &Valuation) -> f64 {
        let alloc = allocate_rows(rows, &self.tie_break, self.k);
        let x = alloc.units[i];
        let pay = match self.pricing {
            Pricing::Discriminatory => rows[i].as_ref()[..x].iter().sum(),
            Pricing::Uniform => x as f64 * alloc.uniform_price,
            Pricing::UniformLowestWinning => x as f64 * alloc.lowest_winning(),
        };
        val.value(x) - pay
    }

    pub fn utility(&self, profile: &BidProfile, i: usize, val: &Valuation) -> f64 {
        self.utility_rows(profile.rows(), i, val)
    }
}

/// `utility`: `v(x_i) - P_i` under the auction's pricing rule.
pub fn utility(val: &Valuation, profile: &BidProfile, i: usize, auction: &Auction) -> Result<f64> {
    if val.k() != profile.k() || auction.k != profile.k() {
        return Err(Error::Dimension(format!(
            "valuation k = {}, profile k = {}, auction k = {}",
            val.k(),
            profile.k(),
            auction.k
        )));
    }
    Ok(auction.utility(profile, i, val))
}

/// `check_no_overbidding`: every prefix sum of `bid` is at most `v` at that count.
pub fn check_no_overbidding(val: &Valuation, bid: &StandardBid) -> Result<bool> {
    if val.k() != bid.len() {
        return Err(Error::Dimension(format!(
            "valuation over {} units, bid over {}",
            val.k(),
            bid.len()
        )));
    }
    Ok(val.admits(bid.as_slice()))
}

/// Winning bids of the auction run without bidder `i`.
pub fn beta_minus_i(profile: &BidProfile, i: usize, tb: &TieBreakRule) -> Vec<f64> {
    let others: Vec<&[f64]> = profile
        .rows()
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, r)| r.as_slice())
        .collect();
    allocate_rows(&others, tb, profile.k()).winning_bids
}

/// `SW = Σ_i v_i(x_i)`.
pub fn social_welfare(vals: &[Valuation], units: &[usize]) -> Result<f64> {
    if vals.len() != units.len() {
        return Err(Error::Dimension(format!(
            "{} valuations for {} bidders",
            vals.len(),
            units.len()
        )));
    }
    let mut total = 0.0;
    for (v, &x) in vals.iter().zip(units) {
        if x > v.k() {
            return Err(Error::UnitsOutOfRange { x, k: v.k() });
        }
        total += v.value(x);
    }
    Ok(total)
}

/// Maximum payment bidder `i` can face under uniform pricing given `x` units won.
pub fn willingness_to_pay(bid: &StandardBid, x: usize) -> f64 {
    x as f64 * bid.get(x)
}

/// Replaces each bidder's bid by its last winning bid on the units it won.
///
/// Under uniform pricing the allocation is preserved and so is each bidder's
/// willingness to pay at the allocated quantity.
pub fn uniformize_profile(profile: &BidProfile, tb: &TieBreakRule) -> Result<BidProfile> {
    let alloc = allocate(profile, tb);
    let bids = alloc
        .units
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if x == 0 {
                UniformBid::new(0.0, 0)
            } else {
                UniformBid::new(profile.row(i).get(x), x)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    BidProfile::uniform(profile.k(), bids)
}

/// Sorted view of the marginal bids facing one bidder.
#[derive(Debug, Clone, PartialEq)]
pub struct OpposingBids {
    k: usize,
    /// All positive opposing marginal bids, non-increasing.
    desc: Vec<f64>,
}

impl OpposingBids {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], skip: Option<usize>, k: usize) -> Self {
        let mut desc: Vec<f64> = rows
            .iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != skip)
            .flat_map(|(_, r)| r.as_ref().iter().take(k).copied())
            .filter(|b| *b > 0.0)
            .collect();
        desc.sort_by(|a, b| b.total_cmp(a));
        Self { k, desc }
    }

    pub fn of_profile(profile: &BidProfile, i: usize) -> Self {
        Self::from_rows(profile.rows(), Some(i), profile.k())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `β_j` of the opposing bids alone, 1-based, ascending in `j`.
    pub fn beta(&self, j: usize) -> f64 {
        debug_assert!(j >= 1 && j <= self.k);
        self.desc.get(self.k - j).copied().unwrap_or(0.0)
    }

    pub fn betas(&self) -> Vec<f64> {
        (1..=self.k).map(|j| self.beta(j)).collect()
    }

    /// Highest opposing bid outside the opposing top `k` (0 if none).
    pub fn beta_zero(&self) -> f64 {
        self.desc.get(self.k).copied().unwrap_or(0.0)
    }

    /// Bid level that must be met to win `j` units: `β_j`.
    pub fn threshold(&self, j: usize) -> f64 {
        self.beta(j)
    }

    pub fn desc(&self) -> &[f64] {
        &self.desc
    }
}

/// Units won by a bidder submitting `price` on `quantity` slots against `opp`,
/// assuming strict comparisons (ties lost).
pub fn units_won_strict(opp: &OpposingBids, price: f64, quantity: usize) -> usize {
    if price <= 0.0 {
        return 0;
    }
    (1..=quantity.min(opp.k()))
        .take_while(|&j| price > opp.beta(j))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valuation::{random_valuation, ValuationClass};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lex() -> TieBreakRule {
        TieBreakRule::Lexicographic
    }

    #[test]
    fn expand_uniform_examples() {
        let b = expand_uniform(UniformBid::new(2.0, 2).unwrap(), 3).unwrap();
        assert_eq!(b.as_slice(), &[2.0, 2.0, 0.0]);
        let b = expand_uniform(UniformBid::new(0.5, 1).unwrap(), 1).unwrap();
        assert_eq!(b.as_slice(), &[0.5]);
        let k = 6;
        let b = expand_uniform(UniformBid::new(1.0 / (k as f64 - 1.0), k).unwrap(), k).unwrap();
        assert!(b.as_slice().iter().all(|&x| x == 0.2));
        assert!(expand_uniform(UniformBid::new(1.0, 4).unwrap(), 3).is_err());
    }

    #[test]
    fn single_bidder_wins_everything_at_zero_price() {
        let p = BidProfile::from_vecs(vec![vec![5.0, 4.0, 3.0]]);
        let a = allocate(&p, &lex());
        assert_eq!(a.units, vec![3]);
        assert_eq!(a.winning_bids, vec![3.0, 4.0, 5.0]);
        assert_eq!(a.uniform_price, 0.0);
    }

    #[test]
    fn two_bidder_example() {
        let p = BidProfile::from_vecs(vec![vec![3.0, 1.0], vec![2.0, 2.0]]);
        let a = allocate(&p, &lex());
        // merged bids {3, 2, 2, 1}: top two are 3 and 2, third highest is 2
        assert_eq!(a.units, vec![1, 1]);
        assert_eq!(a.winning_bids, vec![2.0, 3.0]);
        assert_eq!(a.uniform_price, 2.0);
        assert_eq!(price_discriminatory(&p, &a), vec![3.0, 2.0]);
        assert_eq!(price_uniform(&a), vec![2.0, 2.0]);
    }

    #[test]
    fn zero_bids_never_win() {
        let p = BidProfile::from_vecs(vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]]);
        let a = allocate(&p, &lex());
        assert_eq!(a.units, vec![1, 0]);
        assert_eq!(a.winning_bids, vec![0.0, 0.0, 1.0]);
        assert_eq!(a.uniform_price, 0.0);
        assert_eq!(price_discriminatory(&p, &allocate(&p, &lex()))[1], 0.0);
    }

    #[test]
    fn tie_break_presets() {
        let p = BidProfile::from_vecs(vec![vec![0.5], vec![0.5]]);
        assert_eq!(allocate(&p, &lex()).units, vec![1, 0]);
        assert_eq!(allocate(&p, &TieBreakRule::FavorLast).units, vec![0, 1]);
        assert_eq!(allocate(&p, &TieBreakRule::favor(1)).units, vec![0, 1]);
        let a = allocate(&p, &TieBreakRule::favor(1));
        assert_eq!(price_uniform(&a), vec![0.0, 0.5]);
        let prio = TieBreakRule::Priority {
            order: vec![(1, 0)],
        };
        assert_eq!(allocate(&p, &prio).units, vec![0, 1]);
    }

    #[test]
    fn pricing_variant_lowest_winning() {
        let p = BidProfile::from_vecs(vec![vec![3.0, 1.0], vec![2.0, 2.0]]);
        let a = allocate(&p, &lex());
        assert_eq!(
            payments(p.rows(), &a, Pricing::UniformLowestWinning),
            vec![2.0, 2.0]
        );
        let p = BidProfile::from_vecs(vec![vec![3.0, 1.0], vec![0.5, 0.0]]);
        let a = allocate(&p, &lex());
        assert_eq!(
            payments(p.rows(), &a, Pricing::UniformLowestWinning),
            vec![2.0, 0.0]
        );
        assert_eq!(payments(p.rows(), &a, Pricing::Uniform), vec![1.0, 0.0]);
    }

    #[test]
    fn no_overbidding_examples() {
        let v = Valuation::new(vec![0.0, 1.0]).unwrap();
        assert!(check_no_overbidding(&v, &StandardBid::zero(1)).unwrap());
        assert!(!check_no_overbidding(&v, &StandardBid::new(vec![1.5]).unwrap()).unwrap());
        let sub = Valuation::new(vec![0.0, 2.0, 3.0, 3.5]).unwrap();
        let truthful = StandardBid::new(sub.marginals()).unwrap();
        assert!(check_no_overbidding(&sub, &truthful).unwrap());
        assert!(check_no_overbidding(&sub, &StandardBid::zero(2)).is_err());
    }

    #[test]
    fn loser_utility_is_zero() {
        let auction = Auction::new(1, Pricing::Discriminatory, lex());
        let p = BidProfile::from_vecs(vec![vec![0.3], vec![0.4]]);
        let v = Valuation::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(utility(&v, &p, 0, &auction).unwrap(), 0.0);
        assert!((utility(&v, &p, 1, &auction).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn uniformize_known_bid() {
        let p = BidProfile::from_vecs(vec![vec![3.0, 2.0, 1.0], vec![1.5, 0.0, 0.0]]);
        let u = uniformize_profile(&p, &lex()).unwrap();
        assert_eq!(
            u.bids()[0],
            Bid::Uniform(UniformBid {
                price: 2.0,
                quantity: 2
            })
        );
        assert_eq!(
            u.bids()[1],
            Bid::Uniform(UniformBid {
                price: 1.5,
                quantity: 1
            })
        );
        assert_eq!(uniformize_profile(&u, &lex()).unwrap(), u);
    }

    #[test]
    fn profile_json_round_trip() {
        let p = BidProfile::uniform(
            3,
            vec![
                UniformBid::new(0.5, 2).unwrap(),
                UniformBid::new(0.25, 3).unwrap(),
            ],
        )
        .unwrap();
        let text = serde_json::to_string(&p).unwrap();
        let back: BidProfile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
        let std_text = r#"{"k":2,"interface":"standard","bids":[[2.0,1.0],[1.0,1.5]]}"#;
        assert!(serde_json::from_str::<BidProfile>(std_text).is_err());
        let tb: TieBreakRule =
            serde_json::from_str(r#"{"kind":"favor-bidder","bidder":1}"#).unwrap();
        assert_eq!(tb, TieBreakRule::favor(1));
    }

    fn random_profile(rng: &mut ChaCha8Rng, n: usize, k: usize, vals: &[Valuation]) -> BidProfile {
        let rows = (0..n)
            .map(|i| {
                let mut b: Vec<f64> = (0..k)
                    .map(|_| {
                        if rng.gen_bool(0.2) {
                            0.0
                        } else {
                            (rng.gen::<f64>() * 8.0).round() / 8.0
                        }
                    })
                    .collect();
                b.sort_by(|a, c| c.total_cmp(a));
                // scale into no-overbidding territory
                let v = &vals[i];
                let mut scale: f64 = 1.0;
                let mut acc = 0.0;
                for (s, x) in b.iter().enumerate() {
                    acc += x;
                    if acc > 0.0 {
                        scale = scale.min(v.value(s + 1) / acc);
                    }
                }
                StandardBid::new(b.into_iter().map(|x| x * scale).collect()).unwrap()
            })
            .collect();
        BidProfile::standard(rows).unwrap()
    }

    proptest! {
        #[test]
        fn outcome_invariants(seed in any::<u64>(), n in 1usize..5, k in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<Valuation> = (0..n)
                .map(|i| random_valuation(ValuationClass::General, k, 1.0, seed ^ i as u64).unwrap())
                .collect();
            let p = random_profile(&mut rng, n, k, &vals);
            let tb = TieBreakRule::presets(n)[(seed % (n as u64 + 2)) as usize].clone();
            let a = allocate(&p, &tb);
            prop_assert!(a.units.iter().sum::<usize>() <= k);
            prop_assert!(a.winning_bids.windows(2).all(|w| w[0] <= w[1]));
            if a.units.iter().sum::<usize>() == k {
                prop_assert!(a.uniform_price <= a.winning_bids[0]);
            }
            let disc = price_discriminatory(&p, &a);
            let unif = price_uniform(&a);
            for i in 0..n {
                prop_assert!(unif[i] <= disc[i] + 1e-12);
            }
            // discriminatory revenue equals the sum of winning bids
            let revenue: f64 = disc.iter().sum();
            prop_assert!((revenue - a.winning_bids.iter().sum::<f64>()).abs() < 1e-9);
            // no-overbidding bounds revenue by welfare
            let sw = social_welfare(&vals, &a.units).unwrap();
            prop_assert!(a.winning_bids.iter().sum::<f64>() <= sw + 1e-9);
            for i in 0..n {
                // removing a bidder never raises any winning bid
                let without = beta_minus_i(&p, i, &tb);
                for (w, b) in without.iter().zip(&a.winning_bids) {
                    prop_assert!(w <= b);
                }
                // brute-force re-run agrees
                let others: Vec<Vec<f64>> = (0..n).filter(|&j| j != i).map(|j| p.row(j).as_slice().to_vec()).collect();
                prop_assert_eq!(allocate_rows(&others, &tb, k).winning_bids, without.clone());
                prop_assert_eq!(OpposingBids::of_profile(&p, i).betas(), without);
            }
        }

        #[test]
        fn raising_a_bid_never_loses_units(seed in any::<u64>(), n in 1usize..4, k in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<Valuation> = (0..n)
                .map(|i| random_valuation(ValuationClass::General, k, 1.0, seed ^ (i as u64 + 99)).unwrap())
                .collect();
            let p = random_profile(&mut rng, n, k, &vals);
            let tb = TieBreakRule::Lexicographic;
            let before = allocate(&p, &tb);
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..k);
            let mut row = p.row(i).as_slice().to_vec();
            let ceiling = if j == 0 { row[0] + 1.0 } else { row[j - 1] };
            row[j] += rng.gen::<f64>() * (ceiling - row[j]);
            let raised = p.with_bid(i, Bid::Standard(StandardBid::new(row).unwrap())).unwrap();
            prop_assert!(allocate(&raised, &tb).units[i] >= before.units[i]);
        }

        #[test]
        fn uniformization_preserves_units_and_willingness(seed in any::<u64>(), n in 1usize..5, k in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<Valuation> = (0..n)
                .map(|i| random_valuation(ValuationClass::General, k, 1.0, seed ^ (i as u64 + 7)).unwrap())
                .collect();
            let p = random_profile(&mut rng, n, k, &vals);
            let tb = TieBreakRule::Lexicographic;
            let a = allocate(&p, &tb);
            let u = uniformize_profile(&p, &tb).unwrap();
            let b = allocate(&u, &tb);
            prop_assert_eq!(&a.units, &b.units);
            for i in 0..n {
                let x = a.units[i];
                prop_assert_eq!(willingness_to_pay(p.row(i), x), willingness_to_pay(u.row(i), b.units[i]));
            }
        }
    }
}
