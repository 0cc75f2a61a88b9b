//! Named constructions: lower-bound games, frontier witnesses, a Bayesian
//! example and builders for tie-break equilibria.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::equilibrium::{BayesianGame, BidGrid, GameInstance, MixedBid, Strategy};
use crate::error::{Error, Result};
use crate::mechanism::{
    allocate, Auction, BidProfile, Interface, Pricing, StandardBid, TieBreakRule, UniformBid,
};
use crate::valuation::Valuation;
use crate::welfare::optimal_allocation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileRole {
    Equilibrium,
    LowerBoundWitness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoledProfile {
    pub role: ProfileRole,
    pub profile: BidProfile,
}

/// How an expected quantity was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    /// Closed form for the given parameters; reproduced to 1e-9.
    Formula,
    /// A bound the quantity must meet, with the stated slack.
    Limit,
}

/// How a measured quantity is compared with its expected value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Equal,
    AtLeast,
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub basis: Basis,
}

impl Expected {
    pub fn accepts(&self, measured: f64) -> bool {
        match self.relation {
            Relation::Equal => (measured - self.value).abs() <= self.tolerance,
            Relation::AtLeast => measured >= self.value - self.tolerance,
            Relation::AtMost => measured <= self.value + self.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesianExample {
    pub game: BayesianGame,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedInstance {
    pub id: String,
    pub description: String,
    /// Construction parameters, by name.
    pub parameters: BTreeMap<String, f64>,
    pub valuations: Vec<Valuation>,
    pub auction: Auction,
    pub interface: Interface,
    pub profiles: Vec<RoledProfile>,
    pub expected: Vec<Expected>,
    /// Strategy grid under which equilibrium profiles are checked.
    pub grid: Option<BidGrid>,
    pub bayesian: Option<BayesianExample>,
}

impl NamedInstance {
    pub fn game(&self) -> Result<GameInstance> {
        GameInstance::new(self.valuations.clone(), self.auction.clone())
    }

    pub fn expected(&self, name: &str) -> Option<&Expected> {
        self.expected.iter().find(|e| e.name == name)
    }

    pub fn profile(&self, role: ProfileRole) -> Option<&BidProfile> {
        self.profiles
            .iter()
            .find(|p| p.role == role)
            .map(|p| &p.profile)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn expect(name: &str, value: f64, tolerance: f64, basis: Basis) -> Expected {
    Expected {
        name: name.into(),
        value,
        tolerance,
        relation: Relation::Equal,
        basis,
    }
}

fn at_least(name: &str, value: f64, tolerance: f64) -> Expected {
    Expected {
        name: name.into(),
        value,
        tolerance,
        relation: Relation::AtLeast,
        basis: Basis::Limit,
    }
}

fn at_most(name: &str, value: f64, tolerance: f64, basis: Basis) -> Expected {
    Expected {
        name: name.into(),
        value,
        tolerance,
        relation: Relation::AtMost,
        basis,
    }
}

fn first_only(b: f64, k: usize) -> StandardBid {
    let mut v = vec![0.0; k];
    v[0] = b;
    StandardBid::new(v).expect("non-negative")
}

/// Uniform-price game with `k` bidders: one bidder values any `j < k` units at
/// 1 and all `k` at 2, a second wants one unit at `1/k`, the rest one unit at
/// `eps`. Everyone bidding for a single unit is an equilibrium whose welfare
/// is about half the optimum.
pub fn upa_subadditive_lower_bound(
    k: usize,
    eps: f64,
    interface: Interface,
) -> Result<NamedInstance> {
    if k < 3 {
        return Err(Error::Config(format!("need k >= 3, got {k}")));
    }
    if !(eps > 0.0) || eps >= 1.0 / k as f64 {
        return Err(Error::Config(format!(
            "eps must lie in (0, 1/k), got {eps}"
        )));
    }
    let mut big = vec![1.0; k + 1];
    big[0] = 0.0;
    big[k] = 2.0;
    let mut valuations = vec![
        Valuation::new(big)?,
        Valuation::unit_demand(k, 1.0 / k as f64)?,
    ];
    valuations.extend(
        (2..k)
            .map(|_| Valuation::unit_demand(k, eps))
            .collect::<Result<Vec<_>>>()?,
    );
    let firsts: Vec<f64> = std::iter::once(1.0)
        .chain(std::iter::once(1.0 / k as f64))
        .chain((2..k).map(|_| eps))
        .collect();
    let profile = match interface {
        Interface::Standard => {
            BidProfile::standard(firsts.iter().map(|&b| first_only(b, k)).collect())?
        }
        Interface::Uniform => BidProfile::uniform(
            k,
            firsts
                .iter()
                .map(|&b| UniformBid::new(b, 1))
                .collect::<Result<_>>()?,
        )?,
    };
    let kf = k as f64;
    let eq_welfare = 1.0 + 1.0 / kf + (k - 2) as f64 * eps;
    Ok(NamedInstance {
        id: "upa-subadditive-lower-bound".into(),
        description: format!("uniform price, k = {k}, eps = {eps}: single-unit bids are an equilibrium far from optimal"),
        parameters: params(&[("k", kf), ("eps", eps)]),
        valuations,
        auction: Auction::new(k, Pricing::Uniform, TieBreakRule::Lexicographic),
        interface,
        profiles: vec![RoledProfile { role: ProfileRole::Equilibrium, profile }],
        expected: vec![
            expect("opt", 2.0, 1e-9, Basis::Formula),
            expect("eq_welfare", eq_welfare, 1e-9, Basis::Formula),
            expect("poa", 2.0 / eq_welfare, 1e-9, Basis::Formula),
            at_least("poa", 2.0 * kf / (kf + 1.0) - 1e-4, 0.0),
            at_most("regret", 0.0, crate::tolerance::EQUILIBRIUM, Basis::Formula),
        ],
        grid: Some(BidGrid::new(1e-3, 2.0, interface, true)?),
        bayesian: None,
    })
}

/// Opposing bids for the discriminatory frontier witness:
/// `1 - k / (e^{1/μ} (k - j + 1))` for `j <= floor(k (1 - e^{-1/μ}) + 1)`,
/// zero afterwards and clamped at zero.
pub fn frontier_opposing_bids(k: usize, mu: f64) -> Vec<f64> {
    let kf = k as f64;
    let shrink = (-1.0 / mu).exp();
    let last = (kf * (1.0 - shrink) + 1.0).floor() as usize;
    (1..=k)
        .map(|j| {
            if j <= last {
                (1.0 - kf * shrink / (kf - j as f64 + 1.0)).max(0.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Discriminatory game where an additive bidder (value 1 per unit) faces a
/// worthless bidder whose bids make every unit count equally profitable.
/// No deviation template beats `e^{1/μ} / (e^{1/μ} - 1)` here.
pub fn da_template_frontier(k: usize, mu: f64) -> Result<NamedInstance> {
    if k < 2 || !(mu > 0.0) {
        return Err(Error::Config(format!(
            "need k >= 2 and mu > 0, got k = {k}, mu = {mu}"
        )));
    }
    let profile = BidProfile::standard(vec![
        StandardBid::zero(k),
        StandardBid::new(frontier_opposing_bids(k, mu))?,
    ])?;
    let e = std::f64::consts::E;
    let bound = mu * (1.0 - (-1.0 / mu).exp() + (1.0 - 1.0 / e) / k as f64) * k as f64;
    Ok(NamedInstance {
        id: "da-template-frontier".into(),
        description: format!("discriminatory, k = {k}, mu = {mu}: deviation utilities plus payments stay below the template frontier"),
        parameters: params(&[("k", k as f64), ("mu", mu)]),
        valuations: vec![Valuation::additive(k, 1.0)?, Valuation::additive(k, 0.0)?],
        auction: Auction::new(k, Pricing::Discriminatory, TieBreakRule::favor(0)),
        interface: Interface::Standard,
        profiles: vec![RoledProfile { role: ProfileRole::LowerBoundWitness, profile }],
        expected: vec![
            expect("opt", k as f64, 1e-9, Basis::Formula),
            expect("sup_deviation_utility", k as f64 * (-1.0 / mu).exp(), 1e-3 * k as f64, Basis::Limit),
            at_most("frontier_lhs", bound, 1e-6, Basis::Limit),
        ],
        grid: Some(BidGrid {
            enumeration_limit: 10 * k * 1001,
            ..BidGrid::new(1e-3, 1.0, Interface::Standard, true)?
        }),
        bayesian: None,
    })
}

/// One item, uniform price, values 1 and 1/2, both bid 1/2 and the tie goes to
/// the low-value bidder.
pub fn upa_template_frontier() -> Result<NamedInstance> {
    let profile = BidProfile::from_vecs(vec![vec![0.5], vec![0.5]]);
    Ok(NamedInstance {
        id: "upa-template-frontier".into(),
        description: "uniform price, one item: the tie goes to the low-value bidder at price 1/2"
            .into(),
        parameters: BTreeMap::new(),
        valuations: vec![
            Valuation::unit_demand(1, 1.0)?,
            Valuation::unit_demand(1, 0.5)?,
        ],
        auction: Auction::new(1, Pricing::Uniform, TieBreakRule::favor(1)),
        interface: Interface::Standard,
        profiles: vec![RoledProfile {
            role: ProfileRole::LowerBoundWitness,
            profile,
        }],
        expected: vec![
            expect("opt", 1.0, 1e-9, Basis::Formula),
            expect("eq_welfare", 0.5, 1e-9, Basis::Formula),
            expect("sum_sup_utility", 0.5, 1e-12, Basis::Formula),
        ],
        grid: Some(BidGrid::new(1e-3, 1.0, Interface::Standard, true)?),
        bayesian: None,
    })
}

/// One item, discriminatory pricing on a `tick` grid: bidder 0 has value 1,
/// bidder 1 has value 0.667 with probability `alpha` and 0.333 otherwise. The
/// strategy `b_0 = 0.333`, `b_1 = 0.334 / 0.333` is an equilibrium for small
/// `alpha` and misallocates with probability `alpha`.
pub fn da_bayesian_inefficiency(alpha: f64, tick: f64) -> Result<NamedInstance> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let grid = BidGrid::new(tick, 1.0, Interface::Standard, true)?;
    let auction = Auction::new(1, Pricing::Discriminatory, TieBreakRule::favor(0));
    let (high, low) = (0.667, 0.333);
    let types = vec![
        vec![Valuation::unit_demand(1, 1.0)?],
        vec![
            Valuation::unit_demand(1, high)?,
            Valuation::unit_demand(1, low)?,
        ],
    ];
    let priors = vec![vec![1.0], vec![alpha, 1.0 - alpha]];
    let bid = |b: f64| StandardBid::new(vec![grid.snap(b)]).map(MixedBid::pure);
    let strategy = Strategy {
        bids: vec![vec![bid(low)?], vec![bid(low + tick)?, bid(low)?]],
    };
    let game = BayesianGame::new(types, priors, grid.clone(), auction.clone())?;
    let eq = 1.0 - (1.0 - high) * alpha;
    Ok(NamedInstance {
        id: "da-bayesian-inefficiency".into(),
        description: format!("discriminatory, one item, tick {tick}: a Bayes-Nash equilibrium that misallocates with probability {alpha}"),
        parameters: params(&[("alpha", alpha), ("tick", tick)]),
        valuations: vec![Valuation::unit_demand(1, 1.0)?, Valuation::unit_demand(1, low)?],
        auction,
        interface: Interface::Standard,
        profiles: Vec::new(),
        expected: vec![
            expect("opt", 1.0, 1e-9, Basis::Formula),
            expect("eq_welfare", eq, 1e-9, Basis::Formula),
            expect("bpoa", 1.0 / eq, 1e-9, Basis::Formula),
            at_least("bpoa", 1.0004, 0.0),
            at_most("bpoa", 1.0005, 0.0, Basis::Limit),
            at_most("regret", 0.0, 1e-12, Basis::Formula),
        ],
        grid: Some(grid),
        bayesian: Some(BayesianExample { game, strategy }),
    })
}

/// Two additive bidders with per-unit values 3 and 2 over two units.
pub fn equal_bid_example() -> Result<NamedInstance> {
    let game = GameInstance::new(
        vec![Valuation::additive(2, 3.0)?, Valuation::additive(2, 2.0)?],
        Auction::new(2, Pricing::Discriminatory, TieBreakRule::Lexicographic),
    )?;
    let (profile, tie_break) = equal_bid_equilibrium(&game)?;
    Ok(NamedInstance {
        id: "equal-bid-example".into(),
        description:
            "discriminatory, two additive bidders: everyone bids the k-th largest marginal".into(),
        parameters: BTreeMap::new(),
        valuations: game.valuations,
        auction: Auction::new(2, Pricing::Discriminatory, tie_break),
        interface: Interface::Standard,
        profiles: vec![RoledProfile {
            role: ProfileRole::Equilibrium,
            profile,
        }],
        expected: vec![
            expect("d", 3.0, 0.0, Basis::Formula),
            expect("opt", 6.0, 1e-9, Basis::Formula),
            expect("eq_welfare", 6.0, 1e-9, Basis::Formula),
            at_most("regret", 0.0, crate::tolerance::EQUILIBRIUM, Basis::Formula),
            expect("equal_bid_structure", 1.0, 0.0, Basis::Formula),
        ],
        grid: Some(BidGrid::new(1e-3, 4.0, Interface::Standard, false)?),
        bayesian: None,
    })
}

/// `k`-th largest of all marginal values.
pub fn kth_merged_marginal(vals: &[Valuation], k: usize) -> f64 {
    let mut all: Vec<f64> = vals.iter().flat_map(|v| v.marginals()).collect();
    all.sort_by(|a, b| b.total_cmp(a));
    all.get(k - 1).copied().unwrap_or(0.0)
}

fn allocation_fits(vals: &[Valuation], x: &[usize], d: f64) -> bool {
    vals.iter().zip(x).all(|(v, &xi)| {
        (xi == 0 || v.marginal(xi) >= d) && (xi == v.k() || v.marginal(xi + 1) <= d)
    })
}

fn compositions(
    n: usize,
    k: usize,
    prefix: &mut Vec<usize>,
    out: &mut dyn FnMut(&[usize]) -> bool,
) -> bool {
    if prefix.len() == n - 1 {
        let used: usize = prefix.iter().sum();
        prefix.push(k - used);
        let stop = out(prefix);
        prefix.pop();
        return stop;
    }
    let used: usize = prefix.iter().sum();
    for x in 0..=k - used {
        prefix.push(x);
        let stop = compositions(n, k, prefix, out);
        prefix.pop();
        if stop {
            return true;
        }
    }
    false
}

fn equal_bid_target(instance: &GameInstance) -> Result<(f64, Vec<usize>)> {
    let (n, k) = (instance.n(), instance.k());
    if n < 2 {
        return Err(Error::Config("need at least two bidders".into()));
    }
    let vals = &instance.valuations;
    let d = kth_merged_marginal(vals, k);
    if d <= 0.0 {
        return Err(Error::Domain("the k-th largest marginal is zero".into()));
    }
    let opt = optimal_allocation(vals, k)?;
    if allocation_fits(vals, &opt.allocation, d) {
        return Ok((d, opt.allocation));
    }
    let mut found = None;
    compositions(n, k, &mut Vec::new(), &mut |x| {
        if allocation_fits(vals, x, d) {
            found = Some(x.to_vec());
            true
        } else {
            false
        }
    });
    found.map(|x| (d, x)).ok_or(Error::NoTieBreak)
}

/// Every bidder bids `d`, the `k`-th largest marginal, on all slots; ties go
/// to an allocation where each winner's last won marginal is at least `d` and
/// each bidder's next marginal is at most `d`.
///
/// Losers bid above their marginals, so the returned profile is an
/// equilibrium only over strategy spaces that allow overbidding.
pub fn equal_bid_equilibrium(instance: &GameInstance) -> Result<(BidProfile, TieBreakRule)> {
    let (d, x) = equal_bid_target(instance)?;
    let k = instance.k();
    let order = x
        .iter()
        .enumerate()
        .flat_map(|(i, &xi)| (0..xi).map(move |s| (i, s)))
        .collect();
    let tb = TieBreakRule::Priority { order };
    let profile = BidProfile::standard(vec![StandardBid::new(vec![d; k])?; instance.n()])?;
    debug_assert_eq!(allocate(&profile, &tb).units, x);
    Ok((profile, tb))
}

/// The equal-bid profile with `eps / k` added to each winner's won slots, so
/// that no ties remain.
pub fn perturbed_equal_bid_profile(instance: &GameInstance, eps: f64) -> Result<BidProfile> {
    if !(eps >= 0.0) {
        return Err(Error::Domain(format!(
            "eps must be non-negative, got {eps}"
        )));
    }
    let (d, x) = equal_bid_target(instance)?;
    let k = instance.k();
    let bump = eps / k as f64;
    let rows = x
        .iter()
        .map(|&xi| StandardBid::new((0..k).map(|s| if s < xi { d + bump } else { d }).collect()))
        .collect::<Result<_>>()?;
    BidProfile::standard(rows)
}

/// Winners bid their marginals on the units of `alloc`; losers bid only their
/// first marginal.
pub fn marginal_bidding_profile(vals: &[Valuation], alloc: &[usize]) -> Result<BidProfile> {
    if vals.len() != alloc.len() {
        return Err(Error::Dimension(format!(
            "{} valuations, {} allocations",
            vals.len(),
            alloc.len()
        )));
    }
    let rows = vals
        .iter()
        .zip(alloc)
        .map(|(v, &x)| {
            let m = v.marginals();
            let keep = x.max(1);
            StandardBid::new(
                (0..v.k())
                    .map(|j| if j < keep { m[j] } else { 0.0 })
                    .collect(),
            )
        })
        .collect::<Result<_>>()?;
    BidProfile::standard(rows)
}

/// Optional overrides for registry builds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceParams {
    pub k: Option<usize>,
    pub eps: Option<f64>,
    pub tick: Option<f64>,
    pub mu: Option<f64>,
    pub alpha: Option<f64>,
    pub interface: Option<Interface>,
}

/// Registered ids with a one-line description.
pub fn list_instances() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "upa-subadditive-lower-bound",
            "uniform price equilibrium with welfare near half the optimum (k, eps, interface)",
        ),
        (
            "da-template-frontier",
            "discriminatory witness bounding what deviation templates can certify (k, mu)",
        ),
        (
            "upa-template-frontier",
            "one-item uniform price witness: lambda <= (1 + mu) / 2",
        ),
        (
            "da-bayesian-inefficiency",
            "discriminatory Bayes-Nash equilibrium that misallocates (alpha, tick)",
        ),
        (
            "equal-bid-example",
            "discriminatory equilibrium where everyone bids the k-th largest marginal",
        ),
    ]
}

pub fn build_instance(id: &str, p: &InstanceParams) -> Result<NamedInstance> {
    match id {
        "upa-subadditive-lower-bound" => upa_subadditive_lower_bound(
            p.k.unwrap_or(10),
            p.eps.unwrap_or(1e-6),
            p.interface.unwrap_or(Interface::Standard),
        ),
        "da-template-frontier" => da_template_frontier(p.k.unwrap_or(50), p.mu.unwrap_or(1.0)),
        "upa-template-frontier" => upa_template_frontier(),
        "da-bayesian-inefficiency" => {
            da_bayesian_inefficiency(p.alpha.unwrap_or(0.0014), p.tick.unwrap_or(1e-3))
        }
        "equal-bid-example" => equal_bid_example(),
        other => Err(Error::UnknownInstance(other.into())),
    }
}
