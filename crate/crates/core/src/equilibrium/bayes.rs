//! Finite Bayesian games: exact expected utilities and regret.

use serde::{Deserialize, Serialize};

use super::{BidGrid, RegretEntry, RegretReport};
use crate::error::{Error, Result};
use crate::mechanism::{allocate_rows, Auction, OpposingBids, StandardBid};
use crate::tolerance;
use crate::valuation::Valuation;
use crate::welfare::optimal_allocation;

/// Finite distribution over bid vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedBid {
    pub support: Vec<(StandardBid, f64)>,
}

impl MixedBid {
    pub fn pure(bid: StandardBid) -> Self {
        Self {
            support: vec![(bid, 1.0)],
        }
    }
}

/// Per bidder, one mixed bid per type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub bids: Vec<Vec<MixedBid>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BayesianGame {
    /// `V_i`, the finite type set of each bidder.
    pub types: Vec<Vec<Valuation>>,
    /// `π_i`, independent across bidders.
    pub priors: Vec<Vec<f64>>,
    pub grid: BidGrid,
    pub auction: Auction,
}

fn probabilities_ok(p: &[f64]) -> bool {
    p.iter().all(|&x| x >= 0.0 && x.is_finite()) && (p.iter().sum::<f64>() - 1.0).abs() <= 1e-9
}

impl BayesianGame {
    pub fn new(
        types: Vec<Vec<Valuation>>,
        priors: Vec<Vec<f64>>,
        grid: BidGrid,
        auction: Auction,
    ) -> Result<Self> {
        let game = Self {
            types,
            priors,
            grid,
            auction,
        };
        game.validate()?;
        Ok(game)
    }

    pub fn n(&self) -> usize {
        self.types.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.types.len() != self.priors.len() {
            return Err(Error::Dimension("one prior per bidder required".into()));
        }
        for (i, (ts, ps)) in self.types.iter().zip(&self.priors).enumerate() {
            if ts.is_empty() || ts.len() != ps.len() {
                return Err(Error::Dimension(format!(
                    "bidder {i}: {} types, {} probabilities",
                    ts.len(),
                    ps.len()
                )));
            }
            if !probabilities_ok(ps) {
                return Err(Error::Domain(format!(
                    "bidder {i}: prior must be a distribution"
                )));
            }
            if let Some(v) = ts.iter().find(|v| v.k() != self.auction.k) {
                return Err(Error::Dimension(format!(
                    "bidder {i}: type over {} units",
                    v.k()
                )));
            }
        }
        Ok(())
    }

    fn check_strategy(&self, strat: &Strategy) -> Result<()> {
        if strat.bids.len() != self.n() {
            return Err(Error::Dimension("one strategy per bidder required".into()));
        }
        for (i, per_type) in strat.bids.iter().enumerate() {
            if per_type.len() != self.types[i].len() {
                return Err(Error::Dimension(format!(
                    "bidder {i}: strategy must cover every type"
                )));
            }
            for (t, mixed) in per_type.iter().enumerate() {
                let probs: Vec<f64> = mixed.support.iter().map(|s| s.1).collect();
                if !probabilities_ok(&probs) {
                    return Err(Error::Domain(format!(
                        "bidder {i} type {t}: mixed bid must be a distribution"
                    )));
                }
                for (b, _) in &mixed.support {
                    if b.len() != self.auction.k {
                        return Err(Error::Dimension(format!(
                            "bidder {i} type {t}: bid length {}",
                            b.len()
                        )));
                    }
                    if self.grid.no_overbidding && !self.types[i][t].admits(b.as_slice()) {
                        return Err(Error::InvalidBid(format!(
                            "bidder {i} type {t}: support point overbids"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Opposing bid configurations faced by bidder `i`, with probabilities.
    fn scenarios(&self, strat: &Strategy, i: usize) -> Vec<(Vec<Vec<f64>>, f64)> {
        let k = self.auction.k;
        let mut out = vec![(vec![Vec::new(); self.n()], 1.0)];
        for j in 0..self.n() {
            if j == i {
                for s in &mut out {
                    s.0[i] = vec![0.0; k];
                }
                continue;
            }
            let mut next = Vec::new();
            for (rows, p) in &out {
                for (t, &pt) in self.priors[j].iter().enumerate() {
                    if pt == 0.0 {
                        continue;
                    }
                    for (bid, pb) in &strat.bids[j][t].support {
                        if *pb == 0.0 {
                            continue;
                        }
                        let mut r = rows.clone();
                        r[j] = bid.as_slice().to_vec();
                        next.push((r, p * pt * pb));
                    }
                }
            }
            out = next;
        }
        out
    }
}

fn expected_utility(
    auction: &Auction,
    scenarios: &mut [(Vec<Vec<f64>>, f64)],
    i: usize,
    bid: &StandardBid,
    val: &Valuation,
) -> f64 {
    let mut total = 0.0;
    for (rows, p) in scenarios.iter_mut() {
        rows[i].clear();
        rows[i].extend_from_slice(bid.as_slice());
        total += *p * auction.utility_rows(rows, i, val);
    }
    total
}

/// `is_bayes_nash`: exact expected regret of every bidder type.
pub fn is_bayes_nash(game: &BayesianGame, strat: &Strategy) -> Result<RegretReport> {
    game.validate()?;
    game.check_strategy(strat)?;
    let k = game.auction.k;
    let mut entries = Vec::new();
    for i in 0..game.n() {
        let mut scenarios = game.scenarios(strat, i);
        for (t, val) in game.types[i].iter().enumerate() {
            let current: f64 = strat.bids[i][t]
                .support
                .iter()
                .map(|(b, p)| p * expected_utility(&game.auction, &mut scenarios, i, b, val))
                .sum();
            let mut candidates: Vec<StandardBid> = Vec::new();
            for (rows, _) in &scenarios {
                let opp = OpposingBids::from_rows(rows, Some(i), k);
                candidates.extend(game.grid.deviations(&opp, val)?);
            }
            candidates.sort_by(|a, b| {
                a.as_slice()
                    .iter()
                    .zip(b.as_slice())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            candidates.dedup();
            let mut best = (f64::NEG_INFINITY, StandardBid::zero(k));
            for c in candidates {
                let u = expected_utility(&game.auction, &mut scenarios, i, &c, val);
                if u > best.0 {
                    best = (u, c);
                }
            }
            entries.push(RegretEntry {
                bidder: i,
                type_index: t,
                current_utility: current,
                best_utility: best.0,
                regret: best.0 - current,
                best_deviation: best.1,
            });
        }
    }
    Ok(RegretReport::from_entries(entries))
}

/// Every type tuple with its probability.
fn type_tuples(game: &BayesianGame) -> Vec<(Vec<usize>, f64)> {
    let mut out = vec![(Vec::new(), 1.0)];
    for ps in &game.priors {
        out = out
            .into_iter()
            .flat_map(|(tuple, p)| {
                ps.iter()
                    .enumerate()
                    .filter(|(_, &q)| q > 0.0)
                    .map(move |(t, &q)| {
                        let mut next = tuple.clone();
                        next.push(t);
                        (next, p * q)
                    })
            })
            .collect();
    }
    out
}

/// Expected optimal welfare and expected welfare under `strat`.
pub fn expected_welfare(game: &BayesianGame, strat: &Strategy) -> Result<(f64, f64)> {
    game.validate()?;
    game.check_strategy(strat)?;
    let k = game.auction.k;
    let mut opt = 0.0;
    let mut eq = 0.0;
    for (tuple, p) in type_tuples(game) {
        let vals: Vec<Valuation> = tuple
            .iter()
            .enumerate()
            .map(|(i, &t)| game.types[i][t].clone())
            .collect();
        opt += p * optimal_allocation(&vals, k)?.value;
        let mut profiles: Vec<(Vec<Vec<f64>>, f64)> = vec![(Vec::new(), 1.0)];
        for (i, &t) in tuple.iter().enumerate() {
            profiles = profiles
                .into_iter()
                .flat_map(|(rows, q)| {
                    strat.bids[i][t].support.iter().map(move |(b, pb)| {
                        let mut r = rows.clone();
                        r.push(b.as_slice().to_vec());
                        (r, q * pb)
                    })
                })
                .collect();
        }
        for (rows, q) in profiles {
            let alloc = allocate_rows(&rows, &game.auction.tie_break, k);
            let sw: f64 = alloc
                .units
                .iter()
                .zip(&vals)
                .map(|(&x, v)| v.value(x))
                .sum();
            eq += p * q * sw;
        }
    }
    Ok((opt, eq))
}

/// `E[SW(opt)] / E[SW(strat)]`.
pub fn bayesian_poa(game: &BayesianGame, strat: &Strategy) -> Result<f64> {
    let (opt, eq) = expected_welfare(game, strat)?;
    if !(eq > tolerance::EXACT) {
        return Err(Error::NonPositiveWelfare(eq));
    }
    Ok(opt / eq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{constant, is_pure_nash, GameInstance};
    use crate::mechanism::{BidProfile, Interface, Pricing, TieBreakRule};
    use crate::welfare::poa_ratio;

    #[test]
    fn singleton_types_match_pure_check() {
        let vals = vec![
            Valuation::new(vec![0.0, 1.0, 1.5]).unwrap(),
            Valuation::new(vec![0.0, 0.75, 1.0]).unwrap(),
        ];
        let auction = Auction::new(2, Pricing::Uniform, TieBreakRule::Lexicographic);
        let grid = BidGrid::new(0.125, 1.0, Interface::Standard, true).unwrap();
        let bids = [constant(0.5, 2, 2), constant(0.25, 1, 2)];
        let game = BayesianGame::new(
            vals.iter().map(|v| vec![v.clone()]).collect(),
            vec![vec![1.0], vec![1.0]],
            grid.clone(),
            auction.clone(),
        )
        .unwrap();
        let strat = Strategy {
            bids: bids
                .iter()
                .map(|b| vec![MixedBid::pure(b.clone())])
                .collect(),
        };
        let bayes = is_bayes_nash(&game, &strat).unwrap();
        let inst = GameInstance::new(vals.clone(), auction).unwrap();
        let pure =
            is_pure_nash(&BidProfile::standard(bids.to_vec()).unwrap(), &inst, &grid).unwrap();
        assert_eq!(bayes.max_regret, pure.max_regret);
        for (a, b) in bayes.entries.iter().zip(&pure.entries) {
            assert_eq!(a.regret, b.regret);
        }
        let (opt, eq) = expected_welfare(&game, &strat).unwrap();
        assert_eq!(
            bayesian_poa(&game, &strat).unwrap(),
            poa_ratio(opt, eq).unwrap()
        );
    }

    #[test]
    fn mixed_support_expectation() {
        // bidder 2 mixes 50/50 between losing and winning
        let auction = Auction::new(1, Pricing::Discriminatory, TieBreakRule::favor(1));
        let grid = BidGrid::new(0.25, 1.0, Interface::Standard, false).unwrap();
        let game = BayesianGame::new(
            vec![
                vec![Valuation::unit_demand(1, 1.0).unwrap()],
                vec![Valuation::unit_demand(1, 1.0).unwrap()],
            ],
            vec![vec![1.0], vec![1.0]],
            grid,
            auction,
        )
        .unwrap();
        let strat = Strategy {
            bids: vec![
                vec![MixedBid::pure(constant(0.5, 1, 1))],
                vec![MixedBid {
                    support: vec![(constant(0.25, 1, 1), 0.5), (constant(0.75, 1, 1), 0.5)],
                }],
            ],
        };
        let report = is_bayes_nash(&game, &strat).unwrap();
        assert!((report.entries[0].current_utility - 0.25).abs() < 1e-12);
        // bidding 0.75 ties and loses to bidder 2; 1.0 always wins at zero profit
        assert!((report.entries[0].best_utility - 0.25).abs() < 1e-12);
        assert!((report.entries[1].current_utility - 0.125).abs() < 1e-12);
        let (opt, eq) = expected_welfare(&game, &strat).unwrap();
        assert_eq!((opt, eq), (1.0, 1.0));
    }

    #[test]
    fn rejects_bad_priors() {
        let auction = Auction::new(1, Pricing::Discriminatory, TieBreakRule::Lexicographic);
        let grid = BidGrid::new(0.25, 1.0, Interface::Standard, false).unwrap();
        let err = BayesianGame::new(
            vec![vec![Valuation::unit_demand(1, 1.0).unwrap()]],
            vec![vec![0.5]],
            grid,
            auction,
        );
        assert!(err.is_err());
    }
}
