use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    bayesian_poa, check_equal_bid_structure, expected_welfare, is_bayes_nash, is_pure_nash, BidGrid,
};
use crate::error::Result;
use crate::instances::{kth_merged_marginal, Expected, NamedInstance, ProfileRole, Relation};
use crate::mechanism::{allocate, social_welfare};
use crate::smoothness::{da_frontier_check, upa_frontier_check};
use crate::welfare::{optimal_allocation, poa_ratio};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub relation: Relation,
    pub expected: f64,
    pub tolerance: f64,
    /// `None` when the quantity was not measured.
    pub measured: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub id: String,
    pub measured: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Reproduces the measurable quantities of a named instance.
///
/// `tick` overrides the instance's own grid tick.
pub fn measure(inst: &NamedInstance, tick: Option<f64>) -> Result<BTreeMap<String, f64>> {
    let mut m = BTreeMap::new();
    let grid: Option<BidGrid> = inst.grid.clone().map(|g| BidGrid {
        tick: tick.unwrap_or(g.tick),
        ..g
    });
    if let Some(ex) = &inst.bayesian {
        let mut game = ex.game.clone();
        if let Some(g) = &grid {
            game.grid = g.clone();
        }
        m.insert(
            "regret".into(),
            is_bayes_nash(&game, &ex.strategy)?.max_regret,
        );
        let (opt, eq) = expected_welfare(&game, &ex.strategy)?;
        m.insert("opt".into(), opt);
        m.insert("eq_welfare".into(), eq);
        m.insert("bpoa".into(), bayesian_poa(&game, &ex.strategy)?);
        return Ok(m);
    }
    let game = inst.game()?;
    let opt = optimal_allocation(&game.valuations, game.k())?;
    m.insert("opt".into(), opt.value);
    let tb = &game.auction.tie_break;
    if let Some(p) = inst.profile(ProfileRole::Equilibrium) {
        let units = allocate(p, tb).units;
        let welfare = social_welfare(&game.valuations, &units)?;
        m.insert("eq_welfare".into(), welfare);
        m.insert("poa".into(), poa_ratio(opt.value, welfare)?);
        if let Some(g) = &grid {
            m.insert("regret".into(), is_pure_nash(p, &game, g)?.max_regret);
        }
        m.insert("d".into(), kth_merged_marginal(&game.valuations, game.k()));
        let structure = check_equal_bid_structure(p, &game.valuations, tb)?;
        m.insert(
            "equal_bid_structure".into(),
            if structure.holds() { 1.0 } else { 0.0 },
        );
    }
    if let Some(p) = inst.profile(ProfileRole::LowerBoundWitness) {
        m.insert(
            "eq_welfare".into(),
            social_welfare(&game.valuations, &allocate(p, tb).units)?,
        );
    }
    let witness_tick = grid.as_ref().map_or(1e-3, |g| g.tick);
    match inst.id.as_str() {
        "da-template-frontier" => {
            let r = da_frontier_check(
                game.k(),
                inst.parameters.get("mu").copied().unwrap_or(1.0),
                witness_tick,
            )?;
            m.insert("sup_deviation_utility".into(), r.sup_utilities[0]);
            m.insert("frontier_lhs".into(), r.lhs);
        }
        "upa-template-frontier" => {
            let r = upa_frontier_check(witness_tick)?;
            m.insert("sum_sup_utility".into(), r.sum_sup_utility);
        }
        _ => {}
    }
    Ok(m)
}

fn check(e: &Expected, measured: &BTreeMap<String, f64>) -> Check {
    let value = measured.get(&e.name).copied();
    Check {
        name: e.name.clone(),
        relation: e.relation,
        expected: e.value,
        tolerance: e.tolerance,
        measured: value,
        passed: value.is_some_and(|v| e.accepts(v)),
    }
}

/// Measures a named instance and compares every expected quantity.
pub fn verify(inst: &NamedInstance, tick: Option<f64>) -> Result<VerifyOutcome> {
    let measured = measure(inst, tick)?;
    let checks: Vec<Check> = inst.expected.iter().map(|e| check(e, &measured)).collect();
    Ok(VerifyOutcome {
        id: inst.id.clone(),
        passed: checks.iter().all(|c| c.passed),
        measured,
        checks,
    })
}
