//! Witness games limiting which `(λ, μ)` pairs any deviation template can certify.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{best_response_rows, BidGrid};
use crate::error::{Error, Result};
use crate::instances::{da_template_frontier, upa_template_frontier, ProfileRole};
use crate::mechanism::{allocate, Interface, OpposingBids};
use crate::welfare::optimal_allocation;

/// Largest `λ` a template certificate with payment coefficient `mu` can have,
/// given the best deviation utilities and the opposing winning bids of a witness.
pub fn lambda_ceiling(sum_sup_utility: f64, beta_sum: f64, opt: f64, mu: f64) -> Result<f64> {
    if !(opt > 0.0) {
        return Err(Error::NonPositiveWelfare(opt));
    }
    Ok((sum_sup_utility + mu * beta_sum) / opt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaFrontierReport {
    pub k: usize,
    pub mu: f64,
    pub tick: f64,
    /// Best deviation utility of each bidder over the grid deviation family.
    pub sup_utilities: Vec<f64>,
    /// `Σ_j β_j(b)`, the winning bids of the witness profile.
    pub beta_sum: f64,
    /// `Σ sup u_i + μ Σ β_j`.
    pub lhs: f64,
    /// `μ (1 - e^{-1/μ} + (1 - 1/e) / k) k`.
    pub frontier: f64,
    pub holds: bool,
}

/// Best responses against the discriminatory witness profile.
pub fn da_frontier_check(k: usize, mu: f64, tick: f64) -> Result<DaFrontierReport> {
    let inst = da_template_frontier(k, mu)?;
    let game = inst.game()?;
    let profile = inst
        .profile(ProfileRole::LowerBoundWitness)
        .expect("witness profile");
    let base = inst.grid.clone().expect("witness grid");
    let levels = (base.max_bid / tick).round() as usize + 1;
    let grid = BidGrid {
        tick,
        enumeration_limit: base.enumeration_limit.max(k * levels),
        ..base
    };
    grid.validate()?;
    let rows: Vec<Vec<f64>> = profile
        .rows()
        .iter()
        .map(|r| r.as_slice().to_vec())
        .collect();
    let sup_utilities = game
        .valuations
        .iter()
        .enumerate()
        .map(|(i, v)| best_response_rows(i, v, &rows, &grid, &game.auction).map(|b| b.utility))
        .collect::<Result<Vec<_>>>()?;
    let beta_sum: f64 = allocate(profile, &game.auction.tie_break)
        .winning_bids
        .iter()
        .sum();
    let lhs = sup_utilities.iter().sum::<f64>() + mu * beta_sum;
    let frontier = inst.expected("frontier_lhs").expect("frontier value").value;
    Ok(DaFrontierReport {
        k,
        mu,
        tick,
        sup_utilities,
        beta_sum,
        lhs,
        frontier,
        holds: lhs <= frontier + 1e-6,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpaFrontierReport {
    pub tick: f64,
    pub sup_utilities: Vec<f64>,
    pub sum_sup_utility: f64,
    /// `β_1(b)`, the single winning bid.
    pub beta_1: f64,
    pub opt: f64,
    /// Deviations evaluated per bidder.
    pub scanned: usize,
}

impl UpaFrontierReport {
    /// Ceiling on `λ` for payment coefficient `mu`; equals `(1 + μ) / 2`.
    pub fn lambda_ceiling(&self, mu: f64) -> Result<f64> {
        lambda_ceiling(self.sum_sup_utility, self.beta_1, self.opt, mu)
    }
}

/// Scans every no-overbidding grid bid of each bidder in the one-item
/// uniform-price witness.
pub fn upa_frontier_check(tick: f64) -> Result<UpaFrontierReport> {
    let inst = upa_template_frontier()?;
    let game = inst.game()?;
    let profile = inst
        .profile(ProfileRole::LowerBoundWitness)
        .expect("witness profile");
    let grid = BidGrid::new(tick, 1.0, Interface::Standard, true)?;
    let levels = grid.levels();
    let mut rows: Vec<Vec<f64>> = profile
        .rows()
        .iter()
        .map(|r| r.as_slice().to_vec())
        .collect();
    let mut sup_utilities = Vec::new();
    for (i, val) in game.valuations.iter().enumerate() {
        let saved = rows[i].clone();
        let mut best = f64::NEG_INFINITY;
        for &c in &levels {
            if !val.admits(&[c]) {
                continue;
            }
            rows[i] = vec![c];
            best = best.max(game.auction.utility_rows(&rows, i, val));
        }
        rows[i] = saved;
        sup_utilities.push(best);
    }
    let opt = optimal_allocation(&game.valuations, 1)?.value;
    let beta_1 = OpposingBids::from_rows(profile.rows(), None, 1).beta(1);
    Ok(UpaFrontierReport {
        tick,
        sum_sup_utility: sup_utilities.iter().sum(),
        sup_utilities,
        beta_1,
        opt,
        scanned: levels.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_witness_caps_lambda() {
        let r = upa_frontier_check(1e-3).unwrap();
        assert_eq!(r.sup_utilities, vec![0.5, 0.0]);
        assert_eq!(r.sum_sup_utility, 0.5);
        assert_eq!(r.beta_1, 0.5);
        for mu in [0.0, 0.5, 0.87, 1.0, 3.0] {
            assert!((r.lambda_ceiling(mu).unwrap() - (1.0 + mu) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn discriminatory_witness_small_k() {
        let r = da_frontier_check(10, 1.0, 1e-3).unwrap();
        let e = std::f64::consts::E;
        // every unit count is equally profitable at k / e
        assert!((r.sup_utilities[0] - 10.0 / e).abs() < 1e-2);
        assert_eq!(r.sup_utilities[1], 0.0);
        assert!(r.holds, "{} > {}", r.lhs, r.frontier);
    }

    #[test]
    fn ceiling_rejects_zero_optimum() {
        assert!(lambda_ceiling(1.0, 0.0, 0.0, 1.0).is_err());
    }
}
