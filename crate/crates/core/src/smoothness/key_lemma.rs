//! The randomized uniform deviation `t * c` and its exact expected utility.
//!
//! `c` bids `r = v(τ)/τ` on the first `x` slots, where `x` is the bidder's
//! share in the optimal allocation and `τ` minimizes the per-unit value on
//! `1..=x`. The scale `t` has density `α / (1 - t)` on `[0, B]` with
//! `B = 1 - e^{-1/α}`. Against fixed opposing bids the bidder wins exactly `j`
//! units for `t` in `(γ_j, γ_{j+1}]` with `γ_j = clamp(β_j / r, 0, B)`, so the
//! expectation splits into closed-form integrals per segment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{constant, GameInstance};
use crate::error::{Error, Result};
use crate::mechanism::{Auction, BidProfile, OpposingBids, Pricing};
use crate::valuation::Valuation;
use crate::welfare::optimal_allocation;

fn upper(alpha: f64) -> f64 {
    -(-1.0 / alpha).exp_m1()
}

/// `∫_a^b α/(1-t) dt`.
fn mass(alpha: f64, a: f64, b: f64) -> f64 {
    alpha * ((-a).ln_1p() - (-b).ln_1p())
}

/// `∫_a^b t α/(1-t) dt`.
fn first_moment(alpha: f64, a: f64, b: f64) -> f64 {
    mass(alpha, a, b) - alpha * (b - a)
}

/// Total probability of the deviation density on `[0, B]`; equals 1.
pub fn deviation_density_mass(alpha: f64) -> f64 {
    mass(alpha, 0.0, upper(alpha))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    Ok(())
}

/// Exact `E[u_i(t c, b_{-i})]` against the opposing bids `opp`.
///
/// Discriminatory pricing charges `t j r` for `j` units. Under uniform pricing
/// the highest losing bid is the bidder's own `t r` while it wins fewer than
/// `x` units, and the opposing `β_x` once it wins all `x`.
pub fn expected_deviation_utility_exact(
    val: &Valuation,
    x_opt: usize,
    opp: &OpposingBids,
    alpha: f64,
    pricing: Pricing,
) -> Result<f64> {
    check_alpha(alpha)?;
    if x_opt == 0 {
        return Ok(0.0);
    }
    if x_opt > val.k() || opp.k() != val.k() {
        return Err(Error::UnitsOutOfRange {
            x: x_opt,
            k: opp.k(),
        });
    }
    if pricing == Pricing::UniformLowestWinning {
        return Err(Error::Config(
            "exact deviation utility supports discriminatory and uniform pricing".into(),
        ));
    }
    let r = val.min_per_unit(x_opt)?;
    if r <= 0.0 {
        return Ok(0.0);
    }
    let b = upper(alpha);
    let gamma: Vec<f64> = (1..=x_opt)
        .map(|j| (opp.beta(j) / r).clamp(0.0, b))
        .chain(std::iter::once(b))
        .collect();
    let mut total = 0.0;
    for j in 1..=x_opt {
        let (lo, hi) = (gamma[j - 1], gamma[j]);
        if hi <= lo {
            continue;
        }
        let p = mass(alpha, lo, hi);
        let seg = if pricing == Pricing::Uniform && j == x_opt {
            (val.value(j) - j as f64 * opp.beta(j)) * p
        } else {
            val.value(j) * p - j as f64 * r * first_moment(alpha, lo, hi)
        };
        total += seg;
    }
    Ok(total)
}

/// `α B x r - α Σ_{j <= x} β_j(b_{-i})`.
pub fn eq2_rhs(val: &Valuation, x_opt: usize, opp: &OpposingBids, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if x_opt == 0 {
        return Ok(0.0);
    }
    let r = val.min_per_unit(x_opt)?;
    let beta_sum: f64 = (1..=x_opt).map(|j| opp.beta(j)).sum();
    Ok(alpha * upper(alpha) * x_opt as f64 * r - alpha * beta_sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Sampled `E[u_i]` by running the auction on draws of `t` (inverse CDF
/// `t = 1 - e^{-u/α}`).
#[allow(clippy::too_many_arguments)]
pub fn expected_deviation_utility_monte_carlo(
    i: usize,
    val: &Valuation,
    x_opt: usize,
    profile: &BidProfile,
    alpha: f64,
    auction: &Auction,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    check_alpha(alpha)?;
    if samples < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    let k = profile.k();
    let r = if x_opt == 0 {
        0.0
    } else {
        val.min_per_unit(x_opt)?
    };
    let mut rows: Vec<Vec<f64>> = profile
        .rows()
        .iter()
        .map(|b| b.as_slice().to_vec())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let u: f64 = rng.gen();
        let t = -(-u / alpha).exp_m1();
        rows[i] = constant(t * r, x_opt, k).as_slice().to_vec();
        let util = auction.utility_rows(&rows, i, val);
        sum += util;
        sum_sq += util * util;
    }
    let nf = samples as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / nf).sqrt(),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyLemmaMargin {
    pub bidder: usize,
    pub x_opt: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// Exact left side minus right side of the deviation inequality, per bidder.
pub fn verify_key_lemma(
    instance: &GameInstance,
    profile: &BidProfile,
    alpha: f64,
) -> Result<Vec<KeyLemmaMargin>> {
    let opt = optimal_allocation(&instance.valuations, instance.k())?;
    instance
        .valuations
        .iter()
        .enumerate()
        .map(|(i, val)| {
            let opp = OpposingBids::of_profile(profile, i);
            let x = opt.allocation[i];
            let lhs =
                expected_deviation_utility_exact(val, x, &opp, alpha, instance.auction.pricing)?;
            let rhs = eq2_rhs(val, x, &opp, alpha)?;
            Ok(KeyLemmaMargin {
                bidder: i,
                x_opt: x,
                lhs,
                rhs,
                margin: lhs - rhs,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::TieBreakRule;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Midpoint-rule quadrature of the defining integral, independent of the
    /// closed forms above.
    fn quadrature(
        val: &Valuation,
        x: usize,
        rows: &[Vec<f64>],
        i: usize,
        alpha: f64,
        auction: &Auction,
    ) -> f64 {
        let b = 1.0 - (-1.0 / alpha).exp();
        let r = val.min_per_unit(x).unwrap();
        let steps = 200_000;
        let h = b / steps as f64;
        let mut rows = rows.to_vec();
        let mut acc = 0.0;
        for s in 0..steps {
            let t = (s as f64 + 0.5) * h;
            rows[i] = (0..val.k())
                .map(|j| if j < x { t * r } else { 0.0 })
                .collect();
            acc += auction.utility_rows(&rows, i, val) * alpha / (1.0 - t) * h;
        }
        acc
    }

    #[test]
    fn density_normalizes() {
        for alpha in [0.1, 0.5, 0.87, 1.0, 2.0, 10.0] {
            assert_abs_diff_eq!(deviation_density_mass(alpha), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn unopposed_bidder_wins_every_time() {
        let val = Valuation::new(vec![0.0, 1.0, 1.8, 2.4]).unwrap();
        let opp = OpposingBids::from_rows(&[vec![0.0; 3]], None, 3);
        let alpha: f64 = 1.0;
        let b = 1.0 - (-1.0 / alpha).exp();
        let r = 0.8;
        // E[t] under the density, computed directly
        let mean_t = 1.0 - alpha * b;
        let expect = val.value(3) - 3.0 * r * mean_t;
        let got = expected_deviation_utility_exact(&val, 3, &opp, alpha, Pricing::Discriminatory)
            .unwrap();
        assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
        // uniform price is zero without competition
        let got = expected_deviation_utility_exact(&val, 3, &opp, alpha, Pricing::Uniform).unwrap();
        assert_abs_diff_eq!(got, val.value(3), epsilon = 1e-12);
    }

    #[test]
    fn priced_out_deviation_is_worthless() {
        let val = Valuation::additive(2, 1.0).unwrap();
        let opp = OpposingBids::from_rows(&[vec![0.9, 0.9]], None, 2);
        // B = 1 - 1/e ≈ 0.632 < 0.9
        let got =
            expected_deviation_utility_exact(&val, 2, &opp, 1.0, Pricing::Discriminatory).unwrap();
        assert_eq!(got, 0.0);
        assert_eq!(
            expected_deviation_utility_exact(&val, 0, &opp, 1.0, Pricing::Uniform).unwrap(),
            0.0
        );
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let vals = [
            Valuation::new(vec![0.0, 1.0, 1.8, 2.4]).unwrap(),
            Valuation::new(vec![0.0, 1.0, 1.0, 2.0]).unwrap(),
        ];
        let others = vec![vec![0.0; 3], vec![0.5, 0.3, 0.1], vec![0.45, 0.2, 0.0]];
        for pricing in [Pricing::Discriminatory, Pricing::Uniform] {
            let auction = Auction::new(3, pricing, TieBreakRule::Lexicographic);
            for val in &vals {
                for x in 1..=3 {
                    for alpha in [0.5, 0.87, 2.0] {
                        let opp = OpposingBids::from_rows(&others, Some(0), 3);
                        let exact =
                            expected_deviation_utility_exact(val, x, &opp, alpha, pricing).unwrap();
                        let numeric = quadrature(val, x, &others, 0, alpha, &auction);
                        // midpoint error is O(h) at the jumps of the integrand
                        assert!(
                            (exact - numeric).abs() < 2e-5,
                            "{pricing:?} x={x} alpha={alpha}: {exact} vs {numeric}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn monte_carlo_agrees_with_closed_form() {
        let val = Valuation::new(vec![0.0, 1.0, 1.8, 2.4]).unwrap();
        let profile = BidProfile::from_vecs(vec![vec![0.0; 3], vec![0.5, 0.3, 0.1]]);
        let auction = Auction::new(3, Pricing::Uniform, TieBreakRule::Lexicographic);
        let opp = OpposingBids::of_profile(&profile, 0);
        let exact =
            expected_deviation_utility_exact(&val, 3, &opp, 0.87, Pricing::Uniform).unwrap();
        let mc = expected_deviation_utility_monte_carlo(
            0, &val, 3, &profile, 0.87, &auction, 100_000, 11,
        )
        .unwrap();
        assert!((mc.mean - exact).abs() <= 3.0 * mc.std_error + 1e-12);
    }

    proptest! {
        #[test]
        fn deviation_never_overbids(seed in any::<u64>(), k in 1usize..8, u in 0.0f64..1.0, alpha in 0.1f64..3.0) {
            let val = crate::valuation::random_valuation(crate::valuation::ValuationClass::General, k, 1.0, seed).unwrap();
            let b = 1.0 - (-1.0 / alpha).exp();
            for x in 1..=k {
                let r = val.min_per_unit(x).unwrap();
                let bid = constant(u * b * r, x, k);
                prop_assert!(val.admits(bid.as_slice()));
            }
        }
    }
}
