//! Numerical smoothness certificates and the per-bidder deviation template.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::key_lemma::expected_deviation_utility_exact;
use super::{key_lambda, poa_from_smooth, poa_from_weakly_smooth};
use crate::equilibrium::GameInstance;
use crate::error::{Error, Result};
use crate::mechanism::{allocate, payments, Auction, BidProfile, OpposingBids, StandardBid};
use crate::tolerance;
use crate::valuation::{Valuation, ValuationClass};
use crate::welfare::optimal_allocation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothnessKind {
    /// Deviation utilities against `λ OPT - μ Σ P_i(b)`.
    Smooth,
    /// Deviation utilities against `λ OPT - μ1 Σ P_i(b) - μ2 Σ x_i b_i(x_i)`, with `μ1 = 0`.
    WeaklySmooth,
}

/// One game and one bid profile to test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessCase {
    pub instance: GameInstance,
    pub profile: BidProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessCertificate {
    pub kind: SmoothnessKind,
    pub lambda: f64,
    /// `μ` for smooth certificates, `μ1` for weak ones.
    pub mu: f64,
    pub mu2: Option<f64>,
    pub alpha: f64,
    /// Smallest `LHS - RHS` over all cases (`+inf` for no cases).
    pub margin: f64,
    pub instances: usize,
    pub verified: bool,
    pub implied_poa: f64,
}

/// Margin of one case: summed exact deviation utilities minus the right side.
fn case_margin(
    case: &SmoothnessCase,
    alpha: f64,
    lambda: f64,
    kind: SmoothnessKind,
) -> Result<f64> {
    let inst = &case.instance;
    let profile = &case.profile;
    if profile.n() != inst.n() || profile.k() != inst.k() {
        return Err(Error::Dimension(format!(
            "profile is {}x{}, instance {}x{}",
            profile.n(),
            profile.k(),
            inst.n(),
            inst.k()
        )));
    }
    let opt = optimal_allocation(&inst.valuations, inst.k())?;
    let mut lhs = 0.0;
    for (i, val) in inst.valuations.iter().enumerate() {
        let opp = OpposingBids::of_profile(profile, i);
        lhs += expected_deviation_utility_exact(
            val,
            opt.allocation[i],
            &opp,
            alpha,
            inst.auction.pricing,
        )?;
    }
    let alloc = allocate(profile, &inst.auction.tie_break);
    let charge = match kind {
        SmoothnessKind::Smooth => payments(profile.rows(), &alloc, inst.auction.pricing)
            .iter()
            .sum::<f64>(),
        SmoothnessKind::WeaklySmooth => alloc
            .units
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                if x == 0 {
                    0.0
                } else {
                    x as f64 * profile.row(i).get(x)
                }
            })
            .sum(),
    };
    Ok(lhs - (lambda * opt.value - alpha * charge))
}

/// Certifies `(λ, α)` or `(λ, 0, α)` with `λ = α (1 - e^{-1/α})`, halved for
/// subadditive valuations, over the given cases.
///
/// Cases are evaluated in parallel on the current rayon pool; the minimum is
/// reduced in input order so the result does not depend on scheduling.
pub fn verify_smoothness(
    cases: &[SmoothnessCase],
    alpha: f64,
    kind: SmoothnessKind,
    class: ValuationClass,
) -> Result<SmoothnessCertificate> {
    for (c, case) in cases.iter().enumerate() {
        if let Some(i) = case
            .instance
            .valuations
            .iter()
            .position(|v| !class.contains(v))
        {
            return Err(Error::ClassMismatch(format!(
                "case {c}, bidder {i} is outside the declared class"
            )));
        }
    }
    let lambda = match class {
        ValuationClass::Submodular => key_lambda(alpha),
        _ => key_lambda(alpha) / 2.0,
    };
    let margins: Vec<f64> = cases
        .par_iter()
        .map(|case| case_margin(case, alpha, lambda, kind))
        .collect::<Result<_>>()?;
    let margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let (mu, mu2, implied_poa) = match kind {
        SmoothnessKind::Smooth => (alpha, None, poa_from_smooth(lambda, alpha)),
        SmoothnessKind::WeaklySmooth => {
            (0.0, Some(alpha), poa_from_weakly_smooth(lambda, 0.0, alpha))
        }
    };
    Ok(SmoothnessCertificate {
        kind,
        lambda,
        mu,
        mu2,
        alpha,
        margin,
        instances: cases.len(),
        verified: margin >= -tolerance::INEQUALITY,
        implied_poa,
    })
}

/// A deviation for one bidder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Deviation {
    /// The randomized uniform deviation, evaluated exactly.
    KeyLemma { alpha: f64 },
    /// A finite distribution over bids.
    Mixed { support: Vec<(StandardBid, f64)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplateMargin {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// `E[u_i(b'_i, b_{-i})] - (λ v_i(x) - μ E[Σ_{j<=x} β_j(b_{-i})])` where the
/// opposing bids are drawn from `context`, a finite distribution over full bid
/// rows (row `i` is ignored).
#[allow(clippy::too_many_arguments)]
pub fn template_margin(
    i: usize,
    val: &Valuation,
    x_opt: usize,
    context: &[(Vec<Vec<f64>>, f64)],
    deviation: &Deviation,
    auction: &Auction,
    lambda: f64,
    mu: f64,
) -> Result<TemplateMargin> {
    if context.is_empty() {
        return Err(Error::Domain("empty opposing distribution".into()));
    }
    let total: f64 = context.iter().map(|(_, p)| p).sum();
    if context.iter().any(|(_, p)| *p < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "opposing probabilities sum to {total}"
        )));
    }
    let k = auction.k;
    let mut lhs = 0.0;
    let mut beta_sum = 0.0;
    for (rows, p) in context {
        if i >= rows.len() {
            return Err(Error::Dimension(format!(
                "bidder {i} missing from a context profile"
            )));
        }
        let opp = OpposingBids::from_rows(rows, Some(i), k);
        beta_sum += p * (1..=x_opt).map(|j| opp.beta(j)).sum::<f64>();
        let u = match deviation {
            Deviation::KeyLemma { alpha } => {
                expected_deviation_utility_exact(val, x_opt, &opp, *alpha, auction.pricing)?
            }
            Deviation::Mixed { support } => {
                let mut rows = rows.clone();
                let mut acc = 0.0;
                for (bid, q) in support {
                    if bid.len() != k {
                        return Err(Error::Dimension(format!(
                            "deviation over {} units, auction over {k}",
                            bid.len()
                        )));
                    }
                    rows[i] = bid.as_slice().to_vec();
                    acc += q * auction.utility_rows(&rows, i, val);
                }
                acc
            }
        };
        lhs += p * u;
    }
    let rhs = lambda * val.value(x_opt) - mu * beta_sum;
    Ok(TemplateMargin {
        lhs,
        rhs,
        margin: lhs - rhs,
    })
}

/// Template margins for every bidder of `instance`, each against its
/// optimal share, with one deviation per bidder.
pub fn verify_template_inequality(
    instance: &GameInstance,
    context: &[(BidProfile, f64)],
    deviations: &[Deviation],
    lambda: f64,
    mu: f64,
) -> Result<Vec<TemplateMargin>> {
    if deviations.len() != instance.n() {
        return Err(Error::Dimension(format!(
            "{} deviations for {} bidders",
            deviations.len(),
            instance.n()
        )));
    }
    let opt = optimal_allocation(&instance.valuations, instance.k())?;
    let ctx: Vec<(Vec<Vec<f64>>, f64)> = context
        .iter()
        .map(|(p, q)| (p.rows().iter().map(|r| r.as_slice().to_vec()).collect(), *q))
        .collect();
    instance
        .valuations
        .iter()
        .enumerate()
        .map(|(i, val)| {
            template_margin(
                i,
                val,
                opt.allocation[i],
                &ctx,
                &deviations[i],
                &instance.auction,
                lambda,
                mu,
            )
        })
        .collect()
}
