//! Deviation-based welfare certificates and the resulting bound constants.

mod certificate;
mod frontier;
mod key_lemma;
mod resampled;

pub use certificate::{
    template_margin, verify_smoothness, verify_template_inequality, Deviation, SmoothnessCase,
    SmoothnessCertificate, SmoothnessKind, TemplateMargin,
};
pub use frontier::{
    da_frontier_check, lambda_ceiling, upa_frontier_check, DaFrontierReport, UpaFrontierReport,
};
pub use key_lemma::{
    deviation_density_mass, eq2_rhs, expected_deviation_utility_exact,
    expected_deviation_utility_monte_carlo, verify_key_lemma, KeyLemmaMargin, MonteCarloEstimate,
};
pub use resampled::{overbidding_set, resampled_deviation, resampled_support, ResampledVariant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{Interface, Pricing};
use crate::tolerance;
use crate::valuation::ValuationClass;

/// Lower branch `W_{-1}` of the Lambert W function on `[-1/e, 0)`.
///
/// Halley iteration started from a branch-point series near `-1/e` and from
/// `ln(-x) - ln(-ln(-x))` elsewhere.
pub fn lambert_w_minus1(x: f64) -> Result<f64> {
    let branch = -(-1f64).exp();
    if !(x >= branch - 1e-15 && x < 0.0) {
        return Err(Error::Domain(format!(
            "W_-1 is defined on [-1/e, 0), got {x}"
        )));
    }
    let q = 2.0 * (1.0 + std::f64::consts::E * x);
    if q <= 0.0 {
        return Ok(-1.0);
    }
    let mut w = if q < 0.5 {
        let p = -q.sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        let l = (-x).ln();
        l - (-l).ln()
    };
    for _ in 0..50 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if f == 0.0 || wp1 == 0.0 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        // stay on the lower branch
        let next = if w - step > -1.0 {
            (w - 1.0) / 2.0
        } else {
            w - step
        };
        if (next - w).abs() <= 4.0 * f64::EPSILON * w.abs() {
            w = next;
            break;
        }
        w = next;
    }
    if (w * w.exp() - x).abs() > tolerance::LAMBERT_RESIDUAL {
        return Err(Error::Domain(format!(
            "W_-1 iteration did not converge at {x}"
        )));
    }
    Ok(w)
}

/// `-1/(W_{-1}(-1/e^2) + 2)`, the scale minimizing `(a + 1) / (a (1 - e^{-1/a}))`.
fn uniform_alpha() -> f64 {
    let w = lambert_w_minus1(-(-2f64).exp()).expect("inside domain");
    -1.0 / (w + 2.0)
}

/// Deviation scale used for each pricing rule.
pub fn optimal_alpha(pricing: Pricing) -> f64 {
    match pricing {
        Pricing::Discriminatory => 1.0,
        Pricing::Uniform | Pricing::UniformLowestWinning => uniform_alpha(),
    }
}

/// `α (1 - e^{-1/α})`, the welfare coefficient of the randomized deviation.
pub fn key_lambda(alpha: f64) -> f64 {
    alpha * -(-1.0 / alpha).exp_m1()
}

/// `max{1, μ} / λ`.
pub fn poa_from_smooth(lambda: f64, mu: f64) -> f64 {
    mu.max(1.0) / lambda
}

/// `(μ2 + max{1, μ1}) / λ`.
pub fn poa_from_weakly_smooth(lambda: f64, mu1: f64, mu2: f64) -> f64 {
    (mu2 + mu1.max(1.0)) / lambda
}

/// `(μ + 1) / λ`, the uniform-price consequence of the per-bidder template.
pub fn poa_from_template_uniform(lambda: f64, mu: f64) -> f64 {
    (mu + 1.0) / lambda
}

/// Sequential composition adds one to the payment coefficient.
pub fn sequential_bump(mu: f64) -> f64 {
    mu + 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Composition {
    Single,
    Simultaneous,
    Sequential,
}

/// One upper bound on the (Bayesian) price of anarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub composition: Composition,
    pub pricing: Pricing,
    pub class: ValuationClass,
    pub interface: Option<Interface>,
    pub alpha: Option<f64>,
    pub lambda: f64,
    pub mu: f64,
    pub mu2: Option<f64>,
    pub bound: f64,
}

/// Price-of-anarchy bounds for single auctions and their compositions.
pub fn bound_table() -> Vec<BoundRow> {
    let da_alpha = optimal_alpha(Pricing::Discriminatory);
    let upa_alpha = optimal_alpha(Pricing::Uniform);
    let da_lambda = key_lambda(da_alpha);
    let upa_lambda = key_lambda(upa_alpha);
    let mut rows = Vec::new();
    let single = |pricing, class, interface, alpha: Option<f64>, lambda: f64, mu: f64| {
        let bound = match pricing {
            Pricing::Discriminatory => poa_from_smooth(lambda, mu),
            _ => poa_from_template_uniform(lambda, mu),
        };
        BoundRow {
            composition: Composition::Single,
            pricing,
            class,
            interface,
            alpha,
            lambda,
            mu,
            mu2: None,
            bound,
        }
    };
    use Interface::{Standard, Uniform};
    use ValuationClass::{Subadditive, Submodular};
    let da = Pricing::Discriminatory;
    let upa = Pricing::Uniform;
    rows.push(single(
        da,
        Submodular,
        None,
        Some(da_alpha),
        da_lambda,
        da_alpha,
    ));
    rows.push(single(da, Subadditive, Some(Standard), None, 0.5, 1.0));
    rows.push(single(
        da,
        Subadditive,
        Some(Uniform),
        Some(da_alpha),
        da_lambda / 2.0,
        da_alpha,
    ));
    rows.push(single(
        upa,
        Submodular,
        None,
        Some(upa_alpha),
        upa_lambda,
        upa_alpha,
    ));
    rows.push(single(upa, Subadditive, Some(Standard), None, 0.5, 1.0));
    rows.push(single(
        upa,
        Subadditive,
        Some(Uniform),
        Some(upa_alpha),
        upa_lambda / 2.0,
        upa_alpha,
    ));

    for (class, halve) in [(Submodular, 1.0), (Subadditive, 2.0)] {
        for composition in [Composition::Simultaneous, Composition::Sequential] {
            let sequential = composition == Composition::Sequential;
            let lambda = da_lambda / halve;
            let mu = if sequential {
                sequential_bump(da_alpha)
            } else {
                da_alpha
            };
            rows.push(BoundRow {
                composition,
                pricing: da,
                class,
                interface: None,
                alpha: Some(da_alpha),
                lambda,
                mu,
                mu2: None,
                bound: poa_from_smooth(lambda, mu),
            });
            let lambda = upa_lambda / halve;
            let mu1 = if sequential {
                sequential_bump(0.0)
            } else {
                0.0
            };
            rows.push(BoundRow {
                composition,
                pricing: upa,
                class,
                interface: None,
                alpha: Some(upa_alpha),
                lambda,
                mu: mu1,
                mu2: Some(upa_alpha),
                bound: poa_from_weakly_smooth(lambda, mu1, upa_alpha),
            });
        }
    }
    rows
}

fn opt_name<T>(x: Option<T>, f: impl Fn(T) -> String) -> String {
    x.map(f).unwrap_or_default()
}

/// Writes the bound table as CSV.
pub fn write_bound_table<W: std::io::Write>(rows: &[BoundRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "composition",
        "pricing",
        "class",
        "interface",
        "alpha",
        "lambda",
        "mu",
        "mu2",
        "bound",
    ])?;
    for r in rows {
        let composition = match r.composition {
            Composition::Single => "single",
            Composition::Simultaneous => "simultaneous",
            Composition::Sequential => "sequential",
        };
        let class = match r.class {
            ValuationClass::Submodular => "submodular",
            ValuationClass::Subadditive => "subadditive",
            ValuationClass::General => "general",
        };
        w.write_record([
            composition.to_string(),
            r.pricing.name().to_string(),
            class.to_string(),
            opt_name(r.interface, |i| i.name().to_string()),
            opt_name(r.alpha, |a| format!("{a:.10}")),
            format!("{:.10}", r.lambda),
            format!("{:.10}", r.mu),
            opt_name(r.mu2, |m| format!("{m:.10}")),
            format!("{:.10}", r.bound),
        ])?;
    }
    w.flush()?;
    Ok(())
}
