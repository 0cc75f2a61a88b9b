//! Python bindings for the auction core.
//!
//! Structured results (outcomes, reports, tables) cross the boundary as plain
//! dicts and lists built from their JSON form.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use poa_lab_core as core;
use poa_lab_core::harness::{self, ExperimentConfig};
use poa_lab_core::instances::{build_instance, InstanceParams};
use poa_lab_core::smoothness;

create_exception!(poa_lab, PoaLabError, PyException);

fn err(e: core::Error) -> PyErr {
    PoaLabError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_pricing(name: &str) -> PyResult<core::Pricing> {
    serde_json::from_value(serde_json::Value::String(name.into()))
        .map_err(|_| PyValueError::new_err(format!("unknown pricing {name:?}")))
}

fn parse_tie_break(rule: &Bound<'_, PyAny>) -> PyResult<core::TieBreakRule> {
    if let Ok(bidder) = rule.extract::<usize>() {
        return Ok(core::TieBreakRule::favor(bidder));
    }
    match rule.extract::<String>()?.as_str() {
        "lexicographic" => Ok(core::TieBreakRule::Lexicographic),
        "favor-last" => Ok(core::TieBreakRule::FavorLast),
        other => Err(PyValueError::new_err(format!(
            "tie break must be 'lexicographic', 'favor-last' or a bidder index, got {other:?}"
        ))),
    }
}

fn profile(bids: Vec<Vec<f64>>) -> PyResult<core::BidProfile> {
    let rows = bids
        .into_iter()
        .map(core::StandardBid::new)
        .collect::<core::Result<Vec<_>>>()
        .map_err(err)?;
    core::BidProfile::standard(rows).map_err(err)
}

fn inner(vals: &[PyRef<'_, Valuation>]) -> Vec<core::Valuation> {
    vals.iter().map(|v| v.inner.clone()).collect()
}

/// Monotone valuation over `0..=k` units with `v(0) = 0`.
#[pyclass(module = "poa_lab", frozen)]
struct Valuation {
    inner: core::Valuation,
}

#[pymethods]
impl Valuation {
    #[new]
    fn new(values: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: core::Valuation::new(values).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_marginals(marginals: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: core::Valuation::from_marginals(&marginals).map_err(err)?,
        })
    }

    #[staticmethod]
    fn additive(k: usize, per_unit: f64) -> PyResult<Self> {
        Ok(Self {
            inner: core::Valuation::additive(k, per_unit).map_err(err)?,
        })
    }

    #[staticmethod]
    fn unit_demand(k: usize, value: f64) -> PyResult<Self> {
        Ok(Self {
            inner: core::Valuation::unit_demand(k, value).map_err(err)?,
        })
    }

    /// Seeded random valuation of class 'submodular', 'subadditive' or 'general'.
    #[staticmethod]
    #[pyo3(signature = (class_name, k, seed, scale = 1.0))]
    fn random(class_name: &str, k: usize, seed: u64, scale: f64) -> PyResult<Self> {
        let class = serde_json::from_value(serde_json::Value::String(class_name.into()))
            .map_err(|_| PyValueError::new_err(format!("unknown class {class_name:?}")))?;
        Ok(Self {
            inner: core::random_valuation(class, k, scale, seed).map_err(err)?,
        })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    #[getter]
    fn marginals(&self) -> Vec<f64> {
        self.inner.marginals()
    }

    fn value(&self, units: usize) -> PyResult<f64> {
        if units > self.inner.k() {
            return Err(PyValueError::new_err(format!(
                "{units} units exceed k = {}",
                self.inner.k()
            )));
        }
        Ok(self.inner.value(units))
    }

    fn is_submodular(&self) -> bool {
        self.inner.is_submodular()
    }

    fn is_subadditive(&self) -> bool {
        self.inner.is_subadditive()
    }

    /// True iff no prefix of `bids` sums above the value of that many units.
    fn admits(&self, bids: Vec<f64>) -> bool {
        self.inner.admits(&bids)
    }

    fn __repr__(&self) -> String {
        format!("Valuation({:?})", self.inner.values())
    }
}

/// A `k`-unit auction with a pricing rule and a tie-break rule.
#[pyclass(module = "poa_lab", frozen)]
struct Auction {
    inner: core::Auction,
}

#[pymethods]
impl Auction {
    /// `tie_break` is 'lexicographic', 'favor-last' or the index of a favored bidder.
    #[new]
    #[pyo3(signature = (k, pricing = "discriminatory", tie_break = None))]
    fn new(k: usize, pricing: &str, tie_break: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        if k == 0 {
            return Err(PyValueError::new_err("k must be positive"));
        }
        let tb = match tie_break {
            Some(rule) => parse_tie_break(rule)?,
            None => core::TieBreakRule::Lexicographic,
        };
        Ok(Self {
            inner: core::Auction::new(k, parse_pricing(pricing)?, tb),
        })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn pricing(&self) -> &'static str {
        self.inner.pricing.name()
    }

    /// Allocation, winning bids, uniform price and payments for one bid row per bidder.
    fn run<'py>(&self, py: Python<'py>, bids: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyAny>> {
        let p = self.checked_profile(bids)?;
        to_py(py, &self.inner.run(&p))
    }

    fn utility(
        &self,
        bids: Vec<Vec<f64>>,
        bidder: usize,
        valuation: PyRef<'_, Valuation>,
    ) -> PyResult<f64> {
        let p = self.checked_profile(bids)?;
        core::utility(&valuation.inner, &p, bidder, &self.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Auction(k={}, pricing={:?}, tie_break={})",
            self.inner.k,
            self.inner.pricing.name(),
            self.inner.tie_break.label()
        )
    }
}

impl Auction {
    fn checked_profile(&self, bids: Vec<Vec<f64>>) -> PyResult<core::BidProfile> {
        if let Some(row) = bids.iter().find(|r| r.len() != self.inner.k) {
            return Err(PyValueError::new_err(format!(
                "bid row has {} entries, expected {}",
                row.len(),
                self.inner.k
            )));
        }
        profile(bids)
    }
}

/// Best welfare and an allocation attaining it.
#[pyfunction]
fn optimal_allocation(
    valuations: Vec<PyRef<'_, Valuation>>,
    k: usize,
) -> PyResult<(f64, Vec<usize>)> {
    let opt = core::optimal_allocation(&inner(&valuations), k).map_err(err)?;
    Ok((opt.value, opt.allocation))
}

#[pyfunction]
fn social_welfare(valuations: Vec<PyRef<'_, Valuation>>, units: Vec<usize>) -> PyResult<f64> {
    core::social_welfare(&inner(&valuations), &units).map_err(err)
}

/// `α (1 - e^{-1/α})`.
#[pyfunction]
fn key_lambda(alpha: f64) -> PyResult<f64> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(PyValueError::new_err("alpha must be positive"));
    }
    Ok(smoothness::key_lambda(alpha))
}

#[pyfunction]
fn optimal_alpha(pricing: &str) -> PyResult<f64> {
    Ok(smoothness::optimal_alpha(parse_pricing(pricing)?))
}

/// Lower branch of the Lambert W function on `[-1/e, 0)`.
#[pyfunction]
fn lambert_w_minus1(x: f64) -> PyResult<f64> {
    smoothness::lambert_w_minus1(x).map_err(err)
}

/// Exact expected utility of the randomized deviation against the other
/// bidders' rows `opposing`.
#[pyfunction]
#[pyo3(signature = (valuation, units, opposing, alpha, pricing = "discriminatory"))]
fn deviation_utility(
    valuation: PyRef<'_, Valuation>,
    units: usize,
    opposing: Vec<Vec<f64>>,
    alpha: f64,
    pricing: &str,
) -> PyResult<f64> {
    let opp = core::OpposingBids::from_rows(&opposing, None, valuation.inner.k());
    smoothness::expected_deviation_utility_exact(
        &valuation.inner,
        units,
        &opp,
        alpha,
        parse_pricing(pricing)?,
    )
    .map_err(err)
}

/// Lower bound the deviation utility must meet.
#[pyfunction]
fn deviation_bound(
    valuation: PyRef<'_, Valuation>,
    units: usize,
    opposing: Vec<Vec<f64>>,
    alpha: f64,
) -> PyResult<f64> {
    let opp = core::OpposingBids::from_rows(&opposing, None, valuation.inner.k());
    smoothness::eq2_rhs(&valuation.inner, units, &opp, alpha).map_err(err)
}

#[pyfunction]
fn bound_table(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &smoothness::bound_table())
}

#[pyfunction]
fn list_instances() -> Vec<(&'static str, &'static str)> {
    core::instances::list_instances()
}

/// Measures a named instance and compares it with its expected quantities.
#[pyfunction]
#[pyo3(signature = (id, k = None, eps = None, tick = None))]
fn verify_instance<'py>(
    py: Python<'py>,
    id: &str,
    k: Option<usize>,
    eps: Option<f64>,
    tick: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let params = InstanceParams {
        k,
        eps,
        ..Default::default()
    };
    let inst = build_instance(id, &params).map_err(err)?;
    let outcome = py.detach(|| harness::verify(&inst, tick)).map_err(err)?;
    to_py(py, &outcome)
}

/// Runs an experiment from its JSON config and returns the report.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(err)?;
    let report = py.detach(|| harness::run(&cfg)).map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

#[pymodule]
fn poa_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PoaLabError", m.py().get_type::<PoaLabError>())?;
    m.add_class::<Valuation>()?;
    m.add_class::<Auction>()?;
    m.add_function(wrap_pyfunction!(optimal_allocation, m)?)?;
    m.add_function(wrap_pyfunction!(social_welfare, m)?)?;
    m.add_function(wrap_pyfunction!(key_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(lambert_w_minus1, m)?)?;
    m.add_function(wrap_pyfunction!(deviation_utility, m)?)?;
    m.add_function(wrap_pyfunction!(deviation_bound, m)?)?;
    m.add_function(wrap_pyfunction!(bound_table, m)?)?;
    m.add_function(wrap_pyfunction!(list_instances, m)?)?;
    m.add_function(wrap_pyfunction!(verify_instance, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(version, m)?)?;
    Ok(())
}
