//! Config-driven experiments with JSON reports and CSV summaries.

mod config;
mod verify;

pub use config::{
    ExperimentConfig, ExperimentKind, InstanceSource, OutputPaths, SweepParams, CONFIG_VERSION,
};
pub use verify::{measure, verify, Check, VerifyOutcome};

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    bayesian_poa, find_pure_nash, is_bayes_nash, BidGrid, GameInstance, SearchMode,
};
use crate::error::{Error, Result};
use crate::mechanism::{
    allocate, social_welfare, Auction, Interface, OpposingBids, Pricing, TieBreakRule,
};
use crate::sampling::{random_standard_profile, random_uniform_profile};
use crate::smoothness::{
    bound_table, da_frontier_check, eq2_rhs, expected_deviation_utility_exact, key_lambda,
    upa_frontier_check, verify_smoothness, Composition, SmoothnessCase, SmoothnessKind,
};
use crate::tolerance;
use crate::valuation::{sample_valuation, ValuationClass};
use crate::welfare::optimal_allocation;

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "POA_LAB_THREADS";

/// Column order of the CSV summary.
pub const CSV_COLUMNS: [&str; 12] = [
    "experiment",
    "instance",
    "n",
    "k",
    "pricing",
    "interface",
    "alpha",
    "lambda",
    "mu",
    "margin",
    "poa",
    "runtime_ms",
];

/// One result line. Everything except timing is deterministic given the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub instance: String,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub pricing: Option<Pricing>,
    pub interface: Option<Interface>,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub margin: Option<f64>,
    pub poa: Option<f64>,
    pub seed: Option<u64>,
    pub tolerance: f64,
    pub passed: bool,
}

impl ResultRow {
    fn new(kind: ExperimentKind, instance: impl Into<String>) -> Self {
        Self {
            experiment: kind.name().into(),
            instance: instance.into(),
            n: None,
            k: None,
            pricing: None,
            interface: None,
            alpha: None,
            lambda: None,
            mu: None,
            margin: None,
            poa: None,
            seed: None,
            tolerance: 0.0,
            passed: true,
        }
    }
}

/// Wall-clock data, kept apart so reports compare equal across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_ms: u128,
    pub runtime_ms: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub passed: bool,
    pub failures: Vec<String>,
    pub rows: Vec<ResultRow>,
    pub details: serde_json::Value,
    pub timing: Timing,
}

impl ExperimentReport {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS)?;
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.12}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.experiment.clone(),
                r.instance.clone(),
                r.n.map(|v| v.to_string()).unwrap_or_default(),
                r.k.map(|v| v.to_string()).unwrap_or_default(),
                r.pricing.map(|p| p.name().to_string()).unwrap_or_default(),
                r.interface
                    .map(|i| i.name().to_string())
                    .unwrap_or_default(),
                opt(r.alpha),
                opt(r.lambda),
                opt(r.mu),
                opt(r.margin),
                opt(r.poa),
                format!("{:.3}", self.timing.runtime_ms),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the report and summary to the configured output paths.
    pub fn persist(&self) -> Result<()> {
        if let Some(path) = &self.config.output.json {
            std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        }
        if let Some(path) = &self.config.output.csv {
            self.write_csv(std::fs::File::create(path)?)?;
        }
        Ok(())
    }
}

/// Worker count: the environment variable, then the config, then all cores.
pub fn thread_count(config: &ExperimentConfig) -> Result<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        };
    }
    Ok(config
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

/// Validates and runs an experiment on a dedicated pool, then persists the outputs.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let threads = thread_count(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let started_unix_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis());
    let clock = Instant::now();
    let (rows, details) = pool.install(|| dispatch(config))?;
    let failures: Vec<String> = rows
        .iter()
        .filter(|r| !r.passed)
        .map(|r| {
            format!(
                "{} {} failed (margin {:?}, poa {:?})",
                r.experiment, r.instance, r.margin, r.poa
            )
        })
        .collect();
    let report = ExperimentReport {
        config: config.clone(),
        passed: failures.is_empty(),
        failures,
        rows,
        details,
        timing: Timing {
            started_unix_ms,
            runtime_ms: clock.elapsed().as_secs_f64() * 1e3,
            threads,
        },
    };
    report.persist()?;
    Ok(report)
}

pub fn run_path(path: &Path) -> Result<ExperimentReport> {
    run(&ExperimentConfig::from_path(path)?)
}

type Outcome = (Vec<ResultRow>, serde_json::Value);

fn dispatch(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.kind {
        ExperimentKind::BoundTable => run_bound_table(),
        ExperimentKind::VerifyInstance => run_verify_instance(cfg),
        ExperimentKind::SweepKeyLemma => run_key_lemma_sweep(cfg),
        ExperimentKind::CertifySmoothness => run_certify(cfg),
        ExperimentKind::FindPne => run_find_pne(cfg),
        ExperimentKind::VerifyBne => run_verify_bne(cfg),
        ExperimentKind::TemplateFrontier => run_template_frontier(cfg),
    }
}

fn run_bound_table() -> Result<Outcome> {
    let table = bound_table();
    let rows = table
        .iter()
        .map(|b| {
            let composition = match b.composition {
                Composition::Single => "single",
                Composition::Simultaneous => "simultaneous",
                Composition::Sequential => "sequential",
            };
            let mut r = ResultRow::new(
                ExperimentKind::BoundTable,
                format!("{composition}-{:?}", b.class).to_lowercase(),
            );
            r.pricing = Some(b.pricing);
            r.interface = b.interface;
            r.alpha = b.alpha;
            r.lambda = Some(b.lambda);
            r.mu = Some(b.mu2.unwrap_or(b.mu));
            r.poa = Some(b.bound);
            r
        })
        .collect();
    Ok((rows, serde_json::to_value(&table)?))
}

fn instance_of(cfg: &ExperimentConfig) -> Result<crate::instances::NamedInstance> {
    cfg.instance
        .as_ref()
        .ok_or_else(|| Error::Config(format!("{} needs an instance", cfg.kind.name())))?
        .load()
}

fn run_verify_instance(cfg: &ExperimentConfig) -> Result<Outcome> {
    let inst = instance_of(cfg)?;
    let out = verify(&inst, cfg.grid.as_ref().map(|g| g.tick))?;
    let mut r = ResultRow::new(cfg.kind, inst.id.clone());
    r.n = Some(inst.valuations.len());
    r.k = Some(inst.auction.k);
    r.pricing = Some(inst.auction.pricing);
    r.interface = Some(inst.interface);
    r.poa = out
        .measured
        .get("poa")
        .or(out.measured.get("bpoa"))
        .copied();
    r.tolerance = inst
        .expected
        .iter()
        .map(|e| e.tolerance)
        .fold(0.0, f64::max);
    r.passed = out.passed;
    Ok((vec![r], serde_json::to_value(&out)?))
}

/// Seed of sweep case `c`, independent of scheduling.
pub fn case_seed(seed: u64, c: usize) -> u64 {
    // splitmix64 step
    let mut z = seed.wrapping_add((c as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A random game with random no-overbidding bids, deterministic in `seed`.
pub fn random_case(
    seed: u64,
    class: ValuationClass,
    pricing: Pricing,
    interface: Interface,
    sweep: &SweepParams,
) -> Result<SmoothnessCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=sweep.max_n);
    let k = rng.gen_range(1..=sweep.max_k);
    let vals = (0..n)
        .map(|_| sample_valuation(class, k, sweep.scale, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let profile = match interface {
        Interface::Standard => random_standard_profile(&vals, &mut rng)?,
        Interface::Uniform => random_uniform_profile(&vals, &mut rng)?,
    };
    Ok(SmoothnessCase {
        instance: GameInstance::new(vals, Auction::new(k, pricing, TieBreakRule::Lexicographic))?,
        profile,
    })
}

fn default_sweep() -> SweepParams {
    SweepParams {
        cases: 1000,
        max_n: 5,
        max_k: 8,
        scale: 1.0,
    }
}

fn alphas(cfg: &ExperimentConfig) -> Vec<f64> {
    if cfg.alphas.is_empty() {
        vec![0.5, 0.87, 1.0, 2.0]
    } else {
        cfg.alphas.clone()
    }
}

fn pricings(cfg: &ExperimentConfig) -> Vec<Pricing> {
    cfg.pricing
        .map_or(vec![Pricing::Discriminatory, Pricing::Uniform], |p| vec![p])
}

/// Smallest deviation-inequality margins of one case: the per-bidder bound in
/// its unit-price form, and in its value form with `λ` halved outside the
/// submodular class.
fn key_lemma_case_margins(
    case: &SmoothnessCase,
    alpha: f64,
    class: ValuationClass,
) -> Result<(f64, f64)> {
    let inst = &case.instance;
    let opt = optimal_allocation(&inst.valuations, inst.k())?;
    let lambda = match class {
        ValuationClass::Submodular => key_lambda(alpha),
        _ => key_lambda(alpha) / 2.0,
    };
    let (mut unit_form, mut value_form) = (f64::INFINITY, f64::INFINITY);
    for (i, val) in inst.valuations.iter().enumerate() {
        let x = opt.allocation[i];
        let opp = OpposingBids::of_profile(&case.profile, i);
        let lhs = expected_deviation_utility_exact(val, x, &opp, alpha, inst.auction.pricing)?;
        unit_form = unit_form.min(lhs - eq2_rhs(val, x, &opp, alpha)?);
        let beta_sum: f64 = (1..=x).map(|j| opp.beta(j)).sum();
        value_form = value_form.min(lhs - (lambda * val.value(x) - alpha * beta_sum));
    }
    Ok((unit_form, value_form))
}

fn run_key_lemma_sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let seed = cfg
        .seed
        .ok_or_else(|| Error::Config("sweep needs a seed".into()))?;
    let sweep = cfg.sweep.clone().unwrap_or_else(default_sweep);
    let class = cfg.class.unwrap_or(ValuationClass::Submodular);
    let interface = cfg.interface.unwrap_or(Interface::Standard);
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for pricing in pricings(cfg) {
        let cases = (0..sweep.cases)
            .into_par_iter()
            .map(|c| random_case(case_seed(seed, c), class, pricing, interface, &sweep))
            .collect::<Result<Vec<_>>>()?;
        for alpha in alphas(cfg) {
            let margins = cases
                .par_iter()
                .map(|case| key_lemma_case_margins(case, alpha, class))
                .collect::<Result<Vec<_>>>()?;
            let unit = margins.iter().map(|m| m.0).fold(f64::INFINITY, f64::min);
            let value = margins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
            let mut r = ResultRow::new(cfg.kind, format!("random-{}", class_name(class)));
            r.n = Some(sweep.max_n);
            r.k = Some(sweep.max_k);
            r.pricing = Some(pricing);
            r.interface = Some(interface);
            r.alpha = Some(alpha);
            r.lambda = Some(match class {
                ValuationClass::Submodular => key_lambda(alpha),
                _ => key_lambda(alpha) / 2.0,
            });
            r.mu = Some(alpha);
            r.margin = Some(unit.min(value));
            r.seed = Some(seed);
            r.tolerance = tolerance::INEQUALITY;
            r.passed = unit >= -tolerance::INEQUALITY && value >= -tolerance::INEQUALITY;
            rows.push(r);
            details.push(serde_json::json!({
                "pricing": pricing.name(),
                "alpha": alpha,
                "cases": cases.len(),
                "min_unit_price_margin": unit,
                "min_value_margin": value,
            }));
        }
    }
    Ok((rows, serde_json::Value::Array(details)))
}

fn class_name(class: ValuationClass) -> &'static str {
    match class {
        ValuationClass::Submodular => "submodular",
        ValuationClass::Subadditive => "subadditive",
        ValuationClass::General => "general",
    }
}

fn run_certify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let seed = cfg
        .seed
        .ok_or_else(|| Error::Config("certification needs a seed".into()))?;
    let sweep = cfg.sweep.clone().unwrap_or_else(default_sweep);
    let class = cfg.class.unwrap_or(ValuationClass::Submodular);
    let mut rows = Vec::new();
    let mut certs = Vec::new();
    for pricing in pricings(cfg) {
        // the weak certificate concerns uniform bids
        let (kind, interface) = match pricing {
            Pricing::Discriminatory => (
                SmoothnessKind::Smooth,
                cfg.interface.unwrap_or(Interface::Standard),
            ),
            _ => (
                SmoothnessKind::WeaklySmooth,
                cfg.interface.unwrap_or(Interface::Uniform),
            ),
        };
        let cases = (0..sweep.cases)
            .into_par_iter()
            .map(|c| random_case(case_seed(seed, c), class, pricing, interface, &sweep))
            .collect::<Result<Vec<_>>>()?;
        for alpha in alphas(cfg) {
            let cert = verify_smoothness(&cases, alpha, kind, class)?;
            let mut r = ResultRow::new(cfg.kind, format!("random-{}", class_name(class)));
            r.n = Some(sweep.max_n);
            r.k = Some(sweep.max_k);
            r.pricing = Some(pricing);
            r.interface = Some(interface);
            r.alpha = Some(alpha);
            r.lambda = Some(cert.lambda);
            r.mu = Some(cert.mu2.unwrap_or(cert.mu));
            r.margin = Some(cert.margin);
            r.poa = Some(cert.implied_poa);
            r.seed = Some(seed);
            r.tolerance = tolerance::INEQUALITY;
            r.passed = cert.verified;
            rows.push(r);
            certs.push(cert);
        }
    }
    Ok((rows, serde_json::to_value(&certs)?))
}

fn pne_grid(cfg: &ExperimentConfig) -> Result<BidGrid> {
    match &cfg.grid {
        Some(g) => Ok(g.clone()),
        // overbidding deviations stay available; a restricted grid can keep
        // inefficient profiles stable
        None => Ok(BidGrid::new(0.125, 1.0, Interface::Standard, false)?.with_full_standard(true)),
    }
}

#[derive(Debug, Clone, Serialize)]
struct PneSummary {
    case: usize,
    n: usize,
    k: usize,
    equilibria: usize,
    exhaustive: bool,
    opt: f64,
    worst_welfare: Option<f64>,
    slack: f64,
    passed: bool,
}

fn summarize_pne(
    case: usize,
    game: &GameInstance,
    grid: &BidGrid,
    mode: &SearchMode,
) -> Result<PneSummary> {
    let found = find_pure_nash(game, grid, mode)?;
    let opt = optimal_allocation(&game.valuations, game.k())?.value;
    let slack = (game.n() * game.k()) as f64 * grid.tick;
    let welfare = found
        .equilibria
        .iter()
        .map(|p| {
            social_welfare(
                &game.valuations,
                &allocate(p, &game.auction.tie_break).units,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = welfare.iter().copied().reduce(f64::min);
    Ok(PneSummary {
        case,
        n: game.n(),
        k: game.k(),
        equilibria: found.equilibria.len(),
        exhaustive: found.exhaustive,
        opt,
        worst_welfare: worst,
        slack,
        passed: worst.is_none_or(|w| w >= opt - slack - tolerance::INEQUALITY),
    })
}

fn run_find_pne(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = pne_grid(cfg)?;
    let mode = cfg.search.clone().unwrap_or_else(SearchMode::exhaustive);
    let games: Vec<(String, GameInstance, Option<u64>)> = match &cfg.instance {
        Some(src) => {
            let inst = src.load()?;
            vec![(inst.id.clone(), inst.game()?, None)]
        }
        None => {
            let seed = cfg
                .seed
                .ok_or_else(|| Error::Config("find-pne needs a seed".into()))?;
            let sweep = cfg.sweep.clone().unwrap_or(SweepParams {
                cases: 50,
                max_n: 2,
                max_k: 3,
                scale: 1.0,
            });
            let class = cfg.class.unwrap_or(ValuationClass::General);
            let pricing = cfg.pricing.unwrap_or(Pricing::Discriminatory);
            (0..sweep.cases)
                .map(|c| {
                    let s = case_seed(seed, c);
                    random_case(s, class, pricing, Interface::Standard, &sweep).map(|case| {
                        (
                            format!("random-{}-{c}", class_name(class)),
                            case.instance,
                            Some(s),
                        )
                    })
                })
                .collect::<Result<_>>()?
        }
    };
    let summaries = games
        .par_iter()
        .enumerate()
        .map(|(c, (_, g, _))| summarize_pne(c, g, &grid, &mode))
        .collect::<Result<Vec<_>>>()?;
    let rows = games
        .iter()
        .zip(&summaries)
        .map(|((id, g, seed), s)| {
            let mut r = ResultRow::new(cfg.kind, id.clone());
            r.n = Some(s.n);
            r.k = Some(s.k);
            r.pricing = Some(g.auction.pricing);
            r.interface = Some(grid.interface);
            r.margin = s.worst_welfare.map(|w| w - (s.opt - s.slack));
            r.poa = s
                .worst_welfare
                .and_then(|w| crate::welfare::poa_ratio(s.opt, w).ok());
            r.seed = *seed;
            r.tolerance = s.slack;
            r.passed = s.passed;
            r
        })
        .collect();
    Ok((rows, serde_json::to_value(&summaries)?))
}

fn run_verify_bne(cfg: &ExperimentConfig) -> Result<Outcome> {
    let inst = instance_of(cfg)?;
    let ex = inst
        .bayesian
        .as_ref()
        .ok_or_else(|| Error::Config(format!("instance {} has no Bayesian game", inst.id)))?;
    let mut game = ex.game.clone();
    if let Some(g) = &cfg.grid {
        game.grid = g.clone();
    }
    let report = is_bayes_nash(&game, &ex.strategy)?;
    let bpoa = bayesian_poa(&game, &ex.strategy)?;
    let tol = inst
        .expected
        .iter()
        .find(|e| e.name == "regret")
        .map_or(1e-12, |e| e.tolerance);
    let mut r = ResultRow::new(cfg.kind, inst.id.clone());
    r.n = Some(game.n());
    r.k = Some(game.auction.k);
    r.pricing = Some(game.auction.pricing);
    r.interface = Some(game.grid.interface);
    r.margin = Some(-report.max_regret);
    r.poa = Some(bpoa);
    r.tolerance = tol;
    r.passed = report.max_regret <= tol;
    Ok((
        vec![r],
        serde_json::json!({ "regret": report, "bpoa": bpoa }),
    ))
}

fn run_template_frontier(cfg: &ExperimentConfig) -> Result<Outcome> {
    let tick = cfg.grid.as_ref().map_or(1e-3, |g| g.tick);
    let params = match &cfg.instance {
        Some(InstanceSource::Named { params, .. }) => params.clone(),
        _ => Default::default(),
    };
    let k = params.k.unwrap_or(50);
    let mu = params.mu.unwrap_or(1.0);
    let da = da_frontier_check(k, mu, tick)?;
    let upa = upa_frontier_check(tick)?;
    let mut a = ResultRow::new(cfg.kind, "da-template-frontier");
    a.n = Some(2);
    a.k = Some(k);
    a.pricing = Some(Pricing::Discriminatory);
    a.interface = Some(Interface::Standard);
    a.mu = Some(mu);
    a.margin = Some(da.frontier - da.lhs);
    a.tolerance = 1e-6;
    a.passed = da.holds;
    let mut b = ResultRow::new(cfg.kind, "upa-template-frontier");
    b.n = Some(2);
    b.k = Some(1);
    b.pricing = Some(Pricing::Uniform);
    b.interface = Some(Interface::Standard);
    b.mu = Some(mu);
    b.lambda = Some(upa.lambda_ceiling(mu)?);
    b.margin = Some(0.5 - upa.sum_sup_utility);
    b.poa = Some((1.0 + mu) / upa.lambda_ceiling(mu)?);
    b.passed = upa.sum_sup_utility == 0.5;
    Ok((
        vec![a, b],
        serde_json::json!({ "discriminatory": da, "uniform": upa }),
    ))
}
