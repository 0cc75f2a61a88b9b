//! Acceptance suite: one PASS/FAIL line per criterion, with tolerances and
//! runtime limits pinned below. Exits non-zero if any criterion fails.

use std::f64::consts::E;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use poa_lab_core::equilibrium::{
    check_equal_bid_structure, is_epsilon_equilibrium, is_pure_nash, pne_standard_to_uniform,
    BidGrid, GameInstance,
};
use poa_lab_core::harness::{
    self, random_case, ExperimentConfig, ExperimentKind, ExperimentReport, SweepParams,
};
use poa_lab_core::instances::{
    build_instance, equal_bid_equilibrium, marginal_bidding_profile, perturbed_equal_bid_profile,
    InstanceParams,
};
use poa_lab_core::smoothness::{
    bound_table, da_frontier_check, expected_deviation_utility_exact,
    expected_deviation_utility_monte_carlo, optimal_alpha, upa_frontier_check, Composition,
};
use poa_lab_core::{
    optimal_allocation, sample_valuation, Auction, Interface, OpposingBids, Pricing, TieBreakRule,
    Valuation, ValuationClass,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

const SEED: u64 = 2024;
const CONSTANT_TOL: f64 = 1e-4;
const MARGIN_TOL: f64 = 1e-9;
const REGRET_TOL: f64 = 1e-9;
const BNE_REGRET_TOL: f64 = 1e-12;
const FRONTIER_TOL: f64 = 1e-6;
const UPA_POA_TOL: f64 = 1e-3;
const WELFARE_TOL: f64 = 1e-12;
const MC_SIGMAS: f64 = 3.0;
const MC_SAMPLES: usize = 100_000;
/// Rounding allowance for a long sum when every sample has the same utility.
const MC_SUM_TOL: f64 = 1e-9;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure((got - want).abs() <= tol, || {
        format!("{name} = {got}, expected {want} +/- {tol}")
    })
}

fn run_config(cfg: &ExperimentConfig) -> Result<ExperimentReport, String> {
    harness::run(cfg).map_err(|e| e.to_string())
}

fn min_margin(report: &ExperimentReport) -> f64 {
    report
        .rows
        .iter()
        .filter_map(|r| r.margin)
        .fold(f64::INFINITY, f64::min)
}

fn bound_constants() -> Outcome {
    let rows = bound_table();
    let single = |pricing: Pricing, class: ValuationClass| {
        rows.iter()
            .find(|r| {
                r.composition == Composition::Single
                    && r.pricing == pricing
                    && r.class == class
                    && r.interface != Some(Interface::Standard)
            })
            .map(|r| r.bound)
            .ok_or_else(|| format!("missing single row {pricing:?} {class:?}"))
    };
    use ValuationClass::{Subadditive, Submodular};
    close(
        "DA submodular",
        single(Pricing::Discriminatory, Submodular)?,
        1.58198,
        CONSTANT_TOL,
    )?;
    close(
        "DA subadditive",
        single(Pricing::Discriminatory, Subadditive)?,
        3.16395,
        CONSTANT_TOL,
    )?;
    close(
        "UPA submodular",
        single(Pricing::Uniform, Submodular)?,
        3.1462,
        CONSTANT_TOL,
    )?;
    close(
        "UPA subadditive",
        single(Pricing::Uniform, Subadditive)?,
        6.2924,
        CONSTANT_TOL,
    )?;
    let ratio = E / (E - 1.0);
    let compositions = [
        (
            Pricing::Discriminatory,
            Submodular,
            Composition::Simultaneous,
            ratio,
        ),
        (
            Pricing::Discriminatory,
            Submodular,
            Composition::Sequential,
            2.0 * ratio,
        ),
        (
            Pricing::Discriminatory,
            Subadditive,
            Composition::Simultaneous,
            2.0 * ratio,
        ),
        (
            Pricing::Discriminatory,
            Subadditive,
            Composition::Sequential,
            4.0 * ratio,
        ),
        (
            Pricing::Uniform,
            Submodular,
            Composition::Simultaneous,
            3.1462,
        ),
        (
            Pricing::Uniform,
            Submodular,
            Composition::Sequential,
            3.1462,
        ),
        (
            Pricing::Uniform,
            Subadditive,
            Composition::Simultaneous,
            6.2924,
        ),
        (
            Pricing::Uniform,
            Subadditive,
            Composition::Sequential,
            6.2924,
        ),
    ];
    for (pricing, class, comp, want) in compositions {
        let row = rows
            .iter()
            .find(|r| r.composition == comp && r.pricing == pricing && r.class == class)
            .ok_or_else(|| format!("missing {comp:?} {pricing:?} {class:?}"))?;
        close(
            &format!("{comp:?} {pricing:?} {class:?}"),
            row.bound,
            want,
            CONSTANT_TOL,
        )?;
    }
    Ok(format!("{} rows", rows.len()))
}

fn subadditive_lower_bound() -> Outcome {
    let k = 10;
    let params = InstanceParams {
        k: Some(k),
        eps: Some(1e-6),
        ..Default::default()
    };
    let inst = build_instance("upa-subadditive-lower-bound", &params).map_err(|e| e.to_string())?;
    let grid = inst.grid.clone().ok_or("no grid")?;
    ensure(grid.no_overbidding, || {
        "grid must enforce no-overbidding".into()
    })?;
    let m = harness::measure(&inst, None).map_err(|e| e.to_string())?;
    let regret = m["regret"];
    let poa = m["poa"];
    let floor = 2.0 * k as f64 / (k as f64 + 1.0) - 1e-4;
    ensure(regret <= REGRET_TOL, || format!("regret {regret}"))?;
    ensure(poa >= floor, || format!("poa {poa} < {floor}"))?;
    Ok(format!("regret {regret:.1e}, poa {poa:.6}"))
}

fn bayesian_example() -> Outcome {
    let inst = build_instance("da-bayesian-inefficiency", &InstanceParams::default())
        .map_err(|e| e.to_string())?;
    let ex = inst.bayesian.as_ref().ok_or("no Bayesian game")?;
    ensure(ex.game.auction.tie_break == TieBreakRule::favor(0), || {
        "ties must favor the first bidder".into()
    })?;
    close("tick", ex.game.grid.tick, 1e-3, 0.0)?;
    let m = harness::measure(&inst, None).map_err(|e| e.to_string())?;
    let (regret, bpoa) = (m["regret"], m["bpoa"]);
    ensure(regret <= BNE_REGRET_TOL, || format!("regret {regret}"))?;
    ensure((1.0004..=1.0005).contains(&bpoa), || {
        format!("bpoa {bpoa} outside [1.0004, 1.0005]")
    })?;
    Ok(format!("regret {regret:.1e}, bpoa {bpoa:.6}"))
}

fn sweep_config(kind: ExperimentKind, class: ValuationClass) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind);
    cfg.seed = Some(SEED);
    cfg.class = Some(class);
    cfg.sweep = Some(SweepParams {
        cases: 1000,
        max_n: 5,
        max_k: 8,
        scale: 1.0,
    });
    cfg.alphas = vec![0.5, 0.87, 1.0, 2.0];
    cfg
}

fn key_lemma_sweep() -> Outcome {
    let mut summary = Vec::new();
    for class in [ValuationClass::Submodular, ValuationClass::Subadditive] {
        let report = run_config(&sweep_config(ExperimentKind::SweepKeyLemma, class))?;
        let margin = min_margin(&report);
        ensure(report.rows.len() == 8, || {
            format!("{} rows", report.rows.len())
        })?;
        ensure(report.passed && margin >= -MARGIN_TOL, || {
            format!("{class:?}: min margin {margin:e}")
        })?;
        summary.push(format!("{class:?} min margin {margin:.3e}"));
    }
    Ok(format!(
        "1000 cases x 2 pricings x 4 alphas each; {}",
        summary.join(", ")
    ))
}

fn smoothness_certificates() -> Outcome {
    let upa_alpha = optimal_alpha(Pricing::Uniform);
    let mut notes = Vec::new();
    for class in [ValuationClass::Submodular, ValuationClass::Subadditive] {
        let mut cfg = sweep_config(ExperimentKind::CertifySmoothness, class);
        cfg.alphas.push(upa_alpha);
        let report = run_config(&cfg)?;
        let margin = min_margin(&report);
        ensure(report.passed && margin >= -MARGIN_TOL, || {
            format!("{class:?}: min margin {margin:e}")
        })?;
        if class == ValuationClass::Submodular {
            let poa_at = |pricing: Pricing, alpha: f64| {
                report
                    .rows
                    .iter()
                    .find(|r| r.pricing == Some(pricing) && r.alpha == Some(alpha))
                    .and_then(|r| r.poa)
                    .ok_or_else(|| format!("no row for {pricing:?} at {alpha}"))
            };
            close(
                "DA implied PoA at alpha 1",
                poa_at(Pricing::Discriminatory, 1.0)?,
                E / (E - 1.0),
                1e-12,
            )?;
            close(
                "UPA implied PoA",
                poa_at(Pricing::Uniform, upa_alpha)?,
                3.1462,
                UPA_POA_TOL,
            )?;
        }
        notes.push(format!("{class:?} min margin {margin:.3e}"));
    }
    Ok(notes.join(", "))
}

fn template_frontiers() -> Outcome {
    let (k, mu) = (50, 1.0);
    let da = da_frontier_check(k, mu, 1e-3).map_err(|e| e.to_string())?;
    let kf = k as f64;
    let frontier = (1.0 - 1.0 / E + (1.0 - 1.0 / E) / kf) * kf;
    close("frontier", da.frontier, frontier, 1e-12)?;
    ensure(da.lhs <= frontier + FRONTIER_TOL, || {
        format!("DA lhs {} > {frontier}", da.lhs)
    })?;
    let upa = upa_frontier_check(1e-3).map_err(|e| e.to_string())?;
    ensure(upa.sum_sup_utility == 0.5, || {
        format!("sum of best utilities {}", upa.sum_sup_utility)
    })?;
    for mu in [0.5, 1.0, 2.0] {
        let ceiling = upa.lambda_ceiling(mu).map_err(|e| e.to_string())?;
        close("lambda ceiling", ceiling, (1.0 + mu) / 2.0, 1e-15)?;
    }
    Ok(format!(
        "DA lhs {:.6} <= {frontier:.6}; UPA sum 0.5 over {} bids",
        da.lhs, upa.scanned
    ))
}

fn pne_efficiency() -> Outcome {
    let mut cfg = ExperimentConfig::new(ExperimentKind::FindPne);
    cfg.seed = Some(SEED);
    cfg.class = Some(ValuationClass::General);
    cfg.pricing = Some(Pricing::Discriminatory);
    cfg.sweep = Some(SweepParams {
        cases: 50,
        max_n: 2,
        max_k: 3,
        scale: 1.0,
    });
    cfg.grid = Some(
        BidGrid::new(0.125, 1.0, Interface::Standard, false)
            .map_err(|e| e.to_string())?
            .with_full_standard(true),
    );
    let report = run_config(&cfg)?;
    ensure(report.rows.len() >= 50, || {
        format!("{} instances", report.rows.len())
    })?;
    let details = report.details.as_array().ok_or("details are not a list")?;
    ensure(details.iter().all(|d| d["exhaustive"] == true), || {
        "a search was not exhaustive".into()
    })?;
    let with_pne = details
        .iter()
        .filter(|d| d["equilibria"].as_u64().unwrap_or(0) > 0)
        .count();
    let margin = min_margin(&report);
    ensure(report.passed, || format!("min welfare margin {margin}"))?;
    Ok(format!(
        "{} instances, {with_pne} with equilibria, min margin {margin:.4}",
        report.rows.len()
    ))
}

fn random_game(
    rng: &mut ChaCha8Rng,
    class: ValuationClass,
    pricing: Pricing,
    max_n: usize,
    max_k: usize,
) -> GameInstance {
    let n = rng.gen_range(2..=max_n);
    let k = rng.gen_range(1..=max_k);
    let vals = (0..n)
        .map(|_| sample_valuation(class, k, 1.0, rng).unwrap())
        .collect();
    GameInstance::new(vals, Auction::new(k, pricing, TieBreakRule::Lexicographic)).unwrap()
}

fn equal_bid_constructions() -> Outcome {
    let inst = build_instance("equal-bid-example", &InstanceParams::default())
        .map_err(|e| e.to_string())?;
    let out = harness::verify(&inst, None).map_err(|e| e.to_string())?;
    ensure(out.passed, || format!("named example: {:?}", out.checks))?;

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut built = 0;
    for case in 0..200 {
        let mut game = random_game(
            &mut rng,
            ValuationClass::Submodular,
            Pricing::Discriminatory,
            4,
            4,
        );
        let (profile, tb) = match equal_bid_equilibrium(&game) {
            Ok(x) => x,
            Err(poa_lab_core::Error::NoTieBreak) => continue,
            Err(e) => return Err(format!("case {case}: {e}")),
        };
        built += 1;
        let grid =
            BidGrid::new(1e-3, 1.0, Interface::Standard, false).map_err(|e| e.to_string())?;
        game.auction.tie_break = tb.clone();
        let regret = is_pure_nash(&profile, &game, &grid)
            .map_err(|e| e.to_string())?
            .max_regret;
        ensure(regret <= REGRET_TOL, || {
            format!("case {case}: equal-bid regret {regret}")
        })?;
        let s = check_equal_bid_structure(&profile, &game.valuations, &tb)
            .map_err(|e| e.to_string())?;
        ensure(s.holds(), || format!("case {case}: structure {s:?}"))?;
        for eps in [0.1, 0.01] {
            let perturbed = perturbed_equal_bid_profile(&game, eps).map_err(|e| e.to_string())?;
            for preset in TieBreakRule::presets(game.n()) {
                let mut g = game.clone();
                g.auction.tie_break = preset.clone();
                let ok = is_epsilon_equilibrium(&perturbed, &g, &grid, eps)
                    .map_err(|e| e.to_string())?;
                ensure(ok, || {
                    format!("case {case}: eps {eps} fails under {}", preset.label())
                })?;
            }
        }
    }
    ensure(built >= 100, || {
        format!("only {built} equal-bid profiles built")
    })?;

    let converted = uniform_conversions()?;
    Ok(format!(
        "{built} equal-bid profiles, {converted} uniform conversions"
    ))
}

/// Marginal-bidding uniform-price equilibria: submodular winners bid their
/// marginals, unit-demand losers value one unit below every won marginal.
fn uniform_conversions() -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0x55);
    let grid = BidGrid::new(0.01, 1.0, Interface::Standard, true).map_err(|e| e.to_string())?;
    let mut converted = 0;
    for case in 0..400 {
        let k = rng.gen_range(1..=4);
        let winners = rng.gen_range(1..=2);
        let mut vals: Vec<Valuation> = (0..winners)
            .map(|_| sample_valuation(ValuationClass::Submodular, k, 1.0, &mut rng).unwrap())
            .collect();
        let opt = optimal_allocation(&vals, k).map_err(|e| e.to_string())?;
        let floor = vals
            .iter()
            .zip(&opt.allocation)
            .filter(|(_, &x)| x > 0)
            .map(|(v, &x)| v.marginal(x))
            .fold(f64::INFINITY, f64::min);
        for _ in 0..rng.gen_range(1..=2) {
            vals.push(Valuation::unit_demand(k, floor * rng.gen_range(0.05..0.95)).unwrap());
        }
        let mut alloc = opt.allocation.clone();
        alloc.resize(vals.len(), 0);
        let profile = marginal_bidding_profile(&vals, &alloc).map_err(|e| e.to_string())?;
        let game = GameInstance::new(
            vals,
            Auction::new(k, Pricing::Uniform, TieBreakRule::Lexicographic),
        )
        .map_err(|e| e.to_string())?;
        if !is_pure_nash(&profile, &game, &grid)
            .map_err(|e| e.to_string())?
            .is_equilibrium()
        {
            continue;
        }
        let conv = pne_standard_to_uniform(&profile, &game, &grid)
            .map_err(|e| format!("case {case}: {e}"))?;
        ensure(conv.allocation == alloc, || {
            format!("case {case}: allocation changed")
        })?;
        let before = poa_lab_core::allocate(&profile, &game.auction.tie_break);
        ensure(conv.price == before.uniform_price, || {
            format!("case {case}: price changed")
        })?;
        let w = poa_lab_core::social_welfare(&game.valuations, &before.units)
            .map_err(|e| e.to_string())?;
        ensure(conv.welfare == w, || {
            format!("case {case}: welfare changed")
        })?;
        converted += 1;
    }
    ensure(converted >= 100, || {
        format!("only {converted} uniform equilibria converted")
    })?;
    Ok(converted)
}

/// Best welfare over every way of handing out at most `k` units.
fn brute_force_optimum(vals: &[Valuation], k: usize) -> f64 {
    fn rec(vals: &[Valuation], left: usize) -> f64 {
        match vals.split_first() {
            None => 0.0,
            Some((v, rest)) => (0..=left)
                .map(|x| v.value(x) + rec(rest, left - x))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }
    rec(vals, k)
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let classes = [
        ValuationClass::Submodular,
        ValuationClass::Subadditive,
        ValuationClass::General,
    ];
    let cases = 600;
    for case in 0..cases {
        let n = rng.gen_range(1..=4);
        let k = rng.gen_range(1..=6);
        let class = classes[case % classes.len()];
        let vals: Vec<Valuation> = (0..n)
            .map(|_| sample_valuation(class, k, 1.0, &mut rng).unwrap())
            .collect();
        let dp = optimal_allocation(&vals, k)
            .map_err(|e| e.to_string())?
            .value;
        let brute = brute_force_optimum(&vals, k);
        ensure((dp - brute).abs() <= WELFARE_TOL * brute.max(1.0), || {
            format!("case {case}: dp {dp} vs {brute}")
        })?;
    }

    let sweep = SweepParams {
        cases: 100,
        max_n: 4,
        max_k: 5,
        scale: 1.0,
    };
    let alphas = [0.5, 0.87, 1.0, 2.0];
    let mut worst = 0.0f64;
    let mc_cases = 100;
    for c in 0..mc_cases {
        let pricing = if c % 2 == 0 {
            Pricing::Discriminatory
        } else {
            Pricing::Uniform
        };
        let s = harness::case_seed(SEED, c);
        let case = random_case(
            s,
            ValuationClass::Submodular,
            pricing,
            Interface::Standard,
            &sweep,
        )
        .map_err(|e| e.to_string())?;
        let inst = &case.instance;
        let i = c % inst.n();
        let x = 1 + (s as usize) % inst.k();
        let alpha = alphas[c % alphas.len()];
        let val = &inst.valuations[i];
        let opp = OpposingBids::of_profile(&case.profile, i);
        let exact = expected_deviation_utility_exact(val, x, &opp, alpha, pricing)
            .map_err(|e| e.to_string())?;
        let mc = expected_deviation_utility_monte_carlo(
            i,
            val,
            x,
            &case.profile,
            alpha,
            &inst.auction,
            MC_SAMPLES,
            s,
        )
        .map_err(|e| e.to_string())?;
        let dev = (mc.mean - exact).abs();
        if mc.std_error > 0.0 {
            worst = worst.max(dev / mc.std_error);
        }
        ensure(dev <= MC_SIGMAS * mc.std_error + MC_SUM_TOL, || {
            format!(
                "case {c}: exact {exact}, sampled {} +/- {}",
                mc.mean, mc.std_error
            )
        })?;
    }
    Ok(format!(
        "{cases} optimum cases, {mc_cases} sampled cases, worst z {worst:.2}"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("bound constants", Duration::from_secs(1), bound_constants),
        (
            "uniform-price subadditive lower bound",
            Duration::from_secs(10),
            subadditive_lower_bound,
        ),
        (
            "Bayesian inefficiency example",
            Duration::from_secs(5),
            bayesian_example,
        ),
        (
            "deviation inequality sweep",
            Duration::from_secs(120),
            key_lemma_sweep,
        ),
        (
            "smoothness certificates",
            Duration::from_secs(120),
            smoothness_certificates,
        ),
        (
            "template frontiers",
            Duration::from_secs(30),
            template_frontiers,
        ),
        (
            "pure equilibrium efficiency",
            Duration::from_secs(300),
            pne_efficiency,
        ),
        (
            "tie-break constructions",
            Duration::from_secs(120),
            equal_bid_constructions,
        ),
        (
            "oracle equivalence",
            Duration::from_secs(120),
            oracle_equivalence,
        ),
    ];
    let mut failed = 0;
    for (idx, (name, limit, f)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(note) if elapsed > limit => {
                Err(format!("{note}; took {elapsed:.2?}, limit {limit:?}"))
            }
            other => other,
        };
        match outcome {
            Ok(note) => println!(
                "PASS {} {name}: {note} ({elapsed:.2?} of {limit:?})",
                idx + 1
            ),
            Err(why) => {
                failed += 1;
                println!(
                    "FAIL {} {name}: {why} ({elapsed:.2?} of {limit:?})",
                    idx + 1
                );
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
