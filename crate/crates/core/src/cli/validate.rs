use std::path::{Path, PathBuf};

use super::{generate, CliError, Command, FigureId, HeraldArg, RunContext, SamplingArg, SimArgs, EXIT_FAILURE, EXIT_OK};
use crate::analytic::{
    coincidence_probability, concurrence, concurrence_signed, visibility, CorrelationPair, ConcurrenceInputs,
    Form,
};
use crate::fit::theta_grid;
use crate::fock::detection::pattern_index;
use crate::fock::pipeline::{hom_coincidence, EngineOptions, SwapEngine, CLOSED_FORM_COINCIDENCE_SCALE};
use crate::output::{compare_rows, parse_csv, Format};
use crate::params::{paper_defaults, ExperimentParams};
use crate::sim::{simulate, Estimate, HeraldSampling};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    fn error(name: impl Into<String>, e: impl std::fmt::Display) -> Self {
        Self::new(name, false, format!("error: {e}"))
    }
}

const MC_THETAS: usize = 8;
const GOLDEN_TRIALS: u64 = 20_000;
const GOLDEN_SEED: u64 = 42;

pub fn default_golden_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/golden"))
}

fn golden_commands() -> Vec<Command> {
    vec![
        Command::Analytic,
        Command::Threshold { g_b: None },
        Command::Figures { id: FigureId::Fig1s },
        Command::Figures { id: FigureId::Fig2s },
        Command::Simulate(SimArgs {
            thetas: MC_THETAS,
            sampling: SamplingArg::Conditioned,
            herald: HeraldArg::BellPairs,
            n_max: 2,
        }),
    ]
}

/// Writes the reference outputs at the default operating point.
pub fn bless(dir: &Path) -> Result<(), CliError> {
    let ctx = RunContext {
        params: paper_defaults(),
        seed: GOLDEN_SEED,
        trials: GOLDEN_TRIALS,
    };
    for cmd in golden_commands() {
        for a in generate(&cmd, &ctx)?.artifacts {
            for p in a.write(dir, Format::Csv)? {
                eprintln!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn with_engine<F>(name: &str, p: &ExperimentParams, f: F) -> CheckResult
where
    F: FnOnce(&SwapEngine) -> Result<CheckResult, CliError>,
{
    match SwapEngine::new(p, EngineOptions::default()).map_err(CliError::from).and_then(|e| f(&e)) {
        Ok(r) => r,
        Err(e) => CheckResult::error(name, e),
    }
}

fn check_visibility(p: &ExperimentParams) -> CheckResult {
    let name = "engine fringe visibility vs closed form";
    with_engine(name, p, |e| {
        let d = e.detected_summary(&theta_grid(16))?;
        let v = visibility(CorrelationPair::from_params(p)?, Form::Exact).value;
        let rel = (d.visibility - v).abs() / v;
        let tol = 5.0 * p.chi;
        Ok(CheckResult::new(
            name,
            rel <= tol,
            format!("engine {:.5}, closed form {v:.5}, relative {rel:.3e} (tol {tol:.3e})", d.visibility),
        ))
    })
}

fn check_coincidence(p: &ExperimentParams) -> CheckResult {
    let name = "engine coincidence P(theta) vs closed form";
    with_engine(name, p, |e| {
        let tol = 5.0 * p.chi;
        let mut worst: (f64, f64) = (0.0, 0.0);
        for t in theta_grid(16) {
            let eng = CLOSED_FORM_COINCIDENCE_SCALE * e.p_coinc(t)?;
            let cf = coincidence_probability(t, p)?;
            let rel = (eng - cf).abs() / cf;
            if rel > worst.0 {
                worst = (rel, t);
            }
        }
        Ok(CheckResult::new(
            name,
            worst.0 <= tol,
            format!("worst relative {:.3e} at theta {:.4} (tol {tol:.3e})", worst.0, worst.1),
        ))
    })
}

fn check_hom() -> CheckResult {
    let name = "two-photon interference at the swap splitter";
    match hom_coincidence(&EngineOptions::default()) {
        Ok(w) => CheckResult::new(name, w.abs() <= 1e-12, format!("coincidence weight {w:.2e}")),
        Err(e) => CheckResult::error(name, e),
    }
}

fn check_concurrence(p: &ExperimentParams) -> CheckResult {
    let name = "Wootters vs click-statistics concurrence";
    with_engine(name, p, |e| {
        let r = e.report(0.0)?;
        let m = r.memory.p_ij;
        let bound = m.p11.abs() + (1.0 - m.total()).abs();
        let gap = (r.concurrence_wootters - r.concurrence_eq2).abs();
        Ok(CheckResult::new(
            name,
            gap <= bound,
            format!(
                "Wootters {:.5}, estimator {:.5}, gap {gap:.3e} (bound {bound:.3e})",
                r.concurrence_wootters, r.concurrence_eq2
            ),
        ))
    })
}

fn ideal_params() -> ExperimentParams {
    let mut p = paper_defaults();
    p.chi = 0.0;
    p.z_b = 0.0;
    p.z_ac = 0.0;
    p.xi_se = 0.0;
    p.gamma0 = 1.0;
    p.tau0_us = 1e300;
    p.eta = 1.0;
    p
}

fn check_ideal_limit() -> CheckResult {
    let name = "ideal limit: concurrence equals p_c";
    with_engine(name, &ideal_params(), |e| {
        let r = e.report(0.0)?;
        let pc = r.memory.p_ij.p_c();
        let d = (r.concurrence_eq2 - pc).abs();
        Ok(CheckResult::new(
            name,
            d <= 1e-12,
            format!("C {:.12}, p_c {pc:.12}, Wootters {:.6}", r.concurrence_eq2, r.concurrence_wootters),
        ))
    })
}

fn check_clamp() -> CheckResult {
    let name = "poor correlations (g = 10) clamp C to 0";
    let run = || -> Result<CheckResult, CliError> {
        let corr = CorrelationPair::symmetric(10.0)?;
        let h = crate::analytic::suppression(corr);
        let v = visibility(corr, Form::Approx).value;
        let inputs = ConcurrenceInputs {
            p00: 0.9,
            p01: 0.05,
            p10: 0.05,
            p11: h * 0.05 * 0.05,
            v,
            p_c: 0.1,
            h,
        };
        inputs.check()?;
        let c = concurrence(&inputs, Form::Approx);
        let raw = concurrence_signed(&inputs, Form::Approx);
        Ok(CheckResult::new(
            name,
            h > 1.0 && c == 0.0 && raw < 0.0,
            format!("h {h:.3}, unclamped {raw:.4}, reported {c}"),
        ))
    };
    run().unwrap_or_else(|e| CheckResult::error(name, e))
}

fn z_ok(e: &Option<Estimate>, expected: f64, worst: &mut f64, n: &mut usize) -> bool {
    match e {
        Some(e) if e.sigma > 0.0 => {
            let z = e.z_score(expected).abs();
            *worst = worst.max(z);
            *n += 1;
            z <= 4.0
        }
        Some(e) => e.value == expected || expected.abs() < 1e-9,
        None => true,
    }
}

fn check_mc(ctx: &RunContext) -> CheckResult {
    let name = "Monte Carlo conditional clicks vs engine (4 sigma)";
    let run = || -> Result<CheckResult, CliError> {
        let p = &ctx.params;
        let thetas = theta_grid(MC_THETAS);
        let opts = EngineOptions::default();
        let engine = SwapEngine::new(p, opts)?;
        let stats = simulate(p, opts, &thetas, HeraldSampling::Conditioned, ctx.trials, ctx.seed)?;
        let (mut worst, mut n, mut ok) = (0.0f64, 0usize, true);
        ok &= z_ok(&stats.p_es1, engine.p_es1(), &mut worst, &mut n);
        for (k, &t) in thetas.iter().enumerate() {
            let ev = engine.ev_pattern(t)?;
            let e1 = ev[pattern_index(true, false)] + ev[pattern_index(true, true)];
            let e2 = ev[pattern_index(false, true)] + ev[pattern_index(true, true)];
            ok &= z_ok(&stats.ev1_given_es[k], e1, &mut worst, &mut n);
            ok &= z_ok(&stats.ev2_given_es[k], e2, &mut worst, &mut n);
        }
        let counting = engine.counting_pattern()?;
        for (i, &c) in counting.iter().enumerate() {
            ok &= z_ok(&stats.counting_given_es[i], c, &mut worst, &mut n);
        }
        Ok(CheckResult::new(
            name,
            ok,
            format!("{n} probabilities, worst |z| {worst:.2} at {} trials per setting", ctx.trials),
        ))
    };
    run().unwrap_or_else(|e| CheckResult::error(name, e))
}

fn check_multiplexing(ctx: &RunContext) -> CheckResult {
    let name = "multiplexed link success, 3 modes vs 1 (3 sigma)";
    let run = || -> Result<CheckResult, CliError> {
        let rate = |m: u32| -> Result<Option<Estimate>, CliError> {
            let mut p = ctx.params.clone();
            p.m_modes = m;
            let s = simulate(&p, EngineOptions::default(), &[0.0, std::f64::consts::PI], HeraldSampling::Full, ctx.trials, ctx.seed)?;
            Ok(s.eg_ab1)
        };
        let (one, three) = (rate(1)?, rate(3)?);
        let (Some(a), Some(b)) = (one, three) else {
            return Ok(CheckResult::new(name, false, "no heralded links"));
        };
        if a.value == 0.0 {
            return Ok(CheckResult::new(name, false, "no single-mode successes"));
        }
        let r = b.value / a.value;
        let sigma = r * ((a.sigma / a.value).powi(2) + (b.sigma / b.value).powi(2)).sqrt();
        Ok(CheckResult::new(
            name,
            (r - 3.0).abs() <= 3.0 * sigma,
            format!("ratio {r:.4} ± {sigma:.4}"),
        ))
    };
    run().unwrap_or_else(|e| CheckResult::error(name, e))
}

fn check_worker_independence(ctx: &RunContext) -> CheckResult {
    let name = "outputs independent of worker count";
    let run = || -> Result<CheckResult, CliError> {
        let small = RunContext {
            trials: ctx.trials.min(GOLDEN_TRIALS),
            ..ctx.clone()
        };
        let cmd = golden_commands().pop().expect("simulate command");
        let csv_with = |n: usize| -> Result<String, CliError> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Pool(e.to_string()))?;
            pool.install(|| generate(&cmd, &small))?.artifacts[0].to_csv().map_err(Into::into)
        };
        let (a, b) = (csv_with(1)?, csv_with(3)?);
        Ok(CheckResult::new(name, a == b, "1 vs 3 workers"))
    };
    run().unwrap_or_else(|e| CheckResult::error(name, e))
}

fn check_golden_file(path: &Path) -> CheckResult {
    let name = format!("stored output {}", path.display());
    let run = || -> Result<CheckResult, String> {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        let (meta, stored) = parse_csv(&text).map_err(|e| e.to_string())?;
        let cmd = Command::from_args(&meta.command).map_err(|e| e.to_string())?;
        let ctx = RunContext {
            params: meta.to_params().map_err(|e| e.to_string())?,
            seed: meta.seed.unwrap_or(GOLDEN_SEED),
            trials: meta.trials.unwrap_or(GOLDEN_TRIALS),
        };
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let fresh = generate(&cmd, &ctx).map_err(|e| e.to_string())?;
        let artifact = fresh
            .artifacts
            .iter()
            .find(|a| a.stem == stem)
            .ok_or_else(|| format!("command {:?} does not produce `{stem}`", meta.command))?;
        let (_, rows) = parse_csv(&artifact.to_csv().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        Ok(match compare_rows(&stored, &rows, meta.tolerance) {
            None => CheckResult::new(name.clone(), true, format!("{} rows, {:?}", rows.len(), meta.tolerance)),
            Some(diff) => CheckResult::new(name.clone(), false, diff),
        })
    };
    run().unwrap_or_else(|e| CheckResult::new(name.clone(), false, e))
}

fn check_golden(dir: &Path) -> Vec<CheckResult> {
    let entries = match std::fs::read_dir(dir) {
        Ok(rd) => rd,
        Err(e) => return vec![CheckResult::new(format!("stored outputs in {}", dir.display()), false, e.to_string())],
    };
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return vec![CheckResult::new(format!("stored outputs in {}", dir.display()), false, "no csv files")];
    }
    files.iter().map(|f| check_golden_file(f)).collect()
}

/// Every cross-layer check at the context's operating point, then the
/// stored-output regression.
pub fn run_suite(ctx: &RunContext, golden: &Path) -> Vec<CheckResult> {
    let p = &ctx.params;
    let mut out = vec![
        check_hom(),
        check_visibility(p),
        check_coincidence(p),
        check_concurrence(p),
        check_ideal_limit(),
        check_clamp(),
        check_mc(ctx),
        check_multiplexing(ctx),
        check_worker_independence(ctx),
    ];
    out.extend(check_golden(golden));
    out
}

/// Prints the pass/fail table and returns the exit code.
pub fn report(results: &[CheckResult]) -> i32 {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in results {
        println!(
            "{}  {:<width$}  {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    println!("{} checks, {failed} failed", results.len());
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}
