use serde_json::json;

use super::{CliError, Command, FigureId, RunContext, SimArgs};
use crate::analytic::{
    self, concurrence_per_pc, cross_correlation, multiplexed_probability, retrieval_efficiency,
    single_mode_herald_probability, suppression, threshold_g, visibility, CorrelationPair, Form,
    Threshold, REPORTED_THRESHOLD,
};
use crate::fit::{fit_through_origin, theta_grid};
use crate::fock::detection::pattern_index;
use crate::fock::pipeline::{EngineOptions, SwapEngine};
use crate::output::{Artifact, CurveSeries, Metadata, Tolerance};
use crate::params::ExperimentParams;
use crate::sim::{
    apply_cutoff_policy, cutoff_tradeoff, simulate, sweep, CutoffPolicy, Estimate, HeraldSampling,
    SweepAxis, SweepConfig, SwapStatistics,
};

/// Files to write and lines to print.
#[derive(Debug, Clone)]
pub struct Generated {
    pub artifacts: Vec<Artifact>,
    pub lines: Vec<String>,
}

/// Storage-time grid for the single-interface curves.
const CURVE_T_MAX_US: f64 = 400.0;
const CURVE_POINTS: usize = 101;
/// Second-retrieval grid for the swap curves.
const SWAP_T2_SPAN_US: f64 = 80.0;
const SWAP_T2_STEP_US: f64 = 0.5;
/// Second-retrieval times with Monte Carlo points.
const SWAP_MC_T2_US: [f64; 6] = [2.0, 17.0, 32.0, 47.0, 62.0, 77.0];
const FIG_THETAS: usize = 8;
const FIG4_MODES: [u32; 3] = [1, 2, 3];

fn curve_times() -> Vec<f64> {
    (0..CURVE_POINTS)
        .map(|i| CURVE_T_MAX_US * i as f64 / (CURVE_POINTS - 1) as f64)
        .collect()
}

fn swap_t2_grid(p: &ExperimentParams) -> Vec<f64> {
    let dt = p.delta_t_us();
    let n = (SWAP_T2_SPAN_US / SWAP_T2_STEP_US).round() as usize;
    (0..=n).map(|i| dt + SWAP_T2_STEP_US * i as f64).collect()
}

fn at_t2(p: &ExperimentParams, t2: f64) -> ExperimentParams {
    let mut q = p.clone();
    q.t1_us = t2 - p.delta_t_us();
    q.t2_us = t2;
    q
}

fn estimate_row(x: f64, e: &Option<Estimate>) -> Option<[f64; 3]> {
    e.map(|e| [x, e.value, e.sigma])
}

fn meta(cmd: &Command, ctx: &RunContext, tol: Tolerance) -> Metadata {
    Metadata::new(cmd.to_args(), &ctx.params, tol)
}

fn mc_meta(cmd: &Command, ctx: &RunContext) -> Metadata {
    meta(cmd, ctx, Tolerance::FourSigma).with_run(ctx.seed, ctx.trials)
}

fn fmt_est(e: &Option<Estimate>) -> String {
    match e {
        Some(e) => format!("{:.5} ± {:.5}", e.value, e.sigma),
        None => "n/a".into(),
    }
}

pub fn generate(cmd: &Command, ctx: &RunContext) -> Result<Generated, CliError> {
    match cmd {
        Command::Analytic => analytic_report(cmd, ctx),
        Command::Figures { id } => figure(cmd, *id, ctx),
        Command::Threshold { g_b } => threshold_report(cmd, ctx, *g_b),
        Command::Simulate(args) => simulate_report(cmd, ctx, args),
        Command::Sweep {
            axis,
            values,
            cutoff,
            sim,
        } => sweep_report(cmd, ctx, (*axis).into(), values, *cutoff, sim),
        Command::Validate { .. } => Err(CliError::Usage("validate has no outputs".into())),
    }
}

fn analytic_report(cmd: &Command, ctx: &RunContext) -> Result<Generated, CliError> {
    let p = &ctx.params;
    let corr = CorrelationPair::from_params(p)?;
    let v_approx = visibility(corr, Form::Approx);
    let v_exact = visibility(corr, Form::Exact);
    let h = suppression(corr);
    let c_pc = concurrence_per_pc(corr);
    let p1 = single_mode_herald_probability(p);
    let eg = multiplexed_probability(p1, p.m_modes)?;
    let gamma1 = retrieval_efficiency(p.t1_us, p)?;
    let gamma2 = retrieval_efficiency(p.t2_us, p)?;
    let values = [
        ("gamma_t1", gamma1),
        ("gamma_t2", gamma2),
        ("g_b", corr.g_b),
        ("g_ac", corr.g_ac),
        ("v_approx", v_approx.value),
        ("v_exact", v_exact.value),
        ("h", h),
        ("c_per_pc", c_pc),
        ("p_stokes", analytic::prob_stokes(p)),
        ("p_herald_single_mode", p1),
        ("p_eg_exact", eg.exact),
        ("p_eg_linearized", eg.linearized),
    ];
    let x = p.t2_us;
    let series = values
        .iter()
        .map(|(n, v)| CurveSeries::exact(n, "t2_us", n, [(x, *v)]))
        .collect::<Result<Vec<_>, _>>()?;
    let lines = values.iter().map(|(n, v)| format!("{n:<22} {v:.6}")).collect();
    Ok(Generated {
        artifacts: vec![Artifact {
            stem: "analytic".into(),
            metadata: meta(cmd, ctx, Tolerance::Exact),
            series,
            result: Some(json!(values.iter().map(|(n, v)| (n.to_string(), *v)).collect::<std::collections::BTreeMap<_, _>>())),
        }],
        lines,
    })
}

fn threshold_report(cmd: &Command, ctx: &RunContext, g_b: Option<f64>) -> Result<Generated, CliError> {
    let mode = match g_b {
        Some(g) if g > 1.0 => Threshold::FixedGb(g),
        Some(g) => return Err(CliError::Usage(format!("--g-b {g} must exceed 1"))),
        None => Threshold::Symmetric,
    };
    let pair = |g: f64| match mode {
        Threshold::Symmetric => CorrelationPair { g_b: g, g_ac: g },
        Threshold::FixedGb(gb) => CorrelationPair { g_b: gb, g_ac: g },
    };
    let mut lines = Vec::new();
    let mut series = Vec::new();
    let mut result = serde_json::Map::new();
    let x = g_b.unwrap_or(0.0);
    let label = match mode {
        Threshold::Symmetric => "g_b = g_ac = g".to_string(),
        Threshold::FixedGb(gb) => format!("g_b = {gb}, solving for g_ac"),
    };
    lines.push(format!("threshold ({label})"));
    for (name, form) in [("approx", Form::Approx), ("exact", Form::Exact)] {
        let g = threshold_g(mode, form)?;
        let residual = match form {
            Form::Approx => concurrence_per_pc(pair(g)),
            Form::Exact => visibility(pair(g), Form::Exact).value - suppression(pair(g)).sqrt(),
        };
        let rel = (g - REPORTED_THRESHOLD) / REPORTED_THRESHOLD;
        lines.push(format!(
            "  {name:<6} g* = {g:.6}   reported {REPORTED_THRESHOLD}   relative difference {:+.2}%   C(g*)/p_c = {residual:.1e}",
            100.0 * rel
        ));
        series.push(CurveSeries::exact(&format!("g_star_{name}"), "g_b_fixed", "g_star", [(x, g)])?);
        series.push(CurveSeries::exact(&format!("residual_{name}"), "g_b_fixed", "c_per_pc", [(x, residual)])?);
        result.insert(
            name.into(),
            json!({"g_star": g, "relative_to_reported": rel, "residual": residual}),
        );
    }
    result.insert("reported".into(), json!(REPORTED_THRESHOLD));
    Ok(Generated {
        artifacts: vec![Artifact {
            stem: "threshold".into(),
            metadata: meta(cmd, ctx, Tolerance::Exact),
            series,
            result: Some(serde_json::Value::Object(result)),
        }],
        lines,
    })
}

fn figure(cmd: &Command, id: FigureId, ctx: &RunContext) -> Result<Generated, CliError> {
    let (series, result, tol) = match id {
        FigureId::Fig1s => (fig1s(&ctx.params)?, None, Tolerance::Exact),
        FigureId::Fig2s => (fig2s(&ctx.params)?, None, Tolerance::Exact),
        FigureId::Fig2 => (fig2(ctx)?, None, Tolerance::FourSigma),
        FigureId::Fig3 => (fig3(ctx)?, None, Tolerance::FourSigma),
        FigureId::Fig4 => {
            let (s, r) = fig4(ctx)?;
            (s, Some(r), Tolerance::FourSigma)
        }
    };
    let metadata = match tol {
        Tolerance::Exact => meta(cmd, ctx, tol),
        Tolerance::FourSigma => mc_meta(cmd, ctx),
    };
    let lines = series
        .iter()
        .map(|s| format!("{}: {} points", s.name, s.rows.len()))
        .collect();
    Ok(Generated {
        artifacts: vec![Artifact {
            stem: id.name().into(),
            metadata,
            series,
            result,
        }],
        lines,
    })
}

fn fig1s(p: &ExperimentParams) -> Result<Vec<CurveSeries>, CliError> {
    let pts = curve_times()
        .into_iter()
        .map(|t| Ok((t, retrieval_efficiency(t, p)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(vec![CurveSeries::exact("gamma", "t_us", "gamma", pts)?])
}

fn fig2s(p: &ExperimentParams) -> Result<Vec<CurveSeries>, CliError> {
    let family = |z: f64| {
        curve_times()
            .into_iter()
            .map(|t| Ok((t, cross_correlation(t, z, p)?)))
            .collect::<Result<Vec<_>, CliError>>()
    };
    Ok(vec![
        CurveSeries::exact("g_b", "t_us", "g", family(p.z_b)?)?,
        CurveSeries::exact("g_ac", "t_us", "g", family(p.z_ac)?)?,
    ])
}

fn swap_cfg(ctx: &RunContext) -> SweepConfig {
    SweepConfig {
        opts: EngineOptions::default(),
        thetas: theta_grid(FIG_THETAS),
        sampling: HeraldSampling::Conditioned,
        n_trials: ctx.trials,
        seed: ctx.seed,
    }
}

fn mc_swap_points(ctx: &RunContext) -> Result<Vec<crate::sim::SweepPoint>, CliError> {
    let dt = ctx.params.delta_t_us();
    let values: Vec<f64> = SWAP_MC_T2_US.iter().map(|t| t - 2.0 + dt).collect();
    Ok(sweep(&ctx.params, SweepAxis::T2, &values, &swap_cfg(ctx))?)
}

fn fig2(ctx: &RunContext) -> Result<Vec<CurveSeries>, CliError> {
    let p = &ctx.params;
    let (mut va, mut ve, mut h) = (Vec::new(), Vec::new(), Vec::new());
    for t2 in swap_t2_grid(p) {
        let corr = CorrelationPair::from_params(&at_t2(p, t2))?;
        va.push((t2, visibility(corr, Form::Approx).value));
        ve.push((t2, visibility(corr, Form::Exact).value));
        h.push((t2, suppression(corr)));
    }
    let pts = mc_swap_points(ctx)?;
    let v_mc = pts.iter().filter_map(|pt| estimate_row(pt.x, &pt.stats.v)).collect();
    let h_mc = pts.iter().filter_map(|pt| estimate_row(pt.x, &pt.stats.h)).collect();
    Ok(vec![
        CurveSeries::exact("v_approx", "t2_us", "v", va)?,
        CurveSeries::exact("v_exact", "t2_us", "v", ve)?,
        CurveSeries::exact("h", "t2_us", "h", h)?,
        CurveSeries::new("v_mc", "t2_us", "v", v_mc)?,
        CurveSeries::new("h_mc", "t2_us", "h", h_mc)?,
    ])
}

fn fig3(ctx: &RunContext) -> Result<Vec<CurveSeries>, CliError> {
    let p = &ctx.params;
    let thetas = theta_grid(FIG_THETAS);
    let (mut cpc, mut mean_g, mut c_engine) = (Vec::new(), Vec::new(), Vec::new());
    for t2 in swap_t2_grid(p) {
        let q = at_t2(p, t2);
        let corr = CorrelationPair::from_params(&q)?;
        cpc.push((t2, concurrence_per_pc(corr)));
        mean_g.push((t2, corr.mean()));
        let d = SwapEngine::new(&q, EngineOptions::default())?.detected_summary(&thetas)?;
        c_engine.push((t2, d.concurrence));
    }
    let pts = mc_swap_points(ctx)?;
    let c_mc = pts
        .iter()
        .filter_map(|pt| estimate_row(pt.x, &pt.stats.concurrence_signed))
        .collect();
    Ok(vec![
        CurveSeries::exact("c_per_pc", "t2_us", "c_per_pc", cpc)?,
        CurveSeries::exact("mean_g", "t2_us", "g", mean_g)?,
        CurveSeries::exact("c_engine", "t2_us", "c", c_engine)?,
        CurveSeries::new("c_mc", "t2_us", "c", c_mc)?,
    ])
}

fn fig4(ctx: &RunContext) -> Result<(Vec<CurveSeries>, serde_json::Value), CliError> {
    let cfg = SweepConfig {
        opts: EngineOptions::default(),
        thetas: vec![0.0],
        sampling: HeraldSampling::Full,
        n_trials: ctx.trials,
        seed: ctx.seed,
    };
    let xs: Vec<f64> = FIG4_MODES.iter().map(|&m| m as f64).collect();
    let mut base = ctx.params.clone();
    base.m_modes = 1;
    let pts = sweep(&base, SweepAxis::M, &xs, &cfg)?;
    let engine = SwapEngine::new(&base, cfg.opts)?;
    let ev = engine.ev_pattern(0.0)?;
    let ev1 = ev[pattern_index(true, false)] + ev[pattern_index(true, true)];
    let p1 = single_mode_herald_probability(&base);
    let n = ctx.trials as f64;

    let (mut ff, mut ff_exp, mut eg, mut eg_exact, mut eg_lin) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (pt, &m) in pts.iter().zip(&FIG4_MODES) {
        let x = m as f64;
        let k = pt.stats.fourfold_total() as f64;
        ff.push([x, k, k.sqrt()]);
        let ready = multiplexed_probability(p1 * p1, m)?.exact;
        ff_exp.push((x, n * ready * engine.p_es1() * ev1));
        if let Some(r) = estimate_row(x, &pt.stats.eg_ab1) {
            eg.push(r);
        }
        let mp = multiplexed_probability(p1, m)?;
        eg_exact.push((x, mp.exact));
        eg_lin.push((x, mp.linearized));
    }
    let ys: Vec<f64> = ff.iter().map(|r| r[1]).collect();
    let (slope, r2) = fit_through_origin(&xs, &ys);
    let ratio = match (&pts[0].stats.eg_ab1, &pts[2].stats.eg_ab1) {
        (Some(a), Some(b)) if a.value > 0.0 => {
            let r = b.value / a.value;
            let s = r * ((b.sigma / b.value).powi(2) + (a.sigma / a.value).powi(2)).sqrt();
            json!({"value": r, "sigma": s})
        }
        _ => serde_json::Value::Null,
    };
    let result = json!({
        "fourfold_fit": {"slope": slope, "r_squared": r2},
        "eg_ratio_m3_to_m1": ratio,
    });
    Ok((
        vec![
            CurveSeries::new("fourfold_mc", "m_modes", "counts", ff)?,
            CurveSeries::exact("fourfold_expected", "m_modes", "counts", ff_exp)?,
            CurveSeries::new("eg_rate_mc", "m_modes", "p_eg", eg)?,
            CurveSeries::exact("eg_rate_exact", "m_modes", "p_eg", eg_exact)?,
            CurveSeries::exact("eg_rate_linearized", "m_modes", "p_eg", eg_lin)?,
        ],
        result,
    ))
}

fn summary_series(stats: &SwapStatistics, x: f64, series: &mut Vec<CurveSeries>, x_name: &str) -> Result<(), CliError> {
    for (name, e) in [
        ("v", &stats.v),
        ("h", &stats.h),
        ("p_c", &stats.p_c),
        ("c", &stats.concurrence),
        ("c_signed", &stats.concurrence_signed),
        ("p_es1", &stats.p_es1),
        ("eg_ab1", &stats.eg_ab1),
        ("throughput", &stats.throughput),
    ] {
        if let Some(r) = estimate_row(x, e) {
            series.push(CurveSeries::new(name, x_name, name, vec![r])?);
        }
    }
    Ok(())
}

fn simulate_report(cmd: &Command, ctx: &RunContext, args: &SimArgs) -> Result<Generated, CliError> {
    if args.thetas < 2 {
        return Err(CliError::Usage("--thetas must be at least 2 for a fringe fit".into()));
    }
    let thetas = theta_grid(args.thetas);
    let stats = simulate(&ctx.params, args.options(), &thetas, args.sampling(), ctx.trials, ctx.seed)?;
    let rows = |v: &[Option<Estimate>]| -> Vec<[f64; 3]> {
        thetas.iter().zip(v).filter_map(|(&t, e)| estimate_row(t, e)).collect()
    };
    let mut series = vec![
        CurveSeries::new("ev1_given_es", "theta", "p", rows(&stats.ev1_given_es))?,
        CurveSeries::new("ev2_given_es", "theta", "p", rows(&stats.ev2_given_es))?,
        CurveSeries::new(
            "counting_given_es",
            "pattern",
            "p",
            (0..4)
                .filter_map(|i| estimate_row(i as f64, &stats.counting_given_es[i]))
                .collect(),
        )?,
    ];
    summary_series(&stats, ctx.params.t2_us, &mut series, "t2_us")?;
    let line = stats.summary_line();
    Ok(Generated {
        artifacts: vec![Artifact {
            stem: "simulate".into(),
            metadata: mc_meta(cmd, ctx),
            series,
            result: Some(serde_json::to_value(&stats).map_err(crate::output::OutputError::from)?),
        }],
        lines: vec![line],
    })
}

fn sweep_report(
    cmd: &Command,
    ctx: &RunContext,
    axis: SweepAxis,
    values: &[f64],
    cutoff: Option<f64>,
    args: &SimArgs,
) -> Result<Generated, CliError> {
    if args.thetas < 2 && axis != SweepAxis::Theta {
        return Err(CliError::Usage("--thetas must be at least 2 for a fringe fit".into()));
    }
    let cfg = SweepConfig {
        opts: args.options(),
        thetas: theta_grid(args.thetas),
        sampling: args.sampling(),
        n_trials: ctx.trials,
        seed: ctx.seed,
    };
    let base = match cutoff {
        Some(t) if axis != SweepAxis::T2 => apply_cutoff_policy(&ctx.params, CutoffPolicy::Fixed(t))?,
        _ => ctx.params.clone(),
    };
    let pts = sweep(&base, axis, values, &cfg)?;
    let name = axis.name();
    let mut by_name: Vec<(String, Vec<[f64; 3]>)> = Vec::new();
    let mut push = |n: &str, r: Option<[f64; 3]>| {
        if let Some(r) = r {
            match by_name.iter_mut().find(|(k, _)| k == n) {
                Some((_, v)) => v.push(r),
                None => by_name.push((n.to_string(), vec![r])),
            }
        }
    };
    let mut lines = Vec::new();
    for pt in &pts {
        let s = &pt.stats;
        push("v", estimate_row(pt.x, &s.v));
        push("h", estimate_row(pt.x, &s.h));
        push("p_c", estimate_row(pt.x, &s.p_c));
        push("c", estimate_row(pt.x, &s.concurrence));
        push("c_signed", estimate_row(pt.x, &s.concurrence_signed));
        push("p_es1", estimate_row(pt.x, &s.p_es1));
        push("eg_ab1", estimate_row(pt.x, &s.eg_ab1));
        push("throughput", estimate_row(pt.x, &s.throughput));
        push("ev1_given_es", estimate_row(pt.x, &s.ev1_given_es[0]));
        let k = s.fourfold_total() as f64;
        push("fourfold", Some([pt.x, k, k.sqrt()]));
        lines.push(format!("{name} = {}: {}", pt.x, s.summary_line()));
    }
    let series = by_name
        .into_iter()
        .map(|(n, rows)| CurveSeries::new(&n, name, &n, rows))
        .collect::<Result<Vec<_>, _>>()?;
    let mut result = None;
    if let (Some(t), SweepAxis::T2) = (cutoff, axis) {
        let trade = cutoff_tradeoff(&base, values, CutoffPolicy::Fixed(t), &cfg)?;
        lines.push(format!(
            "cutoff {t} µs: accepted t2 {:?}, swap rate {:.3e}/trial, pooled C = {}",
            trade.accepted_points,
            trade.accepted_rate,
            fmt_est(&trade.pooled.concurrence)
        ));
        result = Some(json!({
            "cutoff_us": t,
            "accepted_points": trade.accepted_points,
            "accepted_rate": trade.accepted_rate,
            "pooled_concurrence": trade.pooled.concurrence,
            "pooled_visibility": trade.pooled.v,
            "pooled_suppression": trade.pooled.h,
        }));
    }
    Ok(Generated {
        artifacts: vec![Artifact {
            stem: format!("sweep_{name}"),
            metadata: mc_meta(cmd, ctx),
            series,
            result,
        }],
        lines,
    })
}
