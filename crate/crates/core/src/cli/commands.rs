//! One function per subcommand. Each evaluates a single parameter point and
//! returns its CSV rows, a JSON result block and the invariant checks.

use num_complex::Complex64 as c64;
use serde_json::{json, Value};

use super::config::*;
use super::output::{Checks, Table};
use crate::dynamics::{
    evolve_with, fit_escape_rate, steady_p1_analytic, EvolveOptions, FitWindow, LindbladGenerator, Method, TimeGrid,
};
use crate::error::{Error, Result};
use crate::fock::{g2_instantaneous, DensityMatrix, Truncation};
use crate::model::{build_h_target, tune_drives, BlockadeSpec};
use crate::protocol::{self, BlockDuration, NoiseModel, ProtocolConfig};
use crate::semiclassical::{alpha_ha_perturbative, find_fixed_points, stability_eigenvalues_analytic};
use crate::spectral::{self, GapMethod};

pub const SERIES_HEADER: [&str; 7] = ["t", "n_mean", "g2", "p0", "p1", "p2", "leak_top3"];
/// Trace drift above this marks a run as failed.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;
/// Trace distance accepted between the sampled and analytic noise channels.
pub const CHANNEL_TOLERANCE: f64 = 0.01;

pub struct PointOutput {
    pub table: Table,
    pub results: Value,
    pub checks: Checks,
}

fn cjson(z: c64) -> Value {
    json!([z.re, z.im])
}

fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// Apply one sweep value to a copy of the config.
pub fn apply_sweep(cfg: &RunConfig, param: &str, value: f64) -> RunConfig {
    let mut c = cfg.clone();
    if let Some(m) = c.model.as_mut() {
        match param {
            "U" => m.u = value,
            "kappa" => m.kappa = value,
            "Lambda3Tilde" => m.lambda3_tilde = ComplexValue::Real(value),
            "r" => m.r = value,
            "deltaLambda1" => m.delta_lambda1 = ComplexValue::Real(value),
            "dim" => m.dim = Some(value as usize),
            _ => {}
        }
    }
    if param == "sigma" {
        if let Some(n) = c.noise.as_mut() {
            n.sigma = value;
        }
    }
    c
}

fn model(cfg: &RunConfig) -> Result<&ModelSection> {
    cfg.model.as_ref().ok_or_else(|| Error::Config { line: None, message: "missing [model] section".into() })
}

fn spec_of(m: &ModelSection) -> Result<BlockadeSpec> {
    let finite = [m.u, m.kappa, m.r].iter().all(|v| v.is_finite());
    if !finite || !(m.u >= 0.0) || !(m.kappa >= 0.0) {
        return Err(Error::InvalidParameter("U and kappa must be finite and >= 0".into()));
    }
    let mut s = BlockadeSpec::new(m.lambda3_tilde.value(), m.r, m.u, m.kappa);
    s.delta_lambda1 = m.delta_lambda1.value();
    Ok(s)
}

fn truncation(m: &ModelSection) -> Result<Truncation> {
    Truncation::new(m.dim.ok_or_else(|| Error::Config { line: None, message: "[model] needs `dim`".into() })?)
}

fn generator(m: &ModelSection) -> Result<(BlockadeSpec, Truncation, LindbladGenerator)> {
    let s = spec_of(m)?;
    let t = truncation(m)?;
    let gen = LindbladGenerator::single_mode(&build_h_target(&s, t), s.kappa)?;
    Ok((s, t, gen))
}

fn evolve_options(ts: &TimeSection) -> EvolveOptions {
    let mut o = EvolveOptions {
        method: match ts.method {
            IntegratorName::Dp5 => Method::DormandPrince,
            IntegratorName::Pade => Method::Pade { max_step: ts.max_step },
        },
        leakage_budget: Some(ts.leakage_budget),
        ..EvolveOptions::default()
    };
    if let Some(r) = ts.rtol {
        o.rtol = r;
    }
    if let Some(a) = ts.atol {
        o.atol = a;
    }
    o
}

fn g2_or_nan(rho: &DensityMatrix) -> f64 {
    g2_instantaneous(rho).unwrap_or(f64::NAN)
}

/// Drive tuning for each input row. Row failures become error records
/// instead of aborting the command.
pub fn tune(cfg: &RunConfig) -> PointOutput {
    let mut table = Table::new(&[
        "row",
        "U",
        "kappa",
        "Lambda3Tilde_re",
        "Lambda3Tilde_im",
        "r",
        "alpha_b_re",
        "alpha_b_im",
        "Lambda1b_re",
        "Lambda1b_im",
        "Lambda2b_re",
        "Lambda2b_im",
        "Delta_b",
        "error",
    ]);
    let mut errors = Vec::new();
    for (i, row) in cfg.rows.iter().enumerate() {
        let l3 = row.lambda3_tilde.value();
        let mut cells: Vec<String> = [i as f64, row.u, row.kappa, l3.re, l3.im, row.r]
            .iter()
            .map(|&v| super::output::fmt_f64(v))
            .collect();
        match tune_drives(l3, row.u, row.kappa, row.r) {
            Ok(d) => {
                for v in [d.alpha_b.re, d.alpha_b.im, d.lambda1_b.re, d.lambda1_b.im, d.lambda2_b.re, d.lambda2_b.im, d.delta_b] {
                    cells.push(super::output::fmt_f64(v));
                }
                cells.push(String::new());
            }
            Err(e) => {
                cells.extend(std::iter::repeat_n(String::new(), 7));
                cells.push(e.to_string());
                errors.push(json!({"row": i, "kind": e.kind(), "message": e.to_string()}));
            }
        }
        table.rows.push(cells);
    }
    PointOutput {
        table,
        results: json!({"rows": cfg.rows.len(), "errors": errors}),
        checks: Checks::default(),
    }
}

pub fn evolve(cfg: &RunConfig) -> Result<PointOutput> {
    let m = model(cfg)?;
    let ts = cfg.time.as_ref().ok_or_else(|| Error::Config { line: None, message: "missing [time]".into() })?;
    let (_, t, gen) = generator(m)?;
    let rho0 = DensityMatrix::fock(ts.initial_fock, t.dim())?;
    let grid = TimeGrid::new(0.0, ts.t_end, ts.stride)?;
    let ev = evolve_with(&gen, &rho0, &grid, &evolve_options(ts), |_, _| {})?;
    let s = &ev.series;
    let mut table = Table::new(&SERIES_HEADER);
    for i in 0..s.len() {
        table.push_floats(&[s.times[i], s.n_mean[i], s.g2[i], s.p0[i], s.p1[i], s.p2[i], s.leak_top3[i]]);
    }
    let rho = &ev.final_state;
    let results = json!({
        "final_n_mean": rho.n_mean(),
        "final_p1": rho.population(1),
        "final_g2": json_f64(g2_or_nan(rho)),
        "max_g2": json_f64(s.g2.iter().copied().filter(|g| g.is_finite()).fold(f64::NAN, f64::max)),
        "accepted_steps": ev.stats.accepted_steps,
        "rejected_steps": ev.stats.rejected_steps,
        "max_hermiticity_defect": ev.stats.max_hermiticity_defect,
    });
    let checks = Checks { trace_drift: ev.stats.max_trace_drift, leakage: ev.stats.max_leakage, converged: true };
    Ok(PointOutput { table, results, checks })
}

fn top3(rho: &DensityMatrix) -> f64 {
    let p = rho.populations();
    p[p.len().saturating_sub(3)..].iter().sum()
}

pub fn steady(cfg: &RunConfig) -> Result<PointOutput> {
    let m = model(cfg)?;
    let (s, _, gen) = generator(m)?;
    let ss = spectral::steady_state_with_residual(&gen)?;
    let rho = &ss.state;
    let p = rho.populations();
    let mut table = Table::new(&["n_mean", "g2", "p0", "p1", "p2", "residual"]);
    table.push_floats(&[rho.n_mean(), g2_or_nan(rho), p[0], p[1], p.get(2).copied().unwrap_or(0.0), ss.residual]);
    let weak = steady_p1_analytic(s.lambda3_tilde, s.kappa).ok();
    let results = json!({
        "n_mean": rho.n_mean(),
        "p1": p[1],
        "p_multi": p[2..].iter().sum::<f64>(),
        "p1_weak_drive": weak,
        "residual": ss.residual,
    });
    let checks = Checks { trace_drift: (rho.trace() - 1.0).abs(), leakage: top3(rho), converged: true };
    Ok(PointOutput { table, results, checks })
}

pub fn spectrum(cfg: &RunConfig) -> Result<PointOutput> {
    let m = model(cfg)?;
    let sec = cfg.spectrum.clone().unwrap_or(SpectrumSection { method: GapMethodName::Auto, fgr: false, fgr_dim: None });
    let method = match sec.method {
        GapMethodName::Auto => GapMethod::Auto,
        GapMethodName::Dense => GapMethod::Dense,
        GapMethodName::ShiftInvert => GapMethod::ShiftInvert,
    };
    let (s, _, gen) = generator(m)?;
    let rep = spectral::spectral_report(&gen, method)?;
    let alpha_sq = if s.u > 0.0 { alpha_ha_perturbative(&s).norm_sqr() } else { f64::NAN };
    let gamma_pert = if s.u > 0.0 { spectral::gamma_slow_perturbative(&s) } else { f64::NAN };
    let fgr = if sec.fgr {
        let t = Truncation::new(sec.fgr_dim.unwrap_or(spectral::FGR_DEFAULT_DIM))?;
        Some(spectral::fgr_escape_rate_with(&s, t)?)
    } else {
        None
    };
    let mut table = Table::new(&[
        "gap",
        "slow_re",
        "slow_im",
        "weight_center",
        "gamma_slow_perturbative",
        "alpha_ha_sq",
        "steady_n_mean",
        "steady_residual",
        "fgr_c",
        "fgr_gamma_esc",
    ]);
    let ev = rep.slow_mode.eigenvalue;
    table.push_floats(&[
        rep.gap,
        ev.re,
        ev.im,
        rep.slow_mode.weight_center,
        gamma_pert,
        alpha_sq,
        rep.steady_state.n_mean(),
        rep.steady_residual,
        fgr.as_ref().map_or(f64::NAN, |f| f.c),
        fgr.as_ref().map_or(f64::NAN, |f| f.gamma_esc),
    ]);
    let results = json!({
        "gap": rep.gap,
        "slow_eigenvalue": cjson(ev),
        "gamma_slow_perturbative": json_f64(gamma_pert),
        "alpha_ha_sq": json_f64(alpha_sq),
        "steady_n_mean": rep.steady_state.n_mean(),
        "fgr": fgr,
    });
    let checks = Checks {
        trace_drift: (rep.steady_state.trace() - 1.0).abs(),
        leakage: top3(&rep.steady_state),
        converged: rep.steady_residual < spectral::STEADY_RESIDUAL_TOL,
    };
    Ok(PointOutput { table, results, checks })
}

pub fn semiclassical(cfg: &RunConfig) -> Result<PointOutput> {
    let s = spec_of(model(cfg)?)?;
    let search = find_fixed_points(&s);
    let mut table = Table::new(&[
        "alpha_re", "alpha_im", "abs_alpha_sq", "eig1_re", "eig1_im", "eig2_re", "eig2_im", "stable", "residual",
    ]);
    for fp in &search.fixed_points {
        let [e1, e2] = fp.jacobian_eigs;
        table.push_floats(&[
            fp.alpha.re,
            fp.alpha.im,
            fp.alpha.norm_sqr(),
            e1.re,
            e1.im,
            e2.re,
            e2.im,
            if fp.stable { 1.0 } else { 0.0 },
            fp.residual,
        ]);
    }
    let (pert, eigs) = if s.u > 0.0 && s.lambda3_tilde.norm() > 0.0 {
        let (a, b) = stability_eigenvalues_analytic(&s);
        (Some(cjson(alpha_ha_perturbative(&s))), Some(json!([cjson(a), cjson(b)])))
    } else {
        (None, None)
    };
    let results = json!({
        "fixed_points": search.fixed_points.len(),
        "seed_failures": search.failures.len(),
        "alpha_ha_perturbative": pert,
        "stability_analytic": eigs,
    });
    let checks = Checks { converged: !search.fixed_points.is_empty(), ..Checks::default() };
    Ok(PointOutput { table, results, checks })
}

pub fn escape(cfg: &RunConfig) -> Result<PointOutput> {
    let m = model(cfg)?;
    let sec = cfg.escape.clone().unwrap_or(EscapeSection { method: EscapeMethod::Fit, fit_start: None, fit_end: None, plateau: None });
    let s = spec_of(m)?;
    if sec.method == EscapeMethod::Fgr {
        let t = Truncation::new(m.dim.unwrap_or(spectral::FGR_DEFAULT_DIM))?;
        let f = spectral::fgr_escape_rate_with(&s, t)?;
        let mut table = Table::new(&["gamma", "c", "grouped_levels", "dim"]);
        table.push_floats(&[f.gamma_esc, f.c, f.grouped_levels as f64, f.dim as f64]);
        return Ok(PointOutput { table, results: json!({"method": "fgr", "fgr": f}), checks: Checks::default() });
    }
    let ts = cfg.time.as_ref().ok_or_else(|| Error::Config { line: None, message: "missing [time]".into() })?;
    let (_, t, gen) = generator(m)?;
    let rho0 = DensityMatrix::fock(ts.initial_fock, t.dim())?;
    let grid = TimeGrid::new(0.0, ts.t_end, ts.stride)?;
    let ev = evolve_with(&gen, &rho0, &grid, &evolve_options(ts), |_, _| {})?;
    let window = FitWindow { start: sec.fit_start, end: sec.fit_end, plateau: sec.plateau };
    let fit = fit_escape_rate(&ev.series, &window, s.delta_lambda1_abs(), s.kappa)?;
    let mut table = Table::new(&["gamma", "c", "n_plateau", "r_squared", "fit_start", "fit_end", "points", "accepted"]);
    table.push_floats(&[
        fit.gamma,
        fit.c,
        fit.n_plateau,
        fit.r_squared,
        fit.window.0,
        fit.window.1,
        fit.points as f64,
        if fit.accepted { 1.0 } else { 0.0 },
    ]);
    let checks = Checks { trace_drift: ev.stats.max_trace_drift, leakage: ev.stats.max_leakage, converged: fit.accepted };
    Ok(PointOutput { table, results: json!({"method": "fit", "fit": fit}), checks })
}

fn noise_of(sec: Option<&NoiseSection>) -> NoiseModel {
    match sec {
        None => NoiseModel::None,
        Some(n) => match n.kind {
            NoiseKind::None => NoiseModel::None,
            NoiseKind::Additive => NoiseModel::Additive { sigma: n.sigma },
            NoiseKind::Multiplicative => NoiseModel::Multiplicative { sigma: n.sigma },
            NoiseKind::Phase => NoiseModel::Phase { sigma: n.sigma },
        },
    }
}

pub fn protocol(cfg: &RunConfig) -> Result<PointOutput> {
    let m = model(cfg)?;
    let p = cfg.protocol.as_ref().ok_or_else(|| Error::Config { line: None, message: "missing [protocol]".into() })?;
    let duration = match (p.target_p1, p.tau_block) {
        (Some(t), None) => BlockDuration::TargetP1(t),
        (None, Some(tau)) => BlockDuration::Fixed(tau),
        _ => return Err(Error::Config { line: None, message: "set exactly one of target_P1 and tau_block".into() }),
    };
    let pc = ProtocolConfig { spec: spec_of(m)?, duration, noise: noise_of(cfg.noise.as_ref()), truncation: truncation(m)? };
    let r = protocol::run_protocol(&pc)?;
    let mut table = Table::new(&[
        "n_mean", "g2_bare", "g2_bound", "g2_shifted", "p1", "p_multi", "tau_block", "t_pi", "nbar_th", "leakage",
    ]);
    table.push_floats(&[
        r.moments.n_mean,
        r.g2_bare,
        r.g2_bound,
        r.g2_shifted,
        r.p1,
        r.p_multi,
        r.tau_block,
        r.t_pi,
        r.nbar_th,
        r.leakage,
    ]);
    let checks = Checks { trace_drift: r.max_trace_drift, leakage: r.leakage, converged: true };
    Ok(PointOutput { table, results: serde_json::to_value(&r).unwrap_or(Value::Null), checks })
}

pub fn antiresonance(cfg: &RunConfig) -> Result<PointOutput> {
    let m = model(cfg)?;
    let a = cfg.antiresonance.as_ref().ok_or_else(|| Error::Config { line: None, message: "missing [antiresonance]".into() })?;
    let s = spec_of(m)?;
    let t = truncation(m)?;
    let center = a.center.unwrap_or(m.r.round());
    let grid = spectral::antiresonance_grid(center, a.min_offset, a.max_offset, a.points_per_side)?;
    let n = spectral::steady_photon_number(s.lambda3_tilde, s.u, s.kappa, &grid, t)?;
    let mut table = Table::new(&["r", "n_mean"]);
    for (r, v) in grid.iter().zip(&n) {
        table.push_floats(&[*r, *v]);
    }
    let width = spectral::dip_width(&grid, &n, center);
    let floor_weak = steady_p1_analytic(s.lambda3_tilde, s.kappa).ok();
    let (results, converged) = match width {
        Ok(w) => (json!({"width": w, "floor_weak_drive": floor_weak}), true),
        Err(e) => (json!({"width": Value::Null, "error": e.to_string(), "floor_weak_drive": floor_weak}), false),
    };
    Ok(PointOutput { table, results, checks: Checks { converged, ..Checks::default() } })
}

pub fn channel(cfg: &RunConfig, seed: u64) -> Result<PointOutput> {
    let m = model(cfg)?;
    let samples = cfg.channel.as_ref().map_or(100_000, |c| c.samples);
    let noise = noise_of(cfg.noise.as_ref());
    let t = Truncation::new(m.dim.unwrap_or(24))?;
    let pc = ProtocolConfig { spec: spec_of(m)?, duration: BlockDuration::Fixed(1.0), noise, truncation: t };
    let analytic = protocol::initial_state(&pc)?;
    let sampled = protocol::monte_carlo_channel(noise, pc.alpha_b(), samples, seed, t)?;
    let dist = sampled.trace_distance(&analytic)?;
    let mut table = Table::new(&["samples", "trace_distance", "n_mean_sampled", "n_mean_analytic"]);
    table.push_floats(&[samples as f64, dist, sampled.n_mean(), analytic.n_mean()]);
    let results = json!({
        "trace_distance": dist,
        "nbar_th": noise.nbar_th(pc.alpha_b()),
        "alpha_b": cjson(pc.alpha_b()),
        "seed": seed,
    });
    Ok(PointOutput { table, results, checks: Checks { converged: dist < CHANNEL_TOLERANCE, ..Checks::default() } })
}
