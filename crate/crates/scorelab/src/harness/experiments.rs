//! Experiment orchestration: sweeps over step size, horizon, score error
//! and dimension, the bound audit, the Bayesian demo, and the KL-vs-W2
//! computation. Each experiment yields a deterministic result table (same
//! spec + seed gives byte-identical CSV); wall times and provenance go to
//! a sidecar manifest instead of the table.

use crate::bounds::{self, BoundVariant, ConstantsReport};
use crate::harness::config::{load_space_and_target, KvMap};
use crate::harness::plot;
use crate::metrics::{self, w2_bures, w2_sliced};
use crate::sampler::{exact_channel, SamplerRun};
use crate::scores::{PerturbMode, ScoreModel};
use crate::spectral::{GaussianMeasure, ModelSpace, RngStream, Schedule};
use crate::targets::{ProductSymmetricMixture, TailConfig, TargetModel};
use crate::util::{mean_se, ols_slope};
use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// One grid point of an experiment.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub param_name: &'static str,
    pub param: f64,
    pub w2: f64,
    pub w2_stderr: f64,
    pub method: &'static str,
    pub bound_w2sq: f64,
    pub margin_w2sq: f64,
    pub hypothesis_ok: bool,
    pub status: String,
}

/// A fitted summary (slope, ratio) appended after the grid rows.
#[derive(Debug, Clone)]
pub struct FitRow {
    pub name: String,
    pub value: f64,
    pub ci: f64,
}

/// Full outcome of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub experiment: &'static str,
    pub rows: Vec<SweepRow>,
    pub fits: Vec<FitRow>,
}

impl ExperimentResult {
    pub fn to_csv_string(&self, config_hash: &str) -> String {
        let mut out = String::from(
            "experiment,config_hash,kind,param_name,param,w2,w2_stderr,method,bound_w2sq,margin_w2sq,hypothesis_ok,status\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},point,{},{},{},{},{},{},{},{},{}",
                self.experiment,
                config_hash,
                r.param_name,
                r.param,
                r.w2,
                r.w2_stderr,
                r.method,
                r.bound_w2sq,
                r.margin_w2sq,
                r.hypothesis_ok,
                r.status
            );
        }
        for f in &self.fits {
            let _ = writeln!(
                out,
                "{},{},fit,{},{},{},,,,,,ok",
                self.experiment, config_hash, f.name, f.value, f.ci
            );
        }
        out
    }

    pub fn fit(&self, name: &str) -> Option<&FitRow> {
        self.fits.iter().find(|f| f.name == name)
    }

    pub fn min_margin(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.margin_w2sq)
            .fold(f64::INFINITY, f64::min)
    }
}

fn slope_fit(name: &str, xs: &[f64], ys: &[f64]) -> FitRow {
    let (value, ci) = ols_slope(xs, ys);
    FitRow { name: name.to_string(), value, ci }
}

// ---------------------------------------------------------------------------
// Channel sweeps (exact laws, no Monte Carlo)
// ---------------------------------------------------------------------------

/// W2 between the exact channel output and the Gaussian target, as a
/// function of the step size. Fits the log-log slope (first order in tau
/// at W2 scale).
pub fn tau_sweep(
    target: &TargetModel,
    space: &ModelSpace,
    report: &ConstantsReport,
    t_final: f64,
    taus: &[f64],
) -> Result<ExperimentResult> {
    if taus.is_empty() {
        return Err(Error::EmptyInput("tau grid"));
    }
    let target_law = single_gaussian_law(target)?;
    let cap = bounds::tau_cap(report);
    let mut rows = Vec::new();
    let mut log_tau = Vec::new();
    let mut log_w2 = Vec::new();
    for &tau in taus {
        let n = (t_final / tau).round().max(1.0) as usize;
        let schedule = Schedule::uniform(t_final, 0.0, n)?;
        let actual_tau = schedule.tau();
        let run = SamplerRun::new(
            schedule,
            ScoreModel::exact(target.clone(), space.clone()),
            1,
            RngStream::new(0),
        )?;
        let law = exact_channel(&run)?;
        let w2 = w2_bures(&law, &target_law)?;
        let bound =
            bounds::w2_bound_unchecked(report, t_final, actual_tau, 0.0, BoundVariant::Standard);
        rows.push(SweepRow {
            param_name: "tau",
            param: actual_tau,
            w2: w2.value,
            w2_stderr: 0.0,
            method: "bures",
            bound_w2sq: bound,
            margin_w2sq: bound - w2.value * w2.value,
            hypothesis_ok: actual_tau <= cap,
            status: "ok".into(),
        });
        log_tau.push(actual_tau.ln());
        log_w2.push(w2.value.ln());
    }
    let fits = vec![slope_fit("log_w2_vs_log_tau_slope", &log_tau, &log_w2)];
    Ok(ExperimentResult { experiment: "tau_sweep", rows, fits })
}

/// W2 between the exact channel output and the Gaussian target as a
/// function of the horizon T at fixed tau. Fits the slope of log W2
/// against T (the bias decays like e^{-T} at W2 scale).
pub fn t_sweep(
    target: &TargetModel,
    space: &ModelSpace,
    report: &ConstantsReport,
    tau: f64,
    horizons: &[f64],
) -> Result<ExperimentResult> {
    if horizons.is_empty() {
        return Err(Error::EmptyInput("T grid"));
    }
    let target_law = single_gaussian_law(target)?;
    let cap = bounds::tau_cap(report);
    let mut rows = Vec::new();
    let mut ts = Vec::new();
    let mut log_w2 = Vec::new();
    for &t_final in horizons {
        let n = (t_final / tau).round().max(1.0) as usize;
        let schedule = Schedule::uniform(t_final, 0.0, n)?;
        let actual_tau = schedule.tau();
        let run = SamplerRun::new(
            schedule,
            ScoreModel::exact(target.clone(), space.clone()),
            1,
            RngStream::new(0),
        )?;
        let law = exact_channel(&run)?;
        let w2 = w2_bures(&law, &target_law)?;
        let bound =
            bounds::w2_bound_unchecked(report, t_final, actual_tau, 0.0, BoundVariant::Standard);
        rows.push(SweepRow {
            param_name: "T",
            param: t_final,
            w2: w2.value,
            w2_stderr: 0.0,
            method: "bures",
            bound_w2sq: bound,
            margin_w2sq: bound - w2.value * w2.value,
            hypothesis_ok: actual_tau <= cap,
            status: "ok".into(),
        });
        ts.push(t_final);
        log_w2.push(w2.value.ln());
    }
    let fits = vec![slope_fit("log_w2_vs_t_slope", &ts, &log_w2)];
    Ok(ExperimentResult { experiment: "t_sweep", rows, fits })
}

fn single_gaussian_law(target: &TargetModel) -> Result<GaussianMeasure> {
    let params = target.params()?;
    if params.n_comp() != 1 {
        return Err(Error::InvalidParameter(
            "channel sweeps need a single-Gaussian target".into(),
        ));
    }
    GaussianMeasure::new(params.mean(0).to_vec(), params.var(0).to_vec())
}

// ---------------------------------------------------------------------------
// Monte-Carlo epsilon sweep
// ---------------------------------------------------------------------------

/// Sampler error as the score-error budget epsilon varies (sinusoidal
/// perturbation mode, the one whose smoothness matches the
/// approximate-score hypotheses).
///
/// Two fits come out:
///
/// - `log_w2_vs_log_eps_slope` — the raw distance to exact target draws;
///   its small-eps points sit on the Monte-Carlo two-sample floor.
/// - `log_coupled_w2_vs_log_eps_slope` — the coupled measurement: the
///   perturbed run shares its noise stream with an eps = 0 reference run,
///   so the sorted-coupling W2 between the two ensembles isolates the
///   epsilon-attributable displacement with no sampling floor (at eps = 0
///   the ensembles are bit-identical). This realizes the shared-noise
///   coupling the error analysis itself uses and is the fit the epsilon
///   rate check reads.
///
/// Rows keep the vs-target distances (the audit compares those against
/// the bound).
#[allow(clippy::too_many_arguments)]
pub fn eps_sweep(
    target: &TargetModel,
    space: &ModelSpace,
    report: &ConstantsReport,
    t_final: f64,
    tau: f64,
    eps_grid: &[f64],
    n_paths: usize,
    omega: f64,
    stream: &RngStream,
) -> Result<ExperimentResult> {
    if eps_grid.is_empty() {
        return Err(Error::EmptyInput("eps grid"));
    }
    let n_steps = (t_final / tau).round().max(1.0) as usize;
    let schedule = Schedule::uniform(t_final, 0.0, n_steps)?;
    let cap = bounds::tau_cap(report);
    let hypothesis_ok = schedule.tau() <= cap;
    let target_draws = target.sample(n_paths, &stream.substream(u64::MAX));
    let exact = ScoreModel::exact(target.clone(), space.clone());
    // reference ensemble on the shared noise stream
    let noise_stream = stream.substream(7);
    let reference = SamplerRun::new(schedule.clone(), exact.clone(), n_paths, noise_stream)?
        .run_paths()?;
    let mut rows = Vec::new();
    let mut log_eps = Vec::new();
    let mut log_w2 = Vec::new();
    let mut log_coupled = Vec::new();
    for (i, &eps) in eps_grid.iter().enumerate() {
        let score = ScoreModel::perturbed(
            exact.clone(),
            eps,
            PerturbMode::Sinusoidal { omega },
            stream.substream(1_000 + i as u64),
        );
        let run = SamplerRun::new(schedule.clone(), score, n_paths, noise_stream)?
            .with_tau_guard(report.l0 + report.l2);
        let out = run.run_paths()?;
        let (w2, se) = empirical_w2(out.final_samples(), &target_draws, stream)?;
        let (coupled, _) = empirical_w2(out.final_samples(), reference.final_samples(), stream)?;
        let bound = bounds::w2_bound_unchecked(
            report,
            t_final,
            schedule.tau(),
            eps,
            BoundVariant::Standard,
        );
        rows.push(SweepRow {
            param_name: "eps",
            param: eps,
            w2,
            w2_stderr: se,
            method: if space.dim() == 1 { "assignment" } else { "sliced" },
            bound_w2sq: bound,
            margin_w2sq: bound - w2 * w2,
            hypothesis_ok,
            status: "ok".into(),
        });
        log_eps.push(eps.ln());
        log_w2.push(w2.ln());
        log_coupled.push(coupled.ln());
    }
    let fits = vec![
        slope_fit("log_w2_vs_log_eps_slope", &log_eps, &log_w2),
        slope_fit("log_coupled_w2_vs_log_eps_slope", &log_eps, &log_coupled),
    ];
    Ok(ExperimentResult { experiment: "eps_sweep", rows, fits })
}

/// Empirical W2 between equally sized sample sets: exact sorted coupling
/// in 1D (with a split-half standard error), sliced otherwise.
fn empirical_w2(
    a: &crate::spectral::SampleSet,
    b: &crate::spectral::SampleSet,
    stream: &RngStream,
) -> Result<(f64, f64)> {
    if a.dim == 1 {
        let sorted = |s: &crate::spectral::SampleSet| {
            let mut v = s.column(0);
            v.sort_by(f64::total_cmp);
            v
        };
        let (xa, xb) = (sorted(a), sorted(b));
        let value = metrics::w2_1d_squared_sorted(&xa, &xb).sqrt();
        // split-half spread as the uncertainty scale
        let half = |s: &crate::spectral::SampleSet, parity: usize| {
            let mut v: Vec<f64> = s
                .rows()
                .enumerate()
                .filter(|(i, _)| i % 2 == parity)
                .map(|(_, r)| r[0])
                .collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let w0 = metrics::w2_1d_squared_sorted(&half(a, 0), &half(b, 0)).sqrt();
        let w1 = metrics::w2_1d_squared_sorted(&half(a, 1), &half(b, 1)).sqrt();
        Ok((value, (w0 - w1).abs() / 2.0))
    } else {
        let est = w2_sliced(a, b, 256, &stream.substream(31))?;
        Ok((est.value, est.stderr))
    }
}

// ---------------------------------------------------------------------------
// Dimension sweeps
// ---------------------------------------------------------------------------

/// Sampler error across dimensions for the product mixture target with
/// spectrum `c_i` proportional to `1/i^2`, optionally normalized to unit
/// trace. The per-dimension error is the sliced W2 between the ensemble
/// and exact target draws, rescaled by `sqrt(d)` to undo the directional
/// average's `E[u_1^2] = 1/d` factor so cross-dimension ratios compare
/// full-space error scales.
#[allow(clippy::too_many_arguments)]
pub fn dim_sweep(
    dims: &[usize],
    normalize_trace: bool,
    t_final: f64,
    tau: f64,
    n_paths: usize,
    n_proj: usize,
    stream: &RngStream,
) -> Result<ExperimentResult> {
    if dims.is_empty() {
        return Err(Error::EmptyInput("dimension grid"));
    }
    let n_steps = (t_final / tau).round().max(1.0) as usize;
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (i, &d) in dims.iter().enumerate() {
        let mut c: Vec<f64> = (1..=d).map(|i| 1.0 / (i * i) as f64).collect();
        if normalize_trace {
            let trace: f64 = c.iter().sum();
            c.iter_mut().for_each(|v| *v /= trace);
        }
        let space = ModelSpace::new(c.clone(), c)?;
        let target =
            TargetModel::ProductSymmetricMixture(ProductSymmetricMixture::trace_form(&space));
        let schedule = Schedule::uniform(t_final, 0.0, n_steps)?;
        let run = SamplerRun::new(
            schedule,
            ScoreModel::exact(target.clone(), space.clone()),
            n_paths,
            stream.substream(i as u64),
        )?;
        let out = run.run_paths()?;
        let target_draws = target.sample(n_paths, &stream.substream(100 + i as u64));
        let est = w2_sliced(
            out.final_samples(),
            &target_draws,
            n_proj,
            &stream.substream(200 + i as u64),
        )?;
        let scale = (d as f64).sqrt();
        rows.push(SweepRow {
            param_name: "d",
            param: d as f64,
            w2: scale * est.value,
            w2_stderr: scale * est.stderr,
            method: "sliced",
            bound_w2sq: f64::NAN,
            margin_w2sq: f64::NAN,
            hypothesis_ok: true,
            status: "ok".into(),
        });
        errors.push(scale * est.value);
    }
    let max = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let fits = vec![FitRow {
        name: "error_ratio_max_over_min".into(),
        value: max / min,
        ci: 0.0,
    }];
    Ok(ExperimentResult {
        experiment: if normalize_trace { "trace_fixed_dim_sweep" } else { "dim_sweep" },
        rows,
        fits,
    })
}

// ---------------------------------------------------------------------------
// Bound audit
// ---------------------------------------------------------------------------

/// Re-runs the tau, T and epsilon sweeps and verifies that every measured
/// squared distance stays below the analytic bound; the minimum margin over
/// all runs is appended as a fit row.
#[allow(clippy::too_many_arguments)]
pub fn bound_audit(
    target: &TargetModel,
    space: &ModelSpace,
    report: &ConstantsReport,
    taus: &[f64],
    horizons: &[f64],
    eps_grid: &[f64],
    n_paths: usize,
    stream: &RngStream,
) -> Result<ExperimentResult> {
    let mut rows = Vec::new();
    let a = tau_sweep(target, space, report, 8.0, taus)?;
    rows.extend(a.rows);
    let b = t_sweep(target, space, report, 0.005, horizons)?;
    rows.extend(b.rows);
    let c = eps_sweep(target, space, report, 6.0, 0.01, eps_grid, n_paths, 1.0, stream)?;
    rows.extend(c.rows);
    let min_margin = rows.iter().map(|r| r.margin_w2sq).fold(f64::INFINITY, f64::min);
    let fits = vec![FitRow { name: "min_margin_w2sq".into(), value: min_margin, ci: 0.0 }];
    Ok(ExperimentResult { experiment: "bound_audit", rows, fits })
}

// ---------------------------------------------------------------------------
// Bayesian demo
// ---------------------------------------------------------------------------

/// Sample the linear-Gaussian posterior with the exact conditional score
/// and compare the ensemble's Gaussian fit against the closed-form
/// posterior, plus the Bayesian-variant bound margin.
pub fn bayes_demo(
    target: &TargetModel,
    space: &ModelSpace,
    report: &ConstantsReport,
    t_final: f64,
    tau: f64,
    n_paths: usize,
    stream: &RngStream,
) -> Result<ExperimentResult> {
    let posterior = match target {
        TargetModel::LinearGaussianPosterior(p) => p.posterior(),
        _ => {
            return Err(Error::InvalidParameter(
                "bayes_demo needs a linear_gaussian_posterior target".into(),
            ))
        }
    };
    let n_steps = (t_final / tau).round().max(1.0) as usize;
    let schedule = Schedule::uniform(t_final, 0.0, n_steps)?;
    let run = SamplerRun::new(
        schedule.clone(),
        ScoreModel::exact(target.clone(), space.clone()),
        n_paths,
        stream.substream(3),
    )?;
    let out = run.run_paths()?;
    let fit = out.final_samples().fit_gaussian();
    let w2 = w2_bures(&fit, &posterior)?;
    let bound = bounds::w2_bound_unchecked(
        report,
        t_final,
        schedule.tau(),
        0.0,
        BoundVariant::Bayesian,
    );
    let rows = vec![SweepRow {
        param_name: "T",
        param: t_final,
        w2: w2.value,
        w2_stderr: 0.0,
        method: "bures",
        bound_w2sq: bound,
        margin_w2sq: bound - w2.value * w2.value,
        hypothesis_ok: schedule.tau() <= bounds::tau_cap(report),
        status: "ok".into(),
    }];
    Ok(ExperimentResult { experiment: "bayes_demo", rows, fits: vec![] })
}

// ---------------------------------------------------------------------------
// KL vs W2
// ---------------------------------------------------------------------------

/// The motivating computation: per-coordinate KL adds up with dimension
/// while the W2 distance to the base Gaussian only scales with the trace.
/// Rows carry, per dimension, the assignment W2 against the base and the
/// `sqrt(2 Tr C)` bound (margins include a 3 SE slack at W2 scale).
pub fn kl_vs_w2(dims: &[usize], n: usize, stream: &RngStream) -> Result<ExperimentResult> {
    if dims.is_empty() {
        return Err(Error::EmptyInput("dimension grid"));
    }
    let mut rows = Vec::new();
    let mut kl_by_dim = Vec::new();
    for (i, &d) in dims.iter().enumerate() {
        let space = ModelSpace::isotropic(d, 1.0, 1.0)?;
        let target =
            TargetModel::ProductSymmetricMixture(ProductSymmetricMixture::trace_form(&space));
        if d <= 8 {
            kl_by_dim.push((d, metrics::kl_quadrature(&target, &space)?));
        }
        let target_draws = target.sample(n, &stream.substream(i as u64));
        let base_draws = space.base_measure().sample(n, &stream.substream(50 + i as u64));
        let est = metrics::w2_assignment(&target_draws, &base_draws)?;
        let bound_w2 = (2.0 * space.trace_c()).sqrt();
        let slack = bound_w2 + 3.0 * est.stderr;
        rows.push(SweepRow {
            param_name: "d",
            param: d as f64,
            w2: est.value,
            w2_stderr: est.stderr,
            method: "assignment",
            bound_w2sq: 2.0 * space.trace_c(),
            margin_w2sq: slack * slack - est.value * est.value,
            hypothesis_ok: true,
            status: "ok".into(),
        });
    }
    let mut fits = Vec::new();
    for (d, kl) in &kl_by_dim {
        fits.push(FitRow { name: format!("kl_d{d}"), value: *kl, ci: 0.0 });
    }
    if let (Some((_, kl1)), Some((_, kl2))) = (
        kl_by_dim.iter().find(|(d, _)| *d == 1),
        kl_by_dim.iter().find(|(d, _)| *d == 2),
    ) {
        fits.push(FitRow {
            name: "kl_additivity_residual".into(),
            value: kl2 - 2.0 * kl1,
            ci: 0.0,
        });
    }
    Ok(ExperimentResult { experiment: "kl_vs_w2", rows, fits })
}

// ---------------------------------------------------------------------------
// Empirical coefficient refit
// ---------------------------------------------------------------------------

/// Refit the three bound coefficients from small channel/MC sweeps for
/// practical planning (the analytic constants are astronomically
/// conservative). Fits `W2^2 / term` per sweep with the other knobs at
/// their most favorable values.
pub fn refit_empirical_coefficients(
    target: &TargetModel,
    space: &ModelSpace,
    report: &ConstantsReport,
    stream: &RngStream,
) -> Result<bounds::EmpiricalCoefficients> {
    let m2 = report.m2;
    let trace_c = report.trace_c;
    // bias coefficient from a T sweep at tiny tau
    let ts = t_sweep(target, space, report, 0.002, &[2.0, 3.0, 4.0])?;
    let c_bias = ts
        .rows
        .iter()
        .map(|r| r.w2 * r.w2 / ((-2.0 * r.param).exp() * (m2 + trace_c)))
        .fold(0.0f64, f64::max);
    // tau coefficient from a tau sweep at long horizon
    let taus = tau_sweep(target, space, report, 10.0, &[0.1, 0.05, 0.025])?;
    let c_tau = taus
        .rows
        .iter()
        .map(|r| r.w2 * r.w2 / (trace_c * r.param * r.param))
        .fold(0.0f64, f64::max);
    // eps coefficient from a small MC sweep
    let eps = eps_sweep(
        target,
        space,
        report,
        6.0,
        0.01,
        &[0.05, 0.1],
        4_000,
        1.0,
        stream,
    )?;
    let c_eps = eps
        .rows
        .iter()
        .map(|r| r.w2 * r.w2 / (r.param * r.param * 6.0))
        .fold(0.0f64, f64::max);
    Ok(bounds::EmpiricalCoefficients { c_bias, c_eps, c_tau })
}

// ---------------------------------------------------------------------------
// Spec-driven dispatch
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentTag {
    TauSweep,
    TSweep,
    EpsSweep,
    DimSweep,
    TraceFixedDimSweep,
    BoundAudit,
    BayesDemo,
    KlVsW2,
}

impl ExperimentTag {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "tau_sweep" => ExperimentTag::TauSweep,
            "t_sweep" => ExperimentTag::TSweep,
            "eps_sweep" => ExperimentTag::EpsSweep,
            "dim_sweep" => ExperimentTag::DimSweep,
            "trace_fixed_dim_sweep" => ExperimentTag::TraceFixedDimSweep,
            "bound_audit" => ExperimentTag::BoundAudit,
            "bayes_demo" => ExperimentTag::BayesDemo,
            "kl_vs_w2" => ExperimentTag::KlVsW2,
            other => return Err(Error::Config(format!("unknown experiment `{other}`"))),
        })
    }
}

/// A parsed experiment request: tag, config, seed, output directory.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub tag: ExperimentTag,
    pub kv: KvMap,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn from_kv(kv: KvMap, seed: u64, out_dir: Option<PathBuf>) -> Result<Self> {
        let tag = ExperimentTag::parse(kv.require("experiment")?)?;
        Ok(ExperimentSpec { tag, kv, seed, out_dir })
    }
}

/// Run an experiment spec end to end: dispatch, write the CSV, SVG and
/// manifest when an output directory is set, and return the result.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let started = Instant::now();
    let kv = &spec.kv;
    let stream = RngStream::new(spec.seed);
    let needs_target = !matches!(
        spec.tag,
        ExperimentTag::DimSweep | ExperimentTag::TraceFixedDimSweep | ExperimentTag::KlVsW2
    );
    let result = if needs_target {
        let (space, target) = load_space_and_target(kv)?;
        let report = bounds::constants(&target, &space, &TailConfig::default())?;
        match spec.tag {
            ExperimentTag::TauSweep => {
                let t_final = kv.f64_or("t_final", 8.0)?;
                let taus = kv.f64_list_or("tau_grid", &[0.2, 0.1, 0.05, 0.025])?;
                tau_sweep(&target, &space, &report, t_final, &taus)?
            }
            ExperimentTag::TSweep => {
                let tau = kv.f64_or("tau", 0.005)?;
                let horizons = kv.f64_list_or("t_grid", &[2.0, 4.0, 6.0, 8.0])?;
                t_sweep(&target, &space, &report, tau, &horizons)?
            }
            ExperimentTag::EpsSweep => {
                let t_final = kv.f64_or("t_final", 6.0)?;
                let tau = kv.f64_or("tau", 0.01)?;
                let eps_grid = kv.f64_list_or("eps_grid", &[0.02, 0.05, 0.1])?;
                let n_paths = kv.usize_or("n_paths", 10_000)?;
                let omega = kv.f64_or("omega", 1.0)?;
                eps_sweep(
                    &target, &space, &report, t_final, tau, &eps_grid, n_paths, omega, &stream,
                )?
            }
            ExperimentTag::BoundAudit => {
                let taus = kv.f64_list_or("tau_grid", &[0.2, 0.1, 0.05, 0.025])?;
                let horizons = kv.f64_list_or("t_grid", &[2.0, 4.0, 6.0, 8.0])?;
                let eps_grid = kv.f64_list_or("eps_grid", &[0.02, 0.05, 0.1])?;
                let n_paths = kv.usize_or("n_paths", 10_000)?;
                bound_audit(
                    &target, &space, &report, &taus, &horizons, &eps_grid, n_paths, &stream,
                )?
            }
            ExperimentTag::BayesDemo => {
                let t_final = kv.f64_or("t_final", 10.0)?;
                let tau = kv.f64_or("tau", 0.01)?;
                let n_paths = kv.usize_or("n_paths", 4096)?;
                bayes_demo(&target, &space, &report, t_final, tau, n_paths, &stream)?
            }
            _ => unreachable!(),
        }
    } else {
        match spec.tag {
            ExperimentTag::DimSweep | ExperimentTag::TraceFixedDimSweep => {
                let dims: Vec<usize> = kv
                    .f64_list_or("d_grid", &[4.0, 16.0, 64.0])?
                    .iter()
                    .map(|&v| v as usize)
                    .collect();
                let normalize = spec.tag == ExperimentTag::TraceFixedDimSweep;
                let t_final = kv.f64_or("t_final", 8.0)?;
                let tau = kv.f64_or("tau", 0.02)?;
                let n_paths = kv.usize_or("n_paths", 4096)?;
                let n_proj = kv.usize_or("n_proj", 256)?;
                dim_sweep(&dims, normalize, t_final, tau, n_paths, n_proj, &stream)?
            }
            ExperimentTag::KlVsW2 => {
                let dims: Vec<usize> = kv
                    .f64_list_or("d_grid", &[1.0, 2.0, 4.0])?
                    .iter()
                    .map(|&v| v as usize)
                    .collect();
                let n = kv.usize_or("n_samples", 1024)?;
                kl_vs_w2(&dims, n, &stream)?
            }
            _ => unreachable!(),
        }
    };
    if let Some(dir) = &spec.out_dir {
        write_outputs(dir, spec, &result, started.elapsed().as_millis())?;
    }
    Ok(result)
}

fn write_outputs(
    dir: &Path,
    spec: &ExperimentSpec,
    result: &ExperimentResult,
    wall_ms: u128,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let hash = spec.kv.content_hash();
    let csv = result.to_csv_string(&hash);
    std::fs::write(dir.join(format!("{}.csv", result.experiment)), csv)?;
    // one chart: the primary metric against the sweep parameter
    let series: Vec<(f64, f64)> = result.rows.iter().map(|r| (r.param, r.w2)).collect();
    if series.len() > 1 {
        let svg = plot::line_chart_svg(
            result.experiment,
            &[("w2".to_string(), series)],
            true,
            true,
        );
        std::fs::write(dir.join(format!("{}.svg", result.experiment)), svg)?;
    }
    write_manifest(dir, result.experiment, &spec.kv, spec.seed, wall_ms)?;
    Ok(())
}

/// Sidecar manifest: seed, config hash, full config text, wall time.
/// Timing lives here so the result CSVs stay byte-deterministic.
pub fn write_manifest(
    dir: &Path,
    name: &str,
    kv: &KvMap,
    seed: u64,
    wall_ms: u128,
) -> Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "name = {name}");
    let _ = writeln!(text, "seed = {seed}");
    let _ = writeln!(text, "config_hash = {}", kv.content_hash());
    let _ = writeln!(text, "wall_ms = {wall_ms}");
    let _ = writeln!(text, "--- config ---");
    text.push_str(kv.raw());
    std::fs::write(dir.join(format!("{name}.manifest.txt")), text)?;
    Ok(())
}

/// Mean and standard error of a sample's coordinate (exposed for tests
/// and the CLI's quick summaries).
pub fn column_mean_se(samples: &crate::spectral::SampleSet, k: usize) -> (f64, f64) {
    let col = samples.column(k);
    mean_se(&col)
}
