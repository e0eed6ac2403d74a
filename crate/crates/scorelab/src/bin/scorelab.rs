//! Batch front end: sampling runs, bound verification, sweeps, planning,
//! W2 estimation between sample files, and the acceptance suite. All heavy
//! lifting lives in the library; this binary parses flags and configs,
//! dispatches, and writes outputs.

use clap::{Parser, Subcommand};
use scorelab::bounds::{self, PlanConfig, PlanMode};
use scorelab::harness::acceptance;
use scorelab::harness::config::{load_space_and_target, KvMap};
use scorelab::harness::experiments::{self, write_manifest, ExperimentSpec};
use scorelab::heat_kernel::{mollified_bound_check, vhj_bound_check, VhjState};
use scorelab::metrics;
use scorelab::probe::ProbeGrid;
use scorelab::sampler::SamplerRun;
use scorelab::scores::{lipschitz_profile, ModifiedScore, PerturbMode, ScoreModel};
use scorelab::spectral::{RngStream, SampleSet, Schedule};
use scorelab::targets::{TailConfig, TargetModel};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "scorelab",
    about = "Score-based diffusion sampling laboratory: exact oracles, bound checks, sweeps",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Key-value config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for all randomized work
    #[arg(long, global = true, default_value_t = acceptance::DEFAULT_SEED)]
    seed: u64,
    /// Output directory for CSV/SVG/manifest files
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to the core count)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the backward sampler and dump trajectory snapshots
    Sample,
    /// Evaluate constants and check the Lipschitz/heat-kernel bounds
    VerifyBounds,
    /// Run a configured experiment sweep
    Sweep,
    /// Plan (T, N, tau, delta, eps) for a target accuracy
    Plan,
    /// Estimate W2 between two sample CSV files
    W2,
    /// Run the acceptance suite
    Accept,
}

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool initializes once");
    }
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    };
    std::process::exit(code);
}

fn require_config(cli: &Cli) -> scorelab::Result<KvMap> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| scorelab::Error::Config("this subcommand needs --config <path>".into()))?;
    KvMap::from_file(path)
}

fn run(cli: &Cli) -> scorelab::Result<i32> {
    match cli.cmd {
        Cmd::Sample => cmd_sample(cli),
        Cmd::VerifyBounds => cmd_verify_bounds(cli),
        Cmd::Sweep => cmd_sweep(cli),
        Cmd::Plan => cmd_plan(cli),
        Cmd::W2 => cmd_w2(cli),
        Cmd::Accept => cmd_accept(cli),
    }
}

fn cmd_sample(cli: &Cli) -> scorelab::Result<i32> {
    let started = Instant::now();
    let kv = require_config(cli)?;
    let (space, target) = load_space_and_target(&kv)?;
    let t_final = kv.f64_or("t_final", 8.0)?;
    let delta = kv.f64_or("delta", 0.0)?;
    let n_steps = kv.usize_or("n_steps", 200)?;
    let n_paths = kv.usize_or("n_paths", 4096)?;
    let eps = kv.f64_or("eps", 0.0)?;
    let stream = RngStream::new(cli.seed);
    let exact = if delta > 0.0 {
        ScoreModel::exact_with_floor(target.clone(), space.clone(), delta)
    } else {
        ScoreModel::exact(target.clone(), space.clone())
    };
    let score = match kv.str_or("perturb", "none") {
        "none" => exact,
        "gaussian" => {
            ScoreModel::perturbed(exact, eps, PerturbMode::AdditiveGaussian, stream.substream(1))
        }
        "sinusoidal" => ScoreModel::perturbed(
            exact,
            eps,
            PerturbMode::Sinusoidal { omega: kv.f64_or("omega", 1.0)? },
            stream.substream(1),
        ),
        other => return Err(scorelab::Error::Config(format!("unknown perturb mode `{other}`"))),
    };
    let schedule = Schedule::uniform(t_final, delta, n_steps)?;
    let mut run = SamplerRun::new(schedule, score, n_paths, stream.substream(2))?;
    if let Ok(report) = bounds::constants(&target, &space, &TailConfig::default()) {
        run = run.with_tau_guard(report.l0 + report.l2);
        if let Some(w) = run.tau_warning() {
            eprintln!("warning: {w}");
        }
    }
    if let Some(list) = kv.get("record") {
        let indices: Vec<usize> = list
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| scorelab::Error::Config("bad record index".into())))
            .collect::<scorelab::Result<_>>()?;
        run = run.record_at_indices(indices);
    }
    let out = run.run_paths()?;
    let final_samples = out.final_samples();
    let mean = final_samples.mean();
    println!(
        "sampled {} paths over {} steps (T={}, delta={}); final mean = {:?}",
        n_paths,
        n_steps,
        t_final,
        delta,
        &mean[..mean.len().min(4)]
    );
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
        for (t, set) in &out.records {
            let path = dir.join(format!("samples_t{t:.6}.csv"));
            let mut file = std::fs::File::create(&path)?;
            set.write_csv(&mut file)?;
            println!("wrote {}", path.display());
        }
        write_manifest(dir, "sample", &kv, cli.seed, started.elapsed().as_millis())?;
    }
    Ok(0)
}

fn cmd_verify_bounds(cli: &Cli) -> scorelab::Result<i32> {
    let started = Instant::now();
    let kv = require_config(cli)?;
    let (space, target) = load_space_and_target(&kv)?;

    let times = kv.f64_list_or("times", &[0.25, 0.5, 1.0, 2.0, 4.0])?;
    // probe box defaults to the target envelope; enlargeable per config.
    // The same box feeds the constants measurement and the profile grids:
    // a bound from a smaller box than the suprema it caps is meaningless.
    let mut probe = target.default_probe_box(&space);
    if kv.get("probe_lo").is_some() || kv.get("probe_hi").is_some() {
        let lo = kv.f64_list_or("probe_lo", &probe.lo)?;
        let hi = kv.f64_list_or("probe_hi", &probe.hi)?;
        probe = scorelab::probe::ProbeConfig::boxed(lo, hi);
    }
    let per_axis = kv.usize_or("probe_per_axis", probe.per_axis)?;
    probe = probe.with_per_axis(per_axis);
    let tail_cfg = TailConfig { probe: Some(probe.clone()), ..TailConfig::default() };
    let report = bounds::constants(&target, &space, &tail_cfg)?;
    print!("{}", report.to_text_table());
    let grid = ProbeGrid::from_config(&probe);
    let ms = ModifiedScore::new(ScoreModel::exact(target.clone(), space.clone()), space.clone());
    let profile = lipschitz_profile(&ms, &times, &grid)?;
    println!("\nmodified-score decay (grid sups vs L0 e^-t, L1 e^-t/2):");
    let mut violations = 0;
    for p in &profile {
        let gb = report.l0 * (-p.t).exp();
        let vb = report.l1 * (-0.5 * p.t).exp();
        let ok = p.sup_grad <= gb && p.sup_value <= vb;
        if !ok {
            violations += 1;
        }
        println!(
            "  t={:<6} sup||grad s~||={:<12.6e} bound={:<12.6e} sup|s~|={:<12.6e} bound={:<12.6e} {}",
            p.t,
            p.sup_grad,
            gb,
            p.sup_value,
            vb,
            if ok { "ok" } else { "VIOLATED" }
        );
    }

    let mut wrote = Vec::new();
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("constants.csv"), report.to_csv_string())?;
        wrote.push("constants.csv");
    }
    if space.dim() <= 2 {
        let h = target.tail_decomposition(&space, &tail_cfg)?;
        let state = VhjState::new(h, &space, VhjState::DEFAULT_ORDER)?;
        let vhj_times: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0 && t <= 2.0).collect();
        let vhj = vhj_bound_check(&state, &vhj_times, &grid)?;
        println!("\nheat-kernel gradient/Hessian margins:");
        for row in &vhj.rows {
            println!(
                "  t={:<6} grad margin={:<12.6e} hess margin={:<12.6e}",
                row.t, row.margin_grad, row.margin_hess
            );
        }
        if let Some(dir) = &cli.out {
            std::fs::write(dir.join("vhj_bounds.csv"), vhj.to_csv_string())?;
            wrote.push("vhj_bounds.csv");
        }
    }
    if let TargetModel::MollifiedPointCloud(cloud) = &target {
        let mh = mollified_bound_check(cloud, &grid)?;
        let row = &mh.rows[0];
        println!(
            "\nmollified bounds: sup|grad g|={:.6e} (<= {:.3}), sup||hess g||={:.6e} (<= {:.3})",
            row.measured_sup_grad, row.bound_grad, row.measured_sup_hess, row.bound_hess
        );
        if let Some(dir) = &cli.out {
            std::fs::write(dir.join("mollified_bounds.csv"), mh.to_csv_string())?;
            wrote.push("mollified_bounds.csv");
        }
    }
    if let Some(dir) = &cli.out {
        write_manifest(dir, "verify_bounds", &kv, cli.seed, started.elapsed().as_millis())?;
        println!("\nwrote {} into {}", wrote.join(", "), dir.display());
    }
    Ok(if violations == 0 { 0 } else { 1 })
}

fn cmd_sweep(cli: &Cli) -> scorelab::Result<i32> {
    let kv = require_config(cli)?;
    let spec = ExperimentSpec::from_kv(kv, cli.seed, cli.out.clone())?;
    let result = experiments::run_experiment(&spec)?;
    println!(
        "{}: {} grid points, {} fit(s)",
        result.experiment,
        result.rows.len(),
        result.fits.len()
    );
    for f in &result.fits {
        println!("  {} = {:.6} (+- {:.6})", f.name, f.value, f.ci);
    }
    if cli.out.is_none() {
        print!("{}", result.to_csv_string(&spec.kv.content_hash()));
    }
    Ok(0)
}

fn cmd_plan(cli: &Cli) -> scorelab::Result<i32> {
    let kv = require_config(cli)?;
    let (space, target) = load_space_and_target(&kv)?;
    let report = bounds::constants(&target, &space, &TailConfig::default())?;
    let eps0 = kv.f64("eps0")?;
    let cfg = PlanConfig::default();
    let mode = match kv.str_or("mode", "standard") {
        "standard" => PlanMode::Standard,
        "bounded_support_delta" => PlanMode::BoundedSupportDelta {
            r: kv.f64("r")?,
            delta: kv.f64("delta")?,
            dim: space.dim(),
        },
        "bounded_support_p0" => {
            PlanMode::BoundedSupportP0 { r: kv.f64("r")?, dim: space.dim() }
        }
        other => return Err(scorelab::Error::Config(format!("unknown plan mode `{other}`"))),
    };
    let plan = match kv.str_or("constants", "analytic") {
        "analytic" => bounds::plan_complexity(&report, eps0, mode, &cfg)?,
        "empirical" => {
            let coeffs = experiments::refit_empirical_coefficients(
                &target,
                &space,
                &report,
                &RngStream::new(cli.seed),
            )?;
            println!(
                "refit coefficients: c_bias={:.4e} c_eps={:.4e} c_tau={:.4e}",
                coeffs.c_bias, coeffs.c_eps, coeffs.c_tau
            );
            bounds::plan_complexity_empirical(
                &coeffs,
                report.m2,
                report.trace_c,
                eps0,
                bounds::tau_cap(&report),
                &cfg,
            )?
        }
        other => return Err(scorelab::Error::Config(format!("unknown constants mode `{other}`"))),
    };
    let mut stdout = std::io::stdout();
    bounds::write_plan_report(&mut stdout, &report, &plan)?;
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("constants.csv"), report.to_csv_string())?;
        std::fs::write(dir.join("plan.csv"), plan.to_csv_string())?;
        write_manifest(dir, "plan", &kv, cli.seed, 0)?;
    }
    Ok(0)
}

fn read_samples(path: &Path) -> scorelab::Result<SampleSet> {
    let file = std::fs::File::open(path)?;
    SampleSet::read_csv(BufReader::new(file))
}

fn cmd_w2(cli: &Cli) -> scorelab::Result<i32> {
    let kv = require_config(cli)?;
    let a = read_samples(Path::new(kv.require("a")?))?;
    let b = read_samples(Path::new(kv.require("b")?))?;
    let method = kv.str_or("method", "assignment");
    let est = match method {
        "assignment" => metrics::w2_assignment(&a, &b)?,
        "sliced" => metrics::w2_sliced(
            &a,
            &b,
            kv.usize_or("n_proj", 256)?,
            &RngStream::new(cli.seed),
        )?,
        "bures" => metrics::w2_bures(&a.fit_gaussian(), &b.fit_gaussian())?,
        other => return Err(scorelab::Error::Config(format!("unknown method `{other}`"))),
    };
    println!(
        "w2[{}] = {:.8e} (stderr {:.2e}, n = {})",
        est.method.tag(),
        est.value,
        est.stderr,
        est.n_used
    );
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
        let mut row = Vec::new();
        writeln!(&mut row, "method,value,stderr,n,seed").ok();
        est.write_csv_row(&mut row, cli.seed)?;
        std::fs::write(dir.join("w2.csv"), row)?;
    }
    Ok(0)
}

fn cmd_accept(cli: &Cli) -> scorelab::Result<i32> {
    let criteria: Vec<usize> = match &cli.config {
        Some(path) => {
            let kv = KvMap::from_file(path)?;
            match kv.get("criteria") {
                Some(list) => list
                    .split_whitespace()
                    .map(|t| {
                        t.parse()
                            .map_err(|_| scorelab::Error::Config("bad criterion index".into()))
                    })
                    .collect::<scorelab::Result<_>>()?,
                None => (1..=acceptance::CRITERIA_COUNT).collect(),
            }
        }
        None => (1..=acceptance::CRITERIA_COUNT).collect(),
    };
    let mut results = Vec::new();
    for idx in criteria {
        match acceptance::run_one(idx, cli.seed) {
            Some(r) => {
                println!("{}", r.line());
                results.push(r);
            }
            None => eprintln!("no criterion {idx}"),
        }
    }
    let all_pass = results.iter().all(|r| r.passed);
    println!(
        "{}: {}/{} criteria passed",
        if all_pass { "OK" } else { "FAILED" },
        results.iter().filter(|r| r.passed).count(),
        results.len()
    );
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("acceptance.csv"), acceptance::results_csv(&results))?;
    }
    Ok(if all_pass { 0 } else { 1 })
}

use std::io::Write as _;
