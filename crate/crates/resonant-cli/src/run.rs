//! Subcommand implementations. Exit code convention: 0 success, 1 error or
//! solver failure, 2 hypothesis-failure-with-blowup.

use std::path::Path;

use resonant_core::checker::check_all;
use resonant_core::continuation::{solve_resonant, ContinuationStatus};
use resonant_core::schrodinger::h1_seminorm;
use resonant_core::solver::{solve_perturbed, Backend};
use resonant_core::{Error, Result};
use serde::Serialize;

use crate::config::{
    build_instance, schedule, solve_options, ExperimentConfig, Instance, ScheduleConfig,
    SolverConfig,
};
use crate::{CommonOpts, SolverFlags};

/// stdout is advisory (artifacts land in files); a broken pipe must not
/// panic the run.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn base_dir(common: &CommonOpts) -> std::path::PathBuf {
    common
        .config
        .parent()
        .unwrap_or(Path::new("."))
        .to_path_buf()
}

fn load(common: &CommonOpts) -> Result<(ExperimentConfig, Instance)> {
    let cfg = ExperimentConfig::load(&common.config)?;
    let inst = build_instance(&cfg, &base_dir(common))?;
    Ok((cfg, inst))
}

fn parse_backend(s: &str) -> Result<Backend> {
    match s {
        "newton" => Ok(Backend::Newton),
        "picard" => Ok(Backend::Picard),
        other => Err(Error::InvalidParameter(format!(
            "backend must be newton or picard, got `{other}`"
        ))),
    }
}

fn merged_solver_cfg(cfg: &SolverConfig, flags: &SolverFlags) -> Result<SolverConfig> {
    let mut m = cfg.clone();
    if let Some(t) = flags.tol {
        m.tol = Some(t);
    }
    if let Some(i) = flags.max_iter {
        m.max_iter = Some(i);
    }
    if let Some(b) = &flags.backend {
        m.backend = Some(parse_backend(b)?);
    }
    if let Some(s) = &flags.start {
        m.start = Some(s.clone());
    }
    Ok(m)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

pub fn check(common: &CommonOpts) -> Result<u8> {
    let (cfg, inst) = load(common)?;
    let seed = common.seed.or(cfg.seed).unwrap_or(0);
    let report = check_all(&inst.split, &inst.map, &inst.h, None, seed)?;
    let json = report.to_json()?;
    out!("{json}");
    std::fs::create_dir_all(&common.output_dir)?;
    std::fs::write(common.output_dir.join("report.json"), json + "\n")?;
    Ok(0)
}

#[derive(Serialize)]
struct SolveReport {
    epsilon: f64,
    residual_norm: f64,
    iterations: usize,
    converged: bool,
    strong_monotonicity_c: f64,
    backend: Backend,
    threshold_ok: bool,
    norm_u: f64,
}

pub fn solve(common: &CommonOpts, eps: f64, flags: &SolverFlags) -> Result<u8> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eps must be positive for solve, got {eps}"
        )));
    }
    let (cfg, inst) = load(common)?;
    let opts = solve_options(&merged_solver_cfg(&cfg.solver, flags)?, &base_dir(common))?;
    let res = solve_perturbed(&inst.split, &inst.map, &inst.h, eps, &opts)?;
    let report = SolveReport {
        epsilon: res.epsilon,
        residual_norm: res.residual_norm,
        iterations: res.iterations,
        converged: res.converged,
        strong_monotonicity_c: res.strong_monotonicity_c,
        backend: res.backend,
        threshold_ok: res.threshold_ok,
        norm_u: inst.map.norm(&res.u),
    };
    write_json(&common.output_dir, "report.json", &report)?;
    resonant_core::io::write_vector(&common.output_dir.join("solution.txt"), &res.u)?;
    out!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if res.converged { 0 } else { 1 })
}

#[derive(Serialize)]
struct ContinuationReport {
    status: ContinuationStatus,
    steps: usize,
    final_epsilon: Option<f64>,
    final_unperturbed_residual: Option<f64>,
    norm_h: f64,
    norm_cap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_l2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_h1: Option<f64>,
    hypotheses: resonant_core::checker::HypothesisReport,
}

pub fn continuation(
    common: &CommonOpts,
    flags: &SolverFlags,
    eps0: Option<f64>,
    rho: Option<f64>,
    kmax: Option<usize>,
    norm_cap: Option<f64>,
) -> Result<u8> {
    let (cfg, inst) = load(common)?;
    let mut sched_cfg = cfg.schedule.clone();
    if eps0.is_some() {
        sched_cfg.eps0 = eps0;
    }
    if rho.is_some() {
        sched_cfg.rho = rho;
    }
    if kmax.is_some() {
        sched_cfg.k_max = kmax;
    }
    let solver_cfg = merged_solver_cfg(&cfg.solver, flags)?;
    let seed = common.seed.or(cfg.seed).unwrap_or(0);
    run_continuation_case(
        &inst,
        &sched_cfg,
        &solver_cfg,
        norm_cap.or(cfg.norm_cap),
        seed,
        &base_dir(common),
        &common.output_dir,
    )
}

/// Shared by `continuation` and each sweep case.
#[allow(clippy::too_many_arguments)]
fn run_continuation_case(
    inst: &Instance,
    sched_cfg: &ScheduleConfig,
    solver_cfg: &SolverConfig,
    norm_cap: Option<f64>,
    seed: u64,
    base: &Path,
    out_dir: &Path,
) -> Result<u8> {
    let opts = solve_options(solver_cfg, base)?;
    let sched = schedule(sched_cfg);
    let report = check_all(&inst.split, &inst.map, &inst.h, None, seed)?;
    let mut trace = solve_resonant(
        &inst.split,
        &inst.map,
        &inst.h,
        sched,
        opts.tol,
        norm_cap,
        &opts,
    )?;
    let alpha = report.threshold.alpha;
    if alpha.is_finite() && alpha > inst.split.threshold() {
        let _ = trace.attach_monitor(alpha, inst.split.delta(), inst.split.gamma(), None);
    }

    std::fs::create_dir_all(out_dir)?;
    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    std::fs::write(out_dir.join("trace.csv"), csv)?;
    std::fs::write(out_dir.join("trace.json"), trace.to_json()? + "\n")?;

    let (residual_l2, residual_h1) = match &trace.final_u {
        Some(u) => {
            resonant_core::io::write_vector(&out_dir.join("solution.txt"), u)?;
            let r = inst.split.apply(u) + inst.map.apply(u) - &inst.h;
            let l2 = inst.map.norm(&r);
            let h1 = match &inst.grid {
                Some(g) => Some((l2 * l2 + h1_seminorm(g, &r)?.powi(2)).sqrt()),
                None => None,
            };
            (Some(l2), h1)
        }
        None => (None, None),
    };
    let summary = ContinuationReport {
        status: trace.status,
        steps: trace.records.len(),
        final_epsilon: trace.records.last().map(|r| r.epsilon),
        final_unperturbed_residual: trace.records.last().map(|r| r.unperturbed_residual),
        norm_h: trace.norm_h,
        norm_cap: trace.norm_cap,
        sigma0: inst.sigma0,
        residual_l2,
        residual_h1,
        hypotheses: report,
    };
    write_json(out_dir, "report.json", &summary)?;
    Ok(match trace.status {
        ContinuationStatus::Converged => 0,
        ContinuationStatus::NormBlowup => 2,
        ContinuationStatus::SolverFailure => 1,
    })
}

fn thread_cap() -> Option<usize> {
    std::env::var("RESONANCE_SOLVER_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
}

#[derive(Serialize)]
struct SweepSummary {
    name: String,
    exit_code: u8,
    status: String,
}

pub fn sweep(common: &CommonOpts, jobs: Option<usize>) -> Result<u8> {
    let cfg = ExperimentConfig::load(&common.config)?;
    if cfg.sweep.is_empty() {
        return Err(Error::InvalidParameter(
            "config has no sweep cases".into(),
        ));
    }
    let base = base_dir(common);
    let n_jobs = jobs
        .unwrap_or(cfg.sweep.len())
        .min(thread_cap().unwrap_or(usize::MAX))
        .max(1);

    // One instance per worker would re-decompose the operator; building it
    // once and sharing is safe (SpectralSplit and NonlinearMap are immutable).
    let inst = build_instance(&cfg, &base)?;

    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<std::sync::Mutex<Option<(u8, String)>>> =
        cfg.sweep.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..n_jobs.min(cfg.sweep.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= cfg.sweep.len() {
                    break;
                }
                let case = &cfg.sweep[i];
                let mut sched_cfg = cfg.schedule.clone();
                if case.schedule.eps0.is_some() {
                    sched_cfg.eps0 = case.schedule.eps0;
                }
                if case.schedule.rho.is_some() {
                    sched_cfg.rho = case.schedule.rho;
                }
                if case.schedule.k_max.is_some() {
                    sched_cfg.k_max = case.schedule.k_max;
                }
                let mut solver_cfg = cfg.solver.clone();
                if case.solver.tol.is_some() {
                    solver_cfg.tol = case.solver.tol;
                }
                if case.solver.max_iter.is_some() {
                    solver_cfg.max_iter = case.solver.max_iter;
                }
                if case.solver.backend.is_some() {
                    solver_cfg.backend = case.solver.backend;
                }
                if case.solver.start.is_some() {
                    solver_cfg.start = case.solver.start.clone();
                }
                let seed = case.seed.or(common.seed).or(cfg.seed).unwrap_or(0);
                let out = common.output_dir.join(&case.name);
                let outcome = run_continuation_case(
                    &inst,
                    &sched_cfg,
                    &solver_cfg,
                    cfg.norm_cap,
                    seed,
                    &base,
                    &out,
                );
                let entry = match outcome {
                    Ok(code) => (
                        code,
                        match code {
                            0 => "converged".to_string(),
                            2 => "norm_blowup".to_string(),
                            _ => "solver_failure".to_string(),
                        },
                    ),
                    Err(e) => (1, format!("error: {e}")),
                };
                *results[i].lock().unwrap() = Some(entry);
            });
        }
    });

    let summaries: Vec<SweepSummary> = cfg
        .sweep
        .iter()
        .zip(&results)
        .map(|(case, slot)| {
            let (exit_code, status) = slot
                .lock()
                .unwrap()
                .clone()
                .unwrap_or((1, "not run".into()));
            SweepSummary {
                name: case.name.clone(),
                exit_code,
                status,
            }
        })
        .collect();
    write_json(&common.output_dir, "sweep.json", &summaries)?;
    for s in &summaries {
        out!("{}: {} (exit {})", s.name, s.status, s.exit_code);
    }
    let worst = summaries.iter().map(|s| s.exit_code).max().unwrap_or(0);
    // Errors dominate blowups in the aggregate code.
    Ok(if summaries.iter().any(|s| s.exit_code == 1) {
        1
    } else {
        worst
    })
}
