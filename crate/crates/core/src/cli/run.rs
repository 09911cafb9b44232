use std::f64::consts::PI;
use std::fmt;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use crate::error::Error;
use crate::hilbert::{FockSpace, Mode};
use crate::liouvillian::{build_generator_in, steady_state, StateDiagnostics};
use crate::magnonics::{magnon_dispersion, EffectiveParams};
use crate::protocols::{
    backheating_floor, run_cooling_with, run_q_switched_with, sweep_steady, weak_coupling_steady,
    CoolingOptions, QSwitchSchedule, SweepAxis, SweepOptions,
};
use crate::units::to_khz;

use super::config::{
    ConfigError, ExperimentConfig, Resolved, RunMode, DEFAULT_Q_SWITCH_CONTRAST,
};
use super::output::{
    fmt_f64, output_path, status_cell, write_csv, write_metadata, Metadata, RunMeta, SolverMeta,
    SpaceMeta, PRECEDENCE, UNIT_CONVENTION,
};

pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "n_magnon", "n_photon", "entropy_magnon", "trace_error"];

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Solver(Error),
    Io(PathBuf, std::io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error at {e}"),
            RunError::Solver(e) => write!(f, "solver error: {e}"),
            RunError::Io(p, e) => write!(f, "cannot write {}: {e}", p.display()),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Solver(e)
    }
}

/// Files written by a run, in order.
#[derive(Debug, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

fn space_of(cfg: &ExperimentConfig) -> Result<FockSpace, RunError> {
    FockSpace::new(cfg.dim_magnon, cfg.dim_photon).map_err(|e| {
        let key = if cfg.dim_magnon < 2 { "space.dim_magnon" } else { "space.dim_photon" };
        RunError::Config(ConfigError::new(key, e.to_string()))
    })
}

/// 10 / (slowest relevant relaxation rate): κ₀ plus the cavity-induced
/// rate, which is 4G²/κ_h at weak coupling and saturates at κ_h/2.
pub fn default_t_end(p: &EffectiveParams) -> Option<f64> {
    let induced = if p.kappa_h > 0.0 {
        (4.0 * p.g_h * p.g_h / p.kappa_h).min(p.kappa_h / 2.0)
    } else {
        0.0
    };
    let rate = p.kappa_0 + induced;
    (rate > 0.0).then(|| 10.0 / rate)
}

fn opt(x: Option<f64>) -> serde_json::Value {
    match x {
        Some(v) if v.is_finite() => json!(v),
        _ => serde_json::Value::Null,
    }
}

fn diagnostics_json(d: &StateDiagnostics) -> serde_json::Value {
    serde_json::to_value(d).unwrap_or(serde_json::Value::Null)
}

fn pool(jobs: Option<NonZeroUsize>) -> Result<rayon::ThreadPool, RunError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j.get());
    }
    b.build()
        .map_err(|e| RunError::Config(ConfigError::new("--jobs", e.to_string())))
}

/// Executes `cfg`, writing outputs into `out_dir`.
pub fn execute(cfg: &ExperimentConfig, out_dir: &Path, jobs: Option<NonZeroUsize>) -> Result<RunReport, RunError> {
    let space = space_of(cfg)?;
    let resolved = cfg.resolve_all()?;
    for r in &resolved {
        r.params.validate().map_err(|e| match e {
            Error::InvalidArgument { name, reason } => {
                RunError::Config(ConfigError::new(format!("overrides.{name}"), reason))
            }
            other => RunError::Solver(other),
        })?;
    }
    if matches!(cfg.mode, RunMode::Sweep | RunMode::Qswitch) && resolved.len() > 1 {
        return Err(ConfigError::new("variants", "sweep and qswitch modes take a single base run").into());
    }
    let pool = pool(jobs)?;
    let mut report = RunReport::default();
    let runs = match cfg.mode {
        RunMode::Params => params_mode(&resolved, &mut report),
        RunMode::Dispersion => dispersion_mode(cfg, out_dir, &resolved, &mut report)?,
        RunMode::Cool => pool.install(|| cool_mode(cfg, space, out_dir, &resolved, &mut report))?,
        RunMode::Steady => pool.install(|| steady_mode(cfg, space, out_dir, &resolved, &mut report))?,
        RunMode::Sweep => sweep_mode(cfg, space, out_dir, &resolved[0], jobs, &mut report)?,
        RunMode::Qswitch => pool.install(|| qswitch_mode(cfg, space, out_dir, &resolved[0], &mut report))?,
    };

    let meta_path = output_path(out_dir, &cfg.name, "", "json");
    let meta = Metadata {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        name: &cfg.name,
        mode: cfg.mode,
        unit_convention: UNIT_CONVENTION,
        precedence: PRECEDENCE,
        inputs: &cfg.inputs,
        space: SpaceMeta {
            dim_magnon: cfg.dim_magnon,
            dim_photon: cfg.dim_photon,
        },
        solver: SolverMeta::new(cfg.frame, cfg.control),
        runs,
        outputs: report.files.iter().map(|p| file_name(p)).collect(),
    };
    write_metadata(&meta_path, &meta).map_err(|e| RunError::Io(meta_path.clone(), e))?;
    report.files.push(meta_path);
    Ok(report)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn run_meta(r: &Resolved, output: Option<&Path>, results: serde_json::Value) -> RunMeta {
    RunMeta {
        label: r.label.clone(),
        params: r.params,
        sources: r.sources.clone(),
        coupling_per_field: r.coupling_per_field,
        output: output.map(file_name),
        results,
    }
}

/// Human-readable summary of resolved parameters.
pub fn describe(r: &Resolved) -> Vec<String> {
    let p = &r.params;
    let mut lines = vec![match &r.label {
        Some(l) => format!("run {l}"),
        None => "run".to_string(),
    }];
    let rate = |name: &str, v: f64| format!("  {name:<9} = {} rad/s ({} kHz)", fmt_f64(v), fmt_f64(to_khz(v)));
    lines.push(rate("omega_0", p.omega_0));
    lines.push(rate("detuning", p.detuning));
    lines.push(rate("G_h", p.g_h));
    lines.push(rate("kappa_0", p.kappa_0));
    lines.push(rate("kappa_h", p.kappa_h));
    lines.push(format!("  {:<9} = {}", "n_th", fmt_f64(p.n_th)));
    if let Some(c) = r.coupling_per_field {
        // rad/s per V/m → kHz per MV/m
        lines.push(format!("  G_h/E_pump = {:.4} kHz per MV/m", to_khz(c * 1e6)));
    }
    lines
}

fn params_mode(resolved: &[Resolved], report: &mut RunReport) -> Vec<RunMeta> {
    resolved
        .iter()
        .map(|r| {
            report.lines.extend(describe(r));
            let per_field = r.coupling_per_field.map(|c| to_khz(c * 1e6));
            run_meta(r, None, json!({ "G_h_per_E_pump_kHz_per_MV_m": opt(per_field) }))
        })
        .collect()
}

fn dispersion_mode(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    resolved: &[Resolved],
    report: &mut RunReport,
) -> Result<Vec<RunMeta>, RunError> {
    let phys = &cfg.physical.as_ref().expect("checked at parse time").config;
    if let Err((name, reason)) = phys.validate() {
        return Err(ConfigError::new(format!("physical.{name}"), reason).into());
    }
    let spec = cfg.dispersion.clone().unwrap_or(super::config::DispersionSpec {
        direction: [1.0, 0.0, 0.0],
        k_max: None,
        points: 101,
    });
    let norm = spec.direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    let unit = spec.direction.map(|x| x / norm);
    let k_max = spec.k_max.unwrap_or(2.0 * PI / phys.lattice.constant);
    let rows: Vec<Vec<String>> = (0..spec.points)
        .map(|j| {
            let k = k_max * j as f64 / (spec.points - 1) as f64;
            let w = magnon_dispersion(unit.map(|u| u * k), phys);
            vec![fmt_f64(k), fmt_f64(w)]
        })
        .collect();
    let path = output_path(out_dir, &cfg.name, "dispersion", "csv");
    write_csv(&path, &["k".into(), "omega".into()], &rows).map_err(|e| RunError::Io(path.clone(), e))?;
    report.lines.push(format!("wrote {}", path.display()));
    report.files.push(path.clone());
    Ok(resolved
        .iter()
        .map(|r| run_meta(r, Some(&path), json!({ "direction": unit, "k_max": k_max, "points": spec.points })))
        .collect())
}

fn cool_mode(
    cfg: &ExperimentConfig,
    space: FockSpace,
    out_dir: &Path,
    resolved: &[Resolved],
    report: &mut RunReport,
) -> Result<Vec<RunMeta>, RunError> {
    let opts = CoolingOptions {
        samples: cfg.samples,
        frame: cfg.frame,
        control: cfg.control,
    };
    let mut t_ends = Vec::with_capacity(resolved.len());
    for r in resolved {
        let t = match cfg.t_end {
            Some(t) => t,
            None => default_t_end(&r.params)
                .ok_or_else(|| ConfigError::new("time.t_end", "required when every rate is zero"))?,
        };
        t_ends.push(t);
    }
    let outcomes: Vec<_> = resolved
        .par_iter()
        .zip(&t_ends)
        .map(|(r, &t_end)| run_cooling_with(&r.params, space, t_end, &opts))
        .collect();

    let mut metas = Vec::new();
    for ((r, out), &t_end) in resolved.iter().zip(outcomes).zip(&t_ends) {
        let out = out?;
        let tr = &out.trajectory;
        let rows: Vec<Vec<String>> = (0..tr.len())
            .map(|i| {
                vec![
                    fmt_f64(tr.times[i]),
                    fmt_f64(tr.n_magnon[i]),
                    fmt_f64(tr.n_photon[i]),
                    fmt_f64(tr.entropy_magnon[i]),
                    fmt_f64(tr.trace_error[i]),
                ]
            })
            .collect();
        let path = output_path(out_dir, &cfg.name, r.label.as_deref().unwrap_or(""), "csv");
        let header: Vec<String> = TRAJECTORY_HEADER.iter().map(|s| s.to_string()).collect();
        write_csv(&path, &header, &rows).map_err(|e| RunError::Io(path.clone(), e))?;
        report.lines.push(format!(
            "wrote {} (n0_steady = {})",
            path.display(),
            fmt_f64(out.n0_steady)
        ));
        report.files.push(path.clone());
        let p = &r.params;
        let results = json!({
            "t_end": t_end,
            "samples": tr.len(),
            "n0_steady": out.n0_steady,
            "entropy_steady": out.entropy_steady,
            "entropy_thermal_ref": out.entropy_thermal_ref,
            "swap_frequency": opt(out.swap_frequency),
            "envelope_rate": opt(out.envelope_rate),
            "envelope_fit_failed": out.envelope_fit_failed,
            "n0_closed_form": opt(weak_coupling_steady(p.n_th, p.g_h, p.kappa_0, p.kappa_h).ok()),
            "n0_backheating_floor": opt(backheating_floor(p.n_th, p.kappa_0, p.kappa_h).ok()),
            "max_trace_error": tr.trace_error.iter().cloned().fold(0.0, f64::max),
            "min_eigenvalue": tr.min_eigenvalue.iter().cloned().fold(f64::INFINITY, f64::min),
            "accepted_steps": tr.accepted_steps,
            "rejected_steps": tr.rejected_steps,
            "final_state": diagnostics_json(&StateDiagnostics::of(&tr.final_state)),
        });
        metas.push(run_meta(r, Some(&path), results));
    }
    Ok(metas)
}

fn steady_mode(
    cfg: &ExperimentConfig,
    space: FockSpace,
    out_dir: &Path,
    resolved: &[Resolved],
    report: &mut RunReport,
) -> Result<Vec<RunMeta>, RunError> {
    let states: Vec<_> = resolved
        .par_iter()
        .map(|r| build_generator_in(&r.params, space, cfg.frame).and_then(|g| steady_state(&g)))
        .collect();
    let path = output_path(out_dir, &cfg.name, "steady", "csv");
    let header: Vec<String> = ["label", "n_magnon", "n_photon", "entropy_magnon", "n_magnon_closed_form"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    let mut metas = Vec::new();
    for (r, rho) in resolved.iter().zip(states) {
        let rho = rho?;
        let p = &r.params;
        let closed = weak_coupling_steady(p.n_th, p.g_h, p.kappa_0, p.kappa_h).ok();
        let (na, nb) = (rho.population(Mode::Magnon), rho.population(Mode::Photon));
        let s = rho.partial_trace(Mode::Magnon).entropy();
        rows.push(vec![
            r.label.clone().unwrap_or_default(),
            fmt_f64(na),
            fmt_f64(nb),
            fmt_f64(s),
            closed.map(fmt_f64).unwrap_or_else(|| "nan".into()),
        ]);
        report.lines.push(format!(
            "{}: n_magnon = {}",
            r.label.as_deref().unwrap_or("run"),
            fmt_f64(na)
        ));
        metas.push(run_meta(
            r,
            Some(&path),
            json!({
                "n_magnon": na,
                "n_photon": nb,
                "entropy_magnon": s,
                "n0_closed_form": opt(closed),
                "n0_backheating_floor": opt(backheating_floor(p.n_th, p.kappa_0, p.kappa_h).ok()),
                "state": diagnostics_json(&StateDiagnostics::of(&rho)),
            }),
        ));
    }
    write_csv(&path, &header, &rows).map_err(|e| RunError::Io(path.clone(), e))?;
    report.lines.push(format!("wrote {}", path.display()));
    report.files.push(path);
    Ok(metas)
}

fn sweep_mode(
    cfg: &ExperimentConfig,
    space: FockSpace,
    out_dir: &Path,
    base: &Resolved,
    jobs: Option<NonZeroUsize>,
    report: &mut RunReport,
) -> Result<Vec<RunMeta>, RunError> {
    let axes = cfg
        .sweep_axes
        .iter()
        .map(|a| SweepAxis::new(a.param, a.values.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let points = sweep_steady(&base.params, space, &axes, &SweepOptions { jobs })?;
    let mut header: Vec<String> = axes.iter().map(|a| a.param().name().to_string()).collect();
    header.extend(["n0", "n0_closed_form", "status"].map(String::from));
    let mut failures = 0;
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|pt| {
            let mut row: Vec<String> = pt.coords.iter().map(|&c| fmt_f64(c)).collect();
            match &pt.n0 {
                Ok(n) => {
                    row.push(fmt_f64(*n));
                    row.push(pt.closed_form.map(fmt_f64).unwrap_or_else(|| "nan".into()));
                    row.push("ok".into());
                }
                Err(e) => {
                    failures += 1;
                    row.push("nan".into());
                    row.push(pt.closed_form.map(fmt_f64).unwrap_or_else(|| "nan".into()));
                    row.push(status_cell(&format!("error: {e}")));
                }
            }
            row
        })
        .collect();
    let path = output_path(out_dir, &cfg.name, "sweep", "csv");
    write_csv(&path, &header, &rows).map_err(|e| RunError::Io(path.clone(), e))?;
    report.lines.push(format!(
        "wrote {} ({} points, {failures} failed)",
        path.display(),
        rows.len()
    ));
    report.files.push(path.clone());
    let axes_json: Vec<_> = axes
        .iter()
        .map(|a| json!({ "param": a.param().name(), "values": a.values() }))
        .collect();
    Ok(vec![run_meta(
        base,
        Some(&path),
        json!({ "axes": axes_json, "points": rows.len(), "failed_points": failures }),
    )])
}

fn qswitch_mode(
    cfg: &ExperimentConfig,
    space: FockSpace,
    out_dir: &Path,
    base: &Resolved,
    report: &mut RunReport,
) -> Result<Vec<RunMeta>, RunError> {
    let spec = cfg.qswitch.as_ref().expect("checked at parse time");
    let kappa_low = spec.kappa_low.unwrap_or(base.params.kappa_h);
    let kappa_high = spec.kappa_high.unwrap_or(DEFAULT_Q_SWITCH_CONTRAST * kappa_low);
    let opts = CoolingOptions {
        samples: cfg.samples,
        frame: cfg.frame,
        control: cfg.control,
    };
    let floor = backheating_floor(base.params.n_th, base.params.kappa_0, base.params.kappa_h).ok();

    let rows_raw: Vec<(f64, Result<f64, Error>, Result<f64, Error>)> = spec
        .g_values
        .par_iter()
        .map(|&g| {
            let mut p = base.params;
            p.g_h = g;
            let continuous = build_generator_in(&p, space, cfg.frame)
                .and_then(|gen| steady_state(&gen))
                .map(|rho| rho.population(Mode::Magnon));
            let hold = match spec.hold_time {
                Some(h) => h,
                None => PI / (2.0 * g),
            };
            let dump = spec.dump_time.unwrap_or(5.0 / kappa_high);
            let switched = QSwitchSchedule::new(kappa_low, kappa_high, hold, dump, spec.cycles)
                .and_then(|schedule| run_q_switched_with(&p, space, &schedule, &opts))
                .map(|o| o.n0_steady);
            (g, continuous, switched)
        })
        .collect();

    let header: Vec<String> = ["G_h", "n0_continuous", "n0_q_switched", "n0_floor", "status"]
        .map(String::from)
        .to_vec();
    let mut failures = 0;
    let rows: Vec<Vec<String>> = rows_raw
        .iter()
        .map(|(g, c, q)| {
            let cell = |r: &Result<f64, Error>| r.as_ref().map(|v| fmt_f64(*v)).unwrap_or_else(|_| "nan".into());
            let status = match (c, q) {
                (Ok(_), Ok(_)) => "ok".to_string(),
                (Err(e), _) | (_, Err(e)) => {
                    failures += 1;
                    status_cell(&format!("error: {e}"))
                }
            };
            vec![
                fmt_f64(*g),
                cell(c),
                cell(q),
                floor.map(fmt_f64).unwrap_or_else(|| "nan".into()),
                status,
            ]
        })
        .collect();
    let path = output_path(out_dir, &cfg.name, "qswitch", "csv");
    write_csv(&path, &header, &rows).map_err(|e| RunError::Io(path.clone(), e))?;
    report.lines.push(format!(
        "wrote {} ({} points, {failures} failed)",
        path.display(),
        rows.len()
    ));
    report.files.push(path.clone());
    Ok(vec![run_meta(
        base,
        Some(&path),
        json!({
            "kappa_low": kappa_low,
            "kappa_high": kappa_high,
            "hold_time": opt(spec.hold_time),
            "hold_time_default": "pi / (2 G_h)",
            "dump_time": spec.dump_time.unwrap_or(5.0 / kappa_high),
            "cycles": spec.cycles.get(),
            "points": rows.len(),
            "failed_points": failures,
        }),
    )])
}
