//! Sweep execution and report files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::constants::{self, C};
use crate::error::{Error, Result};
use crate::observables::{
    casimir_polder_force, casimir_polder_force_direct, casimir_pressure, casimir_pressure_real_frequency, decay_rate,
    hall_lateral_force, lamb_shift, purcell_factor, quantum_friction_force, ObservableOptions, ObservableResult,
};

use super::{Axis, Job, ObservableKind, Route, Scenario, Sweep, System};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub allow_unstable: bool,
    /// Worker threads; `None` reads `FLUCTUA_THREADS`, else all cores.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// Some point failed to converge or raised an error.
    Failed,
    /// A sweep hit an unstable system without the override.
    Unstable,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Completed => 0,
            RunStatus::Failed => 1,
            RunStatus::Unstable => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointError {
    pub x: f64,
    pub message: String,
}

/// Manifest entry for one CSV file.
#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub observable: String,
    pub kind: ObservableKind,
    pub sweep: Option<String>,
    pub axis: Option<Axis>,
    /// Unit of the sweep column as written (always SI).
    pub axis_unit: Option<&'static str>,
    pub unit: String,
    pub columns: Vec<String>,
    pub requested_points: usize,
    pub rows: usize,
    pub errors: Vec<PointError>,
    /// Set when the sweep stopped at an unstable point.
    pub stopped_at: Option<f64>,
    pub threshold_bracket: Option<(f64, f64)>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub status: RunStatus,
    pub outputs: Vec<OutputRecord>,
    pub manifest: PathBuf,
}

/// Worker count from `FLUCTUA_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("FLUCTUA_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Seventeen significant digits: enough to round-trip any double.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

fn columns(kind: ObservableKind) -> &'static [&'static str] {
    match kind {
        ObservableKind::DecayRate => &["gamma", "gamma_down", "gamma_up"],
        ObservableKind::Purcell => &["purcell_factor"],
        ObservableKind::LambShift => &["delta_omega"],
        ObservableKind::CpForce => &["fx", "fy", "fz"],
        ObservableKind::CasimirPressure => &["pressure"],
        ObservableKind::Friction => &["fx", "fy"],
        ObservableKind::Hall => &["f_transverse", "f_longitudinal"],
    }
}

fn row_values(kind: ObservableKind, r: &ObservableResult) -> Vec<f64> {
    match kind {
        ObservableKind::DecayRate => vec![r.value[0], r.extras["gamma_down"], r.extras["gamma_up"]],
        ObservableKind::Hall => vec![r.value[0], r.extras["longitudinal"]],
        _ => r.value.clone(),
    }
}

/// Physical axis value (SI) of a sweep point for this job.
fn physical(job: &Job, sweep: &Sweep, x: f64) -> f64 {
    match (&job.system, sweep.axis, sweep.from.unit.as_str()) {
        (System::Emitter { emitter, .. }, Axis::Z, "c/omega0") => x * C / emitter.omega0,
        _ => x,
    }
}

/// Evaluate a job with one axis set to `x` (SI).
pub(crate) fn evaluate(job: &Job, axis: Option<Axis>, x: f64, opts: &ObservableOptions) -> Result<ObservableResult> {
    let mut sys = job.system.clone();
    match (&mut sys, axis) {
        (_, None) => {}
        (System::Emitter { emitter, .. }, Some(Axis::Z)) => emitter.position[2] = x,
        (System::Emitter { emitter, .. }, Some(Axis::Omega0)) => emitter.omega0 = x,
        (System::Plates { gap, .. }, Some(Axis::D)) | (System::Bodies { gap, .. }, Some(Axis::D)) => *gap = x,
        (System::Bodies { v_d, .. }, Some(Axis::V)) if job.kind == ObservableKind::Hall => *v_d = x,
        (System::Bodies { pair, .. }, Some(Axis::V)) => {
            let v = pair.second.velocity;
            let n = v[0].hypot(v[1]);
            let dir = if n > 0.0 { [v[0] / n, v[1] / n] } else { [1.0, 0.0] };
            pair.second.velocity = [dir[0] * x, dir[1] * x];
        }
        (System::Bodies { sigma_xy, .. }, Some(Axis::SigmaXy)) => *sigma_xy = x,
        (_, Some(a)) => {
            return Err(Error::InvalidInput(format!(
                "axis {} does not apply to {}",
                a.name(),
                job.kind.name()
            )))
        }
    }
    match (&sys, job.kind) {
        (System::Emitter { stack, emitter }, ObservableKind::DecayRate) => decay_rate(stack, emitter, opts),
        (System::Emitter { stack, emitter }, ObservableKind::Purcell) => purcell_factor(stack, emitter, opts),
        (System::Emitter { stack, emitter }, ObservableKind::LambShift) => lamb_shift(stack, emitter, opts),
        (System::Emitter { stack, emitter }, ObservableKind::CpForce) => match job.route {
            Route::Default => casimir_polder_force(stack, emitter, opts),
            Route::Alternative => casimir_polder_force_direct(stack, emitter, opts),
        },
        (System::Plates { pair, gap }, _) => match job.route {
            Route::Default => casimir_pressure(pair, *gap, opts),
            Route::Alternative => casimir_pressure_real_frequency(pair, *gap, opts),
        },
        (System::Bodies { pair, gap, .. }, ObservableKind::Friction) => quantum_friction_force(pair, *gap, opts),
        (
            System::Bodies {
                pair,
                gap,
                v_d,
                sigma_xy,
            },
            _,
        ) => hall_lateral_force(pair, *gap, *v_d, *sigma_xy, opts),
        _ => Err(Error::InvalidInput(format!(
            "{} does not match its system",
            job.kind.name()
        ))),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

struct Task<'a> {
    job: &'a Job,
    sweep: Option<&'a Sweep>,
}

/// Run every observable over every sweep that applies to it, writing one
/// CSV per (observable, sweep) and `manifest.json` into `out_dir`.
///
/// Points are evaluated in parallel in batches of the worker count and
/// collected in sweep order, so CSV bodies do not depend on scheduling. A
/// sweep stops at its first unstable point unless unstable systems are
/// allowed; the threshold bracket is recorded in the manifest.
pub fn run(s: &Scenario, out_dir: &Path, ro: &RunOptions) -> Result<RunReport> {
    let t0 = Instant::now();
    let jobs = s.resolve()?;
    for sw in &s.sweeps {
        if sw.points == 0 {
            return Err(Error::Scenario(vec![format!("sweep {} is empty", sw.name)]));
        }
    }
    let opts = s.numerics.options(ro.allow_unstable);
    let threads = ro
        .threads
        .or_else(threads_from_env)
        .unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let mut tasks = Vec::new();
    for job in &jobs {
        let sweeps = s.sweeps_for(&job.name);
        if sweeps.is_empty() {
            tasks.push(Task { job, sweep: None });
        }
        tasks.extend(sweeps.into_iter().map(|sw| Task { job, sweep: Some(sw) }));
    }

    let mut outputs = Vec::new();
    let mut status = RunStatus::Completed;
    for t in tasks {
        let rec = run_task(&t, &opts, &pool, threads, out_dir)?;
        if rec.stopped_at.is_some() {
            status = RunStatus::Unstable;
        } else if !rec.errors.is_empty() && status == RunStatus::Completed {
            status = RunStatus::Failed;
        }
        outputs.push(rec);
    }

    let manifest = serde_json::json!({
        "fluctua_version": env!("CARGO_PKG_VERSION"),
        "status": status,
        "exit_code": status.exit_code(),
        "scenario": s,
        "effective_options": opts,
        "constants": constants::table(),
        "run": { "allow_unstable": ro.allow_unstable, "threads": threads },
        "outputs": outputs,
        "seconds": t0.elapsed().as_secs_f64(),
    });
    let path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(RunReport {
        status,
        outputs,
        manifest: path,
    })
}

fn run_task(
    t: &Task,
    opts: &ObservableOptions,
    pool: &rayon::ThreadPool,
    batch: usize,
    out_dir: &Path,
) -> Result<OutputRecord> {
    let t0 = Instant::now();
    let (axis, xs) = match t.sweep {
        Some(sw) => (
            Some(sw.axis),
            sw.values()
                .into_iter()
                .map(|x| physical(t.job, sw, x))
                .collect::<Vec<_>>(),
        ),
        None => (None, vec![0.0]),
    };
    let file = match t.sweep {
        Some(sw) => format!("{}__{}.csv", t.job.name, sw.name),
        None => format!("{}.csv", t.job.name),
    };
    let cols = columns(t.job.kind);
    let mut csv = String::new();
    let head: Vec<&str> = std::iter::once(axis.map_or("point", Axis::name))
        .chain(cols.iter().copied())
        .chain(["abs_error", "stable"])
        .collect();
    csv.push_str(&head.join(","));
    csv.push('\n');

    let mut rec = OutputRecord {
        file: file.clone(),
        observable: t.job.name.clone(),
        kind: t.job.kind,
        sweep: t.sweep.map(|s| s.name.clone()),
        axis,
        axis_unit: axis.map(Axis::unit),
        unit: String::new(),
        columns: head.iter().map(|s| s.to_string()).collect(),
        requested_points: xs.len(),
        rows: 0,
        errors: Vec::new(),
        stopped_at: None,
        threshold_bracket: None,
        seconds: 0.0,
    };
    'outer: for chunk in xs.chunks(batch.max(1)) {
        let results: Vec<Result<ObservableResult>> =
            pool.install(|| chunk.par_iter().map(|&x| evaluate(t.job, axis, x, opts)).collect());
        for (&x, r) in chunk.iter().zip(results) {
            match r {
                Ok(r) => {
                    rec.unit.clone_from(&r.unit);
                    let _ = write!(csv, "{}", format_value(x));
                    for v in row_values(t.job.kind, &r) {
                        let _ = write!(csv, ",{}", format_value(v));
                    }
                    let _ = writeln!(csv, ",{},{}", format_value(r.abs_error), u8::from(r.stable));
                    rec.rows += 1;
                }
                Err(Error::Unstable {
                    reason,
                    threshold_bracket,
                }) => {
                    rec.errors.push(PointError { x, message: reason });
                    rec.stopped_at = Some(x);
                    rec.threshold_bracket = threshold_bracket;
                    break 'outer;
                }
                Err(e) => rec.errors.push(PointError {
                    x,
                    message: e.to_string(),
                }),
            }
        }
    }
    let path = out_dir.join(&file);
    std::fs::write(&path, csv).map_err(io_err(&path))?;
    rec.seconds = t0.elapsed().as_secs_f64();
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.718281828459045e-300, 6.02214076e23] {
            let s = format_value(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            assert_eq!(s.split('e').next().unwrap().trim_start_matches('-').len(), 18);
        }
    }
}
