//! Executes a validated configuration and writes its tables.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::dynamics::{evolve, steady_state_numeric, uniform_times, EvolveOptions, ModelSpec, Trajectory};
use crate::error::Error;
use crate::experiments::{
    default_scaling_ns, disorder_ensemble, fit_decay, ideal_disorder_spec, r_grid, scaling_study, sweep_r,
    CollectiveParams, DisorderModel, EnsembleMode, ScalingFit,
};
use crate::observables::{husimi_q, project_q_perp, squeezing_report};
use crate::spin::{collective_ops, dicke_state, embed_symmetric, ops_for, DensityMatrix, HalfInt};
use crate::steadystate::{analytic_steady_state, steady_state_of};

use super::config::{Command, ConfigError, EnsembleKind, Format, ModelKind, RunConfig};
use super::table::ResultTable;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver: {0}")]
    Solver(#[from] Error),
    #[error("io: {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solver(Error::InvalidParameter { .. } | Error::TooLarge(_)) => 2,
            RunError::Solver(_) => 3,
            RunError::Io { .. } => 4,
        }
    }
}

type RunResult<T> = std::result::Result<T, RunError>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn params(cfg: &RunConfig) -> CollectiveParams {
    CollectiveParams {
        a: cfg.model.a,
        delta: cfg.model.delta,
        alpha: cfg.model.alpha,
    }
}

fn initial_state(cfg: &RunConfig, m: f64) -> RunResult<DensityMatrix> {
    let n = cfg.model.n;
    let hm = HalfInt::from_f64(m).map_err(|e| ConfigError(format!("run.initial_m: {e}")))?;
    let rho = dicke_state(n, hm)?;
    Ok(match cfg.model.kind {
        ModelKind::Collective => rho,
        ModelKind::Full => embed_symmetric(&rho, n)?,
    })
}

fn nan_or(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::NAN)
}

/// Builds every table of the configured command.
pub fn execute(cfg: &RunConfig) -> RunResult<Vec<ResultTable>> {
    cfg.validate()?;
    let mut tables = match cfg.command {
        Command::Evolve => run_evolve(cfg)?,
        Command::Steady => run_steady(cfg)?,
        Command::Qfunc => run_qfunc(cfg)?,
        Command::SweepR => run_sweep(cfg)?,
        Command::Scaling => run_scaling(cfg)?,
        Command::Disorder => run_disorder(cfg)?,
    };
    let config = cfg.to_json();
    for t in &mut tables {
        let own = std::mem::take(&mut t.metadata);
        t.meta("spinsqueeze", VERSION);
        t.meta("command", cfg.command.name());
        t.meta("table", t.name.clone());
        t.meta("seed", cfg.seed);
        t.meta("config", &config);
        t.metadata.extend(own);
    }
    Ok(tables)
}

fn run_evolve(cfg: &RunConfig) -> RunResult<Vec<ResultTable>> {
    let times = uniform_times(cfg.run.t_end, cfg.run.n_times);
    let series: Vec<(f64, f64)> = cfg
        .r_values()
        .into_iter()
        .flat_map(|r| cfg.initial_m().into_iter().map(move |m| (r, m)))
        .collect();
    let specs: Vec<ModelSpec> = series.iter().map(|&(r, _)| cfg.model_spec(r)).collect::<Result<_, _>>()?;
    let runs: Vec<(Trajectory, f64)> = series
        .par_iter()
        .zip(&specs)
        .map(|(&(_, m), spec)| -> RunResult<(Trajectory, f64)> {
            let tr = evolve(spec, &initial_state(cfg, m)?, &times, &EvolveOptions::default())?;
            let ss = steady_state_of(spec).and_then(|rho| squeezing_report(&rho, &ops_for(rho.basis)?));
            let ss = match ss {
                Ok(rep) => rep.inverse_xi(),
                Err(Error::DegenerateSteadyState { .. }) => f64::NAN,
                Err(e) => return Err(e.into()),
            };
            Ok((tr, ss))
        })
        .collect::<RunResult<_>>()?;

    let mut traj = ResultTable::new(
        "trajectory",
        &[("r", "1"), ("m0", "1"), ("t", "1/A"), ("inverse_xi_sq", "1"), ("xi_r_sq", "1"), ("mean_length", "1")],
    );
    let mut summary = ResultTable::new(
        "summary",
        &[("r", "1"), ("m0", "1"), ("inverse_xi_sq_final", "1"), ("inverse_xi_sq_steady", "1")],
    );
    for (&(r, m), (tr, ss)) in series.iter().zip(&runs) {
        for (t, obs) in tr.times.iter().zip(&tr.observables) {
            traj.push(vec![
                r,
                m,
                *t,
                nan_or(obs.as_ref().map(|o| o.inverse_xi())),
                nan_or(obs.as_ref().map(|o| o.xi_r_sq)),
                nan_or(obs.as_ref().map(|o| o.mean_length())),
            ]);
        }
        let last = tr.observables.last().and_then(|o| o.as_ref()).map(|o| o.inverse_xi());
        summary.push(vec![r, m, nan_or(last), *ss]);
    }
    summary.meta("note", "inverse_xi_sq_steady is NaN when the steady state is not unique");
    Ok(vec![traj, summary])
}

fn run_steady(cfg: &RunConfig) -> RunResult<Vec<ResultTable>> {
    let mut t = ResultTable::new(
        "steady",
        &[
            ("n", "1"),
            ("r", "1"),
            ("inverse_xi_sq", "1"),
            ("xi_r_sq", "1"),
            ("theta_min", "rad"),
            ("min_azimuth", "rad"),
            ("mean_length", "1"),
        ],
    );
    for r in cfg.r_values() {
        let spec = cfg.model_spec(r)?;
        let rho = match cfg.model.kind {
            ModelKind::Collective => steady_state_of(&spec)?,
            ModelKind::Full => steady_state_numeric(&spec)?,
        };
        let rep = squeezing_report(&rho, &ops_for(rho.basis)?)?;
        t.push(vec![
            cfg.model.n as f64,
            r,
            rep.inverse_xi(),
            rep.xi_r_sq,
            rep.theta_min,
            rep.min_azimuth(),
            rep.mean_length(),
        ]);
    }
    Ok(vec![t])
}

fn run_qfunc(cfg: &RunConfig) -> RunResult<Vec<ResultTable>> {
    if cfg.model.kind != ModelKind::Collective {
        return Err(ConfigError("model.kind: qfunc needs the collective model".into()).into());
    }
    let n = cfg.model.n;
    let spec = cfg.model_spec(cfg.model.r)?;
    let mut snaps = cfg.run.snapshot_times.clone();
    snaps.sort_by(f64::total_cmp);
    snaps.dedup();
    let t_end = snaps.last().copied().unwrap_or(0.0);
    let opts = EvolveOptions {
        snapshot_times: snaps.clone(),
        ..EvolveOptions::default()
    };
    let m0 = cfg.initial_m()[0];
    let tr = evolve(&spec, &initial_state(cfg, m0)?, &[0.0, t_end], &opts)?;
    let ops = collective_ops(n)?;
    let [nt, np] = cfg.run.q_grid;

    let mut q = ResultTable::new("q", &[("t", "1/A"), ("theta", "rad"), ("phi", "rad"), ("q", "1/sr")]);
    let mut planar = ResultTable::new("planar", &[("t", "1/A"), ("u", "1"), ("v", "1"), ("q", "1/sr")]);
    let mut summary = ResultTable::new(
        "snapshots",
        &[
            ("t", "1/A"),
            ("inverse_xi_sq", "1"),
            ("theta0", "rad"),
            ("phi0", "rad"),
            ("min_azimuth", "rad"),
            ("q_integral", "1"),
            ("q_min", "1/sr"),
            ("planar_minor_axis", "rad"),
        ],
    );
    for &ts in &snaps {
        let rho = &tr
            .snapshots
            .iter()
            .find(|(t, _)| *t == ts)
            .ok_or_else(|| Error::InvariantViolation(format!("no snapshot kept at t = {ts}")))?
            .1;
        let grid = husimi_q(rho, nt, np)?;
        for (it, &th) in grid.theta.iter().enumerate() {
            for (ip, &ph) in grid.phi.iter().enumerate() {
                q.push(vec![ts, th, ph, grid.value(it, ip)]);
            }
        }
        let rep = squeezing_report(rho, &ops)?;
        let mut minor = f64::NAN;
        if cfg.run.planar_points > 0 {
            let pq = project_q_perp(rho, &rep, cfg.run.planar_points, cfg.run.planar_extent)?;
            let nv = pq.v.len();
            for (iu, &u) in pq.u.iter().enumerate() {
                for (iv, &v) in pq.v.iter().enumerate() {
                    planar.push(vec![ts, u, v, pq.values[iu * nv + iv]]);
                }
            }
            minor = pq.minor_axis_angle();
        }
        summary.push(vec![
            ts,
            rep.inverse_xi(),
            rep.theta0,
            rep.phi0,
            rep.min_azimuth(),
            grid.integral(),
            grid.min_value(),
            minor,
        ]);
    }
    planar.meta(
        "projection",
        "orthographic from the hemisphere around the mean spin; u along n1, v along n2",
    );
    let mut out = vec![q, summary];
    if cfg.run.planar_points > 0 {
        out.insert(1, planar);
    }
    Ok(out)
}

fn ns_or_model(cfg: &RunConfig) -> Vec<usize> {
    cfg.run.n_values.clone().unwrap_or_else(|| vec![cfg.model.n])
}

fn run_sweep(cfg: &RunConfig) -> RunResult<Vec<ResultTable>> {
    let p = params(cfg);
    let grid = r_grid(cfg.run.r_max, cfg.run.r_step);
    let numeric = cfg.run.numeric_check;
    let mut cols = vec![("n", "1"), ("r", "1"), ("inverse_xi_sq", "1")];
    if numeric {
        cols.push(("inverse_xi_sq_numeric", "1"));
    }
    let mut sweep = ResultTable::new("sweep", &cols);
    let mut range = ResultTable::new(
        "range",
        &[("n", "1"), ("r_lo", "1"), ("r_hi", "1"), ("r_best", "1"), ("inverse_xi_sq_best", "1")],
    );
    for n in ns_or_model(cfg) {
        let sw = sweep_r(n, &grid, &p)?;
        let nums: Vec<f64> = if numeric {
            grid.par_iter()
                .map(|&r| -> RunResult<f64> {
                    let spec = ModelSpec::collective(n, p.a, p.delta, cfg.reservoir(r)?)?;
                    let rho = steady_state_numeric(&spec)?;
                    Ok(squeezing_report(&rho, &collective_ops(n)?)?.inverse_xi())
                })
                .collect::<RunResult<_>>()?
        } else {
            Vec::new()
        };
        for (k, pt) in sw.points.iter().enumerate() {
            let mut row = vec![n as f64, pt.r, pt.inverse_xi];
            if numeric {
                row.push(nums[k]);
            }
            sweep.push(row);
        }
        let best = sw
            .points
            .iter()
            .max_by(|a, b| a.inverse_xi.total_cmp(&b.inverse_xi))
            .expect("non-empty grid");
        let (lo, hi) = sw.squeezed_range.unwrap_or((f64::NAN, f64::NAN));
        range.push(vec![n as f64, lo, hi, best.r, best.inverse_xi]);
    }
    range.meta("note", "r_lo and r_hi bound the grid points around the maximum with 1/xi^2 > 1");
    Ok(vec![sweep, range])
}

fn fit_row(t: &mut ResultTable, id: f64, f: &ScalingFit) {
    t.push(vec![id, f.param_a, f.param_b, f.residual_rms]);
}

fn run_scaling(cfg: &RunConfig) -> RunResult<Vec<ResultTable>> {
    let p = params(cfg);
    let ns = cfg.run.n_values.clone().unwrap_or_else(default_scaling_ns);
    let study = scaling_study(&ns, &p)?;
    let grid = r_grid(cfg.run.r_max, cfg.run.r_step);
    let ranges: Vec<Option<(f64, f64)>> = ns
        .par_iter()
        .map(|&n| sweep_r(n, &grid, &p).map(|s| s.squeezed_range))
        .collect::<Result<_, _>>()?;

    let mut optima = ResultTable::new(
        "optima",
        &[
            ("n", "1"),
            ("r_opt", "1"),
            ("inverse_xi_sq_max", "1"),
            ("xi_r_sq_min", "1"),
            ("r_lo", "1"),
            ("r_hi", "1"),
        ],
    );
    for (o, rg) in study.optima.iter().zip(&ranges) {
        let (lo, hi) = rg.unwrap_or((f64::NAN, f64::NAN));
        optima.push(vec![o.n as f64, o.r_opt, o.inverse_xi_max, 1.0 / o.inverse_xi_max, lo, hi]);
    }
    let mut fits = ResultTable::new("fits", &[("quantity", "1"), ("a", "1"), ("b", "1"), ("residual_rms", "1")]);
    fit_row(&mut fits, 0.0, &study.xi_min);
    fit_row(&mut fits, 1.0, &study.inverse_xi_max);
    fit_row(&mut fits, 2.0, &study.r_opt);
    fits.meta("quantity 0", "xi_r_sq_min = a N^b");
    fits.meta("quantity 1", "inverse_xi_sq_max = a N^b");
    fits.meta("quantity 2", "r_opt = a ln N + b");
    Ok(vec![optima, fits])
}

fn ideal_trajectory(cfg: &RunConfig, times: &[f64]) -> RunResult<Vec<f64>> {
    let n = cfg.model.n;
    let spec = ModelSpec::collective(n, cfg.model.a, cfg.model.delta, cfg.reservoir(cfg.model.r)?)?;
    let tr = evolve(&spec, &dicke_state(n, HalfInt::from_twice(-(n as i64)))?, times, &EvolveOptions::default())?;
    Ok(tr.inverse_xi().into_iter().map(nan_or).collect())
}

fn run_disorder(cfg: &RunConfig) -> RunResult<Vec<ResultTable>> {
    let n = cfg.model.n;
    let geom = cfg.geometry()?;
    let model = DisorderModel {
        geom,
        delta: cfg.model.delta,
        reservoir: cfg.reservoir(cfg.model.r)?,
    };
    let kind = cfg.run.ensemble;
    let times = uniform_times(cfg.run.t_end, cfg.run.n_times);
    let ideal = if kind == EnsembleKind::Steady {
        Vec::new()
    } else {
        ideal_trajectory(cfg, &times)?
    };
    let collective = ModelSpec::collective(n, cfg.model.a, cfg.model.delta, model.reservoir)?;
    let ideal_steady = squeezing_report(
        &analytic_steady_state(n, cfg.model.a, collective.delta_n(), &model.reservoir)?,
        &collective_ops(n)?,
    )?
    .inverse_xi();

    let mut traj = ResultTable::new(
        "trajectory",
        &[("w", "pi zeta"), ("t", "1/A"), ("mean", "1"), ("std", "1"), ("ideal", "1")],
    );
    let mut steady = ResultTable::new(
        "steady",
        &[("w", "pi zeta"), ("mean", "1"), ("std", "1"), ("n_ok", "1"), ("n_failed", "1"), ("ideal", "1")],
    );
    let mut decay = ResultTable::new(
        "decay",
        &[
            ("w", "pi zeta"),
            ("tau_scale", "1/A"),
            ("tau_window", "1/A"),
            ("plateau_window", "1"),
            ("tau_steady", "1/A"),
            ("m_inf", "1"),
        ],
    );
    let mut audit = Vec::new();
    let mut steady_means = Vec::new();
    if kind != EnsembleKind::Trajectory {
        let configs = cfg.run.steady_configs.unwrap_or(cfg.placement.n_configs);
        for w in cfg.steady_w_values() {
            let spec = ideal_disorder_spec(n, &geom, w, configs, cfg.seed)?;
            let res = disorder_ensemble(&spec, &model, &EnsembleMode::Steady)?;
            steady.push(vec![w, res.mean[0], res.std[0], res.n_ok as f64, res.failed.len() as f64, ideal_steady]);
            audit.extend(res.failed.iter().map(|(c, e)| format!("w={w} steady config {c}: {e}")));
            steady_means.push((w, res.mean[0]));
        }
    }
    if kind != EnsembleKind::Steady {
        for w in cfg.w_values() {
            let spec = ideal_disorder_spec(n, &geom, w, cfg.placement.n_configs, cfg.seed)?;
            let res = disorder_ensemble(&spec, &model, &EnsembleMode::Trajectory(times.clone()))?;
            for k in 0..res.times.len() {
                traj.push(vec![w, res.times[k], res.mean[k], res.std[k], ideal[k]]);
            }
            audit.extend(res.failed.iter().map(|(c, e)| format!("w={w} trajectory config {c}: {e}")));
            let Some(&(_, m_inf)) = steady_means.iter().find(|(sw, _)| *sw == w) else { continue };
            if w > 0.0 {
                let window = fit_decay(&times, &res.mean, &ideal, None)?;
                let pinned = fit_decay(&times, &res.mean, &ideal, Some(m_inf))?;
                decay.push(vec![
                    w,
                    1.0 / (cfg.model.a * w * std::f64::consts::PI),
                    window.tau,
                    window.plateau,
                    pinned.tau,
                    m_inf,
                ]);
            }
        }
    }
    decay.meta(
        "fits",
        "tau_window: plateau fitted within the sampled window; tau_steady: plateau pinned to the steady mean",
    );
    let mut out = Vec::new();
    for mut t in [traj, steady, decay] {
        if t.rows.is_empty() {
            continue;
        }
        t.meta("failed configurations", audit.len());
        for a in &audit {
            t.meta("excluded", a);
        }
        out.push(t);
    }
    Ok(out)
}

/// Writes each table to `<dir>/<prefix>_<table>.<ext>` and returns the paths.
pub fn write_tables(cfg: &RunConfig, tables: &[ResultTable]) -> RunResult<Vec<PathBuf>> {
    let dir = Path::new(&cfg.output.dir);
    std::fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let ext = match cfg.output.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let prefix = cfg.prefix();
    tables
        .iter()
        .map(|t| {
            let path = dir.join(format!("{prefix}_{}.{ext}", t.name));
            std::fs::write(&path, t.render(cfg.output.format)).map_err(|source| RunError::Io {
                path: path.clone(),
                source,
            })?;
            Ok(path)
        })
        .collect()
}

/// Runs the configuration, writes its tables and a `<prefix>_run.json`
/// record with the wall time (kept out of the tables so reruns are
/// byte-identical).
pub fn run(cfg: &RunConfig) -> RunResult<Vec<PathBuf>> {
    let start = Instant::now();
    let tables = execute(cfg)?;
    let mut paths = write_tables(cfg, &tables)?;
    let record = serde_json::json!({
        "spinsqueeze": VERSION,
        "command": cfg.command.name(),
        "seed": cfg.seed,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "tables": paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "config": cfg,
    });
    let path = Path::new(&cfg.output.dir).join(format!("{}_run.json", cfg.prefix()));
    std::fs::write(&path, serde_json::to_string_pretty(&record).expect("record serializes") + "\n").map_err(
        |source| RunError::Io {
            path: path.clone(),
            source,
        },
    )?;
    paths.push(path);
    Ok(paths)
}
