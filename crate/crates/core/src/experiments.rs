//! Parameter sweeps, optimization of the squeezing strength, scaling fits and
//! position-disorder ensembles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::couplings::{build_couplings, ideal_placement, Placement, WaveguideGeometry};
use crate::dynamics::{evolve, steady_state_numeric, EvolveOptions, ModelSpec, SqueezedReservoir};
use crate::error::{invalid, Error, Result};
use crate::observables::squeezing_report;
use crate::spin::{collective_ops, embed_symmetric, full_ops, Basis, DensityMatrix, N_MAX_FULL};
use crate::steadystate::analytic_steady_state;

/// Collective-model parameters shared by the sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectiveParams {
    pub a: f64,
    pub delta: f64,
    pub alpha: f64,
}

impl Default for CollectiveParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            delta: 1.0,
            alpha: 0.5,
        }
    }
}

/// `1/xi_R^2` of the analytic steady state.
pub fn steady_inverse_xi(n: usize, r: f64, p: &CollectiveParams) -> Result<f64> {
    let res = SqueezedReservoir::new(r, p.alpha)?;
    let spec = ModelSpec::collective(n, p.a, p.delta, res)?;
    let rho = analytic_steady_state(n, p.a, spec.delta_n(), &res)?;
    Ok(squeezing_report(&rho, &collective_ops(n)?)?.inverse_xi())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub r: f64,
    pub inverse_xi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub n: usize,
    pub points: Vec<SweepPoint>,
    /// Endpoints of the contiguous run of grid points around the maximum with
    /// `1/xi^2 > 1 + SQUEEZED_MARGIN`; `None` when no point is squeezed.
    pub squeezed_range: Option<(f64, f64)>,
}

/// Rounding margin: `1/xi^2` of the unsqueezed ground state is 1 only to
/// within a few ulps.
pub const SQUEEZED_MARGIN: f64 = 1e-9;

/// `r = 0, step, 2 step, ... <= r_max`.
pub fn r_grid(r_max: f64, step: f64) -> Vec<f64> {
    let count = (r_max / step + 1e-9).floor() as usize;
    (0..=count).map(|k| k as f64 * step).collect()
}

pub fn sweep_r(n: usize, grid: &[f64], p: &CollectiveParams) -> Result<SweepResult> {
    if grid.iter().any(|r| !(*r >= 0.0)) {
        return Err(invalid("r_grid", "squeezing strengths must be >= 0"));
    }
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&r| steady_inverse_xi(n, r, p))
        .collect::<Result<_>>()?;
    let points: Vec<SweepPoint> = grid
        .iter()
        .zip(&values)
        .map(|(&r, &inverse_xi)| SweepPoint { r, inverse_xi })
        .collect();
    let squeezed_range = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .filter(|(_, v)| **v > 1.0 + SQUEEZED_MARGIN)
        .map(|(imax, _)| {
            let squeezed = |k: &usize| values[*k] > 1.0 + SQUEEZED_MARGIN;
            let lo = (0..=imax).rev().take_while(squeezed).last().unwrap_or(imax);
            let hi = (imax..values.len()).take_while(squeezed).last().unwrap_or(imax);
            (grid[lo], grid[hi])
        });
    Ok(SweepResult {
        n,
        points,
        squeezed_range,
    })
}

/// Golden-section search for the maximum of `f` on `[a, b]`, stopping when
/// the bracket is narrower than `tol`.
pub fn golden_section_max<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(b > a && tol > 0.0) {
        return Err(Error::Optimizer(format!("invalid bracket [{a}, {b}]")));
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x)?;
    Ok(if fx >= f1.max(f2) {
        (x, fx)
    } else if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub n: usize,
    pub r_opt: f64,
    pub inverse_xi_max: f64,
}

/// Coarse grid on `[0.02, 2.0]`, step 0.02, followed by golden-section
/// refinement to `1e-4` inside the bracket around the best grid point.
pub fn optimize_r(n: usize, p: &CollectiveParams) -> Result<Optimum> {
    if n < 2 {
        return Err(invalid("n", "optimization needs N >= 2"));
    }
    let grid: Vec<f64> = (1..=100).map(|k| 0.02 * k as f64).collect();
    let coarse: Vec<f64> = grid
        .iter()
        .map(|&r| steady_inverse_xi(n, r, p))
        .collect::<Result<_>>()?;
    let (imax, _) = coarse
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    if imax == 0 || imax == grid.len() - 1 {
        return Err(Error::Optimizer(format!(
            "maximum at the edge of the coarse grid (r = {})",
            grid[imax]
        )));
    }
    let rises = coarse[..=imax].windows(2).all(|w| w[1] > w[0]);
    let falls = coarse[imax..].windows(2).all(|w| w[1] < w[0]);
    if !(rises && falls) {
        return Err(Error::Optimizer(format!(
            "1/xi^2 is not unimodal in r for N = {n}"
        )));
    }
    let (r_opt, inverse_xi_max) =
        golden_section_max(|r| steady_inverse_xi(n, r, p), grid[imax - 1], grid[imax + 1], 1e-4)?;
    Ok(Optimum {
        n,
        r_opt,
        inverse_xi_max,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitModel {
    /// `y = a x^b`, fitted as `ln y = ln a + b ln x`.
    Power,
    /// `y = a ln x + b`.
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub model: FitModel,
    pub param_a: f64,
    pub param_b: f64,
    /// RMS residual in the space the fit is linear in (`ln y` for the power
    /// model, `y` for the log model).
    pub residual_rms: f64,
    pub points: Vec<(f64, f64)>,
}

impl ScalingFit {
    pub fn predict(&self, x: f64) -> f64 {
        match self.model {
            FitModel::Power => self.param_a * x.powf(self.param_b),
            FitModel::Log => self.param_a * x.ln() + self.param_b,
        }
    }
}

/// Ordinary least squares for `v = slope u + intercept`.
fn linear_fit(u: &[f64], v: &[f64]) -> Result<(f64, f64, f64)> {
    let n = u.len() as f64;
    let (mu, mv) = (u.iter().sum::<f64>() / n, v.iter().sum::<f64>() / n);
    let suu: f64 = u.iter().map(|x| (x - mu).powi(2)).sum();
    let suv: f64 = u.iter().zip(v).map(|(x, y)| (x - mu) * (y - mv)).sum();
    if !(suu > 1e-14 * u.iter().map(|x| x * x).sum::<f64>().max(1e-300)) {
        return Err(Error::DegenerateFit("abscissae are all equal".into()));
    }
    let slope = suv / suu;
    let intercept = mv - slope * mu;
    let rms = (u
        .iter()
        .zip(v)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok((slope, intercept, rms))
}

pub fn fit_scaling(points: &[(f64, f64)], model: FitModel) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!("need >= 3 points, got {}", points.len())));
    }
    if points.iter().any(|(x, y)| !(x.is_finite() && y.is_finite() && *x > 0.0)) {
        return Err(invalid("points", "x must be positive and all values finite"));
    }
    let u: Vec<f64> = points.iter().map(|(x, _)| x.ln()).collect();
    let (param_a, param_b, residual_rms) = match model {
        FitModel::Power => {
            if points.iter().any(|(_, y)| *y <= 0.0) {
                return Err(invalid("points", "the power model needs positive y"));
            }
            let v: Vec<f64> = points.iter().map(|(_, y)| y.ln()).collect();
            let (slope, intercept, rms) = linear_fit(&u, &v)?;
            (intercept.exp(), slope, rms)
        }
        FitModel::Log => {
            let v: Vec<f64> = points.iter().map(|(_, y)| *y).collect();
            linear_fit(&u, &v)?
        }
    };
    Ok(ScalingFit {
        model,
        param_a,
        param_b,
        residual_rms,
        points: points.to_vec(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub optima: Vec<Optimum>,
    /// Power law for the minimal `xi_R^2`.
    pub xi_min: ScalingFit,
    /// Power law for the maximal `1/xi_R^2`.
    pub inverse_xi_max: ScalingFit,
    /// `r_opt = a ln N + b`.
    pub r_opt: ScalingFit,
}

/// `N = 4, 6, ..., 60`.
pub fn default_scaling_ns() -> Vec<usize> {
    (4..=60).step_by(2).collect()
}

pub fn scaling_study(ns: &[usize], p: &CollectiveParams) -> Result<ScalingStudy> {
    let optima: Vec<Optimum> = ns
        .par_iter()
        .map(|&n| optimize_r(n, p))
        .collect::<Result<_>>()?;
    let xi: Vec<(f64, f64)> = optima.iter().map(|o| (o.n as f64, 1.0 / o.inverse_xi_max)).collect();
    let inv: Vec<(f64, f64)> = optima.iter().map(|o| (o.n as f64, o.inverse_xi_max)).collect();
    let ropt: Vec<(f64, f64)> = optima.iter().map(|o| (o.n as f64, o.r_opt)).collect();
    Ok(ScalingStudy {
        xi_min: fit_scaling(&xi, FitModel::Power)?,
        inverse_xi_max: fit_scaling(&inv, FitModel::Power)?,
        r_opt: fit_scaling(&ropt, FitModel::Log)?,
        optima,
    })
}

/// Uniform position disorder `w chi_i`, `chi_i` in `[-1, 1]`, with `w` in
/// units of `pi zeta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub w: f64,
    pub n_configs: usize,
    pub seed: u64,
    pub base_placement: Placement,
}

impl DisorderSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.w >= 0.0 && self.w.is_finite()) {
            return Err(invalid("w", format!("disorder strength must be >= 0, got {}", self.w)));
        }
        if self.n_configs == 0 {
            return Err(invalid("n_configs", "need at least one configuration"));
        }
        if self.base_placement.len() > N_MAX_FULL {
            return Err(Error::TooLarge(format!(
                "disorder ensembles need N <= {N_MAX_FULL}"
            )));
        }
        Ok(())
    }
}

/// The `chi_i` of configuration `config`: an independent ChaCha stream per
/// configuration, so draws do not depend on execution order.
pub fn draw_chi(seed: u64, config: usize, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(config as u64);
    (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

pub fn disordered_placement(spec: &DisorderSpec, geom: &WaveguideGeometry, config: usize) -> Result<Placement> {
    let shift = spec.w * std::f64::consts::PI * geom.zeta();
    let chi = draw_chi(spec.seed, config, spec.base_placement.len());
    Placement::new(
        spec.base_placement
            .z
            .iter()
            .zip(&chi)
            .map(|(z, x)| z + shift * x)
            .collect(),
    )
}

/// Physical parameters of an ensemble run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisorderModel {
    pub geom: WaveguideGeometry,
    pub delta: f64,
    pub reservoir: SqueezedReservoir,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EnsembleMode {
    /// Integrate from `|g...g>` and sample at these times.
    Trajectory(Vec<f64>),
    /// Liouvillian nullspace.
    Steady,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub w: f64,
    /// Sample times; a single `NaN`-free entry `f64::INFINITY` in steady mode.
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    /// Population standard deviation across configurations.
    pub std: Vec<f64>,
    pub n_ok: usize,
    /// `(configuration, message)` for every excluded configuration.
    pub failed: Vec<(usize, String)>,
}

/// Compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

fn run_config(spec: &DisorderSpec, model: &DisorderModel, mode: &EnsembleMode, config: usize) -> Result<Vec<f64>> {
    let n = spec.base_placement.len();
    let placement = disordered_placement(spec, &model.geom, config)?;
    let couplings = build_couplings(&model.geom, &placement)?;
    let ms = ModelSpec::full(couplings, model.delta, model.reservoir)?;
    let ops = full_ops(n)?;
    match mode {
        EnsembleMode::Trajectory(times) => {
            let mut ground = crate::linalg::CMatrix::zeros(1 << n, 1 << n);
            ground[(0, 0)] = crate::linalg::ONE;
            let rho0 = DensityMatrix::new(ground, Basis::Full { n })?;
            let tr = evolve(&ms, &rho0, times, &EvolveOptions::default())?;
            tr.observables
                .iter()
                .zip(&tr.times)
                .map(|(o, t)| {
                    o.as_ref()
                        .map(|r| r.inverse_xi())
                        .ok_or_else(|| Error::InvariantViolation(format!("mean spin vanished at t = {t}")))
                })
                .collect()
        }
        EnsembleMode::Steady => {
            let rho = if spec.w == 0.0 {
                // Equal couplings leave every lower multiplet stationary; the
                // state reached from |g...g> is the symmetric one.
                let ideal = analytic_steady_state(n, ms.a, ms.delta_n(), &model.reservoir)?;
                embed_symmetric(&ideal, n)?
            } else {
                steady_state_numeric(&ms)?
            };
            Ok(vec![squeezing_report(&rho, &ops)?.inverse_xi()])
        }
    }
}

/// Runs every configuration (in parallel), excludes failures with an audit
/// entry, and aborts when more than 5% fail.
pub fn disorder_ensemble(spec: &DisorderSpec, model: &DisorderModel, mode: &EnsembleMode) -> Result<EnsembleResult> {
    spec.validate()?;
    let outcomes: Vec<Result<Vec<f64>>> = (0..spec.n_configs)
        .into_par_iter()
        .map(|k| run_config(spec, model, mode, k))
        .collect();
    let times = match mode {
        EnsembleMode::Trajectory(t) => t.clone(),
        EnsembleMode::Steady => vec![f64::INFINITY],
    };
    let width = times.len();
    let mut failed = Vec::new();
    let mut sums = vec![Kahan::default(); width];
    let mut ok: Vec<Vec<f64>> = Vec::with_capacity(spec.n_configs);
    for (k, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(v) if v.len() == width => {
                for (s, x) in sums.iter_mut().zip(&v) {
                    s.add(*x);
                }
                ok.push(v);
            }
            Ok(v) => failed.push((k, format!("expected {width} samples, got {}", v.len()))),
            Err(e) => failed.push((k, e.to_string())),
        }
    }
    if failed.len() * 20 > spec.n_configs || ok.is_empty() {
        return Err(Error::EnsembleFailed {
            failed: failed.len(),
            total: spec.n_configs,
        });
    }
    let n_ok = ok.len();
    let mean: Vec<f64> = sums.iter().map(|s| s.sum / n_ok as f64).collect();
    let std: Vec<f64> = (0..width)
        .map(|i| {
            let mut acc = Kahan::default();
            for v in &ok {
                acc.add((v[i] - mean[i]).powi(2));
            }
            (acc.sum / n_ok as f64).sqrt()
        })
        .collect();
    Ok(EnsembleResult {
        w: spec.w,
        times,
        mean,
        std,
        n_ok,
        failed,
    })
}

/// Ideal placement for `n` emitters wrapped in a disorder specification.
pub fn ideal_disorder_spec(n: usize, geom: &WaveguideGeometry, w: f64, n_configs: usize, seed: u64) -> Result<DisorderSpec> {
    let spec = DisorderSpec {
        w,
        n_configs,
        seed,
        base_placement: ideal_placement(n, geom)?,
    };
    spec.validate()?;
    Ok(spec)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub tau: f64,
    pub plateau: f64,
    pub residual_rms: f64,
}

/// Least-squares fit of `mean(t) ~ p + (ideal(t) - p) e^{-t/tau}`.
///
/// With `plateau = Some(p)` only `tau` is fitted; otherwise `p` is fitted too
/// (it enters linearly, so it is eliminated in closed form for each `tau`).
/// `tau` is searched over `[1e-3, 1e3]` on a log scale.
pub fn fit_decay(times: &[f64], mean: &[f64], ideal: &[f64], plateau: Option<f64>) -> Result<DecayFit> {
    if times.len() != mean.len() || times.len() != ideal.len() || times.len() < 3 {
        return Err(Error::DegenerateFit("decay fit needs >= 3 aligned samples".into()));
    }
    let eval = |log_tau: f64| -> (f64, f64) {
        let tau = log_tau.exp();
        let e: Vec<f64> = times.iter().map(|t| (-t / tau).exp()).collect();
        let p = plateau.unwrap_or_else(|| {
            let (mut num, mut den) = (0.0, 0.0);
            for k in 0..times.len() {
                let g = 1.0 - e[k];
                num += g * (mean[k] - ideal[k] * e[k]);
                den += g * g;
            }
            if den > 0.0 {
                num / den
            } else {
                mean[mean.len() - 1]
            }
        });
        let sse = (0..times.len())
            .map(|k| (mean[k] - (p + (ideal[k] - p) * e[k])).powi(2))
            .sum();
        (sse, p)
    };
    // The cost need not be unimodal over the whole range; scan, then refine.
    let scan: Vec<f64> = (0..=240)
        .map(|k| (1e-3f64).ln() + k as f64 * (1e6f64).ln() / 240.0)
        .collect();
    let (ibest, _) = scan
        .iter()
        .map(|&x| eval(x).0)
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty scan");
    let lo = scan[ibest.saturating_sub(1)];
    let hi = scan[(ibest + 1).min(scan.len() - 1)];
    let (x, _) = golden_section_max(|x| Ok(-eval(x).0), lo, hi, 1e-7)?;
    let (sse, p) = eval(x);
    Ok(DecayFit {
        tau: x.exp(),
        plateau: p,
        residual_rms: (sse / times.len() as f64).sqrt(),
    })
}
