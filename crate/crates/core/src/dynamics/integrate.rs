//! Dormand-Prince 5(4) integration of the master equations.

use crate::error::{invalid, Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::observables::{squeezing_report, SqueezingReport};
use crate::spin::{ops_for, DensityMatrix, SpinOps, StateTolerance};

use super::generator::Generator;
use super::reservoir::ModelSpec;

// The generator is autonomous, so the stage nodes are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub atol: f64,
    pub rtol: f64,
    /// Initial step; estimated from the generator when absent.
    pub dt_hint: Option<f64>,
    /// Times at which full states are kept (added to the sample grid).
    pub snapshot_times: Vec<f64>,
    /// Check trace, hermiticity, positivity (and the Casimir in collective
    /// mode) at every sample.
    pub check_invariants: bool,
    pub tolerance: StateTolerance,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-8,
            dt_hint: None,
            snapshot_times: Vec::new(),
            check_invariants: true,
            tolerance: StateTolerance::TRAJECTORY,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `None` where the mean spin vanishes.
    pub observables: Vec<Option<SqueezingReport>>,
    pub snapshots: Vec<(f64, DensityMatrix)>,
    pub final_state: DensityMatrix,
    pub stats: StepStats,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plateau {
    pub time: f64,
    pub xi_r_sq: f64,
}

impl Trajectory {
    pub fn xi_r_sq(&self) -> Vec<Option<f64>> {
        self.observables.iter().map(|o| o.as_ref().map(|r| r.xi_r_sq)).collect()
    }

    pub fn inverse_xi(&self) -> Vec<Option<f64>> {
        self.observables.iter().map(|o| o.as_ref().map(|r| 1.0 / r.xi_r_sq)).collect()
    }

    /// Earliest sample after which `xi_R^2` changes by less than `rel` over a
    /// window `window` (both relative to that sample's value).
    pub fn plateau(&self, window: f64, rel: f64) -> Option<Plateau> {
        let xi = self.xi_r_sq();
        let t_end = *self.times.last()?;
        for (i, &t) in self.times.iter().enumerate() {
            if t + window > t_end + 1e-12 {
                break;
            }
            let Some(x0) = xi[i] else { continue };
            let steady = self.times[i..]
                .iter()
                .zip(&xi[i..])
                .take_while(|(tk, _)| **tk <= t + window + 1e-12)
                .all(|(_, xk)| xk.is_some_and(|v| ((v - x0) / x0).abs() < rel));
            if steady {
                return Some(Plateau { time: t, xi_r_sq: x0 });
            }
        }
        None
    }
}

/// `n` equally spaced samples on `[0, t_end]`.
pub fn uniform_times(t_end: f64, n: usize) -> Vec<f64> {
    if n <= 1 || t_end == 0.0 {
        return vec![t_end];
    }
    (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
}

struct Stepper<'a> {
    gen: &'a Generator,
    atol: f64,
    rtol: f64,
    k: Vec<CMatrix>,
    stage: CMatrix,
    next: CMatrix,
}

impl<'a> Stepper<'a> {
    fn new(gen: &'a Generator, atol: f64, rtol: f64) -> Self {
        let d = gen.dim();
        Self {
            gen,
            atol,
            rtol,
            k: vec![CMatrix::zeros(d, d); 7],
            stage: CMatrix::zeros(d, d),
            next: CMatrix::zeros(d, d),
        }
    }

    fn scaled_norm(&self, m: &CMatrix, y: &CMatrix, y2: &CMatrix) -> f64 {
        let n = m.len() as f64;
        let sum: f64 = m
            .as_slice()
            .iter()
            .zip(y.as_slice())
            .zip(y2.as_slice())
            .map(|((e, a), b)| {
                let sc = self.atol + self.rtol * a.norm().max(b.norm());
                (e.norm() / sc).powi(2)
            })
            .sum();
        (sum / n).sqrt()
    }

    /// Initial step from the usual two-evaluation estimate.
    fn initial_step(&mut self, y: &CMatrix) -> f64 {
        self.gen.apply_into(y, &mut self.k[0]);
        let d0 = self.scaled_norm(y, y, y);
        let d1 = self.scaled_norm(&self.k[0], y, y);
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(1.0)
    }

    /// One trial step of size `h` from `y` (with `k[0] = L(y)`); writes the
    /// proposal to `self.next` and returns the scaled error.
    fn attempt(&mut self, y: &CMatrix, h: f64) -> f64 {
        for s in 1..7 {
            self.stage.copy_from(y);
            {
                let out = self.stage.as_mut_slice();
                for (j, kj) in self.k.iter().enumerate().take(s) {
                    let w = A[s][j] * h;
                    if w != 0.0 {
                        for (o, v) in out.iter_mut().zip(kj.as_slice()) {
                            *o += v * w;
                        }
                    }
                }
            }
            self.gen.apply_into(&self.stage, &mut self.k[s]);
        }
        // Stage 7 was evaluated at the 5th-order solution (FSAL).
        self.next.copy_from(&self.stage);
        let mut err = CMatrix::zeros(y.nrows(), y.ncols());
        {
            let out = err.as_mut_slice();
            for (j, kj) in self.k.iter().enumerate() {
                if E[j] != 0.0 {
                    let w = E[j] * h;
                    for (o, v) in out.iter_mut().zip(kj.as_slice()) {
                        *o += v * w;
                    }
                }
            }
        }
        self.scaled_norm(&err, y, &self.next)
    }
}

/// `m <- (m + m^dag) / 2`.
fn symmetrize(m: &mut CMatrix) {
    let d = m.nrows();
    for i in 0..d {
        m[(i, i)].im = 0.0;
        for j in 0..i {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

fn check_sample(rho: &DensityMatrix, ops: &SpinOps, collective: bool, tol: StateTolerance, t: f64) -> Result<()> {
    rho.check(tol)
        .map_err(|e| Error::InvariantViolation(format!("at t = {t}: {e}")))?;
    if collective {
        let j = ops.n() as f64 / 2.0;
        let cas = ops.casimir(&rho.data);
        if (cas - j * (j + 1.0)).abs() > 1e-8 {
            return Err(Error::InvariantViolation(format!(
                "at t = {t}: <S^2> = {cas} drifted from {}",
                j * (j + 1.0)
            )));
        }
    }
    Ok(())
}

/// Integrates from `t = 0` and records observables at every entry of `times`
/// (ascending, non-negative).
pub fn evolve(spec: &ModelSpec, rho0: &DensityMatrix, times: &[f64], opts: &EvolveOptions) -> Result<Trajectory> {
    spec.basis().expect(rho0.basis)?;
    if !(opts.atol > 0.0 && opts.rtol > 0.0) {
        return Err(invalid("tolerance", "atol and rtol must be positive"));
    }
    let mut grid: Vec<f64> = times.iter().chain(&opts.snapshot_times).copied().collect();
    if grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("times", "sample times must be finite and >= 0"));
    }
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    if grid.is_empty() {
        return Err(invalid("times", "at least one sample time is required"));
    }
    let is_snapshot = |t: f64| {
        opts.snapshot_times
            .iter()
            .any(|s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
    };

    let gen = Generator::new(spec)?;
    let ops = ops_for(spec.basis())?;
    let collective = spec.is_collective();
    if opts.check_invariants {
        check_sample(rho0, &ops, collective, opts.tolerance, 0.0)?;
    }

    let mut stepper = Stepper::new(&gen, opts.atol, opts.rtol);
    let mut y = rho0.data.clone();
    let mut t = 0.0f64;
    let mut h = match opts.dt_hint {
        Some(h) if h > 0.0 => h,
        _ => stepper.initial_step(&y),
    };
    gen.apply_into(&y, &mut stepper.k[0]);
    let mut stats = StepStats::default();
    let mut out_times = Vec::with_capacity(grid.len());
    let mut observables = Vec::with_capacity(grid.len());
    let mut snapshots = Vec::new();

    for &target in &grid {
        while t < target {
            let remaining = target - t;
            let last = h >= remaining * (1.0 - 1e-12);
            let step = if last { remaining } else { h };
            if step < 1e-14 * t.max(1.0) && !last {
                return Err(Error::StepSizeUnderflow { t, h: step });
            }
            let err = stepper.attempt(&y, step);
            if !err.is_finite() {
                stats.rejected += 1;
                h = step * 0.2;
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                stats.accepted += 1;
                t = if last { target } else { t + step };
                std::mem::swap(&mut y, &mut stepper.next);
                let (first, rest) = stepper.k.split_at_mut(1);
                std::mem::swap(&mut first[0], &mut rest[5]);
                // Near the stability limit, rounding noise in the anti-Hermitian
                // part grows from step to step; the exact flow has none. The
                // generator commutes with this projection, so the FSAL stage
                // stays consistent.
                symmetrize(&mut y);
                symmetrize(&mut stepper.k[0]);
                // A truncated final step says nothing about the natural size.
                if !last || step >= h {
                    h = step * factor;
                }
            } else {
                stats.rejected += 1;
                h = step * factor.min(1.0);
                if h < 1e-14 * t.max(1.0) {
                    return Err(Error::StepSizeUnderflow { t, h });
                }
            }
        }
        let state = DensityMatrix::new(y.clone(), spec.basis())?;
        if opts.check_invariants {
            check_sample(&state, &ops, collective, opts.tolerance, t)?;
        }
        observables.push(squeezing_report(&state, &ops).ok());
        if is_snapshot(target) {
            snapshots.push((target, state));
        }
        out_times.push(target);
    }

    Ok(Trajectory {
        times: out_times,
        observables,
        snapshots,
        final_state: DensityMatrix::new(y, spec.basis())?,
        stats,
    })
}

/// Integrates to `t_end`, sampling only the end point.
pub fn evolve_to(spec: &ModelSpec, rho0: &DensityMatrix, t_end: f64, dt_hint: Option<f64>) -> Result<Trajectory> {
    let opts = EvolveOptions {
        dt_hint,
        ..EvolveOptions::default()
    };
    evolve(spec, rho0, &[t_end], &opts)
}

/// Applies `exp(-i phi S_z)` to `rho`, the map between the rotating and
/// laboratory frames.
pub fn rotate_z(rho: &DensityMatrix, ops: &SpinOps, phi: f64) -> Result<DensityMatrix> {
    ops.basis.expect(rho.basis)?;
    let d = rho.dim();
    let phase: Vec<C64> = (0..d).map(|k| C64::from_polar(1.0, -phi * ops.s_z[(k, k)].re)).collect();
    let data = CMatrix::from_fn(d, d, |i, j| rho.data[(i, j)] * phase[i] * phase[j].conj());
    DensityMatrix::new(data, rho.basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::reservoir::SqueezedReservoir;
    use crate::linalg::{c, max_abs};
    use crate::spin::{collective_ops, dicke_state, HalfInt};

    fn spec(n: usize, r: f64) -> ModelSpec {
        ModelSpec::collective(n, 1.0, 1.0, SqueezedReservoir::new(r, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn zero_duration_returns_initial_state() {
        let s = spec(4, 0.5);
        let rho0 = dicke_state(4, HalfInt::from_int(-2)).unwrap();
        let tr = evolve_to(&s, &rho0, 0.0, None).unwrap();
        assert_eq!(tr.final_state, rho0);
        assert_eq!(tr.stats.accepted, 0);
    }

    #[test]
    fn single_spin_vacuum_decay_is_exponential() {
        // r = 0: <sigma^+ sigma^-> decays as e^{-A t}.
        let s = spec(1, 0.0);
        let rho0 = dicke_state(1, HalfInt::from_twice(1)).unwrap();
        let tr = evolve(&s, &rho0, &[0.5, 1.0, 2.0], &EvolveOptions::default()).unwrap();
        let pe = tr.final_state.data[(1, 1)].re;
        assert!((pe - (-2.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn samples_hit_requested_times_and_snapshots() {
        let s = spec(3, 0.4);
        let rho0 = dicke_state(3, HalfInt::from_twice(-3)).unwrap();
        let opts = EvolveOptions {
            snapshot_times: vec![0.25],
            ..EvolveOptions::default()
        };
        let tr = evolve(&s, &rho0, &[0.0, 0.5, 1.0], &opts).unwrap();
        assert_eq!(tr.times, vec![0.0, 0.25, 0.5, 1.0]);
        assert_eq!(tr.snapshots.len(), 1);
        assert_eq!(tr.snapshots[0].0, 0.25);
        assert!(tr.observables.iter().all(Option::is_some));
    }

    #[test]
    fn rotation_about_z_preserves_populations() {
        let ops = collective_ops(2).unwrap();
        let mut rho = CMatrix::zeros(3, 3);
        rho[(0, 0)] = c(0.5);
        rho[(2, 2)] = c(0.5);
        rho[(0, 2)] = c(0.5);
        rho[(2, 0)] = c(0.5);
        let rho = DensityMatrix::new(rho, ops.basis).unwrap();
        let rot = rotate_z(&rho, &ops, std::f64::consts::FRAC_PI_2).unwrap();
        // m = -1 and m = 1 pick up opposite quarter turns: relative phase -1.
        assert!((rot.data[(0, 2)] + c(0.5)).norm() < 1e-14);
        assert!((rot.data[(1, 1)]).norm() < 1e-14);
        let back = rotate_z(&rot, &ops, -std::f64::consts::FRAC_PI_2).unwrap();
        assert!(max_abs(&(back.data - rho.data)) < 1e-14);
    }

    #[test]
    fn plateau_detection() {
        let s = spec(4, 0.5);
        let rho0 = dicke_state(4, HalfInt::from_int(-2)).unwrap();
        let tr = evolve(&s, &rho0, &uniform_times(60.0, 121), &EvolveOptions::default()).unwrap();
        let p = tr.plateau(1.0, 1e-9).expect("plateau reached");
        assert!(p.time > 1.0 && p.time < 60.0);
    }
}
