//! Squeezing figures of merit and phase-space pictures of collective states.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{CMatrix, C64, ZERO};
use crate::spin::{Basis, DensityMatrix, HalfInt, SpinOps};

type Vec3 = [f64; 3];

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn quad(m: &[[f64; 3]; 3], a: Vec3, b: Vec3) -> f64 {
    (0..3).map(|i| (0..3).map(|k| a[i] * m[i][k] * b[k]).sum::<f64>()).sum()
}

/// Mean spin, perpendicular covariance and the Wineland parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezingReport {
    pub n_spins: usize,
    pub mean_spin: Vec3,
    pub theta0: f64,
    pub phi0: f64,
    /// Unit mean direction.
    pub n: Vec3,
    pub n1: Vec3,
    pub n2: Vec3,
    /// Symmetrized covariance in the `(n1, n2)` frame.
    pub cov: [[f64; 2]; 2],
    pub var_min: f64,
    /// Angle from `n1` towards `n2` of the least-noisy direction, in `[0, pi)`.
    pub theta_min: f64,
    /// The least-noisy direction as a lab-frame unit vector.
    pub min_axis: Vec3,
    pub xi_r_sq: f64,
}

impl SqueezingReport {
    pub fn inverse_xi(&self) -> f64 {
        1.0 / self.xi_r_sq
    }

    pub fn mean_length(&self) -> f64 {
        dot(self.mean_spin, self.mean_spin).sqrt()
    }

    /// Azimuth of the least-noisy direction in the lab frame, folded to
    /// `[0, pi)` since a quadrature and its negative are the same axis.
    /// For the large-N steady state this approaches
    /// `(pi - alpha + atan(2 Delta_N / (A N))) / 2`.
    pub fn min_azimuth(&self) -> f64 {
        self.min_axis[1].atan2(self.min_axis[0]).rem_euclid(PI)
    }
}

pub fn squeezing_report(rho: &DensityMatrix, ops: &SpinOps) -> Result<SqueezingReport> {
    ops.basis.expect(rho.basis)?;
    let n_spins = ops.n();
    let mean = ops.mean_spin(&rho.data);
    let norm = dot(mean, mean).sqrt();
    if !(norm > 1e-10 * n_spins as f64) {
        return Err(Error::UndefinedMeanDirection { norm });
    }
    let theta0 = (mean[2] / norm).clamp(-1.0, 1.0).acos();
    let transverse = mean[0].hypot(mean[1]);
    let phi0 = if transverse <= 1e-12 * norm { 0.0 } else { mean[1].atan2(mean[0]) };
    let (st, ct, sp, cp) = (theta0.sin(), theta0.cos(), phi0.sin(), phi0.cos());
    let n = [st * cp, st * sp, ct];
    let n1 = [ct * cp, ct * sp, -st];
    let n2 = [-sp, cp, 0.0];

    let second = ops.second_moments(&rho.data);
    let cov_ab = |a: Vec3, b: Vec3| quad(&second, a, b) - dot(a, mean) * dot(b, mean);
    let (c11, c22, c12) = (cov_ab(n1, n1), cov_ab(n2, n2), cov_ab(n1, n2));
    let half_diff = (c11 - c22) / 2.0;
    let var_min = ((c11 + c22) / 2.0 - half_diff.hypot(c12)).max(0.0);
    let theta_min = ((2.0 * c12).atan2(c11 - c22) + PI) / 2.0 % PI;
    let (s, c) = theta_min.sin_cos();
    let min_axis = [c * n1[0] + s * n2[0], c * n1[1] + s * n2[1], c * n1[2] + s * n2[2]];
    Ok(SqueezingReport {
        n_spins,
        mean_spin: mean,
        theta0,
        phi0,
        n,
        n1,
        n2,
        cov: [[c11, c12], [c12, c22]],
        var_min,
        theta_min,
        min_axis,
        xi_r_sq: n_spins as f64 * var_min / (norm * norm),
    })
}

/// Large-N Gaussian limit `1/xi^2 = [2n + 1 - 2 sqrt(n (n+1))]^{-1}`,
/// `n = sinh^2 r`. The bracket equals `e^{-2r}`.
pub fn hp_inverse_xi(r: f64) -> f64 {
    let nb = r.sinh().powi(2);
    // 2n + 1 - 2 sqrt(n(n+1)) = cosh 2r - sinh 2r, which cancels badly at large r
    let direct = 2.0 * nb + 1.0 - 2.0 * (nb * (nb + 1.0)).sqrt();
    if direct > 1e-6 {
        1.0 / direct
    } else {
        (2.0 * r).exp()
    }
}

/// Spin-coherent-state amplitudes `<j,m|theta,phi>` in Dicke order.
fn coherent_amplitudes(n: usize, ln_binom: &[f64], theta: f64, phi: f64) -> Vec<C64> {
    let (s, c) = (theta / 2.0).sin_cos();
    let pow = |base: f64, e: usize| -> f64 {
        if e == 0 {
            1.0
        } else if base == 0.0 {
            0.0
        } else {
            (e as f64 * base.abs().ln()).exp() * if base < 0.0 && e % 2 == 1 { -1.0 } else { 1.0 }
        }
    };
    let mut out = vec![ZERO; n + 1];
    for k in 0..=n {
        // k = j - m lowering steps from |j,j>
        let mag = (0.5 * ln_binom[k]).exp() * pow(c, n - k) * pow(s, k);
        out[n - k] = C64::from_polar(mag, k as f64 * phi);
    }
    out
}

fn ln_binomials(n: usize) -> Vec<f64> {
    let mut lf = vec![0.0f64; n + 1];
    for k in 1..=n {
        lf[k] = lf[k - 1] + (k as f64).ln();
    }
    (0..=n).map(|k| lf[n] - lf[k] - lf[n - k]).collect()
}

fn q_value(rho: &CMatrix, amps: &[C64], j2: usize) -> f64 {
    let d = amps.len();
    let mut acc = ZERO;
    for b in 0..d {
        let mut row = ZERO;
        for a in 0..d {
            row += amps[a].conj() * rho[(a, b)];
        }
        acc += row * amps[b];
    }
    (j2 as f64 + 1.0) / (4.0 * PI) * acc.re
}

/// Husimi Q function sampled on a `theta x phi` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QGrid {
    pub j: HalfInt,
    /// `n_theta` points on `[0, pi]`.
    pub theta: Vec<f64>,
    /// `n_phi` points on `[0, 2 pi]`, both ends included.
    pub phi: Vec<f64>,
    /// Row-major `values[i_theta * n_phi + i_phi]`.
    pub values: Vec<f64>,
}

impl QGrid {
    pub fn value(&self, it: usize, ip: usize) -> f64 {
        self.values[it * self.phi.len() + ip]
    }

    /// `int Q dOmega`. Trapezoid rule in both angles, with the leading
    /// Euler-Maclaurin endpoint term in theta (the integrand `Q sin(theta)`
    /// has non-zero slope at the poles).
    pub fn integral(&self) -> f64 {
        let (nt, np) = (self.theta.len(), self.phi.len());
        let ht = PI / (nt - 1) as f64;
        let hp = 2.0 * PI / (np - 1) as f64;
        let ring = |it: usize| -> f64 {
            let row = &self.values[it * np..(it + 1) * np];
            hp * (row.iter().sum::<f64>() - 0.5 * (row[0] + row[np - 1]))
        };
        let rings: Vec<f64> = (0..nt).map(ring).collect();
        let trap: f64 = (0..nt)
            .map(|it| {
                let w = if it == 0 || it == nt - 1 { 0.5 } else { 1.0 };
                w * rings[it] * self.theta[it].sin()
            })
            .sum::<f64>()
            * ht;
        trap + ht * ht / 12.0 * (rings[0] + rings[nt - 1])
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn dicke_n(rho: &DensityMatrix) -> Result<usize> {
    match rho.basis {
        Basis::Dicke { n } => Ok(n),
        other => Err(Error::BasisMismatch {
            expected: "Dicke basis".into(),
            found: other.to_string(),
        }),
    }
}

pub fn husimi_q(rho: &DensityMatrix, n_theta: usize, n_phi: usize) -> Result<QGrid> {
    let n = dicke_n(rho)?;
    if n_theta < 3 || n_phi < 3 {
        return Err(invalid("grid", "need at least 3 points per angle"));
    }
    let theta: Vec<f64> = (0..n_theta).map(|k| PI * k as f64 / (n_theta - 1) as f64).collect();
    let phi: Vec<f64> = (0..n_phi).map(|k| 2.0 * PI * k as f64 / (n_phi - 1) as f64).collect();
    let lb = ln_binomials(n);
    let values: Vec<f64> = theta
        .par_iter()
        .flat_map_iter(|&t| {
            let lb = &lb;
            phi.iter()
                .map(move |&p| q_value(&rho.data, &coherent_amplitudes(n, lb, t, p), n))
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(QGrid {
        j: HalfInt::from_twice(n as i64),
        theta,
        phi,
        values,
    })
}

pub const DEFAULT_Q_GRID: (usize, usize) = (181, 361);

/// Q function on a square grid of the plane perpendicular to the mean spin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarQ {
    /// Coordinates along `n1` and `n2` (unit-sphere units).
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Row-major `values[iu * v.len() + iv]`; zero outside the unit disk.
    pub values: Vec<f64>,
}

impl PlanarQ {
    /// Second moments `[[<uu>, <uv>], [<uv>, <vv>]]` of the planar weight about
    /// its centroid.
    pub fn moments(&self) -> [[f64; 2]; 2] {
        let nv = self.v.len();
        let (mut w, mut mu, mut mv) = (0.0, 0.0, 0.0);
        for (iu, &u) in self.u.iter().enumerate() {
            for (iv, &v) in self.v.iter().enumerate() {
                let q = self.values[iu * nv + iv];
                w += q;
                mu += q * u;
                mv += q * v;
            }
        }
        let (mu, mv) = (mu / w, mv / w);
        let mut m = [[0.0; 2]; 2];
        for (iu, &u) in self.u.iter().enumerate() {
            for (iv, &v) in self.v.iter().enumerate() {
                let q = self.values[iu * nv + iv] / w;
                let (du, dv) = (u - mu, v - mv);
                m[0][0] += q * du * du;
                m[0][1] += q * du * dv;
                m[1][1] += q * dv * dv;
            }
        }
        m[1][0] = m[0][1];
        m
    }

    /// In-plane angle (from `n1`) of the narrowest axis, in `[0, pi)`.
    pub fn minor_axis_angle(&self) -> f64 {
        let m = self.moments();
        ((2.0 * m[0][1]).atan2(m[0][0] - m[1][1]) + PI) / 2.0 % PI
    }
}

/// Orthographic projection of the Q function from the hemisphere centred on
/// the mean direction: the plane point `(u, v)` is the sphere point
/// `u n1 + v n2 + sqrt(1 - u^2 - v^2) n`.
pub fn project_q_perp(rho: &DensityMatrix, report: &SqueezingReport, points: usize, extent: f64) -> Result<PlanarQ> {
    let n = dicke_n(rho)?;
    if points < 2 || !(extent > 0.0 && extent <= 1.0) {
        return Err(invalid("grid", "need >= 2 points and 0 < extent <= 1"));
    }
    let axis: Vec<f64> = (0..points)
        .map(|k| -extent + 2.0 * extent * k as f64 / (points - 1) as f64)
        .collect();
    let lb = ln_binomials(n);
    let (e, e1, e2) = (report.n, report.n1, report.n2);
    let values: Vec<f64> = axis
        .par_iter()
        .flat_map_iter(|&u| {
            let lb = &lb;
            axis.iter()
                .map(move |&v| {
                    let rr = u * u + v * v;
                    if rr > 1.0 {
                        return 0.0;
                    }
                    let w = (1.0 - rr).sqrt();
                    let p: Vec3 = std::array::from_fn(|i| u * e1[i] + v * e2[i] + w * e[i]);
                    let theta = p[2].clamp(-1.0, 1.0).acos();
                    let phi = p[1].atan2(p[0]);
                    q_value(&rho.data, &coherent_amplitudes(n, lb, theta, phi), n)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(PlanarQ {
        u: axis.clone(),
        v: axis,
        values,
    })
}
