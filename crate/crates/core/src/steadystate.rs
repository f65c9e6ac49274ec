//! Closed-form steady state of the collective master equation.
//!
//! The jump operator `R_z` is non-Hermitian; its right eigenvectors `psi_m`
//! and the eigenvectors `phi_m` of its adjoint form a biorthogonal pair
//! obtained from Dicke states by a rotation and an imaginary-time boost:
//! `psi_m = e^{theta S_z} U |j,m>`, `phi_m = e^{-theta S_z} U |j,m>`, with
//! `theta = ln sqrt(tanh r)`. The steady state is
//! `rho = sum_mn p_m p_n^* <phi_m|phi_n> |psi_m><psi_n|`.

use std::f64::consts::FRAC_PI_4;

use crate::dynamics::{Mode, ModelSpec, SqueezedReservoir};
use crate::error::{invalid, Error, Result};
use crate::linalg::{c, hermitian_part, trace, CMatrix, C64, I, ONE, ZERO};
use crate::spin::{collective_ops, dicke_state, m_values, Basis, DensityMatrix, HalfInt};

/// Largest acceptable biorthogonality defect before the basis is rejected.
pub const BIORTHOGONALITY_LIMIT: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct BiorthogonalBasis {
    pub n: usize,
    /// Columns are `psi_m`, ordered by ascending m.
    pub psi: CMatrix,
    /// Columns are `phi_m`.
    pub phi: CMatrix,
    pub m_values: Vec<HalfInt>,
    /// `gram_phi[(m, n)] = <phi_m|phi_n>`.
    pub gram_phi: CMatrix,
    /// The operator `R_z` itself.
    pub r_z: CMatrix,
}

impl BiorthogonalBasis {
    /// `max |<phi_m|psi_n> - delta_mn|`.
    pub fn biorthogonality_defect(&self) -> f64 {
        let g = self.phi.adjoint() * &self.psi;
        let d = g.nrows();
        let mut worst = 0.0f64;
        for i in 0..d {
            for k in 0..d {
                let target = if i == k { ONE } else { ZERO };
                worst = worst.max((g[(i, k)] - target).norm());
            }
        }
        worst
    }

    /// Worst of `||R_z psi_m - m psi_m||` and `||R_z^dag phi_m - m phi_m||`,
    /// each divided by `(||R_z||_F + |m|) ||v||`.
    pub fn eigen_residual(&self) -> f64 {
        let scale = self.r_z.norm();
        let r_adj = self.r_z.adjoint();
        let mut worst = 0.0f64;
        for (k, m) in self.m_values.iter().enumerate() {
            let mv = m.value();
            for (op, vecs) in [(&self.r_z, &self.psi), (&r_adj, &self.phi)] {
                let v = vecs.column(k);
                let res = (op * v - v * c(mv)).norm();
                worst = worst.max(res / ((scale + mv.abs()) * v.norm()));
            }
        }
        worst
    }

    /// `R_+-`, the images of `S+-` under the same boost and rotation that
    /// carry `S_z` to `R_z`.
    pub fn ladder_ops(&self, reservoir: &SqueezedReservoir) -> Result<(CMatrix, CMatrix)> {
        let (boost, rot) = transforms(self.n, reservoir)?;
        let ops = collective_ops(self.n)?;
        let inv_boost = CMatrix::from_diagonal(&boost.diagonal().map(|v| ONE / v));
        let conj = |op: &CMatrix| &boost * &rot * op * rot.adjoint() * &inv_boost;
        Ok((conj(&ops.s_plus), conj(&ops.s_minus)))
    }
}

/// `R_z = i (4|M|)^{-1/2} (S+ e^{i alpha/2} sinh r - S- e^{-i alpha/2} cosh r)`.
pub fn r_z_operator(n: usize, reservoir: &SqueezedReservoir) -> Result<CMatrix> {
    let ops = collective_ops(n)?;
    let r = reservoir.r;
    let m_abs = reservoir.m_complex().norm();
    if m_abs == 0.0 {
        return Err(invalid("r", "R_z is undefined without squeezing"));
    }
    let half = C64::from_polar(1.0, reservoir.alpha / 2.0);
    let pref = I / (4.0 * m_abs).sqrt();
    Ok((&ops.s_plus * (half * r.sinh()) - &ops.s_minus * (half.conj() * r.cosh())) * pref)
}

/// The diagonal boost `e^{theta S_z}` and the rotation
/// `U = exp(-(pi/4)(SS+ - SS-))`, `SS+- = S+- e^{+-i(alpha + pi)/2}`.
fn transforms(n: usize, reservoir: &SqueezedReservoir) -> Result<(CMatrix, CMatrix)> {
    if !(reservoir.r > 0.0) {
        return Err(invalid("r", "the biorthogonal basis requires r > 0"));
    }
    let ops = collective_ops(n)?;
    let theta = 0.5 * reservoir.r.tanh().ln();
    let boost = CMatrix::from_diagonal(&ops.s_z.diagonal().map(|m| c((theta * m.re).exp())));
    let phase = C64::from_polar(1.0, (reservoir.alpha + std::f64::consts::PI) / 2.0);
    let gen = &ops.s_plus * phase - &ops.s_minus * phase.conj();
    // gen is anti-Hermitian; i*gen is Hermitian with real spectrum lambda and
    // exp(-(pi/4) gen) = V diag(e^{i pi lambda / 4}) V^dag.
    let herm = hermitian_part(&(gen * I));
    let eig = herm.symmetric_eigen();
    let v = eig.eigenvectors;
    let phases = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::from_polar(1.0, FRAC_PI_4 * l)));
    let rot = &v * phases * v.adjoint();
    Ok((boost, rot))
}

pub fn build_basis(n: usize, reservoir: &SqueezedReservoir) -> Result<BiorthogonalBasis> {
    let (boost, rot) = transforms(n, reservoir)?;
    let inv_boost = CMatrix::from_diagonal(&boost.diagonal().map(|v| ONE / v));
    let psi = &boost * &rot;
    let phi = &inv_boost * &rot;
    let gram_phi = phi.adjoint() * &phi;
    let basis = BiorthogonalBasis {
        n,
        psi,
        phi,
        m_values: m_values(n),
        gram_phi,
        r_z: r_z_operator(n, reservoir)?,
    };
    let defect = basis.biorthogonality_defect();
    if !(defect <= BIORTHOGONALITY_LIMIT) {
        return Err(Error::Conditioning { residual: defect });
    }
    Ok(basis)
}

/// Unnormalized coefficients `p_m`, ascending in m.
#[derive(Clone, Debug, PartialEq)]
pub struct SteadyCoefficients {
    pub n: usize,
    pub p: Vec<C64>,
}

impl SteadyCoefficients {
    /// `max_m |p_{m+1} (A(m+1) + i Delta_N) - (A m - i Delta_N) p_m|`,
    /// relative to `max |p|`.
    pub fn recurrence_defect(&self, a: f64, delta_n: f64) -> f64 {
        let j = self.n as f64 / 2.0;
        let scale = self.p.iter().fold(0.0f64, |acc, v| acc.max(v.norm()));
        self.p
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let m = k as f64 - j;
                (w[1] * C64::new(a * (m + 1.0), delta_n) - C64::new(a * m, -delta_n) * w[0]).norm()
            })
            .fold(0.0f64, f64::max)
            / scale.max(f64::MIN_POSITIVE)
    }
}

/// Runs `p_{m+1} = (A m - i Delta_N) / (A (m+1) + i Delta_N) p_m` upward from
/// `p_{-j} = 1`.
///
/// With `Delta_N = 0` and integer `j` the step from `m = -1` divides by zero;
/// the `Delta_N -> 0` limit of the normalized state puts all weight on
/// `m = 0`, which is what is returned.
pub fn steady_coefficients(n: usize, a: f64, delta_n: f64) -> Result<SteadyCoefficients> {
    if n == 0 {
        return Err(invalid("n", "at least one emitter is required"));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid("A", format!("collective rate must be positive, got {a}")));
    }
    if !delta_n.is_finite() {
        return Err(invalid("delta_N", "must be finite"));
    }
    if delta_n == 0.0 && n.is_multiple_of(2) {
        let mut p = vec![ZERO; n + 1];
        p[n / 2] = ONE;
        return Ok(SteadyCoefficients { n, p });
    }
    let j = n as f64 / 2.0;
    let mut p = Vec::with_capacity(n + 1);
    p.push(ONE);
    for k in 0..n {
        let m = k as f64 - j;
        let next = p[k] * C64::new(a * m, -delta_n) / C64::new(a * (m + 1.0), delta_n);
        p.push(next);
    }
    Ok(SteadyCoefficients { n, p })
}

pub fn assemble_steady(basis: &BiorthogonalBasis, coeffs: &SteadyCoefficients) -> Result<DensityMatrix> {
    if basis.n != coeffs.n {
        return Err(Error::BasisMismatch {
            expected: format!("coefficients for N = {}", basis.n),
            found: format!("N = {}", coeffs.n),
        });
    }
    let d = basis.n + 1;
    let inner = CMatrix::from_fn(d, d, |m, k| coeffs.p[m] * coeffs.p[k].conj() * basis.gram_phi[(m, k)]);
    let raw = &basis.psi * inner * basis.psi.adjoint();
    let tr = trace(&raw);
    if !(tr.norm() > 0.0 && tr.re.is_finite()) {
        return Err(Error::Conditioning { residual: tr.norm() });
    }
    let rho = DensityMatrix::new(hermitian_part(&(raw / tr)), Basis::Dicke { n: basis.n })?;
    let ev = rho.min_eigenvalue();
    if ev < -1e-6 {
        return Err(Error::InvariantViolation(format!(
            "assembled steady state has eigenvalue {ev:.3e}"
        )));
    }
    Ok(rho)
}

/// Analytic steady state for `N` emitters; `r = 0` gives `|j,-j>`.
pub fn analytic_steady_state(n: usize, a: f64, delta_n: f64, reservoir: &SqueezedReservoir) -> Result<DensityMatrix> {
    let reservoir = SqueezedReservoir::new(reservoir.r, reservoir.alpha)?;
    if reservoir.r == 0.0 {
        return dicke_state(n, HalfInt::from_twice(-(n as i64)));
    }
    let coeffs = steady_coefficients(n, a, delta_n)?;
    let basis = build_basis(n, &reservoir)?;
    assemble_steady(&basis, &coeffs)
}

/// Analytic steady state of a collective model specification.
pub fn steady_state_of(spec: &ModelSpec) -> Result<DensityMatrix> {
    if !matches!(spec.mode, Mode::Collective) {
        return Err(Error::BasisMismatch {
            expected: "collective model".into(),
            found: "full model".into(),
        });
    }
    analytic_steady_state(spec.n, spec.a, spec.delta_n(), &spec.reservoir)
}
