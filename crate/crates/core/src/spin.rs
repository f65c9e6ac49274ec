//! Collective spin operators and states in the Dicke basis (dimension N+1) and
//! in the full product basis (dimension 2^N).
//!
//! Dicke index `k` holds `|j, k - j>`. In the product basis bit `i` of the index
//! is set when emitter `i` is excited, so `|g...g>` is index 0.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{
    self, c, hermiticity_defect, min_eigenvalue, trace, trace_of_product, CMatrix, SparseOp, C64,
    I, ONE,
};

/// Largest emitter count accepted in the product basis.
pub const N_MAX_FULL: usize = 8;

/// A half-integer stored as twice its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HalfInt(i64);

impl HalfInt {
    pub const fn from_twice(twice: i64) -> Self {
        Self(twice)
    }

    pub const fn from_int(v: i64) -> Self {
        Self(2 * v)
    }

    /// Nearest half-integer; errors if `v` is not one to 1e-9.
    pub fn from_f64(v: f64) -> Result<Self> {
        let twice = (2.0 * v).round();
        if !v.is_finite() || (2.0 * v - twice).abs() > 1e-9 {
            return Err(invalid("m", format!("{v} is not a half-integer")));
        }
        Ok(Self(twice as i64))
    }

    pub const fn twice(self) -> i64 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Dicke { n: usize },
    Full { n: usize },
}

impl Basis {
    pub fn n(self) -> usize {
        match self {
            Basis::Dicke { n } | Basis::Full { n } => n,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Basis::Dicke { n } => n + 1,
            Basis::Full { n } => 1 << n,
        }
    }

    /// Twice the total spin `j = N/2` of the symmetric multiplet.
    pub fn j(self) -> HalfInt {
        HalfInt::from_twice(self.n() as i64)
    }

    pub(crate) fn expect(self, found: Basis) -> Result<()> {
        if self == found {
            Ok(())
        } else {
            Err(Error::BasisMismatch {
                expected: self.to_string(),
                found: found.to_string(),
            })
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Dicke { n } => write!(f, "Dicke(N={n})"),
            Basis::Full { n } => write!(f, "product(N={n})"),
        }
    }
}

/// The m values `-j..=j` of the symmetric multiplet, ascending.
pub fn m_values(n: usize) -> Vec<HalfInt> {
    (0..=n as i64).map(|k| HalfInt::from_twice(2 * k - n as i64)).collect()
}

/// Collective spin operators for one basis, plus the first and symmetrized
/// second moments in sparse form for fast expectation values.
#[derive(Clone, Debug)]
pub struct SpinOps {
    pub basis: Basis,
    pub s_plus: CMatrix,
    pub s_minus: CMatrix,
    pub s_x: CMatrix,
    pub s_y: CMatrix,
    pub s_z: CMatrix,
    /// Per-site lowering operators (product basis only).
    pub sigma: Vec<SparseOp>,
    pub(crate) sparse_plus: SparseOp,
    pub(crate) sparse_minus: SparseOp,
    pub(crate) sparse_z: SparseOp,
    first: [SparseOp; 3],
    second: [[SparseOp; 3]; 3],
}

impl SpinOps {
    fn from_ladder(basis: Basis, plus: SparseOp, z: SparseOp, sigma: Vec<SparseOp>) -> Self {
        let minus = plus.adjoint();
        let half = c(0.5);
        let x = plus.add(&minus).scale(half);
        let y = plus.add_scaled(&minus, c(-1.0)).scale(-I * half);
        let first = [x, y, z.clone()];
        let second = std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                let ab = first[a].mul(&first[b]);
                let ba = first[b].mul(&first[a]);
                ab.add(&ba).scale(half)
            })
        });
        Self {
            basis,
            s_plus: plus.to_dense(),
            s_minus: minus.to_dense(),
            s_x: first[0].to_dense(),
            s_y: first[1].to_dense(),
            s_z: z.to_dense(),
            sigma,
            sparse_plus: plus,
            sparse_minus: minus,
            sparse_z: z,
            first,
            second,
        }
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `(<S_x>, <S_y>, <S_z>)`.
    pub fn mean_spin(&self, rho: &CMatrix) -> [f64; 3] {
        std::array::from_fn(|a| self.first[a].expect(rho).re)
    }

    /// Symmetrized second moments `<(S_a S_b + S_b S_a)/2>`.
    pub fn second_moments(&self, rho: &CMatrix) -> [[f64; 3]; 3] {
        std::array::from_fn(|a| std::array::from_fn(|b| self.second[a][b].expect(rho).re))
    }

    /// `<S^2>`.
    pub fn casimir(&self, rho: &CMatrix) -> f64 {
        let m = self.second_moments(rho);
        m[0][0] + m[1][1] + m[2][2]
    }

    pub fn casimir_op(&self) -> CMatrix {
        &self.s_x * &self.s_x + &self.s_y * &self.s_y + &self.s_z * &self.s_z
    }
}

pub fn collective_ops(n: usize) -> Result<SpinOps> {
    if n == 0 {
        return Err(invalid("n", "at least one emitter is required"));
    }
    let basis = Basis::Dicke { n };
    let j = n as f64 / 2.0;
    let plus = SparseOp::from_triplets(
        n + 1,
        (0..n).map(|k| {
            let m = k as f64 - j;
            (k + 1, k, c((j * (j + 1.0) - m * (m + 1.0)).sqrt()))
        }),
    );
    let z = SparseOp::from_triplets(n + 1, (0..=n).map(|k| (k, k, c(k as f64 - j))));
    Ok(SpinOps::from_ladder(basis, plus, z, Vec::new()))
}

pub fn full_ops(n: usize) -> Result<SpinOps> {
    if n == 0 {
        return Err(invalid("n", "at least one emitter is required"));
    }
    if n > N_MAX_FULL {
        return Err(Error::TooLarge(format!(
            "product basis supports N <= {N_MAX_FULL}, got N = {n}"
        )));
    }
    let dim = 1usize << n;
    let sigma: Vec<SparseOp> = (0..n)
        .map(|i| {
            let bit = 1usize << i;
            SparseOp::from_triplets(
                dim,
                (0..dim).filter(|b| b & bit != 0).map(|b| (b & !bit, b, ONE)),
            )
        })
        .collect();
    let minus = sigma
        .iter()
        .fold(SparseOp::zeros(dim), |acc, s| acc.add(s));
    let half_n = n as f64 / 2.0;
    let z = SparseOp::from_triplets(
        dim,
        (0..dim).map(|b| (b, b, c(b.count_ones() as f64 - half_n))),
    );
    Ok(SpinOps::from_ladder(Basis::Full { n }, minus.adjoint(), z, sigma))
}

pub fn ops_for(basis: Basis) -> Result<SpinOps> {
    match basis {
        Basis::Dicke { n } => collective_ops(n),
        Basis::Full { n } => full_ops(n),
    }
}

/// A density matrix tagged with its basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub data: CMatrix,
    pub basis: Basis,
}

/// Tolerances for [`DensityMatrix::check`].
#[derive(Clone, Copy, Debug)]
pub struct StateTolerance {
    pub trace: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
}

impl StateTolerance {
    pub const STRICT: Self = Self {
        trace: 1e-10,
        hermiticity: 1e-10,
        min_eigenvalue: -1e-8,
    };
    pub const TRAJECTORY: Self = Self {
        trace: 1e-9,
        hermiticity: 1e-9,
        min_eigenvalue: -1e-8,
    };
}

impl DensityMatrix {
    /// Wraps `data` after checking its shape; physical invariants are checked
    /// separately by [`DensityMatrix::check`].
    pub fn new(data: CMatrix, basis: Basis) -> Result<Self> {
        let dim = basis.dim();
        if data.nrows() != dim || data.ncols() != dim {
            return Err(Error::BasisMismatch {
                expected: format!("{basis} with dim {dim}"),
                found: format!("{}x{} matrix", data.nrows(), data.ncols()),
            });
        }
        Ok(Self { data, basis })
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn trace(&self) -> C64 {
        trace(&self.data)
    }

    pub fn purity(&self) -> f64 {
        trace_of_product(&self.data, &self.data).re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.data)
    }

    pub fn check(&self, tol: StateTolerance) -> Result<()> {
        let tr = self.trace();
        if (tr - ONE).norm() > tol.trace {
            return Err(Error::InvariantViolation(format!("trace {tr} deviates from 1")));
        }
        let herm = hermiticity_defect(&self.data);
        if herm > tol.hermiticity {
            return Err(Error::InvariantViolation(format!(
                "hermiticity defect {herm:.3e}"
            )));
        }
        let ev = self.min_eigenvalue();
        if ev < tol.min_eigenvalue {
            return Err(Error::InvariantViolation(format!(
                "negative eigenvalue {ev:.3e}"
            )));
        }
        Ok(())
    }

    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        self.basis.expect(other.basis)?;
        Ok(linalg::trace_distance(&self.data, &other.data))
    }
}

/// `|j,m><j,m|` in the Dicke basis.
pub fn dicke_state(n: usize, m: HalfInt) -> Result<DensityMatrix> {
    if n == 0 {
        return Err(invalid("n", "at least one emitter is required"));
    }
    let j2 = n as i64;
    if m.twice().abs() > j2 || (m.twice() - j2) % 2 != 0 {
        return Err(invalid("m", format!("m = {m} is not in -{n}/2..={n}/2")));
    }
    let k = ((m.twice() + j2) / 2) as usize;
    let mut data = CMatrix::zeros(n + 1, n + 1);
    data[(k, k)] = ONE;
    DensityMatrix::new(data, Basis::Dicke { n })
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    let lf = |x: usize| (1..=x).map(|v| (v as f64).ln()).sum::<f64>();
    lf(n) - lf(k) - lf(n - k)
}

/// Isometry `V` (2^N x (N+1)) taking `|j, k - j>` to the normalized uniform
/// superposition of product states with `k` excitations.
pub fn symmetric_isometry(n: usize) -> Result<CMatrix> {
    if n == 0 || n > N_MAX_FULL {
        return Err(invalid("n", format!("need 1 <= N <= {N_MAX_FULL}, got {n}")));
    }
    let dim = 1usize << n;
    let norms: Vec<f64> = (0..=n).map(|k| (-0.5 * ln_binomial(n, k)).exp()).collect();
    let mut v = CMatrix::zeros(dim, n + 1);
    for b in 0..dim {
        let k = b.count_ones() as usize;
        v[(b, k)] = c(norms[k]);
    }
    Ok(v)
}

/// `V rho V^dagger` for a Dicke-basis state.
pub fn embed_symmetric(rho: &DensityMatrix, n: usize) -> Result<DensityMatrix> {
    Basis::Dicke { n }.expect(rho.basis)?;
    let v = symmetric_isometry(n)?;
    DensityMatrix::new(&v * &rho.data * v.adjoint(), Basis::Full { n })
}

/// `V^dagger rho V`, the block of a product-basis state on the symmetric
/// multiplet. Trace is preserved only for states supported there.
pub fn project_symmetric(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let n = rho.n();
    Basis::Full { n }.expect(rho.basis)?;
    let v = symmetric_isometry(n)?;
    DensityMatrix::new(v.adjoint() * &rho.data * &v, Basis::Dicke { n })
}
