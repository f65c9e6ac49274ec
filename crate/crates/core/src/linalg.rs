//! Dense and sparse complex matrix helpers shared by the physics modules.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Largest elementwise modulus of `m - m^dagger`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m)[0]
}

/// Trace distance `||a - b||_1 / 2` between two Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b)).iter().map(|x| x.abs()).sum::<f64>()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// `Tr(a b)` without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Square complex matrix stored as coordinate triplets.
///
/// Spin operators in both bases have O(dim) nonzeros, so the master-equation
/// right-hand side is evaluated with these instead of dense products.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOp {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            entries: (0..dim).map(|k| (k, k, ONE)).collect(),
        }
    }

    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let mut acc: HashMap<(usize, usize), C64> = HashMap::new();
        for (r, col, v) in triplets {
            assert!(r < dim && col < dim, "triplet ({r}, {col}) outside dim {dim}");
            *acc.entry((r, col)).or_insert(ZERO) += v;
        }
        let mut entries: Vec<_> = acc
            .into_iter()
            .filter(|(_, v)| *v != ZERO)
            .map(|((r, col), v)| (r, col, v))
            .collect();
        entries.sort_by_key(|&(r, col, _)| (col, r));
        Self { dim, entries }
    }

    pub fn from_dense(m: &CMatrix) -> Self {
        let dim = m.nrows();
        let trip = (0..dim)
            .flat_map(|col| (0..dim).map(move |r| (r, col)))
            .filter(|&(r, col)| m[(r, col)] != ZERO)
            .map(|(r, col)| (r, col, m[(r, col)]));
        Self::from_triplets(dim, trip)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, C64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for &(r, col, v) in &self.entries {
            m[(r, col)] += v;
        }
        m
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_triplets(self.dim, self.entries.iter().map(|&(r, col, v)| (r, col, v * s)))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.dim,
            self.entries.iter().map(|&(r, col, v)| (col, r, v.conj())),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self::from_triplets(
            self.dim,
            self.entries.iter().chain(other.entries.iter()).copied(),
        )
    }

    pub fn add_scaled(&self, other: &Self, s: C64) -> Self {
        assert_eq!(self.dim, other.dim);
        Self::from_triplets(
            self.dim,
            self.entries
                .iter()
                .copied()
                .chain(other.entries.iter().map(|&(r, col, v)| (r, col, v * s))),
        )
    }

    /// Sparse product `self * other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut by_row: Vec<Vec<(usize, C64)>> = vec![Vec::new(); self.dim];
        for &(r, col, v) in &other.entries {
            by_row[r].push((col, v));
        }
        let trip = self.entries.iter().flat_map(|&(r, k, a)| {
            by_row[k].iter().map(move |&(col, b)| (r, col, a * b))
        });
        Self::from_triplets(self.dim, trip.collect::<Vec<_>>())
    }

    /// `out += s * self * rho`.
    pub fn left_mul_acc(&self, rho: &CMatrix, s: C64, out: &mut CMatrix) {
        let d = self.dim;
        let src = rho.as_slice();
        let dst = out.as_mut_slice();
        for k in 0..d {
            let base = k * d;
            for &(r, col, v) in &self.entries {
                dst[base + r] += s * v * src[base + col];
            }
        }
    }

    /// `out += s * rho * self`.
    pub fn right_mul_acc(&self, rho: &CMatrix, s: C64, out: &mut CMatrix) {
        let d = self.dim;
        let src = rho.as_slice();
        let dst = out.as_mut_slice();
        for &(r, col, v) in &self.entries {
            let sv = s * v;
            let (from, to) = (r * d, col * d);
            for i in 0..d {
                dst[to + i] += sv * src[from + i];
            }
        }
    }

    /// `Tr(rho * self)`.
    pub fn expect(&self, rho: &CMatrix) -> C64 {
        self.entries
            .iter()
            .map(|&(r, col, v)| v * rho[(col, r)])
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(d: usize, seed: u64) -> CMatrix {
        let mut x = seed;
        CMatrix::from_fn(d, d, |_, _| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((x >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = ((x >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
            C64::new(a, b)
        })
    }

    #[test]
    fn sparse_products_match_dense() {
        let a = sample(6, 1);
        let mut b = sample(6, 2);
        b[(1, 2)] = ZERO;
        let rho = sample(6, 3);
        let (sa, sb) = (SparseOp::from_dense(&a), SparseOp::from_dense(&b));

        assert!(max_abs(&(sa.mul(&sb).to_dense() - &a * &b)) < 1e-12);

        let mut out = CMatrix::zeros(6, 6);
        sa.left_mul_acc(&rho, c(2.0), &mut out);
        assert!(max_abs(&(out - &a * &rho * c(2.0))) < 1e-12);

        let mut out = CMatrix::zeros(6, 6);
        sb.right_mul_acc(&rho, I, &mut out);
        assert!(max_abs(&(out - &rho * &b * I)) < 1e-12);

        assert!((sa.expect(&rho) - trace(&(&rho * &a))).norm() < 1e-12);
        assert!(max_abs(&(sa.adjoint().to_dense() - a.adjoint())) < 1e-15);
    }

    #[test]
    fn trace_distance_of_orthogonal_pure_states_is_one() {
        let mut a = CMatrix::zeros(3, 3);
        let mut b = CMatrix::zeros(3, 3);
        a[(0, 0)] = ONE;
        b[(2, 2)] = ONE;
        assert!((trace_distance(&a, &b) - 1.0).abs() < 1e-14);
        assert_eq!(trace_distance(&a, &a), 0.0);
    }
}
