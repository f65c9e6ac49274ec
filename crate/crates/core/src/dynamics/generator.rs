//! Master-equation right-hand sides.
//!
//! `lindblad_rhs_collective` and `lindblad_rhs_full` evaluate the generators
//! term by term with dense products. [`Generator`] compiles the same generator
//! into `L(rho) = G_l rho + rho G_r + sum_t A_t rho B_t` with sparse factors,
//! which is what the integrator and the Liouvillian builder use.

use crate::error::Result;
use crate::linalg::{c, CMatrix, SparseOp, C64, I, ZERO};
use crate::spin::{collective_ops, full_ops, Basis, DensityMatrix, SpinOps};

use super::reservoir::{Mode, ModelSpec};

/// `D(a, b) rho = 2 a rho b - rho b a - b a rho`.
pub fn dissipator(a: &CMatrix, b: &CMatrix, rho: &CMatrix) -> CMatrix {
    let ba = b * a;
    a * rho * b * c(2.0) - rho * &ba - ba * rho
}

fn hamiltonian_part(h: &CMatrix, rho: &CMatrix) -> CMatrix {
    (h * rho - rho * h) * (-I)
}

pub fn lindblad_rhs_collective(spec: &ModelSpec, rho: &DensityMatrix) -> Result<CMatrix> {
    Basis::Dicke { n: spec.n }.expect(rho.basis)?;
    spec.basis().expect(rho.basis)?;
    let ops = collective_ops(spec.n)?;
    let (sp, sm, r) = (&ops.s_plus, &ops.s_minus, &rho.data);
    let nb = c(spec.reservoir.n_bar());
    let m = spec.reservoir.m_complex();
    let half_a = c(spec.a / 2.0);
    let diss = dissipator(sp, sm, r) * nb + dissipator(sm, sp, r) * (nb + 1.0)
        - dissipator(sp, sp, r) * m
        - dissipator(sm, sm, r) * m.conj();
    Ok(hamiltonian_part(&(&ops.s_z * c(spec.delta_n())), r) + diss * half_a)
}

pub fn lindblad_rhs_full(spec: &ModelSpec, rho: &DensityMatrix) -> Result<CMatrix> {
    spec.basis().expect(rho.basis)?;
    let Mode::Full(cs) = &spec.mode else {
        return Err(crate::error::Error::BasisMismatch {
            expected: "full model".into(),
            found: "collective model".into(),
        });
    };
    let ops = full_ops(spec.n)?;
    let n = spec.n;
    let lower: Vec<CMatrix> = ops.sigma.iter().map(SparseOp::to_dense).collect();
    let raise: Vec<CMatrix> = lower.iter().map(|s| s.adjoint()).collect();
    let r = &rho.data;
    let nb = spec.reservoir.n_bar();
    let m = spec.reservoir.m_complex();

    let dim = ops.dim();
    let mut h = CMatrix::zeros(dim, dim);
    for i in 0..n {
        h += &raise[i] * &lower[i] * c(spec.delta_n());
        for j in 0..n {
            if i != j {
                let hop = &raise[i] * &lower[j] + &lower[i] * &raise[j];
                h -= hop * c(cs.delta[(i, j)] / 2.0);
            }
        }
    }
    let mut out = hamiltonian_part(&h, r);
    for i in 0..n {
        for j in 0..n {
            let gm = cs.gamma_minus[(i, j)] / 2.0;
            let gp = cs.gamma_plus[(i, j)] / 2.0;
            out += dissipator(&raise[i], &lower[j], r) * c(gm * nb);
            out += dissipator(&lower[i], &raise[j], r) * c(gm * (nb + 1.0));
            out -= dissipator(&raise[i], &raise[j], r) * (m * gp);
            out -= dissipator(&lower[i], &lower[j], r) * (m.conj() * gp);
        }
    }
    Ok(out)
}

/// Dispatches on the model mode.
pub fn lindblad_rhs(spec: &ModelSpec, rho: &DensityMatrix) -> Result<CMatrix> {
    match spec.mode {
        Mode::Collective => lindblad_rhs_collective(spec, rho),
        Mode::Full(_) => lindblad_rhs_full(spec, rho),
    }
}

/// Compiled generator `L(rho) = G_l rho + rho G_r + sum_t A_t rho B_t`.
#[derive(Clone, Debug)]
pub struct Generator {
    basis: Basis,
    left: SparseOp,
    right: SparseOp,
    sandwich: Vec<(SparseOp, SparseOp)>,
}

/// Accumulates `H` and `c D(a, b)` contributions.
struct Builder {
    dim: usize,
    h: SparseOp,
    k: SparseOp,
    sandwich: Vec<(SparseOp, SparseOp)>,
}

impl Builder {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            h: SparseOp::zeros(dim),
            k: SparseOp::zeros(dim),
            sandwich: Vec::new(),
        }
    }

    /// Adds `sum_j c_j D(a, b_j)` for a fixed left factor `a`.
    fn dissipator(&mut self, a: &SparseOp, terms: &[(C64, &SparseOp)]) {
        let mut folded = SparseOp::zeros(self.dim);
        for &(coef, b) in terms {
            if coef == ZERO {
                continue;
            }
            self.k = self.k.add_scaled(&b.mul(a), coef);
            folded = folded.add_scaled(b, coef * 2.0);
        }
        if folded.nnz() > 0 {
            self.sandwich.push((a.clone(), folded));
        }
    }

    fn finish(self, basis: Basis) -> Generator {
        // -i[H, rho] - K rho - rho K
        let left = self.h.scale(-I).add_scaled(&self.k, c(-1.0));
        let right = self.h.scale(I).add_scaled(&self.k, c(-1.0));
        Generator {
            basis,
            left,
            right,
            sandwich: self.sandwich,
        }
    }
}

impl Generator {
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        match &spec.mode {
            Mode::Collective => Ok(Self::collective(spec, &collective_ops(spec.n)?)),
            Mode::Full(_) => Ok(Self::full(spec, &full_ops(spec.n)?)),
        }
    }

    fn collective(spec: &ModelSpec, ops: &SpinOps) -> Self {
        let mut b = Builder::new(ops.dim());
        b.h = ops.sparse_z.scale(c(spec.delta_n()));
        let half_a = spec.a / 2.0;
        let nb = spec.reservoir.n_bar();
        let m = spec.reservoir.m_complex();
        let (sp, sm) = (&ops.sparse_plus, &ops.sparse_minus);
        b.dissipator(sp, &[(c(half_a * nb), sm), (-m * half_a, sp)]);
        b.dissipator(sm, &[(c(half_a * (nb + 1.0)), sp), (-m.conj() * half_a, sm)]);
        b.finish(ops.basis)
    }

    fn full(spec: &ModelSpec, ops: &SpinOps) -> Self {
        let Mode::Full(cs) = &spec.mode else {
            unreachable!("full generator requested for a collective spec")
        };
        let n = spec.n;
        let lower = &ops.sigma;
        let raise: Vec<SparseOp> = lower.iter().map(SparseOp::adjoint).collect();
        let nb = spec.reservoir.n_bar();
        let m = spec.reservoir.m_complex();

        let mut b = Builder::new(ops.dim());
        let mut h = SparseOp::zeros(ops.dim());
        for i in 0..n {
            h = h.add_scaled(&raise[i].mul(&lower[i]), c(spec.delta_n()));
            for j in 0..n {
                if i != j && cs.delta[(i, j)] != 0.0 {
                    let hop = raise[i].mul(&lower[j]).add(&lower[i].mul(&raise[j]));
                    h = h.add_scaled(&hop, c(-cs.delta[(i, j)] / 2.0));
                }
            }
        }
        b.h = h;
        for i in 0..n {
            let mut up: Vec<(C64, &SparseOp)> = Vec::with_capacity(2 * n);
            let mut down: Vec<(C64, &SparseOp)> = Vec::with_capacity(2 * n);
            for j in 0..n {
                let gm = cs.gamma_minus[(i, j)] / 2.0;
                let gp = cs.gamma_plus[(i, j)] / 2.0;
                up.push((c(gm * nb), &lower[j]));
                up.push((-m * gp, &raise[j]));
                down.push((c(gm * (nb + 1.0)), &raise[j]));
                down.push((-m.conj() * gp, &lower[j]));
            }
            b.dissipator(&raise[i], &up);
            b.dissipator(&lower[i], &down);
        }
        b.finish(ops.basis)
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `out = L(rho)`.
    pub fn apply_into(&self, rho: &CMatrix, out: &mut CMatrix) {
        out.fill(ZERO);
        let one = c(1.0);
        self.left.left_mul_acc(rho, one, out);
        self.right.right_mul_acc(rho, one, out);
        let dim = self.dim();
        let mut tmp = CMatrix::zeros(dim, dim);
        for (a, b) in &self.sandwich {
            tmp.fill(ZERO);
            a.left_mul_acc(rho, one, &mut tmp);
            b.right_mul_acc(&tmp, one, out);
        }
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        self.apply_into(rho, &mut out);
        out
    }

    /// Triplets of the Liouvillian acting on column-stacked `vec(rho)`,
    /// index `row + col * dim`.
    pub fn superoperator_triplets(&self) -> Vec<(usize, usize, C64)> {
        let d = self.dim();
        let mut out = Vec::new();
        for &(r, k, g) in self.left.entries() {
            for col in 0..d {
                out.push((r + col * d, k + col * d, g));
            }
        }
        for &(r, k, g) in self.right.entries() {
            // (rho G)[row, k] += rho[row, r] G[r, k]
            for row in 0..d {
                out.push((row + k * d, row + r * d, g));
            }
        }
        for (a, b) in &self.sandwich {
            for &(r1, c1, av) in a.entries() {
                for &(r2, c2, bv) in b.entries() {
                    // (A rho B)[r1, c2] += A[r1, c1] rho[c1, r2] B[r2, c2]
                    out.push((r1 + c2 * d, c1 + r2 * d, av * bv));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::{build_couplings, ideal_placement, Placement, WaveguideGeometry};
    use crate::dynamics::reservoir::SqueezedReservoir;
    use crate::linalg::{max_abs, trace};
    use crate::spin::{dicke_state, embed_symmetric, HalfInt};

    fn random_state(basis: Basis, seed: u64) -> DensityMatrix {
        let d = basis.dim();
        let mut x = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        let mut next = || {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let g = CMatrix::from_fn(d, d, |_, _| C64::new(next(), next()));
        let mut rho = &g * g.adjoint();
        let tr = trace(&rho);
        rho /= tr;
        DensityMatrix::new(rho, basis).unwrap()
    }

    fn collective_spec(n: usize, r: f64, alpha: f64, delta: f64) -> ModelSpec {
        ModelSpec::collective(n, 1.0, delta, SqueezedReservoir::new(r, alpha).unwrap()).unwrap()
    }

    #[test]
    fn compiled_collective_matches_literal() {
        for (n, seed) in [(1, 3), (4, 5), (7, 9)] {
            let spec = collective_spec(n, 0.6, 1.1, 0.7);
            let rho = random_state(spec.basis(), seed);
            let lit = lindblad_rhs_collective(&spec, &rho).unwrap();
            let gen = Generator::new(&spec).unwrap().apply(&rho.data);
            assert!(max_abs(&(lit - gen)) < 1e-12);
        }
    }

    #[test]
    fn compiled_full_matches_literal_for_generic_placement() {
        let geom = WaveguideGeometry::default();
        let cs = build_couplings(&geom, &Placement::new(vec![0.3, 1.7, 2.2, 4.1]).unwrap()).unwrap();
        let spec = ModelSpec::full(cs, 0.8, SqueezedReservoir::new(0.4, 2.0).unwrap()).unwrap();
        let rho = random_state(spec.basis(), 11);
        let lit = lindblad_rhs_full(&spec, &rho).unwrap();
        let gen = Generator::new(&spec).unwrap().apply(&rho.data);
        assert!(max_abs(&lit) > 1e-3);
        assert!(max_abs(&(lit - gen)) < 1e-12);
    }

    #[test]
    fn rhs_is_trace_free() {
        let spec = collective_spec(5, 0.9, 0.2, 1.3);
        for seed in 0..5 {
            let rho = random_state(spec.basis(), seed);
            let d = lindblad_rhs_collective(&spec, &rho).unwrap();
            assert!(trace(&d).norm() < 1e-12);
        }
    }

    #[test]
    fn single_emitter_decays_at_rate_a() {
        let geom = WaveguideGeometry::default();
        let cs = build_couplings(&geom, &ideal_placement(1, &geom).unwrap()).unwrap();
        let spec = ModelSpec::full(cs, 1.0, SqueezedReservoir::new(0.0, 0.0).unwrap()).unwrap();
        let excited = DensityMatrix::new(
            CMatrix::from_fn(2, 2, |i, j| if i == 1 && j == 1 { c(1.0) } else { ZERO }),
            spec.basis(),
        )
        .unwrap();
        let d = lindblad_rhs_full(&spec, &excited).unwrap();
        assert!((d[(1, 1)] - c(-spec.a)).norm() < 1e-12);
    }

    #[test]
    fn vacuum_dark_state() {
        let spec = collective_spec(6, 0.0, 0.5, 1.0);
        let rho = dicke_state(6, HalfInt::from_int(-3)).unwrap();
        assert!(max_abs(&lindblad_rhs_collective(&spec, &rho).unwrap()) < 1e-15);
    }

    #[test]
    fn ideal_full_model_reduces_to_collective() {
        let n = 3;
        let geom = WaveguideGeometry::default();
        let cs = build_couplings(&geom, &ideal_placement(n, &geom).unwrap()).unwrap();
        let res = SqueezedReservoir::new(0.5, 0.5).unwrap();
        let full = ModelSpec::full(cs, 1.0, res).unwrap();
        let coll = ModelSpec::collective(n, full.a, 1.0, res).unwrap();
        let rho = random_state(coll.basis(), 21);
        let big = embed_symmetric(&rho, n).unwrap();
        let d_full = lindblad_rhs_full(&full, &big).unwrap();
        let d_coll = lindblad_rhs_collective(&coll, &rho).unwrap();
        let embedded = embed_symmetric(&DensityMatrix { data: d_coll, basis: coll.basis() }, n).unwrap();
        assert!(max_abs(&(d_full - embedded.data)) < 1e-10);
    }

    #[test]
    fn superoperator_matches_apply() {
        let spec = collective_spec(3, 0.7, 0.4, 0.9);
        let gen = Generator::new(&spec).unwrap();
        let rho = random_state(spec.basis(), 2);
        let d = gen.dim();
        let mut out = vec![ZERO; d * d];
        for (r, col, v) in gen.superoperator_triplets() {
            out[r] += v * rho.data.as_slice()[col];
        }
        let direct = gen.apply(&rho.data);
        for (a, b) in out.iter().zip(direct.as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn basis_mismatch_is_rejected() {
        let spec = collective_spec(3, 0.5, 0.5, 1.0);
        let wrong = random_state(Basis::Dicke { n: 4 }, 1);
        assert!(lindblad_rhs_collective(&spec, &wrong).is_err());
        assert!(lindblad_rhs_full(&spec, &random_state(spec.basis(), 1)).is_err());
    }
}
