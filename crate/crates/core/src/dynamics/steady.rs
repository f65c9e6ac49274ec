//! Steady states from the Liouvillian nullspace.
//!
//! Every term of both generators changes the excitation numbers of ket and
//! bra together or in opposite directions by one, so the parity of
//! `exc(ket) + exc(bra)` is conserved. The steady state reached from any
//! diagonal state lives in the even block, which is the only block solved here.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, trace, CMatrix, C64, ONE, ZERO};
use crate::spin::{Basis, DensityMatrix};

use super::generator::Generator;
use super::reservoir::ModelSpec;

/// Largest even-block size accepted for the dense solve.
pub const MAX_BLOCK: usize = 2048;

/// Pivot ratio below which the bordered system is treated as singular.
const PIVOT_RATIO: f64 = 1e-12;
/// Singular values below this fraction of the largest count as null.
const NULL_RATIO: f64 = 1e-9;

fn excitations(basis: Basis, k: usize) -> u32 {
    match basis {
        Basis::Dicke { .. } => k as u32,
        Basis::Full { .. } => k.count_ones(),
    }
}

/// Vectorized indices `row + col * dim` of the even block.
fn even_block(basis: Basis) -> (Vec<usize>, Vec<Option<usize>>) {
    let d = basis.dim();
    let mut keep = Vec::new();
    let mut pos = vec![None; d * d];
    for col in 0..d {
        for row in 0..d {
            if (excitations(basis, row) + excitations(basis, col)).is_multiple_of(2) {
                pos[row + col * d] = Some(keep.len());
                keep.push(row + col * d);
            }
        }
    }
    (keep, pos)
}

/// Diagnostics of a nullspace solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadySolve {
    /// `||L vec(rho)|| / ||L||_F`.
    pub relative_residual: f64,
    pub used_svd: bool,
}

pub fn steady_state_numeric(spec: &ModelSpec) -> Result<DensityMatrix> {
    steady_state_numeric_with_info(spec).map(|(rho, _)| rho)
}

pub fn steady_state_numeric_with_info(spec: &ModelSpec) -> Result<(DensityMatrix, SteadySolve)> {
    let gen = Generator::new(spec)?;
    let basis = gen.basis();
    let d = basis.dim();
    let (keep, pos) = even_block(basis);
    let s = keep.len();
    if s > MAX_BLOCK {
        return Err(Error::TooLarge(format!(
            "Liouvillian block of size {s} exceeds the dense limit {MAX_BLOCK} for {basis}"
        )));
    }

    let mut l = DMatrix::<C64>::zeros(s, s);
    for (r, col, v) in gen.superoperator_triplets() {
        match (pos[r], pos[col]) {
            (Some(i), Some(j)) => l[(i, j)] += v,
            (None, None) => {}
            _ => {
                return Err(Error::InvariantViolation(
                    "generator mixes excitation-parity blocks".into(),
                ))
            }
        }
    }
    let l_norm = l.norm();

    // Border: replace the equation for rho[0, 0] by Tr(rho) = 1.
    let trace_row = pos[0].expect("rho[0,0] is in the even block");
    let mut bordered = l.clone();
    for j in 0..s {
        bordered[(trace_row, j)] = ZERO;
    }
    for k in 0..d {
        bordered[(trace_row, pos[k + k * d].expect("diagonal is even"))] = ONE;
    }
    let mut rhs = nalgebra::DVector::<C64>::zeros(s);
    rhs[trace_row] = ONE;

    let lu = bordered.lu();
    let diag = lu.u().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), z| {
        (lo.min(z.norm()), hi.max(z.norm()))
    });
    let mut used_svd = false;
    let x = match lu.solve(&rhs) {
        Some(x) if hi > 0.0 && lo / hi >= PIVOT_RATIO => x,
        _ => {
            used_svd = true;
            null_vector(&l)?
        }
    };

    let residual = (&l * &x).norm() / l_norm.max(f64::MIN_POSITIVE);
    let mut rho = CMatrix::zeros(d, d);
    for (i, &idx) in keep.iter().enumerate() {
        rho.as_mut_slice()[idx] = x[i];
    }
    let tr = trace(&rho);
    if tr.norm() < 1e-300 {
        return Err(Error::Conditioning { residual });
    }
    rho /= tr;
    let rho = hermitian_part(&rho);
    if residual > 1e-10 {
        return Err(Error::Conditioning { residual });
    }
    Ok((
        DensityMatrix::new(rho, basis)?,
        SteadySolve {
            relative_residual: residual,
            used_svd,
        },
    ))
}

/// Smallest right singular vector of `l`, provided it is the only null one.
fn null_vector(l: &DMatrix<C64>) -> Result<nalgebra::DVector<C64>> {
    let svd = l.clone().svd(false, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let near_null = sv.iter().filter(|&&v| v <= NULL_RATIO * smax).count();
    if near_null > 1 {
        return Err(Error::DegenerateSteadyState { near_null });
    }
    let (imin, _) = sv
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let v_t = svd.v_t.expect("requested right singular vectors");
    Ok(v_t.row(imin).adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::{build_couplings, ideal_placement, Placement, WaveguideGeometry};
    use crate::dynamics::generator::lindblad_rhs;
    use crate::dynamics::reservoir::SqueezedReservoir;
    use crate::linalg::max_abs;
    use crate::spin::StateTolerance;

    #[test]
    fn vacuum_reservoir_gives_ground_state() {
        let spec = ModelSpec::collective(6, 1.0, 1.0, SqueezedReservoir::new(0.0, 0.5).unwrap()).unwrap();
        let rho = steady_state_numeric(&spec).unwrap();
        assert!((rho.data[(0, 0)] - ONE).norm() < 1e-10);
    }

    #[test]
    fn nullspace_state_is_stationary_and_valid() {
        let spec = ModelSpec::collective(7, 1.0, 0.6, SqueezedReservoir::new(0.8, 1.9).unwrap()).unwrap();
        let rho = steady_state_numeric(&spec).unwrap();
        rho.check(StateTolerance::STRICT).unwrap();
        assert!(max_abs(&lindblad_rhs(&spec, &rho).unwrap()) < 1e-10);
    }

    #[test]
    fn ideal_full_model_is_degenerate() {
        // Lower-j multiplets keep their own steady states when all rates are equal.
        let geom = WaveguideGeometry::default();
        let cs = build_couplings(&geom, &ideal_placement(3, &geom).unwrap()).unwrap();
        let spec = ModelSpec::full(cs, 1.0, SqueezedReservoir::new(0.5, 0.5).unwrap()).unwrap();
        assert!(matches!(
            steady_state_numeric(&spec),
            Err(Error::DegenerateSteadyState { .. })
        ));
    }

    #[test]
    fn disordered_full_model_is_unique() {
        let geom = WaveguideGeometry::default();
        let cs = build_couplings(&geom, &Placement::new(vec![6.9, 14.1, 22.0]).unwrap()).unwrap();
        let spec = ModelSpec::full(cs, 1.0, SqueezedReservoir::new(0.3, 0.5).unwrap()).unwrap();
        let (rho, info) = steady_state_numeric_with_info(&spec).unwrap();
        rho.check(StateTolerance::STRICT).unwrap();
        assert!(info.relative_residual < 1e-12);
        assert!(max_abs(&lindblad_rhs(&spec, &rho).unwrap()) < 1e-9);
    }

    #[test]
    fn block_size_limit() {
        let (keep, _) = even_block(Basis::Full { n: 6 });
        assert_eq!(keep.len(), MAX_BLOCK);
        let (keep, _) = even_block(Basis::Dicke { n: 4 });
        assert_eq!(keep.len(), 13);
    }
}
