//! Randomized structural properties of the generators, steady states and
//! observables.

use std::f64::consts::PI;

use proptest::prelude::*;
use spinsqueeze::couplings::{build_couplings, Placement, WaveguideGeometry};
use spinsqueeze::dynamics::{
    evolve, lindblad_rhs, rotate_z, steady_state_numeric, uniform_times, EvolveOptions, Generator, ModelSpec,
    SqueezedReservoir,
};
use spinsqueeze::linalg::{hermiticity_defect, max_abs, trace, CMatrix, C64};
use spinsqueeze::observables::{husimi_q, squeezing_report};
use spinsqueeze::spin::{collective_ops, dicke_state, full_ops, Basis, DensityMatrix, HalfInt};
use spinsqueeze::steadystate::{analytic_steady_state, build_basis, steady_coefficients};

/// Random density matrix `G G^dag / Tr` from a complex Gaussian-ish matrix.
fn random_state(basis: Basis, entries: &[f64]) -> DensityMatrix {
    let d = basis.dim();
    let g = CMatrix::from_fn(d, d, |i, j| {
        let k = 2 * (i * d + j);
        C64::new(entries[k % entries.len()], entries[(k + 1) % entries.len()])
    });
    let mut rho = &g * g.adjoint();
    let tr = trace(&rho);
    rho /= tr;
    DensityMatrix::new(rho, basis).unwrap()
}

fn reservoir() -> impl Strategy<Value = SqueezedReservoir> {
    (0.0f64..1.5, 0.0f64..(2.0 * PI)).prop_map(|(r, a)| SqueezedReservoir::new(r, a).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn collective_generator_preserves_trace_and_hermiticity(
        n in 1usize..=8,
        delta in 0.0f64..2.0,
        res in reservoir(),
        entries in proptest::collection::vec(-1.0f64..1.0, 16..64),
    ) {
        let spec = ModelSpec::collective(n, 1.0, delta, res).unwrap();
        let rho = random_state(spec.basis(), &entries);
        let out = Generator::new(&spec).unwrap().apply(&rho.data);
        prop_assert!(trace(&out).norm() < 1e-12);
        prop_assert!(hermiticity_defect(&out) < 1e-12);
        prop_assert!(max_abs(&(&out - lindblad_rhs(&spec, &rho).unwrap())) < 1e-11);
    }

    #[test]
    fn full_generator_preserves_trace_and_hermiticity(
        z in proptest::collection::vec(-20.0f64..20.0, 1..=4),
        delta in 0.0f64..2.0,
        res in reservoir(),
        entries in proptest::collection::vec(-1.0f64..1.0, 16..64),
    ) {
        let cs = build_couplings(&WaveguideGeometry::default(), &Placement::new(z).unwrap()).unwrap();
        let spec = ModelSpec::full(cs, delta, res).unwrap();
        let rho = random_state(spec.basis(), &entries);
        let out = Generator::new(&spec).unwrap().apply(&rho.data);
        prop_assert!(trace(&out).norm() < 1e-12);
        prop_assert!(hermiticity_defect(&out) < 1e-12);
        prop_assert!(max_abs(&(&out - lindblad_rhs(&spec, &rho).unwrap())) < 1e-11);
    }

    #[test]
    fn analytic_steady_state_is_the_nullspace_state(
        n in 1usize..=6,
        delta in 0.0f64..2.0,
        res in reservoir(),
    ) {
        let spec = ModelSpec::collective(n, 1.0, delta, res).unwrap();
        let analytic = analytic_steady_state(n, 1.0, spec.delta_n(), &res).unwrap();
        let numeric = steady_state_numeric(&spec).unwrap();
        prop_assert!(analytic.trace_distance(&numeric).unwrap() < 1e-9);
        prop_assert!(max_abs(&lindblad_rhs(&spec, &analytic).unwrap()) < 1e-9);
    }

    #[test]
    fn squeezing_angle_rotates_the_steady_state(
        n in 1usize..=10,
        r in 0.05f64..1.2,
        alpha in 0.0f64..(2.0 * PI),
        shift in -PI..PI,
    ) {
        // exp(-i phi S_z) maps the reservoir angle alpha to alpha - 2 phi.
        let ops = collective_ops(n).unwrap();
        let base = analytic_steady_state(n, 1.0, 0.9, &SqueezedReservoir::new(r, alpha).unwrap()).unwrap();
        let moved = analytic_steady_state(n, 1.0, 0.9, &SqueezedReservoir::new(r, alpha - 2.0 * shift).unwrap()).unwrap();
        let rotated = rotate_z(&base, &ops, shift).unwrap();
        prop_assert!(rotated.trace_distance(&moved).unwrap() < 1e-9);
        let (a, b) = (squeezing_report(&base, &ops).unwrap(), squeezing_report(&moved, &ops).unwrap());
        prop_assert!((a.xi_r_sq - b.xi_r_sq).abs() < 1e-9 * a.xi_r_sq);
    }

    #[test]
    fn biorthogonal_basis_and_recurrence(
        n in 1usize..=16,
        r in 0.05f64..1.5,
        alpha in 0.0f64..(2.0 * PI),
        delta_n in -3.0f64..3.0,
    ) {
        let b = build_basis(n, &SqueezedReservoir::new(r, alpha).unwrap()).unwrap();
        prop_assert!(b.biorthogonality_defect() < 1e-9);
        prop_assert!(b.eigen_residual() < 1e-9);
        let p = steady_coefficients(n, 1.0, delta_n).unwrap();
        prop_assert!(p.recurrence_defect(1.0, delta_n) < 1e-12);
    }

    #[test]
    fn full_trajectories_stay_physical(
        z in proptest::collection::vec(-10.0f64..10.0, 1..=3),
        res in reservoir(),
        entries in proptest::collection::vec(-1.0f64..1.0, 16..64),
    ) {
        let cs = build_couplings(&WaveguideGeometry::default(), &Placement::new(z).unwrap()).unwrap();
        let spec = ModelSpec::full(cs, 1.0, res).unwrap();
        let rho0 = random_state(spec.basis(), &entries);
        let opts = EvolveOptions { snapshot_times: uniform_times(2.0, 5), ..EvolveOptions::default() };
        let tr = evolve(&spec, &rho0, &uniform_times(2.0, 21), &opts).unwrap();
        for (_, s) in &tr.snapshots {
            prop_assert!((s.trace().re - 1.0).abs() < 1e-9);
            prop_assert!(hermiticity_defect(&s.data) < 1e-12);
            prop_assert!(s.min_eigenvalue() > -1e-8);
        }
    }

    #[test]
    fn q_function_is_normalized_and_nonnegative(
        n in 1usize..=10,
        entries in proptest::collection::vec(-1.0f64..1.0, 16..64),
    ) {
        let rho = random_state(Basis::Dicke { n }, &entries);
        let q = husimi_q(&rho, 91, 181).unwrap();
        prop_assert!((q.integral() - 1.0).abs() < 1e-6, "{}", q.integral());
        prop_assert!(q.min_value() > -1e-12);
    }

    #[test]
    fn wineland_parameter_is_rotation_invariant(
        n in 2usize..=4,
        entries in proptest::collection::vec(-1.0f64..1.0, 16..64),
        phi in -PI..PI,
    ) {
        // Same state in the symmetric sector of the product basis and in the
        // Dicke basis, and after a rotation about z.
        let rho = random_state(Basis::Dicke { n }, &entries);
        let ops = collective_ops(n).unwrap();
        let Ok(a) = squeezing_report(&rho, &ops) else { return Ok(()) };
        let embedded = spinsqueeze::spin::embed_symmetric(&rho, n).unwrap();
        let b = squeezing_report(&embedded, &full_ops(n).unwrap()).unwrap();
        let c = squeezing_report(&rotate_z(&rho, &ops, phi).unwrap(), &ops).unwrap();
        prop_assert!((a.xi_r_sq - b.xi_r_sq).abs() < 1e-9 * a.xi_r_sq.max(1.0));
        prop_assert!((a.xi_r_sq - c.xi_r_sq).abs() < 1e-9 * a.xi_r_sq.max(1.0));
    }
}

#[test]
fn coherent_states_are_unsqueezed() {
    for n in [1usize, 4, 9] {
        let rho = dicke_state(n, HalfInt::from_twice(n as i64)).unwrap();
        let rep = squeezing_report(&rho, &collective_ops(n).unwrap()).unwrap();
        assert!((rep.xi_r_sq - 1.0).abs() < 1e-12);
    }
}

#[test]
fn large_n_squeezed_axis_follows_the_bosonized_prediction() {
    let (n, alpha) = (200, 0.5);
    let res = SqueezedReservoir::new(0.8, alpha).unwrap();
    let spec = ModelSpec::collective(n, 1.0, 1.0, res).unwrap();
    let rho = analytic_steady_state(n, 1.0, spec.delta_n(), &res).unwrap();
    let rep = squeezing_report(&rho, &collective_ops(n).unwrap()).unwrap();
    let predicted = ((PI - alpha + (2.0 * spec.delta_n() / n as f64).atan()) / 2.0).rem_euclid(PI);
    let gap = (rep.min_azimuth() - predicted).abs();
    assert!(gap.min(PI - gap) < 2e-3, "{} vs {predicted}", rep.min_azimuth());
}
