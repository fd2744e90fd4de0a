mod common;

use common::*;
use proptest::prelude::*;
use pvar_core::models::{
    jaynes_cummings, polariton_transform, rydberg_polariton_model, rydberg_three_boson, JcParams, RydbergParams,
    POLARITON_DARK,
};
use pvar_core::oracle::{build_liouvillian, steady_state, DenseMatrix, SteadyStateOptions, SteadyStateResult, TruncationSpec};
use pvar_core::{BosonMonomial, SpinMonomial, IndexSpace, ModelSpec, Monomial, OperatorPolynomial, OracleError, C64};

fn solve(model: &ModelSpec, cutoffs: Vec<usize>) -> SteadyStateResult {
    let trunc = TruncationSpec::new(cutoffs, model.space().spins).unwrap();
    steady_state(&build_liouvillian(model, &trunc).unwrap(), &SteadyStateOptions::default()).unwrap()
}

fn moment(result: &SteadyStateResult, m: Monomial) -> C64 {
    result.exact_moment(&m).unwrap().value
}

fn driven_cavity(delta: f64, p: f64, kappa: f64) -> ModelSpec {
    let h = OperatorPolynomial::number(0) * delta + (OperatorPolynomial::annihilate(0) + OperatorPolynomial::create(0)) * p;
    ModelSpec::new(IndexSpace::new(1, 0), h, vec![OperatorPolynomial::annihilate(0) * kappa.sqrt()]).unwrap()
}

fn assert_physical(r: &SteadyStateResult) {
    let rho = r.density_matrix();
    assert!((rho.trace() - 1.0).norm() < 1e-12);
    assert!(rho.hermiticity_defect() < 1e-12);
    assert!(rho.min_eigenvalue() >= -1e-10, "{}", rho.min_eigenvalue());
    assert!(rho.purity() <= 1.0 + 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn driven_cavity_relaxes_to_coherent_state(delta in -2.0f64..2.0, p in -1.5f64..1.5, kappa in 0.5f64..3.0) {
        let alpha = C64::new(0.0, -p) / C64::new(kappa / 2.0, delta);
        let r = solve(&driven_cavity(delta, p, kappa), vec![40]);
        assert_physical(&r);
        prop_assert!((moment(&r, Monomial::boson(0, 0, 1)) - alpha).norm() < 1e-8);
        let m22 = moment(&r, Monomial::boson(0, 2, 2));
        prop_assert!((m22.re - alpha.norm_sqr().powi(2)).abs() < 1e-7 && m22.im.abs() < 1e-7);
        prop_assert!(r.residual() < 1e-10);
    }

    #[test]
    fn liouvillian_preserves_hermiticity_and_trace(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let model = random_model(&mut rng, 2);
        let trunc = padded(model.space(), 3, 0);
        let rho = random_low_density(&mut rng, &trunc, 3);
        let out = build_liouvillian(&model, &trunc).unwrap().apply(&rho);
        prop_assert!(out.hermiticity_defect() < 1e-12);
        prop_assert!(out.trace().norm() < 1e-12);
    }

    #[test]
    fn jc_steady_states_are_physical(g in 0.0f64..3.0, p in 0.0f64..1.5, delta in -2.0f64..2.0) {
        let params = JcParams { delta_c: delta, delta_a: -delta, g, p, kappa: 1.0, gamma: 1.0 };
        let r = solve(&jaynes_cummings(&params).unwrap(), vec![20]);
        assert_physical(&r);
        prop_assert!(r.boundary_population()[0] < 1e-10);
    }
}

#[test]
fn thermal_pump_gives_bose_einstein_populations() {
    let (gamma, nbar) = (0.8f64, 0.5f64);
    let a = OperatorPolynomial::annihilate(0);
    let jumps = vec![a.clone() * (gamma * (nbar + 1.0)).sqrt(), a.adjoint() * (gamma * nbar).sqrt()];
    let model = ModelSpec::new(IndexSpace::new(1, 0), OperatorPolynomial::zero(), jumps).unwrap();
    let r = solve(&model, vec![40]);
    let rho = r.density_matrix();
    for n in 0..40 {
        let want = nbar.powi(n as i32) / (1.0 + nbar).powi(n as i32 + 1);
        assert!((rho.get(n, n).re - want).abs() < 1e-12, "level {n}");
    }
    assert!((moment(&r, Monomial::boson(0, 1, 1)).re - nbar).abs() < 1e-8);
    assert!((moment(&r, Monomial::boson(0, 2, 2)).re - 2.0 * nbar * nbar).abs() < 1e-6);
}

#[test]
fn undriven_jc_is_vacuum_and_ground() {
    let params = JcParams { delta_c: 0.4, delta_a: -0.3, g: 1.5, p: 0.0, kappa: 0.7, gamma: 1.1 };
    let r = solve(&jaynes_cummings(&params).unwrap(), vec![6]);
    let trunc = r.truncation().clone();
    assert!((r.density_matrix().get(0, 0).re - 1.0).abs() < 1e-14);
    assert_eq!(trunc.decode(0), vec![0, 0]);
    assert!(moment(&r, Monomial::boson(0, 1, 1)).norm() < 1e-14);
    assert!((moment(&r, Monomial::spin(0, pvar_core::SpinOp::Z)).re + 1.0).abs() < 1e-14);
    assert!((moment(&r, Monomial::identity()) - 1.0).norm() < 1e-14);
}

#[test]
fn moments_converge_with_cutoff() {
    let params = JcParams { delta_c: 0.5, delta_a: 4.0, g: 2.0, p: 1.2, kappa: 1.0, gamma: 1.0 };
    let model = jaynes_cummings(&params).unwrap();
    let coarse = solve(&model, vec![20]);
    let fine = solve(&model, vec![30]);
    for key in [Monomial::boson(0, 0, 1), Monomial::boson(0, 1, 1), Monomial::boson(0, 2, 2), Monomial::boson(0, 0, 2)] {
        let (c, f) = (moment(&coarse, key.clone()), moment(&fine, key.clone()));
        assert!((c - f).norm() <= 1e-8 * f.norm().max(1.0), "{key}: {c} vs {f}");
    }
}

#[test]
fn capacity_and_strict_mode_are_enforced() {
    assert!(matches!(TruncationSpec::new(vec![70, 70], 0), Err(OracleError::DimensionCap { .. })));
    let model = driven_cavity(0.0, 3.0, 1.0);
    let trunc = TruncationSpec::new(vec![8], 0).unwrap();
    let l = build_liouvillian(&model, &trunc).unwrap();
    let lenient = steady_state(&l, &SteadyStateOptions::default()).unwrap();
    assert!(lenient.cutoff_warning());
    let strict = steady_state(&l, &SteadyStateOptions { strict: true, ..Default::default() });
    assert!(matches!(strict, Err(OracleError::CutoffTooSmall { .. })));
}

#[test]
fn high_order_moments_near_cutoff_are_flagged() {
    let r = solve(&driven_cavity(0.0, 0.2, 1.0), vec![6]);
    assert!(!r.exact_moment(&Monomial::boson(0, 1, 1)).unwrap().truncation_warning);
    assert!(r.exact_moment(&Monomial::boson(0, 4, 4)).unwrap().truncation_warning);
}

#[test]
fn constructed_hamiltonians_are_hermitian() {
    let jc = jaynes_cummings(&JcParams::bistable(50.0)).unwrap();
    assert!(jc.hamiltonian().is_hermitian(1e-14));
    let params = RydbergParams::dark_squeezing(3.0, 20.0);
    assert!(rydberg_three_boson(&params).unwrap().hamiltonian().is_hermitian(1e-14));
    let (pol, _) = rydberg_polariton_model(&params).unwrap();
    assert!(pol.hamiltonian().is_hermitian(1e-12));
}

fn off_diagonal_quadratic(h: &OperatorPolynomial) -> f64 {
    h.terms()
        .filter(|(m, _)| {
            m.boson.order() == 2 && m.boson.iter().all(|(_, p, q)| p <= 1 && q <= 1) && m.boson.mode_count() == 2
        })
        .map(|(_, c)| c.norm())
        .fold(0.0, f64::max)
}

#[test]
fn polariton_basis_at_squeezing_parameters() {
    let params = RydbergParams { kappa_r: 0.0, ..RydbergParams::dark_squeezing(2.0, 20.0) };
    let (model, basis) = polariton_transform(&rydberg_three_boson(&params).unwrap()).unwrap();
    assert!(basis.unitarity_defect() < 1e-12);
    assert!(!basis.degenerate);
    let e = basis.eigenvalues;
    assert!(e[0] > e[2] && (e[0] - e[1]).abs() > 1e-6 && (e[1] - e[2]).abs() > 1e-6, "{e:?}");
    assert!(basis.unitary[POLARITON_DARK][1].norm() < 1e-10);
    let scale = e.iter().fold(0.0f64, |s, x| s.max(x.abs()));
    assert!(off_diagonal_quadratic(model.hamiltonian()) < 1e-10 * scale);
    for (q, &ev) in e.iter().enumerate() {
        let c = model.hamiltonian().coefficient(&Monomial::boson(q, 1, 1));
        assert!((c.re - ev).abs() < 1e-9 * scale && c.im.abs() < 1e-9 * scale);
    }
}

#[test]
fn decoupled_cavity_is_its_own_polariton() {
    let params = RydbergParams { kappa_r: 0.0, g: 0.0, ..RydbergParams::dark_squeezing(1.0, 20.0) };
    let (_, basis) = polariton_transform(&rydberg_three_boson(&params).unwrap()).unwrap();
    let row = basis.unitary.iter().find(|row| row[0].norm() > 0.5).expect("a cavity-like polariton");
    assert!((row[0].norm() - 1.0).abs() < 1e-12);
    assert!(row[1].norm() < 1e-12 && row[2].norm() < 1e-12);
}

/// Lab-basis and polariton-basis oracles agree once lab moments are rotated.
#[test]
fn basis_change_commutes_with_the_oracle() {
    let params = RydbergParams { g: 0.02, ..RydbergParams::dark_squeezing(0.005, 1.5) };
    let lab = solve(&rydberg_three_boson(&params).unwrap(), vec![3, 3, 3]);
    let (pol_model, basis) = rydberg_polariton_model(&params).unwrap();
    let pol = solve(&pol_model, vec![3, 3, 3]);
    let to_lab = basis.polariton_to_lab();
    let mut largest = 0.0f64;
    for q in 0..3 {
        for r in 0..3 {
            for key in [
                Monomial::boson(q, 0, 1),
                Monomial::new(BosonMonomial::from_exponents([(q, 1, 0), (r, 0, 1)]), SpinMonomial::identity()),
                Monomial::new(BosonMonomial::from_exponents([(q, 0, 1), (r, 0, 1)]), SpinMonomial::identity()),
            ] {
                let rotated = lab.expectation(&OperatorPolynomial::monomial(key.clone()).substitute_modes(&to_lab)).unwrap();
                let direct = moment(&pol, key.clone());
                largest = largest.max(direct.norm());
                assert!((rotated - direct).norm() < 1e-6, "{key}: {rotated} vs {direct}");
            }
        }
    }
    assert!(largest > 1e-4, "test state too dim to be informative: {largest}");
}

#[test]
fn density_matrix_round_trips_through_vectorization() {
    let mut rng = rng(5);
    let trunc = padded(IndexSpace::new(2, 1), 3, 0);
    let rho = random_low_density(&mut rng, &trunc, 3);
    assert_eq!(DenseMatrix::from_vectorized(rho.dim(), &rho.vectorize()), rho);
}
