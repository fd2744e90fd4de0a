mod common;

use common::*;
use proptest::prelude::*;
use pvar_core::models::{jaynes_cummings, JcParams};
use pvar_core::oracle::{build_liouvillian, operator_matrix};
use pvar_core::{
    adjoint_lindblad, eom_system, BosonMonomial, IndexSpace, ModelSpec, Monomial, OperatorPolynomial, SpinMonomial,
    SpinOp, C64,
};

// Levels 0..4 carry the random state; six more keep every product of the
// order-2 operators below exact on that block.
const ACTIVE: usize = 4;
const PAD: usize = 6;

fn lindblad_defect(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let model = random_model(&mut rng, 2);
    let space = model.space();
    let obs = random_poly(&mut rng, space, 2, 3);
    let trunc = padded(space, ACTIVE, PAD);
    let rho = random_low_density(&mut rng, &trunc, ACTIVE);
    let l = build_liouvillian(&model, &trunc).unwrap();
    let lhs = l.apply(&rho).trace_with(&operator_matrix(&obs, &trunc).unwrap());
    let dual = adjoint_lindblad(&model, &obs).unwrap();
    let rhs = rho.trace_with(&operator_matrix(&dual, &trunc).unwrap());
    (lhs - rhs).norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn heisenberg_generator_is_dual_to_liouvillian(seed in any::<u64>()) {
        let defect = lindblad_defect(seed);
        prop_assert!(defect <= 1e-10, "defect {defect:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hermitian_observables_stay_hermitian(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let model = random_model(&mut rng, 2);
        let obs = random_hermitian(&mut rng, model.space(), 3, 3);
        let out = adjoint_lindblad(&model, &obs).unwrap();
        prop_assert!(out.is_hermitian(1e-12), "defect {:e}", out.hermiticity_defect());
    }

    #[test]
    fn identity_is_conserved(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let model = random_model(&mut rng, 3);
        prop_assert!(adjoint_lindblad(&model, &OperatorPolynomial::identity()).unwrap().is_zero());
    }

    #[test]
    fn multiplying_by_identity_is_bit_identical(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let x = random_poly(&mut rng, IndexSpace::new(2, 2), 4, 6);
        let one = OperatorPolynomial::identity();
        prop_assert_eq!(&(&one * &x).simplify(), &x);
        prop_assert_eq!(&(&x * &one).simplify(), &x);
    }

    #[test]
    fn adjoint_is_an_involution(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let x = random_poly(&mut rng, IndexSpace::new(2, 2), 4, 6);
        prop_assert_eq!(x.adjoint().adjoint(), x);
    }

    #[test]
    fn adjoint_reverses_products(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let space = IndexSpace::new(2, 1);
        let x = random_poly(&mut rng, space, 3, 3);
        let y = random_poly(&mut rng, space, 3, 3);
        let diff = &(&x * &y).adjoint() - &(&y.adjoint() * &x.adjoint());
        prop_assert!(diff.max_abs_coefficient() < 1e-12);
    }

    #[test]
    fn products_agree_with_truncated_matrices(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let space = IndexSpace::new(2, 1);
        let x = random_poly(&mut rng, space, 3, 3);
        let y = random_poly(&mut rng, space, 3, 3);
        let trunc = padded(space, 3, 6);
        let xy = operator_matrix(&(&x * &y), &trunc).unwrap();
        let prod = operator_matrix(&x, &trunc).unwrap().matmul(&operator_matrix(&y, &trunc).unwrap());
        // Compare on states whose levels stay clear of the cutoff.
        let low = |i: usize| trunc.decode(i)[..2].iter().all(|&n| n < 3);
        for (r, c, v) in xy.triplets() {
            if low(c) {
                prop_assert!((v - prod.get(r, c)).norm() < 1e-10, "({r},{c})");
            }
        }
        for (r, c, v) in prod.triplets() {
            if low(c) {
                prop_assert!((v - xy.get(r, c)).norm() < 1e-10, "({r},{c})");
            }
        }
    }

    #[test]
    fn text_form_round_trips(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let m = random_monomial(&mut rng, IndexSpace::new(3, 2), 6);
        let text = m.to_string();
        prop_assert_eq!(text.parse::<Monomial>().unwrap(), m);
    }

    #[test]
    fn generator_is_linear(seed in any::<u64>(), s in -3.0f64..3.0) {
        let mut rng = rng(seed);
        let model = random_model(&mut rng, 2);
        let x = random_poly(&mut rng, model.space(), 2, 3);
        let y = random_poly(&mut rng, model.space(), 2, 3);
        let lhs = adjoint_lindblad(&model, &(&x + &(y.clone() * s))).unwrap();
        let rhs = adjoint_lindblad(&model, &x).unwrap() + adjoint_lindblad(&model, &y).unwrap() * s;
        prop_assert!((&lhs - &rhs).max_abs_coefficient() < 1e-12);
    }
}

fn cavity_decay(gamma: f64) -> ModelSpec {
    ModelSpec::new(IndexSpace::new(1, 0), OperatorPolynomial::zero(), vec![OperatorPolynomial::annihilate(0) * gamma.sqrt()]).unwrap()
}

#[test]
fn decay_of_intensity_matches_oracle_derivative() {
    let gamma = 0.7;
    let model = cavity_decay(gamma);
    let key = Monomial::boson(0, 1, 1);
    let eom = eom_system(&model, &[key.clone()]).unwrap();
    let rhs = &eom.equations[0].rhs;
    assert_eq!(rhs.len(), 1);
    assert!((rhs.coefficient(&key) - C64::new(-gamma, 0.0)).norm() < 1e-15);

    let mut rng = rng(11);
    let trunc = padded(model.space(), 6, 2);
    let rho = random_low_density(&mut rng, &trunc, 6);
    let l = build_liouvillian(&model, &trunc).unwrap();
    let n = operator_matrix(&OperatorPolynomial::number(0), &trunc).unwrap();
    let d_exact = l.apply(&rho).trace_with(&n);
    let d_sym = rho.trace_with(&operator_matrix(rhs, &trunc).unwrap());
    assert!((d_exact - d_sym).norm() < 1e-12);
}

fn jc_sigma(op: SpinOp) -> Monomial {
    Monomial::spin(0, op)
}

fn mixed(p: u32, q: u32, op: SpinOp) -> Monomial {
    Monomial::new(BosonMonomial::single(0, p, q), SpinMonomial::single(0, op))
}

/// The three first-order mean-field equations of the driven Jaynes-Cummings
/// model, term by term, with products read as factorized expectations.
#[test]
fn jc_first_order_equations_are_maxwell_bloch() {
    let params = JcParams { delta_c: 0.3, delta_a: -1.7, g: 2.2, p: 0.9, kappa: 0.45, gamma: 1.3 };
    let model = jaynes_cummings(&params).unwrap();
    let a = Monomial::boson(0, 0, 1);
    let keys = [a.clone(), jc_sigma(SpinOp::Lower), jc_sigma(SpinOp::Z)];
    let eom = eom_system(&model, &keys).unwrap();
    let i = C64::new(0.0, 1.0);
    let expected: [Vec<(Monomial, C64)>; 3] = [
        vec![
            (a.clone(), -(C64::new(params.kappa, params.delta_c))),
            (jc_sigma(SpinOp::Lower), -i * params.g),
            (Monomial::identity(), -i * params.p),
        ],
        vec![
            (jc_sigma(SpinOp::Lower), -(C64::new(params.gamma / 2.0, params.delta_a))),
            (mixed(0, 1, SpinOp::Z), i * params.g),
        ],
        vec![
            (jc_sigma(SpinOp::Z), C64::new(-params.gamma, 0.0)),
            (Monomial::identity(), C64::new(-params.gamma, 0.0)),
            (mixed(1, 0, SpinOp::Lower), 2.0 * i * params.g),
            (mixed(0, 1, SpinOp::Raise), -2.0 * i * params.g),
        ],
    ];
    for (eq, want) in eom.equations.iter().zip(&expected) {
        assert_eq!(eq.rhs.len(), want.len(), "{}: {}", eq.key, eq.rhs);
        for (m, c) in want {
            assert!((eq.rhs.coefficient(m) - c).norm() <= 1e-12, "{}: {m} has {}", eq.key, eq.rhs.coefficient(m));
        }
    }
}

#[test]
fn empty_model_has_no_dynamics() {
    let model = ModelSpec::new(IndexSpace::new(2, 1), OperatorPolynomial::zero(), Vec::new()).unwrap();
    let keys = pvar_core::variational::tracked_keys(model.space(), 3);
    let eom = eom_system(&model, &keys).unwrap();
    assert!(eom.equations.iter().all(|e| e.rhs.is_zero()));
    assert!(eom.boundary.is_empty());
}

#[test]
fn rydberg_interaction_couples_field_to_third_order() {
    let params = pvar_core::models::RydbergParams::dark_squeezing(1.0, 20.0);
    let model = pvar_core::models::rydberg_three_boson(&params).unwrap();
    let c = Monomial::boson(2, 0, 1);
    let eom = eom_system(&model, &[c]).unwrap();
    // i[κr/2 c†²c², c] = −iκr c†c², dissipation −κi c†c² from √κi c².
    let want = C64::new(-params.kappa_i, -params.kappa_r);
    let got = eom.equations[0].rhs.coefficient(&Monomial::boson(2, 1, 2));
    assert!((got - want).norm() < 1e-12, "{got}");
}

/// The sandwich written as `c A c†` instead of `c† A c` is not the dual of the
/// Schrödinger generator; the duality check must see the difference.
#[test]
fn swapped_sandwich_fails_duality() {
    let model = cavity_decay(1.0);
    let obs = OperatorPolynomial::number(0);
    let c = &model.jumps()[0];
    let cd = c.adjoint();
    let cdc = &cd * c;
    let swapped = &(&(c * &obs) * &cd) - &(&(&cdc * &obs) + &(&obs * &cdc)).scale(C64::new(0.5, 0.0));
    let trunc = padded(model.space(), ACTIVE, PAD);
    let rho = random_low_density(&mut rng(3), &trunc, ACTIVE);
    let l = build_liouvillian(&model, &trunc).unwrap();
    let lhs = l.apply(&rho).trace_with(&operator_matrix(&obs, &trunc).unwrap());
    let rhs = rho.trace_with(&operator_matrix(&swapped, &trunc).unwrap());
    assert!((lhs - rhs).norm() > 1e-3);
}

#[test]
fn text_form_rejects_reordered_products() {
    assert_eq!("ad0^2 a0 sm1".parse::<Monomial>().unwrap(), Monomial::new(BosonMonomial::single(0, 2, 1), SpinMonomial::single(1, SpinOp::Lower)));
    for bad in ["a0 ad0", "ad0 ad0", "sp0 sm0", "b0", "a", "", "ad0^0", "sz0^2"] {
        assert!(bad.parse::<Monomial>().is_err(), "{bad:?} accepted");
    }
    assert_eq!("1".parse::<Monomial>().unwrap(), Monomial::identity());
}
