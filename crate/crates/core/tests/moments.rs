use core::f64::consts::PI;

use proptest::prelude::*;
use pvar_core::moments::convolved_table;
use pvar_core::oracle::{convolved_mixture_moment, fock_mixture, FockMixture};
use pvar_core::phase_space::{gallery_columns, gallery_rows};
use pvar_core::{
    ansatz_moment, component_moment, convolve_moment, squeezing_of, Ansatz, ComponentState, ModeAnsatz, MomentKey,
    MomentOptions, C64,
};

const ORACLE_TOL: f64 = 1e-8;

fn opts() -> MomentOptions {
    MomentOptions::default()
}

/// Smallest cutoff (in steps of 40) whose top levels carry less than `1e−16`.
/// Order-6 moments weight the tail like `n³`, so `1e−12` is not enough for
/// bright squeezed-thermal states.
fn mixture(state: &ComponentState) -> FockMixture {
    let mut cutoff = 40;
    loop {
        let m = fock_mixture(state, cutoff).unwrap();
        if m.boundary_population() < 1e-16 {
            return m;
        }
        cutoff += 40;
        assert!(cutoff <= 800, "no adequate cutoff for {state:?}");
    }
}

/// Moments are compared relative to `max(1, |exact|)`: high-order moments of
/// bright states reach 1e3-1e4 and carry rounding at that scale.
fn deviation(got: C64, exact: C64) -> f64 {
    (got - exact).norm() / exact.norm().max(1.0)
}

fn orders() -> impl Iterator<Item = (u32, u32)> {
    (0..=6u32).flat_map(|p| (0..=6 - p).map(move |q| (p, q)))
}

fn amplitude() -> impl Strategy<Value = C64> {
    (0.0f64..2.0, 0.0..2.0 * PI).prop_map(|(r, t)| C64::from_polar(r, t))
}

fn family() -> impl Strategy<Value = ComponentState> {
    prop_oneof![
        amplitude().prop_map(ComponentState::coherent),
        (0.0f64..2.0).prop_map(|n| ComponentState::thermal(n).unwrap()),
        (0u32..=4).prop_map(ComponentState::fock),
        (0.0f64..1.0, 0.0..2.0 * PI).prop_map(|(r, phi)| ComponentState::squeezed(r, phi).unwrap()),
        (0.0f64..2.0, 0.0f64..1.0, 0.0..2.0 * PI)
            .prop_map(|(n, r, phi)| ComponentState::squeezed_thermal(n, r, phi).unwrap()),
        (0u32..=4, 0.0f64..1.0, 0.0..2.0 * PI).prop_map(|(l, r, phi)| ComponentState::squeezed_fock(l, r, phi).unwrap()),
        (amplitude(), amplitude(), 0.0f64..1.5, 0.0..2.0 * PI)
            .prop_filter_map("zero-norm superposition", |(a1, a2, m, t)| {
                ComponentState::cat(a1, a2, C64::from_polar(m, t)).ok()
            }),
    ]
}

fn non_cat() -> impl Strategy<Value = ComponentState> {
    family().prop_filter("cat", |s| !s.is_cat())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_forms_match_fock_construction(state in family()) {
        let m = mixture(&state);
        prop_assert!((m.trace() - 1.0).abs() < 1e-10);
        for (p, q) in orders() {
            let got = component_moment(&state, p, q, &opts()).unwrap();
            let exact = m.moment(p, q);
            prop_assert!(deviation(got, exact) <= ORACLE_TOL, "{state:?} ({p},{q}): {got} vs {exact}");
        }
    }

    #[test]
    fn moments_are_conjugate_symmetric(x in family(), y in non_cat()) {
        for (p, q) in orders() {
            let a = convolve_moment(&[x, y], p, q, &opts()).unwrap();
            let b = convolve_moment(&[x, y], q, p, &opts()).unwrap();
            prop_assert!(deviation(a, b.conj()) <= 1e-12, "({p},{q})");
        }
    }

    #[test]
    fn convolution_is_associative_and_commutative(x in family(), y in non_cat(), z in non_cat()) {
        let reference = convolved_table(&[x, y, z], 6, 6, &opts()).unwrap();
        let perms = [[x, z, y], [y, x, z], [y, z, x], [z, x, y], [z, y, x]];
        for list in perms {
            let t = convolved_table(&list, 6, 6, &opts()).unwrap();
            for (p, q) in orders() {
                prop_assert!(deviation(t.get(p, q), reference.get(p, q)) <= 1e-12);
            }
        }
        let left = convolved_table(&[x, y], 6, 6, &opts()).unwrap().convolve(&z.moment_table(6, 6, &opts()).unwrap());
        let right = x.moment_table(6, 6, &opts()).unwrap().convolve(&convolved_table(&[y, z], 6, 6, &opts()).unwrap());
        for (p, q) in orders() {
            prop_assert!(deviation(left.get(p, q), right.get(p, q)) <= 1e-12);
        }
    }

    #[test]
    fn product_ansatz_respects_cauchy_schwarz(x in family(), y in non_cat(), z in non_cat()) {
        let ansatz = Ansatz::new(
            vec![ModeAnsatz::new(vec![x, y]).unwrap(), ModeAnsatz::new(vec![z]).unwrap()],
            Vec::new(),
        )
        .unwrap();
        for mode in 0..2 {
            let mean = ansatz_moment(&ansatz, &MomentKey::boson(mode, 0, 1), &opts()).unwrap();
            let number = ansatz_moment(&ansatz, &MomentKey::boson(mode, 1, 1), &opts()).unwrap();
            prop_assert!(number.re >= mean.norm_sqr() - 1e-10 * number.re.max(1.0));
        }
    }

    #[test]
    fn vacuum_is_the_convolution_identity(x in family()) {
        for (p, q) in orders() {
            let a = convolve_moment(&[x, ComponentState::vacuum()], p, q, &opts()).unwrap();
            prop_assert_eq!(a, component_moment(&x, p, q, &opts()).unwrap());
        }
    }

    #[test]
    fn squeezing_parameters_round_trip(r in 0.01f64..1.5, phi in 0.0..2.0 * PI, alpha in amplitude()) {
        let list = [ComponentState::squeezed(r, phi).unwrap(), ComponentState::coherent(alpha)];
        let t = convolved_table(&list, 2, 2, &opts()).unwrap();
        let (r_out, phi_out) = squeezing_of(t.get(0, 1), t.get(1, 1).re, t.get(0, 2)).unwrap();
        prop_assert!((r_out - r).abs() < 1e-10, "{r_out} vs {r}");
        let dphi = (phi_out - phi).rem_euclid(2.0 * PI);
        prop_assert!(dphi.min(2.0 * PI - dphi) < 1e-9, "{phi_out} vs {phi}");
    }
}

#[test]
fn table_pairs_match_fock_construction() {
    let mut worst = 0.0f64;
    for (_, col) in gallery_columns() {
        let mc = mixture(&col);
        for (_, row) in gallery_rows() {
            let Some(row) = row else { continue };
            let mr = mixture(&row);
            for (p, q) in orders() {
                let got = convolve_moment(&[col, row], p, q, &opts()).unwrap();
                let exact = convolved_mixture_moment(&mc, &mr, p, q);
                let d = deviation(got, exact);
                worst = worst.max(d);
                assert!(d <= ORACLE_TOL, "{col:?} * {row:?} ({p},{q}): {got} vs {exact}");
            }
        }
    }
    println!("worst table-pair deviation {worst:e}");
}

#[test]
fn intensity_difference_identity() {
    for i in 0..10 {
        for j in 0..10 {
            let n0 = 0.25 * i as f64;
            let r = 0.15 * j as f64;
            let phi = 0.37 * (i + j) as f64;
            let st = component_moment(&ComponentState::squeezed_thermal(n0, r, phi).unwrap(), 1, 1, &opts()).unwrap();
            let conv = convolve_moment(
                &[ComponentState::squeezed(r, phi).unwrap(), ComponentState::thermal(n0).unwrap()],
                1,
                1,
                &opts(),
            )
            .unwrap();
            let want = 2.0 * n0 * r.sinh().powi(2);
            assert!((st - conv - want).norm() <= 1e-12, "n0={n0} r={r}: {}", st - conv);
        }
    }
}

#[test]
fn classical_states_show_no_squeezing() {
    let coherent = ComponentState::coherent(C64::new(0.3, -1.2)).moment_table(2, 2, &opts()).unwrap();
    assert_eq!(squeezing_of(coherent.get(0, 1), coherent.get(1, 1).re, coherent.get(0, 2)).unwrap().0, 0.0);
    let thermal = ComponentState::thermal(0.8).unwrap().moment_table(2, 2, &opts()).unwrap();
    assert_eq!(squeezing_of(thermal.get(0, 1), thermal.get(1, 1).re, thermal.get(0, 2)).unwrap().0, 0.0);
    assert!(squeezing_of(C64::new(0.0, 0.0), 0.0, C64::new(0.6, 0.0)).is_err());
}

#[test]
fn cat_mean_is_not_the_sum_of_amplitudes() {
    // The normalized superposition weights both amplitudes and their overlap.
    let cat = ComponentState::cat(C64::new(1.0, 0.0), C64::new(0.2, 0.0), C64::new(1.0, 0.0)).unwrap();
    let mean = component_moment(&cat, 0, 1, &opts()).unwrap();
    assert!((mean - mixture(&cat).moment(0, 1)).norm() < 1e-12);
    assert!((mean - C64::new(1.2, 0.0)).norm() > 0.1);
    let even = ComponentState::cat(C64::new(3.0, 0.0), C64::new(-3.0, 0.0), C64::new(1.0, 0.0)).unwrap();
    assert!(component_moment(&even, 0, 1, &opts()).unwrap().norm() < 1e-12);
}
