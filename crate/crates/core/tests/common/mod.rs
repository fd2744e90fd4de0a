#![allow(dead_code)]

use pvar_core::oracle::{DenseMatrix, TruncationSpec};
use pvar_core::{BosonMonomial, IndexSpace, ModelSpec, Monomial, OperatorPolynomial, SpinMonomial, SpinOp, C64};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// A monomial whose boson part has total order at most `max_order`.
pub fn random_monomial(rng: &mut ChaCha8Rng, space: IndexSpace, max_order: u32) -> Monomial {
    let mut left = rng.random_range(0..=max_order);
    let mut exps = Vec::new();
    for mode in 0..space.modes {
        let p = rng.random_range(0..=left);
        left -= p;
        let q = rng.random_range(0..=left);
        left -= q;
        exps.push((mode, p, q));
    }
    let mut spin = SpinMonomial::identity();
    for site in 0..space.spins {
        let op = match rng.random_range(0..4) {
            0 => continue,
            1 => SpinOp::Raise,
            2 => SpinOp::Lower,
            _ => SpinOp::Z,
        };
        spin = spin.with(site, op);
    }
    Monomial::new(BosonMonomial::from_exponents(exps), spin)
}

pub fn random_poly(rng: &mut ChaCha8Rng, space: IndexSpace, max_order: u32, terms: usize) -> OperatorPolynomial {
    let mut out = OperatorPolynomial::zero();
    for _ in 0..terms {
        let m = random_monomial(rng, space, max_order);
        out.add_term(m, complex(rng));
    }
    out.simplify()
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, space: IndexSpace, max_order: u32, terms: usize) -> OperatorPolynomial {
    let x = random_poly(rng, space, max_order, terms);
    (&x + &x.adjoint()) * 0.5
}

/// At most two modes, at most one spin, Hermitian `H` and up to three jumps.
pub fn random_model(rng: &mut ChaCha8Rng, max_order: u32) -> ModelSpec {
    let space = IndexSpace::new(rng.random_range(1..=2), rng.random_range(0..=1));
    let h = random_hermitian(rng, space, max_order, 4);
    let jumps = (0..rng.random_range(0..=3)).map(|_| random_poly(rng, space, max_order, 2)).collect();
    ModelSpec::new(space, h, jumps).expect("hermitian by construction")
}

/// Truncation whose every mode keeps `active + pad` levels.
pub fn padded(space: IndexSpace, active: usize, pad: usize) -> TruncationSpec {
    TruncationSpec::with_cap(vec![active + pad; space.modes], space.spins, usize::MAX).unwrap()
}

/// Random unit-trace Hermitian matrix supported on the levels below `active` of every mode.
pub fn random_low_density(rng: &mut ChaCha8Rng, trunc: &TruncationSpec, active: usize) -> DenseMatrix {
    let d = trunc.dim();
    let modes = trunc.modes();
    let support: Vec<usize> = (0..d).filter(|&i| trunc.decode(i)[..modes].iter().all(|&n| n < active)).collect();
    let mut rho = DenseMatrix::zeros(d);
    for &r in &support {
        for &c in &support {
            if c < r {
                continue;
            }
            let v = if r == c { C64::new(rng.random_range(0.0..1.0), 0.0) } else { complex(rng) * 0.3 };
            rho.set(r, c, v);
            rho.set(c, r, v.conj());
        }
    }
    let t = rho.trace();
    DenseMatrix::from_row_major(d, rho.as_row_major().iter().map(|x| x / t).collect())
}
