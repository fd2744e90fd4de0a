//! Jaynes-Cummings and three-boson Rydberg models, and the polariton basis.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods are inherent once std is linked
use num_traits::Float;
use num_traits::Zero;

use crate::algebra::{IndexSpace, ModelSpec, Monomial, OperatorPolynomial};
use crate::error::ModelError;
use crate::numeric::{hermitian_eigen, C64};

fn nonneg(name: &str, x: f64) -> Result<(), ModelError> {
    if !x.is_finite() || x < 0.0 {
        return Err(ModelError::InvalidParameter(format!("{name} = {x} must be finite and >= 0")));
    }
    Ok(())
}

fn finite(name: &str, x: f64) -> Result<(), ModelError> {
    if !x.is_finite() {
        return Err(ModelError::InvalidParameter(format!("{name} is not finite")));
    }
    Ok(())
}

/// Driven Jaynes-Cummings parameters. `kappa` is the cavity field (amplitude)
/// decay rate and `gamma` the atomic population decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct JcParams {
    pub delta_c: f64,
    pub delta_a: f64,
    pub g: f64,
    pub p: f64,
    pub kappa: f64,
    pub gamma: f64,
}

impl JcParams {
    /// Cavity-QED regime of the bistability sweep, in units of `gamma`.
    pub fn bistable(p: f64) -> Self {
        Self { delta_c: 340.0, delta_a: 23.5e3, g: 3347.0, p, kappa: 6.0, gamma: 1.0 }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        finite("delta_c", self.delta_c)?;
        finite("delta_a", self.delta_a)?;
        finite("g", self.g)?;
        finite("p", self.p)?;
        nonneg("kappa", self.kappa)?;
        nonneg("gamma", self.gamma)
    }
}

/// `H = Δc a†a + Δa σ⁺σ⁻ + g(aσ⁺ + a†σ⁻) + p(a† + a)`, jumps `√(2κ) a` and `√γ σ⁻`.
pub fn jaynes_cummings(params: &JcParams) -> Result<ModelSpec, ModelError> {
    params.validate()?;
    let a = OperatorPolynomial::annihilate(0);
    let ad = OperatorPolynomial::create(0);
    let sp = OperatorPolynomial::sigma_plus(0);
    let sm = OperatorPolynomial::sigma_minus(0);
    let h = OperatorPolynomial::number(0) * params.delta_c
        + (&sp * &sm) * params.delta_a
        + (&a * &sp + &ad * &sm) * params.g
        + (&ad + &a) * params.p;
    let jumps = vec![a * (2.0 * params.kappa).sqrt(), sm * params.gamma.sqrt()];
    Ok(ModelSpec::new(IndexSpace::new(1, 1), h.simplify(), jumps)?)
}

/// Three-boson model of a Rydberg-dressed cavity: mode 0 is the cavity `a`,
/// mode 1 the intermediate collective excitation `b`, mode 2 the Rydberg one `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct RydbergParams {
    pub delta_c: f64,
    pub delta_e: f64,
    pub delta_r: f64,
    pub g: f64,
    pub omega: f64,
    pub p: f64,
    pub kappa_r: f64,
    pub kappa_i: f64,
    pub gamma_c: f64,
    pub gamma_e: f64,
    pub gamma_r: f64,
    pub n_atoms: f64,
}

impl RydbergParams {
    /// Dark-polariton squeezing regime in units of `gamma_e`; `omega` is free.
    pub fn dark_squeezing(p: f64, omega: f64) -> Self {
        Self {
            delta_c: 0.0,
            delta_e: -10.0,
            delta_r: 0.0,
            g: 4.2,
            omega,
            p,
            kappa_r: -1.2,
            kappa_i: 0.42,
            gamma_c: 0.3,
            gamma_e: 1.0,
            gamma_r: 0.1,
            n_atoms: 1e4,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, x) in [
            ("delta_c", self.delta_c),
            ("delta_e", self.delta_e),
            ("delta_r", self.delta_r),
            ("g", self.g),
            ("omega", self.omega),
            ("p", self.p),
            ("kappa_r", self.kappa_r),
        ] {
            finite(name, x)?;
        }
        for (name, x) in
            [("kappa_i", self.kappa_i), ("gamma_c", self.gamma_c), ("gamma_e", self.gamma_e), ("gamma_r", self.gamma_r)]
        {
            nonneg(name, x)?;
        }
        if !(self.n_atoms >= 1.0) || !self.n_atoms.is_finite() {
            return Err(ModelError::InvalidParameter(format!("n_atoms = {} must be >= 1", self.n_atoms)));
        }
        Ok(())
    }

    /// Collective cavity coupling `g√N`.
    pub fn collective_coupling(&self) -> f64 {
        self.g * self.n_atoms.sqrt()
    }
}

/// Quadratic part plus drive: everything except the `κ_r` interaction.
fn rydberg_quadratic(params: &RydbergParams) -> OperatorPolynomial {
    let a = OperatorPolynomial::annihilate(0);
    let b = OperatorPolynomial::annihilate(1);
    let c = OperatorPolynomial::annihilate(2);
    let (ad, bd, cd) = (a.adjoint(), b.adjoint(), c.adjoint());
    let gn = params.collective_coupling();
    OperatorPolynomial::number(0) * (-params.delta_c)
        + (&a + &ad) * params.p
        + OperatorPolynomial::number(1) * (-params.delta_e)
        + OperatorPolynomial::number(2) * (-params.delta_r)
        + (&a * &bd + &ad * &b) * gn
        + (&b * &cd + &bd * &c) * (0.5 * params.omega)
}

/// `H = −Δc a†a + p(a + a†) − Δe b†b − Δr c†c + g√N(ab† + a†b) + ω/2 (bc† + b†c) + κr/2 c†²c²`
/// with jumps `√γc a`, `√γe b`, `√γr c`, `√κi c²`.
pub fn rydberg_three_boson(params: &RydbergParams) -> Result<ModelSpec, ModelError> {
    params.validate()?;
    let h = rydberg_quadratic(params)
        + OperatorPolynomial::monomial(Monomial::boson(2, 2, 2)) * (0.5 * params.kappa_r);
    let c = OperatorPolynomial::annihilate(2);
    let jumps = vec![
        OperatorPolynomial::annihilate(0) * params.gamma_c.sqrt(),
        OperatorPolynomial::annihilate(1) * params.gamma_e.sqrt(),
        c.clone() * params.gamma_r.sqrt(),
        (&c * &c) * params.kappa_i.sqrt(),
    ];
    Ok(ModelSpec::new(IndexSpace::new(3, 0), h.simplify(), jumps)?)
}

/// Index of each polariton in the transformed model.
pub const POLARITON_PLUS: usize = 0;
pub const POLARITON_DARK: usize = 1;
pub const POLARITON_MINUS: usize = 2;

/// Unitary `U` with `Ψ_q = Σ_j U[q][j] a_j`, rows ordered `(+, 0, −)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PolaritonBasis {
    /// Row-major 3×3.
    pub unitary: [[C64; 3]; 3],
    pub eigenvalues: [f64; 3],
    /// Two eigenvalues coincide within `1e−9` of the spectral scale; the
    /// ordering then rests on the overlap convention alone.
    pub degenerate: bool,
}

impl PolaritonBasis {
    /// `max |U U† − 1|`.
    pub fn unitarity_defect(&self) -> f64 {
        let u = &self.unitary;
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let s: C64 = (0..3).map(|k| u[i][k] * u[j][k].conj()).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).norm());
            }
        }
        worst
    }

    /// Lab-mode expansion `a_j = Σ_q conj(U[q][j]) Ψ_q`, in the form taken by
    /// [`OperatorPolynomial::substitute_modes`].
    pub fn lab_to_polariton(&self) -> Vec<Vec<(usize, C64)>> {
        (0..3).map(|j| (0..3).map(|q| (q, self.unitary[q][j].conj())).collect()).collect()
    }

    /// Polariton operators in lab modes: `Ψ_q = Σ_j U[q][j] a_j`.
    pub fn polariton_to_lab(&self) -> Vec<Vec<(usize, C64)>> {
        (0..3).map(|q| (0..3).map(|j| (j, self.unitary[q][j])).collect()).collect()
    }
}

/// Single-particle matrix `M` of the number-conserving quadratic terms `Σ M_ij a_i† a_j`.
fn single_particle_matrix(h: &OperatorPolynomial, modes: usize) -> Vec<C64> {
    let mut m = vec![C64::zero(); modes * modes];
    for (mono, &coef) in h.terms() {
        if !mono.spin.is_identity() || mono.boson.order() != 2 {
            continue;
        }
        let create = mono.boson.iter().find(|&(_, p, _)| p == 1).map(|(mode, _, _)| mode);
        let annihilate = mono.boson.iter().find(|&(_, _, q)| q == 1).map(|(mode, _, _)| mode);
        if let (Some(i), Some(j)) = (create, annihilate) {
            m[i * modes + j] += coef;
        }
    }
    m
}

/// Diagonalizes the single-particle matrix of a three-mode model and rewrites the
/// Hamiltonian and jumps in polariton modes. Mode `b` (index 1) defines the
/// dark polariton as the eigenvector with the least `b` weight; the other two
/// are ordered by descending eigenvalue.
pub fn polariton_transform(model: &ModelSpec) -> Result<(ModelSpec, PolaritonBasis), ModelError> {
    let space = model.space();
    if space.modes != 3 || space.spins != 0 {
        return Err(ModelError::NotThreeBoson { modes: space.modes, spins: space.spins });
    }
    let m = single_particle_matrix(model.hamiltonian(), 3);
    let (vals, vecs) = hermitian_eigen(&m, 3);
    let column = |q: usize| -> [C64; 3] {
        let mut v = [vecs[q], vecs[3 + q], vecs[6 + q]];
        let lead = (0..3).fold(0, |best, k| if v[k].norm() > v[best].norm() + 1e-12 { k } else { best });
        let phase = v[lead].conj() / v[lead].norm();
        v.iter_mut().for_each(|x| *x *= phase);
        v
    };
    let dark = (0..3)
        .min_by(|&x, &y| column(x)[1].norm().total_cmp(&column(y)[1].norm()).then(x.cmp(&y)))
        .expect("three eigenvectors");
    let mut bright: Vec<usize> = (0..3).filter(|&q| q != dark).collect();
    bright.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]));
    let order = [bright[0], dark, bright[1]];

    let mut unitary = [[C64::zero(); 3]; 3];
    let mut eigenvalues = [0.0; 3];
    for (row, &q) in order.iter().enumerate() {
        let v = column(q);
        for j in 0..3 {
            unitary[row][j] = v[j].conj();
        }
        eigenvalues[row] = vals[q];
    }
    let scale = vals.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    let mut degenerate = false;
    for i in 0..3 {
        for j in i + 1..3 {
            degenerate |= (vals[i] - vals[j]).abs() <= 1e-9 * scale;
        }
    }
    let basis = PolaritonBasis { unitary, eigenvalues, degenerate };
    let map = basis.lab_to_polariton();
    let h = model.hamiltonian().substitute_modes(&map).simplify();
    let h = (&h + &h.adjoint()) * 0.5;
    let jumps = model.jumps().iter().map(|c| c.substitute_modes(&map).simplify()).collect();
    Ok((ModelSpec::new(space, h, jumps)?, basis))
}

/// Rydberg model at `κ_r = 0` used to fix the polariton basis, then the full
/// model (interaction included) expressed in that basis.
pub fn rydberg_polariton_model(params: &RydbergParams) -> Result<(ModelSpec, PolaritonBasis), ModelError> {
    let free = rydberg_three_boson(&RydbergParams { kappa_r: 0.0, ..*params })?;
    let (_, basis) = polariton_transform(&free)?;
    let full = rydberg_three_boson(params)?;
    let map = basis.lab_to_polariton();
    let h = full.hamiltonian().substitute_modes(&map).simplify();
    let h = (&h + &h.adjoint()) * 0.5;
    let jumps = full.jumps().iter().map(|c| c.substitute_modes(&map).simplify()).collect();
    Ok((ModelSpec::new(full.space(), h, jumps)?, basis))
}
