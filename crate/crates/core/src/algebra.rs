//! Normal-ordered operator algebra over bosonic modes and spin-1/2 sites, and the
//! Heisenberg-picture Lindblad generator acting on it.
//!
//! Every [`OperatorPolynomial`] is kept in normal order: per mode all creation
//! operators stand left of all annihilation operators, and every spin site carries
//! at most one of `σ⁺`, `σ⁻`, `σᶻ`. Bosons on distinct modes, and spins on distinct
//! sites, commute with each other and with the bosons.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, AddAssign, Mul, Neg, Sub};

#[allow(unused_imports)] // float methods are inherent once std is linked
use num_traits::Float;
use num_traits::Zero;

use crate::error::AlgebraError;
use crate::numeric::{binomial, factorial, C64, I};

/// Coefficients below this magnitude are dropped after every arithmetic step.
pub const DROP_TOLERANCE: f64 = 1e-14;

/// Normal-ordered bosonic monomial `Π_m a_m†^{p_m} a_m^{q_m}`.
///
/// Only modes with `p + q > 0` are stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BosonMonomial(BTreeMap<usize, (u32, u32)>);

impl BosonMonomial {
    pub fn identity() -> Self {
        Self::default()
    }

    /// `a_mode†^p a_mode^q`.
    pub fn single(mode: usize, p: u32, q: u32) -> Self {
        let mut m = Self::default();
        m.set(mode, p, q);
        m
    }

    pub fn from_exponents<I: IntoIterator<Item = (usize, u32, u32)>>(iter: I) -> Self {
        let mut m = Self::default();
        for (mode, p, q) in iter {
            let (p0, q0) = m.exponents(mode);
            m.set(mode, p0 + p, q0 + q);
        }
        m
    }

    pub fn set(&mut self, mode: usize, p: u32, q: u32) {
        if p + q == 0 {
            self.0.remove(&mode);
        } else {
            self.0.insert(mode, (p, q));
        }
    }

    /// `(p, q)` for `mode`; `(0, 0)` when absent.
    pub fn exponents(&self, mode: usize) -> (u32, u32) {
        self.0.get(&mode).copied().unwrap_or((0, 0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u32, u32)> + '_ {
        self.0.iter().map(|(&m, &(p, q))| (m, p, q))
    }

    pub fn modes(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.keys().copied()
    }

    pub fn mode_count(&self) -> usize {
        self.0.len()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn order(&self) -> u32 {
        self.0.values().map(|&(p, q)| p + q).sum()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.iter().map(|(&m, &(p, q))| (m, (q, p))).collect())
    }

    pub fn max_mode(&self) -> Option<usize> {
        self.0.keys().next_back().copied()
    }
}

/// Single-site spin operator (identity is represented by absence).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SpinOp {
    Raise,
    Lower,
    Z,
}

impl SpinOp {
    pub fn adjoint(self) -> Self {
        match self {
            SpinOp::Raise => SpinOp::Lower,
            SpinOp::Lower => SpinOp::Raise,
            SpinOp::Z => SpinOp::Z,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            SpinOp::Raise => "sp",
            SpinOp::Lower => "sm",
            SpinOp::Z => "sz",
        }
    }
}

/// Product of per-site spin operators.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpinMonomial(BTreeMap<usize, SpinOp>);

impl SpinMonomial {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn single(site: usize, op: SpinOp) -> Self {
        let mut m = Self::default();
        m.0.insert(site, op);
        m
    }

    /// `self` with `op` placed on `site`, replacing whatever was there.
    pub fn with(mut self, site: usize, op: SpinOp) -> Self {
        self.0.insert(site, op);
        self
    }

    pub fn get(&self, site: usize) -> Option<SpinOp> {
        self.0.get(&site).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, SpinOp)> + '_ {
        self.0.iter().map(|(&s, &op)| (s, op))
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.iter().map(|(&s, &op)| (s, op.adjoint())).collect())
    }

    pub fn max_site(&self) -> Option<usize> {
        self.0.keys().next_back().copied()
    }
}

/// Normal-ordered boson/spin monomial; also the address of one expectation value.
/// Serializes as its text form so it can key JSON maps.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub boson: BosonMonomial,
    pub spin: SpinMonomial,
}

impl Monomial {
    pub fn new(boson: BosonMonomial, spin: SpinMonomial) -> Self {
        Self { boson, spin }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn boson(mode: usize, p: u32, q: u32) -> Self {
        Self { boson: BosonMonomial::single(mode, p, q), spin: SpinMonomial::identity() }
    }

    pub fn spin(site: usize, op: SpinOp) -> Self {
        Self { boson: BosonMonomial::identity(), spin: SpinMonomial::single(site, op) }
    }

    pub fn is_identity(&self) -> bool {
        self.boson.is_identity() && self.spin.is_identity()
    }

    /// Boson order `Σ (p + q)`.
    pub fn order(&self) -> u32 {
        self.boson.order()
    }

    /// Boson order plus one per non-identity spin factor.
    pub fn total_order(&self) -> u32 {
        self.boson.order() + self.spin.len() as u32
    }

    pub fn adjoint(&self) -> Self {
        Self { boson: self.boson.adjoint(), spin: self.spin.adjoint() }
    }

    /// The smaller of `self` and its adjoint; the representative of a conjugate pair.
    pub fn canonical(&self) -> Self {
        let adj = self.adjoint();
        if adj < *self {
            adj
        } else {
            self.clone()
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.adjoint() >= *self
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.adjoint() == *self
    }

    /// Normal-ordered expansion of `self * rhs` as `(monomial, coefficient)` pairs.
    pub fn product(&self, rhs: &Monomial) -> Vec<(Monomial, f64)> {
        // bosons: a^{q1} a†^{p2} = Σ_k k! C(q1,k) C(p2,k) a†^{p2-k} a^{q1-k}
        let mut boson_terms: Vec<(BosonMonomial, f64)> = vec![(BosonMonomial::identity(), 1.0)];
        let modes: BTreeSet<usize> = self.boson.modes().chain(rhs.boson.modes()).collect();
        for mode in modes {
            let (p1, q1) = self.boson.exponents(mode);
            let (p2, q2) = rhs.boson.exponents(mode);
            let kmax = q1.min(p2);
            let mut next = Vec::with_capacity(boson_terms.len() * (kmax as usize + 1));
            for (mono, coef) in &boson_terms {
                for k in 0..=kmax {
                    let c = factorial(k) * binomial(q1, k) * binomial(p2, k);
                    let mut m = mono.clone();
                    m.set(mode, p1 + p2 - k, q1 + q2 - k);
                    next.push((m, coef * c));
                }
            }
            boson_terms = next;
        }

        let mut spin_terms: Vec<(SpinMonomial, f64)> = vec![(SpinMonomial::identity(), 1.0)];
        let sites: BTreeSet<usize> = self.spin.0.keys().chain(rhs.spin.0.keys()).copied().collect();
        for site in sites {
            let factors = spin_product(self.spin.get(site), rhs.spin.get(site));
            if factors.is_empty() {
                return Vec::new();
            }
            let mut next = Vec::with_capacity(spin_terms.len() * factors.len());
            for (mono, coef) in &spin_terms {
                for &(op, c) in &factors {
                    let mut m = mono.clone();
                    if let Some(op) = op {
                        m.0.insert(site, op);
                    }
                    next.push((m, coef * c));
                }
            }
            spin_terms = next;
        }

        let mut out = Vec::with_capacity(boson_terms.len() * spin_terms.len());
        for (b, cb) in &boson_terms {
            for (s, cs) in &spin_terms {
                out.push((Monomial { boson: b.clone(), spin: s.clone() }, cb * cs));
            }
        }
        out
    }
}

/// Pauli product table with `σ⁺ = |e⟩⟨g|`, `σ⁻ = |g⟩⟨e|`, `σᶻ = |e⟩⟨e| − |g⟩⟨g|`.
fn spin_product(lhs: Option<SpinOp>, rhs: Option<SpinOp>) -> Vec<(Option<SpinOp>, f64)> {
    use SpinOp::*;
    match (lhs, rhs) {
        (None, x) | (x, None) => vec![(x, 1.0)],
        (Some(Raise), Some(Raise)) | (Some(Lower), Some(Lower)) => Vec::new(),
        (Some(Raise), Some(Lower)) => vec![(None, 0.5), (Some(Z), 0.5)],
        (Some(Lower), Some(Raise)) => vec![(None, 0.5), (Some(Z), -0.5)],
        (Some(Raise), Some(Z)) => vec![(Some(Raise), -1.0)],
        (Some(Z), Some(Raise)) => vec![(Some(Raise), 1.0)],
        (Some(Lower), Some(Z)) => vec![(Some(Lower), 1.0)],
        (Some(Z), Some(Lower)) => vec![(Some(Lower), -1.0)],
        (Some(Z), Some(Z)) => vec![(None, 1.0)],
    }
}

impl fmt::Display for Monomial {
    /// Plain-text form such as `ad0^2 a0 sp1`; `1` for the identity.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "1");
        }
        let mut first = true;
        let mut sep = |f: &mut fmt::Formatter<'_>| -> fmt::Result {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            Ok(())
        };
        for (mode, p, q) in self.boson.iter() {
            for (sym, e) in [("ad", p), ("a", q)] {
                if e == 0 {
                    continue;
                }
                sep(f)?;
                write!(f, "{sym}{mode}")?;
                if e > 1 {
                    write!(f, "^{e}")?;
                }
            }
        }
        for (site, op) in self.spin.iter() {
            sep(f)?;
            write!(f, "{}{site}", op.symbol())?;
        }
        Ok(())
    }
}

/// Parses the text form written by `Display`, e.g. `ad0^2 a0 sp1` or `1`.
/// Within a mode `ad` must precede `a`, since the monomial is normal ordered.
impl core::str::FromStr for Monomial {
    type Err = AlgebraError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| AlgebraError::InvalidMonomial(alloc::format!("{text:?}: {why}"));
        let body = text.trim();
        if body == "1" {
            return Ok(Self::identity());
        }
        if body.is_empty() {
            return Err(bad("empty"));
        }
        let mut boson = BosonMonomial::identity();
        let mut spin = SpinMonomial::identity();
        for token in body.split_whitespace() {
            let (head, exponent) = match token.split_once('^') {
                Some((h, e)) => (h, e.parse::<u32>().map_err(|_| bad("exponent is not an integer"))?),
                None => (token, 1),
            };
            let split = head.find(|c: char| c.is_ascii_digit()).ok_or_else(|| bad("operator lacks an index"))?;
            let (symbol, index) = head.split_at(split);
            let index: usize = index.parse().map_err(|_| bad("index is not an integer"))?;
            if exponent == 0 {
                return Err(bad("zero exponent"));
            }
            match symbol {
                "ad" | "a" => {
                    let (p, q) = boson.exponents(index);
                    match symbol {
                        "ad" if p == 0 && q == 0 => boson.set(index, exponent, 0),
                        "a" if q == 0 => boson.set(index, p, exponent),
                        "ad" => return Err(bad("creation operator after annihilation or repeated")),
                        _ => return Err(bad("annihilation operator repeated")),
                    }
                }
                "sp" | "sm" | "sz" => {
                    if exponent != 1 || spin.get(index).is_some() {
                        return Err(bad("spin operators appear at most once per site"));
                    }
                    let op = match symbol {
                        "sp" => SpinOp::Raise,
                        "sm" => SpinOp::Lower,
                        _ => SpinOp::Z,
                    };
                    spin = spin.with(index, op);
                }
                _ => return Err(bad("unknown operator symbol")),
            }
        }
        Ok(Self::new(boson, spin))
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Monomial {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Monomial {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = <alloc::string::String as serde::Deserialize>::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Linear combination of normal-ordered monomials with complex coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OperatorPolynomial {
    terms: BTreeMap<Monomial, C64>,
}

impl OperatorPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::scalar(C64::new(1.0, 0.0))
    }

    pub fn scalar(c: C64) -> Self {
        Self::term(Monomial::identity(), c)
    }

    pub fn term(monomial: Monomial, coef: C64) -> Self {
        let mut p = Self::zero();
        p.add_term(monomial, coef);
        p
    }

    pub fn monomial(monomial: Monomial) -> Self {
        Self::term(monomial, C64::new(1.0, 0.0))
    }

    /// `a_mode`
    pub fn annihilate(mode: usize) -> Self {
        Self::monomial(Monomial::boson(mode, 0, 1))
    }

    /// `a_mode†`
    pub fn create(mode: usize) -> Self {
        Self::monomial(Monomial::boson(mode, 1, 0))
    }

    /// `a_mode† a_mode`
    pub fn number(mode: usize) -> Self {
        Self::monomial(Monomial::boson(mode, 1, 1))
    }

    pub fn sigma_plus(site: usize) -> Self {
        Self::monomial(Monomial::spin(site, SpinOp::Raise))
    }

    pub fn sigma_minus(site: usize) -> Self {
        Self::monomial(Monomial::spin(site, SpinOp::Lower))
    }

    pub fn sigma_z(site: usize) -> Self {
        Self::monomial(Monomial::spin(site, SpinOp::Z))
    }

    pub fn add_term(&mut self, monomial: Monomial, coef: C64) {
        use alloc::collections::btree_map::Entry;
        match self.terms.entry(monomial) {
            Entry::Vacant(v) => {
                if coef.norm() >= DROP_TOLERANCE {
                    v.insert(coef);
                }
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += coef;
                if o.get().norm() < DROP_TOLERANCE {
                    o.remove();
                }
            }
        }
    }

    pub fn coefficient(&self, monomial: &Monomial) -> C64 {
        self.terms.get(monomial).copied().unwrap_or_else(C64::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn monomials(&self) -> impl Iterator<Item = &Monomial> {
        self.terms.keys()
    }

    /// Re-applies the drop tolerance.
    pub fn simplify(mut self) -> Self {
        self.terms.retain(|_, c| c.norm() >= DROP_TOLERANCE);
        self
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect() }.simplify()
    }

    /// Hermitian conjugate.
    pub fn adjoint(&self) -> Self {
        Self { terms: self.terms.iter().map(|(m, c)| (m.adjoint(), c.conj())).collect() }
    }

    /// Largest coefficient-wise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        let adj = self.adjoint();
        let keys: BTreeSet<&Monomial> = self.terms.keys().chain(adj.terms.keys()).collect();
        keys.into_iter()
            .map(|k| (self.coefficient(k) - adj.coefficient(k)).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol * self.max_abs_coefficient().max(1.0)
    }

    /// Commutator `[self, rhs]`.
    pub fn commutator(&self, rhs: &Self) -> Self {
        &(self * rhs) - &(rhs * self)
    }

    /// Largest boson mode index used, if any.
    pub fn max_mode(&self) -> Option<usize> {
        self.terms.keys().filter_map(|m| m.boson.max_mode()).max()
    }

    pub fn max_site(&self) -> Option<usize> {
        self.terms.keys().filter_map(|m| m.spin.max_site()).max()
    }

    /// Highest boson order among the terms.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.order()).max().unwrap_or(0)
    }

    /// Replaces every mode operator by a linear combination of new mode operators:
    /// `a_m → Σ_k map[m][k].1 · b_{map[m][k].0}`, `a_m† → Σ_k conj(..) · b_k†`.
    pub fn substitute_modes(&self, map: &[Vec<(usize, C64)>]) -> Self {
        let annihilators: Vec<Self> = map
            .iter()
            .map(|combo| {
                combo.iter().fold(Self::zero(), |acc, &(k, u)| acc + Self::annihilate(k).scale(u))
            })
            .collect();
        let creators: Vec<Self> = annihilators.iter().map(Self::adjoint).collect();
        let mut out = Self::zero();
        for (mono, coef) in &self.terms {
            let mut prod = Self::monomial(Monomial { boson: BosonMonomial::identity(), spin: mono.spin.clone() });
            for (mode, p, _) in mono.boson.iter() {
                for _ in 0..p {
                    prod = &prod * &creators[mode];
                }
            }
            for (mode, _, q) in mono.boson.iter() {
                for _ in 0..q {
                    prod = &prod * &annihilators[mode];
                }
            }
            out += prod.scale(*coef);
        }
        out
    }
}

impl fmt::Display for OperatorPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({}{:+}i)", c.re, c.im)?;
            if !m.is_identity() {
                write!(f, " {m}")?;
            }
        }
        Ok(())
    }
}

impl AddAssign<&OperatorPolynomial> for OperatorPolynomial {
    fn add_assign(&mut self, rhs: &OperatorPolynomial) {
        for (m, c) in &rhs.terms {
            *self.terms.entry(m.clone()).or_insert_with(C64::zero) += c;
        }
        self.terms.retain(|_, c| c.norm() >= DROP_TOLERANCE);
    }
}

impl AddAssign for OperatorPolynomial {
    fn add_assign(&mut self, rhs: OperatorPolynomial) {
        *self += &rhs;
    }
}

impl Add for OperatorPolynomial {
    type Output = OperatorPolynomial;
    fn add(mut self, rhs: OperatorPolynomial) -> OperatorPolynomial {
        self += &rhs;
        self
    }
}

impl Add<&OperatorPolynomial> for &OperatorPolynomial {
    type Output = OperatorPolynomial;
    fn add(self, rhs: &OperatorPolynomial) -> OperatorPolynomial {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for OperatorPolynomial {
    type Output = OperatorPolynomial;
    fn sub(self, rhs: OperatorPolynomial) -> OperatorPolynomial {
        &self - &rhs
    }
}

impl Sub<&OperatorPolynomial> for &OperatorPolynomial {
    type Output = OperatorPolynomial;
    fn sub(self, rhs: &OperatorPolynomial) -> OperatorPolynomial {
        let mut out = self.clone();
        out += &(-rhs);
        out
    }
}

impl Neg for &OperatorPolynomial {
    type Output = OperatorPolynomial;
    fn neg(self) -> OperatorPolynomial {
        OperatorPolynomial { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }
}

impl Neg for OperatorPolynomial {
    type Output = OperatorPolynomial;
    fn neg(self) -> OperatorPolynomial {
        -&self
    }
}

impl Mul<&OperatorPolynomial> for &OperatorPolynomial {
    type Output = OperatorPolynomial;
    fn mul(self, rhs: &OperatorPolynomial) -> OperatorPolynomial {
        let mut terms: BTreeMap<Monomial, C64> = BTreeMap::new();
        for (ml, cl) in &self.terms {
            for (mr, cr) in &rhs.terms {
                let c = cl * cr;
                for (m, k) in ml.product(mr) {
                    *terms.entry(m).or_insert_with(C64::zero) += c * k;
                }
            }
        }
        OperatorPolynomial { terms }.simplify()
    }
}

impl Mul for OperatorPolynomial {
    type Output = OperatorPolynomial;
    fn mul(self, rhs: OperatorPolynomial) -> OperatorPolynomial {
        &self * &rhs
    }
}

impl Mul<C64> for OperatorPolynomial {
    type Output = OperatorPolynomial;
    fn mul(self, rhs: C64) -> OperatorPolynomial {
        self.scale(rhs)
    }
}

impl Mul<f64> for OperatorPolynomial {
    type Output = OperatorPolynomial;
    fn mul(self, rhs: f64) -> OperatorPolynomial {
        self.scale(C64::new(rhs, 0.0))
    }
}

/// Declared number of bosonic modes and spin sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IndexSpace {
    pub modes: usize,
    pub spins: usize,
}

impl IndexSpace {
    pub fn new(modes: usize, spins: usize) -> Self {
        Self { modes, spins }
    }

    pub fn check_monomial(&self, m: &Monomial) -> Result<(), AlgebraError> {
        if let Some(mode) = m.boson.max_mode() {
            if mode >= self.modes {
                return Err(AlgebraError::ModeOutOfRange { index: mode, declared: self.modes });
            }
        }
        if let Some(site) = m.spin.max_site() {
            if site >= self.spins {
                return Err(AlgebraError::SpinOutOfRange { index: site, declared: self.spins });
            }
        }
        Ok(())
    }

    pub fn check(&self, poly: &OperatorPolynomial) -> Result<(), AlgebraError> {
        poly.monomials().try_for_each(|m| self.check_monomial(m))
    }

    /// Index-checked normal-ordered product.
    pub fn multiply(
        &self,
        lhs: &OperatorPolynomial,
        rhs: &OperatorPolynomial,
    ) -> Result<OperatorPolynomial, AlgebraError> {
        self.check(lhs)?;
        self.check(rhs)?;
        Ok(lhs * rhs)
    }
}

/// Problem definition: Hermitian Hamiltonian and jump operators with their rates
/// absorbed (each jump is `√rate · c`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelSpec {
    space: IndexSpace,
    hamiltonian: OperatorPolynomial,
    jumps: Vec<OperatorPolynomial>,
}

impl ModelSpec {
    pub fn new(
        space: IndexSpace,
        hamiltonian: OperatorPolynomial,
        jumps: Vec<OperatorPolynomial>,
    ) -> Result<Self, AlgebraError> {
        space.check(&hamiltonian)?;
        for j in &jumps {
            space.check(j)?;
        }
        let defect = hamiltonian.hermiticity_defect();
        if defect > 1e-12 * hamiltonian.max_abs_coefficient().max(1.0) {
            return Err(AlgebraError::NonHermitianHamiltonian { defect });
        }
        let jumps = jumps.into_iter().filter(|j| !j.is_zero()).collect();
        Ok(Self { space, hamiltonian, jumps })
    }

    pub fn space(&self) -> IndexSpace {
        self.space
    }

    pub fn hamiltonian(&self) -> &OperatorPolynomial {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[OperatorPolynomial] {
        &self.jumps
    }
}

/// Heisenberg-picture generator `i[H, A] + Σ_i (c_i† A c_i − ½{c_i† c_i, A})`.
pub fn adjoint_lindblad(
    model: &ModelSpec,
    obs: &OperatorPolynomial,
) -> Result<OperatorPolynomial, AlgebraError> {
    model.space.check(obs)?;
    let mut out = model.hamiltonian.commutator(obs).scale(I);
    for c in &model.jumps {
        let cd = c.adjoint();
        let cdc = &cd * c;
        let sandwich = &(&cd * obs) * c;
        let anti = &(&cdc * obs) + &(obs * &cdc);
        out += &sandwich;
        out += &anti.scale(C64::new(-0.5, 0.0));
    }
    Ok(out)
}

/// One tracked expectation value and the right-hand side of its equation of motion.
#[derive(Debug, Clone, PartialEq)]
pub struct Equation {
    pub key: Monomial,
    pub rhs: OperatorPolynomial,
}

/// Equations of motion for a key set, plus every monomial that appears on a
/// right-hand side without being tracked itself (the closure boundary).
#[derive(Debug, Clone, PartialEq)]
pub struct EomSystem {
    pub equations: Vec<Equation>,
    pub boundary: BTreeSet<Monomial>,
}

impl EomSystem {
    /// All monomials referenced by any right-hand side.
    pub fn referenced(&self) -> BTreeSet<Monomial> {
        self.equations.iter().flat_map(|e| e.rhs.monomials().cloned()).collect()
    }

    pub fn keys(&self) -> impl Iterator<Item = &Monomial> {
        self.equations.iter().map(|e| &e.key)
    }
}

pub fn eom_system(model: &ModelSpec, keys: &[Monomial]) -> Result<EomSystem, AlgebraError> {
    let mut seen = BTreeSet::new();
    for k in keys {
        if !seen.insert(k.clone()) {
            return Err(AlgebraError::DuplicateKey);
        }
    }
    let equations = keys
        .iter()
        .map(|k| {
            let rhs = adjoint_lindblad(model, &OperatorPolynomial::monomial(k.clone()))?;
            Ok(Equation { key: k.clone(), rhs })
        })
        .collect::<Result<Vec<_>, AlgebraError>>()?;
    let tracked: BTreeSet<Monomial> = keys.iter().flat_map(|k| [k.clone(), k.adjoint()]).collect();
    let boundary = equations
        .iter()
        .flat_map(|e| e.rhs.monomials())
        .filter(|m| !m.is_identity() && !tracked.contains(*m))
        .cloned()
        .collect();
    Ok(EomSystem { equations, boundary })
}
