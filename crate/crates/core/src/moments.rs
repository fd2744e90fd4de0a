//! Normal-ordered moments `⟨a†^p a^q⟩` of P-distribution families, their
//! convolutions, and of full multi-mode ansätze with cross-mode corrections.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

#[allow(unused_imports)] // float methods are inherent once std is linked
use num_traits::Float;
use num_traits::Zero;

use crate::algebra::{Monomial, SpinOp};
use crate::error::MomentError;
use crate::numeric::{binomial, cpowi, factorial, falling_factorial, pairings, C64};

/// Address of one expectation value.
pub type MomentKey = Monomial;

/// Largest correlation order an [`Ansatz`] accepts.
pub const MAX_CORRELATION_ORDER: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentOptions {
    /// Largest creation or annihilation exponent evaluated before the overflow guard trips.
    pub max_order: u32,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self { max_order: 16 }
    }
}

impl MomentOptions {
    fn check(&self, p: u32, q: u32) -> Result<(), MomentError> {
        let order = p.max(q);
        if order > self.max_order {
            return Err(MomentError::OrderTooHigh { order, max: self.max_order });
        }
        Ok(())
    }
}

/// One P-distribution family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub enum ComponentState {
    Coherent { alpha: C64 },
    Thermal { n0: f64 },
    Fock { l: u32 },
    Squeezed { r: f64, phi: f64 },
    Cat { alpha1: C64, alpha2: C64, theta: C64 },
    SqueezedThermal { n0: f64, r: f64, phi: f64 },
    SqueezedFock { l: u32, r: f64, phi: f64 },
}

fn canonical_phase(phi: f64) -> f64 {
    let x = phi - TAU * (phi / TAU).floor();
    if x >= TAU {
        0.0
    } else {
        x
    }
}

fn check_finite(name: &str, x: f64) -> Result<(), MomentError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(MomentError::InvalidParameter(format!("{name} is not finite")))
    }
}

fn check_nonneg(name: &str, x: f64) -> Result<(), MomentError> {
    check_finite(name, x)?;
    if x < 0.0 {
        return Err(MomentError::InvalidParameter(format!("{name} = {x} must be >= 0")));
    }
    Ok(())
}

impl ComponentState {
    pub fn coherent(alpha: C64) -> Self {
        Self::Coherent { alpha }
    }

    pub fn vacuum() -> Self {
        Self::Coherent { alpha: C64::zero() }
    }

    pub fn thermal(n0: f64) -> Result<Self, MomentError> {
        check_nonneg("n0", n0)?;
        Ok(Self::Thermal { n0 })
    }

    pub fn fock(l: u32) -> Self {
        Self::Fock { l }
    }

    pub fn squeezed(r: f64, phi: f64) -> Result<Self, MomentError> {
        check_nonneg("r", r)?;
        check_finite("phi", phi)?;
        Ok(Self::Squeezed { r, phi: canonical_phase(phi) })
    }

    pub fn squeezed_thermal(n0: f64, r: f64, phi: f64) -> Result<Self, MomentError> {
        check_nonneg("n0", n0)?;
        check_nonneg("r", r)?;
        check_finite("phi", phi)?;
        Ok(Self::SqueezedThermal { n0, r, phi: canonical_phase(phi) })
    }

    pub fn squeezed_fock(l: u32, r: f64, phi: f64) -> Result<Self, MomentError> {
        check_nonneg("r", r)?;
        check_finite("phi", phi)?;
        Ok(Self::SqueezedFock { l, r, phi: canonical_phase(phi) })
    }

    /// `A(|α₁⟩ + Θ|α₂⟩)`; fails when the superposition has zero norm.
    pub fn cat(alpha1: C64, alpha2: C64, theta: C64) -> Result<Self, MomentError> {
        let s = Self::Cat { alpha1, alpha2, theta };
        s.validate()?;
        Ok(s)
    }

    pub fn is_cat(&self) -> bool {
        matches!(self, Self::Cat { .. })
    }

    pub fn validate(&self) -> Result<(), MomentError> {
        match *self {
            Self::Coherent { alpha } => {
                check_finite("alpha.re", alpha.re)?;
                check_finite("alpha.im", alpha.im)
            }
            Self::Thermal { n0 } => check_nonneg("n0", n0),
            Self::Fock { .. } => Ok(()),
            Self::Squeezed { r, phi } | Self::SqueezedFock { r, phi, .. } => {
                check_nonneg("r", r)?;
                check_finite("phi", phi)
            }
            Self::SqueezedThermal { n0, r, phi } => {
                check_nonneg("n0", n0)?;
                check_nonneg("r", r)?;
                check_finite("phi", phi)
            }
            Self::Cat { alpha1, alpha2, theta } => {
                for x in [alpha1.re, alpha1.im, alpha2.re, alpha2.im, theta.re, theta.im] {
                    check_finite("cat parameter", x)?;
                }
                let norm = cat_norm_sqr(alpha1, alpha2, theta);
                if norm <= 1e-14 {
                    return Err(MomentError::InvalidParameter(format!(
                        "cat superposition has vanishing norm {norm:e}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Moments for all `p <= pmax`, `q <= qmax`.
    pub fn moment_table(&self, pmax: u32, qmax: u32, opts: &MomentOptions) -> Result<MomentTable, MomentError> {
        opts.check(pmax, qmax)?;
        self.validate()?;
        let mut table = MomentTable::zeros(pmax, qmax);
        match *self {
            Self::Coherent { alpha } => {
                let conj_pows: Vec<C64> = (0..=pmax).map(|p| cpowi(alpha.conj(), p)).collect();
                let pows: Vec<C64> = (0..=qmax).map(|q| cpowi(alpha, q)).collect();
                for p in 0..=pmax {
                    for q in 0..=qmax {
                        table.set(p, q, conj_pows[p as usize] * pows[q as usize]);
                    }
                }
            }
            Self::Thermal { n0 } => {
                for p in 0..=pmax.min(qmax) {
                    table.set(p, p, C64::new(factorial(p) * n0.powi(p as i32), 0.0));
                }
            }
            Self::Fock { l } => {
                for p in 0..=pmax.min(qmax) {
                    table.set(p, p, C64::new(falling_factorial(l, p), 0.0));
                }
            }
            Self::Squeezed { r, phi } => {
                let (n, m) = squeezed_pairs(0.0, r, phi);
                fill_gaussian(&mut table, n, m);
            }
            Self::SqueezedThermal { n0, r, phi } => {
                let (n, m) = squeezed_pairs(n0, r, phi);
                fill_gaussian(&mut table, n, m);
            }
            Self::SqueezedFock { l, r, phi } => fill_squeezed_fock(&mut table, l, r, phi),
            Self::Cat { alpha1, alpha2, theta } => fill_cat(&mut table, alpha1, alpha2, theta),
        }
        Ok(table)
    }
}

/// Normal-ordered pair contractions `(⟨a†a⟩, ⟨aa⟩)` of `S(r,Φ) ρ_th(n₀) S†`,
/// with `S†aS = a cosh r − e^{iΦ} a† sinh r`.
fn squeezed_pairs(n0: f64, r: f64, phi: f64) -> (f64, C64) {
    let (s, c) = (r.sinh(), r.cosh());
    let n = n0 * (c * c + s * s) + s * s;
    let m = -C64::from_polar(s * c * (2.0 * n0 + 1.0), phi);
    (n, m)
}

/// Wick expansion of a zero-mean Gaussian in normal-ordered pairings.
fn fill_gaussian(table: &mut MomentTable, n: f64, m: C64) {
    let pmax = table.pmax;
    let qmax = table.qmax;
    let mc = m.conj();
    for p in 0..=pmax {
        for q in 0..=qmax {
            if (p + q) % 2 == 1 {
                continue;
            }
            let mut acc = C64::zero();
            for j in 0..=p.min(q) {
                let (rp, rq) = (p - j, q - j);
                if rp % 2 == 1 || rq % 2 == 1 {
                    continue;
                }
                let count = binomial(p, j) * binomial(q, j) * factorial(j) * pairings(rp) * pairings(rq);
                acc += cpowi(mc, rp / 2) * cpowi(m, rq / 2) * (count * n.powi(j as i32));
            }
            table.set(p, q, acc);
        }
    }
}

/// Exact finite sum: `⟨l|(B†)^p B^q|l⟩` with `B = S†aS = cosh r·a − e^{iΦ} sinh r·a†`.
fn fill_squeezed_fock(table: &mut MomentTable, l: u32, r: f64, phi: f64) {
    let kmax = table.pmax.max(table.qmax);
    let width = (l + kmax + 1) as usize;
    let coef_a = C64::new(r.cosh(), 0.0);
    let coef_ad = -C64::from_polar(r.sinh(), phi);
    let mut vectors: Vec<Vec<C64>> = Vec::with_capacity(kmax as usize + 1);
    let mut v = vec![C64::zero(); width];
    v[l as usize] = C64::new(1.0, 0.0);
    vectors.push(v.clone());
    for _ in 0..kmax {
        let mut next = vec![C64::zero(); width];
        for (n, &amp) in v.iter().enumerate() {
            if amp == C64::zero() {
                continue;
            }
            if n > 0 {
                next[n - 1] += coef_a * amp * (n as f64).sqrt();
            }
            if n + 1 < width {
                next[n + 1] += coef_ad * amp * ((n + 1) as f64).sqrt();
            }
        }
        v = next;
        vectors.push(v.clone());
    }
    for p in 0..=table.pmax {
        for q in 0..=table.qmax {
            let val = vectors[p as usize]
                .iter()
                .zip(&vectors[q as usize])
                .map(|(x, y)| x.conj() * y)
                .sum();
            table.set(p, q, val);
        }
    }
}

/// `⟨α|β⟩ = exp(−|α|²/2 − |β|²/2 + α*β)`
fn coherent_overlap(a: C64, b: C64) -> C64 {
    (a.conj() * b - 0.5 * (a.norm_sqr() + b.norm_sqr())).exp()
}

fn cat_norm_sqr(a1: C64, a2: C64, theta: C64) -> f64 {
    1.0 + theta.norm_sqr() + 2.0 * (theta * coherent_overlap(a1, a2)).re
}

fn fill_cat(table: &mut MomentTable, a1: C64, a2: C64, theta: C64) {
    let weights = [C64::new(1.0, 0.0), theta];
    let alphas = [a1, a2];
    let norm = cat_norm_sqr(a1, a2, theta);
    for p in 0..=table.pmax {
        for q in 0..=table.qmax {
            let mut acc = C64::zero();
            for i in 0..2 {
                for j in 0..2 {
                    acc += weights[i].conj()
                        * weights[j]
                        * cpowi(alphas[i].conj(), p)
                        * cpowi(alphas[j], q)
                        * coherent_overlap(alphas[i], alphas[j]);
                }
            }
            table.set(p, q, acc / norm);
        }
    }
}

/// Dense table of `⟨a†^p a^q⟩` for `p <= pmax`, `q <= qmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pmax: u32,
    qmax: u32,
    data: Vec<C64>,
}

impl MomentTable {
    pub fn zeros(pmax: u32, qmax: u32) -> Self {
        Self { pmax, qmax, data: vec![C64::zero(); ((pmax + 1) * (qmax + 1)) as usize] }
    }

    /// Moments of the identity element of convolution (the vacuum delta).
    pub fn unit(pmax: u32, qmax: u32) -> Self {
        let mut t = Self::zeros(pmax, qmax);
        t.set(0, 0, C64::new(1.0, 0.0));
        t
    }

    pub fn pmax(&self) -> u32 {
        self.pmax
    }

    pub fn qmax(&self) -> u32 {
        self.qmax
    }

    fn idx(&self, p: u32, q: u32) -> usize {
        (p * (self.qmax + 1) + q) as usize
    }

    pub fn get(&self, p: u32, q: u32) -> C64 {
        self.data[self.idx(p, q)]
    }

    pub fn try_get(&self, p: u32, q: u32) -> Option<C64> {
        (p <= self.pmax && q <= self.qmax).then(|| self.get(p, q))
    }

    pub fn set(&mut self, p: u32, q: u32, v: C64) {
        let i = self.idx(p, q);
        self.data[i] = v;
    }

    /// Moments of the convolved P distribution:
    /// `Σ_{n≤p} Σ_{m≤q} C(p,n) C(q,m) ⟨a†^n a^m⟩_self ⟨a†^{p−n} a^{q−m}⟩_other`.
    pub fn convolve(&self, other: &MomentTable) -> MomentTable {
        let pmax = self.pmax.min(other.pmax);
        let qmax = self.qmax.min(other.qmax);
        let mut out = MomentTable::zeros(pmax, qmax);
        for p in 0..=pmax {
            for q in 0..=qmax {
                let mut acc = C64::zero();
                for n in 0..=p {
                    let bp = binomial(p, n);
                    for m in 0..=q {
                        let a = self.get(n, m);
                        if a == C64::zero() {
                            continue;
                        }
                        let b = other.get(p - n, q - m);
                        acc += a * b * (bp * binomial(q, m));
                    }
                }
                out.set(p, q, acc);
            }
        }
        out
    }
}

/// Normal-ordered moment of a single component state.
pub fn component_moment(state: &ComponentState, p: u32, q: u32, opts: &MomentOptions) -> Result<C64, MomentError> {
    Ok(state.moment_table(p, q, opts)?.get(p, q))
}

/// Moment of the left-to-right convolution of `components`.
pub fn convolve_moment(components: &[ComponentState], p: u32, q: u32, opts: &MomentOptions) -> Result<C64, MomentError> {
    Ok(convolved_table(components, p, q, opts)?.get(p, q))
}

pub fn convolved_table(
    components: &[ComponentState],
    pmax: u32,
    qmax: u32,
    opts: &MomentOptions,
) -> Result<MomentTable, MomentError> {
    let (first, rest) = components.split_first().ok_or(MomentError::EmptyMode)?;
    let mut acc = first.moment_table(pmax, qmax, opts)?;
    for c in rest {
        acc = acc.convolve(&c.moment_table(pmax, qmax, opts)?);
    }
    Ok(acc)
}

/// Convolution of component P distributions describing one mode.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeAnsatz {
    pub components: Vec<ComponentState>,
}

impl ModeAnsatz {
    pub fn new(components: Vec<ComponentState>) -> Result<Self, MomentError> {
        let m = Self { components };
        m.validate(0)?;
        Ok(m)
    }

    pub fn vacuum() -> Self {
        Self { components: vec![ComponentState::vacuum()] }
    }

    pub fn validate(&self, mode: usize) -> Result<(), MomentError> {
        if self.components.is_empty() {
            return Err(MomentError::EmptyMode);
        }
        if self.components.iter().filter(|c| c.is_cat()).count() > 1 {
            return Err(MomentError::MultipleCats { mode });
        }
        self.components.iter().try_for_each(ComponentState::validate)
    }

    pub fn table(&self, pmax: u32, qmax: u32, opts: &MomentOptions) -> Result<MomentTable, MomentError> {
        convolved_table(&self.components, pmax, qmax, opts)
    }
}

/// Spin-1/2 state `½(1 + x σˣ + y σʸ + z σᶻ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpinAnsatz {
    pub bloch: [f64; 3],
}

impl SpinAnsatz {
    pub fn new(bloch: [f64; 3]) -> Result<Self, MomentError> {
        let s = Self { bloch };
        s.validate()?;
        Ok(s)
    }

    pub fn ground() -> Self {
        Self { bloch: [0.0, 0.0, -1.0] }
    }

    pub fn validate(&self) -> Result<(), MomentError> {
        let len = self.bloch.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !len.is_finite() || len > 1.0 + 1e-12 {
            return Err(MomentError::BlochOutsideBall(len));
        }
        Ok(())
    }

    pub fn expectation(&self, op: SpinOp) -> C64 {
        let [x, y, z] = self.bloch;
        match op {
            SpinOp::Raise => C64::new(0.5 * x, 0.5 * y),
            SpinOp::Lower => C64::new(0.5 * x, -0.5 * y),
            SpinOp::Z => C64::new(z, 0.0),
        }
    }

    /// Bloch vector reproducing the given `⟨σ⁻⟩`, `⟨σᶻ⟩`.
    pub fn from_expectations(sigma_minus: C64, sigma_z: f64) -> Self {
        Self { bloch: [2.0 * sigma_minus.re, -2.0 * sigma_minus.im, sigma_z] }
    }
}

/// Full variational state: convolved families per mode, Bloch vectors per spin,
/// and explicit cross-mode correlation corrections `δ`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ansatz {
    pub modes: Vec<ModeAnsatz>,
    pub spins: Vec<SpinAnsatz>,
    /// Keyed by the canonical member of each conjugate pair.
    correlations: BTreeMap<MomentKey, C64>,
    max_correlation_order: u32,
}

impl Ansatz {
    pub fn new(modes: Vec<ModeAnsatz>, spins: Vec<SpinAnsatz>) -> Result<Self, MomentError> {
        let a = Self { modes, spins, correlations: BTreeMap::new(), max_correlation_order: 2 };
        a.validate()?;
        Ok(a)
    }

    /// Product ansatz with every mode in vacuum and every spin in the ground state.
    pub fn vacuum(modes: usize, spins: usize) -> Self {
        Self {
            modes: vec![ModeAnsatz::vacuum(); modes],
            spins: vec![SpinAnsatz::ground(); spins],
            correlations: BTreeMap::new(),
            max_correlation_order: 2,
        }
    }

    pub fn validate(&self) -> Result<(), MomentError> {
        for (i, m) in self.modes.iter().enumerate() {
            m.validate(i)?;
        }
        self.spins.iter().try_for_each(SpinAnsatz::validate)
    }

    pub fn max_correlation_order(&self) -> u32 {
        self.max_correlation_order
    }

    pub fn set_max_correlation_order(&mut self, order: u32) -> Result<(), MomentError> {
        if !(2..=MAX_CORRELATION_ORDER).contains(&order) {
            return Err(MomentError::InvalidParameter(format!(
                "correlation order {order} outside 2..={MAX_CORRELATION_ORDER}"
            )));
        }
        self.max_correlation_order = order;
        self.correlations.retain(|k, _| k.order() <= order);
        Ok(())
    }

    /// Checks that `key` may carry a correlation correction.
    pub fn check_correlation_key(&self, key: &MomentKey) -> Result<(), MomentError> {
        if key.boson.mode_count() < 2 || !key.spin.is_identity() {
            return Err(MomentError::CorrelationNotCrossMode { key: key.clone() });
        }
        let order = key.order();
        if order > self.max_correlation_order {
            return Err(MomentError::CorrelationOrder { key: key.clone(), order, max: self.max_correlation_order });
        }
        if key.boson.max_mode().is_some_and(|m| m >= self.modes.len()) {
            return Err(MomentError::KeyOutOfRange { key: key.clone() });
        }
        Ok(())
    }

    /// Sets `δ(key)`; the conjugate key implicitly carries `conj(δ)`.
    pub fn set_correlation(&mut self, key: &MomentKey, delta: C64) -> Result<(), MomentError> {
        self.check_correlation_key(key)?;
        let (canon, value) = if key.is_canonical() { (key.clone(), delta) } else { (key.adjoint(), delta.conj()) };
        let value = if canon.is_self_adjoint() { C64::new(value.re, 0.0) } else { value };
        if value == C64::zero() {
            self.correlations.remove(&canon);
        } else {
            self.correlations.insert(canon, value);
        }
        Ok(())
    }

    pub fn correlation(&self, key: &MomentKey) -> C64 {
        if let Some(v) = self.correlations.get(key) {
            return *v;
        }
        if !key.is_canonical() {
            if let Some(v) = self.correlations.get(&key.adjoint()) {
                return v.conj();
            }
        }
        C64::zero()
    }

    /// Canonical correlation keys with their values.
    pub fn correlations(&self) -> impl Iterator<Item = (&MomentKey, &C64)> {
        self.correlations.iter()
    }

    pub fn clear_correlations(&mut self) {
        self.correlations.clear();
    }
}

/// Moment of a full ansatz: product of per-mode convolved moments and spin
/// expectations, plus the stored correction for exactly this key.
pub fn ansatz_moment(ansatz: &Ansatz, key: &MomentKey, opts: &MomentOptions) -> Result<C64, MomentError> {
    if key.is_identity() {
        return Ok(C64::new(1.0, 0.0));
    }
    let mut value = C64::new(1.0, 0.0);
    for (mode, p, q) in key.boson.iter() {
        let m = ansatz.modes.get(mode).ok_or_else(|| MomentError::KeyOutOfRange { key: key.clone() })?;
        value *= convolve_moment(&m.components, p, q, opts)?;
    }
    for (site, op) in key.spin.iter() {
        let s = ansatz.spins.get(site).ok_or_else(|| MomentError::KeyOutOfRange { key: key.clone() })?;
        value *= s.expectation(op);
    }
    Ok(value + ansatz.correlation(key))
}

/// Precomputed per-mode moment tables for repeated evaluation of many keys.
#[derive(Debug, Clone)]
pub struct AnsatzMoments<'a> {
    ansatz: &'a Ansatz,
    tables: Vec<MomentTable>,
}

impl<'a> AnsatzMoments<'a> {
    /// `orders[m] = (pmax, qmax)` needed for mode `m`.
    pub fn new(ansatz: &'a Ansatz, orders: &[(u32, u32)], opts: &MomentOptions) -> Result<Self, MomentError> {
        let tables = ansatz
            .modes
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let (p, q) = orders.get(i).copied().unwrap_or((0, 0));
                m.table(p, q, opts)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { ansatz, tables })
    }

    pub fn table(&self, mode: usize) -> &MomentTable {
        &self.tables[mode]
    }

    /// Factorized part only (no correlation correction); `None` when the key
    /// exceeds the precomputed orders or index space.
    pub fn factorized(&self, key: &MomentKey) -> Option<C64> {
        let mut value = C64::new(1.0, 0.0);
        for (mode, p, q) in key.boson.iter() {
            value *= self.tables.get(mode)?.try_get(p, q)?;
        }
        for (site, op) in key.spin.iter() {
            value *= self.ansatz.spins.get(site)?.expectation(op);
        }
        Some(value)
    }

    pub fn get(&self, key: &MomentKey) -> Option<C64> {
        if key.is_identity() {
            return Some(C64::new(1.0, 0.0));
        }
        Some(self.factorized(key)? + self.ansatz.correlation(key))
    }
}

/// Effective squeezing `(r, Φ)` from first and second moments of one mode.
///
/// `ν = ⟨a†a⟩ − |⟨a⟩|²`, `μ = ⟨aa⟩ − ⟨a⟩²`, `V_min = ½ + ν − |μ|`;
/// `r = −½ ln(2 V_min)` when `V_min < ½`, else 0; `Φ = arg(−μ)`.
pub fn squeezing_of(mean: C64, number: f64, pair: C64) -> Result<(f64, f64), MomentError> {
    let nu = number - mean.norm_sqr();
    let mu = pair - mean * mean;
    let v_min = 0.5 + nu - mu.norm();
    if v_min <= 0.0 || !v_min.is_finite() {
        return Err(MomentError::Unphysical(v_min));
    }
    let phi = if mu == C64::zero() { 0.0 } else { canonical_phase((-mu).arg()) };
    if v_min >= 0.5 {
        return Ok((0.0, phi));
    }
    Ok((-0.5 * (2.0 * v_min).ln(), phi))
}

/// [`squeezing_of`] read from a mode's moment table.
pub fn squeezing_of_table(table: &MomentTable) -> Result<(f64, f64), MomentError> {
    let get = |p, q| table.try_get(p, q).ok_or(MomentError::OrderTooHigh { order: 2, max: table.pmax().min(table.qmax()) });
    squeezing_of(get(0, 1)?, get(1, 1)?.re, get(0, 2)?)
}
