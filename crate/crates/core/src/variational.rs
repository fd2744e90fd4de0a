//! Residual norm of the moment equations for a parameterized ansatz, its
//! minimization, and Maxwell-Bloch fixed points with variational branch selection.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods are inherent once std is linked
use num_traits::Float;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{eom_system, BosonMonomial, EomSystem, IndexSpace, ModelSpec, Monomial, SpinMonomial, SpinOp};
use crate::error::{MomentError, VariationalError};
use crate::models::{jaynes_cummings, JcParams};
use crate::moments::{Ansatz, AnsatzMoments, ComponentState, MomentOptions, SpinAnsatz};
use crate::numeric::{real_cubic_roots, C64, I};

/// Canonical representatives of all monomials with `1 <= total order <= max_order`,
/// where each non-identity spin factor counts one.
pub fn tracked_keys(space: IndexSpace, max_order: u32) -> Vec<Monomial> {
    let mut out = BTreeSet::new();
    let mut current = Vec::new();
    boson_keys(space.modes, 0, max_order, &mut current, &mut |boson, left| {
        spin_keys(space.spins, 0, left, &mut Vec::new(), &mut |spins| {
            let m = Monomial::new(
                BosonMonomial::from_exponents(boson.iter().copied()),
                spins.iter().fold(SpinMonomial::identity(), |acc, &(s, op)| acc.with(s, op)),
            );
            if !m.is_identity() {
                out.insert(m.canonical());
            }
        });
    });
    out.into_iter().collect()
}

fn boson_keys(
    modes: usize,
    mode: usize,
    left: u32,
    current: &mut Vec<(usize, u32, u32)>,
    emit: &mut dyn FnMut(&[(usize, u32, u32)], u32),
) {
    if mode == modes {
        emit(current, left);
        return;
    }
    for total in 0..=left {
        for p in 0..=total {
            current.push((mode, p, total - p));
            boson_keys(modes, mode + 1, left - total, current, emit);
            current.pop();
        }
    }
}

fn spin_keys(spins: usize, site: usize, left: u32, current: &mut Vec<(usize, SpinOp)>, emit: &mut dyn FnMut(&[(usize, SpinOp)])) {
    if site == spins {
        emit(current);
        return;
    }
    spin_keys(spins, site + 1, left, current, emit);
    if left > 0 {
        for op in [SpinOp::Raise, SpinOp::Lower, SpinOp::Z] {
            current.push((site, op));
            spin_keys(spins, site + 1, left - 1, current, emit);
            current.pop();
        }
    }
}

/// Canonical cross-mode boson monomials of order `2..=max_order` touching at
/// least two modes: the admissible correlation keys.
pub fn correlation_keys(modes: usize, max_order: u32) -> Vec<Monomial> {
    tracked_keys(IndexSpace::new(modes, 0), max_order)
        .into_iter()
        .filter(|k| k.boson.mode_count() >= 2)
        .collect()
}

/// Splits a monomial into its single-mode and single-site factors; the
/// factorized closure reads the monomial as the product of their expectations.
pub fn factorize(m: &Monomial) -> Vec<Monomial> {
    let mut out: Vec<Monomial> = m.boson.iter().map(|(mode, p, q)| Monomial::boson(mode, p, q)).collect();
    out.extend(m.spin.iter().map(|(site, op)| Monomial::spin(site, op)));
    out
}

/// Equations of motion flattened for repeated evaluation.
#[derive(Debug, Clone)]
pub struct CompiledSystem {
    keys: Vec<Monomial>,
    monomials: Vec<Monomial>,
    key_slots: Vec<usize>,
    rows: Vec<Vec<(usize, C64)>>,
    orders: Vec<(u32, u32)>,
}

impl CompiledSystem {
    pub fn new(system: &EomSystem, space: IndexSpace) -> Self {
        let mut index: BTreeMap<Monomial, usize> = BTreeMap::new();
        let mut monomials = Vec::new();
        let mut slot = |m: &Monomial, monomials: &mut Vec<Monomial>| -> usize {
            *index.entry(m.clone()).or_insert_with(|| {
                monomials.push(m.clone());
                monomials.len() - 1
            })
        };
        let mut rows = Vec::new();
        let mut key_slots = Vec::new();
        for eq in &system.equations {
            key_slots.push(slot(&eq.key, &mut monomials));
            rows.push(eq.rhs.terms().map(|(m, &c)| (slot(m, &mut monomials), c)).collect());
        }
        let mut orders = vec![(0u32, 0u32); space.modes];
        for m in &monomials {
            for (mode, p, q) in m.boson.iter() {
                let o = &mut orders[mode];
                *o = (o.0.max(p), o.1.max(q));
            }
        }
        Self { keys: system.keys().cloned().collect(), monomials, key_slots, rows, orders }
    }

    pub fn from_model(model: &ModelSpec, keys: &[Monomial]) -> Result<Self, VariationalError> {
        Ok(Self::new(&eom_system(model, keys)?, model.space()))
    }

    pub fn keys(&self) -> &[Monomial] {
        &self.keys
    }

    /// Largest `(p, q)` per mode over every monomial involved.
    pub fn orders(&self) -> &[(u32, u32)] {
        &self.orders
    }

    fn values(&self, ansatz: &Ansatz, opts: &MomentOptions) -> Result<Vec<C64>, VariationalError> {
        let closure = |m: &Monomial| VariationalError::Closure { key: m.clone() };
        let mut orders = self.orders.clone();
        orders.resize(ansatz.modes.len(), (0, 0));
        let tables = AnsatzMoments::new(ansatz, &orders, opts).map_err(|e| match e {
            MomentError::OrderTooHigh { .. } => {
                let worst = self.monomials.iter().max_by_key(|m| m.boson.iter().map(|(_, p, q)| p.max(q)).max());
                worst.map(closure).unwrap_or(VariationalError::Moment(e))
            }
            other => VariationalError::Moment(other),
        })?;
        self.monomials.iter().map(|m| tables.get(m).ok_or_else(|| closure(m))).collect()
    }

    /// `d⟨A_n⟩/dt` per tracked key.
    pub fn residuals(&self, ansatz: &Ansatz, opts: &MomentOptions) -> Result<Vec<C64>, VariationalError> {
        let values = self.values(ansatz, opts)?;
        Ok(self.rows.iter().map(|row| row.iter().map(|&(i, c)| c * values[i]).sum()).collect())
    }

    pub fn cost(&self, ansatz: &Ansatz, weights: &WeightScheme, opts: &MomentOptions) -> Result<CostReport, VariationalError> {
        let values = self.values(ansatz, opts)?;
        let residuals: Vec<C64> = self.rows.iter().map(|row| row.iter().map(|&(i, c)| c * values[i]).sum()).collect();
        let weights: Vec<f64> = match weights {
            WeightScheme::Adaptive => self.key_slots.iter().map(|&i| 1.0 / values[i].norm().max(1.0)).collect(),
            WeightScheme::Uniform => vec![1.0; residuals.len()],
            WeightScheme::Relative => self
                .rows
                .iter()
                .map(|row| {
                    let scale: f64 = row.iter().map(|&(i, c)| (c * values[i]).norm()).sum();
                    if scale > 0.0 {
                        1.0 / scale
                    } else {
                        0.0
                    }
                })
                .collect(),
        };
        let total = residuals.iter().zip(&weights).map(|(r, w)| w * r.norm()).sum();
        Ok(CostReport {
            total,
            residuals: self.keys.iter().cloned().zip(residuals).collect(),
            weights,
            evaluations: 1,
            converged: true,
        })
    }
}

/// How residuals are weighted in `D = Σ w_n |F_n|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum WeightScheme {
    /// `w_n = 1 / max(1, |⟨A_n⟩|)` at the evaluated ansatz.
    #[default]
    Adaptive,
    Uniform,
    /// `w_n = 1 / Σ_i |c_i ⟨m_i⟩|` over the terms of equation n, so each
    /// residual measures how badly its terms fail to cancel. A vanishing
    /// equation gets weight 0.
    Relative,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostReport {
    pub total: f64,
    pub residuals: Vec<(Monomial, C64)>,
    pub weights: Vec<f64>,
    pub evaluations: usize,
    pub converged: bool,
}

/// Residuals of the equations for `keys` at `ansatz`.
pub fn residuals(model: &ModelSpec, keys: &[Monomial], ansatz: &Ansatz, opts: &MomentOptions) -> Result<Vec<(Monomial, C64)>, VariationalError> {
    let compiled = CompiledSystem::from_model(model, keys)?;
    Ok(compiled.keys.iter().cloned().zip(compiled.residuals(ansatz, opts)?).collect())
}

pub fn cost(
    model: &ModelSpec,
    keys: &[Monomial],
    ansatz: &Ansatz,
    weights: WeightScheme,
    opts: &MomentOptions,
) -> Result<CostReport, VariationalError> {
    CompiledSystem::from_model(model, keys)?.cost(ansatz, &weights, opts)
}

/// One real optimization coordinate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Slot {
    /// Coherent amplitude, or `α₁`/`α₂` of a cat (`which` = 0/1).
    Alpha { mode: usize, component: usize, which: u8, imag: bool },
    CatPhase { mode: usize, component: usize, imag: bool },
    /// `u` with `n₀ = u²`.
    Occupation { mode: usize, component: usize },
    /// `ζ = r e^{iΦ}`.
    Squeezing { mode: usize, component: usize, imag: bool },
    Bloch { spin: usize, axis: u8 },
    Correlation { key: Monomial, imag: bool },
}

/// Flat parameter vector layout for a template ansatz: every continuous
/// component parameter, every Bloch vector, and the listed correlation keys.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSchema {
    template: Ansatz,
    slots: Vec<Slot>,
}

impl ParameterSchema {
    pub fn new(template: &Ansatz, correlation_keys: &[Monomial]) -> Result<Self, VariationalError> {
        template.validate()?;
        let mut slots = Vec::new();
        for (mode, m) in template.modes.iter().enumerate() {
            for (component, c) in m.components.iter().enumerate() {
                let alpha = |which, slots: &mut Vec<Slot>| {
                    for imag in [false, true] {
                        slots.push(Slot::Alpha { mode, component, which, imag });
                    }
                };
                let squeeze = |slots: &mut Vec<Slot>| {
                    for imag in [false, true] {
                        slots.push(Slot::Squeezing { mode, component, imag });
                    }
                };
                match c {
                    ComponentState::Coherent { .. } => alpha(0, &mut slots),
                    ComponentState::Thermal { .. } => slots.push(Slot::Occupation { mode, component }),
                    ComponentState::Fock { .. } => {}
                    ComponentState::Squeezed { .. } | ComponentState::SqueezedFock { .. } => squeeze(&mut slots),
                    ComponentState::SqueezedThermal { .. } => {
                        slots.push(Slot::Occupation { mode, component });
                        squeeze(&mut slots);
                    }
                    ComponentState::Cat { .. } => {
                        alpha(0, &mut slots);
                        alpha(1, &mut slots);
                        for imag in [false, true] {
                            slots.push(Slot::CatPhase { mode, component, imag });
                        }
                    }
                }
            }
        }
        for spin in 0..template.spins.len() {
            for axis in 0..3 {
                slots.push(Slot::Bloch { spin, axis });
            }
        }
        let mut seen = BTreeSet::new();
        for key in correlation_keys {
            template.check_correlation_key(key)?;
            let canon = key.canonical();
            if !seen.insert(canon.clone()) {
                return Err(VariationalError::InvalidSlot(format!("correlation key {canon} listed twice")));
            }
            slots.push(Slot::Correlation { key: canon.clone(), imag: false });
            if !canon.is_self_adjoint() {
                slots.push(Slot::Correlation { key: canon, imag: true });
            }
        }
        if slots.is_empty() {
            return Err(VariationalError::NoFreeParameters);
        }
        Ok(Self { template: template.clone(), slots })
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn template(&self) -> &Ansatz {
        &self.template
    }

    /// Coordinates of `ansatz`, which must share the template's structure.
    pub fn pack(&self, ansatz: &Ansatz) -> Vec<f64> {
        self.slots
            .iter()
            .map(|slot| match slot {
                Slot::Alpha { mode, component, which, imag } => {
                    let z = match ansatz.modes[*mode].components[*component] {
                        ComponentState::Coherent { alpha } => alpha,
                        ComponentState::Cat { alpha1, alpha2, .. } => {
                            if *which == 0 {
                                alpha1
                            } else {
                                alpha2
                            }
                        }
                        _ => C64::zero(),
                    };
                    part(z, *imag)
                }
                Slot::CatPhase { mode, component, imag } => match ansatz.modes[*mode].components[*component] {
                    ComponentState::Cat { theta, .. } => part(theta, *imag),
                    _ => 0.0,
                },
                Slot::Occupation { mode, component } => match ansatz.modes[*mode].components[*component] {
                    ComponentState::Thermal { n0 } | ComponentState::SqueezedThermal { n0, .. } => n0.sqrt(),
                    _ => 0.0,
                },
                Slot::Squeezing { mode, component, imag } => match ansatz.modes[*mode].components[*component] {
                    ComponentState::Squeezed { r, phi }
                    | ComponentState::SqueezedThermal { r, phi, .. }
                    | ComponentState::SqueezedFock { r, phi, .. } => part(C64::from_polar(r, phi), *imag),
                    _ => 0.0,
                },
                Slot::Bloch { spin, axis } => ansatz.spins[*spin].bloch[*axis as usize],
                Slot::Correlation { key, imag } => part(ansatz.correlation(key), *imag),
            })
            .collect()
    }

    /// Ansatz at `v`: `n₀ = u²`, `r = |ζ|`, `Φ = arg ζ`, Bloch vectors longer
    /// than one are scaled back onto the sphere.
    pub fn unpack(&self, v: &[f64]) -> Result<Ansatz, VariationalError> {
        if v.len() != self.slots.len() {
            return Err(VariationalError::ParameterLength { got: v.len(), expected: self.slots.len() });
        }
        let mut a = self.template.clone();
        let mut corr: BTreeMap<Monomial, C64> = BTreeMap::new();
        for (slot, &x) in self.slots.iter().zip(v) {
            match slot {
                Slot::Alpha { mode, component, which, imag } => {
                    match &mut a.modes[*mode].components[*component] {
                        ComponentState::Coherent { alpha } => set_part(alpha, x, *imag),
                        ComponentState::Cat { alpha1, alpha2, .. } => {
                            set_part(if *which == 0 { alpha1 } else { alpha2 }, x, *imag)
                        }
                        _ => unreachable!("schema built from this template"),
                    }
                }
                Slot::CatPhase { mode, component, imag } => {
                    if let ComponentState::Cat { theta, .. } = &mut a.modes[*mode].components[*component] {
                        set_part(theta, x, *imag);
                    }
                }
                Slot::Occupation { mode, component } => match &mut a.modes[*mode].components[*component] {
                    ComponentState::Thermal { n0 } | ComponentState::SqueezedThermal { n0, .. } => *n0 = x * x,
                    _ => unreachable!("schema built from this template"),
                },
                Slot::Squeezing { mode, component, imag } => match &mut a.modes[*mode].components[*component] {
                    ComponentState::Squeezed { r, phi }
                    | ComponentState::SqueezedThermal { r, phi, .. }
                    | ComponentState::SqueezedFock { r, phi, .. } => {
                        let mut z = C64::from_polar(*r, *phi);
                        set_part(&mut z, x, *imag);
                        *r = z.norm();
                        *phi = if *r == 0.0 { 0.0 } else { canonical_angle(z.arg()) };
                    }
                    _ => unreachable!("schema built from this template"),
                },
                Slot::Bloch { spin, axis } => a.spins[*spin].bloch[*axis as usize] = x,
                Slot::Correlation { key, imag } => set_part(corr.entry(key.clone()).or_insert(C64::zero()), x, *imag),
            }
        }
        for s in &mut a.spins {
            let len = s.bloch.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len > 1.0 {
                s.bloch.iter_mut().for_each(|x| *x /= len);
            }
        }
        for (key, value) in corr {
            a.set_correlation(&key, value)?;
        }
        a.validate()?;
        Ok(a)
    }

    /// Projects `v` onto the canonical domain: `u >= 0`, Bloch vectors in the unit ball.
    pub fn canonicalize(&self, v: &[f64]) -> Result<Vec<f64>, VariationalError> {
        let mut out = self.pack(&self.unpack(v)?);
        // `Φ` wraps and `r = 0` forgets Φ; keep the input `ζ` coordinates.
        for (i, slot) in self.slots.iter().enumerate() {
            if matches!(slot, Slot::Squeezing { .. }) {
                out[i] = v[i];
            }
        }
        Ok(out)
    }
}

fn canonical_angle(phi: f64) -> f64 {
    let tau = core::f64::consts::TAU;
    let x = phi - tau * (phi / tau).floor();
    if x >= tau {
        0.0
    } else {
        x
    }
}

fn part(z: C64, imag: bool) -> f64 {
    if imag {
        z.im
    } else {
        z.re
    }
}

fn set_part(z: &mut C64, x: f64, imag: bool) {
    if imag {
        z.im = x;
    } else {
        z.re = x;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NelderMeadOptions {
    pub max_evaluations: usize,
    /// Stop when the mean vertex value improved by less than `stall_tolerance`
    /// over this many iterations.
    pub stall_iterations: usize,
    pub stall_tolerance: f64,
    /// Fresh simplices built around the best point after a stall; the step
    /// scale halves after a round without improvement.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_evaluations: 20_000, stall_iterations: 50, stall_tolerance: 1e-12, restarts: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Derivative-free simplex descent with dimension-adaptive coefficients.
/// Non-finite objective values are treated as `+∞`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], steps: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult {
    let n = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], evaluations: &mut usize| -> f64 {
        *evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0, &mut evaluations);
    if n == 0 {
        return NelderMeadResult { x: best_x, value: best_f, evaluations, converged: true };
    }
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut converged = false;
    let mut scale = 1.0;
    for _round in 0..=opts.restarts {
        let round_start = best_f;
        let mut simplex: Vec<(Vec<f64>, f64)> = vec![(best_x.clone(), best_f)];
        for i in 0..n {
            let mut x = best_x.clone();
            x[i] += steps[i] * scale;
            let v = eval(&x, &mut evaluations);
            simplex.push((x, v));
        }
        let mut history: Vec<f64> = Vec::new();
        converged = false;
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            // The best vertex can sit still for many iterations while the rest of
            // an ill-conditioned simplex is still contracting, so stall on the mean.
            history.push(simplex.iter().map(|v| v.1).sum::<f64>() / (nf + 1.0));
            if simplex[0].1 == 0.0 {
                converged = true;
                break;
            }
            let it = history.len() - 1;
            if it >= opts.stall_iterations && history[it - opts.stall_iterations] - history[it] < opts.stall_tolerance {
                converged = true;
                break;
            }
            let spread = simplex.iter().skip(1).fold(0.0f64, |m, (x, _)| {
                m.max(x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            });
            if spread <= 1e-15 * (1.0 + simplex[0].0.iter().fold(0.0f64, |m, x| m.max(x.abs()))) {
                converged = true;
                break;
            }
            if evaluations >= opts.max_evaluations {
                break;
            }
            let worst = simplex[n].clone();
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / nf;
                }
            }
            let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };
            let xr = along(alpha);
            let fr = eval(&xr, &mut evaluations);
            if fr < simplex[0].1 {
                let xe = along(alpha * beta);
                let fe = eval(&xe, &mut evaluations);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < worst.1 {
                let xc = along(alpha * gamma);
                let fc = eval(&xc, &mut evaluations);
                (xc, fc)
            } else {
                let xc = along(-gamma);
                let fc = eval(&xc, &mut evaluations);
                (xc, fc)
            };
            if fc < fr.min(worst.1) {
                simplex[n] = (xc, fc);
                continue;
            }
            let anchor = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let x: Vec<f64> = anchor.iter().zip(&vertex.0).map(|(a, v)| a + delta * (v - a)).collect();
                let v = eval(&x, &mut evaluations);
                *vertex = (x, v);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < best_f {
            best_x = simplex[0].0.clone();
            best_f = simplex[0].1;
        }
        if evaluations >= opts.max_evaluations || best_f == 0.0 {
            break;
        }
        // A round that went nowhere started too coarse; one that moved gets a
        // fresh, non-degenerate simplex at the same scale.
        if round_start - best_f < opts.stall_tolerance {
            scale *= 0.5;
        }
    }
    NelderMeadResult { x: best_x, value: best_f, evaluations, converged }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MinimizeOptions {
    pub starts: usize,
    pub seed: u64,
    pub weights: WeightScheme,
    pub simplex: NelderMeadOptions,
    /// Relative spread of random start points around the template.
    pub start_spread: f64,
    /// Smallest initial simplex edge.
    pub min_step: f64,
    pub moments: MomentOptions,
    /// Restart minima within this factor of the best are reported as branches.
    pub branch_factor: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            starts: 16,
            seed: 0,
            weights: WeightScheme::Adaptive,
            simplex: NelderMeadOptions::default(),
            start_spread: 0.5,
            min_step: 0.1,
            moments: MomentOptions::default(),
            branch_factor: 10.0,
        }
    }
}

/// Template ansatz plus the correlation keys to vary.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzTemplate {
    pub base: Ansatz,
    pub correlation_keys: Vec<Monomial>,
}

impl AnsatzTemplate {
    pub fn new(base: Ansatz) -> Self {
        Self { base, correlation_keys: Vec::new() }
    }
}

/// A compiled minimization problem; each start is independent.
#[derive(Debug, Clone)]
pub struct Problem {
    system: CompiledSystem,
    schema: ParameterSchema,
    options: MinimizeOptions,
    x0: Vec<f64>,
    /// Coordinates the simplex moves; the rest keep their start value.
    free: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartResult {
    pub start: usize,
    pub params: Vec<f64>,
    pub ansatz: Ansatz,
    pub report: CostReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    /// Every start, sorted by `D` and then by start index.
    pub starts: Vec<StartResult>,
    /// Indices into `starts` of minima within `branch_factor` of the best.
    pub branches: Vec<usize>,
}

impl MinimizeResult {
    /// Order-independent aggregation of per-start results.
    pub fn aggregate(mut starts: Vec<StartResult>, branch_factor: f64) -> Self {
        starts.sort_by(|a, b| a.report.total.total_cmp(&b.report.total).then(a.start.cmp(&b.start)));
        let best = starts.first().map(|s| s.report.total).unwrap_or(f64::INFINITY);
        let branches = starts
            .iter()
            .enumerate()
            .filter(|(_, s)| s.report.total <= best * branch_factor || s.report.total == best)
            .map(|(i, _)| i)
            .collect();
        Self { starts, branches }
    }

    pub fn best(&self) -> &StartResult {
        &self.starts[0]
    }
}

impl Problem {
    pub fn new(model: &ModelSpec, keys: &[Monomial], template: &AnsatzTemplate, options: MinimizeOptions) -> Result<Self, VariationalError> {
        let system = CompiledSystem::from_model(model, keys)?;
        let schema = ParameterSchema::new(&template.base, &template.correlation_keys)?;
        let x0 = schema.pack(&template.base);
        let free = (0..x0.len()).collect();
        let problem = Self { system, schema, options, x0, free };
        // Surfaces closure failures before any search.
        problem.system.cost(&template.base, &options.weights, &options.moments)?;
        Ok(problem)
    }

    pub fn schema(&self) -> &ParameterSchema {
        &self.schema
    }

    /// Holds the listed slots at their start values.
    pub fn freeze(mut self, slots: &[Slot]) -> Result<Self, VariationalError> {
        for slot in slots {
            if !self.schema.slots.contains(slot) {
                return Err(VariationalError::InvalidSlot(format!("{slot:?} is not a parameter of the template")));
            }
        }
        self.free = (0..self.schema.len()).filter(|&i| !slots.contains(&self.schema.slots[i])).collect();
        if self.free.is_empty() {
            return Err(VariationalError::NoFreeParameters);
        }
        Ok(self)
    }

    pub fn free_slots(&self) -> impl Iterator<Item = &Slot> + '_ {
        self.free.iter().map(|&i| &self.schema.slots[i])
    }

    pub fn system(&self) -> &CompiledSystem {
        &self.system
    }

    pub fn options(&self) -> &MinimizeOptions {
        &self.options
    }

    /// `D` at `v`; `+∞` where `v` does not describe a valid ansatz.
    pub fn objective(&self, v: &[f64]) -> f64 {
        match self.schema.unpack(v) {
            Ok(a) => self.system.cost(&a, &self.options.weights, &self.options.moments).map_or(f64::INFINITY, |r| r.total),
            Err(_) => f64::INFINITY,
        }
    }

    /// Initial point of start `index`: the template for index 0, otherwise a
    /// seeded uniform perturbation of it.
    pub fn start_point(&self, index: usize) -> Vec<f64> {
        if index == 0 {
            return self.x0.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.options.seed);
        rng.set_stream(index as u64);
        let mut raw = self.x0.clone();
        for &i in &self.free {
            let x = raw[i];
            raw[i] = x + self.options.start_spread * x.abs().max(1.0) * rng.random_range(-1.0..=1.0);
        }
        self.schema.canonicalize(&raw).unwrap_or_else(|_| self.x0.clone())
    }

    pub fn run_start(&self, index: usize) -> Result<StartResult, VariationalError> {
        self.run_from(index, &self.start_point(index))
    }

    /// Simplex descent from an explicit point (warm starts).
    pub fn run_from(&self, index: usize, x0: &[f64]) -> Result<StartResult, VariationalError> {
        if x0.len() != self.schema.len() {
            return Err(VariationalError::ParameterLength { got: x0.len(), expected: self.schema.len() });
        }
        let embed = |y: &[f64]| {
            let mut x = x0.to_vec();
            for (&i, &v) in self.free.iter().zip(y) {
                x[i] = v;
            }
            x
        };
        let y0: Vec<f64> = self.free.iter().map(|&i| x0[i]).collect();
        let steps: Vec<f64> = y0.iter().map(|x| (0.1 * x.abs()).max(self.options.min_step)).collect();
        let nm = nelder_mead(|y| self.objective(&embed(y)), &y0, &steps, &self.options.simplex);
        let params = self.schema.canonicalize(&embed(&nm.x))?;
        let ansatz = self.schema.unpack(&params)?;
        let mut report = self.system.cost(&ansatz, &self.options.weights, &self.options.moments)?;
        report.evaluations = nm.evaluations;
        report.converged = nm.converged;
        Ok(StartResult { start: index, params, ansatz, report })
    }

    pub fn run_all(&self) -> Result<MinimizeResult, VariationalError> {
        let starts = (0..self.options.starts.max(1)).map(|i| self.run_start(i)).collect::<Result<Vec<_>, _>>()?;
        Ok(MinimizeResult::aggregate(starts, self.options.branch_factor))
    }
}

/// Multi-start minimization of `D` over the template's free parameters.
pub fn minimize(
    model: &ModelSpec,
    keys: &[Monomial],
    template: &AnsatzTemplate,
    options: MinimizeOptions,
) -> Result<MinimizeResult, VariationalError> {
    Problem::new(model, keys, template, options)?.run_all()
}

/// One real fixed point of the mean-field equations
/// `ȧ = −(κ+iΔc)a − igσ⁻ − ip`, `σ̇⁻ = −(γ/2+iΔa)σ⁻ + ig a σᶻ`,
/// `σ̇ᶻ = −γ(σᶻ+1) + 2ig(a*σ⁻ − aσ⁺)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MbFixedPoint {
    pub a: C64,
    pub sigma_minus: C64,
    pub sigma_z: f64,
}

impl MbFixedPoint {
    pub fn intensity(&self) -> f64 {
        self.a.norm_sqr()
    }

    /// Coherent ⊗ Bloch product ansatz with these first moments.
    pub fn ansatz(&self) -> Ansatz {
        let spin = SpinAnsatz::from_expectations(self.sigma_minus, self.sigma_z);
        let len = spin.bloch.iter().map(|x| x * x).sum::<f64>().sqrt();
        let spin = if len > 1.0 { SpinAnsatz { bloch: spin.bloch.map(|x| x / len) } } else { spin };
        let mut a = Ansatz::vacuum(1, 1);
        a.modes[0].components[0] = ComponentState::coherent(self.a);
        a.spins[0] = spin;
        a
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MbSweepPoint {
    pub p: f64,
    /// Ascending in intensity.
    pub fixed_points: Vec<MbFixedPoint>,
}

impl MbSweepPoint {
    pub fn multistable(&self) -> bool {
        self.fixed_points.len() >= 3
    }
}

/// All real fixed points per drive. With `u = 1 + x/n_s`, `x = |a|²`,
/// `n_s = |A|²/(2g²)`, `A = γ/2 + iΔa`, `c = κ + iΔc`, `d = g²/A`, one has
/// `σᶻ = −1/u` and `x |c u + d|² = p² u²`, a cubic in `x`.
pub fn maxwell_bloch_fixed_points(params: &JcParams, p_sweep: &[f64]) -> Vec<MbSweepPoint> {
    p_sweep.iter().map(|&p| MbSweepPoint { p, fixed_points: mb_at(params, p) }).collect()
}

fn mb_at(params: &JcParams, p: f64) -> Vec<MbFixedPoint> {
    let c = C64::new(params.kappa, params.delta_c);
    let big_a = C64::new(params.gamma / 2.0, params.delta_a);
    if params.g == 0.0 {
        if c == C64::zero() {
            return Vec::new();
        }
        return vec![MbFixedPoint { a: -I * p / c, sigma_minus: C64::zero(), sigma_z: -1.0 }];
    }
    if params.gamma == 0.0 || big_a == C64::zero() {
        return Vec::new();
    }
    let g2 = params.g * params.g;
    let ns = big_a.norm_sqr() / (2.0 * g2);
    let d = g2 / big_a;
    let c2 = c.norm_sqr();
    let cross = 2.0 * (c * d.conj()).re;
    let p2 = p * p;
    let roots = real_cubic_roots(
        c2 / (ns * ns),
        2.0 * c2 / ns + cross / ns - p2 / (ns * ns),
        c2 + cross + d.norm_sqr() - 2.0 * p2 / ns,
        -p2,
    );
    let mut out: Vec<MbFixedPoint> = roots
        .into_iter()
        .filter(|&x| x >= -1e-12 * (1.0 + p2))
        .map(|x| {
            let u = 1.0 + x.max(0.0) / ns;
            let a = -I * p * u / (c * u + d);
            let z = -1.0 / u;
            let sigma_minus = I * params.g * a * z / big_a;
            MbFixedPoint { a, sigma_minus, sigma_z: z }
        })
        .collect();
    out.sort_by(|x, y| x.intensity().total_cmp(&y.intensity()));
    out.dedup_by(|x, y| (x.intensity() - y.intensity()).abs() <= 1e-12 * (1.0 + y.intensity()));
    out
}

/// Drive interval spanned by sweep points with three fixed points.
pub fn bistable_window(sweep: &[MbSweepPoint]) -> Option<(f64, f64)> {
    let ps: Vec<f64> = sweep.iter().filter(|s| s.multistable()).map(|s| s.p).collect();
    Some((ps.iter().copied().fold(f64::INFINITY, f64::min), ps.iter().copied().fold(f64::NEG_INFINITY, f64::max)))
        .filter(|_| !ps.is_empty())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BranchChoice {
    pub p: f64,
    pub chosen: MbFixedPoint,
    /// `D` of the lower- and upper-intensity outer branches (equal when unique).
    pub norms: (f64, f64),
    pub upper: bool,
    /// Norms equal within `1e−12` relative; the lower branch was taken.
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BranchSelection {
    pub choices: Vec<BranchChoice>,
    /// Drives where the preferred branch switches, linearly interpolated in
    /// `D_low − D_high` between neighbouring multistable sweep points.
    pub crossings: Vec<f64>,
}

/// Chooses between the outer (stable) branches by the variational norm of the
/// coherent ⊗ Bloch ansatz pinned at each, with equations for every key of
/// total order `<= max_order`. Absolute weightings favour the dim branch at
/// every drive because residual magnitudes grow with the excitation;
/// `WeightScheme::Relative` compares the branches on equal footing.
pub fn branch_select(
    params: &JcParams,
    sweep: &[MbSweepPoint],
    max_order: u32,
    weights: WeightScheme,
) -> Result<BranchSelection, VariationalError> {
    let opts = MomentOptions::default();
    let mut choices = Vec::with_capacity(sweep.len());
    let mut diffs: Vec<Option<(f64, f64)>> = Vec::with_capacity(sweep.len());
    for point in sweep {
        let Some(low) = point.fixed_points.first() else { continue };
        let high = point.fixed_points.last().expect("nonempty");
        let model = jaynes_cummings(&JcParams { p: point.p, ..*params }).map_err(|e| VariationalError::InvalidSlot(format!("{e}")))?;
        let system = CompiledSystem::from_model(&model, &tracked_keys(model.space(), max_order))?;
        let d_low = system.cost(&low.ansatz(), &weights, &opts)?.total;
        let d_high = if point.fixed_points.len() > 1 { system.cost(&high.ansatz(), &weights, &opts)?.total } else { d_low };
        let tie = point.fixed_points.len() > 1 && (d_low - d_high).abs() <= 1e-12 * d_low.abs().max(d_high.abs());
        let upper = point.fixed_points.len() > 1 && !tie && d_high < d_low;
        choices.push(BranchChoice { p: point.p, chosen: if upper { *high } else { *low }, norms: (d_low, d_high), upper, tie });
        diffs.push(point.multistable().then_some((point.p, d_low - d_high)));
    }
    let mut crossings = Vec::new();
    for w in diffs.windows(2) {
        if let [Some((p0, f0)), Some((p1, f1))] = w {
            if (*f0 < 0.0) != (*f1 < 0.0) {
                crossings.push(p0 + (p1 - p0) * f0 / (f0 - f1));
            }
        }
    }
    Ok(BranchSelection { choices, crossings })
}
