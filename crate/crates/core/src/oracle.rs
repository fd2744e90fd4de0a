//! Exact reference: truncated-Fock operator matrices, the vectorized
//! Liouvillian, its steady state, and Fock-basis moments of component states.
//!
//! Vectorization is column stacking: `vec(ρ)[i + D·j] = ρ[i][j]`, so that
//! `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`. The Hilbert basis orders modes first and spins
//! last with the last factor varying fastest; spin level 0 is `|g⟩`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods are inherent once std is linked
use num_traits::Float;
use num_traits::Zero;

use crate::algebra::{IndexSpace, ModelSpec, Monomial, OperatorPolynomial, SpinOp};
use crate::error::OracleError;
use crate::moments::ComponentState;
use crate::numeric::{hermitian_eigen, BorderedBandSystem, C64};

pub const DEFAULT_DIMENSION_CAP: usize = 4096;
/// Largest top-level population tolerated before a cutoff warning.
pub const DEFAULT_BOUNDARY_LIMIT: f64 = 1e-6;

/// Fock cutoffs per mode (number of retained levels `0..cutoff`) and spin count.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TruncationSpec {
    cutoffs: Vec<usize>,
    spins: usize,
    cap: usize,
}

impl TruncationSpec {
    pub fn new(cutoffs: Vec<usize>, spins: usize) -> Result<Self, OracleError> {
        Self::with_cap(cutoffs, spins, DEFAULT_DIMENSION_CAP)
    }

    pub fn with_cap(cutoffs: Vec<usize>, spins: usize, cap: usize) -> Result<Self, OracleError> {
        if let Some(mode) = cutoffs.iter().position(|&c| c == 0) {
            return Err(OracleError::ZeroCutoff { mode });
        }
        let dim = cutoffs
            .iter()
            .copied()
            .chain(core::iter::repeat_n(2, spins))
            .try_fold(1usize, |acc, d| acc.checked_mul(d))
            .unwrap_or(usize::MAX);
        if dim > cap {
            return Err(OracleError::DimensionCap { dim, cap });
        }
        Ok(Self { cutoffs, spins, cap })
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn spins(&self) -> usize {
        self.spins
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn dim(&self) -> usize {
        self.factor_dims().iter().product()
    }

    pub fn space(&self) -> IndexSpace {
        IndexSpace::new(self.modes(), self.spins)
    }

    fn factor_dims(&self) -> Vec<usize> {
        self.cutoffs.iter().copied().chain(core::iter::repeat_n(2, self.spins)).collect()
    }

    /// Occupation digits (modes, then spin levels) of a basis index.
    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let dims = self.factor_dims();
        let mut digits = vec![0; dims.len()];
        for (slot, &d) in digits.iter_mut().zip(&dims).rev() {
            *slot = index % d;
            index /= d;
        }
        digits
    }

    pub fn encode(&self, digits: &[usize]) -> usize {
        self.factor_dims().iter().zip(digits).fold(0, |acc, (&d, &x)| acc * d + x)
    }
}

/// Compressed-row sparse complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, row_ptr: vec![0; nrows + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, C64::new(1.0, 0.0))).collect())
    }

    /// Duplicates are summed; exact zeros are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; nrows + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry exists") += v;
            } else {
                row_ptr[r + 1] += 1;
                cols.push(c);
                vals.push(v);
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { nrows, ncols, row_ptr, cols, vals }.pruned()
    }

    fn from_rows(ncols: usize, rows: Vec<Vec<(usize, C64)>>) -> Self {
        let nrows = rows.len();
        let triplets = rows
            .into_iter()
            .enumerate()
            .flat_map(|(r, entries)| entries.into_iter().map(move |(c, v)| (r, c, v)))
            .collect();
        Self::from_triplets(nrows, ncols, triplets)
    }

    fn pruned(self) -> Self {
        let mut row_ptr = vec![0; self.nrows + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[k] != C64::zero() {
                    cols.push(self.cols[k]);
                    vals.push(self.vals[k]);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        Self { nrows: self.nrows, ncols: self.ncols, row_ptr, cols, vals }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => C64::zero(),
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn matmul(&self, rhs: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.ncols, rhs.nrows);
        let mut triplets = Vec::new();
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in rhs.row(k) {
                    triplets.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.nrows, rhs.ncols, triplets)
    }

    pub fn adjoint(&self) -> SparseMatrix {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect())
    }

    pub fn scale(&self, s: C64) -> SparseMatrix {
        Self::from_triplets(self.nrows, self.ncols, self.triplets().map(|(r, c, v)| (r, c, v * s)).collect())
    }

    pub fn add(&self, rhs: &SparseMatrix) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        Self::from_triplets(self.nrows, self.ncols, self.triplets().chain(rhs.triplets()).collect())
    }

    pub fn to_dense(&self) -> DenseMatrix {
        assert_eq!(self.nrows, self.ncols, "dense conversion needs a square matrix");
        let mut out = DenseMatrix::zeros(self.nrows);
        for (r, c, v) in self.triplets() {
            out.data[r * self.nrows + c] += v;
        }
        out
    }
}

/// Square row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![C64::zero(); n * n] }
    }

    pub fn from_row_major(n: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.n + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.n + c] = v;
    }

    pub fn as_row_major(&self) -> &[C64] {
        &self.data
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Column-stacked vector.
    pub fn vectorize(&self) -> Vec<C64> {
        let n = self.n;
        (0..n * n).map(|k| self.get(k % n, k / n)).collect()
    }

    pub fn from_vectorized(n: usize, v: &[C64]) -> Self {
        assert_eq!(v.len(), n * n);
        let mut out = Self::zeros(n);
        for (k, &x) in v.iter().enumerate() {
            out.set(k % n, k / n, x);
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    /// `tr(self · op)`.
    pub fn trace_with(&self, op: &SparseMatrix) -> C64 {
        assert_eq!(op.nrows(), self.n);
        op.triplets().map(|(r, c, v)| v * self.get(c, r)).sum()
    }

    /// `tr(self · other)`.
    pub fn trace_product(&self, other: &DenseMatrix) -> C64 {
        let n = self.n;
        let mut acc = C64::zero();
        for r in 0..n {
            for c in 0..n {
                acc += self.get(r, c) * other.get(c, r);
            }
        }
        acc
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm: Vec<C64> = {
            let n = self.n;
            (0..n * n).map(|k| 0.5 * (self.data[k] + self.get(k % n, k / n).conj())).collect()
        };
        let (vals, _) = hermitian_eigen(&herm, self.n);
        vals.into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn purity(&self) -> f64 {
        self.trace_product(self).re
    }
}

/// Matrix of a normal-ordered monomial. Creation operators that would leave the
/// retained levels annihilate the state.
pub fn monomial_matrix(m: &Monomial, trunc: &TruncationSpec) -> Result<SparseMatrix, OracleError> {
    trunc.space().check_monomial(m)?;
    let dim = trunc.dim();
    let modes = trunc.modes();
    let mut triplets = Vec::with_capacity(dim);
    'columns: for col in 0..dim {
        let mut digits = trunc.decode(col);
        let mut amp = 1.0;
        for (mode, p, q) in m.boson.iter() {
            let n = digits[mode];
            if n < q as usize {
                continue 'columns;
            }
            let low = n - q as usize;
            let high = low + p as usize;
            if high >= trunc.cutoffs[mode] {
                continue 'columns;
            }
            amp *= ((low + 1)..=n).map(|k| (k as f64).sqrt()).product::<f64>();
            amp *= ((low + 1)..=high).map(|k| (k as f64).sqrt()).product::<f64>();
            digits[mode] = high;
        }
        for (site, op) in m.spin.iter() {
            let slot = &mut digits[modes + site];
            match (op, *slot) {
                (SpinOp::Raise, 0) => *slot = 1,
                (SpinOp::Lower, 1) => *slot = 0,
                (SpinOp::Z, s) => amp *= if s == 1 { 1.0 } else { -1.0 },
                _ => continue 'columns,
            }
        }
        triplets.push((trunc.encode(&digits), col, C64::new(amp, 0.0)));
    }
    Ok(SparseMatrix::from_triplets(dim, dim, triplets))
}

pub fn operator_matrix(poly: &OperatorPolynomial, trunc: &TruncationSpec) -> Result<SparseMatrix, OracleError> {
    let dim = trunc.dim();
    let mut triplets = Vec::new();
    for (m, &coef) in poly.terms() {
        let mat = monomial_matrix(m, trunc)?;
        triplets.extend(mat.triplets().map(|(r, c, v)| (r, c, v * coef)));
    }
    Ok(SparseMatrix::from_triplets(dim, dim, triplets))
}

/// Vectorized Lindblad generator together with its truncated ingredients.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    trunc: TruncationSpec,
    hamiltonian: SparseMatrix,
    jumps: Vec<SparseMatrix>,
    matrix: SparseMatrix,
}

/// `L = (1⊗G) + (Ḡ⊗1) + Σ c̄⊗c` with `G = −iH − ½ Σ c†c`, where each `c†c` is a
/// product of truncated matrices so that `tr L(ρ) = 0` holds exactly.
pub fn build_liouvillian(model: &ModelSpec, trunc: &TruncationSpec) -> Result<Liouvillian, OracleError> {
    let space = model.space();
    if space.modes != trunc.modes() || space.spins != trunc.spins() {
        return Err(OracleError::ModeCountMismatch {
            declared: trunc.modes() + trunc.spins(),
            model: space.modes + space.spins,
        });
    }
    let d = trunc.dim();
    let hamiltonian = operator_matrix(model.hamiltonian(), trunc)?;
    let jumps = model.jumps().iter().map(|c| operator_matrix(c, trunc)).collect::<Result<Vec<_>, _>>()?;
    let mut g = hamiltonian.scale(C64::new(0.0, -1.0));
    for c in &jumps {
        g = g.add(&c.adjoint().matmul(c).scale(C64::new(-0.5, 0.0)));
    }
    let n = d * d;
    let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); n];
    for j in 0..d {
        for i in 0..d {
            let row = &mut rows[i + d * j];
            row.extend(g.row(i).map(|(m, v)| (m + d * j, v)));
            row.extend(g.row(j).map(|(m, v)| (i + d * m, v.conj())));
            for c in &jumps {
                for (m, ci) in c.row(i) {
                    row.extend(c.row(j).map(|(nn, cj)| (m + d * nn, ci * cj.conj())));
                }
            }
        }
    }
    let matrix = SparseMatrix::from_rows(n, rows);
    Ok(Liouvillian { trunc: trunc.clone(), hamiltonian, jumps, matrix })
}

impl Liouvillian {
    pub fn truncation(&self) -> &TruncationSpec {
        &self.trunc
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn hamiltonian(&self) -> &SparseMatrix {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[SparseMatrix] {
        &self.jumps
    }

    /// `L(ρ)` through the vectorized superoperator.
    pub fn apply(&self, rho: &DenseMatrix) -> DenseMatrix {
        let d = self.trunc.dim();
        DenseMatrix::from_vectorized(d, &self.matrix.mul_vec(&rho.vectorize()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SteadyStateOptions {
    /// Escalate a cutoff warning to [`OracleError::CutoffTooSmall`].
    pub strict: bool,
    pub boundary_limit: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self { strict: false, boundary_limit: DEFAULT_BOUNDARY_LIMIT }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyStateResult {
    trunc: TruncationSpec,
    rho: DenseMatrix,
    residual: f64,
    boundary_population: Vec<f64>,
    cutoff_warning: bool,
}

/// Normal-ordered trace and whether the key reaches into the upper half of
/// some mode's retained levels.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExactMoment {
    pub value: C64,
    pub truncation_warning: bool,
}

/// Null vector of `L` with unit trace. Unknowns are taken in reversed
/// column-stacked order so that `ρ[0][0]` is eliminated last; its own equation
/// is replaced by the trace functional (the diagonal equations are linearly
/// dependent since `tr L(ρ) = 0`). The band block is then regular whenever the
/// steady state is unique and has nonzero vacuum weight.
pub fn steady_state(l: &Liouvillian, opts: &SteadyStateOptions) -> Result<SteadyStateResult, OracleError> {
    let d = l.trunc.dim();
    let n = d * d;
    let flip = |k: usize| n - 1 - k;
    let mut system = BorderedBandSystem::new(n);
    for r in 1..n {
        for (c, v) in l.matrix.row(r) {
            system.add(flip(r), flip(c), v);
        }
    }
    let mut trace_row = vec![C64::zero(); n];
    for i in 0..d {
        trace_row[flip(i + d * i)] = C64::new(1.0, 0.0);
    }
    system.set_last_row(trace_row);
    let mut rhs = vec![C64::zero(); n];
    rhs[n - 1] = C64::new(1.0, 0.0);
    let mut x = system
        .solve(&rhs)
        .map_err(|e| OracleError::Degenerate { column: flip(e.column), magnitude: e.magnitude })?;
    x.reverse();

    let raw = DenseMatrix::from_vectorized(d, &x);
    let mut rho = DenseMatrix::zeros(d);
    for r in 0..d {
        for c in 0..d {
            rho.set(r, c, 0.5 * (raw.get(r, c) + raw.get(c, r).conj()));
        }
    }
    let tr = rho.trace().re;
    for v in rho.data.iter_mut() {
        *v /= tr;
    }
    let residual = l.matrix.mul_vec(&rho.vectorize()).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();

    let mut boundary_population = vec![0.0; l.trunc.modes()];
    for i in 0..d {
        let digits = l.trunc.decode(i);
        for (mode, pop) in boundary_population.iter_mut().enumerate() {
            if digits[mode] + 1 == l.trunc.cutoffs[mode] {
                *pop += rho.get(i, i).re;
            }
        }
    }
    let worst = boundary_population.iter().enumerate().fold((0, 0.0f64), |acc, (m, &p)| if p > acc.1 { (m, p) } else { acc });
    let cutoff_warning = worst.1 > opts.boundary_limit;
    if cutoff_warning && opts.strict {
        return Err(OracleError::CutoffTooSmall { mode: worst.0, population: worst.1, limit: opts.boundary_limit });
    }
    Ok(SteadyStateResult { trunc: l.trunc.clone(), rho, residual, boundary_population, cutoff_warning })
}

impl SteadyStateResult {
    pub fn density_matrix(&self) -> &DenseMatrix {
        &self.rho
    }

    pub fn truncation(&self) -> &TruncationSpec {
        &self.trunc
    }

    /// `‖L vec(ρ)‖₂` after normalization and symmetrization.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Total weight on the top retained level of each mode.
    pub fn boundary_population(&self) -> &[f64] {
        &self.boundary_population
    }

    pub fn cutoff_warning(&self) -> bool {
        self.cutoff_warning
    }

    pub fn exact_moment(&self, key: &Monomial) -> Result<ExactMoment, OracleError> {
        if key.is_identity() {
            return Ok(ExactMoment { value: C64::new(1.0, 0.0), truncation_warning: false });
        }
        let op = monomial_matrix(key, &self.trunc)?;
        let truncation_warning = key.boson.iter().any(|(mode, p, q)| 2 * p.max(q) as usize > self.trunc.cutoffs[mode]);
        Ok(ExactMoment { value: self.rho.trace_with(&op), truncation_warning })
    }

    pub fn expectation(&self, poly: &OperatorPolynomial) -> Result<C64, OracleError> {
        Ok(self.rho.trace_with(&operator_matrix(poly, &self.trunc)?))
    }
}

/// A single-mode state as a weighted ensemble of Fock-basis vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FockMixture {
    cutoff: usize,
    members: Vec<(f64, Vec<C64>)>,
}

/// `S(ζ)|l⟩` on levels `0..cutoff`. The truncated generator reflects at its
/// top level, so the propagation runs on twice as many levels before cutting.
fn squeezed_vector(l: usize, cutoff: usize, r: f64, phi: f64) -> Vec<C64> {
    let mut v = basis_vector(l, 2 * cutoff + 2);
    apply_squeeze(&mut v, r, phi);
    v.truncate(cutoff);
    v
}

/// Squeeze `psi` in place: `S(ζ)ψ` with `S(ζ) = exp(½(ζ* a² − ζ a†²))`, by
/// Taylor-stepped propagation of the truncated generator.
fn apply_squeeze(psi: &mut Vec<C64>, r: f64, phi: f64) {
    if r == 0.0 {
        return;
    }
    let len = psi.len();
    let zeta = C64::from_polar(r, phi);
    let generator = |v: &[C64]| -> Vec<C64> {
        let mut out = vec![C64::zero(); len];
        for (n, &x) in v.iter().enumerate() {
            if x == C64::zero() {
                continue;
            }
            if n >= 2 {
                out[n - 2] += 0.5 * zeta.conj() * x * ((n * (n - 1)) as f64).sqrt();
            }
            if n + 2 < len {
                out[n + 2] -= 0.5 * zeta * x * (((n + 1) * (n + 2)) as f64).sqrt();
            }
        }
        out
    };
    let norm_bound = r * len as f64;
    let steps = (norm_bound / 0.5).ceil().max(1.0) as usize;
    let dt = 1.0 / steps as f64;
    for _ in 0..steps {
        let mut term = psi.clone();
        let mut acc = psi.clone();
        for k in 1..60 {
            term = generator(&term);
            let scale = dt / k as f64;
            let mut size = 0.0f64;
            for (t, a) in term.iter_mut().zip(acc.iter_mut()) {
                *t *= scale;
                *a += *t;
                size = size.max(t.norm());
            }
            if size < 1e-18 {
                break;
            }
        }
        *psi = acc;
    }
}

fn coherent_vector(alpha: C64, cutoff: usize) -> Vec<C64> {
    let mut v = Vec::with_capacity(cutoff);
    let mut amp = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..cutoff {
        v.push(amp);
        amp = amp * alpha / ((n + 1) as f64).sqrt();
    }
    v
}

fn basis_vector(l: usize, cutoff: usize) -> Vec<C64> {
    let mut v = vec![C64::zero(); cutoff];
    v[l] = C64::new(1.0, 0.0);
    v
}

fn thermal_weights(n0: f64, cutoff: usize) -> Vec<f64> {
    let ratio = n0 / (1.0 + n0);
    (0..cutoff).map(|k| ratio.powi(k as i32) / (1.0 + n0)).collect()
}

/// Fock-basis construction of a component state on levels `0..cutoff`,
/// independent of the closed-form moment formulas.
pub fn fock_mixture(state: &ComponentState, cutoff: usize) -> Result<FockMixture, OracleError> {
    if cutoff == 0 {
        return Err(OracleError::ZeroCutoff { mode: 0 });
    }
    let need = |l: u32| -> Result<(), OracleError> {
        if l as usize >= cutoff {
            Err(OracleError::CutoffTooSmall { mode: 0, population: 1.0, limit: 0.0 })
        } else {
            Ok(())
        }
    };
    let members = match *state {
        ComponentState::Coherent { alpha } => vec![(1.0, coherent_vector(alpha, cutoff))],
        ComponentState::Thermal { n0 } => thermal_weights(n0, cutoff)
            .into_iter()
            .enumerate()
            .map(|(k, w)| (w, basis_vector(k, cutoff)))
            .collect(),
        ComponentState::Fock { l } => {
            need(l)?;
            vec![(1.0, basis_vector(l as usize, cutoff))]
        }
        ComponentState::Squeezed { r, phi } => {
            vec![(1.0, squeezed_vector(0, cutoff, r, phi))]
        }
        ComponentState::SqueezedFock { l, r, phi } => {
            need(l)?;
            vec![(1.0, squeezed_vector(l as usize, cutoff, r, phi))]
        }
        ComponentState::SqueezedThermal { n0, r, phi } => thermal_weights(n0, cutoff)
            .into_iter()
            .enumerate()
            .filter(|&(_, w)| w > 1e-18)
            .map(|(k, w)| (w, squeezed_vector(k, cutoff, r, phi)))
            .collect(),
        ComponentState::Cat { alpha1, alpha2, theta } => {
            let mut v: Vec<C64> = coherent_vector(alpha1, cutoff)
                .into_iter()
                .zip(coherent_vector(alpha2, cutoff))
                .map(|(x, y)| x + theta * y)
                .collect();
            let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            vec![(1.0, v)]
        }
    };
    Ok(FockMixture { cutoff, members })
}

fn lower(v: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::zero(); v.len()];
    for n in 1..v.len() {
        out[n - 1] = v[n] * (n as f64).sqrt();
    }
    out
}

fn inner(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

impl FockMixture {
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn trace(&self) -> f64 {
        self.members.iter().map(|(w, v)| w * inner(v, v).re).sum()
    }

    /// Weight on the top two levels; squeezed states occupy only one parity,
    /// so the top level alone can read zero while the other carries weight.
    pub fn boundary_population(&self) -> f64 {
        let top = self.cutoff.saturating_sub(2);
        self.members.iter().map(|(w, v)| w * v[top..].iter().map(|x| x.norm_sqr()).sum::<f64>()).sum()
    }

    /// `Σ w ⟨a^p ψ, a^q ψ⟩`; only lowering operators act, so no level is lost.
    pub fn moment(&self, p: u32, q: u32) -> C64 {
        self.members
            .iter()
            .map(|(w, v)| {
                let left = (0..p).fold(v.clone(), |acc, _| lower(&acc));
                let right = (0..q).fold(v.clone(), |acc, _| lower(&acc));
                inner(&left, &right) * *w
            })
            .sum()
    }

    pub fn density_matrix(&self) -> DenseMatrix {
        let n = self.cutoff;
        let mut rho = DenseMatrix::zeros(n);
        for (w, v) in &self.members {
            for r in 0..n {
                for c in 0..n {
                    rho.data[r * n + c] += v[r] * v[c].conj() * *w;
                }
            }
        }
        rho
    }
}

/// Lowering by `a + b` on a two-mode vector indexed `n_a·len_b + n_b`.
fn lower_sum(v: &[C64], len_b: usize) -> Vec<C64> {
    let mut out = vec![C64::zero(); v.len()];
    for (k, &x) in v.iter().enumerate() {
        if x == C64::zero() {
            continue;
        }
        let (na, nb) = (k / len_b, k % len_b);
        if na > 0 {
            out[k - len_b] += x * (na as f64).sqrt();
        }
        if nb > 0 {
            out[k - 1] += x * (nb as f64).sqrt();
        }
    }
    out
}

/// Moment of the convolved P distribution as `⟨(a+b)†^p (a+b)^q⟩` in the
/// product state of the two mixtures.
pub fn convolved_mixture_moment(x: &FockMixture, y: &FockMixture, p: u32, q: u32) -> C64 {
    let mut acc = C64::zero();
    for (wx, vx) in &x.members {
        for (wy, vy) in &y.members {
            let w = wx * wy;
            if w < 1e-300 {
                continue;
            }
            let product: Vec<C64> = vx.iter().flat_map(|a| vy.iter().map(move |b| a * b)).collect();
            let left = (0..p).fold(product.clone(), |acc, _| lower_sum(&acc, y.cutoff));
            let right = (0..q).fold(product, |acc, _| lower_sum(&acc, y.cutoff));
            acc += inner(&left, &right) * w;
        }
    }
    acc
}
