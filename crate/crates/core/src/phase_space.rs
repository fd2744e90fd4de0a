//! Quasiprobability grids reconstructed from normal-ordered moments through the
//! truncated characteristic function `χ_N(z) = ⟨e^{z a†} e^{−z* a}⟩`.
//!
//! Both grids come from one damped Fourier inversion
//! `F(α) = π⁻² ∫ d²z e^{αz* − α*z} χ_N(z) e^{−s|z|²}`:
//! `s = σ²` gives the σ-smoothed P distribution, `s = ½ + σ²` the Wigner function
//! smoothed the same way.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

#[allow(unused_imports)] // float methods are inherent once std is linked
use num_traits::Float;
use num_traits::Zero;

use crate::algebra::Monomial;
use crate::error::PhaseSpaceError;
use crate::moments::{ComponentState, MomentOptions, MomentTable};
use crate::numeric::{factorial, C64};

/// Default truncation order cap.
pub const DEFAULT_MAX_ORDER: u32 = 16;
/// Default regularization width for states whose P is not a smooth function.
pub const DEFAULT_SIGMA_REG: f64 = 0.15;
/// Window cap for P inversion, where only `e^{−σ²|z|²}` damps the series.
pub const P_WINDOW_CAP: f64 = 4.0;
/// Window cap for Wigner inversion; `e^{−|z|²/2}` kills the tail well before this.
pub const W_WINDOW_CAP: f64 = 8.0;
/// `|χ_N| <= e^{|z|²/2}` for any state, so exceeding it by this factor means the
/// truncated series no longer represents a state.
const OVERFLOW_FACTOR: f64 = 1e3;
const TAIL_TOLERANCE: f64 = 1e-8;
const RIM_ANGLES: usize = 48;

/// Normal-ordered moments `⟨a†^k a^l⟩` of one mode.
pub trait MomentSource {
    fn moment(&self, k: u32, l: u32) -> Option<C64>;
}

impl MomentSource for MomentTable {
    fn moment(&self, k: u32, l: u32) -> Option<C64> {
        self.try_get(k, l)
    }
}

/// Keys are single-mode monomials on mode 0; a key stored only as its adjoint
/// is found by conjugation.
impl MomentSource for BTreeMap<Monomial, C64> {
    fn moment(&self, k: u32, l: u32) -> Option<C64> {
        if k == 0 && l == 0 {
            return Some(self.get(&Monomial::identity()).copied().unwrap_or(C64::new(1.0, 0.0)));
        }
        let key = Monomial::boson(0, k, l);
        self.get(&key).copied().or_else(|| self.get(&key.adjoint()).map(|v| v.conj()))
    }
}

/// Keyed by `(k, l)`; `(0, 0)` defaults to the normalization 1.
impl MomentSource for BTreeMap<(u32, u32), C64> {
    fn moment(&self, k: u32, l: u32) -> Option<C64> {
        if k == 0 && l == 0 && !self.contains_key(&(0, 0)) {
            return Some(C64::new(1.0, 0.0));
        }
        self.get(&(k, l)).copied().or_else(|| self.get(&(l, k)).map(|v| v.conj()))
    }
}

/// `χ_N` truncated at `k, l <= order`, stored as `⟨a†^k a^l⟩ / (k! l!)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicSeries {
    order: u32,
    coeffs: Vec<C64>,
    scale: f64,
}

impl CharacteristicSeries {
    pub fn new(moments: &impl MomentSource, order: u32) -> Result<Self, PhaseSpaceError> {
        let n = order as usize + 1;
        let mut coeffs = vec![C64::zero(); n * n];
        let mut scale: f64 = 0.0;
        for k in 0..=order {
            for l in 0..=order {
                let m = moments.moment(k, l).ok_or(PhaseSpaceError::MissingMoment { k, l })?;
                if k + l > 0 && m.norm() > 0.0 {
                    scale = scale.max(m.norm().powf(1.0 / f64::from(k + l)));
                }
                coeffs[k as usize * n + l as usize] = m / (factorial(k) * factorial(l));
            }
        }
        Ok(Self { order, coeffs, scale })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// `max_{k+l>=1} |⟨a†^k a^l⟩|^{1/(k+l)}`, the amplitude scale of the moments.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.eval_order(z, self.order)
    }

    /// The series cut at `k, l <= m` (`m <= order`).
    pub fn eval_order(&self, z: C64, m: u32) -> C64 {
        let n = self.order as usize + 1;
        let m = m.min(self.order) as usize + 1;
        let w = -z.conj();
        let mut acc = C64::zero();
        let mut zk = C64::new(1.0, 0.0);
        for k in 0..m {
            let row = &self.coeffs[k * n..k * n + m];
            let mut inner = C64::zero();
            for c in row.iter().rev() {
                inner = inner * w + c;
            }
            acc += zk * inner;
            zk *= z;
        }
        acc
    }

    /// `min(cap, M / (2·scale))`, the cap alone when the moments carry no scale,
    /// then shrunk until the top shell `max(k, l) = M` of the series, damped by
    /// `e^{−s|z|²}`, stays below `TAIL_TOLERANCE` on the rim.
    pub fn default_window(&self, cap: f64, damping: f64) -> f64 {
        let mut radius = if self.scale > 0.0 && self.order > 0 { cap.min(f64::from(self.order) / (2.0 * self.scale)) } else { cap };
        if self.order == 0 {
            return radius;
        }
        for _ in 0..200 {
            let tail = (0..RIM_ANGLES)
                .map(|i| {
                    let z = C64::from_polar(radius, 2.0 * PI * i as f64 / RIM_ANGLES as f64);
                    (self.eval(z) - self.eval_order(z, self.order - 1)).norm()
                })
                .fold(0.0, f64::max);
            if tail * (-damping * radius * radius).exp() <= TAIL_TOLERANCE {
                break;
            }
            radius *= 0.97;
        }
        radius
    }
}

/// Truncated normal-ordered characteristic function at `z`.
pub fn char_fn(moments: &impl MomentSource, order: u32, z: C64) -> Result<C64, PhaseSpaceError> {
    Ok(CharacteristicSeries::new(moments, order)?.eval(z))
}

/// Square output grid `[−extent, extent]²` in α, plus the z-window of the inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct GridSpec {
    pub extent: f64,
    pub points: usize,
    /// Radius of the z disk; `None` applies the moment-scale rule with a
    /// series-convergence guard.
    pub window: Option<f64>,
    /// Nodes per z axis; `None` picks a spacing that neither aliases the α grid
    /// nor undersamples χ.
    pub window_points: Option<usize>,
}

impl GridSpec {
    pub fn new(extent: f64, points: usize) -> Self {
        Self { extent, points, window: None, window_points: None }
    }

    pub fn with_window(mut self, radius: f64) -> Self {
        self.window = Some(radius);
        self
    }

    pub fn with_window_points(mut self, points: usize) -> Self {
        self.window_points = Some(points);
        self
    }

    pub fn validate(&self) -> Result<(), PhaseSpaceError> {
        if !(self.extent.is_finite() && self.extent > 0.0) {
            return Err(PhaseSpaceError::InvalidGrid(format!("extent must be positive, got {}", self.extent)));
        }
        if self.points < 2 {
            return Err(PhaseSpaceError::InvalidGrid(format!("need at least 2 points per axis, got {}", self.points)));
        }
        if let Some(r) = self.window {
            if !(r.is_finite() && r > 0.0) {
                return Err(PhaseSpaceError::InvalidGrid(format!("window radius must be positive, got {r}")));
            }
        }
        if matches!(self.window_points, Some(n) if n < 3) {
            return Err(PhaseSpaceError::InvalidGrid(String::from("need at least 3 window points")));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / (self.points - 1) as f64
    }

    pub fn axis(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points).map(|i| -self.extent + h * i as f64).collect()
    }

    fn window_nodes(&self, radius: f64) -> usize {
        self.window_points.unwrap_or_else(|| {
            // The inversion is periodic in α with period π/h.
            let h = 0.1f64.min(PI / (2.0 * (self.extent + 2.0)));
            let n = (2.0 * radius / h).ceil() as usize + 1;
            n | 1
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GridKind {
    P,
    Wigner,
}

impl GridKind {
    pub fn name(self) -> &'static str {
        match self {
            GridKind::P => "p",
            GridKind::Wigner => "wigner",
        }
    }
}

/// Real values on a square α grid, row-major with `Im α` as the slow index.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseGrid {
    kind: GridKind,
    axis: Vec<f64>,
    values: Vec<f64>,
    order: u32,
    sigma_reg: f64,
    window: f64,
}

impl PhaseGrid {
    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn points(&self) -> usize {
        self.axis.len()
    }

    pub fn spacing(&self) -> f64 {
        self.axis[1] - self.axis[0]
    }

    pub fn extent(&self) -> f64 {
        -self.axis[0]
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn sigma_reg(&self) -> f64 {
        self.sigma_reg
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `α = axis[ix] + i·axis[iy]`.
    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.axis.len() + ix]
    }

    /// `(Re α, Im α, value)` in storage order.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.axis.len();
        self.values.iter().enumerate().map(move |(i, &v)| (self.axis[i % n], self.axis[i / n], v))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let h = self.spacing();
        self.samples().map(|(x, y, v)| f(x, y) * v).sum::<f64>() * h * h
    }

    pub fn integral(&self) -> f64 {
        self.integrate(|_, _| 1.0)
    }

    /// `∫ α F d²α`.
    pub fn mean_alpha(&self) -> C64 {
        C64::new(self.integrate(|x, _| x), self.integrate(|_, y| y))
    }

    /// `∫ |α|² F d²α`; for a Wigner grid this is `⟨a†a⟩ + ½`.
    pub fn mean_abs2(&self) -> f64 {
        self.integrate(|x, y| x * x + y * y)
    }

    /// Variances of `x = √2 Re α` and `p = √2 Im α` about the grid mean, with
    /// the grid normalized to unit weight.
    pub fn quadrature_variances(&self) -> (f64, f64) {
        let norm = self.integral();
        let mean = self.mean_alpha() / norm;
        let vx = self.integrate(|x, _| (x - mean.re).powi(2)) / norm;
        let vy = self.integrate(|_, y| (y - mean.im).powi(2)) / norm;
        (2.0 * vx, 2.0 * vy)
    }

    /// Marginal over `Im α` as a function of `Re α` (`imag = false`) or the reverse.
    pub fn marginal(&self, imag: bool) -> Vec<f64> {
        let n = self.axis.len();
        let h = self.spacing();
        (0..n)
            .map(|i| (0..n).map(|j| if imag { self.value(j, i) } else { self.value(i, j) }).sum::<f64>() * h)
            .collect()
    }
}

fn invert(
    series: &CharacteristicSeries,
    grid: &GridSpec,
    damping: f64,
    kind: GridKind,
    sigma_reg: f64,
    cap: f64,
) -> Result<PhaseGrid, PhaseSpaceError> {
    grid.validate()?;
    let radius = grid.window.unwrap_or_else(|| series.default_window(cap, damping));
    let nz = grid.window_nodes(radius);
    let hz = 2.0 * radius / (nz - 1) as f64;
    let znodes: Vec<f64> = (0..nz).map(|j| -radius + hz * j as f64).collect();

    // f[jy][jx] = χ(z) e^{−s|z|²} on the disk
    let mut f = vec![C64::zero(); nz * nz];
    for (jy, &y) in znodes.iter().enumerate() {
        for (jx, &x) in znodes.iter().enumerate() {
            let r2 = x * x + y * y;
            if r2 > radius * radius * (1.0 + 1e-12) {
                continue;
            }
            let chi = series.eval(C64::new(x, y));
            let bound = OVERFLOW_FACTOR * (0.5 * r2).exp();
            if !chi.norm().is_finite() || chi.norm() > bound {
                return Err(PhaseSpaceError::Divergent { value: chi.norm(), radius: r2.sqrt() });
            }
            f[jy * nz + jx] = chi * (-damping * r2).exp();
        }
    }

    // αz* − α*z = 2i(v x − u y) for α = u + iv, z = x + iy
    let axis = grid.axis();
    let n = axis.len();
    let phase = |a: f64, b: f64| C64::new(0.0, 2.0 * a * b).exp();
    let mut t = vec![C64::zero(); n * nz];
    for (iv, &v) in axis.iter().enumerate() {
        let kern: Vec<C64> = znodes.iter().map(|&x| phase(v, x)).collect();
        for jy in 0..nz {
            let row = &f[jy * nz..(jy + 1) * nz];
            t[iv * nz + jy] = row.iter().zip(&kern).map(|(a, b)| a * b).sum();
        }
    }
    let weight = hz * hz / (PI * PI);
    let mut values = vec![0.0; n * n];
    for (iu, &u) in axis.iter().enumerate() {
        let kern: Vec<C64> = znodes.iter().map(|&y| phase(-u, y)).collect();
        for iv in 0..n {
            let s: C64 = t[iv * nz..(iv + 1) * nz].iter().zip(&kern).map(|(a, b)| a * b).sum();
            values[iv * n + iu] = s.re * weight;
        }
    }
    Ok(PhaseGrid { kind, axis, values, order: series.order, sigma_reg, window: radius })
}

fn check_sigma(sigma_reg: f64) -> Result<(), PhaseSpaceError> {
    if sigma_reg.is_finite() && sigma_reg >= 0.0 {
        Ok(())
    } else {
        Err(PhaseSpaceError::InvalidGrid(format!("sigma_reg must be >= 0, got {sigma_reg}")))
    }
}

/// P distribution convolved with `(πσ²)⁻¹ e^{−|α|²/σ²}` (no smoothing at σ = 0).
pub fn p_grid(moments: &impl MomentSource, order: u32, grid: &GridSpec, sigma_reg: f64) -> Result<PhaseGrid, PhaseSpaceError> {
    check_sigma(sigma_reg)?;
    let series = CharacteristicSeries::new(moments, order)?;
    invert(&series, grid, sigma_reg * sigma_reg, GridKind::P, sigma_reg, P_WINDOW_CAP)
}

/// Wigner function straight from χ_N, smoothed like `p_grid` at the same σ.
pub fn wigner_grid(moments: &impl MomentSource, order: u32, grid: &GridSpec, sigma_reg: f64) -> Result<PhaseGrid, PhaseSpaceError> {
    check_sigma(sigma_reg)?;
    let series = CharacteristicSeries::new(moments, order)?;
    invert(&series, grid, 0.5 + sigma_reg * sigma_reg, GridKind::Wigner, sigma_reg, W_WINDOW_CAP)
}

/// `W(α) = (2/π) ∫ e^{−2|α−α'|²} P(α') d²α'` by quadrature over the P grid's nodes.
/// The P grid must cover the support of P, not just the output window.
pub fn wigner_from_p(p: &PhaseGrid, grid: &GridSpec) -> Result<PhaseGrid, PhaseSpaceError> {
    grid.validate()?;
    if p.kind != GridKind::P {
        return Err(PhaseSpaceError::InvalidGrid(String::from("convolution path needs a P grid")));
    }
    let axis = grid.axis();
    let n = axis.len();
    let m = p.points();
    let h = p.spacing();
    let kernel = |out: &[f64]| -> Vec<f64> {
        let mut k = vec![0.0; out.len() * m];
        for (i, &a) in out.iter().enumerate() {
            for (j, &b) in p.axis.iter().enumerate() {
                k[i * m + j] = (-2.0 * (a - b) * (a - b)).exp();
            }
        }
        k
    };
    let k = kernel(&axis);
    // tmp[jy][iu] = Σ_jx K(u − x) P[jy][jx]
    let mut tmp = vec![0.0; m * n];
    for jy in 0..m {
        let row = &p.values[jy * m..(jy + 1) * m];
        for iu in 0..n {
            tmp[jy * n + iu] = row.iter().zip(&k[iu * m..(iu + 1) * m]).map(|(a, b)| a * b).sum();
        }
    }
    let scale = 2.0 / PI * h * h;
    let mut values = vec![0.0; n * n];
    for iv in 0..n {
        let kv = &k[iv * m..(iv + 1) * m];
        for iu in 0..n {
            values[iv * n + iu] = scale * (0..m).map(|jy| kv[jy] * tmp[jy * n + iu]).sum::<f64>();
        }
    }
    Ok(PhaseGrid { kind: GridKind::Wigner, axis, values, order: p.order, sigma_reg: p.sigma_reg, window: p.window })
}

/// Truncation order used when none is requested: the highest complete order, capped.
pub fn default_order(table: &MomentTable) -> u32 {
    table.pmax().min(table.qmax()).min(DEFAULT_MAX_ORDER)
}

/// `0` when some component has a smooth P (thermal with `n₀ > 0`), else
/// `DEFAULT_SIGMA_REG`.
pub fn default_sigma(components: &[ComponentState]) -> f64 {
    let smooth = components.iter().any(|c| matches!(c, ComponentState::Thermal { n0 } if *n0 > 0.0));
    if smooth {
        0.0
    } else {
        DEFAULT_SIGMA_REG
    }
}

/// One cell of the pairwise convolution table.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GalleryCell {
    pub row: &'static str,
    pub column: &'static str,
    /// Empty for the identity row.
    pub components: Vec<ComponentState>,
    pub grid: PhaseGrid,
}

impl GalleryCell {
    /// `<column>_<row>`, or the column alone in the identity row.
    pub fn state_name(&self) -> String {
        if self.row == "identity" {
            String::from(self.column)
        } else {
            format!("{}_{}", self.column, self.row)
        }
    }
}

/// Rows of the table; `None` is the identity of convolution.
pub fn gallery_rows() -> Vec<(&'static str, Option<ComponentState>)> {
    vec![
        ("identity", None),
        ("coherent", Some(ComponentState::coherent(C64::new(1.0, 0.0)))),
        ("squeezed", Some(ComponentState::squeezed(1.0, -FRAC_PI_2).expect("valid"))),
        ("thermal", Some(ComponentState::thermal(1e-3).expect("valid"))),
        ("fock", Some(ComponentState::fock(2))),
    ]
}

pub fn gallery_columns() -> Vec<(&'static str, ComponentState)> {
    vec![
        ("coherent", ComponentState::coherent(C64::new(0.0, 1.0))),
        ("squeezed", ComponentState::squeezed(0.5, 0.0).expect("valid")),
        ("thermal", ComponentState::thermal(0.1).expect("valid")),
        ("fock", ComponentState::fock(1)),
    ]
}

/// Moments of a column state convolved with a row state up to `order`.
pub fn gallery_moments(column: &ComponentState, row: Option<&ComponentState>, order: u32) -> Result<MomentTable, PhaseSpaceError> {
    let opts = MomentOptions { max_order: MomentOptions::default().max_order.max(order) };
    let base = column.moment_table(order, order, &opts)?;
    Ok(match row {
        Some(r) => base.convolve(&r.moment_table(order, order, &opts)?),
        None => base,
    })
}

/// Wigner grids of every column ⋆ row pair, via the direct χ path.
pub fn gallery(grid: &GridSpec, order: u32) -> Result<Vec<GalleryCell>, PhaseSpaceError> {
    let mut out = Vec::new();
    for (row, rstate) in gallery_rows() {
        for (column, cstate) in gallery_columns() {
            let table = gallery_moments(&cstate, rstate.as_ref(), order)?;
            let grid = wigner_grid(&table, order, grid, 0.0)?;
            let mut components = vec![cstate];
            components.extend(rstate);
            out.push(GalleryCell { row, column, components, grid });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(state: &ComponentState, order: u32) -> MomentTable {
        state.moment_table(order, order, &MomentOptions { max_order: order.max(16) }).unwrap()
    }

    #[test]
    fn vacuum_char_fn_is_one() {
        let t = table(&ComponentState::vacuum(), 6);
        for z in [C64::new(0.3, -2.0), C64::new(3.0, 1.0)] {
            assert!((char_fn(&t, 6, z).unwrap() - 1.0).norm() < 1e-15);
        }
    }

    #[test]
    fn missing_moment_is_named() {
        let mut map = BTreeMap::new();
        map.insert((1u32, 0u32), C64::new(1.0, 0.0));
        let err = char_fn(&map, 1, C64::new(0.1, 0.0)).unwrap_err();
        assert_eq!(err, PhaseSpaceError::MissingMoment { k: 1, l: 1 });
    }

    #[test]
    fn monomial_map_source_conjugates() {
        let mut map = BTreeMap::new();
        map.insert(Monomial::boson(0, 0, 1), C64::new(0.5, 0.25));
        assert_eq!(map.moment(1, 0), Some(C64::new(0.5, -0.25)));
        assert_eq!(map.moment(0, 0), Some(C64::new(1.0, 0.0)));
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(0.0, 10).validate().is_err());
        assert!(GridSpec::new(1.0, 1).validate().is_err());
        assert!(GridSpec::new(1.0, 5).with_window(-1.0).validate().is_err());
    }

    #[test]
    fn default_sigma_rule() {
        assert_eq!(default_sigma(&[ComponentState::thermal(0.1).unwrap()]), 0.0);
        assert_eq!(default_sigma(&[ComponentState::fock(1)]), DEFAULT_SIGMA_REG);
    }
}
