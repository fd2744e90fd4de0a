//! Small dense/banded numerics shared by the solver paths.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // float methods are inherent once std is linked
use num_traits::Float;
use num_traits::Zero;

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

/// `n!` in double precision. Exact up to 22!, finite up to 170!.
pub fn factorial(n: u32) -> f64 {
    let mut acc = 1.0;
    for k in 2..=n {
        acc *= k as f64;
    }
    acc
}

/// Binomial coefficient as a float.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    libm::round(acc)
}

/// `l! / (l - p)!`, zero when `p > l`.
pub fn falling_factorial(l: u32, p: u32) -> f64 {
    if p > l {
        return 0.0;
    }
    ((l - p + 1)..=l).fold(1.0, |acc, k| acc * k as f64)
}

/// Number of perfect matchings of `n` objects: `(n-1)!!` for even `n`, zero for odd.
pub fn pairings(n: u32) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    let mut acc = 1.0;
    let mut k = n as i64 - 1;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

/// Integer power of a complex number by repeated squaring.
pub fn cpowi(z: C64, n: u32) -> C64 {
    let mut base = z;
    let mut e = n;
    let mut acc = C64::new(1.0, 0.0);
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base = base * base;
        e >>= 1;
    }
    acc
}

/// Eigen-decomposition of a small Hermitian matrix (row-major, `n*n`) by cyclic
/// complex Jacobi rotations. Returns eigenvalues and the unitary whose columns are
/// the eigenvectors, both in the order produced by the sweep (unsorted).
pub fn hermitian_eigen(matrix: &[C64], n: usize) -> (Vec<f64>, Vec<C64>) {
    assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    let mut v = vec![C64::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = C64::new(1.0, 0.0);
    }
    let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // J = diag(1, conj(phase)) * [[c, s], [-s, c]] on the (p, q) plane
                let jpp = C64::new(c, 0.0);
                let jpq = C64::new(s, 0.0);
                let jqp = -phase.conj() * s;
                let jqq = phase.conj() * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * jpp + akq * jqp;
                    a[k * n + q] = akp * jpq + akq * jqq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = jpp.conj() * apk + jqp.conj() * aqk;
                    a[q * n + k] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * jpp + vkq * jqp;
                    v[k * n + q] = vkp * jpq + vkq * jqq;
                }
            }
        }
    }
    let vals = (0..n).map(|i| a[i * n + i].re).collect();
    (vals, v)
}

/// Real roots of `c3 x^3 + c2 x^2 + c1 x + c0`, ascending, Newton-polished.
pub fn real_cubic_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    let scale = c3.abs().max(c2.abs()).max(c1.abs()).max(c0.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    let mut roots = if c3.abs() <= 1e-14 * scale {
        real_quadratic_roots(c2, c1, c0)
    } else {
        let b = c2 / c3;
        let c = c1 / c3;
        let d = c0 / c3;
        // depressed cubic t^3 + P t + Q with x = t - b/3
        let p = c - b * b / 3.0;
        let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
        let shift = -b / 3.0;
        let disc = q * q / 4.0 + p * p * p / 27.0;
        let mut out = Vec::new();
        if disc > 0.0 {
            let sq = disc.sqrt();
            let u = libm::cbrt(-q / 2.0 + sq);
            let v = libm::cbrt(-q / 2.0 - sq);
            out.push(u + v + shift);
        } else if p == 0.0 {
            out.push(shift);
        } else {
            let m = 2.0 * (-p / 3.0).sqrt();
            let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
            let theta = libm::acos(arg) / 3.0;
            for k in 0..3 {
                out.push(m * libm::cos(theta - 2.0 * core::f64::consts::PI * k as f64 / 3.0) + shift);
            }
        }
        out
    };
    for r in roots.iter_mut() {
        for _ in 0..8 {
            let f = ((c3 * *r + c2) * *r + c1) * *r + c0;
            let df = (3.0 * c3 * *r + 2.0 * c2) * *r + c1;
            if df == 0.0 {
                break;
            }
            let step = f / df;
            *r -= step;
            if step.abs() <= 1e-15 * r.abs().max(1.0) {
                break;
            }
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    roots
}

fn real_quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { Vec::new() } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    if q == 0.0 {
        return vec![0.0, 0.0];
    }
    vec![q / a, c / q]
}

/// Sparse linear system whose rows are banded except for the final row, which may
/// be dense. Solved by Gaussian elimination with partial pivoting restricted to
/// the band; the dense final row is only ever eliminated into, and becomes the
/// last pivot.
#[derive(Debug, Clone)]
pub struct BorderedBandSystem {
    n: usize,
    rows: Vec<Vec<(usize, C64)>>,
    last: Vec<C64>,
}

/// Failure of [`BorderedBandSystem::solve`]: the pivot at `column` vanished.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPivot {
    pub column: usize,
    pub magnitude: f64,
}

struct BandRow {
    start: usize,
    vals: Vec<C64>,
}

impl BandRow {
    fn get(&self, col: usize) -> C64 {
        if col < self.start || col >= self.start + self.vals.len() {
            C64::zero()
        } else {
            self.vals[col - self.start]
        }
    }

    fn end(&self) -> usize {
        self.start + self.vals.len()
    }
}

impl BorderedBandSystem {
    pub fn new(n: usize) -> Self {
        Self { n, rows: vec![Vec::new(); n.saturating_sub(1)], last: vec![C64::zero(); n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Accumulate `value` at `(row, col)`; rows other than the last.
    pub fn add(&mut self, row: usize, col: usize, value: C64) {
        if row + 1 == self.n {
            self.last[col] += value;
        } else {
            self.rows[row].push((col, value));
        }
    }

    pub fn set_last_row(&mut self, row: Vec<C64>) {
        assert_eq!(row.len(), self.n);
        self.last = row;
    }

    /// Lower bandwidth over the banded rows.
    pub fn lower_bandwidth(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&(c, _)| i.saturating_sub(c)))
            .max()
            .unwrap_or(0)
    }

    pub fn solve(&self, rhs: &[C64]) -> Result<Vec<C64>, SingularPivot> {
        let n = self.n;
        assert_eq!(rhs.len(), n);
        if n == 0 {
            return Ok(Vec::new());
        }
        let kl = self.lower_bandwidth();
        let mut rows: Vec<BandRow> = self
            .rows
            .iter()
            .map(|entries| {
                let mut sorted = entries.clone();
                sorted.sort_by_key(|&(c, _)| c);
                match (sorted.first(), sorted.last()) {
                    (Some(&(lo, _)), Some(&(hi, _))) => {
                        let mut vals = vec![C64::zero(); hi - lo + 1];
                        for (c, v) in sorted {
                            vals[c - lo] += v;
                        }
                        BandRow { start: lo, vals }
                    }
                    _ => BandRow { start: 0, vals: Vec::new() },
                }
            })
            .collect();
        let mut last = self.last.clone();
        let mut b = rhs.to_vec();
        let scale = rows
            .iter()
            .flat_map(|r| r.vals.iter())
            .chain(last.iter())
            .fold(0.0_f64, |m, v| m.max(v.norm()))
            .max(f64::MIN_POSITIVE);
        let tiny = 1e-13 * scale;

        for k in 0..n.saturating_sub(1) {
            let hi = (k + kl).min(n - 2);
            let mut piv = k;
            let mut best = if k < n - 1 { rows[k].get(k).norm() } else { 0.0 };
            for (i, row) in rows.iter().enumerate().take(hi + 1).skip(k + 1) {
                let m = row.get(k).norm();
                if m > best {
                    best = m;
                    piv = i;
                }
            }
            if best <= tiny {
                return Err(SingularPivot { column: k, magnitude: best });
            }
            if piv != k {
                rows.swap(k, piv);
                b.swap(k, piv);
            }
            let (head, tail) = rows.split_at_mut(k + 1);
            let prow = &head[k];
            let pval = prow.get(k);
            let pend = prow.end();
            let bk = b[k];
            for (offset, row) in tail.iter_mut().take(hi - k).enumerate() {
                let v = row.get(k);
                if v == C64::zero() {
                    continue;
                }
                let f = v / pval;
                if row.end() < pend {
                    row.vals.resize(pend - row.start, C64::zero());
                }
                for c in (k + 1)..pend {
                    let pv = prow.vals[c - prow.start];
                    if pv != C64::zero() {
                        row.vals[c - row.start] -= f * pv;
                    }
                }
                row.vals[k - row.start] = C64::zero();
                b[k + 1 + offset] -= f * bk;
            }
            let lv = last[k];
            if lv != C64::zero() {
                let f = lv / pval;
                for c in (k + 1)..pend {
                    last[c] -= f * prow.vals[c - prow.start];
                }
                last[k] = C64::zero();
                b[n - 1] -= f * bk;
            }
        }
        let lpiv = last[n - 1];
        if lpiv.norm() <= tiny {
            return Err(SingularPivot { column: n - 1, magnitude: lpiv.norm() });
        }
        let mut x = vec![C64::zero(); n];
        x[n - 1] = b[n - 1] / lpiv;
        for k in (0..n - 1).rev() {
            let row = &rows[k];
            let mut acc = b[k];
            for c in (k + 1)..row.end() {
                acc -= row.vals[c - row.start] * x[c];
            }
            x[k] = acc / row.get(k);
        }
        Ok(x)
    }
}
