//! Small numerical building blocks: reproducible summation, Gauss–Legendre
//! rules, dense polynomials on `[-1, 1]`, smoothstep profiles and float
//! formatting.

use std::f64::consts::PI;

const PAIRWISE_BLOCK: usize = 16;

/// Pairwise (cascade) summation with a fixed split order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        acc
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Pairwise summation of `f(i)` for `i` in `start..end` without allocation.
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(start: usize, end: usize, f: &F) -> f64 {
    let len = end - start;
    if len <= PAIRWISE_BLOCK {
        let mut acc = 0.0;
        for i in start..end {
            acc += f(i);
        }
        acc
    } else {
        let mid = start + len / 2;
        pairwise_sum_by(start, mid, f) + pairwise_sum_by(mid, end, f)
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` and its derivative.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = if (1.0 - x * x).abs() < 1e-300 {
        let nf = n as f64;
        0.5 * nf * (nf + 1.0) * x.powi(n as i32 + 1)
    } else {
        n as f64 * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, d)
}

/// Dense polynomial in monomial form, `c[0] + c[1] s + ...`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Poly {
    pub coeffs: Vec<f64>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Poly { coeffs: vec![c] }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        let mut p = Poly { coeffs };
        p.trim();
        p
    }

    /// Legendre polynomial `P_j` in monomial form.
    pub fn legendre(j: usize) -> Self {
        let mut p0 = Poly::constant(1.0);
        if j == 0 {
            return p0;
        }
        let x = Poly::from_coeffs(vec![0.0, 1.0]);
        let mut p1 = x.clone();
        for k in 2..=j {
            let kf = k as f64;
            let p2 = x
                .mul(&p1)
                .scale((2.0 * kf - 1.0) / kf)
                .add(&p0.scale(-(kf - 1.0) / kf));
            p0 = p1;
            p1 = p2;
        }
        p1
    }

    fn trim(&mut self) {
        while matches!(self.coeffs.last(), Some(c) if *c == 0.0) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * s + c;
        }
        acc
    }

    /// Value, first and second derivative at `s`.
    pub fn eval_jet(&self, s: f64) -> [f64; 3] {
        let mut p = 0.0;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for c in self.coeffs.iter().rev() {
            d2 = d2 * s + 2.0 * d1;
            d1 = d1 * s + p;
            p = p * s + c;
        }
        [p, d1, d2]
    }

    pub fn deriv(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        Poly::from_coeffs(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * k as f64)
                .collect(),
        )
    }

    /// Antiderivative vanishing at `s = lower`.
    pub fn antideriv_from(&self, lower: f64) -> Poly {
        let mut c = vec![0.0; self.coeffs.len() + 1];
        for (k, v) in self.coeffs.iter().enumerate() {
            c[k + 1] = v / (k as f64 + 1.0);
        }
        let mut p = Poly { coeffs: c };
        let shift = p.eval(lower);
        if p.coeffs.is_empty() {
            p.coeffs.push(0.0);
        }
        p.coeffs[0] -= shift;
        p.trim();
        p
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut c = vec![0.0; n];
        for (k, v) in self.coeffs.iter().enumerate() {
            c[k] += v;
        }
        for (k, v) in other.coeffs.iter().enumerate() {
            c[k] += v;
        }
        Poly::from_coeffs(c)
    }

    pub fn add_scaled(&mut self, other: &Poly, factor: f64) {
        if self.coeffs.len() < other.coeffs.len() {
            self.coeffs.resize(other.coeffs.len(), 0.0);
        }
        for (k, v) in other.coeffs.iter().enumerate() {
            self.coeffs[k] += factor * v;
        }
        self.trim();
    }

    pub fn scale(&self, factor: f64) -> Poly {
        Poly::from_coeffs(self.coeffs.iter().map(|c| c * factor).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Poly::zero();
        }
        let mut c = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly::from_coeffs(c)
    }

    /// Exact integral over `[-1, 1]`.
    pub fn integral(&self) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            if k % 2 == 0 {
                acc += 2.0 * c / (k as f64 + 1.0);
            }
        }
        acc
    }
}

/// Quintic smoothstep `x^3 (10 - 15x + 6x^2)` clamped to `[0, 1]`, with
/// first and second derivatives.
pub fn smoothstep5(x: f64) -> [f64; 3] {
    if x <= 0.0 {
        [0.0, 0.0, 0.0]
    } else if x >= 1.0 {
        [1.0, 0.0, 0.0]
    } else {
        let v = x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
        let d1 = 30.0 * x * x * (1.0 - x) * (1.0 - x);
        let d2 = 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x);
        [v, d1, d2]
    }
}

/// Maximum slope of [`smoothstep5`] on the unit interval.
pub const SMOOTHSTEP5_MAX_SLOPE: f64 = 1.875;

/// Seventeen significant digits, round-trip exact.
pub fn fmt17(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Euclidean dot product of 3-vectors.
#[inline]
pub fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_monomials_exactly() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg} q={q} exact={exact}");
            }
        }
    }

    #[test]
    fn legendre_poly_matches_recurrence() {
        for j in 0..8 {
            let p = Poly::legendre(j);
            for &s in &[-0.9, -0.3, 0.0, 0.4, 1.0] {
                let (v, d) = legendre_with_derivative(j, s);
                assert!((p.eval(s) - v).abs() < 1e-13);
                if s.abs() < 1.0 {
                    assert!((p.deriv().eval(s) - d).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn poly_jet_matches_derivatives() {
        let p = Poly::from_coeffs(vec![0.3, -1.0, 2.0, 0.5, -0.25]);
        for &s in &[-1.0, -0.2, 0.7] {
            let jet = p.eval_jet(s);
            assert!((jet[0] - p.eval(s)).abs() < 1e-14);
            assert!((jet[1] - p.deriv().eval(s)).abs() < 1e-13);
            assert!((jet[2] - p.deriv().deriv().eval(s)).abs() < 1e-13);
        }
    }

    #[test]
    fn antiderivative_vanishes_at_lower_limit() {
        let p = Poly::from_coeffs(vec![1.0, 2.0, 3.0]);
        let q = p.antideriv_from(-1.0);
        assert!(q.eval(-1.0).abs() < 1e-15);
        assert!((q.eval(1.0) - p.integral()).abs() < 1e-14);
        assert_eq!(q.deriv(), p);
    }

    #[test]
    fn smoothstep_endpoints_and_slope() {
        assert_eq!(smoothstep5(0.0), [0.0, 0.0, 0.0]);
        assert_eq!(smoothstep5(1.0), [1.0, 0.0, 0.0]);
        let [_, d, _] = smoothstep5(0.5);
        assert!((d - SMOOTHSTEP5_MAX_SLOPE).abs() < 1e-14);
    }

    #[test]
    fn pairwise_sum_agrees_with_naive_on_small_input() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 4950.0);
        assert_eq!(pairwise_sum_by(0, 100, &|i| i as f64), 4950.0);
    }

    #[test]
    fn fmt17_round_trips() {
        for &x in &[0.1, -1.0 / 3.0, 6.02e23, 1e-300, 0.0] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }
}

/// Symmetric banded matrix stored by lower diagonals:
/// `band[i * (bw + 1) + d] = A[i][i - d]`.
#[derive(Clone, Debug)]
pub struct BandedSym {
    pub n: usize,
    pub bw: usize,
    band: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSym {
            n,
            bw,
            band: vec![0.0; n * (bw + 1)],
        }
    }

    /// Adds `v` to the stored entry `A[i][j]` when `i ≥ j`; calls with
    /// `i < j` are ignored so that full outer-product loops fill the
    /// symmetric matrix exactly once. Requires `i - j ≤ bw`.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if i >= j {
            debug_assert!(i - j <= self.bw);
            self.band[i * (self.bw + 1) + (i - j)] += v;
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d > self.bw {
            0.0
        } else {
            self.band[hi * (self.bw + 1) + d]
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let w = self.bw + 1;
        for v in y.iter_mut() {
            *v = 0.0;
        }
        for i in 0..self.n {
            let row = &self.band[i * w..(i + 1) * w];
            y[i] += row[0] * x[i];
            for d in 1..w.min(i + 1) {
                let a = row[d];
                if a != 0.0 {
                    y[i] += a * x[i - d];
                    y[i - d] += a * x[i];
                }
            }
        }
    }

    /// `A + s B` for matrices of equal size (bandwidth of the wider one).
    pub fn add_scaled(&self, other: &BandedSym, s: f64) -> BandedSym {
        let bw = self.bw.max(other.bw);
        let mut out = BandedSym::zeros(self.n, bw);
        for i in 0..self.n {
            for d in 0..=bw.min(i) {
                let v = self.get(i, i - d) + s * other.get(i, i - d);
                out.band[i * (bw + 1) + d] = v;
            }
        }
        out
    }

    /// In-place banded Cholesky `A = L Lᵀ`; returns `None` when a pivot is
    /// not positive.
    pub fn cholesky(mut self) -> Option<BandedCholesky> {
        let w = self.bw + 1;
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            for j in j0..=i {
                let mut s = self.band[i * w + (i - j)];
                let k0 = j0.max(j.saturating_sub(self.bw));
                for k in k0..j {
                    s -= self.band[i * w + (i - k)] * self.band[j * w + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return None;
                    }
                    self.band[i * w] = s.sqrt();
                } else {
                    self.band[i * w + (i - j)] = s / self.band[j * w];
                }
            }
        }
        Some(BandedCholesky { l: self })
    }
}

/// Banded Cholesky factor.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    l: BandedSym,
}

impl BandedCholesky {
    /// Solves `L Lᵀ x = b` in place.
    pub fn solve_mut(&self, x: &mut [f64]) {
        let n = self.l.n;
        let bw = self.l.bw;
        let w = bw + 1;
        let band = &self.l.band;
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= band[i * w + (i - k)] * x[k];
            }
            x[i] = s / band[i * w];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..(i + w).min(n) {
                s -= band[k * w + (k - i)] * x[k];
            }
            x[i] = s / band[i * w];
        }
    }
}

#[cfg(test)]
mod banded_tests {
    use super::*;

    #[test]
    fn banded_cholesky_solves_tridiagonal_system() {
        let n = 20;
        let mut a = BandedSym::zeros(n, 2);
        for i in 0..n {
            a.add(i, i, 4.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
            if i > 1 {
                a.add(i, i - 2, 0.5);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b = vec![0.0; n];
        a.matvec(&x, &mut b);
        let chol = a.clone().cholesky().unwrap();
        chol.solve_mut(&mut b);
        for (u, v) in x.iter().zip(&b) {
            assert!((u - v).abs() < 1e-13);
        }
    }
}
