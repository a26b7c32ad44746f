//! Univariate approximation: Fejér trigonometric sums with coefficient
//! control, Bernstein polynomials of Hölder functions, and Chebyshev
//! interpolants as constructive stand-ins for Jackson's theorem.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::numeric::ln_binom;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ApproxError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite sample of the target at t = {0}")]
    NonFinite(f64),
    #[error("degree {0} is too large for the monomial basis")]
    MonomialOverflow(usize),
}

/// Trigonometric polynomial `sum_{|k| < n} b_k exp(i k omega t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    /// Base angular frequency `omega`.
    pub omega: f64,
    /// Fejér order: indices run over `|k| <= n - 1`.
    pub n: usize,
    /// `coeffs[k + n - 1] = b_k`.
    pub coeffs: Vec<Complex64>,
    /// Bound on every `|b_k|`.
    pub coeff_bound: f64,
    pub real_valued: bool,
}

impl TrigPoly {
    pub fn constant(c: f64) -> Self {
        Self {
            omega: 1.0,
            n: 1,
            coeffs: vec![Complex64::new(c, 0.0)],
            coeff_bound: c.abs(),
            real_valued: true,
        }
    }

    pub fn max_index(&self) -> i64 {
        self.n as i64 - 1
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        let idx = k + self.max_index();
        if idx < 0 || idx as usize >= self.coeffs.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[idx as usize]
        }
    }

    /// `(k, b_k)` for the nonzero coefficients, increasing `k`.
    pub fn terms(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let m = self.max_index();
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, b)| b.norm() > 0.0)
            .map(move |(i, b)| (i as i64 - m, *b))
    }

    pub fn frequency(&self, k: i64) -> f64 {
        k as f64 * self.omega
    }

    /// Horner's scheme in `z = exp(i omega t)`, shifted by `z^-(n-1)`.
    pub fn eval(&self, t: f64) -> Complex64 {
        let z = Complex64::from_polar(1.0, self.omega * t);
        let acc = self
            .coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, b| acc * z + b);
        acc * Complex64::from_polar(1.0, -(self.max_index() as f64) * self.omega * t)
    }
}

/// Fejér error bound `3 (1 + 2 L^2 r^2) log(n) / n` for an `L`-Lipschitz
/// target on `[-r, r]`.
pub fn fejer_error_bound(lip: f64, r: f64, n: usize) -> f64 {
    3.0 * (1.0 + 2.0 * lip * lip * r * r) * (n as f64).ln() / n as f64
}

const ALIAS_TOL: f64 = 1e-9;
const MAX_LOG2_SAMPLES: u32 = 22;

/// Fejér approximation of an `L`-Lipschitz `f` on `[-r, r]`.
///
/// `f` is extended with slope `L` to a continuous periodic function, whose
/// Fourier coefficients are obtained by FFT and damped by `(n - |k|)/n`.
pub fn fejer_trig_approx<F: Fn(f64) -> f64>(
    f: F,
    lip: f64,
    r: f64,
    n: usize,
) -> Result<TrigPoly, ApproxError> {
    if n < 2 {
        return Err(ApproxError::Domain(format!(
            "Fejér order must be at least 2, got {n}"
        )));
    }
    if !(r > 0.0) || !(lip >= 0.0) {
        return Err(ApproxError::Domain("need r > 0 and L >= 0".into()));
    }
    let left = f(-r);
    let right = f(r);
    if !left.is_finite() {
        return Err(ApproxError::NonFinite(-r));
    }
    if !right.is_finite() {
        return Err(ApproxError::NonFinite(r));
    }
    // The extension needs f(r) <= f(-r); otherwise approximate t -> f(-t).
    let reflect = right > left;
    let g = |t: f64| if reflect { f(-t) } else { f(t) };
    let (gl, gr) = if reflect {
        (right, left)
    } else {
        (left, right)
    };
    let c = gl - gr;
    let ext = if c > 0.0 {
        if lip <= 0.0 {
            return Err(ApproxError::Domain(
                "endpoint values differ but L = 0".into(),
            ));
        }
        c / (2.0 * lip)
    } else {
        0.0
    };
    let half = r + ext;
    let period = 2.0 * half;
    let periodic = |t: f64| {
        if t < -r {
            lip * (t + r) + gl
        } else if t > r {
            lip * (t - r) + gr
        } else {
            g(t)
        }
    };

    let kmax = n - 1;
    let mut log2m = (4 * n).next_power_of_two().trailing_zeros().max(12);
    let mut prev: Option<Vec<Complex64>> = None;
    let mut sup = 0.0f64;
    let mut planner = FftPlanner::<f64>::new();
    let hat = loop {
        let m = 1usize << log2m;
        let mut buf = Vec::with_capacity(m);
        for j in 0..m {
            let t = -half + period * j as f64 / m as f64;
            let v = periodic(t);
            if !v.is_finite() {
                return Err(ApproxError::NonFinite(t));
            }
            sup = sup.max(v.abs());
            buf.push(Complex64::new(v, 0.0));
        }
        planner.plan_fft_forward(m).process(&mut buf);
        let coeffs: Vec<Complex64> = (0..=kmax)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                buf[k] * (sign / m as f64)
            })
            .collect();
        let done = match &prev {
            Some(p) => {
                let diff = p
                    .iter()
                    .zip(&coeffs)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                diff <= ALIAS_TOL * sup.max(f64::MIN_POSITIVE)
            }
            None => false,
        };
        if done || log2m >= MAX_LOG2_SAMPLES {
            break coeffs;
        }
        prev = Some(coeffs);
        log2m += 1;
    };

    let omega = 2.0 * PI / period;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * kmax + 1];
    let floor = 1e-14 * sup;
    for (k, h) in hat.iter().enumerate() {
        let damp = (n - k) as f64 / n as f64;
        let mut b = h * damp;
        if k == 0 {
            b.im = 0.0;
        }
        if b.norm() <= floor {
            continue;
        }
        // Reflection t -> -t swaps b_k and b_{-k}.
        let (pos, neg) = if reflect {
            (b.conj(), b)
        } else {
            (b, b.conj())
        };
        coeffs[kmax + k] = pos;
        coeffs[kmax - k] = neg;
    }
    Ok(TrigPoly {
        omega,
        n,
        coeffs,
        coeff_bound: sup,
        real_valued: true,
    })
}

/// Least-squares trigonometric fit of `f` on `[-r, r]` with period
/// `2 r ext` (a Fourier extension), using `|k| <= n - 1`.
///
/// Unlike the Fejér sum this converges spectrally for smooth `f`, but it
/// carries no a-priori error bound; callers measure the error.
pub fn fourier_extension_fit<F: Fn(f64) -> f64>(
    f: F,
    r: f64,
    ext: f64,
    n: usize,
) -> Result<TrigPoly, ApproxError> {
    if n < 1 {
        return Err(ApproxError::Domain("order must be at least 1".into()));
    }
    if !(r > 0.0) || !(ext >= 1.0) {
        return Err(ApproxError::Domain("need r > 0 and ext >= 1".into()));
    }
    let omega = PI / (r * ext);
    let kmax = n - 1;
    let cols = 2 * kmax + 1;
    let rows = (8 * cols).max(256);
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut b = DVector::<f64>::zeros(rows);
    for i in 0..rows {
        let t = -r * ((2 * i + 1) as f64 * PI / (2 * rows) as f64).cos();
        let v = f(t);
        if !v.is_finite() {
            return Err(ApproxError::NonFinite(t));
        }
        b[i] = v;
        a[(i, 0)] = 1.0;
        for k in 1..=kmax {
            let th = k as f64 * omega * t;
            a[(i, 2 * k - 1)] = th.cos();
            a[(i, 2 * k)] = th.sin();
        }
    }
    let svd = a.svd(true, true);
    let tol = 1e-12 * svd.singular_values.max();
    let x = svd
        .solve(&b, tol)
        .map_err(|e| ApproxError::Domain(e.to_string()))?;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); cols];
    coeffs[kmax] = Complex64::new(x[0], 0.0);
    for k in 1..=kmax {
        // a cos + b sin = (a - ib)/2 e^{i th} + (a + ib)/2 e^{-i th}
        let pos = Complex64::new(x[2 * k - 1], -x[2 * k]) * 0.5;
        coeffs[kmax + k] = pos;
        coeffs[kmax - k] = pos.conj();
    }
    let coeff_bound = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    Ok(TrigPoly {
        omega,
        n,
        coeffs,
        coeff_bound,
        real_valued: true,
    })
}

/// Polynomial on the real line, kept in monomial form or, for high-degree
/// Bernstein sums, as node values evaluated in log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniPoly {
    repr: PolyRepr,
    /// Parameters `(r, alpha, f(0))` when produced by [`bernstein_poly`].
    pub bernstein: Option<BernsteinMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum PolyRepr {
    Monomial(Vec<f64>),
    /// `f(0) + sum_i values[i] C(n,i) s^i (1-s)^(n-i)` with `s = t/(2r) + 1/2`.
    Bernstein {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinMeta {
    pub r: f64,
    pub alpha: f64,
    pub f0: f64,
}

/// Largest Bernstein degree converted to monomial coefficients.
pub const MONOMIAL_DEGREE_LIMIT: usize = 64;

impl UniPoly {
    pub fn monomial(coeffs: Vec<f64>) -> Self {
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self {
            repr: PolyRepr::Monomial(coeffs),
            bernstein: None,
        }
    }

    pub fn degree(&self) -> usize {
        match &self.repr {
            PolyRepr::Monomial(c) => c.len() - 1,
            PolyRepr::Bernstein { values } => values.len() - 1,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.repr {
            PolyRepr::Monomial(c) => c.iter().rev().fold(0.0, |acc, v| acc * t + v),
            PolyRepr::Bernstein { values } => {
                let meta = self.bernstein.expect("Bernstein form carries its metadata");
                meta.f0 + bernstein_sum(values, t / (2.0 * meta.r) + 0.5)
            }
        }
    }

    /// Monomial coefficients `r_0, ..., r_n`.
    pub fn coeffs(&self) -> Result<Vec<f64>, ApproxError> {
        match &self.repr {
            PolyRepr::Monomial(c) => Ok(c.clone()),
            PolyRepr::Bernstein { values } => {
                let n = values.len() - 1;
                if n > MONOMIAL_DEGREE_LIMIT {
                    return Err(ApproxError::MonomialOverflow(n));
                }
                let meta = self.bernstein.expect("Bernstein form carries its metadata");
                Ok(bernstein_to_monomial(values, meta))
            }
        }
    }

    /// Natural-log upper bounds on `|r_k|`, valid at any degree: the
    /// coefficients of `(2r)^-n sum_i C(n,i) |g(i/n)| (t + r)^n`.
    pub fn coeff_log_bounds(&self) -> Option<Vec<f64>> {
        let PolyRepr::Bernstein { values } = &self.repr else {
            return None;
        };
        let meta = self.bernstein?;
        let n = values.len() - 1;
        let nf = n as f64;
        let lse = log_sum_exp(
            values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| ln_binom(nf, i as f64) + v.abs().ln()),
        );
        Some(
            (0..=n)
                .map(|k| {
                    let kf = k as f64;
                    let base =
                        lse - nf * (2.0 * meta.r).ln() + ln_binom(nf, kf) + (nf - kf) * meta.r.ln();
                    if k == 0 {
                        // r_0 = p(0) is a convex combination: |r_0| <= max|g| + |f(0)|.
                        let g_max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                        (g_max + meta.f0.abs())
                            .ln()
                            .min(log_add(base, meta.f0.abs().ln()))
                    } else {
                        base
                    }
                })
                .collect(),
        )
    }
}

fn log_sum_exp(it: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = it.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

// sum_i values[i] C(n,i) s^i (1-s)^(n-i), evaluated term-wise in log space.
fn bernstein_sum(values: &[f64], s: f64) -> f64 {
    let n = values.len() - 1;
    if s <= 0.0 {
        return values[0];
    }
    if s >= 1.0 {
        return values[n];
    }
    let nf = n as f64;
    let ls = s.ln();
    let l1s = (1.0 - s).ln();
    let lg_n = statrs::function::gamma::ln_gamma(nf + 1.0);
    // Mode of the binomial weights; terms far from it are negligible.
    let mode = (s * nf).round() as i64;
    let mut total = 0.0;
    let visit = |i: usize| -> f64 {
        let fi = i as f64;
        let lw = lg_n
            - statrs::function::gamma::ln_gamma(fi + 1.0)
            - statrs::function::gamma::ln_gamma(nf - fi + 1.0)
            + fi * ls
            + (nf - fi) * l1s;
        lw
    };
    let mut i = mode.clamp(0, n as i64) as usize;
    loop {
        let lw = visit(i);
        total += values[i] * lw.exp();
        if lw < -745.0 || i == 0 {
            break;
        }
        i -= 1;
    }
    let mut i = mode.clamp(0, n as i64) as usize + 1;
    while i <= n {
        let lw = visit(i);
        total += values[i] * lw.exp();
        if lw < -745.0 {
            break;
        }
        i += 1;
    }
    total
}

fn bernstein_to_monomial(values: &[f64], meta: BernsteinMeta) -> Vec<f64> {
    // p(t) - f(0) = (2r)^-n sum_i C(n,i) g_i (t + r)^i (r - t)^(n-i).
    let n = values.len() - 1;
    let r = meta.r;
    let mut out = vec![0.0; n + 1];
    for (i, g) in values.iter().enumerate() {
        if *g == 0.0 {
            continue;
        }
        let plus = binomial_expand(r, i);
        let minus = binomial_expand(-r, n - i);
        let sign = if (n - i) % 2 == 0 { 1.0 } else { -1.0 };
        let scale = sign * binom_f64(n, i) * g;
        for (a, pa) in plus.iter().enumerate() {
            for (b, pb) in minus.iter().enumerate() {
                out[a + b] += scale * pa * pb;
            }
        }
    }
    let norm = (2.0 * r).powi(n as i32);
    for c in out.iter_mut() {
        *c /= norm;
    }
    out[0] += meta.f0;
    out
}

// Coefficients of (t + c)^m in increasing degree.
fn binomial_expand(c: f64, m: usize) -> Vec<f64> {
    (0..=m)
        .map(|k| binom_f64(m, k) * c.powi((m - k) as i32))
        .collect()
}

fn binom_f64(n: usize, k: usize) -> f64 {
    ln_binom(n as f64, k as f64).exp().round()
}

/// Bernstein degree `ceil(4^(1/alpha) r^alpha / eps^(1 + 2/alpha))`.
pub fn bernstein_degree(r: f64, alpha: f64, eps: f64) -> Result<usize, ApproxError> {
    check_holder(alpha, eps)?;
    let ln_n = (1.0 / alpha) * 4f64.ln() + alpha * r.ln() - (1.0 + 2.0 / alpha) * eps.ln();
    let n = ln_n.exp();
    if !n.is_finite() || n > 1e9 {
        return Err(ApproxError::Domain(format!(
            "Bernstein degree {n:e} is out of range"
        )));
    }
    Ok(degree_ceil(n))
}

// Ceiling that ignores sub-ulp noise from the log-space evaluation.
fn degree_ceil(x: f64) -> usize {
    let rounded = x.round();
    if (x - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded.max(1.0) as usize
    } else {
        x.ceil().max(1.0) as usize
    }
}

fn check_holder(alpha: f64, eps: f64) -> Result<(), ApproxError> {
    if !(eps > 0.0) {
        return Err(ApproxError::Domain(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(ApproxError::Domain(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    Ok(())
}

/// Bernstein approximation of a `(1, alpha)`-Hölder `f` on `[-r, r]` with the
/// degree prescribed by [`bernstein_degree`].
pub fn bernstein_poly<F: Fn(f64) -> f64>(
    f: F,
    r: f64,
    alpha: f64,
    eps: f64,
) -> Result<UniPoly, ApproxError> {
    let n = bernstein_degree(r, alpha, eps)?;
    bernstein_with_degree(f, r, alpha, n)
}

/// Bernstein sum of fixed degree `n` (used when a caller prescribes `n`).
pub fn bernstein_with_degree<F: Fn(f64) -> f64>(
    f: F,
    r: f64,
    alpha: f64,
    n: usize,
) -> Result<UniPoly, ApproxError> {
    if !(r > 0.0) || n == 0 {
        return Err(ApproxError::Domain("need r > 0 and degree >= 1".into()));
    }
    check_holder(alpha, 1.0)?;
    let f0 = f(0.0);
    if !f0.is_finite() {
        return Err(ApproxError::NonFinite(0.0));
    }
    let mut values = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = r * (2.0 * i as f64 / n as f64 - 1.0);
        let v = f(t);
        if !v.is_finite() {
            return Err(ApproxError::NonFinite(t));
        }
        values.push(v - f0);
    }
    Ok(UniPoly {
        repr: PolyRepr::Bernstein { values },
        bernstein: Some(BernsteinMeta { r, alpha, f0 }),
    })
}

/// Chebyshev interpolant with its measured sup error.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebApprox {
    pub poly: UniPoly,
    /// Coefficients in the Chebyshev basis of the rescaled variable.
    pub cheb_coeffs: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
    /// Max of `|f - poly|` over a 4097-point grid and the Chebyshev extrema.
    pub sup_error: f64,
}

/// Jackson budget `6 omega((b - a) / (2n))`.
pub fn jackson_budget<W: Fn(f64) -> f64>(modulus: W, a: f64, b: f64, n: usize) -> f64 {
    6.0 * modulus((b - a) / (2.0 * n.max(1) as f64))
}

/// Degree-`n` interpolant at Chebyshev points of the first kind on `[a, b]`,
/// converted to the monomial basis in `t`.
pub fn cheb_near_minimax<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    n: i64,
) -> Result<ChebApprox, ApproxError> {
    if n < 0 {
        return Err(ApproxError::Domain(format!(
            "degree must be non-negative, got {n}"
        )));
    }
    if !(b > a) {
        return Err(ApproxError::Domain("need a < b".into()));
    }
    let n = n as usize;
    let m = n + 1;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut vals = Vec::with_capacity(m);
    for j in 0..m {
        let u = ((2 * j + 1) as f64 * PI / (2 * m) as f64).cos();
        let t = mid + half * u;
        let v = f(t);
        if !v.is_finite() {
            return Err(ApproxError::NonFinite(t));
        }
        vals.push(v);
    }
    let cheb: Vec<f64> = (0..m)
        .map(|k| {
            let s: f64 = vals
                .iter()
                .enumerate()
                .map(|(j, v)| v * (k as f64 * (2 * j + 1) as f64 * PI / (2 * m) as f64).cos())
                .sum();
            s * if k == 0 { 1.0 } else { 2.0 } / m as f64
        })
        .collect();
    // Chebyshev -> monomial in u, then substitute u = (t - mid) / half.
    let mut in_u = vec![0.0; m];
    let mut t_prev = vec![1.0];
    let mut t_cur = vec![0.0, 1.0];
    for (k, c) in cheb.iter().enumerate() {
        let tk: &[f64] = match k {
            0 => &t_prev,
            _ => &t_cur,
        };
        for (i, v) in tk.iter().enumerate() {
            in_u[i] += c * v;
        }
        if k >= 1 {
            let mut next = vec![0.0; k + 2];
            for (i, v) in t_cur.iter().enumerate() {
                next[i + 1] += 2.0 * v;
            }
            for (i, v) in t_prev.iter().enumerate() {
                next[i] -= v;
            }
            t_prev = std::mem::replace(&mut t_cur, next);
        }
    }
    let mut in_t = vec![0.0; m];
    for (j, c) in in_u.iter().enumerate() {
        // c * ((t - mid)/half)^j
        let scale = c / half.powi(j as i32);
        for (i, e) in binomial_expand(-mid, j).iter().enumerate() {
            in_t[i] += scale * e;
        }
    }
    let poly = UniPoly::monomial(in_t);
    let mut sup_error: f64 = 0.0;
    let grid = 4096;
    for i in 0..=grid {
        let t = a + (b - a) * i as f64 / grid as f64;
        sup_error = sup_error.max((f(t) - poly.eval(t)).abs());
    }
    for j in 0..=m {
        let t = mid + half * (j as f64 * PI / m as f64).cos();
        sup_error = sup_error.max((f(t) - poly.eval(t)).abs());
    }
    Ok(ChebApprox {
        poly,
        cheb_coeffs: cheb,
        lo: a,
        hi: b,
        sup_error,
    })
}
