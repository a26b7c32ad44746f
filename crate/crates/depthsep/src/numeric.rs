//! Shared numerical kernels: Gauss rules, adaptive quadrature, Halton points,
//! log-space combinatorics and deterministic seed splitting.

use statrs::function::gamma::ln_gamma;

/// Gauss rule on `[-1, 1]` for the Jacobi weight `(1-t)^a (1+t)^b`.
///
/// Nodes are eigenvalues of the Jacobi matrix (implicit QL), polished by
/// Newton steps on the orthonormal recurrence; weights come from the
/// Christoffel function, so they sum to the weight's total mass.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_jacobi needs at least one node");
    assert!(a > -1.0 && b > -1.0, "Jacobi exponents must exceed -1");
    let (alpha, beta) = jacobi_recurrence(n + 1, a, b);
    let mut diag: Vec<f64> = alpha[..n].to_vec();
    let mut off: Vec<f64> = (0..n)
        .map(|k| if k + 1 < n { beta[k + 1].sqrt() } else { 0.0 })
        .collect();
    tridiagonal_eigenvalues(&mut diag, &mut off);
    diag.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let mass = jacobi_mass(a, b);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &x0 in &diag {
        let mut x = x0;
        for _ in 0..3 {
            let (p, dp, _) = orthonormal_eval(&alpha, &beta, mass, n, x);
            if dp == 0.0 {
                break;
            }
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, _, christoffel) = orthonormal_eval(&alpha, &beta, mass, n, x);
        nodes.push(x);
        weights.push(1.0 / christoffel);
    }
    (nodes, weights)
}

/// Gauss-Legendre rule on `[lo, hi]`.
pub fn gauss_legendre(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_jacobi(n, 0.0, 0.0);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|v| v * half).collect(),
    )
}

/// Total mass of `(1-t)^a (1+t)^b` on `[-1, 1]`.
pub fn jacobi_mass(a: f64, b: f64) -> f64 {
    ((a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
        - ln_gamma(a + b + 2.0))
    .exp()
}

// Monic recurrence p_{k+1} = (t - alpha_k) p_k - beta_k p_{k-1}.
fn jacobi_recurrence(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        alpha[k] = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        if k == 0 {
            beta[0] = jacobi_mass(a, b);
        } else if k == 1 {
            beta[1] = 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b).powi(2) * (3.0 + a + b));
        } else {
            beta[k] =
                4.0 * kf * (kf + a) * (kf + b) * (kf + a + b) / (s * s * (s + 1.0) * (s - 1.0));
        }
    }
    (alpha, beta)
}

// Returns (p_n, p_n', sum_{k<n} p_k^2) for the orthonormal family.
fn orthonormal_eval(alpha: &[f64], beta: &[f64], mass: f64, n: usize, x: f64) -> (f64, f64, f64) {
    let mut p_prev = 0.0;
    let mut p = 1.0 / mass.sqrt();
    let mut dp_prev = 0.0;
    let mut dp = 0.0;
    let mut sum = 0.0;
    for k in 0..n {
        sum += p * p;
        let next_b = beta[k + 1].sqrt();
        let cur_b = if k == 0 { 0.0 } else { beta[k].sqrt() };
        let p_next = ((x - alpha[k]) * p - cur_b * p_prev) / next_b;
        let dp_next = (p + (x - alpha[k]) * dp - cur_b * dp_prev) / next_b;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
    }
    (p, dp, sum)
}

// Eigenvalues of a symmetric tridiagonal matrix (implicit QL with shifts).
// `diag` is overwritten with the eigenvalues; `off[i]` couples i and i+1.
fn tridiagonal_eigenvalues(diag: &mut [f64], off: &mut [f64]) {
    let n = diag.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 200, "tridiagonal QL failed to converge");
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
            }
            if early {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
}

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut kron = fc * GK_WK[7];
    let mut gauss = fc * GK_WG[3];
    for j in 0..7 {
        let x = h * GK_NODES[j];
        let s = f(c - x) + f(c + x);
        kron += GK_WK[j] * s;
        if j % 2 == 1 {
            gauss += GK_WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) on a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, abs_tol: f64) -> Quadrature {
    let mut stack = vec![(lo, hi, abs_tol, 0u32)];
    let mut value = 0.0;
    let mut error = 0.0;
    let mut converged = true;
    while let Some((a, b, tol, depth)) = stack.pop() {
        let (v, e) = gk15(&f, a, b);
        if e <= tol.max(1e-15 * v.abs()) || depth >= 48 {
            if e > tol.max(1e-15 * v.abs()) {
                converged = false;
            }
            value += v;
            error += e;
        } else {
            let m = 0.5 * (a + b);
            stack.push((m, b, 0.5 * tol, depth + 1));
            stack.push((a, m, 0.5 * tol, depth + 1));
        }
    }
    Quadrature {
        value,
        error,
        converged,
    }
}

/// First primes, used as Halton bases.
const PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// The `index`-th point (1-based internally, so no point sits on the origin)
/// of the Halton sequence in `[0,1)^dim`.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(
        dim <= PRIMES.len(),
        "halton supports up to {} dimensions",
        PRIMES.len()
    );
    (0..dim)
        .map(|j| radical_inverse(index + 1, PRIMES[j] as u64))
        .collect()
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// `ln C(n, k)` through log-gamma.
pub fn ln_binom(n: f64, k: f64) -> f64 {
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

/// Exact binomial coefficient saturating at `u128::MAX`.
pub fn binom_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        let num = (n - i) as u128;
        let den = (i + 1) as u128;
        // acc * num / den stays exact because acc * num is divisible by den.
        match acc.checked_mul(num) {
            Some(v) => acc = v / den,
            None => return u128::MAX,
        }
    }
    acc
}

/// SplitMix64 finalizer: derives independent stream seeds from a root seed.
pub fn split_seed(root: u64, stream: u64) -> u64 {
    let mut z = root.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
