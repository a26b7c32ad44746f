//! Fourier-side lower-bound machinery for windowed oscillatory targets
//! `f(x) = exp(2 pi i r (v . x + w . relu(x)))` under a product window.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

use crate::numeric::{integrate, split_seed};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SpectralError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("window is not usable: {0}")]
    Window(String),
    #[error("quadrature did not converge (achieved error {0:e})")]
    Quadrature(f64),
}

type Result<T> = std::result::Result<T, SpectralError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindowKind {
    /// `sqrt(3/(2K)) K sinc^2(pi K x)`, band limit `K`.
    Sinc2 { band: f64 },
    /// `sqrt(315/151) sinc^4(pi x)`, band limit 2.
    Sinc4,
    /// `sinc(pi x)`: unit L2 norm, not integrable.
    Sinc,
    /// Declared norms only.
    Custom { band: f64, l1: f64, l2: f64 },
}

/// Even, unit-L2 profile with compactly supported Fourier transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub kind: WindowKind,
}

const SINC4_C2: f64 = 315.0 / 151.0;

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

impl Window {
    pub fn sinc2() -> Self {
        Self {
            kind: WindowKind::Sinc2 { band: 1.0 },
        }
    }

    pub fn sinc2_band(band: f64) -> Result<Self> {
        if !(band > 0.0) {
            return Err(SpectralError::Domain(format!(
                "band limit must be positive, got {band}"
            )));
        }
        Ok(Self {
            kind: WindowKind::Sinc2 { band },
        })
    }

    pub fn sinc4() -> Self {
        Self {
            kind: WindowKind::Sinc4,
        }
    }

    pub fn sinc() -> Self {
        Self {
            kind: WindowKind::Sinc,
        }
    }

    pub fn custom(band: f64, l1: f64, l2: f64) -> Self {
        Self {
            kind: WindowKind::Custom { band, l1, l2 },
        }
    }

    pub fn tag(&self) -> &'static str {
        match self.kind {
            WindowKind::Sinc2 { .. } => "sinc2",
            WindowKind::Sinc4 => "sinc4",
            WindowKind::Sinc => "sinc",
            WindowKind::Custom { .. } => "custom",
        }
    }

    /// Band limit `K`.
    pub fn band(&self) -> f64 {
        match self.kind {
            WindowKind::Sinc2 { band } => band,
            WindowKind::Sinc4 => 2.0,
            WindowKind::Sinc => 0.5,
            WindowKind::Custom { band, .. } => band,
        }
    }

    /// Closed-form `||psi||_1` (infinite for the sinc profile).
    pub fn l1_norm(&self) -> f64 {
        match self.kind {
            WindowKind::Sinc2 { band } => (1.5 / band).sqrt(),
            WindowKind::Sinc4 => SINC4_C2.sqrt() * 2.0 / 3.0,
            WindowKind::Sinc => f64::INFINITY,
            WindowKind::Custom { l1, .. } => l1,
        }
    }

    pub fn l2_norm(&self) -> f64 {
        match self.kind {
            WindowKind::Custom { l2, .. } => l2,
            _ => 1.0,
        }
    }

    pub fn psi(&self, x: f64) -> Option<f64> {
        match self.kind {
            WindowKind::Sinc2 { band } => Some((1.5 * band).sqrt() * sinc(PI * band * x).powi(2)),
            WindowKind::Sinc4 => Some(SINC4_C2.sqrt() * sinc(PI * x).powi(4)),
            WindowKind::Sinc => Some(sinc(PI * x)),
            WindowKind::Custom { .. } => None,
        }
    }

    /// `sup_x 2 x^2 psi(x)^2`, the smallest `alpha` with
    /// `psi(x)^2 <= alpha / (2 x^2)`, from a grid on `[0, 64]` (the built-in
    /// profiles decay monotonically in envelope beyond it).
    pub fn decay_alpha(&self) -> Option<f64> {
        const CELLS: usize = 1 << 16;
        let h = 64.0 / CELLS as f64;
        (1..=CELLS)
            .map(|i| {
                let x = h * i as f64;
                self.psi(x).map(|p| 2.0 * x * x * p * p)
            })
            .try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))
    }

    /// `psi_hat(s) = int psi(x) exp(-2 pi i s x) dx`, real and even.
    pub fn psi_hat(&self, s: f64) -> Option<f64> {
        let a = s.abs();
        match self.kind {
            WindowKind::Sinc2 { band } => Some((1.5 / band).sqrt() * (1.0 - a / band).max(0.0)),
            WindowKind::Sinc4 => {
                let tri2 = if a <= 1.0 {
                    2.0 / 3.0 - a * a + a * a * a / 2.0
                } else if a <= 2.0 {
                    (2.0 - a).powi(3) / 6.0
                } else {
                    0.0
                };
                Some(SINC4_C2.sqrt() * tri2)
            }
            WindowKind::Sinc => Some(if a < 0.5 {
                1.0
            } else if a == 0.5 {
                0.5
            } else {
                0.0
            }),
            WindowKind::Custom { .. } => None,
        }
    }

    // Points where psi_hat is not smooth.
    fn kinks(&self) -> Vec<f64> {
        let k = self.band();
        match self.kind {
            WindowKind::Sinc4 => vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            _ => vec![-k, 0.0, k],
        }
    }

    /// Numerical `||psi||_1` with a check that dyadic shells shrink.
    /// Returns `None` when the shells do not decay (non-integrable profile).
    pub fn l1_norm_numeric(&self) -> Option<f64> {
        self.psi(0.0)?;
        let psi = |x: f64| self.psi(x).unwrap().abs();
        // Zeros of the sinc family sit on a lattice of spacing 1/K or 1.
        let step = match self.kind {
            WindowKind::Sinc2 { band } => 1.0 / band,
            _ => 1.0,
        };
        let panel_sum = |lo: f64, hi: f64| -> f64 {
            let n = ((hi - lo) / step).round().max(1.0) as usize;
            (0..n)
                .map(|i| {
                    let a = lo + (hi - lo) * i as f64 / n as f64;
                    let b = lo + (hi - lo) * (i + 1) as f64 / n as f64;
                    integrate(psi, a, b, 1e-13).value
                })
                .sum()
        };
        let base = 8.0 * step;
        let mut total = panel_sum(0.0, base);
        let mut shells = Vec::new();
        let mut lo = base;
        for _ in 0..7 {
            let s = panel_sum(lo, 2.0 * lo);
            shells.push(s);
            total += s;
            lo *= 2.0;
        }
        let first = shells[0];
        let last = *shells.last().unwrap();
        if last > 0.25 * first {
            return None;
        }
        // Remaining tail of an x^-2 profile continues the geometric decay.
        let ratio = last / shells[shells.len() - 2];
        total += last * ratio / (1.0 - ratio);
        Some(2.0 * total)
    }

    /// `||psi||_2^2` via Plancherel on the compact spectrum.
    pub fn l2_norm_numeric(&self) -> Option<f64> {
        self.psi_hat(0.0)?;
        let mut cuts = self.kinks();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let sq: f64 = cuts
            .windows(2)
            .map(|w| integrate(|s| self.psi_hat(s).unwrap().powi(2), w[0], w[1], 1e-15).value)
            .sum();
        Some(sq.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    /// `sqrt(2/K) - ||psi||_1`; absent when `psi` is not integrable.
    pub margin: Option<f64>,
    pub reason: String,
}

/// `||psi||_1 < sqrt(2/K)`.
pub fn admissibility(window: &Window) -> Admissibility {
    let k = window.band();
    let l1 = match window.kind {
        WindowKind::Custom { l1, .. } => Some(l1),
        _ => window.l1_norm_numeric().map(|_| window.l1_norm()),
    };
    match l1 {
        None => Admissibility {
            admissible: false,
            margin: None,
            reason: "psi is not in L1".into(),
        },
        Some(l1) => {
            let margin = (2.0 / k).sqrt() - l1;
            if (window.l2_norm() - 1.0).abs() > 1e-8 {
                return Admissibility {
                    admissible: false,
                    margin: Some(margin),
                    reason: "psi does not have unit L2 norm".into(),
                };
            }
            let admissible = margin > 0.0;
            let reason = if admissible {
                "ok".to_string()
            } else {
                "||psi||_1 >= sqrt(2/K)".to_string()
            };
            Admissibility {
                admissible,
                margin: Some(margin),
                reason,
            }
        }
    }
}

fn require_spectrum(window: &Window) -> Result<()> {
    match window.kind {
        WindowKind::Custom { .. } => Err(SpectralError::Window(
            "custom windows carry no spectrum".into(),
        )),
        WindowKind::Sinc => Err(SpectralError::Window("psi is not in L1".into())),
        _ => Ok(()),
    }
}

/// `p.v. int psi_hat(s) / (t - s) ds`.
fn hilbert(window: &Window, t: f64) -> Result<f64> {
    let k = window.band();
    let ph = |s: f64| window.psi_hat(s).unwrap();
    let mut cuts = window.kinks();
    let inside = t.abs() < k;
    if inside {
        cuts.push(t);
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let pt = ph(t);
    let mut total = 0.0;
    let mut err = 0.0;
    let mut ok = true;
    for w in cuts.windows(2) {
        let q = if inside {
            integrate(
                |s| if s == t { 0.0 } else { (ph(s) - pt) / (t - s) },
                w[0],
                w[1],
                1e-13,
            )
        } else {
            integrate(
                |s| if s == t { 0.0 } else { ph(s) / (t - s) },
                w[0],
                w[1],
                1e-13,
            )
        };
        total += q.value;
        err += q.error;
        ok &= q.converged;
    }
    if !ok && err > 1e-9 {
        return Err(SpectralError::Quadrature(err));
    }
    if inside {
        total += pt * ((t + k) / (k - t)).ln();
    }
    Ok(total)
}

/// `F(t) = int 1{e x > 0} exp(2 pi i t x) psi(x) dx` for `e = +1` (`positive`) or `-1`.
pub fn coord_factor(window: &Window, positive: bool, t: f64) -> Result<Complex64> {
    require_spectrum(window)?;
    if !t.is_finite() {
        return Err(SpectralError::Domain("frequency must be finite".into()));
    }
    // Negative half-line: substitute x -> -x.
    let t = if positive { t } else { -t };
    let h = hilbert(window, t)?;
    Ok(Complex64::new(
        0.5 * window.psi_hat(t).unwrap(),
        h / (2.0 * PI),
    ))
}

/// `(||psi||_1 / 2) min(1, 2K / (pi (|t| - K)_+))`.
pub fn coord_factor_bound(window: &Window, t: f64) -> f64 {
    0.5 * window.l1_norm() * envelope_factor(window.band(), t)
}

fn envelope_factor(k: f64, t: f64) -> f64 {
    let gap = t.abs() - k;
    if gap <= 0.0 {
        1.0
    } else {
        (2.0 * k / (PI * gap)).min(1.0)
    }
}

/// Oscillatory target `exp(2 pi i r (v . x + w . relu(x)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillatoryTarget {
    pub r: f64,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    1.0
}

/// Subsets of `[d]` as bit masks; only the first 64 coordinates are addressable.
pub type Subset = u64;

fn contains(s: Subset, j: usize) -> bool {
    j < Subset::BITS as usize && s >> j & 1 == 1
}

impl OscillatoryTarget {
    pub fn new(r: f64, v: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if v.len() != w.len() || v.is_empty() {
            return Err(SpectralError::Domain(
                "v and w need equal, nonzero length".into(),
            ));
        }
        if !r.is_finite() || v.iter().chain(&w).any(|x| !x.is_finite()) {
            return Err(SpectralError::Domain("r, v and w must be finite".into()));
        }
        Ok(Self {
            r,
            v,
            w,
            gamma: 1.0,
        })
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// Target with `r = d^2`, `w = 1`, `v = 0`.
    pub fn example_one(d: usize) -> Self {
        Self {
            r: (d * d) as f64,
            v: vec![0.0; d],
            w: vec![1.0; d],
            gamma: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let phase: f64 = self
            .v
            .iter()
            .zip(&self.w)
            .zip(x)
            .map(|((v, w), x)| v * x + w * x.max(0.0))
            .sum();
        Complex64::from_polar(1.0, 2.0 * PI * self.r * phase)
    }

    /// `tau = sup_S ||v + I_S w||_inf`.
    pub fn tau(&self) -> f64 {
        self.v
            .iter()
            .zip(&self.w)
            .map(|(v, w)| v.abs().max((v + w).abs()))
            .fold(0.0, f64::max)
    }

    fn in_omega(&self, w: f64) -> bool {
        self.r * w.abs() >= self.gamma * (self.dim() * self.dim()) as f64
    }

    /// `Omega = {j : r |w_j| >= gamma d^2}` as a mask; coordinates past the
    /// mask width (`d > 64`) are left out.
    pub fn omega(&self) -> Subset {
        self.w
            .iter()
            .take(Subset::BITS as usize)
            .enumerate()
            .filter(|(_, w)| self.in_omega(**w))
            .fold(0, |m, (j, _)| m | 1 << j)
    }

    /// `|Omega| / d`.
    pub fn eta(&self) -> f64 {
        self.w.iter().filter(|w| self.in_omega(**w)).count() as f64 / self.dim() as f64
    }

    /// `xi_S = r (v + I_S w)`.
    pub fn xi(&self, s: Subset) -> Vec<f64> {
        self.v
            .iter()
            .zip(&self.w)
            .enumerate()
            .map(|(j, (v, w))| self.r * if contains(s, j) { v + w } else { *v })
            .collect()
    }
}

/// Envelope `D(xi) = sum_S prod_j min(1, 2K / (pi (|xi_j - xi_{S,j}| - K)_+))`,
/// summed coordinate-wise since each `xi_{S,j}` takes two values.
pub fn envelope_d(target: &OscillatoryTarget, window: &Window, xi: &[f64]) -> Result<f64> {
    check_xi(target, xi)?;
    let k = window.band();
    Ok((0..target.dim())
        .map(|j| {
            let out = target.r * target.v[j];
            let inn = target.r * (target.v[j] + target.w[j]);
            envelope_factor(k, xi[j] - out) + envelope_factor(k, xi[j] - inn)
        })
        .product())
}

fn check_xi(target: &OscillatoryTarget, xi: &[f64]) -> Result<()> {
    if xi.len() != target.dim() {
        return Err(SpectralError::Domain(format!(
            "xi has length {}, expected {}",
            xi.len(),
            target.dim()
        )));
    }
    Ok(())
}

/// `int f(x) phi(x) exp(-2 pi i xi . x) dx`
/// `= prod_j (F_-(xi_{out,j} - xi_j) + F_+(xi_{in,j} - xi_j))`.
pub fn numeric_f(target: &OscillatoryTarget, window: &Window, xi: &[f64]) -> Result<Complex64> {
    check_xi(target, xi)?;
    let mut acc = Complex64::new(1.0, 0.0);
    for j in 0..target.dim() {
        let out = target.r * target.v[j] - xi[j];
        let inn = target.r * (target.v[j] + target.w[j]) - xi[j];
        acc *= coord_factor(window, false, out)? + coord_factor(window, true, inn)?;
    }
    Ok(acc)
}

/// `C_{K,gamma} = 2 exp(sqrt(8K / (pi gamma)))`.
pub fn c_k_gamma(k: f64, gamma: f64) -> f64 {
    2.0 * (8.0 * k / (PI * gamma)).sqrt().exp()
}

/// `D_{K,gamma} = 32 exp(2 + sqrt(8K / (pi gamma))) (pi^-2 + K^-1)`.
pub fn d_k_gamma(k: f64, gamma: f64) -> f64 {
    32.0 * (2.0 + (8.0 * k / (PI * gamma)).sqrt()).exp() * (1.0 / (PI * PI) + 1.0 / k)
}

/// Number of coordinates where `xi_S` and `xi_S'` differ by at least `gamma d^2`.
pub fn hamming_count(target: &OscillatoryTarget, s: Subset, s2: Subset) -> usize {
    let thr = target.gamma * (target.dim() * target.dim()) as f64;
    target
        .xi(s)
        .iter()
        .zip(target.xi(s2))
        .filter(|(a, b)| (*a - b).abs() >= thr)
        .count()
}

/// Hamming distance of `S cap Omega` and `S' cap Omega`.
pub fn omega_hamming(target: &OscillatoryTarget, s: Subset, s2: Subset) -> usize {
    let om = target.omega();
    ((s & om) ^ (s2 & om)).count_ones() as usize
}

/// Whether `xi` lies in the l_inf tube of radius `k` around the ray through `nu`.
pub fn in_tube(nu: &[f64], k: f64, xi: &[f64]) -> bool {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (n, x) in nu.iter().zip(xi) {
        if *n == 0.0 {
            if x.abs() > k {
                return false;
            }
        } else {
            let (a, b) = ((x - k) / n, (x + k) / n);
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
    }
    lo <= hi
}

/// `8 e^2 (d - 1) (K + R) (2K)^(d-1)`.
pub fn tube_volume_bound(k: f64, r: f64, d: usize) -> f64 {
    8.0 * E * E * (d as f64 - 1.0) * (k + r) * (2.0 * k).powi(d as i32 - 1)
}

/// Monte Carlo volume of the tube inside `[-R, R]^d`, with its standard error.
pub fn tube_volume_mc(nu: &[f64], k: f64, r: f64, samples: usize, seed: u64) -> (f64, f64) {
    let d = nu.len();
    let chunks = 64usize;
    let per = samples.div_ceil(chunks);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, c as u64));
            let n = per.min(samples.saturating_sub(c * per));
            let mut xi = vec![0.0; d];
            (0..n)
                .filter(|_| {
                    xi.iter_mut().for_each(|v| *v = rng.random_range(-r..r));
                    in_tube(nu, k, &xi)
                })
                .count()
        })
        .sum();
    let cube = (2.0 * r).powi(d as i32);
    let p = hits as f64 / samples as f64;
    (p * cube, (p * (1.0 - p) / samples as f64).sqrt() * cube)
}

/// Lower bound on the approximation error by `N`-unit one-hidden-layer nets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaCertificate {
    pub d: usize,
    pub n_units: f64,
    /// `||psi||_1^2 2^(1 - 2 eta) K`.
    pub alpha: f64,
    pub eta: f64,
    pub tau: f64,
    pub c_k_gamma: f64,
    pub d_k_gamma: f64,
    pub kappa_sq: f64,
    pub lower_bound: f64,
    pub vacuous: bool,
    pub reasons: Vec<String>,
}

/// `kappa^2 = D_{K,gamma} d tau r alpha^d`, bound `max(0, 1 - N kappa^2)`.
pub fn kappa_certificate(
    window: &Window,
    target: &OscillatoryTarget,
    n_units: f64,
) -> Result<KappaCertificate> {
    let adm = admissibility(window);
    if adm.margin.is_none() {
        return Err(SpectralError::Window(adm.reason));
    }
    let d = target.dim();
    let k = window.band();
    let eta = target.eta();
    let tau = target.tau();
    let l1 = window.l1_norm();
    let alpha = l1 * l1 * 2f64.powf(1.0 - 2.0 * eta) * k;
    let dk = d_k_gamma(k, target.gamma);
    let ln_kappa = dk.ln() + (d as f64).ln() + (tau * target.r).ln() + d as f64 * alpha.ln();
    let kappa_sq = ln_kappa.exp();
    let mut reasons = Vec::new();
    if !adm.admissible {
        reasons.push(format!("window not admissible: {}", adm.reason));
    }
    if alpha >= 1.0 {
        reasons.push(format!("alpha = {alpha} >= 1"));
    }
    if tau * target.r < 1f64.max(10.0 * k) {
        reasons.push(format!("tau r = {} below max(1, 10K)", tau * target.r));
    }
    if (d as f64) <= 2.0 * (k / target.gamma).sqrt() {
        reasons.push("d <= 2 sqrt(K / gamma)".into());
    }
    Ok(KappaCertificate {
        d,
        n_units,
        alpha,
        eta,
        tau,
        c_k_gamma: c_k_gamma(k, target.gamma),
        d_k_gamma: dk,
        kappa_sq,
        lower_bound: (1.0 - n_units * kappa_sq).max(0.0),
        vacuous: !reasons.is_empty(),
        reasons,
    })
}

/// Worked-example form `1 - 1300 N d^2 0.75^d` (not clipped).
pub fn example_one_bound(d: usize, n_units: f64) -> f64 {
    let df = d as f64;
    1.0 - 1300.0 * n_units * df * df * 0.75f64.powf(df)
}

/// Worked-example threshold `1.3^d / (10^4 d^3)`.
pub fn example_one_threshold(d: usize) -> f64 {
    let df = d as f64;
    (df * 1.3f64.ln() - 4.0 * 10f64.ln() - 3.0 * df.ln()).exp()
}
