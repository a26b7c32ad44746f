//! Zonal harmonic analysis on the unit sphere: Gegenbauer polynomials,
//! harmonic dimensions, the projected measure `mu_d`, Funk-Hecke and
//! Blaschke-Levy coefficients, gamma_1 bounds, spread frames and atom
//! sampling of `|w . x|` mixtures.

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

use crate::netir::{Activation, Layer, LayeredNet};
use crate::numeric::{binom_u128, gauss_jacobi, gauss_legendre, jacobi_mass, split_seed};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SphereError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Capability(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

type Result<T> = std::result::Result<T, SphereError>;

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(SphereError::Domain(format!(
            "sphere dimension must be at least 2, got {d}"
        )))
    } else {
        Ok(())
    }
}

/// `N_k^d`, exact when it fits in `u128`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicDim {
    pub exact: Option<u128>,
    pub ln: f64,
}

impl HarmonicDim {
    pub fn value(&self) -> f64 {
        self.exact
            .map(|v| v as f64)
            .unwrap_or_else(|| self.ln.exp())
    }
}

pub fn harmonic_dim(d: usize, k: usize) -> Result<HarmonicDim> {
    check_dim(d)?;
    let (df, kf) = (d as f64, k as f64);
    let exact = match k {
        0 => Some(1),
        1 => Some(d as u128),
        _ => {
            let a = binom_u128((k + d - 1) as u64, (d - 1) as u64);
            let b = binom_u128((k + d - 3) as u64, (d - 1) as u64);
            (a != u128::MAX).then(|| a - b)
        }
    };
    let ln = match (d, k) {
        (_, 0) => 0.0,
        (2, _) => 2f64.ln(),
        _ => {
            (2.0 * kf + df - 2.0).ln() + ln_gamma(kf + df - 2.0)
                - ln_gamma(kf + 1.0)
                - ln_gamma(df - 1.0)
        }
    };
    Ok(HarmonicDim { exact, ln })
}

/// `P_k^d(t)` normalized by `P_k^d(1) = 1`.
pub fn gegenbauer(d: usize, k: usize, t: f64) -> Result<f64> {
    check_dim(d)?;
    if !(t.abs() <= 1.0) {
        return Err(SphereError::Domain(format!(
            "argument {t} lies outside [-1, 1]"
        )));
    }
    Ok(gegenbauer_unchecked(d, k, t))
}

pub(crate) fn gegenbauer_unchecked(d: usize, k: usize, t: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let dm2 = d as f64 - 2.0;
    let (mut prev, mut cur) = (1.0, t);
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + dm2) * t * cur - jf * prev) / (jf + dm2);
        prev = cur;
        cur = next;
    }
    cur
}

/// `P_0^d(t), ..., P_kmax^d(t)`.
pub fn gegenbauer_all(d: usize, kmax: usize, t: f64) -> Vec<f64> {
    let dm2 = d as f64 - 2.0;
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(1.0);
    if kmax >= 1 {
        out.push(t);
    }
    for j in 1..kmax {
        let jf = j as f64;
        out.push(((2.0 * jf + dm2) * t * out[j] - jf * out[j - 1]) / (jf + dm2));
    }
    out
}

/// `alpha_d = omega_{d-1} / omega_d`, the density constant of `mu_d`.
pub fn alpha_d(d: usize) -> f64 {
    let a = (d as f64 - 3.0) / 2.0;
    1.0 / jacobi_mass(a, a)
}

/// Gauss-Jacobi rule for `mu_d(dt) = alpha_d (1 - t^2)^((d-3)/2) dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct MuMeasure {
    pub d: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MuMeasure {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        check_dim(d)?;
        let a = (d as f64 - 3.0) / 2.0;
        let (nodes, w) = gauss_jacobi(n.max(1), a, a);
        let total: f64 = w.iter().sum();
        let weights = w.iter().map(|v| v / total).collect();
        Ok(Self { d, nodes, weights })
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * f(*t))
            .sum()
    }
}

/// `int f d mu_d`, split at interior `breaks` so that kinks of `f` fall on
/// panel ends. End panels absorb the endpoint singularity of the weight.
fn mu_integrate_split<F: Fn(f64) -> f64>(d: usize, breaks: &[f64], n: usize, f: &F) -> f64 {
    let a = (d as f64 - 3.0) / 2.0;
    let norm = alpha_d(d);
    let mut cuts = vec![-1.0];
    cuts.extend(breaks.iter().copied().filter(|b| b.abs() < 1.0));
    cuts.push(1.0);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    if cuts.len() == 2 {
        let (x, w) = gauss_jacobi(n, a, a);
        return norm * x.iter().zip(&w).map(|(t, v)| v * f(*t)).sum::<f64>();
    }
    let last = cuts.len() - 2;
    let mut total = 0.0;
    for (i, win) in cuts.windows(2).enumerate() {
        let (lo, hi) = (win[0], win[1]);
        let half = 0.5 * (hi - lo);
        total += if i == 0 {
            // t = lo + half (1 + u): (1 + t) = half (1 + u).
            let (x, w) = gauss_jacobi(n, 0.0, a);
            half.powf(a + 1.0)
                * x.iter()
                    .zip(&w)
                    .map(|(u, v)| {
                        let t = lo + half * (1.0 + u);
                        v * (1.0 - t).powf(a) * f(t)
                    })
                    .sum::<f64>()
        } else if i == last {
            let (x, w) = gauss_jacobi(n, a, 0.0);
            half.powf(a + 1.0)
                * x.iter()
                    .zip(&w)
                    .map(|(u, v)| {
                        let t = lo + half * (1.0 + u);
                        v * (1.0 + t).powf(a) * f(t)
                    })
                    .sum::<f64>()
        } else {
            let (x, w) = gauss_legendre(n, lo, hi);
            x.iter()
                .zip(&w)
                .map(|(t, v)| v * (1.0 - t * t).powf(a) * f(*t))
                .sum::<f64>()
        };
    }
    norm * total
}

/// Funk-Hecke coefficient with a convergence flag (`n` vs `2n` nodes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunkHecke {
    pub value: f64,
    pub converged: bool,
}

/// `lambda_k = <sigma, P_k^d>_{mu_d}`, split at `0` for kinked activations.
pub fn funk_hecke<F: Fn(f64) -> f64>(sigma: F, d: usize, k: usize) -> Result<FunkHecke> {
    check_dim(d)?;
    let g = |t: f64| sigma(t) * gegenbauer_unchecked(d, k, t);
    let n = k + 48;
    let coarse = mu_integrate_split(d, &[0.0], n, &g);
    let fine = mu_integrate_split(d, &[0.0], 2 * n, &g);
    let converged = (coarse - fine).abs() <= 1e-11 * (1.0 + fine.abs());
    Ok(FunkHecke {
        value: fine,
        converged,
    })
}

/// `sigma_k`, the eigenvalue of `f -> int |x . y| f(y)` on degree `k`.
pub fn blaschke_levy_sigma(d: usize, k: usize) -> Result<f64> {
    check_dim(d)?;
    if k % 2 == 1 {
        return Err(SphereError::Domain(format!(
            "sigma_k is defined for even k only, got {k}"
        )));
    }
    let (df, kf) = (d as f64, k as f64);
    if k == 0 {
        return Ok((ln_gamma(df / 2.0) - 0.5 * PI.ln() - ln_gamma((df + 1.0) / 2.0)).exp());
    }
    let sign = if (k / 2) % 2 == 1 { 1.0 } else { -1.0 };
    let ln = ln_gamma((kf - 1.0) / 2.0) + ln_gamma(df / 2.0) - ln_gamma((kf + df + 1.0) / 2.0);
    Ok(sign * ln.exp() / (2.0 * PI))
}

/// `|sigma_k|^-1 / (d^(3/4) k^2 sqrt(N_k^d))`, the constant of the decay rate.
pub fn sigma_decay_ratio(d: usize, k: usize) -> Result<f64> {
    let s = blaschke_levy_sigma(d, k)?;
    let n = harmonic_dim(d, k)?;
    Ok(1.0 / (s.abs() * (d as f64).powf(0.75) * (k as f64).powi(2) * (0.5 * n.ln).exp()))
}

/// `||P_k^d||_{mu_d, 1}`, integrated panel-wise between the roots of `P_k^d`.
pub fn gegenbauer_l1(d: usize, k: usize) -> Result<f64> {
    check_dim(d)?;
    if k == 0 {
        return Ok(1.0);
    }
    let a = (d as f64 - 3.0) / 2.0;
    let (roots, _) = gauss_jacobi(k, a, a);
    Ok(mu_integrate_split(d, &roots, 24, &|t| {
        gegenbauer_unchecked(d, k, t).abs()
    }))
}

pub fn sample_sphere<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            return g.into_iter().map(|v| v / n).collect();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(axis: &[f64]) -> Result<Vec<f64>> {
    let n = dot(axis, axis).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(SphereError::Degenerate(
            "axis must be a nonzero finite vector".into(),
        ));
    }
    Ok(axis.iter().map(|v| v / n).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonalTerm {
    pub k: usize,
    pub axis: Vec<f64>,
    pub coeff: f64,
}

/// `weight * |axis . x|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsAtom {
    pub axis: Vec<f64>,
    pub weight: f64,
}

/// `sum_i c_i P_{k_i}^d(w_i . x) + sum_j pi_j |a_j . x|` on the sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonalSeries {
    pub d: usize,
    pub terms: Vec<ZonalTerm>,
    pub abs_atoms: Vec<AbsAtom>,
}

/// Norms of one degree component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeNorms {
    pub k: usize,
    pub l2: f64,
    pub l1: f64,
    pub sup: f64,
    /// False when `l1` or `sup` come from sampling.
    pub exact: bool,
}

/// `E |a . x| |b . x|` for unit `a, b` and `x` uniform on the sphere.
pub fn abs_kernel(d: usize, a: &[f64], b: &[f64]) -> f64 {
    let rho = dot(a, b).clamp(-1.0, 1.0);
    2.0 / (PI * d as f64) * ((1.0 - rho * rho).sqrt() + rho * rho.asin())
}

impl ZonalSeries {
    pub fn new(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self {
            d,
            terms: Vec::new(),
            abs_atoms: Vec::new(),
        })
    }

    pub fn zonal(d: usize, k: usize, axis: &[f64], coeff: f64) -> Result<Self> {
        let mut s = Self::new(d)?;
        s.add_term(k, axis, coeff)?;
        Ok(s)
    }

    pub fn abs_ridge(d: usize, axis: &[f64]) -> Result<Self> {
        let mut s = Self::new(d)?;
        s.add_abs(axis, 1.0)?;
        Ok(s)
    }

    pub fn add_term(&mut self, k: usize, axis: &[f64], coeff: f64) -> Result<()> {
        self.check_axis(axis)?;
        self.terms.push(ZonalTerm {
            k,
            axis: unit(axis)?,
            coeff,
        });
        Ok(())
    }

    pub fn add_abs(&mut self, axis: &[f64], weight: f64) -> Result<()> {
        self.check_axis(axis)?;
        self.abs_atoms.push(AbsAtom {
            axis: unit(axis)?,
            weight,
        });
        Ok(())
    }

    fn check_axis(&self, axis: &[f64]) -> Result<()> {
        if axis.len() != self.d {
            return Err(SphereError::Domain(format!(
                "axis has length {}, expected {}",
                axis.len(),
                self.d
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let zonal: f64 = self
            .terms
            .iter()
            .map(|t| t.coeff * gegenbauer_unchecked(self.d, t.k, dot(&t.axis, x).clamp(-1.0, 1.0)))
            .sum();
        let ridge: f64 = self
            .abs_atoms
            .iter()
            .map(|a| a.weight * dot(&a.axis, x).abs())
            .sum();
        zonal + ridge
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut ks: Vec<usize> = self.terms.iter().map(|t| t.k).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }

    /// Exact `||f_k||_2^2` of the zonal terms of degree `k`, by the reproducing identity.
    pub fn degree_l2_sq(&self, k: usize) -> f64 {
        let ts: Vec<&ZonalTerm> = self.terms.iter().filter(|t| t.k == k).collect();
        if ts.is_empty() {
            return 0.0;
        }
        let n = harmonic_dim(self.d, k)
            .map(|h| h.value())
            .unwrap_or(f64::INFINITY);
        let mut s = 0.0;
        for a in &ts {
            for b in &ts {
                s += a.coeff
                    * b.coeff
                    * gegenbauer_unchecked(self.d, k, dot(&a.axis, &b.axis).clamp(-1.0, 1.0));
            }
        }
        (s / n).max(0.0)
    }

    /// Exact `||f||_2^2` including the `|a . x|` atoms.
    pub fn l2_norm_sq(&self) -> f64 {
        let zonal: f64 = self.degrees().iter().map(|k| self.degree_l2_sq(*k)).sum();
        let ridge: f64 = self
            .abs_atoms
            .iter()
            .flat_map(|a| {
                self.abs_atoms
                    .iter()
                    .map(move |b| a.weight * b.weight * abs_kernel(self.d, &a.axis, &b.axis))
            })
            .sum();
        // <|a . x|, P_k(w . x)> = sigma_k P_k(a . w) for even k, 0 for odd k.
        let cross: f64 = self
            .terms
            .iter()
            .filter(|t| t.k % 2 == 0)
            .map(|t| {
                let s = blaschke_levy_sigma(self.d, t.k).unwrap_or(0.0);
                self.abs_atoms
                    .iter()
                    .map(|a| {
                        a.weight
                            * t.coeff
                            * s
                            * gegenbauer_unchecked(
                                self.d,
                                t.k,
                                dot(&a.axis, &t.axis).clamp(-1.0, 1.0),
                            )
                    })
                    .sum::<f64>()
            })
            .sum();
        (zonal + ridge + 2.0 * cross).max(0.0)
    }

    /// Norms of the degree-`k` part. Single-term degrees are exact; otherwise
    /// `l1` and `sup` come from `samples` uniform points (sup is a lower bound).
    pub fn degree_norms(&self, k: usize, samples: usize, seed: u64) -> Result<DegreeNorms> {
        let ts: Vec<&ZonalTerm> = self.terms.iter().filter(|t| t.k == k).collect();
        let l2 = self.degree_l2_sq(k).sqrt();
        match ts.len() {
            0 => Ok(DegreeNorms {
                k,
                l2: 0.0,
                l1: 0.0,
                sup: 0.0,
                exact: true,
            }),
            1 => {
                let c = ts[0].coeff.abs();
                Ok(DegreeNorms {
                    k,
                    l2,
                    l1: c * gegenbauer_l1(self.d, k)?,
                    sup: c,
                    exact: true,
                })
            }
            _ => {
                let part = ZonalSeries {
                    d: self.d,
                    terms: ts.into_iter().cloned().collect(),
                    abs_atoms: Vec::new(),
                };
                let vals = part.sample_values(samples, seed);
                let l1 = vals.iter().map(|v| v.abs()).sum::<f64>() / vals.len().max(1) as f64;
                let axes = part.terms.iter().map(|t| part.eval(&t.axis).abs());
                let sup = vals.iter().map(|v| v.abs()).chain(axes).fold(0.0, f64::max);
                Ok(DegreeNorms {
                    k,
                    l2,
                    l1,
                    sup,
                    exact: false,
                })
            }
        }
    }

    pub fn sample_values(&self, samples: usize, seed: u64) -> Vec<f64> {
        (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, i as u64));
                self.eval(&sample_sphere(&mut rng, self.d))
            })
            .collect()
    }

    /// `||f||_inf / ||f||_2`: exact for a single zonal term, sampled sup otherwise.
    pub fn ell_inf_2(&self, samples: usize, seed: u64) -> Result<f64> {
        let l2 = self.l2_norm_sq().sqrt();
        if l2 == 0.0 {
            return Err(SphereError::Degenerate("zero function".into()));
        }
        let sup = if self.terms.len() == 1 && self.abs_atoms.is_empty() {
            self.terms[0].coeff.abs()
        } else {
            self.sample_values(samples, seed)
                .iter()
                .map(|v| v.abs())
                .fold(0.0, f64::max)
        };
        Ok(sup / l2)
    }
}

/// `||f||_q / ||f||_p` for the empirical measure on `values`; `INFINITY` is the sup norm.
pub fn ell_ratio(values: &[f64], q: f64, p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(SphereError::Degenerate("no samples".into()));
    }
    let norm = |r: f64| {
        if r.is_infinite() {
            values.iter().map(|v| v.abs()).fold(0.0, f64::max)
        } else {
            (values.iter().map(|v| v.abs().powf(r)).sum::<f64>() / values.len() as f64)
                .powf(1.0 / r)
        }
    };
    let den = norm(p);
    if den == 0.0 {
        return Err(SphereError::Degenerate("zero denominator norm".into()));
    }
    Ok(norm(q) / den)
}

/// Odd part of degree one, reported apart from the Blaschke-Levy inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gamma1Bound {
    /// Upper bound on gamma_1 of the even part.
    pub even: f64,
    /// `sum |c_i| ||P_1||_1` over degree-one terms.
    pub linear_l1: f64,
    /// True when every contribution is exact (single term per degree, or pure `|a . x|` atoms).
    pub exact: bool,
}

/// `sum_k |sigma_k|^-1 ||f_k||_1` with `||f_k||_1` bounded by the triangle
/// inequality across axes; `|a . x|` atoms contribute their weight.
pub fn gamma1_upper(series: &ZonalSeries) -> Result<Gamma1Bound> {
    let d = series.d;
    if let Some(t) = series.terms.iter().find(|t| t.k % 2 == 1 && t.k >= 3) {
        return Err(SphereError::Domain(format!(
            "odd degree {} has no gamma_1 representation",
            t.k
        )));
    }
    let mut even = series.abs_atoms.iter().map(|a| a.weight.abs()).sum::<f64>();
    let mut exact = true;
    let mut linear_l1 = 0.0;
    for k in series.degrees() {
        let ts: Vec<&ZonalTerm> = series.terms.iter().filter(|t| t.k == k).collect();
        exact &= ts.len() == 1;
        let l1 = ts.iter().map(|t| t.coeff.abs()).sum::<f64>() * gegenbauer_l1(d, k)?;
        if k == 1 {
            linear_l1 += l1;
        } else {
            even += l1 / blaschke_levy_sigma(d, k)?.abs();
        }
    }
    if !series.terms.is_empty() && !series.abs_atoms.is_empty() {
        exact = false;
    }
    Ok(Gamma1Bound {
        even,
        linear_l1,
        exact,
    })
}

pub const MAX_FRAME_DIM: usize = 20;

/// `{e / sqrt(d) : e in {+-1}^d, e_1 > 0}`.
pub fn spread_frame(d: usize) -> Result<Vec<Vec<f64>>> {
    check_dim(d)?;
    if d > MAX_FRAME_DIM {
        return Err(SphereError::Capability(format!(
            "frame dimension {d} exceeds {MAX_FRAME_DIM}"
        )));
    }
    let s = 1.0 / (d as f64).sqrt();
    Ok((0..1u64 << (d - 1))
        .map(|bits| {
            (0..d)
                .map(|j| {
                    if j == 0 || bits >> (j - 1) & 1 == 0 {
                        s
                    } else {
                        -s
                    }
                })
                .collect()
        })
        .collect())
}

pub fn coherence(frame: &[Vec<f64>]) -> f64 {
    let mut c: f64 = 0.0;
    for i in 0..frame.len() {
        for j in i + 1..frame.len() {
            c = c.max(dot(&frame[i], &frame[j]).abs());
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSpread {
    pub series: ZonalSeries,
    pub beta: f64,
    /// Exact `||P_hat||_2^2`.
    pub norm_sq: f64,
    /// Off-diagonal Gram buckets `(d * <w_i, w_j>, ordered pair count)`.
    pub gram_buckets: Vec<(i64, u64)>,
}

impl SparseSpread {
    /// `2 2^(-d/2) sqrt(N_k^d) ||P_hat||_2`.
    pub fn sup_bound(&self) -> f64 {
        let k = self.series.terms[0].k;
        let d = self.series.d;
        let n = harmonic_dim(d, k).map(|h| h.ln).unwrap_or(f64::INFINITY);
        2.0 * (-(d as f64) / 2.0 * 2f64.ln() + 0.5 * n).exp() * self.norm_sq.sqrt()
    }
}

/// `P_hat = beta_d sum_i sqrt(N_k^d) P_k^d(w_i . x)` over the spread frame.
pub fn sparse_spread(d: usize, k: usize) -> Result<SparseSpread> {
    if k % 2 == 1 || k < 16 * d * d {
        return Err(SphereError::Precondition(format!(
            "need even k >= 16 d^2 = {}, got {k}",
            16 * d * d
        )));
    }
    let frame = spread_frame(d)?;
    let n = harmonic_dim(d, k)?;
    let beta = 2.0 / (2f64.powi(d as i32) + 2.0).sqrt();
    let coeff = beta * (0.5 * n.ln).exp();
    let mut series = ZonalSeries::new(d)?;
    for w in &frame {
        series.terms.push(ZonalTerm {
            k,
            axis: w.clone(),
            coeff,
        });
    }
    // Frame vectors are sign patterns: d <w_i, w_j> = d - 2 popcount(i ^ j) over the free bits.
    let m = frame.len() as u64;
    let mut counts = vec![0u64; d + 1];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                counts[(i ^ j).count_ones() as usize] += 1;
            }
        }
    }
    let gram_buckets: Vec<(i64, u64)> = counts
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0)
        .map(|(h, c)| (d as i64 - 2 * h as i64, *c))
        .collect();
    let off: f64 = gram_buckets
        .iter()
        .map(|(ip, c)| *c as f64 * gegenbauer_unchecked(d, k, *ip as f64 / d as f64))
        .sum();
    let norm_sq = beta * beta * (m as f64 + off);
    Ok(SparseSpread {
        series,
        beta,
        norm_sq,
        gram_buckets,
    })
}

/// Outcome of the sign-invariant spreadness check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadCheck {
    /// `|f_k|` at the normalized all-ones sign vector.
    pub max_sign: f64,
    pub sampled_sup: f64,
    /// Sampled sup does not exceed the sign-vector value.
    pub centered: bool,
    pub bound: f64,
    /// `max_sign <= bound`.
    pub holds: bool,
}

impl SpreadCheck {
    pub fn passed(&self) -> bool {
        self.centered && self.holds
    }
}

/// Checks `||f_k||_inf <= 2 2^(-d/2) sqrt(N_k^d) ||f_k||_2` for a
/// sign-invariant degree-`k` series whose sup sits on the sign vectors.
pub fn sign_invariant_spread_check(
    fk: &ZonalSeries,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<SpreadCheck> {
    let d = fk.d;
    if k < 16 * d * d {
        return Err(SphereError::Precondition(format!(
            "need k >= 16 d^2 = {}, got {k}",
            16 * d * d
        )));
    }
    if fk.terms.iter().any(|t| t.k != k) || !fk.abs_atoms.is_empty() {
        return Err(SphereError::Precondition(format!(
            "series is not homogeneous of degree {k}"
        )));
    }
    let l2 = fk.degree_l2_sq(k).sqrt();
    let scale = fk
        .terms
        .iter()
        .map(|t| t.coeff.abs())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let checks: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, i as u64));
            let x = sample_sphere(&mut rng, d);
            let flipped: Vec<f64> = x
                .iter()
                .map(|v| if rng.random::<bool>() { -v } else { *v })
                .collect();
            let fx = fk.eval(&x);
            (fx, (fx - fk.eval(&flipped)).abs())
        })
        .collect();
    if let Some((_, gap)) = checks.iter().find(|(_, gap)| *gap > 1e-9 * scale) {
        return Err(SphereError::Precondition(format!(
            "not sign-invariant: |f(x) - f(e o x)| = {gap:e}"
        )));
    }
    let ones = vec![1.0 / (d as f64).sqrt(); d];
    let max_sign = fk.eval(&ones).abs();
    let sampled_sup = checks.iter().map(|(v, _)| v.abs()).fold(0.0, f64::max);
    let n = harmonic_dim(d, k)?;
    let bound = 2.0 * (-(d as f64) / 2.0 * 2f64.ln() + 0.5 * n.ln).exp() * l2;
    Ok(SpreadCheck {
        max_sign,
        sampled_sup,
        centered: sampled_sup <= max_sign * (1.0 + 1e-9) + 1e-12 * scale,
        bound,
        holds: max_sign <= bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InapproxBound {
    pub projected_sq: f64,
    pub penalty: f64,
    pub bound: f64,
}

/// `||P_I f||_2^2 - 4 d^M (sum_k c_k^2)^(1/2) m_inf^2 N`, clipped at zero,
/// with `c_k = ||f_k||_inf / (sqrt(N_k^d) ||f||_2)`.
pub fn inapprox_certificate(
    d: usize,
    norms: &[DegreeNorms],
    f_l2: f64,
    m_exp: f64,
    n_units: f64,
    m_inf: f64,
) -> Result<InapproxBound> {
    if norms.is_empty() {
        return Err(SphereError::Domain("empty degree set".into()));
    }
    if !(f_l2 > 0.0) {
        return Err(SphereError::Degenerate("||f||_2 must be positive".into()));
    }
    let projected_sq: f64 = norms.iter().map(|n| n.l2 * n.l2).sum();
    let mut c_sq = 0.0;
    for n in norms {
        let dim = harmonic_dim(d, n.k)?;
        let c = n.sup / ((0.5 * dim.ln).exp() * f_l2);
        c_sq += c * c;
    }
    let penalty = 4.0 * (d as f64).powf(m_exp) * c_sq.sqrt() * m_inf * m_inf * n_units;
    Ok(InapproxBound {
        projected_sq,
        penalty,
        bound: (projected_sq - penalty).max(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplingScheme {
    /// `N` iid draws proportional to `|pi|`.
    #[default]
    Iid,
    /// `floor(N |pi_i| / ||pi||_1)` deterministic copies, remainder drawn iid.
    Residual,
}

/// Atom-sampled approximant of `sum_j pi_j |a_j . x|`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsSample {
    pub atoms: Vec<AbsAtom>,
    pub net: LayeredNet,
}

impl AbsSample {
    pub fn gamma1(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight.abs()).sum()
    }
}

pub fn atom_sample_approx(
    series: &ZonalSeries,
    n: usize,
    scheme: SamplingScheme,
    seed: u64,
) -> Result<AbsSample> {
    if !series.terms.is_empty() {
        return Err(SphereError::Capability(
            "representing measure known only for |a . x| atoms".into(),
        ));
    }
    if series.abs_atoms.is_empty() || n == 0 {
        return Err(SphereError::Domain(
            "need at least one atom and N >= 1".into(),
        ));
    }
    let mass: f64 = series.abs_atoms.iter().map(|a| a.weight.abs()).sum();
    if !(mass > 0.0) {
        return Err(SphereError::Degenerate(
            "representing measure has zero mass".into(),
        ));
    }
    let mut counts = vec![0usize; series.abs_atoms.len()];
    let mut residual: Vec<f64> = series.abs_atoms.iter().map(|a| a.weight.abs()).collect();
    let mut remaining = n;
    if scheme == SamplingScheme::Residual {
        for (i, a) in series.abs_atoms.iter().enumerate() {
            let share = n as f64 * a.weight.abs() / mass;
            let whole = (share + 1e-9).floor() as usize;
            counts[i] = whole.min(remaining);
            remaining -= counts[i];
            residual[i] = (share - whole as f64).max(0.0);
        }
    }
    if remaining > 0 {
        let pick = WeightedIndex::new(&residual)
            .or_else(|_| WeightedIndex::new(series.abs_atoms.iter().map(|a| a.weight.abs())))
            .map_err(|e| SphereError::Degenerate(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..remaining {
            counts[pick.sample(&mut rng)] += 1;
        }
    }
    let unit_mass = mass / n as f64;
    let atoms: Vec<AbsAtom> = series
        .abs_atoms
        .iter()
        .zip(&counts)
        .filter(|(_, c)| **c > 0)
        .map(|(a, c)| AbsAtom {
            axis: a.axis.clone(),
            weight: a.weight.signum() * unit_mass * *c as f64,
        })
        .collect();
    let layer = Layer::uniform(
        atoms.iter().map(|a| a.axis.clone()).collect(),
        vec![0.0; atoms.len()],
        Activation::abs(),
    );
    let out = atoms
        .iter()
        .map(|a| Complex64::new(a.weight, 0.0))
        .collect();
    let net = LayeredNet::new(series.d, vec![layer], out)
        .map_err(|e| SphereError::Domain(e.to_string()))?;
    Ok(AbsSample { atoms, net })
}

/// Exact `||sum_i a_i - sum_j b_j||_{L2(S)}` for two `|w . x|` mixtures.
pub fn abs_mixture_distance(d: usize, a: &[AbsAtom], b: &[AbsAtom]) -> f64 {
    let all: Vec<(&[f64], f64)> = a
        .iter()
        .map(|x| (x.axis.as_slice(), x.weight))
        .chain(b.iter().map(|x| (x.axis.as_slice(), -x.weight)))
        .collect();
    let mut s = 0.0;
    for (u, cu) in &all {
        for (v, cv) in &all {
            s += cu * cv * abs_kernel(d, u, v);
        }
    }
    s.max(0.0).sqrt()
}
