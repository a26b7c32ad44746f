//! Samplers for the data measures, Monte Carlo and low-discrepancy error
//! estimates, and reproducible experiment runs.

use std::sync::OnceLock;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::numeric::{halton, split_seed};

mod experiment;
pub use experiment::*;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("compilation failed: {0}")]
    Compile(String),
}

/// Environment variable holding the default root seed.
pub const SEED_ENV: &str = "DEPTHSEP_SEED";
pub const FALLBACK_SEED: u64 = 20_240_601;

pub fn default_seed() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(FALLBACK_SEED)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerKind {
    /// Density `prod_j (3/2) sinc^4(pi x_j)`.
    ProductSinc4 {
        d: usize,
    },
    Gaussian {
        d: usize,
        sigma: f64,
    },
    UniformSphere {
        d: usize,
    },
    UniformBall {
        d: usize,
        radius: f64,
    },
    UniformCube {
        d: usize,
        radius: f64,
    },
}

/// Deterministic sampler: block `c` of [`BLOCK`] points draws from the
/// ChaCha8 stream `split_seed(seed, c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sampler {
    #[serde(flatten)]
    pub kind: SamplerKind,
    pub seed: u64,
}

pub const BLOCK: usize = 256;

const SINC4_CELLS: usize = 1 << 16;
const SINC4_EDGE: f64 = 64.0;

struct Sinc4Table {
    cdf: Vec<f64>,
    inner_mass: f64,
}

fn sinc4_density(x: f64) -> f64 {
    let y = std::f64::consts::PI * x;
    let s = if y.abs() < 1e-6 {
        1.0 - y * y / 6.0
    } else {
        y.sin() / y
    };
    1.5 * s.powi(4)
}

fn sinc4_table() -> &'static Sinc4Table {
    static TABLE: OnceLock<Sinc4Table> = OnceLock::new();
    TABLE.get_or_init(|| {
        let h = 2.0 * SINC4_EDGE / SINC4_CELLS as f64;
        let mut cdf = Vec::with_capacity(SINC4_CELLS + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 0..SINC4_CELLS {
            let a = -SINC4_EDGE + i as f64 * h;
            acc += h / 6.0
                * (sinc4_density(a) + 4.0 * sinc4_density(a + 0.5 * h) + sinc4_density(a + h));
            cdf.push(acc);
        }
        Sinc4Table {
            cdf,
            inner_mass: acc,
        }
    })
}

/// Marginal CDF of `(3/2) sinc^4(pi x)` from the tabulated cells; the mass
/// beyond `|x| > 64` is split evenly between the tails.
pub fn sinc4_cdf(x: f64) -> f64 {
    let t = sinc4_table();
    let tail = 0.5 * (1.0 - t.inner_mass);
    if x <= -SINC4_EDGE {
        return tail * (SINC4_EDGE / -x).powi(3);
    }
    if x >= SINC4_EDGE {
        return 1.0 - tail * (SINC4_EDGE / x).powi(3);
    }
    let h = 2.0 * SINC4_EDGE / SINC4_CELLS as f64;
    let pos = (x + SINC4_EDGE) / h;
    let i = (pos.floor() as usize).min(SINC4_CELLS - 1);
    let frac = pos - i as f64;
    tail + t.cdf[i] + frac * (t.cdf[i + 1] - t.cdf[i])
}

fn sample_sinc4<R: Rng>(rng: &mut R) -> f64 {
    let t = sinc4_table();
    let u: f64 = rng.random::<f64>();
    if u < t.inner_mass {
        let i = t.cdf.partition_point(|c| *c <= u).clamp(1, SINC4_CELLS) - 1;
        let h = 2.0 * SINC4_EDGE / SINC4_CELLS as f64;
        let span = t.cdf[i + 1] - t.cdf[i];
        let frac = if span > 0.0 {
            (u - t.cdf[i]) / span
        } else {
            0.5
        };
        return -SINC4_EDGE + (i as f64 + frac) * h;
    }
    // Pareto proposal with density ~ x^-4 beyond the table, thinned by sin^4.
    loop {
        let v: f64 = 1.0 - rng.random::<f64>();
        let x = SINC4_EDGE * v.powf(-1.0 / 3.0);
        let accept = (std::f64::consts::PI * x).sin().powi(4);
        if rng.random::<f64>() < accept {
            return if rng.random::<bool>() { x } else { -x };
        }
    }
}

fn gaussian_vec<R: Rng>(rng: &mut R, d: usize, sigma: f64) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        })
        .collect()
}

impl Sampler {
    pub fn new(kind: SamplerKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            SamplerKind::ProductSinc4 { d }
            | SamplerKind::Gaussian { d, .. }
            | SamplerKind::UniformSphere { d }
            | SamplerKind::UniformBall { d, .. }
            | SamplerKind::UniformCube { d, .. } => d,
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self.kind {
            SamplerKind::ProductSinc4 { d } => (0..d).map(|_| sample_sinc4(rng)).collect(),
            SamplerKind::Gaussian { d, sigma } => gaussian_vec(rng, d, sigma),
            SamplerKind::UniformSphere { d } => crate::sphere::sample_sphere(rng, d),
            SamplerKind::UniformBall { d, radius } => {
                let dir = crate::sphere::sample_sphere(rng, d);
                let rad = radius * rng.random::<f64>().powf(1.0 / d as f64);
                dir.into_iter().map(|v| v * rad).collect()
            }
            SamplerKind::UniformCube { d, radius } => {
                (0..d).map(|_| rng.random_range(-radius..radius)).collect()
            }
        }
    }

    /// The first `n` points of this sampler's stream.
    pub fn sample(&self, n: usize) -> Vec<Vec<f64>> {
        let blocks = n.div_ceil(BLOCK);
        (0..blocks)
            .into_par_iter()
            .flat_map_iter(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(split_seed(self.seed, c as u64));
                let m = BLOCK.min(n - c * BLOCK);
                (0..m).map(move |_| self.draw(&mut rng)).collect::<Vec<_>>()
            })
            .collect()
    }
}

/// Monte Carlo estimate of `||f - g||_{L2(mu)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    /// Square root of the mean of `|f - g|^2`.
    pub estimate: f64,
    pub mean_sq: f64,
    /// Jackknife standard error of `estimate`.
    pub std_error: f64,
    pub samples: usize,
    /// Samples dropped because `f - g` was not finite.
    pub nonfinite: usize,
}

/// Estimate from precomputed squared deviations.
pub fn mc_from_squares(sq: &[f64]) -> Result<McEstimate, HarnessError> {
    let good: Vec<f64> = sq.iter().copied().filter(|v| v.is_finite()).collect();
    let n = good.len();
    if n < 2 {
        return Err(HarnessError::Domain(format!(
            "need at least 2 finite samples, got {n}"
        )));
    }
    let total: f64 = good.iter().sum();
    let mean_sq = total / n as f64;
    let nf = n as f64;
    let loo: Vec<f64> = good
        .iter()
        .map(|v| ((total - v) / (nf - 1.0)).max(0.0).sqrt())
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / nf;
    let var = (nf - 1.0) / nf * loo.iter().map(|v| (v - loo_mean).powi(2)).sum::<f64>();
    Ok(McEstimate {
        estimate: mean_sq.sqrt(),
        mean_sq,
        std_error: var.sqrt(),
        samples: n,
        nonfinite: sq.len() - n,
    })
}

pub fn mc_l2_error<F, G>(
    f: F,
    g: G,
    sampler: &Sampler,
    n: usize,
) -> Result<McEstimate, HarnessError>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
    G: Fn(&[f64]) -> Complex64 + Sync,
{
    if n < 2 {
        return Err(HarnessError::Domain("need n >= 2".into()));
    }
    let pts = sampler.sample(n);
    let sq: Vec<f64> = pts.par_iter().map(|x| (f(x) - g(x)).norm_sqr()).collect();
    mc_from_squares(&sq)
}

/// Region probed by [`grid_sup_error`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Cube { d: usize, radius: f64 },
    Ball { d: usize, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Cube { d, .. } | Domain::Ball { d, .. } => *d,
            Domain::Box { lo, .. } => lo.len(),
        }
    }

    fn scale(&self) -> f64 {
        match self {
            Domain::Cube { radius, .. } | Domain::Ball { radius, .. } => *radius,
            Domain::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(a, b)| 0.5 * (b - a))
                .fold(0.0, f64::max),
        }
    }

    fn project(&self, x: &mut [f64]) {
        match self {
            Domain::Cube { radius, .. } => {
                x.iter_mut().for_each(|v| *v = v.clamp(-radius, *radius))
            }
            Domain::Ball { radius, .. } => {
                let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n > *radius {
                    x.iter_mut().for_each(|v| *v *= radius / n);
                }
            }
            Domain::Box { lo, hi } => x
                .iter_mut()
                .zip(lo.iter().zip(hi))
                .for_each(|(v, (a, b))| *v = v.clamp(*a, *b)),
        }
    }

    /// `i`-th low-discrepancy point; balls use a Gaussian direction and radius `u^(1/d)`.
    pub fn probe(&self, i: u64) -> Vec<f64> {
        match self {
            Domain::Cube { d, radius } => halton(i, *d)
                .into_iter()
                .map(|u| radius * (2.0 * u - 1.0))
                .collect(),
            Domain::Box { lo, hi } => halton(i, lo.len())
                .into_iter()
                .zip(lo.iter().zip(hi))
                .map(|(u, (a, b))| a + (b - a) * u)
                .collect(),
            Domain::Ball { d, radius } => {
                let h = halton(i, d + 1);
                let normal = Normal::standard();
                let g: Vec<f64> = h[..*d]
                    .iter()
                    .map(|u| normal.inverse_cdf(u.clamp(1e-12, 1.0 - 1e-12)))
                    .collect();
                let n = g
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
                    .max(f64::MIN_POSITIVE);
                let rad = radius * h[*d].powf(1.0 / *d as f64);
                g.into_iter().map(|v| v / n * rad).collect()
            }
        }
    }

    pub fn probes(&self, n: usize) -> Vec<Vec<f64>> {
        (0..n as u64).map(|i| self.probe(i)).collect()
    }
}

/// Largest observed `|f - g|`: a lower bound on the true sup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupEstimate {
    pub value: f64,
    pub argmax: Vec<f64>,
    pub evaluations: usize,
}

const REFINE_STARTS: usize = 5;
const REFINE_STEPS: usize = 20;

/// Sup of `h` (a batch evaluator of `|f - g|`) over `n_points` Halton probes
/// followed by pattern-search refinement from the best probes.
pub fn grid_sup_batch<H>(h: H, domain: &Domain, n_points: usize) -> SupEstimate
where
    H: Fn(&[Vec<f64>]) -> Vec<f64> + Sync,
{
    let pts = domain.probes(n_points.max(1));
    let vals: Vec<f64> = pts.par_chunks(512).flat_map_iter(|c| h(c)).collect();
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|a, b| vals[*b].total_cmp(&vals[*a]).then(a.cmp(b)));
    let mut best = SupEstimate {
        value: vals[order[0]],
        argmax: pts[order[0]].clone(),
        evaluations: pts.len(),
    };
    let d = domain.dim();
    for &start in order.iter().take(REFINE_STARTS) {
        let mut x = pts[start].clone();
        let mut fx = vals[start];
        let mut step = 0.05 * domain.scale();
        for _ in 0..REFINE_STEPS {
            let cands: Vec<Vec<f64>> = (0..2 * d)
                .map(|m| {
                    let mut y = x.clone();
                    y[m / 2] += if m % 2 == 0 { step } else { -step };
                    domain.project(&mut y);
                    y
                })
                .collect();
            let cv = h(&cands);
            best.evaluations += cands.len();
            match cv
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            {
                Some((i, v)) if *v > fx => {
                    fx = *v;
                    x = cands[i].clone();
                }
                _ => step *= 0.5,
            }
        }
        if fx > best.value {
            best.value = fx;
            best.argmax = x;
        }
    }
    best
}

pub fn grid_sup_error<F, G>(f: F, g: G, domain: &Domain, n_points: usize) -> SupEstimate
where
    F: Fn(&[f64]) -> Complex64 + Sync,
    G: Fn(&[f64]) -> Complex64 + Sync,
{
    grid_sup_batch(
        |pts: &[Vec<f64>]| pts.iter().map(|x| (f(x) - g(x)).norm()).collect(),
        domain,
        n_points,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samplers_are_deterministic_and_prefix_stable() {
        for kind in [
            SamplerKind::ProductSinc4 { d: 3 },
            SamplerKind::Gaussian { d: 2, sigma: 0.5 },
            SamplerKind::UniformSphere { d: 4 },
            SamplerKind::UniformBall { d: 3, radius: 2.0 },
        ] {
            let s = Sampler::new(kind, 7);
            let a = s.sample(600);
            assert_eq!(a, s.sample(600));
            assert_eq!(a[..300], s.sample(300)[..]);
            assert_ne!(
                a,
                Sampler {
                    seed: 8,
                    ..s.clone()
                }
                .sample(600)
            );
        }
    }

    #[test]
    fn ball_and_sphere_geometry() {
        let ball = Sampler::new(SamplerKind::UniformBall { d: 3, radius: 2.0 }, 1).sample(500);
        assert!(ball
            .iter()
            .all(|x| x.iter().map(|v| v * v).sum::<f64>() <= 4.0 + 1e-12));
        let sph = Sampler::new(SamplerKind::UniformSphere { d: 5 }, 1).sample(50);
        assert!(sph
            .iter()
            .all(|x| (x.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12));
        let dom = Domain::Ball { d: 4, radius: 1.5 };
        assert!(dom
            .probes(300)
            .iter()
            .all(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1.5 + 1e-12));
    }

    #[test]
    fn sinc4_cdf_shape() {
        assert!((sinc4_cdf(0.0) - 0.5).abs() < 1e-9);
        assert!(sinc4_cdf(-100.0) < 1e-8);
        assert!(sinc4_cdf(100.0) > 1.0 - 1e-8);
        assert!(sinc4_table().inner_mass < 1.0);
    }

    #[test]
    fn mc_trivial_cases() {
        let s = Sampler::new(SamplerKind::Gaussian { d: 2, sigma: 1.0 }, 3);
        let z = mc_l2_error(
            |_| Complex64::new(1.0, 0.0),
            |_| Complex64::new(1.0, 0.0),
            &s,
            100,
        )
        .unwrap();
        assert_eq!((z.estimate, z.std_error), (0.0, 0.0));
        let c = mc_l2_error(
            |_| Complex64::new(0.0, -0.75),
            |_| Complex64::new(0.0, 0.0),
            &s,
            100,
        )
        .unwrap();
        assert!((c.estimate - 0.75).abs() < 1e-15);
        assert!(c.std_error < 1e-12);
        assert!(mc_l2_error(
            |_| Complex64::new(0.0, 0.0),
            |_| Complex64::new(0.0, 0.0),
            &s,
            1
        )
        .is_err());
    }

    #[test]
    fn sup_probe_finds_peak() {
        let dom = Domain::Cube { d: 2, radius: 1.0 };
        let zero = grid_sup_error(
            |x| Complex64::new(x[0], 0.0),
            |x| Complex64::new(x[0], 0.0),
            &dom,
            100,
        );
        assert_eq!(zero.value, 0.0);
        let w = [2.0, 1.0];
        let peak = grid_sup_error(
            |x| Complex64::new((w[0] * x[0] + w[1] * x[1]).cos(), 0.0),
            |_| Complex64::new(0.0, 0.0),
            &dom,
            200,
        );
        assert!(peak.value >= 1.0 - 1e-3);
    }
}
