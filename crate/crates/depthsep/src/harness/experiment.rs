//! Experiment configs and reproducible reports.
//!
//! A config is a JSON object `{"name", "seed"?, "experiments": [...]}` where
//! each experiment is tagged by `"kind"`. Running it writes one CSV per
//! experiment plus `report.json`, all byte-identical for a fixed seed.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{default_seed, mc_l2_error, sinc4_cdf, HarnessError, Sampler, SamplerKind};
use crate::netir::Activation;
use crate::numeric::split_seed;
use crate::shallowify::{compile_oscillatory, two_layer_formula};
use crate::spectral::{OscillatoryTarget, Window};
use crate::sphere::{blaschke_levy_sigma, funk_hecke};

/// Version of the CSV layouts below.
pub const CSV_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Root seed; falls back to [`default_seed`].
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub experiments: Vec<Experiment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    /// `sigma_k` by closed form and by quadrature, even `k <= kmax`.
    SigmaTable { d: Vec<usize>, kmax: usize },
    /// Two-layer budgets against `eps` for fixed normalized constants.
    CertificateCurve {
        eps: Vec<f64>,
        p: usize,
        #[serde(default = "one")]
        alpha: f64,
        #[serde(default = "one")]
        gamma_l1: f64,
        #[serde(default = "one")]
        w_inf: f64,
        #[serde(default = "one")]
        c: f64,
        #[serde(default = "one")]
        m: f64,
        #[serde(default = "one")]
        h: f64,
    },
    /// Oscillatory compiler error under the product sinc^4 measure.
    OscillatorySweep {
        d: Vec<usize>,
        r: f64,
        /// `|v|_1 + |w|_1` of the random targets.
        gamma: f64,
        n_units: Vec<usize>,
        samples: usize,
        seeds: usize,
        /// Window decay constant; defaults to the sinc^2 window's.
        #[serde(default)]
        decay_alpha: Option<f64>,
    },
    /// Ridge fit on random cosine features (a heuristic stand-in for the
    /// best shallow network) next to the oscillatory compiler, for the
    /// target `exp(2 pi i r 1 . relu(x))`.
    RandomFeatureBaseline {
        d: Vec<usize>,
        r: f64,
        n_features: usize,
        train: usize,
        test: usize,
        seeds: usize,
        #[serde(default = "default_ridge")]
        ridge: f64,
        #[serde(default)]
        decay_alpha: Option<f64>,
    },
    /// Summary statistics of a sampler.
    SamplerCheck { sampler: SamplerKind, n: usize },
}

fn one() -> f64 {
    1.0
}

fn default_ridge() -> f64 {
    1e-6
}

impl Experiment {
    pub fn tag(&self) -> &'static str {
        match self {
            Experiment::SigmaTable { .. } => "sigma_table",
            Experiment::CertificateCurve { .. } => "certificate_curve",
            Experiment::OscillatorySweep { .. } => "oscillatory_sweep",
            Experiment::RandomFeatureBaseline { .. } => "random_feature_baseline",
            Experiment::SamplerCheck { .. } => "sampler_check",
        }
    }
}

/// Parses a config, reporting schema violations with their JSON path.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| HarnessError::Config {
        path: e.path().to_string(),
        msg: e.inner().to_string(),
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::Config {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    parse_config(&text)
}

/// SHA-256 of the canonical JSON form of `cfg`.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaRow {
    pub d: usize,
    pub k: usize,
    pub sigma: f64,
    pub sigma_quadrature: f64,
    pub abs_diff: f64,
}

pub const SIGMA_HEADER: [&str; 5] = ["d", "k", "sigma", "sigma_quadrature", "abs_diff"];

/// `sigma_k` from the Gamma formula and as the Funk-Hecke coefficient of `|t|`.
pub fn sigma_table(dims: &[usize], kmax: usize) -> Result<Vec<SigmaRow>, HarnessError> {
    let mut rows = Vec::new();
    for &d in dims {
        for k in (0..=kmax).step_by(2) {
            let sigma =
                blaschke_levy_sigma(d, k).map_err(|e| HarnessError::Domain(e.to_string()))?;
            let quad = funk_hecke(f64::abs, d, k)
                .map_err(|e| HarnessError::Domain(e.to_string()))?
                .value;
            rows.push(SigmaRow {
                d,
                k,
                sigma,
                sigma_quadrature: quad,
                abs_diff: (sigma - quad).abs(),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRow {
    pub eps: f64,
    pub n: u64,
    pub m: u64,
    pub log2_atoms: f64,
    pub freq_bound: f64,
    pub log2_coeff_bound: Option<f64>,
}

pub const CERTIFICATE_HEADER: [&str; 6] = ["eps", "n", "m", "log2_N", "V", "log2_B"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillatoryRow {
    pub d: usize,
    pub n_units: usize,
    pub seed: u64,
    pub r: f64,
    pub gamma: f64,
    pub q_tilde: f64,
    pub mc_sq_error: f64,
    pub std_error: f64,
    pub predicted_sq_error: f64,
    pub shape: f64,
}

pub const OSCILLATORY_HEADER: [&str; 10] = [
    "d",
    "n_units",
    "seed",
    "r",
    "gamma",
    "q_tilde",
    "mc_sq_error",
    "std_error",
    "predicted_sq_error",
    "shape",
];

fn default_decay(decay_alpha: Option<f64>) -> f64 {
    decay_alpha.unwrap_or_else(|| Window::sinc2().decay_alpha().expect("sinc2 has a profile"))
}

/// Random `(v, w)` with `|v|_1 + |w|_1 = gamma`.
fn random_direction(rng: &mut ChaCha8Rng, d: usize, gamma: f64) -> (Vec<f64>, Vec<f64>) {
    let raw: Vec<f64> = (0..2 * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let s: f64 = raw
        .iter()
        .map(|x| x.abs())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let scaled: Vec<f64> = raw.into_iter().map(|x| gamma * x / s).collect();
    (scaled[..d].to_vec(), scaled[d..].to_vec())
}

/// Mean squared `L2(phi^2)` error of [`compile_oscillatory`] over `seeds`
/// random targets per `(d, N)`.
#[allow(clippy::too_many_arguments)]
pub fn oscillatory_sweep(
    dims: &[usize],
    r: f64,
    gamma: f64,
    n_units: &[usize],
    samples: usize,
    seeds: usize,
    decay_alpha: Option<f64>,
    root: u64,
) -> Result<Vec<OscillatoryRow>, HarnessError> {
    let alpha = default_decay(decay_alpha);
    let mut jobs = Vec::new();
    for (di, &d) in dims.iter().enumerate() {
        for (ni, &n) in n_units.iter().enumerate() {
            for s in 0..seeds {
                jobs.push((di, d, ni, n, s as u64));
            }
        }
    }
    jobs.par_iter()
        .map(|&(di, d, _ni, n, s)| {
            let seed = split_seed(split_seed(root, di as u64), s);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (v, w) = random_direction(&mut rng, d, gamma);
            let target = OscillatoryTarget::new(r, v.clone(), w.clone())
                .map_err(|e| HarnessError::Domain(e.to_string()))?;
            let osc = compile_oscillatory(r, &v, &w, &Activation::relu(), n, alpha)
                .map_err(|e| HarnessError::Compile(e.to_string()))?;
            let sampler = Sampler::new(SamplerKind::ProductSinc4 { d }, split_seed(seed, 1));
            let net = &osc.net;
            let est = mc_l2_error(
                |x| target.eval(x),
                |x| net.eval(x).unwrap_or(Complex64::new(f64::NAN, 0.0)),
                &sampler,
                samples,
            )?;
            Ok(OscillatoryRow {
                d,
                n_units: n,
                seed: s,
                r,
                gamma,
                q_tilde: osc.q_tilde,
                mc_sq_error: est.mean_sq,
                std_error: est.std_error,
                predicted_sq_error: osc.predicted_sq_error,
                shape: osc.shape,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub d: usize,
    pub seed: u64,
    pub n_features: usize,
    pub r: f64,
    pub rf_train_l2: f64,
    pub rf_test_l2: f64,
    pub compiled_l2: Option<f64>,
    pub baseline: String,
}

pub const BASELINE_HEADER: [&str; 8] = [
    "d",
    "seed",
    "n_features",
    "r",
    "rf_train_l2",
    "rf_test_l2",
    "compiled_l2",
    "baseline",
];

/// Label written next to the random-feature errors.
pub const BASELINE_LABEL: &str = "random_feature_ridge_heuristic";

/// Ridge regression of a complex target on `n` real random cosine features.
struct RandomFeatures {
    freqs: Vec<Vec<f64>>,
    phases: Vec<f64>,
    coef: Vec<Complex64>,
}

impl RandomFeatures {
    fn features(freqs: &[Vec<f64>], phases: &[f64], x: &[f64]) -> Vec<f64> {
        freqs
            .iter()
            .zip(phases)
            .map(|(w, b)| (w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b).cos())
            .collect()
    }

    fn fit(
        rng: &mut ChaCha8Rng,
        n: usize,
        scale: f64,
        xs: &[Vec<f64>],
        ys: &[Complex64],
        ridge: f64,
    ) -> Result<Self, HarnessError> {
        let d = xs.first().map_or(0, |x| x.len());
        let freqs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let phases: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0.0..2.0 * std::f64::consts::PI))
            .collect();
        let rows: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| Self::features(&freqs, &phases, x))
            .collect();
        let phi = DMatrix::from_fn(xs.len(), n, |i, j| rows[i][j]);
        let gram = phi.transpose() * &phi + DMatrix::identity(n, n) * (ridge * xs.len() as f64);
        let chol = gram
            .cholesky()
            .ok_or_else(|| HarnessError::Domain("ridge system is not positive definite".into()))?;
        let yr = DVector::from_iterator(ys.len(), ys.iter().map(|y| y.re));
        let yi = DVector::from_iterator(ys.len(), ys.iter().map(|y| y.im));
        let cr = chol.solve(&(phi.transpose() * yr));
        let ci = chol.solve(&(phi.transpose() * yi));
        let coef = cr
            .iter()
            .zip(ci.iter())
            .map(|(a, b)| Complex64::new(*a, *b))
            .collect();
        Ok(Self {
            freqs,
            phases,
            coef,
        })
    }

    fn eval(&self, x: &[f64]) -> Complex64 {
        Self::features(&self.freqs, &self.phases, x)
            .iter()
            .zip(&self.coef)
            .map(|(f, c)| c * f)
            .sum()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn random_feature_baseline(
    dims: &[usize],
    r: f64,
    n_features: usize,
    train: usize,
    test: usize,
    seeds: usize,
    ridge: f64,
    decay_alpha: Option<f64>,
    root: u64,
) -> Result<Vec<BaselineRow>, HarnessError> {
    if n_features == 0 || train < 2 || test < 2 {
        return Err(HarnessError::Domain(
            "need n_features >= 1 and train, test >= 2".into(),
        ));
    }
    let alpha = default_decay(decay_alpha);
    let jobs: Vec<(usize, usize, u64)> = dims
        .iter()
        .enumerate()
        .flat_map(|(di, &d)| (0..seeds as u64).map(move |s| (di, d, s)))
        .collect();
    jobs.par_iter()
        .map(|&(di, d, s)| {
            let seed = split_seed(split_seed(root, di as u64), s);
            let target = OscillatoryTarget::new(r, vec![0.0; d], vec![1.0; d])
                .map_err(|e| HarnessError::Domain(e.to_string()))?;
            let xs =
                Sampler::new(SamplerKind::ProductSinc4 { d }, split_seed(seed, 1)).sample(train);
            let ys: Vec<Complex64> = xs.iter().map(|x| target.eval(x)).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, 2));
            let rf = RandomFeatures::fit(
                &mut rng,
                n_features,
                2.0 * std::f64::consts::PI * r,
                &xs,
                &ys,
                ridge,
            )?;
            let train_sq: f64 = xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| (rf.eval(x) - y).norm_sqr())
                .sum::<f64>()
                / train as f64;
            let test_sampler = Sampler::new(SamplerKind::ProductSinc4 { d }, split_seed(seed, 3));
            let test_est = mc_l2_error(|x| target.eval(x), |x| rf.eval(x), &test_sampler, test)?;
            let compiled = match compile_oscillatory(
                r,
                &vec![0.0; d],
                &vec![1.0; d],
                &Activation::relu(),
                n_features,
                alpha,
            ) {
                Ok(osc) => {
                    let net = &osc.net;
                    Some(
                        mc_l2_error(
                            |x| target.eval(x),
                            |x| net.eval(x).unwrap_or(Complex64::new(f64::NAN, 0.0)),
                            &test_sampler,
                            test,
                        )?
                        .estimate,
                    )
                }
                Err(_) => None,
            };
            Ok(BaselineRow {
                d,
                seed: s,
                n_features,
                r,
                rf_train_l2: train_sq.sqrt(),
                rf_test_l2: test_est.estimate,
                compiled_l2: compiled,
                baseline: BASELINE_LABEL.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub stat: String,
    pub value: f64,
}

pub const STAT_HEADER: [&str; 2] = ["stat", "value"];

/// Kolmogorov-Smirnov distance between `xs` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Norm moments plus the KS distance of the first marginal where its law is known.
pub fn sampler_stats(
    kind: &SamplerKind,
    n: usize,
    seed: u64,
) -> Result<Vec<StatRow>, HarnessError> {
    if n < 2 {
        return Err(HarnessError::Domain("need n >= 2".into()));
    }
    let pts = Sampler::new(kind.clone(), seed).sample(n);
    let norms: Vec<f64> = pts
        .iter()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let nf = n as f64;
    let mut rows = vec![
        StatRow {
            stat: "samples".into(),
            value: nf,
        },
        StatRow {
            stat: "mean_norm".into(),
            value: norms.iter().sum::<f64>() / nf,
        },
        StatRow {
            stat: "mean_norm_sq".into(),
            value: norms.iter().map(|v| v * v).sum::<f64>() / nf,
        },
        StatRow {
            stat: "max_norm".into(),
            value: norms.iter().copied().fold(0.0, f64::max),
        },
    ];
    let first: Vec<f64> = pts.iter().map(|x| x[0]).collect();
    let ks = match kind {
        SamplerKind::ProductSinc4 { .. } => Some(ks_statistic(&first, sinc4_cdf)),
        SamplerKind::Gaussian { sigma, .. } => {
            let normal =
                Normal::new(0.0, *sigma).map_err(|e| HarnessError::Domain(e.to_string()))?;
            Some(ks_statistic(&first, |x| normal.cdf(x)))
        }
        SamplerKind::UniformCube { radius, .. } => Some(ks_statistic(&first, |x| {
            ((x + radius) / (2.0 * radius)).clamp(0.0, 1.0)
        })),
        _ => None,
    };
    if let Some(ks) = ks {
        rows.push(StatRow {
            stat: "ks_first_marginal".into(),
            value: ks,
        });
        // Asymptotic 1% critical value.
        rows.push(StatRow {
            stat: "ks_critical_1pct".into(),
            value: 1.6276 / nf.sqrt(),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSummary {
    pub index: usize,
    pub kind: String,
    pub file: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub config_sha256: String,
    pub seed: u64,
    pub csv_version: u32,
    pub outputs: Vec<OutputSummary>,
}

fn write_csv<R: Serialize>(
    path: &Path,
    header: &[&str],
    rows: &[R],
) -> Result<usize, HarnessError> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    wtr.write_record(header)?;
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(rows.len())
}

/// Runs every experiment of `cfg`, writing `<index>_<kind>.csv` files and
/// `report.json` into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Report, HarnessError> {
    fs::create_dir_all(out_dir)?;
    let seed = cfg.seed.unwrap_or_else(default_seed);
    let mut outputs = Vec::with_capacity(cfg.experiments.len());
    for (index, exp) in cfg.experiments.iter().enumerate() {
        let root = split_seed(seed, index as u64);
        let file = format!("{index:02}_{}.csv", exp.tag());
        let path: PathBuf = out_dir.join(&file);
        let rows = match exp {
            Experiment::SigmaTable { d, kmax } => {
                write_csv(&path, &SIGMA_HEADER, &sigma_table(d, *kmax)?)?
            }
            Experiment::CertificateCurve {
                eps,
                p,
                alpha,
                gamma_l1,
                w_inf,
                c,
                m,
                h,
            } => {
                let rows: Vec<CertificateRow> = eps
                    .iter()
                    .map(|&e| {
                        if !(e > 0.0) {
                            return Err(HarnessError::Domain(format!(
                                "eps must be positive, got {e}"
                            )));
                        }
                        let b = two_layer_formula(e, *p, *alpha, *gamma_l1, *w_inf, *c, *m, *h);
                        Ok(CertificateRow {
                            eps: e,
                            n: b.n,
                            m: b.m,
                            log2_atoms: b.log2_atoms,
                            freq_bound: b.freq_bound,
                            log2_coeff_bound: b.log2_coeff_bound,
                        })
                    })
                    .collect::<Result<_, _>>()?;
                write_csv(&path, &CERTIFICATE_HEADER, &rows)?
            }
            Experiment::OscillatorySweep {
                d,
                r,
                gamma,
                n_units,
                samples,
                seeds,
                decay_alpha,
            } => {
                let rows = oscillatory_sweep(
                    d,
                    *r,
                    *gamma,
                    n_units,
                    *samples,
                    *seeds,
                    *decay_alpha,
                    root,
                )?;
                write_csv(&path, &OSCILLATORY_HEADER, &rows)?
            }
            Experiment::RandomFeatureBaseline {
                d,
                r,
                n_features,
                train,
                test,
                seeds,
                ridge,
                decay_alpha,
            } => {
                let rows = random_feature_baseline(
                    d,
                    *r,
                    *n_features,
                    *train,
                    *test,
                    *seeds,
                    *ridge,
                    *decay_alpha,
                    root,
                )?;
                write_csv(&path, &BASELINE_HEADER, &rows)?
            }
            Experiment::SamplerCheck { sampler, n } => {
                write_csv(&path, &STAT_HEADER, &sampler_stats(sampler, *n, root)?)?
            }
        };
        outputs.push(OutputSummary {
            index,
            kind: exp.tag().to_string(),
            file,
            rows,
        });
    }
    let report = Report {
        name: cfg.name.clone(),
        config_sha256: config_hash(cfg),
        seed,
        csv_version: CSV_VERSION,
        outputs,
    };
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    fs::write(out_dir.join("report.json"), json)?;
    Ok(report)
}
