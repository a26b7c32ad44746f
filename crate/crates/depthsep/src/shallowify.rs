//! Deep-to-shallow compilers. Each returns the compiled network together
//! with a [`Certificate`] holding the a-priori budgets and the realized sizes.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fouriernet::{
    fn_compose_poly, fn_from_trigpoly, fn_linear_combine, fn_to_trig_pair, projected_atoms,
    FourierError, FourierNet, DEFAULT_ATOM_CAP,
};
use crate::harness::{grid_sup_batch, Domain, SupEstimate};
use crate::netir::{
    relu_interpolant, relu_resynthesize, Activation, ActivationKind, Layer, LayeredNet, NetError,
    RELU_RESYNTHESIS_RATE,
};
use crate::uniapprox::{
    bernstein_with_degree, cheb_near_minimax, fejer_trig_approx, fourier_extension_fit,
    ApproxError, TrigPoly, UniPoly,
};

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);
const CI: Complex64 = Complex64::new(0.0, 1.0);
/// Points of the 1-D grids used for a-posteriori error bounds.
const CHECK_GRID: usize = 4097;
const TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum ShallowError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("normalization violated: {0}; rescale the network so that it holds")]
    Normalization(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("atom budget exceeded: projected 2^{:.1} atoms > cap {cap}", .certificate.log2_atoms)]
    BudgetExceeded {
        projected: f64,
        cap: usize,
        certificate: Box<Certificate>,
    },
    #[error("{units} units are too few; need more than {required:.3}")]
    UnitBudget { units: usize, required: f64 },
    #[error("accuracy {eps} not reached: predicted error {predicted:.4e}")]
    Unreached { eps: f64, predicted: f64 },
    #[error(transparent)]
    Fourier(#[from] FourierError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KNorm {
    L2,
    Linf,
}

impl FromStr for KNorm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "l2" => Ok(KNorm::L2),
            "linf" => Ok(KNorm::Linf),
            _ => Err(format!("unknown norm {s:?} (expected l2 or linf)")),
        }
    }
}

/// `K = {x : |x| <= radius}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub radius: f64,
    pub norm: KNorm,
}

impl Region {
    pub fn ball(radius: f64) -> Self {
        Self {
            radius,
            norm: KNorm::L2,
        }
    }

    pub fn cube(radius: f64) -> Self {
        Self {
            radius,
            norm: KNorm::Linf,
        }
    }

    /// `sup_{x in K} |u . x|`.
    pub fn support(&self, u: &[f64]) -> f64 {
        let dual = match self.norm {
            KNorm::L2 => u.iter().map(|v| v * v).sum::<f64>().sqrt(),
            KNorm::Linf => u.iter().map(|v| v.abs()).sum(),
        };
        dual * self.radius
    }

    pub fn domain(&self, d: usize) -> Domain {
        match self.norm {
            KNorm::L2 => Domain::Ball {
                d,
                radius: self.radius,
            },
            KNorm::Linf => Domain::Cube {
                d,
                radius: self.radius,
            },
        }
    }

    pub fn freq_bound(&self, net: &FourierNet) -> f64 {
        match self.norm {
            KNorm::L2 => net.freq_bound_l2(self.radius),
            KNorm::Linf => net.freq_bound_linf(self.radius),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Orders and degrees from the a-priori formulas.
    Formula,
    /// Smallest orders and degrees whose a-posteriori bound meets `eps`.
    #[default]
    Adaptive,
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "formula" => Ok(Strategy::Formula),
            "adaptive" => Ok(Strategy::Adaptive),
            _ => Err(format!(
                "unknown strategy {s:?} (expected formula or adaptive)"
            )),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Formula => "formula",
            Strategy::Adaptive => "adaptive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompileOptions {
    pub strategy: Strategy,
    pub atom_cap: usize,
    /// Share of `eps` given to the inner (Fourier) stage.
    pub inner_share: f64,
    /// Smallest trigonometric order tried by the adaptive strategy.
    pub min_order: usize,
    /// Largest trigonometric order tried by the adaptive strategy.
    pub max_order: usize,
    /// Largest polynomial degree tried by the adaptive strategy.
    pub max_degree: usize,
    /// Period of the adaptive Fourier fits, in units of the fitted interval.
    pub extension: f64,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            strategy: Strategy::Adaptive,
            atom_cap: DEFAULT_ATOM_CAP,
            inner_share: 0.5,
            min_order: 1,
            max_order: 48,
            max_degree: 40,
            extension: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    TwoLayer,
    Radial,
    Deep,
    Resynthesis,
}

/// Sizes of the network that was actually built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realized {
    /// Largest trigonometric order used by an inner unit.
    pub n: usize,
    /// Largest polynomial degree used by an outer unit.
    pub m: usize,
    pub atoms: usize,
    /// Hidden units, for networks with an activation other than `exp`.
    pub units: Option<usize>,
    /// `sup_{x in K} |v . x|` over the frequencies used.
    pub freq_bound: f64,
    pub coeff_bound: f64,
    pub coeff_l1: f64,
}

impl Realized {
    fn of(net: &FourierNet, region: &Region, n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            atoms: net.atom_count(),
            units: None,
            freq_bound: region.freq_bound(net),
            coeff_bound: net.coeff_bound(),
            coeff_l1: net.coeff_l1(),
        }
    }
}

/// A-priori budgets, the constants they depend on, and what was realized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub pipeline: Pipeline,
    pub strategy: Strategy,
    pub eps: f64,
    /// Trigonometric order of the inner stage.
    pub n: u64,
    /// Polynomial degree of the outer stage.
    pub m: u64,
    /// Inner width.
    pub p: usize,
    #[serde(rename = "log2_N")]
    pub log2_atoms: f64,
    /// Exact atom count, when it fits in 128 bits.
    #[serde(rename = "N")]
    pub atoms: Option<u128>,
    /// Bound on `sup_{x in K} |v . x|` over the frequencies.
    #[serde(rename = "V")]
    pub freq_bound: f64,
    /// Bound on the atom coefficients; `None` when it overflows `f64`.
    #[serde(rename = "B")]
    pub coeff_bound: Option<f64>,
    /// `None` when the bound is zero.
    #[serde(rename = "log2_B")]
    pub log2_coeff_bound: Option<f64>,
    pub constants: BTreeMap<String, f64>,
    pub realized: Option<Realized>,
    /// Upper bound on the sup error of the realized network.
    pub predicted_error: f64,
    pub measured_error: Option<f64>,
}

impl Certificate {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    fn set_coeff_bound(&mut self, log2: Option<f64>) {
        self.log2_coeff_bound = log2;
        self.coeff_bound = match log2 {
            None => Some(0.0),
            Some(l) if l < 1023.0 => Some(l.exp2()),
            Some(_) => None,
        };
    }
}

/// Exact `(2np + 1)^m` when it fits.
pub fn two_layer_atoms(n: u64, p: usize, m: u64) -> Option<u128> {
    let base = (2 * n as u128).checked_mul(p as u128)?.checked_add(1)?;
    base.checked_pow(u32::try_from(m).ok()?)
}

/// A real or complex scalar function with declared Hölder regularity
/// `|f(a) - f(b)| <= constant |a - b|^alpha`.
#[derive(Clone)]
pub struct ScalarFn {
    f: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>,
    pub constant: f64,
    pub alpha: f64,
    pub real: bool,
    kind: Option<ActivationKind>,
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFn")
            .field("constant", &self.constant)
            .field("alpha", &self.alpha)
            .field("real", &self.real)
            .field("kind", &self.kind)
            .finish()
    }
}

impl ScalarFn {
    pub fn complex<F: Fn(f64) -> Complex64 + Send + Sync + 'static>(
        f: F,
        constant: f64,
        alpha: f64,
    ) -> Self {
        Self {
            f: Arc::new(f),
            constant,
            alpha,
            real: false,
            kind: None,
        }
    }

    pub fn real<F: Fn(f64) -> f64 + Send + Sync + 'static>(
        f: F,
        constant: f64,
        alpha: f64,
    ) -> Self {
        Self {
            f: Arc::new(move |t| Complex64::new(f(t), 0.0)),
            constant,
            alpha,
            real: true,
            kind: None,
        }
    }

    pub fn from_activation(a: &Activation) -> Self {
        let act = a.clone();
        let real = !a.is_complex();
        Self {
            f: Arc::new(move |t| act.apply(t)),
            constant: a.lipschitz,
            alpha: a.holder_alpha,
            real,
            kind: Some(a.kind.clone()),
        }
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        (self.f)(t)
    }

    fn re(&self, t: f64) -> f64 {
        (self.f)(t).re
    }

    fn im(&self, t: f64) -> f64 {
        (self.f)(t).im
    }

    fn grid_slack(&self, step: f64) -> f64 {
        self.constant * (0.5 * step).powf(self.alpha)
    }

    /// `sup_{lo <= t <= hi} |f(t)|`: closed form for the standard activations,
    /// otherwise a grid maximum plus the Hölder slack (second value: grid step).
    pub fn sup_abs(&self, lo: f64, hi: f64) -> (f64, Option<f64>) {
        let hits = |a: f64| ((lo - a) / PI).ceil() <= ((hi - a) / PI).floor();
        let closed = match &self.kind {
            Some(ActivationKind::Relu) => Some(hi.max(0.0)),
            Some(ActivationKind::Abs) => Some(lo.abs().max(hi.abs())),
            Some(ActivationKind::Sigmoid) => Some(1.0 / (1.0 + (-hi).exp())),
            Some(ActivationKind::Cosine) => Some(if hits(0.0) {
                1.0
            } else {
                lo.cos().abs().max(hi.cos().abs())
            }),
            Some(ActivationKind::Sine) => Some(if hits(0.5 * PI) {
                1.0
            } else {
                lo.sin().abs().max(hi.sin().abs())
            }),
            Some(ActivationKind::ComplexExp { .. }) => Some(1.0),
            _ => None,
        };
        if let Some(v) = closed {
            return (v, None);
        }
        if hi <= lo {
            return (self.eval(lo).norm(), None);
        }
        let step = (hi - lo) / (CHECK_GRID - 1) as f64;
        let m = (0..CHECK_GRID)
            .map(|i| self.eval(lo + step * i as f64).norm())
            .fold(0.0, f64::max);
        (m + self.grid_slack(step), Some(step))
    }
}

#[derive(Debug, Clone)]
pub struct InnerUnit {
    pub u: Vec<f64>,
    pub b: f64,
    pub h: ScalarFn,
}

#[derive(Debug, Clone)]
pub struct OuterUnit {
    pub w: Vec<f64>,
    pub c: f64,
    pub g: ScalarFn,
}

/// `f(x) = sum_k gamma_k g_k(w_k . h(U^T x + b) + c_k)`.
#[derive(Debug, Clone)]
pub struct TwoLayerTarget {
    pub dim: usize,
    pub inner: Vec<InnerUnit>,
    pub outer: Vec<OuterUnit>,
    pub gamma: Vec<Complex64>,
}

/// `C = sup_K |U^T x + b|_inf`, `M = sup_K |W^T h + c|_inf`, `H = sup_{[-C,C]} |h|_inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainConstants {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "H")]
    pub h: f64,
    /// Grid step when some activation had no closed-form sup.
    pub grid_step: Option<f64>,
}

impl TwoLayerTarget {
    pub fn from_net(net: &LayeredNet) -> Result<Self, ShallowError> {
        if net.depth() != 2 {
            return Err(ShallowError::Precondition(format!(
                "need 2 hidden layers, got {}",
                net.depth()
            )));
        }
        let (first, second) = (&net.layers()[0], &net.layers()[1]);
        let inner = (0..first.width())
            .map(|j| InnerUnit {
                u: first.weights[j].clone(),
                b: first.bias[j],
                h: ScalarFn::from_activation(&first.activations[j]),
            })
            .collect();
        let outer = (0..second.width())
            .map(|k| OuterUnit {
                w: second.weights[k].clone(),
                c: second.bias[k],
                g: ScalarFn::from_activation(&second.activations[k]),
            })
            .collect();
        let t = Self {
            dim: net.input_dim(),
            inner,
            outer,
            gamma: net.output().to_vec(),
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<(), ShallowError> {
        for (j, unit) in self.inner.iter().enumerate() {
            if !unit.h.real {
                return Err(ShallowError::Precondition(format!(
                    "inner unit {j} must be real-valued"
                )));
            }
            if (unit.h.alpha - 1.0).abs() > TOL || !(unit.h.constant >= 0.0) {
                return Err(ShallowError::Precondition(format!(
                    "inner unit {j} must be Lipschitz"
                )));
            }
            if unit.u.len() != self.dim {
                return Err(ShallowError::Precondition(format!(
                    "inner unit {j} has the wrong input size"
                )));
            }
        }
        for (k, unit) in self.outer.iter().enumerate() {
            if !(unit.g.alpha > 0.0 && unit.g.alpha <= 1.0) || !(unit.g.constant >= 0.0) {
                return Err(ShallowError::Precondition(format!(
                    "outer unit {k} must be Hölder"
                )));
            }
            if unit.w.len() != self.inner.len() {
                return Err(ShallowError::Precondition(format!(
                    "outer unit {k} has the wrong input size"
                )));
            }
        }
        if self.gamma.len() != self.outer.len() {
            return Err(ShallowError::Precondition(
                "output weights do not match the outer width".into(),
            ));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let hidden: Vec<f64> = self
            .inner
            .iter()
            .map(|unit| {
                unit.h
                    .re(unit.u.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + unit.b)
            })
            .collect();
        self.outer
            .iter()
            .zip(&self.gamma)
            .map(|(unit, g)| {
                g * unit
                    .g
                    .eval(unit.w.iter().zip(&hidden).map(|(a, b)| a * b).sum::<f64>() + unit.c)
            })
            .sum()
    }

    pub fn constants(&self, region: &Region) -> DomainConstants {
        let c = self
            .inner
            .iter()
            .map(|u| region.support(&u.u) + u.b.abs())
            .fold(0.0, f64::max);
        let mut step: Option<f64> = None;
        let hs: Vec<f64> = self
            .inner
            .iter()
            .map(|u| {
                let (v, s) = u.h.sup_abs(-c, c);
                step = match (step, s) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    (a, b) => a.or(b),
                };
                v
            })
            .collect();
        let h = hs.iter().copied().fold(0.0, f64::max);
        let m = self
            .outer
            .iter()
            .map(|o| o.w.iter().zip(&hs).map(|(w, h)| w.abs() * h).sum::<f64>() + o.c.abs())
            .fold(0.0, f64::max);
        DomainConstants {
            c,
            m,
            h,
            grid_step: step,
        }
    }

    /// `(|gamma|_1, |W|_inf, alpha)` after rescaling the activations to
    /// 1-Lipschitz and (1, alpha)-Hölder.
    fn normalized(&self) -> (f64, f64, f64) {
        let gamma_l1 = self
            .outer
            .iter()
            .zip(&self.gamma)
            .map(|(o, g)| g.norm() * o.g.constant.max(1.0))
            .sum();
        let w_inf = self
            .outer
            .iter()
            .map(|o| {
                o.w.iter()
                    .zip(&self.inner)
                    .map(|(w, i)| w.abs() * i.h.constant.max(1.0))
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        let alpha = self.outer.iter().map(|o| o.g.alpha).fold(1.0, f64::min);
        (gamma_l1, w_inf, alpha)
    }

    fn h_normalized(&self, c: f64) -> f64 {
        self.inner
            .iter()
            .map(|u| u.h.sup_abs(-c, c).0 / u.h.constant.max(1.0))
            .fold(0.0, f64::max)
    }
}

/// `(C, M, H)` of a two-hidden-layer network on `K`.
pub fn domain_constants(net: &LayeredNet, region: Region) -> Result<DomainConstants, ShallowError> {
    Ok(TwoLayerTarget::from_net(net)?.constants(&region))
}

/// A-priori two-layer budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormulaBudget {
    pub n: u64,
    pub m: u64,
    pub log2_atoms: f64,
    pub atoms: Option<u128>,
    pub freq_bound: f64,
    pub log2_coeff_bound: Option<f64>,
}

/// Trigonometric order `n`, degree `m`, `N = (2np+1)^m`, `V = pi m n` and the
/// coefficient bound `B` for normalized constants.
#[allow(clippy::too_many_arguments)]
pub fn two_layer_formula(
    eps: f64,
    p: usize,
    alpha: f64,
    gamma_l1: f64,
    w_inf: f64,
    c: f64,
    m_sup: f64,
    h_sup: f64,
) -> FormulaBudget {
    if gamma_l1 == 0.0 {
        return FormulaBudget {
            n: 0,
            m: 0,
            log2_atoms: 0.0,
            atoms: Some(1),
            freq_bound: 0.0,
            log2_coeff_bound: None,
        };
    }
    let ia = 1.0 / alpha;
    let n = (9.0 * 4f64.powf(ia) * gamma_l1.powi(2) * w_inf.powi(2) * (1.0 + 2.0 * c * c).powi(2)
        / eps.powf(2.0 * ia))
    .ceil();
    let lift = (eps / (2.0 * gamma_l1)).powf(ia) + m_sup;
    let m =
        (2.0 * 16f64.powf(ia) / eps.powf(1.0 + 2.0 * ia) * gamma_l1.powf(ia) * lift.powf(alpha))
            .ceil();
    let (n, m) = (n.max(1.0), m.max(1.0));
    let log2_atoms = m * (2.0 * n * p as f64 + 1.0).log2();
    let inner = 4.0 * n * p as f64 * h_sup * w_inf;
    let log2_coeff_bound = (inner > 0.0)
        .then(|| (2.0 * gamma_l1).log2() + (1.0 + lift.powf(alpha)).log2() + m * inner.log2());
    let (n, m) = (n as u64, m as u64);
    FormulaBudget {
        n,
        m,
        log2_atoms,
        atoms: two_layer_atoms(n, p, m),
        freq_bound: PI * m as f64 * n as f64,
        log2_coeff_bound,
    }
}

/// a-posteriori bound on `sup_{|t|<=r} |f - q|`, with the range of `f`.
struct Fit1d {
    q: TrigPoly,
    err: f64,
    lo: f64,
    hi: f64,
}

fn trig_lipschitz(q: &TrigPoly) -> f64 {
    q.terms()
        .map(|(k, b)| b.norm() * (k as f64 * q.omega).abs())
        .sum()
}

/// `(max |f - q|, min f, max f)` over `points` uniform nodes of `[lo, hi]`.
fn grid_check<F: Fn(f64) -> f64, Q: Fn(f64) -> f64>(
    f: &F,
    q: &Q,
    lo: f64,
    hi: f64,
    points: usize,
) -> (f64, f64, f64) {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).fold(
        (0.0f64, f64::INFINITY, f64::NEG_INFINITY),
        |(e, mn, mx), i| {
            let t = lo + step * i as f64;
            let v = f(t);
            (e.max((v - q(t)).abs()), mn.min(v), mx.max(v))
        },
    )
}

/// Coarse grid for order searches, fine grid for the reported bound.
const SEARCH_GRID: usize = 1025;
const FINE_GRID: usize = 32769;

fn check_trig<F: Fn(f64) -> f64>(f: &F, lip: f64, q: TrigPoly, r: f64, points: usize) -> Fit1d {
    let step = 2.0 * r / (points - 1) as f64;
    let (err, lo, hi) = grid_check(f, &|t| q.eval(t).re, -r, r, points);
    let slack_f = lip * 0.5 * step;
    let err = err + slack_f + trig_lipschitz(&q) * 0.5 * step;
    Fit1d {
        q,
        err,
        lo: lo - slack_f,
        hi: hi + slack_f,
    }
}

/// Fit of `t -> f(t)` on `[-r, r]`, `f` being `lip`-Lipschitz.
fn fit_inner<F: Fn(f64) -> f64>(
    f: F,
    lip: f64,
    r: f64,
    target: f64,
    order: Option<usize>,
    opts: &CompileOptions,
) -> Result<Fit1d, ShallowError> {
    if r <= 0.0 {
        let v = f(0.0);
        return Ok(Fit1d {
            q: TrigPoly::constant(v),
            err: 0.0,
            lo: v,
            hi: v,
        });
    }
    if let Some(n) = order {
        let q = fejer_trig_approx(&f, lip, r, n)?;
        return Ok(check_trig(&f, lip, q, r, FINE_GRID));
    }
    let mut best: Option<Fit1d> = None;
    for n in opts.min_order.max(1)..=opts.max_order.max(opts.min_order).max(1) {
        let q = fourier_extension_fit(&f, r, opts.extension, n)?;
        let coarse = grid_check(&f, &|t| q.eval(t).re, -r, r, SEARCH_GRID).0;
        if coarse > target && n < opts.max_order.max(opts.min_order) {
            continue;
        }
        let fit = check_trig(&f, lip, q, r, FINE_GRID);
        let done = fit.err <= target;
        if best.as_ref().is_none_or(|b| fit.err < b.err) {
            best = Some(fit);
        }
        if done {
            break;
        }
    }
    Ok(best.expect("at least the last order is checked"))
}

/// Chebyshev fit of `g` on `[lo, hi]`, returned as a polynomial in
/// `u = (t - mid) / half`, with an a-posteriori sup bound.
fn cheb_checked<F: Fn(f64) -> f64>(
    g: F,
    constant: f64,
    alpha: f64,
    lo: f64,
    hi: f64,
    deg: usize,
    fine: bool,
) -> Result<(UniPoly, f64), ShallowError> {
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    let gu = |u: f64| g(mid + half * u);
    let ch = cheb_near_minimax(gu, -1.0, 1.0, deg as i64)?;
    if !fine {
        return Ok((ch.poly, ch.sup_error));
    }
    let coeffs = ch.poly.coeffs()?;
    // Hölder slack shrinks like step^alpha; refine the grid to compensate.
    let points = if alpha < 1.0 {
        (1 << 20) + 1
    } else {
        FINE_GRID
    };
    let step = 2.0 / (points - 1) as f64;
    let horner = |u: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c);
    let err = grid_check(&gu, &horner, -1.0, 1.0, points)
        .0
        .max(ch.sup_error);
    let lip_u: f64 = coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| i as f64 * c.abs())
        .sum();
    let slack = constant * (0.5 * step * half).powf(alpha) + lip_u * 0.5 * step;
    Ok((ch.poly, err + slack))
}

/// Outer approximant: real part, optional imaginary part, bound, degree.
struct OuterFit {
    re: UniPoly,
    im: Option<UniPoly>,
    err: f64,
    deg: usize,
    /// The polynomials act on `(t - mid) / half`.
    mid: f64,
    half: f64,
}

fn fit_outer(
    g: &ScalarFn,
    lo: f64,
    hi: f64,
    target: f64,
    degree: Option<usize>,
    opts: &CompileOptions,
) -> Result<OuterFit, ShallowError> {
    let (lo, hi) = if hi - lo < 1e-9 {
        (lo - 1e-9, hi + 1e-9)
    } else {
        (lo, hi)
    };
    let fit = |deg: usize, fine: bool| -> Result<OuterFit, ShallowError> {
        let (re, e_re) = cheb_checked(|t| g.re(t), g.constant, g.alpha, lo, hi, deg, fine)?;
        let (im, e_im) = if g.real {
            (None, 0.0)
        } else {
            let (p, e) = cheb_checked(|t| g.im(t), g.constant, g.alpha, lo, hi, deg, fine)?;
            (Some(p), e)
        };
        Ok(OuterFit {
            re,
            im,
            err: e_re + e_im,
            deg,
            mid: 0.5 * (lo + hi),
            half: 0.5 * (hi - lo),
        })
    };
    if let Some(deg) = degree {
        return fit(deg, true);
    }
    let mut best: Option<OuterFit> = None;
    for deg in 0..=opts.max_degree {
        if deg < opts.max_degree && fit(deg, false)?.err > target {
            continue;
        }
        let f = fit(deg, true)?;
        let done = f.err <= target;
        if best.as_ref().is_none_or(|b| f.err < b.err) {
            best = Some(f);
        }
        if done {
            break;
        }
    }
    Ok(best.expect("at least one degree tried"))
}

/// Bernstein approximant of the outer unit on `[-r, r]`, as the formula
/// strategy prescribes; no a-posteriori bound is attached.
fn bernstein_outer(g: &ScalarFn, r: f64, deg: usize) -> Result<OuterFit, ShallowError> {
    let r = r.max(1e-9);
    let re = bernstein_with_degree(|t| g.re(t), r, g.alpha, deg)?;
    let im = if g.real {
        None
    } else {
        Some(bernstein_with_degree(|t| g.im(t), r, g.alpha, deg)?)
    };
    Ok(OuterFit {
        re,
        im,
        err: f64::NAN,
        deg,
        mid: 0.0,
        half: 1.0,
    })
}

fn compose(fit: &OuterFit, arg: &FourierNet, cap: usize) -> Result<FourierNet, FourierError> {
    let one = FourierNet::constant(arg.dim(), C1);
    let u = fn_linear_combine(
        &[
            Complex64::new(1.0 / fit.half, 0.0),
            Complex64::new(-fit.mid / fit.half, 0.0),
        ],
        &[arg.clone(), one],
    )?;
    let re = fn_compose_poly(&fit.re, &u, cap)?;
    match &fit.im {
        None => Ok(re),
        Some(im) => fn_linear_combine(&[C1, CI], &[re, fn_compose_poly(im, &u, cap)?]),
    }
}

fn budget_error(e: FourierError, cert: &Certificate) -> ShallowError {
    match e {
        FourierError::BudgetExceeded { projected, cap } => ShallowError::BudgetExceeded {
            projected,
            cap,
            certificate: Box::new(cert.clone()),
        },
        other => ShallowError::Fourier(other),
    }
}

fn check_eps(eps: f64) -> Result<(), ShallowError> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(ShallowError::Domain(format!(
            "eps must be positive and finite, got {eps}"
        )))
    }
}

fn check_opts(opts: &CompileOptions) -> Result<(), ShallowError> {
    if !(opts.inner_share > 0.0 && opts.inner_share < 1.0) {
        return Err(ShallowError::Domain(format!(
            "inner_share must lie in (0, 1), got {}",
            opts.inner_share
        )));
    }
    if opts.atom_cap == 0 {
        return Err(ShallowError::Domain("atom_cap must be positive".into()));
    }
    Ok(())
}

/// Compiles a two-hidden-layer network into a shallow Fourier network on `K`.
pub fn compile_two_layer(
    net: &LayeredNet,
    region: Region,
    eps: f64,
    opts: &CompileOptions,
) -> Result<(FourierNet, Certificate), ShallowError> {
    let target = TwoLayerTarget::from_net(net)?;
    compile_target(&target, region, eps, opts, Pipeline::TwoLayer)
}

pub fn compile_target(
    target: &TwoLayerTarget,
    region: Region,
    eps: f64,
    opts: &CompileOptions,
    pipeline: Pipeline,
) -> Result<(FourierNet, Certificate), ShallowError> {
    check_eps(eps)?;
    check_opts(opts)?;
    target.validate()?;
    if !(region.radius > 0.0) {
        return Err(ShallowError::Domain(
            "region radius must be positive".into(),
        ));
    }
    let d = target.dim;
    let p = target.inner.len();
    let consts = target.constants(&region);
    let (gamma_l1, w_inf, alpha) = target.normalized();
    let h_norm = target.h_normalized(consts.c);
    let budget = two_layer_formula(eps, p, alpha, gamma_l1, w_inf, consts.c, consts.m, h_norm);
    let mut constants = BTreeMap::new();
    constants.insert("C".to_string(), consts.c);
    constants.insert("M".to_string(), consts.m);
    constants.insert("H".to_string(), consts.h);
    constants.insert("gamma_l1".to_string(), gamma_l1);
    constants.insert("W_inf".to_string(), w_inf);
    constants.insert("alpha".to_string(), alpha);
    constants.insert("inner_share".to_string(), opts.inner_share);
    let mut cert = Certificate {
        pipeline,
        strategy: opts.strategy,
        eps,
        n: budget.n,
        m: budget.m,
        p,
        log2_atoms: budget.log2_atoms,
        atoms: budget.atoms,
        freq_bound: budget.freq_bound,
        coeff_bound: None,
        log2_coeff_bound: None,
        constants,
        realized: None,
        predicted_error: eps,
        measured_error: None,
    };
    cert.set_coeff_bound(budget.log2_coeff_bound);

    let active: Vec<usize> = (0..target.outer.len())
        .filter(|&k| target.gamma[k] != C0)
        .collect();
    if active.is_empty() {
        let zero = FourierNet::zero(d);
        cert.realized = Some(Realized::of(&zero, &region, 0, 0));
        cert.predicted_error = 0.0;
        return Ok((zero, cert));
    }
    if opts.strategy == Strategy::Formula && budget.log2_atoms > (opts.atom_cap as f64).log2() {
        return Err(ShallowError::BudgetExceeded {
            projected: budget.log2_atoms.exp2(),
            cap: opts.atom_cap,
            certificate: Box::new(cert),
        });
    }

    // Inner stage.
    let gamma_abs: f64 = active.iter().map(|&k| target.gamma[k].norm()).sum();
    let hc_total: f64 = active
        .iter()
        .map(|&k| target.gamma[k].norm() * target.outer[k].g.constant)
        .sum();
    let inner_target = active
        .iter()
        .filter_map(|&k| {
            let w1: f64 = target.outer[k].w.iter().map(|w| w.abs()).sum();
            (w1 > 0.0 && hc_total > 0.0).then(|| {
                (opts.inner_share * eps / hc_total).powf(1.0 / target.outer[k].g.alpha) / w1
            })
        })
        .fold(f64::INFINITY, f64::min);
    let order = (opts.strategy == Strategy::Formula).then_some(budget.n.max(2) as usize);
    let fits: Vec<Fit1d> = target
        .inner
        .iter()
        .map(|unit| {
            let h = &unit.h;
            let b = unit.b;
            fit_inner(
                |t| h.re(t + b),
                h.constant,
                region.support(&unit.u),
                inner_target,
                order,
                opts,
            )
        })
        .collect::<Result<_, _>>()?;
    let inner_nets: Vec<FourierNet> = fits
        .iter()
        .zip(&target.inner)
        .map(|(f, u)| fn_from_trigpoly(&f.q, &u.u))
        .collect();

    // Outer stage.
    let mut args = Vec::with_capacity(active.len());
    let mut in_errs = Vec::with_capacity(active.len());
    for &k in &active {
        let unit = &target.outer[k];
        let delta: f64 = unit.w.iter().zip(&fits).map(|(w, f)| w.abs() * f.err).sum();
        let (lo, hi) = unit
            .w
            .iter()
            .zip(&fits)
            .fold((unit.c, unit.c), |(lo, hi), (w, f)| {
                if *w >= 0.0 {
                    (lo + w * f.lo, hi + w * f.hi)
                } else {
                    (lo + w * f.hi, hi + w * f.lo)
                }
            });
        in_errs.push((delta, lo - delta, hi + delta));
        let mut coeffs: Vec<Complex64> = unit.w.iter().map(|w| Complex64::new(*w, 0.0)).collect();
        coeffs.push(Complex64::new(unit.c, 0.0));
        let mut nets = inner_nets.clone();
        nets.push(FourierNet::constant(d, C1));
        args.push(fn_linear_combine(&coeffs, &nets)?);
    }
    let inner_total: f64 = active
        .iter()
        .zip(&in_errs)
        .map(|(&k, (delta, _, _))| {
            target.gamma[k].norm()
                * target.outer[k].g.constant
                * delta.powf(target.outer[k].g.alpha)
        })
        .sum();
    let outer_target = (eps - inner_total) / gamma_abs;
    if opts.strategy == Strategy::Adaptive && outer_target <= 0.0 {
        return Err(ShallowError::Unreached {
            eps,
            predicted: inner_total,
        });
    }
    let outer_fits: Vec<OuterFit> = active
        .iter()
        .zip(&in_errs)
        .map(|(&k, &(_, lo, hi))| {
            let g = &target.outer[k].g;
            match opts.strategy {
                Strategy::Adaptive => fit_outer(g, lo, hi, outer_target, None, opts),
                Strategy::Formula => bernstein_outer(g, lo.abs().max(hi.abs()), budget.m as usize),
            }
        })
        .collect::<Result<_, _>>()?;
    if opts.strategy == Strategy::Adaptive {
        let predicted = inner_total
            + active
                .iter()
                .zip(&outer_fits)
                .map(|(&k, f)| target.gamma[k].norm() * f.err)
                .sum::<f64>();
        cert.predicted_error = predicted;
        if predicted > eps {
            return Err(ShallowError::Unreached { eps, predicted });
        }
    }
    for (arg, fit) in args.iter().zip(&outer_fits) {
        let projected = projected_atoms(arg, fit.deg, true);
        if projected > opts.atom_cap as f64 {
            return Err(ShallowError::BudgetExceeded {
                projected,
                cap: opts.atom_cap,
                certificate: Box::new(cert),
            });
        }
    }
    let composed: Vec<FourierNet> = args
        .iter()
        .zip(&outer_fits)
        .map(|(a, f)| compose(f, a, opts.atom_cap))
        .collect::<Result<_, _>>()
        .map_err(|e| budget_error(e, &cert))?;
    let gammas: Vec<Complex64> = active.iter().map(|&k| target.gamma[k]).collect();
    let out = fn_linear_combine(&gammas, &composed)?;
    if out.atom_count() > opts.atom_cap {
        return Err(ShallowError::BudgetExceeded {
            projected: out.atom_count() as f64,
            cap: opts.atom_cap,
            certificate: Box::new(cert),
        });
    }
    let n_used = fits.iter().map(|f| f.q.n).max().unwrap_or(0);
    let m_used = outer_fits.iter().map(|f| f.deg).max().unwrap_or(0);
    cert.realized = Some(Realized::of(&out, &region, n_used, m_used));
    Ok((out, cert))
}

/// Largest `|f - net|` over low-discrepancy probes of `domain`, refined locally.
pub fn measure_sup<F>(f: F, net: &FourierNet, domain: &Domain, n_points: usize) -> SupEstimate
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    grid_sup_batch(
        |pts: &[Vec<f64>]| match net.eval_batch(pts) {
            Ok(vals) => pts
                .iter()
                .zip(vals)
                .map(|(x, v)| (f(x) - v).norm())
                .collect(),
            Err(_) => vec![f64::INFINITY; pts.len()],
        },
        domain,
        n_points,
    )
}

/// `x -> phi(|x|_2)` written as `g(sum_i x_i^2 / 2)` with
/// `g(t) = phi(sqrt(2 t))`, which is `(sqrt(2) L, 1/2)`-Hölder.
pub fn radial_target<F>(phi: F, lipschitz: f64, d: usize) -> TwoLayerTarget
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    let inner = (0..d)
        .map(|j| InnerUnit {
            u: (0..d).map(|i| f64::from(i == j)).collect(),
            b: 0.0,
            h: ScalarFn::real(|t| 0.5 * t * t, 1.0, 1.0),
        })
        .collect();
    let g = ScalarFn::real(
        move |t: f64| phi((2.0 * t.max(0.0)).sqrt()),
        std::f64::consts::SQRT_2 * lipschitz,
        0.5,
    );
    TwoLayerTarget {
        dim: d,
        inner,
        outer: vec![OuterUnit {
            w: vec![1.0; d],
            c: 0.0,
            g,
        }],
        gamma: vec![C1],
    }
}

/// Compiles `x -> phi(|x|_2)` on the unit ball.
pub fn compile_radial<F>(
    phi: F,
    lipschitz: f64,
    d: usize,
    eps: f64,
    opts: &CompileOptions,
) -> Result<(FourierNet, Certificate), ShallowError>
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    if d == 0 {
        return Err(ShallowError::Domain("dimension must be positive".into()));
    }
    compile_target(
        &radial_target(phi, lipschitz, d),
        Region::ball(1.0),
        eps,
        opts,
        Pipeline::Radial,
    )
}

/// `ceil(L / eps + (L - 1))`, the per-layer degree floor.
pub fn deep_min_degree(layers: usize, eps: f64) -> usize {
    let l = layers as f64;
    (l / eps + (l - 1.0) - 1e-9).ceil().max(0.0) as usize
}

/// Degree used for layers `2..=L`: the floor above, raised to
/// `ceil(2(L - 1)/eps + (L - 2))` so that the `eps/2` split of the proof holds.
pub fn deep_degree_schedule(layers: usize, eps: f64) -> usize {
    let l = layers as f64;
    let split = if layers >= 2 {
        (2.0 * (l - 1.0) / eps + (l - 2.0) - 1e-9).ceil() as usize
    } else {
        0
    };
    deep_min_degree(layers, eps).max(split)
}

/// `log2` of `(2^L C (1 + 1/eps^2) d1)^(C L (1 + 1/eps)^(L-1))`.
pub fn deep_log2_atoms(layers: usize, eps: f64, d1: usize, c: f64) -> f64 {
    let l = layers as f64;
    let base = l + (c * (1.0 + 1.0 / (eps * eps)) * d1 as f64).log2();
    c * l * (1.0 + 1.0 / eps).powf(l - 1.0) * base
}

/// Numerical constant of the multi-layer budget.
pub const DEEP_CONSTANT: f64 = 1.0;
/// Largest Lipschitz constant allowed for the multi-layer compiler.
pub const DEEP_LIPSCHITZ: f64 = 1.0 / 6.0;

fn check_deep(net: &LayeredNet) -> Result<(), ShallowError> {
    if net.depth() == 0 {
        return Err(ShallowError::Precondition(
            "need at least one hidden layer".into(),
        ));
    }
    for (k, layer) in net.layers().iter().enumerate() {
        for (i, act) in layer.activations.iter().enumerate() {
            if act.is_complex() {
                return Err(ShallowError::Normalization(format!(
                    "layer {k} unit {i} is complex-valued"
                )));
            }
            if act.lipschitz > DEEP_LIPSCHITZ + TOL {
                return Err(ShallowError::Normalization(format!(
                    "layer {k} unit {i} is {}-Lipschitz, need at most 1/6",
                    act.lipschitz
                )));
            }
            if act.apply_real(0.0).unwrap_or(f64::NAN).abs() > TOL {
                return Err(ShallowError::Normalization(format!(
                    "layer {k} unit {i} has sigma(0) != 0"
                )));
            }
            let row: f64 =
                layer.weights[i].iter().map(|w| w.abs()).sum::<f64>() + layer.bias[i].abs();
            if row > 1.0 + TOL {
                return Err(ShallowError::Normalization(format!(
                    "layer {k} row {i} has l1 norm {row} > 1"
                )));
            }
        }
    }
    let a1: f64 = net.output().iter().map(|a| a.norm()).sum();
    if a1 > 1.0 + TOL {
        return Err(ShallowError::Normalization(format!(
            "output weights have l1 norm {a1} > 1"
        )));
    }
    Ok(())
}

/// Compiles an `L`-hidden-layer network on `[-1, 1]^d`: Fourier fits for the
/// first layer, Chebyshev polynomials of the scheduled degree for the others.
pub fn compile_deep(
    net: &LayeredNet,
    eps: f64,
    opts: &CompileOptions,
) -> Result<(FourierNet, Certificate), ShallowError> {
    check_eps(eps)?;
    check_opts(opts)?;
    check_deep(net)?;
    let d = net.input_dim();
    let layers = net.layers();
    let depth = layers.len();
    let region = Region::cube(1.0);
    let degree = deep_degree_schedule(depth, eps);
    if depth >= 2 && degree > opts.max_degree {
        return Err(ShallowError::Domain(format!(
            "degree schedule {degree} exceeds max_degree {}; increase eps",
            opts.max_degree
        )));
    }
    let d1 = layers[0].width();
    let log2_atoms = deep_log2_atoms(depth, eps, d1, DEEP_CONSTANT);
    let fejer_order = (DEEP_CONSTANT * DEEP_CONSTANT * (1.0 + 4.0 / (eps * eps))).ceil() as u64;
    let mut constants = BTreeMap::new();
    constants.insert("L".to_string(), depth as f64);
    constants.insert("C_deep".to_string(), DEEP_CONSTANT);
    constants.insert("degree".to_string(), degree as f64);
    constants.insert(
        "degree_floor".to_string(),
        deep_min_degree(depth, eps) as f64,
    );
    constants.insert("d1".to_string(), d1 as f64);
    constants.insert("inner_share".to_string(), opts.inner_share);
    let mut cert = Certificate {
        pipeline: Pipeline::Deep,
        strategy: opts.strategy,
        eps,
        n: fejer_order,
        m: if depth >= 2 { degree as u64 } else { 0 },
        p: d1,
        log2_atoms,
        atoms: None,
        freq_bound: 0.0,
        coeff_bound: None,
        log2_coeff_bound: None,
        constants,
        realized: None,
        predicted_error: eps,
        measured_error: None,
    };
    // Worst-case amplification of first-layer errors up to the output.
    let mut amp: f64 = net.output().iter().map(|a| a.norm()).sum();
    for layer in &layers[1..] {
        amp *= (0..layer.width())
            .map(|i| {
                layer.activations[i].lipschitz
                    * layer.weights[i].iter().map(|w| w.abs()).sum::<f64>()
            })
            .fold(0.0, f64::max);
    }
    let target = if amp > 0.0 {
        opts.inner_share * eps / amp
    } else {
        f64::INFINITY
    };
    let order = (opts.strategy == Strategy::Formula).then_some(fejer_order.max(2) as usize);

    let first = &layers[0];
    let mut errs = Vec::with_capacity(first.width());
    let mut ranges = Vec::with_capacity(first.width());
    let mut nets = Vec::with_capacity(first.width());
    let mut n_used = 0;
    for i in 0..first.width() {
        let act = ScalarFn::from_activation(&first.activations[i]);
        let b = first.bias[i];
        let fit = fit_inner(
            |t| act.re(t + b),
            act.constant,
            region.support(&first.weights[i]),
            target,
            order,
            opts,
        )?;
        n_used = n_used.max(fit.q.n);
        errs.push(fit.err);
        ranges.push((fit.lo, fit.hi));
        nets.push(fn_from_trigpoly(&fit.q, &first.weights[i]));
    }
    for layer in &layers[1..] {
        let mut next_errs = Vec::with_capacity(layer.width());
        let mut next_ranges = Vec::with_capacity(layer.width());
        let mut next_nets = Vec::with_capacity(layer.width());
        for i in 0..layer.width() {
            let w = &layer.weights[i];
            let c = layer.bias[i];
            let delta: f64 = w.iter().zip(&errs).map(|(a, e)| a.abs() * e).sum();
            let (lo, hi) = w
                .iter()
                .zip(&ranges)
                .fold((c, c), |(lo, hi), (a, (rl, rh))| {
                    if *a >= 0.0 {
                        (lo + a * rl, hi + a * rh)
                    } else {
                        (lo + a * rh, hi + a * rl)
                    }
                });
            let act = ScalarFn::from_activation(&layer.activations[i]);
            let fit = fit_outer(&act, lo - delta, hi + delta, 0.0, Some(degree), opts)?;
            let mut coeffs: Vec<Complex64> = w.iter().map(|a| Complex64::new(*a, 0.0)).collect();
            coeffs.push(Complex64::new(c, 0.0));
            let mut parts = nets.clone();
            parts.push(FourierNet::constant(d, C1));
            let arg = fn_linear_combine(&coeffs, &parts)?;
            let projected = projected_atoms(&arg, degree, true);
            if projected > opts.atom_cap as f64 {
                return Err(ShallowError::BudgetExceeded {
                    projected,
                    cap: opts.atom_cap,
                    certificate: Box::new(cert),
                });
            }
            next_nets.push(compose(&fit, &arg, opts.atom_cap).map_err(|e| budget_error(e, &cert))?);
            let (slo, shi) = {
                let (l, h) = (lo - delta, hi + delta);
                let step = (h - l).max(0.0) / (CHECK_GRID - 1) as f64;
                let (mn, mx) = (0..CHECK_GRID)
                    .map(|j| act.re(l + step * j as f64))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                        (a.min(v), b.max(v))
                    });
                let s = act.grid_slack(step);
                (mn - s - fit.err, mx + s + fit.err)
            };
            next_errs.push(act.constant * delta + fit.err);
            next_ranges.push((slo, shi));
        }
        errs = next_errs;
        ranges = next_ranges;
        nets = next_nets;
    }
    let out = fn_linear_combine(net.output(), &nets)?;
    let predicted: f64 = net
        .output()
        .iter()
        .zip(&errs)
        .map(|(a, e)| a.norm() * e)
        .sum();
    if opts.strategy == Strategy::Adaptive {
        cert.predicted_error = predicted;
        if predicted > eps {
            return Err(ShallowError::Unreached { eps, predicted });
        }
    }
    let realized = Realized::of(&out, &region, n_used, if depth >= 2 { degree } else { 0 });
    cert.freq_bound = realized.freq_bound;
    cert.set_coeff_bound((realized.coeff_bound > 0.0).then(|| realized.coeff_bound.log2()));
    cert.realized = Some(realized);
    Ok((out, cert))
}

/// One real trigonometric term after merging the real and imaginary parts.
struct Term {
    freq: Vec<f64>,
    rc: f64,
    rs: f64,
    ic: f64,
    is: f64,
}

impl Term {
    fn amplitude(&self) -> f64 {
        self.rc.hypot(self.rs) + self.ic.hypot(self.is)
    }

    fn eval(&self, t: f64) -> Complex64 {
        let (s, c) = t.sin_cos();
        Complex64::new(self.rc * c + self.rs * s, self.ic * c + self.is * s)
    }
}

/// Replaces every trigonometric term of `fnet` by a one-dimensional ReLU
/// network on `[-V_t, V_t]`, giving a one-hidden-layer ReLU network on `K`.
///
/// Term `t` receives the tolerance `eps * rho_t / sum rho`, where `rho_t` is
/// its amplitude, so the total error is at most `eps`.
pub fn resynthesize(
    fnet: &FourierNet,
    sigma: &Activation,
    region: Region,
    eps: f64,
) -> Result<(LayeredNet, Certificate), ShallowError> {
    check_eps(eps)?;
    if sigma.kind != ActivationKind::Relu {
        return Err(ShallowError::Unsupported(format!(
            "resynthesis needs a ReLU activation, got {:?}",
            sigma.kind
        )));
    }
    let d = fnet.dim();
    let pair = fn_to_trig_pair(fnet);
    let mut terms: Vec<Term> = Vec::new();
    let mut slot: BTreeMap<Vec<i32>, usize> = BTreeMap::new();
    for (tt, is_real) in pair
        .real
        .iter()
        .map(|t| (t, true))
        .chain(pair.imag.iter().map(|t| (t, false)))
    {
        let pos = *slot.entry(tt.index.clone()).or_insert_with(|| {
            terms.push(Term {
                freq: tt.freq.clone(),
                rc: 0.0,
                rs: 0.0,
                ic: 0.0,
                is: 0.0,
            });
            terms.len() - 1
        });
        if is_real {
            terms[pos].rc += tt.cos_coef;
            terms[pos].rs += tt.sin_coef;
        } else {
            terms[pos].ic += tt.cos_coef;
            terms[pos].is += tt.sin_coef;
        }
    }
    let mut constant = C0;
    let mut oscillating = Vec::new();
    for t in terms {
        if region.support(&t.freq) == 0.0 {
            constant += t.eval(0.0);
        } else if t.amplitude() > 0.0 {
            oscillating.push(t);
        }
    }
    let total: f64 = oscillating.iter().map(Term::amplitude).sum();
    let mut weights = Vec::new();
    let mut bias = Vec::new();
    let mut output = Vec::new();
    let mut v_max = 0.0f64;
    for t in &oscillating {
        let v = region.support(&t.freq);
        v_max = v_max.max(v);
        let tol = eps * t.amplitude() / total;
        let interp = relu_resynthesize(|s| t.eval(s), t.amplitude(), v, tol)?;
        constant += interp.constant;
        for (k, s) in interp.knots.iter().zip(&interp.slopes) {
            weights.push(t.freq.clone());
            bias.push(-k);
            output.push(*s);
        }
    }
    weights.push(vec![0.0; d]);
    bias.push(1.0);
    output.push(constant);
    let units = output.len();
    let net = LayeredNet::new(
        d,
        vec![Layer::uniform(weights, bias, Activation::relu())],
        output,
    )?;

    let n_atoms = fnet.atom_count();
    let b = fnet.coeff_bound();
    let nu = RELU_RESYNTHESIS_RATE;
    let mut constants = BTreeMap::new();
    constants.insert("nu".to_string(), nu);
    constants.insert("terms".to_string(), oscillating.len() as f64);
    constants.insert("amplitude_sum".to_string(), total);
    // Per term at most nu V sum(rho) / eps + 1 units, plus one constant unit.
    constants.insert(
        "unit_bound".to_string(),
        oscillating.len() as f64 * (nu * v_max * total / eps + 1.0) + 1.0,
    );
    constants.insert(
        "unit_bound_single_n".to_string(),
        8.0 * nu * v_max * b * n_atoms as f64 / eps,
    );
    let mut cert = Certificate {
        pipeline: Pipeline::Resynthesis,
        strategy: Strategy::Formula,
        eps,
        n: units as u64,
        m: 1,
        p: oscillating.len(),
        log2_atoms: (units as f64).log2(),
        atoms: Some(units as u128),
        freq_bound: v_max,
        coeff_bound: None,
        log2_coeff_bound: None,
        constants,
        realized: Some(Realized {
            n: units,
            m: 1,
            atoms: n_atoms,
            units: Some(units),
            freq_bound: v_max,
            coeff_bound: b,
            coeff_l1: fnet.coeff_l1(),
        }),
        predicted_error: if oscillating.is_empty() { 0.0 } else { eps },
        measured_error: None,
    };
    cert.set_coeff_bound((b > 0.0).then(|| b.log2()));
    Ok((net, cert))
}

/// `Q~ = (2 alpha d N^2 / (r^2 gamma^2))^(1/3)`.
pub fn oscillatory_q_tilde(alpha: f64, d: usize, n_units: usize, r: f64, gamma: f64) -> f64 {
    let n = n_units as f64;
    (2.0 * alpha * d as f64 * n * n / (r * r * gamma * gamma)).cbrt()
}

/// Two-hidden-layer ReLU network for `exp(2 pi i r (v.x + w.x_+))`.
#[derive(Debug, Clone)]
pub struct OscillatoryNet {
    pub net: LayeredNet,
    pub q_tilde: f64,
    /// Half-width of the interval `[-Q, Q]` covered by the 1-D interpolant.
    pub q: f64,
    pub units: usize,
    /// `4 Q~^2 gamma^2 r^2 / N^2 + 16 alpha d / Q~`.
    pub predicted_sq_error: f64,
    /// `(d gamma r / N)^(2/3)`.
    pub shape: f64,
}

/// Builds `sum_k alpha_k relu(r(v.x + w.x_+) - beta_k)` with `N` second-layer
/// units interpolating `exp(2 pi i t)` on `[-r Q, r Q]`, `Q = Q~ gamma`.
/// `decay_alpha` is the window constant with `|psi(x)|^2 <= alpha / (2 x^2)`.
pub fn compile_oscillatory(
    r: f64,
    v: &[f64],
    w: &[f64],
    sigma: &Activation,
    n_units: usize,
    decay_alpha: f64,
) -> Result<OscillatoryNet, ShallowError> {
    let d = v.len();
    if d == 0 || w.len() != d {
        return Err(ShallowError::Domain(
            "v and w must be non-empty and of equal length".into(),
        ));
    }
    if !(r >= 0.0) || !(decay_alpha > 0.0) {
        return Err(ShallowError::Domain(
            "need r >= 0 and a positive decay constant".into(),
        ));
    }
    if sigma.kind != ActivationKind::Relu {
        return Err(ShallowError::Unsupported(format!(
            "oscillatory compiler needs ReLU, got {:?}",
            sigma.kind
        )));
    }
    let gamma: f64 = v.iter().chain(w).map(|x| x.abs()).sum();
    let first_rows: Vec<Vec<f64>> = (0..2 * d)
        .map(|m| {
            (0..d)
                .map(|i| {
                    if i == m % d {
                        if m < d {
                            1.0
                        } else {
                            -1.0
                        }
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let first = Layer::uniform(first_rows, vec![0.0; 2 * d], Activation::relu());
    if r == 0.0 || gamma == 0.0 {
        let second = Layer::uniform(vec![vec![0.0; 2 * d]], vec![1.0], Activation::relu());
        let net = LayeredNet::new(d, vec![first, second], vec![C1])?;
        return Ok(OscillatoryNet {
            net,
            q_tilde: f64::INFINITY,
            q: 0.0,
            units: 1,
            predicted_sq_error: 0.0,
            shape: 0.0,
        });
    }
    let required = r * gamma * decay_alpha.max(1.0);
    if n_units < 3 || (n_units as f64) <= required {
        return Err(ShallowError::UnitBudget {
            units: n_units,
            required,
        });
    }
    let q_tilde = oscillatory_q_tilde(decay_alpha, d, n_units, r, gamma);
    if q_tilde <= decay_alpha {
        return Err(ShallowError::UnitBudget {
            units: n_units,
            required,
        });
    }
    let q = q_tilde * gamma;
    let interp = relu_interpolant(
        |s| Complex64::from_polar(1.0, 2.0 * PI * r * s),
        q,
        n_units - 2,
    );
    // s = sum_i (v_i + w_i) relu(x_i) - v_i relu(-x_i)
    let row: Vec<f64> = v
        .iter()
        .zip(w)
        .map(|(a, b)| a + b)
        .chain(v.iter().map(|a| -a))
        .collect();
    let mut rows: Vec<Vec<f64>> = interp.knots.iter().map(|_| row.clone()).collect();
    let mut bias: Vec<f64> = interp.knots.iter().map(|k| -k).collect();
    let mut output = interp.slopes.clone();
    rows.push(vec![0.0; 2 * d]);
    bias.push(1.0);
    output.push(interp.constant);
    let units = output.len();
    let second = Layer::uniform(rows, bias, Activation::relu());
    let net = LayeredNet::new(d, vec![first, second], output)?;
    let n = n_units as f64;
    let predicted_sq_error = 4.0 * q_tilde.powi(2) * gamma.powi(2) * r * r / (n * n)
        + 16.0 * decay_alpha * d as f64 / q_tilde;
    let shape = (d as f64 * gamma * r / n).powf(2.0 / 3.0);
    Ok(OscillatoryNet {
        net,
        q_tilde,
        q,
        units,
        predicted_sq_error,
        shape,
    })
}

/// A size budget kept in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub log2: f64,
}

impl Budget {
    pub fn value(&self) -> f64 {
        self.log2.exp2()
    }
}

/// Unspecified numerical constants `K > 0`, `s >= 1` of the Gaussian budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianConstants {
    pub k: f64,
    pub s: f64,
}

impl Default for GaussianConstants {
    fn default() -> Self {
        Self { k: 1.0, s: 1.0 }
    }
}

fn check_unit_eps(eps: f64) -> Result<(), ShallowError> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(ShallowError::Domain(format!(
            "eps must lie in (0, 1), got {eps}"
        )))
    }
}

/// `[K p (1 + eps^-s)(1 + |w|_1^s)]^(K (1 + (log p / d)^s)(1 + eps^-s)(1 + |w|_1^s))`
/// for data `N(0, I/d)`.
pub fn gaussian_l2_budget(
    d: usize,
    p: usize,
    w_l1: f64,
    eps: f64,
    c: GaussianConstants,
) -> Result<Budget, ShallowError> {
    check_unit_eps(eps)?;
    if d == 0 || p == 0 || !(w_l1 >= 0.0) || !(c.k > 0.0) || !(c.s >= 1.0) {
        return Err(ShallowError::Domain(
            "need d, p >= 1, |w|_1 >= 0, K > 0, s >= 1".into(),
        ));
    }
    let common = (1.0 + eps.powf(-c.s)) * (1.0 + w_l1.powf(c.s));
    let base = c.k * p as f64 * common;
    let exponent = c.k * (1.0 + ((p as f64).ln() / d as f64).powf(c.s)) * common;
    Ok(Budget {
        log2: exponent * base.log2(),
    })
}

/// `2 + beta d^7 (beta / eps)^d eps^-6`.
pub fn fixed_dimension_budget(d: usize, eps: f64, beta: f64) -> Result<Budget, ShallowError> {
    check_unit_eps(eps)?;
    if d == 0 || !(beta > 0.0) {
        return Err(ShallowError::Domain("need d >= 1 and beta > 0".into()));
    }
    let t =
        beta.log2() + 7.0 * (d as f64).log2() + d as f64 * (beta / eps).log2() - 6.0 * eps.log2();
    let (hi, lo) = if t > 1.0 { (t, 1.0) } else { (1.0, t) };
    Ok(Budget {
        log2: hi + (1.0 + (lo - hi).exp2()).log2(),
    })
}

/// Radius `1 + t` beyond which `N(0, I/d)` has mass at most
/// `e^(-d t^2 / 2) <= tail / (1 + sup)`.
pub fn gaussian_radius(d: usize, tail: f64, sup: f64) -> f64 {
    let ratio = (1.0 + sup) / tail;
    if ratio <= 1.0 {
        return 1.0;
    }
    1.0 + (2.0 * ratio.ln() / d as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Domain;

    fn two_layer(
        u: Vec<Vec<f64>>,
        h: Activation,
        w: Vec<Vec<f64>>,
        g: Activation,
        gamma: Vec<f64>,
    ) -> LayeredNet {
        let d = u[0].len();
        let p = u.len();
        let o = w.len();
        LayeredNet::new(
            d,
            vec![
                Layer::uniform(u, vec![0.0; p], h),
                Layer::uniform(w, vec![0.0; o], g),
            ],
            gamma.into_iter().map(|g| Complex64::new(g, 0.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn worked_formula_example() {
        let b = two_layer_formula(0.5, 1, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        assert_eq!(b.n, 1296);
        assert_eq!(b.atoms, two_layer_atoms(b.n, 1, b.m));
        assert!((b.log2_atoms - b.m as f64 * (2.0 * 1296.0 + 1.0f64).log2()).abs() < 1e-9);
        assert!((b.freq_bound - PI * b.m as f64 * 1296.0).abs() < 1e-6);
    }

    #[test]
    fn unit_rows_on_unit_ball() {
        let net = two_layer(
            vec![vec![0.6, 0.8], vec![1.0, 0.0]],
            Activation::relu(),
            vec![vec![0.5, 0.5]],
            Activation::cosine(),
            vec![1.0],
        );
        let c = domain_constants(&net, Region::ball(1.0)).unwrap();
        assert!((c.c - 1.0).abs() < 1e-15);
        assert!((c.h - 1.0).abs() < 1e-15);
        assert!((c.m - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_output_gives_zero_net() {
        let net = two_layer(
            vec![vec![1.0, 0.0]],
            Activation::sine(),
            vec![vec![1.0]],
            Activation::cosine(),
            vec![0.0],
        );
        let (f, cert) =
            compile_two_layer(&net, Region::ball(1.0), 0.1, &CompileOptions::default()).unwrap();
        assert_eq!(f.atom_count(), 0);
        assert_eq!(cert.predicted_error, 0.0);
    }

    #[test]
    fn adaptive_two_layer_meets_eps() {
        let quad = Activation::polynomial(vec![0.0, 0.0, 1.0], 2.0);
        let net = two_layer(
            vec![
                vec![0.5, 0.5, 0.0, 0.0],
                vec![0.0, 0.5, -0.5, 0.0],
                vec![0.2, 0.0, 0.3, 0.5],
            ],
            Activation::cosine(),
            vec![vec![0.5, -0.25, 0.25]],
            quad,
            vec![1.0],
        );
        let region = Region::ball(1.0);
        let (f, cert) = compile_two_layer(&net, region, 0.25, &CompileOptions::default()).unwrap();
        assert!(cert.predicted_error <= 0.25);
        let target = TwoLayerTarget::from_net(&net).unwrap();
        let est = measure_sup(|x| target.eval(x), &f, &region.domain(4), 2000);
        assert!(
            est.value <= cert.predicted_error,
            "{} > {}",
            est.value,
            cert.predicted_error
        );
        assert_eq!(cert.atoms, two_layer_atoms(cert.n, 3, cert.m));
    }

    #[test]
    fn formula_strategy_reports_budget() {
        let net = two_layer(
            vec![vec![1.0, 0.0]],
            Activation::sine(),
            vec![vec![1.0]],
            Activation::cosine(),
            vec![1.0],
        );
        let opts = CompileOptions {
            strategy: Strategy::Formula,
            ..CompileOptions::default()
        };
        match compile_two_layer(&net, Region::ball(1.0), 0.5, &opts) {
            Err(ShallowError::BudgetExceeded { certificate, .. }) => {
                assert!(certificate.log2_atoms > 20.0);
                assert_eq!(certificate.n, 1296);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn radial_square_and_norm() {
        let opts = CompileOptions::default();
        let (f, cert) = compile_radial(|t| t * t, 2.0, 3, 0.1, &opts).unwrap();
        let est = measure_sup(
            |x| Complex64::new(x.iter().map(|v| v * v).sum(), 0.0),
            &f,
            &Domain::Ball { d: 3, radius: 1.0 },
            1000,
        );
        assert!(est.value <= 0.1 && est.value <= cert.predicted_error);
        let (f, cert) = compile_radial(|t| t, 1.0, 3, 0.3, &opts).unwrap();
        let est = measure_sup(
            |x| Complex64::new(x.iter().map(|v| v * v).sum::<f64>().sqrt(), 0.0),
            &f,
            &Domain::Ball { d: 3, radius: 1.0 },
            1000,
        );
        assert!(
            est.value <= 0.3 && est.value <= cert.predicted_error,
            "{} {}",
            est.value,
            cert.predicted_error
        );
    }

    #[test]
    fn degree_schedules() {
        assert_eq!(deep_min_degree(3, 0.5), 8);
        assert_eq!(deep_degree_schedule(3, 0.5), 9);
        assert_eq!(deep_min_degree(1, 0.5), 2);
    }

    #[test]
    fn deep_rejects_unnormalized() {
        let l = Layer::uniform(
            vec![vec![1.0, 1.0]],
            vec![0.0],
            Activation::sine().with_lipschitz(1.0 / 6.0),
        );
        let net = LayeredNet::new(2, vec![l], vec![C1]).unwrap();
        assert!(matches!(
            compile_deep(&net, 0.5, &CompileOptions::default()),
            Err(ShallowError::Normalization(_))
        ));
    }

    #[test]
    fn resynthesis_of_constant_and_cosine() {
        let c = FourierNet::constant(2, Complex64::new(0.7, 0.0));
        let (net, _) = resynthesize(&c, &Activation::relu(), Region::ball(1.0), 0.1).unwrap();
        assert_eq!(net.size(), 1);
        assert!((net.eval(&[0.3, -0.2]).unwrap() - Complex64::new(0.7, 0.0)).norm() < 1e-15);

        let w = vec![PI, 0.0];
        let cosine = FourierNet::from_parts(
            2,
            vec![w],
            vec![
                (vec![1], Complex64::new(0.5, 0.0)),
                (vec![-1], Complex64::new(0.5, 0.0)),
            ],
        )
        .unwrap();
        let (net, cert) =
            resynthesize(&cosine, &Activation::relu(), Region::ball(1.0), 0.1).unwrap();
        assert!(net.size() as f64 <= 8.0 * RELU_RESYNTHESIS_RATE * PI / 0.1);
        assert!(cert.freq_bound - PI < 1e-12);
        let worst = Domain::Ball { d: 2, radius: 1.0 }
            .probes(1000)
            .iter()
            .map(|x| (net.eval(x).unwrap() - Complex64::new((PI * x[0]).cos(), 0.0)).norm())
            .fold(0.0, f64::max);
        assert!(worst <= 0.1, "{worst}");
    }

    #[test]
    fn oscillatory_shapes() {
        assert!((oscillatory_q_tilde(1.0, 2, 512, 4.0, 2.0) - 16384f64.cbrt()).abs() < 1e-12);
        let o = compile_oscillatory(0.0, &[1.0, 0.0], &[0.0, 1.0], &Activation::relu(), 10, 1.0)
            .unwrap();
        assert_eq!(o.net.eval(&[0.4, -2.0]).unwrap(), C1);
        assert!(matches!(
            compile_oscillatory(4.0, &[1.0, 0.0], &[0.0, 1.0], &Activation::relu(), 8, 1.0),
            Err(ShallowError::UnitBudget { .. })
        ));
        let o = compile_oscillatory(1.0, &[0.5, 0.0], &[0.0, 0.5], &Activation::relu(), 256, 0.2)
            .unwrap();
        assert_eq!(o.units, 256);
        assert_eq!(o.net.layers()[1].width(), 256);
    }

    #[test]
    fn budgets_shrink_with_eps() {
        let c = GaussianConstants::default();
        let a = gaussian_l2_budget(8, 4, 2.0, 0.2, c).unwrap();
        let b = gaussian_l2_budget(8, 4, 2.0, 0.6, c).unwrap();
        assert!(a.log2 > b.log2);
        let a = fixed_dimension_budget(3, 0.2, 1.0).unwrap();
        let b = fixed_dimension_budget(3, 0.6, 1.0).unwrap();
        assert!(a.log2 > b.log2 && b.value() > 2.0);
        assert!(fixed_dimension_budget(1, 0.5, 1.0)
            .unwrap()
            .value()
            .is_finite());
    }
}
