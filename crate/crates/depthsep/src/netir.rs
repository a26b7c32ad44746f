//! Feed-forward networks: activations, evaluation, size and weight metrics,
//! and the JSON interchange format.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Scalar nonlinearity with its declared regularity constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    #[serde(flatten)]
    pub kind: ActivationKind,
    /// Declared Lipschitz constant (on the bounded range the net is used on).
    pub lipschitz: f64,
    /// Declared Hölder exponent in (0, 1].
    #[serde(default = "one")]
    pub holder_alpha: f64,
    /// Constant of the unit budget `nu * L * R / eps` for resynthesis.
    #[serde(default)]
    pub resynthesis_rate: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationKind {
    Relu,
    Abs,
    Sigmoid,
    Cosine,
    Sine,
    /// `t -> exp(2 pi i r t)`.
    ComplexExp {
        rate: f64,
    },
    /// Coefficients in increasing degree.
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// Linear interpolation between knots, constant outside.
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
}

/// Unit budget constant of the ReLU interpolant built by [`relu_interpolant`].
pub const RELU_RESYNTHESIS_RATE: f64 = 4.0;

impl Activation {
    pub fn relu() -> Self {
        Self::with(ActivationKind::Relu, 1.0, RELU_RESYNTHESIS_RATE)
    }
    pub fn abs() -> Self {
        Self::with(ActivationKind::Abs, 1.0, 0.0)
    }
    pub fn sigmoid() -> Self {
        Self::with(ActivationKind::Sigmoid, 0.25, 0.0)
    }
    pub fn cosine() -> Self {
        Self::with(ActivationKind::Cosine, 1.0, 0.0)
    }
    pub fn sine() -> Self {
        Self::with(ActivationKind::Sine, 1.0, 0.0)
    }
    pub fn complex_exp(rate: f64) -> Self {
        Self::with(
            ActivationKind::ComplexExp { rate },
            2.0 * PI * rate.abs(),
            0.0,
        )
    }
    /// Polynomial with a caller-declared Lipschitz constant (valid on the
    /// range the caller intends to use).
    pub fn polynomial(coeffs: Vec<f64>, lipschitz: f64) -> Self {
        Self::with(ActivationKind::Polynomial { coeffs }, lipschitz, 0.0)
    }
    /// Piecewise-linear activation; the Lipschitz constant is the max slope.
    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self, NetError> {
        if knots.is_empty() {
            return Err(NetError::Invalid(
                "piecewise_linear needs at least one knot".into(),
            ));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(NetError::Invalid(
                "piecewise_linear knots must be strictly increasing".into(),
            ));
        }
        let lip = knots
            .windows(2)
            .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
            .fold(0.0, f64::max);
        Ok(Self::with(
            ActivationKind::PiecewiseLinear { knots },
            lip,
            0.0,
        ))
    }

    fn with(kind: ActivationKind, lipschitz: f64, rate: f64) -> Self {
        Self {
            kind,
            lipschitz,
            holder_alpha: 1.0,
            resynthesis_rate: rate,
        }
    }

    pub fn with_holder(mut self, alpha: f64) -> Self {
        self.holder_alpha = alpha;
        self
    }

    pub fn with_lipschitz(mut self, lipschitz: f64) -> Self {
        self.lipschitz = lipschitz;
        self
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.kind, ActivationKind::ComplexExp { .. })
    }

    /// Real-valued evaluation; `None` for the complex exponential.
    pub fn apply_real(&self, t: f64) -> Option<f64> {
        Some(match &self.kind {
            ActivationKind::Relu => t.max(0.0),
            ActivationKind::Abs => t.abs(),
            ActivationKind::Sigmoid => 1.0 / (1.0 + (-t).exp()),
            ActivationKind::Cosine => t.cos(),
            ActivationKind::Sine => t.sin(),
            ActivationKind::ComplexExp { .. } => return None,
            ActivationKind::Polynomial { coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
            }
            ActivationKind::PiecewiseLinear { knots } => piecewise(knots, t),
        })
    }

    pub fn apply(&self, t: f64) -> Complex64 {
        match &self.kind {
            ActivationKind::ComplexExp { rate } => Complex64::from_polar(1.0, 2.0 * PI * rate * t),
            _ => Complex64::new(self.apply_real(t).unwrap_or(f64::NAN), 0.0),
        }
    }

    /// `ceil(nu * L * R / eps)`: units guaranteed to reach `eps` on an
    /// `L`-Lipschitz function that is constant outside `[-R, R]`.
    pub fn resynthesis_budget(&self, lip: f64, radius: f64, eps: f64) -> Result<usize, NetError> {
        resynthesis_budget(self.resynthesis_rate, lip, radius, eps)
    }

    fn validate(&self) -> Result<(), NetError> {
        if !(self.holder_alpha > 0.0 && self.holder_alpha <= 1.0) {
            return Err(NetError::Invalid(format!(
                "holder_alpha {} not in (0,1]",
                self.holder_alpha
            )));
        }
        if !(self.lipschitz >= 0.0) {
            return Err(NetError::Invalid("lipschitz must be non-negative".into()));
        }
        if let ActivationKind::PiecewiseLinear { knots } = &self.kind {
            if knots.is_empty() || knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(NetError::Invalid(
                    "piecewise_linear knots must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }
}

fn piecewise(knots: &[(f64, f64)], t: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let i = knots.partition_point(|k| k.0 <= t);
    let (x0, y0) = knots[i - 1];
    let (x1, y1) = knots[i];
    y0 + (y1 - y0) * (t - x0) / (x1 - x0)
}

/// `ceil(nu * L * R / eps)`.
pub fn resynthesis_budget(nu: f64, lip: f64, radius: f64, eps: f64) -> Result<usize, NetError> {
    if !(eps > 0.0) {
        return Err(NetError::Domain(format!("eps must be positive, got {eps}")));
    }
    if !(lip > 0.0 && radius > 0.0) {
        return Err(NetError::Domain("L and R must be positive".into()));
    }
    Ok((nu * lip * radius / eps).ceil() as usize)
}

/// One hidden layer: `x -> act_i(A_i . x + b_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Row-major rows, one per unit.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activations: Vec<Activation>,
}

impl Layer {
    /// Layer whose units share a single activation.
    pub fn uniform(weights: Vec<Vec<f64>>, bias: Vec<f64>, act: Activation) -> Self {
        let n = weights.len();
        Self {
            weights,
            bias,
            activations: vec![act; n],
        }
    }

    pub fn width(&self) -> usize {
        self.weights.len()
    }
}

/// Network `x -> a^T sigma(A_L ... sigma(A_1 x + b_1) ... + b_L)` with complex `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredNet {
    input_dim: usize,
    layers: Vec<Layer>,
    output: Vec<Complex64>,
}

impl LayeredNet {
    pub fn new(
        input_dim: usize,
        layers: Vec<Layer>,
        output: Vec<Complex64>,
    ) -> Result<Self, NetError> {
        if input_dim == 0 {
            return Err(NetError::Invalid("input dimension must be positive".into()));
        }
        if layers.is_empty() {
            return Err(NetError::Invalid(
                "at least one hidden layer is required".into(),
            ));
        }
        let mut prev = input_dim;
        for (k, layer) in layers.iter().enumerate() {
            if layer.weights.is_empty() {
                return Err(NetError::Invalid(format!("layer {k} has no units")));
            }
            if layer.bias.len() != layer.width() || layer.activations.len() != layer.width() {
                return Err(NetError::Invalid(format!(
                    "layer {k}: bias/activation count differs from width"
                )));
            }
            if let Some(row) = layer.weights.iter().find(|r| r.len() != prev) {
                return Err(NetError::Shape {
                    expected: prev,
                    got: row.len(),
                });
            }
            for act in &layer.activations {
                act.validate()?;
                if act.is_complex() && k + 1 != layers.len() {
                    return Err(NetError::Invalid(
                        "complex activations are only allowed in the last hidden layer".into(),
                    ));
                }
            }
            prev = layer.width();
        }
        if output.len() != prev {
            return Err(NetError::Shape {
                expected: prev,
                got: output.len(),
            });
        }
        Ok(Self {
            input_dim,
            layers,
            output,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }
    pub fn output(&self) -> &[Complex64] {
        &self.output
    }

    /// Hidden-layer outputs of all but the last layer are real.
    pub fn eval(&self, x: &[f64]) -> Result<Complex64, NetError> {
        if x.len() != self.input_dim {
            return Err(NetError::Shape {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> Complex64 {
        let mut state: Vec<f64> = x.to_vec();
        let last = self.layers.len() - 1;
        for layer in &self.layers[..last] {
            state = layer
                .weights
                .iter()
                .zip(&layer.bias)
                .zip(&layer.activations)
                .map(|((row, b), act)| act.apply_real(dot(row, &state) + b).unwrap_or(f64::NAN))
                .collect();
        }
        let layer = &self.layers[last];
        layer
            .weights
            .iter()
            .zip(&layer.bias)
            .zip(&layer.activations)
            .zip(&self.output)
            .map(|(((row, b), act), a)| a * act.apply(dot(row, &state) + b))
            .sum()
    }

    /// Total number of hidden units.
    pub fn size(&self) -> usize {
        self.layers.iter().map(Layer::width).sum()
    }

    pub fn width(&self) -> usize {
        self.layers.iter().map(Layer::width).max().unwrap_or(0)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `max` over all weight rows of the `p`-norm, hidden rows carrying their
    /// bias as an extra coordinate; the output row enters with moduli.
    pub fn weight_norm(&self, p: f64) -> f64 {
        let hidden = self.layers.iter().flat_map(|l| {
            l.weights
                .iter()
                .zip(&l.bias)
                .map(move |(row, b)| p_norm(row.iter().copied().chain(std::iter::once(*b)), p))
        });
        let out = p_norm(self.output.iter().map(|a| a.norm()), p);
        hidden.chain(std::iter::once(out)).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> NetJson {
        NetJson {
            d: self.input_dim,
            layers: self
                .layers
                .iter()
                .map(|l| LayerJson {
                    a: l.weights.iter().flatten().copied().collect(),
                    b: l.bias.clone(),
                    act: if l.activations.iter().all(|a| *a == l.activations[0]) {
                        ActSpec::Shared(l.activations[0].clone())
                    } else {
                        ActSpec::PerUnit(l.activations.clone())
                    },
                })
                .collect(),
            out_re: self.output.iter().map(|a| a.re).collect(),
            out_im: self.output.iter().map(|a| a.im).collect(),
        }
    }

    pub fn from_json(j: &NetJson) -> Result<Self, NetError> {
        let mut prev = j.d;
        let mut layers = Vec::with_capacity(j.layers.len());
        for lj in &j.layers {
            let width = lj.b.len();
            if prev == 0 || lj.a.len() != width * prev {
                return Err(NetError::Shape {
                    expected: width * prev,
                    got: lj.a.len(),
                });
            }
            let weights = lj.a.chunks(prev).map(<[f64]>::to_vec).collect();
            let activations = match &lj.act {
                ActSpec::Shared(a) => vec![a.clone(); width],
                ActSpec::PerUnit(v) => v.clone(),
            };
            layers.push(Layer {
                weights,
                bias: lj.b.clone(),
                activations,
            });
            prev = width;
        }
        if j.out_re.len() != j.out_im.len() {
            return Err(NetError::Shape {
                expected: j.out_re.len(),
                got: j.out_im.len(),
            });
        }
        let output = j
            .out_re
            .iter()
            .zip(&j.out_im)
            .map(|(r, i)| Complex64::new(*r, *i))
            .collect();
        Self::new(j.d, layers, output)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("network serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self, NetError> {
        Self::from_json(&serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn p_norm(it: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p.is_infinite() {
        it.fold(0.0, |m, v| m.max(v.abs()))
    } else if p == 1.0 {
        it.map(f64::abs).sum()
    } else {
        it.map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// JSON form of [`LayeredNet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetJson {
    pub d: usize,
    pub layers: Vec<LayerJson>,
    pub out_re: Vec<f64>,
    pub out_im: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerJson {
    /// Row-major `d_k x d_{k-1}` matrix.
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub act: ActSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActSpec {
    Shared(Activation),
    PerUnit(Vec<Activation>),
}

/// One-dimensional ReLU expansion `c + sum_i s_i relu(t - k_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluInterpolant {
    pub constant: Complex64,
    pub knots: Vec<f64>,
    pub slopes: Vec<Complex64>,
}

impl ReluInterpolant {
    pub fn eval(&self, t: f64) -> Complex64 {
        self.knots
            .iter()
            .zip(&self.slopes)
            .fold(self.constant, |acc, (k, s)| acc + s * (t - k).max(0.0))
    }

    /// Hidden units used, counting one unit for the constant.
    pub fn units(&self) -> usize {
        self.knots.len() + 1
    }
}

/// Piecewise-linear interpolant of `f` on `ramps` uniform cells over
/// `[-radius, radius]`, constant outside; `ramps + 1` ReLU units plus one
/// constant unit.
pub fn relu_interpolant<F: Fn(f64) -> Complex64>(
    f: F,
    radius: f64,
    ramps: usize,
) -> ReluInterpolant {
    let n = ramps.max(1);
    let h = 2.0 * radius / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| -radius + h * i as f64).collect();
    let ys: Vec<Complex64> = xs.iter().map(|&x| f(x)).collect();
    let mut slopes = Vec::with_capacity(n + 1);
    let mut prev = Complex64::new(0.0, 0.0);
    for i in 0..=n {
        let s = if i < n {
            (ys[i + 1] - ys[i]) / h
        } else {
            Complex64::new(0.0, 0.0)
        };
        slopes.push(s - prev);
        prev = s;
    }
    ReluInterpolant {
        constant: ys[0],
        knots: xs,
        slopes,
    }
}

/// ReLU interpolant sized by the resynthesis budget so that an
/// `L`-Lipschitz `f` (constant outside `[-R, R]`) is matched within `eps`.
pub fn relu_resynthesize<F: Fn(f64) -> Complex64>(
    f: F,
    lip: f64,
    radius: f64,
    eps: f64,
) -> Result<ReluInterpolant, NetError> {
    let budget = resynthesis_budget(RELU_RESYNTHESIS_RATE, lip, radius, eps)?;
    if lip * radius <= eps {
        // The constant f(0) is already within eps.
        return Ok(ReluInterpolant {
            constant: f(0.0),
            knots: vec![],
            slopes: vec![],
        });
    }
    Ok(relu_interpolant(f, radius, budget.saturating_sub(2).max(1)))
}
