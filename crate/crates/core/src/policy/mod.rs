//! Stochastic decision rule: a fully-connected ReLU network with a softmax head,
//! stored as one flat parameter vector, with an exact backpropagated score function.
//!
//! Parameter layout, layer by layer from the input: the weight matrix row-major
//! (`W[out][in]`), followed by that layer's bias when it has one. The first hidden
//! layer carries no bias unless `bias_on_first_hidden` is set; every later layer,
//! including the output layer, does.

mod checkpoint;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::episode::{StateVector, STATE_DIM};
use crate::error::{Error, Result};

pub use checkpoint::{header_len, load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub bias_on_first_hidden: bool,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            input_dim: STATE_DIM,
            hidden_dims: vec![400, 600, 800, 600, 400],
            output_dim: 5,
            bias_on_first_hidden: false,
        }
    }
}

impl Architecture {
    pub fn new(hidden_dims: Vec<usize>) -> Self {
        Architecture {
            hidden_dims,
            ..Architecture::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::domain(format!("all layer widths must be >= 1: {self}")));
        }
        Ok(())
    }

    /// (fan_in, fan_out, has_bias) for each affine layer.
    fn layers(&self) -> Vec<(usize, usize, bool)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend(&self.hidden_dims);
        dims.push(self.output_dim);
        let last = dims.len() - 2;
        (0..=last)
            .map(|l| {
                let bias = if l == 0 && l != last { self.bias_on_first_hidden } else { true };
                (dims[l], dims[l + 1], bias)
            })
            .collect()
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}→{:?}→{}", self.input_dim, self.hidden_dims, self.output_dim)
    }
}

/// Number of entries in θ for `arch`.
pub fn param_count(arch: &Architecture) -> usize {
    arch.layers()
        .iter()
        .map(|&(i, o, b)| i * o + if b { o } else { 0 })
        .sum()
}

/// Per-feature affine input map `x' = (x - offset) / scale`. Off by default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl InputScaling {
    pub fn new(offset: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if offset.len() != scale.len() {
            return Err(Error::domain("scaling offset and scale differ in length"));
        }
        if scale.iter().any(|s| !(s.is_finite() && *s != 0.0)) || offset.iter().any(|o| !o.is_finite()) {
            return Err(Error::domain("scaling entries must be finite with non-zero scale"));
        }
        Ok(InputScaling { offset, scale })
    }

    /// Divides each state feature by a typical seasonal magnitude.
    pub fn typical_magnitudes() -> Self {
        InputScaling {
            offset: vec![0.0; STATE_DIM],
            scale: vec![85.0, 6.5, 25.0, 22.0, 45.0, 44.0, 41.0, 400.0, 300.0],
        }
    }

    /// Maps each feature's typical seasonal range onto roughly [-1, 1].
    pub fn centered() -> Self {
        let half: Vec<f64> = Self::typical_magnitudes().scale.iter().map(|m| m / 2.0).collect();
        InputScaling {
            offset: half.clone(),
            scale: half,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    fan_in: usize,
    fan_out: usize,
    weights: usize,
    bias: Option<usize>,
}

/// θ together with the shape that gives it meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParameters {
    pub arch: Architecture,
    pub theta: Vec<f64>,
    pub scaling: Option<InputScaling>,
}

impl PolicyParameters {
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let n = param_count(&arch);
        Ok(PolicyParameters {
            arch,
            theta: vec![0.0; n],
            scaling: None,
        })
    }

    pub fn from_theta(arch: Architecture, theta: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let n = param_count(&arch);
        if theta.len() != n {
            return Err(Error::domain(format!(
                "θ has {} entries but {arch} needs {n}",
                theta.len()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("θ contains non-finite entries".into()));
        }
        Ok(PolicyParameters {
            arch,
            theta,
            scaling: None,
        })
    }

    pub fn with_scaling(mut self, scaling: Option<InputScaling>) -> Result<Self> {
        if let Some(s) = &scaling {
            if s.offset.len() != self.arch.input_dim {
                return Err(Error::domain(format!(
                    "input scaling has {} features, network takes {}",
                    s.offset.len(),
                    self.arch.input_dim
                )));
            }
        }
        self.scaling = scaling;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    fn segments(&self) -> Vec<Segment> {
        let mut offset = 0;
        self.arch
            .layers()
            .into_iter()
            .map(|(fan_in, fan_out, has_bias)| {
                let weights = offset;
                offset += fan_in * fan_out;
                let bias = has_bias.then(|| {
                    let b = offset;
                    offset += fan_out;
                    b
                });
                Segment {
                    fan_in,
                    fan_out,
                    weights,
                    bias,
                }
            })
            .collect()
    }

    fn input(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.arch.input_dim {
            return Err(Error::domain(format!(
                "input has {} features, network takes {}",
                x.len(),
                self.arch.input_dim
            )));
        }
        Ok(match &self.scaling {
            None => x.to_vec(),
            Some(s) => x
                .iter()
                .zip(s.offset.iter().zip(&s.scale))
                .map(|(v, (o, sc))| (v - o) / sc)
                .collect(),
        })
    }

    /// Hidden activations (post-ReLU, input first) and output probabilities.
    fn run(&self, x: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let segments = self.segments();
        let mut acts = vec![self.input(x)?];
        let last = segments.len() - 1;
        for (l, seg) in segments.iter().enumerate() {
            let h = &acts[l];
            let w = &self.theta[seg.weights..seg.weights + seg.fan_in * seg.fan_out];
            let mut z: Vec<f64> = match seg.bias {
                Some(b) => self.theta[b..b + seg.fan_out].to_vec(),
                None => vec![0.0; seg.fan_out],
            };
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * seg.fan_in..(o + 1) * seg.fan_in];
                *zo += row.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
            }
            if z.iter().any(|v| !v.is_finite()) {
                let name = if l == last { "output".to_string() } else { format!("hidden {}", l + 1) };
                return Err(Error::Numeric(format!("non-finite pre-activation in {name} layer")));
            }
            if l == last {
                return Ok((acts, softmax(&z)));
            }
            for v in &mut z {
                *v = v.max(0.0);
            }
            acts.push(z);
        }
        unreachable!("network has an output layer")
    }

    /// π(·|s) on a raw feature vector.
    pub fn forward_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.run(x).map(|(_, p)| p)
    }

    /// Adds `scale · ∇θ log π(action | x)` into `out` (same layout as θ) and returns π(·|x).
    pub fn accumulate_grad_log_prob(
        &self,
        x: &[f64],
        action: usize,
        scale: f64,
        out: &mut [f64],
    ) -> Result<Vec<f64>> {
        if action >= self.arch.output_dim {
            return Err(Error::domain(format!(
                "action {action} out of range for {} outputs",
                self.arch.output_dim
            )));
        }
        if out.len() != self.theta.len() {
            return Err(Error::domain("gradient buffer has the wrong length"));
        }
        let (acts, probs) = self.run(x)?;
        let segments = self.segments();
        // d log π(a) / d logits = onehot(a) - π
        let mut delta: Vec<f64> = probs.iter().map(|p| -p).collect();
        delta[action] += 1.0;

        for l in (0..segments.len()).rev() {
            let seg = segments[l];
            let h = &acts[l];
            let w = &self.theta[seg.weights..seg.weights + seg.fan_in * seg.fan_out];
            let gw = &mut out[seg.weights..seg.weights + seg.fan_in * seg.fan_out];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let sd = scale * d;
                let row = &mut gw[o * seg.fan_in..(o + 1) * seg.fan_in];
                for (g, hi) in row.iter_mut().zip(h) {
                    *g += sd * hi;
                }
            }
            if let Some(b) = seg.bias {
                for (g, d) in out[b..b + seg.fan_out].iter_mut().zip(&delta) {
                    *g += scale * d;
                }
            }
            if l == 0 {
                break;
            }
            // back through W, then the ReLU of the layer below
            let mut next = vec![0.0; seg.fan_in];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &w[o * seg.fan_in..(o + 1) * seg.fan_in];
                for (n, wi) in next.iter_mut().zip(row) {
                    *n += d * wi;
                }
            }
            for (n, a) in next.iter_mut().zip(h) {
                if *a <= 0.0 {
                    *n = 0.0;
                }
            }
            delta = next;
        }
        Ok(probs)
    }

    /// Summary statistics of θ.
    pub fn stats(&self) -> ParamStats {
        let n = self.theta.len();
        let l2 = self.theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        let max_abs = self.theta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mean = if n == 0 { 0.0 } else { self.theta.iter().sum::<f64>() / n as f64 };
        ParamStats {
            count: n,
            l2_norm: l2,
            max_abs,
            mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamStats {
    pub count: usize,
    pub l2_norm: f64,
    pub max_abs: f64,
    pub mean: f64,
}

/// Softmax with the maximum logit subtracted first.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// θ with every entry drawn i.i.d. from N(0, scale²), in layout order.
pub fn init_parameters<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R, scale: f64) -> Result<PolicyParameters> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::domain(format!("init scale must be > 0, got {scale}")));
    }
    arch.validate()?;
    let theta = (0..param_count(arch))
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect();
    PolicyParameters::from_theta(arch.clone(), theta)
}

/// π(·|s).
pub fn forward(params: &PolicyParameters, state: &StateVector) -> Result<Vec<f64>> {
    params.forward_features(&state.to_array())
}

/// Inverse-CDF draw over the ordered action set.
pub fn sample_action<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<usize> {
    let total: f64 = probs.iter().sum();
    if probs.is_empty() || (total - 1.0).abs() > 1e-6 || probs.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::domain(format!(
            "not a probability vector (sum {total}): {probs:?}"
        )));
    }
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return Ok(i);
        }
    }
    // rounding left u above the final cumulative sum
    Ok(probs.iter().rposition(|p| *p > 0.0).expect("some mass"))
}

/// ∇θ log π(action | state), same layout as θ.
pub fn grad_log_prob(params: &PolicyParameters, state: &StateVector, action: usize) -> Result<Vec<f64>> {
    let mut g = vec![0.0; params.len()];
    params.accumulate_grad_log_prob(&state.to_array(), action, 1.0, &mut g)?;
    Ok(g)
}

/// θ ← θ + α·G·grad. Fails without modifying θ if any entry would become non-finite.
pub fn apply_update(params: &mut PolicyParameters, alpha: f64, g_return: f64, grad: &[f64]) -> Result<()> {
    if grad.len() != params.theta.len() {
        return Err(Error::domain(format!(
            "gradient has {} entries, θ has {}",
            grad.len(),
            params.theta.len()
        )));
    }
    let step = alpha * g_return;
    if let Some(i) = params
        .theta
        .iter()
        .zip(grad)
        .position(|(t, g)| !(t + step * g).is_finite())
    {
        return Err(Error::Numeric(format!(
            "update would make θ[{i}] non-finite (αG = {step}, grad = {})",
            grad[i]
        )));
    }
    for (t, g) in params.theta.iter_mut().zip(grad) {
        *t += step * g;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
