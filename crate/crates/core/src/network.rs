//! Fully-connected `τ ↦ u(τ)` network with tanh hidden layers and a softmax
//! head, together with its exact input derivative `du/dτ` and parameter
//! gradients of losses that depend on both `u` and `du/dτ`.
//!
//! The forward pass carries a tangent alongside every activation (forward
//! mode in the scalar input). The backward pass then propagates adjoints of
//! both the primal and the tangent streams layer by layer, which is what a
//! residual loss containing `du/dτ` needs.
//!
//! Weights are stored `fan_in × fan_out`, row-major, so a layer is
//! `A = H W + b` over a batch `H` of row vectors.

use std::ops::Range;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    Tanh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Softmax,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkArchitecture {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub output_dim: usize,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
}

impl NetworkArchitecture {
    /// `1 → hidden… → outputs`, tanh / softmax.
    pub fn new(hidden_layers: Vec<usize>, output_dim: usize) -> Result<Self> {
        let arch = Self {
            input_dim: 1,
            hidden_layers,
            output_dim,
            hidden_activation: HiddenActivation::Tanh,
            output_activation: OutputActivation::Softmax,
        };
        arch.validate()?;
        Ok(arch)
    }

    /// Two hidden layers of 50 units.
    pub fn default_for(num_states: usize) -> Result<Self> {
        Self::new(vec![50, 50], num_states)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim != 1 {
            return Err(Error::contract("the network input is time only (input_dim = 1)"));
        }
        if self.output_dim < 2 {
            return Err(Error::contract("softmax head needs at least two outputs"));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::contract("hidden layer widths must be at least 1"));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every affine layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input_dim];
        widths.extend(&self.hidden_layers);
        widths.push(self.output_dim);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| (i + 1) * o).sum()
    }

    /// Compact descriptor such as `1-50-50-3`.
    pub fn descriptor(&self) -> String {
        let mut parts = vec![self.input_dim.to_string()];
        parts.extend(self.hidden_layers.iter().map(|w| w.to_string()));
        parts.push(self.output_dim.to_string());
        parts.join("-")
    }
}

/// Location of one affine layer inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerLayout {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Range<usize>,
    pub bias: Range<usize>,
}

fn build_layout(arch: &NetworkArchitecture) -> Vec<LayerLayout> {
    let mut offset = 0;
    arch.layer_shapes()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let weights = offset..offset + fan_in * fan_out;
            let bias = weights.end..weights.end + fan_out;
            offset = bias.end;
            LayerLayout {
                fan_in,
                fan_out,
                weights,
                bias,
            }
        })
        .collect()
}

/// All weights and biases as one flat vector.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParameters {
    arch: NetworkArchitecture,
    layout: Vec<LayerLayout>,
    values: Vec<f64>,
}

impl NetworkParameters {
    pub fn zeros(arch: NetworkArchitecture) -> Result<Self> {
        let n = arch.num_parameters();
        Self::from_values(arch, vec![0.0; n])
    }

    pub fn from_values(arch: NetworkArchitecture, values: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if values.len() != arch.num_parameters() {
            return Err(Error::contract(format!(
                "{} parameter values for architecture {} ({} expected)",
                values.len(),
                arch.descriptor(),
                arch.num_parameters()
            )));
        }
        let layout = build_layout(&arch);
        Ok(Self {
            arch,
            layout,
            values,
        })
    }

    pub fn architecture(&self) -> &NetworkArchitecture {
        &self.arch
    }

    pub fn layout(&self) -> &[LayerLayout] {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn weights(&self, l: &LayerLayout) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((l.fan_in, l.fan_out), &self.values[l.weights.clone()])
            .expect("layout matches architecture")
    }

    fn bias(&self, l: &LayerLayout) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.values[l.bias.clone()])
    }
}

/// Glorot-uniform weights (`±√(6/(fan_in+fan_out))`), zero biases; a pure
/// function of `(arch, seed)`.
pub fn initialize_parameters(arch: &NetworkArchitecture, seed: u64) -> Result<NetworkParameters> {
    let mut params = NetworkParameters::zeros(arch.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = params.layout.clone();
    for l in &layout {
        let bound = (6.0 / (l.fan_in + l.fan_out) as f64).sqrt();
        for w in &mut params.values[l.weights.clone()] {
            *w = rng.random_range(-bound..bound);
        }
    }
    Ok(params)
}

/// Network output and its input derivative at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardResult {
    pub u: Vec<f64>,
    pub du: Vec<f64>,
}

/// Activations of one hidden layer with their tangents stacked underneath:
/// rows `0..n` hold `h`, rows `n..2n` hold `dh/dτ`.
#[derive(Clone, Debug, Default)]
struct HiddenCache {
    hd: Array2<f64>,
    /// Pre-activation tangent `da/dτ`.
    da: Array2<f64>,
}

/// Evaluation of the network over a batch of inputs, retaining everything
/// the backward pass needs. Reusing one value across calls of
/// [`forward_batch_into`] avoids reallocating its buffers.
#[derive(Clone, Debug, Default)]
pub struct BatchForward {
    /// `[τ; 1]`, the input and its tangent.
    inputs: Array2<f64>,
    hidden: Vec<HiddenCache>,
    /// `[z; dz]` of the output layer.
    zdz: Array2<f64>,
    /// Softmax outputs, one row per input.
    pub u: Array2<f64>,
    /// `du/dτ`, one row per input.
    pub du: Array2<f64>,
}

impl BatchForward {
    pub fn len(&self) -> usize {
        self.u.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.u.nrows() == 0
    }

    fn dz(&self) -> ArrayView2<'_, f64> {
        self.zdz.slice(s![self.len().., ..])
    }
}

/// Scratch buffers of [`backward_into`].
#[derive(Clone, Debug, Default)]
pub struct BackwardScratch {
    g: Array2<f64>,
    g_below: Array2<f64>,
    g_u: Array2<f64>,
    g_w: Array2<f64>,
}

/// Resizes `a` to `shape` without preserving contents; no-op when it fits.
fn ensure(a: &mut Array2<f64>, shape: (usize, usize)) {
    if a.dim() != shape {
        *a = Array2::zeros(shape);
    }
}

/// `tanh` through one `exp`; absolute error on the order of 1e-16.
#[inline]
fn tanh(x: f64) -> f64 {
    let e = (-2.0 * x.abs()).exp();
    ((1.0 - e) / (1.0 + e)).copysign(x)
}

/// `out = [X; dX] W` plus the bias on the primal half.
fn affine_into(x: &Array2<f64>, w: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>, n: usize, out: &mut Array2<f64>) {
    ensure(out, (x.nrows(), w.ncols()));
    general_mat_mul(1.0, x, &w, 0.0, out);
    for mut r in out.slice_mut(s![..n, ..]).rows_mut() {
        r += &b;
    }
}

pub fn forward_batch(params: &NetworkParameters, taus: &[f64]) -> Result<BatchForward> {
    let mut out = BatchForward::default();
    forward_batch_into(params, taus, &mut out)?;
    Ok(out)
}

pub fn forward_batch_into(params: &NetworkParameters, taus: &[f64], out: &mut BatchForward) -> Result<()> {
    if let Some(t) = taus.iter().find(|t| !t.is_finite()) {
        return Err(Error::contract(format!("network input {t} is not finite")));
    }
    let n = taus.len();
    ensure(&mut out.inputs, (2 * n, 1));
    out.inputs.fill(1.0);
    out.inputs.column_mut(0).slice_mut(s![..n]).assign(&ArrayView1::from(taus));
    let (hidden_layout, out_layout) = params.layout.split_at(params.layout.len() - 1);

    out.hidden.resize_with(hidden_layout.len(), HiddenCache::default);
    for (i, l) in hidden_layout.iter().enumerate() {
        let (below, rest) = out.hidden.split_at_mut(i);
        let x = below.last().map_or(&out.inputs, |c| &c.hd);
        let cache = &mut rest[0];
        affine_into(x, params.weights(l), params.bias(l), n, &mut cache.hd);
        let (mut h, mut dh) = cache.hd.view_mut().split_at(Axis(0), n);
        ensure(&mut cache.da, (n, l.fan_out));
        cache.da.assign(&dh);
        Zip::from(&mut h).and(&mut dh).for_each(|h, dh| {
            *h = tanh(*h);
            *dh *= 1.0 - *h * *h;
        });
    }

    let l = &out_layout[0];
    let x = out.hidden.last().map_or(&out.inputs, |c| &c.hd);
    affine_into(x, params.weights(l), params.bias(l), n, &mut out.zdz);
    let (z, dz) = out.zdz.view().split_at(Axis(0), n);
    ensure(&mut out.u, (n, l.fan_out));
    ensure(&mut out.du, (n, l.fan_out));
    out.u.assign(&z);
    for mut row in out.u.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    // du = u ∘ (dz − Σ u∘dz)
    Zip::from(out.du.rows_mut()).and(out.u.rows()).and(dz.rows()).for_each(|mut d, u, dz| {
        let s: f64 = u.iter().zip(dz.iter()).map(|(a, b)| a * b).sum();
        Zip::from(&mut d).and(&u).and(&dz).for_each(|d, &u, &dz| *d = u * (dz - s));
    });
    Ok(())
}

/// `u(τ)` and `du/dτ` at a single input.
pub fn forward(params: &NetworkParameters, tau: f64) -> Result<ForwardResult> {
    let b = forward_batch(params, &[tau])?;
    Ok(ForwardResult {
        u: b.u.row(0).to_vec(),
        du: b.du.row(0).to_vec(),
    })
}

/// Gradient with respect to all parameters of `Σ_ik seed_u[i,k]·u[i,k] +
/// seed_du[i,k]·du[i,k]`, i.e. the pull-back of a loss whose partials with
/// respect to the batch outputs and their input derivatives are the seeds.
pub fn backward(
    params: &NetworkParameters,
    fwd: &BatchForward,
    seed_u: &Array2<f64>,
    seed_du: &Array2<f64>,
) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; params.len()];
    backward_into(params, fwd, seed_u, seed_du, &mut BackwardScratch::default(), &mut grad)?;
    Ok(grad)
}

/// [`backward`] writing into `grad` and reusing `scratch`.
pub fn backward_into(
    params: &NetworkParameters,
    fwd: &BatchForward,
    seed_u: &Array2<f64>,
    seed_du: &Array2<f64>,
    scratch: &mut BackwardScratch,
    grad: &mut [f64],
) -> Result<()> {
    let shape = fwd.u.dim();
    if seed_u.dim() != shape || seed_du.dim() != shape {
        return Err(Error::Capability(format!(
            "loss seeds must be {}x{} (one row per input, one column per output); got {:?} and {:?}",
            shape.0,
            shape.1,
            seed_u.dim(),
            seed_du.dim()
        )));
    }
    if grad.len() != params.len() {
        return Err(Error::contract("gradient buffer does not match the parameter count"));
    }
    let (n, k) = shape;
    let u = &fwd.u;
    let dz = fwd.dz();
    let BackwardScratch { g, g_below, g_u, g_w } = scratch;

    // du = u ∘ (dz − s), s = Σ u∘dz; then the softmax pull-back of the
    // total adjoint of u. Rows 0..n of `g` receive ∂/∂z, rows n..2n ∂/∂dz.
    ensure(g, (2 * n, k));
    ensure(g_u, (n, k));
    g_u.assign(seed_u);
    {
        let (mut g_z, mut g_dz) = g.view_mut().split_at(Axis(0), n);
        for i in 0..n {
            let (mut c, mut s) = (0.0, 0.0);
            for j in 0..k {
                c += seed_du[[i, j]] * u[[i, j]];
                s += u[[i, j]] * dz[[i, j]];
            }
            let mut r = 0.0;
            for j in 0..k {
                let (sdu, uj, dzj) = (seed_du[[i, j]], u[[i, j]], dz[[i, j]]);
                g_dz[[i, j]] = (sdu - c) * uj;
                g_u[[i, j]] += sdu * (dzj - s) - dzj * c;
                r += uj * g_u[[i, j]];
            }
            for j in 0..k {
                g_z[[i, j]] = (g_u[[i, j]] - r) * u[[i, j]];
            }
        }
    }

    for li in (0..params.layout.len()).rev() {
        let l = &params.layout[li];
        let x = if li == 0 { &fwd.inputs } else { &fwd.hidden[li - 1].hd };
        // [a; da] = [x; dx] W + [b; 0]
        ensure(g_w, (l.fan_in, l.fan_out));
        general_mat_mul(1.0, &x.t(), &*g, 0.0, g_w);
        grad[l.weights.clone()].copy_from_slice(g_w.as_slice().expect("standard layout"));
        let g_b = &mut grad[l.bias.clone()];
        g_b.fill(0.0);
        for row in g.slice(s![..n, ..]).rows() {
            for (b, v) in g_b.iter_mut().zip(row) {
                *b += v;
            }
        }
        if li == 0 {
            break;
        }
        // Into the layer below: h = tanh(a), dh = (1 − h²) da.
        ensure(g_below, (2 * n, l.fan_in));
        general_mat_mul(1.0, &*g, &params.weights(l).t(), 0.0, g_below);
        let cache = &fwd.hidden[li - 1];
        let h = cache.hd.slice(s![..n, ..]);
        let (mut gh, mut gdh) = g_below.view_mut().split_at(Axis(0), n);
        Zip::from(&mut gh).and(&mut gdh).and(&h).and(&cache.da).for_each(|gh, gdh, &h, &da| {
            let sech2 = 1.0 - h * h;
            *gh = sech2 * (*gh - 2.0 * h * da * *gdh);
            *gdh *= sech2;
        });
        std::mem::swap(g, g_below);
    }
    Ok(())
}

/// Partials of a scalar loss with respect to the batch outputs.
pub struct LossSeeds {
    pub value: f64,
    pub d_u: Array2<f64>,
    pub d_du: Array2<f64>,
}

/// A scalar loss built from network outputs `u` and derivatives `du/dτ` at a
/// fixed set of inputs. This is the class of losses the engine can
/// differentiate; anything else is a capability error.
pub trait LossEvaluator {
    fn inputs(&self) -> &[f64];

    fn evaluate(&self, u: ArrayView2<'_, f64>, du: ArrayView2<'_, f64>) -> Result<LossSeeds>;
}

/// Loss value and `∂loss/∂θ` aligned with the parameter layout.
pub fn loss_gradient(
    params: &NetworkParameters,
    evaluator: &dyn LossEvaluator,
) -> Result<(f64, Vec<f64>)> {
    let fwd = forward_batch(params, evaluator.inputs())?;
    let seeds = evaluator.evaluate(fwd.u.view(), fwd.du.view())?;
    let grad = backward(params, &fwd, &seeds.d_u, &seeds.d_du)?;
    Ok((seeds.value, grad))
}

/// Loss value only.
pub fn loss_value(params: &NetworkParameters, evaluator: &dyn LossEvaluator) -> Result<f64> {
    let fwd = forward_batch(params, evaluator.inputs())?;
    Ok(evaluator.evaluate(fwd.u.view(), fwd.du.view())?.value)
}
