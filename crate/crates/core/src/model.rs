//! The plane-wave field representation
//!
//! ```text
//! p̃(x) = (1/N) Σ_j exp(ik(x·s_j + d_j)) h̃(s_j)
//! ```
//!
//! with trainable directions `s_j` (stored as angles), phase offsets `d_j` and
//! a complex-valued feedforward network `h̃`. Point sources are added in closed
//! form through [`monopole`].
//!
//! # Flat parameter layout
//!
//! Optimisation and serialization use one real vector, in this order:
//!
//! 1. `θ_j` for all `j`, then (3D only) `φ_j` for all `j`;
//! 2. `d_j` for all `j`;
//! 3. for every layer in order: the weight matrix row-major (output-major)
//!    with real and imaginary parts interleaved, then the bias vector
//!    interleaved the same way.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, dot, Dim, DirectionAngles, PhysicalConfig, ShoeboxDomain, Vec3};
use crate::special;

/// Hidden layer widths of the density network.
pub const HIDDEN: [usize; 2] = [10, 10];

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// One fully connected complex layer, `z = W u + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major `n_out × n_in`.
    pub weights: Vec<Complex64>,
    pub bias: Vec<Complex64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![ZERO; n_in * n_out],
            bias: vec![ZERO; n_out],
        }
    }

    fn real_len(&self) -> usize {
        2 * (self.weights.len() + self.bias.len())
    }

    fn apply(&self, input: &[Complex64], out: &mut [Complex64]) {
        for (o, z) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            *z = row
                .iter()
                .zip(input)
                .fold(self.bias[o], |acc, (w, u)| acc + w * u);
        }
    }
}

/// Split ReLU: `max(Re z, 0) + i max(Im z, 0)`.
#[inline]
fn split_relu(z: Complex64) -> Complex64 {
    Complex64::new(z.re.max(0.0), z.im.max(0.0))
}

/// Complex-valued density network `h̃: R^D → C`.
///
/// Hidden layers use [split ReLU](split_relu); the output layer is affine.
#[derive(Clone, Debug, PartialEq)]
pub struct CvnnParams {
    pub layers: Vec<Layer>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Default, Clone, Debug)]
pub(crate) struct Tape {
    /// `inputs[l]` is the input of layer `l`; `pre[l]` its affine output.
    inputs: Vec<Vec<Complex64>>,
    pre: Vec<Vec<Complex64>>,
}

impl Tape {
    /// Signs of the real and imaginary hidden pre-activations, in layer order.
    pub(crate) fn hidden_signs(&self) -> impl Iterator<Item = bool> + '_ {
        let hidden = self.pre.len().saturating_sub(1);
        self.pre[..hidden]
            .iter()
            .flatten()
            .flat_map(|z| [z.re > 0.0, z.im > 0.0])
    }
}

impl CvnnParams {
    /// `sizes = [input, hidden..., output]`.
    pub fn zeros(sizes: &[usize]) -> Self {
        Self {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        }
    }

    /// Complex He initialisation: real and imaginary parts of every weight are
    /// independent `N(0, 1/M)` with `M` the fan-in; biases start at zero.
    pub fn he_init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        for layer in &mut net.layers {
            let normal = Normal::new(0.0, (1.0 / layer.n_in as f64).sqrt()).expect("valid std");
            for w in &mut layer.weights {
                let re = normal.sample(rng);
                let im = normal.sample(rng);
                *w = Complex64::new(re, im);
            }
        }
        net
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].n_in];
        s.extend(self.layers.iter().map(|l| l.n_out));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn real_param_count(&self) -> usize {
        self.layers.iter().map(Layer::real_len).sum()
    }

    fn check(&self) -> Result<()> {
        for w in self.layers.windows(2) {
            if w[0].n_out != w[1].n_in {
                return Err(Error::DimensionMismatch {
                    expected: w[0].n_out,
                    got: w[1].n_in,
                });
            }
        }
        match self.layers.last() {
            Some(l) if l.n_out == 1 => Ok(()),
            Some(l) => Err(Error::DimensionMismatch {
                expected: 1,
                got: l.n_out,
            }),
            None => Err(Error::InvalidConfig("network has no layers".into())),
        }
    }

    /// `h̃(s)`; the real input is promoted to complex with zero imaginary part.
    pub fn forward(&self, s: &[f64]) -> Result<Complex64> {
        self.check()?;
        if s.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: s.len(),
            });
        }
        let mut tape = Tape::default();
        Ok(self.forward_traced(s, &mut tape))
    }

    pub(crate) fn forward_traced(&self, s: &[f64], tape: &mut Tape) -> Complex64 {
        let n = self.layers.len();
        tape.inputs.resize(n, Vec::new());
        tape.pre.resize(n, Vec::new());
        tape.inputs[0].clear();
        tape.inputs[0].extend(s.iter().map(|&v| Complex64::new(v, 0.0)));
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = std::mem::take(&mut tape.pre[l]);
            z.resize(layer.n_out, ZERO);
            layer.apply(&tape.inputs[l], &mut z);
            if l + 1 < n {
                let next = &mut tape.inputs[l + 1];
                next.clear();
                next.extend(z.iter().map(|&v| split_relu(v)));
            }
            tape.pre[l] = z;
        }
        tape.pre[n - 1][0]
    }

    /// Reverse pass for one forward evaluation.
    ///
    /// `cotangent` is `∂L/∂Re h + i ∂L/∂Im h`. Parameter gradients are added
    /// to `grad` (this network's slice of the flat layout); the returned
    /// vector is `∂L/∂s` for the real input.
    pub(crate) fn backward(&self, tape: &Tape, cotangent: Complex64, grad: &mut [f64]) -> Vec3 {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for layer in &self.layers {
            offsets.push(off);
            off += layer.real_len();
        }
        let mut g_out = vec![cotangent];
        let mut g_in = Vec::new();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &tape.inputs[l];
            if l + 1 < self.layers.len() {
                // through the split ReLU that produced layer l+1's input
                let pre = &tape.pre[l];
                for (g, z) in g_out.iter_mut().zip(pre) {
                    let re = if z.re > 0.0 { g.re } else { 0.0 };
                    let im = if z.im > 0.0 { g.im } else { 0.0 };
                    *g = Complex64::new(re, im);
                }
            }
            let base = offsets[l];
            let nw = layer.weights.len();
            for o in 0..layer.n_out {
                let go = g_out[o];
                if go == ZERO {
                    continue;
                }
                for i in 0..layer.n_in {
                    let gw = go * input[i].conj();
                    let idx = base + 2 * (o * layer.n_in + i);
                    grad[idx] += gw.re;
                    grad[idx + 1] += gw.im;
                }
                let idx = base + 2 * (nw + o);
                grad[idx] += go.re;
                grad[idx + 1] += go.im;
            }
            g_in.clear();
            g_in.resize(layer.n_in, ZERO);
            for o in 0..layer.n_out {
                let go = g_out[o];
                if go == ZERO {
                    continue;
                }
                let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                for (gi, w) in g_in.iter_mut().zip(row) {
                    *gi += w.conj() * go;
                }
            }
            std::mem::swap(&mut g_out, &mut g_in);
        }
        let mut ds = [0.0; 3];
        for (d, g) in ds.iter_mut().zip(&g_out) {
            *d = g.re;
        }
        ds
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        for layer in &self.layers {
            for w in layer.weights.iter().chain(&layer.bias) {
                out.push(w.re);
                out.push(w.im);
            }
        }
    }

    fn read_flat(&mut self, values: &[f64]) {
        let mut it = values.chunks_exact(2);
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                let pair = it.next().expect("length checked by caller");
                *w = Complex64::new(pair[0], pair[1]);
            }
        }
    }
}

/// `h̃(s)` for a well-formed network.
pub fn cvnn_forward(net: &CvnnParams, s: &[f64]) -> Result<Complex64> {
    net.forward(s)
}

/// All trainable state of a field model.
#[derive(Clone, Debug, PartialEq)]
pub struct HergNetParams {
    pub angles: DirectionAngles,
    /// Phase offsets, multiplied by `k` inside the exponent.
    pub d: Vec<f64>,
    pub net: CvnnParams,
}

impl HergNetParams {
    /// Random initial state with the standard `D → 10 → 10 → 1` network.
    pub fn init<R: Rng + ?Sized>(dim: Dim, n_quad: usize, rng: &mut R) -> Self {
        Self::init_with(dim, n_quad, &HIDDEN, rng)
    }

    pub fn init_with<R: Rng + ?Sized>(dim: Dim, n_quad: usize, hidden: &[usize], rng: &mut R) -> Self {
        let angles = geometry::sample_directions(dim, n_quad, rng);
        let d = (0..n_quad).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let net = CvnnParams::he_init(&layer_sizes(dim, hidden), rng);
        Self { angles, d, net }
    }

    pub fn dim(&self) -> Dim {
        self.angles.dim
    }

    pub fn n_quad(&self) -> usize {
        self.d.len()
    }

    pub fn param_count(&self) -> usize {
        self.dim().count() * self.n_quad() + self.net.real_param_count()
    }

    pub(crate) fn d_offset(&self) -> usize {
        self.angles.angles_per_direction() * self.n_quad()
    }

    pub(crate) fn net_offset(&self) -> usize {
        self.dim().count() * self.n_quad()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(&self.angles.theta);
        out.extend_from_slice(&self.angles.phi);
        out.extend_from_slice(&self.d);
        self.net.write_flat(&mut out);
        out
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: values.len(),
            });
        }
        let n = self.n_quad();
        let (theta, rest) = values.split_at(n);
        self.angles.theta.copy_from_slice(theta);
        let rest = if self.dim() == Dim::Three {
            let (phi, rest) = rest.split_at(n);
            self.angles.phi.copy_from_slice(phi);
            rest
        } else {
            rest
        };
        let (d, rest) = rest.split_at(n);
        self.d.copy_from_slice(d);
        self.net.read_flat(rest);
        Ok(())
    }

    /// Amplitudes `h̃(s_j) exp(ik d_j) / N` and directions for repeated evaluation.
    pub fn plane_waves(&self, k: f64) -> PlaneWaves {
        let n = self.n_quad();
        let mut tape = Tape::default();
        let mut dirs = Vec::with_capacity(n);
        let mut amps = Vec::with_capacity(n);
        let d = self.dim().count();
        for j in 0..n {
            let s = self.angles.unit(j);
            let h = self.net.forward_traced(&s[..d], &mut tape);
            dirs.push(s);
            amps.push(h * Complex64::from_polar(1.0 / n as f64, k * self.d[j]));
        }
        PlaneWaves {
            dim: self.dim(),
            k,
            dirs,
            amps,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ParamsFile {
            format: PARAMS_FORMAT.to_string(),
            dim: self.dim().count(),
            n_quad: self.n_quad(),
            layer_sizes: self.net.sizes(),
            values: self.to_flat(),
        };
        let text = serde_json::to_string(&file).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ParamsFile =
            serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
        if file.format != PARAMS_FORMAT {
            return Err(Error::Format(format!("unknown format tag {}", file.format)));
        }
        let dim = Dim::from_count(file.dim)?;
        if file.layer_sizes.first() != Some(&file.dim) || file.layer_sizes.last() != Some(&1) {
            return Err(Error::Format(format!(
                "layer sizes {:?} incompatible with dimension {}",
                file.layer_sizes, file.dim
            )));
        }
        let n = file.n_quad;
        let mut params = Self {
            angles: DirectionAngles {
                dim,
                theta: vec![0.0; n],
                phi: if dim == Dim::Three { vec![0.0; n] } else { Vec::new() },
            },
            d: vec![0.0; n],
            net: CvnnParams::zeros(&file.layer_sizes),
        };
        params.set_flat(&file.values)?;
        Ok(params)
    }
}

const PARAMS_FORMAT: &str = "hergnet-params-v1";

/// On-disk form: a header plus the flat vector in the documented layout.
#[derive(Serialize, Deserialize)]
struct ParamsFile {
    format: String,
    dim: usize,
    n_quad: usize,
    layer_sizes: Vec<usize>,
    values: Vec<f64>,
}

pub fn layer_sizes(dim: Dim, hidden: &[usize]) -> Vec<usize> {
    let mut sizes = vec![dim.count()];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    sizes
}

/// `D` axial-layer parameters for the standard architecture: `D·N + net`.
pub fn param_count(dim: Dim, n_quad: usize) -> usize {
    let net: usize = layer_sizes(dim, &HIDDEN)
        .windows(2)
        .map(|w| 2 * (w[0] * w[1] + w[1]))
        .sum();
    dim.count() * n_quad + net
}

/// A field model with the network already evaluated at every direction.
#[derive(Clone, Debug)]
pub struct PlaneWaves {
    pub dim: Dim,
    pub k: f64,
    pub dirs: Vec<Vec3>,
    /// `h̃(s_j) exp(ik d_j) / N`.
    pub amps: Vec<Complex64>,
}

impl PlaneWaves {
    pub fn pressure(&self, x: &Vec3) -> Complex64 {
        self.dirs
            .iter()
            .zip(&self.amps)
            .map(|(s, a)| a * Complex64::cis(self.k * dot(x, s)))
            .sum()
    }

    pub fn field(&self, x: &Vec3) -> FieldSample {
        let mut p = ZERO;
        let mut g = [ZERO; 3];
        for (s, a) in self.dirs.iter().zip(&self.amps) {
            let term = a * Complex64::cis(self.k * dot(x, s));
            p += term;
            for (ga, sa) in g.iter_mut().zip(s) {
                *ga += term * sa;
            }
        }
        let ik = I * self.k;
        FieldSample {
            dim: self.dim,
            p,
            grad: g.map(|v| v * ik),
        }
    }
}

/// Complex pressure and its spatial gradient at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample {
    pub dim: Dim,
    pub p: Complex64,
    pub grad: [Complex64; 3],
}

impl FieldSample {
    pub fn grad(&self) -> &[Complex64] {
        &self.grad[..self.dim.count()]
    }
}

impl std::ops::Add for FieldSample {
    type Output = FieldSample;
    fn add(self, rhs: FieldSample) -> FieldSample {
        FieldSample {
            dim: self.dim,
            p: self.p + rhs.p,
            grad: [0, 1, 2].map(|a| self.grad[a] + rhs.grad[a]),
        }
    }
}

/// `p̃(x)`. Evaluates the network at every direction; use
/// [`HergNetParams::plane_waves`] when evaluating many points.
pub fn herglotz_pressure(params: &HergNetParams, x: &Vec3, k: f64) -> Complex64 {
    params.plane_waves(k).pressure(x)
}

/// `∇p̃(x) = (1/N) Σ_j ik s_j exp(ik(x·s_j + d_j)) h̃(s_j)`.
pub fn herglotz_gradient(params: &HergNetParams, x: &Vec3, k: f64) -> [Complex64; 3] {
    params.plane_waves(k).field(x).grad
}

/// Outgoing free-space Green's function for `(∇² + k²)G = -δ(x - x0)`.
///
/// 3D: `exp(ikr)/(4πr)`; 2D: `(i/4) H_0^(1)(kr)`, or `-ln(r)/(2π)` at `k = 0`.
pub fn monopole(x: &Vec3, x0: &Vec3, k: f64, dim: Dim) -> Result<FieldSample> {
    let diff = [x[0] - x0[0], x[1] - x0[1], x[2] - x0[2]];
    let r = dot(&diff, &diff).sqrt();
    if r == 0.0 {
        return Err(Error::SourceSingularity);
    }
    let (p, dp_dr) = match dim {
        Dim::Three => {
            let e = Complex64::cis(k * r) / (4.0 * PI * r);
            (e, e * Complex64::new(-1.0, k * r) / r)
        }
        Dim::Two if k == 0.0 => (
            Complex64::new(-r.ln() / (2.0 * PI), 0.0),
            Complex64::new(-1.0 / (2.0 * PI * r), 0.0),
        ),
        Dim::Two => {
            let (h0, h1) = special::hankel1_01(k * r);
            (I * 0.25 * h0, -I * 0.25 * k * h1)
        }
    };
    let mut grad = [ZERO; 3];
    for a in 0..dim.count() {
        grad[a] = dp_dr * (diff[a] / r);
    }
    Ok(FieldSample { dim, p, grad })
}

/// `p̃ + G(·|x0)` when the domain has a source, `p̃` otherwise.
pub fn total_field(
    params: &HergNetParams,
    x: &Vec3,
    config: &PhysicalConfig,
    domain: &ShoeboxDomain,
) -> Result<FieldSample> {
    total_field_with(&params.plane_waves(config.k), x, config, domain)
}

pub fn total_field_with(
    waves: &PlaneWaves,
    x: &Vec3,
    config: &PhysicalConfig,
    domain: &ShoeboxDomain,
) -> Result<FieldSample> {
    let field = waves.field(x);
    match &domain.source {
        Some(x0) => Ok(field + monopole(x, x0, config.k, domain.dim)?),
        None => Ok(field),
    }
}

/// `v_n = i (∇p · n) / (ρck)`, plain (unconjugated) dot product.
pub fn normal_velocity(sample: &FieldSample, n: &Vec3, config: &PhysicalConfig) -> Complex64 {
    let dpdn: Complex64 = sample.grad.iter().zip(n).map(|(g, na)| g * na).sum();
    I * dpdn / (config.rho * config.c * config.k)
}
