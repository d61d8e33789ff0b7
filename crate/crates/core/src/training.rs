//! Boundary loss, its exact gradient, Adam, and the training loop.
//!
//! The residual at a boundary point is `r = p - Z v_n`. For a single plane
//! wave `v_n = -(s·n) p / (ρc)`, so the model part of the residual is
//!
//! ```text
//! r_b = Σ_j exp(ik(x_b·s_j + d_j)) (h_j/N) (1 + (s_j·n_b)/β) + r_b^src
//! ```
//!
//! where `r^src` is the residual of the closed-form source field and does not
//! depend on the parameters. The loss is `(1/B) Σ_b |r_b|²`. The gradient is
//! accumulated in one pass over (point, direction) pairs and pushed through the
//! density network by a hand-written reverse pass.

use std::time::Instant;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    self, dot, BoundaryPoint, PhysicalConfig, ShoeboxDomain, Vec3,
};
use crate::fastmath;
use crate::model::{self, FieldSample, HergNetParams, Tape};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Points handled by one unit of work. Fixed so that the reduction order does
/// not depend on the thread count.
const CHUNK: usize = 128;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Boundary points per wavelength.
    pub ppw: f64,
    /// Lower bound for both the training-point and the quadrature counts.
    pub n_min: usize,
    /// Point count from which the dataset is split into two batches.
    pub batch_threshold: usize,
    pub seed: u64,
    /// Overrides the frequency rule for the number of directions.
    pub n_quad: Option<usize>,
    /// Overrides the frequency rule for the number of boundary points.
    pub n_train: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            lr: 2e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            ppw: 6.0,
            n_min: 1000,
            batch_threshold: 50_000,
            seed: 0,
            n_quad: None,
            n_train: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.adam_eps > 0.0) {
            return bad(format!("adam_eps must be positive, got {}", self.adam_eps));
        }
        if !(self.ppw >= 1.0) {
            return bad(format!("ppw must be >= 1, got {}", self.ppw));
        }
        if self.n_quad == Some(0) || self.n_train == Some(0) {
            return bad("overridden counts must be positive".into());
        }
        Ok(())
    }

    /// Number of directions at frequency `f`.
    pub fn quad_count(&self, f: f64) -> usize {
        self.n_quad
            .unwrap_or_else(|| geometry::quad_count(f, self.n_min))
    }

    /// Number of boundary points for `domain` at frequency `f`.
    pub fn train_count(&self, domain: &ShoeboxDomain, f: f64, c: f64) -> Result<usize> {
        match self.n_train {
            Some(n) => Ok(n),
            None => geometry::training_point_count(domain, f, c, self.ppw, self.n_min),
        }
    }

    pub fn batch_count(&self, n_train: usize) -> usize {
        if n_train < self.batch_threshold {
            1
        } else {
            2
        }
    }
}

/// Adam moments over the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update, applied coordinate-wise in place.
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState, config: &TrainConfig) -> Result<()> {
    let n = params.len();
    for len in [grad.len(), state.m.len(), state.v.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    state.t += 1;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for i in 0..n {
        let g = grad[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= config.lr * m_hat / (v_hat.sqrt() + config.adam_eps);
    }
    Ok(())
}

/// `p - Z v_n` for a field sample at a boundary point.
pub fn residual_of(sample: &FieldSample, point: &BoundaryPoint, config: &PhysicalConfig) -> Complex64 {
    sample.p - config.z * model::normal_velocity(sample, &point.n, config)
}

/// Residual of the source-corrected model at one boundary point.
pub fn boundary_residual(
    params: &HergNetParams,
    point: &BoundaryPoint,
    config: &PhysicalConfig,
    domain: &ShoeboxDomain,
) -> Result<Complex64> {
    let sample = model::total_field(params, &point.x, config, domain)?;
    Ok(residual_of(&sample, point, config))
}

/// Boundary samples together with the residual of the known (parameter-free)
/// part of the field at each of them.
#[derive(Clone, Debug)]
pub struct BoundaryData {
    pub points: Vec<BoundaryPoint>,
    pub offset: Vec<Complex64>,
}

fn check_finite_impedance(config: &PhysicalConfig) -> Result<()> {
    if config.z.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig("training needs a finite wall impedance".into()))
    }
}

impl BoundaryData {
    /// Offsets from the domain's point source, zero without one.
    pub fn new(points: Vec<BoundaryPoint>, config: &PhysicalConfig, domain: &ShoeboxDomain) -> Result<Self> {
        check_finite_impedance(config)?;
        match domain.source {
            Some(x0) => Self::with_known_field(points, config, |x| {
                model::monopole(x, &x0, config.k, domain.dim)
            }),
            None => {
                let offset = vec![ZERO; points.len()];
                Ok(Self { points, offset })
            }
        }
    }

    /// Offsets from an arbitrary known field `p_g`; the model then learns `p - p_g`.
    pub fn with_known_field<F>(points: Vec<BoundaryPoint>, config: &PhysicalConfig, field: F) -> Result<Self>
    where
        F: Fn(&Vec3) -> Result<FieldSample>,
    {
        check_finite_impedance(config)?;
        let offset = points
            .iter()
            .map(|pt| Ok(residual_of(&field(&pt.x)?, pt, config)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { points, offset })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Splits into `parts` contiguous, disjoint, near-equal slices.
    pub fn split(&self, parts: usize) -> Vec<BoundaryData> {
        let n = self.len();
        (0..parts)
            .map(|p| {
                let (lo, hi) = (p * n / parts, (p + 1) * n / parts);
                BoundaryData {
                    points: self.points[lo..hi].to_vec(),
                    offset: self.offset[lo..hi].to_vec(),
                }
            })
            .collect()
    }
}

/// Directions and complex amplitudes in structure-of-arrays form.
struct Waves {
    sx: Vec<f64>,
    sy: Vec<f64>,
    sz: Vec<f64>,
    /// `h_j exp(ik d_j) / N`, split into parts
    g_re: Vec<f64>,
    g_im: Vec<f64>,
    /// `h_j`
    h: Vec<Complex64>,
}

impl Waves {
    fn new(params: &HergNetParams, k: f64) -> Self {
        let n = params.n_quad();
        let d = params.dim().count();
        let mut w = Waves {
            sx: Vec::with_capacity(n),
            sy: Vec::with_capacity(n),
            sz: Vec::with_capacity(n),
            g_re: Vec::with_capacity(n),
            g_im: Vec::with_capacity(n),
            h: Vec::with_capacity(n),
        };
        let mut tape = Tape::default();
        for j in 0..n {
            let s = params.angles.unit(j);
            let h = params.net.forward_traced(&s[..d], &mut tape);
            w.sx.push(s[0]);
            w.sy.push(s[1]);
            w.sz.push(s[2]);
            w.h.push(h);
            let g = h * Complex64::from_polar(1.0 / n as f64, k * params.d[j]);
            w.g_re.push(g.re);
            w.g_im.push(g.im);
        }
        w
    }

    fn len(&self) -> usize {
        self.g_re.len()
    }
}

/// Per-direction sums over points, without the `exp(ik d_j)` factor:
/// `T = Σ ρ̄ e c`, `U = Σ ρ̄ e c x`, `V = Σ ρ̄ e n` with `ρ̄ = 2 conj(r)/B`.
/// Real and imaginary parts are kept in separate arrays.
struct Accum {
    t: [Vec<f64>; 2],
    u: [[Vec<f64>; 2]; 3],
    v: [[Vec<f64>; 2]; 3],
}

impl Accum {
    fn new(n: usize) -> Self {
        let pair = || [vec![0.0; n], vec![0.0; n]];
        Self {
            t: pair(),
            u: [pair(), pair(), pair()],
            v: [pair(), pair(), pair()],
        }
    }

    fn arrays_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.t
            .iter_mut()
            .chain(self.u.iter_mut().flatten())
            .chain(self.v.iter_mut().flatten())
    }

    fn arrays(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.t.iter().chain(self.u.iter().flatten()).chain(self.v.iter().flatten())
    }

    fn add(&mut self, other: &Accum) {
        for (mine, theirs) in self.arrays_mut().zip(other.arrays()) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
    }

    fn t(&self, j: usize) -> Complex64 {
        Complex64::new(self.t[0][j], self.t[1][j])
    }

    fn u(&self, axis: usize, j: usize) -> Complex64 {
        Complex64::new(self.u[axis][0][j], self.u[axis][1][j])
    }

    fn v(&self, axis: usize, j: usize) -> Complex64 {
        Complex64::new(self.v[axis][0][j], self.v[axis][1][j])
    }
}

struct ChunkResult {
    sum_sq: f64,
    accum: Option<Accum>,
}

/// Partial sums per lane so the residual reduction vectorises; the lane
/// layout is fixed, so results do not depend on the machine.
const LANES: usize = 4;

/// `dst += alpha * src`.
fn axpy(dst: &mut [f64], alpha: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += alpha * s;
    }
}

fn process_chunk(
    waves: &Waves,
    k: f64,
    inv_beta: Complex64,
    points: &[BoundaryPoint],
    offset: &[Complex64],
    scale: f64,
    with_grad: bool,
) -> ChunkResult {
    let n = waves.len();
    let (sx, sy, sz) = (&waves.sx[..], &waves.sy[..], &waves.sz[..]);
    let (gr, gi) = (&waves.g_re[..], &waves.g_im[..]);
    let mut phase = vec![0.0; n];
    let mut er = vec![0.0; n];
    let mut ei = vec![0.0; n];
    let mut cr = vec![0.0; n];
    let mut ci = vec![0.0; n];
    let mut accum = with_grad.then(|| Accum::new(n));
    let mut sum_sq = 0.0;
    let full = n - n % LANES;
    for (pt, off) in points.iter().zip(offset) {
        let [x0, x1, x2] = pt.x.map(|v| v * k);
        let [n0, n1, n2] = pt.n;
        for j in 0..n {
            phase[j] = x0 * sx[j] + x1 * sy[j] + x2 * sz[j];
        }
        fastmath::sincos_slice(&phase, &mut ei, &mut er);
        // c = 1 + (s·n)/β
        for j in 0..n {
            let sn = n0 * sx[j] + n1 * sy[j] + n2 * sz[j];
            cr[j] = 1.0 + sn * inv_beta.re;
            ci[j] = sn * inv_beta.im;
        }
        // r = offset + Σ_j e g c
        let mut lane_re = [0.0; LANES];
        let mut lane_im = [0.0; LANES];
        let term = |j: usize| {
            let eg_re = er[j] * gr[j] - ei[j] * gi[j];
            let eg_im = er[j] * gi[j] + ei[j] * gr[j];
            (eg_re * cr[j] - eg_im * ci[j], eg_re * ci[j] + eg_im * cr[j])
        };
        for base in (0..full).step_by(LANES) {
            for l in 0..LANES {
                let (a, b) = term(base + l);
                lane_re[l] += a;
                lane_im[l] += b;
            }
        }
        for j in full..n {
            let (a, b) = term(j);
            lane_re[0] += a;
            lane_im[0] += b;
        }
        let rr = off.re + lane_re.iter().sum::<f64>();
        let ri = off.im + lane_im.iter().sum::<f64>();
        sum_sq += rr * rr + ri * ri;

        if let Some(acc) = accum.as_mut() {
            // ρ̄ = scale * conj(r); e becomes t = ρ̄e and c becomes tc = ρ̄ec
            let (pr, pi) = (scale * rr, -scale * ri);
            let [t_re, t_im] = &mut acc.t;
            for j in 0..n {
                let tr = pr * er[j] - pi * ei[j];
                let ti = pr * ei[j] + pi * er[j];
                let tcr = tr * cr[j] - ti * ci[j];
                let tci = tr * ci[j] + ti * cr[j];
                er[j] = tr;
                ei[j] = ti;
                cr[j] = tcr;
                ci[j] = tci;
                t_re[j] += tcr;
                t_im[j] += tci;
            }
            for a in 0..3 {
                if pt.x[a] != 0.0 {
                    let [u_re, u_im] = &mut acc.u[a];
                    axpy(u_re, pt.x[a], &cr);
                    axpy(u_im, pt.x[a], &ci);
                }
                if pt.n[a] != 0.0 {
                    let [v_re, v_im] = &mut acc.v[a];
                    axpy(v_re, pt.n[a], &er);
                    axpy(v_im, pt.n[a], &ei);
                }
            }
        }
    }
    ChunkResult { sum_sq, accum }
}

/// Loss and (optionally) its gradient over the flat parameter layout.
pub fn evaluate(
    params: &HergNetParams,
    data: &BoundaryData,
    config: &PhysicalConfig,
    with_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    if data.is_empty() {
        return Err(Error::InvalidConfig("empty batch".into()));
    }
    let k = config.k;
    let inv_beta = Complex64::new(1.0, 0.0) / config.beta;
    let waves = Waves::new(params, k);
    let b = data.len() as f64;
    let scale = 2.0 / b;

    let n_chunks = data.len().div_ceil(CHUNK);
    // Bounded number of chunk accumulators alive at once; results are folded
    // in chunk order.
    let wave_size = (2 * rayon::current_num_threads()).max(1);
    let mut total_sq = 0.0;
    let mut total = with_grad.then(|| Accum::new(waves.len()));
    let mut start = 0;
    while start < n_chunks {
        let end = (start + wave_size).min(n_chunks);
        let results: Vec<ChunkResult> = (start..end)
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(data.len());
                process_chunk(
                    &waves,
                    k,
                    inv_beta,
                    &data.points[lo..hi],
                    &data.offset[lo..hi],
                    scale,
                    with_grad,
                )
            })
            .collect();
        for r in results {
            total_sq += r.sum_sq;
            if let (Some(t), Some(a)) = (total.as_mut(), r.accum.as_ref()) {
                t.add(a);
            }
        }
        start = end;
    }
    let loss = total_sq / b;
    let grad = total.map(|acc| assemble_gradient(params, &waves, &acc, k, inv_beta));
    Ok((loss, grad))
}

fn assemble_gradient(
    params: &HergNetParams,
    waves: &Waves,
    acc: &Accum,
    k: f64,
    inv_beta: Complex64,
) -> Vec<f64> {
    let n = params.n_quad();
    let dim = params.dim().count();
    let ik = Complex64::new(0.0, k);
    let mut grad = vec![0.0; params.param_count()];
    let d_off = params.d_offset();
    let net_off = params.net_offset();
    let (head, net_grad) = grad.split_at_mut(net_off);
    let mut tape = Tape::default();
    for j in 0..n {
        let phase = Complex64::cis(k * params.d[j]);
        let t = acc.t(j) * phase;
        let a = waves.h[j] / n as f64;
        head[d_off + j] = (ik * a * t).re;

        let (s, jac) = params.angles.unit_with_jacobian(j);
        let mut ds = [0.0; 3];
        for axis in 0..3 {
            let u = acc.u(axis, j) * phase;
            let v = acc.v(axis, j) * phase;
            ds[axis] = (a * (ik * u + v * inv_beta)).re;
        }
        // through the density network
        params.net.forward_traced(&s[..dim], &mut tape);
        let ds_net = params.net.backward(&tape, t.conj() / n as f64, net_grad);
        for axis in 0..dim {
            ds[axis] += ds_net[axis];
        }
        head[j] = dot(&ds, &jac[0]);
        if dim == 3 {
            head[n + j] = dot(&ds, &jac[1]);
        }
    }
    grad
}

/// `(1/B) Σ |r_b|²` over the batch.
pub fn loss(
    params: &HergNetParams,
    batch: &[BoundaryPoint],
    config: &PhysicalConfig,
    domain: &ShoeboxDomain,
) -> Result<f64> {
    let data = BoundaryData::new(batch.to_vec(), config, domain)?;
    Ok(evaluate(params, &data, config, false)?.0)
}

/// Gradient of [`loss`] with respect to the flat parameter vector.
pub fn loss_gradient(
    params: &HergNetParams,
    batch: &[BoundaryPoint],
    config: &PhysicalConfig,
    domain: &ShoeboxDomain,
) -> Result<Vec<f64>> {
    let data = BoundaryData::new(batch.to_vec(), config, domain)?;
    Ok(evaluate(params, &data, config, true)?.1.expect("gradient requested"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss_history: Vec<f64>,
    /// Seconds.
    pub wall_time: f64,
    pub n_train: usize,
    pub n_quad: usize,
    pub n_param: usize,
    pub n_batches: usize,
    pub adam_steps: u64,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        *self.loss_history.last().unwrap_or(&f64::NAN)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Samples the boundary once, initialises a model and runs Adam.
pub fn train<R: Rng + ?Sized>(
    config: &TrainConfig,
    phys: &PhysicalConfig,
    domain: &ShoeboxDomain,
    rng: &mut R,
) -> Result<(HergNetParams, TrainReport)> {
    train_observed(config, phys, domain, rng, &mut |_, _| {})
}

/// As [`train`], calling `observer(epoch, loss)` after every epoch.
pub fn train_observed<R: Rng + ?Sized>(
    config: &TrainConfig,
    phys: &PhysicalConfig,
    domain: &ShoeboxDomain,
    rng: &mut R,
    observer: &mut dyn FnMut(usize, f64),
) -> Result<(HergNetParams, TrainReport)> {
    config.validate()?;
    let n_train = config.train_count(domain, phys.f, phys.c)?;
    let n_quad = config.quad_count(phys.f);
    let points = geometry::sample_boundary(domain, n_train, rng);
    let params = HergNetParams::init(domain.dim, n_quad, rng);
    let data = BoundaryData::new(points, phys, domain)?;
    fit(config, phys, &data, params, observer)
}

/// Runs the optimisation loop on a fixed dataset from given initial parameters.
pub fn fit(
    config: &TrainConfig,
    phys: &PhysicalConfig,
    data: &BoundaryData,
    mut params: HergNetParams,
    observer: &mut dyn FnMut(usize, f64),
) -> Result<(HergNetParams, TrainReport)> {
    config.validate()?;
    let started = Instant::now();
    let n_batches = config.batch_count(data.len());
    let batches = data.split(n_batches);
    let mut flat = params.to_flat();
    let mut state = AdamState::new(flat.len());
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut epoch_loss = 0.0;
        for (bi, batch) in batches.iter().enumerate() {
            let (value, grad) = evaluate(&params, batch, phys, true)?;
            let grad = grad.expect("gradient requested");
            if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: bi });
            }
            epoch_loss += value * batch.len() as f64 / data.len() as f64;
            adam_step(&mut flat, &grad, &mut state, config)?;
            params.set_flat(&flat)?;
        }
        history.push(epoch_loss);
        observer(epoch, epoch_loss);
    }
    let report = TrainReport {
        loss_history: history,
        wall_time: started.elapsed().as_secs_f64(),
        n_train: data.len(),
        n_quad: params.n_quad(),
        n_param: params.param_count(),
        n_batches,
        adam_steps: state.t,
    };
    Ok((params, report))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckOptions {
    pub n_quad: usize,
    pub hidden: Vec<usize>,
    pub n_points: usize,
    pub n_coords: usize,
    /// Relative central-difference step, scaled by `max(1, |θ_i|)`.
    pub step: f64,
    /// Steps for the truncation/round-off sweep.
    pub sweep_steps: Vec<f64>,
    /// Adds a deliberate error to the analytic gradient (negative control).
    pub corrupt_gradient: bool,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            n_quad: 8,
            hidden: model::HIDDEN.to_vec(),
            n_points: 3,
            n_coords: 20,
            step: 1e-6,
            sweep_steps: vec![1e-4, 1e-5, 1e-6, 1e-7, 1e-8],
            corrupt_gradient: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradcheckEntry {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub max_rel_error: f64,
    pub entries: Vec<GradcheckEntry>,
    /// Coordinates rejected because the perturbation crossed a ReLU kink.
    pub skipped_near_kink: usize,
    /// `(step, max relative error)` over the same coordinates.
    pub step_sweep: Vec<(f64, f64)>,
}

fn rel_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Sign pattern of every hidden pre-activation at every direction.
fn activation_pattern(params: &HergNetParams) -> Vec<bool> {
    let d = params.dim().count();
    let mut pattern = Vec::new();
    let mut tape = Tape::default();
    for j in 0..params.n_quad() {
        let s = params.angles.unit(j);
        params.net.forward_traced(&s[..d], &mut tape);
        pattern.extend(tape.hidden_signs());
    }
    pattern
}

/// Compares the analytic gradient with central differences of the loss on a
/// small random instance.
pub fn gradcheck<R: Rng + ?Sized>(
    options: &GradcheckOptions,
    phys: &PhysicalConfig,
    domain: &ShoeboxDomain,
    rng: &mut R,
) -> Result<GradcheckReport> {
    let points = geometry::sample_boundary(domain, options.n_points, rng);
    let params = HergNetParams::init_with(domain.dim, options.n_quad, &options.hidden, rng);
    let data = BoundaryData::new(points, phys, domain)?;
    gradcheck_at(options, phys, &data, &params, rng)
}

pub fn gradcheck_at<R: Rng + ?Sized>(
    options: &GradcheckOptions,
    phys: &PhysicalConfig,
    data: &BoundaryData,
    params: &HergNetParams,
    rng: &mut R,
) -> Result<GradcheckReport> {
    let (_, grad) = evaluate(params, data, phys, true)?;
    let mut grad = grad.expect("gradient requested");
    if options.corrupt_gradient {
        for g in grad.iter_mut() {
            *g *= 1.01;
        }
    }
    let base = params.to_flat();
    let base_pattern = activation_pattern(params);
    let loss_at = |flat: &[f64]| -> Result<(f64, bool)> {
        let mut p = params.clone();
        p.set_flat(flat)?;
        let same = activation_pattern(&p) == base_pattern;
        Ok((evaluate(&p, data, phys, false)?.0, same))
    };
    let central = |i: usize, rel_step: f64| -> Result<(f64, bool)> {
        let h = rel_step * base[i].abs().max(1.0);
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[i] += h;
        minus[i] -= h;
        let (lp, sp) = loss_at(&plus)?;
        let (lm, sm) = loss_at(&minus)?;
        Ok(((lp - lm) / (2.0 * h), sp && sm))
    };

    let mut order: Vec<usize> = (0..base.len()).collect();
    order.shuffle(rng);
    let mut entries = Vec::new();
    let mut skipped = 0;
    // Kink test uses a perturbation no smaller than 1e-6 so that coordinates
    // within that distance of a kink are excluded for every step size.
    let kink_step = options
        .sweep_steps
        .iter()
        .copied()
        .chain([options.step, 1e-6])
        .fold(0.0, f64::max);
    for &i in &order {
        if entries.len() == options.n_coords {
            break;
        }
        if !central(i, kink_step)?.1 {
            skipped += 1;
            continue;
        }
        let (numeric, _) = central(i, options.step)?;
        entries.push(GradcheckEntry {
            index: i,
            analytic: grad[i],
            numeric,
            rel_error: rel_error(grad[i], numeric),
        });
    }
    let max_rel_error = entries.iter().map(|e| e.rel_error).fold(0.0, f64::max);
    let mut step_sweep = Vec::new();
    for &h in &options.sweep_steps {
        let mut worst: f64 = 0.0;
        for e in &entries {
            let (numeric, _) = central(e.index, h)?;
            worst = worst.max(rel_error(grad[e.index], numeric));
        }
        step_sweep.push((h, worst));
    }
    Ok(GradcheckReport {
        max_rel_error,
        entries,
        skipped_near_kink: skipped,
        step_sweep,
    })
}
