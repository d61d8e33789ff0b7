//! Frequency sweeps, levels, phase, impulse responses and error metrics.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rng_stream, PhysicalConfig, ShoeboxDomain, Vec3};
use crate::model::total_field_with;
use crate::oracle::{converged_green, KmaxRule, ModeTable};
use crate::training::{train, TrainConfig, TrainReport};

/// Reference pressure for SPL, Pa.
pub const P_REF: f64 = 2e-5;

const UNIFORM_TOL: f64 = 1e-9;

/// `20 log10(|p| / p_ref)`; `-∞` for `p = 0`.
pub fn spl(p: Complex64, p_ref: f64) -> f64 {
    let m = p.norm();
    if m == 0.0 {
        f64::NEG_INFINITY
    } else {
        20.0 * (m / p_ref).log10()
    }
}

/// Arguments with successive jumps folded into `(-π, π]`.
pub fn unwrap_phase(values: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut prev_raw = 0.0;
    for (i, v) in values.iter().enumerate() {
        let raw = v.arg();
        if i == 0 {
            out.push(raw);
        } else {
            let mut d = raw - prev_raw;
            d -= 2.0 * PI * ((d - PI) / (2.0 * PI)).ceil();
            out.push(out[i - 1] + d);
        }
        prev_raw = raw;
    }
    out
}

/// Complex pressure at a receiver over a uniform frequency grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub freqs: Vec<f64>,
    pub values: Vec<Complex64>,
    pub receiver: Vec3,
}

impl TransferFunction {
    pub fn new(freqs: Vec<f64>, values: Vec<Complex64>, receiver: Vec3) -> Result<Self> {
        if freqs.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: freqs.len(),
                got: values.len(),
            });
        }
        check_uniform(&freqs)?;
        Ok(Self {
            freqs,
            values,
            receiver,
        })
    }

    /// Grid spacing; `None` for a single frequency.
    pub fn step(&self) -> Option<f64> {
        (self.freqs.len() > 1).then(|| self.freqs[1] - self.freqs[0])
    }

    pub fn spl(&self) -> Vec<f64> {
        self.values.iter().map(|&p| spl(p, P_REF)).collect()
    }

    pub fn unwrapped_phase(&self) -> Vec<f64> {
        unwrap_phase(&self.values)
    }

    /// `f_hz,re,im`, plus `oracle_re,oracle_im` when a reference is given.
    pub fn to_csv(&self, oracle: Option<&TransferFunction>) -> Result<String> {
        if let Some(o) = oracle {
            if o.freqs != self.freqs {
                return Err(Error::Format("oracle frequencies differ from the model grid".into()));
            }
        }
        let mut s = String::from("f_hz,re,im");
        if oracle.is_some() {
            s.push_str(",oracle_re,oracle_im");
        }
        s.push('\n');
        for (i, (f, v)) in self.freqs.iter().zip(&self.values).enumerate() {
            let _ = write!(s, "{f},{:e},{:e}", v.re, v.im);
            if let Some(o) = oracle {
                let _ = write!(s, ",{:e},{:e}", o.values[i].re, o.values[i].im);
            }
            s.push('\n');
        }
        Ok(s)
    }
}

/// Rejects grids that are not strictly increasing with constant spacing.
pub fn check_uniform(freqs: &[f64]) -> Result<()> {
    if freqs.is_empty() {
        return Err(Error::NonUniformGrid("empty frequency grid".into()));
    }
    if freqs.iter().any(|f| !f.is_finite()) {
        return Err(Error::NonUniformGrid("non-finite frequency".into()));
    }
    if freqs.len() < 2 {
        return Ok(());
    }
    let step = freqs[1] - freqs[0];
    if !(step > 0.0) {
        return Err(Error::NonUniformGrid("frequencies must increase".into()));
    }
    for (i, w) in freqs.windows(2).enumerate() {
        let d = w[1] - w[0];
        if (d - step).abs() > UNIFORM_TOL * step.max(w[1].abs()) {
            return Err(Error::NonUniformGrid(format!(
                "spacing {d} at index {i} differs from {step}"
            )));
        }
    }
    Ok(())
}

/// Real, uniformly sampled time signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpulseResponse {
    pub t: Vec<f64>,
    pub h: Vec<f64>,
    /// Sample rate, Hz.
    pub fs: f64,
    /// Largest imaginary part left by the inverse transform, relative to the
    /// peak of `h`, before it was discarded.
    pub imag_residue: f64,
}

impl ImpulseResponse {
    pub fn duration(&self) -> f64 {
        self.h.len() as f64 / self.fs
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t_s,h\n");
        for (t, h) in self.t.iter().zip(&self.h) {
            let _ = writeln!(s, "{t},{h:e}");
        }
        s
    }
}

/// The frequency `f` as an integer multiple of `step`.
fn bin_of(f: f64, step: f64) -> Result<usize> {
    let m = f / step;
    let r = m.round();
    if r < 0.0 || (m - r).abs() > 1e-6 {
        return Err(Error::NonUniformGrid(format!(
            "frequency {f} is not a non-negative multiple of the spacing {step}"
        )));
    }
    Ok(r as usize)
}

/// One-sided spectrum on `{0, Δf, ..., f_max}`, zero outside the measured
/// band. The DC and Nyquist (`f_max`) bins must be real for a real signal,
/// so only their real parts are kept.
pub fn one_sided_spectrum(tf: &TransferFunction, step: f64) -> Result<Vec<Complex64>> {
    check_uniform(&tf.freqs)?;
    let last = bin_of(*tf.freqs.last().expect("non-empty"), step)?;
    if last == 0 {
        return Err(Error::NonUniformGrid("maximum frequency must be positive".into()));
    }
    let mut bins = vec![Complex64::new(0.0, 0.0); last + 1];
    for (f, v) in tf.freqs.iter().zip(&tf.values) {
        bins[bin_of(*f, step)?] = *v;
    }
    bins[0].im = 0.0;
    bins[last].im = 0.0;
    Ok(bins)
}

/// Hermitian inverse FFT of a transfer function.
///
/// With `f_max` the last frequency and `Δf` the grid spacing (or the only
/// frequency for a one-point grid), the signal has `N = 2 f_max/Δf` samples
/// at `fs = 2 f_max`, i.e. duration `1/Δf`. The transform is normalised by
/// `1/N`, so a forward FFT of `h` returns the spectrum bins.
pub fn impulse_response(tf: &TransferFunction) -> Result<ImpulseResponse> {
    let step = tf.step().unwrap_or(tf.freqs[0]);
    let bins = one_sided_spectrum(tf, step)?;
    let half = bins.len() - 1;
    let n = 2 * half;
    let mut full = vec![Complex64::new(0.0, 0.0); n];
    full[..=half].copy_from_slice(&bins);
    for m in 1..half {
        full[n - m] = bins[m].conj();
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut full);
    let inv_n = 1.0 / n as f64;
    let h: Vec<f64> = full.iter().map(|v| v.re * inv_n).collect();
    let peak = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_imag = full.iter().fold(0.0f64, |m, v| m.max((v.im * inv_n).abs()));
    let imag_residue = if peak > 0.0 { max_imag / peak } else { max_imag };
    let fs = n as f64 * step;
    Ok(ImpulseResponse {
        t: (0..n).map(|i| i as f64 / fs).collect(),
        h,
        fs,
        imag_residue,
    })
}

/// Forward FFT of a real signal, one-sided (`N/2 + 1` bins).
pub fn forward_spectrum(h: &[f64]) -> Vec<Complex64> {
    let n = h.len();
    let mut buf: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.truncate(n / 2 + 1);
    buf
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// `max |a - b|`
    pub max_abs: f64,
    /// `max |a - b| / max |b|`
    pub max_rel: f64,
    /// `‖a - b‖₂ / ‖b‖₂`
    pub rel_l2: f64,
    /// `|a_i - b_i|`
    pub pointwise: Vec<f64>,
}

impl ErrorMetrics {
    pub fn to_toml(&self) -> String {
        format!(
            "max_abs = {:e}\nmax_rel = {:e}\nrel_l2 = {:e}\npoints = {}\n",
            self.max_abs,
            self.max_rel,
            self.rel_l2,
            self.pointwise.len()
        )
    }
}

/// Errors of `a` against the reference `b`.
pub fn error_metrics(a: &[Complex64], b: &[Complex64]) -> Result<ErrorMetrics> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            got: a.len(),
        });
    }
    let pointwise: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).norm()).collect();
    let max_b = b.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let norm_b = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if max_b == 0.0 || norm_b == 0.0 {
        return Err(Error::ZeroReference);
    }
    let max_abs = pointwise.iter().fold(0.0f64, |m, &v| m.max(v));
    let diff = pointwise.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(ErrorMetrics {
        max_abs,
        max_rel: max_abs / max_b,
        rel_l2: diff / norm_b,
        pointwise,
    })
}

/// `|h_a(t) - h_b(t)| / max_t |h_b|`.
pub fn ir_error(a: &ImpulseResponse, b: &ImpulseResponse) -> Result<Vec<f64>> {
    if a.h.len() != b.h.len() {
        return Err(Error::DimensionMismatch {
            expected: b.h.len(),
            got: a.h.len(),
        });
    }
    let peak = b.h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(a.h.iter().zip(&b.h).map(|(x, y)| (x - y).abs() / peak).collect())
}

/// Reference used for a sweep's oracle column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleKind {
    /// Mode table cut off at `factor·f`.
    Truncated { factor: f64 },
    /// Series summed in closed form along one axis, to the given tolerance.
    Converged { tol: f64 },
}

impl OracleKind {
    pub fn evaluate(
        &self,
        xs: &[Vec3],
        phys: &PhysicalConfig,
        domain: &ShoeboxDomain,
    ) -> Result<Vec<Complex64>> {
        let x0 = domain
            .source
            .ok_or_else(|| Error::InvalidConfig("the oracle needs a point source".into()))?;
        match *self {
            OracleKind::Truncated { factor } => {
                ModeTable::with_rule(phys, domain, KmaxRule { factor })?.green_many(xs, &x0)
            }
            OracleKind::Converged { tol } => converged_green(xs, &x0, phys, domain, tol),
        }
    }
}

/// Training seed for the `index`-th frequency of a sweep.
pub fn frequency_seed(seed: u64, index: usize) -> u64 {
    use rand::RngCore;
    rng_stream(seed, 1 + index as u64).next_u64()
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub f: f64,
    pub seed: u64,
    /// Training summary, or the error that stopped this frequency.
    pub outcome: std::result::Result<TrainReport, String>,
    pub oracle_error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    /// One transfer function per receiver. Model pressures are NaN where
    /// training failed, likewise for the oracle.
    pub model: Vec<TransferFunction>,
    pub oracle: Option<Vec<TransferFunction>>,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn failures(&self) -> impl Iterator<Item = &SweepPoint> {
        self.points
            .iter()
            .filter(|p| p.outcome.is_err() || p.oracle_error.is_some())
    }
}

/// Trains a fresh model per frequency and records the total field at each
/// receiver. Failures are recorded per frequency and the sweep continues.
/// `progress` sees every point with its model pressures.
pub fn sweep(
    config: &TrainConfig,
    phys_template: &PhysicalConfig,
    domain: &ShoeboxDomain,
    freqs: &[f64],
    receivers: &[Vec3],
    oracle: Option<OracleKind>,
    progress: &mut dyn FnMut(&SweepPoint, &[Complex64]),
) -> Result<SweepResult> {
    check_uniform(freqs)?;
    if receivers.is_empty() {
        return Err(Error::InvalidConfig("a sweep needs at least one receiver".into()));
    }
    if let Some(r) = receivers.iter().find(|r| !domain.contains_open(r)) {
        return Err(Error::InvalidConfig(format!("receiver {r:?} must lie inside the domain")));
    }
    let nan = Complex64::new(f64::NAN, f64::NAN);
    let mut values = vec![Vec::with_capacity(freqs.len()); receivers.len()];
    let mut oracle_values = vec![Vec::with_capacity(freqs.len()); receivers.len()];
    let mut points = Vec::with_capacity(freqs.len());
    for (i, &f) in freqs.iter().enumerate() {
        let phys = phys_template.with_frequency(f)?;
        let seed = frequency_seed(config.seed, i);
        let cfg = TrainConfig {
            seed,
            ..config.clone()
        };
        let outcome = train(&cfg, &phys, domain, &mut rng_stream(seed, 0)).and_then(|(params, report)| {
            let waves = params.plane_waves(phys.k);
            let ps = receivers
                .iter()
                .map(|r| Ok(total_field_with(&waves, r, &phys, domain)?.p))
                .collect::<Result<Vec<_>>>()?;
            Ok((ps, report))
        });
        let (ps, outcome) = match outcome {
            Ok((ps, report)) => (ps, Ok(report)),
            Err(e) => (vec![nan; receivers.len()], Err(e.to_string())),
        };
        let mut oracle_error = None;
        if let Some(kind) = oracle {
            let os = kind.evaluate(receivers, &phys, domain).unwrap_or_else(|e| {
                oracle_error = Some(e.to_string());
                vec![nan; receivers.len()]
            });
            for (col, v) in oracle_values.iter_mut().zip(os) {
                col.push(v);
            }
        }
        let point = SweepPoint {
            f,
            seed,
            outcome,
            oracle_error,
        };
        progress(&point, &ps);
        for (col, v) in values.iter_mut().zip(ps) {
            col.push(v);
        }
        points.push(point);
    }
    let tfs = |cols: Vec<Vec<Complex64>>| {
        cols.into_iter()
            .zip(receivers)
            .map(|(v, r)| TransferFunction::new(freqs.to_vec(), v, *r))
            .collect::<Result<Vec<_>>>()
    };
    Ok(SweepResult {
        model: tfs(values)?,
        oracle: oracle.map(|_| tfs(oracle_values)).transpose()?,
        points,
    })
}

/// Level and phase agreement over the loud part of a band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandDeviation {
    /// Points whose reference level is within `window_db` of the band maximum.
    pub included: Vec<bool>,
    /// `max |SPL_a - SPL_b|` over the included points, dB.
    pub max_spl_db: f64,
    /// `max |φ_a - φ_b|` of the unwrapped phases over the included points.
    pub max_phase_rad: f64,
}

/// Compares `a` with the reference `b`. Both phases are unwrapped over the
/// full band; a common offset of a whole number of turns is removed first,
/// chosen so that the difference at the first included point lies in
/// `(-π, π]`.
pub fn band_deviation(a: &TransferFunction, b: &TransferFunction, window_db: f64) -> Result<BandDeviation> {
    if a.values.len() != b.values.len() {
        return Err(Error::DimensionMismatch {
            expected: b.values.len(),
            got: a.values.len(),
        });
    }
    let (la, lb) = (a.spl(), b.spl());
    let top = lb.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::ZeroReference);
    }
    let included: Vec<bool> = lb.iter().map(|&l| l >= top - window_db).collect();
    let (pa, pb) = (a.unwrapped_phase(), b.unwrapped_phase());
    let first = included.iter().position(|&x| x).expect("maximum is included");
    let d0 = pa[first] - pb[first];
    let turns = ((d0 - PI) / (2.0 * PI)).ceil();
    // NaN from failed points must survive the maximum
    let worst = |d: &mut dyn Iterator<Item = f64>| d.fold(0.0f64, |m, v| if m.is_nan() || v.is_nan() { f64::NAN } else { m.max(v) });
    let idx: Vec<usize> = (0..included.len()).filter(|&i| included[i]).collect();
    let max_spl_db = worst(&mut idx.iter().map(|&i| (la[i] - lb[i]).abs()));
    let max_phase_rad = worst(&mut idx.iter().map(|&i| (pa[i] - pb[i] - 2.0 * PI * turns).abs()));
    Ok(BandDeviation {
        included,
        max_spl_db,
        max_phase_rad,
    })
}

#[cfg(test)]
mod tests;
