//! Reference solutions for impedance-walled boxes.
//!
//! The modal Green's function separates into 1D Robin problems per axis:
//! `X'' + q²X = 0` with `X'(0) = aX(0)` and `X'(L) = -aX(L)`, `a = ikβ`.
//! With `X(x) = cos(qx) + (a/q) sin(qx)` the lower condition holds by
//! construction and the upper one reduces to
//! `F(q) = (a² - q²) sin(qL) + 2aq cos(qL) = 0`.
//! `F` is odd in `q` and always vanishes at `q = 0`, which is not an
//! eigenvalue unless `a = 0`. Writing `E = e^{iqL}`,
//! `2iF = E(a + iq)² - (a - iq)²/E`, so the roots split into two families
//! `(a + iq)E = ±(a - iq)` that continue the even and odd rigid orders.
//! Root finding works on the family factor, whose roots stay simple even
//! where wall-bound pairs from both families nearly coincide.
//!
//! [`fd_reference`] is an unrelated second-order finite-difference solver
//! used to cross-check the modal series.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Dim, PhysicalConfig, ShoeboxDomain, Vec3};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const NEWTON_MAX_ITER: usize = 50;

/// Returns `(F(q), dF/dq)` for an axis of length `l`.
pub fn characteristic(q: Complex64, l: f64, k: f64, beta: Complex64) -> (Complex64, Complex64) {
    let a = I * k * beta;
    let z = q * l;
    let (s, c) = (z.sin(), z.cos());
    let f = (a * a - q * q) * s + 2.0 * a * q * c;
    let df = -2.0 * q * s + (a * a - q * q) * l * c + 2.0 * a * c - 2.0 * a * q * l * s;
    (f, df)
}

/// `(a + iq)e^{iqL} - s(a - iq)` and its derivative, `s = (-1)^{n+1}` for
/// the family holding rigid order `n`.
fn family(q: Complex64, l: f64, a: Complex64, s: f64) -> (Complex64, Complex64) {
    let e = (I * q * l).exp();
    let h = (a + I * q) * e - s * (a - I * q);
    let dh = I * e * (1.0 + l * (a + I * q)) + s * I;
    (h, dh)
}

fn sinc(z: Complex64) -> Complex64 {
    if z.norm() < 0.05 {
        let z2 = z * z;
        1.0 - z2 / 6.0 * (1.0 - z2 / 20.0 * (1.0 - z2 / 42.0 * (1.0 - z2 / 72.0)))
    } else {
        z.sin() / z
    }
}

/// `(1 - sinc z)/z²`.
fn one_minus_sinc_over_z2(z: Complex64) -> Complex64 {
    if z.norm() < 0.05 {
        let z2 = z * z;
        (1.0 - z2 / 20.0 * (1.0 - z2 / 42.0 * (1.0 - z2 / 72.0))) / 6.0
    } else {
        (1.0 - z.sin() / z) / (z * z)
    }
}

/// `X(x) = cos(qx) + a·x·sinc(qx)` and `X'(x)`.
pub fn eigenfunction(q: Complex64, a: Complex64, x: f64) -> (Complex64, Complex64) {
    let z = q * x;
    let (s, c) = (z.sin(), z.cos());
    (c + a * x * sinc(q * x), -q * s + a * c)
}

/// Unconjugated `∫₀ᴸ X² dx`.
pub fn norm_integral(q: Complex64, a: Complex64, l: f64) -> Complex64 {
    // ∫cos² + 2(a/q)∫cos·sin + (a/q)²∫sin², each written without 1/q
    let s = sinc(q * l);
    0.5 * l * (1.0 + sinc(2.0 * q * l))
        + a * l * l * s * s
        + a * a * 2.0 * l * l * l * one_minus_sinc_over_z2(2.0 * q * l)
}

/// Axial modes of one side of the box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisModes {
    pub length: f64,
    /// `ikβ` of the Robin condition.
    pub a: Complex64,
    /// Rigid-wall order `n` each root was continued from.
    pub orders: Vec<usize>,
    pub roots: Vec<Complex64>,
    pub norms: Vec<Complex64>,
}

impl AxisModes {
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// `X_i(x)`.
    pub fn value(&self, i: usize, x: f64) -> Complex64 {
        eigenfunction(self.roots[i], self.a, x).0
    }

    /// Largest relative residual of the two Robin conditions for mode `i`.
    pub fn bc_residual(&self, i: usize) -> f64 {
        let q = self.roots[i];
        let scale = q.norm() + self.a.norm();
        let (x0, d0) = eigenfunction(q, self.a, 0.0);
        let (xl, dl) = eigenfunction(q, self.a, self.length);
        let lower = (d0 - self.a * x0).norm() / (scale * x0.norm()).max(f64::MIN_POSITIVE);
        let upper = (dl + self.a * xl).norm() / (scale * xl.norm()).max(f64::MIN_POSITIVE);
        lower.max(upper)
    }

    /// `|F(q_i)| / max(1, |q_i|²)`.
    pub fn scaled_residual(&self, i: usize, k: f64, beta: Complex64) -> f64 {
        let q = self.roots[i];
        characteristic(q, self.length, k, beta).0.norm() / q.norm_sqr().max(1.0)
    }

    /// 1D Green's function `Σ X_n(x)X_n(x0) / (Λ_n (q_n² - k²))` of
    /// `u'' + k²u = -δ(x - x0)` on this axis.
    pub fn green_1d(&self, x: f64, x0: f64, k: f64) -> Result<Complex64> {
        let mut sum = ZERO;
        for i in 0..self.len() {
            let gap = self.roots[i] * self.roots[i] - k * k;
            check_gap(gap, k, vec![self.orders[i]])?;
            sum += self.value(i, x) * self.value(i, x0) / (self.norms[i] * gap);
        }
        Ok(sum)
    }
}

fn check_gap(gap: Complex64, k: f64, index: Vec<usize>) -> Result<()> {
    if gap.norm() < 1e-12 * k * k {
        return Err(Error::NearSingularMode {
            index,
            gap: gap.norm(),
        });
    }
    Ok(())
}

/// Highest axial order whose rigid frequency `nc/(2L)` stays within `factor·f`.
pub fn axial_order_limit(l: f64, f: f64, c: f64, factor: f64) -> usize {
    // small slack so that exact ratios are not lost to rounding
    (factor * f * 2.0 * l / c * (1.0 + 1e-12)).floor() as usize
}

/// Roots for orders `0..=floor(2f·2L/c)`.
pub fn newton_modes(l: f64, k: f64, beta: Complex64, f: f64, c: f64) -> Result<AxisModes> {
    axis_modes(l, k, beta, axial_order_limit(l, f, c, 2.0))
}

/// Roots for orders `0..=n_max`.
///
/// Each root is followed from its rigid value `nπ/L` while the wall
/// admittance is ramped from zero to `β`, using Newton's method on the
/// factor of `F` for its parity family at every step.
pub fn axis_modes(l: f64, k: f64, beta: Complex64, n_max: usize) -> Result<AxisModes> {
    if !(l > 0.0 && l.is_finite() && k.is_finite() && beta.re.is_finite() && beta.im.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "axis length {l}, wavenumber {k} and admittance {beta} must be finite"
        )));
    }
    let a = I * k * beta;
    let roots: Vec<Complex64> = (0..=n_max)
        .into_par_iter()
        .map(|n| find_root(n, l, a))
        .collect::<Result<_>>()?;

    let mut pairs: Vec<(usize, Complex64)> = roots.into_iter().enumerate().collect();
    pairs.sort_by(|x, y| x.1.re.total_cmp(&y.1.re));
    for w in pairs.windows(2) {
        let (p, q) = (w[0].1, w[1].1);
        if (p - q).norm() <= 1e-8 * p.norm().max(q.norm()).max(1.0 / l) {
            return Err(Error::RootCollision {
                first: w[0].0.min(w[1].0),
                second: w[0].0.max(w[1].0),
                root: q,
            });
        }
    }
    Ok(AxisModes {
        length: l,
        a,
        orders: pairs.iter().map(|p| p.0).collect(),
        norms: pairs.iter().map(|p| norm_integral(p.1, a, l)).collect(),
        roots: pairs.into_iter().map(|p| p.1).collect(),
    })
}

fn canonical(q: Complex64) -> Complex64 {
    if q.re < 0.0 || (q.re == 0.0 && q.im < 0.0) {
        -q
    } else {
        q
    }
}

fn find_root(n: usize, l: f64, a: Complex64) -> Result<Complex64> {
    let rigid = n as f64 * PI / l;
    if a == ZERO {
        return Ok(Complex64::new(rigid, 0.0));
    }
    let s = if n % 2 == 0 { -1.0 } else { 1.0 };
    let spacing = PI / l;
    let fail = |last| Error::NonConvergence {
        axis: None,
        order: n,
        last,
    };

    // Continuation in t, with the wall parameter t·a.
    let (mut t, mut q) = if n == 0 {
        // q = 0 is a double root at t = 0; start from q² ≈ a² + 2a/L instead
        let t0 = 1e-3;
        let a0 = a * t0;
        let seed = (a0 * a0 + 2.0 * a0 / l).sqrt();
        let q = newton_family(seed, l, a0, s).ok_or_else(|| fail(seed))?;
        (t0, q)
    } else {
        (0.0, Complex64::new(rigid, 0.0))
    };
    let mut dt: f64 = 0.125;
    while t < 1.0 {
        let step = dt.min(1.0 - t);
        let next =
            newton_family(q, l, a * (t + step), s).filter(|z| (z - q).norm() < 0.25 * spacing);
        match next {
            Some(z) => {
                q = z;
                t += step;
                dt = (dt * 1.5).min(0.25);
            }
            None if step < 1e-9 => return Err(fail(q)),
            None => dt = step * 0.5,
        }
    }
    let k_beta = -I * a;
    let residual = characteristic(q, l, 1.0, k_beta).0.norm();
    if !(residual < 1e-10 * q.norm_sqr().max(1.0)) {
        return Err(fail(q));
    }
    Ok(canonical(q))
}

/// Newton's method on the family factor; `None` without convergence in
/// `NEWTON_MAX_ITER` steps.
fn newton_family(seed: Complex64, l: f64, a: Complex64, s: f64) -> Option<Complex64> {
    let mut q = seed;
    let mut settled = 0;
    for _ in 0..NEWTON_MAX_ITER {
        let (h, dh) = family(q, l, a, s);
        let dq = h / dh;
        if !dq.is_finite() {
            return None;
        }
        q -= dq;
        // a couple of extra steps once the update is at rounding level
        if dq.norm() <= 1e-14 * q.norm().max(1.0 / l) {
            settled += 1;
            if settled == 2 {
                return Some(q);
            }
        }
    }
    None
}

/// Which mode products enter the series: those whose rigid-wall frequency
/// `(c/2)·sqrt(Σ (n_a/L_a)²)` is at most `factor·f`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KmaxRule {
    pub factor: f64,
}

impl Default for KmaxRule {
    fn default() -> Self {
        Self { factor: 2.0 }
    }
}

/// A retained mode product: axis indices, `k_n²` and the product norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub index: [usize; 3],
    pub k2: Complex64,
    pub norm: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeTable {
    pub dim: Dim,
    pub axes: Vec<AxisModes>,
    pub k: f64,
    pub f: f64,
    pub beta: Complex64,
    pub kmax_rule: KmaxRule,
    pub modes: Vec<Mode>,
}

impl ModeTable {
    pub fn new(phys: &PhysicalConfig, domain: &ShoeboxDomain) -> Result<Self> {
        Self::with_rule(phys, domain, KmaxRule::default())
    }

    pub fn with_rule(phys: &PhysicalConfig, domain: &ShoeboxDomain, rule: KmaxRule) -> Result<Self> {
        if !(rule.factor > 0.0 && rule.factor.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "mode cutoff factor must be positive, got {}",
                rule.factor
            )));
        }
        let lengths = domain.axis_lengths();
        let axes: Vec<AxisModes> = lengths
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                axis_modes(
                    l,
                    phys.k,
                    phys.beta,
                    axial_order_limit(l, phys.f, phys.c, rule.factor),
                )
                .map_err(|e| e.on_axis(i))
            })
            .collect::<Result<_>>()?;

        // inverse lookup: position of order n in each axis
        let positions: Vec<Vec<usize>> = axes
            .iter()
            .map(|ax| {
                let mut pos = vec![0; ax.len()];
                for (i, &n) in ax.orders.iter().enumerate() {
                    pos[n] = i;
                }
                pos
            })
            .collect();
        let bound = (2.0 * rule.factor * phys.f / phys.c).powi(2) * (1.0 + 1e-12);
        let counts: Vec<usize> = axes.iter().map(|a| a.len()).collect();
        let mut modes = Vec::new();
        let mut n = [0usize; 3];
        loop {
            let rigid: f64 = (0..lengths.len())
                .map(|a| (n[a] as f64 / lengths[a]).powi(2))
                .sum();
            if rigid <= bound {
                let mut index = [0; 3];
                let mut k2 = ZERO;
                let mut norm = Complex64::new(1.0, 0.0);
                for a in 0..lengths.len() {
                    let i = positions[a][n[a]];
                    index[a] = i;
                    k2 += axes[a].roots[i] * axes[a].roots[i];
                    norm *= axes[a].norms[i];
                }
                modes.push(Mode { index, k2, norm });
            }
            // odometer over the per-axis order ranges
            let mut axis = 0;
            loop {
                if axis == lengths.len() {
                    return Ok(Self {
                        dim: domain.dim,
                        axes,
                        k: phys.k,
                        f: phys.f,
                        beta: phys.beta,
                        kmax_rule: rule,
                        modes,
                    });
                }
                n[axis] += 1;
                if n[axis] < counts[axis] {
                    break;
                }
                n[axis] = 0;
                axis += 1;
            }
        }
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    fn axial_values(&self, x: &Vec3) -> Vec<Vec<Complex64>> {
        self.axes
            .iter()
            .enumerate()
            .map(|(a, ax)| (0..ax.len()).map(|i| ax.value(i, x[a])).collect())
            .collect()
    }

    fn product(&self, vals: &[Vec<Complex64>], m: &Mode) -> Complex64 {
        let mut p = Complex64::new(1.0, 0.0);
        for (a, v) in vals.iter().enumerate() {
            p *= v[m.index[a]];
        }
        p
    }

    /// Source-dependent series weights `ψ_n(x0) / (Λ_n (k_n² - k²))`.
    pub fn weights(&self, x0: &Vec3) -> Result<Vec<Complex64>> {
        let vals = self.axial_values(x0);
        self.modes
            .iter()
            .map(|m| {
                let gap = m.k2 - self.k * self.k;
                check_gap(gap, self.k, m.index[..self.axes.len()].to_vec())?;
                Ok(self.product(&vals, m) / (m.norm * gap))
            })
            .collect()
    }

    /// `G(x|x0)` summed over the retained modes.
    pub fn green(&self, x: &Vec3, x0: &Vec3) -> Result<Complex64> {
        Ok(self.green_with(&self.weights(x0)?, x))
    }

    pub fn green_with(&self, weights: &[Complex64], x: &Vec3) -> Complex64 {
        let vals = self.axial_values(x);
        self.modes
            .iter()
            .zip(weights)
            .map(|(m, w)| w * self.product(&vals, m))
            .sum()
    }

    /// `G(x|x0)` at many receivers, in parallel.
    pub fn green_many(&self, xs: &[Vec3], x0: &Vec3) -> Result<Vec<Complex64>> {
        let w = self.weights(x0)?;
        Ok(xs.par_iter().map(|x| self.green_with(&w, x)).collect())
    }

    /// Per-axis roots and norms as TOML.
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "k = {:?}", self.k);
        let _ = writeln!(s, "f = {:?}", self.f);
        let _ = writeln!(s, "beta = [{:?}, {:?}]", self.beta.re, self.beta.im);
        let _ = writeln!(s, "cutoff_factor = {:?}", self.kmax_rule.factor);
        let _ = writeln!(s, "mode_count = {}", self.modes.len());
        for ax in &self.axes {
            let _ = writeln!(s, "\n[[axis]]");
            let _ = writeln!(s, "length = {:?}", ax.length);
            let _ = writeln!(s, "order = {:?}", ax.orders);
            let col = |v: &[Complex64], part: fn(&Complex64) -> f64| {
                v.iter().map(|z| format!("{:?}", part(z))).collect::<Vec<_>>().join(", ")
            };
            let _ = writeln!(s, "root_re = [{}]", col(&ax.roots, |z| z.re));
            let _ = writeln!(s, "root_im = [{}]", col(&ax.roots, |z| z.im));
            let _ = writeln!(s, "norm_re = [{}]", col(&ax.norms, |z| z.re));
            let _ = writeln!(s, "norm_im = [{}]", col(&ax.norms, |z| z.im));
        }
        s
    }

    /// One row per axial root: `axis,order,root_re,root_im,norm_re,norm_im`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("axis,order,root_re,root_im,norm_re,norm_im\n");
        for (a, ax) in self.axes.iter().enumerate() {
            for i in 0..ax.len() {
                let _ = writeln!(
                    s,
                    "{a},{},{:?},{:?},{:?},{:?}",
                    ax.orders[i], ax.roots[i].re, ax.roots[i].im, ax.norms[i].re, ax.norms[i].im
                );
            }
        }
        s
    }
}

/// `G(x|x0)` with modes up to twice the excitation frequency.
///
/// Builds a fresh [`ModeTable`]; use the table directly for repeated queries.
pub fn modal_green(
    x: &Vec3,
    x0: &Vec3,
    phys: &PhysicalConfig,
    domain: &ShoeboxDomain,
) -> Result<Complex64> {
    if x == x0 {
        return Err(Error::SourceSingularity);
    }
    ModeTable::new(phys, domain)?.green(x, x0)
}

/// `G(x|x0)` at many receivers with the modal sum carried out in closed form
/// along one axis, so that the remaining series converges exponentially.
///
/// For each receiver the closed-form axis is the one with the largest offset
/// `|x_a - x0_a|`; the other axes are summed over all orders with transverse
/// wavenumber below `2k + (ln(1/tol) + 3)/offset`. Unlike [`ModeTable`] this
/// has no frequency cutoff and resolves the source singularity.
pub fn converged_green(
    xs: &[Vec3],
    x0: &Vec3,
    phys: &PhysicalConfig,
    domain: &ShoeboxDomain,
    tol: f64,
) -> Result<Vec<Complex64>> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidConfig(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    let d = domain.dim.count();
    let lengths = domain.axis_lengths();
    let plan: Vec<(usize, f64)> = xs
        .iter()
        .map(|x| {
            let (axis, offset) = (0..d)
                .map(|a| (a, (x[a] - x0[a]).abs()))
                .max_by(|p, q| p.1.total_cmp(&q.1))
                .expect("at least two axes");
            if offset == 0.0 {
                return Err(Error::SourceSingularity);
            }
            Ok((axis, 2.0 * phys.k + ((1.0 / tol).ln() + 3.0) / offset))
        })
        .collect::<Result<_>>()?;
    let q_max = plan.iter().map(|p| p.1).fold(0.0, f64::max);
    let mut axes = Vec::with_capacity(d);
    for (i, &l) in lengths.iter().enumerate() {
        let n_max = (q_max * l / PI).ceil() as usize + 1;
        if n_max > 200_000 {
            return Err(Error::InvalidConfig(format!(
                "receiver too close to the source for a converged sum ({n_max} axial orders)"
            )));
        }
        axes.push(axis_modes(l, phys.k, phys.beta, n_max).map_err(|e| e.on_axis(i))?);
    }
    let by_order: Vec<Vec<usize>> = axes
        .iter()
        .map(|ax| {
            let mut pos = vec![0; ax.len()];
            for (i, &n) in ax.orders.iter().enumerate() {
                pos[n] = i;
            }
            pos
        })
        .collect();
    let a = I * phys.k * phys.beta;
    let k2 = phys.k * phys.k;

    xs.par_iter()
        .zip(plan.par_iter())
        .map(|(x, &(axis, q_cut))| {
            let others: Vec<usize> = (0..d).filter(|&b| b != axis).collect();
            let (z_lo, z_hi) = if x[axis] < x0[axis] {
                (x[axis], x0[axis])
            } else {
                (x0[axis], x[axis])
            };
            let l = lengths[axis];
            let mut sum = ZERO;
            let mut n = [0usize; 2];
            let limits: Vec<usize> = others
                .iter()
                .map(|&b| (q_cut * lengths[b] / PI).floor() as usize)
                .collect();
            loop {
                let rigid: f64 = others
                    .iter()
                    .zip(&n)
                    .map(|(&b, &nb)| (nb as f64 * PI / lengths[b]).powi(2))
                    .sum();
                if rigid <= q_cut * q_cut {
                    let mut weight = Complex64::new(1.0, 0.0);
                    let mut q2 = ZERO;
                    for (&b, &nb) in others.iter().zip(&n) {
                        let i = by_order[b][nb];
                        let ax = &axes[b];
                        weight *= ax.value(i, x[b]) * ax.value(i, x0[b]) / ax.norms[i];
                        q2 += ax.roots[i] * ax.roots[i];
                    }
                    sum += weight * robin_green_1d(z_lo, z_hi, l, k2 - q2, a)?;
                }
                let mut j = 0;
                loop {
                    if j == others.len() {
                        return Ok(sum);
                    }
                    n[j] += 1;
                    if n[j] <= limits[j] {
                        break;
                    }
                    n[j] = 0;
                    j += 1;
                }
            }
        })
        .collect()
}

/// `g(z_lo, z_hi)` solving `g'' + κ²g = -δ` on `[0, L]` with the Robin
/// conditions `g'(0) = a g(0)`, `g'(L) = -a g(L)`.
fn robin_green_1d(z_lo: f64, z_hi: f64, l: f64, kappa2: Complex64, a: Complex64) -> Result<Complex64> {
    let mut kappa = kappa2.sqrt();
    if kappa.im < 0.0 {
        kappa = -kappa;
    }
    // u(s) = cos(κs) + a·s·sinc(κs) meets the condition at s = 0; the left
    // and right solutions are u(z) and u(L - z).
    if kappa.im * l < 20.0 {
        let u = |s: f64| eigenfunction(kappa, a, s);
        let (ul, _) = u(z_lo);
        let (ur, _) = u(l - z_hi);
        let (u_end, du_end) = u(l);
        let w = -du_end - a * u_end;
        if w.norm() < 1e-13 * (kappa.norm() + a.norm()) {
            return Err(Error::NearSingularMode {
                index: vec![],
                gap: w.norm(),
            });
        }
        return Ok(-ul * ur / w);
    }
    // Growing exponentials factored out: u(s) = e^{-iκs}·A(s),
    // u'(s) = e^{-iκs}·B(s), with |e^{2iκs}| ≤ 1.
    let r = a / (I * kappa);
    let amp = |s: f64| {
        let e = (2.0 * I * kappa * s).exp();
        let aa = 0.5 * (1.0 - r) + 0.5 * (1.0 + r) * e;
        let bb = -0.5 * I * kappa * (1.0 - r) + 0.5 * I * kappa * (1.0 + r) * e;
        (aa, bb)
    };
    let (a_end, b_end) = amp(l);
    let w = -b_end - a * a_end;
    let g = -(I * kappa * (z_hi - z_lo)).exp() * amp(z_lo).0 * amp(l - z_hi).0 / w;
    Ok(g)
}

/// Nodal values on a uniform grid including the boundary, x index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct FdGrid {
    pub dim: Dim,
    pub counts: [usize; 3],
    pub h: Vec3,
    pub values: Vec<Complex64>,
}

impl FdGrid {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        [
            idx % self.counts[0],
            (idx / self.counts[0]) % self.counts[1],
            idx / (self.counts[0] * self.counts[1]),
        ]
    }

    pub fn node(&self, idx: usize) -> Vec3 {
        let m = self.multi_index(idx);
        [0, 1, 2].map(|a| m[a] as f64 * self.h[a])
    }

    /// True for nodes off every face.
    pub fn is_interior(&self, idx: usize) -> bool {
        let m = self.multi_index(idx);
        (0..self.dim.count()).all(|a| m[a] > 0 && m[a] + 1 < self.counts[a])
    }

    /// Index of the node closest to `x`.
    pub fn nearest(&self, x: &Vec3) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for a in 0..self.dim.count() {
            let i = (x[a] / self.h[a]).round().clamp(0.0, (self.counts[a] - 1) as f64) as usize;
            idx += i * stride;
            stride *= self.counts[a];
        }
        idx
    }
}

/// Finite-difference solution of `(∇² + k²)p = -δ(x - x0)` with the
/// homogeneous impedance condition, `grid_n` nodes per axis.
pub fn fd_reference(phys: &PhysicalConfig, domain: &ShoeboxDomain, grid_n: usize) -> Result<FdGrid> {
    let counts = [grid_n; 3];
    fd_solve(phys, domain, &counts[..domain.dim.count()], &|_, _| ZERO)
}

/// General finite-difference solve with `∂_n p + ikβp = g(x, n)` on the
/// boundary. The source, if any, is a discrete delta of weight one at the
/// nearest node.
pub fn fd_solve(
    phys: &PhysicalConfig,
    domain: &ShoeboxDomain,
    counts: &[usize],
    boundary: &(dyn Fn(&Vec3, &Vec3) -> Complex64 + Sync),
) -> Result<FdGrid> {
    let d = domain.dim.count();
    if counts.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: counts.len(),
        });
    }
    if counts.iter().any(|&n| n < 3) {
        return Err(Error::InvalidConfig("finite-difference grids need at least 3 nodes per axis".into()));
    }
    let mut n3 = [1usize; 3];
    let mut h = [0.0; 3];
    for a in 0..d {
        n3[a] = counts[a];
        h[a] = domain.lengths[a] / (counts[a] - 1) as f64;
    }
    let total: usize = n3.iter().product();
    let mut grid = FdGrid {
        dim: domain.dim,
        counts: n3,
        h,
        values: vec![ZERO; total],
    };

    // Unknowns are ordered with the axis of fewest nodes fastest to keep the
    // band narrow; `stride` maps a grid axis to its stride in that ordering.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by_key(|&a| n3[a]);
    let mut stride = [0usize; 3];
    let mut s = 1;
    for &a in &order {
        stride[a] = s;
        s *= n3[a];
    }
    let band = stride[order[d - 1]];
    let mut system = BandedSystem::new(total, band, band);

    let a_robin = I * phys.k * phys.beta;
    let k2 = phys.k * phys.k;
    for idx in 0..total {
        let m = grid.multi_index(idx);
        let row = (0..d).map(|a| m[a] * stride[a]).sum::<usize>();
        let x = grid.node(idx);
        let mut diag = Complex64::new(k2, 0.0);
        let mut rhs = ZERO;
        for a in 0..d {
            let inv_h2 = 1.0 / (h[a] * h[a]);
            diag -= 2.0 * inv_h2;
            let last = n3[a] - 1;
            if m[a] == 0 || m[a] == last {
                // ghost node eliminated with the one-sided Robin condition
                let upper = m[a] == last;
                let mut normal = [0.0; 3];
                normal[a] = if upper { 1.0 } else { -1.0 };
                let g = boundary(&x, &normal);
                let inner = if upper { row - stride[a] } else { row + stride[a] };
                system.add(row, inner, Complex64::new(2.0 * inv_h2, 0.0));
                diag -= 2.0 * a_robin / h[a];
                rhs -= 2.0 * g / h[a];
            } else {
                system.add(row, row - stride[a], Complex64::new(inv_h2, 0.0));
                system.add(row, row + stride[a], Complex64::new(inv_h2, 0.0));
            }
        }
        system.add(row, row, diag);
        system.rhs[row] += rhs;
    }
    if let Some(x0) = &domain.source {
        let m = grid.multi_index(grid.nearest(x0));
        let row = (0..d).map(|a| m[a] * stride[a]).sum::<usize>();
        let volume: f64 = h[..d].iter().product();
        system.rhs[row] -= Complex64::new(1.0 / volume, 0.0);
    }

    let solution = system.solve()?;
    for idx in 0..total {
        let m = grid.multi_index(idx);
        let row = (0..d).map(|a| m[a] * stride[a]).sum::<usize>();
        grid.values[idx] = solution[row];
    }
    Ok(grid)
}

/// Band matrix with `kl` sub- and `ku` super-diagonals, solved by Gaussian
/// elimination with partial pivoting. Row `i` stores columns
/// `i - kl ..= i + kl + ku` to leave room for pivoting fill-in.
struct BandedSystem {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<Complex64>,
    rhs: Vec<Complex64>,
}

impl BandedSystem {
    fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![ZERO; n * width],
            rhs: vec![ZERO; n],
        }
    }

    fn at(&self, row: usize, col: usize) -> usize {
        debug_assert!(col + self.kl >= row && col <= row + self.kl + self.ku);
        row * self.width + (col + self.kl - row)
    }

    fn add(&mut self, row: usize, col: usize, v: Complex64) {
        let i = self.at(row, col);
        self.data[i] += v;
    }

    fn solve(mut self) -> Result<Vec<Complex64>> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let scale = self.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for r in 0..n {
            let last_row = (r + kl).min(n - 1);
            let last_col = (r + kl + ku).min(n - 1);
            let pivot = (r..=last_row)
                .max_by(|&i, &j| {
                    let vi = self.data[self.at(i, r)].norm();
                    let vj = self.data[self.at(j, r)].norm();
                    vi.total_cmp(&vj)
                })
                .expect("non-empty pivot range");
            let pv = self.data[self.at(pivot, r)];
            if !(pv.norm() > 1e-13 * scale) {
                return Err(Error::SingularSystem(r));
            }
            if pivot != r {
                for c in r..=last_col {
                    let (i, j) = (self.at(r, c), self.at(pivot, c));
                    self.data.swap(i, j);
                }
                self.rhs.swap(r, pivot);
            }
            let inv = 1.0 / self.data[self.at(r, r)];
            for i in r + 1..=last_row {
                let factor = self.data[self.at(i, r)] * inv;
                if factor == ZERO {
                    continue;
                }
                let at = self.at(i, r);
                self.data[at] = ZERO;
                let (src, dst) = (self.at(r, r + 1), self.at(i, r + 1));
                let len = last_col - r;
                for c in 0..len {
                    let v = self.data[src + c];
                    self.data[dst + c] -= factor * v;
                }
                let b = self.rhs[r];
                self.rhs[i] -= factor * b;
            }
        }
        let mut x = vec![ZERO; n];
        for r in (0..n).rev() {
            let last_col = (r + kl + ku).min(n - 1);
            let mut acc = self.rhs[r];
            let base = self.at(r, r);
            for c in r + 1..=last_col {
                acc -= self.data[base + (c - r)] * x[c];
            }
            x[r] = acc / self.data[base];
        }
        Ok(x)
    }
}
