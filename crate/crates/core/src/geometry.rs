//! Physical constants, shoebox domains, boundary and direction sampling, and
//! the frequency-dependent size rules for training sets and quadratures.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points are always stored with three coordinates; in 2D the last one is zero.
pub type Vec3 = [f64; 3];

pub const SPEED_OF_SOUND: f64 = 343.0;
pub const AIR_DENSITY: f64 = 1.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn count(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    pub fn from_count(d: usize) -> Result<Self> {
        match d {
            2 => Ok(Dim::Two),
            3 => Ok(Dim::Three),
            _ => Err(Error::InvalidConfig(format!(
                "spatial dimension must be 2 or 3, got {d}"
            ))),
        }
    }
}

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Medium and frequency constants shared by the model, the loss and the oracle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConfig {
    /// Sound speed (m/s).
    pub c: f64,
    /// Density (kg/m³).
    pub rho: f64,
    /// Frequency (Hz).
    pub f: f64,
    /// Wavenumber `2πf/c` (rad/m).
    pub k: f64,
    /// Surface impedance (Pa·s/m).
    pub z: Complex64,
    /// Specific admittance `ρc/Z`.
    pub beta: Complex64,
}

impl PhysicalConfig {
    pub fn new(c: f64, rho: f64, f: f64, z: Complex64) -> Result<Self> {
        for (name, v) in [("sound speed", c), ("density", rho), ("frequency", f)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if z == Complex64::new(0.0, 0.0) || !z.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "surface impedance must be non-zero and finite, got {z}"
            )));
        }
        Ok(Self {
            c,
            rho,
            f,
            k: 2.0 * PI * f / c,
            z,
            beta: Complex64::new(rho * c, 0.0) / z,
        })
    }

    /// Air at 343 m/s, 1.2 kg/m³, walls with `Z = (10 - 10i)ρc`.
    pub fn lightly_absorbing(f: f64) -> Result<Self> {
        let rho_c = AIR_DENSITY * SPEED_OF_SOUND;
        Self::new(
            SPEED_OF_SOUND,
            AIR_DENSITY,
            f,
            Complex64::new(10.0, -10.0) * rho_c,
        )
    }

    /// From the specific admittance `β = ρc/Z`. `β = 0` gives rigid walls
    /// (infinite `Z`), usable by the oracle but not for training.
    pub fn from_admittance(c: f64, rho: f64, f: f64, beta: Complex64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::InvalidConfig(format!("admittance must be finite, got {beta}")));
        }
        if beta != Complex64::new(0.0, 0.0) {
            return Self::new(c, rho, f, Complex64::new(rho * c, 0.0) / beta);
        }
        let mut cfg = Self::new(c, rho, f, Complex64::new(1.0, 0.0))?;
        cfg.z = Complex64::new(f64::INFINITY, 0.0);
        cfg.beta = beta;
        Ok(cfg)
    }

    pub fn is_rigid(&self) -> bool {
        self.beta == Complex64::new(0.0, 0.0)
    }

    pub fn with_frequency(&self, f: f64) -> Result<Self> {
        if self.is_rigid() {
            Self::from_admittance(self.c, self.rho, f, self.beta)
        } else {
            Self::new(self.c, self.rho, f, self.z)
        }
    }

    pub fn rho_c(&self) -> f64 {
        self.rho * self.c
    }
}

/// Normal-incidence absorption coefficient `1 - |(Z - ρc)/(Z + ρc)|²`.
pub fn absorption_coefficient(z: Complex64, rho: f64, c: f64) -> Result<f64> {
    let rho_c = rho * c;
    let den = z + rho_c;
    if den.norm() == 0.0 {
        return Err(Error::InvalidConfig(
            "impedance equals -ρc; reflection coefficient undefined".into(),
        ));
    }
    Ok(1.0 - ((z - rho_c) / den).norm_sqr())
}

/// One face of a box: the set where coordinate `axis` equals 0 (`upper ==
/// false`) or the axis length (`upper == true`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Face {
    pub axis: usize,
    pub upper: bool,
}

impl Face {
    pub fn normal(&self) -> Vec3 {
        let mut n = [0.0; 3];
        n[self.axis] = if self.upper { 1.0 } else { -1.0 };
        n
    }
}

/// Axis-aligned box `[0, L_1] × ... × [0, L_D]` with an optional point source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShoeboxDomain {
    pub dim: Dim,
    pub lengths: Vec3,
    pub source: Option<Vec3>,
}

impl ShoeboxDomain {
    pub fn new(lengths: &[f64], source: Option<&[f64]>) -> Result<Self> {
        let dim = Dim::from_count(lengths.len())?;
        let mut l = [0.0; 3];
        for (i, &v) in lengths.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "axis {i} length must be positive, got {v}"
                )));
            }
            l[i] = v;
        }
        let source = match source {
            None => None,
            Some(s) => {
                if s.len() != lengths.len() {
                    return Err(Error::DimensionMismatch {
                        expected: lengths.len(),
                        got: s.len(),
                    });
                }
                let mut p = [0.0; 3];
                p[..s.len()].copy_from_slice(s);
                Some(p)
            }
        };
        let domain = Self {
            dim,
            lengths: l,
            source,
        };
        if let Some(p) = domain.source {
            if !domain.contains_open(&p) {
                return Err(Error::InvalidConfig(format!(
                    "source {:?} is not strictly inside the box",
                    &p[..dim.count()]
                )));
            }
        }
        Ok(domain)
    }

    /// The Louden-ratio room `[1, 1.4, 1.9]` m with a source at `[0.2, 0.4, 0.3]` m.
    pub fn louden_room() -> Self {
        Self::new(&[1.0, 1.4, 1.9], Some(&[0.2, 0.4, 0.3])).expect("valid room")
    }

    pub fn without_source(&self) -> Self {
        Self {
            source: None,
            ..self.clone()
        }
    }

    pub fn axis_lengths(&self) -> &[f64] {
        &self.lengths[..self.dim.count()]
    }

    /// Centres of a `counts[0] × counts[1] (× counts[2])` cell partition,
    /// last axis varying fastest.
    pub fn cell_centres(&self, counts: &[usize]) -> Result<Vec<Vec3>> {
        let d = self.dim.count();
        if counts.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: counts.len(),
            });
        }
        if counts.contains(&0) {
            return Err(Error::InvalidConfig("grid counts must be positive".into()));
        }
        let total: usize = counts.iter().product();
        let mut out = Vec::with_capacity(total);
        for flat in 0..total {
            let mut x = [0.0; 3];
            let mut rest = flat;
            for axis in (0..d).rev() {
                let i = rest % counts[axis];
                rest /= counts[axis];
                x[axis] = (i as f64 + 0.5) * self.lengths[axis] / counts[axis] as f64;
            }
            out.push(x);
        }
        Ok(out)
    }

    pub fn contains_open(&self, x: &Vec3) -> bool {
        (0..self.dim.count()).all(|a| x[a] > 0.0 && x[a] < self.lengths[a])
    }

    pub fn faces(&self) -> Vec<Face> {
        (0..self.dim.count())
            .flat_map(|axis| [false, true].map(|upper| Face { axis, upper }))
            .collect()
    }

    /// Area (3D) or length (2D) of a face.
    pub fn face_measure(&self, face: Face) -> f64 {
        (0..self.dim.count())
            .filter(|&a| a != face.axis)
            .map(|a| self.lengths[a])
            .product()
    }

    /// Surface area (3D) or perimeter (2D).
    pub fn boundary_measure(&self) -> f64 {
        self.faces().into_iter().map(|f| self.face_measure(f)).sum()
    }

    /// True when `x` lies on `face` and inside the closed extent of the other axes.
    pub fn on_face(&self, x: &Vec3, face: Face, tol: f64) -> bool {
        let fixed = if face.upper {
            self.lengths[face.axis]
        } else {
            0.0
        };
        if (x[face.axis] - fixed).abs() > tol {
            return false;
        }
        (0..self.dim.count())
            .filter(|&a| a != face.axis)
            .all(|a| x[a] >= -tol && x[a] <= self.lengths[a] + tol)
    }
}

/// A boundary sample with the outward unit normal of its face.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub x: Vec3,
    pub n: Vec3,
}

/// Unit directions stored as angles so that `|s_j| = 1` holds structurally.
///
/// In 2D `s = [cos θ, sin θ]`; in 3D `θ` is the polar and `φ` the azimuthal
/// angle, `s = [sin θ cos φ, sin θ sin φ, cos θ]`. `phi` is empty in 2D.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionAngles {
    pub dim: Dim,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl DirectionAngles {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Angles per direction: 1 in 2D, 2 in 3D.
    pub fn angles_per_direction(&self) -> usize {
        self.dim.count() - 1
    }

    pub fn unit(&self, j: usize) -> Vec3 {
        match self.dim {
            Dim::Two => {
                let (s, c) = self.theta[j].sin_cos();
                [c, s, 0.0]
            }
            Dim::Three => {
                let (st, ct) = self.theta[j].sin_cos();
                let (sp, cp) = self.phi[j].sin_cos();
                [st * cp, st * sp, ct]
            }
        }
    }

    /// Unit vector and its derivatives with respect to each angle (θ, then φ in 3D).
    pub fn unit_with_jacobian(&self, j: usize) -> (Vec3, [Vec3; 2]) {
        match self.dim {
            Dim::Two => {
                let (s, c) = self.theta[j].sin_cos();
                ([c, s, 0.0], [[-s, c, 0.0], [0.0; 3]])
            }
            Dim::Three => {
                let (st, ct) = self.theta[j].sin_cos();
                let (sp, cp) = self.phi[j].sin_cos();
                (
                    [st * cp, st * sp, ct],
                    [[ct * cp, ct * sp, -st], [-st * sp, st * cp, 0.0]],
                )
            }
        }
    }
}

/// A reproducible random stream. Distinct `stream` ids give independent
/// sequences for the same seed.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `max(n_min, ⌊S·(ppw·f/c)^(D-1)⌋)` with `S` the boundary measure.
pub fn training_point_count(
    domain: &ShoeboxDomain,
    f: f64,
    c: f64,
    ppw: f64,
    n_min: usize,
) -> Result<usize> {
    if !(ppw >= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "points per wavelength must be >= 1, got {ppw}"
        )));
    }
    let per_meter = ppw * f / c;
    let density = match domain.dim {
        Dim::Two => per_meter,
        Dim::Three => per_meter * per_meter,
    };
    let n = (domain.boundary_measure() * density).floor() as usize;
    Ok(n.max(n_min))
}

/// `max(n_min, round(f²/2000))`.
pub fn quad_count(f: f64, n_min: usize) -> usize {
    let n = (f * f / 2000.0).round() as usize;
    n.max(n_min)
}

/// Independent points uniformly distributed over the boundary: a face is drawn
/// with probability proportional to its measure, then a uniform point on it.
pub fn sample_boundary<R: Rng + ?Sized>(
    domain: &ShoeboxDomain,
    n: usize,
    rng: &mut R,
) -> Vec<BoundaryPoint> {
    let faces = domain.faces();
    let total = domain.boundary_measure();
    let mut cumulative = Vec::with_capacity(faces.len());
    let mut acc = 0.0;
    for face in &faces {
        acc += domain.face_measure(*face) / total;
        cumulative.push(acc);
    }
    let d = domain.dim.count();
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let idx = cumulative
                .iter()
                .position(|&c| u < c)
                .unwrap_or(faces.len() - 1);
            let face = faces[idx];
            let mut x = [0.0; 3];
            for (a, xa) in x.iter_mut().enumerate().take(d) {
                *xa = if a == face.axis {
                    if face.upper {
                        domain.lengths[a]
                    } else {
                        0.0
                    }
                } else {
                    rng.random::<f64>() * domain.lengths[a]
                };
            }
            BoundaryPoint { x, n: face.normal() }
        })
        .collect()
}

/// Directions uniform on the unit circle (2D) or sphere (3D).
pub fn sample_directions<R: Rng + ?Sized>(dim: Dim, n_quad: usize, rng: &mut R) -> DirectionAngles {
    match dim {
        Dim::Two => DirectionAngles {
            dim,
            theta: (0..n_quad).map(|_| rng.random::<f64>() * 2.0 * PI).collect(),
            phi: Vec::new(),
        },
        Dim::Three => {
            let mut theta = Vec::with_capacity(n_quad);
            let mut phi = Vec::with_capacity(n_quad);
            for _ in 0..n_quad {
                phi.push(rng.random::<f64>() * 2.0 * PI);
                let cos_theta: f64 = rng.random_range(-1.0..1.0);
                theta.push(cos_theta.acos());
            }
            DirectionAngles { dim, theta, phi }
        }
    }
}
