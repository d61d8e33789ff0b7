//! Plane-wave superposition networks for Helmholtz boundary-value problems.
//!
//! A field is represented as an average of plane waves `exp(ik(x·s_j + d_j))`
//! weighted by a small complex-valued network evaluated at each direction
//! `s_j`. Every such field solves the homogeneous Helmholtz equation exactly,
//! so training only has to fit the impedance boundary condition. A point
//! source is added in closed form.
//!
//! Modules:
//! - [`geometry`]: physical constants, shoebox domains, boundary and direction sampling.
//! - [`model`]: the field representation, its forward pass and monopole corrections.
//! - [`training`]: boundary loss, hand-written reverse-mode gradients, Adam.
//! - [`oracle`]: modal Green's function for impedance-walled boxes and a finite-difference solver.
//! - [`spectral`]: frequency sweeps, SPL, phase unwrapping, impulse responses and error metrics.

pub mod error;
mod fastmath;
pub mod geometry;
pub mod model;
pub mod oracle;
pub mod special;
pub mod spectral;
pub mod training;

pub use error::{Error, Result};
pub use geometry::{BoundaryPoint, Dim, DirectionAngles, PhysicalConfig, ShoeboxDomain, Vec3};
pub use model::{CvnnParams, FieldSample, HergNetParams};
pub use oracle::{AxisModes, ModeTable};
pub use spectral::{ImpulseResponse, TransferFunction};
pub use training::{AdamState, TrainConfig, TrainReport};

pub use num_complex::Complex64;
