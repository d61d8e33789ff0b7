//! Run configuration file.
//!
//! ```toml
//! out = "runs/desk"              # output directory, `--out` wins
//! frequency = 500.0              # solve, oracle, gradcheck
//! receivers = [[0.7, 1.2, 1.5]]
//!
//! [domain]
//! lengths = [1.0, 1.4, 1.9]      # 2 or 3 entries
//! source = [0.2, 0.4, 0.3]       # optional
//!
//! [physics]                      # give at most one wall description
//! c = 343.0
//! rho = 1.2
//! impedance_rho_c = [10.0, -10.0]   # Z/(ρc), the default
//! # impedance = [4116.0, -4116.0]   # Z in Pa·s/m
//! # admittance = [0.05, 0.05]       # ρc/Z; [0, 0] means rigid (oracle only)
//!
//! [sweep]
//! start = 100.0
//! stop = 600.0
//! step = 10.0
//!
//! [training]                     # every key optional
//! epochs = 1000
//! lr = 2e-3
//! ppw = 6.0
//! n_min = 1000
//! seed = 0
//!
//! [grid]
//! counts = [10, 10, 10]          # cell-centred evaluation points
//!
//! [oracle]
//! kind = "converged"             # or "truncated"
//! tol = 1e-10
//! cutoff_factor = 2.0
//!
//! [gradcheck]
//! n_quad = 8
//! n_points = 3
//! n_coords = 20
//! hidden = [10, 10]
//! ```

use std::path::PathBuf;

use hergnet::spectral::{check_uniform, OracleKind};
use hergnet::training::GradcheckOptions;
use hergnet::{Complex64, Dim, PhysicalConfig, ShoeboxDomain, TrainConfig, Vec3};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    #[serde(default)]
    pub receivers: Vec<Vec<f64>>,
    pub domain: DomainSection,
    #[serde(default)]
    pub physics: PhysicsSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub gradcheck: GradcheckSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub lengths: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub impedance: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub impedance_rho_c: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub admittance: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ppw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_min: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_threshold: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adam_beta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adam_beta2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adam_eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_quad: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_train: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleChoice {
    #[default]
    Converged,
    Truncated,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<OracleChoice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff_factor: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_quad: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_coords: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

const DEFAULT_GRID: usize = 10;
const DEFAULT_TOL: f64 = 1e-10;
const DEFAULT_CUTOFF: f64 = 2.0;
const DEFAULT_Z_RHO_C: [f64; 2] = [10.0, -10.0];

/// A configuration with every default applied.
#[derive(Clone, Debug)]
pub struct Resolved {
    /// The configuration with defaults written out, for provenance.
    pub record: RunConfig,
    pub domain: ShoeboxDomain,
    /// Physical constants; `f` is the configured frequency, or the first
    /// sweep frequency, or 1 Hz if neither is set.
    pub phys: PhysicalConfig,
    pub frequency: Option<f64>,
    pub sweep: Option<Vec<f64>>,
    pub train: TrainConfig,
    pub receivers: Vec<Vec3>,
    pub grid: Vec<usize>,
    pub oracle: OracleKind,
    /// Cutoff of exported mode tables, in multiples of the frequency.
    pub cutoff_factor: f64,
    pub gradcheck: GradcheckOptions,
    pub out: Option<PathBuf>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn to_vec3(v: &[f64], dim: Dim, what: &str) -> Result<Vec3, CliError> {
    if v.len() != dim.count() {
        return Err(bad(format!("{what} needs {} coordinates, got {}", dim.count(), v.len())));
    }
    let mut x = [0.0; 3];
    x[..v.len()].copy_from_slice(v);
    Ok(x)
}

/// `start, start + step, ..., stop`.
pub fn sweep_grid(s: &SweepSection) -> Result<Vec<f64>, CliError> {
    if !(s.start > 0.0 && s.step > 0.0 && s.stop >= s.start && s.stop.is_finite()) {
        return Err(bad(format!(
            "sweep needs 0 < start <= stop and step > 0, got {}..{} step {}",
            s.start, s.stop, s.step
        )));
    }
    let span = (s.stop - s.start) / s.step;
    let n = span.round();
    if (span - n).abs() > 1e-6 {
        return Err(bad(format!(
            "sweep range {}..{} is not a whole number of {} Hz steps",
            s.start, s.stop, s.step
        )));
    }
    let freqs: Vec<f64> = (0..=n as usize).map(|i| s.start + s.step * i as f64).collect();
    check_uniform(&freqs)?;
    Ok(freqs)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| bad(e.to_string()))
    }

    /// The smallest configuration for a given domain, used when none is given.
    pub fn for_domain(domain: &ShoeboxDomain, frequency: f64) -> Self {
        let d = domain.dim.count();
        Self {
            frequency: Some(frequency),
            domain: DomainSection {
                lengths: domain.lengths[..d].to_vec(),
                source: domain.source.map(|s| s[..d].to_vec()),
            },
            ..Self::default()
        }
    }

    pub fn resolve(&self, seed: Option<u64>, out: Option<PathBuf>) -> Result<Resolved, CliError> {
        let domain = ShoeboxDomain::new(&self.domain.lengths, self.domain.source.as_deref())?;
        let dim = domain.dim;
        let mut record = self.clone();

        let p = &self.physics;
        let c = p.c.unwrap_or(hergnet::geometry::SPEED_OF_SOUND);
        let rho = p.rho.unwrap_or(hergnet::geometry::AIR_DENSITY);
        let walls = [p.impedance.is_some(), p.impedance_rho_c.is_some(), p.admittance.is_some()];
        if walls.iter().filter(|&&w| w).count() > 1 {
            return Err(bad("give only one of physics.impedance, impedance_rho_c, admittance"));
        }
        let sweep = self.sweep.as_ref().map(sweep_grid).transpose()?;
        if let Some(f) = self.frequency {
            if !(f > 0.0 && f.is_finite()) {
                return Err(bad(format!("frequency must be positive, got {f}")));
            }
        }
        let f = self
            .frequency
            .or_else(|| sweep.as_ref().map(|s| s[0]))
            .unwrap_or(1.0);
        let cplx = |v: [f64; 2]| Complex64::new(v[0], v[1]);
        let phys = if let Some(beta) = p.admittance {
            PhysicalConfig::from_admittance(c, rho, f, cplx(beta))?
        } else if let Some(z) = p.impedance {
            PhysicalConfig::new(c, rho, f, cplx(z))?
        } else {
            let z = p.impedance_rho_c.unwrap_or(DEFAULT_Z_RHO_C);
            record.physics.impedance_rho_c = Some(z);
            PhysicalConfig::new(c, rho, f, cplx(z) * (rho * c))?
        };
        record.physics.c = Some(c);
        record.physics.rho = Some(rho);

        let t = &self.training;
        let d = TrainConfig::default();
        let train = TrainConfig {
            epochs: t.epochs.unwrap_or(d.epochs),
            lr: t.lr.unwrap_or(d.lr),
            adam_beta1: t.adam_beta1.unwrap_or(d.adam_beta1),
            adam_beta2: t.adam_beta2.unwrap_or(d.adam_beta2),
            adam_eps: t.adam_eps.unwrap_or(d.adam_eps),
            ppw: t.ppw.unwrap_or(d.ppw),
            n_min: t.n_min.unwrap_or(d.n_min),
            batch_threshold: t.batch_threshold.unwrap_or(d.batch_threshold),
            seed: seed.or(t.seed).unwrap_or(d.seed),
            n_quad: t.n_quad,
            n_train: t.n_train,
        };
        train.validate()?;
        record.training = TrainingSection {
            epochs: Some(train.epochs),
            lr: Some(train.lr),
            ppw: Some(train.ppw),
            n_min: Some(train.n_min),
            seed: Some(train.seed),
            batch_threshold: Some(train.batch_threshold),
            adam_beta1: Some(train.adam_beta1),
            adam_beta2: Some(train.adam_beta2),
            adam_eps: Some(train.adam_eps),
            n_quad: train.n_quad,
            n_train: train.n_train,
        };

        let receivers = self
            .receivers
            .iter()
            .map(|r| {
                let x = to_vec3(r, dim, "receiver")?;
                if !domain.contains_open(&x) {
                    return Err(bad(format!("receiver {r:?} is not inside the domain")));
                }
                Ok(x)
            })
            .collect::<Result<Vec<_>, _>>()?;

        let grid = self
            .grid
            .counts
            .clone()
            .unwrap_or_else(|| vec![DEFAULT_GRID; dim.count()]);
        domain.cell_centres(&grid)?;
        record.grid.counts = Some(grid.clone());

        let o = &self.oracle;
        let kind = o.kind.unwrap_or_default();
        let tol = o.tol.unwrap_or(DEFAULT_TOL);
        let factor = o.cutoff_factor.unwrap_or(DEFAULT_CUTOFF);
        if !(tol > 0.0 && tol < 1.0) {
            return Err(bad(format!("oracle.tol must lie in (0, 1), got {tol}")));
        }
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(bad(format!("oracle.cutoff_factor must be positive, got {factor}")));
        }
        let oracle = match kind {
            OracleChoice::Converged => OracleKind::Converged { tol },
            OracleChoice::Truncated => OracleKind::Truncated { factor },
        };
        record.oracle = OracleSection {
            kind: Some(kind),
            tol: Some(tol),
            cutoff_factor: Some(factor),
        };

        let g = &self.gradcheck;
        let gd = GradcheckOptions::default();
        let gradcheck = GradcheckOptions {
            n_quad: g.n_quad.unwrap_or(gd.n_quad),
            n_points: g.n_points.unwrap_or(gd.n_points),
            n_coords: g.n_coords.unwrap_or(gd.n_coords),
            hidden: g.hidden.clone().unwrap_or_else(|| gd.hidden.clone()),
            step: g.step.unwrap_or(gd.step),
            ..gd
        };
        if gradcheck.n_quad == 0 || gradcheck.n_points == 0 || gradcheck.n_coords == 0 {
            return Err(bad("gradcheck counts must be positive"));
        }
        if !(gradcheck.step > 0.0) {
            return Err(bad("gradcheck.step must be positive"));
        }
        record.gradcheck = GradcheckSection {
            n_quad: Some(gradcheck.n_quad),
            n_points: Some(gradcheck.n_points),
            n_coords: Some(gradcheck.n_coords),
            hidden: Some(gradcheck.hidden.clone()),
            step: Some(gradcheck.step),
        };

        let out = out.or_else(|| self.out.clone());
        record.out = out.clone();
        Ok(Resolved {
            record,
            domain,
            phys,
            frequency: self.frequency,
            sweep,
            train,
            receivers,
            grid,
            oracle,
            cutoff_factor: factor,
            gradcheck,
            out,
        })
    }
}

impl Resolved {
    pub fn require_frequency(&self) -> Result<f64, CliError> {
        self.frequency
            .ok_or_else(|| bad("this command needs `frequency` in the configuration"))
    }

    pub fn require_out(&self) -> Result<PathBuf, CliError> {
        self.out
            .clone()
            .ok_or_else(|| bad("no output directory: pass --out or set `out` in the configuration"))
    }

    pub fn grid_points(&self) -> Vec<Vec3> {
        self.domain.cell_centres(&self.grid).expect("validated in resolve")
    }

    pub fn record_toml(&self) -> String {
        toml::to_string(&self.record).expect("configuration serialises")
    }
}
