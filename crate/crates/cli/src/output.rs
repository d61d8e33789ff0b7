use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::{ErrorKind, Write as _};
use std::path::{Path, PathBuf};

use hergnet::{Complex64, Vec3};

use crate::CliError;

const LOCK: &str = ".lock";

/// Output directory held for the lifetime of one run.
pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    pub fn acquire(path: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(path).map_err(|e| io_error(path, e))?;
        let lock = path.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self {
                    path: path.to_path_buf(),
                })
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(CliError::Failed(format!(
                "{} is in use by another run (delete {} if that run is gone)",
                path.display(),
                lock.display()
            ))),
            Err(e) => Err(io_error(&lock, e)),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let p = self.path.join(name);
        fs::write(&p, contents).map_err(|e| io_error(&p, e))
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.path.join(LOCK));
    }
}

pub fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Failed(format!("{}: {e}", path.display()))
}

fn coord_header(dim: usize) -> &'static str {
    ["x", "x,y", "x,y,z"][dim - 1]
}

fn push_coords(s: &mut String, x: &Vec3, dim: usize) {
    for (i, v) in x[..dim].iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{v}");
    }
}

/// `x,y[,z],re,im`.
pub fn field_csv(points: &[Vec3], values: &[Complex64], dim: usize) -> String {
    let mut s = format!("{},re,im\n", coord_header(dim));
    for (x, v) in points.iter().zip(values) {
        push_coords(&mut s, x, dim);
        let _ = writeln!(s, ",{:e},{:e}", v.re, v.im);
    }
    s
}

/// `x,y[,z],abs_err,rel_err` with `rel_err = |a - b| / max |b|`.
pub fn error_csv(points: &[Vec3], pointwise: &[f64], max_ref: f64, dim: usize) -> String {
    let mut s = format!("{},abs_err,rel_err\n", coord_header(dim));
    for (x, e) in points.iter().zip(pointwise) {
        push_coords(&mut s, x, dim);
        let _ = writeln!(s, ",{e:e},{:e}", e / max_ref);
    }
    s
}

/// `x,y[,z],re,im[,oracle_re,oracle_im]` for receiver positions.
pub fn receivers_csv(points: &[Vec3], model: &[Complex64], oracle: Option<&[Complex64]>, dim: usize) -> String {
    let mut s = format!("{},re,im", coord_header(dim));
    if oracle.is_some() {
        s.push_str(",oracle_re,oracle_im");
    }
    s.push('\n');
    for (i, x) in points.iter().enumerate() {
        push_coords(&mut s, x, dim);
        let _ = write!(s, ",{:e},{:e}", model[i].re, model[i].im);
        if let Some(o) = oracle {
            let _ = write!(s, ",{:e},{:e}", o[i].re, o[i].im);
        }
        s.push('\n');
    }
    s
}

/// Rows of numbers; the first column (frequency or time) in plain notation.
pub fn series_csv(header: &str, rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut s = format!("{header}\n");
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            let _ = if i == 0 { write!(s, "{v}") } else { write!(s, ",{v:e}") };
        }
        s.push('\n');
    }
    s
}

pub fn unix_time() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
