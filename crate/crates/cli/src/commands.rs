use std::fmt::Write as _;
use std::time::Instant;

use hergnet::geometry::rng_stream;
use hergnet::model::{param_count, total_field_with};
use hergnet::oracle::{axial_order_limit, KmaxRule, ModeTable};
use hergnet::spectral::{
    band_deviation, error_metrics, impulse_response, ir_error, sweep, OracleKind, SweepPoint,
    TransferFunction,
};
use hergnet::training::{gradcheck, train_observed, GradcheckOptions};
use hergnet::{Complex64, PhysicalConfig, Vec3};
use serde::Serialize;

use crate::config::Resolved;
use crate::output::{error_csv, field_csv, receivers_csv, series_csv, unix_time, RunDir};
use crate::CliError;

/// Gradient checks pass below this relative error.
pub const GRADCHECK_TOL: f64 = 1e-5;

/// Level window for sweep deviations, dB below the band maximum.
pub const SPL_WINDOW_DB: f64 = 20.0;

pub struct Invocation<'a> {
    pub resolved: &'a Resolved,
    /// Configuration file as given, copied beside the outputs.
    pub raw_config: Option<&'a str>,
    pub dry_run: bool,
}

impl Invocation<'_> {
    fn open_run_dir(&self) -> Result<RunDir, CliError> {
        let dir = RunDir::acquire(&self.resolved.require_out()?)?;
        if let Some(raw) = self.raw_config {
            dir.write("config.toml", raw)?;
        }
        dir.write("resolved.toml", &self.resolved.record_toml())?;
        Ok(dir)
    }
}

#[derive(Serialize)]
pub struct Counts {
    pub dim: usize,
    pub frequency: f64,
    pub k: f64,
    pub wavelength: f64,
    pub n_quad: usize,
    pub n_train: usize,
    pub n_param: usize,
    pub n_batches: usize,
}

fn counts(r: &Resolved, phys: &PhysicalConfig) -> Result<Counts, CliError> {
    let n_quad = r.train.quad_count(phys.f);
    let n_train = r.train.train_count(&r.domain, phys.f, phys.c)?;
    Ok(Counts {
        dim: r.domain.dim.count(),
        frequency: phys.f,
        k: phys.k,
        wavelength: phys.c / phys.f,
        n_quad,
        n_train,
        n_param: param_count(r.domain.dim, n_quad),
        n_batches: r.train.batch_count(n_train),
    })
}

fn to_toml<T: Serialize>(v: &T) -> String {
    toml::to_string(v).expect("report serialises")
}

#[derive(Serialize)]
struct ErrorSummary {
    oracle: OracleKind,
    points: usize,
    max_abs: f64,
    max_rel: f64,
    rel_l2: f64,
}

#[derive(Serialize)]
struct SolveSummary {
    command: &'static str,
    finished_unix: u64,
    wall_time_s: f64,
    epochs: usize,
    adam_steps: u64,
    first_loss: f64,
    final_loss: f64,
    counts: Counts,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_error: Option<ErrorSummary>,
}

pub fn solve(inv: &Invocation) -> Result<(), CliError> {
    let r = inv.resolved;
    r.require_frequency()?;
    let phys = r.phys;
    let counts = counts(r, &phys)?;
    if inv.dry_run {
        print!("{}", to_toml(&counts));
        return Ok(());
    }
    let dir = inv.open_run_dir()?;
    let dim = counts.dim;
    eprintln!(
        "training at {} Hz: {} directions, {} boundary points, {} parameters",
        phys.f, counts.n_quad, counts.n_train, counts.n_param
    );
    let start = Instant::now();
    let mut rng = rng_stream(r.train.seed, 0);
    let (params, report) = train_observed(&r.train, &phys, &r.domain, &mut rng, &mut |epoch, loss| {
        if epoch == 0 || (epoch + 1) % 100 == 0 {
            eprintln!("epoch {:>5}  loss {loss:.4e}", epoch + 1);
        }
    })?;
    params.save(&dir.path().join("params.json"))?;
    let mut loss = String::from("epoch,loss\n");
    for (i, l) in report.loss_history.iter().enumerate() {
        let _ = writeln!(loss, "{},{l:e}", i + 1);
    }
    dir.write("loss.csv", &loss)?;

    let waves = params.plane_waves(phys.k);
    let eval = |xs: &[Vec3]| -> Result<Vec<Complex64>, CliError> {
        Ok(xs
            .iter()
            .map(|x| total_field_with(&waves, x, &phys, &r.domain).map(|s| s.p))
            .collect::<Result<_, _>>()?)
    };
    let grid = r.grid_points();
    let model = eval(&grid)?;
    dir.write("field.csv", &field_csv(&grid, &model, dim))?;
    let at_receivers = eval(&r.receivers)?;

    let mut grid_error = None;
    let mut oracle_receivers = None;
    if r.domain.source.is_some() {
        let oracle = r.oracle.evaluate(&grid, &phys, &r.domain)?;
        let m = error_metrics(&model, &oracle)?;
        let max_ref = oracle.iter().fold(0.0f64, |a, v| a.max(v.norm()));
        dir.write("oracle.csv", &field_csv(&grid, &oracle, dim))?;
        dir.write("error.csv", &error_csv(&grid, &m.pointwise, max_ref, dim))?;
        eprintln!("grid error vs oracle: relative L2 {:.3e}, max relative {:.3e}", m.rel_l2, m.max_rel);
        grid_error = Some(ErrorSummary {
            oracle: r.oracle,
            points: grid.len(),
            max_abs: m.max_abs,
            max_rel: m.max_rel,
            rel_l2: m.rel_l2,
        });
        if !r.receivers.is_empty() {
            oracle_receivers = Some(r.oracle.evaluate(&r.receivers, &phys, &r.domain)?);
        }
    }
    if !r.receivers.is_empty() {
        dir.write(
            "receivers.csv",
            &receivers_csv(&r.receivers, &at_receivers, oracle_receivers.as_deref(), dim),
        )?;
    }
    let summary = SolveSummary {
        command: "solve",
        finished_unix: unix_time(),
        wall_time_s: start.elapsed().as_secs_f64(),
        epochs: r.train.epochs,
        adam_steps: report.adam_steps,
        first_loss: report.loss_history[0],
        final_loss: report.final_loss(),
        counts,
        grid_error,
    };
    dir.write("summary.toml", &to_toml(&summary))?;
    Ok(())
}

#[derive(Serialize)]
struct SweepDryRun {
    frequencies: usize,
    receivers: usize,
    first: Counts,
    last: Counts,
}

#[derive(Serialize)]
struct ReceiverSummary {
    index: usize,
    position: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rel_l2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_spl_dev_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_phase_dev_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    window_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ir_imag_residue: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ir_max_error: Option<f64>,
}

#[derive(Serialize)]
struct SweepSummary {
    command: &'static str,
    finished_unix: u64,
    wall_time_s: f64,
    frequencies: usize,
    failures: usize,
    partial: bool,
    spl_window_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleKind>,
    receiver: Vec<ReceiverSummary>,
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn points_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from("f_hz,seed,status,final_loss,message\n");
    for p in points {
        let (status, loss, msg) = match (&p.outcome, &p.oracle_error) {
            (Err(e), _) => ("train_failed", f64::NAN, e.as_str()),
            (Ok(rep), Some(e)) => ("oracle_failed", rep.final_loss(), e.as_str()),
            (Ok(rep), None) => ("ok", rep.final_loss(), ""),
        };
        let _ = writeln!(s, "{},{},{status},{loss:e},{}", p.f, p.seed, csv_quote(msg));
    }
    s
}

fn spl_phase_csv(model: &TransferFunction, oracle: Option<&TransferFunction>) -> String {
    let (ls, ps) = (model.spl(), model.unwrapped_phase());
    let o = oracle.map(|o| (o.spl(), o.unwrapped_phase()));
    let mut header = String::from("f_hz,spl_db,phase_rad");
    if o.is_some() {
        header.push_str(",oracle_spl_db,oracle_phase_rad");
    }
    series_csv(
        &header,
        model.freqs.iter().enumerate().map(|(i, &f)| {
            let mut row = vec![f, ls[i], ps[i]];
            if let Some((ol, op)) = &o {
                row.extend([ol[i], op[i]]);
            }
            row
        }),
    )
}

fn all_finite(tf: &TransferFunction) -> bool {
    tf.values.iter().all(|v| v.is_finite())
}

pub fn sweep_cmd(inv: &Invocation) -> Result<(), CliError> {
    let r = inv.resolved;
    let freqs = r
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("this command needs a [sweep] section".into()))?;
    if r.receivers.is_empty() {
        return Err(CliError::Config("a sweep needs at least one receiver".into()));
    }
    if inv.dry_run {
        let dry = SweepDryRun {
            frequencies: freqs.len(),
            receivers: r.receivers.len(),
            first: counts(r, &r.phys.with_frequency(freqs[0])?)?,
            last: counts(r, &r.phys.with_frequency(*freqs.last().expect("non-empty"))?)?,
        };
        print!("{}", to_toml(&dry));
        return Ok(());
    }
    let dir = inv.open_run_dir()?;
    let oracle = r.domain.source.map(|_| r.oracle);
    let start = Instant::now();
    let mut last = Instant::now();
    let result = sweep(
        &r.train,
        &r.phys,
        &r.domain,
        &freqs,
        &r.receivers,
        oracle,
        &mut |p, ps| {
            let secs = last.elapsed().as_secs_f64();
            last = Instant::now();
            match &p.outcome {
                Ok(rep) => eprintln!(
                    "f = {:>7} Hz  loss {:.3e}  |p| {:.4e}  ({secs:.1} s)",
                    p.f,
                    rep.final_loss(),
                    ps[0].norm()
                ),
                Err(e) => eprintln!("f = {:>7} Hz  training failed: {e}", p.f),
            }
            if let Some(e) = &p.oracle_error {
                eprintln!("f = {:>7} Hz  oracle failed: {e}", p.f);
            }
        },
    )?;
    dir.write("points.csv", &points_csv(&result.points))?;

    let failures = result.failures().count();
    let mut receiver = Vec::new();
    for (i, model) in result.model.iter().enumerate() {
        let o = result.oracle.as_ref().map(|v| &v[i]);
        dir.write(&format!("tf_r{i}.csv"), &model.to_csv(o)?)?;
        dir.write(&format!("spl_phase_r{i}.csv"), &spl_phase_csv(model, o))?;
        let mut s = ReceiverSummary {
            index: i,
            position: model.receiver[..r.domain.dim.count()].to_vec(),
            rel_l2: None,
            max_spl_dev_db: None,
            max_phase_dev_rad: None,
            window_points: None,
            ir_imag_residue: None,
            ir_max_error: None,
        };
        let ir = all_finite(model).then(|| impulse_response(model)).transpose()?;
        if let Some(ir) = &ir {
            dir.write(&format!("ir_r{i}.csv"), &ir.to_csv())?;
            s.ir_imag_residue = Some(ir.imag_residue);
        }
        if let Some(o) = o.filter(|o| all_finite(o)) {
            let oir = impulse_response(o)?;
            dir.write(&format!("ir_oracle_r{i}.csv"), &oir.to_csv())?;
            if let Some(ir) = &ir {
                let e = ir_error(ir, &oir)?;
                dir.write(
                    &format!("ir_error_r{i}.csv"),
                    &series_csv("t_s,err", ir.t.iter().zip(&e).map(|(t, e)| vec![*t, *e])),
                )?;
                s.ir_max_error = Some(e.iter().fold(0.0f64, |m, v| m.max(*v)));
                s.rel_l2 = Some(error_metrics(&model.values, &o.values)?.rel_l2);
                let d = band_deviation(model, o, SPL_WINDOW_DB)?;
                s.max_spl_dev_db = Some(d.max_spl_db);
                s.max_phase_dev_rad = Some(d.max_phase_rad);
                s.window_points = Some(d.included.iter().filter(|&&x| x).count());
            }
        }
        receiver.push(s);
    }
    let summary = SweepSummary {
        command: "sweep",
        finished_unix: unix_time(),
        wall_time_s: start.elapsed().as_secs_f64(),
        frequencies: freqs.len(),
        failures,
        partial: failures > 0,
        spl_window_db: SPL_WINDOW_DB,
        oracle,
        receiver,
    };
    dir.write("summary.toml", &to_toml(&summary))?;
    if failures > 0 {
        return Err(CliError::Numerical(format!(
            "{failures} of {} frequencies failed; outputs in {} are partial",
            freqs.len(),
            dir.path().display()
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct AxisSummary {
    length: f64,
    orders: usize,
    max_scaled_residual: f64,
    max_bc_residual: f64,
}

#[derive(Serialize)]
struct OracleSummary {
    command: &'static str,
    finished_unix: u64,
    frequency: f64,
    k: f64,
    beta: [f64; 2],
    cutoff_factor: f64,
    mode_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_oracle: Option<OracleKind>,
    grid_points: usize,
    axis: Vec<AxisSummary>,
}

#[derive(Serialize)]
struct OracleDryRun {
    frequency: f64,
    cutoff_factor: f64,
    axial_orders: Vec<usize>,
}

pub fn oracle_cmd(inv: &Invocation) -> Result<(), CliError> {
    let r = inv.resolved;
    let f = r.require_frequency()?;
    let phys = r.phys;
    let lengths = r.domain.axis_lengths();
    if inv.dry_run {
        let dry = OracleDryRun {
            frequency: f,
            cutoff_factor: r.cutoff_factor,
            axial_orders: lengths
                .iter()
                .map(|&l| axial_order_limit(l, f, phys.c, r.cutoff_factor) + 1)
                .collect(),
        };
        print!("{}", to_toml(&dry));
        return Ok(());
    }
    let table = ModeTable::with_rule(&phys, &r.domain, KmaxRule { factor: r.cutoff_factor })?;
    let dir = inv.open_run_dir()?;
    dir.write("mode_table.toml", &table.to_toml())?;
    dir.write("mode_table.csv", &table.to_csv())?;
    let axis = table
        .axes
        .iter()
        .map(|ax| AxisSummary {
            length: ax.length,
            orders: ax.len(),
            max_scaled_residual: (0..ax.len())
                .map(|i| ax.scaled_residual(i, phys.k, phys.beta))
                .fold(0.0, f64::max),
            max_bc_residual: (0..ax.len()).map(|i| ax.bc_residual(i)).fold(0.0, f64::max),
        })
        .collect();

    let dim = r.domain.dim.count();
    let mut grid_points = 0;
    if r.domain.source.is_some() {
        let grid = r.grid_points();
        let values = r.oracle.evaluate(&grid, &phys, &r.domain)?;
        dir.write("oracle.csv", &field_csv(&grid, &values, dim))?;
        grid_points = grid.len();
        if !r.receivers.is_empty() {
            let at = r.oracle.evaluate(&r.receivers, &phys, &r.domain)?;
            dir.write("receivers.csv", &field_csv(&r.receivers, &at, dim))?;
        }
    }
    let summary = OracleSummary {
        command: "oracle",
        finished_unix: unix_time(),
        frequency: f,
        k: phys.k,
        beta: [phys.beta.re, phys.beta.im],
        cutoff_factor: r.cutoff_factor,
        mode_count: table.mode_count(),
        grid_oracle: r.domain.source.map(|_| r.oracle),
        grid_points,
        axis,
    };
    dir.write("summary.toml", &to_toml(&summary))?;
    Ok(())
}

#[derive(Serialize)]
struct GradcheckSummary {
    command: &'static str,
    dim: usize,
    frequency: f64,
    n_quad: usize,
    n_points: usize,
    n_coords: usize,
    step: f64,
    max_rel_error: f64,
    tolerance: f64,
    passed: bool,
    skipped_near_kink: usize,
    step_sweep: Vec<[f64; 2]>,
}

pub fn gradcheck_cmd(inv: &Invocation, corrupt_gradient: bool) -> Result<(), CliError> {
    let r = inv.resolved;
    let options = GradcheckOptions {
        corrupt_gradient,
        ..r.gradcheck.clone()
    };
    if inv.dry_run {
        return Ok(());
    }
    let start = Instant::now();
    let mut rng = rng_stream(r.train.seed, 0);
    let report = gradcheck(&options, &r.phys, &r.domain, &mut rng)?;
    let passed = report.max_rel_error < GRADCHECK_TOL;
    let summary = GradcheckSummary {
        command: "gradcheck",
        dim: r.domain.dim.count(),
        frequency: r.phys.f,
        n_quad: options.n_quad,
        n_points: options.n_points,
        n_coords: report.entries.len(),
        step: options.step,
        max_rel_error: report.max_rel_error,
        tolerance: GRADCHECK_TOL,
        passed,
        skipped_near_kink: report.skipped_near_kink,
        step_sweep: report.step_sweep.iter().map(|&(h, e)| [h, e]).collect(),
    };
    let text = to_toml(&summary);
    print!("{text}");
    eprintln!("gradient check took {:.3} s", start.elapsed().as_secs_f64());
    if r.out.is_some() {
        inv.open_run_dir()?.write("gradcheck.toml", &text)?;
    }
    if passed {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "gradient check failed: max relative error {:.3e} >= {GRADCHECK_TOL:e}",
            report.max_rel_error
        )))
    }
}
