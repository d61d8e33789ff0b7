//! Acceptance criteria, one line per check.
//!
//! Run with `cargo test -p hergnet-cli --test acceptance`. Criteria 6 and 7
//! train real models (about a minute and about fifteen minutes on one core).
//! The process exits non-zero if any check fails that is not listed in
//! `KNOWN_FAILURES`; those are still printed as FAIL, and the reasons are
//! recorded in the README.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use hergnet::geometry::rng_stream;
use hergnet::model::herglotz_pressure;
use hergnet::oracle::{axis_modes, converged_green, fd_solve, newton_modes, ModeTable};
use hergnet::spectral::{band_deviation, forward_spectrum, impulse_response, TransferFunction};
use hergnet::training::{gradcheck, GradcheckOptions};
use hergnet::{Complex64, Dim, HergNetParams, PhysicalConfig, ShoeboxDomain, Vec3};
use rand::Rng;

const GRADCHECK_TOL: f64 = 1e-6;
const HELMHOLTZ_TOL: f64 = 1e-4;
const ROOT_TOL: f64 = 1e-10;
const RIGID_ROOT_TOL: f64 = 1e-12;
const GREEN_1D_TOL: f64 = 0.01;
const CROSS_CHECK_TOL: f64 = 0.02;
const DESK_SOLVE_TOL: f64 = 0.15;
const DESK_SOLVE_SECONDS: f64 = 300.0;
const SPL_TOL_DB: f64 = 1.0;
const SPL_WINDOW_DB: f64 = 20.0;
const PHASE_TOL_RAD: f64 = 0.2;
const SWEEP_SECONDS: f64 = 1800.0;
const IR_REAL_TOL: f64 = 1e-10;
const IR_ROUNDTRIP_TOL: f64 = 1e-10;

/// Checks that fail for reasons documented in the README.
const KNOWN_FAILURES: &[&str] = &["4c", "7"];

const ROOM: &str = "[domain]\nlengths = [1.0, 1.4, 1.9]\nsource = [0.2, 0.4, 0.3]\n\n[physics]\nimpedance_rho_c = [10.0, -10.0]\n";

#[derive(PartialEq)]
enum Status {
    Pass,
    Fail,
    Info,
}

struct Report {
    lines: Vec<(String, Status, String)>,
}

impl Report {
    fn check(&mut self, id: &str, pass: bool, detail: String) {
        let status = if pass { Status::Pass } else { Status::Fail };
        let tag = match (&status, KNOWN_FAILURES.contains(&id)) {
            (Status::Pass, _) => "PASS",
            (_, true) => "FAIL (known)",
            _ => "FAIL",
        };
        println!("[{tag:<12}] {id:<3} {detail}");
        self.lines.push((id.to_string(), status, detail));
    }

    fn info(&mut self, id: &str, detail: String) {
        println!("[{:<12}] {id:<3} {detail}", "info");
        self.lines.push((id.to_string(), Status::Info, detail));
    }

    fn error(&mut self, id: &str, e: impl std::fmt::Display) {
        self.check(id, false, format!("could not run: {e}"));
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hergnet"))
}

fn work_dir() -> PathBuf {
    let d = std::env::temp_dir().join(format!("hergnet-acceptance-{}", std::process::id()));
    fs::create_dir_all(&d).unwrap();
    d
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = bin().args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        let err = String::from_utf8_lossy(&out.stderr);
        Err(format!("exit {:?}: {}", out.status.code(), err.lines().last().unwrap_or("")))
    }
}

fn read_toml(p: &Path) -> Result<toml::Table, String> {
    fs::read_to_string(p)
        .map_err(|e| e.to_string())?
        .parse()
        .map_err(|e: toml::de::Error| e.to_string())
}

fn float(t: &toml::Table, path: &[&str]) -> Result<f64, String> {
    let mut v = t.get(path[0]).ok_or(format!("missing {}", path[0]))?;
    for key in &path[1..] {
        v = v.get(key).ok_or(format!("missing {key}"))?;
    }
    v.as_float()
        .or_else(|| v.as_integer().map(|i| i as f64))
        .ok_or(format!("{path:?} is not a number"))
}

fn read_csv(p: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty csv")?.split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse::<f64>().map_err(|e| e.to_string())).collect())
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}

fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

fn criterion_1(r: &mut Report, dir: &Path) {
    let cfg = dir.join("paper_6000.toml");
    fs::write(&cfg, format!("frequency = 6000.0\n{ROOM}")).unwrap();
    let start = Instant::now();
    let out = match run_cli(&["solve", "--config", cfg.to_str().unwrap(), "--dry-run"]) {
        Ok(o) => o,
        Err(e) => return r.error("1", e),
    };
    let secs = start.elapsed().as_secs_f64();
    let t: toml::Table = match out.parse() {
        Ok(t) => t,
        Err(e) => return r.error("1", e),
    };
    let get = |k: &str| t.get(k).and_then(|v| v.as_integer()).unwrap_or(-1);
    let (nq, nt, np) = (get("n_quad"), get("n_train"), get("n_param"));
    r.check(
        "1",
        nq == 18000 && nt == 131_308 && np == 54_322 && secs < 1.0,
        format!("counts at 6000 Hz (dry run): N_quad={nq} (18000), N_train={nt} (131308), N_param={np} (54322), {secs:.2} s (< 1 s)"),
    );
}

fn criterion_2(r: &mut Report) {
    let mut worst = 0.0f64;
    let mut runs = 0;
    for (dim, domain) in [
        (2, ShoeboxDomain::new(&[1.0, 1.4], Some(&[0.2, 0.4])).unwrap()),
        (3, ShoeboxDomain::louden_room()),
    ] {
        for seed in 0..5u64 {
            let phys = PhysicalConfig::lightly_absorbing(200.0 + 350.0 * seed as f64).unwrap();
            let options = GradcheckOptions::default();
            match gradcheck(&options, &phys, &domain, &mut rng_stream(100 + seed, dim)) {
                Ok(rep) => worst = worst.max(rep.max_rel_error),
                Err(e) => return r.error("2", e),
            }
            runs += 1;
        }
    }
    r.check(
        "2",
        worst < GRADCHECK_TOL,
        format!("gradient vs central differences, {runs} instances (D=2,3; N_quad=8; 3 points; 20 coords): max rel error {worst:.2e} (< {GRADCHECK_TOL:e})"),
    );
    let out = bin().args(["gradcheck", "--corrupt-gradient"]).output();
    let code = out.ok().and_then(|o| o.status.code());
    r.check("2b", code == Some(1), format!("CLI gradcheck with corrupted gradient exits 1 (got {code:?})"));
}

fn criterion_3(r: &mut Report) {
    let mut worst = 0.0f64;
    let mut rng = rng_stream(7, 0);
    for draw in 0..20 {
        let dim = if draw % 2 == 0 { Dim::Three } else { Dim::Two };
        let domain = match dim {
            Dim::Three => ShoeboxDomain::louden_room(),
            Dim::Two => ShoeboxDomain::new(&[1.0, 1.4], None).unwrap(),
        };
        let k = 2.0 * PI * rng.random_range(100.0..6000.0) / 343.0;
        let params = HergNetParams::init(dim, 200, &mut rng);
        let h = 1e-3 / k;
        let p = |x: &Vec3| herglotz_pressure(&params, x, k);
        for _ in 0..20 {
            let mut x = [0.0; 3];
            for a in 0..dim.count() {
                x[a] = rng.random_range(0.0..domain.lengths[a]);
            }
            let p0 = p(&x);
            let mut lap = Complex64::new(0.0, 0.0);
            for a in 0..dim.count() {
                let (mut xp, mut xm) = (x, x);
                xp[a] += h;
                xm[a] -= h;
                lap += (p(&xp) - 2.0 * p0 + p(&xm)) / (h * h);
            }
            worst = worst.max((lap + k * k * p0).norm() / (k * k * p0.norm()));
        }
    }
    r.check(
        "3",
        worst < HELMHOLTZ_TOL,
        format!("Helmholtz residual of the plane-wave field, 20 draws x 20 points, h = 1e-3/k: max |lap p + k^2 p| / (k^2 |p|) = {worst:.2e} (< {HELMHOLTZ_TOL:e})"),
    );
}

fn rigid_green_1d(x: f64, x0: f64, k: f64, l: f64) -> f64 {
    let (lo, hi) = if x < x0 { (x, x0) } else { (x0, x) };
    -(k * lo).cos() * (k * (l - hi)).cos() / (k * (k * l).sin())
}

fn criterion_4(r: &mut Report) {
    let mut worst_f = 0.0f64;
    let mut worst_bc = 0.0f64;
    let mut roots = 0;
    for f in [100.0, 500.0, 1000.0, 6000.0] {
        let phys = PhysicalConfig::lightly_absorbing(f).unwrap();
        let beta = phys.beta;
        for l in [1.0, 1.4, 1.9] {
            let ax = match newton_modes(l, phys.k, beta, f, phys.c) {
                Ok(a) => a,
                Err(e) => return r.error("4a", e),
            };
            for i in 0..ax.len() {
                worst_f = worst_f.max(ax.scaled_residual(i, phys.k, beta));
                worst_bc = worst_bc.max(ax.bc_residual(i));
            }
            roots += ax.len();
        }
    }
    r.check(
        "4a",
        worst_f < ROOT_TOL && worst_bc < ROOT_TOL,
        format!("impedance roots, room axes at 100/500/1000/6000 Hz ({roots} roots): max scaled |F| {worst_f:.1e}, max BC residual {worst_bc:.1e} (< {ROOT_TOL:e})"),
    );

    let mut worst_rigid = 0.0f64;
    for l in [1.0, 1.4, 1.9] {
        let ax = axis_modes(l, 20.0, Complex64::new(0.0, 0.0), 200).unwrap();
        for (i, q) in ax.roots.iter().enumerate() {
            let want = ax.orders[i] as f64 * PI / l;
            worst_rigid = worst_rigid.max((q - want).norm() / want.max(1.0));
        }
    }
    r.check(
        "4b",
        worst_rigid < RIGID_ROOT_TOL,
        format!("rigid limit beta = 0: roots match n pi / L to {worst_rigid:.1e} (< {RIGID_ROOT_TOL:e})"),
    );

    // 1D rigid interval the height of the room, source at the source height
    let (l, x0, c) = (1.9, 0.3, 343.0);
    let mut errs = Vec::new();
    for f in [300.0, 500.0, 1000.0] {
        let k = 2.0 * PI * f / c;
        let modes = newton_modes(l, k, Complex64::new(0.0, 0.0), f, c).unwrap();
        let xs: Vec<f64> = (0..=380).map(|i| i as f64 * l / 380.0).collect();
        let series: Vec<Complex64> = xs.iter().map(|&x| modes.green_1d(x, x0, k).unwrap()).collect();
        let exact: Vec<Complex64> = xs.iter().map(|&x| Complex64::new(rigid_green_1d(x, x0, k, l), 0.0)).collect();
        errs.push((f, modes.len(), rel_l2(&series, &exact)));
    }
    let worst = errs.iter().map(|e| e.2).fold(0.0, f64::max);
    let detail: Vec<String> = errs
        .iter()
        .map(|(f, n, e)| format!("{f} Hz ({n} modes) {:.2}%", 100.0 * e))
        .collect();
    r.check(
        "4c",
        worst < GREEN_1D_TOL,
        format!("1D rigid Green's function, modes up to 2f, relative L2 vs closed form: {} (< 1%)", detail.join(", ")),
    );
    let k = 2.0 * PI * 500.0 / c;
    let wide = axis_modes(l, k, Complex64::new(0.0, 0.0), 2000).unwrap();
    let xs: Vec<f64> = (0..=380).map(|i| i as f64 * l / 380.0).collect();
    let series: Vec<Complex64> = xs.iter().map(|&x| wide.green_1d(x, x0, k).unwrap()).collect();
    let exact: Vec<Complex64> = xs.iter().map(|&x| Complex64::new(rigid_green_1d(x, x0, k, l), 0.0)).collect();
    r.info(
        "4c",
        format!("same series with 2000 modes at 500 Hz: {:.1e} (the series itself converges; the 2f cutoff is the limit)", rel_l2(&series, &exact)),
    );
}

fn criterion_5(r: &mut Report) {
    let start = Instant::now();
    let domain = ShoeboxDomain::new(&[1.0, 1.4], Some(&[0.2, 0.4])).unwrap();
    let phys = PhysicalConfig::lightly_absorbing(200.0).unwrap();
    let x0 = domain.source.unwrap();
    // 0.01 m cells, source on a node; wavelength 1.715 m
    let grid = match fd_solve(&phys, &domain, &[101, 141], &|_, _| Complex64::new(0.0, 0.0)) {
        Ok(g) => g,
        Err(e) => return r.error("5", e),
    };
    let ppw = phys.c / phys.f / grid.h[0];
    let src = grid.nearest(&x0);
    let idx: Vec<usize> = (0..grid.len()).filter(|&i| grid.is_interior(i) && i != src).collect();
    let xs: Vec<Vec3> = idx.iter().map(|&i| grid.node(i)).collect();
    let fd: Vec<Complex64> = idx.iter().map(|&i| grid.values[i]).collect();
    let modal = match converged_green(&xs, &x0, &phys, &domain, 1e-10) {
        Ok(v) => v,
        Err(e) => return r.error("5", e),
    };
    let e = rel_l2(&modal, &fd);
    let secs = start.elapsed().as_secs_f64();
    r.check(
        "5",
        e < CROSS_CHECK_TOL && ppw >= 10.0 && secs < 60.0,
        format!("2D 1 x 1.4 m, 200 Hz: modal sum vs finite differences ({ppw:.0} points/wavelength, {} nodes), relative L2 {e:.2e} (< 2%), {secs:.1} s", xs.len()),
    );
    match ModeTable::new(&phys, &domain).and_then(|t| t.green_many(&xs, &x0)) {
        Ok(trunc) => r.info("5", format!("mode table cut at 2f vs the same FD solution: {:.2e}", rel_l2(&trunc, &fd))),
        Err(e) => r.info("5", format!("mode table cut at 2f failed: {e}")),
    }
}

fn criterion_6(r: &mut Report, dir: &Path) {
    let cfg = dir.join("desk_500.toml");
    fs::write(&cfg, format!("frequency = 500.0\nreceivers = [[0.7, 1.2, 1.5]]\n{ROOM}\n[grid]\ncounts = [10, 10, 10]\n")).unwrap();
    let mut errors = Vec::new();
    let mut times = Vec::new();
    for seed in ["0", "1", "2"] {
        let out = dir.join(format!("desk_500_seed{seed}"));
        if let Err(e) = run_cli(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed]) {
            return r.error("6", e);
        }
        let s = match read_toml(&out.join("summary.toml")) {
            Ok(s) => s,
            Err(e) => return r.error("6", e),
        };
        let (Ok(e), Ok(t), Ok(m)) = (
            float(&s, &["grid_error", "rel_l2"]),
            float(&s, &["wall_time_s"]),
            float(&s, &["grid_error", "max_rel"]),
        ) else {
            return r.error("6", "summary lacks grid_error");
        };
        errors.push((e, m));
        times.push(t);
    }
    let med = median(errors.iter().map(|e| e.0).collect());
    let slowest = times.iter().copied().fold(0.0, f64::max);
    r.check(
        "6",
        med <= DESK_SOLVE_TOL && slowest <= DESK_SOLVE_SECONDS,
        format!(
            "500 Hz room, defaults, 10x10x10 grid: relative L2 vs modal oracle {} -> median {:.2}% (<= 15%); slowest seed {slowest:.0} s (<= 300 s)",
            errors.iter().map(|e| format!("{:.2}%", 100.0 * e.0)).collect::<Vec<_>>().join(" / "),
            100.0 * med
        ),
    );

    let seed0 = dir.join("desk_500_seed0");
    let expected = ["params.json", "loss.csv", "field.csv", "oracle.csv", "error.csv", "receivers.csv", "summary.toml", "config.toml", "resolved.toml"];
    let missing: Vec<&str> = expected.iter().copied().filter(|f| !seed0.join(f).exists()).collect();
    r.check(
        "6b",
        missing.is_empty() && errors[0].1 <= DESK_SOLVE_TOL,
        format!("solve artifact set complete (missing: {missing:?}); seed 0 max relative grid error {:.2}% (<= 15%)", 100.0 * errors[0].1),
    );

    // the coarser 2f table for reference
    let info = (|| -> Result<f64, String> {
        let (_, rows) = read_csv(&seed0.join("field.csv"))?;
        let xs: Vec<Vec3> = rows.iter().map(|r| [r[0], r[1], r[2]]).collect();
        let model: Vec<Complex64> = rows.iter().map(|r| Complex64::new(r[3], r[4])).collect();
        let phys = PhysicalConfig::lightly_absorbing(500.0).map_err(|e| e.to_string())?;
        let domain = ShoeboxDomain::louden_room();
        let t = ModeTable::new(&phys, &domain).map_err(|e| e.to_string())?;
        let trunc = t.green_many(&xs, &domain.source.unwrap()).map_err(|e| e.to_string())?;
        Ok(rel_l2(&model, &trunc))
    })();
    match info {
        Ok(e) => r.info("6", format!("seed 0 against the mode table cut at 2f instead: {:.2}%", 100.0 * e)),
        Err(e) => r.info("6", format!("2f comparison unavailable: {e}")),
    }
}

fn load_tf(p: &Path) -> Result<(TransferFunction, TransferFunction), String> {
    let (header, rows) = read_csv(p)?;
    if header != ["f_hz", "re", "im", "oracle_re", "oracle_im"] {
        return Err(format!("unexpected header {header:?}"));
    }
    let freqs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let model = rows.iter().map(|r| Complex64::new(r[1], r[2])).collect();
    let oracle = rows.iter().map(|r| Complex64::new(r[3], r[4])).collect();
    let rx = [0.7, 1.2, 1.5];
    Ok((
        TransferFunction::new(freqs.clone(), model, rx).map_err(|e| e.to_string())?,
        TransferFunction::new(freqs, oracle, rx).map_err(|e| e.to_string())?,
    ))
}

fn criterion_7(r: &mut Report, dir: &Path) -> Option<TransferFunction> {
    let cfg = dir.join("desk_sweep.toml");
    fs::write(
        &cfg,
        format!("receivers = [[0.7, 1.2, 1.5]]\n{ROOM}\n[sweep]\nstart = 100.0\nstop = 600.0\nstep = 10.0\n"),
    )
    .unwrap();
    let out = dir.join("desk_sweep");
    eprintln!("criterion 7: 51 trainings, progress follows");
    let start = Instant::now();
    let status = bin()
        .args(["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "0"])
        .status();
    let secs = start.elapsed().as_secs_f64();
    if !matches!(status, Ok(s) if s.success()) {
        r.error("7", format!("sweep exited with {status:?}"));
        return None;
    }
    let (model, oracle) = match load_tf(&out.join("tf_r0.csv")) {
        Ok(v) => v,
        Err(e) => {
            r.error("7", e);
            return None;
        }
    };
    let d = match band_deviation(&model, &oracle, SPL_WINDOW_DB) {
        Ok(d) => d,
        Err(e) => {
            r.error("7", e);
            return None;
        }
    };
    let n = d.included.iter().filter(|&&x| x).count();
    r.check(
        "7",
        d.max_spl_db <= SPL_TOL_DB && d.max_phase_rad <= PHASE_TOL_RAD && secs <= SWEEP_SECONDS,
        format!(
            "sweep 100-600 Hz step 10, receiver [0.7, 1.2, 1.5], {n}/{} points within 20 dB of max: SPL dev {:.2} dB (<= 1), phase dev {:.3} rad (<= 0.2), {:.0} s (<= 1800)",
            model.freqs.len(),
            d.max_spl_db,
            d.max_phase_rad,
            secs
        ),
    );
    let all = band_deviation(&model, &oracle, f64::INFINITY).ok();
    if let Some(a) = all {
        r.info("7", format!("over all 51 points: SPL dev {:.2} dB, phase dev {:.3} rad", a.max_spl_db, a.max_phase_rad));
    }
    let phys = PhysicalConfig::lightly_absorbing(100.0).unwrap();
    let domain = ShoeboxDomain::louden_room();
    let trunc: Result<Vec<Complex64>, _> = model
        .freqs
        .iter()
        .map(|&f| {
            ModeTable::new(&phys.with_frequency(f)?, &domain)?.green(&[0.7, 1.2, 1.5], &domain.source.unwrap())
        })
        .collect();
    if let Ok(v) = trunc {
        let t = TransferFunction::new(model.freqs.clone(), v, model.receiver).unwrap();
        if let Ok(d2) = band_deviation(&model, &t, SPL_WINDOW_DB) {
            r.info("7", format!("against the mode table cut at 2f instead: SPL dev {:.2} dB, phase dev {:.3} rad", d2.max_spl_db, d2.max_phase_rad));
        }
    }
    Some(model)
}

fn roundtrip_error(tf: &TransferFunction) -> Result<(f64, f64), String> {
    let ir = impulse_response(tf).map_err(|e| e.to_string())?;
    let back = forward_spectrum(&ir.h);
    let step = tf.step().unwrap_or(tf.freqs[0]);
    let last = back.len() - 1;
    let mut worst = 0.0f64;
    for (f, v) in tf.freqs.iter().zip(&tf.values) {
        let bin = (f / step).round() as usize;
        // DC and Nyquist bins of a real signal carry only the real part
        let want = if bin == 0 || bin == last { Complex64::new(v.re, 0.0) } else { *v };
        if want.norm() > 0.0 {
            worst = worst.max((back[bin] - want).norm() / want.norm());
        }
    }
    Ok((ir.imag_residue, worst))
}

fn criterion_8(r: &mut Report, swept: Option<&TransferFunction>) {
    let start = Instant::now();
    let freqs: Vec<f64> = (0..1181).map(|i| 100.0 + 5.0 * i as f64).collect();
    let mut rng = rng_stream(8, 0);
    let values = freqs
        .iter()
        .map(|_| Complex64::from_polar(rng.random_range(1e-3..1.0), rng.random_range(-PI..PI)))
        .collect();
    let tf = TransferFunction::new(freqs, values, [0.7, 1.2, 1.5]).unwrap();
    let ir = impulse_response(&tf).unwrap();
    let (imag, rt) = roundtrip_error(&tf).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let grid_ok = ir.h.len() == 2400 && ir.fs == 12_000.0 && (ir.duration() - 0.2).abs() < 1e-15;
    r.check(
        "8",
        grid_ok && imag < IR_REAL_TOL && rt < IR_ROUNDTRIP_TOL && secs < 1.0,
        format!(
            "paper grid (5 Hz to 6000 Hz): N={} fs={} Hz duration={} s; imaginary residue {imag:.1e} of peak (< 1e-10); roundtrip {rt:.1e} (< 1e-10); {secs:.3} s",
            ir.h.len(),
            ir.fs,
            ir.duration()
        ),
    );
    if let Some(tf) = swept {
        match roundtrip_error(tf) {
            Ok((imag, rt)) => r.check(
                "8b",
                imag < IR_REAL_TOL && rt < IR_ROUNDTRIP_TOL,
                format!("swept model transfer function: imaginary residue {imag:.1e}, roundtrip {rt:.1e}"),
            ),
            Err(e) => r.error("8b", e),
        }
    }
}

fn main() -> ExitCode {
    let dir = work_dir();
    println!("acceptance run, work directory {}", dir.display());
    let mut r = Report { lines: Vec::new() };
    criterion_1(&mut r, &dir);
    criterion_2(&mut r);
    criterion_3(&mut r);
    criterion_4(&mut r);
    criterion_5(&mut r);
    criterion_6(&mut r, &dir);
    let swept = criterion_7(&mut r, &dir);
    criterion_8(&mut r, swept.as_ref());
    println!("[{:<12}] 9   full-scale 6000 Hz room run and full-band sweep: not reproducible at desk scale", "n/a");

    let failed: Vec<&str> = r
        .lines
        .iter()
        .filter(|l| l.1 == Status::Fail)
        .map(|l| l.0.as_str())
        .collect();
    let unexpected: Vec<&str> = failed.iter().copied().filter(|id| !KNOWN_FAILURES.contains(id)).collect();
    let passed = r.lines.iter().filter(|l| l.1 == Status::Pass).count();
    println!(
        "\n{passed} passed, {} failed ({} known)",
        failed.len(),
        failed.len() - unexpected.len()
    );
    if unexpected.is_empty() {
        let _ = fs::remove_dir_all(&dir);
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}; outputs kept in {}", dir.display());
        ExitCode::FAILURE
    }
}
