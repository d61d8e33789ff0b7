use super::*;
use approx::assert_relative_eq;
use rand::Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn grid(start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start + step * i as f64).collect()
}

#[test]
fn spl_reference_points() {
    assert_eq!(spl(c(P_REF, 0.0), P_REF), 0.0);
    assert_relative_eq!(spl(c(0.0, 2.0), P_REF), 100.0, epsilon = 1e-12);
    assert_relative_eq!(spl(c(3.0, 4.0), 5.0), 0.0, epsilon = 1e-15);
    assert_eq!(spl(c(0.0, 0.0), P_REF), f64::NEG_INFINITY);
}

#[test]
fn unwrap_recovers_a_linear_phase_over_many_turns() {
    let tau = 0.0137;
    let freqs = grid(0.0, 5.0, 400);
    let values: Vec<Complex64> = freqs
        .iter()
        .map(|f| Complex64::from_polar(1.0, -2.0 * PI * f * tau))
        .collect();
    let phase = unwrap_phase(&values);
    for (f, ph) in freqs.iter().zip(&phase) {
        assert_relative_eq!(*ph, -2.0 * PI * f * tau, epsilon = 1e-9);
    }
}

#[test]
fn unwrap_steps_stay_in_half_open_interval() {
    let mut rng = rng_stream(3, 0);
    let values: Vec<Complex64> = (0..2000)
        .map(|_| Complex64::from_polar(1.0, rng.random_range(-PI..PI)))
        .collect();
    let phase = unwrap_phase(&values);
    for (w, v) in phase.windows(2).zip(values.windows(2)) {
        let d = w[1] - w[0];
        assert!(d > -PI - 1e-12 && d <= PI + 1e-12, "step {d}");
        // same point on the circle as the wrapped argument
        let turns = (w[1] - v[1].arg()) / (2.0 * PI);
        assert!((turns - turns.round()).abs() < 1e-12);
    }
    assert!(unwrap_phase(&[]).is_empty());
}

#[test]
fn uniform_grid_checks() {
    assert!(check_uniform(&grid(100.0, 10.0, 51)).is_ok());
    assert!(check_uniform(&[42.0]).is_ok());
    assert!(check_uniform(&[]).is_err());
    assert!(check_uniform(&[1.0, 2.0, 3.5]).is_err());
    assert!(check_uniform(&[3.0, 2.0, 1.0]).is_err());
    assert!(check_uniform(&[1.0, f64::NAN]).is_err());
    let tf = TransferFunction::new(vec![1.0, 2.0], vec![c(1.0, 0.0)], [0.0; 3]);
    assert!(matches!(tf, Err(Error::DimensionMismatch { .. })));
}

#[test]
fn delayed_impulse_is_a_shifted_delta() {
    // full band 0..=f_max, delay of an integer number of samples
    let (step, half) = (10.0, 32);
    let n = 2 * half;
    let fs = n as f64 * step;
    let delay = 7;
    let freqs = grid(0.0, step, half + 1);
    let values = freqs
        .iter()
        .map(|f| Complex64::from_polar(1.0, -2.0 * PI * f * delay as f64 / fs))
        .collect();
    let tf = TransferFunction::new(freqs, values, [0.0; 3]).unwrap();
    let ir = impulse_response(&tf).unwrap();
    assert_eq!(ir.h.len(), n);
    assert_relative_eq!(ir.fs, fs);
    assert_relative_eq!(ir.duration(), 1.0 / step, epsilon = 1e-15);
    assert_relative_eq!(ir.t[1], 1.0 / fs);
    for (i, h) in ir.h.iter().enumerate() {
        let want = if i == delay { 1.0 } else { 0.0 };
        assert!((h - want).abs() < 1e-13, "h[{i}] = {h}");
    }
    assert!(ir.imag_residue < 1e-13);
}

#[test]
fn forward_transform_inverts_the_impulse_response() {
    let mut rng = rng_stream(5, 0);
    let n = 120;
    let step = 2.5;
    let h: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let spec = forward_spectrum(&h);
    assert_eq!(spec.len(), n / 2 + 1);
    let tf = TransferFunction::new(grid(0.0, step, spec.len()), spec, [0.0; 3]).unwrap();
    let ir = impulse_response(&tf).unwrap();
    for (a, b) in ir.h.iter().zip(&h) {
        assert!((a - b).abs() < 1e-13);
    }
    assert!(ir.imag_residue < 1e-13);
}

#[test]
fn missing_low_band_is_zero_filled() {
    let freqs = grid(100.0, 10.0, 51);
    let mut rng = rng_stream(6, 0);
    let values: Vec<Complex64> = freqs
        .iter()
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let tf = TransferFunction::new(freqs, values.clone(), [0.0; 3]).unwrap();
    let ir = impulse_response(&tf).unwrap();
    assert_eq!(ir.h.len(), 120);
    assert_relative_eq!(ir.fs, 1200.0);
    let back = forward_spectrum(&ir.h);
    assert_eq!(back.len(), 61);
    for b in &back[..10] {
        assert!(b.norm() < 1e-12);
    }
    for (b, v) in back[10..60].iter().zip(&values) {
        assert!((b - v).norm() < 1e-12);
    }
    // the Nyquist bin keeps only its real part
    assert!((back[60] - c(values[50].re, 0.0)).norm() < 1e-12);
    assert!(ir.imag_residue < 1e-12);
}

#[test]
fn misaligned_grid_is_rejected() {
    let tf = TransferFunction::new(grid(105.0, 10.0, 5), vec![c(1.0, 0.0); 5], [0.0; 3]).unwrap();
    assert!(matches!(impulse_response(&tf), Err(Error::NonUniformGrid(_))));
}

#[test]
fn metrics_on_known_vectors() {
    let b = [c(3.0, 4.0), c(0.0, 0.0), c(0.0, -1.0)];
    let a = [c(3.0, 4.0), c(0.0, 1.0), c(0.0, 1.0)];
    let m = error_metrics(&a, &b).unwrap();
    assert_eq!(m.pointwise, vec![0.0, 1.0, 2.0]);
    assert_relative_eq!(m.max_abs, 2.0);
    assert_relative_eq!(m.max_rel, 0.4);
    assert_relative_eq!(m.rel_l2, (5.0f64 / 26.0).sqrt(), epsilon = 1e-15);
    assert!(m.to_toml().contains("points = 3"));
    assert!(matches!(error_metrics(&a, &[c(0.0, 0.0); 3]), Err(Error::ZeroReference)));
    assert!(matches!(error_metrics(&a[..2], &b), Err(Error::DimensionMismatch { .. })));
    assert_eq!(error_metrics(&b, &b).unwrap().rel_l2, 0.0);
}

#[test]
fn ir_error_is_peak_normalised() {
    let mk = |h: Vec<f64>| ImpulseResponse {
        t: (0..h.len()).map(|i| i as f64).collect(),
        h,
        fs: 1.0,
        imag_residue: 0.0,
    };
    let e = ir_error(&mk(vec![0.0, 1.0, -2.0]), &mk(vec![0.0, 0.5, -4.0])).unwrap();
    assert_eq!(e, vec![0.0, 0.125, 0.5]);
    assert!(matches!(ir_error(&mk(vec![1.0]), &mk(vec![0.0])), Err(Error::ZeroReference)));
    assert!(ir_error(&mk(vec![1.0]), &mk(vec![1.0, 2.0])).is_err());
}

#[test]
fn csv_columns() {
    let tf = TransferFunction::new(vec![100.0, 110.0], vec![c(1.0, -2.0), c(0.5, 0.25)], [0.1, 0.2, 0.3]).unwrap();
    let csv = tf.to_csv(Some(&tf)).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "f_hz,re,im,oracle_re,oracle_im");
    assert_eq!(lines.len(), 3);
    let row: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row, vec![100.0, 1.0, -2.0, 1.0, -2.0]);
    assert_eq!(tf.to_csv(None).unwrap().lines().next(), Some("f_hz,re,im"));
    let other = TransferFunction::new(vec![100.0], vec![c(1.0, 0.0)], [0.0; 3]).unwrap();
    assert!(tf.to_csv(Some(&other)).is_err());
}

#[test]
fn frequency_seeds_are_stable_and_distinct() {
    let a: Vec<u64> = (0..50).map(|i| frequency_seed(7, i)).collect();
    let b: Vec<u64> = (0..50).map(|i| frequency_seed(7, i)).collect();
    assert_eq!(a, b);
    let mut sorted = a.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), a.len());
    assert_ne!(frequency_seed(8, 0), a[0]);
}

fn small_setup() -> (TrainConfig, PhysicalConfig, ShoeboxDomain) {
    let cfg = TrainConfig {
        epochs: 3,
        n_train: Some(200),
        n_quad: Some(40),
        seed: 11,
        ..TrainConfig::default()
    };
    let phys = PhysicalConfig::lightly_absorbing(100.0).unwrap();
    let domain = ShoeboxDomain::new(&[1.0, 1.4], Some(&[0.3, 0.4])).unwrap();
    (cfg, phys, domain)
}

#[test]
fn sweep_is_deterministic_and_reports_every_frequency() {
    let (cfg, phys, domain) = small_setup();
    let freqs = grid(100.0, 10.0, 3);
    let rx = [0.6, 0.9, 0.0];
    let rx2 = [0.1, 1.2, 0.0];
    let run = || {
        let mut seen = Vec::new();
        let r = sweep(
            &cfg,
            &phys,
            &domain,
            &freqs,
            &[rx, rx2],
            Some(OracleKind::Truncated { factor: 2.0 }),
            &mut |p, v| seen.push((p.f, v.to_vec())),
        )
        .unwrap();
        (r, seen)
    };
    let (a, seen) = run();
    let (b, _) = run();
    assert_eq!(seen.len(), 3);
    assert_eq!(a.model, b.model);
    assert_eq!(a.failures().count(), 0);
    assert_eq!(a.model.len(), 2);
    assert!(a.model.iter().all(|tf| tf.values.iter().all(|v| v.is_finite())));
    assert_eq!(a.model[1].receiver, rx2);
    assert_eq!(seen[2].1, vec![a.model[0].values[2], a.model[1].values[2]]);
    let oracle = &a.oracle.as_ref().unwrap()[0];
    let direct = ModeTable::new(&phys.with_frequency(110.0).unwrap(), &domain)
        .unwrap()
        .green(&rx, &domain.source.unwrap())
        .unwrap();
    assert_eq!(oracle.values[1], direct);
    let seeds: Vec<u64> = a.points.iter().map(|p| p.seed).collect();
    assert_eq!(seeds, (0..3).map(|i| frequency_seed(11, i)).collect::<Vec<_>>());
}

#[test]
fn sweep_records_failures_and_continues() {
    let (mut cfg, phys, domain) = small_setup();
    cfg.epochs = 0;
    let r = sweep(&cfg, &phys, &domain, &grid(100.0, 10.0, 2), &[[0.6, 0.9, 0.0]], None, &mut |_, _| {}).unwrap();
    assert_eq!(r.failures().count(), 2);
    assert!(r.model[0].values.iter().all(|v| v.re.is_nan()));
    assert!(r.oracle.is_none());
}

#[test]
fn sweep_rejects_bad_inputs() {
    let (cfg, phys, domain) = small_setup();
    let none = &mut |_: &SweepPoint, _: &[Complex64]| {};
    assert!(sweep(&cfg, &phys, &domain, &[100.0, 90.0], &[[0.6, 0.9, 0.0]], None, none).is_err());
    assert!(sweep(&cfg, &phys, &domain, &[100.0], &[[1.6, 0.9, 0.0]], None, none).is_err());
    assert!(sweep(&cfg, &phys, &domain, &[100.0], &[], None, none).is_err());
}

#[test]
fn spl_scaling_law() {
    let p = c(0.3, -0.7);
    assert_relative_eq!(spl(p * 10.0, P_REF) - spl(p, P_REF), 20.0, epsilon = 1e-12);
    assert_relative_eq!(spl(c(1.0, 0.0), P_REF), 93.979_400_086_720_38, epsilon = 1e-12);
}

#[test]
fn unwrap_small_steps_and_a_single_wrap() {
    let slow: Vec<Complex64> = (0..20).map(|n| Complex64::cis(0.1 * n as f64)).collect();
    for (n, ph) in unwrap_phase(&slow).iter().enumerate() {
        assert_relative_eq!(*ph, 0.1 * n as f64, epsilon = 1e-14);
    }
    assert_eq!(unwrap_phase(&[c(-1.0, 1.0); 4]), vec![0.75 * PI; 4]);
    // crosses -π → π once going downwards
    let raw = [-2.9, -3.1, 3.1, 2.9];
    let values: Vec<Complex64> = raw.iter().map(|&a| Complex64::cis(a)).collect();
    let ph = unwrap_phase(&values);
    assert_relative_eq!(ph[3], 2.9 - 2.0 * PI, epsilon = 1e-12);
    assert!(ph.windows(2).all(|w| (w[1] - w[0]).abs() < 0.25));
}

#[test]
fn zero_spectrum_gives_zero_response() {
    let tf = TransferFunction::new(grid(100.0, 10.0, 11), vec![c(0.0, 0.0); 11], [0.0; 3]).unwrap();
    let ir = impulse_response(&tf).unwrap();
    assert!(ir.h.iter().all(|&h| h == 0.0));
    assert_eq!(ir.imag_residue, 0.0);
}

#[test]
fn paper_grid_duration() {
    let freqs = grid(100.0, 5.0, 1181);
    assert_eq!(*freqs.last().unwrap(), 6000.0);
    let tf = TransferFunction::new(freqs, vec![c(1.0, 0.5); 1181], [0.0; 3]).unwrap();
    let ir = impulse_response(&tf).unwrap();
    assert_eq!(ir.h.len(), 2400);
    assert_eq!(ir.fs, 12_000.0);
    assert_relative_eq!(ir.duration(), 0.2, epsilon = 1e-15);
}

#[test]
fn single_frequency_sweep_grid() {
    let tf = TransferFunction::new(vec![50.0], vec![c(1.0, 0.0)], [0.0; 3]).unwrap();
    assert_eq!(tf.step(), None);
    let ir = impulse_response(&tf).unwrap();
    assert_eq!(ir.h.len(), 2);
    assert_eq!(ir.fs, 100.0);
}

#[test]
fn scaled_copy_has_known_relative_error() {
    let b: Vec<Complex64> = (0..17).map(|i| c(i as f64 - 3.0, 0.5 * i as f64)).collect();
    let a: Vec<Complex64> = b.iter().map(|v| v * 1.1).collect();
    let m = error_metrics(&a, &b).unwrap();
    assert_relative_eq!(m.rel_l2, 0.1, epsilon = 1e-14);
    assert_relative_eq!(m.max_rel, 0.1, epsilon = 1e-14);
}

#[test]
fn oracle_failures_are_recorded_per_frequency() {
    let (cfg, phys, _) = small_setup();
    let no_source = ShoeboxDomain::new(&[1.0, 1.4], None).unwrap();
    let r = sweep(
        &cfg,
        &phys,
        &no_source,
        &[100.0],
        &[[0.6, 0.9, 0.0]],
        Some(OracleKind::Converged { tol: 1e-8 }),
        &mut |_, _| {},
    )
    .unwrap();
    assert!(r.points[0].outcome.is_ok());
    assert!(r.points[0].oracle_error.is_some());
    assert!(r.oracle.unwrap()[0].values[0].re.is_nan());
}

fn tf_from(values: Vec<Complex64>) -> TransferFunction {
    let n = values.len();
    TransferFunction::new(grid(100.0, 10.0, n), values, [0.0; 3]).unwrap()
}

#[test]
fn band_deviation_window_and_offsets() {
    // reference: loud peak, a deep dip, then a rotating phase over several turns
    let b: Vec<Complex64> = (0..40)
        .map(|i| {
            let mag = if i == 10 { 1e-4 } else { 1.0 + 0.5 * (i as f64 * 0.3).sin() };
            Complex64::from_polar(mag, 0.7 * i as f64 - 3.0)
        })
        .collect();
    // model: +0.5 dB everywhere, 0.1 rad phase lag, and rubbish at the dip
    let gain = 10f64.powf(0.5 / 20.0);
    let mut a: Vec<Complex64> = b.iter().map(|v| v * Complex64::from_polar(gain, -0.1)).collect();
    a[10] = c(1e-2, 0.0);
    let d = band_deviation(&tf_from(a.clone()), &tf_from(b.clone()), 20.0).unwrap();
    assert!(!d.included[10]);
    assert_eq!(d.included.iter().filter(|&&x| x).count(), 39);
    assert_relative_eq!(d.max_spl_db, 0.5, epsilon = 1e-9);
    assert!(d.max_phase_rad < 0.1 + 1e-9 && d.max_phase_rad > 0.1 - 1e-9, "{}", d.max_phase_rad);
    // a whole-turn offset in the raw arguments does not count
    let d2 = band_deviation(&tf_from(a.iter().map(|v| -v).collect()), &tf_from(b.iter().map(|v| -v).collect()), 20.0).unwrap();
    assert_relative_eq!(d2.max_phase_rad, d.max_phase_rad, epsilon = 1e-9);
    // failed points poison the result
    a[3] = c(f64::NAN, f64::NAN);
    assert!(band_deviation(&tf_from(a), &tf_from(b.clone()), 20.0).unwrap().max_spl_db.is_nan());
    assert!(matches!(band_deviation(&tf_from(vec![c(1.0, 0.0)]), &tf_from(vec![c(0.0, 0.0)]), 20.0), Err(Error::ZeroReference)));
}
