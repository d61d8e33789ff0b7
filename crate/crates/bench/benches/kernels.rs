use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use hergnet::model::total_field_with;
use hergnet::oracle::{axis_modes, converged_green, ModeTable};
use hergnet::spectral::{impulse_response, TransferFunction};
use hergnet::special::hankel1_01;
use hergnet::training::{adam_step, evaluate};
use hergnet::{AdamState, Complex64, TrainConfig};
use hergnet_bench::room_problem;

fn training(c: &mut Criterion) {
    let p = room_problem(500.0, 0);
    let mut g = c.benchmark_group("training_500hz");
    g.sample_size(20);
    g.bench_function("loss", |b| {
        b.iter(|| evaluate(black_box(&p.params), &p.data, &p.phys, false).unwrap())
    });
    g.bench_function("loss_and_gradient", |b| {
        b.iter(|| evaluate(black_box(&p.params), &p.data, &p.phys, true).unwrap())
    });
    let (_, grad) = evaluate(&p.params, &p.data, &p.phys, true).unwrap();
    let grad = grad.unwrap();
    let cfg = TrainConfig::default();
    g.bench_function("adam_step", |b| {
        b.iter_batched(
            || (p.params.to_flat(), AdamState::new(grad.len())),
            |(mut flat, mut state)| adam_step(&mut flat, &grad, &mut state, &cfg).unwrap(),
            BatchSize::SmallInput,
        )
    });
    let grid = p.domain.cell_centres(&[10, 10, 10]).unwrap();
    let waves = p.params.plane_waves(p.phys.k);
    g.bench_function("field_on_1000_points", |b| {
        b.iter(|| {
            grid.iter()
                .map(|x| total_field_with(&waves, x, &p.phys, &p.domain).unwrap().p)
                .sum::<Complex64>()
        })
    });
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let p = room_problem(500.0, 0);
    let x0 = p.domain.source.unwrap();
    let grid = p.domain.cell_centres(&[10, 10, 10]).unwrap();
    let mut g = c.benchmark_group("oracle_500hz");
    g.sample_size(10);
    g.bench_function("mode_table", |b| b.iter(|| ModeTable::new(&p.phys, &p.domain).unwrap()));
    let table = ModeTable::new(&p.phys, &p.domain).unwrap();
    g.bench_function("truncated_green_1000_points", |b| {
        b.iter(|| table.green_many(black_box(&grid), &x0).unwrap())
    });
    g.bench_function("converged_green_1_point", |b| {
        b.iter(|| converged_green(black_box(&[[0.7, 1.2, 1.5]]), &x0, &p.phys, &p.domain, 1e-10).unwrap())
    });
    g.bench_function("axis_modes_6000hz_l1.9", |b| {
        let hi = p.phys.with_frequency(6000.0).unwrap();
        b.iter(|| axis_modes(1.9, hi.k, hi.beta, 133).unwrap())
    });
    g.finish();
}

fn special(c: &mut Criterion) {
    let xs: Vec<f64> = (1..=1000).map(|i| i as f64 * 0.03).collect();
    c.bench_function("hankel1_01_x1000", |b| {
        b.iter(|| xs.iter().map(|&x| hankel1_01(black_box(x)).0).sum::<Complex64>())
    });
}

fn spectral(c: &mut Criterion) {
    let freqs: Vec<f64> = (0..1181).map(|i| 100.0 + 5.0 * i as f64).collect();
    let values = freqs.iter().map(|f| Complex64::from_polar(1.0, -f * 0.01)).collect();
    let tf = TransferFunction::new(freqs, values, [0.7, 1.2, 1.5]).unwrap();
    c.bench_function("impulse_response_full_band", |b| b.iter(|| impulse_response(black_box(&tf)).unwrap()));
}

criterion_group!(benches, training, oracle, special, spectral);
criterion_main!(benches);
