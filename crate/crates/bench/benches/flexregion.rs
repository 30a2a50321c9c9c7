use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use flexregion::ffor::{sweep, sweep_multi, DEFAULT_TOL_REL_AREA};
use flexregion::geometry::convex_hull;
use flexregion::identification::{identify, MeasurementSeries, HP_FULL_POWER_TEMP, HP_ZERO_POWER_TEMP};
use flexregion::powerflow::{build_jacobian, LinearModel};
use flexregion::synthetic;
use flexregion::{Bus, Line, Network};

/// Radial chain of `n` buses below the slack bus.
fn chain(n: usize) -> Network {
    let mut buses = vec![Bus::slack("b0")];
    let mut lines = Vec::new();
    for k in 1..n {
        buses.push(Bus::load(format!("b{k}")));
        lines.push(Line::new(format!("b{}", k - 1), format!("b{k}"), 1.0, -8.0, 0.01, 5.0));
    }
    Network::new(1.0, 20.0, buses, lines).expect("chain is valid")
}

fn linear_model(c: &mut Criterion) {
    let mut group = c.benchmark_group("linear_model");
    for n in [10, 50, 200] {
        let net = chain(n);
        group.bench_with_input(BenchmarkId::new("jacobian", n), &net, |b, net| {
            b.iter(|| build_jacobian(black_box(net)))
        });
        group.bench_with_input(BenchmarkId::new("factorize", n), &net, |b, net| {
            b.iter(|| LinearModel::new(black_box(net)))
        });
    }
    group.finish();
}

fn sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(20);
    let toy = synthetic::toy2f();
    group.bench_function("toy2f_single", |b| b.iter(|| sweep(black_box(&toy), 0, DEFAULT_TOL_REL_AREA).unwrap()));
    let three = synthetic::three_bus_two_device();
    group.bench_function("three_bus_single", |b| b.iter(|| sweep(black_box(&three), 0, DEFAULT_TOL_REL_AREA).unwrap()));
    for d in [1, 4, 8] {
        group.bench_with_input(BenchmarkId::new("toy2f_multi", d), &d, |b, &d| {
            b.iter(|| sweep_multi(black_box(&toy), 0, d, DEFAULT_TOL_REL_AREA).unwrap())
        });
    }
    let feeder = synthetic::two_feeder(2.0);
    group.bench_function("two_feeder_d8", |b| {
        b.iter(|| sweep_multi(black_box(&feeder), 0, synthetic::TWO_FEEDER_DURATION, DEFAULT_TOL_REL_AREA).unwrap())
    });
    group.finish();
}

fn geometry(c: &mut Criterion) {
    let points: Vec<(f64, f64)> = (0..10_000)
        .map(|k| {
            let a = k as f64 * 0.618_033_988_75;
            let r = (k % 97) as f64 / 97.0;
            (r * a.cos(), r * a.sin())
        })
        .collect();
    c.bench_function("convex_hull_10k", |b| b.iter(|| convex_hull(black_box(&points))));
}

fn identification(c: &mut Criterion) {
    let data = synthetic::identification_dataset(&synthetic::default_identification_nodes(), 60, 0.02, 42);
    let series = MeasurementSeries::from_records(&data.measurements, &data.weather).unwrap();
    let total = data.total_pv_mw();
    let mut group = c.benchmark_group("identification");
    group.sample_size(10);
    group.bench_function("identify_60_days", |b| {
        b.iter(|| identify(black_box(&series), total, HP_FULL_POWER_TEMP, HP_ZERO_POWER_TEMP).unwrap())
    });
    group.finish();
}

criterion_group!(benches, linear_model, sweeps, geometry, identification);
criterion_main!(benches);
