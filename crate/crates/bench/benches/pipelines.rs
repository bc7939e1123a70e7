use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use sketchspec_bench::{exact_rank, power_law};
use sketchspec_core::amm::{amm_error_against, AmmBaseline};
use sketchspec_core::linalg::svd_default;
use sketchspec_core::lowrank::lowrank_sign;
use sketchspec_core::sketch::{apply_sketch, leverage_distribution_default, SketchOp};

fn bench_sketch_apply(c: &mut Criterion) {
    let a = power_law(2048, 64, 42);
    let dist = leverage_distribution_default(&a).expect("distribution");
    let t = 128;
    let mut group = c.benchmark_group("sketch_apply_2048x64_t128");
    group.bench_function("sign", |bench| {
        let mut seed = 0u64;
        bench.iter(|| {
            seed = seed.wrapping_add(1);
            let op = SketchOp::sign(t, a.rows(), seed);
            black_box(apply_sketch(&op, &a).expect("apply"))
        })
    });
    group.bench_function("gaussian", |bench| {
        let mut seed = 0u64;
        bench.iter(|| {
            seed = seed.wrapping_add(1);
            let op = SketchOp::gaussian(t, a.rows(), seed);
            black_box(apply_sketch(&op, &a).expect("apply"))
        })
    });
    group.bench_function("row_sample", |bench| {
        let mut seed = 0u64;
        bench.iter(|| {
            seed = seed.wrapping_add(1);
            let op = SketchOp::row_sample(t, seed, &dist);
            black_box(apply_sketch(&op, &a).expect("apply"))
        })
    });
    group.finish();
}

fn bench_svd(c: &mut Criterion) {
    let mut group = c.benchmark_group("svd_power_law");
    for &(rows, cols) in &[(128usize, 32usize), (256, 64)] {
        let a = power_law(rows, cols, 7);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{rows}x{cols}")),
            &a,
            |bench, a| bench.iter(|| black_box(svd_default(a).expect("svd"))),
        );
    }
    group.finish();
}

fn bench_amm_trial(c: &mut Criterion) {
    let a = exact_rank(1024, 40, 5, 101);
    let b = exact_rank(1024, 40, 5, 102);
    let baseline = AmmBaseline::new(&a, &b).expect("baseline");
    let t = 370;
    c.bench_function("amm_trial_1024x40_t370", |bench| {
        let mut seed = 0u64;
        bench.iter(|| {
            seed = seed.wrapping_add(1);
            let op = SketchOp::sign(t, a.rows(), seed);
            let atil = apply_sketch(&op, &a).expect("apply");
            let btil = apply_sketch(&op, &b).expect("apply");
            black_box(amm_error_against(&baseline, &atil, &btil, 0.25).expect("error"))
        })
    });
}

fn bench_lowrank(c: &mut Criterion) {
    let a = power_law(320, 40, 33);
    c.bench_function("lowrank_sign_320x40_k10_t250", |bench| {
        let mut seed = 0u64;
        bench.iter(|| {
            seed = seed.wrapping_add(1);
            black_box(lowrank_sign(&a, 10, 250, seed).expect("run"))
        })
    });
}

criterion_group!(
    benches,
    bench_sketch_apply,
    bench_svd,
    bench_amm_trial,
    bench_lowrank
);
criterion_main!(benches);
