use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cewb::par::Exec;
use cewb::reductions::esetn_level_bitset;
use cewb::verify::{criterion_image_law, criterion_recovery, VerifyOptions};

const EXECS: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn fingerprints(c: &mut Criterion) {
    let tuples: Vec<Vec<u64>> = (0..24u64).flat_map(|a| (0..24u64).map(move |b| vec![a, b])).collect();
    let mut g = c.benchmark_group("esetn_fingerprints");
    for (name, exec) in EXECS {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| exec.map(tuples.clone(), |t| esetn_level_bitset(&t, 12)))
        });
    }
    g.finish();
}

fn suites(c: &mut Criterion) {
    let mut g = c.benchmark_group("verify_suites");
    g.sample_size(10);
    for (name, exec) in EXECS {
        let opts = VerifyOptions { exec, ..Default::default() };
        g.bench_with_input(BenchmarkId::new("recovery", name), &opts, |b, o| b.iter(|| criterion_recovery(o).unwrap()));
        g.bench_with_input(BenchmarkId::new("image_law", name), &opts, |b, o| b.iter(|| criterion_image_law(o).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, fingerprints, suites);
criterion_main!(benches);
