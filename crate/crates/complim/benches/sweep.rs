use criterion::{criterion_group, criterion_main, Criterion};

use complim::exec::Execution;
use complim::limit_lab::{sweep_alpha_with, ExperimentKind, SweepConfig};
use complim::presets::{Datum, Preset, ProblemData};

fn small_sweep() -> SweepConfig {
    let data = ProblemData {
        u0: Datum::preset(Preset::MixedU0),
        ..ProblemData::default()
    };
    let mut c = SweepConfig::new(ExperimentKind::Weak, data);
    c.n_u = 5;
    c.n_p = 5;
    c.dt = Some(2e-3);
    c.alphas = vec![1e-1, 3e-2, 1e-2, 3e-3];
    c
}

fn bench(c: &mut Criterion) {
    let cfg = small_sweep();
    let mut g = c.benchmark_group("alpha_sweep");
    g.sample_size(10);
    g.bench_function("sequential", |b| b.iter(|| sweep_alpha_with(&cfg, Execution::Sequential).unwrap()));
    g.bench_function("parallel", |b| b.iter(|| sweep_alpha_with(&cfg, Execution::Threads(cfg.alphas.len())).unwrap()));
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
