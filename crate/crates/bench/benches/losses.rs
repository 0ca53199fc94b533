use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spcl_bench::{batch, prototypes};
use spcl_core::losses::{spcl_loss, supcon_loss, BatchView, LossConfig};
use spcl_core::PrototypeSet;

const CLASSES: usize = 7;
const DIM: usize = 32;

fn losses(c: &mut Criterion) {
    let cfg = LossConfig::default();
    let protos = prototypes(1, DIM, CLASSES);
    let mut group = c.benchmark_group("contrastive");
    for n in [4, 16, 64] {
        let (reps, labels) = batch(n as u64, n, DIM, CLASSES);
        let view = BatchView::new(&reps, &labels).unwrap();
        group.bench_with_input(BenchmarkId::new("supcon", n), &view, |b, v| {
            b.iter(|| supcon_loss(v, &cfg).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("spcl", n), &view, |b, v| {
            b.iter(|| spcl_loss(v, &protos, &cfg).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("spcl_no_prototypes", n), &view, |b, v| {
            b.iter(|| spcl_loss(v, &PrototypeSet::new(), &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, losses);
criterion_main!(benches);
