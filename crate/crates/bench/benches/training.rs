use criterion::{criterion_group, criterion_main, Criterion};
use policyloop_bench::{corpus, training_set};
use policyloop_core::{train_model, ModelKind, ModelSettings, Right};

fn training(c: &mut Criterion) {
    let docs = corpus(10, 30);
    let (_, set) = training_set(&docs, Right::Deletion);
    let anchor = Right::Deletion.anchor_text("de");
    let settings = ModelSettings::fast();
    let mut group = c.benchmark_group("train_fast");
    group.sample_size(10);
    for kind in ModelKind::ALL {
        group.bench_function(kind.to_string(), |b| {
            b.iter(|| train_model(kind, &set, &settings, &anchor, 5).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, training);
criterion_main!(benches);
