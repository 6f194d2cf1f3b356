use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use memkeeper::metrics::{bleu_n, distinct_n};
use memkeeper::retrieval::{retrieve_top_k, HashedNgramEmbedder};
use memkeeper::{update_memory, LexicalHeuristic};
use memkeeper_bench::{context, memory, summary, utterances};

fn bench_update(c: &mut Criterion) {
    let classifier = LexicalHeuristic::default();
    let mut g = c.benchmark_group("update_memory");
    for n in [10, 50] {
        let (m, s) = (memory(n), summary(n));
        g.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{n}")), &n, |b, _| {
            b.iter(|| update_memory(black_box(&m), black_box(&s), &classifier).unwrap())
        });
    }
    g.finish();
}

fn bench_retrieve(c: &mut Criterion) {
    let embedder = HashedNgramEmbedder::default();
    let ctx = context(6);
    let mut g = c.benchmark_group("retrieve_top_k");
    for n in [20, 200] {
        let m = memory(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| retrieve_top_k(black_box(&ctx), black_box(&m), &embedder, 5).unwrap())
        });
    }
    g.finish();
}

fn bench_text_metrics(c: &mut Criterion) {
    let cand = utterances(500);
    let refs: Vec<String> = cand.iter().rev().cloned().collect();
    c.bench_function("bleu2_500", |b| b.iter(|| bleu_n(black_box(&cand), black_box(&refs), 2).unwrap()));
    c.bench_function("distinct2_500", |b| b.iter(|| distinct_n(black_box(&cand), 2).unwrap()));
}

criterion_group!(benches, bench_update, bench_retrieve, bench_text_metrics);
criterion_main!(benches);
