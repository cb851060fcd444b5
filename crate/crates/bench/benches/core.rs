use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use toolgraph_bench::{entity_graph, prose, Lcg};
use toolgraph_core::evalkit::{bleu, rouge_l};
use toolgraph_core::ingest::{chunk_text, HashingEmbedder};
use toolgraph_core::retrieval::{assemble_context, retrieve};
use toolgraph_core::NodeKind;

const DIM: usize = 64;

fn knn(c: &mut Criterion) {
    let mut group = c.benchmark_group("knn");
    for n in [100, 1000, 10_000] {
        let g = entity_graph(n, DIM, 1);
        let q = Lcg::new(9).vector(DIM);
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| {
            b.iter(|| g.knn(black_box(&q), 5, Some(NodeKind::Entity)).unwrap())
        });
    }
    group.finish();
}

fn retrieval(c: &mut Criterion) {
    let g = entity_graph(1000, DIM, 2);
    let embedder = HashingEmbedder::new(DIM);
    c.bench_function("retrieve_and_assemble/1000", |b| {
        b.iter(|| {
            let ctx = retrieve(&g, black_box("ideal gas pressure"), 5, &embedder).unwrap();
            assemble_context(&ctx, 256)
        })
    });
}

fn chunking(c: &mut Criterion) {
    let text = prose(20_000);
    c.bench_function("chunk_text/20k_tokens", |b| b.iter(|| chunk_text("d", black_box(&text), 256, 192).unwrap()));
}

fn metrics(c: &mut Criterion) {
    let a = prose(200);
    let r = prose(180);
    c.bench_function("bleu4/200_tokens", |b| b.iter(|| bleu(black_box(&a), black_box(&r), 4)));
    c.bench_function("rouge_l/200_tokens", |b| b.iter(|| rouge_l(black_box(&a), black_box(&r), 1.0)));
}

criterion_group!(benches, knn, retrieval, chunking, metrics);
criterion_main!(benches);
