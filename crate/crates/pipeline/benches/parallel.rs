//! Data-parallel batch operations against their single-thread baselines.
//!
//! Each group runs the same public batch function twice: once through the
//! default (rayon-backed) path and once through the always-available
//! sequential reference, so the speedup — and the overhead floor on small
//! batches — is measured, not assumed.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use f3_core::detect::LabelRule;
use f3_core::exec;
use f3_core::prompt::Strategy;
use f3_core::purify::{semantic_distance, PairScorer};
use f3_gateway::RecordStatus;
use f3_pipeline::scorers::{FixtureScoreRule, FixtureScorer, FixtureScript};
use f3_pipeline::{parse_outputs, parse_raw, score_pairs, RawDetection};

fn detection_fixtures(n: usize) -> Vec<RawDetection> {
    (0..n)
        .map(|i| RawDetection {
            sample_id: format!("sample-{i}"),
            provider_id: "bench".to_string(),
            strategy: Strategy::VaN,
            status: RecordStatus::Ok,
            response_text: match i % 4 {
                0 => "True. The article cites verifiable officials and outlets.".to_string(),
                1 => "This is fake news; the quotes are fabricated and the dates clash.".to_string(),
                2 => "After weighing the claims step by step, the verdict is real. Confidence: 87".to_string(),
                _ => "The tone is sensational but the core facts check out as genuine; real.".to_string(),
            },
            error: None,
        })
        .collect()
}

fn bench_parse_outputs(c: &mut Criterion) {
    let mut group = c.benchmark_group("parse_outputs");
    for n in [256usize, 4096] {
        let raws = detection_fixtures(n);
        group.bench_with_input(BenchmarkId::new("parallel", n), &raws, |b, raws| {
            b.iter(|| black_box(parse_outputs(raws, LabelRule::FirstToken)));
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &raws, |b, raws| {
            b.iter(|| {
                black_box(exec::map_sequential(raws, |raw| parse_raw(raw, LabelRule::FirstToken)))
            });
        });
    }
    group.finish();
}

fn score_fixtures(n: usize) -> (FixtureScorer, Vec<(String, String)>) {
    let rules = (0..32)
        .map(|i| FixtureScoreRule {
            when_contains: vec![format!("marker-{i} ")],
            score: (i as f64) / 32.0,
        })
        .collect();
    let scorer = FixtureScorer::new(FixtureScript { rules, default_score: Some(0.5) });
    let pairs = (0..n)
        .map(|i| {
            (
                format!("source article {i} with plenty of shared context to scan"),
                format!("rewritten article {i} marker-{} with plenty of shared context", i % 48),
            )
        })
        .collect();
    (scorer, pairs)
}

fn bench_score_pairs(c: &mut Criterion) {
    let mut group = c.benchmark_group("score_pairs");
    for n in [256usize, 4096] {
        let (scorer, pairs) = score_fixtures(n);
        group.bench_with_input(BenchmarkId::new("parallel", n), &pairs, |b, pairs| {
            b.iter(|| black_box(score_pairs(&scorer, pairs)));
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &pairs, |b, pairs| {
            b.iter(|| {
                black_box(exec::map_sequential(pairs, |(source, generated)| {
                    scorer.score(source, generated)
                }))
            });
        });
    }
    group.finish();
}

fn embedding_fixtures(n: usize, dim: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..n)
        .map(|i| {
            let a: Vec<f64> = (0..dim).map(|j| ((i * dim + j) % 97) as f64 + 1.0).collect();
            let b: Vec<f64> = (0..dim).map(|j| ((i * dim + j) % 89) as f64 + 1.0).collect();
            (a, b)
        })
        .collect()
}

fn bench_semantic_distances(c: &mut Criterion) {
    let mut group = c.benchmark_group("semantic_distance_batch");
    let pairs = embedding_fixtures(1024, 384);
    group.bench_with_input(BenchmarkId::new("parallel", pairs.len()), &pairs, |b, pairs| {
        b.iter(|| {
            black_box(exec::map_ordered(pairs, |(a, v)| semantic_distance(a, v).unwrap()))
        });
    });
    group.bench_with_input(BenchmarkId::new("sequential", pairs.len()), &pairs, |b, pairs| {
        b.iter(|| {
            black_box(exec::map_sequential(pairs, |(a, v)| semantic_distance(a, v).unwrap()))
        });
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_parse_outputs,
    bench_score_pairs,
    bench_semantic_distances
);
criterion_main!(benches);
