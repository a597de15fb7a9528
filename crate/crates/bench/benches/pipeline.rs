use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cqa_core::evaluation::{tie_aware_from_groups, TmrrMode};
use cqa_core::pipeline::{analyze_question, rank_analysis, Dataset, PipelineConfig, Resources};
use cqa_core::scoring::{aggregate, Aggregation, AvgMaxDenominator, EvidenceSentence, EvidenceSet};

// cheap deterministic stream so the inputs do not depend on an RNG crate
fn lcg(state: &mut u64) -> u64 {
    *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    *state >> 33
}

fn tie_metrics(c: &mut Criterion) {
    let mut state = 1;
    let runs: Vec<Vec<(usize, usize)>> = (0..1000)
        .map(|_| {
            (0..5)
                .map(|_| {
                    let n = 1 + (lcg(&mut state) % 25) as usize;
                    (n, (lcg(&mut state) % (n as u64 + 1)) as usize / 3)
                })
                .collect()
        })
        .collect();
    c.bench_function("tie_aware_1000_runs", |b| {
        b.iter(|| {
            for g in &runs {
                black_box(tie_aware_from_groups(black_box(g), TmrrMode::ExpectedReciprocal));
            }
        })
    });
}

fn aggregation(c: &mut Criterion) {
    let mut state = 7;
    let evidence = EvidenceSet {
        canonical_surface: "x".into(),
        df: 10,
        sentences: (0..200)
            .map(|i| EvidenceSentence {
                doc_rank: 1 + (lcg(&mut state) % 10) as u32,
                sentence_index: i,
                score: (lcg(&mut state) % 1000) as f64 / 1000.0,
            })
            .collect(),
    };
    let mut group = c.benchmark_group("aggregate_200_sentences");
    for mode in [Aggregation::Avg, Aggregation::AvgMax, Aggregation::Max] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| aggregate(black_box(&evidence), mode, AvgMaxDenominator::ContainingDocs, 10))
        });
    }
    group.finish();
}

fn pipeline(c: &mut Criterion) {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/planted/config.toml");
    let cfg = PipelineConfig::load(&config).expect("fixture config");
    let dataset = Dataset::load(&cfg).expect("fixture data");
    let res = Resources::load(&cfg).expect("fixture resources");
    let config_id = cfg.config_id();
    c.bench_function("planted_question_end_to_end", |b| {
        b.iter(|| {
            for q in &dataset.questions {
                let analysis = analyze_question(q, &dataset.docsets[&q.id], &res, &cfg).unwrap();
                black_box(rank_analysis(&analysis, &cfg, &config_id).unwrap());
            }
        })
    });
}

criterion_group!(benches, tie_metrics, aggregation, pipeline);
criterion_main!(benches);
