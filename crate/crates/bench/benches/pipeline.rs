use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tunereel_bench::{minute_track, script_response};
use tunereel_core::backends::MockEmbedding;
use tunereel_core::scripting::{build_clap_script_prompt, parse_script};
use tunereel_core::segmentation::{compute_spectral_novelty, segment_random, segment_rule_based};
use tunereel_core::taxonomy::{analyze_segments, analyze_track, LabelTaxonomy};
use tunereel_core::{ScriptPromptOptions, SegmentationConfig};

fn segmentation(c: &mut Criterion) {
    let track = minute_track();
    let cfg = SegmentationConfig::default();
    let mut g = c.benchmark_group("segmentation");
    g.sample_size(20);
    g.bench_function("novelty_60s", |b| b.iter(|| compute_spectral_novelty(black_box(&track), &cfg).unwrap()));
    g.bench_function("rules_60s", |b| b.iter(|| segment_rule_based(black_box(&track), &cfg).unwrap()));
    g.bench_function("random_300s", |b| b.iter(|| segment_random(black_box(300.0), &cfg).unwrap()));
    g.finish();
}

fn scripting(c: &mut Criterion) {
    let mut g = c.benchmark_group("parse_script");
    for n in [7, 50] {
        let text = script_response(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &text, |b, t| {
            b.iter(|| parse_script(black_box(t), n).unwrap())
        });
    }
    g.finish();

    let track = minute_track();
    let taxonomy = LabelTaxonomy::builtin();
    let mock = MockEmbedding::new(1);
    let plan = segment_random(track.duration_s(), &SegmentationConfig::default()).unwrap();
    let analysis = analyze_track(&track, &taxonomy, &mock).unwrap();
    let segments = analyze_segments(&track, &plan, &taxonomy, &mock).unwrap();
    let options = ScriptPromptOptions::default();
    c.bench_function("clap_prompt", |b| {
        b.iter(|| build_clap_script_prompt(black_box(&analysis), &segments, &options).unwrap())
    });
}

fn classification(c: &mut Criterion) {
    let track = minute_track();
    let taxonomy = LabelTaxonomy::builtin();
    let plan = segment_random(track.duration_s(), &SegmentationConfig::default()).unwrap();
    let mut g = c.benchmark_group("classification");
    g.sample_size(10);
    g.bench_function("mock_segments_60s", |b| {
        b.iter(|| analyze_segments(&track, &plan, &taxonomy, &MockEmbedding::new(1)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, segmentation, scripting, classification);
criterion_main!(benches);
