//! Rayon vs. sequential execution on the batch workloads: conventional
//! estimation over many bursts, the dataset comparison, and the cost study.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vitalchat_core::config::OrchestratorConfig;
use vitalchat_core::dsp::estimate_conventional;
use vitalchat_core::eval::{
    bundled_queries, ingest, run_comparison, run_cost_study, segment_all, write_synthetic_dataset, ComparisonConfig,
    DatasetLayout, SyntheticSpec,
};
use vitalchat_core::exec::map_ordered;
use vitalchat_core::interpreter::SpectralOracleClient;
use vitalchat_core::router::HeuristicClassifier;
use vitalchat_core::wire::{SignalSource, SyntheticSource, VitalsPreset};
use vitalchat_core::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn conventional(c: &mut Criterion) {
    let presets = [VitalsPreset::Normal, VitalsPreset::HighHr, VitalsPreset::LowSpo2];
    let bursts: Vec<_> = (0..256u32)
        .map(|i| SyntheticSource::preset(presets[i as usize % 3]).burst(i * 240, "bench"))
        .collect();
    let mut g = c.benchmark_group("conventional_256_bursts");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| map_ordered(exec, &bursts, estimate_conventional))
        });
    }
    g.finish();
}

fn comparison(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_dataset(
        dir.path(),
        &SyntheticSpec {
            subjects: 4,
            seconds: 40.0,
            seed: 3,
        },
    )
    .unwrap();
    let layout = DatasetLayout::default();
    let records = ingest(dir.path(), &layout).unwrap();
    let segments = segment_all(&records, &layout, Execution::Sequential).unwrap();
    let client = SpectralOracleClient::default();
    let config = ComparisonConfig::default();
    let mut g = c.benchmark_group("comparison_synthetic");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_comparison(&segments, &client, &config, exec).unwrap())
        });
    }
    g.finish();
}

fn cost_study(c: &mut Criterion) {
    let cfg = OrchestratorConfig::default();
    let classifier = HeuristicClassifier::new(cfg.classifier.clone());
    let queries: Vec<String> = bundled_queries().into_iter().cycle().take(3000).collect();
    let mut g = c.benchmark_group("cost_study_3000_queries");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_cost_study(&queries, &cfg.prices, &classifier, &cfg.cost_options(), exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, conventional, comparison, cost_study);
criterion_main!(benches);
