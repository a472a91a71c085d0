//! Sequential vs parallel generation throughput with the synthetic backend,
//! once CPU-bound and once with a fixed per-request latency standing in for
//! the network.

use std::hint::black_box;
use std::sync::Arc;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use synthqa::corpus::Document;
use synthqa::exec::Execution;
use synthqa::generation::{run_radqa_pipeline, PipelineConfig};
use synthqa::llm::mock::{AnswerPolicy, SyntheticBackend};
use synthqa::llm::{Backend, BackendError, BackendReply, Clock, CompletionRequest, Gateway, RetryPolicy, Usage};
use synthqa::prompting::{Dataset, StrategyKind};

struct Delayed {
    inner: SyntheticBackend,
    delay: Duration,
}

impl Backend for Delayed {
    fn id(&self) -> &str {
        "bench:delayed"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<BackendReply, BackendError> {
        std::thread::sleep(self.delay);
        self.inner.complete(req)
    }

    fn embed(&self, model_id: &str, texts: &[String]) -> Result<(Vec<Vec<f64>>, Usage), BackendError> {
        self.inner.embed(model_id, texts)
    }
}

fn docs(n: usize) -> Vec<Document> {
    (0..n)
        .map(|i| {
            Document::new(
                format!("r{i}"),
                format!(
                    "FINDINGS: Mild bibasilar atelectasis {i}. The endotracheal tube terminates above the carina. \
                     No pleural effusion or pneumothorax.\nIMPRESSION: Stable chest radiograph {i}.\n"
                ),
            )
        })
        .collect()
}

/// The global pool is sized to the core count; request-bound work wants more
/// threads than cores, so the latency group asks for an explicit pool.
fn modes(threads: usize) -> Vec<(&'static str, Execution)> {
    vec![("sequential", Execution::Sequential), ("parallel", Execution::with_threads(threads))]
}

fn run(backend: Arc<dyn Backend>, execution: Execution, docs: &[Document]) -> usize {
    let gw = Gateway::new(backend).with_retry(RetryPolicy::immediate(1)).with_clock(Clock::Fixed(0)).with_parallelism(32);
    let mut cfg = PipelineConfig::new(Dataset::Radqa, StrategyKind::DirectInstruction);
    cfg.execution = execution;
    run_radqa_pipeline(&gw, &cfg, docs).expect("mock run succeeds").pairs.len()
}

fn cpu_bound(c: &mut Criterion) {
    let corpus = docs(64);
    let mut group = c.benchmark_group("radqa_cpu");
    group.sample_size(10);
    for (name, execution) in modes(0) {
        group.bench_with_input(BenchmarkId::from_parameter(name), &execution, |b, &execution| {
            b.iter(|| black_box(run(Arc::new(SyntheticBackend::new(1, AnswerPolicy::Mixed)), execution, &corpus)))
        });
    }
    group.finish();
}

fn latency_bound(c: &mut Criterion) {
    let corpus = docs(32);
    let mut group = c.benchmark_group("radqa_latency_2ms");
    group.sample_size(10);
    for (name, execution) in modes(8) {
        group.bench_with_input(BenchmarkId::from_parameter(name), &execution, |b, &execution| {
            b.iter(|| {
                let backend =
                    Delayed { inner: SyntheticBackend::new(1, AnswerPolicy::Mixed), delay: Duration::from_millis(2) };
                black_box(run(Arc::new(backend), execution, &corpus))
            })
        });
    }
    group.finish();
}

criterion_group!(benches, cpu_bound, latency_bound);
criterion_main!(benches);
