//! Run configuration: one TOML file plus command-line overrides. Flags win.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use synthqa::corpus::InputFormat;
use synthqa::exec::Execution;
use synthqa::generation::{PipelineConfig, DEFAULT_MODEL};
use synthqa::llm::mock::AnswerPolicy;
use synthqa::prompting::{Dataset, SchemaVariant, StrategyKind};

use crate::error::CliError;

/// Where completions come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    /// OpenAI-compatible HTTP endpoint; key from the environment.
    Live { base_url: Option<String> },
    Echo,
    Synthetic(AnswerPolicy),
    /// JSONL transcript; unscripted requests fall through to the synthetic mock.
    Script(PathBuf),
}

impl BackendSpec {
    pub fn is_mock(&self) -> bool {
        !matches!(self, BackendSpec::Live { .. })
    }
}

impl FromStr for BackendSpec {
    type Err = CliError;

    /// `openai`, `openai:<base url>`, `mock:echo`, `mock:synthetic`,
    /// `mock:synthetic:<policy>` or `script:<path>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CliError::Config(format!("unknown backend `{s}`"));
        match s.split_once(':') {
            None if s == "openai" || s == "live" => Ok(BackendSpec::Live { base_url: None }),
            None => Err(bad()),
            Some(("openai", url)) => Ok(BackendSpec::Live { base_url: Some(url.to_string()) }),
            Some(("script", path)) if !path.is_empty() => Ok(BackendSpec::Script(PathBuf::from(path))),
            Some(("mock", "echo")) => Ok(BackendSpec::Echo),
            Some(("mock", "synthetic")) => Ok(BackendSpec::Synthetic(AnswerPolicy::All)),
            Some(("mock", rest)) => match rest.strip_prefix("synthetic:") {
                Some(policy) => policy.parse().map(BackendSpec::Synthetic).map_err(CliError::Config),
                None => Err(bad()),
            },
            Some(_) => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionSource {
    /// Generate questions with the configured strategy.
    #[default]
    Strategy,
    /// Answer the gold questions of a SQuAD input.
    Gold,
}

/// Every field is optional so a file and the flags can each supply part.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub dataset: Option<String>,
    pub strategy: Option<String>,
    pub schema: Option<String>,
    pub model_id: Option<String>,
    pub questions_per_unit: Option<usize>,
    pub seed: Option<u64>,
    pub parallelism: Option<usize>,
    pub backend: Option<String>,
    pub input: Option<PathBuf>,
    pub input_format: Option<String>,
    /// Sample this many documents from the input; all when unset.
    pub docs: Option<usize>,
    pub out: Option<PathBuf>,
    pub questions: Option<QuestionSource>,
    pub segment_words: Option<usize>,
    pub max_rounds: Option<usize>,
    pub overgen_batch: Option<usize>,
    pub max_output_tokens: Option<u32>,
}

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let raw = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&raw).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Field-wise override: any value set in `flags` replaces ours.
    pub fn merge(self, flags: RawConfig) -> RawConfig {
        macro_rules! pick {
            ($($f:ident),+) => { RawConfig { $($f: flags.$f.or(self.$f)),+ } };
        }
        pick!(
            dataset,
            strategy,
            schema,
            model_id,
            questions_per_unit,
            seed,
            parallelism,
            backend,
            input,
            input_format,
            docs,
            out,
            questions,
            segment_words,
            max_rounds,
            overgen_batch,
            max_output_tokens
        )
    }
}

/// A validated configuration for `generate`.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub parallelism: usize,
    pub backend: BackendSpec,
    pub input: PathBuf,
    pub input_format: InputFormat,
    pub docs: Option<usize>,
    pub out: PathBuf,
    pub questions: QuestionSource,
}

fn parse<T: FromStr>(value: Option<&str>, what: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .map(|v| v.parse::<T>().map_err(|e| CliError::Config(format!("{what}: {e}"))))
        .transpose()
}

impl RunConfig {
    pub fn resolve(raw: RawConfig) -> Result<Self, CliError> {
        let need = |what: &str| CliError::Config(format!("missing required setting `{what}`"));
        let dataset: Dataset = parse(raw.dataset.as_deref(), "dataset")?.ok_or_else(|| need("dataset"))?;
        let questions = raw.questions.unwrap_or_default();
        let strategy: StrategyKind = match parse(raw.strategy.as_deref(), "strategy")? {
            Some(s) => s,
            None if questions == QuestionSource::Gold => StrategyKind::DirectInstruction,
            None => return Err(need("strategy")),
        };
        let mut pipeline = PipelineConfig::new(dataset, strategy);
        pipeline.schema = parse::<SchemaVariant>(raw.schema.as_deref(), "schema")?;
        pipeline.model_id = raw.model_id.unwrap_or_else(|| DEFAULT_MODEL.to_string());
        pipeline.questions_per_unit = raw.questions_per_unit.unwrap_or(pipeline.questions_per_unit);
        pipeline.seed = raw.seed.unwrap_or(0);
        pipeline.segment_words = raw.segment_words.unwrap_or(pipeline.segment_words);
        pipeline.max_rounds = raw.max_rounds.unwrap_or(pipeline.max_rounds);
        pipeline.overgen_batch = raw.overgen_batch.unwrap_or(pipeline.overgen_batch);
        pipeline.max_output_tokens = raw.max_output_tokens.unwrap_or(pipeline.max_output_tokens);
        let parallelism = raw.parallelism.unwrap_or(8);
        if parallelism == 0 {
            return Err(CliError::Config("parallelism must be at least 1".into()));
        }
        pipeline.execution = Execution::with_threads(parallelism);
        pipeline.validate()?;

        let input_format = parse(raw.input_format.as_deref(), "input format")?.unwrap_or(InputFormat::SquadV2);
        if questions == QuestionSource::Gold && input_format != InputFormat::SquadV2 {
            return Err(CliError::Config("gold questions need squad_v2 input".into()));
        }
        if raw.docs == Some(0) {
            return Err(CliError::Config("docs must be at least 1".into()));
        }
        Ok(RunConfig {
            pipeline,
            parallelism,
            backend: raw.backend.as_deref().unwrap_or("openai").parse()?,
            input: raw.input.ok_or_else(|| need("input"))?,
            input_format,
            docs: raw.docs,
            out: raw.out.unwrap_or_else(|| PathBuf::from("runs")),
            questions,
        })
    }
}
