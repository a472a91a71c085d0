//! `synthqa`: generate synthetic clinical QA corpora, export them for
//! training, analyze question sets and score predictions.
//!
//! Exit codes: 0 success, 2 config error, 3 backend error, 4 data error.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use synthqa::corpus::InputFormat;

use crate::commands::{AnalyzeSource, CostInput, EvaluateArgs, LabelSource, ScaleArgs};
use crate::config::{QuestionSource, RawConfig, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "synthqa", version, about = "Synthetic clinical extractive-QA generation and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a generation recipe and write a run directory.
    Generate(GenerateArgs),
    /// Convert a run directory into a SQuAD-v2 training file.
    Export {
        run_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Diversity and question-type report for a run or a gold file.
    Analyze {
        #[arg(long, conflicts_with = "gold", required_unless_present = "gold")]
        run: Option<PathBuf>,
        /// SQuAD-v2 file.
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Embedding backend.
        #[arg(long, default_value = "openai")]
        backend: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a predictions file, or several seeds' files, against gold.
    Evaluate {
        /// SQuAD-v2 gold file.
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, conflicts_with = "seeds", required_unless_present = "seeds")]
        predictions: Option<PathBuf>,
        /// Glob of per-seed predictions files; reports mean ± std.
        #[arg(long)]
        seeds: Option<String>,
        /// Per-type breakdown; `gold` labels the gold questions, anything else is a labels file.
        #[arg(long, num_args = 0..=1, default_missing_value = "")]
        decompose: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the nested-sample manifests for a scaling study.
    ScalePlan {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "squad_v2")]
        input_format: String,
        #[arg(long, value_delimiter = ',')]
        doc_counts: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        pairs_per_doc: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cost of a run's ledger, or of a token count.
    Cost {
        #[arg(conflicts_with_all = ["input_tokens", "output_tokens"])]
        run_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        input_tokens: u64,
        #[arg(long, default_value_t = 0)]
        output_tokens: u64,
        #[arg(long, default_value = synthqa::generation::DEFAULT_MODEL)]
        model: String,
        /// JSON price table; defaults to the built-in GPT-4o rates.
        #[arg(long)]
        prices: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenerateArgs {
    /// TOML run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    schema: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Number of documents to sample from the input.
    #[arg(long)]
    docs: Option<usize>,
    #[arg(long)]
    questions_per_unit: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// openai, openai:<base url>, mock:echo, mock:synthetic[:policy] or script:<path>.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    input_format: Option<String>,
    /// Answer the input's gold questions instead of generating new ones.
    #[arg(long)]
    gold_questions: bool,
    /// Parent directory; the run goes in a config-hash-named child.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl GenerateArgs {
    fn into_config(self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(p) => RawConfig::from_file(p)?,
            None => RawConfig::default(),
        };
        let flags = RawConfig {
            dataset: self.dataset,
            strategy: self.strategy,
            schema: self.schema,
            model_id: self.model,
            questions_per_unit: self.questions_per_unit,
            seed: self.seed,
            parallelism: self.parallelism,
            backend: self.backend,
            input: self.input,
            input_format: self.input_format,
            docs: self.docs,
            out: self.out,
            questions: self.gold_questions.then_some(QuestionSource::Gold),
            ..Default::default()
        };
        RunConfig::resolve(file.merge(flags))
    }
}

fn input_format(s: &str) -> Result<InputFormat, CliError> {
    s.parse().map_err(|e: synthqa::corpus::CorpusError| CliError::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => commands::generate(&args.into_config()?),
        Command::Export { run_dir, out } => commands::export(&run_dir, &out),
        Command::Analyze { run, gold, backend, out } => {
            let source = match (run, gold) {
                (Some(r), _) => AnalyzeSource::Run(r),
                (None, Some(g)) => AnalyzeSource::Gold(g),
                (None, None) => return Err(CliError::Config("give --run or --gold".into())),
            };
            commands::analyze(&source, &backend.parse()?, out.as_deref())
        }
        Command::Evaluate { gold, predictions, seeds, decompose, out } => {
            let (predictions, aggregate) = match (predictions, seeds) {
                (Some(p), _) => (vec![p], false),
                (None, Some(g)) => (commands::expand_glob(&g)?, true),
                (None, None) => return Err(CliError::Config("give --predictions or --seeds".into())),
            };
            let decompose = decompose.as_deref().map(LabelSource::parse).transpose()?;
            commands::evaluate_cmd(&EvaluateArgs { gold, predictions, aggregate, decompose, out })
        }
        Command::ScalePlan { input, input_format: fmt, doc_counts, pairs_per_doc, seeds, out } => {
            let args = ScaleArgs { input, input_format: input_format(&fmt)?, doc_counts, pairs_per_doc, seeds, out };
            commands::scale_plan(&args)
        }
        Command::Cost { run_dir, input_tokens, output_tokens, model, prices } => {
            let input = match run_dir {
                Some(dir) => CostInput::Run(dir),
                None => CostInput::Tokens { model, input_tokens, output_tokens },
            };
            commands::cost(&input, prices.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
