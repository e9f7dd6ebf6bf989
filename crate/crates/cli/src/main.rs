//! `jfront`: tokenization, training, prediction, evaluation and the full
//! text-to-pitch pipeline from the command line.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data errors.

mod commands;
mod config;
mod error;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use config::{Overrides, Paths, RunConfig};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "jfront", version, about = "Japanese TTS front-end")]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Args, Debug, Default)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// pd, apbp or anpp.
    #[arg(long, global = true)]
    task: Option<String>,
    /// PD3-PD7 or AP0-AP2.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Repeat for several seeds.
    #[arg(long = "seed", global = true)]
    seeds: Vec<u64>,
    #[arg(long, global = true)]
    hidden: Option<usize>,
    #[arg(long, global = true)]
    max_epochs: Option<usize>,
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    #[arg(long, global = true)]
    matrix: Option<PathBuf>,
    #[arg(long, global = true)]
    train: Option<PathBuf>,
    #[arg(long, global = true)]
    valid: Option<PathBuf>,
    #[arg(long, global = true)]
    test: Option<PathBuf>,
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    #[arg(long, global = true)]
    charlm: Option<PathBuf>,
    #[arg(long, global = true)]
    ngrams: Option<PathBuf>,
    #[arg(long, global = true)]
    sandhi: Option<PathBuf>,
    #[arg(long, global = true)]
    apbp_exceptions: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            task: self.task.clone(),
            preset: self.preset.clone(),
            seeds: self.seeds.clone(),
            hidden: self.hidden,
            max_epochs: self.max_epochs,
            paths: Paths {
                lexicon: self.lexicon.clone(),
                matrix: self.matrix.clone(),
                train: self.train.clone(),
                valid: self.valid.clone(),
                test: self.test.clone(),
                embeddings: self.embeddings.clone(),
                charlm: self.charlm.clone(),
                ngrams: self.ngrams.clone(),
                sandhi: self.sandhi.clone(),
                apbp_exceptions: self.apbp_exceptions.clone(),
            },
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Morphological analysis of raw text, one sentence per line.
    Tokenize {
        /// Input text; standard input when absent or `-`.
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        nbest: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trains one model per seed on the configured train/valid corpora.
    Train {
        #[arg(long)]
        out: PathBuf,
        /// Per-seed metrics as TSV.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Writes the input corpus with the model's predictions filled in.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Annotated corpus; defaults to the configured test set.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scores predicted corpora, or models run on the gold corpus.
    Eval {
        /// Gold corpus; defaults to the configured test set.
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Predicted corpus; repeat for several seeds.
        #[arg(long)]
        pred: Vec<PathBuf>,
        /// Model to run on the gold corpus; repeat for several seeds.
        #[arg(long)]
        model: Vec<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Text to readings, accent phrases and mora pitch.
    Pipeline {
        /// Raw text, one sentence (or `id<TAB>text`) per line.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Annotated corpus; its tokenization replaces the tokenizer.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        pd_model: Option<PathBuf>,
        #[arg(long)]
        apbp_model: Option<PathBuf>,
        #[arg(long)]
        anpp_model: Option<PathBuf>,
        /// Take phrase boundaries from the corpus.
        #[arg(long)]
        gold_boundaries: bool,
        /// Take nucleus labels from the corpus.
        #[arg(long)]
        gold_nuclei: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Unigram and bigram counts over tokenized raw text.
    BuildNgrams {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trains the character language model used as a feature provider.
    TrainCharlm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Perplexity per epoch as TSV.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut c = RunConfig::resolve(cli.common.config.as_deref(), |k| std::env::var(k).ok(), &cli.common.overrides())?;
    let test_set = |c: &RunConfig, given: Option<PathBuf>| -> Result<PathBuf, CliError> {
        given
            .or_else(|| c.paths.test.clone())
            .ok_or_else(|| CliError::Usage("no corpus given (use the flag or paths.test)".into()))
    };
    if !matches!(cli.command, Command::Train { .. }) {
        info!("resolved config:\n{}", c.to_toml());
    }
    match cli.command {
        Command::Tokenize { input, nbest, out } => commands::tokenize(&c, input.as_deref(), nbest, out.as_deref()),
        Command::Train { out, report } => commands::train(&mut c, &out, report.as_deref()),
        Command::Predict { model, input, out } => {
            let input = test_set(&c, input)?;
            commands::predict(&c, &model, &input, out.as_deref())
        }
        Command::Eval {
            gold,
            pred,
            model,
            report,
        } => {
            let gold = test_set(&c, gold)?;
            commands::eval(&c, &gold, &pred, &model, report.as_deref())
        }
        Command::Pipeline {
            input,
            corpus,
            pd_model,
            apbp_model,
            anpp_model,
            gold_boundaries,
            gold_nuclei,
            out,
        } => commands::pipeline(
            &c,
            &commands::PipelineArgs {
                input: input.as_deref(),
                corpus: corpus.as_deref(),
                pd_model: pd_model.as_deref(),
                apbp_model: apbp_model.as_deref(),
                anpp_model: anpp_model.as_deref(),
                gold_boundaries,
                gold_nuclei,
                out: out.as_deref(),
            },
        ),
        Command::BuildNgrams { input, out } => commands::build_ngrams(&c, &input, &out),
        Command::TrainCharlm { input, out, report } => commands::train_charlm_cmd(&c, &input, &out, report.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| writeln!(buf, "[{}] {}", record.level(), record.args()))
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
