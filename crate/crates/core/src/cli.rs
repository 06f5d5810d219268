//! Command-line interface: `analyze`, `validate` and `synth`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};

use crate::config::{layer, parse_config_file, ConfigError, Layered};
use crate::pipeline::{run_analysis, EXIT_CONFIG, EXIT_OK, EXIT_OTHER};
use crate::synth::{finance_with_birds, generate_corpus, irrelevant_topic, two_topics};

#[derive(Debug, Parser)]
#[command(name = "ragcov", version, about = "Semantic coverage of RAG test questions over a document corpus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full analysis and write the report.
    Analyze(RunArgs),
    /// Check the configuration and print the merged result.
    Validate(RunArgs),
    /// Write a synthetic corpus and question file.
    Synth(SynthArgs),
}

/// Every flag also works as a key in the `--config` TOML file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with defaults for any of the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Document file or directory of .txt/.md files.
    #[arg(long)]
    pub docs: Option<PathBuf>,
    /// Question file: one per line, or a JSON array of strings.
    #[arg(long)]
    pub questions: Option<PathBuf>,
    /// openai, voyage or offline.
    #[arg(long)]
    pub provider: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Vector length for the offline provider.
    #[arg(long)]
    pub dimension: Option<usize>,
    #[arg(long)]
    pub chunk_size: Option<usize>,
    #[arg(long)]
    pub chunk_overlap: Option<usize>,
    /// whitespace or char.
    #[arg(long)]
    pub tokenizer: Option<String>,
    /// Number of clusters, or "auto".
    #[arg(long)]
    pub clusters: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lof_neighbors: Option<usize>,
    #[arg(long)]
    pub lof_threshold: Option<f64>,
    /// novelty or questions_only.
    #[arg(long)]
    pub lof_mode: Option<String>,
    #[arg(long)]
    pub multi_threshold: Option<f64>,
    /// Count each question toward its N closest centroids instead of a threshold.
    #[arg(long)]
    pub multi_closest: Option<usize>,
    #[arg(long)]
    pub gap_threshold: Option<f64>,
    /// offline or llm.
    #[arg(long)]
    pub concept_backend: Option<String>,
    #[arg(long)]
    pub concept_model: Option<String>,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub markdown_out: Option<PathBuf>,
    /// Write an SVG scatter plot to this path.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// tsne or pca; chosen by size when unset.
    #[arg(long)]
    pub plot_method: Option<String>,
    #[arg(long)]
    pub perplexity: Option<f64>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    TwoTopics,
    FinanceBirds,
    IrrelevantTopic,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "irrelevant-topic")]
    pub preset: Preset,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Receives docs/, questions.txt and labels.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn path_value(p: &Path) -> Value {
    Value::String(p.display().to_string())
}

impl RunArgs {
    /// Flags that were given, keyed like the config file.
    pub fn to_flag_map(&self) -> Map<String, Value> {
        let mut m = Map::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("docs", self.docs.as_deref().map(path_value));
        put("questions", self.questions.as_deref().map(path_value));
        put("provider", self.provider.clone().map(Value::from));
        put("model", self.model.clone().map(Value::from));
        put("dimension", self.dimension.map(Value::from));
        put("chunk-size", self.chunk_size.map(Value::from));
        put("chunk-overlap", self.chunk_overlap.map(Value::from));
        put("tokenizer", self.tokenizer.clone().map(Value::from));
        put("clusters", self.clusters.clone().map(Value::from));
        put("seed", self.seed.map(Value::from));
        put("lof-neighbors", self.lof_neighbors.map(Value::from));
        put("lof-threshold", self.lof_threshold.map(Value::from));
        put("lof-mode", self.lof_mode.clone().map(Value::from));
        put("multi-threshold", self.multi_threshold.map(Value::from));
        put("multi-closest", self.multi_closest.map(Value::from));
        put("gap-threshold", self.gap_threshold.map(Value::from));
        put("concept-backend", self.concept_backend.clone().map(Value::from));
        put("concept-model", self.concept_model.clone().map(Value::from));
        put("out", self.out.as_deref().map(path_value));
        put("markdown-out", self.markdown_out.as_deref().map(path_value));
        put("plot", self.plot.as_deref().map(path_value));
        put("plot-method", self.plot_method.clone().map(Value::from));
        put("perplexity", self.perplexity.map(Value::from));
        put("cache-dir", self.cache_dir.as_deref().map(path_value));
        m
    }

    pub fn layered(&self) -> Result<Layered, ConfigError> {
        let file = self.config.as_deref().map(parse_config_file).transpose()?;
        layer(file, self.to_flag_map())
    }
}

fn cmd_analyze(args: &RunArgs) -> i32 {
    let cfg = match args.layered() {
        Ok(l) => l.config,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match run_analysis(&cfg) {
        Ok(outcome) => {
            match &outcome.report.coverage {
                Some(c) => println!(
                    "basic {:.1}%  weighted {:.1}%  multi {:.1}%  gaps {}",
                    c.basic * 100.0,
                    c.weighted * 100.0,
                    c.multi_threshold * 100.0,
                    outcome.report.gaps.len()
                ),
                None => eprintln!("error: every test question was filtered as an outlier; see the report"),
            }
            println!("report written to {}", cfg.out.display());
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn cmd_validate(args: &RunArgs) -> i32 {
    let layered = match args.layered() {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match layered.config.validate() {
        Ok(warnings) => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", layered.config.effective_dump(&layered.sources));
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

fn cmd_synth(args: &SynthArgs) -> i32 {
    let spec = match args.preset {
        Preset::TwoTopics => two_topics(args.seed),
        Preset::FinanceBirds => finance_with_birds(args.seed),
        Preset::IrrelevantTopic => irrelevant_topic(args.seed),
    };
    let corpus = match generate_corpus(&spec) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let write = || -> std::io::Result<()> {
        let docs = args.out_dir.join("docs");
        std::fs::create_dir_all(&docs)?;
        for d in &corpus.documents {
            std::fs::write(docs.join(format!("{}.txt", d.id)), &d.text)?;
        }
        let questions: Vec<&str> = corpus.questions.iter().map(|q| q.text.as_str()).collect();
        std::fs::write(args.out_dir.join("questions.txt"), questions.join("\n") + "\n")?;
        let labels = serde_json::json!({
            "documents": corpus.documents.iter().zip(&corpus.doc_labels)
                .map(|(d, l)| serde_json::json!({"id": d.id, "topic": l})).collect::<Vec<_>>(),
            "questions": corpus.question_labels,
        });
        std::fs::write(args.out_dir.join("labels.json"), serde_json::to_string_pretty(&labels)? + "\n")?;
        Ok(())
    };
    match write() {
        Ok(()) => {
            println!(
                "wrote {} documents and {} questions to {}",
                corpus.documents.len(),
                corpus.questions.len(),
                args.out_dir.display()
            );
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_OTHER
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match &cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Synth(s) => cmd_synth(s),
    }
}
