use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use comstream::config_file;
use comstream::formats;
use comstream::run::{self, EmbedderChoice, RunError, RunManifest, RunOptions};
use comstream::synth::{self, GenParams};
use comstream_core::evaluation;
use comstream_core::{Config, HashedEmbedder};

#[derive(Parser)]
#[command(name = "comstream", version, about = "Streaming short-text topic detection")]
struct Cli {
    /// error, warn, info, debug or trace. RUST_LOG takes precedence.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a JSONL stream and write one snapshot per timeslot.
    Run(Box<RunArgs>),
    /// Score snapshots against labeled ground truth.
    Eval(EvalArgs),
    /// Write a synthetic labeled stream.
    Gen(GenArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EmbedderKind {
    Hashed,
    Remote,
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file; keys not set keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Repeat a run from its manifest. Other flags are ignored.
    #[arg(long, conflicts_with = "config")]
    replay: Option<PathBuf>,
    #[arg(long, required_unless_present = "replay")]
    input: Option<PathBuf>,
    #[arg(long, required_unless_present = "replay")]
    output: Option<PathBuf>,
    /// Keyword frequency statistics (JSON).
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Defaults to `<output>.manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Extra words left out of topic keywords, one per line.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "hashed")]
    embedder: EmbedderKind,
    #[arg(long, default_value_t = HashedEmbedder::DEFAULT_DIM)]
    embed_dim: usize,
    #[arg(long, default_value = "http://127.0.0.1:8080")]
    embed_url: String,
    /// Drop late records instead of failing.
    #[arg(long)]
    lenient_time: bool,
    /// Worker threads for preprocessing and embedding; 0 means all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

/// One flag per configuration key, taking the same values as the file.
#[derive(Args)]
#[command(next_help_heading = "Configuration overrides")]
struct ConfigOverrides {
    #[arg(long)]
    init_agents: Option<String>,
    #[arg(long)]
    init_agent_cap: Option<String>,
    /// Duration, e.g. 1m or 24h.
    #[arg(long)]
    timeslot: Option<String>,
    #[arg(long)]
    comm_int: Option<String>,
    #[arg(long)]
    slid_win_int: Option<String>,
    #[arg(long)]
    assign_radius: Option<String>,
    #[arg(long)]
    outlier_threshold: Option<String>,
    #[arg(long)]
    no_topics: Option<String>,
    #[arg(long)]
    no_keywords: Option<String>,
    #[arg(long)]
    agent_fading_rate: Option<String>,
    #[arg(long)]
    del_agent_weight_threshold: Option<String>,
    #[arg(long)]
    topic_match_fraction: Option<String>,
}

impl ConfigOverrides {
    fn pairs(&self) -> [(&'static str, &Option<String>); 12] {
        [
            ("init_agents", &self.init_agents),
            ("init_agent_cap", &self.init_agent_cap),
            ("timeslot", &self.timeslot),
            ("comm_int", &self.comm_int),
            ("slid_win_int", &self.slid_win_int),
            ("assign_radius", &self.assign_radius),
            ("outlier_threshold", &self.outlier_threshold),
            ("no_topics", &self.no_topics),
            ("no_keywords", &self.no_keywords),
            ("agent_fading_rate", &self.agent_fading_rate),
            ("del_agent_weight_threshold", &self.del_agent_weight_threshold),
            ("topic_match_fraction", &self.topic_match_fraction),
        ]
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    snapshots: PathBuf,
    #[arg(long, default_value_t = Config::default().topic_match_fraction)]
    match_fraction: f64,
    /// Also write the full report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 6)]
    topics: usize,
    #[arg(long, default_value_t = 30)]
    points_per_topic: usize,
    #[arg(long, default_value_t = 12)]
    vocab_per_topic: usize,
    #[arg(long, default_value_t = 4)]
    slots: usize,
    #[arg(long, default_value_t = 60)]
    slot_secs: i64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_stream: PathBuf,
    #[arg(long)]
    out_gt: PathBuf,
}

/// Failures split by exit code.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn run_options(args: RunArgs) -> Result<RunOptions, Failure> {
    if let Some(path) = &args.replay {
        let manifest = RunManifest::load(path).map_err(usage)?;
        return Ok(RunOptions::from_manifest(&manifest));
    }
    let mut config = match &args.config {
        Some(p) => config_file::load(p).map_err(usage)?,
        None => Config::default(),
    };
    for (key, value) in args.overrides.pairs() {
        if let Some(v) = value {
            config_file::set_key(&mut config, key, v).map_err(usage)?;
        }
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate().map_err(usage)?;
    let embedder = match args.embedder {
        EmbedderKind::Hashed => EmbedderChoice::Hashed { dim: args.embed_dim },
        EmbedderKind::Remote => EmbedderChoice::Remote { url: args.embed_url },
    };
    Ok(RunOptions {
        config,
        input: args.input.expect("required by clap"),
        output: args.output.expect("required by clap"),
        stats: args.stats,
        manifest: args.manifest,
        stopwords: args.stopwords,
        lenient_time: args.lenient_time,
        embedder,
        threads: args.threads,
    })
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let opts = run_options(args)?;
    match run::run(&opts) {
        Ok(m) => {
            log::info!(
                "{} records, {} snapshots, {} phases; manifest at {}",
                m.records,
                m.snapshots,
                m.phases.len(),
                m.manifest.display()
            );
            Ok(())
        }
        Err(RunError::Usage(msg)) => Err(usage(anyhow::anyhow!(msg))),
        Err(e) => Err(Failure::Runtime(e.into())),
    }
}

fn cmd_eval(args: EvalArgs) -> Result<(), Failure> {
    let gt_text = std::fs::read_to_string(&args.gt)
        .with_context(|| format!("cannot read {}", args.gt.display()))
        .map_err(Failure::Usage)?;
    let gt = formats::parse_ground_truth(&gt_text).map_err(usage)?;
    let file = std::fs::File::open(&args.snapshots)
        .with_context(|| format!("cannot read {}", args.snapshots.display()))
        .map_err(Failure::Usage)?;
    let snapshots = formats::read_snapshots(BufReader::new(file)).context("reading snapshots")?;
    let report = evaluation::score(&snapshots, &gt, args.match_fraction).map_err(usage)?;
    print!("{}", formats::metrics_to_text(&report));
    if let Some(path) = &args.report {
        std::fs::write(path, formats::metrics_to_json(&report) + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<(), Failure> {
    let params = GenParams {
        slot_secs: args.slot_secs,
        ..GenParams::new(
            args.topics,
            args.points_per_topic,
            args.vocab_per_topic,
            args.slots,
            args.seed,
        )
    };
    let generated = synth::generate(&params).map_err(usage)?;
    std::fs::write(&args.out_stream, generated.stream_text())
        .with_context(|| format!("cannot write {}", args.out_stream.display()))?;
    std::fs::write(
        &args.out_gt,
        formats::ground_truth_to_json(&generated.ground_truth) + "\n",
    )
    .with_context(|| format!("cannot write {}", args.out_gt.display()))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .parse_default_env()
        .init();
    let result = match cli.command {
        Command::Run(a) => cmd_run(*a),
        Command::Eval(a) => cmd_eval(a),
        Command::Gen(a) => cmd_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
