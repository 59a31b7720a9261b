//! The `run` driver: ingestion, preprocessing and embedding ahead of the
//! coordinator, snapshot output, statistics and the run manifest.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use comstream_core::clustering::{ClusterError, Counters, PhaseReport};
use comstream_core::embedding::{EmbedError, Embedder, HashedEmbedder};
use comstream_core::preprocess::TokenList;
use comstream_core::{tokenize, Config, Coordinator, DataPoint, TimeslotSnapshot};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config_file;
use crate::formats::{self, KeywordStats};
use crate::ingest::{self, format_timestamp, IngestError, RawRecord};
use crate::remote::{self, RemoteEmbedder};

/// Records read and embedded ahead of the coordinator in one go.
const READ_AHEAD: usize = 512;

#[derive(Debug, Error)]
pub enum RunError {
    /// Bad invocation: missing input, invalid configuration and the like.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedderChoice {
    Hashed { dim: usize },
    Remote { url: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub config: Config,
    pub input: PathBuf,
    pub output: PathBuf,
    pub stats: Option<PathBuf>,
    /// Defaults to `<output>.manifest.json`.
    pub manifest: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub lenient_time: bool,
    pub embedder: EmbedderChoice,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

impl RunOptions {
    pub fn new(config: Config, input: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        RunOptions {
            config,
            input: input.into(),
            output: output.into(),
            stats: None,
            manifest: None,
            stopwords: None,
            lenient_time: false,
            embedder: EmbedderChoice::Hashed {
                dim: HashedEmbedder::DEFAULT_DIM,
            },
            threads: 0,
        }
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.manifest.clone().unwrap_or_else(|| {
            let mut p = self.output.clone().into_os_string();
            p.push(".manifest.json");
            PathBuf::from(p)
        })
    }

    /// Options that reproduce the run described by `manifest`.
    pub fn from_manifest(manifest: &RunManifest) -> Self {
        RunOptions {
            config: manifest.config.clone().into(),
            input: manifest.input.clone(),
            output: manifest.output.clone(),
            stats: manifest.stats.clone(),
            manifest: Some(manifest.manifest.clone()),
            stopwords: manifest.stopwords.clone(),
            lenient_time: manifest.lenient_time,
            embedder: manifest.embedder.clone(),
            threads: manifest.threads,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub init_agents: usize,
    pub init_agent_cap: usize,
    pub timeslot: i64,
    pub comm_int: i64,
    pub slid_win_int: i64,
    pub assign_radius: f64,
    pub outlier_threshold: f64,
    pub no_topics: usize,
    pub no_keywords: usize,
    pub agent_fading_rate: f64,
    pub del_agent_weight_threshold: f64,
    pub seed: u64,
    pub topic_match_fraction: f64,
}

impl From<&Config> for ConfigRecord {
    fn from(c: &Config) -> Self {
        ConfigRecord {
            init_agents: c.init_agents,
            init_agent_cap: c.init_agent_cap,
            timeslot: c.timeslot,
            comm_int: c.comm_int,
            slid_win_int: c.slid_win_int,
            assign_radius: c.assign_radius,
            outlier_threshold: c.outlier_threshold,
            no_topics: c.no_topics,
            no_keywords: c.no_keywords,
            agent_fading_rate: c.agent_fading_rate,
            del_agent_weight_threshold: c.del_agent_weight_threshold,
            seed: c.seed,
            topic_match_fraction: c.topic_match_fraction,
        }
    }
}

impl From<ConfigRecord> for Config {
    fn from(r: ConfigRecord) -> Self {
        Config {
            init_agents: r.init_agents,
            init_agent_cap: r.init_agent_cap,
            timeslot: r.timeslot,
            comm_int: r.comm_int,
            slid_win_int: r.slid_win_int,
            assign_radius: r.assign_radius,
            outlier_threshold: r.outlier_threshold,
            no_topics: r.no_topics,
            no_keywords: r.no_keywords,
            agent_fading_rate: r.agent_fading_rate,
            del_agent_weight_threshold: r.del_agent_weight_threshold,
            seed: r.seed,
            topic_match_fraction: r.topic_match_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub at: i64,
    pub evicted: usize,
    pub outliers_moved: usize,
    pub agents_created: usize,
    pub agents_faded: usize,
    pub agents_emptied: usize,
}

impl From<&PhaseReport> for PhaseRecord {
    fn from(p: &PhaseReport) -> Self {
        PhaseRecord {
            at: p.at.secs(),
            evicted: p.evicted,
            outliers_moved: p.outliers_moved,
            agents_created: p.agents_created,
            agents_faded: p.agents_faded,
            agents_emptied: p.agents_emptied,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterRecord {
    pub points: usize,
    pub bootstrapped: usize,
    pub assigned: usize,
    pub empty_text: usize,
    pub agents_created: usize,
    pub phases: usize,
    pub evicted: usize,
    pub outliers_moved: usize,
    pub agents_faded: usize,
    pub agents_emptied: usize,
    pub snapshots: usize,
}

impl From<&Counters> for CounterRecord {
    fn from(c: &Counters) -> Self {
        CounterRecord {
            points: c.points,
            bootstrapped: c.bootstrapped,
            assigned: c.assigned,
            empty_text: c.empty_text,
            agents_created: c.agents_created,
            phases: c.phases,
            evicted: c.evicted,
            outliers_moved: c.outliers_moved,
            agents_faded: c.agents_faded,
            agents_emptied: c.agents_emptied,
            snapshots: c.snapshots,
        }
    }
}

/// Everything needed to repeat a run, plus what happened during it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    /// False when the run stopped early; the output files are then partial.
    pub complete: bool,
    pub error: Option<String>,
    pub config: ConfigRecord,
    pub config_text: String,
    pub seed: u64,
    pub input: PathBuf,
    pub output: PathBuf,
    pub stats: Option<PathBuf>,
    pub manifest: PathBuf,
    pub stopwords: Option<PathBuf>,
    pub lenient_time: bool,
    pub embedder: EmbedderChoice,
    pub embed_dim: usize,
    pub threads: usize,
    pub start_time: Option<String>,
    pub end_time: Option<String>,
    pub records: usize,
    pub dropped_records: usize,
    pub snapshots: usize,
    pub degenerate_bootstrap: bool,
    pub counters: CounterRecord,
    pub phases: Vec<PhaseRecord>,
}

impl RunManifest {
    fn new(opts: &RunOptions) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            complete: false,
            error: None,
            config: ConfigRecord::from(&opts.config),
            config_text: config_file::render(&opts.config),
            seed: opts.config.seed,
            input: opts.input.clone(),
            output: opts.output.clone(),
            stats: opts.stats.clone(),
            manifest: opts.manifest_path(),
            stopwords: opts.stopwords.clone(),
            lenient_time: opts.lenient_time,
            embedder: opts.embedder.clone(),
            embed_dim: 0,
            threads: opts.threads,
            start_time: None,
            end_time: None,
            records: 0,
            dropped_records: 0,
            snapshots: 0,
            degenerate_bootstrap: false,
            counters: CounterRecord::default(),
            phases: Vec::new(),
        }
    }

    fn record_coordinator(&mut self, c: &Coordinator) {
        self.embed_dim = c.dim();
        self.start_time = c.clock().epoch().map(format_timestamp);
        self.end_time = c.clock().current().map(format_timestamp);
        self.degenerate_bootstrap = c.degenerate_bootstrap();
        self.counters = CounterRecord::from(c.counters());
        self.snapshots = c.counters().snapshots;
        self.phases = c.phase_reports().iter().map(PhaseRecord::from).collect();
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| RunError::Usage(format!("bad manifest {}: {e}", path.display())))
    }

    fn write(&self) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest always serializes");
        std::fs::write(&self.manifest, text + "\n")
    }
}

/// One lowercase token per line; blank lines and `#` comments ignored.
pub fn load_stopwords(path: &Path) -> Result<BTreeSet<String>, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Usage(format!("cannot read stopwords {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect())
}

fn build_embedder(choice: &EmbedderChoice) -> Result<Box<dyn Embedder + Sync>, RunError> {
    match choice {
        EmbedderChoice::Hashed { dim } => HashedEmbedder::new(*dim)
            .map(|e| Box::new(e) as Box<dyn Embedder + Sync>)
            .map_err(|e| RunError::Usage(e.to_string())),
        EmbedderChoice::Remote { url } => Ok(Box::new(RemoteEmbedder::connect(url)?)),
    }
}

/// Preprocesses and embeds a batch in parallel; output order matches input.
fn prepare(records: Vec<RawRecord>, embedder: &(dyn Embedder + Sync)) -> Result<Vec<DataPoint>, EmbedError> {
    let tokens: Vec<TokenList> = records.par_iter().map(|r| tokenize(&r.text)).collect();
    let items: Vec<(&TokenList, &str)> = tokens.iter().zip(&records).map(|(t, r)| (t, r.text.as_str())).collect();
    let vectors: Vec<_> = items
        .par_chunks(remote::BATCH_SIZE)
        .map(|chunk| embedder.embed_batch(chunk))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(records
        .into_iter()
        .zip(tokens)
        .zip(vectors)
        .map(|((r, t), v)| DataPoint::new(r.id, t, v, r.timestamp))
        .collect())
}

struct Outputs {
    snapshots: BufWriter<File>,
    all: Vec<TimeslotSnapshot>,
    keep: bool,
}

impl Outputs {
    fn emit(&mut self, snaps: Vec<TimeslotSnapshot>) -> std::io::Result<()> {
        for s in snaps {
            formats::write_snapshot(&mut self.snapshots, &s)?;
            if self.keep {
                self.all.push(s);
            }
        }
        Ok(())
    }
}

fn drive(
    opts: &RunOptions,
    manifest: &mut RunManifest,
    reader: &mut ingest::RecordReader<std::io::BufReader<File>>,
    coordinator: &mut Coordinator,
    embedder: &(dyn Embedder + Sync),
    out: &mut Outputs,
) -> Result<(), RunError> {
    loop {
        let mut batch = Vec::with_capacity(READ_AHEAD);
        for record in reader.by_ref().take(READ_AHEAD) {
            batch.push(record?);
        }
        if batch.is_empty() {
            break;
        }
        manifest.records += batch.len();
        for point in prepare(batch, embedder)? {
            let snaps = coordinator.step(point)?;
            out.emit(snaps)?;
        }
    }
    manifest.dropped_records = reader.dropped();
    let snaps = coordinator.finish()?;
    out.emit(snaps)?;
    out.snapshots.flush()?;
    if let Some(path) = &opts.stats {
        let stats = KeywordStats::from_snapshots(&out.all);
        std::fs::write(
            path,
            serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n",
        )?;
    }
    Ok(())
}

fn run_inner(opts: &RunOptions) -> Result<RunManifest, RunError> {
    opts.config.validate().map_err(|e| RunError::Usage(e.to_string()))?;
    if !opts.input.is_file() {
        return Err(RunError::Usage(format!(
            "input {} does not exist",
            opts.input.display()
        )));
    }
    let stopwords = match &opts.stopwords {
        Some(p) => load_stopwords(p)?,
        None => BTreeSet::new(),
    };
    let embedder = build_embedder(&opts.embedder)?;
    let mut reader = ingest::open_stream(&opts.input, opts.lenient_time)?;
    let mut coordinator = Coordinator::new(opts.config.clone(), embedder.dim())?.with_stopwords(stopwords);

    let mut manifest = RunManifest::new(opts);
    let mut out = Outputs {
        snapshots: BufWriter::new(File::create(&opts.output)?),
        all: Vec::new(),
        keep: opts.stats.is_some(),
    };
    let result = drive(
        opts,
        &mut manifest,
        &mut reader,
        &mut coordinator,
        embedder.as_ref(),
        &mut out,
    );
    manifest.record_coordinator(&coordinator);
    match result {
        Ok(()) => {
            manifest.complete = true;
            manifest.write()?;
            Ok(manifest)
        }
        Err(e) => {
            let _ = out.snapshots.flush();
            manifest.error = Some(e.to_string());
            if let Err(write_err) = manifest.write() {
                log::error!("could not write manifest: {write_err}");
            }
            Err(e)
        }
    }
}

/// Runs the whole pipeline on a pool of `opts.threads` workers.
pub fn run(opts: &RunOptions) -> Result<RunManifest, RunError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if opts.threads > 0 {
        builder = builder.num_threads(opts.threads);
    }
    let pool = builder
        .build()
        .map_err(|e| RunError::Usage(format!("cannot start {} worker threads: {e}", opts.threads)))?;
    pool.install(|| run_inner(opts))
}
