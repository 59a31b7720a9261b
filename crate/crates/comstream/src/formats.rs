//! On-disk formats: snapshot records, ground truth, keyword statistics and
//! metrics reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use comstream_core::evaluation::{GroundTruth, GtTopic, MetricsReport};
use comstream_core::{AgentId, TimeslotSnapshot, TopicEntry};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{format_timestamp, parse_timestamp};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: bad timestamp {value:?}")]
    Timestamp { line: usize, value: String },
    #[error("ground truth: slot key {0:?} is not a non-negative integer")]
    SlotKey(String),
    #[error("ground truth: topic {0:?} has no keywords")]
    EmptyKeywords(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TopicRecord {
    agent: u64,
    size: usize,
    keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SnapshotRecord {
    slot: u64,
    start: String,
    end: String,
    topics: Vec<TopicRecord>,
}

/// One snapshot as a single JSON line (no trailing newline).
pub fn snapshot_to_line(snapshot: &TimeslotSnapshot) -> String {
    let record = SnapshotRecord {
        slot: snapshot.slot_index,
        start: format_timestamp(snapshot.slot_start),
        end: format_timestamp(snapshot.slot_end),
        topics: snapshot
            .topics
            .iter()
            .map(|t| TopicRecord {
                agent: t.agent_id.0,
                size: t.size,
                keywords: t.keywords.clone(),
            })
            .collect(),
    };
    serde_json::to_string(&record).expect("snapshot records always serialize")
}

pub fn write_snapshot<W: Write>(out: &mut W, snapshot: &TimeslotSnapshot) -> std::io::Result<()> {
    writeln!(out, "{}", snapshot_to_line(snapshot))
}

pub fn read_snapshots<R: BufRead>(input: R) -> Result<Vec<TimeslotSnapshot>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SnapshotRecord =
            serde_json::from_str(&line).map_err(|source| FormatError::Json { line: i + 1, source })?;
        let ts = |value: &str| {
            parse_timestamp(value).map_err(|_| FormatError::Timestamp {
                line: i + 1,
                value: value.to_string(),
            })
        };
        out.push(TimeslotSnapshot {
            slot_index: record.slot,
            slot_start: ts(&record.start)?,
            slot_end: ts(&record.end)?,
            topics: record
                .topics
                .into_iter()
                .map(|t| TopicEntry {
                    agent_id: AgentId(t.agent),
                    size: t.size,
                    keywords: t.keywords,
                })
                .collect(),
        });
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct GtTopicRecord {
    name: String,
    keywords: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GroundTruthRecord {
    slots: BTreeMap<String, Vec<GtTopicRecord>>,
}

pub fn parse_ground_truth(text: &str) -> Result<GroundTruth, FormatError> {
    let record: GroundTruthRecord =
        serde_json::from_str(text).map_err(|source| FormatError::Json { line: 1, source })?;
    let mut gt = GroundTruth::default();
    for (key, topics) in record.slots {
        let slot: u64 = key.trim().parse().map_err(|_| FormatError::SlotKey(key.clone()))?;
        let entry = gt.slots.entry(slot).or_default();
        for t in topics {
            if t.keywords.is_empty() {
                return Err(FormatError::EmptyKeywords(t.name));
            }
            entry.push(GtTopic::new(t.name, t.keywords.iter().map(|k| k.to_lowercase())));
        }
    }
    Ok(gt)
}

pub fn ground_truth_to_json(gt: &GroundTruth) -> String {
    let record = GroundTruthRecord {
        slots: gt
            .slots
            .iter()
            .map(|(slot, topics)| {
                let topics = topics
                    .iter()
                    .map(|t| GtTopicRecord {
                        name: t.name.clone(),
                        keywords: t.keywords.iter().cloned().collect(),
                    })
                    .collect();
                (slot.to_string(), topics)
            })
            .collect(),
    };
    serde_json::to_string_pretty(&record).expect("ground truth always serializes")
}

/// How often each keyword was reported over a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct KeywordStats {
    pub snapshots: usize,
    pub keywords: Vec<KeywordCount>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeywordCount {
    pub keyword: String,
    /// Topic entries listing the keyword.
    pub topics: usize,
    /// Snapshots in which at least one entry lists it.
    pub slots: usize,
}

impl KeywordStats {
    pub fn from_snapshots<'a, I: IntoIterator<Item = &'a TimeslotSnapshot>>(snapshots: I) -> Self {
        let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        let mut n = 0;
        for snap in snapshots {
            n += 1;
            let mut in_slot = std::collections::BTreeSet::new();
            for kw in snap.topics.iter().flat_map(|t| t.keywords.iter()) {
                let entry = counts.entry(kw).or_default();
                entry.0 += 1;
                if in_slot.insert(kw.as_str()) {
                    entry.1 += 1;
                }
            }
        }
        let mut keywords: Vec<KeywordCount> = counts
            .into_iter()
            .map(|(k, (topics, slots))| KeywordCount {
                keyword: k.to_string(),
                topics,
                slots,
            })
            .collect();
        keywords.sort_by(|a, b| b.topics.cmp(&a.topics).then_with(|| a.keyword.cmp(&b.keyword)));
        KeywordStats { snapshots: n, keywords }
    }
}

#[derive(Debug, Serialize)]
struct CountsRecord {
    gt_topics: usize,
    matched_topics: usize,
    matched_kws: usize,
    extracted_kws: usize,
    gt_kws: usize,
}

#[derive(Debug, Serialize)]
struct MatchRecord {
    gt: String,
    agent: u64,
    rank: usize,
    shared: usize,
}

#[derive(Debug, Serialize)]
struct SlotRecord {
    slot: u64,
    counts: CountsRecord,
    matches: Vec<MatchRecord>,
}

#[derive(Debug, Serialize)]
struct MetricsRecord {
    topic_recall: f64,
    keyword_precision: f64,
    keyword_recall: f64,
    f_score: f64,
    counts: CountsRecord,
    skipped_slots: Vec<u64>,
    per_slot: Vec<SlotRecord>,
}

fn counts_record(c: &comstream_core::evaluation::MatchCounts) -> CountsRecord {
    CountsRecord {
        gt_topics: c.gt_topics,
        matched_topics: c.matched_topics,
        matched_kws: c.matched_kws,
        extracted_kws: c.extracted_kws,
        gt_kws: c.gt_kws,
    }
}

pub fn metrics_to_json(report: &MetricsReport) -> String {
    let record = MetricsRecord {
        topic_recall: report.topic_recall,
        keyword_precision: report.keyword_precision,
        keyword_recall: report.keyword_recall,
        f_score: report.f_score,
        counts: counts_record(&report.counts),
        skipped_slots: report.skipped_slots.clone(),
        per_slot: report
            .per_slot
            .iter()
            .map(|s| SlotRecord {
                slot: s.slot,
                counts: counts_record(&s.counts),
                matches: s
                    .matches
                    .iter()
                    .map(|m| MatchRecord {
                        gt: m.gt_name.clone(),
                        agent: m.agent_id.0,
                        rank: m.rank,
                        shared: m.shared_keywords,
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&record).expect("metrics always serialize")
}

/// Human-readable summary.
pub fn metrics_to_text(report: &MetricsReport) -> String {
    let c = &report.counts;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "topic recall       {:.4}  ({}/{})",
        report.topic_recall, c.matched_topics, c.gt_topics
    );
    let _ = writeln!(
        out,
        "keyword precision  {:.4}  ({}/{})",
        report.keyword_precision, c.matched_kws, c.extracted_kws
    );
    let _ = writeln!(
        out,
        "keyword recall     {:.4}  ({}/{})",
        report.keyword_recall, c.matched_kws, c.gt_kws
    );
    let _ = writeln!(out, "f-score            {:.4}", report.f_score);
    if !report.skipped_slots.is_empty() {
        let _ = writeln!(out, "skipped slots      {:?}", report.skipped_slots);
    }
    out
}
