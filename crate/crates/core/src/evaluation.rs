//! Scoring snapshots against ground truth with micro-averaged topic recall,
//! keyword precision, keyword recall and F-score.
//!
//! A detected topic matches a ground-truth topic when it contains at least
//! `ceil(fraction * |gt keywords|)` of its keywords. Within one slot each
//! detected entry serves at most one ground-truth topic; pairs are taken
//! greedily by intersection size, then by detection rank. Keyword precision
//! divides the matched keywords by the number of keywords *extracted* for the
//! matching entries. Topic precision is not reported since ground truth does
//! not list every real topic in a slot.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::clustering::AgentId;
use crate::topics::{TimeslotSnapshot, TopicEntry};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GtTopic {
    pub name: String,
    pub keywords: BTreeSet<String>,
}

impl GtTopic {
    pub fn new<I, S>(name: impl Into<String>, keywords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        GtTopic {
            name: name.into(),
            keywords: keywords.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub slots: BTreeMap<u64, Vec<GtTopic>>,
}

impl GroundTruth {
    pub fn topic_count(&self) -> usize {
        self.slots.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("ground truth contains no topics")]
    EmptyGroundTruth,
    #[error("ground-truth topic {0:?} has no keywords")]
    NoKeywords(String),
    #[error("match fraction must lie in (0, 1]")]
    Fraction,
}

/// Raw counts behind the ratios.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatchCounts {
    pub gt_topics: usize,
    pub matched_topics: usize,
    /// Sum of keyword intersections over matched pairs.
    pub matched_kws: usize,
    /// Keywords extracted for the detected entries that matched.
    pub extracted_kws: usize,
    /// Ground-truth keywords of the matched topics.
    pub gt_kws: usize,
}

impl MatchCounts {
    fn add(&mut self, other: &MatchCounts) {
        self.gt_topics += other.gt_topics;
        self.matched_topics += other.matched_topics;
        self.matched_kws += other.matched_kws;
        self.extracted_kws += other.extracted_kws;
        self.gt_kws += other.gt_kws;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicMatch {
    pub gt_name: String,
    pub agent_id: AgentId,
    pub rank: usize,
    pub shared_keywords: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotMetrics {
    pub slot: u64,
    pub counts: MatchCounts,
    pub matches: Vec<TopicMatch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub topic_recall: f64,
    pub keyword_precision: f64,
    pub keyword_recall: f64,
    pub f_score: f64,
    pub counts: MatchCounts,
    pub per_slot: Vec<SlotMetrics>,
    /// Ground-truth slots with no corresponding snapshot; not scored.
    pub skipped_slots: Vec<u64>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean, zero when both inputs are zero.
pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn shared(gt: &GtTopic, detected: &TopicEntry) -> usize {
    let detected: BTreeSet<&str> = detected.keywords.iter().map(String::as_str).collect();
    gt.keywords.iter().filter(|k| detected.contains(k.as_str())).count()
}

fn required(fraction: f64, n: usize) -> usize {
    // The epsilon keeps 0.7 * 10 from rounding up to 8.
    libm::ceil(fraction * n as f64 - 1e-9) as usize
}

pub fn match_topic(gt: &GtTopic, detected: &TopicEntry, fraction: f64) -> bool {
    let n = shared(gt, detected);
    n > 0 && n >= required(fraction, gt.keywords.len())
}

fn score_slot(slot: u64, gt: &[GtTopic], detected: &[TopicEntry], fraction: f64) -> SlotMetrics {
    let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
    for (gi, g) in gt.iter().enumerate() {
        for (rank, d) in detected.iter().enumerate() {
            if match_topic(g, d, fraction) {
                candidates.push((shared(g, d), rank, gi));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then(a.1.cmp(&b.1))
            .then_with(|| gt[a.2].name.cmp(&gt[b.2].name))
            .then_with(|| gt[a.2].keywords.cmp(&gt[b.2].keywords))
    });

    let mut gt_used = alloc::vec![false; gt.len()];
    let mut det_used = alloc::vec![false; detected.len()];
    let mut counts = MatchCounts {
        gt_topics: gt.len(),
        ..MatchCounts::default()
    };
    let mut matches = Vec::new();
    for (n, rank, gi) in candidates {
        if gt_used[gi] || det_used[rank] {
            continue;
        }
        gt_used[gi] = true;
        det_used[rank] = true;
        counts.matched_topics += 1;
        counts.matched_kws += n;
        counts.extracted_kws += detected[rank].keywords.len();
        counts.gt_kws += gt[gi].keywords.len();
        matches.push(TopicMatch {
            gt_name: gt[gi].name.clone(),
            agent_id: detected[rank].agent_id,
            rank,
            shared_keywords: n,
        });
    }
    SlotMetrics { slot, counts, matches }
}

pub fn score(snapshots: &[TimeslotSnapshot], gt: &GroundTruth, fraction: f64) -> Result<MetricsReport, EvalError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(EvalError::Fraction);
    }
    if gt.topic_count() == 0 {
        return Err(EvalError::EmptyGroundTruth);
    }
    if let Some(t) = gt.slots.values().flatten().find(|t| t.keywords.is_empty()) {
        return Err(EvalError::NoKeywords(t.name.clone()));
    }
    let by_slot: BTreeMap<u64, &TimeslotSnapshot> = snapshots.iter().map(|s| (s.slot_index, s)).collect();

    let mut counts = MatchCounts::default();
    let mut per_slot = Vec::new();
    let mut skipped_slots = Vec::new();
    for (&slot, topics) in &gt.slots {
        let Some(snapshot) = by_slot.get(&slot) else {
            log::warn!("ground-truth slot {slot} has no snapshot; skipped");
            skipped_slots.push(slot);
            continue;
        };
        let metrics = score_slot(slot, topics, &snapshot.topics, fraction);
        counts.add(&metrics.counts);
        per_slot.push(metrics);
    }

    let keyword_precision = ratio(counts.matched_kws, counts.extracted_kws);
    let keyword_recall = ratio(counts.matched_kws, counts.gt_kws);
    Ok(MetricsReport {
        topic_recall: ratio(counts.matched_topics, counts.gt_topics),
        keyword_precision,
        keyword_recall,
        f_score: f_score(keyword_precision, keyword_recall),
        counts,
        per_slot,
        skipped_slots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::Timestamp;
    use alloc::vec;

    fn entry(agent: u64, kws: &[&str]) -> TopicEntry {
        TopicEntry {
            agent_id: AgentId(agent),
            size: 1,
            keywords: kws.iter().map(|k| String::from(*k)).collect(),
        }
    }

    fn snap(slot: u64, topics: Vec<TopicEntry>) -> TimeslotSnapshot {
        TimeslotSnapshot {
            slot_index: slot,
            slot_start: Timestamp(0),
            slot_end: Timestamp(60),
            topics,
        }
    }

    #[test]
    fn match_rule() {
        let gt = GtTopic::new("goal", ["goal", "drogba"]);
        assert!(match_topic(&gt, &entry(0, &["drogba", "goal", "chelsea"]), 1.0));
        let gt4 = GtTopic::new("t", ["a", "b", "c", "d"]);
        let det = entry(0, &["a", "b", "x"]);
        assert!(match_topic(&gt4, &det, 0.5));
        assert!(!match_topic(&gt4, &det, 0.75));
        assert!(!match_topic(&gt4, &entry(0, &["x", "y"]), 0.01));
        assert_eq!(required(0.7, 10), 7);
    }

    #[test]
    fn toy_case() {
        let mut gt = GroundTruth::default();
        gt.slots.insert(
            0,
            vec![GtTopic::new("a", ["k1", "k2", "k3"]), GtTopic::new("b", ["z1", "z2"])],
        );
        let snaps = vec![snap(0, vec![entry(0, &["k1", "k2", "x", "y", "w"])])];
        let r = score(&snaps, &gt, 0.5).unwrap();
        assert!((r.topic_recall - 0.5).abs() < 1e-12);
        assert!((r.keyword_recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.keyword_precision - 0.4).abs() < 1e-12);
        assert!((r.f_score - 0.5).abs() < 1e-12);
    }

    #[test]
    fn perfect_detection() {
        let mut gt = GroundTruth::default();
        gt.slots.insert(0, vec![GtTopic::new("a", ["x", "y"])]);
        gt.slots
            .insert(1, vec![GtTopic::new("b", ["p"]), GtTopic::new("c", ["q", "r"])]);
        let snaps = vec![
            snap(0, vec![entry(0, &["x", "y"])]),
            snap(1, vec![entry(1, &["q", "r"]), entry(2, &["p"])]),
        ];
        let r = score(&snaps, &gt, 1.0).unwrap();
        assert_eq!(
            (r.topic_recall, r.keyword_precision, r.keyword_recall, r.f_score),
            (1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn one_entry_serves_one_topic() {
        let mut gt = GroundTruth::default();
        gt.slots
            .insert(0, vec![GtTopic::new("a", ["x"]), GtTopic::new("b", ["x", "y"])]);
        let snaps = vec![snap(0, vec![entry(0, &["x", "y"])])];
        let r = score(&snaps, &gt, 0.5).unwrap();
        assert_eq!(r.counts.matched_topics, 1);
        assert_eq!(r.per_slot[0].matches[0].gt_name, "b");
    }

    #[test]
    fn errors_and_skips() {
        assert_eq!(
            score(&[], &GroundTruth::default(), 0.5),
            Err(EvalError::EmptyGroundTruth)
        );
        let mut gt = GroundTruth::default();
        gt.slots.insert(7, vec![GtTopic::new("a", ["x"])]);
        assert_eq!(score(&[], &gt, 0.0), Err(EvalError::Fraction));
        let r = score(&[snap(0, vec![])], &gt, 0.5).unwrap();
        assert_eq!(r.skipped_slots, vec![7]);
        assert_eq!(r.topic_recall, 0.0);
        gt.slots.insert(0, vec![GtTopic::new("empty", Vec::<String>::new())]);
        assert!(matches!(score(&[], &gt, 0.5), Err(EvalError::NoKeywords(_))));
    }

    #[test]
    fn missing_detections_count_as_misses() {
        let mut gt = GroundTruth::default();
        gt.slots.insert(0, vec![GtTopic::new("a", ["x"])]);
        gt.slots.insert(1, vec![GtTopic::new("b", ["y"])]);
        let snaps = vec![snap(0, vec![entry(0, &["x"])]), snap(1, vec![])];
        let r = score(&snaps, &gt, 0.5).unwrap();
        assert_eq!(r.topic_recall, 0.5);
        assert_eq!(r.keyword_precision, 1.0);
    }
}
