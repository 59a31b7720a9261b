//! Synthetic labeled streams.
//!
//! Every topic owns a private vocabulary. Its first [`CORE_WORDS`] words
//! appear in every document of the topic (they are also the ground-truth
//! keywords); each document adds [`EXTRA_WORDS`] more drawn from the rest of
//! the vocabulary. Topics are active over contiguous slot ranges, so the
//! stream looks like a sequence of bursts.

use std::collections::HashSet;
use std::fmt::Write as _;

use comstream_core::evaluation::{GroundTruth, GtTopic};
use comstream_core::Timestamp;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ingest::format_timestamp;

pub const CORE_WORDS: usize = 4;
pub const EXTRA_WORDS: usize = 1;

/// 2012-05-05T16:00:00Z.
pub const DEFAULT_START: Timestamp = Timestamp(1_336_233_600);

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub n_topics: usize,
    pub points_per_topic: usize,
    pub vocab_per_topic: usize,
    pub slots: usize,
    pub seed: u64,
    pub slot_secs: i64,
    pub start: Timestamp,
}

impl GenParams {
    pub fn new(n_topics: usize, points_per_topic: usize, vocab_per_topic: usize, slots: usize, seed: u64) -> Self {
        GenParams {
            n_topics,
            points_per_topic,
            vocab_per_topic,
            slots,
            seed,
            slot_secs: 60,
            start: DEFAULT_START,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{0} must be positive")]
pub struct GenError(&'static str);

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    /// JSON lines in the ingestion format, time-ordered.
    pub lines: Vec<String>,
    pub ground_truth: GroundTruth,
}

impl Generated {
    pub fn stream_text(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            let _ = writeln!(out, "{line}");
        }
        out
    }
}

#[derive(Serialize)]
struct Line<'a> {
    id: &'a str,
    text: &'a str,
    timestamp: String,
}

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    const CONSONANTS: &[u8] = b"bcdfgklmnprstvz";
    const VOWELS: &[u8] = b"aeiou";
    let syllables = rng.gen_range(2..=4);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
        w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
    }
    w
}

/// Slots in which topic `topic` is active.
pub fn active_slots(topic: usize, n_topics: usize, slots: usize) -> std::ops::Range<usize> {
    let first = topic * slots / n_topics;
    let span = (slots / n_topics).max(1);
    first..(first + span).min(slots)
}

pub fn generate(params: &GenParams) -> Result<Generated, GenError> {
    for (name, v) in [
        ("n_topics", params.n_topics),
        ("points_per_topic", params.points_per_topic),
        ("vocab_per_topic", params.vocab_per_topic),
        ("slots", params.slots),
    ] {
        if v == 0 {
            return Err(GenError(name));
        }
    }
    if params.slot_secs <= 0 {
        return Err(GenError("slot_secs"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut used = HashSet::new();
    let vocabularies: Vec<Vec<String>> = (0..params.n_topics)
        .map(|_| {
            let mut vocab = Vec::with_capacity(params.vocab_per_topic);
            while vocab.len() < params.vocab_per_topic {
                let w = pseudo_word(&mut rng);
                if used.insert(w.clone()) {
                    vocab.push(w);
                }
            }
            vocab
        })
        .collect();

    let mut ground_truth = GroundTruth::default();
    // (timestamp, topic, index, text)
    let mut docs: Vec<(Timestamp, usize, usize, String)> = Vec::new();
    for (topic, vocab) in vocabularies.iter().enumerate() {
        let core = &vocab[..CORE_WORDS.min(vocab.len())];
        let rest = &vocab[core.len()..];
        let slots: Vec<usize> = active_slots(topic, params.n_topics, params.slots).collect();
        for &slot in &slots {
            ground_truth
                .slots
                .entry(slot as u64)
                .or_default()
                .push(GtTopic::new(format!("topic-{topic}"), core.iter().cloned()));
        }
        for k in 0..params.points_per_topic {
            let slot = slots[k % slots.len()];
            let offset = rng.gen_range(0..params.slot_secs);
            let ts = params.start + slot as i64 * params.slot_secs + offset;

            let mut words: Vec<String> = core.to_vec();
            if !rest.is_empty() {
                for _ in 0..EXTRA_WORDS {
                    words.push(rest[rng.gen_range(0..rest.len())].clone());
                }
            }
            words.shuffle(&mut rng);
            if rng.gen_bool(0.25) {
                let w = &mut words[0];
                *w = format!("#{}{}", w[..1].to_ascii_uppercase(), &w[1..]);
            }
            let mut text = words.join(" ");
            if rng.gen_bool(0.2) {
                let _ = write!(text, " https://t.co/{}", pseudo_word(&mut rng));
            }
            docs.push((ts, topic, k, text));
        }
    }
    docs.sort();
    // The run's slot grid starts at the first record, so pin it to the
    // start of the earliest slot.
    let earliest_slot_start = (0..params.n_topics)
        .map(|t| active_slots(t, params.n_topics, params.slots).start)
        .min()
        .map(|s| params.start + s as i64 * params.slot_secs)
        .unwrap_or(params.start);
    if let Some(first) = docs.first_mut() {
        first.0 = earliest_slot_start;
    }

    let lines = docs
        .iter()
        .enumerate()
        .map(|(i, (ts, _, _, text))| {
            let id = format!("p{i:06}");
            serde_json::to_string(&Line {
                id: &id,
                text,
                timestamp: format_timestamp(*ts),
            })
            .expect("lines always serialize")
        })
        .collect();
    Ok(Generated { lines, ground_truth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use comstream_core::tokenize;

    #[test]
    fn sizes_and_layout() {
        let g = generate(&GenParams::new(6, 30, 12, 4, 7)).unwrap();
        assert_eq!(g.lines.len(), 180);
        assert_eq!(g.ground_truth.topic_count(), 6);
        let slots: Vec<u64> = g.ground_truth.slots.keys().copied().collect();
        assert_eq!(slots, vec![0, 1, 2, 3]);
        assert!(g.lines[0].contains("2012-05-05T16:00:00Z"));
    }

    #[test]
    fn deterministic_per_seed() {
        let p = GenParams::new(3, 10, 8, 2, 1);
        assert_eq!(generate(&p).unwrap(), generate(&p).unwrap());
        let q = GenParams { seed: 2, ..p.clone() };
        assert_ne!(generate(&p).unwrap().lines, generate(&q).unwrap().lines);
    }

    #[test]
    fn vocabularies_are_disjoint_and_survive_preprocessing() {
        let g = generate(&GenParams::new(4, 20, 10, 4, 3)).unwrap();
        let gt_words: Vec<&String> = g
            .ground_truth
            .slots
            .values()
            .flatten()
            .flat_map(|t| t.keywords.iter())
            .collect();
        let unique: HashSet<&String> = gt_words.iter().copied().collect();
        assert_eq!(unique.len(), gt_words.len());
        for line in &g.lines {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let tokens = tokenize(v["text"].as_str().unwrap());
            assert_eq!(tokens.len(), CORE_WORDS + EXTRA_WORDS);
        }
    }

    #[test]
    fn topic_ranges() {
        assert_eq!(active_slots(0, 6, 4), 0..1);
        assert_eq!(active_slots(5, 6, 4), 3..4);
        assert_eq!(active_slots(1, 2, 4), 2..4);
        assert_eq!(active_slots(0, 1, 3), 0..3);
        assert!(generate(&GenParams::new(0, 1, 1, 1, 0)).is_err());
    }

    #[test]
    fn single_topic() {
        let g = generate(&GenParams::new(1, 5, 2, 1, 0)).unwrap();
        assert_eq!(g.lines.len(), 5);
        assert_eq!(g.ground_truth.slots[&0][0].keywords.len(), 2);
    }
}
