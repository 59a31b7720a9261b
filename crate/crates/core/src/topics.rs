//! Per-timeslot topic output: agent ranking and keyword extraction.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::clock::Timestamp;
use crate::clustering::{Agent, AgentId, DataPoint};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicEntry {
    pub agent_id: AgentId,
    /// Members inside the window when the snapshot was taken.
    pub size: usize,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeslotSnapshot {
    pub slot_index: u64,
    pub slot_start: Timestamp,
    pub slot_end: Timestamp,
    /// Largest agents first; equal sizes by ascending agent id.
    pub topics: Vec<TopicEntry>,
}

/// The `no_keywords` most frequent non-stopword tokens over all members,
/// counting every occurrence. Ties are broken alphabetically.
pub fn extract_keywords(members: &[DataPoint], no_keywords: usize, stopwords: &BTreeSet<String>) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for token in members.iter().flat_map(|m| m.tokens.iter()) {
        if !stopwords.contains(token) {
            *counts.entry(token.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    // BTreeMap iteration is already alphabetical; a stable sort keeps it.
    ranked.sort_by_key(|r| core::cmp::Reverse(r.1));
    ranked
        .into_iter()
        .take(no_keywords)
        .map(|(t, _)| String::from(t))
        .collect()
}

/// Agents ordered by member count, descending, then by id.
pub fn rank_agents<'a, I>(agents: I) -> Vec<&'a Agent>
where
    I: IntoIterator<Item = &'a Agent>,
{
    let mut ranked: Vec<&Agent> = agents.into_iter().collect();
    ranked.sort_by(|a, b| b.len().cmp(&a.len()).then(a.id().cmp(&b.id())));
    ranked
}

pub fn snapshot<'a, I>(
    agents: I,
    slot_index: u64,
    slot_start: Timestamp,
    slot_end: Timestamp,
    no_topics: usize,
    no_keywords: usize,
    stopwords: &BTreeSet<String>,
) -> TimeslotSnapshot
where
    I: IntoIterator<Item = &'a Agent>,
{
    let topics = rank_agents(agents)
        .into_iter()
        .take(no_topics)
        .map(|agent| TopicEntry {
            agent_id: agent.id(),
            size: agent.len(),
            keywords: extract_keywords(agent.members(), no_keywords, stopwords),
        })
        .collect();
    TimeslotSnapshot {
        slot_index,
        slot_start,
        slot_end,
        topics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::Coordinator;
    use crate::config::Config;
    use crate::embedding::{EmbeddingVector, HashedEmbedder};
    use crate::preprocess::TokenList;
    use alloc::vec;

    fn member(words: &[&str]) -> DataPoint {
        DataPoint::new(
            "m",
            words.iter().copied().collect::<TokenList>(),
            EmbeddingVector::empty(1),
            Timestamp(0),
        )
    }

    fn strings(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| String::from(*w)).collect()
    }

    #[test]
    fn keywords_by_frequency_without_stopwords() {
        let members = vec![
            member(&["stay", "home", "covid19", "covid19"]),
            member(&["stay", "home", "covid19"]),
            member(&["stay", "covid19", "covid19"]),
        ];
        let stop: BTreeSet<String> = [String::from("covid19")].into_iter().collect();
        assert_eq!(extract_keywords(&members, 2, &stop), strings(&["stay", "home"]));
    }

    #[test]
    fn keyword_ties_are_alphabetical() {
        let none = BTreeSet::new();
        assert_eq!(extract_keywords(&[member(&["b", "a"])], 5, &none), strings(&["a", "b"]));
        let members = vec![member(&["z", "y", "x"]), member(&["y", "x"])];
        assert_eq!(extract_keywords(&members, 2, &none), strings(&["x", "y"]));
        let stop: BTreeSet<String> = [String::from("a")].into_iter().collect();
        assert!(extract_keywords(&[member(&["a", "a"])], 3, &stop).is_empty());
    }

    fn coordinator_with_sizes(sizes: &[usize]) -> Coordinator {
        // Orthogonal one-hot tokens so every group gets its own agent.
        let dim = 64;
        let cfg = Config {
            init_agents: 1,
            init_agent_cap: 1,
            ..Config::default()
        };
        let e = HashedEmbedder::new(dim).unwrap();
        let words = ["alpha", "stay", "home"];
        for (i, w) in words.iter().enumerate() {
            for v in &words[i + 1..] {
                assert!(
                    crate::embedding::dot(e.embed_tokens(&[*w]).values(), e.embed_tokens(&[*v]).values()).abs() < 1e-12
                );
            }
        }
        let mut c = Coordinator::new(cfg, dim).unwrap();
        let mut first = true;
        for (group, &n) in sizes.iter().enumerate() {
            for k in 0..n {
                let tokens: TokenList = [words[group]].into_iter().collect();
                let v = e.embed_tokens(&tokens);
                let p = DataPoint::new(alloc::format!("{group}-{k}"), tokens, v, Timestamp(0));
                if first {
                    c.bootstrap(vec![p]).unwrap();
                    first = false;
                } else {
                    c.assign(p).unwrap();
                }
            }
        }
        c
    }

    #[test]
    fn snapshot_ranks_by_size() {
        let c = coordinator_with_sizes(&[5, 2, 9]);
        let snap = snapshot(c.agents(), 0, Timestamp(0), Timestamp(60), 2, 3, &BTreeSet::new());
        let sizes: Vec<usize> = snap.topics.iter().map(|t| t.size).collect();
        assert_eq!(sizes, vec![9, 5]);
        assert_eq!(snap.topics[0].keywords, strings(&["home"]));

        let all = snapshot(c.agents(), 0, Timestamp(0), Timestamp(60), 10, 3, &BTreeSet::new());
        assert_eq!(all.topics.len(), 3);
        assert_eq!(&all.topics[..2], &snap.topics[..]);
        assert_eq!(c.snapshot(0), c.snapshot(0));
    }

    #[test]
    fn snapshot_of_nothing() {
        let snap = snapshot(
            core::iter::empty(),
            4,
            Timestamp(0),
            Timestamp(1),
            5,
            5,
            &BTreeSet::new(),
        );
        assert!(snap.topics.is_empty());
        assert_eq!(snap.slot_index, 4);
    }
}
