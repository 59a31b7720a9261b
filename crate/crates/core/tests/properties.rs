use std::collections::BTreeMap;

use comstream_core::clustering::Coordinator;
use comstream_core::embedding::{centroid_of, cosine, dot, l2_norm, EmbeddingVector};
use comstream_core::preprocess::{clean, segment_hashtags, strip_mentions, strip_urls};
use comstream_core::{tokenize, Config, DataPoint, HashedEmbedder, Timestamp};
use proptest::prelude::*;

fn tweetish() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        "[A-Za-z]{1,8}",
        "#[A-Za-z0-9_]{1,12}",
        "@[A-Za-z0-9_]{1,8}",
        "https?://[a-z./]{1,12}",
        "www\\.[a-z.]{1,8}",
        "[0-9]{1,4}",
        "[!?.,:;'\"()\\-]{1,3}",
        "[a-z]+-[a-z]+",
        "[éßλ中]{1,2}",
    ];
    // A literal word "http" outside a link is ordinary text.
    let piece = piece.prop_filter("plain http", |p| {
        p.starts_with("http") || !p.to_ascii_lowercase().contains("http")
    });
    prop::collection::vec(piece, 0..12).prop_map(|v| v.join(" "))
}

fn unit_vector(dim: usize) -> impl Strategy<Value = EmbeddingVector> {
    prop::collection::vec(-1.0f64..1.0, dim)
        .prop_filter("needs a direction", |v| l2_norm(v) > 1e-3)
        .prop_map(EmbeddingVector::normalized)
}

fn point(id: usize, ts: i64, v: EmbeddingVector) -> DataPoint {
    DataPoint::new(format!("p{id}"), Default::default(), v, Timestamp(ts))
}

proptest! {
    #[test]
    fn tokenize_is_idempotent(text in tweetish()) {
        let once = tokenize(&text);
        prop_assert_eq!(tokenize(&once.join()), once);
    }

    #[test]
    fn tokens_are_clean(text in tweetish()) {
        for tok in tokenize(&text).iter() {
            prop_assert!(!tok.is_empty());
            prop_assert!(!tok.contains("http"));
            prop_assert!(tok.chars().all(|c| c.is_ascii_lowercase() || c == '-'), "{:?}", tok);
        }
    }

    #[test]
    fn mention_and_url_stripping_commute(text in tweetish()) {
        let a = clean(&segment_hashtags(&strip_mentions(&strip_urls(&text))));
        let b = clean(&segment_hashtags(&strip_urls(&strip_mentions(&text))));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn hashed_embedding_ignores_token_order(mut words in prop::collection::vec("[a-z]{1,6}", 1..10), seed: u64) {
        let e = HashedEmbedder::new(32).unwrap();
        let a = e.embed_tokens(&words);
        let n = words.len();
        words.rotate_left((seed as usize) % n);
        words.swap(0, n - 1);
        let b = e.embed_tokens(&words);
        prop_assert_eq!(a.is_empty(), b.is_empty());
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        if !a.is_empty() {
            prop_assert!((l2_norm(a.values()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_is_symmetric_and_bounded(a in unit_vector(8), b in unit_vector(8)) {
        let ab = cosine(&a, &b).unwrap();
        let ba = cosine(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((-1.0..=1.0).contains(&ab));
        prop_assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn centroid_of_copies_is_the_vector(v in unit_vector(6), n in 1usize..20) {
        let copies = vec![v.clone(); n];
        let c = centroid_of(&copies).unwrap();
        for (x, y) in c.values().iter().zip(v.values()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    /// Points only change agents; eviction is the only way out.
    #[test]
    fn membership_is_conserved(
        vectors in prop::collection::vec(unit_vector(4), 12..80),
        gaps in prop::collection::vec(0i64..20, 80),
        radius in 0.05f64..0.6,
    ) {
        let config = Config {
            init_agents: 2,
            init_agent_cap: 2,
            timeslot: 30,
            comm_int: 15,
            slid_win_int: 45,
            assign_radius: radius,
            outlier_threshold: radius + 0.02,
            ..Config::default()
        };
        let mut c = Coordinator::new(config, 4).unwrap();
        let mut ts = 0;
        for (i, v) in vectors.into_iter().enumerate() {
            ts += gaps[i];
            c.step(point(i, ts, v)).unwrap();
            let held: usize = c.agents().map(|a| a.len()).sum();
            prop_assert_eq!(held + c.pending_bootstrap() + c.counters().evicted, i + 1);
            prop_assert!(c.agents().all(|a| !a.is_empty()));
        }
        c.finish().unwrap();
        let held: usize = c.agents().map(|a| a.len()).sum();
        prop_assert_eq!(held + c.counters().evicted, c.counters().points);
    }

    #[test]
    fn incremental_centroids_match_recomputed(
        vectors in prop::collection::vec(prop::option::weighted(0.9, unit_vector(5)), 10..120),
        gaps in prop::collection::vec(0i64..10, 120),
    ) {
        let config = Config {
            init_agents: 3,
            init_agent_cap: 2,
            timeslot: 20,
            comm_int: 10,
            slid_win_int: 25,
            assign_radius: 0.4,
            outlier_threshold: 0.3,
            ..Config::default()
        };
        let mut c = Coordinator::new(config, 5).unwrap();
        let mut ts = 0;
        for (i, v) in vectors.into_iter().enumerate() {
            ts += gaps[i];
            let v = v.unwrap_or_else(|| EmbeddingVector::empty(5));
            c.step(point(i, ts, v)).unwrap();
            for agent in c.agents() {
                let live: Vec<&EmbeddingVector> =
                    agent.members().iter().map(|p| &p.vector).filter(|v| !v.is_empty()).collect();
                if live.is_empty() {
                    prop_assert!(agent.centroid().is_empty());
                    continue;
                }
                let expected = centroid_of(live).unwrap();
                for (x, y) in agent.centroid().values().iter().zip(expected.values()) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn runs_are_deterministic(
        vectors in prop::collection::vec(unit_vector(4), 10..60),
        seed: u64,
    ) {
        let run = || {
            let config = Config { seed, timeslot: 5, comm_int: 3, slid_win_int: 10, ..Config::default() };
            let mut c = Coordinator::new(config, 4).unwrap();
            let mut out = Vec::new();
            for (i, v) in vectors.iter().enumerate() {
                out.extend(c.step(point(i, i as i64, v.clone())).unwrap());
            }
            out.extend(c.finish().unwrap());
            let members: BTreeMap<u64, Vec<String>> = c
                .agents()
                .map(|a| (a.id().0, a.members().iter().map(|p| p.id.clone()).collect()))
                .collect();
            (out, members)
        };
        prop_assert_eq!(run(), run());
    }
}

#[test]
fn dot_of_orthogonal_hashes() {
    let e = HashedEmbedder::new(64).unwrap();
    let home = e.embed_tokens(&["home"]);
    let stay = e.embed_tokens(&["stay"]);
    assert_eq!(dot(home.values(), stay.values()), 0.0);
}
