//! Streaming short-text clustering built around a coordinator and a set of
//! cluster agents.
//!
//! Documents arrive one at a time in event-time order. Each is normalized
//! into tokens ([`preprocess`]), embedded into a unit vector ([`embedding`])
//! and handed to the [`Coordinator`], which assigns it to the closest agent or
//! spawns a new one. Periodically the coordinator runs a communication phase:
//! agents drop members that fell out of the sliding window, hand back members
//! that drifted too far from their centroid, the coordinator redistributes
//! those, and agent weights fade. At every timeslot boundary the largest
//! agents are reported as topics with their most frequent keywords
//! ([`topics`]), which [`evaluation`] scores against ground truth.
//!
//! The crate is `no_std` (it needs `alloc`). Enable the `rayon` feature to
//! scan agents in parallel during communication phases; results do not
//! depend on the number of worker threads.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod clock;
pub mod clustering;
pub mod config;
pub mod embedding;
pub mod evaluation;
pub mod preprocess;
pub mod topics;

pub use clock::{EventClock, Timestamp};
pub use clustering::{Agent, AgentId, Coordinator, DataPoint, PhaseReport};
pub use config::Config;
pub use embedding::{Embedder, EmbeddingVector, HashedEmbedder};
pub use evaluation::{GroundTruth, GtTopic, MetricsReport};
pub use preprocess::tokenize;
pub use topics::{TimeslotSnapshot, TopicEntry};
