//! Similarity graphs built from ordered playlists, hierarchies of such graphs
//! coupled through track metadata, constrained random walks over them and
//! likelihood evaluation of the resulting sequence models.
//!
//! ```
//! use seqwalk::{pairwise_similarity, Decay};
//!
//! let seqs = vec![vec!["a", "b", "a", "c"]];
//! let w = pairwise_similarity(&seqs, Decay::InverseLinear).unwrap();
//! assert!((w.get(&"a", &"c") - 4.0 / 3.0).abs() < 1e-12);
//! ```

pub mod corpus;
pub mod error;
pub mod eval;
pub mod graph;
pub mod hierarchy;
mod par;
pub mod rng;
pub mod similarity;
pub mod synth;
pub mod walker;

pub use corpus::{
    assign_genres, augment_corpus, parse_corpus, split_corpus, write_corpus, Corpus, Item,
    ObjectTable, SequenceRecord, TrackObject, MIXED_GENRE,
};
pub use error::{Error, Result};
pub use eval::{
    average_log_likelihood, build_model, run_benchmark, sequence_log_likelihood, smoothed_prob,
    transition_log_prob, BenchmarkOptions, EvalReport, Model, ModelKind, ModelSpec,
};
pub use graph::{ccdf, weakly_connected_components, NodeId, SimilarityGraph};
pub use hierarchy::{build_hierarchy, Attribute, Hierarchy};
pub use similarity::{pairwise_similarity, Decay, WeightMap};
pub use synth::{planted_corpus, SynthConfig};
pub use walker::{generate, generate_many, WalkerState};
