//! User-based collaborative filtering over user/item/tag triples, with an
//! accelerated variant that first coarsely clusters users and then runs the
//! scoring only inside each cluster and its induced item pool.
//!
//! The pipeline is: [`corpus`] (ingest, degree filtering, temporal split) →
//! [`profiles`] (binary incidence sets, similarity kernels) → [`clustering`]
//! (coarse K-means over users) → [`recommend`] (ranklists) → [`eval`]
//! (recall/precision/F1 and timing). [`experiment`] wires the stages
//! together and [`synthetic`] produces planted-community corpora.

pub mod clustering;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod profiles;
pub mod recommend;
pub mod synthetic;

pub use clustering::{coarse_cluster, Centroid, Clustering};
pub use corpus::{
    build_graph, filter_by_degree, parse_triples, temporal_split, DegreeMode, Interaction,
    SplitCorpus, TripartiteGraph,
};
pub use error::{Error, Result};
pub use eval::{EvalReport, MetricsAtK};
pub use experiment::{run_experiment, sweep, ExperimentConfig, ExperimentReport, Mode};
pub use profiles::{build_profiles, FeatureWeights, SparseVector, UserProfile};
pub use recommend::{rank_fcum, rank_ucf, RankList, RankOptions};
pub use synthetic::{generate_synthetic, SyntheticSpec};

/// Dense user index into a graph's user table.
pub type UserIx = u32;
/// Dense item index into a graph's item table.
pub type ItemIx = u32;
/// Dense tag index into a graph's tag table.
pub type TagIx = u32;
