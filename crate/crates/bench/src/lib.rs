//! Shared fixtures for the criterion benchmarks.

use fcum_core::experiment::{derive_seed, SEED_STREAM_SYNTHETIC};
use fcum_core::{build_graph, build_profiles, generate_synthetic, SyntheticSpec, TripartiteGraph, UserProfile};

/// A planted-community corpus with the benchmark shape scaled to `n_users`.
pub fn fixture(n_users: usize, seed: u64) -> (TripartiteGraph, Vec<UserProfile>) {
    let full = SyntheticSpec::benchmark(derive_seed(seed, SEED_STREAM_SYNTHETIC));
    let scale = n_users as f64 / full.n_users as f64;
    let spec = SyntheticSpec {
        n_users,
        n_items: ((full.n_items as f64 * scale) as usize).max(full.n_communities),
        n_tags: ((full.n_tags as f64 * scale) as usize).max(full.n_communities),
        ..full
    };
    let graph = build_graph(&generate_synthetic(&spec).expect("valid spec"));
    let profiles = build_profiles(&graph);
    (graph, profiles)
}
