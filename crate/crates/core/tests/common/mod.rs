//! Brute-force reference implementations used as oracles. Nothing here
//! calls into the ranking, clustering or metric code it is compared with.
#![allow(dead_code)]

use std::collections::HashSet;

use fcum_core::corpus::{build_graph, Interaction, TestSet, TripartiteGraph};
use fcum_core::profiles::UserProfile;
use rand::Rng;

/// A random corpus with at most the given numbers of users, items and tags.
pub fn random_interactions<R: Rng>(rng: &mut R, max_users: usize, max_items: usize, max_tags: usize) -> Vec<Interaction> {
    let n_users = rng.gen_range(1..=max_users);
    let n_items = rng.gen_range(1..=max_items);
    let n_tags = rng.gen_range(1..=max_tags);
    let mut out = Vec::new();
    for u in 0..n_users {
        let n = rng.gen_range(1..=8);
        for _ in 0..n {
            out.push(Interaction::new(
                format!("u{u}"),
                format!("r{}", rng.gen_range(0..n_items)),
                format!("t{}", rng.gen_range(0..n_tags)),
                rng.gen_range(0..50),
            ));
        }
    }
    out
}

pub fn random_graph<R: Rng>(rng: &mut R, max_users: usize, max_items: usize, max_tags: usize) -> TripartiteGraph {
    build_graph(&random_interactions(rng, max_users, max_items, max_tags))
}

/// Profiles rebuilt straight from the triples.
pub fn naive_profiles(g: &TripartiteGraph) -> Vec<UserProfile> {
    let mut items = vec![HashSet::new(); g.n_users()];
    let mut tags = vec![HashSet::new(); g.n_users()];
    for t in g.triples() {
        items[t.user as usize].insert(t.item);
        tags[t.user as usize].insert(t.tag);
    }
    items
        .into_iter()
        .zip(tags)
        .map(|(i, t)| UserProfile::new(i.into_iter().collect(), t.into_iter().collect()))
        .collect()
}

fn dense(set: &[u32], n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for &i in set {
        v[i as usize] = 1.0;
    }
    v
}

fn dense_cos(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb).sqrt()).min(1.0)
    }
}

pub fn naive_similarity(u: &UserProfile, v: &UserProfile, beta: f64, n_items: usize, n_tags: usize) -> f64 {
    beta * dense_cos(&dense(&u.items, n_items), &dense(&v.items, n_items))
        + (1.0 - beta) * dense_cos(&dense(&u.tags, n_tags), &dense(&v.tags, n_tags))
}

/// Scores every item for every user by the literal score definition over
/// the given neighbour pool and candidate pool, sorts, and keeps `k`
/// (zero scores included).
#[allow(clippy::too_many_arguments)]
pub fn naive_rank(
    profiles: &[UserProfile],
    targets: &[u32],
    neighbors: &[u32],
    candidates: &[u32],
    n_items: usize,
    n_tags: usize,
    beta: f64,
    k: usize,
) -> Vec<(u32, Vec<(u32, f64)>)> {
    let mut out = Vec::new();
    for &u in targets {
        let me = &profiles[u as usize];
        let mut scored = Vec::new();
        for &item in candidates {
            if me.items.contains(&item) {
                continue; // score -1, never recommended
            }
            let mut s = 0.0;
            for &v in neighbors {
                if v != u && profiles[v as usize].items.contains(&item) {
                    s += naive_similarity(me, &profiles[v as usize], beta, n_items, n_tags);
                }
            }
            scored.push((item, s));
        }
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        scored.truncate(k);
        out.push((u, scored));
    }
    out
}

/// Result of the reference clustering.
pub struct NaiveClustering {
    pub assignment: Vec<u32>,
    /// Dense centroid (items, tags) per cluster; `None` when empty.
    pub centroids: Vec<Option<(Vec<f64>, Vec<f64>)>>,
    pub item_clusters: Vec<Vec<u32>>,
}

fn dense_centroid(members: &[usize], profiles: &[UserProfile], n_items: usize, n_tags: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    if members.is_empty() {
        return None;
    }
    let mut ci = vec![0.0; n_items];
    let mut ct = vec![0.0; n_tags];
    for &m in members {
        for (acc, x) in ci.iter_mut().zip(dense(&profiles[m].items, n_items)) {
            *acc += x;
        }
        for (acc, x) in ct.iter_mut().zip(dense(&profiles[m].tags, n_tags)) {
            *acc += x;
        }
    }
    let n = members.len() as f64;
    ci.iter_mut().for_each(|x| *x /= n);
    ct.iter_mut().for_each(|x| *x /= n);
    Some((ci, ct))
}

/// Batch K-means with dense vectors, recomputing everything from scratch.
pub fn naive_cluster(
    profiles: &[UserProfile],
    k: usize,
    iterations: usize,
    gamma: f64,
    init: Vec<u32>,
    n_items: usize,
    n_tags: usize,
) -> NaiveClustering {
    let mut assignment = init;
    let members = |a: &[u32], j: usize| -> Vec<usize> { (0..a.len()).filter(|&u| a[u] as usize == j).collect() };
    for _ in 0..iterations {
        let centroids: Vec<_> = (0..k)
            .map(|j| dense_centroid(&members(&assignment, j), profiles, n_items, n_tags))
            .collect();
        let mut next = vec![0; profiles.len()];
        for (u, p) in profiles.iter().enumerate() {
            let vi = dense(&p.items, n_items);
            let vt = dense(&p.tags, n_tags);
            let mut best = (0usize, f64::NEG_INFINITY);
            for (j, c) in centroids.iter().enumerate() {
                let sim = match c {
                    None => -1.0,
                    Some((ci, ct)) => gamma * dense_cos(&vi, ci) + (1.0 - gamma) * dense_cos(&vt, ct),
                };
                if sim > best.1 {
                    best = (j, sim);
                }
            }
            next[u] = best.0 as u32;
        }
        assignment = next;
    }
    let centroids = (0..k)
        .map(|j| dense_centroid(&members(&assignment, j), profiles, n_items, n_tags))
        .collect();
    let item_clusters = (0..k)
        .map(|j| {
            let mut items: Vec<u32> = members(&assignment, j)
                .into_iter()
                .flat_map(|u| profiles[u].items.iter().copied())
                .collect::<HashSet<_>>()
                .into_iter()
                .collect();
            items.sort();
            items
        })
        .collect();
    NaiveClustering {
        assignment,
        centroids,
        item_clusters,
    }
}

/// (recall, precision, hits) by direct counting with hash sets.
pub fn naive_metrics(lists: &[Vec<u32>], test: &[Vec<u32>], k: usize) -> (f64, f64, u64) {
    let mut recall = 0.0;
    let mut precision = 0.0;
    let mut total_hits = 0u64;
    for (list, t) in lists.iter().zip(test) {
        let top: HashSet<u32> = list.iter().take(k).copied().collect();
        let truth: HashSet<u32> = t.iter().copied().collect();
        let hits = top.intersection(&truth).count();
        total_hits += hits as u64;
        recall += hits as f64 / truth.len() as f64;
        precision += hits as f64 / k as f64;
    }
    let n = lists.len() as f64;
    (recall / n, precision / n, total_hits)
}

pub fn test_sets(raw: &[Vec<u32>]) -> Vec<TestSet> {
    raw.iter()
        .map(|t| {
            let mut items = t.clone();
            items.sort();
            items.dedup();
            TestSet { items }
        })
        .collect()
}
