//! Coarse K-means over users.
//!
//! Users start in a balanced random partition. Each iteration recomputes
//! every centroid from the current partition (the mean of the members'
//! binary item and tag vectors) and then moves every user to the centroid
//! with the highest combined cosine. The loop runs a fixed, small number of
//! times and never checks for convergence. Each cluster's item pool is the
//! union of its members' items, so item pools may overlap while user
//! clusters never do.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::TripartiteGraph;
use crate::error::{Error, Result};
use crate::profiles::{check_unit, normalize, SparseVector, UserProfile};
use crate::{ItemIx, UserIx};

/// Mean of the members' binary item and tag vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroid {
    pub item_part: SparseVector,
    pub tag_part: SparseVector,
    item_norm_sq: f64,
    tag_norm_sq: f64,
}

impl Centroid {
    fn from_parts(item_part: SparseVector, tag_part: SparseVector) -> Self {
        Centroid {
            item_norm_sq: item_part.norm_sq(),
            tag_norm_sq: tag_part.norm_sq(),
            item_part,
            tag_part,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub k: usize,
    /// Cluster of each user.
    pub assignment: Vec<u32>,
    /// Members of each cluster, ascending.
    pub user_clusters: Vec<Vec<UserIx>>,
    /// Union of the members' items for each cluster, ascending.
    pub item_clusters: Vec<Vec<ItemIx>>,
    /// Centroid of each cluster's final membership; `None` for empty clusters.
    pub centroids: Vec<Option<Centroid>>,
    pub iterations_run: usize,
}

impl Clustering {
    /// Derives member lists, item pools and centroids from an assignment.
    pub fn from_assignment(
        k: usize,
        assignment: Vec<u32>,
        profiles: &[UserProfile],
        iterations_run: usize,
    ) -> Self {
        assert_eq!(assignment.len(), profiles.len(), "one label per user");
        let user_clusters = members_of(k, &assignment);
        let item_clusters = user_clusters
            .iter()
            .map(|members| union_of(members.iter().map(|&u| profiles[u as usize].items.as_slice())))
            .collect();
        let centroids = user_clusters
            .iter()
            .map(|members| compute_centroid(members, profiles))
            .collect();
        Clustering {
            k,
            assignment,
            user_clusters,
            item_clusters,
            centroids,
            iterations_run,
        }
    }

    /// Every user in cluster 0.
    pub fn single(profiles: &[UserProfile]) -> Self {
        Clustering::from_assignment(1, vec![0; profiles.len()], profiles, 0)
    }

    pub fn non_empty_clusters(&self) -> usize {
        self.user_clusters.iter().filter(|c| !c.is_empty()).count()
    }

    /// `user_external_id<TAB>cluster_index` lines, in user index order.
    pub fn write_assignment<W: Write>(&self, mut w: W, train: &TripartiteGraph) -> std::io::Result<()> {
        for (u, c) in self.assignment.iter().enumerate() {
            writeln!(w, "{}\t{}", train.user_id(u as UserIx), c)?;
        }
        w.flush()
    }
}

fn members_of(k: usize, assignment: &[u32]) -> Vec<Vec<UserIx>> {
    let mut clusters = vec![Vec::new(); k];
    for (u, &c) in assignment.iter().enumerate() {
        clusters[c as usize].push(u as UserIx);
    }
    clusters
}

fn union_of<'a>(sets: impl Iterator<Item = &'a [u32]>) -> Vec<u32> {
    let mut all: Vec<u32> = sets.flatten().copied().collect();
    all.sort_unstable();
    all.dedup();
    all
}

/// `round(n_users / avg_cluster_size)`, clamped to `[1, n_users]`.
pub fn choose_k(n_users: usize, avg_cluster_size: usize) -> usize {
    let avg = avg_cluster_size.max(1);
    let k = (n_users as f64 / avg as f64).round() as usize;
    k.clamp(1, n_users.max(1))
}

/// A seeded uniform permutation of the users dealt round-robin into `k`
/// clusters, so sizes differ by at most one.
pub fn init_assignment(n_users: usize, k: usize, seed: u64) -> Vec<u32> {
    assert!(k >= 1, "need at least one cluster");
    let mut order: Vec<usize> = (0..n_users).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n_users];
    for (pos, &u) in order.iter().enumerate() {
        assignment[u] = (pos % k) as u32;
    }
    assignment
}

fn mean_vector<'a>(sets: impl Iterator<Item = &'a [u32]>, n: usize) -> SparseVector {
    let mut all: Vec<u32> = sets.flatten().copied().collect();
    all.sort_unstable();
    let mut entries: Vec<(u32, f64)> = Vec::new();
    let mut run_start = 0;
    while run_start < all.len() {
        let idx = all[run_start];
        let run_end = run_start + all[run_start..].iter().take_while(|&&x| x == idx).count();
        entries.push((idx, (run_end - run_start) as f64 / n as f64));
        run_start = run_end;
    }
    SparseVector::new(entries).expect("sorted positive entries")
}

/// Sparse mean of the members' profiles; `None` for an empty cluster.
pub fn compute_centroid(members: &[UserIx], profiles: &[UserProfile]) -> Option<Centroid> {
    if members.is_empty() {
        return None;
    }
    let n = members.len();
    let items = mean_vector(members.iter().map(|&u| profiles[u as usize].items.as_slice()), n);
    let tags = mean_vector(members.iter().map(|&u| profiles[u as usize].tags.as_slice()), n);
    Some(Centroid::from_parts(items, tags))
}

/// Dot product of a 0/1 set with a sparse vector, summed in index order.
fn set_dot(set: &[u32], v: &SparseVector) -> f64 {
    let (idx, vals) = (v.indices(), v.values());
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < set.len() && j < idx.len() {
        match set[i].cmp(&idx[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += vals[j];
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// `gamma · cos(items, centroid items) + (1 - gamma) · cos(tags, centroid tags)`,
/// or -1 for an absent centroid.
pub fn user_centroid_similarity(u: &UserProfile, c: Option<&Centroid>, gamma: f64) -> f64 {
    let Some(c) = c else {
        return -1.0;
    };
    let item_cos = normalize(set_dot(&u.items, &c.item_part), u.items.len() as f64, c.item_norm_sq);
    let tag_cos = normalize(set_dot(&u.tags, &c.tag_part), u.tags.len() as f64, c.tag_norm_sq);
    gamma * item_cos + (1.0 - gamma) * tag_cos
}

/// Number of distinct tags used by the members of cluster `j`.
pub fn cluster_tag_count(clustering: &Clustering, profiles: &[UserProfile], j: usize) -> usize {
    union_of(
        clustering.user_clusters[j]
            .iter()
            .map(|&u| profiles[u as usize].tags.as_slice()),
    )
    .len()
}

/// Number of distinct items in cluster `j`'s pool.
pub fn cluster_item_count(clustering: &Clustering, j: usize) -> usize {
    clustering.item_clusters[j].len()
}

/// Centroid coordinates inverted by index: `postings[i]` lists the
/// `(cluster, weight)` pairs of every centroid with a non-zero entry at `i`,
/// in cluster order.
struct Postings {
    items: Vec<Vec<(u32, f64)>>,
    tags: Vec<Vec<(u32, f64)>>,
    item_norm_sq: Vec<f64>,
    tag_norm_sq: Vec<f64>,
    present: Vec<bool>,
}

impl Postings {
    fn build(centroids: &[Option<Centroid>], n_items: usize, n_tags: usize) -> Self {
        let mut p = Postings {
            items: vec![Vec::new(); n_items],
            tags: vec![Vec::new(); n_tags],
            item_norm_sq: vec![0.0; centroids.len()],
            tag_norm_sq: vec![0.0; centroids.len()],
            present: vec![false; centroids.len()],
        };
        for (j, c) in centroids.iter().enumerate() {
            let Some(c) = c else { continue };
            p.present[j] = true;
            p.item_norm_sq[j] = c.item_norm_sq;
            p.tag_norm_sq[j] = c.tag_norm_sq;
            for (i, w) in c.item_part.iter() {
                p.items[i as usize].push((j as u32, w));
            }
            for (t, w) in c.tag_part.iter() {
                p.tags[t as usize].push((j as u32, w));
            }
        }
        p
    }

    /// Best cluster for `u`; ties go to the lowest index.
    fn best_cluster(&self, u: &UserProfile, gamma: f64, item_dot: &mut [f64], tag_dot: &mut [f64]) -> u32 {
        item_dot.fill(0.0);
        tag_dot.fill(0.0);
        for &i in &u.items {
            for &(j, w) in &self.items[i as usize] {
                item_dot[j as usize] += w;
            }
        }
        for &t in &u.tags {
            for &(j, w) in &self.tags[t as usize] {
                tag_dot[j as usize] += w;
            }
        }
        let (ni, nt) = (u.items.len() as f64, u.tags.len() as f64);
        let mut best = 0;
        let mut best_sim = f64::NEG_INFINITY;
        for j in 0..self.present.len() {
            let sim = if self.present[j] {
                gamma * normalize(item_dot[j], ni, self.item_norm_sq[j])
                    + (1.0 - gamma) * normalize(tag_dot[j], nt, self.tag_norm_sq[j])
            } else {
                -1.0
            };
            if sim > best_sim {
                best_sim = sim;
                best = j as u32;
            }
        }
        best
    }
}

/// Coarse clustering of all users in `profiles` into `k` clusters.
///
/// Runs exactly `iterations` rounds of batch centroid update followed by
/// reassignment. Empty clusters keep an absent centroid and are never
/// re-seeded.
pub fn coarse_cluster(
    profiles: &[UserProfile],
    k: usize,
    iterations: usize,
    gamma: f64,
    seed: u64,
) -> Result<Clustering> {
    if k == 0 {
        return Err(Error::config("number of clusters must be at least 1"));
    }
    if iterations == 0 {
        return Err(Error::config("iterations must be at least 1"));
    }
    check_unit("gamma", gamma)?;

    let initial = init_assignment(profiles.len(), k, seed);
    refine_clusters(profiles, k, initial, iterations, gamma)
}

/// The iteration loop of [`coarse_cluster`], starting from a given partition.
pub fn refine_clusters(
    profiles: &[UserProfile],
    k: usize,
    initial: Vec<u32>,
    iterations: usize,
    gamma: f64,
) -> Result<Clustering> {
    if initial.len() != profiles.len() || initial.iter().any(|&c| c as usize >= k) {
        return Err(Error::config("initial assignment must label every user with a cluster below k"));
    }
    check_unit("gamma", gamma)?;
    let n_items = profiles.iter().filter_map(|p| p.items.last()).max().map_or(0, |&m| m as usize + 1);
    let n_tags = profiles.iter().filter_map(|p| p.tags.last()).max().map_or(0, |&m| m as usize + 1);

    let mut assignment = initial;
    for _ in 0..iterations {
        let members = members_of(k, &assignment);
        let centroids: Vec<Option<Centroid>> = members
            .par_iter()
            .map(|m| compute_centroid(m, profiles))
            .collect();
        let postings = Postings::build(&centroids, n_items, n_tags);
        assignment = profiles
            .par_iter()
            .map_init(
                || (vec![0.0; k], vec![0.0; k]),
                |(item_dot, tag_dot), u| postings.best_cluster(u, gamma, item_dot, tag_dot),
            )
            .collect();
    }
    Ok(Clustering::from_assignment(k, assignment, profiles, iterations))
}
