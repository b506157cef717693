//! Ranklists from the user-based collaborative filtering score.
//!
//! An item's score for a target user is the sum of the target's similarity
//! to every neighbour who has the item; items the target already has are
//! never candidates. The global baseline uses all users as neighbours and
//! all items as candidates. The clustered variant restricts both to the
//! target's user cluster and that cluster's item pool.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;

use crate::clustering::{cluster_tag_count, Clustering};
use crate::corpus::TripartiteGraph;
use crate::profiles::{user_similarity, UserProfile};
use crate::{ItemIx, UserIx};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankOptions {
    /// Weight of the item-side cosine in the user similarity.
    pub beta: f64,
    /// Maximum ranklist length.
    pub k: usize,
    /// Pad short lists with zero-score candidates in index order.
    pub keep_zero_scores: bool,
}

impl RankOptions {
    pub fn new(beta: f64, k: usize) -> Self {
        RankOptions {
            beta,
            k,
            keep_zero_scores: true,
        }
    }
}

/// A user's recommendations, best first; ties by ascending item index.
#[derive(Debug, Clone, PartialEq)]
pub struct RankList {
    pub user: UserIx,
    pub entries: Vec<(ItemIx, f64)>,
}

impl RankList {
    pub fn items(&self) -> impl Iterator<Item = ItemIx> + '_ {
        self.entries.iter().map(|&(i, _)| i)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Score of `item` for `target` against a neighbour set: -1 if the target
/// already has the item, otherwise the summed similarity of the neighbours
/// that have it.
pub fn score(
    target: UserIx,
    item: ItemIx,
    neighbors: &[UserIx],
    profiles: &[UserProfile],
    beta: f64,
) -> f64 {
    let me = &profiles[target as usize];
    if me.has_item(item) {
        return -1.0;
    }
    neighbors
        .iter()
        .filter(|&&s| s != target && profiles[s as usize].has_item(item))
        .map(|&s| user_similarity(me, &profiles[s as usize], beta))
        .sum()
}

fn by_score_then_item(a: &(ItemIx, f64), b: &(ItemIx, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

struct Scratch {
    acc: Vec<f64>,
    touched: Vec<ItemIx>,
}

/// Ranks `candidates` (ascending) for each target using `neighbors`
/// (ascending). Every item any neighbour has must be a candidate.
fn rank_group(
    targets: &[UserIx],
    neighbors: &[UserIx],
    candidates: &[ItemIx],
    n_items: usize,
    profiles: &[UserProfile],
    opts: RankOptions,
) -> Vec<RankList> {
    targets
        .par_iter()
        .map_init(
            || Scratch {
                acc: vec![0.0; n_items],
                touched: Vec::new(),
            },
            |scratch, &u| rank_one(u, neighbors, candidates, profiles, opts, scratch),
        )
        .collect()
}

fn rank_one(
    target: UserIx,
    neighbors: &[UserIx],
    candidates: &[ItemIx],
    profiles: &[UserProfile],
    opts: RankOptions,
    scratch: &mut Scratch,
) -> RankList {
    let me = &profiles[target as usize];
    let Scratch { acc, touched } = scratch;

    // Similarities are positive here, so a zero accumulator means untouched.
    for &s in neighbors {
        if s == target {
            continue;
        }
        let theirs = &profiles[s as usize];
        let sim = user_similarity(me, theirs, opts.beta);
        if sim <= 0.0 {
            continue;
        }
        for &i in &theirs.items {
            let slot = &mut acc[i as usize];
            if *slot == 0.0 {
                touched.push(i);
            }
            *slot += sim;
        }
    }

    let mut entries: Vec<(ItemIx, f64)> = touched
        .iter()
        .filter(|&&i| !me.has_item(i))
        .map(|&i| (i, acc[i as usize]))
        .collect();
    if entries.len() > opts.k && opts.k > 0 {
        entries.select_nth_unstable_by(opts.k - 1, by_score_then_item);
    }
    entries.truncate(opts.k);
    entries.sort_unstable_by(by_score_then_item);

    if opts.keep_zero_scores && entries.len() < opts.k {
        let missing = opts.k - entries.len();
        entries.extend(
            candidates
                .iter()
                .filter(|&&i| acc[i as usize] == 0.0 && !me.has_item(i))
                .take(missing)
                .map(|&i| (i, 0.0)),
        );
    }

    for &i in touched.iter() {
        acc[i as usize] = 0.0;
    }
    touched.clear();

    RankList {
        user: target,
        entries,
    }
}

/// Global baseline: every user ranks every item they lack, scored against
/// all other users. Indexed by user.
pub fn rank_ucf(train: &TripartiteGraph, profiles: &[UserProfile], opts: RankOptions) -> Vec<RankList> {
    let users: Vec<UserIx> = (0..profiles.len() as UserIx).collect();
    let items: Vec<ItemIx> = (0..train.n_items() as ItemIx).collect();
    rank_group(&users, &users, &items, train.n_items(), profiles, opts)
}

/// Clustered variant: each user ranks only their cluster's item pool,
/// scored against their cluster's members. Indexed by user.
pub fn rank_fcum(
    clustering: &Clustering,
    train: &TripartiteGraph,
    profiles: &[UserProfile],
    opts: RankOptions,
) -> Vec<RankList> {
    let mut out: Vec<Option<RankList>> = vec![None; profiles.len()];
    for (members, pool) in clustering.user_clusters.iter().zip(&clustering.item_clusters) {
        if members.is_empty() {
            continue;
        }
        for list in rank_group(members, members, pool, train.n_items(), profiles, opts) {
            let user = list.user as usize;
            out[user] = Some(list);
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(u, list)| {
            list.unwrap_or_else(|| RankList {
                user: u as UserIx,
                entries: Vec::new(),
            })
        })
        .collect()
}

/// Baseline cost `N_U (N_U N_R + N_T)`.
pub fn ucf_work(n_users: usize, n_items: usize, n_tags: usize) -> u64 {
    let (nu, nr, nt) = (n_users as u64, n_items as u64, n_tags as u64);
    nu.saturating_mul(nu.saturating_mul(nr).saturating_add(nt))
}

/// Clustered cost `Σ_j N_j (N_j R_j + T_j)` over user clusters `j` with
/// item pool size `R_j` and tag count `T_j`.
pub fn fcum_work(clustering: &Clustering, profiles: &[UserProfile]) -> u64 {
    (0..clustering.k)
        .map(|j| {
            let n = clustering.user_clusters[j].len() as u64;
            let r = clustering.item_clusters[j].len() as u64;
            let t = cluster_tag_count(clustering, profiles, j) as u64;
            n.saturating_mul(n.saturating_mul(r).saturating_add(t))
        })
        .fold(0u64, u64::saturating_add)
}

/// `user<TAB>rank<TAB>item<TAB>score` lines; ranks start at 1 and scores
/// have six decimals.
pub fn write_ranklists<W: Write>(mut w: W, lists: &[RankList], train: &TripartiteGraph) -> std::io::Result<()> {
    for list in lists {
        let user = train.user_id(list.user);
        for (rank, &(item, score)) in list.entries.iter().enumerate() {
            writeln!(w, "{user}\t{}\t{}\t{score:.6}", rank + 1, train.item_id(item))?;
        }
    }
    w.flush()
}
