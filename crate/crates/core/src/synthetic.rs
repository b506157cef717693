//! Planted-community triple generator.
//!
//! Users, items and tags are each cut into `n_communities` contiguous
//! blocks. Every triple a user emits draws its item and its tag from the
//! user's own block with probability `in_community_prob`, and uniformly
//! from outside the block otherwise. Inside a block, popularity follows a
//! Zipf-like law `1 / (rank + 1)^popularity_exponent` so collaborative
//! signal exists beyond community membership. The triples are shuffled and
//! stamped with consecutive timestamps.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Interaction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub n_tags: usize,
    pub n_communities: usize,
    pub triples_per_user: usize,
    pub in_community_prob: f64,
    pub popularity_exponent: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// The default benchmark corpus: about 192k triples over 1600 users.
    pub fn benchmark(seed: u64) -> Self {
        SyntheticSpec {
            n_users: 1600,
            n_items: 20000,
            n_tags: 5000,
            n_communities: 16,
            triples_per_user: 120,
            in_community_prob: 0.85,
            popularity_exponent: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let smallest = self.n_users.min(self.n_items).min(self.n_tags);
        if self.n_communities == 0 || self.n_communities > smallest {
            return Err(Error::config(format!(
                "n_communities must be in [1, {smallest}], got {}",
                self.n_communities
            )));
        }
        if self.triples_per_user == 0 {
            return Err(Error::config("triples_per_user must be at least 1"));
        }
        let p = self.in_community_prob;
        if !(0.0..=1.0).contains(&p) || p < 1.0 / self.n_communities as f64 {
            return Err(Error::config(format!(
                "in_community_prob {p} must lie in [1/n_communities, 1]"
            )));
        }
        if !(self.popularity_exponent >= 0.0 && self.popularity_exponent.is_finite()) {
            return Err(Error::config("popularity_exponent must be finite and non-negative"));
        }
        Ok(())
    }
}

fn block(index: usize, total: usize, blocks: usize) -> usize {
    index * blocks / total
}

fn block_range(b: usize, total: usize, blocks: usize) -> std::ops::Range<usize> {
    // Inverse of `block`: the smallest index mapping to b, up to that of b + 1.
    let start = (b * total).div_ceil(blocks);
    let end = ((b + 1) * total).div_ceil(blocks);
    start..end
}

struct Pools {
    ranges: Vec<std::ops::Range<usize>>,
    popularity: Vec<WeightedIndex<f64>>,
    total: usize,
}

impl Pools {
    fn new(total: usize, blocks: usize, exponent: f64) -> Self {
        let ranges: Vec<_> = (0..blocks).map(|b| block_range(b, total, blocks)).collect();
        let popularity = ranges
            .iter()
            .map(|r| {
                WeightedIndex::new((0..r.len()).map(|rank| 1.0 / ((rank + 1) as f64).powf(exponent)))
                    .expect("non-empty block with positive weights")
            })
            .collect();
        Pools {
            ranges,
            popularity,
            total,
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R, community: usize, in_prob: f64) -> usize {
        let range = &self.ranges[community];
        let outside = self.total - range.len();
        if outside == 0 || rng.gen_bool(in_prob) {
            range.start + self.popularity[community].sample(rng)
        } else {
            let pick = rng.gen_range(0..outside);
            if pick < range.start {
                pick
            } else {
                pick + range.len()
            }
        }
    }
}

/// Generates the corpus in timestamp order. Deterministic in `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<Interaction>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let c = spec.n_communities;
    let items = Pools::new(spec.n_items, c, spec.popularity_exponent);
    let tags = Pools::new(spec.n_tags, c, spec.popularity_exponent);

    let mut triples = Vec::with_capacity(spec.n_users * spec.triples_per_user);
    for u in 0..spec.n_users {
        let community = block(u, spec.n_users, c);
        for _ in 0..spec.triples_per_user {
            let item = items.draw(&mut rng, community, spec.in_community_prob);
            let tag = tags.draw(&mut rng, community, spec.in_community_prob);
            triples.push((u, item, tag));
        }
    }
    triples.shuffle(&mut rng);

    Ok(triples
        .into_iter()
        .enumerate()
        .map(|(ts, (u, i, t))| Interaction::new(format!("u{u}"), format!("r{i}"), format!("t{t}"), ts as u64 + 1))
        .collect())
}

/// Community of user `u` under `spec`'s block layout.
pub fn user_community(spec: &SyntheticSpec, user: usize) -> usize {
    block(user, spec.n_users, spec.n_communities)
}

/// Community owning item `i` under `spec`'s block layout.
pub fn item_community(spec: &SyntheticSpec, item: usize) -> usize {
    block(item, spec.n_items, spec.n_communities)
}
