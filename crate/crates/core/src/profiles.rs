//! Binary user profiles and the cosine-based similarity kernels.
//!
//! All cosines are evaluated as `dot / sqrt(|a|² · |b|²)` with the dot
//! product accumulated in ascending index order. Binary sets and sparse
//! vectors holding the same 0/1 data therefore produce bit-identical results,
//! and a binary set compared with itself yields exactly 1.

use crate::corpus::TripartiteGraph;
use crate::error::{Error, Result};
use crate::{ItemIx, TagIx, UserIx};

/// A user's item and tag sets, sorted and distinct.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UserProfile {
    pub items: Vec<ItemIx>,
    pub tags: Vec<TagIx>,
}

impl UserProfile {
    pub fn new(mut items: Vec<ItemIx>, mut tags: Vec<TagIx>) -> Self {
        items.sort_unstable();
        items.dedup();
        tags.sort_unstable();
        tags.dedup();
        UserProfile { items, tags }
    }

    pub fn has_item(&self, item: ItemIx) -> bool {
        self.items.binary_search(&item).is_ok()
    }
}

/// Profiles indexed by user.
pub fn build_profiles(train: &TripartiteGraph) -> Vec<UserProfile> {
    (0..train.n_users() as UserIx)
        .map(|u| UserProfile {
            items: train.user_items(u).to_vec(),
            tags: train.user_tags(u).to_vec(),
        })
        .collect()
}

/// A sparse vector with non-negative entries at strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn new(entries: Vec<(u32, f64)>) -> Result<Self> {
        let mut indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("entry {i} = {v} is not a finite non-negative value")));
            }
            if indices.last().is_some_and(|&last| last >= i) {
                return Err(Error::config("sparse indices must be strictly increasing"));
            }
            if v > 0.0 {
                indices.push(i);
                values.push(v);
            }
        }
        Ok(SparseVector { indices, values })
    }

    /// The 0/1 indicator vector of a sorted, distinct index set.
    pub fn binary(set: &[u32]) -> Self {
        SparseVector {
            indices: set.to_vec(),
            values: vec![1.0; set.len()],
        }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, index: u32) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

/// `dot / sqrt(na · nb)`, 0 when either norm is zero, capped at 1.
#[inline]
pub(crate) fn normalize(dot: f64, norm_sq_a: f64, norm_sq_b: f64) -> f64 {
    if norm_sq_a == 0.0 || norm_sq_b == 0.0 {
        return 0.0;
    }
    (dot / (norm_sq_a * norm_sq_b).sqrt()).min(1.0)
}

pub fn cosine(a: &SparseVector, b: &SparseVector) -> f64 {
    normalize(a.dot(b), a.norm_sq(), b.norm_sq())
}

pub(crate) fn intersection_size(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Cosine of two sorted, distinct index sets viewed as 0/1 vectors:
/// `|A ∩ B| / sqrt(|A| |B|)`.
pub fn binary_cosine(a: &[u32], b: &[u32]) -> f64 {
    normalize(intersection_size(a, b) as f64, a.len() as f64, b.len() as f64)
}

/// `beta · cos(items) + (1 - beta) · cos(tags)`.
pub fn user_similarity(u: &UserProfile, v: &UserProfile, beta: f64) -> f64 {
    beta * binary_cosine(&u.items, &v.items) + (1.0 - beta) * binary_cosine(&u.tags, &v.tags)
}

/// Mixing weights for the combined similarity.
///
/// `beta` weighs the item side against the tag side; `generalized` carries
/// one weight per named feature for [`multi_feature_similarity`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWeights {
    pub beta: f64,
    pub generalized: Vec<(String, f64)>,
}

impl FeatureWeights {
    /// The two-feature (items, tags) weighting `(beta, 1 - beta)`.
    pub fn pair(beta: f64) -> Result<Self> {
        check_unit("beta", beta)?;
        Ok(FeatureWeights {
            beta,
            generalized: vec![("items".into(), beta), ("tags".into(), 1.0 - beta)],
        })
    }

    /// Arbitrary named weights; each must lie in [0, 1] and they must sum to 1
    /// within 1e-9. `beta` is set to the first weight.
    pub fn new(weights: Vec<(String, f64)>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::config("at least one feature weight is required"));
        }
        for (name, w) in &weights {
            check_unit(name, *w)?;
        }
        let sum: f64 = weights.iter().map(|(_, w)| w).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("feature weights sum to {sum}, expected 1")));
        }
        Ok(FeatureWeights {
            beta: weights[0].1,
            generalized: weights,
        })
    }

    pub fn len(&self) -> usize {
        self.generalized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generalized.is_empty()
    }
}

pub(crate) fn check_unit(name: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::config(format!("{name} = {value} is outside [0, 1]")))
    }
}

/// `Σ_k w_k · cos(f_k(u), f_k(v))` over any number of feature vectors.
pub fn multi_feature_similarity(
    features_u: &[SparseVector],
    features_v: &[SparseVector],
    weights: &FeatureWeights,
) -> Result<f64> {
    if features_u.len() != weights.len() || features_v.len() != weights.len() {
        return Err(Error::config(format!(
            "feature count mismatch: {} and {} vectors for {} weights",
            features_u.len(),
            features_v.len(),
            weights.len()
        )));
    }
    let sum: f64 = weights.generalized.iter().map(|(_, w)| w).sum();
    if (sum - 1.0).abs() > 1e-9 || weights.generalized.iter().any(|(_, w)| !(0.0..=1.0).contains(w)) {
        return Err(Error::config("feature weights must lie in [0, 1] and sum to 1"));
    }
    let mut acc = 0.0;
    for ((a, b), (_, w)) in features_u.iter().zip(features_v).zip(&weights.generalized) {
        acc += w * cosine(a, b);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_graph, Interaction};
    use proptest::prelude::*;

    fn sv(set: &[u32]) -> SparseVector {
        SparseVector::binary(set)
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&sv(&[1, 2, 3]), &sv(&[1, 2, 3])), 1.0);
        assert_eq!(cosine(&sv(&[1, 2]), &sv(&[3, 4])), 0.0);
        assert_eq!(cosine(&sv(&[1, 2]), &sv(&[1, 3])), 0.5);
        assert_eq!(binary_cosine(&[1, 2], &[1, 3]), 0.5);
    }

    #[test]
    fn cosine_of_zero_vector_is_zero() {
        assert_eq!(cosine(&SparseVector::default(), &sv(&[1])), 0.0);
        assert_eq!(binary_cosine(&[], &[]), 0.0);
    }

    #[test]
    fn sparse_vector_validation() {
        assert!(SparseVector::new(vec![(2, 1.0), (1, 1.0)]).is_err());
        assert!(SparseVector::new(vec![(1, -0.5)]).is_err());
        assert!(SparseVector::new(vec![(1, f64::NAN)]).is_err());
        let v = SparseVector::new(vec![(1, 0.0), (3, 2.0)]).unwrap();
        assert_eq!(v.nnz(), 1);
        assert_eq!(v.get(3), 2.0);
        assert_eq!(v.get(1), 0.0);
    }

    #[test]
    fn build_profiles_copies_projections() {
        let g = build_graph(&[
            Interaction::new("u1", "r1", "t1", 1),
            Interaction::new("u1", "r2", "t1", 2),
            Interaction::new("u2", "r1", "t2", 3),
        ]);
        let p = build_profiles(&g);
        assert_eq!(p[0], UserProfile { items: vec![0, 1], tags: vec![0] });
        assert_eq!(p[1], UserProfile { items: vec![0], tags: vec![1] });
        assert!(build_profiles(&build_graph(&[])).is_empty());
    }

    #[test]
    fn user_similarity_examples() {
        let u = UserProfile::new(vec![1, 2], vec![1, 2, 3, 4]);
        let v = UserProfile::new(vec![1, 3], vec![1, 5, 6, 7]);
        // item cosine 1/2, tag cosine 1/4
        assert_eq!(user_similarity(&u, &v, 0.5), 0.375);
        assert_eq!(user_similarity(&u, &v, 1.0), 0.5);
        assert_eq!(user_similarity(&u, &u, 0.3), 1.0);
    }

    #[test]
    fn multi_feature_examples() {
        let w = FeatureWeights::new(vec![("a".into(), 0.2), ("b".into(), 0.3), ("c".into(), 0.5)]).unwrap();
        // cosines 1, 0 and 0.4
        let u = vec![sv(&[1]), sv(&[1]), SparseVector::new(vec![(0, 2.0), (1, 1.0)]).unwrap()];
        let v = vec![sv(&[1]), sv(&[2]), SparseVector::new(vec![(1, 1.0)]).unwrap()];
        let c3 = cosine(&u[2], &v[2]);
        assert!((c3 - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        let got = multi_feature_similarity(&u, &v, &w).unwrap();
        assert!((got - (0.2 + 0.5 * c3)).abs() < 1e-15);

        let u = vec![sv(&[1, 2, 3]), sv(&[1, 2]), sv(&[1, 2, 3, 4, 5])];
        let v = vec![sv(&[1, 2, 3]), sv(&[3]), sv(&[1, 2])];
        // third cosine = 2 / sqrt(10)
        let expected = 0.2 * 1.0 + 0.3 * 0.0 + 0.5 * (2.0 / 10f64.sqrt());
        assert!((multi_feature_similarity(&u, &v, &w).unwrap() - expected).abs() < 1e-15);

        let one = FeatureWeights::new(vec![("x".into(), 1.0)]).unwrap();
        let a = SparseVector::new(vec![(0, 0.3), (4, 1.2)]).unwrap();
        let b = SparseVector::new(vec![(4, 0.7)]).unwrap();
        assert_eq!(multi_feature_similarity(std::slice::from_ref(&a), std::slice::from_ref(&b), &one).unwrap(), cosine(&a, &b));
    }

    #[test]
    fn multi_feature_hits_the_stated_value() {
        // Per-feature cosines (1, 0, 0.4) with weights (0.2, 0.3, 0.5) give 0.4.
        let w = FeatureWeights::new(vec![("a".into(), 0.2), ("b".into(), 0.3), ("c".into(), 0.5)]).unwrap();
        let f3u = SparseVector::new(vec![(0, 0.4), (1, (1.0f64 - 0.16).sqrt())]).unwrap();
        let f3v = SparseVector::new(vec![(0, 1.0)]).unwrap();
        let u = vec![sv(&[7]), sv(&[1]), f3u];
        let v = vec![sv(&[7]), sv(&[2]), f3v];
        let got = multi_feature_similarity(&u, &v, &w).unwrap();
        assert!((got - 0.4).abs() < 1e-12, "{got}");
    }

    #[test]
    fn multi_feature_errors() {
        let w = FeatureWeights::pair(0.5).unwrap();
        assert!(multi_feature_similarity(&[sv(&[1])], &[sv(&[1])], &w).is_err());
        assert!(FeatureWeights::new(vec![("a".into(), 0.5), ("b".into(), 0.6)]).is_err());
        assert!(FeatureWeights::new(vec![("a".into(), 1.5), ("b".into(), -0.5)]).is_err());
        assert!(FeatureWeights::pair(1.1).is_err());
        let bad = FeatureWeights { beta: 0.5, generalized: vec![("a".into(), 0.7), ("b".into(), 0.7)] };
        assert!(multi_feature_similarity(&[sv(&[1]), sv(&[1])], &[sv(&[1]), sv(&[1])], &bad).is_err());
    }

    fn set_strategy() -> impl Strategy<Value = Vec<u32>> {
        proptest::collection::btree_set(0u32..30, 0..12).prop_map(|s| s.into_iter().collect())
    }

    fn profile_strategy() -> impl Strategy<Value = UserProfile> {
        (set_strategy(), set_strategy()).prop_map(|(i, t)| UserProfile::new(i, t))
    }

    proptest! {
        #[test]
        fn similarity_symmetric_and_bounded(u in profile_strategy(), v in profile_strategy(), beta in 0.0f64..=1.0) {
            let a = user_similarity(&u, &v, beta);
            let b = user_similarity(&v, &u, beta);
            prop_assert_eq!(a.to_bits(), b.to_bits());
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn self_similarity_is_one(u in profile_strategy(), beta in 0.0f64..=1.0) {
            prop_assume!(!u.items.is_empty() && !u.tags.is_empty());
            prop_assert_eq!(user_similarity(&u, &u, beta), 1.0);
        }

        #[test]
        fn specialization_chain_is_exact(u in profile_strategy(), v in profile_strategy(), beta in 0.0f64..=1.0) {
            let w = FeatureWeights::pair(beta).unwrap();
            let fu = [SparseVector::binary(&u.items), SparseVector::binary(&u.tags)];
            let fv = [SparseVector::binary(&v.items), SparseVector::binary(&v.tags)];
            let multi = multi_feature_similarity(&fu, &fv, &w).unwrap();
            let pair = user_similarity(&u, &v, beta);
            let direct = beta * cosine(&fu[0], &fv[0]) + (1.0 - beta) * cosine(&fu[1], &fv[1]);
            prop_assert_eq!(multi.to_bits(), pair.to_bits());
            prop_assert_eq!(pair.to_bits(), direct.to_bits());
        }
    }
}
