//! Coreference metrics: MUC, B³, CEAF_e and their CoNLL average.

mod assignment;
mod eval;

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::corpus::Clustering;
use crate::error::{Error, Result};

pub use assignment::{assignment_value, exhaustive_assignment, max_weight_assignment};
pub use eval::{evaluate, evaluate_units, EvalOptions, EvalReport, Granularity, UnitScores};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricScore {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        MetricScore { precision, recall, f1 }
    }
}

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn check_universe(key: &Clustering, response: &Clustering) -> Result<()> {
    if let Some(m) = key.mention_ids().find(|m| !response.contains(m)) {
        return Err(Error::UncoveredMention(m.to_string()));
    }
    if let Some(m) = response.mention_ids().find(|m| !key.contains(m)) {
        return Err(Error::UnknownMention(m.to_string()));
    }
    Ok(())
}

fn groups(c: &Clustering) -> Vec<BTreeSet<&str>> {
    c.clusters().into_values().map(|v| v.into_iter().collect()).collect()
}

/// Link-based recall of `key` against `partition`: Σ(|K| − |p(K)|) / Σ(|K| − 1).
fn muc_recall(key: &Clustering, partition: &Clustering) -> f64 {
    let mut num = 0usize;
    let mut den = 0usize;
    for members in key.clusters().values() {
        let parts: BTreeSet<&str> = members
            .iter()
            .map(|m| partition.cluster_of(m).expect("universe checked"))
            .collect();
        num += members.len() - parts.len();
        den += members.len() - 1;
    }
    ratio_or_zero(num as f64, den as f64)
}

pub fn muc(key: &Clustering, response: &Clustering) -> Result<MetricScore> {
    check_universe(key, response)?;
    Ok(MetricScore::from_pr(muc_recall(response, key), muc_recall(key, response)))
}

pub fn b_cubed(key: &Clustering, response: &Clustering) -> Result<MetricScore> {
    check_universe(key, response)?;
    let n = key.len();
    if n == 0 {
        return Ok(MetricScore::default());
    }
    let kc = key.clusters();
    let rc = response.clusters();
    let mut recall = 0.0;
    let mut precision = 0.0;
    for m in key.mention_ids() {
        let k: BTreeSet<&str> = kc[key.cluster_of(m).unwrap()].iter().copied().collect();
        let r: BTreeSet<&str> = rc[response.cluster_of(m).unwrap()].iter().copied().collect();
        let overlap = k.intersection(&r).count() as f64;
        recall += overlap / k.len() as f64;
        precision += overlap / r.len() as f64;
    }
    Ok(MetricScore::from_pr(precision / n as f64, recall / n as f64))
}

/// Entity similarity φ(K, R) = 2|K ∩ R| / (|K| + |R|), exact.
fn phi_matrix(key: &[BTreeSet<&str>], response: &[BTreeSet<&str>]) -> Vec<Vec<BigRational>> {
    key.iter()
        .map(|k| {
            response
                .iter()
                .map(|r| assignment::ratio(2 * k.intersection(r).count(), k.len() + r.len()))
                .collect()
        })
        .collect()
}

/// Optimal total entity similarity, exact. Kuhn–Munkres by default; the
/// exhaustive search is available for cross-checking small inputs.
pub fn ceaf_e_similarity(key: &Clustering, response: &Clustering, exhaustive: bool) -> Result<BigRational> {
    check_universe(key, response)?;
    let phi = phi_matrix(&groups(key), &groups(response));
    if exhaustive {
        return Ok(exhaustive_assignment(&phi).0);
    }
    let approx: Vec<Vec<f64>> = phi
        .iter()
        .map(|r| r.iter().map(|x| x.to_f64().unwrap_or(0.0)).collect())
        .collect();
    Ok(assignment_value(&phi, &max_weight_assignment(&approx)))
}

fn ceaf_from_similarity(total: &BigRational, key: &Clustering, response: &Clustering) -> MetricScore {
    let nk = key.clusters().len();
    let nr = response.clusters().len();
    if nk == 0 || nr == 0 || total.is_zero() {
        return MetricScore::default();
    }
    let r = (total / assignment::ratio(nk, 1)).to_f64().unwrap_or(0.0);
    let p = (total / assignment::ratio(nr, 1)).to_f64().unwrap_or(0.0);
    MetricScore::from_pr(p, r)
}

pub fn ceaf_e(key: &Clustering, response: &Clustering) -> Result<MetricScore> {
    let total = ceaf_e_similarity(key, response, false)?;
    Ok(ceaf_from_similarity(&total, key, response))
}

/// CEAF_e computed with the exhaustive assignment search.
pub fn ceaf_e_exhaustive(key: &Clustering, response: &Clustering) -> Result<MetricScore> {
    let total = ceaf_e_similarity(key, response, true)?;
    Ok(ceaf_from_similarity(&total, key, response))
}

/// Mean of the MUC, B³ and CEAF_e F1 values.
pub fn conll_f1(scores: &[MetricScore; 3]) -> f64 {
    scores.iter().map(|s| s.f1).sum::<f64>() / 3.0
}

/// Cluster sizes keyed by id, handy for reports.
pub fn cluster_sizes(c: &Clustering) -> BTreeMap<String, usize> {
    c.clusters().into_iter().map(|(k, v)| (k.to_string(), v.len())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(groups: &[&[&str]]) -> Clustering {
        Clustering::from_clusters(groups.iter().map(|g| g.to_vec()))
    }

    #[test]
    fn identity_scores_one() {
        let k = c(&[&["a", "b"], &["c", "d", "e"]]);
        for s in [muc(&k, &k), b_cubed(&k, &k), ceaf_e(&k, &k)] {
            let s = s.unwrap();
            assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn muc_hand_example() {
        // R = (4 - 2) / 3, P = 1, F1 = 2(2/3) / (5/3) = 0.8.
        let s = muc(&c(&[&["a", "b", "c", "d"]]), &c(&[&["a", "b"], &["c", "d"]])).unwrap();
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.precision, 1.0);
        assert!((s.f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn muc_all_singletons_is_zero() {
        let s = muc(&c(&[&["a", "b", "c"]]), &c(&[&["a"], &["b"], &["c"]])).unwrap();
        assert_eq!((s.recall, s.f1), (0.0, 0.0));
    }

    #[test]
    fn b_cubed_hand_example() {
        // R = (2/3 + 2/3 + 1/3) / 3 = 5/9, P = 1, F1 = 2(5/9) / (14/9) = 5/7.
        let s = b_cubed(&c(&[&["a", "b", "c"]]), &c(&[&["a", "b"], &["c"]])).unwrap();
        assert_eq!(s.precision, 1.0);
        assert!((s.recall - 5.0 / 9.0).abs() < 1e-12);
        assert!((s.f1 - 5.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn b_cubed_all_singletons() {
        let s = b_cubed(&c(&[&["a", "b", "c", "d"]]), &c(&[&["a"], &["b"], &["c"], &["d"]])).unwrap();
        assert_eq!(s.precision, 1.0);
        assert!((s.recall - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ceaf_e_hand_example() {
        // Alignments: {a,b}-{a,c} + {c}-{b} = 1/2 + 0, or {a,b}-{b} + {c}-{a,c} = 2/3 + 2/3.
        // The second wins: Σφ = 4/3 over two clusters each side.
        let key = c(&[&["a", "b"], &["c"]]);
        let resp = c(&[&["a", "c"], &["b"]]);
        let s = ceaf_e(&key, &resp).unwrap();
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(ceaf_e_similarity(&key, &resp, true).unwrap(), assignment::ratio(4, 3));
    }

    #[test]
    fn conll_examples() {
        let m = |f1| MetricScore { precision: 0.0, recall: 0.0, f1 };
        assert_eq!(conll_f1(&[m(1.0), m(1.0), m(1.0)]), 1.0);
        assert_eq!(conll_f1(&[m(0.0), m(0.0), m(0.0)]), 0.0);
        assert!((conll_f1(&[m(0.8), m(0.7143), m(0.25)]) - 0.5881).abs() < 1e-4);
    }

    #[test]
    fn universe_mismatch_is_an_error() {
        let k = c(&[&["a", "b"]]);
        assert!(matches!(muc(&k, &c(&[&["a"]])), Err(Error::UncoveredMention(_))));
        assert!(matches!(b_cubed(&k, &c(&[&["a", "b", "z"]])), Err(Error::UnknownMention(_))));
    }

    #[test]
    fn empty_inputs_score_zero() {
        let e = Clustering::default();
        assert_eq!(ceaf_e(&e, &e).unwrap(), MetricScore::default());
        assert_eq!(b_cubed(&e, &e).unwrap(), MetricScore::default());
        assert_eq!(muc(&e, &e).unwrap(), MetricScore::default());
    }

    fn clustering_strategy() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        (1usize..9).prop_flat_map(|n| (prop::collection::vec(0usize..n, n), prop::collection::vec(0usize..n, n)))
    }

    fn from_labels(labels: &[usize], offset: usize) -> Clustering {
        let mut a = BTreeMap::new();
        for (i, l) in labels.iter().enumerate() {
            a.insert(format!("m{i}"), format!("c{}", l + offset));
        }
        Clustering::from_assignment(a)
    }

    proptest! {
        #[test]
        fn swapping_sides_swaps_precision_and_recall((k, r) in clustering_strategy()) {
            let key = from_labels(&k, 0);
            let resp = from_labels(&r, 0);
            for f in [muc, b_cubed, ceaf_e] {
                let a = f(&key, &resp).unwrap();
                let b = f(&resp, &key).unwrap();
                prop_assert!((a.precision - b.recall).abs() < 1e-12);
                prop_assert!((a.recall - b.precision).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&a.f1));
            }
        }

        #[test]
        fn relabeling_does_not_change_scores((k, r) in clustering_strategy()) {
            let key = from_labels(&k, 0);
            let a = from_labels(&r, 0);
            let b = from_labels(&r, 100);
            for f in [muc, b_cubed, ceaf_e] {
                prop_assert_eq!(f(&key, &a).unwrap(), f(&key, &b).unwrap());
            }
        }
    }
}
