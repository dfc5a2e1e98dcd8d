//! Average-linkage agglomerative clustering over pairwise probabilities.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Clustering, Corpus, Scope};
use crate::error::{Error, Result};

/// Symmetric pairwise probabilities over a declared mention set.
#[derive(Debug, Clone, Default)]
pub struct ScoreMatrix {
    scores: HashMap<(String, String), f64>,
}

fn key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl ScoreMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str, f64)>) -> Result<Self> {
        let mut m = Self::new();
        for (a, b, p) in pairs {
            m.set(a, b, p)?;
        }
        Ok(m)
    }

    /// Store `p` for the unordered pair `{a, b}`.
    pub fn set(&mut self, a: &str, b: &str, p: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::NonFinite(format!("score {p} for ({a}, {b}) is not a probability")));
        }
        if a == b {
            return Ok(());
        }
        self.scores.insert(key(a, b), p);
        Ok(())
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        self.scores.get(&key(a, b)).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn max_score(&self) -> Option<f64> {
        self.scores.values().copied().reduce(f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("average")
    }
}

impl FromStr for Linkage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(Linkage::Average),
            other => Err(Error::Config(format!("unsupported linkage `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringConfig {
    pub threshold: f64,
    #[serde(default)]
    pub linkage: Linkage,
    #[serde(default)]
    pub scope: Scope,
}

impl ClusteringConfig {
    pub fn new(threshold: f64) -> Self {
        ClusteringConfig {
            threshold,
            linkage: Linkage::Average,
            scope: Scope::Subtopic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold {} is outside [0, 1]", self.threshold)));
        }
        Ok(())
    }
}

/// Cluster one scope unit. Starts from singletons and repeatedly merges the
/// pair of clusters with the highest mean pairwise score while that mean is
/// at least the threshold. Equal means go to the pair whose smallest member
/// ids sort first.
pub fn agglomerative_cluster(mentions: &[&str], scores: &ScoreMatrix, config: &ClusteringConfig) -> Result<Clustering> {
    config.validate()?;
    let n = mentions.len();
    let mut pair = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s = scores
                .get(mentions[i], mentions[j])
                .ok_or_else(|| Error::MissingScore(mentions[i].to_string(), mentions[j].to_string()))?;
            pair[i * n + j] = s;
            pair[j * n + i] = s;
        }
    }

    // Active clusters: member indices, smallest member id, and score sums to
    // every other cluster (indexed by cluster slot).
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut min_id: Vec<&str> = mentions.to_vec();
    let mut alive = vec![true; n];
    let mut sums = pair;

    loop {
        let mut best: Option<(f64, &str, &str, usize, usize)> = None;
        for a in 0..n {
            if !alive[a] {
                continue;
            }
            for b in a + 1..n {
                if !alive[b] {
                    continue;
                }
                let avg = sums[a * n + b] / (members[a].len() * members[b].len()) as f64;
                let (lo, hi) = if min_id[a] <= min_id[b] { (min_id[a], min_id[b]) } else { (min_id[b], min_id[a]) };
                let better = match best {
                    None => true,
                    Some((s, l, h, _, _)) => avg > s || (avg == s && (lo, hi) < (l, h)),
                };
                if better {
                    best = Some((avg, lo, hi, a, b));
                }
            }
        }
        let Some((avg, _, _, a, b)) = best else { break };
        if avg < config.threshold {
            break;
        }
        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);
        alive[b] = false;
        if min_id[b] < min_id[a] {
            min_id[a] = min_id[b];
        }
        for c in 0..n {
            if c != a && alive[c] {
                let s = sums[a * n + c] + sums[b * n + c];
                sums[a * n + c] = s;
                sums[c * n + a] = s;
            }
        }
    }

    Ok(Clustering::from_clusters(
        (0..n)
            .filter(|&i| alive[i])
            .map(|i| members[i].iter().map(|&m| mentions[m]).collect::<Vec<_>>()),
    ))
}

/// Cluster every scope unit of the corpus independently and merge the results.
pub fn cluster_corpus(corpus: &Corpus, scores: &ScoreMatrix, config: &ClusteringConfig) -> Result<Clustering> {
    let mut out = BTreeMap::new();
    for unit in corpus.scope_units(config.scope).values() {
        let ids: Vec<&str> = unit.iter().map(|m| m.mention_id.as_str()).collect();
        let c = agglomerative_cluster(&ids, scores, config)?;
        out.extend(c.assignment().iter().map(|(m, c)| (m.clone(), c.clone())));
    }
    Ok(Clustering::from_assignment(out))
}

/// Metadata line written ahead of the clustering records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringHeader {
    pub threshold: f64,
    pub linkage: Linkage,
    pub scope: Scope,
    pub checkpoint: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClusterRecord {
    mention_id: String,
    cluster_id: String,
}

pub fn write_clustering(path: &Path, header: &ClusteringHeader, clustering: &Clustering) -> Result<()> {
    let mut buf = Vec::new();
    serde_json::to_writer(&mut buf, header)?;
    buf.push(b'\n');
    for (m, c) in clustering.assignment() {
        serde_json::to_writer(&mut buf, &ClusterRecord { mention_id: m.clone(), cluster_id: c.clone() })?;
        buf.push(b'\n');
    }
    crate::util::write_atomic(path, &buf)
}

pub fn read_clustering(path: &Path) -> Result<(ClusteringHeader, Clustering)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let malformed = |line: usize, message: String| Error::MalformedRecord {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| malformed(1, "missing header line".into()))?;
    let header: ClusteringHeader = serde_json::from_str(first).map_err(|e| malformed(1, e.to_string()))?;
    let mut assignment = BTreeMap::new();
    for (i, line) in lines {
        let r: ClusterRecord = serde_json::from_str(line).map_err(|e| malformed(i + 1, e.to_string()))?;
        if assignment.insert(r.mention_id.clone(), r.cluster_id).is_some() {
            return Err(Error::DuplicateId { kind: "mention", id: r.mention_id });
        }
    }
    Ok((header, Clustering::from_assignment(assignment)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(t: f64) -> ClusteringConfig {
        ClusteringConfig::new(t)
    }

    fn groups(c: &Clustering) -> Vec<Vec<String>> {
        c.clusters()
            .into_values()
            .map(|v| v.into_iter().map(String::from).collect())
            .collect()
    }

    #[test]
    fn high_threshold_gives_singletons() {
        let s = ScoreMatrix::from_pairs([("a", "b", 0.9), ("a", "c", 0.4), ("b", "c", 0.7)]).unwrap();
        let c = agglomerative_cluster(&["a", "b", "c"], &s, &cfg(0.95)).unwrap();
        assert_eq!(c.clusters().len(), 3);
    }

    #[test]
    fn two_mentions_merge() {
        let s = ScoreMatrix::from_pairs([("a", "b", 0.9)]).unwrap();
        let c = agglomerative_cluster(&["a", "b"], &s, &cfg(0.5)).unwrap();
        assert_eq!(groups(&c), vec![vec!["a", "b"]]);
        assert_eq!(c.cluster_of("b"), Some("a"));
    }

    #[test]
    fn average_linkage_hand_trace() {
        // Merge {a,b} at 0.9; then ({a,b},{c}) averages (0.8 + 0.2) / 2 = 0.5 >= 0.5.
        let s = ScoreMatrix::from_pairs([("a", "b", 0.9), ("a", "c", 0.8), ("b", "c", 0.2)]).unwrap();
        let c = agglomerative_cluster(&["a", "b", "c"], &s, &cfg(0.5)).unwrap();
        assert_eq!(groups(&c), vec![vec!["a", "b", "c"]]);
        let c = agglomerative_cluster(&["a", "b", "c"], &s, &cfg(0.51)).unwrap();
        assert_eq!(groups(&c), vec![vec!["a", "b"], vec!["c"]]);
    }

    #[test]
    fn ties_go_to_smallest_ids() {
        // ab, bc and cd tie at 0.7. Taking ab first leaves cd as the best
        // pair; taking bc first would strand a and d as singletons.
        let s = ScoreMatrix::from_pairs([
            ("a", "b", 0.7),
            ("b", "c", 0.7),
            ("c", "d", 0.7),
            ("a", "c", 0.0),
            ("a", "d", 0.0),
            ("b", "d", 0.0),
        ])
        .unwrap();
        let c = agglomerative_cluster(&["d", "c", "b", "a"], &s, &cfg(0.5)).unwrap();
        assert_eq!(groups(&c), vec![vec!["a", "b"], vec!["c", "d"]]);
    }

    #[test]
    fn missing_score_is_an_error() {
        let s = ScoreMatrix::from_pairs([("a", "b", 0.9)]).unwrap();
        assert!(matches!(
            agglomerative_cluster(&["a", "b", "c"], &s, &cfg(0.5)),
            Err(Error::MissingScore(..))
        ));
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(ScoreMatrix::new().set("a", "b", 1.5).is_err());
        assert!(ScoreMatrix::new().set("a", "b", f64::NAN).is_err());
        assert!(cfg(-0.1).validate().is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let c = Clustering::from_clusters([vec!["a", "b"], vec!["c"]]);
        let h = ClusteringHeader {
            threshold: 0.55,
            linkage: Linkage::Average,
            scope: Scope::Subtopic,
            checkpoint: Some("abc".into()),
        };
        write_clustering(&path, &h, &c).unwrap();
        assert_eq!(read_clustering(&path).unwrap(), (h, c));
    }

    fn matrix_strategy() -> impl Strategy<Value = (usize, Vec<f64>)> {
        (2usize..8).prop_flat_map(|n| (Just(n), prop::collection::vec(0.0f64..=1.0, n * (n - 1) / 2)))
    }

    fn build(n: usize, values: &[f64]) -> (Vec<String>, ScoreMatrix) {
        let ids: Vec<String> = (0..n).map(|i| format!("m{i}")).collect();
        let mut s = ScoreMatrix::new();
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                s.set(&ids[i], &ids[j], values[k]).unwrap();
                k += 1;
            }
        }
        (ids, s)
    }

    proptest! {
        #[test]
        fn output_is_partition_and_deterministic((n, values) in matrix_strategy(), t in 0.0f64..=1.0) {
            let (ids, s) = build(n, &values);
            let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
            let c = agglomerative_cluster(&refs, &s, &cfg(t)).unwrap();
            prop_assert_eq!(c.len(), n);
            for (cid, members) in c.clusters() {
                prop_assert_eq!(cid, *members.iter().min().unwrap());
            }
            let mut reversed = refs.clone();
            reversed.reverse();
            prop_assert_eq!(&c, &agglomerative_cluster(&reversed, &s, &cfg(t)).unwrap());
        }

        #[test]
        fn extreme_thresholds((n, values) in matrix_strategy()) {
            let (ids, s) = build(n, &values);
            let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
            prop_assert_eq!(agglomerative_cluster(&refs, &s, &cfg(0.0)).unwrap().clusters().len(), 1);
            let above = s.max_score().unwrap() + 1e-9;
            if above <= 1.0 {
                prop_assert_eq!(agglomerative_cluster(&refs, &s, &cfg(above)).unwrap().clusters().len(), n);
            }
        }

        #[test]
        fn raising_threshold_refines((n, values) in matrix_strategy(), lo in 0.0f64..=1.0, hi in 0.0f64..=1.0) {
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let (ids, s) = build(n, &values);
            let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
            let coarse = agglomerative_cluster(&refs, &s, &cfg(lo)).unwrap();
            let fine = agglomerative_cluster(&refs, &s, &cfg(hi)).unwrap();
            for a in &refs {
                for b in &refs {
                    if fine.cluster_of(a) == fine.cluster_of(b) {
                        prop_assert_eq!(coarse.cluster_of(a), coarse.cluster_of(b));
                    }
                }
            }
        }
    }
}
