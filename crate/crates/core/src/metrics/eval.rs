//! Topic-level evaluation of a system clustering against the gold partition.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{b_cubed, ceaf_e, conll_f1, muc, MetricScore};
use crate::corpus::{Clustering, Corpus, Scope};
use crate::error::{Error, Result};

/// Unit over which per-unit scores are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    #[default]
    Topic,
    Subtopic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub topic_level: bool,
    pub drop_singletons: bool,
    pub granularity: Granularity,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { topic_level: true, drop_singletons: true, granularity: Granularity::Topic }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitScores {
    pub unit: String,
    pub muc: MetricScore,
    pub b_cubed: MetricScore,
    pub ceaf_e: MetricScore,
    pub conll_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_topic: Vec<UnitScores>,
    pub muc: MetricScore,
    pub b_cubed: MetricScore,
    pub ceaf_e: MetricScore,
    pub conll_f1: f64,
    /// Units whose key had no clusters left after singleton removal.
    pub skipped_topics: Vec<String>,
    pub options: EvalOptions,
}

fn mean_score(scores: impl Iterator<Item = MetricScore> + Clone) -> MetricScore {
    let n = scores.clone().count();
    if n == 0 {
        return MetricScore::default();
    }
    let (p, r, f) = scores.fold((0.0, 0.0, 0.0), |acc, s| (acc.0 + s.precision, acc.1 + s.recall, acc.2 + s.f1));
    let n = n as f64;
    MetricScore { precision: p / n, recall: r / n, f1: f / n }
}

/// Score one unit. Returns `None` when the key is empty after singleton removal.
fn score_unit(unit: &str, key: &Clustering, system: &Clustering, drop_singletons: bool) -> Result<Option<UnitScores>> {
    let (mut key, mut response) = if drop_singletons {
        (key.without_singletons(), system.without_singletons())
    } else {
        (key.clone(), system.clone())
    };
    if key.is_empty() {
        return Ok(None);
    }
    let key_only: Vec<String> = key.mention_ids().filter(|m| !response.contains(m)).map(String::from).collect();
    let response_only: Vec<String> = response.mention_ids().filter(|m| !key.contains(m)).map(String::from).collect();
    for m in &key_only {
        response.insert_singleton(m);
    }
    for m in &response_only {
        key.insert_singleton(m);
    }
    let scores = [muc(&key, &response)?, b_cubed(&key, &response)?, ceaf_e(&key, &response)?];
    Ok(Some(UnitScores {
        unit: unit.to_string(),
        muc: scores[0],
        b_cubed: scores[1],
        ceaf_e: scores[2],
        conll_f1: conll_f1(&scores),
    }))
}

/// Evaluate `system` against the corpus gold clusters. The system must cover
/// exactly the corpus mentions.
pub fn evaluate(corpus: &Corpus, system: &Clustering, options: EvalOptions) -> Result<EvalReport> {
    let gold = corpus.gold_clustering()?;
    if let Some(m) = gold.mention_ids().find(|m| !system.contains(m)) {
        return Err(Error::UncoveredMention(m.to_string()));
    }
    if let Some(m) = system.mention_ids().find(|m| !gold.contains(m)) {
        return Err(Error::UnknownMention(m.to_string()));
    }

    let mut units: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    for m in corpus.mentions() {
        let unit = if !options.topic_level {
            "all".to_string()
        } else {
            match options.granularity {
                Granularity::Topic => corpus.scope_key(m, Scope::Topic),
                Granularity::Subtopic => corpus.scope_key(m, Scope::Subtopic),
            }
        };
        units.entry(unit).or_default().push(&m.mention_id);
    }
    evaluate_units(&gold, system, &units, options)
}

/// Evaluate over an explicit grouping of mention ids into units.
pub fn evaluate_units(
    gold: &Clustering,
    system: &Clustering,
    units: &BTreeMap<String, Vec<&str>>,
    options: EvalOptions,
) -> Result<EvalReport> {
    let mut per_topic = Vec::new();
    let mut skipped_topics = Vec::new();
    for (unit, members) in units {
        let keep: std::collections::HashSet<&str> = members.iter().copied().collect();
        let key = gold.restrict(|m| keep.contains(m));
        let response = system.restrict(|m| keep.contains(m));
        match score_unit(unit, &key, &response, options.drop_singletons)? {
            Some(s) => per_topic.push(s),
            None => skipped_topics.push(unit.clone()),
        }
    }
    let muc = mean_score(per_topic.iter().map(|u| u.muc));
    let b_cubed = mean_score(per_topic.iter().map(|u| u.b_cubed));
    let ceaf_e = mean_score(per_topic.iter().map(|u| u.ceaf_e));
    Ok(EvalReport {
        conll_f1: conll_f1(&[muc, b_cubed, ceaf_e]),
        muc,
        b_cubed,
        ceaf_e,
        per_topic,
        skipped_topics,
        options,
    })
}

fn row(f: &mut fmt::Formatter<'_>, name: &str, s: [&MetricScore; 3], conll: f64) -> fmt::Result {
    write!(f, "{name:<16}")?;
    for m in s {
        write!(f, " | {:>6.2} {:>6.2} {:>6.2}", 100.0 * m.recall, 100.0 * m.precision, 100.0 * m.f1)?;
    }
    writeln!(f, " | {:>6.2}", 100.0 * conll)
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<16} | {:^20} | {:^20} | {:^20} | {:>6}",
            "", "MUC", "B3", "CEAF_e", "CoNLL"
        )?;
        writeln!(
            f,
            "{:<16} | {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6} | {:>6}",
            "unit", "R", "P", "F1", "R", "P", "F1", "R", "P", "F1", "F1"
        )?;
        for u in &self.per_topic {
            row(f, &u.unit, [&u.muc, &u.b_cubed, &u.ceaf_e], u.conll_f1)?;
        }
        row(f, "average", [&self.muc, &self.b_cubed, &self.ceaf_e], self.conll_f1)?;
        if !self.skipped_topics.is_empty() {
            writeln!(f, "skipped (no key clusters): {}", self.skipped_topics.join(", "))?;
        }
        write!(
            f,
            "options: topic_level={} drop_singletons={} granularity={:?}",
            self.options.topic_level, self.options.drop_singletons, self.options.granularity
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Mention};

    fn corpus(spec: &[(&str, &str, &str)]) -> Corpus {
        // (mention_id, topic, gold cluster)
        let mut docs = Vec::new();
        let mut mentions = Vec::new();
        for (i, (id, topic, gold)) in spec.iter().enumerate() {
            let doc_id = format!("{topic}_{i}");
            docs.push(Document {
                doc_id: doc_id.clone(),
                topic_id: topic.to_string(),
                subtopic_id: "s".into(),
                sentences: vec![vec!["went".into()]],
            });
            mentions.push(Mention {
                mention_id: id.to_string(),
                doc_id,
                sentence_index: 0,
                token_start: 0,
                token_end: 0,
                text: "went".into(),
                gold_cluster_id: Some(gold.to_string()),
            });
        }
        Corpus::new(docs, mentions).unwrap()
    }

    fn c(groups: &[&[&str]]) -> Clustering {
        Clustering::from_clusters(groups.iter().map(|g| g.to_vec()))
    }

    #[test]
    fn singleton_removal_hand_trace() {
        let corpus = corpus(&[("a", "t1", "x"), ("b", "t1", "x"), ("c", "t1", "y")]);
        let r = evaluate(&corpus, &c(&[&["a", "b", "c"]]), EvalOptions::default()).unwrap();
        let near = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(near(r.muc.precision, 0.5) && near(r.muc.recall, 1.0) && near(r.muc.f1, 2.0 / 3.0));
        assert!(near(r.b_cubed.precision, 5.0 / 9.0) && near(r.b_cubed.recall, 1.0) && near(r.b_cubed.f1, 5.0 / 7.0));
        assert!(near(r.ceaf_e.precision, 0.8) && near(r.ceaf_e.recall, 0.4) && near(r.ceaf_e.f1, 8.0 / 15.0));
        assert!(near(r.conll_f1, (2.0 / 3.0 + 5.0 / 7.0 + 8.0 / 15.0) / 3.0));
    }

    #[test]
    fn gold_as_system_is_perfect() {
        let corpus = corpus(&[("a", "t1", "x"), ("b", "t1", "x"), ("c", "t1", "y"), ("d", "t2", "z"), ("e", "t2", "z")]);
        let gold = corpus.gold_clustering().unwrap();
        for topic_level in [true, false] {
            for drop_singletons in [true, false] {
                let opts = EvalOptions { topic_level, drop_singletons, ..EvalOptions::default() };
                let r = evaluate(&corpus, &gold, opts).unwrap();
                assert_eq!(r.conll_f1, 1.0);
            }
        }
    }

    #[test]
    fn topics_are_averaged_and_empty_ones_skipped() {
        let corpus = corpus(&[
            ("a", "t1", "x"),
            ("b", "t1", "x"),
            ("c", "t2", "y"),
            ("d", "t2", "y"),
            ("e", "t3", "z"),
        ]);
        // t1 perfect, t2 split into singletons, t3 has no key clusters left.
        let system = c(&[&["a", "b"], &["c"], &["d"], &["e"]]);
        let r = evaluate(&corpus, &system, EvalOptions::default()).unwrap();
        assert_eq!(r.skipped_topics, vec!["t3".to_string()]);
        assert_eq!(r.per_topic.len(), 2);
        assert_eq!(r.per_topic[1].muc.f1, 0.0);
        assert!((r.muc.f1 - 0.5).abs() < 1e-12);
        let mean = (r.per_topic[0].conll_f1 + r.per_topic[1].conll_f1) / 2.0;
        assert!((r.conll_f1 - mean).abs() < 1e-12);
    }

    #[test]
    fn all_singleton_system_has_zero_muc() {
        let corpus = corpus(&[("a", "t1", "x"), ("b", "t1", "x"), ("c", "t1", "x")]);
        let system = c(&[&["a"], &["b"], &["c"]]);
        let r = evaluate(&corpus, &system, EvalOptions::default()).unwrap();
        assert_eq!(r.muc.f1, 0.0);
    }

    #[test]
    fn system_must_cover_gold() {
        let corpus = corpus(&[("a", "t1", "x"), ("b", "t1", "x")]);
        let err = evaluate(&corpus, &c(&[&["a"]]), EvalOptions::default()).unwrap_err();
        assert!(matches!(err, Error::UncoveredMention(m) if m == "b"));
    }

    #[test]
    fn report_renders_and_serializes() {
        let corpus = corpus(&[("a", "t1", "x"), ("b", "t1", "x")]);
        let r = evaluate(&corpus, &corpus.gold_clustering().unwrap(), EvalOptions::default()).unwrap();
        let table = r.to_string();
        assert!(table.contains("CEAF_e") && table.contains("t1") && table.contains("100.00"));
        let back: EvalReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
