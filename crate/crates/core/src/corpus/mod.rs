//! Documents, gold event mentions, clusterings and the newline-delimited
//! corpus format.
//!
//! A corpus file holds one JSON object per line. Each object carries a
//! `kind` tag of either `doc` or `mention`; any other field is rejected.
//! Canonical files list every `doc` record before the first `mention`.

mod synth;
mod vocab;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use synth::{generate_synthetic, SyntheticCorpus, SyntheticSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub doc_id: String,
    pub topic_id: String,
    pub subtopic_id: String,
    pub sentences: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mention {
    pub mention_id: String,
    pub doc_id: String,
    pub sentence_index: usize,
    /// Inclusive.
    pub token_start: usize,
    /// Inclusive.
    pub token_end: usize,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_cluster_id: Option<String>,
}

impl Mention {
    pub fn width(&self) -> usize {
        self.token_end - self.token_start + 1
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Record {
    Doc(Document),
    Mention(Mention),
}

/// A validated collection of documents and their gold mentions.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    mentions: Vec<Mention>,
    doc_index: HashMap<String, usize>,
    mention_index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>, mentions: Vec<Mention>) -> Result<Self> {
        let mut doc_index = HashMap::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            if doc_index.insert(doc.doc_id.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    kind: "doc",
                    id: doc.doc_id.clone(),
                });
            }
            for (s, sentence) in doc.sentences.iter().enumerate() {
                if sentence.is_empty() || sentence.iter().any(|t| t.is_empty()) {
                    return Err(Error::Config(format!(
                        "document `{}` sentence {s} is empty or has an empty token",
                        doc.doc_id
                    )));
                }
            }
        }
        let mut mention_index = HashMap::with_capacity(mentions.len());
        for (i, m) in mentions.iter().enumerate() {
            if mention_index.insert(m.mention_id.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    kind: "mention",
                    id: m.mention_id.clone(),
                });
            }
            let doc = doc_index
                .get(&m.doc_id)
                .map(|&d| &documents[d])
                .ok_or_else(|| Error::UnknownDocument {
                    mention_id: m.mention_id.clone(),
                    doc_id: m.doc_id.clone(),
                })?;
            validate_span(m, doc)?;
        }
        Ok(Corpus {
            documents,
            mentions,
            doc_index,
            mention_index,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn mentions(&self) -> &[Mention] {
        &self.mentions
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.doc_index.get(doc_id).map(|&i| &self.documents[i])
    }

    pub fn mention(&self, mention_id: &str) -> Option<&Mention> {
        self.mention_index.get(mention_id).map(|&i| &self.mentions[i])
    }

    pub fn document_of(&self, mention: &Mention) -> &Document {
        &self.documents[self.doc_index[&mention.doc_id]]
    }

    /// The sentence containing the mention.
    pub fn sentence_of(&self, mention: &Mention) -> &[String] {
        &self.document_of(mention).sentences[mention.sentence_index]
    }

    /// Canonical ordering key: document position, sentence, then token offsets.
    pub fn order_key<'a>(&self, mention: &'a Mention) -> (usize, usize, usize, usize, &'a str) {
        (
            self.doc_index[&mention.doc_id],
            mention.sentence_index,
            mention.token_start,
            mention.token_end,
            mention.mention_id.as_str(),
        )
    }

    /// Mentions sorted into canonical order.
    pub fn ordered_mentions(&self) -> Vec<&Mention> {
        let mut ms: Vec<&Mention> = self.mentions.iter().collect();
        ms.sort_by(|a, b| self.order_key(a).cmp(&self.order_key(b)));
        ms
    }

    pub fn scope_key(&self, mention: &Mention, scope: Scope) -> String {
        let doc = self.document_of(mention);
        match scope {
            Scope::Subtopic => format!("{}/{}", doc.topic_id, doc.subtopic_id),
            Scope::Topic => doc.topic_id.clone(),
            Scope::Corpus => String::new(),
        }
    }

    /// Mentions grouped by scope unit, each group in canonical order.
    pub fn scope_units(&self, scope: Scope) -> BTreeMap<String, Vec<&Mention>> {
        let mut units: BTreeMap<String, Vec<&Mention>> = BTreeMap::new();
        for m in self.ordered_mentions() {
            units.entry(self.scope_key(m, scope)).or_default().push(m);
        }
        units
    }

    pub fn topic_of(&self, mention: &Mention) -> &str {
        &self.document_of(mention).topic_id
    }

    /// The gold partition. Fails if any mention is unlabeled.
    pub fn gold_clustering(&self) -> Result<Clustering> {
        let mut assignment = BTreeMap::new();
        for m in &self.mentions {
            let c = m
                .gold_cluster_id
                .clone()
                .ok_or_else(|| Error::MissingGoldLabel(m.mention_id.clone()))?;
            assignment.insert(m.mention_id.clone(), c);
        }
        Ok(Clustering::from_assignment(assignment))
    }

    /// A sub-corpus holding only the selected mentions (documents are kept).
    pub fn filter_mentions(&self, keep: impl Fn(&Mention) -> bool) -> Corpus {
        let mentions = self.mentions.iter().filter(|m| keep(m)).cloned().collect();
        Corpus::new(self.documents.clone(), mentions).expect("subset of a valid corpus is valid")
    }

    /// A sub-corpus restricted to the given topics.
    pub fn filter_topics(&self, topics: &BTreeSet<String>) -> Corpus {
        let documents: Vec<Document> = self
            .documents
            .iter()
            .filter(|d| topics.contains(&d.topic_id))
            .cloned()
            .collect();
        let kept: BTreeSet<&str> = documents.iter().map(|d| d.doc_id.as_str()).collect();
        let mentions = self
            .mentions
            .iter()
            .filter(|m| kept.contains(m.doc_id.as_str()))
            .cloned()
            .collect();
        Corpus::new(documents, mentions).expect("subset of a valid corpus is valid")
    }

    pub fn to_writer(&self, mut w: impl Write) -> std::io::Result<()> {
        for d in &self.documents {
            serde_json::to_writer(&mut w, &Record::Doc(d.clone()))?;
            w.write_all(b"\n")?;
        }
        for m in &self.mentions {
            serde_json::to_writer(&mut w, &Record::Mention(m.clone()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_string_canonical(&self) -> String {
        let mut buf = Vec::new();
        self.to_writer(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }
}

fn validate_span(m: &Mention, doc: &Document) -> Result<()> {
    let oob = |detail: String| Error::SpanOutOfBounds {
        mention_id: m.mention_id.clone(),
        detail,
    };
    let sentence = doc.sentences.get(m.sentence_index).ok_or_else(|| {
        oob(format!(
            "sentence_index {} but document has {} sentences",
            m.sentence_index,
            doc.sentences.len()
        ))
    })?;
    if m.token_start > m.token_end || m.token_end >= sentence.len() {
        return Err(oob(format!(
            "tokens {}..={} in a sentence of {} tokens",
            m.token_start,
            m.token_end,
            sentence.len()
        )));
    }
    let expected = sentence[m.token_start..=m.token_end].join(" ");
    if expected != m.text {
        return Err(Error::TextMismatch {
            mention_id: m.mention_id.clone(),
            expected,
            found: m.text.clone(),
        });
    }
    Ok(())
}

pub fn parse_corpus(text: &str, origin: &str) -> Result<Corpus> {
    let mut documents = Vec::new();
    let mut mentions = Vec::new();
    for (i, line) in text.lines().enumerate() {
        push_record(line, origin, i + 1, &mut documents, &mut mentions)?;
    }
    Corpus::new(documents, mentions)
}

fn push_record(
    line: &str,
    origin: &str,
    lineno: usize,
    documents: &mut Vec<Document>,
    mentions: &mut Vec<Mention>,
) -> Result<()> {
    if line.trim().is_empty() {
        return Ok(());
    }
    let record: Record = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
        path: origin.to_string(),
        line: lineno,
        message: e.to_string(),
    })?;
    match record {
        Record::Doc(d) => documents.push(d),
        Record::Mention(m) => mentions.push(m),
    }
    Ok(())
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    let mut documents = Vec::new();
    let mut mentions = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        push_record(&line, &origin, i + 1, &mut documents, &mut mentions)?;
    }
    Corpus::new(documents, mentions)
}

pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    crate::util::write_atomic(path, corpus.to_string_canonical().as_bytes())
}

/// Unit within which mention pairs are formed and clustered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    #[default]
    Subtopic,
    Topic,
    Corpus,
}

impl FromStr for Scope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subtopic" => Ok(Scope::Subtopic),
            "topic" => Ok(Scope::Topic),
            "corpus" => Ok(Scope::Corpus),
            other => Err(Error::Config(format!("unknown scope `{other}`"))),
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Subtopic => "subtopic",
            Scope::Topic => "topic",
            Scope::Corpus => "corpus",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionPair {
    pub first: String,
    pub second: String,
    /// `Some(true)` when both mentions share a gold cluster.
    pub label: Option<bool>,
}

/// All unordered mention pairs within each scope unit, canonically ordered.
/// With `labeled`, every mention must carry a gold cluster id.
pub fn candidate_pairs(corpus: &Corpus, scope: Scope, labeled: bool) -> Result<Vec<MentionPair>> {
    let mut pairs = Vec::new();
    for unit in corpus.scope_units(scope).values() {
        if labeled {
            if let Some(m) = unit.iter().find(|m| m.gold_cluster_id.is_none()) {
                return Err(Error::MissingGoldLabel(m.mention_id.clone()));
            }
        }
        for (i, a) in unit.iter().enumerate() {
            for b in &unit[i + 1..] {
                pairs.push(MentionPair {
                    first: a.mention_id.clone(),
                    second: b.mention_id.clone(),
                    label: labeled.then(|| a.gold_cluster_id == b.gold_cluster_id),
                });
            }
        }
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedStats {
    pub mentions: usize,
    pub clusters: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    pub expected: ExpectedStats,
    pub found: ExpectedStats,
    pub pass: bool,
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} mentions {}/{} clusters {}/{}",
            if self.pass { "PASS" } else { "FAIL" },
            self.found.mentions,
            self.expected.mentions,
            self.found.clusters,
            self.expected.clusters
        )
    }
}

/// Compare gold mention and gold cluster counts against expected values.
pub fn validate_stats(corpus: &Corpus, expected: ExpectedStats) -> StatsReport {
    let labeled: Vec<&str> = corpus
        .mentions()
        .iter()
        .filter_map(|m| m.gold_cluster_id.as_deref())
        .collect();
    let clusters: BTreeSet<&str> = labeled.iter().copied().collect();
    let found = ExpectedStats {
        mentions: labeled.len(),
        clusters: clusters.len(),
    };
    StatsReport {
        expected,
        found,
        pass: found == expected,
    }
}

/// A partition of a mention set, stored as mention_id -> cluster_id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    assignment: BTreeMap<String, String>,
}

impl Clustering {
    pub fn from_assignment(assignment: BTreeMap<String, String>) -> Self {
        Clustering { assignment }
    }

    /// Build from explicit member lists; each cluster is named after its
    /// smallest mention id. Empty groups are skipped.
    pub fn from_clusters<I, C, S>(clusters: I) -> Self
    where
        I: IntoIterator<Item = C>,
        C: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut assignment = BTreeMap::new();
        for cluster in clusters {
            let members: Vec<String> = cluster.into_iter().map(Into::into).collect();
            if let Some(id) = members.iter().min().cloned() {
                for m in members {
                    assignment.insert(m, id.clone());
                }
            }
        }
        Clustering { assignment }
    }

    pub fn assignment(&self) -> &BTreeMap<String, String> {
        &self.assignment
    }

    pub fn cluster_of(&self, mention_id: &str) -> Option<&str> {
        self.assignment.get(mention_id).map(String::as_str)
    }

    pub fn contains(&self, mention_id: &str) -> bool {
        self.assignment.contains_key(mention_id)
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn mention_ids(&self) -> impl Iterator<Item = &str> {
        self.assignment.keys().map(String::as_str)
    }

    /// cluster_id -> sorted member ids.
    pub fn clusters(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (m, c) in &self.assignment {
            out.entry(c.as_str()).or_default().push(m.as_str());
        }
        out
    }

    pub fn restrict<'a>(&self, keep: impl Fn(&str) -> bool + 'a) -> Clustering {
        Clustering {
            assignment: self
                .assignment
                .iter()
                .filter(|(m, _)| keep(m))
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// Drop clusters with a single member.
    pub fn without_singletons(&self) -> Clustering {
        let sizes = self.clusters();
        self.restrict(|m| sizes[self.assignment[m].as_str()].len() > 1)
    }

    /// Add a mention as its own cluster. The cluster id is prefixed so it
    /// cannot collide with an existing cluster id.
    pub fn insert_singleton(&mut self, mention_id: &str) {
        self.assignment
            .insert(mention_id.to_string(), format!("__singleton__{mention_id}"));
    }

    pub fn insert(&mut self, mention_id: impl Into<String>, cluster_id: impl Into<String>) {
        self.assignment.insert(mention_id.into(), cluster_id.into());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc_line(id: &str, sentences: &str) -> String {
        format!(r#"{{"kind":"doc","doc_id":"{id}","topic_id":"t1","subtopic_id":"s1","sentences":{sentences}}}"#)
    }

    fn mention_line(id: &str, doc: &str, start: usize, end: usize, text: &str) -> String {
        format!(
            r#"{{"kind":"mention","mention_id":"{id}","doc_id":"{doc}","sentence_index":0,"token_start":{start},"token_end":{end},"text":"{text}","gold_cluster_id":"c1"}}"#
        )
    }

    #[test]
    fn minimal_corpus_loads() {
        let text = [
            doc_line("d1", r#"[["police","arrested","him"]]"#),
            mention_line("m1", "d1", 1, 1, "arrested"),
        ]
        .join("\n");
        let c = parse_corpus(&text, "mem").unwrap();
        assert_eq!(c.documents().len(), 1);
        assert_eq!(c.mentions().len(), 1);
        assert_eq!(c.sentence_of(&c.mentions()[0]).len(), 3);
    }

    #[test]
    fn span_out_of_bounds_names_mention() {
        let text = [
            doc_line("d1", r#"[["police","arrested","him"]]"#),
            mention_line("m7", "d1", 2, 3, "him x"),
        ]
        .join("\n");
        let err = parse_corpus(&text, "mem").unwrap_err();
        assert!(matches!(err, Error::SpanOutOfBounds { ref mention_id, .. } if mention_id == "m7"));
        assert!(err.to_string().contains("m7"));
    }

    #[test]
    fn duplicate_mention_id_rejected() {
        let text = [
            doc_line("d1", r#"[["police","arrested","him"]]"#),
            mention_line("m1", "d1", 1, 1, "arrested"),
            mention_line("m1", "d1", 2, 2, "him"),
        ]
        .join("\n");
        assert!(matches!(
            parse_corpus(&text, "mem"),
            Err(Error::DuplicateId { kind: "mention", .. })
        ));
    }

    #[test]
    fn duplicate_doc_id_rejected() {
        let text = [doc_line("d1", r#"[["a"]]"#), doc_line("d1", r#"[["b"]]"#)].join("\n");
        assert!(matches!(
            parse_corpus(&text, "mem"),
            Err(Error::DuplicateId { kind: "doc", .. })
        ));
    }

    #[test]
    fn text_mismatch_rejected() {
        let text = [
            doc_line("d1", r#"[["police","arrested","him"]]"#),
            mention_line("m1", "d1", 1, 2, "arrested"),
        ]
        .join("\n");
        assert!(matches!(parse_corpus(&text, "mem"), Err(Error::TextMismatch { .. })));
    }

    #[test]
    fn malformed_record_reports_line() {
        let text = [doc_line("d1", r#"[["a"]]"#), "{not json".to_string()].join("\n");
        match parse_corpus(&text, "mem") {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let text = r#"{"kind":"doc","doc_id":"d","topic_id":"t","subtopic_id":"s","sentences":[["a"]],"extra":1}"#;
        assert!(matches!(
            parse_corpus(text, "mem"),
            Err(Error::MalformedRecord { line: 1, .. })
        ));
    }

    #[test]
    fn canonical_round_trip() {
        let text = [
            doc_line("d1", r#"[["police","arrested","him"],["he","was","sentenced"]]"#),
            doc_line("d2", r#"[["the","suspect","was","detained"]]"#),
            mention_line("m1", "d1", 1, 1, "arrested"),
            mention_line("m2", "d2", 3, 3, "detained"),
        ]
        .join("\n")
            + "\n";
        let c = parse_corpus(&text, "mem").unwrap();
        assert_eq!(c.to_string_canonical(), text);
    }

    fn three_mentions(clusters: [&str; 3], subtopics: [&str; 3]) -> Corpus {
        let docs = (0..3)
            .map(|i| Document {
                doc_id: format!("d{i}"),
                topic_id: "t".into(),
                subtopic_id: subtopics[i].into(),
                sentences: vec![vec!["x".into()]],
            })
            .collect();
        let mentions = (0..3)
            .map(|i| Mention {
                mention_id: ["a", "b", "c"][i].into(),
                doc_id: format!("d{i}"),
                sentence_index: 0,
                token_start: 0,
                token_end: 0,
                text: "x".into(),
                gold_cluster_id: Some(clusters[i].into()),
            })
            .collect();
        Corpus::new(docs, mentions).unwrap()
    }

    #[test]
    fn pairs_within_one_subtopic() {
        let c = three_mentions(["1", "1", "2"], ["s", "s", "s"]);
        let pairs = candidate_pairs(&c, Scope::Subtopic, true).unwrap();
        let got: Vec<(&str, &str, bool)> = pairs
            .iter()
            .map(|p| (p.first.as_str(), p.second.as_str(), p.label.unwrap()))
            .collect();
        assert_eq!(got, vec![("a", "b", true), ("a", "c", false), ("b", "c", false)]);
    }

    #[test]
    fn pairs_do_not_cross_subtopics() {
        let c = three_mentions(["1", "1", "2"], ["s1", "s2", "s3"]);
        assert!(candidate_pairs(&c, Scope::Subtopic, true).unwrap().is_empty());
        assert_eq!(candidate_pairs(&c, Scope::Topic, true).unwrap().len(), 3);
    }

    #[test]
    fn labels_required_when_requested() {
        let mut c = three_mentions(["1", "1", "2"], ["s", "s", "s"]);
        c.mentions[1].gold_cluster_id = None;
        assert!(matches!(
            candidate_pairs(&c, Scope::Subtopic, true),
            Err(Error::MissingGoldLabel(_))
        ));
        assert_eq!(candidate_pairs(&c, Scope::Subtopic, false).unwrap().len(), 3);
    }

    #[test]
    fn stats_of_empty_corpus() {
        let r = validate_stats(&Corpus::default(), ExpectedStats { mentions: 0, clusters: 0 });
        assert!(r.pass);
    }

    #[test]
    fn stats_mismatch_reported() {
        let c = three_mentions(["1", "1", "2"], ["s", "s", "s"]);
        let r = validate_stats(&c, ExpectedStats { mentions: 3, clusters: 3 });
        assert!(!r.pass);
        assert_eq!(r.found, ExpectedStats { mentions: 3, clusters: 2 });
    }

    #[test]
    fn clustering_helpers() {
        let c = Clustering::from_clusters(vec![vec!["b", "a"], vec!["c"]]);
        assert_eq!(c.cluster_of("b"), Some("a"));
        assert_eq!(c.clusters().len(), 2);
        assert_eq!(c.without_singletons().len(), 2);
    }
}
