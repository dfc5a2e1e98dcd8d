//! Turning corpora and inference sets into scorer inputs.

use std::collections::HashMap;

use crate::cluster::{cluster_corpus, ClusteringConfig, ScoreMatrix};
use crate::commonsense::InferenceSet;
use crate::corpus::{candidate_pairs, Clustering, Corpus, Scope};
use crate::embed::{tokenize, Embedder};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalOptions, EvalReport};
use crate::scorer::{predict_pairs, tune_threshold, InferenceInput, MentionInput, ModelParameters, PairExample};

/// Inference sets keyed by `(doc_id, mention_id)`.
pub type InferenceMap = HashMap<(String, String), InferenceSet>;

pub fn inference_map(sets: impl IntoIterator<Item = InferenceSet>) -> InferenceMap {
    sets.into_iter()
        .map(|s| ((s.doc_id.clone(), s.mention_id.clone()), s))
        .collect()
}

/// A corpus with its scorer inputs and labeled candidate pairs.
#[derive(Debug, Clone)]
pub struct Split {
    pub name: String,
    pub corpus: Corpus,
    /// One entry per corpus mention, in corpus order.
    pub inputs: Vec<MentionInput>,
    pub index: HashMap<String, usize>,
    pub pairs: Vec<PairExample>,
    pub scope: Scope,
}

/// Token vectors for every mention span and every inference sentence.
/// Inference sentences that tokenize to nothing are dropped.
pub fn build_inputs(corpus: &Corpus, embedder: &Embedder, inferences: Option<&InferenceMap>) -> Result<Vec<MentionInput>> {
    embedder.embed_documents(corpus.documents())?;

    let mut sentences: Vec<Vec<String>> = Vec::new();
    let mut texts: Vec<Vec<(usize, String)>> = Vec::new();
    for m in corpus.mentions() {
        let mut lists = Vec::new();
        if let Some(map) = inferences {
            let set = map
                .get(&(m.doc_id.clone(), m.mention_id.clone()))
                .ok_or_else(|| Error::MissingFixture { doc_id: m.doc_id.clone(), mention_id: m.mention_id.clone() })?;
            for (rel, list) in [(0, &set.before), (1, &set.after)] {
                for text in list {
                    let tokens = tokenize(text);
                    if tokens.is_empty() {
                        continue;
                    }
                    sentences.push(tokens);
                    lists.push((rel, text.clone()));
                }
            }
        }
        texts.push(lists);
    }
    let matrix = embedder.embed_sentences(&sentences)?;
    let mut vectors = matrix.sentences.into_iter();

    let mut out = Vec::with_capacity(corpus.mentions().len());
    for (m, lists) in corpus.mentions().iter().zip(texts) {
        let doc = embedder.embed_document(corpus.document_of(m))?;
        let sentence = doc.sentences.get(m.sentence_index).ok_or_else(|| Error::SpanOutOfBounds {
            mention_id: m.mention_id.clone(),
            detail: "sentence missing from embedding".into(),
        })?;
        let span = sentence
            .get(m.token_start..=m.token_end)
            .ok_or_else(|| Error::SpanOutOfBounds {
                mention_id: m.mention_id.clone(),
                detail: "tokens missing from embedding".into(),
            })?
            .to_vec();
        let mut before = Vec::new();
        let mut after = Vec::new();
        for (rel, text) in lists {
            let tokens = vectors.next().expect("one embedding per inference sentence");
            let input = InferenceInput { text, tokens };
            if rel == 0 {
                before.push(input);
            } else {
                after.push(input);
            }
        }
        out.push(MentionInput { mention_id: m.mention_id.clone(), span, before, after });
    }
    Ok(out)
}

pub fn build_split(
    name: &str,
    corpus: Corpus,
    embedder: &Embedder,
    inferences: Option<&InferenceMap>,
    scope: Scope,
) -> Result<Split> {
    let inputs = build_inputs(&corpus, embedder, inferences)?;
    let index: HashMap<String, usize> = inputs
        .iter()
        .enumerate()
        .map(|(i, m)| (m.mention_id.clone(), i))
        .collect();
    let pairs = candidate_pairs(&corpus, scope, true)?
        .into_iter()
        .map(|p| PairExample {
            first: index[&p.first],
            second: index[&p.second],
            label: p.label.unwrap_or(false),
        })
        .collect();
    Ok(Split { name: name.to_string(), corpus, inputs, index, pairs, scope })
}

impl Split {
    pub fn labels(&self) -> Vec<bool> {
        self.pairs.iter().map(|p| p.label).collect()
    }

    pub fn predict(&self, params: &ModelParameters) -> Result<Vec<f64>> {
        predict_pairs(params, &self.inputs, &self.pairs)
    }

    pub fn score_matrix(&self, probs: &[f64]) -> Result<ScoreMatrix> {
        ScoreMatrix::from_pairs(self.pairs.iter().zip(probs).map(|(p, &s)| {
            (
                self.inputs[p.first].mention_id.as_str(),
                self.inputs[p.second].mention_id.as_str(),
                s,
            )
        }))
    }

    /// Cluster at `threshold` and evaluate against gold.
    pub fn cluster_and_evaluate(
        &self,
        scores: &ScoreMatrix,
        threshold: f64,
        options: EvalOptions,
    ) -> Result<(Clustering, EvalReport)> {
        let config = ClusteringConfig { scope: self.scope, ..ClusteringConfig::new(threshold) };
        let clustering = cluster_corpus(&self.corpus, scores, &config)?;
        let report = evaluate(&self.corpus, &clustering, options)?;
        Ok((clustering, report))
    }

    /// Grid value with the best CoNLL F1 after clustering; ties go to the larger value.
    pub fn tune_threshold(&self, scores: &ScoreMatrix, grid: &[f64], options: EvalOptions) -> Result<(f64, f64)> {
        tune_threshold(grid, |tau| Ok(self.cluster_and_evaluate(scores, tau, options)?.1.conll_f1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commonsense::{Provenance, Source};
    use crate::corpus::{Document, Mention};
    use crate::embed::EmbedderConfig;

    fn tiny() -> (Corpus, InferenceMap) {
        let doc = Document {
            doc_id: "d".into(),
            topic_id: "t".into(),
            subtopic_id: "s".into(),
            sentences: vec![
                vec!["He".into(), "quit".into(), "today".into()],
                vec!["She".into(), "left".into(), "early".into()],
            ],
        };
        let mention = |id: &str, s, text: &str, gold: &str| Mention {
            mention_id: id.into(),
            doc_id: "d".into(),
            sentence_index: s,
            token_start: 1,
            token_end: 1,
            text: text.into(),
            gold_cluster_id: Some(gold.into()),
        };
        let corpus = Corpus::new(vec![doc], vec![mention("a", 0, "quit", "x"), mention("b", 1, "left", "x")]).unwrap();
        let set = |m: &str, before: Vec<&str>| InferenceSet {
            doc_id: "d".into(),
            mention_id: m.into(),
            before: before.into_iter().map(String::from).collect(),
            after: vec!["He went home.".into()],
            provenance: Provenance::new(Source::Fixture),
        };
        (corpus, inference_map([set("a", vec!["He was angry.", "..."]), set("b", vec![])]))
    }

    #[test]
    fn inputs_follow_corpus_and_skip_empty_sentences() {
        let (corpus, infs) = tiny();
        let e = Embedder::new(EmbedderConfig::default()).unwrap();
        let split = build_split("x", corpus, &e, Some(&infs), Scope::Subtopic).unwrap();
        assert_eq!(split.inputs.len(), 2);
        assert_eq!(split.inputs[0].span.len(), 1);
        assert_eq!(split.inputs[0].before.len(), 1);
        assert_eq!(split.inputs[0].before[0].tokens.len(), 3);
        assert!(split.inputs[1].before.is_empty());
        assert_eq!(split.inputs[1].after.len(), 1);
        assert_eq!(split.pairs, vec![PairExample { first: 0, second: 1, label: true }]);
    }

    #[test]
    fn baseline_inputs_have_no_inferences() {
        let (corpus, _) = tiny();
        let e = Embedder::new(EmbedderConfig::default()).unwrap();
        let inputs = build_inputs(&corpus, &e, None).unwrap();
        assert!(inputs.iter().all(|m| m.before.is_empty() && m.after.is_empty()));
    }

    #[test]
    fn missing_inferences_are_an_error() {
        let (corpus, mut infs) = tiny();
        infs.remove(&("d".to_string(), "b".to_string()));
        let e = Embedder::new(EmbedderConfig::default()).unwrap();
        assert!(matches!(build_inputs(&corpus, &e, Some(&infs)), Err(Error::MissingFixture { .. })));
    }

    #[test]
    fn perfect_scores_give_gold_clusters() {
        let (corpus, _) = tiny();
        let e = Embedder::new(EmbedderConfig::default()).unwrap();
        let split = build_split("x", corpus, &e, None, Scope::Subtopic).unwrap();
        let scores = split.score_matrix(&[1.0]).unwrap();
        let (tau, conll) = split.tune_threshold(&scores, &[0.3, 0.5], EvalOptions::default()).unwrap();
        assert_eq!((tau, conll), (0.5, 1.0));
    }
}
