//! Deterministic synthetic corpora with a controllable mix of lexically easy
//! and commonsense-only ("hard") coreference clusters.
//!
//! Every gold cluster is tied to an event family. Mentions of an easy cluster
//! share one head lexeme from the family. Mentions of a hard cluster get
//! pairwise distinct head lexemes drawn without regard to the family, so the
//! only shared signal is in the inference fixtures: each mention draws three
//! of the cluster's four pool sentences per relation (any two mentions share
//! at least two) plus generic filler.

use std::collections::{BTreeSet, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{self, FAMILIES};
use super::{Corpus, Document, Mention};
use crate::commonsense::{InferenceSet, Provenance, Source, DEFAULT_K};
use crate::error::{Error, Result};

const POOL_SIZE: usize = 4;
const POOL_DRAWS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_topics: usize,
    pub clusters_per_topic: usize,
    pub mentions_per_cluster: usize,
    pub hard_fraction: f64,
    pub distractor_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_topics: 4,
            clusters_per_topic: 4,
            mentions_per_cluster: 4,
            hard_fraction: 0.5,
            distractor_rate: 0.5,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.n_topics == 0 || self.clusters_per_topic == 0 || self.mentions_per_cluster == 0 {
            return bad("n_topics, clusters_per_topic and mentions_per_cluster must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.hard_fraction) {
            return bad(format!("hard_fraction {} outside [0, 1]", self.hard_fraction));
        }
        if !(self.distractor_rate.is_finite() && self.distractor_rate >= 0.0) {
            return bad(format!("distractor_rate {} must be >= 0", self.distractor_rate));
        }
        if self.clusters_per_topic > FAMILIES.len() {
            return bad(format!(
                "clusters_per_topic {} exceeds the {} available event families",
                self.clusters_per_topic,
                FAMILIES.len()
            ));
        }
        if self.clusters_per_topic * self.mentions_per_cluster > lexicon().len() {
            return bad(format!(
                "a topic needs up to {} distinct head lexemes but only {} exist",
                self.clusters_per_topic * self.mentions_per_cluster,
                lexicon().len()
            ));
        }
        Ok(())
    }

    pub fn expected_mentions(&self) -> usize {
        self.n_topics * self.clusters_per_topic * self.mentions_per_cluster
    }

    pub fn expected_clusters(&self) -> usize {
        self.n_topics * self.clusters_per_topic
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub fixtures: Vec<InferenceSet>,
    pub hard_clusters: BTreeSet<String>,
}

impl SyntheticCorpus {
    pub fn is_hard(&self, mention: &Mention) -> bool {
        mention
            .gold_cluster_id
            .as_ref()
            .is_some_and(|c| self.hard_clusters.contains(c))
    }

    /// The easy-cluster-only sub-corpus.
    pub fn easy_subset(&self) -> Corpus {
        self.corpus.filter_mentions(|m| !self.is_hard(m))
    }

    /// Prefix every document, mention and gold cluster id, so corpora
    /// generated from different seeds can share one inference store.
    pub fn with_id_prefix(self, prefix: &str) -> Result<Self> {
        let p = |s: &str| format!("{prefix}{s}");
        let documents = self
            .corpus
            .documents()
            .iter()
            .map(|d| Document { doc_id: p(&d.doc_id), ..d.clone() })
            .collect();
        let mentions = self
            .corpus
            .mentions()
            .iter()
            .map(|m| Mention {
                mention_id: p(&m.mention_id),
                doc_id: p(&m.doc_id),
                gold_cluster_id: m.gold_cluster_id.as_deref().map(p),
                ..m.clone()
            })
            .collect();
        let fixtures = self
            .fixtures
            .into_iter()
            .map(|f| InferenceSet { doc_id: p(&f.doc_id), mention_id: p(&f.mention_id), ..f })
            .collect();
        Ok(SyntheticCorpus {
            corpus: Corpus::new(documents, mentions)?,
            fixtures,
            hard_clusters: self.hard_clusters.iter().map(|c| p(c)).collect(),
        })
    }
}

fn lexicon() -> Vec<&'static str> {
    FAMILIES
        .iter()
        .flat_map(|f| f.lexemes.iter().copied())
        .chain(vocab::EXTRA_LEXEMES.iter().copied())
        .collect()
}

struct ClusterPlan {
    id: String,
    lexemes: Vec<&'static str>,
    before_pool: Vec<&'static str>,
    after_pool: Vec<&'static str>,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lexicon = lexicon();

    let total = spec.expected_clusters();
    let n_hard = (spec.hard_fraction * total as f64).round() as usize;
    let mut hard_slots: Vec<bool> = (0..total).map(|i| i < n_hard).collect();
    hard_slots.shuffle(&mut rng);

    let mut documents = Vec::new();
    let mut mentions = Vec::new();
    let mut fixtures = Vec::new();
    let mut hard_clusters = BTreeSet::new();

    for t in 0..spec.n_topics {
        let topic_id = format!("t{t:02}");
        let subtopic_id = format!("{topic_id}s0");
        let mut families: Vec<usize> = (0..FAMILIES.len()).collect();
        families.shuffle(&mut rng);
        let hard_flags = &hard_slots[t * spec.clusters_per_topic..(t + 1) * spec.clusters_per_topic];

        let mut used: HashSet<&str> = HashSet::new();
        let mut plans: Vec<Option<ClusterPlan>> = (0..spec.clusters_per_topic).map(|_| None).collect();
        // Easy clusters claim their family lexeme first so hard clusters never steal it.
        let order: Vec<usize> = (0..spec.clusters_per_topic)
            .filter(|&c| !hard_flags[c])
            .chain((0..spec.clusters_per_topic).filter(|&c| hard_flags[c]))
            .collect();
        for c in order {
            let fam = &FAMILIES[families[c]];
            let hard = hard_flags[c];
            let id = format!("{topic_id}_c{c:02}_{}", if hard { "hard" } else { "easy" });
            let lexemes = if hard {
                let free: Vec<&'static str> =
                    lexicon.iter().copied().filter(|l| !used.contains(l)).collect();
                free.choose_multiple(&mut rng, spec.mentions_per_cluster)
                    .copied()
                    .collect::<Vec<_>>()
            } else {
                let free: Vec<&'static str> =
                    fam.lexemes.iter().copied().filter(|l| !used.contains(l)).collect();
                let lex = *free.choose(&mut rng).expect("family lexemes are unique per topic");
                vec![lex; spec.mentions_per_cluster]
            };
            used.extend(lexemes.iter().copied());
            if hard {
                hard_clusters.insert(id.clone());
            }
            plans[c] = Some(ClusterPlan {
                id,
                lexemes,
                before_pool: fam.before.choose_multiple(&mut rng, POOL_SIZE).copied().collect(),
                after_pool: fam.after.choose_multiple(&mut rng, POOL_SIZE).copied().collect(),
            });
        }
        let plans: Vec<ClusterPlan> = plans.into_iter().map(|p| p.expect("planned")).collect();

        for j in 0..spec.mentions_per_cluster {
            let doc_id = format!("{topic_id}_d{j:02}");
            let mut sentences: Vec<Vec<String>> = Vec::new();
            let mut cluster_order: Vec<usize> = (0..plans.len()).collect();
            cluster_order.shuffle(&mut rng);
            for c in cluster_order {
                let plan = &plans[c];
                let lexeme = plan.lexemes[j];
                let sentence: Vec<String> = [
                    *vocab::SUBJECTS.choose(&mut rng).unwrap(),
                    lexeme,
                    *vocab::OBJECTS.choose(&mut rng).unwrap(),
                    *vocab::PLACES.choose(&mut rng).unwrap(),
                    ".",
                ]
                .iter()
                .map(|s| s.to_string())
                .collect();
                let mention_id = format!("{doc_id}_m{c:02}");
                mentions.push(Mention {
                    mention_id: mention_id.clone(),
                    doc_id: doc_id.clone(),
                    sentence_index: sentences.len(),
                    token_start: 1,
                    token_end: 1,
                    text: lexeme.to_string(),
                    gold_cluster_id: Some(plan.id.clone()),
                });
                sentences.push(sentence);
                fixtures.push(InferenceSet {
                    doc_id: doc_id.clone(),
                    mention_id,
                    before: draw_inferences(&plan.before_pool, &mut rng),
                    after: draw_inferences(&plan.after_pool, &mut rng),
                    provenance: Provenance::new(Source::Fixture),
                });
                for _ in 0..distractor_count(spec.distractor_rate, &mut rng) {
                    sentences.push(distractor_sentence(&mut rng));
                }
            }
            documents.push(Document {
                doc_id,
                topic_id: topic_id.clone(),
                subtopic_id: subtopic_id.clone(),
                sentences,
            });
        }
    }

    let corpus = Corpus::new(documents, mentions)?;
    Ok(SyntheticCorpus {
        corpus,
        fixtures,
        hard_clusters,
    })
}

fn draw_inferences(pool: &[&'static str], rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut out: Vec<String> = pool
        .choose_multiple(rng, POOL_DRAWS)
        .map(|s| s.to_string())
        .collect();
    out.extend(
        vocab::GENERIC_INFERENCES
            .choose_multiple(rng, DEFAULT_K - POOL_DRAWS)
            .map(|s| s.to_string()),
    );
    out.shuffle(rng);
    out
}

fn distractor_count(rate: f64, rng: &mut ChaCha8Rng) -> usize {
    let whole = rate.floor();
    let extra = rng.random_bool((rate - whole).clamp(0.0, 1.0));
    whole as usize + usize::from(extra)
}

fn distractor_sentence(rng: &mut ChaCha8Rng) -> Vec<String> {
    [
        "the",
        *vocab::DISTRACTOR_NOUNS.choose(rng).unwrap(),
        "was",
        *vocab::DISTRACTOR_ADJECTIVES.choose(rng).unwrap(),
        ".",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}
