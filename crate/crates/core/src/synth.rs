//! Bag-of-words synthetic corpora with known topic labels.
//!
//! Each document is a random subset of its topic's vocabulary, so with the
//! offline embedder same-topic documents share words and cross-topic ones
//! share none.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{RawDocument, TestQuestion};
use crate::embed::offline_embed;
use crate::geometry::cosine_distance;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSpec {
    pub name: String,
    pub vocabulary: Vec<String>,
    pub n_chunks: usize,
    pub words_per_doc: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionTarget {
    Topic(usize),
    OffTopic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionSpec {
    pub target: QuestionTarget,
    pub count: usize,
    pub words: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub topics: Vec<TopicSpec>,
    pub questions: Vec<QuestionSpec>,
    /// Words for off-topic questions; must not overlap any topic.
    pub off_topic_vocabulary: Vec<String>,
    pub seed: u64,
    pub require_disjoint: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub documents: Vec<RawDocument>,
    pub questions: Vec<TestQuestion>,
    /// Topic index of each document.
    pub doc_labels: Vec<usize>,
    /// Topic index of each question, `None` for off-topic ones.
    pub question_labels: Vec<Option<usize>>,
}

fn words(list: &[&str]) -> Vec<String> {
    list.iter().map(|w| w.to_string()).collect()
}

pub const FINANCE_WORDS: &[&str] = &[
    "fund", "shares", "dividend", "portfolio", "yield", "bond", "equity", "prospectus", "expense", "redemption",
];

pub const ACCOUNT_WORDS: &[&str] = &[
    "password", "login", "profile", "settings", "username", "security", "verification", "email", "session", "reset",
];

pub const BIRD_WORDS: &[&str] = &[
    "heron", "sparrow", "robin", "falcon", "eagle", "owl", "warbler", "finch", "pelican", "flamingo", "hummingbird",
    "woodpecker", "kingfisher", "swallow", "wren", "magpie", "raven", "crow", "starling", "egret", "osprey", "hawk",
    "kestrel", "plover", "sandpiper", "puffin", "albatross", "cormorant", "gull", "tern", "toucan", "parrot", "macaw",
    "cockatoo", "lark", "thrush", "nightingale", "oriole", "cardinal", "bluejay", "chickadee", "nuthatch", "crane",
    "stork", "ibis", "swan", "goose", "mallard",
];

pub const GEOLOGY_WORDS: &[&str] = &[
    "volcano", "glacier", "tectonic", "magma", "basalt", "granite", "erosion", "sediment", "fossil", "quartz", "canyon",
    "geyser",
];

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.topics.is_empty() {
            return Err(SynthError::Invalid("at least one topic is required".into()));
        }
        for (i, t) in self.topics.iter().enumerate() {
            let distinct: BTreeSet<&String> = t.vocabulary.iter().collect();
            if t.n_chunks == 0 || t.words_per_doc == 0 {
                return Err(SynthError::Invalid(format!("topic {i}: counts must be at least 1")));
            }
            if distinct.len() != t.vocabulary.len() || t.words_per_doc > distinct.len() {
                return Err(SynthError::Invalid(format!(
                    "topic {i}: vocabulary needs {} distinct words",
                    t.words_per_doc
                )));
            }
        }
        for (i, q) in self.questions.iter().enumerate() {
            if q.count == 0 || q.words == 0 {
                return Err(SynthError::Invalid(format!("question group {i}: counts must be at least 1")));
            }
            let available = match q.target {
                QuestionTarget::Topic(t) => {
                    self.topics
                        .get(t)
                        .ok_or_else(|| SynthError::Invalid(format!("question group {i}: no topic {t}")))?
                        .vocabulary
                        .len()
                }
                QuestionTarget::OffTopic => self.off_topic_vocabulary.len(),
            };
            if q.words > available {
                return Err(SynthError::Invalid(format!("question group {i}: only {available} words available")));
            }
        }
        let mut seen: BTreeSet<&String> = BTreeSet::new();
        for t in &self.topics {
            for w in &t.vocabulary {
                if !seen.insert(w) && self.require_disjoint {
                    return Err(SynthError::Invalid(format!("word `{w}` appears in two topics")));
                }
            }
        }
        if let Some(w) = self.off_topic_vocabulary.iter().find(|w| seen.contains(w)) {
            return Err(SynthError::Invalid(format!("off-topic word `{w}` also appears in a topic")));
        }
        Ok(())
    }
}

fn sample(vocab: &[String], n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    vocab.choose_multiple(rng, n).cloned().collect()
}

pub fn generate_corpus(spec: &SyntheticSpec) -> Result<SyntheticCorpus, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut documents = Vec::new();
    let mut doc_labels = Vec::new();
    for (t, topic) in spec.topics.iter().enumerate() {
        for i in 0..topic.n_chunks {
            let text = format!("{}.", sample(&topic.vocabulary, topic.words_per_doc, &mut rng).join(" "));
            let doc = RawDocument::new(format!("{}-{i:03}", topic.name), &text)
                .map_err(|e| SynthError::Invalid(e.to_string()))?;
            documents.push(doc);
            doc_labels.push(t);
        }
    }
    let mut questions = Vec::new();
    let mut question_labels = Vec::new();
    for group in &spec.questions {
        let (vocab, label) = match group.target {
            QuestionTarget::Topic(t) => (&spec.topics[t].vocabulary, Some(t)),
            QuestionTarget::OffTopic => (&spec.off_topic_vocabulary, None),
        };
        for _ in 0..group.count {
            let text = format!("{}?", sample(vocab, group.words, &mut rng).join(" "));
            questions.push(TestQuestion { index: questions.len(), text });
            question_labels.push(label);
        }
    }
    Ok(SyntheticCorpus { documents, questions, doc_labels, question_labels })
}

fn topic(name: &str, vocab: &[&str], n_chunks: usize, words_per_doc: usize) -> TopicSpec {
    TopicSpec { name: name.into(), vocabulary: words(vocab), n_chunks, words_per_doc }
}

/// Two topics of 30 documents each and a single off-topic question.
pub fn two_topics(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        topics: vec![topic("finance", FINANCE_WORDS, 30, 8), topic("account", ACCOUNT_WORDS, 30, 8)],
        questions: vec![QuestionSpec { target: QuestionTarget::OffTopic, count: 1, words: 6 }],
        off_topic_vocabulary: words(GEOLOGY_WORDS),
        seed,
        require_disjoint: true,
    }
}

/// A finance topic plus an injected, unrelated bird topic; five finance
/// questions.
pub fn finance_with_birds(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        topics: vec![topic("finance", FINANCE_WORDS, 30, 8), topic("birds", BIRD_WORDS, 30, 10)],
        questions: vec![QuestionSpec { target: QuestionTarget::Topic(0), count: 5, words: 8 }],
        off_topic_vocabulary: words(GEOLOGY_WORDS),
        seed,
        require_disjoint: true,
    }
}

/// Two relevant topics with questions and one unrelated topic without.
pub fn irrelevant_topic(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        topics: vec![
            topic("finance", FINANCE_WORDS, 30, 8),
            topic("account", ACCOUNT_WORDS, 30, 8),
            topic("birds", BIRD_WORDS, 30, 10),
        ],
        questions: vec![
            QuestionSpec { target: QuestionTarget::Topic(0), count: 4, words: 8 },
            QuestionSpec { target: QuestionTarget::Topic(1), count: 4, words: 8 },
        ],
        off_topic_vocabulary: words(GEOLOGY_WORDS),
        seed,
        require_disjoint: true,
    }
}

/// Mean within-topic and cross-topic cosine distance per topic under the
/// offline embedder.
pub fn topic_separation(corpus: &SyntheticCorpus, dimension: usize) -> Vec<(f64, f64)> {
    let vecs: Vec<Vec<f64>> = corpus
        .documents
        .iter()
        .map(|d| offline_embed(&d.text, dimension).expect("synthetic documents are non-empty"))
        .collect();
    let n_topics = corpus.doc_labels.iter().max().map_or(0, |m| m + 1);
    let mut sums = vec![(0.0, 0usize, 0.0, 0usize); n_topics];
    for i in 0..vecs.len() {
        for j in 0..vecs.len() {
            if i == j {
                continue;
            }
            let d = cosine_distance(&vecs[i], &vecs[j]).expect("same dimension, unit rows");
            let entry = &mut sums[corpus.doc_labels[i]];
            if corpus.doc_labels[i] == corpus.doc_labels[j] {
                entry.0 += d;
                entry.1 += 1;
            } else {
                entry.2 += d;
                entry.3 += 1;
            }
        }
    }
    sums.into_iter()
        .map(|(w, nw, c, nc)| (w / nw.max(1) as f64, if nc == 0 { f64::INFINITY } else { c / nc as f64 }))
        .collect()
}

/// True when every topic is tighter internally than against other topics.
pub fn is_separated(corpus: &SyntheticCorpus, dimension: usize) -> bool {
    topic_separation(corpus, dimension).iter().all(|(within, cross)| within < cross)
}
