//! Mapping a free-text target label onto the classifier's own label vocabulary.
//!
//! Positive proxies come from a semantic mapper (WordNet or word embeddings) pruned by
//! the classifier's probabilities on the image; negative proxies are the classifier's
//! most likely classes outside the positive set.

mod embedding;
mod proxy;
mod vocab;
mod wordnet;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use embedding::{word2vec_candidates, EmbeddingTable};
pub use proxy::{
    build_proxy_set, prune_by_classifier, rank_candidates, select_negative_labels,
    select_negatives_from_scores, MapperResources, ProxyLabelSet, ProxyWarning, ScoredClass,
};
pub use vocab::{ClassifierVocabulary, VocabEntry};
pub use wordnet::{wordnet_candidates, OntologyIndex, SynsetId, SynsetRecord};

/// Number of positive (and negative) proxy labels used unless configured otherwise.
pub const DEFAULT_K: usize = 5;

/// A lowercased label and its word tokens.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassLabel {
    text: String,
    tokens: Vec<String>,
}

impl ClassLabel {
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// The comma-separated alternative names, trimmed (`"tabby, tabby cat"` has two).
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.text.split(',').map(str::trim).filter(|s| !s.is_empty())
    }

    /// First alternative name; ImageNet lists the most common one first.
    pub fn primary_name(&self) -> &str {
        self.names().next().unwrap_or(&self.text)
    }

    pub fn shares_token_with(&self, other: &ClassLabel) -> bool {
        self.tokens.iter().any(|t| other.tokens.contains(t))
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl std::str::FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        tokenize_label(s)
    }
}

/// Lowercases `text` and splits it on whitespace, commas and hyphens.
///
/// Empty pieces are dropped and repeated tokens keep only their first occurrence.
pub fn tokenize_label(text: &str) -> Result<ClassLabel> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(Error::InvalidLabel(text.to_string()));
    }
    let lower = trimmed.to_lowercase();
    let mut tokens: Vec<String> = Vec::new();
    for piece in lower.split(|c: char| c.is_whitespace() || c == ',' || c == '-') {
        if !piece.is_empty() && !tokens.iter().any(|t| t == piece) {
            tokens.push(piece.to_string());
        }
    }
    if tokens.is_empty() {
        return Err(Error::InvalidLabel(text.to_string()));
    }
    Ok(ClassLabel {
        text: lower,
        tokens,
    })
}

/// Which semantic mapper produces positive candidates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mapper {
    WordNet,
    Word2Vec,
}

impl std::str::FromStr for Mapper {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wordnet" => Ok(Mapper::WordNet),
            "word2vec" | "glove" => Ok(Mapper::Word2Vec),
            other => Err(Error::Config(format!(
                "unknown mapper {other:?} (expected wordnet or word2vec)"
            ))),
        }
    }
}

impl fmt::Display for Mapper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mapper::WordNet => "wordnet",
            Mapper::Word2Vec => "word2vec",
        })
    }
}
