use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    tokenize_label, word2vec_candidates, wordnet_candidates, ClassLabel, EmbeddingTable, Mapper,
    OntologyIndex,
};
use crate::classifier::{ClassScores, ClassifierBackend, ImageTensor};
use crate::error::{Error, Result};

/// A vocabulary class with the classifier probability it was ranked by.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredClass {
    pub class_index: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProxyWarning {
    /// The mapper found no related vocabulary entry; the positive map will be all zero.
    NoPositiveCandidates,
    /// Fewer negatives were available than requested.
    NegativesExhausted { requested: usize, available: usize },
}

impl fmt::Display for ProxyWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProxyWarning::NoPositiveCandidates => {
                f.write_str("no positive proxy candidates; using an all-zero positive map")
            }
            ProxyWarning::NegativesExhausted {
                requested,
                available,
            } => write!(f, "requested {requested} negatives but only {available} remain"),
        }
    }
}

/// Positive and negative stand-ins for a target label, drawn from the classifier vocabulary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyLabelSet {
    pub target: ClassLabel,
    pub positives: Vec<ScoredClass>,
    pub negatives: Vec<ScoredClass>,
    pub k_max: usize,
    #[serde(default)]
    pub warnings: Vec<ProxyWarning>,
}

impl ProxyLabelSet {
    pub fn positive_indices(&self) -> Vec<usize> {
        self.positives.iter().map(|s| s.class_index).collect()
    }

    pub fn negative_indices(&self) -> Vec<usize> {
        self.negatives.iter().map(|s| s.class_index).collect()
    }

    /// Checks size bounds, disjointness and score ordering.
    pub fn validate(&self) -> Result<()> {
        if self.positives.len() > self.k_max || self.negatives.len() > self.k_max {
            return Err(Error::Config(format!(
                "proxy set exceeds k_max = {}",
                self.k_max
            )));
        }
        let pos: HashSet<usize> = self.positive_indices().into_iter().collect();
        if self.negatives.iter().any(|n| pos.contains(&n.class_index)) {
            return Err(Error::Config("positive and negative proxies overlap".into()));
        }
        for list in [&self.positives, &self.negatives] {
            if list.windows(2).any(|w| w[0].score < w[1].score) {
                return Err(Error::Config("proxy scores are not non-increasing".into()));
            }
        }
        Ok(())
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    Ok(())
}

/// The `k` best candidates by classifier probability (descending, ties by ascending
/// index). Duplicate candidates count once.
pub fn rank_candidates(
    candidates: &[usize],
    scores: &ClassScores,
    k: usize,
) -> Result<(Vec<ScoredClass>, Option<ProxyWarning>)> {
    check_k(k)?;
    if candidates.is_empty() {
        return Ok((Vec::new(), Some(ProxyWarning::NoPositiveCandidates)));
    }
    let mut admitted = vec![false; scores.len()];
    for &c in candidates {
        if c >= scores.len() {
            return Err(Error::Index {
                index: c,
                size: scores.len(),
            });
        }
        admitted[c] = true;
    }
    let mut ranked = scores.ranked(|i| admitted[i]);
    ranked.truncate(k);
    Ok((to_scored(ranked), None))
}

fn to_scored(v: Vec<(usize, f64)>) -> Vec<ScoredClass> {
    v.into_iter()
        .map(|(class_index, score)| ScoredClass { class_index, score })
        .collect()
}

pub fn prune_by_classifier(
    candidates: &[usize],
    image: &ImageTensor,
    classifier: &dyn ClassifierBackend,
    k: usize,
) -> Result<(Vec<ScoredClass>, Option<ProxyWarning>)> {
    check_k(k)?;
    if candidates.is_empty() {
        return Ok((Vec::new(), Some(ProxyWarning::NoPositiveCandidates)));
    }
    rank_candidates(candidates, &classifier.predict_scores(image)?, k)
}

/// The `k` most probable classes outside `positives`.
pub fn select_negatives_from_scores(
    scores: &ClassScores,
    positives: &[usize],
    k: usize,
) -> (Vec<ScoredClass>, Option<ProxyWarning>) {
    let excluded: HashSet<usize> = positives.iter().copied().collect();
    let mut ranked = scores.ranked(|i| !excluded.contains(&i));
    let available = ranked.len();
    ranked.truncate(k);
    let warning = (k > available).then_some(ProxyWarning::NegativesExhausted {
        requested: k,
        available,
    });
    (to_scored(ranked), warning)
}

pub fn select_negative_labels(
    image: &ImageTensor,
    classifier: &dyn ClassifierBackend,
    positives: &[usize],
    k: usize,
) -> Result<(Vec<ScoredClass>, Option<ProxyWarning>)> {
    if k == 0 {
        return Ok((Vec::new(), None));
    }
    Ok(select_negatives_from_scores(
        &classifier.predict_scores(image)?,
        positives,
        k,
    ))
}

/// Loaded resources a mapper may need; only the one for the chosen mapper is required.
#[derive(Clone, Copy, Debug, Default)]
pub struct MapperResources<'a> {
    pub ontology: Option<&'a OntologyIndex>,
    pub embeddings: Option<&'a EmbeddingTable>,
}

impl<'a> MapperResources<'a> {
    /// Vocabulary candidates for `target` before classifier pruning.
    pub fn candidates(
        &self,
        mapper: Mapper,
        target: &ClassLabel,
        classifier: &dyn ClassifierBackend,
        k: usize,
    ) -> Result<Vec<usize>> {
        let vocab = classifier.vocabulary();
        match mapper {
            Mapper::WordNet => {
                let ontology = self
                    .ontology
                    .ok_or_else(|| Error::Config("wordnet mapper needs an ontology".into()))?;
                wordnet_candidates(target, vocab, ontology)
            }
            Mapper::Word2Vec => {
                let table = self
                    .embeddings
                    .ok_or_else(|| Error::Config("word2vec mapper needs embeddings".into()))?;
                Ok(word2vec_candidates(target, vocab, table, k)?
                    .into_iter()
                    .map(|(i, _)| i)
                    .collect())
            }
        }
    }
}

/// Candidate generation, pruning by the classifier's probabilities on `image`, then
/// negative selection. The classifier is queried once.
pub fn build_proxy_set(
    target_text: &str,
    image: &ImageTensor,
    mapper: Mapper,
    resources: MapperResources<'_>,
    classifier: &dyn ClassifierBackend,
    k: usize,
) -> Result<ProxyLabelSet> {
    check_k(k)?;
    let target = tokenize_label(target_text)?;
    let candidates = resources.candidates(mapper, &target, classifier, k)?;
    let scores = classifier.predict_scores(image)?;
    let mut warnings = Vec::new();
    let (positives, w) = rank_candidates(&candidates, &scores, k)?;
    warnings.extend(w);
    let pos_idx: Vec<usize> = positives.iter().map(|s| s.class_index).collect();
    let (negatives, w) = select_negatives_from_scores(&scores, &pos_idx, k);
    warnings.extend(w);
    for w in &warnings {
        log::warn!("{target}: {w}");
    }
    let set = ProxyLabelSet {
        target,
        positives,
        negatives,
        k_max: k,
        warnings,
    };
    set.validate()?;
    Ok(set)
}
