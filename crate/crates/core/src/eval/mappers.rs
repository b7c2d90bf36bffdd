use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::label_semantics::{
    tokenize_label, word2vec_candidates, wordnet_candidates, ClassifierVocabulary, EmbeddingTable, OntologyIndex,
};

/// Target labels of the published proxy-label comparison.
pub const PROXY_TARGETS: [&str; 7] = ["bottle", "car", "dog", "chair", "cat", "train", "sofa"];

/// Proxy labels the WordNet mapper is expected to produce per target.
pub const WORDNET_EXPECTED: [(&str, &[&str]); 7] = [
    ("bottle", &["beer bottle", "pill bottle", "soda bottle", "water bottle"]),
    ("car", &["racer", "sports car", "streetcar", "freight car"]),
    ("dog", &["pug", "terrier", "shepherd", "tibetan terrier"]),
    ("chair", &["folding chair", "barber chair"]),
    ("cat", &["tabby cat", "tiger cat", "siamese cat"]),
    ("train", &["bullet train"]),
    ("sofa", &["studio couch"]),
];

/// Expected embedding-mapper top-5 rows (only rows known in full) and partial rows.
pub const WORD2VEC_EXPECTED: [(&str, &[&str]); 3] = [
    ("sofa", &["folding chair", "pillow", "desk", "bookcase", "studio couch"]),
    ("cat", &["tabby cat", "fox terrier", "tiger cat", "toy terrier", "hamster"]),
    ("train", &["steam locomotive"]),
];

/// An expected label is produced when some produced entry's tokens include all of its
/// tokens (`"shepherd"` is met by `"german shepherd, german shepherd dog, ..."`).
pub fn label_satisfied(expected: &str, produced: &[String]) -> bool {
    let Ok(want) = tokenize_label(expected) else {
        return false;
    };
    produced.iter().any(|p| {
        tokenize_label(p)
            .map(|have| want.tokens().iter().all(|t| have.tokens().contains(t)))
            .unwrap_or(false)
    })
}

/// One mapper's output for one target and the expected labels it missed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapperColumn {
    pub labels: Vec<String>,
    pub missing: Vec<String>,
    /// `None` when no expectation exists for this target.
    pub pass: Option<bool>,
}

impl MapperColumn {
    fn new(labels: Vec<String>, expected: Option<&[&str]>) -> Self {
        let missing: Vec<String> = expected
            .unwrap_or(&[])
            .iter()
            .filter(|e| !label_satisfied(e, &labels))
            .map(|e| e.to_string())
            .collect();
        MapperColumn {
            pass: expected.map(|_| missing.is_empty()),
            labels,
            missing,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapperRow {
    pub target: String,
    pub wordnet: Option<MapperColumn>,
    pub word2vec: Option<MapperColumn>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapperComparison {
    pub k: usize,
    pub rows: Vec<MapperRow>,
}

impl MapperComparison {
    /// False when any row with an expectation failed; mappers without resources are
    /// skipped.
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| {
            [&r.wordnet, &r.word2vec]
                .iter()
                .all(|c| c.as_ref().and_then(|c| c.pass).unwrap_or(true))
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mark = |c: &Option<MapperColumn>| match c {
            None => "n/a".to_string(),
            Some(c) => match c.pass {
                Some(true) => "pass".into(),
                Some(false) => format!("FAIL (missing {})", c.missing.join(", ")),
                None => "-".into(),
            },
        };
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.target);
            for (name, col) in [("wordnet", &r.wordnet), ("word2vec", &r.word2vec)] {
                let labels = col
                    .as_ref()
                    .map(|c| c.labels.join("; "))
                    .unwrap_or_else(|| "(resource not loaded)".into());
                let _ = writeln!(out, "  {name:<9} [{}] {labels}", mark(col));
            }
        }
        out
    }
}

/// Unpruned WordNet candidates and embedding top-`k` for each target, side by side,
/// checked against the expected rows.
pub fn compare_mappers(
    targets: &[&str],
    vocab: &ClassifierVocabulary,
    ontology: Option<&OntologyIndex>,
    embeddings: Option<&EmbeddingTable>,
    k: usize,
) -> Result<MapperComparison> {
    let name = |i: usize| vocab.entries()[i].label.text().to_string();
    let mut rows = Vec::new();
    for &t in targets {
        let target = tokenize_label(t)?;
        let wordnet = ontology
            .map(|o| -> Result<MapperColumn> {
                let labels = wordnet_candidates(&target, vocab, o)?.into_iter().map(name).collect();
                let exp = WORDNET_EXPECTED.iter().find(|(x, _)| *x == t).map(|(_, e)| *e);
                Ok(MapperColumn::new(labels, exp))
            })
            .transpose()?;
        let word2vec = embeddings
            .map(|table| -> Result<MapperColumn> {
                let labels = word2vec_candidates(&target, vocab, table, k)?
                    .into_iter()
                    .map(|(i, _)| name(i))
                    .collect();
                let exp = WORD2VEC_EXPECTED.iter().find(|(x, _)| *x == t).map(|(_, e)| *e);
                Ok(MapperColumn::new(labels, exp))
            })
            .transpose()?;
        rows.push(MapperRow {
            target: t.to_string(),
            wordnet,
            word2vec,
        });
    }
    Ok(MapperComparison { k, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn satisfaction_is_token_containment() {
        let produced = vec!["german shepherd, german shepherd dog, alsatian".to_string()];
        assert!(label_satisfied("shepherd", &produced));
        assert!(!label_satisfied("shepherd dog collie", &produced));
        assert!(!label_satisfied("pug", &produced));
    }

    #[test]
    fn failed_row_lists_missing_labels() {
        let c = MapperColumn::new(vec!["tabby, tabby cat".into()], Some(&["tabby cat", "tiger cat"]));
        assert_eq!(c.pass, Some(false));
        assert_eq!(c.missing, vec!["tiger cat"]);
    }

    #[test]
    fn bundled_wordnet_meets_expectations() {
        let vocab = ClassifierVocabulary::imagenet1k();
        let ontology = OntologyIndex::wordnet30();
        let cmp = compare_mappers(&PROXY_TARGETS, &vocab, Some(&ontology), None, 5).unwrap();
        assert!(cmp.all_pass(), "{}", cmp.to_text());
        let train = cmp.rows.iter().find(|r| r.target == "train").unwrap();
        let labels = &train.wordnet.as_ref().unwrap().labels;
        assert!(!label_satisfied("steam locomotive", labels), "{labels:?}");
    }
}
