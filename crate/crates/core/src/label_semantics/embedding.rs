use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{ClassLabel, ClassifierVocabulary};
use crate::error::{Error, Result};

/// Word vectors keyed by word, all of one dimension.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    dimension: usize,
    rows: HashMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        EmbeddingTable {
            dimension,
            rows: HashMap::new(),
        }
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        if vector.len() != self.dimension {
            return Err(Error::Shape(format!(
                "embedding of length {} in a table of dimension {}",
                vector.len(),
                self.dimension
            )));
        }
        self.rows.insert(word.into(), vector);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.rows.get(word).map(Vec::as_slice)
    }

    /// Loads a GloVe-style text file: a word followed by `dimension` floats per line.
    ///
    /// When `keep` is given only those words are retained; the first occurrence of a
    /// word wins. Words containing spaces are supported by reading the floats from the
    /// end of the line.
    pub fn load(path: &Path, dimension: usize, keep: Option<&HashSet<String>>) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::resource(
                path,
                "embedding file not found (expected e.g. glove.840B.300d.txt)",
            ),
            _ => e.into(),
        })?;
        let mut table = EmbeddingTable::new(dimension);
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.split(' ').filter(|s| !s.is_empty()).collect();
            if fields.len() <= dimension {
                if fields.is_empty() {
                    continue;
                }
                return Err(Error::parse(
                    format!("embedding line {}", lineno + 1),
                    format!("expected a word and {dimension} floats"),
                ));
            }
            let split = fields.len() - dimension;
            let word = fields[..split].join(" ");
            if keep.is_some_and(|k| !k.contains(&word)) || table.rows.contains_key(&word) {
                continue;
            }
            let vector = fields[split..]
                .iter()
                .map(|s| s.parse::<f32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(format!("embedding line {}", lineno + 1), e.to_string()))?;
            table.rows.insert(word, vector);
        }
        Ok(table)
    }

    /// Mean of the embeddings of the label's tokens; tokens missing from the table are
    /// skipped. `None` when no token is present.
    pub fn embed(&self, label: &ClassLabel) -> Option<Vec<f64>> {
        let mut acc = vec![0.0f64; self.dimension];
        let mut n = 0usize;
        for token in label.tokens() {
            if let Some(v) = self.rows.get(token.as_str()) {
                for (a, &x) in acc.iter_mut().zip(v) {
                    *a += x as f64;
                }
                n += 1;
            }
        }
        if n == 0 {
            return None;
        }
        acc.iter_mut().for_each(|a| *a /= n as f64);
        Some(acc)
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// The `k` vocabulary entries whose mean token embedding is most cosine-similar to the
/// target's, by descending cosine with ties broken by ascending class index. Entries with
/// no embeddable token are never returned.
pub fn word2vec_candidates(
    target: &ClassLabel,
    vocab: &ClassifierVocabulary,
    table: &EmbeddingTable,
    k: usize,
) -> Result<Vec<(usize, f64)>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let query = table
        .embed(target)
        .ok_or_else(|| Error::NoEmbedding(target.text().to_string()))?;
    let mut scored: Vec<(usize, f64)> = vocab
        .entries()
        .iter()
        .filter_map(|e| table.embed(&e.label).map(|v| (e.class_index, cosine(&query, &v))))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label_semantics::{tokenize_label, SynsetId, VocabEntry};

    fn table() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(3);
        t.insert("water", vec![1.0, 0.0, 0.0]).unwrap();
        t.insert("bottle", vec![0.0, 1.0, 0.0]).unwrap();
        t.insert("wine", vec![0.0, 1.0, 1.0]).unwrap();
        t.insert("car", vec![0.0, 0.0, 1.0]).unwrap();
        t
    }

    fn vocab(labels: &[&str]) -> ClassifierVocabulary {
        ClassifierVocabulary::new(
            labels
                .iter()
                .enumerate()
                .map(|(i, l)| VocabEntry {
                    class_index: i,
                    synset_id: SynsetId::noun(i as u32 + 1),
                    label: tokenize_label(l).unwrap(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn multiword_label_is_mean_of_tokens() {
        let e = table().embed(&tokenize_label("water bottle").unwrap()).unwrap();
        assert_eq!(e, vec![0.5, 0.5, 0.0]);
        // missing tokens are skipped
        let e = table().embed(&tokenize_label("water gizmo").unwrap()).unwrap();
        assert_eq!(e, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn exact_label_ranks_first_with_unit_cosine() {
        let v = vocab(&["water bottle", "car", "bottle", "wine bottle"]);
        let got = word2vec_candidates(&tokenize_label("car").unwrap(), &v, &table(), 2).unwrap();
        assert_eq!(got[0].0, 1);
        assert!((got[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ties_break_by_class_index_and_survive_shuffling() {
        let v1 = vocab(&["car", "bottle", "water", "wine bottle", "bottle water"]);
        let v2 = vocab(&["bottle water", "wine bottle", "water", "bottle", "car"]);
        let target = tokenize_label("water bottle").unwrap();
        let a = word2vec_candidates(&target, &v1, &table(), 5).unwrap();
        let b = word2vec_candidates(&target, &v2, &table(), 5).unwrap();
        let names = |v: &ClassifierVocabulary, r: &[(usize, f64)]| -> Vec<String> {
            r.iter().map(|(i, _)| v.label(*i).unwrap().text().to_string()).collect()
        };
        // "bottle water" has cosine 1; "bottle" and "water" tie and keep index order
        assert_eq!(names(&v1, &a)[0], "bottle water");
        assert_eq!(names(&v1, &a)[1..3], ["bottle", "water"]);
        assert_eq!(names(&v2, &b)[0], "bottle water");
        assert_eq!(names(&v2, &b)[1..3], ["water", "bottle"]);
        for w in a.windows(2) {
            assert!(w[0].1 >= w[1].1);
        }
    }

    #[test]
    fn unembeddable_target_errors() {
        let v = vocab(&["car"]);
        let err = word2vec_candidates(&tokenize_label("zebra").unwrap(), &v, &table(), 1);
        assert!(matches!(err, Err(Error::NoEmbedding(_))));
    }

    #[test]
    fn loads_text_format_with_filter() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.txt");
        std::fs::write(&p, "car 0.1 0.2 0.3\n. . . 1 2 3\nbus 1 1 1\ncar 9 9 9\n").unwrap();
        let t = EmbeddingTable::load(&p, 3, None).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.get("car").unwrap(), &[0.1, 0.2, 0.3]);
        assert_eq!(t.get(". . .").unwrap(), &[1.0, 2.0, 3.0]);
        let keep: HashSet<String> = ["bus".to_string()].into();
        let t = EmbeddingTable::load(&p, 3, Some(&keep)).unwrap();
        assert_eq!(t.len(), 1);
        assert!(EmbeddingTable::load(&dir.path().join("nope"), 3, None).is_err());
    }

    #[test]
    fn rejects_wrong_dimension() {
        let mut t = EmbeddingTable::new(3);
        assert!(t.insert("x", vec![1.0]).is_err());
    }
}
