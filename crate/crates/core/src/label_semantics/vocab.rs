use std::collections::HashSet;
use std::path::Path;

use super::{tokenize_label, ClassLabel, SynsetId};
use crate::error::{Error, Result};

const IMAGENET1K_TSV: &str = include_str!("../../data/imagenet1k_vocab.tsv");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VocabEntry {
    pub class_index: usize,
    pub synset_id: SynsetId,
    pub label: ClassLabel,
}

/// The ordered label set a classifier was trained on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassifierVocabulary {
    entries: Vec<VocabEntry>,
}

impl ClassifierVocabulary {
    /// Validates contiguous indices from 0 and unique synset ids.
    pub fn new(mut entries: Vec<VocabEntry>) -> Result<Self> {
        entries.sort_by_key(|e| e.class_index);
        let mut seen = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if e.class_index != i {
                return Err(Error::Config(format!(
                    "vocabulary class indices must be contiguous from 0; found {} at position {}",
                    e.class_index, i
                )));
            }
            if !seen.insert(e.synset_id) {
                return Err(Error::Config(format!(
                    "duplicate synset id {} in vocabulary",
                    e.synset_id
                )));
            }
        }
        Ok(ClassifierVocabulary { entries })
    }

    /// The 1000-class ImageNet vocabulary bundled with the crate.
    pub fn imagenet1k() -> Self {
        Self::parse_tsv(IMAGENET1K_TSV).expect("bundled vocabulary is well-formed")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::resource(path, "vocabulary TSV not found"),
            _ => e.into(),
        })?;
        Self::parse_tsv(&text)
    }

    /// TSV with columns `class_index`, `synset_id`, `label_text`; an optional header row
    /// starting with `class_index` is skipped.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() || (lineno == 0 && line.starts_with("class_index")) {
                continue;
            }
            let mut cols = line.splitn(3, '\t');
            let (idx, syn, label) = match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => {
                    return Err(Error::parse(
                        format!("vocabulary line {}", lineno + 1),
                        "expected 3 tab-separated columns",
                    ))
                }
            };
            let class_index = idx.trim().parse().map_err(|_| {
                Error::parse(format!("vocabulary line {}", lineno + 1), "bad class index")
            })?;
            entries.push(VocabEntry {
                class_index,
                synset_id: SynsetId::parse(syn.trim())?,
                label: tokenize_label(label)?,
            });
        }
        Self::new(entries)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("class_index\tsynset_id\tlabel_text\n");
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.class_index, e.synset_id, e.label));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn entry(&self, class_index: usize) -> Result<&VocabEntry> {
        self.entries.get(class_index).ok_or(Error::Index {
            index: class_index,
            size: self.entries.len(),
        })
    }

    pub fn label(&self, class_index: usize) -> Option<&ClassLabel> {
        self.entries.get(class_index).map(|e| &e.label)
    }

    /// Entries having `name` as one of their comma-separated names.
    pub fn find_by_name(&self, name: &str) -> Vec<usize> {
        let needle = name.trim().to_lowercase();
        self.entries
            .iter()
            .filter(|e| e.label.names().any(|n| n == needle))
            .map(|e| e.class_index)
            .collect()
    }
}
