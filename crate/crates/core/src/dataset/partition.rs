use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The 20 VOC object classes in annotation-index order (index 1 = aeroplane).
pub const VOC_CLASSES: [&str; 20] = [
    "aeroplane",
    "bicycle",
    "bird",
    "boat",
    "bottle",
    "bus",
    "car",
    "cat",
    "chair",
    "cow",
    "diningtable",
    "dog",
    "horse",
    "motorbike",
    "person",
    "pottedplant",
    "sheep",
    "sofa",
    "train",
    "tvmonitor",
];

/// Natural-language form of a VOC class id, used when mapping it onto a vocabulary.
pub fn voc_label_text(class: &str) -> &str {
    match class {
        "diningtable" => "dining table",
        "pottedplant" => "potted plant",
        "tvmonitor" => "tv monitor",
        other => other,
    }
}

/// A train/test split of a label universe.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub index: usize,
    pub test_labels: Vec<String>,
    pub train_labels: Vec<String>,
}

impl PartitionSpec {
    /// Builds a partition of `universe` with `test_labels` held out. The test labels must
    /// all belong to the universe.
    pub fn new(index: usize, universe: &[&str], test_labels: &[&str]) -> Result<Self> {
        for t in test_labels {
            if !universe.contains(t) {
                return Err(Error::InvalidLabel(t.to_string()));
            }
        }
        let p = PartitionSpec {
            index,
            test_labels: test_labels.iter().map(|s| s.to_string()).collect(),
            train_labels: universe
                .iter()
                .filter(|l| !test_labels.contains(l))
                .map(|s| s.to_string())
                .collect(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Reads a custom partition from TOML with `index`, `test_labels` and `train_labels`.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::resource(path, "partition file not found"));
        }
        let text = std::fs::read_to_string(path)?;
        let p: PartitionSpec = toml::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    /// A label on both sides is reported as a data leak.
    pub fn validate(&self) -> Result<()> {
        let test: BTreeSet<&str> = self.test_labels.iter().map(String::as_str).collect();
        if test.len() != self.test_labels.len() {
            return Err(Error::Config(format!(
                "partition {} repeats a test label",
                self.index
            )));
        }
        if let Some(l) = self.train_labels.iter().find(|l| test.contains(l.as_str())) {
            return Err(Error::DataLeak { label: l.clone() });
        }
        if self.test_labels.is_empty() || self.train_labels.is_empty() {
            return Err(Error::Config(format!(
                "partition {} needs both train and test labels",
                self.index
            )));
        }
        Ok(())
    }

    pub fn is_test_label(&self, label: &str) -> bool {
        self.test_labels.iter().any(|l| l == label)
    }

    pub fn is_train_label(&self, label: &str) -> bool {
        self.train_labels.iter().any(|l| l == label)
    }

    pub fn labels(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train_labels,
            Split::Test => &self.test_labels,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// The four PASCAL-5i folds: sorted classes, five consecutive per fold.
pub fn load_partitions() -> Vec<PartitionSpec> {
    (0..4)
        .map(|i| PartitionSpec::new(i, &VOC_CLASSES, &VOC_CLASSES[i * 5..i * 5 + 5]).expect("fixed folds are valid"))
        .collect()
}

/// Folds over the synthetic palette: two held-out colours per fold.
pub fn synthetic_partitions() -> Vec<PartitionSpec> {
    let labels = super::synth::PALETTE.map(|(l, _)| l);
    (0..3)
        .map(|i| PartitionSpec::new(i, &labels, &labels[i * 2..i * 2 + 2]).expect("fixed folds are valid"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_cover_every_class_once() {
        let parts = load_partitions();
        let mut seen: Vec<&str> = parts
            .iter()
            .flat_map(|p| p.test_labels.iter().map(String::as_str))
            .collect();
        seen.sort_unstable();
        let mut all = VOC_CLASSES.to_vec();
        all.sort_unstable();
        assert_eq!(seen, all);
        assert_eq!(VOC_CLASSES.to_vec(), all);
        for p in &parts {
            assert_eq!(p.test_labels.len(), 5);
            assert_eq!(p.train_labels.len(), 15);
        }
    }

    #[test]
    fn overlap_is_a_leak() {
        let p = PartitionSpec {
            index: 9,
            test_labels: vec!["cat".into(), "dog".into()],
            train_labels: vec!["dog".into(), "cow".into()],
        };
        assert!(matches!(p.validate(), Err(Error::DataLeak { label }) if label == "dog"));
    }

    #[test]
    fn custom_partition_from_toml() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.toml");
        std::fs::write(
            &path,
            "index = 7\ntest_labels = [\"cat\"]\ntrain_labels = [\"dog\", \"cat\"]\n",
        )
        .unwrap();
        assert!(matches!(PartitionSpec::load(&path), Err(Error::DataLeak { .. })));
    }
}
