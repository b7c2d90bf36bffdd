use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::PartitionMetrics;
use super::variant::VariantTag;
use crate::error::Result;
use crate::fsutil::write_atomic;

/// A published mIOU row kept for comparison; never recomputed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub method: String,
    pub shots: Option<u8>,
    /// Per-partition mIOU, when reported.
    pub partitions: Option<[f64; 4]>,
    pub mean: f64,
}

const REFERENCE_TABLE: &[(&str, Option<u8>, Option<[f64; 4]>, f64)] = &[
    ("OSLSM", Some(1), Some([33.6, 55.3, 40.9, 33.5]), 40.8),
    ("co-FCN", Some(1), Some([36.7, 50.6, 44.9, 32.3]), 41.1),
    ("SG-One", Some(1), Some([40.2, 58.4, 48.4, 38.4]), 46.3),
    ("OSLSM", Some(5), Some([35.9, 58.1, 42.7, 39.1]), 43.9),
    ("co-FCN", Some(5), Some([37.5, 50.0, 44.1, 33.9]), 41.4),
    ("SG-One", Some(5), Some([41.9, 58.6, 48.6, 39.4]), 47.1),
    ("SEM-0-C-NONE", Some(0), Some([39.6, 40.3, 37.4, 31.6]), 37.2),
    ("SEM-1-C-RAND", Some(0), Some([31.2, 31.8, 41.8, 31.2]), 34.0),
    ("SEM-1-C-GT", Some(0), Some([37.3, 42.8, 45.4, 43.3]), 42.2),
    ("SEM-2-C-RAND", Some(0), Some([40.8, 57.9, 47.7, 38.5]), 46.2),
    ("SEM-2-C-MEAN", Some(0), Some([43.1, 56.2, 47.12, 47.0]), 48.4),
    ("SEM-2-C-NEG", Some(0), Some([48.7, 57.6, 48.9, 46.0]), 50.3),
    ("NO-GRABCUT", Some(0), None, 48.1),
    ("ORACLE", Some(0), None, 95.0),
];

/// Published PASCAL-5i mIOU rows: prior one- and five-shot methods and every ablation
/// variant. The oracle row is approximate.
pub fn reference_rows() -> Vec<ReferenceRow> {
    REFERENCE_TABLE
        .iter()
        .map(|&(m, shots, partitions, mean)| ReferenceRow {
            method: m.to_string(),
            shots,
            partitions,
            mean,
        })
        .collect()
}

/// The published row for an ablation variant.
pub fn reference_for(variant: VariantTag) -> Option<ReferenceRow> {
    reference_rows()
        .into_iter()
        .find(|r| r.shots == Some(0) && r.method == variant.as_str())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub steps: usize,
    pub backbone: String,
    pub dataset: String,
    pub iou_protocol: String,
}

/// Metrics of one variant over a set of partitions, in percent-free [0, 1] units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub variant: VariantTag,
    pub partitions: Vec<PartitionMetrics>,
    /// Arithmetic mean of the partition mIOUs.
    pub mean: f64,
    pub metadata: RunMetadata,
}

impl MetricsReport {
    pub fn new(variant: VariantTag, partitions: Vec<PartitionMetrics>, metadata: RunMetadata) -> Self {
        let mean = if partitions.is_empty() {
            0.0
        } else {
            partitions.iter().map(|p| p.miou).sum::<f64>() / partitions.len() as f64
        };
        MetricsReport {
            variant,
            partitions,
            mean,
            metadata,
        }
    }
}

/// Reports for several variants plus the reference rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub runs: Vec<MetricsReport>,
    pub references: Vec<ReferenceRow>,
}

impl AblationReport {
    pub fn new(runs: Vec<MetricsReport>) -> Self {
        AblationReport {
            runs,
            references: reference_rows(),
        }
    }

    pub fn run(&self, variant: VariantTag) -> Option<&MetricsReport> {
        self.runs.iter().find(|r| r.variant == variant)
    }

    /// `variant partition class iou` rows, then per-partition `mIOU` and overall `mean`
    /// rows; references follow in a `# references` block.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("variant\tpartition\tclass\tiou\n");
        for r in &self.runs {
            for p in &r.partitions {
                for (c, iou) in &p.class_iou {
                    let _ = writeln!(out, "{}\t{}\t{c}\t{iou:.6}", r.variant, p.partition);
                }
                let _ = writeln!(out, "{}\t{}\tmIOU\t{:.6}", r.variant, p.partition, p.miou);
            }
            let _ = writeln!(out, "{}\tall\tmean\t{:.6}", r.variant, r.mean);
        }
        out.push_str("# references (mIOU, percent)\n# method\tshots\tpartitions\tmean\n");
        for row in &self.references {
            let parts = row
                .partitions
                .map(|p| p.map(|v| format!("{v}")).join(","))
                .unwrap_or_else(|| "-".into());
            let shots = row.shots.map(|s| s.to_string()).unwrap_or_default();
            let _ = writeln!(out, "# {}\t{shots}\t{parts}\t{}", row.method, row.mean);
        }
        out
    }

    /// Writes `report.tsv` and `report.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("report.tsv"), self.to_tsv().as_bytes())?;
        write_atomic(&dir.join("report.json"), serde_json::to_string_pretty(self)?.as_bytes())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
