use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::PartitionSpec;
use crate::error::{Error, Result};
use crate::raster::Mask;

/// Pixel counts of one prediction against its ground truth.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IouCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl IouCounts {
    pub fn of(pred: &Mask, gt: &Mask) -> Result<Self> {
        if pred.dims() != gt.dims() {
            return Err(Error::Shape(format!(
                "prediction {:?} vs ground truth {:?}",
                pred.dims(),
                gt.dims()
            )));
        }
        let mut c = IouCounts::default();
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            match (p != 0, g != 0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                _ => {}
            }
        }
        Ok(c)
    }

    pub fn add(&mut self, other: IouCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    /// `tp / (tp + fp + fn)`, 1 when the union is empty.
    pub fn iou(&self) -> f64 {
        let union = self.tp + self.fp + self.fn_;
        if union == 0 {
            1.0
        } else {
            self.tp as f64 / union as f64
        }
    }
}

/// Intersection over union of two binary masks; 1.0 when both are empty.
pub fn binary_iou(pred: &Mask, gt: &Mask) -> Result<f64> {
    Ok(IouCounts::of(pred, gt)?.iou())
}

/// Per-class IoU and class-mean IoU on one partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionMetrics {
    pub partition: usize,
    pub class_iou: BTreeMap<String, f64>,
    /// Test images scored per class.
    pub class_images: BTreeMap<String, usize>,
    pub miou: f64,
}

/// Aggregates counts per class over all its images, then averages the class IoUs.
/// Classes of the partition without any test image are left out with a warning.
pub fn per_class_miou(
    results: impl IntoIterator<Item = (String, IouCounts)>,
    partition: &PartitionSpec,
) -> Result<PartitionMetrics> {
    let mut counts: BTreeMap<String, (IouCounts, usize)> = BTreeMap::new();
    for (label, c) in results {
        if !partition.is_test_label(&label) {
            return Err(Error::DataLeak { label });
        }
        let e = counts.entry(label).or_default();
        e.0.add(c);
        e.1 += 1;
    }
    for l in &partition.test_labels {
        if !counts.contains_key(l) {
            log::warn!("partition {}: no test image for {l}; excluded", partition.index);
        }
    }
    let class_iou: BTreeMap<String, f64> = counts.iter().map(|(l, (c, _))| (l.clone(), c.iou())).collect();
    let miou = if class_iou.is_empty() {
        0.0
    } else {
        class_iou.values().sum::<f64>() / class_iou.len() as f64
    };
    Ok(PartitionMetrics {
        partition: partition.index,
        class_images: counts.iter().map(|(l, (_, n))| (l.clone(), *n)).collect(),
        class_iou,
        miou,
    })
}

/// Same protocol over masks.
pub fn per_class_miou_masks<'m>(
    results: impl IntoIterator<Item = (String, &'m Mask, &'m Mask)>,
    partition: &PartitionSpec,
) -> Result<PartitionMetrics> {
    let counts = results
        .into_iter()
        .map(|(l, p, g)| Ok((l, IouCounts::of(p, g)?)))
        .collect::<Result<Vec<_>>>()?;
    per_class_miou(counts, partition)
}
