use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use super::partition::Split;
use super::voc;
use crate::error::{Error, Result};
use crate::raster::{Mask, RgbImage};

/// Where a sample's pixels and annotations come from.
#[derive(Clone, Debug)]
pub enum SampleSource {
    /// Generated or already decoded; one mask per present label.
    Memory {
        image: RgbImage,
        masks: BTreeMap<String, Mask>,
    },
    /// A VOC `SegmentationClass` index PNG covering every class.
    VocIndexed { image: PathBuf, annotation: PathBuf },
    /// Converted SBD: one binary PNG per present class.
    PerClass {
        image: PathBuf,
        masks: BTreeMap<String, PathBuf>,
    },
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub image_id: String,
    pub labels: BTreeSet<String>,
    pub split: Split,
    pub source: SampleSource,
}

impl Sample {
    pub fn has_label(&self, label: &str) -> bool {
        self.labels.contains(label)
    }

    pub fn image(&self) -> Result<RgbImage> {
        match &self.source {
            SampleSource::Memory { image, .. } => Ok(image.clone()),
            SampleSource::VocIndexed { image, .. } | SampleSource::PerClass { image, .. } => {
                RgbImage::load(image)
            }
        }
    }

    /// Binary mask of `label`; all zeros when the label is absent from the sample.
    pub fn mask(&self, label: &str) -> Result<Mask> {
        match &self.source {
            SampleSource::Memory { image, masks } => Ok(masks
                .get(label)
                .cloned()
                .unwrap_or_else(|| Mask::zeros(image.width(), image.height()))),
            SampleSource::VocIndexed { annotation, .. } => {
                let class = voc::class_index(label).ok_or_else(|| Error::InvalidLabel(label.into()))?;
                let (w, h, idx) = voc::read_index_png(annotation)?;
                Mask::from_vec(w, h, idx.iter().map(|&v| u8::from(v == class)).collect())
            }
            SampleSource::PerClass { image, masks } => match masks.get(label) {
                Some(p) => Mask::load_png(p),
                None => {
                    let (w, h) = image::image_dimensions(image)?;
                    Ok(Mask::zeros(w as usize, h as usize))
                }
            },
        }
    }
}

/// An immutable collection of annotated samples.
#[derive(Clone, Debug, Default)]
pub struct SampleStore {
    samples: Vec<Sample>,
}

impl SampleStore {
    pub fn new(samples: Vec<Sample>) -> Self {
        SampleStore { samples }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, i: usize) -> &Sample {
        &self.samples[i]
    }

    pub fn find(&self, image_id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.image_id == image_id)
    }

    /// Sorted labels present anywhere in the store.
    pub fn labels(&self) -> BTreeSet<String> {
        self.samples
            .iter()
            .flat_map(|s| s.labels.iter().cloned())
            .collect()
    }

    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        (0..self.samples.len())
            .filter(|&i| self.samples[i].split == split)
            .collect()
    }

    /// Fraction of images containing `a` that also contain `b`, over the whole store.
    pub fn cooccurrence(&self, a: &str, b: &str) -> Result<f64> {
        let with_a: Vec<&Sample> = self.samples.iter().filter(|s| s.has_label(a)).collect();
        if with_a.is_empty() {
            return Err(Error::UndefinedFraction(a.into()));
        }
        let both = with_a.iter().filter(|s| s.has_label(b)).count();
        Ok(both as f64 / with_a.len() as f64)
    }

    /// SHA-256 over ids, labels and decoded pixels of every in-memory sample, in order.
    pub fn content_hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        for s in &self.samples {
            h.update(s.image_id.as_bytes());
            for l in &s.labels {
                h.update(l.as_bytes());
                h.update(s.mask(l)?.data());
            }
            h.update(s.image()?.to_rgb8().as_raw());
        }
        Ok(hex::encode(h.finalize()))
    }
}
