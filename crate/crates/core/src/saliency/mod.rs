//! Positive and negative attention maps from guided-backprop gradients.

mod cache;
mod format;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierBackend, GradientTensor, ImageTensor};
use crate::error::{Error, Result};
use crate::label_semantics::ProxyLabelSet;
use crate::raster::{Plane, RgbImage};

pub use cache::SaliencyCache;
pub use format::{encode_salmap, load_salmap, read_salmap, save_salmap, write_salmap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

/// A single-channel map in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    pub plane: Plane,
    pub polarity: Polarity,
    pub source_labels: Vec<usize>,
    /// Set when normalization had nothing to spread (constant input) or no labels fed in.
    pub degenerate: bool,
}

impl SaliencyMap {
    pub fn zeros(width: usize, height: usize, polarity: Polarity) -> Self {
        SaliencyMap {
            plane: Plane::zeros(width, height),
            polarity,
            source_labels: Vec::new(),
            degenerate: true,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.plane.dims()
    }

    pub fn with_source(mut self, polarity: Polarity, labels: Vec<usize>) -> Self {
        self.polarity = polarity;
        self.source_labels = labels;
        self
    }
}

/// Per-pixel max over the three gradient channels followed by min-max normalization.
/// A constant result normalizes to all zeros and is flagged degenerate.
pub fn single_label_saliency(grad: &GradientTensor) -> SaliencyMap {
    let t = grad.tensor();
    let n = t.plane_len();
    let pooled: Vec<f64> = (0..n)
        .map(|i| t.data[i].max(t.data[n + i]).max(t.data[2 * n + i]))
        .collect();
    let (lo, hi) = pooled
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let degenerate = !(hi > lo);
    let data = if degenerate {
        vec![0.0; n]
    } else {
        let span = hi - lo;
        pooled.iter().map(|v| ((v - lo) / span) as f32).collect()
    };
    SaliencyMap {
        plane: Plane::from_vec(t.width, t.height, data).expect("sizes agree"),
        polarity: Polarity::Positive,
        source_labels: Vec::new(),
        degenerate,
    }
}

/// Per-pixel arithmetic mean, without renormalization.
pub fn compose_saliency(maps: &[SaliencyMap]) -> Result<SaliencyMap> {
    let first = maps.first().ok_or(Error::EmptyComposition)?;
    let (w, h) = first.dims();
    let mut acc = vec![0.0f64; w * h];
    let mut labels = Vec::new();
    for m in maps {
        if m.dims() != (w, h) {
            return Err(Error::Shape(format!(
                "cannot compose {:?} with {:?}",
                m.dims(),
                (w, h)
            )));
        }
        if m.polarity != first.polarity {
            return Err(Error::Shape("cannot compose maps of different polarity".into()));
        }
        for (a, v) in acc.iter_mut().zip(m.plane.data()) {
            *a += *v as f64;
        }
        for l in &m.source_labels {
            if !labels.contains(l) {
                labels.push(*l);
            }
        }
    }
    let k = maps.len() as f64;
    let data = acc.iter().map(|a| (a / k) as f32).collect();
    Ok(SaliencyMap {
        plane: Plane::from_vec(w, h, data)?,
        polarity: first.polarity,
        source_labels: labels,
        degenerate: maps.iter().all(|m| m.degenerate),
    })
}

/// Positive and negative maps at the original image size.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionMaps {
    pub positive: SaliencyMap,
    pub negative: SaliencyMap,
}

/// Builds one composed map at the backend's input resolution.
fn composed_map(
    tensor: &ImageTensor,
    classes: &[usize],
    classifier: &dyn ClassifierBackend,
) -> Result<Plane> {
    let one = |c: &usize| -> Result<SaliencyMap> {
        Ok(single_label_saliency(&classifier.guided_backprop_gradient(tensor, *c)?))
    };
    let maps: Vec<SaliencyMap> = if classifier.exclusive() {
        classes.iter().map(one).collect::<Result<_>>()?
    } else {
        classes.par_iter().map(one).collect::<Result<_>>()?
    };
    Ok(compose_saliency(&maps)?.plane)
}

/// Composed guided-backprop saliency of `classes` on `image`, resized to the image's size
/// and clamped to [0, 1]. An empty class list gives an all-zero map. When a cache is
/// supplied, composed maps at backend resolution are looked up and stored there.
pub fn class_saliency_map(
    image: &RgbImage,
    classes: &[usize],
    polarity: Polarity,
    classifier: &dyn ClassifierBackend,
    cache: Option<&SaliencyCache>,
) -> Result<SaliencyMap> {
    let (w, h) = image.dims();
    if classes.is_empty() {
        return Ok(SaliencyMap::zeros(w, h, polarity));
    }
    let tensor = classifier.preprocessing().prepare(image);
    let key = cache.map(|_| SaliencyCache::key(&tensor.content_hash(), classes, classifier.name()));
    let cached = match (cache, &key) {
        (Some(c), Some(k)) => c.get(k),
        _ => None,
    };
    let plane = match cached {
        Some(p) => p,
        None => {
            let p = composed_map(&tensor, classes, classifier)?;
            if let (Some(c), Some(k)) = (cache, &key) {
                c.put(k, &p)?;
            }
            p
        }
    };
    let (lo, hi) = plane.min_max();
    Ok(SaliencyMap {
        plane: plane.resize_bilinear(w, h).clamp01(),
        polarity,
        source_labels: classes.to_vec(),
        degenerate: lo == hi,
    })
}

/// Positive map from the proxies, negative map from the negatives.
pub fn generate_attention_maps(
    image: &RgbImage,
    proxies: &ProxyLabelSet,
    classifier: &dyn ClassifierBackend,
    cache: Option<&SaliencyCache>,
) -> Result<AttentionMaps> {
    let build = |polarity: Polarity, classes: Vec<usize>| {
        if classes.is_empty() {
            log::warn!("{}: no {:?} proxies, using a zero map", proxies.target, polarity);
        }
        class_saliency_map(image, &classes, polarity, classifier, cache)
    };
    Ok(AttentionMaps {
        positive: build(Polarity::Positive, proxies.positive_indices())?,
        negative: build(Polarity::Negative, proxies.negative_indices())?,
    })
}
