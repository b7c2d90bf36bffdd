//! Pretrained-classifier access: class probabilities and (guided) input gradients.

mod convnet;
mod fixture;
mod vgg;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label_semantics::ClassifierVocabulary;
use crate::nn::Tensor;
use crate::raster::RgbImage;

pub use crate::nn::BackpropRule;
pub use convnet::{ConvNet, Layer};
pub use fixture::{FixtureBackend, FixtureClass, FixtureDefinition, FIXTURE_KERNEL};
pub use vgg::{load_vgg19, Vgg19Backend, IMAGENET_MEAN, IMAGENET_STD, VGG19_WEIGHTS_HINT};

/// A normalized 3-channel network input.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor(Tensor);

impl ImageTensor {
    pub fn new(tensor: Tensor) -> Result<Self> {
        if tensor.channels != 3 {
            return Err(Error::Shape(format!(
                "image tensor needs 3 channels, got {}",
                tensor.channels
            )));
        }
        if tensor.width == 0 || tensor.height == 0 {
            return Err(Error::Shape("image tensor must be at least 1x1".into()));
        }
        Ok(ImageTensor(tensor))
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    /// Content hash of the raw values, used as a cache key.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.0.width as u64).to_le_bytes());
        h.update((self.0.height as u64).to_le_bytes());
        for v in &self.0.data {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Gradient of a class logit with respect to the input tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientTensor(Tensor);

impl GradientTensor {
    pub fn new(tensor: Tensor) -> Result<Self> {
        if tensor.channels != 3 {
            return Err(Error::Shape(format!(
                "gradient tensor needs 3 channels, got {}",
                tensor.channels
            )));
        }
        Ok(GradientTensor(tensor))
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn scaled(&self, alpha: f64) -> GradientTensor {
        let mut t = self.0.clone();
        t.data.iter_mut().for_each(|v| *v *= alpha);
        GradientTensor(t)
    }
}

/// Post-softmax class probabilities together with the logits they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassScores {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl ClassScores {
    pub fn from_logits(logits: Vec<f64>) -> Self {
        let probabilities = crate::nn::softmax(&logits);
        ClassScores {
            logits,
            probabilities,
        }
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn argmax(&self) -> usize {
        self.ranked(|_| true)[0].0
    }

    /// `(class, probability)` for every admitted class, by descending probability with
    /// ties broken by ascending class index.
    pub fn ranked(&self, admit: impl Fn(usize) -> bool) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = self
            .probabilities
            .iter()
            .copied()
            .enumerate()
            .filter(|(i, _)| admit(*i))
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }

    pub fn top_k(&self, k: usize) -> Vec<(usize, f64)> {
        let mut v = self.ranked(|_| true);
        v.truncate(k);
        v
    }
}

/// Input normalization owned by a backend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    /// `(width, height)` the image is bilinearly resized to; `None` keeps native size.
    pub input_size: Option<(usize, usize)>,
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Preprocessing {
    pub fn prepare(&self, image: &RgbImage) -> ImageTensor {
        let resized;
        let img = match self.input_size {
            Some((w, h)) if (w, h) != image.dims() => {
                resized = image.resize_bilinear(w, h);
                &resized
            }
            _ => image,
        };
        let (w, h) = img.dims();
        let mut t = Tensor::zeros(3, h, w);
        for (i, px) in img.pixels().iter().enumerate() {
            for c in 0..3 {
                t.data[c * w * h + i] = (px[c] as f64 - self.mean[c]) / self.std[c];
            }
        }
        ImageTensor(t)
    }
}

/// Anything that can score an image and differentiate a class logit back to its pixels.
pub trait ClassifierBackend: Send + Sync {
    fn name(&self) -> &str;

    fn num_classes(&self) -> usize;

    fn vocabulary(&self) -> &ClassifierVocabulary;

    fn preprocessing(&self) -> &Preprocessing;

    fn predict_scores(&self, image: &ImageTensor) -> Result<ClassScores>;

    fn predict_scores_batch(&self, images: &[ImageTensor]) -> Result<Vec<ClassScores>> {
        images.iter().map(|i| self.predict_scores(i)).collect()
    }

    /// Gradient of the pre-softmax logit of `class_index` with respect to the input.
    fn input_gradient(
        &self,
        image: &ImageTensor,
        class_index: usize,
        rule: BackpropRule,
    ) -> Result<GradientTensor>;

    fn guided_backprop_gradient(
        &self,
        image: &ImageTensor,
        class_index: usize,
    ) -> Result<GradientTensor> {
        self.input_gradient(image, class_index, BackpropRule::Guided)
    }

    /// Backends that cannot serve concurrent calls return true; callers then serialize.
    fn exclusive(&self) -> bool {
        false
    }
}

/// Configuration entry naming a backend and where its weights live.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendSpec {
    pub name: String,
    #[serde(default)]
    pub weights_path: Option<PathBuf>,
    #[serde(default)]
    pub input_size: Option<(usize, usize)>,
    #[serde(default)]
    pub mean: Option<[f64; 3]>,
    #[serde(default)]
    pub std: Option<[f64; 3]>,
}

impl BackendSpec {
    pub fn fixture() -> Self {
        BackendSpec {
            name: "fixture".into(),
            weights_path: None,
            input_size: None,
            mean: None,
            std: None,
        }
    }

    pub fn vgg19(weights_path: impl Into<PathBuf>) -> Self {
        BackendSpec {
            name: "vgg19-imagenet1k".into(),
            weights_path: Some(weights_path.into()),
            input_size: None,
            mean: None,
            std: None,
        }
    }

    fn override_preprocessing(&self, base: Preprocessing) -> Preprocessing {
        Preprocessing {
            input_size: self.input_size.or(base.input_size),
            mean: self.mean.unwrap_or(base.mean),
            std: self.std.unwrap_or(base.std),
        }
    }
}

pub fn load_backend(spec: &BackendSpec) -> Result<Arc<dyn ClassifierBackend>> {
    match spec.name.as_str() {
        "fixture" => {
            let mut b = FixtureBackend::new();
            b.set_preprocessing(spec.override_preprocessing(b.preprocessing().clone()));
            Ok(Arc::new(b))
        }
        "vgg19-imagenet1k" => {
            let path = spec.weights_path.clone().ok_or_else(|| {
                Error::Config("vgg19-imagenet1k needs weights_path".into())
            })?;
            let mut b = load_vgg19(&path)?;
            b.set_preprocessing(spec.override_preprocessing(b.preprocessing().clone()));
            Ok(Arc::new(b))
        }
        other => Err(Error::Config(format!(
            "unknown classifier backend {other:?} (expected \"fixture\" or \"vgg19-imagenet1k\")"
        ))),
    }
}
