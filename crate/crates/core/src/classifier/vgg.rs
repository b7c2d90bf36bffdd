use std::path::Path;

use super::{
    BackpropRule, ClassScores, ClassifierBackend, ConvNet, GradientTensor, ImageTensor, Layer,
    Preprocessing,
};
use crate::error::{Error, Result};
use crate::label_semantics::ClassifierVocabulary;
use crate::nn::ConvGeometry;
use crate::weights::WeightFile;

/// Indices of the convolutions in torchvision's `vgg19().features`; max pools follow the
/// last convolution of each block.
const CONV_INDICES: [usize; 16] = [0, 2, 5, 7, 10, 12, 14, 16, 19, 21, 23, 25, 28, 30, 32, 34];
const POOL_AFTER: [usize; 5] = [2, 7, 16, 25, 34];
const LINEAR_INDICES: [usize; 3] = [0, 3, 6];

pub const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
pub const IMAGENET_STD: [f64; 3] = [0.229, 0.224, 0.225];

pub const VGG19_WEIGHTS_HINT: &str = "expected torchvision VGG-19 ImageNet weights converted to \
safetensors (keys features.N.weight / classifier.N.weight); e.g. export \
torchvision.models.vgg19(weights='IMAGENET1K_V1').state_dict() with safetensors.torch.save_file";

/// VGG-19 with batch-free inference and guided backprop through every ReLU.
#[derive(Clone, Debug)]
pub struct Vgg19Backend {
    net: ConvNet,
    vocab: ClassifierVocabulary,
    preprocessing: Preprocessing,
}

pub fn load_vgg19(path: &Path) -> Result<Vgg19Backend> {
    let weights = WeightFile::load(path, VGG19_WEIGHTS_HINT)?;
    Vgg19Backend::from_weights(&weights, ClassifierVocabulary::imagenet1k())
}

impl Vgg19Backend {
    /// Builds the network from torchvision-style keys. Layer widths are read from the
    /// tensor shapes, so narrower test networks with the same topology also load.
    pub fn from_weights(weights: &WeightFile, vocab: ClassifierVocabulary) -> Result<Self> {
        let mut layers = Vec::new();
        for &idx in &CONV_INDICES {
            let w = weights.get(&format!("features.{idx}.weight"))?;
            let b = weights.get(&format!("features.{idx}.bias"))?;
            if w.shape.len() != 4 || w.shape[2] != 3 || w.shape[3] != 3 {
                return Err(Error::Shape(format!(
                    "features.{idx}.weight must be [out, in, 3, 3], got {:?}",
                    w.shape
                )));
            }
            layers.push(Layer::Conv {
                geometry: ConvGeometry {
                    in_channels: w.shape[1],
                    out_channels: w.shape[0],
                    kernel: 3,
                    stride: 1,
                    padding: 1,
                    dilation: 1,
                },
                weight: w.data.clone(),
                bias: Some(b.data.clone()),
            });
            layers.push(Layer::Relu);
            if POOL_AFTER.contains(&idx) {
                layers.push(Layer::MaxPool {
                    kernel: 2,
                    stride: 2,
                });
            }
        }
        layers.push(Layer::AdaptiveAvgPool {
            height: 7,
            width: 7,
        });
        for (i, &idx) in LINEAR_INDICES.iter().enumerate() {
            let w = weights.get(&format!("classifier.{idx}.weight"))?;
            let b = weights.get(&format!("classifier.{idx}.bias"))?;
            if w.shape.len() != 2 {
                return Err(Error::Shape(format!(
                    "classifier.{idx}.weight must be 2-D, got {:?}",
                    w.shape
                )));
            }
            layers.push(Layer::Linear {
                in_features: w.shape[1],
                out_features: w.shape[0],
                weight: w.data.clone(),
                bias: Some(b.data.clone()),
            });
            if i + 1 < LINEAR_INDICES.len() {
                layers.push(Layer::Relu);
                layers.push(Layer::Dropout);
            }
        }
        let net = ConvNet::new(layers);
        if net.num_classes() != Some(vocab.len()) {
            return Err(Error::Shape(format!(
                "classifier emits {:?} classes but the vocabulary has {}",
                net.num_classes(),
                vocab.len()
            )));
        }
        Ok(Vgg19Backend {
            net,
            vocab,
            preprocessing: Preprocessing {
                input_size: Some((224, 224)),
                mean: IMAGENET_MEAN,
                std: IMAGENET_STD,
            },
        })
    }

    pub fn network(&self) -> &ConvNet {
        &self.net
    }

    pub fn set_preprocessing(&mut self, p: Preprocessing) {
        self.preprocessing = p;
    }
}

impl ClassifierBackend for Vgg19Backend {
    fn name(&self) -> &str {
        "vgg19-imagenet1k"
    }

    fn num_classes(&self) -> usize {
        self.vocab.len()
    }

    fn vocabulary(&self) -> &ClassifierVocabulary {
        &self.vocab
    }

    fn preprocessing(&self) -> &Preprocessing {
        &self.preprocessing
    }

    fn predict_scores(&self, image: &ImageTensor) -> Result<ClassScores> {
        Ok(ClassScores::from_logits(self.net.logits(image.tensor())?))
    }

    fn input_gradient(
        &self,
        image: &ImageTensor,
        class_index: usize,
        rule: BackpropRule,
    ) -> Result<GradientTensor> {
        if class_index >= self.num_classes() {
            return Err(Error::Index {
                index: class_index,
                size: self.num_classes(),
            });
        }
        GradientTensor::new(self.net.input_gradient(image.tensor(), class_index, rule)?)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::label_semantics::{tokenize_label, SynsetId, VocabEntry};
    use crate::nn::Tensor;
    use rand::{Rng, SeedableRng};

    /// A VGG-19-shaped weight file with every width divided down, for fast tests.
    pub(crate) fn narrow_vgg(classes: usize, seed: u64) -> WeightFile {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let widths = [2, 2, 3, 3, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4];
        let mut w = WeightFile::default();
        let mut cin = 3;
        for (&idx, &cout) in CONV_INDICES.iter().zip(&widths) {
            let n = cout * cin * 9;
            let scale = (2.0 / (cin * 9) as f64).sqrt();
            w.insert(
                format!("features.{idx}.weight"),
                vec![cout, cin, 3, 3],
                (0..n).map(|_| rng.random_range(-1.0..1.0) * scale).collect(),
            );
            w.insert(
                format!("features.{idx}.bias"),
                vec![cout],
                (0..cout).map(|_| rng.random_range(0.0..0.1)).collect(),
            );
            cin = cout;
        }
        let dims = [(cin * 49, 6), (6, 6), (6, classes)];
        for (&idx, &(i, o)) in LINEAR_INDICES.iter().zip(&dims) {
            w.insert(
                format!("classifier.{idx}.weight"),
                vec![o, i],
                (0..o * i).map(|_| rng.random_range(-0.5..0.5)).collect(),
            );
            w.insert(
                format!("classifier.{idx}.bias"),
                vec![o],
                (0..o).map(|_| rng.random_range(0.0..0.1)).collect(),
            );
        }
        w
    }

    fn vocab(n: usize) -> ClassifierVocabulary {
        ClassifierVocabulary::new(
            (0..n)
                .map(|i| VocabEntry {
                    class_index: i,
                    synset_id: SynsetId::noun(i as u32 + 1),
                    label: tokenize_label(&format!("class {i}")).unwrap(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn topology_has_sixteen_convs_and_five_pools() {
        let b = Vgg19Backend::from_weights(&narrow_vgg(4, 1), vocab(4)).unwrap();
        let convs = b.net.layers().iter().filter(|l| matches!(l, Layer::Conv { .. })).count();
        let pools = b.net.layers().iter().filter(|l| matches!(l, Layer::MaxPool { .. })).count();
        assert_eq!((convs, pools), (16, 5));
        assert_eq!(b.num_classes(), 4);
    }

    #[test]
    fn loads_from_disk_and_produces_gradient_of_input_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vgg.safetensors");
        narrow_vgg(4, 2).save(&path, true).unwrap();
        let weights = WeightFile::load(&path, "").unwrap();
        let b = Vgg19Backend::from_weights(&weights, vocab(4)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let t = Tensor::from_vec(3, 32, 32, (0..3 * 32 * 32).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap();
        let img = ImageTensor::new(t).unwrap();
        let s = b.predict_scores(&img).unwrap();
        assert!((s.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let g = b.guided_backprop_gradient(&img, 1).unwrap();
        assert_eq!((g.width(), g.height()), (32, 32));
        assert!(b.guided_backprop_gradient(&img, 4).is_err());
    }

    #[test]
    fn vocabulary_mismatch_is_rejected() {
        assert!(Vgg19Backend::from_weights(&narrow_vgg(4, 1), vocab(5)).is_err());
    }
}
