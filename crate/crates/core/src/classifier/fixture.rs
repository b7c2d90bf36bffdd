use serde::Deserialize;

use super::{
    BackpropRule, ClassScores, ClassifierBackend, ConvNet, GradientTensor, ImageTensor, Layer,
    Preprocessing,
};
use crate::error::{Error, Result};
use crate::label_semantics::{
    tokenize_label, ClassifierVocabulary, OntologyIndex, SynsetId, SynsetRecord, VocabEntry,
};
use crate::nn::ConvGeometry;

const DEFINITION: &str = include_str!("../../data/fixture_backend.toml");

/// Separable 3x3 smoothing kernel shared by both fixture convolutions.
pub const FIXTURE_KERNEL: [[f64; 3]; 3] = [
    [1.0 / 16.0, 2.0 / 16.0, 1.0 / 16.0],
    [2.0 / 16.0, 4.0 / 16.0, 2.0 / 16.0],
    [1.0 / 16.0, 2.0 / 16.0, 1.0 / 16.0],
];

const LUMINANCE_FILTERS: usize = 2;

#[derive(Clone, Debug, Deserialize)]
pub struct FixtureClass {
    pub label: String,
    pub synset_id: String,
    pub rgb: [u8; 3],
}

impl FixtureClass {
    /// Colour in the backend's normalized space, each component ±1.
    pub fn sign(&self) -> [f64; 3] {
        self.rgb.map(|v| if v > 0 { 1.0 } else { -1.0 })
    }

    pub fn rgb_f32(&self) -> [f32; 3] {
        self.rgb.map(|v| v as f32)
    }
}

#[derive(Clone, Debug, Deserialize)]
pub struct FixtureDefinition {
    pub name: String,
    pub num_classes: usize,
    pub logit_gain: f64,
    pub conv2_bias: f64,
    pub mean: [f64; 3],
    pub std: [f64; 3],
    pub classes: Vec<FixtureClass>,
}

impl FixtureDefinition {
    pub fn bundled() -> Self {
        let def: FixtureDefinition =
            toml::from_str(DEFINITION).expect("bundled fixture definition parses");
        assert_eq!(def.num_classes, def.classes.len());
        def
    }

    /// Classes whose colours differ from `c`'s in exactly one RGB component.
    pub fn hamming_neighbours(&self, c: usize) -> Vec<usize> {
        let a = self.classes[c].rgb;
        (0..self.classes.len())
            .filter(|&o| {
                let b = self.classes[o].rgb;
                (0..3).filter(|&i| (a[i] > 0) != (b[i] > 0)).count() == 1
            })
            .collect()
    }
}

/// Deterministic closed-form colour classifier; see `data/fixture_backend.toml`.
#[derive(Clone, Debug)]
pub struct FixtureBackend {
    definition: FixtureDefinition,
    net: ConvNet,
    vocab: ClassifierVocabulary,
    preprocessing: Preprocessing,
}

impl Default for FixtureBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl FixtureBackend {
    pub fn new() -> Self {
        Self::from_definition(FixtureDefinition::bundled())
    }

    pub fn from_definition(definition: FixtureDefinition) -> Self {
        let n = definition.classes.len();
        let hidden = n + LUMINANCE_FILTERS;
        let k = &FIXTURE_KERNEL;

        let conv1 = ConvGeometry {
            in_channels: 3,
            out_channels: hidden,
            kernel: 3,
            stride: 1,
            padding: 1,
            dilation: 1,
        };
        let mut w1 = vec![0.0; conv1.weight_len()];
        for o in 0..hidden {
            let sign = if o < n {
                definition.classes[o].sign()
            } else if o == n {
                [1.0 / 3.0; 3]
            } else {
                [-1.0 / 3.0; 3]
            };
            for (i, s) in sign.iter().enumerate() {
                for ky in 0..3 {
                    for kx in 0..3 {
                        w1[((o * 3 + i) * 3 + ky) * 3 + kx] = s * k[ky][kx];
                    }
                }
            }
        }

        let conv2 = ConvGeometry {
            in_channels: hidden,
            out_channels: n,
            kernel: 3,
            stride: 1,
            padding: 1,
            dilation: 1,
        };
        let mut w2 = vec![0.0; conv2.weight_len()];
        for o in 0..n {
            let neighbours = definition.hamming_neighbours(o);
            for i in 0..hidden {
                let coef = if i == o {
                    1.0
                } else if neighbours.contains(&i) || i >= n {
                    -1.0
                } else {
                    0.0
                };
                for ky in 0..3 {
                    for kx in 0..3 {
                        w2[((o * hidden + i) * 3 + ky) * 3 + kx] = coef * k[ky][kx];
                    }
                }
            }
        }

        let mut head = vec![0.0; n * n];
        for c in 0..n {
            head[c * n + c] = definition.logit_gain;
        }

        let net = ConvNet::new(vec![
            Layer::Conv {
                geometry: conv1,
                weight: w1,
                bias: None,
            },
            Layer::Relu,
            Layer::Conv {
                geometry: conv2,
                weight: w2,
                bias: Some(vec![definition.conv2_bias; n]),
            },
            Layer::Relu,
            Layer::AdaptiveAvgPool {
                height: 1,
                width: 1,
            },
            Layer::Linear {
                in_features: n,
                out_features: n,
                weight: head,
                bias: None,
            },
        ]);

        let vocab = ClassifierVocabulary::new(
            definition
                .classes
                .iter()
                .enumerate()
                .map(|(i, c)| VocabEntry {
                    class_index: i,
                    synset_id: SynsetId::parse(&c.synset_id).expect("fixture synset id"),
                    label: tokenize_label(&c.label).expect("fixture label"),
                })
                .collect(),
        )
        .expect("fixture vocabulary is valid");

        let preprocessing = Preprocessing {
            input_size: None,
            mean: definition.mean,
            std: definition.std,
        };
        FixtureBackend {
            definition,
            net,
            vocab,
            preprocessing,
        }
    }

    pub fn definition(&self) -> &FixtureDefinition {
        &self.definition
    }

    pub fn network(&self) -> &ConvNet {
        &self.net
    }

    pub fn set_preprocessing(&mut self, p: Preprocessing) {
        self.preprocessing = p;
    }

    /// First-layer kernel `[hidden][3][3][3]`, used to seed segmentation networks.
    pub fn first_layer_kernel(&self) -> (ConvGeometry, &[f64]) {
        match &self.net.layers()[0] {
            Layer::Conv {
                geometry, weight, ..
            } => (*geometry, weight),
            _ => unreachable!("fixture starts with a convolution"),
        }
    }

    /// A small ontology for the fixture vocabulary: every colour is a hyponym of
    /// "chromatic color".
    pub fn ontology(&self) -> OntologyIndex {
        let root = SynsetId::parse("n99000000").expect("valid id");
        let mut records = vec![SynsetRecord {
            id: root,
            lemmas: vec![
                "chromatic color".into(),
                "chromatic colour".into(),
                "spectral color".into(),
            ],
            hypernyms: vec![],
        }];
        for e in self.vocab.entries() {
            records.push(SynsetRecord {
                id: e.synset_id,
                lemmas: vec![e.label.text().to_string()],
                hypernyms: vec![root],
            });
        }
        OntologyIndex::from_records(records)
    }
}

impl ClassifierBackend for FixtureBackend {
    fn name(&self) -> &str {
        &self.definition.name
    }

    fn num_classes(&self) -> usize {
        self.definition.num_classes
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
mod tests {
    use super::*;

    #[test]
    fn vocabulary_matches_definition() {
        let b = FixtureBackend::new();
        assert_eq!(b.num_classes(), 6);
        assert_eq!(b.vocabulary().len(), b.definition().num_classes);
        assert_eq!(b.vocabulary().label(4).unwrap().text(), "cyan");
    }

    #[test]
    fn neighbours_of_red_are_yellow_and_magenta() {
        let d = FixtureDefinition::bundled();
        assert_eq!(d.hamming_neighbours(0), vec![3, 5]);
        assert_eq!(d.hamming_neighbours(3), vec![0, 1]);
    }

    #[test]
    fn ontology_links_colours_to_root() {
        let b = FixtureBackend::new();
        let o = b.ontology();
        assert!(o.is_acyclic());
        let red = o.lookup("red")[0];
        assert_eq!(o.hypernym_closure(&red).len(), 1);
    }
}
