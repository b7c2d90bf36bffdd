use crate::error::{Error, Result};
use crate::nn::{self, BackpropRule, ConvGeometry, Tensor};

#[derive(Clone, Debug)]
pub enum Layer {
    Conv {
        geometry: ConvGeometry,
        weight: Vec<f64>,
        bias: Option<Vec<f64>>,
    },
    Relu,
    MaxPool {
        kernel: usize,
        stride: usize,
    },
    AdaptiveAvgPool {
        height: usize,
        width: usize,
    },
    Linear {
        in_features: usize,
        out_features: usize,
        weight: Vec<f64>,
        bias: Option<Vec<f64>>,
    },
    /// Identity at inference time.
    Dropout,
}

/// A feed-forward classifier: a plain stack of layers ending in class logits.
///
/// Linear layers flatten whatever tensor they receive.
#[derive(Clone, Debug, Default)]
pub struct ConvNet {
    layers: Vec<Layer>,
}

enum Cache {
    None,
    Pool(Vec<usize>),
}

impl ConvNet {
    pub fn new(layers: Vec<Layer>) -> Self {
        ConvNet { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.layers.iter().rev().find_map(|l| match l {
            Layer::Linear { out_features, .. } => Some(*out_features),
            _ => None,
        })
    }

    fn forward_layer(layer: &Layer, x: &Tensor) -> Result<(Tensor, Cache)> {
        Ok(match layer {
            Layer::Conv {
                geometry,
                weight,
                bias,
            } => {
                if x.channels != geometry.in_channels {
                    return Err(Error::Shape(format!(
                        "convolution expects {} channels, got {}",
                        geometry.in_channels, x.channels
                    )));
                }
                (nn::conv2d(x, geometry, weight, bias.as_deref()), Cache::None)
            }
            Layer::Relu => (nn::relu(x), Cache::None),
            Layer::MaxPool { kernel, stride } => {
                if x.height < *kernel || x.width < *kernel {
                    return Err(Error::Shape("input too small for max pooling".into()));
                }
                let (y, arg) = nn::max_pool(x, *kernel, *stride);
                (y, Cache::Pool(arg))
            }
            Layer::AdaptiveAvgPool { height, width } => {
                (nn::adaptive_avg_pool(x, *height, *width), Cache::None)
            }
            Layer::Linear {
                in_features,
                out_features,
                weight,
                bias,
            } => {
                if x.data.len() != *in_features {
                    return Err(Error::Shape(format!(
                        "linear layer expects {} features, got {}",
                        in_features,
                        x.data.len()
                    )));
                }
                let y = nn::linear(&x.data, weight, bias.as_deref(), *out_features);
                (Tensor::from_vec(*out_features, 1, 1, y)?, Cache::None)
            }
            Layer::Dropout => (x.clone(), Cache::None),
        })
    }

    pub fn logits(&self, input: &Tensor) -> Result<Vec<f64>> {
        let mut x = input.clone();
        for layer in &self.layers {
            x = Self::forward_layer(layer, &x)?.0;
        }
        Ok(x.data)
    }

    /// Gradient of `logits[class_index]` with respect to the input under `rule`.
    pub fn input_gradient(
        &self,
        input: &Tensor,
        class_index: usize,
        rule: BackpropRule,
    ) -> Result<Tensor> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let (y, cache) = Self::forward_layer(layer, &x)?;
            inputs.push(x);
            caches.push(cache);
            x = y;
        }
        if class_index >= x.data.len() {
            return Err(Error::Index {
                index: class_index,
                size: x.data.len(),
            });
        }
        let mut grad = Tensor::zeros(x.channels, x.height, x.width);
        grad.data[class_index] = 1.0;
        for ((layer, inp), cache) in self.layers.iter().zip(&inputs).zip(&caches).rev() {
            grad = match (layer, cache) {
                (Layer::Conv {
                    geometry, weight, ..
                }, _) => nn::conv2d_backward(inp, geometry, weight, &grad, true, None, None)
                    .expect("input gradient requested"),
                (Layer::Relu, _) => nn::relu_backward(inp, &grad, rule),
                (Layer::MaxPool { .. }, Cache::Pool(arg)) => nn::max_pool_backward(inp, arg, &grad),
                (Layer::AdaptiveAvgPool { .. }, _) => nn::adaptive_avg_pool_backward(inp, &grad),
                (Layer::Linear {
                    in_features,
                    weight,
                    ..
                }, _) => {
                    let g = nn::linear_backward_input(&grad.data, weight, *in_features);
                    Tensor::from_vec(inp.channels, inp.height, inp.width, g)?
                }
                (Layer::Dropout, _) => grad,
                (Layer::MaxPool { .. }, Cache::None) => unreachable!("pool cache recorded"),
            };
        }
        Ok(grad)
    }
}
