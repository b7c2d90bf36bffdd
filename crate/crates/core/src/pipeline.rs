//! End-to-end segmentation of one (image, label) pair: proxy labels, attention maps,
//! segmentation likelihood and GrabCut refinement.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::classifier::ClassifierBackend;
use crate::error::{Error, Result};
use crate::eval::{ChannelSource, VariantTag};
use crate::label_semantics::{build_proxy_set, tokenize_label, Mapper, MapperResources, ProxyLabelSet};
use crate::postprocess::{refine, threshold_baseline, AnnotationImage, GrabCutParams, RefineFlags};
use crate::raster::{Mask, RgbImage};
use crate::saliency::{class_saliency_map, Polarity, SaliencyCache, SaliencyMap};
use crate::segnet::{AttentionInput, LikelihoodImage, ModelConfig, SegNet};

/// Number of labels behind the random and classifier-top channels.
pub const AUX_LABELS: usize = 5;

/// Everything needed to turn an image and a label into a mask, minus the model.
#[derive(Clone)]
pub struct Pipeline<'a> {
    pub classifier: &'a dyn ClassifierBackend,
    pub mapper: Mapper,
    pub resources: MapperResources<'a>,
    pub k: usize,
    pub grabcut: GrabCutParams,
    pub cache: Option<&'a SaliencyCache>,
    /// Seeds the random-label channels.
    pub seed: u64,
}

/// The network input for one episode and the maps it was built from.
#[derive(Clone, Debug)]
pub struct Assembled {
    pub input: AttentionInput,
    pub proxies: Option<ProxyLabelSet>,
    pub positive: Option<SaliencyMap>,
    pub negative: Option<SaliencyMap>,
}

#[derive(Clone, Debug)]
pub struct Segmentation {
    pub mask: Mask,
    pub likelihood: LikelihoodImage,
    pub assembled: Assembled,
    /// Present when GrabCut ran.
    pub annotation: Option<AnnotationImage>,
    pub flags: RefineFlags,
}

impl<'a> Pipeline<'a> {
    pub fn new(classifier: &'a dyn ClassifierBackend, mapper: Mapper, resources: MapperResources<'a>) -> Self {
        Pipeline {
            classifier,
            mapper,
            resources,
            k: crate::label_semantics::DEFAULT_K,
            grabcut: GrabCutParams::default(),
            cache: None,
            seed: 0,
        }
    }

    /// Proxy and negative labels of `target` on `image`. A label that cannot be mapped
    /// yields an empty set (and so zero maps) with a warning.
    pub fn proxies(&self, image: &RgbImage, target: &str) -> Result<ProxyLabelSet> {
        let tensor = self.classifier.preprocessing().prepare(image);
        match build_proxy_set(target, &tensor, self.mapper, self.resources, self.classifier, self.k) {
            Ok(p) => Ok(p),
            Err(e @ (Error::InvalidLabel(_) | Error::NoEmbedding(_))) => {
                log::warn!("{target}: {e}; falling back to zero maps");
                Ok(ProxyLabelSet {
                    target: tokenize_label(target).or_else(|_| tokenize_label("unknown"))?,
                    positives: Vec::new(),
                    negatives: Vec::new(),
                    k_max: self.k,
                    warnings: Vec::new(),
                })
            }
            Err(e) => Err(e),
        }
    }

    fn random_classes(&self, image: &RgbImage, target: &str, channel: u8) -> Vec<usize> {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update([channel]);
        h.update(target.as_bytes());
        h.update(image.to_rgb8().as_raw());
        let digest = h.finalize();
        let seed = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.classifier.num_classes();
        let mut v = sample(&mut rng, n, AUX_LABELS.min(n)).into_vec();
        v.sort_unstable();
        v
    }

    fn channel(
        &self,
        source: ChannelSource,
        polarity: Polarity,
        image: &RgbImage,
        target: &str,
        proxies: Option<&ProxyLabelSet>,
        gt: Option<&Mask>,
    ) -> Result<SaliencyMap> {
        let classes = match source {
            ChannelSource::GroundTruth => {
                let gt = gt.ok_or_else(|| Error::Config("the oracle variant needs a ground-truth mask".into()))?;
                if gt.dims() != image.dims() {
                    return Err(Error::Shape("ground-truth mask does not match the image".into()));
                }
                return Ok(SaliencyMap {
                    plane: gt.to_plane(),
                    polarity,
                    source_labels: Vec::new(),
                    degenerate: false,
                });
            }
            ChannelSource::Target => proxies.expect("proxies computed").positive_indices(),
            ChannelSource::Negatives => proxies.expect("proxies computed").negative_indices(),
            ChannelSource::RandomLabels => self.random_classes(image, target, polarity as u8),
            ChannelSource::ClassifierTop => {
                let tensor = self.classifier.preprocessing().prepare(image);
                self.classifier
                    .predict_scores(&tensor)?
                    .top_k(AUX_LABELS)
                    .into_iter()
                    .map(|(c, _)| c)
                    .collect()
            }
        };
        class_saliency_map(image, &classes, polarity, self.classifier, self.cache)
    }

    /// Builds the network input `variant` calls for. `gt` is only read by the oracle.
    pub fn assemble(
        &self,
        model: &ModelConfig,
        image: &RgbImage,
        target: &str,
        variant: VariantTag,
        gt: Option<&Mask>,
    ) -> Result<Assembled> {
        if model.input_channels != variant.input_channels() {
            return Err(Error::Config(format!(
                "{variant} needs a {}-channel model, checkpoint has {}",
                variant.input_channels(),
                model.input_channels
            )));
        }
        let (pos_src, neg_src) = variant.channel_sources();
        let needs_proxies = [pos_src, neg_src]
            .iter()
            .any(|s| matches!(s, Some(ChannelSource::Target | ChannelSource::Negatives)));
        let proxies = if needs_proxies {
            Some(self.proxies(image, target)?)
        } else {
            None
        };
        let build = |src: Option<ChannelSource>, pol| {
            src.map(|s| self.channel(s, pol, image, target, proxies.as_ref(), gt))
                .transpose()
        };
        let positive = build(pos_src, Polarity::Positive)?;
        let negative = build(neg_src, Polarity::Negative)?;
        let input = AttentionInput::for_model(
            model,
            image.clone(),
            positive.as_ref().map(|m| m.plane.clone()),
            negative.as_ref().map(|m| m.plane.clone()),
        )?;
        debug_assert_eq!(input.channels(), variant.input_channels());
        Ok(Assembled {
            input,
            proxies,
            positive,
            negative,
        })
    }

    /// Full inference. Variants without GrabCut threshold the likelihood at 0.5.
    pub fn segment(
        &self,
        model: &SegNet,
        image: &RgbImage,
        target: &str,
        variant: VariantTag,
        gt: Option<&Mask>,
    ) -> Result<Segmentation> {
        let assembled = self.assemble(model.config(), image, target, variant, gt)?;
        let likelihood = model.predict_likelihood(&assembled.input)?;
        self.finish(image, likelihood, assembled, variant.uses_grabcut())
    }

    /// Refines a likelihood into the final mask.
    pub fn finish(
        &self,
        image: &RgbImage,
        likelihood: LikelihoodImage,
        assembled: Assembled,
        grabcut: bool,
    ) -> Result<Segmentation> {
        if grabcut {
            let r = refine(image, likelihood.plane(), &self.grabcut)?;
            Ok(Segmentation {
                mask: r.mask,
                likelihood,
                assembled,
                annotation: Some(r.annotation),
                flags: r.flags,
            })
        } else {
            Ok(Segmentation {
                mask: threshold_baseline(likelihood.plane(), 0.5),
                likelihood,
                assembled,
                annotation: None,
                flags: RefineFlags::default(),
            })
        }
    }
}

