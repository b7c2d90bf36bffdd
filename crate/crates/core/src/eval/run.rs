use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{per_class_miou, IouCounts, PartitionMetrics};
use super::report::{AblationReport, MetricsReport, RunMetadata};
use super::variant::VariantTag;
use crate::dataset::{sample_episodes, test_episodes, PartitionSpec, SampleStore, Split};
use crate::error::{Error, Result};
use crate::pipeline::Pipeline;
use crate::postprocess::RefineFlags;
use crate::segnet::{
    load_checkpoint, train, AttentionInput, ModelConfig, SegNet, TrainHyper, TrainState, TrainingExample,
};

/// Outcome of one test episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub image_id: String,
    pub label: String,
    pub counts: IouCounts,
    pub flags: RefineFlags,
}

/// Runs the pipeline on every (test image, test label) pair of `partition`.
pub fn evaluate_partition(
    pipeline: &Pipeline<'_>,
    model: &SegNet,
    store: &SampleStore,
    partition: &PartitionSpec,
    variant: VariantTag,
) -> Result<(PartitionMetrics, Vec<EpisodeResult>)> {
    let episodes = test_episodes(store, partition, variant);
    let run = |e: &crate::dataset::Episode| -> Result<EpisodeResult> {
        let sample = store.get(e.sample);
        let image = sample.image()?;
        let gt = sample.mask(&e.target_label)?;
        let seg = pipeline.segment(model, &image, &e.target_label, variant, Some(&gt))?;
        Ok(EpisodeResult {
            image_id: e.image_id.clone(),
            label: e.target_label.clone(),
            counts: IouCounts::of(&seg.mask, &gt)?,
            flags: seg.flags,
        })
    };
    let results: Vec<EpisodeResult> = if pipeline.classifier.exclusive() {
        episodes.iter().map(run).collect::<Result<_>>()?
    } else {
        episodes.par_iter().map(run).collect::<Result<_>>()?
    };
    let metrics = per_class_miou(results.iter().map(|r| (r.label.clone(), r.counts)), partition)?;
    Ok((metrics, results))
}

/// Supplies the trained network for a (variant, partition) pair.
pub trait ModelProvider {
    fn model(&self, variant: VariantTag, partition: &PartitionSpec) -> Result<SegNet>;
}

impl<F: Fn(VariantTag, &PartitionSpec) -> Result<SegNet>> ModelProvider for F {
    fn model(&self, variant: VariantTag, partition: &PartitionSpec) -> Result<SegNet> {
        self(variant, partition)
    }
}

/// Checkpoints laid out as `<root>/<variant>/partition-<i>.safetensors`; variants that
/// reuse another's weights (no-GrabCut) read that variant's directory.
#[derive(Clone, Debug)]
pub struct CheckpointDir(pub PathBuf);

impl CheckpointDir {
    pub fn path(&self, variant: VariantTag, partition: usize) -> PathBuf {
        self.0
            .join(variant.training_variant().as_str().to_ascii_lowercase())
            .join(format!("partition-{partition}.safetensors"))
    }
}

impl ModelProvider for CheckpointDir {
    fn model(&self, variant: VariantTag, partition: &PartitionSpec) -> Result<SegNet> {
        let path = self.path(variant, partition.index);
        if !path.exists() {
            return Err(Error::resource(
                &path,
                format!("no checkpoint for variant {variant} on partition {}", partition.index),
            ));
        }
        Ok(load_checkpoint(&path)?.model)
    }
}

/// Evaluates every variant on every partition.
pub fn run_ablation(
    variants: &[VariantTag],
    partitions: &[PartitionSpec],
    store: &SampleStore,
    pipeline: &Pipeline<'_>,
    models: &dyn ModelProvider,
    metadata: &RunMetadata,
) -> Result<AblationReport> {
    let mut runs = Vec::new();
    for &v in variants {
        let mut parts = Vec::new();
        for p in partitions {
            let model = models.model(v, p)?;
            let (m, _) = evaluate_partition(pipeline, &model, store, p, v)?;
            log::info!("{v} partition {}: mIOU {:.4}", p.index, m.miou);
            parts.push(m);
        }
        runs.push(MetricsReport::new(v, parts, metadata.clone()));
    }
    Ok(AblationReport::new(runs))
}

/// Takes a random square-ish window of at most `side` pixels per axis.
fn random_crop(ex: TrainingExample, side: usize, rng: &mut ChaCha8Rng) -> TrainingExample {
    let (w, h) = ex.input.dims();
    let (cw, ch) = (side.min(w), side.min(h));
    if (cw, ch) == (w, h) {
        return ex;
    }
    let x0 = rng.random_range(0..=w - cw);
    let y0 = rng.random_range(0..=h - ch);
    let crop_plane = |p: &Option<crate::raster::Plane>| p.as_ref().map(|p| p.crop(x0, y0, cw, ch));
    TrainingExample {
        target_label: ex.target_label,
        input: AttentionInput {
            rgb: ex.input.rgb.crop(x0, y0, cw, ch),
            positive: crop_plane(&ex.input.positive),
            negative: crop_plane(&ex.input.negative),
            mean: ex.input.mean,
            std: ex.input.std,
        },
        mask: ex.mask.crop(x0, y0, cw, ch),
    }
}

/// Options for [`train_variant`].
#[derive(Clone, Debug)]
pub struct TrainPlan<'p> {
    pub model: ModelConfig,
    pub hyper: TrainHyper,
    /// Keep assembled inputs in memory across repeated draws of the same episode.
    pub memoize: bool,
    pub checkpoint_dir: Option<&'p Path>,
}

/// Trains a fresh network for `variant` on the train split of `partition`.
pub fn train_variant(
    pipeline: &Pipeline<'_>,
    store: &SampleStore,
    partition: &PartitionSpec,
    variant: VariantTag,
    plan: &TrainPlan<'_>,
) -> Result<(SegNet, TrainState)> {
    let variant = variant.training_variant();
    let mut config = plan.model.clone();
    config.input_channels = variant.input_channels();
    let mut model = SegNet::build(&config)?;
    let mut state = TrainState::new(&model);
    let mut episodes = sample_episodes(store, partition, Split::Train, variant, plan.hyper.seed)?;
    let mut crop_rng = ChaCha8Rng::seed_from_u64(plan.hyper.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut memo: HashMap<(usize, String), TrainingExample> = HashMap::new();
    let test_labels: HashSet<String> = partition.test_labels.iter().cloned().collect();
    let mut next = || -> Result<TrainingExample> {
        let e = episodes.next().expect("episode streams are endless");
        let key = (e.sample, e.target_label.clone());
        let cached = memo.get(&key).cloned();
        let ex = match cached {
            Some(ex) => ex,
            None => {
                let sample = store.get(e.sample);
                let image = sample.image()?;
                let mask = e.mask(store)?;
                let a = pipeline.assemble(&config, &image, &e.target_label, variant, Some(&mask))?;
                let ex = TrainingExample {
                    target_label: e.target_label.clone(),
                    input: a.input,
                    mask,
                };
                if plan.memoize {
                    memo.insert(key, ex.clone());
                }
                ex
            }
        };
        Ok(match plan.hyper.crop {
            Some(side) => random_crop(ex, side, &mut crop_rng),
            None => ex,
        })
    };
    train(
        &mut model,
        &mut state,
        &mut next,
        plan.hyper.steps,
        &plan.hyper,
        &test_labels,
        plan.checkpoint_dir,
    )?;
    Ok((model, state))
}
