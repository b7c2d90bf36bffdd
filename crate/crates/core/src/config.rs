//! Run configuration shared by the command-line tool and the examples: a TOML file whose
//! values command-line flags may override.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{load_backend, BackendSpec, ClassifierBackend};
use crate::dataset::{
    ingest_voc_sbd, load_corpus, load_partitions, synth_shapes_corpus, synthetic_partitions, PartitionSpec,
    SampleStore, SynthConfig,
};
use crate::error::{Error, Result};
use crate::eval::VariantTag;
use crate::label_semantics::{tokenize_label, EmbeddingTable, Mapper, OntologyIndex, DEFAULT_K};
use crate::postprocess::GrabCutParams;
use crate::segnet::{ModelConfig, TrainHyper};

/// Environment variable naming the default dataset root.
pub const DATA_ROOT_ENV: &str = "LEXSEG_DATA_ROOT";

/// A GloVe-style text file and its vector width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSource {
    pub path: PathBuf,
    #[serde(default = "glove_dim")]
    pub dimension: usize,
}

fn glove_dim() -> usize {
    300
}

/// Inference settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub backend: BackendSpec,
    pub mapper: Mapper,
    pub k: usize,
    pub grabcut: GrabCutParams,
    pub variant: VariantTag,
    pub checkpoint: Option<PathBuf>,
    pub seed: u64,
    /// Ontology TSV; the bundled WordNet 3.0 nouns when absent.
    pub ontology: Option<PathBuf>,
    pub embeddings: Option<EmbeddingSource>,
    pub cache_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            backend: BackendSpec::fixture(),
            mapper: Mapper::WordNet,
            k: DEFAULT_K,
            grabcut: GrabCutParams::default(),
            variant: VariantTag::Sem2CNeg,
            checkpoint: None,
            seed: 0,
            ontology: None,
            embeddings: None,
            cache_dir: None,
        }
    }
}

impl PipelineConfig {
    /// Checks K and that every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        self.grabcut.validate()?;
        let paths = [
            self.checkpoint.as_ref(),
            self.ontology.as_ref(),
            self.embeddings.as_ref().map(|e| &e.path),
            self.backend.weights_path.as_ref(),
        ];
        for p in paths.into_iter().flatten() {
            if !p.exists() {
                return Err(Error::resource(p, "referenced by the pipeline configuration"));
            }
        }
        if self.mapper == Mapper::Word2Vec && self.embeddings.is_none() {
            return Err(Error::Config("the word2vec mapper needs [pipeline.embeddings]".into()));
        }
        Ok(())
    }

    pub fn load_backend(&self) -> Result<std::sync::Arc<dyn ClassifierBackend>> {
        load_backend(&self.backend)
    }

    /// The configured ontology. The fixture backend brings its own colour hierarchy.
    pub fn load_ontology(&self) -> Result<OntologyIndex> {
        match &self.ontology {
            Some(p) => OntologyIndex::load_tsv(p),
            None if self.backend.name == "fixture" => Ok(crate::classifier::FixtureBackend::new().ontology()),
            None => Ok(OntologyIndex::wordnet30()),
        }
    }

    /// Embeddings restricted to the tokens of `vocab_labels` and `extra`.
    pub fn load_embeddings<'a>(
        &self,
        vocab_labels: impl IntoIterator<Item = &'a str>,
        extra: &[&'a str],
    ) -> Result<Option<EmbeddingTable>> {
        let Some(src) = &self.embeddings else {
            return Ok(None);
        };
        let mut keep = HashSet::new();
        for l in vocab_labels.into_iter().chain(extra.iter().copied()) {
            if let Ok(t) = tokenize_label(l) {
                keep.extend(t.tokens().iter().cloned());
            }
        }
        Ok(Some(EmbeddingTable::load(&src.path, src.dimension, Some(&keep))?))
    }
}

/// Where annotated images come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataConfig {
    /// Generated shapes, or a saved corpus directory when `dir` is set.
    Synthetic {
        #[serde(default = "default_images")]
        images: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_size")]
        size: usize,
        #[serde(default)]
        dir: Option<PathBuf>,
    },
    /// Pascal VOC plus converted SBD; roots default to `$LEXSEG_DATA_ROOT/VOC2012` and
    /// `$LEXSEG_DATA_ROOT/SBD`.
    Voc {
        #[serde(default)]
        voc_root: Option<PathBuf>,
        #[serde(default)]
        sbd_root: Option<PathBuf>,
    },
}

fn default_images() -> usize {
    200
}

fn default_size() -> usize {
    32
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig::Synthetic {
            images: default_images(),
            seed: 0,
            size: default_size(),
            dir: None,
        }
    }
}

impl DataConfig {
    pub fn load_store(&self) -> Result<SampleStore> {
        match self {
            DataConfig::Synthetic {
                images,
                seed,
                size,
                dir,
            } => match dir {
                Some(d) => load_corpus(d),
                None => synth_shapes_corpus(
                    *images,
                    *seed,
                    &SynthConfig {
                        size: *size,
                        ..SynthConfig::default()
                    },
                ),
            },
            DataConfig::Voc { voc_root, sbd_root } => {
                let root = std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from);
                let voc = voc_root
                    .clone()
                    .or_else(|| root.as_ref().map(|r| r.join("VOC2012")))
                    .ok_or_else(|| {
                        Error::Config(format!("set data.voc_root or {DATA_ROOT_ENV} to locate Pascal VOC"))
                    })?;
                let sbd = sbd_root
                    .clone()
                    .or_else(|| root.as_ref().map(|r| r.join("SBD")).filter(|p| p.exists()));
                ingest_voc_sbd(&voc, sbd.as_deref())
            }
        }
    }

    pub fn partitions(&self) -> Vec<PartitionSpec> {
        match self {
            DataConfig::Synthetic { .. } => synthetic_partitions(),
            DataConfig::Voc { .. } => load_partitions(),
        }
    }
}

/// A complete experiment record: pipeline, network, training and data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub pipeline: PipelineConfig,
    pub model: ModelConfig,
    pub train: TrainHyper,
    #[serde(default)]
    pub data: DataConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|_| Error::resource(path, "configuration file not found"))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
            e => e,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse("configuration", e.to_string()))
    }

    /// The desk-scale defaults: fixture classifier, tiny network, synthetic corpus.
    pub fn tiny() -> Self {
        ExperimentConfig {
            pipeline: PipelineConfig::default(),
            model: ModelConfig::tiny(5, 0),
            train: TrainHyper {
                steps: 300,
                batch_size: 8,
                optimizer: crate::segnet::OptimizerConfig::Adam {
                    lr: 0.01,
                    beta1: 0.9,
                    beta2: 0.999,
                    eps: 1e-8,
                },
                checkpoint_every: None,
                crop: None,
                seed: 0,
            },
            data: DataConfig::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_configs_parse() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let tiny = ExperimentConfig::load(&root.join("tiny_synthetic.toml")).unwrap();
        assert_eq!(tiny, ExperimentConfig::tiny());
        let voc = ExperimentConfig::load(&root.join("deeplabv3_voc.toml")).unwrap();
        assert_eq!(voc.train.steps, 30_000);
        assert_eq!(voc.train.batch_size, 16);
        assert_eq!(voc.train.crop, Some(513));
        assert!(matches!(voc.data, DataConfig::Voc { .. }));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = toml::to_string(&ExperimentConfig::tiny()).unwrap();
        text.push_str("\n[extra]\nx = 1\n");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn validation_checks_k_and_paths() {
        let mut p = PipelineConfig::default();
        p.validate().unwrap();
        p.k = 0;
        assert!(p.validate().is_err());
        p.k = 3;
        p.checkpoint = Some("/nonexistent/ckpt.safetensors".into());
        assert!(matches!(p.validate(), Err(Error::Resource { .. })));
    }
}
