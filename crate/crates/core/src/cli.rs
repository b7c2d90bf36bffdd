//! The `lexseg` command-line tool.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::classifier::{BackendSpec, ClassifierBackend};
use crate::config::{EmbeddingSource, ExperimentConfig, PipelineConfig};
use crate::dataset::{PartitionSpec, SampleStore};
use crate::error::{Error, Result};
use crate::eval::{
    compare_mappers, evaluate_partition, save_overlay, train_variant, AblationReport, CheckpointDir, MetricsReport,
    RunMetadata, TrainPlan, VariantTag, PROXY_TARGETS,
};
use crate::label_semantics::{
    tokenize_label, ClassifierVocabulary, EmbeddingTable, Mapper, MapperResources, OntologyIndex,
};
use crate::pipeline::Pipeline;
use crate::raster::{Mask, RgbImage};
use crate::saliency::{save_salmap, SaliencyCache, SaliencyMap};
use crate::segnet::{load_checkpoint, save_checkpoint, SegNet};

/// Environment variable naming the VGG-19 weights file.
pub const VGG19_WEIGHTS_ENV: &str = "LEXSEG_VGG19_WEIGHTS";

#[derive(Debug, Parser)]
#[command(name = "lexseg", version, about = "Segment images by label names the classifier never saw")]
pub struct Cli {
    /// Worker threads for per-image work (default: all processors).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// TOML configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the proxy (and, with --image, negative) labels for a target label.
    MapLabels(MapLabelsArgs),
    /// Write the positive and negative attention maps of an image.
    Saliency(SaliencyArgs),
    /// Segment one image for one label with a trained checkpoint.
    Segment(SegmentArgs),
    /// Train the segmentation network for one partition and variant.
    Train(TrainArgs),
    /// Evaluate checkpoints on the test labels of a partition.
    Eval(EvalArgs),
    /// Compare both mappers on the reference target labels.
    CompareMappers(CompareArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Fixture,
    Vgg19,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MapperArg {
    Wordnet,
    Word2vec,
}

impl From<MapperArg> for Mapper {
    fn from(m: MapperArg) -> Mapper {
        match m {
            MapperArg::Wordnet => Mapper::WordNet,
            MapperArg::Word2vec => Mapper::Word2Vec,
        }
    }
}

fn parse_variant(s: &str) -> std::result::Result<VariantTag, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct ResourceArgs {
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// VGG-19 safetensors weights (default: $LEXSEG_VGG19_WEIGHTS).
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mapper: Option<MapperArg>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Ontology TSV (default: bundled WordNet 3.0 nouns).
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    /// GloVe-style embeddings for the word2vec mapper.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    pub embedding_dim: usize,
    /// Directory caching composed saliency maps.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MapLabelsArgs {
    #[arg(long)]
    pub label: String,
    /// Prune candidates by the classifier's probabilities on this image.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Without --image, list every candidate instead of the first k.
    #[arg(long)]
    pub all: bool,
    #[command(flatten)]
    pub resources: ResourceArgs,
}

#[derive(Debug, Args)]
pub struct SaliencyArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub label: String,
    /// Output directory for positive.salmap, negative.salmap and PNG previews.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub resources: ResourceArgs,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub label: String,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output mask PNG (0 background, 255 foreground).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<VariantTag>,
    /// Threshold the likelihood at 0.5 instead of running GrabCut.
    #[arg(long)]
    pub no_grabcut: bool,
    /// Ground-truth mask, needed by the oracle variant.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub dump_saliency: Option<PathBuf>,
    /// Writes the likelihood and GrabCut annotation here.
    #[arg(long)]
    pub dump_annotation: Option<PathBuf>,
    #[command(flatten)]
    pub resources: ResourceArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub partition: usize,
    /// Custom partition TOML (index, test_labels, train_labels).
    #[arg(long)]
    pub partition_file: Option<PathBuf>,
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<VariantTag>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Checkpoint root; the final weights land in <out>/<variant>/partition-<i>.safetensors.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    #[command(flatten)]
    pub resources: ResourceArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Partition index; all partitions when omitted (requires --checkpoint-dir).
    #[arg(long)]
    pub partition: Option<usize>,
    #[arg(long)]
    pub partition_file: Option<PathBuf>,
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<VariantTag>,
    #[arg(long, conflicts_with = "checkpoint_dir")]
    pub checkpoint: Option<PathBuf>,
    /// Root laid out as written by `train --out`.
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
    #[arg(long)]
    pub report: PathBuf,
    /// Write image | ground truth | prediction panels here.
    #[arg(long)]
    pub overlays: Option<PathBuf>,
    #[command(flatten)]
    pub resources: ResourceArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Targets to compare (default: the seven reference targets).
    #[arg(long = "label")]
    pub labels: Vec<String>,
    #[command(flatten)]
    pub resources: ResourceArgs,
}

/// Parses arguments, runs the command and maps errors to exit code 1 (clap exits with 2
/// on usage errors).
pub fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(&cli, &mut std::io::stdout()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::from(1)
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn std::io::Write) -> Result<()> {
    if let Some(n) = cli.workers {
        // a second call in one process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let text = match &cli.command {
        Command::MapLabels(a) => map_labels(cli, a)?,
        Command::Saliency(a) => saliency(cli, a)?,
        Command::Segment(a) => segment(cli, a)?,
        Command::Train(a) => train(cli, a)?,
        Command::Eval(a) => eval(cli, a)?,
        Command::CompareMappers(a) => compare(cli, a)?,
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn file_experiment(cli: &Cli) -> Result<Option<ExperimentConfig>> {
    cli.config.as_deref().map(ExperimentConfig::load).transpose()
}

/// The `[pipeline]` table of --config, or defaults.
fn file_pipeline(cli: &Cli) -> Result<(PipelineConfig, bool)> {
    let Some(path) = &cli.config else {
        return Ok((PipelineConfig::default(), false));
    };
    let text = std::fs::read_to_string(path).map_err(|_| Error::resource(path, "configuration file not found"))?;
    let value: toml::Table = toml::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    let p = match value.get("pipeline") {
        Some(v) => v
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| Error::parse(path.display().to_string(), e.to_string()))?,
        None => PipelineConfig::default(),
    };
    Ok((p, true))
}

fn vgg_spec(weights: Option<&PathBuf>) -> Result<BackendSpec> {
    let path = weights
        .cloned()
        .or_else(|| std::env::var_os(VGG19_WEIGHTS_ENV).map(PathBuf::from))
        .ok_or_else(|| {
            Error::resource(
                "vgg19-imagenet1k.safetensors",
                format!("pass --weights or set {VGG19_WEIGHTS_ENV}; {}", crate::classifier::VGG19_WEIGHTS_HINT),
            )
        })?;
    Ok(BackendSpec::vgg19(path))
}

/// Applies flag overrides to `base`.
fn apply_flags(cli: &Cli, mut base: PipelineConfig, r: &ResourceArgs) -> Result<PipelineConfig> {
    match r.backend {
        Some(BackendArg::Fixture) => base.backend = BackendSpec::fixture(),
        Some(BackendArg::Vgg19) => base.backend = vgg_spec(r.weights.as_ref())?,
        None => {
            if let Some(w) = &r.weights {
                base.backend = BackendSpec::vgg19(w);
            }
        }
    }
    if let Some(m) = r.mapper {
        base.mapper = m.into();
    }
    if let Some(k) = r.k {
        base.k = k;
    }
    if let Some(o) = &r.ontology {
        base.ontology = Some(o.clone());
    }
    if let Some(e) = &r.embeddings {
        base.embeddings = Some(EmbeddingSource {
            path: e.clone(),
            dimension: r.embedding_dim,
        });
    }
    if let Some(c) = &r.cache_dir {
        base.cache_dir = Some(c.clone());
    }
    if let Some(s) = cli.seed {
        base.seed = s;
    }
    base.validate()?;
    Ok(base)
}

/// Loaded classifier, ontology and embeddings for one command.
struct Resources {
    classifier: Arc<dyn ClassifierBackend>,
    ontology: Option<OntologyIndex>,
    embeddings: Option<EmbeddingTable>,
    cache: Option<SaliencyCache>,
}

impl Resources {
    fn load(cfg: &PipelineConfig, targets: &[&str]) -> Result<Self> {
        let classifier = cfg.load_backend()?;
        let ontology = match cfg.mapper {
            Mapper::WordNet => Some(cfg.load_ontology()?),
            Mapper::Word2Vec => None,
        };
        let embeddings = cfg.load_embeddings(
            classifier.vocabulary().entries().iter().map(|e| e.label.text()),
            targets,
        )?;
        let cache = cfg.cache_dir.as_ref().map(SaliencyCache::new).transpose()?;
        Ok(Resources {
            classifier,
            ontology,
            embeddings,
            cache,
        })
    }

    fn pipeline(&self, cfg: &PipelineConfig) -> Pipeline<'_> {
        let mut p = Pipeline::new(
            self.classifier.as_ref(),
            cfg.mapper,
            MapperResources {
                ontology: self.ontology.as_ref(),
                embeddings: self.embeddings.as_ref(),
            },
        );
        p.k = cfg.k;
        p.grabcut = cfg.grabcut.clone();
        p.cache = self.cache.as_ref();
        p.seed = cfg.seed;
        p
    }
}

fn map_labels(cli: &Cli, a: &MapLabelsArgs) -> Result<String> {
    let (base, _) = file_pipeline(cli)?;
    let target = tokenize_label(&a.label)?;
    let mut out = String::new();
    if let Some(image_path) = &a.image {
        let cfg = apply_flags(cli, base, &a.resources)?;
        let res = Resources::load(&cfg, &[a.label.as_str()])?;
        let image = RgbImage::load(image_path)?;
        let proxies = res.pipeline(&cfg).proxies(&image, &a.label)?;
        let vocab = res.classifier.vocabulary();
        let _ = writeln!(out, "target\t{target}\tmapper\t{}\tk\t{}", cfg.mapper, cfg.k);
        let _ = writeln!(out, "kind\tclass\tprobability\tlabel");
        for (kind, list) in [("positive", &proxies.positives), ("negative", &proxies.negatives)] {
            for s in list {
                let label = vocab.label(s.class_index).map(|l| l.text()).unwrap_or("?");
                let _ = writeln!(out, "{kind}\t{}\t{:.6}\t{label}", s.class_index, s.score);
            }
        }
        for w in &proxies.warnings {
            let _ = writeln!(out, "# warning: {w}");
        }
        return Ok(out);
    }

    // no image: only the vocabulary is needed, not classifier weights
    let wants_vgg = a.resources.backend != Some(BackendArg::Fixture);
    let mut flags = a.resources.clone();
    flags.backend = Some(BackendArg::Fixture);
    flags.weights = None;
    let cfg = apply_flags(cli, base, &flags)?;
    let vocab = if wants_vgg {
        ClassifierVocabulary::imagenet1k()
    } else {
        crate::classifier::FixtureBackend::new().vocabulary().clone()
    };
    let ontology = match (&cfg.ontology, wants_vgg) {
        (Some(p), _) => Some(OntologyIndex::load_tsv(p)?),
        (None, true) => Some(OntologyIndex::wordnet30()),
        (None, false) => Some(crate::classifier::FixtureBackend::new().ontology()),
    };
    let embeddings = cfg.load_embeddings(vocab.entries().iter().map(|e| e.label.text()), &[a.label.as_str()])?;
    let rows: Vec<(usize, Option<f64>)> = match cfg.mapper {
        Mapper::WordNet => {
            let o = ontology.as_ref().expect("loaded above");
            crate::label_semantics::wordnet_candidates(&target, &vocab, o)?
                .into_iter()
                .map(|i| (i, None))
                .collect()
        }
        Mapper::Word2Vec => {
            let t = embeddings
                .as_ref()
                .ok_or_else(|| Error::Config("the word2vec mapper needs --embeddings".into()))?;
            let k = if a.all { vocab.len() } else { cfg.k };
            crate::label_semantics::word2vec_candidates(&target, &vocab, t, k)?
                .into_iter()
                .map(|(i, s)| (i, Some(s)))
                .collect()
        }
    };
    let total = rows.len();
    let shown = if a.all { total } else { total.min(cfg.k) };
    let _ = writeln!(out, "target\t{target}\tmapper\t{}\tk\t{}", cfg.mapper, cfg.k);
    let _ = writeln!(out, "kind\tclass\tscore\tlabel");
    for (i, score) in rows.into_iter().take(shown) {
        let label = vocab.label(i).map(|l| l.text()).unwrap_or("?");
        let score = score.map(|s| format!("{s:.6}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(out, "positive\t{i}\t{score}\t{label}");
    }
    if shown < total {
        let _ = writeln!(out, "# {total} candidates, showing {shown}; pass --all or --image to prune");
    }
    if total == 0 {
        let _ = writeln!(out, "# warning: no candidates for {target}");
    }
    Ok(out)
}

fn write_map(dir: &Path, name: &str, map: &SaliencyMap) -> Result<()> {
    save_salmap(&map.plane, &dir.join(format!("{name}.salmap")))?;
    let (w, h) = map.dims();
    crate::raster::save_gray_png(&dir.join(format!("{name}.png")), w, h, map.plane.to_gray8())
}

fn saliency(cli: &Cli, a: &SaliencyArgs) -> Result<String> {
    let (base, _) = file_pipeline(cli)?;
    let cfg = apply_flags(cli, base, &a.resources)?;
    let res = Resources::load(&cfg, &[a.label.as_str()])?;
    let image = RgbImage::load(&a.image)?;
    let pipeline = res.pipeline(&cfg);
    let proxies = pipeline.proxies(&image, &a.label)?;
    let maps = crate::saliency::generate_attention_maps(&image, &proxies, res.classifier.as_ref(), res.cache.as_ref())?;
    std::fs::create_dir_all(&a.out)?;
    write_map(&a.out, "positive", &maps.positive)?;
    write_map(&a.out, "negative", &maps.negative)?;
    Ok(format!(
        "wrote {} (positive: {} labels, negative: {} labels)\n",
        a.out.display(),
        maps.positive.source_labels.len(),
        maps.negative.source_labels.len()
    ))
}

/// Backend to pair with a checkpoint: flags, then the config file, then the checkpoint's
/// own initialization source.
fn backend_for_model(model: &SegNet, cfg: &mut PipelineConfig, from_file: bool, r: &ResourceArgs) -> Result<()> {
    if r.backend.is_some() || r.weights.is_some() || from_file {
        return Ok(());
    }
    let mc = model.config();
    cfg.backend = match mc.init_source.as_str() {
        "vgg19-imagenet1k" => vgg_spec(mc.init_weights.as_ref())?,
        _ => BackendSpec::fixture(),
    };
    Ok(())
}

fn segment(cli: &Cli, a: &SegmentArgs) -> Result<String> {
    let (base, from_file) = file_pipeline(cli)?;
    let mut cfg = apply_flags(cli, base, &a.resources)?;
    let ckpt = load_checkpoint(&a.checkpoint)?;
    backend_for_model(&ckpt.model, &mut cfg, from_file, &a.resources)?;
    cfg.validate()?;
    let variant = a.variant.unwrap_or(cfg.variant);
    let res = Resources::load(&cfg, &[a.label.as_str()])?;
    let image = RgbImage::load(&a.image)?;
    let gt = a.gt.as_deref().map(Mask::load_png).transpose()?;
    let pipeline = res.pipeline(&cfg);
    let assembled = pipeline.assemble(ckpt.model.config(), &image, &a.label, variant, gt.as_ref())?;
    let likelihood = ckpt.model.predict_likelihood(&assembled.input)?;
    let grabcut = variant.uses_grabcut() && !a.no_grabcut;
    let seg = pipeline.finish(&image, likelihood, assembled, grabcut)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    seg.mask.save_png(&a.out)?;
    if let Some(dir) = &a.dump_saliency {
        std::fs::create_dir_all(dir)?;
        let (w, h) = image.dims();
        let zero = |p| SaliencyMap::zeros(w, h, p);
        let pos = seg.assembled.positive.clone().unwrap_or_else(|| zero(crate::saliency::Polarity::Positive));
        let neg = seg.assembled.negative.clone().unwrap_or_else(|| zero(crate::saliency::Polarity::Negative));
        write_map(dir, "positive", &pos)?;
        write_map(dir, "negative", &neg)?;
    }
    if let Some(dir) = &a.dump_annotation {
        std::fs::create_dir_all(dir)?;
        let p = seg.likelihood.plane();
        save_salmap(p, &dir.join("likelihood.salmap"))?;
        crate::raster::save_gray_png(&dir.join("likelihood.png"), p.width(), p.height(), p.to_gray8())?;
        if let Some(ann) = &seg.annotation {
            ann.save_png(&dir.join("annotation.png"))?;
        }
    }
    let mut msg = format!(
        "{}: {} of {} pixels foreground ({variant}{})\n",
        a.out.display(),
        seg.mask.count(),
        image.width() * image.height(),
        if grabcut { "" } else { ", no GrabCut" }
    );
    if seg.flags.fallback_seeds {
        msg.push_str("# warning: no pixel cleared t_fg; fallback seeds used\n");
    }
    if seg.flags.empty_foreground {
        msg.push_str("# warning: empty foreground\n");
    }
    Ok(msg)
}

fn experiment(cli: &Cli) -> Result<ExperimentConfig> {
    Ok(file_experiment(cli)?.unwrap_or_else(ExperimentConfig::tiny))
}

fn select_partition(exp: &ExperimentConfig, index: usize, file: Option<&Path>) -> Result<PartitionSpec> {
    if let Some(f) = file {
        return PartitionSpec::load(f);
    }
    exp.data
        .partitions()
        .into_iter()
        .find(|p| p.index == index)
        .ok_or_else(|| Error::Config(format!("no partition {index}")))
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<String> {
    let mut exp = experiment(cli)?;
    if let Some(s) = cli.seed {
        exp.train.seed = s;
        exp.model.seed = s;
    }
    if let Some(n) = a.steps {
        exp.train.steps = n;
    }
    let cfg = apply_flags(cli, exp.pipeline.clone(), &a.resources)?;
    let variant = a.variant.unwrap_or(cfg.variant).training_variant();
    let partition = select_partition(&exp, a.partition, a.partition_file.as_deref())?;
    let store = exp.data.load_store()?;
    let res = Resources::load(&cfg, &[])?;
    let pipeline = res.pipeline(&cfg);
    let dirs = CheckpointDir(a.out.clone());
    let final_path = dirs.path(variant, partition.index);
    // intermediate checkpoints only when the config schedules them
    let step_dir = final_path.with_extension("").join("steps");
    let periodic = exp.train.checkpoint_every.is_some_and(|c| c > 0);
    if periodic {
        std::fs::create_dir_all(&step_dir)?;
    } else if let Some(parent) = final_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let plan = TrainPlan {
        model: exp.model.clone(),
        hyper: exp.train.clone(),
        memoize: matches!(exp.data, crate::config::DataConfig::Synthetic { .. }),
        checkpoint_dir: periodic.then_some(step_dir.as_path()),
    };
    let (model, state) = train_variant(&pipeline, &store, &partition, variant, &plan)?;
    save_checkpoint(&final_path, &model, &state, Some(&exp.train))?;
    let last = state.loss_history.last().map(|l| format!("{l:.5}")).unwrap_or_else(|| "-".into());
    Ok(format!(
        "{variant} partition {}: {} steps, final loss {last}, checkpoint {}\n",
        partition.index,
        state.step,
        final_path.display()
    ))
}

fn eval(cli: &Cli, a: &EvalArgs) -> Result<String> {
    let exp = experiment(cli)?;
    let (base, from_file) = file_pipeline(cli)?;
    let mut cfg = apply_flags(cli, base, &a.resources)?;
    let variant = a.variant.unwrap_or(cfg.variant);
    let partitions: Vec<PartitionSpec> = match (a.partition, &a.partition_file) {
        (_, Some(f)) => vec![PartitionSpec::load(f)?],
        (Some(i), None) => vec![select_partition(&exp, i, None)?],
        (None, None) => exp.data.partitions(),
    };
    let models: Vec<(PartitionSpec, SegNet, usize)> = partitions
        .into_iter()
        .map(|p| {
            let path = match (&a.checkpoint, &a.checkpoint_dir) {
                (Some(c), _) => c.clone(),
                (None, Some(d)) => CheckpointDir(d.clone()).path(variant, p.index),
                (None, None) => {
                    return Err(Error::Config("pass --checkpoint or --checkpoint-dir".into()));
                }
            };
            if !path.exists() {
                return Err(Error::resource(
                    &path,
                    format!("no checkpoint for variant {variant} on partition {}", p.index),
                ));
            }
            let c = load_checkpoint(&path)?;
            Ok((p, c.model, c.state.step))
        })
        .collect::<Result<_>>()?;
    if a.checkpoint.is_some() && models.len() > 1 {
        return Err(Error::Config("a single --checkpoint evaluates a single --partition".into()));
    }
    backend_for_model(&models[0].1, &mut cfg, from_file, &a.resources)?;
    let res = Resources::load(&cfg, &[])?;
    let pipeline = res.pipeline(&cfg);
    let store: SampleStore = exp.data.load_store()?;
    let mut parts = Vec::new();
    let mut episodes = String::from("partition\timage_id\tlabel\ttp\tfp\tfn\tfallback_seeds\tempty_foreground\n");
    for (p, model, _) in &models {
        let (m, results) = evaluate_partition(&pipeline, model, &store, p, variant)?;
        for r in &results {
            let _ = writeln!(
                episodes,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                p.index, r.image_id, r.label, r.counts.tp, r.counts.fp, r.counts.fn_, r.flags.fallback_seeds,
                r.flags.empty_foreground
            );
        }
        if let Some(dir) = &a.overlays {
            std::fs::create_dir_all(dir)?;
            for e in crate::dataset::test_episodes(&store, p, variant) {
                let s = store.get(e.sample);
                let image = s.image()?;
                let gt = s.mask(&e.target_label)?;
                let seg = pipeline.segment(model, &image, &e.target_label, variant, Some(&gt))?;
                save_overlay(
                    &dir.join(format!("{}_{}_{}.png", p.index, e.image_id, e.target_label)),
                    &image,
                    &gt,
                    &seg.mask,
                )?;
            }
        }
        parts.push(m);
    }
    let metadata = RunMetadata {
        seed: cfg.seed,
        steps: models[0].2,
        backbone: format!("{:?}", models[0].1.config().backbone).to_lowercase(),
        dataset: match exp.data {
            crate::config::DataConfig::Synthetic { .. } => "synthetic-shapes".into(),
            crate::config::DataConfig::Voc { .. } => "pascal-voc".into(),
        },
        iou_protocol: "per-class aggregate counts, then class mean".into(),
    };
    let report = AblationReport::new(vec![MetricsReport::new(variant, parts, metadata)]);
    report.save(&a.report)?;
    crate::fsutil::write_atomic(&a.report.join("episodes.tsv"), episodes.as_bytes())?;
    let mut msg = String::new();
    for p in &report.runs[0].partitions {
        let _ = writeln!(msg, "{variant}\tpartition {}\tmIOU {:.4}", p.partition, p.miou);
    }
    let _ = writeln!(msg, "{variant}\tmean\t{:.4}\treport {}", report.runs[0].mean, a.report.display());
    Ok(msg)
}

fn compare(cli: &Cli, a: &CompareArgs) -> Result<String> {
    let (base, _) = file_pipeline(cli)?;
    let mut flags = a.resources.clone();
    flags.backend = Some(BackendArg::Fixture);
    flags.weights = None;
    let cfg = apply_flags(cli, base, &flags)?;
    let targets: Vec<&str> = if a.labels.is_empty() {
        PROXY_TARGETS.to_vec()
    } else {
        a.labels.iter().map(String::as_str).collect()
    };
    let vocab = ClassifierVocabulary::imagenet1k();
    let ontology = match &cfg.ontology {
        Some(p) => OntologyIndex::load_tsv(p)?,
        None => OntologyIndex::wordnet30(),
    };
    let embeddings = cfg.load_embeddings(vocab.entries().iter().map(|e| e.label.text()), &targets)?;
    let cmp = compare_mappers(&targets, &vocab, Some(&ontology), embeddings.as_ref(), cfg.k)?;
    let mut out = cmp.to_text();
    let _ = writeln!(out, "overall: {}", if cmp.all_pass() { "pass" } else { "FAIL" });
    Ok(out)
}
