//! Trains a small segmenter on synthetic shapes, then segments a colour it never saw a
//! mask for and writes the intermediate maps.
//!
//! cargo run --release --example segment_image -- [out_dir] [steps]

use std::path::PathBuf;

use lexseg::classifier::FixtureBackend;
use lexseg::dataset::{synth_shapes_corpus, synthetic_partitions, Split, SynthConfig};
use lexseg::eval::{binary_iou, train_variant, TrainPlan, VariantTag};
use lexseg::label_semantics::{Mapper, MapperResources};
use lexseg::pipeline::Pipeline;
use lexseg::raster::save_gray_png;
use lexseg::segnet::{ModelConfig, OptimizerConfig, TrainHyper};

fn main() -> lexseg::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("lexseg-segment"));
    let steps = args.next().map(|s| s.parse().expect("steps")).unwrap_or(150);
    std::fs::create_dir_all(&out)?;

    let fixture = FixtureBackend::new();
    let ontology = fixture.ontology();
    let resources = MapperResources {
        ontology: Some(&ontology),
        embeddings: None,
    };
    let pipeline = Pipeline::new(&fixture, Mapper::WordNet, resources);
    let store = synth_shapes_corpus(120, 0, &SynthConfig::default())?;
    let partition = &synthetic_partitions()[0];
    let variant = VariantTag::Sem2CNeg;
    let plan = TrainPlan {
        model: ModelConfig::tiny(variant.input_channels(), 0),
        hyper: TrainHyper {
            steps,
            batch_size: 8,
            optimizer: OptimizerConfig::Adam {
                lr: 0.01,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            checkpoint_every: None,
            crop: None,
            seed: 0,
        },
        memoize: true,
        checkpoint_dir: None,
    };
    let (model, _) = train_variant(&pipeline, &store, partition, variant, &plan)?;

    let label = &partition.test_labels[0];
    let sample = store
        .samples()
        .iter()
        .find(|s| s.split == Split::Test && s.has_label(label))
        .expect("a test image with the held-out colour");
    let image = sample.image()?;
    let gt = sample.mask(label)?;
    let seg = pipeline.segment(&model, &image, label, variant, None)?;

    let (w, h) = image.dims();
    image.save_png(&out.join("image.png"))?;
    seg.mask.save_png(&out.join("mask.png"))?;
    save_gray_png(&out.join("likelihood.png"), w, h, seg.likelihood.plane().to_gray8())?;
    if let Some(p) = &seg.assembled.positive {
        save_gray_png(&out.join("positive.png"), w, h, p.plane.to_gray8())?;
    }
    if let Some(ann) = &seg.annotation {
        ann.save_png(&out.join("annotation.png"))?;
    }
    println!("{} '{label}': IoU {:.3}, wrote {}", sample.image_id, binary_iou(&seg.mask, &gt)?, out.display());
    Ok(())
}
