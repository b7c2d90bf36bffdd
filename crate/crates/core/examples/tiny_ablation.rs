//! Trains the tiny segmenter on the synthetic shapes corpus for three variants and
//! compares their mIOU on held-out colours.
//!
//! cargo run --release --example tiny_ablation -- [steps] [images] [seed]

use std::time::Instant;

use lexseg::classifier::FixtureBackend;
use lexseg::dataset::{synth_shapes_corpus, synthetic_partitions, SynthConfig};
use lexseg::eval::{evaluate_partition, train_variant, TrainPlan, VariantTag};
use lexseg::label_semantics::{Mapper, MapperResources};
use lexseg::pipeline::Pipeline;
use lexseg::segnet::{ModelConfig, OptimizerConfig, TrainHyper};

fn main() -> lexseg::Result<()> {
    env_logger::init();
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let steps = args.first().copied().unwrap_or(300) as usize;
    let images = args.get(1).copied().unwrap_or(200) as usize;
    let seed = args.get(2).copied().unwrap_or(0);

    let fixture = FixtureBackend::new();
    let ontology = fixture.ontology();
    let resources = MapperResources {
        ontology: Some(&ontology),
        embeddings: None,
    };
    let mut pipeline = Pipeline::new(&fixture, Mapper::WordNet, resources);
    pipeline.seed = seed;
    let store = synth_shapes_corpus(images, seed, &SynthConfig::default())?;
    let partition = &synthetic_partitions()[0];
    println!("partition {}: test colours {:?}", partition.index, partition.test_labels);

    for variant in [VariantTag::Sem0CNone, VariantTag::Sem2CNeg, VariantTag::Oracle] {
        let plan = TrainPlan {
            model: ModelConfig::tiny(variant.input_channels(), seed),
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
                seed,
            },
            memoize: true,
            checkpoint_dir: None,
        };
        let t = Instant::now();
        let (model, state) = train_variant(&pipeline, &store, partition, variant, &plan)?;
        let trained = t.elapsed();
        let (metrics, _) = evaluate_partition(&pipeline, &model, &store, partition, variant)?;
        println!(
            "{variant:<14} loss {:.4} -> {:.4}  mIOU {:.3}  per class {:?}  train {:.1?} total {:.1?}",
            state.loss_history.first().copied().unwrap_or(f64::NAN),
            state.loss_history.last().copied().unwrap_or(f64::NAN),
            metrics.miou,
            metrics.class_iou,
            trained,
            t.elapsed()
        );
    }
    Ok(())
}
