//! Maps free-text labels onto the classifier vocabulary, before and after pruning by the
//! classifier's scores on an image.
//!
//! cargo run --example map_labels -- [label ...]

use lexseg::classifier::{ClassifierBackend, FixtureBackend};
use lexseg::label_semantics::{build_proxy_set, tokenize_label, wordnet_candidates, Mapper, MapperResources};
use lexseg::raster::RgbImage;

fn main() -> lexseg::Result<()> {
    let mut labels: Vec<String> = std::env::args().skip(1).collect();
    if labels.is_empty() {
        labels = vec!["red".into(), "dark green".into(), "purple".into()];
    }
    let fixture = FixtureBackend::new();
    let ontology = fixture.ontology();
    let vocab = fixture.vocabulary();
    let resources = MapperResources {
        ontology: Some(&ontology),
        embeddings: None,
    };
    let image = RgbImage::filled(16, 16, [0.9, 0.1, 0.1]);
    let tensor = fixture.preprocessing().prepare(&image);

    for text in &labels {
        let label = tokenize_label(text)?;
        let candidates = wordnet_candidates(&label, vocab, &ontology)?;
        let names: Vec<&str> = candidates.iter().map(|&i| vocab.entries()[i].label.text()).collect();
        println!("{text}: {} candidates {names:?}", candidates.len());
        let set = build_proxy_set(text, &tensor, Mapper::WordNet, resources, &fixture, 3)?;
        for (kind, list) in [("positive", &set.positives), ("negative", &set.negatives)] {
            for s in list {
                println!("  {kind:<8} {:<12} p={:.3}", vocab.entries()[s.class_index].label.text(), s.score);
            }
        }
        for w in &set.warnings {
            println!("  warning: {w}");
        }
    }
    Ok(())
}
