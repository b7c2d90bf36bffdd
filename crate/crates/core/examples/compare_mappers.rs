//! Side-by-side WordNet and embedding proxies for a handful of targets over the ImageNet
//! vocabulary. The embedding column needs a GloVe text file in LEXSEG_GLOVE.
//!
//! cargo run --release --example compare_mappers -- [target ...]

use lexseg::eval::compare_mappers;
use lexseg::label_semantics::{ClassifierVocabulary, EmbeddingTable, OntologyIndex};

fn main() -> lexseg::Result<()> {
    let mut targets: Vec<String> = std::env::args().skip(1).collect();
    if targets.is_empty() {
        targets = ["bottle", "dog", "train", "tv monitor"].map(String::from).to_vec();
    }
    let vocab = ClassifierVocabulary::imagenet1k();
    let ontology = OntologyIndex::wordnet30();
    let embeddings = match std::env::var_os("LEXSEG_GLOVE") {
        Some(p) => Some(EmbeddingTable::load(std::path::Path::new(&p), 300, None)?),
        None => {
            eprintln!("LEXSEG_GLOVE not set; embedding column skipped");
            None
        }
    };
    let refs: Vec<&str> = targets.iter().map(String::as_str).collect();
    let cmp = compare_mappers(&refs, &vocab, Some(&ontology), embeddings.as_ref(), 5)?;
    print!("{}", cmp.to_text());
    Ok(())
}
