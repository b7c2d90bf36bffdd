//! Converts a WordNet 3.0 `dict/` directory into the noun-ontology TSV the mappers load.
//!
//! cargo run --release --example build_ontology -- /path/to/dict data/wordnet30_nouns.tsv

use std::path::PathBuf;

use lexseg::label_semantics::OntologyIndex;

fn main() -> lexseg::Result<()> {
    let mut args = std::env::args().skip(1).map(PathBuf::from);
    let (Some(dict), Some(out)) = (args.next(), args.next()) else {
        eprintln!("usage: build_ontology <wordnet dict dir> <output tsv>");
        std::process::exit(2);
    };
    let ontology = OntologyIndex::from_wordnet_dir(&dict)?;
    std::fs::write(&out, ontology.to_tsv())?;
    println!("{} noun synsets written to {}", ontology.len(), out.display());
    Ok(())
}
