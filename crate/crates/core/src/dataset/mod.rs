//! Annotated image stores, PASCAL-5i partitions, episode sampling and the synthetic
//! shapes corpus.

mod episodes;
mod partition;
mod store;
pub mod synth;
pub mod voc;

pub use episodes::{episode_for, sample_episodes, test_episodes, Episode, EpisodeStream};
pub use partition::{load_partitions, synthetic_partitions, voc_label_text, PartitionSpec, Split, VOC_CLASSES};
pub use store::{Sample, SampleSource, SampleStore};
pub use synth::{load_corpus, save_corpus, synth_shapes_corpus, SynthConfig, PALETTE};
pub use voc::ingest_voc_sbd;
