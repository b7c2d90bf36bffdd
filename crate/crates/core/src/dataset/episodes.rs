use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::partition::{PartitionSpec, Split};
use super::store::SampleStore;
use crate::error::{Error, Result};
use crate::eval::VariantTag;
use crate::raster::Mask;

/// One (image, target label) unit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Episode {
    pub sample: usize,
    pub image_id: String,
    pub target_label: String,
    pub split: Split,
    pub variant: VariantTag,
}

impl Episode {
    /// Ground-truth binary mask of the target label.
    pub fn mask(&self, store: &SampleStore) -> Result<Mask> {
        store.get(self.sample).mask(&self.target_label)
    }
}

/// Builds a single episode, refusing any label outside the split's label set.
pub fn episode_for(
    store: &SampleStore,
    partition: &PartitionSpec,
    split: Split,
    sample: usize,
    label: &str,
    variant: VariantTag,
) -> Result<Episode> {
    if !partition.labels(split).iter().any(|l| l == label) {
        return Err(Error::DataLeak {
            label: label.into(),
        });
    }
    let s = store.samples().get(sample).ok_or(Error::Index {
        index: sample,
        size: store.len(),
    })?;
    if !s.has_label(label) {
        return Err(Error::InvalidLabel(format!(
            "{label} is not present in image {}",
            s.image_id
        )));
    }
    Ok(Episode {
        sample,
        image_id: s.image_id.clone(),
        target_label: label.into(),
        split,
        variant,
    })
}

/// Endless seeded stream: an image drawn uniformly among those of the split holding at
/// least one of the split's labels, then one of its split labels drawn uniformly.
pub struct EpisodeStream<'a> {
    store: &'a SampleStore,
    split: Split,
    variant: VariantTag,
    eligible: Vec<(usize, Vec<String>)>,
    rng: ChaCha8Rng,
}

pub fn sample_episodes<'a>(
    store: &'a SampleStore,
    partition: &PartitionSpec,
    split: Split,
    variant: VariantTag,
    seed: u64,
) -> Result<EpisodeStream<'a>> {
    partition.validate()?;
    let allowed = partition.labels(split);
    let eligible: Vec<(usize, Vec<String>)> = store
        .split_indices(split)
        .into_iter()
        .filter_map(|i| {
            let labels: Vec<String> = store
                .get(i)
                .labels
                .iter()
                .filter(|l| allowed.contains(l))
                .cloned()
                .collect();
            (!labels.is_empty()).then_some((i, labels))
        })
        .collect();
    if eligible.is_empty() {
        return Err(Error::Config(format!(
            "no {split:?} image carries a label of partition {}",
            partition.index
        )));
    }
    Ok(EpisodeStream {
        store,
        split,
        variant,
        eligible,
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}

impl Iterator for EpisodeStream<'_> {
    type Item = Episode;

    fn next(&mut self) -> Option<Episode> {
        let (sample, labels) = &self.eligible[self.rng.random_range(0..self.eligible.len())];
        let label = &labels[self.rng.random_range(0..labels.len())];
        Some(Episode {
            sample: *sample,
            image_id: self.store.get(*sample).image_id.clone(),
            target_label: label.clone(),
            split: self.split,
            variant: self.variant,
        })
    }
}

/// Every (test image, present test label) pair, in store order.
pub fn test_episodes(store: &SampleStore, partition: &PartitionSpec, variant: VariantTag) -> Vec<Episode> {
    let mut out = Vec::new();
    for i in store.split_indices(Split::Test) {
        let s = store.get(i);
        for l in &partition.test_labels {
            if s.has_label(l) {
                out.push(Episode {
                    sample: i,
                    image_id: s.image_id.clone(),
                    target_label: l.clone(),
                    split: Split::Test,
                    variant,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::store::{Sample, SampleSource};
    use crate::dataset::{load_partitions, VOC_CLASSES};
    use crate::raster::RgbImage;
    use std::collections::BTreeMap;

    fn store() -> SampleStore {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples = (0..200)
            .map(|i| {
                let n = rng.random_range(1..4);
                let labels = (0..n)
                    .map(|_| VOC_CLASSES[rng.random_range(0..20)].to_string())
                    .collect();
                Sample {
                    image_id: format!("{i:04}"),
                    labels,
                    split: if i % 4 == 0 { Split::Test } else { Split::Train },
                    source: SampleSource::Memory {
                        image: RgbImage::filled(1, 1, [0.0; 3]),
                        masks: BTreeMap::new(),
                    },
                }
            })
            .collect();
        SampleStore::new(samples)
    }

    #[test]
    fn streams_respect_split_and_seed() {
        let store = store();
        let p = &load_partitions()[1];
        let a: Vec<Episode> = sample_episodes(&store, p, Split::Train, VariantTag::Sem2CNeg, 5)
            .unwrap()
            .take(500)
            .collect();
        let b: Vec<Episode> = sample_episodes(&store, p, Split::Train, VariantTag::Sem2CNeg, 5)
            .unwrap()
            .take(500)
            .collect();
        assert_eq!(a, b);
        assert!(a.iter().all(|e| p.is_train_label(&e.target_label)));
        assert!(a.iter().all(|e| store.get(e.sample).split == Split::Train));
        let t: Vec<Episode> = sample_episodes(&store, p, Split::Test, VariantTag::Sem2CNeg, 5)
            .unwrap()
            .take(500)
            .collect();
        assert!(t.iter().all(|e| p.is_test_label(&e.target_label)));
    }

    #[test]
    fn explicit_leak_is_refused() {
        let store = store();
        let p = &load_partitions()[1];
        let i = store.samples().iter().position(|s| s.has_label("bus")).unwrap();
        assert!(matches!(
            episode_for(&store, p, Split::Train, i, "bus", VariantTag::Sem0CNone),
            Err(Error::DataLeak { .. })
        ));
    }

    #[test]
    fn test_episodes_enumerate_pairs() {
        let store = store();
        let p = &load_partitions()[0];
        let eps = test_episodes(&store, p, VariantTag::Oracle);
        let expected: usize = store
            .samples()
            .iter()
            .filter(|s| s.split == Split::Test)
            .map(|s| p.test_labels.iter().filter(|l| s.has_label(l)).count())
            .sum();
        assert_eq!(eps.len(), expected);
    }
}
