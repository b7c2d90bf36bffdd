//! Pascal VOC and converted-SBD ingestion.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::partition::{Split, VOC_CLASSES};
use super::store::{Sample, SampleSource, SampleStore};
use crate::error::{Error, Result};

const VOC_LAYOUT: &str = "expected a VOC root with JPEGImages/, SegmentationClass/ and \
                          ImageSets/Segmentation/{train,val}.txt";
const SBD_LAYOUT: &str = "expected a converted SBD root with index.txt and masks/<class>/<image_id>.png";

/// Annotation value of `label` in `SegmentationClass` PNGs (0 is background, 255 void).
pub fn class_index(label: &str) -> Option<u8> {
    VOC_CLASSES
        .iter()
        .position(|&c| c == label)
        .map(|i| i as u8 + 1)
}

/// Raw palette indices of an 8-bit indexed (or grayscale) PNG.
pub fn read_index_png(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let file = File::open(path).map_err(|_| Error::resource(path, "annotation PNG not found"))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let bad = |m: String| Error::parse(path.display().to_string(), m);
    let mut reader = decoder.read_info().map_err(|e| bad(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| bad("image too large".into()))?];
    let info = reader.next_frame(&mut buf).map_err(|e| bad(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight
        || !matches!(info.color_type, png::ColorType::Indexed | png::ColorType::Grayscale)
    {
        return Err(bad(format!(
            "expected 8-bit indexed annotation, got {:?} {:?}",
            info.color_type, info.bit_depth
        )));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, buf))
}

/// Writes class indices as an 8-bit indexed PNG with the VOC colour map.
pub fn write_index_png(path: &Path, width: usize, height: usize, indices: &[u8]) -> Result<()> {
    let file = File::create(path)?;
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), width as u32, height as u32);
    enc.set_color(png::ColorType::Indexed);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_palette(voc_colormap());
    let err = |e: png::EncodingError| Error::parse(path.display().to_string(), e.to_string());
    let mut w = enc.write_header().map_err(err)?;
    w.write_image_data(indices).map_err(err)?;
    Ok(())
}

/// The standard bit-interleaved VOC palette.
fn voc_colormap() -> Vec<u8> {
    let mut out = Vec::with_capacity(768);
    for i in 0..256u32 {
        let (mut r, mut g, mut b) = (0u8, 0u8, 0u8);
        let mut c = i;
        for j in 0..8 {
            r |= ((c & 1) as u8) << (7 - j);
            g |= (((c >> 1) & 1) as u8) << (7 - j);
            b |= (((c >> 2) & 1) as u8) << (7 - j);
            c >>= 3;
        }
        out.extend([r, g, b]);
    }
    out
}

fn read_ids(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|_| Error::resource(path, VOC_LAYOUT))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn require_dir(path: &Path, layout: &str) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::resource(path, layout))
    }
}

fn voc_sample(root: &Path, id: &str, split: Split) -> Result<Sample> {
    let annotation = root.join("SegmentationClass").join(format!("{id}.png"));
    let (_, _, idx) = read_index_png(&annotation)?;
    let mut present = [false; 256];
    for &v in &idx {
        present[v as usize] = true;
    }
    let labels = VOC_CLASSES
        .iter()
        .enumerate()
        .filter(|(i, _)| present[i + 1])
        .map(|(_, c)| c.to_string())
        .collect();
    Ok(Sample {
        image_id: id.into(),
        labels,
        split,
        source: SampleSource::VocIndexed {
            image: root.join("JPEGImages").join(format!("{id}.jpg")),
            annotation,
        },
    })
}

/// One `index.txt` line: `image_id<TAB>class,class,...`.
fn parse_sbd_index(path: &Path) -> Result<Vec<(String, Vec<String>)>> {
    let text = std::fs::read_to_string(path).map_err(|_| Error::resource(path, SBD_LAYOUT))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, classes) = line.split_once('\t').ok_or_else(|| {
            Error::parse(format!("{}:{}", path.display(), n + 1), "expected id<TAB>classes")
        })?;
        let classes: Vec<String> = classes
            .split(',')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(String::from)
            .collect();
        for c in &classes {
            if class_index(c).is_none() {
                return Err(Error::InvalidLabel(c.clone()));
            }
        }
        out.push((id.to_string(), classes));
    }
    Ok(out)
}

/// Training samples come from SBD and VOC train (VOC annotation wins on duplicates),
/// with every VOC val id removed; VOC val is the test split.
pub fn ingest_voc_sbd(voc_root: &Path, sbd_root: Option<&Path>) -> Result<SampleStore> {
    for sub in ["JPEGImages", "SegmentationClass", "ImageSets/Segmentation"] {
        require_dir(&voc_root.join(sub), VOC_LAYOUT)?;
    }
    let sets = voc_root.join("ImageSets/Segmentation");
    let val = read_ids(&sets.join("val.txt"))?;
    let train = read_ids(&sets.join("train.txt"))?;
    let val_set: HashSet<&str> = val.iter().map(String::as_str).collect();

    let mut jobs: Vec<(&str, Split)> = val.iter().map(|id| (id.as_str(), Split::Test)).collect();
    let mut seen: HashSet<&str> = val_set.clone();
    for id in &train {
        if seen.insert(id.as_str()) {
            jobs.push((id.as_str(), Split::Train));
        }
    }
    let mut samples: Vec<Sample> = jobs
        .par_iter()
        .map(|&(id, split)| voc_sample(voc_root, id, split))
        .collect::<Result<_>>()?;

    if let Some(sbd) = sbd_root {
        require_dir(&sbd.join("masks"), SBD_LAYOUT)?;
        for (id, classes) in parse_sbd_index(&sbd.join("index.txt"))? {
            if seen.contains(id.as_str()) {
                continue;
            }
            let img = sbd.join("img").join(format!("{id}.jpg"));
            let image = if img.exists() {
                img
            } else {
                voc_root.join("JPEGImages").join(format!("{id}.jpg"))
            };
            let masks: BTreeMap<String, PathBuf> = classes
                .iter()
                .map(|c| (c.clone(), sbd.join("masks").join(c).join(format!("{id}.png"))))
                .collect();
            samples.push(Sample {
                image_id: id.clone(),
                labels: classes.into_iter().collect::<BTreeSet<_>>(),
                split: Split::Train,
                source: SampleSource::PerClass { image, masks },
            });
        }
    }
    log::info!(
        "ingested {} samples ({} test)",
        samples.len(),
        samples.iter().filter(|s| s.split == Split::Test).count()
    );
    Ok(SampleStore::new(samples))
}
