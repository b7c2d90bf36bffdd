//! Coloured-shape images on textured grey backgrounds, labelled by shape colour.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::partition::Split;
use super::store::{Sample, SampleSource, SampleStore};
use crate::error::{Error, Result};
use crate::raster::{Mask, RgbImage};

/// Shape colours; the names double as the fixture classifier's vocabulary.
pub const PALETTE: [(&str, [f32; 3]); 6] = [
    ("red", [1.0, 0.0, 0.0]),
    ("green", [0.0, 1.0, 0.0]),
    ("blue", [0.0, 0.0, 1.0]),
    ("yellow", [1.0, 1.0, 0.0]),
    ("cyan", [0.0, 1.0, 1.0]),
    ("magenta", [1.0, 0.0, 1.0]),
];

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub size: usize,
    pub max_shapes: usize,
    /// A shape whose visible area falls below this is redrawn.
    pub min_visible: usize,
    /// Every `test_every`-th image goes to the test split.
    pub test_every: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            size: 32,
            max_shapes: 3,
            min_visible: 12,
            test_every: 5,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Kind {
    Rect,
    Ellipse,
    Triangle,
}

struct Shape {
    kind: Kind,
    cx: f32,
    cy: f32,
    rx: f32,
    ry: f32,
}

impl Shape {
    fn random(rng: &mut ChaCha8Rng, size: usize) -> Shape {
        let s = size as f32;
        let kind = [Kind::Rect, Kind::Ellipse, Kind::Triangle][rng.random_range(0..3)];
        let rx = rng.random_range(s / 8.0..s / 4.0);
        let ry = rng.random_range(s / 8.0..s / 4.0);
        Shape {
            kind,
            cx: rng.random_range(rx..s - rx),
            cy: rng.random_range(ry..s - ry),
            rx,
            ry,
        }
    }

    fn contains(&self, x: usize, y: usize) -> bool {
        let dx = (x as f32 + 0.5 - self.cx) / self.rx;
        let dy = (y as f32 + 0.5 - self.cy) / self.ry;
        match self.kind {
            Kind::Rect => dx.abs() <= 1.0 && dy.abs() <= 1.0,
            Kind::Ellipse => dx * dx + dy * dy <= 1.0,
            // apex up, base along dy = 1
            Kind::Triangle => (-1.0..=1.0).contains(&dy) && dx.abs() <= (dy + 1.0) / 2.0,
        }
    }
}

fn background(rng: &mut ChaCha8Rng, size: usize) -> Vec<f32> {
    let base = rng.random_range(0.45..0.55f32);
    let (fx, fy) = (rng.random_range(0.2..0.8f32), rng.random_range(0.2..0.8f32));
    let (px, py) = (rng.random_range(0.0..6.3f32), rng.random_range(0.0..6.3f32));
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let wave = 0.04 * (fx * x as f32 + px).sin() * (fy * y as f32 + py).sin();
            let v = base + wave + rng.random_range(-0.02..0.02f32);
            out.push(v.clamp(0.4, 0.6));
        }
    }
    out
}

/// One image with its per-colour masks.
fn generate_one(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> (RgbImage, BTreeMap<String, Mask>) {
    let n = cfg.size;
    loop {
        let count = rng.random_range(1..=cfg.max_shapes.clamp(1, PALETTE.len()));
        let mut colours: Vec<usize> = (0..PALETTE.len()).collect();
        colours.shuffle(rng);
        colours.truncate(count);
        let bg = background(rng, n);
        let mut owner: Vec<Option<usize>> = vec![None; n * n];
        let mut tint = Vec::new();
        for (k, _) in colours.iter().enumerate() {
            let shape = Shape::random(rng, n);
            tint.push(rng.random_range(0.75..1.0f32));
            for y in 0..n {
                for x in 0..n {
                    if shape.contains(x, y) {
                        owner[y * n + x] = Some(k);
                    }
                }
            }
        }
        let visible: Vec<usize> = (0..count)
            .map(|k| owner.iter().filter(|&&o| o == Some(k)).count())
            .collect();
        if visible.iter().any(|&v| v < cfg.min_visible) {
            continue;
        }
        let mut rgb8 = image::RgbImage::new(n as u32, n as u32);
        for (i, px) in rgb8.pixels_mut().enumerate() {
            let v = match owner[i] {
                None => [bg[i]; 3],
                Some(k) => {
                    let c = PALETTE[colours[k]].1;
                    let mut out = [0.0f32; 3];
                    for (o, ch) in out.iter_mut().zip(c) {
                        *o = (ch * tint[k] + rng.random_range(-0.03..0.03f32)).clamp(0.0, 1.0);
                    }
                    out
                }
            };
            for c in 0..3 {
                px[c] = (v[c] * 255.0).round() as u8;
            }
        }
        let masks = colours
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let m = Mask::from_vec(n, n, owner.iter().map(|&o| u8::from(o == Some(k))).collect())
                    .expect("mask sized to image");
                (PALETTE[c].0.to_string(), m)
            })
            .collect();
        return (RgbImage::from_rgb8(&rgb8), masks);
    }
}

/// `n` deterministic images; pixels are 8-bit quantized so a save/load round trip is exact.
pub fn synth_shapes_corpus(n: usize, seed: u64, cfg: &SynthConfig) -> Result<SampleStore> {
    if n == 0 {
        return Err(Error::Config("synthetic corpus needs at least one image".into()));
    }
    if cfg.size < 8 {
        return Err(Error::Config("synthetic images must be at least 8x8".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|i| {
            let (image, masks) = generate_one(&mut rng, cfg);
            let split = if cfg.test_every > 0 && i % cfg.test_every == cfg.test_every - 1 {
                Split::Test
            } else {
                Split::Train
            };
            Sample {
                image_id: format!("shapes_{i:05}"),
                labels: masks.keys().cloned().collect(),
                split,
                source: SampleSource::Memory { image, masks },
            }
        })
        .collect();
    Ok(SampleStore::new(samples))
}

const MANIFEST_HEADER: &str = "image_id\tsplit\tlabels";

/// Writes `images/<id>.png`, `masks/<id>_<label>.png` and `manifest.tsv`.
pub fn save_corpus(store: &SampleStore, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir.join("images"))?;
    std::fs::create_dir_all(dir.join("masks"))?;
    let mut manifest = format!("{MANIFEST_HEADER}\n");
    for s in store.samples() {
        s.image()?
            .save_png(&dir.join("images").join(format!("{}.png", s.image_id)))?;
        for l in &s.labels {
            s.mask(l)?
                .save_png(&dir.join("masks").join(format!("{}_{l}.png", s.image_id)))?;
        }
        let split = match s.split {
            Split::Train => "train",
            Split::Test => "test",
        };
        let labels: Vec<&str> = s.labels.iter().map(String::as_str).collect();
        manifest.push_str(&format!("{}\t{split}\t{}\n", s.image_id, labels.join(",")));
    }
    crate::fsutil::write_atomic(&dir.join("manifest.tsv"), manifest.as_bytes())
}

/// Loads a directory written by [`save_corpus`] fully into memory.
pub fn load_corpus(dir: &Path) -> Result<SampleStore> {
    let path = dir.join("manifest.tsv");
    let text = std::fs::read_to_string(&path)
        .map_err(|_| Error::resource(&path, "expected images/, masks/ and manifest.tsv"))?;
    let mut lines = text.lines();
    if lines.next() != Some(MANIFEST_HEADER) {
        return Err(Error::parse(path.display().to_string(), "bad manifest header"));
    }
    let mut samples = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let ctx = || format!("{}:{}", path.display(), n + 2);
        let cols: Vec<&str> = line.split('\t').collect();
        let [id, split, labels] = cols[..] else {
            return Err(Error::parse(ctx(), "expected 3 columns"));
        };
        let split = match split {
            "train" => Split::Train,
            "test" => Split::Test,
            other => return Err(Error::parse(ctx(), format!("unknown split {other:?}"))),
        };
        let image = RgbImage::load(&dir.join("images").join(format!("{id}.png")))?;
        let mut masks = BTreeMap::new();
        for l in labels.split(',').filter(|l| !l.is_empty()) {
            let m = Mask::load_png(&dir.join("masks").join(format!("{id}_{l}.png")))?;
            if m.dims() != image.dims() {
                return Err(Error::Shape(format!("mask {id}_{l} does not match its image")));
            }
            masks.insert(l.to_string(), m);
        }
        samples.push(Sample {
            image_id: id.to_string(),
            labels: masks.keys().cloned().collect(),
            split,
            source: SampleSource::Memory { image, masks },
        });
    }
    Ok(SampleStore::new(samples))
}
