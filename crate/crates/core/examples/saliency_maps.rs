//! Guided-backprop saliency of a single class and of a composed proxy set, written as
//! SALMAP files and grayscale PNGs.
//!
//! cargo run --example saliency_maps -- [out_dir]

use std::path::PathBuf;

use lexseg::classifier::{ClassifierBackend, FixtureBackend};
use lexseg::raster::{save_gray_png, RgbImage};
use lexseg::saliency::{class_saliency_map, load_salmap, save_salmap, single_label_saliency, Polarity};

fn main() -> lexseg::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("lexseg-saliency"));
    std::fs::create_dir_all(&out)?;
    let fixture = FixtureBackend::new();

    let mut image = RgbImage::filled(32, 32, [0.5, 0.5, 0.5]);
    for y in 8..20 {
        for x in 6..18 {
            image.set(x, y, [0.9, 0.1, 0.1]);
        }
    }
    for y in 18..28 {
        for x in 20..30 {
            image.set(x, y, [0.1, 0.1, 0.9]);
        }
    }

    let tensor = fixture.preprocessing().prepare(&image);
    let scores = fixture.predict_scores(&tensor)?;
    let top = scores.top_k(3);
    for &(c, p) in &top {
        println!("{:<10} p={p:.3}", fixture.vocabulary().entries()[c].label.text());
    }

    let grad = fixture.guided_backprop_gradient(&tensor, top[0].0)?;
    let single = single_label_saliency(&grad);
    println!("single-class map: degenerate={} mean={:.3}", single.degenerate, single.plane.mean());

    let classes: Vec<usize> = top.iter().map(|&(c, _)| c).collect();
    let composed = class_saliency_map(&image, &classes, Polarity::Positive, &fixture, None)?;
    let path = out.join("composed.salmap");
    save_salmap(&composed.plane, &path)?;
    assert_eq!(load_salmap(&path)?, composed.plane);
    let (w, h) = composed.dims();
    save_gray_png(&out.join("composed.png"), w, h, composed.plane.to_gray8())?;
    image.save_png(&out.join("image.png"))?;
    println!("wrote {}", out.display());
    Ok(())
}
