//! Turns a noisy likelihood into seeds and refines it with GrabCut, compared with a
//! plain 0.5 threshold.
//!
//! cargo run --release --example grabcut_refine

use lexseg::eval::binary_iou;
use lexseg::postprocess::{refine, threshold_baseline, AnnotationCode, GrabCutParams};
use lexseg::raster::{Mask, Plane, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> lexseg::Result<()> {
    let (w, h) = (48, 40);
    let gt = Mask::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 - 22.0, y as f64 - 19.0);
        dx * dx / 196.0 + dy * dy / 100.0 <= 1.0
    });
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut image = RgbImage::filled(w, h, [0.2, 0.55, 0.3]);
    let mut likelihood = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let n: f32 = rng.random_range(-0.05..0.05);
            if gt.get(x, y) {
                image.set(x, y, [0.85 + n, 0.75 + n, 0.2 + n]);
            } else {
                image.set(x, y, [0.2 + n, 0.55 + n, 0.3 + n]);
            }
            // a blurry, offset guess of the object
            let (dx, dy) = (x as f32 - 25.0, y as f32 - 21.0);
            let base = (-(dx * dx / 260.0 + dy * dy / 150.0)).exp();
            likelihood.set(x, y, (base + rng.random_range(-0.2..0.2)).clamp(0.0, 1.0));
        }
    }

    let params = GrabCutParams::default();
    let r = refine(&image, &likelihood, &params)?;
    for code in [AnnotationCode::SureForeground, AnnotationCode::ProbableForeground, AnnotationCode::ProbableBackground, AnnotationCode::SureBackground] {
        println!("{code:?}: {}", r.annotation.count(code));
    }
    let plain = threshold_baseline(&likelihood, 0.5);
    println!("threshold IoU {:.3}", binary_iou(&plain, &gt)?);
    println!("grabcut   IoU {:.3}  flags {:?}", binary_iou(&r.mask, &gt)?, r.flags);
    Ok(())
}
