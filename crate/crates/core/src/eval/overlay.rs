use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{Mask, RgbImage};

const GAP: usize = 4;

fn tint(image: &RgbImage, mask: &Mask, colour: [f32; 3]) -> RgbImage {
    let mut out = image.clone();
    for y in 0..image.height() {
        for x in 0..image.width() {
            if mask.get(x, y) {
                let p = image.get(x, y);
                out.set(x, y, [0, 1, 2].map(|c| 0.4 * p[c] + 0.6 * colour[c]));
            }
        }
    }
    out
}

/// `image | ground truth | prediction`, masks tinted over the image, on a white strip.
pub fn render_overlay(image: &RgbImage, gt: &Mask, pred: &Mask) -> Result<RgbImage> {
    let (w, h) = image.dims();
    if gt.dims() != (w, h) || pred.dims() != (w, h) {
        return Err(Error::Shape("overlay masks must match the image".into()));
    }
    let panels = [
        image.clone(),
        tint(image, gt, [0.0, 0.9, 0.2]),
        tint(image, pred, [0.95, 0.1, 0.1]),
    ];
    let mut out = RgbImage::filled(3 * w + 2 * GAP, h, [1.0; 3]);
    for (i, p) in panels.iter().enumerate() {
        let x0 = i * (w + GAP);
        for y in 0..h {
            for x in 0..w {
                out.set(x0 + x, y, p.get(x, y));
            }
        }
    }
    Ok(out)
}

pub fn save_overlay(path: &Path, image: &RgbImage, gt: &Mask, pred: &Mask) -> Result<()> {
    render_overlay(image, gt, pred)?.save_png(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panels_are_laid_side_by_side() {
        let img = RgbImage::filled(5, 3, [0.0; 3]);
        let m = Mask::from_fn(5, 3, |x, _| x == 0);
        let o = render_overlay(&img, &m, &Mask::zeros(5, 3)).unwrap();
        assert_eq!(o.dims(), (15 + 2 * GAP, 3));
        assert_eq!(o.get(0, 0), [0.0; 3]);
        assert!(o.get(5 + GAP, 0)[1] > 0.5);
        assert_eq!(o.get(2 * (5 + GAP), 0), [0.0; 3]);
        assert_eq!(o.get(5, 0), [1.0; 3]);
    }
}
