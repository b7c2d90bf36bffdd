use super::annotation::{AnnotationCode, AnnotationImage, GrabCutParams};
use super::gmm::Gmm;
use super::maxflow::FlowGraph;
use crate::error::{Error, Result};
use crate::raster::{Mask, RgbImage};

/// Result of [`grabcut_refine`].
#[derive(Clone, Debug, PartialEq)]
pub struct GrabCutOutput {
    pub mask: Mask,
    pub iterations_run: usize,
    /// Set when the annotation had no foreground pixel at all.
    pub empty_foreground: bool,
}

const NEIGHBOURS: [(isize, isize); 4] = [(1, 0), (0, 1), (1, 1), (-1, 1)];

struct Pairwise {
    /// For each pixel, weights to the right, down, down-right and down-left neighbours.
    w: Vec<[f64; 4]>,
}

fn colour(img: &RgbImage, i: usize) -> [f64; 3] {
    img.pixels()[i].map(|v| v as f64 * 255.0)
}

fn neighbour(x: usize, y: usize, d: (isize, isize), w: usize, h: usize) -> Option<usize> {
    let nx = x as isize + d.0;
    let ny = y as isize + d.1;
    (nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h).then(|| ny as usize * w + nx as usize)
}

/// Contrast-sensitive smoothness weights `gamma / dist * exp(-beta |dz|^2)` with
/// `beta = 1 / (2 <|dz|^2>)` over all 8-connected pairs.
fn pairwise_weights(img: &RgbImage, gamma: f64) -> Pairwise {
    let (w, h) = img.dims();
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut diffs = vec![[f64::NAN; 4]; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let zi = colour(img, i);
            for (k, &d) in NEIGHBOURS.iter().enumerate() {
                if let Some(j) = neighbour(x, y, d, w, h) {
                    let zj = colour(img, j);
                    let dd: f64 = (0..3).map(|c| (zi[c] - zj[c]).powi(2)).sum();
                    diffs[i][k] = dd;
                    sum += dd;
                    count += 1;
                }
            }
        }
    }
    let beta = if count == 0 || sum <= f64::EPSILON {
        0.0
    } else {
        1.0 / (2.0 * sum / count as f64)
    };
    let wts = diffs
        .iter()
        .map(|row| {
            let mut out = [0.0; 4];
            for k in 0..4 {
                if !row[k].is_nan() {
                    let dist = if k < 2 { 1.0 } else { std::f64::consts::SQRT_2 };
                    out[k] = gamma / dist * (-beta * row[k]).exp();
                }
            }
            out
        })
        .collect();
    Pairwise { w: wts }
}

/// Iterative GMM colour modelling and graph-cut segmentation seeded by `annotation`.
///
/// SB pixels are fixed to background and SF pixels to foreground; PB/PF pixels start
/// from their annotated side and are relabelled by each of `params.iterations` rounds.
pub fn grabcut_refine(
    image: &RgbImage,
    annotation: &AnnotationImage,
    params: &GrabCutParams,
) -> Result<GrabCutOutput> {
    params.validate()?;
    let (w, h) = image.dims();
    if annotation.dims() != (w, h) {
        return Err(Error::Shape(format!(
            "annotation {:?} does not match image {:?}",
            annotation.dims(),
            (w, h)
        )));
    }
    let codes = annotation.codes();
    let n = w * h;
    let mut fg: Vec<bool> = codes.iter().map(|c| c.is_foreground()).collect();
    if !fg.iter().any(|&f| f) {
        log::warn!("annotation has no foreground seed; returning an empty mask");
        return Ok(GrabCutOutput {
            mask: Mask::zeros(w, h),
            iterations_run: 0,
            empty_foreground: true,
        });
    }
    let pixels: Vec<[f64; 3]> = (0..n).map(|i| colour(image, i)).collect();
    let pair = pairwise_weights(image, params.gamma);
    let mut max_degree = 0.0f64;
    for row in &pair.w {
        max_degree = max_degree.max(row.iter().sum::<f64>());
    }
    let hard = 2.0 * max_degree * 4.0 + 1.0;

    let collect = |fg: &[bool], want: bool| -> Vec<[f64; 3]> {
        (0..n).filter(|&i| fg[i] == want).map(|i| pixels[i]).collect()
    };
    let k = params.gmm_components;
    let mut fg_samples = collect(&fg, true);
    let mut bg_samples = collect(&fg, false);
    let mut iterations_run = 0;
    for _ in 0..params.iterations {
        if bg_samples.is_empty() || fg_samples.is_empty() {
            // one side is empty: no colour model to compete with, labels stay as seeded
            iterations_run += 1;
            continue;
        }
        let fg_gmm = refit(&fg_samples, k);
        let bg_gmm = refit(&bg_samples, k);
        let mut g = FlowGraph::new(n);
        for i in 0..n {
            let (to_source, to_sink) = match codes[i] {
                AnnotationCode::SureBackground => (0.0, hard),
                AnnotationCode::SureForeground => (hard, 0.0),
                _ => {
                    // cutting source->i makes i background and costs -ln p_bg
                    let lb = -bg_gmm.log_likelihood(&pixels[i]);
                    let lf = -fg_gmm.log_likelihood(&pixels[i]);
                    let m = lb.min(lf);
                    (lb - m, lf - m)
                }
            };
            g.add_terminal(i, to_source, to_sink);
        }
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                for (kk, &d) in NEIGHBOURS.iter().enumerate() {
                    if let Some(j) = neighbour(x, y, d, w, h) {
                        g.add_edge(i, j, pair.w[i][kk]);
                    }
                }
            }
        }
        g.max_flow();
        fg = g.source_side();
        iterations_run += 1;
        fg_samples = collect(&fg, true);
        bg_samples = collect(&fg, false);
    }
    for (f, c) in fg.iter_mut().zip(codes) {
        match c {
            AnnotationCode::SureBackground => *f = false,
            AnnotationCode::SureForeground => *f = true,
            _ => {}
        }
    }
    Ok(GrabCutOutput {
        mask: Mask::from_vec(w, h, fg.iter().map(|&b| b as u8).collect())?,
        iterations_run,
        empty_foreground: false,
    })
}

/// Fits a colour model the way the original algorithm re-estimates it: assign each
/// sample to its most likely component of a k-means initialised mixture, then refit.
fn refit(samples: &[[f64; 3]], k: usize) -> Gmm {
    let init = Gmm::fit(samples, k);
    let labels: Vec<usize> = samples
        .iter()
        .map(|z| init.most_likely_component(z))
        .collect();
    Gmm::from_assignment(samples, &labels, init.len())
}
