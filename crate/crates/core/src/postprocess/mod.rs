//! From a foreground likelihood to a binary mask: threshold-coded seeds plus GrabCut.

mod annotation;
mod gmm;
mod grabcut;
pub mod maxflow;

pub use annotation::{
    annotate_from_likelihood, promote_fallback_seeds, threshold_baseline, AnnotationCode,
    AnnotationImage, GrabCutParams,
};
pub use gmm::Gmm;
pub use grabcut::{grabcut_refine, GrabCutOutput};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::raster::{Mask, Plane, RgbImage};

/// Share of probable-foreground pixels promoted to sure foreground when none clears `t_fg`.
pub const FALLBACK_SEED_FRACTION: f64 = 0.01;

/// Flags recorded while refining one likelihood image.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineFlags {
    pub degenerate_likelihood: bool,
    pub fallback_seeds: bool,
    pub empty_foreground: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Refined {
    pub mask: Mask,
    pub annotation: AnnotationImage,
    pub flags: RefineFlags,
}

/// Annotation coding, SF-empty fallback seeding, then GrabCut.
pub fn refine(image: &RgbImage, likelihood: &Plane, params: &GrabCutParams) -> Result<Refined> {
    let mut annotation = annotate_from_likelihood(likelihood, params);
    let fallback = promote_fallback_seeds(&mut annotation, likelihood, FALLBACK_SEED_FRACTION);
    if fallback {
        log::warn!("no pixel cleared t_fg; promoted the top probable-foreground pixels");
    }
    let out = grabcut_refine(image, &annotation, params)?;
    Ok(Refined {
        mask: out.mask,
        flags: RefineFlags {
            degenerate_likelihood: annotation.degenerate,
            fallback_seeds: fallback,
            empty_foreground: out.empty_foreground,
        },
        annotation,
    })
}
