use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{save_gray_png, Mask, Plane};

/// GrabCut seed class of a pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum AnnotationCode {
    SureBackground = 0,
    ProbableBackground = 1,
    ProbableForeground = 2,
    SureForeground = 3,
}

impl AnnotationCode {
    /// Grey level used in debug PNGs.
    pub fn gray(self) -> u8 {
        match self {
            AnnotationCode::SureBackground => 0,
            AnnotationCode::ProbableBackground => 85,
            AnnotationCode::ProbableForeground => 170,
            AnnotationCode::SureForeground => 255,
        }
    }

    pub fn from_gray(v: u8) -> Option<Self> {
        Some(match v {
            0 => AnnotationCode::SureBackground,
            85 => AnnotationCode::ProbableBackground,
            170 => AnnotationCode::ProbableForeground,
            255 => AnnotationCode::SureForeground,
            _ => return None,
        })
    }

    pub fn is_foreground(self) -> bool {
        matches!(
            self,
            AnnotationCode::ProbableForeground | AnnotationCode::SureForeground
        )
    }

    pub fn is_hard(self) -> bool {
        matches!(
            self,
            AnnotationCode::SureBackground | AnnotationCode::SureForeground
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrabCutParams {
    pub t_fg: f64,
    pub t_unk: f64,
    pub t_bg: f64,
    pub iterations: usize,
    pub gmm_components: usize,
    /// Pairwise smoothness weight.
    pub gamma: f64,
}

impl Default for GrabCutParams {
    fn default() -> Self {
        GrabCutParams {
            t_fg: 0.7,
            t_unk: 0.5,
            t_bg: 0.15,
            iterations: 5,
            gmm_components: 5,
            gamma: 50.0,
        }
    }
}

impl GrabCutParams {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 <= self.t_bg
            && self.t_bg < self.t_unk
            && self.t_unk < self.t_fg
            && self.t_fg <= 1.0;
        if !ok {
            return Err(Error::Config(format!(
                "thresholds must satisfy 0 <= t_bg < t_unk < t_fg <= 1, got {} / {} / {}",
                self.t_bg, self.t_unk, self.t_fg
            )));
        }
        if self.iterations == 0 || self.gmm_components == 0 {
            return Err(Error::Config(
                "iterations and gmm_components must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-pixel four-way seeding raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotationImage {
    width: usize,
    height: usize,
    codes: Vec<AnnotationCode>,
    /// Set when the likelihood was constant and every pixel fell to sure background.
    pub degenerate: bool,
}

impl AnnotationImage {
    pub fn new(width: usize, height: usize, codes: Vec<AnnotationCode>) -> Result<Self> {
        if codes.len() != width * height {
            return Err(Error::Shape(format!(
                "annotation {width}x{height} needs {} codes, got {}",
                width * height,
                codes.len()
            )));
        }
        Ok(AnnotationImage {
            width,
            height,
            codes,
            degenerate: false,
        })
    }

    pub fn filled(width: usize, height: usize, code: AnnotationCode) -> Self {
        AnnotationImage {
            width,
            height,
            codes: vec![code; width * height],
            degenerate: false,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn codes(&self) -> &[AnnotationCode] {
        &self.codes
    }

    pub fn codes_mut(&mut self) -> &mut [AnnotationCode] {
        &mut self.codes
    }

    pub fn get(&self, x: usize, y: usize) -> AnnotationCode {
        self.codes[y * self.width + x]
    }

    pub fn count(&self, code: AnnotationCode) -> usize {
        self.codes.iter().filter(|&&c| c == code).count()
    }

    /// The initial foreground guess: SF and PF pixels.
    pub fn foreground_mask(&self) -> Mask {
        Mask::from_vec(
            self.width,
            self.height,
            self.codes.iter().map(|c| c.is_foreground() as u8).collect(),
        )
        .expect("sizes agree")
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        save_gray_png(
            path,
            self.width,
            self.height,
            self.codes.iter().map(|c| c.gray()).collect(),
        )
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path)?.to_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let codes = img
            .pixels()
            .map(|p| {
                AnnotationCode::from_gray(p.0[0])
                    .ok_or_else(|| Error::parse(path.display().to_string(), "not an annotation code"))
            })
            .collect::<Result<Vec<_>>>()?;
        AnnotationImage::new(w, h, codes)
    }
}

/// Codes every pixel by where it falls between the image's own likelihood extrema: the
/// first matching case of `P <= lo + t_bg d` (SB), `P < lo + t_unk d` (PB),
/// `P < lo + t_fg d` (PF), otherwise SF, with `d = hi - lo`. A constant image is all SB.
pub fn annotate_from_likelihood(p: &Plane, params: &GrabCutParams) -> AnnotationImage {
    let (w, h) = p.dims();
    let (lo, hi) = p.min_max();
    let (lo, hi) = (lo as f64, hi as f64);
    let delta = hi - lo;
    if !(delta > 0.0) {
        return AnnotationImage {
            width: w,
            height: h,
            codes: vec![AnnotationCode::SureBackground; w * h],
            degenerate: true,
        };
    }
    let sb = lo + params.t_bg * delta;
    let pb = lo + params.t_unk * delta;
    let pf = lo + params.t_fg * delta;
    let codes = p
        .data()
        .iter()
        .map(|&v| {
            let v = v as f64;
            if v <= sb {
                AnnotationCode::SureBackground
            } else if v < pb {
                AnnotationCode::ProbableBackground
            } else if v < pf {
                AnnotationCode::ProbableForeground
            } else {
                AnnotationCode::SureForeground
            }
        })
        .collect();
    AnnotationImage {
        width: w,
        height: h,
        codes,
        degenerate: false,
    }
}

/// Promotes the most likely `fraction` of PF pixels (at least one) to SF when the
/// annotation has no SF pixel. Returns whether anything changed.
pub fn promote_fallback_seeds(ann: &mut AnnotationImage, p: &Plane, fraction: f64) -> bool {
    if ann.count(AnnotationCode::SureForeground) > 0 {
        return false;
    }
    let mut pf: Vec<usize> = (0..ann.codes.len())
        .filter(|&i| ann.codes[i] == AnnotationCode::ProbableForeground)
        .collect();
    if pf.is_empty() {
        return false;
    }
    pf.sort_by(|&a, &b| p.data()[b].total_cmp(&p.data()[a]).then(a.cmp(&b)));
    let n = ((pf.len() as f64 * fraction).ceil() as usize).max(1);
    for &i in &pf[..n] {
        ann.codes[i] = AnnotationCode::SureForeground;
    }
    true
}

/// `1` where `P >= t`.
pub fn threshold_baseline(p: &Plane, t: f64) -> Mask {
    let (w, h) = p.dims();
    Mask::from_vec(w, h, p.data().iter().map(|&v| (v as f64 >= t) as u8).collect())
        .expect("sizes agree")
}
