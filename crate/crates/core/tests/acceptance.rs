//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Criteria that need resources absent from the machine (GloVe vectors via `LEXSEG_GLOVE`,
//! VOC 2012 + SBD via `LEXSEG_DATA_ROOT`) print FAIL with the reason and do not abort the
//! run; every other FAIL exits non-zero.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lexseg::classifier::{BackpropRule, ClassifierBackend, FixtureBackend, GradientTensor, ImageTensor};
use lexseg::dataset::{
    ingest_voc_sbd, load_partitions, sample_episodes, synth_shapes_corpus, synthetic_partitions, PartitionSpec, Sample,
    SampleSource, SampleStore, Split, SynthConfig,
};
use lexseg::eval::{evaluate_partition, train_variant, TrainPlan, VariantTag};
use lexseg::label_semantics::{
    tokenize_label, word2vec_candidates, wordnet_candidates, ClassifierVocabulary, EmbeddingTable, Mapper,
    MapperResources, OntologyIndex,
};
use lexseg::nn::Tensor;
use lexseg::pipeline::Pipeline;
use lexseg::postprocess::{
    annotate_from_likelihood, grabcut_refine, maxflow::labeling_energy, maxflow::min_cut_labeling, AnnotationCode,
    AnnotationImage, GrabCutParams,
};
use lexseg::raster::{Mask, Plane, RgbImage};
use lexseg::saliency::{class_saliency_map, compose_saliency, single_label_saliency, Polarity, SaliencyMap};
use lexseg::segnet::{
    batch_loss, batch_loss_and_grad, load_checkpoint, save_checkpoint, AttentionInput, ModelConfig, SegNet, TrainHyper,
    TrainState, TrainingExample,
};

enum Outcome {
    Pass(String),
    Fail(String),
    /// Failed because an external resource is missing.
    Unavailable(String),
}

struct Gate {
    hard_failures: usize,
}

impl Gate {
    fn run(&mut self, name: &str, f: impl FnOnce() -> Outcome) {
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Outcome::Pass(d) => println!("PASS  {name} ({secs:.1}s): {d}"),
            Outcome::Fail(d) => {
                self.hard_failures += 1;
                println!("FAIL  {name} ({secs:.1}s): {d}");
            }
            Outcome::Unavailable(d) => println!("FAIL  {name} ({secs:.1}s): resource unavailable: {d}"),
        }
    }
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn main() {
    let mut gate = Gate { hard_failures: 0 };
    gate.run("table2-proxy-labels", table2);
    gate.run("annotation-formula", annotation_formula);
    gate.run("grabcut-contract", grabcut_contract);
    gate.run("saliency", saliency_suite);
    gate.run("data-leak", data_leak);
    gate.run("cooccurrence", cooccurrence);
    gate.run("tiny-pipeline-ordering", tiny_ordering);
    gate.run("segnet-gradient-check", gradient_check);
    gate.run("checkpoint-round-trip", checkpoint_round_trip);
    if gate.hard_failures > 0 {
        println!("{} criteria failed", gate.hard_failures);
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------------------
// proxy labels

/// Non-bold WordNet-column entries per target.
const WORDNET_ROWS: [(&str, &[&str]); 7] = [
    ("bottle", &["beer bottle", "pill bottle", "soda bottle", "water bottle"]),
    ("car", &["racer", "sports car", "streetcar", "freight car"]),
    ("dog", &["pug", "terrier", "shepherd", "tibetan terrier"]),
    ("chair", &["folding chair", "barber chair"]),
    ("cat", &["tabby cat", "tiger cat", "siamese cat"]),
    ("train", &["bullet train"]),
    ("sofa", &["studio couch"]),
];

/// Complete embedding-column rows.
const WORD2VEC_ROWS: [(&str, [&str; 5]); 2] = [
    ("sofa", ["folding chair", "pillow", "desk", "bookcase", "studio couch"]),
    ("cat", ["tabby cat", "fox terrier", "tiger cat", "toy terrier", "hamster"]),
];

fn tokens(s: &str) -> BTreeSet<String> {
    s.split(|c: char| c.is_whitespace() || c == ',' || c == '-')
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// `want` is met by a produced label whose token set contains all of `want`'s tokens.
fn met_by(want: &str, produced: &[String]) -> bool {
    let w = tokens(want);
    produced.iter().any(|p| w.is_subset(&tokens(p)))
}

fn table2() -> Outcome {
    let t = Instant::now();
    let vocab = ClassifierVocabulary::imagenet1k();
    let ontology = OntologyIndex::wordnet30();
    let mut problems = Vec::new();
    for (target, expected) in WORDNET_ROWS {
        let label = tokenize_label(target).unwrap();
        let got: Vec<String> = wordnet_candidates(&label, &vocab, &ontology)
            .unwrap()
            .into_iter()
            .map(|i| vocab.label(i).unwrap().text().to_string())
            .collect();
        for e in expected {
            if !met_by(e, &got) {
                problems.push(format!("wordnet {target}: missing {e}"));
            }
        }
        if target == "train" && met_by("steam locomotive", &got) {
            problems.push("wordnet train: unexpectedly produced steam locomotive".into());
        }
    }
    let wordnet_ok = problems.is_empty();

    let Some(glove) = std::env::var_os("LEXSEG_GLOVE").map(PathBuf::from) else {
        let d = format!(
            "wordnet column {} for 7/7 targets; word2vec rows need 300-d GloVe vectors (set LEXSEG_GLOVE)",
            if wordnet_ok { "passes" } else { "FAILS" }
        );
        return if wordnet_ok { Outcome::Unavailable(d) } else { Outcome::Fail(format!("{d}; {problems:?}")) };
    };
    let mut keep: HashSet<String> = vocab.entries().iter().flat_map(|e| e.label.tokens().to_vec()).collect();
    keep.extend(WORD2VEC_ROWS.iter().map(|(t, _)| t.to_string()));
    let table = match EmbeddingTable::load(&glove, 300, Some(&keep)) {
        Ok(t) => t,
        Err(e) => return Outcome::Unavailable(format!("{}: {e}", glove.display())),
    };
    for (target, expected) in WORD2VEC_ROWS {
        let got: Vec<String> = word2vec_candidates(&tokenize_label(target).unwrap(), &vocab, &table, 5)
            .unwrap()
            .into_iter()
            .map(|(i, _)| vocab.label(i).unwrap().text().to_string())
            .collect();
        let matched = expected.iter().filter(|e| met_by(e, &got)).count();
        if matched != 5 {
            problems.push(format!("word2vec {target}: got {got:?}"));
        }
    }
    let elapsed = t.elapsed();
    if elapsed > Duration::from_secs(30) {
        problems.push(format!("took {elapsed:.1?}"));
    }
    verdict(problems.is_empty(), if problems.is_empty() { "7/7 wordnet rows, sofa and cat word2vec rows".into() } else { problems.join("; ") })
}

// ---------------------------------------------------------------------------------------
// annotation coding

const T_FG: f64 = 0.7;
const T_UNK: f64 = 0.5;
const T_BG: f64 = 0.15;

fn oracle_code(v: f64, lo: f64, hi: f64) -> AnnotationCode {
    let d = hi - lo;
    if v <= lo + T_BG * d {
        AnnotationCode::SureBackground
    } else if v < lo + T_UNK * d {
        AnnotationCode::ProbableBackground
    } else if v < lo + T_FG * d {
        AnnotationCode::ProbableForeground
    } else {
        AnnotationCode::SureForeground
    }
}

fn random_plane(rng: &mut ChaCha8Rng) -> Plane {
    let w = rng.random_range(1..=16);
    let h = rng.random_range(1..=16);
    let levels: Option<u32> = rng.random_bool(0.3).then(|| rng.random_range(2..=8));
    let scale = rng.random_range(0.01f32..10.0);
    let shift = rng.random_range(-5.0f32..5.0);
    let data = (0..w * h)
        .map(|_| {
            let u: f32 = match levels {
                Some(l) => rng.random_range(0..l) as f32 / (l - 1) as f32,
                None => rng.random(),
            };
            shift + scale * u
        })
        .collect();
    Plane::from_vec(w, h, data).unwrap()
}

fn annotation_formula() -> Outcome {
    let params = GrabCutParams::default();
    if (params.t_fg, params.t_unk, params.t_bg) != (T_FG, T_UNK, T_BG) {
        return Outcome::Fail(format!("default thresholds {:?}", (params.t_fg, params.t_unk, params.t_bg)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0usize;
    let mut pixels = 0usize;
    for _ in 0..10_000 {
        let p = random_plane(&mut rng);
        let ann = annotate_from_likelihood(&p, &params);
        let lo = p.data().iter().fold(f64::INFINITY, |a, &v| a.min(v as f64));
        let hi = p.data().iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v as f64));
        for (v, c) in p.data().iter().zip(ann.codes()) {
            pixels += 1;
            let want = if hi == lo { AnnotationCode::SureBackground } else { oracle_code(*v as f64, lo, hi) };
            mismatches += (want != *c) as usize;
        }
    }

    // affine maps of planes whose normalized values keep clear of the thresholds, so the
    // check is exact in floating point
    let mut affine_failures = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=200);
        let mut u: Vec<f64> = (0..n)
            .map(|_| loop {
                let x: f64 = rng.random();
                if [T_BG, T_UNK, T_FG].iter().all(|t| (x - t).abs() > 1e-3) {
                    break x;
                }
            })
            .collect();
        u[0] = 0.0;
        u[n - 1] = 1.0;
        let alpha = 10f64.powf(rng.random_range(-2.0..2.0));
        let beta = rng.random_range(-50.0..50.0);
        let base = Plane::from_vec(n, 1, u.iter().map(|&x| x as f32).collect()).unwrap();
        let moved = Plane::from_vec(n, 1, u.iter().map(|&x| (alpha * x + beta) as f32).collect()).unwrap();
        if annotate_from_likelihood(&base, &params) .codes() != annotate_from_likelihood(&moved, &params).codes() {
            affine_failures += 1;
        }
    }

    let mut flat_failures = 0;
    for v in [-3.0f32, 0.0, 0.5, 1.0, 42.0] {
        let ann = annotate_from_likelihood(&Plane::filled(7, 5, v), &params);
        if ann.count(AnnotationCode::SureBackground) != 35 {
            flat_failures += 1;
        }
    }
    verdict(
        mismatches == 0 && affine_failures == 0 && flat_failures == 0,
        format!(
            "{mismatches}/{pixels} oracle mismatches over 10000 images, {affine_failures}/100 affine failures, \
             {flat_failures}/5 constant planes not all-SB"
        ),
    )
}

// ---------------------------------------------------------------------------------------
// GrabCut

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> RgbImage {
    let data = (0..w * h).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    RgbImage::new(w, h, data).unwrap()
}

/// Exhaustive minimum over all labelings of a `w x h` 8-connected grid, enumerating one
/// row at a time (transfer over 2^w row states).
fn grid_min_energy(w: usize, h: usize, unary: &[[f64; 2]], pairwise: &[(usize, usize, f64)]) -> f64 {
    let states = 1usize << w;
    let bit = |s: usize, x: usize| (s >> x) & 1 == 1;
    let row_cost = |y: usize, s: usize| -> f64 {
        let mut c = 0.0;
        for x in 0..w {
            c += unary[y * w + x][bit(s, x) as usize];
        }
        for &(a, b, wt) in pairwise {
            if a / w == y && b / w == y && bit(s, a % w) != bit(s, b % w) {
                c += wt;
            }
        }
        c
    };
    let between = |y: usize, s: usize, t: usize| -> f64 {
        // edges from row y (state s) to row y + 1 (state t)
        pairwise
            .iter()
            .filter(|(a, b, _)| a / w == y && b / w == y + 1)
            .filter(|(a, b, _)| bit(s, a % w) != bit(t, b % w))
            .map(|(_, _, wt)| wt)
            .sum()
    };
    let mut best: Vec<f64> = (0..states).map(|s| row_cost(0, s)).collect();
    for y in 1..h {
        best = (0..states)
            .map(|t| {
                let own = row_cost(y, t);
                (0..states).map(|s| best[s] + between(y - 1, s, t)).fold(f64::INFINITY, f64::min) + own
            })
            .collect();
    }
    best.into_iter().fold(f64::INFINITY, f64::min)
}

fn brute_force_energy(unary: &[[f64; 2]], pairwise: &[(usize, usize, f64)]) -> f64 {
    let n = unary.len();
    (0..1u32 << n)
        .map(|m| {
            let l: Vec<bool> = (0..n).map(|i| (m >> i) & 1 == 1).collect();
            labeling_energy(unary, pairwise, &l)
        })
        .fold(f64::INFINITY, f64::min)
}

fn grabcut_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let params = GrabCutParams::default();
    let codes = [
        AnnotationCode::SureBackground,
        AnnotationCode::ProbableBackground,
        AnnotationCode::ProbableForeground,
        AnnotationCode::SureForeground,
    ];
    let mut violations = 0usize;
    for _ in 0..100 {
        let (w, h) = (rng.random_range(3..=20), rng.random_range(3..=20));
        let img = random_image(&mut rng, w, h);
        let weights: [u32; 4] = std::array::from_fn(|_| rng.random_range(0..4));
        let total: u32 = weights.iter().sum::<u32>().max(1);
        let ann_codes = (0..w * h)
            .map(|_| {
                let mut r = rng.random_range(0..total);
                for (c, &wt) in codes.iter().zip(&weights) {
                    if r < wt {
                        return *c;
                    }
                    r -= wt;
                }
                AnnotationCode::ProbableBackground
            })
            .collect();
        let ann = AnnotationImage::new(w, h, ann_codes).unwrap();
        let out = grabcut_refine(&img, &ann, &params).unwrap();
        for (c, &m) in ann.codes().iter().zip(out.mask.data()) {
            if (*c == AnnotationCode::SureBackground && m != 0) || (*c == AnnotationCode::SureForeground && m == 0) {
                violations += 1;
            }
        }
    }

    // two-tone blob: colour threshold gives the exact region
    let (w, h) = (48, 40);
    let mut img = RgbImage::filled(w, h, [0.15, 0.3, 0.75]);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f64 - 22.0, y as f64 - 19.0);
            if dx * dx / 144.0 + dy * dy / 81.0 <= 1.0 {
                img.set(x, y, [0.85, 0.65, 0.2]);
            }
        }
    }
    let oracle = Mask::from_fn(w, h, |x, y| img.get(x, y)[0] > 0.5);
    let ann = AnnotationImage::new(
        w,
        h,
        (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                if (20..25).contains(&x) && (17..22).contains(&y) {
                    AnnotationCode::SureForeground
                } else {
                    AnnotationCode::ProbableBackground
                }
            })
            .collect(),
    )
    .unwrap();
    let out = grabcut_refine(&img, &ann, &params).unwrap();
    let disagree = out.mask.data().iter().zip(oracle.data()).filter(|(a, b)| a != b).count();
    let disagree_frac = disagree as f64 / (w * h) as f64;

    let mut energy_mismatch = 0;
    let mut worst = 0.0f64;
    for i in 0..20 {
        let (w, h) = if i < 5 { (rng.random_range(1..=4), rng.random_range(1..=4)) } else { (rng.random_range(2..=6), rng.random_range(2..=6)) };
        let n = w * h;
        let unary: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)]).collect();
        let mut pairwise = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let a = y * w + x;
                let mut link = |b: usize, rng: &mut ChaCha8Rng| pairwise.push((a, b, rng.random_range(0.0..3.0)));
                if x + 1 < w {
                    link(a + 1, &mut rng);
                }
                if y + 1 < h {
                    link(a + w, &mut rng);
                    if x + 1 < w {
                        link(a + w + 1, &mut rng);
                    }
                    if x > 0 {
                        link(a + w - 1, &mut rng);
                    }
                }
            }
        }
        let labels = min_cut_labeling(&unary, &pairwise);
        let got = labeling_energy(&unary, &pairwise, &labels);
        let best = if n <= 16 { brute_force_energy(&unary, &pairwise) } else { grid_min_energy(w, h, &unary, &pairwise) };
        let err = (got - best).abs();
        worst = worst.max(err);
        if err > 1e-9 * best.abs().max(1.0) {
            energy_mismatch += 1;
        }
    }
    verdict(
        violations == 0 && disagree_frac <= 0.02 && energy_mismatch == 0,
        format!(
            "{violations} seed violations over 100 annotations; blob disagreement {:.2}%; \
             {energy_mismatch}/20 min-cut energies off exhaustive optimum (worst {worst:.1e})",
            100.0 * disagree_frac
        ),
    )
}

// ---------------------------------------------------------------------------------------
// saliency

const K3: [[f64; 3]; 3] = [[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]];

/// Sum of the smoothing kernel over the offsets that land inside an `n x n` grid.
fn kernel_support(n: usize, x: usize, y: usize) -> f64 {
    let mut s = 0.0;
    for (dy, row) in K3.iter().enumerate() {
        for (dx, k) in row.iter().enumerate() {
            let (px, py) = (x as isize + dx as isize - 1, y as isize + dy as isize - 1);
            if px >= 0 && py >= 0 && (px as usize) < n && (py as usize) < n {
                s += k / 16.0;
            }
        }
    }
    s
}

/// Guided gradient of the red logit on a uniformly red 4x4 input.
///
/// In normalized space the input is (1, -1, -1) everywhere. Hidden unit "red" sees
/// 3 S(q), "yellow" and "magenta" S(q), the negative-luminance unit S(q) / 3 and every other
/// unit is non-positive, where S(q) is the kernel mass inside the image around q. The red
/// output pre-activation is (2/3)(K*S)(p) - 0.05 > 0 everywhere, so the pooled upstream
/// gradient gain / 16 passes the top rectifier. Going down, red's own channel (+K) carries
/// (gain / 16) S(q) > 0; yellow, magenta and luminance (-K) carry negative gradient and are
/// blocked by the guided rule. Hence
/// grad[c](r) = sign_red[c] * (gain / 16) * sum_q S(q) K(q - r).
fn hand_derived_red_gradient() -> Vec<f64> {
    let n = 4;
    let sign = [1.0, -1.0, -1.0];
    let gain = 10.0;
    let mut g = vec![0.0; 3 * n * n];
    for ry in 0..n {
        for rx in 0..n {
            let mut acc = 0.0;
            for (dy, row) in K3.iter().enumerate() {
                for (dx, k) in row.iter().enumerate() {
                    let (qx, qy) = (rx as isize + dx as isize - 1, ry as isize + dy as isize - 1);
                    if qx >= 0 && qy >= 0 && (qx as usize) < n && (qy as usize) < n {
                        acc += kernel_support(n, qx as usize, qy as usize) * k / 16.0;
                    }
                }
            }
            for c in 0..3 {
                g[c * n * n + ry * n + rx] = sign[c] * gain / 16.0 * acc;
            }
        }
    }
    g
}

fn saliency_suite() -> Outcome {
    let fixture = FixtureBackend::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut problems = Vec::new();

    for _ in 0..30 {
        let (w, h) = (rng.random_range(1..=24), rng.random_range(1..=24));
        let img = random_image(&mut rng, w, h);
        let k = rng.random_range(0..=5);
        let classes: Vec<usize> = (0..k).map(|_| rng.random_range(0..6)).collect();
        let m = class_saliency_map(&img, &classes, Polarity::Positive, &fixture, None).unwrap();
        if m.dims() != (w, h) || m.plane.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            problems.push(format!("map out of range or wrong size for {w}x{h}"));
        }
    }

    let mut scale_worst = 0.0f32;
    for _ in 0..50 {
        let (w, h) = (rng.random_range(1..=12), rng.random_range(1..=12));
        let t = Tensor::from_vec(3, h, w, (0..3 * w * h).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let g = GradientTensor::new(t).unwrap();
        let alpha = 10f64.powf(rng.random_range(-3.0..3.0));
        let a = single_label_saliency(&g);
        let b = single_label_saliency(&g.scaled(alpha));
        for (x, y) in a.plane.data().iter().zip(b.plane.data()) {
            scale_worst = scale_worst.max((x - y).abs());
        }
    }
    if scale_worst > 1e-6 {
        problems.push(format!("scaling changed a map by {scale_worst:e}"));
    }

    let rand_map = |rng: &mut ChaCha8Rng| SaliencyMap {
        plane: Plane::from_vec(9, 7, (0..63).map(|_| rng.random()).collect()).unwrap(),
        polarity: Polarity::Positive,
        source_labels: vec![],
        degenerate: false,
    };
    for _ in 0..20 {
        let a = rand_map(&mut rng);
        let b = rand_map(&mut rng);
        let c = rand_map(&mut rng);
        let single = compose_saliency(std::slice::from_ref(&a)).unwrap();
        let same = compose_saliency(&[a.clone(), a.clone(), a.clone()]).unwrap();
        let ab = compose_saliency(&[a.clone(), b.clone()]).unwrap();
        let abc = compose_saliency(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let cba = compose_saliency(&[c.clone(), b.clone(), a.clone()]).unwrap();
        for i in 0..63 {
            let (x, y, z) = (a.plane.data()[i], b.plane.data()[i], c.plane.data()[i]);
            let ok = single.plane.data()[i] == x
                && (same.plane.data()[i] - x).abs() <= 1e-6
                && (ab.plane.data()[i] - (x + y) / 2.0).abs() <= 1e-6
                && (abc.plane.data()[i] - (x + y + z) / 3.0).abs() <= 1e-6
                && (abc.plane.data()[i] - cba.plane.data()[i]).abs() <= 1e-6;
            if !ok {
                problems.push("mean composition identity broken".into());
                break;
            }
        }
    }

    let red = Tensor::from_vec(3, 4, 4, [vec![1.0; 16], vec![-1.0; 16], vec![-1.0; 16]].concat()).unwrap();
    let red = ImageTensor::new(red).unwrap();
    let guided = fixture.guided_backprop_gradient(&red, 0).unwrap();
    let expected = hand_derived_red_gradient();
    let hand_err = guided
        .tensor()
        .data
        .iter()
        .zip(&expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if hand_err > 1e-6 {
        problems.push(format!("guided gradient off the hand-derived tensor by {hand_err:e}"));
    }

    let mut fd_worst = 0.0f64;
    for trial in 0..5 {
        let (w, h) = (4 + trial, 5);
        let data: Vec<f64> = (0..3 * w * h).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = ImageTensor::new(Tensor::from_vec(3, h, w, data.clone()).unwrap()).unwrap();
        let class = trial % 6;
        let plain = fixture.input_gradient(&x, class, BackpropRule::Plain).unwrap();
        let eps = 1e-5;
        for i in 0..data.len() {
            let logit = |d: f64| {
                let mut v = data.clone();
                v[i] += d;
                fixture.network().logits(&Tensor::from_vec(3, h, w, v).unwrap()).unwrap()[class]
            };
            let fd = (logit(eps) - logit(-eps)) / (2.0 * eps);
            let a = plain.tensor().data[i];
            // entries near zero are compared against a 1e-6 floor
            fd_worst = fd_worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-6));
        }
    }
    if fd_worst > 1e-4 {
        problems.push(format!("plain gradient vs finite differences: relative error {fd_worst:e}"));
    }

    verdict(
        problems.is_empty(),
        if problems.is_empty() {
            format!(
                "maps in [0,1]; scaling drift {scale_worst:.1e}; hand-derived error {hand_err:.1e}; \
                 finite-difference relative error {fd_worst:.1e}"
            )
        } else {
            problems.join("; ")
        },
    )
}

// ---------------------------------------------------------------------------------------
// data leak

fn random_store(universe: &[String], n: usize, seed: u64) -> SampleStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|i| {
            let k = rng.random_range(1..=4.min(universe.len()));
            let labels: BTreeSet<String> = (0..k).map(|_| universe[rng.random_range(0..universe.len())].clone()).collect();
            let masks: BTreeMap<String, Mask> = labels.iter().map(|l| (l.clone(), Mask::ones(1, 1))).collect();
            Sample {
                image_id: format!("img{i:05}"),
                labels,
                split: if rng.random_bool(0.3) { Split::Test } else { Split::Train },
                source: SampleSource::Memory {
                    image: RgbImage::filled(1, 1, [0.5; 3]),
                    masks,
                },
            }
        })
        .collect();
    SampleStore::new(samples)
}

fn data_leak() -> Outcome {
    let mut partitions: Vec<(&str, PartitionSpec)> = load_partitions().into_iter().map(|p| ("voc", p)).collect();
    partitions.extend(synthetic_partitions().into_iter().map(|p| ("synthetic", p)));
    let mut leaks = 0usize;
    let mut drawn = 0usize;
    for (kind, p) in &partitions {
        let mut universe: Vec<String> = p.train_labels.iter().chain(&p.test_labels).cloned().collect();
        universe.sort();
        let store = random_store(&universe, 2_000, p.index as u64 + 100);
        let stream = sample_episodes(&store, p, Split::Train, VariantTag::Sem2CNeg, 5).unwrap();
        for e in stream.take(10_000) {
            drawn += 1;
            if p.test_labels.contains(&e.target_label) || !p.train_labels.contains(&e.target_label) {
                leaks += 1;
                eprintln!("{kind} partition {}: leaked {}", p.index, e.target_label);
            }
        }
    }
    verdict(leaks == 0, format!("{leaks} test labels among {drawn} training episodes over {} partitions", partitions.len()))
}

// ---------------------------------------------------------------------------------------
// co-occurrence

fn cooccurrence() -> Outcome {
    let root = match std::env::var_os("LEXSEG_DATA_ROOT") {
        Some(r) => PathBuf::from(r),
        None => return Outcome::Unavailable("VOC 2012 + SBD not present (set LEXSEG_DATA_ROOT)".into()),
    };
    let voc = root.join("VOC2012");
    let sbd = root.join("SBD");
    let t = Instant::now();
    let store = match ingest_voc_sbd(&voc, sbd.exists().then_some(sbd.as_path())) {
        Ok(s) => s,
        Err(e) => return Outcome::Unavailable(e.to_string()),
    };
    let mut problems = Vec::new();
    let mut seen = Vec::new();
    for (a, b, want) in [("bus", "car", 0.302), ("diningtable", "chair", 0.599), ("chair", "sofa", 0.218)] {
        match store.cooccurrence(a, b) {
            Ok(v) => {
                seen.push(format!("({a},{b})={v:.3}"));
                if (v - want).abs() > 0.03 {
                    problems.push(format!("({a},{b}) {v:.3} vs {want}"));
                }
            }
            Err(e) => problems.push(e.to_string()),
        }
    }
    if t.elapsed() > Duration::from_secs(120) {
        problems.push(format!("took {:.1?}", t.elapsed()));
    }
    verdict(problems.is_empty(), format!("{} {}", seen.join(" "), problems.join("; ")))
}

// ---------------------------------------------------------------------------------------
// tiny pipeline ordering

const ORDERING_STEPS: usize = 300;
const ORDERING_IMAGES: usize = 200;
const ORDERING_GAP: f64 = 0.05;

fn tiny_ordering() -> Outcome {
    let t = Instant::now();
    let fixture = FixtureBackend::new();
    let ontology = fixture.ontology();
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 0..3u64 {
        let mut pipeline = Pipeline::new(
            &fixture,
            Mapper::WordNet,
            MapperResources {
                ontology: Some(&ontology),
                embeddings: None,
            },
        );
        pipeline.seed = seed;
        let store = synth_shapes_corpus(ORDERING_IMAGES, seed, &SynthConfig::default()).unwrap();
        let mut miou = [0.0; 3];
        for (slot, variant) in [VariantTag::Sem0CNone, VariantTag::Sem2CNeg, VariantTag::Oracle].into_iter().enumerate() {
            let mut total = 0.0;
            let parts = synthetic_partitions();
            for p in &parts {
                let mut hyper = lexseg::config::ExperimentConfig::tiny().train;
                hyper.steps = ORDERING_STEPS;
                hyper.seed = seed;
                let plan = TrainPlan {
                    model: ModelConfig::tiny(variant.input_channels(), seed),
                    hyper,
                    memoize: true,
                    checkpoint_dir: None,
                };
                let (model, _) = train_variant(&pipeline, &store, p, variant, &plan).unwrap();
                total += evaluate_partition(&pipeline, &model, &store, p, variant).unwrap().0.miou;
            }
            miou[slot] = total / parts.len() as f64;
        }
        let [none, neg, oracle] = miou;
        ok &= neg - none >= ORDERING_GAP && oracle - neg >= ORDERING_GAP;
        lines.push(format!("seed {seed}: NONE {none:.3} < 2-C-NEG {neg:.3} < ORACLE {oracle:.3}"));
    }
    let elapsed = t.elapsed();
    ok &= elapsed < Duration::from_secs(600);
    verdict(
        ok,
        format!(
            "{ORDERING_STEPS} steps, mean over 3 partitions, required gap {ORDERING_GAP}; {}",
            lines.join("; ")
        ),
    )
}

// ---------------------------------------------------------------------------------------
// segmentation network

fn example(rng: &mut ChaCha8Rng, config: &ModelConfig, w: usize, h: usize) -> TrainingExample {
    let rgb = random_image(rng, w, h);
    let plane = |rng: &mut ChaCha8Rng| Plane::from_vec(w, h, (0..w * h).map(|_| rng.random()).collect()).unwrap();
    let (pos, neg) = match config.input_channels {
        3 => (None, None),
        4 => (Some(plane(rng)), None),
        _ => (Some(plane(rng)), Some(plane(rng))),
    };
    TrainingExample {
        target_label: "red".into(),
        input: AttentionInput::for_model(config, rgb, pos, neg).unwrap(),
        mask: Mask::from_fn(w, h, |x, y| (x * 3 + y * 5) % 7 < 3),
    }
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let config = ModelConfig::tiny(5, 4);
    let mut model = SegNet::build(&config).unwrap();
    let batch: Vec<TrainingExample> = (0..2).map(|_| example(&mut rng, &config, 10, 9)).collect();
    let (_, grads) = batch_loss_and_grad(&model, &batch).unwrap();
    let shapes: Vec<(String, usize)> = model.params().iter().map(|(n, _, v)| (n.clone(), v.len())).collect();
    let eps = 1e-6;
    let mut checked = 0;
    let mut worst = (0.0f64, String::new());
    for (t, (name, len)) in shapes.iter().enumerate() {
        let picks: Vec<usize> = if *len <= 12 { (0..*len).collect() } else { (0..12).map(|_| rng.random_range(0..*len)).collect() };
        for i in picks {
            let orig = model.params_mut()[t][i];
            model.params_mut()[t][i] = orig + eps;
            let up = batch_loss(&model, &batch).unwrap();
            model.params_mut()[t][i] = orig - eps;
            let down = batch_loss(&model, &batch).unwrap();
            model.params_mut()[t][i] = orig;
            let fd = (up - down) / (2.0 * eps);
            let a = grads[t][i];
            checked += 1;
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{i}]: analytic {a:e} vs numeric {fd:e}"));
            }
        }
    }
    verdict(
        worst.0 <= 1e-3,
        format!("{checked} parameters across {} tensors; worst relative error {:.1e} {}", shapes.len(), worst.0, worst.1),
    )
}

fn checkpoint_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dir = tempfile::tempdir().unwrap();
    let mut problems = Vec::new();
    for channels in [3, 4, 5] {
        let config = ModelConfig::tiny(channels, 9);
        let mut model = SegNet::build(&config).unwrap();
        let mut state = TrainState::new(&model);
        let mut hyper: TrainHyper = lexseg::config::ExperimentConfig::tiny().train;
        hyper.steps = 5;
        hyper.batch_size = 2;
        let mut next = || Ok(example(&mut rng, &config, 12, 12));
        lexseg::segnet::train(&mut model, &mut state, &mut next, 5, &hyper, &HashSet::new(), None).unwrap();
        let path = dir.path().join(format!("c{channels}.safetensors"));
        save_checkpoint(&path, &model, &state, Some(&hyper)).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        for _ in 0..4 {
            let ex = example(&mut rng, &config, 17, 13);
            let a = model.predict_likelihood(&ex.input).unwrap();
            let b = loaded.model.predict_likelihood(&ex.input).unwrap();
            let same = a.plane().data().iter().zip(b.plane().data()).all(|(x, y)| x.to_bits() == y.to_bits());
            if !same {
                problems.push(format!("{channels}-channel predictions differ after reload"));
            }
        }
        if loaded.state.step != state.step {
            problems.push(format!("step {} restored as {}", state.step, loaded.state.step));
        }
    }
    verdict(problems.is_empty(), if problems.is_empty() { "3, 4 and 5 input channels, bitwise equal likelihoods".into() } else { problems.join("; ") })
}
