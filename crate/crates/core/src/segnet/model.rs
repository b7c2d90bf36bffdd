use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::FixtureBackend;
use crate::error::{Error, Result};
use crate::nn::{self, BackpropRule, ConvGeometry, Tensor};
use crate::raster::{Plane, RgbImage};
use crate::weights::WeightFile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backbone {
    /// VGG-19 convolution blocks 1-4 (output stride 8), initialized from ImageNet weights.
    Full,
    /// Two convolutions (output stride 2), for tests and the synthetic corpus.
    Tiny,
}

/// Architecture of the class-agnostic segmentation network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub backbone: Backbone,
    /// 3 (RGB), 4 (RGB + one map) or 5 (RGB + positive + negative map).
    pub input_channels: usize,
    #[serde(default = "two")]
    pub num_output_channels: usize,
    /// Width of the tiny encoder's second convolution.
    #[serde(default = "default_width")]
    pub encoder_width: usize,
    /// Channels of every ASPP branch and of the projection.
    pub aspp_width: usize,
    /// Dilation rates of the 3x3 ASPP branches.
    pub atrous_rates: Vec<usize>,
    /// Classifier backend whose first-layer RGB kernel seeds the stem.
    pub init_source: String,
    /// Weights file for `init_source` when it is not the bundled fixture.
    #[serde(default)]
    pub init_weights: Option<std::path::PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn two() -> usize {
    2
}

fn default_width() -> usize {
    16
}

impl ModelConfig {
    /// The desk-scale configuration used for the synthetic corpus.
    pub fn tiny(input_channels: usize, seed: u64) -> Self {
        ModelConfig {
            backbone: Backbone::Tiny,
            input_channels,
            num_output_channels: 2,
            encoder_width: 16,
            aspp_width: 8,
            atrous_rates: vec![1, 2],
            init_source: "fixture".into(),
            init_weights: None,
            seed,
        }
    }

    /// RGB mean and std of the backend the stem was taken from.
    pub fn rgb_normalization(&self) -> ([f64; 3], [f64; 3]) {
        match self.init_source.as_str() {
            "vgg19-imagenet1k" => (crate::classifier::IMAGENET_MEAN, crate::classifier::IMAGENET_STD),
            _ => {
                let d = crate::classifier::FixtureDefinition::bundled();
                (d.mean, d.std)
            }
        }
    }

    pub fn output_stride(&self) -> usize {
        match self.backbone {
            Backbone::Full => 8,
            Backbone::Tiny => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(3..=5).contains(&self.input_channels) {
            return Err(Error::Config(format!(
                "input_channels must be 3, 4 or 5, got {}",
                self.input_channels
            )));
        }
        if self.num_output_channels != 2 {
            return Err(Error::Config("num_output_channels must be 2".into()));
        }
        if self.aspp_width == 0 || self.encoder_width == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.atrous_rates.contains(&0) {
            return Err(Error::Config("atrous rates must be positive".into()));
        }
        Ok(())
    }
}

/// A convolution with bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv {
    pub geometry: ConvGeometry,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv {
    fn he(geometry: ConvGeometry, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = (geometry.in_channels * geometry.kernel * geometry.kernel) as f64;
        let bound = (6.0 / fan_in).sqrt();
        Conv {
            weight: (0..geometry.weight_len())
                .map(|_| rng.random_range(-bound..bound))
                .collect(),
            bias: vec![0.0; geometry.out_channels],
            geometry,
        }
    }

    fn forward(&self, x: &Tensor) -> Tensor {
        nn::conv2d(x, &self.geometry, &self.weight, Some(&self.bias))
    }
}

fn geo(cin: usize, cout: usize, kernel: usize, stride: usize, dilation: usize) -> ConvGeometry {
    ConvGeometry {
        in_channels: cin,
        out_channels: cout,
        kernel,
        stride,
        padding: dilation * (kernel / 2),
        dilation,
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Stage {
    /// Convolution followed by a rectifier.
    Conv(Conv),
    MaxPool,
}

/// Encoder, atrous spatial pyramid pooling and a 1x1 classifier, upsampled to the input.
#[derive(Clone, Debug, PartialEq)]
pub struct SegNet {
    config: ModelConfig,
    encoder: Vec<Stage>,
    branches: Vec<Conv>,
    pool_branch: Conv,
    project: Conv,
    head: Conv,
}

/// Gradients with the same layout as [`SegNet::params`].
pub type Grads = Vec<Vec<f64>>;

struct Trace {
    stage_inputs: Vec<Tensor>,
    stage_pre: Vec<Option<Tensor>>,
    pool_args: Vec<Option<Vec<usize>>>,
    feat: Tensor,
    branch_pre: Vec<Tensor>,
    pooled: Tensor,
    pool_pre: Tensor,
    concat: Tensor,
    project_pre: Tensor,
    projected: Tensor,
    logits_low: Tensor,
}

/// Stem kernel `[out][3][3][3]` of the initialization source.
fn pretrained_stem(config: &ModelConfig) -> Result<(usize, Vec<f64>)> {
    match config.init_source.as_str() {
        "fixture" => {
            let fixture = FixtureBackend::new();
            let (g, w) = fixture.first_layer_kernel();
            Ok((g.out_channels, w.to_vec()))
        }
        "vgg19-imagenet1k" => {
            let path = config.init_weights.as_ref().ok_or_else(|| {
                Error::Config("init_source vgg19-imagenet1k needs init_weights".into())
            })?;
            let w = WeightFile::load(path, crate::classifier::VGG19_WEIGHTS_HINT)?;
            let a = w.get("features.0.weight")?;
            Ok((a.shape[0], a.data.clone()))
        }
        other => Err(Error::Config(format!("unknown init_source {other:?}"))),
    }
}

/// Copies the RGB kernel into the first three input channels of a wider stem.
fn expand_stem(rgb: &[f64], out: usize, cin: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let fan_in = (cin * 9) as f64;
    let bound = (6.0 / fan_in).sqrt();
    let mut w = vec![0.0; out * cin * 9];
    for o in 0..out {
        for i in 0..cin {
            for k in 0..9 {
                w[(o * cin + i) * 9 + k] = if i < 3 {
                    rgb[(o * 3 + i) * 9 + k]
                } else {
                    rng.random_range(-bound..bound)
                };
            }
        }
    }
    w
}

impl SegNet {
    pub fn build(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        if config.backbone == Backbone::Full {
            if config.init_source != "vgg19-imagenet1k" {
                return Err(Error::Config("the full backbone is initialized from vgg19-imagenet1k".into()));
            }
            if config.init_weights.as_ref().is_none_or(|p| !p.exists()) {
                return Err(Error::resource(
                    config.init_weights.clone().unwrap_or_default(),
                    crate::classifier::VGG19_WEIGHTS_HINT,
                ));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let cin = config.input_channels;
        let (stem_out, rgb) = pretrained_stem(config)?;
        let stem = Conv {
            geometry: geo(cin, stem_out, 3, 1, 1),
            weight: expand_stem(&rgb, stem_out, cin, &mut rng),
            bias: vec![0.0; stem_out],
        };
        let mut encoder = vec![Stage::Conv(stem)];
        let feat_ch = match config.backbone {
            Backbone::Tiny => {
                let c = Conv::he(geo(stem_out, config.encoder_width, 3, 2, 1), &mut rng);
                encoder.push(Stage::Conv(c));
                config.encoder_width
            }
            Backbone::Full => {
                let path = config.init_weights.as_ref().expect("checked above");
                let w = WeightFile::load(path, crate::classifier::VGG19_WEIGHTS_HINT)?;
                let mut c_prev = stem_out;
                // blocks 1-3 end in a pool, block 4 keeps stride 8
                for (idx, pool) in [
                    (2, true),
                    (5, false),
                    (7, true),
                    (10, false),
                    (12, false),
                    (14, false),
                    (16, true),
                    (19, false),
                    (21, false),
                    (23, false),
                    (25, false),
                ] {
                    let wt = w.get(&format!("features.{idx}.weight"))?;
                    let b = w.get(&format!("features.{idx}.bias"))?;
                    if wt.shape[1] != c_prev {
                        return Err(Error::Shape(format!("features.{idx} expects {} inputs", wt.shape[1])));
                    }
                    encoder.push(Stage::Conv(Conv {
                        geometry: geo(c_prev, wt.shape[0], 3, 1, 1),
                        weight: wt.data.clone(),
                        bias: b.data.clone(),
                    }));
                    c_prev = wt.shape[0];
                    if pool {
                        encoder.push(Stage::MaxPool);
                    }
                }
                if let Stage::Conv(first) = &mut encoder[0] {
                    first.bias = w.get("features.0.bias")?.data.clone();
                }
                c_prev
            }
        };
        let a = config.aspp_width;
        let mut branches = vec![Conv::he(geo(feat_ch, a, 1, 1, 1), &mut rng)];
        for &r in &config.atrous_rates {
            branches.push(Conv::he(geo(feat_ch, a, 3, 1, r), &mut rng));
        }
        let pool_branch = Conv::he(geo(feat_ch, a, 1, 1, 1), &mut rng);
        let n_concat = a * (branches.len() + 1);
        let project = Conv::he(geo(n_concat, a, 1, 1, 1), &mut rng);
        let head = Conv::he(geo(a, config.num_output_channels, 1, 1, 1), &mut rng);
        Ok(SegNet {
            config: config.clone(),
            encoder,
            branches,
            pool_branch,
            project,
            head,
        })
    }

    /// The architecture described by `config` with parameter shapes read from a checkpoint;
    /// values are filled in by `load_params`.
    pub(crate) fn build_uninitialized(config: &ModelConfig, w: &WeightFile) -> Result<Self> {
        config.validate()?;
        let mut encoder = Vec::new();
        let mut si = 0;
        let mut feat_ch = config.input_channels;
        while let Ok(a) = w.get(&format!("encoder.{si}.weight")) {
            while encoder.len() < si {
                encoder.push(Stage::MaxPool);
            }
            let stride = match (config.backbone, si) {
                (Backbone::Tiny, 1) => 2,
                _ => 1,
            };
            let g = geo(a.shape[1], a.shape[0], a.shape[2], stride, 1);
            encoder.push(Stage::Conv(Conv {
                geometry: g,
                weight: vec![0.0; g.weight_len()],
                bias: vec![0.0; g.out_channels],
            }));
            feat_ch = a.shape[0];
            si += 1;
            if config.backbone == Backbone::Full && w.get(&format!("encoder.{si}.weight")).is_err() {
                si += 1;
            }
        }
        let zero = |g: ConvGeometry| Conv {
            geometry: g,
            weight: vec![0.0; g.weight_len()],
            bias: vec![0.0; g.out_channels],
        };
        let a = config.aspp_width;
        let mut branches = vec![zero(geo(feat_ch, a, 1, 1, 1))];
        for &r in &config.atrous_rates {
            branches.push(zero(geo(feat_ch, a, 3, 1, r)));
        }
        Ok(SegNet {
            config: config.clone(),
            encoder,
            branches,
            pool_branch: zero(geo(feat_ch, a, 1, 1, 1)),
            project: zero(geo(a * (config.atrous_rates.len() + 2), a, 1, 1, 1)),
            head: zero(geo(a, config.num_output_channels, 1, 1, 1)),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// First-layer weights `[out][input_channels][3][3]`.
    pub fn stem_weight(&self) -> &[f64] {
        match &self.encoder[0] {
            Stage::Conv(c) => &c.weight,
            Stage::MaxPool => unreachable!("the stem is a convolution"),
        }
    }

    fn convs(&self) -> Vec<(String, &Conv)> {
        let mut v = Vec::new();
        for (i, s) in self.encoder.iter().enumerate() {
            if let Stage::Conv(c) = s {
                v.push((format!("encoder.{i}"), c));
            }
        }
        for (i, c) in self.branches.iter().enumerate() {
            v.push((format!("aspp.branch.{i}"), c));
        }
        v.push(("aspp.pool".into(), &self.pool_branch));
        v.push(("aspp.project".into(), &self.project));
        v.push(("head".into(), &self.head));
        v
    }

    fn convs_mut(&mut self) -> Vec<&mut Conv> {
        let mut v: Vec<&mut Conv> = Vec::new();
        for s in self.encoder.iter_mut() {
            if let Stage::Conv(c) = s {
                v.push(c);
            }
        }
        v.extend(self.branches.iter_mut());
        v.push(&mut self.pool_branch);
        v.push(&mut self.project);
        v.push(&mut self.head);
        v
    }

    /// Named parameter arrays with shapes, in a fixed order.
    pub fn params(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::new();
        for (name, c) in self.convs() {
            let g = c.geometry;
            out.push((
                format!("{name}.weight"),
                vec![g.out_channels, g.in_channels, g.kernel, g.kernel],
                &c.weight[..],
            ));
            out.push((format!("{name}.bias"), vec![g.out_channels], &c.bias[..]));
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for c in self.convs_mut() {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.2.len()).sum()
    }

    pub fn zero_grads(&self) -> Grads {
        self.params().iter().map(|p| vec![0.0; p.2.len()]).collect()
    }

    fn forward_trace(&self, x: &Tensor) -> Result<(Tensor, Trace)> {
        if x.channels != self.config.input_channels {
            return Err(Error::Shape(format!(
                "model expects {} input channels, got {}",
                self.config.input_channels, x.channels
            )));
        }
        let mut h = x.clone();
        let mut stage_inputs = Vec::new();
        let mut stage_pre = Vec::new();
        let mut pool_args = Vec::new();
        for s in &self.encoder {
            stage_inputs.push(h.clone());
            match s {
                Stage::Conv(c) => {
                    let pre = c.forward(&h);
                    h = nn::relu(&pre);
                    stage_pre.push(Some(pre));
                    pool_args.push(None);
                }
                Stage::MaxPool => {
                    if h.height < 2 || h.width < 2 {
                        return Err(Error::Shape("input too small for the encoder".into()));
                    }
                    let (y, arg) = nn::max_pool(&h, 2, 2);
                    h = y;
                    stage_pre.push(None);
                    pool_args.push(Some(arg));
                }
            }
        }
        let feat = h;
        let branch_pre: Vec<Tensor> = self.branches.iter().map(|c| c.forward(&feat)).collect();
        let pooled = nn::adaptive_avg_pool(&feat, 1, 1);
        let pool_pre = self.pool_branch.forward(&pooled);
        let pool_act = nn::relu(&pool_pre);
        let mut broadcast = Tensor::zeros(pool_act.channels, feat.height, feat.width);
        for c in 0..pool_act.channels {
            broadcast.plane_mut(c).fill(pool_act.data[c]);
        }
        let acts: Vec<Tensor> = branch_pre.iter().map(nn::relu).collect();
        let mut parts: Vec<&Tensor> = acts.iter().collect();
        parts.push(&broadcast);
        let concat = Tensor::concat(&parts);
        let project_pre = self.project.forward(&concat);
        let projected = nn::relu(&project_pre);
        let logits_low = self.head.forward(&projected);
        let logits = nn::upsample_bilinear(&logits_low, x.height, x.width);
        Ok((
            logits,
            Trace {
                stage_inputs,
                stage_pre,
                pool_args,
                feat,
                branch_pre,
                pooled,
                pool_pre,
                concat,
                project_pre,
                projected,
                logits_low,
            },
        ))
    }

    /// Two-channel logits at input resolution.
    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward_trace(x)?.0)
    }

    /// Accumulates parameter gradients for `dL/dlogits` into `grads`.
    fn backward(&self, trace: &Trace, grad_logits: &Tensor, grads: &mut Grads) {
        let rule = BackpropRule::Plain;
        let ll = &trace.logits_low;
        let g_low = nn::upsample_bilinear_backward((ll.channels, ll.height, ll.width), grad_logits);
        // grads are ordered as convs(): encoder convs, branches, pool, project, head
        let n_enc = self
            .encoder
            .iter()
            .filter(|s| matches!(s, Stage::Conv(_)))
            .count();
        let slot = |i: usize| 2 * i;
        let head_i = n_enc + self.branches.len() + 2;
        let proj_i = head_i - 1;
        let pool_i = head_i - 2;

        let g_proj_act = {
            let (a, b) = grads.split_at_mut(slot(head_i) + 1);
            nn::conv2d_backward(
                &trace.projected,
                &self.head.geometry,
                &self.head.weight,
                &g_low,
                true,
                Some(&mut a[slot(head_i)]),
                Some(&mut b[0]),
            )
            .unwrap()
        };
        let g_proj_pre = nn::relu_backward(&trace.project_pre, &g_proj_act, rule);
        let g_concat = {
            let (a, b) = grads.split_at_mut(slot(proj_i) + 1);
            nn::conv2d_backward(
                &trace.concat,
                &self.project.geometry,
                &self.project.weight,
                &g_proj_pre,
                true,
                Some(&mut a[slot(proj_i)]),
                Some(&mut b[0]),
            )
            .unwrap()
        };
        let a = self.config.aspp_width;
        let mut sizes = vec![a; self.branches.len()];
        sizes.push(a);
        let g_parts = g_concat.split(&sizes);
        let feat = &trace.feat;
        let mut g_feat = Tensor::zeros(feat.channels, feat.height, feat.width);
        for (bi, conv) in self.branches.iter().enumerate() {
            let g_pre = nn::relu_backward(&trace.branch_pre[bi], &g_parts[bi], rule);
            let i = n_enc + bi;
            let (lo, hi) = grads.split_at_mut(slot(i) + 1);
            let g = nn::conv2d_backward(
                feat,
                &conv.geometry,
                &conv.weight,
                &g_pre,
                true,
                Some(&mut lo[slot(i)]),
                Some(&mut hi[0]),
            )
            .unwrap();
            g_feat.add_assign(&g);
        }
        // image-pooling branch: the broadcast sums its gradient over the plane
        let gb = &g_parts[self.branches.len()];
        let mut g_pool_act = Tensor::zeros(a, 1, 1);
        for c in 0..a {
            g_pool_act.data[c] = gb.plane(c).iter().sum();
        }
        let g_pool_pre = nn::relu_backward(&trace.pool_pre, &g_pool_act, rule);
        let g_pooled = {
            let (lo, hi) = grads.split_at_mut(slot(pool_i) + 1);
            nn::conv2d_backward(
                &trace.pooled,
                &self.pool_branch.geometry,
                &self.pool_branch.weight,
                &g_pool_pre,
                true,
                Some(&mut lo[slot(pool_i)]),
                Some(&mut hi[0]),
            )
            .unwrap()
        };
        g_feat.add_assign(&nn::adaptive_avg_pool_backward(feat, &g_pooled));

        let mut g = g_feat;
        let mut conv_i = n_enc;
        for (si, stage) in self.encoder.iter().enumerate().rev() {
            let input = &trace.stage_inputs[si];
            match stage {
                Stage::Conv(c) => {
                    conv_i -= 1;
                    let out_pre = trace.stage_pre[si].as_ref().expect("conv recorded its input");
                    let g_pre = nn::relu_backward(out_pre, &g, rule);
                    let (lo, hi) = grads.split_at_mut(slot(conv_i) + 1);
                    let want = si > 0;
                    let gi = nn::conv2d_backward(
                        input,
                        &c.geometry,
                        &c.weight,
                        &g_pre,
                        want,
                        Some(&mut lo[slot(conv_i)]),
                        Some(&mut hi[0]),
                    );
                    match gi {
                        Some(t) => g = t,
                        None => break,
                    }
                }
                Stage::MaxPool => {
                    let arg = trace.pool_args[si].as_ref().expect("pool recorded its argmax");
                    g = nn::max_pool_backward(input, arg, &g);
                }
            }
        }
    }

    /// Mean per-pixel two-class cross-entropy against `mask` (1 = foreground) and, when
    /// `grads` is given, its gradient accumulated with weight `scale`.
    pub fn loss_and_grad(
        &self,
        x: &Tensor,
        mask: &[u8],
        scale: f64,
        grads: Option<&mut Grads>,
    ) -> Result<f64> {
        let (logits, trace) = self.forward_trace(x)?;
        let n = logits.plane_len();
        if mask.len() != n {
            return Err(Error::Shape("mask does not match input size".into()));
        }
        let mut loss = 0.0;
        let mut g = Tensor::zeros(2, logits.height, logits.width);
        for i in 0..n {
            let (z0, z1) = (logits.data[i], logits.data[n + i]);
            let m = z0.max(z1);
            let lse = m + ((z0 - m).exp() + (z1 - m).exp()).ln();
            let p1 = (z1 - lse).exp();
            let y = (mask[i] != 0) as u8 as f64;
            loss -= if y > 0.5 { z1 - lse } else { z0 - lse };
            g.data[i] = ((1.0 - p1) - (1.0 - y)) / n as f64 * scale;
            g.data[n + i] = (p1 - y) / n as f64 * scale;
        }
        if let Some(grads) = grads {
            self.backward(&trace, &g, grads);
        }
        Ok(loss / n as f64)
    }

    /// Foreground probability per pixel.
    pub fn predict_likelihood(&self, input: &AttentionInput) -> Result<LikelihoodImage> {
        let x = input.to_tensor(&self.config)?;
        let logits = self.logits(&x)?;
        let n = logits.plane_len();
        let data = (0..n)
            .map(|i| {
                let p = nn::softmax(&[logits.data[i], logits.data[n + i]]);
                p[1] as f32
            })
            .collect();
        Ok(LikelihoodImage(Plane::from_vec(x.width, x.height, data)?))
    }

    pub(crate) fn load_params(&mut self, w: &WeightFile) -> Result<()> {
        let names: Vec<(String, Vec<usize>)> =
            self.params().into_iter().map(|(n, s, _)| (n, s)).collect();
        for ((name, shape), dst) in names.into_iter().zip(self.params_mut()) {
            let a = w.get(&name)?;
            if a.shape != shape {
                return Err(Error::Shape(format!(
                    "{name}: checkpoint shape {:?}, model shape {:?}",
                    a.shape, shape
                )));
            }
            dst.copy_from_slice(&a.data);
        }
        Ok(())
    }
}

/// Per-pixel foreground probability in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct LikelihoodImage(pub Plane);

impl LikelihoodImage {
    pub fn plane(&self) -> &Plane {
        &self.0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }
}

/// RGB plus optional attention channels, all at one resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionInput {
    pub rgb: RgbImage,
    pub positive: Option<Plane>,
    pub negative: Option<Plane>,
    /// Normalization applied to RGB, taken from the initialization backend.
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl AttentionInput {
    /// Normalized like the fixture backend.
    pub fn new(rgb: RgbImage, positive: Option<Plane>, negative: Option<Plane>) -> Result<Self> {
        let fixture = FixtureBackend::new();
        let p = crate::classifier::ClassifierBackend::preprocessing(&fixture);
        Self::with_normalization(rgb, positive, negative, p.mean, p.std)
    }

    /// Normalized the way `config`'s stem expects.
    pub fn for_model(
        config: &ModelConfig,
        rgb: RgbImage,
        positive: Option<Plane>,
        negative: Option<Plane>,
    ) -> Result<Self> {
        let (mean, std) = config.rgb_normalization();
        Self::with_normalization(rgb, positive, negative, mean, std)
    }

    pub fn with_normalization(
        rgb: RgbImage,
        positive: Option<Plane>,
        negative: Option<Plane>,
        mean: [f64; 3],
        std: [f64; 3],
    ) -> Result<Self> {
        for m in positive.iter().chain(negative.iter()) {
            if m.dims() != rgb.dims() {
                return Err(Error::Shape(format!(
                    "attention map {:?} does not match image {:?}",
                    m.dims(),
                    rgb.dims()
                )));
            }
            let (lo, hi) = m.min_max();
            if lo < 0.0 || hi > 1.0 {
                return Err(Error::Shape("attention maps must lie in [0, 1]".into()));
            }
        }
        if negative.is_some() && positive.is_none() {
            return Err(Error::Shape("a negative map needs a positive map".into()));
        }
        Ok(AttentionInput {
            rgb,
            positive,
            negative,
            mean,
            std,
        })
    }

    pub fn channels(&self) -> usize {
        3 + self.positive.is_some() as usize + self.negative.is_some() as usize
    }

    pub fn dims(&self) -> (usize, usize) {
        self.rgb.dims()
    }

    pub fn to_tensor(&self, config: &ModelConfig) -> Result<Tensor> {
        if self.channels() != config.input_channels {
            return Err(Error::Shape(format!(
                "model expects {} input channels, got {}",
                config.input_channels,
                self.channels()
            )));
        }
        let (w, h) = self.rgb.dims();
        let n = w * h;
        let mut t = Tensor::zeros(self.channels(), h, w);
        for (i, px) in self.rgb.pixels().iter().enumerate() {
            for c in 0..3 {
                t.data[c * n + i] = (px[c] as f64 - self.mean[c]) / self.std[c];
            }
        }
        for (k, m) in self.positive.iter().chain(self.negative.iter()).enumerate() {
            for (i, v) in m.data().iter().enumerate() {
                t.data[(3 + k) * n + i] = *v as f64;
            }
        }
        Ok(t)
    }
}
