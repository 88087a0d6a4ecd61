//! Differentiable classifier interface and the bundled two-block reference CNN.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imgcore::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    #[default]
    CrossEntropy,
}

/// Logits, loss and input gradient from one forward/backward pass.
#[derive(Debug, Clone)]
pub struct InputGradient {
    pub logits: Vec<f64>,
    pub loss: f64,
    pub grad: Image,
}

/// A classifier that exposes loss gradients with respect to its input.
pub trait Classifier: Send + Sync {
    fn num_classes(&self) -> usize;

    /// `(height, width, channels)`.
    fn input_shape(&self) -> (usize, usize, usize);

    fn forward(&self, img: &Image) -> Result<Vec<f64>>;

    /// Untargeted cross-entropy against `label`, differentiated with respect to `img`.
    fn forward_backward(&self, img: &Image, label: usize) -> Result<InputGradient>;

    fn input_grad(&self, img: &Image, label: usize, loss: LossKind) -> Result<(f64, Image)> {
        match loss {
            LossKind::CrossEntropy => {
                let g = self.forward_backward(img, label)?;
                Ok((g.loss, g.grad))
            }
        }
    }
}

pub(crate) fn check_input(model: &dyn Classifier, img: &Image) -> Result<()> {
    if img.shape() != model.input_shape() {
        return Err(Error::shape(
            format!("{:?}", model.input_shape()),
            format!("{:?}", img.shape()),
        ));
    }
    Ok(())
}

pub(crate) fn check_label(label: usize, num_classes: usize) -> Result<()> {
    if label >= num_classes {
        Err(Error::LabelOutOfRange { label, num_classes })
    } else {
        Ok(())
    }
}

/// Index of the largest value; ties resolve to the smaller index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + logits.iter().map(|&z| (z - m).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `-log softmax(logits)[label]`, stabilized by log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    check_label(label, logits.len())?;
    Ok(log_sum_exp(logits) - logits[label])
}

/// `(argmax label, logits)`.
pub fn predict(model: &dyn Classifier, img: &Image) -> Result<(usize, Vec<f64>)> {
    let logits = model.forward(img)?;
    Ok((argmax(&logits), logits))
}

const CONV1_FILTERS: usize = 8;
const CONV2_FILTERS: usize = 16;
const KSIZE: usize = 3;

/// Offsets of each parameter block inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    conv1_w: usize,
    conv1_b: usize,
    conv2_w: usize,
    conv2_b: usize,
    dense_w: usize,
    dense_b: usize,
    total: usize,
    features: usize,
}

impl Layout {
    fn new(shape: (usize, usize, usize), classes: usize) -> Self {
        let (h, w, c) = shape;
        let features = CONV2_FILTERS * (h / 4) * (w / 4);
        let conv1_w = 0;
        let conv1_b = conv1_w + CONV1_FILTERS * c * KSIZE * KSIZE;
        let conv2_w = conv1_b + CONV1_FILTERS;
        let conv2_b = conv2_w + CONV2_FILTERS * CONV1_FILTERS * KSIZE * KSIZE;
        let dense_w = conv2_b + CONV2_FILTERS;
        let dense_b = dense_w + classes * features;
        Self {
            conv1_w,
            conv1_b,
            conv2_w,
            conv2_b,
            dense_w,
            dense_b,
            total: dense_b + classes,
            features,
        }
    }
}

/// conv3x3(8) → relu → maxpool2 → conv3x3(16) → relu → maxpool2 → dense.
///
/// Convolutions use zero "same" padding; pooling floors odd extents.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyCnn {
    input_shape: (usize, usize, usize),
    num_classes: usize,
    layout: Layout,
    params: Vec<f64>,
}

/// Activations kept for the backward pass; all buffers are channel-major.
struct Trace {
    input: Vec<f64>,
    z1: Vec<f64>,
    pool1: Vec<f64>,
    pool1_idx: Vec<usize>,
    z2: Vec<f64>,
    pool2_idx: Vec<usize>,
    pool2: Vec<f64>,
    logits: Vec<f64>,
}

struct Grads {
    input: Vec<f64>,
    params: Option<Vec<f64>>,
}

impl TinyCnn {
    /// Parameters drawn from a seeded uniform(-0.05, 0.05).
    pub fn new(input_shape: (usize, usize, usize), num_classes: usize, seed: u64) -> Result<Self> {
        let (h, w, c) = input_shape;
        if h < 4 || w < 4 {
            return Err(Error::InvalidInput(format!("TinyCnn needs inputs of at least 4x4, got {h}x{w}")));
        }
        if c != 1 && c != 3 {
            return Err(Error::InvalidInput(format!("TinyCnn takes 1 or 3 channels, got {c}")));
        }
        if num_classes < 2 {
            return Err(Error::InvalidInput("TinyCnn needs at least two classes".into()));
        }
        let layout = Layout::new(input_shape, num_classes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..layout.total).map(|_| rng.random_range(-0.05..0.05)).collect();
        Ok(Self {
            input_shape,
            num_classes,
            layout,
            params,
        })
    }

    pub fn param_count(&self) -> usize {
        self.layout.total
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.layout.total {
            return Err(Error::shape(self.layout.total, params.len()));
        }
        self.params = params;
        Ok(())
    }

    /// Mutable view of the dense (logit) layer weights.
    pub fn dense_weights_mut(&mut self) -> &mut [f64] {
        let l = self.layout;
        &mut self.params[l.dense_w..l.dense_b]
    }

    /// Loss and gradient with respect to every parameter (flat layout).
    pub fn param_grad(&self, img: &Image, label: usize) -> Result<(f64, Vec<f64>)> {
        check_input(self, img)?;
        check_label(label, self.num_classes)?;
        let trace = self.run_forward(img);
        let loss = cross_entropy(&trace.logits, label)?;
        let g = self.run_backward(&trace, label, true);
        Ok((loss, g.params.expect("requested")))
    }

    fn to_chw(&self, img: &Image) -> Vec<f64> {
        let (h, w, c) = self.input_shape;
        let mut out = vec![0.0; h * w * c];
        for (p, px) in img.data().chunks_exact(c).enumerate() {
            for (ch, &v) in px.iter().enumerate() {
                out[ch * h * w + p] = v;
            }
        }
        out
    }

    fn run_forward(&self, img: &Image) -> Trace {
        let (h, w, c) = self.input_shape;
        let l = self.layout;
        let p = &self.params;
        let input = self.to_chw(img);

        let z1 = conv_forward(&input, c, h, w, &p[l.conv1_w..l.conv1_b], &p[l.conv1_b..l.conv2_w], CONV1_FILTERS);
        let a1: Vec<f64> = z1.iter().map(|&v| v.max(0.0)).collect();
        let (pool1, pool1_idx) = maxpool_forward(&a1, CONV1_FILTERS, h, w);
        let (h1, w1) = (h / 2, w / 2);

        let z2 = conv_forward(&pool1, CONV1_FILTERS, h1, w1, &p[l.conv2_w..l.conv2_b], &p[l.conv2_b..l.dense_w], CONV2_FILTERS);
        let a2: Vec<f64> = z2.iter().map(|&v| v.max(0.0)).collect();
        let (pool2, pool2_idx) = maxpool_forward(&a2, CONV2_FILTERS, h1, w1);

        let dw = &p[l.dense_w..l.dense_b];
        let db = &p[l.dense_b..l.total];
        let logits = (0..self.num_classes)
            .map(|k| {
                let row = &dw[k * l.features..(k + 1) * l.features];
                db[k] + row.iter().zip(&pool2).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();

        Trace {
            input,
            z1,
            pool1,
            pool1_idx,
            z2,
            pool2_idx,
            pool2,
            logits,
        }
    }

    fn run_backward(&self, t: &Trace, label: usize, want_params: bool) -> Grads {
        let (h, w, c) = self.input_shape;
        let (h1, w1) = (h / 2, w / 2);
        let l = self.layout;
        let p = &self.params;
        let mut gp = want_params.then(|| vec![0.0; l.total]);

        let mut dlogits = softmax(&t.logits);
        dlogits[label] -= 1.0;

        let dw = &p[l.dense_w..l.dense_b];
        let mut dpool2 = vec![0.0; l.features];
        for (k, &g) in dlogits.iter().enumerate() {
            let row = &dw[k * l.features..(k + 1) * l.features];
            for (d, &wv) in dpool2.iter_mut().zip(row) {
                *d += g * wv;
            }
            if let Some(gp) = gp.as_mut() {
                gp[l.dense_b + k] = g;
                let grow = &mut gp[l.dense_w + k * l.features..l.dense_w + (k + 1) * l.features];
                for (gw, &a) in grow.iter_mut().zip(&t.pool2) {
                    *gw = g * a;
                }
            }
        }

        let mut dz2 = vec![0.0; t.z2.len()];
        for (&idx, &g) in t.pool2_idx.iter().zip(&dpool2) {
            dz2[idx] += g;
        }
        relu_backward(&mut dz2, &t.z2);

        let (dpool1, gw2, gb2) = conv_backward(&t.pool1, CONV1_FILTERS, h1, w1, &p[l.conv2_w..l.conv2_b], CONV2_FILTERS, &dz2, want_params);
        if let Some(gp) = gp.as_mut() {
            gp[l.conv2_w..l.conv2_b].copy_from_slice(&gw2);
            gp[l.conv2_b..l.dense_w].copy_from_slice(&gb2);
        }

        let mut dz1 = vec![0.0; t.z1.len()];
        for (&idx, &g) in t.pool1_idx.iter().zip(&dpool1) {
            dz1[idx] += g;
        }
        relu_backward(&mut dz1, &t.z1);

        let (dinput, gw1, gb1) = conv_backward(&t.input, c, h, w, &p[l.conv1_w..l.conv1_b], CONV1_FILTERS, &dz1, want_params);
        if let Some(gp) = gp.as_mut() {
            gp[l.conv1_w..l.conv1_b].copy_from_slice(&gw1);
            gp[l.conv1_b..l.conv2_w].copy_from_slice(&gb1);
        }

        Grads {
            input: dinput,
            params: gp,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }

    /// Checkpoint layout: `TCNN`, version, `H W C classes` (u32 LE), parameter
    /// count (u64 LE), then the flat `f64` parameters.
    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        let (h, w, c) = self.input_shape;
        for v in [h, w, c, self.num_classes] {
            out.write_all(&(v as u32).to_le_bytes())?;
        }
        out.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for v in &self.params {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(input: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a TCNN checkpoint".into()));
        }
        let mut u32buf = [0u8; 4];
        let mut read_u32 = |input: &mut dyn Read| -> Result<u32> {
            input.read_exact(&mut u32buf)?;
            Ok(u32::from_le_bytes(u32buf))
        };
        let version = read_u32(input)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let h = read_u32(input)? as usize;
        let w = read_u32(input)? as usize;
        let c = read_u32(input)? as usize;
        let classes = read_u32(input)? as usize;
        let mut model = Self::new((h, w, c), classes, 0)?;
        let mut u64buf = [0u8; 8];
        input.read_exact(&mut u64buf)?;
        let n = u64::from_le_bytes(u64buf) as usize;
        if n != model.layout.total {
            return Err(Error::Format(format!(
                "checkpoint holds {n} parameters, architecture needs {}",
                model.layout.total
            )));
        }
        let mut buf = vec![0u8; n * 8];
        input.read_exact(&mut buf)?;
        let params: Vec<f64> = buf.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("checkpoint contains non-finite parameters".into()));
        }
        model.params = params;
        Ok(model)
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"TCNN";
const CHECKPOINT_VERSION: u32 = 1;

impl Classifier for TinyCnn {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn input_shape(&self) -> (usize, usize, usize) {
        self.input_shape
    }

    fn forward(&self, img: &Image) -> Result<Vec<f64>> {
        check_input(self, img)?;
        Ok(self.run_forward(img).logits)
    }

    fn forward_backward(&self, img: &Image, label: usize) -> Result<InputGradient> {
        check_input(self, img)?;
        check_label(label, self.num_classes)?;
        let trace = self.run_forward(img);
        let loss = cross_entropy(&trace.logits, label)?;
        let g = self.run_backward(&trace, label, false);
        let (h, w, c) = self.input_shape;
        let grad = Image::from_fn(h, w, c, |y, x, ch| g.input[ch * h * w + y * w + x]);
        Ok(InputGradient {
            logits: trace.logits,
            loss,
            grad,
        })
    }
}

fn relu_backward(grad: &mut [f64], pre: &[f64]) {
    for (g, &z) in grad.iter_mut().zip(pre) {
        if z <= 0.0 {
            *g = 0.0;
        }
    }
}

fn pad_chw(x: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (hp, wp) = (h + 2, w + 2);
    let mut out = vec![0.0; c * hp * wp];
    for ch in 0..c {
        for y in 0..h {
            let src = &x[ch * h * w + y * w..ch * h * w + (y + 1) * w];
            let dst = ch * hp * wp + (y + 1) * wp + 1;
            out[dst..dst + w].copy_from_slice(src);
        }
    }
    out
}

/// 3x3 "same" correlation, channel-major in and out.
fn conv_forward(x: &[f64], cin: usize, h: usize, w: usize, weights: &[f64], bias: &[f64], cout: usize) -> Vec<f64> {
    let xp = pad_chw(x, cin, h, w);
    let wp = w + 2;
    let plane = (h + 2) * wp;
    let mut out = vec![0.0; cout * h * w];
    for o in 0..cout {
        let dst = &mut out[o * h * w..(o + 1) * h * w];
        dst.iter_mut().for_each(|v| *v = bias[o]);
        for i in 0..cin {
            let src = &xp[i * plane..(i + 1) * plane];
            let k = &weights[(o * cin + i) * 9..(o * cin + i + 1) * 9];
            for y in 0..h {
                let row = &mut dst[y * w..(y + 1) * w];
                for ky in 0..3 {
                    let srow = &src[(y + ky) * wp..(y + ky) * wp + wp];
                    for kx in 0..3 {
                        let kv = k[ky * 3 + kx];
                        for (x, r) in row.iter_mut().enumerate() {
                            *r += kv * srow[x + kx];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Returns `(d input, d weights, d bias)`; weight gradients are empty unless requested.
#[allow(clippy::too_many_arguments)]
fn conv_backward(
    x: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    cout: usize,
    dout: &[f64],
    want_params: bool,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let wp = w + 2;
    let plane = (h + 2) * wp;
    let xp = want_params.then(|| pad_chw(x, cin, h, w));
    let mut dxp = vec![0.0; cin * plane];
    let mut dw = if want_params { vec![0.0; weights.len()] } else { Vec::new() };
    let mut db = if want_params { vec![0.0; cout] } else { Vec::new() };
    for o in 0..cout {
        let g = &dout[o * h * w..(o + 1) * h * w];
        if want_params {
            db[o] = g.iter().sum();
        }
        for i in 0..cin {
            let base = (o * cin + i) * 9;
            for ky in 0..3 {
                for kx in 0..3 {
                    let kv = weights[base + ky * 3 + kx];
                    let mut acc = 0.0;
                    for y in 0..h {
                        let grow = &g[y * w..(y + 1) * w];
                        let off = i * plane + (y + ky) * wp + kx;
                        let drow = &mut dxp[off..off + w];
                        for (d, &gv) in drow.iter_mut().zip(grow) {
                            *d += kv * gv;
                        }
                        if let Some(xp) = &xp {
                            acc += xp[off..off + w].iter().zip(grow).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                    if want_params {
                        dw[base + ky * 3 + kx] = acc;
                    }
                }
            }
        }
    }
    let mut dx = vec![0.0; cin * h * w];
    for ch in 0..cin {
        for y in 0..h {
            let src = ch * plane + (y + 1) * wp + 1;
            dx[ch * h * w + y * w..ch * h * w + (y + 1) * w].copy_from_slice(&dxp[src..src + w]);
        }
    }
    (dx, dw, db)
}

/// 2x2/2 max pooling; ties pick the first element in raster order.
fn maxpool_forward(x: &[f64], c: usize, h: usize, w: usize) -> (Vec<f64>, Vec<usize>) {
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * ho * wo);
    let mut idx = Vec::with_capacity(c * ho * wo);
    for ch in 0..c {
        for y in 0..ho {
            for xo in 0..wo {
                let mut best = ch * h * w + 2 * y * w + 2 * xo;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let j = ch * h * w + (2 * y + dy) * w + 2 * xo + dx;
                    if x[j] > x[best] {
                        best = j;
                    }
                }
                out.push(x[best]);
                idx.push(best);
            }
        }
    }
    (out, idx)
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub image: Image,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            lr: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

/// Fraction of samples whose prediction matches the label.
pub fn accuracy(model: &dyn Classifier, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut hits = 0;
    for s in samples {
        hits += (predict(model, &s.image)?.0 == s.label) as usize;
    }
    Ok(hits as f64 / samples.len() as f64)
}

/// Per-sample SGD over a seeded shuffle; returns one [`EpochStats`] per epoch.
pub fn train(model: &mut TinyCnn, train_set: &[Sample], test_set: Option<&[Sample]>, cfg: TrainConfig) -> Result<Vec<EpochStats>> {
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for s in train_set.iter().chain(test_set.unwrap_or_default()) {
        check_input(model, &s.image)?;
        check_label(s.label, model.num_classes)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stats = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for &i in &order {
            let s = &train_set[i];
            let (loss, grad) = model.param_grad(&s.image, s.label)?;
            loss_sum += loss;
            if cfg.lr != 0.0 {
                for (p, g) in model.params.iter_mut().zip(&grad) {
                    *p -= cfg.lr * g;
                }
            }
        }
        stats.push(EpochStats {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: accuracy(model, train_set)?,
            test_accuracy: test_set.map(|t| accuracy(model, t)).transpose()?,
        });
    }
    Ok(stats)
}
