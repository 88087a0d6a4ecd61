//! Differentiable motion-blur synthesis.
//!
//! The object and background layers are translated along their motion vectors
//! in `N` sub-steps; slot `i` of the resulting stack is shifted by `i·θ/N`, so
//! slot 0 is the untouched image. Each output pixel is a convex combination of
//! the first `m` slots at that location, with weights given by a softmax over
//! per-pixel (or per-region) logits.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::imgcore::{translate, translate_grad, Image, Padding, SaliencyMask, Translation};
use crate::model::softmax;
use crate::saliency::region_split;

/// Slot-0 logit that makes a kernel a delta to double precision
/// (off-slot weights ~1e-26).
pub const HARD_DELTA_LOGIT: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSpec {
    pub theta_o: Translation,
    pub theta_b: Translation,
    pub n_steps: usize,
    pub eps_theta: f64,
    pub padding: Padding,
}

impl MotionSpec {
    pub fn new(theta_o: Translation, theta_b: Translation, n_steps: usize, eps_theta: f64, padding: Padding) -> Result<Self> {
        let spec = Self {
            theta_o,
            theta_b,
            n_steps,
            eps_theta,
            padding,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Still motion with `n_steps` sub-steps and zero padding.
    pub fn still(n_steps: usize, eps_theta: f64) -> Result<Self> {
        Self::new(Translation::ZERO, Translation::ZERO, n_steps, eps_theta, Padding::Zero)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::InvalidInput("n_steps must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.eps_theta) {
            return Err(Error::InvalidInput(format!("eps_theta {} outside [0, 1]", self.eps_theta)));
        }
        // tolerate rounding from the caller's own clamping
        let bound = self.eps_theta + 1e-12;
        if self.theta_o.norm_inf() > bound || self.theta_b.norm_inf() > bound {
            return Err(Error::InvalidInput(format!(
                "translations {:?}/{:?} exceed eps_theta {}",
                self.theta_o, self.theta_b, self.eps_theta
            )));
        }
        Ok(())
    }
}

/// Kernel support for a real-valued bound `eps`: `floor(eps)` clamped to `[1, n_steps]`.
pub fn support_for(eps: f64, n_steps: usize) -> usize {
    let m = if eps.is_finite() && eps > 1.0 { eps.floor() as usize } else { 1 };
    m.clamp(1, n_steps.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMode {
    PerPixel,
    /// One vector for the object region, one for the background.
    PerRegion,
}

/// Kernel logits over `support` slots.
///
/// `PerPixel` stores `height * width * support` values in raster order;
/// `PerRegion` stores the object vector followed by the background vector.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField {
    mode: KernelMode,
    support: usize,
    height: usize,
    width: usize,
    logits: Vec<f64>,
}

impl KernelField {
    pub fn new(mode: KernelMode, support: usize, height: usize, width: usize, logits: Vec<f64>) -> Result<Self> {
        if support == 0 {
            return Err(Error::InvalidInput("kernel support must be at least 1".into()));
        }
        let expected = match mode {
            KernelMode::PerPixel => height * width * support,
            KernelMode::PerRegion => 2 * support,
        };
        if logits.len() != expected {
            return Err(Error::shape(format!("{expected} logits"), logits.len()));
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("kernel logits must be finite".into()));
        }
        Ok(Self {
            mode,
            support,
            height,
            width,
            logits,
        })
    }

    /// Every vector set to `[logit0, 0, 0, ...]`.
    pub fn delta(mode: KernelMode, support: usize, height: usize, width: usize, logit0: f64) -> Self {
        let vectors = match mode {
            KernelMode::PerPixel => height * width,
            KernelMode::PerRegion => 2,
        };
        let mut logits = vec![0.0; vectors * support];
        for v in logits.chunks_exact_mut(support) {
            v[0] = logit0;
        }
        Self {
            mode,
            support,
            height,
            width,
            logits,
        }
    }

    /// All-zero logits, i.e. weights `1/support` everywhere.
    pub fn uniform(mode: KernelMode, support: usize, height: usize, width: usize) -> Self {
        Self::delta(mode, support, height, width, 0.0)
    }

    pub fn mode(&self) -> KernelMode {
        self.mode
    }

    pub fn support(&self) -> usize {
        self.support
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    pub fn vectors(&self) -> std::slice::ChunksExact<'_, f64> {
        self.logits.chunks_exact(self.support)
    }

    /// Object (`true`) or background (`false`) vector of a `PerRegion` field.
    pub fn region_logits(&self, object: bool) -> &[f64] {
        debug_assert_eq!(self.mode, KernelMode::PerRegion);
        let m = self.support;
        if object {
            &self.logits[..m]
        } else {
            &self.logits[m..2 * m]
        }
    }

    pub fn region_logits_mut(&mut self, object: bool) -> &mut [f64] {
        debug_assert_eq!(self.mode, KernelMode::PerRegion);
        let m = self.support;
        if object {
            &mut self.logits[..m]
        } else {
            &mut self.logits[m..2 * m]
        }
    }

    /// Softmax weights of every stored vector, in storage order.
    pub fn weights(&self) -> Vec<Vec<f64>> {
        self.vectors().map(softmax).collect()
    }

    /// Expands a `PerRegion` field into the equivalent `PerPixel` field.
    pub fn to_per_pixel(&self, mask: &SaliencyMask) -> Self {
        match self.mode {
            KernelMode::PerPixel => self.clone(),
            KernelMode::PerRegion => {
                let mut logits = Vec::with_capacity(mask.bits().len() * self.support);
                for &inside in mask.bits() {
                    logits.extend_from_slice(self.region_logits(inside));
                }
                Self {
                    mode: KernelMode::PerPixel,
                    support: self.support,
                    height: mask.height(),
                    width: mask.width(),
                    logits,
                }
            }
        }
    }

    /// Header `mode:u8, m:u32, H:u32, W:u32` followed by the logits as `f64` LE.
    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        let mode = match self.mode {
            KernelMode::PerPixel => 0u8,
            KernelMode::PerRegion => 1u8,
        };
        out.write_all(&[mode])?;
        for v in [self.support, self.height, self.width] {
            out.write_all(&(v as u32).to_le_bytes())?;
        }
        for v in &self.logits {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(input: &mut impl Read) -> Result<Self> {
        let mut mode = [0u8; 1];
        input.read_exact(&mut mode)?;
        let mode = match mode[0] {
            0 => KernelMode::PerPixel,
            1 => KernelMode::PerRegion,
            other => return Err(Error::Format(format!("unknown kernel mode {other}"))),
        };
        let mut dims = [0usize; 3];
        for d in &mut dims {
            let mut b = [0u8; 4];
            input.read_exact(&mut b)?;
            *d = u32::from_le_bytes(b) as usize;
        }
        let [support, height, width] = dims;
        let count = match mode {
            KernelMode::PerPixel => height * width * support,
            KernelMode::PerRegion => 2 * support,
        };
        let mut buf = vec![0u8; count * 8];
        input.read_exact(&mut buf)?;
        let logits = buf.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        Self::new(mode, support, height, width, logits)
    }
}

/// Lifts slot 0 to the maximum logit of each vector, making it the
/// largest weight. Idempotent.
pub fn project_kernel(kf: &KernelField) -> KernelField {
    let mut out = kf.clone();
    project_kernel_in_place(&mut out);
    out
}

pub fn project_kernel_in_place(kf: &mut KernelField) {
    let m = kf.support;
    for v in kf.logits.chunks_exact_mut(m) {
        let top = v[1..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if top > v[0] {
            v[0] = top;
        }
    }
}

/// Component-wise clamp to `[-eps_theta, eps_theta]`.
pub fn project_translation(t: Translation, eps_theta: f64) -> Translation {
    let e = eps_theta.max(0.0);
    Translation {
        tx: t.tx.clamp(-e, e),
        ty: t.ty.clamp(-e, e),
    }
}

/// Translated object and background layers, one slice per sub-motion step.
#[derive(Debug, Clone)]
pub struct SubMotionStack {
    slices: Vec<Image>,
    object: Image,
    background: Image,
    mask: SaliencyMask,
    spec: MotionSpec,
}

impl SubMotionStack {
    pub fn slices(&self) -> &[Image] {
        &self.slices
    }

    pub fn depth(&self) -> usize {
        self.slices.len()
    }

    pub fn mask(&self) -> &SaliencyMask {
        &self.mask
    }

    pub fn spec(&self) -> &MotionSpec {
        &self.spec
    }

    pub fn object_layer(&self) -> &Image {
        &self.object
    }

    pub fn background_layer(&self) -> &Image {
        &self.background
    }

    fn shape(&self) -> (usize, usize, usize) {
        self.slices[0].shape()
    }
}

/// Slice `i` = `translate(img ⊙ S, i·θ_o/N) + translate(img ⊙ (1-S), i·θ_b/N)`.
pub fn build_stack(img: &Image, s: &SaliencyMask, spec: &MotionSpec) -> Result<SubMotionStack> {
    build_stack_to_depth(img, s, spec, spec.n_steps)
}

/// As [`build_stack`] but materializes only the first `depth` slices, which is
/// all a kernel of support `depth` reads.
pub fn build_stack_to_depth(img: &Image, s: &SaliencyMask, spec: &MotionSpec, depth: usize) -> Result<SubMotionStack> {
    spec.validate()?;
    if depth == 0 || depth > spec.n_steps {
        return Err(Error::InvalidInput(format!("stack depth {depth} outside [1, {}]", spec.n_steps)));
    }
    let (object, background) = region_split(img, s)?;
    let n = spec.n_steps as f64;
    let mut slices = Vec::with_capacity(depth);
    slices.push(img.clone());
    for i in 1..depth {
        let k = i as f64 / n;
        let mut slice = translate(&object, spec.theta_o.scaled(k), spec.padding)?;
        let moved_bg = translate(&background, spec.theta_b.scaled(k), spec.padding)?;
        for (a, b) in slice.data_mut().iter_mut().zip(moved_bg.data()) {
            *a += b;
        }
        slices.push(slice);
    }
    Ok(SubMotionStack {
        slices,
        object,
        background,
        mask: s.clone(),
        spec: *spec,
    })
}

fn check_field(stack: &SubMotionStack, kf: &KernelField) -> Result<()> {
    if kf.support > stack.depth() {
        return Err(Error::InvalidInput(format!(
            "kernel support {} exceeds stack depth {}",
            kf.support,
            stack.depth()
        )));
    }
    let (h, w, _) = stack.shape();
    if kf.mode == KernelMode::PerPixel && (kf.height, kf.width) != (h, w) {
        return Err(Error::shape(format!("kernel field {h}x{w}"), format!("{}x{}", kf.height, kf.width)));
    }
    Ok(())
}

/// Per-pixel weight vectors, shared by region when the field is `PerRegion`.
fn pixel_weights(stack: &SubMotionStack, kf: &KernelField) -> Vec<Vec<f64>> {
    match kf.mode {
        KernelMode::PerPixel => kf.weights(),
        KernelMode::PerRegion => {
            let obj = softmax(kf.region_logits(true));
            let bg = softmax(kf.region_logits(false));
            stack
                .mask
                .bits()
                .iter()
                .map(|&inside| if inside { obj.clone() } else { bg.clone() })
                .collect()
        }
    }
}

fn combine(stack: &SubMotionStack, weights: &[Vec<f64>], m: usize) -> Image {
    let (h, w, c) = stack.shape();
    let base = stack.slices[0].data();
    let mut out = stack.slices[0].clone();
    let data = out.data_mut();
    // written as s0 + Σ_{i≥1} w_i (s_i - s0) so identical slices reproduce s0 exactly
    for (p, wp) in weights.iter().enumerate().take(h * w) {
        for ch in 0..c {
            let k = p * c + ch;
            let mut acc = 0.0;
            for i in 1..m {
                acc += wp[i] * (stack.slices[i].data()[k] - base[k]);
            }
            data[k] = base[k] + acc;
        }
    }
    out
}

/// `X_p = Σ_{i<m} stack[i]_p · weights(p)[i]`.
pub fn synthesize(stack: &SubMotionStack, kf: &KernelField) -> Result<Image> {
    check_field(stack, kf)?;
    let weights = pixel_weights(stack, kf);
    Ok(combine(stack, &weights, kf.support))
}

/// Gradients of `<upstream, synthesize(stack, kf)>`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthGrad {
    /// Same layout as the kernel field's logits.
    pub logits: Vec<f64>,
    pub theta_o: (f64, f64),
    pub theta_b: (f64, f64),
}

/// Backpropagates `upstream` to the kernel logits and both translations.
pub fn synthesize_grad(stack: &SubMotionStack, kf: &KernelField, upstream: &Image) -> Result<SynthGrad> {
    check_field(stack, kf)?;
    let (h, w, c) = stack.shape();
    if upstream.shape() != (h, w, c) {
        return Err(Error::shape(format!("{:?}", (h, w, c)), format!("{:?}", upstream.shape())));
    }
    let m = kf.support;
    let weights = pixel_weights(stack, kf);
    let out = combine(stack, &weights, m);
    let u = upstream.data();

    let mut dlogits = vec![0.0; kf.logits.len()];
    let mut a = vec![0.0; m];
    for (p, wp) in weights.iter().enumerate() {
        let px = p * c..(p + 1) * c;
        let ux: f64 = u[px.clone()].iter().zip(&out.data()[px.clone()]).map(|(x, y)| x * y).sum();
        for (i, ai) in a.iter_mut().enumerate() {
            *ai = u[px.clone()].iter().zip(&stack.slices[i].data()[px.clone()]).map(|(x, y)| x * y).sum();
        }
        let dst = match kf.mode {
            KernelMode::PerPixel => p * m,
            KernelMode::PerRegion => {
                if stack.mask.bits()[p] {
                    0
                } else {
                    m
                }
            }
        };
        for i in 0..m {
            dlogits[dst + i] += wp[i] * (a[i] - ux);
        }
    }

    let n = stack.spec.n_steps as f64;
    let mut d_o = (0.0, 0.0);
    let mut d_b = (0.0, 0.0);
    let mut weighted = Image::zeros(h, w, c);
    for i in 1..m {
        let mut any = false;
        for (p, wp) in weights.iter().enumerate() {
            for ch in 0..c {
                let k = p * c + ch;
                let v = u[k] * wp[i];
                weighted.data_mut()[k] = v;
                any |= v != 0.0;
            }
        }
        if !any {
            continue;
        }
        let k = i as f64 / n;
        let spec = &stack.spec;
        let (gx, gy) = translate_grad(&stack.object, spec.theta_o.scaled(k), &weighted, spec.padding)?;
        d_o.0 += k * gx;
        d_o.1 += k * gy;
        let (gx, gy) = translate_grad(&stack.background, spec.theta_b.scaled(k), &weighted, spec.padding)?;
        d_b.0 += k * gx;
        d_b.1 += k * gy;
    }

    Ok(SynthGrad {
        logits: dlogits,
        theta_o: d_o,
        theta_b: d_b,
    })
}
