//! Projected sign-momentum optimization of blur kernels and translations, the
//! five attack variants, and the additive / fixed-blur baselines.

use std::path::PathBuf;

use crate::blursynth::{
    build_stack_to_depth, project_kernel_in_place, project_translation, support_for, synthesize, synthesize_grad,
    KernelField, KernelMode, MotionSpec, HARD_DELTA_LOGIT,
};
use crate::error::{Error, Result};
use crate::imgcore::{conv2d_fixed, disk_kernel, gaussian_kernel, Image, Padding, SaliencyMask, Translation};
use crate::model::{argmax, check_input, check_label, predict, softmax, Classifier};

/// Slot-0 logit of the initial (optimizable) delta kernels.
pub const INIT_DELTA_LOGIT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Independent kernel per pixel, one translation shared by object and background.
    Pixel,
    /// Blur the object only; background kernel and translation stay frozen.
    Obj,
    /// Blur the background only.
    Bg,
    /// One kernel and one translation for the whole image.
    ImageWide,
    /// Region kernels with independent object and background translations.
    Full,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Pixel, Variant::Obj, Variant::Bg, Variant::ImageWide, Variant::Full];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Pixel => "pixel",
            Variant::Obj => "obj",
            Variant::Bg => "bg",
            Variant::ImageWide => "image",
            Variant::Full => "full",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pixel" => Ok(Variant::Pixel),
            "obj" => Ok(Variant::Obj),
            "bg" => Ok(Variant::Bg),
            "image" => Ok(Variant::ImageWide),
            "full" => Ok(Variant::Full),
            other => Err(Error::InvalidInput(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub variant: Variant,
    /// Kernel support bound; `floor(eps)` slots are usable.
    pub eps: f64,
    /// L∞ bound on translation rates.
    pub eps_theta: f64,
    pub n_steps: usize,
    pub iterations: usize,
    /// Sign step on kernel logits.
    pub step_kernel: f64,
    /// Sign step on translations, in pixels per iteration.
    pub step_theta_px: f64,
    /// Momentum decay; 0 gives plain sign ascent.
    pub mu: f64,
    /// Per-run seed carried into reports; the loop itself draws no random numbers.
    pub seed: u64,
    pub early_stop: bool,
    pub padding: Padding,
    /// Restricts object motion to the ray at this angle (degrees, counter-clockwise
    /// from +x on screen).
    pub direction_deg: Option<f64>,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Full,
            eps: 15.0,
            eps_theta: 0.4,
            n_steps: 51,
            iterations: 10,
            step_kernel: 1.0,
            step_theta_px: 1.5,
            mu: 1.0,
            seed: 0,
            early_stop: true,
            padding: Padding::Zero,
            direction_deg: None,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.iterations < 1 {
            return bad("iterations must be at least 1".into());
        }
        if !(self.eps >= 1.0 && self.eps.is_finite()) {
            return bad(format!("eps must be >= 1, got {}", self.eps));
        }
        if !(0.0..=1.0).contains(&self.eps_theta) {
            return bad(format!("eps_theta must lie in [0, 1], got {}", self.eps_theta));
        }
        if self.n_steps < 1 {
            return bad("n_steps must be at least 1".into());
        }
        if !(self.step_kernel >= 0.0 && self.step_theta_px >= 0.0 && self.mu >= 0.0) {
            return bad("step sizes and momentum must be non-negative".into());
        }
        if let Some(d) = self.direction_deg {
            if !d.is_finite() {
                return bad("direction must be finite".into());
            }
        }
        Ok(())
    }

    pub fn support(&self) -> usize {
        support_for(self.eps, self.n_steps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSummary {
    /// Softmax weights of the object and background vectors.
    Regions { object: Vec<f64>, background: Vec<f64> },
    /// Mean weight per slot across pixels.
    PerPixel { mean_weights: Vec<f64> },
}

impl KernelSummary {
    fn of(kf: &KernelField) -> Self {
        match kf.mode() {
            KernelMode::PerRegion => KernelSummary::Regions {
                object: softmax(kf.region_logits(true)),
                background: softmax(kf.region_logits(false)),
            },
            KernelMode::PerPixel => {
                let weights = kf.weights();
                let mut mean = vec![0.0; kf.support()];
                for w in &weights {
                    for (m, v) in mean.iter_mut().zip(w) {
                        *m += v;
                    }
                }
                let n = weights.len().max(1) as f64;
                mean.iter_mut().for_each(|m| *m /= n);
                KernelSummary::PerPixel { mean_weights: mean }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub id: String,
    pub label: usize,
    pub clean_pred: usize,
    pub final_pred: usize,
    /// `final_pred != label`.
    pub success: bool,
    /// Loss at each executed iteration, before its update.
    pub loss_trace: Vec<f64>,
    pub iterations_used: usize,
    /// Loss of the returned image.
    pub final_loss: f64,
    pub theta_o: Translation,
    pub theta_b: Translation,
    pub kernel: KernelSummary,
    pub output: Option<PathBuf>,
}

/// Optimizer state after the projections of one iteration.
#[derive(Debug)]
pub struct IterationState<'a> {
    pub iteration: usize,
    pub kernel: &'a KernelField,
    pub theta_o: Translation,
    pub theta_b: Translation,
    pub eps_theta: f64,
    pub center_dominance: bool,
}

impl IterationState<'_> {
    /// Checks simplex weights, slot-0 dominance (when enforced) and the translation bound.
    pub fn check_feasible(&self) -> std::result::Result<(), String> {
        for (i, w) in self.kernel.weights().iter().enumerate() {
            let s: f64 = w.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(format!("vector {i}: weights sum to {s}"));
            }
            if self.center_dominance && w.iter().any(|&v| v > w[0]) {
                return Err(format!("vector {i}: slot 0 is not maximal ({w:?})"));
            }
        }
        for t in [self.theta_o, self.theta_b] {
            if t.norm_inf() > self.eps_theta {
                return Err(format!("translation {t:?} exceeds {}", self.eps_theta));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ThetaWiring {
    Independent,
    Shared,
    ObjectOnly,
    BackgroundOnly,
}

/// Which parameters move and how they are tied.
#[derive(Debug, Clone, Copy)]
struct Wiring {
    theta: ThetaWiring,
    /// `[object, background]` for region fields; ignored for per-pixel fields.
    kernel_trainable: [bool; 2],
    tie_regions: bool,
    center_dominance: bool,
}

impl Wiring {
    fn for_variant(v: Variant) -> Self {
        let (theta, kernel_trainable, tie_regions) = match v {
            Variant::Pixel => (ThetaWiring::Shared, [true, true], false),
            Variant::Obj => (ThetaWiring::ObjectOnly, [true, false], false),
            Variant::Bg => (ThetaWiring::BackgroundOnly, [false, true], false),
            Variant::ImageWide => (ThetaWiring::Shared, [true, true], true),
            Variant::Full => (ThetaWiring::Independent, [true, true], false),
        };
        Self {
            theta,
            kernel_trainable,
            tie_regions,
            center_dominance: true,
        }
    }

    fn any_kernel_trainable(&self) -> bool {
        self.kernel_trainable.iter().any(|&b| b)
    }
}

fn initial_kernel(variant: Variant, m: usize, h: usize, w: usize) -> KernelField {
    match variant {
        Variant::Pixel => KernelField::delta(KernelMode::PerPixel, m, h, w, INIT_DELTA_LOGIT),
        _ => {
            let mut kf = KernelField::delta(KernelMode::PerRegion, m, h, w, INIT_DELTA_LOGIT);
            match variant {
                Variant::Obj => kf.region_logits_mut(false)[0] = HARD_DELTA_LOGIT,
                Variant::Bg => kf.region_logits_mut(true)[0] = HARD_DELTA_LOGIT,
                _ => {}
            }
            kf
        }
    }
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `momentum = mu·momentum + g/‖g‖₁`; a zero gradient only decays the momentum.
fn accumulate(momentum: &mut [f64], grad: &[f64], mu: f64) {
    let l1: f64 = grad.iter().map(|v| v.abs()).sum();
    for (m, g) in momentum.iter_mut().zip(grad) {
        *m = mu * *m + if l1 > 0.0 { g / l1 } else { 0.0 };
    }
}

/// Translation parameter: either free in 2-D or a non-negative length along a ray.
#[derive(Debug, Clone, Copy)]
struct ThetaParam {
    value: Translation,
    momentum: [f64; 2],
    ray: Option<(f64, f64)>,
    length: f64,
}

impl ThetaParam {
    fn new(ray: Option<(f64, f64)>) -> Self {
        Self {
            value: Translation::ZERO,
            momentum: [0.0; 2],
            ray,
            length: 0.0,
        }
    }

    fn step(&mut self, grad: (f64, f64), cfg: &AttackConfig, width: usize, height: usize) {
        let (sx, sy) = (cfg.step_theta_px / width as f64, cfg.step_theta_px / height as f64);
        match self.ray {
            None => {
                accumulate(&mut self.momentum, &[grad.0, grad.1], cfg.mu);
                let t = Translation {
                    tx: self.value.tx + sx * sign(self.momentum[0]),
                    ty: self.value.ty + sy * sign(self.momentum[1]),
                };
                self.value = project_translation(t, cfg.eps_theta);
            }
            Some((dx, dy)) => {
                let g = grad.0 * dx + grad.1 * dy;
                accumulate(&mut self.momentum[..1], &[g], cfg.mu);
                // the dominant axis moves by one pixel step per iteration
                let dominant = dx.abs().max(dy.abs());
                let step = sx.max(sy) / dominant;
                let max_len = cfg.eps_theta / dominant;
                self.length = (self.length + step * sign(self.momentum[0])).clamp(0.0, max_len);
                self.value = project_translation(
                    Translation {
                        tx: self.length * dx,
                        ty: self.length * dy,
                    },
                    cfg.eps_theta,
                );
            }
        }
    }
}

struct LoopOutcome {
    adv: Image,
    kernel: KernelField,
    theta_o: Translation,
    theta_b: Translation,
    loss_trace: Vec<f64>,
    final_pred: usize,
    final_loss: f64,
}

#[allow(clippy::too_many_arguments)]
fn run_loop(
    model: &dyn Classifier,
    img: &Image,
    label: usize,
    mask: &SaliencyMask,
    cfg: &AttackConfig,
    mut kernel: KernelField,
    wiring: Wiring,
    observer: &mut dyn FnMut(&IterationState),
) -> Result<LoopOutcome> {
    let (h, w, _) = img.shape();
    let m = kernel.support();
    let ray = cfg.direction_deg.map(|d| {
        let r = d.to_radians();
        (r.cos(), -r.sin())
    });
    // the ray constrains whichever parameter carries object motion
    let (mut theta_o, mut theta_b) = match wiring.theta {
        ThetaWiring::Independent | ThetaWiring::ObjectOnly | ThetaWiring::Shared => {
            (ThetaParam::new(ray), ThetaParam::new(None))
        }
        ThetaWiring::BackgroundOnly => (ThetaParam::new(None), ThetaParam::new(None)),
    };
    let mut kernel_momentum = vec![0.0; kernel.logits().len()];
    let mut loss_trace = Vec::with_capacity(cfg.iterations);
    let current = |to: &ThetaParam, tb: &ThetaParam| match wiring.theta {
        ThetaWiring::Shared => (to.value, to.value),
        _ => (to.value, tb.value),
    };

    let mut fooled = None;
    for iteration in 0..cfg.iterations {
        let (to, tb) = current(&theta_o, &theta_b);
        let spec = MotionSpec::new(to, tb, cfg.n_steps, cfg.eps_theta, cfg.padding)?;
        let stack = build_stack_to_depth(img, mask, &spec, m)?;
        let x = synthesize(&stack, &kernel)?;
        let ig = model.forward_backward(&x, label)?;
        if cfg.early_stop && argmax(&ig.logits) != label {
            fooled = Some((x, ig));
            break;
        }
        loss_trace.push(ig.loss);
        let sg = synthesize_grad(&stack, &kernel, &ig.grad)?;

        if wiring.any_kernel_trainable() && cfg.step_kernel > 0.0 {
            let mut g = sg.logits;
            if kernel.mode() == KernelMode::PerRegion {
                if wiring.tie_regions {
                    let (a, b) = g.split_at_mut(m);
                    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                        let s = *x + *y;
                        *x = s;
                        *y = s;
                    }
                }
                for (r, trainable) in wiring.kernel_trainable.iter().enumerate() {
                    if !trainable {
                        g[r * m..(r + 1) * m].iter_mut().for_each(|v| *v = 0.0);
                    }
                }
            }
            accumulate(&mut kernel_momentum, &g, cfg.mu);
            let frozen = |i: usize| kernel.mode() == KernelMode::PerRegion && !wiring.kernel_trainable[i / m];
            let steps: Vec<(usize, f64)> = kernel_momentum
                .iter()
                .enumerate()
                .filter(|(i, _)| !frozen(*i))
                .map(|(i, &mv)| (i, cfg.step_kernel * sign(mv)))
                .collect();
            let logits = kernel.logits_mut();
            for (i, d) in steps {
                logits[i] += d;
            }
            if wiring.center_dominance {
                project_kernel_in_place(&mut kernel);
            }
        }

        match wiring.theta {
            ThetaWiring::Independent => {
                theta_o.step(sg.theta_o, cfg, w, h);
                theta_b.step(sg.theta_b, cfg, w, h);
            }
            ThetaWiring::Shared => {
                theta_o.step((sg.theta_o.0 + sg.theta_b.0, sg.theta_o.1 + sg.theta_b.1), cfg, w, h);
            }
            ThetaWiring::ObjectOnly => theta_o.step(sg.theta_o, cfg, w, h),
            ThetaWiring::BackgroundOnly => theta_b.step(sg.theta_b, cfg, w, h),
        }

        let (to, tb) = current(&theta_o, &theta_b);
        let state = IterationState {
            iteration,
            kernel: &kernel,
            theta_o: to,
            theta_b: tb,
            eps_theta: cfg.eps_theta,
            center_dominance: wiring.center_dominance,
        };
        #[cfg(debug_assertions)]
        if let Err(e) = state.check_feasible() {
            panic!("infeasible state after iteration {iteration}: {e}");
        }
        observer(&state);
    }

    let (to, tb) = current(&theta_o, &theta_b);
    let (adv, logits, loss) = match fooled {
        Some((x, ig)) => (x, ig.logits, ig.loss),
        None => {
            let spec = MotionSpec::new(to, tb, cfg.n_steps, cfg.eps_theta, cfg.padding)?;
            let stack = build_stack_to_depth(img, mask, &spec, m)?;
            let x = synthesize(&stack, &kernel)?;
            let ig = model.forward_backward(&x, label)?;
            (x, ig.logits, ig.loss)
        }
    };
    Ok(LoopOutcome {
        adv,
        kernel,
        theta_o: to,
        theta_b: tb,
        loss_trace,
        final_pred: argmax(&logits),
        final_loss: loss,
    })
}

fn check_attack_inputs(model: &dyn Classifier, img: &Image, label: usize, mask: &SaliencyMask, cfg: &AttackConfig) -> Result<()> {
    cfg.validate()?;
    check_input(model, img)?;
    check_label(label, model.num_classes())?;
    mask.ensure_matches(img)
}

fn report(id: &str, label: usize, clean_pred: usize, out: &LoopOutcome) -> AttackReport {
    AttackReport {
        id: id.to_string(),
        label,
        clean_pred,
        final_pred: out.final_pred,
        success: out.final_pred != label,
        iterations_used: out.loss_trace.len(),
        loss_trace: out.loss_trace.clone(),
        final_loss: out.final_loss,
        theta_o: out.theta_o,
        theta_b: out.theta_b,
        kernel: KernelSummary::of(&out.kernel),
        output: None,
    }
}

/// Motion-blur attack: optimizes kernels and translations with sign-momentum
/// ascent on the classification loss, projecting after every step.
pub fn abba_attack(
    model: &dyn Classifier,
    img: &Image,
    label: usize,
    mask: &SaliencyMask,
    cfg: &AttackConfig,
) -> Result<(Image, AttackReport)> {
    abba_attack_observed(model, img, label, mask, cfg, &mut |_| {})
}

/// [`abba_attack`] with a callback invoked after every iteration's projections.
pub fn abba_attack_observed(
    model: &dyn Classifier,
    img: &Image,
    label: usize,
    mask: &SaliencyMask,
    cfg: &AttackConfig,
    observer: &mut dyn FnMut(&IterationState),
) -> Result<(Image, AttackReport)> {
    check_attack_inputs(model, img, label, mask, cfg)?;
    let clean_pred = predict(model, img)?.0;
    let (h, w, _) = img.shape();
    let kernel = initial_kernel(cfg.variant, cfg.support(), h, w);
    let out = run_loop(model, img, label, mask, cfg, kernel, Wiring::for_variant(cfg.variant), observer)?;
    let rep = report("", label, clean_pred, &out);
    Ok((out.adv, rep))
}

/// Camera-motion variant: kernels frozen uniform over all `n_steps` slots,
/// one translation shared by object and background, no slot-0 dominance.
pub(crate) fn uniform_kernel_attack(
    model: &dyn Classifier,
    img: &Image,
    label: usize,
    cfg: &AttackConfig,
    observer: &mut dyn FnMut(&IterationState),
) -> Result<(Image, AttackReport)> {
    let (h, w, _) = img.shape();
    let mask = SaliencyMask::filled(h, w, true);
    check_attack_inputs(model, img, label, &mask, cfg)?;
    let clean_pred = predict(model, img)?.0;
    let kernel = KernelField::uniform(KernelMode::PerRegion, cfg.n_steps, h, w);
    let wiring = Wiring {
        theta: ThetaWiring::Shared,
        kernel_trainable: [false, false],
        tie_regions: false,
        center_dominance: false,
    };
    let out = run_loop(model, img, label, &mask, cfg, kernel, wiring, observer)?;
    let rep = report("", label, clean_pred, &out);
    Ok((out.adv, rep))
}

fn check_eps_a(eps_a: f64) -> Result<()> {
    if eps_a > 0.0 && eps_a <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("eps_a must lie in (0, 1], got {eps_a}")))
    }
}

/// Clips `x` into the L∞ ball around `center` so that the *computed*
/// difference never exceeds `eps`, then into `[0, 1]`.
fn project_linf(x: f64, center: f64, eps: f64) -> f64 {
    let mut v = x.clamp(center - eps, center + eps);
    while v - center > eps {
        v = v.next_down();
    }
    while center - v > eps {
        v = v.next_up();
    }
    v.clamp(0.0, 1.0)
}

/// `clamp(img + eps_a·sign(∇J))`.
pub fn fgsm(model: &dyn Classifier, img: &Image, label: usize, eps_a: f64) -> Result<Image> {
    check_eps_a(eps_a)?;
    let (_, grad) = model.input_grad(img, label, Default::default())?;
    let mut adv = img.clone();
    for ((a, &x), &g) in adv.data_mut().iter_mut().zip(img.data()).zip(grad.data()) {
        *a = project_linf(x + eps_a * sign(g), x, eps_a);
    }
    Ok(adv)
}

/// Momentum iterative FGSM with step `eps_a / iterations` and L1-normalized momentum.
pub fn mifgsm(model: &dyn Classifier, img: &Image, label: usize, eps_a: f64, iterations: usize, mu: f64) -> Result<Image> {
    check_eps_a(eps_a)?;
    if iterations == 0 {
        return Err(Error::InvalidInput("iterations must be at least 1".into()));
    }
    let alpha = eps_a / iterations as f64;
    let mut momentum = vec![0.0; img.data().len()];
    let mut adv = img.clone();
    for _ in 0..iterations {
        let (_, grad) = model.input_grad(&adv, label, Default::default())?;
        accumulate(&mut momentum, grad.data(), mu);
        for ((a, &x), &m) in adv.data_mut().iter_mut().zip(img.data()).zip(&momentum) {
            *a = project_linf(*a + alpha * sign(m), x, eps_a);
        }
    }
    Ok(adv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlurKind {
    Gauss,
    Defocus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Region {
    #[default]
    Whole,
    Obj,
    Bg,
}

/// Fixed Gaussian (σ = `size`) or disk (diameter = `size`) blur, optionally
/// confined to one region with the complement copied from `img`.
pub fn blur_baseline(img: &Image, mask: &SaliencyMask, kind: BlurKind, size: f64, region: Region) -> Result<Image> {
    mask.ensure_matches(img)?;
    let kernel = match kind {
        BlurKind::Gauss => gaussian_kernel(size)?,
        BlurKind::Defocus => disk_kernel(size)?,
    };
    let blurred = conv2d_fixed(img, &kernel, Padding::Replicate)?;
    if region == Region::Whole {
        return Ok(blurred);
    }
    let c = img.channels();
    let mut out = img.clone();
    for (p, &inside) in mask.bits().iter().enumerate() {
        if inside == (region == Region::Obj) {
            let r = p * c..(p + 1) * c;
            out.data_mut()[r.clone()].copy_from_slice(&blurred.data()[r]);
        }
    }
    Ok(out)
}

/// Fraction of `advs` each model misclassifies.
pub fn evaluate(models: &[&dyn Classifier], advs: &[Image], labels: &[usize]) -> Result<Vec<f64>> {
    if advs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if advs.len() != labels.len() {
        return Err(Error::shape(format!("{} labels", advs.len()), labels.len()));
    }
    models
        .iter()
        .map(|m| {
            let mut fooled = 0;
            for (x, &y) in advs.iter().zip(labels) {
                check_label(y, m.num_classes())?;
                fooled += (predict(*m, x)?.0 != y) as usize;
            }
            Ok(fooled as f64 / advs.len() as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InputGradient, TinyCnn};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(h: usize, w: usize, c: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(h, w, c, |_, _, _| rng.random())
    }

    fn scaled_cnn(seed: u64) -> TinyCnn {
        let mut m = TinyCnn::new((8, 8, 3), 3, seed).unwrap();
        let p = m.params().iter().map(|v| v * 10.0).collect();
        m.set_params(p).unwrap();
        m
    }

    /// Logits that ignore the input entirely.
    struct Constant;

    impl Classifier for Constant {
        fn num_classes(&self) -> usize {
            3
        }
        fn input_shape(&self) -> (usize, usize, usize) {
            (8, 8, 3)
        }
        fn forward(&self, img: &Image) -> Result<Vec<f64>> {
            check_input(self, img)?;
            Ok(vec![0.2, 0.1, 0.0])
        }
        fn forward_backward(&self, img: &Image, label: usize) -> Result<InputGradient> {
            let logits = self.forward(img)?;
            Ok(InputGradient {
                loss: crate::model::cross_entropy(&logits, label)?,
                logits,
                grad: Image::zeros(8, 8, 3),
            })
        }
    }

    #[test]
    fn degenerate_bounds_return_the_input() {
        let model = scaled_cnn(1);
        for seed in 0..5 {
            let img = random_image(8, 8, 3, seed);
            let mask = SaliencyMask::centered_box(8, 8);
            let label = predict(&model, &img).unwrap().0;
            for variant in Variant::ALL {
                for (eps, eps_theta) in [(1.0, 0.4), (15.0, 0.0)] {
                    let cfg = AttackConfig { variant, eps, eps_theta, ..Default::default() };
                    let (adv, rep) = abba_attack(&model, &img, label, &mask, &cfg).unwrap();
                    assert_eq!(adv, img, "{variant:?} eps={eps} eps_theta={eps_theta}");
                    assert!(!rep.success);
                    // a wrong label is "fooled" from the start
                    let other = (label + 1) % 3;
                    let (adv, rep) = abba_attack(&model, &img, other, &mask, &cfg).unwrap();
                    assert_eq!(adv, img);
                    assert!(rep.success);
                    assert_eq!(rep.iterations_used, 0);
                }
            }
        }
    }

    #[test]
    fn attack_is_deterministic_and_feasible() {
        let model = scaled_cnn(2);
        let img = random_image(8, 8, 3, 9);
        let mask = SaliencyMask::centered_box(8, 8);
        let label = predict(&model, &img).unwrap().0;
        for variant in Variant::ALL {
            let cfg = AttackConfig { variant, n_steps: 9, eps: 5.0, early_stop: false, ..Default::default() };
            let mut states = 0;
            let (a, ra) = abba_attack_observed(&model, &img, label, &mask, &cfg, &mut |s| {
                s.check_feasible().unwrap();
                states += 1;
            })
            .unwrap();
            let (b, rb) = abba_attack(&model, &img, label, &mask, &cfg).unwrap();
            assert_eq!(states, 10);
            assert_eq!(a, b);
            assert_eq!(ra, rb);
            assert_eq!(ra.loss_trace.len(), ra.iterations_used);
            assert_eq!(ra.success, ra.final_pred != label);
        }
    }

    #[test]
    fn longer_runs_share_the_prefix() {
        let model = scaled_cnn(3);
        let img = random_image(8, 8, 3, 4);
        let mask = SaliencyMask::centered_box(8, 8);
        let label = predict(&model, &img).unwrap().0;
        let run = |iterations| {
            let cfg = AttackConfig { iterations, early_stop: false, n_steps: 7, ..Default::default() };
            abba_attack(&model, &img, label, &mask, &cfg).unwrap().1.loss_trace
        };
        let (short, long) = (run(4), run(9));
        assert_eq!(short[..], long[..4]);
    }

    #[test]
    fn object_variant_leaves_background_alone() {
        let model = scaled_cnn(4);
        let img = random_image(8, 8, 3, 5);
        let mask = SaliencyMask::centered_box(8, 8);
        let label = predict(&model, &img).unwrap().0;
        let cfg = AttackConfig { variant: Variant::Obj, n_steps: 9, eps: 9.0, early_stop: false, ..Default::default() };
        let (adv, rep) = abba_attack(&model, &img, label, &mask, &cfg).unwrap();
        assert_eq!(rep.theta_b, Translation::ZERO);
        for y in 0..8 {
            for x in 0..8 {
                if !mask.get(y, x) {
                    for c in 0..3 {
                        assert!((adv.get(y, x, c) - img.get(y, x, c)).abs() <= 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let model = scaled_cnn(5);
        let img = random_image(8, 8, 3, 6);
        let mask = SaliencyMask::centered_box(8, 8);
        for cfg in [
            AttackConfig { iterations: 0, ..Default::default() },
            AttackConfig { eps: 0.5, ..Default::default() },
            AttackConfig { eps_theta: 1.5, ..Default::default() },
            AttackConfig { n_steps: 0, ..Default::default() },
        ] {
            assert!(matches!(abba_attack(&model, &img, 0, &mask, &cfg), Err(Error::InvalidInput(_))));
        }
        let cfg = AttackConfig::default();
        assert!(abba_attack(&model, &img, 0, &SaliencyMask::centered_box(8, 7), &cfg).is_err());
        assert!(abba_attack(&model, &random_image(8, 9, 3, 0), 0, &SaliencyMask::centered_box(8, 9), &cfg).is_err());
    }

    #[test]
    fn additive_baselines_respect_the_ball() {
        let model = scaled_cnn(6);
        for seed in 0..4 {
            let img = random_image(8, 8, 3, 10 + seed);
            for eps_a in [0.01, 0.03, 0.1] {
                for adv in [
                    fgsm(&model, &img, 1, eps_a).unwrap(),
                    mifgsm(&model, &img, 1, eps_a, 5, 1.0).unwrap(),
                ] {
                    for (a, x) in adv.data().iter().zip(img.data()) {
                        assert!((a - x).abs() <= eps_a);
                        assert!((0.0..=1.0).contains(a));
                    }
                }
                assert_eq!(
                    fgsm(&model, &img, 2, eps_a).unwrap(),
                    mifgsm(&model, &img, 2, eps_a, 1, 1.0).unwrap()
                );
            }
        }
        assert!(fgsm(&model, &random_image(8, 8, 3, 0), 0, 0.0).is_err());
        assert!(fgsm(&model, &random_image(8, 8, 3, 0), 0, 1.5).is_err());
    }

    #[test]
    fn zero_gradient_leaves_image_unchanged() {
        let img = random_image(8, 8, 3, 20);
        assert_eq!(fgsm(&Constant, &img, 0, 0.05).unwrap(), img);
        assert_eq!(mifgsm(&Constant, &img, 0, 0.05, 10, 1.0).unwrap(), img);
    }

    #[test]
    fn blur_baseline_cases() {
        let img = random_image(10, 10, 3, 21);
        let mask = SaliencyMask::centered_box(10, 10);
        let near = blur_baseline(&img, &mask, BlurKind::Gauss, 1e-3, Region::Whole).unwrap();
        assert!(near.max_abs_diff(&img) <= 1e-3);
        let none = SaliencyMask::filled(10, 10, false);
        assert_eq!(blur_baseline(&img, &none, BlurKind::Defocus, 5.0, Region::Obj).unwrap(), img);
        let direct = conv2d_fixed(&img, &gaussian_kernel(3.0).unwrap(), Padding::Replicate).unwrap();
        assert_eq!(blur_baseline(&img, &mask, BlurKind::Gauss, 3.0, Region::Whole).unwrap(), direct);
        let bg = blur_baseline(&img, &mask, BlurKind::Gauss, 3.0, Region::Bg).unwrap();
        assert_eq!(bg.get(5, 5, 0), img.get(5, 5, 0));
        assert_eq!(bg.get(0, 0, 1), direct.get(0, 0, 1));
        assert!(blur_baseline(&img, &mask, BlurKind::Gauss, 0.0, Region::Whole).is_err());
    }

    #[test]
    fn evaluate_counts_fooled_images() {
        let model = Constant; // always predicts class 0
        let imgs: Vec<Image> = (0..10).map(|s| random_image(8, 8, 3, s)).collect();
        assert_eq!(evaluate(&[&model], &imgs, &[1; 10]).unwrap(), vec![1.0]);
        assert_eq!(evaluate(&[&model], &imgs, &[0; 10]).unwrap(), vec![0.0]);
        let half: Vec<usize> = (0..10).map(|i| i % 2).collect();
        assert_eq!(evaluate(&[&model, &model], &imgs, &half).unwrap(), vec![0.5, 0.5]);
        assert!(matches!(evaluate(&[&model], &[], &[]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("nope".parse::<Variant>().is_err());
    }
}
