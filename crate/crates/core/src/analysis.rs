//! Post-hoc metrics: deblur resilience, interpretable perturbation masks,
//! cross-model mask consistency and transferability scores.

use crate::error::{Error, Result};
use crate::imgcore::Image;
use crate::model::{check_input, check_label, softmax, Classifier};

/// Relative drop of the success rate after deblurring, `(s - s') / s`.
/// `None` when `s = 0`, where the ratio is undefined.
pub fn deblur_resilience(succ_before: f64, succ_after: f64) -> Result<Option<f64>> {
    for r in [succ_before, succ_after] {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidInput(format!("success rate {r} outside [0, 1]")));
        }
    }
    if succ_before == 0.0 {
        return Ok(None);
    }
    Ok(Some((succ_before - succ_after) / succ_before))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpretConfig {
    /// Weight of `‖M‖₁`.
    pub lambda1: f64,
    /// Weight of the total variation of `M`.
    pub lambda2: f64,
    pub iterations: usize,
    pub lr: f64,
}

impl Default for InterpretConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.05,
            lambda2: 0.2,
            iterations: 150,
            lr: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpretResult {
    /// Single-channel mask in `[0, 1]`; 1 keeps the adversarial pixel.
    pub mask: Image,
    /// Objective at the initial mask and after every step.
    pub trace: Vec<f64>,
}

fn blend(mask: &Image, x_adv: &Image, x_real: &Image) -> Image {
    let c = x_adv.channels();
    let mut out = x_real.clone();
    for (p, &m) in mask.data().iter().enumerate() {
        for k in p * c..(p + 1) * c {
            out.data_mut()[k] = m * x_adv.data()[k] + (1.0 - m) * x_real.data()[k];
        }
    }
    out
}

/// Anisotropic forward-difference total variation and its subgradient.
fn total_variation(mask: &Image) -> (f64, Vec<f64>) {
    let (h, w) = (mask.height(), mask.width());
    let m = mask.data();
    let mut tv = 0.0;
    let mut grad = vec![0.0; m.len()];
    let mut pair = |a: usize, b: usize, tv: &mut f64| {
        let d = m[b] - m[a];
        *tv += d.abs();
        let s = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        grad[b] += s;
        grad[a] -= s;
    };
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            if x + 1 < w {
                pair(p, p + 1, &mut tv);
            }
            if y + 1 < h {
                pair(p, p + w, &mut tv);
            }
        }
    }
    (tv, grad)
}

/// `p_y(M⊙X_adv + (1-M)⊙X_real) + λ1‖M‖₁ + λ2·TV(M)`.
pub fn interpret_objective(
    model: &dyn Classifier,
    mask: &Image,
    x_adv: &Image,
    x_real: &Image,
    label: usize,
    cfg: &InterpretConfig,
) -> Result<f64> {
    check_pair(model, x_adv, x_real, label)?;
    check_mask(mask, x_adv)?;
    let p = softmax(&model.forward(&blend(mask, x_adv, x_real))?)[label];
    let l1: f64 = mask.data().iter().map(|v| v.abs()).sum();
    Ok(p + cfg.lambda1 * l1 + cfg.lambda2 * total_variation(mask).0)
}

fn check_pair(model: &dyn Classifier, x_adv: &Image, x_real: &Image, label: usize) -> Result<()> {
    check_input(model, x_adv)?;
    x_adv.ensure_same_shape(x_real)?;
    check_label(label, model.num_classes())
}

fn check_mask(mask: &Image, img: &Image) -> Result<()> {
    if mask.channels() != 1 || mask.height() != img.height() || mask.width() != img.width() {
        return Err(Error::shape(
            format!("{}x{}x1", img.height(), img.width()),
            format!("{}x{}x{}", mask.height(), mask.width(), mask.channels()),
        ));
    }
    Ok(())
}

/// Projected (sub)gradient descent on the mask, starting from 0.5 everywhere.
///
/// The sign-valued TV subgradient makes fixed steps chatter, so each step
/// backtracks (halving up to `MAX_BACKTRACK` times) until the objective does not
/// increase; if no trial step qualifies the mask is kept.
pub fn interpretable_map(
    model: &dyn Classifier,
    x_adv: &Image,
    x_real: &Image,
    label: usize,
    cfg: &InterpretConfig,
) -> Result<InterpretResult> {
    check_pair(model, x_adv, x_real, label)?;
    let (h, w, c) = x_adv.shape();
    let objective = |mask: &Image, p: f64| {
        let l1: f64 = mask.data().iter().sum();
        p + cfg.lambda1 * l1 + cfg.lambda2 * total_variation(mask).0
    };
    let mut mask = Image::filled(h, w, 1, 0.5);
    let mut ig = model.forward_backward(&blend(&mask, x_adv, x_real), label)?;
    let mut current = objective(&mask, softmax(&ig.logits)[label]);
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    trace.push(current);
    for _ in 0..cfg.iterations {
        let p = softmax(&ig.logits)[label];
        let (_, tv_grad) = total_variation(&mask);
        // ∂p/∂Z = -p · ∂(-log p)/∂Z
        let grad: Vec<f64> = (0..h * w)
            .map(|i| {
                let data: f64 = (i * c..(i + 1) * c)
                    .map(|k| -p * ig.grad.data()[k] * (x_adv.data()[k] - x_real.data()[k]))
                    .sum();
                data + cfg.lambda1 + cfg.lambda2 * tv_grad[i]
            })
            .collect();
        let mut lr = cfg.lr;
        for _ in 0..=MAX_BACKTRACK {
            let mut trial = mask.clone();
            for (m, g) in trial.data_mut().iter_mut().zip(&grad) {
                *m = (*m - lr * g).clamp(0.0, 1.0);
            }
            let trial_ig = model.forward_backward(&blend(&trial, x_adv, x_real), label)?;
            let value = objective(&trial, softmax(&trial_ig.logits)[label]);
            if value <= current {
                mask = trial;
                ig = trial_ig;
                current = value;
                break;
            }
            lr *= 0.5;
        }
        trace.push(current);
    }
    Ok(InterpretResult { mask, trace })
}

const MAX_BACKTRACK: usize = 10;

/// `1 - mean_p(std_p) / 0.5` over the per-pixel population standard deviation
/// across maps; 1 for identical maps, 0 for complementary binary maps.
pub fn consistency(maps: &[Image]) -> Result<f64> {
    if maps.len() < 2 {
        return Err(Error::InvalidInput(format!("consistency needs at least 2 maps, got {}", maps.len())));
    }
    for m in &maps[1..] {
        maps[0].ensure_same_shape(m)?;
    }
    let n = maps.len() as f64;
    let mut column = vec![0.0; maps.len()];
    let mut total = 0.0;
    for k in 0..maps[0].data().len() {
        for (v, m) in column.iter_mut().zip(maps) {
            *v = m.data()[k];
        }
        // fixed summation order keeps the result invariant to map order
        column.sort_by(f64::total_cmp);
        let mean = column.iter().sum::<f64>() / n;
        let var = column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        total += var.sqrt();
    }
    let mean_std = total / maps[0].data().len() as f64;
    Ok(1.0 - mean_std / 0.5)
}

/// `max_{c≠y} p_c - p_y` on softmax probabilities; positive iff some other class
/// strictly beats the label.
pub fn transferability_score(model: &dyn Classifier, x_adv: &Image, label: usize) -> Result<f64> {
    if model.num_classes() < 2 {
        return Err(Error::InvalidInput("transferability needs at least 2 classes".into()));
    }
    check_input(model, x_adv)?;
    check_label(label, model.num_classes())?;
    Ok(score_from_logits(&model.forward(x_adv)?, label))
}

fn score_from_logits(logits: &[f64], label: usize) -> f64 {
    let p = softmax(logits);
    let best_other = p
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != label)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    best_other - p[label]
}
