//! Camera-motion pathway: average kernels with one shared translation, the
//! pinhole conversion from translation rate to metric camera motion, and a
//! frame-averaging capture model.

use crate::attack::{uniform_kernel_attack, AttackConfig, AttackReport, IterationState};
use crate::blursynth::{build_stack, synthesize_grad, KernelField, KernelMode, MotionSpec};
use crate::error::{Error, Result};
use crate::imgcore::{translate, Image, Padding, SaliencyMask, Translation};
use crate::model::{check_input, check_label, Classifier};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::InvalidInput(format!("focal lengths must be positive, got fx={fx} fy={fy}")));
        }
        Ok(Self { fx, fy, cx, cy })
    }
}

/// Attack that moves the whole scene along one straight line, with every
/// sub-motion frame weighted equally. Returns the adversarial image, the
/// shared translation and the report.
pub fn physical_attack(
    model: &dyn Classifier,
    img: &Image,
    label: usize,
    cfg: &AttackConfig,
) -> Result<(Image, Translation, AttackReport)> {
    physical_attack_observed(model, img, label, cfg, &mut |_| {})
}

pub fn physical_attack_observed(
    model: &dyn Classifier,
    img: &Image,
    label: usize,
    cfg: &AttackConfig,
    observer: &mut dyn FnMut(&IterationState),
) -> Result<(Image, Translation, AttackReport)> {
    let (adv, report) = uniform_kernel_attack(model, img, label, cfg, observer)?;
    let theta = report.theta_o;
    Ok((adv, theta, report))
}

/// Loss and its gradient with respect to the shared translation, for
/// uniform kernels over `n_frames` frames.
pub fn physical_loss_grad(
    model: &dyn Classifier,
    img: &Image,
    label: usize,
    theta: Translation,
    n_frames: usize,
    padding: Padding,
) -> Result<(f64, (f64, f64))> {
    check_input(model, img)?;
    check_label(label, model.num_classes())?;
    let (h, w, _) = img.shape();
    let spec = MotionSpec::new(theta, theta, n_frames, theta.norm_inf(), padding)?;
    let stack = build_stack(img, &SaliencyMask::filled(h, w, true), &spec)?;
    let kf = KernelField::uniform(KernelMode::PerRegion, n_frames, h, w);
    let x = crate::blursynth::synthesize(&stack, &kf)?;
    let ig = model.forward_backward(&x, label)?;
    let g = synthesize_grad(&stack, &kf, &ig.grad)?;
    Ok((ig.loss, (g.theta_o.0 + g.theta_b.0, g.theta_o.1 + g.theta_b.1)))
}

/// Metric camera translation `(X, Y)` parallel to the image plane that
/// produces pixel motion `(tx·W, ty·H)` at `depth_m`.
pub fn camera_translation(
    theta: Translation,
    (height, width): (usize, usize),
    depth_m: f64,
    k: &CameraIntrinsics,
) -> Result<(f64, f64)> {
    if !(depth_m > 0.0 && depth_m.is_finite()) {
        return Err(Error::InvalidInput(format!("depth must be positive, got {depth_m}")));
    }
    let u = theta.tx * width as f64;
    let v = theta.ty * height as f64;
    Ok((u * depth_m / k.fx, v * depth_m / k.fy))
}

/// Median of a single-channel depth map over the object region (or the whole
/// map when the region is empty).
pub fn object_depth(depth: &Image, mask: &SaliencyMask) -> Result<f64> {
    if depth.channels() != 1 {
        return Err(Error::InvalidInput(format!("depth map must have 1 channel, got {}", depth.channels())));
    }
    mask.ensure_matches(depth)?;
    let mut values: Vec<f64> = if mask.count_object() == 0 {
        depth.data().to_vec()
    } else {
        depth
            .data()
            .iter()
            .zip(mask.bits())
            .filter_map(|(&d, &inside)| inside.then_some(d))
            .collect()
    };
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Ok(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Mean of `translate(img, i·θ/N)` over `i = 0..N`.
pub fn simulate_capture(img: &Image, theta: Translation, n_frames: usize, padding: Padding) -> Result<Image> {
    if n_frames == 0 {
        return Err(Error::InvalidInput("n_frames must be at least 1".into()));
    }
    let mut sum = Image::zeros(img.height(), img.width(), img.channels());
    for i in 0..n_frames {
        let frame = translate(img, theta.scaled(i as f64 / n_frames as f64), padding)?;
        for (s, v) in sum.data_mut().iter_mut().zip(frame.data()) {
            *s += v;
        }
    }
    let n = n_frames as f64;
    sum.data_mut().iter_mut().for_each(|v| *v /= n);
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blursynth::synthesize;
    use crate::model::{predict, TinyCnn};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(h: usize, w: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(h, w, 3, |_, _, _| rng.random())
    }

    fn uniform_synthesis(img: &Image, theta: Translation, n: usize, padding: Padding) -> Image {
        let (h, w, _) = img.shape();
        let spec = MotionSpec::new(theta, theta, n, theta.norm_inf(), padding).unwrap();
        let stack = build_stack(img, &SaliencyMask::filled(h, w, true), &spec).unwrap();
        synthesize(&stack, &KernelField::uniform(KernelMode::PerRegion, n, h, w)).unwrap()
    }

    #[test]
    fn single_frame_is_identity() {
        let img = random_image(6, 7, 1);
        let t = Translation::new(0.3, -0.2).unwrap();
        assert_eq!(simulate_capture(&img, t, 1, Padding::Zero).unwrap(), img);
        assert!(simulate_capture(&img, t, 0, Padding::Zero).is_err());
    }

    #[test]
    fn constant_interior_stays_constant() {
        let img = Image::filled(12, 12, 3, 0.4);
        let t = Translation::from_pixels(2.0, -1.0, 12, 12);
        let out = simulate_capture(&img, t, 5, Padding::Zero).unwrap();
        for y in 2..10 {
            for x in 3..12 {
                assert!((out.get(y, x, 0) - 0.4).abs() < 1e-12, "({y},{x})");
            }
        }
    }

    #[test]
    fn capture_matches_uniform_kernel_synthesis() {
        let img = random_image(9, 10, 2);
        let t = Translation::new(0.1, 0.0).unwrap();
        let a = simulate_capture(&img, t, 5, Padding::Zero).unwrap();
        assert!(a.max_abs_diff(&uniform_synthesis(&img, t, 5, Padding::Zero)) <= 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let t = Translation::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)).unwrap();
            let n = rng.random_range(1..12);
            for padding in [Padding::Zero, Padding::Replicate] {
                let a = simulate_capture(&img, t, n, padding).unwrap();
                assert!(a.max_abs_diff(&uniform_synthesis(&img, t, n, padding)) <= 1e-9);
            }
        }
    }

    #[test]
    fn camera_translation_arithmetic() {
        let k = CameraIntrinsics::new(100.0, 80.0, 16.0, 16.0).unwrap();
        assert_eq!(camera_translation(Translation::ZERO, (32, 32), 2.0, &k).unwrap(), (0.0, 0.0));
        let t = Translation::from_pixels(10.0, 4.0, 50, 40);
        let (x, y) = camera_translation(t, (40, 50), 2.0, &k).unwrap();
        assert!((x - 0.2).abs() < 1e-12);
        assert!((y - 0.1).abs() < 1e-12);
        let (x2, y2) = camera_translation(t, (40, 50), 4.0, &k).unwrap();
        assert!((x2 - 2.0 * x).abs() < 1e-12 && (y2 - 2.0 * y).abs() < 1e-12);
        assert!(camera_translation(t, (40, 50), 0.0, &k).is_err());
        assert!(camera_translation(t, (40, 50), -1.0, &k).is_err());
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn object_depth_is_region_median() {
        let depth = Image::from_fn(4, 4, 1, |y, x, _| (y * 4 + x) as f64);
        let mask = SaliencyMask::from_fn(4, 4, |y, _| y == 0);
        assert_eq!(object_depth(&depth, &mask).unwrap(), 1.5);
        assert_eq!(object_depth(&depth, &SaliencyMask::filled(4, 4, false)).unwrap(), 7.5);
        assert!(object_depth(&Image::zeros(4, 4, 3), &mask).is_err());
    }

    fn model() -> TinyCnn {
        let mut m = TinyCnn::new((8, 8, 3), 3, 7).unwrap();
        let p = m.params().iter().map(|v| v * 10.0).collect();
        m.set_params(p).unwrap();
        m
    }

    #[test]
    fn zero_motion_returns_the_input() {
        let model = model();
        let img = random_image(8, 8, 4);
        let label = predict(&model, &img).unwrap().0;
        let cfg = AttackConfig { eps_theta: 0.0, n_steps: 7, ..Default::default() };
        let (adv, theta, rep) = physical_attack(&model, &img, label, &cfg).unwrap();
        assert!(adv.max_abs_diff(&img) <= 1e-12);
        assert_eq!(theta, Translation::ZERO);
        assert!(!rep.success);
    }

    #[test]
    fn attack_output_is_a_capture() {
        let model = model();
        let img = random_image(8, 8, 5);
        let label = predict(&model, &img).unwrap().0;
        let cfg = AttackConfig { n_steps: 9, early_stop: false, ..Default::default() };
        let mut seen = 0;
        let (adv, theta, rep) = physical_attack_observed(&model, &img, label, &cfg, &mut |s| {
            assert!(s.theta_o == s.theta_b);
            assert!(s.theta_o.norm_inf() <= cfg.eps_theta);
            seen += 1;
        })
        .unwrap();
        assert_eq!(seen, 10);
        assert_eq!(rep.theta_o, rep.theta_b);
        let expected = simulate_capture(&img, theta, 9, Padding::Zero).unwrap();
        assert!(adv.max_abs_diff(&expected) <= 1e-9);
    }

    #[test]
    fn shared_translation_gradient_matches_finite_differences() {
        let model = model();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-4;
        for case in 0..6 {
            let img = random_image(8, 8, 20 + case);
            // keep sample positions off the lattice so the loss is smooth
            let t = Translation::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)).unwrap();
            let padding = if case % 2 == 0 { Padding::Zero } else { Padding::Replicate };
            let (_, (gx, gy)) = physical_loss_grad(&model, &img, 1, t, 5, padding).unwrap();
            let loss = |t: Translation| physical_loss_grad(&model, &img, 1, t, 5, padding).unwrap().0;
            let fx = (loss(Translation { tx: t.tx + h, ..t }) - loss(Translation { tx: t.tx - h, ..t })) / (2.0 * h);
            let fy = (loss(Translation { ty: t.ty + h, ..t }) - loss(Translation { ty: t.ty - h, ..t })) / (2.0 * h);
            let err = ((gx - fx).powi(2) + (gy - fy).powi(2)).sqrt() / (gx.hypot(gy).max(fx.hypot(fy)).max(1e-8));
            assert!(err <= 1e-4, "case {case}: ({gx},{gy}) vs ({fx},{fy})");
        }
    }
}
