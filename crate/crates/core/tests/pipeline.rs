use blurforge::attack::{abba_attack, AttackConfig, Variant};
use blurforge::blursynth::{project_kernel, project_translation, KernelField, KernelMode};
use blurforge::imgcore::codec::{read_rawf, write_rawf};
use blurforge::model::{predict, softmax, TinyCnn};
use blurforge::physical::simulate_capture;
use blurforge::saliency::spectral_residual;
use blurforge::shapes::generate;
use blurforge::{Image, Padding, SaliencyMask, Translation};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(h: usize, w: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(h, w, 3, |_, _, _| rng.random())
}

fn scaled_cnn(seed: u64) -> TinyCnn {
    let mut m = TinyCnn::new((16, 16, 3), 4, seed).unwrap();
    let params = m.params().iter().map(|v| v * 8.0).collect();
    m.set_params(params).unwrap();
    m
}

#[test]
fn attack_on_a_saliency_mask_reports_its_own_prediction() {
    let model = scaled_cnn(2);
    let img = random_image(16, 16, 9);
    let mask = spectral_residual(&img, 3.0).unwrap();
    for variant in Variant::ALL {
        let cfg = AttackConfig { variant, ..Default::default() };
        let (adv, report) = abba_attack(&model, &img, 1, &mask, &cfg).unwrap();
        assert_eq!(report.final_pred, predict(&model, &adv).unwrap().0);
        assert_eq!(report.success, report.final_pred != 1);
        assert!(adv.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(report.theta_o.norm_inf() <= cfg.eps_theta && report.theta_b.norm_inf() <= cfg.eps_theta);
    }
}

#[test]
fn adversarial_images_survive_the_raw_codec() {
    let model = scaled_cnn(4);
    let img = random_image(16, 16, 5);
    let mask = SaliencyMask::centered_box(16, 16);
    let (adv, _) = abba_attack(&model, &img, 0, &mask, &AttackConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("adv.rawf");
    write_rawf(&adv, &path).unwrap();
    assert_eq!(read_rawf(&path).unwrap(), adv);
}

#[test]
fn shapes_are_reproducible_and_masked() {
    let a = generate(3, 10, 4, 32);
    let b = generate(3, 10, 4, 32);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.image, y.image);
        assert_eq!(x.label, y.label);
        assert!(!x.mask.is_degenerate());
    }
    // an offset window matches the same indices of a longer run
    assert_eq!(generate(3, 11, 1, 32)[0].image, a[1].image);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projected_kernels_are_centered_simplices(logits in proptest::collection::vec(-8.0f64..8.0, 2 * 5)) {
        let kf = KernelField::new(KernelMode::PerRegion, 5, 1, 1, logits).unwrap();
        let p = project_kernel(&kf);
        for object in [true, false] {
            let w = softmax(p.region_logits(object));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(w.iter().all(|&v| v <= w[0]));
        }
        prop_assert_eq!(project_kernel(&p), p);
    }

    #[test]
    fn translation_projection_is_a_clamp(tx in -2.0f64..2.0, ty in -2.0f64..2.0, eps in 0.0f64..1.0) {
        let t = project_translation(Translation { tx, ty }, eps);
        prop_assert!(t.norm_inf() <= eps);
        prop_assert_eq!(t.tx, tx.clamp(-eps, eps));
        prop_assert_eq!(t.ty, ty.clamp(-eps, eps));
    }

    #[test]
    fn capture_preserves_constant_images_under_replicate(v in 0.0f64..1.0, tx in -1.0f64..1.0, ty in -1.0f64..1.0, n in 1usize..20) {
        let img = Image::filled(9, 7, 3, v);
        let out = simulate_capture(&img, Translation { tx, ty }, n, Padding::Replicate).unwrap();
        prop_assert!(out.max_abs_diff(&img) <= 1e-12);
    }
}
