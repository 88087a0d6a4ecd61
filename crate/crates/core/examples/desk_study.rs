//! Trains a small CNN on the synthetic shapes corpus and compares attack
//! variants against the Gaussian-blur baseline.
//!
//! Usage: cargo run --release --example desk_study -- [step_kernel] [train_n] [epochs] [eps] [eps_theta]

use std::time::Instant;

use blurforge::attack::{abba_attack, blur_baseline, AttackConfig, BlurKind, Region, Variant};
use blurforge::model::{accuracy, predict, train, Sample, TinyCnn, TrainConfig};
use blurforge::shapes::{generate, NUM_CLASSES};

fn main() -> blurforge::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let step_kernel: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(AttackConfig::default().step_kernel);
    let train_n: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1600);
    let epochs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(8);
    let eps: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(15.0);
    let eps_theta: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0.4);

    let t0 = Instant::now();
    let train_set: Vec<Sample> = generate(1, 0, train_n, 32).iter().map(|s| s.sample()).collect();
    let test = generate(1, 1_000_000, 400, 32);
    let test_set: Vec<Sample> = test.iter().map(|s| s.sample()).collect();
    let mut model = TinyCnn::new((32, 32, 3), NUM_CLASSES, 0)?;
    let cfg = TrainConfig { epochs, lr: 0.01, seed: 0 };
    for s in train(&mut model, &train_set, Some(&test_set), cfg)? {
        println!("epoch {} loss {:.4} train {:.3} test {:.3?}", s.epoch, s.train_loss, s.train_accuracy, s.test_accuracy);
    }
    println!("trained in {:.1?}, test acc {:.4}", t0.elapsed(), accuracy(&model, &test_set)?);

    let correct: Vec<_> = test.iter().filter(|s| predict(&model, &s.image).unwrap().0 == s.label).collect();
    let n = correct.len() as f64;
    let mut gauss = 0;
    for s in &correct {
        let adv = blur_baseline(&s.image, &s.mask, BlurKind::Gauss, 15.0, Region::Whole)?;
        gauss += (predict(&model, &adv)?.0 != s.label) as usize;
    }
    println!("gauss15 {:.3}", gauss as f64 / n);
    for variant in Variant::ALL {
        let t = Instant::now();
        let cfg = AttackConfig { variant, step_kernel, eps, eps_theta, ..Default::default() };
        let mut ok = 0;
        for s in &correct {
            ok += abba_attack(&model, &s.image, s.label, &s.mask, &cfg)?.1.success as usize;
        }
        println!("{:>6} {:.3} ({:.1?})", variant.name(), ok as f64 / n, t.elapsed());
    }
    Ok(())
}
