//! Seeded synthetic shapes corpus: one anti-aliased shape per image over a
//! noisy two-color gradient, with its ground-truth object mask.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imgcore::{Image, SaliencyMask};
use crate::model::Sample;

pub const CLASS_NAMES: [&str; 4] = ["circle", "square", "triangle", "cross"];
pub const NUM_CLASSES: usize = CLASS_NAMES.len();

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSample {
    pub image: Image,
    pub label: usize,
    pub mask: SaliencyMask,
}

impl ShapeSample {
    pub fn sample(&self) -> Sample {
        Sample {
            image: self.image.clone(),
            label: self.label,
        }
    }
}

fn inside(label: usize, dx: f64, dy: f64, r: f64) -> bool {
    match label {
        0 => dx * dx + dy * dy <= r * r,
        1 => dx.abs().max(dy.abs()) <= 0.8 * r,
        // apex at the top, base 0.7r below the center
        2 => (-r..=0.7 * r).contains(&dy) && dx.abs() <= (dy + r) / 1.7,
        _ => {
            let arm = r / 3.0;
            (dx.abs() <= arm && dy.abs() <= r) || (dy.abs() <= arm && dx.abs() <= r)
        }
    }
}

fn color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.random(), rng.random(), rng.random()]
}

fn luminance(c: &[f64; 3]) -> f64 {
    (c[0] + c[1] + c[2]) / 3.0
}

/// Sample `index` of the corpus drawn from `seed`; each index has its own
/// stream so subsets can be regenerated independently.
pub fn generate_one(seed: u64, index: u64, size: usize) -> ShapeSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let label = rng.random_range(0..NUM_CLASSES);
    let bg_a = color(&mut rng);
    let bg_b = color(&mut rng);
    let bg_mean = 0.5 * (luminance(&bg_a) + luminance(&bg_b));
    let fg = loop {
        let c = color(&mut rng);
        if (luminance(&c) - bg_mean).abs() >= 0.25 {
            break c;
        }
    };
    let s = size as f64;
    let r = s * rng.random_range(0.2..0.3);
    let cy = s * rng.random_range(0.4..0.6);
    let cx = s * rng.random_range(0.4..0.6);
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (ga, gb) = (angle.cos(), angle.sin());

    const SUB: usize = 4;
    let mut coverage = vec![0.0; size * size];
    for y in 0..size {
        for x in 0..size {
            let mut hits = 0;
            for sy in 0..SUB {
                for sx in 0..SUB {
                    let py = y as f64 + (sy as f64 + 0.5) / SUB as f64;
                    let px = x as f64 + (sx as f64 + 0.5) / SUB as f64;
                    hits += inside(label, px - cx, py - cy, r) as usize;
                }
            }
            coverage[y * size + x] = hits as f64 / (SUB * SUB) as f64;
        }
    }

    let mut data = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let u = ((x as f64 / s - 0.5) * ga + (y as f64 / s - 0.5) * gb + 0.5).clamp(0.0, 1.0);
            let a = coverage[y * size + x];
            for c in 0..3 {
                let bg = (1.0 - u) * bg_a[c] + u * bg_b[c];
                let noise = (rng.random::<f64>() - 0.5) * 0.1;
                data.push((a * fg[c] + (1.0 - a) * bg + noise).clamp(0.0, 1.0));
            }
        }
    }
    let image = Image::from_vec(size, size, 3, data).expect("generated image is well-formed");
    let mask = SaliencyMask::from_fn(size, size, |y, x| coverage[y * size + x] >= 0.5);
    ShapeSample { image, label, mask }
}

/// `count` samples with indices `offset..offset + count`.
pub fn generate(seed: u64, offset: u64, count: usize, size: usize) -> Vec<ShapeSample> {
    (offset..offset + count as u64).map(|i| generate_one(seed, i, size)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_per_index() {
        let a = generate(7, 0, 6, 32);
        let b = generate(7, 3, 3, 32);
        assert_eq!(a[3..], b[..]);
        assert_ne!(generate(8, 0, 1, 32)[0].image, a[0].image);
    }

    #[test]
    fn samples_are_valid() {
        let samples = generate(1, 0, 200, 32);
        let mut counts = [0; NUM_CLASSES];
        for s in &samples {
            counts[s.label] += 1;
            assert_eq!(s.image.shape(), (32, 32, 3));
            assert!(s.image.data().iter().all(|v| (0.0..=1.0).contains(v)));
            let frac = s.mask.count_object() as f64 / 1024.0;
            assert!((0.04..0.5).contains(&frac), "object fraction {frac}");
        }
        assert!(counts.iter().all(|&c| c >= 30), "{counts:?}");
    }

    #[test]
    fn shapes_are_distinguishable() {
        // same center and radius, different classes → different masks
        let r = 8.0;
        let masks: Vec<Vec<bool>> = (0..NUM_CLASSES)
            .map(|l| {
                (0..32 * 32)
                    .map(|p| inside(l, (p % 32) as f64 - 16.0, (p / 32) as f64 - 16.0, r))
                    .collect()
            })
            .collect();
        for i in 0..NUM_CLASSES {
            for j in i + 1..NUM_CLASSES {
                assert_ne!(masks[i], masks[j]);
            }
        }
    }
}
