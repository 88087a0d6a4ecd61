//! Object/background partition: mask ingestion, a spectral-residual fallback
//! detector, and layer splitting.

use std::collections::VecDeque;
use std::path::Path;

use image::DynamicImage;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::imgcore::{conv2d_fixed, gaussian_kernel, Image, Padding, SaliencyMask};

/// Gray level at or above which a mask pixel counts as object.
pub const MASK_THRESHOLD: u8 = 128;

pub const DEFAULT_THRESHOLD_FACTOR: f64 = 3.0;

const SMOOTHING_SIGMA: f64 = 2.5;

/// Radius of the closing applied to the binarized map: the 3σ extent of the smoothing.
const CLOSING_RADIUS: isize = 8;

/// Loads an 8-bit grayscale PNG mask and binarizes it at [`MASK_THRESHOLD`].
pub fn load_mask(path: impl AsRef<Path>, expected_shape: (usize, usize)) -> Result<SaliencyMask> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let gray = match image::open(path)? {
        DynamicImage::ImageLuma8(g) => g,
        _ => return Err(Error::MaskNotGrayscale(path.to_path_buf())),
    };
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let (eh, ew) = expected_shape;
    if (h, w) != (eh, ew) {
        return Err(Error::MaskDimension {
            path: path.to_path_buf(),
            expected_h: eh,
            expected_w: ew,
            actual_h: h,
            actual_w: w,
        });
    }
    let bits = gray.into_raw().into_iter().map(|b| b >= MASK_THRESHOLD).collect();
    SaliencyMask::new(h, w, bits)
}

/// Splits `img` into `(img ⊙ S, img ⊙ (1 - S))`; the two layers sum to `img` exactly.
pub fn region_split(img: &Image, s: &SaliencyMask) -> Result<(Image, Image)> {
    s.ensure_matches(img)?;
    let (h, w, c) = img.shape();
    let mut obj = Image::zeros(h, w, c);
    let mut bg = Image::zeros(h, w, c);
    for (p, &inside) in s.bits().iter().enumerate() {
        let dst = if inside { &mut obj } else { &mut bg };
        let range = p * c..(p + 1) * c;
        dst.data_mut()[range.clone()].copy_from_slice(&img.data()[range]);
    }
    Ok((obj, bg))
}

fn fft2(buf: &mut [Complex<f64>], h: usize, w: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    for row in buf.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = buf[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            buf[y * w + x] = col[y];
        }
    }
}

/// Continuous spectral-residual saliency map (before thresholding).
///
/// The DC bin is excluded from both the local average and the reconstruction,
/// so the map does not depend on the image mean.
pub fn spectral_residual_map(img: &Image) -> Result<Image> {
    let (h, w) = (img.height(), img.width());
    if h < 8 || w < 8 {
        return Err(Error::InvalidInput(format!(
            "spectral residual needs at least 8x8 pixels, got {h}x{w}"
        )));
    }
    let gray = img.to_gray();
    let mut spec: Vec<Complex<f64>> = gray.data().iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft2(&mut spec, h, w, false);

    let mut log_amp: Vec<f64> = spec.iter().map(|z| (z.norm() + 1e-12).ln()).collect();
    let wrap = |y: isize, x: isize| -> usize {
        (y.rem_euclid(h as isize) as usize) * w + x.rem_euclid(w as isize) as usize
    };
    let mut dc_fill = 0.0;
    for dy in -1..=1 {
        for dx in -1..=1 {
            if dy != 0 || dx != 0 {
                dc_fill += log_amp[wrap(dy, dx)];
            }
        }
    }
    log_amp[0] = dc_fill / 8.0;

    let mut recon = vec![Complex::new(0.0, 0.0); h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let k = wrap(y, x);
            if k == 0 {
                continue;
            }
            let mut avg = 0.0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    avg += log_amp[wrap(y + dy, x + dx)];
                }
            }
            let residual = log_amp[k] - avg / 9.0;
            recon[k] = Complex::from_polar(residual.exp(), spec[k].arg());
        }
    }
    fft2(&mut recon, h, w, true);
    let norm = (h * w) as f64;
    let sal: Vec<f64> = recon.iter().map(|z| (z / norm).norm()).collect();
    let sal = Image::from_vec(h, w, 1, sal)?;
    conv2d_fixed(&sal, &gaussian_kernel(SMOOTHING_SIGMA)?, Padding::Replicate)
}

/// Spectral-residual saliency, binarized at `threshold_factor x mean`, closed
/// and hole-filled, then reduced to its largest 4-connected component. Flat or
/// degenerate results fall back to [`SaliencyMask::centered_box`].
///
/// Compact objects respond mostly at their corners; the closing joins those
/// responses into one region.
pub fn spectral_residual(img: &Image, threshold_factor: f64) -> Result<SaliencyMask> {
    let (h, w) = (img.height(), img.width());
    if h < 8 || w < 8 {
        return Err(Error::InvalidInput(format!(
            "spectral residual needs at least 8x8 pixels, got {h}x{w}"
        )));
    }
    let gray = img.to_gray();
    let (lo, hi) = gray
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo < 1e-12 {
        return Ok(SaliencyMask::centered_box(h, w));
    }
    let map = spectral_residual_map(img)?;
    let threshold = threshold_factor * map.mean();
    let raw = SaliencyMask::new(h, w, map.data().iter().map(|&v| v > threshold).collect())?;
    let mask = largest_component(&fill_holes(&close(&raw, CLOSING_RADIUS)));
    if mask.is_degenerate() {
        Ok(SaliencyMask::centered_box(h, w))
    } else {
        Ok(mask)
    }
}

fn disk_offsets(radius: isize) -> Vec<(isize, isize)> {
    let mut out = Vec::new();
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            if dy * dy + dx * dx <= radius * radius {
                out.push((dy, dx));
            }
        }
    }
    out
}

/// Binary dilation (`grow = true`) or erosion with a disk. Pixels outside the
/// frame count as unset for dilation and as set for erosion.
fn morph(mask: &SaliencyMask, radius: isize, grow: bool) -> SaliencyMask {
    let (h, w) = (mask.height() as isize, mask.width() as isize);
    let offsets = disk_offsets(radius);
    SaliencyMask::from_fn(mask.height(), mask.width(), |y, x| {
        let hit = |&(dy, dx): &(isize, isize)| {
            let (yy, xx) = (y as isize + dy, x as isize + dx);
            if yy < 0 || xx < 0 || yy >= h || xx >= w {
                !grow
            } else {
                mask.get(yy as usize, xx as usize)
            }
        };
        if grow {
            offsets.iter().any(hit)
        } else {
            offsets.iter().all(hit)
        }
    })
}

fn close(mask: &SaliencyMask, radius: isize) -> SaliencyMask {
    morph(&morph(mask, radius, true), radius, false)
}

/// Sets every background pixel that is not 4-connected to the frame border.
fn fill_holes(mask: &SaliencyMask) -> SaliencyMask {
    let (h, w) = (mask.height(), mask.width());
    let mut outside = vec![false; h * w];
    let mut queue = VecDeque::new();
    for p in 0..h * w {
        let (y, x) = (p / w, p % w);
        if (y == 0 || x == 0 || y + 1 == h || x + 1 == w) && !mask.bits()[p] {
            outside[p] = true;
            queue.push_back(p);
        }
    }
    while let Some(p) = queue.pop_front() {
        let (y, x) = (p / w, p % w);
        let mut neighbours = Vec::with_capacity(4);
        if y > 0 {
            neighbours.push(p - w);
        }
        if y + 1 < h {
            neighbours.push(p + w);
        }
        if x > 0 {
            neighbours.push(p - 1);
        }
        if x + 1 < w {
            neighbours.push(p + 1);
        }
        for q in neighbours {
            if !mask.bits()[q] && !outside[q] {
                outside[q] = true;
                queue.push_back(q);
            }
        }
    }
    SaliencyMask::new(h, w, outside.iter().map(|o| !o).collect()).expect("same dimensions")
}

/// Largest 4-connected object component; ties go to the component found first
/// in raster order.
pub fn largest_component(mask: &SaliencyMask) -> SaliencyMask {
    let (h, w) = (mask.height(), mask.width());
    let mut label = vec![0usize; h * w];
    let mut best = (0usize, 0usize);
    let mut next = 1;
    let mut queue = VecDeque::new();
    for start in 0..h * w {
        if !mask.bits()[start] || label[start] != 0 {
            continue;
        }
        label[start] = next;
        queue.push_back(start);
        let mut size = 0;
        while let Some(p) = queue.pop_front() {
            size += 1;
            let (y, x) = (p / w, p % w);
            let mut visit = |q: usize| {
                if mask.bits()[q] && label[q] == 0 {
                    label[q] = next;
                    queue.push_back(q);
                }
            };
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
        }
        if size > best.1 {
            best = (next, size);
        }
        next += 1;
    }
    SaliencyMask::new(h, w, label.iter().map(|&l| l != 0 && l == best.0).collect())
        .expect("same dimensions")
}
