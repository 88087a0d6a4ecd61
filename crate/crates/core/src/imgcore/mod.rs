//! Dense image containers, differentiable sub-pixel translation and fixed-kernel
//! convolution.
//!
//! All arithmetic is `f64`; quantization to 8 bits only happens in [`codec`].

pub mod codec;

use crate::error::{Error, Result};

/// Row-major, channel-interleaved raster with nominal range `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!(
                "images carry 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::shape(
                format!("{} values", height * width * channels),
                format!("{} values", data.len()),
            ));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite pixel value {bad}")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds an image from a per-pixel closure `f(y, x, c)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width, channels)`.
    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        let i = self.index(y, x, c);
        self.data[i] = v;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn ensure_same_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ))
        }
    }

    pub fn clamp01(mut self) -> Self {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Image) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Channel-mean grayscale copy.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let c = self.channels as f64;
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| px.iter().sum::<f64>() / c)
            .collect();
        Image {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }
}

/// Binary object/background partition: `true` marks the salient object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SaliencyMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl SaliencyMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::shape(
                format!("{} mask bits", height * width),
                format!("{}", bits.len()),
            ));
        }
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Self {
        Self {
            height,
            width,
            bits: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(y, x));
            }
        }
        Self {
            height,
            width,
            bits,
        }
    }

    /// Central 50% x 50% rectangle, used when saliency is degenerate.
    pub fn centered_box(height: usize, width: usize) -> Self {
        let (y0, y1) = (height / 4, height / 4 + height.div_ceil(2));
        let (x0, x1) = (width / 4, width / 4 + width.div_ceil(2));
        Self::from_fn(height, width, |y, x| (y0..y1).contains(&y) && (x0..x1).contains(&x))
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_object(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// True when either region is empty.
    pub fn is_degenerate(&self) -> bool {
        let n = self.count_object();
        n == 0 || n == self.bits.len()
    }

    pub fn inverted(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn iou(&self, other: &SaliencyMask) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (a, b) in self.bits.iter().zip(&other.bits) {
            inter += (*a && *b) as usize;
            union += (*a || *b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub(crate) fn ensure_matches(&self, img: &Image) -> Result<()> {
        if self.height == img.height() && self.width == img.width() {
            Ok(())
        } else {
            Err(Error::shape(
                format!("mask {}x{}", img.height(), img.width()),
                format!("{}x{}", self.height, self.width),
            ))
        }
    }
}

/// Translation rate as a fraction of image width (`tx`) and height (`ty`).
///
/// Positive `tx` moves content right, positive `ty` moves it down.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Translation {
    pub tx: f64,
    pub ty: f64,
}

impl Translation {
    pub const ZERO: Translation = Translation { tx: 0.0, ty: 0.0 };

    pub fn new(tx: f64, ty: f64) -> Result<Self> {
        if !(tx.is_finite() && ty.is_finite()) || tx.abs() > 1.0 || ty.abs() > 1.0 {
            return Err(Error::InvalidInput(format!(
                "translation ({tx}, {ty}) outside [-1, 1]"
            )));
        }
        Ok(Self { tx, ty })
    }

    /// Rate corresponding to a shift of `(dx, dy)` pixels on a `width x height` image.
    pub fn from_pixels(dx: f64, dy: f64, width: usize, height: usize) -> Self {
        Self {
            tx: dx / width as f64,
            ty: dy / height as f64,
        }
    }

    pub fn scaled(self, s: f64) -> Self {
        Self {
            tx: self.tx * s,
            ty: self.ty * s,
        }
    }

    pub fn norm_inf(self) -> f64 {
        self.tx.abs().max(self.ty.abs())
    }

    pub fn is_zero(self) -> bool {
        self.tx == 0.0 && self.ty == 0.0
    }
}

/// Out-of-bounds handling for sampling and convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Padding {
    #[default]
    Zero,
    Replicate,
}

#[inline]
fn fetch(img: &Image, y: isize, x: isize, c: usize, padding: Padding) -> f64 {
    let (h, w) = (img.height as isize, img.width as isize);
    match padding {
        Padding::Zero => {
            if y < 0 || x < 0 || y >= h || x >= w {
                0.0
            } else {
                img.get(y as usize, x as usize, c)
            }
        }
        Padding::Replicate => img.get(y.clamp(0, h - 1) as usize, x.clamp(0, w - 1) as usize, c),
    }
}

/// Pixel shift for a rate, snapped onto the lattice when within rounding of it
/// so that integer shifts are exact rolls.
#[inline]
fn pixel_shift(rate: f64, extent: usize) -> f64 {
    let d = rate * extent as f64;
    let r = d.round();
    if (d - r).abs() < 1e-9 {
        r
    } else {
        d
    }
}

/// Integer cell and fractional offset for each output coordinate along one axis.
fn sample_axis(len: usize, shift: f64) -> Vec<(isize, f64)> {
    (0..len)
        .map(|i| {
            let s = i as f64 - shift;
            let f = s.floor();
            (f as isize, s - f)
        })
        .collect()
}

fn ensure_nonempty(img: &Image) -> Result<()> {
    if img.height == 0 || img.width == 0 || img.channels == 0 {
        Err(Error::InvalidInput("zero-sized image".into()))
    } else {
        Ok(())
    }
}

/// Bilinear translation: `out(x, y) = img(x - tx*W, y - ty*H)`.
pub fn translate(img: &Image, t: Translation, padding: Padding) -> Result<Image> {
    ensure_nonempty(img)?;
    if t.is_zero() {
        return Ok(img.clone());
    }
    let cols = sample_axis(img.width, pixel_shift(t.tx, img.width));
    let rows = sample_axis(img.height, pixel_shift(t.ty, img.height));
    let mut out = Image::zeros(img.height, img.width, img.channels);
    let mut k = 0;
    for &(y0, b) in &rows {
        for &(x0, a) in &cols {
            for c in 0..img.channels {
                let v00 = fetch(img, y0, x0, c, padding);
                let v01 = fetch(img, y0, x0 + 1, c, padding);
                let v10 = fetch(img, y0 + 1, x0, c, padding);
                let v11 = fetch(img, y0 + 1, x0 + 1, c, padding);
                out.data[k] = (1.0 - b) * ((1.0 - a) * v00 + a * v01) + b * ((1.0 - a) * v10 + a * v11);
                k += 1;
            }
        }
    }
    Ok(out)
}

/// Gradient of `<upstream, translate(img, t)>` with respect to `(tx, ty)`.
///
/// At lattice positions the derivative is taken from the cell on the positive side.
pub fn translate_grad(
    img: &Image,
    t: Translation,
    upstream: &Image,
    padding: Padding,
) -> Result<(f64, f64)> {
    ensure_nonempty(img)?;
    img.ensure_same_shape(upstream)?;
    let cols = sample_axis(img.width, pixel_shift(t.tx, img.width));
    let rows = sample_axis(img.height, pixel_shift(t.ty, img.height));
    let (mut gx, mut gy) = (0.0, 0.0);
    let mut k = 0;
    for &(y0, b) in &rows {
        for &(x0, a) in &cols {
            for c in 0..img.channels {
                let u = upstream.data[k];
                k += 1;
                if u == 0.0 {
                    continue;
                }
                let v00 = fetch(img, y0, x0, c, padding);
                let v01 = fetch(img, y0, x0 + 1, c, padding);
                let v10 = fetch(img, y0 + 1, x0, c, padding);
                let v11 = fetch(img, y0 + 1, x0 + 1, c, padding);
                gx += u * ((1.0 - b) * (v01 - v00) + b * (v11 - v10));
                gy += u * ((1.0 - a) * (v10 - v00) + a * (v11 - v01));
            }
        }
    }
    // d(sample position)/d(rate) = -extent
    Ok((-gx * img.width as f64, -gy * img.height as f64))
}

/// Odd-sized 2-D weight grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2d {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl Kernel2d {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        if rows % 2 == 0 || cols % 2 == 0 {
            return Err(Error::InvalidInput(format!(
                "kernel dimensions must be odd, got {rows}x{cols}"
            )));
        }
        if weights.len() != rows * cols {
            return Err(Error::shape(format!("{} weights", rows * cols), weights.len()));
        }
        Ok(Self {
            rows,
            cols,
            weights,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.weights[r * self.cols + c]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn normalized(rows: usize, cols: usize, mut weights: Vec<f64>) -> Self {
        let s: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= s;
        }
        Self {
            rows,
            cols,
            weights,
        }
    }
}

/// Sampled Gaussian truncated at `±ceil(3σ)`, normalized to unit sum.
pub fn gaussian_kernel(sigma: f64) -> Result<Kernel2d> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("gaussian sigma must be positive, got {sigma}")));
    }
    let r = (3.0 * sigma).ceil() as isize;
    let side = (2 * r + 1) as usize;
    let denom = 2.0 * sigma * sigma;
    let mut w = Vec::with_capacity(side * side);
    for dy in -r..=r {
        for dx in -r..=r {
            w.push((-((dx * dx + dy * dy) as f64) / denom).exp());
        }
    }
    Ok(Kernel2d::normalized(side, side, w))
}

/// Normalized disk indicator of the given diameter.
pub fn disk_kernel(diameter: f64) -> Result<Kernel2d> {
    if !(diameter >= 1.0 && diameter.is_finite()) {
        return Err(Error::InvalidInput(format!("disk diameter must be >= 1, got {diameter}")));
    }
    let r = (diameter / 2.0).floor() as isize;
    let side = (2 * r + 1) as usize;
    let rad2 = (diameter / 2.0) * (diameter / 2.0);
    let mut w = Vec::with_capacity(side * side);
    for dy in -r..=r {
        for dx in -r..=r {
            w.push(if ((dx * dx + dy * dy) as f64) <= rad2 { 1.0 } else { 0.0 });
        }
    }
    Ok(Kernel2d::normalized(side, side, w))
}

/// Spatial correlation with a normalized, odd-sized kernel.
pub fn conv2d_fixed(img: &Image, kernel: &Kernel2d, padding: Padding) -> Result<Image> {
    ensure_nonempty(img)?;
    if (kernel.sum() - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "kernel weights sum to {}, expected 1",
            kernel.sum()
        )));
    }
    let (ry, rx) = ((kernel.rows / 2) as isize, (kernel.cols / 2) as isize);
    let mut out = Image::zeros(img.height, img.width, img.channels);
    let mut acc = vec![0.0; img.channels];
    for y in 0..img.height as isize {
        for x in 0..img.width as isize {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for ky in 0..kernel.rows as isize {
                for kx in 0..kernel.cols as isize {
                    let w = kernel.weights[(ky as usize) * kernel.cols + kx as usize];
                    if w == 0.0 {
                        continue;
                    }
                    for (c, a) in acc.iter_mut().enumerate() {
                        *a += w * fetch(img, y + ky - ry, x + kx - rx, c, padding);
                    }
                }
            }
            for (c, a) in acc.iter().enumerate() {
                out.set(y as usize, x as usize, c, *a);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(h: usize, w: usize, c: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(h, w, c, |_, _, _| rng.random::<f64>())
    }

    /// Integer roll with edge handling, written independently of the bilinear path.
    fn integer_roll(img: &Image, dx: isize, dy: isize, padding: Padding) -> Image {
        let (h, w) = (img.height() as isize, img.width() as isize);
        Image::from_fn(img.height(), img.width(), img.channels(), |y, x, c| {
            let (sy, sx) = (y as isize - dy, x as isize - dx);
            match padding {
                Padding::Zero if sy < 0 || sx < 0 || sy >= h || sx >= w => 0.0,
                _ => img.get(sy.clamp(0, h - 1) as usize, sx.clamp(0, w - 1) as usize, c),
            }
        })
    }

    #[test]
    fn zero_translation_is_bitwise_identity() {
        let img = random_image(5, 7, 3, 1);
        let out = translate(&img, Translation::ZERO, Padding::Zero).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn half_pixel_shift_on_two_pixel_row() {
        let img = Image::from_vec(1, 2, 1, vec![0.0, 1.0]).unwrap();
        let t = Translation::new(0.5 / 2.0, 0.0).unwrap();
        let out = translate(&img, t, Padding::Zero).unwrap();
        assert_eq!(out.data(), &[0.0, 0.5]);
    }

    #[test]
    fn one_pixel_shift_matches_integer_roll() {
        let ramp = Image::from_fn(4, 4, 1, |y, x, _| (y * 4 + x) as f64 / 15.0);
        for padding in [Padding::Zero, Padding::Replicate] {
            let t = Translation::from_pixels(1.0, 0.0, 4, 4);
            assert_eq!(translate(&ramp, t, padding).unwrap(), integer_roll(&ramp, 1, 0, padding));
            let t = Translation::from_pixels(-1.0, 2.0, 4, 4);
            assert_eq!(translate(&ramp, t, padding).unwrap(), integer_roll(&ramp, -1, 2, padding));
        }
    }

    #[test]
    fn integer_shift_on_awkward_width_is_exact() {
        let img = random_image(3, 49, 1, 5);
        let t = Translation::from_pixels(1.0, 0.0, 49, 3);
        let out = translate(&img, t, Padding::Replicate).unwrap();
        assert_eq!(out, integer_roll(&img, 1, 0, Padding::Replicate));
    }

    #[test]
    fn translate_rejects_empty_image() {
        let img = Image::zeros(0, 4, 1);
        assert!(matches!(
            translate(&img, Translation::new(0.1, 0.0).unwrap(), Padding::Zero),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn constant_image_has_zero_translation_gradient() {
        let img = Image::filled(6, 6, 3, 0.4);
        let up = random_image(6, 6, 3, 2);
        let (gx, gy) =
            translate_grad(&img, Translation::new(0.13, -0.2).unwrap(), &up, Padding::Replicate).unwrap();
        assert_eq!((gx, gy), (0.0, 0.0));
    }

    #[test]
    fn row_image_has_no_vertical_gradient() {
        let img = Image::from_vec(1, 2, 1, vec![0.0, 1.0]).unwrap();
        let up = Image::from_vec(1, 2, 1, vec![0.0, 1.0]).unwrap();
        let (_, gy) =
            translate_grad(&img, Translation::new(0.15, 0.0).unwrap(), &up, Padding::Replicate).unwrap();
        assert_eq!(gy, 0.0);
    }

    #[test]
    fn translate_grad_matches_central_differences() {
        let h = 1e-4;
        for (seed, padding) in [(3, Padding::Zero), (4, Padding::Replicate)] {
            let img = random_image(8, 8, 3, seed);
            let up = random_image(8, 8, 3, seed + 100);
            let t = Translation::new(0.07, -0.03).unwrap();
            let (gx, gy) = translate_grad(&img, t, &up, padding).unwrap();
            let probe = |t: Translation| translate(&img, t, padding).unwrap().dot(&up);
            let nx = (probe(Translation { tx: t.tx + h, ..t }) - probe(Translation { tx: t.tx - h, ..t })) / (2.0 * h);
            let ny = (probe(Translation { ty: t.ty + h, ..t }) - probe(Translation { ty: t.ty - h, ..t })) / (2.0 * h);
            assert!((gx - nx).abs() <= 1e-4 * nx.abs().max(1e-8), "{gx} vs {nx}");
            assert!((gy - ny).abs() <= 1e-4 * ny.abs().max(1e-8), "{gy} vs {ny}");
        }
    }

    #[test]
    fn translate_grad_rejects_shape_mismatch() {
        let img = random_image(4, 4, 1, 0);
        let up = random_image(4, 5, 1, 0);
        assert!(translate_grad(&img, Translation::ZERO, &up, Padding::Zero).is_err());
    }

    #[test]
    fn delta_kernel_is_identity() {
        let img = random_image(6, 5, 3, 7);
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        let k = Kernel2d::new(3, 3, w).unwrap();
        assert_eq!(conv2d_fixed(&img, &k, Padding::Zero).unwrap(), img);
    }

    #[test]
    fn uniform_kernel_preserves_constant() {
        let img = Image::filled(6, 6, 1, 0.3);
        let k = Kernel2d::new(3, 3, vec![1.0 / 9.0; 9]).unwrap();
        let out = conv2d_fixed(&img, &k, Padding::Replicate).unwrap();
        assert!(out.max_abs_diff(&img) < 1e-12);
    }

    #[test]
    fn uniform_kernel_matches_nested_loop_average() {
        let img = random_image(8, 8, 1, 9);
        let k = Kernel2d::new(3, 3, vec![1.0 / 9.0; 9]).unwrap();
        let out = conv2d_fixed(&img, &k, Padding::Zero).unwrap();
        for y in 0..8i32 {
            for x in 0..8i32 {
                let mut s = 0.0;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (yy, xx) = (y + dy, x + dx);
                        if (0..8).contains(&yy) && (0..8).contains(&xx) {
                            s += img.get(yy as usize, xx as usize, 0);
                        }
                    }
                }
                assert!((out.get(y as usize, x as usize, 0) - s / 9.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn even_kernel_is_rejected() {
        assert!(matches!(Kernel2d::new(2, 3, vec![1.0 / 6.0; 6]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn gaussian_kernel_shapes() {
        let tiny = gaussian_kernel(1e-3).unwrap();
        assert!(tiny.get(tiny.rows() / 2, tiny.cols() / 2) >= 0.999);
        let big = gaussian_kernel(15.0).unwrap();
        assert_eq!((big.rows(), big.cols()), (91, 91));
        assert!((big.sum() - 1.0).abs() <= 1e-9);
        assert!(gaussian_kernel(0.0).is_err());
        assert!(gaussian_kernel(-1.0).is_err());
    }

    #[test]
    fn disk_kernel_shapes() {
        let one = disk_kernel(1.0).unwrap();
        assert_eq!(one.weights(), &[1.0]);
        let d15 = disk_kernel(15.0).unwrap();
        assert_eq!(d15.rows(), 15);
        assert!((d15.sum() - 1.0).abs() < 1e-12);
        // corners fall outside the disk
        assert_eq!(d15.get(0, 0), 0.0);
        assert!(disk_kernel(0.5).is_err());
    }

    #[test]
    fn centered_box_covers_middle_quarter() {
        let m = SaliencyMask::centered_box(8, 8);
        assert_eq!(m.count_object(), 16);
        assert!(m.get(2, 2) && m.get(5, 5) && !m.get(1, 2) && !m.get(6, 6));
    }
}
