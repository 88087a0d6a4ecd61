//! PNG (8-bit gray/RGB) and `.rawf` (lossless little-endian `f64`) codecs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};

use super::{Image, SaliencyMask};
use crate::error::{Error, Result};

#[inline]
fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn write_png(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let (h, w, c) = img.shape();
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    match c {
        1 => GrayImage::from_raw(w as u32, h as u32, bytes)
            .expect("buffer length matches shape")
            .save(path.as_ref())?,
        3 => RgbImage::from_raw(w as u32, h as u32, bytes)
            .expect("buffer length matches shape")
            .save(path.as_ref())?,
        _ => unreachable!("images carry 1 or 3 channels"),
    }
    Ok(())
}

/// Reads a PNG as grayscale (1 channel) or RGB (3 channels). Alpha is dropped
/// and 16-bit data is reduced to 8 bits.
pub fn read_png(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let dynimg = image::open(path)?;
    Ok(from_dynamic(dynimg))
}

fn from_dynamic(dynimg: DynamicImage) -> Image {
    let gray = matches!(
        dynimg,
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA8(_)
            | DynamicImage::ImageLumaA16(_)
    );
    if gray {
        let g = dynimg.into_luma8();
        let (w, h) = g.dimensions();
        let data = g.into_raw().into_iter().map(|b| b as f64 / 255.0).collect();
        Image::from_vec(h as usize, w as usize, 1, data).expect("decoded buffer is well-formed")
    } else {
        let rgb = dynimg.into_rgb8();
        let (w, h) = rgb.dimensions();
        let data = rgb.into_raw().into_iter().map(|b| b as f64 / 255.0).collect();
        Image::from_vec(h as usize, w as usize, 3, data).expect("decoded buffer is well-formed")
    }
}

pub fn write_rawf(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let (h, w, c) = img.shape();
    for dim in [h, w, c] {
        out.write_all(&(dim as u32).to_le_bytes())?;
    }
    for v in img.data() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rawf(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut buf = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    decode_rawf(&buf)
}

pub fn decode_rawf(buf: &[u8]) -> Result<Image> {
    if buf.len() < 12 {
        return Err(Error::Format("rawf header truncated".into()));
    }
    let dim = |i: usize| u32::from_le_bytes(buf[i * 4..i * 4 + 4].try_into().unwrap()) as usize;
    let (h, w, c) = (dim(0), dim(1), dim(2));
    let n = h
        .checked_mul(w)
        .and_then(|v| v.checked_mul(c))
        .ok_or_else(|| Error::Format("rawf dimensions overflow".into()))?;
    let body = &buf[12..];
    if body.len() != n * 8 {
        return Err(Error::Format(format!(
            "rawf body holds {} bytes, header implies {}",
            body.len(),
            n * 8
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Image::from_vec(h, w, c, data)
}

/// Loads `.rawf` losslessly, anything else through the PNG decoder.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("rawf") => read_rawf(path),
        _ => read_png(path),
    }
}

/// Writes a mask as an 8-bit grayscale PNG with object pixels at 255.
pub fn write_mask_png(mask: &SaliencyMask, path: impl AsRef<Path>) -> Result<()> {
    let bytes = mask.bits().iter().map(|&b| if b { 255u8 } else { 0 }).collect();
    GrayImage::from_raw(mask.width() as u32, mask.height() as u32, bytes)
        .expect("buffer length matches shape")
        .save(path.as_ref())?;
    Ok(())
}
