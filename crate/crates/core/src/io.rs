//! Image and float-map files.
//!
//! Scalar maps are stored as grayscale PFM: the header `Pf\n<w> <h>\n-1.0\n`
//! (negative scale means little-endian) followed by `f32` values, bottom row
//! first. Colors go to 8-bit PNG.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::image::{Image, ScalarMap};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("png: {0}")]
    Png(#[from] image::ImageError),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("malformed PFM: {0}")]
    Pfm(String),
}

pub fn encode_pfm(map: &ScalarMap) -> Result<Vec<u8>, IoError> {
    if let Some(i) = map.values.iter().position(|v| !v.is_finite()) {
        return Err(IoError::NonFinite(i));
    }
    let (w, h) = (map.width, map.height);
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(4 * w * h);
    for y in (0..h).rev() {
        for v in &map.values[y * w..(y + 1) * w] {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_pfm(bytes: &[u8]) -> Result<ScalarMap, IoError> {
    let bad = |m: &str| IoError::Pfm(m.to_string());
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    // magic, dims, scale: three newline-terminated lines
    for _ in 0..3 {
        let end = bytes[pos..].iter().position(|&b| b == b'\n').ok_or_else(|| bad("truncated header"))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| bad("header is not text"))?;
        fields.push(line.trim().to_string());
        pos += end + 1;
    }
    if fields[0] != "Pf" {
        return Err(bad("only grayscale 'Pf' maps are supported"));
    }
    let dims: Vec<usize> = fields[1]
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| bad("bad dimensions")))
        .collect::<Result<_, _>>()?;
    let [w, h] = dims[..] else {
        return Err(bad("bad dimensions"));
    };
    let scale: f64 = fields[2].parse().map_err(|_| bad("bad scale"))?;
    let little = scale < 0.0;
    let payload = &bytes[pos..];
    if payload.len() != 4 * w * h {
        return Err(bad("payload size does not match dimensions"));
    }
    let mut values = vec![0.0; w * h];
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (row, col) = (h - 1 - k / w, k % w);
        values[row * w + col] = v as f64;
    }
    Ok(ScalarMap {
        width: w,
        height: h,
        values,
    })
}

pub fn write_pfm(map: &ScalarMap, path: impl AsRef<Path>) -> Result<(), IoError> {
    fs::write(path, encode_pfm(map)?)?;
    Ok(())
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<ScalarMap, IoError> {
    decode_pfm(&fs::read(path)?)
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn to_rgb(img: &Image) -> image::RgbImage {
    let buf = img.pixels.iter().flat_map(|p| p.map(to_u8)).collect();
    image::RgbImage::from_raw(img.width as u32, img.height as u32, buf).expect("buffer matches size")
}

/// Writes `img` as 8-bit RGB, clamping each channel to `[0, 1]`.
pub fn write_png(img: &Image, path: impl AsRef<Path>) -> Result<(), IoError> {
    if let Some(i) = img.pixels.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(IoError::NonFinite(i));
    }
    to_rgb(img).save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// Control points of the map colormap, from low to high: dark purple, blue,
/// teal, green, yellow (a coarse viridis).
pub const COLORMAP: [[f64; 3]; 5] = [
    [0.267, 0.005, 0.329],
    [0.229, 0.322, 0.546],
    [0.128, 0.567, 0.551],
    [0.369, 0.789, 0.383],
    [0.993, 0.906, 0.144],
];

/// Color of `t ∈ [0, 1]` under [`COLORMAP`], linearly interpolated.
pub fn colormap(t: f64) -> [f64; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (COLORMAP.len() - 1) as f64;
    let i = (x.floor() as usize).min(COLORMAP.len() - 2);
    let f = x - i as f64;
    let (a, b) = (COLORMAP[i], COLORMAP[i + 1]);
    [0, 1, 2].map(|k| a[k] + f * (b[k] - a[k]))
}

/// Normalizes `map` by its own min/max and colors it. Returns the range used.
pub fn colorize(map: &ScalarMap) -> (Image, (f64, f64)) {
    let (lo, hi) = map.range().unwrap_or((0.0, 0.0));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let pixels = map.values.iter().map(|v| colormap((v - lo) / span)).collect();
    (Image::from_pixels(map.width, map.height, pixels), (lo, hi))
}

/// Writes a colormapped PNG of `map` and reports its range on stderr.
pub fn write_colormap_png(map: &ScalarMap, path: impl AsRef<Path>) -> Result<(f64, f64), IoError> {
    let path = path.as_ref();
    if let Some(i) = map.values.iter().position(|v| !v.is_finite()) {
        return Err(IoError::NonFinite(i));
    }
    let (img, (lo, hi)) = colorize(map);
    write_png(&img, path)?;
    eprintln!("{}: min {lo:.6e} max {hi:.6e}", path.display());
    Ok((lo, hi))
}
