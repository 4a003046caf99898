//! Grayscale rasters, PGM and `.npy` I/O, and the PSNR / UQI quality metrics.

use std::fs;
use std::path::Path;

use ndarray::{s, Array2, ArrayView2};
use ndarray_npy::{ReadNpyExt, WriteNpyExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit-scale grayscale image. Intensities are finite and clamped to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pixels: Array2<f64>,
    bit_depth: u8,
}

impl GrayImage {
    /// Builds an image from unit-scale values, clamping into `[0, 1]`.
    pub fn new(pixels: Array2<f64>) -> Result<Self> {
        Self::with_depth(pixels, 64)
    }

    fn with_depth(mut pixels: Array2<f64>, bit_depth: u8) -> Result<Self> {
        let (h, w) = pixels.dim();
        if h == 0 || w == 0 {
            return Err(Error::InvalidParameter(format!("empty image {h}x{w}")));
        }
        if let Some(pos) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        pixels.mapv_inplace(|v| v.clamp(0.0, 1.0));
        Ok(Self { pixels, bit_depth })
    }

    /// Image from 8-bit samples with the given maxval.
    pub fn from_samples(height: usize, width: usize, samples: &[u8], maxval: u8) -> Result<Self> {
        if samples.len() != height * width {
            return Err(Error::InvalidParameter(format!(
                "{} samples for a {height}x{width} image",
                samples.len()
            )));
        }
        let scale = f64::from(maxval.max(1));
        let pixels = Array2::from_shape_fn((height, width), |(r, c)| f64::from(samples[r * width + c]) / scale);
        Self::with_depth(pixels, 8)
    }

    pub fn from_fn(height: usize, width: usize, f: impl FnMut((usize, usize)) -> f64) -> Result<Self> {
        Self::new(Array2::from_shape_fn((height, width), f))
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.pixels.dim()
    }

    pub fn pixels(&self) -> &Array2<f64> {
        &self.pixels
    }

    pub fn into_pixels(self) -> Array2<f64> {
        self.pixels
    }

    /// 8 for images read from (or quantized to) 8-bit samples, 64 otherwise.
    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    /// Round-half-up 8-bit samples in row-major order.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().map(|&v| to_byte(v)).collect()
    }

    /// The image after an 8-bit round trip.
    pub fn quantized(&self) -> Self {
        let pixels = self.pixels.mapv(|v| f64::from(to_byte(v)) / 255.0);
        Self { pixels, bit_depth: 8 }
    }
}

fn to_byte(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while let Some(&b) = self.data.get(self.pos) {
                    self.pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Next unsigned decimal token; returns it with its starting offset.
    fn number(&mut self, what: &str) -> Result<(u32, usize)> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.data.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader {
                offset: start,
                reason: match self.data.get(start) {
                    None => format!("missing {what}"),
                    Some(b) => format!("expected {what}, found byte {b:#04x}"),
                },
            });
        }
        let text = std::str::from_utf8(&self.data[start..self.pos]).expect("ascii digits");
        let value = text.parse().map_err(|_| Error::MalformedHeader {
            offset: start,
            reason: format!("{what} {text} is out of range"),
        })?;
        Ok((value, start))
    }
}

/// Parses a binary (P5) or ASCII (P2) PGM.
pub fn parse_pgm(data: &[u8]) -> Result<GrayImage> {
    let binary = match data.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => {
            return Err(Error::MalformedHeader {
                offset: 0,
                reason: "expected magic P5 or P2".into(),
            })
        }
    };
    let mut cur = Cursor { data, pos: 2 };
    if !cur.data.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(Error::MalformedHeader {
            offset: 2,
            reason: "missing separator after magic".into(),
        });
    }
    let (width, w_off) = cur.number("width")?;
    let (height, h_off) = cur.number("height")?;
    if width == 0 {
        return Err(Error::MalformedHeader { offset: w_off, reason: "zero width".into() });
    }
    if height == 0 {
        return Err(Error::MalformedHeader { offset: h_off, reason: "zero height".into() });
    }
    let (maxval, m_off) = cur.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedMaxval { offset: m_off, maxval });
    }
    let (w, h) = (width as usize, height as usize);
    let count = w.checked_mul(h).ok_or_else(|| Error::MalformedHeader {
        offset: w_off,
        reason: "image too large".into(),
    })?;

    let mut samples = Vec::with_capacity(count.min(1 << 26));
    if binary {
        // exactly one whitespace byte separates the header from the raster
        match cur.data.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => {
                return Err(Error::MalformedHeader {
                    offset: cur.pos,
                    reason: "missing whitespace after maxval".into(),
                })
            }
        }
        let payload = &data[cur.pos..];
        if payload.len() < count {
            return Err(Error::TruncatedPayload {
                offset: cur.pos + payload.len(),
                expected: count,
                found: payload.len(),
            });
        }
        samples.extend_from_slice(&payload[..count]);
        if let Some(i) = samples.iter().position(|&v| u32::from(v) > maxval) {
            return Err(Error::MalformedPayload {
                offset: cur.pos + i,
                reason: format!("sample {} exceeds maxval {maxval}", samples[i]),
            });
        }
    } else {
        for found in 0..count {
            cur.skip_space_and_comments();
            if cur.pos >= data.len() {
                return Err(Error::TruncatedPayload { offset: cur.pos, expected: count, found });
            }
            let (v, off) = cur.number("sample").map_err(|e| match e {
                Error::MalformedHeader { offset, reason } => Error::MalformedPayload { offset, reason },
                other => other,
            })?;
            if v > maxval {
                return Err(Error::MalformedPayload {
                    offset: off,
                    reason: format!("sample {v} exceeds maxval {maxval}"),
                });
            }
            samples.push(v as u8);
        }
    }
    GrayImage::from_samples(h, w, &samples, maxval as u8)
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&data)
}

/// P5 encoding, maxval 255.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.to_bytes());
    out
}

pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

/// Lossless float64 storage, needed whenever a sub-quantum watermark must
/// survive on disk.
pub fn save_npy(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    img.pixels
        .write_npy(std::io::BufWriter::new(file))
        .map_err(|e| Error::ArrayFile { path: path.into(), reason: e.to_string() })
}

pub fn load_npy(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let pixels = Array2::<f64>::read_npy(std::io::BufReader::new(file))
        .map_err(|e| Error::ArrayFile { path: path.into(), reason: e.to_string() })?;
    GrayImage::new(pixels)
}

fn is_npy(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("npy"))
}

/// Loads `.npy` files as float images and anything else as PGM.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    if is_npy(path) {
        load_npy(path)
    } else {
        load_pgm(path)
    }
}

/// Saves `.npy` paths losslessly and anything else as 8-bit PGM.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if is_npy(path) {
        save_npy(img, path)
    } else {
        save_pgm(img, path)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub psnr_db: f64,
    pub ssim: f64,
}

fn check_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { left: a, right: b })
    }
}

fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

/// PSNR on the 8-bit intensity range without re-quantizing. For images of
/// 8-bit origin this equals the integer-domain value; for float images it
/// keeps perturbations smaller than one level measurable. Identical images
/// give `+inf`.
pub fn psnr(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    check_dims(reference.dim(), test.dim())?;
    let n = reference.pixels.len() as f64;
    let sse: f64 = reference
        .pixels
        .iter()
        .zip(&test.pixels)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(psnr_from_mse(sse / n))
}

/// PSNR over the round-half-up 8-bit samples of both images.
pub fn psnr_quantized(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    check_dims(reference.dim(), test.dim())?;
    let n = reference.pixels.len() as f64;
    let sse: f64 = reference
        .to_bytes()
        .iter()
        .zip(test.to_bytes())
        .map(|(&a, b)| {
            let d = f64::from(a) - f64::from(b);
            d * d
        })
        .sum();
    Ok(psnr_from_mse(sse / n / (255.0 * 255.0)))
}

/// Denominator floor below which a window is treated as degenerate.
pub const DEGENERATE_EPS: f64 = 1e-12;

/// Windowed similarity settings. The default is the universal quality
/// index over 8x8 windows; `stabilizers` switches to the SSIM form with
/// the given `(c1, c2)` constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimConfig {
    pub window: usize,
    pub stabilizers: Option<(f64, f64)>,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self { window: 8, stabilizers: None }
    }
}

impl SsimConfig {
    /// SSIM constants `(0.01 L)^2, (0.03 L)^2` for dynamic range `L`.
    pub fn stabilized(window: usize, dynamic_range: f64) -> Self {
        Self {
            window,
            stabilizers: Some(((0.01 * dynamic_range).powi(2), (0.03 * dynamic_range).powi(2))),
        }
    }
}

fn window_index(a: ArrayView2<f64>, b: ArrayView2<f64>, stabilizers: Option<(f64, f64)>) -> f64 {
    let n = a.len() as f64;
    let mean_a = a.sum() / n;
    let mean_b = b.sum() / n;
    let (mut var_a, mut var_b, mut cov) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        var_a += dx * dx;
        var_b += dy * dy;
        cov += dx * dy;
    }
    let dof = (n - 1.0).max(1.0);
    let (var_a, var_b, cov) = (var_a / dof, var_b / dof, cov / dof);
    match stabilizers {
        Some((c1, c2)) => {
            ((2.0 * mean_a * mean_b + c1) * (2.0 * cov + c2))
                / ((mean_a * mean_a + mean_b * mean_b + c1) * (var_a + var_b + c2))
        }
        None => {
            let denom = (var_a + var_b) * (mean_a * mean_a + mean_b * mean_b);
            if denom < DEGENERATE_EPS {
                let equal = a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= DEGENERATE_EPS);
                if equal {
                    1.0
                } else {
                    0.0
                }
            } else {
                4.0 * cov * mean_a * mean_b / denom
            }
        }
    }
}

/// Mean windowed quality index over every `window x window` position.
pub fn ssim(a: &Array2<f64>, b: &Array2<f64>, window: usize) -> Result<f64> {
    ssim_with(a.view(), b.view(), &SsimConfig { window, ..SsimConfig::default() })
}

pub fn ssim_with(a: ArrayView2<f64>, b: ArrayView2<f64>, config: &SsimConfig) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    let w = config.window;
    let (h, wd) = a.dim();
    if w == 0 || w > h || w > wd {
        return Err(Error::InvalidParameter(format!(
            "window {w} does not fit a {h}x{wd} matrix"
        )));
    }
    if let Some(pos) = a.iter().chain(b.iter()).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(pos % a.len()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for r in 0..=h - w {
        for c in 0..=wd - w {
            let wa = a.slice(s![r..r + w, c..c + w]);
            let wb = b.slice(s![r..r + w, c..c + w]);
            total += window_index(wa, wb, config.stabilizers);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// PSNR and default-window UQI of two images.
pub fn quality(reference: &GrayImage, test: &GrayImage) -> Result<QualityScore> {
    Ok(QualityScore {
        psnr_db: psnr(reference, test)?,
        ssim: ssim(reference.pixels(), test.pixels(), 8)?,
    })
}
