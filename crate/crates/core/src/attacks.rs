//! Attack battery used to probe watermark fragility.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

/// Region zeroed by a crop attack; `x` is the column, `y` the row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    /// Lower-right quarter of an image.
    pub fn lower_right_quarter(height: usize, width: usize) -> Self {
        let (x, y) = (width / 2, height / 2);
        Rect { x, y, w: width - x, h: height - y }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackKind {
    None,
    Jpeg { quality: u8 },
    GaussianNoise { mean: f64, variance: f64 },
    SaltPepper { density: f64 },
    Speckle { variance: f64 },
    Median { side: usize },
    Mean { side: usize },
    GaussianLpf { side: usize, sigma: f64 },
    HistEq,
    /// `None` means the lower-right quarter of whatever image is attacked.
    Crop { rect: Option<Rect> },
}

impl AttackKind {
    pub fn is_stochastic(&self) -> bool {
        matches!(
            self,
            AttackKind::GaussianNoise { .. } | AttackKind::SaltPepper { .. } | AttackKind::Speckle { .. }
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub seed: u64,
}

impl AttackSpec {
    pub fn new(kind: AttackKind) -> Self {
        Self { kind, seed: 0 }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::AttackSpec { spec: self.to_string(), reason });
        let side_ok = |side: usize| side >= 3 && side % 2 == 1;
        match self.kind {
            AttackKind::Jpeg { quality } if !(1..=100).contains(&quality) => {
                bad(format!("quality {quality} outside 1..=100"))
            }
            AttackKind::GaussianNoise { mean, variance } if !mean.is_finite() || !(variance >= 0.0 && variance.is_finite()) => {
                bad("mean must be finite and variance non-negative".into())
            }
            AttackKind::SaltPepper { density } if !(0.0..=1.0).contains(&density) => {
                bad(format!("density {density} outside [0,1]"))
            }
            AttackKind::Speckle { variance } if !(variance >= 0.0 && variance.is_finite()) => {
                bad(format!("variance {variance} must be non-negative"))
            }
            AttackKind::Median { side } | AttackKind::Mean { side } if !side_ok(side) => {
                bad(format!("side {side} must be odd and >= 3"))
            }
            AttackKind::GaussianLpf { side, sigma } if !side_ok(side) || !(sigma > 0.0 && sigma.is_finite()) => {
                bad("side must be odd and >= 3, sigma positive".into())
            }
            AttackKind::Crop { rect: Some(r) } if r.w == 0 || r.h == 0 => bad("empty crop rectangle".into()),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for AttackSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            AttackKind::None => write!(f, "none")?,
            AttackKind::Jpeg { quality } => write!(f, "jpeg:q={quality}")?,
            AttackKind::GaussianNoise { mean, variance } => write!(f, "gaussian:mean={mean}:var={variance}")?,
            AttackKind::SaltPepper { density } => write!(f, "sp:density={density}")?,
            AttackKind::Speckle { variance } => write!(f, "speckle:var={variance}")?,
            AttackKind::Median { side } => write!(f, "median:side={side}")?,
            AttackKind::Mean { side } => write!(f, "mean:side={side}")?,
            AttackKind::GaussianLpf { side, sigma } => write!(f, "lpf:side={side}:sigma={sigma}")?,
            AttackKind::HistEq => write!(f, "histeq")?,
            AttackKind::Crop { rect: None } => write!(f, "crop")?,
            AttackKind::Crop { rect: Some(r) } => write!(f, "crop:x={}:y={}:w={}:h={}", r.x, r.y, r.w, r.h)?,
        }
        if self.kind.is_stochastic() {
            write!(f, ":seed={}", self.seed)?;
        }
        Ok(())
    }
}

impl FromStr for AttackSpec {
    type Err = Error;

    /// Parses `name[:key=value]*`, e.g. `jpeg:q=70` or
    /// `sp:density=0.005:seed=1`.
    fn from_str(text: &str) -> Result<Self> {
        let err = |reason: String| Error::AttackSpec { spec: text.to_string(), reason };
        let mut parts = text.trim().split(':');
        let name = parts.next().unwrap_or_default().to_ascii_lowercase();
        let mut params = Vec::new();
        for part in parts {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, found {part:?}")))?;
            params.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
        let mut used = vec![false; params.len()];
        let mut take = |keys: &[&str]| -> Option<String> {
            let i = params.iter().position(|(k, _)| keys.contains(&k.as_str()))?;
            used[i] = true;
            Some(params[i].1.clone())
        };
        fn num<T: FromStr>(v: Option<String>, default: Option<T>, key: &str, text: &str) -> Result<T> {
            match v {
                Some(s) => s.parse().map_err(|_| Error::AttackSpec {
                    spec: text.to_string(),
                    reason: format!("bad value {s:?} for {key}"),
                }),
                None => default.ok_or_else(|| Error::AttackSpec {
                    spec: text.to_string(),
                    reason: format!("missing {key}"),
                }),
            }
        }
        let seed = num(take(&["seed"]), Some(0u64), "seed", text)?;
        let kind = match name.as_str() {
            "none" | "identity" => AttackKind::None,
            "jpeg" => AttackKind::Jpeg { quality: num(take(&["q", "quality"]), None, "q", text)? },
            "gaussian" | "gauss" | "gaussian_noise" => AttackKind::GaussianNoise {
                mean: num(take(&["mean", "mu"]), Some(0.0), "mean", text)?,
                variance: num(take(&["var", "variance"]), None, "var", text)?,
            },
            "sp" | "salt_pepper" | "saltpepper" => AttackKind::SaltPepper {
                density: num(take(&["density", "d"]), None, "density", text)?,
            },
            "speckle" => AttackKind::Speckle { variance: num(take(&["var", "variance"]), None, "var", text)? },
            "median" => AttackKind::Median { side: num(take(&["side", "size"]), Some(3), "side", text)? },
            "mean" | "average" => AttackKind::Mean { side: num(take(&["side", "size"]), Some(3), "side", text)? },
            "lpf" | "gaussian_lpf" => AttackKind::GaussianLpf {
                side: num(take(&["side", "size"]), Some(3), "side", text)?,
                sigma: num(take(&["sigma"]), Some(0.5), "sigma", text)?,
            },
            "histeq" | "hist_eq" => AttackKind::HistEq,
            "crop" => {
                let coords = [take(&["x"]), take(&["y"]), take(&["w"]), take(&["h"])];
                if coords.iter().all(Option::is_none) {
                    AttackKind::Crop { rect: None }
                } else {
                    let [x, y, w, h] = coords;
                    AttackKind::Crop {
                        rect: Some(Rect {
                            x: num(x, None, "x", text)?,
                            y: num(y, None, "y", text)?,
                            w: num(w, None, "w", text)?,
                            h: num(h, None, "h", text)?,
                        }),
                    }
                }
            }
            other => return Err(err(format!("unknown attack {other:?}"))),
        };
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(err(format!("unexpected parameter {:?}", params[i].0)));
        }
        let spec = AttackSpec { kind, seed };
        spec.validate()?;
        Ok(spec)
    }
}

/// The eleven-row battery with display labels; stochastic rows are seeded
/// with their row index.
pub fn default_battery() -> Vec<(String, AttackSpec)> {
    let rows = [
        ("No Attack", AttackKind::None),
        ("JPEG Compression (Q = 80)", AttackKind::Jpeg { quality: 80 }),
        ("JPEG Compression (Q = 70)", AttackKind::Jpeg { quality: 70 }),
        ("Gaussian Noise (mean = 0, variance = 0.001)", AttackKind::GaussianNoise { mean: 0.0, variance: 0.001 }),
        ("Salt & Pepper Noise (density = 0.005)", AttackKind::SaltPepper { density: 0.005 }),
        ("Speckle Noise (variance = 0.004)", AttackKind::Speckle { variance: 0.004 }),
        ("Median Filter (3x3)", AttackKind::Median { side: 3 }),
        ("Mean Filter (3x3)", AttackKind::Mean { side: 3 }),
        ("Gaussian Low Pass Filter (3x3)", AttackKind::GaussianLpf { side: 3, sigma: 0.5 }),
        ("Histogram Equalization", AttackKind::HistEq),
        ("Cropping", AttackKind::Crop { rect: None }),
    ];
    rows.into_iter()
        .enumerate()
        .map(|(i, (label, kind))| (label.to_string(), AttackSpec { kind, seed: i as u64 }))
        .collect()
}

pub fn apply_attack(img: &GrayImage, spec: &AttackSpec) -> Result<GrayImage> {
    spec.validate()?;
    let x = img.pixels();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let out = match spec.kind {
        AttackKind::None => return Ok(img.clone()),
        AttackKind::Jpeg { quality } => jpeg(img, quality),
        AttackKind::GaussianNoise { mean, variance } => {
            let normal = Normal::new(mean, variance.sqrt()).expect("validated parameters");
            x.mapv(|v| v + normal.sample(&mut rng))
        }
        AttackKind::SaltPepper { density } => x.mapv(|v| {
            let u: f64 = rng.random();
            if u < density / 2.0 {
                0.0
            } else if u < density {
                1.0
            } else {
                v
            }
        }),
        AttackKind::Speckle { variance } => {
            let half = (3.0 * variance).sqrt();
            x.mapv(|v| {
                let n = if half > 0.0 { rng.random_range(-half..=half) } else { 0.0 };
                v + v * n
            })
        }
        AttackKind::Median { side } => window_filter(x, side, |w| {
            let mid = w.len() / 2;
            *w.select_nth_unstable_by(mid, f64::total_cmp).1
        }),
        AttackKind::Mean { side } => window_filter(x, side, |w| w.iter().sum::<f64>() / w.len() as f64),
        AttackKind::GaussianLpf { side, sigma } => {
            let half = (side / 2) as isize;
            let mut kernel: Vec<f64> = Vec::with_capacity(side * side);
            for i in -half..=half {
                for j in -half..=half {
                    kernel.push((-((i * i + j * j) as f64) / (2.0 * sigma * sigma)).exp());
                }
            }
            let total: f64 = kernel.iter().sum();
            kernel.iter_mut().for_each(|k| *k /= total);
            window_filter(x, side, |w| w.iter().zip(&kernel).map(|(a, k)| a * k).sum())
        }
        AttackKind::HistEq => hist_eq(img),
        AttackKind::Crop { rect } => {
            let (h, w) = img.dim();
            let r = rect.unwrap_or_else(|| Rect::lower_right_quarter(h, w));
            if r.x + r.w > w || r.y + r.h > h {
                return Err(Error::AttackSpec {
                    spec: spec.to_string(),
                    reason: format!("rectangle exceeds the {h}x{w} image"),
                });
            }
            let mut out = x.clone();
            out.slice_mut(ndarray::s![r.y..r.y + r.h, r.x..r.x + r.w]).fill(0.0);
            out
        }
    };
    let bit_exact_8 = matches!(spec.kind, AttackKind::Jpeg { .. } | AttackKind::HistEq);
    let result = GrayImage::new(out)?;
    Ok(if bit_exact_8 { result.quantized() } else { result })
}

/// Applies `f` to every replicate-padded `side x side` neighborhood, read
/// row-major.
fn window_filter(x: &Array2<f64>, side: usize, mut f: impl FnMut(&mut [f64]) -> f64) -> Array2<f64> {
    let (h, w) = x.dim();
    let half = (side / 2) as isize;
    let mut buf = vec![0.0; side * side];
    Array2::from_shape_fn((h, w), |(r, c)| {
        let mut k = 0;
        for dr in -half..=half {
            let rr = (r as isize + dr).clamp(0, h as isize - 1) as usize;
            for dc in -half..=half {
                let cc = (c as isize + dc).clamp(0, w as isize - 1) as usize;
                buf[k] = x[[rr, cc]];
                k += 1;
            }
        }
        f(&mut buf)
    })
}

const LUMA_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Luminance quantization table for a quality factor in `1..=100`.
pub fn quant_table(quality: u8) -> [f64; 64] {
    let q = u32::from(quality.clamp(1, 100));
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut out = [0.0; 64];
    for (o, &base) in out.iter_mut().zip(&LUMA_TABLE) {
        *o = ((u32::from(base) * scale + 50) / 100).clamp(1, 255) as f64;
    }
    out
}

/// Orthonormal 8-point DCT-II basis, `basis[k][n]`.
fn dct_basis() -> [[f64; 8]; 8] {
    let mut b = [[0.0; 8]; 8];
    for (k, row) in b.iter_mut().enumerate() {
        let a = if k == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
        for (n, v) in row.iter_mut().enumerate() {
            *v = a * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / 16.0).cos();
        }
    }
    b
}

fn jpeg(img: &GrayImage, quality: u8) -> Array2<f64> {
    let (h, w) = img.dim();
    let table = quant_table(quality);
    let basis = dct_basis();
    let levels = img.pixels().mapv(|v| (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) - 128.0);
    let mut out = Array2::zeros((h, w));
    for by in (0..h).step_by(8) {
        for bx in (0..w).step_by(8) {
            // partial edge blocks are padded by replication
            let mut block = [[0.0; 8]; 8];
            for (i, row) in block.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = levels[[(by + i).min(h - 1), (bx + j).min(w - 1)]];
                }
            }
            let mut tmp = [[0.0; 8]; 8];
            let mut coef = [[0.0; 8]; 8];
            for k in 0..8 {
                for j in 0..8 {
                    tmp[k][j] = (0..8).map(|n| basis[k][n] * block[n][j]).sum();
                }
            }
            for k in 0..8 {
                for l in 0..8 {
                    let c: f64 = (0..8).map(|n| tmp[k][n] * basis[l][n]).sum();
                    let q = table[k * 8 + l];
                    coef[k][l] = (c / q).round() * q;
                }
            }
            for n in 0..8 {
                for l in 0..8 {
                    tmp[n][l] = (0..8).map(|k| basis[k][n] * coef[k][l]).sum();
                }
            }
            for i in 0..8 {
                for j in 0..8 {
                    if by + i < h && bx + j < w {
                        let v: f64 = (0..8).map(|l| tmp[i][l] * basis[l][j]).sum();
                        out[[by + i, bx + j]] = ((v + 128.0).round().clamp(0.0, 255.0)) / 255.0;
                    }
                }
            }
        }
    }
    out
}

fn hist_eq(img: &GrayImage) -> Array2<f64> {
    let bytes = img.to_bytes();
    let n = bytes.len() as u64;
    let mut hist = [0u64; 256];
    for &b in &bytes {
        hist[b as usize] += 1;
    }
    let mut cdf = [0u64; 256];
    let mut acc = 0;
    for (c, h) in cdf.iter_mut().zip(hist) {
        acc += h;
        *c = acc;
    }
    let cdf_min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);
    let map: Vec<f64> = (0..256)
        .map(|v| {
            if n == cdf_min {
                v as f64 / 255.0
            } else {
                (cdf[v].saturating_sub(cdf_min) as f64 / (n - cdf_min) as f64 * 255.0).round() / 255.0
            }
        })
        .collect();
    let (h, w) = img.dim();
    Array2::from_shape_vec((h, w), bytes.iter().map(|&b| map[b as usize]).collect()).expect("shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> GrayImage {
        GrayImage::from_fn(h, w, |(r, c)| ((r * 7 + c * 13) % 97) as f64 / 96.0).unwrap()
    }

    #[test]
    fn parse_and_display_round_trip() {
        for text in [
            "none",
            "jpeg:q=70",
            "gaussian:mean=0:var=0.001:seed=3",
            "sp:density=0.005:seed=1",
            "speckle:var=0.004:seed=0",
            "median:side=3",
            "mean:side=5",
            "lpf:side=3:sigma=0.5",
            "histeq",
            "crop",
            "crop:x=256:y=256:w=256:h=256",
        ] {
            let spec: AttackSpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
        }
        assert_eq!("median".parse::<AttackSpec>().unwrap().kind, AttackKind::Median { side: 3 });
    }

    #[test]
    fn rejects_invalid_specs() {
        for text in ["jpeg:q=0", "jpeg:q=101", "median:side=4", "sp:density=1.5", "blur", "jpeg", "mean:side=3:foo=1", "crop:x=1"] {
            assert!(text.parse::<AttackSpec>().is_err(), "{text}");
        }
        let spec: AttackSpec = "crop:x=10:y=10:w=10:h=10".parse().unwrap();
        assert!(apply_attack(&ramp(12, 12), &spec).is_err());
    }

    #[test]
    fn smoothing_filters_preserve_constants() {
        let c = GrayImage::new(Array2::from_elem((9, 7), 0.4)).unwrap();
        for text in ["median:side=3", "mean:side=3", "lpf:side=3:sigma=0.5", "median:side=5"] {
            let out = apply_attack(&c, &text.parse().unwrap()).unwrap();
            assert!(out.pixels().iter().all(|&v| (v - 0.4).abs() < 1e-15), "{text}");
        }
    }

    #[test]
    fn quant_table_scaling() {
        assert_eq!(quant_table(50)[0], 16.0);
        assert_eq!(quant_table(100).iter().cloned().fold(0.0, f64::max), 1.0);
        assert_eq!(quant_table(25)[0], 32.0);
        assert_eq!(quant_table(1)[63], 255.0);
    }

    #[test]
    fn dct_basis_is_orthonormal() {
        let b = dct_basis();
        for i in 0..8 {
            for j in 0..8 {
                let dot: f64 = (0..8).map(|n| b[i][n] * b[j][n]).sum();
                assert!((dot - f64::from(u8::from(i == j))).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn jpeg_quality_100_is_nearly_lossless() {
        let img = ramp(16, 24).quantized();
        let out = apply_attack(&img, &"jpeg:q=100".parse().unwrap()).unwrap();
        let worst = img.pixels().iter().zip(out.pixels()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst <= 2.0 / 255.0 + 1e-12, "{worst}");
    }

    #[test]
    fn crop_touches_only_the_rect() {
        let img = ramp(10, 10);
        let out = apply_attack(&img, &"crop".parse().unwrap()).unwrap();
        for ((r, c), &v) in out.pixels().indexed_iter() {
            if r >= 5 && c >= 5 {
                assert_eq!(v, 0.0);
            } else {
                assert_eq!(v, img.pixels()[[r, c]]);
            }
        }
    }

    #[test]
    fn equalizing_a_flat_histogram_is_identity() {
        let img = GrayImage::from_fn(16, 32, |(r, c)| ((r * 32 + c) % 256) as f64 / 255.0).unwrap();
        let out = apply_attack(&img, &AttackSpec::new(AttackKind::HistEq)).unwrap();
        assert_eq!(out.to_bytes(), img.to_bytes());
    }
}
