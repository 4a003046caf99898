//! Synthetic hosts and biometric-like images shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use curvemark::curvelet::ifft2c;
use curvemark::{FeatureMatrix, GrayImage, IsefParams, WatermarkBundle, WedgeIndex};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Natural-looking host: a 1/f amplitude field plus a few smooth-edged
/// discs, stretched into [0.05, 0.95] so embedding never clamps.
pub fn natural_host(n: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spectrum = Array2::from_shape_fn((n, n), |(r, c)| {
        let fy = r as f64 - (n / 2) as f64;
        let fx = c as f64 - (n / 2) as f64;
        let f = (fx * fx + fy * fy).sqrt().max(1.0);
        let phase = rng.random::<f64>() * 2.0 * PI;
        Complex64::from_polar(1.0 / f, phase)
    });
    let field = ifft2c(&spectrum).mapv(|z| z.re);
    let mut img = field.clone();
    for _ in 0..6 {
        let cy = rng.random_range(0.1..0.9) * n as f64;
        let cx = rng.random_range(0.1..0.9) * n as f64;
        let rad = rng.random_range(0.05..0.2) * n as f64;
        let amp = rng.random_range(-1.0..1.0) * field.std(0.0) * 2.0;
        for ((r, c), v) in img.indexed_iter_mut() {
            let d = ((r as f64 - cy).powi(2) + (c as f64 - cx).powi(2)).sqrt();
            *v += amp / (1.0 + ((d - rad) / 1.5).exp());
        }
    }
    stretch(img, 0.05, 0.95)
}

pub fn stretch(img: Array2<f64>, lo: f64, hi: f64) -> GrayImage {
    let min = img.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = img.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (max - min).max(1e-12);
    GrayImage::new(img.mapv(|v| lo + (hi - lo) * (v - min) / span)).unwrap()
}

fn grid(n: usize, f: impl Fn(f64, f64) -> f64) -> GrayImage {
    // coordinates in [-1, 1]
    let h = (n - 1) as f64 / 2.0;
    GrayImage::from_fn(n, n, |(r, c)| f((c as f64 - h) / h, (r as f64 - h) / h)).unwrap()
}

pub fn fingerprint(n: usize, seed: u64) -> GrayImage {
    let s = seed as f64;
    grid(n, |x, y| {
        let (x0, y0) = (x - 0.1 * (s * 1.3).sin(), y + 0.15);
        let r = (x0 * x0 + 1.4 * y0 * y0).sqrt();
        let ridge = (22.0 * r + 1.5 * y0.atan2(x0) + s).sin();
        let mask = 1.0 / (1.0 + (((x / 0.75).powi(2) + (y / 0.9).powi(2) - 1.0) * 12.0).exp());
        (0.85 - 0.6 * mask * (0.5 + 0.5 * ridge)).quantize()
    })
}

pub fn iris(n: usize, seed: u64) -> GrayImage {
    let s = seed as f64;
    grid(n, |x, y| {
        let r = (x * x + y * y).sqrt();
        let t = y.atan2(x);
        if r < 0.25 {
            0.08
        } else if r < 0.8 {
            let texture = (18.0 * t + 6.0 * r + s).sin() * (9.0 * r * (1.0 + 0.2 * (s + t).cos())).cos();
            (0.45 + 0.2 * texture).quantize()
        } else {
            0.85
        }
    })
}

pub fn face(n: usize, seed: u64) -> GrayImage {
    let s = 0.05 * seed as f64;
    grid(n, |x, y| {
        let head = (x / (0.65 + s)).powi(2) + (y / 0.85).powi(2) < 1.0;
        let eye = |cx: f64| ((x - cx) / 0.12).powi(2) + ((y + 0.25) / 0.06).powi(2) < 1.0;
        let mouth = (x / 0.3).powi(2) + ((y - 0.45) / 0.05).powi(2) < 1.0;
        let nose = x.abs() < 0.04 && y > -0.15 && y < 0.2;
        let v = if !head {
            0.9
        } else if eye(-0.28) || eye(0.28) {
            0.15
        } else if mouth {
            0.3
        } else if nose {
            0.45
        } else {
            0.65 - 0.15 * x
        };
        v.quantize()
    })
}

pub fn signature(n: usize, seed: u64) -> GrayImage {
    let s = seed as f64;
    let mut img = Array2::from_elem((n, n), 0.95);
    let h = (n - 1) as f64 / 2.0;
    for k in 0..4000 {
        let t = k as f64 / 4000.0;
        let x = -0.85 + 1.7 * t;
        let y = 0.3 * (9.0 * t + s).sin() + 0.15 * (23.0 * t).cos() * (t * PI).sin();
        let (cx, cy) = (x * h + h, y * h + h);
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                let r = (cy.round() as i64 + dr).clamp(0, n as i64 - 1) as usize;
                let c = (cx.round() as i64 + dc).clamp(0, n as i64 - 1) as usize;
                img[[r, c]] = 0.1;
            }
        }
    }
    GrayImage::new(img).unwrap()
}

trait Quantize {
    fn quantize(self) -> f64;
}

impl Quantize for f64 {
    fn quantize(self) -> f64 {
        (self * 255.0).round() / 255.0
    }
}

/// The four biometric images for a subject.
pub fn biometrics(seed: u64) -> [GrayImage; 4] {
    [fingerprint(128, seed), iris(128, seed), face(128, seed), signature(128, seed)]
}

/// Edges, PCA and normalization for each biometric, sized to the wedges.
pub fn feature_set(seed: u64, wedges: &[WedgeIndex; 4], geometry: &curvemark::Geometry) -> [FeatureMatrix; 4] {
    let images = biometrics(seed);
    let mut out = Vec::new();
    for (img, idx) in images.iter().zip(wedges) {
        let (rows, cols) = geometry.wedge_dims(*idx).unwrap();
        assert_eq!(cols, img.width());
        let edges = curvemark::detect_edges(img, &IsefParams::default()).unwrap();
        let f = curvemark::pca_features(&edges, rows).unwrap();
        out.push(curvemark::normalize(&f).unwrap());
    }
    out.try_into().unwrap()
}

pub fn default_bundle(seed: u64, gain: f64) -> WatermarkBundle {
    let g = curvemark::Geometry::with_defaults(512, 512).unwrap();
    let wedges = curvemark::watermark::default_wedge_map();
    WatermarkBundle::new(feature_set(seed, &wedges, &g), gain, wedges).unwrap()
}
