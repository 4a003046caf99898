//! Shen-Castan edge detection: ISEF smoothing, binary Laplacian zero
//! crossings, non-maximum suppression, adaptive gradient, hysteresis and
//! thinning.

use std::collections::VecDeque;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

/// Smoothed-minus-original margin above which a pixel counts as positive
/// in the binary Laplacian image.
const BLI_MARGIN: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsefParams {
    /// Smoothing factor in `(0, 1)`; larger means wider smoothing.
    pub b: f64,
    pub low_frac: f64,
    pub high_frac: f64,
    /// Side of the adaptive-gradient window.
    pub window: usize,
}

impl Default for IsefParams {
    fn default() -> Self {
        Self {
            b: 0.9,
            low_frac: 0.05,
            high_frac: 0.15,
            window: 7,
        }
    }
}

impl IsefParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b < 1.0) {
            return Err(Error::InvalidParameter(format!("b must be in (0,1), got {}", self.b)));
        }
        if !(0.0 <= self.low_frac && self.low_frac < self.high_frac && self.high_frac <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= low_frac < high_frac <= 1, got {} / {}",
                self.low_frac, self.high_frac
            )));
        }
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "window must be odd and >= 3, got {}",
                self.window
            )));
        }
        Ok(())
    }
}

/// Binary edge map, 1 marks an edge pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeMap {
    bits: Array2<u8>,
}

impl EdgeMap {
    pub fn new(bits: Array2<u8>) -> Result<Self> {
        if bits.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParameter("edge map values must be 0 or 1".into()));
        }
        Ok(Self { bits })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { bits: Array2::zeros((height, width)) }
    }

    pub fn height(&self) -> usize {
        self.bits.nrows()
    }

    pub fn width(&self) -> usize {
        self.bits.ncols()
    }

    pub fn bits(&self) -> &Array2<u8> {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&v| v == 1).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Edges rendered white on black.
    pub fn to_image(&self) -> GrayImage {
        GrayImage::new(self.bits.mapv(f64::from)).expect("binary values are valid intensities")
    }
}

fn smooth_line(line: &mut [f64], b: f64) {
    let n = line.len();
    if n == 0 {
        return;
    }
    let a = 1.0 - b;
    let mut causal = vec![0.0; n];
    let mut anti = vec![0.0; n];
    causal[0] = line[0];
    for i in 1..n {
        causal[i] = a * line[i] + b * causal[i - 1];
    }
    anti[n - 1] = line[n - 1];
    for i in (0..n - 1).rev() {
        anti[i] = a * line[i] + b * anti[i + 1];
    }
    for i in 0..n {
        line[i] = (causal[i] + anti[i] - a * line[i]) / (1.0 + b);
    }
}

/// Separable symmetric exponential smoothing, rows then columns, with
/// replicated borders. Constant images are fixed points.
pub fn isef_smooth(img: &Array2<f64>, b: f64) -> Result<Array2<f64>> {
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::InvalidParameter(format!("b must be in (0,1), got {b}")));
    }
    let mut out = img.to_owned();
    let mut buf = Vec::with_capacity(out.nrows().max(out.ncols()));
    for mut row in out.rows_mut() {
        buf.clear();
        buf.extend(row.iter());
        smooth_line(&mut buf, b);
        row.iter_mut().zip(&buf).for_each(|(d, &s)| *d = s);
    }
    for mut col in out.columns_mut() {
        buf.clear();
        buf.extend(col.iter());
        smooth_line(&mut buf, b);
        col.iter_mut().zip(&buf).for_each(|(d, &s)| *d = s);
    }
    Ok(out)
}

/// Zero crossing of the binary Laplacian image with a slope sign that
/// matches the crossing direction.
fn is_candidate(bli: &Array2<u8>, smooth: &Array2<f64>, r: usize, c: usize) -> bool {
    if bli[[r, c]] != 1 {
        return false;
    }
    if bli[[r + 1, c]] == 0 {
        smooth[[r + 1, c]] - smooth[[r - 1, c]] > 0.0
    } else if bli[[r, c + 1]] == 0 {
        smooth[[r, c + 1]] - smooth[[r, c - 1]] > 0.0
    } else if bli[[r - 1, c]] == 0 {
        smooth[[r + 1, c]] - smooth[[r - 1, c]] < 0.0
    } else if bli[[r, c - 1]] == 0 {
        smooth[[r, c + 1]] - smooth[[r, c - 1]] < 0.0
    } else {
        false
    }
}

fn central_gradient(smooth: &Array2<f64>, r: usize, c: usize) -> (f64, f64) {
    let (h, w) = smooth.dim();
    let gx = smooth[[r, (c + 1).min(w - 1)]] - smooth[[r, c.saturating_sub(1)]];
    let gy = smooth[[(r + 1).min(h - 1), c]] - smooth[[r.saturating_sub(1), c]];
    (gx, gy)
}

/// Mean original intensity off versus on the Laplacian-positive region in a
/// window around `(r, c)`.
fn adaptive_gradient(img: &Array2<f64>, bli: &Array2<u8>, r: usize, c: usize, window: usize) -> f64 {
    let (h, w) = img.dim();
    let half = window / 2;
    let (mut on, mut n_on, mut off, mut n_off) = (0.0, 0usize, 0.0, 0usize);
    for i in r.saturating_sub(half)..(r + half + 1).min(h) {
        for j in c.saturating_sub(half)..(c + half + 1).min(w) {
            if bli[[i, j]] == 1 {
                on += img[[i, j]];
                n_on += 1;
            } else {
                off += img[[i, j]];
                n_off += 1;
            }
        }
    }
    let avg = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    (avg(off, n_off) - avg(on, n_on)).abs()
}

const NEIGHBORS: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)];

fn hysteresis(grad: &Array2<f64>, low: f64, high: f64) -> Array2<u8> {
    let (h, w) = grad.dim();
    let mut out = Array2::<u8>::zeros((h, w));
    let mut queue = VecDeque::new();
    for ((r, c), &g) in grad.indexed_iter() {
        if g > 0.0 && g >= high {
            out[[r, c]] = 1;
            queue.push_back((r, c));
        }
    }
    while let Some((r, c)) = queue.pop_front() {
        for (dr, dc) in NEIGHBORS {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                continue;
            }
            let (nr, nc) = (nr as usize, nc as usize);
            if out[[nr, nc]] == 0 && grad[[nr, nc]] > 0.0 && grad[[nr, nc]] >= low {
                out[[nr, nc]] = 1;
                queue.push_back((nr, nc));
            }
        }
    }
    out
}

/// Neighborhood of `(r, c)` clockwise from north-west, treating outside as 0.
fn ring(bits: &Array2<u8>, r: usize, c: usize) -> [u8; 8] {
    let (h, w) = bits.dim();
    let mut out = [0u8; 8];
    for (k, (dr, dc)) in NEIGHBORS.iter().enumerate() {
        let (nr, nc) = (r as isize + dr, c as isize + dc);
        if nr >= 0 && nc >= 0 && (nr as usize) < h && (nc as usize) < w {
            out[k] = bits[[nr as usize, nc as usize]];
        }
    }
    out
}

/// Yokoi 8-connectivity number; a foreground pixel is simple iff it is 1.
fn connectivity_number(n: &[u8; 8]) -> u8 {
    // reorder to start at east and run counter-clockwise: E, NE, N, NW, W, SW, S, SE
    let x = [n[3], n[2], n[1], n[0], n[7], n[6], n[5], n[4]];
    let inv = |v: u8| 1 - v;
    let mut total = 0;
    for k in [0, 2, 4, 6] {
        total += inv(x[k]) - inv(x[k]) * inv(x[(k + 1) % 8]) * inv(x[(k + 2) % 8]);
    }
    total
}

fn is_endpoint(n: &[u8; 8]) -> bool {
    let set: Vec<usize> = (0..8).filter(|&k| n[k] == 1).collect();
    match set.len() {
        0 | 1 => true,
        2 => {
            let (a, b) = (NEIGHBORS[set[0]], NEIGHBORS[set[1]]);
            (a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1
        }
        _ => false,
    }
}

/// Directional sequential thinning to 8-connected one-pixel-wide curves.
/// Endpoints are kept so open curves keep their length; a thin map is a
/// fixed point.
pub fn thin(bits: &Array2<u8>) -> Array2<u8> {
    let mut out = bits.mapv(|v| u8::from(v != 0));
    let (h, w) = out.dim();
    // ring slots of the N, S, E, W four-neighbors
    let sides = [1usize, 5, 3, 7];
    loop {
        let mut changed = false;
        for &side in &sides {
            let mut marked = Vec::new();
            for r in 0..h {
                for c in 0..w {
                    if out[[r, c]] == 1 {
                        let n = ring(&out, r, c);
                        if n[side] == 0 && connectivity_number(&n) == 1 && !is_endpoint(&n) {
                            marked.push((r, c));
                        }
                    }
                }
            }
            for (r, c) in marked {
                let n = ring(&out, r, c);
                if connectivity_number(&n) == 1 && !is_endpoint(&n) {
                    out[[r, c]] = 0;
                    changed = true;
                }
            }
        }
        if !changed {
            return out;
        }
    }
}

/// Full edge pipeline on a unit-scale image.
pub fn detect_edges(img: &GrayImage, params: &IsefParams) -> Result<EdgeMap> {
    params.validate()?;
    let (h, w) = img.dim();
    if h < params.window || w < params.window {
        return Err(Error::InvalidParameter(format!(
            "{h}x{w} image is smaller than the {0}x{0} gradient window",
            params.window
        )));
    }
    let orig = img.pixels();
    let smooth = isef_smooth(orig, params.b)?;
    let bli = Array2::from_shape_fn((h, w), |p| u8::from(smooth[p] - orig[p] > BLI_MARGIN));

    let magnitude = Array2::from_shape_fn((h, w), |(r, c)| {
        let (gx, gy) = central_gradient(&smooth, r, c);
        gx.hypot(gy)
    });

    let mut grad = Array2::<f64>::zeros((h, w));
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            if !is_candidate(&bli, &smooth, r, c) {
                continue;
            }
            let (gx, gy) = central_gradient(&smooth, r, c);
            let m = magnitude[[r, c]];
            if m == 0.0 {
                continue;
            }
            // quantize the gradient direction to one of four neighbor steps,
            // oriented toward the bright side of the crossing
            let angle = gy.atan2(gx).to_degrees().rem_euclid(180.0);
            let (mut dr, mut dc): (isize, isize) = if !(22.5..157.5).contains(&angle) {
                (0, 1)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (1, 0)
            } else {
                (1, -1)
            };
            if dr as f64 * gy + dc as f64 * gx < 0.0 {
                (dr, dc) = (-dr, -dc);
            }
            // the crossing lies between this pixel and the next one along the
            // gradient, so the pair is compared against the pixels beyond it
            let at = |k: isize| {
                let (rr, cc) = (r as isize + k * dr, c as isize + k * dc);
                if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                    0.0
                } else {
                    magnitude[[rr as usize, cc as usize]]
                }
            };
            let pair = m.max(at(1));
            if pair >= at(-1) && pair >= at(2) {
                grad[[r, c]] = adaptive_gradient(orig, &bli, r, c, params.window);
            }
        }
    }

    let peak = grad.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Ok(EdgeMap::zeros(h, w));
    }
    let linked = hysteresis(&grad, params.low_frac * peak, params.high_frac * peak);
    Ok(EdgeMap { bits: thin(&linked) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> GrayImage {
        GrayImage::from_fn(h, w, |(r, c)| f(r, c)).unwrap()
    }

    #[test]
    fn constant_is_fixed_point() {
        let x = Array2::from_elem((9, 11), 0.37);
        for b in [0.1, 0.5, 0.9, 0.99] {
            let y = isef_smooth(&x, b).unwrap();
            assert!(y.iter().all(|v| (v - 0.37).abs() < 1e-14));
        }
    }

    #[test]
    fn impulse_response_is_exponential() {
        let b = 0.6;
        let n = 81;
        let mut x = Array2::zeros((n, n));
        x[[40, 40]] = 1.0;
        let y = isef_smooth(&x, b).unwrap();
        let tap = (1.0 - b) / (1.0 + b);
        assert!((y[[40, 40]] - tap * tap).abs() < 1e-15);
        for d in 0..10 {
            assert!((y[[40, 41 + d]] / y[[40, 40 + d]] - b).abs() < 1e-12);
            assert!((y[[41 + d, 40]] / y[[40 + d, 40]] - b).abs() < 1e-12);
            assert!((y[[40, 40 - d]] - y[[40, 40 + d]]).abs() < 1e-18);
        }
    }

    #[test]
    fn tiny_b_is_identity() {
        let x = Array2::from_shape_fn((8, 8), |(r, c)| ((r * 7 + c * 3) % 5) as f64 / 5.0);
        let y = isef_smooth(&x, 1e-12).unwrap();
        assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn constant_image_has_no_edges() {
        let e = detect_edges(&image(32, 32, |_, _| 0.6), &IsefParams::default()).unwrap();
        assert!(e.is_empty());
    }

    #[test]
    fn step_gives_single_thin_column() {
        let img = image(128, 128, |_, c| if c < 64 { 0.2 } else { 0.8 });
        let e = detect_edges(&img, &IsefParams::default()).unwrap();
        assert!(e.count() > 100);
        for row in e.bits().rows() {
            let cols: Vec<usize> = (0..128).filter(|&c| row[c] == 1).collect();
            assert!(cols.len() <= 1, "{cols:?}");
            for c in cols {
                assert!((62..=65).contains(&c), "edge at column {c}");
            }
        }
    }

    #[test]
    fn thin_lines_are_fixed_points() {
        let mut bits = Array2::<u8>::zeros((30, 30));
        for i in 2..18 {
            bits[[2, i]] = 1;
            bits[[i + 4, 27 - i]] = 1;
        }
        bits[[25, 25]] = 1;
        // closed ring
        for i in 6..12 {
            bits[[6, i - 4]] = 1;
            bits[[11, i - 4]] = 1;
            bits[[i, 2]] = 1;
            bits[[i, 7]] = 1;
        }
        assert_eq!(thin(&bits), bits);
        let block = Array2::<u8>::from_elem((6, 9), 1);
        let once = thin(&block);
        assert_eq!(thin(&once), once);
        assert!(once.iter().filter(|&&v| v == 1).count() < 20);
        for ((r, c), &v) in once.indexed_iter() {
            if v == 1 {
                let n = ring(&once, r, c);
                assert!(connectivity_number(&n) != 1 || is_endpoint(&n));
            }
        }
    }

    #[test]
    fn rejects_bad_params_and_small_images() {
        let img = image(5, 5, |_, _| 0.5);
        assert!(detect_edges(&img, &IsefParams::default()).is_err());
        let bad = IsefParams { b: 1.0, ..IsefParams::default() };
        assert!(bad.validate().is_err());
        let bad = IsefParams { window: 4, ..IsefParams::default() };
        assert!(bad.validate().is_err());
        let bad = IsefParams { low_frac: 0.2, ..IsefParams::default() };
        assert!(bad.validate().is_err());
    }
}
