//! Precomputed wrapping tables for the forward transform and its adjoint.

use ndarray::{s, Array2, ArrayView2, ArrayViewMut2, Zip};
use num_complex::Complex64;
use rayon::prelude::*;

use super::fft::{fft2c, ifft2c};
use super::geometry::{Geometry, QuadrantLayout};
use super::window::{radial_pair, transition};
use super::CurveletPyramid;
use crate::error::{Error, Result};

/// One windowed sample: spectrum position `src` contributes `weight` times
/// its value to wrapped-rectangle position `out`.
#[derive(Clone, Copy, Debug)]
struct Tap {
    out: u32,
    src: u32,
    weight: f64,
}

#[derive(Clone, Debug)]
struct WedgePlan {
    dims: (usize, usize),
    taps: Vec<Tap>,
}

#[derive(Clone, Debug)]
struct ScalePlan {
    /// Side lengths of this scale's band-limited spectrum.
    size: (usize, usize),
    /// Half-widths of the central block handed to the next coarser scale.
    inner: (usize, usize),
    lowpass: Array2<f64>,
    hipass: Array2<f64>,
    wedges: Vec<WedgePlan>,
}

/// Reusable transform plan for one [`Geometry`].
#[derive(Clone, Debug)]
pub struct CurveletPlan {
    geometry: Geometry,
    finest_lowpass: Array2<f64>,
    finest_hipass: Array2<f64>,
    /// Directional scales ordered from finest (`scales - 1`) to scale 2.
    directional: Vec<ScalePlan>,
}

#[derive(Clone, Copy)]
enum Clamp {
    None,
    Low,
    High,
}

struct Frame {
    quadrant: usize,
    rows: i64,
    cols: i64,
    /// Dimensions of the unrotated spectrum.
    orig_cols: usize,
}

impl Frame {
    /// Maps a 1-based position of the quadrant's rotated frame back to a
    /// flat index into the unrotated spectrum.
    fn source(&self, row: i64, col: i64) -> u32 {
        let (mut r, mut c) = (row, col);
        let (mut m, mut n) = (self.rows, self.cols);
        for _ in 1..self.quadrant {
            // undo one counter-clockwise quarter turn
            let (nr, nc) = (c, m + 1 - r);
            r = nr;
            c = nc;
            std::mem::swap(&mut m, &mut n);
        }
        ((r - 1) as usize * self.orig_cols + (c - 1) as usize) as u32
    }
}

/// Position of `(r, c)` in an `m x n` array after `turns` clockwise quarter
/// turns, returned as `(r, c, rows, cols)`.
fn rotate_cw(mut r: usize, mut c: usize, mut m: usize, mut n: usize, turns: usize) -> (usize, usize, usize, usize) {
    for _ in 0..turns % 4 {
        let (nr, nc) = (c, m - 1 - r);
        r = nr;
        c = nc;
        std::mem::swap(&mut m, &mut n);
    }
    (r, c, m, n)
}

#[allow(clippy::too_many_arguments)]
fn build_wedge(
    frame: &Frame,
    length: i64,
    width: i64,
    left_line: impl Fn(i64) -> i64,
    first_row: i64,
    first_col: i64,
    clamp: Clamp,
    weight: impl Fn(f64, f64) -> f64,
) -> WedgePlan {
    let mut taps = Vec::with_capacity((length * width) as usize);
    let mut dims = (0, 0);
    for y in 1..=length {
        let ll = left_line(y);
        let new_row = (y - first_row).rem_euclid(length) as usize;
        for i in 0..width {
            let col = ll + (i - (ll - first_col)).rem_euclid(width);
            let (adm, valid) = match clamp {
                Clamp::None => (col, (1..=frame.cols).contains(&col)),
                Clamp::Low => (col.max(1), col > 0),
                Clamp::High => (col.min(frame.cols), col <= frame.cols),
            };
            // undo the frame rotation, then transpose so that quadrant-1
            // wedges are stored width x length
            let (c, r, n, m) = rotate_cw(new_row, i as usize, length as usize, width as usize, frame.quadrant - 1);
            dims = (m, n);
            if !valid {
                continue;
            }
            let w = weight(adm as f64, y as f64);
            if w == 0.0 {
                continue;
            }
            taps.push(Tap {
                out: (r * n + c) as u32,
                src: frame.source(y, adm),
                weight: w,
            });
        }
    }
    WedgePlan { dims, taps }
}

/// Angular coordinate that is 1/2 on the ray through `mid` (at the top row)
/// and the spectrum center, and moves by one across `spacing` columns.
fn ray_coordinate(layout: &QuadrantLayout, mid: f64, spacing: i64, xx: f64, yy: f64) -> f64 {
    let fh = layout.fh as f64;
    let fv = layout.fv as f64;
    let slope = (fh + 1.0 - mid) / fv;
    let mid_line = mid + slope * (yy - 1.0);
    0.5 + fv / spacing as f64 * (xx - mid_line) / (fv + 1.0 - yy)
}

fn quadrant_wedges(layout: &QuadrantLayout, frame: &Frame) -> Vec<WedgePlan> {
    let q = frame.quadrant;
    let n = layout.per_quadrant;
    let e = &layout.endpoints;
    let mids = &layout.midpoints;
    let fh = layout.fh;
    let fv = layout.fv;
    let (fhf, fvf) = (fh as f64, fv as f64);
    let row_shift = |len: i64| ((len + 1) % 2) * i64::from(q == 2 || q == 3);
    let col_shift = |wid: i64| ((wid + 1) % 2) * i64::from(q == 3 || q == 4);
    let first_row = |len: i64| fv + 2 - (len + 2) / 2 + row_shift(len);
    let first_col = |wid: i64| fh + 2 - (wid + 2) / 2 + col_shift(wid);
    let fwev = layout.first_vert_endpoint as f64;
    let corner_q = 2.0 * fvf / (fwev - 1.0) - 1.0;

    let mut plans = Vec::with_capacity(n);

    // left corner, straddling the diagonal shared with the previous quadrant
    {
        let length = layout.corner_length();
        let width = layout.width(0);
        let slope = (fhf + 1.0 - e[0] as f64) / fvf;
        let p = 2.0 * fhf / (e[0] as f64 - 1.0) - 1.0;
        let c2 = 1.0 / (1.0 / p + 1.0 / corner_q);
        let c1 = c2 / corner_q;
        plans.push(build_wedge(
            frame,
            length,
            width,
            |y| (2.0 - e[0] as f64 + slope * (y - 1) as f64).round() as i64,
            first_row(length),
            first_col(width),
            Clamp::Low,
            |xx, yy| {
                let (_, wr) = transition(ray_coordinate(layout, mids[0], e[1] - e[0], xx, yy));
                let mut u = (xx - 1.0) / fhf;
                let v = (yy - 1.0) / fvf;
                if u + v == 2.0 {
                    u = xx / fhf;
                }
                let (wl, _) = transition(c1 + c2 * (u - v) / (2.0 - (u + v)));
                wl * wr
            },
        ));
    }

    // regular wedges
    let length = layout.regular_length();
    for sub in 1..n - 1 {
        let width = layout.width(sub);
        let slope = (fhf + 1.0 - e[sub] as f64) / fvf;
        let start = e[sub - 1] as f64;
        plans.push(build_wedge(
            frame,
            length,
            width,
            |y| (start + slope * (y - 1) as f64).round() as i64,
            first_row(length),
            first_col(width),
            Clamp::None,
            |xx, yy| {
                let (wl, _) = transition(ray_coordinate(layout, mids[sub - 1], e[sub] - e[sub - 1], xx, yy));
                let (_, wr) = transition(ray_coordinate(layout, mids[sub], e[sub + 1] - e[sub], xx, yy));
                wl * wr
            },
        ));
    }

    // right corner, straddling the diagonal shared with the next quadrant
    {
        let length = layout.corner_length();
        let width = layout.width(n - 1);
        let last = e[n - 1] as f64;
        let slope = (fhf + 1.0 - last) / fvf;
        let start = e[n - 2] as f64;
        let a = 2.0 * fhf / (last - 1.0) - 1.0;
        let c2 = -1.0 / (a + 1.0 / corner_q);
        let c1 = -c2 * a;
        plans.push(build_wedge(
            frame,
            length,
            width,
            |y| (start + slope * (y - 1) as f64).round() as i64,
            first_row(length),
            first_col(width),
            Clamp::High,
            |xx, yy| {
                let (wl, _) = transition(ray_coordinate(layout, mids[n - 2], e[n - 1] - e[n - 2], xx, yy));
                let mut u = (xx - 1.0) / fhf;
                let v = (yy - 1.0) / fvf;
                if u == v {
                    u = (xx - 2.0) / fhf;
                }
                let (_, wr) = transition(c1 + c2 * (2.0 - (u + v)) / (u - v));
                wl * wr
            },
        ));
    }
    plans
}

fn weighted(values: ArrayView2<Complex64>, weights: &Array2<f64>) -> Array2<Complex64> {
    Zip::from(values).and(weights).map_collect(|&z, &w| z * w)
}

fn scale_in_place(mut values: ArrayViewMut2<Complex64>, weights: &Array2<f64>) {
    Zip::from(&mut values).and(weights).for_each(|z, &w| *z *= w);
}

/// `block = block * high + low * lowpass`
fn merge_band(mut block: ArrayViewMut2<Complex64>, high: &Array2<f64>, low: &Array2<Complex64>, lowpass: &Array2<f64>) {
    Zip::from(&mut block)
        .and(high)
        .and(low)
        .and(lowpass)
        .for_each(|z, &h, &l, &lp| *z = *z * h + l * lp);
}

fn center_block(size: (usize, usize), half: (usize, usize)) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    let (c1, c2) = (size.0 / 2, size.1 / 2);
    (c1 - half.0..c1 + half.0 + 1, c2 - half.1..c2 + half.1 + 1)
}

impl CurveletPlan {
    pub fn new(geometry: Geometry) -> Self {
        let mut m1 = geometry.rows as f64 / 3.0 / 2.0;
        let mut m2 = geometry.cols as f64 / 3.0 / 2.0;
        let (finest_lowpass, finest_hipass) = radial_pair(m1, m2);

        let mut directional = Vec::new();
        for scale in (2..geometry.scales).rev() {
            m1 /= 2.0;
            m2 /= 2.0;
            let (lowpass, hipass) = radial_pair(m1, m2);
            let f1 = (4.0 * m1).floor() as usize;
            let f2 = (4.0 * m2).floor() as usize;
            let size = (2 * f1 + 1, 2 * f2 + 1);
            let inner = ((2.0 * m1).floor() as usize, (2.0 * m2).floor() as usize);
            let per_quadrant = geometry.angles(scale) / 4;
            let mut wedges = Vec::with_capacity(geometry.angles(scale));
            for quadrant in 1..=4 {
                let layout = geometry.quadrant_layout(quadrant, m1, m2, per_quadrant);
                let frame = Frame {
                    quadrant,
                    rows: 2 * layout.fv + 1,
                    cols: 2 * layout.fh + 1,
                    orig_cols: size.1,
                };
                wedges.extend(quadrant_wedges(&layout, &frame));
            }
            directional.push(ScalePlan {
                size,
                inner,
                lowpass,
                hipass,
                wedges,
            });
        }
        Self {
            geometry,
            finest_lowpass,
            finest_hipass,
            directional,
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    fn finest_half(&self) -> (usize, usize) {
        let (r, c) = self.finest_lowpass.dim();
        (r / 2, c / 2)
    }

    /// Forward transform of a real image whose shape matches the plan.
    pub fn forward(&self, image: &Array2<f64>) -> Result<CurveletPyramid> {
        let g = self.geometry;
        if image.dim() != (g.rows, g.cols) {
            return Err(Error::DimensionMismatch {
                left: image.dim(),
                right: (g.rows, g.cols),
            });
        }
        let spectrum = fft2c(&image.mapv(|v| Complex64::new(v, 0.0)));
        let mut cells: Vec<Vec<Array2<Complex64>>> = vec![Vec::new(); g.scales];

        let (rr, cr) = center_block((g.rows, g.cols), self.finest_half());
        let mut high = spectrum.clone();
        scale_in_place(high.slice_mut(s![rr.clone(), cr.clone()]), &self.finest_hipass);
        cells[g.scales - 1].push(ifft2c(&high));
        let mut low = weighted(spectrum.slice(s![rr, cr]), &self.finest_lowpass);

        for (k, plan) in self.directional.iter().enumerate() {
            let scale = g.scales - 1 - k;
            debug_assert_eq!(low.dim(), plan.size);
            let (rr, cr) = center_block(plan.size, plan.inner);
            let next_low = weighted(low.slice(s![rr.clone(), cr.clone()]), &plan.lowpass);
            scale_in_place(low.slice_mut(s![rr, cr]), &plan.hipass);
            let band = low.as_slice().expect("standard layout");
            cells[scale - 1] = plan
                .wedges
                .par_iter()
                .map(|wedge| {
                    let mut wrapped = Array2::<Complex64>::zeros(wedge.dims);
                    let out = wrapped.as_slice_mut().expect("standard layout");
                    for tap in &wedge.taps {
                        out[tap.out as usize] = band[tap.src as usize] * tap.weight;
                    }
                    ifft2c(&wrapped)
                })
                .collect();
            low = next_low;
        }
        cells[0].push(ifft2c(&low));
        Ok(CurveletPyramid {
            geometry: g,
            cells,
        })
    }

    /// Adjoint (and, the frame being tight, inverse) transform. Returns the
    /// complex reconstruction; real images come back with a vanishing
    /// imaginary part.
    pub fn inverse_complex(&self, pyramid: &CurveletPyramid) -> Result<Array2<Complex64>> {
        let g = self.geometry;
        if pyramid.geometry != g {
            return Err(Error::GeometryMismatch(format!(
                "pyramid built for {:?}, plan for {:?}",
                pyramid.geometry, g
            )));
        }
        self.check_shapes(pyramid)?;

        let mut low = fft2c(&pyramid.cells[0][0]);
        for (k, plan) in self.directional.iter().enumerate().rev() {
            let scale = g.scales - 1 - k;
            let mut band = Array2::<Complex64>::zeros(plan.size);
            let spectra: Vec<Array2<Complex64>> =
                pyramid.cells[scale - 1].par_iter().map(fft2c).collect();
            {
                let acc = band.as_slice_mut().expect("standard layout");
                for (wedge, spec) in plan.wedges.iter().zip(&spectra) {
                    let values = spec.as_slice().expect("standard layout");
                    for tap in &wedge.taps {
                        acc[tap.src as usize] += values[tap.out as usize] * tap.weight;
                    }
                }
            }
            let (rr, cr) = center_block(plan.size, plan.inner);
            merge_band(band.slice_mut(s![rr, cr]), &plan.hipass, &low, &plan.lowpass);
            low = band;
        }

        let mut spectrum = fft2c(&pyramid.cells[g.scales - 1][0]);
        let (rr, cr) = center_block((g.rows, g.cols), self.finest_half());
        merge_band(spectrum.slice_mut(s![rr, cr]), &self.finest_hipass, &low, &self.finest_lowpass);
        Ok(ifft2c(&spectrum))
    }

    fn check_shapes(&self, pyramid: &CurveletPyramid) -> Result<()> {
        let g = self.geometry;
        if pyramid.cells.len() != g.scales {
            return Err(Error::GeometryMismatch(format!(
                "expected {} scales, found {}",
                g.scales,
                pyramid.cells.len()
            )));
        }
        for (s, cells) in pyramid.cells.iter().enumerate() {
            let scale = s + 1;
            if cells.len() != g.angles(scale) {
                return Err(Error::GeometryMismatch(format!(
                    "scale {scale}: expected {} wedges, found {}",
                    g.angles(scale),
                    cells.len()
                )));
            }
            for (w, cell) in cells.iter().enumerate() {
                let expected = self.cell_dims(scale, w + 1);
                if cell.dim() != expected {
                    return Err(Error::GeometryMismatch(format!(
                        "cell ({scale},{}) is {:?}, expected {:?}",
                        w + 1,
                        cell.dim(),
                        expected
                    )));
                }
            }
        }
        Ok(())
    }

    /// Cell shape as produced by this plan.
    pub(crate) fn cell_dims(&self, scale: usize, wedge: usize) -> (usize, usize) {
        let g = self.geometry;
        if scale == g.scales {
            (g.rows, g.cols)
        } else if scale == 1 {
            self.directional
                .last()
                .map(|p| p.lowpass.dim())
                .unwrap_or(self.finest_lowpass.dim())
        } else {
            self.directional[g.scales - 1 - scale].wedges[wedge - 1].dims
        }
    }
}
