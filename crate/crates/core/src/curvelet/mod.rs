//! Wrapping-based fast discrete curvelet transform.
//!
//! The frame is tight: the adjoint is the inverse and coefficient energy
//! equals image energy. Cells are addressed by 1-based `(scale, wedge)`.
//! Scale 1 holds the coarse lowpass cell, scale `scales` the finest
//! isotropic cell; every scale in between is split into angular wedges
//! numbered clockwise from the upper-left diagonal.

mod fft;
mod geometry;
mod plan;
mod window;

pub use fft::{fft2c, fftshift, ifft2c, ifftshift};
pub use geometry::{Geometry, WedgeIndex};
pub use plan::CurveletPlan;
pub use window::transition;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex coefficients of one image, grouped by scale then wedge.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveletPyramid {
    geometry: Geometry,
    cells: Vec<Vec<Array2<Complex64>>>,
}

impl CurveletPyramid {
    /// All-zero pyramid with the transform's cell shapes.
    pub fn zeros(plan: &CurveletPlan) -> Self {
        let g = *plan.geometry();
        let cells = (1..=g.scales)
            .map(|s| {
                (1..=g.angles(s))
                    .map(|w| Array2::zeros(plan.cell_dims(s, w)))
                    .collect()
            })
            .collect();
        Self { geometry: g, cells }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn wedge(&self, idx: WedgeIndex) -> Result<&Array2<Complex64>> {
        self.geometry.check(idx)?;
        Ok(&self.cells[idx.scale - 1][idx.wedge - 1])
    }

    pub fn wedge_mut(&mut self, idx: WedgeIndex) -> Result<&mut Array2<Complex64>> {
        self.geometry.check(idx)?;
        Ok(&mut self.cells[idx.scale - 1][idx.wedge - 1])
    }

    /// Replaces a cell, rejecting shape changes.
    pub fn set_wedge(&mut self, idx: WedgeIndex, values: Array2<Complex64>) -> Result<()> {
        let cell = self.wedge_mut(idx)?;
        if cell.dim() != values.dim() {
            return Err(Error::DimensionMismatch {
                left: cell.dim(),
                right: values.dim(),
            });
        }
        *cell = values;
        Ok(())
    }

    pub fn cells(&self) -> &[Vec<Array2<Complex64>>] {
        &self.cells
    }

    /// Sum of squared magnitudes over every cell.
    pub fn energy(&self) -> f64 {
        self.cells
            .iter()
            .flatten()
            .flat_map(|c| c.iter())
            .map(|z| z.norm_sqr())
            .sum()
    }
}

/// Forward transform with a freshly built plan. Prefer [`CurveletPlan`]
/// when transforming several images of the same shape.
pub fn fdct_forward(image: &Array2<f64>, geometry: Geometry) -> Result<CurveletPyramid> {
    if let Some(pos) = image.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(pos));
    }
    CurveletPlan::new(geometry).forward(image)
}

/// Inverse transform; returns the real part of the reconstruction.
pub fn fdct_inverse(pyramid: &CurveletPyramid) -> Result<Array2<f64>> {
    let plan = CurveletPlan::new(pyramid.geometry);
    Ok(plan.inverse_complex(pyramid)?.mapv(|z| z.re))
}
