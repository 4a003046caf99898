//! PCA feature matrices derived from edge maps, their normalization, and
//! the `CMF1` binary file format.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::isef::EdgeMap;

const MAGIC: &[u8; 4] = b"CMF1";
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

/// Eigenvalues below this fraction of the covariance trace count as zero.
const EIGEN_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
    /// Factor the raw features were divided by; 1 when never normalized.
    pub norm_scale: f64,
    /// Offset of the normalizing affine map (always 0 for max-abs scaling).
    pub norm_offset: f64,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        Self::with_scale(values, 1.0)
    }

    pub fn with_scale(values: Array2<f64>, norm_scale: f64) -> Result<Self> {
        let (r, c) = values.dim();
        if r == 0 || c == 0 {
            return Err(Error::InvalidParameter(format!("empty feature matrix {r}x{c}")));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        if !(norm_scale.is_finite() && norm_scale > 0.0) {
            return Err(Error::InvalidParameter(format!("norm_scale must be positive, got {norm_scale}")));
        }
        Ok(Self { values, norm_scale, norm_offset: 0.0 })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { values: Array2::zeros((rows, cols)), norm_scale: 1.0, norm_offset: 0.0 }
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Projects the edge map's columns, as centered observations, onto the
/// `target_rows` leading principal axes. Output is `target_rows x width`.
pub fn pca_features(edges: &EdgeMap, target_rows: usize) -> Result<FeatureMatrix> {
    let (h, w) = (edges.height(), edges.width());
    if h == 0 || w == 0 {
        return Err(Error::InvalidParameter("empty edge map".into()));
    }
    if target_rows == 0 || target_rows > h {
        return Err(Error::InvalidParameter(format!(
            "target_rows must be in 1..={h}, got {target_rows}"
        )));
    }
    let data = DMatrix::from_fn(h, w, |r, c| f64::from(edges.bits()[[r, c]]));
    let mean = data.column_mean();
    let centered = DMatrix::from_fn(h, w, |r, c| data[(r, c)] - mean[r]);
    let dof = w.saturating_sub(1).max(1) as f64;
    let cov = (&centered * centered.transpose()) / dof;
    let trace = cov.trace();
    if trace <= 0.0 {
        return Ok(FeatureMatrix::zeros(target_rows, w));
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..h).collect();
    // stable sort keeps the original index order among equal eigenvalues
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut out = Array2::zeros((target_rows, w));
    for (row, &k) in order.iter().take(target_rows).enumerate() {
        if eig.eigenvalues[k] < EIGEN_TOL * trace {
            continue;
        }
        let mut axis = eig.eigenvectors.column(k).clone_owned();
        let lead = axis.iter().enumerate().fold(0, |best, (i, v)| {
            if v.abs() > axis[best].abs() {
                i
            } else {
                best
            }
        });
        if axis[lead] < 0.0 {
            axis.neg_mut();
        }
        let projected = axis.transpose() * &centered;
        for c in 0..w {
            out[[row, c]] = projected[c];
        }
    }
    FeatureMatrix::new(out)
}

/// Max-absolute-value scaling into `[-1, 1]`. The divisor is folded into
/// `norm_scale`, so normalizing twice is the same as once.
pub fn normalize(f: &FeatureMatrix) -> Result<FeatureMatrix> {
    if let Some(pos) = f.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(pos));
    }
    let m = f.max_abs();
    if m == 0.0 {
        return Ok(f.clone());
    }
    FeatureMatrix::with_scale(f.values.mapv(|v| v / m), f.norm_scale * m)
}

pub fn encode_features(f: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * f.values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(f.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(f.cols() as u32).to_le_bytes());
    out.extend_from_slice(&f.norm_scale.to_le_bytes());
    for v in f.values.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_features(data: &[u8]) -> Result<FeatureMatrix> {
    if data.len() < HEADER_LEN {
        return Err(Error::FeatureFormat(format!("{} bytes is shorter than the header", data.len())));
    }
    if &data[..4] != MAGIC {
        return Err(Error::FeatureFormat("missing CMF1 magic".into()));
    }
    let word = |at: usize| u32::from_le_bytes(data[at..at + 4].try_into().expect("4 bytes")) as usize;
    let (rows, cols) = (word(4), word(8));
    let norm_scale = f64::from_le_bytes(data[12..20].try_into().expect("8 bytes"));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::FeatureFormat(format!("{rows}x{cols} overflows")))?;
    let payload = &data[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::FeatureFormat(format!(
            "{rows}x{cols} needs {expected} payload bytes, found {}",
            payload.len()
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    let values = Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| Error::FeatureFormat(e.to_string()))?;
    FeatureMatrix::with_scale(values, norm_scale).map_err(|e| Error::FeatureFormat(e.to_string()))
}

pub fn write_features(f: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_features(f)).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&data)
}
