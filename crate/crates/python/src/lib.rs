//! Python bindings. Images and matrices cross the boundary as numpy arrays.

use std::path::PathBuf;

use ::curvemark as cm;
use cm::attacks::AttackSpec;
use cm::cli::SidecarRecord;
use cm::curvelet::CurveletPyramid;
use cm::{FeatureMatrix, WedgeIndex};
use num_complex::Complex64;
use numpy::{IntoPyArray, PyArray2, PyReadonlyArray2};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn err(e: cm::Error) -> PyErr {
    match e {
        cm::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn geometry_for(rows: usize, cols: usize, scales: Option<usize>, angles_coarse: usize) -> PyResult<cm::Geometry> {
    let g = match scales {
        Some(s) => cm::Geometry::new(rows, cols, s, angles_coarse),
        None => cm::Geometry::with_defaults(rows, cols)
            .and_then(|d| cm::Geometry::new(rows, cols, d.scales, angles_coarse)),
    };
    g.map_err(err)
}

/// Grayscale image with samples on the unit scale.
#[pyclass(name = "GrayImage", module = "curvemark_py", skip_from_py_object)]
#[derive(Clone)]
pub struct PyGrayImage {
    inner: cm::GrayImage,
}

#[pymethods]
impl PyGrayImage {
    /// Wraps a 2-D float array; values are clamped to [0, 1].
    #[new]
    fn new(pixels: PyReadonlyArray2<'_, f64>) -> PyResult<Self> {
        let inner = cm::GrayImage::new(pixels.as_array().to_owned()).map_err(err)?;
        Ok(Self { inner })
    }

    /// Reads a PGM, or a float64 .npy file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: cm::load_image(&path).map_err(err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        cm::save_image(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.dim()
    }

    fn pixels<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        self.inner.pixels().clone().into_pyarray(py)
    }

    fn __repr__(&self) -> String {
        let (h, w) = self.inner.dim();
        format!("GrayImage({h}x{w})")
    }
}

/// Feature matrix with its normalization scale.
#[pyclass(name = "Features", module = "curvemark_py", from_py_object)]
#[derive(Clone)]
pub struct PyFeatures {
    inner: FeatureMatrix,
}

#[pymethods]
impl PyFeatures {
    #[new]
    #[pyo3(signature = (values, norm_scale = 1.0))]
    fn new(values: PyReadonlyArray2<'_, f64>, norm_scale: f64) -> PyResult<Self> {
        let inner = FeatureMatrix::with_scale(values.as_array().to_owned(), norm_scale).map_err(err)?;
        Ok(Self { inner })
    }

    /// Edge detection, PCA to `rows` components, then max-abs normalization.
    #[staticmethod]
    #[pyo3(signature = (image, rows, b = 0.9, low = 0.05, high = 0.15, window = 7))]
    fn from_biometric(image: &PyGrayImage, rows: usize, b: f64, low: f64, high: f64, window: usize) -> PyResult<Self> {
        let params = cm::IsefParams { b, low_frac: low, high_frac: high, window };
        let edges = cm::detect_edges(&image.inner, &params).map_err(err)?;
        let f = cm::pca_features(&edges, rows).and_then(|f| cm::normalize(&f)).map_err(err)?;
        Ok(Self { inner: f })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: cm::features::read_features(&path).map_err(err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        cm::features::write_features(&self.inner, &path).map_err(err)
    }

    fn normalized(&self) -> PyResult<Self> {
        Ok(Self { inner: cm::normalize(&self.inner).map_err(err)? })
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.dim()
    }

    #[getter]
    fn norm_scale(&self) -> f64 {
        self.inner.norm_scale
    }

    fn values<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        self.inner.values().clone().into_pyarray(py)
    }
}

/// Transform layout for an image size.
#[pyclass(name = "Geometry", module = "curvemark_py", skip_from_py_object)]
#[derive(Clone)]
pub struct PyGeometry {
    inner: cm::Geometry,
}

#[pymethods]
impl PyGeometry {
    #[new]
    #[pyo3(signature = (rows, cols, scales = None, angles_coarse = 16))]
    fn new(rows: usize, cols: usize, scales: Option<usize>, angles_coarse: usize) -> PyResult<Self> {
        Ok(Self { inner: geometry_for(rows, cols, scales, angles_coarse)? })
    }

    #[getter]
    fn scales(&self) -> usize {
        self.inner.scales
    }

    fn angles(&self, scale: usize) -> usize {
        self.inner.angles(scale)
    }

    fn wedge_dims(&self, scale: usize, wedge: usize) -> PyResult<(usize, usize)> {
        self.inner.wedge_dims(WedgeIndex::new(scale, wedge)).map_err(err)
    }

    fn __repr__(&self) -> String {
        let g = &self.inner;
        format!("Geometry({}x{}, scales={}, angles_coarse={})", g.rows, g.cols, g.scales, g.angles_coarse)
    }
}

/// Everything extraction needs besides the two images.
#[pyclass(name = "EmbedRecord", module = "curvemark_py", skip_from_py_object)]
#[derive(Clone)]
pub struct PyEmbedRecord {
    inner: cm::EmbedRecord,
}

#[pymethods]
impl PyEmbedRecord {
    #[getter]
    fn gain(&self) -> f64 {
        self.inner.gain
    }

    #[getter]
    fn clamped_pixels(&self) -> usize {
        self.inner.clamped_pixels
    }

    #[getter]
    fn guarded_fraction(&self) -> f64 {
        self.inner.guarded_fraction()
    }

    #[getter]
    fn wedges(&self) -> Vec<(usize, usize)> {
        self.inner.wedge_map.iter().map(|w| (w.scale, w.wedge)).collect()
    }

    /// Writes the JSON sidecar used by the command-line extractor.
    fn save_sidecar(&self, path: PathBuf, feature_paths: [PathBuf; 4]) -> PyResult<()> {
        let refs = feature_paths.each_ref().map(PathBuf::as_path);
        SidecarRecord::new(&self.inner, refs).write(&path).map_err(err)
    }

    #[staticmethod]
    fn load_sidecar(path: PathBuf) -> PyResult<Self> {
        let rec = SidecarRecord::read(&path).and_then(|s| s.embed_record()).map_err(err)?;
        Ok(Self { inner: rec })
    }
}

/// Similarity scores and decision.
#[pyclass(name = "AuthReport", module = "curvemark_py", get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct PyAuthReport {
    scores: [f64; 4],
    s_avg: f64,
    tau: f64,
    authentic: bool,
    psnr_db: Option<f64>,
}

impl From<cm::AuthReport> for PyAuthReport {
    fn from(r: cm::AuthReport) -> Self {
        Self {
            scores: r.scores(),
            s_avg: r.s_avg,
            tau: r.tau,
            authentic: r.decision == cm::Decision::Authenticate,
            psnr_db: r.psnr_db,
        }
    }
}

#[pymethods]
impl PyAuthReport {
    fn __repr__(&self) -> String {
        format!("AuthReport(s_avg={:.4}, tau={}, authentic={})", self.s_avg, self.tau, self.authentic)
    }
}

fn four(features: Vec<PyFeatures>) -> PyResult<[FeatureMatrix; 4]> {
    let v: Vec<FeatureMatrix> = features.into_iter().map(|f| f.inner).collect();
    v.try_into().map_err(|_| PyValueError::new_err("exactly four feature matrices are required"))
}

/// Embeds fingerprint, iris, face and signature features, in that order.
#[pyfunction]
#[pyo3(signature = (host, features, gain = 0.01, wedges = None))]
fn embed(
    host: &PyGrayImage,
    features: Vec<PyFeatures>,
    gain: f64,
    wedges: Option<[(usize, usize); 4]>,
) -> PyResult<(PyGrayImage, PyEmbedRecord)> {
    let map = match wedges {
        Some(w) => w.map(|(s, i)| WedgeIndex::new(s, i)),
        None => cm::watermark::default_wedge_map(),
    };
    let bundle = cm::WatermarkBundle::new(four(features)?, gain, map).map_err(err)?;
    let (marked, record) = cm::embed(&host.inner, &bundle).map_err(err)?;
    Ok((PyGrayImage { inner: marked }, PyEmbedRecord { inner: record }))
}

#[pyfunction]
fn extract(watermarked: &PyGrayImage, host: &PyGrayImage, record: &PyEmbedRecord) -> PyResult<Vec<PyFeatures>> {
    let rec = cm::extract(&watermarked.inner, &host.inner, &record.inner).map_err(err)?;
    Ok(rec.into_iter().map(|inner| PyFeatures { inner }).collect())
}

#[pyfunction]
#[pyo3(signature = (originals, recovered, tau = 0.9))]
fn authenticate(originals: Vec<PyFeatures>, recovered: Vec<PyFeatures>, tau: f64) -> PyResult<PyAuthReport> {
    let report = cm::authenticate(&four(originals)?, &four(recovered)?, tau).map_err(err)?;
    Ok(report.into())
}

/// Applies an attack given in the compact form, e.g. "jpeg:q=70".
#[pyfunction]
fn attack(image: &PyGrayImage, spec: &str) -> PyResult<PyGrayImage> {
    let spec: AttackSpec = spec.parse().map_err(err)?;
    Ok(PyGrayImage { inner: cm::attacks::apply_attack(&image.inner, &spec).map_err(err)? })
}

#[pyfunction]
fn psnr(reference: &PyGrayImage, test: &PyGrayImage) -> PyResult<f64> {
    cm::psnr(&reference.inner, &test.inner).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a, b, window = 8))]
fn ssim(a: PyReadonlyArray2<'_, f64>, b: PyReadonlyArray2<'_, f64>, window: usize) -> PyResult<f64> {
    cm::ssim(&a.as_array().to_owned(), &b.as_array().to_owned(), window).map_err(err)
}

/// Binary edge map as a uint8 array.
#[pyfunction]
#[pyo3(signature = (image, b = 0.9, low = 0.05, high = 0.15, window = 7))]
fn detect_edges<'py>(
    py: Python<'py>,
    image: &PyGrayImage,
    b: f64,
    low: f64,
    high: f64,
    window: usize,
) -> PyResult<Bound<'py, PyArray2<u8>>> {
    let params = cm::IsefParams { b, low_frac: low, high_frac: high, window };
    let edges = cm::detect_edges(&image.inner, &params).map_err(err)?;
    Ok(edges.bits().clone().into_pyarray(py))
}

/// Forward transform; returns coefficients as nested lists of complex
/// arrays, coarsest scale first.
#[pyfunction]
#[pyo3(signature = (image, scales = None, angles_coarse = 16))]
fn fdct<'py>(
    py: Python<'py>,
    image: PyReadonlyArray2<'_, f64>,
    scales: Option<usize>,
    angles_coarse: usize,
) -> PyResult<Vec<Vec<Bound<'py, PyArray2<Complex64>>>>> {
    let x = image.as_array().to_owned();
    let g = geometry_for(x.nrows(), x.ncols(), scales, angles_coarse)?;
    let pyr = cm::fdct_forward(&x, g).map_err(err)?;
    Ok(pyr
        .cells()
        .iter()
        .map(|scale| scale.iter().map(|c| c.clone().into_pyarray(py)).collect())
        .collect())
}

/// Inverse of `fdct` for an image of the given geometry.
#[pyfunction]
fn ifdct<'py>(
    py: Python<'py>,
    coefficients: Vec<Vec<PyReadonlyArray2<'_, Complex64>>>,
    geometry: &PyGeometry,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let plan = cm::CurveletPlan::new(geometry.inner);
    let mut pyr = CurveletPyramid::zeros(&plan);
    if coefficients.len() != geometry.inner.scales {
        return Err(PyValueError::new_err(format!(
            "expected {} scales, got {}",
            geometry.inner.scales,
            coefficients.len()
        )));
    }
    for (s, scale) in coefficients.iter().enumerate() {
        for (w, cell) in scale.iter().enumerate() {
            pyr.set_wedge(WedgeIndex::new(s + 1, w + 1), cell.as_array().to_owned()).map_err(err)?;
        }
    }
    Ok(cm::fdct_inverse(&pyr).map_err(err)?.into_pyarray(py))
}

#[pymodule]
fn curvemark_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrayImage>()?;
    m.add_class::<PyFeatures>()?;
    m.add_class::<PyGeometry>()?;
    m.add_class::<PyEmbedRecord>()?;
    m.add_class::<PyAuthReport>()?;
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(authenticate, m)?)?;
    m.add_function(wrap_pyfunction!(attack, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(detect_edges, m)?)?;
    m.add_function(wrap_pyfunction!(fdct, m)?)?;
    m.add_function(wrap_pyfunction!(ifdct, m)?)?;
    Ok(())
}
