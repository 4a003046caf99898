//! Multiplicative embedding of four feature matrices into curvelet wedges
//! and the matching non-blind extraction.

use std::fmt;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curvelet::{CurveletPlan, CurveletPyramid, Geometry, WedgeIndex};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::imaging::GrayImage;

/// Coefficients with magnitude below this are left untouched.
pub const GUARD_EPS: f64 = 1e-12;

/// Imaginary residue in recovered features that signals a geometry problem.
const IMAG_WARN: f64 = 1e-6;

pub const DEFAULT_GAIN: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Fingerprint,
    Iris,
    Face,
    Signature,
}

impl Slot {
    pub const ALL: [Slot; 4] = [Slot::Fingerprint, Slot::Iris, Slot::Face, Slot::Signature];

    pub fn name(self) -> &'static str {
        match self {
            Slot::Fingerprint => "fingerprint",
            Slot::Iris => "iris",
            Slot::Face => "face",
            Slot::Signature => "signature",
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Scale 5, wedges 2, 4, 5 and 8.
pub fn default_wedge_map() -> [WedgeIndex; 4] {
    [2, 4, 5, 8].map(|w| WedgeIndex::new(5, w))
}

/// Four normalized feature matrices with their gain and target wedges,
/// ordered fingerprint, iris, face, signature.
#[derive(Clone, Debug, PartialEq)]
pub struct WatermarkBundle {
    features: [FeatureMatrix; 4],
    gain: f64,
    wedge_map: [WedgeIndex; 4],
}

fn check_gain(gain: f64) -> Result<()> {
    if gain.is_finite() && gain > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("gain must be positive, got {gain}")))
    }
}

impl WatermarkBundle {
    pub fn new(features: [FeatureMatrix; 4], gain: f64, wedge_map: [WedgeIndex; 4]) -> Result<Self> {
        check_gain(gain)?;
        for (slot, f) in Slot::ALL.iter().zip(&features) {
            if f.max_abs() > 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "{slot} features exceed [-1,1]; normalize them first"
                )));
            }
        }
        for i in 0..4 {
            for j in i + 1..4 {
                if wedge_map[i] == wedge_map[j] {
                    return Err(Error::InvalidParameter(format!(
                        "{} and {} share wedge {:?}",
                        Slot::ALL[i],
                        Slot::ALL[j],
                        wedge_map[i]
                    )));
                }
            }
        }
        Ok(Self { features, gain, wedge_map })
    }

    pub fn features(&self) -> &[FeatureMatrix; 4] {
        &self.features
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn wedge_map(&self) -> &[WedgeIndex; 4] {
        &self.wedge_map
    }

    /// Same features and wedges at another gain.
    pub fn with_gain(&self, gain: f64) -> Result<Self> {
        check_gain(gain)?;
        Ok(Self { gain, ..self.clone() })
    }

    /// Checks every feature shape against its wedge, and that no wedge is
    /// another's conjugate partner.
    pub fn check_geometry(&self, geometry: &Geometry) -> Result<()> {
        for ((slot, f), idx) in Slot::ALL.iter().zip(&self.features).zip(&self.wedge_map) {
            let expected = geometry.wedge_dims(*idx)?;
            if f.dim() != expected {
                return Err(Error::FeatureShape {
                    slot: slot.name(),
                    scale: idx.scale,
                    wedge: idx.wedge,
                    expected,
                    found: f.dim(),
                });
            }
            let partner = geometry.conjugate_partner(*idx)?;
            if let Some(j) = self.wedge_map.iter().position(|w| *w == partner) {
                return Err(Error::InvalidParameter(format!(
                    "{slot} wedge {idx:?} is the conjugate partner of the {} wedge",
                    Slot::ALL[j]
                )));
            }
        }
        Ok(())
    }
}

/// Embedding context the extractor needs besides the two images.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbedRecord {
    pub geometry: Geometry,
    pub gain: f64,
    pub wedge_map: [WedgeIndex; 4],
    /// `true` where the host coefficient was too small to carry a mark.
    pub guard_masks: [Array2<bool>; 4],
    /// Pixels that left `[0, 1]` after reconstruction and were clamped.
    pub clamped_pixels: usize,
}

impl EmbedRecord {
    pub fn host_dims(&self) -> (usize, usize) {
        (self.geometry.rows, self.geometry.cols)
    }

    pub fn guarded_count(&self) -> usize {
        self.guard_masks.iter().flatten().filter(|&&g| g).count()
    }

    pub fn guarded_fraction(&self) -> f64 {
        let total: usize = self.guard_masks.iter().map(|m| m.len()).sum();
        self.guarded_count() as f64 / total.max(1) as f64
    }
}

/// Embedder and extractor sharing one transform plan.
#[derive(Clone, Debug)]
pub struct Watermarker {
    plan: CurveletPlan,
}

impl Watermarker {
    pub fn new(geometry: Geometry) -> Self {
        Self { plan: CurveletPlan::new(geometry) }
    }

    /// Default decomposition for images of the given size.
    pub fn for_dims(rows: usize, cols: usize) -> Result<Self> {
        Ok(Self::new(Geometry::with_defaults(rows, cols)?))
    }

    pub fn geometry(&self) -> &Geometry {
        self.plan.geometry()
    }

    fn check_image(&self, img: &GrayImage) -> Result<()> {
        let g = self.geometry();
        if img.dim() != (g.rows, g.cols) {
            return Err(Error::DimensionMismatch { left: img.dim(), right: (g.rows, g.cols) });
        }
        Ok(())
    }

    pub fn analyze(&self, img: &GrayImage) -> Result<CurveletPyramid> {
        self.check_image(img)?;
        self.plan.forward(img.pixels())
    }

    /// Embeds into a host whose transform is already known.
    pub fn embed_pyramid(
        &self,
        host: &CurveletPyramid,
        bundle: &WatermarkBundle,
    ) -> Result<(GrayImage, EmbedRecord)> {
        let g = *self.geometry();
        bundle.check_geometry(&g)?;
        let mut marked = host.clone();
        let mut masks: Vec<Array2<bool>> = Vec::with_capacity(4);
        for (f, idx) in bundle.features.iter().zip(&bundle.wedge_map) {
            let guard = host.wedge(*idx)?.mapv(|z| z.norm() < GUARD_EPS);
            for target in [*idx, g.conjugate_partner(*idx)?] {
                let cell = marked.wedge_mut(target)?;
                Zip::from(cell).and(f.values()).and(&guard).for_each(|c, &v, &skip| {
                    if !skip {
                        *c *= 1.0 + bundle.gain * v;
                    }
                });
            }
            masks.push(guard);
        }
        let recon = self.plan.inverse_complex(&marked)?;
        let mut clamped_pixels = 0;
        let pixels = recon.mapv(|z| {
            let v = z.re;
            if !(0.0..=1.0).contains(&v) {
                clamped_pixels += 1;
            }
            v
        });
        if clamped_pixels > 0 {
            log::debug!("{clamped_pixels} watermarked pixels clamped to [0,1]");
        }
        let record = EmbedRecord {
            geometry: g,
            gain: bundle.gain,
            wedge_map: bundle.wedge_map,
            guard_masks: masks.try_into().expect("four slots"),
            clamped_pixels,
        };
        Ok((GrayImage::new(pixels)?, record))
    }

    pub fn embed(&self, host: &GrayImage, bundle: &WatermarkBundle) -> Result<(GrayImage, EmbedRecord)> {
        self.embed_pyramid(&self.analyze(host)?, bundle)
    }

    /// Recovers the four feature matrices using the record's gain.
    pub fn extract(
        &self,
        watermarked: &GrayImage,
        host: &GrayImage,
        record: &EmbedRecord,
    ) -> Result<[FeatureMatrix; 4]> {
        self.extract_with_gain(watermarked, host, record, record.gain)
    }

    /// Recovery assuming `gain`, which need not match the embedding gain.
    pub fn extract_with_gain(
        &self,
        watermarked: &GrayImage,
        host: &GrayImage,
        record: &EmbedRecord,
        gain: f64,
    ) -> Result<[FeatureMatrix; 4]> {
        check_gain(gain)?;
        if record.geometry != *self.geometry() {
            return Err(Error::GeometryMismatch(format!(
                "record made for {:?}, extractor uses {:?}",
                record.geometry,
                self.geometry()
            )));
        }
        self.check_image(host)?;
        self.check_image(watermarked)?;
        let host_pyr = self.plan.forward(host.pixels())?;
        let marked_pyr = self.plan.forward(watermarked.pixels())?;
        self.extract_pyramids(&marked_pyr, &host_pyr, record, gain)
    }

    pub fn extract_pyramids(
        &self,
        marked: &CurveletPyramid,
        host: &CurveletPyramid,
        record: &EmbedRecord,
        gain: f64,
    ) -> Result<[FeatureMatrix; 4]> {
        let mut out = Vec::with_capacity(4);
        for ((slot, idx), guard) in Slot::ALL.iter().zip(&record.wedge_map).zip(&record.guard_masks) {
            let c = host.wedge(*idx)?;
            let cw = marked.wedge(*idx)?;
            if guard.dim() != c.dim() {
                return Err(Error::GeometryMismatch(format!(
                    "{slot} guard mask is {:?}, wedge {:?} is {:?}",
                    guard.dim(),
                    idx,
                    c.dim()
                )));
            }
            let mut worst_imag: f64 = 0.0;
            let values = Zip::from(c).and(cw).and(guard).map_collect(|&c, &cw, &skip| {
                if skip || c.norm() < GUARD_EPS {
                    return 0.0;
                }
                let rf: Complex64 = (cw / c - 1.0) / gain;
                worst_imag = worst_imag.max(rf.im.abs());
                rf.re
            });
            if worst_imag > IMAG_WARN {
                log::warn!("{slot} features carry imaginary residue {worst_imag:.3e}; geometry mismatch?");
            }
            out.push(FeatureMatrix::new(values)?);
        }
        Ok(out.try_into().expect("four slots"))
    }
}

/// One-shot embedding with the default decomposition for the host size.
pub fn embed(host: &GrayImage, bundle: &WatermarkBundle) -> Result<(GrayImage, EmbedRecord)> {
    Watermarker::for_dims(host.height(), host.width())?.embed(host, bundle)
}

/// One-shot extraction with the record's decomposition.
pub fn extract(watermarked: &GrayImage, host: &GrayImage, record: &EmbedRecord) -> Result<[FeatureMatrix; 4]> {
    Watermarker::new(record.geometry).extract(watermarked, host, record)
}
