//! Similarity scoring of recovered features and the threshold decision.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::imaging::{ssim_with, SsimConfig};
use crate::watermark::Slot;

pub const DEFAULT_TAU: f64 = 0.90;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Authenticate,
    Unauthenticate,
}

impl Decision {
    /// Strictly above the threshold authenticates; the boundary fails closed.
    pub fn from_score(s_avg: f64, tau: f64) -> Self {
        if s_avg > tau {
            Decision::Authenticate
        } else {
            Decision::Unauthenticate
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Authenticate => "Authenticate",
            Decision::Unauthenticate => "Unauthenticate",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuthReport {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s4: f64,
    pub s_avg: f64,
    pub tau: f64,
    pub decision: Decision,
    #[serde(with = "crate::json_float::option")]
    pub psnr_db: Option<f64>,
}

impl AuthReport {
    pub fn from_scores(scores: [f64; 4], tau: f64, psnr_db: Option<f64>) -> Self {
        let [s1, s2, s3, s4] = scores;
        let s_avg = (s1 + s2 + s3 + s4) / 4.0;
        Self {
            s1,
            s2,
            s3,
            s4,
            s_avg,
            tau,
            decision: Decision::from_score(s_avg, tau),
            psnr_db,
        }
    }

    pub fn scores(&self) -> [f64; 4] {
        [self.s1, self.s2, self.s3, self.s4]
    }
}

/// Scores each recovered matrix against its original with the default
/// windowed index.
pub fn authenticate(originals: &[FeatureMatrix; 4], recovered: &[FeatureMatrix; 4], tau: f64) -> Result<AuthReport> {
    authenticate_with(originals, recovered, tau, &SsimConfig::default())
}

pub fn authenticate_with(
    originals: &[FeatureMatrix; 4],
    recovered: &[FeatureMatrix; 4],
    tau: f64,
    config: &SsimConfig,
) -> Result<AuthReport> {
    if !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("tau must be finite, got {tau}")));
    }
    let mut scores = [0.0; 4];
    for (k, slot) in Slot::ALL.iter().enumerate() {
        let (a, b) = (&originals[k], &recovered[k]);
        if a.dim() != b.dim() {
            return Err(Error::InvalidParameter(format!(
                "{slot}: original is {:?}, recovered is {:?}",
                a.dim(),
                b.dim()
            )));
        }
        scores[k] = ssim_with(a.values().view(), b.values().view(), config)?;
    }
    Ok(AuthReport::from_scores(scores, tau, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn feature(seed: usize) -> FeatureMatrix {
        FeatureMatrix::new(Array2::from_shape_fn((12, 16), |(r, c)| {
            (((r * 31 + c * 17 + seed * 7) % 23) as f64 / 11.0) - 1.0
        }))
        .unwrap()
    }

    #[test]
    fn identical_features_authenticate() {
        let f = [feature(0), feature(1), feature(2), feature(3)];
        let r = authenticate(&f, &f, DEFAULT_TAU).unwrap();
        assert_eq!(r.scores(), [1.0; 4]);
        assert_eq!(r.decision, Decision::Authenticate);
    }

    #[test]
    fn boundary_fails_closed() {
        let r = AuthReport::from_scores([0.9; 4], 0.9, None);
        assert_eq!(r.s_avg, 0.9);
        assert_eq!(r.decision, Decision::Unauthenticate);
        let r = AuthReport::from_scores([1.0, 0.8, 0.9, 0.9], 0.9, None);
        assert_eq!(r.decision, Decision::Unauthenticate);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let f = [feature(0), feature(1), feature(2), feature(3)];
        let mut g = f.clone();
        g[2] = FeatureMatrix::zeros(12, 15);
        assert!(authenticate(&f, &g, 0.9).is_err());
    }

    #[test]
    fn json_keys() {
        let r = AuthReport::from_scores([1.0; 4], 0.9, Some(f64::INFINITY));
        let v: serde_json::Value = serde_json::to_value(r).unwrap();
        for key in ["s1", "s2", "s3", "s4", "s_avg", "tau", "decision", "psnr_db"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["psnr_db"], "inf");
        assert_eq!(v["decision"], "Authenticate");
        let back: AuthReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }
}
