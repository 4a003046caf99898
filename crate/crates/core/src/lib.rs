//! Curvelet-domain multiple biometric watermarking.
//!
//! Biometric images are reduced to feature matrices (ISEF edges followed by
//! PCA), embedded multiplicatively into mid-band curvelet wedges of a host
//! image, recovered non-blindly from the host, and compared with a windowed
//! quality index to decide whether the marked image is authentic.

pub mod attacks;
pub mod auth;
pub mod cli;
pub mod curvelet;
pub mod error;
pub mod features;
pub mod imaging;
pub mod isef;
mod json_float;
pub mod watermark;

pub use auth::{authenticate, AuthReport, Decision};
pub use curvelet::{fdct_forward, fdct_inverse, CurveletPlan, CurveletPyramid, Geometry, WedgeIndex};
pub use error::{Error, Result};
pub use features::{normalize, pca_features, FeatureMatrix};
pub use imaging::{load_image, load_pgm, psnr, save_image, save_pgm, ssim, GrayImage};
pub use isef::{detect_edges, EdgeMap, IsefParams};
pub use watermark::{embed, extract, EmbedRecord, Slot, WatermarkBundle, Watermarker};
