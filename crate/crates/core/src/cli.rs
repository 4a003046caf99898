//! Command-line surface: feature generation, embedding, extraction with
//! authentication, attacks, evaluation reports and metrics.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{apply_attack, default_battery, AttackSpec};
use crate::auth::{authenticate, AuthReport, Decision, DEFAULT_TAU};
use crate::curvelet::{Geometry, WedgeIndex};
use crate::error::{Error, Result};
use crate::features::{normalize, pca_features, read_features, write_features, FeatureMatrix};
use crate::imaging::{load_image, psnr, save_image, ssim, GrayImage};
use crate::isef::{detect_edges, IsefParams};
use crate::watermark::{EmbedRecord, Slot, WatermarkBundle, Watermarker, DEFAULT_GAIN};

pub const SIDECAR_VERSION: &str = "1";

/// Exit status for an authenticated image.
pub const EXIT_AUTHENTIC: u8 = 0;
/// Exit status for operational failures.
pub const EXIT_ERROR: u8 = 1;
/// Exit status for an image that failed authentication.
pub const EXIT_UNAUTHENTIC: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "curvemark", version, about = "Curvelet-domain multiple biometric watermarking")]
pub struct Cli {
    /// Print progress and diagnostics to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Edge-detect a biometric image and write its PCA feature matrix (CMF1).
    Features(FeaturesArgs),
    /// Embed four feature matrices into a host image.
    Embed(EmbedArgs),
    /// Extract the features from a watermarked image and authenticate.
    ExtractAuth(ExtractArgs),
    /// Apply one attack to an image.
    Attack(AttackArgs),
    /// Embed once, run the attack battery and a gain sweep, and report.
    Evaluate(EvaluateArgs),
    /// PSNR and windowed similarity between two images.
    Metrics(MetricsArgs),
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    /// Biometric image (PGM or .npy).
    pub image: PathBuf,
    /// Number of principal components to keep.
    #[arg(long)]
    pub rows: usize,
    /// Output feature file.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Also write the edge map as a PGM.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long, default_value_t = 0.9)]
    pub b: f64,
    #[arg(long, default_value_t = 0.05)]
    pub low: f64,
    #[arg(long, default_value_t = 0.15)]
    pub high: f64,
    #[arg(long, default_value_t = 7)]
    pub window: usize,
}

#[derive(Args, Debug, Clone)]
pub struct FeatureFiles {
    #[arg(long)]
    pub fingerprint: PathBuf,
    #[arg(long)]
    pub iris: PathBuf,
    #[arg(long)]
    pub face: PathBuf,
    #[arg(long)]
    pub signature: PathBuf,
}

impl FeatureFiles {
    fn paths(&self) -> [&Path; 4] {
        [&self.fingerprint, &self.iris, &self.face, &self.signature]
    }
}

#[derive(Args, Debug, Clone)]
pub struct Placement {
    /// Curvelet scale holding the four wedges.
    #[arg(long, default_value_t = 5)]
    pub scale: usize,
    /// Wedge numbers for fingerprint, iris, face and signature.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 5, 8])]
    pub wedges: Vec<usize>,
}

impl Placement {
    fn wedge_map(&self) -> Result<[WedgeIndex; 4]> {
        let v: Vec<WedgeIndex> = self.wedges.iter().map(|&w| WedgeIndex::new(self.scale, w)).collect();
        v.try_into()
            .map_err(|_| Error::InvalidParameter("exactly four wedges are required".into()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    /// Host image (PGM or .npy).
    pub host: PathBuf,
    #[command(flatten)]
    pub features: FeatureFiles,
    #[command(flatten)]
    pub placement: Placement,
    #[arg(long, default_value_t = DEFAULT_GAIN)]
    pub gain: f64,
    /// Watermarked image; use a .npy path to keep sub-quantum marks intact.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Sidecar record needed for extraction.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Report PSNR for gains start:stop:step instead of (or as well as) embedding.
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    pub watermarked: PathBuf,
    pub host: PathBuf,
    #[arg(long)]
    pub sidecar: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    /// Write the recovered feature matrices here as CMF1 files.
    #[arg(long)]
    pub recovered_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AttackArgs {
    pub input: PathBuf,
    /// Attack specification, e.g. jpeg:q=70 or sp:density=0.005:seed=1.
    #[arg(long)]
    pub spec: AttackSpec,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    pub host: PathBuf,
    #[command(flatten)]
    pub features: FeatureFiles,
    #[command(flatten)]
    pub placement: Placement,
    #[arg(long, default_value_t = DEFAULT_GAIN)]
    pub gain: f64,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    pub reference: PathBuf,
    pub test: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub window: usize,
}

/// Packed guard mask: row-major bits, most significant bit first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedMask {
    pub rows: usize,
    pub cols: usize,
    pub bits: String,
}

impl PackedMask {
    pub fn pack(mask: &Array2<bool>) -> Self {
        let mut bytes = vec![0u8; mask.len().div_ceil(8)];
        for (i, &b) in mask.iter().enumerate() {
            if b {
                bytes[i / 8] |= 0x80 >> (i % 8);
            }
        }
        Self { rows: mask.nrows(), cols: mask.ncols(), bits: BASE64.encode(bytes) }
    }

    pub fn unpack(&self) -> Result<Array2<bool>> {
        let bytes = BASE64
            .decode(&self.bits)
            .map_err(|e| Error::Sidecar(format!("guard mask is not base64: {e}")))?;
        let n = self.rows * self.cols;
        if bytes.len() != n.div_ceil(8) {
            return Err(Error::Sidecar(format!(
                "guard mask holds {} bytes, {}x{} needs {}",
                bytes.len(),
                self.rows,
                self.cols,
                n.div_ceil(8)
            )));
        }
        Ok(Array2::from_shape_fn((self.rows, self.cols), |(r, c)| {
            let i = r * self.cols + c;
            bytes[i / 8] & (0x80 >> (i % 8)) != 0
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRefs {
    pub fingerprint: PathBuf,
    pub iris: PathBuf,
    pub face: PathBuf,
    pub signature: PathBuf,
}

/// Everything the extractor needs besides the two images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SidecarRecord {
    pub version: String,
    pub geometry: Geometry,
    pub gain: f64,
    pub wedge_map: [WedgeIndex; 4],
    pub features: FeatureRefs,
    pub guard_masks: [PackedMask; 4],
    pub clamped_pixels: usize,
}

impl SidecarRecord {
    pub fn new(record: &EmbedRecord, features: [&Path; 4]) -> Self {
        let [fingerprint, iris, face, signature] = features.map(Path::to_path_buf);
        Self {
            version: SIDECAR_VERSION.to_string(),
            geometry: record.geometry,
            gain: record.gain,
            wedge_map: record.wedge_map,
            features: FeatureRefs { fingerprint, iris, face, signature },
            guard_masks: record.guard_masks.each_ref().map(PackedMask::pack),
            clamped_pixels: record.clamped_pixels,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sidecar serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: Self = serde_json::from_str(text).map_err(|e| Error::Sidecar(e.to_string()))?;
        if rec.version != SIDECAR_VERSION {
            return Err(Error::Sidecar(format!("unsupported version {:?}", rec.version)));
        }
        Ok(rec)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Rebuilds the embed record, checking masks against the geometry.
    pub fn embed_record(&self) -> Result<EmbedRecord> {
        let g = Geometry::new(
            self.geometry.rows,
            self.geometry.cols,
            self.geometry.scales,
            self.geometry.angles_coarse,
        )
        .map_err(|e| Error::Sidecar(e.to_string()))?;
        let mut masks = Vec::with_capacity(4);
        for ((slot, idx), packed) in Slot::ALL.iter().zip(&self.wedge_map).zip(&self.guard_masks) {
            let expected = g.wedge_dims(*idx).map_err(|e| Error::Sidecar(e.to_string()))?;
            if (packed.rows, packed.cols) != expected {
                return Err(Error::Sidecar(format!(
                    "{slot} guard mask is {}x{}, wedge {:?} is {:?}",
                    packed.rows, packed.cols, idx, expected
                )));
            }
            masks.push(packed.unpack()?);
        }
        check_gain(self.gain).map_err(|e| Error::Sidecar(e.to_string()))?;
        Ok(EmbedRecord {
            geometry: g,
            gain: self.gain,
            wedge_map: self.wedge_map,
            guard_masks: masks.try_into().expect("four slots"),
            clamped_pixels: self.clamped_pixels,
        })
    }

    /// Feature paths as stored, resolved against the working directory
    /// first and the sidecar's directory second.
    pub fn feature_paths(&self, sidecar: &Path) -> [PathBuf; 4] {
        let base = sidecar.parent().unwrap_or(Path::new("."));
        [&self.features.fingerprint, &self.features.iris, &self.features.face, &self.features.signature].map(|p| {
            if p.is_absolute() || p.exists() {
                p.clone()
            } else {
                base.join(p)
            }
        })
    }
}

fn check_gain(gain: f64) -> Result<()> {
    if gain.is_finite() && gain > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("gain must be positive, got {gain}")))
    }
}

/// One attacked-image row of an evaluation report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub label: String,
    pub attack: String,
    #[serde(with = "crate::json_float::option")]
    pub psnr_db: Option<f64>,
    pub s1: Option<f64>,
    pub s2: Option<f64>,
    pub s3: Option<f64>,
    pub s4: Option<f64>,
    pub s_avg: Option<f64>,
    pub decision: Option<Decision>,
    pub error: Option<String>,
}

impl EvaluationRow {
    fn from_report(label: &str, spec: &AttackSpec, report: &AuthReport) -> Self {
        Self {
            label: label.to_string(),
            attack: spec.to_string(),
            psnr_db: report.psnr_db,
            s1: Some(report.s1),
            s2: Some(report.s2),
            s3: Some(report.s3),
            s4: Some(report.s4),
            s_avg: Some(report.s_avg),
            decision: Some(report.decision),
            error: None,
        }
    }

    fn failed(label: &str, spec: &AttackSpec, err: &Error) -> Self {
        Self {
            label: label.to_string(),
            attack: spec.to_string(),
            psnr_db: None,
            s1: None,
            s2: None,
            s3: None,
            s4: None,
            s_avg: None,
            decision: None,
            error: Some(err.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub gain: f64,
    #[serde(with = "crate::json_float")]
    pub psnr_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub gain: f64,
    pub tau: f64,
    pub attacks: Vec<EvaluationRow>,
    pub gain_sweep: Vec<GainRow>,
}

/// Gains `start, start+step, ...` up to `stop` inclusive (with a little
/// slack for accumulated rounding).
pub fn parse_sweep(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("sweep must be start:stop:step, got {text:?}"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else { return Err(bad()) };
    if !(start > 0.0 && step > 0.0 && stop >= start) {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| round_gain(start + i as f64 * step)).collect())
}

/// Trims representation noise such as 0.015000000000000001.
fn round_gain(g: f64) -> f64 {
    (g * 1e12).round() / 1e12
}

/// Gains of the default sweep, 0.005 through 0.055.
pub fn default_sweep() -> Vec<f64> {
    (1..=11).map(|i| round_gain(i as f64 * 0.005)).collect()
}

fn load_bundle(files: &FeatureFiles, placement: &Placement, gain: f64) -> Result<WatermarkBundle> {
    let mut features = Vec::with_capacity(4);
    for (slot, path) in Slot::ALL.iter().zip(files.paths()) {
        let f = read_features(path)?;
        if f.max_abs() > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "{slot} features in {} are not normalized to [-1,1]",
                path.display()
            )));
        }
        features.push(f);
    }
    WatermarkBundle::new(features.try_into().expect("four slots"), gain, placement.wedge_map()?)
}

fn warn_if_lossy(path: &Path) {
    let lossless = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("npy"));
    if !lossless {
        log::warn!(
            "{} is stored with 8-bit samples; marks smaller than one level will not survive",
            path.display()
        );
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_infinite() => if x > 0.0 { "inf" } else { "-inf" }.to_string(),
        Some(x) => x.to_string(),
        None => String::new(),
    }
}

fn gain_csv(rows: &[GainRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidParameter(format!("csv: {e}"));
    w.write_record(["gain", "psnr_db"]).map_err(io)?;
    for r in rows {
        w.write_record([r.gain.to_string(), fmt_opt(Some(r.psnr_db))]).map_err(io)?;
    }
    Ok(String::from_utf8(w.into_inner().expect("vec writer")).expect("utf8"))
}

/// Both tables in one CSV, distinguished by the `section` column.
pub fn report_csv(report: &EvaluationReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidParameter(format!("csv: {e}"));
    w.write_record(["section", "label", "attack", "gain", "psnr_db", "s1", "s2", "s3", "s4", "s_avg", "decision", "error"])
        .map_err(io)?;
    for r in &report.attacks {
        w.write_record([
            "attack".to_string(),
            r.label.clone(),
            r.attack.clone(),
            report.gain.to_string(),
            fmt_opt(r.psnr_db),
            fmt_opt(r.s1),
            fmt_opt(r.s2),
            fmt_opt(r.s3),
            fmt_opt(r.s4),
            fmt_opt(r.s_avg),
            r.decision.map(|d| d.to_string()).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    for r in &report.gain_sweep {
        let mut row = vec!["gain".to_string(), String::new(), "none".to_string(), r.gain.to_string()];
        row.push(fmt_opt(Some(r.psnr_db)));
        row.extend(std::iter::repeat_n(String::new(), 7));
        w.write_record(&row).map_err(io)?;
    }
    Ok(String::from_utf8(w.into_inner().expect("vec writer")).expect("utf8"))
}

pub fn cmd_features(args: &FeaturesArgs) -> Result<u8> {
    let img = load_image(&args.image)?;
    let params = IsefParams { b: args.b, low_frac: args.low, high_frac: args.high, window: args.window };
    if args.rows == 0 || args.rows > img.height() {
        return Err(Error::InvalidParameter(format!(
            "--rows must be in 1..={} for a {}-row image, got {}",
            img.height(),
            img.height(),
            args.rows
        )));
    }
    let edges = detect_edges(&img, &params)?;
    if edges.is_empty() {
        log::warn!("empty edge map for {}", args.image.display());
        eprintln!("warning: empty edge map");
    }
    if let Some(path) = &args.edges {
        crate::imaging::save_pgm(&edges.to_image(), path)?;
    }
    let f = normalize(&pca_features(&edges, args.rows)?)?;
    write_features(&f, &args.out)?;
    println!("{}x{}", f.rows(), f.cols());
    Ok(0)
}

/// Embeds at each gain and reports PSNR against the host.
pub fn gain_sweep(wm: &Watermarker, host: &GrayImage, bundle: &WatermarkBundle, gains: &[f64]) -> Result<Vec<GainRow>> {
    let host_pyr = wm.analyze(host)?;
    gains
        .par_iter()
        .map(|&gain| {
            let (marked, _) = wm.embed_pyramid(&host_pyr, &bundle.with_gain(gain)?)?;
            Ok(GainRow { gain, psnr_db: psnr(host, &marked)? })
        })
        .collect()
}

pub fn cmd_embed(args: &EmbedArgs) -> Result<u8> {
    check_gain(args.gain)?;
    let host = load_image(&args.host)?;
    let bundle = load_bundle(&args.features, &args.placement, args.gain)?;
    let wm = Watermarker::for_dims(host.height(), host.width())?;
    bundle.check_geometry(wm.geometry())?;

    if let Some(sweep) = &args.sweep {
        let rows = gain_sweep(&wm, &host, &bundle, &parse_sweep(sweep)?)?;
        let text = match args.format {
            Format::Json => to_json(&rows),
            Format::Csv => gain_csv(&rows)?,
        };
        emit(&text, None)?;
        if args.out.is_none() && args.sidecar.is_none() {
            return Ok(0);
        }
    }

    let (Some(out), Some(sidecar)) = (&args.out, &args.sidecar) else {
        return Err(Error::InvalidParameter("embedding needs both --out and --sidecar".into()));
    };
    let (marked, record) = wm.embed(&host, &bundle)?;
    warn_if_lossy(out);
    save_image(&marked, out)?;
    SidecarRecord::new(&record, args.features.paths()).write(sidecar)?;
    if record.clamped_pixels > 0 {
        eprintln!("warning: {} pixels clamped to [0,1]", record.clamped_pixels);
    }
    let db = psnr(&host, &marked)?;
    if args.sweep.is_none() {
        println!("PSNR {} dB", fmt_opt(Some(db)));
    } else {
        eprintln!("PSNR {} dB", fmt_opt(Some(db)));
    }
    Ok(0)
}

/// Extraction plus authentication; the report carries the PSNR of the
/// examined image against the host.
pub fn extract_and_authenticate(
    wm: &Watermarker,
    watermarked: &GrayImage,
    host: &GrayImage,
    record: &EmbedRecord,
    originals: &[FeatureMatrix; 4],
    tau: f64,
) -> Result<(AuthReport, [FeatureMatrix; 4])> {
    let recovered = wm.extract(watermarked, host, record)?;
    let mut report = authenticate(originals, &recovered, tau)?;
    report.psnr_db = Some(psnr(host, watermarked)?);
    Ok((report, recovered))
}

pub fn cmd_extract_auth(args: &ExtractArgs) -> Result<u8> {
    let sidecar = SidecarRecord::read(&args.sidecar)?;
    let record = sidecar.embed_record()?;
    let host = load_image(&args.host)?;
    let marked = load_image(&args.watermarked)?;
    if host.dim() != record.host_dims() {
        return Err(Error::Sidecar(format!(
            "sidecar was written for a {:?} host, {} is {:?}",
            record.host_dims(),
            args.host.display(),
            host.dim()
        )));
    }
    let mut originals = Vec::with_capacity(4);
    for ((slot, path), idx) in Slot::ALL.iter().zip(sidecar.feature_paths(&args.sidecar)).zip(&record.wedge_map) {
        let f = read_features(&path)?;
        let expected = record.geometry.wedge_dims(*idx)?;
        if f.dim() != expected {
            return Err(Error::FeatureShape {
                slot: slot.name(),
                scale: idx.scale,
                wedge: idx.wedge,
                expected,
                found: f.dim(),
            });
        }
        originals.push(f);
    }
    let originals: [FeatureMatrix; 4] = originals.try_into().expect("four slots");
    let wm = Watermarker::new(record.geometry);
    let (report, recovered) = extract_and_authenticate(&wm, &marked, &host, &record, &originals, args.tau)?;
    if let Some(dir) = &args.recovered_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (slot, f) in Slot::ALL.iter().zip(&recovered) {
            write_features(f, dir.join(format!("{slot}.cmf")))?;
        }
    }
    emit(&to_json(&report), None)?;
    Ok(match report.decision {
        Decision::Authenticate => EXIT_AUTHENTIC,
        Decision::Unauthenticate => EXIT_UNAUTHENTIC,
    })
}

pub fn cmd_attack(args: &AttackArgs) -> Result<u8> {
    let img = load_image(&args.input)?;
    let out = apply_attack(&img, &args.spec)?;
    save_image(&out, &args.out)?;
    Ok(0)
}

/// Embeds once, attacks with the default battery, authenticates each
/// attacked image, and sweeps the default gains.
pub fn evaluate(host: &GrayImage, bundle: &WatermarkBundle, tau: f64) -> Result<EvaluationReport> {
    let wm = Watermarker::for_dims(host.height(), host.width())?;
    let host_pyr = wm.analyze(host)?;
    let (marked, record) = wm.embed_pyramid(&host_pyr, bundle)?;
    let attacks = default_battery()
        .par_iter()
        .map(|(label, spec)| {
            let row = apply_attack(&marked, spec).and_then(|attacked| {
                let marked_pyr = wm.analyze(&attacked)?;
                let recovered = wm.extract_pyramids(&marked_pyr, &host_pyr, &record, record.gain)?;
                let mut report = authenticate(bundle.features(), &recovered, tau)?;
                report.psnr_db = Some(psnr(host, &attacked)?);
                Ok(report)
            });
            match row {
                Ok(report) => EvaluationRow::from_report(label, spec, &report),
                Err(e) => EvaluationRow::failed(label, spec, &e),
            }
        })
        .collect();
    let gain_sweep = gain_sweep(&wm, host, bundle, &default_sweep())?;
    Ok(EvaluationReport { gain: bundle.gain(), tau, attacks, gain_sweep })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<u8> {
    check_gain(args.gain)?;
    let host = load_image(&args.host)?;
    let bundle = load_bundle(&args.features, &args.placement, args.gain)?;
    let report = evaluate(&host, &bundle, args.tau)?;
    let text = match args.format {
        Format::Json => to_json(&report),
        Format::Csv => report_csv(&report)?,
    };
    emit(&text, args.out.as_deref())?;
    Ok(0)
}

#[derive(Serialize)]
struct MetricsOut {
    #[serde(with = "crate::json_float")]
    psnr_db: f64,
    ssim: f64,
}

pub fn cmd_metrics(args: &MetricsArgs) -> Result<u8> {
    let a = load_image(&args.reference)?;
    let b = load_image(&args.test)?;
    let out = MetricsOut { psnr_db: psnr(&a, &b)?, ssim: ssim(a.pixels(), b.pixels(), args.window)? };
    emit(&to_json(&out), None)?;
    Ok(0)
}

pub fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Features(a) => cmd_features(a),
        Command::Embed(a) => cmd_embed(a),
        Command::ExtractAuth(a) => cmd_extract_auth(a),
        Command::Attack(a) => cmd_attack(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Metrics(a) => cmd_metrics(a),
    }
}

/// Parses arguments, runs the command and maps every outcome onto the
/// exit-code contract: 0 authentic or success, 2 unauthentic, 1 error.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_ERROR,
            };
        }
    };
    let level = if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_packing_round_trips() {
        let mask = Array2::from_shape_fn((5, 7), |(r, c)| (r * 7 + c) % 3 == 0);
        let packed = PackedMask::pack(&mask);
        assert_eq!(packed.unpack().unwrap(), mask);
        let bad = PackedMask { rows: 5, cols: 9, ..packed };
        assert!(bad.unpack().is_err());
    }

    #[test]
    fn sweep_parsing() {
        let g = parse_sweep("0.005:0.055:0.005").unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[2], 0.015);
        assert_eq!(g, default_sweep());
        assert!(parse_sweep("0.01:0.005:0.001").is_err());
        assert!(parse_sweep("0:0.1:0.01").is_err());
        assert!(parse_sweep("a:b").is_err());
    }

    #[test]
    fn placement_default_is_scale_five() {
        let cli = Cli::try_parse_from([
            "curvemark", "embed", "h.pgm", "--fingerprint", "a", "--iris", "b", "--face", "c", "--signature", "d",
        ])
        .unwrap();
        let Command::Embed(args) = cli.command else { panic!() };
        assert_eq!(args.placement.wedge_map().unwrap(), crate::watermark::default_wedge_map());
        assert_eq!(args.gain, 0.01);

        let cli = Cli::try_parse_from([
            "curvemark", "embed", "h.pgm", "--fingerprint", "a", "--iris", "b", "--face", "c", "--signature", "d",
            "--scale", "4", "--wedges", "1,3,6,7",
        ])
        .unwrap();
        let Command::Embed(args) = cli.command else { panic!() };
        let map = args.placement.wedge_map().unwrap();
        assert_eq!(map.map(|w| (w.scale, w.wedge)), [(4, 1), (4, 3), (4, 6), (4, 7)]);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(main_with_args(["curvemark", "bogus"]), EXIT_ERROR);
        assert_eq!(main_with_args(["curvemark", "attack", "x.pgm", "--spec", "jpeg:q=0", "-o", "y.pgm"]), EXIT_ERROR);
    }
}
