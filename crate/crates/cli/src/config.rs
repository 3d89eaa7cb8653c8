//! Run configuration: a TOML file, every key optional, layered under
//! command-line flags.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use adcnn::dataset::{Split, SplitMode, SplitRatios};
use adcnn::model::{NetworkConfig, TrainingConfig};
use adcnn::pgm::PgmDepth;
use adcnn::scanner::{downscale_factor, ScanGrid};

/// An invalid configuration value; the message starts with the dotted key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn keyed(section: &str, e: adcnn::Error) -> ConfigError {
    match e {
        adcnn::Error::Config(msg) => ConfigError(format!("{section}.{msg}")),
        other => ConfigError(format!("{section}: {other}")),
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError(msg()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: PathsSection,
    pub synth: SynthSection,
    pub augment: AugmentSection,
    pub split: SplitSection,
    pub network: NetworkSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub exam: ExamSection,
    pub scan: ScanSection,
    pub gradcheck: GradcheckSection,
}

/// File and directory names, relative to the working directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub rois_dir: String,
    pub manifest: String,
    pub augmented_dir: String,
    pub augmented_manifest: String,
    pub split_manifest: String,
    pub checkpoint: String,
    pub history: String,
    pub eval_dir: String,
    pub exams_dir: String,
    pub scan_dir: String,
    pub logs_dir: String,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            rois_dir: "rois".into(),
            manifest: "manifest.csv".into(),
            augmented_dir: "augmented".into(),
            augmented_manifest: "manifest_augmented.csv".into(),
            split_manifest: "manifest_split.csv".into(),
            checkpoint: "model.ckpt".into(),
            history: "history.csv".into(),
            eval_dir: "eval".into(),
            exams_dir: "exams".into(),
            scan_dir: "scan".into(),
            logs_dir: "logs".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    /// Total ROIs, split evenly between the two classes.
    pub count: usize,
    pub image_size: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self { count: 600, image_size: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    /// Bits per sample of the written PGM files, 8 or 16.
    pub depth: u32,
}

impl Default for AugmentSection {
    fn default() -> Self {
        Self { depth: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    /// `roi-level` or `sample-level`.
    pub mode: String,
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        let r = SplitRatios::default();
        Self { mode: SplitMode::default().to_string(), train: r.train, validation: r.validation, test: r.test }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub input_size: usize,
    pub kernel_size: usize,
    pub base_filters: usize,
    pub filter_growth: usize,
    pub pool: usize,
    pub target_map: usize,
    pub classes: usize,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let n = NetworkConfig::with_input_size(64);
        Self {
            input_size: n.input_size,
            kernel_size: n.kernel_size,
            base_filters: n.base_filters,
            filter_growth: n.filter_growth,
            pool: n.pool,
            target_map: n.target_map,
            classes: n.classes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Self {
            batch_size: t.batch_size,
            learning_rate: DEFAULT_LEARNING_RATE,
            momentum: t.momentum,
            max_epochs: t.max_epochs,
            patience: t.patience,
        }
    }
}

pub const DEFAULT_LEARNING_RATE: f64 = 0.003;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// `train`, `val` or `test`.
    pub split: String,
    pub threshold: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { split: "test".into(), threshold: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExamSection {
    pub id: String,
    pub height: usize,
    pub width: usize,
    /// Texture is generated at `1/scale` resolution.
    pub scale: usize,
    pub implant_radius: f64,
    /// `[row, col]` centers of implanted distortions.
    pub marks: Vec<[usize; 2]>,
}

impl Default for ExamSection {
    fn default() -> Self {
        Self { id: "exam".into(), height: 1024, width: 1024, scale: 4, implant_radius: 64.0, marks: vec![[512, 384]] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub roi_size: usize,
    pub stride: usize,
    pub coverage_min: f64,
}

impl Default for ScanSection {
    fn default() -> Self {
        let g = ScanGrid::default();
        Self { roi_size: g.roi_size, stride: g.stride, coverage_min: g.coverage_min }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSection {
    pub input_size: usize,
    pub batch_size: usize,
    pub epsilon: f64,
    pub max_coordinates: usize,
    pub tolerance: f64,
}

impl Default for GradcheckSection {
    fn default() -> Self {
        Self { input_size: 16, batch_size: 2, epsilon: 1e-5, max_coordinates: 600, tolerance: 1e-6 }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn network_config(&self) -> NetworkConfig {
        let n = &self.network;
        NetworkConfig {
            input_size: n.input_size,
            kernel_size: n.kernel_size,
            base_filters: n.base_filters,
            filter_growth: n.filter_growth,
            pool: n.pool,
            target_map: n.target_map,
            classes: n.classes,
        }
    }

    pub fn training_config(&self) -> TrainingConfig {
        let t = &self.train;
        TrainingConfig {
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            max_epochs: t.max_epochs,
            patience: t.patience,
            seed: self.seed,
        }
    }

    pub fn split_ratios(&self) -> SplitRatios {
        SplitRatios { train: self.split.train, validation: self.split.validation, test: self.split.test }
    }

    pub fn split_mode(&self) -> Result<SplitMode, ConfigError> {
        self.split.mode.parse().map_err(|_| {
            ConfigError(format!("split.mode must be roi-level or sample-level, got {:?}", self.split.mode))
        })
    }

    pub fn eval_split(&self) -> Result<Split, ConfigError> {
        match self.eval.split.as_str() {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(ConfigError(format!("eval.split must be train, val or test, got {other:?}"))),
        }
    }

    pub fn pgm_depth(&self) -> Result<PgmDepth, ConfigError> {
        match self.augment.depth {
            8 => Ok(PgmDepth::Eight),
            16 => Ok(PgmDepth::Sixteen),
            d => Err(ConfigError(format!("augment.depth must be 8 or 16, got {d}"))),
        }
    }

    pub fn scan_grid(&self) -> ScanGrid {
        ScanGrid { roi_size: self.scan.roi_size, stride: self.scan.stride, coverage_min: self.scan.coverage_min }
    }

    pub fn gradcheck_network(&self) -> NetworkConfig {
        NetworkConfig { input_size: self.gradcheck.input_size, ..self.network_config() }
    }

    /// Checks every value against the invariants of the type it feeds.
    pub fn validate(&self) -> Result<(), ConfigError> {
        check(self.synth.count >= 2 && self.synth.count % 2 == 0, || {
            format!("synth.count must be a positive even number, got {}", self.synth.count)
        })?;
        check(self.synth.image_size >= 4, || format!("synth.image_size must be at least 4, got {}", self.synth.image_size))?;
        self.pgm_depth()?;

        self.split_mode()?;
        for (key, v) in [("train", self.split.train), ("validation", self.split.validation), ("test", self.split.test)] {
            check(v > 0.0 && v.is_finite(), || format!("split.{key} must be positive, got {v}"))?;
        }
        let total = self.split.train + self.split.validation + self.split.test;
        check((total - 1.0).abs() <= 1e-12, || format!("split.train + split.validation + split.test must sum to 1, got {total}"))?;
        self.split_ratios().validate().map_err(|e| keyed("split", e))?;

        let net = self.network_config();
        net.validate().map_err(|e| keyed("network", e))?;
        net.stages().map_err(|e| keyed("network", e))?;
        self.training_config().validate().map_err(|e| keyed("train", e))?;

        self.eval_split()?;
        let th = self.eval.threshold;
        check((0.0..=1.0).contains(&th), || format!("eval.threshold must lie in [0,1], got {th}"))?;

        let ex = &self.exam;
        check(!ex.id.is_empty() && !ex.id.contains(['/', '\\']), || format!("exam.id must be a plain file stem, got {:?}", ex.id))?;
        check(ex.scale >= 1, || "exam.scale must be at least 1".into())?;
        check(ex.height > 0 && ex.height % ex.scale == 0, || {
            format!("exam.height must be a positive multiple of exam.scale, got {}", ex.height)
        })?;
        check(ex.width > 0 && ex.width % ex.scale == 0, || {
            format!("exam.width must be a positive multiple of exam.scale, got {}", ex.width)
        })?;
        check(ex.implant_radius > 0.0 && ex.implant_radius.is_finite(), || {
            format!("exam.implant_radius must be positive, got {}", ex.implant_radius)
        })?;
        if let Some(m) = ex.marks.iter().find(|m| m[0] >= ex.height || m[1] >= ex.width) {
            return Err(ConfigError(format!("exam.marks entry {m:?} lies outside the {}x{} exam", ex.height, ex.width)));
        }

        self.scan_grid().validate().map_err(|e| keyed("scan", e))?;
        downscale_factor(self.scan.roi_size, self.network.input_size).map_err(|_| {
            ConfigError(format!(
                "scan.roi_size {} must be a multiple of network.input_size {}",
                self.scan.roi_size, self.network.input_size
            ))
        })?;

        let g = &self.gradcheck;
        self.gradcheck_network().stages().map_err(|e| keyed("gradcheck", e))?;
        check(g.batch_size >= 1, || "gradcheck.batch_size must be at least 1".into())?;
        check(g.epsilon > 0.0 && g.epsilon.is_finite(), || format!("gradcheck.epsilon must be positive, got {}", g.epsilon))?;
        check(g.max_coordinates >= 1, || "gradcheck.max_coordinates must be at least 1".into())?;
        check(g.tolerance > 0.0, || format!("gradcheck.tolerance must be positive, got {}", g.tolerance))?;
        Ok(())
    }
}
