//! Strict TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::design_search::SweepConfig;
use crate::error::{Error, Result};
use crate::inverse_models::{
    Effects, FieldEpisode, GrbfConfig, GruConfig, HysteresisConfig, LoadProfile, RandomEpisodes, Split,
};
use crate::magnetostatics::{MagnetSpec, Pose};

/// Everything one invocation of the CLI needs. Every section is optional;
/// missing sections take their defaults, which are echoed into the run
/// manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed. Dataset and training seeds derive from it unless set.
    #[serde(default)]
    pub seed: u64,
    /// Output directory (overridden by `--out`).
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Worker threads for the sweep (overridden by `--parallel`).
    #[serde(default)]
    pub parallelism: Option<usize>,
    /// Use the literal stretching expression for beam shortening.
    #[serde(default)]
    pub paper_literal: bool,
    #[serde(default)]
    pub field: Option<FieldProbeConfig>,
    #[serde(default = "SweepConfig::bundled")]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub grbf: GrbfConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: None,
            parallelism: None,
            paper_literal: false,
            field: None,
            sweep: SweepConfig::bundled(),
            dataset: DatasetConfig::default(),
            grbf: GrbfConfig::default(),
            train: TrainConfig::default(),
            evaluate: EvaluateConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

/// Points at which `field` probes one magnet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldProbeConfig {
    pub magnet: MagnetSpec,
    #[serde(default)]
    pub pose: Pose,
    /// World coordinates, m.
    pub points: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub seed: Option<u64>,
    pub profile: LoadProfile,
    pub effects: Effects,
    /// Points per axis of the static calibration grid.
    pub calibration_points: usize,
    /// Calibration grid half-width as a fraction of the force range.
    pub calibration_fraction: f64,
}

impl Default for DatasetConfig {
    /// The standard coupled-axis benchmark: noise, hysteresis and random
    /// disturbance episodes in the training part.
    fn default() -> Self {
        Self {
            seed: None,
            profile: LoadProfile::default(),
            effects: Effects {
                noise: true,
                hysteresis: Some(HysteresisConfig::default()),
                external_field: Vec::new(),
                random_episodes: Some(RandomEpisodes::default()),
            },
            calibration_points: 41,
            calibration_fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// One model per entry: 2 = (B_x, B_z), 3 = (B_x, B_y, B_z).
    pub axes: Vec<u32>,
    pub seed: Option<u64>,
    pub gru: GruConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            axes: vec![3, 2],
            seed: None,
            gru: GruConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub split: Split,
    pub histogram_bins: usize,
    /// Also write wall-clock inference times (not reproducible).
    pub timing: bool,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            split: Split::Test,
            histogram_bins: 40,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    /// Time span of the force overlay plot, s.
    pub window: [f64; 2],
    pub width: u32,
    pub height: u32,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            window: [70.0, 80.0],
            width: 800,
            height: 500,
        }
    }
}

impl RunConfig {
    pub fn dataset_seed(&self) -> u64 {
        self.dataset.seed.unwrap_or(self.seed)
    }

    pub fn train_seed(&self) -> u64 {
        self.train.seed.unwrap_or(self.seed)
    }

    /// Scheduled external-field episodes, for callers building configs.
    pub fn with_disturbance(mut self, episodes: Vec<FieldEpisode>) -> Self {
        self.dataset.effects.external_field = episodes;
        self
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize configuration: {e}")))
    }
}

/// Valid top-level and section keys, used for suggestions.
fn known_keys() -> Vec<&'static str> {
    vec![
        "seed",
        "out",
        "parallelism",
        "paper_literal",
        "field",
        "sweep",
        "dataset",
        "grbf",
        "train",
        "evaluate",
        "report",
    ]
}

/// Turn a toml error into a message naming the offending key, with the
/// nearest valid key when one is close.
fn describe(err: &toml::de::Error, text: &str, origin: &Path) -> Error {
    let msg = err.message();
    let mut key = None;
    let location = err.span().map(|span| {
        let start = span.start.min(text.len());
        let before = &text[..start];
        let line = before.matches('\n').count() + 1;
        let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        let line_text = text.lines().nth(line - 1).unwrap_or("");
        key = line_text.split_once('=').map(|(k, _)| k.trim().to_string());
        format!("line {line}, column {col}: ")
    });
    let mut out = format!("{}{msg}", location.unwrap_or_default());
    if let Some(k) = key.filter(|k| !k.is_empty() && !msg.contains(k.as_str())) {
        out.push_str(&format!(" (key `{k}`)"));
    }
    if let Some(hint) = suggestion(msg) {
        out.push_str(&format!(" (did you mean `{hint}`?)"));
    }
    Error::format(origin, out)
}

/// Nearest candidate to the unknown key in a serde "unknown field" message.
fn suggestion(msg: &str) -> Option<String> {
    let rest = msg.strip_prefix("unknown field `")?;
    let (bad, tail) = rest.split_once('`')?;
    let mut candidates: Vec<String> = tail.split('`').skip(1).step_by(2).map(str::to_string).collect();
    if candidates.is_empty() {
        candidates = known_keys().into_iter().map(str::to_string).collect();
    }
    candidates
        .into_iter()
        .map(|c| (strsim::damerau_levenshtein(bad, &c), c))
        .filter(|(d, c)| *d <= 2.max(c.len() / 3))
        .min()
        .map(|(_, c)| c)
}

/// Parse configuration text. `origin` names the source in errors.
pub fn parse_config_str(text: &str, origin: &Path) -> Result<RunConfig> {
    toml::from_str::<RunConfig>(text).map_err(|e| describe(&e, text, origin))
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path)
}
