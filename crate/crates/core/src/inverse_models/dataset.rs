//! Synthetic force/reading time series and static calibration grids.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::hysteresis::{hysteresis_apply, HysteresisConfig};
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::transducer::{field_at_deflection, force_range, quantize_gauss, Deflection, SensingUnitSpec, SensorSpec};

/// Role of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    Calibration,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Calibration => "calibration",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "calibration" => Ok(Split::Calibration),
            other => Err(Error::Validation(format!("unknown split `{other}`"))),
        }
    }
}

/// Time-varying force applied during a synthetic run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadProfile {
    /// s.
    pub duration: f64,
    /// Mean of the two axis frequencies, Hz.
    pub base_frequency: f64,
    /// Per-axis frequency as a multiple of `base_frequency` (F_x, F_z).
    pub frequency_ratio: [f64; 2],
    /// Peak amplitude per axis as a fraction of the design's force range.
    pub amplitude_fraction: [f64; 2],
    /// Spacing of the random amplitude knots, s.
    pub amplitude_segment: f64,
    /// Lowest knot amplitude as a fraction of the peak.
    pub amplitude_floor: f64,
    /// Ground-truth force rate, Hz.
    pub ground_truth_rate: f64,
    /// Fraction of the run (from the start) labelled as training data.
    pub train_fraction: f64,
}

impl Default for LoadProfile {
    fn default() -> Self {
        Self {
            duration: 100.0,
            base_frequency: 0.5,
            frequency_ratio: [0.86, 1.14],
            amplitude_fraction: [0.8, 0.8],
            amplitude_segment: 5.0,
            amplitude_floor: 0.2,
            ground_truth_rate: 100.0,
            train_fraction: 0.7,
        }
    }
}

/// An interval with an additive external field at the sensor. The field
/// ramps linearly in and out over `ramp` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldEpisode {
    pub start: f64,
    pub end: f64,
    /// Peak field, gauss.
    pub field: [f64; 3],
    #[serde(default)]
    pub ramp: f64,
}

impl FieldEpisode {
    pub fn weight(&self, t: f64) -> f64 {
        if t < self.start || t > self.end {
            return 0.0;
        }
        if self.ramp <= 0.0 {
            return 1.0;
        }
        ((t - self.start) / self.ramp).min((self.end - t) / self.ramp).min(1.0)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }
}

/// Randomly placed external-field episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomEpisodes {
    /// Expected number of episodes per 100 s.
    pub rate_per_100s: f64,
    pub min_duration: f64,
    pub max_duration: f64,
    /// Peak magnitude range, gauss.
    pub min_field: f64,
    pub max_field: f64,
    /// Only place episodes inside this split.
    pub split: Split,
}

impl Default for RandomEpisodes {
    fn default() -> Self {
        Self {
            rate_per_100s: 25.0,
            min_duration: 0.3,
            max_duration: 1.0,
            min_field: 5.0,
            max_field: 50.0,
            split: Split::Train,
        }
    }
}

/// Non-ideal effects layered on the forward model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Effects {
    /// Add Gaussian sensor noise (sigma from `SensorSpec`).
    pub noise: bool,
    pub hysteresis: Option<HysteresisConfig>,
    pub external_field: Vec<FieldEpisode>,
    pub random_episodes: Option<RandomEpisodes>,
}

/// Provenance of a dataset, written into its CSV header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// Content-derived identifier.
    pub id: String,
    pub design_id: String,
    pub seed: u64,
    pub sample_rate: f64,
    pub ground_truth_rate: f64,
    pub sensor: SensorSpec,
    pub profile: Option<LoadProfile>,
    pub effects: Effects,
    /// Every external-field episode actually applied (scheduled + random).
    pub episodes: Vec<FieldEpisode>,
    /// Force range of the design per axis, N.
    pub force_range: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub time: f64,
    /// Ground-truth force (F_x, F_z) held from the last ground-truth tick, N.
    pub force: [f64; 2],
    /// Quantized reading, gauss.
    pub reading: [f64; 3],
    pub saturated: bool,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> Vec<&Sample> {
        self.samples.iter().filter(|s| s.split == split).collect()
    }

    /// Contiguous runs of samples carrying `split`, as index ranges.
    pub fn segments(&self, split: Split) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, s) in self.samples.iter().enumerate() {
            match (s.split == split, start) {
                (true, None) => start = Some(i),
                (false, Some(b)) => {
                    out.push(b..i);
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(b) = start {
            out.push(b..self.samples.len());
        }
        out
    }

    /// Whether any external-field episode is active at `t`.
    pub fn disturbed(&self, t: f64) -> bool {
        self.meta.episodes.iter().any(|e| e.contains(t))
    }

    /// Number of ground-truth ticks.
    pub fn ground_truth_len(&self) -> usize {
        let stride = (self.meta.sample_rate / self.meta.ground_truth_rate).round() as usize;
        self.samples.len().div_ceil(stride.max(1))
    }
}

fn content_id(parts: &impl Serialize) -> String {
    let json = serde_json::to_vec(parts).expect("dataset metadata serializes");
    hex::encode(&Sha256::digest(&json)[..8])
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Simulate a coupled two-axis sinusoidal loading run.
pub fn synthesize_dataset(
    unit: &SensingUnitSpec,
    design_id: &str,
    sensor: &SensorSpec,
    profile: &LoadProfile,
    effects: &Effects,
    seed: u64,
) -> Result<Dataset> {
    unit.validate()?;
    sensor.validate()?;
    ensure_positive("duration", profile.duration)?;
    ensure_positive("ground-truth rate", profile.ground_truth_rate)?;
    ensure_positive("amplitude segment", profile.amplitude_segment)?;
    ensure_finite("base frequency", profile.base_frequency)?;
    if !(0.0..=1.0).contains(&profile.train_fraction) || !(0.0..=1.0).contains(&profile.amplitude_floor) {
        return Err(Error::Validation("train fraction and amplitude floor must lie in [0, 1]".into()));
    }
    let ratio = sensor.sample_rate / profile.ground_truth_rate;
    let stride = ratio.round() as usize;
    if stride == 0 || (ratio - stride as f64).abs() > 1e-9 {
        return Err(Error::Validation(format!(
            "sensor rate {} Hz is not a whole multiple of the ground-truth rate {} Hz",
            sensor.sample_rate, profile.ground_truth_rate
        )));
    }
    let gt_count = (profile.duration * profile.ground_truth_rate).round() as usize;
    if gt_count == 0 {
        return Err(Error::Validation("run is shorter than one ground-truth tick".into()));
    }
    let n = gt_count * stride;
    let dt = 1.0 / sensor.sample_rate;
    let range = force_range(unit, sensor)?;
    let range = [range.fx.max_force, range.fz.max_force];

    // Amplitude knots and phases.
    let mut r_load = rng(seed, 0);
    let knots = (profile.duration / profile.amplitude_segment).ceil() as usize + 1;
    let mut knot_values = [vec![0.0; knots], vec![0.0; knots]];
    for values in knot_values.iter_mut() {
        for v in values.iter_mut() {
            *v = profile.amplitude_floor + (1.0 - profile.amplitude_floor) * r_load.random::<f64>();
        }
    }
    let phase = [r_load.random::<f64>() * 2.0 * PI, r_load.random::<f64>() * 2.0 * PI];
    let force_at = |t: f64| -> [f64; 2] {
        let pos = t / profile.amplitude_segment;
        let k = (pos.floor() as usize).min(knots - 2);
        let frac = pos - k as f64;
        [0, 1].map(|a| {
            let envelope = knot_values[a][k] * (1.0 - frac) + knot_values[a][k + 1] * frac;
            let peak = profile.amplitude_fraction[a] * range[a];
            let w = 2.0 * PI * profile.base_frequency * profile.frequency_ratio[a];
            peak * envelope * (w * t + phase[a]).sin()
        })
    };

    let train_end = profile.train_fraction * profile.duration;
    let split_at = |t: f64| if t < train_end { Split::Train } else { Split::Test };

    let mut episodes = effects.external_field.clone();
    if let Some(re) = &effects.random_episodes {
        let mut r_ep = rng(seed, 2);
        let (lo, hi) = match re.split {
            Split::Train => (0.0, train_end),
            _ => (train_end, profile.duration),
        };
        let count = (re.rate_per_100s * profile.duration / 100.0).round() as usize;
        for _ in 0..count {
            let len = re.min_duration + (re.max_duration - re.min_duration) * r_ep.random::<f64>();
            if hi - lo <= len {
                break;
            }
            let start = lo + (hi - lo - len) * r_ep.random::<f64>();
            let mag = re.min_field + (re.max_field - re.min_field) * r_ep.random::<f64>();
            let dir: [f64; 3] = std::array::from_fn(|_| r_ep.random::<f64>() * 2.0 - 1.0);
            let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-12);
            episodes.push(FieldEpisode {
                start,
                end: start + len,
                field: dir.map(|d| mag * d / norm),
                ramp: 0.2 * len,
            });
        }
    }

    let mut forces = Vec::with_capacity(n);
    let mut exceeded = false;
    for i in 0..n {
        let gt_t = (i / stride) as f64 / profile.ground_truth_rate;
        let f = force_at(gt_t);
        exceeded |= f[0].abs() > range[0] || f[1].abs() > range[1];
        forces.push(f);
    }
    if exceeded {
        log::warn!("load schedule exceeds the design force range; affected samples are flagged saturated");
    }

    let lateral: Vec<f64> = forces.iter().map(|f| unit.lateral_beam.tip_deflection(f[0])).collect();
    let longitudinal: Vec<f64> = forces.iter().map(|f| unit.longitudinal_beam.tip_deflection(f[1])).collect();
    let (lateral, longitudinal) = match &effects.hysteresis {
        Some(h) => (hysteresis_apply(&lateral, h)?, hysteresis_apply(&longitudinal, h)?),
        None => (lateral, longitudinal),
    };

    let mut r_noise = rng(seed, 1);
    let noise = Normal::new(0.0, sensor.noise_sigma).map_err(|e| Error::Validation(e.to_string()))?;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * dt;
        let mut g = field_at_deflection(
            unit,
            Deflection {
                lateral: lateral[i],
                longitudinal: longitudinal[i],
            },
        )?
        .gauss();
        for e in &episodes {
            let w = e.weight(t);
            if w > 0.0 {
                for (gk, fk) in g.iter_mut().zip(e.field) {
                    *gk += w * fk;
                }
            }
        }
        if effects.noise && sensor.noise_sigma > 0.0 {
            for v in &mut g {
                *v += noise.sample(&mut r_noise);
            }
        }
        let reading = quantize_gauss(g, sensor);
        let f = forces[i];
        samples.push(Sample {
            time: t,
            force: f,
            reading: reading.gauss(sensor),
            saturated: reading.any_saturated() || f[0].abs() > range[0] || f[1].abs() > range[1],
            split: split_at(t),
        });
    }

    let mut meta = DatasetMeta {
        id: String::new(),
        design_id: design_id.to_string(),
        seed,
        sample_rate: sensor.sample_rate,
        ground_truth_rate: profile.ground_truth_rate,
        sensor: *sensor,
        profile: Some(*profile),
        effects: effects.clone(),
        episodes,
        force_range: range,
    };
    meta.id = content_id(&(&meta, unit));
    Ok(Dataset { meta, samples })
}

/// Static calibration grid: `points × points` force pairs spanning
/// ±`fraction` of the force range, noise- and hysteresis-free.
pub fn synthesize_calibration(
    unit: &SensingUnitSpec,
    design_id: &str,
    sensor: &SensorSpec,
    points: usize,
    fraction: f64,
) -> Result<Dataset> {
    unit.validate()?;
    sensor.validate()?;
    if points < 2 {
        return Err(Error::Validation("calibration grid needs ≥ 2 points per axis".into()));
    }
    ensure_positive("calibration fraction", fraction)?;
    let range = force_range(unit, sensor)?;
    let range = [range.fx.max_force, range.fz.max_force];
    let mut samples = Vec::with_capacity(points * points);
    for i in 0..points {
        for j in 0..points {
            let u = |k: usize| -1.0 + 2.0 * k as f64 / (points - 1) as f64;
            let f = [fraction * range[0] * u(i), fraction * range[1] * u(j)];
            let g = field_at_deflection(unit, unit.deflection(f))?.gauss();
            let reading = quantize_gauss(g, sensor);
            samples.push(Sample {
                time: (i * points + j) as f64 / sensor.sample_rate,
                force: f,
                reading: reading.gauss(sensor),
                saturated: reading.any_saturated(),
                split: Split::Calibration,
            });
        }
    }
    let mut meta = DatasetMeta {
        id: String::new(),
        design_id: design_id.to_string(),
        seed: 0,
        sample_rate: sensor.sample_rate,
        ground_truth_rate: sensor.sample_rate,
        sensor: *sensor,
        profile: None,
        effects: Effects::default(),
        episodes: Vec::new(),
        force_range: range,
    };
    meta.id = content_id(&(&meta, unit, points, fraction));
    Ok(Dataset { meta, samples })
}

/// Column names of the dataset CSV.
pub const DATASET_COLUMNS: [&str; 8] = ["time_s", "fx_gt_n", "fz_gt_n", "bx_g", "by_g", "bz_g", "saturated", "split"];

const META_PREFIX: &str = "# meta: ";

/// Write the dataset as CSV. The first line is a `# meta:` JSON comment.
pub fn write_dataset_csv<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    let meta = serde_json::to_string(&dataset.meta).map_err(|e| Error::Numeric(e.to_string()))?;
    let io = |e: std::io::Error| Error::Numeric(format!("dataset CSV: {e}"));
    writeln!(out, "{META_PREFIX}{meta}").map_err(io)?;
    writeln!(out, "{}", DATASET_COLUMNS.join(",")).map_err(io)?;
    for s in &dataset.samples {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.time,
            s.force[0],
            s.force[1],
            s.reading[0],
            s.reading[1],
            s.reading[2],
            u8::from(s.saturated),
            s.split.name()
        )
        .map_err(io)?;
    }
    Ok(())
}

/// Read a dataset written by [`write_dataset_csv`]. Other `#` comment lines
/// are skipped.
pub fn read_dataset_csv<R: BufRead>(input: R, origin: &Path) -> Result<Dataset> {
    let mut meta: Option<DatasetMeta> = None;
    let mut header_seen = false;
    let mut samples = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let at = |msg: String| Error::format(origin, format!("line {}: {msg}", lineno + 1));
        if let Some(json) = line.strip_prefix(META_PREFIX) {
            meta = Some(serde_json::from_str(json).map_err(|e| at(format!("bad metadata: {e}")))?);
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if line.split(',').ne(DATASET_COLUMNS.iter().copied()) {
                return Err(at(format!("expected header `{}`", DATASET_COLUMNS.join(","))));
            }
            header_seen = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != DATASET_COLUMNS.len() {
            return Err(at(format!("expected {} columns, found {}", DATASET_COLUMNS.len(), cols.len())));
        }
        let num = |k: usize| -> Result<f64> {
            cols[k]
                .parse::<f64>()
                .map_err(|e| at(format!("column `{}`: {e}", DATASET_COLUMNS[k])))
        };
        let sample = Sample {
            time: num(0)?,
            force: [num(1)?, num(2)?],
            reading: [num(3)?, num(4)?, num(5)?],
            saturated: match cols[6] {
                "0" => false,
                "1" => true,
                other => return Err(at(format!("column `saturated`: expected 0 or 1, found `{other}`"))),
            },
            split: Split::parse(cols[7]).map_err(|e| at(e.to_string()))?,
        };
        if let Some(prev) = samples.last() {
            let prev: &Sample = prev;
            if sample.time <= prev.time {
                return Err(at("timestamps must be strictly increasing".into()));
            }
        }
        samples.push(sample);
    }
    let meta = meta.ok_or_else(|| Error::format(origin, "missing `# meta:` line"))?;
    Ok(Dataset { meta, samples })
}
