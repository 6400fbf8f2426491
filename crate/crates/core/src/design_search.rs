//! Grid sweep over beam and magnet parameters, Pareto extraction and
//! design selection.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::flexure::{BeamSpec, MaterialLibrary};
use crate::magnetostatics::{facing_sensor_pose, sensitivity_profile, Axis, MagnetShape, MagnetSpec, N32_REMANENCE};
use crate::transducer::{
    check_constraints, force_range, force_sensitivity, Constraint, FeasibilityReport, FingerLayout, ForceRange,
    ForceSensitivity, SensingUnitSpec, SensorSpec, ShorteningModel, MIN_GAP,
};

const BUNDLED_SWEEP: &str = include_str!("../data/default_sweep.toml");

/// Evenly spaced parameter values `min..=max` in `steps` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRange {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl ParamRange {
    pub fn fixed(value: f64) -> Self {
        Self {
            min: value,
            max: value,
            steps: 1,
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        ensure_positive(name, self.min)?;
        ensure_finite(name, self.max)?;
        if self.steps == 0 {
            return Err(Error::Config(format!("`{name}` needs at least one step")));
        }
        if self.max < self.min || (self.steps == 1 && self.max != self.min) {
            return Err(Error::Config(format!(
                "`{name}` range [{}, {}] with {} steps is inconsistent",
                self.min, self.max, self.steps
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let span = self.max - self.min;
        (0..self.steps)
            .map(|i| self.min + span * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

/// Selection requirements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Requirements {
    /// Lateral-axis force sensitivity, gauss/newton.
    pub min_sensitivity: f64,
    /// Force range required on both axes, newtons.
    pub min_range: f64,
    /// Largest acceptable deflection cap, m.
    pub max_deflection: f64,
    /// Smallest acceptable magnet–sensor gap, m.
    pub min_gap: f64,
}

impl Default for Requirements {
    fn default() -> Self {
        Self {
            min_sensitivity: 0.0,
            min_range: 0.0,
            max_deflection: f64::INFINITY,
            min_gap: MIN_GAP,
        }
    }
}

fn default_remanence() -> f64 {
    N32_REMANENCE
}

fn default_profile_half_range() -> f64 {
    0.6e-3
}

fn default_profile_steps() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 1 evaluates sequentially.
    #[serde(default)]
    pub parallelism: Option<usize>,
    pub materials: Vec<String>,
    pub magnet_shape: MagnetShape,
    #[serde(default)]
    pub magnet_inner_diameter: f64,
    #[serde(default = "default_remanence")]
    pub remanence: f64,
    pub magnet_diameter: ParamRange,
    pub magnet_length: ParamRange,
    pub beam_thickness: ParamRange,
    pub beam_length: ParamRange,
    pub beam_width: f64,
    pub deflection_cap: f64,
    pub gap: f64,
    /// Half-width of the lateral motion over which max|S| is sampled, m.
    #[serde(default = "default_profile_half_range")]
    pub profile_half_range: f64,
    #[serde(default = "default_profile_steps")]
    pub profile_steps: usize,
    #[serde(default)]
    pub sensor: SensorSpec,
    #[serde(default)]
    pub layout: FingerLayout,
    #[serde(default)]
    pub requirements: Requirements,
    #[serde(default)]
    pub shortening: ShorteningModel,
}

impl SweepConfig {
    /// The shipped default sweep (~10⁴ candidates).
    pub fn bundled() -> Self {
        toml::from_str(BUNDLED_SWEEP).expect("bundled sweep config is valid")
    }

    pub fn bundled_text() -> &'static str {
        BUNDLED_SWEEP
    }

    pub fn validate(&self, library: &MaterialLibrary) -> Result<()> {
        if self.materials.is_empty() {
            return Err(Error::Config("sweep needs at least one material".into()));
        }
        for m in &self.materials {
            library.get(m)?;
        }
        self.magnet_diameter.validate("magnet_diameter")?;
        self.magnet_length.validate("magnet_length")?;
        self.beam_thickness.validate("beam_thickness")?;
        self.beam_length.validate("beam_length")?;
        ensure_positive("beam_width", self.beam_width)?;
        ensure_finite("deflection_cap", self.deflection_cap)?;
        ensure_positive("gap", self.gap)?;
        ensure_positive("remanence", self.remanence)?;
        ensure_positive("profile_half_range", self.profile_half_range)?;
        if self.profile_steps < 3 {
            return Err(Error::Config("profile_steps must be ≥ 3".into()));
        }
        if self.parallelism == Some(0) {
            return Err(Error::Config("parallelism must be ≥ 1".into()));
        }
        self.sensor.validate()?;
        Ok(())
    }

    pub fn candidate_count(&self) -> usize {
        self.materials.len()
            * self.beam_length.steps
            * self.beam_thickness.steps
            * self.magnet_diameter.steps
            * self.magnet_length.steps
    }

    /// Every grid point, in index order: material, beam length, beam
    /// thickness, magnet diameter, magnet length (fastest).
    pub fn candidates(&self, library: &MaterialLibrary) -> Result<Vec<DesignCandidate>> {
        self.validate(library)?;
        let mut out = Vec::with_capacity(self.candidate_count());
        for name in &self.materials {
            let material = library.get(name)?;
            for &len in &self.beam_length.values() {
                for &t in &self.beam_thickness.values() {
                    for &d in &self.magnet_diameter.values() {
                        for &ml in &self.magnet_length.values() {
                            let magnet = MagnetSpec {
                                shape: self.magnet_shape,
                                diameter: d,
                                length: if self.magnet_shape == MagnetShape::Sphere { d } else { ml },
                                inner_diameter: self.magnet_inner_diameter,
                                remanence: self.remanence,
                                demag_multiplier: 1.0,
                            };
                            out.push(DesignCandidate {
                                index: out.len(),
                                beam: BeamSpec::new(material.clone(), len, t, self.beam_width, self.deflection_cap),
                                magnet,
                                gap: self.gap,
                                layout: self.layout,
                                shortening: self.shortening,
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One grid point. Both beams of the unit share the geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignCandidate {
    pub index: usize,
    pub beam: BeamSpec,
    pub magnet: MagnetSpec,
    pub gap: f64,
    pub layout: FingerLayout,
    #[serde(default)]
    pub shortening: ShorteningModel,
}

impl DesignCandidate {
    pub fn unit(&self) -> SensingUnitSpec {
        let mut unit = SensingUnitSpec::new(self.beam.clone(), self.beam.clone(), self.magnet, self.gap);
        unit.layout = self.layout;
        unit.shortening = self.shortening;
        unit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMetrics {
    pub sensitivity: ForceSensitivity,
    pub force_range: ForceRange,
    /// Largest |dB/dx| over the lateral motion window, gauss/meter.
    pub max_displacement_sensitivity: f64,
    /// Magnitude of the closed-gripper neighbour field, gauss.
    pub neighbor_offset: f64,
    /// Constraint report in the unloaded state.
    pub feasibility: FeasibilityReport,
}

impl DesignMetrics {
    pub fn feasible(&self) -> bool {
        self.feasibility.feasible() && self.force_range.fx.max_force > 0.0 && self.force_range.fz.max_force > 0.0
    }
}

/// Outcome of one candidate: metrics, or the error message that stopped it.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub candidate: DesignCandidate,
    pub metrics: std::result::Result<DesignMetrics, String>,
}

pub fn evaluate_candidate(candidate: &DesignCandidate, config: &SweepConfig) -> Result<DesignMetrics> {
    let unit = candidate.unit();
    let sensor = &config.sensor;
    let feasibility = check_constraints(&unit, sensor, [0.0, 0.0])?;
    let sensitivity = force_sensitivity(&unit)?;
    let range = force_range(&unit, sensor)?;
    let h = config.profile_half_range;
    let profile = sensitivity_profile(
        &candidate.magnet,
        &facing_sensor_pose(&candidate.magnet, candidate.gap),
        Axis::X,
        (-h, h),
        config.profile_steps,
    )?;
    let max_s = profile.max_abs_gauss_per_m().into_iter().fold(0.0, f64::max);
    let n = feasibility.neighbor_offset;
    Ok(DesignMetrics {
        sensitivity,
        force_range: range,
        max_displacement_sensitivity: max_s,
        neighbor_offset: (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt(),
        feasibility,
    })
}

/// Evaluate every grid point. Per-candidate failures are recorded, never
/// propagated; results are in index order whatever the thread count.
pub fn sweep(config: &SweepConfig, library: &MaterialLibrary) -> Result<Vec<SweepRecord>> {
    let candidates = config.candidates(library)?;
    let eval = |c: &DesignCandidate| SweepRecord {
        candidate: c.clone(),
        metrics: evaluate_candidate(c, config).map_err(|e| e.to_string()),
    };
    let threads = config.parallelism.unwrap_or(1);
    if threads <= 1 {
        return Ok(candidates.iter().map(eval).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} workers: {e}")))?;
    Ok(pool.install(|| candidates.par_iter().map(eval).collect()))
}

/// Flat, CSV-stable view of a sweep record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub material: String,
    pub beam_length_m: f64,
    pub beam_thickness_m: f64,
    pub beam_width_m: f64,
    pub deflection_cap_m: f64,
    pub magnet_shape: String,
    pub magnet_diameter_m: f64,
    pub magnet_length_m: f64,
    pub magnet_inner_diameter_m: f64,
    pub remanence_t: f64,
    pub gap_m: f64,
    pub sensitivity_fx_g_per_n: f64,
    pub sensitivity_fz_g_per_n: f64,
    pub range_fx_n: f64,
    pub range_fz_n: f64,
    pub binding_fx: String,
    pub binding_fz: String,
    pub max_s_g_per_m: f64,
    pub neighbor_offset_g: f64,
    pub yield_ok: bool,
    pub fatigue_ok: bool,
    pub geometric_ok: bool,
    pub signal_range_ok: bool,
    pub interference_ok: bool,
    pub feasible: bool,
    pub error: String,
}

/// Column names of the sweep CSV, in order.
pub const SWEEP_COLUMNS: [&str; 27] = [
    "index",
    "material",
    "beam_length_m",
    "beam_thickness_m",
    "beam_width_m",
    "deflection_cap_m",
    "magnet_shape",
    "magnet_diameter_m",
    "magnet_length_m",
    "magnet_inner_diameter_m",
    "remanence_t",
    "gap_m",
    "sensitivity_fx_g_per_n",
    "sensitivity_fz_g_per_n",
    "range_fx_n",
    "range_fz_n",
    "binding_fx",
    "binding_fz",
    "max_s_g_per_m",
    "neighbor_offset_g",
    "yield_ok",
    "fatigue_ok",
    "geometric_ok",
    "signal_range_ok",
    "interference_ok",
    "feasible",
    "error",
];

fn binding_name(c: Option<Constraint>) -> String {
    c.map(|c| c.name().to_string()).unwrap_or_default()
}

impl From<&SweepRecord> for SweepRow {
    fn from(r: &SweepRecord) -> Self {
        let c = &r.candidate;
        let mut row = SweepRow {
            index: c.index,
            material: c.beam.material.name.clone(),
            beam_length_m: c.beam.length,
            beam_thickness_m: c.beam.thickness,
            beam_width_m: c.beam.width,
            deflection_cap_m: c.beam.max_deflection_cap,
            magnet_shape: c.magnet.shape.name().to_string(),
            magnet_diameter_m: c.magnet.diameter,
            magnet_length_m: c.magnet.length,
            magnet_inner_diameter_m: c.magnet.inner_diameter,
            remanence_t: c.magnet.remanence,
            gap_m: c.gap,
            sensitivity_fx_g_per_n: f64::NAN,
            sensitivity_fz_g_per_n: f64::NAN,
            range_fx_n: f64::NAN,
            range_fz_n: f64::NAN,
            binding_fx: String::new(),
            binding_fz: String::new(),
            max_s_g_per_m: f64::NAN,
            neighbor_offset_g: f64::NAN,
            yield_ok: false,
            fatigue_ok: false,
            geometric_ok: false,
            signal_range_ok: false,
            interference_ok: false,
            feasible: false,
            error: String::new(),
        };
        match &r.metrics {
            Ok(m) => {
                let s = m.sensitivity.magnitude();
                row.sensitivity_fx_g_per_n = s[0];
                row.sensitivity_fz_g_per_n = s[1];
                row.range_fx_n = m.force_range.fx.max_force;
                row.range_fz_n = m.force_range.fz.max_force;
                row.binding_fx = binding_name(m.force_range.fx.binding);
                row.binding_fz = binding_name(m.force_range.fz.binding);
                row.max_s_g_per_m = m.max_displacement_sensitivity;
                row.neighbor_offset_g = m.neighbor_offset;
                let f = &m.feasibility;
                row.yield_ok = f.yield_ok;
                row.fatigue_ok = f.fatigue_ok;
                row.geometric_ok = f.geometric_ok;
                row.signal_range_ok = f.signal_range_ok;
                row.interference_ok = f.interference_ok;
                row.feasible = m.feasible();
            }
            Err(e) => row.error = e.clone(),
        }
        row
    }
}

impl SweepRow {
    /// Rebuild the candidate this row describes.
    pub fn candidate(
        &self,
        library: &MaterialLibrary,
        layout: FingerLayout,
        shortening: ShorteningModel,
    ) -> Result<DesignCandidate> {
        let material = library.get(&self.material)?.clone();
        Ok(DesignCandidate {
            index: self.index,
            beam: BeamSpec::new(
                material,
                self.beam_length_m,
                self.beam_thickness_m,
                self.beam_width_m,
                self.deflection_cap_m,
            ),
            magnet: MagnetSpec {
                shape: MagnetShape::parse(&self.magnet_shape)?,
                diameter: self.magnet_diameter_m,
                length: self.magnet_length_m,
                inner_diameter: self.magnet_inner_diameter_m,
                remanence: self.remanence_t,
                demag_multiplier: 1.0,
            },
            gap: self.gap_m,
            layout,
            shortening,
        })
    }

    fn min_range(&self) -> f64 {
        self.range_fx_n.min(self.range_fz_n)
    }
}

pub fn rows(records: &[SweepRecord]) -> Vec<SweepRow> {
    records.iter().map(SweepRow::from).collect()
}

/// Write rows as CSV with the [`SWEEP_COLUMNS`] header.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Numeric(format!("sweep CSV: {e}")))?;
    }
    if rows.is_empty() {
        w.write_record(SWEEP_COLUMNS).map_err(|e| Error::Numeric(format!("sweep CSV: {e}")))?;
    }
    w.flush().map_err(|e| Error::Numeric(format!("sweep CSV: {e}")))?;
    Ok(())
}

/// Read rows written by [`write_sweep_csv`]; `#` lines are comments.
pub fn read_sweep_csv<R: Read>(input: R, origin: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let headers = reader.headers().map_err(|e| Error::format(origin, e.to_string()))?.clone();
    if headers.iter().ne(SWEEP_COLUMNS.iter().copied()) {
        return Err(Error::format(origin, "sweep CSV header does not match the expected columns"));
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::format(origin, format!("row {}: {e}", i + 1))))
        .collect()
}

/// Non-dominated feasible rows when maximizing lateral force range and
/// lateral force sensitivity. Returned in index order.
pub fn pareto_front(rows: &[SweepRow]) -> Vec<&SweepRow> {
    let mut feasible: Vec<&SweepRow> = rows.iter().filter(|r| r.feasible).collect();
    if feasible.is_empty() {
        log::warn!("Pareto front requested over a sweep with no feasible candidates");
        return Vec::new();
    }
    feasible.sort_by(|a, b| {
        b.range_fx_n
            .total_cmp(&a.range_fx_n)
            .then(b.sensitivity_fx_g_per_n.total_cmp(&a.sensitivity_fx_g_per_n))
            .then(a.index.cmp(&b.index))
    });
    let mut front = Vec::new();
    let mut best_above = f64::NEG_INFINITY;
    let mut i = 0;
    while i < feasible.len() {
        let range = feasible[i].range_fx_n;
        let group_best = feasible[i].sensitivity_fx_g_per_n;
        let mut j = i;
        while j < feasible.len() && feasible[j].range_fx_n == range {
            if feasible[j].sensitivity_fx_g_per_n == group_best && group_best > best_above {
                front.push(feasible[j]);
            }
            j += 1;
        }
        best_above = best_above.max(group_best);
        i = j;
    }
    front.sort_by_key(|r| r.index);
    front
}

/// How far a row is from meeting `req`; zero when it qualifies.
fn shortfall(row: &SweepRow, req: &Requirements) -> f64 {
    let rel = |need: f64, have: f64| {
        if need > 0.0 && (have < need || have.is_nan()) {
            if have.is_finite() {
                (need - have) / need
            } else {
                1.0
            }
        } else {
            0.0
        }
    };
    let mut s = rel(req.min_range, row.min_range()) + rel(req.min_sensitivity, row.sensitivity_fx_g_per_n);
    if row.deflection_cap_m > req.max_deflection {
        s += (row.deflection_cap_m - req.max_deflection) / req.max_deflection.max(f64::MIN_POSITIVE);
    }
    if row.gap_m < req.min_gap {
        s += (req.min_gap - row.gap_m) / req.min_gap;
    }
    if !row.feasible {
        s += 1.0;
    }
    s
}

/// The feasible row with the highest lateral force sensitivity among those
/// meeting `req`; ties go to the lower index.
pub fn select_design<'a>(rows: &'a [SweepRow], req: &Requirements) -> Result<&'a SweepRow> {
    let best = rows
        .iter()
        .filter(|r| shortfall(r, req) == 0.0)
        .fold(None::<&SweepRow>, |best, r| match best {
            Some(b) if b.sensitivity_fx_g_per_n >= r.sensitivity_fx_g_per_n => Some(b),
            _ => Some(r),
        });
    best.ok_or_else(|| {
        let mut misses: Vec<_> = rows.iter().map(|r| (shortfall(r, req), r)).collect();
        misses.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.index.cmp(&b.1.index)));
        let listing = misses
            .iter()
            .take(3)
            .map(|(s, r)| {
                format!(
                    "#{} ({} t={:.2} mm L={:.2} mm, D={:.1} mm: range {:.1}/{:.1} N, {:.3} G/N, shortfall {:.3})",
                    r.index,
                    r.material,
                    r.beam_thickness_m * 1e3,
                    r.beam_length_m * 1e3,
                    r.magnet_diameter_m * 1e3,
                    r.range_fx_n,
                    r.range_fz_n,
                    r.sensitivity_fx_g_per_n,
                    s
                )
            })
            .collect::<Vec<_>>()
            .join("; ");
        Error::Selection(format!(
            "no candidate meets the requirements; nearest misses: {}",
            if listing.is_empty() { "none (empty sweep)".into() } else { listing }
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> SweepConfig {
        let mut c = SweepConfig::bundled();
        c.materials = vec!["abs".into()];
        c.magnet_diameter = ParamRange::fixed(3e-3);
        c.magnet_length = ParamRange::fixed(3e-3);
        c.beam_thickness = ParamRange {
            min: 4e-3,
            max: 8e-3,
            steps: 3,
        };
        c.beam_length = ParamRange::fixed(30e-3);
        c
    }

    fn row(index: usize, range: f64, sens: f64) -> SweepRow {
        let mut r = SweepRow::from(&SweepRecord {
            candidate: tiny_config().candidates(&MaterialLibrary::bundled()).unwrap()[0].clone(),
            metrics: Err(String::new()),
        });
        r.index = index;
        r.range_fx_n = range;
        r.range_fz_n = range;
        r.sensitivity_fx_g_per_n = sens;
        r.feasible = true;
        r
    }

    #[test]
    fn grid_values_and_count() {
        let c = SweepConfig::bundled();
        assert_eq!(c.candidate_count(), 9720);
        let t = c.beam_thickness.values();
        assert_eq!(t.len(), 15);
        assert!((t[1] - 1.5e-3).abs() < 1e-15 && (t[14] - 8e-3).abs() < 1e-15);
    }

    #[test]
    fn one_point_sweep_is_a_direct_evaluation() {
        let mut c = tiny_config();
        c.beam_thickness = ParamRange::fixed(5e-3);
        let lib = MaterialLibrary::bundled();
        let records = sweep(&c, &lib).unwrap();
        assert_eq!(records.len(), 1);
        let unit = records[0].candidate.unit();
        let m = records[0].metrics.as_ref().unwrap();
        assert_eq!(m.force_range, force_range(&unit, &c.sensor).unwrap());
        assert_eq!(m.sensitivity, force_sensitivity(&unit).unwrap());
    }

    #[test]
    fn parallel_sweep_matches_sequential() {
        let lib = MaterialLibrary::bundled();
        let c = tiny_config();
        let mut p = c.clone();
        p.parallelism = Some(3);
        assert_eq!(rows(&sweep(&c, &lib).unwrap()), rows(&sweep(&p, &lib).unwrap()));
    }

    #[test]
    fn halving_the_cap_never_raises_a_range() {
        let lib = MaterialLibrary::bundled();
        let c = tiny_config();
        let mut h = c.clone();
        h.deflection_cap *= 0.5;
        for (a, b) in rows(&sweep(&c, &lib).unwrap()).iter().zip(rows(&sweep(&h, &lib).unwrap()).iter()) {
            assert!(b.range_fx_n <= a.range_fx_n && b.range_fz_n <= a.range_fz_n);
        }
    }

    #[test]
    fn candidate_errors_are_recorded() {
        let lib = MaterialLibrary::bundled();
        let mut c = tiny_config();
        c.magnet_shape = MagnetShape::Tube;
        c.magnet_inner_diameter = 5e-3; // larger than the outer diameter
        let records = sweep(&c, &lib).unwrap();
        assert!(records.iter().all(|r| r.metrics.is_err()));
        assert!(rows(&records).iter().all(|r| !r.feasible && !r.error.is_empty()));
    }

    #[test]
    fn pareto_basics() {
        let single = vec![row(0, 10.0, 1.0)];
        assert_eq!(pareto_front(&single).len(), 1);
        let dominated = vec![row(0, 10.0, 1.0), row(1, 20.0, 2.0)];
        let f = pareto_front(&dominated);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].index, 1);
        let tied = vec![row(0, 10.0, 1.0), row(1, 10.0, 1.0), row(2, 5.0, 3.0)];
        assert_eq!(pareto_front(&tied).iter().map(|r| r.index).collect::<Vec<_>>(), [0, 1, 2]);
        assert!(pareto_front(&[]).is_empty());
    }

    #[test]
    fn selection_and_nearest_misses() {
        let rows = vec![row(0, 50.0, 5.0), row(1, 150.0, 2.0), row(2, 150.0, 2.0)];
        let req = Requirements {
            min_range: 100.0,
            ..Default::default()
        };
        assert_eq!(select_design(&rows, &req).unwrap().index, 1);
        let strict = Requirements {
            min_range: 1000.0,
            ..Default::default()
        };
        match select_design(&rows, &strict) {
            Err(Error::Selection(msg)) => assert!(msg.contains("#1") && msg.contains("nearest")),
            other => panic!("expected selection error, got {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip_preserves_rows() {
        let lib = MaterialLibrary::bundled();
        let r = rows(&sweep(&tiny_config(), &lib).unwrap());
        let mut buf = Vec::new();
        write_sweep_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&SWEEP_COLUMNS.join(",")));
        let back = read_sweep_csv(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, r);
        let cand = back[0].candidate(&lib, FingerLayout::default(), ShorteningModel::default()).unwrap();
        assert_eq!(cand.beam, sweep(&tiny_config(), &lib).unwrap()[0].candidate.beam);
    }
}
