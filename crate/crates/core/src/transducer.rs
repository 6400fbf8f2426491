//! Forward sensing chain of one finger-edge sensing unit.
//!
//! Frame: origin at the sensor's nominal position. The magnet sits on +z at
//! `gap` (sensor to near face), magnetized along +z.
//!
//! * The lateral beam carries the sensor. Its axis runs along +y, so F_x
//!   bends it in x; foreshortening pulls the sensor towards −y and the tip
//!   slope turns the sensor frame about z.
//! * The longitudinal beam carries the magnet. Its axis runs along −z (root
//!   beyond the magnet), so F_z bends it in y; foreshortening pulls the
//!   magnet away from the sensor and the tip slope tilts the magnet about x.
//!
//! Forces act at the beam tips.

use nalgebra::{Rotation3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::flexure::{fatigue_stress_limit, BeamSpec, DEFAULT_LIFE_THRESHOLD};
use crate::magnetostatics::{field, FieldVector, MagnetSpec, Pose};

/// Smallest magnet-to-sensor gap accepted without an explicit override, m.
pub const MIN_GAP: f64 = 1.5e-3;
/// Closed-gripper offset limit, in sensor resolution steps.
pub const INTERFERENCE_RESOLUTIONS: f64 = 3.0;
/// Deflection step for field derivatives, m.
const DEFLECTION_STEP: f64 = 1.0e-7;

/// Hall sensor characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSpec {
    /// Symmetric full-scale range, gauss.
    pub range: f64,
    /// Quantization step, gauss.
    pub resolution: f64,
    /// Additive Gaussian noise per axis, gauss.
    pub noise_sigma: f64,
    /// Hz.
    pub sample_rate: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            range: 2000.0,
            resolution: 0.1,
            noise_sigma: 0.1,
            sample_rate: 1000.0,
        }
    }
}

impl SensorSpec {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("sensor range", self.range)?;
        ensure_positive("sensor resolution", self.resolution)?;
        ensure_positive("sample rate", self.sample_rate)?;
        ensure_finite("noise sigma", self.noise_sigma)?;
        if self.noise_sigma < 0.0 {
            return Err(Error::Validation("noise sigma must be ≥ 0".into()));
        }
        Ok(())
    }

    /// Largest representable count magnitude.
    pub fn max_counts(&self) -> i64 {
        (self.range / self.resolution + 1e-9).floor() as i64
    }
}

/// Placement of the sensing unit inside the gripper finger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FingerLayout {
    /// Distance from the sensor to the finger's contact face along x, m.
    pub face_standoff: f64,
    /// Gap between opposing contact faces when the gripper is closed, m.
    pub closed_gap: f64,
}

impl Default for FingerLayout {
    fn default() -> Self {
        Self {
            face_standoff: 20.0e-3,
            closed_gap: 1.5e-3,
        }
    }
}

/// How beam foreshortening is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShorteningModel {
    /// Inextensible foreshortening u = −½∫(w′)² of the linear shape.
    #[default]
    Foreshortening,
    /// The stretching balance evaluated as printed (comparison only).
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingUnitSpec {
    /// Carries the sensor; responds to F_x.
    pub lateral_beam: BeamSpec,
    /// Carries the magnet; responds to F_z.
    pub longitudinal_beam: BeamSpec,
    pub magnet: MagnetSpec,
    /// Sensor to magnet near-face distance M_G, m.
    pub gap: f64,
    /// Accept a gap below [`MIN_GAP`].
    #[serde(default)]
    pub allow_small_gap: bool,
    /// Extra offset of the sensor relative to the lateral beam tip.
    #[serde(default = "Pose::identity")]
    pub sensor_mount: Pose,
    /// Extra offset of the magnet relative to its nominal seat.
    #[serde(default = "Pose::identity")]
    pub magnet_mount: Pose,
    #[serde(default)]
    pub layout: FingerLayout,
    #[serde(default)]
    pub shortening: ShorteningModel,
}

impl SensingUnitSpec {
    pub fn new(lateral_beam: BeamSpec, longitudinal_beam: BeamSpec, magnet: MagnetSpec, gap: f64) -> Self {
        Self {
            lateral_beam,
            longitudinal_beam,
            magnet,
            gap,
            allow_small_gap: false,
            sensor_mount: Pose::identity(),
            magnet_mount: Pose::identity(),
            layout: FingerLayout::default(),
            shortening: ShorteningModel::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lateral_beam.validate()?;
        self.longitudinal_beam.validate()?;
        self.magnet.validate()?;
        ensure_positive("gap", self.gap)?;
        if self.gap < MIN_GAP && !self.allow_small_gap {
            return Err(Error::Validation(format!(
                "gap {} mm is below the {} mm minimum",
                self.gap * 1e3,
                MIN_GAP * 1e3
            )));
        }
        ensure_positive("face standoff", self.layout.face_standoff)?;
        ensure_positive("closed gap", self.layout.closed_gap)?;
        Ok(())
    }

    pub fn nominal_magnet_pose(&self) -> Pose {
        let seat = Pose::from_translation(Vector3::new(0.0, 0.0, self.gap + self.magnet.half_height()));
        seat.compose(&self.magnet_mount)
    }

    /// Pose of the facing finger's magnet when the contact faces are
    /// `neighbor_gap` apart: the unit mirrored across the contact plane.
    pub fn neighbor_magnet_pose(&self, neighbor_gap: f64) -> Pose {
        let nominal = self.nominal_magnet_pose();
        let offset = 2.0 * self.layout.face_standoff + neighbor_gap;
        let t = nominal.translation();
        Pose::new(Vector3::new(offset - t.x, t.y, t.z), *nominal.rotation()).expect("mirrored pose keeps rotation")
    }

    fn shortening(&self, beam: &BeamSpec, delta: f64) -> f64 {
        match self.shortening {
            ShorteningModel::Foreshortening => beam.foreshortening(delta),
            ShorteningModel::Literal => {
                // With the linear shape w′ = (3δ/L³)(Lx − x²/2),
                // ∫₀ᴸ x·(w′)² dx = 9δ²·(1/4 − 1/5 + 1/24) = 99δ²/120.
                -0.5 * beam.second_moment() / beam.area() * (99.0 / 120.0) * delta * delta
            }
        }
    }

    /// Sensor and magnet poses for the given beam tip deflections.
    pub fn poses_at(&self, deflection: Deflection) -> (Pose, Pose) {
        let lat = &self.lateral_beam;
        let lon = &self.longitudinal_beam;

        let sensor_slope = 1.5 * deflection.lateral / lat.length;
        let sensor_shift = Vector3::new(deflection.lateral, self.shortening(lat, deflection.lateral), 0.0);
        let sensor_turn = Rotation3::from_axis_angle(&Vector3::z_axis(), -sensor_slope).into_inner();
        let sensor = Pose::new(sensor_shift, sensor_turn).expect("axis rotation is proper");

        let magnet_slope = 1.5 * deflection.longitudinal / lon.length;
        let magnet_shift = Vector3::new(0.0, deflection.longitudinal, -self.shortening(lon, deflection.longitudinal));
        let tilt = Rotation3::from_axis_angle(&Vector3::x_axis(), magnet_slope).into_inner();
        let nominal = self.nominal_magnet_pose();
        let magnet = Pose::new(nominal.translation() + magnet_shift, tilt * nominal.rotation())
            .expect("tilted pose stays proper");

        (sensor.compose(&self.sensor_mount), magnet)
    }

    /// Beam tip deflections under tip forces (F_x, F_z).
    pub fn deflection(&self, force: [f64; 2]) -> Deflection {
        Deflection {
            lateral: self.lateral_beam.tip_deflection(force[0]),
            longitudinal: self.longitudinal_beam.tip_deflection(force[1]),
        }
    }
}

/// Tip deflections of the two beams, m.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Deflection {
    pub lateral: f64,
    pub longitudinal: f64,
}

/// Noise-free field in the sensor frame for given beam deflections.
pub fn field_at_deflection(unit: &SensingUnitSpec, deflection: Deflection) -> Result<FieldVector> {
    ensure_finite("lateral deflection", deflection.lateral)?;
    ensure_finite("longitudinal deflection", deflection.longitudinal)?;
    let (sensor, magnet_pose) = unit.poses_at(deflection);
    let world = field(&unit.magnet, &magnet_pose, sensor.translation())?;
    Ok(world.in_frame(&sensor.rotation().transpose()))
}

/// Noise-free, unquantized field in the sensor frame under force (F_x, F_z).
pub fn forward_field(unit: &SensingUnitSpec, force: [f64; 2]) -> Result<FieldVector> {
    ensure_finite("F_x", force[0])?;
    ensure_finite("F_z", force[1])?;
    field_at_deflection(unit, unit.deflection(force))
}

/// Quantized sensor reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorReading {
    pub counts: [i64; 3],
    pub saturated: [bool; 3],
}

impl SensorReading {
    /// Reading in gauss per axis (counts × resolution).
    pub fn gauss(&self, sensor: &SensorSpec) -> [f64; 3] {
        self.counts.map(|c| c as f64 * sensor.resolution)
    }

    pub fn any_saturated(&self) -> bool {
        self.saturated.iter().any(|&s| s)
    }
}

/// Round to the resolution grid (halves away from zero) and clamp to range.
pub fn quantize(b: FieldVector, sensor: &SensorSpec) -> Result<SensorReading> {
    if !b.is_finite() {
        return Err(Error::Validation(format!("cannot quantize non-finite field {b:?}")));
    }
    Ok(quantize_gauss(b.gauss(), sensor))
}

pub(crate) fn quantize_gauss(g: [f64; 3], sensor: &SensorSpec) -> SensorReading {
    let max = sensor.max_counts();
    let mut counts = [0i64; 3];
    let mut saturated = [false; 3];
    for k in 0..3 {
        let steps = g[k] / sensor.resolution;
        let mag = steps.abs();
        // Division by a decimal resolution misplaces exact halves by an ulp
        // (0.15 / 0.1 = 1.4999…), so halves are detected with a tolerance.
        let frac = mag - mag.floor();
        let rounded = if (frac - 0.5).abs() <= 1e-9 * mag.max(1.0) {
            mag.floor() + 1.0
        } else {
            mag.round()
        };
        let c = (rounded.min(max as f64) as i64) * if steps < 0.0 { -1 } else { 1 };
        saturated[k] = g[k].abs() > sensor.range;
        counts[k] = c;
    }
    SensorReading { counts, saturated }
}

/// Full forward chain: force → deflections → poses → field → noise →
/// quantized reading. `noise_seed = None` gives the noise-free reading.
pub fn forward_reading(
    unit: &SensingUnitSpec,
    force: [f64; 2],
    sensor: &SensorSpec,
    noise_seed: Option<u64>,
) -> Result<SensorReading> {
    sensor.validate()?;
    let mut g = forward_field(unit, force)?.gauss();
    if let Some(seed) = noise_seed {
        if sensor.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise = Normal::new(0.0, sensor.noise_sigma).expect("validated sigma");
            for v in &mut g {
                *v += noise.sample(&mut rng);
            }
        }
    }
    Ok(quantize_gauss(g, sensor))
}

/// Field change per unit force at the unloaded state, gauss/newton.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSensitivity {
    /// ∂B/∂F_x per sensor axis.
    pub fx: [f64; 3],
    /// ∂B/∂F_z per sensor axis.
    pub fz: [f64; 3],
}

impl ForceSensitivity {
    /// Euclidean norms of the two columns: [|∂B/∂F_x|, |∂B/∂F_z|].
    pub fn magnitude(&self) -> [f64; 2] {
        let n = |v: [f64; 3]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
        [n(self.fx), n(self.fz)]
    }
}

/// Field sensitivity to tip displacement (gauss/m) chained with beam
/// compliance (m/N). Slope and foreshortening terms are part of the
/// displacement derivative, so the compliance factors out exactly.
pub fn force_sensitivity(unit: &SensingUnitSpec) -> Result<ForceSensitivity> {
    unit.validate()?;
    let h = DEFLECTION_STEP;
    let diff = |d_plus: Deflection, d_minus: Deflection| -> Result<[f64; 3]> {
        let p = field_at_deflection(unit, d_plus)?.gauss();
        let m = field_at_deflection(unit, d_minus)?.gauss();
        Ok([0, 1, 2].map(|k| (p[k] - m[k]) / (2.0 * h)))
    };
    let s_lat = diff(
        Deflection { lateral: h, longitudinal: 0.0 },
        Deflection { lateral: -h, longitudinal: 0.0 },
    )?;
    let s_lon = diff(
        Deflection { lateral: 0.0, longitudinal: h },
        Deflection { lateral: 0.0, longitudinal: -h },
    )?;
    let c_lat = unit.lateral_beam.compliance();
    let c_lon = unit.longitudinal_beam.compliance();
    Ok(ForceSensitivity {
        fx: s_lat.map(|s| s * c_lat),
        fz: s_lon.map(|s| s * c_lon),
    })
}

/// A design constraint family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Yield,
    Fatigue,
    Deflection,
    Saturation,
    Interference,
}

impl Constraint {
    pub fn name(self) -> &'static str {
        match self {
            Constraint::Yield => "yield",
            Constraint::Fatigue => "fatigue",
            Constraint::Deflection => "deflection",
            Constraint::Saturation => "saturation",
            Constraint::Interference => "interference",
        }
    }
}

/// Maximum admissible force on one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    /// N.
    pub max_force: f64,
    /// Constraint that stops the force from growing; `None` only when the
    /// unit is already infeasible at zero load for a reason outside the
    /// per-axis screens.
    pub binding: Option<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceRange {
    pub fx: AxisRange,
    pub fz: AxisRange,
}

struct AxisScreen<'a> {
    unit: &'a SensingUnitSpec,
    sensor: &'a SensorSpec,
    beam: &'a BeamSpec,
    axis: usize,
    fatigue_limit: f64,
}

impl AxisScreen<'_> {
    /// First constraint violated at force magnitude `f` (both signs).
    fn violation(&self, f: f64) -> Result<Option<Constraint>> {
        let stress = f * self.beam.root_stress_per_newton();
        if stress * self.beam.material.safety_factor > self.beam.material.yield_strength {
            return Ok(Some(Constraint::Yield));
        }
        if stress > self.fatigue_limit {
            return Ok(Some(Constraint::Fatigue));
        }
        if self.beam.tip_deflection(f) > self.beam.max_deflection_cap {
            return Ok(Some(Constraint::Deflection));
        }
        for sign in [1.0, -1.0] {
            let mut force = [0.0; 2];
            force[self.axis] = sign * f;
            let g = forward_field(self.unit, force)?.gauss();
            if g.iter().any(|v| v.abs() > self.sensor.range) {
                return Ok(Some(Constraint::Saturation));
            }
        }
        Ok(None)
    }

    /// Smallest of the force limits that are linear in F, with its owner.
    fn closed_form_limit(&self) -> (f64, Constraint) {
        let m = &self.beam.material;
        let k = self.beam.root_stress_per_newton();
        [
            (m.yield_strength / (m.safety_factor * k), Constraint::Yield),
            (self.fatigue_limit / k, Constraint::Fatigue),
            (self.beam.max_deflection_cap / self.beam.compliance(), Constraint::Deflection),
        ]
        .into_iter()
        .fold((f64::INFINITY, Constraint::Yield), |best, c| if c.0 < best.0 { c } else { best })
    }

    fn range(&self) -> Result<AxisRange> {
        if let Some(c) = self.violation(0.0)? {
            return Ok(AxisRange {
                max_force: 0.0,
                binding: Some(c),
            });
        }
        let (limit, owner) = self.closed_form_limit();
        if limit <= 0.0 {
            return Ok(AxisRange {
                max_force: 0.0,
                binding: Some(owner),
            });
        }
        let mut lo = 0.0_f64;
        let mut hi = limit * (1.0 + 1e-6);
        let mut binding = self.violation(hi)?;
        if binding.is_none() {
            // Only rounding at the closed-form limit can leave hi admissible.
            hi *= 1.0 + 1e-6;
            binding = self.violation(hi)?;
        }
        // Usually the closed-form limit binds; start right under it.
        let near = limit * (1.0 - 4e-7);
        if self.violation(near)?.is_none() {
            lo = near;
        }
        for _ in 0..200 {
            if hi - lo <= 1e-3 && hi <= lo * (1.0 + 5e-7) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            match self.violation(mid)? {
                None => lo = mid,
                Some(c) => {
                    hi = mid;
                    binding = Some(c);
                }
            }
        }
        Ok(AxisRange { max_force: lo, binding })
    }
}

/// Largest admissible force per axis: bisection on the combined yield,
/// fatigue (fully reversed), deflection-cap and saturation screens.
pub fn force_range(unit: &SensingUnitSpec, sensor: &SensorSpec) -> Result<ForceRange> {
    unit.validate()?;
    sensor.validate()?;
    let screen = |beam: &'_ BeamSpec, axis| -> Result<AxisRange> {
        AxisScreen {
            unit,
            sensor,
            beam,
            axis,
            fatigue_limit: fatigue_stress_limit(&beam.material, DEFAULT_LIFE_THRESHOLD)?,
        }
        .range()
    };
    Ok(ForceRange {
        fx: screen(&unit.lateral_beam, 0)?,
        fz: screen(&unit.longitudinal_beam, 1)?,
    })
}

/// Remaining fraction of each constraint's allowance (1 − use/limit).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintMargins {
    pub yield_margin: f64,
    pub fatigue: f64,
    pub geometric: f64,
    pub signal_range: f64,
    pub interference: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub yield_ok: bool,
    pub fatigue_ok: bool,
    pub geometric_ok: bool,
    pub signal_range_ok: bool,
    pub interference_ok: bool,
    /// First failed constraint in the order yield, fatigue, deflection,
    /// saturation, interference; `None` when feasible.
    pub binding_constraint: Option<Constraint>,
    pub margins: ConstraintMargins,
    /// Closed-gripper neighbour field at the sensor, gauss.
    pub neighbor_offset: [f64; 3],
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.yield_ok && self.fatigue_ok && self.geometric_ok && self.signal_range_ok && self.interference_ok
    }
}

fn margin(used: f64, limit: f64) -> f64 {
    if limit > 0.0 {
        1.0 - used / limit
    } else if used > 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

/// Evaluate every constraint family at load `force` = (F_x, F_z).
pub fn check_constraints(unit: &SensingUnitSpec, sensor: &SensorSpec, force: [f64; 2]) -> Result<FeasibilityReport> {
    unit.validate()?;
    sensor.validate()?;
    ensure_finite("F_x", force[0])?;
    ensure_finite("F_z", force[1])?;
    let beams = [(&unit.lateral_beam, force[0].abs()), (&unit.longitudinal_beam, force[1].abs())];

    let mut yield_margin = f64::INFINITY;
    let mut fatigue = f64::INFINITY;
    let mut geometric = f64::INFINITY;
    for (beam, f) in beams {
        let stress = f * beam.root_stress_per_newton();
        let m = &beam.material;
        yield_margin = yield_margin.min(margin(stress * m.safety_factor, m.yield_strength));
        fatigue = fatigue.min(margin(stress, fatigue_stress_limit(m, DEFAULT_LIFE_THRESHOLD)?));
        geometric = geometric.min(margin(beam.tip_deflection(f), beam.max_deflection_cap));
    }
    let d = unit.deflection(force);
    let (sensor_pose, magnet_pose) = unit.poses_at(d);
    let clearance = (magnet_pose.translation() - sensor_pose.translation()).norm() - unit.magnet.half_height();
    if clearance <= 0.0 {
        geometric = geometric.min(f64::NEG_INFINITY);
    }

    let signal = forward_field(unit, force)?.gauss();
    let peak = signal.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let signal_range = margin(peak, sensor.range);

    let neighbor = field(
        &unit.magnet,
        &unit.neighbor_magnet_pose(unit.layout.closed_gap),
        &Vector3::zeros(),
    )?
    .gauss();
    let neighbor_peak = neighbor.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let interference = margin(neighbor_peak, INTERFERENCE_RESOLUTIONS * sensor.resolution);

    let margins = ConstraintMargins {
        yield_margin,
        fatigue,
        geometric,
        signal_range,
        interference,
    };
    let flags = [
        (yield_margin >= 0.0, Constraint::Yield),
        (fatigue >= 0.0, Constraint::Fatigue),
        (geometric >= 0.0, Constraint::Deflection),
        (signal_range >= 0.0, Constraint::Saturation),
        (interference > 0.0, Constraint::Interference),
    ];
    Ok(FeasibilityReport {
        yield_ok: flags[0].0,
        fatigue_ok: flags[1].0,
        geometric_ok: flags[2].0,
        signal_range_ok: flags[3].0,
        interference_ok: flags[4].0,
        binding_constraint: flags.iter().find(|(ok, _)| !ok).map(|&(_, c)| c),
        margins,
        neighbor_offset: neighbor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flexure::MaterialLibrary;

    pub(crate) fn unit(material: &str, t: f64, len: f64, diameter: f64, length: f64) -> SensingUnitSpec {
        let m = MaterialLibrary::bundled().get(material).unwrap().clone();
        let beam = BeamSpec::new(m, len, t, 15e-3, 0.5e-3);
        SensingUnitSpec::new(beam.clone(), beam, MagnetSpec::cylinder(diameter, length), 1.5e-3)
    }

    #[test]
    fn quantization_rules() {
        let s = SensorSpec::default();
        let q = |g: f64| quantize(FieldVector::from_gauss([g, -g, 0.0]), &s).unwrap();
        assert_eq!(q(0.04).counts, [0, 0, 0]);
        assert_eq!(q(0.15).counts, [2, -2, 0]);
        assert_eq!(q(0.15).gauss(&s)[0], 2.0 * 0.1);
        let sat = q(2500.0);
        assert_eq!(sat.counts, [20000, -20000, 0]);
        assert_eq!(sat.saturated, [true, true, false]);
        assert_eq!(sat.gauss(&s)[0], 2000.0);
        let once = q(123.456);
        let twice = quantize(FieldVector::from_gauss(once.gauss(&s)), &s).unwrap();
        assert_eq!(once, twice);
        assert!(quantize(FieldVector::new(f64::NAN, 0.0, 0.0), &s).is_err());
    }

    #[test]
    fn nominal_reading_is_deterministic() {
        let u = unit("abs", 5e-3, 30e-3, 3e-3, 3e-3);
        let s = SensorSpec::default();
        let a = forward_reading(&u, [0.0, 0.0], &s, None).unwrap();
        let b = forward_reading(&u, [0.0, 0.0], &s, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts[0], 0);
        assert!(a.counts[2] > 0);
        let n1 = forward_reading(&u, [0.0, 0.0], &s, Some(7)).unwrap();
        let n2 = forward_reading(&u, [0.0, 0.0], &s, Some(7)).unwrap();
        assert_eq!(n1, n2);
        assert!(forward_reading(&u, [f64::NAN, 0.0], &s, None).is_err());
    }

    #[test]
    fn lateral_force_moves_only_the_sensor() {
        let u = unit("abs", 5e-3, 30e-3, 3e-3, 3e-3);
        let (s0, m0) = u.poses_at(u.deflection([0.0, 0.0]));
        let (s1, m1) = u.poses_at(u.deflection([5.0, 0.0]));
        assert_eq!(m0, m1);
        assert!(s1.translation().x > s0.translation().x);
        let (s2, m2) = u.poses_at(u.deflection([0.0, 5.0]));
        assert_eq!(s0, s2);
        assert!(m2.translation().y > 0.0 && m2.translation().z > m0.translation().z);
    }

    #[test]
    fn sensitivity_scales_with_compliance() {
        let thin = unit("abs", 4e-3, 30e-3, 3e-3, 3e-3);
        let thick = unit("abs", 8e-3, 30e-3, 3e-3, 3e-3);
        let a = force_sensitivity(&thin).unwrap().magnitude();
        let b = force_sensitivity(&thick).unwrap().magnitude();
        for k in 0..2 {
            assert!((a[k] / b[k] - 8.0).abs() < 1e-9, "{a:?} {b:?}");
        }
        let steel = unit("steel", 4e-3, 30e-3, 3e-3, 3e-3);
        let c = force_sensitivity(&steel).unwrap().magnitude();
        assert!(c[0] < a[0] && c[1] < a[1]);
    }

    #[test]
    fn odd_symmetry_before_quantization() {
        let u = unit("abs", 5e-3, 30e-3, 3e-3, 3e-3);
        let nominal = forward_field(&u, [0.0, 0.0]).unwrap().gauss();
        let f = 1e-3;
        let p = forward_field(&u, [f, 0.0]).unwrap().gauss();
        let m = forward_field(&u, [-f, 0.0]).unwrap().gauss();
        let scale = (p[0] - nominal[0]).abs();
        for k in 0..3 {
            assert!(((p[k] - nominal[k]) + (m[k] - nominal[k])).abs() < 1e-3 * scale);
        }
    }

    #[test]
    fn force_range_bisection_invariant() {
        let u = unit("abs", 5e-3, 30e-3, 3e-3, 3e-3);
        let s = SensorSpec::default();
        let r = force_range(&u, &s).unwrap();
        for (axis, range) in [(0, r.fx), (1, r.fz)] {
            assert!(range.max_force > 0.0);
            let mut f = [0.0; 2];
            f[axis] = range.max_force;
            assert!(check_constraints(&u, &s, f).unwrap().feasible());
            f[axis] = range.max_force * (1.0 + 1e-6);
            assert!(!check_constraints(&u, &s, f).unwrap().feasible());
        }
    }

    #[test]
    fn zero_cap_gives_zero_range() {
        let mut u = unit("steel", 5e-3, 30e-3, 3e-3, 3e-3);
        u.lateral_beam.max_deflection_cap = 0.0;
        let r = force_range(&u, &SensorSpec::default()).unwrap();
        assert_eq!(r.fx.max_force, 0.0);
        assert_eq!(r.fx.binding, Some(Constraint::Deflection));
    }

    #[test]
    fn stronger_material_never_shrinks_the_range() {
        let u = unit("abs", 5e-3, 30e-3, 3e-3, 3e-3);
        let mut v = u.clone();
        v.lateral_beam.material.yield_strength *= 2.0;
        let s = SensorSpec::default();
        assert!(force_range(&v, &s).unwrap().fx.max_force >= force_range(&u, &s).unwrap().fx.max_force);
    }

    #[test]
    fn constraint_report() {
        let u = unit("steel", 5e-3, 30e-3, 3e-3, 3e-3);
        let s = SensorSpec::default();
        let ok = check_constraints(&u, &s, [0.0, 0.0]).unwrap();
        assert!(ok.feasible() && ok.binding_constraint.is_none());
        let m = &u.lateral_beam.material;
        let yield_force = m.yield_strength / (m.safety_factor * u.lateral_beam.root_stress_per_newton());
        let bad = check_constraints(&u, &s, [1.01 * yield_force, 0.0]).unwrap();
        assert!(!bad.yield_ok);
        assert_eq!(bad.binding_constraint, Some(Constraint::Yield));
    }

    #[test]
    fn small_gap_needs_override() {
        let mut u = unit("abs", 5e-3, 30e-3, 3e-3, 3e-3);
        u.gap = 1.0e-3;
        assert!(u.validate().is_err());
        u.allow_small_gap = true;
        assert!(u.validate().is_ok());
    }
}
