//! Analytic magnetic fields of permanent magnets, sensitivity profiles at
//! the sensor frame and interference budgeting.
//!
//! All magnets are uniformly magnetized along their local +z axis. A magnet
//! is placed in the world by a [`Pose`]; [`field`] evaluates the exterior
//! flux density at a world point.

pub mod analytic;
pub mod elliptic;
pub mod oracle;
pub mod quadrature;

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::transducer::SensingUnitSpec;
use crate::GAUSS_PER_TESLA;

/// Points closer than this to a magnet surface are rejected.
pub const SURFACE_CLEARANCE: f64 = 1.0e-6;

/// Remanence of N32 grade NdFeB.
pub const N32_REMANENCE: f64 = 1.2;

/// Default ambient (earth) field magnitude in tesla.
pub const DEFAULT_EARTH_FIELD: f64 = 0.5e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MagnetShape {
    Cylinder,
    /// Square prism: `diameter` is the side in x and y, `length` the height.
    Cube,
    Sphere,
    Tube,
}

impl MagnetShape {
    pub fn name(&self) -> &'static str {
        match self {
            MagnetShape::Cylinder => "cylinder",
            MagnetShape::Cube => "cube",
            MagnetShape::Sphere => "sphere",
            MagnetShape::Tube => "tube",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cylinder" => Ok(Self::Cylinder),
            "cube" => Ok(Self::Cube),
            "sphere" => Ok(Self::Sphere),
            "tube" => Ok(Self::Tube),
            other => Err(Error::Validation(format!("unknown magnet shape `{other}`"))),
        }
    }
}

fn default_remanence() -> f64 {
    N32_REMANENCE
}

fn default_demag() -> f64 {
    1.0
}

/// Field source: shape, size and remanence of a permanent magnet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnetSpec {
    pub shape: MagnetShape,
    /// Outer diameter (side length for cubes), meters.
    pub diameter: f64,
    /// Extent along the magnetization axis, meters.
    pub length: f64,
    /// Bore diameter for tubes, 0 otherwise.
    #[serde(default)]
    pub inner_diameter: f64,
    /// Remanence Br, tesla.
    #[serde(default = "default_remanence")]
    pub remanence: f64,
    /// Uniform demagnetization factor in [0.99, 1.0].
    #[serde(default = "default_demag")]
    pub demag_multiplier: f64,
}

impl MagnetSpec {
    pub fn cylinder(diameter: f64, length: f64) -> Self {
        Self {
            shape: MagnetShape::Cylinder,
            diameter,
            length,
            inner_diameter: 0.0,
            remanence: N32_REMANENCE,
            demag_multiplier: 1.0,
        }
    }

    pub fn cube(side: f64, length: f64) -> Self {
        Self {
            shape: MagnetShape::Cube,
            ..Self::cylinder(side, length)
        }
    }

    pub fn sphere(diameter: f64) -> Self {
        Self {
            shape: MagnetShape::Sphere,
            ..Self::cylinder(diameter, diameter)
        }
    }

    pub fn tube(diameter: f64, inner_diameter: f64, length: f64) -> Self {
        Self {
            shape: MagnetShape::Tube,
            inner_diameter,
            ..Self::cylinder(diameter, length)
        }
    }

    pub fn with_remanence(mut self, br: f64) -> Self {
        self.remanence = br;
        self
    }

    pub fn with_demag(mut self, multiplier: f64) -> Self {
        self.demag_multiplier = multiplier;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("magnet diameter", self.diameter)?;
        ensure_positive("magnet length", self.length)?;
        ensure_positive("magnet remanence", self.remanence)?;
        ensure_finite("magnet inner diameter", self.inner_diameter)?;
        ensure_finite("demag multiplier", self.demag_multiplier)?;
        if !(0.99..=1.0).contains(&self.demag_multiplier) {
            return Err(Error::Validation(format!(
                "demag multiplier must lie in [0.99, 1.0], got {}",
                self.demag_multiplier
            )));
        }
        match self.shape {
            MagnetShape::Tube => {
                if !(self.inner_diameter > 0.0 && self.inner_diameter < self.diameter) {
                    return Err(Error::Validation(format!(
                        "tube inner diameter must lie in (0, {}), got {}",
                        self.diameter, self.inner_diameter
                    )));
                }
            }
            _ => {
                if self.inner_diameter != 0.0 {
                    return Err(Error::Validation(format!(
                        "inner diameter is only meaningful for tubes (got {} on a {})",
                        self.inner_diameter,
                        self.shape.name()
                    )));
                }
            }
        }
        if self.shape == MagnetShape::Sphere && (self.length - self.diameter).abs() > 1e-12 * self.diameter {
            return Err(Error::Validation(format!(
                "sphere requires length == diameter ({} != {})",
                self.length, self.diameter
            )));
        }
        Ok(())
    }

    /// Effective polarization after demagnetization, tesla.
    pub fn effective_remanence(&self) -> f64 {
        self.remanence * self.demag_multiplier
    }

    /// Half extent along the magnetization axis.
    pub fn half_height(&self) -> f64 {
        match self.shape {
            MagnetShape::Sphere => 0.5 * self.diameter,
            _ => 0.5 * self.length,
        }
    }

    pub fn volume(&self) -> f64 {
        let r = 0.5 * self.diameter;
        match self.shape {
            MagnetShape::Cylinder => std::f64::consts::PI * r * r * self.length,
            MagnetShape::Cube => self.diameter * self.diameter * self.length,
            MagnetShape::Sphere => 4.0 / 3.0 * std::f64::consts::PI * r.powi(3),
            MagnetShape::Tube => {
                let ri = 0.5 * self.inner_diameter;
                std::f64::consts::PI * (r * r - ri * ri) * self.length
            }
        }
    }

    /// True when the local point lies inside the body or within
    /// [`SURFACE_CLEARANCE`] of its surface.
    pub fn contains_local(&self, p: &Vector3<f64>) -> bool {
        let tol = SURFACE_CLEARANCE;
        let hz = self.half_height();
        let r = 0.5 * self.diameter;
        match self.shape {
            MagnetShape::Cylinder => p.x.hypot(p.y) <= r + tol && p.z.abs() <= hz + tol,
            MagnetShape::Tube => {
                let rho = p.x.hypot(p.y);
                rho <= r + tol && rho >= 0.5 * self.inner_diameter - tol && p.z.abs() <= hz + tol
            }
            MagnetShape::Cube => p.x.abs() <= r + tol && p.y.abs() <= r + tol && p.z.abs() <= hz + tol,
            MagnetShape::Sphere => p.norm() <= r + tol,
        }
    }

    /// Exterior field in the magnet frame; the caller guarantees the point is
    /// outside the body.
    pub(crate) fn local_field_unchecked(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let br = self.effective_remanence();
        let r = 0.5 * self.diameter;
        let hz = self.half_height();
        match self.shape {
            MagnetShape::Cylinder => analytic::cylinder(r, hz, br, p),
            MagnetShape::Tube => {
                analytic::cylinder(r, hz, br, p) - analytic::cylinder(0.5 * self.inner_diameter, hz, br, p)
            }
            MagnetShape::Cube => analytic::cuboid(r, r, hz, br, p),
            MagnetShape::Sphere => analytic::sphere(r, br, p),
        }
    }
}

/// Magnetic flux density, tesla.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldVector {
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
}

impl FieldVector {
    pub const ZERO: Self = Self { bx: 0.0, by: 0.0, bz: 0.0 };

    pub fn new(bx: f64, by: f64, bz: f64) -> Self {
        Self { bx, by, bz }
    }

    pub fn from_gauss(g: [f64; 3]) -> Self {
        Self::new(g[0] / GAUSS_PER_TESLA, g[1] / GAUSS_PER_TESLA, g[2] / GAUSS_PER_TESLA)
    }

    pub fn gauss(&self) -> [f64; 3] {
        [self.bx * GAUSS_PER_TESLA, self.by * GAUSS_PER_TESLA, self.bz * GAUSS_PER_TESLA]
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.bx, self.by, self.bz]
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.bx, self.by, self.bz)
    }

    pub fn norm(&self) -> f64 {
        self.vector().norm()
    }

    pub fn is_finite(&self) -> bool {
        self.bx.is_finite() && self.by.is_finite() && self.bz.is_finite()
    }

    /// Expresses the vector in a frame rotated by `rotation`.
    pub fn in_frame(&self, rotation: &Matrix3<f64>) -> Self {
        (rotation.transpose() * self.vector()).into()
    }
}

impl From<Vector3<f64>> for FieldVector {
    fn from(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

impl Add for FieldVector {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.bx + o.bx, self.by + o.by, self.bz + o.bz)
    }
}

impl AddAssign for FieldVector {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for FieldVector {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.bx - o.bx, self.by - o.by, self.bz - o.bz)
    }
}

impl Neg for FieldVector {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.bx, -self.by, -self.bz)
    }
}

impl Mul<f64> for FieldVector {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.bx * k, self.by * k, self.bz * k)
    }
}

/// Rigid placement: `world = rotation · local + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    translation: Vector3<f64>,
    rotation: Matrix3<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRepr {
    #[serde(default)]
    translation: [f64; 3],
    /// Row-major rotation matrix.
    #[serde(default = "identity_rows")]
    rotation: [[f64; 3]; 3],
}

fn identity_rows() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

impl TryFrom<PoseRepr> for Pose {
    type Error = Error;
    fn try_from(r: PoseRepr) -> Result<Self> {
        let m = Matrix3::from_fn(|i, j| r.rotation[i][j]);
        Pose::new(Vector3::from(r.translation), m)
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        let mut rotation = [[0.0; 3]; 3];
        for (i, row) in rotation.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = p.rotation[(i, j)];
            }
        }
        PoseRepr {
            translation: [p.translation.x, p.translation.y, p.translation.z],
            rotation,
        }
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            translation: Vector3::zeros(),
            rotation: Matrix3::identity(),
        }
    }

    /// Validates that `rotation` is orthonormal to 1e-12 with det = +1.
    pub fn new(translation: Vector3<f64>, rotation: Matrix3<f64>) -> Result<Self> {
        if translation.iter().chain(rotation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Validation("pose entries must be finite".into()));
        }
        let defect = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if defect > 1e-12 {
            return Err(Error::Validation(format!(
                "rotation is not orthonormal (max |RᵀR − I| = {defect:.3e})"
            )));
        }
        if (rotation.determinant() - 1.0).abs() > 1e-12 {
            return Err(Error::Validation("rotation must have det = +1".into()));
        }
        Ok(Self { translation, rotation })
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            translation: t,
            rotation: Matrix3::identity(),
        }
    }

    /// Rotation by `angle` radians about `axis`, followed by translation.
    pub fn from_axis_angle(t: Vector3<f64>, axis: Vector3<f64>, angle: f64) -> Self {
        let rotation = if angle == 0.0 || axis.norm() == 0.0 {
            Matrix3::identity()
        } else {
            *Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).matrix()
        };
        Self { translation: t, rotation }
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            translation: self.rotation * other.translation + self.translation,
            rotation: self.rotation * other.rotation,
        }
    }

    pub fn translated(&self, delta: Vector3<f64>) -> Pose {
        Pose {
            translation: self.translation + delta,
            rotation: self.rotation,
        }
    }

    pub fn to_local(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (world - self.translation)
    }
}

fn check_point(point: &Vector3<f64>) -> Result<()> {
    if point.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Validation(format!("field point must be finite, got {point:?}")))
    }
}

/// Exact exterior field of `magnet` placed at `magnet_pose`, evaluated at
/// the world point `point`.
pub fn field(magnet: &MagnetSpec, magnet_pose: &Pose, point: &Vector3<f64>) -> Result<FieldVector> {
    magnet.validate()?;
    check_point(point)?;
    let local = magnet_pose.to_local(point);
    if magnet.contains_local(&local) {
        return Err(Error::Domain(format!(
            "point {:?} is inside or within {SURFACE_CLEARANCE:e} m of the {} magnet",
            point.as_slice(),
            magnet.shape.name()
        )));
    }
    Ok((magnet_pose.rotation() * magnet.local_field_unchecked(&local)).into())
}

/// Field oracle by adaptive quadrature over equivalent surface currents or
/// charges. Independent of the closed forms used by [`field`].
pub fn field_oracle(magnet: &MagnetSpec, point: &Vector3<f64>) -> Result<FieldVector> {
    oracle::field_oracle(magnet, point)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn unit(&self) -> Vector3<f64> {
        match self {
            Axis::X => Vector3::x(),
            Axis::Y => Vector3::y(),
            Axis::Z => Vector3::z(),
        }
    }

    pub fn index(&self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Field and its motion derivative sampled along a magnet displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityProfile {
    pub axis: Axis,
    /// Magnet displacement along `axis`, meters.
    pub displacement: Vec<f64>,
    /// Field at the sensor, expressed in the sensor frame.
    pub field: Vec<FieldVector>,
    /// dB/dX per field axis, tesla per meter.
    pub sensitivity: Vec<[f64; 3]>,
    /// max |dB/dX| over the range per field axis, tesla per meter.
    pub max_abs: [f64; 3],
}

impl SensitivityProfile {
    pub fn max_abs_gauss_per_m(&self) -> [f64; 3] {
        self.max_abs.map(|v| v * GAUSS_PER_TESLA)
    }
}

/// Derivative step for central differences, meters.
const FD_STEP: f64 = 1.0e-7;

/// Samples the field change rate S = dB/dX as the magnet (nominally at the
/// origin, identity orientation) moves along `axis` over `range`.
///
/// `sensor_pose` is the sensor placement in the magnet's nominal frame; the
/// reported field is expressed in the sensor's axes.
pub fn sensitivity_profile(
    magnet: &MagnetSpec,
    sensor_pose: &Pose,
    axis: Axis,
    range: (f64, f64),
    steps: usize,
) -> Result<SensitivityProfile> {
    magnet.validate()?;
    if steps < 3 {
        return Err(Error::Validation(format!("sensitivity profile needs ≥ 3 steps, got {steps}")));
    }
    ensure_finite("range start", range.0)?;
    ensure_finite("range end", range.1)?;
    if range.1 <= range.0 {
        return Err(Error::Validation(format!("empty displacement range {range:?}")));
    }
    let dir = axis.unit();
    let sensor_point = *sensor_pose.translation();
    let rot = *sensor_pose.rotation();
    let eval = |d: f64| -> Result<Vector3<f64>> {
        let pose = Pose::from_translation(dir * d);
        let b = field(magnet, &pose, &sensor_point).map_err(|e| match e {
            Error::Domain(_) => Error::Domain(format!(
                "magnet displaced by {d:.3e} m along {axis:?} overlaps the sensor"
            )),
            other => other,
        })?;
        Ok(rot.transpose() * b.vector())
    };

    let mut displacement = Vec::with_capacity(steps);
    let mut field_samples = Vec::with_capacity(steps);
    let mut sensitivity = Vec::with_capacity(steps);
    let mut max_abs = [0.0f64; 3];
    for i in 0..steps {
        let d = range.0 + (range.1 - range.0) * i as f64 / (steps - 1) as f64;
        let b = eval(d)?;
        let s = (eval(d + FD_STEP)? - eval(d - FD_STEP)?) / (2.0 * FD_STEP);
        for k in 0..3 {
            max_abs[k] = max_abs[k].max(s[k].abs());
        }
        displacement.push(d);
        field_samples.push(b.into());
        sensitivity.push([s.x, s.y, s.z]);
    }
    Ok(SensitivityProfile {
        axis,
        displacement,
        field: field_samples,
        sensitivity,
        max_abs,
    })
}

/// Sensor pose facing the magnet's -z face at `gap` (sensor-to-face), in the
/// magnet's frame.
pub fn facing_sensor_pose(magnet: &MagnetSpec, gap: f64) -> Pose {
    Pose::from_translation(Vector3::new(0.0, 0.0, -(gap + magnet.half_height())))
}

/// Budget of the four interference sources at the sensor of one unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceReport {
    pub earth_offset: FieldVector,
    /// Field of the neighbouring unit's magnet at this unit's sensor.
    pub neighbor_offset: FieldVector,
    /// Per-axis standard deviation of the nominal reading under placement
    /// perturbation, gauss.
    pub misalignment_spread: [f64; 3],
    /// Field lost between the demagnetization extremes.
    pub demag_delta: FieldVector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceOptions {
    pub earth_field: FieldVector,
    /// Also perturb magnet orientation (small rotation with this per-axis
    /// standard deviation, radians). Zero disables.
    pub rotation_sigma: f64,
}

impl Default for InterferenceOptions {
    fn default() -> Self {
        Self {
            earth_field: FieldVector::new(0.0, 0.0, DEFAULT_EARTH_FIELD),
            rotation_sigma: 0.0,
        }
    }
}

/// Lower end of the demagnetization multiplier range.
pub const DEMAG_FLOOR: f64 = 0.99;

/// Interference budget for `unit` at its nominal (unloaded) state.
pub fn interference_budget(
    unit: &SensingUnitSpec,
    neighbor_gap: f64,
    misalignment_sigma: f64,
    trials: usize,
    seed: u64,
    options: &InterferenceOptions,
) -> Result<InterferenceReport> {
    ensure_positive("neighbor gap", neighbor_gap)?;
    ensure_finite("misalignment sigma", misalignment_sigma)?;
    if misalignment_sigma < 0.0 {
        return Err(Error::Validation("misalignment sigma must be ≥ 0".into()));
    }
    if trials == 0 {
        return Err(Error::Validation("interference budget needs ≥ 1 trial".into()));
    }
    unit.validate()?;
    let origin = Vector3::zeros();
    let magnet = unit.magnet;
    let nominal_pose = unit.nominal_magnet_pose();

    let neighbor_offset = field(&magnet, &unit.neighbor_magnet_pose(neighbor_gap), &origin)?;

    let pos_dist = Normal::new(0.0, misalignment_sigma.max(0.0))
        .map_err(|e| Error::Validation(format!("misalignment sigma: {e}")))?;
    let rot_dist = Normal::new(0.0, options.rotation_sigma.max(0.0))
        .map_err(|e| Error::Validation(format!("rotation sigma: {e}")))?;
    let mut sum = [0.0f64; 3];
    let mut samples = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let delta = Vector3::new(pos_dist.sample(&mut rng), pos_dist.sample(&mut rng), pos_dist.sample(&mut rng));
        let mut pose = nominal_pose.translated(delta);
        if options.rotation_sigma > 0.0 {
            let rv = Vector3::new(rot_dist.sample(&mut rng), rot_dist.sample(&mut rng), rot_dist.sample(&mut rng));
            let tilt = Pose::from_axis_angle(Vector3::zeros(), rv, rv.norm());
            pose = Pose {
                translation: pose.translation,
                rotation: tilt.rotation * pose.rotation,
            };
        }
        let g = field(&magnet, &pose, &origin)?.gauss();
        for k in 0..3 {
            sum[k] += g[k];
        }
        samples.push(g);
    }
    let n = trials as f64;
    let mean = sum.map(|s| s / n);
    let mut spread = [0.0f64; 3];
    for g in &samples {
        for k in 0..3 {
            spread[k] += (g[k] - mean[k]).powi(2);
        }
    }
    let misalignment_spread = spread.map(|s| (s / n).sqrt());

    let full = field(&magnet.with_demag(1.0), &nominal_pose, &origin)?;
    let weakened = field(&magnet.with_demag(DEMAG_FLOOR), &nominal_pose, &origin)?;

    Ok(InterferenceReport {
        earth_offset: options.earth_field,
        neighbor_offset,
        misalignment_spread,
        demag_delta: full - weakened,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx_eq(a: FieldVector, b: FieldVector, tol: f64) -> bool {
        (a - b).norm() <= tol * a.norm().max(b.norm()).max(1e-300)
    }

    #[test]
    fn sphere_is_exactly_dipolar() {
        let m = MagnetSpec::sphere(2.5e-3);
        let pose = Pose::identity();
        for p in [
            Vector3::new(0.0, 0.0, 3e-3),
            Vector3::new(2e-3, -1e-3, 2.2e-3),
            Vector3::new(-5e-3, 4e-3, -1e-3),
        ] {
            let b = field(&m, &pose, &p).unwrap();
            let dip = analytic::dipole(m.remanence * m.volume(), &p);
            assert!(approx_eq(b, dip.into(), 1e-15));
        }
    }

    #[test]
    fn cylinder_on_axis_has_no_transverse_field() {
        let m = MagnetSpec::cylinder(2.5e-3, 2.5e-3);
        let p = Vector3::new(0.0, 0.0, 1.25e-3 + 1.5e-3);
        let b = field(&m, &Pose::identity(), &p).unwrap();
        assert_eq!(b.bx, 0.0);
        assert_eq!(b.by, 0.0);
        assert!(b.bz > 0.0);
    }

    #[test]
    fn tube_is_outer_minus_inner() {
        let tube = MagnetSpec::tube(2.5e-3, 1e-3, 2.5e-3);
        let outer = MagnetSpec::cylinder(2.5e-3, 2.5e-3);
        let inner = MagnetSpec::cylinder(1e-3, 2.5e-3);
        let pose = Pose::identity();
        for p in [Vector3::new(0.3e-3, 0.2e-3, 3e-3), Vector3::new(3e-3, 0.0, 0.0), Vector3::new(-1e-3, 2e-3, -2.6e-3)] {
            let t = field(&tube, &pose, &p).unwrap();
            let d = field(&outer, &pose, &p).unwrap() - field(&inner, &pose, &p).unwrap();
            assert!(approx_eq(t, d, 1e-14));
        }
    }

    #[test]
    fn interior_points_are_rejected() {
        let m = MagnetSpec::cylinder(2e-3, 2e-3);
        let err = field(&m, &Pose::identity(), &Vector3::new(0.0, 0.0, 0.5e-3)).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        let on_surface = field(&m, &Pose::identity(), &Vector3::new(0.0, 0.0, 1e-3 + 5e-7));
        assert!(matches!(on_surface, Err(Error::Domain(_))));
        let nan = field(&m, &Pose::identity(), &Vector3::new(f64::NAN, 0.0, 5e-3));
        assert!(matches!(nan, Err(Error::Validation(_))));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(MagnetSpec::cylinder(-1e-3, 1e-3).validate().is_err());
        assert!(MagnetSpec::tube(2e-3, 2e-3, 1e-3).validate().is_err());
        let mut s = MagnetSpec::sphere(2e-3);
        s.length = 3e-3;
        assert!(s.validate().is_err());
        assert!(MagnetSpec::cylinder(1e-3, 1e-3).with_demag(0.95).validate().is_err());
    }

    #[test]
    fn pose_rejects_non_orthonormal_rotation() {
        let mut m = Matrix3::identity();
        m[(0, 1)] = 1e-6;
        assert!(Pose::new(Vector3::zeros(), m).is_err());
        let reflect = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Pose::new(Vector3::zeros(), reflect).is_err());
    }

    #[test]
    fn rotated_pose_rotates_the_field() {
        let m = MagnetSpec::cylinder(2e-3, 3e-3);
        let pose = Pose::from_axis_angle(Vector3::new(1e-3, 0.0, 0.0), Vector3::y(), 0.4);
        let p = Vector3::new(2e-3, 1e-3, 4e-3);
        let b = field(&m, &pose, &p).unwrap();
        let local = field(&m, &Pose::identity(), &pose.to_local(&p)).unwrap();
        let back: FieldVector = (pose.rotation() * local.vector()).into();
        assert!(approx_eq(b, back, 1e-14));
    }

    #[test]
    fn sensitivity_scales_with_remanence() {
        let m = MagnetSpec::cylinder(3e-3, 3e-3);
        let sensor = facing_sensor_pose(&m, 1.5e-3);
        let a = sensitivity_profile(&m, &sensor, Axis::X, (-0.5e-3, 0.5e-3), 11).unwrap();
        let b = sensitivity_profile(&m.with_remanence(2.4), &sensor, Axis::X, (-0.5e-3, 0.5e-3), 11).unwrap();
        for (sa, sb) in a.sensitivity.iter().zip(&b.sensitivity) {
            for k in 0..3 {
                assert!((sb[k] - 2.0 * sa[k]).abs() <= 1e-9 * sb[k].abs().max(1e-9));
            }
        }
    }

    #[test]
    fn x_and_y_motion_give_identical_profiles_for_axisymmetric_magnets() {
        let m = MagnetSpec::cylinder(3e-3, 2e-3);
        let sensor = facing_sensor_pose(&m, 1.5e-3);
        let px = sensitivity_profile(&m, &sensor, Axis::X, (-1e-3, 1e-3), 21).unwrap();
        let py = sensitivity_profile(&m, &sensor, Axis::Y, (-1e-3, 1e-3), 21).unwrap();
        for (a, b) in px.sensitivity.iter().zip(&py.sensitivity) {
            // S_x under x motion equals S_y under y motion; S_z is shared.
            assert!((a[0] - b[1]).abs() <= 1e-9 * a[0].abs().max(1.0));
            assert!((a[2] - b[2]).abs() <= 1e-9 * a[2].abs().max(1.0));
        }
    }

    #[test]
    fn overlapping_motion_is_a_domain_error() {
        let m = MagnetSpec::cylinder(3e-3, 2e-3);
        let sensor = facing_sensor_pose(&m, 1.5e-3);
        let err = sensitivity_profile(&m, &sensor, Axis::Z, (-3e-3, 0.0), 5).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        assert!(sensitivity_profile(&m, &sensor, Axis::X, (-1e-3, 1e-3), 2).is_err());
    }
}
