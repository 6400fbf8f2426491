//! Cantilever flexure mechanics.
//!
//! Every beam is clamped at `x = 0` and free at `x = L`. Linear
//! Euler–Bernoulli closed forms cover the tip response to a point load; the
//! Von Kármán solver adds the membrane coupling between bending and axial
//! stretch, and the foreshortening integral gives the in-plane tip motion
//! that the transducer feeds into the magnet–sensor pose.

mod material;

pub use material::{MaterialLibrary, MaterialSpec};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Thickness-to-length ratio above which slender-beam theory is doubtful.
pub const SLENDERNESS_LIMIT: f64 = 0.2;
/// Cycles treated as "indefinite" life when no endurance limit is known.
pub const DEFAULT_LIFE_THRESHOLD: f64 = 1.0e7;

/// Rectangular-section cantilever.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSpec {
    pub material: MaterialSpec,
    /// Free length L, m.
    pub length: f64,
    /// Thickness t in the bending direction, m.
    pub thickness: f64,
    /// Width b_w, m.
    pub width: f64,
    /// Largest admissible tip deflection, m.
    pub max_deflection_cap: f64,
}

impl BeamSpec {
    pub fn new(material: MaterialSpec, length: f64, thickness: f64, width: f64, max_deflection_cap: f64) -> Self {
        Self {
            material,
            length,
            thickness,
            width,
            max_deflection_cap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        ensure_positive("beam length", self.length)?;
        ensure_positive("beam thickness", self.thickness)?;
        ensure_positive("beam width", self.width)?;
        ensure_finite("deflection cap", self.max_deflection_cap)?;
        if self.max_deflection_cap < 0.0 {
            return Err(Error::Validation(format!(
                "deflection cap must be ≥ 0, got {}",
                self.max_deflection_cap
            )));
        }
        if let Some(msg) = self.slenderness_warning() {
            log::warn!("{msg}");
        }
        Ok(())
    }

    /// A message when t/L exceeds [`SLENDERNESS_LIMIT`].
    pub fn slenderness_warning(&self) -> Option<String> {
        let ratio = self.thickness / self.length;
        (ratio > SLENDERNESS_LIMIT).then(|| {
            format!("beam t/L = {ratio:.3} exceeds {SLENDERNESS_LIMIT}; slender-beam results are approximate")
        })
    }

    /// Second moment of area b_w·t³/12, m⁴.
    pub fn second_moment(&self) -> f64 {
        self.width * self.thickness.powi(3) / 12.0
    }

    /// Cross-section area b_w·t, m².
    pub fn area(&self) -> f64 {
        self.width * self.thickness
    }

    /// Flexural rigidity EI, N·m².
    pub fn flexural_rigidity(&self) -> f64 {
        self.material.youngs_modulus * self.second_moment()
    }

    /// Tip deflection per unit tip force, m/N.
    pub fn compliance(&self) -> f64 {
        self.length.powi(3) / (3.0 * self.flexural_rigidity())
    }

    /// Tip slope per unit tip force, rad/N.
    pub fn slope_compliance(&self) -> f64 {
        self.length.powi(2) / (2.0 * self.flexural_rigidity())
    }

    pub fn tip_slope(&self, p: f64) -> f64 {
        p * self.slope_compliance()
    }

    pub fn tip_deflection(&self, p: f64) -> f64 {
        p * self.compliance()
    }

    /// In-plane tip motion (negative: towards the root) of the linear
    /// deflection shape with tip deflection `delta`.
    pub fn foreshortening(&self, delta: f64) -> f64 {
        -0.6 * delta * delta / self.length
    }

    /// Root bending stress per unit tip force, Pa/N.
    pub fn root_stress_per_newton(&self) -> f64 {
        self.length * 0.5 * self.thickness / self.second_moment()
    }
}

/// Tip slope of a cantilever under tip force `p`: P·L²/(2EI).
pub fn tip_slope(p: f64, beam: &BeamSpec) -> Result<f64> {
    ensure_finite("tip force", p)?;
    beam.validate()?;
    Ok(beam.tip_slope(p))
}

/// Tip deflection of a cantilever under tip force `p`: P·L³/(3EI).
pub fn tip_deflection(p: f64, beam: &BeamSpec) -> Result<f64> {
    ensure_finite("tip force", p)?;
    beam.validate()?;
    Ok(beam.tip_deflection(p))
}

/// Bending stress at the outer fibre at station `x`.
pub fn bending_stress(beam: &BeamSpec, p: f64, x: f64) -> Result<f64> {
    ensure_finite("tip force", p)?;
    ensure_finite("station", x)?;
    beam.validate()?;
    if !(0.0..=beam.length).contains(&x) {
        return Err(Error::Domain(format!("station {x} m is outside the beam [0, {}] m", beam.length)));
    }
    Ok(p * (beam.length - x) * 0.5 * beam.thickness / beam.second_moment())
}

/// Transverse loading applied to the beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadCase {
    /// Point force P at the free end.
    #[default]
    TipPoint,
    /// Distributed load q(x) = P·(L − x)/L, P being the root intensity in N/m.
    Tapered,
}

impl LoadCase {
    pub fn name(self) -> &'static str {
        match self {
            LoadCase::TipPoint => "tip_point",
            LoadCase::Tapered => "tapered",
        }
    }

    /// Distributed load intensity at `x`.
    pub fn intensity(self, p: f64, length: f64, x: f64) -> f64 {
        match self {
            LoadCase::TipPoint => 0.0,
            LoadCase::Tapered => p * (length - x) / length,
        }
    }

    /// Bending moment about station `x` from everything outboard of it.
    pub fn moment(self, p: f64, length: f64, x: f64) -> f64 {
        let arm = length - x;
        match self {
            LoadCase::TipPoint => p * arm,
            LoadCase::Tapered => p * arm.powi(3) / (6.0 * length),
        }
    }
}

/// How the beam's free end is held axially.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxialBoundary {
    /// Tip slides freely: no membrane force, pure foreshortening.
    #[default]
    Free,
    /// Tip held at u(L) = 0, so bending induces membrane tension.
    Restrained,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VonKarmanOptions {
    pub grid_points: usize,
    /// Relative change in w between iterates that counts as converged.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub axial: AxialBoundary,
    /// Under-relaxation of the membrane-force update, in (0, 1].
    pub relaxation: f64,
}

impl Default for VonKarmanOptions {
    fn default() -> Self {
        Self {
            grid_points: 201,
            tolerance: 1e-10,
            max_iterations: 100,
            axial: AxialBoundary::Free,
            relaxation: 0.5,
        }
    }
}

/// Sampled deformation of a beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamState {
    pub x: Vec<f64>,
    /// Transverse deflection, m.
    pub w: Vec<f64>,
    /// Slope w′, rad.
    pub slope: Vec<f64>,
    /// Axial displacement, m.
    pub u: Vec<f64>,
    /// Membrane force (tension positive), N.
    pub axial_force: Vec<f64>,
    /// Distributed transverse load, N/m.
    pub load: Vec<f64>,
    pub load_case: LoadCase,
    pub iterations: usize,
}

impl BeamState {
    /// State from a sampled deflection only (slope by finite differences,
    /// no axial information).
    pub fn from_profile(x: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if x.len() != w.len() || x.len() < 3 {
            return Err(Error::Validation("profile needs ≥ 3 matching x/w samples".into()));
        }
        if x.windows(2).any(|p| p[1] <= p[0]) || x.iter().chain(&w).any(|v| !v.is_finite()) {
            return Err(Error::Validation("profile grid must be finite and strictly increasing".into()));
        }
        let slope = gradient(&x, &w);
        let n = x.len();
        Ok(Self {
            x,
            w,
            slope,
            u: vec![0.0; n],
            axial_force: vec![0.0; n],
            load: vec![0.0; n],
            load_case: LoadCase::TipPoint,
            iterations: 0,
        })
    }

    pub fn tip_deflection(&self) -> f64 {
        *self.w.last().expect("non-empty state")
    }

    pub fn tip_slope(&self) -> f64 {
        *self.slope.last().expect("non-empty state")
    }

    pub fn tip_axial_displacement(&self) -> f64 {
        *self.u.last().expect("non-empty state")
    }
}

/// Second-order finite-difference derivative on a possibly non-uniform grid.
fn gradient(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        d[i] = (h0 * h0 * y[i + 1] + (h1 * h1 - h0 * h0) * y[i] - h1 * h1 * y[i - 1]) / (h0 * h1 * (h0 + h1));
    }
    let (h0, h1) = (x[1] - x[0], x[2] - x[1]);
    d[0] = -(2.0 * h0 + h1) / (h0 * (h0 + h1)) * y[0] + (h0 + h1) / (h0 * h1) * y[1] - h0 / (h1 * (h0 + h1)) * y[2];
    // Mirror the stencil for the right end: derivative w.r.t. −x, negated.
    let (h0, h1) = (x[n - 1] - x[n - 2], x[n - 2] - x[n - 3]);
    d[n - 1] = -(-(2.0 * h0 + h1) / (h0 * (h0 + h1)) * y[n - 1] + (h0 + h1) / (h0 * h1) * y[n - 2]
        - h0 / (h1 * (h0 + h1)) * y[n - 3]);
    d
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// In-plane tip displacement of an inextensible beam: u(L) = −½∫₀ᴸ (w′)² dx.
pub fn axial_shortening(state: &BeamState) -> f64 {
    let slope = gradient(&state.x, &state.w);
    let sq: Vec<f64> = slope.iter().map(|s| s * s).collect();
    -0.5 * trapezoid(&state.x, &sq)
}

/// Tip displacement from the stretching balance evaluated exactly as
/// printed, (EA·u′)′ = ½·EI·(w′)², with u(0) = 0 and u′(L) = 0.
///
/// The printed balance is not dimensionally homogeneous, so the result is
/// only meaningful as a comparison against [`axial_shortening`].
pub fn literal_stretching_shortening(state: &BeamState, beam: &BeamSpec) -> f64 {
    let sq: Vec<f64> = state.x.iter().zip(&state.slope).map(|(x, s)| x * s * s).collect();
    -0.5 * beam.second_moment() / beam.area() * trapezoid(&state.x, &sq)
}

/// Solve the Von Kármán cantilever for tip force (or root intensity) `p`.
///
/// The fourth-order bending balance is integrated twice analytically into
/// its moment form EI·w″ = M(x) + N·(w − w(L)) and discretized with central
/// differences on a uniform grid (ghost-node clamped root). For a given
/// membrane force the discrete system is affine in w(L), so each bending
/// solve is two explicit marches. With a restrained tip the membrane force
/// N = EA/(2L)·∫(w′)² is updated by relaxed fixed-point iteration.
pub fn solve_von_karman(beam: &BeamSpec, p: f64, load: LoadCase, opts: &VonKarmanOptions) -> Result<BeamState> {
    beam.validate()?;
    ensure_finite("load", p)?;
    if opts.grid_points < 101 {
        return Err(Error::Validation(format!("grid needs ≥ 101 points, got {}", opts.grid_points)));
    }
    ensure_positive("solver tolerance", opts.tolerance)?;
    if !(opts.relaxation > 0.0 && opts.relaxation <= 1.0) {
        return Err(Error::Validation(format!("relaxation must lie in (0, 1], got {}", opts.relaxation)));
    }

    let n = opts.grid_points;
    let len = beam.length;
    let h = len / (n - 1) as f64;
    let x: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let ei = beam.flexural_rigidity();
    let ea = beam.material.youngs_modulus * beam.area();
    let curvature: Vec<f64> = x.iter().map(|&xi| load.moment(p, len, xi) / ei).collect();

    let mut axial = 0.0_f64;
    let mut w_prev: Option<Vec<f64>> = None;
    let mut last_change = f64::INFINITY;
    let mut growth_streak = 0;

    for iter in 1..=opts.max_iterations {
        let (w, slope) = bend(&curvature, axial / ei, h);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                iteration: iter,
                reason: "non-finite deflection".into(),
            });
        }
        let scale = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let change = match &w_prev {
            Some(prev) => w.iter().zip(prev).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())),
            None => f64::INFINITY,
        };
        let converged = scale == 0.0 || change <= opts.tolerance * scale;

        let sq: Vec<f64> = slope.iter().map(|s| s * s).collect();
        let stretch = match opts.axial {
            AxialBoundary::Free => 0.0,
            AxialBoundary::Restrained => ea / (2.0 * len) * trapezoid(&x, &sq),
        };

        if converged {
            return Ok(assemble(x, w, slope, axial, ea, p, load, iter));
        }
        if change.is_finite() {
            growth_streak = if change > last_change { growth_streak + 1 } else { 0 };
            if growth_streak >= 5 {
                return Err(Error::Divergence {
                    iteration: iter,
                    reason: format!("iterate change grew five times in a row (last {change:e} m)"),
                });
            }
            last_change = change;
        }
        axial += opts.relaxation * (stretch - axial);
        w_prev = Some(w);
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        residual: last_change,
    })
}

/// Solve w″ = m + c·(w − w_L) with w(0) = w′(0) = 0; returns (w, w′).
fn bend(m: &[f64], c: f64, h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = m.len();
    let h2 = h * h;
    // w = a + w_L·φ with a″ = m + c·a and φ″ = c·(φ − 1).
    let march = |rhs: &dyn Fn(usize, f64) -> f64| {
        let mut y = vec![0.0; n];
        y[1] = 0.5 * h2 * rhs(0, 0.0);
        for i in 1..n - 1 {
            y[i + 1] = 2.0 * y[i] - y[i - 1] + h2 * rhs(i, y[i]);
        }
        y
    };
    let a = march(&|i, y| m[i] + c * y);
    let w = if c == 0.0 {
        a
    } else {
        let phi = march(&|_, y| c * (y - 1.0));
        let w_tip = a[n - 1] / (1.0 - phi[n - 1]);
        a.iter().zip(&phi).map(|(a, f)| a + w_tip * f).collect()
    };
    let w_tip = w[n - 1];
    let mut slope = vec![0.0; n];
    for i in 1..n {
        let f0 = m[i - 1] + c * (w[i - 1] - w_tip);
        let f1 = m[i] + c * (w[i] - w_tip);
        slope[i] = slope[i - 1] + 0.5 * h * (f0 + f1);
    }
    (w, slope)
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    x: Vec<f64>,
    w: Vec<f64>,
    slope: Vec<f64>,
    axial: f64,
    ea: f64,
    p: f64,
    load: LoadCase,
    iterations: usize,
) -> BeamState {
    let n = x.len();
    let len = x[n - 1];
    let mut u = vec![0.0; n];
    for i in 1..n {
        let dx = x[i] - x[i - 1];
        let strain = axial / ea;
        u[i] = u[i - 1] + dx * (strain - 0.25 * (slope[i - 1].powi(2) + slope[i].powi(2)));
    }
    let load_values = x.iter().map(|&xi| load.intensity(p, len, xi)).collect();
    BeamState {
        x,
        w,
        slope,
        u,
        axial_force: vec![axial; n],
        load: load_values,
        load_case: load,
        iterations,
    }
}

/// Result of a fatigue screen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FatigueAssessment {
    pub admissible: bool,
    /// Stress amplitude (σ_max − σ_min)/2, Pa.
    pub stress_amplitude: f64,
    /// Estimated cycles to failure; infinite for indefinite life. Zero when
    /// the endurance limit is exceeded and no Basquin curve is available.
    pub cycles: f64,
}

/// Fatigue screen with the default life threshold of 10⁷ cycles.
pub fn fatigue_admissible(sigma_max: f64, sigma_min: f64, material: &MaterialSpec) -> Result<FatigueAssessment> {
    fatigue_admissible_for_life(sigma_max, sigma_min, material, DEFAULT_LIFE_THRESHOLD)
}

/// Fatigue screen against a material's endurance limit, or failing that
/// its Basquin curve σ_a = σ′_f·(2N_f)^b.
pub fn fatigue_admissible_for_life(
    sigma_max: f64,
    sigma_min: f64,
    material: &MaterialSpec,
    life_threshold: f64,
) -> Result<FatigueAssessment> {
    ensure_finite("σ_max", sigma_max)?;
    ensure_finite("σ_min", sigma_min)?;
    ensure_positive("life threshold", life_threshold)?;
    if sigma_max < sigma_min {
        return Err(Error::Validation(format!("σ_max {sigma_max} < σ_min {sigma_min}")));
    }
    let basquin = material.basquin();
    if material.endurance_limit.is_none() && basquin.is_none() {
        return Err(Error::Config(format!(
            "material `{}` has neither an endurance limit nor Basquin coefficients",
            material.name
        )));
    }
    let amplitude = 0.5 * (sigma_max - sigma_min);
    if amplitude == 0.0 {
        return Ok(FatigueAssessment {
            admissible: true,
            stress_amplitude: 0.0,
            cycles: f64::INFINITY,
        });
    }
    let basquin_life = basquin.map(|(coeff, b)| 0.5 * (amplitude / coeff).powf(1.0 / b));
    Ok(match material.endurance_limit {
        Some(limit) => {
            let admissible = amplitude * material.safety_factor <= limit;
            FatigueAssessment {
                admissible,
                stress_amplitude: amplitude,
                cycles: if admissible { f64::INFINITY } else { basquin_life.unwrap_or(0.0) },
            }
        }
        None => {
            let cycles = basquin_life.expect("checked above");
            FatigueAssessment {
                admissible: cycles >= life_threshold,
                stress_amplitude: amplitude,
                cycles,
            }
        }
    })
}

/// Largest fully reversed stress amplitude the material admits.
pub fn fatigue_stress_limit(material: &MaterialSpec, life_threshold: f64) -> Result<f64> {
    match (material.endurance_limit, material.basquin()) {
        (Some(limit), _) => Ok(limit / material.safety_factor),
        (None, Some((coeff, b))) => Ok(coeff * (2.0 * life_threshold).powf(b)),
        (None, None) => Err(Error::Config(format!(
            "material `{}` has neither an endurance limit nor Basquin coefficients",
            material.name
        ))),
    }
}
