//! Validation oracle: exterior fields by brute-force adaptive quadrature.
//!
//! Cylinders and tubes integrate the Biot–Savart law over their equivalent
//! azimuthal surface currents; cubes and spheres integrate Coulomb's law
//! over their equivalent surface charges. None of this shares code with the
//! closed forms in [`super::analytic`].

use std::f64::consts::PI;

use nalgebra::Vector3;

use super::quadrature::{integrate, QuadratureOptions};
use super::{MagnetShape, MagnetSpec, SURFACE_CLEARANCE};
use crate::error::{Error, Result};

/// Target accuracy relative to a dipole estimate of the field magnitude.
const RELATIVE_TARGET: f64 = 1e-11;
const MAX_DEPTH: u32 = 40;

/// Field of `magnet` (identity pose) at `point` by numerical quadrature.
pub fn field_oracle(magnet: &MagnetSpec, point: &Vector3<f64>) -> Result<super::FieldVector> {
    magnet.validate()?;
    if !point.iter().all(|v| v.is_finite()) {
        return Err(Error::Validation("oracle point must be finite".into()));
    }
    if magnet.contains_local(point) {
        return Err(Error::Domain(format!(
            "oracle point {:?} is inside or within {SURFACE_CLEARANCE:e} m of the magnet",
            point.as_slice()
        )));
    }
    let br = magnet.effective_remanence();
    // Dimensionless far-field magnitude of the surface integrals sets the
    // absolute tolerance scale. Near the body the field only gets larger.
    let r = point.norm().max(magnet.diameter);
    let scale = magnet.volume() / r.powi(3);
    let r_out = 0.5 * magnet.diameter;
    let hz = magnet.half_height();

    let v = match magnet.shape {
        MagnetShape::Cylinder => current_sheet(r_out, hz, point, scale)?,
        MagnetShape::Tube => {
            let outer = current_sheet(r_out, hz, point, scale)?;
            let inner = current_sheet(0.5 * magnet.inner_diameter, hz, point, scale)?;
            outer - inner
        }
        MagnetShape::Cube => {
            let top = charge_square(r_out, hz, point, scale)?;
            let bottom = charge_square(r_out, -hz, point, scale)?;
            top - bottom
        }
        MagnetShape::Sphere => charge_sphere(r_out, point, scale)?,
    };
    Ok((v * (br / (4.0 * PI))).into())
}

fn opts(abs_tol: f64) -> QuadratureOptions {
    QuadratureOptions {
        abs_tol,
        max_depth: MAX_DEPTH,
    }
}

/// ∫∫ φ̂' × (r − r') / |r − r'|³ dA' over the lateral surface of radius `a`.
fn current_sheet(a: f64, hz: f64, p: &Vector3<f64>, scale: f64) -> Result<Vector3<f64>> {
    let tol = RELATIVE_TARGET * scale;
    let outer = integrate(
        |zp| {
            integrate(
                |phi| {
                    let (s, c) = phi.sin_cos();
                    let d = Vector3::new(p.x - a * c, p.y - a * s, p.z - zp);
                    let inv = d.norm().powi(-3);
                    Ok([c * d.z * inv * a, s * d.z * inv * a, -(s * d.y + c * d.x) * inv * a])
                },
                0.0,
                2.0 * PI,
                opts(0.01 * tol / hz),
            )
        },
        -hz,
        hz,
        opts(tol),
    )?;
    Ok(Vector3::from(outer))
}

/// ∫∫ (r − r') / |r − r'|³ dA' over the square `[-h, h]²` at height `z0`.
fn charge_square(h: f64, z0: f64, p: &Vector3<f64>, scale: f64) -> Result<Vector3<f64>> {
    let tol = RELATIVE_TARGET * scale;
    let outer = integrate(
        |yp| {
            integrate(
                |xp| {
                    let d = Vector3::new(p.x - xp, p.y - yp, p.z - z0);
                    let inv = d.norm().powi(-3);
                    Ok([d.x * inv, d.y * inv, d.z * inv])
                },
                -h,
                h,
                opts(0.01 * tol / h),
            )
        },
        -h,
        h,
        opts(tol),
    )?;
    Ok(Vector3::from(outer))
}

/// ∫∫ cosθ' (r − r') / |r − r'|³ dA' over the sphere of radius `a`.
fn charge_sphere(a: f64, p: &Vector3<f64>, scale: f64) -> Result<Vector3<f64>> {
    let tol = RELATIVE_TARGET * scale;
    let outer = integrate(
        |theta| {
            let (st, ct) = theta.sin_cos();
            integrate(
                |phi| {
                    let (sp, cp) = phi.sin_cos();
                    let d = Vector3::new(p.x - a * st * cp, p.y - a * st * sp, p.z - a * ct);
                    let w = ct * a * a * st * d.norm().powi(-3);
                    Ok([d.x * w, d.y * w, d.z * w])
                },
                0.0,
                2.0 * PI,
                opts(0.01 * tol),
            )
        },
        0.0,
        PI,
        opts(tol),
    )?;
    Ok(Vector3::from(outer))
}
