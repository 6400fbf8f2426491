//! Closed-form exterior fields in the magnet's own frame.
//!
//! Every shape is uniformly magnetized along its local +z axis with
//! polarization `br` (tesla, i.e. μ₀M). Inputs and outputs are SI.

use std::f64::consts::PI;

use nalgebra::Vector3;

use super::elliptic::cel;

/// Solid cylinder of radius `radius` and half-length `half_length`,
/// centred at the origin.
///
/// Uses the generalized-elliptic-integral form of the axially magnetized
/// cylinder (equivalently an ideal finite solenoid).
pub fn cylinder(radius: f64, half_length: f64, br: f64, p: &Vector3<f64>) -> Vector3<f64> {
    let rho = p.x.hypot(p.y);
    let (b_rho, b_z) = cylinder_rz(radius, half_length, br, rho, p.z);
    if rho > 0.0 {
        Vector3::new(b_rho * p.x / rho, b_rho * p.y / rho, b_z)
    } else {
        Vector3::new(0.0, 0.0, b_z)
    }
}

/// Radial and axial components of the cylinder field at `(rho, z)`.
pub(crate) fn cylinder_rz(a: f64, b: f64, br: f64, rho: f64, z: f64) -> (f64, f64) {
    let z_plus = z + b;
    let z_minus = z - b;
    let sum_sq = (rho + a) * (rho + a);
    let diff_sq = (a - rho) * (a - rho);

    let inv_plus = 1.0 / (z_plus * z_plus + sum_sq).sqrt();
    let inv_minus = 1.0 / (z_minus * z_minus + sum_sq).sqrt();
    let alpha_plus = a * inv_plus;
    let alpha_minus = a * inv_minus;
    let beta_plus = z_plus * inv_plus;
    let beta_minus = z_minus * inv_minus;
    let gamma = (a - rho) / (a + rho);
    let kc_plus = ((z_plus * z_plus + diff_sq) / (z_plus * z_plus + sum_sq)).sqrt();
    let kc_minus = ((z_minus * z_minus + diff_sq) / (z_minus * z_minus + sum_sq)).sqrt();

    let b0 = br / PI;
    let b_rho = b0
        * (alpha_plus * cel(kc_plus, 1.0, 1.0, -1.0) - alpha_minus * cel(kc_minus, 1.0, 1.0, -1.0));
    let g2 = gamma * gamma;
    let b_z = b0 * a / (a + rho)
        * (beta_plus * cel(kc_plus, g2, 1.0, gamma) - beta_minus * cel(kc_minus, g2, 1.0, gamma));
    (b_rho, b_z)
}

/// Rectangular prism with half-widths `hx`, `hy` and half-height `hz`.
///
/// Surface-charge solution: the top face carries +M, the bottom face -M,
/// and each face integrates in closed form to logarithms and an arctangent.
pub fn cuboid(hx: f64, hy: f64, hz: f64, br: f64, p: &Vector3<f64>) -> Vector3<f64> {
    let top = charged_rectangle(hx, hy, p.x, p.y, p.z - hz);
    let bottom = charged_rectangle(hx, hy, p.x, p.y, p.z + hz);
    (top - bottom) * (br / (4.0 * PI))
}

/// ∫∫ (X, Y, Z)/R³ over a rectangle `[-hx, hx] × [-hy, hy]` in the plane
/// at height offset `dz` below the field point.
fn charged_rectangle(hx: f64, hy: f64, x: f64, y: f64, dz: f64) -> Vector3<f64> {
    let xs = [x + hx, x - hx];
    let ys = [y + hy, y - hy];
    let mut out = Vector3::zeros();
    for (i, &xx) in xs.iter().enumerate() {
        for (j, &yy) in ys.iter().enumerate() {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            let r = (xx * xx + yy * yy + dz * dz).sqrt();
            out.x -= sign * log_shifted(yy, xx * xx + dz * dz, r);
            out.y -= sign * log_shifted(xx, yy * yy + dz * dz, r);
            if dz != 0.0 {
                out.z += sign * (xx * yy / (dz * r)).atan();
            }
        }
    }
    out
}

/// `ln(s + r)` with `r = sqrt(s² + rest)`, without cancellation for s < 0.
#[inline]
fn log_shifted(s: f64, rest: f64, r: f64) -> f64 {
    if s >= 0.0 {
        (s + r).ln()
    } else {
        (rest / (r - s)).ln()
    }
}

/// Uniformly magnetized sphere: exactly a point dipole outside the body.
pub fn sphere(radius: f64, br: f64, p: &Vector3<f64>) -> Vector3<f64> {
    let volume = 4.0 / 3.0 * PI * radius.powi(3);
    dipole(br * volume, p)
}

/// Field of a point dipole along +z whose moment times μ₀ is `br_volume`
/// (tesla·m³).
pub fn dipole(br_volume: f64, p: &Vector3<f64>) -> Vector3<f64> {
    let r2 = p.norm_squared();
    let r = r2.sqrt();
    let r_hat = p / r;
    let m_hat = Vector3::z();
    let k = br_volume / (4.0 * PI * r2 * r);
    (r_hat * (3.0 * r_hat.dot(&m_hat)) - m_hat) * k
}
