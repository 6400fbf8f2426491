//! Bulirsch's generalized complete elliptic integral.
//!
//! `cel(kc, p, a, b) = ∫₀^{π/2} (a cos²φ + b sin²φ) /
//!     ((cos²φ + p sin²φ) √(cos²φ + kc² sin²φ)) dφ`
//!
//! Every complete elliptic integral (K, E, Π) is a special case, which makes
//! it the natural building block for the axially magnetized cylinder field.

use std::f64::consts::FRAC_PI_2;

const TOLERANCE: f64 = 1.0e-15;
const MAX_ITERATIONS: usize = 64;

/// Generalized complete elliptic integral, Bulirsch's algorithm.
///
/// `kc` is the complementary modulus and must be non-zero.
pub fn cel(kc: f64, p: f64, a: f64, b: f64) -> f64 {
    debug_assert!(kc != 0.0, "cel is singular for kc = 0");
    let mut k = kc.abs();
    let mut pp = p;
    let mut cc = a;
    let mut em = 1.0;

    let mut ss = if p > 0.0 {
        pp = p.sqrt();
        b / pp
    } else {
        let mut f = kc * kc;
        let mut q = 1.0 - f;
        let g = 1.0 - pp;
        f -= pp;
        q *= b - a * pp;
        pp = (f / g).sqrt();
        cc = (a - b) / g;
        -q / (g * g * pp) + cc * pp
    };

    let mut f = cc;
    cc += ss / pp;
    let mut g = k / pp;
    ss = 2.0 * (ss + f * g);
    pp += g;
    g = em;
    em += k;
    let mut kk = k;

    for _ in 0..MAX_ITERATIONS {
        if (g - k).abs() <= g * TOLERANCE {
            break;
        }
        k = 2.0 * kk.sqrt();
        kk = k * em;
        f = cc;
        cc += ss / pp;
        g = kk / pp;
        ss = 2.0 * (ss + f * g);
        pp += g;
        g = em;
        em += k;
    }

    FRAC_PI_2 * (ss + cc * em) / (em * (em + pp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Plain midpoint quadrature of the defining integral.
    fn cel_quadrature(kc: f64, p: f64, a: f64, b: f64) -> f64 {
        let n = 200_000;
        let h = FRAC_PI_2 / n as f64;
        (0..n)
            .map(|i| {
                let phi = (i as f64 + 0.5) * h;
                let (s, c) = phi.sin_cos();
                let (c2, s2) = (c * c, s * s);
                (a * c2 + b * s2) / ((c2 + p * s2) * (c2 + kc * kc * s2).sqrt())
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn unit_modulus_is_quarter_circle() {
        assert!((cel(1.0, 1.0, 1.0, 1.0) - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn complete_first_kind_at_half() {
        // K(m = 0.5) = 1.854074677301372
        let kc = 0.5f64.sqrt();
        assert!((cel(kc, 1.0, 1.0, 1.0) - 1.854_074_677_301_372).abs() < 1e-14);
    }

    #[test]
    fn matches_quadrature_for_mixed_arguments() {
        for &(kc, p, a, b) in &[
            (0.3, 0.49, 1.0, 0.7),
            (0.9, 1.0, 1.0, -1.0),
            (0.05, 0.2, 1.0, 0.447),
            (0.6, 0.0, 1.0, 0.0),
            (0.4, 4.0, 1.0, -2.0),
        ] {
            let exact = cel(kc, p, a, b);
            let quad = cel_quadrature(kc, p, a, b);
            assert!(
                (exact - quad).abs() < 1e-9 * quad.abs().max(1.0),
                "cel({kc},{p},{a},{b}) = {exact} vs {quad}"
            );
        }
    }

    #[test]
    fn complete_second_kind_at_half() {
        // E(m = 0.5) = 1.350643881047675 via cel(kc, 1, 1, kc²)
        let kc = 0.5f64.sqrt();
        assert!((cel(kc, 1.0, 1.0, 0.5) - 1.350_643_881_047_675).abs() < 1e-14);
        assert!(cel(1.0, 1.0, 1.0, 1.0) - PI / 2.0 < 1e-15);
    }
}
