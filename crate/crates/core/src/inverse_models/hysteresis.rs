use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Bouc–Wen hysteresis acting on a displacement signal.
///
/// The hysteretic state follows
/// `dz = dx − β·|dx|·|z|^(n−1)·z − γ·dx·|z|^n` and the output blends it
/// with the input, `y = x + α·(z − x)`. With α = 0 the output is the input.
/// β and γ carry units of m⁻ⁿ; for n = 1 the state saturates at
/// 1/(β + γ) under monotonic loading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HysteresisConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub n: f64,
}

impl Default for HysteresisConfig {
    /// Loops about ±15 µm wide on sub-millimetre deflections.
    fn default() -> Self {
        Self {
            alpha: 0.15,
            beta: 1.5e4,
            gamma: 0.5e4,
            n: 1.0,
        }
    }
}

impl HysteresisConfig {
    pub fn zero() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            n: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma), ("n", self.n)] {
            ensure_finite(name, v)?;
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Validation(format!("hysteresis alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if self.n < 1.0 {
            return Err(Error::Validation(format!("hysteresis exponent n must be ≥ 1, got {}", self.n)));
        }
        if self.alpha > 0.0 && !(self.beta > 0.0 && self.gamma > -self.beta && self.gamma <= self.beta) {
            return Err(Error::Validation(format!(
                "unstable hysteresis parameters: need β > 0 and −β < γ ≤ β (β = {}, γ = {})",
                self.beta, self.gamma
            )));
        }
        Ok(())
    }
}

/// Apply Bouc–Wen hysteresis to a uniformly sampled displacement series.
/// The state starts at z = x₀ (no initial hysteretic offset).
pub fn hysteresis_apply(signal: &[f64], cfg: &HysteresisConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("hysteresis input must be finite".into()));
    }
    if cfg.alpha == 0.0 || signal.is_empty() {
        return Ok(signal.to_vec());
    }
    let mut out = Vec::with_capacity(signal.len());
    let mut z = signal[0];
    out.push(signal[0]);
    let stiffness = cfg.beta + cfg.gamma.abs();
    for (k, pair) in signal.windows(2).enumerate() {
        let dx = pair[1] - pair[0];
        // Sub-step so that a single explicit update never overshoots.
        let scale = stiffness * z.abs().max(dx.abs()).powf(cfg.n - 1.0) * dx.abs();
        let sub = (10.0 * scale).ceil().clamp(1.0, 1.0e4) as usize;
        let h = dx / sub as f64;
        for _ in 0..sub {
            let za = z.abs();
            z += h - cfg.beta * h.abs() * za.powf(cfg.n - 1.0) * z - cfg.gamma * h * za.powf(cfg.n);
        }
        if !z.is_finite() || z.abs() > 1e6 * (1.0 + pair[1].abs()) {
            return Err(Error::Validation(format!(
                "hysteresis state diverged at sample {} (z = {z:e})",
                k + 1
            )));
        }
        out.push(pair[1] + cfg.alpha * (z - pair[1]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(amplitude: f64, cycles: usize) -> Vec<f64> {
        (0..cycles * 1000)
            .map(|i| amplitude * (2.0 * PI * i as f64 / 1000.0).sin())
            .collect()
    }

    #[test]
    fn zero_config_is_identity() {
        let x = sine(1e-4, 2);
        assert_eq!(hysteresis_apply(&x, &HysteresisConfig::zero()).unwrap(), x);
    }

    #[test]
    fn periodic_input_traces_a_loop() {
        let x = sine(2e-4, 3);
        let y = hysteresis_apply(&x, &HysteresisConfig::default()).unwrap();
        // Shoelace area of the last cycle in the (x, y) plane.
        let last = 2000..3000;
        let area: f64 = last
            .clone()
            .zip(last.skip(1))
            .map(|(i, j)| x[i] * y[j] - x[j] * y[i])
            .sum::<f64>()
            .abs()
            * 0.5;
        assert!(area > 1e-10, "loop area {area:e}");
    }

    #[test]
    fn response_is_not_amplitude_linear() {
        let cfg = HysteresisConfig::default();
        let small = hysteresis_apply(&sine(5e-5, 2), &cfg).unwrap();
        let large = hysteresis_apply(&sine(5e-4, 2), &cfg).unwrap();
        let worst = small
            .iter()
            .zip(&large)
            .map(|(s, l)| (10.0 * s - l).abs())
            .fold(0.0, f64::max);
        assert!(worst > 1e-6, "max deviation from linear scaling {worst:e}");
    }

    #[test]
    fn unstable_parameters_are_rejected() {
        let bad = HysteresisConfig {
            gamma: -2.0e4,
            ..Default::default()
        };
        assert!(hysteresis_apply(&[0.0, 1e-4], &bad).is_err());
        let negative_beta = HysteresisConfig {
            beta: -1.0,
            ..Default::default()
        };
        assert!(negative_beta.validate().is_err());
        assert!(hysteresis_apply(&[0.0, f64::NAN], &HysteresisConfig::default()).is_err());
    }
}
