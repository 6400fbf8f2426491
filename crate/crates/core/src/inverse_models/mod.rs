//! Inverse force models: synthetic datasets with hysteresis and noise, the
//! Gaussian RBF ideal model, the stacked GRU with uncertainty output, and
//! evaluation metrics.

mod dataset;
mod eval;
mod grbf;
mod gru;
mod hysteresis;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dataset::{
    read_dataset_csv, synthesize_calibration, synthesize_dataset, write_dataset_csv, Dataset, DatasetMeta, Effects,
    FieldEpisode, LoadProfile, RandomEpisodes, Sample, Split, DATASET_COLUMNS,
};
pub use eval::{
    error_histogram, evaluate, write_histogram_csv, write_metrics_csv, AxisMetrics, EvalMetrics, Evaluation,
    HistogramBin, InverseModel, METRICS_COLUMNS,
};
pub use grbf::{GrbfConfig, GrbfModel};
pub use gru::{gru_train, ForceEstimate, GruConfig, GruModel, GruState, InputAxes};
pub use hysteresis::{hysteresis_apply, HysteresisConfig};

/// Version tag written into every model file.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Per-channel affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(width: usize) -> Self {
        Self {
            mean: vec![0.0; width],
            scale: vec![1.0; width],
        }
    }

    /// Fit to rows of `width` values. A constant channel gets scale 1 when
    /// `allow_constant`, otherwise it is a validation error.
    pub fn fit<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, width: usize, allow_constant: bool) -> Result<Self> {
        let mut n = 0usize;
        let mut mean = vec![0.0; width];
        for r in rows.clone() {
            if r.len() != width {
                return Err(Error::Validation(format!("row width {} differs from {width}", r.len())));
            }
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::Validation("cannot normalize an empty set".into()));
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; width];
        for r in rows {
            for k in 0..width {
                var[k] += (r[k] - mean[k]).powi(2);
            }
        }
        let mut scale = Vec::with_capacity(width);
        for (k, v) in var.into_iter().enumerate() {
            let sd = (v / n as f64).sqrt();
            if sd > 1e-12 * mean[k].abs().max(1.0) {
                scale.push(sd);
            } else if allow_constant {
                scale.push(1.0);
            } else {
                return Err(Error::Validation(format!(
                    "channel {k} has zero variance (constant {}); disable target normalization to train on it",
                    mean[k]
                )));
            }
        }
        Ok(Self { mean, scale })
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        if self.mean.len() != width || self.scale.len() != width {
            return Err(Error::Validation(format!("normalization has wrong width (expected {width})")));
        }
        if self.mean.iter().any(|m| !m.is_finite()) || self.scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Validation("normalization constants must be finite with positive scale".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn apply_one(&self, k: usize, v: f64) -> f64 {
        (v - self.mean[k]) / self.scale[k]
    }

    #[inline]
    pub fn invert_one(&self, k: usize, v: f64) -> f64 {
        v * self.scale[k] + self.mean[k]
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(k, &v)| self.apply_one(k, v)).collect()
    }

    pub(crate) fn apply3(&self, row: &[f64; 3]) -> [f64; 3] {
        std::array::from_fn(|k| self.apply_one(k, row[k]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizer_whitens() {
        let rows = [[1.0, 10.0], [3.0, 10.0], [5.0, 10.0]];
        let s = Standardizer::fit(rows.iter().map(|r| r.as_slice()), 2, true).unwrap();
        assert_eq!(s.mean, vec![3.0, 10.0]);
        assert_eq!(s.scale[1], 1.0);
        assert!((s.apply_one(0, 5.0) - (1.5f64).sqrt()).abs() < 1e-12);
        assert!((s.invert_one(0, s.apply_one(0, 4.2)) - 4.2).abs() < 1e-12);
        assert!(Standardizer::fit(rows.iter().map(|r| r.as_slice()), 2, false).is_err());
    }
}
