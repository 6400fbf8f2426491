//! Error metrics of inverse models against dataset ground truth.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Split};
use super::grbf::GrbfModel;
use super::gru::{ForceEstimate, GruModel};
use crate::error::{Error, Result};

/// Either inverse model, as stored in a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InverseModel {
    Grbf(GrbfModel),
    Gru(GruModel),
}

impl InverseModel {
    pub fn label(&self) -> String {
        match self {
            InverseModel::Grbf(_) => "ideal-grbf".into(),
            InverseModel::Gru(m) => format!("gru-{}axis", m.input_axes.width()),
        }
    }

    pub fn training_source(&self) -> &str {
        match self {
            InverseModel::Grbf(m) => &m.training_source,
            InverseModel::Gru(m) => &m.training_source,
        }
    }

    pub fn training_split(&self) -> Split {
        match self {
            InverseModel::Grbf(m) => m.training_split,
            InverseModel::Gru(_) => Split::Train,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InverseModel::Grbf(m) => m.validate(),
            InverseModel::Gru(m) => m.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisMetrics {
    /// N.
    pub rmse: f64,
    /// Mean of estimate − truth, N.
    pub mean_error: f64,
    /// Population variance of the error, N².
    pub error_variance: f64,
}

impl AxisMetrics {
    pub fn from_errors(errors: &[f64]) -> Self {
        let n = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / n;
        let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
        let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
        Self {
            rmse,
            mean_error: mean,
            error_variance: var,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub model: String,
    pub dataset_id: String,
    pub split: Split,
    /// Scored (non-saturated) samples.
    pub samples: usize,
    pub fx: AxisMetrics,
    pub fz: AxisMetrics,
    /// Wall-clock inference time per sample, µs. Not reproducible.
    pub inference_us_per_sample: f64,
}

/// Metrics together with the per-sample estimates they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub metrics: EvalMetrics,
    /// Dataset sample index of every estimate.
    pub indices: Vec<usize>,
    pub estimates: Vec<[f64; 2]>,
    /// Predicted standard deviations (GRU only).
    pub sigma: Option<Vec<[f64; 2]>>,
    /// Per-estimate error (estimate − truth) for scored samples, N.
    pub errors: Vec<[f64; 2]>,
}

/// Evaluate `model` on one split of `dataset`. Recurrent models run each
/// contiguous segment of the split from a zero state. Saturated samples are
/// predicted but not scored.
pub fn evaluate(model: &InverseModel, dataset: &Dataset, split: Split) -> Result<Evaluation> {
    model.validate()?;
    if model.training_source() == dataset.meta.id && model.training_split() == split {
        return Err(Error::Validation(format!(
            "refusing to evaluate {} on the {} split of dataset {} it was trained on",
            model.label(),
            split.name(),
            dataset.meta.id
        )));
    }
    let segments = dataset.segments(split);
    let indices: Vec<usize> = segments.iter().cloned().flatten().collect();
    if indices.is_empty() {
        return Err(Error::Validation(format!(
            "dataset {} has no {} samples to evaluate",
            dataset.meta.id,
            split.name()
        )));
    }
    let start = Instant::now();
    let (estimates, sigma) = match model {
        InverseModel::Grbf(m) => (
            indices.iter().map(|&i| m.predict(&dataset.samples[i].reading)).collect::<Vec<_>>(),
            None,
        ),
        InverseModel::Gru(m) => {
            let mut all: Vec<ForceEstimate> = Vec::with_capacity(indices.len());
            for seg in &segments {
                let readings: Vec<[f64; 3]> = dataset.samples[seg.clone()].iter().map(|s| s.reading).collect();
                all.extend(m.forward_readings(&readings, None)?.0);
            }
            (
                all.iter().map(|e| e.mean).collect(),
                Some(all.iter().map(|e| e.sigma).collect::<Vec<_>>()),
            )
        }
    };
    let elapsed = start.elapsed();
    let errors: Vec<[f64; 2]> = indices
        .iter()
        .zip(&estimates)
        .filter(|(&i, _)| !dataset.samples[i].saturated)
        .map(|(&i, e)| {
            let f = dataset.samples[i].force;
            [e[0] - f[0], e[1] - f[1]]
        })
        .collect();
    if errors.is_empty() {
        return Err(Error::Validation("every evaluated sample is saturated".into()));
    }
    let column = |k: usize| errors.iter().map(|e| e[k]).collect::<Vec<f64>>();
    let metrics = EvalMetrics {
        model: model.label(),
        dataset_id: dataset.meta.id.clone(),
        split,
        samples: errors.len(),
        fx: AxisMetrics::from_errors(&column(0)),
        fz: AxisMetrics::from_errors(&column(1)),
        inference_us_per_sample: elapsed.as_secs_f64() * 1e6 / indices.len() as f64,
    };
    Ok(Evaluation {
        metrics,
        indices,
        estimates,
        sigma,
        errors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// Count / (total × width): integrates to one.
    pub density: f64,
}

/// Histogram of `errors` over a symmetric range covering all values.
pub fn error_histogram(errors: &[f64], bins: usize) -> Result<Vec<HistogramBin>> {
    if errors.is_empty() || bins == 0 {
        return Err(Error::Validation("histogram needs errors and at least one bin".into()));
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::Validation("histogram errors must be finite".into()));
    }
    let half = errors.iter().fold(0.0_f64, |m, e| m.max(e.abs())).max(1e-12);
    let width = 2.0 * half / bins as f64;
    let mut counts = vec![0usize; bins];
    for e in errors {
        let k = (((e + half) / width).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    let total = errors.len() as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            lower: -half + k as f64 * width,
            upper: -half + (k + 1) as f64 * width,
            count,
            density: count as f64 / (total * width),
        })
        .collect())
}

pub const METRICS_COLUMNS: [&str; 10] = [
    "model",
    "dataset_id",
    "split",
    "samples",
    "fx_rmse_n",
    "fx_mean_error_n",
    "fx_error_variance_n2",
    "fz_rmse_n",
    "fz_mean_error_n",
    "fz_error_variance_n2",
];

fn io_err(e: std::io::Error) -> Error {
    Error::Numeric(format!("writing CSV: {e}"))
}

/// One row per model. Inference time is left out so the file is
/// reproducible.
pub fn write_metrics_csv<W: Write>(metrics: &[EvalMetrics], mut out: W) -> Result<()> {
    writeln!(out, "{}", METRICS_COLUMNS.join(",")).map_err(io_err)?;
    for m in metrics {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            m.model,
            m.dataset_id,
            m.split.name(),
            m.samples,
            m.fx.rmse,
            m.fx.mean_error,
            m.fx.error_variance,
            m.fz.rmse,
            m.fz.mean_error,
            m.fz.error_variance
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// Rows of (model, axis, bin) for every evaluation.
pub fn write_histogram_csv<W: Write>(evaluations: &[&Evaluation], bins: usize, mut out: W) -> Result<()> {
    writeln!(out, "model,axis,lower_n,upper_n,count,density").map_err(io_err)?;
    for ev in evaluations {
        for (k, axis) in ["fx", "fz"].iter().enumerate() {
            let errs: Vec<f64> = ev.errors.iter().map(|e| e[k]).collect();
            for b in error_histogram(&errs, bins)? {
                writeln!(
                    out,
                    "{},{axis},{},{},{},{}",
                    ev.metrics.model, b.lower, b.upper, b.count, b.density
                )
                .map_err(io_err)?;
            }
        }
    }
    Ok(())
}
