//! Gaussian radial basis function regression from field readings to force.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Split};
use super::{Standardizer, MODEL_FORMAT_VERSION};
use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrbfConfig {
    /// Upper bound on the number of centres; fewer are used when the
    /// training set is smaller.
    pub centers: usize,
    /// Ridge penalty on the output weights.
    pub ridge: f64,
    /// Kernel width in standardized input units. `None` uses the median
    /// pairwise distance between centres.
    pub width: Option<f64>,
}

impl Default for GrbfConfig {
    fn default() -> Self {
        Self {
            centers: 256,
            ridge: 1e-8,
            width: None,
        }
    }
}

/// Fitted model: `F = W·[φ(‖x − cᵢ‖); 1]` in standardized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrbfModel {
    pub format_version: u32,
    pub input: Standardizer,
    pub output: Standardizer,
    /// Standardized centres, one row of 3 per centre.
    pub centers: Vec<[f64; 3]>,
    pub width: f64,
    /// Output weights, `(centres + 1) × 2`, row-major, bias last.
    pub weights: Vec<[f64; 2]>,
    pub ridge: f64,
    /// Dataset id the model was fitted on.
    pub training_source: String,
    /// Split of that dataset used for fitting.
    pub training_split: Split,
}

/// Indices of `k` points chosen by farthest-point sampling, starting from
/// the point closest to the centroid.
fn farthest_points(points: &[[f64; 3]], k: usize) -> Vec<usize> {
    let dist2 = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>();
    let n = points.len() as f64;
    let centroid: [f64; 3] = std::array::from_fn(|i| points.iter().map(|p| p[i]).sum::<f64>() / n);
    let first = (0..points.len())
        .min_by(|&a, &b| dist2(&points[a], &centroid).total_cmp(&dist2(&points[b], &centroid)))
        .unwrap_or(0);
    let mut chosen = vec![first];
    let mut nearest: Vec<f64> = points.iter().map(|p| dist2(p, &points[first])).collect();
    while chosen.len() < k {
        let (next, d) = nearest
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, &d)| if d > best.1 { (i, d) } else { best });
        if d <= 0.0 {
            break;
        }
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(dist2(p, &points[next]));
        }
    }
    chosen
}

fn median_pairwise_distance(points: &[[f64; 3]]) -> f64 {
    let mut d = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d.push((0..3).map(|k| (points[i][k] - points[j][k]).powi(2)).sum::<f64>().sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

impl GrbfModel {
    fn design_row(&self, x: &[f64; 3], row: &mut [f64]) {
        let inv = 1.0 / (2.0 * self.width * self.width);
        for (slot, c) in row.iter_mut().zip(&self.centers) {
            let r2 = (0..3).map(|k| (x[k] - c[k]).powi(2)).sum::<f64>();
            *slot = (-r2 * inv).exp();
        }
        row[self.centers.len()] = 1.0;
    }

    /// Fit to readings (gauss) and forces (N).
    pub fn fit(readings: &[[f64; 3]], forces: &[[f64; 2]], cfg: &GrbfConfig, training_source: &str) -> Result<Self> {
        if readings.len() != forces.len() {
            return Err(Error::Validation(format!(
                "{} readings but {} force targets",
                readings.len(),
                forces.len()
            )));
        }
        if readings.is_empty() || cfg.centers == 0 {
            return Err(Error::Validation("GRBF fit needs at least one sample and one centre".into()));
        }
        ensure_finite("ridge", cfg.ridge)?;
        if cfg.ridge < 0.0 {
            return Err(Error::Validation("ridge must be ≥ 0".into()));
        }
        if readings.iter().flatten().chain(forces.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Validation("GRBF training data must be finite".into()));
        }
        let input = Standardizer::fit(readings.iter().map(|r| r.as_slice()), 3, true)?;
        let output = Standardizer::fit(forces.iter().map(|f| f.as_slice()), 2, true)?;
        let xs: Vec<[f64; 3]> = readings.iter().map(|r| input.apply3(r)).collect();
        let picked = farthest_points(&xs, cfg.centers.min(xs.len()));
        let centers: Vec<[f64; 3]> = picked.iter().map(|&i| xs[i]).collect();
        let width = match cfg.width {
            Some(w) => {
                crate::error::ensure_positive("GRBF width", w)?;
                w
            }
            None => median_pairwise_distance(&centers).max(1e-6),
        };
        let mut model = GrbfModel {
            format_version: MODEL_FORMAT_VERSION,
            input,
            output,
            centers,
            width,
            weights: Vec::new(),
            ridge: cfg.ridge,
            training_source: training_source.to_string(),
            training_split: Split::Calibration,
        };
        let cols = model.centers.len() + 1;
        let mut phi = DMatrix::zeros(xs.len(), cols);
        let mut row = vec![0.0; cols];
        for (i, x) in xs.iter().enumerate() {
            model.design_row(x, &mut row);
            for (j, v) in row.iter().enumerate() {
                phi[(i, j)] = *v;
            }
        }
        let y = DMatrix::from_fn(forces.len(), 2, |i, j| model.output.apply_one(j, forces[i][j]));
        let svd = phi.svd(true, true);
        let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
        let s = &svd.singular_values;
        let smax = s.max();
        let rank_tol = smax * (xs.len().max(cols) as f64) * f64::EPSILON;
        if cfg.ridge == 0.0 && s.iter().any(|&si| si <= rank_tol) {
            return Err(Error::Numeric(
                "GRBF design matrix is singular and no ridge penalty is set".into(),
            ));
        }
        let filter = DVector::from_iterator(
            s.len(),
            s.iter().map(|&si| if si <= 0.0 { 0.0 } else { si / (si * si + cfg.ridge) }),
        );
        let uty = u.transpose() * y;
        let scaled = DMatrix::from_fn(uty.nrows(), 2, |i, j| uty[(i, j)] * filter[i]);
        let w = v_t.transpose() * scaled;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("GRBF solve produced non-finite weights".into()));
        }
        model.weights = (0..cols).map(|i| [w[(i, 0)], w[(i, 1)]]).collect();
        Ok(model)
    }

    /// Fit to the non-saturated samples of one split of a dataset.
    pub fn fit_dataset(dataset: &Dataset, split: Split, cfg: &GrbfConfig) -> Result<Self> {
        let used: Vec<_> = dataset.samples.iter().filter(|s| s.split == split && !s.saturated).collect();
        if used.is_empty() {
            return Err(Error::Validation(format!(
                "dataset {} has no unsaturated {} samples",
                dataset.meta.id,
                split.name()
            )));
        }
        let readings: Vec<[f64; 3]> = used.iter().map(|s| s.reading).collect();
        let forces: Vec<[f64; 2]> = used.iter().map(|s| s.force).collect();
        let mut model = Self::fit(&readings, &forces, cfg, &dataset.meta.id)?;
        model.training_split = split;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.weights.len() != self.centers.len() + 1 || self.centers.is_empty() {
            return Err(Error::Validation("GRBF weights do not match the centre count".into()));
        }
        self.input.validate(3)?;
        self.output.validate(2)?;
        ensure_finite("GRBF width", self.width)
    }

    /// Force estimate (N) for one reading (gauss).
    pub fn predict(&self, reading: &[f64; 3]) -> [f64; 2] {
        let x = self.input.apply3(reading);
        let inv = 1.0 / (2.0 * self.width * self.width);
        let mut acc = self.weights[self.centers.len()];
        for (c, w) in self.centers.iter().zip(&self.weights) {
            let r2 = (0..3).map(|k| (x[k] - c[k]).powi(2)).sum::<f64>();
            let phi = (-r2 * inv).exp();
            acc[0] += w[0] * phi;
            acc[1] += w[1] * phi;
        }
        [self.output.invert_one(0, acc[0]), self.output.invert_one(1, acc[1])]
    }

    pub fn predict_batch(&self, readings: &[[f64; 3]]) -> Vec<[f64; 2]> {
        readings.iter().map(|r| self.predict(r)).collect()
    }
}
