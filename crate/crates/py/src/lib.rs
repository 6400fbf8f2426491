//! Python bindings for hallflex.
//!
//! Structured results (sweep rows, metrics, dataset metadata) cross the
//! boundary as JSON and arrive in Python as plain dicts and lists.

use std::path::Path;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use hallflex::design_search::{rows, select_design, sweep, SweepConfig, SweepRow};
use hallflex::flexure::{BeamSpec, MaterialLibrary};
use hallflex::inverse_models::{
    self as im, gru_train, read_dataset_csv, synthesize_calibration, synthesize_dataset, write_dataset_csv, Effects,
    GrbfConfig, GruConfig, HysteresisConfig, InputAxes, InverseModel, LoadProfile, RandomEpisodes, Split,
};
use hallflex::magnetostatics::{self as ms, MagnetShape, MagnetSpec, Pose};
use hallflex::transducer::{self as td, SensingUnitSpec, SensorSpec};
use hallflex::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Validation(_) | Error::Domain(_) | Error::Config(_) | Error::Format { .. } | Error::Selection(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn sweep_config(toml_text: Option<&str>) -> PyResult<SweepConfig> {
    match toml_text {
        None => Ok(SweepConfig::bundled()),
        Some(t) => toml::from_str(t).map_err(|e| PyValueError::new_err(format!("invalid sweep configuration: {e}"))),
    }
}

/// A permanent magnet magnetized along its local +z axis.
#[pyclass(name = "Magnet", from_py_object)]
#[derive(Clone)]
struct PyMagnet {
    inner: MagnetSpec,
}

#[pymethods]
impl PyMagnet {
    /// Lengths in metres, remanence in tesla. `shape` is one of
    /// "cylinder", "cube", "sphere" or "tube".
    #[new]
    #[pyo3(signature = (shape, diameter, length=None, inner_diameter=0.0, remanence=None))]
    fn new(shape: &str, diameter: f64, length: Option<f64>, inner_diameter: f64, remanence: Option<f64>) -> PyResult<Self> {
        let length = length.unwrap_or(diameter);
        let mut m = match MagnetShape::parse(shape).map_err(py_err)? {
            MagnetShape::Cylinder => MagnetSpec::cylinder(diameter, length),
            MagnetShape::Cube => MagnetSpec::cube(diameter, length),
            MagnetShape::Sphere => MagnetSpec::sphere(diameter),
            MagnetShape::Tube => MagnetSpec::tube(diameter, inner_diameter, length),
        };
        if let Some(br) = remanence {
            m = m.with_remanence(br);
        }
        m.validate().map_err(py_err)?;
        Ok(Self { inner: m })
    }

    /// Flux density (tesla) at a point, with the magnet centred at
    /// `position` and unrotated.
    #[pyo3(signature = (point, position=[0.0, 0.0, 0.0]))]
    fn field(&self, point: [f64; 3], position: [f64; 3]) -> PyResult<[f64; 3]> {
        let pose = Pose::from_translation(position.into());
        Ok(ms::field(&self.inner, &pose, &point.into()).map_err(py_err)?.as_array())
    }

    /// Flux density from direct numerical integration of the surface
    /// charges, for checking `field`.
    fn field_oracle(&self, point: [f64; 3]) -> PyResult<[f64; 3]> {
        Ok(ms::field_oracle(&self.inner, &point.into()).map_err(py_err)?.as_array())
    }

    #[getter]
    fn shape(&self) -> &'static str {
        self.inner.shape.name()
    }

    fn __repr__(&self) -> String {
        format!(
            "Magnet(shape='{}', diameter={}, length={})",
            self.inner.shape.name(),
            self.inner.diameter,
            self.inner.length
        )
    }
}

/// A rectangular cantilever flexure.
#[pyclass(name = "Beam", from_py_object)]
#[derive(Clone)]
struct PyBeam {
    inner: BeamSpec,
}

#[pymethods]
impl PyBeam {
    #[new]
    #[pyo3(signature = (material, length, thickness, width, deflection_cap=0.5e-3))]
    fn new(material: &str, length: f64, thickness: f64, width: f64, deflection_cap: f64) -> PyResult<Self> {
        let m = MaterialLibrary::bundled().get(material).map_err(py_err)?.clone();
        let beam = BeamSpec::new(m, length, thickness, width, deflection_cap);
        beam.validate().map_err(py_err)?;
        Ok(Self { inner: beam })
    }

    /// Tip slope (rad) under a tip load `p` (N).
    fn tip_slope(&self, p: f64) -> PyResult<f64> {
        hallflex::flexure::tip_slope(p, &self.inner).map_err(py_err)
    }

    /// Tip deflection (m) under a tip load `p` (N).
    fn tip_deflection(&self, p: f64) -> PyResult<f64> {
        hallflex::flexure::tip_deflection(p, &self.inner).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Beam(material='{}', length={}, thickness={}, width={})",
            self.inner.material.name, self.inner.length, self.inner.thickness, self.inner.width
        )
    }
}

/// One sensing unit: two identical beams, a magnet and a 3-axis hall
/// sensor facing it across `gap`.
#[pyclass(name = "SensingUnit", from_py_object)]
#[derive(Clone)]
struct PyUnit {
    inner: SensingUnitSpec,
    sensor: SensorSpec,
}

#[pymethods]
impl PyUnit {
    #[new]
    fn new(beam: &PyBeam, magnet: &PyMagnet, gap: f64) -> PyResult<Self> {
        let unit = SensingUnitSpec::new(beam.inner.clone(), beam.inner.clone(), magnet.inner, gap);
        unit.validate().map_err(py_err)?;
        Ok(Self {
            inner: unit,
            sensor: SensorSpec::default(),
        })
    }

    /// The design `select_design` picks from the sweep described by
    /// `config` (TOML text for the `[sweep]` table; None for the bundled
    /// ranges).
    #[staticmethod]
    #[pyo3(signature = (config=None))]
    fn selected(config: Option<&str>) -> PyResult<Self> {
        let cfg = sweep_config(config)?;
        let library = MaterialLibrary::bundled();
        let table = rows(&sweep(&cfg, &library).map_err(py_err)?);
        let row = select_design(&table, &cfg.requirements).map_err(py_err)?;
        let unit = row.candidate(&library, cfg.layout, cfg.shortening).map_err(py_err)?.unit();
        Ok(Self {
            inner: unit,
            sensor: cfg.sensor,
        })
    }

    /// Quantized reading (gauss) for the force pair (F_x, F_z) in newtons.
    #[pyo3(signature = (fx, fz, noise_seed=None))]
    fn reading(&self, fx: f64, fz: f64, noise_seed: Option<u64>) -> PyResult<[f64; 3]> {
        let r = td::forward_reading(&self.inner, [fx, fz], &self.sensor, noise_seed).map_err(py_err)?;
        Ok(r.gauss(&self.sensor))
    }

    /// Noise-free field (gauss) before quantization.
    fn field(&self, fx: f64, fz: f64) -> PyResult<[f64; 3]> {
        Ok(td::forward_field(&self.inner, [fx, fz]).map_err(py_err)?.gauss())
    }

    /// Largest admissible force per axis, (F_x, F_z) in newtons.
    fn force_range(&self) -> PyResult<(f64, f64)> {
        let r = td::force_range(&self.inner, &self.sensor).map_err(py_err)?;
        Ok((r.fx.max_force, r.fz.max_force))
    }

    /// Field change per newton at the unloaded state: a dict with "fx"
    /// and "fz" columns, gauss/N per sensor axis.
    fn sensitivity<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &td::force_sensitivity(&self.inner).map_err(py_err)?)
    }
}

/// A synthetic loading run or calibration grid.
#[pyclass(name = "Dataset")]
struct PyDataset {
    inner: im::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Coupled sinusoidal loading of `unit`. Noise, hysteresis and random
    /// external-field episodes in the training part are on by default.
    #[staticmethod]
    #[pyo3(signature = (unit, seed=0, duration=100.0, noise=true, hysteresis=true, disturbances=true))]
    fn synthesize(unit: &PyUnit, seed: u64, duration: f64, noise: bool, hysteresis: bool, disturbances: bool) -> PyResult<Self> {
        let profile = LoadProfile {
            duration,
            ..LoadProfile::default()
        };
        let effects = Effects {
            noise,
            hysteresis: hysteresis.then(HysteresisConfig::default),
            external_field: Vec::new(),
            random_episodes: disturbances.then(RandomEpisodes::default),
        };
        let d = synthesize_dataset(&unit.inner, "python", &unit.sensor, &profile, &effects, seed).map_err(py_err)?;
        Ok(Self { inner: d })
    }

    /// Static `points × points` calibration grid over ±`fraction` of the
    /// force range.
    #[staticmethod]
    #[pyo3(signature = (unit, points=41, fraction=1.0))]
    fn calibration(unit: &PyUnit, points: usize, fraction: f64) -> PyResult<Self> {
        let d = synthesize_calibration(&unit.inner, "python", &unit.sensor, points, fraction).map_err(py_err)?;
        Ok(Self { inner: d })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let p = Path::new(path);
        let f = std::fs::File::open(p).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        let d = read_dataset_csv(std::io::BufReader::new(f), p).map_err(py_err)?;
        Ok(Self { inner: d })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let f = std::fs::File::create(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        write_dataset_csv(&self.inner, std::io::BufWriter::new(f)).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.samples.len()
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.meta.id.clone()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.samples.iter().map(|s| s.time).collect()
    }

    #[getter]
    fn forces(&self) -> Vec<[f64; 2]> {
        self.inner.samples.iter().map(|s| s.force).collect()
    }

    #[getter]
    fn readings(&self) -> Vec<[f64; 3]> {
        self.inner.samples.iter().map(|s| s.reading).collect()
    }

    #[getter]
    fn splits(&self) -> Vec<&'static str> {
        self.inner.samples.iter().map(|s| s.split.name()).collect()
    }

    #[getter]
    fn meta<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.meta)
    }
}

/// A fitted inverse model: the Gaussian RBF ideal model or a stacked GRU.
#[pyclass(name = "Model")]
struct PyModel {
    inner: InverseModel,
}

#[pymethods]
impl PyModel {
    /// Gaussian RBF fitted to the calibration split of `dataset`.
    #[staticmethod]
    #[pyo3(signature = (dataset, centers=256, ridge=1e-8))]
    fn fit_grbf(dataset: &PyDataset, centers: usize, ridge: f64) -> PyResult<Self> {
        let cfg = GrbfConfig {
            centers,
            ridge,
            width: None,
        };
        let split = if dataset.inner.samples.iter().any(|s| s.split == Split::Calibration) {
            Split::Calibration
        } else {
            Split::Train
        };
        let m = im::GrbfModel::fit_dataset(&dataset.inner, split, &cfg).map_err(py_err)?;
        Ok(Self {
            inner: InverseModel::Grbf(m),
        })
    }

    /// Stacked GRU trained on the training split. `axes` is 3 for
    /// (B_x, B_y, B_z) input or 2 for (B_x, B_z).
    #[staticmethod]
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (dataset, axes=3, hidden=32, layers=2, epochs=12, seed=0, max_updates=None))]
    fn train_gru(
        py: Python<'_>,
        dataset: &PyDataset,
        axes: u32,
        hidden: usize,
        layers: usize,
        epochs: usize,
        seed: u64,
        max_updates: Option<usize>,
    ) -> PyResult<Self> {
        let cfg = GruConfig {
            input_axes: InputAxes::parse(axes).map_err(py_err)?,
            hidden,
            layers,
            epochs,
            seed,
            max_updates,
            ..GruConfig::default()
        };
        let data = &dataset.inner;
        let m = py.detach(|| gru_train(data, &cfg)).map_err(py_err)?;
        Ok(Self {
            inner: InverseModel::Gru(m),
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: InverseModel =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("not a model: {e}")))?;
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label()
    }

    /// Force estimates (F_x, F_z) for a reading sequence. GRU models run
    /// the sequence from a zero state and also return standard
    /// deviations; the GRBF returns None in their place.
    #[allow(clippy::type_complexity)]
    fn predict(&self, readings: Vec<[f64; 3]>) -> PyResult<(Vec<[f64; 2]>, Option<Vec<[f64; 2]>>)> {
        match &self.inner {
            InverseModel::Grbf(m) => Ok((m.predict_batch(&readings), None)),
            InverseModel::Gru(m) => {
                let (out, _) = m.forward_readings(&readings, None).map_err(py_err)?;
                Ok((out.iter().map(|e| e.mean).collect(), Some(out.iter().map(|e| e.sigma).collect())))
            }
        }
    }

    /// Error metrics on one split of `dataset` ("train", "test" or
    /// "calibration").
    #[pyo3(signature = (dataset, split="test"))]
    fn evaluate<'py>(&self, py: Python<'py>, dataset: &PyDataset, split: &str) -> PyResult<Bound<'py, PyAny>> {
        let split = Split::parse(split).map_err(py_err)?;
        let e = im::evaluate(&self.inner, &dataset.inner, split).map_err(py_err)?;
        to_py(py, &e.metrics)
    }
}

/// Evaluate every candidate of a sweep and return one dict per row.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn run_sweep<'py>(py: Python<'py>, config: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = sweep_config(config)?;
    let library = MaterialLibrary::bundled();
    let table: Vec<SweepRow> = py.detach(|| sweep(&cfg, &library).map(|r| rows(&r))).map_err(py_err)?;
    to_py(py, &table)
}

/// The bundled sweep configuration as TOML text, a starting point for
/// `run_sweep` and `SensingUnit.selected`.
#[pyfunction]
fn default_sweep_config() -> &'static str {
    SweepConfig::bundled_text()
}

/// Run the command-line tool in-process; returns its exit status.
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    hallflex::cli_io::run(args)
}

#[pymodule]
#[pyo3(name = "hallflex")]
pub fn hallflex_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyMagnet>()?;
    m.add_class::<PyBeam>()?;
    m.add_class::<PyUnit>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add_function(wrap_pyfunction!(default_sweep_config, m)?)?;
    Ok(())
}
