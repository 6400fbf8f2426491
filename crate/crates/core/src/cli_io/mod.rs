//! Configuration, persistence, reports and the `hallflex` command line.
//!
//! Subcommands pass data through fixed file names in the output directory:
//!
//! | command     | reads                          | writes                                   |
//! |-------------|--------------------------------|------------------------------------------|
//! | `field`     | config `[field]`               | `field.csv`                              |
//! | `sweep`     | config `[sweep]`               | `sweep.csv`                              |
//! | `select`    | `sweep.csv`                    | `design.json`                            |
//! | `dataset`   | `design.json`                  | `dataset.csv`, `calibration.csv`         |
//! | `fit-grbf`  | `calibration.csv`              | `grbf.json`                              |
//! | `train-gru` | `dataset.csv`                  | `gru-3axis.json`, `gru-2axis.json`       |
//! | `evaluate`  | `dataset.csv`, model files     | `metrics.csv`, `histogram.csv`           |
//! | `report`    | `sweep.csv`, dataset, models   | `sweep_report.svg/.csv`, `forces_report.svg/.csv` |
//!
//! Each command also writes `<command>.manifest.json`; the manifest hash is
//! stamped into every output file.

mod config;
mod output;
mod report;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::design_search::{read_sweep_csv, rows, select_design, sweep, write_sweep_csv, SweepRow};
use crate::error::{Error, Result};
use crate::flexure::MaterialLibrary;
use crate::inverse_models::{
    evaluate, gru_train, read_dataset_csv, synthesize_calibration, synthesize_dataset, write_dataset_csv,
    write_histogram_csv, write_metrics_csv, Dataset, Evaluation, GrbfModel, InputAxes, InverseModel, Split,
};
use crate::magnetostatics::field;
use crate::transducer::{SensingUnitSpec, ShorteningModel};

pub use config::{
    parse_config, parse_config_str, DatasetConfig, EvaluateConfig, FieldProbeConfig, ReportConfig, RunConfig,
    TrainConfig,
};
pub use output::{csv_header, Manifest, OutputSet};
pub use report::{sweep_report, timeseries_report, Series};

/// Output directory used when neither the config nor `--out` names one.
pub const DEFAULT_OUT: &str = "hallflex-out";

#[derive(Debug, Parser)]
#[command(name = "hallflex", version, about = "Design and evaluate hall-effect flexure force sensors")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the root seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for the sweep.
    #[arg(long, global = true)]
    pub parallel: Option<usize>,
    /// Use the literal stretching expression for beam shortening.
    #[arg(long, global = true)]
    pub paper_literal: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Probe one magnet's field at the configured points.
    Field,
    /// Evaluate the design grid.
    Sweep,
    /// Pick the design from a sweep.
    Select {
        #[arg(long)]
        sweep: Option<PathBuf>,
    },
    /// Synthesize the benchmark time series and the calibration grid.
    Dataset {
        #[arg(long)]
        design: Option<PathBuf>,
    },
    /// Fit the Gaussian RBF model to the calibration grid.
    FitGrbf {
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
    /// Train one GRU per configured input-axis count.
    TrainGru {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Score models on the held-out split.
    Evaluate {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Model files; defaults to every model in the output directory.
        #[arg(long = "model")]
        models: Vec<PathBuf>,
        /// Also write wall-clock inference times to `timing.csv`.
        #[arg(long)]
        timing: bool,
    },
    /// Plot the sweep and the force estimates.
    Report,
    /// Run sweep, select, dataset, fit-grbf, train-gru, evaluate and report.
    Pipeline,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Field => "field",
            Command::Sweep => "sweep",
            Command::Select { .. } => "select",
            Command::Dataset { .. } => "dataset",
            Command::FitGrbf { .. } => "fit-grbf",
            Command::TrainGru { .. } => "train-gru",
            Command::Evaluate { .. } => "evaluate",
            Command::Report => "report",
            Command::Pipeline => "pipeline",
        }
    }
}

/// The design chosen by `select`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    pub manifest: String,
    pub row: SweepRow,
    pub unit: SensingUnitSpec,
}

/// A trained model with the manifest of the run that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub manifest: String,
    pub model: InverseModel,
}

const GRBF_FILE: &str = "grbf.json";

fn gru_file(axes: InputAxes) -> String {
    format!("gru-{}axis.json", axes.width())
}

/// Load and resolve the configuration: file (or defaults), then flags.
pub fn resolve_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &global.out {
        cfg.out = Some(out.clone());
    }
    if let Some(p) = global.parallel {
        cfg.parallelism = Some(p);
    }
    if global.paper_literal {
        cfg.paper_literal = true;
    }
    if cfg.parallelism.is_some() {
        cfg.sweep.parallelism = cfg.parallelism;
    }
    if cfg.paper_literal {
        cfg.sweep.shortening = ShorteningModel::Literal;
    }
    Ok(cfg)
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    library: MaterialLibrary,
}

impl Ctx {
    fn read(&self, path: &Path, manifest: &mut Manifest) -> Result<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        manifest.record_input(&name, &bytes);
        Ok(bytes)
    }

    fn default_path(&self, given: &Option<PathBuf>, name: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.out.join(name))
    }

    fn load_dataset(&self, path: &Path, manifest: &mut Manifest) -> Result<Dataset> {
        let bytes = self.read(path, manifest)?;
        read_dataset_csv(bytes.as_slice(), path)
    }

    fn load_model(&self, path: &Path, manifest: &mut Manifest) -> Result<InverseModel> {
        let bytes = self.read(path, manifest)?;
        let file: ModelFile =
            serde_json::from_slice(&bytes).map_err(|e| Error::format(path, format!("not a model file: {e}")))?;
        file.model.validate().map_err(|e| Error::format(path, e.to_string()))?;
        Ok(file.model)
    }
}

fn finish(mut set: OutputSet, command: &str, manifest: &Manifest) -> Result<Vec<PathBuf>> {
    set.add(&format!("{command}.manifest.json"), format!("{}\n", manifest.to_json()).into_bytes());
    set.commit()
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s.into_bytes()
}

fn cmd_field(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let manifest = Manifest::new("field", &ctx.cfg);
    let probe = ctx
        .cfg
        .field
        .as_ref()
        .ok_or_else(|| Error::Config("the `field` command needs a [field] section with magnet and points".into()))?;
    if probe.points.is_empty() {
        return Err(Error::Config("[field] points is empty".into()));
    }
    let hash = manifest.hash();
    let mut csv = csv_header(&hash);
    csv.push_str("x_m,y_m,z_m,bx_g,by_g,bz_g\n");
    for p in &probe.points {
        let b = field(&probe.magnet, &probe.pose, &nalgebra::Vector3::from(*p))?.gauss();
        csv.push_str(&format!("{},{},{},{},{},{}\n", p[0], p[1], p[2], b[0], b[1], b[2]));
    }
    let mut set = OutputSet::new(&ctx.out);
    set.add("field.csv", csv.into_bytes());
    finish(set, "field", &manifest)
}

fn cmd_sweep(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let manifest = Manifest::new("sweep", &ctx.cfg);
    let records = sweep(&ctx.cfg.sweep, &ctx.library)?;
    let mut bytes = csv_header(&manifest.hash()).into_bytes();
    write_sweep_csv(&rows(&records), &mut bytes)?;
    let mut set = OutputSet::new(&ctx.out);
    set.add("sweep.csv", bytes);
    finish(set, "sweep", &manifest)
}

fn cmd_select(ctx: &Ctx, sweep_path: &Option<PathBuf>) -> Result<Vec<PathBuf>> {
    let mut manifest = Manifest::new("select", &ctx.cfg);
    let path = ctx.default_path(sweep_path, "sweep.csv");
    let bytes = ctx.read(&path, &mut manifest)?;
    let rows = read_sweep_csv(bytes.as_slice(), &path)?;
    let row = select_design(&rows, &ctx.cfg.sweep.requirements)?.clone();
    let candidate = row.candidate(&ctx.library, ctx.cfg.sweep.layout, ctx.cfg.sweep.shortening)?;
    let unit = candidate.unit();
    println!(
        "selected design #{}: {} beam L={} m t={} m, {} magnet D={} m L={} m, sensitivity {:.3}/{:.3} G/N, range {:.1}/{:.1} N",
        row.index,
        row.material,
        row.beam_length_m,
        row.beam_thickness_m,
        row.magnet_shape,
        row.magnet_diameter_m,
        row.magnet_length_m,
        row.sensitivity_fx_g_per_n,
        row.sensitivity_fz_g_per_n,
        row.range_fx_n,
        row.range_fz_n
    );
    let file = DesignFile {
        manifest: manifest.hash(),
        row,
        unit,
    };
    let mut set = OutputSet::new(&ctx.out);
    set.add("design.json", json_bytes(&file));
    finish(set, "select", &manifest)
}

fn cmd_dataset(ctx: &Ctx, design: &Option<PathBuf>) -> Result<Vec<PathBuf>> {
    let mut manifest = Manifest::new("dataset", &ctx.cfg);
    let path = ctx.default_path(design, "design.json");
    let bytes = ctx.read(&path, &mut manifest)?;
    let file: DesignFile =
        serde_json::from_slice(&bytes).map_err(|e| Error::format(&path, format!("not a design file: {e}")))?;
    let design_id = format!("sweep-{}", file.row.index);
    let dc = &ctx.cfg.dataset;
    let sensor = ctx.cfg.sweep.sensor;
    let data = synthesize_dataset(&file.unit, &design_id, &sensor, &dc.profile, &dc.effects, ctx.cfg.dataset_seed())?;
    let cal = synthesize_calibration(&file.unit, &design_id, &sensor, dc.calibration_points, dc.calibration_fraction)?;
    let hash = manifest.hash();
    let mut set = OutputSet::new(&ctx.out);
    for (name, d) in [("dataset.csv", &data), ("calibration.csv", &cal)] {
        let mut bytes = csv_header(&hash).into_bytes();
        write_dataset_csv(d, &mut bytes)?;
        set.add(name, bytes);
    }
    finish(set, "dataset", &manifest)
}

fn cmd_fit_grbf(ctx: &Ctx, calibration: &Option<PathBuf>) -> Result<Vec<PathBuf>> {
    let mut manifest = Manifest::new("fit-grbf", &ctx.cfg);
    let path = ctx.default_path(calibration, "calibration.csv");
    let cal = ctx.load_dataset(&path, &mut manifest)?;
    let model = GrbfModel::fit_dataset(&cal, Split::Calibration, &ctx.cfg.grbf)?;
    let file = ModelFile {
        manifest: manifest.hash(),
        model: InverseModel::Grbf(model),
    };
    let mut set = OutputSet::new(&ctx.out);
    set.add(GRBF_FILE, json_bytes(&file));
    finish(set, "fit-grbf", &manifest)
}

fn cmd_train_gru(ctx: &Ctx, dataset: &Option<PathBuf>) -> Result<Vec<PathBuf>> {
    let mut manifest = Manifest::new("train-gru", &ctx.cfg);
    let path = ctx.default_path(dataset, "dataset.csv");
    let data = ctx.load_dataset(&path, &mut manifest)?;
    if ctx.cfg.train.axes.is_empty() {
        return Err(Error::Config("[train] axes is empty".into()));
    }
    let hash = manifest.hash();
    let mut set = OutputSet::new(&ctx.out);
    for &n in &ctx.cfg.train.axes {
        let axes = InputAxes::parse(n)?;
        let cfg = crate::inverse_models::GruConfig {
            input_axes: axes,
            seed: ctx.cfg.train_seed(),
            ..ctx.cfg.train.gru
        };
        let model = gru_train(&data, &cfg)?;
        println!(
            "trained {}-axis GRU: final epoch NLL {:.4}",
            axes.width(),
            model.loss_history.last().copied().unwrap_or(f64::NAN)
        );
        let file = ModelFile {
            manifest: hash.clone(),
            model: InverseModel::Gru(model),
        };
        set.add(&gru_file(axes), json_bytes(&file));
    }
    finish(set, "train-gru", &manifest)
}

/// Model files present in the output directory, in a fixed order.
fn default_models(out: &Path) -> Vec<PathBuf> {
    let mut names = vec![GRBF_FILE.to_string()];
    names.extend([InputAxes::Three, InputAxes::Two].map(gru_file));
    names.into_iter().map(|n| out.join(n)).filter(|p| p.exists()).collect()
}

fn evaluate_all(ctx: &Ctx, dataset: &Option<PathBuf>, models: &[PathBuf], manifest: &mut Manifest) -> Result<(Dataset, Vec<Evaluation>)> {
    let path = ctx.default_path(dataset, "dataset.csv");
    let data = ctx.load_dataset(&path, manifest)?;
    let paths = if models.is_empty() {
        default_models(&ctx.out)
    } else {
        models.to_vec()
    };
    if paths.is_empty() {
        return Err(Error::Config(format!("no model files found in {}", ctx.out.display())));
    }
    let mut evals = Vec::new();
    for p in &paths {
        let model = ctx.load_model(p, manifest)?;
        evals.push(evaluate(&model, &data, ctx.cfg.evaluate.split)?);
    }
    Ok((data, evals))
}

fn cmd_evaluate(ctx: &Ctx, dataset: &Option<PathBuf>, models: &[PathBuf], timing: bool) -> Result<Vec<PathBuf>> {
    let mut manifest = Manifest::new("evaluate", &ctx.cfg);
    let (_, evals) = evaluate_all(ctx, dataset, models, &mut manifest)?;
    let hash = manifest.hash();
    let metrics: Vec<_> = evals.iter().map(|e| e.metrics.clone()).collect();
    for m in &metrics {
        println!(
            "{:<12} F_x RMSE {:8.3} N  F_z RMSE {:8.3} N  F_z mean error {:8.3} N  F_z variance {:9.3} N²",
            m.model, m.fx.rmse, m.fz.rmse, m.fz.mean_error, m.fz.error_variance
        );
    }
    let mut set = OutputSet::new(&ctx.out);
    let mut bytes = csv_header(&hash).into_bytes();
    write_metrics_csv(&metrics, &mut bytes)?;
    set.add("metrics.csv", bytes);
    let mut bytes = csv_header(&hash).into_bytes();
    write_histogram_csv(&evals.iter().collect::<Vec<_>>(), ctx.cfg.evaluate.histogram_bins, &mut bytes)?;
    set.add("histogram.csv", bytes);
    if timing || ctx.cfg.evaluate.timing {
        let mut t = csv_header(&hash);
        t.push_str("model,inference_us_per_sample\n");
        for m in &metrics {
            t.push_str(&format!("{},{}\n", m.model, m.inference_us_per_sample));
        }
        set.add("timing.csv", t.into_bytes());
    }
    finish(set, "evaluate", &manifest)
}

fn cmd_report(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let mut manifest = Manifest::new("report", &ctx.cfg);
    let rc = &ctx.cfg.report;
    let sweep_path = ctx.out.join("sweep.csv");
    let dataset_path = ctx.out.join("dataset.csv");
    let have_models = !default_models(&ctx.out).is_empty();
    if !sweep_path.exists() && !(dataset_path.exists() && have_models) {
        return Err(Error::Config(format!(
            "nothing to report in {}: need sweep.csv, or dataset.csv with model files",
            ctx.out.display()
        )));
    }
    let sweep_rows = if sweep_path.exists() {
        let bytes = ctx.read(&sweep_path, &mut manifest)?;
        Some(read_sweep_csv(bytes.as_slice(), &sweep_path)?)
    } else {
        None
    };
    let evaluated = if dataset_path.exists() && have_models {
        Some(evaluate_all(ctx, &None, &[], &mut manifest)?)
    } else {
        None
    };
    let hash = manifest.hash();
    let mut set = OutputSet::new(&ctx.out);
    if let Some(rows) = sweep_rows {
        let (svg, csv) = sweep_report(&rows, &hash, rc.width, rc.height)?;
        set.add("sweep_report.svg", svg.into_bytes());
        set.add("sweep_report.csv", csv.into_bytes());
    }
    if let Some((data, evals)) = evaluated {
        let [t0, t1] = rc.window;
        let picked: Vec<usize> = (0..evals[0].indices.len())
            .filter(|&k| {
                let t = data.samples[evals[0].indices[k]].time;
                t >= t0 && t <= t1
            })
            .collect();
        if picked.is_empty() {
            return Err(Error::Config(format!(
                "report window [{t0}, {t1}] s holds no {} samples",
                ctx.cfg.evaluate.split.name()
            )));
        }
        let time: Vec<f64> = picked.iter().map(|&k| data.samples[evals[0].indices[k]].time).collect();
        let mut series = vec![Series {
            name: "ground_truth",
            values: picked.iter().map(|&k| data.samples[evals[0].indices[k]].force[1]).collect(),
        }];
        let names: Vec<String> = evals.iter().map(|e| e.metrics.model.replace('-', "_")).collect();
        for (e, name) in evals.iter().zip(&names) {
            series.push(Series {
                name,
                values: picked.iter().map(|&k| e.estimates[k][1]).collect(),
            });
        }
        let (svg, csv) = timeseries_report(&time, &series, "F_z estimates", "F_z [N]", &hash, rc.width, rc.height)?;
        set.add("forces_report.svg", svg.into_bytes());
        set.add("forces_report.csv", csv.into_bytes());
    }
    finish(set, "report", &manifest)
}

fn dispatch(ctx: &Ctx, command: &Command) -> Result<Vec<PathBuf>> {
    match command {
        Command::Field => cmd_field(ctx),
        Command::Sweep => cmd_sweep(ctx),
        Command::Select { sweep } => cmd_select(ctx, sweep),
        Command::Dataset { design } => cmd_dataset(ctx, design),
        Command::FitGrbf { calibration } => cmd_fit_grbf(ctx, calibration),
        Command::TrainGru { dataset } => cmd_train_gru(ctx, dataset),
        Command::Evaluate {
            dataset,
            models,
            timing,
        } => cmd_evaluate(ctx, dataset, models, *timing),
        Command::Report => cmd_report(ctx),
        Command::Pipeline => {
            let mut written = Vec::new();
            for step in [
                Command::Sweep,
                Command::Select { sweep: None },
                Command::Dataset { design: None },
                Command::FitGrbf { calibration: None },
                Command::TrainGru { dataset: None },
                Command::Evaluate {
                    dataset: None,
                    models: Vec::new(),
                    timing: false,
                },
                Command::Report,
            ] {
                written.extend(dispatch(ctx, &step).map_err(|e| Error::Config(format!("{}: {e}", step.name())))?);
            }
            Ok(written)
        }
    }
}

/// Run a parsed command line; returns the files written.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = resolve_config(&cli.global)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let ctx = Ctx {
        cfg,
        out,
        library: MaterialLibrary::bundled(),
    };
    dispatch(&ctx, &cli.command)
}

/// Entry point of the binary: parse `argv` (without the program name),
/// run, report errors on stderr and return the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args = std::iter::once(std::ffi::OsString::from("hallflex")).chain(argv.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("hallflex {}: error: {e}", cli.command.name());
            1
        }
    }
}
