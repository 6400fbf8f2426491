//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, with the
//! measured quantity. Exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hallflex::design_search::{pareto_front, rows, select_design, sweep, SweepConfig, SweepRow};
use hallflex::flexure::{tip_slope, BeamSpec, MaterialLibrary};
use hallflex::cli_io::DatasetConfig;
use hallflex::inverse_models::{
    evaluate, gru_train, synthesize_calibration, synthesize_dataset, Dataset, Effects, FieldEpisode, GrbfConfig,
    GrbfModel, GruConfig, GruModel, GruState, InputAxes, InverseModel, LoadProfile, Split,
};
use hallflex::transducer::{SensingUnitSpec, SensorSpec};
use hallflex::magnetostatics::{
    facing_sensor_pose, field, field_oracle, sensitivity_profile, Axis, MagnetShape, MagnetSpec, Pose,
};

type Outcome = Result<String, String>;

struct Suite {
    failures: usize,
}

impl Suite {
    fn run(&mut self, id: u32, title: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (mut ok, mut detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        if let Some(limit) = limit {
            if elapsed > limit {
                ok = false;
                detail = format!("{detail}; runtime {elapsed:.1?} exceeds {limit:?}");
            }
        }
        if !ok {
            self.failures += 1;
        }
        println!(
            "criterion {id:>2} [{}] {title}: {detail} ({elapsed:.2?})",
            if ok { "PASS" } else { "FAIL" }
        );
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Distance from `p` to the surface of `m` (exterior points only).
fn surface_distance(m: &MagnetSpec, p: &Vector3<f64>) -> f64 {
    let r = 0.5 * m.diameter;
    let hz = m.half_height();
    match m.shape {
        MagnetShape::Sphere => p.norm() - r,
        MagnetShape::Cube => {
            let q = Vector3::new(p.x.abs() - r, p.y.abs() - r, p.z.abs() - hz).map(|v| v.max(0.0));
            q.norm()
        }
        MagnetShape::Cylinder | MagnetShape::Tube => {
            let rho = (p.x * p.x + p.y * p.y).sqrt();
            let dr = (rho - r).max(0.0);
            let dz = (p.z.abs() - hz).max(0.0);
            (dr * dr + dz * dz).sqrt()
        }
    }
}

fn oracle_equivalence() -> Outcome {
    let shapes = [
        MagnetSpec::cylinder(2.5e-3, 2.5e-3),
        MagnetSpec::cube(2.5e-3, 2.5e-3),
        MagnetSpec::sphere(2.5e-3),
        MagnetSpec::tube(2.5e-3, 1.0e-3, 2.5e-3),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = Vec::new();
    for m in &shapes {
        let mut max_err = 0.0_f64;
        let mut n = 0;
        while n < 50 {
            let p = Vector3::new(
                rng.random_range(-6e-3..6e-3),
                rng.random_range(-6e-3..6e-3),
                rng.random_range(-6e-3..6e-3),
            );
            if surface_distance(m, &p) < 0.5e-3 {
                continue;
            }
            let a = field(m, &Pose::identity(), &p).map_err(|e| e.to_string())?;
            let o = field_oracle(m, &p).map_err(|e| e.to_string())?;
            max_err = max_err.max((a - o).norm() / o.norm());
            n += 1;
        }
        worst.push((m.shape.name(), max_err));
    }
    let detail = worst
        .iter()
        .map(|(s, e)| format!("{s} {e:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    check(
        worst.iter().all(|(_, e)| *e < 1e-6),
        format!("max relative error over 50 points: {detail} (limit 1e-6)"),
    )
}

/// Tip slope from integrating EI·w⁗ = q with q ≡ 0 between the clamped
/// root and a tip carrying shear P (RK4 shooting on the 4-state system).
fn shooting_tip_slope(beam: &BeamSpec, p: f64) -> f64 {
    let ei = beam.flexural_rigidity();
    let len = beam.length;
    let steps = 64;
    let run = |w2: f64, w3: f64| {
        let f = |y: [f64; 4]| [y[1], y[2], y[3], 0.0];
        let mut y = [0.0, 0.0, w2, w3];
        let h = len / steps as f64;
        for _ in 0..steps {
            let add = |y: [f64; 4], d: [f64; 4], s: f64| [0, 1, 2, 3].map(|i| y[i] + s * d[i]);
            let k1 = f(y);
            let k2 = f(add(y, k1, 0.5 * h));
            let k3 = f(add(y, k2, 0.5 * h));
            let k4 = f(add(y, k3, h));
            y = [0, 1, 2, 3].map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        }
        y
    };
    let base = run(0.0, 0.0);
    let e2 = run(1.0, 0.0);
    let e3 = run(0.0, 1.0);
    let (a11, a12, a21, a22) = (e2[2] - base[2], e3[2] - base[2], e2[3] - base[3], e3[3] - base[3]);
    let (r1, r2) = (-base[2], -p / ei - base[3]);
    let det = a11 * a22 - a12 * a21;
    run((r1 * a22 - a12 * r2) / det, (a11 * r2 - a21 * r1) / det)[1]
}

fn tip_slope_reproduction() -> Outcome {
    let lib = MaterialLibrary::bundled();
    let names: Vec<&str> = lib.names().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let material = lib.get(names[rng.random_range(0..names.len())]).unwrap().clone();
        let beam = BeamSpec::new(
            material,
            rng.random_range(15e-3..45e-3),
            rng.random_range(1e-3..8e-3),
            rng.random_range(5e-3..20e-3),
            0.5e-3,
        );
        let p = rng.random_range(-500.0..500.0);
        let closed = tip_slope(p, &beam).map_err(|e| e.to_string())?;
        let numeric = shooting_tip_slope(&beam, p);
        worst = worst.max((closed - numeric).abs() / closed.abs());
    }
    check(
        worst < 1e-9,
        format!("max relative difference, tip load, 20 random pairs: {worst:.1e} (limit 1e-9)"),
    )
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn shape_pattern_equivalence() -> Outcome {
    let shapes = [
        MagnetSpec::cylinder(2.5e-3, 2.5e-3),
        MagnetSpec::cube(2.5e-3, 2.5e-3),
        MagnetSpec::sphere(2.5e-3),
    ];
    let mut signals = Vec::new();
    for m in &shapes {
        let prof = sensitivity_profile(m, &facing_sensor_pose(m, 1.5e-3), Axis::X, (-0.1e-3, 0.1e-3), 41)
            .map_err(|e| e.to_string())?;
        let bx: Vec<f64> = prof.field.iter().map(|b| b.bx).collect();
        let bz: Vec<f64> = prof.field.iter().map(|b| b.bz).collect();
        signals.push((bx, bz));
    }
    let mut worst = f64::INFINITY;
    for i in 0..3 {
        for j in i + 1..3 {
            worst = worst.min(pearson(&signals[i].0, &signals[j].0));
            worst = worst.min(pearson(&signals[i].1, &signals[j].1));
        }
    }
    check(
        worst > 0.99,
        format!("min pairwise correlation of Bx and Bz profiles: {worst:.6} (limit > 0.99)"),
    )
}

struct SweepOutcome {
    rows: Vec<SweepRow>,
    config: SweepConfig,
    elapsed: Duration,
}

fn default_sweep() -> Result<SweepOutcome, String> {
    let mut config = SweepConfig::bundled();
    config.parallelism = Some(1);
    let start = Instant::now();
    let records = sweep(&config, &MaterialLibrary::bundled()).map_err(|e| e.to_string())?;
    Ok(SweepOutcome {
        rows: rows(&records),
        config,
        elapsed: start.elapsed(),
    })
}

fn interference(s: &SweepOutcome) -> Outcome {
    let sel = select_design(&s.rows, &s.config.requirements).map_err(|e| e.to_string())?;
    check(
        sel.neighbor_offset_g < 0.3,
        format!(
            "selected design #{} neighbour offset {:.4} G at 1.5 mm (limit < 0.3 G)",
            sel.index, sel.neighbor_offset_g
        ),
    )
}

fn selection(s: &SweepOutcome) -> Outcome {
    let sel = select_design(&s.rows, &s.config.requirements).map_err(|e| e.to_string())?;
    let d = sel.magnet_diameter_m * 1e3;
    check(
        (d - 3.0).abs() < 1e-9,
        format!(
            "selected #{}: {} beam t={:.1} mm L={:.2} mm, magnet D={d:.1} mm L={:.1} mm, {:.2} G/N, range {:.1}/{:.1} N",
            sel.index,
            sel.material,
            sel.beam_thickness_m * 1e3,
            sel.beam_length_m * 1e3,
            sel.magnet_length_m * 1e3,
            sel.sensitivity_fx_g_per_n,
            sel.range_fx_n,
            sel.range_fz_n
        ),
    )
}

fn sweep_structure(s: &SweepOutcome) -> Outcome {
    let feasible: Vec<&SweepRow> = s.rows.iter().filter(|r| r.feasible).collect();
    let max_range = |r: &SweepRow| r.range_fx_n.max(r.range_fz_n);
    let abs_max = feasible
        .iter()
        .filter(|r| r.material == "abs")
        .map(|r| max_range(r))
        .fold(0.0, f64::max);
    let strong: Vec<&&SweepRow> = feasible
        .iter()
        .filter(|r| r.material == "steel" && max_range(r) > 500.0)
        .collect();
    let strong_sens = strong
        .iter()
        .map(|r| r.sensitivity_fx_g_per_n.max(r.sensitivity_fz_g_per_n))
        .fold(0.0, f64::max);
    let front = pareto_front(&s.rows);
    let front_materials: std::collections::BTreeSet<&str> = front.iter().map(|r| r.material.as_str()).collect();
    let detail = format!(
        "{} candidates ({} feasible) in {:.1?}; ABS max range {abs_max:.1} N (limit ≤ 250); {} steel designs > 500 N, max sensitivity {strong_sens:.3} G/N (limit < 10); Pareto front materials {:?}",
        s.rows.len(),
        feasible.len(),
        s.elapsed,
        strong.len(),
        front_materials
    );
    check(
        abs_max <= 250.0 && !strong.is_empty() && strong_sens < 10.0 && s.elapsed < Duration::from_secs(300),
        detail,
    )
}

/// The selected design, its calibration-grid GRBF and the standard
/// benchmark settings shared by the learning criteria.
struct Bench {
    unit: SensingUnitSpec,
    sensor: SensorSpec,
    design_id: String,
    grbf: GrbfModel,
}

fn bench(s: &SweepOutcome) -> Result<Bench, String> {
    let row = select_design(&s.rows, &s.config.requirements).map_err(|e| e.to_string())?;
    let unit = row
        .candidate(&MaterialLibrary::bundled(), s.config.layout, s.config.shortening)
        .map_err(|e| e.to_string())?
        .unit();
    let design_id = format!("sweep-{}", row.index);
    let cal = synthesize_calibration(&unit, &design_id, &s.config.sensor, 41, 1.0).map_err(|e| e.to_string())?;
    let grbf = GrbfModel::fit_dataset(&cal, Split::Calibration, &GrbfConfig::default()).map_err(|e| e.to_string())?;
    Ok(Bench {
        unit,
        sensor: s.config.sensor,
        design_id,
        grbf,
    })
}

impl Bench {
    fn dataset(&self, effects: &Effects, seed: u64) -> Result<Dataset, String> {
        synthesize_dataset(&self.unit, &self.design_id, &self.sensor, &LoadProfile::default(), effects, seed)
            .map_err(|e| e.to_string())
    }

    /// Noise, hysteresis and random disturbance episodes in the training part.
    fn standard(&self, seed: u64) -> Result<Dataset, String> {
        self.dataset(&DatasetConfig::default().effects, seed)
    }

    fn train(&self, data: &Dataset, axes: InputAxes, seed: u64) -> Result<GruModel, String> {
        let cfg = GruConfig {
            input_axes: axes,
            seed,
            ..GruConfig::default()
        };
        gru_train(data, &cfg).map_err(|e| e.to_string())
    }
}

fn fz_rmse(model: InverseModel, data: &Dataset) -> Result<f64, String> {
    Ok(evaluate(&model, data, Split::Test).map_err(|e| e.to_string())?.metrics.fz.rmse)
}

fn grbf_self_consistency(b: &Bench) -> Outcome {
    let data = b.dataset(&Effects::default(), 7)?;
    let eval = evaluate(&InverseModel::Grbf(b.grbf.clone()), &data, Split::Test).map_err(|e| e.to_string())?;
    let range = data.meta.force_range;
    let rel = [eval.metrics.fx.rmse / range[0], eval.metrics.fz.rmse / range[1]];
    check(
        rel.iter().all(|r| *r < 0.01),
        format!(
            "RMSE F_x {:.3} N ({:.3}% of {:.1} N), F_z {:.3} N ({:.3}% of {:.1} N) (limit 1%)",
            eval.metrics.fx.rmse,
            100.0 * rel[0],
            range[0],
            eval.metrics.fz.rmse,
            100.0 * rel[1],
            range[1]
        ),
    )
}

fn gradient_check() -> Outcome {
    let cfg = GruConfig {
        hidden: 4,
        seed: 5,
        ..GruConfig::default()
    };
    let model = GruModel::init(&cfg).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let xs: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let ys: Vec<[f64; 2]> = (0..5)
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let state = GruState {
        hidden: (0..cfg.layers)
            .map(|_| (0..4).map(|_| rng.random_range(-0.5..0.5)).collect())
            .collect(),
    };
    let (_, grad) = model.loss_gradient(&xs, &ys, Some(state.clone())).map_err(|e| e.to_string())?;
    let loss_at = |params: &[f64]| {
        let mut m = model.clone();
        m.params.copy_from_slice(params);
        m.loss(&xs, &ys, Some(state.clone())).map_err(|e| e.to_string())
    };
    let h = 1e-6;
    let mut worst = 0.0_f64;
    let mut params = model.params.clone();
    for i in 0..params.len() {
        let p0 = params[i];
        params[i] = p0 + h;
        let up = loss_at(&params)?;
        params[i] = p0 - h;
        let down = loss_at(&params)?;
        params[i] = p0;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6));
    }
    check(
        worst < 1e-4,
        format!(
            "worst relative error over {} parameters, hidden 4, window 5: {worst:.1e} (limit 1e-4)",
            params.len()
        ),
    )
}

/// GRU-3axis models trained for the ordering criterion, reused for the
/// uncertainty criterion.
struct OrderingRun {
    gru3: Vec<(u64, GruModel)>,
}

fn ordering(b: &Bench, run: &mut OrderingRun) -> Outcome {
    let mut held = 0;
    let mut lines = Vec::new();
    for seed in 0..10 {
        let data = b.standard(seed)?;
        let g3 = b.train(&data, InputAxes::Three, seed)?;
        let g2 = b.train(&data, InputAxes::Two, seed)?;
        let r3 = fz_rmse(InverseModel::Gru(g3.clone()), &data)?;
        let r2 = fz_rmse(InverseModel::Gru(g2), &data)?;
        let rg = fz_rmse(InverseModel::Grbf(b.grbf.clone()), &data)?;
        if r3 < rg && rg < r2 {
            held += 1;
        }
        lines.push(format!("{r3:.1}/{rg:.1}/{r2:.1}"));
        run.gru3.push((seed, g3));
    }
    check(
        held >= 8,
        format!(
            "F_z RMSE GRU-3axis/GRBF/GRU-2axis per seed [{}] N; ordering held on {held}/10 seeds (limit ≥ 8)",
            lines.join(", ")
        ),
    )
}

/// Strong episodes with a large normal component, inside the test part.
fn scheduled_disturbance() -> Vec<FieldEpisode> {
    vec![
        FieldEpisode {
            start: 75.0,
            end: 80.0,
            field: [15.0, -15.0, 45.0],
            ramp: 0.5,
        },
        FieldEpisode {
            start: 88.0,
            end: 93.0,
            field: [-15.0, 15.0, -45.0],
            ramp: 0.5,
        },
    ]
}

fn uncertainty_response(b: &Bench, run: &OrderingRun) -> Outcome {
    let mut models = run.gru3.clone();
    for seed in 10..20 {
        let data = b.standard(seed)?;
        models.push((seed, b.train(&data, InputAxes::Three, seed)?));
    }
    let mut effects = DatasetConfig::default().effects;
    effects.external_field = scheduled_disturbance();
    let mut wins = 0;
    let mut ratios = Vec::new();
    for (seed, model) in models {
        let data = b.dataset(&effects, seed + 1000)?;
        let eval = evaluate(&InverseModel::Gru(model), &data, Split::Test).map_err(|e| e.to_string())?;
        let sigma = eval.sigma.ok_or("GRU evaluation carries no sigma")?;
        let (mut dist, mut nom) = ((0.0, 0usize), (0.0, 0usize));
        for (&i, s) in eval.indices.iter().zip(&sigma) {
            let acc = if data.disturbed(data.samples[i].time) {
                &mut dist
            } else {
                &mut nom
            };
            acc.0 += s[0] + s[1];
            acc.1 += 1;
        }
        if dist.1 == 0 || nom.1 == 0 {
            return Err(format!("seed {seed}: disturbed or nominal interval is empty"));
        }
        let ratio = (dist.0 / dist.1 as f64) / (nom.0 / nom.1 as f64);
        if ratio > 1.0 {
            wins += 1;
        }
        ratios.push(ratio);
    }
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    check(
        wins >= 19,
        format!("mean σ disturbed/nominal > 1 on {wins}/20 seeds, smallest ratio {min:.2} (limit ≥ 19)"),
    )
}

fn latency(b: &Bench, run: &OrderingRun) -> Outcome {
    let data = b.standard(0)?;
    let readings: Vec<[f64; 3]> = data.samples.iter().map(|s| s.reading).collect();
    let start = Instant::now();
    let mut acc = 0.0;
    for r in &readings {
        acc += b.grbf.predict(r)[0];
    }
    let grbf_us = start.elapsed().as_secs_f64() * 1e6 / readings.len() as f64;
    let gru = match run.gru3.first() {
        Some((_, m)) => m.clone(),
        None => GruModel::init(&GruConfig::default()).map_err(|e| e.to_string())?,
    };
    let start = Instant::now();
    let (out, _) = gru.forward_readings(&readings, None).map_err(|e| e.to_string())?;
    let gru_us = start.elapsed().as_secs_f64() * 1e6 / readings.len() as f64;
    std::hint::black_box((acc, out));
    check(
        grbf_us < 100.0 && gru_us < 100.0,
        format!(
            "GRBF ({} centers) {grbf_us:.2} µs/sample, GRU ({} layers × {}) {gru_us:.2} µs/sample (limit 100)",
            b.grbf.centers.len(),
            gru.layers,
            gru.hidden
        ),
    )
}

fn pipeline_determinism() -> Outcome {
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/pipeline_small.toml");
    let dirs = [
        tempfile::tempdir().map_err(|e| e.to_string())?,
        tempfile::tempdir().map_err(|e| e.to_string())?,
    ];
    for d in &dirs {
        let out = d.path().to_str().ok_or("non-UTF-8 temp path")?;
        let code = hallflex::cli_io::run(["pipeline", "--config", fixture, "--out", out]);
        if code != 0 {
            return Err(format!("pipeline exited with status {code}"));
        }
    }
    let listing = |p: &std::path::Path| -> Result<Vec<String>, String> {
        let mut names: Vec<String> = std::fs::read_dir(p)
            .map_err(|e| e.to_string())?
            .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        names.sort();
        Ok(names)
    };
    let (a, b) = (listing(dirs[0].path())?, listing(dirs[1].path())?);
    if a != b {
        return Err(format!("file sets differ: {a:?} vs {b:?}"));
    }
    let mut differing = Vec::new();
    for name in &a {
        let x = std::fs::read(dirs[0].path().join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(dirs[1].path().join(name)).map_err(|e| e.to_string())?;
        if x != y {
            differing.push(name.clone());
        }
    }
    check(
        differing.is_empty(),
        format!("{} files compared, differing: {differing:?}", a.len()),
    )
}

fn main() {
    let mut suite = Suite { failures: 0 };
    suite.run(1, "analytic field vs quadrature oracle", Some(Duration::from_secs(60)), oracle_equivalence);
    suite.run(2, "tip slope vs numerical bending integration", Some(Duration::from_secs(10)), tip_slope_reproduction);
    suite.run(3, "shape-pattern equivalence at micron motion", None, shape_pattern_equivalence);

    let sweep_outcome = default_sweep();
    match &sweep_outcome {
        Ok(s) => {
            suite.run(4, "closed-gripper interference", None, || interference(s));
            suite.run(5, "design selection picks a 3 mm magnet", None, || selection(s));
            suite.run(6, "sweep structure by material", Some(Duration::from_secs(300)), || sweep_structure(s));
        }
        Err(e) => {
            for (id, title) in [(4, "closed-gripper interference"), (5, "design selection"), (6, "sweep structure")] {
                suite.run(id, title, None, || Err(format!("sweep failed: {e}")));
            }
        }
    }

    let bench = sweep_outcome.and_then(|s| bench(&s));
    match &bench {
        Ok(b) => suite.run(7, "GRBF self-consistency", None, || grbf_self_consistency(b)),
        Err(e) => suite.run(7, "GRBF self-consistency", None, || Err(format!("benchmark setup failed: {e}"))),
    }
    suite.run(8, "GRU gradient check", Some(Duration::from_secs(10)), gradient_check);
    let learning = [
        (9, "F_z RMSE ordering GRU-3axis < GRBF < GRU-2axis"),
        (10, "uncertainty response to external field"),
        (11, "inference latency"),
    ];
    match &bench {
        Ok(b) => {
            let mut run = OrderingRun { gru3: Vec::new() };
            suite.run(9, learning[0].1, Some(Duration::from_secs(900)), || ordering(b, &mut run));
            suite.run(10, learning[1].1, None, || uncertainty_response(b, &run));
            suite.run(11, learning[2].1, None, || latency(b, &run));
        }
        Err(e) => {
            for (id, title) in learning {
                suite.run(id, title, None, || Err(format!("benchmark setup failed: {e}")));
            }
        }
    }
    suite.run(12, "pipeline determinism", None, pipeline_determinism);

    println!("acceptance: {} criteria failed", suite.failures);
    if suite.failures > 0 {
        std::process::exit(1);
    }
}
