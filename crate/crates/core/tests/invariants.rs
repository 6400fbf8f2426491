use nalgebra::Vector3;
use proptest::prelude::*;

use hallflex::flexure::{tip_deflection, BeamSpec, MaterialLibrary};
use hallflex::inverse_models::{
    hysteresis_apply, AxisMetrics, GrbfConfig, GrbfModel, GruConfig, GruModel, HysteresisConfig, Standardizer,
};
use hallflex::magnetostatics::{field, FieldVector, MagnetSpec, Pose};
use hallflex::transducer::{quantize, SensorSpec};

fn exterior_point() -> impl Strategy<Value = Vector3<f64>> {
    (-8e-3..8e-3f64, -8e-3..8e-3f64, 3e-3..8e-3f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantized_reading_lies_within_half_a_step(g in prop::array::uniform3(-1999.0..1999.0f64)) {
        let sensor = SensorSpec::default();
        let r = quantize(FieldVector::from_gauss(g), &sensor).unwrap();
        for (k, q) in r.gauss(&sensor).iter().enumerate() {
            prop_assert!((q - g[k]).abs() <= 0.5 * sensor.resolution + 1e-9);
        }
        prop_assert!(!r.any_saturated());
    }

    #[test]
    fn out_of_range_readings_clamp_and_flag(g in 2000.5..1e5f64, sign in prop::bool::ANY) {
        let sensor = SensorSpec::default();
        let v = if sign { g } else { -g };
        let r = quantize(FieldVector::from_gauss([v, 0.0, 0.0]), &sensor).unwrap();
        prop_assert!(r.saturated[0]);
        prop_assert_eq!(r.counts[0].abs(), sensor.max_counts());
    }

    #[test]
    fn field_moves_with_the_magnet(p in exterior_point(), t in prop::array::uniform3(-5e-3..5e-3f64)) {
        let m = MagnetSpec::cylinder(3e-3, 3e-3);
        let t = Vector3::from(t);
        let at_origin = field(&m, &Pose::identity(), &p).unwrap().vector();
        let moved = field(&m, &Pose::from_translation(t), &(p + t)).unwrap().vector();
        prop_assert!((at_origin - moved).norm() <= 1e-9 * at_origin.norm().max(1e-12));
    }

    #[test]
    fn field_scales_with_remanence(p in exterior_point(), br in 0.2..1.6f64) {
        let m = MagnetSpec::cube(2.5e-3, 2.5e-3);
        let base = field(&m.with_remanence(1.0), &Pose::identity(), &p).unwrap().vector();
        let scaled = field(&m.with_remanence(br), &Pose::identity(), &p).unwrap().vector();
        prop_assert!((scaled - base * br).norm() <= 1e-12 * scaled.norm().max(1e-15));
    }

    #[test]
    fn tip_deflection_is_odd_and_linear_in_load(p in 1.0..300.0f64, k in 0.1..3.0f64) {
        let steel = MaterialLibrary::bundled().get("steel").unwrap().clone();
        let beam = BeamSpec::new(steel, 45e-3, 3e-3, 15e-3, 0.5e-3);
        let d = tip_deflection(p, &beam).unwrap();
        prop_assert!((tip_deflection(-p, &beam).unwrap() + d).abs() <= 1e-15);
        prop_assert!((tip_deflection(k * p, &beam).unwrap() - k * d).abs() <= 1e-12 * d.abs());
    }

    #[test]
    fn squared_rmse_is_bias_plus_variance(errors in prop::collection::vec(-50.0..50.0f64, 1..200)) {
        let m = AxisMetrics::from_errors(&errors);
        let lhs = m.rmse * m.rmse;
        let rhs = m.mean_error * m.mean_error + m.error_variance;
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1.0));
    }

    #[test]
    fn zero_blend_hysteresis_is_identity(signal in prop::collection::vec(-1e-3..1e-3f64, 0..100)) {
        let cfg = HysteresisConfig { alpha: 0.0, ..HysteresisConfig::default() };
        prop_assert_eq!(hysteresis_apply(&signal, &cfg).unwrap(), signal);
    }

    #[test]
    fn hysteresis_stays_near_its_input(signal in prop::collection::vec(-5e-4..5e-4f64, 1..200)) {
        let cfg = HysteresisConfig::default();
        let out = hysteresis_apply(&signal, &cfg).unwrap();
        let gap = cfg.alpha * (1.0 / (cfg.beta + cfg.gamma) + 1e-3);
        for (x, y) in signal.iter().zip(&out) {
            prop_assert!(y.is_finite());
            prop_assert!((y - x).abs() <= gap);
        }
    }

    #[test]
    fn standardizer_round_trips(rows in prop::collection::vec(prop::array::uniform3(-1e3..1e3f64), 2..50)) {
        let slices: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let s = Standardizer::fit(slices.iter().copied(), 3, true).unwrap();
        for r in &rows {
            let z = s.apply(r);
            for k in 0..3 {
                prop_assert!((s.invert_one(k, z[k]) - r[k]).abs() <= 1e-9 * r[k].abs().max(1.0));
            }
        }
    }
}

#[test]
fn grbf_batch_prediction_matches_single_prediction() {
    let readings: Vec<[f64; 3]> = (0..60)
        .map(|i| {
            let t = i as f64 * 0.1;
            [100.0 * t.sin(), 0.0, 1400.0 + 20.0 * t.cos()]
        })
        .collect();
    let forces: Vec<[f64; 2]> = readings.iter().map(|r| [r[0] / 3.0, (r[2] - 1400.0) / 2.0]).collect();
    let cfg = GrbfConfig {
        centers: 20,
        ..GrbfConfig::default()
    };
    let model = GrbfModel::fit(&readings, &forces, &cfg, "synthetic").unwrap();
    let batch = model.predict_batch(&readings);
    for (r, b) in readings.iter().zip(&batch) {
        assert_eq!(model.predict(r), *b);
    }
}

#[test]
fn gru_sigma_is_positive_for_any_input() {
    let cfg = GruConfig {
        hidden: 6,
        ..GruConfig::default()
    };
    let model = GruModel::init(&cfg).unwrap();
    let readings: Vec<[f64; 3]> = (0..50).map(|i| [i as f64 * 40.0 - 1000.0, 5.0, -(i as f64) * 30.0]).collect();
    let (out, _) = model.forward_readings(&readings, None).unwrap();
    assert_eq!(out.len(), readings.len());
    assert!(out.iter().all(|e| e.sigma.iter().all(|s| *s > 0.0 && s.is_finite())));
}
