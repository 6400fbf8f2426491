use pyo3::prelude::*;

fn with_module<R>(f: impl FnOnce(Python<'_>, &Bound<'_, PyModule>) -> R) -> R {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "hallflex").unwrap();
        hallflex_py::hallflex_py(&m).unwrap();
        f(py, &m)
    })
}

#[test]
fn magnet_field_matches_oracle_through_python() {
    with_module(|_, m| {
        let magnet = m.getattr("Magnet").unwrap().call1(("sphere", 2e-3)).unwrap();
        let p = [1e-3, 0.5e-3, 3e-3];
        let a: [f64; 3] = magnet.call_method1("field", (p,)).unwrap().extract().unwrap();
        let o: [f64; 3] = magnet.call_method1("field_oracle", (p,)).unwrap().extract().unwrap();
        for k in 0..3 {
            assert!((a[k] - o[k]).abs() <= 1e-9 * o[k].abs().max(1e-9));
        }
    });
}

#[test]
fn invalid_material_raises_value_error() {
    with_module(|py, m| {
        let err = m
            .getattr("Beam")
            .unwrap()
            .call1(("unobtainium", 45e-3, 3e-3, 15e-3))
            .unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
    });
}

#[test]
fn grbf_model_fits_and_evaluates() {
    with_module(|_, m| {
        let beam = m.getattr("Beam").unwrap().call1(("steel", 45e-3, 3e-3, 15e-3)).unwrap();
        let magnet = m.getattr("Magnet").unwrap().call1(("cylinder", 3e-3, 3e-3)).unwrap();
        let unit = m.getattr("SensingUnit").unwrap().call1((beam, magnet, 1.5e-3)).unwrap();
        let cal = m.getattr("Dataset").unwrap().call_method1("calibration", (&unit, 11)).unwrap();
        let data = m
            .getattr("Dataset")
            .unwrap()
            .call_method1("synthesize", (&unit, 4u64, 5.0, false, false, false))
            .unwrap();
        let model = m.getattr("Model").unwrap().call_method1("fit_grbf", (cal, 50)).unwrap();
        let metrics = model.call_method1("evaluate", (data, "test")).unwrap();
        let rmse: f64 = metrics.get_item("fx").unwrap().get_item("rmse").unwrap().extract().unwrap();
        assert!(rmse < 5.0, "rmse {rmse}");
        let label: String = model.getattr("label").unwrap().extract().unwrap();
        assert_eq!(label, "ideal-grbf");
    });
}
