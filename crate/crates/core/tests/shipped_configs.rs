//! The config files shipped in configs/ stay loadable and valid.

use stsim_core::channel::MarkovLmsModel;
use stsim_core::sim::{ExperimentSpec, SweepSpec};

fn config(name: &str) -> String {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("reading {path:?}: {e}"))
}

#[test]
fn lms_default_parameters_load_and_validate() {
    let model = MarkovLmsModel::from_toml(&config("lms_default.toml")).unwrap();
    assert!((model.w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    // LOS carries more power than moderate, moderate more than deep.
    let p: Vec<f64> = model.states.iter().map(|s| s.mean_power()).collect();
    assert!(p[0] >= p[1] && p[1] >= p[2]);
    // L_min of 3 m at 15 m/s and the 9.14 MHz sampling rate: dwell ~ 1.8e6 uses.
    assert!(model.dwell_symbols() > 1_000_000);
}

#[test]
fn experiment_config_loads() {
    let spec: ExperimentSpec = toml::from_str(&config("exp_alamouti_eta2.toml")).unwrap();
    spec.validate().unwrap();
    assert_eq!(spec.link.eta_bpcu, 2.0);
}

#[test]
fn sweep_configs_load() {
    for name in ["sweep_eta2_desk.toml", "sweep_eta4_desk.toml"] {
        let spec: SweepSpec = toml::from_str(&config(name)).unwrap();
        spec.validate().unwrap();
        assert_eq!(spec.links.len(), 5, "{name}");
        assert_eq!(spec.beta_grid.len(), 3, "{name}");
    }
}
