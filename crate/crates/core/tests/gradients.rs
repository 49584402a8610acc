use std::time::Instant;

use drowsy_core::model::{build_d2cnn_fld, ModelConfig};
use drowsy_core::nn::gradcheck::{check_layer, check_network, small_network_spec, LayerKind};

const INSTANCES: u64 = 20;
const TOLERANCE: f64 = 1e-4;

#[test]
fn every_layer_kind_matches_finite_differences() {
    let start = Instant::now();
    for kind in LayerKind::ALL {
        for seed in 0..INSTANCES {
            let err = check_layer(kind, seed).unwrap();
            assert!(err < TOLERANCE, "{} seed {seed}: relative error {err:e}", kind.name());
        }
    }
    assert!(start.elapsed().as_secs_f64() < 30.0);
}

#[test]
fn small_network_parameter_gradients() {
    let spec = small_network_spec();
    for seed in 0..INSTANCES {
        let err = check_network(&spec, seed).unwrap();
        assert!(err < TOLERANCE, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn budgeted_cnn_parameter_gradients() {
    let spec = build_d2cnn_fld(&ModelConfig::default()).unwrap();
    let err = check_network(&spec, 3).unwrap();
    assert!(err < TOLERANCE, "relative error {err:e}");
}
