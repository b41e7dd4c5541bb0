mod common;

use common::*;
use qtree::io::RunConfig;
use qtree::pipeline::{data_distance, edge_errors, forward_data, perturb_white, reconstruct, sample_data, stability_sweep};
use qtree::potential::TreePotential;
use qtree::scalar::C;
use std::sync::Arc;

#[test]
fn forward_single_edge_zero_is_closed_form() {
    let tree = single_edge();
    let data = forward_data(&tree, &Arc::new(TreePotential::zero(&tree, 16))).unwrap();
    let leaf = tree.leaves()[0];
    for rho in [C::new(0.7, 0.0), C::new(3.0, 0.5), C::new(-12.0, 2.0)] {
        assert!((data.delta.at_rho(rho) - rho.sin() / rho).norm() < 1e-12);
        assert!((data.delta_k[&leaf].at_rho(rho) - rho.cos()).norm() < 1e-12);
    }
}

#[test]
fn zero_data_reconstructs_zero_within_iteration_bound() {
    let tree = fig1();
    let config = RunConfig::default();
    let pot = Arc::new(TreePotential::zero(&tree, 16));
    let data = sample_data(&forward_data(&tree, &pot).unwrap(), &config.data_sampling()).unwrap();
    let rec = reconstruct(&data, &config.pipeline()).unwrap();
    for (j, e) in rec.potential.edges().iter().enumerate() {
        assert!(e.l2_norm() <= 1e-6, "e{}: {:.2e}", j + 1, e.l2_norm());
    }
    assert!(rec.iterations <= tree.m(), "{} iterations", rec.iterations);
    assert_eq!(rec.transitions.len(), tree.internal_vertices().len());
}

#[test]
fn forward_of_reconstruction_reproduces_data() {
    let tree = star3();
    let config = RunConfig::default();
    let pot = bump_potential(&tree, 256, 0.8);
    let data = sample_data(&forward_data(&tree, &pot).unwrap(), &config.data_sampling()).unwrap();
    let rec = reconstruct(&data, &config.pipeline()).unwrap();
    let errors = edge_errors(&pot, &rec.potential);
    assert!(errors.iter().all(|&e| e < 1e-2), "{errors:?}");
    let again = sample_data(&forward_data(&tree, &Arc::new(rec.potential)).unwrap(), &config.data_sampling()).unwrap();
    let zero = sample_data(&forward_data(&tree, &Arc::new(TreePotential::zero(&tree, 16))).unwrap(), &config.data_sampling()).unwrap();
    let settings = config.pipeline();
    let drift = data_distance(&data, &again, &settings).unwrap().delta;
    let size = data_distance(&data, &zero, &settings).unwrap().delta;
    assert!(drift < 0.02 * size, "drift {drift:.2e} against size {size:.2e}");
}

#[test]
fn white_noise_is_rejected_by_the_gate() {
    let tree = single_edge();
    let config = RunConfig::default();
    let pot = bump_potential(&tree, 128, 0.5);
    let data = sample_data(&forward_data(&tree, &pot).unwrap(), &config.data_sampling()).unwrap();
    let noisy = perturb_white(&data, 1e-3, 5).unwrap();
    let err = reconstruct(&noisy, &config.pipeline()).err().expect("noisy data accepted");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn sweep_is_deterministic() {
    let tree = single_edge();
    let config = RunConfig::default();
    let pot = bump_potential(&tree, 128, 0.5);
    let data = sample_data(&forward_data(&tree, &pot).unwrap(), &config.data_sampling()).unwrap();
    let run = || serde_json::to_string(&stability_sweep(&data, &[1e-3, 4e-3], &[1, 2], &config.pipeline()).unwrap()).unwrap();
    assert_eq!(run(), run());
}
