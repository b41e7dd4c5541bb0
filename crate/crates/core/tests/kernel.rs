mod common;

use common::*;
use qtree::kernel::{difference_grid, lipschitz_experiment, verify_representation, KernelGrid, KernelSettings, KernelTriple};
use qtree::scalar::C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Frozen Lipschitz constant for pairs in the unit ball on [0, 1].
const LIPSCHITZ_C: f64 = 2.0;

#[test]
fn kernels_are_lipschitz_in_the_potential() {
    let mut r = ChaCha8Rng::seed_from_u64(21);
    let settings = KernelSettings::default();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let na = r.gen_range(0.1..1.0);
        let nb = r.gen_range(0.1..1.0);
        let f = random_fn(&mut r, 1.0, na);
        let g = random_fn(&mut r, 1.0, nb);
        let a = KernelTriple::build(KernelGrid::from_fn(1.0, 128, &f), &settings);
        let b = KernelTriple::build(KernelGrid::from_fn(1.0, 128, &g), &settings);
        let hat = difference_grid(1.0, 128, &f, &g);
        let rep = lipschitz_experiment(&a, &b, &hat, 8);
        worst = worst.max(rep.max_ratio.unwrap());
    }
    println!("max Lipschitz ratio {worst:.3}");
    assert!(worst <= LIPSCHITZ_C, "{worst}");
}

#[test]
fn identical_potentials_give_no_ratio() {
    let f = random_fn(&mut ChaCha8Rng::seed_from_u64(22), 1.0, 0.5);
    let a = KernelTriple::build(KernelGrid::from_fn(1.0, 64, &f), &KernelSettings::default());
    let hat = difference_grid(1.0, 64, &f, &f);
    assert!(lipschitz_experiment(&a, &a, &hat, 4).max_ratio.is_none());
}

#[test]
fn series_terms_decay_factorially() {
    let f = |_: f64| C::new(1.0, 0.0);
    let t = KernelTriple::build(KernelGrid::from_fn(1.0, 256, f), &KernelSettings { max_depth: 12, rel_tol: 0.0 });
    let m = &t.term_max;
    assert_eq!(m.len(), 13);
    for n in 2..m.len() {
        assert!(m[n] < m[n - 1] / (n as f64 / 2.0).max(1.0), "term {n}: {m:?}");
    }
    // Observed magnitude of term 9 for σ ≡ 1 on [0, 1].
    assert!(m[9] > 1e-7 && m[9] < 1e-6, "{:.2e}", m[9]);
}

#[test]
fn representation_improves_under_refinement() {
    let f = random_fn(&mut ChaCha8Rng::seed_from_u64(23), 1.0, 1.0);
    let lambdas = [C::new(4.0, 1.0), C::new(25.0, 0.0)];
    let s = KernelSettings::default();
    let coarse = verify_representation(1.0, 32, &f, &lambdas, &s).max_deviation;
    let fine = verify_representation(1.0, 64, &f, &lambdas, &s).max_deviation;
    assert!(fine < coarse / 2.0, "{coarse:.2e} -> {fine:.2e}");
}

#[test]
fn zero_potential_has_zero_kernels() {
    let t = KernelTriple::build(KernelGrid::from_fn(1.0, 32, |_| C::new(0.0, 0.0)), &KernelSettings::default());
    assert_eq!(t.k.max_abs(), 0.0);
    assert_eq!(t.n.max_abs(), 0.0);
}
