//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

mod common;

use common::*;
use qtree::boundary_inverse::closed_contour_integral;
use qtree::charfn::{char_fn, char_fn_zero, weyl_fn, BoundaryConditions, CharFn, SpectralFn};
use qtree::kernel::{verify_representation, KernelSettings};
use qtree::pipeline::{edge_errors, forward_data, perturb_pw, perturb_white, reconstruct, sample_data, stability_sweep};
use qtree::potential::TreePotential;
use qtree::propagator::{propagate, wronskian_check};
use qtree::io::RunConfig;
use qtree::sampling::{synthesize_band_limited, CardinalSeries};
use qtree::scalar::{sqrt_upper, C};
use qtree::transition::TransitionWorkspace;
use qtree::tree::MetricTree;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

mod tol {
    pub const WRONSKIAN: f64 = 1e-9;
    pub const ZERO_FORMS: f64 = 1e-10;
    pub const SPLIT: f64 = 1e-8;
    pub const IDENTITY: f64 = 1e-8;
    pub const REPRESENTATION: f64 = 1e-6;
    /// One constant a bounds every kernel term, |term_n| ≤ aⁿQⁿ√(x^{n−1}/(n−1)!).
    pub const KERNEL_A: f64 = 1.5;
    pub const SAMPLING: f64 = 1e-6;
    pub const SAMPLING_NMAX: usize = 200;
    pub const CONTOUR_DECAY: f64 = 4.0;
    pub const SINGLE_EDGE: f64 = 0.05;
    pub const SINGLE_EDGE_FINE: f64 = 0.015;
    pub const STAR: f64 = 0.05;
    pub const FIG1: f64 = 0.08;
    pub const BAND: f64 = 3.0;
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_rho(r: &mut ChaCha8Rng, re: f64, im: f64) -> C<f64> {
    C::new(r.gen_range(-re..re), r.gen_range(-im..im))
}

fn c1_wronskian() -> Outcome {
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    let mut worst_lambda = C::new(0.0, 0.0);
    // Rounding floor ε·max|S φ^{[1]}| of evaluating W from f64 values, for the report.
    let mut floor_at_worst: f64 = 0.0;
    let mut worst_right: f64 = 0.0;
    for _ in 0..100 {
        let norm = r.gen_range(0.0..2.0);
        let e = random_edge(&mut r, 1, 1.0, 256, norm);
        let lambda = C::from_polar(r.gen_range(0.0..100.0), r.gen_range(-PI..PI));
        let sol = propagate(&e, lambda);
        let w = wronskian_check(&sol);
        if lambda.re >= 0.0 {
            worst_right = worst_right.max(w);
        }
        if w > worst {
            let q = sol.end();
            worst = w;
            worst_lambda = lambda;
            floor_at_worst = f64::EPSILON * (q.s * q.phi1).norm().max((q.s1 * q.phi).norm());
        }
    }
    outcome(
        worst <= tol::WRONSKIAN,
        format!(
            "max |W + 1| = {worst:.2e} over 100 pairs (tol {:.0e}) at λ = {worst_lambda:.1}, rounding floor there {floor_at_worst:.1e}; Re λ ≥ 0 only: {worst_right:.2e}",
            tol::WRONSKIAN
        ),
    )
}

fn c2_zero_forms() -> Outcome {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for tree in [fig1(), star4()] {
        let zero = Arc::new(TreePotential::zero(&tree, 32));
        let mut bcs = vec![BoundaryConditions::dirichlet()];
        bcs.extend(tree.leaves().into_iter().map(BoundaryConditions::neumann_at));
        let total = tree.total_length();
        for _ in 0..100 {
            let rho = random_rho(&mut r, 40.0, 3.0);
            for bc in &bcs {
                let numeric = char_fn(&tree, &zero, bc.clone()).unwrap();
                let closed = char_fn_zero(&tree, bc.clone());
                let d = closed.meta().d as i32;
                // Compare ρ^{d−1}Δ against its natural size e^{|Im ρ|𝐓}.
                let w = rho.powi(d - 1);
                let err = ((numeric.at_rho(rho) - closed.at_rho(rho)) * w).norm() / (rho.im.abs() * total).exp();
                worst = worst.max(err);
            }
        }
    }
    outcome(worst <= tol::ZERO_FORMS, format!("max scaled difference {worst:.2e} at 100 ρ per tree (tol {:.0e})", tol::ZERO_FORMS))
}

fn c3_split() -> Outcome {
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    let mut splits = 0;
    for _ in 0..20 {
        let m = r.gen_range(2..=10);
        let tree = random_tree(&mut r, m);
        let pot = random_potential(&mut r, &tree, 64, 1.0);
        let f = CharFn::on_tree(tree.clone(), pot, BoundaryConditions::dirichlet()).unwrap();
        let lambdas: Vec<C<f64>> = (0..5).map(|_| random_rho(&mut r, 30.0, 2.0).powi(2)).collect();
        for u in tree.internal_vertices() {
            splits += 1;
            for &l in &lambdas {
                let a = f.eval_split(l, None);
                let b = f.eval_split(l, Some(u));
                worst = worst.max((a - b).norm() / a.norm());
            }
        }
    }
    outcome(worst <= tol::SPLIT, format!("max relative difference {worst:.2e} over 20 trees, {splits} split vertices (tol {:.0e})", tol::SPLIT))
}

fn c4_identity() -> Outcome {
    let mut r = rng(4);
    let tree = fig1();
    let pot = random_potential(&mut r, &tree, 128, 0.9);
    let delta: Arc<dyn SpectralFn<f64>> = Arc::new(char_fn(&tree, &pot, BoundaryConditions::dirichlet()).unwrap());
    let rhos: Vec<C<f64>> = (0..50).map(|_| sqrt_upper(C::from_polar(r.gen_range(0.0..100.0), r.gen_range(-PI..PI)))).collect();
    let mut worst: f64 = 0.0;
    let mut per_k = vec![];
    for k in tree.leaves() {
        let dk: Arc<dyn SpectralFn<f64>> = Arc::new(char_fn(&tree, &pot, BoundaryConditions::neumann_at(k)).unwrap());
        if let Ok(ws) = TransitionWorkspace::new(tree.clone(), &tree.full(), k, pot.clone(), delta.clone(), dk, 0.5) {
            let res = ws.identity_residual(&rhos);
            worst = worst.max(res);
            per_k.push(format!("v{k} (T_k = {}): {res:.1e}", tree.length(k)));
        }
    }
    outcome(
        !per_k.is_empty() && worst <= tol::IDENTITY,
        format!("max |A + (Δ^D)²|/|A| at 50 λ with |λ| ≤ 100: {} (tol {:.0e})", per_k.join(", "), tol::IDENTITY),
    )
}

fn c5_representation() -> Outcome {
    let lambdas = [C::new(1.0, 0.0), C::new(4.0, 1.0), C::new(25.0, 0.0)];
    let settings = KernelSettings::default();
    let unit = |_: f64| C::new(1.0, 0.0);
    let mut r = rng(5);
    let random = random_fn(&mut r, 1.0, 1.0);
    let a = verify_representation(1.0, 256, &unit, &lambdas, &settings);
    let b = verify_representation(1.0, 256, &random, &lambdas, &settings);
    let dev = a.max_deviation.max(b.max_deviation);
    let a_max = a.fitted_a.max(b.fitted_a);
    let decays = [&a, &b].iter().all(|rep| {
        let t = &rep.term_max;
        t.windows(2).skip(1).all(|w| w[1] < w[0]) && *t.last().unwrap() <= 1e-10 * t[0]
    });
    outcome(
        dev <= tol::REPRESENTATION && a_max <= tol::KERNEL_A && decays,
        format!(
            "deviation σ≡1 {:.2e}, random {:.2e} (tol {:.0e}); fitted a {:.3}/{:.3} (≤ {}); depth {}/{}, last term {:.1e}/{:.1e}",
            a.max_deviation,
            b.max_deviation,
            tol::REPRESENTATION,
            a.fitted_a,
            b.fitted_a,
            tol::KERNEL_A,
            a.depth,
            b.depth,
            a.term_max.last().unwrap(),
            b.term_max.last().unwrap()
        ),
    )
}

fn c6_sampling() -> Outcome {
    let mut r = rng(6);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let len = r.gen_range(0.5..4.0);
        let coeffs: Vec<(f64, f64)> = (0..4).map(|_| (r.gen_range(-1.0..1.0), r.gen_range(-PI..PI))).collect();
        let f = |rho: C<f64>| synthesize_band_limited(len, &coeffs, rho);
        let s = CardinalSeries::from_fn(len, 0.5, tol::SAMPLING_NMAX, f);
        for _ in 0..100 {
            let rho = C::new(r.gen_range(-60.0..60.0), r.gen_range(-1.0..1.0));
            worst = worst.max((s.eval(rho) - f(rho)).norm());
        }
    }
    outcome(
        worst <= tol::SAMPLING,
        format!("max error {worst:.2e} with N_max = {} on 5 signals (tol {:.0e})", tol::SAMPLING_NMAX, tol::SAMPLING),
    )
}

fn c7_contour_limit() -> Outcome {
    let tree = single_edge();
    // σ, σ̃ ∈ W̊₂¹ with σ'(0) = σ̃'(0); see the ledger for the generic rate.
    let s = Arc::new(TreePotential::from_fn(&tree, 1024, |_, x| {
        let b = (PI * x).sin();
        C::new(b.powi(3) * (1.0 + 0.5 * x), 0.2 * b.powi(4))
    }));
    let t = Arc::new(TreePotential::from_fn(&tree, 1024, |_, x| C::new((PI * x).sin().powi(3) * (2.0 * x).cos(), 0.0)));
    let weyl = |p: &Arc<TreePotential<f64>>| {
        let d: Arc<dyn SpectralFn<f64>> = Arc::new(char_fn(&tree, p, BoundaryConditions::dirichlet()).unwrap());
        let dk: Arc<dyn SpectralFn<f64>> = Arc::new(char_fn(&tree, p, BoundaryConditions::neumann_at(1)).unwrap());
        weyl_fn(1, d, dk)
    };
    let (a, b) = (weyl(&s), weyl(&t));
    let mhat = |rho: C<f64>| Ok(a.at_rho(rho)? - b.at_rho(rho)?);
    let values: Vec<f64> = [10.0, 20.0, 40.0, 80.0]
        .iter()
        .map(|n| closed_contour_integral(&mhat, 0.5, PI * (n + 0.5)).map(|v| v.norm()).unwrap_or(f64::NAN))
        .collect();
    let ratios: Vec<f64> = values.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = ratios.iter().all(|&q| q >= tol::CONTOUR_DECAY);
    let shown: Vec<String> = values.iter().map(|v| format!("{v:.2e}")).collect();
    outcome(pass, format!("|∮| = [{}], ratios per |ρ| doubling {ratios:.2?} (≥ {})", shown.join(", "), tol::CONTOUR_DECAY))
}

fn c8_roundtrip() -> Outcome {
    let edge = single_edge();
    let sine = Arc::new(TreePotential::from_fn(&edge, 256, |_, x| C::new((PI * x).sin(), 0.0)));
    let run = |tree: &Arc<MetricTree<f64>>, pot: &Arc<TreePotential<f64>>, refine: bool| -> Vec<f64> {
        match forward_data(tree, pot).and_then(|d| reconstruct(&d, &settings(refine))) {
            Ok(rec) => edge_errors(pot, &rec.potential),
            Err(e) => {
                println!("    reconstruction failed: {e}");
                vec![f64::NAN; tree.m()]
            }
        }
    };
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let a0 = run(&edge, &sine, false)[0];
    let a1 = run(&edge, &sine, true)[0];
    let star = star3();
    let sp = bump_potential(&star, 256, 0.6);
    let b = run(&star, &sp, false);
    let tree = fig1();
    let fp = bump_potential(&tree, 256, 0.4);
    let c0 = run(&tree, &fp, false);
    let c1 = run(&tree, &fp, true);
    let improving = c0.iter().zip(&c1).all(|(x, y)| y < x);
    let pass = a0 <= tol::SINGLE_EDGE
        && a1 <= tol::SINGLE_EDGE_FINE
        && max(&b) <= tol::STAR
        && max(&c0) <= tol::FIG1
        && improving;
    outcome(
        pass,
        format!(
            "(a) {a0:.2e} / 2x {a1:.2e} (tol {} / {}); (b) ‖σ‖ = {:.2}, max {:.2e} (tol {}); (c) ‖σ‖ = {:.2}, max {:.2e} (tol {}), 2x max {:.2e}, strictly improving: {improving}",
            tol::SINGLE_EDGE,
            tol::SINGLE_EDGE_FINE,
            sp.l2_norm(),
            max(&b),
            tol::STAR,
            fp.l2_norm(),
            max(&c0),
            tol::FIG1,
            max(&c1)
        ),
    )
}

fn c9_stability() -> Outcome {
    let config = RunConfig::default();
    let mut lines = Vec::new();
    let mut pass = true;
    for tree in [single_edge(), star3()] {
        let pot = bump_potential(&tree, 256, 0.6);
        let report = forward_data(&tree, &pot)
            .and_then(|d| sample_data(&d, &config.data_sampling()))
            .and_then(|d| stability_sweep(&d, &[1e-2, 5e-3, 2.5e-3], &[1, 2], &config.pipeline()));
        match report {
            Ok(rep) => {
                let failed = rep.runs.iter().filter(|r| r.error.is_some()).count();
                let bands: Vec<f64> = rep.band.iter().map(|b| b.unwrap_or(f64::INFINITY)).collect();
                pass &= failed == 0 && bands.iter().all(|&b| b <= tol::BAND);
                lines.push(format!("m = {}: band {bands:.3?}, failed runs {failed}", tree.m()));
            }
            Err(e) => {
                pass = false;
                lines.push(format!("m = {}: {e}", tree.m()));
            }
        }
    }
    outcome(pass, format!("{} (tol ×{})", lines.join("; "), tol::BAND))
}

fn c10_gate() -> Outcome {
    let config = RunConfig::default();
    let tree = single_edge();
    let pot = bump_potential(&tree, 256, 0.6);
    let base = forward_data(&tree, &pot).and_then(|d| sample_data(&d, &config.data_sampling())).unwrap();
    let accepted = perturb_pw(&base, 1e-2, 7).and_then(|d| reconstruct(&d, &config.pipeline())).is_ok();
    let codes: Vec<i32> = [1e-3, 1e-2, 1e-1]
        .iter()
        .map(|&a| match perturb_white(&base, a, 7).and_then(|d| reconstruct(&d, &config.pipeline())) {
            Ok(_) => 0,
            Err(e) => e.exit_code(),
        })
        .collect();
    let pass = accepted && codes.iter().all(|&c| c == 3);
    outcome(pass, format!("PW perturbation accepted: {accepted}; white-noise exit codes {codes:?} (want 3)"))
}

fn main() {
    let criteria: [(u32, &str, f64, fn() -> Outcome); 10] = [
        (1, "Wronskian invariant", 10.0, c1_wronskian),
        (2, "zero-potential closed forms", 30.0, c2_zero_forms),
        (3, "split invariance", 120.0, c3_split),
        (4, "determinant identity", 60.0, c4_identity),
        (5, "kernel representation", 120.0, c5_representation),
        (6, "Paley-Wiener sampling", 10.0, c6_sampling),
        (7, "contour integral limit", 60.0, c7_contour_limit),
        (8, "round-trip reconstruction", 600.0, c8_roundtrip),
        (9, "empirical stability", 600.0, c9_stability),
        (10, "gate behaviour", 120.0, c10_gate),
    ];
    let mut failures = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        let pass = out.pass && secs < budget;
        failures += usize::from(!pass);
        println!(
            "{} criterion {id:>2} {name}: {} [{secs:.1} s, budget {budget} s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
