use qtree::charfn::*;
use qtree::potential::TreePotential;
use qtree::scalar::C;
fn cx(a: f64, b: f64) -> C<f64> {
    C::new(a, b)
}
use qtree::transition::*;
use qtree::tree::MetricTree;
use std::sync::Arc;

// Smooth and vanishing at both ends of every edge.
fn smooth(j: usize, x: f64, len: f64) -> C<f64> {
    let a = 0.4 + 0.1 * j as f64;
    let bump = (std::f64::consts::PI * x / len).sin().powi(2);
    cx(a * (3.0 * x).sin() + 0.2 * x * x, 0.15 * (j as f64 * x).cos()) * bump
}

fn workspace(parents: Vec<usize>, lengths: Vec<f64>, k: usize) -> (TransitionWorkspace<f64>, Arc<MetricTree<f64>>, Arc<TreePotential<f64>>) {
    let t = Arc::new(MetricTree::new(parents, lengths).unwrap());
    let p = Arc::new(TreePotential::from_fn(&t, 128, |j, x| smooth(j, x, t.length(j))));
    let d: Arc<dyn SpectralFn<f64>> = Arc::new(char_fn(&t, &p, BoundaryConditions::dirichlet()).unwrap());
    let dk: Arc<dyn SpectralFn<f64>> = Arc::new(char_fn(&t, &p, BoundaryConditions::neumann_at(k)).unwrap());
    let ws = TransitionWorkspace::new(t.clone(), &t.full(), k, p.clone(), d, dk, 0.5).unwrap();
    (ws, t, p)
}

fn direct(ws: &TransitionWorkspace<f64>, t: &Arc<MetricTree<f64>>, p: &Arc<TreePotential<f64>>, neumann: bool) -> CharFn<f64> {
    let bc = if neumann { BoundaryConditions::neumann_at(ws.dec.p) } else { BoundaryConditions::dirichlet() };
    CharFn::new(t.clone(), p.clone(), ws.dec.upper.clone(), bc).unwrap()
}

#[test]
fn determinant_is_minus_square_of_reduced_dirichlet() {
    let (ws, _, _) = workspace(vec![6, 5, 5, 5, 6, 7], vec![1.0, 0.7, 1.3, 0.9, 1.1, 0.8], 2);
    for rho in [cx(2.3, 0.5), cx(-11.0, 0.5), cx(37.2, 1.0)] {
        let v = ws.subtree_char_fns(rho * rho);
        let a = v.dd * v.nk - v.nd * v.dk;
        assert!((a + v.d_star * v.d_star).norm() <= 1e-10 * a.norm());
    }
}

#[test]
fn single_edge_lower_part_gives_minus_one() {
    let (ws, _, _) = workspace(vec![3, 3, 4], vec![1.0, 1.2, 0.8], 1);
    assert_eq!(ws.dec.reduced.edges(), &[2]);
    let (ws2, _, _) = workspace(vec![2, 3], vec![1.0, 1.0], 1);
    for rho in [cx(1.5, 0.5), cx(20.0, 0.5)] {
        let (d, _) = ws2.assemble_a(rho * rho).unwrap();
        assert!((d.a + 1.0).norm() < 1e-12);
    }
}

#[test]
fn cramer_solution_matches_direct_evaluation() {
    let (ws, t, p) = workspace(vec![6, 5, 5, 5, 6, 7], vec![1.0, 0.7, 1.3, 0.9, 1.1, 0.8], 2);
    let dn = direct(&ws, &t, &p, true);
    let dd = direct(&ws, &t, &p, false);
    for rho in [cx(3.7, 0.5), cx(-25.0, 0.5), cx(8.1, 2.0)] {
        let (d, _) = ws.assemble_a(rho * rho).unwrap();
        let n_ref = dn.at_rho(rho);
        let d_ref = dd.at_rho(rho);
        assert!((d.a1 / d.a - n_ref).norm() <= 1e-9 * n_ref.norm());
        assert!((d.a2 / d.a - d_ref).norm() <= 1e-9 * d_ref.norm());
    }
}

#[test]
fn sampled_transition_reproduces_upper_functions() {
    for (parents, lengths, k) in [
        (vec![3, 3, 4], vec![1.0, 1.2, 0.8], 1),
        (vec![6, 5, 5, 5, 6, 7], vec![1.0, 0.7, 1.3, 0.9, 1.1, 0.8], 2),
    ] {
        let (ws, t, p) = workspace(parents, lengths, k);
        let settings = SamplingSettings { start: 64, cap: 2048, tail_tol: 1e-10, gate_tail: 0.02 };
        let r = ws.sample_and_interpolate(&settings).unwrap();
        assert!(r.diagnostics.identity_residual < 1e-10);
        let dn = direct(&ws, &t, &p, true);
        let dd = direct(&ws, &t, &p, false);
        for rho in [cx(2.2, 0.5), cx(-13.4, 0.5), cx(30.0, 0.5), cx(5.0, 0.0), cx(0.7, 1.5)] {
            let en = (r.delta_n.at_rho(rho) - dn.at_rho(rho)).norm() / dn.at_rho(rho).norm().max(1e-3);
            let ed = (r.delta_d.at_rho(rho) - dd.at_rho(rho)).norm() / dd.at_rho(rho).norm().max(1e-3);
            assert!(en < 1e-4 && ed < 1e-4, "k={k} rho={rho} en={en:e} ed={ed:e}");
        }
    }
}
