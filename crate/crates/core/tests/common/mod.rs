#![allow(dead_code)]

use qtree::boundary_inverse::ContourSettings;
use qtree::io::RunConfig;
use qtree::pipeline::PipelineSettings;
use qtree::potential::{EdgePotential, TreePotential};
use qtree::scalar::C;
use qtree::tree::MetricTree;
use rand::Rng;
use std::f64::consts::PI;
use std::sync::Arc;

pub const FIG1_PARENTS: [usize; 6] = [6, 5, 5, 5, 6, 7];
pub const FIG1_LENGTHS: [f64; 6] = [1.0, 0.7, 1.3, 0.9, 1.1, 0.8];

pub fn fig1() -> Arc<MetricTree<f64>> {
    Arc::new(MetricTree::new(FIG1_PARENTS.to_vec(), FIG1_LENGTHS.to_vec()).unwrap())
}

pub fn star3() -> Arc<MetricTree<f64>> {
    Arc::new(MetricTree::new(vec![3, 3, 4], vec![1.0, 1.2, 0.8]).unwrap())
}

pub fn star4() -> Arc<MetricTree<f64>> {
    Arc::new(MetricTree::new(vec![4, 4, 4, 5], vec![1.0, 0.8, 1.2, 0.9]).unwrap())
}

pub fn single_edge() -> Arc<MetricTree<f64>> {
    Arc::new(MetricTree::new(vec![2], vec![1.0]).unwrap())
}

/// Smooth potential vanishing with its first two derivatives at both ends of every edge.
pub fn bump_potential(tree: &MetricTree<f64>, cells: usize, amp: f64) -> Arc<TreePotential<f64>> {
    Arc::new(TreePotential::from_fn(tree, cells, |j, x| {
        let b = (PI * x / tree.length(j)).sin();
        C::new(amp * b * b * b * (1.0 + 0.3 * j as f64 * x), 0.0)
    }))
}

/// Random complex trigonometric function on [0, length] with L2 norm `norm`.
pub fn random_fn(rng: &mut impl Rng, length: f64, norm: f64) -> impl Fn(f64) -> C<f64> + Sync + Clone {
    let coeffs: Vec<(C<f64>, f64)> = (1..=4).map(|k| (C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)), k as f64)).collect();
    let shift: f64 = rng.gen_range(0.0..PI);
    let raw = move |x: f64| coeffs.iter().fold(C::new(0.0, 0.0), |acc, &(c, k)| acc + c * (k * PI * x / length + shift).cos());
    let (xs, ws) = qtree::quadrature::composite_gauss::<f64>(8, 32, 0.0, length);
    let n = xs.iter().zip(&ws).map(|(&x, &w)| raw(x).norm_sqr() * w).sum::<f64>().sqrt();
    move |x| raw(x) * (norm / n)
}

/// Random complex trigonometric edge potential with ‖σ‖ = `norm`.
pub fn random_edge(rng: &mut impl Rng, edge: usize, length: f64, cells: usize, norm: f64) -> EdgePotential<f64> {
    let f = random_fn(rng, length, 1.0);
    let e = EdgePotential::from_fn(edge, length, cells, f);
    let n = e.l2_norm();
    e.map(|v| v * (norm / n))
}

pub fn random_potential(rng: &mut impl Rng, tree: &MetricTree<f64>, cells: usize, norm: f64) -> Arc<TreePotential<f64>> {
    let raw: Vec<EdgePotential<f64>> = (1..=tree.m()).map(|j| random_edge(rng, j, tree.length(j), cells, 1.0)).collect();
    let pot = TreePotential::new(tree, raw).unwrap();
    let total = pot.l2_norm();
    Arc::new(pot.scale(norm / total))
}

/// Random tree with m edges; parents exceed children and the root has degree 1.
pub fn random_tree(rng: &mut impl Rng, m: usize) -> Arc<MetricTree<f64>> {
    let parents: Vec<usize> = (1..=m).map(|j| if j == m { m + 1 } else { rng.gen_range(j + 1..=m) }).collect();
    let lengths: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..1.5)).collect();
    Arc::new(MetricTree::new(parents, lengths).unwrap())
}

pub fn settings(refine: bool) -> PipelineSettings<f64> {
    let c = RunConfig::default();
    if refine {
        c.refined().pipeline()
    } else {
        c.pipeline()
    }
}

pub fn contour_settings() -> ContourSettings<f64> {
    RunConfig::default().pipeline().inverse.contour
}
