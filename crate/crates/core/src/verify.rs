//! Invariant checks on a given tree and potential.

use crate::charfn::{char_fn, BoundaryConditions, CharFn, SpectralFn};
use crate::error::Result;
use crate::io::RunConfig;
use crate::kernel::{lipschitz_experiment, KernelGrid, KernelSettings, KernelTriple, LipschitzReport, RepresentationReport};
use crate::potential::TreePotential;
use crate::propagator::{propagate, wronskian_check};
use crate::scalar::C;
use crate::transition::TransitionWorkspace;
use crate::tree::MetricTree;
use serde::Serialize;
use std::sync::Arc;

/// Spectral parameters used by every check.
pub const VERIFY_LAMBDAS: [(f64, f64); 5] = [(1.0, 0.0), (4.0, 1.0), (25.0, 0.0), (-10.0, 3.0), (100.0, -5.0)];

#[derive(Clone, Debug, Serialize)]
pub struct EdgeChecks {
    pub edge: usize,
    pub wronskian_max: f64,
    pub representation: RepresentationReport,
    /// Largest kernel-difference ratio against a perturbed copy of the edge potential.
    pub lipschitz_max: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VertexResidual {
    pub vertex: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub edges: Vec<EdgeChecks>,
    /// max |A + (Δ^D)²| / |A| per admissible split vertex v_k.
    pub identity: Vec<VertexResidual>,
    /// max relative difference of Δ against the default split, per internal vertex.
    pub split_invariance: Vec<VertexResidual>,
    pub max_wronskian: f64,
    pub max_representation: f64,
    pub max_identity: f64,
    pub max_split: f64,
    /// max_identity ≤ identity_tol.
    pub identity_within_tol: bool,
}

fn lambdas() -> Vec<C<f64>> {
    VERIFY_LAMBDAS.iter().map(|&(a, b)| C::new(a, b)).collect()
}

/// Runs every check; the Lipschitz rows of each edge are returned for CSV output.
pub fn verify(tree: &Arc<MetricTree<f64>>, pot: &Arc<TreePotential<f64>>, config: &RunConfig) -> Result<(VerifyReport, Vec<(usize, LipschitzReport)>)> {
    let ks = KernelSettings { max_depth: config.kernel_depth, rel_tol: config.kernel_tol };
    let lams = lambdas();
    let mut edges = Vec::new();
    let mut lipschitz = Vec::new();
    for e in pot.edges() {
        let wronskian_max = lams.iter().map(|&l| wronskian_check(&propagate(e, l))).fold(0.0, f64::max);
        let f = |x: f64| e.value_at(x);
        let representation = crate::kernel::verify_representation(e.length(), config.kernel_cells, &f, &lams, &ks);
        let other = e.zip_with(&crate::potential::EdgePotential::from_fn(e.edge(), e.length(), e.cells(), |x| {
            C::new(0.1 * (3.0 * x).sin(), 0.05 * x)
        }), |a, b| a + b);
        let g = |x: f64| other.value_at(x);
        let a = KernelTriple::build(KernelGrid::from_fn(e.length(), config.kernel_cells, f), &ks);
        let b = KernelTriple::build(KernelGrid::from_fn(e.length(), config.kernel_cells, g), &ks);
        let diff = crate::kernel::difference_grid(e.length(), config.kernel_cells, f, g);
        let lip = lipschitz_experiment(&a, &b, &diff, (config.kernel_cells / 16).max(1));
        edges.push(EdgeChecks { edge: e.edge(), wronskian_max, representation, lipschitz_max: lip.max_ratio });
        lipschitz.push((e.edge(), lip));
    }
    let rhos: Vec<C<f64>> = lams.iter().map(|l| crate::scalar::sqrt_upper(*l)).collect();
    let delta: Arc<dyn SpectralFn<f64>> = Arc::new(char_fn(tree, pot, BoundaryConditions::dirichlet())?);
    let mut identity = Vec::new();
    for k in tree.leaves() {
        let dk: Arc<dyn SpectralFn<f64>> = Arc::new(char_fn(tree, pot, BoundaryConditions::neumann_at(k))?);
        if let Ok(ws) = TransitionWorkspace::new(tree.clone(), &tree.full(), k, pot.clone(), delta.clone(), dk, config.tau0) {
            identity.push(VertexResidual { vertex: k, residual: ws.identity_residual(&rhos) });
        }
    }
    let base = CharFn::on_tree(tree.clone(), pot.clone(), BoundaryConditions::dirichlet())?;
    let mut split_invariance = Vec::new();
    for u in tree.internal_vertices() {
        let residual = lams
            .iter()
            .map(|&l| {
                let a = base.eval(l);
                let b = base.eval_split(l, Some(u));
                (a - b).norm() / a.norm().max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max);
        split_invariance.push(VertexResidual { vertex: u, residual });
    }
    let maxr = |v: &[VertexResidual]| v.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok((
        VerifyReport {
            max_wronskian: edges.iter().map(|e| e.wronskian_max).fold(0.0, f64::max),
            max_representation: edges.iter().map(|e| e.representation.max_deviation).fold(0.0, f64::max),
            max_identity: maxr(&identity),
            identity_within_tol: maxr(&identity) <= config.identity_tol,
            max_split: maxr(&split_invariance),
            edges,
            identity,
            split_invariance,
        },
        lipschitz,
    ))
}
