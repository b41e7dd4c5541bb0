//! Vertex transition: from the pair (Δ_k^D, Δ_k^N) on a tree and the recovered
//! potentials on g_p to the pair (Δ_p^D, Δ_p^N) on G_p.
//!
//! With D/N at v_k and D/K at v_p the system
//! `Δ = Δ^{DD} Δ_p^N + Δ^{DK} Δ_p^D`, `Δ_k = Δ^{ND} Δ_p^N + Δ^{NK} Δ_p^D`
//! is solved by Cramer's rule, sampled on ν_n = πn/𝒯 + iτ and interpolated.

use crate::charfn::{
    dirichlet_product, kappa_noise_floor, kirchhoff, BoundaryConditions, Recursion, SampledCharFn, SpectralFn, ZeroCharFn,
};
use crate::error::{Error, Result};
use crate::potential::TreePotential;
use crate::propagator::{endpoint, Quad};
use crate::sampling::{truncate_by_tail, CardinalSeries};
use crate::scalar::{cone, cpowi, czero, lit, to_f64, Real, C};
use crate::tree::{MetricTree, SubtreeDecomposition, SubtreeView};
use std::sync::Arc;

/// Characteristic functions of g_p and g_p* at one λ.
#[derive(Clone, Copy, Debug)]
pub struct SubtreeValues<T> {
    pub dd: C<T>,
    pub dk: C<T>,
    pub nd: C<T>,
    pub nk: C<T>,
    /// Δ^D, Δ^K on g_p*.
    pub d_star: C<T>,
    pub k_star: C<T>,
    /// Edge e_k at x = T_k.
    pub edge: Quad<C<T>>,
}

#[derive(Clone, Copy, Debug)]
pub struct Determinants<T> {
    pub a: C<T>,
    pub a1: C<T>,
    pub a2: C<T>,
}

pub struct TransitionWorkspace<T: Real> {
    pub tree: Arc<MetricTree<T>>,
    pub dec: SubtreeDecomposition,
    pub potential: Arc<TreePotential<T>>,
    /// Δ := Δ_k^D and Δ_k := Δ_k^N on `dec.whole`.
    pub delta: Arc<dyn SpectralFn<T>>,
    pub delta_k: Arc<dyn SpectralFn<T>>,
    pub zero_d: Arc<ZeroCharFn<T>>,
    pub zero_n: Arc<ZeroCharFn<T>>,
    pub tau: T,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct TransitionDiagnostics {
    pub pivot: usize,
    pub via: usize,
    pub n_max: i64,
    pub tail_fraction_n: f64,
    pub tail_fraction_d: f64,
    pub tail_converged: bool,
    pub identity_residual: f64,
}

pub struct TransitionResult<T> {
    pub delta_d: SampledCharFn<T>,
    pub delta_n: SampledCharFn<T>,
    pub diagnostics: TransitionDiagnostics,
}

#[derive(Clone, Debug)]
pub struct SamplingSettings<T> {
    pub start: usize,
    pub cap: usize,
    pub tail_tol: T,
    pub gate_tail: T,
}

impl<T: Real> TransitionWorkspace<T> {
    pub fn new(
        tree: Arc<MetricTree<T>>,
        whole: &SubtreeView,
        k: usize,
        potential: Arc<TreePotential<T>>,
        delta: Arc<dyn SpectralFn<T>>,
        delta_k: Arc<dyn SpectralFn<T>>,
        tau: T,
    ) -> Result<Self> {
        let dec = SubtreeDecomposition::new(&tree, whole, k)?;
        let zero_d = ZeroCharFn::new(tree.clone(), dec.upper.clone(), BoundaryConditions::dirichlet());
        let zero_n = ZeroCharFn::new(tree.clone(), dec.upper.clone(), BoundaryConditions::neumann_at(dec.p));
        Ok(Self { tree, dec, potential, delta, delta_k, zero_d, zero_n, tau })
    }

    pub fn upper_length(&self) -> T {
        self.dec.upper_length(&self.tree)
    }

    /// The four g_p functions plus Δ^D, Δ^K on g_p*.
    pub fn subtree_char_fns(&self, lambda: C<T>) -> SubtreeValues<T> {
        let quads: Vec<Option<Quad<C<T>>>> = (1..=self.tree.m())
            .map(|e| self.dec.lower.contains(e).then(|| endpoint(self.potential.edge(e), lambda)))
            .collect();
        let q = quads[self.dec.k - 1].expect("e_k in g_p");
        let (d_star, k_star) = if self.dec.reduced.edges().is_empty() {
            (cone(), czero())
        } else {
            let bc = BoundaryConditions::dirichlet();
            let rec = Recursion::new(&self.tree, &self.dec.reduced, &bc, |e| quads[e - 1].expect("edge in g_p"));
            let pairs = rec.branches_at(self.dec.p);
            (dirichlet_product(&pairs), kirchhoff(&pairs))
        };
        SubtreeValues {
            dd: q.s * d_star,
            dk: q.s * k_star + q.s1 * d_star,
            nd: q.phi * d_star,
            nk: q.phi * k_star + q.phi1 * d_star,
            d_star,
            k_star,
            edge: q,
        }
    }

    pub fn assemble_a(&self, lambda: C<T>) -> Result<(Determinants<T>, SubtreeValues<T>)> {
        let v = self.subtree_char_fns(lambda);
        let delta = self.delta.at_lambda(lambda);
        let delta_k = self.delta_k.at_lambda(lambda);
        let a = v.dd * v.nk - v.nd * v.dk;
        if !(a.norm() > T::min_positive_value() * lit(1e10)) {
            return Err(Error::numerical(format!("A vanishes at lambda = {lambda}; resample with a shifted line")));
        }
        let a1 = delta * v.nk - delta_k * v.dk;
        let a2 = v.dd * delta_k - v.nd * delta;
        Ok((Determinants { a, a1, a2 }, v))
    }

    fn remainders(&self, nu: C<T>) -> Result<(C<T>, C<T>)> {
        let bp = self.dec.big_b_p as i32;
        let (d, _) = self.assemble_a(nu * nu)?;
        let kn = cpowi(nu, bp - 2) * (d.a1 / d.a - self.zero_n.at_rho(nu));
        let kd = cpowi(nu, bp - 1) * (d.a2 / d.a - self.zero_d.at_rho(nu));
        Ok((kn, kd))
    }

    /// κ_p^{N/D}(ν_n), truncation by the tail rule, and the decay gate.
    pub fn sample_and_interpolate(&self, settings: &SamplingSettings<T>) -> Result<TransitionResult<T>> {
        let len = self.upper_length();
        let failure = std::sync::Mutex::new(None::<Error>);
        let eval = |nu: C<T>| -> (C<T>, C<T>) {
            match self.remainders(nu) {
                Ok(v) => v,
                Err(e) => {
                    *failure.lock().expect("poisoned") = Some(e);
                    (czero(), czero())
                }
            }
        };
        // Sample both sequences together; the tail rule watches their sum of energies.
        let floor_n = kappa_noise_floor(&self.zero_n, self.tau);
        let floor_d = kappa_noise_floor(&self.zero_d, self.tau);
        let floor = floor_n.max(floor_d);
        let both = truncate_by_tail(len, self.tau, settings.start, settings.cap, settings.tail_tol, floor, |nu| {
            let (a, b) = eval(nu);
            C::new((a.norm_sqr() + b.norm_sqr()).sqrt(), T::zero())
        });
        if let Some(e) = failure.lock().expect("poisoned").take() {
            return Err(e);
        }
        let n_max = both.series.n_max();
        let pairs: Vec<(C<T>, C<T>)> = {
            use rayon::prelude::*;
            (-n_max..=n_max).into_par_iter().map(|n| eval(crate::sampling::node(len, self.tau, n))).collect()
        };
        if let Some(e) = failure.lock().expect("poisoned").take() {
            return Err(e);
        }
        let sn = CardinalSeries { length: len, tau: self.tau, n_min: -n_max, samples: pairs.iter().map(|p| p.0).collect() };
        let sd = CardinalSeries { length: len, tau: self.tau, n_min: -n_max, samples: pairs.iter().map(|p| p.1).collect() };
        let (tn, td) = (sn.tail_fraction_above(floor_n), sd.tail_fraction_above(floor_d));
        let worst = tn.max(td);
        if !(worst <= settings.gate_tail) {
            return Err(Error::gate(format!(
                "transition samples at v{} do not decay: outer tail carries {:.3e} of the energy",
                self.dec.p,
                to_f64(worst)
            )));
        }
        let identity_residual = self.identity_residual(&[C::new(lit(3.1), self.tau), C::new(lit(-17.3), self.tau), C::new(lit(41.0), self.tau)]);
        Ok(TransitionResult {
            delta_d: SampledCharFn::new(self.zero_d.clone(), sd, None),
            delta_n: SampledCharFn::new(self.zero_n.clone(), sn, None),
            diagnostics: TransitionDiagnostics {
                pivot: self.dec.p,
                via: self.dec.k,
                n_max,
                tail_fraction_n: to_f64(tn),
                tail_fraction_d: to_f64(td),
                tail_converged: both.converged,
                identity_residual,
            },
        })
    }

    /// max |A + (Δ^D)²| / |A| over the given ρ.
    pub fn identity_residual(&self, rhos: &[C<T>]) -> f64 {
        rhos.iter()
            .map(|&r| {
                let v = self.subtree_char_fns(r * r);
                let a = v.dd * v.nk - v.nd * v.dk;
                to_f64((a + v.d_star * v.d_star).norm() / a.norm())
            })
            .fold(0.0, f64::max)
    }
}
