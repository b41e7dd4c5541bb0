//! Characteristic functions of tree boundary value problems.
//!
//! Δ is built by splitting at an internal vertex `u`: every branch at `u`
//! contributes a pair (value with Dirichlet at `u`, value with Neumann at `u`)
//! and the Kirchhoff combination `Σ_i N_i Π_{k≠i} D_i` gives Δ. Branches are
//! evaluated the same way, recursively, so one pass per λ suffices.

mod exppoly;
mod remainder;
mod sampled;

pub use exppoly::ExpPoly;
pub use sampled::{kappa_noise_floor, SampledCharFn};
pub use remainder::{
    extract_remainder, l2_difference, spectral_distance, weight_for, weyl_fn, DistanceReport, DistanceTerm,
    RemainderSamples, WeylFn,
};

use crate::potential::TreePotential;
use crate::propagator::{endpoint, zero_potential_quad, Quad};
use crate::scalar::{cpowi, creal, sqrt_upper, Real, C};
use crate::tree::{MetricTree, SubtreeView};
use std::sync::Arc;

/// Commutative ring the recursion runs over: complex numbers or exponential polynomials.
pub trait Ring: Clone {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
}

impl<T: Real> Ring for C<T> {
    fn zero() -> Self {
        C::new(T::zero(), T::zero())
    }
    fn one() -> Self {
        C::new(T::one(), T::zero())
    }
    fn add(&self, other: &Self) -> Self {
        *self + *other
    }
    fn mul(&self, other: &Self) -> Self {
        *self * *other
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bc {
    Dirichlet,
    Neumann,
}

/// Partition of the boundary of a (sub)tree: the listed vertices carry
/// Neumann conditions, every other boundary vertex Dirichlet.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BoundaryConditions {
    neumann: Vec<usize>,
}

impl BoundaryConditions {
    pub fn dirichlet() -> Self {
        Self { neumann: Vec::new() }
    }

    pub fn neumann_at(v: usize) -> Self {
        Self { neumann: vec![v] }
    }

    pub fn with_neumann(mut vs: Vec<usize>) -> Self {
        vs.sort_unstable();
        vs.dedup();
        Self { neumann: vs }
    }

    pub fn at(&self, v: usize) -> Bc {
        if self.neumann.binary_search(&v).is_ok() {
            Bc::Neumann
        } else {
            Bc::Dirichlet
        }
    }

    pub fn neumann(&self) -> &[usize] {
        &self.neumann
    }

    /// Number of Dirichlet vertices on the boundary of `view`.
    pub fn dirichlet_count(&self, view: &SubtreeView) -> usize {
        view.boundary_vertices().iter().filter(|&&v| self.at(v) == Bc::Dirichlet).count()
    }

    pub fn validate(&self, view: &SubtreeView) -> crate::Result<()> {
        let bnd = view.boundary_vertices();
        for v in &self.neumann {
            if !bnd.contains(v) {
                return Err(crate::Error::input(format!(
                    "Neumann condition at v{v}, which is not a boundary vertex"
                )));
            }
        }
        Ok(())
    }
}

/// Edge table: value with condition `a` at x = 0 and `b` at x = T.
pub fn edge_value<R: Clone>(q: &Quad<R>, a: Bc, b: Bc) -> R {
    match (a, b) {
        (Bc::Dirichlet, Bc::Dirichlet) => q.s.clone(),
        (Bc::Dirichlet, Bc::Neumann) => q.s1.clone(),
        (Bc::Neumann, Bc::Dirichlet) => q.phi.clone(),
        (Bc::Neumann, Bc::Neumann) => q.phi1.clone(),
    }
}

/// Σ_i N_i Π_{k≠i} D_k over branch pairs `(D_i, N_i)`.
pub fn kirchhoff<R: Ring>(pairs: &[(R, R)]) -> R {
    let n = pairs.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(R::one());
    for (d, _) in pairs {
        let last = prefix.last().expect("nonempty").mul(d);
        prefix.push(last);
    }
    let mut suffix = R::one();
    let mut acc = R::zero();
    for i in (0..n).rev() {
        acc = acc.add(&pairs[i].1.mul(&prefix[i]).mul(&suffix));
        suffix = suffix.mul(&pairs[i].0);
    }
    acc
}

pub fn dirichlet_product<R: Ring>(pairs: &[(R, R)]) -> R {
    pairs.iter().fold(R::one(), |a, (d, _)| a.mul(d))
}

/// Recursion context: a view, its boundary conditions and per-edge quads.
pub struct Recursion<'a, T, R, F> {
    pub tree: &'a MetricTree<T>,
    pub view: &'a SubtreeView,
    pub bc: &'a BoundaryConditions,
    pub quad: F,
    _r: std::marker::PhantomData<R>,
}

impl<'a, T: Real, R: Ring, F: Fn(usize) -> Quad<R>> Recursion<'a, T, R, F> {
    pub fn new(tree: &'a MetricTree<T>, view: &'a SubtreeView, bc: &'a BoundaryConditions, quad: F) -> Self {
        Self { tree, view, bc, quad, _r: std::marker::PhantomData }
    }

    /// Branch through edge `e` seen from vertex `u`: (Dirichlet at u, Neumann at u).
    pub fn branch(&self, u: usize, e: usize) -> (R, R) {
        let (a, b) = self.tree.ends(e);
        let w = if a == u { b } else { a };
        let u_at_start = a == u;
        let q = (self.quad)(e);
        let ev = |cu: Bc, cw: Bc| {
            if u_at_start {
                edge_value(&q, cu, cw)
            } else {
                edge_value(&q, cw, cu)
            }
        };
        if self.view.degree(w) == 1 {
            let cw = self.bc.at(w);
            return (ev(Bc::Dirichlet, cw), ev(Bc::Neumann, cw));
        }
        let sub: Vec<(R, R)> = self
            .view
            .incident(self.tree, w)
            .into_iter()
            .filter(|&f| f != e)
            .map(|f| self.branch(w, f))
            .collect();
        let pd = dirichlet_product(&sub);
        let k = kirchhoff(&sub);
        let val = |cu: Bc| ev(cu, Bc::Neumann).mul(&pd).add(&ev(cu, Bc::Dirichlet).mul(&k));
        (val(Bc::Dirichlet), val(Bc::Neumann))
    }

    /// All branch pairs at `u`.
    pub fn branches_at(&self, u: usize) -> Vec<(R, R)> {
        self.view.incident(self.tree, u).into_iter().map(|e| self.branch(u, e)).collect()
    }

    /// Δ of the view, split at `u` (or the single-edge base case).
    pub fn evaluate(&self, split: Option<usize>) -> R {
        if self.view.edges().len() == 1 {
            let e = self.view.edges()[0];
            let (a, b) = self.tree.ends(e);
            return edge_value(&(self.quad)(e), self.bc.at(a), self.bc.at(b));
        }
        let u = split.unwrap_or_else(|| default_split(self.view));
        kirchhoff(&self.branches_at(u))
    }
}

/// Largest-index internal vertex, i.e. the one nearest the root.
pub fn default_split(view: &SubtreeView) -> usize {
    *view.internal_vertices().last().expect("multi-edge view has an internal vertex")
}

/// Metadata shared by every characteristic function.
#[derive(Clone, Debug, PartialEq)]
pub struct CharMeta<T> {
    /// Boundary vertex count of the underlying (sub)tree.
    pub b: usize,
    /// Number of Dirichlet boundary vertices.
    pub d: usize,
    pub total_length: T,
}

/// Anything that evaluates Δ(ρ²) and knows its zero-potential reference.
pub trait SpectralFn<T: Real>: Send + Sync {
    fn at_rho(&self, rho: C<T>) -> C<T>;

    fn at_lambda(&self, lambda: C<T>) -> C<T> {
        self.at_rho(sqrt_upper(lambda))
    }

    fn meta(&self) -> &CharMeta<T>;

    fn zero_form(&self) -> &Arc<ZeroCharFn<T>>;

    /// The sampled representation, when the function is held as samples.
    fn as_any_sampled(&self) -> Option<&SampledCharFn<T>> {
        None
    }

    /// κ(ρ) = ρ^{d−1}(Δ(ρ²) − Δ⁰(ρ²)); for d = 0 the additive Δ(0) is removed as well.
    fn kappa(&self, rho: C<T>) -> C<T> {
        let d = self.meta().d as i32;
        let diff = self.at_rho(rho) - self.zero_form().at_rho(rho);
        if d == 0 {
            let c0 = self.at_rho(C::new(T::zero(), T::zero()));
            (diff - c0) / rho
        } else {
            diff * cpowi(rho, d - 1)
        }
    }
}

/// Closed form Δ⁰(ρ²) = ρ^{1−d} P(ρ) for σ ≡ 0, built symbolically.
#[derive(Clone, Debug)]
pub struct ZeroCharFn<T> {
    tree: Arc<MetricTree<T>>,
    view: SubtreeView,
    bc: BoundaryConditions,
    poly: ExpPoly<T>,
    compiled: Vec<(i32, T, C<T>)>,
    meta: CharMeta<T>,
    zero_self: Option<Arc<ZeroCharFn<T>>>,
}

impl<T: Real> ZeroCharFn<T> {
    pub fn new(tree: Arc<MetricTree<T>>, view: SubtreeView, bc: BoundaryConditions) -> Arc<Self> {
        let m = tree.m();
        let lengths = tree.lengths().to_vec();
        let poly = {
            let rec = Recursion::new(&tree, &view, &bc, |e| Quad {
                s: ExpPoly::sin(m, e, -1),
                s1: ExpPoly::cos(m, e, 0),
                phi: ExpPoly::cos(m, e, 0),
                phi1: ExpPoly::sin(m, e, 1).scale(creal(-T::one())),
            });
            rec.evaluate(None)
        };
        let compiled = poly.compile(&lengths);
        let meta = CharMeta {
            b: view.boundary_count(),
            d: bc.dirichlet_count(&view),
            total_length: view.total_length(&tree),
        };
        let inner = Arc::new(Self { tree, view, bc, poly, compiled, meta, zero_self: None });
        let mut outer = (*inner).clone();
        outer.zero_self = Some(inner);
        Arc::new(outer)
    }

    pub fn poly(&self) -> &ExpPoly<T> {
        &self.poly
    }

    pub fn view(&self) -> &SubtreeView {
        &self.view
    }

    pub fn bc(&self) -> &BoundaryConditions {
        &self.bc
    }

    pub fn tree(&self) -> &Arc<MetricTree<T>> {
        &self.tree
    }

    /// Same value via the numeric recursion with closed-form trig edge values.
    pub fn at_lambda_recursive(&self, lambda: C<T>) -> C<T> {
        let rec = Recursion::new(&self.tree, &self.view, &self.bc, |e| {
            zero_potential_quad(self.tree.length(e), lambda)
        });
        rec.evaluate(None)
    }
}

impl<T: Real> SpectralFn<T> for ZeroCharFn<T> {
    fn at_rho(&self, rho: C<T>) -> C<T> {
        // Individual terms carry ρ^{1−d}; near the origin the recursion is better conditioned.
        if rho.norm() < T::one() {
            self.at_lambda_recursive(rho * rho)
        } else {
            exppoly::eval_compiled(&self.compiled, rho)
        }
    }

    fn at_lambda(&self, lambda: C<T>) -> C<T> {
        self.at_rho(sqrt_upper(lambda))
    }

    fn meta(&self) -> &CharMeta<T> {
        &self.meta
    }

    fn zero_form(&self) -> &Arc<ZeroCharFn<T>> {
        self.zero_self.as_ref().expect("set at construction")
    }

    fn kappa(&self, _rho: C<T>) -> C<T> {
        C::new(T::zero(), T::zero())
    }
}

/// Δ for a given potential, evaluated by propagation plus recursion.
#[derive(Clone)]
pub struct CharFn<T> {
    tree: Arc<MetricTree<T>>,
    potential: Arc<TreePotential<T>>,
    view: SubtreeView,
    bc: BoundaryConditions,
    split: Option<usize>,
    zero: Arc<ZeroCharFn<T>>,
}

impl<T: Real> CharFn<T> {
    pub fn new(
        tree: Arc<MetricTree<T>>,
        potential: Arc<TreePotential<T>>,
        view: SubtreeView,
        bc: BoundaryConditions,
    ) -> crate::Result<Self> {
        bc.validate(&view)?;
        if potential.m() != tree.m() {
            return Err(crate::Error::input("potential does not match tree"));
        }
        let zero = ZeroCharFn::new(tree.clone(), view.clone(), bc.clone());
        Ok(Self { tree, potential, view, bc, split: None, zero })
    }

    /// Δ on the whole tree.
    pub fn on_tree(
        tree: Arc<MetricTree<T>>,
        potential: Arc<TreePotential<T>>,
        bc: BoundaryConditions,
    ) -> crate::Result<Self> {
        let view = tree.full();
        Self::new(tree, potential, view, bc)
    }

    pub fn with_split(mut self, u: usize) -> crate::Result<Self> {
        if self.view.degree(u) < 2 {
            return Err(crate::Error::input(format!("v{u} is not internal")));
        }
        self.split = Some(u);
        Ok(self)
    }

    pub fn view(&self) -> &SubtreeView {
        &self.view
    }

    pub fn bc(&self) -> &BoundaryConditions {
        &self.bc
    }

    pub fn tree(&self) -> &Arc<MetricTree<T>> {
        &self.tree
    }

    pub fn potential(&self) -> &Arc<TreePotential<T>> {
        &self.potential
    }

    pub fn edge_quads(&self, lambda: C<T>) -> Vec<Option<Quad<C<T>>>> {
        let mut q = vec![None; self.tree.m()];
        for &e in self.view.edges() {
            q[e - 1] = Some(endpoint(self.potential.edge(e), lambda));
        }
        q
    }

    pub fn eval_split(&self, lambda: C<T>, split: Option<usize>) -> C<T> {
        let quads = self.edge_quads(lambda);
        let rec = Recursion::new(&self.tree, &self.view, &self.bc, |e| quads[e - 1].expect("edge in view"));
        rec.evaluate(split)
    }

    pub fn eval(&self, lambda: C<T>) -> C<T> {
        self.eval_split(lambda, self.split)
    }
}

impl<T: Real> SpectralFn<T> for CharFn<T> {
    fn at_rho(&self, rho: C<T>) -> C<T> {
        self.eval(rho * rho)
    }

    fn at_lambda(&self, lambda: C<T>) -> C<T> {
        self.eval(lambda)
    }

    fn meta(&self) -> &CharMeta<T> {
        self.zero.meta()
    }

    fn zero_form(&self) -> &Arc<ZeroCharFn<T>> {
        &self.zero
    }
}

/// Δ with all-Dirichlet conditions on the whole tree.
pub fn char_fn<T: Real>(
    tree: &Arc<MetricTree<T>>,
    potential: &Arc<TreePotential<T>>,
    bc: BoundaryConditions,
) -> crate::Result<CharFn<T>> {
    CharFn::on_tree(tree.clone(), potential.clone(), bc)
}

pub fn char_fn_zero<T: Real>(tree: &Arc<MetricTree<T>>, bc: BoundaryConditions) -> Arc<ZeroCharFn<T>> {
    ZeroCharFn::new(tree.clone(), tree.full(), bc)
}
