//! Edge potentials σ_j as uniform grid samples.
//!
//! A potential with nodes `x_0..x_M` is read as piecewise constant on cells,
//! the value on `[x_i, x_{i+1}]` being the midpoint value `(σ_i + σ_{i+1})/2`.
//! The propagator uses the same cells, so norms and ODE agree on one model.

use crate::error::{Error, Result};
use crate::scalar::{creal, czero, from_usize, lit, Real, C};
use crate::tree::MetricTree;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MIN_CELLS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct EdgePotential<T> {
    edge: usize,
    length: T,
    values: Vec<C<T>>,
}

impl<T: Real> EdgePotential<T> {
    pub fn new(edge: usize, length: T, values: Vec<C<T>>) -> Result<Self> {
        if values.len() < MIN_CELLS + 1 {
            return Err(Error::input(format!(
                "edge e{edge}: need at least {} samples, got {}",
                MIN_CELLS + 1,
                values.len()
            )));
        }
        if !(length > T::zero()) {
            return Err(Error::input(format!("edge e{edge}: non-positive length")));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::input(format!("edge e{edge}: non-finite sample")));
        }
        Ok(Self { edge, length, values })
    }

    pub fn from_fn(edge: usize, length: T, cells: usize, f: impl Fn(T) -> C<T>) -> Self {
        let cells = cells.max(MIN_CELLS);
        let h = length / from_usize(cells);
        let values = (0..=cells).map(|i| f(h * from_usize(i))).collect();
        Self { edge, length, values }
    }

    pub fn zero(edge: usize, length: T, cells: usize) -> Self {
        Self::from_fn(edge, length, cells, |_| czero())
    }

    pub fn edge(&self) -> usize {
        self.edge
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn cells(&self) -> usize {
        self.values.len() - 1
    }

    pub fn h(&self) -> T {
        self.length / from_usize(self.cells())
    }

    pub fn values(&self) -> &[C<T>] {
        &self.values
    }

    pub fn node(&self, i: usize) -> T {
        self.h() * from_usize(i)
    }

    pub fn cell_value(&self, i: usize) -> C<T> {
        (self.values[i] + self.values[i + 1]) * lit::<T>(0.5)
    }

    pub fn cell_values(&self) -> Vec<C<T>> {
        (0..self.cells()).map(|i| self.cell_value(i)).collect()
    }

    /// Value under the cell model; on a grid node the two neighbouring cells are averaged.
    pub fn value_at(&self, x: T) -> C<T> {
        let n = self.cells();
        let u = x / self.h();
        if u <= T::zero() {
            return self.cell_value(0);
        }
        let i = u.floor().to_usize().unwrap_or(n);
        if i >= n {
            return self.cell_value(n - 1);
        }
        let frac = u - from_usize(i);
        if frac < lit(1e-9) && i > 0 {
            (self.cell_value(i - 1) + self.cell_value(i)) * lit::<T>(0.5)
        } else if frac > lit(1.0 - 1e-9) && i + 1 < n {
            (self.cell_value(i) + self.cell_value(i + 1)) * lit::<T>(0.5)
        } else {
            self.cell_value(i)
        }
    }

    /// Linear interpolation of the node samples.
    pub fn interpolate(&self, x: T) -> C<T> {
        let n = self.cells();
        let u = (x / self.h()).max(T::zero()).min(from_usize(n));
        let i = u.floor().to_usize().unwrap_or(n).min(n - 1);
        let f = u - from_usize(i);
        self.values[i] * (T::one() - f) + self.values[i + 1] * f
    }

    pub fn l2_norm(&self) -> T {
        self.l2_norm_sq().sqrt()
    }

    pub fn l2_norm_sq(&self) -> T {
        let h = self.h();
        (0..self.cells()).fold(T::zero(), |a, i| a + self.cell_value(i).norm_sqr() * h)
    }

    /// ‖σ‖ restricted to [0, x].
    pub fn l2_norm_upto(&self, x: T) -> T {
        let h = self.h();
        let mut acc = T::zero();
        for i in 0..self.cells() {
            let a = h * from_usize(i);
            if a >= x {
                break;
            }
            let w = (x - a).min(h);
            acc += self.cell_value(i).norm_sqr() * w;
        }
        acc.sqrt()
    }

    /// Same function on a grid with `cells` cells (linear interpolation of nodes).
    pub fn resample(&self, cells: usize) -> Self {
        Self::from_fn(self.edge, self.length, cells, |x| self.interpolate(x))
    }

    pub fn map(&self, f: impl Fn(C<T>) -> C<T>) -> Self {
        Self { edge: self.edge, length: self.length, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination on a common grid; `other` is resampled if needed.
    pub fn zip_with(&self, other: &Self, f: impl Fn(C<T>, C<T>) -> C<T>) -> Self {
        let o = if other.cells() == self.cells() { other.clone() } else { other.resample(self.cells()) };
        Self {
            edge: self.edge,
            length: self.length,
            values: self.values.iter().zip(&o.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreePotential<T> {
    edges: Vec<EdgePotential<T>>,
}

impl<T: Real> TreePotential<T> {
    pub fn new<U: Real>(tree: &MetricTree<U>, edges: Vec<EdgePotential<T>>) -> Result<Self> {
        if edges.len() != tree.m() {
            return Err(Error::input(format!(
                "potential covers {} edges, tree has {}",
                edges.len(),
                tree.m()
            )));
        }
        for (i, e) in edges.iter().enumerate() {
            if e.edge != i + 1 {
                return Err(Error::input(format!("potential block {} is labelled e{}", i + 1, e.edge)));
            }
            let l = crate::scalar::to_f64(tree.length(i + 1));
            let le = crate::scalar::to_f64(e.length);
            if (l - le).abs() > 1e-9 * l.max(1.0) {
                return Err(Error::input(format!(
                    "edge e{}: potential spans [0, {le}] but the edge has length {l}",
                    i + 1
                )));
            }
        }
        Ok(Self { edges })
    }

    pub fn from_edges_unchecked(edges: Vec<EdgePotential<T>>) -> Self {
        Self { edges }
    }

    pub fn from_fn(tree: &MetricTree<T>, cells: usize, f: impl Fn(usize, T) -> C<T>) -> Self {
        let edges = (1..=tree.m())
            .map(|j| EdgePotential::from_fn(j, tree.length(j), cells, |x| f(j, x)))
            .collect();
        Self { edges }
    }

    pub fn zero(tree: &MetricTree<T>, cells: usize) -> Self {
        Self::from_fn(tree, cells, |_, _| czero())
    }

    pub fn edge(&self, j: usize) -> &EdgePotential<T> {
        &self.edges[j - 1]
    }

    pub fn edges(&self) -> &[EdgePotential<T>] {
        &self.edges
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn l2_norm(&self) -> T {
        self.edges.iter().fold(T::zero(), |a, e| a + e.l2_norm_sq()).sqrt()
    }

    pub fn in_ball(&self, omega: T) -> bool {
        self.l2_norm() <= omega * (T::one() + lit(1e-12))
    }

    pub fn scale(&self, c: T) -> Self {
        Self { edges: self.edges.iter().map(|e| e.map(|v| v * c)).collect() }
    }

    pub fn resample(&self, cells: usize) -> Self {
        Self { edges: self.edges.iter().map(|e| e.resample(cells)).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { edges: self.edges.iter().zip(&other.edges).map(|(a, b)| a.sub(b)).collect() }
    }

    pub fn add_scaled(&self, other: &Self, a: T) -> Self {
        Self {
            edges: self.edges.iter().zip(&other.edges).map(|(x, y)| x.zip_with(y, |u, v| u + v * a)).collect(),
        }
    }

    /// `self + amplitude·η` with η a seeded smooth random potential of unit norm.
    pub fn perturb(&self, amplitude: T, seed: u64) -> Self {
        if amplitude == T::zero() {
            return self.clone();
        }
        let eta = random_unit_potential(self, seed);
        self.add_scaled(&eta, amplitude)
    }
}

/// Random smooth real potential on the same grids, normalized to ‖η‖ = 1.
fn random_unit_potential<T: Real>(like: &TreePotential<T>, seed: u64) -> TreePotential<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<EdgePotential<T>> = like
        .edges
        .iter()
        .map(|e| {
            let coef: Vec<(f64, f64)> =
                (1..=6).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let len = crate::scalar::to_f64(e.length);
            EdgePotential::from_fn(e.edge, e.length, e.cells(), |x| {
                let x = crate::scalar::to_f64(x);
                let v: f64 = coef
                    .iter()
                    .enumerate()
                    .map(|(n, &(a, b))| {
                        let w = (n as f64 + 1.0) * std::f64::consts::PI * x / len;
                        (a * w.sin() + b * w.cos()) / (n as f64 + 1.0)
                    })
                    .sum();
                creal(lit(v))
            })
        })
        .collect();
    let eta = TreePotential { edges };
    let n = eta.l2_norm();
    eta.scale(T::one() / n)
}
