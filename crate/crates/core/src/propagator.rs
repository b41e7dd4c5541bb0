//! Edge solutions S, φ and their quasi-derivatives for `y^{[1]} = y' − σy`,
//! `−(y^{[1]})' − σ y^{[1]} − σ² y = λ y`.
//!
//! On a cell with constant value `c` the system matrix `A = [[c, 1], [−(c²+λ), −c]]`
//! satisfies `A² = −λ I`, so `exp(hA) = cos(ρh) I + (sin(ρh)/ρ) A` exactly.

use crate::potential::EdgePotential;
use crate::scalar::{cone, czero, lit, Real, C};

/// Values of the two fundamental solutions at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quad<R> {
    pub s: R,
    pub s1: R,
    pub phi: R,
    pub phi1: R,
}

impl<T: Real> Quad<C<T>> {
    pub fn initial() -> Self {
        Self { s: czero(), s1: cone(), phi: cone(), phi1: czero() }
    }

    /// S φ^{[1]} − S^{[1]} φ, identically −1.
    pub fn wronskian(&self) -> C<T> {
        self.s * self.phi1 - self.s1 * self.phi
    }
}

#[derive(Clone, Debug)]
pub struct EdgeSolution<T> {
    pub edge: usize,
    pub lambda: C<T>,
    pub h: T,
    pub s: Vec<C<T>>,
    pub s1: Vec<C<T>>,
    pub phi: Vec<C<T>>,
    pub phi1: Vec<C<T>>,
}

impl<T: Real> EdgeSolution<T> {
    pub fn at(&self, i: usize) -> Quad<C<T>> {
        Quad { s: self.s[i], s1: self.s1[i], phi: self.phi[i], phi1: self.phi1[i] }
    }

    pub fn end(&self) -> Quad<C<T>> {
        self.at(self.s.len() - 1)
    }
}

/// `(cos(ρh), sin(ρh)/ρ)` as entire functions of λ = ρ².
pub fn trig_pair<T: Real>(lambda: C<T>, h: T) -> (C<T>, C<T>) {
    let z2 = lambda * h * h;
    if z2.norm() < lit(1e-12) {
        let co = cone::<T>() - z2 / lit::<T>(2.0) + z2 * z2 / lit::<T>(24.0);
        let si = (cone::<T>() - z2 / lit::<T>(6.0) + z2 * z2 / lit::<T>(120.0)) * h;
        (co, si)
    } else {
        let rho = lambda.sqrt();
        let z = rho * h;
        (z.cos(), z.sin() / rho)
    }
}

/// exp(hA) for the cell matrix with value `c`, as `[[e11, e12], [e21, e22]]`.
#[inline]
pub fn cell_exponential<T: Real>(c: C<T>, lambda: C<T>, h: T) -> [[C<T>; 2]; 2] {
    let (co, si) = trig_pair(lambda, h);
    cell_from_trig(c, lambda, co, si)
}

#[inline]
fn cell_from_trig<T: Real>(c: C<T>, lambda: C<T>, co: C<T>, si: C<T>) -> [[C<T>; 2]; 2] {
    [[co + si * c, si], [-(si * (c * c + lambda)), co - si * c]]
}

/// Full solution arrays on the potential's grid.
pub fn propagate<T: Real>(pot: &EdgePotential<T>, lambda: C<T>) -> EdgeSolution<T> {
    let n = pot.cells();
    let h = pot.h();
    let (co, si) = trig_pair(lambda, h);
    let mut out = EdgeSolution {
        edge: pot.edge(),
        lambda,
        h,
        s: Vec::with_capacity(n + 1),
        s1: Vec::with_capacity(n + 1),
        phi: Vec::with_capacity(n + 1),
        phi1: Vec::with_capacity(n + 1),
    };
    let mut q = Quad::initial();
    out.push(q);
    for i in 0..n {
        let e = cell_from_trig(pot.cell_value(i), lambda, co, si);
        q = step(&e, q);
        out.push(q);
    }
    out
}

/// Only the values at `x = T`.
pub fn endpoint<T: Real>(pot: &EdgePotential<T>, lambda: C<T>) -> Quad<C<T>> {
    let h = pot.h();
    let (co, si) = trig_pair(lambda, h);
    let mut q = Quad::initial();
    for i in 0..pot.cells() {
        let e = cell_from_trig(pot.cell_value(i), lambda, co, si);
        q = step(&e, q);
    }
    q
}

#[inline]
fn step<T: Real>(e: &[[C<T>; 2]; 2], q: Quad<C<T>>) -> Quad<C<T>> {
    Quad {
        s: e[0][0] * q.s + e[0][1] * q.s1,
        s1: e[1][0] * q.s + e[1][1] * q.s1,
        phi: e[0][0] * q.phi + e[0][1] * q.phi1,
        phi1: e[1][0] * q.phi + e[1][1] * q.phi1,
    }
}

impl<T: Real> EdgeSolution<T> {
    fn push(&mut self, q: Quad<C<T>>) {
        self.s.push(q.s);
        self.s1.push(q.s1);
        self.phi.push(q.phi);
        self.phi1.push(q.phi1);
    }
}

/// max_x |W(x) + 1|.
pub fn wronskian_check<T: Real>(sol: &EdgeSolution<T>) -> T {
    (0..sol.s.len()).fold(T::zero(), |m, i| m.max((sol.at(i).wronskian() + cone::<T>()).norm()))
}

/// Closed form for σ ≡ 0 on an edge of length `len`.
pub fn zero_potential_quad<T: Real>(len: T, lambda: C<T>) -> Quad<C<T>> {
    let (co, si) = trig_pair(lambda, len);
    Quad { s: si, s1: co, phi: co, phi1: -(lambda * si) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{creal, cx};

    #[test]
    fn zero_potential_matches_closed_form() {
        let p = EdgePotential::<f64>::zero(1, 1.3, 32);
        for lam in [cx(7.0, 0.0), cx(-3.0, 2.0), cx(0.0, 0.0), cx(400.0, -9.0)] {
            let q = endpoint(&p, lam);
            let rho = lam.sqrt();
            let z = zero_potential_quad(1.3, lam);
            assert!((q.s - z.s).norm() < 1e-11 * (1.0 + z.s.norm()));
            assert!((q.phi1 - z.phi1).norm() < 1e-10 * (1.0 + z.phi1.norm()));
            if lam.norm() > 0.0 {
                assert!((z.phi1 + rho * (rho * 1.3).sin()).norm() < 1e-10 * (1.0 + z.phi1.norm()));
            }
        }
        let q = endpoint(&p, czero());
        assert!((q.s - creal(1.3)).norm() < 1e-14 && (q.phi - cone()).norm() < 1e-15);
    }

    #[test]
    fn wronskian_exact_for_zero_and_constant() {
        let z = EdgePotential::<f64>::zero(1, 1.0, 64);
        assert!(wronskian_check(&propagate(&z, cx(5.0, 1.0))) < 1e-14);
        let one = EdgePotential::<f64>::from_fn(1, 1.0, 256, |_| creal(1.0));
        assert!(wronskian_check(&propagate(&one, cx(4.0, 0.0))) <= 1e-10);
    }

    #[test]
    fn constant_potential_is_exact_at_any_resolution() {
        // σ ≡ c has cell value c on every grid, so results must agree across resolutions.
        let coarse = EdgePotential::<f64>::from_fn(1, 1.0, 16, |_| creal(1.0));
        let fine = EdgePotential::<f64>::from_fn(1, 1.0, 1024, |_| creal(1.0));
        let a = endpoint(&coarse, cx(4.0, 0.0));
        let b = endpoint(&fine, cx(4.0, 0.0));
        assert!((a.s - b.s).norm() < 1e-12 && (a.phi - b.phi).norm() < 1e-12);
    }
}
