//! Exponential polynomials Σ c·ρ^k·exp(iρ·Σ_j n_j T_j) with integer n_j.
//!
//! Frequencies are kept as integer combinations of edge lengths, so terms merge
//! exactly and the closed form for σ ≡ 0 comes out of the same recursion as Δ.

use super::Ring;
use crate::scalar::{cpowi, czero, i_unit, lit, Real, C};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq)]
pub struct ExpPoly<T> {
    terms: BTreeMap<(i32, Vec<i8>), C<T>>,
}

impl<T: Real> ExpPoly<T> {
    fn monomial(power: i32, freq: Vec<i8>, c: C<T>) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert((power, freq), c);
        Self { terms }
    }

    fn unit_freq(m: usize, j: usize, sign: i8) -> Vec<i8> {
        let mut f = vec![0i8; m];
        f[j - 1] = sign;
        f
    }

    /// `ρ^{power}·sin(ρT_j)` in a tree with `m` edges.
    pub fn sin(m: usize, j: usize, power: i32) -> Self {
        // sin z = (e^{iz} − e^{−iz}) / 2i
        let half = lit::<T>(0.5);
        let mut p = Self::monomial(power, Self::unit_freq(m, j, 1), -i_unit::<T>() * half);
        p.terms.insert((power, Self::unit_freq(m, j, -1)), i_unit::<T>() * half);
        p
    }

    pub fn cos(m: usize, j: usize, power: i32) -> Self {
        let half = C::new(lit::<T>(0.5), T::zero());
        let mut p = Self::monomial(power, Self::unit_freq(m, j, 1), half);
        p.terms.insert((power, Self::unit_freq(m, j, -1)), half);
        p
    }

    pub fn scale(&self, c: C<T>) -> Self {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = *v * c;
        }
        out.prune();
        out
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| *c != czero());
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Distinct powers of ρ present.
    pub fn powers(&self) -> Vec<i32> {
        let mut p: Vec<i32> = self.terms.keys().map(|(k, _)| *k).collect();
        p.dedup();
        p
    }

    /// Flattens to `(power, frequency, coefficient)` for fast evaluation.
    pub fn compile(&self, lengths: &[T]) -> Vec<(i32, T, C<T>)> {
        self.terms
            .iter()
            .map(|((k, f), &c)| {
                let w = f
                    .iter()
                    .zip(lengths)
                    .fold(T::zero(), |a, (&n, &l)| a + l * lit(n as f64));
                (*k, w, c)
            })
            .collect()
    }

    pub fn eval(&self, lengths: &[T], rho: C<T>) -> C<T> {
        eval_compiled(&self.compile(lengths), rho)
    }
}

pub fn eval_compiled<T: Real>(terms: &[(i32, T, C<T>)], rho: C<T>) -> C<T> {
    let iu = i_unit::<T>();
    terms
        .iter()
        .fold(czero(), |acc, &(k, w, c)| acc + c * cpowi(rho, k) * (iu * rho * w).exp())
}

impl<T: Real> Ring for ExpPoly<T> {
    fn zero() -> Self {
        Self { terms: BTreeMap::new() }
    }

    fn one() -> Self {
        // Frequency vector of length 0 acts as the zero vector of any length.
        Self::monomial(0, Vec::new(), C::new(T::one(), T::zero()))
    }

    fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, &c) in &other.terms {
            let key = normalize_key(k, out.width().max(other.width()));
            let e = out.terms.entry(key).or_insert_with(czero);
            *e = *e + c;
        }
        out.renormalize();
        out.prune();
        out
    }

    fn mul(&self, other: &Self) -> Self {
        let width = self.width().max(other.width());
        let mut terms: BTreeMap<(i32, Vec<i8>), C<T>> = BTreeMap::new();
        for ((ka, fa), &ca) in &self.terms {
            for ((kb, fb), &cb) in &other.terms {
                let f: Vec<i8> = (0..width)
                    .map(|i| fa.get(i).copied().unwrap_or(0) + fb.get(i).copied().unwrap_or(0))
                    .collect();
                let e = terms.entry((ka + kb, f)).or_insert_with(czero);
                *e = *e + ca * cb;
            }
        }
        let mut out = Self { terms };
        out.prune();
        out
    }
}

impl<T: Real> ExpPoly<T> {
    fn width(&self) -> usize {
        self.terms.keys().map(|(_, f)| f.len()).max().unwrap_or(0)
    }

    fn renormalize(&mut self) {
        let w = self.width();
        if self.terms.keys().all(|(_, f)| f.len() == w) {
            return;
        }
        let old = std::mem::take(&mut self.terms);
        for (k, c) in old {
            let e = self.terms.entry(normalize_key(&k, w)).or_insert_with(czero);
            *e = *e + c;
        }
    }
}

fn normalize_key(k: &(i32, Vec<i8>), width: usize) -> (i32, Vec<i8>) {
    let mut f = k.1.clone();
    f.resize(width, 0);
    (k.0, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    #[test]
    fn trig_identities() {
        let l = [0.7f64, 1.3];
        let rho = cx::<f64>(1.9, 0.4);
        let s = ExpPoly::<f64>::sin(2, 1, 0);
        assert!((s.eval(&l, rho) - (rho * 0.7).sin()).norm() < 1e-14);
        // sin²+cos² = 1
        let c = ExpPoly::<f64>::cos(2, 2, 0);
        let s2 = ExpPoly::<f64>::sin(2, 2, 0);
        let one = s2.mul(&s2).add(&c.mul(&c));
        assert_eq!(one.len(), 1);
        assert!((one.eval(&l, rho) - cx(1.0, 0.0)).norm() < 1e-14);
    }
}
