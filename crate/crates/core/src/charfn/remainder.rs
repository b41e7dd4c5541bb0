//! Paley-Wiener remainders, Weyl functions and the spectral distance δ.

use super::SpectralFn;
use crate::error::{Error, Result};
use crate::scalar::{cpowi, creal, from_usize, lit, sqrt_upper, Real, C};
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct RemainderSamples<T> {
    pub rho: Vec<T>,
    pub kappa: Vec<C<T>>,
    /// Δ(0), removed before dividing when d = 0.
    pub constant: Option<C<T>>,
    /// Share of Σ|κ|² carried by the outer 10% of the grid.
    pub tail_fraction: T,
    /// True when the tail does not decay (typically mismatched boundary metadata).
    pub non_decaying: bool,
}

impl<T: Real> RemainderSamples<T> {
    /// Trapezoid approximation of ‖κ‖_{L2(−R,R)}.
    pub fn l2_norm(&self) -> T {
        if self.rho.len() < 2 {
            return T::zero();
        }
        let h = self.rho[1] - self.rho[0];
        (self.kappa.iter().fold(T::zero(), |a, k| a + k.norm_sqr()) * h).sqrt()
    }
}

/// Samples κ on the symmetric grid ρ_i = (i + 1/2)h, |ρ_i| < radius.
pub fn extract_remainder<T: Real>(f: &dyn SpectralFn<T>, radius: T, h: T) -> RemainderSamples<T> {
    let n = (radius / h).floor().to_usize().unwrap_or(0).max(1);
    let d = f.meta().d;
    let constant = (d == 0).then(|| f.at_rho(creal(T::zero())));
    let mut rho = Vec::with_capacity(2 * n);
    for i in (0..n).rev() {
        rho.push(-(h * (from_usize::<T>(i) + lit(0.5))));
    }
    for i in 0..n {
        rho.push(h * (from_usize::<T>(i) + lit(0.5)));
    }
    let kappa: Vec<C<T>> = rho.iter().map(|&r| f.kappa(creal(r))).collect();
    let total = kappa.iter().fold(T::zero(), |a, k| a + k.norm_sqr());
    let cut = n - n / 10;
    let tail = kappa
        .iter()
        .zip(&rho)
        .filter(|(_, &r)| r.abs() >= h * from_usize(cut))
        .fold(T::zero(), |a, (k, _)| a + k.norm_sqr());
    let tail_fraction = if total > T::zero() { tail / total } else { T::zero() };
    // A square-integrable κ leaves about 1/10 or less in the outer tenth once the
    // grid covers its bulk; a constant-modulus leftover leaves much more.
    let non_decaying = total > T::zero() && tail_fraction > lit(0.2);
    RemainderSamples { rho, kappa, constant, tail_fraction, non_decaying }
}

/// M_k = −Δ_k / Δ.
pub struct WeylFn<T: Real> {
    pub k: usize,
    pub delta: Arc<dyn SpectralFn<T>>,
    pub delta_k: Arc<dyn SpectralFn<T>>,
}

pub fn weyl_fn<T: Real>(k: usize, delta: Arc<dyn SpectralFn<T>>, delta_k: Arc<dyn SpectralFn<T>>) -> WeylFn<T> {
    WeylFn { k, delta, delta_k }
}

impl<T: Real> WeylFn<T> {
    pub fn at_rho(&self, rho: C<T>) -> Result<C<T>> {
        let den = self.delta.at_rho(rho);
        let num = self.delta_k.at_rho(rho);
        if den.norm() <= lit::<T>(1e-12) * num.norm() / rho.norm().max(T::one()) || den.norm() == T::zero() {
            return Err(Error::Pole(format!("{}", rho * rho)));
        }
        Ok(-num / den)
    }

    pub fn at_lambda(&self, lambda: C<T>) -> Result<C<T>> {
        self.at_rho(sqrt_upper(lambda))
    }

    /// M_k⁰ from the zero-potential references.
    pub fn zero_at_rho(&self, rho: C<T>) -> C<T> {
        -self.delta_k.zero_form().at_rho(rho) / self.delta.zero_form().at_rho(rho)
    }

    /// M̂_k = M_k − M_k⁰.
    pub fn hat_at_rho(&self, rho: C<T>) -> Result<C<T>> {
        Ok(self.at_rho(rho)? - self.zero_at_rho(rho))
    }
}

/// ρ^{d−1}: the weight that makes Δ̂ a Paley-Wiener function.
pub fn weight_for<T: Real>(f: &dyn SpectralFn<T>, rho: C<T>) -> C<T> {
    cpowi(rho, f.meta().d as i32 - 1)
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct DistanceTerm {
    pub vertex: Option<usize>,
    pub norm: f64,
    pub radius: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct DistanceReport {
    /// δ of the full data set.
    pub delta: f64,
    /// The shared ‖ρ^{b−1}Δ̂‖ term.
    pub common: DistanceTerm,
    pub per_vertex: Vec<DistanceTerm>,
}

impl DistanceReport {
    /// δ_k = shared term + the term of vertex k.
    pub fn delta_k(&self, k: usize) -> Option<f64> {
        self.per_vertex.iter().find(|t| t.vertex == Some(k)).map(|t| self.common.norm + t.norm)
    }
}

/// ‖ρ^{d−1}(f − g)(ρ²)‖_{L2(ℝ)} by trapezoid on [0, R], R doubled until the
/// last doubling adds less than `tail_tol` of the total or `r_cap` is reached.
pub fn l2_difference<T: Real>(
    f: &dyn SpectralFn<T>,
    g: &dyn SpectralFn<T>,
    r0: T,
    r_cap: T,
    tail_tol: T,
) -> DistanceTerm {
    let len = f.meta().total_length.max(g.meta().total_length);
    let h = T::PI() / (lit::<T>(4.0) * len);
    let point = |r: T| -> T {
        let rho = creal(r);
        ((f.at_rho(rho) - g.at_rho(rho)) * weight_for(f, rho)).norm_sqr()
    };
    // Even integrand: ∫_ℝ = 2∫_0^∞.
    let mut acc = point(T::zero()) * lit(0.5) * h;
    let mut next = 1usize;
    let mut radius = r0;
    let mut converged = false;
    loop {
        let before = acc;
        while h * from_usize::<T>(next) <= radius {
            acc += point(h * from_usize(next)) * h;
            next += 1;
        }
        let added = acc - before;
        if acc == T::zero() || (before > T::zero() && added <= tail_tol * acc) {
            converged = true;
            break;
        }
        if radius >= r_cap {
            break;
        }
        radius = (radius * lit(2.0)).min(r_cap);
    }
    DistanceTerm {
        vertex: None,
        norm: crate::scalar::to_f64((acc * lit(2.0)).sqrt()),
        radius: crate::scalar::to_f64(radius),
        converged,
    }
}

/// δ for `(Δ, {Δ_k})` against `(Δ̃, {Δ̃_k})`; the lists must be aligned by vertex.
pub fn spectral_distance<T: Real>(
    delta: (&dyn SpectralFn<T>, &dyn SpectralFn<T>),
    per_vertex: &[(usize, &dyn SpectralFn<T>, &dyn SpectralFn<T>)],
    r0: T,
    r_cap: T,
    tail_tol: T,
) -> Result<DistanceReport> {
    if delta.0.meta() != delta.1.meta() {
        return Err(Error::input("spectral data live on incompatible trees"));
    }
    let common = l2_difference(delta.0, delta.1, r0, r_cap, tail_tol);
    let mut total = common.norm;
    let mut terms = Vec::new();
    for &(k, a, b) in per_vertex {
        if a.meta() != b.meta() {
            return Err(Error::input(format!("Δ_{k} blocks are incompatible")));
        }
        let mut t = l2_difference(a, b, r0, r_cap, tail_tol);
        t.vertex = Some(k);
        total += t.norm;
        terms.push(t);
    }
    Ok(DistanceReport { delta: total, common, per_vertex: terms })
}

#[cfg(test)]
mod tests {
    use super::super::{char_fn, BoundaryConditions};
    use super::*;
    use crate::potential::TreePotential;
    use crate::scalar::cx;
    use crate::tree::MetricTree;

    fn edge() -> Arc<MetricTree<f64>> {
        Arc::new(MetricTree::new(vec![2], vec![1.0]).unwrap())
    }

    #[test]
    fn zero_potential_has_zero_remainder() {
        let t = edge();
        let p = Arc::new(TreePotential::zero(&t, 32));
        let f = char_fn(&t, &p, BoundaryConditions::dirichlet()).unwrap();
        let r = extract_remainder(&f, 50.0, 0.1);
        assert!(r.kappa.iter().all(|k| k.norm() < 1e-12));
    }

    #[test]
    fn constant_potential_remainder_is_square_integrable() {
        let t = edge();
        // σ ≡ const is invisible to Dirichlet-Dirichlet data (q = σ' = 0), so use σ = x.
        let p = Arc::new(TreePotential::from_fn(&t, 256, |_, x| creal(x)));
        let f = char_fn(&t, &p, BoundaryConditions::dirichlet()).unwrap();
        let a = extract_remainder(&f, 100.0, 0.1);
        let b = extract_remainder(&f, 200.0, 0.1);
        assert!(!a.non_decaying && !b.non_decaying);
        let (na, nb) = (a.l2_norm(), b.l2_norm());
        assert!(na > 0.1 && (nb - na).abs() < 0.05 * na, "{na} {nb}");
    }

    #[test]
    fn mismatched_metadata_is_flagged() {
        // Δ with Neumann at v1, compared against the Dirichlet-Dirichlet closed form.
        struct Mislabelled(super::super::CharFn<f64>, Arc<super::super::ZeroCharFn<f64>>);
        impl SpectralFn<f64> for Mislabelled {
            fn at_rho(&self, rho: C<f64>) -> C<f64> {
                self.0.at_rho(rho)
            }
            fn meta(&self) -> &super::super::CharMeta<f64> {
                self.1.meta()
            }
            fn zero_form(&self) -> &Arc<super::super::ZeroCharFn<f64>> {
                self.1.zero_form()
            }
        }
        let t = edge();
        let p = Arc::new(TreePotential::from_fn(&t, 64, |_, x| creal(x)));
        let f = char_fn(&t, &p, BoundaryConditions::neumann_at(1)).unwrap();
        let z = super::super::char_fn_zero(&t, BoundaryConditions::dirichlet());
        let r = extract_remainder(&Mislabelled(f, z), 100.0, 0.1);
        assert!(r.non_decaying);
    }

    #[test]
    fn weyl_closed_form_and_pole() {
        let t = edge();
        let p = Arc::new(TreePotential::zero(&t, 32));
        let d: Arc<dyn SpectralFn<f64>> = Arc::new(char_fn(&t, &p, BoundaryConditions::dirichlet()).unwrap());
        let dk: Arc<dyn SpectralFn<f64>> = Arc::new(char_fn(&t, &p, BoundaryConditions::neumann_at(1)).unwrap());
        let w = weyl_fn(1, d, dk);
        let rho = cx(2.0, 0.7);
        let m = w.at_rho(rho).unwrap();
        let expect = -rho * rho.cos() / rho.sin();
        assert!((m - expect).norm() < 1e-10 * expect.norm());
        let pi = std::f64::consts::PI;
        assert!(matches!(w.at_lambda(cx(pi * pi, 0.0)), Err(Error::Pole(_))));
    }

    #[test]
    fn distance_of_identical_data_is_zero() {
        let t = edge();
        let p = Arc::new(TreePotential::from_fn(&t, 64, |_, x| creal(x.sin())));
        let f = char_fn(&t, &p, BoundaryConditions::dirichlet()).unwrap();
        let g = char_fn(&t, &p, BoundaryConditions::neumann_at(1)).unwrap();
        let r = spectral_distance((&f, &f), &[(1, &g, &g)], 16.0, 64.0, 1e-6).unwrap();
        assert_eq!(r.delta, 0.0);
        assert_eq!(r.delta_k(1), Some(0.0));
    }
}
