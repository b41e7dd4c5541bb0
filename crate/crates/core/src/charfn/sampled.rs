//! Characteristic functions known through Paley-Wiener samples of their remainder.

use super::{CharMeta, SpectralFn, ZeroCharFn};
use crate::sampling::CardinalSeries;
use crate::scalar::{cpowi, from_usize, lit, KahanSum, Real, C};
use std::sync::Arc;

/// Δ(ρ²) = Δ⁰(ρ²) + ρ^{1−d} κ(ρ), with κ given by its cardinal series.
#[derive(Clone, Debug)]
pub struct SampledCharFn<T> {
    zero: Arc<ZeroCharFn<T>>,
    kappa: CardinalSeries<T>,
    /// Δ(0), only used when d = 0.
    constant: Option<C<T>>,
}

impl<T: Real> SampledCharFn<T> {
    pub fn new(zero: Arc<ZeroCharFn<T>>, kappa: CardinalSeries<T>, constant: Option<C<T>>) -> Self {
        Self { zero, kappa, constant }
    }

    /// Samples κ of `f` on the line Im ρ = τ with spacing π/𝒯, 𝒯 the total length.
    pub fn sample(f: &dyn SpectralFn<T>, tau: T, n_max: usize) -> Self {
        let zero = f.zero_form().clone();
        let len = f.meta().total_length;
        let constant = (f.meta().d == 0).then(|| f.at_rho(C::new(T::zero(), T::zero())));
        let series = CardinalSeries::from_fn(len, tau, n_max, |nu| f.kappa(nu));
        Self { zero, kappa: series, constant }
    }

    pub fn series(&self) -> &CardinalSeries<T> {
        &self.kappa
    }

    pub fn constant(&self) -> Option<C<T>> {
        self.constant
    }

    pub fn with_series(&self, kappa: CardinalSeries<T>) -> Self {
        Self { kappa, ..self.clone() }
    }
}

/// Modulus below which κ samples on Im ρ = τ are rounding noise: a fixed multiple of
/// ε·max|ρ^{d−1}Δ⁰| over the first nodes.
pub fn kappa_noise_floor<T: Real>(zero: &ZeroCharFn<T>, tau: T) -> T {
    let d = zero.meta().d as i32;
    let len = zero.meta().total_length;
    let scale = (0..16)
        .map(|n| {
            let nu = crate::sampling::node(len, tau, n);
            (zero.at_rho(nu) * cpowi(nu, d - 1)).norm()
        })
        .fold(T::one(), T::max);
    T::epsilon() * lit(1e4) * scale
}

impl<T: Real> SampledCharFn<T> {
    /// Noise floor of the stored κ samples.
    pub fn noise_floor(&self) -> T {
        kappa_noise_floor(&self.zero, self.kappa.tau)
    }

    fn remainder(&self, rho: C<T>) -> C<T> {
        let d = self.zero.meta().d as i32;
        let k = self.kappa.eval(rho);
        match self.constant {
            Some(c) if d == 0 => rho * k + c,
            _ => cpowi(rho, 1 - d) * k,
        }
    }

    /// ρ^{1−d}κ(ρ) is entire; near the origin it is taken from the Cauchy integral
    /// over the unit circle instead of dividing by a small power of ρ.
    fn remainder_near_origin(&self, rho: C<T>) -> C<T> {
        const POINTS: usize = 48;
        let mut acc = KahanSum::new();
        for j in 0..POINTS {
            let a = T::TAU() * from_usize::<T>(j) / from_usize(POINTS);
            let zeta = C::new(a.cos(), a.sin());
            acc.add(self.remainder(zeta) * zeta / (zeta - rho));
        }
        acc.value() / from_usize::<T>(POINTS)
    }
}

impl<T: Real> SpectralFn<T> for SampledCharFn<T> {
    fn at_rho(&self, rho: C<T>) -> C<T> {
        let near = self.zero.meta().d > 1 && rho.norm() < lit(0.5);
        let r = if near { self.remainder_near_origin(rho) } else { self.remainder(rho) };
        self.zero.at_rho(rho) + r
    }

    fn meta(&self) -> &CharMeta<T> {
        self.zero.meta()
    }

    fn zero_form(&self) -> &Arc<ZeroCharFn<T>> {
        &self.zero
    }

    fn kappa(&self, rho: C<T>) -> C<T> {
        self.kappa.eval(rho)
    }

    fn as_any_sampled(&self) -> Option<&SampledCharFn<T>> {
        Some(self)
    }
}
