//! Paley-Wiener sampling on a horizontal line.
//!
//! For F ∈ PW(𝒯) and ν_n = πn/𝒯 + iτ,
//! `F(ρ) = Σ_n F(ν_n) sinc((ρ − ν_n)𝒯)`. Because
//! `sin((ρ − ν_n)𝒯) = (−1)^n sin((ρ − iτ)𝒯)` a single sine per evaluation suffices.

use crate::scalar::{from_i64, from_usize, lit, sinc, KahanSum, Real, C};
use rayon::prelude::*;

#[derive(Clone, Debug)]
pub struct CardinalSeries<T> {
    pub length: T,
    pub tau: T,
    pub n_min: i64,
    pub samples: Vec<C<T>>,
}

pub fn node<T: Real>(length: T, tau: T, n: i64) -> C<T> {
    C::new(T::PI() * from_i64::<T>(n) / length, tau)
}

impl<T: Real> CardinalSeries<T> {
    /// Samples `f(ν_n)` for `|n| ≤ n_max`.
    pub fn from_fn(length: T, tau: T, n_max: usize, f: impl Fn(C<T>) -> C<T> + Sync) -> Self {
        let n_max = n_max as i64;
        let samples = (-n_max..=n_max).into_par_iter().map(|n| f(node(length, tau, n))).collect();
        Self { length, tau, n_min: -n_max, samples }
    }

    pub fn n_max(&self) -> i64 {
        self.n_min + self.samples.len() as i64 - 1
    }

    pub fn nodes(&self) -> impl Iterator<Item = (i64, C<T>, C<T>)> + '_ {
        self.samples
            .iter()
            .enumerate()
            .map(move |(i, &v)| {
                let n = self.n_min + i as i64;
                (n, node(self.length, self.tau, n), v)
            })
    }

    pub fn eval(&self, rho: C<T>) -> C<T> {
        let shifted = (rho - C::new(T::zero(), self.tau)) * self.length;
        let s0 = shifted.sin();
        let pi = T::PI();
        let mut acc = KahanSum::new();
        for (i, &f) in self.samples.iter().enumerate() {
            let n = self.n_min + i as i64;
            let z = shifted - C::new(pi * from_i64::<T>(n), T::zero());
            let term = if z.norm() < T::one() {
                f * sinc(z)
            } else {
                let sign = if n.rem_euclid(2) == 0 { T::one() } else { -T::one() };
                f * s0 * sign / z
            };
            acc.add(term);
        }
        acc.value()
    }

    pub fn map_samples(&self, f: impl Fn(i64, C<T>, C<T>) -> C<T>) -> Self {
        let samples = self.nodes().map(|(n, nu, v)| f(n, nu, v)).collect();
        Self { samples, ..self.clone() }
    }

    /// ℓ2 norm of the samples scaled by the node spacing, comparable to an L2(ℝ) norm.
    pub fn scaled_l2(&self) -> T {
        let h = T::PI() / self.length;
        (self.samples.iter().fold(T::zero(), |a, v| a + v.norm_sqr()) * h).sqrt()
    }

    /// Share of Σ|F(ν_n)|² carried by the outer 10% of indices.
    pub fn tail_fraction(&self) -> T {
        tail_fraction(&self.samples, T::zero())
    }

    /// As `tail_fraction`, with samples of modulus ≤ `floor` treated as zero.
    pub fn tail_fraction_above(&self, floor: T) -> T {
        tail_fraction(&self.samples, floor)
    }
}

/// Outer-10% energy share of a symmetric sample vector; samples of modulus ≤ `floor`
/// count as rounding noise.
pub fn tail_fraction<T: Real>(samples: &[C<T>], floor: T) -> T {
    let len = samples.len();
    let half = (len / 2) as i64;
    let cut = half - (half / 10).max(1);
    let mut total = T::zero();
    let mut tail = T::zero();
    for (i, v) in samples.iter().enumerate() {
        let n = i as i64 - half;
        let e = if v.norm() > floor { v.norm_sqr() } else { T::zero() };
        total += e;
        if n.abs() > cut {
            tail += e;
        }
    }
    if total > T::zero() {
        tail / total
    } else {
        T::zero()
    }
}

#[derive(Clone, Debug)]
pub struct Truncation<T> {
    pub series: CardinalSeries<T>,
    pub tail_fraction: T,
    /// Tail rule met before the cap.
    pub converged: bool,
}

/// Extends `|n| ≤ N` by doubling until the outer 10% carries less than `tail_tol`
/// of the energy or `cap` is reached.
pub fn truncate_by_tail<T: Real>(
    length: T,
    tau: T,
    start: usize,
    cap: usize,
    tail_tol: T,
    floor: T,
    f: impl Fn(C<T>) -> C<T> + Sync,
) -> Truncation<T> {
    let mut n = start.min(cap).max(4);
    let mut series = CardinalSeries::from_fn(length, tau, n, &f);
    loop {
        let tail = series.tail_fraction_above(floor);
        if tail < tail_tol || n >= cap {
            return Truncation { converged: tail < tail_tol, tail_fraction: tail, series };
        }
        let next = (2 * n).min(cap);
        let lo: Vec<C<T>> = (-(next as i64)..-(n as i64))
            .into_par_iter()
            .map(|k| f(node(length, tau, k)))
            .collect();
        let hi: Vec<C<T>> = ((n as i64 + 1)..=(next as i64))
            .into_par_iter()
            .map(|k| f(node(length, tau, k)))
            .collect();
        let mut samples = lo;
        samples.extend_from_slice(&series.samples);
        samples.extend(hi);
        series = CardinalSeries { length, tau, n_min: -(next as i64), samples };
        n = next;
    }
}

/// F(ρ) = ∫_{−𝒯}^{𝒯} g(t) e^{iρt} dt with `g(t) = (1 − (t/𝒯)²)^4 · Σ_j c_j cos(j t + φ_j)`.
/// Used as a band-limited test signal. Exact for every ρ: integration by parts for
/// large frequencies, Gauss-Legendre for small ones.
pub fn synthesize_band_limited<T: Real>(length: T, coeffs: &[(T, T)], rho: C<T>) -> C<T> {
    let mut acc = KahanSum::new();
    for (j, &(c, ph)) in coeffs.iter().enumerate() {
        let j: T = from_usize(j);
        let e = C::new(ph.cos(), ph.sin());
        let plus = envelope_transform(length, rho + j);
        let minus = envelope_transform(length, rho - j);
        acc.add((e * plus + e.conj() * minus) * (c * lit(0.5)));
    }
    acc.value()
}

/// ∫_{−L}^{L} (1 − (t/L)²)^4 e^{iωt} dt.
fn envelope_transform<T: Real>(length: T, omega: C<T>) -> C<T> {
    let iu = C::new(T::zero(), T::one());
    if (omega * length).norm() < lit(4.0) {
        let (x, w) = crate::quadrature::gauss_legendre_on::<T>(64, -length, length);
        let mut acc = KahanSum::new();
        for (&t, &wt) in x.iter().zip(&w) {
            let u = t / length;
            acc.add((iu * omega * t).exp() * ((T::one() - u * u).powi(4) * wt));
        }
        return acc.value();
    }
    // Coefficients of the envelope polynomial in t.
    let mut p = [T::zero(); 9];
    for (i, b) in [1.0, 4.0, 6.0, 4.0, 1.0].iter().enumerate() {
        let sign = if i % 2 == 0 { T::one() } else { -T::one() };
        p[2 * i] = sign * lit::<T>(*b) / length.powi(2 * i as i32);
    }
    // Σ_k (−1)^k [P^{(k)} e^{iωt}] between −L and L, over (iω)^{k+1}.
    let iw = iu * omega;
    let (ep, em) = ((iw * length).exp(), (-iw * length).exp());
    let mut denom = iw;
    let mut acc = KahanSum::new();
    for k in 0..=8 {
        let at = |t: T| p.iter().rev().fold(T::zero(), |a, &c| a * t + c);
        let term = (ep * at(length) - em * at(-length)) / denom;
        acc.add(if k % 2 == 0 { term } else { -term });
        for i in 0..8 {
            p[i] = p[i + 1] * from_usize(i + 1);
        }
        p[8] = T::zero();
        denom *= iw;
    }
    acc.value()
}
