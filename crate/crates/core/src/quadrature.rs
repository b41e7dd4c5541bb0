//! Gauss-Legendre rules, generic over the scalar type.

use crate::scalar::{from_usize, lit, Real};

/// Nodes and weights on [-1, 1], by Newton iteration on P_n.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n > 0);
    let mut x = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let nf: T = from_usize(n);
    for i in 0..(n + 1) / 2 {
        let mut z = (T::PI() * (from_usize::<T>(i) + lit(0.75)) / (nf + lit(0.5))).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= T::epsilon() * lit(4.0) {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != T::zero() { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = lit::<T>(2.0) / ((T::one() - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre<T: Real>(n: usize, z: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = z;
    for k in 2..=n {
        let kf: T = from_usize(k);
        let p2 = ((lit::<T>(2.0) * kf - T::one()) * z * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf: T = from_usize(n);
    let d = nf * (z * p1 - p0) / (z * z - T::one());
    (p1, d)
}

/// Rule mapped to [a, b].
pub fn gauss_legendre_on<T: Real>(n: usize, a: T, b: T) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre::<T>(n);
    let half = (b - a) * lit(0.5);
    let mid = (a + b) * lit(0.5);
    (x.iter().map(|&t| mid + half * t).collect(), w.iter().map(|&v| v * half).collect())
}

/// Composite rule: `panels` equal panels of `n` points each.
pub fn composite_gauss<T: Real>(n: usize, panels: usize, a: T, b: T) -> (Vec<T>, Vec<T>) {
    let mut xs = Vec::with_capacity(n * panels);
    let mut ws = Vec::with_capacity(n * panels);
    let step = (b - a) / from_usize(panels);
    for p in 0..panels {
        let lo = a + step * from_usize(p);
        let (x, w) = gauss_legendre_on(n, lo, lo + step);
        xs.extend(x);
        ws.extend(w);
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 12, 40] {
            let (x, w) = gauss_legendre::<f64>(n);
            let deg = 2 * n - 1;
            let s: f64 = x.iter().zip(&w).map(|(&x, &w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((s - exact).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn f32_rule() {
        let (x, w) = gauss_legendre_on::<f32>(8, 0.0, std::f32::consts::PI);
        let s: f32 = x.iter().zip(&w).map(|(x, w)| w * x.sin()).sum();
        assert!((s - 2.0).abs() < 1e-5);
    }
}
