//! Zero counting by the argument principle on rectangles.

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Real, C};

#[derive(Clone, Debug)]
pub struct ZeroCount<T> {
    pub count: i64,
    /// Smallest |f| met on the boundary.
    pub min_modulus: T,
    pub evaluations: usize,
}

/// Number of zeros of `f` inside `[x0, x1] × [y0, y1]`.
pub fn count_zeros_rect<T: Real>(
    f: &dyn Fn(C<T>) -> C<T>,
    x0: T,
    x1: T,
    y0: T,
    y1: T,
    segments_per_unit: T,
) -> Result<ZeroCount<T>> {
    let corners = [C::new(x0, y0), C::new(x1, y0), C::new(x1, y1), C::new(x0, y1)];
    let mut total = T::zero();
    let mut min_mod = T::infinity();
    let mut evals = 0usize;
    for i in 0..4 {
        let a = corners[i];
        let b = corners[(i + 1) % 4];
        let n = ((b - a).norm() * segments_per_unit).ceil().to_usize().unwrap_or(1).max(8);
        let mut za = a;
        let mut fa = f(za);
        evals += 1;
        for s in 1..=n {
            let zb = a + (b - a) * (from_usize::<T>(s) / from_usize::<T>(n));
            let fb = f(zb);
            evals += 1;
            min_mod = min_mod.min(fa.norm());
            total += winding_piece(f, za, zb, fa, fb, 0, &mut evals, &mut min_mod)?;
            za = zb;
            fa = fb;
        }
    }
    let turns = total / (lit::<T>(2.0) * T::PI());
    let count = turns.round();
    if (turns - count).abs() > lit(0.1) {
        return Err(Error::numerical(format!("argument principle did not close (winding {turns})")));
    }
    Ok(ZeroCount { count: count.to_i64().unwrap_or(0), min_modulus: min_mod, evaluations: evals })
}

#[allow(clippy::too_many_arguments)]
fn winding_piece<T: Real>(
    f: &dyn Fn(C<T>) -> C<T>,
    za: C<T>,
    zb: C<T>,
    fa: C<T>,
    fb: C<T>,
    depth: usize,
    evals: &mut usize,
    min_mod: &mut T,
) -> Result<T> {
    if fa.norm() == T::zero() || fb.norm() == T::zero() || !fa.norm().is_finite() || !fb.norm().is_finite() {
        return Err(Error::numerical("zero or overflow on the counting contour"));
    }
    let d = (fb / fa).arg();
    if d.abs() < lit(0.6) || depth > 24 {
        return Ok(d);
    }
    let zm = (za + zb) * lit::<T>(0.5);
    let fm = f(zm);
    *evals += 1;
    *min_mod = min_mod.min(fm.norm());
    Ok(winding_piece(f, za, zm, fa, fm, depth + 1, evals, min_mod)?
        + winding_piece(f, zm, zb, fm, fb, depth + 1, evals, min_mod)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    #[test]
    fn counts_polynomial_roots() {
        let f = |z: C<f64>| (z - cx(0.5, 0.5)) * (z - cx(-1.0, 0.2)) * (z - cx(3.0, 3.0));
        let c = count_zeros_rect(&f, -2.0, 2.0, -1.0, 1.0, 4.0).unwrap();
        assert_eq!(c.count, 2);
    }

    #[test]
    fn counts_sine_zeros() {
        let f = |z: C<f64>| z.sin();
        let c = count_zeros_rect(&f, 0.5, 10.0, -0.5, 0.5, 8.0).unwrap();
        assert_eq!(c.count, 3);
    }
}
