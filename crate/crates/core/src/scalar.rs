//! Scalar abstraction. Everything numeric is generic over `T: Real`.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};

/// Real floating type the solver runs on (f32 or f64).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + rustfft::FftNum
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

pub type C<T> = Complex<T>;

/// Converts an f64 literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable")
}

#[inline]
pub fn cx<T: Real>(re: f64, im: f64) -> C<T> {
    C::new(lit(re), lit(im))
}

#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("index representable")
}

#[inline]
pub fn from_i64<T: Real>(n: i64) -> T {
    T::from_i64(n).expect("index representable")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn czero<T: Real>() -> C<T> {
    C::new(T::zero(), T::zero())
}

#[inline]
pub fn cone<T: Real>() -> C<T> {
    C::new(T::one(), T::zero())
}

#[inline]
pub fn i_unit<T: Real>() -> C<T> {
    C::new(T::zero(), T::one())
}

#[inline]
pub fn creal<T: Real>(x: T) -> C<T> {
    C::new(x, T::zero())
}

/// Square root with Im ≥ 0 (Re ≥ 0 on the positive real axis).
pub fn sqrt_upper<T: Real>(lambda: C<T>) -> C<T> {
    let r = lambda.sqrt();
    if r.im < T::zero() || (r.im == T::zero() && r.re < T::zero()) {
        -r
    } else {
        r
    }
}

/// Integer power of a complex number, negative exponents allowed.
pub fn cpowi<T: Real>(z: C<T>, k: i32) -> C<T> {
    if k >= 0 {
        z.powu(k as u32)
    } else {
        cone::<T>() / z.powu((-k) as u32)
    }
}

/// Compensated complex accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum<T> {
    sum: C<T>,
    comp: C<T>,
}

impl<T: Real> KahanSum<T> {
    pub fn new() -> Self {
        Self { sum: czero(), comp: czero() }
    }

    pub fn add(&mut self, v: C<T>) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> C<T> {
        self.sum
    }
}

/// sin(z)/z, continuous through z = 0.
pub fn sinc<T: Real>(z: C<T>) -> C<T> {
    if z.norm() < lit(1e-4) {
        let z2 = z * z;
        cone::<T>() - z2 / lit::<T>(6.0) + z2 * z2 / lit::<T>(120.0) - z2 * z2 * z2 / lit::<T>(5040.0)
    } else {
        z.sin() / z
    }
}
