//! Real scalar abstraction shared by every numeric routine.
//!
//! All solvers work over `Complex<T>` for some `T: Real`; `f64` is the
//! reference precision and the one the default tolerances are tuned for.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type usable as the real part of the complex workhorse: f32 or f64.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` literal into this type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// A tolerance given in `f64` terms, floored at a small multiple of this
    /// type's machine epsilon so that single precision gets a usable value.
    #[inline]
    fn tol(x: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(100.0);
        Self::lit(x).max(floor)
    }

    #[inline]
    fn count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Lift a real number into the complex plane.
#[inline]
pub fn re<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// Complex scalar from two `f64` parts.
#[inline]
pub fn cplx<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}

/// Convert a complex value between precisions.
#[inline]
pub fn cast_complex<S: Real, T: Real>(z: Complex<S>) -> Complex<T> {
    Complex::new(T::lit(z.re.as_f64()), T::lit(z.im.as_f64()))
}

/// Integer power of a complex number, allowing negative exponents.
pub fn powi<T: Real>(z: Complex<T>, k: i64) -> Complex<T> {
    if k >= 0 {
        pow_u(z, k as u64)
    } else {
        Complex::new(T::one(), T::zero()) / pow_u(z, k.unsigned_abs())
    }
}

fn pow_u<T: Real>(mut base: Complex<T>, mut e: u64) -> Complex<T> {
    let mut acc = Complex::new(T::one(), T::zero());
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base;
        }
        base = base * base;
        e >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_is_floored_for_single_precision() {
        assert_eq!(f64::tol(1e-12), 1e-12);
        assert!(f32::tol(1e-12) > 1e-6);
    }

    #[test]
    fn negative_powers() {
        let z: Complex<f64> = cplx(2.0, 0.0);
        assert_eq!(powi(z, -3), cplx(0.125, 0.0));
        assert_eq!(powi(z, 0), cplx(1.0, 0.0));
        let i: Complex<f64> = cplx(0.0, 1.0);
        assert_eq!(powi(i, 2), cplx(-1.0, 0.0));
    }
}
