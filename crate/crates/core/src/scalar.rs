//! Scalar abstraction for the numerical core.
//!
//! Channel synthesis, precoding, link metrics and maps are written against
//! [`Real`] so they run in `f32` or `f64`. Random draws are always produced
//! in `f64` and narrowed, which keeps an `f32` run on the same realization
//! as the `f64` run for a given seed.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal; exact for `f64`, rounded for `f32`.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    #[inline]
    fn two_pi() -> Self {
        Self::TAU()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `Σ xₖ·yₖ` without conjugation (row vector times column vector).
#[inline]
pub(crate) fn bilinear<T: Real>(x: &[Complex<T>], y: &[Complex<T>]) -> Complex<T> {
    x.iter()
        .zip(y)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| {
            acc + a * b
        })
}

/// `Σ conj(xₖ)·yₖ`.
#[inline]
pub(crate) fn inner<T: Real>(x: &[Complex<T>], y: &[Complex<T>]) -> Complex<T> {
    x.iter()
        .zip(y)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| {
            acc + a.conj() * b
        })
}

#[inline]
pub(crate) fn norm_sqr<T: Real>(x: &[Complex<T>]) -> T {
    x.iter().map(|c| c.norm_sqr()).sum()
}

/// Unevaluated sum `hi + lo` carrying about twice the working precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Wide<T> {
    hi: T,
    lo: T,
}

impl<T: Real> Wide<T> {
    pub(crate) fn exact(x: T) -> Self {
        Self {
            hi: x,
            lo: T::zero(),
        }
    }

    pub(crate) fn value(self) -> T {
        self.hi + self.lo
    }

    fn two_sum(a: T, b: T) -> Self {
        let s = a + b;
        let bb = s - a;
        Self {
            hi: s,
            lo: (a - (s - bb)) + (b - bb),
        }
    }

    fn renorm(hi: T, lo: T) -> Self {
        let s = hi + lo;
        Self {
            hi: s,
            lo: lo - (s - hi),
        }
    }

    pub(crate) fn product(a: T, b: T) -> Self {
        let p = a * b;
        Self {
            hi: p,
            lo: a.mul_add(b, -p),
        }
    }

    pub(crate) fn add(self, o: Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        let t = Self::two_sum(self.lo, o.lo);
        let r = Self::renorm(s.hi, s.lo + t.hi);
        Self::renorm(r.hi, r.lo + t.lo)
    }

    pub(crate) fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub(crate) fn sub(self, o: Self) -> Self {
        self.add(o.neg())
    }

    pub(crate) fn mul(self, o: Self) -> Self {
        let p = Self::product(self.hi, o.hi);
        Self::renorm(p.hi, p.lo + (self.hi * o.lo + self.lo * o.hi))
    }
}

/// Complex number over [`Wide`] parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct WideComplex<T> {
    pub(crate) re: Wide<T>,
    pub(crate) im: Wide<T>,
}

impl<T: Real> WideComplex<T> {
    pub(crate) fn exact(z: Complex<T>) -> Self {
        Self {
            re: Wide::exact(z.re),
            im: Wide::exact(z.im),
        }
    }

    pub(crate) fn zero() -> Self {
        Self::exact(Complex::new(T::zero(), T::zero()))
    }

    pub(crate) fn add(self, o: Self) -> Self {
        Self {
            re: self.re.add(o.re),
            im: self.im.add(o.im),
        }
    }

    pub(crate) fn mul(self, o: Self) -> Self {
        Self {
            re: self.re.mul(o.re).sub(self.im.mul(o.im)),
            im: self.re.mul(o.im).add(self.im.mul(o.re)),
        }
    }

    pub(crate) fn scale(self, k: Wide<T>) -> Self {
        Self {
            re: self.re.mul(k),
            im: self.im.mul(k),
        }
    }

    pub(crate) fn norm_sqr(self) -> Wide<T> {
        self.re.mul(self.re).add(self.im.mul(self.im))
    }
}
