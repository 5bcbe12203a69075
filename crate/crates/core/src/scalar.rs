//! Scalar abstraction shared by every numerical module.
//!
//! All linear algebra is written against [`Real`], so the same code runs in
//! `f64` (the default used by the CLI and the acceptance suite) and `f32`.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point type the crate is generic over.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Entrywise tolerance used when validating orthonormal columns.
    fn orthonormality_tol() -> Self;

    /// Converts an `f64` literal; all constants in this crate are representable.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f64 {
    fn orthonormality_tol() -> Self {
        1e-10
    }
}

impl Real for f32 {
    fn orthonormality_tol() -> Self {
        1e-4
    }
}

/// Complex number over the crate scalar.
pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn czero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub(crate) fn cone<T: Real>() -> C<T> {
    Complex::new(T::one(), T::zero())
}
