//! Scalar abstractions shared by the numeric core.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, Num, ToPrimitive};

/// Real floating-point type the linear-algebra core is generic over.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Default + Send + Sync + nalgebra::RealField + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over a [`Real`].
pub type Cx<T> = Complex<T>;

/// Field used for exact expectations: rationals for the oracle, floats for everything else.
pub trait ExactField: Num + Clone + Debug + std::ops::Neg<Output = Self> {
    fn from_i64(n: i64) -> Self;
    fn to_f64(&self) -> f64;
    fn frac(num: i64, den: i64) -> Self {
        Self::from_i64(num) / Self::from_i64(den)
    }
}

impl ExactField for f64 {
    fn from_i64(n: i64) -> Self {
        n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl ExactField for BigRational {
    fn from_i64(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn to_f64(&self) -> f64 {
        let n = self.numer().to_f64().unwrap_or(f64::NAN);
        let d = self.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    }
}
