//! Numeric traits the tensor kernels and solvers are generic over.
//!
//! The multilinear kernels (unfold, refold, mode products, Kronecker
//! products, inner products) only need ring arithmetic, so they accept any
//! [`Element`], including exact rationals. Everything that takes a square
//! root or an SVD needs a [`Scalar`], i.e. `f32` or `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Ring element stored in a tensor.
pub trait Element: Copy + Num + PartialOrd + Debug + Send + Sync + 'static {
    /// `false` for NaN and infinities; exact types are always finite.
    fn is_finite_value(self) -> bool;
}

impl Element for f32 {
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl Element for f64 {
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl Element for i64 {
    fn is_finite_value(self) -> bool {
        true
    }
}

impl Element for Ratio<i64> {
    fn is_finite_value(self) -> bool {
        true
    }
}

impl Element for Ratio<i128> {
    fn is_finite_value(self) -> bool {
        true
    }
}

/// Real floating-point scalar used by the decompositions.
pub trait Scalar: Element + Float + FromPrimitive + ToPrimitive + Sum + Display {
    /// Lossy conversion from `f64`; used for literal constants.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    /// Widen to `f64` for reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finiteness() {
        assert!(1.0f64.is_finite_value());
        assert!(!f64::NAN.is_finite_value());
        assert!(!f32::INFINITY.is_finite_value());
        assert!(Ratio::new(1i64, 3).is_finite_value());
    }

    #[test]
    fn constant_conversion() {
        assert_eq!(<f32 as Scalar>::of(0.5), 0.5f32);
        assert_eq!(<f64 as Scalar>::of(1e-10).to_f64_lossy(), 1e-10);
    }
}
