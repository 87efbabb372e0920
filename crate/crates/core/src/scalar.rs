//! Scalar abstraction for the numerical core.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, NumCast};
use rand::distributions::uniform::SampleUniform;

/// Floating-point scalar the matrix and model code is generic over.
pub trait Real:
    Float + FloatConst + Debug + Display + Default + Sum + SampleUniform + Send + Sync + 'static
{
    /// Machine epsilon of the type, widened so tolerances written for `f64`
    /// stay meaningful for narrower types.
    const TOL_FLOOR: f64;

    fn of(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("f64 is representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `tol` unless the type cannot resolve it.
    fn tol(tol: f64) -> Self {
        Self::of(tol.max(Self::TOL_FLOOR))
    }
}

impl Real for f64 {
    const TOL_FLOOR: f64 = 0.0;
}

impl Real for f32 {
    const TOL_FLOOR: f64 = 5e-5;
}
