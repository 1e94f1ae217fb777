use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating point type the ranking math runs on: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Debug + Display + Send + Sync + 'static
{
    fn half() -> Self {
        Self::from_f64(0.5).unwrap()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
