//! Scalar abstraction: the whole toolkit is generic over `Real`, with
//! concrete aliases for f64 at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

/// Floating-point scalar usable everywhere in the toolkit.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Debug
    + Display
    + FromStr
    + Sum
    + Send
    + Sync
    + 'static
{
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 not representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize not representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
