//! Floating-point scalar abstraction.
//!
//! All geometry, splatting, and optimization code is generic over [`Scalar`]
//! so the same pipeline runs at 64-bit (the reference precision used by the
//! CLI and the test suite) and at 32-bit (the fast path). Concrete aliases
//! for both instantiations live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Scalar type for all numeric work: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Convert an `f64` constant into `Self` (rounds when `Self = f32`).
    #[inline]
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant")
    }

    /// Widen to `f64`. Exact for both supported scalar types.
    #[inline]
    fn widen(self) -> f64 {
        self.to_f64().expect("scalar widens to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Map the high 53 bits of a raw `u64` draw to `[0, 1)`. Used everywhere a
/// seeded uniform draw is needed, so determinism does not depend on any
/// distribution code outside this crate.
pub(crate) fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_round_trip() {
        assert_eq!(f64::c(0.9999), 0.9999);
        assert_eq!(f32::c(0.5), 0.5f32);
        assert_eq!(1.25f32.widen(), 1.25f64);
    }
}
