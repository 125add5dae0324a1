//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All solvers are written against [`Real`], which is implemented for `f32`
//! and `f64`. Tolerances that the library pins in absolute terms (row sums,
//! monotonicity slack, budget slack) are widened to the precision floor of
//! the scalar via [`Real::floor_tol`], so the same code runs in single
//! precision with proportionally looser guarantees.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar usable by the solvers: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Every literal used by the crate is
    /// representable (possibly rounded) in both supported types.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    /// Converts a count.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lossy view as `f64`, used for hashing, formatting and sampling.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `max(tol, 64 * eps)`: an absolute tolerance no tighter than what the
    /// scalar can actually resolve around unit-scale quantities.
    #[inline]
    fn floor_tol(tol: f64) -> Self {
        let eps = Self::epsilon() * Self::lit(64.0);
        let t = Self::lit(tol);
        if t > eps {
            t
        } else {
            eps
        }
    }

    /// `x ln x` with the `0 ln 0 = 0` convention.
    #[inline]
    fn xlnx(self) -> Self {
        if self > Self::zero() {
            self * self.ln()
        } else {
            Self::zero()
        }
    }

    /// Nats to bits.
    #[inline]
    fn nats_to_bits(self) -> Self {
        self / Self::LN_2()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Output unit for information quantities. Everything is computed in nats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoUnit {
    #[default]
    Bits,
    Nats,
}

impl InfoUnit {
    pub fn from_nats<T: Real>(self, nats: T) -> T {
        match self {
            InfoUnit::Bits => nats.nats_to_bits(),
            InfoUnit::Nats => nats,
        }
    }

    pub fn from_bits<T: Real>(self, bits: T) -> T {
        match self {
            InfoUnit::Bits => bits,
            InfoUnit::Nats => bits * T::LN_2(),
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            InfoUnit::Bits => "bits",
            InfoUnit::Nats => "nats",
        }
    }
}

impl std::str::FromStr for InfoUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bits" => Ok(InfoUnit::Bits),
            "nats" => Ok(InfoUnit::Nats),
            other => Err(format!("unknown unit `{other}` (expected bits|nats)")),
        }
    }
}
