//! Estimator rate-distortion functions, constrained capacity and
//! capacity-rate-distortion regions of finite state-dependent memoryless
//! channels (SDMC).
//!
//! A channel has input `X`, i.i.d. state `S ~ P_S`, a sensing observation
//! `T ~ P_{T|XS}` returned to the transmitter and a channel output
//! `Y ~ P_{Y|XS}` seen by the receiver together with `S`. The transmitter
//! estimates `S` by `Z` under a distortion `d(s, z)`.
//!
//! * [`model`]: channel model, validation and the basic information measures.
//! * [`estimator`]: minimum-distortion estimator and sensing costs `c(x)`.
//! * [`rd_ba`]: alternating-minimization solver for
//!   `R(D) = min I(T;Z|X)` subject to `E[d(S,Z)] <= D`.
//! * [`capacity`]: `max I(X;Y|S)` under sensing and input-cost budgets.
//! * [`region`]: the `(C, R, D)` outer-bound surface.
//! * [`analytic`]: closed forms used as oracles.
//!
//! All solvers are generic over the scalar ([`Real`], implemented for `f32`
//! and `f64`); the aliases below fix `f64`. Monte-Carlo sampling uses
//! `rand_chacha::ChaCha8Rng` seeded with `seed_from_u64`, so results are
//! reproducible across platforms.

pub mod analytic;
pub mod capacity;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod export;
pub mod model;
pub mod rd_ba;
pub mod region;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{InfoUnit, Real};

pub type Model = model::SdmcModel<f64>;
pub type Spec = model::ChannelSpec<f64>;
pub type Px = model::InputDist<f64>;
pub type Kernel = rd_ba::EstimatorKernel<f64>;
pub type Marginal = rd_ba::MarginalQ<f64>;
pub type Curve = rd_ba::RdCurve<f64>;
pub type Point = rd_ba::RdPoint<f64>;
pub type Capacity = capacity::CapacityPoint<f64>;
pub type Surface = region::RegionSurface<f64>;
