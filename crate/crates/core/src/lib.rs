//! Linear bandits under drift.
//!
//! Discounted LinUCB (exponentially forgetting least squares with a
//! self-normalized confidence radius), sliding-window LinUCB, plain LinUCB
//! and an oracle-restart baseline, together with the environments, the
//! seeded experiment harness and the empirical checks used to validate them.
//!
//! The numerical core ([`linalg`], [`estimator`], [`policies`]) is generic
//! over [`Real`] (`f32` or `f64`); the aliases below fix it to `f64`.

pub mod environments;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod policies;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

pub type SpdMatrixF64 = linalg::SpdMatrix<f64>;
pub type DiscountedStateF64 = estimator::DiscountedState<f64>;
pub type SlidingWindowStateF64 = estimator::SlidingWindowState<f64>;
pub type RidgeStateF64 = estimator::RidgeState<f64>;
pub type PolicyConfigF64 = policies::PolicyConfig<f64>;
pub type DLinUcbF64 = policies::DLinUcb<f64>;
pub type SwLinUcbF64 = policies::SwLinUcb<f64>;
pub type LinUcbF64 = policies::LinUcb<f64>;
