//! Coined discrete-time quantum walks on a line with step-dependent coins.
//!
//! The walker stands still when its coin is `UP` and moves one site right
//! when it is `DOWN`. On top of the simulator the crate provides reachability
//! tests, constructive coin back-solving, target engineering through the
//! interior `d`-parameter system, direct fidelity optimization, analysis
//! utilities and a compiler to a wave-plate/q-plate optical train.
//!
//! Amplitude-level code is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the solvers use.

pub mod analysis;
pub mod backsolve;
pub mod coin;
pub mod engineer;
pub mod error;
pub mod io;
pub mod mat2;
pub mod optics;
pub mod optimizer;
mod precise;
pub mod reachability;
pub mod rng;
pub mod scalar;
pub mod state;
pub mod tol;
pub mod walk;

pub use engineer::{DSolution, EngineeringSolution};
pub use error::{QwError, Result};
pub use scalar::Real;

pub type Complex64 = num_complex::Complex<f64>;

pub type WalkerState = state::WalkerState<f64>;
pub type WalkerStateF32 = state::WalkerState<f32>;
pub type CoinOperator = coin::CoinOperator<f64>;
pub type CoinOperatorF32 = coin::CoinOperator<f32>;
pub type CoinParams = coin::CoinParams<f64>;
pub type TargetSuperposition = state::TargetSuperposition<f64>;
pub type VVector = state::VVector<f64>;
pub type ProjectionResult = walk::ProjectionResult<f64>;
pub type Mat2 = mat2::Mat2<f64>;
