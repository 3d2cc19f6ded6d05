//! Spectral-Galerkin simulation and verification toolkit for slow-fast
//! semilinear SPDEs on `H = L²(0, π)` with bounded Hölder drifts.
//!
//! The coupled system is
//!
//! ```text
//! dX = [A X + B(X, Y)] dt + √Q₁ dW¹
//! dY = ε⁻¹ [A Y + F(X, Y)] dt + ε^{-1/2} √Q₂ dW²
//! ```
//!
//! with `A` diagonal in the Dirichlet sine basis. The crate simulates the
//! system, estimates the averaged drift `B̄(x) = ∫ B(x, y) μˣ(dy)` from the
//! frozen equation, solves the averaged equation, solves the resolvent
//! equation `λU − L̄U = G` at truncated dimension and runs Monte-Carlo
//! verification experiments.

pub mod averaging;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod model;
pub mod noise;
pub mod numerics;
pub mod simulator;
pub mod spectral;
pub mod zvonkin;

pub use error::{Error, Result};
