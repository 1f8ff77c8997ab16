//! Cyclic compartmental differential equations with distributed delays.
//!
//! A cyclic model chains `n` stages, each driven by the (possibly delayed)
//! previous stage, with the last stage feeding back into the first. Every
//! stage is linear in its own state, which lets each intermediate
//! compartment be written as an integral functional of upstream history.
//! Composing those functionals reduces the whole loop to a scalar
//! distributed delay equation for the last compartment.
//!
//! The crate provides:
//!
//! * [`kernels`]: delay densities (Dirac, Erlang, tabulated) with Laplace
//!   transforms, moments and convolution.
//! * [`model`]: the per-stage model, presets and the JSON config format.
//! * [`simulate`]: fixed-step RK4 integration with history quadrature and
//!   the classical linear chain expansion of Erlang edges.
//! * [`reduction`]: stage integrals, their composition, history mapping,
//!   consistency checks and partial reduction.
//! * [`stability`]: equilibria, the characteristic function, complex root
//!   finding and Hopf scans.
//! * [`equivalence`]: dual-simulation harnesses comparing formulations.

// `!(x > 0.0)` deliberately rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equivalence;
pub mod error;
pub mod kernels;
pub mod model;
pub mod output;
pub mod reduction;
pub mod simulate;
pub mod stability;
pub mod trajectory;

pub use error::{Error, Result};
pub use kernels::DelayKernel;
pub use model::{CyclicModel, FeedbackFn, Stage, StateFn};
pub use num_complex::Complex64;
pub use simulate::SimConfig;
pub use trajectory::Trajectory;
