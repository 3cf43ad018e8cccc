//! Two-qubit controlled-PHASE gate dynamics under three equations of motion:
//! steepest-entropy-ascent (SEAQT), Lindblad pure dephasing, and unitary
//! von Neumann evolution.
//!
//! - [`linalg`]: dense 2×2 / 4×4 Hermitian kernels.
//! - [`dynamics`]: Hamiltonians, equation-of-motion right-hand sides, RK4 integration.
//! - [`metrics`]: entropy, entropy-generation rate, concurrence, Bell fidelity, purity.
//! - [`protocol`]: the CPHASE pulse sequence, calibration and sweeps.
//! - [`harness`]: random states, positivity stress runs, CSV/SVG output, CLI.

// Negated comparisons are how NaN inputs get rejected alongside bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod protocol;
pub mod state;

pub use error::{Error, Result};
pub use state::DensityMatrix;
