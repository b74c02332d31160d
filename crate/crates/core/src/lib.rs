//! Block orthogonal matching pursuit (BOMP) for recovering the block-sparsity
//! pattern of signals observed through a noisy linear measurement model
//! `y = A x + w`.
//!
//! The crate is split into five layers:
//!
//! * [`linalg`]: dense primitives, mixed ℓ2/ℓp block norms, least squares and
//!   projections.
//! * [`coherence`]: the block dictionary type and its coherence metrics
//!   (μ, block-coherence μ_B, sub-coherence ν).
//! * [`recovery`]: the BOMP and OMP greedy solvers and the greedy selection
//!   ratio diagnostic.
//! * [`certificates`]: the sufficient recovery conditions and the
//!   intermediate inequalities used to prove them, as checkable predicates.
//! * [`experiments`]: seeded instance generators, Monte Carlo sweeps and
//!   CSV/JSON/SVG emission.

// Negated comparisons below deliberately treat NaN as invalid.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod coherence;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod recovery;

pub use coherence::{BlockDictionary, CoherenceProfile};
pub use error::{Error, Result};
pub use linalg::{BlockPartition, Matrix, Vector};
pub use recovery::{BlockSparseSignal, BlockSupport, RecoveryTrace, StopReason, StoppingRule};
