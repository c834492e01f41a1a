//! Mean-value expansions and monotone finite-difference schemes for the
//! fractional p-Laplacian.
//!
//! The library evaluates the operator -(-Delta)^s_p through three routes:
//!
//! * asymptotic mean-value expansions over a radius r (`expansion`),
//!   including the local surface/volume averages that recover the
//!   p-Laplacian and a kernel-weighted baseline expansion for comparison;
//! * lattice discretizations with cell-integrated (W1) or collocated (W2)
//!   weights and a closed-form tail lump (`lattice`, `discrete_op`);
//! * an independent principal-value quadrature oracle (`expansion`,
//!   `quad`) used by the convergence harness (`study`).
//!
//! On top of the spatial operator, `evolve` runs the explicit
//! CFL-conditioned scheme for u_t = -(-Delta)^s_p u + f with the running
//! boundedness, Hölder, and continuous-dependence diagnostics.
//!
//! Sign convention: everything here evaluates the monotone (heat-flow)
//! form -(-Delta)^s_p, so smooth concave bumps diffuse downward.

pub mod error;
pub mod quad;
pub mod field;
pub mod kernel;
pub mod expansion;
pub mod lattice;
pub mod discrete_op;
pub mod evolve;
pub mod study;

pub use error::{Error, Result};
