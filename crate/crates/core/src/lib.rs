//! Radial numerics for the energy-critical quadratic Schrödinger system in six dimensions
//!
//! ```text
//! i u_t + Δu + ū v = 0,    i v_t + κΔv + u² = 0,    x ∈ ℝ⁶,
//! ```
//!
//! around its ground state `𝐐 = (√κ Q, Q)`, `Q = (1 + r²/24)⁻²`.

pub mod banded;
pub mod ddouble;
pub mod error;
pub mod evolution;
pub mod functionals;
pub mod grid;
pub mod groundstate;
pub mod interp;
pub mod io;
pub mod linops;
pub mod modulation;
pub mod random;
pub mod special;
pub mod spectrum;

pub use error::{Error, Result};
pub use functionals::{ConservedSet, System, VirialWeight};
pub use grid::{FieldPair, GridSpec, Mapping, OuterBoundary, RadialField, RadialGrid, C64, PI3};
pub use groundstate::GroundStateBundle;
