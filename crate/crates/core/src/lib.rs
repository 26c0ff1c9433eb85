//! Numerical laboratory for the semilinear damped wave equation
//!
//! ```text
//! u_tt - Δu + u_t = |u|^{1+2/n} μ(|u|),   n = 1, 2
//! ```
//!
//! on a periodic box, where `μ` is a modulus of continuity. The crate is
//! organised bottom-up:
//!
//! - [`quadrature`]: adaptive Gauss–Kronrod integration.
//! - [`modulus`]: the catalog of moduli, the induced nonlinearity and the
//!   structural checks (slow variation, Dini-type integral, convexity of `h`).
//! - [`grid`]: periodic grid fields, spectral transforms, norms and the
//!   Gagliardo–Nirenberg ratios, plus field file I/O.
//! - [`linear`]: exact Fourier-multiplier propagator of the linear damped wave
//!   equation and decay-rate fitting.
//! - [`semilinear`]: Strang splitting with the exact linear flow, blow-up
//!   detection, Picard/Duhamel cross-validation and lifespan sweeps.
//! - [`testfunction`]: cut-off weights, the `I_R`, `y(r)`, `Y(R)` functionals,
//!   the blow-up certificate and the weighted Jensen check.

pub mod data;
pub mod error;
pub mod grid;
pub mod linear;
pub mod modulus;
pub mod quadrature;
pub mod semilinear;
pub mod testfunction;
pub mod trajectory;

pub use error::{Error, Result};
pub use grid::{Dim, GridField, GridSpec, WaveState};
pub use modulus::{DiniLabel, Modulus, ModulusKind, Nonlinearity};
pub use trajectory::{NormRecord, Outcome, Sample, Trajectory};
