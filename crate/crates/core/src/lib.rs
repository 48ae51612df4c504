//! All-speed finite-volume solver for the compressible Euler and
//! Navier-Stokes equations with a semi-implicit pressure formulation.
//!
//! Convective transport is explicit (Rusanov fluxes on material wave
//! speeds, MUSCL minmod reconstruction); the acoustic pressure part is
//! implicit through an elliptic solve, which keeps the time step bounded
//! by the fluid velocity rather than the sound speed. The solver operates
//! on nondimensionalized fields with a global Mach number `eps`, and its
//! cost and accuracy stay uniform as `eps -> 0`.

pub mod cases;
pub mod cli;
pub mod diagnostics;
pub mod eos;
pub mod error;
pub mod flux;
pub mod linalg;
pub mod mesh;
pub mod output;
pub mod par;
pub mod pressure;
pub mod riemann;
pub mod state;
pub mod stepper;

pub use cli::run_cli;
