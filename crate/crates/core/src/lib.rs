//! Exact front tracking for scalar conservation laws `u_t + (k(x) f(u))_x = 0`
//! with piecewise-constant `k`, and the inverse procedures that recover `f`,
//! a fully observed `k`, or a single hidden obstruction from observed solutions.

pub mod cli;
pub mod error;
pub mod fluxlib;
pub mod fronttrack;
pub mod illposed;
pub mod numeric;
pub mod observe;
pub mod recon_flux;
pub mod recon_k;
pub mod recon_obstruction;
pub mod riemann;
pub mod tol;

pub use error::{Error, Result};
pub use fluxlib::{Branch, FluxCurve, FluxKind, Obstruction, SpatialCoeff};
pub use fronttrack::{History, Profile, Scenario};
pub use riemann::{Wave, WaveFan};
