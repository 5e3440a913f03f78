//! Numerical dynamics of the square billiard with the contracting reflection
//! law `θ' = λθ`.
//!
//! The crate is organised bottom-up:
//!
//! - [`maps`]: the full billiard map on the perimeter of the unit square, the
//!   reduced map on `(0,1) × [0, π/2)`, inverses, singular sets and the
//!   quotient projection.
//! - [`linearization`]: triangular Jacobians, cocycles, stability of periodic
//!   orbits and Lyapunov exponents.
//! - [`manifolds`]: the stable graph `h_λ` of the hyperbolic fixed point, the
//!   curve `S_∞`, unstable segments, the homoclinic criterion and the trapping
//!   region.
//! - [`periodic`]: the fixed point `p_λ`, the `q_n` and `p_n` families and their
//!   existence thresholds `c_n`.
//! - [`bifurcation`]: the constants `λ₀`, `λ₁`, `λ₂`, basins of the parabolic
//!   line and regime classification.
//! - [`attractor`]: ensemble sampling of the hyperbolic attractor.
//! - [`export`]: CSV, JSON and binary raster encodings.
//!
//! Grid and ensemble work goes through [`par`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.

pub mod attractor;
pub mod bifurcation;
pub mod error;
pub mod export;
pub mod linearization;
pub mod manifolds;
pub mod maps;
pub mod par;
pub mod periodic;
pub mod roots;

pub use error::{Error, Result, SingularSet};
pub use maps::{FullPoint, Lambda, MapStep, ReducedPoint, RegionTag};
pub use par::Execution;
