//! Numerical laboratory for heat diffusion and hyperbolic-time averaging on
//! Riemann-surface laminations.
//!
//! The crate is organized by subsystem:
//!
//! * [`hyp_core`]: Poincaré-disc geometry, `M_R`, quadrature grids.
//! * [`heat_kernel`]: the hyperbolic heat kernel and its time integrals.
//! * [`linear_foliation`]: leaves of linear vector fields near a singular point.
//! * [`green_uniformize`]: numerical Green functions, conformal radii, hyperbolic densities.
//! * [`fuchsian`]: the level-2 congruence group and its quotient.
//! * [`birkhoff`]: hyperbolic-time averages `B_R`, `B'_R` and equidistribution.
//! * [`diffusion`]: discrete leafwise heat semigroups over harmonic measures.
//! * [`currents`]: mass profiles, Lelong numbers, Poincaré-mass integrals.
//!
//! Data-parallel loops go through [`exec::Exec`]; the `parallel` feature
//! (on by default) backs them with rayon.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons reject NaN

pub mod birkhoff;
pub mod config;
pub mod currents;
pub mod diffusion;
pub mod error;
pub mod exec;
pub mod fuchsian;
pub mod green_uniformize;
pub mod heat_kernel;
pub mod hyp_core;
pub mod linalg;
pub mod linear_foliation;
pub mod quad;

pub use config::Tolerances;
pub use error::{Error, Result};
pub use exec::Exec;
pub use quad::Estimate;
