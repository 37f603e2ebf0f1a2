//! Tolerance constants shared by every kernel.

use serde::{Deserialize, Serialize};

/// One place for every numerical tolerance used by the library.
///
/// Every operation that integrates or solves takes a reference to this record
/// and reports the error it actually achieved next to its result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Absolute tolerance for one-dimensional radial integrals (`M_R`, disc areas).
    pub radial_abs: f64,
    /// Absolute tolerance for heat-kernel and time integrals.
    pub kernel_abs: f64,
    /// Relative tolerance paired with `kernel_abs`.
    pub kernel_rel: f64,
    /// Upper bound on adaptive subintervals per integral.
    pub max_intervals: usize,
    /// Relative residual target for the Green-function CG solve.
    pub green_cg_rel: f64,
    /// Relative residual target for the implicit-Euler linear solves.
    pub semigroup_rel: f64,
    /// Iteration cap for the iterative linear solvers.
    pub max_solver_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            radial_abs: 1e-10,
            kernel_abs: 1e-8,
            kernel_rel: 1e-10,
            max_intervals: 4000,
            green_cg_rel: 1e-11,
            semigroup_rel: 1e-14,
            max_solver_iterations: 200_000,
        }
    }
}

impl Tolerances {
    /// Copy with a different absolute kernel tolerance.
    pub fn with_abs(mut self, abs: f64) -> Self {
        self.kernel_abs = abs;
        self
    }

    /// All tolerances must be strictly positive and finite.
    pub fn validate(&self) -> Result<(), String> {
        let checks = [
            ("radial_abs", self.radial_abs),
            ("kernel_abs", self.kernel_abs),
            ("kernel_rel", self.kernel_rel),
            ("green_cg_rel", self.green_cg_rel),
            ("semigroup_rel", self.semigroup_rel),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("tolerance {name} must be positive, got {v}"));
            }
        }
        if self.max_intervals == 0 || self.max_solver_iterations == 0 {
            return Err("iteration limits must be positive".into());
        }
        Ok(())
    }
}
