//! Geometry of the Poincaré disc.
//!
//! Conventions: the Poincaré area form is `ω_P = 2 (1-|ζ|²)^{-2} i dζ∧dζ̄`,
//! i.e. `4 (1-|ζ|²)^{-2} dx dy`, the curvature `-1` metric. In geodesic polar
//! coordinates `(ρ, θ)` around the origin it reads `sinh ρ dρ dθ`. The disc
//! `D_R` of hyperbolic radius `R` is the Euclidean disc of radius
//! `r = tanh(R/2)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{domain, Result};
use crate::exec::compensated_sum;
use crate::quad::{composite_gauss_legendre, integrate_from, Estimate, QuadTol};

/// Hyperbolic radius of the centered disc of Euclidean radius `r`.
pub fn radius_hyp_from_euclid(r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return domain(format!("Euclidean radius must lie in (0,1), got {r}"));
    }
    Ok(2.0 * r.atanh())
}

/// Euclidean radius of the centered disc of hyperbolic radius `big_r`.
pub fn radius_euclid_from_hyp(big_r: f64) -> Result<f64> {
    if !(big_r > 0.0 && big_r.is_finite()) {
        return domain(format!("hyperbolic radius must be positive and finite, got {big_r}"));
    }
    Ok((0.5 * big_r).tanh())
}

/// A centered disc described by both of its radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypRadius {
    r: f64,
    big_r: f64,
}

impl HypRadius {
    pub fn from_euclid(r: f64) -> Result<Self> {
        Ok(Self {
            r,
            big_r: radius_hyp_from_euclid(r)?,
        })
    }

    pub fn from_hyp(big_r: f64) -> Result<Self> {
        Ok(Self {
            r: radius_euclid_from_hyp(big_r)?,
            big_r,
        })
    }

    /// Euclidean radius.
    pub fn euclid(&self) -> f64 {
        self.r
    }

    /// Hyperbolic radius.
    pub fn hyp(&self) -> f64 {
        self.big_r
    }
}

/// A point of the open unit disc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscPoint(Complex64);

impl DiscPoint {
    pub fn new(zeta: Complex64) -> Result<Self> {
        if !(zeta.norm_sqr() < 1.0) {
            return domain(format!("point {zeta} is not in the open unit disc"));
        }
        Ok(Self(zeta))
    }

    pub fn origin() -> Self {
        Self(Complex64::new(0.0, 0.0))
    }

    pub fn z(&self) -> Complex64 {
        self.0
    }

    pub fn modulus(&self) -> f64 {
        self.0.norm()
    }
}

/// Density of `ω_P` with respect to `i dζ∧dζ̄`: `2/(1-|ζ|²)²`.
pub fn poincare_density(zeta: DiscPoint) -> f64 {
    let s = 1.0 - zeta.z().norm_sqr();
    2.0 / (s * s)
}

/// Hyperbolic distance `ρ(ζ) = log((1+|ζ|)/(1-|ζ|))` from the origin.
pub fn hyp_distance_from_origin(zeta: DiscPoint) -> f64 {
    2.0 * zeta.modulus().atanh()
}

/// Möbius-invariant distance between two disc points.
pub fn hyp_distance(a: DiscPoint, b: DiscPoint) -> f64 {
    let num = (a.z() - b.z()).norm();
    let den = (Complex64::new(1.0, 0.0) - b.z().conj() * a.z()).norm();
    2.0 * (num / den).min(1.0).atanh()
}

/// Disc automorphism `ζ ↦ (ζ + η)/(1 + η̄ζ)` sending `0` to `η`.
#[inline]
pub fn transport(eta: Complex64, zeta: Complex64) -> Complex64 {
    (zeta + eta) / (Complex64::new(1.0, 0.0) + eta.conj() * zeta)
}

/// Poincaré area of `D_R`; closed form `2π(cosh R - 1) = 4π sinh²(R/2)`.
pub fn disc_area(big_r: f64) -> Result<f64> {
    if !(big_r > 0.0) {
        return domain(format!("disc radius must be positive, got {big_r}"));
    }
    let s = (0.5 * big_r).sinh();
    Ok(4.0 * PI * s * s)
}

/// `ln tanh(x/2)`, accurate for both small and large `x`.
pub(crate) fn ln_tanh_half(x: f64) -> f64 {
    let e = (-x).exp();
    (-(-x).exp_m1()).ln() - e.ln_1p()
}

/// `log⁺(r/|ζ|)` written in the hyperbolic radius: `ln tanh(R/2) - ln tanh(ρ/2)`.
#[inline]
pub fn log_weight_hyp(big_r: f64, rho: f64) -> f64 {
    if rho >= big_r {
        0.0
    } else if rho > 1.0 {
        // tanh(R/2)/tanh(ρ/2) - 1 = 2(e^{-ρ} - e^{-R}) / ((1 + e^{-R})(1 - e^{-ρ}))
        let gap = -2.0 * (-rho).exp() * (rho - big_r).exp_m1();
        (gap / ((1.0 + (-big_r).exp()) * -(-rho).exp_m1())).ln_1p()
    } else {
        ln_tanh_half(big_r) - ln_tanh_half(rho)
    }
}

/// `log⁺(r/|ζ|)` with `r = tanh(R/2)`.
///
/// The weight diverges at the origin; there the value is `f64::INFINITY`,
/// which quadrature grids never sample because their nodes avoid `ζ = 0`.
pub fn birkhoff_weight(zeta: DiscPoint, big_r: f64) -> Result<f64> {
    let r = radius_euclid_from_hyp(big_r)?;
    let m = zeta.modulus();
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    if m >= r {
        return Ok(0.0);
    }
    Ok(log_weight_hyp(big_r, hyp_distance_from_origin(zeta)))
}

/// Breakpoints `0, ..., R` with a geometric refinement toward the origin.
fn radial_breaks(big_r: f64, panel: f64, grading: usize) -> Vec<f64> {
    let head = big_r.min(panel);
    let mut breaks = vec![0.0];
    for k in (1..=grading).rev() {
        breaks.push(head * 0.5f64.powi(k as i32));
    }
    breaks.push(head);
    let rest = big_r - head;
    if rest > 0.0 {
        let n = (rest / panel).ceil().max(1.0) as usize;
        for i in 1..=n {
            breaks.push(head + rest * i as f64 / n as f64);
        }
    }
    breaks
}

/// `M_R = ∫ log⁺(r/|ζ|) ω_P`, by adaptive radial quadrature.
///
/// The angular integral is exact, leaving
/// `2π ∫_0^R (ln tanh(R/2) - ln tanh(ρ/2)) sinh ρ dρ`.
pub fn normalizer_m(big_r: f64, tol: &Tolerances) -> Result<Estimate> {
    if !(big_r > 0.0) {
        return domain(format!("R must be positive, got {big_r}"));
    }
    let f = |rho: f64| 2.0 * PI * log_weight_hyp(big_r, rho) * rho.sinh();
    let breaks = radial_breaks(big_r, 1.0, 6);
    integrate_from(&f, &breaks, QuadTol::new(tol.radial_abs, 1e-13, tol.max_intervals))
}

/// Layout parameters of a [`QuadratureGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Target hyperbolic spacing between neighbouring nodes.
    pub spacing: f64,
    /// Gauss–Legendre order per radial panel.
    pub order: usize,
    /// Number of geometric refinement levels toward the origin.
    pub grading: usize,
    /// Minimum number of angular nodes on a ring.
    pub min_angular: usize,
    /// Rotation applied to every ring.
    pub rotation: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            spacing: 0.1,
            order: 8,
            grading: 8,
            min_angular: 16,
            rotation: 0.0,
        }
    }
}

/// Weighted nodes on a hyperbolic disc `D_R`: polar Gauss–Legendre rings in
/// the hyperbolic radius, equispaced angles on each ring.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub big_r: f64,
    pub nodes: Vec<Complex64>,
    /// Hyperbolic radius of each node.
    pub rho: Vec<f64>,
    pub weights: Vec<f64>,
    /// Relative accuracy claimed for the plain area weights.
    pub declared_tol: f64,
}

impl QuadratureGrid {
    /// Plain Poincaré-area weights on `D_R`.
    pub fn hyperbolic_disc(big_r: f64, spec: &GridSpec) -> Result<Self> {
        if !(big_r > 0.0) {
            return domain(format!("R must be positive, got {big_r}"));
        }
        if !(spec.spacing > 0.0) || spec.order == 0 {
            return domain("grid spacing and order must be positive");
        }
        let panel = spec.spacing * spec.order as f64;
        let breaks = radial_breaks(big_r, panel.max(spec.spacing), spec.grading);
        let (rnodes, rweights) = composite_gauss_legendre(&breaks, spec.order);
        let mut nodes = Vec::new();
        let mut rho = Vec::new();
        let mut weights = Vec::new();
        for (&p, &w) in rnodes.iter().zip(&rweights) {
            let sh = p.sinh();
            let n_theta = ((2.0 * PI * sh / spec.spacing).ceil() as usize).max(spec.min_angular);
            let radius = (0.5 * p).tanh();
            let wt = w * sh * 2.0 * PI / n_theta as f64;
            for k in 0..n_theta {
                let theta = spec.rotation + 2.0 * PI * k as f64 / n_theta as f64;
                nodes.push(Complex64::from_polar(radius, theta));
                rho.push(p);
                weights.push(wt);
            }
        }
        Ok(Self {
            big_r,
            nodes,
            rho,
            weights,
            declared_tol: 1e-10,
        })
    }

    /// Multiply every weight by a radial profile `f(ρ)`.
    pub fn with_profile<F: Fn(f64) -> f64>(mut self, f: F) -> Self {
        for (w, &p) in self.weights.iter_mut().zip(&self.rho) {
            *w *= f(p);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Compensated total weight.
    pub fn total_weight(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    /// `Σ w_i f(ζ_i)` in node order.
    pub fn integrate<F: Fn(Complex64) -> f64>(&self, f: F) -> f64 {
        compensated_sum(self.nodes.iter().zip(&self.weights).map(|(z, w)| w * f(*z)))
    }
}
