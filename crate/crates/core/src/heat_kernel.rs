//! The heat kernel `p(0, ζ, t)` of the Poincaré disc and the averaging
//! operators built from it.
//!
//! The kernel is evaluated from the closed integral representation
//!
//! ```text
//! p(ρ, t) = √2 e^{-t/4} (4πt)^{-3/2} ∫_ρ^∞ s e^{-s²/4t} (cosh s - cosh ρ)^{-1/2} ds
//! ```
//!
//! with `s = ρ + w²`, which removes the inverse square-root endpoint
//! singularity. `cosh s - cosh ρ` is written as the product
//! `2 sinh(ρ + w²/2) sinh(w²/2)`, so no cancellation occurs for small `ρ` or `w`.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{domain, Error, Result};
use crate::exec::Exec;
use crate::hyp_core::{ln_tanh_half, log_weight_hyp, normalizer_m, transport};
use crate::quad::{gauss_legendre, integrate_exp_tail, integrate_from, Estimate, QuadTol};

/// Log of the ratio below the peak where integrands are truncated (`e^{-47.5} < 1e-18 · e^{-6}`).
const TRUNCATION_DECADES: f64 = 47.5;

/// One kernel value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelEval {
    pub rho: f64,
    pub t: f64,
    pub value: f64,
    pub err_estimate: f64,
}

fn ln_sinh(x: f64) -> f64 {
    if x > 20.0 {
        x - std::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p()
    } else {
        x.sinh().ln()
    }
}

fn sinhc(q: f64) -> f64 {
    if q < 1e-4 {
        1.0 + q * q / 6.0
    } else {
        q.sinh() / q
    }
}

/// Upper end of the `s`-range beyond which `s²/4t + s/2` has grown by `drop`.
fn s_cutoff(rho: f64, t: f64, drop: f64) -> f64 {
    -t + ((t + rho) * (t + rho) + 4.0 * t * drop).sqrt()
}

fn inner_tol(tol: &Tolerances) -> QuadTol {
    QuadTol::new(1e-300, tol.kernel_rel, tol.max_intervals)
}

/// `p(0, ζ, t)` for `ρ(ζ) = rho`.
pub fn kernel_eval(rho: f64, t: f64, tol: &Tolerances) -> Result<KernelEval> {
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("heat-kernel time must be positive, got {t}"));
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return domain(format!("distance must be nonnegative, got {rho}"));
    }
    let ln_pref = 0.5 * std::f64::consts::LN_2 - 0.25 * t - 1.5 * (4.0 * PI * t).ln();
    let integrand = |w: f64| {
        let q = 0.5 * w * w;
        let s = rho + w * w;
        if s <= 0.0 {
            return 0.0;
        }
        let ln_g = s.ln() - s * s / (4.0 * t) + std::f64::consts::LN_2
            - 0.5 * sinhc(q).ln()
            - 0.5 * ln_sinh(rho + q);
        (ln_g + ln_pref).exp()
    };
    let w_max = (s_cutoff(rho, t, TRUNCATION_DECADES) - rho).max(0.0).sqrt();
    let breaks = [0.0, 0.125 * w_max, 0.25 * w_max, 0.5 * w_max, w_max];
    let est = integrate_from(&integrand, &breaks, inner_tol(tol))?;
    // the truncated tail is below e^{-47.5} of the peak contribution
    let trunc = est.value.abs() * (-TRUNCATION_DECADES).exp();
    Ok(KernelEval {
        rho,
        t,
        value: est.value,
        err_estimate: est.error + trunc,
    })
}

/// Runs a fallible integrand through an infallible quadrature, keeping the first error.
struct Fallible {
    first: RefCell<Option<Error>>,
}

impl Fallible {
    fn new() -> Self {
        Self {
            first: RefCell::new(None),
        }
    }

    fn call(&self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.first.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    }

    fn finish(self, est: Result<Estimate>) -> Result<Estimate> {
        if let Some(e) = self.first.into_inner() {
            return Err(e);
        }
        est
    }
}

fn rho_cutoff(t: f64) -> f64 {
    t + 2.0 * (t * TRUNCATION_DECADES).sqrt() + 4.0
}

fn outer_tol(tol: &Tolerances) -> QuadTol {
    QuadTol::new(tol.kernel_abs, tol.kernel_rel, tol.max_intervals)
}

fn splits(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

/// `∫_{ρ(ζ) < rho_cut} p(0, ζ, t) ω_P(ζ)`.
pub fn kernel_mass_within(rho_cut: f64, t: f64, tol: &Tolerances) -> Result<Estimate> {
    let fal = Fallible::new();
    let f = |rho: f64| 2.0 * PI * rho.sinh() * fal.call(kernel_eval(rho, t, tol).map(|k| k.value));
    let upper = rho_cut.min(rho_cutoff(t));
    let breaks = splits(0.0, upper, 8);
    let est = integrate_from(&f, &breaks, outer_tol(tol));
    fal.finish(est)
}

/// `∫_D p(0, ·, t) ω_P`, which should equal one.
pub fn kernel_normalization(t: f64, tol: &Tolerances) -> Result<Estimate> {
    kernel_mass_within(f64::INFINITY, t, tol)
}

/// `∫_{t0}^{t1} p(ρ, t) dt`.
pub fn kernel_time_integral(rho: f64, t0: f64, t1: f64, tol: &Tolerances) -> Result<Estimate> {
    if !(t0 >= 0.0 && t1 >= t0) {
        return domain(format!("bad time interval [{t0}, {t1}]"));
    }
    if t1 == t0 {
        return Ok(Estimate::new(0.0, 0.0));
    }
    let fal = Fallible::new();
    let f = |t: f64| fal.call(kernel_eval(rho, t, tol).map(|k| k.value));
    let mut breaks = splits(t0, t1, 4);
    if t0 == 0.0 && rho > 0.0 {
        // most of the small-ρ mass sits near t ≈ ρ²
        let knee = (rho * rho * 0.25).min(0.25 * t1);
        breaks.insert(1, knee);
    }
    let est = integrate_from(&f, &breaks, outer_tol(tol));
    fal.finish(est)
}

/// `∫_{t0}^∞ p(ρ, t) dt`, through the substitution `t = t0 - 4 ln(1-x)`.
pub fn kernel_time_tail(rho: f64, t0: f64, tol: &Tolerances) -> Result<Estimate> {
    if !(t0 > 0.0) {
        return domain(format!("tail start must be positive, got {t0}"));
    }
    let fal = Fallible::new();
    let f = |t: f64| fal.call(kernel_eval(rho, t, tol).map(|k| k.value));
    let est = integrate_exp_tail(f, t0, 4.0, outer_tol(tol));
    fal.finish(est)
}

/// `∫_0^∞ p(ρ, t) dt`; split at `max(ρ², 1)`.
pub fn green_time_integral(rho: f64, tol: &Tolerances) -> Result<Estimate> {
    let split = (rho * rho).max(1.0);
    Ok(kernel_time_integral(rho, 0.0, split, tol)? + kernel_time_tail(rho, split, tol)?)
}

/// Green function of the disc at hyperbolic distance `rho`: `(1/2π) log(1/|ζ|)`.
pub fn green_function(rho: f64) -> f64 {
    -ln_tanh_half(rho) / (2.0 * PI)
}

/// `ρ`-window `R - R^{1/2} √(2 log R)` inside which the tail estimate applies.
pub fn tail_window(big_r: f64) -> f64 {
    big_r - big_r.sqrt() * (2.0 * big_r.ln()).sqrt()
}

/// `R^{1/2} (log R)^{-1/2} log(1/|ζ|)`, the scale of the tail estimate.
pub fn tail_bound_scale(big_r: f64, rho: f64) -> f64 {
    (big_r / big_r.ln()).sqrt() * (-ln_tanh_half(rho))
}

/// `∫_{M_R/2π}^∞ p(0, ζ, t) dt` for `ρ(ζ) ≤ R'`.
pub fn tail_mass(big_r: f64, rho: f64, tol: &Tolerances) -> Result<Estimate> {
    if big_r < std::f64::consts::E {
        return domain(format!("tail estimate needs R ≥ e, got {big_r}"));
    }
    let window = tail_window(big_r);
    if !(rho >= 0.0 && rho <= window * (1.0 + 1e-12)) {
        return domain(format!("rho = {rho} outside [0, R'] with R' = {window}"));
    }
    let m = normalizer_m(big_r, tol)?;
    kernel_time_tail(rho, m.value / (2.0 * PI), tol)
}

/// Equispaced angular rule used to reduce disc integrals to radial ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngularRule {
    pub n: usize,
}

impl Default for AngularRule {
    fn default() -> Self {
        Self { n: 128 }
    }
}

impl AngularRule {
    /// Mean of `u` over the circle of hyperbolic radius `rho`.
    pub fn average<U: Fn(Complex64) -> f64 + ?Sized>(&self, u: &U, rho: f64) -> f64 {
        let radius = (0.5 * rho).tanh();
        let n = self.n.max(1);
        // offset by half a step so that rings never sample a symmetry axis
        let s: f64 = (0..n)
            .map(|k| u(Complex64::from_polar(radius, 2.0 * PI * (k as f64 + 0.5) / n as f64)))
            .sum();
        s / n as f64
    }
}

/// `S_t u(0) = ∫_D p(0, ·, t) u ω_P`.
pub fn s_t_at_center<U>(u: &U, t: f64, angular: AngularRule, tol: &Tolerances) -> Result<Estimate>
where
    U: Fn(Complex64) -> f64 + ?Sized,
{
    if !(t > 0.0) {
        return domain(format!("time must be positive, got {t}"));
    }
    let fal = Fallible::new();
    let f = |rho: f64| {
        let k = fal.call(kernel_eval(rho, t, tol).map(|k| k.value));
        if k == 0.0 {
            return 0.0;
        }
        2.0 * PI * rho.sinh() * k * angular.average(u, rho)
    };
    let breaks = splits(0.0, rho_cutoff(t), 8);
    let est = integrate_from(&f, &breaks, outer_tol(tol));
    fal.finish(est)
}

/// `S_t u(η)`, transporting the kernel to `η` by a disc automorphism.
pub fn s_t_at_point<U>(u: &U, eta: Complex64, t: f64, angular: AngularRule, tol: &Tolerances) -> Result<Estimate>
where
    U: Fn(Complex64) -> f64 + ?Sized,
{
    let moved = |z: Complex64| u(transport(eta, z));
    s_t_at_center(&moved, t, angular, tol)
}

/// A function of the hyperbolic radius, tabulated on Gauss–Legendre panels
/// and interpolated by barycentric Lagrange interpolation within each panel.
#[derive(Debug, Clone)]
pub struct RadialFunction {
    breaks: Vec<f64>,
    order: usize,
    nodes: Vec<f64>,
    values: Vec<f64>,
    bary: Vec<f64>,
}

impl RadialFunction {
    /// Tabulate `f(ρ)` on `[0, rho_max]`.
    pub fn tabulate<F>(f: F, rho_max: f64, panel_width: f64, order: usize, exec: Exec) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64> + Sync + Send,
    {
        if !(rho_max > 0.0 && panel_width > 0.0) || order < 2 {
            return domain("radial table needs a positive range, width and order ≥ 2");
        }
        let n_panels = (rho_max / panel_width).ceil() as usize;
        let breaks = splits(0.0, rho_max, n_panels);
        let (gx, _) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(n_panels * order);
        for w in breaks.windows(2) {
            for x in &gx {
                nodes.push(0.5 * (w[0] + w[1]) + 0.5 * (w[1] - w[0]) * x);
            }
        }
        let values = exec.map(&nodes, |&p| f(p)).into_iter().collect::<Result<Vec<_>>>()?;
        // barycentric weights are the same on every panel (affine images of one node set)
        let bary = (0..order)
            .map(|j| {
                let prod: f64 = (0..order).filter(|&k| k != j).map(|k| gx[j] - gx[k]).product();
                1.0 / prod
            })
            .collect();
        Ok(Self {
            breaks,
            order,
            nodes,
            values,
            bary,
        })
    }

    pub fn rho_max(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    /// Value at hyperbolic radius `rho`; clamped to the last panel beyond `rho_max`.
    pub fn eval(&self, rho: f64) -> f64 {
        let rho = rho.clamp(0.0, self.rho_max());
        let n_panels = self.breaks.len() - 1;
        let width = self.rho_max() / n_panels as f64;
        let p = ((rho / width) as usize).min(n_panels - 1);
        let base = p * self.order;
        let xs = &self.nodes[base..base + self.order];
        let ys = &self.values[base..base + self.order];
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..self.order {
            let d = rho - xs[j];
            if d == 0.0 {
                return ys[j];
            }
            let c = self.bary[j] / d;
            num += c * ys[j];
            den += c;
        }
        num / den
    }

    /// Value at the disc point `z`.
    pub fn eval_at(&self, z: Complex64) -> f64 {
        self.eval(2.0 * z.norm().min(1.0 - 1e-16).atanh())
    }
}

/// Outcome of comparing the Birkhoff average with the time-averaged heat operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BHeatComparison {
    pub big_r: f64,
    pub birkhoff: f64,
    pub heat_average: f64,
    pub discrepancy: f64,
    /// `R^{-1/2} √(log R)`.
    pub rate: f64,
}

/// `∫_0^T p(ρ, t) dt`, via the Green identity where that is better conditioned.
///
/// The absolute tolerance is divided by `cosh ρ` since callers weight the result by `sinh ρ`.
pub fn kernel_time_integral_to(rho: f64, horizon: f64, tol: &Tolerances) -> Result<Estimate> {
    let scaled = tol.with_abs(tol.kernel_abs / rho.cosh());
    if rho > 0.0 && rho <= 0.5 * horizon {
        let tail = kernel_time_tail(rho, horizon, &scaled)?;
        Ok(Estimate::new(green_function(rho) - tail.value, tail.error))
    } else {
        kernel_time_integral(rho, 0.0, horizon, &scaled)
    }
}

/// `|B_R u(0) - (2π/M_R) ∫_0^{M_R/2π} S_t u(0) dt|` at the disc center.
pub fn compare_b_vs_heat_average<U>(u: &U, big_r: f64, angular: AngularRule, tol: &Tolerances) -> Result<BHeatComparison>
where
    U: Fn(Complex64) -> f64 + ?Sized,
{
    if !(big_r > 1.0) {
        return domain(format!("R must exceed 1, got {big_r}"));
    }
    let m = normalizer_m(big_r, tol)?.value;
    let horizon = m / (2.0 * PI);
    let qt = outer_tol(tol);

    let fb = |rho: f64| log_weight_hyp(big_r, rho) * angular.average(u, rho) * 2.0 * PI * rho.sinh();
    let mut breaks = splits(0.0, big_r, 16);
    breaks.insert(1, 1e-3 * big_r);
    let b = integrate_from(&fb, &breaks, qt)?.value / m;

    let fal = Fallible::new();
    let fh = |rho: f64| {
        let k = fal.call(kernel_time_integral_to(rho, horizon, tol).map(|e| e.value));
        k * angular.average(u, rho) * 2.0 * PI * rho.sinh()
    };
    let rho_max = rho_cutoff(horizon);
    let mut breaks = splits(0.0, rho_max, 24);
    breaks.insert(1, 1e-3);
    let est = integrate_from(&fh, &breaks, qt);
    let h = fal.finish(est)?.value * 2.0 * PI / m;

    Ok(BHeatComparison {
        big_r,
        birkhoff: b,
        heat_average: h,
        discrepancy: (b - h).abs(),
        rate: big_r.ln().sqrt() / big_r.sqrt(),
    })
}

/// Kernel values on a `(ρ, t)` lattice, rows ordered with `t` outermost.
pub fn kernel_table(rhos: &[f64], ts: &[f64], tol: &Tolerances, exec: Exec) -> Result<Vec<KernelEval>> {
    let pairs: Vec<(f64, f64)> = ts.iter().flat_map(|&t| rhos.iter().map(move |&r| (r, t))).collect();
    exec.map(&pairs, |&(r, t)| kernel_eval(r, t, tol)).into_iter().collect()
}

/// Write a kernel table as CSV with columns `rho,t,value,err_estimate`.
pub fn write_kernel_csv<W: std::io::Write>(rows: &[KernelEval], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rho", "t", "value", "err_estimate"])?;
    for k in rows {
        w.write_record([
            format!("{:e}", k.rho),
            format!("{:e}", k.t),
            format!("{:e}", k.value),
            format!("{:e}", k.err_estimate),
        ])?;
    }
    w.flush()?;
    Ok(())
}
