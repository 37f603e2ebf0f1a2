//! Currents of integration along parametrized curves in `C²`.
//!
//! With `β` normalized so that its pullback is Euclidean area on the curve,
//! `mass(B_r) = ∫_{|z(t)| < r} |z'(t)|² dA(t)`, a line has `mass(B_r) = πr²`
//! and the normalized ratio `mass / (πr²)` tends to the multiplicity at `0`.

use std::cell::RefCell;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::exec::{Exec, KahanSum};
use crate::quad::{integrate, QuadTol};

/// Polynomial in `t`, lowest degree first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Poly(pub Vec<Complex64>);

impl Poly {
    pub fn real(coeffs: &[f64]) -> Self {
        Poly(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn eval(&self, t: Complex64) -> Complex64 {
        self.0.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * t + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect())
    }

    fn is_constant(&self) -> bool {
        self.0.iter().skip(1).all(|c| c.norm() == 0.0)
    }
}

/// One branch `t ↦ (z₁(t), z₂(t))`, `|t| < chart_radius`, with multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub z1: Poly,
    pub z2: Poly,
    pub multiplicity: u32,
    pub chart_radius: f64,
}

impl Branch {
    pub fn point(&self, t: Complex64) -> (Complex64, Complex64) {
        (self.z1.eval(t), self.z2.eval(t))
    }

    fn norm_at(&self, t: Complex64) -> f64 {
        let (a, b) = self.point(t);
        a.norm().hypot(b.norm())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticCurve {
    pub name: String,
    pub branches: Vec<Branch>,
}

impl AnalyticCurve {
    pub fn new(name: impl Into<String>, branches: Vec<Branch>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::Degenerate("curve has no branches".into()));
        }
        for b in &branches {
            if b.z1.is_constant() && b.z2.is_constant() {
                return Err(Error::Degenerate("constant parametrization".into()));
            }
            if !(b.chart_radius > 0.0 && b.chart_radius.is_finite()) || b.multiplicity == 0 {
                return domain("chart radius and multiplicity must be positive");
            }
        }
        Ok(Self {
            name: name.into(),
            branches,
        })
    }

    /// `z₂ = 0`.
    pub fn line() -> Self {
        Self::new("line", vec![Branch { z1: Poly::real(&[0.0, 1.0]), z2: Poly::real(&[0.0]), multiplicity: 1, chart_radius: 2.0 }]).unwrap()
    }

    /// `z₁ z₂ = 0`.
    pub fn two_lines() -> Self {
        let mut b = Self::line().branches;
        b.push(Branch { z1: Poly::real(&[0.0]), z2: Poly::real(&[0.0, 1.0]), multiplicity: 1, chart_radius: 2.0 });
        Self::new("two_lines", b).unwrap()
    }

    /// `t ↦ (t², t³)`.
    pub fn cusp() -> Self {
        Self::new("cusp", vec![Branch { z1: Poly::real(&[0.0, 0.0, 1.0]), z2: Poly::real(&[0.0, 0.0, 0.0, 1.0]), multiplicity: 1, chart_radius: 2.0 }]).unwrap()
    }

    /// `t ↦ (t, t² + t³)`, tangent to `z₂ = 0` at the origin.
    pub fn tangent_curve() -> Self {
        Self::new("tangent", vec![Branch { z1: Poly::real(&[0.0, 1.0]), z2: Poly::real(&[0.0, 0.0, 1.0, 1.0]), multiplicity: 1, chart_radius: 0.5 }]).unwrap()
    }

    pub fn union(&self, other: &AnalyticCurve) -> AnalyticCurve {
        let mut b = self.branches.clone();
        b.extend(other.branches.iter().cloned());
        AnalyticCurve {
            name: format!("{}+{}", self.name, other.name),
            branches: b,
        }
    }

    /// `mass(B_r)`.
    pub fn mass(&self, r: f64, opts: &MassOptions) -> Result<f64> {
        if !(r > 0.0 && r.is_finite()) {
            return domain(format!("radius must be positive, got {r}"));
        }
        let mut total = KahanSum::new();
        for b in &self.branches {
            total.add(b.multiplicity as f64 * branch_mass(b, r, opts)?);
        }
        Ok(total.value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassOptions {
    /// angular nodes of the trapezoid rule in the parameter plane
    pub n_theta: usize,
    pub rel_tol: f64,
}

impl Default for MassOptions {
    fn default() -> Self {
        Self { n_theta: 256, rel_tol: 1e-13 }
    }
}

/// First `ρ` with `|z(ρ e^{iθ})| = r` along the ray.
fn crossing(b: &Branch, theta: f64, r: f64) -> Result<f64> {
    let dir = Complex64::from_polar(1.0, theta);
    let f = |rho: f64| b.norm_at(dir * rho) - r;
    // scan geometrically outward from a tiny radius; the curve is nonconstant so f grows
    let mut hi = b.chart_radius;
    if f(hi) <= 0.0 {
        return domain(format!("radius {r} leaves the chart of the curve"));
    }
    let mut lo = 0.0;
    let mut probe = hi;
    while probe > 1e-300 {
        let next = probe * 0.5;
        if f(next) > 0.0 {
            hi = next;
            probe = next;
        } else {
            lo = next;
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn ray_mass(dz1: &Poly, dz2: &Poly, theta: f64, rho: f64, rel: f64) -> Result<f64> {
    let dir = Complex64::from_polar(1.0, theta);
    let g = |s: f64| {
        let t = dir * s;
        (dz1.eval(t).norm_sqr() + dz2.eval(t).norm_sqr()) * s
    };
    Ok(integrate(g, 0.0, rho, QuadTol::new(0.0, rel, 400))?.value)
}

fn branch_mass(b: &Branch, r: f64, opts: &MassOptions) -> Result<f64> {
    if opts.n_theta < 4 {
        return domain("need at least 4 angular nodes");
    }
    let (dz1, dz2) = (b.z1.derivative(), b.z2.derivative());
    let step = std::f64::consts::TAU / opts.n_theta as f64;
    let thetas: Vec<f64> = (0..opts.n_theta).map(|k| (k as f64 + 0.5) * step).collect();
    let probes = [thetas[0], thetas[opts.n_theta / 3], thetas[opts.n_theta / 2], thetas[2 * opts.n_theta / 3]];
    let rhos: Vec<f64> = probes.iter().map(|&th| crossing(b, th, r)).collect::<Result<_>>()?;
    let radial = rhos.iter().all(|&x| (x - rhos[0]).abs() <= 1e-14 * rhos[0]);
    if radial {
        // all probes agree: the region is a disc in the parameter plane
        let dir_mass: Vec<f64> = probes.iter().map(|&th| ray_mass(&dz1, &dz2, th, rhos[0], opts.rel_tol)).collect::<Result<_>>()?;
        if dir_mass.iter().all(|&m| (m - dir_mass[0]).abs() <= 1e-12 * dir_mass[0].abs()) {
            return Ok(std::f64::consts::TAU * dir_mass[0]);
        }
    }
    let mut s = KahanSum::new();
    for &th in &thetas {
        let rho = crossing(b, th, r)?;
        s.add(ray_mass(&dz1, &dz2, th, rho, opts.rel_tol)?);
    }
    Ok(s.value() * step)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassProfile {
    pub radii: Vec<f64>,
    pub masses: Vec<f64>,
    pub ratios: Vec<f64>,
}

pub fn mass_profile(curve: &AnalyticCurve, radii: &[f64], opts: &MassOptions, exec: Exec) -> Result<MassProfile> {
    if radii.is_empty() || radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0) {
        return domain("radii must be positive and strictly increasing");
    }
    let masses: Vec<f64> = exec.map(radii, |&r| curve.mass(r, opts)).into_iter().collect::<Result<_>>()?;
    let ratios = radii.iter().zip(&masses).map(|(r, m)| m / (std::f64::consts::PI * r * r)).collect();
    Ok(MassProfile {
        radii: radii.to_vec(),
        masses,
        ratios,
    })
}

impl MassProfile {
    /// Linearity: profile of a union from its parts.
    pub fn sum(&self, other: &MassProfile) -> Result<MassProfile> {
        if self.radii != other.radii {
            return domain("profiles on different radii");
        }
        Ok(MassProfile {
            radii: self.radii.clone(),
            masses: self.masses.iter().zip(&other.masses).map(|(a, b)| a + b).collect(),
            ratios: self.ratios.iter().zip(&other.ratios).map(|(a, b)| a + b).collect(),
        })
    }

    /// Largest relative drop of the ratio between consecutive radii (≤ 0 when nondecreasing).
    pub fn monotonicity_defect(&self) -> f64 {
        self.ratios
            .windows(2)
            .map(|w| (w[0] - w[1]) / w[0].abs().max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_skoda_monotone(&self, rel_tol: f64) -> bool {
        self.monotonicity_defect() <= rel_tol
    }

    /// CSV with columns `r, mass, ratio`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "mass", "ratio"])?;
        for i in 0..self.radii.len() {
            w.write_record([self.radii[i], self.masses[i], self.ratios[i]].map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Lelong number by quadratic extrapolation of the smallest three ratios to `r = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LelongEstimate {
    pub value: f64,
    /// false when the ratios used are non-monotone beyond `1e-6` relative
    pub stable: bool,
}

pub fn lelong_number(profile: &MassProfile) -> Result<LelongEstimate> {
    if profile.radii.len() < 3 {
        return domain("Lelong extrapolation needs three radii");
    }
    let (r, y) = (&profile.radii[..3], &profile.ratios[..3]);
    let mut value = 0.0;
    for i in 0..3 {
        let mut l = 1.0;
        for j in 0..3 {
            if j != i {
                l *= r[j] / (r[j] - r[i]);
            }
        }
        value += l * y[i];
    }
    let sub = MassProfile {
        radii: r.to_vec(),
        masses: profile.masses[..3].to_vec(),
        ratios: y.to_vec(),
    };
    Ok(LelongEstimate {
        value,
        stable: sub.is_skoda_monotone(1e-6),
    })
}

/// `-∫_{r_min}^{1/2} m(r) ϑ̃'(r) dr` with `ϑ̃(r) = r⁻²|log r|⁻²`, over a decreasing `r_min` sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareMass {
    pub r_mins: Vec<f64>,
    pub values: Vec<f64>,
    /// `sup m(r)/r²` over sample radii in `[r_min, 1/2]`
    pub skoda_sup: Vec<f64>,
    /// `m(1/2) ϑ̃(1/2)`
    pub boundary_term: f64,
    pub converged: bool,
}

/// Increment ratio above which the `r_min` sequence is reported divergent.
pub const CAUCHY_RATIO: f64 = 0.75;

pub fn theta_tilde(r: f64) -> f64 {
    let l = -r.ln();
    1.0 / (r * r * l * l)
}

pub fn theta_tilde_prime(r: f64) -> f64 {
    let l = -r.ln();
    (-2.0 / (l * l) + 2.0 / (l * l * l)) / (r * r * r)
}

pub fn poincare_mass_integral(m: &dyn Fn(f64) -> Result<f64>, r_mins: &[f64]) -> Result<PoincareMass> {
    if r_mins.len() < 3 || r_mins.windows(2).any(|w| !(w[1] < w[0])) || !(r_mins[0] < 0.5) || !(r_mins[r_mins.len() - 1] > 0.0) {
        return domain("r_min sequence must be decreasing in (0, 1/2) with at least three entries");
    }
    let err = RefCell::new(None);
    let eval = |r: f64| match m(r) {
        Ok(v) => v,
        Err(e) => {
            err.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    // in L = -log r the integrand is 2 m(e^{-L}) e^{2L} (L⁻² - L⁻³)
    let integrand = |l: f64| {
        let r = (-l).exp();
        2.0 * eval(r) / (r * r) * (1.0 / (l * l) - 1.0 / (l * l * l))
    };
    let l0 = std::f64::consts::LN_2;
    let mut values = Vec::new();
    let mut sups = Vec::new();
    let mut acc = 0.0;
    let mut prev = l0;
    let mut sup = 0.0f64;
    for &rm in r_mins {
        let l1 = -rm.ln();
        let piece = integrate(integrand, prev, l1, QuadTol::new(1e-14, 1e-12, 2000))?;
        if let Some(e) = err.borrow_mut().take() {
            return Err(e);
        }
        for k in 0..=16 {
            let l = prev + (l1 - prev) * k as f64 / 16.0;
            let r = (-l).exp();
            sup = sup.max(m(r)? / (r * r));
        }
        acc += piece.value;
        values.push(acc);
        sups.push(sup);
        prev = l1;
    }
    let inc: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let converged = inc.windows(2).all(|w| w[1] <= CAUCHY_RATIO * w[0] || w[1] <= 1e-12 * values[0].abs());
    Ok(PoincareMass {
        r_mins: r_mins.to_vec(),
        values,
        skoda_sup: sups,
        boundary_term: m(0.5)? * theta_tilde(0.5),
        converged,
    })
}

/// Closed form of the integral for `m(r) = πr²` on `[r_min, 1/2]`.
pub fn line_poincare_oracle(r_min: f64) -> f64 {
    let (a, b) = (std::f64::consts::LN_2, -r_min.ln());
    2.0 * std::f64::consts::PI * ((1.0 / a - 1.0 / b) - 0.5 * (1.0 / (a * a) - 1.0 / (b * b)))
}

/// Radii `r_min = 10^{-2^k}`, a sequence suited to the `1/|log r|` convergence rate.
pub fn default_r_mins() -> Vec<f64> {
    (1..=6).map(|k| 10f64.powi(-(1 << k))).filter(|r| *r > 1e-300).collect()
}

/// Logarithmically spaced radii on `[lo, hi]`.
pub fn log_radii(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn opts() -> MassOptions {
        MassOptions::default()
    }

    #[test]
    fn line_and_two_lines_have_exact_ratios() {
        let radii = log_radii(1e-3, 1e-1, 9);
        let p = mass_profile(&AnalyticCurve::line(), &radii, &opts(), Exec::Sequential).unwrap();
        for (r, m) in p.radii.iter().zip(&p.masses) {
            assert!((m - PI * r * r).abs() <= 1e-12 * PI * r * r);
        }
        let q = mass_profile(&AnalyticCurve::two_lines(), &radii, &opts(), Exec::Sequential).unwrap();
        assert!(q.ratios.iter().all(|v| (v - 2.0).abs() < 1e-12));
        assert!((lelong_number(&p).unwrap().value - 1.0).abs() < 1e-3);
        assert!((lelong_number(&q).unwrap().value - 2.0).abs() < 1e-3);
    }

    #[test]
    fn cusp_matches_closed_form() {
        // |z|² = s⁴ + s⁶ on |t| = s; mass = π(2s⁴ + 3s⁶)
        let c = AnalyticCurve::cusp();
        for r in [1e-3f64, 1e-2, 0.1, 0.5] {
            let m = c.mass(r, &opts()).unwrap();
            let mut s = r.sqrt();
            for _ in 0..100 {
                s = (r * r / (1.0 + s * s)).powf(0.25);
            }
            let exact = PI * (2.0 * s.powi(4) + 3.0 * s.powi(6));
            assert!((m - exact).abs() <= 1e-10 * exact, "{r} {m} {exact}");
        }
    }

    #[test]
    fn cusp_brute_force_oracle() {
        // midpoint rule on a polar parameter grid with the indicator of |z(t)| < r
        let c = AnalyticCurve::cusp();
        let b = &c.branches[0];
        for r in [1e-3f64, 1e-2, 1e-1] {
            let smax = 2.0 * r.sqrt();
            let (nr, nt) = (4000, 8);
            let mut acc = 0.0;
            for i in 0..nr {
                let s = (i as f64 + 0.5) * smax / nr as f64;
                for k in 0..nt {
                    let t = Complex64::from_polar(s, (k as f64 + 0.5) * std::f64::consts::TAU / nt as f64);
                    if b.norm_at(t) < r {
                        let d = b.z1.derivative().eval(t).norm_sqr() + b.z2.derivative().eval(t).norm_sqr();
                        acc += d * s * (smax / nr as f64) * (std::f64::consts::TAU / nt as f64);
                    }
                }
            }
            let m = c.mass(r, &opts()).unwrap();
            assert!((m - acc).abs() < 2e-3 * m, "{r} {m} {acc}");
        }
    }

    #[test]
    fn cusp_and_tangent_lelong_and_monotone() {
        let radii = log_radii(1e-3, 1e-1, 9);
        let p = mass_profile(&AnalyticCurve::cusp(), &radii, &opts(), Exec::Sequential).unwrap();
        assert!(p.is_skoda_monotone(1e-6));
        let l = lelong_number(&p).unwrap();
        assert!((l.value - 2.0).abs() < 2e-2 && l.stable);
        let t = mass_profile(&AnalyticCurve::tangent_curve(), &radii, &opts(), Exec::Sequential).unwrap();
        assert!(t.is_skoda_monotone(1e-6), "{:?}", t.ratios);
        assert!((lelong_number(&t).unwrap().value - 1.0).abs() < 2e-2);
    }

    #[test]
    fn union_is_additive() {
        let radii = log_radii(1e-2, 0.3, 5);
        let a = mass_profile(&AnalyticCurve::cusp(), &radii, &opts(), Exec::Sequential).unwrap();
        let b = mass_profile(&AnalyticCurve::tangent_curve(), &radii, &opts(), Exec::Sequential).unwrap();
        let u = mass_profile(&AnalyticCurve::cusp().union(&AnalyticCurve::tangent_curve()), &radii, &opts(), Exec::Sequential).unwrap();
        let s = a.sum(&b).unwrap();
        for (x, y) in u.masses.iter().zip(&s.masses) {
            assert!((x - y).abs() <= 1e-10 * x);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(mass_profile(&AnalyticCurve::line(), &[0.1, 0.05], &opts(), Exec::Sequential).is_err());
        assert!(AnalyticCurve::line().mass(5.0, &opts()).is_err());
        assert!(AnalyticCurve::new("c", vec![Branch { z1: Poly::real(&[1.0]), z2: Poly::real(&[0.0]), multiplicity: 1, chart_radius: 1.0 }]).is_err());
        assert!(poincare_mass_integral(&|r| Ok(r * r), &[0.1, 0.2, 0.01]).is_err());
    }

    #[test]
    fn theta_prime_is_derivative() {
        for r in [1e-3f64, 0.01, 0.2, 0.45] {
            let h = 1e-6 * r;
            let fd = (theta_tilde(r + h) - theta_tilde(r - h)) / (2.0 * h);
            assert!((fd - theta_tilde_prime(r)).abs() < 1e-6 * fd.abs());
        }
    }

    #[test]
    fn poincare_mass_line_and_linearity() {
        let rm = default_r_mins();
        let line = poincare_mass_integral(&|r| Ok(PI * r * r), &rm).unwrap();
        for (v, &r) in line.values.iter().zip(&rm) {
            assert!((v - line_poincare_oracle(r)).abs() < 1e-6, "{v} {}", line_poincare_oracle(r));
        }
        assert!(line.converged);
        let two = poincare_mass_integral(&|r| Ok(2.0 * PI * r * r), &rm).unwrap();
        for (a, b) in two.values.iter().zip(&line.values) {
            assert!((a - 2.0 * b).abs() <= 1e-12 * a);
        }
        let curve = AnalyticCurve::line();
        let from_curve = poincare_mass_integral(&|r| curve.mass(r, &opts()), &rm[..4]).unwrap();
        assert!((from_curve.values[3] - line.values[3]).abs() < 1e-9);
    }

    #[test]
    fn non_skoda_profile_diverges() {
        let rm = default_r_mins();
        let p = poincare_mass_integral(&|r: f64| Ok(r * r * (-r.ln())), &rm).unwrap();
        assert!(!p.converged);
        assert!(p.skoda_sup.windows(2).all(|w| w[1] > w[0]));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn cusp_ratio_nondecreasing(a in 1e-4f64..0.5, f in 1.01f64..3.0) {
            let p = mass_profile(&AnalyticCurve::cusp(), &[a, a * f], &opts(), Exec::Sequential).unwrap();
            proptest::prop_assert!(p.is_skoda_monotone(1e-6));
        }

        #[test]
        fn masses_nondecreasing_in_r(a in 1e-3f64..0.3, f in 1.01f64..1.5) {
            let c = AnalyticCurve::tangent_curve();
            proptest::prop_assert!(c.mass(a * f, &opts()).unwrap() >= c.mass(a, &opts()).unwrap());
        }
    }
}
