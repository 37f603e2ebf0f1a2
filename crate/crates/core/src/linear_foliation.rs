//! Leaves of the linear vector field `Σ λ_j z_j ∂/∂z_j` near the origin of `C^k`.
//!
//! The leaf through `a` is parametrized by `ψ_a(ξ) = (a_j e^{λ_j ξ})_j`, and
//! `ψ_a^{-1}` of the unit polydisc is the convex polygon
//! `{ξ = u + iv : s_j u - t_j v ≤ -log|a_j|}` with `λ_j = s_j + i t_j`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{domain, Error, Result};
use crate::exec::Exec;
use crate::green_uniformize::{solve_green, Domain, HalfPlanes, BOUNDARY_TOL};

/// The eigenvalues of a linear vector field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFoliationModel {
    lambda: Vec<Complex64>,
}

/// Largest denominator considered when deciding whether an eigenvalue ratio is rational.
const RESONANCE_DENOMINATOR: u64 = 1000;

impl LinearFoliationModel {
    pub fn new(lambda: Vec<Complex64>) -> Result<Self> {
        if lambda.len() < 2 {
            return Err(Error::Invariant(format!("need at least two eigenvalues, got {}", lambda.len())));
        }
        if lambda.iter().any(|l| l.norm() == 0.0 || !l.re.is_finite() || !l.im.is_finite()) {
            return Err(Error::Degenerate("eigenvalues must be finite and nonzero".into()));
        }
        Ok(Self { lambda })
    }

    /// `λ = (1, 1 + √2 i)`.
    pub fn default_complex() -> Self {
        Self::new(vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 2f64.sqrt())]).unwrap()
    }

    /// `λ = (1, 2 + √3)`.
    pub fn default_real() -> Self {
        Self::new(vec![Complex64::new(1.0, 0.0), Complex64::new(2.0 + 3f64.sqrt(), 0.0)]).unwrap()
    }

    pub fn lambda(&self) -> &[Complex64] {
        &self.lambda
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// Some ratio `λ_i / λ_j` is a real rational number (denominator ≤ 1000).
    pub fn is_resonant(&self) -> bool {
        let k = self.lambda.len();
        (0..k).any(|i| (i + 1..k).any(|j| is_real_rational(self.lambda[i] / self.lambda[j])))
    }
}

fn is_real_rational(z: Complex64) -> bool {
    if z.im.abs() > 1e-12 * z.norm() {
        return false;
    }
    let x = z.re;
    // continued-fraction convergents up to the denominator cap
    let (mut h0, mut h1) = (0.0f64, 1.0f64);
    let (mut k0, mut k1) = (1.0f64, 0.0f64);
    let mut y = x;
    for _ in 0..64 {
        let a = y.floor();
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if k2 > RESONANCE_DENOMINATOR as f64 {
            return false;
        }
        if (h2 / k2 - x).abs() <= 1e-12 * x.abs().max(1.0) {
            return true;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = y - a;
        if frac == 0.0 {
            return true;
        }
        y = 1.0 / frac;
    }
    false
}

/// `s u - t v ≤ c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub s: f64,
    pub t: f64,
    pub c: f64,
}

impl HalfPlane {
    fn value(&self, xi: Complex64) -> f64 {
        self.s * xi.re - self.t * xi.im
    }
}

/// Intersection of the half-planes `s_j u - t_j v ≤ c_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    pub half_planes: Vec<HalfPlane>,
    pub bounded: bool,
}

impl ConvexPolygon {
    pub fn new(half_planes: Vec<HalfPlane>) -> Self {
        let mut angles: Vec<f64> = half_planes.iter().map(|h| (-h.t).atan2(h.s)).collect();
        angles.sort_by(f64::total_cmp);
        let mut gap = angles[0] + 2.0 * PI - angles[angles.len() - 1];
        for w in angles.windows(2) {
            gap = gap.max(w[1] - w[0]);
        }
        Self {
            bounded: gap < PI - 1e-12,
            half_planes,
        }
    }

    /// Membership with boundary ties counted as inside.
    pub fn contains(&self, xi: Complex64) -> bool {
        self.half_planes
            .iter()
            .all(|h| h.value(xi) <= h.c + BOUNDARY_TOL * (1.0 + h.c.abs()))
    }

    /// Distance from `0` to the nearest constraint line, `min_j c_j / |λ_j|`.
    pub fn inradius_at_origin(&self) -> f64 {
        self.half_planes
            .iter()
            .map(|h| h.c / h.s.hypot(h.t))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_offset(&self) -> f64 {
        self.half_planes.iter().map(|h| h.c).fold(f64::INFINITY, f64::min)
    }

    /// Inradius factor `c'` with inradius = `c' · min_j c_j`.
    pub fn c_prime(&self) -> f64 {
        self.inradius_at_origin() / self.min_offset()
    }

    /// Intersection with the square `[-L, L]²`.
    pub fn truncated(&self, half_side: f64) -> Result<HalfPlanes> {
        let mut rows: Vec<[f64; 3]> = self.half_planes.iter().map(|h| [h.s, -h.t, h.c]).collect();
        rows.extend([
            [1.0, 0.0, half_side],
            [-1.0, 0.0, half_side],
            [0.0, 1.0, half_side],
            [0.0, -1.0, half_side],
        ]);
        HalfPlanes::new(rows)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `ψ_a^{-1}(unit polydisc)` for a base point with `0 < |a_j| < 1`.
pub fn leaf_domain(model: &LinearFoliationModel, a: &[Complex64]) -> Result<ConvexPolygon> {
    if a.len() != model.dim() {
        return domain(format!("base point has {} coordinates, model has {}", a.len(), model.dim()));
    }
    if a.iter().any(|x| x.norm() == 0.0) {
        return Err(Error::Degenerate("base point lies in a coordinate hyperplane".into()));
    }
    if a.iter().any(|x| !(x.norm() < 1.0)) {
        return domain("base point must lie in the open unit polydisc");
    }
    let hp = model
        .lambda
        .iter()
        .zip(a)
        .map(|(l, x)| HalfPlane {
            s: l.re,
            t: l.im,
            c: -x.norm().ln(),
        })
        .collect();
    Ok(ConvexPolygon::new(hp))
}

/// The parametrized leaf through `a`, restricted to the unit polydisc.
#[derive(Debug, Clone)]
pub struct LeafChart {
    pub model: LinearFoliationModel,
    pub a: Vec<Complex64>,
    pub polygon: ConvexPolygon,
    pub resonant: bool,
}

impl LeafChart {
    pub fn new(model: LinearFoliationModel, a: Vec<Complex64>) -> Result<Self> {
        let polygon = leaf_domain(&model, &a)?;
        let resonant = model.is_resonant();
        Ok(Self {
            model,
            a,
            polygon,
            resonant,
        })
    }

    /// `ψ_a(ξ)` without the membership check.
    pub fn psi(&self, xi: Complex64) -> Vec<Complex64> {
        self.model.lambda.iter().zip(&self.a).map(|(l, a)| a * (l * xi).exp()).collect()
    }

    /// `ψ_a(ξ)` for `ξ ∈ Ω`.
    pub fn leaf_point(&self, xi: Complex64) -> Result<Vec<Complex64>> {
        if !self.polygon.contains(xi) {
            return domain(format!("ξ = {xi} is outside the leaf polygon"));
        }
        Ok(self.psi(xi))
    }

    /// `dψ_a/dξ = (λ_j ψ_a(ξ)_j)_j`.
    pub fn derivative(&self, xi: Complex64) -> Vec<Complex64> {
        self.model.lambda.iter().zip(self.psi(xi)).map(|(l, z)| l * z).collect()
    }

    pub fn norm_a(&self) -> f64 {
        norm(&self.a)
    }

    /// Write `ψ_a` at the given parameters as CSV: `xi_re, xi_im, z1_re, z1_im, …`.
    pub fn write_samples_csv<W: std::io::Write>(&self, xis: &[Complex64], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["xi_re".to_string(), "xi_im".to_string()];
        for j in 1..=self.model.dim() {
            header.push(format!("z{j}_re"));
            header.push(format!("z{j}_im"));
        }
        w.write_record(&header)?;
        for &xi in xis {
            let mut row = vec![format!("{:e}", xi.re), format!("{:e}", xi.im)];
            for z in self.leaf_point(xi)? {
                row.push(format!("{:e}", z.re));
                row.push(format!("{:e}", z.im));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `τ(ξ) = ψ_a(-c' log‖a‖ · ξ)` maps the unit disc into the leaf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtremalDisc {
    pub c_prime: f64,
    /// `-c' log‖a‖`
    pub scale: f64,
    /// `‖Dτ(0)‖`
    pub derivative_norm: f64,
}

pub fn extremal_disc(chart: &LeafChart) -> Result<ExtremalDisc> {
    let na = chart.norm_a();
    if !(na < 1.0) {
        return domain("extremal disc needs ‖a‖ < 1");
    }
    let c_prime = chart.polygon.c_prime();
    let scale = -c_prime * na.ln();
    let la: Vec<Complex64> = chart.model.lambda.iter().zip(&chart.a).map(|(l, a)| l * a).collect();
    Ok(ExtremalDisc {
        c_prime,
        scale,
        derivative_norm: scale * norm(&la),
    })
}

/// `‖Dτ(0)‖`.
pub fn extremal_disc_lower_bound(model: &LinearFoliationModel, a: &[Complex64]) -> Result<f64> {
    let chart = LeafChart::new(model.clone(), a.to_vec())?;
    Ok(extremal_disc(&chart)?.derivative_norm)
}

/// `‖Dτ(0)‖^{-2}`, an upper bound for `ϑ(a)` by extremality of the Poincaré metric.
pub fn theta_upper_bound(model: &LinearFoliationModel, a: &[Complex64]) -> Result<f64> {
    Ok(extremal_disc_lower_bound(model, a)?.powi(-2))
}

/// Discretization of the leaf polygon for [`theta_numeric`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaOptions {
    /// side of the truncation square in units of the inradius
    pub box_factor: f64,
    /// grid cells per inradius
    pub cells_per_inradius: f64,
}

impl Default for ThetaOptions {
    fn default() -> Self {
        Self {
            box_factor: 6.0,
            cells_per_inradius: 128.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaNumeric {
    pub theta: f64,
    pub conformal_radius: f64,
    pub inradius: f64,
    pub h: f64,
    pub unknowns: usize,
    pub iterations: usize,
}

/// `ϑ(a)` from the Poincaré density of the truncated leaf polygon at `ξ = 0`:
/// `ω_P = 4ϑω` gives `ϑ = 1 / (‖ψ_a'(0)‖ · conformal radius)²`.
pub fn theta_numeric(chart: &LeafChart, opts: ThetaOptions, tol: &Tolerances, exec: Exec) -> Result<ThetaNumeric> {
    let inradius = chart.polygon.inradius_at_origin();
    let dom: Arc<dyn Domain> = Arc::new(chart.polygon.truncated(0.5 * opts.box_factor * inradius)?);
    let h = inradius / opts.cells_per_inradius;
    let field = solve_green(dom.as_ref(), h, [0.0, 0.0], tol, exec)?;
    let cr = field.conformal_radius();
    let d = norm(&chart.derivative(Complex64::new(0.0, 0.0)));
    Ok(ThetaNumeric {
        theta: 1.0 / (d * cr).powi(2),
        conformal_radius: cr,
        inradius,
        h,
        unknowns: field.grid.unknowns(),
        iterations: field.stats.iterations,
    })
}

/// `log ϑ + 2 log‖a‖ + 2 log|log‖a‖|`, which stays bounded as `a → 0`.
pub fn normalized_log_theta(theta: f64, norm_a: f64) -> f64 {
    theta.ln() + 2.0 * norm_a.ln() + 2.0 * norm_a.ln().abs().ln()
}

/// Base point with `k` equal-modulus coordinates of Euclidean norm `norm_a`.
pub fn equal_modulus_point(k: usize, norm_a: f64) -> Vec<Complex64> {
    vec![Complex64::new(norm_a / (k as f64).sqrt(), 0.0); k]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identical_constraints_give_half_plane() {
        let m = LinearFoliationModel::new(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let eps: f64 = 0.01;
        let p = leaf_domain(&m, &[c(eps, 0.0), c(eps, 0.0)]).unwrap();
        assert!(!p.bounded);
        for h in &p.half_planes {
            assert_eq!((h.s, h.t), (1.0, 0.0));
            assert!((h.c + eps.ln()).abs() < 1e-15);
        }
        assert!(m.is_resonant());
    }

    #[test]
    fn orthogonal_eigenvalues_give_wedge() {
        let m = LinearFoliationModel::new(vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let eps: f64 = 0.05;
        let p = leaf_domain(&m, &[c(eps, 0.0), c(0.0, eps)]).unwrap();
        assert!(!p.bounded);
        assert_eq!((p.half_planes[1].s, p.half_planes[1].t), (0.0, 1.0));
        let l = -eps.ln();
        assert!(p.contains(c(l, -l)) && !p.contains(c(l + 1e-6, 0.0)) && !p.contains(c(0.0, -l - 1e-6)));
        assert!(!m.is_resonant());
    }

    #[test]
    fn bounded_polygon_detected() {
        let m = LinearFoliationModel::new(vec![c(1.0, 0.0), c(-1.0, 1.0), c(-1.0, -1.0)]).unwrap();
        let p = leaf_domain(&m, &[c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)]).unwrap();
        assert!(p.bounded);
    }

    #[test]
    fn default_models_are_non_resonant() {
        assert!(!LinearFoliationModel::default_complex().is_resonant());
        assert!(!LinearFoliationModel::default_real().is_resonant());
        let m = LinearFoliationModel::new(vec![c(2.0, 0.0), c(3.0, 0.0)]).unwrap();
        assert!(m.is_resonant());
        let m = LinearFoliationModel::new(vec![c(1.0, 1.0), c(-2.0, -2.0)]).unwrap();
        assert!(m.is_resonant());
    }

    #[test]
    fn rejects_hyperplane_leaves_and_bad_models() {
        let m = LinearFoliationModel::default_complex();
        assert!(matches!(leaf_domain(&m, &[c(0.0, 0.0), c(0.1, 0.0)]), Err(Error::Degenerate(_))));
        assert!(matches!(leaf_domain(&m, &[c(1.5, 0.0), c(0.1, 0.0)]), Err(Error::Domain(_))));
        assert!(LinearFoliationModel::new(vec![c(1.0, 0.0)]).is_err());
        assert!(LinearFoliationModel::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn leaf_point_examples() {
        let m = LinearFoliationModel::new(vec![c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        let ch = LeafChart::new(m, vec![c(0.1, 0.0), c(0.1, 0.0)]).unwrap();
        assert_eq!(ch.leaf_point(c(0.0, 0.0)).unwrap(), ch.a);
        let z = ch.leaf_point(c(1.0, 0.0)).unwrap();
        let e = std::f64::consts::E;
        assert!((z[0] - c(0.1 * e, 0.0)).norm() < 1e-15 && (z[1] - c(0.1 * e * e, 0.0)).norm() < 1e-15);
        assert!(matches!(ch.leaf_point(c(3.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn derivative_matches_central_differences() {
        let ch = LeafChart::new(LinearFoliationModel::default_complex(), vec![c(0.1, 0.05), c(-0.07, 0.1)]).unwrap();
        let h = 1e-5;
        for xi in [c(0.0, 0.0), c(0.4, -0.3), c(-1.0, 0.8)] {
            let d = ch.derivative(xi);
            let (p, q) = (ch.psi(xi + h), ch.psi(xi - h));
            for j in 0..2 {
                let fd = (p[j] - q[j]) / (2.0 * h);
                assert!((fd - d[j]).norm() < 1e-8, "{fd} vs {}", d[j]);
            }
        }
    }

    #[test]
    fn inradius_constant_over_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut cps = Vec::new();
        for _ in 0..100 {
            let lambda = (0..2).map(|_| Complex64::from_polar(rng.random_range(0.5..2.0), rng.random_range(0.0..2.0 * PI))).collect();
            let m = LinearFoliationModel::new(lambda).unwrap();
            let a: Vec<Complex64> = (0..2).map(|_| Complex64::from_polar(rng.random_range(1e-3..0.9), rng.random_range(0.0..2.0 * PI))).collect();
            let p = leaf_domain(&m, &a).unwrap();
            // the disc of that radius is inside: check points on its boundary
            let r = p.inradius_at_origin();
            for k in 0..64 {
                assert!(p.contains(Complex64::from_polar(r * (1.0 - 1e-12), 2.0 * PI * k as f64 / 64.0)));
            }
            cps.push(p.c_prime());
        }
        let min = cps.iter().cloned().fold(f64::INFINITY, f64::min);
        // c' ≥ 1/max|λ| = 0.5 for these samples
        assert!(min >= 0.5 - 1e-12, "{min}");
    }

    #[test]
    fn extremal_disc_derivative_bound() {
        let m = LinearFoliationModel::default_complex();
        let ratios: Vec<f64> = (1..=6)
            .map(|k| {
                let na = 10f64.powi(-k);
                let a = equal_modulus_point(2, na);
                extremal_disc_lower_bound(&m, &a).unwrap() / (na * na.ln().abs())
            })
            .collect();
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > 0.1, "{ratios:?}");

        let ones = LinearFoliationModel::new(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let d: f64 = 1e-3;
        let ch = LeafChart::new(ones.clone(), vec![c(d, 0.0), c(d, 0.0)]).unwrap();
        assert!((norm(&ch.derivative(c(0.0, 0.0))) - ch.norm_a()).abs() < 1e-18);
        let ed = extremal_disc(&ch).unwrap();
        assert!((ed.derivative_norm - ed.c_prime * ch.norm_a().ln().abs() * ch.norm_a()).abs() < 1e-15);
    }

    #[test]
    fn extremal_disc_image_inside_polydisc() {
        let ch = LeafChart::new(LinearFoliationModel::default_complex(), equal_modulus_point(2, 1e-2)).unwrap();
        let ed = extremal_disc(&ch).unwrap();
        for k in 0..256 {
            let xi = Complex64::from_polar(ed.scale, 2.0 * PI * k as f64 / 256.0);
            assert!(ch.psi(xi).iter().all(|z| z.norm() <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn theta_upper_bound_scaling() {
        let m = LinearFoliationModel::default_real();
        let a = equal_modulus_point(2, 0.05);
        let b: Vec<Complex64> = a.iter().map(|z| z / 10.0).collect();
        let (na, nb) = (norm(&a), norm(&b));
        let ratio = theta_upper_bound(&m, &a).unwrap() / theta_upper_bound(&m, &b).unwrap();
        let predicted = (nb * nb.ln().abs() / (na * na.ln().abs())).powi(2);
        assert!((ratio / predicted - 1.0).abs() < 1e-12);
    }

    #[test]
    fn theta_numeric_below_upper_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let opts = ThetaOptions {
            box_factor: 6.0,
            cells_per_inradius: 16.0,
        };
        for _ in 0..20 {
            let m = if rng.random_bool(0.5) {
                LinearFoliationModel::default_complex()
            } else {
                LinearFoliationModel::default_real()
            };
            let a: Vec<Complex64> = (0..2).map(|_| Complex64::from_polar(rng.random_range(1e-3..0.5), rng.random_range(0.0..2.0 * PI))).collect();
            let ch = LeafChart::new(m.clone(), a.clone()).unwrap();
            let t = theta_numeric(&ch, opts, &Tolerances::default(), Exec::default()).unwrap();
            let ub = theta_upper_bound(&m, &a).unwrap();
            assert!(t.theta <= 1.05 * ub, "{} vs {ub}", t.theta);
        }
    }

    #[test]
    fn injectivity_by_sampling() {
        let ch = LeafChart::new(LinearFoliationModel::default_complex(), equal_modulus_point(2, 0.1)).unwrap();
        assert!(!ch.resonant);
        let l = 3.0 * ch.polygon.inradius_at_origin();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts = Vec::new();
        while pts.len() < 10_000 {
            let xi = c(rng.random_range(-l..l), rng.random_range(-l..l));
            if ch.polygon.contains(xi) {
                pts.push((xi, ch.psi(xi)));
            }
        }
        pts.sort_by(|p, q| p.1[0].re.total_cmp(&q.1[0].re));
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if pts[j].1[0].re - pts[i].1[0].re > 1e-9 {
                    break;
                }
                let dz = norm(&[pts[j].1[0] - pts[i].1[0], pts[j].1[1] - pts[i].1[1]]);
                assert!(dz > 1e-9 || (pts[j].0 - pts[i].0).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn exports() {
        let ch = LeafChart::new(LinearFoliationModel::default_complex(), equal_modulus_point(2, 0.1)).unwrap();
        let json = ch.polygon.to_json().unwrap();
        let back: ConvexPolygon = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ch.polygon);
        let mut buf = Vec::new();
        ch.write_samples_csv(&[c(0.0, 0.0), c(0.5, 0.1)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("xi_re,xi_im,z1_re,z1_im,z2_re,z2_im"));
        assert_eq!(text.lines().count(), 3);
    }

    proptest! {
        #[test]
        fn polydisc_iff_polygon(u in -8.0f64..8.0, v in -8.0f64..8.0) {
            let ch = LeafChart::new(LinearFoliationModel::default_complex(), vec![c(0.1, 0.02), c(0.03, -0.04)]).unwrap();
            let xi = c(u, v);
            let z = ch.psi(xi);
            for (j, h) in ch.polygon.half_planes.iter().enumerate() {
                let lhs = z[j].norm();
                let rhs = ch.a[j].norm() * (h.s * u - h.t * v).exp();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
            }
            let inside = z.iter().all(|w| w.norm() <= 1.0);
            let margin = ch.polygon.half_planes.iter().map(|h| (h.s * u - h.t * v - h.c).abs()).fold(f64::INFINITY, f64::min);
            if margin > 1e-9 {
                prop_assert_eq!(inside, ch.polygon.contains(xi));
            }
        }
    }
}
