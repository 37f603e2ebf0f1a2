//! Hyperbolic-time averages on the quotient `D/Γ` and on planar leaf domains.
//!
//! `m_{a,R}` is the pushforward of `log⁺(r/|ζ|) ω_P / M_R` on `D_R` under
//! `ζ ↦ [τ_a(ζ)]`, realized by pushing the nodes of a [`QuadratureGrid`]
//! through the fundamental-domain reduction. `B_R u(a) = ⟨m_{a,R}, u⟩` and
//! `B'_R` is the same with plain area weights.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{domain, Error, Result};
use crate::exec::{Exec, KahanSum};
use crate::fuchsian::{quotient_area_measure, EmpiricalMeasure, FuchsianGroup, QuotientSample, CUSP_HEIGHT};
use crate::green_uniformize::GreenField;
use crate::hyp_core::{disc_area, log_weight_hyp, normalizer_m, transport, DiscPoint, GridSpec, QuadratureGrid};
use crate::quad::{integrate, QuadTol};

/// Bounded test functions on the quotient, evaluated at disc representatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TestFunction {
    Constant(f64),
    /// indicator of the geodesic ball about the origin (radius below the domain inradius 0.881)
    Ball { radius: f64 },
    /// `(1 - (ρ/radius)²)²` inside the ball of that radius
    Bump { radius: f64 },
    /// `1 / (1 + ℓ)` with `ℓ` the reduction word length of `τ_q(offset)`
    WordLength { offset: f64 },
}

/// Inradius of the default fundamental domain about the origin.
pub const DOMAIN_INRADIUS: f64 = 0.881_373_587_019_543;

impl TestFunction {
    pub fn eval(&self, group: &FuchsianGroup, w: Complex64) -> f64 {
        let rho = || 2.0 * w.norm().min(1.0 - f64::EPSILON).atanh();
        match *self {
            TestFunction::Constant(c) => c,
            TestFunction::Ball { radius } => {
                if rho() < radius {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Bump { radius } => {
                let s = rho() / radius;
                if s < 1.0 {
                    (1.0 - s * s).powi(2)
                } else {
                    0.0
                }
            }
            TestFunction::WordLength { offset } => {
                let z = transport(w, Complex64::new(offset, 0.0));
                match DiscPoint::new(z).and_then(|p| group.reduce_to_fundamental_domain(p)) {
                    Ok(q) => 1.0 / (1.0 + q.word.len() as f64),
                    Err(_) => f64::NAN,
                }
            }
        }
    }

    /// `⟨m_P, u⟩` when known in closed form or by radial quadrature.
    pub fn reference_mean(&self) -> Option<f64> {
        match *self {
            TestFunction::Constant(c) => Some(c),
            TestFunction::Ball { radius } if radius <= DOMAIN_INRADIUS => Some(2.0 * (0.5 * radius).sinh().powi(2)),
            TestFunction::Bump { radius } if radius <= DOMAIN_INRADIUS => {
                let f = |r: f64| {
                    let s = r / radius;
                    (1.0 - s * s).powi(2) * r.sinh()
                };
                integrate(f, 0.0, radius, QuadTol::new(1e-14, 1e-13, 200)).ok().map(|e| e.value)
            }
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            TestFunction::Constant(c) => format!("constant({c})"),
            TestFunction::Ball { radius } => format!("ball({radius})"),
            TestFunction::Bump { radius } => format!("bump({radius})"),
            TestFunction::WordLength { offset } => format!("word_length({offset})"),
        }
    }
}

/// A leafwise measure pushed to the quotient.
#[derive(Debug, Clone)]
pub struct LeafMeasure {
    pub big_r: f64,
    pub base: Complex64,
    pub measure: EmpiricalMeasure,
    /// `|Σ grid weights - M_R| / M_R` (zero for unweighted disc averages)
    pub normalization_gap: f64,
}

fn push_grid(group: &FuchsianGroup, grid: &QuadratureGrid, a: Complex64, rotation: Complex64, total: f64, exec: Exec) -> Result<EmpiricalMeasure> {
    let idx: Vec<usize> = (0..grid.len()).collect();
    let pushed = exec.map(&idx, |&k| {
        let z = transport(a, grid.nodes[k] * rotation);
        let p = DiscPoint::new(z)?;
        let q = group.reduce_to_fundamental_domain(p)?;
        Ok(QuotientSample {
            zeta: q.representative.z(),
            weight: grid.weights[k] / total,
            word_length: q.word.len(),
        })
    });
    Ok(EmpiricalMeasure {
        samples: pushed.into_iter().collect::<Result<Vec<_>>>()?,
    })
}

fn check_base(a: Complex64, big_r: f64) -> Result<()> {
    if !(big_r > 0.0) {
        return domain(format!("R must be positive, got {big_r}"));
    }
    if !(a.norm() < 1.0) {
        return domain(format!("base point {a} is not in the disc"));
    }
    Ok(())
}

/// `m_{a,R}` as a probability measure on the quotient.
pub fn measure_m_ar(group: &FuchsianGroup, a: Complex64, big_r: f64, spec: &GridSpec, tol: &Tolerances, exec: Exec) -> Result<LeafMeasure> {
    check_base(a, big_r)?;
    let grid = QuadratureGrid::hyperbolic_disc(big_r, spec)?.with_profile(|rho| log_weight_hyp(big_r, rho));
    let total = grid.total_weight();
    let m = normalizer_m(big_r, tol)?.value;
    let rotation = Complex64::from_polar(1.0, 0.0);
    Ok(LeafMeasure {
        big_r,
        base: a,
        measure: push_grid(group, &grid, a, rotation, total, exec)?,
        normalization_gap: (total - m).abs() / m,
    })
}

/// Normalized Poincaré area of `D_R` pushed to the quotient.
pub fn measure_disc_average(group: &FuchsianGroup, a: Complex64, big_r: f64, spec: &GridSpec, exec: Exec) -> Result<LeafMeasure> {
    check_base(a, big_r)?;
    let grid = QuadratureGrid::hyperbolic_disc(big_r, spec)?;
    let total = grid.total_weight();
    let area = disc_area(big_r)?;
    Ok(LeafMeasure {
        big_r,
        base: a,
        measure: push_grid(group, &grid, a, Complex64::new(1.0, 0.0), total, exec)?,
        normalization_gap: (total - area).abs() / area,
    })
}

/// `B_R u(a)`.
pub fn birkhoff_b(group: &FuchsianGroup, u: &TestFunction, a: Complex64, big_r: f64, spec: &GridSpec, tol: &Tolerances, exec: Exec) -> Result<f64> {
    let m = measure_m_ar(group, a, big_r, spec, tol, exec)?;
    Ok(m.measure.integrate(|w| u.eval(group, w)))
}

/// `B'_R u(a)`, the plain Poincaré-area average over `D_R`.
pub fn birkhoff_bprime(group: &FuchsianGroup, u: &TestFunction, a: Complex64, big_r: f64, spec: &GridSpec, exec: Exec) -> Result<f64> {
    let m = measure_disc_average(group, a, big_r, spec, exec)?;
    Ok(m.measure.integrate(|w| u.eval(group, w)))
}

/// `B_R u(a)` rebuilt from disc averages:
/// `(1/M_R) ∫_0^R A(t) B'_t u(a) / sinh t dt` with `A(t) = 2π(cosh t - 1)`,
/// which follows from `log⁺(r/|ζ|) = ∫_ρ^R dt / sinh t`.
pub fn birkhoff_b_from_bprime(
    group: &FuchsianGroup,
    u: &TestFunction,
    a: Complex64,
    big_r: f64,
    t_nodes: usize,
    spec: &GridSpec,
    tol: &Tolerances,
    exec: Exec,
) -> Result<f64> {
    check_base(a, big_r)?;
    let panels = (big_r / 0.5).ceil() as usize;
    let breaks: Vec<f64> = (0..=panels).map(|i| big_r * i as f64 / panels as f64).collect();
    let (ts, ws) = crate::quad::composite_gauss_legendre(&breaks, t_nodes.max(2));
    let mut acc = KahanSum::new();
    for (&t, &w) in ts.iter().zip(&ws) {
        let b = birkhoff_bprime(group, u, a, t, spec, exec)?;
        // A(t)/sinh t = 2π tanh(t/2)
        acc.add(w * 2.0 * PI * (0.5 * t).tanh() * b);
    }
    Ok(acc.value() / normalizer_m(big_r, tol)?.value)
}

/// Outcome of the mass identity `E_{a∼m_P}[B_R u(a)] = ⟨m_P, u⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassIdentity {
    pub mean: f64,
    pub stderr: f64,
    pub reference: f64,
    /// standard error of the reference when it is itself estimated
    pub reference_stderr: f64,
    pub discrepancy: f64,
}

impl MassIdentity {
    /// Discrepancy in units of the combined standard error.
    pub fn z_score(&self) -> f64 {
        let s = self.stderr.hypot(self.reference_stderr);
        if s == 0.0 {
            if self.discrepancy == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.discrepancy / s
        }
    }
}

/// Sample `a ∼ m_P`, rotate the grid by an independent uniform angle for
/// each sample (so the estimator is unbiased at any grid resolution), and
/// average `B_R u(a)`.
pub fn mass_identity_check(
    group: &FuchsianGroup,
    u: &TestFunction,
    big_r: f64,
    n_samples: usize,
    seed: u64,
    spec: &GridSpec,
    exec: Exec,
) -> Result<MassIdentity> {
    Ok(mass_identity_checks(group, std::slice::from_ref(u), big_r, n_samples, seed, spec, exec)?.remove(0))
}

/// [`mass_identity_check`] for several test functions sharing the same
/// outer samples and reductions.
pub fn mass_identity_checks(
    group: &FuchsianGroup,
    us: &[TestFunction],
    big_r: f64,
    n_samples: usize,
    seed: u64,
    spec: &GridSpec,
    exec: Exec,
) -> Result<Vec<MassIdentity>> {
    if n_samples < 2 {
        return domain("mass identity needs at least two outer samples");
    }
    let outer = quotient_area_measure(group, n_samples, seed, CUSP_HEIGHT, exec)?;
    let grid = QuadratureGrid::hyperbolic_disc(big_r, spec)?.with_profile(|rho| log_weight_hyp(big_r, rho));
    let total = grid.total_weight();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let angles: Vec<f64> = (0..n_samples).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let idx: Vec<usize> = (0..n_samples).collect();
    let rows = exec.map(&idx, |&i| {
        let a = outer.samples[i].zeta;
        let rot = Complex64::from_polar(1.0, angles[i]);
        let mut sums = vec![KahanSum::new(); us.len()];
        for (z, w) in grid.nodes.iter().zip(&grid.weights) {
            let q = group.reduce_to_fundamental_domain(DiscPoint::new(transport(a, z * rot))?)?;
            let rep = q.representative.z();
            for (s, u) in sums.iter_mut().zip(us) {
                s.add(w * u.eval(group, rep));
            }
        }
        Ok(sums.iter().map(|s| s.value() / total).collect::<Vec<f64>>())
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let n = n_samples as f64;
    let mut out = Vec::with_capacity(us.len());
    for (j, u) in us.iter().enumerate() {
        let mean = rows.iter().map(|r| r[j]).collect::<KahanSum>().value() / n;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let (reference, reference_stderr) = match u.reference_mean() {
            Some(r) => (r, 0.0),
            None => {
                // independent sample, large enough to dominate the outer error
                let m = quotient_area_measure(group, 200_000, seed.wrapping_add(1), CUSP_HEIGHT, exec)?;
                m.mean_and_stderr(|w| u.eval(group, w))
            }
        };
        out.push(MassIdentity {
            mean,
            stderr: (var / n).sqrt(),
            reference,
            reference_stderr,
            discrepancy: (mean - reference).abs(),
        });
    }
    Ok(out)
}

/// `⟨m_{a,R}, u⟩` over an increasing `R`-grid against `⟨m_P, u⟩`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BirkhoffReport {
    pub test_function: String,
    pub base: [f64; 2],
    pub r_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub reference: f64,
    pub errors: Vec<f64>,
}

impl BirkhoffReport {
    pub fn new(test_function: String, base: Complex64, r_grid: Vec<f64>, values: Vec<f64>, reference: f64) -> Result<Self> {
        if r_grid.len() != values.len() {
            return Err(Error::Invariant("R-grid and values differ in length".into()));
        }
        if r_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invariant("R-grid must be strictly increasing".into()));
        }
        let errors = values.iter().map(|v| (v - reference).abs()).collect();
        Ok(Self {
            test_function,
            base: [base.re, base.im],
            r_grid,
            values,
            reference,
            errors,
        })
    }

    /// Columns `R, value, reference, error`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["R", "value", "reference", "error"])?;
        for i in 0..self.r_grid.len() {
            w.write_record([
                format!("{:e}", self.r_grid[i]),
                format!("{:e}", self.values[i]),
                format!("{:e}", self.reference),
                format!("{:e}", self.errors[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `B_R u(a)` for each `R` in an increasing grid.
pub fn birkhoff_report(
    group: &FuchsianGroup,
    u: &TestFunction,
    a: Complex64,
    r_grid: &[f64],
    spec: &GridSpec,
    tol: &Tolerances,
    exec: Exec,
) -> Result<BirkhoffReport> {
    let reference = u
        .reference_mean()
        .ok_or_else(|| Error::Invariant(format!("no reference mean for {}", u.name())))?;
    let values = r_grid
        .iter()
        .map(|&r| birkhoff_b(group, u, a, r, spec, tol, exec))
        .collect::<Result<Vec<_>>>()?;
    BirkhoffReport::new(u.name(), a, r_grid.to_vec(), values, reference)
}

/// Mass of the weighted leaf disc on a planar leaf domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeafMass {
    pub big_r: f64,
    /// `∫_{|ψ| < r} log(r/|ψ|) dA`, Euclidean area in the leaf chart
    pub mass: f64,
    pub m_r: f64,
    pub ratio: f64,
    /// `log(1/(1 - r))`
    pub log_scale: f64,
}

/// `∫ log(1/|x|) dA` over the square cell `[-h/2, h/2]²` is `h² (C - log h)` with this `C`.
fn cell_log_constant() -> f64 {
    // mean of log|x| over [-1/2, 1/2]² is (π/2 - 3 - log 2)/2
    -0.5 * (0.5 * PI - 3.0 - std::f64::consts::LN_2)
}

/// Grid sum of `log⁺(r e^{g})` over the leaf domain, with `|ψ| = e^{-g}`.
pub fn leaf_current_mass(field: &GreenField, big_r: f64, tol: &Tolerances) -> Result<LeafMass> {
    if !(big_r > 0.0) {
        return domain(format!("R must be positive, got {big_r}"));
    }
    let r = (0.5 * big_r).tanh();
    let ln_r = r.ln();
    let h2 = field.grid.h * field.grid.h;
    let base = field.grid.base_unknown;
    let mut acc = KahanSum::new();
    for k in 0..field.grid.unknowns() {
        if k == base {
            continue;
        }
        let g = field.g_node(k);
        if ln_r + g > 0.0 {
            acc.add(h2 * (ln_r + g));
        }
    }
    // pole cell: smooth part at the node plus the exact cell integral of -log|x|
    acc.add(h2 * (ln_r + field.corrector_at_base()) + h2 * (cell_log_constant() - field.grid.h.ln()));
    let mass = acc.value();
    let m_r = normalizer_m(big_r, tol)?.value;
    Ok(LeafMass {
        big_r,
        mass,
        m_r,
        ratio: mass / m_r,
        log_scale: -(1.0 - r).ln(),
    })
}
