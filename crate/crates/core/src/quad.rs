//! Adaptive Gauss–Kronrod quadrature and fixed Gauss–Legendre rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::exec::KahanSum;

/// An integral value together with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn new(value: f64, error: f64) -> Self {
        Self { value, error }
    }
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate::new(self.value + rhs.value, self.error + rhs.error)
    }
}

/// Stopping rule for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadTol {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl QuadTol {
    pub fn new(abs: f64, rel: f64, max_intervals: usize) -> Self {
        Self {
            abs,
            rel,
            max_intervals,
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One application of the 15-point Kronrod rule on `[a, b]`.
fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Estimate {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    for j in 0..7 {
        let x = half * XGK[j];
        let s = f(center - x) + f(center + x);
        res_k += WGK[j] * s;
        if j % 2 == 1 {
            res_g += WG[j / 2] * s;
        }
    }
    let value = res_k * half;
    let err = ((res_k - res_g) * half).abs();
    // QUADPACK-style error rescaling is too optimistic for the kinked
    // integrands here; keep the raw Gauss/Kronrod difference.
    Estimate::new(value, err.max(50.0 * f64::EPSILON * value.abs()))
}

struct Piece {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est
            .error
            .partial_cmp(&other.est.error)
            .unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Nodes are strictly interior, so integrable endpoint singularities are
/// tolerated. Returns a convergence error when the subdivision budget is
/// exhausted before the error estimate meets the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: QuadTol) -> Result<Estimate> {
    integrate_from(&f, &[a, b], tol)
}

/// As [`integrate`], but starting from the given breakpoints.
pub fn integrate_from<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: QuadTol) -> Result<Estimate> {
    assert!(breaks.len() >= 2);
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            heap.push(Piece {
                a: w[0],
                b: w[1],
                est: kronrod15(f, w[0], w[1]),
            });
        }
    }
    let totals = |heap: &BinaryHeap<Piece>| {
        let mut v = KahanSum::new();
        let mut e = 0.0;
        for p in heap.iter() {
            v.add(p.est.value);
            e += p.est.error;
        }
        (v.value(), e)
    };
    let (mut value, mut error) = totals(&heap);
    let mut n = heap.len();
    while error > tol.target(value) {
        if n >= tol.max_intervals {
            return Err(Error::Convergence {
                what: format!("adaptive quadrature on [{}, {}]", breaks[0], breaks[breaks.len() - 1]),
                estimate: error,
                tolerance: tol.target(value),
            });
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // interval can no longer be split in floating point
            heap.push(worst);
            break;
        }
        let left = kronrod15(f, worst.a, mid);
        let right = kronrod15(f, mid, worst.b);
        heap.push(Piece {
            a: worst.a,
            b: mid,
            est: left,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            est: right,
        });
        n += 1;
        if n % 64 == 0 {
            (value, error) = totals(&heap);
        } else {
            error += left.error + right.error - worst.est.error;
            value += left.value + right.value - worst.est.value;
        }
    }
    let (value, error) = totals(&heap);
    if error > tol.target(value) && n < tol.max_intervals {
        // stopped on an unsplittable interval
        return Err(Error::Convergence {
            what: "adaptive quadrature hit floating-point resolution".into(),
            estimate: error,
            tolerance: tol.target(value),
        });
    }
    Ok(Estimate::new(value, error))
}

/// Integral over `[a, ∞)` for integrands that decay at least like `e^{-t/scale}`.
///
/// Uses `t = a - scale·ln(1-x)`, which turns an exponential tail into a
/// bounded integrand on `[0, 1)`.
pub fn integrate_exp_tail<F: Fn(f64) -> f64>(f: F, a: f64, scale: f64, tol: QuadTol) -> Result<Estimate> {
    let g = |x: f64| {
        let one_minus = 1.0 - x;
        if one_minus <= 0.0 {
            return 0.0;
        }
        let t = a - scale * one_minus.ln();
        let v = f(t);
        if v == 0.0 {
            0.0
        } else {
            v * scale / one_minus
        }
    };
    integrate(g, 0.0, 1.0, tol)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Composite Gauss–Legendre rule over consecutive panels given by `breaks`.
pub fn composite_gauss_legendre(breaks: &[f64], order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let mut nodes = Vec::with_capacity(order * breaks.len());
    let mut weights = Vec::with_capacity(order * breaks.len());
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        for (x, wt) in gx.iter().zip(&gw) {
            nodes.push(c + h * x);
            weights.push(h * wt);
        }
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> QuadTol {
        QuadTol::new(1e-12, 1e-12, 2000)
    }

    #[test]
    fn polynomials_are_exact() {
        let est = integrate(|x| 3.0 * x * x + 1.0, 0.0, 2.0, tol()).unwrap();
        assert!((est.value - 10.0).abs() < 1e-13);
    }

    #[test]
    fn log_singularity_at_endpoint() {
        // ∫_0^1 ln x dx = -1
        let est = integrate(|x: f64| x.ln(), 0.0, 1.0, QuadTol::new(1e-10, 1e-10, 2000)).unwrap();
        assert!((est.value + 1.0).abs() < 1e-9, "{est:?}");
    }

    #[test]
    fn inverse_sqrt_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let est = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, QuadTol::new(1e-9, 1e-9, 4000)).unwrap();
        assert!((est.value - 2.0).abs() < 1e-8, "{est:?}");
    }

    #[test]
    fn exponential_tail() {
        let est = integrate_exp_tail(|t: f64| (-t).exp(), 1.0, 1.0, tol()).unwrap();
        assert!((est.value - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let r = integrate(|x: f64| (1.0 / x).sin() / x, 1e-9, 1.0, QuadTol::new(1e-14, 0.0, 20));
        assert!(matches!(r, Err(Error::Convergence { .. })));
    }

    #[test]
    fn gauss_legendre_integrates_degree_2n_minus_1() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }
}
