//! The level-2 principal congruence group acting on the disc, reduction to
//! its fundamental domain, and sampling of normalized Poincaré area on the quotient.
//!
//! Group elements are integer matrices acting on the upper half-plane `H`;
//! the disc model is reached through the Cayley map `z ↦ (z - i)/(z + i)`,
//! which sends `i` to the origin. For the default group the standard domain
//! `{|Re z| ≤ 1, |z - 1/2| ≥ 1/2, |z + 1/2| ≥ 1/2}` is the Dirichlet domain
//! centred at `i`, so distance-decreasing greedy reduction ends inside it.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exec::Exec;
use crate::hyp_core::DiscPoint;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Half-plane point to disc point.
pub fn cayley(z: Complex64) -> Complex64 {
    (z - I) / (z + I)
}

/// Disc point to half-plane point.
pub fn cayley_inv(w: Complex64) -> Complex64 {
    I * (1.0 + w) / (1.0 - w)
}

/// `cosh d_H(z, i) = (|z|² + 1) / (2 Im z)`.
pub fn cosh_dist_to_i(z: Complex64) -> f64 {
    (z.norm_sqr() + 1.0) / (2.0 * z.im)
}

/// An orientation-preserving isometry given by a real matrix `[[a, b], [c, d]]` with `ad - bc = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoebiusMap {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl MoebiusMap {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det > 0.0) {
            return Err(Error::Invariant(format!("determinant must be positive, got {det}")));
        }
        let s = det.sqrt();
        Ok(Self {
            a: a / s,
            b: b / s,
            c: c / s,
            d: d / s,
        })
    }

    pub fn identity() -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 1.0,
        }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn inverse(&self) -> Self {
        Self {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, o: &Self) -> Self {
        Self {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    /// Action on `H`; the imaginary part is formed as `Im z / |cz + d|²` to keep it positive.
    pub fn apply_h(&self, z: Complex64) -> Complex64 {
        let den = z * self.c + self.d;
        let n2 = den.norm_sqr();
        let re = ((z * self.a + self.b) * den.conj()).re / n2;
        Complex64::new(re, z.im / n2)
    }

    /// The conjugated `SU(1,1)` matrix `[[α, β], [γ, δ]]` acting on the disc.
    pub fn disc_matrix(&self) -> [Complex64; 4] {
        // C M C^{-1} with C = [[1, -i], [1, i]]
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        let alpha = Complex64::new(a + d, b - c) * 0.5;
        let beta = Complex64::new(a - d, -(b + c)) * 0.5;
        [alpha, beta, beta.conj(), alpha.conj()]
    }

    /// Action on the disc.
    pub fn apply_disc(&self, w: Complex64) -> Complex64 {
        let [al, be, ga, de] = self.disc_matrix();
        (al * w + be) / (ga * w + de)
    }
}

/// Generator labels; inverses are separate letters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Letter(pub u8);

/// A side of the fundamental domain in `H`, with the letter pairing it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Side {
    /// `Re z ≤ x` (or `≥` when `upper` is false)
    Vertical { x: f64, upper: bool, paired_by: Letter },
    /// `|z - center| ≥ radius` with a real center
    Circle { center: f64, radius: f64, paired_by: Letter },
}

impl Side {
    /// Signed penetration; positive means the inequality is violated.
    fn violation(&self, z: Complex64) -> f64 {
        match *self {
            Side::Vertical { x, upper, .. } => {
                if upper {
                    z.re - x
                } else {
                    x - z.re
                }
            }
            Side::Circle { center, radius, .. } => radius - (z - center).norm(),
        }
    }
}

/// A free Fuchsian group given by generators (inverses included) and a
/// fundamental domain in `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuchsianGroup {
    pub names: Vec<String>,
    pub generators: Vec<MoebiusMap>,
    /// index of the inverse of each generator
    pub inverse_of: Vec<usize>,
    pub sides: Vec<Side>,
    /// cusps as maps sending the cusp to `∞` and the cusp width there
    pub cusp_charts: Vec<(MoebiusMap, f64)>,
}

/// `Γ(2)` with generators `A = [[1, 2], [0, 1]]`, `B = [[1, 0], [2, 1]]` and their inverses.
pub fn default_group() -> FuchsianGroup {
    let a = MoebiusMap::new(1.0, 2.0, 0.0, 1.0).unwrap();
    let b = MoebiusMap::new(1.0, 0.0, 2.0, 1.0).unwrap();
    let s = |b, c, d| MoebiusMap::new(0.0, b, c, d).unwrap();
    FuchsianGroup {
        names: vec!["A".into(), "a".into(), "B".into(), "b".into()],
        generators: vec![a, a.inverse(), b, b.inverse()],
        inverse_of: vec![1, 0, 3, 2],
        sides: vec![
            Side::Vertical { x: 1.0, upper: true, paired_by: Letter(1) },
            Side::Vertical { x: -1.0, upper: false, paired_by: Letter(0) },
            Side::Circle { center: 0.5, radius: 0.5, paired_by: Letter(3) },
            Side::Circle { center: -0.5, radius: 0.5, paired_by: Letter(2) },
        ],
        cusp_charts: vec![
            (MoebiusMap::identity(), 2.0),
            // z ↦ -1/z, z ↦ -1/(z - 1), z ↦ -1/(z + 1)
            (s(-1.0, 1.0, 0.0), 2.0),
            (s(-1.0, 1.0, -1.0), 1.0),
            (s(-1.0, 1.0, 1.0), 1.0),
        ],
    }
}

/// Reduced representative of a point of `D / Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientPoint {
    pub representative: DiscPoint,
    /// same point in `H`
    pub half_plane: Complex64,
    /// letters applied, in order
    pub word: Vec<Letter>,
}

/// Step cap of the greedy reduction.
pub const REDUCTION_CAP: usize = 1_000_000;
/// Slack of the fundamental-domain inequalities in `H`.
pub const DOMAIN_TOL: f64 = 1e-12;

impl FuchsianGroup {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Group element of a word (letters applied left to right).
    pub fn element(&self, word: &[Letter]) -> MoebiusMap {
        word.iter()
            .fold(MoebiusMap::identity(), |m, l| self.generators[l.0 as usize].compose(&m))
    }

    pub fn in_domain_h(&self, z: Complex64) -> bool {
        self.sides.iter().all(|s| s.violation(z) <= DOMAIN_TOL * (1.0 + z.norm()))
    }

    /// Disc images `g(0)` of the generators; the domain is where `0` is
    /// at least as close as every `g(0)`.
    pub fn bisector_circles(&self) -> Vec<(Complex64, f64)> {
        self.generators
            .iter()
            .map(|g| {
                let p = g.apply_disc(Complex64::new(0.0, 0.0));
                let c = p / p.norm_sqr();
                (c, (c.norm_sqr() - 1.0).sqrt())
            })
            .collect()
    }

    /// Membership through the disc-model bisector inequalities `|w - c_g| ≥ r_g`,
    /// independently of the half-plane side list.
    pub fn in_domain_disc(&self, w: Complex64, slack: f64) -> bool {
        self.bisector_circles().iter().all(|(c, r)| (w - c).norm() >= r - slack)
    }

    /// Greedy reduction by distance-decreasing generators.
    pub fn reduce_h(&self, z: Complex64) -> Result<(Complex64, Vec<Letter>)> {
        if !(z.im > 0.0) {
            return domain(format!("{z} is not in the upper half-plane"));
        }
        let mut z = z;
        let mut word = Vec::new();
        let mut f = cosh_dist_to_i(z);
        while !self.in_domain_h(z) {
            if word.len() >= REDUCTION_CAP {
                return Err(Error::IterationCap {
                    what: "fundamental-domain reduction".into(),
                    cap: REDUCTION_CAP,
                });
            }
            let (best, bz, bf) = self
                .generators
                .iter()
                .enumerate()
                .map(|(k, g)| {
                    let w = g.apply_h(z);
                    (k, w, cosh_dist_to_i(w))
                })
                .min_by(|p, q| p.2.total_cmp(&q.2))
                .unwrap();
            if !(bf < f) {
                return Err(Error::Invariant(format!("no generator decreases the distance at {z}")));
            }
            z = bz;
            f = bf;
            word.push(Letter(best as u8));
        }
        Ok((z, word))
    }

    pub fn reduce_to_fundamental_domain(&self, zeta: DiscPoint) -> Result<QuotientPoint> {
        if !(zeta.modulus() < 1.0 - 1e-12) {
            return domain("point too close to the unit circle for reduction");
        }
        let (zh, word) = self.reduce_h(cayley_inv(zeta.z()))?;
        let w = cayley(zh);
        // |w| < 1 may fail by rounding only for points too deep in a cusp
        let representative = DiscPoint::new(if w.norm() < 1.0 { w } else { w * (1.0 - f64::EPSILON) / w.norm() })?;
        Ok(QuotientPoint {
            representative,
            half_plane: zh,
            word,
        })
    }

    /// `true` if `z` lies in the horoball of height `y_max` at some cusp.
    pub fn in_cusp(&self, z: Complex64, y_max: f64) -> bool {
        self.cusp_charts.iter().any(|(m, _)| m.apply_h(z).im > y_max)
    }

    /// Fraction of quotient area lost by removing cusp horoballs of height `y_max`.
    pub fn cusp_area_loss_fraction(&self, y_max: f64) -> f64 {
        self.cusp_charts.iter().map(|(_, w)| w / y_max).sum::<f64>() / self.area()
    }

    /// Poincaré area of the quotient, `2π` for `Γ(2)`.
    pub fn area(&self) -> f64 {
        2.0 * PI
    }
}

/// A finitely supported measure on the quotient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuotientSample {
    pub zeta: Complex64,
    pub weight: f64,
    pub word_length: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EmpiricalMeasure {
    pub samples: Vec<QuotientSample>,
}

impl EmpiricalMeasure {
    pub fn total_weight(&self) -> f64 {
        self.samples.iter().map(|s| s.weight).collect::<crate::exec::KahanSum>().value()
    }

    pub fn integrate<F: Fn(Complex64) -> f64>(&self, f: F) -> f64 {
        self.samples.iter().map(|s| s.weight * f(s.zeta)).collect::<crate::exec::KahanSum>().value()
    }

    /// Mean and standard error of `f` under equal-weight samples.
    pub fn mean_and_stderr<F: Fn(Complex64) -> f64>(&self, f: F) -> (f64, f64) {
        let n = self.samples.len() as f64;
        let vals: Vec<f64> = self.samples.iter().map(|s| f(s.zeta)).collect();
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    }

    /// CSV with columns `re, im, weight, word_length`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["re", "im", "weight", "word_length"])?;
        for s in &self.samples {
            w.write_record([
                format!("{:e}", s.zeta.re),
                format!("{:e}", s.zeta.im),
                format!("{:e}", s.weight),
                s.word_length.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws per chunk; each chunk has its own ChaCha stream.
const SAMPLE_CHUNK: usize = 4096;
/// Default cusp truncation height.
pub const CUSP_HEIGHT: f64 = 1e3;

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64 + 1);
    rng
}

/// One point of the standard `Γ(2)` domain with law `dx dy / y²` normalized:
/// `x` has the arcsine law on `[-1, 1]`, and given `x`, `y = h(x)/U` with `h(x) = √(|x|(1 - |x|))`.
fn draw_standard_domain<R: Rng>(rng: &mut R) -> Complex64 {
    loop {
        let s = (0.5 * PI * rng.random::<f64>()).sin();
        let ax = s * s;
        let x = if rng.random_bool(0.5) { ax } else { -ax };
        let h = (ax * (1.0 - ax)).sqrt();
        let u = 1.0 - rng.random::<f64>();
        let y = h / u;
        if y > 0.0 && y.is_finite() {
            return Complex64::new(x, y);
        }
    }
}

/// `n` i.i.d. samples of normalized Poincaré area on the fundamental domain of
/// [`default_group`], with cusp horoballs above height `y_max` removed by rejection.
pub fn quotient_area_measure(group: &FuchsianGroup, n: usize, seed: u64, y_max: f64, exec: Exec) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return domain("need at least one sample");
    }
    if *group != default_group() {
        return domain("area sampling is implemented for the level-2 congruence group only");
    }
    let chunks = n.div_ceil(SAMPLE_CHUNK);
    let parts = exec.map_range(chunks, |c| {
        let mut rng = chunk_rng(seed, c);
        let count = SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let z = draw_standard_domain(&mut rng);
            if group.in_cusp(z, y_max) {
                continue;
            }
            let w = cayley(z);
            if w.norm() < 1.0 {
                out.push(QuotientSample {
                    zeta: w,
                    weight: 1.0 / n as f64,
                    word_length: 0,
                });
            }
        }
        out
    });
    Ok(EmpiricalMeasure {
        samples: parts.into_iter().flatten().collect(),
    })
}
