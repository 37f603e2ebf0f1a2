//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Criterion 3 is analytically unattainable for the Poincaré normalization
//! in use; its line reports FAIL, and the run instead requires the measured
//! `M_R` to match `4π log cosh(R/2)`. Any other FAIL makes the target fail.

use std::f64::consts::PI;
use std::time::Instant;

use lamiflow::birkhoff::{birkhoff_b, mass_identity_checks, TestFunction};
use lamiflow::currents::{lelong_number, log_radii, mass_profile, AnalyticCurve, MassOptions};
use lamiflow::diffusion::{
    assemble_generator, build_kronecker, build_weighted_segment, identity_rng, kronecker_initial, mixing_diagnostic, random_compact, run_semigroup, RunOptions, Slope, Variant,
    DEFAULT_MIXING_GRID,
};
use lamiflow::fuchsian::{default_group, quotient_area_measure, CUSP_HEIGHT};
use lamiflow::green_uniformize::{solve_green, Disc};
use lamiflow::heat_kernel::{compare_b_vs_heat_average, green_time_integral, kernel_eval, AngularRule};
use lamiflow::hyp_core::{normalizer_m, GridSpec};
use lamiflow::linear_foliation::{equal_modulus_point, normalized_log_theta, theta_numeric, theta_upper_bound, LeafChart, LinearFoliationModel, ThetaOptions};
use lamiflow::quad::gauss_legendre;
use lamiflow::{Exec, Tolerances};
use num_complex::Complex64;

const GOLDEN: f64 = 1.618_033_988_749_895;
const KNOWN_RED: [u32; 1] = [3];

struct Outcome {
    pass: bool,
    detail: String,
    /// extra requirement that must hold even when the criterion is red
    sound: bool,
}

fn ok(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail, sound: true }
}

/// Composite Gauss-Legendre on `[a, b]` with `panels` equal panels.
fn composite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&w) {
            s += wi * 0.5 * h * f(mid + 0.5 * h * xi);
        }
    }
    s
}

fn c1(tol: &Tolerances) -> Outcome {
    let mut worst = 0.0f64;
    for t in [0.1f64, 1.0, 10.0] {
        let top = t + 14.0 * (2.0 * t).sqrt() + 12.0;
        let mass = composite(|rho| kernel_eval(rho, t, tol).unwrap().value * 2.0 * PI * rho.sinh(), 0.0, top, (top / 0.25) as usize, 12);
        worst = worst.max((mass - 1.0).abs());
    }
    ok(worst <= 1e-6, format!("max |mass - 1| = {worst:.3e} (tol 1e-6)"))
}

fn c2(tol: &Tolerances) -> Outcome {
    let mut worst = 0.0f64;
    for y in [0.3f64, 0.6, 0.9] {
        let exact = (1.0 / y).ln() / (2.0 * PI);
        let g = green_time_integral(2.0 * y.atanh(), tol).unwrap().value;
        worst = worst.max(((g - exact) / exact).abs());
    }
    ok(worst <= 1e-4, format!("max relative error = {worst:.3e} (tol 1e-4)"))
}

fn c3(tol: &Tolerances) -> Outcome {
    let mut sup = 0.0f64;
    let mut bracket = true;
    let mut closed_form = 0.0f64;
    let mut ratios = Vec::new();
    for r in [1.0f64, 2.0, 4.0, 8.0, 16.0] {
        let m = normalizer_m(r, tol).unwrap().value;
        let exact = 4.0 * PI * (0.5 * r).cosh().ln();
        closed_form = closed_form.max(((m - exact) / exact).abs());
        sup = sup.max((m - 2.0 * PI * r).abs());
        let ratio = m / (2.0 * PI * r);
        if r >= 4.0 {
            ratios.push(format!("{ratio:.4}"));
            bracket &= (0.8..=1.2).contains(&ratio);
        }
    }
    Outcome {
        pass: sup.is_finite() && bracket,
        detail: format!("sup |M_R - 2πR| = {sup:.4}; M_R/(2πR) at R=4,8,16 = [{}] vs [0.8, 1.2]; closed-form rel err {closed_form:.1e}", ratios.join(", ")),
        sound: sup.is_finite() && closed_form <= 1e-8,
    }
}

fn c4(tol: &Tolerances) -> Outcome {
    let ball = |z: Complex64| if z.norm() < 0.5 { 1.0 } else { 0.0 };
    let cone = |z: Complex64| 1.0 - z.norm();
    let bump = |z: Complex64| {
        let s = z.norm_sqr();
        if s < 1.0 {
            (-s / (1.0 - s)).exp()
        } else {
            0.0
        }
    };
    let funcs: [(&str, &(dyn Fn(Complex64) -> f64 + Sync)); 3] = [("ball", &ball), ("cone", &cone), ("bump", &bump)];
    let mut worst = 0.0f64;
    let mut monotone = true;
    for (_, u) in funcs {
        let mut prev = f64::INFINITY;
        for r in [4.0f64, 8.0, 16.0] {
            let d = compare_b_vs_heat_average(u, r, AngularRule { n: 64 }, tol).unwrap().discrepancy;
            worst = worst.max(d * r.sqrt() / r.ln().sqrt());
            monotone &= d <= prev;
            prev = d;
        }
    }
    ok(worst <= 0.25 && monotone, format!("max discrepancy·R^(1/2)(log R)^(-1/2) = {worst:.4} (C = 0.25); nonincreasing: {monotone}"))
}

fn ball_mass(r: f64) -> f64 {
    // area of a geodesic ball over the quotient area 2π
    4.0 * PI * (0.5 * r).sinh().powi(2) / (2.0 * PI)
}

fn c5() -> Outcome {
    let group = default_group();
    let us = [TestFunction::Constant(1.0), TestFunction::Ball { radius: 0.5 }, TestFunction::Bump { radius: 0.8 }];
    let bump_oracle = composite(|rho| (1.0 - (rho / 0.8).powi(2)).powi(2) * 2.0 * PI * rho.sinh(), 0.0, 0.8, 16, 12) / (2.0 * PI);
    let oracles = [1.0, ball_mass(0.5), bump_oracle];
    let spec = GridSpec { spacing: 0.25, ..GridSpec::default() };
    let ids = mass_identity_checks(&group, &us, 3.0, 10_000, 42, &spec, Exec::default()).unwrap();
    let mut worst = 0.0f64;
    let mut zs = Vec::new();
    for (m, o) in ids.iter().zip(oracles) {
        let d = (m.mean - o).abs();
        let z = if m.stderr == 0.0 { if d <= 1e-12 { 0.0 } else { f64::INFINITY } } else { d / m.stderr };
        worst = worst.max(z);
        zs.push(format!("{z:.2}"));
    }
    ok(worst <= 3.0, format!("z-scores [{}] (≤ 3 standard errors)", zs.join(", ")))
}

fn c6(tol: &Tolerances) -> Outcome {
    let group = default_group();
    let pts = quotient_area_measure(&group, 5, 2024, CUSP_HEIGHT, Exec::default()).unwrap();
    let u = TestFunction::Ball { radius: 0.5 };
    let reference = ball_mass(0.5);
    let mut decreasing = 0;
    let mut last = 0.0f64;
    for s in &pts.samples {
        let err = |r: f64| (birkhoff_b(&group, &u, s.zeta, r, &GridSpec::default(), tol, Exec::default()).unwrap() - reference).abs();
        let (e2, e8) = (err(2.0), err(8.0));
        if e8 < e2 {
            decreasing += 1;
        }
        last = last.max(e8);
    }
    ok(decreasing >= 4 && last <= 0.1, format!("{decreasing}/5 points decreasing; max R=8 error = {last:.4} (≤ 0.1, seed 2024)"))
}

fn c7(tol: &Tolerances) -> Outcome {
    let lam = build_kronecker(64, Slope::Irrational(GOLDEN)).unwrap();
    let gen = assemble_generator(&lam, Variant::Drifted).unwrap();
    let u0: Vec<f64> = kronecker_initial(&lam).unwrap().iter().map(|v| v + 2.0).collect();
    let opts = RunOptions { snapshot_every: Some(1), exec: Exec::default() };
    let run = run_semigroup(&gen, &u0, 0.05, 200, tol, opts).unwrap();
    let n = lam.n as f64;
    let mass = |u: &[f64]| u.iter().sum::<f64>() / n;
    let l1 = |u: &[f64]| u.iter().map(|v| v.abs()).sum::<f64>() / n;
    let linf = |u: &[f64]| u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let (mut drift, mut grow1, mut growi, mut neg) = (0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
    for w in run.snapshots.windows(2) {
        let (a, b) = (&w[0].1, &w[1].1);
        drift = drift.max((mass(b) - mass(a)).abs());
        grow1 = grow1.max((l1(b) - l1(a)) / l1(a));
        growi = growi.max((linf(b) - linf(a)) / linf(a));
        neg = neg.max(b.iter().fold(0.0f64, |m, v| m.max(-v)));
    }
    let ones = run_semigroup(&gen, &vec![1.0; lam.n], 0.05, 200, tol, opts).unwrap();
    let fixed = ones.snapshots.iter().flat_map(|s| s.1.iter()).fold(0.0f64, |a, v| a.max((v - 1.0).abs()));
    let pass = drift <= 1e-10 && grow1 <= 1e-12 && growi <= 1e-12 && neg <= 1e-12 && fixed <= tol.semigroup_rel;
    ok(pass, format!("mass drift {drift:.1e}; L1 growth {grow1:.1e}; Linf growth {growi:.1e}; positivity breach {neg:.1e}; |S(t)1 - 1| {fixed:.1e}"))
}

fn c8(tol: &Tolerances) -> Outcome {
    let lam = build_kronecker(64, Slope::Irrational(GOLDEN)).unwrap();
    let gen = assemble_generator(&lam, Variant::Drifted).unwrap();
    let u0 = kronecker_initial(&lam).unwrap();
    let n = lam.n as f64;
    let mean = u0.iter().sum::<f64>() / n;
    let l2 = |u: &[f64]| (u.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let spread = l2(&u0.iter().map(|v| v - mean).collect::<Vec<_>>());
    let mut rel = Vec::new();
    for horizon in [10.0f64, 40.0, 160.0] {
        let run = run_semigroup(&gen, &u0, 0.05, (horizon / 0.05).round() as usize, tol, RunOptions::default()).unwrap();
        let dev: Vec<f64> = run.time_integral.iter().map(|v| v / horizon - mean).collect();
        rel.push(l2(&dev) / spread);
    }
    let decreasing = rel.windows(2).all(|w| w[1] < w[0]);
    let last = rel[2];
    ok(decreasing && last <= 0.05, format!("relative distances {:.2e}, {:.2e}, {:.2e} (decreasing, final ≤ 0.05)", rel[0], rel[1], rel[2]))
}

fn c9(tol: &Tolerances) -> Outcome {
    let lam = build_kronecker(64, Slope::Irrational(GOLDEN)).unwrap();
    let gen = assemble_generator(&lam, Variant::Drifted).unwrap();
    let u = kronecker_initial(&lam).unwrap();
    let tau = 0.05;
    let s = mixing_diagnostic(&gen, &u, &u, tau, &DEFAULT_MIXING_GRID, tol, Exec::default()).unwrap();
    let ratio = (s.correlation[s.correlation.len() - 1] / s.correlation[0]).abs();
    let t_max = DEFAULT_MIXING_GRID[DEFAULT_MIXING_GRID.len() - 1];
    let k_max = (t_max / tau).round() as usize;
    let run = run_semigroup(&gen, &u, tau, k_max, tol, RunOptions { snapshot_every: Some(1), exec: Exec::default() }).unwrap();
    let n = lam.n as f64;
    let inner = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / n;
    let mut worst = 0.0f64;
    for &t in DEFAULT_MIXING_GRID.iter().filter(|t| **t > 0.0 && 2.0 * **t <= t_max) {
        let k = (t / tau).round() as usize;
        let st = &run.snapshots[k].1;
        worst = worst.max((inner(&run.snapshots[2 * k].1, &u) - inner(st, st)).abs());
    }
    ok(ratio <= 1e-3 && worst <= 1e-8, format!("correlation ratio at t={t_max} = {ratio:.2e} (≤ 1e-3); |<S(2t)u,u> - |S(t)u|²| ≤ {worst:.1e} (≤ 1e-8)"))
}

fn c10() -> Outcome {
    let seg = build_weighted_segment(64, 1.0, 4.0).unwrap();
    let d = assemble_generator(&seg, Variant::Plain).unwrap();
    let dt = assemble_generator(&seg, Variant::Drifted).unwrap();
    let z: f64 = seg.h.iter().zip(&seg.mu).map(|(h, m)| h * m).sum();
    // q̃(u, v) = Σ_edges c h̄ (u_y - u_x)(v_y - v_x) / Z
    let q_tilde = |u: &[f64], v: &[f64]| {
        seg.edges.iter().map(|&(x, y, c)| c * 0.5 * (seg.h[x] + seg.h[y]) * (u[y] - u[x]) * (v[y] - v[x])).sum::<f64>() / z
    };
    let mut rng = identity_rng(10);
    let (mut sym, mut qq) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let u = random_compact(&seg, &mut rng);
        let v = random_compact(&seg, &mut rng);
        let (uv, vu, edge) = (dt.form(&u, &v), dt.form(&v, &u), q_tilde(&u, &v));
        let scale = q_tilde(&u, &u).sqrt() * q_tilde(&v, &v).sqrt();
        sym = sym.max((uv - vu).abs() / scale).max((uv - edge).abs() / scale);
        let q = d.energy(&u);
        qq = qq.max((q - q_tilde(&u, &u)).abs() / q_tilde(&u, &u));
    }
    ok(sym <= 1e-12 && qq <= 1e-12, format!("self-adjointness {sym:.1e}; |q - q̃|/q̃ {qq:.1e} (≤ 1e-12, 100 pairs)"))
}

fn c11() -> Outcome {
    let radii = log_radii(1e-3, 1e-1, 9);
    let opts = MassOptions::default();
    let cases = [(AnalyticCurve::line(), 1.0, 1e-3), (AnalyticCurve::two_lines(), 2.0, 1e-3), (AnalyticCurve::cusp(), 2.0, 2e-2)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (c, mult, tl) in &cases {
        let p = mass_profile(c, &radii, &opts, Exec::default()).unwrap();
        let monotone = p.ratios.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-6));
        let l = lelong_number(&p).unwrap().value;
        pass &= monotone && (l - mult).abs() <= *tl;
        parts.push(format!("{} Lelong {l:.6} monotone {monotone}", c.name));
    }
    // cusp oracle: |z|² = s⁴ + s⁶ on |t| = s, mass π(2s⁴ + 3s⁶)
    let cusp = AnalyticCurve::cusp();
    let mut worst = 0.0f64;
    for &r in &radii {
        let mut s = r.sqrt();
        for _ in 0..200 {
            s = (r * r / (1.0 + s * s)).powf(0.25);
        }
        let exact = PI * (2.0 * s.powi(4) + 3.0 * s.powi(6));
        worst = worst.max((cusp.mass(r, &opts).unwrap() - exact).abs() / exact);
    }
    pass &= worst <= 1e-8;
    ok(pass, format!("{}; cusp closed-form err {worst:.1e}", parts.join("; ")))
}

fn c12(tol: &Tolerances) -> Outcome {
    let model = LinearFoliationModel::default_complex();
    let mut vals = Vec::new();
    let mut worst = 0.0f64;
    for na in [1e-1, 1e-2, 1e-3, 1e-4] {
        let a = equal_modulus_point(2, na);
        let chart = LeafChart::new(model.clone(), a.clone()).unwrap();
        let th = theta_numeric(&chart, ThetaOptions::default(), tol, Exec::default()).unwrap();
        vals.push(normalized_log_theta(th.theta, na));
        worst = worst.max(th.theta / theta_upper_bound(&model, &a).unwrap());
    }
    let width = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vals.iter().cloned().fold(f64::INFINITY, f64::min);
    ok(width <= 4.0 && worst <= 1.05, format!("window width {width:.3} (≤ 4); max ϑ/upper bound {worst:.3} (≤ 1.05)"))
}

fn c13(tol: &Tolerances) -> Outcome {
    let disc = Disc { center: [0.0, 0.0], radius: 1.0 };
    let pts = [[0.0, 0.0], [0.3, 0.0], [0.0, 0.45], [0.42, -0.3], [0.6, 0.0], [-0.3, 0.5196]];
    let err = |h: f64| {
        pts.iter()
            .map(|p| {
                let exact = 2.0 / (1.0 - (p[0] * p[0] + p[1] * p[1]));
                let f = solve_green(&disc, h, *p, tol, Exec::default()).unwrap();
                ((f.density_at_base() - exact) / exact).abs()
            })
            .fold(0.0f64, f64::max)
    };
    let (e64, e128) = (err(1.0 / 64.0), err(1.0 / 128.0));
    ok(e128 <= 0.02 && e128 <= 0.5 * e64, format!("max density error {e64:.2e} at h=1/64, {e128:.2e} at h=1/128 (≤ 2%, at least halved)"))
}

fn main() {
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Outcome>)> = vec![
        (1, "heat-kernel normalization", Box::new(|| c1(&Tolerances::default()))),
        (2, "Green identity", Box::new(|| c2(&Tolerances::default()))),
        (3, "M_R linearity", Box::new(|| c3(&Tolerances::default()))),
        (4, "B vs heat average", Box::new(|| c4(&Tolerances::default()))),
        (5, "Birkhoff mass identity", Box::new(c5)),
        (6, "Birkhoff equidistribution trend", Box::new(|| c6(&Tolerances::default()))),
        (7, "semigroup exact identities", Box::new(|| c7(&Tolerances::default()))),
        (8, "ergodic averaging", Box::new(|| c8(&Tolerances::default()))),
        (9, "mixing for the drifted Laplacian", Box::new(|| c9(&Tolerances::default()))),
        (10, "energy identities", Box::new(c10)),
        (11, "Skoda monotonicity and Lelong numbers", Box::new(c11)),
        (12, "linear-foliation theta sandwich", Box::new(|| c12(&Tolerances::default()))),
        (13, "Green-solver validation", Box::new(|| c13(&Tolerances::default()))),
    ];
    let mut unexpected = Vec::new();
    let start = Instant::now();
    for (id, name, f) in &criteria {
        let t0 = Instant::now();
        let o = f();
        println!("{} criterion {id:>2} ({name}): {} [{:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail, t0.elapsed().as_secs_f64());
        let known = KNOWN_RED.contains(id);
        if (!o.pass && !known) || !o.sound {
            unexpected.push(*id);
        }
        if o.pass && known {
            println!("note: criterion {id} is listed as unattainable but passed");
        }
    }
    println!("acceptance finished in {:.1}s", start.elapsed().as_secs_f64());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
