//! The experiment suites. Each one appends criterion rows to a [`Report`]
//! and writes its data tables next to it.

use std::f64::consts::PI;

use lamiflow::birkhoff::{birkhoff_report, mass_identity_checks, TestFunction};
use lamiflow::currents::{default_r_mins, lelong_number, line_poincare_oracle, log_radii, mass_profile, poincare_mass_integral, AnalyticCurve, MassOptions};
use lamiflow::diffusion::{
    assemble_generator, build_kronecker, build_weighted_segment, effective_gap, identity_rng, kronecker_initial, mixing_diagnostic, random_compact, run_semigroup,
    step_implicit, RunOptions, Variant,
};
use lamiflow::fuchsian::{default_group, quotient_area_measure, CUSP_HEIGHT};
use lamiflow::green_uniformize::{solve_green, Disc};
use lamiflow::heat_kernel::{
    compare_b_vs_heat_average, green_function, green_time_integral, kernel_normalization, kernel_table, tail_bound_scale, tail_mass, tail_window, write_kernel_csv, AngularRule,
};
use lamiflow::hyp_core::{normalizer_m, GridSpec};
use lamiflow::linear_foliation::{equal_modulus_point, normalized_log_theta, theta_numeric, theta_upper_bound, LeafChart, LinearFoliationModel, ThetaOptions};
use lamiflow::{Error, Result};
use num_complex::Complex64;

use crate::config::ExperimentConfig;
use crate::report::{Cmp, Report};

pub const SUITES: [&str; 7] = [
    "kernel-identities",
    "birkhoff-equidistribution",
    "diffusion-ergodic",
    "diffusion-mixing",
    "skoda",
    "linear-foliation-theta",
    "tail-estimates",
];

pub fn run(suite: &str, cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    match suite {
        "kernel-identities" => kernel_identities(cfg, rep),
        "birkhoff-equidistribution" => birkhoff_equidistribution(cfg, rep),
        "diffusion-ergodic" => diffusion_ergodic(cfg, rep),
        "diffusion-mixing" => diffusion_mixing(cfg, rep),
        "skoda" => skoda(cfg, rep),
        "linear-foliation-theta" => linear_foliation_theta(cfg, rep),
        "tail-estimates" => tail_estimates(cfg, rep),
        other => Err(Error::Domain(format!("unknown suite {other}"))),
    }
}

/// Largest step `x_{k+1} - x_k`; nonpositive for a nonincreasing sequence.
fn max_rise(xs: &[f64]) -> f64 {
    xs.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}

fn kernel_identities(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let tol = cfg.tolerances();
    for t in cfg.list("kernel_times") {
        let n = kernel_normalization(t, &tol)?;
        rep.check("normalization", format!("t={t}"), (n.value - 1.0).abs(), cfg.real("normalization_tol"), Cmp::AtMost);
    }
    for r in cfg.list("green_radii") {
        let rho = 2.0 * r.atanh();
        let exact = green_function(rho);
        let g = green_time_integral(rho, &tol)?;
        rep.check("green_identity", format!("|y|={r}"), ((g.value - exact) / exact).abs(), cfg.real("green_identity_tol"), Cmp::AtMost);
    }
    let rhos: Vec<f64> = (0..=32).map(|k| 0.25 * k as f64).collect();
    let rows = kernel_table(&rhos, &cfg.list("kernel_times"), &tol, cfg.exec())?;
    write_kernel_csv(&rows, rep.artifact("kernel_table.csv")?)?;
    Ok(())
}

fn tail_estimates(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let tol = cfg.tolerances();
    let mut out = csv::Writer::from_writer(rep.artifact("normalizer.csv")?);
    out.write_record(["R", "M_R", "M_R_minus_2piR", "ratio"])?;
    for r in cfg.list("m_r_grid") {
        let m = normalizer_m(r, &tol)?.value;
        let two_pi_r = 2.0 * PI * r;
        out.write_record([r, m, m - two_pi_r, m / two_pi_r].map(|v| format!("{v:e}")))?;
        rep.check("m_r_offset", format!("R={r}"), (m - two_pi_r).abs(), cfg.real("m_r_offset_bound"), Cmp::AtMost);
        if r >= cfg.real("m_r_linearity_from") {
            rep.check("m_r_ratio", format!("R={r}"), (m / two_pi_r - 1.0).abs(), cfg.real("m_r_bracket"), Cmp::AtMost);
        }
    }
    out.flush()?;

    let ang = AngularRule { n: cfg.count("angular_nodes") };
    let funcs: [(&str, Box<dyn Fn(Complex64) -> f64 + Sync>); 3] = [
        ("ball", Box::new(|z: Complex64| if z.norm() < 0.5 { 1.0 } else { 0.0 })),
        ("cone", Box::new(|z: Complex64| 1.0 - z.norm())),
        ("bump", Box::new(|z: Complex64| {
            let s = z.norm_sqr();
            if s < 1.0 {
                (-s / (1.0 - s)).exp()
            } else {
                0.0
            }
        })),
    ];
    let mut out = csv::Writer::from_writer(rep.artifact("b_vs_heat.csv")?);
    out.write_record(["function", "R", "birkhoff", "heat_average", "discrepancy", "rate"])?;
    for (name, u) in &funcs {
        let mut ds = Vec::new();
        for r in cfg.list("comparison_r_grid") {
            let c = compare_b_vs_heat_average(u.as_ref(), r, ang, &tol)?;
            out.write_record([name.to_string(), format!("{r:e}"), format!("{:e}", c.birkhoff), format!("{:e}", c.heat_average), format!("{:e}", c.discrepancy), format!("{:e}", c.rate)])?;
            rep.check("b_vs_heat_constant", format!("{name};R={r}"), c.discrepancy / c.rate, cfg.real("comparison_constant"), Cmp::AtMost);
            ds.push(c.discrepancy);
        }
        rep.check("b_vs_heat_monotone", *name, max_rise(&ds), 0.0, Cmp::AtMost);
    }
    out.flush()?;

    for r in cfg.list("tail_r_grid") {
        let w = tail_window(r);
        for rho in [1e-3, 0.5 * w, w] {
            let tm = tail_mass(r, rho, &tol)?.value;
            rep.check("tail_ratio", format!("R={r};rho={rho:.6}"), tm / tail_bound_scale(r, rho), cfg.real("tail_constant"), Cmp::AtMost);
        }
    }
    Ok(())
}

fn birkhoff_equidistribution(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let (tol, exec) = (cfg.tolerances(), cfg.exec());
    let group = default_group();
    let us = [TestFunction::Constant(1.0), TestFunction::Ball { radius: cfg.real("ball_radius") }, TestFunction::Bump { radius: 0.8 }];
    let spec = GridSpec { spacing: cfg.real("mass_identity_spacing"), ..GridSpec::default() };
    let ids = mass_identity_checks(&group, &us, cfg.real("mass_identity_r"), cfg.count("mass_identity_samples"), cfg.seed("seed"), &spec, exec)?;
    let mut out = csv::Writer::from_writer(rep.artifact("mass_identity.csv")?);
    out.write_record(["function", "mean", "stderr", "reference", "discrepancy", "z"])?;
    for (u, m) in us.iter().zip(&ids) {
        out.write_record([u.name(), format!("{:e}", m.mean), format!("{:e}", m.stderr), format!("{:e}", m.reference), format!("{:e}", m.discrepancy), format!("{:e}", m.z_score())])?;
        rep.check("mass_identity", u.name(), m.z_score(), cfg.real("mass_identity_sigmas"), Cmp::AtMost);
    }
    out.flush()?;

    let points = quotient_area_measure(&group, cfg.count("equidistribution_points"), cfg.seed("equidistribution_seed"), CUSP_HEIGHT, exec)?;
    let ball = TestFunction::Ball { radius: cfg.real("ball_radius") };
    let grid = cfg.list("equidistribution_r_grid");
    let mut decreasing = 0;
    for (k, s) in points.samples.iter().enumerate() {
        let b = birkhoff_report(&group, &ball, s.zeta, &grid, &GridSpec::default(), &tol, exec)?;
        b.write_csv(rep.artifact(&format!("equidistribution_{k}.csv"))?)?;
        let (first, last) = (b.errors[0], b.errors[b.errors.len() - 1]);
        if last < first {
            decreasing += 1;
        }
        rep.check("equidistribution_final", format!("point={k}"), last, cfg.real("equidistribution_tol"), Cmp::AtMost);
    }
    rep.check("equidistribution_trend", "decreasing_points", decreasing as f64, cfg.count("equidistribution_min_decreasing") as f64, Cmp::AtLeast);
    Ok(())
}

fn diffusion_ergodic(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let (tol, exec) = (cfg.tolerances(), cfg.exec());
    let lam = build_kronecker(cfg.count("kronecker_n"), cfg.slope())?;
    lam.write_text(std::io::BufWriter::new(rep.artifact("instance.txt")?))?;
    let gen = assemble_generator(&lam, Variant::Drifted)?;
    let tau = cfg.real("tau");
    let u0 = kronecker_initial(&lam)?;
    let positive: Vec<f64> = u0.iter().map(|v| v + 2.0).collect();
    let opts = RunOptions { snapshot_every: None, exec };
    let steps = cfg.count("steps");
    let run = run_semigroup(&gen, &positive, tau, steps, &tol, opts)?;
    run.write_csv(rep.artifact("diagnostics.csv")?)?;
    let c = run.checks();
    rep.check("semigroup_identities", "mass_drift", c.mass_drift, cfg.real("mass_tol"), Cmp::AtMost);
    rep.check("semigroup_identities", "l1_growth", c.l1_growth, cfg.real("contraction_tol"), Cmp::AtMost);
    rep.check("semigroup_identities", "linf_growth", c.linf_growth, cfg.real("contraction_tol"), Cmp::AtMost);
    rep.check("semigroup_identities", "positivity_breach", c.positivity_breach, cfg.real("positivity_tol"), Cmp::AtMost);
    let ones = run_semigroup(&gen, &vec![1.0; lam.n], tau, steps, &tol, opts)?;
    let dev = ones.diagnostics.iter().map(|d| (d.max - 1.0).abs().max((d.min - 1.0).abs())).fold(0.0, f64::max);
    rep.check("semigroup_identities", "constants_fixed", dev, cfg.real("solver_rel"), Cmp::AtMost);

    // one trajectory, cut at the horizons
    let mean = lam.mean(&u0);
    let spread = lam.norm_l2(&u0.iter().map(|v| v - mean).collect::<Vec<_>>());
    let mut state = u0.clone();
    let mut integral = vec![0.0; lam.n];
    let mut done = 0usize;
    let mut dists = Vec::new();
    let mut out = csv::Writer::from_writer(rep.artifact("ergodic.csv")?);
    out.write_record(["horizon", "dist_global", "dist_leafwise", "relative"])?;
    for h in cfg.list("ergodic_horizons") {
        let target = (h / tau).round() as usize;
        let seg = run_semigroup(&gen, &state, tau, target.saturating_sub(done), &tol, opts)?;
        for (a, b) in integral.iter_mut().zip(&seg.time_integral) {
            *a += b;
        }
        state = seg.final_state;
        done = target;
        let avg: Vec<f64> = integral.iter().map(|v| v / h).collect();
        let leaf = lam.leaf_means(&u0);
        let dist_global = lam.norm_l2(&avg.iter().map(|v| v - mean).collect::<Vec<_>>());
        let dist_leafwise = lam.norm_l2(&avg.iter().enumerate().map(|(x, v)| v - leaf[lam.leaf[x]]).collect::<Vec<_>>());
        out.write_record([h, dist_global, dist_leafwise, dist_global / spread].map(|v| format!("{v:e}")))?;
        dists.push(dist_global / spread);
        rep.check("ergodic_horizon", format!("R={h}"), dist_global / spread, 1.0, Cmp::AtMost);
    }
    out.flush()?;
    rep.check("ergodic_decreasing", "max_rise", max_rise(&dists), 0.0, Cmp::AtMost);
    rep.check("ergodic_final", "relative_distance", *dists.last().expect("horizons"), cfg.real("ergodic_fraction"), Cmp::AtMost);
    Ok(())
}

fn diffusion_mixing(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let (tol, exec) = (cfg.tolerances(), cfg.exec());
    let lam = build_kronecker(cfg.count("kronecker_n"), cfg.slope())?;
    let gen = assemble_generator(&lam, Variant::Drifted)?;
    let tau = cfg.real("tau");
    let u = kronecker_initial(&lam)?;
    let grid = cfg.list("mixing_grid");
    let s = mixing_diagnostic(&gen, &u, &u, tau, &grid, &tol, exec)?;
    let mut out = csv::Writer::from_writer(rep.artifact("mixing.csv")?);
    out.write_record(["t", "correlation"])?;
    for (t, c) in s.t.iter().zip(&s.correlation) {
        out.write_record([*t, *c].map(|v| format!("{v:e}")))?;
    }
    out.flush()?;
    let c0 = s.correlation[0].abs();
    let cend = s.correlation[s.correlation.len() - 1].abs();
    rep.check("mixing_decay", "final_over_initial", cend / c0, cfg.real("mixing_fraction"), Cmp::AtMost);
    let lambda = effective_gap(&gen, &u, tau, 60, &tol, exec)?;
    let n_end = (grid[grid.len() - 1] / tau).round() as i32;
    let bound = c0 * (1.0 + tau * lambda).powi(-n_end);
    rep.check("mixing_gap_oracle", "final_over_bound", cend / (bound * (1.0 + 1e-6) + 1e-14), 1.0, Cmp::AtMost);
    let ones = vec![1.0; lam.n];
    let inv = mixing_diagnostic(&gen, &u, &ones, tau, &grid, &tol, exec)?;
    rep.check("mixing_invariance", "max_abs", inv.correlation.iter().fold(0.0, |a, c| a.max(c.abs())), 1e-10, Cmp::AtMost);

    // ⟨S(2t)u, u⟩ = ‖S(t)u‖² at each grid time t with 2t on the step lattice
    let max_steps = 2 * n_end as usize;
    let run = run_semigroup(&gen, &u, tau, max_steps, &tol, RunOptions { snapshot_every: Some(1), exec })?;
    for &t in grid.iter().filter(|t| **t > 0.0) {
        let k = (t / tau).round() as usize;
        let (st, s2t) = (&run.snapshots[k].1, &run.snapshots[2 * k].1);
        let gap = (lam.inner(s2t, &u) - lam.inner(st, st)).abs();
        rep.check("self_adjointness", format!("t={t}"), gap, cfg.real("self_adjoint_tol"), Cmp::AtMost);
    }
    let n0 = lam.norm_l2(&u);
    for t in [1.0, 4.0] {
        let k = (t / tau).round() as usize;
        if k <= max_steps {
            rep.check("hille_yosida", format!("t={t}"), run.diagnostics[k].increment / (n0 / t), cfg.real("hille_yosida_slack"), Cmp::AtMost);
        }
    }
    rep.check("energy_monotone", "max_rise", run.checks().energy_rise.max(0.0), 1e-12 * run.diagnostics[0].energy, Cmp::AtMost);

    let seg = build_weighted_segment(cfg.count("segment_length"), cfg.real("segment_h0"), cfg.real("segment_h1"))?;
    let d = assemble_generator(&seg, Variant::Plain)?;
    let dt = assemble_generator(&seg, Variant::Drifted)?;
    let mut rng = identity_rng(cfg.seed("seed"));
    let (mut sym, mut qq) = (0.0f64, 0.0f64);
    for _ in 0..cfg.count("energy_pairs") {
        let a = random_compact(&seg, &mut rng);
        let b = random_compact(&seg, &mut rng);
        let scale = seg.norm_l2(&dt.apply(&a)) * seg.norm_l2(&b);
        sym = sym.max((dt.form(&a, &b) - dt.form(&b, &a)).abs() / scale);
        let (q, qt) = (d.energy(&a), dt.energy(&a));
        qq = qq.max((q - qt).abs() / qt.abs());
    }
    rep.check("energy_identities", "self_adjoint", sym, cfg.real("energy_tol"), Cmp::AtMost);
    rep.check("energy_identities", "q_equals_q_tilde", qq, cfg.real("energy_tol"), Cmp::AtMost);
    let one_step = step_implicit(&dt, &vec![1.0; seg.n], tau, &tol, exec)?;
    rep.check("energy_identities", "segment_constants_fixed", one_step.iter().fold(0.0, |a, v| a.max((v - 1.0).abs())), cfg.real("solver_rel"), Cmp::AtMost);
    Ok(())
}

fn skoda(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let exec = cfg.exec();
    let radii = log_radii(cfg.real("skoda_r_min"), cfg.real("skoda_r_max"), cfg.count("skoda_radii"));
    let opts = MassOptions::default();
    let tols = cfg.list("lelong_tols");
    let curves = [(AnalyticCurve::line(), 1.0, tols[0]), (AnalyticCurve::two_lines(), 2.0, tols[1]), (AnalyticCurve::cusp(), 2.0, tols[2])];
    for (curve, mult, tl) in &curves {
        let p = mass_profile(curve, &radii, &opts, exec)?;
        p.write_csv(rep.artifact(&format!("profile_{}.csv", curve.name))?)?;
        rep.check("skoda_monotone", curve.name.clone(), p.monotonicity_defect().max(0.0), cfg.real("monotone_tol"), Cmp::AtMost);
        let l = lelong_number(&p)?;
        rep.check(&format!("lelong_{}", curve.name), "abs_error", (l.value - mult).abs(), *tl, Cmp::AtMost);
    }
    let rm = default_r_mins();
    let line = poincare_mass_integral(&|r| Ok(PI * r * r), &rm)?;
    let worst = line.values.iter().zip(&rm).map(|(v, r)| (v - line_poincare_oracle(*r)).abs()).fold(0.0, f64::max);
    rep.check("poincare_mass", "line_vs_closed_form", worst, cfg.real("poincare_tol"), Cmp::AtMost);
    rep.check("poincare_mass", "line_converged", if line.converged { 1.0 } else { 0.0 }, 1.0, Cmp::AtLeast);
    let synthetic = poincare_mass_integral(&|r: f64| Ok(r * r * (-r.ln())), &rm)?;
    rep.check("poincare_mass", "synthetic_divergence_flagged", if synthetic.converged { 0.0 } else { 1.0 }, 1.0, Cmp::AtLeast);
    let mut out = csv::Writer::from_writer(rep.artifact("poincare_mass.csv")?);
    out.write_record(["r_min", "line", "oracle", "synthetic", "synthetic_skoda_sup"])?;
    for i in 0..rm.len() {
        out.write_record([rm[i], line.values[i], line_poincare_oracle(rm[i]), synthetic.values[i], synthetic.skoda_sup[i]].map(|v| format!("{v:e}")))?;
    }
    out.flush()?;
    Ok(())
}

/// Points of the disc-density refinement study.
pub const DISC_POINTS: [[f64; 2]; 6] = [[0.0, 0.0], [0.3, 0.0], [0.0, 0.45], [0.42, -0.3], [0.6, 0.0], [-0.3, 0.5196]];

fn linear_foliation_theta(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let (tol, exec) = (cfg.tolerances(), cfg.exec());
    let model = LinearFoliationModel::default_complex();
    let opts = ThetaOptions { box_factor: cfg.real("theta_box_factor"), cells_per_inradius: cfg.real("theta_cells") };
    let mut out = csv::Writer::from_writer(rep.artifact("theta.csv")?);
    out.write_record(["norm_a", "theta", "upper_bound", "normalized_log_theta", "h", "unknowns"])?;
    let mut normalized = Vec::new();
    for na in cfg.list("theta_norms") {
        let a = equal_modulus_point(2, na);
        let chart = LeafChart::new(model.clone(), a.clone())?;
        let th = theta_numeric(&chart, opts, &tol, exec)?;
        let ub = theta_upper_bound(&model, &a)?;
        let v = normalized_log_theta(th.theta, na);
        out.write_record([na, th.theta, ub, v, th.h, th.unknowns as f64].map(|x| format!("{x:e}")))?;
        normalized.push(v);
        rep.check("theta_upper", format!("|a|={na}"), th.theta / ub, 1.0 + cfg.real("theta_upper_slack"), Cmp::AtMost);
    }
    out.flush()?;
    let width = normalized.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - normalized.iter().cloned().fold(f64::INFINITY, f64::min);
    rep.check("theta_window", "width", width, cfg.real("theta_window"), Cmp::AtMost);

    let disc = Disc { center: [0.0, 0.0], radius: 1.0 };
    let fine = cfg.count("green_cells");
    let mut worst = [0.0f64; 2];
    let mut out = csv::Writer::from_writer(rep.artifact("disc_density.csv")?);
    out.write_record(["x", "y", "exact", "coarse", "fine"])?;
    for p in DISC_POINTS {
        let exact = 2.0 / (1.0 - (p[0] * p[0] + p[1] * p[1]));
        let mut vals = [0.0; 2];
        for (i, cells) in [fine / 2, fine].into_iter().enumerate() {
            let f = solve_green(&disc, 1.0 / cells as f64, p, &tol, exec)?;
            vals[i] = f.density_at_base();
            worst[i] = worst[i].max(((vals[i] - exact) / exact).abs());
        }
        out.write_record([p[0], p[1], exact, vals[0], vals[1]].map(|x| format!("{x:e}")))?;
    }
    out.flush()?;
    rep.check("green_density", format!("h=1/{fine}"), worst[1], cfg.real("green_density_tol"), Cmp::AtMost);
    rep.check("green_refinement", "fine_over_coarse", worst[1] / worst[0], 0.5, Cmp::AtMost);
    Ok(())
}
