//! Leafwise heat semigroups on finite laminations.
//!
//! A lamination here is a graph whose edges run along leaves, with
//! conductances `c_xy`, node metric weights `μ_x`, a positive leafwise
//! harmonic weight `h` and the measure `m ∝ h μ`. The two generators are
//!
//! ```text
//! Δu(x) = (1/μ_x) Σ_y c_xy (u_y - u_x)
//! Δ̃u(x) = (1/(h_x μ_x)) Σ_y c_xy h̄_xy (u_y - u_x),   h̄_xy = (h_x + h_y)/2
//! ```
//!
//! so that `Δ̃` is self-adjoint in `L²(m)` and `F = Δ̃ - Δ` is the drift
//! `(1/μ_x) Σ_y c_xy (h_y - h_x)/(2 h_x) (u_y - u_x)`.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{domain, Error, Result};
use crate::exec::{Exec, KahanSum};
use crate::linalg::{bicgstab, dot, pcg, LinearOperator, SolveOptions};

/// Slope of the Kronecker leaves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Slope {
    /// realized by the integer nearest `α N` whose fractional part is coprime to `N`
    Irrational(f64),
    /// `p/q` with `q | N`
    Rational(i64, i64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteLamination {
    pub n: usize,
    /// undirected edges `(x, y, c_xy)` with `x < y`
    pub edges: Vec<(usize, usize, f64)>,
    pub leaf: Vec<usize>,
    pub n_leaves: usize,
    pub h: Vec<f64>,
    pub mu: Vec<f64>,
    pub m: Vec<f64>,
    /// nodes where `h` need not be harmonic
    pub boundary: Vec<bool>,
    /// lattice slope `P/N` used by a Kronecker instance
    pub lattice_slope: Option<(i64, i64)>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn connected_leaves(n: usize, edges: &[(usize, usize, f64)]) -> (Vec<usize>, usize) {
    let mut adj = vec![Vec::new(); n];
    for &(x, y, _) in edges {
        adj[x].push(y);
        adj[y].push(x);
    }
    let mut leaf = vec![usize::MAX; n];
    let mut count = 0;
    for s in 0..n {
        if leaf[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        leaf[s] = count;
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
                if leaf[y] == usize::MAX {
                    leaf[y] = count;
                    stack.push(y);
                }
            }
        }
        count += 1;
    }
    (leaf, count)
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let z: f64 = v.iter().copied().collect::<KahanSum>().value();
    v.into_iter().map(|x| x / z).collect()
}

/// `N × N` torus with one leafwise edge per node along the lattice slope.
pub fn build_kronecker(n_side: usize, slope: Slope) -> Result<DiscreteLamination> {
    if n_side < 8 {
        return domain(format!("Kronecker grid needs N ≥ 8, got {n_side}"));
    }
    if n_side > 4096 {
        return domain(format!("Kronecker grid too large: N = {n_side}"));
    }
    let nn = n_side as i64;
    let p_total = match slope {
        Slope::Irrational(a) => {
            if !a.is_finite() {
                return domain("slope must be finite");
            }
            let whole = a.floor() as i64;
            let target = (a - a.floor()) * nn as f64;
            let mut best: Option<i64> = None;
            for d in 0..nn {
                for cand in [target.floor() as i64 - d, target.ceil() as i64 + d] {
                    if (1..nn).contains(&cand) && gcd(cand, nn) == 1 {
                        let better = match best {
                            None => true,
                            Some(b) => (cand as f64 - target).abs() < (b as f64 - target).abs(),
                        };
                        if better {
                            best = Some(cand);
                        }
                    }
                }
                if best.is_some() {
                    break;
                }
            }
            whole * nn + best.ok_or_else(|| Error::Degenerate("no coprime lattice slope".into()))?
        }
        Slope::Rational(p, q) => {
            if q <= 0 || nn % q != 0 {
                return domain(format!("rational slope {p}/{q} needs q dividing N = {nn}"));
            }
            nn / q * p
        }
    };
    let n = n_side * n_side;
    let idx = |i: i64, j: i64| (j.rem_euclid(nn) * nn + i.rem_euclid(nn)) as usize;
    let slope_eff = p_total as f64 / nn as f64;
    let ell = (1.0 + slope_eff * slope_eff).sqrt() / nn as f64;
    let mut edges = Vec::with_capacity(n);
    for j in 0..nn {
        for i in 0..nn {
            let jump = ((i + 1) * p_total).div_euclid(nn) - (i * p_total).div_euclid(nn);
            let (x, y) = (idx(i, j), idx(i + 1, j + jump));
            edges.push((x.min(y), x.max(y), 1.0 / ell));
        }
    }
    let (leaf, n_leaves) = connected_leaves(n, &edges);
    Ok(DiscreteLamination {
        n,
        edges,
        leaf,
        n_leaves,
        h: vec![1.0; n],
        mu: vec![ell; n],
        m: vec![1.0 / n as f64; n],
        boundary: vec![false; n],
        lattice_slope: Some((p_total, nn)),
    })
}

/// Path `0, …, L` with unit conductances and affine `h` from `h0` to `h1`.
pub fn build_weighted_segment(len: usize, h0: f64, h1: f64) -> Result<DiscreteLamination> {
    if len < 4 {
        return domain(format!("segment needs L ≥ 4, got {len}"));
    }
    if !(h0 > 0.0 && h1 > 0.0 && h0.is_finite() && h1.is_finite()) {
        return domain("boundary weights must be positive");
    }
    let n = len + 1;
    let h: Vec<f64> = (0..n).map(|k| h0 + (h1 - h0) * k as f64 / len as f64).collect();
    let edges = (0..len).map(|k| (k, k + 1, 1.0)).collect();
    let mut boundary = vec![false; n];
    boundary[0] = true;
    boundary[len] = true;
    Ok(DiscreteLamination {
        n,
        edges,
        leaf: vec![0; n],
        n_leaves: 1,
        m: normalized(h.clone()),
        h,
        mu: vec![1.0; n],
        boundary,
        lattice_slope: None,
    })
}

impl DiscreteLamination {
    /// `⟨u, v⟩_{L²(m)}`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        dot(u, v, Some(&self.m), Exec::Sequential)
    }

    pub fn mean(&self, u: &[f64]) -> f64 {
        self.m.iter().zip(u).map(|(m, x)| m * x).collect::<KahanSum>().value()
    }

    pub fn norm_l1(&self, u: &[f64]) -> f64 {
        self.m.iter().zip(u).map(|(m, x)| m * x.abs()).collect::<KahanSum>().value()
    }

    pub fn norm_l2(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }

    /// m-weighted mean of `u` on each leaf.
    pub fn leaf_means(&self, u: &[f64]) -> Vec<f64> {
        let mut num = vec![KahanSum::new(); self.n_leaves];
        let mut den = vec![KahanSum::new(); self.n_leaves];
        for x in 0..self.n {
            num[self.leaf[x]].add(self.m[x] * u[x]);
            den[self.leaf[x]].add(self.m[x]);
        }
        num.iter().zip(&den).map(|(a, b)| a.value() / b.value()).collect()
    }

    /// Leaf sizes, for connectivity reports.
    pub fn leaf_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_leaves];
        for &l in &self.leaf {
            s[l] += 1;
        }
        s
    }

    /// Checks positivity, normalization of `m`, and leafwise harmonicity of `h`.
    pub fn validate(&self) -> Result<()> {
        if self.edges.iter().any(|e| !(e.2 > 0.0)) {
            return Err(Error::Invariant("conductances must be positive".into()));
        }
        if self.h.iter().chain(&self.mu).chain(&self.m).any(|v| !(*v > 0.0)) {
            return Err(Error::Invariant("h, μ and m must be positive".into()));
        }
        let total = self.m.iter().copied().collect::<KahanSum>().value();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Invariant(format!("m sums to {total}")));
        }
        let lap = self.laplacian_of(&self.h);
        let worst = (0..self.n)
            .filter(|&x| !self.boundary[x])
            .map(|x| lap[x].abs())
            .fold(0.0, f64::max);
        let scale = self.h.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if worst > 1e-12 * scale * self.max_rate() {
            return Err(Error::Invariant(format!("h is not leafwise harmonic (|Δh| = {worst:e})")));
        }
        Ok(())
    }

    fn max_rate(&self) -> f64 {
        let mut r = vec![0.0; self.n];
        for &(x, y, c) in &self.edges {
            r[x] += c / self.mu[x];
            r[y] += c / self.mu[y];
        }
        r.into_iter().fold(1.0, f64::max)
    }

    /// `Δu` from the edge list (independent of the assembled generator).
    pub fn laplacian_of(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for &(x, y, c) in &self.edges {
            out[x] += c * (u[y] - u[x]) / self.mu[x];
            out[y] += c * (u[x] - u[y]) / self.mu[y];
        }
        out
    }

    /// Plain-text instance dump: `node` and `edge` records.
    pub fn write_text<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# nodes {} leaves {}", self.n, self.n_leaves)?;
        for x in 0..self.n {
            writeln!(out, "node {x} {} {:e} {:e} {:e}", self.leaf[x], self.h[x], self.mu[x], self.m[x])?;
        }
        for &(x, y, c) in &self.edges {
            writeln!(out, "edge {x} {y} {c:e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// `Δ`
    Plain,
    /// `Δ̃`
    Drifted,
}

/// `A = -Δ` or `A = -Δ̃` in compressed rows (off-diagonal part) plus diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub variant: Variant,
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    pub diag: Vec<f64>,
    pub m: Vec<f64>,
}

pub fn assemble_generator(lam: &DiscreteLamination, variant: Variant) -> Result<Generator> {
    lam.validate()?;
    let n = lam.n;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(x, y, c) in &lam.edges {
        if x == y {
            continue;
        }
        let w = match variant {
            Variant::Plain => c,
            Variant::Drifted => c * (0.5 * (lam.h[x] + lam.h[y])),
        };
        rows[x].push((y, w));
        rows[y].push((x, w));
    }
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut diag = vec![0.0; n];
    for (x, row) in rows.iter_mut().enumerate() {
        row.sort_by_key(|e| e.0);
        let scale = match variant {
            Variant::Plain => lam.mu[x],
            Variant::Drifted => lam.h[x] * lam.mu[x],
        };
        // merge parallel edges so every row has distinct columns
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
        for &(y, w) in row.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == y => last.1 += w,
                _ => merged.push((y, w)),
            }
        }
        let mut d = KahanSum::new();
        for (y, w) in merged {
            cols.push(y);
            vals.push(-w / scale);
            d.add(w / scale);
        }
        diag[x] = d.value();
        row_ptr.push(cols.len());
    }
    Ok(Generator {
        variant,
        n,
        row_ptr,
        cols,
        vals,
        diag,
        m: lam.m.clone(),
    })
}

impl Generator {
    /// `y ← A x`.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64], exec: Exec) {
        exec.for_each_mut(y, |i, yi| {
            let mut v = self.diag[i] * x[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                v += self.vals[k] * x[self.cols[k]];
            }
            *yi = v;
        });
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.apply_into(x, &mut y, Exec::Sequential);
        y
    }

    /// `max_x |(A 1)(x)|`.
    pub fn row_sum_defect(&self) -> f64 {
        self.apply(&vec![1.0; self.n]).iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `⟨A u, u⟩_m`, the discrete Dirichlet energy.
    pub fn energy(&self, u: &[f64]) -> f64 {
        dot(&self.apply(u), u, Some(&self.m), Exec::Sequential)
    }

    /// `⟨A u, v⟩_m`.
    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        dot(&self.apply(u), v, Some(&self.m), Exec::Sequential)
    }
}

struct Resolvent<'a> {
    gen: &'a Generator,
    tau: f64,
}

impl LinearOperator for Resolvent<'_> {
    fn dim(&self) -> usize {
        self.gen.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64], exec: Exec) {
        self.gen.apply_into(x, y, exec);
        let tau = self.tau;
        exec.for_each_mut(y, |i, yi| *yi = x[i] + tau * *yi);
    }
}

/// One implicit-Euler step: solve `(I + τA) u⁺ = u`, starting from `u`.
pub fn step_implicit(gen: &Generator, u: &[f64], tau: f64, tol: &Tolerances, exec: Exec) -> Result<Vec<f64>> {
    Ok(step_with_stats(gen, u, tau, tol, exec)?.0)
}

fn step_with_stats(gen: &Generator, u: &[f64], tau: f64, tol: &Tolerances, exec: Exec) -> Result<(Vec<f64>, usize)> {
    if !(tau > 0.0 && tau.is_finite()) {
        return domain(format!("time step must be positive, got {tau}"));
    }
    if u.len() != gen.n {
        return domain(format!("vector has {} entries, generator has {}", u.len(), gen.n));
    }
    let op = Resolvent { gen, tau };
    let inv: Vec<f64> = gen.diag.iter().map(|d| 1.0 / (1.0 + tau * d)).collect();
    let opts = SolveOptions {
        rel_tol: tol.semigroup_rel,
        max_iterations: tol.max_solver_iterations,
        exec,
    };
    let mut x = u.to_vec();
    let stats = match gen.variant {
        Variant::Drifted => pcg(&op, u, &mut x, Some(&gen.m), Some(&inv), opts)?,
        Variant::Plain => bicgstab(&op, u, &mut x, Some(&inv), opts)?,
    };
    Ok((x, stats.iterations))
}

/// Per-step diagnostics in `L^p(m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub t: f64,
    pub mass: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub min: f64,
    pub max: f64,
    pub energy: f64,
    /// `‖(u(t) - u(t - τ))/τ‖_{L²(m)}`; zero at `t = 0`
    pub increment: f64,
}

fn diagnostics(lam_m: &[f64], gen: &Generator, t: f64, u: &[f64], increment: f64) -> Diagnostics {
    let mass = lam_m.iter().zip(u).map(|(m, x)| m * x).collect::<KahanSum>().value();
    let l1 = lam_m.iter().zip(u).map(|(m, x)| m * x.abs()).collect::<KahanSum>().value();
    let l2 = dot(u, u, Some(lam_m), Exec::Sequential).sqrt();
    let (min, max) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    Diagnostics {
        t,
        mass,
        l1,
        l2,
        linf: min.abs().max(max.abs()),
        min,
        max,
        energy: gen.energy(u),
        increment,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    /// keep a snapshot every this many steps (and at the end)
    pub snapshot_every: Option<usize>,
    pub exec: Exec,
}


/// An implicit-Euler trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupRun {
    pub tau: f64,
    pub steps: usize,
    pub diagnostics: Vec<Diagnostics>,
    /// `(step, state)` pairs; each step index also indexes `diagnostics`
    pub snapshots: Vec<(usize, Vec<f64>)>,
    pub initial: Vec<f64>,
    pub final_state: Vec<f64>,
    /// trapezoidal `∫_0^{steps·τ} u(t) dt`
    pub time_integral: Vec<f64>,
    pub max_solver_iterations: usize,
}

pub fn run_semigroup(gen: &Generator, u0: &[f64], tau: f64, steps: usize, tol: &Tolerances, opts: RunOptions) -> Result<SemigroupRun> {
    if u0.len() != gen.n {
        return domain("initial vector has the wrong length");
    }
    let mut u = u0.to_vec();
    let mut diags = vec![diagnostics(&gen.m, gen, 0.0, &u, 0.0)];
    let mut snaps = Vec::new();
    if opts.snapshot_every.is_some() {
        snaps.push((0, u.clone()));
    }
    let mut integral = vec![0.0; gen.n];
    let mut max_it = 0;
    for k in 1..=steps {
        let (next, it) = step_with_stats(gen, &u, tau, tol, opts.exec)?;
        max_it = max_it.max(it);
        for i in 0..gen.n {
            integral[i] += 0.5 * tau * (u[i] + next[i]);
        }
        let inc: Vec<f64> = next.iter().zip(&u).map(|(a, b)| (a - b) / tau).collect();
        let inc = dot(&inc, &inc, Some(&gen.m), Exec::Sequential).sqrt();
        u = next;
        diags.push(diagnostics(&gen.m, gen, k as f64 * tau, &u, inc));
        if let Some(e) = opts.snapshot_every {
            if k % e.max(1) == 0 || k == steps {
                snaps.push((k, u.clone()));
            }
        }
    }
    Ok(SemigroupRun {
        tau,
        steps,
        diagnostics: diags,
        snapshots: snaps,
        initial: u0.to_vec(),
        final_state: u,
        time_integral: integral,
        max_solver_iterations: max_it,
    })
}

/// Step-by-step exact-identity checks of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunChecks {
    /// `max_k |mass_k - mass_{k-1}|`
    pub mass_drift: f64,
    /// largest relative growth of L¹, L², L^∞ over one step (≤ 0 means contraction)
    pub l1_growth: f64,
    pub l2_growth: f64,
    pub linf_growth: f64,
    /// `max(0, -min u)` over the run, meaningful for nonnegative data
    pub positivity_breach: f64,
    /// largest one-step rise of the Dirichlet energy
    pub energy_rise: f64,
}

impl SemigroupRun {
    pub fn checks(&self) -> RunChecks {
        let d = &self.diagnostics;
        let growth = |f: fn(&Diagnostics) -> f64| {
            d.windows(2)
                .map(|w| {
                    let (a, b) = (f(&w[0]), f(&w[1]));
                    if a == 0.0 {
                        b
                    } else {
                        (b - a) / a
                    }
                })
                .fold(f64::NEG_INFINITY, f64::max)
        };
        RunChecks {
            mass_drift: d.windows(2).map(|w| (w[1].mass - w[0].mass).abs()).fold(0.0, f64::max),
            l1_growth: growth(|x| x.l1),
            l2_growth: growth(|x| x.l2),
            linf_growth: growth(|x| x.linf),
            positivity_breach: d.iter().map(|x| (-x.min).max(0.0)).fold(0.0, f64::max),
            energy_rise: d.windows(2).map(|w| w[1].energy - w[0].energy).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// CSV with columns `t, mass, L1, L2, Linf, min, max, energy`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "mass", "L1", "L2", "Linf", "min", "max", "energy"])?;
        for d in &self.diagnostics {
            w.write_record([d.t, d.mass, d.l1, d.l2, d.linf, d.min, d.max, d.energy].map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Time average of a run and its distances to the constant limits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicAverage {
    pub horizon: f64,
    pub average: Vec<f64>,
    /// `‖avg - ⟨m, u₀⟩‖_{L²(m)}`
    pub dist_global: f64,
    /// `‖avg - leafwise m-means of u₀‖_{L²(m)}`
    pub dist_leafwise: f64,
}

pub fn ergodic_average(run: &SemigroupRun, lam: &DiscreteLamination) -> ErgodicAverage {
    let horizon = run.steps as f64 * run.tau;
    let average: Vec<f64> = if horizon > 0.0 {
        run.time_integral.iter().map(|v| v / horizon).collect()
    } else {
        run.initial.clone()
    };
    let g = lam.mean(&run.initial);
    let leaf = lam.leaf_means(&run.initial);
    let dg: Vec<f64> = average.iter().map(|a| a - g).collect();
    let dl: Vec<f64> = average.iter().enumerate().map(|(x, a)| a - leaf[lam.leaf[x]]).collect();
    ErgodicAverage {
        horizon,
        dist_global: lam.norm_l2(&dg),
        dist_leafwise: lam.norm_l2(&dl),
        average,
    }
}

/// Default correlation grid, in units of time.
pub const DEFAULT_MIXING_GRID: [f64; 6] = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0];

/// `⟨S(t)u, v⟩_m - ⟨m, u⟩⟨m, v⟩` on a grid of times that are multiples of `τ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingSeries {
    pub t: Vec<f64>,
    pub correlation: Vec<f64>,
}

pub fn mixing_diagnostic(gen: &Generator, u: &[f64], v: &[f64], tau: f64, t_grid: &[f64], tol: &Tolerances, exec: Exec) -> Result<MixingSeries> {
    if gen.variant != Variant::Drifted {
        return domain("mixing diagnostic needs the self-adjoint generator");
    }
    let steps: Vec<usize> = t_grid.iter().map(|t| (t / tau).round() as usize).collect();
    if steps.windows(2).any(|w| w[1] < w[0]) {
        return domain("time grid must be nondecreasing");
    }
    let mean = |x: &[f64]| gen.m.iter().zip(x).map(|(m, y)| m * y).collect::<KahanSum>().value();
    let (mu, mv) = (mean(u), mean(v));
    let mut cur = u.to_vec();
    let mut at = 0;
    let mut corr = Vec::with_capacity(steps.len());
    for &s in &steps {
        while at < s {
            cur = step_implicit(gen, &cur, tau, tol, exec)?;
            at += 1;
        }
        corr.push(dot(&cur, v, Some(&gen.m), Exec::Sequential) - mu * mv);
    }
    Ok(MixingSeries {
        t: steps.iter().map(|&s| s as f64 * tau).collect(),
        correlation: corr,
    })
}

/// Slowest decay rate present in `u`: power iteration of `(I + τA)^{-1}` on
/// the m-mean-zero part of `u`, returned as `λ` with `(1 + τλ)^{-1}` the ratio.
pub fn effective_gap(gen: &Generator, u: &[f64], tau: f64, iterations: usize, tol: &Tolerances, exec: Exec) -> Result<f64> {
    let mean = |x: &[f64]| gen.m.iter().zip(x).map(|(m, y)| m * y).collect::<KahanSum>().value();
    let nrm = |x: &[f64]| dot(x, x, Some(&gen.m), Exec::Sequential).sqrt();
    let c = mean(u);
    let mut x: Vec<f64> = u.iter().map(|v| v - c).collect();
    let n0 = nrm(&x);
    if n0 == 0.0 {
        return Err(Error::Degenerate("vector is constant".into()));
    }
    x.iter_mut().for_each(|v| *v /= n0);
    let mut ratio = 0.0;
    for _ in 0..iterations {
        let mut y = step_implicit(gen, &x, tau, tol, exec)?;
        let c = mean(&y);
        y.iter_mut().for_each(|v| *v -= c);
        ratio = nrm(&y);
        y.iter_mut().for_each(|v| *v /= ratio);
        x = y;
    }
    Ok((1.0 / ratio - 1.0) / tau)
}

/// Smooth test datum `cos 2πx + cos 2π(2y - x)` on the Kronecker torus nodes.
pub fn kronecker_initial(lam: &DiscreteLamination) -> Result<Vec<f64>> {
    let nn = lam
        .lattice_slope
        .ok_or_else(|| Error::Invariant("not a Kronecker instance".into()))?
        .1 as usize;
    let tau = std::f64::consts::TAU;
    Ok((0..lam.n)
        .map(|k| {
            let (x, y) = ((k % nn) as f64 / nn as f64, (k / nn) as f64 / nn as f64);
            (tau * x).cos() + (tau * (2.0 * y - x)).cos()
        })
        .collect())
}

/// Random vector supported on the interior nodes of a lamination.
pub fn random_compact(lam: &DiscreteLamination, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..lam.n)
        .map(|x| if lam.boundary[x] { 0.0 } else { rng.random_range(-1.0..1.0) })
        .collect()
}

/// Deterministic stream for the energy-identity checks.
pub fn identity_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Distinct leaf sizes, sorted.
pub fn leaf_size_profile(lam: &DiscreteLamination) -> BTreeSet<usize> {
    lam.leaf_sizes().into_iter().collect()
}
