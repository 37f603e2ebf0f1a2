//! Green functions of bounded simply connected planar domains by a
//! cut-cell finite-difference solve, and the conformal invariants read off them.
//!
//! Writing `g(ξ, ξ0) = -log|ξ - ξ0| + u(ξ)`, the corrector `u` is harmonic
//! with boundary values `log|ξ_B - ξ0|`. The conformal radius of the domain at
//! `ξ0` is `e^{u(ξ0)}`, the Riemann map `ψ` with `ψ(ξ0) = 0` has `|ψ| = e^{-g}`,
//! and the Poincaré density (curvature −1) at `ξ0` is `2 / e^{u(ξ0)}`.
//!
//! The discrete operator is the 5-point Laplacian in which an arm crossing the
//! boundary at fraction `θ` of a cell contributes `1/θ` to the diagonal and
//! `u_B / θ` to the right-hand side. It stays symmetric positive definite and
//! is second-order accurate in the maximum norm.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::config::Tolerances;
use crate::error::{domain, Error, Result};
use crate::exec::Exec;
use crate::linalg::{dot, pcg, LinearOperator, SolveOptions, SolveStats};

/// Slack applied to membership tests; points on the boundary count as inside.
pub const BOUNDARY_TOL: f64 = 1e-12;
const MIN_FRACTION: f64 = 1e-6;
const OUTSIDE: u32 = u32::MAX;

/// A bounded planar region described by a membership oracle.
pub trait Domain: Send + Sync + fmt::Debug {
    fn contains(&self, p: [f64; 2]) -> bool;

    /// `[x_min, x_max, y_min, y_max]`.
    fn bbox(&self) -> [f64; 4];

    /// Fraction `θ ∈ (0, 1]` of the segment from `inside` to `outside` at
    /// which the boundary is crossed. Bisection unless overridden.
    fn boundary_fraction(&self, inside: [f64; 2], outside: [f64; 2]) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let p = [
                inside[0] + mid * (outside[0] - inside[0]),
                inside[1] + mid * (outside[1] - inside[1]),
            ];
            if self.contains(p) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// The open disc `|ξ - center| < radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Domain for Disc {
    fn contains(&self, p: [f64; 2]) -> bool {
        let (dx, dy) = (p[0] - self.center[0], p[1] - self.center[1]);
        (dx * dx + dy * dy).sqrt() <= self.radius * (1.0 + BOUNDARY_TOL)
    }

    fn bbox(&self) -> [f64; 4] {
        let [cx, cy] = self.center;
        [cx - self.radius, cx + self.radius, cy - self.radius, cy + self.radius]
    }

    fn boundary_fraction(&self, inside: [f64; 2], outside: [f64; 2]) -> f64 {
        let d = [outside[0] - inside[0], outside[1] - inside[1]];
        let f = [inside[0] - self.center[0], inside[1] - self.center[1]];
        let a = d[0] * d[0] + d[1] * d[1];
        let b = 2.0 * (f[0] * d[0] + f[1] * d[1]);
        let c = f[0] * f[0] + f[1] * f[1] - self.radius * self.radius;
        let disc = (b * b - 4.0 * a * c).max(0.0);
        // larger root; written to avoid cancellation when c ≈ 0
        let theta = if b >= 0.0 {
            (2.0 * -c) / (b + disc.sqrt())
        } else {
            (-b + disc.sqrt()) / (2.0 * a)
        };
        // a tangent arm from a node on the circle gives 0/0
        if theta.is_finite() {
            theta.clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// Bounded intersection of half-planes `n_x x + n_y y ≤ c`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfPlanes {
    rows: Vec<[f64; 3]>,
    bbox: [f64; 4],
}

impl HalfPlanes {
    /// Fails with [`Error::Degenerate`] if the intersection is empty or unbounded.
    pub fn new(rows: Vec<[f64; 3]>) -> Result<Self> {
        if rows.iter().any(|r| r[0] == 0.0 && r[1] == 0.0) {
            return Err(Error::Degenerate("half-plane with zero normal".into()));
        }
        let mut angles: Vec<f64> = rows.iter().map(|r| r[1].atan2(r[0])).collect();
        angles.sort_by(f64::total_cmp);
        let mut max_gap = angles[0] + 2.0 * std::f64::consts::PI - angles[angles.len() - 1];
        for w in angles.windows(2) {
            max_gap = max_gap.max(w[1] - w[0]);
        }
        if max_gap >= std::f64::consts::PI - 1e-12 {
            return Err(Error::Degenerate("half-plane intersection is unbounded".into()));
        }
        let mut bbox = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for (i, a) in rows.iter().enumerate() {
            for b in &rows[i + 1..] {
                let det = a[0] * b[1] - a[1] * b[0];
                if det.abs() < 1e-300 {
                    continue;
                }
                let x = (a[2] * b[1] - a[1] * b[2]) / det;
                let y = (a[0] * b[2] - a[2] * b[0]) / det;
                let feasible = rows.iter().all(|r| r[0] * x + r[1] * y <= r[2] + 1e-9 * (1.0 + r[2].abs()));
                if feasible {
                    bbox = [bbox[0].min(x), bbox[1].max(x), bbox[2].min(y), bbox[3].max(y)];
                }
            }
        }
        if !(bbox[0] < bbox[1] && bbox[2] < bbox[3]) {
            return Err(Error::Degenerate("half-plane intersection is empty".into()));
        }
        Ok(Self { rows, bbox })
    }

    /// The closed rectangle `[x0, x1] × [y0, y1]`.
    pub fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        Self::new(vec![[1.0, 0.0, x1], [-1.0, 0.0, -x0], [0.0, 1.0, y1], [0.0, -1.0, -y0]])
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.rows
    }

    fn slack(r: &[f64; 3]) -> f64 {
        BOUNDARY_TOL * (r[2].abs() + 1.0)
    }
}

impl Domain for HalfPlanes {
    fn contains(&self, p: [f64; 2]) -> bool {
        self.rows.iter().all(|r| r[0] * p[0] + r[1] * p[1] <= r[2] + Self::slack(r))
    }

    fn bbox(&self) -> [f64; 4] {
        self.bbox
    }

    fn boundary_fraction(&self, inside: [f64; 2], outside: [f64; 2]) -> f64 {
        let mut theta: f64 = 1.0;
        for r in &self.rows {
            let a = r[0] * inside[0] + r[1] * inside[1];
            let b = r[0] * outside[0] + r[1] * outside[1];
            if b > r[2] + Self::slack(r) && b > a {
                theta = theta.min(((r[2] - a) / (b - a)).max(0.0));
            }
        }
        theta
    }
}

/// A domain discretized on a square lattice aligned with the base point.
#[derive(Debug, Clone)]
pub struct DomainGrid {
    pub h: f64,
    pub base: [f64; 2],
    /// lattice index of the first node in each direction, relative to the base point
    pub offset: [i64; 2],
    pub nx: usize,
    pub ny: usize,
    /// unknown index of each lattice node, row-major, `u32::MAX` outside
    index: Vec<u32>,
    /// lattice coordinates `(i, j)` of each unknown
    pub nodes: Vec<[u32; 2]>,
    neighbors: Vec<[u32; 4]>,
    diag: Vec<f64>,
    /// arms crossing the boundary: `(unknown, fraction, crossing point)`
    pub boundary: Vec<(u32, f64, [f64; 2])>,
    pub base_unknown: usize,
}

const DIRS: [[i64; 2]; 4] = [[1, 0], [-1, 0], [0, 1], [0, -1]];

impl DomainGrid {
    pub fn build(dom: &dyn Domain, h: f64, base: [f64; 2], exec: Exec) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return domain(format!("grid spacing must be positive, got {h}"));
        }
        let [x0, x1, y0, y1] = dom.bbox();
        let imin = ((x0 - base[0]) / h).floor() as i64 - 1;
        let imax = ((x1 - base[0]) / h).ceil() as i64 + 1;
        let jmin = ((y0 - base[1]) / h).floor() as i64 - 1;
        let jmax = ((y1 - base[1]) / h).ceil() as i64 + 1;
        let nx = (imax - imin + 1) as usize;
        let ny = (jmax - jmin + 1) as usize;
        if nx.saturating_mul(ny) > 50_000_000 {
            return domain(format!("grid of {nx}×{ny} nodes is too large"));
        }
        let offset = [imin, jmin];
        let point = |i: usize, j: usize| {
            [
                base[0] + (imin + i as i64) as f64 * h,
                base[1] + (jmin + j as i64) as f64 * h,
            ]
        };
        let rows: Vec<Vec<bool>> = exec.map_range(ny, |j| (0..nx).map(|i| dom.contains(point(i, j))).collect());
        let mut index = vec![OUTSIDE; nx * ny];
        let mut nodes = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if rows[j][i] {
                    index[j * nx + i] = nodes.len() as u32;
                    nodes.push([i as u32, j as u32]);
                }
            }
        }
        if nodes.len() >= OUTSIDE as usize {
            return domain("too many unknowns");
        }
        let bi = (-imin) as usize;
        let bj = (-jmin) as usize;
        let base_unknown = index[bj * nx + bi];
        if base_unknown == OUTSIDE {
            return domain(format!("base point {base:?} is not inside the domain"));
        }
        let inside = |i: i64, j: i64| {
            i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny && index[j as usize * nx + i as usize] != OUTSIDE
        };
        for (di, dj) in [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (2, 0), (-2, 0), (0, 2), (0, -2), (1, 1), (1, -1), (-1, 1), (-1, -1)] {
            if !inside(bi as i64 + di, bj as i64 + dj) {
                return domain("base point must be at graph distance ≥ 2 from the boundary");
            }
        }
        check_topology(&index, nx, ny, base_unknown, nodes.len())?;

        let per_node: Vec<([u32; 4], f64, Vec<(f64, [f64; 2])>)> = exec.map(&nodes, |&[i, j]| {
            let mut nb = [OUTSIDE; 4];
            let mut diag = 0.0;
            let mut cuts = Vec::new();
            let p = point(i as usize, j as usize);
            for (k, d) in DIRS.iter().enumerate() {
                let (ii, jj) = (i as i64 + d[0], j as i64 + d[1]);
                if inside(ii, jj) {
                    nb[k] = index[jj as usize * nx + ii as usize];
                    diag += 1.0;
                } else {
                    let q = [p[0] + d[0] as f64 * h, p[1] + d[1] as f64 * h];
                    let theta = dom.boundary_fraction(p, q).clamp(MIN_FRACTION, 1.0);
                    diag += 1.0 / theta;
                    cuts.push((theta, [p[0] + theta * (q[0] - p[0]), p[1] + theta * (q[1] - p[1])]));
                }
            }
            (nb, diag, cuts)
        });
        let mut neighbors = Vec::with_capacity(nodes.len());
        let mut diag = Vec::with_capacity(nodes.len());
        let mut boundary = Vec::new();
        for (k, (nb, d, cuts)) in per_node.into_iter().enumerate() {
            neighbors.push(nb);
            diag.push(d);
            boundary.extend(cuts.into_iter().map(|(t, b)| (k as u32, t, b)));
        }
        Ok(Self {
            h,
            base,
            offset,
            nx,
            ny,
            index,
            nodes,
            neighbors,
            diag,
            boundary,
            base_unknown: base_unknown as usize,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.nodes.len()
    }

    /// Position of lattice node `(i, j)`.
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.base[0] + (self.offset[0] + i as i64) as f64 * self.h,
            self.base[1] + (self.offset[1] + j as i64) as f64 * self.h,
        ]
    }

    pub fn unknown_point(&self, k: usize) -> [f64; 2] {
        let [i, j] = self.nodes[k];
        self.point(i as usize, j as usize)
    }

    /// Unknown index of lattice node `(i, j)`, if inside.
    pub fn unknown_at(&self, i: i64, j: i64) -> Option<usize> {
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            return None;
        }
        let k = self.index[j as usize * self.nx + i as usize];
        (k != OUTSIDE).then_some(k as usize)
    }

    pub fn is_inside(&self, i: i64, j: i64) -> bool {
        self.unknown_at(i, j).is_some()
    }

    /// Write the mask as a plain PGM (`P2`) image; the top row is the largest `y`.
    pub fn write_pgm<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "P2\n{} {}\n1", self.nx, self.ny)?;
        for j in (0..self.ny).rev() {
            let row: Vec<&str> = (0..self.nx)
                .map(|i| if self.is_inside(i as i64, j as i64) { "1" } else { "0" })
                .collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Inside must be one 4-connected component and the padded complement one
/// 8-connected component (so the region has no holes).
fn check_topology(index: &[u32], nx: usize, ny: usize, start: u32, count: usize) -> Result<()> {
    let inside = |i: usize, j: usize| index[j * nx + i] != OUTSIDE;
    let mut seen = vec![false; nx * ny];
    let start_pos = index.iter().position(|&k| k == start).unwrap();
    let mut queue = VecDeque::from([start_pos]);
    seen[start_pos] = true;
    let mut reached = 0;
    while let Some(p) = queue.pop_front() {
        reached += 1;
        let (i, j) = (p % nx, p / nx);
        for d in DIRS {
            let (ii, jj) = (i as i64 + d[0], j as i64 + d[1]);
            if ii < 0 || jj < 0 || ii as usize >= nx || jj as usize >= ny {
                continue;
            }
            let q = jj as usize * nx + ii as usize;
            if !seen[q] && inside(ii as usize, jj as usize) {
                seen[q] = true;
                queue.push_back(q);
            }
        }
    }
    if reached != count {
        return Err(Error::Topology(format!("inside region has {} of {count} nodes in the base component", reached)));
    }
    let (px, py) = (nx + 2, ny + 2);
    let outside = |i: usize, j: usize| i == 0 || j == 0 || i == px - 1 || j == py - 1 || !inside(i - 1, j - 1);
    let total_out = px * py - count;
    let mut seen = vec![false; px * py];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut reached = 0;
    while let Some(p) = queue.pop_front() {
        reached += 1;
        let (i, j) = (p % px, p / px);
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                let (ii, jj) = (i as i64 + di, j as i64 + dj);
                if ii < 0 || jj < 0 || ii as usize >= px || jj as usize >= py {
                    continue;
                }
                let q = jj as usize * px + ii as usize;
                if !seen[q] && outside(ii as usize, jj as usize) {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
    }
    if reached != total_out {
        return Err(Error::Topology("domain is not simply connected".into()));
    }
    Ok(())
}

struct GridLaplacian<'a> {
    neighbors: &'a [[u32; 4]],
    diag: &'a [f64],
}

impl LinearOperator for GridLaplacian<'_> {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64], exec: Exec) {
        exec.for_each_mut(y, |k, yk| {
            let mut v = self.diag[k] * x[k];
            for &n in &self.neighbors[k] {
                if n != OUTSIDE {
                    v -= x[n as usize];
                }
            }
            *yk = v;
        });
    }
}

/// Green function of a discretized domain with pole at the grid's base point.
#[derive(Debug, Clone)]
pub struct GreenField {
    pub grid: DomainGrid,
    /// harmonic corrector `u` at each unknown
    pub corrector: Vec<f64>,
    pub stats: SolveStats,
    rhs: Vec<f64>,
}

fn log_dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1]).ln()
}

/// Solve for the Green function of `dom` with pole at `base`, on spacing `h`.
pub fn solve_green(dom: &dyn Domain, h: f64, base: [f64; 2], tol: &Tolerances, exec: Exec) -> Result<GreenField> {
    let grid = DomainGrid::build(dom, h, base, exec)?;
    solve_on_grid(grid, tol, exec)
}

/// Solve on an already built grid.
pub fn solve_on_grid(grid: DomainGrid, tol: &Tolerances, exec: Exec) -> Result<GreenField> {
    let n = grid.unknowns();
    let mut rhs = vec![0.0; n];
    let mut mean = 0.0;
    for &(k, theta, b) in &grid.boundary {
        let gb = log_dist(b, grid.base);
        rhs[k as usize] += gb / theta;
        mean += gb;
    }
    mean /= grid.boundary.len().max(1) as f64;
    let op = GridLaplacian {
        neighbors: &grid.neighbors,
        diag: &grid.diag,
    };
    let inv: Vec<f64> = grid.diag.iter().map(|d| 1.0 / d).collect();
    let mut u = vec![mean; n];
    let stats = pcg(
        &op,
        &rhs,
        &mut u,
        None,
        Some(&inv),
        SolveOptions {
            rel_tol: tol.green_cg_rel,
            max_iterations: tol.max_solver_iterations,
            exec,
        },
    )?;
    Ok(GreenField {
        grid,
        corrector: u,
        stats,
        rhs,
    })
}

impl GreenField {
    pub fn base(&self) -> [f64; 2] {
        self.grid.base
    }

    /// `g` at unknown `k`; infinite at the pole.
    pub fn g_node(&self, k: usize) -> f64 {
        if k == self.grid.base_unknown {
            return f64::INFINITY;
        }
        -log_dist(self.grid.unknown_point(k), self.grid.base) + self.corrector[k]
    }

    /// Corrector at the pole, i.e. the log of the conformal radius.
    pub fn corrector_at_base(&self) -> f64 {
        self.corrector[self.grid.base_unknown]
    }

    pub fn conformal_radius(&self) -> f64 {
        self.corrector_at_base().exp()
    }

    /// Poincaré density at the pole.
    pub fn density_at_base(&self) -> f64 {
        2.0 / self.conformal_radius()
    }

    /// Bilinear interpolation of the corrector; the enclosing cell must be inside.
    pub fn corrector_at(&self, xi: [f64; 2]) -> Result<f64> {
        let g = &self.grid;
        let fx = (xi[0] - g.base[0]) / g.h - g.offset[0] as f64;
        let fy = (xi[1] - g.base[1]) / g.h - g.offset[1] as f64;
        let (i, j) = (fx.floor() as i64, fy.floor() as i64);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let mut acc = 0.0;
        for (di, dj, w) in [(0, 0, (1.0 - tx) * (1.0 - ty)), (1, 0, tx * (1.0 - ty)), (0, 1, (1.0 - tx) * ty), (1, 1, tx * ty)] {
            if w == 0.0 {
                continue;
            }
            match g.unknown_at(i + di, j + dj) {
                Some(k) => acc += w * self.corrector[k],
                None => return domain(format!("point {xi:?} is not in an interior grid cell")),
            }
        }
        Ok(acc)
    }

    /// `g(ξ, ξ0)`.
    pub fn green_at(&self, xi: [f64; 2]) -> Result<f64> {
        if xi == self.grid.base {
            return Ok(f64::INFINITY);
        }
        Ok(-log_dist(xi, self.grid.base) + self.corrector_at(xi)?)
    }

    /// `|ψ(ξ)| = e^{-g(ξ, ξ0)}`, zero at the pole.
    pub fn riemann_modulus(&self, xi: [f64; 2]) -> Result<f64> {
        let g = self.green_at(xi)?;
        Ok((-g).exp().min(1.0 - f64::EPSILON))
    }

    /// Hyperbolic distance from the pole, `log((1 + |ψ|) / (1 - |ψ|))`.
    pub fn hyp_distance(&self, xi: [f64; 2]) -> Result<f64> {
        Ok(2.0 * self.riemann_modulus(xi)?.atanh())
    }

    /// `max_k |(b - A u)_k|` and the same normalized by `‖b‖₂`.
    pub fn corrector_residual(&self) -> (f64, f64) {
        let op = GridLaplacian {
            neighbors: &self.grid.neighbors,
            diag: &self.grid.diag,
        };
        let mut au = vec![0.0; self.corrector.len()];
        op.apply(&self.corrector, &mut au, Exec::Sequential);
        let r: Vec<f64> = self.rhs.iter().zip(&au).map(|(b, a)| b - a).collect();
        let max = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bn = dot(&self.rhs, &self.rhs, None, Exec::Sequential).sqrt();
        (max, dot(&r, &r, None, Exec::Sequential).sqrt() / bn)
    }

    /// Number of non-pole nodes without a strictly lower neighbor (boundary
    /// neighbors carry `g = 0`). The discrete maximum principle makes this zero.
    pub fn local_minima(&self) -> usize {
        let g = &self.grid;
        (0..g.unknowns())
            .filter(|&k| k != g.base_unknown)
            .filter(|&k| {
                let gk = self.g_node(k);
                let nb = &g.neighbors[k];
                !nb.iter().any(|&n| if n == OUTSIDE { gk > 0.0 } else { self.g_node(n as usize) < gk })
            })
            .count()
    }

    /// Minimum of `g` over the non-pole unknowns.
    pub fn min_g(&self) -> f64 {
        (0..self.grid.unknowns())
            .filter(|&k| k != self.grid.base_unknown)
            .map(|k| self.g_node(k))
            .fold(f64::INFINITY, f64::min)
    }

    /// Dense CSV of `g`: a header row of `x` values, then one row per `y` (descending)
    /// starting with the `y` value. Outside nodes are empty; the pole is `inf`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let g = &self.grid;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["y\\x".to_string()];
        header.extend((0..g.nx).map(|i| format!("{:e}", g.point(i, 0)[0])));
        w.write_record(&header)?;
        for j in (0..g.ny).rev() {
            let mut row = vec![format!("{:e}", g.point(0, j)[1])];
            row.extend((0..g.nx).map(|i| match g.unknown_at(i as i64, j as i64) {
                Some(k) => format!("{:e}", self.g_node(k)),
                None => String::new(),
            }));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Poincaré densities of one domain at many base points, one solve per point,
/// memoized by the exact base coordinates.
#[derive(Debug, Clone)]
pub struct DensityMap {
    domain: Arc<dyn Domain>,
    pub h: f64,
    tol: Tolerances,
    exec: Exec,
    cache: Arc<Mutex<BTreeMap<(u64, u64), f64>>>,
}

impl DensityMap {
    pub fn new(domain: Arc<dyn Domain>, h: f64, tol: Tolerances, exec: Exec) -> Self {
        Self {
            domain,
            h,
            tol,
            exec,
            cache: Arc::default(),
        }
    }

    /// `λ_Ω(ξ) = 2 / (conformal radius of Ω at ξ)`.
    pub fn hyperbolic_density(&self, xi: [f64; 2]) -> Result<f64> {
        let key = (xi[0].to_bits(), xi[1].to_bits());
        if let Some(&v) = self.cache.lock().unwrap().get(&key) {
            return Ok(v);
        }
        let field = solve_green(self.domain.as_ref(), self.h, xi, &self.tol, self.exec)?;
        let v = field.density_at_base();
        self.cache.lock().unwrap().insert(key, v);
        Ok(v)
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    const UNIT: Disc = Disc {
        center: [0.0, 0.0],
        radius: 1.0,
    };

    #[test]
    fn disc_green_function_matches_log() {
        let f = solve_green(&UNIT, 1.0 / 128.0, [0.0, 0.0], &tol(), Exec::default()).unwrap();
        for r in [0.3, 0.6] {
            for a in [0.0, 1.0, 2.5] {
                let xi = [r * f64::cos(a), r * f64::sin(a)];
                let g = f.green_at(xi).unwrap();
                let exact = -f64::ln(r);
                assert!(((g - exact) / exact).abs() < 0.02, "{g} vs {exact}");
                assert!((f.riemann_modulus(xi).unwrap() - r).abs() < 0.02 * r);
            }
        }
        assert!(f.min_g() >= 0.0);
        assert_eq!(f.riemann_modulus([0.0, 0.0]).unwrap(), 0.0);
        assert!((f.density_at_base() - 2.0).abs() < 0.04);
    }

    #[test]
    fn disc_density_off_center_and_refinement() {
        let xi = [0.42, -0.3];
        let exact = 2.0 / (1.0 - (0.42f64 * 0.42 + 0.09));
        let err = |h: f64| {
            let f = solve_green(&UNIT, h, xi, &tol(), Exec::default()).unwrap();
            ((f.density_at_base() - exact) / exact).abs()
        };
        let (e64, e128) = (err(1.0 / 64.0), err(1.0 / 128.0));
        assert!(e128 < 0.02, "{e128}");
        assert!(e128 <= 0.5 * e64, "{e64} {e128}");
    }

    #[test]
    fn modulus_increases_along_ray_and_distance_matches() {
        let f = solve_green(&UNIT, 1.0 / 64.0, [0.0, 0.0], &tol(), Exec::default()).unwrap();
        let mut prev = 0.0;
        for i in 1..15 {
            let m = f.riemann_modulus([0.06 * i as f64, 0.013 * i as f64]).unwrap();
            assert!(m > prev);
            prev = m;
        }
        let d = f.hyp_distance([0.5, 0.0]).unwrap();
        let exact = 2.0 * 0.5f64.atanh();
        assert!(((d - exact) / exact).abs() < 0.03);
        assert_eq!(f.hyp_distance([0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn corrector_is_discretely_harmonic_and_no_interior_minima() {
        let t = tol();
        let f = solve_green(&UNIT, 1.0 / 48.0, [0.2, 0.1], &t, Exec::default()).unwrap();
        let (_, rel) = f.corrector_residual();
        assert!(rel <= 10.0 * t.green_cg_rel, "{rel}");
        assert_eq!(f.local_minima(), 0);
    }

    #[test]
    fn density_is_monotone_under_inclusion() {
        let square = Arc::new(HalfPlanes::rect(-1.0, 1.0, -1.0, 1.0).unwrap());
        let rect = Arc::new(HalfPlanes::rect(-1.0, 2.0, -1.5, 1.0).unwrap());
        let ds = DensityMap::new(square, 1.0 / 32.0, tol(), Exec::default());
        let dr = DensityMap::new(rect, 1.0 / 32.0, tol(), Exec::default());
        for i in -1..=1 {
            for j in -1..=1 {
                let xi = [0.5 * i as f64, 0.5 * j as f64];
                assert!(ds.hyperbolic_density(xi).unwrap() >= dr.hyperbolic_density(xi).unwrap());
            }
        }
        assert_eq!(ds.cached(), 9);
    }

    #[test]
    fn truncated_wedge_approaches_quadrant_density() {
        // quadrant {x < 1, y < 1}; z ↦ (1 - z)² maps it onto a half-plane, density |Z|/(XY) = √2 at 0
        let exact = 2f64.sqrt();
        let mut prev = f64::INFINITY;
        for l in [2.0, 4.0, 8.0] {
            let d = HalfPlanes::rect(-l, 1.0, -l, 1.0).unwrap();
            let v = solve_green(&d, 1.0 / 24.0, [0.0, 0.0], &tol(), Exec::default()).unwrap().density_at_base();
            assert!(v < prev && v > exact * 0.999, "{v}");
            prev = v;
        }
        assert!((prev - exact) / exact < 0.01, "{prev}");
    }

    #[derive(Debug)]
    struct Annulus;
    impl Domain for Annulus {
        fn contains(&self, p: [f64; 2]) -> bool {
            let r = p[0].hypot(p[1]);
            (0.3..=1.0).contains(&r)
        }
        fn bbox(&self) -> [f64; 4] {
            [-1.0, 1.0, -1.0, 1.0]
        }
    }

    #[test]
    fn rejects_non_simply_connected_and_bad_base() {
        let r = solve_green(&Annulus, 1.0 / 32.0, [0.6, 0.0], &tol(), Exec::Sequential);
        assert!(matches!(r, Err(Error::Topology(_))), "{r:?}");
        let r = solve_green(&UNIT, 1.0 / 32.0, [0.99, 0.0], &tol(), Exec::Sequential);
        assert!(matches!(r, Err(Error::Domain(_))));
        assert!(matches!(HalfPlanes::new(vec![[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn halfplane_fraction_is_exact() {
        let d = HalfPlanes::rect(-1.0, 1.0, -1.0, 1.0).unwrap();
        let t = d.boundary_fraction([0.9, 0.0], [1.3, 0.0]);
        assert!((t - 0.25).abs() < 1e-15);
        let t = UNIT.boundary_fraction([0.5, 0.0], [1.5, 0.0]);
        assert!((t - 0.5).abs() < 1e-15);
        let b = Disc { center: [0.0, 0.0], radius: 1.0 }.boundary_fraction([0.0, 0.9], [0.0, 1.1]);
        let gen = Annulus.boundary_fraction([0.0, 0.9], [0.0, 1.1]);
        assert!((b - gen).abs() < 1e-12);
    }

    #[test]
    fn parallel_and_sequential_solves_agree_bitwise() {
        let a = solve_green(&UNIT, 1.0 / 40.0, [0.1, 0.0], &tol(), Exec::Sequential).unwrap();
        let b = solve_green(&UNIT, 1.0 / 40.0, [0.1, 0.0], &tol(), Exec::Parallel).unwrap();
        assert!(a.corrector.iter().zip(&b.corrector).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn exports_have_expected_shape() {
        let f = solve_green(&UNIT, 0.25, [0.0, 0.0], &tol(), Exec::Sequential).unwrap();
        let mut pgm = Vec::new();
        f.grid.write_pgm(&mut pgm).unwrap();
        let text = String::from_utf8(pgm).unwrap();
        assert!(text.starts_with(&format!("P2\n{} {}\n1\n", f.grid.nx, f.grid.ny)));
        assert_eq!(text.lines().count(), 3 + f.grid.ny);
        let mut csv = Vec::new();
        f.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 1 + f.grid.ny);
        assert!(text.contains("inf"));
    }
}
