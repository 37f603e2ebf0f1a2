//! Matrix-free Krylov solvers shared by the Green and diffusion solvers.
//!
//! Reductions are split into fixed-size chunks, each summed with compensation,
//! and the chunk sums are combined in order; results are therefore identical
//! under sequential and parallel execution.

use crate::error::{Error, Result};
use crate::exec::{Exec, KahanSum};

const CHUNK: usize = 8192;

/// A square linear operator applied to dense vectors.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// `y ← A x`.
    fn apply(&self, x: &[f64], y: &mut [f64], exec: Exec);
}

/// Iteration count and final relative residual of a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Options common to the Krylov solvers.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub rel_tol: f64,
    pub max_iterations: usize,
    pub exec: Exec,
}

/// `Σ w_i x_i y_i` (or `Σ x_i y_i` without weights), chunked and compensated.
pub fn dot(x: &[f64], y: &[f64], w: Option<&[f64]>, exec: Exec) -> f64 {
    let n = x.len();
    let chunks = n.div_ceil(CHUNK);
    let partial = exec.map_range(chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        let mut s = KahanSum::new();
        match w {
            Some(w) => (lo..hi).for_each(|i| s.add(w[i] * x[i] * y[i])),
            None => (lo..hi).for_each(|i| s.add(x[i] * y[i])),
        }
        s.value()
    });
    partial.into_iter().collect::<KahanSum>().value()
}

fn axpy_into(out: &mut [f64], a: f64, x: &[f64], exec: Exec) {
    exec.for_each_mut(out, |i, o| *o += a * x[i]);
}

/// Preconditioned conjugate gradients for an operator that is self-adjoint
/// and positive definite in the (optionally weighted) inner product.
///
/// `inv_diag` is a Jacobi preconditioner. The initial guess is taken from `x`.
pub fn pcg<A: LinearOperator>(
    op: &A,
    b: &[f64],
    x: &mut [f64],
    weights: Option<&[f64]>,
    inv_diag: Option<&[f64]>,
    opts: SolveOptions,
) -> Result<SolveStats> {
    let n = op.dim();
    let exec = opts.exec;
    let b_norm = dot(b, b, weights, exec).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut ax = vec![0.0; n];
    op.apply(x, &mut ax, exec);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let precond = |r: &[f64], z: &mut [f64]| match inv_diag {
        Some(d) => exec.for_each_mut(z, |i, zi| *zi = d[i] * r[i]),
        None => z.copy_from_slice(r),
    };
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z, weights, exec);
    let mut ap = vec![0.0; n];
    for it in 0..opts.max_iterations {
        let res = dot(&r, &r, weights, exec).sqrt() / b_norm;
        if res <= opts.rel_tol {
            return Ok(SolveStats {
                iterations: it,
                residual: res,
            });
        }
        if !res.is_finite() {
            return Err(Error::SolverDivergence {
                what: "conjugate gradients".into(),
                iterations: it,
                residual: res,
            });
        }
        op.apply(&p, &mut ap, exec);
        let pap = dot(&p, &ap, weights, exec);
        if !(pap > 0.0) {
            return Err(Error::SolverDivergence {
                what: "conjugate gradients (operator not positive definite)".into(),
                iterations: it,
                residual: res,
            });
        }
        let alpha = rz / pap;
        axpy_into(x, alpha, &p, exec);
        axpy_into(&mut r, -alpha, &ap, exec);
        precond(&r, &mut z);
        let rz_new = dot(&r, &z, weights, exec);
        let beta = rz_new / rz;
        rz = rz_new;
        exec.for_each_mut(&mut p, |i, pi| *pi = z[i] + beta * *pi);
    }
    Err(Error::IterationCap {
        what: "conjugate gradients".into(),
        cap: opts.max_iterations,
    })
}

/// Jacobi-preconditioned BiCGSTAB for general nonsingular operators.
pub fn bicgstab<A: LinearOperator>(op: &A, b: &[f64], x: &mut [f64], inv_diag: Option<&[f64]>, opts: SolveOptions) -> Result<SolveStats> {
    let n = op.dim();
    let exec = opts.exec;
    let b_norm = dot(b, b, None, exec).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    let apply_m = |v: &[f64], out: &mut [f64]| match inv_diag {
        Some(d) => exec.for_each_mut(out, |i, o| *o = d[i] * v[i]),
        None => out.copy_from_slice(v),
    };
    let mut tmp = vec![0.0; n];
    op.apply(x, &mut tmp, exec);
    let mut r: Vec<f64> = b.iter().zip(&tmp).map(|(bi, ai)| bi - ai).collect();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut zz = vec![0.0; n];
    let mut t = vec![0.0; n];
    let diverged = |it, res| Error::SolverDivergence {
        what: "BiCGSTAB".into(),
        iterations: it,
        residual: res,
    };
    for it in 0..opts.max_iterations {
        let res = dot(&r, &r, None, exec).sqrt() / b_norm;
        if res <= opts.rel_tol {
            return Ok(SolveStats {
                iterations: it,
                residual: res,
            });
        }
        let rho_new = dot(&r_hat, &r, None, exec);
        if rho_new == 0.0 || !res.is_finite() {
            return Err(diverged(it, res));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        exec.for_each_mut(&mut p, |i, pi| *pi = r[i] + beta * (*pi - omega * v[i]));
        apply_m(&p, &mut y);
        op.apply(&y, &mut v, exec);
        let rv = dot(&r_hat, &v, None, exec);
        if rv == 0.0 {
            return Err(diverged(it, res));
        }
        alpha = rho / rv;
        exec.for_each_mut(&mut s, |i, si| *si = r[i] - alpha * v[i]);
        if dot(&s, &s, None, exec).sqrt() / b_norm <= opts.rel_tol {
            axpy_into(x, alpha, &y, exec);
            op.apply(x, &mut tmp, exec);
            let fin: Vec<f64> = b.iter().zip(&tmp).map(|(bi, ai)| bi - ai).collect();
            return Ok(SolveStats {
                iterations: it + 1,
                residual: dot(&fin, &fin, None, exec).sqrt() / b_norm,
            });
        }
        apply_m(&s, &mut zz);
        op.apply(&zz, &mut t, exec);
        let tt = dot(&t, &t, None, exec);
        if tt == 0.0 {
            return Err(diverged(it, res));
        }
        omega = dot(&t, &s, None, exec) / tt;
        exec.for_each_mut(x, |i, xi| *xi += alpha * y[i] + omega * zz[i]);
        exec.for_each_mut(&mut r, |i, ri| *ri = s[i] - omega * t[i]);
        if omega == 0.0 {
            return Err(diverged(it, res));
        }
    }
    Err(Error::IterationCap {
        what: "BiCGSTAB".into(),
        cap: opts.max_iterations,
    })
}
