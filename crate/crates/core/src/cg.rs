//! Matrix-free conjugate gradients for symmetric positive definite stencils.

use crate::error::{Error, Result};

pub struct CgOutcome {
    pub iterations: usize,
    pub residual: f64,
}

/// Dot product with eight fixed accumulator lanes, so the summation order
/// is independent of threading.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Reusable iteration vectors.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
}

/// Solves `A x = b` starting from the contents of `x`. `apply(v, out)` must
/// write `A v` into `out`. `diag`, when given, is used as a Jacobi
/// preconditioner. Stops once `|r| <= tol * |b|`.
pub fn solve(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    diag: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    solve_with(&mut Workspace::default(), apply, b, x, diag, tol, max_iter)
}

pub fn solve_with(
    ws: &mut Workspace,
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    diag: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = b.len();
    for v in [&mut ws.r, &mut ws.z, &mut ws.p, &mut ws.ap] {
        v.resize(n, 0.0);
    }
    let Workspace { r, z, p, ap } = ws;
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome {
            iterations: 0,
            residual: 0.0,
        });
    }
    apply(x, r);
    for k in 0..n {
        r[k] = b[k] - r[k];
    }
    let precond = |r: &[f64], z: &mut [f64]| match diag {
        Some(d) => z.iter_mut().zip(r.iter().zip(d)).for_each(|(z, (r, d))| *z = r / d),
        None => z.copy_from_slice(r),
    };
    precond(r, z);
    p.copy_from_slice(z);
    let mut rz = dot(r, z);
    let mut res = dot(r, r).sqrt();
    let mut it = 0;
    while res > tol * bnorm {
        if it >= max_iter {
            return Err(Error::SolverDivergence {
                iterations: it,
                residual: res / bnorm,
            });
        }
        apply(p, ap);
        let pap = dot(p, ap);
        if !(pap > 0.0) {
            return Err(Error::SolverDivergence {
                iterations: it,
                residual: res / bnorm,
            });
        }
        let alpha = rz / pap;
        for (xk, pk) in x.iter_mut().zip(p.iter()) {
            *xk += alpha * pk;
        }
        for (rk, apk) in r.iter_mut().zip(ap.iter()) {
            *rk -= alpha * apk;
        }
        precond(r, z);
        let rz_new = dot(r, z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pk, zk) in p.iter_mut().zip(z.iter()) {
            *pk = zk + beta * *pk;
        }
        res = dot(r, r).sqrt();
        it += 1;
    }
    Ok(CgOutcome {
        iterations: it,
        residual: res / bnorm,
    })
}
