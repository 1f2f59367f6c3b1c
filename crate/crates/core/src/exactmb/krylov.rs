//! Lanczos propagation of `exp(-iH dt)|psi⟩`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use super::action::SparseAction;
use crate::error::{Error, Result};

/// Largest Krylov dimension; the memory estimate of the basis assumes this many vectors.
pub const MAX_KRYLOV_DIM: usize = 24;
/// Subspace size tried before the first error check.
const MIN_KRYLOV_DIM: usize = 4;
/// Number of times a step may be halved before giving up.
const MAX_HALVINGS: usize = 12;
/// Relative size of `β` that counts as an invariant subspace.
const BREAKDOWN: f64 = 1e-13;

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `exp(-i T τ) e_1` for the real tridiagonal `T`.
fn tridiagonal_exp(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<C64> {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    (0..m)
        .map(|i| {
            (0..m)
                .map(|k| {
                    let v = eig.eigenvectors[(i, k)] * eig.eigenvectors[(0, k)];
                    C64::from_polar(v, -eig.eigenvalues[k] * tau)
                })
                .sum()
        })
        .collect()
}

/// Attempts `exp(-iH τ)psi` with at most [`MAX_KRYLOV_DIM`] vectors.
/// Returns `None` if the error estimate never drops below `tol`.
fn lanczos_step(h: &SparseAction, psi: &[C64], tau: f64, tol: f64) -> Option<Vec<C64>> {
    let n0 = norm(psi);
    if n0 == 0.0 {
        return Some(psi.to_vec());
    }
    let dim = psi.len();
    let mut basis: Vec<Vec<C64>> = vec![psi.iter().map(|z| z / n0).collect()];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); dim];
    let max_m = MAX_KRYLOV_DIM.min(dim);
    loop {
        let m = basis.len();
        h.apply_into(&basis[m - 1], &mut w);
        let a = dot(&basis[m - 1], &w).re;
        alpha.push(a);
        // full reorthogonalisation, twice for stability
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                for (x, y) in w.iter_mut().zip(v) {
                    *x -= c * y;
                }
            }
        }
        let b = norm(&w);
        let invariant = b <= BREAKDOWN * (a.abs() + beta.last().copied().unwrap_or(0.0)).max(1.0);
        if invariant || m == max_m || m >= MIN_KRYLOV_DIM {
            let c = tridiagonal_exp(&alpha, &beta, tau);
            let err = if invariant { 0.0 } else { b * c[m - 1].norm() * n0 };
            if err < tol {
                let mut next = vec![C64::new(0.0, 0.0); dim];
                for (ck, v) in c.iter().zip(&basis) {
                    let s = ck * n0;
                    for (x, y) in next.iter_mut().zip(v) {
                        *x += s * y;
                    }
                }
                return Some(next);
            }
            if m == max_m {
                return None;
            }
        }
        beta.push(b);
        basis.push(w.iter().map(|z| z / b).collect());
    }
}

/// `exp(-iH dt)psi` with a local error estimate below `tol`. Steps that do not
/// converge at the largest subspace are split in halves.
pub fn evolve_krylov(h: &SparseAction, psi: &[C64], dt: f64, tol: f64) -> Result<Vec<C64>> {
    if !(dt > 0.0 && dt.is_finite()) || !(tol > 0.0) {
        return Err(Error::Domain(format!("Krylov step needs dt > 0 and tol > 0, got dt={dt}, tol={tol}")));
    }
    if psi.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: psi.len() });
    }
    let mut pieces = 1usize;
    let mut halvings = 0;
    let mut state = psi.to_vec();
    let mut done = 0usize;
    while done < pieces {
        let tau = dt / pieces as f64;
        match lanczos_step(h, &state, tau, tol / pieces as f64) {
            Some(next) => {
                state = next;
                done += 1;
            }
            None => {
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    return Err(Error::Krylov(format!(
                        "no convergence to {tol:e} within {MAX_KRYLOV_DIM} vectors after {MAX_HALVINGS} step halvings"
                    )));
                }
                pieces *= 2;
                done *= 2;
            }
        }
    }
    Ok(state)
}
