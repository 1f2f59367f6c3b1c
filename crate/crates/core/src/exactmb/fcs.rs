//! Dense full-Hilbert-space operators, used as an independent check of the
//! determinant formula for the counting statistics.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::basis::{apply_ladders, Ladder};
use crate::error::{Error, Result};
use crate::gaussian::{number_distribution, GaussianState, NumberDistribution};
use crate::linalg::{zgemm, HermitianEigen, Op};

/// Largest chain for which dense `2^L × 2^L` states are built here.
pub const DENSE_MAX_SITES: usize = 10;

fn check_dense(len: usize) -> Result<()> {
    if len > DENSE_MAX_SITES {
        let dim = 1u128 << len;
        return Err(Error::Resource {
            what: format!("dense Fock operator on {len} sites"),
            required_bytes: dim * dim * 16,
        });
    }
    Ok(())
}

/// Matrix of an operator string in the full basis, word `w` at index `w`.
pub fn fock_operator(len: usize, ops: &[Ladder]) -> Result<DMatrix<C64>> {
    check_dense(len)?;
    let dim = 1usize << len;
    let mut m = DMatrix::zeros(dim, dim);
    for w in 0..dim as u64 {
        if let Some((s, out)) = apply_ladders(w, ops) {
            m[(out as usize, w as usize)] = C64::new(s, 0.0);
        }
    }
    Ok(m)
}

/// Density matrix of the Gaussian state with `⟨c†_j c_k⟩ = corr[(j, k)]`,
/// built as a product of natural-orbital occupations.
pub fn gaussian_density_matrix(corr: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let len = corr.nrows();
    check_dense(len)?;
    let dim = 1usize << len;
    let eig = HermitianEigen::new(corr);
    let c: Vec<DMatrix<C64>> =
        (1..=len).map(|j| fock_operator(len, &[Ladder::annihilate(j)])).collect::<Result<_>>()?;
    let id = DMatrix::<C64>::identity(dim, dim);
    let mut rho = id.clone();
    for a in 0..len {
        // d_a = Σ_k V_ka c_k gives ⟨d†_a d_b⟩ = n_a δ_ab
        let mut d = DMatrix::<C64>::zeros(dim, dim);
        for (k, ck) in c.iter().enumerate() {
            d += ck * eig.vectors[(k, a)];
        }
        let n = eig.values[a].clamp(0.0, 1.0);
        let number = zgemm(&d, Op::Adjoint, &d, Op::Plain);
        let factor = &number * C64::new(n, 0.0) + (&id - &number) * C64::new(1.0 - n, 0.0);
        rho = zgemm(&rho, Op::Plain, &factor, Op::Plain);
    }
    Ok(rho)
}

/// `P(n) = Σ_{popcount(w) = n} ρ_ww`.
pub fn brute_force_distribution(rho: &DMatrix<C64>) -> Vec<f64> {
    let dim = rho.nrows();
    let len = dim.trailing_zeros() as usize;
    let mut p = vec![0.0; len + 1];
    for w in 0..dim {
        p[w.count_ones() as usize] += rho[(w, w)].re;
    }
    p
}

/// Determinant-formula distribution compared against the dense oracle.
#[derive(Clone, Debug)]
pub struct FcsCheck {
    pub brute_force: Vec<f64>,
    pub determinant: NumberDistribution,
    pub max_deviation: f64,
    pub total: f64,
}

pub fn fcs_check(state: &GaussianState) -> Result<FcsCheck> {
    let rho = gaussian_density_matrix(state.corr())?;
    let brute_force = brute_force_distribution(&rho);
    let determinant = number_distribution(&state.counting_function());
    let max_deviation = brute_force.iter().zip(&determinant.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let total = determinant.probs.iter().sum();
    Ok(FcsCheck { brute_force, determinant, max_deviation, total })
}
