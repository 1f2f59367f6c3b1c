//! Weight-one operators `Σ_a o_a γ_a` under quadratic Hamiltonians.
//!
//! Majoranas are ordered `x_1, y_1, x_2, y_2, ...` with `x_j = c_j + c†_j`
//! and `y_j = i(c†_j − c_j)`, so `{γ_a, γ_b} = 2δ_ab` and each has unit
//! Hilbert–Schmidt norm.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::QuadraticHamiltonian;
use crate::linalg::HermitianEigen;

const REAL_TOL: f64 = 1e-12;

/// Coefficients of a weight-one operator in the Majorana basis.
#[derive(Clone, Debug, PartialEq)]
pub struct MajoranaVector {
    pub coeffs: DVector<C64>,
}

fn c_vec(len: usize, site: usize, dagger: bool) -> DVector<C64> {
    let mut v = DVector::zeros(2 * len);
    v[2 * (site - 1)] = C64::new(0.5, 0.0);
    v[2 * (site - 1) + 1] = C64::new(0.0, if dagger { -0.5 } else { 0.5 });
    v
}

impl MajoranaVector {
    /// `c†_site = (x − i y)/2`.
    pub fn creation(len: usize, site: usize) -> Result<Self> {
        if site == 0 || site > len {
            return Err(Error::InvalidSpec(format!("site {site} outside chain of {len}")));
        }
        Ok(Self { coeffs: c_vec(len, site, true) })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len() / 2
    }

    /// `Σ |o_a|²`, the Hilbert–Schmidt norm squared.
    pub fn weight(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Site-`site` reduction: strings from sites to the left act as identity
    /// there, those from the right as `η`.
    pub fn weights(&self, site: usize, cut: Option<usize>) -> MajoranaWeights {
        let total = self.weight();
        let on = |j: usize| self.coeffs[2 * (j - 1)].norm_sqr() + self.coeffs[2 * (j - 1) + 1].norm_sqr();
        let x = self.coeffs[2 * (site - 1)];
        let y = self.coeffs[2 * (site - 1) + 1];
        // o_x x + o_y y = (o_x − i o_y) c + (o_x + i o_y) c†, with ‖c‖² = ½
        let i = C64::new(0.0, 1.0);
        let w_plus = (x + i * y).norm_sqr() / 2.0 / total;
        let w_minus = (x - i * y).norm_sqr() / 2.0 / total;
        let w_i = (1..site).map(on).sum::<f64>() / total;
        let w_eta = (site + 1..=self.len()).map(on).sum::<f64>() / total;
        let entropy = cut.map(|m| {
            let p = (1..=m).map(on).sum::<f64>() / total;
            [p, 1.0 - p].iter().filter(|&&q| q > 0.0).map(|q| -q * q.ln()).sum()
        });
        MajoranaWeights { w_i, w_eta, w_plus, w_minus, entropy }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MajoranaWeights {
    pub w_i: f64,
    pub w_eta: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub entropy: Option<f64>,
}

impl MajoranaWeights {
    pub fn w(&self) -> f64 {
        self.w_plus + self.w_minus
    }
}

/// Real antisymmetric `A` with `dγ/dt = i[H, γ] = A γ`.
pub fn majorana_generator(h: &QuadraticHamiltonian) -> Result<DMatrix<f64>> {
    let len = h.len();
    let n = 2 * len;
    // H = Σ M_ab γ_a γ_b + const
    let mut m = DMatrix::<C64>::zeros(n, n);
    let mut add = |coeff: C64, u: &DVector<C64>, v: &DVector<C64>| m += u * v.transpose() * coeff;
    for j in 1..=len {
        for k in 1..=len {
            let t = h.hopping()[(j - 1, k - 1)];
            if t != C64::new(0.0, 0.0) {
                add(t, &c_vec(len, j, true), &c_vec(len, k, false));
            }
            if let Some(p) = h.pairing() {
                let d = p[(j - 1, k - 1)] * 0.5;
                if d != C64::new(0.0, 0.0) {
                    add(d, &c_vec(len, j, true), &c_vec(len, k, true));
                    add(d.conj(), &c_vec(len, k, false), &c_vec(len, j, false));
                }
            }
        }
    }
    let a = (&m - m.transpose()) * C64::new(0.0, -2.0);
    if a.iter().any(|z| z.im.abs() > REAL_TOL) {
        return Err(Error::UnsupportedHamiltonian("Majorana generator is not real".into()));
    }
    Ok(a.map(|z| z.re))
}

/// Evolves `initial` under `h` and reports the site-`site` weights at each time.
pub fn majorana_free_evolve(
    h: &QuadraticHamiltonian,
    initial: &MajoranaVector,
    site: usize,
    times: &[f64],
    cut: Option<usize>,
) -> Result<Vec<MajoranaWeights>> {
    let len = h.len();
    if initial.len() != len {
        return Err(Error::DimensionMismatch { expected: len, got: initial.len() });
    }
    if site == 0 || site > len || cut.is_some_and(|c| c == 0 || c >= len) {
        return Err(Error::InvalidSpec(format!("site {site} or cut {cut:?} outside chain of {len}")));
    }
    let a = majorana_generator(h)?;
    // o(t) = exp(Aᵀ t) o = exp(i (iA) t) o, with iA Hermitian
    let eig = HermitianEigen::new(&a.map(|x| C64::new(0.0, x)));
    let proj = eig.vectors.adjoint() * &initial.coeffs;
    Ok(times
        .iter()
        .map(|&t| {
            let phased = DVector::from_fn(proj.len(), |k, _| proj[k] * C64::from_polar(1.0, eig.values[k] * t));
            MajoranaVector { coeffs: &eig.vectors * phased }.weights(site, cut)
        })
        .collect())
}
