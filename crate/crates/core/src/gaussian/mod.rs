//! Number-conserving fermionic Gaussian states.
//!
//! [`GaussianState`] stores the correlation matrix `C_jk = ⟨c†_j c_k⟩` and
//! works for any (mixed or pure) Gaussian state. [`SlaterState`] stores the
//! occupied orbitals of a pure state and is what the trajectory driver uses:
//! its measurement updates cost O(L·N) instead of O(L²).

mod fcs;
mod slater;

pub use fcs::{counting_angles, number_distribution, CountingFunction, NumberDistribution};
pub use slater::SlaterState;
pub(crate) use slater::{append_orbital, orbital_characteristic, project_orbitals};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::freeprop::Propagator;
use crate::lattice::ImpurityRegion;
use crate::linalg::{hermitize, zgemm, Op};

/// Slack allowed on probabilities and correlation eigenvalues.
pub const PROBABILITY_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementOutcome {
    pub site: usize,
    pub occupied: bool,
    /// Probability of the realised outcome before the update.
    pub probability: f64,
}

/// Checks an occupation probability and clips it into `[0, 1]`.
pub(crate) fn checked_probability(p: f64, site: usize) -> Result<f64> {
    if !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&p) {
        return Err(Error::CorruptedState(format!("occupation {p} at site {site} outside [0, 1]")));
    }
    Ok(p.clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    corr: DMatrix<C64>,
}

impl GaussianState {
    pub fn vacuum(len: usize) -> Self {
        Self { corr: DMatrix::zeros(len, len) }
    }

    /// One particle on `site` (1-based): `C = e_i e_i†`.
    pub fn single_particle(len: usize, site: usize) -> Result<Self> {
        if site == 0 || site > len {
            return Err(Error::InvalidSpec(format!("site {site} outside chain 1..={len}")));
        }
        let mut s = Self::vacuum(len);
        s.corr[(site - 1, site - 1)] = C64::new(1.0, 0.0);
        Ok(s)
    }

    /// Validates Hermiticity and the spectrum of `corr`.
    pub fn from_correlation(corr: DMatrix<C64>) -> Result<Self> {
        let s = Self { corr };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.corr.nrows();
        if self.corr.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.corr.ncols() });
        }
        let asym = crate::linalg::max_abs_diff(&self.corr, &self.corr.adjoint());
        if asym > 1e-10 {
            return Err(Error::CorruptedState(format!("correlation matrix not Hermitian (defect {asym:e})")));
        }
        let ev = SymmetricEigen::new(self.corr.clone()).eigenvalues;
        if ev.iter().any(|&e| !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&e)) {
            return Err(Error::CorruptedState("correlation eigenvalues outside [0, 1]".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.corr.nrows()
    }

    pub fn corr(&self) -> &DMatrix<C64> {
        &self.corr
    }

    /// `⟨N_j⟩` for a 1-based site.
    pub fn occupation(&self, site: usize) -> f64 {
        self.corr[(site - 1, site - 1)].re
    }

    /// Total particle number `tr C`.
    pub fn total(&self) -> f64 {
        self.corr.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn region_occupation(&self, region: &ImpurityRegion) -> f64 {
        region.sites().map(|j| self.occupation(j)).sum()
    }

    /// Schrödinger-picture evolution by a single-particle propagator:
    /// `C ← U* C Uᵀ`, so a particle on site `i` ends up with `C_jj = |U_ji|²`.
    pub fn evolve(&mut self, u: &Propagator) -> Result<()> {
        if u.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: u.len() });
        }
        let left = zgemm(u.matrix(), Op::Conj, &self.corr, Op::Plain);
        self.corr = zgemm(&left, Op::Plain, u.matrix(), Op::Transpose);
        Ok(())
    }

    /// Applies the projector onto a definite occupation of `site` and
    /// renormalises. Returns the probability of that outcome.
    pub fn project(&mut self, site: usize, occupied: bool) -> Result<f64> {
        let n = self.len();
        if site == 0 || site > n {
            return Err(Error::InvalidSpec(format!("site {site} outside chain 1..={n}")));
        }
        let j = site - 1;
        let p = checked_probability(self.corr[(j, j)].re, site)?;
        let prob = if occupied { p } else { 1.0 - p };
        if prob <= 0.0 {
            return Err(Error::CorruptedState(format!("projected site {site} onto an outcome of probability zero")));
        }
        // Wick: C'_ab = C_ab ∓ C_aj C_jb / prob for a, b ≠ j.
        let sign = if occupied { -1.0 } else { 1.0 };
        let col: Vec<C64> = (0..n).map(|a| self.corr[(a, j)]).collect();
        let row: Vec<C64> = (0..n).map(|b| self.corr[(j, b)]).collect();
        for b in 0..n {
            if b == j {
                continue;
            }
            for a in 0..n {
                if a == j {
                    continue;
                }
                self.corr[(a, b)] += col[a] * row[b] * (sign / prob);
            }
        }
        for a in 0..n {
            self.corr[(a, j)] = C64::new(0.0, 0.0);
            self.corr[(j, a)] = C64::new(0.0, 0.0);
        }
        if occupied {
            self.corr[(j, j)] = C64::new(1.0, 0.0);
        }
        hermitize(&mut self.corr);
        Ok(prob)
    }

    /// Born-rule measurement of `N_site`.
    pub fn measure<R: Rng + ?Sized>(&mut self, site: usize, rng: &mut R) -> Result<MeasurementOutcome> {
        if site == 0 || site > self.len() {
            return Err(Error::InvalidSpec(format!("site {site} outside chain 1..={}", self.len())));
        }
        let p = checked_probability(self.occupation(site), site)?;
        let occupied = rng.random::<f64>() < p;
        let probability = self.project(site, occupied)?;
        Ok(MeasurementOutcome { site, occupied, probability })
    }

    /// Fills every site of `region` and removes its correlations with the
    /// rest of the chain. Only meaningful right after the region has been
    /// measured, when the state factorises across the region boundary.
    pub fn reset_cluster(&mut self, region: &ImpurityRegion) {
        let n = self.len();
        for j in region.sites().map(|s| s - 1) {
            for a in 0..n {
                self.corr[(a, j)] = C64::new(0.0, 0.0);
                self.corr[(j, a)] = C64::new(0.0, 0.0);
            }
            self.corr[(j, j)] = C64::new(1.0, 0.0);
        }
    }

    /// `χ(θ) = ⟨e^{iθN}⟩ = det(1 + (e^{iθ} - 1) C)`, via pivoted LU.
    pub fn counting_characteristic(&self, theta: f64) -> C64 {
        let z = C64::from_polar(1.0, theta) - 1.0;
        let n = self.len();
        let m = DMatrix::from_fn(n, n, |a, b| {
            let delta = if a == b { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            delta + z * self.corr[(a, b)]
        });
        m.lu().determinant()
    }

    /// `χ` on the `M = L + 1` angles `2πk / M`.
    pub fn counting_function(&self) -> CountingFunction {
        let thetas = counting_angles(self.len());
        let values = thetas.iter().map(|&t| self.counting_characteristic(t)).collect();
        CountingFunction { thetas, values }
    }

    /// Mixed state `V diag(n) V†` with random orbitals `V` and occupations
    /// `n` uniform in `[0, 1)`, for exercising the counting statistics.
    pub fn random_mixed<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<Self> {
        let a = DMatrix::from_fn(len, len, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let v = crate::linalg::HermitianEigen::new(&((&a + a.adjoint()) * C64::new(0.5, 0.0))).vectors;
        let occ = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(len, |_, _| C64::new(rng.random::<f64>(), 0.0)));
        let mut corr = &v * occ * v.adjoint();
        hermitize(&mut corr);
        Self::from_correlation(corr)
    }
}

/// Functional form of [`GaussianState::single_particle`].
pub fn init_single_particle(len: usize, site: usize) -> Result<GaussianState> {
    GaussianState::single_particle(len, site)
}
