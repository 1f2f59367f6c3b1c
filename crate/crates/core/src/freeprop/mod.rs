//! Single-particle propagators, return probabilities and their asymptotics.

mod bessel;
mod fit;
pub mod quadrature;

pub use bessel::{bessel_amplitude, bessel_j};
pub use fit::{fit_power_law, linear_regression, local_maxima, PowerLawFit, ReturnSeries, MIN_FIT_POINTS};

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::{ImpurityRegion, QuadraticHamiltonian};
use crate::linalg::{zgemm, HermitianEigen, Op};

/// Maximal group velocity of the dispersion `2 cos k`.
pub const MAX_GROUP_VELOCITY: f64 = 2.0;

/// `U(t) = exp(-i h t)` at a fixed time.
#[derive(Clone, Debug)]
pub struct Propagator {
    matrix: DMatrix<C64>,
    time: f64,
}

impl Propagator {
    pub fn identity(len: usize) -> Self {
        Self { matrix: DMatrix::identity(len, len), time: 0.0 }
    }

    /// Wraps a matrix assumed to be unitary.
    pub fn from_matrix(matrix: DMatrix<C64>, time: f64) -> Self {
        Self { matrix, time }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    /// Element `U_{jl}` for 1-based sites.
    pub fn element(&self, j: usize, l: usize) -> C64 {
        self.matrix[(j - 1, l - 1)]
    }

    /// `max |U U† - 1|`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.len();
        let uu = zgemm(&self.matrix, Op::Plain, &self.matrix, Op::Adjoint);
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in 0..n {
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((uu[(j, k)] - target).norm());
            }
        }
        worst
    }
}

/// Cached spectral decomposition of a number-conserving hopping matrix.
///
/// Build once in O(L³), then evaluate propagators or single columns at any
/// time. Read-only after construction.
#[derive(Clone, Debug)]
pub struct SpectralPropagator {
    energies: DVector<f64>,
    modes: DMatrix<C64>,
}

impl SpectralPropagator {
    pub fn new(h: &QuadraticHamiltonian) -> Result<Self> {
        if !h.is_number_conserving() {
            return Err(Error::UnsupportedHamiltonian(
                "pairing terms present; use the Majorana free evolution instead".into(),
            ));
        }
        let eig = HermitianEigen::new(h.hopping());
        Ok(Self { energies: eig.values, modes: eig.vectors })
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    /// Eigenvectors of `h`, one per column.
    pub fn modes(&self) -> &DMatrix<C64> {
        &self.modes
    }

    pub fn at(&self, t: f64) -> Result<Propagator> {
        check_time(t)?;
        if t == 0.0 {
            return Ok(Propagator::identity(self.len()));
        }
        let mut scaled = self.modes.clone();
        for (k, &e) in self.energies.iter().enumerate() {
            let phase = C64::from_polar(1.0, -e * t);
            for z in scaled.column_mut(k).iter_mut() {
                *z *= phase;
            }
        }
        Ok(Propagator { matrix: zgemm(&scaled, Op::Plain, &self.modes, Op::Adjoint), time: t })
    }

    /// Column `U_{·, source}(t)` (1-based source), in O(L²).
    pub fn column(&self, source: usize, t: f64) -> DVector<C64> {
        let s = source - 1;
        let coeffs: DVector<C64> = DVector::from_iterator(
            self.len(),
            self.energies.iter().enumerate().map(|(k, &e)| C64::from_polar(1.0, -e * t) * self.modes[(s, k)].conj()),
        );
        &self.modes * coeffs
    }

    /// Single element `U_{jl}(t)` in O(L).
    pub fn element(&self, j: usize, l: usize, t: f64) -> C64 {
        let (j, l) = (j - 1, l - 1);
        self.energies
            .iter()
            .enumerate()
            .map(|(k, &e)| self.modes[(j, k)] * C64::from_polar(1.0, -e * t) * self.modes[(l, k)].conj())
            .sum()
    }

    /// `P_I(t) = Σ_{j∈I} |U_{j,source}(t)|²` on the given grid.
    pub fn return_probability(&self, region: &ImpurityRegion, source: usize, times: &[f64]) -> Result<ReturnSeries> {
        let len = self.len();
        if source == 0 || source > len || region.end() > len {
            return Err(Error::InvalidSpec(format!("source {source} or region outside chain of {len}")));
        }
        let mut values = Vec::with_capacity(times.len());
        for &t in times {
            check_time(t)?;
            let p: f64 = region.sites().map(|j| self.element(j, source, t).norm_sqr()).sum();
            values.push(p.clamp(0.0, 1.0));
        }
        Ok(ReturnSeries::new(times.to_vec(), values).with_edge(finite_size_time(len, source)))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be finite and nonnegative, got {t}")))
    }
}

/// `exp(-i h t)` for a number-conserving Hamiltonian.
pub fn propagator(h: &QuadraticHamiltonian, t: f64) -> Result<Propagator> {
    SpectralPropagator::new(h)?.at(t)
}

/// See [`SpectralPropagator::return_probability`].
pub fn return_probability(
    h: &QuadraticHamiltonian,
    region: &ImpurityRegion,
    source: usize,
    times: &[f64],
) -> Result<ReturnSeries> {
    SpectralPropagator::new(h)?.return_probability(region, source, times)
}

/// Time before which a signal leaving `source` cannot have been reflected
/// back by an open end. A source sitting on an end uses the opposite end.
pub fn finite_size_time(len: usize, source: usize) -> f64 {
    let left = source - 1;
    let right = len - source;
    let d = if left == 0 || right == 0 { left.max(right) } else { left.min(right) };
    d as f64 / MAX_GROUP_VELOCITY
}

/// Semi-infinite chain boundary amplitude
/// `U_11(t) = (2/π) ∫_0^π sin²k e^{-2it cos k} dk`, by adaptive quadrature with
/// panels one oscillation period `π / t` wide.
pub fn boundary_amplitude(t: f64, quadrature_tol: f64) -> Result<C64> {
    check_time(t)?;
    let panels = (t.ceil() as usize).max(1);
    let q = quadrature::integrate(
        |k| {
            let s = k.sin();
            C64::from_polar(s * s, -2.0 * t * k.cos())
        },
        0.0,
        PI,
        panels,
        quadrature_tol * PI / 2.0,
        200 + 50 * panels,
    );
    if !q.converged {
        return Err(Error::QuadratureNotConverged { achieved: q.error * 2.0 / PI, requested: quadrature_tol });
    }
    Ok(q.value * (2.0 / PI))
}

/// Default absolute tolerance of [`boundary_amplitude`].
pub const DEFAULT_QUADRATURE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Bulk,
    Boundary,
}

/// Long-time return exponent `α` in `P(t) ~ t^{-α}` for a `d`-dimensional
/// lattice with quadratic band edges.
pub fn asymptotic_exponent(d: usize, location: Location) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    Ok(match location {
        Location::Bulk => d as f64,
        Location::Boundary => d as f64 + 2.0,
    })
}

/// Uniform grid `0, dt, 2 dt, ..., n dt` with `n = round(t_max / dt)`.
pub fn time_grid(t_max: f64, dt: f64) -> Vec<f64> {
    let n = (t_max / dt).round() as usize;
    (0..=n).map(|k| k as f64 * dt).collect()
}
