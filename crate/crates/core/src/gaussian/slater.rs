//! Pure number-conserving states stored as orthonormal occupied orbitals.
//!
//! A state with `N` particles is `Π_k (Σ_j Φ_jk c†_j) |0⟩` with `Φ` an
//! `L × N` matrix with orthonormal columns, so `C = conj(Φ) Φᵀ`. Any unitary
//! mixing of the columns leaves the state unchanged up to a phase, which is
//! what the measurement update exploits.
//!
//! The projection helpers are written against an arbitrary orthonormal
//! frame: the site being measured is described by a vector `target` with
//! `⟨target|φ⟩` equal to the amplitude of orbital `φ` on that site. In the
//! lab frame `target = e_j`; in a frame co-moving with a free propagator
//! `U(t)` it is `U(t)† e_j`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::Rng;

use super::{checked_probability, counting_angles, CountingFunction, GaussianState, MeasurementOutcome};
use crate::error::{Error, Result};
use crate::freeprop::Propagator;
use crate::lattice::ImpurityRegion;
use crate::linalg::{zgemm, Op};

/// Occupations closer than this to 0 or 1 count as definite for a reset.
const DEFINITE: f64 = 1e-8;

/// Householder reflection `H = 1 - 2 w w† / (w† w)` acting on the column
/// space of an orbital matrix.
struct Reflector {
    w: Vec<C64>,
    scale: f64,
}

impl Reflector {
    /// Chooses `H` so that the row `x` (amplitudes of each orbital on the
    /// measured site) becomes proportional to `e_pivot` after `Φ ← Φ H`.
    /// Columns with `x_k = 0` are left untouched. Returns `None` when at most
    /// one entry of `x` is nonzero.
    fn for_row(x: &[C64], pivot: usize) -> Option<Self> {
        if x.iter().enumerate().all(|(k, z)| k == pivot || *z == C64::new(0.0, 0.0)) {
            return None;
        }
        let mut w: Vec<C64> = x.iter().map(|z| z.conj()).collect();
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let yp = w[pivot];
        let phase = if yp.norm() > 0.0 { yp / yp.norm() } else { C64::new(1.0, 0.0) };
        // alpha = -phase * norm, w = y - alpha e_p
        w[pivot] = yp + phase * norm;
        let wsq: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        Some(Self { w, scale: 2.0 / wsq })
    }

    fn apply(&self, m: &mut DMatrix<C64>) {
        let active: Vec<usize> = (0..self.w.len()).filter(|&k| self.w[k] != C64::new(0.0, 0.0)).collect();
        let mut mw = DVector::<C64>::zeros(m.nrows());
        for &k in &active {
            mw.axpy(self.w[k], &m.column(k), C64::new(1.0, 0.0));
        }
        for &k in &active {
            m.column_mut(k).axpy(-self.w[k].conj() * self.scale, &mw, C64::new(1.0, 0.0));
        }
    }
}

/// `⟨target|φ_k⟩` for every column.
pub(crate) fn overlaps(orbitals: &DMatrix<C64>, target: &DVector<C64>) -> Vec<C64> {
    (0..orbitals.ncols()).map(|k| target.dotc(&orbitals.column(k))).collect()
}

/// Projects the state onto a definite occupation of the mode `target` and
/// returns the probability of that outcome. `site` is only used in errors.
pub(crate) fn project_orbitals(
    orbitals: &mut DMatrix<C64>,
    target: &DVector<C64>,
    occupied: bool,
    site: usize,
) -> Result<f64> {
    let x = overlaps(orbitals, target);
    let p = checked_probability(x.iter().map(|z| z.norm_sqr()).sum(), site)?;
    let prob = if occupied { p } else { 1.0 - p };
    if prob <= 0.0 {
        return Err(Error::CorruptedState(format!("projected site {site} onto an outcome of probability zero")));
    }
    if p == 0.0 {
        return Ok(prob);
    }
    let pivot = (0..x.len()).max_by(|&a, &b| x[a].norm_sqr().total_cmp(&x[b].norm_sqr())).unwrap_or(0);
    if let Some(h) = Reflector::for_row(&x, pivot) {
        h.apply(orbitals);
    }
    // Remove what is left of the other orbitals on the measured mode.
    let x = overlaps(orbitals, target);
    for (k, &xk) in x.iter().enumerate() {
        if k == pivot || xk == C64::new(0.0, 0.0) {
            continue;
        }
        let mut col = orbitals.column_mut(k);
        col.axpy(-xk, target, C64::new(1.0, 0.0));
    }
    let mut col = orbitals.column_mut(pivot);
    if occupied {
        col.copy_from(target);
    } else {
        col.axpy(-x[pivot], target, C64::new(1.0, 0.0));
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::CorruptedState(format!("empty outcome at site {site} annihilated the state")));
        }
        col.unscale_mut(norm);
    }
    Ok(prob)
}

/// Appends `target` as a new occupied orbital.
pub(crate) fn append_orbital(orbitals: &mut DMatrix<C64>, target: &DVector<C64>) {
    let n = orbitals.ncols();
    let m = std::mem::replace(orbitals, DMatrix::zeros(0, 0));
    *orbitals = m.insert_column(n, C64::new(0.0, 0.0));
    orbitals.column_mut(n).copy_from(target);
}

/// `det(1 + (e^{iθ} - 1) Φ†Φ)` at each angle, equal to
/// `det(1 + (e^{iθ} - 1) C)`, from the eigenvalues of the Gram matrix.
pub(crate) fn orbital_characteristic(orbitals: &DMatrix<C64>, thetas: &[f64]) -> Vec<C64> {
    let gram = zgemm(orbitals, Op::Adjoint, orbitals, Op::Plain);
    let g = SymmetricEigen::new(gram).eigenvalues;
    thetas
        .iter()
        .map(|&theta| {
            let z = C64::from_polar(1.0, theta) - 1.0;
            g.iter().map(|&e| 1.0 + z * e).product()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlaterState {
    orbitals: DMatrix<C64>,
}

impl SlaterState {
    pub fn vacuum(len: usize) -> Self {
        Self { orbitals: DMatrix::zeros(len, 0) }
    }

    pub fn single_particle(len: usize, site: usize) -> Result<Self> {
        if site == 0 || site > len {
            return Err(Error::InvalidSpec(format!("site {site} outside chain 1..={len}")));
        }
        let mut orbitals = DMatrix::zeros(len, 1);
        orbitals[(site - 1, 0)] = C64::new(1.0, 0.0);
        Ok(Self { orbitals })
    }

    /// Wraps an orbital matrix after checking orthonormality to 1e-10.
    pub fn from_orbitals(orbitals: DMatrix<C64>) -> Result<Self> {
        let s = Self { orbitals };
        let defect = s.orthonormality_defect();
        if defect > 1e-10 {
            return Err(Error::CorruptedState(format!("orbitals not orthonormal (defect {defect:e})")));
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.orbitals.nrows()
    }

    pub fn particle_number(&self) -> usize {
        self.orbitals.ncols()
    }

    pub fn orbitals(&self) -> &DMatrix<C64> {
        &self.orbitals
    }

    /// `max |Φ†Φ - 1|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = zgemm(&self.orbitals, Op::Adjoint, &self.orbitals, Op::Plain);
        let n = gram.nrows();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((gram[(a, b)] - target).norm());
            }
        }
        worst
    }

    pub fn occupation(&self, site: usize) -> f64 {
        self.orbitals.row(site - 1).iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn region_occupation(&self, region: &ImpurityRegion) -> f64 {
        region.sites().map(|j| self.occupation(j)).sum()
    }

    /// `C = conj(Φ) Φᵀ`.
    pub fn correlation(&self) -> DMatrix<C64> {
        zgemm(&self.orbitals, Op::Conj, &self.orbitals, Op::Transpose)
    }

    pub fn to_gaussian(&self) -> GaussianState {
        GaussianState { corr: self.correlation() }
    }

    /// `Φ ← U Φ`.
    pub fn evolve(&mut self, u: &Propagator) -> Result<()> {
        if u.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: u.len() });
        }
        self.orbitals = zgemm(u.matrix(), Op::Plain, &self.orbitals, Op::Plain);
        Ok(())
    }

    fn unit(&self, site: usize) -> Result<DVector<C64>> {
        let n = self.len();
        if site == 0 || site > n {
            return Err(Error::InvalidSpec(format!("site {site} outside chain 1..={n}")));
        }
        let mut e = DVector::zeros(n);
        e[site - 1] = C64::new(1.0, 0.0);
        Ok(e)
    }

    pub fn project(&mut self, site: usize, occupied: bool) -> Result<f64> {
        let e = self.unit(site)?;
        project_orbitals(&mut self.orbitals, &e, occupied, site)
    }

    pub fn measure<R: Rng + ?Sized>(&mut self, site: usize, rng: &mut R) -> Result<MeasurementOutcome> {
        let e = self.unit(site)?;
        let p = checked_probability(self.occupation(site), site)?;
        let occupied = rng.random::<f64>() < p;
        let probability = project_orbitals(&mut self.orbitals, &e, occupied, site)?;
        Ok(MeasurementOutcome { site, occupied, probability })
    }

    /// Fills every empty site of `region`. Every site must hold a definite
    /// occupation, as it does right after the region has been measured.
    pub fn reset_cluster(&mut self, region: &ImpurityRegion) -> Result<()> {
        for site in region.sites() {
            let p = self.occupation(site);
            if p < DEFINITE {
                let e = self.unit(site)?;
                append_orbital(&mut self.orbitals, &e);
            } else if p < 1.0 - DEFINITE {
                return Err(Error::CorruptedState(format!("reset of site {site} with indefinite occupation {p}")));
            }
        }
        Ok(())
    }

    pub fn counting_characteristic(&self, theta: f64) -> C64 {
        orbital_characteristic(&self.orbitals, &[theta])[0]
    }

    pub fn counting_function(&self) -> CountingFunction {
        let thetas = counting_angles(self.len());
        let values = orbital_characteristic(&self.orbitals, &thetas);
        CountingFunction { thetas, values }
    }
}
