//! Chain geometry, quadratic Hamiltonians and impurity descriptors.
//!
//! Site indices are 1-based everywhere in the public API. Matrices are stored
//! 0-based, so row `j - 1` of a hopping matrix belongs to site `j`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;

/// Default number of sites in a monitored impurity cluster.
pub const DEFAULT_REGION_SIZE: usize = 5;

/// An open chain of `len` sites. `dim` is only used by the analytic exponents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChainSpec {
    len: usize,
    dim: usize,
}

impl ChainSpec {
    pub fn new(len: usize) -> Result<Self> {
        Self::with_dim(len, 1)
    }

    pub fn with_dim(len: usize, dim: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::InvalidSpec(format!("chain needs at least 2 sites, got {len}")));
        }
        if dim == 0 {
            return Err(Error::InvalidSpec("spatial dimension must be positive".into()));
        }
        Ok(Self { len, dim })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Checks that a 1-based site index lies on the chain.
    pub fn check_site(&self, site: usize) -> Result<()> {
        if site == 0 || site > self.len {
            Err(Error::InvalidSpec(format!("site {site} outside chain 1..={}", self.len)))
        } else {
            Ok(())
        }
    }
}

/// Number-conserving hopping plus optional antisymmetric pairing.
///
/// The chemical potential is folded into the diagonal of `hopping`; the
/// `chemical` field only records its value.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticHamiltonian {
    hopping: DMatrix<C64>,
    pairing: Option<DMatrix<C64>>,
    chemical: f64,
}

impl QuadraticHamiltonian {
    pub fn new(hopping: DMatrix<C64>, pairing: Option<DMatrix<C64>>, chemical: f64) -> Result<Self> {
        let n = hopping.nrows();
        if hopping.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: hopping.ncols() });
        }
        if n < 2 {
            return Err(Error::InvalidSpec("Hamiltonian needs at least 2 sites".into()));
        }
        for j in 0..n {
            for k in 0..n {
                if (hopping[(j, k)] - hopping[(k, j)].conj()).norm() > HERMITIAN_TOL {
                    return Err(Error::InvalidSpec(format!("hopping matrix not Hermitian at ({}, {})", j + 1, k + 1)));
                }
            }
        }
        if let Some(p) = &pairing {
            if p.nrows() != n || p.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: p.nrows() });
            }
            for j in 0..n {
                for k in 0..n {
                    if (p[(j, k)] + p[(k, j)]).norm() > HERMITIAN_TOL {
                        return Err(Error::InvalidSpec(format!(
                            "pairing matrix not antisymmetric at ({}, {})",
                            j + 1,
                            k + 1
                        )));
                    }
                }
            }
        }
        Ok(Self { hopping, pairing, chemical })
    }

    pub fn len(&self) -> usize {
        self.hopping.nrows()
    }

    pub fn hopping(&self) -> &DMatrix<C64> {
        &self.hopping
    }

    pub fn pairing(&self) -> Option<&DMatrix<C64>> {
        self.pairing.as_ref()
    }

    pub fn chemical(&self) -> f64 {
        self.chemical
    }

    pub fn is_number_conserving(&self) -> bool {
        self.pairing.is_none()
    }

    /// True when every matrix element is real.
    pub fn is_real(&self) -> bool {
        let real = |m: &DMatrix<C64>| m.iter().all(|z| z.im == 0.0);
        real(&self.hopping) && self.pairing.as_ref().is_none_or(real)
    }

    /// Bogoliubov–de Gennes matrix in the Nambu basis `(c_1..c_L, c†_1..c†_L)`:
    ///
    /// ```text
    /// [  h    Δ  ]
    /// [ -Δ*  -h* ]
    /// ```
    ///
    /// so that `H = ½ Ψ† H_BdG Ψ + const` with pairing `½ Σ Δ_jk c†_j c†_k + h.c.`.
    pub fn bdg_matrix(&self) -> DMatrix<C64> {
        let n = self.len();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            for k in 0..n {
                m[(j, k)] = self.hopping[(j, k)];
                m[(n + j, n + k)] = -self.hopping[(j, k)].conj();
                if let Some(p) = &self.pairing {
                    m[(j, n + k)] = p[(j, k)];
                    m[(n + j, k)] = -p[(j, k)].conj();
                }
            }
        }
        m
    }
}

/// Nearest-neighbour hopping with unit amplitude on an open chain.
pub fn build_hopping(spec: &ChainSpec) -> QuadraticHamiltonian {
    let n = spec.len();
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n - 1 {
        h[(j, j + 1)] = C64::new(1.0, 0.0);
        h[(j + 1, j)] = C64::new(1.0, 0.0);
    }
    QuadraticHamiltonian { hopping: h, pairing: None, chemical: 0.0 }
}

/// Kitaev chain: unit hopping, onsite `mu` and nearest-neighbour pairing `lambda`.
///
/// With `lambda == 0` no pairing block is attached, so `mu = lambda = 0`
/// reproduces [`build_hopping`] exactly.
pub fn build_kitaev(spec: &ChainSpec, mu: f64, lambda: f64) -> QuadraticHamiltonian {
    let mut ham = build_hopping(spec);
    let n = spec.len();
    if mu != 0.0 {
        for j in 0..n {
            ham.hopping[(j, j)] += C64::new(mu, 0.0);
        }
    }
    ham.chemical = mu;
    if lambda != 0.0 {
        let mut p = DMatrix::zeros(n, n);
        for j in 0..n - 1 {
            p[(j, j + 1)] = C64::new(lambda, 0.0);
            p[(j + 1, j)] = C64::new(-lambda, 0.0);
        }
        ham.pairing = Some(p);
    }
    ham
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KitaevPhase {
    Topological,
    Critical,
    Trivial,
}

/// Phase of the Kitaev chain with unit hopping: topological for `|mu| < 2`
/// and nonzero pairing, critical exactly at `|mu| = 2`.
pub fn kitaev_phase(mu: f64, lambda: f64) -> KitaevPhase {
    if lambda == 0.0 {
        return KitaevPhase::Trivial;
    }
    let a = mu.abs();
    if a < 2.0 {
        KitaevPhase::Topological
    } else if a == 2.0 {
        KitaevPhase::Critical
    } else {
        KitaevPhase::Trivial
    }
}

/// Contiguous cluster of sites `start ..= start + size - 1` (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ImpurityRegion {
    start: usize,
    size: usize,
}

impl ImpurityRegion {
    pub fn new(start: usize, size: usize, spec: &ChainSpec) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidSpec("impurity region must contain at least one site".into()));
        }
        if start == 0 || start + size - 1 > spec.len() {
            return Err(Error::InvalidSpec(format!(
                "region {}..={} does not fit in chain of {} sites",
                start,
                start + size - 1,
                spec.len()
            )));
        }
        Ok(Self { start, size })
    }

    /// Region of `size` sites centred on `center` (rounding towards the left).
    pub fn centered(center: usize, size: usize, spec: &ChainSpec) -> Result<Self> {
        let half = (size - 1) / 2;
        if center <= half {
            return Err(Error::InvalidSpec(format!("cannot centre {size} sites on site {center}")));
        }
        Self::new(center - half, size, spec)
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn end(&self) -> usize {
        self.start + self.size - 1
    }

    pub fn contains(&self, site: usize) -> bool {
        site >= self.start && site <= self.end()
    }

    /// Sites in ascending order.
    pub fn sites(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end()
    }
}

/// Shorthand for [`ImpurityRegion::new`].
pub fn impurity_region(start: usize, size: usize, spec: &ChainSpec) -> Result<ImpurityRegion> {
    ImpurityRegion::new(start, size, spec)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ImpurityVariant {
    /// `Δ N_i N_{i+1}`
    Density2,
    /// `Δ N_i N_{i+1} N_{i+2}`
    Density3,
    /// `Δ (c†_i c†_{i+1} c†_{i+2} c_{i+3} + h.c.)`
    Raise3,
    /// `Δ (c†_i c†_{i+1} c_{i+2} + h.c.)`
    ParityBreaking,
}

impl ImpurityVariant {
    pub fn support_width(self) -> usize {
        match self {
            ImpurityVariant::Density2 => 2,
            ImpurityVariant::Density3 => 3,
            ImpurityVariant::Raise3 => 4,
            ImpurityVariant::ParityBreaking => 3,
        }
    }

    pub fn conserves_number(self) -> bool {
        matches!(self, ImpurityVariant::Density2 | ImpurityVariant::Density3)
    }

    pub fn conserves_parity(self) -> bool {
        !matches!(self, ImpurityVariant::ParityBreaking)
    }

    pub fn name(self) -> &'static str {
        match self {
            ImpurityVariant::Density2 => "density2",
            ImpurityVariant::Density3 => "density3",
            ImpurityVariant::Raise3 => "raise3",
            ImpurityVariant::ParityBreaking => "parity_breaking",
        }
    }
}

impl std::str::FromStr for ImpurityVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "density2" => Ok(ImpurityVariant::Density2),
            "density3" => Ok(ImpurityVariant::Density3),
            "raise3" => Ok(ImpurityVariant::Raise3),
            "parity_breaking" => Ok(ImpurityVariant::ParityBreaking),
            other => Err(Error::InvalidSpec(format!("unknown impurity variant {other:?}"))),
        }
    }
}

/// A local impurity term anchored at `site`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImpuritySpec {
    variant: ImpurityVariant,
    strength: f64,
    site: usize,
}

impl ImpuritySpec {
    pub fn new(variant: ImpurityVariant, strength: f64, site: usize, spec: &ChainSpec) -> Result<Self> {
        let w = variant.support_width();
        if site == 0 || site + w - 1 > spec.len() {
            return Err(Error::InvalidSpec(format!(
                "{} impurity at site {site} needs sites {site}..={} on a chain of {}",
                variant.name(),
                site + w - 1,
                spec.len()
            )));
        }
        if !strength.is_finite() {
            return Err(Error::InvalidSpec("impurity strength must be finite".into()));
        }
        Ok(Self { variant, strength, site })
    }

    pub fn variant(&self) -> ImpurityVariant {
        self.variant
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn site(&self) -> usize {
        self.site
    }

    pub fn support(&self) -> std::ops::RangeInclusive<usize> {
        self.site..=self.site + self.variant.support_width() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn real_part(m: &DMatrix<C64>) -> DMatrix<f64> {
        m.map(|z| z.re)
    }

    #[test]
    fn two_site_hopping() {
        let h = build_hopping(&ChainSpec::new(2).unwrap());
        assert_eq!(real_part(h.hopping()), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn short_chains_are_rejected() {
        assert!(ChainSpec::new(1).is_err());
        assert!(ChainSpec::new(0).is_err());
    }

    #[test]
    fn three_site_spectrum() {
        let h = build_hopping(&ChainSpec::new(3).unwrap());
        let mut ev: Vec<f64> = SymmetricEigen::new(real_part(h.hopping())).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let r2 = 2f64.sqrt();
        for (got, want) in ev.iter().zip([-r2, 0.0, r2]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn long_chain_band_edges() {
        let l = 1000;
        let h = build_hopping(&ChainSpec::new(l).unwrap());
        let ev = SymmetricEigen::new(real_part(h.hopping())).eigenvalues;
        let max = ev.max();
        let min = ev.min();
        let edge = 2.0 * (std::f64::consts::PI / (l as f64 + 1.0)).cos();
        assert!((max - edge).abs() < 1e-9);
        assert!((min + edge).abs() < 1e-9);
        assert!((max - min - 4.0).abs() < 1e-4);
    }

    #[test]
    fn kitaev_without_pairing_is_plain_hopping() {
        let spec = ChainSpec::new(7).unwrap();
        assert_eq!(build_kitaev(&spec, 0.0, 0.0), build_hopping(&spec));
    }

    #[test]
    fn kitaev_blocks() {
        let spec = ChainSpec::new(4).unwrap();
        let k = build_kitaev(&spec, 0.5, 1.0);
        assert_eq!(k.hopping()[(2, 2)].re, 0.5);
        let p = k.pairing().unwrap();
        assert_eq!(p[(0, 1)].re, 1.0);
        assert_eq!(p[(1, 0)].re, -1.0);
        let bdg = k.bdg_matrix();
        assert_eq!(bdg.nrows(), 8);
        assert!(crate::linalg::max_abs_diff(&bdg, &bdg.adjoint()) < 1e-15);
        assert!(QuadraticHamiltonian::new(k.hopping().clone(), Some(p.clone()), 0.5).is_ok());
    }

    #[test]
    fn rejects_non_hermitian_hopping() {
        let mut h = DMatrix::zeros(3, 3);
        h[(0, 1)] = C64::new(1.0, 0.0);
        assert!(QuadraticHamiltonian::new(h, None, 0.0).is_err());
    }

    #[test]
    fn topological_predicate() {
        assert_eq!(kitaev_phase(1.6, 1.0), KitaevPhase::Topological);
        assert_eq!(kitaev_phase(3.0, 1.0), KitaevPhase::Trivial);
        assert_eq!(kitaev_phase(-2.0, 1.0), KitaevPhase::Critical);
        assert_eq!(kitaev_phase(1.0, 0.0), KitaevPhase::Trivial);
    }

    #[test]
    fn regions() {
        let spec = ChainSpec::new(1000).unwrap();
        let r = impurity_region(1, DEFAULT_REGION_SIZE, &spec).unwrap();
        assert_eq!(r.sites().collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        assert!(impurity_region(498, 5, &spec).is_ok());
        assert!(impurity_region(999, 5, &spec).is_err());
        assert!(impurity_region(0, 5, &spec).is_err());
        let c = ImpurityRegion::centered(500, 5, &spec).unwrap();
        assert_eq!((c.start(), c.end()), (498, 502));
    }

    #[test]
    fn impurity_support_widths() {
        let spec = ChainSpec::new(6).unwrap();
        use ImpurityVariant::*;
        for (v, w) in [(Density2, 2), (Density3, 3), (Raise3, 4), (ParityBreaking, 3)] {
            assert_eq!(v.support_width(), w);
            let last_ok = 6 - w + 1;
            assert!(ImpuritySpec::new(v, 0.3, last_ok, &spec).is_ok());
            assert!(ImpuritySpec::new(v, 0.3, last_ok + 1, &spec).is_err());
        }
    }
}
