//! Exact interacting dynamics in an occupation-number basis: sector
//! enumeration, matrix-free Hamiltonian action, Krylov stepping and the
//! particle-number observables.

mod action;
mod basis;
mod fcs;
mod krylov;

use std::sync::Arc;

use num_complex::Complex64 as C64;

pub use action::{impurity_terms, pairing_terms, quadratic_terms, raise3_ops, string_expectation, SparseAction, Term};
pub use basis::{
    apply_ladder, apply_ladders, enumerate_basis, enumerate_basis_within, memory_estimate, FockBasis, Ladder, Sector,
    DEFAULT_MEMORY_BUDGET, MAX_SITES,
};
pub use fcs::{brute_force_distribution, fcs_check, fock_operator, gaussian_density_matrix, FcsCheck, DENSE_MAX_SITES};
pub use krylov::{evolve_krylov, MAX_KRYLOV_DIM};

use crate::error::{Error, Result};
use crate::freeprop::{finite_size_time, time_grid};
use crate::gaussian::{counting_angles, number_distribution, CountingFunction, NumberDistribution};
use crate::lattice::{build_hopping, ChainSpec, ImpurityRegion, ImpuritySpec, ImpurityVariant};
use crate::monitored::Placement;

pub const DEFAULT_DT: f64 = 0.05;
pub const DEFAULT_TOL: f64 = 1e-9;
const NORM_TOL: f64 = 1e-9;

/// Amplitudes over a shared basis.
#[derive(Clone, Debug)]
pub struct ManyBodyState {
    basis: Arc<FockBasis>,
    amps: Vec<C64>,
}

impl ManyBodyState {
    /// The basis state `word`.
    pub fn product(basis: Arc<FockBasis>, word: u64) -> Result<Self> {
        let k = basis
            .find(word)
            .ok_or_else(|| Error::SectorViolation(format!("word {word:b} is not in the {:?} basis", basis.sector())))?;
        let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
        amps[k] = C64::new(1.0, 0.0);
        Ok(Self { basis, amps })
    }

    /// `c†_site |0⟩`.
    pub fn single_particle(basis: Arc<FockBasis>, site: usize) -> Result<Self> {
        if site == 0 || site > basis.len() {
            return Err(Error::InvalidSpec(format!("site {site} outside chain of {}", basis.len())));
        }
        Self::product(basis, 1 << (site - 1))
    }

    pub fn from_amps(basis: Arc<FockBasis>, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), got: amps.len() });
        }
        let s = Self { basis, amps };
        let n = s.norm();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::CorruptedState(format!("state norm {n} differs from 1")));
        }
        Ok(s)
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn evolve(&mut self, h: &SparseAction, dt: f64, tol: f64) -> Result<()> {
        if !Arc::ptr_eq(h.basis(), &self.basis) && **h.basis() != *self.basis {
            return Err(Error::InvalidSpec("Hamiltonian and state use different bases".into()));
        }
        self.amps = evolve_krylov(h, &self.amps, dt, tol)?;
        Ok(())
    }

    /// `⟨N_j⟩` for `j = 1..=L`.
    pub fn occupations(&self) -> Vec<f64> {
        let mut occ = vec![0.0; self.basis.len()];
        for (&w, a) in self.basis.states().iter().zip(&self.amps) {
            let p = a.norm_sqr();
            let mut bits = w;
            while bits != 0 {
                occ[bits.trailing_zeros() as usize] += p;
                bits &= bits - 1;
            }
        }
        occ
    }

    pub fn total(&self) -> f64 {
        self.basis.states().iter().zip(&self.amps).map(|(w, a)| w.count_ones() as f64 * a.norm_sqr()).sum()
    }

    /// `⟨(-1)^N⟩`.
    pub fn parity(&self) -> f64 {
        self.basis
            .states()
            .iter()
            .zip(&self.amps)
            .map(|(w, a)| if w.count_ones() % 2 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum()
    }

    /// `⟨e^{iθ_k N}⟩` on the standard counting angles.
    pub fn counting_function(&self) -> CountingFunction {
        let mut weights = vec![0.0; self.basis.len() + 1];
        for (&w, a) in self.basis.states().iter().zip(&self.amps) {
            weights[w.count_ones() as usize] += a.norm_sqr();
        }
        let thetas = counting_angles(self.basis.len());
        let values = thetas
            .iter()
            .map(|&t| weights.iter().enumerate().map(|(n, &p)| C64::from_polar(p, t * n as f64)).sum())
            .collect();
        CountingFunction { thetas, values }
    }

    pub fn expectation(&self, ops: &[Ladder]) -> C64 {
        string_expectation(&self.basis, &self.amps, ops)
    }
}

/// Observables at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct Observables {
    pub n: f64,
    pub n_imp: f64,
    /// `iΔ(⟨A†⟩ − ⟨A⟩)` for the raise3 string `A`, zero otherwise.
    pub current: f64,
    pub distribution: NumberDistribution,
}

pub fn measure_observables(state: &ManyBodyState, region: &ImpurityRegion, imp: &ImpuritySpec) -> Observables {
    let occ = state.occupations();
    let n = occ.iter().sum();
    let n_imp = region.sites().map(|j| occ[j - 1]).sum();
    let current = match imp.variant() {
        ImpurityVariant::Raise3 => {
            let a = state.expectation(&raise3_ops(imp.site()));
            2.0 * imp.strength() * a.im
        }
        _ => 0.0,
    };
    let distribution = number_distribution(&state.counting_function());
    Observables { n, n_imp, current, distribution }
}

/// Anchor site so that the impurity touches the left end, or sits centred.
pub fn impurity_anchor(len: usize, variant: ImpurityVariant, placement: Placement) -> usize {
    match placement {
        Placement::Boundary => 1,
        Placement::Bulk => (len + 1 - variant.support_width()) / 2 + 1,
    }
}

/// One interacting run from `c†_source |0⟩`.
#[derive(Clone, Debug)]
pub struct ParticleConfig {
    pub chain: ChainSpec,
    pub impurity: ImpuritySpec,
    /// Sites counted in `N_imp`; defaults to the impurity support.
    pub region: ImpurityRegion,
    pub source: usize,
    pub dt: f64,
    pub tol: f64,
    pub t_max: f64,
    /// Times at which `P(n)` is stored; snapped to the nearest step.
    pub checkpoints: Vec<f64>,
    pub memory_budget: u128,
}

impl ParticleConfig {
    pub fn new(len: usize, variant: ImpurityVariant, strength: f64, placement: Placement, t_max: f64) -> Result<Self> {
        let chain = ChainSpec::new(len)?;
        let site = impurity_anchor(len, variant, placement);
        let impurity = ImpuritySpec::new(variant, strength, site, &chain)?;
        let region = ImpurityRegion::new(site, variant.support_width(), &chain)?;
        Ok(Self {
            chain,
            impurity,
            region,
            source: site,
            dt: DEFAULT_DT,
            tol: DEFAULT_TOL,
            t_max,
            checkpoints: Vec::new(),
            memory_budget: DEFAULT_MEMORY_BUDGET,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            problems.push(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.tol > 0.0) {
            problems.push(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            problems.push(format!("t_max must be nonnegative, got {}", self.t_max));
        }
        if self.chain.check_site(self.source).is_err() {
            problems.push(format!("source {} outside chain of {}", self.source, self.chain.len()));
        }
        if self.region.end() > self.chain.len() {
            problems.push(format!("region ends at {} beyond chain of {}", self.region.end(), self.chain.len()));
        }
        if self.impurity.support().end() > &self.chain.len() {
            problems.push("impurity support leaves the chain".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(problems.join("; ")))
        }
    }

    pub fn sector(&self) -> Sector {
        if self.impurity.variant().conserves_parity() {
            Sector::of_parity(1)
        } else {
            Sector::Full
        }
    }

    /// Ballistic reflection time seen from the source.
    pub fn t_edge(&self) -> f64 {
        finite_size_time(self.chain.len(), self.source)
    }
}

#[derive(Clone, Debug)]
pub struct ParticleRun {
    pub times: Vec<f64>,
    pub n: Vec<f64>,
    pub n_imp: Vec<f64>,
    pub current: Vec<f64>,
    pub distributions: Vec<(f64, NumberDistribution)>,
    pub t_edge: f64,
}

pub fn run_particle(cfg: &ParticleConfig) -> Result<ParticleRun> {
    cfg.validate()?;
    let basis = Arc::new(enumerate_basis_within(cfg.chain.len(), cfg.sector(), cfg.memory_budget)?);
    let h = SparseAction::from_model(basis.clone(), &build_hopping(&cfg.chain), Some(&cfg.impurity))?;
    let mut state = ManyBodyState::single_particle(basis, cfg.source)?;
    let times = time_grid(cfg.t_max, cfg.dt);
    let checkpoint_steps: Vec<usize> =
        cfg.checkpoints.iter().map(|&t| ((t / cfg.dt).round() as usize).min(times.len() - 1)).collect();
    let mut run = ParticleRun {
        times: times.clone(),
        n: Vec::with_capacity(times.len()),
        n_imp: Vec::with_capacity(times.len()),
        current: Vec::with_capacity(times.len()),
        distributions: Vec::new(),
        t_edge: cfg.t_edge(),
    };
    for (k, &t) in times.iter().enumerate() {
        if k > 0 {
            state.evolve(&h, t - times[k - 1], cfg.tol)?;
        }
        let obs = measure_observables(&state, &cfg.region, &cfg.impurity);
        run.n.push(obs.n);
        run.n_imp.push(obs.n_imp);
        run.current.push(obs.current);
        if checkpoint_steps.contains(&k) {
            run.distributions.push((t, obs.distribution));
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freeprop::SpectralPropagator;

    fn dn_dt_deviation(dt: f64) -> f64 {
        let mut cfg = ParticleConfig::new(10, ImpurityVariant::Raise3, 0.3, Placement::Boundary, 3.0).unwrap();
        cfg.dt = dt;
        cfg.tol = 1e-12;
        let run = run_particle(&cfg).unwrap();
        (1..run.times.len() - 1)
            .map(|k| ((run.n[k + 1] - run.n[k - 1]) / (2.0 * dt) - 2.0 * run.current[k]).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn initial_observables() {
        let cfg = ParticleConfig::new(8, ImpurityVariant::Raise3, 0.3, Placement::Boundary, 0.0).unwrap();
        let basis = Arc::new(enumerate_basis(8, Sector::Odd).unwrap());
        let s = ManyBodyState::single_particle(basis, cfg.source).unwrap();
        let o = measure_observables(&s, &cfg.region, &cfg.impurity);
        assert_eq!((o.n, o.n_imp, o.current), (1.0, 1.0, 0.0));
        assert!((o.distribution.probs[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn free_limit_matches_single_particle_propagator() {
        let len = 9;
        let chain = ChainSpec::new(len).unwrap();
        let imp = ImpuritySpec::new(ImpurityVariant::Raise3, 0.0, 3, &chain).unwrap();
        let basis = Arc::new(enumerate_basis(len, Sector::Odd).unwrap());
        let h = SparseAction::from_model(basis.clone(), &build_hopping(&chain), Some(&imp)).unwrap();
        let prop = SpectralPropagator::new(&build_hopping(&chain)).unwrap();
        let mut s = ManyBodyState::single_particle(basis, 3).unwrap();
        for k in 1..=20 {
            s.evolve(&h, 0.25, 1e-12).unwrap();
            let t = 0.25 * k as f64;
            for (j, occ) in s.occupations().iter().enumerate() {
                assert!((occ - prop.element(j + 1, 3, t).norm_sqr()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn norm_and_energy_are_conserved() {
        let len = 10;
        let chain = ChainSpec::new(len).unwrap();
        let imp = ImpuritySpec::new(ImpurityVariant::Raise3, 0.5, 1, &chain).unwrap();
        let basis = Arc::new(enumerate_basis(len, Sector::Odd).unwrap());
        let h = SparseAction::from_model(basis.clone(), &build_hopping(&chain), Some(&imp)).unwrap();
        let mut s = ManyBodyState::single_particle(basis, 2).unwrap();
        let e0 = h.expectation(s.amps()).re;
        for _ in 0..100 {
            let before = s.norm();
            s.evolve(&h, DEFAULT_DT, DEFAULT_TOL).unwrap();
            assert!((s.norm() - before).abs() < 1e-10);
            assert!((s.parity() + 1.0).abs() < 1e-12);
        }
        assert!((h.expectation(s.amps()).re - e0).abs() < 1e-9);
    }

    #[test]
    fn current_drives_particle_growth() {
        let coarse = dn_dt_deviation(0.1);
        let fine = dn_dt_deviation(0.05);
        let order = (coarse / fine).log2();
        assert!(order > 1.8, "coarse {coarse:e} fine {fine:e} order {order}");
        assert!(fine < 5e-4);
    }

    #[test]
    fn raise3_keeps_odd_particle_numbers() {
        let mut cfg = ParticleConfig::new(10, ImpurityVariant::Raise3, 0.8, Placement::Boundary, 4.0).unwrap();
        cfg.checkpoints = vec![2.0, 4.0];
        let run = run_particle(&cfg).unwrap();
        assert_eq!(run.distributions.len(), 2);
        for (_, d) in &run.distributions {
            for (n, p) in d.probs.iter().enumerate() {
                if n % 2 == 0 {
                    assert!(*p < 1e-12);
                }
            }
            assert!(d.probs[3] > 1e-6);
        }
    }

    #[test]
    fn parity_breaking_runs_in_the_full_basis() {
        let cfg = ParticleConfig::new(8, ImpurityVariant::ParityBreaking, 0.5, Placement::Bulk, 2.0).unwrap();
        assert_eq!(cfg.sector(), Sector::Full);
        let run = run_particle(&cfg).unwrap();
        assert!(run.current.iter().all(|&j| j == 0.0));
        let last = run.n.last().unwrap();
        assert!((last - 1.0).abs() > 1e-6);
    }

    #[test]
    fn bulk_anchor_centres_the_support() {
        assert_eq!(impurity_anchor(12, ImpurityVariant::Raise3, Placement::Bulk), 5); // 5..=8
        assert_eq!(impurity_anchor(11, ImpurityVariant::Density3, Placement::Bulk), 5); // 5..=7
        assert_eq!(impurity_anchor(11, ImpurityVariant::Raise3, Placement::Boundary), 1);
    }
}
