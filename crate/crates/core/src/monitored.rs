//! Measurement-and-feedback trajectories on a free chain.
//!
//! Each step evolves the state for `dt` under the hopping Hamiltonian; with
//! probability `p_m` every site of the impurity cluster is then measured in
//! ascending order, and if any site was found occupied the cluster is refilled.
//!
//! Trajectories are pure Slater states. The orbitals are stored in the frame
//! co-moving with the free evolution, `Ψ = U(t)† Φ(t)`, so the unitary part
//! of a step costs nothing: measuring site `j` at time `t` only needs the row
//! `e_j† U(t)`, and those rows are tabulated once per ensemble for the sites of
//! the cluster.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::freeprop::SpectralPropagator;
use crate::gaussian::{
    append_orbital, counting_angles, number_distribution, orbital_characteristic, project_orbitals, CountingFunction,
    NumberDistribution,
};
use crate::lattice::{build_hopping, ChainSpec, ImpurityRegion, DEFAULT_REGION_SIZE};
use crate::linalg::{zgemm, Op};

/// Default step duration.
pub const DEFAULT_DT: f64 = 0.5;

/// Largest propagator-row table an ensemble may allocate.
pub const TABLE_BUDGET_BYTES: u128 = 4 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Placement {
    /// Particle on site 1, cluster `1..=m`.
    Boundary,
    /// Particle on site `⌊L/2⌋`, cluster centred on it.
    Bulk,
}

/// Cluster and starting site for a placement.
pub fn placement_region(chain: &ChainSpec, placement: Placement, size: usize) -> Result<(ImpurityRegion, usize)> {
    match placement {
        Placement::Boundary => Ok((ImpurityRegion::new(1, size, chain)?, 1)),
        Placement::Bulk => {
            let source = chain.len() / 2;
            Ok((ImpurityRegion::centered(source, size, chain)?, source))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonitoredConfig {
    pub chain: ChainSpec,
    pub region: ImpurityRegion,
    /// Site of the initial particle; must lie in `region`.
    pub source: usize,
    pub p_m: f64,
    pub dt: f64,
    pub steps: usize,
    pub samples: usize,
    pub seed: u64,
    /// Steps after which the counting function is sampled.
    pub distribution_checkpoints: Vec<usize>,
}

impl MonitoredConfig {
    /// Defaults: `dt = 0.5`, cluster of 5 sites, no checkpoints.
    pub fn new(
        chain: ChainSpec,
        placement: Placement,
        p_m: f64,
        steps: usize,
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let (region, source) = placement_region(&chain, placement, DEFAULT_REGION_SIZE)?;
        let cfg = Self {
            chain,
            region,
            source,
            p_m,
            dt: DEFAULT_DT,
            steps,
            samples,
            seed,
            distribution_checkpoints: Vec::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(0.0..=1.0).contains(&self.p_m) {
            problems.push(format!("p_m = {} outside [0, 1]", self.p_m));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            problems.push(format!("dt = {} must be positive", self.dt));
        }
        if self.samples == 0 {
            problems.push("samples must be at least 1".to_string());
        }
        if self.region.end() > self.chain.len() {
            problems.push(format!("region ends at {} beyond chain of {}", self.region.end(), self.chain.len()));
        }
        if !self.region.contains(self.source) {
            problems.push(format!("initial site {} outside the impurity region", self.source));
        }
        if let Some(&c) = self.distribution_checkpoints.iter().find(|&&c| c == 0 || c > self.steps) {
            problems.push(format!("checkpoint {c} outside 1..={}", self.steps));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(problems.join("; ")))
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (1..=self.steps).map(|s| s as f64 * self.dt).collect()
    }
}

/// One trajectory, recorded after every step `1..=steps`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub n: Vec<f64>,
    pub n_imp: Vec<f64>,
    pub reset: Vec<bool>,
    /// Counting functions at the configured checkpoints, keyed by step.
    pub snapshots: BTreeMap<usize, CountingFunction>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub mean: Vec<f64>,
    /// Sample standard deviation over `√samples`.
    pub stderr: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub n: TimeSeries,
    pub n_imp: TimeSeries,
    /// `P(n)` at each checkpoint step.
    pub distributions: BTreeMap<usize, NumberDistribution>,
    /// Steps at which some trajectory's particle number decreased.
    pub monotonicity_violations: usize,
    pub samples: usize,
}

/// A prepared ensemble: the propagator rows for the cluster at every
/// recorded time. Shared read-only by all trajectories.
pub struct Monitor {
    config: MonitoredConfig,
    /// Row `k·m + a` is `e_{j_a}† U(k·dt)` for the `a`-th cluster site.
    rows: DMatrix<C64>,
}

impl Monitor {
    pub fn new(config: &MonitoredConfig) -> Result<Self> {
        config.validate()?;
        let len = config.chain.len();
        let m = config.region.size();
        let count = (config.steps + 1) * m;
        let bytes = count as u128 * len as u128 * 16;
        if bytes > TABLE_BUDGET_BYTES {
            return Err(Error::Resource {
                what: format!("propagator table for {} steps", config.steps),
                required_bytes: bytes,
            });
        }
        let spectral = SpectralPropagator::new(&build_hopping(&config.chain))?;
        let modes = spectral.modes();
        let energies = spectral.energies();
        let sites: Vec<usize> = config.region.sites().map(|s| s - 1).collect();
        let weighted = DMatrix::from_fn(count, len, |r, q| {
            let (k, a) = (r / m, r % m);
            let t = k as f64 * config.dt;
            modes[(sites[a], q)] * C64::from_polar(1.0, -energies[q] * t)
        });
        let rows = zgemm(&weighted, Op::Plain, modes, Op::Adjoint);
        Ok(Self { config: config.clone(), rows })
    }

    pub fn config(&self) -> &MonitoredConfig {
        &self.config
    }

    fn block(&self, step: usize) -> DMatrix<C64> {
        let m = self.config.region.size();
        self.rows.rows(step * m, m).into_owned()
    }

    /// `U(t)† e_j` for the `a`-th cluster site at `step`.
    fn target(&self, step: usize, a: usize) -> DVector<C64> {
        let m = self.config.region.size();
        self.rows.row(step * m + a).transpose().map(|z| z.conj())
    }

    /// Runs trajectory `index` with its own random stream.
    pub fn run_trajectory(&self, index: usize) -> Result<TrajectoryRecord> {
        self.trajectory(index).map_err(|e| Error::Trajectory { index, source: Box::new(e) })
    }

    fn trajectory(&self, index: usize) -> Result<TrajectoryRecord> {
        let cfg = &self.config;
        let mut rng = trajectory_rng(cfg.seed, index);
        let len = cfg.chain.len();
        let m = cfg.region.size();
        let first = cfg.region.start();
        let mut psi = DMatrix::<C64>::zeros(len, 1);
        psi[(cfg.source - 1, 0)] = C64::new(1.0, 0.0);

        let thetas = counting_angles(len);
        let mut rec = TrajectoryRecord {
            n: Vec::with_capacity(cfg.steps),
            n_imp: Vec::with_capacity(cfg.steps),
            reset: Vec::with_capacity(cfg.steps),
            snapshots: BTreeMap::new(),
        };
        let mut outcomes = vec![false; m];
        for step in 1..=cfg.steps {
            let mut reset = false;
            if rng.random::<f64>() < cfg.p_m {
                for (a, slot) in outcomes.iter_mut().enumerate() {
                    let target = self.target(step, a);
                    let p: f64 = (target.adjoint() * &psi).iter().map(|z| z.norm_sqr()).sum();
                    let site = first + a;
                    let occupied = rng.random::<f64>() < p;
                    project_orbitals(&mut psi, &target, occupied, site)?;
                    *slot = occupied;
                }
                if outcomes.iter().any(|&o| o) {
                    reset = true;
                    for (a, &o) in outcomes.iter().enumerate() {
                        if !o {
                            append_orbital(&mut psi, &self.target(step, a));
                        }
                    }
                }
            }
            let amps = zgemm(&self.block(step), Op::Plain, &psi, Op::Plain);
            rec.n.push(psi.ncols() as f64);
            rec.n_imp.push(amps.iter().map(|z| z.norm_sqr()).sum());
            rec.reset.push(reset);
            if cfg.distribution_checkpoints.contains(&step) {
                let values = orbital_characteristic(&psi, &thetas);
                rec.snapshots.insert(step, CountingFunction { thetas: thetas.clone(), values });
            }
        }
        Ok(rec)
    }

    /// Runs all trajectories on the current rayon pool and reduces them in
    /// index order, so the result does not depend on the number of workers.
    pub fn run_ensemble(&self) -> Result<EnsembleResult> {
        let records: Vec<TrajectoryRecord> =
            (0..self.config.samples).into_par_iter().map(|i| self.run_trajectory(i)).collect::<Result<_>>()?;
        Ok(reduce(&self.config, &records))
    }
}

/// Random stream of one trajectory: the master seed selects the key, the
/// trajectory index the stream.
pub fn trajectory_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn mean_and_stderr(columns: impl Fn(usize) -> Vec<f64>, steps: usize, samples: usize) -> TimeSeries {
    let mut mean = Vec::with_capacity(steps);
    let mut stderr = Vec::with_capacity(steps);
    for s in 0..steps {
        let xs = columns(s);
        let mu = xs.iter().sum::<f64>() / samples as f64;
        let var =
            if samples > 1 { xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (samples - 1) as f64 } else { 0.0 };
        mean.push(mu);
        stderr.push((var / samples as f64).sqrt());
    }
    TimeSeries { mean, stderr }
}

fn reduce(cfg: &MonitoredConfig, records: &[TrajectoryRecord]) -> EnsembleResult {
    let samples = records.len();
    let steps = cfg.steps;
    let n = mean_and_stderr(|s| records.iter().map(|r| r.n[s]).collect(), steps, samples);
    let n_imp = mean_and_stderr(|s| records.iter().map(|r| r.n_imp[s]).collect(), steps, samples);
    let monotonicity_violations = records
        .iter()
        .map(|r| {
            let start = std::iter::once(1.0).chain(r.n.iter().copied());
            start.zip(r.n.iter()).filter(|(a, b)| **b < *a).count()
        })
        .sum();
    let mut distributions = BTreeMap::new();
    for &c in &cfg.distribution_checkpoints {
        if let Some(avg) = CountingFunction::average(records.iter().filter_map(|r| r.snapshots.get(&c))) {
            distributions.insert(c, number_distribution(&avg));
        }
    }
    EnsembleResult { times: cfg.times(), n, n_imp, distributions, monotonicity_violations, samples }
}

pub fn run_trajectory(config: &MonitoredConfig, index: usize) -> Result<TrajectoryRecord> {
    Monitor::new(config)?.run_trajectory(index)
}

pub fn run_ensemble(config: &MonitoredConfig) -> Result<EnsembleResult> {
    Monitor::new(config)?.run_ensemble()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freeprop::{propagator, return_probability};
    use crate::gaussian::GaussianState;

    fn config(len: usize, placement: Placement, p_m: f64, steps: usize, samples: usize) -> MonitoredConfig {
        MonitoredConfig::new(ChainSpec::new(len).unwrap(), placement, p_m, steps, samples, 17).unwrap()
    }

    /// The same protocol on a full correlation matrix, consuming random
    /// numbers in the same order.
    fn dense_trajectory(cfg: &MonitoredConfig, index: usize) -> (Vec<f64>, Vec<f64>) {
        let h = build_hopping(&cfg.chain);
        let u = propagator(&h, cfg.dt).unwrap();
        let mut rng = trajectory_rng(cfg.seed, index);
        let mut s = GaussianState::single_particle(cfg.chain.len(), cfg.source).unwrap();
        let (mut n, mut n_imp) = (Vec::new(), Vec::new());
        for _ in 0..cfg.steps {
            s.evolve(&u).unwrap();
            if rng.random::<f64>() < cfg.p_m {
                let mut any = false;
                for site in cfg.region.sites() {
                    any |= s.measure(site, &mut rng).unwrap().occupied;
                }
                if any {
                    s.reset_cluster(&cfg.region);
                }
            }
            n.push(s.total());
            n_imp.push(s.region_occupation(&cfg.region));
        }
        (n, n_imp)
    }

    #[test]
    fn co_moving_frame_matches_dense_engine() {
        for (placement, p_m) in [(Placement::Boundary, 0.6), (Placement::Bulk, 0.9), (Placement::Bulk, 0.3)] {
            let cfg = config(24, placement, p_m, 60, 3);
            let monitor = Monitor::new(&cfg).unwrap();
            for index in 0..3 {
                let rec = monitor.run_trajectory(index).unwrap();
                let (n, n_imp) = dense_trajectory(&cfg, index);
                for s in 0..cfg.steps {
                    assert!((rec.n[s] - n[s]).abs() < 1e-9, "{placement:?} step {s}");
                    assert!((rec.n_imp[s] - n_imp[s]).abs() < 1e-9, "{placement:?} step {s}");
                }
            }
        }
    }

    #[test]
    fn no_monitoring_gives_free_return_probability() {
        let cfg = config(60, Placement::Bulk, 0.0, 40, 2);
        let res = run_ensemble(&cfg).unwrap();
        let free = return_probability(&build_hopping(&cfg.chain), &cfg.region, cfg.source, &cfg.times()).unwrap();
        for s in 0..cfg.steps {
            assert_eq!(res.n.mean[s], 1.0);
            assert!((res.n_imp.mean[s] - free.values[s]).abs() < 1e-9);
        }
    }

    #[test]
    fn particle_number_never_decreases() {
        let cfg = config(40, Placement::Boundary, 0.9, 80, 6);
        let res = run_ensemble(&cfg).unwrap();
        assert_eq!(res.monotonicity_violations, 0);
        assert!(res.n.mean.last().unwrap() > &3.0);
        for s in 0..cfg.steps {
            assert!(res.n_imp.mean[s] <= res.n.mean[s].min(5.0) + 1e-12);
        }
    }

    #[test]
    fn ensemble_is_independent_of_worker_count() {
        let mut cfg = config(30, Placement::Bulk, 0.5, 30, 8);
        cfg.distribution_checkpoints = vec![10, 30];
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run_ensemble(&cfg).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a, b);
        let d = &a.distributions[&30];
        assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((d.mean() - a.n.mean[29]).abs() < 1e-9);
    }

    #[test]
    fn validation_collects_problems() {
        let chain = ChainSpec::new(20).unwrap();
        let mut cfg = MonitoredConfig::new(chain, Placement::Boundary, 0.5, 10, 1, 0).unwrap();
        cfg.p_m = 1.5;
        cfg.samples = 0;
        match cfg.validate() {
            Err(Error::InvalidSpec(msg)) => {
                assert!(msg.contains("p_m"));
                assert!(msg.contains("samples"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bulk_placement_is_centred() {
        let chain = ChainSpec::new(500).unwrap();
        let (region, source) = placement_region(&chain, Placement::Bulk, 5).unwrap();
        assert_eq!(source, 250);
        assert_eq!((region.start(), region.end()), (248, 252));
    }
}
