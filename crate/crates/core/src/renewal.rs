//! Renewal equation for monitored return amplitudes, branching arithmetic
//! and the configuration-entropy estimate.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::freeprop::{bessel_amplitude, boundary_amplitude, fit_power_law, time_grid, PowerLawFit, ReturnSeries};

pub const DEFAULT_GRID_STEP: f64 = 0.1;
pub const DEFAULT_T_MAX: f64 = 500.0;
/// Default light-cone velocity, the maximal group velocity.
pub const DEFAULT_VELOCITY: f64 = 2.0;

/// Free and dressed return amplitudes on a common uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnKernel {
    pub times: Vec<f64>,
    pub a0: Vec<C64>,
    pub a: Vec<C64>,
}

impl ReturnKernel {
    /// `|A(t)|²` as a series ready for fitting.
    pub fn probability(&self) -> ReturnSeries {
        ReturnSeries::new(self.times.clone(), self.a.iter().map(|z| z.norm_sqr()).collect())
    }

    pub fn fit(&self, window: (f64, f64)) -> Result<PowerLawFit> {
        fit_power_law(&self.probability(), window, true)
    }
}

/// Which free amplitude seeds the renewal equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelSource {
    /// `J_0(2t)`, the on-site amplitude in the bulk.
    Bulk,
    /// `U_11(t)` at the end of a semi-infinite chain.
    Boundary,
}

/// Samples the free amplitude on `0, dt, ..., t_max`.
pub fn free_kernel(source: KernelSource, dt: f64, t_max: f64) -> Result<(Vec<f64>, Vec<C64>)> {
    if !(dt > 0.0) || !(t_max >= 0.0) {
        return Err(Error::Domain(format!("grid needs dt > 0 and t_max >= 0, got {dt}, {t_max}")));
    }
    let times = time_grid(t_max, dt);
    let a0 = match source {
        KernelSource::Bulk => times.iter().map(|&t| bessel_amplitude(0, t)).collect(),
        KernelSource::Boundary => times
            .iter()
            .map(|&t| boundary_amplitude(t, crate::freeprop::DEFAULT_QUADRATURE_TOL))
            .collect::<Result<_>>()?,
    };
    Ok((times, a0))
}

/// Forward solution of `A_n = A0_n - p_m Σ_{k<n} A0_{n-k} A_k`.
pub fn solve_renewal(times: &[f64], a0: &[C64], p_m: f64) -> Result<ReturnKernel> {
    if times.len() != a0.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), got: a0.len() });
    }
    if times.len() > 2 {
        let dt = times[1] - times[0];
        if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0)) {
            return Err(Error::InvalidSpec("renewal grid must be uniform".into()));
        }
    }
    let n = a0.len();
    let mut a = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = C64::new(0.0, 0.0);
        for (k, ak) in a.iter().enumerate() {
            acc += a0[i - k] * ak;
        }
        a.push(a0[i] - acc * p_m);
    }
    Ok(ReturnKernel { times: times.to_vec(), a0: a0.to_vec(), a })
}

/// `N_ret = p_r / (1 - p_r)`; `None` when `p_r = 1` (the number diverges).
pub fn expected_returns(p_r: f64) -> Result<Option<f64>> {
    if !(0.0..=1.0).contains(&p_r) {
        return Err(Error::Domain(format!("return probability {p_r} outside [0, 1]")));
    }
    if p_r == 1.0 {
        return Ok(None);
    }
    Ok(Some(p_r / (1.0 - p_r)))
}

/// Inverse of [`expected_returns`]: `p_r = N_ret / (1 + N_ret)`.
pub fn return_probability_from(n_ret: f64) -> Result<f64> {
    if !(n_ret >= 0.0) {
        return Err(Error::Domain(format!("expected number of returns {n_ret} must be nonnegative")));
    }
    if n_ret.is_infinite() {
        return Ok(1.0);
    }
    Ok(n_ret / (1.0 + n_ret))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branching {
    Subcritical,
    Critical,
    Supercritical,
}

/// Classifies the reproduction factor `n_br · p_r` against 1.
pub fn branching_criterion(n_br: f64, p_r: f64) -> Result<Branching> {
    if !(n_br >= 0.0 && p_r >= 0.0) || !n_br.is_finite() || !p_r.is_finite() {
        return Err(Error::Domain(format!("branching inputs must be finite and nonnegative, got {n_br}, {p_r}")));
    }
    let r = n_br * p_r;
    Ok(if r < 1.0 {
        Branching::Subcritical
    } else if r == 1.0 {
        Branching::Critical
    } else {
        Branching::Supercritical
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfigEntropyParams {
    pub xi: f64,
    pub v: f64,
    pub t: f64,
}

impl ConfigEntropyParams {
    pub fn new(xi: f64, t: f64) -> Self {
        Self { xi, v: DEFAULT_VELOCITY, t }
    }
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// `ln C(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `S = -Σ P(ℓ) ln P(ℓ) + Σ P(ℓ) ln C(⌊vt⌋, ℓ)` with `P(ℓ) ∝ e^{-ℓ/ξ}` on
/// `ℓ = 1..=⌊vt⌋`.
pub fn config_entropy(params: &ConfigEntropyParams) -> Result<f64> {
    let ConfigEntropyParams { xi, v, t } = *params;
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::Domain(format!("correlation length must be positive, got {xi}")));
    }
    let cone = v * t;
    if !(cone >= 1.0) || !cone.is_finite() {
        return Err(Error::Domain(format!("light cone v·t = {cone} holds no site")));
    }
    if 10.0 * xi > cone {
        log::warn!("correlation length {xi} is not small compared with the light cone {cone}");
    }
    let n = cone.floor() as u64;
    // log-weights relative to ℓ = 1 keep the sums finite for tiny ξ
    let weights: Vec<f64> = (1..=n).map(|l| (-((l - 1) as f64) / xi).exp()).collect();
    let z: f64 = weights.iter().sum();
    let ln_z = z.ln();
    let mut s = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            break;
        }
        let l = i as u64 + 1;
        let p = w / z;
        let ln_p = -((l - 1) as f64) / xi - ln_z;
        s += -p * ln_p + p * ln_binomial(n, l);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_monitoring_returns_the_free_kernel() {
        let (t, a0) = free_kernel(KernelSource::Bulk, 0.1, 30.0).unwrap();
        let k = solve_renewal(&t, &a0, 0.0).unwrap();
        assert_eq!(k.a, k.a0);
    }

    #[test]
    fn causal_forward_solve() {
        // A0 = (1, 1, 1): A1 = 1 - p A0_1 A_0, A2 = 1 - p (A0_2 A_0 + A0_1 A_1).
        let a0 = vec![C64::new(1.0, 0.0); 3];
        let k = solve_renewal(&[0.0, 1.0, 2.0], &a0, 0.5).unwrap();
        assert_eq!(k.a[0], C64::new(1.0, 0.0));
        assert_eq!(k.a[1], C64::new(0.5, 0.0));
        assert_eq!(k.a[2], C64::new(0.25, 0.0));
    }

    #[test]
    fn kernel_scaling() {
        let (t, a0) = free_kernel(KernelSource::Bulk, 0.1, 40.0).unwrap();
        let c = C64::new(0.3, -1.2);
        let scaled: Vec<C64> = a0.iter().map(|z| z * c).collect();
        let free = solve_renewal(&t, &scaled, 0.0).unwrap();
        for (x, y) in free.a.iter().zip(&a0) {
            assert!((x - y * c).norm() < 1e-12);
        }
        // With monitoring the map is not linear; A0 -> s A0 with p -> p / s
        // gives A -> s A.
        let s = 2.5;
        let a = solve_renewal(&t, &a0, 0.5).unwrap();
        let stretched: Vec<C64> = a0.iter().map(|z| z * s).collect();
        let b = solve_renewal(&t, &stretched, 0.5 / s).unwrap();
        for (x, y) in b.a.iter().zip(&a.a) {
            assert!((x - y * s).norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_mismatched_grids() {
        assert!(solve_renewal(&[0.0, 1.0], &[C64::new(1.0, 0.0)], 0.1).is_err());
        assert!(solve_renewal(&[0.0, 1.0, 3.0], &[C64::new(1.0, 0.0); 3], 0.1).is_err());
    }

    #[test]
    fn recurrence_arithmetic() {
        assert_eq!(expected_returns(0.0).unwrap(), Some(0.0));
        assert_eq!(expected_returns(0.5).unwrap(), Some(1.0));
        assert_eq!(expected_returns(1.0).unwrap(), None);
        assert!(expected_returns(1.5).is_err());
        assert!(expected_returns(-0.1).is_err());
        assert_eq!(return_probability_from(f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn criterion_examples() {
        assert_eq!(branching_criterion(2.0, 0.4).unwrap(), Branching::Subcritical);
        assert_eq!(branching_criterion(2.0, 0.5).unwrap(), Branching::Critical);
        assert_eq!(branching_criterion(3.0, 0.5).unwrap(), Branching::Supercritical);
        assert!(branching_criterion(-1.0, 0.5).is_err());
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut f = 1.0f64;
        for n in 1..30u32 {
            f *= n as f64;
            assert!((ln_gamma(n as f64 + 1.0) - f.ln()).abs() < 1e-12 * f.ln().max(1.0));
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_binomial(10, 3) - 120f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn tiny_correlation_length_keeps_one_site() {
        let s = config_entropy(&ConfigEntropyParams::new(1e-3, 50.0)).unwrap();
        assert!((s - 100f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn entropy_domain() {
        assert!(config_entropy(&ConfigEntropyParams::new(1.0, 0.4)).is_err());
        assert!(config_entropy(&ConfigEntropyParams::new(0.0, 10.0)).is_err());
    }
}
