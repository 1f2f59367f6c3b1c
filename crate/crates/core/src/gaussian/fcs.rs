//! Full counting statistics of the total particle number.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

/// Residual imaginary part tolerated in the inverse transform.
const IMAG_RESIDUE: f64 = 1e-8;
/// Deviation of the clipping renormalisation that flags an undersampled ensemble.
const RENORM_WARNING: f64 = 1e-3;

/// `θ_k = 2πk / M` for `k = 0..M`, with `M = len + 1`.
pub fn counting_angles(len: usize) -> Vec<f64> {
    let m = len + 1;
    (0..m).map(|k| 2.0 * PI * k as f64 / m as f64).collect()
}

/// `χ(θ_k) = ⟨e^{iθ_k N}⟩` sampled on [`counting_angles`].
#[derive(Clone, Debug, PartialEq)]
pub struct CountingFunction {
    pub thetas: Vec<f64>,
    pub values: Vec<C64>,
}

impl CountingFunction {
    /// Characteristic function of a state with exactly `n` particles.
    pub fn definite(len: usize, n: usize) -> Self {
        let thetas = counting_angles(len);
        let values = thetas.iter().map(|&t| C64::from_polar(1.0, t * n as f64)).collect();
        Self { thetas, values }
    }

    /// Pointwise average of several counting functions on the same grid.
    pub fn average<'a>(items: impl IntoIterator<Item = &'a CountingFunction>) -> Option<Self> {
        let mut iter = items.into_iter();
        let first = iter.next()?;
        let mut sum = first.values.clone();
        let mut count = 1usize;
        for cf in iter {
            assert_eq!(cf.values.len(), sum.len(), "CountingFunction::average: grid mismatch");
            for (s, v) in sum.iter_mut().zip(&cf.values) {
                *s += v;
            }
            count += 1;
        }
        for s in &mut sum {
            *s /= count as f64;
        }
        Some(Self { thetas: first.thetas.clone(), values: sum })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumberDistribution {
    /// `P(n)` for `n = 0..=L`.
    pub probs: Vec<f64>,
    /// Sum of the clipped distribution before renormalisation.
    pub raw_total: f64,
    /// Largest discarded imaginary part.
    pub max_imag: f64,
}

impl NumberDistribution {
    pub fn undersampled(&self) -> bool {
        (self.raw_total - 1.0).abs() > RENORM_WARNING
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }
}

/// Inverts `χ(θ_k)` by a discrete Fourier transform: negative values are
/// clipped to zero, then the distribution is renormalised to unit sum.
pub fn number_distribution(cf: &CountingFunction) -> NumberDistribution {
    let m = cf.values.len();
    let mut probs = Vec::with_capacity(m);
    let mut max_imag: f64 = 0.0;
    for n in 0..m {
        let mut acc = C64::new(0.0, 0.0);
        for (k, &chi) in cf.values.iter().enumerate() {
            let phase = -2.0 * PI * ((k * n) % m) as f64 / m as f64;
            acc += C64::from_polar(1.0, phase) * chi;
        }
        acc /= m as f64;
        max_imag = max_imag.max(acc.im.abs());
        probs.push(acc.re.max(0.0));
    }
    if max_imag > IMAG_RESIDUE {
        log::warn!("counting-statistics inversion left an imaginary residue of {max_imag:e}");
    }
    let raw_total: f64 = probs.iter().sum();
    if raw_total > 0.0 {
        for p in &mut probs {
            *p /= raw_total;
        }
    }
    let out = NumberDistribution { probs, raw_total, max_imag };
    if out.undersampled() {
        log::warn!("number distribution renormalised by {raw_total}; ensemble may be undersampled");
    }
    out
}
