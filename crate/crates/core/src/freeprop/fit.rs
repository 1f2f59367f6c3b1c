//! Power-law fits of oscillatory decays.

use crate::error::{Error, Result};

/// Minimum number of points a fit window must supply.
pub const MIN_FIT_POINTS: usize = 10;

/// A nonnegative series sampled on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Time after which finite-size reflections may contaminate the data.
    pub t_edge: Option<f64>,
}

impl ReturnSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(times.len(), values.len(), "ReturnSeries: times and values differ in length");
        Self { times, values, t_edge: None }
    }

    pub fn with_edge(mut self, t_edge: f64) -> Self {
        self.t_edge = Some(t_edge);
        self
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Indices of local maxima (see [`local_maxima`]).
    pub fn envelope_indices(&self) -> Vec<usize> {
        local_maxima(&self.values)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawFit {
    /// Slope of `log P` against `log t`, i.e. `-α`.
    pub exponent: f64,
    pub prefactor: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub points: usize,
    /// Set when the window extends past the series' finite-size time.
    pub beyond_edge: bool,
}

/// Indices of strict local maxima. A flat top counts once, at its first
/// index, provided both neighbours of the plateau are lower. Endpoints are
/// never maxima.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = values.len();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Ordinary least squares `y = a + b x`; returns `(a, b, r²)`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).min(1.0) };
    (intercept, slope, r2)
}

/// Fits `P(t) ≈ A t^b` over `window` by least squares in log-log space.
///
/// With `envelope` set the series is first reduced to its local maxima inside
/// the window, which suppresses Bessel-type oscillations.
pub fn fit_power_law(series: &ReturnSeries, window: (f64, f64), envelope: bool) -> Result<PowerLawFit> {
    let (t_min, t_max) = window;
    if !(t_min > 0.0 && t_max > t_min) {
        return Err(Error::InsufficientData(format!("invalid fit window ({t_min}, {t_max})")));
    }
    let inside = |i: &usize| series.times[*i] >= t_min && series.times[*i] <= t_max;
    let idx: Vec<usize> = if envelope {
        series.envelope_indices().into_iter().filter(inside).collect()
    } else {
        (0..series.len()).filter(inside).collect()
    };
    let usable: Vec<usize> = idx.into_iter().filter(|&i| series.values[i] > 0.0).collect();
    if usable.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} usable points in window ({t_min}, {t_max}), need {MIN_FIT_POINTS}",
            usable.len()
        )));
    }
    let x: Vec<f64> = usable.iter().map(|&i| series.times[i].ln()).collect();
    let y: Vec<f64> = usable.iter().map(|&i| series.values[i].ln()).collect();
    let (a, b, r2) = linear_regression(&x, &y);
    let beyond_edge = series.t_edge.is_some_and(|edge| t_max > edge);
    if beyond_edge {
        log::warn!(
            "fit window ends at t = {t_max} beyond the finite-size time {:.3}",
            series.t_edge.unwrap_or(f64::NAN)
        );
    }
    Ok(PowerLawFit { exponent: b, prefactor: a.exp(), window, r_squared: r2, points: usable.len(), beyond_edge })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
        let n = ((t1 - t0) / dt).round() as usize;
        (0..=n).map(|k| t0 + k as f64 * dt).collect()
    }

    #[test]
    fn exact_power_law() {
        let t = grid(1.0, 100.0, 0.5);
        let p = t.iter().map(|x| x.powf(-2.0)).collect();
        let fit = fit_power_law(&ReturnSeries::new(t, p), (2.0, 90.0), false).unwrap();
        assert!((fit.exponent + 2.0).abs() < 0.01);
        assert!(fit.r_squared > 0.9999);
    }

    #[test]
    fn too_few_points() {
        let t = grid(1.0, 5.0, 1.0);
        let p = t.iter().map(|x| 1.0 / x).collect();
        assert!(matches!(fit_power_law(&ReturnSeries::new(t, p), (1.0, 5.0), false), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn maxima_with_plateaus() {
        assert_eq!(local_maxima(&[0.0, 1.0, 0.0, 2.0, 2.0, 1.0, 3.0]), vec![1, 3]);
        assert_eq!(local_maxima(&[0.0, 1.0, 1.0, 2.0, 0.0]), vec![3]);
        assert!(local_maxima(&[3.0, 2.0, 1.0]).is_empty());
    }

    #[test]
    fn warns_past_edge() {
        let t = grid(1.0, 100.0, 0.5);
        let p = t.iter().map(|x| x.powf(-1.0)).collect();
        let s = ReturnSeries::new(t, p).with_edge(50.0);
        assert!(fit_power_law(&s, (2.0, 90.0), false).unwrap().beyond_edge);
        assert!(!fit_power_law(&s, (2.0, 40.0), false).unwrap().beyond_edge);
    }

    proptest! {
        #[test]
        fn scale_invariance(c in 1e-6f64..1e6) {
            let t = grid(1.0, 60.0, 0.25);
            let p: Vec<f64> = t.iter().map(|x| (1.0 + (2.0 * x).cos().powi(2)) / x.powi(3)).collect();
            let scaled: Vec<f64> = p.iter().map(|v| v * c).collect();
            let a = fit_power_law(&ReturnSeries::new(t.clone(), p), (5.0, 55.0), true).unwrap();
            let b = fit_power_law(&ReturnSeries::new(t, scaled), (5.0, 55.0), true).unwrap();
            prop_assert!((a.exponent - b.exponent).abs() < 1e-12);
        }
    }
}
