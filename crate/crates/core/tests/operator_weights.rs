//! Operator-weight scaling from the free identity and Majorana trapping.

use impuritylab::freeprop::*;
use impuritylab::lattice::*;
use impuritylab::opdyn::*;

fn free_weight(len: usize, site: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let prop = SpectralPropagator::new(&build_hopping(&ChainSpec::new(len).unwrap())).unwrap();
    let edge = finite_size_time(len, site);
    let times = time_grid(edge, 0.01);
    let w = times
        .iter()
        .map(|&t| {
            let p = prop.element(site, site, t).norm_sqr();
            p * (1.0 - p)
        })
        .collect();
    (times, w, edge)
}

#[test]
fn boundary_weight_decays_with_the_boundary_exponent() {
    let (times, w, edge) = free_weight(40, 1);
    let fit = fit_power_law(&ReturnSeries::new(times, w).with_edge(edge), (1.0, edge), true).unwrap();
    assert!((fit.exponent + 3.0).abs() < 0.3, "{}", fit.exponent);
}

#[test]
fn bulk_weight_decays_with_the_bulk_exponent() {
    // too few maxima before reflection for the default fitter
    let (times, w, _) = free_weight(40, 20);
    let peaks: Vec<usize> = local_maxima(&w).into_iter().filter(|&k| times[k] >= 1.0).collect();
    assert!(peaks.len() >= 4);
    let x: Vec<f64> = peaks.iter().map(|&k| times[k].ln()).collect();
    let y: Vec<f64> = peaks.iter().map(|&k| w[k].ln()).collect();
    let (_, slope, _) = linear_regression(&x, &y);
    assert!((slope + 1.0).abs() < 0.3, "{slope}");
}

fn late_kitaev_weight(mu: f64) -> f64 {
    let len = 200;
    let h = build_kitaev(&ChainSpec::new(len).unwrap(), mu, 1.0);
    let edge = finite_size_time(len, 1);
    let times: Vec<f64> = time_grid(edge, 0.1).into_iter().filter(|&t| t >= edge / 2.0).collect();
    let w = majorana_free_evolve(&h, &MajoranaVector::creation(len, 1).unwrap(), 1, &times, None).unwrap();
    w.iter().map(|x| x.w()).sum::<f64>() / w.len() as f64
}

#[test]
fn boundary_mode_traps_weight_only_in_the_topological_phase() {
    assert!(late_kitaev_weight(1.6) > 0.05);
    assert!(late_kitaev_weight(1.8) > late_kitaev_weight(3.0) * 100.0);
    assert!(late_kitaev_weight(3.0) < 1e-3);
}
