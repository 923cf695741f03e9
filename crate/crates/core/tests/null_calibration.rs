//! Every test statistic, fed data drawn exactly from its own null, must
//! produce p-values that are uniform on [0, 1].

use pll_core::knn::lr_gap_test;
use pll_core::rvdist::{StreamKey, UniformStream};
use pll_core::verify::{contingency_chi_square, correlation_test, exponential_ks, ks_statistic, poisson_chi_square, spacings_with_overshoot};
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

const META_REPS: u64 = 5000;
const THRESHOLD: f64 = 0.03;

fn calibrate<F: Fn(&mut UniformStream) -> f64 + Sync>(seed: u64, test: F) -> f64 {
    let p: Vec<f64> = (0..META_REPS)
        .into_par_iter()
        .map(|m| test(&mut UniformStream::new(StreamKey::new(seed, m))))
        .collect();
    assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    ks_statistic(&p, |x| x.clamp(0.0, 1.0)).unwrap()
}

fn poisson_draws(s: &mut UniformStream, mean: f64, m: usize) -> Vec<usize> {
    let law = Poisson::new(mean).unwrap();
    (0..m).map(|_| law.sample(s) as usize).collect()
}

#[test]
fn poisson_chi_square_is_calibrated() {
    let d = calibrate(1, |s| {
        let counts: Vec<Vec<usize>> = poisson_draws(s, 1.0, 1000).into_iter().map(|c| vec![c]).collect();
        poisson_chi_square(&counts, &[1.0]).unwrap().1
    });
    assert!(d < THRESHOLD, "KS {d}");
}

#[test]
fn correlation_test_is_calibrated() {
    let d = calibrate(2, |s| {
        let x: Vec<f64> = poisson_draws(s, 1.0, 1000).into_iter().map(|c| c as f64).collect();
        let y: Vec<f64> = poisson_draws(s, 2.0, 1000).into_iter().map(|c| c as f64).collect();
        correlation_test(&x, &y).unwrap().1
    });
    assert!(d < THRESHOLD, "KS {d}");
}

#[test]
fn contingency_test_is_calibrated() {
    let d = calibrate(3, |s| {
        let x = poisson_draws(s, 1.0, 1000);
        let y = poisson_draws(s, 1.0, 1000);
        contingency_chi_square(&x, &y).unwrap().1
    });
    assert!(d < THRESHOLD, "KS {d}");
}

#[test]
fn spacing_test_is_calibrated() {
    let d = calibrate(4, |s| {
        let mut pooled = Vec::new();
        for _ in 0..300 {
            let mut t = 0.0;
            let mut times = Vec::new();
            while t <= 1.0 {
                t -= s.next_open01().ln();
                times.push(t);
            }
            pooled.extend(spacings_with_overshoot(&times, 1.0));
        }
        exponential_ks(&pooled).unwrap().1
    });
    assert!(d < THRESHOLD, "KS {d}");
}

#[test]
fn gap_test_is_calibrated() {
    let d = calibrate(5, |s| {
        let sample: Vec<f64> = (0..40).map(|_| s.next_open01()).collect();
        lr_gap_test(&sample, 4).unwrap().p_value
    });
    assert!(d < THRESHOLD, "KS {d}");
}
