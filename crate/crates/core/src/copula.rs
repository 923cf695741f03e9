//! Bivariate normal copula: sampling, upper-orthant tail probabilities, the
//! tail exponent `2 / (1 + ρ)` and the scaled joint-extremes process at the
//! corner `(1, 1)`.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::epp::{EppError, OrthantPoint, ScaledProcessD};
use crate::quadrature::{gauss_kronrod, QuadratureError};
use crate::rvdist::{StreamKey, UniformStream};
use crate::special::{normal_pdf, normal_quantile, normal_sf};

#[derive(Debug, Error)]
pub enum CopulaError {
    #[error("correlation {0} outside (0, 1]")]
    InvalidRho(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Process(#[from] EppError),
}

pub type Result<T> = std::result::Result<T, CopulaError>;

/// Bivariate normal copula with correlation `ρ ∈ (0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCopula")]
pub struct NormalCopula {
    rho: f64,
}

#[derive(Deserialize)]
struct RawCopula {
    rho: f64,
}

impl TryFrom<RawCopula> for NormalCopula {
    type Error = CopulaError;

    fn try_from(raw: RawCopula) -> Result<Self> {
        Self::new(raw.rho)
    }
}

impl NormalCopula {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(CopulaError::InvalidRho(rho));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `2 / (1 + ρ)`.
    pub fn tail_exponent(&self) -> f64 {
        2.0 / (1.0 + self.rho)
    }

    /// `a_n = n^{-(1+ρ)/2}`.
    pub fn extremes_scaling(&self, n: usize) -> f64 {
        (n as f64).powf(-(1.0 + self.rho) / 2.0)
    }

    fn residual_sd(&self) -> f64 {
        (1.0 - self.rho * self.rho).max(0.0).sqrt()
    }
}

/// `n` pairs with uniform margins, deterministic in `(seed, n)`.
pub fn sample_copula(cop: &NormalCopula, seed: u64, n: usize) -> Vec<[f64; 2]> {
    sample_copula_stream(cop, StreamKey::new(seed, 0), n)
}

pub fn sample_copula_stream(cop: &NormalCopula, key: StreamKey, n: usize) -> Vec<[f64; 2]> {
    let mut stream = UniformStream::new(key);
    let sd = cop.residual_sd();
    (0..n)
        .map(|_| {
            let z1 = normal_quantile(stream.next_open01());
            let e = normal_quantile(stream.next_open01());
            if cop.rho == 1.0 {
                let u = 1.0 - normal_sf(z1);
                [u, u]
            } else {
                let z2 = cop.rho * z1 + sd * e;
                [1.0 - normal_sf(z1), 1.0 - normal_sf(z2)]
            }
        })
        .collect()
}

/// `P(U1 > 1 - x t1, U2 > 1 - x t2)`.
pub fn joint_tail(cop: &NormalCopula, x: f64, t1: f64, t2: f64) -> Result<f64> {
    if !(x >= 0.0 && t1 >= 0.0 && t2 >= 0.0) {
        return Err(CopulaError::Domain(format!("x = {x}, t = ({t1}, {t2}) must be nonnegative")));
    }
    let (p1, p2) = (x * t1, x * t2);
    if p1 > 1.0 + 1e-12 || p2 > 1.0 + 1e-12 {
        return Err(CopulaError::Domain(format!("x t = ({p1}, {p2}) exceeds 1")));
    }
    // order the margins so the result is exactly symmetric
    let (small, large) = if p1 <= p2 { (p1, p2.min(1.0)) } else { (p2, p1.min(1.0)) };
    if small <= 0.0 {
        return Ok(0.0);
    }
    if large >= 1.0 {
        return Ok(small);
    }
    if cop.rho == 1.0 {
        return Ok(small);
    }
    upper_orthant(cop.rho, -normal_quantile(small), -normal_quantile(large))
}

/// `P(Z1 > h, Z2 > k)` for a standard bivariate normal with correlation
/// `ρ < 1`, as `∫_h^∞ φ(s) Φ̄((k - ρ s) / √(1 - ρ²)) ds`.
fn upper_orthant(rho: f64, h: f64, k: f64) -> Result<f64> {
    let sd = (1.0 - rho * rho).sqrt();
    let top = h.max(0.0) + 12.0;
    let f = |s: f64| normal_pdf(s) * normal_sf((k - rho * s) / sd);
    Ok(gauss_kronrod(f, h, top, 1e-300, 1e-12, 4000)?.value)
}

/// Fitted tail exponent and normalised tail-law shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailLawEstimate {
    pub exponent: f64,
    /// `(t1, t2, W(t1, t2))` with `W = P(t1, t2) / P(1, 1)` at the smallest x.
    pub w_grid: Vec<(f64, f64, f64)>,
    pub x_range: (f64, f64),
}

/// Least-squares slope of `log P(x; 1, 1)` against `log x`, plus the ratios
/// `P(x; t1, t2) / P(x; 1, 1)` at the smallest `x`.
pub fn fit_tail_law(cop: &NormalCopula, x_grid: &[f64], t_grid: &[[f64; 2]]) -> Result<TailLawEstimate> {
    let mut xs: Vec<f64> = x_grid.to_vec();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 2 {
        return Err(CopulaError::Domain("the fit needs at least two distinct x values".into()));
    }
    if xs[0] <= 0.0 {
        return Err(CopulaError::Domain(format!("x grid must be positive, got {}", xs[0])));
    }
    let pts = xs
        .iter()
        .map(|&x| Ok((x.ln(), joint_tail(cop, x, 1.0, 1.0)?.ln())))
        .collect::<Result<Vec<_>>>()?;
    let m = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / m, pts.iter().map(|p| p.1).sum::<f64>() / m);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let x0 = xs[0];
    let base = joint_tail(cop, x0, 1.0, 1.0)?;
    let w_grid = t_grid
        .iter()
        .map(|t| {
            let w = if t[0] == 1.0 && t[1] == 1.0 { 1.0 } else { joint_tail(cop, x0, t[0], t[1])? / base };
            Ok((t[0], t[1], w))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TailLawEstimate { exponent: sxy / sxx, w_grid, x_range: (x0, *xs.last().unwrap()) })
}

/// Limit constant `P(x; 1, 1) / x^{2/(1+ρ)}` evaluated at a small `x`.
pub fn tail_constant(cop: &NormalCopula, x: f64) -> Result<f64> {
    Ok(joint_tail(cop, x, 1.0, 1.0)? / x.powf(cop.tail_exponent()))
}

/// Scaled joint extremes `a_n^{-1} (Y_i - (1, 1))` of a full sample; only
/// the `(-, -)` orthant is populated.
pub fn extremes_process(cop: &NormalCopula, seed: u64, n: usize) -> Result<ScaledProcessD> {
    if n == 0 {
        return Err(CopulaError::Domain("n must be at least 1".into()));
    }
    let a = cop.extremes_scaling(n);
    let sample: Vec<Vec<f64>> = sample_copula(cop, seed, n).into_iter().map(|p| p.to_vec()).collect();
    Ok(ScaledProcessD::new(vec![1.0, 1.0], vec![a; 4], &sample)?)
}

/// Same law as [`extremes_process`] restricted to the scaled box
/// `[-extent, 0]²`, without drawing the bulk of the sample.
///
/// The number of draws with `1 - U1 ≤ a_n · extent` is binomial; for each of
/// them `1 - U1` is uniform below the threshold and `Z2` follows from the
/// conditional normal law. Draws whose second coordinate falls outside the
/// box are discarded.
pub fn extremes_window(cop: &NormalCopula, key: StreamKey, n: usize, extent: f64) -> Result<ScaledProcessD> {
    if n == 0 || !(extent > 0.0) {
        return Err(CopulaError::Domain(format!("need n ≥ 1 and a positive extent, got {n}, {extent}")));
    }
    let a = cop.extremes_scaling(n);
    let w = (a * extent).min(1.0);
    let mut stream = UniformStream::new(key);
    let m = Binomial::new(n as u64, w).map_err(|e| CopulaError::Domain(e.to_string()))?.sample(&mut stream) as usize;
    let sd = cop.residual_sd();
    let mut points = Vec::new();
    for i in 0..m {
        let tail1 = w * stream.next_open01();
        let e = normal_quantile(stream.next_open01());
        let tail2 = if cop.rho == 1.0 {
            tail1
        } else {
            let z1 = -normal_quantile(tail1);
            normal_sf(cop.rho * z1 + sd * e)
        };
        if tail2 <= w {
            points.push(OrthantPoint::new(vec![-tail1 / a, -tail2 / a], i));
        }
    }
    Ok(ScaledProcessD::from_window(vec![1.0, 1.0], vec![a; 4], n, points, vec![(-extent, 0.0); 2])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epp::{OrthantBox, PointCount};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cop(rho: f64) -> NormalCopula {
        NormalCopula::new(rho).unwrap()
    }

    #[test]
    fn rejects_nonpositive_rho() {
        assert!(NormalCopula::new(0.0).is_err());
        assert!(NormalCopula::new(-0.3).is_err());
        assert!(NormalCopula::new(1.2).is_err());
        assert!(serde_json::from_str::<NormalCopula>(r#"{"rho": -1}"#).is_err());
    }

    #[test]
    fn orthant_formula_at_the_median() {
        for rho in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let p = joint_tail(&cop(rho), 0.5, 1.0, 1.0).unwrap();
            assert!((p - (0.25 + rho.asin() / (2.0 * std::f64::consts::PI))).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_cases() {
        let c = cop(0.5);
        assert_relative_eq!(joint_tail(&c, 1.0, 1.0, 0.3).unwrap(), 0.3);
        assert_eq!(joint_tail(&c, 0.1, 0.0, 1.0).unwrap(), 0.0);
        for (x, t1, t2) in [(0.01, 1.0, 2.0), (0.3, 0.5, 1.5), (1e-4, 1.0, 1.0)] {
            let p = joint_tail(&cop(1e-12), x, t1, t2).unwrap();
            assert!((p - x * t1 * x * t2).abs() < 1e-9);
            assert_eq!(joint_tail(&cop(1.0), x, t1, t2).unwrap(), x * t1.min(t2));
        }
    }

    #[test]
    fn exponent_fits() {
        let xs: Vec<f64> = (0..=8).map(|i| 1e-4 * 10f64.powf(i as f64 / 4.0)).collect();
        for rho in [0.25, 0.5, 0.75, 1.0] {
            let c = cop(rho);
            let fit = fit_tail_law(&c, &xs, &[[1.0, 1.0], [0.5, 2.0]]).unwrap();
            assert!((fit.exponent / c.tail_exponent() - 1.0).abs() < 0.05, "rho {rho}: {}", fit.exponent);
            assert_eq!(fit.w_grid[0].2, 1.0);
        }
        assert!(fit_tail_law(&cop(0.5), &[0.01, 0.01], &[]).is_err());
    }

    #[test]
    fn marginals_and_correlation() {
        let c = cop(0.5);
        let n = 100_000;
        let s = sample_copula(&c, 11, n);
        for j in 0..2 {
            let mut v: Vec<f64> = s.iter().map(|p| p[j]).collect();
            v.sort_by(f64::total_cmp);
            let d = v
                .iter()
                .enumerate()
                .map(|(i, &x)| (x - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - x))
                .fold(0.0, f64::max);
            assert!(d < 0.01, "KS {d}");
        }
        let z: Vec<(f64, f64)> = s.iter().map(|p| (normal_quantile(p[0]), normal_quantile(p[1]))).collect();
        let r = z.iter().map(|(a, b)| a * b).sum::<f64>() / n as f64;
        // var of the product of correlated standard normals is 1 + ρ²
        assert!((r - 0.5).abs() < 3.0 * (1.25f64 / n as f64).sqrt());
        let same = sample_copula(&cop(1.0), 3, 100);
        assert!(same.iter().all(|p| (p[0] - p[1]).abs() < 1e-12));
        assert_eq!(sample_copula(&c, 11, 10), s[..10].to_vec());
    }

    #[test]
    fn empirical_tail_frequency() {
        let c = cop(0.5);
        let n = 1_000_000;
        let p = joint_tail(&c, 0.05, 1.0, 1.0).unwrap();
        let hits = sample_copula(&c, 5, n).iter().filter(|u| u[0] > 0.95 && u[1] > 0.95).count();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 3.0 * se);
    }

    #[test]
    fn full_extremes_lie_in_negative_orthant() {
        let p = extremes_process(&cop(0.5), 1, 5000).unwrap();
        assert!(p.points().iter().all(|q| q.coords.iter().all(|&c| c <= 0.0)));
    }

    /// Windowed and full extremes share the law of the count in [-1, 0]².
    #[test]
    fn windowed_extremes_match_full_sampling() {
        let c = cop(0.5);
        let n = 2000;
        let reps = 400;
        let unit = OrthantBox::from_origin(&[-1.0, -1.0]).unwrap();
        let full: Vec<usize> = (0..reps).map(|r| extremes_process(&c, 1000 + r, n).unwrap().count_in(&unit).unwrap()).collect();
        let win: Vec<usize> = (0..reps)
            .map(|r| extremes_window(&c, StreamKey::new(9, r), n, 1.0).unwrap().count_in(&unit).unwrap())
            .collect();
        let mean = |v: &[usize]| v.iter().sum::<usize>() as f64 / v.len() as f64;
        let expect = n as f64 * joint_tail(&c, c.extremes_scaling(n), 1.0, 1.0).unwrap();
        for m in [mean(&full), mean(&win)] {
            assert!((m - expect).abs() < 4.0 * (expect / reps as f64).sqrt(), "{m} vs {expect}");
        }
        let p = extremes_window(&c, StreamKey::new(9, 0), n, 1.0).unwrap();
        assert!(p.count_in(&OrthantBox::from_origin(&[-2.0, -1.0]).unwrap()).is_err());
    }

    #[test]
    fn windowed_extremes_stay_in_box() {
        let c = cop(0.25);
        let p = extremes_window(&c, StreamKey::new(4, 4), 10_000_000, 50.0).unwrap();
        let mut v: Vec<f64> = p.points().iter().map(|q| -q.coords[0] / 50.0).collect();
        assert!(v.len() > 100);
        v.sort_by(f64::total_cmp);
        assert!(v.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    proptest! {
        #[test]
        fn symmetric_monotone_and_bounded(rho in 0.01f64..0.99, x in 1e-4f64..0.2, t1 in 0.0f64..2.0, t2 in 0.0f64..2.0, dt in 0.01f64..1.0) {
            let c = cop(rho);
            let p = joint_tail(&c, x, t1, t2).unwrap();
            prop_assert_eq!(p, joint_tail(&c, x, t2, t1).unwrap());
            let (p1, p2) = (x * t1, x * t2);
            prop_assert!(p >= (p1 + p2 - 1.0).max(0.0) - 1e-15);
            prop_assert!(p <= p1.min(p2) + 1e-15);
            prop_assert!(p >= p1 * p2 - 1e-15);
            prop_assert!(joint_tail(&c, x, t1 + dt, t2).unwrap() >= p);
            prop_assert!(joint_tail(&c, x * 1.1, t1, t2).unwrap() >= p);
        }
    }
}
