//! Nearest-neighbour density estimation and the likelihood-ratio gap test.
//!
//! Around a point `t` where the density `f` is positive and continuous, the
//! `2k` spacings between `t` and its `k` nearest sample points on each side
//! are asymptotically i.i.d. exponential with rate `n f(t)`. Hence the span
//! `[t]^{+k} - [t]^{-k}` is asymptotically `Gamma(2k, n f(t))` and
//!
//! ```text
//! f̂_k(t) = ((2k - 1) / n) / ([t]^{+k} - [t]^{-k}),   f̂_k / f → (2k - 1) InvGamma(2k, 1).
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rvdist::SampleView;
use crate::special::{gamma_p, gamma_p_inv, gamma_q};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KnnError {
    #[error("insufficient-neighbours: t = {t} has {below} points below and {above} at or above, k = {k}")]
    InsufficientNeighbours { t: f64, k: usize, below: usize, above: usize },
    #[error("degenerate-span: neighbours of t = {t} coincide")]
    DegenerateSpan { t: f64 },
    #[error("invalid-ratios: statistic {statistic} is outside (0, 1]")]
    InvalidRatios { statistic: f64 },
    #[error("sample must be sorted and strictly increasing (index {index})")]
    Unsorted { index: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("estimate at t = {t} failed: {source}")]
    AtPoint {
        t: f64,
        #[source]
        source: Box<KnnError>,
    },
}

pub type Result<T> = std::result::Result<T, KnnError>;

/// The `k` nearest sample points strictly below `t` (nearest first) and the
/// `k` nearest at or above `t` (nearest first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighbourSpan {
    pub t: f64,
    pub k: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n: usize,
}

impl NeighbourSpan {
    /// `[t]^{+k} - [t]^{-k}`.
    pub fn width(&self) -> f64 {
        self.upper[self.k - 1] - self.lower[self.k - 1]
    }
}

fn check_sorted(sample: &[f64]) -> Result<()> {
    match sample.windows(2).position(|w| !(w[0] < w[1])) {
        Some(i) => Err(KnnError::Unsorted { index: i + 1 }),
        None => Ok(()),
    }
}

fn span_from_sorted(sample: &[f64], t: f64, k: usize, n: usize) -> Result<NeighbourSpan> {
    if k == 0 {
        return Err(KnnError::Domain("k must be at least 1".into()));
    }
    let split = sample.partition_point(|&y| y < t);
    let (below, above) = (split, sample.len() - split);
    if below < k || above < k {
        return Err(KnnError::InsufficientNeighbours { t, k, below, above });
    }
    Ok(NeighbourSpan {
        t,
        k,
        lower: sample[split - k..split].iter().rev().copied().collect(),
        upper: sample[split..split + k].to_vec(),
        n,
    })
}

/// Span of a fully known sample (sorted, strictly increasing).
pub fn neighbour_span(sample: &[f64], t: f64, k: usize) -> Result<NeighbourSpan> {
    check_sorted(sample)?;
    span_from_sorted(sample, t, k, sample.len())
}

/// Span from any sample view. The neighbours are taken among the resolved
/// draws and then confirmed against the view's counts, so a windowed sample
/// must have resolved the `k` nearest draws on each side.
pub fn neighbour_span_in<V: SampleView>(view: &V, t: f64, k: usize) -> Result<NeighbourSpan> {
    let resolved = view.resolved_values();
    let span = span_from_sorted(&resolved, t, k, view.size())?;
    let (lo, hi) = (span.lower[k - 1], span.upper[k - 1]);
    match view.count_in(lo, hi) {
        Some(c) if c == 2 * k => Ok(span),
        _ => Err(KnnError::Domain(format!("the view does not resolve the {k} nearest draws around {t}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Naive,
    Umvu,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub t: f64,
    pub value: f64,
    pub k: usize,
    pub n: usize,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci: Option<ConfidenceInterval>,
}

fn shared_estimate(span: &NeighbourSpan, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(KnnError::Domain("n must be positive".into()));
    }
    let w = span.width();
    if !(w > 0.0) {
        return Err(KnnError::DegenerateSpan { t: span.t });
    }
    Ok((2 * span.k - 1) as f64 / n as f64 / w)
}

/// `(1/n) / ([t]^+ - [t]^-)`; the ratio to `f(t)` is asymptotically
/// `InvGamma(2, 1)`: mode `1/3`, mean `1`, infinite variance.
pub fn naive_estimate(span: &NeighbourSpan, n: usize) -> Result<DensityEstimate> {
    if span.k != 1 {
        return Err(KnnError::Domain(format!("naive estimator needs k = 1, got {}", span.k)));
    }
    Ok(DensityEstimate { t: span.t, value: shared_estimate(span, n)?, k: 1, n, method: Method::Naive, ci: None })
}

/// Asymptotically unbiased minimum-variance estimator, optionally with an
/// equal-tailed interval from the pivot `f̂_k / f = (2k - 1) / Gamma(2k, 1)`.
pub fn umvu_estimate(span: &NeighbourSpan, n: usize, level: Option<f64>) -> Result<DensityEstimate> {
    if span.k <= 1 {
        return Err(KnnError::Domain(format!("the unbiased estimator needs k > 1, got {}", span.k)));
    }
    let value = shared_estimate(span, n)?;
    let ci = match level {
        None => None,
        Some(l) if l > 0.0 && l < 1.0 => {
            let shape = (2 * span.k) as f64;
            let norm = (2 * span.k - 1) as f64;
            Some(ConfidenceInterval {
                level: l,
                lower: value * gamma_p_inv(shape, 0.5 * (1.0 - l)) / norm,
                upper: value * gamma_p_inv(shape, 0.5 * (1.0 + l)) / norm,
            })
        }
        Some(l) => return Err(KnnError::Domain(format!("confidence level {l} outside (0, 1)"))),
    };
    Ok(DensityEstimate { t: span.t, value, k: span.k, n, method: Method::Umvu, ci })
}

/// Inverse-Gamma law with density `β^α / Γ(α) x^{-α-1} e^{-β/x}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseGammaLaw {
    pub shape: f64,
    pub scale: f64,
}

impl InverseGammaLaw {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0) {
            return Err(KnnError::Domain(format!("inverse gamma needs positive shape and scale, got {shape}, {scale}")));
        }
        Ok(Self { shape, scale })
    }

    /// Law of `f̂_k / f` in the limit, before the `(2k - 1)` factor.
    pub fn for_k(k: usize) -> Self {
        Self { shape: (2 * k) as f64, scale: 1.0 }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        invgamma_cdf(self, x)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        invgamma_quantile(self, p)
    }

    pub fn mode(&self) -> f64 {
        self.scale / (self.shape + 1.0)
    }

    pub fn mean(&self) -> Option<f64> {
        (self.shape > 1.0).then(|| self.scale / (self.shape - 1.0))
    }

    pub fn variance(&self) -> Option<f64> {
        let a = self.shape;
        (a > 2.0).then(|| self.scale * self.scale / ((a - 1.0) * (a - 1.0) * (a - 2.0)))
    }
}

/// `Q(α, β/x)`; zero for `x ≤ 0`.
pub fn invgamma_cdf(law: &InverseGammaLaw, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    gamma_q(law.shape, law.scale / x)
}

/// Inverse of [`invgamma_cdf`] for `p ∈ (0, 1)`.
pub fn invgamma_quantile(law: &InverseGammaLaw, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(KnnError::Domain(format!("probability {p} outside (0, 1)")));
    }
    // Q(α, β/x) = p  ⇔  P(α, β/x) = 1 - p
    Ok(law.scale / gamma_p_inv(law.shape, 1.0 - p))
}

/// `Σ g(t_i) f̂_k(n, t_i)` over distinct points; with `k = 1` the naive
/// estimator is used.
pub fn estimate_integral<G: Fn(f64) -> f64>(sample: &[f64], points: &[f64], g: G, k: usize, n: usize) -> Result<f64> {
    check_sorted(sample)?;
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(KnnError::Domain("estimation points must be pairwise distinct".into()));
    }
    points.iter().try_fold(0.0, |acc, &t| {
        let at = |e: KnnError| KnnError::AtPoint { t, source: Box::new(e) };
        let span = span_from_sorted(sample, t, k, n).map_err(at)?;
        let f = shared_estimate(&span, n).map_err(at)?;
        Ok(acc + g(t) * f)
    })
}

/// Outcome of the likelihood-ratio gap test at the left support edge 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapTest {
    pub k: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// Tests `F(t) ~ ω t` near 0 against a gap at 0 using the `k` smallest
/// points at or above 0: `T = Π_{i<k} Y_(i) / Y_(k)`. Under the null the
/// ratios are ordered uniforms, so `-log T ~ Gamma(k - 1, 1)`; large `T`
/// (points pushed away from 0) rejects.
pub fn lr_gap_test(sample: &[f64], k: usize) -> Result<GapTest> {
    if k < 2 {
        return Err(KnnError::Domain(format!("the gap test needs k ≥ 2, got {k}")));
    }
    let mut above: Vec<f64> = sample.iter().copied().filter(|&y| y >= 0.0).collect();
    if above.len() < k {
        return Err(KnnError::InsufficientNeighbours { t: 0.0, k, below: 0, above: above.len() });
    }
    above.select_nth_unstable_by(k - 1, f64::total_cmp);
    let mut smallest = above[..k].to_vec();
    smallest.sort_by(f64::total_cmp);
    gap_statistic(&smallest)
}

/// [`lr_gap_test`] on a sample view, which must resolve the `k` smallest
/// draws at or above 0.
pub fn lr_gap_test_in<V: SampleView>(view: &V, k: usize) -> Result<GapTest> {
    let resolved = view.resolved_values();
    let start = resolved.partition_point(|&y| y < 0.0);
    let smallest = resolved[start..].iter().take(k).copied().collect::<Vec<_>>();
    if smallest.len() == k && view.count_in(0.0, smallest[k - 1]) != Some(k) {
        return Err(KnnError::Domain(format!("the view does not resolve the {k} smallest draws above 0")));
    }
    lr_gap_test(&smallest, k)
}

fn gap_statistic(smallest: &[f64]) -> Result<GapTest> {
    let k = smallest.len();
    let top = smallest[k - 1];
    let log_t: f64 = smallest[..k - 1].iter().map(|y| (y / top).ln()).sum();
    let statistic = log_t.exp();
    if !(statistic > 0.0 && statistic <= 1.0) || log_t.is_nan() {
        return Err(KnnError::InvalidRatios { statistic });
    }
    Ok(GapTest { k, statistic, p_value: gamma_p((k - 1) as f64, -log_t) })
}
