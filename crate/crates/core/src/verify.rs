//! Monte Carlo replication engine and goodness-of-fit tests for the Poisson
//! limits of the scaled processes.
//!
//! Replication `r` of a configuration with base seed `s` always draws from
//! stream `(s, r)`, replications run in parallel, and every reduction walks
//! the per-replication results in index order, so a report is a pure
//! function of its configuration.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::epp::{EppError, Frame, OrthantBox, PointCount, ScaleRule, ScaledProcess1D};
use crate::rvdist::{Family, ModelError, RegVarSpec, SampleView, StreamKey, UnivariateModel, WindowRequest, WindowedSample};
use crate::special::{gamma_q, ks_pvalue, ln_gamma, normal_sf};

pub use crate::special::{gamma_p as gamma_cdf, gamma_p_inv as gamma_quantile};

/// Significance level behind [`FitReport::decision`].
pub const REPORT_LEVEL: f64 = 0.05;
/// Minimum expected count per chi-square cell.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Process(#[from] EppError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unpooled-cells: fewer than two cells remain with expected count ≥ {MIN_EXPECTED}")]
    UnpooledCells,
    #[error("degenerate-table: {0}")]
    DegenerateTable(String),
    #[error("insufficient-points: {found} pooled values, at least {needed} needed")]
    InsufficientPoints { found: usize, needed: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no limit measure is known at anchor {0}")]
    NoLimit(f64),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output failed: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, VerifyError>;

/// Model, quantile and scaling rule of a simulated process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: Family,
    pub q: f64,
    #[serde(default)]
    pub rule: ScaleRule,
}

impl Scenario {
    pub fn new(model: Family, q: f64) -> Self {
        Self { model, q, rule: ScaleRule::Quantile }
    }

    pub fn build(&self) -> Result<UnivariateModel> {
        Ok(UnivariateModel::from_family(self.model.clone())?)
    }

    pub fn frame(&self, model: &UnivariateModel, n: usize) -> Result<Frame> {
        Ok(Frame::resolve(model, self.q, n, self.rule)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicationConfig {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub scenario: Scenario,
}

impl ReplicationConfig {
    pub fn new(n: usize, reps: usize, seed: u64, scenario: Scenario) -> Result<Self> {
        let c = Self { n, reps, seed, scenario };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(VerifyError::Config("n must be at least 1".into()));
        }
        if self.reps == 0 {
            return Err(VerifyError::Config("reps must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.scenario.q) {
            return Err(VerifyError::Config(format!("q = {} outside [0, 1]", self.scenario.q)));
        }
        Ok(())
    }

    pub fn stream(&self, r: usize) -> StreamKey {
        StreamKey::new(self.seed, r as u64)
    }
}

/// Runs `f` once per replication on its own stream; results come back in
/// replication order.
pub fn replicate<T, F>(config: &ReplicationConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(StreamKey) -> Result<T> + Sync,
{
    config.validate()?;
    (0..config.reps).into_par_iter().map(|r| f(config.stream(r))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

impl Decision {
    pub fn at(p_value: f64, level: f64) -> Self {
        if p_value < level {
            Decision::Reject
        } else {
            Decision::Accept
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub reps: usize,
    pub n: usize,
    pub decision: Decision,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
}

impl FitReport {
    pub fn new(test_name: &str, statistic: f64, p_value: f64, config: &ReplicationConfig) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self {
            test_name: test_name.to_string(),
            statistic,
            p_value,
            reps: config.reps,
            n: config.n,
            decision: Decision::at(p_value, REPORT_LEVEL),
            seed: config.seed,
            details: BTreeMap::new(),
        }
    }

    pub fn with_detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Summary table `test_name,statistic,p_value,reps,n,decision,seed`.
pub fn write_summary_csv<W: Write>(reports: &[FitReport], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["test_name", "statistic", "p_value", "reps", "n", "decision", "seed"])?;
    for r in reports {
        let decision = match r.decision {
            Decision::Accept => "accept",
            Decision::Reject => "reject",
        };
        w.write_record([
            r.test_name.clone(),
            r.statistic.to_string(),
            r.p_value.to_string(),
            r.reps.to_string(),
            r.n.to_string(),
            decision.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Statistics on plain data

/// `sup |F_n - F|` of the sample against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    if sample.is_empty() {
        return Err(VerifyError::Domain("KS statistic of an empty sample".into()));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() as f64;
    Ok(s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / m).max((i + 1) as f64 / m - c)
        })
        .fold(0.0, f64::max))
}

/// Pearson statistic and its upper-tail p-value with `len - 1` degrees of
/// freedom.
pub fn chi_square(observed: &[f64], expected: &[f64]) -> Result<(f64, f64)> {
    chi_square_df(observed, expected, observed.len().saturating_sub(1))
}

fn chi_square_df(observed: &[f64], expected: &[f64], df: usize) -> Result<(f64, f64)> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(VerifyError::Domain(format!("{} observed vs {} expected cells", observed.len(), expected.len())));
    }
    if expected.iter().any(|&e| !(e > 0.0)) {
        return Err(VerifyError::Domain("expected counts must be positive".into()));
    }
    if df == 0 {
        return Err(VerifyError::Domain("zero degrees of freedom".into()));
    }
    let stat: f64 = observed.iter().zip(expected).map(|(o, e)| (o - e) * (o - e) / e).sum();
    Ok((stat, gamma_q(df as f64 / 2.0, stat / 2.0)))
}

/// Merges cells until every expectation reaches [`MIN_EXPECTED`]: first the
/// last cell into its neighbour, from the tail inward, then the first cell
/// into its neighbour.
pub fn merge_cells(mut observed: Vec<f64>, mut expected: Vec<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    while expected.len() > 1 && *expected.last().unwrap() < MIN_EXPECTED {
        let (o, e) = (observed.pop().unwrap(), expected.pop().unwrap());
        *observed.last_mut().unwrap() += o;
        *expected.last_mut().unwrap() += e;
    }
    while expected.len() > 1 && expected[0] < MIN_EXPECTED {
        let (o, e) = (observed.remove(0), expected.remove(0));
        observed[0] += o;
        expected[0] += e;
    }
    if expected.len() < 2 || expected.iter().any(|&e| e < MIN_EXPECTED) {
        return Err(VerifyError::UnpooledCells);
    }
    Ok((observed, expected))
}

fn poisson_pmf(mean: f64, j: usize) -> f64 {
    if mean == 0.0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    let j = j as f64;
    (j * mean.ln() - mean - ln_gamma(j + 1.0)).exp()
}

/// Chi-square fit of counts to Poisson laws: `counts[r][b]` is replication
/// `r`'s count in box `b`, whose limit mean is `means[b]`. All counts are
/// pooled into one histogram with expected cells `Σ_b R pmf(j; means[b])`;
/// the last cell collects the upper tail.
pub fn poisson_chi_square(counts: &[Vec<usize>], means: &[f64]) -> Result<(f64, f64, usize)> {
    if counts.is_empty() || means.is_empty() {
        return Err(VerifyError::Domain("no counts to test".into()));
    }
    if counts.iter().any(|c| c.len() != means.len()) {
        return Err(VerifyError::Domain("every replication needs one count per mean".into()));
    }
    if means.iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
        return Err(VerifyError::Domain(format!("invalid Poisson means {means:?}")));
    }
    let top = counts.iter().flatten().copied().max().unwrap_or(0);
    let reps = counts.len() as f64;
    let mut observed = vec![0.0; top + 1];
    for &c in counts.iter().flatten() {
        observed[c] += 1.0;
    }
    let mut expected = vec![0.0; top + 1];
    for &m in means {
        let mut cum = 0.0;
        for (j, e) in expected.iter_mut().enumerate().take(top) {
            let p = poisson_pmf(m, j);
            cum += p;
            *e += reps * p;
        }
        expected[top] += reps * (1.0 - cum).max(0.0);
    }
    let (o, e) = merge_cells(observed, expected)?;
    let (stat, p) = chi_square(&o, &e)?;
    Ok((stat, p, o.len() - 1))
}

/// Sample correlation with the Fisher-z normal approximation p-value.
pub fn correlation_test(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 4 {
        return Err(VerifyError::Domain(format!("need at least 4 paired values, got {} and {}", x.len(), y.len())));
    }
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(VerifyError::DegenerateTable("one of the counts is constant".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let z = r.atanh() * (m - 3.0).sqrt();
    let p = if z.is_finite() { 2.0 * normal_sf(z.abs()) } else { 0.0 };
    Ok((r, p))
}

/// Category of each value after merging the upper tail until every category
/// holds at least `min_count` values.
fn categorise(values: &[usize], min_count: usize) -> Vec<usize> {
    let top = values.iter().copied().max().unwrap_or(0);
    let mut freq = vec![0usize; top + 1];
    for &v in values {
        freq[v] += 1;
    }
    let mut cap = top;
    while cap > 0 && freq[cap] < min_count {
        freq[cap - 1] += freq[cap];
        cap -= 1;
    }
    let mut first = 0;
    while first < cap && freq[first] < min_count {
        freq[first + 1] += freq[first];
        first += 1;
    }
    values.iter().map(|&v| v.clamp(first, cap) - first).collect()
}

/// Pearson chi-square independence test on the two-way table of counts.
/// Categories are merged from the upper tail so that every expected cell is
/// at least [`MIN_EXPECTED`].
pub fn contingency_chi_square(x: &[usize], y: &[usize]) -> Result<(f64, f64, usize)> {
    if x.len() != y.len() || x.is_empty() {
        return Err(VerifyError::Domain("paired counts of equal, nonzero length are required".into()));
    }
    let total = x.len() as f64;
    let min_count = (MIN_EXPECTED * total).sqrt().ceil() as usize;
    let (cx, cy) = (categorise(x, min_count), categorise(y, min_count));
    let (rows, cols) = (cx.iter().max().unwrap() + 1, cy.iter().max().unwrap() + 1);
    if rows < 2 || cols < 2 {
        return Err(VerifyError::DegenerateTable(format!("{rows} x {cols} table after merging")));
    }
    let mut table = vec![vec![0.0; cols]; rows];
    for (&i, &j) in cx.iter().zip(&cy) {
        table[i][j] += 1.0;
    }
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let mut observed = Vec::with_capacity(rows * cols);
    let mut expected = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            observed.push(table[i][j]);
            expected.push(row_sums[i] * col_sums[j] / total);
        }
    }
    let df = (rows - 1) * (cols - 1);
    let (stat, p) = chi_square_df(&observed, &expected, df)?;
    Ok((stat, p, df))
}

/// Spacings of arrival times on `[0, horizon]`, continued through the first
/// arrival past the horizon. Including that overshoot keeps the pooled
/// spacings unbiased (the number of spacings is a stopping time), while
/// dropping it would favour short spacings.
pub fn spacings_with_overshoot(sorted_times: &[f64], horizon: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut prev = 0.0;
    for &s in sorted_times {
        out.push(s - prev);
        prev = s;
        if s > horizon {
            break;
        }
    }
    out
}

/// KS test of pooled spacings against the unit exponential.
pub fn exponential_ks(spacings: &[f64]) -> Result<(f64, f64)> {
    const NEEDED: usize = 5;
    if spacings.len() < NEEDED {
        return Err(VerifyError::InsufficientPoints { found: spacings.len(), needed: NEEDED });
    }
    let d = ks_statistic(spacings, |x| if x <= 0.0 { 0.0 } else { -(-x).exp_m1() })?;
    Ok((d, ks_pvalue(d, spacings.len())))
}

// ---------------------------------------------------------------------------
// Simulation-backed tests

/// Scaled process of one replication, resolved on the scaled window
/// `[t_lo, t_hi]` plus `extra_above` draws beyond it.
pub fn draw_process(
    model: &UnivariateModel,
    frame: &Frame,
    key: StreamKey,
    t_lo: f64,
    t_hi: f64,
    extra_above: usize,
) -> Result<(ScaledProcess1D, WindowedSample)> {
    let (lo, hi) = (frame.unscale(t_lo.min(0.0)), frame.unscale(t_hi.max(0.0)));
    let request = WindowRequest::new(lo, hi).with_extra(0, extra_above);
    let ws = WindowedSample::draw(model, key, frame.n, &[request])?;
    let p = ScaledProcess1D::from_view(&ws, *frame, t_lo, t_hi)?;
    Ok((p, ws))
}

fn boxes_span(boxes: &[OrthantBox]) -> Result<(f64, f64)> {
    if boxes.iter().any(|b| b.dim() != 1) {
        return Err(VerifyError::Domain("boxes of a univariate process must be one-dimensional".into()));
    }
    let lo = boxes.iter().map(|b| b.lower()[0]).fold(0.0, f64::min);
    let hi = boxes.iter().map(|b| b.upper()[0]).fold(0.0, f64::max);
    Ok((lo, hi))
}

/// Counts of the scenario's process in each box, per replication.
pub fn simulate_counts(config: &ReplicationConfig, boxes: &[OrthantBox]) -> Result<Vec<Vec<usize>>> {
    let model = config.scenario.build()?;
    let frame = config.scenario.frame(&model, config.n)?;
    let (lo, hi) = boxes_span(boxes)?;
    replicate(config, |key| {
        let (p, _) = draw_process(&model, &frame, key, lo, hi, 0)?;
        boxes.iter().map(|b| Ok(p.count_in(b)?)).collect()
    })
}

/// Limit mean of each box from the scenario's local indices.
pub fn limit_means(config: &ReplicationConfig, boxes: &[OrthantBox]) -> Result<Vec<f64>> {
    let model = config.scenario.build()?;
    let frame = config.scenario.frame(&model, config.n)?;
    let spec = frame.limit.ok_or(VerifyError::NoLimit(frame.anchor))?;
    boxes.iter().map(|b| box_measure(&spec, b)).collect()
}

fn box_measure(spec: &RegVarSpec, b: &OrthantBox) -> Result<f64> {
    let m = |t: f64| -> Result<f64> {
        crate::compensator::limit_measure(spec, t).map_err(|e| VerifyError::Domain(e.to_string()))
    };
    let (l, u) = (b.lower()[0], b.upper()[0]);
    Ok(if u <= 0.0 { m(l)? - m(u)? } else { m(u)? - m(l)? })
}

/// Chi-square test of simulated box counts against Poisson(`means`).
pub fn poisson_count_test(config: &ReplicationConfig, boxes: &[OrthantBox], means: &[f64]) -> Result<FitReport> {
    if boxes.len() != means.len() {
        return Err(VerifyError::Domain(format!("{} boxes but {} means", boxes.len(), means.len())));
    }
    let counts = simulate_counts(config, boxes)?;
    let (stat, p, df) = poisson_chi_square(&counts, means)?;
    let total: usize = counts.iter().flatten().sum();
    Ok(FitReport::new("poisson-count", stat, p, config)
        .with_detail("df", df as f64)
        .with_detail("mean_count", total as f64 / (counts.len() * boxes.len()) as f64)
        .with_detail("expected_mean", means.iter().sum::<f64>() / means.len() as f64))
}

/// Pair of counts whose independence is tested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CountPair {
    /// Two boxes of the scenario's process.
    Boxes { first: OrthantBox, second: OrthantBox },
    /// Counts in `[-window, window]` of the processes at two quantiles of the
    /// scenario's model (the scenario's own `q` is ignored).
    Quantiles { q1: f64, q2: f64, window: f64 },
}

fn window_count(p: &ScaledProcess1D, lo: f64, hi: f64) -> usize {
    let pts = p.points();
    pts.partition_point(|&t| t <= hi) - pts.partition_point(|&t| t < lo)
}

/// Simulated count pairs for [`independence_test`].
pub fn simulate_pairs(config: &ReplicationConfig, pair: &CountPair) -> Result<Vec<(usize, usize)>> {
    match pair {
        CountPair::Boxes { first, second } => Ok(simulate_counts(config, &[first.clone(), second.clone()])?
            .into_iter()
            .map(|c| (c[0], c[1]))
            .collect()),
        CountPair::Quantiles { q1, q2, window } => {
            let model = config.scenario.build()?;
            let frames = [q1, q2]
                .iter()
                .map(|&&q| Ok(Frame::resolve(&model, q, config.n, config.scenario.rule)?))
                .collect::<Result<Vec<_>>>()?;
            let k = *window;
            let spans: Vec<(f64, f64)> = frames.iter().map(|f| (if f.scaling.left.is_some() { -k } else { 0.0 }, k)).collect();
            let requests: Vec<WindowRequest> = frames
                .iter()
                .zip(&spans)
                .map(|(f, &(lo, hi))| WindowRequest::new(f.unscale(lo), f.unscale(hi)))
                .collect();
            if requests[0].hi >= requests[1].lo && requests[1].hi >= requests[0].lo {
                return Err(VerifyError::Config(format!("windows of q = {q1} and q = {q2} overlap at n = {}", config.n)));
            }
            replicate(config, |key| {
                let ws = WindowedSample::draw(&model, key, config.n, &requests)?;
                let c = frames
                    .iter()
                    .zip(&spans)
                    .map(|(f, &(lo, hi))| Ok(window_count(&ScaledProcess1D::from_view(&ws, *f, lo, hi)?, lo, hi)))
                    .collect::<Result<Vec<_>>>()?;
                Ok((c[0], c[1]))
            })
        }
    }
}

/// Correlation test of two simulated counts; the chi-square independence
/// test of their two-way table is reported alongside in `details`.
pub fn independence_test(config: &ReplicationConfig, pair: &CountPair) -> Result<FitReport> {
    let pairs = simulate_pairs(config, pair)?;
    independence_report(config, &pairs)
}

/// [`independence_test`] on already simulated pairs.
pub fn independence_report(config: &ReplicationConfig, pairs: &[(usize, usize)]) -> Result<FitReport> {
    let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
    let (r, p) = correlation_test(&x, &y)?;
    let mut report = FitReport::new("independence", r, p, config);
    let (xs, ys): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
    match contingency_chi_square(&xs, &ys) {
        Ok((stat, pv, df)) => {
            report = report.with_detail("table_statistic", stat).with_detail("table_p_value", pv).with_detail("table_df", df as f64);
        }
        Err(VerifyError::DegenerateTable(_)) if r.abs() == 1.0 => {}
        Err(e) => return Err(e),
    }
    Ok(report)
}

/// Time-changed spacings `s = ω t^α` of the scaled points on `[0, 1]` (plus
/// the overshoot point), pooled over replications.
pub fn simulate_spacings(config: &ReplicationConfig, index_override: Option<f64>) -> Result<Vec<f64>> {
    let model = config.scenario.build()?;
    let frame = config.scenario.frame(&model, config.n)?;
    let spec = frame.limit.ok_or(VerifyError::NoLimit(frame.anchor))?;
    let alpha = index_override.unwrap_or(spec.alpha_right);
    if !(alpha > 0.0) {
        return Err(VerifyError::Domain(format!("time-change index {alpha} must be positive")));
    }
    let omega = spec.omega_right;
    let per_rep = replicate(config, |key| {
        let (p, ws) = draw_process(&model, &frame, key, 0.0, 1.0, 1)?;
        let mut times: Vec<f64> = p.points().iter().copied().filter(|&t| t >= 0.0).collect();
        let edge = frame.unscale(1.0);
        let resolved = ws.resolved_values();
        let beyond = resolved[resolved.partition_point(|&y| y <= edge)..].first().copied();
        if let Some(y) = beyond {
            times.push(frame.scale(y)?);
        }
        let transformed: Vec<f64> = times.iter().map(|&t| omega * t.powf(alpha)).collect();
        Ok(spacings_with_overshoot(&transformed, omega))
    })?;
    Ok(per_rep.into_iter().flatten().collect())
}

/// KS test of time-changed spacings against the unit exponential.
pub fn timechange_spacing_test(config: &ReplicationConfig, index_override: Option<f64>) -> Result<FitReport> {
    let spacings = simulate_spacings(config, index_override)?;
    let (d, p) = exponential_ks(&spacings)?;
    let mut report = FitReport::new("timechange-spacing", d, p, config).with_detail("spacings", spacings.len() as f64);
    if let Some(a) = index_override {
        report = report.with_detail("index_override", a);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn power_config(alpha: f64, n: usize, reps: usize, seed: u64) -> ReplicationConfig {
        ReplicationConfig::new(n, reps, seed, Scenario::new(Family::PowerLaw { alpha }, 0.0)).unwrap()
    }

    #[test]
    fn special_function_examples() {
        for x in [0.1, 1.0, 3.0] {
            assert_relative_eq!(gamma_cdf(1.0, x), -(-x).exp_m1(), max_relative = 1e-13);
        }
        for s in [0.5, 1.0, 2.0, 10.0] {
            for i in 1..=99 {
                let p = i as f64 / 100.0;
                assert!((gamma_cdf(s, gamma_quantile(s, p)) - p).abs() < 1e-8);
            }
        }
        assert_eq!(ks_statistic(&[0.5], |x| x).unwrap(), 0.5);
        assert!(ks_statistic(&[], |x| x).is_err());
    }

    #[test]
    fn chi_square_identity() {
        let (s, p) = chi_square(&[10.0, 20.0, 30.0], &[10.0, 20.0, 30.0]).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn merging_runs_from_the_tail() {
        let (o, e) = merge_cells(vec![1.0, 7.0, 3.0, 1.0, 1.0], vec![2.0, 8.0, 3.0, 1.0, 1.0]).unwrap();
        assert_eq!(e, vec![10.0, 5.0]);
        assert_eq!(o, vec![8.0, 5.0]);
        assert!(matches!(merge_cells(vec![1.0, 1.0], vec![2.0, 2.0]), Err(VerifyError::UnpooledCells)));
    }

    #[test]
    fn poisson_fit_of_exact_frequencies() {
        // counts whose histogram matches 100 * pmf(1) closely
        let mut counts = Vec::new();
        for (j, m) in [(0usize, 37), (1, 37), (2, 18), (3, 6), (4, 2)] {
            counts.extend(std::iter::repeat_n(vec![j], m));
        }
        let (stat, p, _) = poisson_chi_square(&counts, &[1.0]).unwrap();
        assert!(stat < 0.1 && p > 0.9);
    }

    #[test]
    fn correlation_controls() {
        let x: Vec<f64> = (0..50).map(|i| (i % 7) as f64).collect();
        let (r, p) = correlation_test(&x, &x).unwrap();
        assert_eq!(r, 1.0);
        assert_eq!(p, 0.0);
        assert!(matches!(correlation_test(&x, &[1.0; 50]), Err(VerifyError::DegenerateTable(_))));
    }

    #[test]
    fn spacings_include_the_overshoot() {
        assert_eq!(spacings_with_overshoot(&[0.25, 0.5, 1.5, 2.0], 1.0), vec![0.25, 0.25, 1.0]);
    }

    #[test]
    fn count_test_accepts_truth_and_rejects_doubled_mean() {
        let c = power_config(2.0, 100_000, 2000, 3);
        let unit = [OrthantBox::interval(0.0, 1.0).unwrap()];
        let means = limit_means(&c, &unit).unwrap();
        assert_relative_eq!(means[0], 1.0);
        let good = poisson_count_test(&c, &unit, &means).unwrap();
        assert!(good.p_value > 0.001, "{good:?}");
        let bad = poisson_count_test(&c, &unit, &[2.0]).unwrap();
        assert!(bad.p_value < 1e-6);
    }

    #[test]
    fn reports_are_deterministic() {
        let c = power_config(1.0, 10_000, 300, 17);
        let b = [OrthantBox::interval(0.0, 1.0).unwrap()];
        let a = poisson_count_test(&c, &b, &[1.0]).unwrap();
        let again = poisson_count_test(&c, &b, &[1.0]).unwrap();
        assert_eq!(a.to_json_line().unwrap(), again.to_json_line().unwrap());
        let threads = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let other = threads.install(|| poisson_count_test(&c, &b, &[1.0]).unwrap());
        assert_eq!(a, other);
    }

    #[test]
    fn independence_controls() {
        let c = ReplicationConfig::new(100_000, 2000, 5, Scenario::new(Family::Uniform { a: 0.0, b: 1.0 }, 0.5)).unwrap();
        let same = CountPair::Boxes { first: OrthantBox::interval(0.0, 1.0).unwrap(), second: OrthantBox::interval(0.0, 1.0).unwrap() };
        let pos = independence_test(&c, &same).unwrap();
        assert!(pos.statistic > 0.99 && pos.decision == Decision::Reject);
        let disjoint = CountPair::Boxes { first: OrthantBox::interval(-1.0, 0.0).unwrap(), second: OrthantBox::interval(0.0, 1.0).unwrap() };
        let rep = independence_test(&c, &disjoint).unwrap();
        assert!(rep.p_value > 0.001, "{rep:?}");
        assert!(rep.details.contains_key("table_p_value"));
        let quant = CountPair::Quantiles { q1: 0.3, q2: 0.7, window: 1.0 };
        let rep = independence_test(&c, &quant).unwrap();
        assert!(rep.statistic.abs() < 0.1, "{rep:?}");
    }

    #[test]
    fn spacing_test_with_identity_time_change() {
        let c = ReplicationConfig::new(100_000, 500, 8, Scenario::new(Family::Uniform { a: 0.0, b: 1.0 }, 0.5)).unwrap();
        let r = timechange_spacing_test(&c, None).unwrap();
        assert!(r.p_value > 0.001, "{r:?}");
        let few = ReplicationConfig::new(100_000, 1, 8, Scenario::new(Family::PowerLaw { alpha: 3.0 }, 0.0)).unwrap();
        match timechange_spacing_test(&few, None) {
            Err(VerifyError::InsufficientPoints { .. }) | Ok(_) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn summary_csv_and_json() {
        let c = power_config(1.0, 10, 1, 0);
        let r = FitReport::new("x", 1.5, 0.01, &c);
        assert_eq!(r.decision, Decision::Reject);
        let mut buf = Vec::new();
        write_summary_csv(std::slice::from_ref(&r), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "test_name,statistic,p_value,reps,n,decision,seed\nx,1.5,0.01,1,10,reject,0\n");
        let back: FitReport = serde_json::from_str(&r.to_json_line().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn config_validation() {
        assert!(ReplicationConfig::new(0, 1, 0, Scenario::new(Family::PowerLaw { alpha: 1.0 }, 0.0)).is_err());
        assert!(ReplicationConfig::new(1, 0, 0, Scenario::new(Family::PowerLaw { alpha: 1.0 }, 0.0)).is_err());
        let toml_like = r#"{"n":5,"reps":2,"seed":1,"scenario":{"model":{"family":"power-law","alpha":2.0},"q":0.0,"extra":1}}"#;
        assert!(serde_json::from_str::<ReplicationConfig>(toml_like).is_err());
    }

    proptest! {
        #[test]
        fn p_values_are_probabilities(obs in proptest::collection::vec(0.0f64..50.0, 2..8)) {
            let exp: Vec<f64> = obs.iter().map(|o| o + 1.0).collect();
            let (s, p) = chi_square(&obs, &exp).unwrap();
            prop_assert!(s >= 0.0 && (0.0..=1.0).contains(&p));
        }
    }
}
