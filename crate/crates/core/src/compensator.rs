//! *-compensators of the scaled point processes.
//!
//! In one dimension the compensator of the process at an anchor `x` is
//!
//! ```text
//! Λ_t = Σ_i ∫_x^{x + a t} 1{Y_i ≥ u} dF(u) / S(u),   t ≥ 0,
//! Λ_t = Σ_i ∫_{x + b t}^x 1{Y_i ≤ u} dF(u) / F(u),   t < 0,
//! ```
//!
//! which has the closed forms `log S(x) - log S(min(x + a t, Y_i))` and its
//! mirror. The joint compensator for several anchors replaces `S` by the mass
//! outside a growing union of windows and has no closed form, so it is
//! integrated numerically.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::epp::{Frame, ScaleRule};
use crate::quadrature::{adaptive_simpson, QuadratureError};
use crate::rvdist::{ModelError, RegVarSpec, SampleView, UnivariateModel};

/// Absolute tolerance for the joint compensator quadrature.
pub const JOINT_TOL: f64 = 1e-8;
/// Evaluation budget for the joint compensator quadrature.
pub const JOINT_MAX_EVALS: usize = 1 << 20;
/// Default grid resolution (cells per axis) for [`compensator_2d`].
pub const DEFAULT_RESOLUTION_2D: usize = 256;

#[derive(Debug, Error)]
pub enum CompensatorError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("degenerate-survival: the normalising mass vanishes at {at}")]
    DegenerateSurvival { at: f64 },
    #[error("windows-overlap: windows of quantiles {first} and {second} intersect at n = {n}{}", minimal_n_note(*.minimal_n))]
    WindowsOverlap { first: usize, second: usize, n: usize, minimal_n: Option<usize> },
    #[error("grid must be finite and sorted: {0}")]
    InvalidGrid(String),
    #[error("negative t requires a left scaling at anchor {anchor}")]
    MissingLeftScaling { anchor: f64 },
    #[error("sample size {got} does not match n = {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("the sample does not resolve every draw in [{lo}, {hi}]")]
    Unresolved { lo: f64, hi: f64 },
    #[error("t = {t} lies outside the window [-{k}, {k}]")]
    OutsideWindow { t: f64, k: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

fn minimal_n_note(n: Option<usize>) -> String {
    match n {
        Some(m) => format!("; disjoint from n = {m}"),
        None => "; no sample size makes them disjoint".to_string(),
    }
}

pub type Result<T> = std::result::Result<T, CompensatorError>;

/// Compensator evaluated on a grid, with its deterministic limit when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensatorPath {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub limit: Option<Vec<f64>>,
}

impl CompensatorPath {
    /// Value at `t`, if `t` is a grid point.
    pub fn at(&self, t: f64) -> Option<f64> {
        self.grid.iter().position(|&g| g == t).map(|i| self.values[i])
    }

    /// CSV with header `t,value,limit`; the limit column is empty when the
    /// model declares no local indices at the anchor.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["t", "value", "limit"])?;
        for (i, (t, v)) in self.grid.iter().zip(&self.values).enumerate() {
            let lim = self.limit.as_ref().map(|l| l[i].to_string()).unwrap_or_default();
            w.write_record([t.to_string(), v.to_string(), lim])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(CompensatorError::InvalidGrid("non-finite value".into()));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(CompensatorError::InvalidGrid("values are not sorted".into()));
    }
    Ok(())
}

/// Cumulative limit mean measure of `[0, t]` (or `[t, 0]`).
pub fn limit_measure(spec: &RegVarSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    if t >= 0.0 {
        Ok(spec.omega_right * t.powf(spec.alpha_right))
    } else {
        match (spec.beta_left, spec.omega_left) {
            (Some(beta), Some(omega)) => Ok(omega * (-t).powf(beta)),
            _ => Err(CompensatorError::Domain(format!("t = {t} < 0 but no left index at {}", spec.anchor))),
        }
    }
}

fn limit_path(frame: &Frame, grid: &[f64]) -> Option<Vec<f64>> {
    let spec = frame.limit?;
    grid.iter().map(|&t| limit_measure(&spec, t).ok()).collect()
}

/// `-log(1 - m / base)` for `0 ≤ m < base`.
fn log_ratio(m: f64, base: f64, at: f64) -> Result<f64> {
    let r = m / base;
    if !(base > 0.0) || r >= 1.0 {
        return Err(CompensatorError::DegenerateSurvival { at });
    }
    Ok(-(-r).ln_1p())
}

/// Closed-form one-dimensional compensator at `frame.anchor` with the
/// frame's scalings.
pub fn exact_compensator_1d<V: SampleView>(
    sample: &V,
    model: &UnivariateModel,
    frame: &Frame,
    grid: &[f64],
) -> Result<CompensatorPath> {
    check_grid(grid)?;
    if sample.size() != frame.n {
        return Err(CompensatorError::SizeMismatch { expected: frame.n, got: sample.size() });
    }
    let x = frame.anchor;
    let a = frame.scaling.right;
    let t_max = grid.iter().copied().fold(0.0f64, f64::max);
    let t_min = grid.iter().copied().fold(0.0f64, f64::min);

    let mut values = vec![0.0; grid.len()];

    if t_max > 0.0 {
        let surv = model.survival(x);
        if !(surv > 0.0) {
            return Err(CompensatorError::DegenerateSurvival { at: x });
        }
        let hi = x + a * t_max;
        let mut inner = sample.values_in(x, hi).ok_or(CompensatorError::Unresolved { lo: x, hi })?;
        inner.sort_by(f64::total_cmp);
        let at_or_above = sample
            .count_in(x, f64::INFINITY)
            .ok_or(CompensatorError::Unresolved { lo: x, hi: f64::INFINITY })?;
        // prefix[k] = total contribution of the k smallest points in the window
        let mut prefix = Vec::with_capacity(inner.len() + 1);
        prefix.push(0.0);
        for &y in &inner {
            let c = log_ratio(model.prob_between(x, y), surv, y)?;
            prefix.push(prefix.last().unwrap() + c);
        }
        for (t, v) in grid.iter().zip(values.iter_mut()) {
            if *t <= 0.0 {
                continue;
            }
            let xt = x + a * t;
            let below = inner.partition_point(|&y| y < xt);
            let rest = at_or_above - below;
            let full = if rest > 0 { rest as f64 * log_ratio(model.prob_between(x, xt), surv, xt)? } else { 0.0 };
            *v = prefix[below] + full;
        }
    }

    if t_min < 0.0 {
        let b = frame.scaling.left.ok_or(CompensatorError::MissingLeftScaling { anchor: x })?;
        let dist = model.cdf(x);
        if !(dist > 0.0) {
            return Err(CompensatorError::DegenerateSurvival { at: x });
        }
        let lo = x + b * t_min;
        let mut inner = sample.values_in(lo, x).ok_or(CompensatorError::Unresolved { lo, hi: x })?;
        // nearest to the anchor first
        inner.sort_by(|p, q| q.total_cmp(p));
        let at_or_below = sample
            .count_in(f64::NEG_INFINITY, x)
            .ok_or(CompensatorError::Unresolved { lo: f64::NEG_INFINITY, hi: x })?;
        let mut prefix = Vec::with_capacity(inner.len() + 1);
        prefix.push(0.0);
        for &y in &inner {
            let c = log_ratio(model.prob_between(y, x), dist, y)?;
            prefix.push(prefix.last().unwrap() + c);
        }
        for (t, v) in grid.iter().zip(values.iter_mut()) {
            if *t >= 0.0 {
                continue;
            }
            let xt = x + b * t;
            let above = inner.partition_point(|&y| y > xt);
            let rest = at_or_below - above;
            let full = if rest > 0 { rest as f64 * log_ratio(model.prob_between(xt, x), dist, xt)? } else { 0.0 };
            *v = prefix[above] + full;
        }
    }

    Ok(CompensatorPath { grid: grid.to_vec(), values, limit: limit_path(frame, grid) })
}

/// Windows `[x_i - K b_i, x_i + K a_i]`; a missing left scaling contributes
/// no left half.
fn windows(frames: &[Frame], k: f64) -> Vec<(f64, f64)> {
    frames
        .iter()
        .map(|f| (f.anchor - k * f.scaling.left.unwrap_or(0.0), f.anchor + k * f.scaling.right))
        .collect()
}

fn first_overlap(w: &[(f64, f64)]) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&i, &j| w[i].0.total_cmp(&w[j].0));
    order.windows(2).find(|p| w[p[0]].1 >= w[p[1]].0).map(|p| (p[0].min(p[1]), p[0].max(p[1])))
}

fn frames_for(model: &UnivariateModel, quantiles: &[f64], n: usize, rule: ScaleRule) -> Result<Vec<Frame>> {
    quantiles
        .iter()
        .map(|&q| Frame::resolve(model, q, n, rule).map_err(|e| match e {
            crate::epp::EppError::Model(m) => CompensatorError::Model(m),
            other => CompensatorError::Domain(other.to_string()),
        }))
        .collect()
}

/// Smallest sample size at which the windows of all quantiles are pairwise
/// disjoint, searched by doubling and bisection.
pub fn minimal_disjoint_n(model: &UnivariateModel, quantiles: &[f64], k: f64, rule: ScaleRule) -> Option<usize> {
    let disjoint = |n: usize| -> Option<bool> {
        let frames = frames_for(model, quantiles, n, rule).ok()?;
        Some(first_overlap(&windows(&frames, k)).is_none())
    };
    let mut hi = 1usize;
    loop {
        if disjoint(hi) == Some(true) {
            break;
        }
        if hi >= 1 << 60 {
            return None;
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    if lo == 0 {
        return Some(hi);
    }
    // invariant: not disjoint at lo, disjoint at hi
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if disjoint(mid) == Some(true) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Joint compensator of the processes at several quantiles under
/// quantile-matched scalings. See [`joint_compensator_with`].
pub fn joint_compensator<V: SampleView>(
    sample: &V,
    model: &UnivariateModel,
    quantiles: &[f64],
    window: f64,
    n: usize,
    grid: &[f64],
) -> Result<Vec<CompensatorPath>> {
    joint_compensator_with(sample, model, quantiles, window, n, grid, ScaleRule::Quantile)
}

/// Joint compensator
///
/// ```text
/// Λ_t(i) = Σ_j ∫_0^t 1{Y_j ∉ U_s} dF(x_i + a_i s) / (1 - F(U_s)),
/// U_s = ∪_l [x_l - K b_l, x_l + s a_l],
/// ```
///
/// for `t ≥ 0`, and for `t < 0` the mirror with
/// `U_s = ∪_l [x_l + s b_l, x_l + K a_l]` and `dF(x_i + b_i s)`.
///
/// The integral runs in `v = F(x_i + a_i s) - F(x_i)`, split at the points
/// where a sample value enters `U_s`, so the count is constant on each piece
/// and the remaining integrand `1 / (1 - F(U_s))` is smooth.
pub fn joint_compensator_with<V: SampleView>(
    sample: &V,
    model: &UnivariateModel,
    quantiles: &[f64],
    window: f64,
    n: usize,
    grid: &[f64],
    rule: ScaleRule,
) -> Result<Vec<CompensatorPath>> {
    check_grid(grid)?;
    if !(window.is_finite() && window > 0.0) {
        return Err(CompensatorError::Domain(format!("window K = {window} must be positive")));
    }
    if sample.size() != n {
        return Err(CompensatorError::SizeMismatch { expected: n, got: sample.size() });
    }
    if let Some(t) = grid.iter().find(|t| t.abs() > window) {
        return Err(CompensatorError::OutsideWindow { t: *t, k: window });
    }
    let frames = frames_for(model, quantiles, n, rule)?;
    let wins = windows(&frames, window);
    if let Some((first, second)) = first_overlap(&wins) {
        return Err(CompensatorError::WindowsOverlap {
            first,
            second,
            n,
            minimal_n: minimal_disjoint_n(model, quantiles, window, rule),
        });
    }
    let window_values = wins
        .iter()
        .map(|&(lo, hi)| {
            let mut v = sample.values_in(lo, hi).ok_or(CompensatorError::Unresolved { lo, hi })?;
            v.sort_by(f64::total_cmp);
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    let ctx = JointContext { model, frames: &frames, wins: &wins, values: &window_values, n };

    frames
        .iter()
        .enumerate()
        .map(|(i, frame)| {
            let mut values = vec![0.0; grid.len()];
            let pos: Vec<(usize, f64)> = grid.iter().copied().enumerate().filter(|&(_, t)| t > 0.0).collect();
            let neg: Vec<(usize, f64)> = grid.iter().copied().enumerate().filter(|&(_, t)| t < 0.0).map(|(j, t)| (j, -t)).collect();
            for (side, pts) in [(Side::Right, pos), (Side::Left, neg)] {
                if pts.is_empty() {
                    continue;
                }
                if side == Side::Left && frame.scaling.left.is_none() {
                    return Err(CompensatorError::MissingLeftScaling { anchor: frame.anchor });
                }
                for (j, v) in ctx.side_path(i, side, &pts)? {
                    values[j] = v;
                }
            }
            Ok(CompensatorPath { grid: grid.to_vec(), values, limit: limit_path(frame, grid) })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Right,
    Left,
}

struct JointContext<'a> {
    model: &'a UnivariateModel,
    frames: &'a [Frame],
    wins: &'a [(f64, f64)],
    values: &'a [Vec<f64>],
    n: usize,
}

impl JointContext<'_> {
    /// Scale of the moving edge of window `l` on `side` (zero when the
    /// window does not grow that way).
    fn step(&self, l: usize, side: Side) -> f64 {
        match side {
            Side::Right => self.frames[l].scaling.right,
            Side::Left => self.frames[l].scaling.left.unwrap_or(0.0),
        }
    }

    /// Mass swept by the moving edge of window `l` at time `s`.
    fn swept(&self, l: usize, side: Side, s: f64) -> f64 {
        let x = self.frames[l].anchor;
        let h = self.step(l, side) * s;
        match side {
            Side::Right => self.model.prob_between(x, x + h),
            Side::Left => self.model.prob_between(x - h, x),
        }
    }

    /// `1 - F(U_0)`: mass outside the fixed halves of all windows.
    fn base(&self, side: Side) -> f64 {
        let fixed: f64 = self
            .frames
            .iter()
            .zip(self.wins)
            .map(|(f, &(lo, hi))| match side {
                Side::Right => self.model.prob_between(lo, f.anchor),
                Side::Left => self.model.prob_between(f.anchor, hi),
            })
            .sum();
        1.0 - fixed
    }

    /// Number of sample values inside `U_s`.
    fn inside(&self, side: Side, s: f64) -> usize {
        self.values
            .iter()
            .enumerate()
            .map(|(l, vals)| {
                let x = self.frames[l].anchor;
                let edge = match side {
                    Side::Right => x + self.step(l, side) * s,
                    Side::Left => x - self.step(l, side) * s,
                };
                match side {
                    Side::Right => vals.partition_point(|&y| y <= edge),
                    Side::Left => vals.len() - vals.partition_point(|&y| y < edge),
                }
            })
            .sum()
    }

    /// Times in `(0, s_max)` at which a sample value enters `U_s`.
    fn entry_times(&self, side: Side, s_max: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for (l, vals) in self.values.iter().enumerate() {
            let x = self.frames[l].anchor;
            let step = self.step(l, side);
            if step == 0.0 {
                continue;
            }
            for &y in vals {
                let s = match side {
                    Side::Right => (y - x) / step,
                    Side::Left => (x - y) / step,
                };
                if s > 0.0 && s < s_max {
                    out.push(s);
                }
            }
        }
        out
    }

    /// Time `s` at which quantile `i` has swept mass `v`.
    fn time_of(&self, i: usize, side: Side, v: f64) -> Result<f64> {
        let x = self.frames[i].anchor;
        let fx = self.model.cdf(x);
        let y = match side {
            Side::Right => self.model.quantile((fx + v).min(1.0))?,
            Side::Left => self.model.quantile((fx - v).max(0.0))?,
        };
        let d = match side {
            Side::Right => y - x,
            Side::Left => x - y,
        };
        Ok(d.max(0.0) / self.step(i, side))
    }

    /// `1 / (1 - F(U_s))` at swept mass `v` of quantile `i`.
    fn inverse_outside_mass(&self, i: usize, side: Side, v: f64, base: f64) -> Result<f64> {
        let mut outside = base - v;
        if self.frames.len() > 1 {
            let s = self.time_of(i, side, v)?;
            for l in (0..self.frames.len()).filter(|&l| l != i) {
                outside -= self.swept(l, side, s);
            }
        }
        if !(outside > 0.0) {
            return Err(CompensatorError::DegenerateSurvival { at: self.frames[i].anchor });
        }
        Ok(1.0 / outside)
    }

    /// Compensator of quantile `i` at the positive times `pts` (grid index,
    /// |t|) on one side.
    fn side_path(&self, i: usize, side: Side, pts: &[(usize, f64)]) -> Result<Vec<(usize, f64)>> {
        let s_max = pts.iter().map(|p| p.1).fold(0.0, f64::max);
        let mut cuts = self.entry_times(side, s_max);
        cuts.extend(pts.iter().map(|p| p.1));
        cuts.push(0.0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let base = self.base(side);
        let span = self.swept(i, side, s_max).max(f64::MIN_POSITIVE);

        let mut acc = 0.0;
        let mut at_cut = vec![0.0; cuts.len()];
        for k in 1..cuts.len() {
            let (s0, s1) = (cuts[k - 1], cuts[k]);
            let (v0, v1) = (self.swept(i, side, s0), self.swept(i, side, s1));
            if v1 > v0 {
                let count = self.n - self.inside(side, 0.5 * (s0 + s1));
                if count > 0 {
                    let tol = JOINT_TOL * (v1 - v0) / span / count as f64;
                    let failure = std::cell::RefCell::new(None);
                    let integral = adaptive_simpson(
                        |v| match self.inverse_outside_mass(i, side, v, base) {
                            Ok(f) => f,
                            Err(e) => {
                                failure.borrow_mut().get_or_insert(e);
                                0.0
                            }
                        },
                        v0,
                        v1,
                        tol.max(f64::MIN_POSITIVE),
                        JOINT_MAX_EVALS,
                    );
                    if let Some(e) = failure.into_inner() {
                        return Err(e);
                    }
                    acc += count as f64 * integral?.value;
                }
            }
            at_cut[k] = acc;
        }
        Ok(pts
            .iter()
            .map(|&(j, s)| {
                let k = cuts.partition_point(|&c| c < s);
                (j, at_cut[k])
            })
            .collect())
    }
}

/// Bivariate compensator at the origin over `[0, a t1] × [0, a t2]`:
///
/// ```text
/// Λ_t = Σ_i ∫ 1{Y_i ≥ u} dF(u) / F̄(u),   F̄(u) = P(Y ≥ u componentwise).
/// ```
///
/// Each sample point contributes the integral over `[0, min(a t, Y_i)]`,
/// evaluated by a midpoint tensor rule whose cell masses are exact second
/// differences of `joint_cdf`. Points with a negative coordinate never
/// dominate `u` and contribute nothing; other quadrants are handled by
/// reflecting the data.
pub fn compensator_2d<C, S>(
    sample: &[[f64; 2]],
    joint_cdf: C,
    joint_survival: S,
    scaling: f64,
    t: [f64; 2],
    resolution: usize,
) -> Result<f64>
where
    C: Fn([f64; 2]) -> f64,
    S: Fn([f64; 2]) -> f64,
{
    if t[0] < 0.0 || t[1] < 0.0 || !t.iter().all(|v| v.is_finite()) {
        return Err(CompensatorError::Domain(format!("t = {t:?} must lie in the closed positive quadrant")));
    }
    if !(scaling.is_finite() && scaling > 0.0) {
        return Err(CompensatorError::Domain(format!("scaling {scaling} must be positive")));
    }
    if resolution == 0 {
        return Err(CompensatorError::Domain("resolution must be positive".into()));
    }
    let corner = [scaling * t[0], scaling * t[1]];
    let integral_to = |c: [f64; 2]| -> Result<f64> {
        if c[0] <= 0.0 || c[1] <= 0.0 {
            return Ok(0.0);
        }
        let (h0, h1) = (c[0] / resolution as f64, c[1] / resolution as f64);
        let mut total = 0.0;
        for p in 0..resolution {
            let (u0, u0n) = (p as f64 * h0, (p + 1) as f64 * h0);
            for q in 0..resolution {
                let (u1, u1n) = (q as f64 * h1, (q + 1) as f64 * h1);
                let mass = joint_cdf([u0n, u1n]) - joint_cdf([u0, u1n]) - joint_cdf([u0n, u1]) + joint_cdf([u0, u1]);
                if mass == 0.0 {
                    continue;
                }
                let mid = [0.5 * (u0 + u0n), 0.5 * (u1 + u1n)];
                let surv = joint_survival(mid);
                if !(surv > 0.0) {
                    return Err(CompensatorError::DegenerateSurvival { at: mid[0].hypot(mid[1]) });
                }
                total += mass / surv;
            }
        }
        Ok(total)
    };
    let mut full_count = 0usize;
    let mut total = 0.0;
    for y in sample {
        if y[0] < 0.0 || y[1] < 0.0 {
            continue;
        }
        if y[0] >= corner[0] && y[1] >= corner[1] {
            full_count += 1;
        } else {
            total += integral_to([y[0].min(corner[0]), y[1].min(corner[1])])?;
        }
    }
    if full_count > 0 {
        total += full_count as f64 * integral_to(corner)?;
    }
    Ok(total)
}
