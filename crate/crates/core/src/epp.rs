//! Scaled empirical point processes around anchors.
//!
//! In one dimension a draw `Y` is mapped to `(Y - x_q) / a_n` when it lies at
//! or above the anchor `x_q` and to `(Y - x_q) / b_n` below it. In `d`
//! dimensions each of the `2^d` orthants around an anchor carries its own
//! scaling. Counting is over closed boxes that stay inside one orthant,
//! which is the family `[0, t]` under the orthant-wise partial order.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rvdist::{ModelError, RegVarSpec, SampleView, SortedSample, UnivariateModel};

/// Largest supported dimension for orthant bookkeeping.
pub const MAX_DIM: usize = 8;

#[derive(Debug, Error)]
pub enum EppError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("sample has {got} values but n = {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("value {value} lies below the anchor {anchor} but no left scaling is available")]
    BelowAnchor { value: f64, anchor: f64 },
    #[error("the sample does not resolve every draw in [{lo}, {hi}]")]
    Unresolved { lo: f64, hi: f64 },
    #[error("box [{lower:?}, {upper:?}] is outside the window [{covered:?}] where the process is complete")]
    OutsideCoverage { lower: Vec<f64>, upper: Vec<f64>, covered: Vec<(f64, f64)> },
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid scaling: {0}")]
    InvalidScaling(String),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, EppError>;

/// How the scaling constants around an anchor are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleRule {
    /// `F(u + a_n) - F(u) = 1/n` (and the mirror for `b_n`); the limit mean
    /// measure is `t^α` / `|t|^β`.
    #[default]
    Quantile,
    /// `a_n = n^{-1/α}`, `b_n = n^{-1/β}` from the declared indices; the limit
    /// mean measure carries the local rates, `ω t^α`.
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub right: f64,
    pub left: Option<f64>,
}

impl Scaling {
    pub fn new(right: f64, left: Option<f64>) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(right) || left.is_some_and(|b| !ok(b)) {
            return Err(EppError::InvalidScaling(format!("scalings must be positive, got {right} / {left:?}")));
        }
        Ok(Self { right, left })
    }
}

/// Anchor, scaling constants and (when the model declares local indices
/// there) the limit mean measure that goes with them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub anchor: f64,
    pub n: usize,
    pub scaling: Scaling,
    pub limit: Option<RegVarSpec>,
}

impl Frame {
    pub fn resolve(model: &UnivariateModel, q: f64, n: usize, rule: ScaleRule) -> Result<Self> {
        let anchor = model.quantile(q)?;
        Self::at_anchor(model, anchor, n, rule)
    }

    pub fn at_anchor(model: &UnivariateModel, anchor: f64, n: usize, rule: ScaleRule) -> Result<Self> {
        let spec = model.annotation_at(anchor).or_else(|| model.regvar_at(anchor));
        let (scaling, limit) = match rule {
            ScaleRule::Quantile => {
                let (a, b) = model.scaling_constants(anchor, n)?;
                let limit = spec.map(|s| {
                    let s = s.normalized();
                    if b.is_none() {
                        RegVarSpec { beta_left: None, omega_left: None, ..s }
                    } else {
                        s
                    }
                });
                (Scaling::new(a, b)?, limit)
            }
            ScaleRule::Power => {
                let s = spec.ok_or(ModelError::NoRegularVariation(anchor))?;
                let nf = n as f64;
                let a = nf.powf(-1.0 / s.alpha_right);
                let b = s.beta_left.map(|beta| nf.powf(-1.0 / beta));
                (Scaling::new(a, b)?, Some(s))
            }
        };
        Ok(Self { anchor, n, scaling, limit })
    }

    /// Scaled coordinate of a draw.
    pub fn scale(&self, y: f64) -> Result<f64> {
        if y >= self.anchor {
            Ok((y - self.anchor) / self.scaling.right)
        } else {
            match self.scaling.left {
                Some(b) => Ok((y - self.anchor) / b),
                None => Err(EppError::BelowAnchor { value: y, anchor: self.anchor }),
            }
        }
    }

    /// Inverse of [`Frame::scale`].
    pub fn unscale(&self, t: f64) -> f64 {
        if t >= 0.0 {
            self.anchor + t * self.scaling.right
        } else {
            self.anchor + t * self.scaling.left.unwrap_or(0.0)
        }
    }
}

/// Closed box `[lower, upper]` inside a single orthant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthantBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl OrthantBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(EppError::InvalidBox(format!("corner dimensions {} and {}", lower.len(), upper.len())));
        }
        for (j, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u {
                return Err(EppError::InvalidBox(format!("coordinate {j}: lower {l} > upper {u}")));
            }
            if l < 0.0 && u > 0.0 {
                return Err(EppError::InvalidBox(format!("coordinate {j}: [{l}, {u}] straddles 0")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The set `[0, t]`: per coordinate `[min(0, t_j), max(0, t_j)]`.
    pub fn from_origin(t: &[f64]) -> Result<Self> {
        Self::new(t.iter().map(|&v| v.min(0.0)).collect(), t.iter().map(|&v| v.max(0.0)).collect())
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(&v, (&l, &u))| v >= l && v <= u)
    }

    fn within(&self, covered: &[(f64, f64)]) -> bool {
        self.lower.iter().zip(&self.upper).zip(covered).all(|((&l, &u), &(cl, ch))| l >= cl && u <= ch)
    }
}

/// Counting over boxes.
pub trait PointCount {
    fn count_in(&self, b: &OrthantBox) -> Result<usize>;
}

/// One-dimensional two-sided scaled process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledProcess1D {
    frame: Frame,
    points: Vec<f64>,
    /// Scaled range in which every point is present.
    coverage: (f64, f64),
}

/// Builds `N^{(n)}(q)` from a full sample drawn from `model`, with
/// quantile-matched scalings.
pub fn build_scaled_1d(sample: &[f64], model: &UnivariateModel, q: f64, n: usize) -> Result<ScaledProcess1D> {
    if sample.len() != n {
        return Err(EppError::SizeMismatch { expected: n, got: sample.len() });
    }
    let frame = Frame::resolve(model, q, n, ScaleRule::Quantile)?;
    ScaledProcess1D::from_sample(sample, frame)
}

impl ScaledProcess1D {
    pub fn from_sample(sample: &[f64], frame: Frame) -> Result<Self> {
        let mut points = sample.iter().map(|&y| frame.scale(y)).collect::<Result<Vec<_>>>()?;
        points.sort_by(f64::total_cmp);
        Ok(Self { frame, points, coverage: (f64::NEG_INFINITY, f64::INFINITY) })
    }

    /// Process restricted to the scaled window `[t_lo, t_hi]`; the view must
    /// resolve every draw there.
    pub fn from_view<V: SampleView>(view: &V, frame: Frame, t_lo: f64, t_hi: f64) -> Result<Self> {
        let t_lo = if frame.scaling.left.is_some() { t_lo.min(0.0) } else { 0.0 };
        let (lo, hi) = (frame.unscale(t_lo), frame.unscale(t_hi.max(0.0)));
        let values = view.values_in(lo, hi).ok_or(EppError::Unresolved { lo, hi })?;
        let mut points = values.iter().map(|&y| frame.scale(y)).collect::<Result<Vec<_>>>()?;
        points.sort_by(f64::total_cmp);
        let coverage = if view.size() == points.len() && frame.scaling.left.is_some() {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            (if frame.scaling.left.is_some() { t_lo } else { f64::NEG_INFINITY }, t_hi.max(0.0))
        };
        Ok(Self { frame, points, coverage })
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn anchor(&self) -> f64 {
        self.frame.anchor
    }

    pub fn n(&self) -> usize {
        self.frame.n
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn coverage(&self) -> (f64, f64) {
        self.coverage
    }

    pub fn to_process_d(&self) -> ScaledProcessD {
        let right = self.frame.scaling.right;
        let left = self.frame.scaling.left.unwrap_or(right);
        ScaledProcessD {
            anchor: vec![self.frame.anchor],
            scalings: vec![right, left],
            points: self
                .points
                .iter()
                .enumerate()
                .map(|(i, &t)| OrthantPoint::new(vec![t], i))
                .collect(),
            n: self.frame.n,
            coverage: Some(vec![self.coverage]),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.to_process_d().write_csv(out)
    }
}

impl PointCount for ScaledProcess1D {
    fn count_in(&self, b: &OrthantBox) -> Result<usize> {
        if b.dim() != 1 {
            return Err(EppError::Dimension(format!("box of dimension {} on a 1-d process", b.dim())));
        }
        if !b.within(&[self.coverage]) {
            return Err(EppError::OutsideCoverage {
                lower: b.lower.clone(),
                upper: b.upper.clone(),
                covered: vec![self.coverage],
            });
        }
        let lo = self.points.partition_point(|&t| t < b.lower[0]);
        let hi = self.points.partition_point(|&t| t <= b.upper[0]);
        Ok(hi.saturating_sub(lo))
    }
}

/// Orthant index of a centred point: bit `j` is set when coordinate `j` is
/// negative. Zero counts as nonnegative.
pub fn orthant_of(x: &[f64]) -> u32 {
    x.iter().enumerate().fold(0u32, |acc, (j, &v)| if v < 0.0 { acc | (1 << j) } else { acc })
}

/// `+`/`-` label of an orthant, one character per coordinate.
pub fn orthant_label(orthant: u32, d: usize) -> String {
    (0..d).map(|j| if orthant & (1 << j) != 0 { '-' } else { '+' }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthantPoint {
    pub orthant: u32,
    pub coords: Vec<f64>,
    /// Index of the originating draw in the sample.
    pub source: usize,
}

impl OrthantPoint {
    pub fn new(coords: Vec<f64>, source: usize) -> Self {
        Self { orthant: orthant_of(&coords), coords, source }
    }
}

/// `d`-dimensional scaled process around one anchor with orthant-wise
/// scalings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledProcessD {
    anchor: Vec<f64>,
    scalings: Vec<f64>,
    points: Vec<OrthantPoint>,
    n: usize,
    coverage: Option<Vec<(f64, f64)>>,
}

fn check_scalings(scalings: &[f64], d: usize) -> Result<()> {
    if scalings.len() != 1 << d {
        return Err(EppError::InvalidScaling(format!("expected {} orthant scalings, got {}", 1 << d, scalings.len())));
    }
    if scalings.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
        return Err(EppError::InvalidScaling(format!("scalings must be positive, got {scalings:?}")));
    }
    Ok(())
}

impl ScaledProcessD {
    pub fn new(anchor: Vec<f64>, scalings: Vec<f64>, sample: &[Vec<f64>]) -> Result<Self> {
        let d = anchor.len();
        if d == 0 || d > MAX_DIM {
            return Err(EppError::Dimension(format!("d = {d} must be in 1..={MAX_DIM}")));
        }
        check_scalings(&scalings, d)?;
        let points = sample
            .iter()
            .enumerate()
            .map(|(i, y)| {
                if y.len() != d {
                    return Err(EppError::Dimension(format!("sample point {i} has dimension {}, anchor has {d}", y.len())));
                }
                let centred: Vec<f64> = y.iter().zip(&anchor).map(|(v, u)| v - u).collect();
                let a = scalings[orthant_of(&centred) as usize];
                let coords = centred.iter().map(|c| c / a).collect();
                Ok(OrthantPoint::new(coords, i))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { anchor, scalings, points, n: sample.len(), coverage: None })
    }

    /// A process known only inside `coverage` (per-coordinate scaled ranges),
    /// from already scaled points.
    pub fn from_window(anchor: Vec<f64>, scalings: Vec<f64>, n: usize, points: Vec<OrthantPoint>, coverage: Vec<(f64, f64)>) -> Result<Self> {
        let d = anchor.len();
        if d == 0 || d > MAX_DIM || coverage.len() != d {
            return Err(EppError::Dimension(format!("anchor/coverage dimensions {d}/{}", coverage.len())));
        }
        check_scalings(&scalings, d)?;
        Ok(Self { anchor, scalings, points, n, coverage: Some(coverage) })
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scalings(&self) -> &[f64] {
        &self.scalings
    }

    pub fn points(&self) -> &[OrthantPoint] {
        &self.points
    }

    /// Maps a scaled point back to the sample scale.
    pub fn unscale(&self, p: &OrthantPoint) -> Vec<f64> {
        let a = self.scalings[p.orthant as usize];
        p.coords.iter().zip(&self.anchor).map(|(c, u)| c * a + u).collect()
    }

    /// CSV with header `orthant,x1,...,xd`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let d = self.dim();
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header = vec!["orthant".to_string()];
        header.extend((1..=d).map(|j| format!("x{j}")));
        w.write_record(&header)?;
        for p in &self.points {
            let mut rec = vec![orthant_label(p.orthant, d)];
            rec.extend(p.coords.iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

impl PointCount for ScaledProcessD {
    fn count_in(&self, b: &OrthantBox) -> Result<usize> {
        if b.dim() != self.dim() {
            return Err(EppError::Dimension(format!("box of dimension {} on a {}-d process", b.dim(), self.dim())));
        }
        if let Some(cov) = &self.coverage {
            if !b.within(cov) {
                return Err(EppError::OutsideCoverage {
                    lower: b.lower.clone(),
                    upper: b.upper.clone(),
                    covered: cov.clone(),
                });
            }
        }
        Ok(self.points.iter().filter(|p| b.contains(&p.coords)).count())
    }
}

/// One scaled process per anchor. `scalings` holds either one set of `2^d`
/// orthant scalings shared by all anchors or one set per anchor.
pub fn build_scaled_multid(sample: &[Vec<f64>], anchors: &[Vec<f64>], scalings: &[Vec<f64>]) -> Result<Vec<ScaledProcessD>> {
    if scalings.len() != 1 && scalings.len() != anchors.len() {
        return Err(EppError::InvalidScaling(format!(
            "{} scaling sets for {} anchors",
            scalings.len(),
            anchors.len()
        )));
    }
    anchors
        .iter()
        .enumerate()
        .map(|(j, u)| {
            let s = if scalings.len() == 1 { &scalings[0] } else { &scalings[j] };
            ScaledProcessD::new(u.clone(), s.clone(), sample)
        })
        .collect()
}

/// Convenience: sorts `sample` and builds the full process at quantile `q`.
pub fn scaled_from_model(sample: Vec<f64>, model: &UnivariateModel, q: f64, rule: ScaleRule) -> Result<ScaledProcess1D> {
    let s = SortedSample::new(sample);
    let frame = Frame::resolve(model, q, s.len(), rule)?;
    ScaledProcess1D::from_sample(s.values(), frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rvdist::{StreamKey, WindowRequest, WindowedSample};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_box(hi: f64) -> OrthantBox {
        OrthantBox::interval(0.0, hi).unwrap()
    }

    #[test]
    fn single_point_at_left_edge() {
        let m = UnivariateModel::power_law(2.0).unwrap();
        let mut sample = vec![0.5; 100];
        sample[0] = 0.04;
        let p = build_scaled_1d(&sample, &m, 0.0, 100).unwrap();
        assert_relative_eq!(p.frame().scaling.right, 0.1, max_relative = 1e-14);
        assert_relative_eq!(p.points()[0], 0.4, max_relative = 1e-14);
        assert_eq!(p.count_in(&unit_box(0.5)).unwrap(), 1);
    }

    #[test]
    fn two_sided_points() {
        let m = UnivariateModel::uniform(0.0, 1.0).unwrap();
        let frame = Frame::resolve(&m, 0.5, 1000, ScaleRule::Quantile).unwrap();
        let p = ScaledProcess1D::from_sample(&[0.499, 0.502], frame).unwrap();
        assert_relative_eq!(p.points()[0], -1.0, max_relative = 1e-9);
        assert_relative_eq!(p.points()[1], 2.0, max_relative = 1e-9);
    }

    #[test]
    fn far_away_sample_has_empty_window() {
        let m = UnivariateModel::uniform(0.0, 1.0).unwrap();
        let p = build_scaled_1d(&[0.9, 0.95, 0.99], &m, 0.0, 3).unwrap();
        assert_eq!(p.count_in(&unit_box(0.1)).unwrap(), 0);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let m = UnivariateModel::uniform(0.0, 1.0).unwrap();
        assert!(matches!(build_scaled_1d(&[0.1], &m, 0.5, 2), Err(EppError::SizeMismatch { .. })));
    }

    #[test]
    fn empty_process_counts_zero() {
        let m = UnivariateModel::uniform(0.0, 1.0).unwrap();
        let frame = Frame::resolve(&m, 0.5, 10, ScaleRule::Quantile).unwrap();
        let p = ScaledProcess1D::from_sample(&[], frame).unwrap();
        assert_eq!(p.count_in(&unit_box(3.0)).unwrap(), 0);
    }

    #[test]
    fn boxes_must_stay_in_one_orthant() {
        assert!(OrthantBox::interval(-1.0, 1.0).is_err());
        assert!(OrthantBox::interval(1.0, 0.5).is_err());
        let b = OrthantBox::from_origin(&[-1.0, 2.0]).unwrap();
        assert_eq!(b.lower(), &[-1.0, 0.0]);
        assert_eq!(b.upper(), &[0.0, 2.0]);
    }

    #[test]
    fn multid_example_point() {
        let sample = vec![vec![1.0 - 0.01, 1.0 - 0.02]];
        let procs = build_scaled_multid(&sample, &[vec![1.0, 1.0]], &[vec![0.1; 4]]).unwrap();
        let p = &procs[0].points()[0];
        assert_eq!(orthant_label(p.orthant, 2), "--");
        assert_relative_eq!(p.coords[0], -0.1, max_relative = 1e-12);
        assert_relative_eq!(p.coords[1], -0.2, max_relative = 1e-12);
    }

    #[test]
    fn boundary_ties_go_to_nonnegative_orthant() {
        let sample = vec![vec![1.0, 0.5]];
        let procs = build_scaled_multid(&sample, &[vec![1.0, 1.0]], &[vec![0.5, 0.5, 0.5, 0.5]]).unwrap();
        assert_eq!(orthant_label(procs[0].points()[0].orthant, 2), "+-");
    }

    #[test]
    fn multid_reduces_to_1d() {
        let m = UnivariateModel::uniform(0.0, 1.0).unwrap();
        let xs = m.sample(3, 500);
        let frame = Frame::resolve(&m, 0.3, 500, ScaleRule::Quantile).unwrap();
        let one = ScaledProcess1D::from_sample(&xs, frame).unwrap();
        let sample: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let s = frame.scaling;
        let multi = build_scaled_multid(&sample, &[vec![frame.anchor]], &[vec![s.right, s.left.unwrap()]]).unwrap();
        let mut pts: Vec<f64> = multi[0].points().iter().map(|p| p.coords[0]).collect();
        pts.sort_by(f64::total_cmp);
        assert_eq!(pts, one.points());
    }

    #[test]
    fn distant_anchors_have_disjoint_unit_windows() {
        let m = UnivariateModel::uniform(0.0, 1.0).unwrap();
        let n = 20_000;
        let xs = m.sample(41, 2 * n);
        let sample: Vec<Vec<f64>> = xs.chunks(2).map(|c| c.to_vec()).collect();
        let a = 1.0 / (n as f64).sqrt();
        let procs = build_scaled_multid(&sample, &[vec![0.25, 0.25], vec![0.75, 0.75]], &[vec![a; 4]]).unwrap();
        let window = |p: &ScaledProcessD| -> Vec<usize> {
            p.points()
                .iter()
                .filter(|q| q.coords.iter().all(|c| c.abs() <= 1.0))
                .map(|q| q.source)
                .collect()
        };
        let (w1, w2) = (window(&procs[0]), window(&procs[1]));
        assert!(!w1.is_empty() && !w2.is_empty());
        assert!(w1.iter().all(|i| !w2.contains(i)));
    }

    #[test]
    fn windowed_process_refuses_boxes_beyond_coverage() {
        let m = UnivariateModel::power_law(1.0).unwrap();
        let frame = Frame::resolve(&m, 0.0, 10_000, ScaleRule::Quantile).unwrap();
        let ws = WindowedSample::draw(&m, StreamKey::new(1, 2), 10_000, &[WindowRequest::new(0.0, frame.unscale(2.0))]).unwrap();
        let p = ScaledProcess1D::from_view(&ws, frame, 0.0, 2.0).unwrap();
        assert!(p.count_in(&unit_box(2.0)).is_ok());
        assert!(matches!(p.count_in(&unit_box(2.5)), Err(EppError::OutsideCoverage { .. })));
    }

    #[test]
    fn power_rule_uses_declared_rate() {
        let m = UnivariateModel::uniform(0.0, 0.125).unwrap();
        let f = Frame::at_anchor(&m, 0.0, 1000, ScaleRule::Power).unwrap();
        assert_relative_eq!(f.scaling.right, 1e-3, max_relative = 1e-12);
        assert_eq!(f.limit.unwrap().omega_right, 8.0);
    }

    #[test]
    fn csv_has_orthant_header() {
        let p = ScaledProcessD::new(vec![0.0, 0.0], vec![1.0; 4], &[vec![0.5, -0.25]]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "orthant,x1,x2\n+-,0.5,-0.25\n");
    }

    proptest! {
        #[test]
        fn bijection_and_monotone_counts(seed in 0u64..1000, s in 0.0f64..5.0, ds in 0.0f64..5.0) {
            let m = UnivariateModel::uniform(0.0, 1.0).unwrap();
            let xs = m.sample(seed, 300);
            let p = build_scaled_1d(&xs, &m, 0.5, 300).unwrap();
            prop_assert_eq!(p.points().len(), 300);
            prop_assert!(p.points().windows(2).all(|w| w[0] <= w[1]));
            let small = p.count_in(&unit_box(s)).unwrap();
            let big = p.count_in(&unit_box(s + ds)).unwrap();
            prop_assert!(small <= big);
            let neg_small = p.count_in(&OrthantBox::interval(-s, 0.0).unwrap()).unwrap();
            let neg_big = p.count_in(&OrthantBox::interval(-s - ds, 0.0).unwrap()).unwrap();
            prop_assert!(neg_small <= neg_big);
        }

        #[test]
        fn counts_are_additive(seed in 0u64..1000, cut in 0.01f64..0.99) {
            let m = UnivariateModel::power_law(2.0).unwrap();
            let xs = m.sample(seed, 400);
            let p = build_scaled_1d(&xs, &m, 0.0, 400).unwrap();
            let t = 3.0;
            let c = cut * t;
            let whole = p.count_in(&unit_box(t)).unwrap();
            let left = p.count_in(&OrthantBox::interval(0.0, c).unwrap()).unwrap();
            let right = p.count_in(&OrthantBox::interval(c.next_up(), t).unwrap()).unwrap();
            prop_assert_eq!(whole, left + right);
        }

        #[test]
        fn unscaling_recovers_sample(seed in 0u64..1000, ax in 0.1f64..0.9, ay in 0.1f64..0.9) {
            let m = UnivariateModel::uniform(0.0, 1.0).unwrap();
            let xs = m.sample(seed, 200);
            let sample: Vec<Vec<f64>> = xs.chunks(2).map(|c| c.to_vec()).collect();
            let scal = vec![0.1, 0.2, 0.3, 0.4];
            let p = &build_scaled_multid(&sample, &[vec![ax, ay]], &[scal]).unwrap()[0];
            for q in p.points() {
                let back = p.unscale(q);
                for (b, y) in back.iter().zip(&sample[q.source]) {
                    prop_assert!((b - y).abs() <= 1e-12);
                }
                let centred: Vec<f64> = sample[q.source].iter().zip([ax, ay]).map(|(y, u)| y - u).collect();
                prop_assert_eq!(q.orthant, orthant_of(&centred));
            }
        }
    }
}
