//! Univariate distribution families with known local power-law behaviour at
//! finite anchor points, with exact CDFs, generalized-inverse quantiles and
//! inverse-CDF sampling.
//!
//! A model is *regularly varying on the right* of an anchor `u` with index
//! `α` and rate `ω` when `F(u + x) - F(u) ~ ω x^α` as `x ↓ 0`, and on the
//! left with index `β` when `F(u) - F(u - x) ~ ω' x^β`. All families here
//! have eventually constant slowly varying factors, so `ω` is a number.

mod piecewise;
mod sample;
mod stream;
mod window;

pub use piecewise::{PiecewisePolynomial, Segment};
pub use sample::{SampleView, SortedSample};
pub use stream::{StreamKey, UniformStream, STREAM_VERSION};
pub use window::{WindowRequest, WindowedSample};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("probability {0} outside [0, 1]")]
    ProbabilityDomain(f64),
    #[error("tail-exhausted: F({anchor}) + 1/{n} exceeds 1, right scaling unavailable")]
    TailExhausted { anchor: f64, n: usize },
    #[error("degenerate scaling at anchor {anchor}: F is flat on the {side} side")]
    DegenerateScaling { anchor: f64, side: &'static str },
    #[error("model is not regularly varying on the right of {0}")]
    NoRegularVariation(f64),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Local power-law annotation of a model at an anchor point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegVarSpec {
    pub anchor: f64,
    pub alpha_right: f64,
    pub omega_right: f64,
    pub beta_left: Option<f64>,
    pub omega_left: Option<f64>,
}

impl RegVarSpec {
    pub fn right(anchor: f64, alpha: f64, omega: f64) -> Result<Self> {
        let spec = Self { anchor, alpha_right: alpha, omega_right: omega, beta_left: None, omega_left: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn two_sided(anchor: f64, alpha: f64, omega_right: f64, beta: f64, omega_left: f64) -> Result<Self> {
        let spec = Self {
            anchor,
            alpha_right: alpha,
            omega_right,
            beta_left: Some(beta),
            omega_left: Some(omega_left),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !self.anchor.is_finite() {
            return Err(ModelError::InvalidParameter(format!("anchor {} is not finite", self.anchor)));
        }
        if !positive(self.alpha_right) || !positive(self.omega_right) {
            return Err(ModelError::InvalidParameter(format!(
                "right index/rate must be positive, got alpha={} omega={}",
                self.alpha_right, self.omega_right
            )));
        }
        match (self.beta_left, self.omega_left) {
            (None, None) => Ok(()),
            (Some(b), Some(w)) if positive(b) && positive(w) => Ok(()),
            (b, w) => Err(ModelError::InvalidParameter(format!(
                "left index/rate must both be present and positive, got beta={b:?} omega={w:?}"
            ))),
        }
    }

    /// The same indices with unit rates: the limit mean measure obtained
    /// under quantile-matched scaling constants.
    pub fn normalized(&self) -> Self {
        Self { omega_right: 1.0, omega_left: self.beta_left.map(|_| 1.0), ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// `F(x) = x^α` on `[0, 1]`.
    PowerLaw { alpha: f64 },
    Uniform { a: f64, b: f64 },
    /// Uniform density on `[0, g1] ∪ [g2, 1]`.
    Gap { g1: f64, g2: f64 },
    Piecewise(PiecewisePolynomial),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateModel {
    family: Family,
    annotations: Vec<RegVarSpec>,
}

impl UnivariateModel {
    pub fn power_law(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ModelError::InvalidParameter(format!("power-law alpha must be positive, got {alpha}")));
        }
        Self::with_default_annotations(Family::PowerLaw { alpha }, &[0.0])
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(ModelError::InvalidParameter(format!("uniform needs a < b, got [{a}, {b}]")));
        }
        Self::with_default_annotations(Family::Uniform { a, b }, &[a, 0.5 * (a + b)])
    }

    pub fn gap(g1: f64, g2: f64) -> Result<Self> {
        if !(0.0 <= g1 && g1 < g2 && g2 <= 1.0) || (g1 == 0.0 && g2 == 1.0) {
            return Err(ModelError::InvalidParameter(format!(
                "gap model needs 0 <= g1 < g2 <= 1 with positive mass, got ({g1}, {g2})"
            )));
        }
        Self::with_default_annotations(Family::Gap { g1, g2 }, &[0.0, g2])
    }

    pub fn piecewise(poly: PiecewisePolynomial) -> Result<Self> {
        let anchors: Vec<f64> = poly.breakpoints().to_vec();
        Self::with_default_annotations(Family::Piecewise(poly), &anchors)
    }

    pub fn from_family(family: Family) -> Result<Self> {
        match family {
            Family::PowerLaw { alpha } => Self::power_law(alpha),
            Family::Uniform { a, b } => Self::uniform(a, b),
            Family::Gap { g1, g2 } => Self::gap(g1, g2),
            Family::Piecewise(p) => {
                p.validate()?;
                Self::piecewise(p)
            }
        }
    }

    fn with_default_annotations(family: Family, anchors: &[f64]) -> Result<Self> {
        let mut model = Self { family, annotations: Vec::new() };
        for &u in anchors {
            if let Some(spec) = model.regvar_at(u) {
                model.annotations.push(spec);
            }
        }
        Ok(model)
    }

    /// Adds the local annotation at `u`; fails when the model has no right
    /// regular variation there.
    pub fn annotate(mut self, u: f64) -> Result<Self> {
        let spec = self.regvar_at(u).ok_or(ModelError::NoRegularVariation(u))?;
        if !self.annotations.iter().any(|s| s.anchor == u) {
            self.annotations.push(spec);
        }
        Ok(self)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn annotations(&self) -> &[RegVarSpec] {
        &self.annotations
    }

    pub fn annotation_at(&self, u: f64) -> Option<RegVarSpec> {
        self.annotations.iter().copied().find(|s| s.anchor == u).or_else(|| self.regvar_at(u))
    }

    pub fn support(&self) -> (f64, f64) {
        match &self.family {
            Family::PowerLaw { .. } | Family::Gap { .. } => (0.0, 1.0),
            Family::Uniform { a, b } => (*a, *b),
            Family::Piecewise(p) => p.support(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match &self.family {
            Family::PowerLaw { alpha } => x.powf(*alpha),
            Family::Uniform { a, b } => (x - a) / (b - a),
            Family::Gap { g1, g2 } => {
                let mass = g1 + 1.0 - g2;
                if x <= *g1 {
                    x / mass
                } else if x <= *g2 {
                    g1 / mass
                } else {
                    (g1 + x - g2) / mass
                }
            }
            Family::Piecewise(p) => p.cdf(x),
        }
    }

    /// `P(lo < Y <= hi)`, computed without forming `F(hi) - F(lo)` where the
    /// family allows it.
    pub fn prob_between(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let (slo, shi) = self.support();
        let lo = lo.max(slo);
        let hi = hi.min(shi);
        if hi <= lo {
            return 0.0;
        }
        match &self.family {
            Family::Uniform { a, b } => (hi - lo) / (b - a),
            Family::Gap { g1, g2 } => {
                let mass = g1 + 1.0 - g2;
                let len = |l: f64, h: f64| (h.min(*g1) - l).max(0.0) + (h - l.max(*g2)).max(0.0);
                len(lo, hi) / mass
            }
            Family::Piecewise(p) => p.prob_between(lo, hi),
            Family::PowerLaw { .. } => self.cdf(hi) - self.cdf(lo),
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        let (_, hi) = self.support();
        self.prob_between(x, hi)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        match &self.family {
            Family::PowerLaw { alpha } => alpha * x.powf(alpha - 1.0),
            Family::Uniform { a, b } => 1.0 / (b - a),
            Family::Gap { g1, g2 } => {
                if x <= *g1 || x >= *g2 {
                    1.0 / (g1 + 1.0 - g2)
                } else {
                    0.0
                }
            }
            Family::Piecewise(p) => p.pdf(x),
        }
    }

    /// Generalized inverse `inf { x : F(x) >= p }`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(ModelError::ProbabilityDomain(p));
        }
        let (lo, hi) = self.support();
        if p == 0.0 {
            return Ok(lo);
        }
        if p == 1.0 {
            return Ok(hi);
        }
        Ok(match &self.family {
            Family::PowerLaw { alpha } => p.powf(1.0 / alpha),
            Family::Uniform { a, b } => a + p * (b - a),
            Family::Gap { g1, g2 } => {
                let mass = g1 + 1.0 - g2;
                let flat_level = g1 / mass;
                if (p - flat_level).abs() <= 8.0 * f64::EPSILON * flat_level {
                    // the flat stretch [g1, g2] sits at this level; take its left end
                    *g1
                } else if p < flat_level {
                    (p * mass).min(*g1)
                } else {
                    g2 + (p * mass - g1).max(0.0)
                }
            }
            Family::Piecewise(poly) => poly.quantile(p),
        })
    }

    /// Local right/left power-law behaviour at `u`, if any.
    pub fn regvar_at(&self, u: f64) -> Option<RegVarSpec> {
        let (lo, hi) = self.support();
        if !(lo..hi).contains(&u) {
            return None;
        }
        let interior = u > lo;
        let spec = match &self.family {
            Family::PowerLaw { alpha } => {
                if u == 0.0 {
                    RegVarSpec::right(0.0, *alpha, 1.0)
                } else {
                    let w = alpha * u.powf(alpha - 1.0);
                    RegVarSpec::two_sided(u, 1.0, w, 1.0, w)
                }
            }
            Family::Uniform { a, b } => {
                let w = 1.0 / (b - a);
                if interior {
                    RegVarSpec::two_sided(u, 1.0, w, 1.0, w)
                } else {
                    RegVarSpec::right(u, 1.0, w)
                }
            }
            Family::Gap { g1, g2 } => {
                let w = 1.0 / (g1 + 1.0 - g2);
                if u < *g1 {
                    if interior {
                        RegVarSpec::two_sided(u, 1.0, w, 1.0, w)
                    } else {
                        RegVarSpec::right(u, 1.0, w)
                    }
                } else if u < *g2 {
                    return None;
                } else if u == *g2 {
                    // flat on the left of g2
                    RegVarSpec::right(u, 1.0, w)
                } else {
                    RegVarSpec::two_sided(u, 1.0, w, 1.0, w)
                }
            }
            Family::Piecewise(p) => return p.regvar_at(u),
        };
        spec.ok()
    }

    /// Scaling constants matching one unit of probability mass per `n` draws
    /// on each side of `u`: `a_n = Q(F(u) + 1/n) - u` and, when
    /// `F(u) >= 1/n`, `b_n = u - Q(F(u) - 1/n)`.
    pub fn scaling_constants(&self, u: f64, n: usize) -> Result<(f64, Option<f64>)> {
        if n == 0 {
            return Err(ModelError::InvalidParameter("n must be at least 1".into()));
        }
        let fu = self.cdf(u);
        let step = 1.0 / n as f64;
        if fu + step > 1.0 + 1e-15 {
            return Err(ModelError::TailExhausted { anchor: u, n });
        }
        let a = self.quantile((fu + step).min(1.0))? - u;
        if !(a > 0.0) {
            return Err(ModelError::DegenerateScaling { anchor: u, side: "right" });
        }
        let b = if fu >= step {
            let b = u - self.quantile((fu - step).max(0.0))?;
            if !(b > 0.0) {
                return Err(ModelError::DegenerateScaling { anchor: u, side: "left" });
            }
            Some(b)
        } else {
            None
        };
        Ok((a, b))
    }

    /// `n` i.i.d. draws by inverse CDF from stream 0 of `seed`.
    pub fn sample(&self, seed: u64, n: usize) -> Vec<f64> {
        self.sample_stream(StreamKey::new(seed, 0), n)
    }

    pub fn sample_stream(&self, key: StreamKey, n: usize) -> Vec<f64> {
        let mut stream = UniformStream::new(key);
        (0..n)
            .map(|_| {
                let u = stream.next_open01();
                self.quantile(u).expect("open-interval uniform is a valid probability")
            })
            .collect()
    }
}
