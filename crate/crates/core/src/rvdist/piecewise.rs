use serde::{Deserialize, Serialize};

use super::{ModelError, RegVarSpec, Result};

/// One segment `[lo, hi]` of a piecewise-polynomial law. Within the segment
/// the conditional CDF is the regularized incomplete beta `I_s(p, q)` with
/// integer exponents, which is a polynomial in `s = (x - lo) / (hi - lo)`:
/// it rises like `s^p` off the left end and approaches 1 like `(1 - s)^q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    /// Probability mass carried by the segment.
    pub mass: f64,
    /// Local index on the right of `lo`.
    pub right_exponent: u32,
    /// Local index on the left of `hi`.
    pub left_exponent: u32,
}

impl Segment {
    fn degree(&self) -> u32 {
        self.right_exponent + self.left_exponent - 1
    }

    fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn position(&self, x: f64) -> f64 {
        ((x - self.lo) / self.width()).clamp(0.0, 1.0)
    }

    /// `I_s(p, q) = Σ_{i=p}^{m} C(m, i) s^i (1-s)^{m-i}` with `m = p + q - 1`.
    fn conditional_cdf(&self, s: f64) -> f64 {
        let p = self.right_exponent;
        let m = self.degree();
        if s <= 0.5 {
            (p..=m).map(|i| bernstein(m, i, s)).sum()
        } else {
            1.0 - (0..p).map(|i| bernstein(m, i, s)).sum::<f64>()
        }
    }

    fn conditional_sf(&self, s: f64) -> f64 {
        let p = self.right_exponent;
        let m = self.degree();
        if s > 0.5 {
            (0..p).map(|i| bernstein(m, i, s)).sum()
        } else {
            1.0 - (p..=m).map(|i| bernstein(m, i, s)).sum::<f64>()
        }
    }

    fn conditional_pdf(&self, s: f64) -> f64 {
        let p = self.right_exponent as i32;
        let q = self.left_exponent as i32;
        let m = self.degree();
        // 1 / B(p, q) = m * C(m - 1, p - 1)
        m as f64 * binomial(m - 1, self.right_exponent - 1) * s.powi(p - 1) * (1.0 - s).powi(q - 1)
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn bernstein(m: u32, i: u32, s: f64) -> f64 {
    binomial(m, i) * s.powi(i as i32) * (1.0 - s).powi((m - i) as i32)
}

/// A law on `[x_0, x_m]` assembled from polynomial segments between
/// user-supplied breakpoints, each with its own local exponents at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePolynomial {
    segments: Vec<Segment>,
}

impl PiecewisePolynomial {
    /// `breakpoints` are strictly increasing; `weights` (one per segment) are
    /// positive and normalized here; `exponents[j] = (right of x_j, left of
    /// x_{j+1})`.
    pub fn new(breakpoints: Vec<f64>, weights: Vec<f64>, exponents: Vec<(u32, u32)>) -> Result<Self> {
        let k = breakpoints.len();
        if k < 2 || weights.len() != k - 1 || exponents.len() != k - 1 {
            return Err(ModelError::InvalidParameter(format!(
                "piecewise model needs m+1 breakpoints with m weights and m exponent pairs, got {}/{}/{}",
                k,
                weights.len(),
                exponents.len()
            )));
        }
        let total: f64 = weights.iter().sum();
        let segments = breakpoints
            .windows(2)
            .zip(&weights)
            .zip(&exponents)
            .map(|((w, &mass), &(p, q))| Segment {
                lo: w[0],
                hi: w[1],
                mass: mass / total,
                right_exponent: p,
                left_exponent: q,
            })
            .collect();
        let poly = Self { segments };
        poly.validate()?;
        Ok(poly)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(ModelError::InvalidParameter("piecewise model has no segments".into()));
        }
        let mut total = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.lo.is_finite() && s.hi.is_finite() && s.lo < s.hi) {
                return Err(ModelError::InvalidParameter(format!("segment {i} has bounds [{}, {}]", s.lo, s.hi)));
            }
            if i > 0 && self.segments[i - 1].hi != s.lo {
                return Err(ModelError::InvalidParameter(format!("segment {i} does not start where segment {} ends", i - 1)));
            }
            if !(s.mass > 0.0) {
                return Err(ModelError::InvalidParameter(format!("segment {i} has non-positive mass")));
            }
            if s.right_exponent == 0 || s.left_exponent == 0 {
                return Err(ModelError::InvalidParameter(format!("segment {i} exponents must be at least 1")));
            }
            total += s.mass;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(ModelError::InvalidParameter(format!("segment masses sum to {total}")));
        }
        Ok(())
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.segments.iter().map(|s| s.lo).collect();
        b.push(self.segments.last().expect("validated").hi);
        b
    }

    pub fn support(&self) -> (f64, f64) {
        (self.segments[0].lo, self.segments.last().expect("validated").hi)
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let idx = self.segments.partition_point(|s| s.hi <= x).min(self.segments.len() - 1);
        let below: f64 = self.segments[..idx].iter().map(|s| s.mass).sum();
        (idx, below)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let (i, below) = self.locate(x);
        let seg = &self.segments[i];
        below + seg.mass * seg.conditional_cdf(seg.position(x))
    }

    pub fn prob_between(&self, lo: f64, hi: f64) -> f64 {
        let (ilo, _) = self.locate(lo);
        let (ihi, _) = self.locate(hi);
        if ilo == ihi {
            let seg = &self.segments[ilo];
            let (s0, s1) = (seg.position(lo), seg.position(hi));
            // pick the better-conditioned difference
            let d = if s1 <= 0.5 {
                seg.conditional_cdf(s1) - seg.conditional_cdf(s0)
            } else {
                seg.conditional_sf(s0) - seg.conditional_sf(s1)
            };
            seg.mass * d.max(0.0)
        } else {
            (self.cdf(hi) - self.cdf(lo)).max(0.0)
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        let (i, _) = self.locate(x);
        let seg = &self.segments[i];
        seg.mass / seg.width() * seg.conditional_pdf(seg.position(x))
    }

    /// Generalized inverse by bracketed bisection on the segment polynomial,
    /// run until the bracket cannot shrink further in double precision.
    pub fn quantile(&self, p: f64) -> f64 {
        let mut below = 0.0;
        let mut idx = self.segments.len() - 1;
        for (i, s) in self.segments.iter().enumerate() {
            if p <= below + s.mass {
                idx = i;
                break;
            }
            below += s.mass;
        }
        let seg = &self.segments[idx];
        let target = ((p - below) / seg.mass).clamp(0.0, 1.0);
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if seg.conditional_cdf(mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        seg.lo + hi * seg.width()
    }

    pub fn regvar_at(&self, u: f64) -> Option<RegVarSpec> {
        let (lo, hi) = self.support();
        if !(lo..hi).contains(&u) {
            return None;
        }
        let (i, _) = self.locate(u);
        let seg = &self.segments[i];
        if u == seg.lo {
            let p = seg.right_exponent;
            let omega_r = seg.mass * binomial(seg.degree(), p) / seg.width().powi(p as i32);
            if i == 0 {
                RegVarSpec::right(u, p as f64, omega_r).ok()
            } else {
                let prev = &self.segments[i - 1];
                let q = prev.left_exponent;
                let omega_l = prev.mass * binomial(prev.degree(), q) / prev.width().powi(q as i32);
                RegVarSpec::two_sided(u, p as f64, omega_r, q as f64, omega_l).ok()
            }
        } else {
            let w = self.pdf(u);
            if w > 0.0 {
                RegVarSpec::two_sided(u, 1.0, w, 1.0, w).ok()
            } else {
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn poly() -> PiecewisePolynomial {
        PiecewisePolynomial::new(vec![0.0, 0.5, 2.0], vec![1.0, 3.0], vec![(2, 1), (3, 2)]).unwrap()
    }

    #[test]
    fn cdf_hits_segment_masses() {
        let p = poly();
        assert_eq!(p.cdf(0.0), 0.0);
        assert_relative_eq!(p.cdf(0.5), 0.25, max_relative = 1e-15);
        assert_eq!(p.cdf(2.0), 1.0);
        // first segment: I_s(2,1) = s^2
        assert_relative_eq!(p.cdf(0.25), 0.25 * 0.25, max_relative = 1e-14);
    }

    #[test]
    fn density_integrates_to_cdf() {
        let p = poly();
        let r = crate::quadrature::adaptive_simpson(|x| p.pdf(x), 0.5, 1.3, 1e-12, 1 << 20).unwrap();
        assert_relative_eq!(r.value, p.cdf(1.3) - p.cdf(0.5), max_relative = 1e-10);
    }

    #[test]
    fn local_exponents_at_breakpoint() {
        let p = poly();
        let spec = p.regvar_at(0.5).unwrap();
        assert_eq!(spec.alpha_right, 3.0);
        assert_eq!(spec.beta_left, Some(1.0));
        // check the rate numerically: (F(u + x) - F(u)) / x^3 -> omega
        let x = 1e-4;
        assert_relative_eq!(p.prob_between(0.5, 0.5 + x) / x.powi(3), spec.omega_right, max_relative = 1e-3);
        assert_relative_eq!(p.prob_between(0.5 - x, 0.5) / x, spec.omega_left.unwrap(), max_relative = 1e-3);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(PiecewisePolynomial::new(vec![0.0, 1.0], vec![1.0], vec![(0, 1)]).is_err());
        assert!(PiecewisePolynomial::new(vec![0.0, 1.0, 0.5], vec![1.0, 1.0], vec![(1, 1), (1, 1)]).is_err());
        assert!(PiecewisePolynomial::new(vec![0.0, 1.0], vec![1.0, 2.0], vec![(1, 1)]).is_err());
    }
}
