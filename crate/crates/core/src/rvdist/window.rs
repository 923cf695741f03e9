//! Exact partial sampling around chosen windows.
//!
//! Monte Carlo checks of local limit theorems only ever look at the handful
//! of draws near an anchor, yet the sample size `n` must be large. A
//! [`WindowedSample`] has the law of a full i.i.d. sample of size `n` but
//! resolves only the draws that fall in requested windows (plus, optionally,
//! a fixed number of nearest draws outside each window); everything else is
//! kept as a count per gap. Generation works on the uniform scale:
//!
//! 1. cell counts are multinomial, drawn as a chain of binomials;
//! 2. draws inside a window are i.i.d. uniform on it;
//! 3. the nearest `k` draws of a gap holding `c` uniforms are generated as
//!    successive order statistics (`min = lo + (hi - lo)(1 - V^{1/c})`), the
//!    remaining `c - 1` staying uniform above the minimum.
//!
//! Values are mapped through the model quantile at the end.

use rand_distr::{Binomial, Distribution};

use super::{ModelError, Result, SampleView, StreamKey, UniformStream, UnivariateModel};

/// Resolve every draw in `[lo, hi]` (model scale), plus the `extra_below`
/// nearest draws under `lo` and the `extra_above` nearest draws over `hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowRequest {
    pub lo: f64,
    pub hi: f64,
    pub extra_below: usize,
    pub extra_above: usize,
}

impl WindowRequest {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi, extra_below: 0, extra_above: 0 }
    }

    /// The `k` nearest draws on each side of `center`.
    pub fn neighbours(center: f64, k: usize) -> Self {
        Self { lo: center, hi: center, extra_below: k, extra_above: k }
    }

    pub fn with_extra(mut self, below: usize, above: usize) -> Self {
        self.extra_below = below;
        self.extra_above = above;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
enum CellKind {
    Resolved(Vec<f64>),
    Counted(usize),
}

/// `[lo, hi]` on the model scale; counted cells are open intervals.
#[derive(Debug, Clone, PartialEq)]
struct Cell {
    lo: f64,
    hi: f64,
    kind: CellKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    n: usize,
    cells: Vec<Cell>,
}

// Uniform-scale cell before mapping to the model scale.
struct UCell {
    lo: f64,
    hi: f64,
    y_lo: f64,
    y_hi: f64,
    resolved: Option<Vec<f64>>,
    count: usize,
}

struct UWindow {
    lo: f64,
    hi: f64,
    y_lo: f64,
    y_hi: f64,
    below: usize,
    above: usize,
}

impl WindowedSample {
    pub fn draw(model: &UnivariateModel, key: StreamKey, n: usize, requests: &[WindowRequest]) -> Result<Self> {
        let mut windows: Vec<UWindow> = Vec::with_capacity(requests.len());
        let mut sorted = requests.to_vec();
        sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for r in sorted {
            if !(r.lo <= r.hi) {
                return Err(ModelError::InvalidParameter(format!("window [{}, {}] is empty", r.lo, r.hi)));
            }
            let (u_lo, u_hi) = (model.cdf(r.lo), model.cdf(r.hi));
            match windows.last_mut() {
                Some(w) if u_lo <= w.hi => {
                    if u_hi > w.hi {
                        w.hi = u_hi;
                        w.y_hi = r.hi;
                        w.above = r.extra_above;
                    } else {
                        w.above = w.above.max(r.extra_above);
                    }
                    w.below = w.below.max(r.extra_below);
                }
                _ => windows.push(UWindow {
                    lo: u_lo,
                    hi: u_hi,
                    y_lo: r.lo,
                    y_hi: r.hi,
                    below: r.extra_below,
                    above: r.extra_above,
                }),
            }
        }

        let mut stream = UniformStream::new(key);

        // Cell layout: gap_0, window_1, gap_1, ..., window_m, gap_m.
        let mut widths = Vec::with_capacity(2 * windows.len() + 1);
        let mut prev = 0.0;
        for w in &windows {
            widths.push((w.lo - prev).max(0.0));
            widths.push(w.hi - w.lo);
            prev = w.hi;
        }
        widths.push((1.0 - prev).max(0.0));

        let mut counts = vec![0usize; widths.len()];
        let mut remaining_n = n as u64;
        let mut remaining_mass: f64 = widths.iter().sum();
        for (i, &w) in widths.iter().enumerate() {
            if i + 1 == widths.len() || remaining_n == 0 {
                counts[i] = remaining_n as usize;
                remaining_n = 0;
                continue;
            }
            let p = if remaining_mass > 0.0 { (w / remaining_mass).clamp(0.0, 1.0) } else { 0.0 };
            let c = Binomial::new(remaining_n, p)
                .expect("binomial parameters are in range")
                .sample(&mut stream);
            counts[i] = c as usize;
            remaining_n -= c;
            remaining_mass -= w;
        }

        let mut ucells: Vec<UCell> = Vec::with_capacity(widths.len());
        let mut prev_u = 0.0;
        let mut prev_y = f64::NEG_INFINITY;
        for (j, w) in windows.iter().enumerate() {
            ucells.push(UCell { lo: prev_u, hi: w.lo, y_lo: prev_y, y_hi: w.y_lo, resolved: None, count: counts[2 * j] });
            let c = counts[2 * j + 1];
            let mut vals: Vec<f64> = (0..c).map(|_| w.lo + (w.hi - w.lo) * stream.next_open01()).collect();
            vals.sort_by(f64::total_cmp);
            ucells.push(UCell { lo: w.lo, hi: w.hi, y_lo: w.y_lo, y_hi: w.y_hi, resolved: Some(vals), count: c });
            prev_u = w.hi;
            prev_y = w.y_hi;
        }
        ucells.push(UCell { lo: prev_u, hi: 1.0, y_lo: prev_y, y_hi: f64::INFINITY, resolved: None, count: *counts.last().unwrap_or(&0) });

        // Peel nearest order statistics out of each gap into its neighbours.
        for (j, w) in windows.iter().enumerate() {
            let gap_below = 2 * j;
            let gap_above = 2 * j + 2;
            if w.below > 0 {
                let exhausted = ucells[gap_below].count <= w.below;
                let gap_lo = ucells[gap_below].lo;
                let taken = take_from_top(&mut ucells[gap_below], w.below, &mut stream);
                if exhausted {
                    ucells[gap_below].hi = gap_lo;
                }
                let new_lo = if exhausted { gap_lo } else { *taken.last().expect("non-empty") };
                let win = ucells[2 * j + 1].resolved.as_mut().expect("window cell");
                let mut merged: Vec<f64> = taken.into_iter().rev().collect();
                merged.extend_from_slice(win);
                *win = merged;
                ucells[2 * j + 1].lo = new_lo;
                ucells[2 * j + 1].y_lo = f64::NAN; // recomputed below
            }
            if w.above > 0 {
                let exhausted = ucells[gap_above].count <= w.above;
                let gap_hi = ucells[gap_above].hi;
                let taken = take_from_bottom(&mut ucells[gap_above], w.above, &mut stream);
                let new_hi = if exhausted { gap_hi } else { *taken.last().expect("non-empty") };
                if exhausted {
                    ucells[gap_above].lo = gap_hi;
                }
                ucells[2 * j + 1].resolved.as_mut().expect("window cell").extend(taken);
                ucells[2 * j + 1].hi = new_hi;
                ucells[2 * j + 1].y_hi = f64::NAN;
            }
        }

        let mut cells = Vec::with_capacity(ucells.len());
        for uc in &ucells {
            let kind = match &uc.resolved {
                Some(vals) => CellKind::Resolved(
                    vals.iter()
                        .map(|&u| model.quantile(u).expect("uniform in [0, 1]"))
                        .collect(),
                ),
                None => CellKind::Counted(uc.count),
            };
            let lo = if uc.y_lo.is_nan() { model.quantile(uc.lo)? } else { uc.y_lo };
            let hi = if uc.y_hi.is_nan() { model.quantile(uc.hi)? } else { uc.y_hi };
            cells.push(Cell { lo, hi, kind });
        }
        // Gap bounds follow the resolved neighbours after peeling.
        for i in 0..cells.len() {
            if matches!(cells[i].kind, CellKind::Counted(_)) {
                if i > 0 {
                    cells[i].lo = cells[i - 1].hi;
                }
                if i + 1 < cells.len() {
                    cells[i].hi = cells[i + 1].lo;
                }
            }
        }
        // A resolved value must lie inside its cell even after rounding.
        for c in &mut cells {
            let (lo, hi) = (c.lo, c.hi);
            if let CellKind::Resolved(v) = &mut c.kind {
                for x in v.iter_mut() {
                    *x = x.clamp(lo, hi);
                }
            }
        }
        Ok(Self { n, cells })
    }

    /// All resolved draws, ascending.
    pub fn resolved(&self) -> Vec<f64> {
        self.cells
            .iter()
            .filter_map(|c| match &c.kind {
                CellKind::Resolved(v) => Some(v.iter().copied()),
                CellKind::Counted(_) => None,
            })
            .flatten()
            .collect()
    }

    /// Resolved intervals `[lo, hi]` on the model scale.
    pub fn resolved_ranges(&self) -> Vec<(f64, f64)> {
        self.cells
            .iter()
            .filter(|c| matches!(c.kind, CellKind::Resolved(_)))
            .map(|c| (c.lo, c.hi))
            .collect()
    }
}

// Fraction of the way from one end of an interval to the nearest of `count`
// uniforms on it: 1 - V^{1/count}.
fn nearest_fraction(count: usize, stream: &mut UniformStream) -> f64 {
    -(stream.next_open01().ln() / count as f64).exp_m1()
}

fn take_from_bottom(cell: &mut UCell, k: usize, stream: &mut UniformStream) -> Vec<f64> {
    let k = k.min(cell.count);
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        cell.lo += (cell.hi - cell.lo) * nearest_fraction(cell.count, stream);
        cell.count -= 1;
        out.push(cell.lo);
    }
    out
}

fn take_from_top(cell: &mut UCell, k: usize, stream: &mut UniformStream) -> Vec<f64> {
    let k = k.min(cell.count);
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        cell.hi -= (cell.hi - cell.lo) * nearest_fraction(cell.count, stream);
        cell.count -= 1;
        out.push(cell.hi);
    }
    out
}

impl SampleView for WindowedSample {
    fn size(&self) -> usize {
        self.n
    }

    fn resolved_values(&self) -> std::borrow::Cow<'_, [f64]> {
        std::borrow::Cow::Owned(self.resolved())
    }

    fn count_in(&self, lo: f64, hi: f64) -> Option<usize> {
        let mut total = 0;
        for c in &self.cells {
            match &c.kind {
                CellKind::Resolved(v) => {
                    let a = v.partition_point(|&x| x < lo);
                    let b = v.partition_point(|&x| x <= hi);
                    total += b.saturating_sub(a);
                }
                CellKind::Counted(k) => {
                    if *k == 0 || c.hi <= lo || c.lo >= hi {
                        continue;
                    }
                    if c.lo >= lo && c.hi <= hi {
                        total += k;
                    } else {
                        return None;
                    }
                }
            }
        }
        Some(total)
    }

    fn values_in(&self, lo: f64, hi: f64) -> Option<Vec<f64>> {
        let mut out = Vec::new();
        for c in &self.cells {
            match &c.kind {
                CellKind::Resolved(v) => out.extend(v.iter().copied().filter(|&x| x >= lo && x <= hi)),
                CellKind::Counted(k) => {
                    if *k > 0 && c.hi > lo && c.lo < hi {
                        return None;
                    }
                }
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_counts_add_up_to_n() {
        let m = UnivariateModel::uniform(0.0, 1.0).unwrap();
        let ws = WindowedSample::draw(
            &m,
            StreamKey::new(1, 0),
            10_000,
            &[WindowRequest::new(0.2, 0.21), WindowRequest::new(0.7, 0.75).with_extra(3, 2)],
        )
        .unwrap();
        assert_eq!(ws.count_in(f64::NEG_INFINITY, f64::INFINITY), Some(10_000));
        assert!(ws.count_in(0.0, 0.5).is_none());
        let near = ws.values_in(0.2, 0.21).unwrap();
        assert!(near.iter().all(|&x| (0.2..=0.21).contains(&x)));
        let ranges = ws.resolved_ranges();
        assert_eq!(ranges.len(), 2);
        assert!(ranges[1].0 < 0.7 && ranges[1].1 > 0.75);
        // the three extra draws below 0.7 are resolved
        assert_eq!(ws.count_in(ranges[1].0, 0.7), Some(3));
    }

    #[test]
    fn neighbour_request_resolves_exactly_k_each_side() {
        let m = UnivariateModel::power_law(1.0).unwrap();
        let ws = WindowedSample::draw(&m, StreamKey::new(5, 9), 100_000, &[WindowRequest::neighbours(0.5, 4)]).unwrap();
        let vals = ws.resolved();
        assert_eq!(vals.len(), 8);
        assert_eq!(vals.iter().filter(|&&x| x < 0.5).count(), 4);
        assert!(vals.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn exhausted_gaps_are_resolved_whole() {
        let m = UnivariateModel::uniform(0.0, 1.0).unwrap();
        let ws = WindowedSample::draw(&m, StreamKey::new(1, 0), 3, &[WindowRequest::neighbours(0.5, 5)]).unwrap();
        assert_eq!(ws.resolved().len(), 3);
        assert_eq!(ws.resolved_ranges(), vec![(0.0, 1.0)]);
        assert_eq!(ws.count_in(0.0, 1.0), Some(3));
    }

    #[test]
    fn windowed_counts_match_full_sample_law() {
        // Mean and variance of the count in a window of mass 2/n must agree
        // with Binomial(n, 2/n) under both generators.
        let m = UnivariateModel::power_law(2.0).unwrap();
        let n = 2_000usize;
        let hi = (2.0 / n as f64).sqrt();
        let reps = 2_000u64;
        let mut full = Vec::new();
        let mut win = Vec::new();
        for r in 0..reps {
            let xs = m.sample_stream(StreamKey::new(17, r), n);
            full.push(xs.iter().filter(|&&x| x <= hi).count() as f64);
            let ws = WindowedSample::draw(&m, StreamKey::new(18, r), n, &[WindowRequest::new(0.0, hi)]).unwrap();
            win.push(ws.count_in(0.0, hi).unwrap() as f64);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64]| {
            let m = mean(v);
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let expected_var = 2.0 * (1.0 - 2.0 / n as f64);
        let se = (expected_var / reps as f64).sqrt();
        assert!((mean(&full) - 2.0).abs() < 4.0 * se);
        assert!((mean(&win) - 2.0).abs() < 4.0 * se);
        assert!((var(&win) / expected_var - 1.0).abs() < 0.15);
        assert!((var(&full) / expected_var - 1.0).abs() < 0.15);
    }
}
