use std::borrow::Cow;

use log::warn;

/// Read access to a sample that may be only partially resolved.
///
/// A full sample knows every value. A windowed sample knows every value in
/// some intervals and only counts elsewhere; queries that would need an
/// unresolved value return `None`.
pub trait SampleView {
    /// Total number of draws, resolved or not.
    fn size(&self) -> usize;

    /// Number of draws in the closed interval `[lo, hi]`.
    fn count_in(&self, lo: f64, hi: f64) -> Option<usize>;

    /// Sorted draws in the closed interval `[lo, hi]`.
    fn values_in(&self, lo: f64, hi: f64) -> Option<Vec<f64>>;

    /// Every resolved draw, ascending.
    fn resolved_values(&self) -> Cow<'_, [f64]>;
}

/// A fully resolved sample, sorted ascending with no repeated values.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSample {
    values: Vec<f64>,
}

impl SortedSample {
    /// Sorts the values and separates ties by nudging each repeat up to the
    /// next representable double.
    pub fn new(mut values: Vec<f64>) -> Self {
        values.retain(|v| !v.is_nan());
        values.sort_by(f64::total_cmp);
        let mut nudged = 0usize;
        for i in 1..values.len() {
            if values[i] <= values[i - 1] {
                values[i] = values[i - 1].next_up();
                nudged += 1;
            }
        }
        if nudged > 0 {
            warn!("separated {nudged} tied sample value(s) by one ulp");
        }
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn range(&self, lo: f64, hi: f64) -> (usize, usize) {
        let a = self.values.partition_point(|&v| v < lo);
        let b = self.values.partition_point(|&v| v <= hi);
        (a, b.max(a))
    }
}

impl From<Vec<f64>> for SortedSample {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}

impl SampleView for SortedSample {
    fn size(&self) -> usize {
        self.values.len()
    }

    fn count_in(&self, lo: f64, hi: f64) -> Option<usize> {
        let (a, b) = self.range(lo, hi);
        Some(b - a)
    }

    fn values_in(&self, lo: f64, hi: f64) -> Option<Vec<f64>> {
        let (a, b) = self.range(lo, hi);
        Some(self.values[a..b].to_vec())
    }

    fn resolved_values(&self) -> Cow<'_, [f64]> {
        Cow::Borrowed(&self.values)
    }
}
