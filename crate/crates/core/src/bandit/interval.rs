//! Finite unions of disjoint intervals on the bid axis.
//!
//! Endpoints are not tracked as open or closed: every consumer samples from the
//! set or measures its length, and both are insensitive to a finite number of
//! boundary points.

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntervalSet {
    // sorted, pairwise disjoint, each with lo < hi
    spans: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self { spans: Vec::new() }
    }

    /// The interval `[lo, hi]`, or the empty set when `hi <= lo`.
    pub fn single(lo: f64, hi: f64) -> Self {
        if hi > lo {
            Self {
                spans: vec![(lo, hi)],
            }
        } else {
            Self::empty()
        }
    }

    pub fn spans(&self) -> &[(f64, f64)] {
        &self.spans
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.spans.iter().map(|(lo, hi)| hi - lo).sum()
    }

    /// Removes `[lo, hi]` from the set.
    pub fn subtract(&mut self, lo: f64, hi: f64) {
        if hi <= lo || self.spans.is_empty() {
            return;
        }
        let mut out = Vec::with_capacity(self.spans.len() + 1);
        for &(a, b) in &self.spans {
            if hi <= a || lo >= b {
                out.push((a, b));
                continue;
            }
            if lo > a {
                out.push((a, lo));
            }
            if hi < b {
                out.push((hi, b));
            }
        }
        self.spans = out;
    }

    /// Interior membership; boundary points report `false`.
    pub fn contains_interior(&self, x: f64) -> bool {
        self.spans.iter().any(|&(a, b)| a < x && x < b)
    }

    /// Maps `u` in `[0, 1)` to the point at fraction `u` of the total length.
    pub fn point_at_fraction(&self, u: f64) -> Option<f64> {
        let total = self.length();
        if total <= 0.0 {
            return None;
        }
        let mut remaining = u.clamp(0.0, 1.0) * total;
        for &(a, b) in &self.spans {
            let len = b - a;
            if remaining < len {
                return Some(a + remaining);
            }
            remaining -= len;
        }
        self.spans.last().map(|&(a, b)| 0.5 * (a + b))
    }

    /// `x` itself when it lies inside a span, otherwise the midpoint of the
    /// span closest to `x`.
    pub fn project(&self, x: f64) -> Option<f64> {
        let mut best: Option<(f64, f64)> = None;
        for &(a, b) in &self.spans {
            if a < x && x < b {
                return Some(x);
            }
            let gap = if x <= a { a - x } else { x - b };
            let mid = 0.5 * (a + b);
            if best.is_none_or(|(g, _)| gap < g) {
                best = Some((gap, mid));
            }
        }
        best.map(|(_, m)| m)
    }
}
