//! Neumaier compensated summation.
//!
//! Block and trajectory reductions always run in a fixed order through this
//! accumulator so results do not depend on the number of worker threads.

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    compensation: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            compensation: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation = self.compensation + ((self.sum - t) + x);
        } else {
            self.compensation = self.compensation + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    /// Merges another partial sum, keeping both compensation terms.
    #[inline]
    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.compensation
    }
}

/// Compensated sum of a sequence, in iteration order.
pub fn compensated_sum<T: Real>(values: impl IntoIterator<Item = T>) -> T {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_terms() {
        let xs = [1.0f64, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(xs), 2.0);
        assert_eq!(xs.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let mut a = CompensatedSum::new();
        let mut b = CompensatedSum::new();
        for &x in &xs[..500] {
            a.add(x);
        }
        for &x in &xs[500..] {
            b.add(x);
        }
        a.merge(&b);
        assert!((a.value() - compensated_sum(xs.iter().copied())).abs() < 1e-15);
    }
}
