//! Small numeric helpers shared by the solver and the simulator.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Mean and standard error of the mean.
///
/// The mean is accumulated as deviations from the first sample, so a sample
/// of identical values returns that value bit-exactly.
pub fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let pivot = samples[0];
    let mut acc = CompensatedSum::new();
    for &s in samples {
        acc.add(s - pivot);
    }
    let mean = pivot + acc.total() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let mut sq = CompensatedSum::new();
    for &s in samples {
        let d = s - mean;
        sq.add(d * d);
    }
    let var = sq.total() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Splits a fractional grid coordinate into a cell index and a weight in
/// `[0, 1)`. Coordinates within `1e-9` of a node snap onto it; the last node
/// is returned with weight zero.
pub(crate) fn locate(pos: f64, n: usize) -> (usize, f64) {
    let p = pos.clamp(0.0, n as f64);
    let nearest = p.round();
    if (p - nearest).abs() <= 1e-9 {
        return (nearest as usize, 0.0);
    }
    let idx = p.floor() as usize;
    if idx >= n {
        (n, 0.0)
    } else {
        (idx, p - idx as f64)
    }
}

/// Linear blend that returns `a` exactly for `w == 0` and for `a == b`.
#[inline]
pub(crate) fn lerp(a: f64, b: f64, w: f64) -> f64 {
    if w == 0.0 {
        a
    } else {
        a + w * (b - a)
    }
}

/// Formats a value with 17 significant digits.
pub fn fmt17(value: f64) -> String {
    format!("{value:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_have_exact_mean() {
        let xs = vec![0.6; 1001];
        let (m, se) = mean_and_stderr(&xs);
        assert_eq!(m, 0.6);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(1e16);
        for _ in 0..10 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.total(), 10.0);
    }

    #[test]
    fn locate_snaps_to_nodes() {
        assert_eq!(locate(3.0 * (1.0 / 3.0) * 3.0, 10), (3, 0.0));
        assert_eq!(locate(10.0, 10), (10, 0.0));
        assert_eq!(locate(12.0, 10), (10, 0.0));
        assert_eq!(locate(-1.0, 10), (0, 0.0));
        let (i, w) = locate(2.25, 10);
        assert_eq!(i, 2);
        assert!((w - 0.25).abs() < 1e-15);
    }

    #[test]
    fn fmt17_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 12345.678901234567] {
            let s = fmt17(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }
}
