//! Compensated (Kahan) summation.
//!
//! Long schedules sum around 10^6 terms and online means run for 10^8 steps;
//! plain accumulation would lose enough precision to break the 1e-10 .. 1e-12
//! agreement bounds the rest of the crate promises. Every long-running
//! accumulation therefore goes through [`KahanSum`] or [`kahan_add`].

/// One compensated accumulator: `value()` is the running sum, with the
/// low-order bits lost by each addition tracked in a correction term.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Start from an exact initial value.
    pub fn with_value(value: f64) -> Self {
        Self {
            sum: value,
            compensation: 0.0,
        }
    }

    pub fn add(&mut self, x: f64) {
        kahan_add(&mut self.sum, &mut self.compensation, x);
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Single compensated addition on externally owned state.
///
/// Useful where per-coordinate accumulators live in flat slices (e.g. the
/// online average of an iterate vector) and a struct per coordinate would
/// get in the way.
#[inline]
pub fn kahan_add(sum: &mut f64, compensation: &mut f64, x: f64) {
    let y = x - *compensation;
    let t = *sum + y;
    *compensation = (t - *sum) - y;
    *sum = t;
}

/// Compensated sum of a slice.
pub fn sum(values: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}
