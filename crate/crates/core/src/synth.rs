//! Synthetic two-group Gaussian cohorts for calibration and power studies.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dataset::LabeledDataset;
use crate::error::Result;
use crate::rng;

/// Shape of a synthetic cohort: `n_pos` positives drawn from `N(shift, I)` on
/// the first `shifted` coordinates (and `N(0, 1)` elsewhere), `n_neg`
/// negatives from `N(0, I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianShift {
    pub n_pos: usize,
    pub n_neg: usize,
    pub dims: usize,
    pub shifted: usize,
    pub shift: f64,
}

impl GaussianShift {
    /// 24 positives, 99 negatives, 17 dimensions, no shift.
    pub fn cohort_null() -> Self {
        GaussianShift {
            n_pos: 24,
            n_neg: 99,
            dims: 17,
            shifted: 0,
            shift: 0.0,
        }
    }

    /// Cohort shape with a shift on the first five coordinates.
    pub fn cohort_shifted(shift: f64) -> Self {
        GaussianShift {
            shifted: 5,
            shift,
            ..GaussianShift::cohort_null()
        }
    }

    pub fn sample(&self, seed: u64) -> Result<LabeledDataset> {
        let mut rng = rng::stream(seed, &[0x5157]);
        let n = self.n_pos + self.n_neg;
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let positive = i < self.n_pos;
            let row = (0..self.dims)
                .map(|j| {
                    let z: f64 = rng.sample(StandardNormal);
                    if positive && j < self.shifted {
                        z + self.shift
                    } else {
                        z
                    }
                })
                .collect();
            rows.push(row);
            labels.push(positive);
        }
        LabeledDataset::new(
            (0..n).map(|i| format!("S{i:04}")).collect(),
            (0..self.dims).map(|j| format!("f{j}")).collect(),
            rows,
            labels,
        )
    }
}
