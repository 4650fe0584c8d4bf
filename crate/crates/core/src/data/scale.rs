use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-column minimum and maximum of the fitting data.
///
/// `apply` maps `x ↦ (x − min)/(max − min)`. Columns with zero range map to 0
/// and invert back to their constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxParams {
    pub fn fit(x: &Matrix) -> Self {
        let mut min = vec![f64::INFINITY; x.cols()];
        let mut max = vec![f64::NEG_INFINITY; x.cols()];
        for row in x.row_iter() {
            for ((lo, hi), &v) in min.iter_mut().zip(max.iter_mut()).zip(row) {
                *lo = lo.min(v);
                *hi = hi.max(v);
            }
        }
        if x.rows() == 0 {
            min.fill(0.0);
            max.fill(0.0);
        }
        Self { min, max }
    }

    pub fn fit_values(values: &[f64]) -> Self {
        Self::fit(&Matrix::column(values))
    }

    pub fn dims(&self) -> usize {
        self.min.len()
    }

    fn check(&self, cols: usize) -> Result<()> {
        if cols != self.dims() {
            return Err(Error::Shape(format!(
                "scaler fitted on {} columns applied to {cols}",
                self.dims()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x.cols())?;
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                let range = self.max[c] - self.min[c];
                *v = if range > 0.0 {
                    (*v - self.min[c]) / range
                } else {
                    0.0
                };
            }
        }
        Ok(out)
    }

    pub fn invert(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x.cols())?;
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                let range = self.max[c] - self.min[c];
                *v = if range > 0.0 {
                    *v * range + self.min[c]
                } else {
                    self.min[c]
                };
            }
        }
        Ok(out)
    }

    pub fn apply_values(&self, values: &[f64]) -> Result<Vec<f64>> {
        Ok(self.apply(&Matrix::column(values))?.into_vec())
    }

    pub fn invert_values(&self, values: &[f64]) -> Result<Vec<f64>> {
        Ok(self.invert(&Matrix::column(values))?.into_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn column_examples() {
        let p = MinMaxParams::fit_values(&[2.0, 4.0, 6.0]);
        assert_eq!(
            p.apply_values(&[2.0, 4.0, 6.0]).unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        assert_eq!(p.apply_values(&[8.0]).unwrap(), vec![1.5]);

        let c = MinMaxParams::fit_values(&[5.0, 5.0, 5.0]);
        assert_eq!(c.apply_values(&[5.0, 5.0, 5.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(c.invert_values(&[0.0, 0.3]).unwrap(), vec![5.0, 5.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let p = MinMaxParams::fit(&Matrix::zeros(3, 2));
        assert!(p.apply(&Matrix::zeros(3, 3)).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(values in prop::collection::vec(-1e6f64..1e6, 2..40)) {
            let p = MinMaxParams::fit_values(&values);
            let scaled = p.apply_values(&values).unwrap();
            prop_assert!(scaled.iter().all(|v| (0.0..=1.0).contains(v)));
            let back = p.invert_values(&scaled).unwrap();
            let span = p.max[0] - p.min[0];
            for (a, b) in values.iter().zip(&back) {
                // Relative to the column's magnitude.
                prop_assert!((a - b).abs() <= 1e-12 * span.max(a.abs()).max(1.0));
            }
        }
    }
}
