use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

pub const STD_FLOOR: f64 = 1e-8;

/// Per-column standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: Array1::zeros(dim),
            std: Array1::ones(dim),
        }
    }

    /// Population statistics of the rows of `data`, std floored at 1e-8.
    pub fn fit(data: ArrayView2<f64>) -> Self {
        let n = data.nrows().max(1) as f64;
        let mean = data.sum_axis(Axis(0)) / n;
        let mut var = Array1::<f64>::zeros(data.ncols());
        for row in data.rows() {
            for (j, v) in row.iter().enumerate() {
                let d = v - mean[j];
                var[j] += d * d / n;
            }
        }
        let std = var.mapv(|v| v.sqrt().max(STD_FLOOR));
        Self { mean, std }
    }

    pub fn normalize(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (&x - &self.mean) / &self.std
    }

    pub fn denormalize(&self, x: ArrayView2<f64>) -> Array2<f64> {
        &x * &self.std + &self.mean
    }
}
