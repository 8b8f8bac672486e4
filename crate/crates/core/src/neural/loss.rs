use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use super::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    Huber,
}

/// Elementwise loss, averaged over batch rows and output dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub huber_delta: f64,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self::mse()
    }
}

impl LossSpec {
    pub fn mse() -> Self {
        Self {
            kind: LossKind::Mse,
            huber_delta: 1.0,
        }
    }

    pub fn huber(delta: f64) -> Self {
        Self {
            kind: LossKind::Huber,
            huber_delta: delta,
        }
    }

    /// Loss of a single residual `e = prediction - target`.
    pub fn elementwise(&self, e: f64) -> f64 {
        match self.kind {
            LossKind::Mse => e * e,
            LossKind::Huber => {
                let d = self.huber_delta;
                if e.abs() <= d {
                    0.5 * e * e
                } else {
                    d * (e.abs() - 0.5 * d)
                }
            }
        }
    }

    fn derivative(&self, e: f64) -> f64 {
        match self.kind {
            LossKind::Mse => 2.0 * e,
            LossKind::Huber => e.clamp(-self.huber_delta, self.huber_delta),
        }
    }

    pub fn value<T: Scalar>(&self, output: ArrayView2<'_, T>, targets: ArrayView2<'_, T>) -> f64 {
        let n = output.len().max(1) as f64;
        let mut sum = 0.0;
        Zip::from(&output)
            .and(&targets)
            .for_each(|&y, &t| sum += self.elementwise(y.as_f64() - t.as_f64()));
        sum / n
    }

    /// d(loss)/d(output).
    pub fn gradient<T: Scalar>(
        &self,
        output: ArrayView2<'_, T>,
        targets: ArrayView2<'_, T>,
    ) -> Array2<T> {
        let n = output.len().max(1) as f64;
        Zip::from(&output)
            .and(&targets)
            .map_collect(|&y, &t| T::cast_from(self.derivative(y.as_f64() - t.as_f64()) / n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn huber_arms() {
        let h = LossSpec::huber(1.0);
        assert_eq!(h.elementwise(2.0), 1.5);
        assert_eq!(h.elementwise(-2.0), 1.5);
        assert_eq!(h.elementwise(0.5), 0.125);
        // the two arms agree at |e| = delta, in value and slope
        for d in [0.1, 1.0, 3.0] {
            let h = LossSpec::huber(d);
            let quad = 0.5 * d * d;
            let lin = d * (d - 0.5 * d);
            assert!((quad - lin).abs() < 1e-15);
            let eps = 1e-7;
            let left = (h.elementwise(d) - h.elementwise(d - eps)) / eps;
            let right = (h.elementwise(d + eps) - h.elementwise(d)) / eps;
            assert!((left - right).abs() < 1e-6);
        }
    }

    #[test]
    fn mean_over_all_elements() {
        let y = array![[1.0, 2.0], [3.0, 4.0]];
        let t = array![[1.0, 0.0], [3.0, 4.0]];
        assert_eq!(LossSpec::mse().value(y.view(), t.view()), 1.0);
        assert_eq!(LossSpec::huber(1.0).value(y.view(), t.view()), 1.5 / 4.0);
        let g = LossSpec::mse().gradient(y.view(), t.view());
        assert_eq!(g, array![[0.0, 1.0], [0.0, 0.0]]);
    }
}
