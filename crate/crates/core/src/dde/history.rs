use nalgebra::DVector;

use crate::error::{Error, Result};

/// Node `j` of a uniform grid over `[a, b]` with `count` points, with both
/// endpoints pinned exactly. All grid consumers in this crate go through this
/// one formula so that node times compare bit-equal across modules.
pub(crate) fn uniform_node(a: f64, b: f64, count: usize, j: usize) -> f64 {
    debug_assert!(count >= 2 && j < count);
    if j == 0 {
        a
    } else if j == count - 1 {
        b
    } else {
        a + j as f64 * ((b - a) / (count - 1) as f64)
    }
}

/// Interpolation rule attached to a [`HistorySegment`].
#[derive(Debug, Clone, PartialEq)]
pub enum Interpolation {
    /// Piecewise cubic Hermite with stored node derivatives.
    Hermite { derivatives: Vec<DVector<f64>> },
    /// Piecewise linear between nodes (the reconstruction operator's rule).
    Linear,
}

/// A continuous function on [−τ_d, 0] into ℝⁿ, stored on a uniform sample
/// grid. This is the computational stand-in for a DDE state function.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySegment {
    delay: f64,
    values: Vec<DVector<f64>>,
    interpolation: Interpolation,
}

impl HistorySegment {
    /// Builds a segment from uniform samples over [−delay, 0] with cubic
    /// Hermite interpolation.
    pub fn hermite(
        delay: f64,
        values: Vec<DVector<f64>>,
        derivatives: Vec<DVector<f64>>,
    ) -> Result<Self> {
        if values.len() < 2 || values.len() != derivatives.len() {
            return Err(Error::PreconditionViolation(format!(
                "need >= 2 nodes and matching derivative count, got {} values / {} derivatives",
                values.len(),
                derivatives.len()
            )));
        }
        Ok(Self {
            delay,
            values,
            interpolation: Interpolation::Hermite { derivatives },
        })
    }

    /// Builds a piecewise-linear segment from uniform samples over [−delay, 0].
    pub fn linear(delay: f64, values: Vec<DVector<f64>>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::PreconditionViolation(
                "need at least 2 nodes".into(),
            ));
        }
        Ok(Self {
            delay,
            values,
            interpolation: Interpolation::Linear,
        })
    }

    /// The constant history η(θ) ≡ c.
    pub fn constant(delay: f64, c: DVector<f64>) -> Self {
        let zero = DVector::zeros(c.len());
        Self {
            delay,
            values: vec![c.clone(), c],
            interpolation: Interpolation::Hermite {
                derivatives: vec![zero.clone(), zero],
            },
        }
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn state_dim(&self) -> usize {
        self.values[0].len()
    }

    /// Number of grid nodes (K + 1).
    pub fn node_count(&self) -> usize {
        self.values.len()
    }

    /// Grid spacing.
    pub fn spacing(&self) -> f64 {
        self.delay / (self.values.len() - 1) as f64
    }

    /// Time of grid node `j`, with θ_0 = −τ_d and θ_K = 0 pinned exactly.
    pub fn node_time(&self, j: usize) -> f64 {
        uniform_node(-self.delay, 0.0, self.values.len(), j)
    }

    pub fn node_value(&self, j: usize) -> &DVector<f64> {
        &self.values[j]
    }

    pub fn interpolation(&self) -> &Interpolation {
        &self.interpolation
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.interpolation, Interpolation::Linear)
    }

    /// Locates the interval for θ and returns (index, stored-node hit).
    fn locate(&self, theta: f64) -> (usize, Option<usize>) {
        let count = self.values.len();
        let h = self.spacing();
        let u = (theta + self.delay) / h;
        let mut i = u.floor() as isize;
        if i < 0 {
            i = 0;
        }
        if i as usize > count - 2 {
            i = (count - 2) as isize;
        }
        let i = i as usize;
        // Exact node hits must reproduce stored values bit-exactly.
        if theta == self.node_time(i) {
            (i, Some(i))
        } else if theta == self.node_time(i + 1) {
            (i, Some(i + 1))
        } else {
            (i, None)
        }
    }

    /// Evaluates the segment at θ ∈ [−τ_d, 0]. Arguments slightly outside the
    /// range (floating-point overshoot) are clamped to the boundary.
    pub fn eval(&self, theta: f64) -> DVector<f64> {
        let theta = theta.clamp(-self.delay, 0.0);
        let (i, hit) = self.locate(theta);
        if let Some(j) = hit {
            return self.values[j].clone();
        }
        let h = self.spacing();
        let s = (theta - self.node_time(i)) / h;
        match &self.interpolation {
            Interpolation::Linear => &self.values[i] + (&self.values[i + 1] - &self.values[i]) * s,
            Interpolation::Hermite { derivatives } => {
                // difference form: exact for constant data (h00 + h01 = 1)
                let s2 = s * s;
                let s3 = s2 * s;
                let h10 = s3 - 2.0 * s2 + s;
                let h01 = -2.0 * s3 + 3.0 * s2;
                let h11 = s3 - s2;
                &self.values[i]
                    + (&self.values[i + 1] - &self.values[i]) * h01
                    + &derivatives[i] * (h10 * h)
                    + &derivatives[i + 1] * (h11 * h)
            }
        }
    }

    /// Evaluates dη/dθ at θ.
    pub fn eval_derivative(&self, theta: f64) -> DVector<f64> {
        let theta = theta.clamp(-self.delay, 0.0);
        let (i, _) = self.locate(theta);
        let h = self.spacing();
        let s = (theta - self.node_time(i)) / h;
        match &self.interpolation {
            Interpolation::Linear => (&self.values[i + 1] - &self.values[i]) / h,
            Interpolation::Hermite { derivatives } => {
                // difference form: d00 = −d01, so constants have exact zero slope
                let s2 = s * s;
                let d10 = 3.0 * s2 - 4.0 * s + 1.0;
                let d01 = (-6.0 * s2 + 6.0 * s) / h;
                let d11 = 3.0 * s2 - 2.0 * s;
                (&self.values[i + 1] - &self.values[i]) * d01
                    + &derivatives[i] * d10
                    + &derivatives[i + 1] * d11
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_segment(delay: f64, vals: &[f64], ders: &[f64]) -> HistorySegment {
        HistorySegment::hermite(
            delay,
            vals.iter().map(|&v| DVector::from_element(1, v)).collect(),
            ders.iter().map(|&d| DVector::from_element(1, d)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let seg = scalar_segment(1.64, &[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]);
        assert_eq!(seg.node_time(0), -1.64);
        assert_eq!(seg.node_time(2), 0.0);
        let h = seg.spacing();
        for j in 0..2 {
            assert!((seg.node_time(j + 1) - seg.node_time(j) - h).abs() <= 1e-15 * 1.64);
        }
    }

    #[test]
    fn eval_reproduces_nodes_exactly() {
        let seg = scalar_segment(1.0, &[0.25, -0.5, 1.75], &[1.0, -2.0, 0.5]);
        for j in 0..3 {
            assert_eq!(seg.eval(seg.node_time(j))[0], seg.node_value(j)[0]);
        }
    }

    #[test]
    fn eval_is_continuous_at_interval_boundaries() {
        let seg = scalar_segment(1.0, &[0.0, 1.0, 0.5, 2.0, 1.5], &[1.0, 0.0, -1.0, 2.0, 0.0]);
        for j in 1..4 {
            let t = seg.node_time(j);
            let eps = 1e-12;
            let left = seg.eval(t - eps)[0];
            let right = seg.eval(t + eps)[0];
            let at = seg.eval(t)[0];
            assert!((left - at).abs() < 1e-10);
            assert!((right - at).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_history_evaluates_to_constant() {
        let seg = HistorySegment::constant(2.0, DVector::from_row_slice(&[0.3, -1.2]));
        for &theta in &[-2.0, -1.3, -0.5, 0.0] {
            let v = seg.eval(theta);
            assert!((v[0] - 0.3).abs() < 1e-15);
            assert!((v[1] + 1.2).abs() < 1e-15);
        }
    }

    #[test]
    fn hermite_reproduces_cubic() {
        // values/derivatives of f(θ) = θ³ on [−1, 0] at 5 nodes
        let f = |t: f64| t * t * t;
        let df = |t: f64| 3.0 * t * t;
        let n = 5;
        let vals: Vec<f64> = (0..n).map(|j| f(uniform_node(-1.0, 0.0, n, j))).collect();
        let ders: Vec<f64> = (0..n).map(|j| df(uniform_node(-1.0, 0.0, n, j))).collect();
        let seg = scalar_segment(1.0, &vals, &ders);
        for k in 0..100 {
            let t = -1.0 + k as f64 / 99.0;
            assert!((seg.eval(t)[0] - f(t)).abs() < 1e-14);
            assert!((seg.eval_derivative(t)[0] - df(t)).abs() < 1e-12);
        }
    }
}
