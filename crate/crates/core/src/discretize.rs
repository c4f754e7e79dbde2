//! History discretization: the sampling operator Q, the piecewise-linear
//! reconstruction operator R, the projection P = R∘Q, and block norms on the
//! discretized state space.
//!
//! Q∘R is the identity on ℝ^{nM} (bit-exact here: reconstruction and sampling
//! share one grid-node formula), and R∘Q is a projection whose error is
//! bounded by L_θ·δ(M) for L_θ-Lipschitz histories.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dde::HistorySegment;
use crate::error::{Error, Result};

/// M uniform sample points θ_1 = −τ_d < … < θ_M = 0 with spacing
/// δ(M) = τ_d / (M − 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationGrid {
    m: usize,
    delay: f64,
}

impl DiscretizationGrid {
    pub fn new(m: usize, delay: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::PreconditionViolation(format!(
                "need M >= 2 history sample points, got {m}"
            )));
        }
        if !(delay > 0.0) {
            return Err(Error::PreconditionViolation(format!(
                "delay must be positive, got {delay}"
            )));
        }
        Ok(Self { m, delay })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    /// Grid spacing δ(M).
    pub fn spacing(&self) -> f64 {
        self.delay / (self.m - 1) as f64
    }

    /// θ_j for j = 0 … M−1 (zero-based), endpoints pinned exactly.
    pub fn theta(&self, j: usize) -> f64 {
        assert!(j < self.m);
        crate::dde::uniform_node(-self.delay, 0.0, self.m, j)
    }
}

/// z ∈ ℝ^{nM}: the stacked samples Q(η) at the M grid points, stored
/// block-wise (ζ_1, …, ζ_M) with ζ_1 the oldest history value and ζ_M the
/// current value x(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedState {
    n: usize,
    m: usize,
    data: DVector<f64>,
}

impl DiscretizedState {
    pub fn new(n: usize, m: usize, data: DVector<f64>) -> Result<Self> {
        if data.len() != n * m {
            return Err(Error::DimensionMismatch {
                expected: n * m,
                got: data.len(),
            });
        }
        Ok(Self { n, m, data })
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    /// Block ζ_j (zero-based) as a vector view.
    pub fn block(&self, j: usize) -> nalgebra::DVectorView<'_, f64> {
        self.data.rows(j * self.n, self.n)
    }

    /// The current value x(t), i.e. the last block ζ_M.
    pub fn current_value(&self) -> nalgebra::DVectorView<'_, f64> {
        self.block(self.m - 1)
    }

    /// Block supremum norm: max_j ‖ζ_j‖₂.
    pub fn block_sup_norm(&self) -> f64 {
        (0..self.m)
            .map(|j| self.block(j).norm())
            .fold(0.0, f64::max)
    }
}

/// The sampling operator Q: stacks η(θ_1), …, η(θ_M).
pub fn sample(eta: &HistorySegment, grid: &DiscretizationGrid) -> Result<DiscretizedState> {
    if (eta.delay() - grid.delay()).abs() > 1e-9 * grid.delay() {
        return Err(Error::PreconditionViolation(format!(
            "history delay {} does not match grid delay {}",
            eta.delay(),
            grid.delay()
        )));
    }
    let n = eta.state_dim();
    let mut data = DVector::zeros(n * grid.m());
    for j in 0..grid.m() {
        data.rows_mut(j * n, n).copy_from(&eta.eval(grid.theta(j)));
    }
    DiscretizedState::new(n, grid.m(), data)
}

/// The reconstruction operator R: the piecewise-linear interpolant through
/// (θ_j, ζ_j). The returned segment is flagged as linear, not Hermite.
pub fn reconstruct(z: &DiscretizedState, grid: &DiscretizationGrid) -> Result<HistorySegment> {
    if z.m() != grid.m() {
        return Err(Error::DimensionMismatch {
            expected: grid.m(),
            got: z.m(),
        });
    }
    let values = (0..z.m()).map(|j| z.block(j).into_owned()).collect();
    HistorySegment::linear(grid.delay(), values)
}

/// The projection P = R∘Q.
pub fn project(eta: &HistorySegment, grid: &DiscretizationGrid) -> Result<HistorySegment> {
    reconstruct(&sample(eta, grid)?, grid)
}

/// Block-sup distance max_j ‖ζ1_j − ζ2_j‖₂.
pub fn block_sup_distance(z1: &DiscretizedState, z2: &DiscretizedState) -> Result<f64> {
    if z1.state_dim() != z2.state_dim() || z1.m() != z2.m() {
        return Err(Error::DimensionMismatch {
            expected: z1.len(),
            got: z2.len(),
        });
    }
    Ok((0..z1.m())
        .map(|j| (z1.block(j) - z2.block(j)).norm())
        .fold(0.0, f64::max))
}

/// Membership test for the compact operational domain:
/// ‖z‖_{b,∞} ≤ γ and ‖ζ_{j+1} − ζ_j‖ ≤ L_θ·δ(M). Diagnostic only; the
/// experiment pipeline works on the empirical data cloud.
pub fn domain_check(
    z: &DiscretizedState,
    gamma: f64,
    l_theta: f64,
    grid: &DiscretizationGrid,
) -> bool {
    debug_assert!(gamma > 0.0 && l_theta > 0.0);
    if z.block_sup_norm() > gamma {
        return false;
    }
    let slope_bound = l_theta * grid.spacing();
    (0..z.m() - 1).all(|j| (z.block(j + 1) - z.block(j)).norm() <= slope_bound)
}
