use nalgebra::{DMatrix, DVector};

use super::dataset::TransitionDataset;
use crate::error::{Error, Result};

/// Result of one local affine regression around a center z_ℓ: the estimate
/// F̂_ℓ of the induced flow map at the center, the local Jacobian estimate
/// B̂_ℓ, and diagnostics.
#[derive(Debug, Clone)]
pub struct LocalRegression {
    pub center: DVector<f64>,
    /// Number of neighbors used.
    pub neighbor_count: usize,
    /// Radius the neighbors were drawn from.
    pub radius: f64,
    /// Estimate of F̃(z_ℓ).
    pub f_hat: DVector<f64>,
    /// Local Jacobian estimate.
    pub b_hat: DMatrix<f64>,
    /// Frobenius norm of the least-squares residual.
    pub residual_norm: f64,
    /// True iff the numerical rank of the design matrix equals nM + 1.
    pub rank_ok: bool,
}

/// Local affine regression using every dataset predecessor within `radius`
/// of the center. Errors with `InsufficientNeighbors` when fewer than
/// `min_neighbors` lie inside the radius, and `RankDeficient` when the local
/// design does not have full rank nM + 1.
///
/// Using the whole radius-ρ neighborhood (rather than a fixed-size nearest
/// subset) keeps the regression window coupled to ρ on densely sampled
/// clouds, which is what makes the ρ-sweep studies meaningful.
pub fn local_regression(
    dataset: &TransitionDataset,
    center: &DVector<f64>,
    radius: f64,
    min_neighbors: usize,
) -> Result<LocalRegression> {
    validate_inputs(dataset, center, radius, min_neighbors)?;
    local_regression_on(
        dataset.predecessors(),
        dataset.successors(),
        center,
        radius,
        min_neighbors,
    )
}

/// Core of [`local_regression`] over explicit predecessor/successor slices.
/// The predecessors define the neighborhood geometry (they may be scaled
/// coordinates); the successors are the regression targets.
pub(crate) fn local_regression_on(
    predecessors: &[DVector<f64>],
    successors: &[DVector<f64>],
    center: &DVector<f64>,
    radius: f64,
    min_neighbors: usize,
) -> Result<LocalRegression> {
    let idx: Vec<usize> = (0..predecessors.len())
        .filter(|&i| (&predecessors[i] - center).norm() <= radius)
        .collect();
    if idx.len() < min_neighbors {
        return Err(Error::InsufficientNeighbors {
            found: idx.len(),
            needed: min_neighbors,
            radius,
        });
    }
    solve_local(predecessors, successors, center, radius, &idx)
}

/// Local affine regression using exactly the `d` nearest predecessors within
/// `radius`, with the stable tie-break (distance, trajectory id, step index).
pub fn local_regression_knn(
    dataset: &TransitionDataset,
    center: &DVector<f64>,
    radius: f64,
    d: usize,
) -> Result<LocalRegression> {
    validate_inputs(dataset, center, radius, d)?;
    let mut within: Vec<(f64, usize, usize, usize)> = (0..dataset.len())
        .filter_map(|i| {
            let dist = (&dataset.predecessors()[i] - center).norm();
            if dist <= radius {
                let (traj, step) = dataset.provenance(i);
                Some((dist, traj, step, i))
            } else {
                None
            }
        })
        .collect();
    if within.len() < d {
        return Err(Error::InsufficientNeighbors {
            found: within.len(),
            needed: d,
            radius,
        });
    }
    within.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let idx: Vec<usize> = within.iter().take(d).map(|t| t.3).collect();
    solve_local(dataset.predecessors(), dataset.successors(), center, radius, &idx)
}

fn validate_inputs(
    dataset: &TransitionDataset,
    center: &DVector<f64>,
    radius: f64,
    min_neighbors: usize,
) -> Result<()> {
    let nm = dataset.ambient_dim();
    if center.len() != nm {
        return Err(Error::DimensionMismatch {
            expected: nm,
            got: center.len(),
        });
    }
    if !(radius > 0.0) {
        return Err(Error::PreconditionViolation(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if min_neighbors < nm + 1 {
        return Err(Error::PreconditionViolation(format!(
            "need at least nM + 1 = {} neighbors, got {min_neighbors}",
            nm + 1
        )));
    }
    Ok(())
}

fn solve_local(
    predecessors: &[DVector<f64>],
    successors: &[DVector<f64>],
    center: &DVector<f64>,
    radius: f64,
    idx: &[usize],
) -> Result<LocalRegression> {
    let nm = center.len();
    let d = idx.len();

    // Design rows [1, (z_j − z_ℓ)ᵀ]; targets are the successors.
    let mut design = DMatrix::zeros(d, nm + 1);
    let mut targets = DMatrix::zeros(d, nm);
    for (row, &i) in idx.iter().enumerate() {
        design[(row, 0)] = 1.0;
        let delta = &predecessors[i] - center;
        for c in 0..nm {
            design[(row, c + 1)] = delta[c];
            targets[(row, c)] = successors[i][c];
        }
    }

    let svd = design.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let tol = d.max(nm + 1) as f64 * f64::EPSILON * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < nm + 1 {
        return Err(Error::RankDeficient {
            rank,
            needed: nm + 1,
        });
    }
    let phi_t = svd
        .solve(&targets, tol)
        .map_err(|e| Error::PreconditionViolation(format!("svd solve: {e}")))?;
    let residual_norm = (&design * &phi_t - &targets).norm();

    let phi = phi_t.transpose(); // nM × (nM+1)
    let f_hat = phi.column(0).into_owned();
    let b_hat = phi.columns(1, nm).into_owned();
    Ok(LocalRegression {
        center: center.clone(),
        neighbor_count: d,
        radius,
        f_hat,
        b_hat,
        residual_norm,
        rank_ok: true,
    })
}
