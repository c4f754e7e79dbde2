use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{select_centers, CenterStrategy, TransitionDataset};
use crate::discretize::DiscretizedState;
use crate::error::{Error, Result};
use crate::kernel::{feature_vector, fill_distance, gram, GramFactorization, WendlandKernel};

/// Optional per-component normalization of the discretized state space.
/// All metric computations (neighbor search, center geometry, kernel
/// arguments, fill distance) run on the scaled coordinates; reconstructed
/// states are always in raw units. The scale is stored with the surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateScaling {
    /// Raw Euclidean coordinates.
    #[default]
    None,
    /// Each state component is divided by its range over the dataset's
    /// predecessors (pooled across history blocks). Makes the kernel metric
    /// comparable across components of very different magnitudes.
    ComponentRange,
}

/// How the kernel support radius σ is chosen at fit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SigmaPolicy {
    /// σ = fraction × (bounding-box diagonal of the predecessor cloud).
    /// Independent of the center count, so p-sweeps compare like with like.
    DiameterFraction { fraction: f64 },
    /// σ = factor × median pairwise distance among the selected centers.
    MedianPairwise { factor: f64 },
    /// Fixed σ.
    Fixed { value: f64 },
}

impl Default for SigmaPolicy {
    fn default() -> Self {
        SigmaPolicy::DiameterFraction { fraction: 0.5 }
    }
}

impl SigmaPolicy {
    /// Resolves σ in the (possibly scaled) coordinates the kernel runs in.
    fn resolve(&self, cloud: &[DVector<f64>], centers: &[DVector<f64>]) -> Result<f64> {
        let sigma = match *self {
            SigmaPolicy::Fixed { value } => value,
            SigmaPolicy::DiameterFraction { fraction } => {
                let dim = cloud[0].len();
                let mut lo = cloud[0].clone();
                let mut hi = lo.clone();
                for z in cloud {
                    for d in 0..dim {
                        lo[d] = lo[d].min(z[d]);
                        hi[d] = hi[d].max(z[d]);
                    }
                }
                fraction * (hi - lo).norm()
            }
            SigmaPolicy::MedianPairwise { factor } => {
                let p = centers.len();
                let mut dists = Vec::with_capacity(p * (p - 1) / 2);
                for i in 0..p {
                    for j in (i + 1)..p {
                        dists.push((&centers[i] - &centers[j]).norm());
                    }
                }
                if dists.is_empty() {
                    return Err(Error::PreconditionViolation(
                        "median pairwise scale needs at least two centers".into(),
                    ));
                }
                dists.sort_by(f64::total_cmp);
                factor * dists[dists.len() / 2]
            }
        };
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::PreconditionViolation(format!(
                "resolved kernel scale {sigma} is not positive"
            )));
        }
        Ok(sigma)
    }
}

/// Per-coordinate weights implementing the configured normalization.
fn scaling_weights(dataset: &TransitionDataset, scaling: StateScaling) -> DVector<f64> {
    let nm = dataset.ambient_dim();
    match scaling {
        StateScaling::None => DVector::from_element(nm, 1.0),
        StateScaling::ComponentRange => {
            let n = dataset.state_dim();
            let m = dataset.m();
            let mut lo = vec![f64::INFINITY; n];
            let mut hi = vec![f64::NEG_INFINITY; n];
            for z in dataset.predecessors() {
                for j in 0..m {
                    for c in 0..n {
                        let v = z[j * n + c];
                        lo[c] = lo[c].min(v);
                        hi[c] = hi[c].max(v);
                    }
                }
            }
            let mut w = DVector::from_element(nm, 1.0);
            for c in 0..n {
                let range = hi[c] - lo[c];
                if range > 0.0 {
                    for j in 0..m {
                        w[j * n + c] = 1.0 / range;
                    }
                }
            }
            w
        }
    }
}

/// Fit hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Number of centers requested.
    pub p: usize,
    /// Neighborhood radius for the local regressions.
    pub rho: f64,
    /// Minimum neighbors a center must have within ρ; defaults to
    /// max(nM + 1, 10) when zero.
    pub min_neighbors: usize,
    pub strategy: CenterStrategy,
    pub seed: u64,
    pub sigma_policy: SigmaPolicy,
    /// State-space normalization applied to all metric computations. ρ and σ
    /// are interpreted in the scaled coordinates.
    pub scaling: StateScaling,
    /// Fraction of centers allowed to fail their regression before the whole
    /// fit is rejected.
    pub failure_threshold: f64,
}

impl FitOptions {
    pub fn new(p: usize, rho: f64) -> Self {
        Self {
            p,
            rho,
            min_neighbors: 0,
            strategy: CenterStrategy::GreedyFarthest,
            seed: 0,
            sigma_policy: SigmaPolicy::default(),
            scaling: StateScaling::None,
            failure_threshold: 0.10,
        }
    }
}

/// Everything recorded about a fit, for reproducibility and diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitMetadata {
    pub n: usize,
    pub m: usize,
    pub delta: f64,
    pub delay: f64,
    pub rho: f64,
    pub min_neighbors: usize,
    pub p_requested: usize,
    /// Centers that survived their local regression.
    pub p: usize,
    pub strategy: CenterStrategy,
    pub seed: u64,
    pub sigma_policy: SigmaPolicy,
    pub scaling: StateScaling,
    pub sigma: f64,
    pub lambda: f64,
    /// Empirical fill distance of the centers over the predecessor cloud.
    pub h_fill: f64,
    /// 1-norm condition estimate of K_𝕏 + λI.
    pub condition_estimate: f64,
    /// Indices (into the selected centers) whose regression failed, with the
    /// failure reason.
    pub failed_centers: Vec<(usize, String)>,
    /// Largest local least-squares residual among surviving centers.
    pub max_regression_residual: f64,
    /// ‖A(K + λI) − K_F̂ᵀ‖_F / ‖K_F̂‖_F measured after assembly.
    pub a_equation_residual: f64,
}

/// A fitted linear Koopman surrogate: lifted dynamics Ψ(z⁺) ≈ A·Ψ(z) plus the
/// kernel-interpolation reconstruction ẑ = C K_𝕏⁻¹ Ψ(z).
#[derive(Debug, Clone)]
pub struct KoopmanSurrogate {
    kernel: WendlandKernel,
    /// Centers in raw coordinates (the columns of C).
    centers: Vec<DVector<f64>>,
    /// Centers in the kernel's (scaled) coordinates.
    scaled_centers: Vec<DVector<f64>>,
    /// Per-coordinate normalization weights (all ones when scaling is off).
    weights: DVector<f64>,
    gram: GramFactorization,
    /// p × p Koopman matrix.
    a: DMatrix<f64>,
    /// nM × p matrix of stacked raw centers.
    c: DMatrix<f64>,
    meta: FitMetadata,
}

/// Fits a Koopman surrogate on a transition dataset: selects centers, runs
/// the local affine regressions, assembles K_𝕏 and K_F̂, and solves for
/// A = K_F̂ᵀ K_𝕏⁻¹ against the SPD factorization (K_𝕏⁻¹ is never formed).
///
/// Centers whose regression fails (too few neighbors in ρ, or a rank-deficient
/// local design) are dropped and reported in the metadata; the fit aborts with
/// `FitFailed` when more than `failure_threshold` of them fail.
pub fn fit(dataset: &TransitionDataset, opts: &FitOptions) -> Result<KoopmanSurrogate> {
    let selected = match opts.scaling {
        StateScaling::None => select_centers(dataset, opts.p, opts.strategy, opts.seed)?,
        _ => {
            // select with the scaled geometry, return raw centers
            let weights = scaling_weights(dataset, opts.scaling);
            let distinct = dataset.distinct_predecessor_indices();
            let scaled: Vec<DVector<f64>> = distinct
                .iter()
                .map(|&i| dataset.predecessors()[i].component_mul(&weights))
                .collect();
            let refs: Vec<&DVector<f64>> = scaled.iter().collect();
            let picked =
                super::dataset::select_indices_from_cloud(&refs, opts.p, opts.strategy, opts.seed)?;
            picked
                .into_iter()
                .map(|i| dataset.predecessors()[distinct[i]].clone())
                .collect()
        }
    };
    fit_with_centers(dataset, selected, opts)
}

/// [`fit`] with an explicitly provided center set (used by fill-distance
/// matched sweeps). `opts.p` is ignored in favor of `centers.len()`.
pub fn fit_with_centers(
    dataset: &TransitionDataset,
    selected: Vec<DVector<f64>>,
    opts: &FitOptions,
) -> Result<KoopmanSurrogate> {
    if dataset.is_empty() {
        return Err(Error::PreconditionViolation("empty dataset".into()));
    }
    if !(opts.rho > 0.0) {
        return Err(Error::PreconditionViolation(format!(
            "regression radius must be positive, got {}",
            opts.rho
        )));
    }
    let nm = dataset.ambient_dim();
    let min_neighbors = if opts.min_neighbors == 0 {
        (nm + 1).max(10)
    } else {
        opts.min_neighbors
    };
    if min_neighbors < nm + 1 {
        return Err(Error::PreconditionViolation(format!(
            "min_neighbors {} < nM + 1 = {}",
            min_neighbors,
            nm + 1
        )));
    }
    let p_requested = selected.len();
    let weights = scaling_weights(dataset, opts.scaling);
    let scaled_preds: Vec<DVector<f64>> = dataset
        .predecessors()
        .par_iter()
        .map(|z| z.component_mul(&weights))
        .collect();
    let selected_scaled: Vec<DVector<f64>> =
        selected.iter().map(|z| z.component_mul(&weights)).collect();

    // Neighborhood geometry in scaled coordinates; regression targets stay
    // raw, and the value estimate F̂_ℓ (the affine fit at δ = 0) is the same
    // in either parameterization.
    let regressions: Vec<std::result::Result<super::LocalRegression, String>> = selected_scaled
        .par_iter()
        .map(|z| {
            super::regression::local_regression_on(
                &scaled_preds,
                dataset.successors(),
                z,
                opts.rho,
                min_neighbors,
            )
            .map_err(|e| e.to_string())
        })
        .collect();

    let mut centers = Vec::with_capacity(selected.len());
    let mut scaled_centers = Vec::with_capacity(selected.len());
    let mut f_hats: Vec<DVector<f64>> = Vec::with_capacity(selected.len());
    let mut failed_centers = Vec::new();
    let mut max_residual = 0.0f64;
    for (i, (z, reg)) in selected.iter().zip(regressions).enumerate() {
        match reg {
            Ok(r) => {
                max_residual = max_residual.max(r.residual_norm);
                centers.push(z.clone());
                scaled_centers.push(selected_scaled[i].clone());
                f_hats.push(r.f_hat);
            }
            Err(reason) => failed_centers.push((i, reason)),
        }
    }
    let allowed = (opts.failure_threshold * p_requested as f64).floor() as usize;
    if failed_centers.len() > allowed {
        let details = failed_centers
            .iter()
            .take(3)
            .map(|(i, r)| format!("center {i}: {r}"))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::FitFailed {
            failed: failed_centers.len(),
            total: p_requested,
            details,
        });
    }
    if centers.is_empty() {
        return Err(Error::InsufficientData {
            requested: 1,
            available: 0,
        });
    }

    let sigma = opts.sigma_policy.resolve(&scaled_preds, &scaled_centers)?;
    let kernel = WendlandKernel::new(nm, sigma)?;
    let gram_fact = gram(&kernel, &scaled_centers)?;
    let p = centers.len();

    // K_F̂ row ℓ holds k(z_i, F̂_ℓ) for i = 1…p, in scaled coordinates.
    let kf_rows: Vec<Vec<f64>> = f_hats
        .par_iter()
        .map(|f| {
            let f_scaled = f.component_mul(&weights);
            scaled_centers.iter().map(|z| kernel.eval(z, &f_scaled)).collect()
        })
        .collect();
    let mut kf = DMatrix::zeros(p, p);
    for (l, row) in kf_rows.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            kf[(l, i)] = v;
        }
    }

    // A = K_F̂ᵀ K⁻¹: solve (K + λI) X = K_F̂, then A = Xᵀ.
    let a = gram_fact.solve_matrix(&kf).transpose();

    // residual of the defining equation, measured on the regularized matrix
    let mut reg = gram_fact.k_matrix().clone();
    for i in 0..p {
        reg[(i, i)] += gram_fact.lambda();
    }
    let a_equation_residual = (&a * &reg - kf.transpose()).norm() / kf.norm();

    let distinct_scaled: Vec<DVector<f64>> = dataset
        .distinct_predecessor_indices()
        .into_iter()
        .map(|i| scaled_preds[i].clone())
        .collect();
    let h_fill = fill_distance(&scaled_centers, &distinct_scaled)?;
    let condition_estimate = gram_fact.condition_estimate();

    let mut c = DMatrix::zeros(nm, p);
    for (j, z) in centers.iter().enumerate() {
        c.set_column(j, z);
    }

    let meta = FitMetadata {
        n: dataset.state_dim(),
        m: dataset.m(),
        delta: dataset.delta(),
        delay: dataset.delay(),
        rho: opts.rho,
        min_neighbors,
        p_requested,
        p,
        strategy: opts.strategy,
        seed: opts.seed,
        sigma_policy: opts.sigma_policy,
        scaling: opts.scaling,
        sigma,
        lambda: gram_fact.lambda(),
        h_fill,
        condition_estimate,
        failed_centers,
        max_regression_residual: max_residual,
        a_equation_residual,
    };
    log::info!(
        "fit: p = {p}/{p_requested}, sigma = {sigma:.6}, lambda = {:.1e}, h_fill = {h_fill:.6}, cond ~ {:.3e}",
        gram_fact.lambda(),
        condition_estimate
    );

    Ok(KoopmanSurrogate {
        kernel,
        centers,
        scaled_centers,
        weights,
        gram: gram_fact,
        a,
        c,
        meta,
    })
}

impl KoopmanSurrogate {
    pub fn kernel(&self) -> &WendlandKernel {
        &self.kernel
    }

    pub fn centers(&self) -> &[DVector<f64>] {
        &self.centers
    }

    pub fn a_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn metadata(&self) -> &FitMetadata {
        &self.meta
    }

    pub fn p(&self) -> usize {
        self.centers.len()
    }

    fn check_state(&self, z: &DiscretizedState) -> Result<()> {
        if z.len() != self.kernel.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.kernel.ambient_dim(),
                got: z.len(),
            });
        }
        Ok(())
    }

    fn state_from_vector(&self, v: DVector<f64>) -> DiscretizedState {
        DiscretizedState::new(self.meta.n, self.meta.m, v).expect("consistent dimensions")
    }

    /// The lifted state Ψ(z).
    pub fn lift(&self, z: &DiscretizedState) -> Result<DVector<f64>> {
        self.check_state(z)?;
        let scaled = z.data().component_mul(&self.weights);
        Ok(feature_vector(&self.kernel, &self.scaled_centers, &scaled))
    }

    /// One lifted surrogate step A·Ψ(z).
    pub fn predict_lifted(&self, z: &DiscretizedState) -> Result<DVector<f64>> {
        Ok(&self.a * self.lift(z)?)
    }

    /// Kernel-interpolation reconstruction ẑ = C K_𝕏⁻¹ ψ.
    pub fn reconstruct_state(&self, psi: &DVector<f64>) -> Result<DiscretizedState> {
        if psi.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: psi.len(),
            });
        }
        let w = self.gram.solve(psi);
        Ok(self.state_from_vector(&self.c * w))
    }

    /// One state-space step ẑ⁺ = C K_𝕏⁻¹ A Ψ(z).
    pub fn predict_state(&self, z: &DiscretizedState) -> Result<DiscretizedState> {
        let psi_next = self.predict_lifted(z)?;
        self.reconstruct_state(&psi_next)
    }

    /// State-space rollout: ẑ_0 = C K_𝕏⁻¹ Ψ(z_0), then
    /// ẑ_{k+1} = predict_state(ẑ_k). Returns steps + 1 states.
    pub fn rollout(&self, z0: &DiscretizedState, steps: usize) -> Result<Vec<DiscretizedState>> {
        let mut out = Vec::with_capacity(steps + 1);
        let z_hat0 = self.reconstruct_state(&self.lift(z0)?)?;
        out.push(z_hat0);
        for k in 0..steps {
            let next = self.predict_state(out.last().unwrap())?;
            if !next.data().iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteState { t: (k + 1) as f64 });
            }
            out.push(next);
        }
        Ok(out)
    }

    /// Alternate rollout mode that propagates purely in lifted coordinates,
    /// ψ_{k+1} = A ψ_k, reconstructing a state from each lifted iterate.
    pub fn rollout_lifted(
        &self,
        z0: &DiscretizedState,
        steps: usize,
    ) -> Result<Vec<DiscretizedState>> {
        let mut psi = self.lift(z0)?;
        let mut out = Vec::with_capacity(steps + 1);
        out.push(self.reconstruct_state(&psi)?);
        for k in 0..steps {
            psi = &self.a * psi;
            let state = self.reconstruct_state(&psi)?;
            if !state.data().iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteState { t: (k + 1) as f64 });
            }
            out.push(state);
        }
        Ok(out)
    }

    /// Serializes the surrogate to a self-describing JSON file. Predictions
    /// from a loaded surrogate are bit-identical: the Gram matrix is
    /// reassembled from the stored centers and kernel with the stored jitter.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = SurrogateFile {
            version: FORMAT_VERSION,
            kernel: self.kernel,
            centers: self.centers.iter().map(|c| c.as_slice().to_vec()).collect(),
            weights: self.weights.as_slice().to_vec(),
            a_row_major: self.a.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect(),
            meta: self.meta.clone(),
        };
        let json = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::Serialization(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    /// Loads a surrogate saved by [`KoopmanSurrogate::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path)?;
        let file: SurrogateFile =
            serde_json::from_str(&json).map_err(|e| Error::Serialization(e.to_string()))?;
        if file.version != FORMAT_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported surrogate format version {} (expected {FORMAT_VERSION})",
                file.version
            )));
        }
        let p = file.centers.len();
        let nm = file.kernel.ambient_dim();
        let centers: Vec<DVector<f64>> = file
            .centers
            .into_iter()
            .map(DVector::from_vec)
            .collect();
        for c in &centers {
            if c.len() != nm {
                return Err(Error::Serialization("center dimension mismatch".into()));
            }
        }
        if file.weights.len() != nm {
            return Err(Error::Serialization("weight vector size mismatch".into()));
        }
        if file.a_row_major.len() != p * p {
            return Err(Error::Serialization("A matrix size mismatch".into()));
        }
        let weights = DVector::from_vec(file.weights);
        let scaled_centers: Vec<DVector<f64>> =
            centers.iter().map(|z| z.component_mul(&weights)).collect();
        let a = DMatrix::from_row_slice(p, p, &file.a_row_major);
        let gram_fact = reassemble_gram(&file.kernel, &scaled_centers, file.meta.lambda)?;
        let mut c = DMatrix::zeros(nm, p);
        for (j, z) in centers.iter().enumerate() {
            c.set_column(j, z);
        }
        Ok(Self {
            kernel: file.kernel,
            centers,
            scaled_centers,
            weights,
            gram: gram_fact,
            a,
            c,
            meta: file.meta,
        })
    }
}

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SurrogateFile {
    version: u32,
    kernel: WendlandKernel,
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    a_row_major: Vec<f64>,
    meta: FitMetadata,
}

/// Rebuilds the Gram factorization with a pinned jitter (no ladder): loading
/// must reproduce the exact factorization the fit recorded.
fn reassemble_gram(
    kernel: &WendlandKernel,
    centers: &[DVector<f64>],
    lambda: f64,
) -> Result<GramFactorization> {
    let fact = gram(kernel, centers)?;
    if fact.lambda() != lambda {
        // The ladder found a different jitter than recorded; rebuild at the
        // recorded value to preserve bit-identical predictions.
        return crate::kernel::gram_with_jitter(kernel, centers, lambda);
    }
    Ok(fact)
}
