//! Compactly supported Wendland radial basis kernel, Gram-matrix assembly
//! with an SPD factorization, kernel feature vectors and fill-distance
//! estimation.
//!
//! The kernel is k(ζ₁, ζ₂) = Φ(‖ζ₁ − ζ₂‖ / σ) with
//! Φ(r) = (1 − r)^{𝔡−1} [(𝔡 − 1) r + 1] on [0, 1] and 0 beyond, where
//! 𝔡 = ⌊nM/2⌋ + 4. This is the smoothness s = 1 member of the Wendland
//! family: strictly positive definite on ℝ^{nM} and C² at the support edge.
//! The scale σ is a fit-time parameter recorded in all output metadata.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Jitter values tried, in order, until the Gram factorization succeeds.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WendlandKernel {
    ambient_dim: usize,
    poly_degree: usize,
    scale: f64,
}

impl WendlandKernel {
    /// Kernel on ℝ^{ambient_dim} with 𝔡 = ⌊ambient_dim/2⌋ + 4 and the given
    /// support radius σ.
    pub fn new(ambient_dim: usize, scale: f64) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::PreconditionViolation(
                "ambient dimension must be positive".into(),
            ));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::PreconditionViolation(format!(
                "kernel scale must be positive and finite, got {scale}"
            )));
        }
        Ok(Self {
            ambient_dim,
            poly_degree: ambient_dim / 2 + 4,
            scale,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Degree 𝔡 of the defining polynomial.
    pub fn poly_degree(&self) -> usize {
        self.poly_degree
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The univariate profile Φ(r) for scaled radius r ≥ 0.
    pub fn phi(&self, r: f64) -> Result<f64> {
        if r < 0.0 {
            return Err(Error::PreconditionViolation(format!(
                "scaled radius must be nonnegative, got {r}"
            )));
        }
        Ok(self.phi_unchecked(r))
    }

    #[inline]
    fn phi_unchecked(&self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let d1 = (self.poly_degree - 1) as f64;
        (1.0 - r).powi(self.poly_degree as i32 - 1) * (d1 * r + 1.0)
    }

    /// k(ζ₁, ζ₂) = Φ(‖ζ₁ − ζ₂‖ / σ).
    #[inline]
    pub fn eval(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        debug_assert_eq!(a.len(), self.ambient_dim);
        debug_assert_eq!(b.len(), self.ambient_dim);
        if std::ptr::eq(a, b) {
            return 1.0;
        }
        self.phi_unchecked((a - b).norm() / self.scale)
    }
}

/// The lifted state Ψ(z) = (k(z₁, z), …, k(z_p, z)).
pub fn feature_vector(
    kernel: &WendlandKernel,
    centers: &[DVector<f64>],
    z: &DVector<f64>,
) -> DVector<f64> {
    DVector::from_iterator(centers.len(), centers.iter().map(|c| kernel.eval(c, z)))
}

/// Symmetric positive-definite factorization of K_𝕏 + λI, with the applied
/// jitter λ recorded.
#[derive(Debug, Clone)]
pub struct GramFactorization {
    kernel: WendlandKernel,
    k_matrix: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    lambda: f64,
}

impl GramFactorization {
    pub fn kernel(&self) -> &WendlandKernel {
        &self.kernel
    }

    /// The unregularized Gram matrix K_𝕏.
    pub fn k_matrix(&self) -> &DMatrix<f64> {
        &self.k_matrix
    }

    /// Jitter actually applied.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn p(&self) -> usize {
        self.k_matrix.nrows()
    }

    /// Solves (K_𝕏 + λI) x = rhs.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    /// Solves (K_𝕏 + λI) X = RHS column-wise.
    pub fn solve_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(rhs)
    }

    /// 1-norm condition estimate of K_𝕏 + λI (Hager's estimator for the
    /// inverse norm; the forward norm is exact).
    pub fn condition_estimate(&self) -> f64 {
        let p = self.p();
        let reg_col_norm = |j: usize| -> f64 {
            (0..p)
                .map(|i| {
                    let v = self.k_matrix[(i, j)] + if i == j { self.lambda } else { 0.0 };
                    v.abs()
                })
                .sum()
        };
        let norm_a: f64 = (0..p).map(reg_col_norm).fold(0.0, f64::max);

        // Hager's 1-norm estimator, symmetric case.
        let mut x = DVector::from_element(p, 1.0 / p as f64);
        let mut est = 0.0f64;
        for _ in 0..5 {
            let y = self.solve(&x);
            est = est.max(y.iter().map(|v| v.abs()).sum());
            let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
            let z = self.solve(&xi);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.abs()))
                .fold((0, 0.0), |acc, it| if it.1 > acc.1 { it } else { acc });
            if zmax <= z.dot(&x) {
                break;
            }
            x = DVector::zeros(p);
            x[jmax] = 1.0;
        }
        norm_a * est
    }
}

/// Assembles K_𝕏 and factorizes K_𝕏 + λI, escalating λ through the jitter
/// ladder until the SPD factorization succeeds.
pub fn gram(kernel: &WendlandKernel, centers: &[DVector<f64>]) -> Result<GramFactorization> {
    let p = centers.len();
    if p == 0 {
        return Err(Error::EmptyCenters);
    }
    let mut k = DMatrix::zeros(p, p);
    for i in 0..p {
        k[(i, i)] = 1.0;
        for j in (i + 1)..p {
            let dist = (&centers[i] - &centers[j]).norm();
            if dist == 0.0 {
                return Err(Error::DuplicateCenters(i, j));
            }
            let v = kernel.phi_unchecked(dist / kernel.scale());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    for &lambda in JITTER_LADDER.iter() {
        let mut reg = k.clone();
        for i in 0..p {
            reg[(i, i)] += lambda;
        }
        if let Some(chol) = nalgebra::Cholesky::new(reg) {
            if lambda > 0.0 {
                log::debug!("gram factorization needed jitter {lambda:e} (p = {p})");
            }
            return Ok(GramFactorization {
                kernel: *kernel,
                k_matrix: k,
                chol,
                lambda,
            });
        }
    }
    Err(Error::SingularGram {
        p,
        max_jitter: *JITTER_LADDER.last().unwrap(),
    })
}

/// Factorizes K_𝕏 + λI at one pinned jitter value, without the ladder.
/// Used when reloading a saved surrogate, where the applied jitter is part of
/// the recorded fit and must be reproduced exactly.
pub fn gram_with_jitter(
    kernel: &WendlandKernel,
    centers: &[DVector<f64>],
    lambda: f64,
) -> Result<GramFactorization> {
    let p = centers.len();
    if p == 0 {
        return Err(Error::EmptyCenters);
    }
    let mut k = DMatrix::zeros(p, p);
    for i in 0..p {
        k[(i, i)] = 1.0;
        for j in (i + 1)..p {
            let dist = (&centers[i] - &centers[j]).norm();
            if dist == 0.0 {
                return Err(Error::DuplicateCenters(i, j));
            }
            let v = kernel.phi_unchecked(dist / kernel.scale());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    let mut reg = k.clone();
    for i in 0..p {
        reg[(i, i)] += lambda;
    }
    match nalgebra::Cholesky::new(reg) {
        Some(chol) => Ok(GramFactorization {
            kernel: *kernel,
            k_matrix: k,
            chol,
            lambda,
        }),
        None => Err(Error::SingularGram {
            p,
            max_jitter: lambda,
        }),
    }
}

/// Empirical fill distance: max over the cloud of the distance to the nearest
/// center.
pub fn fill_distance(centers: &[DVector<f64>], cloud: &[DVector<f64>]) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::EmptyCenters);
    }
    if cloud.is_empty() {
        return Err(Error::PreconditionViolation("empty cloud".into()));
    }
    Ok(cloud
        .par_iter()
        .map(|c| {
            centers
                .iter()
                .map(|z| (c - z).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(vals: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(vals)
    }

    #[test]
    fn phi_values() {
        let k = WendlandKernel::new(2, 1.0).unwrap();
        assert_eq!(k.poly_degree(), 5);
        assert_eq!(k.phi(0.0).unwrap(), 1.0);
        assert_eq!(k.phi(1.0).unwrap(), 0.0);
        assert_eq!(k.phi(2.0).unwrap(), 0.0);
        // (1 − 0.5)⁴ · (4·0.5 + 1) = 0.0625 · 3 = 0.1875, exact in binary
        assert_eq!(k.phi(0.5).unwrap(), 0.1875);
        assert!(k.phi(-0.1).is_err());
    }

    #[test]
    fn phi_range_and_support() {
        let k = WendlandKernel::new(4, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let r: f64 = rng.gen::<f64>() * 2.0;
            let val = k.phi(r).unwrap();
            if r >= 1.0 {
                assert_eq!(val, 0.0);
            } else {
                assert!((0.0..=1.0).contains(&val));
            }
        }
    }

    #[test]
    fn c2_at_support_boundary() {
        // one-sided second differences of Φ at r = 1 agree within 1e-4
        let k = WendlandKernel::new(2, 1.0).unwrap();
        let h = 1e-4;
        let phi = |r: f64| k.phi(r).unwrap();
        let left = (phi(1.0 - 2.0 * h) - 2.0 * phi(1.0 - h) + phi(1.0)) / (h * h);
        let right = (phi(1.0) - 2.0 * phi(1.0 + h) + phi(1.0 + 2.0 * h)) / (h * h);
        assert!((left - right).abs() < 1e-4, "left {left} right {right}");
    }

    #[test]
    fn kernel_symmetry_and_scale() {
        let k = WendlandKernel::new(2, 2.0).unwrap();
        let a = v(&[0.0, 0.0]);
        let b = v(&[1.2, -0.4]);
        assert_eq!(k.eval(&a, &b), k.eval(&b, &a));
        assert_eq!(k.eval(&a, &a), 1.0);
        // distance ≥ σ ⇒ exactly zero
        let far = v(&[2.0, 0.0]);
        assert_eq!(k.eval(&a, &far), 0.0);
    }

    #[test]
    fn gram_single_center() {
        let k = WendlandKernel::new(1, 1.0).unwrap();
        let g = gram(&k, &[v(&[0.3])]).unwrap();
        assert_eq!(g.k_matrix()[(0, 0)], 1.0);
        assert_eq!(g.lambda(), 0.0);
    }

    #[test]
    fn gram_compact_support_gives_identity() {
        let k = WendlandKernel::new(1, 1.0).unwrap();
        let g = gram(&k, &[v(&[0.0]), v(&[1.5])]).unwrap();
        assert_eq!(g.k_matrix()[(0, 1)], 0.0);
        assert_eq!(g.k_matrix()[(1, 0)], 0.0);
    }

    #[test]
    fn gram_rejects_exact_duplicates() {
        let k = WendlandKernel::new(1, 1.0).unwrap();
        assert!(matches!(
            gram(&k, &[v(&[0.5]), v(&[0.5])]),
            Err(Error::DuplicateCenters(0, 1))
        ));
    }

    #[test]
    fn gram_positive_definite_random_centers() {
        // 50 random distinct centers, min separation enforced by rejection
        let k = WendlandKernel::new(2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut centers: Vec<DVector<f64>> = Vec::new();
        while centers.len() < 50 {
            let c = v(&[rng.gen::<f64>(), rng.gen::<f64>()]);
            if centers.iter().all(|z| (z - &c).norm() >= 1e-3) {
                centers.push(c);
            }
        }
        let g = gram(&k, &centers).unwrap();
        assert!(g.lambda() <= 1e-8);
        // independent oracle: smallest eigenvalue of K is strictly positive
        let eigs = g.k_matrix().clone().symmetric_eigen().eigenvalues;
        let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min_eig > 0.0, "min eigenvalue {min_eig}");
        // factorization residual ‖(K+λI) − LLᵀ‖_F / ‖K‖_F
        let l = g.chol.l();
        let mut reg = g.k_matrix().clone();
        for i in 0..50 {
            reg[(i, i)] += g.lambda();
        }
        let resid = (&reg - &l * l.transpose()).norm() / g.k_matrix().norm();
        assert!(resid <= 1e-10, "residual {resid}");
    }

    #[test]
    fn interpolation_exact_at_nodes() {
        let k = WendlandKernel::new(2, 1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let centers: Vec<DVector<f64>> =
            (0..20).map(|_| v(&[rng.gen::<f64>(), rng.gen::<f64>()])).collect();
        let g = gram(&k, &centers).unwrap();
        let targets = DVector::from_iterator(20, (0..20).map(|i| (i as f64 * 0.37).sin()));
        let alpha = g.solve(&targets);
        for (i, c) in centers.iter().enumerate() {
            let psi = feature_vector(&k, &centers, c);
            let val = psi.dot(&alpha);
            assert!(
                (val - targets[i]).abs() <= 1e-8 * targets.norm(),
                "node {i}: {val} vs {}",
                targets[i]
            );
        }
    }

    #[test]
    fn feature_vector_cases() {
        let k = WendlandKernel::new(1, 2.0).unwrap();
        let centers = vec![v(&[0.0]), v(&[1.0])];
        let psi = feature_vector(&k, &centers, &v(&[0.0]));
        assert_eq!(psi[0], 1.0);
        assert_eq!(psi[1], k.phi(0.5).unwrap());
        // outside every support
        let psi_far = feature_vector(&k, &centers, &v(&[10.0]));
        assert_eq!(psi_far, v(&[0.0, 0.0]));
    }

    #[test]
    fn fill_distance_cases() {
        let centers = vec![v(&[0.0]), v(&[1.0])];
        let cloud = vec![v(&[0.0]), v(&[0.5]), v(&[1.0])];
        assert_eq!(fill_distance(&centers, &cloud).unwrap(), 0.5);
        assert_eq!(fill_distance(&centers, &centers.clone()).unwrap(), 0.0);
        assert!(fill_distance(&[], &cloud).is_err());
    }

    #[test]
    fn fill_distance_monotone_in_centers() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cloud: Vec<DVector<f64>> =
            (0..200).map(|_| v(&[rng.gen::<f64>(), rng.gen::<f64>()])).collect();
        let mut centers: Vec<DVector<f64>> =
            (0..5).map(|_| v(&[rng.gen::<f64>(), rng.gen::<f64>()])).collect();
        let mut prev = fill_distance(&centers, &cloud).unwrap();
        for _ in 0..10 {
            centers.push(v(&[rng.gen::<f64>(), rng.gen::<f64>()]));
            let now = fill_distance(&centers, &cloud).unwrap();
            assert!(now <= prev + 1e-15);
            prev = now;
        }
    }

    #[test]
    fn condition_estimate_sane() {
        let k = WendlandKernel::new(1, 1.0).unwrap();
        // well separated ⇒ K = I ⇒ condition 1
        let g = gram(&k, &[v(&[0.0]), v(&[5.0]), v(&[10.0])]).unwrap();
        let c = g.condition_estimate();
        assert!((c - 1.0).abs() < 1e-12, "cond {c}");
    }
}
