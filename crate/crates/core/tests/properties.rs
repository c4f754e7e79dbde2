//! Property tests for the discretization operators and the kernel.

use dde_koopman::discretize::{
    block_sup_distance, reconstruct, sample, DiscretizationGrid, DiscretizedState,
};
use dde_koopman::kernel::WendlandKernel;
use nalgebra::DVector;
use proptest::prelude::*;

fn state_strategy(n: usize, m: usize) -> impl Strategy<Value = DiscretizedState> {
    proptest::collection::vec(-10.0f64..10.0, n * m)
        .prop_map(move |v| DiscretizedState::new(n, m, DVector::from_vec(v)).unwrap())
}

proptest! {
    /// Q∘R is the identity on ℝ^{nM}, bit-exact.
    #[test]
    fn sampling_inverts_reconstruction(
        m in 2usize..8,
        n in 1usize..3,
        seed in any::<u64>(),
    ) {
        let mut rng = rand::SeedableRng::seed_from_u64(seed);
        let rng: &mut rand_chacha::ChaCha8Rng = &mut rng;
        let grid = DiscretizationGrid::new(m, 1.64).unwrap();
        let z = DiscretizedState::new(
            n,
            m,
            DVector::from_iterator(n * m, (0..n * m).map(|_| rand::Rng::gen::<f64>(rng) * 8.0 - 4.0)),
        )
        .unwrap();
        let back = sample(&reconstruct(&z, &grid).unwrap(), &grid).unwrap();
        prop_assert_eq!(z.data(), back.data());
    }

    /// R is nonexpansive: sup_θ ‖R(z)(θ) − R(ξ)(θ)‖ ≤ ‖z − ξ‖_{b,∞}.
    #[test]
    fn reconstruction_nonexpansive(
        (z, xi) in (2usize..7, 1usize..3).prop_flat_map(|(m, n)| {
            (state_strategy(n, m), state_strategy(n, m))
        }),
    ) {
        let grid = DiscretizationGrid::new(z.m(), 1.0).unwrap();
        let rz = reconstruct(&z, &grid).unwrap();
        let rxi = reconstruct(&xi, &grid).unwrap();
        let bound = block_sup_distance(&z, &xi).unwrap();
        // piecewise-linear difference attains its sup at nodes/midpoints
        let mut sup: f64 = 0.0;
        for j in 0..z.m() {
            let theta = grid.theta(j);
            sup = sup.max((rz.eval(theta) - rxi.eval(theta)).norm());
            if j + 1 < z.m() {
                let mid = 0.5 * (grid.theta(j) + grid.theta(j + 1));
                sup = sup.max((rz.eval(mid) - rxi.eval(mid)).norm());
            }
        }
        for i in 0..1000 {
            let theta = -1.0 + i as f64 / 999.0;
            sup = sup.max((rz.eval(theta) - rxi.eval(theta)).norm());
        }
        prop_assert!(sup <= bound + 1e-12, "sup {} > bound {}", sup, bound);
    }

    /// Wendland profile stays in [0, 1] and vanishes exactly beyond the
    /// support.
    #[test]
    fn wendland_range_and_support(dim in 1usize..9, r in 0.0f64..3.0) {
        let k = WendlandKernel::new(dim, 1.0).unwrap();
        let v = k.phi(r).unwrap();
        if r >= 1.0 {
            prop_assert_eq!(v, 0.0);
        } else {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    /// Kernel symmetry is exact.
    #[test]
    fn kernel_symmetric(
        a in proptest::collection::vec(-5.0f64..5.0, 3),
        b in proptest::collection::vec(-5.0f64..5.0, 3),
        sigma in 0.1f64..4.0,
    ) {
        let k = WendlandKernel::new(3, sigma).unwrap();
        let av = DVector::from_vec(a);
        let bv = DVector::from_vec(b);
        prop_assert_eq!(k.eval(&av, &bv).to_bits(), k.eval(&bv, &av).to_bits());
    }
}
