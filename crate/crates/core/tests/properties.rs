//! Property-based invariants of the kernels, prox operators and solvers.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use trace_tucker::datagen::{gaussian_matrix, gaussian_tensor, random_orthonormal};
use trace_tucker::linalg::{procrustes, svt, thin_svd, trace_norm};
use trace_tucker::{ctd_decompose, rse, DenseTensor, Mat, SolverConfig, SynthSpec, Tensor};

fn dims_strategy(max_order: usize, max_extent: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1..=max_extent, 1..=max_order)
}

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Rank counted as singular values above `1e-9 · s_1`.
fn strict_rank(m: &Mat) -> usize {
    let s = thin_svd(m).unwrap().s;
    let top = s[0];
    if top == 0.0 {
        0
    } else {
        s.iter().filter(|&&v| v > 1e-9 * top).count()
    }
}

/// Reorders the slices of mode `mode` by `perm`.
fn permute_mode(t: &Tensor, mode: usize, perm: &[usize]) -> Tensor {
    DenseTensor::from_fn(t.dims(), |idx| {
        let mut src = idx.to_vec();
        src[mode] = perm[idx[mode]];
        t.get(&src)
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unfold_refold_round_trip(dims in dims_strategy(4, 5), seed in any::<u64>()) {
        let t: Tensor = gaussian_tensor(&dims, &mut rng(seed));
        for n in 0..dims.len() {
            let m = t.unfold(n).unwrap();
            prop_assert_eq!(m.rows(), dims[n]);
            prop_assert!((m.frob_norm() - t.frob_norm()).abs() <= 1e-12 * t.frob_norm());
            prop_assert_eq!(&DenseTensor::refold(&m, n, &dims).unwrap(), &t);
        }
    }

    #[test]
    fn mode_products_commute(dims in dims_strategy(4, 4), seed in any::<u64>(), r1 in 1usize..4, r2 in 1usize..4) {
        prop_assume!(dims.len() >= 2);
        let mut g = rng(seed);
        let t: Tensor = gaussian_tensor(&dims, &mut g);
        let a: Mat = gaussian_matrix(r1, dims[0], &mut g);
        let b: Mat = gaussian_matrix(r2, dims[1], &mut g);
        let ab = t.mode_product(&a, 0).unwrap().mode_product(&b, 1).unwrap();
        let ba = t.mode_product(&b, 1).unwrap().mode_product(&a, 0).unwrap();
        prop_assert!(ab.distance(&ba).unwrap() <= 1e-12 * ab.frob_norm().max(1.0));
    }

    #[test]
    fn svd_invariants(rows in 1usize..9, cols in 1usize..9, seed in any::<u64>()) {
        let a: Mat = gaussian_matrix(rows, cols, &mut rng(seed));
        let svd = thin_svd(&a).unwrap();
        prop_assert!(svd.u.orthonormality_error() <= 1e-10);
        prop_assert!(svd.v.orthonormality_error() <= 1e-10);
        prop_assert!(svd.s.windows(2).all(|w| w[0] >= w[1]) && svd.s.iter().all(|&s| s >= 0.0));
        prop_assert!(svd.recompose().sub(&a).unwrap().frob_norm() <= 1e-9 * a.frob_norm());
    }

    #[test]
    fn svt_contracts(rows in 1usize..7, cols in 1usize..7, th in 0.0f64..3.0, seed in any::<u64>()) {
        let mut g = rng(seed);
        let a: Mat = gaussian_matrix(rows, cols, &mut g);
        let b: Mat = gaussian_matrix(rows, cols, &mut g);
        let (sa, sb) = (svt(&a, th).unwrap(), svt(&b, th).unwrap());
        prop_assert!(sa.sub(&sb).unwrap().frob_norm() <= a.sub(&b).unwrap().frob_norm() + 1e-12);
        prop_assert!(trace_norm(&sa).unwrap() <= trace_norm(&a).unwrap() + 1e-12);
        prop_assert!(strict_rank(&sa) <= strict_rank(&a));
    }

    #[test]
    fn trace_norm_is_orthogonally_invariant(m in 1usize..6, k in 1usize..5, seed in any::<u64>()) {
        let mut g = rng(seed);
        let k = k.min(m);
        let s: Vec<f64> = (0..k).map(|i| (k - i) as f64 + 0.5).collect();
        let u: Mat = random_orthonormal(m + 2, k, &mut g);
        let v: Mat = random_orthonormal(m + 1, k, &mut g);
        let diag = Mat::from_fn(k, k, |i, j| if i == j { s[i] } else { 0.0 });
        let a = u.matmul(&diag).unwrap().matmul_transpose(&v).unwrap();
        let want: f64 = s.iter().sum();
        prop_assert!((trace_norm(&a).unwrap() - want).abs() <= 1e-9 * want);
    }

    #[test]
    fn procrustes_is_orthonormal(rows in 1usize..9, cols in 1usize..5, seed in any::<u64>()) {
        prop_assume!(cols <= rows);
        let a: Mat = gaussian_matrix(rows, cols, &mut rng(seed));
        prop_assert!(procrustes(&a).unwrap().orthonormality_error() <= 1e-10);
    }

    #[test]
    fn rse_ignores_mode_permutation(seed in any::<u64>()) {
        let mut g = rng(seed);
        let t: Tensor = gaussian_tensor(&[3, 4, 2], &mut g);
        let x: Tensor = gaussian_tensor(&[3, 4, 2], &mut g);
        let swap = |a: &Tensor| DenseTensor::from_fn(&[4, 2, 3], |i| a.get(&[i[2], i[0], i[1]])).unwrap();
        let (r1, r2) = (rse(&x, &t).unwrap(), rse(&swap(&x), &swap(&t)).unwrap());
        prop_assert!((r1 - r2).abs() <= 1e-14 * r1);
    }

    #[test]
    fn generator_is_reproducible(seed in any::<u64>(), delta in 0.0f64..0.1) {
        let spec = SynthSpec::new(vec![5, 4, 3], vec![2, 2, 1]).with_seed(seed).with_noise(delta);
        prop_assert_eq!(spec.generate::<f64>().unwrap().noisy, spec.generate::<f64>().unwrap().noisy);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// Permuting the slices of one mode permutes the CTD estimate the same
    /// way.
    #[test]
    fn ctd_is_permutation_equivariant(seed in any::<u64>(), mode in 0usize..3, rot in 1usize..7) {
        let data = SynthSpec::new(vec![7, 6, 8], vec![2, 2, 2]).with_seed(seed).with_noise(0.05).generate::<f64>().unwrap();
        let extent = data.noisy.dims()[mode];
        let perm: Vec<usize> = (0..extent).map(|i| (i + rot) % extent).rev().collect();
        let cfg = SolverConfig { max_iter: 40, parallel: false, ..SolverConfig::ctd_default() };
        let a = ctd_decompose(&data.noisy, &cfg).unwrap();
        let b = ctd_decompose(&permute_mode(&data.noisy, mode, &perm), &cfg).unwrap();
        let expected = permute_mode(&a.x, mode, &perm);
        prop_assert!(b.x.distance(&expected).unwrap() <= 1e-9 * expected.frob_norm().max(1.0));
        prop_assert_eq!(a.mode_ranks, b.mode_ranks);
    }
}
