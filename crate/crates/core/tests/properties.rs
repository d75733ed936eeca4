use cdimc_core::autodiff::Tape;
use cdimc_core::dataset::{MaskMode, MaskSpec, MultiViewDataset};
use cdimc_core::graph::Rearrangement;
use cdimc_core::metrics::{acc, nmi};
use cdimc_core::Matrix;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-5.0..5.0f64, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

fn labels(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..k, n)
}

proptest! {
    #[test]
    fn relu_is_idempotent(x in matrix(4, 5)) {
        let mut tape = Tape::new();
        let v = tape.input(x).unwrap();
        let once = tape.relu(v).unwrap();
        let twice = tape.relu(once).unwrap();
        prop_assert_eq!(tape.value(once), tape.value(twice));
        prop_assert!(tape.value(once).as_slice().iter().all(|&a| a >= 0.0));
    }

    #[test]
    fn per_view_removal_counts_are_exact(n in 4usize..80, l in 2usize..5, rate in 0.0..0.95f64, seed in any::<u64>()) {
        let removed = (rate * n as f64).floor() as usize;
        let result = MaskSpec::new(MaskMode::PerViewRemoval, rate, seed).generate(n, l);
        if removed * l > n * (l - 1) {
            prop_assert!(result.is_err());
        } else {
            let masks = result.unwrap();
            for mask in &masks {
                prop_assert_eq!(mask.iter().filter(|&&m| m).count(), n - removed);
            }
            for i in 0..n {
                prop_assert!(masks.iter().any(|m| m[i]));
            }
        }
    }

    #[test]
    fn paired_subset_partitions_samples(n in 2usize..80, rate in 0.0..0.99f64, seed in any::<u64>()) {
        let masks = MaskSpec::new(MaskMode::PairedSubset, rate, seed).generate(n, 2).unwrap();
        let both = (0..n).filter(|&i| masks[0][i] && masks[1][i]).count();
        let first = (0..n).filter(|&i| masks[0][i] && !masks[1][i]).count();
        let second = (0..n).filter(|&i| !masks[0][i] && masks[1][i]).count();
        let paired = (rate * n as f64).floor() as usize;
        prop_assert_eq!(both, paired);
        prop_assert_eq!(first, (n - paired).div_ceil(2));
        prop_assert_eq!(second, (n - paired) / 2);
    }

    #[test]
    fn permutation_round_trips(order in Just((0..30usize).collect::<Vec<_>>()).prop_shuffle()) {
        let r = Rearrangement::new(order.clone()).unwrap();
        let values: Vec<usize> = (0..30).map(|i| i * 10).collect();
        let moved: Vec<usize> = order.iter().map(|&i| values[i]).collect();
        prop_assert_eq!(r.restore(&moved), values);
    }

    #[test]
    fn fills_keep_available_rows(x in matrix(12, 3), y in matrix(12, 2), seed in any::<u64>()) {
        let ds = MultiViewDataset::complete(vec![x.clone(), y.clone()], None).unwrap()
            .make_incomplete(&MaskSpec::new(MaskMode::PerViewRemoval, 0.4, seed)).unwrap();
        let mean = ds.mean_fill().unwrap();
        let zero = ds.zero_fill();
        for (v, original) in [x, y].iter().enumerate() {
            for i in 0..12 {
                if ds.mask(v)[i] {
                    prop_assert_eq!(mean[v].row(i), original.row(i));
                    prop_assert_eq!(zero[v].row(i), original.row(i));
                } else {
                    prop_assert!(zero[v].row(i).iter().all(|&a| a == 0.0));
                }
            }
        }
    }

    #[test]
    fn fusion_ignores_masked_codes(a in matrix(6, 3), b in matrix(6, 3), junk in matrix(6, 3)) {
        let weights = vec![vec![1.0, 0.0, 1.0, 1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0, 1.0, 1.0, 1.0]];
        let mut replaced = b.clone();
        for i in 0..6 {
            if weights[1][i] == 0.0 {
                replaced.row_mut(i).copy_from_slice(junk.row(i));
            }
        }
        let fused = |b: Matrix| {
            let mut tape = Tape::new();
            let ha = tape.input(a.clone()).unwrap();
            let hb = tape.input(b).unwrap();
            let f = tape.mean_fuse(&[ha, hb], weights.clone()).unwrap();
            tape.value(f).clone()
        };
        prop_assert_eq!(fused(b.clone()), fused(replaced));
    }

    #[test]
    fn metrics_stay_in_range((k, pred, truth) in (1usize..6).prop_flat_map(|k| (Just(k), labels(40, k), labels(40, k)))) {
        let a = acc(&pred, &truth).unwrap();
        let m = nmi(&pred, &truth).unwrap();
        prop_assert!(a >= 1.0 / k as f64 - 1e-12 && a <= 1.0);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&m));
        prop_assert_eq!(acc(&truth, &truth).unwrap(), 1.0);
    }
}
