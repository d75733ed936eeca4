use cdimc_core::dataset::{make_synthetic, MaskMode, MaskSpec, MultiViewDataset, SyntheticSpec};
use cdimc_core::graph::{build_knn_graph, rearrange, NeighborGraph};
use cdimc_core::pretrain::{run_pretrain, PretrainConfig, Reconstruction};

fn data(seed: u64) -> (MultiViewDataset, NeighborGraph) {
    let ds = make_synthetic(&SyntheticSpec { clusters: 3, n: 90, dims: vec![8, 6], separation: 4.0, seed })
        .unwrap()
        .make_incomplete(&MaskSpec::new(MaskMode::PerViewRemoval, 0.3, seed))
        .unwrap()
        .standardized();
    let (ds, _) = rearrange(&ds, 3, seed).unwrap();
    let graph = build_knn_graph(&ds, 5).unwrap();
    (ds, graph)
}

#[test]
fn pretraining_loss_goes_down() {
    for seed in 0..3 {
        let (ds, graph) = data(seed);
        for reconstruction in [Reconstruction::Fused, Reconstruction::PerView] {
            let cfg = PretrainConfig { epochs: 20, hidden_width: 32, reconstruction, seed, ..PretrainConfig::default() };
            let losses = run_pretrain(&ds, &graph, 3, &cfg).unwrap().epoch_losses;
            assert_eq!(losses.len(), 20);
            assert!(losses[19] < losses[0], "seed {seed} {reconstruction:?}: {} -> {}", losses[0], losses[19]);
        }
    }
}

#[test]
fn zero_epochs_fuses_the_initial_encoders() {
    let (ds, graph) = data(4);
    let cfg = PretrainConfig { epochs: 0, hidden_width: 16, seed: 4, ..PretrainConfig::default() };
    let a = run_pretrain(&ds, &graph, 3, &cfg).unwrap();
    let b = run_pretrain(&ds, &graph, 3, &cfg).unwrap();
    assert!(a.epoch_losses.is_empty());
    assert_eq!(a.fused, b.fused);
    assert_eq!(a.fused, a.model.fused_codes(&ds).unwrap());
    let other = run_pretrain(&ds, &graph, 3, &PretrainConfig { seed: 5, ..cfg }).unwrap();
    assert_ne!(a.fused, other.fused);
}
