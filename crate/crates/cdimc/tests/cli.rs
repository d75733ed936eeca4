use std::fs;
use std::path::Path;
use std::process::Command;

use cdimc::checkpoint;
use cdimc::config::RunConfig;
use cdimc::io::{load_dataset, load_labels, save_dataset, write_assignments};
use cdimc::report::RunReport;
use cdimc::run::{cmd_eval, cmd_mask, cmd_run, cmd_synth, seed_files};
use cdimc_core::dataset::{make_synthetic, MaskMode, MaskSpec, MultiViewDataset, SyntheticSpec};
use cdimc_core::pretrain::MultiViewAutoencoder;
use cdimc_core::Matrix;

fn small_config(out: &Path, seeds: &str) -> RunConfig {
    let mut c = RunConfig::default();
    c.apply(&format!(
        "synth_n = 60\nsynth_dims = 5,4\nhidden_width = 16\npretrain_epochs = 5\nmax_outer = 4\n\
         max_inner = 2\nfinetune_batch_size = 20\nseeds = {seeds}\nout = {}",
        out.display()
    ))
    .unwrap();
    c
}

fn without_times(mut r: RunReport) -> RunReport {
    r.runs.iter_mut().for_each(|s| s.wall_time_secs = 0.0);
    r
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cdimc"))
}

#[test]
fn one_seed_run_fills_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_run(&small_config(dir.path(), "3")).unwrap();
    assert!(report.complete);
    assert_eq!(report.runs.len(), 1);
    assert!(report.runs[0].acc.is_some() && report.runs[0].nmi.is_some());
    for name in ["config.txt", "report.txt", "report.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let (assign, diag, model) = seed_files(dir.path(), 3);
    let rows = load_labels(&assign).unwrap();
    assert_eq!(rows.len(), 60);
    let lines = fs::read_to_string(diag).unwrap();
    assert_eq!(lines.lines().count(), report.runs[0].iterations + 1);
    let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    for key in ["t", "loss", "lambda", "threshold", "selected", "change_fraction", "distortion"] {
        assert!(first.get(key).is_some(), "{key}");
    }
    checkpoint::load(&model).unwrap();
}

#[test]
fn same_config_same_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = cmd_run(&small_config(a.path(), "1,2")).unwrap();
    let rb = cmd_run(&small_config(b.path(), "1,2")).unwrap();
    assert_eq!(without_times(ra), without_times(rb));
    for seed in [1, 2] {
        let (fa, da, ma) = seed_files(a.path(), seed);
        let (fb, db, mb) = seed_files(b.path(), seed);
        assert_eq!(fs::read(fa).unwrap(), fs::read(fb).unwrap());
        assert_eq!(fs::read(da).unwrap(), fs::read(db).unwrap());
        assert_eq!(fs::read(ma).unwrap(), fs::read(mb).unwrap());
    }
}

#[test]
fn aggregate_is_the_mean_of_the_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_run(&small_config(dir.path(), "0..5")).unwrap();
    assert_eq!(report.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
    let accs: Vec<f64> = report.runs.iter().map(|r| r.acc.unwrap()).collect();
    let mean = accs.iter().sum::<f64>() / 5.0;
    assert!((report.acc.unwrap().mean - mean).abs() < 1e-12);
    let var = accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / 4.0;
    assert!((report.acc.unwrap().std - var.sqrt()).abs() < 1e-12);
    let json: RunReport = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json, report);
}

#[test]
fn diverging_run_is_flagged_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), "0");
    cfg.set("pretrain_lr", "1e12").unwrap();
    let err = cmd_run(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 4, "{err}");
    assert!(err.to_string().contains("pretrain stage"), "{err}");
    let report: RunReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(!report.complete);
    assert!(fs::read_to_string(dir.path().join("report.txt")).unwrap().contains("INCOMPLETE"));
}

#[test]
fn mask_counts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("full");
    cmd_synth(&SyntheticSpec { clusters: 3, n: 50, dims: vec![4, 3, 5], separation: 3.0, seed: 2 }, &data).unwrap();
    let spec = MaskSpec::new(MaskMode::PerViewRemoval, 0.3, 11);
    let (o1, o2) = (dir.path().join("m1"), dir.path().join("m2"));
    cmd_mask(&data, &spec, &o1).unwrap();
    cmd_mask(&data, &spec, &o2).unwrap();
    let ds = load_dataset(&o1).unwrap();
    for v in 0..3 {
        assert_eq!(ds.mask(v).iter().filter(|&&a| a).count(), 50 - 15);
    }
    assert_eq!(fs::read(o1.join("mask.csv")).unwrap(), fs::read(o2.join("mask.csv")).unwrap());
}

#[test]
fn eval_scores() {
    let dir = tempfile::tempdir().unwrap();
    let truth: Vec<usize> = (0..30).map(|i| i % 3).collect();
    let t = dir.path().join("truth.csv");
    write_assignments(&t, &truth).unwrap();
    assert_eq!(cmd_eval(&t, &t).unwrap(), (1.0, 1.0));

    let relabeled: Vec<usize> = truth.iter().map(|&c| [2, 0, 1][c]).collect();
    let r = dir.path().join("relabeled.csv");
    fs::write(&r, relabeled.iter().map(|c| format!("{c}\n")).collect::<String>()).unwrap();
    let (acc, nmi) = cmd_eval(&r, &t).unwrap();
    assert_eq!(acc, 1.0);
    assert!((nmi - 1.0).abs() < 1e-12);

    let short = dir.path().join("short.csv");
    write_assignments(&short, &truth[..20]).unwrap();
    let out = bin().args(["eval", "--pred"]).arg(&short).arg("--truth").arg(&t).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("20 predictions but 30"));
}

#[test]
fn dataset_round_trip_is_exact() {
    let ds = make_synthetic(&SyntheticSpec { clusters: 2, n: 25, dims: vec![3, 6], separation: 2.0, seed: 5 })
        .unwrap()
        .make_incomplete(&MaskSpec::new(MaskMode::PerViewRemoval, 0.4, 5))
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&ds, dir.path()).unwrap();
    assert_eq!(load_dataset(dir.path()).unwrap(), ds);
    let unlabeled = MultiViewDataset::new(ds.views().to_vec(), ds.masks().to_vec(), None).unwrap();
    save_dataset(&unlabeled, dir.path()).unwrap();
    assert_eq!(load_dataset(dir.path()).unwrap(), unlabeled);
}

#[test]
fn format_errors_name_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("view_1.csv"), "1,2\n3,4\n5\n").unwrap();
    let err = load_dataset(dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("view_1.csv:3"), "{err}");

    fs::write(dir.path().join("view_1.csv"), "1,2\n3,x\n").unwrap();
    assert!(load_dataset(dir.path()).unwrap_err().to_string().contains("view_1.csv:2"));

    fs::write(dir.path().join("view_1.csv"), "1,2\nNaN,4\n").unwrap();
    let err = load_dataset(dir.path()).unwrap_err();
    assert!(err.to_string().contains("non-finite"), "{err}");
    fs::write(dir.path().join("view_2.csv"), "7\n8\n").unwrap();
    fs::write(dir.path().join("mask.csv"), "1,1\n0,1\n").unwrap();
    load_dataset(dir.path()).unwrap();
    fs::write(dir.path().join("mask.csv"), "1,1\n2,1\n").unwrap();
    assert!(load_dataset(dir.path()).unwrap_err().to_string().contains("mask.csv:2"));
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let model = MultiViewAutoencoder::new(&[5, 3], 2, 9, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    checkpoint::save(&model, &path).unwrap();
    assert_eq!(checkpoint::load(&path).unwrap(), model);

    let text = fs::read_to_string(&path).unwrap().replacen("param 5 4", "param 5 5", 1);
    fs::write(&path, text).unwrap();
    assert!(checkpoint::load(&path).is_err());
    fs::write(&path, "cdimc-checkpoint 9\n").unwrap();
    assert!(checkpoint::load(&path).unwrap_err().to_string().contains(":1:"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["run", "--set", "bogus=1", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["run", "--set", "clusters=1", "--set", "synth_clusters=1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["run", "--data"]).arg(dir.path().join("missing")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let out = bin().args(["mask", "--rate", "0.3", "--data"]).arg(dir.path().join("missing")).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn cli_synth_mask_run_eval() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s);
    let ok = |c: &mut Command| {
        let o = c.output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    ok(bin().args(["synth", "--n", "45", "--dims", "4,4", "--out"]).arg(p("full")));
    let text = ok(bin().args(["mask", "--rate", "0.2", "--seed", "3", "--data"]).arg(p("full")).arg("--out").arg(p("masked")));
    assert!(text.contains("view 1: 36 of 45"), "{text}");
    fs::write(p("run.cfg"), "hidden_width = 16\npretrain_epochs = 3\nmax_outer = 3\nmask_mode = none\n").unwrap();
    ok(bin()
        .args(["run", "--seed", "7", "--config"])
        .arg(p("run.cfg"))
        .arg("--data")
        .arg(p("masked"))
        .arg("--out")
        .arg(p("res")));
    let text = ok(bin().args(["eval", "--pred"]).arg(p("res/assignments_seed7.csv")).arg("--truth").arg(p("masked/labels.csv")));
    assert!(text.starts_with("ACC 0.") || text.starts_with("ACC 1."), "{text}");
    let saved = RunConfig::parse(&fs::read_to_string(p("res/config.txt")).unwrap()).unwrap();
    assert_eq!(saved.seeds, vec![7]);
    assert_eq!(saved.pipeline.hidden_width, 16);
}

#[test]
fn extreme_values_survive_round_trip() {
    let x = Matrix::from_rows(&[[0.1 + 0.2, -1e-300], [f64::MAX, 1.0 / 3.0]]).unwrap();
    let ds = MultiViewDataset::complete(vec![x], None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&ds, dir.path()).unwrap();
    assert_eq!(load_dataset(dir.path()).unwrap(), ds);
}
