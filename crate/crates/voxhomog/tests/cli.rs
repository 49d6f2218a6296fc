//! Command-line behavior: exit codes, printed tables and reruns.

use std::path::Path;
use std::process::{Command, Output};

use voxhomog::io::{self, checkpoint, grid};
use voxhomog::pipeline::dataset::{DatasetManifest, SampleRecord};
use voxhomog::pipeline::featmaps::read_feature_maps;
use voxhomog_core::microgeom::{sample_schedule, ShapeKind};
use voxhomog_core::nn::arch::{ConvSpec, FcSpec};
use voxhomog_core::nn::scaling::GroupRange;
use voxhomog_core::nn::{Activation, Checkpoint, LabelScaler, Network, NetworkArch, Pooling, Preset, OUTPUT_DIM};
use voxhomog_core::stats::Split;
use voxhomog_core::voxel::{PhaseGrid, MATRIX};

fn voxhomog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voxhomog"))
        .args(args)
        .env_remove("VOXHOMOG_THREADS")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn gen_writes_a_manifest_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = voxhomog(&["-q", "--out", s(out), "gen", "--count", "10", "--bins", "5", "--split", "6,2,2"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let manifest: DatasetManifest = io::read_json(&a.join("manifest.json")).unwrap();
    assert_eq!(manifest.samples.len(), 10);
    assert_eq!(manifest.split(Split::Train).count(), 6);
    let hash = |d: &Path| io::sha256_hex(&std::fs::read(d.join("manifest.json")).unwrap());
    assert_eq!(hash(&a), hash(&b));
    assert_eq!(
        std::fs::read(a.join("labels.csv")).unwrap(),
        std::fs::read(b.join("labels.csv")).unwrap()
    );
    assert!(a.join("config.toml").exists());
    // The echoed config alone reproduces the dataset.
    let c = dir.path().join("c");
    let o = voxhomog(&["-q", "--config", s(&a.join("config.toml")), "--out", s(&c), "gen"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(hash(&a), hash(&c));
}

#[test]
fn invalid_volume_fraction_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = voxhomog(&["--out", s(dir.path()), "gen", "--vf-max", "0.9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dataset.vf_max"), "{}", stderr(&o));

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[dataset]\nvf_max = 0.9\n").unwrap();
    let o = voxhomog(&["--config", s(&cfg), "--out", s(dir.path()), "gen"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dataset.vf_max"), "{}", stderr(&o));

    std::fs::write(&cfg, "[train]\nepocs = 3\n").unwrap();
    let o = voxhomog(&["--config", s(&cfg), "--out", s(dir.path()), "bounds", "--vf", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("epocs"), "{}", stderr(&o));
}

#[test]
fn runtime_failures_exit_with_code_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = voxhomog(&[
        "--out",
        s(dir.path()),
        "predict",
        "--grid",
        s(&dir.path().join("missing.phgr")),
        "--oracle",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bounds_at_28_percent() {
    let dir = tempfile::tempdir().unwrap();
    let o = voxhomog(&["--out", s(dir.path()), "bounds", "--vf", "0.28"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("89.379"), "{text}");
    assert!(text.contains("155.784"), "{text}");
    let b: serde_json::Value = io::read_json(&dir.path().join("bounds.json")).unwrap();
    assert!((b["reuss"].as_f64().unwrap() - 89.38).abs() < 5e-3);
}

#[test]
fn threads_flag_and_environment_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_voxhomog"))
        .args(["--out", s(dir.path()), "bounds", "--vf", "0.1"])
        .env("VOXHOMOG_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = voxhomog(&["--threads", "2", "--out", s(dir.path()), "bounds", "--vf", "0.1"]);
    assert!(o.status.success());
}

#[test]
fn predict_all_matrix_grid_with_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("matrix.phgr");
    grid::write_grid(&g, &PhaseGrid::filled(9, 1.0, MATRIX).unwrap(), grid::GridEncoding::Rle).unwrap();
    let o = voxhomog(&["--out", s(dir.path()), "predict", "--grid", s(&g), "--oracle"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines.len(), 13);
    let names = ["E11", "E22", "E33", "G23", "G13", "G12", "nu21", "nu31", "nu12", "nu32", "nu13", "nu23"];
    for (line, name) in lines[1..].iter().zip(names) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(cols[0], name);
        let v: f64 = cols[3].parse().unwrap();
        let want = match &name[..1] {
            "E" => 68.9,
            "G" => 68.9 / 2.66,
            _ => 0.33,
        };
        assert!((v - want).abs() < 1e-4, "{line}");
    }
}

fn toy_arch(n: usize) -> NetworkArch {
    NetworkArch {
        input_n: n,
        convs: vec![ConvSpec { filters: 2, kernel: 3, pool: true }],
        fcs: vec![
            FcSpec { width: 4, activation: Activation::Sigmoid },
            FcSpec { width: OUTPUT_DIM, activation: Activation::Sigmoid },
        ],
    }
}

/// Constant-output network (all parameters zero gives 0.5 per output)
/// and labels equal to that output in physical units.
#[test]
fn eval_on_perfect_toy_checkpoint_prints_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let n = 9;
    let arch = toy_arch(n);
    let n_params = arch.n_params().unwrap();
    let scaler = LabelScaler {
        moduli: GroupRange { min: 50.0, max: 100.0 },
        poisson: GroupRange { min: 0.25, max: 0.35 },
    };
    let label = scaler.unscale(&[0.5; OUTPUT_DIM]);
    let ck = Checkpoint {
        trainable: vec![true; arch.n_stages()],
        arch,
        params: vec![0.0; n_params],
        adam: None,
        scaler: Some(scaler),
        log: None,
        seed: 0,
        base_checkpoint: None,
    };
    let ck_path = dir.path().join("toy.vxck");
    checkpoint::write_checkpoint(&ck_path, &ck).unwrap();

    let data = dir.path().join("data");
    let samples: Vec<SampleRecord> = (0..4)
        .map(|id| {
            let rel = format!("grids/sample_{id:05}.phgr");
            let mut g = PhaseGrid::filled(n, 1.0, MATRIX).unwrap();
            g.set(id, id, id, 1);
            grid::write_grid(&data.join(&rel), &g, grid::GridEncoding::Raw).unwrap();
            SampleRecord {
                id,
                target_vf: 0.0,
                seed: 0,
                attempt: 0,
                achieved_vf: 0.0,
                voxel_vf: 1.0 / 729.0,
                geometry: String::new(),
                grid: rel,
                labels: label,
                asymmetry: 0.0,
                split: if id < 2 { Split::Test } else { Split::Train },
            }
        })
        .collect();
    let manifest = DatasetManifest {
        dataset_seed: 0,
        n,
        shape_kind: ShapeKind::Sphere,
        schedule: sample_schedule(0.02, 0.28, 2, 4, 0.0).unwrap(),
        split_ratio: [1, 0, 1],
        samples,
    };
    io::write_json(&data.join("manifest.json"), &manifest).unwrap();

    let out = dir.path().join("eval");
    let o = voxhomog(&[
        "--out",
        s(&out),
        "eval",
        "--data",
        s(&data),
        "--checkpoint",
        s(&ck_path),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 14, "{text}");
    for r in rows {
        assert!(r.ends_with("0.0000"), "{r}");
    }
    let report: serde_json::Value = io::read_json(&out.join("mare_test.json")).unwrap();
    assert_eq!(report["samples"], 2);
    assert!(report["moduli_max"].as_f64().unwrap() < 1e-12);
    assert!(out.join("mare_test.csv").exists());
}

#[test]
fn featmaps_of_an_empty_grid_are_zero() {
    let dir = tempfile::tempdir().unwrap();
    let arch = Preset::Desk.arch(33, &Pooling::Every, Activation::Sigmoid).unwrap();
    let net = Network::<f32>::new(arch.clone(), 3).unwrap();
    let ck = Checkpoint {
        trainable: net.trainable().to_vec(),
        arch,
        params: net.params().to_vec(),
        adam: None,
        scaler: None,
        log: None,
        seed: 3,
        base_checkpoint: None,
    };
    let ck_path = dir.path().join("net.vxck");
    checkpoint::write_checkpoint(&ck_path, &ck).unwrap();
    let g = dir.path().join("empty.phgr");
    grid::write_grid(&g, &PhaseGrid::filled(33, 1.0, MATRIX).unwrap(), grid::GridEncoding::Rle).unwrap();
    for layer in ["0", "1"] {
        let o = voxhomog(&[
            "--out",
            s(dir.path()),
            "featmaps",
            "--checkpoint",
            s(&ck_path),
            "--grid",
            s(&g),
            "--layer",
            layer,
            "--axis",
            "x",
            "--index",
            "3",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let fm = read_feature_maps(&dir.path().join(format!("featmaps_l{layer}_x3.vxfm"))).unwrap();
        assert_eq!(fm.maps.len(), fm.header.channels * fm.header.extent * fm.header.extent);
        assert!(fm.maps.iter().all(|&v| v == 0.0));
    }
    let o = voxhomog(&[
        "--out",
        s(dir.path()),
        "featmaps",
        "--checkpoint",
        s(&ck_path),
        "--grid",
        s(&g),
        "--layer",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(1));
}
