//! End-to-end runs of the `lesion-synth` binary.

mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lesion_synth::cli::Config;
use lesion_synth::fusion::{synthesize_case_with, IdentityGenerator};
use lesion_synth::metrics::sphericity;
use lesion_synth::prior::SpatialPrior;
use lesion_synth::volume::{load_float, load_hu, load_mask, save_mhd, Geometry, HuVolume, Mask3};

use common::{chest_phantom, random_mask};

const BIN: &str = env!("CARGO_BIN_EXE_lesion-synth");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_config() -> Config {
    let mut c = Config::default();
    c.synthesis.fusion.patch_dims = [96, 96, 18];
    c
}

fn write_config(dir: &Path, config: &Config) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, config.to_toml()).unwrap();
    path
}

/// Control, lung and uniform prior under `dir`.
fn write_case(dir: &Path) -> (HuVolume, Mask3) {
    let (vol, lung) = chest_phantom([80, 70, 24], [1.0, 1.0, 1.5]);
    save_mhd(&vol, dir.join("control.mhd")).unwrap();
    save_mhd(&lung, dir.join("lung.mhd")).unwrap();
    save_mhd(&SpatialPrior::uniform([16, 16, 16]).unwrap().to_grid(), dir.join("prior.mhd")).unwrap();
    (vol, lung)
}

fn inpaint_args<'a>(dir: &'a Path, config: &'a Path, out: &'a Path) -> Vec<String> {
    [
        "inpaint",
        "--config",
        s(config),
        "--control",
        s(&dir.join("control.mhd")),
        "--lung",
        s(&dir.join("lung.mhd")),
        "--prior",
        s(&dir.join("prior.mhd")),
        "--out-volume",
        s(&out.join("vol.mhd")),
        "--out-mask",
        s(&out.join("mask.mhd")),
    ]
    .map(str::to_owned)
    .to_vec()
}

#[test]
fn dump_defaults_round_trips() {
    let out = run(&["--dump-defaults"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(Config::from_toml(&text).unwrap(), Config::default());
}

#[test]
fn missing_config_key_is_a_usage_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = Config::default().to_toml();
    let pruned: String = text.lines().filter(|l| !l.trim_start().starts_with("beta")).map(|l| format!("{l}\n")).collect();
    assert_ne!(pruned, text);
    let config = dir.path().join("c.toml");
    std::fs::write(&config, pruned).unwrap();
    let out = run(&["synth-mask", "--config", s(&config), "--out", s(&dir.path().join("m.mhd"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta"));
}

#[test]
fn no_subcommand_is_a_usage_error() {
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn synth_mask_is_stable_and_round_at_zero_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &Config::default());
    let paths = ["a.mhd", "b.mhd", "c.mhd"].map(|f| dir.path().join(f));
    for (p, seed) in paths.iter().zip(["5", "5", "6"]) {
        let out = run(&["--seed", seed, "synth-mask", "--config", s(&config), "--out", s(p), "--spacing", "0.8,0.8,1.0"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let raw = |p: &Path| std::fs::read(p.with_extension("raw")).unwrap();
    assert_eq!(raw(&paths[0]), raw(&paths[1]));
    assert_ne!(raw(&paths[0]), raw(&paths[2]));
    assert_eq!(load_mask(&paths[0]).unwrap().geometry().spacing, [0.8, 0.8, 1.0]);

    let mut round = Config::default();
    round.synthesis.shape.lambda_range = [0.0, 0.0];
    let config = write_config(dir.path(), &round);
    let ball = dir.path().join("ball.mhd");
    let stl = dir.path().join("ball.stl");
    let out = run(&["synth-mask", "--config", s(&config), "--out", s(&ball), "--stl", s(&stl)]);
    assert!(out.status.success());
    let mask = load_mask(&ball).unwrap();
    let sph = sphericity(&mask).unwrap();
    assert!(sph >= 0.95, "sphericity {sph}");
    assert!(std::fs::read_to_string(&stl).unwrap().starts_with("solid lesion"));
}

#[test]
fn manifest_errors_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.tsv");
    let prior = dir.path().join("p.mhd");
    std::fs::write(&manifest, "# nothing here\n\n").unwrap();
    let out = run(&["build-prior", "--manifest", s(&manifest), "--out", s(&prior)]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(&manifest, "# header\na.mhd\tb.mhd\nonly-one-field\n").unwrap();
    let out = run(&["build-prior", "--manifest", s(&manifest), "--out", s(&prior)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    std::fs::write(&manifest, "missing.mhd\tlung.mhd\n").unwrap();
    let out = run(&["build-prior", "--manifest", s(&manifest), "--out", s(&prior)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn duplicated_manifest_gives_the_same_prior() {
    let dir = tempfile::tempdir().unwrap();
    let mut lines = String::new();
    for i in 0..3u64 {
        let lung = Mask3::from_fn(Geometry::with_dims([20, 18, 12]), |[x, y, _]| u8::from(x > 2 && y > 1));
        let noise = random_mask([20, 18, 12], i, 0.05);
        let lesion = Mask3::from_fn(*lung.geometry(), |[x, y, z]| lung.get(x, y, z) & noise.get(x, y, z));
        save_mhd(&lesion, dir.path().join(format!("les{i}.mhd"))).unwrap();
        save_mhd(&lung, dir.path().join(format!("lung{i}.mhd"))).unwrap();
        lines.push_str(&format!("les{i}.mhd\tlung{i}.mhd\n"));
    }
    let once = dir.path().join("once.tsv");
    let twice = dir.path().join("twice.tsv");
    std::fs::write(&once, &lines).unwrap();
    std::fs::write(&twice, format!("{lines}{lines}")).unwrap();
    for (m, out) in [(&once, "p1.mhd"), (&twice, "p2.mhd")] {
        let r = run(&["build-prior", "--manifest", s(m), "--out", s(&dir.path().join(out))]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let a = load_float(dir.path().join("p1.mhd")).unwrap();
    let b = load_float(dir.path().join("p2.mhd")).unwrap();
    assert_eq!(a, b);
    let total: f64 = a.data().iter().map(|&v| v as f64).sum();
    assert!((total - 1.0).abs() < 1e-5);
}

#[test]
fn repeats_are_distinct_and_named() {
    let dir = tempfile::tempdir().unwrap();
    write_case(dir.path());
    let config = write_config(dir.path(), &small_config());
    let out_dir = dir.path().join("out");
    std::fs::create_dir(&out_dir).unwrap();
    let mut args = inpaint_args(dir.path(), &config, &out_dir);
    args.extend(["--repeat", "3", "--lesions", "2"].map(str::to_owned));
    let out = Command::new(BIN).args(&args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let masks: Vec<Vec<u8>> = (0..3)
        .map(|i| std::fs::read(out_dir.join(format!("mask_rep{i}.raw"))).unwrap())
        .collect();
    assert_ne!(masks[0], masks[1]);
    assert_ne!(masks[1], masks[2]);
    assert!(out_dir.join("vol_rep2.mhd").exists());
    assert!(!out_dir.join("vol.mhd").exists());
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write_case(dir.path());
    let config = write_config(dir.path(), &small_config());
    let mut raws = Vec::new();
    for jobs in ["1", "4"] {
        let out_dir = dir.path().join(format!("jobs{jobs}"));
        std::fs::create_dir(&out_dir).unwrap();
        let mut args = vec!["--jobs".to_owned(), jobs.to_owned()];
        args.extend(inpaint_args(dir.path(), &config, &out_dir));
        args.extend(["--repeat", "2"].map(str::to_owned));
        let out = Command::new(BIN).args(&args).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        raws.push([0, 1].map(|i| std::fs::read(out_dir.join(format!("vol_rep{i}.raw"))).unwrap()));
    }
    assert_eq!(raws[0], raws[1]);
}

#[test]
fn external_generator_matches_in_process_identity() {
    let dir = tempfile::tempdir().unwrap();
    let (vol, lung) = write_case(dir.path());
    let config = small_config();
    let config_path = write_config(dir.path(), &config);
    let out_dir = dir.path().join("out");
    std::fs::create_dir(&out_dir).unwrap();
    let mut args = inpaint_args(dir.path(), &config_path, &out_dir);
    args.extend(["--seed", "11", "--lesions", "2", "--generator-cmd"].map(str::to_owned));
    args.push(format!("{BIN} identity-generator"));
    let out = Command::new(BIN).args(&args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let prior = SpatialPrior::uniform([16, 16, 16]).unwrap();
    let expected = synthesize_case_with(&vol, &lung, &prior, &config.synthesis, 2, 11, &IdentityGenerator).unwrap();
    assert_eq!(load_hu(out_dir.join("vol.mhd")).unwrap(), expected.volume);
    assert_eq!(load_mask(out_dir.join("mask.mhd")).unwrap(), expected.mask);
}

#[test]
fn failing_generator_exits_with_internal_error() {
    let dir = tempfile::tempdir().unwrap();
    write_case(dir.path());
    let config = write_config(dir.path(), &small_config());
    let mut args = inpaint_args(dir.path(), &config, dir.path());
    args.extend(["--generator-cmd", "/nonexistent/generator"].map(str::to_owned));
    let out = Command::new(BIN).args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn metrics_of_identical_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let sub = |n: &str| {
        let p = dir.path().join(n);
        std::fs::create_dir(&p).unwrap();
        p
    };
    let (pred, gt, lungs, vols) = (sub("pred"), sub("gt"), sub("lung"), sub("vol"));
    let (vol, lung) = chest_phantom([40, 36, 12], [1.0, 1.0, 2.0]);
    for i in 0..4u64 {
        let noise = random_mask([40, 36, 12], 30 + i, 0.05 + 0.1 * i as f64);
        let lesion = Mask3::from_fn(*lung.geometry(), |[x, y, z]| lung.get(x, y, z) & noise.get(x, y, z));
        let lesion = lesion.with_geometry(*vol.geometry()).unwrap();
        let id = format!("case{i}.mhd");
        save_mhd(&lesion, pred.join(&id)).unwrap();
        save_mhd(&lesion, gt.join(&id)).unwrap();
        save_mhd(&lung, lungs.join(&id)).unwrap();
        save_mhd(&vol, vols.join(&id)).unwrap();
    }
    // Only in one directory: skipped.
    save_mhd(&lung, pred.join("stray.mhd")).unwrap();
    let csv = dir.path().join("cases.csv");
    let out = run(&[
        "metrics", "--pred", s(&pred), "--gt", s(&gt), "--lung", s(&lungs), "--volume", s(&vols), "--out", s(&csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("id,dsc,po_pred,po_gt,pho_pred,pho_gt,lir"));
    assert_eq!(lines.count(), 4);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(csv.with_extension("json")).unwrap()).unwrap();
    assert_eq!(summary["n_cases"], 4);
    assert_eq!(summary["dsc"]["mean"].as_f64(), Some(1.0));
    assert!((summary["pearson_po"]["r"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((summary["lir"]["mean"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let empty = sub("empty");
    let out = run(&[
        "metrics", "--pred", s(&empty), "--gt", s(&gt), "--lung", s(&lungs), "--volume", s(&vols), "--out", s(&csv),
    ]);
    assert_eq!(out.status.code(), Some(3));
}
