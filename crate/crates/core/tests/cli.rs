//! End-to-end behaviour of the `sparsedict` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sparsedict::artifact::{decode_dictionary, encode_codes, load_dictionary, HEADER_LEN};
use sparsedict::pipeline::{overcomplete_dct_dictionary, save_pgm};
use sparsedict::synthetic::scene;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparsedict"))
}

fn run(args: &[&str]) -> Output {
    bin().env("SPARSEDICT_THREADS", "1").args(args).output().expect("binary runs")
}

fn write_scenes(dir: &Path, n: usize, size: usize) -> Vec<PathBuf> {
    (0..n)
        .map(|i| {
            let p = dir.join(format!("scene{i}.pgm"));
            save_pgm(&p, &scene(size, size, 10 + i as u64).unwrap()).unwrap();
            p
        })
        .collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_input_exits_with_two_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.pgm");
    let out = run(&["learn", "--images", s(&missing), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.pgm"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = write_scenes(dir.path(), 1, 24);
    let out = run(&["learn", "--images", s(&imgs[0]), "--solver", "lbfgs"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["learn", "--images", s(&imgs[0]), "--mu", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    let cfg = dir.path().join("empty_mu.cfg");
    fs::write(&cfg, "mu =\n").unwrap();
    let out = run(&["sweep", "--images", s(&imgs[0]), "--test", s(&imgs[0]), "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn learn_writes_dictionary_log_and_manifest_and_reruns_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = write_scenes(dir.path(), 2, 32);
    let first = dir.path().join("first");
    let out = run(&[
        "learn", "--images", s(&imgs[0]), s(&imgs[1]), "--patch", "8", "--atoms", "256", "--n-patches", "40",
        "--seed", "7", "--bcd-sweeps", "2", "--out", s(&first),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let bytes = fs::read(first.join("dictionary.sdd")).unwrap();
    assert_eq!(bytes.len(), HEADER_LEN + 64 * 256 * 8);
    let d = decode_dictionary(&bytes).unwrap();
    assert_eq!((d.atom_dim(), d.n_atoms()), (64, 256));
    assert!(d.validate().is_ok());
    let log = fs::read_to_string(first.join("learn_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 41);
    assert!(log.ends_with('\n'));
    let manifest = fs::read_to_string(first.join("manifest.txt")).unwrap();
    assert!(manifest.lines().any(|l| l == "seed = 7"));
    assert!(manifest.contains("version = "));

    // replay from the manifest into a second directory
    let second = dir.path().join("second");
    let out = run(&["learn", "--config", s(&first.join("manifest.txt")), "--out", s(&second)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(second.join("dictionary.sdd")).unwrap(), bytes);
}

#[test]
fn reconstruct_with_complete_dct_is_near_exact() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = write_scenes(dir.path(), 1, 64);
    let dict_path = dir.path().join("dct.sdd");
    sparsedict::artifact::save_dictionary(&dict_path, &overcomplete_dct_dictionary(4, 16).unwrap()).unwrap();
    let outdir = dir.path().join("rec");
    let out = run(&[
        "reconstruct", "--images", s(&imgs[0]), "--dict", s(&dict_path), "--mu", "2^-20", "--eps2", "1e-10",
        "--out", s(&outdir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(outdir.join("quality.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let row = rdr.records().next().unwrap().unwrap();
    let rel: f64 = row[headers.iter().position(|h| h == "rel_err").unwrap()].parse().unwrap();
    assert!(rel <= 1e-4, "{rel}");
    assert!(outdir.join("rec_scene0_mu0.00000095367431640625.pgm").exists());
}

#[test]
fn reconstruct_rejects_incompatible_patch_side() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = write_scenes(dir.path(), 1, 24);
    let dict_path = dir.path().join("dct.sdd");
    sparsedict::artifact::save_dictionary(&dict_path, &overcomplete_dct_dictionary(8, 256).unwrap()).unwrap();
    let outdir = dir.path().join("rec");
    let out = run(&["reconstruct", "--images", s(&imgs[0]), "--dict", s(&dict_path), "--patch", "4", "--out", s(&outdir)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension mismatch"));
    assert!(!outdir.join("quality.csv").exists());
}

#[test]
fn analyze_flags_all_zero_codes_as_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let codes = dir.path().join("zeros.sdc");
    fs::write(&codes, encode_codes(ndarray::Array2::<f64>::zeros((16, 30)).view())).unwrap();
    let outdir = dir.path().join("an");
    let out = run(&["analyze", "--codes", s(&codes), "--out", s(&outdir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(outdir.join("sparsity.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let row = rdr.records().next().unwrap().unwrap();
    let col = |name: &str| row[headers.iter().position(|h| h == name).unwrap()].to_string();
    assert_eq!(col("degenerate"), "true");
    assert_eq!(col("peak_count"), "480");
    assert_eq!(col("sparsity_fraction"), "1");
}

#[test]
fn analyze_corrupt_artifact_fails() {
    let dir = tempfile::tempdir().unwrap();
    let codes = dir.path().join("bad.sdc");
    fs::write(&codes, b"SDCMgarbage").unwrap();
    let out = run(&["analyze", "--codes", s(&codes), "--out", s(&dir.path().join("an"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn analyze_reconstructs_and_writes_difference_images() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = write_scenes(dir.path(), 1, 32);
    let dict_path = dir.path().join("dct.sdd");
    sparsedict::artifact::save_dictionary(&dict_path, &overcomplete_dct_dictionary(8, 128).unwrap()).unwrap();
    let outdir = dir.path().join("an");
    let out = run(&[
        "analyze", "--images", s(&imgs[0]), "--dict", s(&dict_path), "--mu", "0.5", "--out", s(&outdir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "histogram_scene0_mu0.5.csv",
        "diff_scene0_mu0.5.pgm",
        "diff_scene0_mu0.5_peak_removed.pgm",
        "rec_scene0_mu0.5_peak_removed.pgm",
        "sparsity.csv",
        "manifest.txt",
    ] {
        assert!(outdir.join(name).exists(), "{name}");
    }
    let hist = fs::read_to_string(outdir.join("histogram_scene0_mu0.5.csv")).unwrap();
    assert_eq!(hist.lines().count(), 101);
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = write_scenes(dir.path(), 2, 24);
    let outdir = dir.path().join("sw");
    let out = run(&[
        "sweep", "--test", s(&imgs[1]), "--solver", "fpcbb", "--solver", "twist", "--mu", "2^-4", "--patch", "4",
        "--patch", "6", "--atoms", "64", "--n-patches", "0", "--out", s(&outdir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = sparsedict::experiment::read_sweep_csv(outdir.join("sweep.csv")).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[12].is_empty()));
}

#[test]
fn dictionary_artifact_loads_after_learn() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = write_scenes(dir.path(), 1, 20);
    let outdir = dir.path().join("l");
    let out = run(&[
        "learn", "--images", s(&imgs[0]), "--patch", "4", "--atoms", "32", "--n-patches", "10", "--out", s(&outdir),
    ]);
    assert!(out.status.success());
    let d = load_dictionary(outdir.join("dictionary.sdd")).unwrap();
    assert_eq!(d.atom_dim(), 16);
}
