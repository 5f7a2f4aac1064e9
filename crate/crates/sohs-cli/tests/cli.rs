//! End-to-end checks of the binary against the bundled instance files.
//!
//! Every case in fixtures/manifest.json must reproduce its recorded exit
//! code, JSON reports must be byte-identical across repeated runs under a
//! fixed seed, and malformed invocations must fail with exit code 3.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sohs"))
        .current_dir(fixtures_dir())
        .args(args)
        .output()
        .expect("spawning the binary")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("binary was killed by a signal")
}

#[test]
fn manifest_cases_reproduce_their_exit_codes() {
    let text = fs::read_to_string(fixtures_dir().join("manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(manifest["format"], "sohs.fixtures");
    assert_eq!(manifest["version"], 1);

    let cases = manifest["cases"].as_array().unwrap();
    assert!(!cases.is_empty());
    for case in cases {
        let name = case["name"].as_str().unwrap();
        let args: Vec<&str> =
            case["args"].as_array().unwrap().iter().map(|a| a.as_str().unwrap()).collect();
        let want = case["exit"].as_i64().unwrap() as i32;
        let out = run(&args);
        let got = exit_code(&out);
        assert_eq!(
            got,
            want,
            "case {name}: expected exit {want}, got {got}\nstdout:\n{}\nstderr:\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr),
        );
    }
}

#[test]
fn json_reports_are_byte_identical_across_runs() {
    let tmp = Path::new(env!("CARGO_TARGET_TMPDIR"));
    let probes: [(&str, Vec<&str>); 3] = [
        ("sample", vec!["sample", "disk.json", "--count", "50", "--seed", "7"]),
        ("membership", vec!["check-membership", "x_plus_two.json", "-g", "interval.json"]),
        ("nnsd", vec!["nnsd", "nnsd_diag.json", "-g", "interval_i2.json"]),
    ];
    for (tag, args) in probes {
        let mut bytes = Vec::new();
        for pass in 0..2 {
            let path = tmp.join(format!("determinism_{tag}_{pass}.json"));
            let mut full = args.clone();
            let path_str = path.to_str().unwrap().to_owned();
            full.push("--json");
            full.push(&path_str);
            let out = run(&full);
            assert_eq!(exit_code(&out), 0, "{tag} pass {pass} failed");
            bytes.push(fs::read(&path).unwrap());
        }
        assert_eq!(bytes[0], bytes[1], "{tag} report changed between identical runs");
    }
}

#[test]
fn sample_reports_respect_the_seed() {
    let out_a = run(&["sample", "disk.json", "--count", "20", "--seed", "1"]);
    let out_b = run(&["sample", "disk.json", "--count", "20", "--seed", "2"]);
    assert_eq!(exit_code(&out_a), 0);
    assert_eq!(exit_code(&out_b), 0);
    assert_ne!(out_a.stdout, out_b.stdout, "different seeds should draw different points");
}

#[test]
fn malformed_invocations_exit_three() {
    let tmp = Path::new(env!("CARGO_TARGET_TMPDIR"));
    let garbage = tmp.join("garbage.json");
    fs::write(&garbage, "{ not json").unwrap();
    let garbage = garbage.to_str().unwrap();

    let cases: [Vec<&str>; 6] = [
        vec!["check-membership", "no_such_file.json"],
        vec!["check-membership", garbage],
        // a point document is not a polynomial document
        vec!["check-membership", "neg_x_point.json"],
        vec!["check-membership", "neg_x.json", "--dmax", "many"],
        vec!["frobnicate", "neg_x.json"],
        // generator side 2 does not match the scalar target
        vec!["check-membership", "neg_x.json", "-g", "interval_i2.json"],
    ];
    for args in &cases {
        let out = run(args);
        assert_eq!(
            exit_code(&out),
            3,
            "args {args:?}\nstdout:\n{}\nstderr:\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr),
        );
    }
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(exit_code(&run(&["--help"])), 0);
    assert_eq!(exit_code(&run(&["--version"])), 0);
    assert_eq!(exit_code(&run(&["check-membership", "--help"])), 0);
}

#[test]
fn product_module_output_is_loadable() {
    let tmp = Path::new(env!("CARGO_TARGET_TMPDIR"));
    let path = tmp.join("products.json");
    let path_str = path.to_str().unwrap().to_owned();
    let out = run(&["product-module", "scalar_pair.json", "--json", &path_str]);
    assert_eq!(exit_code(&out), 0);

    // The emitted document is itself a module: feed it straight back in.
    let out = run(&["check-membership", "x_plus_two.json", "-g", &path_str]);
    assert_eq!(exit_code(&out), 0);

    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["format"], "sohs.module");
    assert_eq!(doc["generators"].as_array().unwrap().len(), 3);
}
