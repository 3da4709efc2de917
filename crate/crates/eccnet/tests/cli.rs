use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn eccnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eccnet"))
        .args(args)
        .env_remove("ECCNET_WEIGHTS")
        .env_remove("ECCNET_WORKERS")
        .output()
        .expect("spawn eccnet")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/torch_narrow")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_passes() {
    let o = eccnet(&["verify"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 4, "{text}");
}

#[test]
fn verify_checks_bundle_reference() {
    let o = eccnet(&["verify", "--weights", s(&fixture())]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS reference"));

    let dir = tempfile::tempdir().unwrap();
    for f in ["manifest.json", "weights.bin", "reference.json"] {
        fs::copy(fixture().join(f), dir.path().join(f)).unwrap();
    }
    let mut r: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("reference.json")).unwrap()).unwrap();
    let v = &mut r["layer17"]["values"][0];
    *v = serde_json::json!(v.as_f64().unwrap() + 10.0);
    fs::write(dir.path().join("reference.json"), serde_json::to_vec(&r).unwrap()).unwrap();
    let o = eccnet(&["verify", "--weights", s(dir.path())]);
    assert!(!o.status.success());
    assert!(stdout(&o).contains("FAIL reference"));
}

#[test]
fn run_chance_is_reproducible_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "run".to_string(),
            "--experiment".into(),
            "2".into(),
            "--searcher".into(),
            "chance".into(),
            "--trials-per-condition".into(),
            "9".into(),
            "--seed".into(),
            "7".into(),
            "--out".into(),
            s(out).into(),
        ]
    };
    let run = |out: &Path, workers: &str| {
        Command::new(env!("CARGO_BIN_EXE_eccnet"))
            .args(args(out))
            .env("ECCNET_WORKERS", workers)
            .output()
            .unwrap()
    };
    assert!(run(a.path(), "1").status.success());
    let o = run(b.path(), "3");
    assert!(o.status.success());
    assert!(stdout(&o).contains("asymmetry index"));
    for f in ["results.csv", "summary.json", "scanpaths.jsonl", "rt_vs_set_size.svg"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(
        fs::read_to_string(a.path().join("results.csv"))
            .unwrap()
            .lines()
            .count(),
        19
    );
    assert!(!run(a.path(), "0").status.success());
}

#[test]
fn run_eccnet_with_bundle_and_dumps() {
    let out = tempfile::tempdir().unwrap();
    let o = eccnet(&[
        "run",
        "--experiment",
        "2",
        "--condition",
        "b",
        "--trials-per-condition",
        "3",
        "--saliency-scheme",
        "grouped",
        "--weights",
        s(&fixture()),
        "--dump-attention",
        "1",
        "--out",
        s(out.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(out.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n_trials"], 3);
    assert_eq!(summary["conditions"].as_array().unwrap().len(), 1);
    let dumped: Vec<_> = fs::read_dir(out.path().join("attention")).unwrap().collect();
    assert!(dumped.len() >= 2);
}

#[test]
fn eccnet_without_weights_is_an_error() {
    let out = tempfile::tempdir().unwrap();
    let o = eccnet(&["run", "--experiment", "1", "--out", s(out.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("weights"));
}

#[test]
fn bad_arguments_are_rejected() {
    let out = tempfile::tempdir().unwrap();
    for args in [
        vec!["run", "--experiment", "7", "--searcher", "chance"],
        vec!["run", "--experiment", "1", "--searcher", "chance", "--condition", "z"],
        vec![
            "run",
            "--experiment",
            "1",
            "--searcher",
            "chance",
            "--saliency-scheme",
            "4",
        ],
        vec!["run", "--experiment", "1", "--searcher", "oracle"],
    ] {
        let mut a = args.clone();
        a.extend(["--out", s(out.path())]);
        assert!(!eccnet(&a).status.success(), "{args:?}");
    }
}

#[test]
fn rf_profile_prints_csv() {
    let o = eccnet(&["rf-profile", "--layer", "14", "--image-px", "1200"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("distance_px,rf_px,eccentricity_dva,rf_dva"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!(rows.iter().any(|r| r[0] == 20.0 && r[1] == 6.0));
    assert!(!eccnet(&["rf-profile", "--layer", "9"]).status.success());
}

#[test]
fn gen_writes_images_and_manifest() {
    let out = tempfile::tempdir().unwrap();
    let o = eccnet(&[
        "gen",
        "--experiment",
        "5",
        "--trials-per-condition",
        "4",
        "--out",
        s(out.path()),
    ]);
    assert!(o.status.success());
    let m: serde_json::Value = serde_json::from_slice(&fs::read(out.path().join("manifest.json")).unwrap()).unwrap();
    let recs = m.as_array().unwrap();
    assert_eq!(recs.len(), 8);
    for r in recs {
        let bytes = fs::read(out.path().join(r["search_file"].as_str().unwrap())).unwrap();
        assert!(bytes.starts_with(b"P5"));
        assert_eq!(
            r["item_boxes"].as_array().unwrap().len() as u64,
            r["set_size"].as_u64().unwrap()
        );
    }
}
