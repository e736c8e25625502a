use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ergolab::maximal::{verify_certificate, CertificateRecord, MaximalCertificate};
use ergolab::scenario::Scenario;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ergolab"));
    c.env_remove("ERGOLAB_SEED");
    c
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn golden(name: &str) -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn run(scenario: &Path, out: &Path) -> Output {
    bin().arg("run").arg(scenario).arg("--out").arg(out).output().unwrap()
}

fn parse_csv(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn yeadon_identity_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("y");
    let o = run(&scenarios().join("yeadon_identity.json"), &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("maximal_summary.csv")).unwrap();
    assert_eq!(csv, golden("yeadon_identity.maximal_summary.csv"));
    let rows = parse_csv(&csv);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].last().unwrap(), "true");
    assert!(out.join("manifest.json").exists() && out.join("certificates.json").exists());
}

#[test]
fn convergence_nosquares_gap_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let o = run(&scenarios().join("convergence_nosquares.json"), &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    let gaps: Vec<f64> = parse_csv(&csv).iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(gaps.len(), 3);
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    let expected: Vec<f64> =
        parse_csv(&golden("convergence_nosquares.convergence.csv")).iter().map(|r| r[2].parse().unwrap()).collect();
    for (g, e) in gaps.iter().zip(&expected) {
        assert!((g - e).abs() <= 1e-9 * e.abs(), "{g} vs golden {e}");
    }
    assert!(out.join("convergence.svg").exists());
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"spec_version\": 1, \"id\": \"bad\",\n \"experiment\": \"nonsense\"}").unwrap();
    let out = dir.path().join("out");
    let o = run(&bad, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert!(!out.exists());
}

#[test]
fn non_central_weights_exit_3_naming_the_hypothesis() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenarios().join("weighted_maximal.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["left_weights"] = serde_json::json!({"kind": "general", "terms": 2, "seed": 9});
    let path = dir.path().join("nc.json");
    fs::write(&path, v.to_string()).unwrap();
    let out = dir.path().join("out");
    let o = run(&path, &out);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hypothesis violated"));
    assert!(!out.exists());
}

#[test]
fn emitted_certificates_revalidate_on_reload() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenarios().join("lp_maximal_mixture.json");
    let out = dir.path().join("lp");
    assert!(run(&path, &out).status.success());
    let prepared = Scenario::load(&path).unwrap().prepare(None).unwrap();
    let records: Vec<serde_json::Value> = serde_json::from_slice(&fs::read(out.join("certificates.json")).unwrap()).unwrap();
    assert_eq!(records.len(), 24);
    for mut r in records {
        let i = r["instance"].as_u64().unwrap() as usize;
        r.as_object_mut().unwrap().remove("instance");
        let rec: CertificateRecord = serde_json::from_value(r).unwrap();
        let cert = MaximalCertificate::from_record(rec).unwrap();
        let v = verify_certificate(&cert, &prepared.operator, None, &prepared.elements[i]).unwrap();
        assert!(v.valid && v.consistent, "{v:?}");
    }
}

#[test]
fn seed_env_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenarios().join("norm_table.json");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&path, &a).status.success());
    let o = bin().env("ERGOLAB_SEED", "99").arg("run").arg(&path).arg("--out").arg(&b).output().unwrap();
    assert!(o.status.success());
    let (ta, tb) = (fs::read(a.join("norm_table.csv")).unwrap(), fs::read(b.join("norm_table.csv")).unwrap());
    assert_ne!(ta, tb);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 99);
    assert!(manifest["rng_algorithm"].as_str().unwrap().contains("ChaCha8"));
}

#[test]
fn empty_suite_is_an_empty_summary() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = dir.path().join("out");
    let o = bin().arg("suite").arg(&empty).arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out.join("suite_summary.csv")).unwrap(), "scenario_id,experiment,property,status,detail\n");
}

#[test]
fn suite_records_failures_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    fs::create_dir(&src).unwrap();
    fs::copy(scenarios().join("norm_table.json"), src.join("a.json")).unwrap();
    fs::write(src.join("b.json"), "not json").unwrap();
    let out = dir.path().join("out");
    let o = bin().arg("suite").arg(&src).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let summary = fs::read_to_string(out.join("suite_summary.csv")).unwrap();
    assert!(summary.contains("norm_table,norm-table,closed-form,pass"));
    assert!(summary.contains("b,,run,fail"));
}

#[test]
fn norms_command_prints_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.json");
    // diag(3, 4) with unit weight: ‖x‖₂ = 5, Luxemburg norm for u²/2 is 5/√2
    fs::write(&path, r#"{"blocks": [[[[3, 0], [0, 0]], [[0, 0], [4, 0]]]], "dims": [2], "weights": [1.0]}"#).unwrap();
    let o = bin().arg("norms").arg(&path).args(["--phi", "p:2", "--phi", "p:1"]).output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let get = |key: &str| -> f64 {
        text.lines().find_map(|l| l.strip_prefix(&format!("{key},"))).unwrap().parse().unwrap()
    };
    assert!((get("luxemburg[p:2]") - 5.0 / 2f64.sqrt()).abs() < 1e-10);
    assert!((get("luxemburg[p:1]") - 7.0).abs() < 1e-10);
    assert_eq!(get("trace"), 7.0);
    assert_eq!(get("operator"), 4.0);
    let bad = bin().arg("norms").arg(&path).args(["--phi", "q:2"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
