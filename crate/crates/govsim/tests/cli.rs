use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(rel)
}

fn govsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_govsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn run_into(dir: &Path, scenario: &str, seed: &str) -> PathBuf {
    let out = dir.join(format!("{scenario}-{seed}"));
    let o = govsim(&[
        "run",
        fixture(&format!("scenarios/{scenario}.json")).to_str().unwrap(),
        "--seed",
        seed,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    out
}

/// `(offset, len)` of each block body in a chain file.
fn block_spans(bytes: &[u8]) -> Vec<(usize, usize)> {
    let mut pos = 17;
    let mut spans = Vec::new();
    while pos < bytes.len() {
        let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        spans.push((pos + 4, len));
        pos += 4 + len;
    }
    spans
}

#[test]
fn run_writes_outputs_that_verify() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_into(tmp.path(), "credit_scoring", "42");
    for f in ["chain.db", "report.json", "report.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let o = govsim(&["verify", out.join("chain.db").to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stdout));
    let stdout = text(&o.stdout);
    assert!(stdout.contains("OK chain"));
    assert!(stdout.contains("OK report consistency"));
}

#[test]
fn same_seed_gives_identical_files_and_seed_flag_changes_the_root() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_into(tmp.path(), "collusion_attack", "7");
    let b = tmp.path().join("again");
    fs::create_dir(&b).unwrap();
    let b = run_into(&b, "collusion_attack", "7");
    let c = run_into(tmp.path(), "collusion_attack", "8");
    for f in ["chain.db", "report.json", "report.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("chain.db")).unwrap(), fs::read(c.join("chain.db")).unwrap());
}

#[test]
fn a_tampered_block_is_named_by_height() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_into(tmp.path(), "credit_scoring", "42");
    let original = fs::read(out.join("chain.db")).unwrap();
    let spans = block_spans(&original);
    assert_eq!(spans.len(), 12);
    let bad = tmp.path().join("bad.db");
    for (i, (off, len)) in spans.iter().enumerate() {
        let mut bytes = original.clone();
        bytes[off + len / 2] ^= 0x01;
        fs::write(&bad, &bytes).unwrap();
        let o = govsim(&["verify", bad.to_str().unwrap()]);
        assert!(!o.status.success(), "tamper at height {} accepted", i + 1);
        assert!(
            text(&o.stderr).contains(&format!("height {}", i + 1)),
            "height {}: {}",
            i + 1,
            text(&o.stderr)
        );
    }
}

#[test]
fn truncated_and_missing_files_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_into(tmp.path(), "credit_scoring", "42");
    let bytes = fs::read(out.join("chain.db")).unwrap();
    let cut = tmp.path().join("cut.db");
    fs::write(&cut, &bytes[..bytes.len() - 10]).unwrap();
    let o = govsim(&["verify", cut.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(text(&o.stdout).contains("height 12"));
    let o = govsim(&["verify", tmp.path().join("absent.db").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(text(&o.stderr).contains("absent.db"));
}

#[test]
fn an_edited_report_fails_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_into(tmp.path(), "credit_scoring", "42");
    let mut report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    report["audits"]["pass"] = serde_json::json!(999);
    let edited = tmp.path().join("edited.json");
    fs::write(&edited, report.to_string()).unwrap();
    let o = govsim(&[
        "verify",
        out.join("chain.db").to_str().unwrap(),
        "--report",
        edited.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(text(&o.stdout).contains("/audits/pass"));
}

#[test]
fn inspect_views_are_json() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_into(tmp.path(), "regulation_shift", "11");
    let chain = out.join("chain.db");
    let chain = chain.to_str().unwrap();
    let json = |args: &[&str]| -> serde_json::Value {
        let o = govsim(args);
        assert!(o.status.success(), "{args:?}: {}", text(&o.stderr));
        serde_json::from_slice(&o.stdout).unwrap()
    };
    let audits = json(&["inspect", chain, "--audits"]);
    let did = audits[0]["did"].as_str().unwrap().to_string();
    let one = json(&["inspect", chain, "--did", &did]);
    assert_eq!(one["record"]["did"], did.as_str());
    assert!(!one["history"].as_array().unwrap().is_empty());
    let filtered = json(&["inspect", chain, "--audits", "--did", &did]);
    assert!(filtered.as_array().unwrap().iter().all(|a| a["did"] == did.as_str()));
    let proposals = json(&["inspect", chain, "--proposals"]);
    assert!(!proposals.as_array().unwrap().is_empty());
    let balances = json(&["inspect", chain, "--balances"]);
    assert!(balances["conservation_checksum"].as_str().unwrap().ends_with("OK"));
    assert!(!govsim(&["inspect", chain, "--did", "did:govsim:unknown"]).status.success());
    assert!(!govsim(&["inspect", chain]).status.success());
}

#[test]
fn convert_produces_canonical_messages() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("messages.json");
    let o = govsim(&[
        "convert",
        "--in",
        fixture("interop/legacy_compliance.csv").to_str().unwrap(),
        "--map",
        fixture("interop/compliance_v1.map.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let msgs: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(msgs.len(), 4);
    assert!(msgs.iter().all(|m| m["msg_type"] == "COMPLIANCE_REPORT" && m["checksum"].is_string()));
}

#[test]
fn convert_rejects_short_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let rows = tmp.path().join("rows.csv");
    fs::write(&rows, "system_did,epoch,rule_id,outcome,score\ndid:govsim:1,4,r,PASS\n").unwrap();
    let o = govsim(&[
        "convert",
        "--in",
        rows.to_str().unwrap(),
        "--map",
        fixture("interop/compliance_v1.map.json").to_str().unwrap(),
        "--out",
        tmp.path().join("m.json").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(text(&o.stderr).contains("expected 5 columns, found 4"));
}

#[test]
fn invalid_scenarios_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let s = tmp.path().join("s.json");
    fs::write(&s, r#"{"seed": 1, "epochs": 3, "stakeholders": [{"id": "a", "role": "KING"}]}"#).unwrap();
    let o = govsim(&["run", s.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(text(&o.stderr).contains("stakeholders[0].role"), "{}", text(&o.stderr));
}

#[test]
fn rules_flag_replaces_the_pack() {
    let tmp = tempfile::tempdir().unwrap();
    let pack = fixture("rules/standard_pack.json");
    let mut rules: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(&pack).unwrap()).unwrap();
    rules.retain(|r| r["rule_id"] != "capital_adequacy");
    let custom = tmp.path().join("pack.json");
    fs::write(&custom, serde_json::to_string(&rules).unwrap()).unwrap();
    let out = tmp.path().join("o");
    let o = govsim(&[
        "run",
        fixture("scenarios/credit_scoring.json").to_str().unwrap(),
        "--rules",
        custom.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    // Without the capital rule the epoch-5 violation goes unnoticed.
    assert_eq!(report["audits"]["fail"], 0);
}
