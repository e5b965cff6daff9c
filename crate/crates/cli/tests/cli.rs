use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ipscftp_cli::model::ModelFile;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ipscftp"));
    c.env_remove("IPSCFTP_SEED");
    c
}

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn model(name: &str) -> String {
    models_dir().join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn kv(text: &str, key: &str) -> Option<String> {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .map(str::to_string)
}

fn write_temp(dir: &tempfile::TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const D0: &str = "[model]\nkind = jc_cpg\ndelta = 0\neps.A>C = 0.1\n\n[coupling]\nspec = sensitive\n\n[run]\nseed = 1\nsites = 0..0\n";

#[test]
fn validate_accepts_every_shipped_model() {
    for entry in std::fs::read_dir(models_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "model") {
            continue;
        }
        let o = run(&["validate", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}: {}", path.display(), stderr(&o));
        assert_eq!(kv(&stdout(&o), "status").as_deref(), Some("valid"));
    }
}

#[test]
fn shipped_models_round_trip() {
    for entry in std::fs::read_dir(models_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "model") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let parsed = ModelFile::parse(&text).unwrap();
        let once = parsed.serialize();
        let again = ModelFile::parse(&once).unwrap().serialize();
        assert_eq!(once, again, "{}", path.display());
    }
}

#[test]
fn negative_delta_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_temp(&dir, "neg.model", &D0.replace("delta = 0", "delta = -1"));
    let o = run(&["validate", &p]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("delta"), "{}", stderr(&o));
}

#[test]
fn malformed_section_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_temp(&dir, "bad.model", "[model\nkind = jc_cpg\n");
    let o = run(&["validate", &p]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));
}

#[test]
fn missing_file_is_an_input_error() {
    let o = run(&["validate", "/nonexistent/none.model"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn certify_jc_without_cpg() {
    let o = run(&["certify", &model("jc_cpg_d0.model")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let m: f64 = kv(&out, "metric.m").unwrap().parse().unwrap();
    assert!((m - 0.1875).abs() < 1e-12);
    assert_eq!(kv(&out, "verdict").as_deref(), Some("subcritical"));
    assert_eq!(kv(&out, "eps_sen.exact").as_deref(), Some("8/15"));
}

#[test]
fn certify_flags_supercritical_models() {
    let o = run(&["certify", &model("jc_cpg_supercritical.model")]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(kv(&out, "verdict").as_deref(), Some("supercritical"));
    assert_eq!(kv(&out, "verdict.threshold").as_deref(), Some("not certified"));
}

#[test]
fn certify_tsv_format() {
    let o = run(&["certify", &model("jc_cpg_d0.model"), "--format", "tsv"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().any(|l| l.starts_with("metric.m\t")));
}

#[test]
fn sample_is_deterministic_for_a_seed() {
    let a = run(&["sample", &model("jc_cpg_d2.model"), "--n", "20", "--seed", "9"]);
    let b = run(&["sample", &model("jc_cpg_d2.model"), "--n", "20", "--seed", "9", "--jobs", "1"]);
    let c = run(&["sample", &model("jc_cpg_d2.model"), "--n", "20", "--seed", "10"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));
    assert_ne!(stdout(&a), stdout(&c));
    assert_eq!(stdout(&a).lines().count(), 21);
}

#[test]
fn seed_comes_from_environment() {
    let a = bin()
        .args(["sample", &model("jc_cpg_d0.model"), "--n", "5"])
        .env("IPSCFTP_SEED", "77")
        .output()
        .unwrap();
    let b = run(&["sample", &model("jc_cpg_d0.model"), "--n", "5", "--seed", "77"]);
    assert_eq!(kv(&stderr(&a), "seed").as_deref(), Some("77"));
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn pure_jukes_cantor_frequencies_are_uniform() {
    let o = run(&["sample", &model("jc_pure.model"), "--n", "10000", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let err = stderr(&o);
    for x in ["A", "T", "C", "G"] {
        let f: f64 = kv(&err, &format!("metric.freq[0].{x}")).unwrap().parse().unwrap();
        assert!((0.23..=0.27).contains(&f), "{x}: {f}");
    }
}

#[test]
fn supercritical_sample_fails_the_gate() {
    let o = run(&["sample", &model("jc_cpg_supercritical.model"), "--n", "2"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("--force"));
}

#[test]
fn exhausted_budget_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(model("jc_cpg_d2.model")).unwrap() + "budget = 1\n";
    let p = write_temp(&dir, "budget.model", &text);
    let o = run(&["sample", &p, "--n", "50"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("budget"));
}

#[test]
fn simulate_prints_one_row_per_replica() {
    let o = run(&["simulate", &model("jc_cpg_d2.model"), "--n", "7", "--duration", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 8);
}

#[test]
fn unknown_suite_is_rejected() {
    let o = run(&["verify", &model("jc_cpg_d0.model"), "--suite", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flow_suite_passes() {
    let o = run(&["verify", &model("jc_cpg_d0.model"), "--suite", "flow"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("=fail"));
}

#[test]
fn bounds_tables() {
    let o = run(&["bounds", &model("jc_cpg_d0.model"), "--n", "2000", "--d-grid", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let mut tv = Vec::new();
    let mut pair = None;
    let mut header = "";
    for line in out.lines() {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 {
            continue;
        }
        if cols[0] == "t" || cols[0] == "d" {
            header = cols[0];
            continue;
        }
        match header {
            "t" => tv.push(cols[1].parse::<f64>().unwrap()),
            "d" => pair = Some(cols[1].parse::<f64>().unwrap()),
            _ => {}
        }
    }
    assert!(!tv.is_empty());
    assert!(tv.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(tv.windows(2).all(|w| w[1] <= w[0]));
    assert!((pair.unwrap() - 0.375).abs() < 1e-12);
}

#[test]
fn explicit_rule_models_sample() {
    let o = run(&["sample", &model("two_state.model"), "--n", "10", "--sites", "0..3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let first = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(first.split('\t').skip(1).all(|s| s == "up" || s == "down"));
}

#[test]
fn certify_without_perturbation_is_trivially_subcritical() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_temp(&dir, "zero.model", &D0.replace("eps.A>C = 0.1\n", ""));
    let o = run(&["certify", &p]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(kv(&out, "metric.m").as_deref(), Some("0"));
    assert_eq!(kv(&out, "verdict").as_deref(), Some("subcritical"));
}

#[test]
fn analytic_suite_passes() {
    let o = run(&["verify", &model("jc_cpg_d2.model"), "--suite", "analytic"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("=fail"));
}

#[test]
fn summaries_are_byte_identical_across_runs() {
    let a = run(&["certify", &model("jc_cpg_d2.model")]);
    let b = run(&["certify", &model("jc_cpg_d2.model")]);
    assert_eq!(stdout(&a), stdout(&b));
    assert!(kv(&stdout(&a), "digest").is_some_and(|d| d.len() == 64));
}
