use std::io::Write;
use std::process::{Command, Output, Stdio};

use periodic_forms_cli::{parse_document, FormDocument};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_periodic-forms");
const SCHEMA: &str = include_str!("../schema/report.schema.json");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("PERIODIC_FORMS_THREADS", "1").output().expect("binary runs")
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(BIN)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn report(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.push("--json");
    let out = run(&all);
    assert_eq!(code(&out), 0, "{args:?}: {}", stderr(&out));
    let value: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let schema: Value = serde_json::from_str(SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(&value).map(|e| format!("{e} at {}", e.instance_path())).collect();
    assert!(errors.is_empty(), "{args:?}: {errors:#?}");
    value
}

fn write_temp(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

/// A valid form outside the enumeration guard (d = 13).
fn oversized() -> tempfile::NamedTempFile {
    let d = 13;
    let q: Vec<String> = (0..d).flat_map(|r| (r..d).map(move |c| if r == c { "1" } else { "0" }.to_string())).collect();
    write_temp(&format!(r#"{{"d":{d},"m":1,"q":[{}]}}"#, q.join(",")))
}

#[test]
fn analyze_reports_fixture_invariants() {
    let out = run(&["analyze", "E8"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("λ=2, |Min|=240, δ≈0.253670"), "{}", stdout(&out));

    let r = report(&["analyze", "D4", "--full"]);
    assert_eq!(r["min_count"], 24);
    assert_eq!(r["triples"].as_array().unwrap().len(), 24);
    assert_eq!(r["truncated"], false);
    assert_eq!(report(&["analyze", "E8"])["truncated"], true);
}

#[test]
fn certify_reports_the_verdict_line() {
    let out = run(&["certify", "A2"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("m-perfect: yes (rank 3/3), m-eutactic: yes (s*>0), isolated 1-extreme: yes"));

    let out = run(&["certify", "Z:2"]);
    assert_eq!(code(&out), 0, "an uncertified verdict is still a success");
    assert!(stdout(&out).contains("m-perfect: no (rank 2/3)"));

    let r = report(&["certify", "A2", "--exact", "--verbose"]);
    assert_eq!(r["exact"]["s_star"], "1/3");
    assert_eq!(r["exact"]["coefficients"], serde_json::json!(["1/3", "1/3", "1/3"]));
    let r = report(&["certify", "Z:3"]);
    assert_eq!(r["isolated_m_extreme"], false);
    assert_eq!(r["m_perfect"]["rank"], 3);
}

#[test]
fn float_finds_the_square_lattice_witness() {
    let out = run(&["float", "Z:2", "--m-max", "2"]);
    assert_eq!(code(&out), 0, "a floating witness is still a success");
    let text = stdout(&out);
    assert!(text.contains("floating witness at index 2 (H = 1,0;0,2)"), "{text}");
    assert!(text.contains("up to index 2"));

    let r = report(&["float", "Z:2", "--m-max", "2"]);
    assert_eq!(r["witness"]["hnf"], serde_json::json!([[1, 0], [0, 2]]));
    assert_eq!(r["witness"]["directions"].as_array().unwrap().len(), 1);
    let witness: FormDocument = parse_document(&r["witness"]["form"].to_string()).unwrap();
    assert_eq!(witness.m, 2);

    let r = report(&["float", "A2", "--m-max", "3"]);
    assert_eq!(r["witness"], Value::Null);
    assert_eq!(r["strict_up_to_m_max"], true);
    assert!(stdout(&run(&["float", "A2", "--m-max", "3"])).contains("up to index 3"));
}

#[test]
fn refine_prints_documents() {
    let out = run(&["refine", "A2", "--index", "2"]);
    assert_eq!(code(&out), 0);
    let docs: Vec<FormDocument> = stdout(&out).lines().map(|l| parse_document(l).unwrap()).collect();
    assert_eq!(docs.len(), 3);
    assert!(docs.iter().all(|d| d.m == 2));

    let r = report(&["refine", "Z:2", "--hnf", "1,0;0,2"]);
    let refinements = r["refinements"].as_array().unwrap();
    assert_eq!(refinements.len(), 1);
    assert_eq!(refinements[0]["form"]["q"], serde_json::json!([1, 0, 4]));
    assert_eq!(refinements[0]["form"]["translates"], serde_json::json!([[0, "1/2"]]));
    assert_eq!(report(&["refine", "A3", "--index", "3"])["refinements"].as_array().unwrap().len(), 13);
}

#[test]
fn optimize_climbs_from_the_square_lattice() {
    let r = report(&["optimize", "Z:2", "--iters", "200", "--restarts", "2", "--seed", "3", "--trace"]);
    assert_eq!(r["improved"], true);
    assert!(r["gain"].as_f64().unwrap() > 0.1);
    assert_eq!(r["traces"].as_array().unwrap().len(), 2);
    let best: FormDocument = parse_document(&r["best_form"].to_string()).unwrap();
    assert_eq!(best.d, 2);

    let again = report(&["optimize", "Z:2", "--iters", "200", "--restarts", "2", "--seed", "3", "--trace"]);
    assert_eq!(r, again, "fixed seeds reproduce");

    let out = run(&["optimize", "A2", "--iters", "50", "--restarts", "2"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("improved: no"));
}

#[test]
fn documents_from_files_and_stdin() {
    let running = r#"{"d":2,"m":2,"q":[1,0,4],"translates":[["0","1/2"]],"name":"running"}"#;
    let file = write_temp(running);
    let out = run(&["certify", file.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("running (d=2, m=2)"));
    assert!(stdout(&out).contains("isolated 2-extreme"));

    let out = run_stdin(&["analyze", "-"], r#"{"d":2,"m":1,"q":[2,1,2]}"#);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("λ=2, |Min|=6"));
}

#[test]
fn parse_and_validation_errors_exit_2() {
    let bad_json = write_temp("{\"d\": 2,\n  \"m\": 1,\n  \"q\": [1, 0 1]}");
    let not_pd = write_temp(r#"{"d":2,"m":1,"q":[1,2,1]}"#);
    let wrong_shape = write_temp(r#"{"d":2,"m":2,"q":[1,0,1]}"#);
    for cmd in ["analyze", "certify", "float", "refine", "optimize"] {
        let mut extra = vec![];
        if cmd == "refine" {
            extra = vec!["--index", "2"];
        }
        for (file, needle) in [(&bad_json, "line 3, column 14"), (&not_pd, "positive definite"), (&wrong_shape, "translates")] {
            let mut args = vec![cmd, file.path().to_str().unwrap()];
            args.extend(&extra);
            let out = run(&args);
            assert_eq!(code(&out), 2, "{cmd}: {}", stderr(&out));
            assert!(stderr(&out).contains(needle), "{cmd}: {}", stderr(&out));
        }
        let out = run(&[cmd, "no-such-fixture"]);
        assert_eq!(code(&out), 2, "{cmd}");
    }
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["analyze"],
        vec!["bogus", "A2"],
        vec!["certify", "A2", "--unknown"],
        vec!["float", "A2", "--m-max", "x"],
        vec!["float", "A2", "--m-max", "0"],
        vec!["float", "A2", "--eps", "-1"],
        vec!["refine", "A2"],
        vec!["refine", "A2", "--hnf", "1,0;1,2"],
        vec!["refine", "A2", "--hnf", "1,0;0,2", "--index", "3"],
        vec!["refine", "A2", "--hnf", "1,0,0;0,1,0;0,0,2"],
        vec!["refine", "A2", "--index", "65"],
        vec!["optimize", "A2", "--shrink", "1.5"],
        vec!["optimize", "A2", "--iters", "0"],
    ] {
        let out = run(&args);
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
    }
    let running = write_temp(r#"{"d":2,"m":2,"q":[1,0,4],"translates":[["0","1/2"]]}"#);
    assert_eq!(code(&run(&["float", running.path().to_str().unwrap()])), 2);

    let out = Command::new(BIN).args(["analyze", "A2"]).env("PERIODIC_FORMS_THREADS", "zero").output().unwrap();
    assert_eq!(code(&out), 2);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn domain_failures_exit_1() {
    let big = oversized();
    let path = big.path().to_str().unwrap();
    for args in [vec!["analyze", path], vec!["certify", path], vec!["float", path], vec!["optimize", path]] {
        let out = run(&args);
        assert_eq!(code(&out), 1, "{args:?}: {}", stderr(&out));
        assert!(stderr(&out).contains("dimension guard"), "{}", stderr(&out));
    }
}

#[test]
fn refinement_documents_round_trip() {
    let r = report(&["refine", "A2", "--index", "4"]);
    for item in r["refinements"].as_array().unwrap() {
        let doc = parse_document(&item["form"].to_string()).unwrap();
        let again = parse_document(&doc.to_string()).unwrap();
        assert_eq!(doc, again);
        assert_eq!(doc.m, 4);
    }
}
