use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn scratch(name: &str, contents: &str) -> String {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&path, contents).unwrap();
    path.display().to_string()
}

fn nodal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nodal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn analyze_unstable_two_component_curve() {
    let out = nodal(&[
        "analyze",
        "--curve",
        &fixture("two_genus_two.curve.json"),
        "--polarization",
        &fixture("two_genus_two.unstable.polarization.json"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert_eq!(v["lambda"], serde_json::json!(["-1/2", "3/2"]));
    assert_eq!(v["p_a"], 4);
    assert_eq!(v["stability"]["stable"], false);
    assert_eq!(v["stability"]["failing_subcurve"]["delta"], "-1/2");
    assert_eq!(v["goodness"]["status"], "NotGood");
    assert_eq!(v["goodness"]["witness"]["ranks"], serde_json::json!([1, 0]));
    assert_eq!(v["goodness"]["witness"]["delta"], "-1/2");
}

#[test]
fn analyze_triangle_is_certified() {
    let out = nodal(&[
        "analyze",
        "--curve",
        &fixture("triangle.curve.json"),
        "--polarization",
        &fixture("triangle.polarization.json"),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["goodness"]["status"], "GoodCertified");
    assert_eq!(v["subcurves"].as_array().unwrap().len(), 6);
    assert_eq!(v["paths"]["base"], 3);
}

#[test]
fn goodness_and_conjecture_exit_codes() {
    let curve = fixture("banana.curve.json");
    let w = fixture("banana.uncertified.polarization.json");
    let out = nodal(&["goodness", "--curve", &curve, "--polarization", &w]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["status"], "EvidenceGood");
    assert_eq!(v["searched_rank_bound"], 4);

    let out = nodal(&[
        "conjecture",
        "--curve",
        &curve,
        "--polarization",
        &w,
        "--max-rank",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["outcome"], "CONSISTENT");

    let out = nodal(&[
        "stability",
        "--curve",
        &fixture("two_genus_two.curve.json"),
        "--polarization",
        &fixture("two_genus_two.unstable.polarization.json"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert!(v["star_conditions"]
        .as_array()
        .unwrap()
        .iter()
        .any(|s| s["satisfied"] == false));
}

#[test]
fn malformed_inputs_exit_two() {
    let curve = fixture("two_genus_two.curve.json");
    let bad = scratch("zero_denominator.json", r#"{"weights":["1/0","1"]}"#);
    let out = nodal(&["goodness", "--curve", &curve, "--polarization", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let short = scratch("short.json", r#"{"weights":["1"]}"#);
    let out = nodal(&["goodness", "--curve", &curve, "--polarization", &short]);
    assert_eq!(out.status.code(), Some(2));

    let looped = scratch(
        "loop.curve.json",
        r#"{"vertices":[{"id":1,"genus":0}],"edges":[{"id":1,"ends":[1,1]}]}"#,
    );
    assert_eq!(
        nodal(&["export-dot", "--curve", &looped]).status.code(),
        Some(2)
    );
    assert_eq!(
        nodal(&["analyze", "--curve", &curve]).status.code(),
        Some(2)
    );
    assert_eq!(nodal(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn canonical_polarization() {
    let out = nodal(&["canonical", "--curve", &fixture("banana.curve.json")]);
    assert_eq!(out.status.code(), Some(0));
    // η_i = (2g_i − 2 + δ_i)/(2p_a − 2) = (3/8, 5/8).
    assert_eq!(
        stdout_json(&out)["weights"],
        serde_json::json!(["3/8", "5/8"])
    );

    let out = nodal(&["canonical", "--curve", &fixture("triangle.curve.json")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn balanced_command() {
    let out = nodal(&[
        "balanced",
        "--curve",
        &fixture("two_elliptic.curve.json"),
        "--degrees",
        "1,1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["strict"], true);
    assert_eq!(v["bridge"]["oc_stable"], true);
    let out = nodal(&[
        "balanced",
        "--curve",
        &fixture("two_elliptic.curve.json"),
        "--degrees",
        "3,-1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn paths_and_polytope() {
    let out = nodal(&[
        "paths",
        "--curve",
        &fixture("triangle.curve.json"),
        "--base",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["marking"].as_array().unwrap().len(), 3);
    assert_eq!(v["tree_nodes"].as_array().unwrap().len(), 2);
    assert_eq!(
        nodal(&[
            "paths",
            "--curve",
            &fixture("triangle.curve.json"),
            "--base",
            "9"
        ])
        .status
        .code(),
        Some(2)
    );

    let out = nodal(&["polytope", "--curve", &fixture("two_genus_two.curve.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(
        v["nonempty_witness"]["weights"],
        serde_json::json!(["1/2", "1/2"])
    );
    let ineq = &v["inequalities"][0];
    assert_eq!(
        (ineq["lower"].as_str(), ineq["upper"].as_str()),
        (Some("1/3"), Some("2/3"))
    );
}

#[test]
fn canonical_forms_round_trip() {
    let messy = scratch(
        "messy.curve.json",
        r#"{"edges":[{"id":7,"ends":[9,4]},{"id":2,"ends":[4,9]}],"vertices":[{"genus":1,"id":9},{"id":4,"genus":2}]}"#,
    );
    let once = nodal(&["canonicalize", "--curve", &messy]);
    assert_eq!(once.status.code(), Some(0));
    let first = String::from_utf8(once.stdout).unwrap();
    let again_path = scratch("messy.canonical.json", &first);
    let twice = String::from_utf8(nodal(&["canonicalize", "--curve", &again_path]).stdout).unwrap();
    assert_eq!(first, twice);
    let exported =
        String::from_utf8(nodal(&["export-dot", "--curve", &messy, "--format", "json"]).stdout)
            .unwrap();
    assert_eq!(exported, first);

    let w = scratch("unreduced.json", r#"{"weights":["2/4"," 3/6"]}"#);
    let out = nodal(&["canonicalize", "--polarization", &w]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        stdout_json(&out)["weights"],
        serde_json::json!(["1/2", "1/2"])
    );

    let sheaf = scratch("sheaf.json", r#"{"ranks":[1,0],"stalk_free":[0]}"#);
    let out = nodal(&[
        "canonicalize",
        "--curve",
        &fixture("two_genus_two.curve.json"),
        "--sheaf",
        &sheaf,
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["ranks"], serde_json::json!([1, 0]));
    assert_eq!(
        nodal(&["canonicalize", "--sheaf", &sheaf]).status.code(),
        Some(2)
    );

    let dot = String::from_utf8(nodal(&["export-dot", "--curve", &messy]).stdout).unwrap();
    assert!(dot.starts_with("graph"));
}

#[test]
fn search_is_deterministic() {
    let args = [
        "search-conjecture",
        "--max-vertices",
        "3",
        "--max-edges",
        "3",
        "--max-genus",
        "1",
        "--denominator",
        "5",
        "--seed",
        "3",
        "--samples",
        "4",
        "--format",
        "csv",
    ];
    let a = nodal(&args);
    let b = nodal(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let csv = String::from_utf8(a.stdout).unwrap();
    assert!(csv.starts_with("index,curve_hash,weights,stable,semistable,status,certificate,witness_ranks,delta_min,outcome\n"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with("CONSISTENT")));

    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("exhaustive.csv");
    let out = nodal(&[
        "search-conjecture",
        "--max-vertices",
        "2",
        "--max-edges",
        "2",
        "--csv",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let summary = stdout_json(&out);
    assert_eq!(summary["consistent"], true);
    let written = std::fs::read_to_string(&path).unwrap();
    assert_eq!(
        written.lines().count() as u64,
        summary["instances_checked"].as_u64().unwrap() + 1
    );

    let bad = nodal(&[
        "search-conjecture",
        "--max-rank",
        "2",
        "--rank-per-component",
        "2",
    ]);
    assert_eq!(bad.status.code(), Some(2));
}
