use std::fs;
use std::path::Path;

use entropic_pfr::dist::Dist;
use entropic_pfr::error::Result;
use entropic_pfr::fixtures::default_demo;
use entropic_pfr::group::SubgroupBasis;
use entropic_pfr::io::SetInput;
use entropic_pfr::random::PfrRng;
use entropic_pfr::ruzsa::IneqReport;
use entropic_pfr::suites::{CheckSuite, Instance, SuiteRegistry, TriangleSuite};
use entropic_pfr_cli::{run, run_with_suites, EXIT_ERROR, EXIT_FAILED, EXIT_OK};
use serde_json::Value;

fn exec(args: &[&str]) -> (i32, String) {
    let mut out: Vec<u8> = Vec::new();
    let mut argv = vec!["entropic-pfr"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn last_json(text: &str) -> Value {
    serde_json::from_str(text.lines().last().expect("output")).unwrap()
}

fn write_set(dir: &Path, name: &str, set: &SetInput) -> String {
    let p = dir.join(name);
    fs::write(&p, set.to_text()).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn check_default_passes() {
    let (code, out) = exec(&["check", "--quiet"]);
    assert_eq!(code, EXIT_OK);
    let v = last_json(&out);
    assert_eq!(v["verdict"], "pass");
    assert_eq!(v["n"], 5);
    assert_eq!(v["trials"], 500);
    assert_eq!(out.lines().count(), 1);
}

#[test]
fn check_point_masses_single_trial() {
    let (code, out) = exec(&["check", "--trials", "1", "--point-masses"]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<Value> = out
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    for r in &lines[..lines.len() - 1] {
        assert!(
            r["lhs"].as_f64().unwrap().abs() < 1e-12 && r["rhs"].as_f64().unwrap().abs() < 1e-12
        );
    }
}

/// Triangle suite with the sum-entropy term of the distance negated.
struct NegatedTriangle;

fn negated_rdist(x: &Dist, y: &Dist) -> Result<f64> {
    Ok(-x.xor_convolve(y)?.entropy() - 0.5 * x.entropy() - 0.5 * y.entropy())
}

impl CheckSuite for NegatedTriangle {
    fn name(&self) -> &'static str {
        "triangle"
    }
    fn sample(&self, rng: &mut PfrRng, seed: u64, n: u32, pm: bool) -> Result<Instance> {
        TriangleSuite.sample(rng, seed, n, pm)
    }
    fn evaluate(&self, i: &Instance) -> Result<Vec<IneqReport>> {
        let (x, y, z) = (&i.dists[0], &i.dists[1], &i.dists[2]);
        Ok(vec![IneqReport::new(
            "triangle",
            negated_rdist(x, y)?,
            negated_rdist(x, z)? + negated_rdist(z, y)?,
        )])
    }
}

#[test]
fn corrupted_suite_exits_with_counterexample() {
    let mut reg = SuiteRegistry::default();
    reg.register(Box::new(NegatedTriangle));
    let mut out: Vec<u8> = Vec::new();
    let code = run_with_suites(
        ["entropic-pfr", "check", "--quiet", "--trials", "50"],
        reg,
        &mut out,
    );
    assert_eq!(code, EXIT_FAILED);
    let text = String::from_utf8(out).unwrap();
    let cex = last_json(&text);
    let inst: Instance = serde_json::from_value(cex["counterexample"]["instance"].clone()).unwrap();
    assert_eq!(inst.suite, "triangle");
    assert!(!NegatedTriangle.evaluate(&inst).unwrap()[0].holds);
}

#[test]
fn entropy_of_subgroup_file() {
    let dir = tempfile::tempdir().unwrap();
    let h = SubgroupBasis::span([0b0011, 0b0101, 0b1000], 4).unwrap();
    let set = SetInput::new(4, h.enumerate().unwrap()).unwrap();
    let path = write_set(dir.path(), "h.set", &set);
    let (code, out) = exec(&["entropy", &path]);
    assert_eq!(code, EXIT_OK);
    assert!((last_json(&out)["entropy"].as_f64().unwrap() - 8f64.ln()).abs() < 1e-12);

    let json_path = dir.path().join("h.json");
    fs::write(
        &json_path,
        serde_json::to_string(&set.uniform().unwrap()).unwrap(),
    )
    .unwrap();
    let (code, out) = exec(&["entropy", json_path.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!((last_json(&out)["entropy"].as_f64().unwrap() - 8f64.ln()).abs() < 1e-12);
}

#[test]
fn rdist_of_two_cosets_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let h = SubgroupBasis::span([0b0110, 0b1001], 4).unwrap();
    let elems = h.enumerate().unwrap();
    let a = SetInput::new(4, elems.iter().map(|x| x ^ 0b0001).collect()).unwrap();
    let b = SetInput::new(4, elems.iter().map(|x| x ^ 0b0100).collect()).unwrap();
    let (pa, pb) = (
        write_set(dir.path(), "a.set", &a),
        write_set(dir.path(), "b.set", &b),
    );
    let (code, out) = exec(&["rdist", &pa, &pb]);
    assert_eq!(code, EXIT_OK);
    assert!(last_json(&out)["rdist"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn cover_of_demo_two_set_is_certified() {
    let dir = tempfile::tempdir().unwrap();
    let d = default_demo(2).unwrap();
    let path = write_set(dir.path(), "a1.set", &d.a1);
    let out_path = dir.path().join("cover.json");
    let (code, _) = exec(&["cover", &path, "--output", out_path.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["certified"], true);
    assert_eq!(v["cover_verified"], true);
    assert!(v["subgroup_size"].as_u64().unwrap() <= d.a1.len() as u64);
    assert!(
        v["translates"].as_array().unwrap().len() as f64 <= v["translate_bound"].as_f64().unwrap()
    );
}

#[test]
fn demos_report_first_move() {
    for (id, expected) in [("1", "SUM_SELF"), ("2", "FIBRE_CROSS")] {
        let (code, out) = exec(&["demo", id, "--quiet"]);
        assert_eq!(code, EXIT_OK);
        let v = last_json(&out);
        assert_eq!(v["first_move"], expected);
        assert_eq!(v["converged"], true);
        assert_eq!(v["certificate_holds"], true);
    }
    let (code, out) = exec(&["demo", "3"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["initial_probes"].as_array().unwrap().len(), 5);
    assert_eq!(exec(&["demo", "4"]).0, EXIT_ERROR);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut bodies = Vec::new();
    for i in 0..2 {
        let p = dir.path().join(format!("run{i}.json"));
        let (code, _) = exec(&["demo", "2", "--seed", "7", "-o", p.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK);
        bodies.push(fs::read(&p).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    let (_, a) = exec(&["check", "--trials", "5", "--n", "3", "--seed", "11"]);
    let (_, b) = exec(&["check", "--trials", "5", "--n", "3", "--seed", "11"]);
    assert_eq!(a, b);
}

#[test]
fn descend_and_endgame_on_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = default_demo(1).unwrap();
    let path = write_set(dir.path(), "a.set", &d.a1);
    let (code, out) = exec(&["descend", &path, "--quiet", "--selection", "best-overall"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(last_json(&out)["certificate_holds"], true);

    let (code, out) = exec(&["descend", &path, &path, "--moves", "sum_self,fibre_self"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    for step in v["state"]["trace"].as_array().unwrap() {
        let kind = step["mv"]["kind"].as_str().unwrap();
        assert!(kind == "SUM_SELF" || kind == "FIBRE_SELF");
    }
    assert_eq!(exec(&["descend", &path, "--moves", "nope"]).0, EXIT_ERROR);

    let (code, out) = exec(&["endgame", &path, "--quiet"]);
    assert_eq!(code, EXIT_OK);
    let v = last_json(&out);
    assert!((v["i2"].as_f64().unwrap() - v["i3"].as_f64().unwrap()).abs() < 1e-10);
}

#[test]
fn verify_fibring_passes() {
    let (code, out) = exec(&["verify-fibring", "--trials", "50", "--quiet"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(
        last_json(&out)["suites"],
        serde_json::json!(["fibring", "cor-fibre"])
    );
}

#[test]
fn bad_inputs_exit_nonzero() {
    assert_eq!(exec(&["entropy", "/nonexistent/file.set"]).0, EXIT_ERROR);
    assert_eq!(exec(&["check", "--trials", "0"]).0, EXIT_ERROR);
    assert_eq!(exec(&["check", "--suite", "bogus"]).0, EXIT_ERROR);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.set");
    fs::write(&p, "0b01\n").unwrap();
    assert_eq!(exec(&["entropy", p.to_str().unwrap()]).0, EXIT_ERROR);
    assert_eq!(exec(&["frobnicate"]).0, EXIT_ERROR);
}

#[test]
fn thread_cap_is_honoured() {
    std::env::set_var(entropic_pfr_cli::THREADS_ENV, "1");
    let (code, _) = exec(&["check", "--trials", "3", "--n", "3", "--quiet"]);
    assert_eq!(code, EXIT_OK);
}
