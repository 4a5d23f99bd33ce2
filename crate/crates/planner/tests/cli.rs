use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use irs_uav_core::power::energy_efficient_speed;
use irs_uav_core::scenario::default_scenario;

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn cli(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irs-uav"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(Result::unwrap)
        .collect()
}

fn total_j(dir: &Path) -> f64 {
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("energy.json")).unwrap()).unwrap();
    v["energy"]["total_j"].as_f64().unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).expect("stderr is a JSON error document")
}

#[test]
fn heuristic_with_no_demand_flies_the_straight_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(
        &["optimize", "--variant", "heuristic", "--q-bits", "0"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let ve = energy_efficient_speed(&default_scenario().power);
    let mut r = csv::Reader::from_path(dir.path().join("trajectory.csv")).unwrap();
    let h = r.headers().unwrap().clone();
    assert_eq!(
        h.iter().take(8).collect::<Vec<_>>(),
        ["n", "x_m", "y_m", "x_end_m", "y_end_m", "delta_m", "T_s", "V_mps"]
    );
    for rec in r.records() {
        let rec = rec.unwrap();
        let f = |i: usize| rec[i].parse::<f64>().unwrap();
        assert!((f(1) - f(2)).abs() < 1e-9 && (f(3) - f(4)).abs() < 1e-9);
        assert!((f(7) - ve).abs() < 1e-9 * ve);
    }
    assert!(!dir.path().join("convergence.csv").exists());
}

#[test]
fn no_irs_variant_equals_general_without_irss() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let default = golden("default.json");
    let no_irs = golden("no_irs.json");
    let o = cli(
        &[
            "optimize",
            "--scenario",
            default.to_str().unwrap(),
            "--variant",
            "no-irs",
            "--q-bits",
            "1e9",
        ],
        &a,
    );
    assert!(o.status.success());
    let o = cli(
        &[
            "optimize",
            "--scenario",
            no_irs.to_str().unwrap(),
            "--variant",
            "mimu-general",
            "--q-bits",
            "1e9",
        ],
        &b,
    );
    assert!(o.status.success());
    assert_eq!(total_j(&a), total_j(&b));
    let trace = rows(&a.join("convergence.csv"));
    assert!(trace.len() >= 2);
}

#[test]
fn optimize_can_dump_the_first_subproblem() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(
        &[
            "optimize",
            "--variant",
            "mimu-matching",
            "--q-bits",
            "1e8",
            "--max-iters",
            "1",
            "--dump-cbf",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let cbf = fs::read_to_string(dir.path().join("subproblem.cbf")).unwrap();
    assert!(cbf.starts_with("VER\n3"));
}

#[test]
fn invalid_scenario_exits_nonzero_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(golden("default.json")).unwrap()).unwrap();
    v["channel"]["nlos_attenuation"] = 1.5.into();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, v.to_string()).unwrap();
    let o = cli(
        &[
            "optimize",
            "--scenario",
            bad.to_str().unwrap(),
            "--variant",
            "no-irs",
        ],
        &dir.path().join("o"),
    );
    let e = error_json(&o);
    assert_eq!(e["error"], "validation");
    assert_eq!(e["field"], "channel.nlos_attenuation");
}

#[test]
fn usage_errors_are_json_too() {
    let dir = tempfile::tempdir().unwrap();
    let e = error_json(&cli(&["optimize", "--variant", "warp-drive"], dir.path()));
    assert_eq!(e["error"], "usage");
    let e = error_json(&cli(&["sweep", "--q-bits", "1e9,0"], dir.path()));
    assert_eq!(e["error"], "usage");
    let e = error_json(&cli(&["optimize", "--variant", "sisu"], dir.path()));
    assert_eq!(e["error"], "planning");
}

#[test]
fn rate_validate_with_one_sample() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(
        &["rate-validate", "--samples", "1", "--track-points", "3"],
        dir.path(),
    );
    assert!(o.status.success());
    let path = dir.path().join("rate_validation.csv");
    let mut r = csv::Reader::from_path(&path).unwrap();
    assert_eq!(
        r.headers().unwrap(),
        vec![
            "position_index",
            "x_m",
            "y_m",
            "rate_closed_form_bps",
            "rate_mc_bps",
            "mc_stderr_bps"
        ]
    );
    let recs = rows(&path);
    assert_eq!(recs.len(), 3);
    assert!(recs.iter().all(|r| r[5].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn sweep_records_failures_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(
        &["sweep", "--q-bits", "0,1e8", "--variant", "sisu,no-irs"],
        dir.path(),
    );
    assert!(o.status.success());
    let recs = rows(&dir.path().join("sweep.csv"));
    assert_eq!(recs.len(), 4);
    for r in &recs {
        match &r[1] {
            "sisu" => assert_eq!(&r[2], "error"),
            "no-irs" => {
                assert_eq!(&r[2], "ok");
                assert!(r[3].parse::<f64>().unwrap() > 0.0);
            }
            other => panic!("unexpected variant {other}"),
        }
    }
}
