use std::path::{Path, PathBuf};

use irs_uav::io::{load_scenario, parse_scenario, scenario_to_json, IoError};
use irs_uav_core::scenario::{default_scenario, rate_validation_scenario, PowerParams};

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

#[test]
fn golden_files_match_built_ins() {
    assert_eq!(
        load_scenario(golden("default.json")).unwrap(),
        default_scenario()
    );
    assert_eq!(
        load_scenario(golden("rate_validation.json")).unwrap(),
        rate_validation_scenario()
    );
    assert_eq!(
        load_scenario(golden("no_irs.json")).unwrap(),
        default_scenario().without_irss()
    );
}

#[test]
fn golden_files_round_trip() {
    for name in ["default.json", "rate_validation.json", "no_irs.json"] {
        let cfg = load_scenario(golden(name)).unwrap();
        let again = parse_scenario(&scenario_to_json(&cfg), Path::new(name)).unwrap();
        assert_eq!(again, cfg, "{name}");
    }
}

#[test]
fn default_file_has_the_reference_heights() {
    let cfg = load_scenario(golden("default.json")).unwrap();
    assert_eq!(cfg.uav.altitude_m, 100.0);
    assert!(cfg
        .irss
        .iter()
        .all(|i| i.height_m == 20.0 && i.n_elements == 500));
    assert!(cfg.ues.iter().all(|u| u.height_m == 0.0));
}

fn edited(f: impl FnOnce(&mut serde_json::Value)) -> String {
    let mut v: serde_json::Value =
        serde_json::from_str(&scenario_to_json(&default_scenario())).unwrap();
    f(&mut v);
    v.to_string()
}

#[test]
fn invalid_nlos_attenuation_names_the_field() {
    let text = edited(|v| v["channel"]["nlos_attenuation"] = 1.5.into());
    let err = parse_scenario(&text, Path::new("x.json")).unwrap_err();
    assert!(matches!(err, IoError::Invalid { .. }));
    assert_eq!(err.field(), Some("channel.nlos_attenuation"));
    assert_eq!(err.kind(), "validation");
}

#[test]
fn missing_power_block_gets_defaults() {
    let text = edited(|v| {
        v.as_object_mut().unwrap().remove("power");
    });
    let cfg = parse_scenario(&text, Path::new("x.json")).unwrap();
    assert_eq!(cfg.power, PowerParams::default());
    let p = cfg.power;
    assert_eq!(
        [
            p.p0_w,
            p.pi_w,
            p.u_tip_mps,
            p.v0_mps,
            p.d0,
            p.rho,
            p.solidity,
            p.rotor_area_m2
        ],
        [79.86, 88.63, 120.0, 4.03, 0.6, 1.225, 0.05, 0.503]
    );
}

#[test]
fn unknown_and_malformed_documents_are_parse_errors() {
    let text = edited(|v| v["uav"]["wings"] = 2.into());
    let err = parse_scenario(&text, Path::new("x.json")).unwrap_err();
    assert_eq!(err.kind(), "parse");
    assert!(err.to_string().contains("wings"));
    assert_eq!(
        parse_scenario("{", Path::new("x.json")).unwrap_err().kind(),
        "parse"
    );
}

#[test]
fn missing_file_reports_its_path() {
    let err = load_scenario("/nonexistent/scenario.json").unwrap_err();
    assert_eq!(err.kind(), "io");
    assert!(err.to_string().contains("/nonexistent/scenario.json"));
}
