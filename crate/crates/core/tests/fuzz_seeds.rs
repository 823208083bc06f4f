//! Replays the checked-in fuzz seeds and the documented examples through the parsers.

use std::fs;
use std::path::PathBuf;

use prodform::config::ExperimentConfig;
use prodform::liouville::DensityOperator;
use prodform::models::PolynomialSpec;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("seed-"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn config_seeds_parse_and_validate() {
    for (name, text) in seeds("config_toml") {
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again.name, cfg.name);
    }
}

#[test]
fn polynomial_seeds_parse() {
    for (name, text) in seeds("poly_spec") {
        let parsed = PolynomialSpec::from_toml_str(&text);
        assert!(parsed.is_ok(), "{name}: {:?}", parsed.err());
    }
}

#[test]
fn density_seeds() {
    for (name, text) in seeds("density_file") {
        let parsed = DensityOperator::from_json_str(&text);
        // the negative seed is there to exercise the positivity rejection
        assert_eq!(parsed.is_ok(), !name.contains("negative"), "{name}: {:?}", parsed.err());
    }
}

#[test]
fn oversized_basis_is_rejected_before_allocation() {
    let text = fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/trotter-ou.toml"))
        .unwrap()
        .replace("cutoffs = [30]", "cutoffs = [1000000]");
    let err = ExperimentConfig::from_toml_str(&text).unwrap().validate().unwrap_err();
    assert!(err.is_validation());
    assert!(err.to_string().contains("exceeds the limit"), "{err}");
}

#[test]
fn documented_examples_validate() {
    let doc = fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/config.md")).unwrap();
    let mut checked = 0;
    for block in doc.split("```toml\n").skip(1) {
        let body = block.split("```").next().unwrap();
        if !body.starts_with("name = ") {
            continue;
        }
        let cfg = ExperimentConfig::from_toml_str(body).unwrap_or_else(|e| panic!("{e}\n{body}"));
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", cfg.name));
        checked += 1;
    }
    assert_eq!(checked, 7);
}
