use hwm::config::RunConfig;
use std::path::PathBuf;

fn repo_config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

/// configs/default.toml is the paper-hyperparameter config; it must stay
/// in sync with the in-code defaults. Regenerate with
/// `cargo test -p hwm --test config_files -- --ignored`.
#[test]
fn default_config_file_matches_code_defaults() {
    let text = std::fs::read_to_string(repo_config("default.toml")).unwrap();
    let cfg = RunConfig::from_toml(&text).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.hash(), RunConfig::default().hash());
}

#[test]
fn desk_config_is_valid() {
    let text = std::fs::read_to_string(repo_config("desk.toml")).unwrap();
    let cfg = RunConfig::from_toml(&text).unwrap();
    cfg.validate().unwrap();
    // Horizon-curve horizons must be multiples of the stride.
    for &h in &cfg.bench.curve_horizons {
        assert_eq!(h % cfg.model.stride, 0);
    }
}

#[test]
#[ignore = "regenerates configs/default.toml from code defaults"]
fn regenerate_default_config() {
    std::fs::write(repo_config("default.toml"), RunConfig::default().to_toml()).unwrap();
}
