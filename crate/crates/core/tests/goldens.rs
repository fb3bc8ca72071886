//! Golden files beside the bundle data. Set ORBITSTRATA_REGEN=1 to rewrite them.

use std::path::PathBuf;

use orbitstrata::example::{load_bundle, regenerate_goldens};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/o3_r8")
}

#[test]
fn goldens_match_regeneration() {
    let b = load_bundle().unwrap();
    for (rel, text) in regenerate_goldens(&b).unwrap() {
        let path = data_dir().join(rel);
        if std::env::var_os("ORBITSTRATA_REGEN").is_some() {
            std::fs::write(&path, &text).unwrap();
            continue;
        }
        let stored = std::fs::read_to_string(&path).unwrap();
        assert_eq!(stored, text, "{rel} is stale; rerun with ORBITSTRATA_REGEN=1");
    }
}
