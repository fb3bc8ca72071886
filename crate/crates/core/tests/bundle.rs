//! The full verification report on the built-in bundle.

use orbitstrata::example::{load_bundle, verify_bundle, VerifyOptions};

#[test]
fn built_in_bundle_verifies() {
    let b = load_bundle().unwrap();
    let t = std::time::Instant::now();
    let report = verify_bundle(&b, &VerifyOptions::default());
    for i in &report.items {
        println!("{} [{}] {} :: {}", if i.passed { "ok  " } else { "FAIL" }, i.group, i.name, i.detail);
    }
    println!("{:?}", t.elapsed());
    assert!(report.passed(), "{} failures", report.failures());
}
