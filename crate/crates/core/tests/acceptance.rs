//! Acceptance criteria for the O(3) example on R^8, one test per criterion.
//! Each test writes a single PASS/FAIL line straight to stderr so the line
//! shows up even when libtest captures output.

use std::io::Write;
use std::sync::OnceLock;

use orbitstrata::example::{load_bundle, verify_bundle, CheckItem, ExampleBundle, VerifyOptions, VerifyReport};
use orbitstrata::numfield::FieldElem;
use orbitstrata::phase::{minimize_on_stratum, phase_scan, MinimizeOptions, Potential};
use orbitstrata::pmatrix::build_pmatrix;
use orbitstrata::poly::Poly;
use orbitstrata::strata::StratumParam;

fn bundle() -> &'static ExampleBundle {
    static B: OnceLock<ExampleBundle> = OnceLock::new();
    B.get_or_init(|| load_bundle().expect("built-in bundle loads"))
}

/// The full report, computed once and shared by the criteria that read it.
fn report() -> &'static VerifyReport {
    static R: OnceLock<VerifyReport> = OnceLock::new();
    R.get_or_init(|| verify_bundle(bundle(), &VerifyOptions::default()))
}

fn announce(n: u32, title: &str, failures: &[String]) {
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    let mut line = format!("{status} criterion {n:>2}: {title}");
    if !failures.is_empty() {
        line.push_str(&format!(" ({})", failures.join("; ")));
    }
    let _ = writeln!(std::io::stderr(), "{line}");
    assert!(failures.is_empty(), "{line}");
}

/// Items of `group` whose name satisfies `pick`; fails when none match.
fn items(group: &str, pick: impl Fn(&str) -> bool) -> (Vec<&'static CheckItem>, Vec<String>) {
    let found: Vec<&CheckItem> = report().items.iter().filter(|i| i.group == group && pick(&i.name)).collect();
    let mut failures: Vec<String> = found.iter().filter(|i| !i.passed).map(|i| format!("{}: {}", i.name, i.detail)).collect();
    if found.is_empty() {
        failures.push(format!("no `{group}` items selected"));
    }
    (found, failures)
}

fn param(label: &str) -> &'static StratumParam {
    match bundle().param(label) {
        Some(Ok(p)) => p,
        other => panic!("stratum {label}: {other:?}"),
    }
}

#[test]
fn criterion_01_pmatrix_entries_exact() {
    let b = bundle();
    let pm = build_pmatrix(&b.rep, b.basis.clone()).expect("P-matrix builds");
    let table: [&[&str]; 5] = [
        &["4*p1", "4*p2", "6*p3", "6*p4", "8*p5"],
        &["4*p2", "0", "4*p4", "4*p5"],
        &["108*(p1 - p2)^2", "18*(-2*p1*p2 + 2*p2^2 + p5)", "12*(p2*p3 + p1*p4 - p2*p4)"],
        &["12*(p2^2 + p5)", "4*(p2*p3 + 3*p1*p4 - p2*p4)"],
        &["4/3*(p3*p4 + p4^2 + 9*p1*p5)"],
    ];
    let mut failures = Vec::new();
    let mut count = 0;
    for (i, row) in table.iter().enumerate() {
        for (k, text) in row.iter().enumerate() {
            let j = i + k;
            let want = Poly::parse(text, pm.vars()).expect("entry parses");
            count += 1;
            if pm.hat.get(i, j) != &want || pm.hat.get(j, i) != &want {
                failures.push(format!("P{}{} = {}", i + 1, j + 1, pm.hat.get(i, j)));
            }
        }
    }
    if count != 15 {
        failures.push(format!("{count} entries compared"));
    }
    announce(1, "P-hat reproduces all 15 entries exactly", &failures);
}

#[test]
fn criterion_02_consistency_at_random_points() {
    let (found, failures) = items("gram", |_| true);
    let detail = found.first().map(|i| i.detail.clone()).unwrap_or_default();
    announce(2, &format!("P-hat(p(x)) = P(x), {detail}"), &failures);
}

#[test]
fn criterion_03_active_factor_divides() {
    let (_, failures) = items("active", |n| n.contains("divides"));
    announce(3, "det P-hat divisible by A(p)", &failures);
}

#[test]
fn criterion_04_factorization_identity() {
    let (found, mut failures) = items("strata", |n| n.ends_with("factorization"));
    if found.len() != 7 {
        failures.push(format!("{} strata checked", found.len()));
    }
    for i in &found {
        if !i.name.starts_with("S5") && !i.detail.contains("A(phi) = 0: Some(true)") {
            failures.push(format!("{}: {}", i.name, i.detail));
        }
    }
    announce(4, "P-hat(phi) = J Lambda-hat J^T and A(phi) = 0 on every stratum", &failures);
}

#[test]
fn criterion_05_lambda_hat_and_delta() {
    let (lh, mut failures) = items("strata", |n| n.ends_with("Lambda-hat"));
    let (dl, f2) = items("strata", |n| n.ends_with(" Delta") && !n.contains(" on "));
    failures.extend(f2);
    if lh.len() < 5 || dl.len() < 4 {
        failures.push(format!("{} Lambda-hat and {} Delta comparisons", lh.len(), dl.len()));
    }
    for i in &dl {
        if !i.detail.starts_with("0 disagreements in 10000") {
            failures.push(format!("{}: {}", i.name, i.detail));
        }
    }
    announce(5, "Lambda-hat exact, Delta equivalent on 10^4 samples", &failures);
}

#[test]
fn criterion_06_rank_of_jacobian() {
    let (found, mut failures) = items("strata", |n| n.contains("rank J"));
    if !found.iter().any(|i| i.name.contains("drops only at l1 = 0")) {
        failures.push("S1 slice check missing".into());
    }
    let s1 = param("S1");
    if s1.rank_j(&[0.0]) != 0 || s1.rank_j(&[1e-3]) != 1 || s1.rank_j(&[-2.0]) != 1 {
        failures.push("S1 rank J away from or on l1 = 0".into());
    }
    announce(6, "rank J = l on Delta samples, S1 drops at l1 = 0", &failures);
}

#[test]
fn criterion_07_stratum_relations() {
    let (_, mut failures) = items("strata", |n| n.ends_with("relations vanish on phi"));
    let (_, f2) = items("strata", |n| n.ends_with("inequalities on Delta"));
    failures.extend(f2);
    announce(7, "relation equalities vanish on phi, inequalities hold on Delta", &failures);
}

#[test]
fn criterion_08_roundtrip_classification() {
    let (rt, mut failures) = items("strata", |n| n.ends_with("roundtrip"));
    let (tp, f2) = items("strata", |n| n.ends_with("typical point label"));
    failures.extend(f2);
    if rt.len() != 7 || tp.len() != 7 {
        failures.push(format!("{} roundtrips, {} typical points", rt.len(), tp.len()));
    }
    announce(8, "phi(lambda) classifies back to its stratum; typical points labelled", &failures);
}

#[test]
fn criterion_09_so3_variant() {
    let (_, mut failures) = items("so3", |_| true);
    let (count, f2) = items("so3strata", |n| n == "SO(3) stratum count");
    failures.extend(f2);
    if !count.iter().all(|i| i.detail.starts_with("6 strata")) {
        failures.push("stratum count is not 6".into());
    }
    announce(9, "243 p6^2 + A = 0 and six SO(3) strata", &failures);
}

#[test]
fn criterion_10_reynolds_cross_check() {
    let (found, failures) = items("reynolds", |_| true);
    let mut orders: Vec<&str> = found.iter().filter_map(|i| i.name.split("order ").nth(1)).collect();
    orders.sort();
    let mut failures = failures;
    if orders != ["2", "4", "6"] {
        failures.push(format!("K orders {orders:?}"));
    }
    announce(10, "Reynolds averages of finite K rewrite in the lambda basis", &failures);
}

/// Minimum of `f` over the closure of Δ in a box: a grid search followed by
/// two zoomed grids around the best node.
fn grid_oracle(param: &StratumParam, f: &dyn Fn(&[f64]) -> f64, half: f64) -> f64 {
    let l = param.l();
    let delta: Vec<_> = param.delta_ineqs.iter().map(|d| d.compile()).collect();
    let admissible = |x: &[f64]| delta.iter().all(|d| d.eval(x) >= 0.0);
    let mut centre = vec![0.0; l];
    let mut radius = half;
    let mut best = f64::INFINITY;
    let nodes: usize = if l == 1 { 20_001 } else { 1_001 };
    for _ in 0..3 {
        let step = 2.0 * radius / (nodes - 1) as f64;
        let mut idx = vec![0usize; l];
        let mut arg = centre.clone();
        loop {
            let x: Vec<f64> = (0..l).map(|k| centre[k] - radius + step * idx[k] as f64).collect();
            if admissible(&x) {
                let v = f(&x);
                if v < best {
                    best = v;
                    arg = x;
                }
            }
            let mut k = 0;
            while k < l {
                idx[k] += 1;
                if idx[k] < nodes {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == l {
                break;
            }
        }
        centre = arg;
        radius = 20.0 * step;
    }
    best
}

#[test]
fn criterion_11_optimizer_against_grid_oracle() {
    let b = bundle();
    let pm = b.stored_pmatrix();
    let vars = b.basis.target_vars();
    let cases = [
        ("S2B", "p1^2 - p1 + 1/10*p3"),
        ("S1", "p1^2 - 2*p1 + 1/5*p3"),
        ("S2A", "p1^2 - p1 + p2^2 - p2 + 1/10*p4"),
    ];
    let opts = MinimizeOptions::default();
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for (label, text) in cases {
        let pot = Potential::parse(text, vars).expect("potential parses");
        let param = param(label);
        let got = minimize_on_stratum(&pot, &[], param, &pm, &b.relations, &opts).expect("minimum found");
        let f = |lam: &[f64]| pot.eval(&param.phi_f64(lam), &[]);
        let oracle = grid_oracle(param, &f, 3.0);
        let err = (got.value - oracle).abs();
        details.push(format!("{label} |{:.6} - {:.6}| = {err:.1e}", got.value, oracle));
        if err > 1e-4 {
            failures.push(format!("{label}: simplex {} vs grid {oracle}", got.value));
        }
    }

    let pot = Potential::parse("a1*p1 + p1^2 + 1/10*p3", vars).expect("potential parses");
    let params: Vec<&StratumParam> = b.strata.iter().map(|s| param(&s.label)).collect();
    let grid: Vec<Vec<f64>> = (0..10).map(|k| vec![-2.0 + 4.0 * k as f64 / 9.0]).collect();
    let scan_opts = MinimizeOptions { starts: 16, ..Default::default() };
    let winners = |p: &Potential| -> Vec<Option<String>> {
        phase_scan(p, &params, &pm, &b.relations, &grid, &scan_opts).expect("scan runs").into_iter().map(|r| r.winner).collect()
    };
    let base = winners(&pot);
    for c in [FieldElem::from_frac(1, 3), FieldElem::from_int(7)] {
        let scaled = winners(&pot.scaled(&c));
        if scaled != base {
            failures.push(format!("scaling by {c} changed winners {base:?} -> {scaled:?}"));
        }
    }
    let title = format!("simplex within 1e-4 of grid oracle ({}); winners scale-invariant", details.join(", "));
    announce(11, &title, &failures);
}
