use std::sync::OnceLock;

use orbitstrata::example::{load_bundle, ExampleBundle};
use orbitstrata::group_rep::{
    close_group, fixed_space, o3_generators, orbit_invariance_check, rep_from_o3, reynolds_avg, x_vars, OrthRep,
};
use orbitstrata::matrix::{sym_eigenvalues, FieldMatrix};
use orbitstrata::numfield::FieldElem;
use orbitstrata::phase::{minimize_on_stratum, nelder_mead, phase_scan, MinimizeOptions, NelderMeadOptions, Potential, StratumMin};
use orbitstrata::poly::Poly;
use orbitstrata::rewrite::rewrite_in;
use orbitstrata::strata::StratumParam;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bundle() -> &'static ExampleBundle {
    static B: OnceLock<ExampleBundle> = OnceLock::new();
    B.get_or_init(|| load_bundle().expect("built-in bundle loads"))
}

fn param(label: &str) -> &'static StratumParam {
    match bundle().param(label) {
        Some(Ok(p)) => p,
        other => panic!("stratum {label}: {other:?}"),
    }
}

fn word(idx: &[usize]) -> FieldMatrix {
    let gens = o3_generators();
    idx.iter().fold(FieldMatrix::identity(3), |acc, &k| acc.mul(&gens[k % gens.len()]).unwrap())
}

fn p_of_x(x: &[f64]) -> Vec<f64> {
    bundle().basis.elements().iter().map(|p| p.compile().eval(x)).collect()
}

/// Degree-6 monomials in p1..p5 with weights 2, 2, 3, 3, 4.
const DEG6: [&str; 9] = ["p1^3", "p1^2*p2", "p1*p2^2", "p2^3", "p3^2", "p3*p4", "p4^2", "p1*p5", "p2*p5"];

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn lift_is_a_homomorphism(a in prop::collection::vec(0usize..16, 1..5), b in prop::collection::vec(0usize..16, 1..5)) {
        let (oa, ob) = (word(&a), word(&b));
        let lhs = rep_from_o3(&oa.mul(&ob).unwrap()).unwrap();
        let rhs = rep_from_o3(&oa).unwrap().mul(&rep_from_o3(&ob).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn fixed_vectors_are_fixed(picks in prop::collection::vec(0usize..16, 1..3)) {
        let gens: Vec<FieldMatrix> = picks.iter().map(|&k| rep_from_o3(&word(&[k])).unwrap()).collect();
        let fs = fixed_space(&gens, 8).unwrap();
        for h in &gens {
            for v in &fs.basis {
                prop_assert_eq!(&h.mul_vec(v), v);
            }
        }
    }

    #[test]
    fn reynolds_average_is_invariant(exps in prop::collection::vec(0u32..3, 8), seed in any::<u64>()) {
        let vars = x_vars();
        let text = exps.iter().enumerate().map(|(i, e)| format!("x{}^{e}", i + 1)).collect::<Vec<_>>().join("*");
        let f = Poly::parse(&text, &vars).unwrap();
        let o = |rows: [[i64; 3]; 3]| {
            FieldMatrix::from_rows(rows.iter().map(|r| r.iter().map(|&v| FieldElem::from_int(v)).collect()).collect()).unwrap()
        };
        let gens = vec![
            rep_from_o3(&o([[1, 0, 0], [0, 0, 1], [0, 1, 0]])).unwrap(),
            rep_from_o3(&o([[-1, 0, 0], [0, 1, 0], [0, 0, 1]])).unwrap(),
        ];
        let elems = close_group(&gens, 8, 64).unwrap();
        let avg = reynolds_avg(&elems, &f).unwrap();
        let rep = OrthRep::new("K", 8, gens).unwrap();
        let verdict = orbit_invariance_check(&rep, &avg, 5, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(verdict.passed());
    }

    #[test]
    fn rewrite_roundtrip(coeffs in prop::collection::vec(-5i64..=5, DEG6.len())) {
        let b = bundle();
        let text: Vec<String> = coeffs.iter().zip(DEG6).map(|(c, m)| format!("{c}*{m}")).collect();
        let g = Poly::parse(&text.join(" + "), b.basis.target_vars()).unwrap();
        let f = b.basis.expand(&g).unwrap();
        let back = rewrite_in(&f, &b.basis).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(b.basis.expand(&back).unwrap(), f);
    }

    #[test]
    fn pmatrix_is_psd_and_generic_rank_is_full(x in prop::collection::vec(-3.0f64..3.0, 8)) {
        let pm = bundle().stored_pmatrix();
        let ev = sym_eigenvalues(&pm.eval_f64(&p_of_x(&x)));
        let scale = ev.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(ev.iter().all(|v| *v >= -1e-9 * scale), "{:?}", ev);
        prop_assert_eq!(ev.iter().filter(|v| **v > 1e-9 * scale).count(), 5);
    }
}

#[test]
fn rewrite_of_a_basis_element_is_its_variable() {
    let b = bundle();
    for (k, p) in b.basis.elements().iter().enumerate() {
        let name = &b.basis.target_vars().names()[k];
        assert_eq!(rewrite_in(p, &b.basis).unwrap(), Poly::var(b.basis.target_vars(), name).unwrap());
    }
}

#[test]
fn basis_and_pmatrix_are_homogeneous() {
    let b = bundle();
    for (p, d) in b.basis.elements().iter().zip(b.basis.degrees()) {
        assert_eq!(p.weighted_degree(), Some(*d));
    }
    let pm = b.stored_pmatrix();
    let deg = pm.degrees();
    for i in 0..pm.size() {
        for j in 0..pm.size() {
            let e = pm.hat.get(i, j);
            assert!(e.is_homogeneous(), "P{}{}", i + 1, j + 1);
            if !e.is_zero() {
                assert_eq!(e.weighted_degree(), Some(deg[i] + deg[j] - 2), "P{}{}", i + 1, j + 1);
            }
        }
    }
}

#[test]
fn stored_jacobians_are_derivatives_of_phi() {
    for s in &bundle().strata {
        let p = param(&s.label);
        for (a, phi) in p.phi.iter().enumerate() {
            for (k, name) in p.lambda_vars().names().iter().enumerate() {
                assert_eq!(p.jacobian.get(a, k), &phi.diff(name).unwrap(), "{} J{}{}", s.label, a + 1, k + 1);
            }
        }
    }
}

const PROBE_POTENTIAL: &str = "p1^2 - p1 + p2^2 - p2 + 1/10*p4";

fn probe_minima() -> &'static Vec<(String, StratumMin)> {
    static M: OnceLock<Vec<(String, StratumMin)>> = OnceLock::new();
    M.get_or_init(|| {
        let b = bundle();
        let pot = Potential::parse(PROBE_POTENTIAL, b.basis.target_vars()).unwrap();
        let pm = b.stored_pmatrix();
        b.strata
            .iter()
            .map(|s| {
                let m = minimize_on_stratum(&pot, &[], param(&s.label), &pm, &b.relations, &MinimizeOptions::default()).unwrap();
                (s.label.clone(), m)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn stratum_minimum_bounds_random_probes(idx in 1usize..7, lam in prop::collection::vec(-2.0f64..2.0, 5)) {
        let (label, min) = &probe_minima()[idx];
        let p = param(label);
        let lam = &lam[..p.l()];
        prop_assume!(p.in_delta(lam, 0.0));
        let pot = Potential::parse(PROBE_POTENTIAL, bundle().basis.target_vars()).unwrap();
        let phi = p.phi_f64(lam);
        prop_assume!(phi[0] <= 100.0);
        prop_assert!(min.value <= pot.eval(&phi, &[]) + 1e-8, "{} {} > {:?}", label, min.value, lam);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn direct_search_in_x_never_beats_strata(x0 in prop::collection::vec(-2.0f64..2.0, 8)) {
        let pot = Potential::parse(PROBE_POTENTIAL, bundle().basis.target_vars()).unwrap();
        let best = probe_minima().iter().map(|(_, m)| m.value).fold(f64::INFINITY, f64::min);
        let f = |x: &[f64]| pot.eval(&p_of_x(x), &[]);
        let r = nelder_mead(&f, &x0, NelderMeadOptions::default());
        prop_assert!(r.value >= best - 1e-8, "{} < {}", r.value, best);
    }

    #[test]
    fn winner_is_scale_invariant(a in -2.0f64..2.0, num in 1i64..50, den in 1i64..50) {
        let b = bundle();
        let pot = Potential::parse("a1*p1 + p1^2 + 1/10*p3", b.basis.target_vars()).unwrap();
        let params: Vec<&StratumParam> = b.strata.iter().map(|s| param(&s.label)).collect();
        let pm = b.stored_pmatrix();
        let opts = MinimizeOptions { starts: 8, ..Default::default() };
        let winner = |p: &Potential| phase_scan(p, &params, &pm, &b.relations, &[vec![a]], &opts).unwrap()[0].winner.clone();
        prop_assert_eq!(winner(&pot), winner(&pot.scaled(&FieldElem::from_frac(num, den))));
    }
}
