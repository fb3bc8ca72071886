//! Built-in data for O(3) acting on ℝ⁸ (a traceless symmetric tensor and a
//! vector): the integrity basis, the active factor, the stratum specs, the
//! relation tables and the SO(3) variant, plus a verifier for all of it.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group_rep::{
    close_group, fixed_space, invariant_under, o3_on_r8, orbit_invariance_check, random_rational_point,
    rep_from_o3, reynolds_avg, so3_generators, so3_on_r8, x_vars, GroupError, OrthRep,
};
use crate::matrix::{FieldMatrix, MatrixError, PolyMatrix};
use crate::numfield::FieldElem;
use crate::pmatrix::{
    build_pmatrix, check_divisibility, classify_point, verify_relation, PMatrix, PMatrixError, RelationVerdict,
    StratumRule, StratumTable, Tolerances,
};
use crate::poly::{Poly, PolyError, VarSet};
use crate::rewrite::{rewrite_in, InvariantBasis, RewriteError};
use crate::strata::{
    build_param, delta_disagreements, roundtrip_classify, sample_delta, typical_point_check,
    verify_factorization, MatrixLit, StrataError, StratumParam, StratumSpec,
};

const BUNDLE_TOML: &str = include_str!("../data/o3_r8/bundle.toml");
const EMBEDDED_STRATA: [(&str, &str); 7] = [
    ("s0.toml", include_str!("../data/o3_r8/strata/s0.toml")),
    ("s1.toml", include_str!("../data/o3_r8/strata/s1.toml")),
    ("s2a.toml", include_str!("../data/o3_r8/strata/s2a.toml")),
    ("s2b.toml", include_str!("../data/o3_r8/strata/s2b.toml")),
    ("s3.toml", include_str!("../data/o3_r8/strata/s3.toml")),
    ("s4.toml", include_str!("../data/o3_r8/strata/s4.toml")),
    ("s5.toml", include_str!("../data/o3_r8/strata/s5.toml")),
];
const GOLDEN_P6: &str = include_str!("../data/o3_r8/goldens/p6.txt");
const GOLDEN_DET_QUOTIENT: &str = include_str!("../data/o3_r8/goldens/det_quotient.txt");

/// Golden file names, relative to the bundle directory.
pub const GOLDEN_P6_FILE: &str = "goldens/p6.txt";
pub const GOLDEN_DET_QUOTIENT_FILE: &str = "goldens/det_quotient.txt";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("bundle parse error: {0}")]
    Parse(String),
    #[error("bundle is corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Strata(#[from] StrataError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    PMatrix(#[from] PMatrixError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleFile {
    name: String,
    coords: Vec<String>,
    strata: Vec<String>,
    basis: BasisSection,
    phat: PhatSection,
    active: ActiveSection,
    so3: So3Section,
    stratum_relations: Vec<RuleLit>,
    s4_substrata: Vec<RuleLit>,
    so3_isotropy: Vec<IsotropyLit>,
    adjacency: Vec<AdjacencyLit>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BasisSection {
    names: Vec<String>,
    polys: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhatSection {
    entries: Vec<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActiveSection {
    poly: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct So3Section {
    name: String,
    definition: String,
    relation: String,
    row: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleLit {
    label: String,
    rank: usize,
    #[serde(default)]
    equalities: Vec<String>,
    #[serde(default)]
    inequalities: Vec<String>,
    #[serde(default)]
    nonnegative: Vec<String>,
    #[serde(default)]
    maps_to: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GeneratorsLit {
    Named(String),
    List(Vec<MatrixLit>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IsotropyLit {
    label: String,
    generators: GeneratorsLit,
    #[serde(default)]
    continuous: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdjacencyLit {
    from: String,
    to: String,
    #[serde(default)]
    conjugator: Option<MatrixLit>,
}

/// A stratum of the S4 sub-orbit space.
#[derive(Debug, Clone)]
pub struct SubstratumRule {
    pub rule: StratumRule,
    pub nonnegative: Vec<Poly>,
    pub maps_to: Option<String>,
}

/// Claimed SO(3) isotropy group at a typical point.
#[derive(Debug, Clone)]
pub struct So3Isotropy {
    pub label: String,
    pub generators: Vec<FieldMatrix>,
    pub continuous: bool,
}

/// `from` borders `to`: `conjugator · H_to · conjugatorᵀ ⊊ H_from`.
#[derive(Debug, Clone)]
pub struct Adjacency {
    pub from: String,
    pub to: String,
    pub conjugator: FieldMatrix,
}

/// Where the data files come from.
#[derive(Debug, Clone)]
pub enum BundleSource {
    Embedded,
    Dir(PathBuf),
}

impl BundleSource {
    fn read(&self, rel: &str) -> Result<String, BundleError> {
        match self {
            BundleSource::Embedded => {
                let found = match rel {
                    "bundle.toml" => Some(BUNDLE_TOML),
                    GOLDEN_P6_FILE => Some(GOLDEN_P6),
                    GOLDEN_DET_QUOTIENT_FILE => Some(GOLDEN_DET_QUOTIENT),
                    _ => rel
                        .strip_prefix("strata/")
                        .and_then(|f| EMBEDDED_STRATA.iter().find(|(n, _)| *n == f).map(|(_, t)| *t)),
                };
                found.map(str::to_string).ok_or_else(|| BundleError::Io { path: rel.into(), msg: "not embedded".into() })
            }
            BundleSource::Dir(dir) => {
                let path = dir.join(rel);
                std::fs::read_to_string(&path)
                    .map_err(|e| BundleError::Io { path: path.display().to_string(), msg: e.to_string() })
            }
        }
    }
}

/// The loaded example.
#[derive(Debug)]
pub struct ExampleBundle {
    pub name: String,
    pub x_vars: Arc<VarSet>,
    pub rep: OrthRep,
    pub so3_rep: OrthRep,
    /// p₁…p₅.
    pub basis: Arc<InvariantBasis>,
    /// p₁…p₆, the SO(3) basis.
    pub so3_basis: Arc<InvariantBasis>,
    pub p6: Poly,
    pub p6_definition: String,
    /// Stored expansion of p₆, compared against the generated one.
    pub p6_golden: Poly,
    pub active: Poly,
    /// Stored P̂ in p₁…p₅.
    pub phat: PolyMatrix,
    /// Stored sixth row of the SO(3) P̂ in p₁…p₆.
    pub so3_row: Vec<Poly>,
    pub so3_relation: Poly,
    pub det_quotient_golden: Poly,
    pub relations: StratumTable,
    pub substrata: Vec<SubstratumRule>,
    pub strata: Vec<StratumSpec>,
    pub so3_isotropy: Vec<So3Isotropy>,
    pub adjacency: Vec<Adjacency>,
    params: OnceLock<Vec<Result<StratumParam, String>>>,
}

/// Load the built-in bundle.
pub fn load_bundle() -> Result<ExampleBundle, BundleError> {
    load_bundle_from(&BundleSource::Embedded)
}

/// Load a bundle directory laid out like the built-in one.
pub fn load_bundle_dir(dir: &Path) -> Result<ExampleBundle, BundleError> {
    load_bundle_from(&BundleSource::Dir(dir.to_path_buf()))
}

/// Parse `text`, reading a standalone `A` as the active factor.
fn parse_with_active(text: &str, active_text: &str, vars: &Arc<VarSet>) -> Result<Poly, PolyError> {
    let expanded = text.replace('A', &format!("({active_text})"));
    Poly::parse(&expanded, vars)
}

fn upper_triangle(entries: &[Vec<String>], vars: &Arc<VarSet>, q: usize) -> Result<PolyMatrix, BundleError> {
    if entries.len() != q || entries.iter().enumerate().any(|(i, r)| r.len() != q - i) {
        return Err(BundleError::Corrupt(format!("P-matrix table must be the upper triangle of a {q}x{q} matrix")));
    }
    let mut m = PolyMatrix::zeros_in(vars, q, q);
    for (i, row) in entries.iter().enumerate() {
        for (k, s) in row.iter().enumerate() {
            let j = i + k;
            let p = Poly::parse(s, vars)?;
            m.set(j, i, p.clone());
            m.set(i, j, p);
        }
    }
    Ok(m)
}

fn rule(lit: &RuleLit, vars: &Arc<VarSet>, active_text: &str) -> Result<StratumRule, PolyError> {
    Ok(StratumRule {
        label: lit.label.clone(),
        rank: lit.rank,
        equalities: lit.equalities.iter().map(|s| parse_with_active(s, active_text, vars)).collect::<Result<_, _>>()?,
        inequalities: lit.inequalities.iter().map(|s| parse_with_active(s, active_text, vars)).collect::<Result<_, _>>()?,
    })
}

/// The tensor `Q(x)` and vector `P(x)` as polynomial matrices in x.
pub fn tensor_and_vector(xv: &Arc<VarSet>) -> (PolyMatrix, PolyMatrix) {
    let x = |i: usize| Poly::var_at(xv, i);
    let c = |f: FieldElem, p: Poly| p.scale(&f);
    let r2i = FieldElem::sqrt2().inv().expect("nonzero");
    let r6 = FieldElem::sqrt6();
    let q11 = c(-(&r6 * &FieldElem::from_frac(1, 3)), x(0));
    let a = c(&r6 * &FieldElem::from_frac(1, 6), x(0));
    let b = c(r2i.clone(), x(1));
    let off = |i: usize| c(r2i.clone(), x(i));
    let q = PolyMatrix::from_rows(vec![
        vec![q11, off(2), off(3)],
        vec![off(2), &a - &b, off(4)],
        vec![off(3), off(4), &a + &b],
    ])
    .expect("3x3");
    let p = PolyMatrix::from_rows(vec![vec![x(5)], vec![x(6)], vec![x(7)]]).expect("3x1");
    (q, p)
}

/// `2√2 (P × QP)·(Q²P)`, the SO(3) invariant that changes sign under reflections.
pub fn generate_p6(xv: &Arc<VarSet>) -> Poly {
    let (q, p) = tensor_and_vector(xv);
    let qp = q.mul(&p).expect("3x3 by 3x1");
    let q2p = q.mul(&qp).expect("3x3 by 3x1");
    let v = |m: &PolyMatrix, i: usize| m.get(i, 0).clone();
    let cross = [
        &(&v(&p, 1) * &v(&qp, 2)) - &(&v(&p, 2) * &v(&qp, 1)),
        &(&v(&p, 2) * &v(&qp, 0)) - &(&v(&p, 0) * &v(&qp, 2)),
        &(&v(&p, 0) * &v(&qp, 1)) - &(&v(&p, 1) * &v(&qp, 0)),
    ];
    let mut acc = Poly::zero(xv);
    for (i, c) in cross.iter().enumerate() {
        acc = &acc + &(c * &v(&q2p, i));
    }
    acc.scale(&(FieldElem::sqrt2() * FieldElem::from_int(2)))
}

/// p₁…p₅ rebuilt from traces and contractions of Q and P.
pub fn tensor_basis(xv: &Arc<VarSet>) -> Vec<Poly> {
    let (q, p) = tensor_and_vector(xv);
    let q2 = q.mul(&q).expect("3x3");
    let q3 = q2.mul(&q).expect("3x3");
    let tr = |m: &PolyMatrix| &(&m.get(0, 0).clone() + m.get(1, 1)) + m.get(2, 2);
    let pt = p.transpose();
    let one = |m: PolyMatrix| m.get(0, 0).clone();
    let pp = one(pt.mul(&p).expect("1x1"));
    let pqp = one(pt.mul(&q).expect("1x3").mul(&p).expect("1x1"));
    let pq2p = one(pt.mul(&q2).expect("1x3").mul(&p).expect("1x1"));
    let r2 = FieldElem::sqrt2();
    vec![
        &tr(&q2) + &pp,
        pp,
        tr(&q3).scale(&(&r2 * &FieldElem::from_int(6))),
        pqp.scale(&(&r2 * &FieldElem::from_int(3))),
        pq2p.scale(&FieldElem::from_int(6)),
    ]
}

pub fn load_bundle_from(src: &BundleSource) -> Result<ExampleBundle, BundleError> {
    let f: BundleFile = toml::from_str(&src.read("bundle.toml")?).map_err(|e| BundleError::Parse(e.to_string()))?;
    let xv = x_vars();
    if f.coords.as_slice() != xv.names() {
        return Err(BundleError::Corrupt(format!("coordinates must be {}", xv.names().join(", "))));
    }
    if f.basis.names.len() != f.basis.polys.len() {
        return Err(BundleError::Corrupt("basis names and polynomials differ in length".into()));
    }
    let elements = f.basis.polys.iter().map(|s| Poly::parse(s, &xv)).collect::<Result<Vec<_>, _>>()?;
    for (n, p) in f.basis.names.iter().zip(&elements) {
        if p.is_zero() || !p.is_homogeneous() {
            return Err(BundleError::Corrupt(format!("{n} is not a nonzero homogeneous polynomial")));
        }
    }
    let basis = Arc::new(InvariantBasis::new(&f.basis.names, elements.clone())?);
    let pv = basis.target_vars().clone();
    let q = basis.len();

    let p6 = generate_p6(&xv);
    let p6_golden = Poly::parse(&src.read(GOLDEN_P6_FILE)?, &xv)?;
    let mut so3_names = f.basis.names.clone();
    so3_names.push(f.so3.name.clone());
    let mut so3_elems = elements;
    so3_elems.push(p6.clone());
    let so3_basis = Arc::new(InvariantBasis::new(&so3_names, so3_elems)?);
    let sv = so3_basis.target_vars().clone();

    let active_text = f.active.poly.clone();
    let active = Poly::parse(&active_text, &pv)?;
    let phat = upper_triangle(&f.phat.entries, &pv, q)?;
    if f.so3.row.len() != q + 1 {
        return Err(BundleError::Corrupt(format!("SO(3) row needs {} entries", q + 1)));
    }
    let so3_row = f.so3.row.iter().map(|s| Poly::parse(s, &sv)).collect::<Result<Vec<_>, _>>()?;
    let so3_relation = parse_with_active(&f.so3.relation, &active_text, &sv)?;
    let det_quotient_golden = Poly::parse(&src.read(GOLDEN_DET_QUOTIENT_FILE)?, &pv)?;

    let relations = StratumTable {
        rules: f.stratum_relations.iter().map(|r| rule(r, &pv, &active_text)).collect::<Result<_, _>>()?,
    };

    let mut strata = Vec::new();
    for name in &f.strata {
        let text = src.read(&format!("strata/{name}"))?;
        strata.push(StratumSpec::from_toml_with_basis(&text, &xv, &rep_from_o3, Some(basis.elements()))?);
    }
    let s4_lambda = strata
        .iter()
        .find(|s| s.label == "S4")
        .map(|s| s.lambda_vars.clone())
        .ok_or_else(|| BundleError::Corrupt("no S4 stratum".into()))?;
    let substrata = f
        .s4_substrata
        .iter()
        .map(|r| {
            Ok(SubstratumRule {
                rule: rule(r, &s4_lambda, &active_text)?,
                nonnegative: r.nonnegative.iter().map(|s| Poly::parse(s, &s4_lambda)).collect::<Result<_, _>>()?,
                maps_to: r.maps_to.clone(),
            })
        })
        .collect::<Result<Vec<_>, PolyError>>()?;

    let mut so3_isotropy = Vec::new();
    for iso in &f.so3_isotropy {
        let generators = match &iso.generators {
            GeneratorsLit::Named(n) if n == "so3" => so3_generators(),
            GeneratorsLit::Named(n) => return Err(BundleError::Corrupt(format!("unknown group name {n}"))),
            GeneratorsLit::List(ms) => ms.iter().map(MatrixLit::value).collect::<Result<_, _>>()?,
        };
        so3_isotropy.push(So3Isotropy { label: iso.label.clone(), generators, continuous: iso.continuous });
    }
    let adjacency = f
        .adjacency
        .iter()
        .map(|a| {
            Ok(Adjacency {
                from: a.from.clone(),
                to: a.to.clone(),
                conjugator: match &a.conjugator {
                    Some(m) => m.value()?,
                    None => FieldMatrix::identity(3),
                },
            })
        })
        .collect::<Result<Vec<_>, StrataError>>()?;

    let bundle = ExampleBundle {
        name: f.name,
        x_vars: xv,
        rep: o3_on_r8(),
        so3_rep: so3_on_r8(),
        basis,
        so3_basis,
        p6,
        p6_definition: f.so3.definition,
        p6_golden,
        active,
        phat,
        so3_row,
        so3_relation,
        det_quotient_golden,
        relations,
        substrata,
        strata,
        so3_isotropy,
        adjacency,
        params: OnceLock::new(),
    };
    bundle.sanity_check()?;
    Ok(bundle)
}

impl ExampleBundle {
    /// Cheap load-time checks: labels resolve and the basis is invariant at
    /// a few random points.
    fn sanity_check(&self) -> Result<(), BundleError> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (name, p) in self.basis.target_vars().names().iter().zip(self.basis.elements()) {
            if !orbit_invariance_check(&self.rep, p, 10, &mut rng)?.passed() {
                return Err(BundleError::Corrupt(format!("{name} is not O(3)-invariant")));
            }
        }
        if !orbit_invariance_check(&self.so3_rep, &self.p6, 10, &mut rng)?.passed() {
            return Err(BundleError::Corrupt("p6 is not SO(3)-invariant".into()));
        }
        let labels: BTreeSet<&str> = self.strata.iter().map(|s| s.label.as_str()).collect();
        let known = |l: &str| labels.contains(l);
        for r in &self.relations.rules {
            if !known(&r.label) {
                return Err(BundleError::Corrupt(format!("relations refer to unknown stratum {}", r.label)));
            }
        }
        for a in &self.adjacency {
            if !known(&a.from) || !known(&a.to) {
                return Err(BundleError::Corrupt(format!("adjacency {} -> {} names an unknown stratum", a.from, a.to)));
            }
        }
        for s in &self.so3_isotropy {
            if !known(&s.label) {
                return Err(BundleError::Corrupt(format!("SO(3) isotropy for unknown stratum {}", s.label)));
            }
        }
        Ok(())
    }

    pub fn stratum(&self, label: &str) -> Option<&StratumSpec> {
        self.strata.iter().find(|s| s.label == label)
    }

    /// P̂ as stored; it is checked against the recomputed one by
    /// [`verify_bundle`].
    pub fn stored_pmatrix(&self) -> PMatrix {
        PMatrix::new(self.basis.clone(), self.phat.clone())
    }

    /// Parametrizations of every stratum, built once.
    pub fn params(&self) -> &[Result<StratumParam, String>] {
        self.params.get_or_init(|| {
            self.strata.par_iter().map(|s| build_param(s, &self.basis).map_err(|e| e.to_string())).collect()
        })
    }

    pub fn param(&self, label: &str) -> Option<&Result<StratumParam, String>> {
        self.strata.iter().position(|s| s.label == label).map(|i| &self.params()[i])
    }

    /// The relation ideal of the orbit space (empty for O(3): the basis is free).
    pub fn relations_ideal(&self) -> Vec<Poly> {
        Vec::new()
    }

    /// SO(3) strata table for six-coordinate points: the O(3) rules of rank
    /// below the maximum with p₆ = 0 added, and one rule for the rest.
    pub fn so3_table(&self) -> Result<StratumTable, PolyError> {
        let sv = self.so3_basis.target_vars();
        let p6 = Poly::var_at(sv, sv.len() - 1);
        let q = self.basis.len();
        let mut rules = Vec::new();
        for r in self.relations.rules.iter().filter(|r| r.rank + 1 < q) {
            let lift = |p: &Poly| p.embed(sv);
            let mut equalities = r.equalities.iter().map(lift).collect::<Result<Vec<_>, _>>()?;
            equalities.push(p6.clone());
            rules.push(StratumRule {
                label: r.label.clone(),
                rank: r.rank,
                equalities,
                inequalities: r.inequalities.iter().map(lift).collect::<Result<_, _>>()?,
            });
        }
        rules.push(StratumRule { label: "principal".into(), rank: q, equalities: vec![], inequalities: vec![] });
        Ok(StratumTable { rules })
    }
}

/// One line of the verification report.
#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub group: String,
    pub name: String,
    /// What identity of the example this item establishes.
    pub anchor: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub items: Vec<CheckItem>,
}

impl VerifyReport {
    pub fn failures(&self) -> usize {
        self.items.iter().filter(|i| !i.passed).count()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }

    pub fn find(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.name == name)
    }

    fn push(&mut self, group: &str, name: impl Into<String>, anchor: &str, passed: bool, detail: impl Into<String>) {
        self.items.push(CheckItem {
            group: group.into(),
            name: name.into(),
            anchor: anchor.into(),
            passed,
            detail: detail.into(),
        });
    }
}

/// Check groups, in run order.
pub const VERIFY_GROUPS: [&str; 11] =
    ["basis", "phat", "gram", "active", "strata", "substrata", "so3", "so3row", "so3strata", "adjacency", "reynolds"];

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Restrict to these groups; empty runs everything.
    pub only: Vec<String>,
    pub seed: u64,
    /// Δ samples per stratum.
    pub samples: usize,
    /// Random points for the P̂(p(x)) = P(x) check.
    pub gram_points: usize,
    /// Box samples for comparing Δ with its closed form.
    pub delta_points: usize,
    pub tol: Tolerances,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { only: vec![], seed: 1, samples: 1000, gram_points: 1000, delta_points: 10_000, tol: Tolerances::default() }
    }
}

const A_PHAT: &str = "P-matrix table";
const A_BASIS: &str = "integrity basis";
const A_GRAM: &str = "P-hat(p(x)) = P(x)";
const A_ACTIVE: &str = "active factor A(p)";
const A_FACT: &str = "P-hat(phi) = J Lambda-hat J^T";
const A_LHAT: &str = "Lambda-hat of the stratum";
const A_PHI: &str = "phi of the stratum";
const A_DELTA: &str = "Delta of the stratum";
const A_RANK: &str = "rank J = l on Delta";
const A_REL: &str = "stratum relations table";
const A_SUB: &str = "isotropy strata of V/K for S4";
const A_SO3: &str = "SO(3) relation 243 p6^2 + A = 0";
const A_SO3ROW: &str = "SO(3) P-matrix row";
const A_SO3STRATA: &str = "SO(3) isotropy table";
const A_ADJ: &str = "bordering strata diagram";
const A_REY: &str = "finite K invariants";

fn entry_name(i: usize, j: usize) -> String {
    format!("P{}{}", i + 1, j + 1)
}

/// Run every check on the bundle. Failures are report entries, not errors.
pub fn verify_bundle(b: &ExampleBundle, opts: &VerifyOptions) -> VerifyReport {
    let mut rep = VerifyReport::default();
    let wants = |g: &str| opts.only.is_empty() || opts.only.iter().any(|o| o == g);
    let computed: OnceLock<Result<PMatrix, String>> = OnceLock::new();
    let pm = || computed.get_or_init(|| build_pmatrix(&b.rep, b.basis.clone()).map_err(|e| e.to_string()));
    for (gi, g) in VERIFY_GROUPS.iter().enumerate() {
        if !wants(g) {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(1_000_003).wrapping_add(gi as u64));
        match *g {
            "basis" => check_basis(b, &mut rep),
            "phat" => check_phat(b, pm(), &mut rep),
            "gram" => check_gram(b, opts.gram_points, &mut rng, &mut rep),
            "active" => check_active(b, pm(), &mut rep),
            "strata" => check_strata(b, opts, &mut rng, &mut rep),
            "substrata" => check_substrata(b, opts, &mut rng, &mut rep),
            "so3" => check_so3_relation(b, &mut rng, &mut rep),
            "so3row" => check_so3_row(b, &mut rep),
            "so3strata" => check_so3_strata(b, &mut rep),
            "adjacency" => check_adjacency(b, &mut rep),
            "reynolds" => check_reynolds(b, &mut rep),
            _ => unreachable!(),
        }
    }
    for o in &opts.only {
        if !VERIFY_GROUPS.contains(&o.as_str()) {
            rep.push("options", format!("only {o}"), "check group", false, format!("unknown group; known: {}", VERIFY_GROUPS.join(", ")));
        }
    }
    rep
}

fn check_basis(b: &ExampleBundle, rep: &mut VerifyReport) {
    let g = "basis";
    let degs = b.basis.degrees().to_vec();
    rep.push(g, "degrees", A_BASIS, degs == [2, 2, 3, 3, 4], format!("{degs:?}"));
    let names = b.basis.target_vars().names();
    for ((n, p), t) in names.iter().zip(b.basis.elements()).zip(tensor_basis(&b.x_vars)) {
        rep.push(g, format!("{n} from Q and P"), A_BASIS, *p == t, if *p == t { "equal".into() } else { format!("difference {}", p - &t) });
    }
    for (n, p) in names.iter().zip(b.basis.elements()) {
        let ok = invariant_under(b.rep.generators(), p);
        rep.push(g, format!("{n} O(3)-invariant"), A_BASIS, ok == Ok(true), format!("{ok:?}"));
    }
    let so3 = invariant_under(b.so3_rep.generators(), &b.p6);
    let refl = rep_from_o3(&FieldMatrix::diag(&[FieldElem::from_int(-1), FieldElem::one(), FieldElem::one()]))
        .and_then(|r| crate::group_rep::act_on_poly(&r, &b.p6));
    let odd = matches!(&refl, Ok(q) if *q == -&b.p6);
    rep.push(g, "p6 SO(3)-invariant", A_SO3, so3 == Ok(true), format!("{so3:?}"));
    rep.push(g, "p6 odd under reflections", A_SO3, odd, "p6(Rx) = -p6(x) for R = diag(-1,1,1)");
    rep.push(g, "p6 degree", A_SO3, b.p6.weighted_degree() == Some(6), format!("{:?}", b.p6.weighted_degree()));
    rep.push(g, "p6 golden", A_SO3, b.p6 == b.p6_golden, format!("{} terms generated from {}", b.p6.num_terms(), b.p6_definition));
}

fn check_phat(b: &ExampleBundle, pm: &Result<PMatrix, String>, rep: &mut VerifyReport) {
    let g = "phat";
    let pm = match pm {
        Ok(pm) => pm,
        Err(e) => return rep.push(g, "build P-hat", A_PHAT, false, e.clone()),
    };
    let q = b.basis.len();
    for i in 0..q {
        for j in i..q {
            let (c, s) = (pm.hat.get(i, j), b.phat.get(i, j));
            let detail = if c == s { format!("{c}") } else { format!("computed {c}, stored {s}") };
            rep.push(g, entry_name(i, j), A_PHAT, c == s, detail);
        }
    }
    let pv = b.basis.target_vars();
    let ok = (0..q).all(|a| {
        *pm.hat.get(0, a) == Poly::var_at(pv, a).scale(&FieldElem::from_int(2 * b.basis.degrees()[a] as i64))
    });
    rep.push(g, "P1a = 2 d_a p_a", A_PHAT, ok, "first row from Euler's identity");
}

fn check_gram(b: &ExampleBundle, points: usize, rng: &mut ChaCha8Rng, rep: &mut VerifyReport) {
    let grads: Vec<Vec<Poly>> = b.basis.elements().iter().map(Poly::gradient).collect();
    let xs: Vec<Vec<FieldElem>> = (0..points).map(|_| random_rational_point(rng, 8, 3, 7)).collect();
    let q = b.basis.len();
    let bad = xs.par_iter().find_map_first(|x| {
        let p: Vec<FieldElem> = b.basis.elements().iter().map(|f| f.eval_at(x).expect("arity")).collect();
        let gx: Vec<Vec<FieldElem>> =
            grads.iter().map(|gr| gr.iter().map(|d| d.eval_at(x).expect("arity")).collect()).collect();
        for i in 0..q {
            for j in i..q {
                let mut direct = FieldElem::zero();
                for (a, c) in gx[i].iter().zip(&gx[j]) {
                    direct += &(a * c);
                }
                if b.phat.get(i, j).eval_at(&p).expect("arity") != direct {
                    return Some((entry_name(i, j), x.clone()));
                }
            }
        }
        None
    });
    let detail = match &bad {
        None => format!("{points} exact rational points in [-3,3]^8"),
        Some((e, x)) => format!("{e} differs at x = ({})", x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")),
    };
    rep.push("gram", "P-hat(p(x)) = P(x)", A_GRAM, bad.is_none(), detail);
}

/// `det P̂ / A(p)`; errors when the division leaves a remainder.
pub fn det_quotient(pm: &PMatrix, active: &Poly) -> Result<Poly, BundleError> {
    let det = pm.hat.det()?;
    Ok(check_divisibility(&det, active)?)
}

fn check_active(b: &ExampleBundle, pm: &Result<PMatrix, String>, rep: &mut VerifyReport) {
    let g = "active";
    let pm = match pm {
        Ok(pm) => pm,
        Err(e) => return rep.push(g, "build P-hat", A_ACTIVE, false, e.clone()),
    };
    match det_quotient(pm, &b.active) {
        Ok(quot) => {
            rep.push(g, "A divides det P-hat", A_ACTIVE, true, "zero remainder");
            let same = quot == b.det_quotient_golden;
            rep.push(g, "det P-hat / A golden", A_ACTIVE, same, format!("{quot}"));
        }
        Err(e) => rep.push(g, "A divides det P-hat", A_ACTIVE, false, e.to_string()),
    }
    let deg = b.active.weighted_degree();
    rep.push(g, "A degree", A_ACTIVE, deg == Some(12), format!("{deg:?}"));
}

fn fmt_point(v: &[f64]) -> String {
    format!("({})", v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", "))
}

fn check_strata(b: &ExampleBundle, opts: &VerifyOptions, rng: &mut ChaCha8Rng, rep: &mut VerifyReport) {
    let g = "strata";
    let pm = b.stored_pmatrix();
    let q = b.basis.len();
    for (spec, param) in b.strata.iter().zip(b.params()) {
        let l = &spec.label;
        let v = spec.validate();
        rep.push(g, format!("{l} H, V, K"), A_FACT, v.is_ok(), match &v {
            Ok(()) => format!("dim V = {}, {} H generators", spec.nu(), spec.h_gens.len()),
            Err(e) => e.to_string(),
        });
        if let Some(m) = spec.k_matches_preimages() {
            rep.push(g, format!("{l} K from its preimages"), A_FACT, m, "each K generator is a restricted element of O(3)");
        }
        if let Ok(Some(k)) = spec.k_elements() {
            rep.push(g, format!("{l} K order"), A_FACT, true, format!("{}", k.len()));
        }
        let param = match param {
            Ok(p) => p,
            Err(e) => {
                rep.push(g, format!("{l} parametrization"), A_FACT, false, e.clone());
                continue;
            }
        };
        rep.push(g, format!("{l} dimension"), A_FACT, param.l() == spec.expected_dim, format!("l = {}", param.l()));
        if let Some(exp) = &spec.expected.lambda_hat {
            rep.push(g, format!("{l} Lambda-hat"), A_LHAT, *exp == param.lambda_hat, format!("{}", param.lambda_hat));
        }
        if let Some(exp) = &spec.expected.phi {
            let same = *exp == param.phi;
            let shown: Vec<String> = param.phi.iter().map(|p| p.to_string()).collect();
            rep.push(g, format!("{l} phi"), A_PHI, same, shown.join("; "));
        }
        if let Some(exp) = &spec.expected.delta {
            let bad = delta_disagreements(param, exp, opts.delta_points, -2.0, 2.0, rng);
            let shown: Vec<String> = param.delta_ineqs.iter().map(|p| format!("{p} > 0")).collect();
            rep.push(
                g,
                format!("{l} Delta"),
                A_DELTA,
                bad.is_empty(),
                format!("{} disagreements in {} box samples; {}", bad.len(), opts.delta_points, shown.join(", ")),
            );
        }
        let active = (param.l() < q).then_some(&b.active);
        match verify_factorization(param, &pm, active) {
            Ok(f) => {
                let detail = match &f.first_mismatch {
                    None => format!("identity holds; A(phi) = 0: {:?}", f.active_vanishes),
                    Some((i, j, r)) => format!("entry ({i},{j}) residual {r}"),
                };
                rep.push(g, format!("{l} factorization"), A_FACT, f.passed(), detail);
            }
            Err(e) => rep.push(g, format!("{l} factorization"), A_FACT, false, e.to_string()),
        }
        let rule = b.relations.rules.iter().find(|r| r.label == *l);
        if let Some(rule) = rule {
            let lv = param.lambda_vars().clone();
            let bad: Vec<String> = rule
                .equalities
                .iter()
                .filter(|e| !e.subst(&param.phi, &lv).map(|r| r.is_zero()).unwrap_or(false))
                .map(|e| e.to_string())
                .collect();
            rep.push(g, format!("{l} relations vanish on phi"), A_REL, bad.is_empty(), if bad.is_empty() {
                format!("{} equalities", rule.equalities.len())
            } else {
                format!("nonzero: {}", bad.join("; "))
            });
        }
        if param.l() == 0 {
            let v = classify_point(&pm, &vec![0.0; q], &b.relations_ideal(), &b.relations, opts.tol);
            let ok = matches!(&v, Ok(v) if v.stratum_label.as_deref() == Some(l.as_str()));
            rep.push(g, format!("{l} roundtrip"), A_REL, ok, format!("{v:?}"));
        } else {
            match sample_delta(param, opts.samples, -2.0, 2.0, rng) {
                Ok(s) => {
                    check_samples(b, spec, param, &pm, &s.accepted, &s.rank_deficient, opts, rep);
                }
                Err(e) => rep.push(g, format!("{l} Delta samples"), A_RANK, false, e.to_string()),
            }
        }
        match typical_point_check(spec, param, &b.basis) {
            Ok((phi_ok, closure)) => rep.push(
                g,
                format!("{l} typical point"),
                A_FACT,
                phi_ok && closure,
                format!("phi(lambda(x_t)) = p(x_t): {phi_ok}; lambda(x_t) in closure of Delta: {closure}"),
            ),
            Err(e) => rep.push(g, format!("{l} typical point"), A_FACT, false, e.to_string()),
        }
        let pt: Vec<f64> = b.basis.elements().iter().map(|f| f.eval_f64(&spec.typical_point.iter().map(FieldElem::to_f64).collect::<Vec<_>>())).collect();
        let v = classify_point(&pm, &pt, &b.relations_ideal(), &b.relations, opts.tol);
        let ok = matches!(&v, Ok(v) if v.stratum_label.as_deref() == Some(l.as_str()));
        rep.push(g, format!("{l} typical point label"), A_REL, ok, match &v {
            Ok(v) => format!("p(x_t) = {} -> {:?}, rank {}", fmt_point(&pt), v.stratum_label, v.rank),
            Err(e) => e.to_string(),
        });
    }
    // rank of J drops exactly on λ1 = 0 for S1
    if let Some(Ok(param)) = b.param("S1") {
        let lv = param.lambda_vars().clone();
        let l1 = Poly::var_at(&lv, 0);
        let quot: Result<Vec<Poly>, _> = (0..param.jacobian.nrows()).map(|a| param.jacobian.get(a, 0).div_exact(&l1)).collect();
        let ok = match &quot {
            Ok(qs) => qs.iter().any(|p| p.as_constant().map(|c| !c.is_zero()).unwrap_or(false)),
            Err(_) => false,
        };
        rep.push(g, "S1 rank J drops only at l1 = 0", A_RANK, ok, "J = l1 * (constant nonzero column + higher terms)");
    }
}

#[allow(clippy::too_many_arguments)]
fn check_samples(
    b: &ExampleBundle,
    spec: &StratumSpec,
    param: &StratumParam,
    pm: &PMatrix,
    samples: &[Vec<f64>],
    rank_deficient: &[Vec<f64>],
    opts: &VerifyOptions,
    rep: &mut VerifyReport,
) {
    let g = "strata";
    let l = &spec.label;
    rep.push(
        g,
        format!("{l} rank J"),
        A_RANK,
        rank_deficient.is_empty(),
        match rank_deficient.first() {
            None => format!("rank {} at {} Delta samples", param.l(), samples.len()),
            Some(p) => format!("{} deficient, e.g. at {}", rank_deficient.len(), fmt_point(p)),
        },
    );
    if let Some(rule) = b.relations.rules.iter().find(|r| r.label == *l) {
        let ineqs: Vec<_> = rule.inequalities.iter().map(Poly::compile).collect();
        let bad = samples.iter().find(|lam| {
            let p = param.phi_f64(lam);
            ineqs.iter().any(|f| f.eval(&p) <= 0.0)
        });
        rep.push(g, format!("{l} inequalities on Delta"), A_REL, bad.is_none(), match bad {
            None => format!("{} inequalities at {} samples", ineqs.len(), samples.len()),
            Some(p) => format!("violated at lambda = {}", fmt_point(p)),
        });
    }
    match roundtrip_classify(param, pm, &b.relations, &b.relations_ideal(), samples, opts.tol) {
        Ok(v) => rep.push(g, format!("{l} roundtrip"), A_REL, v.passed(), match &v.first_mismatch {
            None => format!("{} samples classified as {l}", v.checked),
            Some((lam, verdict)) => format!(
                "lambda = {} -> {:?}, rank {}, psd {}",
                fmt_point(lam),
                verdict.stratum_label,
                verdict.rank,
                verdict.psd
            ),
        }),
        Err(e) => rep.push(g, format!("{l} roundtrip"), A_REL, false, e.to_string()),
    }
}

fn check_substrata(b: &ExampleBundle, opts: &VerifyOptions, rng: &mut ChaCha8Rng, rep: &mut VerifyReport) {
    let g = "substrata";
    let (spec, param) = match (b.stratum("S4"), b.param("S4")) {
        (Some(s), Some(Ok(p))) => (s, p),
        _ => return rep.push(g, "S4 parametrization", A_SUB, false, "unavailable"),
    };
    let nu = spec.nu();
    let pm = b.stored_pmatrix();
    let mut hits = vec![0usize; b.substrata.len()];
    let mut failures: Vec<String> = Vec::new();
    let min_rank = b.substrata.iter().map(|r| r.rule.rank).min().unwrap_or(0);
    // Sample every coordinate subspace of V that keeps the first coordinate.
    for pattern in 0u32..(1 << (nu - 1)) {
        for _ in 0..(opts.samples / 64).max(4) {
            let mut v = random_rational_point(rng, nu, 3, 5);
            if v[0].is_zero() {
                v[0] = FieldElem::one();
            }
            for (k, vk) in v.iter_mut().enumerate().skip(1) {
                if pattern & (1 << (k - 1)) != 0 {
                    *vk = FieldElem::zero();
                }
            }
            let lam: Vec<FieldElem> = spec.lambda_polys.iter().map(|f| f.eval_at(&v).expect("arity")).collect();
            let rank = param.lambda_hat.eval_exact(&lam).map(|m| m.rank()).unwrap_or(usize::MAX);
            let sat = |p: &Poly, f: fn(i32) -> bool| f(p.eval_at(&lam).expect("arity").signum());
            let found = b.substrata.iter().position(|r| {
                r.rule.equalities.iter().all(|e| sat(e, |s| s == 0))
                    && r.rule.inequalities.iter().all(|e| sat(e, |s| s > 0))
                    && r.nonnegative.iter().all(|e| sat(e, |s| s >= 0))
            });
            match found {
                Some(i) => {
                    hits[i] += 1;
                    let r = &b.substrata[i];
                    if rank != r.rule.rank {
                        failures.push(format!("{}: rank {rank} at lambda {:?}", r.rule.label, lam.iter().map(|x| x.to_string()).collect::<Vec<_>>()));
                    }
                    if let Some(target) = &r.maps_to {
                        let lf: Vec<f64> = lam.iter().map(FieldElem::to_f64).collect();
                        let p = param.phi_f64(&lf);
                        let lab = classify_point(&pm, &p, &[], &b.relations, opts.tol).ok().and_then(|v| v.stratum_label);
                        if lab.as_deref() != Some(target.as_str()) {
                            failures.push(format!("{} maps to {lab:?}, expected {target}", r.rule.label));
                        }
                    }
                }
                None if rank >= min_rank => failures.push(format!("rank {rank} point matches no rule")),
                None => {}
            }
        }
    }
    for (r, h) in b.substrata.iter().zip(&hits) {
        rep.push(g, format!("{} hit", r.rule.label), A_SUB, *h > 0, format!("{h} sample points"));
    }
    rep.push(g, "ranks and images", A_SUB, failures.is_empty(), match failures.first() {
        None => "every sampled point has the rank of its rule and lands in the listed stratum".to_string(),
        Some(f) => format!("{} failures, first: {f}", failures.len()),
    });
}

fn check_so3_relation(b: &ExampleBundle, rng: &mut ChaCha8Rng, rep: &mut VerifyReport) {
    let v = verify_relation(&b.so3_relation, &b.so3_basis, 50, rng);
    let (ok, detail) = match &v {
        Ok(RelationVerdict::Holds { trials, symbolic }) => (*symbolic, format!("{trials} exact points; symbolic: {symbolic}")),
        Ok(RelationVerdict::Fails { x, value }) => {
            (false, format!("value {value} at x = ({})", x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")))
        }
        Err(e) => (false, e.to_string()),
    };
    rep.push("so3", "243 p6^2 + A = 0", A_SO3, ok, detail);
}

fn check_so3_row(b: &ExampleBundle, rep: &mut VerifyReport) {
    let g = "so3row";
    let pm = match build_pmatrix(&b.so3_rep, b.so3_basis.clone()) {
        Ok(pm) => pm,
        Err(e) => return rep.push(g, "build SO(3) P-hat", A_SO3ROW, false, e.to_string()),
    };
    let q = b.basis.len();
    for j in 0..=q {
        let c = pm.hat.get(q, j);
        let s = &b.so3_row[j];
        rep.push(g, entry_name(j, q), A_SO3ROW, c == s, if c == s { format!("{c}") } else { format!("computed {c}, stored {s}") });
    }
    let sv = b.so3_basis.target_vars();
    let block_ok = (0..q).all(|i| (0..q).all(|j| b.phat.get(i, j).embed(sv).map(|p| p == *pm.hat.get(i, j)).unwrap_or(false)));
    rep.push(g, "O(3) block", A_SO3ROW, block_ok, "first five rows agree with the O(3) P-hat");
}

fn is_proper(m: &FieldMatrix) -> bool {
    m.det().map(|d| d.is_one()).unwrap_or(false)
}

fn fix_dims(gens: &[FieldMatrix]) -> Result<(usize, usize), GroupError> {
    let lifted: Vec<FieldMatrix> = gens.iter().map(rep_from_o3).collect::<Result<_, _>>()?;
    Ok((fixed_space(gens, 3)?.dim(), fixed_space(&lifted, 8)?.dim()))
}

/// SO(3) part of a group given by O(3) generators: its elements when finite,
/// otherwise Schreier generators for the index-two subgroup.
fn proper_part(h: &[FieldMatrix]) -> Result<(Option<Vec<FieldMatrix>>, Vec<FieldMatrix>), GroupError> {
    match close_group(h, 3, 256) {
        Ok(all) => {
            let proper: Vec<FieldMatrix> = all.into_iter().filter(is_proper).collect();
            Ok((Some(proper.clone()), proper))
        }
        Err(GroupError::TooLarge(_)) => {
            let t = h.iter().find(|g| !is_proper(g));
            let Some(t) = t else { return Ok((None, h.to_vec())) };
            let ti = t.transpose();
            let mut s = Vec::new();
            for g in h {
                if is_proper(g) {
                    s.push(g.clone());
                    s.push(t.mul(g)?.mul(&ti)?);
                } else {
                    s.push(g.mul(&ti)?);
                    s.push(t.mul(g)?);
                }
            }
            Ok((None, s))
        }
        Err(e) => Err(e),
    }
}

/// Summary of the SO(3) strata obtained by intersecting each O(3) isotropy
/// group with SO(3).
#[derive(Debug, Clone)]
pub struct So3Lattice {
    /// (O(3) stratum, SO(3) order or `None` when infinite, fixed dim in ℝ⁸, rank of the SO(3) P̂).
    pub keys: Vec<(String, Option<usize>, usize, usize)>,
    pub count: usize,
}

/// Group the O(3) strata by the type of their SO(3) isotropy.
pub fn so3_lattice(b: &ExampleBundle) -> Result<So3Lattice, BundleError> {
    let mut keys = Vec::new();
    let grads: Vec<Vec<Poly>> = b.so3_basis.elements().iter().map(Poly::gradient).collect();
    for iso in &b.so3_isotropy {
        let spec = b.stratum(&iso.label).ok_or_else(|| BundleError::Corrupt(iso.label.clone()))?;
        let order = if iso.continuous { None } else { Some(close_group(&iso.generators, 3, 256)?.len()) };
        let (_, d8) = fix_dims(&iso.generators)?;
        let x = &spec.typical_point;
        let gx: Vec<Vec<FieldElem>> =
            grads.iter().map(|gr| gr.iter().map(|d| d.eval_at(x)).collect::<Result<_, _>>()).collect::<Result<_, _>>()?;
        let q = gx.len();
        let gram = FieldMatrix::from_fn(q, q, |i, j| {
            let mut acc = FieldElem::zero();
            for (a, c) in gx[i].iter().zip(&gx[j]) {
                acc += &(a * c);
            }
            acc
        });
        keys.push((iso.label.clone(), order, d8, gram.rank()));
    }
    let distinct: BTreeSet<(Option<usize>, usize, usize)> = keys.iter().map(|(_, o, d, r)| (*o, *d, *r)).collect();
    Ok(So3Lattice { count: distinct.len(), keys })
}

fn check_so3_strata(b: &ExampleBundle, rep: &mut VerifyReport) {
    let g = "so3strata";
    for iso in &b.so3_isotropy {
        let Some(spec) = b.stratum(&iso.label) else { continue };
        let x = &spec.typical_point;
        let mut problems = Vec::new();
        for (k, m) in iso.generators.iter().enumerate() {
            if !is_proper(m) {
                problems.push(format!("generator {} is not a rotation", k + 1));
            }
            match rep_from_o3(m) {
                Ok(r) if r.mul_vec(x) == *x => {}
                _ => problems.push(format!("generator {} does not fix the typical point", k + 1)),
            }
        }
        match proper_part(&spec.h_group) {
            Ok((Some(elems), _)) => match close_group(&iso.generators, 3, 256) {
                Ok(claimed) => {
                    let same = claimed.len() == elems.len() && claimed.iter().all(|c| elems.contains(c));
                    if !same {
                        problems.push(format!("H ∩ SO(3) has {} elements, claimed group {}", elems.len(), claimed.len()));
                    }
                }
                Err(e) => problems.push(e.to_string()),
            },
            Ok((None, schreier)) => {
                if !iso.continuous {
                    problems.push("H ∩ SO(3) is infinite but the claim is finite".into());
                }
                match (fix_dims(&schreier), fix_dims(&iso.generators)) {
                    (Ok(a), Ok(c)) if a == c => {}
                    (a, c) => problems.push(format!("fixed dimensions differ: {a:?} vs {c:?}")),
                }
            }
            Err(e) => problems.push(e.to_string()),
        }
        rep.push(g, format!("{} SO(3) isotropy", iso.label), A_SO3STRATA, problems.is_empty(), if problems.is_empty() {
            "G'_x = G_x ∩ SO(3)".to_string()
        } else {
            problems.join("; ")
        });
    }
    match so3_lattice(b) {
        Ok(lat) => {
            let detail: Vec<String> = lat
                .keys
                .iter()
                .map(|(l, o, d, r)| format!("{l}: |H'| {}, dim Fix {d}, rank {r}", o.map_or("inf".to_string(), |o| o.to_string())))
                .collect();
            rep.push(g, "SO(3) stratum count", A_SO3STRATA, lat.count == 6, format!("{} strata ({})", lat.count, detail.join("; ")));
        }
        Err(e) => rep.push(g, "SO(3) stratum count", A_SO3STRATA, false, e.to_string()),
    }
    if let Some(s4) = b.stratum("S4") {
        let r = b.p6.subst(&s4.restriction_images(8), &s4.v_vars).map(|p| p.is_zero());
        rep.push(g, "p6 vanishes on V of S4", A_SO3STRATA, r == Ok(true), "S4 lies on p6 = 0 inside the principal SO(3) stratum");
    }
}

fn check_adjacency(b: &ExampleBundle, rep: &mut VerifyReport) {
    let g = "adjacency";
    for a in &b.adjacency {
        let (Some(from), Some(to)) = (b.stratum(&a.from), b.stratum(&a.to)) else { continue };
        let name = format!("{} -> {}", a.from, a.to);
        let result = (|| -> Result<(bool, bool), GroupError> {
            let c = &a.conjugator;
            let ct = c.transpose();
            let mut contained = true;
            for h in &to.h_group {
                let conj = rep_from_o3(&c.mul(h)?.mul(&ct)?)?;
                contained &= conj.mul_vec(&from.typical_point) == from.typical_point;
            }
            let moved = rep_from_o3(c)?.mul_vec(&to.typical_point);
            let strict = from.h_gens.iter().any(|h| h.mul_vec(&moved) != moved);
            Ok((contained, strict))
        })();
        let (ok, detail) = match result {
            Ok((c, s)) => (c && s, format!("contained: {c}; proper: {s}")),
            Err(e) => (false, e.to_string()),
        };
        rep.push(g, name, A_ADJ, ok, detail);
    }
}

/// Monomials of total degree `1..=max` in `vars`.
fn monomials_up_to(vars: &Arc<VarSet>, max: u32) -> Vec<Poly> {
    let n = vars.len();
    let mut out = Vec::new();
    let mut exps = vec![0u16; n];
    fn rec(i: usize, left: u32, exps: &mut Vec<u16>, vars: &Arc<VarSet>, out: &mut Vec<Poly>) {
        if i == exps.len() {
            if exps.iter().any(|&e| e > 0) {
                out.push(Poly::monomial(vars, FieldElem::one(), exps));
            }
            return;
        }
        for e in 0..=left {
            exps[i] = e as u16;
            rec(i + 1, left - e, exps, vars, out);
        }
        exps[i] = 0;
    }
    rec(0, max, &mut exps, vars, &mut out);
    out
}

fn check_reynolds(b: &ExampleBundle, rep: &mut VerifyReport) {
    let g = "reynolds";
    for (spec, param) in b.strata.iter().zip(b.params()) {
        let Ok(Some(elems)) = spec.k_elements() else { continue };
        if elems.len() < 2 {
            continue;
        }
        let Ok(param) = param else { continue };
        let order = elems.len();
        let monos = monomials_up_to(&spec.v_vars, order as u32);
        let bad: Vec<String> = monos
            .par_iter()
            .filter_map(|m| {
                let avg = match reynolds_avg(&elems, m) {
                    Ok(a) => a,
                    Err(e) => return Some(e.to_string()),
                };
                if avg.is_zero() {
                    return None;
                }
                let parts: Vec<Poly> = avg.homogeneous_components().into_values().collect();
                parts.iter().find_map(|p| rewrite_in(p, &param.lambda_basis).err().map(|e| format!("{m}: {e}")))
            })
            .collect();
        rep.push(g, format!("{} K of order {order}", spec.label), A_REY, bad.is_empty(), match bad.first() {
            None => format!("{} monomials of degree <= {order} average into the lambda ring", monos.len()),
            Some(e) => e.clone(),
        });
    }
}

/// Text of the regenerated golden files, keyed by relative path.
pub fn regenerate_goldens(b: &ExampleBundle) -> Result<Vec<(&'static str, String)>, BundleError> {
    let pm = build_pmatrix(&b.rep, b.basis.clone())?;
    let quot = det_quotient(&pm, &b.active)?;
    Ok(vec![(GOLDEN_P6_FILE, format!("{}\n", generate_p6(&b.x_vars))), (GOLDEN_DET_QUOTIENT_FILE, format!("{quot}\n"))])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_loads_with_expected_shapes() {
        let b = load_bundle().unwrap();
        assert_eq!(b.basis.degrees(), &[2, 2, 3, 3, 4]);
        assert_eq!(b.p6.weighted_degree(), Some(6));
        assert_eq!(b.stratum("S4").unwrap().typical_point, [1, 1, 0, 0, 0, 0, 1, 1].map(FieldElem::from_int).to_vec());
        assert_eq!(b.strata.len(), 7);
    }

    #[test]
    fn stored_polys_reparse() {
        let b = load_bundle().unwrap();
        let pv = b.basis.target_vars();
        for (_, _, p) in b.phat.entries() {
            assert_eq!(&Poly::parse(&p.to_string(), pv).unwrap(), p);
        }
        for p in b.basis.elements().iter().chain([&b.p6]) {
            assert_eq!(&Poly::parse(&p.to_string(), &b.x_vars).unwrap(), p);
        }
        assert_eq!(Poly::parse(&b.active.to_string(), pv).unwrap(), b.active);
    }

    #[test]
    fn stored_p34_entry() {
        let b = load_bundle().unwrap();
        let pv = b.basis.target_vars();
        assert_eq!(*b.phat.get(2, 3), Poly::parse("18*(-2*p1*p2 + 2*p2^2 + p5)", pv).unwrap());
    }

    #[test]
    fn tensor_forms_reproduce_the_basis() {
        let b = load_bundle().unwrap();
        assert_eq!(tensor_basis(&b.x_vars), b.basis.elements());
    }

    #[test]
    fn adjacency_and_so3_checks_pass() {
        let b = load_bundle().unwrap();
        let mut r = VerifyReport::default();
        check_adjacency(&b, &mut r);
        check_so3_strata(&b, &mut r);
        assert!(r.passed(), "{:#?}", r.items.iter().filter(|i| !i.passed).collect::<Vec<_>>());
    }

    #[test]
    fn wrong_conjugator_breaks_adjacency() {
        let mut b = load_bundle().unwrap();
        for a in &mut b.adjacency {
            a.conjugator = FieldMatrix::identity(3);
        }
        let mut r = VerifyReport::default();
        check_adjacency(&b, &mut r);
        assert!(!r.find("S3 -> S4").unwrap().passed);
        assert!(r.find("S1 -> S2A").unwrap().passed);
    }

    #[test]
    fn unknown_group_is_reported() {
        let b = load_bundle().unwrap();
        let r = verify_bundle(&b, &VerifyOptions { only: vec!["nope".into()], ..Default::default() });
        assert_eq!(r.failures(), 1);
    }

    #[test]
    fn monomial_enumeration_counts() {
        let v = VarSet::uniform(&["a", "b"]).unwrap();
        // degrees 1..=3 in two variables: 2 + 3 + 4
        assert_eq!(monomials_up_to(&v, 3).len(), 9);
    }
}
