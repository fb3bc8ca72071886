//! Rational parametrizations of singular strata.
//!
//! A stratum is described by an isotropy group `H`, its fixed space `V`, the
//! group `K` it induces on `V`, and an integrity basis `λ` of `K`-invariants on
//! `V`. From these we get `Λ̂(λ)` (the P-matrix of `K`), `φ(λ)` (the basis `p`
//! restricted to `V`, written in `λ`) and the Jacobian `J = ∂φ/∂λ`. The stratum
//! is the image under `φ` of the region where `Λ̂ > 0` and `rank J = l`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::group_rep::{close_group, fixed_space, invariant_under, GroupError};
use crate::matrix::{numeric_rank, FieldMatrix, MatrixError, PolyMatrix};
use crate::numfield::FieldElem;
use crate::pmatrix::{classify_point, gradient_gram, positive, PMatrix, StratumTable, StratumVerdict, Tolerances};
use crate::poly::{parse_constant, CompiledPoly, Poly, PolyError, VarSet};
use crate::rewrite::{rewrite_in, rewrite_matrix, InvariantBasis, RewriteError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrataError {
    #[error("stratum {label}: {msg}")]
    Invalid { label: String, msg: String },
    #[error("stratum {label}: λ-basis element {index} is not K-invariant")]
    NotKInvariant { label: String, index: usize },
    #[error("stratum {label}: typical point is not fixed by H")]
    TypicalNotFixed { label: String },
    #[error("stratum {label}: fixed space of H does not match the declared V")]
    FixedSpaceMismatch { label: String },
    #[error("sampling exhausted: {accepted} of {tried} draws accepted")]
    SamplingExhausted { accepted: usize, tried: usize },
    #[error("spec parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Scalar literal in data files: an integer or a coefficient expression.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScalarLit {
    Int(i64),
    Text(String),
}

impl ScalarLit {
    pub fn value(&self) -> Result<FieldElem, PolyError> {
        match self {
            ScalarLit::Int(v) => Ok(FieldElem::from_int(*v)),
            ScalarLit::Text(s) => parse_constant(s),
        }
    }
}

/// Matrix literal: row-major rows, or a diagonal.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MatrixLit {
    Rows(Vec<Vec<ScalarLit>>),
    Diag { diag: Vec<ScalarLit> },
}

impl MatrixLit {
    pub fn value(&self) -> Result<FieldMatrix, StrataError> {
        match self {
            MatrixLit::Rows(rows) => {
                let rows = rows
                    .iter()
                    .map(|r| r.iter().map(ScalarLit::value).collect::<Result<Vec<_>, _>>())
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(FieldMatrix::from_rows(rows)?)
            }
            MatrixLit::Diag { diag } => {
                Ok(FieldMatrix::diag(&diag.iter().map(ScalarLit::value).collect::<Result<Vec<_>, _>>()?))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupSection {
    /// Generators acting on the ambient space.
    #[serde(default)]
    ambient: Vec<MatrixLit>,
    /// Generators given in the defining group, lifted by the caller.
    #[serde(default)]
    group: Vec<MatrixLit>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct KSection {
    #[serde(default)]
    generators: Vec<MatrixLit>,
    #[serde(default)]
    finite: bool,
    /// Optional preimages in the defining group of each generator.
    #[serde(default)]
    group: Vec<MatrixLit>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct LambdaSection {
    #[serde(default)]
    names: Vec<String>,
    #[serde(default)]
    polys: Vec<String>,
    /// Take λ to be the ambient basis restricted to V.
    #[serde(default)]
    basis: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpectedSection {
    #[serde(default)]
    lambda_hat: Vec<Vec<String>>,
    #[serde(default)]
    phi: Vec<String>,
    #[serde(default)]
    delta: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    label: String,
    #[serde(default)]
    title: Option<String>,
    dim: usize,
    typical_point: Vec<ScalarLit>,
    h: GroupSection,
    v: VSection,
    k: KSection,
    lambda: LambdaSection,
    #[serde(default)]
    expected: Option<ExpectedSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct VSection {
    coords: Vec<String>,
}

/// Reference data to compare the derived objects against.
#[derive(Debug, Clone, Default)]
pub struct ExpectedParam {
    pub lambda_hat: Option<PolyMatrix>,
    pub phi: Option<Vec<Poly>>,
    /// Strict-positivity conditions describing Δ in closed form.
    pub delta: Option<Vec<Poly>>,
}

/// Everything needed to parametrize one stratum.
#[derive(Debug, Clone)]
pub struct StratumSpec {
    pub label: String,
    pub title: String,
    pub h_gens: Vec<FieldMatrix>,
    /// The generators of H given in the defining group, before lifting.
    pub h_group: Vec<FieldMatrix>,
    /// Kept ambient coordinates spanning V, in order.
    pub v_coords: Vec<usize>,
    pub v_vars: Arc<VarSet>,
    pub k_gens: Vec<FieldMatrix>,
    pub k_finite: bool,
    /// Preimages of `k_gens` in the defining group, if recorded.
    pub k_group: Vec<FieldMatrix>,
    /// Lifted preimages restricted to V; `None` where V is not preserved.
    pub k_group_on_v: Vec<Option<FieldMatrix>>,
    pub lambda_vars: Arc<VarSet>,
    pub lambda_polys: Vec<Poly>,
    pub expected_dim: usize,
    pub typical_point: Vec<FieldElem>,
    pub expected: ExpectedParam,
}

impl StratumSpec {
    /// Parse a stratum file. `x_vars` names the ambient coordinates; `lift`
    /// maps generators written in the defining group to ambient matrices.
    pub fn from_toml(
        text: &str,
        x_vars: &Arc<VarSet>,
        lift: &dyn Fn(&FieldMatrix) -> Result<FieldMatrix, GroupError>,
    ) -> Result<Self, StrataError> {
        Self::from_toml_with_basis(text, x_vars, lift, None)
    }

    /// As [`StratumSpec::from_toml`]; `basis` supplies λ when the file asks
    /// for the ambient basis restricted to V.
    pub fn from_toml_with_basis(
        text: &str,
        x_vars: &Arc<VarSet>,
        lift: &dyn Fn(&FieldMatrix) -> Result<FieldMatrix, GroupError>,
        basis: Option<&[Poly]>,
    ) -> Result<Self, StrataError> {
        let f: SpecFile = toml::from_str(text).map_err(|e| StrataError::Parse(e.to_string()))?;
        let label = f.label.clone();
        let invalid = |msg: String| StrataError::Invalid { label: label.clone(), msg };
        let n = x_vars.len();

        let mut h_gens = Vec::new();
        for m in &f.h.ambient {
            h_gens.push(m.value()?);
        }
        let mut h_group = Vec::new();
        for m in &f.h.group {
            let g = m.value()?;
            h_gens.push(lift(&g)?);
            h_group.push(g);
        }
        let mut v_coords = Vec::new();
        for c in &f.v.coords {
            v_coords.push(x_vars.index_of(c).ok_or_else(|| invalid(format!("unknown coordinate {c}")))?);
        }
        let v_names: Vec<&str> = v_coords.iter().map(|&i| x_vars.name(i)).collect();
        let v_vars = VarSet::uniform(&v_names)?;
        let nu = v_coords.len();
        let k_group = f.k.group.iter().map(MatrixLit::value).collect::<Result<Vec<_>, _>>()?;
        let mut k_group_on_v = Vec::new();
        for g in &k_group {
            k_group_on_v.push(restrict_to(&lift(g)?, &v_coords));
        }
        let k_gens = if f.k.generators.is_empty() && !k_group.is_empty() {
            k_group_on_v
                .iter()
                .cloned()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| invalid("a K preimage does not preserve V".into()))?
        } else {
            f.k.generators.iter().map(MatrixLit::value).collect::<Result<Vec<_>, _>>()?
        };
        let lambda_polys = if f.lambda.basis {
            if !f.lambda.polys.is_empty() {
                return Err(invalid("λ given both explicitly and as the basis".into()));
            }
            let basis = basis.ok_or_else(|| invalid("λ refers to a basis that was not supplied".into()))?;
            if basis.len() != f.lambda.names.len() {
                return Err(invalid("λ names and basis differ in length".into()));
            }
            let n = x_vars.len();
            let images: Vec<Poly> = (0..n)
                .map(|i| match v_coords.iter().position(|&c| c == i) {
                    Some(j) => Poly::var_at(&v_vars, j),
                    None => Poly::zero(&v_vars),
                })
                .collect();
            basis.iter().map(|p| p.subst(&images, &v_vars)).collect::<Result<Vec<_>, _>>()?
        } else {
            if f.lambda.names.len() != f.lambda.polys.len() {
                return Err(invalid("λ names and polynomials differ in length".into()));
            }
            f.lambda.polys.iter().map(|s| Poly::parse(s, &v_vars)).collect::<Result<Vec<_>, _>>()?
        };
        let mut weights = Vec::new();
        for (i, p) in lambda_polys.iter().enumerate() {
            if p.is_zero() || !p.is_homogeneous() {
                return Err(invalid(format!("λ{} must be a nonzero homogeneous polynomial", i + 1)));
            }
            weights.push(p.weighted_degree().expect("nonzero"));
        }
        let lambda_vars = VarSet::new(&f.lambda.names, &weights)?;
        let typical_point = f.typical_point.iter().map(ScalarLit::value).collect::<Result<Vec<_>, _>>()?;
        if typical_point.len() != n {
            return Err(invalid(format!("typical point needs {n} coordinates")));
        }
        for g in &k_gens {
            if g.nrows() != nu || g.ncols() != nu {
                return Err(invalid(format!("K generators must be {nu}x{nu}")));
            }
        }
        let expected = match &f.expected {
            None => ExpectedParam::default(),
            Some(e) => ExpectedParam {
                lambda_hat: if e.lambda_hat.is_empty() {
                    None
                } else {
                    let rows = e
                        .lambda_hat
                        .iter()
                        .map(|r| r.iter().map(|s| Poly::parse(s, &lambda_vars)).collect::<Result<Vec<_>, _>>())
                        .collect::<Result<Vec<_>, _>>()?;
                    Some(PolyMatrix::from_rows(rows)?)
                },
                phi: if e.phi.is_empty() {
                    None
                } else {
                    Some(e.phi.iter().map(|s| Poly::parse(s, &lambda_vars)).collect::<Result<_, _>>()?)
                },
                delta: if e.delta.is_empty() {
                    None
                } else {
                    Some(e.delta.iter().map(|s| Poly::parse(s, &lambda_vars)).collect::<Result<_, _>>()?)
                },
            },
        };
        Ok(StratumSpec {
            title: f.title.unwrap_or_else(|| label.clone()),
            label,
            h_gens,
            h_group,
            v_coords,
            v_vars,
            k_gens,
            k_finite: f.k.finite,
            k_group,
            k_group_on_v,
            lambda_vars,
            lambda_polys,
            expected_dim: f.dim,
            typical_point,
            expected,
        })
    }

    pub fn nu(&self) -> usize {
        self.v_coords.len()
    }

    pub fn l(&self) -> usize {
        self.lambda_polys.len()
    }

    /// Images `x_i ↦ v_j` (or 0) restricting ambient polynomials to V.
    pub fn restriction_images(&self, n: usize) -> Vec<Poly> {
        (0..n)
            .map(|i| match self.v_coords.iter().position(|&c| c == i) {
                Some(j) => Poly::var_at(&self.v_vars, j),
                None => Poly::zero(&self.v_vars),
            })
            .collect()
    }

    /// Coordinates of the typical point in V.
    pub fn typical_v(&self) -> Vec<FieldElem> {
        self.v_coords.iter().map(|&i| self.typical_point[i].clone()).collect()
    }

    /// Structural checks: H fixes the typical point, the fixed space of H is
    /// the declared V, and every λ is invariant under the K generators.
    pub fn validate(&self) -> Result<(), StrataError> {
        let n = self.typical_point.len();
        for h in &self.h_gens {
            if h.mul_vec(&self.typical_point) != self.typical_point {
                return Err(StrataError::TypicalNotFixed { label: self.label.clone() });
            }
        }
        let fs = fixed_space(&self.h_gens, n)?;
        let mut axes = fs.coordinate_axes().ok_or_else(|| StrataError::FixedSpaceMismatch { label: self.label.clone() })?;
        axes.sort_unstable();
        let mut declared = self.v_coords.clone();
        declared.sort_unstable();
        if axes != declared {
            return Err(StrataError::FixedSpaceMismatch { label: self.label.clone() });
        }
        for (index, p) in self.lambda_polys.iter().enumerate() {
            if !invariant_under(&self.k_gens, p)? {
                return Err(StrataError::NotKInvariant { label: self.label.clone(), index });
            }
        }
        Ok(())
    }

    /// Whether each K generator is the restriction to V of its recorded
    /// preimage; `None` when no preimages are recorded.
    pub fn k_matches_preimages(&self) -> Option<bool> {
        if self.k_group.is_empty() {
            return None;
        }
        Some(
            self.k_group_on_v.len() == self.k_gens.len()
                && self.k_group_on_v.iter().zip(&self.k_gens).all(|(r, g)| r.as_ref() == Some(g)),
        )
    }

    /// All elements of K when it is declared finite.
    pub fn k_elements(&self) -> Result<Option<Vec<FieldMatrix>>, StrataError> {
        if !self.k_finite {
            return Ok(None);
        }
        Ok(Some(close_group(&self.k_gens, self.nu(), 512)?))
    }
}

/// `m` restricted to the coordinate subspace `coords`, if it preserves it.
pub fn restrict_to(m: &FieldMatrix, coords: &[usize]) -> Option<FieldMatrix> {
    for &c in coords {
        for i in 0..m.nrows() {
            if !coords.contains(&i) && !m.get(i, c).is_zero() {
                return None;
            }
        }
    }
    Some(m.select(coords, coords))
}

/// The derived parametrization of a stratum.
#[derive(Debug, Clone)]
pub struct StratumParam {
    pub label: String,
    pub lambda_basis: Arc<InvariantBasis>,
    pub lambda_hat: PolyMatrix,
    pub phi: Vec<Poly>,
    pub jacobian: PolyMatrix,
    pub delta_ineqs: Vec<Poly>,
    pub rank_target: usize,
    pub expected_dim: usize,
    /// Relations among the λ up to the largest degree of φ; nonempty means the
    /// parametrization is not claimed to be globally one-to-one.
    pub lambda_relations: Vec<Poly>,
    compiled_phi: Vec<CompiledPoly>,
    compiled_j: Vec<CompiledPoly>,
    compiled_delta: Vec<CompiledPoly>,
}

impl StratumParam {
    pub fn lambda_vars(&self) -> &Arc<VarSet> {
        self.lambda_basis.target_vars()
    }

    pub fn l(&self) -> usize {
        self.rank_target
    }

    pub fn is_global(&self) -> bool {
        self.lambda_relations.is_empty()
    }

    pub fn phi_f64(&self, lambda: &[f64]) -> Vec<f64> {
        self.compiled_phi.iter().map(|f| f.eval(lambda)).collect()
    }

    pub fn jacobian_f64(&self, lambda: &[f64]) -> DMatrix<f64> {
        let l = self.rank_target;
        let q = self.phi.len();
        DMatrix::from_fn(q, l, |a, b| self.compiled_j[a * l + b].eval(lambda))
    }

    pub fn rank_j(&self, lambda: &[f64]) -> usize {
        numeric_rank(&self.jacobian_f64(lambda), 1e-9, 1e-12)
    }

    /// Strict Δ inequalities at `lambda`, with a relative margin.
    pub fn in_delta(&self, lambda: &[f64], tol: f64) -> bool {
        self.compiled_delta.iter().all(|f| positive(f, lambda, tol))
    }

    /// Largest relative violation margin; used to flag near-boundary points.
    pub fn delta_margin(&self, lambda: &[f64]) -> f64 {
        self.compiled_delta
            .iter()
            .map(|f| f.eval(lambda) / f.magnitude(lambda).max(1e-300))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `Λ̂(λ)`: the λ-gradient Gram matrix written in λ.
pub fn build_lambda_matrix(spec: &StratumSpec, lambda_basis: &InvariantBasis) -> Result<PolyMatrix, StrataError> {
    let gram = gradient_gram(&spec.lambda_polys);
    if spec.l() == 0 {
        return Ok(PolyMatrix::zeros_in(lambda_basis.target_vars(), 0, 0));
    }
    Ok(rewrite_matrix(&gram, lambda_basis)?)
}

/// `φ(λ)`: each basis element restricted to V and written in λ.
pub fn build_phi(spec: &StratumSpec, basis: &InvariantBasis, lambda_basis: &InvariantBasis) -> Result<Vec<Poly>, StrataError> {
    let n = basis.source_vars().len();
    let images = spec.restriction_images(n);
    basis
        .elements()
        .par_iter()
        .map(|p| {
            let restricted = p.subst(&images, &spec.v_vars)?;
            if restricted.is_zero() {
                return Ok(Poly::zero(lambda_basis.target_vars()));
            }
            Ok(rewrite_in(&restricted, lambda_basis)?)
        })
        .collect()
}

/// `J_{aα} = ∂φ_a/∂λ_α`.
pub fn jacobian(phi: &[Poly], lambda_vars: &Arc<VarSet>) -> PolyMatrix {
    let l = lambda_vars.len();
    PolyMatrix::from_fn(phi.len(), l, |a, b| phi[a].diff_at(b))
}

/// Leading principal minors of Λ̂ with positive constant content removed;
/// constant positive minors are dropped.
pub fn delta_region(lambda_hat: &PolyMatrix) -> Result<Vec<Poly>, StrataError> {
    let mut out = Vec::new();
    for m in lambda_hat.leading_principal_minors()? {
        if let Some(c) = m.as_constant() {
            if c.signum() > 0 {
                continue;
            }
        }
        let (_, prim) = m.primitive_part();
        if !out.contains(&prim) {
            out.push(prim);
        }
    }
    Ok(out)
}

/// Run the full derivation for one stratum.
pub fn build_param(spec: &StratumSpec, basis: &InvariantBasis) -> Result<StratumParam, StrataError> {
    let lambda_basis = Arc::new(if spec.l() == 0 {
        InvariantBasis::with_target(&VarSet::empty(), Vec::new()).map_err(StrataError::from)?
    } else {
        InvariantBasis::with_target(&spec.lambda_vars, spec.lambda_polys.clone())?
    });
    let lambda_hat = build_lambda_matrix(spec, &lambda_basis)?;
    let phi = if spec.l() == 0 {
        vec![Poly::zero(lambda_basis.target_vars()); basis.len()]
    } else {
        build_phi(spec, basis, &lambda_basis)?
    };
    let lv = lambda_basis.target_vars().clone();
    let jac = jacobian(&phi, &lv);
    let delta_ineqs = delta_region(&lambda_hat)?;
    let max_deg = basis.degrees().iter().copied().max().unwrap_or(0);
    let mut lambda_relations = Vec::new();
    if spec.l() > 0 {
        for d in 1..=max_deg {
            lambda_relations.extend(lambda_basis.relations(d));
        }
    }
    Ok(StratumParam {
        label: spec.label.clone(),
        compiled_phi: phi.iter().map(Poly::compile).collect(),
        compiled_j: (0..jac.nrows()).flat_map(|a| (0..jac.ncols()).map(move |b| (a, b))).map(|(a, b)| jac.get(a, b).compile()).collect(),
        compiled_delta: delta_ineqs.iter().map(Poly::compile).collect(),
        lambda_basis,
        lambda_hat,
        phi,
        jacobian: jac,
        delta_ineqs,
        rank_target: spec.l(),
        expected_dim: spec.expected_dim,
        lambda_relations,
    })
}

/// Result of the `P̂(φ) = JΛ̂Jᵀ` check.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationVerdict {
    pub identity_holds: bool,
    /// First differing entry (1-based) and its residual.
    pub first_mismatch: Option<(usize, usize, Poly)>,
    /// `A(φ(λ)) = 0`, when an active factor was supplied.
    pub active_vanishes: Option<bool>,
}

impl FactorizationVerdict {
    pub fn passed(&self) -> bool {
        self.identity_holds && self.active_vanishes != Some(false)
    }
}

pub fn verify_factorization(param: &StratumParam, pm: &PMatrix, active: Option<&Poly>) -> Result<FactorizationVerdict, StrataError> {
    let lv = param.lambda_vars().clone();
    let lhs = pm.hat.subst(&param.phi, &lv)?;
    let rhs = param.jacobian.mul(&param.lambda_hat)?.mul(&param.jacobian.transpose())?;
    let rhs = if rhs.nrows() == 0 || param.l() == 0 { PolyMatrix::zeros_in(&lv, lhs.nrows(), lhs.ncols()) } else { rhs };
    let diff = lhs.sub(&rhs)?;
    let first_mismatch = diff.entries().find(|(_, _, p)| !p.is_zero()).map(|(i, j, p)| (i + 1, j + 1, p.clone()));
    let active_vanishes = match active {
        Some(a) => Some(a.subst(&param.phi, &lv)?.is_zero()),
        None => None,
    };
    Ok(FactorizationVerdict { identity_holds: first_mismatch.is_none(), first_mismatch, active_vanishes })
}

/// Accepted Δ samples and those among them where `rank J < l`.
#[derive(Debug, Clone, Default)]
pub struct DeltaSample {
    pub accepted: Vec<Vec<f64>>,
    pub rank_deficient: Vec<Vec<f64>>,
    pub tried: usize,
}

/// Rejection-sample Δ inside a box.
pub fn sample_delta<R: Rng>(
    param: &StratumParam,
    count: usize,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<DeltaSample, StrataError> {
    let l = param.l();
    let mut out = DeltaSample::default();
    let max_tries = ((count as f64) / 1e-4).ceil() as usize;
    while out.accepted.len() < count {
        if out.tried >= max_tries.max(10_000) {
            return Err(StrataError::SamplingExhausted { accepted: out.accepted.len(), tried: out.tried });
        }
        out.tried += 1;
        let lam: Vec<f64> = (0..l).map(|_| rng.gen_range(lo..hi)).collect();
        if !param.in_delta(&lam, 0.0) {
            continue;
        }
        if param.rank_j(&lam) < l {
            out.rank_deficient.push(lam.clone());
        }
        out.accepted.push(lam);
    }
    Ok(out)
}

/// Disagreements between two descriptions of Δ on uniform box samples.
pub fn delta_disagreements<R: Rng>(
    param: &StratumParam,
    reference: &[Poly],
    samples: usize,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let l = param.l();
    let reference: Vec<CompiledPoly> = reference.iter().map(Poly::compile).collect();
    let mut bad = Vec::new();
    for _ in 0..samples {
        let lam: Vec<f64> = (0..l).map(|_| rng.gen_range(lo..hi)).collect();
        let ours = param.in_delta(&lam, 0.0);
        let theirs = reference.iter().all(|f| f.eval(&lam) > 0.0);
        if ours != theirs {
            bad.push(lam);
        }
    }
    bad
}

/// An `l×l` minor of J that is a nonzero polynomial of constant sign on the
/// given samples: returns the row indices and the sign.
pub fn sign_definite_minor(param: &StratumParam, samples: &[Vec<f64>]) -> Result<Option<(Vec<usize>, i32)>, StrataError> {
    let l = param.l();
    let q = param.phi.len();
    if l == 0 {
        return Ok(Some((Vec::new(), 1)));
    }
    let cols: Vec<usize> = (0..l).collect();
    let mut rows: Vec<usize> = (0..l).collect();
    loop {
        let minor = param.jacobian.select(&rows, &cols).det()?;
        if !minor.is_zero() {
            let c = minor.compile();
            let signs: Vec<f64> = samples.iter().map(|s| c.eval(s)).collect();
            if signs.iter().all(|&v| v > 0.0) {
                return Ok(Some((rows, 1)));
            }
            if signs.iter().all(|&v| v < 0.0) {
                return Ok(Some((rows, -1)));
            }
        }
        // next combination
        let mut i = l;
        loop {
            if i == 0 {
                return Ok(None);
            }
            i -= 1;
            if rows[i] < q - l + i {
                rows[i] += 1;
                for k in i + 1..l {
                    rows[k] = rows[k - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Outcome of classifying `φ(λ)` for sampled λ.
#[derive(Debug, Clone)]
pub struct RoundtripVerdict {
    pub checked: usize,
    pub first_mismatch: Option<(Vec<f64>, StratumVerdict)>,
}

impl RoundtripVerdict {
    pub fn passed(&self) -> bool {
        self.first_mismatch.is_none()
    }
}

pub fn roundtrip_classify(
    param: &StratumParam,
    pm: &PMatrix,
    table: &StratumTable,
    relations: &[Poly],
    samples: &[Vec<f64>],
    tol: Tolerances,
) -> Result<RoundtripVerdict, StrataError> {
    let verdicts: Vec<(Vec<f64>, StratumVerdict)> = samples
        .par_iter()
        .map(|lam| {
            let p = param.phi_f64(lam);
            classify_point(pm, &p, relations, table, tol).map(|v| (lam.clone(), v))
        })
        .collect::<Result<_, _>>()
        .map_err(|e| StrataError::Invalid { label: param.label.clone(), msg: e.to_string() })?;
    let first_mismatch = verdicts.into_iter().find(|(_, v)| {
        !(v.psd && v.rank == param.expected_dim && v.stratum_label.as_deref() == Some(param.label.as_str()))
    });
    Ok(RoundtripVerdict { checked: samples.len(), first_mismatch })
}

/// Exact checks at the typical point: `φ(λ(v)) = p(x_t)` and `λ(v)` lies in
/// the closure of Δ. Returns `(phi_matches, in_closure)`.
pub fn typical_point_check(spec: &StratumSpec, param: &StratumParam, basis: &InvariantBasis) -> Result<(bool, bool), StrataError> {
    let v = spec.typical_v();
    let lam: Vec<FieldElem> = spec.lambda_polys.iter().map(|f| f.eval_at(&v)).collect::<Result<_, _>>()?;
    let p_direct: Vec<FieldElem> = basis.elements().iter().map(|f| f.eval_at(&spec.typical_point)).collect::<Result<_, _>>()?;
    let p_phi: Vec<FieldElem> = param.phi.iter().map(|f| f.eval_at(&lam)).collect::<Result<_, _>>()?;
    let closure = param
        .delta_ineqs
        .iter()
        .map(|f| f.eval_at(&lam).map(|v| v.signum() >= 0))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .all(|b| b);
    Ok((p_direct == p_phi, closure))
}
