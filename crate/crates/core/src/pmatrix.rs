//! Gradient Gram matrices of an integrity basis and their expression in the
//! basis itself, with point classification by rank and relations.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::group_rep::{invariant_under, random_rational_point, GroupError, OrthRep};
use crate::matrix::{count_above, sym_eigenvalues, MatrixError, PolyMatrix};
use crate::numfield::FieldElem;
use crate::poly::{CompiledPoly, Poly, PolyError, VarSet};
use crate::rewrite::{rewrite_matrix, InvariantBasis, RewriteError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PMatrixError {
    #[error("basis element `{0}` is not invariant under the group")]
    NotInvariant(String),
    #[error("point has {got} coordinates, expected {expected}")]
    Arity { expected: usize, got: usize },
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// `G_ab = Σ_i ∂_i f_a ∂_i f_b` over the polynomials' own variables.
pub fn gradient_gram(fs: &[Poly]) -> PolyMatrix {
    let vars = fs.first().map(|f| f.vars().clone()).unwrap_or_else(VarSet::empty);
    let grads: Vec<Vec<Poly>> = fs.par_iter().map(Poly::gradient).collect();
    let n = fs.len();
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
    let vals: Vec<Poly> = cells
        .par_iter()
        .map(|&(a, b)| {
            let mut acc = Poly::zero(&vars);
            for (ga, gb) in grads[a].iter().zip(&grads[b]) {
                if !ga.is_zero() && !gb.is_zero() {
                    acc = &acc + &(ga * gb);
                }
            }
            acc
        })
        .collect();
    let mut m = PolyMatrix::zeros_in(&vars, n, n);
    for ((a, b), v) in cells.into_iter().zip(vals) {
        m.set(b, a, v.clone());
        m.set(a, b, v);
    }
    m
}

/// The P-matrix of a basis, expressed in the basis variables.
#[derive(Debug, Clone)]
pub struct PMatrix {
    pub basis: Arc<InvariantBasis>,
    pub hat: PolyMatrix,
    compiled: Vec<CompiledPoly>,
}

impl PMatrix {
    pub fn new(basis: Arc<InvariantBasis>, hat: PolyMatrix) -> Self {
        let compiled = (0..hat.nrows()).flat_map(|i| (0..hat.ncols()).map(move |j| (i, j))).map(|(i, j)| hat.get(i, j).compile()).collect();
        PMatrix { basis, hat, compiled }
    }

    pub fn size(&self) -> usize {
        self.hat.nrows()
    }

    pub fn vars(&self) -> &Arc<VarSet> {
        self.basis.target_vars()
    }

    pub fn degrees(&self) -> &[u32] {
        self.basis.degrees()
    }

    pub fn eval_f64(&self, p: &[f64]) -> DMatrix<f64> {
        let n = self.size();
        DMatrix::from_fn(n, n, |i, j| self.compiled[i * n + j].eval(p))
    }
}

/// Build `P̂` for a basis invariant under `rep`. Invariance is checked exactly
/// on the generators.
pub fn build_pmatrix(rep: &OrthRep, basis: Arc<InvariantBasis>) -> Result<PMatrix, PMatrixError> {
    for (name, p) in basis.target_vars().names().iter().zip(basis.elements()) {
        if !invariant_under(rep.generators(), p)? {
            return Err(PMatrixError::NotInvariant(name.clone()));
        }
    }
    let gram = gradient_gram(basis.elements());
    let hat = rewrite_matrix(&gram, &basis)?;
    Ok(PMatrix::new(basis, hat))
}

/// Exact division; the quotient on success.
pub fn check_divisibility(det: &Poly, factor: &Poly) -> Result<Poly, PolyError> {
    det.div_exact(factor)
}

/// A labeled stratum in terms of rank, equalities and strict inequalities.
#[derive(Debug, Clone)]
pub struct StratumRule {
    pub label: String,
    pub rank: usize,
    pub equalities: Vec<Poly>,
    pub inequalities: Vec<Poly>,
}

/// Registered stratum rules used to attach labels to classified points.
#[derive(Debug, Clone, Default)]
pub struct StratumTable {
    pub rules: Vec<StratumRule>,
}

/// Classification tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative eigenvalue threshold for rank and semidefiniteness.
    pub rank: f64,
    /// Relative threshold for polynomial equalities and strict inequalities.
    pub relation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rank: 1e-9, relation: 1e-7 }
    }
}

impl Tolerances {
    pub fn from_rank_tol(tol: f64) -> Self {
        Tolerances { rank: tol, relation: (tol * 100.0).max(1e-12) }
    }
}

/// Outcome of classifying a point of the basis space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumVerdict {
    pub point: Vec<f64>,
    pub psd: bool,
    pub rank: usize,
    pub eigenvalues: Vec<f64>,
    pub on_z: bool,
    pub stratum_label: Option<String>,
    /// The matched rule's relations, rendered as text.
    pub satisfied: Vec<String>,
}

impl StratumVerdict {
    pub fn inside_orbit_space(&self) -> bool {
        self.psd && self.on_z
    }
}

/// Rescale by `p_a ↦ t^{d_a} p_a` so the largest `|p_a|^{1/d_a}` is one.
/// P̂ changes by a congruence under this map, so rank and inertia are kept.
pub fn normalize_point(p: &[f64], degrees: &[u32]) -> Vec<f64> {
    let m = p.iter().zip(degrees).fold(0.0f64, |acc, (v, &d)| acc.max(v.abs().powf(1.0 / d as f64)));
    if m == 0.0 || !m.is_finite() {
        return p.to_vec();
    }
    let t = 1.0 / m;
    p.iter().zip(degrees).map(|(v, &d)| v * t.powi(d as i32)).collect()
}

/// Relative vanishing test for `f` at `x`.
pub fn vanishes(f: &CompiledPoly, x: &[f64], tol: f64) -> bool {
    f.eval(x).abs() <= tol * f.magnitude(x).max(1e-300)
}

/// Relative strict positivity test for `f` at `x`.
pub fn positive(f: &CompiledPoly, x: &[f64], tol: f64) -> bool {
    f.eval(x) > tol * f.magnitude(x)
}

pub fn classify_point(
    pm: &PMatrix,
    point: &[f64],
    relations: &[Poly],
    table: &StratumTable,
    tol: Tolerances,
) -> Result<StratumVerdict, PMatrixError> {
    let q = pm.size();
    if point.len() != q {
        return Err(PMatrixError::Arity { expected: q, got: point.len() });
    }
    let x = normalize_point(point, pm.degrees());
    let ev = sym_eigenvalues(&pm.eval_f64(&x));
    let scale = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let thr = (tol.rank * scale).max(1e-12);
    let psd = ev.iter().all(|&v| v >= -thr);
    let rank = count_above(&ev, tol.rank, 1e-12);
    let on_z = relations.iter().all(|r| vanishes(&r.compile(), &x, tol.relation));
    let mut label = None;
    let mut satisfied = Vec::new();
    if psd && on_z {
        for rule in table.rules.iter().filter(|r| r.rank == rank) {
            let eqs_ok = rule.equalities.iter().all(|e| vanishes(&e.compile(), &x, tol.relation));
            let ineqs_ok = rule.inequalities.iter().all(|e| positive(&e.compile(), &x, tol.relation));
            if eqs_ok && ineqs_ok {
                label = Some(rule.label.clone());
                satisfied = rule.equalities.iter().map(|e| format!("{e} = 0")).collect();
                satisfied.extend(rule.inequalities.iter().map(|e| format!("{e} > 0")));
                break;
            }
        }
    }
    Ok(StratumVerdict { point: point.to_vec(), psd, rank, eigenvalues: ev, on_z, stratum_label: label, satisfied })
}

/// Result of checking a polynomial relation on the image of the orbit map.
#[derive(Debug, Clone, PartialEq)]
pub enum RelationVerdict {
    Holds { trials: usize, symbolic: bool },
    Fails { x: Vec<FieldElem>, value: FieldElem },
}

impl RelationVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, RelationVerdict::Holds { .. })
    }
}

/// Check `relation(p(x)) = 0` at random rational points, then symbolically.
pub fn verify_relation<R: Rng>(
    relation: &Poly,
    basis: &InvariantBasis,
    trials: usize,
    rng: &mut R,
) -> Result<RelationVerdict, PMatrixError> {
    let n = basis.source_vars().len();
    for _ in 0..trials {
        let x = random_rational_point(rng, n, 3, 4);
        let p: Vec<FieldElem> = basis.elements().iter().map(|f| f.eval_at(&x)).collect::<Result<_, _>>()?;
        let value = relation.eval_at(&p)?;
        if !value.is_zero() {
            return Ok(RelationVerdict::Fails { x, value });
        }
    }
    let symbolic = basis.expand(relation)?.is_zero();
    if !symbolic {
        // sampling missed it; report a point where it fails
        for _ in 0..1000 {
            let x = random_rational_point(rng, n, 5, 7);
            let p: Vec<FieldElem> = basis.elements().iter().map(|f| f.eval_at(&x)).collect::<Result<_, _>>()?;
            let value = relation.eval_at(&p)?;
            if !value.is_zero() {
                return Ok(RelationVerdict::Fails { x, value });
            }
        }
    }
    Ok(RelationVerdict::Holds { trials, symbolic })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group_rep::{o3_on_r8, x_vars};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trivial_group_on_a_line() {
        let x = VarSet::uniform(&["x"]).unwrap();
        let rep = OrthRep::new("trivial", 1, vec![]).unwrap();
        let basis = Arc::new(InvariantBasis::new(&["p"], vec![Poly::parse("x", &x).unwrap()]).unwrap());
        let pm = build_pmatrix(&rep, basis).unwrap();
        assert_eq!(pm.hat.get(0, 0).to_string(), "1");
    }

    #[test]
    fn non_invariant_basis_is_rejected() {
        let xv = x_vars();
        let basis = Arc::new(InvariantBasis::new(&["p"], vec![Poly::parse("x1^2", &xv).unwrap()]).unwrap());
        assert_eq!(build_pmatrix(&o3_on_r8(), basis).unwrap_err(), PMatrixError::NotInvariant("p".into()));
    }

    #[test]
    fn divisibility_examples() {
        let pv = VarSet::indexed("p", &[2]).unwrap();
        let e = |s: &str| Poly::parse(s, &pv).unwrap();
        assert_eq!(check_divisibility(&e("p1^2"), &e("p1")).unwrap(), e("p1"));
        assert!(matches!(check_divisibility(&e("p1^2 + 1"), &e("p1")), Err(PolyError::NotDivisible { .. })));
    }

    #[test]
    fn normalization_is_a_congruence() {
        let p = normalize_point(&[4.0, 2.0, 8.0], &[2, 2, 4]);
        assert_eq!(p, vec![1.0, 0.5, 0.5]);
        assert_eq!(normalize_point(&[0.0, 0.0], &[2, 3]), vec![0.0, 0.0]);
    }

    #[test]
    fn relation_examples() {
        let xv = VarSet::indexed("x", &[1, 1]).unwrap();
        let basis = InvariantBasis::new(
            &["p1", "p2"],
            vec![Poly::parse("x1^2 + x2^2", &xv).unwrap(), Poly::parse("x1^2", &xv).unwrap()],
        )
        .unwrap();
        let pv = basis.target_vars().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zero = Poly::parse("p1 - p1", &pv).unwrap();
        assert_eq!(verify_relation(&zero, &basis, 5, &mut rng).unwrap(), RelationVerdict::Holds { trials: 5, symbolic: true });
        let bad = Poly::parse("p1 - p2", &pv).unwrap();
        assert!(!verify_relation(&bad, &basis, 5, &mut rng).unwrap().passed());
    }
}
