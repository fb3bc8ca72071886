//! Expressing invariant polynomials as polynomials in a supplied basis of
//! invariants.
//!
//! For a target of weighted degree `D`, every product of basis elements of
//! weighted degree `D` is expanded in the original variables and the target
//! is matched against their span. The span is kept as a sparse echelon form
//! (monic pivots keyed by leading monomial) together with the combination of
//! candidate products that produced each pivot, and is cached per degree.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use thiserror::Error;

use crate::matrix::PolyMatrix;
use crate::numfield::FieldElem;
use crate::poly::{Monomial, Poly, PolyError, VarSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewriteError {
    #[error("no expression in the basis; unmatched remainder {residual}")]
    NoExpression { residual: Box<Poly> },
    #[error("no expression for entry ({row},{col}); unmatched remainder {residual}")]
    NoExpressionAt { row: usize, col: usize, residual: Box<Poly> },
    #[error("target has degree {degree} above the cap {cap}")]
    DegreeCap { degree: u32, cap: u32 },
    #[error("basis element {0} is not weighted-homogeneous")]
    InhomogeneousBasis(String),
    #[error("basis element {0} has degree {1}, declared weight {2}")]
    WeightMismatch(String, u32, u32),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// A list of invariants with names and degrees, sharing one source variable set.
#[derive(Debug)]
pub struct InvariantBasis {
    source: Arc<VarSet>,
    target: Arc<VarSet>,
    elements: Vec<Poly>,
    cache: Mutex<HashMap<u32, Arc<Echelon>>>,
}

impl Clone for InvariantBasis {
    fn clone(&self) -> Self {
        InvariantBasis {
            source: self.source.clone(),
            target: self.target.clone(),
            elements: self.elements.clone(),
            cache: Mutex::new(self.cache.lock().expect("cache lock").clone()),
        }
    }
}

impl InvariantBasis {
    /// `names[a]` stands for `elements[a]`; its weight is the element's degree
    /// in `source` (weighted by the source variables' weights).
    pub fn new<S: AsRef<str>>(names: &[S], elements: Vec<Poly>) -> Result<Self, RewriteError> {
        let source = match elements.first() {
            Some(p) => p.vars().clone(),
            None => VarSet::empty(),
        };
        let mut weights = Vec::with_capacity(elements.len());
        for (name, p) in names.iter().zip(&elements) {
            if p.vars() != &source {
                return Err(RewriteError::Poly(PolyError::VarSetMismatch));
            }
            if !p.is_homogeneous() || p.is_zero() {
                return Err(RewriteError::InhomogeneousBasis(name.as_ref().to_string()));
            }
            weights.push(p.weighted_degree().expect("nonzero"));
        }
        let target = VarSet::new(names, &weights)?;
        Ok(InvariantBasis { source, target, elements, cache: Mutex::new(HashMap::new()) })
    }

    /// As [`InvariantBasis::new`] but over an already-declared target variable set
    /// whose weights must equal the element degrees.
    pub fn with_target(target: &Arc<VarSet>, elements: Vec<Poly>) -> Result<Self, RewriteError> {
        let b = Self::new(target.names(), elements)?;
        for (i, (&w, &d)) in target.weights().iter().zip(b.target.weights()).enumerate() {
            if w != d {
                return Err(RewriteError::WeightMismatch(target.name(i).to_string(), d, w));
            }
        }
        Ok(InvariantBasis { target: target.clone(), ..b })
    }

    pub fn source_vars(&self) -> &Arc<VarSet> {
        &self.source
    }

    pub fn target_vars(&self) -> &Arc<VarSet> {
        &self.target
    }

    pub fn elements(&self) -> &[Poly] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn degrees(&self) -> &[u32] {
        self.target.weights()
    }

    /// Substitute the basis elements for the target variables.
    pub fn expand(&self, f: &Poly) -> Result<Poly, PolyError> {
        f.subst(&self.elements, &self.source)
    }

    fn echelon(&self, degree: u32) -> Arc<Echelon> {
        if let Some(e) = self.cache.lock().expect("cache lock").get(&degree) {
            return e.clone();
        }
        let e = Arc::new(Echelon::build(self, degree));
        self.cache.lock().expect("cache lock").insert(degree, e.clone());
        e
    }

    /// Relations among basis products of the given degree, as polynomials in
    /// the target variables (empty when the products are independent).
    pub fn relations(&self, degree: u32) -> Vec<Poly> {
        self.echelon(degree).relations.clone()
    }
}

/// Exponent vectors with `Σ e_a w_a = degree`.
fn candidate_monomials(weights: &[u32], degree: u32) -> Vec<Vec<u16>> {
    fn rec(weights: &[u32], idx: usize, left: u32, cur: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if idx == weights.len() {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let w = weights[idx];
        for e in 0..=(left / w) {
            cur.push(e as u16);
            rec(weights, idx + 1, left - e * w, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(weights, 0, degree, &mut Vec::new(), &mut out);
    // higher powers of later basis elements first
    out.sort_by(|a, b| {
        for i in (0..a.len()).rev() {
            if a[i] != b[i] {
                return b[i].cmp(&a[i]);
            }
        }
        std::cmp::Ordering::Equal
    });
    out
}

type SparseRow = BTreeMap<Monomial, FieldElem>;

#[derive(Debug, Clone)]
struct Pivot {
    row: SparseRow,
    combo: BTreeMap<usize, FieldElem>,
}

#[derive(Debug, Clone)]
struct Echelon {
    candidates: Vec<Vec<u16>>,
    pivots: BTreeMap<Monomial, Pivot>,
    relations: Vec<Poly>,
}

fn axpy(row: &mut SparseRow, s: &FieldElem, other: &SparseRow) {
    for (m, c) in other {
        let t = s * c;
        match row.entry(*m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(t);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += &t;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }
}

fn combo_axpy(combo: &mut BTreeMap<usize, FieldElem>, s: &FieldElem, other: &BTreeMap<usize, FieldElem>) {
    for (k, c) in other {
        let t = s * c;
        let e = combo.entry(*k).or_insert_with(FieldElem::zero);
        *e += &t;
        if e.is_zero() {
            combo.remove(k);
        }
    }
}

impl Echelon {
    fn build(basis: &InvariantBasis, degree: u32) -> Self {
        let candidates = candidate_monomials(basis.degrees(), degree);
        let tv = basis.target.clone();
        let expansions: Vec<SparseRow> = candidates
            .par_iter()
            .map(|e| {
                let m = Poly::monomial(&tv, FieldElem::one(), e);
                let x = basis.expand(&m).expect("basis shares one variable set");
                x.terms().map(|(m, c)| (*m, c.clone())).collect()
            })
            .collect();
        let mut pivots: BTreeMap<Monomial, Pivot> = BTreeMap::new();
        let mut relations = Vec::new();
        for (j, row0) in expansions.into_iter().enumerate() {
            let mut row = row0;
            let mut combo: BTreeMap<usize, FieldElem> = BTreeMap::new();
            combo.insert(j, FieldElem::one());
            reduce(&mut row, &mut combo, &pivots);
            match row.iter().next_back().map(|(m, c)| (*m, c.clone())) {
                Some((lead, lc)) => {
                    let inv = lc.inv().expect("nonzero leading coefficient");
                    for c in row.values_mut() {
                        *c = &*c * &inv;
                    }
                    for c in combo.values_mut() {
                        *c = &*c * &inv;
                    }
                    pivots.insert(lead, Pivot { row, combo });
                }
                None => {
                    let mut rel = Poly::zero(&tv);
                    for (k, c) in &combo {
                        rel = &rel + &Poly::monomial(&tv, c.clone(), &candidates[*k]);
                    }
                    relations.push(rel);
                }
            }
        }
        Echelon { candidates, pivots, relations }
    }
}

/// Eliminate every pivot leading monomial from `row`, top-down, recording
/// the subtracted multiples in `combo`.
fn reduce(row: &mut SparseRow, combo: &mut BTreeMap<usize, FieldElem>, pivots: &BTreeMap<Monomial, Pivot>) {
    let mut cursor: Option<Monomial> = None;
    loop {
        let next = match cursor {
            None => row.iter().next_back().map(|(m, c)| (*m, c.clone())),
            Some(cm) => row.range(..cm).next_back().map(|(m, c)| (*m, c.clone())),
        };
        let Some((m, c)) = next else { return };
        match pivots.get(&m) {
            Some(p) => {
                let s = -c;
                axpy(row, &s, &p.row);
                combo_axpy(combo, &s, &p.combo);
                cursor = Some(m);
            }
            None => cursor = Some(m),
        }
    }
}

/// A rewriting request.
#[derive(Debug, Clone)]
pub struct RewriteProblem<'a> {
    pub target: &'a Poly,
    pub basis: &'a InvariantBasis,
    pub degree_cap: Option<u32>,
}

/// Write `target` as a polynomial in the basis names. Inhomogeneous targets
/// are split into homogeneous components.
pub fn rewrite(problem: &RewriteProblem<'_>) -> Result<Poly, RewriteError> {
    let RewriteProblem { target, basis, degree_cap } = problem;
    if target.vars() != basis.source_vars() {
        return Err(PolyError::VarSetMismatch.into());
    }
    let tv = basis.target_vars();
    let mut out = Poly::zero(tv);
    for (degree, part) in target.homogeneous_components() {
        if let Some(cap) = degree_cap {
            if degree > *cap {
                return Err(RewriteError::DegreeCap { degree, cap: *cap });
            }
        }
        let ech = basis.echelon(degree);
        let mut row: SparseRow = part.terms().map(|(m, c)| (*m, c.clone())).collect();
        let mut combo = BTreeMap::new();
        reduce(&mut row, &mut combo, &ech.pivots);
        if !row.is_empty() {
            let mut residual = Poly::zero(target.vars());
            for (m, c) in row {
                residual = &residual + &Poly::monomial(target.vars(), c, m.exponents(target.vars().len()));
            }
            return Err(RewriteError::NoExpression { residual: Box::new(residual) });
        }
        // reduce() subtracts pivots, so the target equals minus the accumulated combination
        for (k, c) in combo {
            out = &out + &Poly::monomial(tv, -c, &ech.candidates[k]);
        }
    }
    Ok(out)
}

/// Convenience wrapper with the default degree cap.
pub fn rewrite_in(target: &Poly, basis: &InvariantBasis) -> Result<Poly, RewriteError> {
    rewrite(&RewriteProblem { target, basis, degree_cap: None })
}

/// Entrywise rewrite of a matrix; symmetric input is rewritten on the upper
/// triangle only and mirrored.
pub fn rewrite_matrix(g: &PolyMatrix, basis: &InvariantBasis) -> Result<PolyMatrix, RewriteError> {
    let symmetric = g.is_symmetric();
    let cells: Vec<(usize, usize)> = (0..g.nrows())
        .flat_map(|i| (0..g.ncols()).map(move |j| (i, j)))
        .filter(|&(i, j)| !symmetric || i <= j)
        .collect();
    // warm the per-degree caches sequentially so parallel entries share them
    let mut degrees: Vec<u32> = cells.iter().flat_map(|&(i, j)| g.get(i, j).homogeneous_components().into_keys()).collect();
    degrees.sort_unstable();
    degrees.dedup();
    degrees.par_iter().for_each(|&d| {
        basis.echelon(d);
    });
    let solved: Vec<((usize, usize), Result<Poly, RewriteError>)> =
        cells.par_iter().map(|&(i, j)| ((i, j), rewrite_in(g.get(i, j), basis))).collect();
    let mut out = PolyMatrix::zeros_in(basis.target_vars(), g.nrows(), g.ncols());
    for ((i, j), r) in solved {
        let p = r.map_err(|e| match e {
            RewriteError::NoExpression { residual } => RewriteError::NoExpressionAt { row: i, col: j, residual },
            other => other,
        })?;
        if symmetric && i != j {
            out.set(j, i, p.clone());
        }
        out.set(i, j, p);
    }
    Ok(out)
}
