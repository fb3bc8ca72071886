//! Canonical multivariate polynomials over [`FieldElem`].
//!
//! A [`Poly`] lives in a named [`VarSet`]; each variable carries a positive
//! weight used for homogeneity and for the monomial order (weighted degree,
//! ties broken reverse-lexicographically over the declared variable order).
//! Terms are stored sorted in that order with no zero coefficients, so two
//! polynomials over the same variable set are equal iff their term maps are.

mod parse;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::numfield::{format_component_abs, FieldElem};

pub use parse::parse_constant;

/// Upper bound on the number of variables in a [`VarSet`].
pub const MAX_VARS: usize = 12;

const RESERVED: [&str; 3] = ["r2", "r3", "r6"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("polynomials live in different variable sets")]
    VarSetMismatch,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("no value assigned to variable `{0}`")]
    MissingAssignment(String),
    #[error("no image given for variable `{0}`")]
    MissingImage(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("invalid variable name `{0}`")]
    InvalidName(String),
    #[error("variable weights must be positive")]
    ZeroWeight,
    #[error("too many variables ({0} > {MAX_VARS})")]
    TooManyVariables(usize),
    #[error("expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("not divisible; remainder {remainder}")]
    NotDivisible { remainder: Box<Poly> },
    #[error("division by zero polynomial")]
    ZeroDivisor,
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// Ordered list of distinct variable names with homogeneity weights.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarSet {
    names: Vec<String>,
    weights: Vec<u32>,
}

fn valid_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !RESERVED.contains(&s)
}

impl VarSet {
    pub fn new<S: AsRef<str>>(names: &[S], weights: &[u32]) -> Result<Arc<Self>, PolyError> {
        if names.len() > MAX_VARS {
            return Err(PolyError::TooManyVariables(names.len()));
        }
        if names.len() != weights.len() {
            return Err(PolyError::Arity { expected: names.len(), got: weights.len() });
        }
        let mut out: Vec<String> = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref();
            if !valid_name(n) {
                return Err(PolyError::InvalidName(n.to_string()));
            }
            if out.iter().any(|m| m == n) {
                return Err(PolyError::DuplicateVariable(n.to_string()));
            }
            out.push(n.to_string());
        }
        if weights.contains(&0) {
            return Err(PolyError::ZeroWeight);
        }
        Ok(Arc::new(VarSet { names: out, weights: weights.to_vec() }))
    }

    /// Variables all of weight one.
    pub fn uniform<S: AsRef<str>>(names: &[S]) -> Result<Arc<Self>, PolyError> {
        Self::new(names, &vec![1; names.len()])
    }

    /// `prefix1, …, prefixN` with the given weights.
    pub fn indexed(prefix: &str, weights: &[u32]) -> Result<Arc<Self>, PolyError> {
        let names: Vec<String> = (1..=weights.len()).map(|i| format!("{prefix}{i}")).collect();
        Self::new(&names, weights)
    }

    pub fn empty() -> Arc<Self> {
        Arc::new(VarSet { names: Vec::new(), weights: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn weight(&self, i: usize) -> u32 {
        self.weights[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

fn same_vars(a: &Arc<VarSet>, b: &Arc<VarSet>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// Exponent vector together with its weighted degree.
///
/// `Ord` is the weighted graded reverse-lexicographic order, so the last key
/// of a sorted term map is the leading monomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Monomial {
    wdeg: u32,
    exps: [u16; MAX_VARS],
}

impl Monomial {
    pub fn one() -> Self {
        Monomial { wdeg: 0, exps: [0; MAX_VARS] }
    }

    pub fn from_exponents(exps: &[u16], vars: &VarSet) -> Self {
        assert_eq!(exps.len(), vars.len(), "exponent vector length must match the variable set");
        let mut m = Self::one();
        for (i, &e) in exps.iter().enumerate() {
            m.exps[i] = e;
            m.wdeg += e as u32 * vars.weight(i);
        }
        m
    }

    pub fn var(i: usize, vars: &VarSet) -> Self {
        let mut m = Self::one();
        m.exps[i] = 1;
        m.wdeg = vars.weight(i);
        m
    }

    pub fn weighted_degree(&self) -> u32 {
        self.wdeg
    }

    pub fn exponent(&self, i: usize) -> u16 {
        self.exps[i]
    }

    pub fn exponents(&self, n: usize) -> &[u16] {
        &self.exps[..n]
    }

    pub fn total_degree(&self) -> u32 {
        self.exps.iter().map(|&e| e as u32).sum()
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut m = *self;
        for i in 0..MAX_VARS {
            m.exps[i] = m.exps[i].checked_add(o.exps[i]).expect("exponent overflow");
        }
        m.wdeg += o.wdeg;
        m
    }

    pub fn divides(&self, o: &Self) -> bool {
        self.exps.iter().zip(o.exps.iter()).all(|(a, b)| a <= b)
    }

    /// `o / self`; caller guarantees divisibility.
    fn quotient_of(&self, o: &Self) -> Self {
        let mut m = *o;
        for i in 0..MAX_VARS {
            m.exps[i] -= self.exps[i];
        }
        m.wdeg -= self.wdeg;
        m
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.wdeg.cmp(&other.wdeg).then_with(|| {
            for i in (0..MAX_VARS).rev() {
                if self.exps[i] != other.exps[i] {
                    // smaller power of a later variable ranks higher
                    return other.exps[i].cmp(&self.exps[i]);
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multivariate polynomial with coefficients in Q(√2, √3).
#[derive(Clone)]
pub struct Poly {
    vars: Arc<VarSet>,
    terms: BTreeMap<Monomial, FieldElem>,
}

impl PartialEq for Poly {
    fn eq(&self, other: &Self) -> bool {
        same_vars(&self.vars, &other.vars) && self.terms == other.terms
    }
}

impl Eq for Poly {}

impl Poly {
    pub fn zero(vars: &Arc<VarSet>) -> Self {
        Poly { vars: vars.clone(), terms: BTreeMap::new() }
    }

    pub fn constant(vars: &Arc<VarSet>, c: FieldElem) -> Self {
        let mut p = Self::zero(vars);
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn one(vars: &Arc<VarSet>) -> Self {
        Self::constant(vars, FieldElem::one())
    }

    pub fn var(vars: &Arc<VarSet>, name: &str) -> Result<Self, PolyError> {
        let i = vars.index_of(name).ok_or_else(|| PolyError::UnknownVariable(name.to_string()))?;
        Ok(Self::var_at(vars, i))
    }

    pub fn var_at(vars: &Arc<VarSet>, i: usize) -> Self {
        let mut p = Self::zero(vars);
        p.terms.insert(Monomial::var(i, vars), FieldElem::one());
        p
    }

    pub fn monomial(vars: &Arc<VarSet>, c: FieldElem, exps: &[u16]) -> Self {
        let mut p = Self::zero(vars);
        p.add_term(Monomial::from_exponents(exps, vars), c);
        p
    }

    pub fn parse(text: &str, vars: &Arc<VarSet>) -> Result<Self, PolyError> {
        parse::parse_poly(text, vars)
    }

    pub fn vars(&self) -> &Arc<VarSet> {
        &self.vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in descending monomial order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &FieldElem)> {
        self.terms.iter().rev()
    }

    pub fn coefficient(&self, m: &Monomial) -> FieldElem {
        self.terms.get(m).cloned().unwrap_or_else(FieldElem::zero)
    }

    pub fn constant_term(&self) -> FieldElem {
        self.coefficient(&Monomial::one())
    }

    /// The constant value, if the polynomial has no variable terms.
    pub fn as_constant(&self) -> Option<FieldElem> {
        match self.terms.len() {
            0 => Some(FieldElem::zero()),
            1 => self.terms.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    pub fn leading_term(&self) -> Option<(&Monomial, &FieldElem)> {
        self.terms.iter().next_back()
    }

    /// Largest weighted degree of any term; `None` for the zero polynomial.
    pub fn weighted_degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::weighted_degree).max()
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degs = self.terms.keys().map(Monomial::weighted_degree);
        match degs.next() {
            None => true,
            Some(d) => degs.all(|e| e == d),
        }
    }

    /// Split into weighted-homogeneous parts keyed by degree.
    pub fn homogeneous_components(&self) -> BTreeMap<u32, Poly> {
        let mut out: BTreeMap<u32, Poly> = BTreeMap::new();
        for (m, c) in &self.terms {
            out.entry(m.wdeg).or_insert_with(|| Poly::zero(&self.vars)).terms.insert(*m, c.clone());
        }
        out
    }

    fn add_term(&mut self, m: Monomial, c: FieldElem) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += &c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn add_term_ref(&mut self, m: Monomial, c: &FieldElem) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c.clone());
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn check(&self, other: &Poly) -> Result<(), PolyError> {
        if same_vars(&self.vars, &other.vars) {
            Ok(())
        } else {
            Err(PolyError::VarSetMismatch)
        }
    }

    pub fn checked_add(&self, other: &Poly) -> Result<Poly, PolyError> {
        self.check(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term_ref(*m, c);
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Poly) -> Result<Poly, PolyError> {
        self.check(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(*m, -c);
        }
        Ok(out)
    }

    pub fn checked_mul(&self, other: &Poly) -> Result<Poly, PolyError> {
        self.check(other)?;
        let mut out = Poly::zero(&self.vars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    /// In-place `self += s * m * other`.
    pub fn add_scaled(&mut self, other: &Poly, s: &FieldElem, m: &Monomial) {
        assert!(same_vars(&self.vars, &other.vars), "polynomials live in different variable sets");
        if s.is_zero() {
            return;
        }
        for (mo, c) in &other.terms {
            self.add_term(mo.mul(m), c * s);
        }
    }

    pub fn scale(&self, s: &FieldElem) -> Poly {
        if s.is_zero() {
            return Poly::zero(&self.vars);
        }
        Poly { vars: self.vars.clone(), terms: self.terms.iter().map(|(m, c)| (*m, c * s)).collect() }
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::one(&self.vars);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Formal partial derivative with respect to the named variable.
    pub fn diff(&self, var: &str) -> Result<Poly, PolyError> {
        let i = self.vars.index_of(var).ok_or_else(|| PolyError::UnknownVariable(var.to_string()))?;
        Ok(self.diff_at(i))
    }

    pub fn diff_at(&self, i: usize) -> Poly {
        let mut out = Poly::zero(&self.vars);
        let w = self.vars.weight(i);
        for (m, c) in &self.terms {
            let e = m.exps[i];
            if e == 0 {
                continue;
            }
            let mut dm = *m;
            dm.exps[i] -= 1;
            dm.wdeg -= w;
            out.add_term(dm, c * &FieldElem::from_int(e as i64));
        }
        out
    }

    /// All partial derivatives, in variable order.
    pub fn gradient(&self) -> Vec<Poly> {
        (0..self.vars.len()).map(|i| self.diff_at(i)).collect()
    }

    /// Exact value at a point given positionally.
    pub fn eval_at(&self, point: &[FieldElem]) -> Result<FieldElem, PolyError> {
        if point.len() != self.vars.len() {
            return Err(PolyError::Arity { expected: self.vars.len(), got: point.len() });
        }
        let mut powers: Vec<Vec<FieldElem>> = Vec::with_capacity(point.len());
        for (i, x) in point.iter().enumerate() {
            let maxe = self.terms.keys().map(|m| m.exps[i]).max().unwrap_or(0) as usize;
            let mut pw = Vec::with_capacity(maxe + 1);
            pw.push(FieldElem::one());
            for k in 1..=maxe {
                let next = &pw[k - 1] * x;
                pw.push(next);
            }
            powers.push(pw);
        }
        let mut acc = FieldElem::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, pw) in powers.iter().enumerate() {
                let e = m.exps[i] as usize;
                if e > 0 {
                    t = &t * &pw[e];
                }
            }
            acc += &t;
        }
        Ok(acc)
    }

    /// Exact value at a point given by name.
    pub fn eval(&self, point: &HashMap<String, FieldElem>) -> Result<FieldElem, PolyError> {
        let mut vals = Vec::with_capacity(self.vars.len());
        for (i, name) in self.vars.names.iter().enumerate() {
            match point.get(name) {
                Some(v) => vals.push(v.clone()),
                None => {
                    if self.terms.keys().any(|m| m.exps[i] > 0) {
                        return Err(PolyError::MissingAssignment(name.clone()));
                    }
                    vals.push(FieldElem::zero());
                }
            }
        }
        self.eval_at(&vals)
    }

    /// Floating-point value at a point given positionally.
    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut t = c.to_f64();
                for (i, x) in point.iter().enumerate() {
                    let e = m.exps[i];
                    if e > 0 {
                        t *= x.powi(e as i32);
                    }
                }
                t
            })
            .sum()
    }

    pub fn compile(&self) -> CompiledPoly {
        CompiledPoly::new(self)
    }

    /// Compose with polynomial images of every variable, given positionally.
    /// The images must share one target variable set.
    pub fn subst(&self, images: &[Poly], target: &Arc<VarSet>) -> Result<Poly, PolyError> {
        if images.len() != self.vars.len() {
            return Err(PolyError::Arity { expected: self.vars.len(), got: images.len() });
        }
        for im in images {
            if !same_vars(im.vars(), target) {
                return Err(PolyError::VarSetMismatch);
            }
        }
        let mut cache: HashMap<(usize, u16), Poly> = HashMap::new();
        let mut out = Poly::zero(target);
        for (m, c) in &self.terms {
            let mut t = Poly::constant(target, c.clone());
            for (i, image) in images.iter().enumerate() {
                let e = m.exps[i];
                if e == 0 {
                    continue;
                }
                let pw = power_cached(&mut cache, image, i, e);
                t = &t * &pw;
            }
            for (tm, tc) in t.terms {
                out.add_term(tm, tc);
            }
        }
        Ok(out)
    }

    /// Compose with images given by variable name.
    pub fn subst_map(&self, images: &HashMap<String, Poly>, target: &Arc<VarSet>) -> Result<Poly, PolyError> {
        let mut ordered = Vec::with_capacity(self.vars.len());
        for (i, name) in self.vars.names.iter().enumerate() {
            match images.get(name) {
                Some(p) => ordered.push(p.clone()),
                None => {
                    if self.terms.keys().any(|m| m.exps[i] > 0) {
                        return Err(PolyError::MissingImage(name.clone()));
                    }
                    ordered.push(Poly::zero(target));
                }
            }
        }
        self.subst(&ordered, target)
    }

    /// Exact division by `divisor` using its leading monomial; succeeds iff the
    /// remainder is zero.
    pub fn div_exact(&self, divisor: &Poly) -> Result<Poly, PolyError> {
        self.check(divisor)?;
        let (lm, lc) = match divisor.leading_term() {
            Some((m, c)) => (*m, c.clone()),
            None => return Err(PolyError::ZeroDivisor),
        };
        let lc_inv = lc.inv().expect("leading coefficient is nonzero");
        let mut rest = self.clone();
        let mut quotient = Poly::zero(&self.vars);
        let mut remainder = Poly::zero(&self.vars);
        while let Some((m, c)) = rest.terms.iter().next_back().map(|(m, c)| (*m, c.clone())) {
            if lm.divides(&m) {
                let qm = lm.quotient_of(&m);
                let qc = &c * &lc_inv;
                rest.add_scaled(divisor, &(-&qc), &qm);
                quotient.add_term(qm, qc);
            } else {
                rest.terms.remove(&m);
                remainder.add_term(m, c);
            }
        }
        if remainder.is_zero() {
            Ok(quotient)
        } else {
            Err(PolyError::NotDivisible { remainder: Box::new(remainder) })
        }
    }

    /// Reinterpret in another variable set of the same size and weights.
    pub fn relabel(&self, vars: &Arc<VarSet>) -> Result<Poly, PolyError> {
        if vars.weights != self.vars.weights {
            return Err(PolyError::VarSetMismatch);
        }
        Ok(Poly { vars: vars.clone(), terms: self.terms.clone() })
    }

    /// Reinterpret in a variable set that extends ours by trailing variables.
    pub fn embed(&self, vars: &Arc<VarSet>) -> Result<Poly, PolyError> {
        let n = self.vars.len();
        if vars.len() < n || vars.names[..n] != self.vars.names[..] || vars.weights[..n] != self.vars.weights[..] {
            return Err(PolyError::VarSetMismatch);
        }
        Ok(Poly { vars: vars.clone(), terms: self.terms.clone() })
    }

    /// Scale so the result is primitive: rational coefficients are divided by
    /// their positive content, otherwise by the absolute value of the leading
    /// coefficient. Returns the factor divided out (always positive).
    pub fn primitive_part(&self) -> (FieldElem, Poly) {
        if self.is_zero() {
            return (FieldElem::one(), self.clone());
        }
        let all_rational = self.terms.values().all(FieldElem::is_rational);
        let content = if all_rational {
            use num_integer::Integer;
            let mut num_gcd = num_bigint::BigInt::from(0);
            let mut den_lcm = num_bigint::BigInt::from(1);
            for c in self.terms.values() {
                let r = c.as_rational().expect("rational");
                num_gcd = num_gcd.gcd(r.numer());
                den_lcm = den_lcm.lcm(r.denom());
            }
            FieldElem::from_rational(crate::numfield::Rational::new(num_gcd, den_lcm))
        } else {
            self.leading_term().expect("nonzero").1.abs()
        };
        let inv = content.inv().expect("content is nonzero");
        (content, self.scale(&inv))
    }
}

fn power_cached(cache: &mut HashMap<(usize, u16), Poly>, base: &Poly, i: usize, e: u16) -> Poly {
    if let Some(p) = cache.get(&(i, e)) {
        return p.clone();
    }
    let p = if e == 1 {
        base.clone()
    } else {
        let half = power_cached(cache, base, i, e / 2);
        let sq = &half * &half;
        if e % 2 == 1 {
            &sq * base
        } else {
            sq
        }
    };
    cache.insert((i, e), p.clone());
    p
}

impl<'a> Add<&'a Poly> for &'a Poly {
    type Output = Poly;
    /// Panics if the variable sets differ; see [`Poly::checked_add`].
    fn add(self, rhs: &'a Poly) -> Poly {
        self.checked_add(rhs).expect("polynomials live in different variable sets")
    }
}

impl<'a> Sub<&'a Poly> for &'a Poly {
    type Output = Poly;
    fn sub(self, rhs: &'a Poly) -> Poly {
        self.checked_sub(rhs).expect("polynomials live in different variable sets")
    }
}

impl<'a> Mul<&'a Poly> for &'a Poly {
    type Output = Poly;
    fn mul(self, rhs: &'a Poly) -> Poly {
        self.checked_mul(rhs).expect("polynomials live in different variable sets")
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly { vars: self.vars.clone(), terms: self.terms.iter().map(|(m, c)| (*m, -c)).collect() }
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (m, c)) in self.terms().enumerate() {
            let (neg, coeff) = coefficient_text(c);
            let vars = monomial_text(m, &self.vars);
            if n == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            match (coeff, vars.is_empty()) {
                (None, true) => write!(f, "1")?,
                (None, false) => write!(f, "{vars}")?,
                (Some(c), true) => write!(f, "{c}")?,
                (Some(c), false) => write!(f, "{c}*{vars}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly({self})")
    }
}

/// Sign and absolute coefficient text; `None` when the magnitude is one.
fn coefficient_text(c: &FieldElem) -> (bool, Option<String>) {
    let nz: Vec<usize> = (0..4).filter(|&i| !c.component(i).is_zero()).collect();
    if nz.len() == 1 {
        let i = nz[0];
        let r = c.component(i);
        let neg = r.is_negative();
        if i == 0 && r.abs() == num_traits::One::one() {
            return (neg, None);
        }
        return (neg, Some(format_component_abs(r, i)));
    }
    (false, Some(c.to_string()))
}

fn monomial_text(m: &Monomial, vars: &VarSet) -> String {
    let mut parts = Vec::new();
    for i in 0..vars.len() {
        match m.exps[i] {
            0 => {}
            1 => parts.push(vars.name(i).to_string()),
            e => parts.push(format!("{}^{}", vars.name(i), e)),
        }
    }
    parts.join("*")
}

/// Polynomial with `f64` coefficients for fast repeated evaluation.
#[derive(Debug, Clone)]
pub struct CompiledPoly {
    nvars: usize,
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl CompiledPoly {
    pub fn new(p: &Poly) -> Self {
        let nvars = p.vars.len();
        let terms = p
            .terms
            .iter()
            .map(|(m, c)| {
                let factors = (0..nvars).filter(|&i| m.exps[i] > 0).map(|i| (i, m.exps[i] as i32)).collect();
                (c.to_f64(), factors)
            })
            .collect();
        CompiledPoly { nvars, terms }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, fs)| fs.iter().fold(*c, |acc, &(i, e)| acc * x[i].powi(e)))
            .sum()
    }

    /// Sum of absolute term values; the natural scale for a cancellation test.
    pub fn magnitude(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, fs)| fs.iter().fold(c.abs(), |acc, &(i, e)| acc * x[i].abs().powi(e)))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xs() -> Arc<VarSet> {
        VarSet::indexed("x", &[1; 8]).unwrap()
    }

    fn p(s: &str, v: &Arc<VarSet>) -> Poly {
        Poly::parse(s, v).unwrap()
    }

    #[test]
    fn embed_keeps_terms_and_order() {
        let small = VarSet::new(&["p1", "p2"], &[2, 3]).unwrap();
        let big = VarSet::new(&["p1", "p2", "p3"], &[2, 3, 6]).unwrap();
        let f = Poly::parse("p1^3 - p2^2 + 2*p1", &small).unwrap();
        let g = f.embed(&big).unwrap();
        assert_eq!(g, Poly::parse("p1^3 - p2^2 + 2*p1", &big).unwrap());
        assert_eq!(g.to_string(), f.to_string());
        assert_eq!(f.embed(&VarSet::new(&["q1", "p2"], &[2, 3]).unwrap()), Err(PolyError::VarSetMismatch));
    }

    #[test]
    fn arithmetic_examples() {
        let v = xs();
        assert_eq!(&p("x1", &v) + &p("x1", &v), p("2*x1", &v));
        assert_eq!(&p("x1 + x2", &v) * &p("x1 - x2", &v), p("x1^2 - x2^2", &v));
        assert_eq!(&p("r3*x1", &v) * &p("r3*x1", &v), p("3*x1^2", &v));
    }

    #[test]
    fn varset_mismatch_is_an_error() {
        let v = xs();
        let w = VarSet::indexed("p", &[2, 2]).unwrap();
        assert_eq!(p("x1", &v).checked_add(&p("p1", &w)), Err(PolyError::VarSetMismatch));
        assert_eq!(p("x1", &v).checked_mul(&p("p1", &w)), Err(PolyError::VarSetMismatch));
    }

    #[test]
    fn derivative_examples() {
        let v = xs();
        assert_eq!(p("x1^2", &v).diff("x1").unwrap(), p("2*x1", &v));
        assert_eq!(p("x6^2 + x7^2 + x8^2", &v).diff("x6").unwrap(), p("2*x6", &v));
        assert_eq!(p("-2*r3*x1^3", &v).diff("x1").unwrap(), p("-6*r3*x1^2", &v));
        assert_eq!(p("x1", &v).diff("y"), Err(PolyError::UnknownVariable("y".into())));
    }

    #[test]
    fn evaluation_examples() {
        let v = xs();
        let pt: Vec<FieldElem> = [1, 1, 0, 0, 0, 0, 1, 1].iter().map(|&k| FieldElem::from_int(k)).collect();
        let p1 = p("x1^2+x2^2+x3^2+x4^2+x5^2+x6^2+x7^2+x8^2", &v);
        assert_eq!(p1.eval_at(&pt).unwrap(), FieldElem::from_int(4));
        let p3 = p(
            "-2*r3*x1^3 + 6*r3*x1*x2^2 - 3*r3*x1*x3^2 - 9*x2*x3^2 - 3*r3*x1*x4^2 + 9*x2*x4^2 + 18*x3*x4*x5 + 6*r3*x1*x5^2",
            &v,
        );
        assert_eq!(p3.eval_at(&pt).unwrap(), FieldElem::from_int(4) * FieldElem::sqrt3());
        let f = p("3 + x1*x2 - r2", &v);
        assert_eq!(f.eval_at(&vec![FieldElem::zero(); 8]).unwrap(), f.constant_term());
        let mut named = HashMap::new();
        named.insert("x1".to_string(), FieldElem::one());
        assert_eq!(p("x1*x2", &v).eval(&named), Err(PolyError::MissingAssignment("x2".into())));
    }

    #[test]
    fn substitution_examples() {
        let pv = VarSet::indexed("p", &[2, 2, 3, 3, 4]).unwrap();
        let lv = VarSet::indexed("l", &[1, 2, 2, 3]).unwrap();
        let images: HashMap<String, Poly> = [("p1".to_string(), p("l1^2 + l2 + l3", &lv))].into_iter().collect();
        assert_eq!(p("p1", &pv).subst_map(&images, &lv).unwrap(), p("l1^2+l2+l3", &lv));
        let zeros = vec![Poly::zero(&lv); 5];
        assert!(p("p2*p3", &pv).subst(&zeros, &lv).unwrap().is_zero());
        assert_eq!(
            p("p1*p2", &pv).subst_map(&images, &lv),
            Err(PolyError::MissingImage("p2".into()))
        );
    }

    #[test]
    fn canonical_print_order() {
        let v = xs();
        let f = p("6*r3*x1*x2^2 - 2*r3*x1^3", &v);
        assert_eq!(f.to_string(), "-2*r3*x1^3 + 6*r3*x1*x2^2");
        assert_eq!(p("x2 - 1 + x1^2", &v).to_string(), "x1^2 + x2 - 1");
        assert_eq!(p("(1+r2)*x1 - 1/2*x2", &v).to_string(), "(1 + r2)*x1 - 1/2*x2");
        assert_eq!(Poly::zero(&v).to_string(), "0");
    }

    #[test]
    fn exact_division() {
        let pv = VarSet::indexed("p", &[2, 2]).unwrap();
        assert_eq!(p("p1^2", &pv).div_exact(&p("p1", &pv)).unwrap(), p("p1", &pv));
        match p("p1^2 + 1", &pv).div_exact(&p("p1", &pv)) {
            Err(PolyError::NotDivisible { remainder }) => assert_eq!(*remainder, p("1", &pv)),
            other => panic!("unexpected {other:?}"),
        }
        let a = p("p1^3 - 2*p1*p2 + r3*p2^2", &pv);
        let b = p("p1 - r2*p2", &pv);
        assert_eq!((&a * &b).div_exact(&b).unwrap(), a);
    }

    #[test]
    fn weighted_homogeneity() {
        let pv = VarSet::indexed("p", &[2, 2, 3, 3, 4]).unwrap();
        let f = p("p3*p4 + p4^2 + 9*p1*p5", &pv);
        assert!(f.is_homogeneous());
        assert_eq!(f.weighted_degree(), Some(6));
        assert!(!p("p1 + p3", &pv).is_homogeneous());
        assert_eq!(p("p1 + p3 + p2", &pv).homogeneous_components().len(), 2);
    }

    #[test]
    fn primitive_part_drops_positive_content() {
        let lv = VarSet::indexed("l", &[1, 1]).unwrap();
        let (c, q) = p("36*l1^3 - 36*l2^2", &lv).primitive_part();
        assert_eq!(c, FieldElem::from_int(36));
        assert_eq!(q, p("l1^3 - l2^2", &lv));
        let (c, q) = p("-4*l1", &lv).primitive_part();
        assert_eq!(c, FieldElem::from_int(4));
        assert_eq!(q, p("-l1", &lv));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn poly3() -> impl Strategy<Value = Poly> {
            let v = VarSet::indexed("y", &[1, 1, 1]).unwrap();
            proptest::collection::vec(((-5i64..5, 0i64..3), (0u16..3, 0u16..3, 0u16..3)), 0..5).prop_map(move |ts| {
                let mut f = Poly::zero(&v);
                for ((c, r), (a, b, d)) in ts {
                    let coeff = if r == 0 {
                        FieldElem::from_int(c)
                    } else {
                        &FieldElem::from_int(c) * &FieldElem::sqrt3()
                    };
                    f = &f + &Poly::monomial(&v, coeff, &[a, b, d]);
                }
                f
            })
        }

        fn point() -> impl Strategy<Value = Vec<FieldElem>> {
            proptest::collection::vec((-4i64..4, 1i64..4).prop_map(|(a, b)| FieldElem::from_frac(a, b)), 3)
        }

        proptest! {
            #[test]
            fn leibniz_and_linearity(f in poly3(), g in poly3()) {
                for i in 0..3 {
                    prop_assert_eq!((&f * &g).diff_at(i), &(&f.diff_at(i) * &g) + &(&f * &g.diff_at(i)));
                    prop_assert_eq!((&f + &g).diff_at(i), &f.diff_at(i) + &g.diff_at(i));
                }
            }

            #[test]
            fn eval_commutes_with_subst(f in poly3(), a in poly3(), b in poly3(), c in poly3(), x in point()) {
                let v = f.vars().clone();
                let composed = f.subst(&[a.clone(), b.clone(), c.clone()], &v).unwrap();
                let inner = vec![a.eval_at(&x).unwrap(), b.eval_at(&x).unwrap(), c.eval_at(&x).unwrap()];
                prop_assert_eq!(composed.eval_at(&x).unwrap(), f.eval_at(&inner).unwrap());
            }

            #[test]
            fn text_roundtrip(f in poly3()) {
                let back = Poly::parse(&f.to_string(), f.vars()).unwrap();
                prop_assert_eq!(back, f);
            }
        }
    }
}
