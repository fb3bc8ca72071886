//! Orthogonal representations, the O(3) action on ℝ⁸ by (traceless
//! symmetric tensor, vector), fixed-point subspaces and Reynolds averaging.

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::matrix::{FieldMatrix, MatrixError};
use crate::numfield::FieldElem;
use crate::poly::{Poly, PolyError, VarSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroupError {
    #[error("matrix {0} is not orthogonal")]
    NotOrthogonal(usize),
    #[error("expected {expected}x{expected} matrices, got {got_rows}x{got_cols}")]
    Dimension { expected: usize, got_rows: usize, got_cols: usize },
    #[error("element list is not closed under multiplication")]
    NotAGroup,
    #[error("group closure exceeded {0} elements")]
    TooLarge(usize),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Finitely generated group of orthogonal `n×n` matrices.
#[derive(Debug, Clone)]
pub struct OrthRep {
    n: usize,
    generators: Vec<FieldMatrix>,
    label: String,
}

impl OrthRep {
    pub fn new(label: impl Into<String>, n: usize, generators: Vec<FieldMatrix>) -> Result<Self, GroupError> {
        for (k, g) in generators.iter().enumerate() {
            if g.nrows() != n || g.ncols() != n {
                return Err(GroupError::Dimension { expected: n, got_rows: g.nrows(), got_cols: g.ncols() });
            }
            if !g.is_orthogonal() {
                return Err(GroupError::NotOrthogonal(k));
            }
        }
        Ok(OrthRep { n, generators, label: label.into() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[FieldMatrix] {
        &self.generators
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Product of `len` generators (or their transposes) picked at random.
    pub fn random_element<R: Rng>(&self, rng: &mut R, len: usize) -> FieldMatrix {
        let mut g = FieldMatrix::identity(self.n);
        if self.generators.is_empty() {
            return g;
        }
        for _ in 0..len {
            let h = &self.generators[rng.gen_range(0..self.generators.len())];
            let h = if rng.gen_bool(0.5) { h.transpose() } else { h.clone() };
            g = g.mul(&h).expect("square matrices of equal size");
        }
        g
    }
}

/// `Q(x)` for the first five coordinates.
fn q_of(x: &[FieldElem]) -> FieldMatrix {
    let s2h = FieldElem::sqrt2() * FieldElem::from_frac(1, 2);
    let s6 = FieldElem::sqrt6();
    let q11 = -(&s6 * &FieldElem::from_frac(1, 3)) * &x[0];
    let a = &(&s6 * &FieldElem::from_frac(1, 6)) * &x[0];
    let b = &s2h * &x[1];
    let q22 = &a - &b;
    let q33 = &a + &b;
    let q12 = &s2h * &x[2];
    let q13 = &s2h * &x[3];
    let q23 = &s2h * &x[4];
    FieldMatrix::from_rows(vec![
        vec![q11, q12.clone(), q13.clone()],
        vec![q12, q22, q23.clone()],
        vec![q13, q23, q33],
    ])
    .expect("3x3")
}

/// Inverse of [`q_of`] on traceless symmetric matrices.
fn x_of_q(q: &FieldMatrix) -> [FieldElem; 5] {
    let s2 = FieldElem::sqrt2();
    let s2h = &s2 * &FieldElem::from_frac(1, 2);
    let s6h = FieldElem::sqrt6() * FieldElem::from_frac(1, 2);
    [
        -(&s6h * q.get(0, 0)),
        &s2h * &(q.get(2, 2) - q.get(1, 1)),
        &s2 * q.get(0, 1),
        &s2 * q.get(0, 2),
        &s2 * q.get(1, 2),
    ]
}

/// The 8×8 matrix by which `O ∈ O(3)` acts on (x1,…,x8) through
/// `Q ↦ OQOᵀ` on the first five coordinates and `P ↦ OP` on the last three.
pub fn rep_from_o3(o: &FieldMatrix) -> Result<FieldMatrix, GroupError> {
    if o.nrows() != 3 || o.ncols() != 3 {
        return Err(GroupError::Dimension { expected: 3, got_rows: o.nrows(), got_cols: o.ncols() });
    }
    if !o.is_orthogonal() {
        return Err(GroupError::NotOrthogonal(0));
    }
    let ot = o.transpose();
    let mut out = FieldMatrix::zeros(8, 8);
    for k in 0..5 {
        let mut e = vec![FieldElem::zero(); 5];
        e[k] = FieldElem::one();
        let q2 = o.mul(&q_of(&e))?.mul(&ot)?;
        for (i, v) in x_of_q(&q2).into_iter().enumerate() {
            out.set(i, k, v);
        }
    }
    for k in 0..3 {
        for i in 0..3 {
            out.set(5 + i, 5 + k, o.get(i, k).clone());
        }
    }
    Ok(out)
}

/// Generators of a dense subgroup of O(3) with entries in ℚ(√2,√3):
/// a transposition, a 3-cycle, a reflection, rotations by 45° and 30°,
/// and a rotation of infinite order with cosine 3/5.
pub fn o3_generators() -> Vec<FieldMatrix> {
    let z = FieldElem::zero;
    let o = FieldElem::one;
    let h2 = || FieldElem::sqrt2() * FieldElem::from_frac(1, 2);
    let h3 = || FieldElem::sqrt3() * FieldElem::from_frac(1, 2);
    let half = || FieldElem::from_frac(1, 2);
    let m = |rows: Vec<Vec<FieldElem>>| FieldMatrix::from_rows(rows).expect("3x3");
    vec![
        FieldMatrix::from_ints(&[&[0, 1, 0], &[1, 0, 0], &[0, 0, 1]]),
        FieldMatrix::from_ints(&[&[0, 0, 1], &[1, 0, 0], &[0, 1, 0]]),
        FieldMatrix::from_ints(&[&[-1, 0, 0], &[0, 1, 0], &[0, 0, 1]]),
        m(vec![vec![h2(), -h2(), z()], vec![h2(), h2(), z()], vec![z(), z(), o()]]),
        m(vec![vec![o(), z(), z()], vec![z(), h3(), -half()], vec![z(), half(), h3()]]),
        m(vec![
            vec![FieldElem::from_frac(3, 5), z(), FieldElem::from_frac(-4, 5)],
            vec![z(), o(), z()],
            vec![FieldElem::from_frac(4, 5), z(), FieldElem::from_frac(3, 5)],
        ]),
    ]
}

/// SO(3) generators: the proper rotations above plus the product of the
/// reflection with the transposition.
pub fn so3_generators() -> Vec<FieldMatrix> {
    let g = o3_generators();
    vec![g[1].clone(), g[3].clone(), g[4].clone(), g[5].clone(), g[2].mul(&g[0]).expect("3x3")]
}

/// The image of O(3) in O(8).
pub fn o3_on_r8() -> OrthRep {
    let gens = o3_generators().iter().map(|o| rep_from_o3(o).expect("orthogonal")).collect();
    OrthRep::new("O(3) on R^8", 8, gens).expect("images of orthogonal matrices are orthogonal")
}

/// The image of SO(3) in O(8).
pub fn so3_on_r8() -> OrthRep {
    let gens = so3_generators().iter().map(|o| rep_from_o3(o).expect("orthogonal")).collect();
    OrthRep::new("SO(3) on R^8", 8, gens).expect("images of orthogonal matrices are orthogonal")
}

/// Joint fixed space of a set of matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedSpace {
    pub ambient: usize,
    pub basis: Vec<Vec<FieldElem>>,
    /// False when some basis vector has a norm outside the field; the basis
    /// is then only orthogonal.
    pub normalized: bool,
}

impl FixedSpace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Coordinates spanned, when every basis vector is a unit coordinate vector.
    pub fn coordinate_axes(&self) -> Option<Vec<usize>> {
        self.basis
            .iter()
            .map(|v| {
                let nz: Vec<usize> = (0..v.len()).filter(|&i| !v[i].is_zero()).collect();
                (nz.len() == 1 && v[nz[0]].is_one()).then_some(nz[0])
            })
            .collect()
    }
}

/// Vectors fixed by every `h`, by exact elimination on the stacked `h − I`.
pub fn fixed_space(h_gens: &[FieldMatrix], n: usize) -> Result<FixedSpace, GroupError> {
    let id = FieldMatrix::identity(n);
    let mut rows: Vec<Vec<FieldElem>> = Vec::new();
    for h in h_gens {
        if h.nrows() != n || h.ncols() != n {
            return Err(GroupError::Dimension { expected: n, got_rows: h.nrows(), got_cols: h.ncols() });
        }
        let d = h.sub(&id)?;
        for i in 0..n {
            rows.push(d.row(i).to_vec());
        }
    }
    let raw = if rows.is_empty() {
        (0..n)
            .map(|i| {
                let mut v = vec![FieldElem::zero(); n];
                v[i] = FieldElem::one();
                v
            })
            .collect()
    } else {
        FieldMatrix::from_rows(rows)?.nullspace()
    };
    let (basis, normalized) = orthonormalize(raw);
    Ok(FixedSpace { ambient: n, basis, normalized })
}

fn dot(a: &[FieldElem], b: &[FieldElem]) -> FieldElem {
    let mut acc = FieldElem::zero();
    for (x, y) in a.iter().zip(b) {
        if !x.is_zero() && !y.is_zero() {
            acc += &(x * y);
        }
    }
    acc
}

/// Exact Gram–Schmidt; normalizes when every squared norm has a square root
/// in the field.
fn orthonormalize(vs: Vec<Vec<FieldElem>>) -> (Vec<Vec<FieldElem>>, bool) {
    let mut out: Vec<Vec<FieldElem>> = Vec::new();
    for v in vs {
        let mut w = v;
        for u in &out {
            let c = &dot(&w, u) * &dot(u, u).inv().expect("nonzero vector");
            if c.is_zero() {
                continue;
            }
            for (wi, ui) in w.iter_mut().zip(u) {
                *wi -= &(&c * ui);
            }
        }
        out.push(w);
    }
    let norms: Vec<Option<FieldElem>> = out.iter().map(|u| dot(u, u).sqrt_exact()).collect();
    if norms.iter().all(Option::is_some) {
        let scaled = out
            .iter()
            .zip(norms)
            .map(|(u, n)| {
                let inv = n.expect("checked").inv().expect("nonzero norm");
                u.iter().map(|x| x * &inv).collect()
            })
            .collect();
        (scaled, true)
    } else {
        (out, false)
    }
}

/// `f(g·x)` as a polynomial in the same variables.
pub fn act_on_poly(g: &FieldMatrix, f: &Poly) -> Result<Poly, GroupError> {
    let vars = f.vars();
    if g.nrows() != vars.len() {
        return Err(GroupError::Dimension { expected: vars.len(), got_rows: g.nrows(), got_cols: g.ncols() });
    }
    Ok(f.subst(&g.linear_images(vars), vars)?)
}

/// Exact check `f∘g = f` for every generator; for a generated group this is
/// equivalent to invariance under the whole group.
pub fn invariant_under(gens: &[FieldMatrix], f: &Poly) -> Result<bool, GroupError> {
    for g in gens {
        if act_on_poly(g, f)? != *f {
            return Ok(false);
        }
    }
    Ok(true)
}

/// All products of the generators.
pub fn close_group(gens: &[FieldMatrix], n: usize, limit: usize) -> Result<Vec<FieldMatrix>, GroupError> {
    let mut elems = vec![FieldMatrix::identity(n)];
    let mut frontier = elems.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for a in &frontier {
            for g in gens {
                let p = a.mul(g)?;
                if !elems.contains(&p) {
                    if elems.len() >= limit {
                        return Err(GroupError::TooLarge(limit));
                    }
                    elems.push(p.clone());
                    next.push(p);
                }
            }
        }
        frontier = next;
    }
    Ok(elems)
}

/// Closure under products (a nonempty finite closed set of invertible
/// matrices is a group).
pub fn check_group(elems: &[FieldMatrix]) -> Result<(), GroupError> {
    if elems.is_empty() {
        return Err(GroupError::NotAGroup);
    }
    for a in elems {
        for b in elems {
            if !elems.contains(&a.mul(b)?) {
                return Err(GroupError::NotAGroup);
            }
        }
    }
    Ok(())
}

/// `(1/|K|) Σ_g f∘g` over an explicit element list.
pub fn reynolds_avg(elems: &[FieldMatrix], f: &Poly) -> Result<Poly, GroupError> {
    check_group(elems)?;
    let mut acc = Poly::zero(f.vars());
    for g in elems {
        acc = &acc + &act_on_poly(g, f)?;
    }
    Ok(acc.scale(&FieldElem::from_frac(1, elems.len() as i64)))
}

/// Outcome of a randomized invariance test.
#[derive(Debug, Clone, PartialEq)]
pub enum InvarianceVerdict {
    Invariant { trials: usize },
    Counterexample { g: FieldMatrix, x: Vec<FieldElem>, at_x: FieldElem, at_gx: FieldElem },
}

impl InvarianceVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, InvarianceVerdict::Invariant { .. })
    }
}

/// Random rational point with coordinates in `[-bound, bound]` and
/// denominators up to `den`.
pub fn random_rational_point<R: Rng>(rng: &mut R, n: usize, bound: i64, den: i64) -> Vec<FieldElem> {
    (0..n)
        .map(|_| {
            let d = rng.gen_range(1..=den);
            FieldElem::from_frac(rng.gen_range(-bound * d..=bound * d), d)
        })
        .collect()
}

/// Compare `f(g·x)` with `f(x)` exactly for random group words and points.
pub fn orbit_invariance_check<R: Rng>(
    rep: &OrthRep,
    f: &Poly,
    trials: usize,
    rng: &mut R,
) -> Result<InvarianceVerdict, GroupError> {
    if f.vars().len() != rep.dim() {
        return Err(GroupError::Dimension { expected: rep.dim(), got_rows: f.vars().len(), got_cols: 1 });
    }
    for _ in 0..trials {
        let g = rep.random_element(rng, 4);
        let x = random_rational_point(rng, rep.dim(), 3, 5);
        let gx = g.mul_vec(&x);
        let at_x = f.eval_at(&x)?;
        let at_gx = f.eval_at(&gx)?;
        if at_x != at_gx {
            return Ok(InvarianceVerdict::Counterexample { g, x, at_x, at_gx });
        }
    }
    Ok(InvarianceVerdict::Invariant { trials })
}

/// The x-variables x1…x8.
pub fn x_vars() -> Arc<VarSet> {
    VarSet::indexed("x", &[1; 8]).expect("valid names")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(d: &[i64]) -> FieldMatrix {
        FieldMatrix::diag(&d.iter().map(|&v| FieldElem::from_int(v)).collect::<Vec<_>>())
    }

    #[test]
    fn rep_examples() {
        assert!(rep_from_o3(&FieldMatrix::identity(3)).unwrap().is_identity());
        assert_eq!(rep_from_o3(&diag(&[-1, -1, -1])).unwrap(), diag(&[1, 1, 1, 1, 1, -1, -1, -1]));
        assert_eq!(rep_from_o3(&diag(&[-1, 1, 1])).unwrap(), diag(&[1, 1, -1, -1, 1, -1, 1, 1]));
        assert_eq!(
            rep_from_o3(&FieldMatrix::from_ints(&[&[1, 1, 0], &[0, 1, 0], &[0, 0, 1]])),
            Err(GroupError::NotOrthogonal(0))
        );
    }

    #[test]
    fn rep_is_a_homomorphism() {
        let gens = o3_generators();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let a = &gens[rng.gen_range(0..gens.len())];
            let b = &gens[rng.gen_range(0..gens.len())];
            let c = &gens[rng.gen_range(0..gens.len())];
            let ab = a.mul(b).unwrap().mul(c).unwrap();
            let lhs = rep_from_o3(&ab).unwrap();
            let rhs = rep_from_o3(a).unwrap().mul(&rep_from_o3(b).unwrap()).unwrap().mul(&rep_from_o3(c).unwrap()).unwrap();
            assert_eq!(lhs, rhs);
            assert!(lhs.is_orthogonal());
        }
    }

    #[test]
    fn generators_are_orthogonal_and_so3_is_proper() {
        for g in o3_generators() {
            assert!(g.is_orthogonal());
        }
        for g in so3_generators() {
            assert_eq!(g.det().unwrap(), FieldElem::one());
        }
    }

    #[test]
    fn fixed_space_examples() {
        let v = fixed_space(&[diag(&[1, 1, -1, -1, 1, -1, 1, 1])], 8).unwrap();
        assert_eq!(v.coordinate_axes(), Some(vec![0, 1, 4, 6, 7]));
        assert_eq!(fixed_space(&[FieldMatrix::identity(8)], 8).unwrap().dim(), 8);
        let h: Vec<FieldMatrix> =
            [diag(&[1, -1, 1]), diag(&[1, 1, -1])].iter().map(|o| rep_from_o3(o).unwrap()).collect();
        let v = fixed_space(&h, 8).unwrap();
        assert_eq!(v.coordinate_axes(), Some(vec![0, 1, 5]));
        for b in &v.basis {
            for g in &h {
                assert_eq!(&g.mul_vec(b), b);
            }
        }
    }

    #[test]
    fn fixed_space_orthonormalizes_skew_lines() {
        let swap = FieldMatrix::from_ints(&[&[0, 1], &[1, 0]]);
        let v = fixed_space(&[swap], 2).unwrap();
        assert_eq!(v.dim(), 1);
        assert!(v.normalized);
        assert_eq!(dot(&v.basis[0], &v.basis[0]), FieldElem::one());
    }

    #[test]
    fn reynolds_examples() {
        let x = VarSet::uniform(&["x"]).unwrap();
        let pm = vec![FieldMatrix::identity(1), diag(&[-1])];
        assert!(reynolds_avg(&pm, &Poly::parse("x", &x).unwrap()).unwrap().is_zero());

        let v3 = VarSet::uniform(&["x1", "x2", "x6"]).unwrap();
        let klein = close_group(&[diag(&[1, -1, 1]), diag(&[1, 1, -1])], 3, 64).unwrap();
        assert_eq!(klein.len(), 4);
        let f = Poly::parse("x2^2", &v3).unwrap();
        assert_eq!(reynolds_avg(&klein, &f).unwrap(), f);

        let v2 = VarSet::uniform(&["x1", "x2"]).unwrap();
        let r3 = FieldElem::sqrt3() * FieldElem::from_frac(1, 2);
        let h = FieldElem::from_frac(1, 2);
        let a = FieldMatrix::from_rows(vec![vec![-&h, r3.clone()], vec![r3.clone(), h.clone()]]).unwrap();
        let b = FieldMatrix::from_rows(vec![vec![-&h, -&r3], vec![r3, -&h]]).unwrap();
        let a2 = close_group(&[a, b], 2, 64).unwrap();
        assert_eq!(a2.len(), 6);
        let avg = reynolds_avg(&a2, &Poly::parse("x1^2", &v2).unwrap()).unwrap();
        assert_eq!(avg, Poly::parse("1/2*x1^2 + 1/2*x2^2", &v2).unwrap());
        // brute-force oracle: average the six images by hand-evaluated substitution
        let mut acc = Poly::zero(&v2);
        for g in &a2 {
            let img = &g.linear_images(&v2)[0];
            acc = &acc + &(img * img);
        }
        assert_eq!(acc.scale(&FieldElem::from_frac(1, 6)), avg);
        assert!(invariant_under(&a2, &avg).unwrap());
    }

    #[test]
    fn not_a_group_is_rejected() {
        let x = VarSet::uniform(&["x"]).unwrap();
        let bad = vec![diag(&[-1])];
        assert_eq!(reynolds_avg(&bad, &Poly::parse("x", &x).unwrap()), Err(GroupError::NotAGroup));
    }

    #[test]
    fn invariance_checks() {
        let xv = x_vars();
        let rep = o3_on_r8();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p1 = Poly::parse("x1^2+x2^2+x3^2+x4^2+x5^2+x6^2+x7^2+x8^2", &xv).unwrap();
        assert!(orbit_invariance_check(&rep, &p1, 20, &mut rng).unwrap().passed());
        let p3 = Poly::parse(
            "-2*r3*x1^3 + 6*r3*x1*x2^2 - 3*r3*x1*x3^2 - 9*x2*x3^2 - 3*r3*x1*x4^2 + 9*x2*x4^2 + 18*x3*x4*x5 + 6*r3*x1*x5^2",
            &xv,
        )
        .unwrap();
        assert!(orbit_invariance_check(&rep, &p3, 10, &mut rng).unwrap().passed());
        assert!(invariant_under(rep.generators(), &p3).unwrap());
        let x1 = Poly::parse("x1", &xv).unwrap();
        assert!(!orbit_invariance_check(&rep, &x1, 20, &mut rng).unwrap().passed());
    }
}
