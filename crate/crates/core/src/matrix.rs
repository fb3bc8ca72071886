//! Dense matrices over [`FieldElem`] and [`Poly`], plus the floating-point
//! spectral helpers used for rank and semidefiniteness tests.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::numfield::FieldElem;
use crate::poly::{Poly, PolyError, VarSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    Shape(usize, usize, usize, usize),
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("ragged rows")]
    Ragged,
    #[error("matrix is singular")]
    Singular,
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq, Eq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Matrix<T> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self, MatrixError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(MatrixError::Ragged);
        }
        Ok(Matrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn map<U: Clone>(&self, f: impl FnMut(&T) -> U) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn try_map<U: Clone, E>(&self, f: impl FnMut(&T) -> Result<U, E>) -> Result<Matrix<U>, E> {
        Ok(Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect::<Result<_, _>>()? })
    }

    /// Submatrix keeping the listed rows and columns.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Matrix::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]).clone())
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        self.data.iter().enumerate().map(move |(k, v)| (k / self.cols, k % self.cols, v))
    }
}

impl<T: Clone + PartialEq> Matrix<T> {
    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

impl<T: fmt::Display> fmt::Display for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.data[i * self.cols + j].to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl<T: fmt::Display> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{}\n{}", self.rows, self.cols, self)
    }
}

pub type FieldMatrix = Matrix<FieldElem>;
pub type PolyMatrix = Matrix<Poly>;

impl Matrix<FieldElem> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix::from_fn(rows, cols, |_, _| FieldElem::zero())
    }

    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, n, |i, j| if i == j { FieldElem::one() } else { FieldElem::zero() })
    }

    pub fn diag(d: &[FieldElem]) -> Self {
        Matrix::from_fn(d.len(), d.len(), |i, j| if i == j { d[i].clone() } else { FieldElem::zero() })
    }

    pub fn from_ints(rows: &[&[i64]]) -> Self {
        Matrix::from_rows(rows.iter().map(|r| r.iter().map(|&v| FieldElem::from_int(v)).collect()).collect())
            .expect("rectangular literal")
    }

    pub fn mul(&self, o: &Self) -> Result<Self, MatrixError> {
        if self.cols != o.rows {
            return Err(MatrixError::Shape(self.rows, self.cols, o.rows, o.cols));
        }
        Ok(Matrix::from_fn(self.rows, o.cols, |i, j| {
            let mut acc = FieldElem::zero();
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                acc += &(a * o.get(k, j));
            }
            acc
        }))
    }

    pub fn sub(&self, o: &Self) -> Result<Self, MatrixError> {
        if (self.rows, self.cols) != (o.rows, o.cols) {
            return Err(MatrixError::Shape(self.rows, self.cols, o.rows, o.cols));
        }
        Ok(Matrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j) - o.get(i, j)))
    }

    pub fn mul_vec(&self, v: &[FieldElem]) -> Vec<FieldElem> {
        assert_eq!(v.len(), self.cols, "vector length must match column count");
        (0..self.rows)
            .map(|i| {
                let mut acc = FieldElem::zero();
                for (a, b) in self.row(i).iter().zip(v) {
                    if !a.is_zero() && !b.is_zero() {
                        acc += &(a * b);
                    }
                }
                acc
            })
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.is_square() && self.entries().all(|(i, j, v)| if i == j { v.is_one() } else { v.is_zero() })
    }

    /// `MᵀM = I` exactly.
    pub fn is_orthogonal(&self) -> bool {
        self.is_square() && self.transpose().mul(self).map(|m| m.is_identity()).unwrap_or(false)
    }

    /// Reduced row echelon form and pivot columns.
    pub fn rref(&self) -> (Self, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| !m.get(i, c).is_zero()) else { continue };
            if p != r {
                for j in 0..m.cols {
                    m.data.swap(p * m.cols + j, r * m.cols + j);
                }
            }
            let inv = m.get(r, c).inv().expect("pivot is nonzero");
            for j in 0..m.cols {
                let v = m.get(r, j) * &inv;
                m.set(r, j, v);
            }
            for i in 0..m.rows {
                if i == r || m.get(i, c).is_zero() {
                    continue;
                }
                let f = m.get(i, c).clone();
                for j in 0..m.cols {
                    let rj = m.get(r, j);
                    if rj.is_zero() {
                        continue;
                    }
                    let v = m.get(i, j) - &(&f * rj);
                    m.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the right null space, one vector per free column, read off the RREF.
    pub fn nullspace(&self) -> Vec<Vec<FieldElem>> {
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![FieldElem::zero(); self.cols];
                v[f] = FieldElem::one();
                for (row, &pc) in pivots.iter().enumerate() {
                    v[pc] = -r.get(row, f);
                }
                v
            })
            .collect()
    }

    pub fn det(&self) -> Result<FieldElem, MatrixError> {
        if !self.is_square() {
            return Err(MatrixError::NotSquare(self.rows, self.cols));
        }
        let mut m = self.clone();
        let n = self.rows;
        let mut det = FieldElem::one();
        for c in 0..n {
            let Some(p) = (c..n).find(|&i| !m.get(i, c).is_zero()) else { return Ok(FieldElem::zero()) };
            if p != c {
                for j in 0..n {
                    m.data.swap(p * n + j, c * n + j);
                }
                det = -det;
            }
            let piv = m.get(c, c).clone();
            det = &det * &piv;
            let inv = piv.inv().expect("nonzero pivot");
            for i in c + 1..n {
                if m.get(i, c).is_zero() {
                    continue;
                }
                let f = m.get(i, c) * &inv;
                for j in c..n {
                    let v = m.get(i, j) - &(&f * m.get(c, j));
                    m.set(i, j, v);
                }
            }
        }
        Ok(det)
    }

    pub fn inverse(&self) -> Result<Self, MatrixError> {
        if !self.is_square() {
            return Err(MatrixError::NotSquare(self.rows, self.cols));
        }
        let n = self.rows;
        let aug = Matrix::from_fn(n, 2 * n, |i, j| {
            if j < n {
                self.get(i, j).clone()
            } else if j - n == i {
                FieldElem::one()
            } else {
                FieldElem::zero()
            }
        });
        let (r, pivots) = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return Err(MatrixError::Singular);
        }
        Ok(Matrix::from_fn(n, n, |i, j| r.get(i, n + j).clone()))
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).to_f64())
    }

    /// Linear substitution images `x_i ↦ Σ_j M_ij y_j` as polynomials in `target`.
    pub fn linear_images(&self, target: &Arc<VarSet>) -> Vec<Poly> {
        assert_eq!(self.cols, target.len(), "column count must match the target variable count");
        (0..self.rows)
            .map(|i| {
                let mut p = Poly::zero(target);
                for j in 0..self.cols {
                    let c = self.get(i, j);
                    if !c.is_zero() {
                        p = &p + &Poly::var_at(target, j).scale(c);
                    }
                }
                p
            })
            .collect()
    }
}

impl Matrix<Poly> {
    pub fn zeros_in(vars: &Arc<VarSet>, rows: usize, cols: usize) -> Self {
        Matrix::from_fn(rows, cols, |_, _| Poly::zero(vars))
    }

    pub fn mul(&self, o: &Self) -> Result<Self, MatrixError> {
        if self.cols != o.rows {
            return Err(MatrixError::Shape(self.rows, self.cols, o.rows, o.cols));
        }
        let vars = self.data.first().or(o.data.first()).map(|p| p.vars().clone()).unwrap_or_else(VarSet::empty);
        let mut out = Vec::with_capacity(self.rows * o.cols);
        for i in 0..self.rows {
            for j in 0..o.cols {
                let mut acc = Poly::zero(&vars);
                for k in 0..self.cols {
                    let a = self.get(i, k);
                    let b = o.get(k, j);
                    if a.is_zero() || b.is_zero() {
                        continue;
                    }
                    acc = acc.checked_add(&a.checked_mul(b)?)?;
                }
                out.push(acc);
            }
        }
        Ok(Matrix { rows: self.rows, cols: o.cols, data: out })
    }

    pub fn sub(&self, o: &Self) -> Result<Self, MatrixError> {
        if (self.rows, self.cols) != (o.rows, o.cols) {
            return Err(MatrixError::Shape(self.rows, self.cols, o.rows, o.cols));
        }
        let data = self.data.iter().zip(&o.data).map(|(a, b)| a.checked_sub(b)).collect::<Result<_, _>>()?;
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Poly::is_zero)
    }

    /// Substitute polynomial images for the entries' variables.
    pub fn subst(&self, images: &[Poly], target: &Arc<VarSet>) -> Result<Self, MatrixError> {
        Ok(self.try_map(|p| p.subst(images, target))?)
    }

    pub fn eval_f64(&self, point: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval_f64(point))
    }

    pub fn eval_exact(&self, point: &[FieldElem]) -> Result<FieldMatrix, MatrixError> {
        Ok(self.try_map(|p| p.eval_at(point))?)
    }

    /// Determinant by cofactor expansion along rows, memoized on the set of
    /// remaining columns.
    pub fn det(&self) -> Result<Poly, MatrixError> {
        if !self.is_square() {
            return Err(MatrixError::NotSquare(self.rows, self.cols));
        }
        let n = self.rows;
        assert!(n <= 20, "cofactor expansion limited to small matrices");
        let vars = self.data.first().map(|p| p.vars().clone()).unwrap_or_else(VarSet::empty);
        if n == 0 {
            return Ok(Poly::one(&vars));
        }
        let mut memo: HashMap<u32, Poly> = HashMap::new();
        Ok(self.minor_det(0, (1u32 << n) - 1, &vars, &mut memo))
    }

    fn minor_det(&self, row: usize, cols: u32, vars: &Arc<VarSet>, memo: &mut HashMap<u32, Poly>) -> Poly {
        if cols.count_ones() == 1 {
            return self.get(row, cols.trailing_zeros() as usize).clone();
        }
        if let Some(d) = memo.get(&cols) {
            return d.clone();
        }
        let mut acc = Poly::zero(vars);
        let mut sign_pos = true;
        for c in 0..self.cols {
            if cols & (1 << c) == 0 {
                continue;
            }
            let a = self.get(row, c);
            if !a.is_zero() {
                let sub = self.minor_det(row + 1, cols & !(1 << c), vars, memo);
                let term = a * &sub;
                acc = if sign_pos { &acc + &term } else { &acc - &term };
            }
            sign_pos = !sign_pos;
        }
        memo.insert(cols, acc.clone());
        acc
    }

    /// Leading principal minors `det M[..k, ..k]` for `k = 1..=n`.
    pub fn leading_principal_minors(&self) -> Result<Vec<Poly>, MatrixError> {
        if !self.is_square() {
            return Err(MatrixError::NotSquare(self.rows, self.cols));
        }
        (1..=self.rows)
            .map(|k| {
                let idx: Vec<usize> = (0..k).collect();
                self.select(&idx, &idx).det()
            })
            .collect()
    }
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Count of values above `rel·max|v|` with an absolute floor.
pub fn count_above(values: &[f64], rel: f64, floor: f64) -> usize {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let thr = (rel * scale).max(floor);
    values.iter().filter(|&&v| v > thr).count()
}

/// Numerical rank via singular values.
pub fn numeric_rank(m: &DMatrix<f64>, rel: f64, floor: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    count_above(&sv, rel, floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rref_and_nullspace() {
        let m = FieldMatrix::from_ints(&[&[1, 2, 3], &[2, 4, 6]]);
        assert_eq!(m.rank(), 1);
        let ns = m.nullspace();
        assert_eq!(ns.len(), 2);
        for v in &ns {
            assert!(m.mul_vec(v).iter().all(FieldElem::is_zero));
        }
    }

    #[test]
    fn exact_det_and_inverse() {
        let m = FieldMatrix::from_ints(&[&[2, 1], &[1, 1]]);
        assert_eq!(m.det().unwrap(), FieldElem::one());
        assert!(m.mul(&m.inverse().unwrap()).unwrap().is_identity());
        let s = FieldMatrix::from_ints(&[&[1, 2], &[2, 4]]);
        assert_eq!(s.inverse(), Err(MatrixError::Singular));
    }

    #[test]
    fn orthogonality() {
        let h = FieldElem::sqrt2() * FieldElem::from_frac(1, 2);
        let rot = FieldMatrix::from_rows(vec![vec![h.clone(), -&h], vec![h.clone(), h]]).unwrap();
        assert!(rot.is_orthogonal());
        assert!(!FieldMatrix::from_ints(&[&[1, 1], &[0, 1]]).is_orthogonal());
    }

    #[test]
    fn poly_det_matches_expansion() {
        let v = VarSet::indexed("a", &[1, 1, 1, 1]).unwrap();
        let e = |s: &str| Poly::parse(s, &v).unwrap();
        let m = PolyMatrix::from_rows(vec![vec![e("a1"), e("a2")], vec![e("a3"), e("a4")]]).unwrap();
        assert_eq!(m.det().unwrap(), e("a1*a4 - a2*a3"));
        let m3 = PolyMatrix::from_rows(vec![
            vec![e("a1"), e("0"), e("0")],
            vec![e("0"), e("a2"), e("a3")],
            vec![e("0"), e("a3"), e("a4")],
        ])
        .unwrap();
        assert_eq!(m3.det().unwrap(), e("a1*a2*a4 - a1*a3^2"));
        let minors = m3.leading_principal_minors().unwrap();
        assert_eq!(minors[1], e("a1*a2"));
    }

    #[test]
    fn poly_det_agrees_with_exact_det_at_points() {
        let v = VarSet::indexed("a", &[1, 1]).unwrap();
        let e = |s: &str| Poly::parse(s, &v).unwrap();
        let m = PolyMatrix::from_rows(vec![
            vec![e("a1 + 1"), e("a2"), e("r2")],
            vec![e("a2"), e("a1^2"), e("a1 - a2")],
            vec![e("r2"), e("a1 - a2"), e("3")],
        ])
        .unwrap();
        let d = m.det().unwrap();
        for (x, y) in [(1, 2), (-3, 1), (0, 5)] {
            let pt = vec![FieldElem::from_int(x), FieldElem::from_int(y)];
            assert_eq!(d.eval_at(&pt).unwrap(), m.eval_exact(&pt).unwrap().det().unwrap());
        }
    }

    #[test]
    fn numeric_rank_and_eigen() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(numeric_rank(&m, 1e-9, 1e-12), 1);
        let ev = sym_eigenvalues(&m);
        assert!(ev[0].abs() < 1e-12 && (ev[1] - 2.0).abs() < 1e-12);
        assert_eq!(count_above(&ev, 1e-9, 1e-12), 1);
    }
}
