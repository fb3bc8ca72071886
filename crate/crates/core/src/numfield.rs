//! Exact arithmetic in the biquadratic field Q(√2, √3).
//!
//! Every element is stored as `a + b·√2 + c·√3 + d·√6` with arbitrary
//! precision rational components. The representation is unique, so equality
//! is componentwise.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Reduced fraction with arbitrary-precision numerator and positive denominator.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("division by zero in Q(√2,√3)")]
    DivisionByZero,
}

const SQRT2: f64 = std::f64::consts::SQRT_2;
const SQRT3: f64 = 1.732_050_807_568_877_2;
const SQRT6: f64 = 2.449_489_742_783_178;

/// Radical attached to each component slot.
pub const RADICAL_TOKENS: [&str; 4] = ["", "r2", "r3", "r6"];

/// An element `a + b√2 + c√3 + d√6` of Q(√2, √3).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FieldElem {
    c: [Rational; 4],
}

/// Rational from a pair of machine integers.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Element `a + b√2` of the intermediate field Q(√2), used by inversion and sign.
#[derive(Clone)]
struct Sqrt2Elem {
    a: Rational,
    b: Rational,
}

impl Sqrt2Elem {
    fn mul(&self, o: &Self) -> Self {
        let two = Rational::from_integer(2.into());
        Sqrt2Elem {
            a: &self.a * &o.a + two * &self.b * &o.b,
            b: &self.a * &o.b + &self.b * &o.a,
        }
    }

    fn sub(&self, o: &Self) -> Self {
        Sqrt2Elem { a: &self.a - &o.a, b: &self.b - &o.b }
    }

    fn scale(&self, s: &Rational) -> Self {
        Sqrt2Elem { a: &self.a * s, b: &self.b * s }
    }

    fn conj(&self) -> Self {
        Sqrt2Elem { a: self.a.clone(), b: -&self.b }
    }

    fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    /// `a² − 2b²`, the norm down to Q.
    fn norm(&self) -> Rational {
        let two = Rational::from_integer(2.into());
        &self.a * &self.a - two * &self.b * &self.b
    }

    fn signum(&self) -> i32 {
        let sa = rat_sign(&self.a);
        let sb = rat_sign(&self.b);
        if sb == 0 {
            return sa;
        }
        if sa == 0 || sa == sb {
            return if sa == 0 { sb } else { sa };
        }
        sa * rat_sign(&self.norm())
    }

    fn inv(&self) -> Self {
        let n = self.norm();
        let ninv = n.recip();
        self.conj().scale(&ninv)
    }
}

fn rat_sign(r: &Rational) -> i32 {
    if r.is_zero() {
        0
    } else if r.is_positive() {
        1
    } else {
        -1
    }
}

impl FieldElem {
    pub fn zero() -> Self {
        FieldElem { c: [Rational::zero(), Rational::zero(), Rational::zero(), Rational::zero()] }
    }

    pub fn one() -> Self {
        Self::from_rational(Rational::one())
    }

    pub fn from_rational(r: Rational) -> Self {
        let mut e = Self::zero();
        e.c[0] = r;
        e
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rational(Rational::from_integer(n.into()))
    }

    pub fn from_frac(num: i64, den: i64) -> Self {
        Self::from_rational(rat(num, den))
    }

    /// Build `a + b√2 + c√3 + d√6`.
    pub fn new(a: Rational, b: Rational, c: Rational, d: Rational) -> Self {
        FieldElem { c: [a, b, c, d] }
    }

    pub fn sqrt2() -> Self {
        Self::new(Rational::zero(), Rational::one(), Rational::zero(), Rational::zero())
    }

    pub fn sqrt3() -> Self {
        Self::new(Rational::zero(), Rational::zero(), Rational::one(), Rational::zero())
    }

    pub fn sqrt6() -> Self {
        Self::new(Rational::zero(), Rational::zero(), Rational::zero(), Rational::one())
    }

    /// Component `i` in the basis (1, √2, √3, √6).
    pub fn component(&self, i: usize) -> &Rational {
        &self.c[i]
    }

    pub fn components(&self) -> &[Rational; 4] {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(Zero::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.c[0].is_one() && self.c[1..].iter().all(Zero::is_zero)
    }

    pub fn is_rational(&self) -> bool {
        self.c[1..].iter().all(Zero::is_zero)
    }

    /// The rational value, if the element lies in Q.
    pub fn as_rational(&self) -> Option<&Rational> {
        self.is_rational().then_some(&self.c[0])
    }

    /// Number of nonzero components.
    pub fn support(&self) -> usize {
        self.c.iter().filter(|r| !r.is_zero()).count()
    }

    pub fn scale_rational(&self, s: &Rational) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        FieldElem {
            c: [&self.c[0] * s, &self.c[1] * s, &self.c[2] * s, &self.c[3] * s],
        }
    }

    /// Multiplicative inverse, computed by conjugation down the tower
    /// Q ⊂ Q(√2) ⊂ Q(√2,√3).
    pub fn inv(&self) -> Result<Self, FieldError> {
        if self.is_zero() {
            return Err(FieldError::DivisionByZero);
        }
        if let Some(r) = self.as_rational() {
            return Ok(Self::from_rational(r.recip()));
        }
        // self = alpha + beta·√3 with alpha, beta in Q(√2)
        let alpha = Sqrt2Elem { a: self.c[0].clone(), b: self.c[1].clone() };
        let beta = Sqrt2Elem { a: self.c[2].clone(), b: self.c[3].clone() };
        let three = Rational::from_integer(3.into());
        let n = alpha.mul(&alpha).sub(&beta.mul(&beta).scale(&three));
        let ninv = n.inv();
        let re = alpha.mul(&ninv);
        let im = beta.mul(&ninv);
        Ok(FieldElem { c: [re.a, re.b, -im.a, -im.b] })
    }

    /// Exact sign (-1, 0 or 1) of the real number this element denotes.
    pub fn signum(&self) -> i32 {
        let alpha = Sqrt2Elem { a: self.c[0].clone(), b: self.c[1].clone() };
        let beta = Sqrt2Elem { a: self.c[2].clone(), b: self.c[3].clone() };
        let sa = alpha.signum();
        let sb = beta.signum();
        if beta.is_zero() {
            return sa;
        }
        if alpha.is_zero() {
            return sb;
        }
        if sa == sb {
            return sa;
        }
        let three = Rational::from_integer(3.into());
        let n = alpha.mul(&alpha).sub(&beta.mul(&beta).scale(&three));
        sa * n.signum()
    }

    pub fn abs(&self) -> Self {
        if self.signum() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    pub fn to_f64(&self) -> f64 {
        let f = |r: &Rational| r.to_f64().unwrap_or(f64::NAN);
        let mut acc = 0.0;
        if !self.c[0].is_zero() {
            acc += f(&self.c[0]);
        }
        if !self.c[1].is_zero() {
            acc += f(&self.c[1]) * SQRT2;
        }
        if !self.c[2].is_zero() {
            acc += f(&self.c[2]) * SQRT3;
        }
        if !self.c[3].is_zero() {
            acc += f(&self.c[3]) * SQRT6;
        }
        acc
    }

    /// Exact square root when the element is a nonnegative rational of the
    /// form `k·s²` with `k ∈ {1, 2, 3, 6}`.
    pub fn sqrt_exact(&self) -> Option<Self> {
        let r = self.as_rational()?;
        if r.is_negative() {
            return None;
        }
        if r.is_zero() {
            return Some(Self::zero());
        }
        for (slot, k) in [(0usize, 1i64), (1, 2), (2, 3), (3, 6)] {
            let q = r / Rational::from_integer(k.into());
            if let Some(s) = rational_sqrt(&q) {
                let mut e = Self::zero();
                e.c[slot] = s;
                return Some(e);
            }
        }
        None
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }
}

fn rational_sqrt(q: &Rational) -> Option<Rational> {
    let n = q.numer();
    let d = q.denom();
    let sn = n.sqrt();
    let sd = d.sqrt();
    (&sn * &sn == *n && &sd * &sd == *d).then(|| Rational::new(sn, sd))
}

impl Default for FieldElem {
    fn default() -> Self {
        Self::zero()
    }
}

impl From<i64> for FieldElem {
    fn from(n: i64) -> Self {
        Self::from_int(n)
    }
}

impl From<Rational> for FieldElem {
    fn from(r: Rational) -> Self {
        Self::from_rational(r)
    }
}

fn mul_into(out: &mut [Rational; 4], a: &[Rational; 4], b: &[Rational; 4]) {
    // basis products: e_i e_j = factor * e_k
    const TABLE: [[(usize, i64); 4]; 4] = [
        [(0, 1), (1, 1), (2, 1), (3, 1)],
        [(1, 1), (0, 2), (3, 1), (2, 2)],
        [(2, 1), (3, 1), (0, 3), (1, 3)],
        [(3, 1), (2, 2), (1, 3), (0, 6)],
    ];
    for i in 0..4 {
        if a[i].is_zero() {
            continue;
        }
        for j in 0..4 {
            if b[j].is_zero() {
                continue;
            }
            let (k, f) = TABLE[i][j];
            let p = &a[i] * &b[j];
            if f == 1 {
                out[k] += p;
            } else {
                out[k] += p * Rational::from_integer(f.into());
            }
        }
    }
}

impl<'a> Mul<&'a FieldElem> for &'a FieldElem {
    type Output = FieldElem;
    fn mul(self, rhs: &'a FieldElem) -> FieldElem {
        // fast path for the common rational case
        if self.is_rational() {
            return rhs.scale_rational(&self.c[0]);
        }
        if rhs.is_rational() {
            return self.scale_rational(&rhs.c[0]);
        }
        let mut out = FieldElem::zero();
        mul_into(&mut out.c, &self.c, &rhs.c);
        out
    }
}

impl<'a> Add<&'a FieldElem> for &'a FieldElem {
    type Output = FieldElem;
    fn add(self, rhs: &'a FieldElem) -> FieldElem {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl<'a> Sub<&'a FieldElem> for &'a FieldElem {
    type Output = FieldElem;
    fn sub(self, rhs: &'a FieldElem) -> FieldElem {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl<'a> AddAssign<&'a FieldElem> for FieldElem {
    fn add_assign(&mut self, rhs: &'a FieldElem) {
        for i in 0..4 {
            if !rhs.c[i].is_zero() {
                self.c[i] += &rhs.c[i];
            }
        }
    }
}

impl<'a> SubAssign<&'a FieldElem> for FieldElem {
    fn sub_assign(&mut self, rhs: &'a FieldElem) {
        for i in 0..4 {
            if !rhs.c[i].is_zero() {
                self.c[i] -= &rhs.c[i];
            }
        }
    }
}

impl<'a> MulAssign<&'a FieldElem> for FieldElem {
    fn mul_assign(&mut self, rhs: &'a FieldElem) {
        *self = &*self * rhs;
    }
}

impl Neg for &FieldElem {
    type Output = FieldElem;
    fn neg(self) -> FieldElem {
        FieldElem { c: [-&self.c[0], -&self.c[1], -&self.c[2], -&self.c[3]] }
    }
}

impl Neg for FieldElem {
    type Output = FieldElem;
    fn neg(self) -> FieldElem {
        -&self
    }
}

/// Panics on a zero divisor; use [`FieldElem::inv`] for the fallible form.
impl<'a> Div<&'a FieldElem> for &'a FieldElem {
    type Output = FieldElem;
    fn div(self, rhs: &'a FieldElem) -> FieldElem {
        self * &rhs.inv().expect("division by zero in Q(√2,√3)")
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<FieldElem> for FieldElem {
            type Output = FieldElem;
            fn $m(self, rhs: FieldElem) -> FieldElem {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a FieldElem> for FieldElem {
            type Output = FieldElem;
            fn $m(self, rhs: &'a FieldElem) -> FieldElem {
                (&self).$m(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

/// Renders a rational as `n` or `n/d`.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Renders `|r|·token` for a single component, e.g. `2*r3`, `r3`, `1/2*r6`.
pub(crate) fn format_component_abs(r: &Rational, slot: usize) -> String {
    let a = r.abs();
    if slot == 0 {
        return format_rational(&a);
    }
    if a.is_one() {
        RADICAL_TOKENS[slot].to_string()
    } else {
        format!("{}*{}", format_rational(&a), RADICAL_TOKENS[slot])
    }
}

impl fmt::Display for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<usize> = (0..4).filter(|&i| !self.c[i].is_zero()).collect();
        if parts.is_empty() {
            return write!(f, "0");
        }
        let mut s = String::new();
        for (n, &i) in parts.iter().enumerate() {
            let neg = self.c[i].is_negative();
            if n == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            s.push_str(&format_component_abs(&self.c[i], i));
        }
        if parts.len() > 1 {
            write!(f, "({s})")
        } else {
            write!(f, "{s}")
        }
    }
}

impl fmt::Debug for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldElem({self})")
    }
}

impl FromStr for FieldElem {
    type Err = crate::poly::PolyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        crate::poly::parse_constant(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fe(a: i64, b: i64, c: i64, d: i64) -> FieldElem {
        FieldElem::new(rat(a, 1), rat(b, 1), rat(c, 1), rat(d, 1))
    }

    #[test]
    fn addition_examples() {
        assert_eq!(&FieldElem::one() + &FieldElem::zero(), FieldElem::one());
        assert_eq!(&FieldElem::sqrt3() + &FieldElem::sqrt3(), fe(0, 0, 2, 0));
        assert_eq!(&fe(1, 1, 0, 0) + &fe(1, -1, 0, 0), FieldElem::from_int(2));
    }

    #[test]
    fn multiplication_table() {
        let (r2, r3, r6) = (FieldElem::sqrt2(), FieldElem::sqrt3(), FieldElem::sqrt6());
        assert_eq!(&r2 * &r3, r6);
        assert_eq!(&r6 * &r6, FieldElem::from_int(6));
        assert_eq!(&r2 * &r6, fe(0, 0, 2, 0));
        assert_eq!(&r3 * &r6, fe(0, 3, 0, 0));
        assert_eq!(&fe(1, 0, 1, 0) * &fe(1, 0, -1, 0), FieldElem::from_int(-2));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(FieldElem::from_int(2).inv().unwrap(), FieldElem::from_frac(1, 2));
        let inv3 = FieldElem::sqrt3().inv().unwrap();
        assert_eq!(inv3, FieldElem::new(rat(0, 1), rat(0, 1), rat(1, 3), rat(0, 1)));
        let u = fe(1, 1, 0, 0);
        let v = u.inv().unwrap();
        assert_eq!(v, fe(-1, 1, 0, 0));
        assert_eq!(&u * &v, FieldElem::one());
        assert_eq!(FieldElem::zero().inv(), Err(FieldError::DivisionByZero));
    }

    #[test]
    fn inverse_full_support() {
        let u = FieldElem::new(rat(3, 2), rat(-1, 1), rat(2, 5), rat(7, 3));
        assert_eq!(&u * &u.inv().unwrap(), FieldElem::one());
    }

    #[test]
    fn float_values() {
        assert_eq!(FieldElem::one().to_f64(), 1.0);
        assert!((FieldElem::sqrt3().to_f64() - 1.7320508075688772).abs() < 1e-15);
        assert!((fe(2, 0, 0, 1).to_f64() - 4.449489742783178).abs() < 1e-14);
    }

    #[test]
    fn exact_sign() {
        // 3 - 2√2 > 0, 1 - √2 < 0, √3 - √2 > 0, 5 - 2√6 > 0, √6 - √2 - √3 > 0 ... (2.449 - 3.146) < 0
        assert_eq!(fe(3, -2, 0, 0).signum(), 1);
        assert_eq!(fe(1, -1, 0, 0).signum(), -1);
        assert_eq!(fe(0, -1, 1, 0).signum(), 1);
        assert_eq!(fe(5, 0, 0, -2).signum(), 1);
        assert_eq!(fe(0, -1, -1, 1).signum(), -1);
        assert_eq!(FieldElem::zero().signum(), 0);
    }

    #[test]
    fn exact_square_roots() {
        assert_eq!(FieldElem::from_int(8).sqrt_exact(), Some(fe(0, 2, 0, 0)));
        assert_eq!(FieldElem::from_frac(3, 4).sqrt_exact().unwrap().to_f64(), 0.75f64.sqrt());
        assert_eq!(FieldElem::from_int(5).sqrt_exact(), None);
    }

    #[test]
    fn display_tokens() {
        assert_eq!(fe(0, 0, -2, 0).to_string(), "-2*r3");
        assert_eq!(FieldElem::from_frac(-4, 3).to_string(), "-4/3");
        assert_eq!(fe(1, 1, 0, 0).to_string(), "(1 + r2)");
        assert_eq!(FieldElem::zero().to_string(), "0");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn elem() -> impl Strategy<Value = FieldElem> {
            proptest::array::uniform4((-20i64..20, 1i64..6)).prop_map(|c| {
                FieldElem::new(rat(c[0].0, c[0].1), rat(c[1].0, c[1].1), rat(c[2].0, c[2].1), rat(c[3].0, c[3].1))
            })
        }

        proptest! {
            #[test]
            fn field_axioms(a in elem(), b in elem(), c in elem()) {
                prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
                prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
                prop_assert_eq!(&a * &b, &b * &a);
                prop_assert_eq!(&a + &b, &b + &a);
                prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            }

            #[test]
            fn inverse_is_involution(a in elem()) {
                prop_assume!(!a.is_zero());
                let inv = a.inv().unwrap();
                prop_assert_eq!(&a * &inv, FieldElem::one());
                prop_assert_eq!(inv.inv().unwrap(), a);
            }

            #[test]
            fn float_homomorphism(a in elem(), b in elem()) {
                let exact = (&a * &b).to_f64();
                let approx = a.to_f64() * b.to_f64();
                // conditioning scale: the product of the components' absolute contributions
                let mag = |u: &FieldElem| {
                    let w = [1.0, SQRT2, SQRT3, SQRT6];
                    (0..4).map(|i| u.component(i).to_f64().unwrap().abs() * w[i]).sum::<f64>()
                };
                let scale = (mag(&a) * mag(&b)).max(1e-300);
                prop_assert!((exact - approx).abs() <= 1e-12 * scale);
            }

            #[test]
            fn sign_agrees_with_float(a in elem()) {
                let f = a.to_f64();
                if f.abs() > 1e-9 {
                    prop_assert_eq!(a.signum(), if f > 0.0 { 1 } else { -1 });
                }
            }
        }
    }
}
