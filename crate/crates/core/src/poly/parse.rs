//! Recursive-descent reader for polynomial text.
//!
//! Accepts everything the printer emits plus parentheses, `/` by nonzero
//! constants, `^` with non-negative integer exponents, and decimal literals
//! (read exactly). The identifiers `r2`, `r3`, `r6` denote square roots.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::Zero;

use super::{Poly, PolyError, VarSet};
use crate::numfield::{FieldElem, Rational};

pub(super) fn parse_poly(text: &str, vars: &Arc<VarSet>) -> Result<Poly, PolyError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, vars };
    let out = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(out)
}

/// Parse a constant expression such as `-1/2`, `(1 + r2)` or `3*r6/4`.
pub fn parse_constant(text: &str) -> Result<FieldElem, PolyError> {
    let vars = VarSet::empty();
    let p = parse_poly(text, &vars)?;
    Ok(p.as_constant().expect("no variables, so the value is constant"))
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a Arc<VarSet>,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> PolyError {
        PolyError::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Poly, PolyError> {
        let mut acc = match self.peek() {
            Some(b'+') => {
                self.pos += 1;
                self.term()?
            }
            Some(b'-') => {
                self.pos += 1;
                -&self.term()?
            }
            _ => self.term()?,
        };
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = &acc + &self.term()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Poly, PolyError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = &acc * &self.unary()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    let at = self.pos;
                    let d = self.unary()?;
                    let c = d.as_constant().ok_or(PolyError::Parse {
                        pos: at,
                        msg: "division is only allowed by constants".into(),
                    })?;
                    let inv = c.inv().map_err(|_| PolyError::Parse { pos: at, msg: "division by zero".into() })?;
                    acc = acc.scale(&inv);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Poly, PolyError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-&self.unary()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Poly, PolyError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.err("expected a non-negative integer exponent"));
            }
            let e: u32 = std::str::from_utf8(&self.src[start..self.pos])
                .expect("ascii digits")
                .parse()
                .map_err(|_| PolyError::Parse { pos: start, msg: "exponent too large".into() })?;
            if e > u16::MAX as u32 {
                return Err(PolyError::Parse { pos: start, msg: "exponent too large".into() });
            }
            return Ok(base.pow(e));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Poly, PolyError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let r = self.number()?;
                Ok(Poly::constant(self.vars, FieldElem::from_rational(r)))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii identifier");
                match name {
                    "r2" => Ok(Poly::constant(self.vars, FieldElem::sqrt2())),
                    "r3" => Ok(Poly::constant(self.vars, FieldElem::sqrt3())),
                    "r6" => Ok(Poly::constant(self.vars, FieldElem::sqrt6())),
                    _ => match self.vars.index_of(name) {
                        Some(i) => Ok(Poly::var_at(self.vars, i)),
                        None => Err(PolyError::UnknownVariable(name.to_string())),
                    },
                }
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Rational, PolyError> {
        let start = self.pos;
        let mut int_digits = String::new();
        let mut frac_digits = String::new();
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            int_digits.push(self.src[self.pos] as char);
            self.pos += 1;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                frac_digits.push(self.src[self.pos] as char);
                self.pos += 1;
            }
        }
        if int_digits.is_empty() && frac_digits.is_empty() {
            return Err(PolyError::Parse { pos: start, msg: "malformed number".into() });
        }
        let mut exp10: i64 = 0;
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            let mut sign = 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'-' || self.src[self.pos] == b'+') {
                if self.src[self.pos] == b'-' {
                    sign = -1;
                }
                self.pos += 1;
            }
            let es = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if es == self.pos {
                self.pos = save;
            } else {
                let e: i64 = std::str::from_utf8(&self.src[es..self.pos])
                    .expect("ascii digits")
                    .parse()
                    .map_err(|_| PolyError::Parse { pos: es, msg: "exponent too large".into() })?;
                exp10 = sign * e;
            }
        }
        let digits = format!("{int_digits}{frac_digits}");
        let mantissa: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().expect("digits") };
        let shift = exp10 - frac_digits.len() as i64;
        if shift.unsigned_abs() > 4096 {
            return Err(PolyError::Parse { pos: start, msg: "number out of range".into() });
        }
        let ten = BigInt::from(10);
        let scale = num_traits::pow(ten, shift.unsigned_abs() as usize);
        Ok(if shift >= 0 {
            Rational::from_integer(mantissa * scale)
        } else {
            Rational::new(mantissa, scale)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numfield::rat;

    #[test]
    fn constants() {
        assert_eq!(parse_constant("-1/2").unwrap(), FieldElem::from_frac(-1, 2));
        assert_eq!(parse_constant("0.25").unwrap(), FieldElem::from_frac(1, 4));
        assert_eq!(parse_constant("1e-3").unwrap(), FieldElem::from_frac(1, 1000));
        assert_eq!(parse_constant("r2*r3").unwrap(), FieldElem::sqrt6());
        assert_eq!(
            parse_constant("(1 + r2)").unwrap(),
            FieldElem::new(rat(1, 1), rat(1, 1), rat(0, 1), rat(0, 1))
        );
        assert_eq!("3*r6/4".parse::<FieldElem>().unwrap().to_string(), "3/4*r6");
    }

    #[test]
    fn errors() {
        let v = VarSet::indexed("x", &[1, 1]).unwrap();
        assert_eq!(parse_poly("x3", &v), Err(PolyError::UnknownVariable("x3".into())));
        assert!(matches!(parse_poly("x1/x2", &v), Err(PolyError::Parse { .. })));
        assert!(matches!(parse_poly("x1 +", &v), Err(PolyError::Parse { .. })));
        assert!(matches!(parse_poly("(x1", &v), Err(PolyError::Parse { .. })));
        assert!(matches!(parse_poly("x1 x2", &v), Err(PolyError::Parse { .. })));
        assert!(matches!(parse_poly("1/0", &v), Err(PolyError::Parse { .. })));
    }

    #[test]
    fn nested_expressions() {
        let v = VarSet::indexed("x", &[1, 1]).unwrap();
        let a = parse_poly("(x1 + x2)^2 - 2*x1*x2", &v).unwrap();
        assert_eq!(a, parse_poly("x1^2 + x2^2", &v).unwrap());
        let b = parse_poly("-(x1 - 3)/2", &v).unwrap();
        assert_eq!(b, parse_poly("3/2 - 1/2*x1", &v).unwrap());
    }
}
