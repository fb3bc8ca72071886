//! Text and JSON-lines rendering with fixed float precision.

use std::fmt::Write;

/// `%g`-style formatting with `digits` significant digits.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" { "0".into() } else { s }
    } else {
        format!("{:.*e}", digits - 1, x)
    }
}

pub fn fmt_vec(v: &[f64], digits: usize) -> String {
    format!("({})", v.iter().map(|x| fmt_sig(*x, digits)).collect::<Vec<_>>().join(", "))
}

/// Minimal JSON value; numbers print with 17 significant digits.
#[derive(Debug, Clone)]
pub enum J {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<J>),
    Obj(Vec<(&'static str, J)>),
}

impl J {
    pub fn s(v: impl Into<String>) -> J {
        J::Str(v.into())
    }

    pub fn nums(v: &[f64]) -> J {
        J::Arr(v.iter().map(|x| J::Num(*x)).collect())
    }

    pub fn opt_s(v: Option<&str>) -> J {
        v.map_or(J::Null, J::s)
    }

    fn write(&self, out: &mut String) {
        match self {
            J::Null => out.push_str("null"),
            J::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            J::Int(i) => {
                let _ = write!(out, "{i}");
            }
            J::Num(x) if x.is_finite() => {
                let _ = write!(out, "{x:.16e}");
            }
            J::Num(_) => out.push_str("null"),
            J::Str(s) => out.push_str(&serde_json::to_string(s).expect("strings serialize")),
            J::Arr(items) => {
                out.push('[');
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    it.write(out);
                }
                out.push(']');
            }
            J::Obj(fields) => {
                out.push('{');
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push_str(&serde_json::to_string(k).expect("strings serialize"));
                    out.push(':');
                    v.write(out);
                }
                out.push('}');
            }
        }
    }

    pub fn line(&self) -> String {
        let mut s = String::new();
        self.write(&mut s);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(6.928203230275509, 6), "6.9282");
        assert_eq!(fmt_sig(4.0, 6), "4");
        assert_eq!(fmt_sig(-0.25, 6), "-0.25");
        assert_eq!(fmt_sig(1.5e-9, 6), "1.50000e-9");
        assert_eq!(fmt_sig(123456789.0, 6), "1.23457e8");
        assert_eq!(fmt_sig(-1e-300 * 1e-300, 6), "0");
    }

    #[test]
    fn json_numbers_keep_seventeen_digits() {
        let j = J::Obj(vec![("x", J::Num(0.1)), ("s", J::s("a\"b")), ("n", J::Num(f64::NAN))]);
        assert_eq!(j.line(), r#"{"x":1.0000000000000001e-1,"s":"a\"b","n":null}"#);
        let back: serde_json::Value = serde_json::from_str(&j.line()).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }
}
