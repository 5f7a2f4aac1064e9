//! JSON form of matrix polynomials.
//!
//! ```text
//! {
//!   "n": 2, "t": 2,
//!   "entries": [ [ [ {"monomial": [1, 0], "num": "1", "den": "2"}, ... ],  // row 0
//!                 [ ... ] ],
//!               [ ... ] ]
//! }
//! ```
//!
//! `entries[i][j]` is the term list of the (i, j) entry in graded-lex order.
//! Numerator and denominator are decimal strings so that arbitrary-precision
//! values survive the round trip bit-exactly. Floating-point polynomials are
//! serialized through their exact rational lift.

use super::coeff::Rat;
use super::matrix::MatrixPoly;
use super::monomial::Monomial;
use super::scalar::ScalarPoly;
use super::PolyError;
use num::bigint::BigInt;
use num::{Signed, Zero};
use serde_json::{json, Value};
use std::str::FromStr;

impl MatrixPoly<Rat> {
    pub fn to_json(&self) -> Value {
        let mut rows = Vec::with_capacity(self.size());
        for i in 0..self.size() {
            let mut row = Vec::with_capacity(self.size());
            for j in 0..self.size() {
                let terms: Vec<Value> = self
                    .entry(i, j)
                    .terms()
                    .map(|(m, c)| {
                        json!({
                            "monomial": m.exponents(),
                            "num": c.numer().to_string(),
                            "den": c.denom().to_string(),
                        })
                    })
                    .collect();
                row.push(Value::Array(terms));
            }
            rows.push(Value::Array(row));
        }
        json!({ "n": self.nvars(), "t": self.size(), "entries": rows })
    }

    pub fn from_json(v: &Value) -> Result<Self, PolyError> {
        let n = get_usize(v, "n")?;
        let t = get_usize(v, "t")?;
        if t == 0 {
            return Err(PolyError::Malformed("matrix size t must be positive".into()));
        }
        let entries = v
            .get("entries")
            .and_then(Value::as_array)
            .ok_or_else(|| PolyError::Malformed("missing entries array".into()))?;
        if entries.len() != t {
            return Err(PolyError::Malformed(format!(
                "expected {t} rows, found {}",
                entries.len()
            )));
        }
        let mut out = MatrixPoly::zero(n, t);
        for (i, row) in entries.iter().enumerate() {
            let row = row
                .as_array()
                .ok_or_else(|| PolyError::Malformed(format!("row {i} is not an array")))?;
            if row.len() != t {
                return Err(PolyError::Malformed(format!(
                    "row {i} has {} entries, expected {t}",
                    row.len()
                )));
            }
            for (j, cell) in row.iter().enumerate() {
                *out.entry_mut(i, j) = scalar_from_json(cell, n)?;
            }
        }
        Ok(out)
    }

    pub fn to_json_string(&self) -> String {
        self.to_json().to_string()
    }

    pub fn from_json_str(s: &str) -> Result<Self, PolyError> {
        let v: Value =
            serde_json::from_str(s).map_err(|e| PolyError::Malformed(e.to_string()))?;
        Self::from_json(&v)
    }
}

impl MatrixPoly<f64> {
    pub fn to_json(&self) -> Value {
        self.to_rat_exact().to_json()
    }
}

/// Term-list JSON for a scalar polynomial, the same shape as one matrix
/// entry cell.
pub fn scalar_to_json(p: &ScalarPoly<Rat>) -> Value {
    let terms: Vec<Value> = p
        .terms()
        .map(|(m, c)| {
            json!({
                "monomial": m.exponents(),
                "num": c.numer().to_string(),
                "den": c.denom().to_string(),
            })
        })
        .collect();
    Value::Array(terms)
}

pub(crate) fn get_usize(v: &Value, key: &str) -> Result<usize, PolyError> {
    v.get(key)
        .and_then(Value::as_u64)
        .map(|x| x as usize)
        .ok_or_else(|| PolyError::Malformed(format!("missing or invalid field {key:?}")))
}

pub fn scalar_from_json(cell: &Value, n: usize) -> Result<ScalarPoly<Rat>, PolyError> {
    let terms = cell
        .as_array()
        .ok_or_else(|| PolyError::Malformed("entry is not a term array".into()))?;
    let mut p = ScalarPoly::zero(n);
    for term in terms {
        let exps = term
            .get("monomial")
            .and_then(Value::as_array)
            .ok_or_else(|| PolyError::Malformed("term lacks monomial".into()))?;
        if exps.len() != n {
            return Err(PolyError::Malformed(format!(
                "monomial has {} exponents, expected {n}",
                exps.len()
            )));
        }
        let mut e = Vec::with_capacity(n);
        for x in exps {
            let v = x
                .as_u64()
                .ok_or_else(|| PolyError::Malformed("exponent is not an integer".into()))?;
            e.push(u32::try_from(v).map_err(|_| PolyError::Malformed("exponent too large".into()))?);
        }
        let num = big_from(term, "num")?;
        let den = big_from(term, "den")?;
        if den.is_zero() {
            return Err(PolyError::Malformed("zero denominator".into()));
        }
        if den.is_negative() {
            return Err(PolyError::Malformed("denominator must be positive".into()));
        }
        p.add_term(Monomial::from_exponents(e), Rat::new(num, den));
    }
    Ok(p)
}

fn big_from(term: &Value, key: &str) -> Result<BigInt, PolyError> {
    match term.get(key) {
        Some(Value::String(s)) => {
            BigInt::from_str(s).map_err(|_| PolyError::Malformed(format!("bad {key}: {s}")))
        }
        // Accept plain JSON integers for hand-written inputs.
        Some(Value::Number(n)) if n.is_i64() => Ok(BigInt::from(n.as_i64().unwrap())),
        _ => Err(PolyError::Malformed(format!("term lacks {key}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::super::coeff::{rat, Rat};
    use super::*;
    use num::bigint::BigInt;
    use std::str::FromStr;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut f: MatrixPoly<Rat> = MatrixPoly::zero(2, 2);
        f.entry_mut(0, 0).add_term(Monomial::from_exponents(vec![3, 1]), rat(-7, 3));
        // A coefficient too large for any machine integer.
        let huge = Rat::new(
            BigInt::from_str("123456789012345678901234567890").unwrap(),
            BigInt::from_str("9876543210987654321").unwrap(),
        );
        f.entry_mut(1, 0).add_term(Monomial::one(2), huge);
        *f.entry_mut(1, 1) = ScalarPoly::constant(2, rat(1, 2));

        let s = f.to_json_string();
        let back = MatrixPoly::from_json_str(&s).unwrap();
        assert_eq!(back, f);
        // Serialization is canonical, so a second pass is byte-identical.
        assert_eq!(back.to_json_string(), s);
    }

    #[test]
    fn float_polynomials_serialize_exactly() {
        let mut f: MatrixPoly<f64> = MatrixPoly::zero(1, 1);
        f.entry_mut(0, 0).add_term(Monomial::from_exponents(vec![2]), 0.1);
        let v = f.to_json();
        let back = MatrixPoly::<Rat>::from_json(&v).unwrap();
        let c = back.entry(0, 0).coeff(&Monomial::from_exponents(vec![2]));
        assert_eq!(num::ToPrimitive::to_f64(&c).unwrap(), 0.1);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(MatrixPoly::<Rat>::from_json_str("{}").is_err());
        let bad_den = r#"{"n":1,"t":1,"entries":[[[{"monomial":[0],"num":"1","den":"0"}]]]}"#;
        assert!(MatrixPoly::<Rat>::from_json_str(bad_den).is_err());
        let bad_arity = r#"{"n":2,"t":1,"entries":[[[{"monomial":[1],"num":"1","den":"1"}]]]}"#;
        assert!(MatrixPoly::<Rat>::from_json_str(bad_arity).is_err());
    }
}
