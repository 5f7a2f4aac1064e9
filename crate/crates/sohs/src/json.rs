//! Versioned JSON forms for the file-facing types: module presentations,
//! Gram certificates, separating states, and point evaluations.
//!
//! Every document carries `"format"` and `"version"` fields and refuses to
//! parse under a different format name or a newer version. Rational values
//! are decimal strings (arbitrary precision survives the round trip);
//! floating-point certificates are serialized through their exact dyadic
//! rational lift, so they also round-trip bit-exactly.
//!
//! ```text
//! module       {"format":"sohs.module","version":1,"n","t","generators":[MatrixPoly…]}
//! certificate  {"format":"sohs.certificate","version":1,"arithmetic":"rational"|"float",
//!               "n","t","degree",
//!               "parts":[{"generator":{"kind":"scalar","sigma":terms}
//!                                    |{"kind":"matrix","g":MatrixPoly},
//!                         "basis":[[exponents]…],"gram":[{"num","den"}…]}…],
//!               "free":[{"q":terms,"h":MatrixPoly}…]}
//! state        {"format":"sohs.state","version":1,"n","t","degree","mass",
//!               "moments":[{"monomial":[…],"k","l","value"}…]}
//! point        {"format":"sohs.point","version":1,"x":[…],"v":[…]}
//! ```

use std::collections::BTreeMap;
use std::str::FromStr;

use num::bigint::BigInt;
use num::{Signed, Zero};
use serde_json::{json, Value};

use crate::gram::{FreePart, GramCertificate, GramPart, ModulePresentation};
use crate::poly::{
    f64_to_rat_exact, get_usize, rat_to_f64, scalar_from_json, scalar_to_json, Coeff, Monomial,
    PolyError, QMatPoly, Rat,
};
use crate::states::{PointEvaluation, SeparatingState};

fn expect_envelope(v: &Value, format: &str) -> Result<(), PolyError> {
    match v.get("format").and_then(Value::as_str) {
        Some(f) if f == format => {}
        Some(f) => {
            return Err(PolyError::Malformed(format!("expected format {format:?}, found {f:?}")))
        }
        None => return Err(PolyError::Malformed(format!("missing format field {format:?}"))),
    }
    match v.get("version").and_then(Value::as_u64) {
        Some(1) => Ok(()),
        Some(n) => Err(PolyError::Malformed(format!("unsupported version {n}"))),
        None => Err(PolyError::Malformed("missing version field".into())),
    }
}

pub fn rat_to_json(r: &Rat) -> Value {
    json!({ "num": r.numer().to_string(), "den": r.denom().to_string() })
}

pub fn rat_from_json(v: &Value) -> Result<Rat, PolyError> {
    let field = |k: &str| -> Result<BigInt, PolyError> {
        match v.get(k) {
            Some(Value::String(s)) => {
                BigInt::from_str(s).map_err(|_| PolyError::Malformed(format!("bad {k}: {s}")))
            }
            Some(Value::Number(n)) if n.is_i64() => Ok(BigInt::from(n.as_i64().unwrap())),
            _ => Err(PolyError::Malformed(format!("value lacks {k}"))),
        }
    };
    let num = field("num")?;
    let den = field("den")?;
    if den.is_zero() {
        return Err(PolyError::Malformed("zero denominator".into()));
    }
    if den.is_negative() {
        return Err(PolyError::Malformed("denominator must be positive".into()));
    }
    Ok(Rat::new(num, den))
}

fn basis_json(basis: &[Monomial]) -> Value {
    Value::Array(basis.iter().map(|m| json!(m.exponents())).collect())
}

fn basis_from_json(v: &Value, n: usize) -> Result<Vec<Monomial>, PolyError> {
    let arr = v
        .as_array()
        .ok_or_else(|| PolyError::Malformed("basis is not an array".into()))?;
    let mut out = Vec::with_capacity(arr.len());
    for m in arr {
        let exps = m
            .as_array()
            .ok_or_else(|| PolyError::Malformed("basis monomial is not an array".into()))?;
        if exps.len() != n {
            return Err(PolyError::Malformed(format!(
                "basis monomial has {} exponents, expected {n}",
                exps.len()
            )));
        }
        let mut e = Vec::with_capacity(n);
        for x in exps {
            let val = x
                .as_u64()
                .ok_or_else(|| PolyError::Malformed("exponent is not an integer".into()))?;
            e.push(
                u32::try_from(val)
                    .map_err(|_| PolyError::Malformed("exponent too large".into()))?,
            );
        }
        out.push(Monomial::from_exponents(e));
    }
    Ok(out)
}

impl ModulePresentation {
    pub fn to_json(&self) -> Value {
        json!({
            "format": "sohs.module",
            "version": 1,
            "n": self.nvars(),
            "t": self.size(),
            "generators": self.generators().iter().map(QMatPoly::to_json).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self, PolyError> {
        expect_envelope(v, "sohs.module")?;
        let n = get_usize(v, "n")?;
        let t = get_usize(v, "t")?;
        let gens = v
            .get("generators")
            .and_then(Value::as_array)
            .ok_or_else(|| PolyError::Malformed("missing generators array".into()))?;
        let mut parsed = Vec::with_capacity(gens.len());
        for g in gens {
            parsed.push(QMatPoly::from_json(g)?);
        }
        ModulePresentation::new(n, t, parsed)
            .map_err(|e| PolyError::Malformed(e.to_string()))
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

fn cert_to_json<C: Coeff>(
    cert: &GramCertificate<C>,
    arithmetic: &str,
    lift: impl Fn(&C) -> Rat,
) -> Value {
    let parts: Vec<Value> = cert
        .parts
        .iter()
        .map(|p| match p {
            GramPart::Scalar { sigma, basis, gram } => json!({
                "generator": { "kind": "scalar", "sigma": scalar_to_json(sigma) },
                "basis": basis_json(basis),
                "gram": gram.iter().map(|c| rat_to_json(&lift(c))).collect::<Vec<_>>(),
            }),
            GramPart::Matrix { g, basis, gram } => json!({
                "generator": { "kind": "matrix", "g": g.to_json() },
                "basis": basis_json(basis),
                "gram": gram.iter().map(|c| rat_to_json(&lift(c))).collect::<Vec<_>>(),
            }),
        })
        .collect();
    let free: Vec<Value> = cert
        .free
        .iter()
        .map(|fp| {
            json!({
                "q": scalar_to_json(&fp.q),
                "h": fp.h.map_coeff(|c| lift(c)).to_json(),
            })
        })
        .collect();
    json!({
        "format": "sohs.certificate",
        "version": 1,
        "arithmetic": arithmetic,
        "n": cert.nvars,
        "t": cert.t,
        "degree": cert.degree,
        "parts": parts,
        "free": free,
    })
}

fn cert_from_json<C: Coeff>(
    v: &Value,
    arithmetic: &str,
    lower: impl Fn(&Rat) -> C,
) -> Result<GramCertificate<C>, PolyError> {
    expect_envelope(v, "sohs.certificate")?;
    match v.get("arithmetic").and_then(Value::as_str) {
        Some(a) if a == arithmetic => {}
        Some(a) => {
            return Err(PolyError::Malformed(format!(
                "certificate is {a:?}, expected {arithmetic:?}"
            )))
        }
        None => return Err(PolyError::Malformed("missing arithmetic field".into())),
    }
    let n = get_usize(v, "n")?;
    let t = get_usize(v, "t")?;
    if t == 0 {
        return Err(PolyError::Malformed("matrix size t must be positive".into()));
    }
    let degree = get_usize(v, "degree")? as u32;
    let parts_in = v
        .get("parts")
        .and_then(Value::as_array)
        .ok_or_else(|| PolyError::Malformed("missing parts array".into()))?;
    let mut parts = Vec::with_capacity(parts_in.len());
    for (i, p) in parts_in.iter().enumerate() {
        let basis = basis_from_json(
            p.get("basis")
                .ok_or_else(|| PolyError::Malformed(format!("part {i} lacks basis")))?,
            n,
        )?;
        let gen = p
            .get("generator")
            .ok_or_else(|| PolyError::Malformed(format!("part {i} lacks generator")))?;
        let kind = gen.get("kind").and_then(Value::as_str).unwrap_or("");
        let side = match kind {
            "scalar" => basis.len() * t,
            "matrix" => basis.len() * t * t,
            other => {
                return Err(PolyError::Malformed(format!(
                    "part {i} has unknown generator kind {other:?}"
                )))
            }
        };
        let gram_in = p
            .get("gram")
            .and_then(Value::as_array)
            .ok_or_else(|| PolyError::Malformed(format!("part {i} lacks gram array")))?;
        if gram_in.len() != side * side {
            return Err(PolyError::Malformed(format!(
                "part {i} gram has {} values, expected {}",
                gram_in.len(),
                side * side
            )));
        }
        let mut gram = Vec::with_capacity(gram_in.len());
        for g in gram_in {
            gram.push(lower(&rat_from_json(g)?));
        }
        match kind {
            "scalar" => {
                let sigma = scalar_from_json(
                    gen.get("sigma")
                        .ok_or_else(|| PolyError::Malformed(format!("part {i} lacks sigma")))?,
                    n,
                )?;
                parts.push(GramPart::Scalar { sigma, basis, gram });
            }
            _ => {
                let g = QMatPoly::from_json(
                    gen.get("g")
                        .ok_or_else(|| PolyError::Malformed(format!("part {i} lacks g")))?,
                )?;
                if g.size() != t || g.nvars() != n {
                    return Err(PolyError::Malformed(format!(
                        "part {i} generator shape mismatch"
                    )));
                }
                parts.push(GramPart::Matrix { g, basis, gram });
            }
        }
    }
    let free_in = v
        .get("free")
        .and_then(Value::as_array)
        .ok_or_else(|| PolyError::Malformed("missing free array".into()))?;
    let mut free = Vec::with_capacity(free_in.len());
    for (i, fp) in free_in.iter().enumerate() {
        let q = scalar_from_json(
            fp.get("q")
                .ok_or_else(|| PolyError::Malformed(format!("free part {i} lacks q")))?,
            n,
        )?;
        let h = QMatPoly::from_json(
            fp.get("h")
                .ok_or_else(|| PolyError::Malformed(format!("free part {i} lacks h")))?,
        )?;
        if h.size() != t || h.nvars() != n {
            return Err(PolyError::Malformed(format!("free part {i} shape mismatch")));
        }
        free.push(FreePart { q, h: h.map_coeff(|c| lower(c)) });
    }
    Ok(GramCertificate { nvars: n, t, degree, parts, free })
}

impl GramCertificate<Rat> {
    pub fn to_json(&self) -> Value {
        cert_to_json(self, "rational", Rat::clone)
    }

    pub fn from_json(v: &Value) -> Result<Self, PolyError> {
        cert_from_json(v, "rational", Rat::clone)
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

impl GramCertificate<f64> {
    pub fn to_json(&self) -> Value {
        cert_to_json(self, "float", |c| f64_to_rat_exact(*c))
    }

    pub fn from_json(v: &Value) -> Result<Self, PolyError> {
        cert_from_json(v, "float", rat_to_f64)
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

impl SeparatingState {
    pub fn to_json(&self) -> Value {
        let moments: Vec<Value> = self
            .moments()
            .map(|((m, k, l), val)| {
                json!({ "monomial": m.exponents(), "k": k, "l": l, "value": val })
            })
            .collect();
        json!({
            "format": "sohs.state",
            "version": 1,
            "n": self.nvars(),
            "t": self.matrix_side(),
            "degree": self.degree(),
            "mass": self.mass(),
            "moments": moments,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self, PolyError> {
        expect_envelope(v, "sohs.state")?;
        let n = get_usize(v, "n")?;
        let t = get_usize(v, "t")?;
        let degree = get_usize(v, "degree")? as u32;
        let mass = v
            .get("mass")
            .and_then(Value::as_f64)
            .ok_or_else(|| PolyError::Malformed("missing mass".into()))?;
        let moments_in = v
            .get("moments")
            .and_then(Value::as_array)
            .ok_or_else(|| PolyError::Malformed("missing moments array".into()))?;
        let mut values = BTreeMap::new();
        for m in moments_in {
            let exps = m
                .get("monomial")
                .and_then(Value::as_array)
                .ok_or_else(|| PolyError::Malformed("moment lacks monomial".into()))?;
            if exps.len() != n {
                return Err(PolyError::Malformed("moment monomial arity mismatch".into()));
            }
            let mut e = Vec::with_capacity(n);
            for x in exps {
                let val = x
                    .as_u64()
                    .ok_or_else(|| PolyError::Malformed("exponent is not an integer".into()))?;
                e.push(
                    u32::try_from(val)
                        .map_err(|_| PolyError::Malformed("exponent too large".into()))?,
                );
            }
            let k = get_usize(m, "k")?;
            let l = get_usize(m, "l")?;
            if k > l || l >= t {
                return Err(PolyError::Malformed(format!("bad moment position ({k}, {l})")));
            }
            let val = m
                .get("value")
                .and_then(Value::as_f64)
                .ok_or_else(|| PolyError::Malformed("moment lacks value".into()))?;
            values.insert((Monomial::from_exponents(e), k, l), val);
        }
        Ok(SeparatingState::from_parts(n, t, degree, mass, values))
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

impl PointEvaluation {
    pub fn to_json(&self) -> Value {
        json!({ "format": "sohs.point", "version": 1, "x": self.x, "v": self.v })
    }

    pub fn from_json(v: &Value) -> Result<Self, PolyError> {
        expect_envelope(v, "sohs.point")?;
        let read = |key: &str| -> Result<Vec<f64>, PolyError> {
            v.get(key)
                .and_then(Value::as_array)
                .ok_or_else(|| PolyError::Malformed(format!("missing {key} array")))?
                .iter()
                .map(|x| {
                    x.as_f64().ok_or_else(|| {
                        PolyError::Malformed(format!("{key} entry is not a number"))
                    })
                })
                .collect()
        };
        Ok(PointEvaluation { x: read("x")?, v: read("v")? })
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{monomials_up_to, rat, rat_int, MatrixPoly, ScalarPoly};

    fn sample_cert() -> GramCertificate<Rat> {
        let basis = monomials_up_to(1, 1);
        let side = basis.len() * 2;
        let mut gram = vec![rat_int(0); side * side];
        gram[0] = rat(7, 3);
        gram[side * side - 1] = rat(-1, 9);
        let x = ScalarPoly::<Rat>::var(1, 0);
        let g = MatrixPoly::scalar_identity(&ScalarPoly::one(1).sub(&x.square()), 2);
        let mgram = {
            let mside = basis.len() * 4;
            vec![rat(1, 2); mside * mside]
        };
        GramCertificate {
            nvars: 1,
            t: 2,
            degree: 1,
            parts: vec![
                GramPart::Scalar { sigma: ScalarPoly::one(1), basis: basis.clone(), gram },
                GramPart::Matrix { g, basis, gram: mgram },
            ],
            free: vec![FreePart {
                q: x.clone(),
                h: MatrixPoly::scalar_identity(&x, 2),
            }],
        }
    }

    #[test]
    fn module_round_trip() {
        let x = ScalarPoly::<Rat>::var(2, 0);
        let y = ScalarPoly::<Rat>::var(2, 1);
        let g = MatrixPoly::scalar_identity(&ScalarPoly::one(2).sub(&x.square()).sub(&y.square()), 3);
        let m = ModulePresentation::new(2, 3, vec![g]).unwrap();
        let s = m.to_json_string();
        let back = ModulePresentation::from_json_str(&s).unwrap();
        assert_eq!(back.nvars(), 2);
        assert_eq!(back.size(), 3);
        assert_eq!(back.generators(), m.generators());
        assert_eq!(back.to_json_string(), s);
    }

    #[test]
    fn rational_certificate_round_trip() {
        let cert = sample_cert();
        let s = cert.to_json_string();
        let back = GramCertificate::<Rat>::from_json_str(&s).unwrap();
        assert_eq!(back, cert);
        assert_eq!(back.to_json_string(), s);
    }

    #[test]
    fn float_certificate_round_trip_is_bit_exact() {
        let cert = sample_cert();
        let fcert = GramCertificate {
            nvars: cert.nvars,
            t: cert.t,
            degree: cert.degree,
            parts: cert
                .parts
                .iter()
                .map(|p| match p {
                    GramPart::Scalar { sigma, basis, gram } => GramPart::Scalar {
                        sigma: sigma.clone(),
                        basis: basis.clone(),
                        gram: gram.iter().map(|c| rat_to_f64(c) * 0.1).collect(),
                    },
                    GramPart::Matrix { g, basis, gram } => GramPart::Matrix {
                        g: g.clone(),
                        basis: basis.clone(),
                        gram: gram.iter().map(|c| rat_to_f64(c) * 0.1).collect(),
                    },
                })
                .collect(),
            free: cert
                .free
                .iter()
                .map(|fp| FreePart { q: fp.q.clone(), h: fp.h.map_coeff(|c| rat_to_f64(c)) })
                .collect(),
        };
        let s = fcert.to_json_string();
        let back = GramCertificate::<f64>::from_json_str(&s).unwrap();
        assert_eq!(back, fcert);
    }

    #[test]
    fn certificate_arithmetic_tags_are_enforced() {
        let cert = sample_cert();
        let v = cert.to_json();
        assert!(GramCertificate::<f64>::from_json(&v).is_err());
    }

    #[test]
    fn state_and_point_round_trips() {
        let state = SeparatingState::synthesize(&[0.25, -0.5], &[0.6, 0.8], 2);
        let s = state.to_json_string();
        let back = SeparatingState::from_json_str(&s).unwrap();
        assert_eq!(back.nvars(), state.nvars());
        assert_eq!(back.matrix_side(), state.matrix_side());
        assert_eq!(back.degree(), state.degree());
        let a: Vec<_> = state.moments().collect();
        let b: Vec<_> = back.moments().collect();
        assert_eq!(a, b);

        let p = PointEvaluation { x: vec![0.25, -0.5], v: vec![0.6, 0.8] };
        let s = p.to_json_string();
        let back = PointEvaluation::from_json_str(&s).unwrap();
        assert_eq!(back.x, p.x);
        assert_eq!(back.v, p.v);
    }

    #[test]
    fn envelopes_are_checked() {
        let x = ScalarPoly::<Rat>::var(1, 0);
        let m = ModulePresentation::new(1, 1, vec![MatrixPoly::from_scalar(x)]).unwrap();
        let mut v = m.to_json();
        *v.get_mut("format").unwrap() = json!("sohs.certificate");
        assert!(ModulePresentation::from_json(&v).is_err());
        let mut v = m.to_json();
        *v.get_mut("version").unwrap() = json!(2);
        assert!(ModulePresentation::from_json(&v).is_err());
    }
}
