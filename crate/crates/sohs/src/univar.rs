//! Factorization of univariate symmetric matrix polynomials that are
//! positive semidefinite on the whole real line.
//!
//! A PSD-on-ℝ matrix polynomial f of even degree D admits f = gᵀg with a
//! rectangular g of at most t·(D/2 + 1) rows. The factor is found by the
//! unconstrained Gram relaxation at degree D/2, which is exactly feasible
//! for such f, followed by a PSD factorization of the Gram matrix.

use std::collections::BTreeMap;

use crate::certify::char_poly;
use crate::gram::{
    build_membership_sdp, rational_ldl, rationalize, GramError, GramPart, ModulePresentation,
    RationalizeOptions,
};
use crate::linalg::{min_eig, psd_factor, LinalgError, SymMat};
use crate::poly::{rat_to_f64, FMatPoly, MatrixPoly, Monomial, QMatPoly, QPoly, Rat, ScalarPoly};
use crate::sdp::{solve, SdpOutcome, SdpSettings};
use crate::states::{purify_ray, SeparatingState};

#[derive(Debug, thiserror::Error)]
pub enum UnivarError {
    #[error("expected a univariate matrix polynomial, got {nvars} variables")]
    NotUnivariate { nvars: usize },
    #[error("input matrix polynomial must be symmetric")]
    NotSymmetric,
    #[error("not positive semidefinite on the line: min eigenvalue {min_eig:.6e} at z = {z:.6}")]
    NotPsdOnLine { z: f64, min_eig: f64 },
    #[error("factorization stage failed: {0}")]
    SolverFailed(String),
    #[error(transparent)]
    Gram(#[from] GramError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Rectangular matrix polynomial, used for factors g with more rows than
/// columns. Entries are row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RectPoly<C: crate::poly::Coeff> {
    rows: usize,
    cols: usize,
    entries: Vec<ScalarPoly<C>>,
}

impl<C: crate::poly::Coeff> RectPoly<C> {
    pub fn from_rows(nvars: usize, cols: usize, rows: Vec<Vec<ScalarPoly<C>>>) -> Self {
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for row in &rows {
            assert_eq!(row.len(), cols, "rows have unequal length");
            for p in row {
                assert_eq!(p.nvars(), nvars, "entries disagree on variable count");
                entries.push(p.clone());
            }
        }
        RectPoly { rows: rows.len(), cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> &ScalarPoly<C> {
        &self.entries[i * self.cols + j]
    }

    /// gᵀg as a square matrix polynomial.
    pub fn gram_product(&self, nvars: usize) -> MatrixPoly<C> {
        let mut out = MatrixPoly::zero(nvars, self.cols);
        for i in 0..self.cols {
            for j in 0..self.cols {
                let mut acc = ScalarPoly::zero(nvars);
                for r in 0..self.rows {
                    acc = acc.add(&self.entry(r, i).mul(self.entry(r, j)));
                }
                *out.entry_mut(i, j) = acc;
            }
        }
        out
    }

    /// Row-major values of g(x).
    pub fn eval(&self, x: &[C]) -> Vec<C> {
        self.entries.iter().map(|p| p.eval(x)).collect()
    }
}

impl<C: crate::poly::Coeff> std::fmt::Display for RectPoly<C> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.rows {
            write!(f, "[")?;
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.entry(i, j))?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

/// Exact weighted-row form f = Σᵢ wᵢ·rᵢᵀrᵢ with rational weights wᵢ > 0
/// and rational row vectors rᵢ. Merging √wᵢ into the rows would leave the
/// rationals, so the weights stay explicit.
#[derive(Clone, Debug)]
pub struct ExactRows {
    pub weights: Vec<Rat>,
    /// Each row has length t.
    pub rows: Vec<Vec<QPoly>>,
}

impl ExactRows {
    pub fn reconstruct(&self, nvars: usize, t: usize) -> QMatPoly {
        let mut out = MatrixPoly::zero(nvars, t);
        for (w, row) in self.weights.iter().zip(&self.rows) {
            for i in 0..t {
                for j in 0..t {
                    let term = row[i].mul(&row[j]).scale(w);
                    *out.entry_mut(i, j) = out.entry(i, j).add(&term);
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct UnivarFactorization {
    /// Numeric factor with f ≈ gᵀg, at most t·(deg(f)/2 + 1) rows.
    pub g: RectPoly<f64>,
    /// Largest coefficient of f − gᵀg in absolute value.
    pub residual: f64,
    /// Largest coefficient of f in absolute value.
    pub scale: f64,
    /// Exact weighted-row form, present when rationalization succeeded;
    /// its reconstruction equals f with residual exactly zero.
    pub exact: Option<ExactRows>,
}

fn eval_sym_at(f: &FMatPoly, z: f64) -> SymMat {
    let t = f.size();
    let vals = f.eval(&[z]);
    let mut m = SymMat::zeros(t);
    for i in 0..t {
        for j in 0..=i {
            *m.at_mut(i, j) = 0.5 * (vals[i * t + j] + vals[j * t + i]);
        }
    }
    m
}

fn min_eig_at(f: &FMatPoly, z: f64) -> Result<f64, LinalgError> {
    min_eig(&eval_sym_at(f, z))
}

/// Walk outward from ±1 by doubling, looking for an eigenvalue below the
/// threshold. Catches violations that escape to infinity (odd degree or a
/// leading coefficient with a negative eigenvalue).
fn asymptotic_witness(f: &FMatPoly, direction: f64, threshold: f64) -> Option<(f64, f64)> {
    let mut z = direction;
    for _ in 0..200 {
        if !z.is_finite() {
            return None;
        }
        if let Ok(e) = min_eig_at(f, z) {
            if e < threshold {
                return Some((z, e));
            }
        }
        z *= 2.0;
    }
    None
}

/// Radius enclosing every boundary point of a potential violation region.
/// Where the smallest eigenvalue crosses zero the matrix is singular, so
/// the crossings are roots of det f and a Cauchy-style bound on those
/// roots suffices; violations beyond every root are asymptotic and found
/// by the outward walk instead.
fn scan_radius(f: &QMatPoly) -> f64 {
    let cp = char_poly(f);
    let mut det_coeffs: BTreeMap<u32, f64> = BTreeMap::new();
    for (m, c) in cp.q.terms() {
        let e = m.exponents();
        if e[1] == 0 {
            det_coeffs.insert(e[0], rat_to_f64(c));
        }
    }
    let bound = det_coeffs.iter().next_back().and_then(|(&dmax, &lead)| {
        if lead.abs() <= 0.0 {
            return None;
        }
        let mx = det_coeffs
            .iter()
            .filter(|(&k, _)| k < dmax)
            .map(|(_, c)| c.abs())
            .fold(0.0f64, f64::max);
        Some(1.0 + mx / lead.abs())
    });
    bound.unwrap_or(2.0 + f.max_abs_coeff()).clamp(4.0, 1e8)
}

fn psd_on_line_pretest(f: &QMatPoly, tol: f64) -> Result<(), UnivarError> {
    let ff = f.to_f64_poly();
    let t = f.size();
    let scale = f.max_abs_coeff().max(1.0);
    let threshold = -tol * scale;
    let d = f.degree();

    let lead_mono = Monomial::from_exponents(vec![d]);
    let mut lead = SymMat::zeros(t);
    for i in 0..t {
        for j in 0..=i {
            *lead.at_mut(i, j) = rat_to_f64(&f.entry(i, j).coeff(&lead_mono));
        }
    }
    let lead_max = crate::linalg::sym_eigen(&lead)?.values[0];
    if d % 2 == 1 {
        let first = if lead_max > 0.0 { -1.0 } else { 1.0 };
        for dir in [first, -first] {
            if let Some((z, e)) = asymptotic_witness(&ff, dir, threshold) {
                return Err(UnivarError::NotPsdOnLine { z, min_eig: e });
            }
        }
        return Err(UnivarError::SolverFailed(
            "odd degree without a reachable witness point".into(),
        ));
    }
    if min_eig(&lead)? < threshold {
        for dir in [1.0, -1.0] {
            if let Some((z, e)) = asymptotic_witness(&ff, dir, threshold) {
                return Err(UnivarError::NotPsdOnLine { z, min_eig: e });
            }
        }
    }

    let r = scan_radius(f);
    let m = 512usize;
    let mut worst = (0.0f64, f64::INFINITY);
    for j in 0..=m {
        let cheb = r * (std::f64::consts::PI * j as f64 / m as f64).cos();
        let unif = -r + 2.0 * r * j as f64 / m as f64;
        for z in [cheb, unif] {
            let e = min_eig_at(&ff, z)?;
            if e < worst.1 {
                worst = (z, e);
            }
        }
    }
    if worst.1 < threshold {
        return Err(UnivarError::NotPsdOnLine { z: worst.0, min_eig: worst.1 });
    }
    Ok(())
}

/// Factor a univariate symmetric matrix polynomial that is PSD on ℝ as
/// f = gᵀg. Inputs that fail the PSD test get a witness point back in the
/// error. Rationalization to the exact weighted-row form is attempted and
/// its absence is not an error.
pub fn jakubovic_factor(f: &QMatPoly, tol: f64) -> Result<UnivarFactorization, UnivarError> {
    if f.nvars() != 1 {
        return Err(UnivarError::NotUnivariate { nvars: f.nvars() });
    }
    if !f.is_symmetric() {
        return Err(UnivarError::NotSymmetric);
    }
    psd_on_line_pretest(f, tol)?;

    let t = f.size();
    let d = f.degree() / 2;
    let module = ModulePresentation::unconstrained(1, t);
    let enc = build_membership_sdp(&module, f, d, &[])?;
    let settings = SdpSettings::default();
    let sol = solve(enc.instance(), &settings);
    let x = match sol.outcome {
        SdpOutcome::Feasible { x, .. } => x,
        SdpOutcome::Infeasible { ray } => {
            return Err(witness_from_ray(&enc, &ray, f, &settings));
        }
        SdpOutcome::Unknown { reason } => return Err(UnivarError::SolverFailed(reason)),
    };
    let cert = enc.certificate_from_solution(&x);
    let (gram, basis) = match &cert.parts[0] {
        GramPart::Scalar { gram, basis, .. } => (gram, basis),
        GramPart::Matrix { .. } => unreachable!("unconstrained module has only the unit block"),
    };
    let n = basis.len() * t;
    let mut sym = SymMat::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            *sym.at_mut(i, j) = 0.5 * (gram[i * n + j] + gram[j * n + i]);
        }
    }
    let fac = psd_factor(&sym, 1e-9).map_err(|e| UnivarError::SolverFailed(e.to_string()))?;
    let mut rows = Vec::with_capacity(fac.rank);
    for r in 0..fac.rank {
        let mut row = vec![ScalarPoly::<f64>::zero(1); t];
        for (a, mono) in basis.iter().enumerate() {
            for (k, entry) in row.iter_mut().enumerate() {
                entry.add_term(mono.clone(), fac.rows[(r, a * t + k)]);
            }
        }
        rows.push(row);
    }
    let g = RectPoly::from_rows(1, t, rows);

    let scale = f.max_abs_coeff().max(1.0);
    let residual = f.to_f64_poly().sub(&g.gram_product(1)).max_abs_coeff();

    let exact = rationalize(&cert, f, &RationalizeOptions::default()).ok().and_then(|ec| {
        let (gram, basis) = match &ec.parts[0] {
            GramPart::Scalar { gram, basis, .. } => (gram, basis),
            GramPart::Matrix { .. } => return None,
        };
        let n = basis.len() * t;
        let ldl = rational_ldl(gram, n)?;
        let zero = crate::poly::rat_int(0);
        let mut weights = Vec::new();
        let mut rows = Vec::new();
        for (w, col) in ldl {
            if w == zero {
                continue;
            }
            let mut row = vec![ScalarPoly::<Rat>::zero(1); t];
            for (a, mono) in basis.iter().enumerate() {
                for (k, entry) in row.iter_mut().enumerate() {
                    entry.add_term(mono.clone(), col[a * t + k].clone());
                }
            }
            weights.push(w);
            rows.push(row);
        }
        let candidate = ExactRows { weights, rows };
        if candidate.reconstruct(1, t) == *f {
            Some(candidate)
        } else {
            None
        }
    });

    Ok(UnivarFactorization { g, residual, scale, exact })
}

fn witness_from_ray(
    enc: &crate::gram::MembershipEncoding,
    ray: &[f64],
    f: &QMatPoly,
    settings: &SdpSettings,
) -> UnivarError {
    let ff = f.to_f64_poly();
    let try_extract = |r: &[f64]| -> Option<(f64, f64)> {
        let state = SeparatingState::from_ray(enc, r).ok()?;
        let p = state.extract_point(1e-4).ok()?;
        let z = p.x[0];
        let e = min_eig_at(&ff, z).ok()?;
        Some((z, e))
    };
    if let Some((z, e)) = try_extract(ray) {
        if e < 0.0 {
            return UnivarError::NotPsdOnLine { z, min_eig: e };
        }
    }
    if let Ok(refined) = purify_ray(enc, ray, settings) {
        if let Some((z, e)) = try_extract(&refined) {
            if e < 0.0 {
                return UnivarError::NotPsdOnLine { z, min_eig: e };
            }
        }
    }
    UnivarError::SolverFailed(
        "relaxation infeasible but no violation point could be extracted".into(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::rat_int;

    fn var_z() -> ScalarPoly<Rat> {
        ScalarPoly::var(1, 0)
    }

    #[test]
    fn identity_factors_exactly() {
        let f = MatrixPoly::identity(1, 2);
        let out = jakubovic_factor(&f, 1e-8).unwrap();
        assert!(out.residual <= 1e-8 * out.scale);
        assert!(out.g.rows() <= 2);
        let exact = out.exact.expect("constant identity must rationalize");
        assert_eq!(exact.reconstruct(1, 2), f);
    }

    #[test]
    fn textbook_two_by_two_round_trip() {
        // f = adjoint(g) g for g = [[Z, 1], [1, 0]].
        let z = var_z();
        let one = ScalarPoly::one(1);
        let zero = ScalarPoly::zero(1);
        let g0 = MatrixPoly::from_rows(vec![vec![z, one.clone()], vec![one, zero]]);
        let f = g0.adjoint().matmul(&g0);
        let out = jakubovic_factor(&f, 1e-8).unwrap();
        assert!(out.residual <= 1e-8 * out.scale, "residual {}", out.residual);
        assert!(out.g.rows() <= 2 * (1 + 1));
        let exact = out.exact.expect("small integer instance must rationalize");
        assert_eq!(exact.reconstruct(1, 2), f);
        for w in &exact.weights {
            assert!(*w > rat_int(0));
        }
    }

    #[test]
    fn odd_degree_diagonal_is_rejected_with_witness() {
        let z = var_z();
        let f = MatrixPoly::from_rows(vec![
            vec![z, ScalarPoly::zero(1)],
            vec![ScalarPoly::zero(1), ScalarPoly::one(1)],
        ]);
        match jakubovic_factor(&f, 1e-8) {
            Err(UnivarError::NotPsdOnLine { z, min_eig }) => {
                assert!(z < 0.0);
                assert!(min_eig < 0.0);
                let e = min_eig_at(&f.to_f64_poly(), z).unwrap();
                assert!(e < 0.0, "witness must re-evaluate negative, got {}", e);
            }
            other => panic!("expected NotPsdOnLine, got {:?}", other.map(|o| o.residual)),
        }
    }

    #[test]
    fn indefinite_even_degree_is_rejected() {
        // det = -2Z^2 < 0 away from the origin.
        let z = var_z();
        let f = MatrixPoly::from_rows(vec![
            vec![ScalarPoly::one(1), z.clone()],
            vec![z.clone(), z.square().neg()],
        ]);
        match jakubovic_factor(&f, 1e-8) {
            Err(UnivarError::NotPsdOnLine { z, min_eig }) => {
                assert!(min_eig < 0.0);
                let e = min_eig_at(&f.to_f64_poly(), z).unwrap();
                assert!(e < 0.0);
            }
            other => panic!("expected NotPsdOnLine, got {:?}", other.map(|o| o.residual)),
        }
    }

    #[test]
    fn negative_constant_is_rejected() {
        let f = MatrixPoly::identity(1, 3).neg();
        assert!(matches!(jakubovic_factor(&f, 1e-8), Err(UnivarError::NotPsdOnLine { .. })));
    }

    #[test]
    fn evaluation_consistency_on_random_points() {
        use rand::{Rng, SeedableRng};
        let z = var_z();
        let one = ScalarPoly::one(1);
        let g0 = MatrixPoly::from_rows(vec![
            vec![z.square(), z.clone().add(&one)],
            vec![one.clone(), z.clone().sub(&one)],
        ]);
        let f = g0.adjoint().matmul(&g0);
        let out = jakubovic_factor(&f, 1e-8).unwrap();
        let ff = f.to_f64_poly();
        let d = f.degree();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let zv: f64 = rng.gen_range(-3.0..3.0);
            let fv = ff.eval(&[zv]);
            let gv = out.g.eval(&[zv]);
            let t = f.size();
            let r = out.g.rows();
            for i in 0..t {
                for j in 0..t {
                    let mut acc = 0.0;
                    for k in 0..r {
                        acc += gv[k * t + i] * gv[k * t + j];
                    }
                    let bound = 10.0 * 1e-8 * (1.0 + zv.abs().powi(d as i32)) * out.scale;
                    assert!(
                        (fv[i * t + j] - acc).abs() <= bound,
                        "mismatch at z = {}: {} vs {}",
                        zv,
                        fv[i * t + j],
                        acc
                    );
                }
            }
        }
    }
}
