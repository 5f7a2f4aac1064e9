//! Separating functionals extracted from infeasibility certificates.
//!
//! When a membership SDP is infeasible, the returned dual ray is a linear
//! functional L on matrix polynomials of bounded degree that is nonnegative
//! on the whole weighted-squares cone but strictly negative on the target.
//! Normalized by its mass L(I), such a functional behaves like a state; if
//! its moments agree with evaluation p ↦ ⟨p(x)v, v⟩ at a single point, the
//! pair (x, v) is an explicit witness that the target leaves the cone.

use std::collections::BTreeMap;

use crate::gram::{MembershipEncoding, ModulePresentation};
use crate::linalg::{min_eig, sym_eigen, Mat, SymMat};
use crate::poly::{monomials_up_to, FMatPoly, FPoly, MatrixPoly, Monomial, QMatPoly};
use crate::sdp::{
    farkas_ray_quality, solve, BlockSparse, SdpInstance, SdpOutcome, SdpSettings,
};

#[derive(Debug, thiserror::Error)]
pub enum StateError {
    #[error("ray does not verify as a separating functional: {0}")]
    RayNotVerifiable(String),
    #[error("state is not a point evaluation: {0}")]
    NotExtractable(String),
    #[error("moments of degree above {0} are not available")]
    DegreeTooHigh(u32),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("ray purification failed: {0}")]
    PurificationFailed(String),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
}

/// A mass-normalized linear functional on symmetric matrix polynomials of
/// degree at most 2·degree, stored through its moments. The value at key
/// (m, k, l) is L(X^m (E_kl + E_lk)) for k < l and L(X^m E_kk) for k = l,
/// so that L(p) = Σ_{k≤l} Σ_m p_kl[m] · value(m, k, l) for symmetric p.
#[derive(Clone, Debug)]
pub struct SeparatingState {
    nvars: usize,
    t: usize,
    degree: u32,
    mass: f64,
    values: BTreeMap<(Monomial, usize, usize), f64>,
}

impl SeparatingState {
    /// Read a state off a verified infeasibility ray of a membership
    /// encoding. The ray is re-checked against the instance data before
    /// being trusted.
    pub fn from_ray(enc: &MembershipEncoding, ray: &[f64]) -> Result<Self, StateError> {
        if ray.len() != enc.labels().len() {
            return Err(StateError::Dimension { expected: enc.labels().len(), got: ray.len() });
        }
        let (bu, lmin) = farkas_ray_quality(enc.instance(), ray);
        if !(bu < 0.0 && lmin >= -1e-6) {
            return Err(StateError::RayNotVerifiable(format!(
                "pairing with the target is {:.3e} and the dual slack eigenvalue floor is {:.3e}",
                bu, lmin
            )));
        }
        let norm: f64 = ray.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut mass = 0.0;
        let one = Monomial::one(enc.nvars());
        for ((mono, k, l), &v) in enc.labels().iter().zip(ray) {
            if mono == &one && k == l {
                mass += v;
            }
        }
        if mass <= 1e-10 * norm.max(1.0) {
            return Err(StateError::RayNotVerifiable("the ray carries no state mass".into()));
        }
        let values = enc
            .labels()
            .iter()
            .zip(ray)
            .map(|(lab, &v)| (lab.clone(), v / mass))
            .collect();
        Ok(SeparatingState {
            nvars: enc.nvars(),
            t: enc.matrix_side(),
            degree: enc.degree(),
            mass,
            values,
        })
    }

    /// The state of a single point evaluation p ↦ ⟨p(x)v, v⟩, normalized to
    /// unit mass.
    pub fn synthesize(x: &[f64], v: &[f64], degree: u32) -> Self {
        Self::mixture(&[(1.0, x.to_vec(), v.to_vec())], x.len(), v.len(), degree)
    }

    /// A convex-type combination of point evaluations with positive weights.
    pub fn mixture(
        atoms: &[(f64, Vec<f64>, Vec<f64>)],
        nvars: usize,
        t: usize,
        degree: u32,
    ) -> Self {
        let mut values = BTreeMap::new();
        let mut mass = 0.0;
        for (w, _, v) in atoms {
            mass += w * v.iter().map(|c| c * c).sum::<f64>();
        }
        for mono in monomials_up_to(nvars, 2 * degree) {
            for k in 0..t {
                for l in k..t {
                    let mut acc = 0.0;
                    for (w, x, v) in atoms {
                        let m: f64 = mono.eval(x);
                        let pair = if k == l { v[k] * v[k] } else { 2.0 * v[k] * v[l] };
                        acc += w * m * pair;
                    }
                    values.insert((mono.clone(), k, l), acc / mass);
                }
            }
        }
        SeparatingState { nvars, t, degree, mass, values }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn matrix_side(&self) -> usize {
        self.t
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Mass L(I) of the functional before normalization.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Raw stored moment; zero for positions the ray never referenced.
    pub fn value(&self, mono: &Monomial, k: usize, l: usize) -> f64 {
        let (k, l) = if k <= l { (k, l) } else { (l, k) };
        self.values.get(&(mono.clone(), k, l)).copied().unwrap_or(0.0)
    }

    /// Stored moments in canonical key order.
    pub fn moments(&self) -> impl Iterator<Item = (&(Monomial, usize, usize), &f64)> {
        self.values.iter()
    }

    pub(crate) fn from_parts(
        nvars: usize,
        t: usize,
        degree: u32,
        mass: f64,
        values: BTreeMap<(Monomial, usize, usize), f64>,
    ) -> Self {
        SeparatingState { nvars, t, degree, mass, values }
    }

    /// Apply the functional to a symmetric matrix polynomial.
    pub fn apply_matrix(&self, p: &FMatPoly) -> Result<f64, StateError> {
        if p.size() != self.t {
            return Err(StateError::Dimension { expected: self.t, got: p.size() });
        }
        if p.nvars() != self.nvars {
            return Err(StateError::Dimension { expected: self.nvars, got: p.nvars() });
        }
        let mut acc = 0.0;
        for k in 0..self.t {
            for l in k..self.t {
                for (mono, c) in p.entry(k, l).terms() {
                    if mono.degree() > 2 * self.degree {
                        return Err(StateError::DegreeTooHigh(2 * self.degree));
                    }
                    acc += c * self.value(mono, k, l);
                }
            }
        }
        Ok(acc)
    }

    /// Apply the functional to s · I.
    pub fn apply_scalar(&self, s: &FPoly) -> Result<f64, StateError> {
        self.apply_matrix(&MatrixPoly::scalar_identity(s, self.t))
    }

    /// The constant-monomial moment matrix V with V_kl = L(E_kl sym).
    pub fn density_matrix(&self) -> SymMat {
        let mut v = SymMat::zeros(self.t);
        let one = Monomial::one(self.nvars);
        for k in 0..self.t {
            for l in k..self.t {
                let raw = self.value(&one, k, l);
                *v.at_mut(l, k) = if k == l { raw } else { raw / 2.0 };
            }
        }
        v
    }

    /// Decide whether the state is (numerically) a single point evaluation
    /// and return the point and direction if so. The constant moment matrix
    /// must be PSD of rank one, and the stored moments up to degree 2d−2
    /// must match the evaluation predicted by the recovered pair within
    /// `tol` relative accuracy. The top-degree slice is left out of the
    /// comparison: truncated rays are reliable only below the boundary.
    pub fn extract_point(&self, tol: f64) -> Result<PointEvaluation, StateError> {
        let v_mat = self.density_matrix();
        let eig = sym_eigen(&v_mat)?;
        let lam1 = eig.values.first().copied().unwrap_or(0.0);
        if lam1 <= 0.0 {
            return Err(StateError::NotExtractable("the state has no positive mass".into()));
        }
        let lam_min = eig.values.last().copied().unwrap_or(0.0);
        if lam_min < -1e-6 * lam1 {
            return Err(StateError::NotExtractable(
                "the constant moment matrix is not positive semidefinite".into(),
            ));
        }
        let lam2 = eig.values.get(1).copied().unwrap_or(0.0).max(0.0);
        if lam2 > 1e-4 * lam1 {
            return Err(StateError::NotExtractable(format!(
                "the constant moment matrix has a second eigenvalue {:.3e} of the first",
                lam2 / lam1
            )));
        }
        let mut v: Vec<f64> = (0..self.t).map(|i| lam1.sqrt() * eig.vectors[(i, 0)]).collect();
        let vmax = v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let first = v
            .iter()
            .position(|c| c.abs() > 1e-7 * vmax)
            .expect("direction has a nonzero coordinate");
        if v[first] < 0.0 {
            for c in v.iter_mut() {
                *c = -*c;
            }
        }

        let support: Vec<usize> =
            (0..self.t).filter(|&j| v[j] * v[j] > 0.1 / self.t as f64).collect();
        let denom: f64 = support.iter().map(|&j| v[j] * v[j]).sum();
        let mut x = vec![0.0; self.nvars];
        for i in 0..self.nvars {
            let mono = Monomial::var(self.nvars, i);
            let acc: f64 = support.iter().map(|&j| self.value(&mono, j, j)).sum();
            x[i] = acc / denom;
        }

        let check_deg = (2 * self.degree).saturating_sub(2);
        for ((mono, k, l), &val) in &self.values {
            if mono.degree() > check_deg {
                continue;
            }
            let m: f64 = mono.eval(&x);
            let pair = if k == l { v[*k] * v[*k] } else { 2.0 * v[*k] * v[*l] };
            let pred = m * pair;
            if (val - pred).abs() > tol * (1.0 + val.abs()) {
                return Err(StateError::NotExtractable(format!(
                    "moment at degree {} deviates from the point evaluation by {:.3e}",
                    mono.degree(),
                    (val - pred).abs()
                )));
            }
        }
        Ok(PointEvaluation { x, v })
    }
}

/// A point x in variable space and a direction v in matrix space.
#[derive(Clone, Debug, PartialEq)]
pub struct PointEvaluation {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct PointReport {
    /// ⟨target(x) v, v⟩: nonpositive values witness that the target is not
    /// positive definite along v at x.
    pub objective: f64,
    /// Smallest eigenvalue over all generators evaluated at x.
    pub min_generator_eig: f64,
}

impl PointReport {
    /// True when the pair separates: the quadratic form is not significantly
    /// positive and the point sits inside the region within tol.
    pub fn passes(&self, tol: f64) -> bool {
        self.objective <= tol && self.min_generator_eig >= -tol
    }
}

fn eval_sym(p: &QMatPoly, x: &[f64]) -> SymMat {
    let vals = p.to_f64_poly().eval(x);
    let t = p.size();
    let m = Mat { rows: t, cols: t, data: vals };
    SymMat::from_mat(&m)
}

/// Report the quadratic form of the target at (x, v) together with the
/// worst generator eigenvalue at x. Judgement is left to
/// [`PointReport::passes`]; no outcome is an error here.
pub fn verify_point(
    target: &QMatPoly,
    module: &ModulePresentation,
    x: &[f64],
    v: &[f64],
) -> Result<PointReport, StateError> {
    if x.len() != module.nvars() {
        return Err(StateError::Dimension { expected: module.nvars(), got: x.len() });
    }
    if v.len() != module.size() || target.size() != module.size() {
        return Err(StateError::Dimension { expected: module.size(), got: v.len() });
    }
    let fx = eval_sym(target, x);
    let mut objective = 0.0;
    for i in 0..v.len() {
        for j in 0..v.len() {
            objective += v[i] * fx.at(i, j) * v[j];
        }
    }
    let mut min_generator_eig = f64::INFINITY;
    for g in module.generators() {
        let e = min_eig(&eval_sym(g, x))?;
        min_generator_eig = min_generator_eig.min(e);
    }
    Ok(PointReport { objective, min_generator_eig })
}

/// Push a verified infeasibility ray toward an extreme point of the dual
/// feasible region by re-solving with the objective Σ_i L(X_i · I), keeping
/// the separation margin at half its verified value. Helps when the raw ray
/// is a mixture of point evaluations and a single atom is wanted.
///
/// The returned ray is re-verified against the original instance. The
/// auxiliary problem is only bounded when the region constraints bound the
/// first moments, so failure is reported rather than fatal.
pub fn purify_ray(
    enc: &MembershipEncoding,
    ray: &[f64],
    settings: &SdpSettings,
) -> Result<Vec<f64>, StateError> {
    let inst = enc.instance();
    let m = inst.num_constraints();
    if ray.len() != m {
        return Err(StateError::Dimension { expected: m, got: ray.len() });
    }
    let one = Monomial::one(enc.nvars());
    let mut mass = 0.0;
    for ((mono, k, l), &v) in enc.labels().iter().zip(ray) {
        if mono == &one && k == l {
            mass += v;
        }
    }
    if mass <= 0.0 {
        return Err(StateError::RayNotVerifiable("the ray carries no state mass".into()));
    }
    let margin0: f64 =
        inst.rhs.iter().zip(ray).map(|(b, y)| b * y / mass).sum();
    if margin0 >= 0.0 {
        return Err(StateError::RayNotVerifiable(
            "the ray does not separate the target".into(),
        ));
    }
    let margin = 0.5 * margin0;

    // Auxiliary blocks: the dual slack Z_b per original block, one slack
    // scalar for the margin row, then a (plus, minus) split pair per dual
    // coordinate.
    let nb = inst.block_sizes.len();
    let mut block_sizes = inst.block_sizes.clone();
    block_sizes.push(1);
    for _ in 0..m {
        block_sizes.push(1);
        block_sizes.push(1);
    }
    let nblocks = block_sizes.len();
    let slack = nb;
    let plus = |k: usize| nb + 1 + 2 * k;
    let minus = |k: usize| nb + 2 + 2 * k;

    // Coefficients of each dual coordinate at each block position.
    let mut at: BTreeMap<(usize, u32, u32), Vec<(usize, f64)>> = BTreeMap::new();
    for (k, c) in inst.constraints.iter().enumerate() {
        for (b, entries) in c.blocks.iter().enumerate() {
            for &(i, j, v) in entries {
                at.entry((b, i, j)).or_default().push((k, v));
            }
        }
    }

    let mut constraints = Vec::new();
    let mut rhs = Vec::new();
    for (b, &s) in inst.block_sizes.iter().enumerate() {
        for i in 0..s as u32 {
            for j in 0..=i {
                let mut row = BlockSparse::zero(nblocks);
                row.blocks[b].push((i, j, if i == j { 1.0 } else { 0.5 }));
                if let Some(coeffs) = at.get(&(b, i, j)) {
                    for &(k, v) in coeffs {
                        row.blocks[plus(k)].push((0, 0, -v));
                        row.blocks[minus(k)].push((0, 0, v));
                    }
                }
                constraints.push(row);
                rhs.push(0.0);
            }
        }
    }

    // Normalization row: the mass of y is one.
    {
        let mut row = BlockSparse::zero(nblocks);
        for (k, (mono, r, c)) in enc.labels().iter().enumerate() {
            if mono == &one && r == c {
                row.blocks[plus(k)].push((0, 0, 1.0));
                row.blocks[minus(k)].push((0, 0, -1.0));
            }
        }
        constraints.push(row);
        rhs.push(1.0);
    }
    // Margin row: pairing with the target stays separated.
    {
        let mut row = BlockSparse::zero(nblocks);
        for (k, &b) in inst.rhs.iter().enumerate() {
            if b != 0.0 {
                row.blocks[plus(k)].push((0, 0, b));
                row.blocks[minus(k)].push((0, 0, -b));
            }
        }
        row.blocks[slack].push((0, 0, 1.0));
        constraints.push(row);
        rhs.push(margin);
    }

    // Objective: minimize -Σ_i L(X_i · I), pushing first moments outward.
    let mut objective = BlockSparse::zero(nblocks);
    for (k, (mono, r, c)) in enc.labels().iter().enumerate() {
        if mono.degree() == 1 && r == c {
            objective.blocks[plus(k)].push((0, 0, -1.0));
            objective.blocks[minus(k)].push((0, 0, 1.0));
        }
    }

    let aux = SdpInstance { block_sizes, constraints, rhs, objective };
    let sol = solve(&aux, settings);
    let x = match sol.outcome {
        SdpOutcome::Feasible { x, .. } => x,
        SdpOutcome::Infeasible { .. } => {
            return Err(StateError::PurificationFailed(
                "the auxiliary problem is infeasible at the requested margin".into(),
            ))
        }
        SdpOutcome::Unknown { reason } => return Err(StateError::PurificationFailed(reason)),
    };
    let refined: Vec<f64> =
        (0..m).map(|k| x[plus(k)][(0, 0)] - x[minus(k)][(0, 0)]).collect();
    let (bu, lmin) = farkas_ray_quality(inst, &refined);
    if !(bu < 0.0 && lmin >= -1e-6) {
        return Err(StateError::PurificationFailed(format!(
            "refined ray fails verification (pairing {:.3e}, eigenvalue floor {:.3e})",
            bu, lmin
        )));
    }
    Ok(refined)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gram::build_membership_sdp;
    use crate::poly::{rat_int, Rat, ScalarPoly};

    fn motzkin() -> ScalarPoly<Rat> {
        // x^4 y^2 + x^2 y^4 - 3 x^2 y^2 + 1
        let x = ScalarPoly::<Rat>::var(2, 0);
        let y = ScalarPoly::<Rat>::var(2, 1);
        let x2 = x.square();
        let y2 = y.square();
        x2.square()
            .mul(&y2)
            .add(&x2.mul(&y2.square()))
            .sub(&x2.mul(&y2).scale(&rat_int(3)))
            .add(&ScalarPoly::one(2))
    }

    #[test]
    fn synthesized_pure_state_round_trips() {
        let x = vec![0.5, -1.0 / 3.0];
        let v = vec![0.6, 0.8];
        let state = SeparatingState::synthesize(&x, &v, 2);
        let p = state.extract_point(1e-6).unwrap();
        for (a, b) in p.x.iter().zip(&x) {
            assert!((a - b).abs() < 1e-9, "recovered {} expected {}", a, b);
        }
        for (a, b) in p.v.iter().zip(&v) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn distinct_direction_mixture_is_rejected() {
        let atoms = vec![
            (0.5, vec![0.3], vec![1.0, 0.0]),
            (0.5, vec![-0.7], vec![0.0, 1.0]),
        ];
        let state = SeparatingState::mixture(&atoms, 1, 2, 2);
        assert!(matches!(state.extract_point(1e-5), Err(StateError::NotExtractable(_))));
    }

    #[test]
    fn same_direction_mixture_fails_the_moment_check() {
        // Rank test alone cannot see this mixture; the moment comparison can.
        let atoms = vec![
            (0.5, vec![0.8], vec![1.0]),
            (0.5, vec![-0.4], vec![1.0]),
        ];
        let state = SeparatingState::mixture(&atoms, 1, 1, 2);
        assert!(matches!(state.extract_point(1e-5), Err(StateError::NotExtractable(_))));
    }

    #[test]
    fn unrepresentable_target_yields_separating_state() {
        let target = MatrixPoly::from_scalar(motzkin());
        let module = ModulePresentation::unconstrained(2, 1);
        let enc = build_membership_sdp(&module, &target, 3, &[]).unwrap();
        let sol = solve(enc.instance(), &SdpSettings::default());
        let ray = match sol.outcome {
            SdpOutcome::Infeasible { ray } => ray,
            other => panic!("expected infeasibility, got {:?}", other),
        };
        let state = SeparatingState::from_ray(&enc, &ray).unwrap();
        let lf = state.apply_scalar(&motzkin().to_f64_poly()).unwrap();
        assert!(lf < 0.0, "state should separate the target, got {}", lf);

        // Nonnegative on a few explicit squares.
        let x = ScalarPoly::<f64>::var(2, 0);
        let y = ScalarPoly::<f64>::var(2, 1);
        let squares = vec![
            x.square().mul(&y.square()).mul(&x.square()),
            x.square().sub(&y).square(),
            x.mul(&y).add(&ScalarPoly::constant(2, 0.5)).square(),
        ];
        for s in squares {
            let v = state.apply_scalar(&s).unwrap();
            assert!(v >= -1e-7, "state went negative on a square: {}", v);
        }
    }

    #[test]
    fn purified_ray_extracts_boundary_atom() {
        // -x is nonnegative nowhere on the positive part of [-1, 1]; the
        // separating state should concentrate at x = 1 after purification.
        let x = ScalarPoly::<Rat>::var(1, 0);
        let target = MatrixPoly::from_scalar(x.neg());
        let ball = ScalarPoly::one(1).sub(&x.square());
        let module =
            ModulePresentation::new(1, 1, vec![MatrixPoly::from_scalar(ball)]).unwrap();
        let enc = build_membership_sdp(&module, &target, 2, &[]).unwrap();
        let sol = solve(enc.instance(), &SdpSettings::default());
        let ray = match sol.outcome {
            SdpOutcome::Infeasible { ray } => ray,
            other => panic!("expected infeasibility, got {:?}", other),
        };
        let refined = purify_ray(&enc, &ray, &SdpSettings::default()).unwrap();
        let state = SeparatingState::from_ray(&enc, &refined).unwrap();
        let p = state.extract_point(1e-4).unwrap();
        assert!((p.x[0] - 1.0).abs() < 1e-5, "atom should sit at 1, got {}", p.x[0]);

        let report = verify_point(&target, &module, &p.x, &p.v).unwrap();
        assert!(report.passes(1e-6));
    }

    #[test]
    fn verify_point_flags_outside_points() {
        let x = ScalarPoly::<Rat>::var(1, 0);
        let ball = ScalarPoly::one(1).sub(&x.square());
        let module =
            ModulePresentation::new(1, 1, vec![MatrixPoly::from_scalar(ball)]).unwrap();
        let target = MatrixPoly::identity(1, 1);
        let report = verify_point(&target, &module, &[2.0], &[1.0]).unwrap();
        assert!(!report.passes(1e-6));
        assert!(report.min_generator_eig < -1.0);
        // A positive definite target never passes even on inside points.
        let inside = verify_point(&target, &module, &[0.5], &[1.0]).unwrap();
        assert!(!inside.passes(1e-6));
        assert!(inside.objective > 0.5);
    }
}
