//! Gram-matrix encodings of weighted sum-of-squares membership.
//!
//! A membership query asks whether a symmetric matrix polynomial f can be
//! written as sum_i p_i^T g p_i, summed over g in {identity} ∪ G, with
//! polynomial transformers p_i of bounded degree. Fixing a monomial basis
//! turns the query into a semidefinite feasibility problem: one positive
//! semidefinite Gram block per usable generator, one linear constraint per
//! (monomial, matrix position) pair. This module builds those instances,
//! decodes solver output into certificates, verifies certificates either
//! numerically or in exact rational arithmetic, and rounds floating-point
//! certificates to exact rational ones.
//!
//! Generators that are a scalar polynomial times the identity get a block of
//! side B·t (basis size times matrix side); genuinely matrix-valued
//! generators need side B·t² so that arbitrary transformer columns can be
//! encoded. Optional equality generators enter with sign-free polynomial
//! multipliers, realized as paired 1×1 blocks.

use std::collections::BTreeMap;

use num::bigint::BigInt;

use crate::linalg::{min_eig, psd_factor, solve_linear, sym_eigen, LinalgError, Mat, SymEigen, SymMat};
use crate::poly::{
    monomials_up_to, rat, rat_int, rat_to_f64, round_f64_to_rat, Coeff, MatrixPoly, Monomial,
    QMatPoly, QPoly, Rat, ScalarPoly,
};
use crate::sdp::{BlockSparse, SdpInstance};

#[derive(Debug, thiserror::Error)]
pub enum GramError {
    #[error("target degree {target_deg} exceeds 2*{relaxation}; raise the relaxation degree")]
    DegreeTooSmall { target_deg: u32, relaxation: u32 },
    #[error("{0} must be symmetric")]
    NotSymmetric(&'static str),
    #[error("variable count mismatch: expected {expected}, got {got}")]
    VarMismatch { expected: usize, got: usize },
    #[error("matrix side mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("certificate does not reproduce the target (max coefficient residual {0:.3e})")]
    Residual(f64),
    #[error("Gram block {0} is not positive semidefinite")]
    BlockNotPsd(usize),
    #[error("certificate carries equality multipliers and is not a plain weighted square form")]
    HasFreeMultipliers,
    #[error("generator {0} is not a scalar multiple of the identity")]
    NonScalarGenerator(usize),
    #[error("rationalization failed: {0}")]
    RationalizationFailed(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A finite presentation of the constraint set: symmetric t×t generators
/// over a fixed list of variables. The identity generator is implicit.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulePresentation {
    nvars: usize,
    t: usize,
    generators: Vec<QMatPoly>,
}

impl ModulePresentation {
    pub fn new(nvars: usize, t: usize, generators: Vec<QMatPoly>) -> Result<Self, GramError> {
        for g in &generators {
            if g.nvars() != nvars {
                return Err(GramError::VarMismatch { expected: nvars, got: g.nvars() });
            }
            if g.size() != t {
                return Err(GramError::DimMismatch { expected: t, got: g.size() });
            }
            if !g.is_symmetric() {
                return Err(GramError::NotSymmetric("generator"));
            }
        }
        Ok(ModulePresentation { nvars, t, generators })
    }

    /// Presentation with no generators beyond the implicit identity.
    pub fn unconstrained(nvars: usize, t: usize) -> Self {
        ModulePresentation { nvars, t, generators: Vec::new() }
    }

    /// Wrap scalar generators g_i as g_i · I_t.
    pub fn from_scalars(t: usize, gens: &[QPoly]) -> Result<Self, GramError> {
        let nvars = gens.first().map_or(0, |g| g.nvars());
        let generators = gens.iter().map(|g| MatrixPoly::scalar_identity(g, t)).collect();
        ModulePresentation::new(nvars, t, generators)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn size(&self) -> usize {
        self.t
    }

    pub fn generators(&self) -> &[QMatPoly] {
        &self.generators
    }

    /// The scalar factors of the generators, if every generator is a scalar
    /// multiple of the identity.
    pub fn scalar_factors(&self) -> Result<Vec<QPoly>, GramError> {
        let mut out = Vec::with_capacity(self.generators.len());
        for (i, g) in self.generators.iter().enumerate() {
            match g.as_scalar_identity() {
                Some(s) => out.push(s),
                None => return Err(GramError::NonScalarGenerator(i)),
            }
        }
        Ok(out)
    }

    /// The same generators viewed over a different matrix side.
    pub fn resized(&self, t: usize) -> Result<Self, GramError> {
        let scalars = self.scalar_factors()?;
        ModulePresentation::from_scalars_nvars(self.nvars, t, &scalars)
    }

    fn from_scalars_nvars(nvars: usize, t: usize, gens: &[QPoly]) -> Result<Self, GramError> {
        let generators = gens.iter().map(|g| MatrixPoly::scalar_identity(g, t)).collect();
        ModulePresentation::new(nvars, t, generators)
    }
}

#[derive(Clone, Debug)]
enum BlockLayout {
    /// Generator sigma · I_t (sigma = 1 for the implicit identity block).
    Scalar { sigma: QPoly, basis: Vec<Monomial> },
    /// Genuinely matrix-valued generator.
    Matrix { g: QMatPoly, basis: Vec<Monomial> },
}

impl BlockLayout {
    fn side(&self, t: usize) -> usize {
        match self {
            BlockLayout::Scalar { basis, .. } => basis.len() * t,
            BlockLayout::Matrix { basis, .. } => basis.len() * t * t,
        }
    }
}

#[derive(Clone, Debug)]
struct FreeSlot {
    eq: usize,
    mono: Monomial,
    row: usize,
    col: usize,
}

/// A membership query compiled to a semidefinite feasibility instance,
/// together with the bookkeeping needed to decode solutions and duals.
pub struct MembershipEncoding {
    instance: SdpInstance,
    layouts: Vec<BlockLayout>,
    free_slots: Vec<FreeSlot>,
    equalities: Vec<QPoly>,
    labels: Vec<(Monomial, usize, usize)>,
    nvars: usize,
    t: usize,
    degree: u32,
}

/// Compile "target ∈ module at relaxation degree d" into an SDP.
///
/// Transformers for a generator g range over all matrix polynomials of
/// degree at most d - ceil(deg g / 2); generators too high-degree to appear
/// are dropped at this relaxation. Each equality polynomial q enters as
/// h · q with a sign-free symmetric multiplier h of degree 2d - deg q.
pub fn build_membership_sdp(
    module: &ModulePresentation,
    target: &QMatPoly,
    degree: u32,
    equalities: &[QPoly],
) -> Result<MembershipEncoding, GramError> {
    let nvars = module.nvars;
    let t = module.t;
    if target.nvars() != nvars {
        return Err(GramError::VarMismatch { expected: nvars, got: target.nvars() });
    }
    if target.size() != t {
        return Err(GramError::DimMismatch { expected: t, got: target.size() });
    }
    if !target.is_symmetric() {
        return Err(GramError::NotSymmetric("target"));
    }
    if target.degree() > 2 * degree {
        return Err(GramError::DegreeTooSmall { target_deg: target.degree(), relaxation: degree });
    }
    for q in equalities {
        if q.nvars() != nvars {
            return Err(GramError::VarMismatch { expected: nvars, got: q.nvars() });
        }
    }

    let mut labels = Vec::new();
    for mono in monomials_up_to(nvars, 2 * degree) {
        for k in 0..t {
            for l in k..t {
                labels.push((mono.clone(), k, l));
            }
        }
    }
    let label_index: BTreeMap<(Monomial, usize, usize), usize> =
        labels.iter().cloned().enumerate().map(|(i, lab)| (lab, i)).collect();

    let mut layouts = vec![BlockLayout::Scalar {
        sigma: ScalarPoly::one(nvars),
        basis: monomials_up_to(nvars, degree),
    }];
    for g in &module.generators {
        let half = (g.degree() + 1) / 2;
        if half > degree {
            continue;
        }
        let basis = monomials_up_to(nvars, degree - half);
        match g.as_scalar_identity() {
            Some(sigma) => layouts.push(BlockLayout::Scalar { sigma, basis }),
            None => layouts.push(BlockLayout::Matrix { g: g.clone(), basis }),
        }
    }

    let mut free_slots = Vec::new();
    for (ej, q) in equalities.iter().enumerate() {
        if q.is_zero() || q.degree() > 2 * degree {
            continue;
        }
        for mono in monomials_up_to(nvars, 2 * degree - q.degree()) {
            for k in 0..t {
                for l in k..t {
                    free_slots.push(FreeSlot { eq: ej, mono: mono.clone(), row: k, col: l });
                }
            }
        }
    }

    let mut block_sizes: Vec<usize> = layouts.iter().map(|b| b.side(t)).collect();
    for _ in &free_slots {
        block_sizes.push(1);
        block_sizes.push(1);
    }
    let nblocks = block_sizes.len();

    let mut rows: Vec<BTreeMap<(usize, u32, u32), f64>> = vec![BTreeMap::new(); labels.len()];
    let add = |rows: &mut Vec<BTreeMap<(usize, u32, u32), f64>>,
                   row: usize,
                   block: usize,
                   i: usize,
                   j: usize,
                   v: f64| {
        let (hi, lo) = if i >= j { (i as u32, j as u32) } else { (j as u32, i as u32) };
        *rows[row].entry((block, hi, lo)).or_insert(0.0) += v;
    };

    for (bi, layout) in layouts.iter().enumerate() {
        match layout {
            BlockLayout::Scalar { sigma, basis } => {
                for (gamma, c) in sigma.terms() {
                    let cf = rat_to_f64(c);
                    for (ai, a) in basis.iter().enumerate() {
                        for (bj, b) in basis.iter().enumerate() {
                            let mono = a.mul(b).mul(gamma);
                            for k in 0..t {
                                for l in k..t {
                                    let row = label_index[&(mono.clone(), k, l)];
                                    let i0 = ai * t + k;
                                    let j0 = bj * t + l;
                                    let v = if i0 == j0 { cf } else { cf / 2.0 };
                                    add(&mut rows, row, bi, i0, j0, v);
                                }
                            }
                        }
                    }
                }
            }
            BlockLayout::Matrix { g, basis } => {
                for u in 0..t {
                    for v in 0..t {
                        for (gamma, c) in g.entry(u, v).terms() {
                            let cf = rat_to_f64(c);
                            for (ai, a) in basis.iter().enumerate() {
                                for (bj, b) in basis.iter().enumerate() {
                                    let mono = a.mul(b).mul(gamma);
                                    for k in 0..t {
                                        for l in k..t {
                                            let row = label_index[&(mono.clone(), k, l)];
                                            let i0 = (ai * t + u) * t + k;
                                            let j0 = (bj * t + v) * t + l;
                                            let w = if i0 == j0 { cf } else { cf / 2.0 };
                                            add(&mut rows, row, bi, i0, j0, w);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    let base = layouts.len();
    for (si, slot) in free_slots.iter().enumerate() {
        for (gamma, qc) in equalities[slot.eq].terms() {
            let alpha = slot.mono.mul(gamma);
            let row = label_index[&(alpha, slot.row, slot.col)];
            let qf = rat_to_f64(qc);
            add(&mut rows, row, base + 2 * si, 0, 0, qf);
            add(&mut rows, row, base + 2 * si + 1, 0, 0, -qf);
        }
    }

    let constraints: Vec<BlockSparse> = rows
        .into_iter()
        .map(|row| {
            let mut bs = BlockSparse::zero(nblocks);
            for ((block, i, j), v) in row {
                if v != 0.0 {
                    bs.blocks[block].push((i, j, v));
                }
            }
            bs
        })
        .collect();

    let rhs: Vec<f64> =
        labels.iter().map(|(m, k, l)| rat_to_f64(&target.coeff_at(m, *k, *l))).collect();

    let instance = SdpInstance {
        block_sizes,
        constraints,
        rhs,
        objective: BlockSparse::zero(nblocks),
    };

    Ok(MembershipEncoding {
        instance,
        layouts,
        free_slots,
        equalities: equalities.to_vec(),
        labels,
        nvars,
        t,
        degree,
    })
}

impl MembershipEncoding {
    pub fn instance(&self) -> &SdpInstance {
        &self.instance
    }

    /// Constraint labels in row order: (monomial, row, col) with row <= col.
    /// Dual vectors over the constraints are read against this list.
    pub fn labels(&self) -> &[(Monomial, usize, usize)] {
        &self.labels
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn matrix_side(&self) -> usize {
        self.t
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Decode primal solver blocks into a floating-point certificate.
    pub fn certificate_from_solution(&self, x: &[Mat]) -> GramCertificate<f64> {
        let mut parts = Vec::with_capacity(self.layouts.len());
        for (bi, layout) in self.layouts.iter().enumerate() {
            let gram = x[bi].data.clone();
            match layout {
                BlockLayout::Scalar { sigma, basis } => parts.push(GramPart::Scalar {
                    sigma: sigma.clone(),
                    basis: basis.clone(),
                    gram,
                }),
                BlockLayout::Matrix { g, basis } => {
                    parts.push(GramPart::Matrix { g: g.clone(), basis: basis.clone(), gram })
                }
            }
        }
        let base = self.layouts.len();
        let mut multipliers: Vec<MatrixPoly<f64>> =
            self.equalities.iter().map(|_| MatrixPoly::zero(self.nvars, self.t)).collect();
        for (si, slot) in self.free_slots.iter().enumerate() {
            let val = x[base + 2 * si][(0, 0)] - x[base + 2 * si + 1][(0, 0)];
            if val != 0.0 {
                multipliers[slot.eq].entry_mut(slot.row, slot.col).add_term(slot.mono.clone(), val);
                if slot.row != slot.col {
                    multipliers[slot.eq]
                        .entry_mut(slot.col, slot.row)
                        .add_term(slot.mono.clone(), val);
                }
            }
        }
        let free = self
            .equalities
            .iter()
            .zip(multipliers)
            .map(|(q, h)| FreePart { q: q.clone(), h })
            .collect();
        GramCertificate { nvars: self.nvars, t: self.t, degree: self.degree, parts, free }
    }
}

/// One Gram block of a certificate. The generator data stays exact even in
/// floating-point certificates; only the Gram matrix follows the coefficient
/// type.
#[derive(Clone, Debug, PartialEq)]
pub enum GramPart<C: Coeff> {
    Scalar { sigma: QPoly, basis: Vec<Monomial>, gram: Vec<C> },
    Matrix { g: QMatPoly, basis: Vec<Monomial>, gram: Vec<C> },
}

impl<C: Coeff> GramPart<C> {
    pub fn side(&self, t: usize) -> usize {
        match self {
            GramPart::Scalar { basis, .. } => basis.len() * t,
            GramPart::Matrix { basis, .. } => basis.len() * t * t,
        }
    }

    pub fn generator_poly(&self, t: usize) -> QMatPoly {
        match self {
            GramPart::Scalar { sigma, .. } => MatrixPoly::scalar_identity(sigma, t),
            GramPart::Matrix { g, .. } => g.clone(),
        }
    }

    /// The polynomial matrix this block contributes to the certificate sum.
    pub fn poly(&self, nvars: usize, t: usize) -> MatrixPoly<C> {
        match self {
            GramPart::Scalar { sigma, basis, gram } => {
                let b = basis.len();
                let n = b * t;
                let mut h = MatrixPoly::zero(nvars, t);
                for ai in 0..b {
                    for bj in 0..b {
                        let mono = basis[ai].mul(&basis[bj]);
                        for k in 0..t {
                            for l in 0..t {
                                let c = &gram[(ai * t + k) * n + (bj * t + l)];
                                if !c.is_zero() {
                                    h.entry_mut(k, l).add_term(mono.clone(), c.clone());
                                }
                            }
                        }
                    }
                }
                h.scale_poly(&sigma.map_coeff(C::from_rat))
            }
            GramPart::Matrix { g, basis, gram } => {
                let b = basis.len();
                let n = b * t * t;
                let mut h = MatrixPoly::zero(nvars, t);
                for u in 0..t {
                    for v in 0..t {
                        let guv = g.entry(u, v);
                        if guv.is_zero() {
                            continue;
                        }
                        let mut inner = MatrixPoly::zero(nvars, t);
                        for ai in 0..b {
                            for bj in 0..b {
                                let mono = basis[ai].mul(&basis[bj]);
                                for k in 0..t {
                                    for l in 0..t {
                                        let c =
                                            &gram[((ai * t + u) * t + k) * n + ((bj * t + v) * t + l)];
                                        if !c.is_zero() {
                                            inner.entry_mut(k, l).add_term(mono.clone(), c.clone());
                                        }
                                    }
                                }
                            }
                        }
                        h = h.add(&inner.scale_poly(&guv.map_coeff(C::from_rat)));
                    }
                }
                h
            }
        }
    }
}

/// Sign-free multiplier against an equality polynomial: contributes h · q.
#[derive(Clone, Debug, PartialEq)]
pub struct FreePart<C: Coeff> {
    pub q: QPoly,
    pub h: MatrixPoly<C>,
}

/// A membership certificate in Gram form: the target equals the sum of the
/// block contributions plus the equality-multiplier terms, and every Gram
/// block is positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct GramCertificate<C: Coeff> {
    pub nvars: usize,
    pub t: usize,
    pub degree: u32,
    pub parts: Vec<GramPart<C>>,
    pub free: Vec<FreePart<C>>,
}

impl<C: Coeff> GramCertificate<C> {
    /// Recompute the polynomial the certificate represents.
    pub fn reconstruct(&self) -> MatrixPoly<C> {
        let mut acc = MatrixPoly::zero(self.nvars, self.t);
        for part in &self.parts {
            acc = acc.add(&part.poly(self.nvars, self.t));
        }
        for fp in &self.free {
            if !fp.h.is_zero() {
                acc = acc.add(&fp.h.scale_poly(&fp.q.map_coeff(C::from_rat)));
            }
        }
        acc
    }

    pub fn has_free_multipliers(&self) -> bool {
        self.free.iter().any(|fp| !fp.h.is_zero())
    }
}

fn part_sym_f64(gram: &[f64], n: usize) -> SymMat {
    let mut m = SymMat::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            *m.at_mut(i, j) = 0.5 * (gram[i * n + j] + gram[j * n + i]);
        }
    }
    m
}

#[derive(Clone, Copy, Debug)]
pub struct NumericReport {
    /// Largest absolute coefficient of target minus reconstruction.
    pub residual: f64,
    /// 1 + largest absolute coefficient of the target.
    pub residual_scale: f64,
    /// Smallest eigenvalue over all Gram blocks.
    pub min_gram_eig: f64,
}

/// Check a floating-point certificate against the target within `tol`.
pub fn verify_numeric(
    cert: &GramCertificate<f64>,
    target: &QMatPoly,
    tol: f64,
) -> Result<NumericReport, GramError> {
    let diff = cert.reconstruct().sub(&target.to_f64_poly());
    let residual = diff.max_abs_coeff();
    let residual_scale = 1.0 + target.max_abs_coeff();
    let mut min_gram_eig = f64::INFINITY;
    for (i, part) in cert.parts.iter().enumerate() {
        let n = part.side(cert.t);
        let gram = match part {
            GramPart::Scalar { gram, .. } => gram,
            GramPart::Matrix { gram, .. } => gram,
        };
        let m = part_sym_f64(gram, n);
        let eig = min_eig(&m)?;
        min_gram_eig = min_gram_eig.min(eig);
        let scale = 1.0 + gram.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if eig < -tol * scale {
            return Err(GramError::BlockNotPsd(i));
        }
    }
    if residual > tol * residual_scale {
        return Err(GramError::Residual(residual));
    }
    Ok(NumericReport { residual, residual_scale, min_gram_eig })
}

/// Check an exact certificate: coefficient identity holds over the rationals
/// and every Gram block is positive semidefinite, both decided exactly.
pub fn verify_exact(cert: &GramCertificate<Rat>, target: &QMatPoly) -> Result<(), GramError> {
    let diff = target.sub(&cert.reconstruct());
    if !diff.is_zero() {
        return Err(GramError::Residual(diff.max_abs_coeff()));
    }
    for (i, part) in cert.parts.iter().enumerate() {
        let n = part.side(cert.t);
        let gram = match part {
            GramPart::Scalar { gram, .. } => gram,
            GramPart::Matrix { gram, .. } => gram,
        };
        if rational_ldl(gram, n).is_none() {
            return Err(GramError::BlockNotPsd(i));
        }
    }
    Ok(())
}

/// Exact pivoted LDL^T of a symmetric rational matrix given as a full
/// row-major square. Returns the rank-one terms (pivot, column vector) with
/// sum_k d_k c_k c_k^T equal to the input, or None if the matrix is not
/// positive semidefinite.
pub(crate) fn rational_ldl(gram: &[Rat], n: usize) -> Option<Vec<(Rat, Vec<Rat>)>> {
    let zero = rat_int(0);
    let mut a: Vec<Vec<Rat>> = (0..n)
        .map(|i| (0..n).map(|j| gram[i * n + j].clone()).collect())
        .collect();
    // Work on the symmetrized lower view in case of asymmetric input.
    for i in 0..n {
        for j in 0..i {
            let avg = (a[i][j].clone() + a[j][i].clone()) * rat(1, 2);
            a[i][j] = avg.clone();
            a[j][i] = avg;
        }
    }
    let mut active: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    while !active.is_empty() {
        let &p = active.iter().max_by(|&&i, &&j| a[i][i].cmp(&a[j][j]))?;
        if a[p][p] < zero {
            return None;
        }
        if a[p][p] == zero {
            for &i in &active {
                for &j in &active {
                    if a[i][j] != zero {
                        return None;
                    }
                }
            }
            break;
        }
        let d = a[p][p].clone();
        let mut c = vec![zero.clone(); n];
        for &i in &active {
            c[i] = a[i][p].clone() / d.clone();
        }
        for &i in &active {
            for &j in &active {
                let upd = d.clone() * c[i].clone() * c[j].clone();
                a[i][j] = a[i][j].clone() - upd;
            }
        }
        out.push((d, c));
        active.retain(|&i| i != p);
    }
    Some(out)
}

/// Weighted square form sum_i w_i p_i^T g p_i, grouped by generator.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorPart<C: Coeff> {
    pub generator: QMatPoly,
    pub weights: Vec<C>,
    pub transformers: Vec<MatrixPoly<C>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorForm<C: Coeff> {
    pub nvars: usize,
    pub t: usize,
    pub parts: Vec<FactorPart<C>>,
}

impl<C: Coeff> FactorForm<C> {
    pub fn reconstruct(&self) -> MatrixPoly<C> {
        let mut acc = MatrixPoly::zero(self.nvars, self.t);
        for part in &self.parts {
            let g = part.generator.map_coeff(C::from_rat);
            for (w, p) in part.weights.iter().zip(&part.transformers) {
                acc = acc.add(&g.congruence(p).scale(w));
            }
        }
        acc
    }
}

fn scalar_row_poly<C: Coeff>(
    row: &[C],
    basis: &[Monomial],
    t: usize,
    dest_row: usize,
    p: &mut MatrixPoly<C>,
) {
    for (ai, a) in basis.iter().enumerate() {
        for k in 0..t {
            let c = &row[ai * t + k];
            if !c.is_zero() {
                p.entry_mut(dest_row, k).add_term(a.clone(), c.clone());
            }
        }
    }
}

fn matrix_row_poly<C: Coeff>(row: &[C], basis: &[Monomial], t: usize, nvars: usize) -> MatrixPoly<C> {
    let mut p = MatrixPoly::zero(nvars, t);
    for (ai, a) in basis.iter().enumerate() {
        for u in 0..t {
            for k in 0..t {
                let c = &row[(ai * t + u) * t + k];
                if !c.is_zero() {
                    p.entry_mut(u, k).add_term(a.clone(), c.clone());
                }
            }
        }
    }
    p
}

/// Extract a weighted square form from a floating-point certificate by
/// eigenfactoring each Gram block. Rows of scalar-generator blocks are
/// batched t at a time into a single transformer.
pub fn factor_form_numeric(
    cert: &GramCertificate<f64>,
    tol: f64,
) -> Result<FactorForm<f64>, GramError> {
    if cert.has_free_multipliers() {
        return Err(GramError::HasFreeMultipliers);
    }
    let t = cert.t;
    let mut parts = Vec::new();
    for (i, part) in cert.parts.iter().enumerate() {
        let n = part.side(t);
        let (gram, basis) = match part {
            GramPart::Scalar { gram, basis, .. } => (gram, basis),
            GramPart::Matrix { gram, basis, .. } => (gram, basis),
        };
        let m = part_sym_f64(gram, n);
        let fac = match psd_factor(&m, tol) {
            Ok(f) => f,
            Err(LinalgError::IndefiniteInput(_)) => return Err(GramError::BlockNotPsd(i)),
            Err(e) => return Err(e.into()),
        };
        let mut weights = Vec::new();
        let mut transformers = Vec::new();
        match part {
            GramPart::Scalar { .. } => {
                let mut r = 0;
                while r < fac.rank {
                    let hi = (r + t).min(fac.rank);
                    let mut p = MatrixPoly::zero(cert.nvars, t);
                    for (dest, rr) in (r..hi).enumerate() {
                        let row: Vec<f64> = (0..n).map(|c| fac.rows[(rr, c)]).collect();
                        scalar_row_poly(&row, basis, t, dest, &mut p);
                    }
                    weights.push(1.0);
                    transformers.push(p);
                    r = hi;
                }
            }
            GramPart::Matrix { .. } => {
                for rr in 0..fac.rank {
                    let row: Vec<f64> = (0..n).map(|c| fac.rows[(rr, c)]).collect();
                    weights.push(1.0);
                    transformers.push(matrix_row_poly(&row, basis, t, cert.nvars));
                }
            }
        }
        if !transformers.is_empty() {
            parts.push(FactorPart { generator: part.generator_poly(t), weights, transformers });
        }
    }
    Ok(FactorForm { nvars: cert.nvars, t, parts })
}

/// Extract an exact weighted square form from a rational certificate via
/// pivoted LDL^T; the weights are the (positive rational) pivots.
pub fn factor_form_exact(cert: &GramCertificate<Rat>) -> Result<FactorForm<Rat>, GramError> {
    if cert.has_free_multipliers() {
        return Err(GramError::HasFreeMultipliers);
    }
    let t = cert.t;
    let mut parts = Vec::new();
    for (i, part) in cert.parts.iter().enumerate() {
        let n = part.side(t);
        let (gram, basis) = match part {
            GramPart::Scalar { gram, basis, .. } => (gram, basis),
            GramPart::Matrix { gram, basis, .. } => (gram, basis),
        };
        let ldl = rational_ldl(gram, n).ok_or(GramError::BlockNotPsd(i))?;
        let mut weights = Vec::new();
        let mut transformers = Vec::new();
        for (d, c) in ldl {
            match part {
                GramPart::Scalar { .. } => {
                    let mut p = MatrixPoly::zero(cert.nvars, t);
                    scalar_row_poly(&c, basis, t, 0, &mut p);
                    weights.push(d);
                    transformers.push(p);
                }
                GramPart::Matrix { .. } => {
                    weights.push(d);
                    transformers.push(matrix_row_poly(&c, basis, t, cert.nvars));
                }
            }
        }
        if !transformers.is_empty() {
            parts.push(FactorPart { generator: part.generator_poly(t), weights, transformers });
        }
    }
    Ok(FactorForm { nvars: cert.nvars, t, parts })
}

/// Average a certificate over the matrix diagonal: when every generator is
/// scalar times identity, a certificate for a t×t target induces one for the
/// scalar (1/t)·trace(target) by partially tracing each Gram block.
pub fn partial_trace(cert: &GramCertificate<Rat>) -> Result<GramCertificate<Rat>, GramError> {
    let t = cert.t;
    let tr = rat_int(t as i64);
    let mut parts = Vec::with_capacity(cert.parts.len());
    for (i, part) in cert.parts.iter().enumerate() {
        match part {
            GramPart::Scalar { sigma, basis, gram } => {
                let b = basis.len();
                let n = b * t;
                let mut small = vec![rat_int(0); b * b];
                for ai in 0..b {
                    for bj in 0..b {
                        let mut acc = rat_int(0);
                        for k in 0..t {
                            acc = acc + gram[(ai * t + k) * n + (bj * t + k)].clone();
                        }
                        small[ai * b + bj] = acc / tr.clone();
                    }
                }
                parts.push(GramPart::Scalar {
                    sigma: sigma.clone(),
                    basis: basis.clone(),
                    gram: small,
                });
            }
            GramPart::Matrix { .. } => return Err(GramError::NonScalarGenerator(i)),
        }
    }
    let free = cert
        .free
        .iter()
        .map(|fp| {
            let traced = fp.h.trace().scale(&(rat_int(1) / tr.clone()));
            FreePart { q: fp.q.clone(), h: MatrixPoly::from_scalar(traced) }
        })
        .collect();
    Ok(GramCertificate { nvars: cert.nvars, t: 1, degree: cert.degree, parts, free })
}

#[derive(Clone, Debug)]
pub struct RationalizeOptions {
    /// Denominator bounds tried in order when rounding entries.
    pub max_denominators: Vec<u64>,
    /// Base relative eigenvalue threshold for detecting Gram kernels. Large
    /// downward gaps in each block's spectrum supply further candidate
    /// readings, tried from the most decisive gap on.
    pub kernel_tol: f64,
}

impl Default for RationalizeOptions {
    fn default() -> Self {
        RationalizeOptions {
            max_denominators: vec![1 << 8, 1 << 20, 1 << 32, 1 << 44],
            kernel_tol: 1e-5,
        }
    }
}

/// Round a floating-point certificate to an exact rational one.
///
/// Every Gram entry and multiplier coefficient is rounded by continued
/// fractions under a denominator bound; the (exactly computed) coefficient
/// residual is then folded into designated entries of the identity block, one
/// entry per (monomial, position) pair, and positive semidefiniteness is
/// re-decided exactly. When rounding lands outside the cone, a second pass
/// reads a kernel for each block off its spectrum, restricts the Gram ansatz
/// to the largest rational subspace orthogonal to that kernel, and re-solves
/// the coefficient constraints exactly. The restriction comes from integer
/// relations found by lattice reduction, so a kernel with irrational entries
/// widens to its rational closure instead of being rounded to a nearby
/// rational subspace on which no solution exists. Failure leaves the caller
/// with a numeric-only certificate.
pub fn rationalize(
    cert: &GramCertificate<f64>,
    target: &QMatPoly,
    opts: &RationalizeOptions,
) -> Result<GramCertificate<Rat>, GramError> {
    if target.nvars() != cert.nvars {
        return Err(GramError::VarMismatch { expected: cert.nvars, got: target.nvars() });
    }
    if target.size() != cert.t {
        return Err(GramError::DimMismatch { expected: cert.t, got: target.size() });
    }
    let one = ScalarPoly::one(cert.nvars);
    let id_idx = cert.parts.iter().position(|p| match p {
        GramPart::Scalar { sigma, .. } => *sigma == one,
        GramPart::Matrix { .. } => false,
    });

    if let Some(i0) = id_idx {
        for &md in &opts.max_denominators {
            let mut rounded = round_certificate(cert, md);
            let resid = target.sub(&rounded.reconstruct());
            absorb_residual(&mut rounded, &resid, i0);
            if parts_look_psd(&rounded) && verify_exact(&rounded, target).is_ok() {
                return Ok(rounded);
            }
        }
    }
    // The kernel restriction and the eliminated constraint system depend only
    // on the certificate, the target, and the chosen kernel reading, so each
    // reading is built once and re-pinned at every denominator bound. Where
    // the kernel ends is ambiguous in a barely converged spectrum; distinct
    // readings differ in their reduced ranks, which is what `seen` keys on.
    if let Some(eigs) = part_eigens(cert) {
        let spectra: Vec<&[f64]> = eigs.iter().map(|e| e.values.as_slice()).collect();
        let mut seen: Vec<Vec<usize>> = Vec::new();
        for cuts in kernel_cut_candidates(&spectra, opts.kernel_tol) {
            let Some(sys) = KernelSystem::build(cert, target, &eigs, &cuts) else {
                continue;
            };
            let sig: Vec<usize> = sys.reductions.iter().map(|red| red.r).collect();
            if seen.contains(&sig) {
                continue;
            }
            seen.push(sig);
            for &md in &opts.max_denominators {
                if let Some(r) = sys.solve_at(cert, md) {
                    if verify_exact(&r, target).is_ok() {
                        return Ok(r);
                    }
                }
            }
        }
    }
    Err(GramError::RationalizationFailed(
        "no exact positive semidefinite completion found within the denominator budget".into(),
    ))
}

fn part_eigens(cert: &GramCertificate<f64>) -> Option<Vec<SymEigen>> {
    cert.parts
        .iter()
        .map(|part| {
            let n = part.side(cert.t);
            let gram = match part {
                GramPart::Scalar { gram, .. } => gram,
                GramPart::Matrix { gram, .. } => gram,
            };
            sym_eigen(&part_sym_f64(gram, n)).ok()
        })
        .collect()
}

/// Cheap floating-point screen, applied before paying for an exact positive
/// semidefiniteness decision: a candidate whose Gram blocks are clearly
/// indefinite in f64 cannot verify. Blocks an exact check never rejects are
/// kept (an eigenvalue that is exactly zero reads as roundoff here).
fn parts_look_psd(cert: &GramCertificate<Rat>) -> bool {
    for part in &cert.parts {
        let n = part.side(cert.t);
        let gram = match part {
            GramPart::Scalar { gram, .. } => gram,
            GramPart::Matrix { gram, .. } => gram,
        };
        let gf: Vec<f64> = gram.iter().map(rat_to_f64).collect();
        let scale = gf.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if let Ok(lmin) = min_eig(&part_sym_f64(&gf, n)) {
            if lmin < -1e-9 * scale {
                return false;
            }
        }
    }
    true
}

/// Candidate per-part relative kernel thresholds: the base tolerance first,
/// then cuts at the largest downward gaps of each block's spectrum.
fn kernel_cut_candidates(spectra: &[&[f64]], base: f64) -> Vec<Vec<f64>> {
    let ranked: Vec<Vec<f64>> = spectra.iter().map(|vals| ranked_gap_cuts(vals)).collect();
    let depth = ranked.iter().map(Vec::len).max().unwrap_or(0).min(3);
    let mut out = vec![vec![base; spectra.len()]];
    for rank in 0..depth {
        out.push(ranked.iter().map(|cuts| cuts.get(rank).copied().unwrap_or(base)).collect());
    }
    out
}

/// Relative thresholds splitting a spectrum at its clearest downward gaps,
/// widest ratio first. Only drops landing below five percent of the top
/// eigenvalue count; declaring a structurally large eigenvalue to be kernel
/// would only ever produce an inconsistent system.
fn ranked_gap_cuts(vals: &[f64]) -> Vec<f64> {
    let mut mags: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let lmax = mags.first().copied().unwrap_or(0.0).max(1.0);
    let floor = 1e-14 * lmax;
    let mut cuts: Vec<(f64, f64)> = Vec::new();
    for pair in mags.windows(2) {
        if pair[1] > 0.05 * lmax {
            continue;
        }
        let hi = pair[0].max(floor);
        let lo = pair[1].max(floor);
        let ratio = hi / lo;
        if ratio >= 8.0 {
            cuts.push((ratio, (hi * lo).sqrt() / lmax));
        }
    }
    cuts.sort_by(|a, b| b.0.total_cmp(&a.0));
    cuts.into_iter().map(|(_, tol)| tol).collect()
}

fn round_certificate(cert: &GramCertificate<f64>, max_den: u64) -> GramCertificate<Rat> {
    let parts = cert
        .parts
        .iter()
        .map(|p| match p {
            GramPart::Scalar { sigma, basis, gram } => GramPart::Scalar {
                sigma: sigma.clone(),
                basis: basis.clone(),
                gram: gram.iter().map(|v| round_f64_to_rat(*v, max_den)).collect(),
            },
            GramPart::Matrix { g, basis, gram } => GramPart::Matrix {
                g: g.clone(),
                basis: basis.clone(),
                gram: gram.iter().map(|v| round_f64_to_rat(*v, max_den)).collect(),
            },
        })
        .collect();
    let free = cert
        .free
        .iter()
        .map(|fp| FreePart {
            q: fp.q.clone(),
            h: fp.h.map_coeff(|v| round_f64_to_rat(*v, max_den)),
        })
        .collect();
    GramCertificate { nvars: cert.nvars, t: cert.t, degree: cert.degree, parts, free }
}

/// Split a monomial into two halves of degree ceil(d/2) and floor(d/2).
fn half_split(m: &Monomial) -> (Monomial, Monomial) {
    let exps = m.exponents();
    let mut need = (m.degree() + 1) / 2;
    let mut a = vec![0u32; exps.len()];
    let mut b = vec![0u32; exps.len()];
    for (i, &e) in exps.iter().enumerate() {
        let take = e.min(need);
        a[i] = take;
        b[i] = e - take;
        need -= take;
    }
    (Monomial::from_exponents(a), Monomial::from_exponents(b))
}

/// Fold an exact coefficient residual into the identity Gram block, one
/// designated entry per (monomial, position) pair.
fn absorb_residual(cert: &mut GramCertificate<Rat>, resid: &QMatPoly, id_idx: usize) {
    let t = cert.t;
    let (basis, gram) = match &mut cert.parts[id_idx] {
        GramPart::Scalar { basis, gram, .. } => (basis, gram),
        GramPart::Matrix { .. } => unreachable!("identity part is always a scalar block"),
    };
    let index: BTreeMap<&Monomial, usize> = basis.iter().enumerate().map(|(i, m)| (m, i)).collect();
    let n = basis.len() * t;
    for k in 0..t {
        for l in k..t {
            for (alpha, c) in resid.entry(k, l).terms() {
                let (a, b) = half_split(alpha);
                let ai = index[&a];
                let bj = index[&b];
                let i0 = ai * t + k;
                let j0 = bj * t + l;
                if i0 == j0 {
                    gram[i0 * n + j0] = gram[i0 * n + j0].clone() + c.clone();
                } else {
                    let delta = if k == l && a != b { c.clone() * rat(1, 2) } else { c.clone() };
                    gram[i0 * n + j0] = gram[i0 * n + j0].clone() + delta.clone();
                    gram[j0 * n + i0] = gram[j0 * n + i0].clone() + delta;
                }
            }
        }
    }
}

fn nearest_div(a: &BigInt, b: &BigInt) -> BigInt {
    use num::Integer;
    (BigInt::from(2) * a + b).div_floor(&(BigInt::from(2) * b))
}

fn size_reduce(b: &mut [Vec<BigInt>], lam: &mut [Vec<BigInt>], d: &[BigInt], k: usize, l: usize) {
    use num::Signed;
    if lam[k][l].abs() * BigInt::from(2) <= d[l + 1] {
        return;
    }
    let q = nearest_div(&lam[k][l], &d[l + 1]);
    let (lo, hi) = b.split_at_mut(k);
    for (x, y) in hi[0].iter_mut().zip(&lo[l]) {
        *x -= &q * y;
    }
    lam[k][l] = &lam[k][l] - &q * &d[l + 1];
    for j in 0..l {
        let sub = &q * &lam[l][j];
        lam[k][j] = &lam[k][j] - sub;
    }
}

/// Lattice basis reduction (Lenstra–Lenstra–Lovász with parameter 3/4) in
/// the all-integer formulation: the Gram–Schmidt data is carried as the
/// integers d_i = det G_i and λ_{i,j} = d_j μ_{i,j}, so every division below
/// is exact. Rows must be linearly independent; they are reduced in place.
pub(crate) fn lll_reduce(b: &mut [Vec<BigInt>]) {
    use num::{One, Zero};
    let n = b.len();
    if n <= 1 {
        return;
    }
    let dot = |x: &[BigInt], y: &[BigInt]| -> BigInt { x.iter().zip(y).map(|(u, v)| u * v).sum() };
    let mut d: Vec<BigInt> = vec![BigInt::one(); n + 1];
    let mut lam: Vec<Vec<BigInt>> = vec![vec![BigInt::zero(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut u = dot(&b[i], &b[j]);
            for k in 0..j {
                u = (&d[k + 1] * &u - &lam[i][k] * &lam[j][k]) / &d[k];
            }
            if j < i {
                lam[i][j] = u;
            } else {
                d[i + 1] = u;
            }
        }
    }
    let mut k = 1;
    while k < n {
        size_reduce(b, &mut lam, &d, k, k - 1);
        let swap = BigInt::from(4) * (&d[k + 1] * &d[k - 1] + &lam[k][k - 1] * &lam[k][k - 1])
            < BigInt::from(3) * &d[k] * &d[k];
        if swap {
            b.swap(k, k - 1);
            let (lo, hi) = lam.split_at_mut(k);
            for j in 0..k.saturating_sub(1) {
                std::mem::swap(&mut hi[0][j], &mut lo[k - 1][j]);
            }
            let l = lam[k][k - 1].clone();
            let bnew = (&d[k - 1] * &d[k + 1] + &l * &l) / &d[k];
            for i in k + 1..n {
                let t = std::mem::take(&mut lam[i][k]);
                lam[i][k] = (&d[k + 1] * &lam[i][k - 1] - &l * &t) / &d[k];
                lam[i][k - 1] = (&bnew * &t + &l * &lam[i][k]) / &d[k + 1];
            }
            d[k] = bnew;
            k = if k > 1 { k - 1 } else { 1 };
        } else {
            for l in (0..k.saturating_sub(1)).rev() {
                size_reduce(b, &mut lam, &d, k, l);
            }
            k += 1;
        }
    }
}

/// Columns of an integer basis for the largest rational subspace orthogonal
/// to the span of the given unit vectors, known only numerically. Each basis
/// row [e_i | S·v_1[i] .. S·v_m[i]] pays a heavy penalty for any residual
/// pairing with the vectors, so after reduction the rows whose tails are
/// tiny are exactly the short integer relations; everything they span is
/// orthogonal to the true kernel whenever that kernel is rational-closed.
fn rational_complement(kernel: &[Vec<f64>], n: usize) -> Vec<Vec<Rat>> {
    use num::{Integer, One, Signed, Zero};
    let m = kernel.len();
    let scale = (1u64 << 28) as f64;
    let mut rows: Vec<Vec<BigInt>> = (0..n)
        .map(|i| {
            let mut row = vec![BigInt::zero(); n + m];
            row[i] = BigInt::one();
            for (k, v) in kernel.iter().enumerate() {
                row[n + k] = BigInt::from((scale * v[i]).round() as i64);
            }
            row
        })
        .collect();
    lll_reduce(&mut rows);
    let mut cols: Vec<Vec<BigInt>> = Vec::new();
    for row in &rows {
        let head_l1: BigInt = row[..n].iter().map(|v| v.abs()).sum();
        if head_l1.is_zero() {
            continue;
        }
        let limit = BigInt::from(64) * (BigInt::one() + &head_l1);
        if row[n..].iter().all(|v| v.abs() <= limit) {
            cols.push(row[..n].to_vec());
        }
    }
    for col in cols.iter_mut() {
        let mut g = BigInt::zero();
        for v in col.iter() {
            g = g.gcd(v);
        }
        if g > BigInt::one() {
            for v in col.iter_mut() {
                *v /= &g;
            }
        }
    }
    let mut p = vec![vec![rat_int(0); cols.len()]; n];
    for (c, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            p[i][c] = Rat::from_integer(v.clone());
        }
    }
    p
}

/// Reduced row echelon form over the rationals; returns pivot columns.
fn rref_rat(rows: &mut Vec<Vec<Rat>>) -> Vec<usize> {
    let zero = rat_int(0);
    let mut pivots = Vec::new();
    if rows.is_empty() {
        return pivots;
    }
    let ncols = rows[0].len();
    let mut r = 0;
    for col in 0..ncols {
        if r >= rows.len() {
            break;
        }
        let Some(sel) = (r..rows.len()).find(|&i| rows[i][col] != zero) else {
            continue;
        };
        rows.swap(r, sel);
        let piv = rows[r][col].clone();
        for v in rows[r].iter_mut() {
            *v = v.clone() / piv.clone();
        }
        for i in 0..rows.len() {
            if i != r && rows[i][col] != zero {
                let f = rows[i][col].clone();
                for j in 0..ncols {
                    let sub = f.clone() * rows[r][j].clone();
                    rows[i][j] = rows[i][j].clone() - sub;
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    rows.truncate(r);
    pivots
}

/// Rational basis of the null space of the given rows, as columns p[i][c].
/// Each column is scaled to coprime integer entries so that downstream
/// products stay fraction-free.
fn rat_nullspace(mut rows: Vec<Vec<Rat>>, n: usize) -> Vec<Vec<Rat>> {
    use num::{Integer, One, Zero};
    let zero = rat_int(0);
    let one = rat_int(1);
    if rows.is_empty() {
        let mut p = vec![vec![zero; n]; n];
        for (i, row) in p.iter_mut().enumerate() {
            row[i] = one.clone();
        }
        return p;
    }
    let pivots = rref_rat(&mut rows);
    let pivot_set: std::collections::BTreeSet<usize> = pivots.iter().copied().collect();
    let free: Vec<usize> = (0..n).filter(|c| !pivot_set.contains(c)).collect();
    let mut p = vec![vec![zero.clone(); free.len()]; n];
    for (c, &fc) in free.iter().enumerate() {
        p[fc][c] = one.clone();
        for (ri, &pc) in pivots.iter().enumerate() {
            p[pc][c] = -rows[ri][fc].clone();
        }
    }
    for c in 0..free.len() {
        let mut l = BigInt::one();
        for row in p.iter() {
            l = l.lcm(row[c].denom());
        }
        let mut g = BigInt::zero();
        for row in p.iter() {
            g = g.gcd(&(row[c].numer() * (&l / row[c].denom())));
        }
        if !g.is_zero() && l != g {
            let f = Rat::new(l, g);
            for row in p.iter_mut() {
                row[c] = row[c].clone() * f.clone();
            }
        }
    }
    p
}

/// A rational linear system reduced once to row echelon form, so that
/// solutions pinned to different free-variable anchors can be read off
/// repeatedly without repeating the elimination.
///
/// Columns are pre-scaled to integers (the scale is folded back into the
/// solution) and every right-hand side is cleared of its denominator, after
/// which the elimination is Bareiss' fraction-free scheme: each update
/// divides exactly by the previous pivot, keeping the entries minors of the
/// scaled system instead of ever-growing fractions.
struct PinnedSystem {
    /// Echelon rows of the scaled augmented matrix, ncols + 1 wide.
    rows: Vec<Vec<BigInt>>,
    /// (row, column) of each pivot, in elimination order.
    pivots: Vec<(usize, usize)>,
    /// Per-column scale: original unknown = scale · scaled unknown.
    scale: Vec<BigInt>,
    ncols: usize,
}

impl PinnedSystem {
    fn reduce(a: Vec<Vec<Rat>>, rhs: Vec<Rat>, ncols: usize) -> PinnedSystem {
        use num::{Integer, One, Zero};
        let nrows = a.len();
        let mut scale = vec![BigInt::one(); ncols];
        for (j, s) in scale.iter_mut().enumerate() {
            for row in &a {
                let d = row[j].denom();
                if !d.is_one() {
                    *s = s.lcm(d);
                }
            }
        }
        let mut rows: Vec<Vec<BigInt>> = Vec::with_capacity(nrows);
        for (arow, b) in a.iter().zip(&rhs) {
            let q = b.denom();
            let mut mrow = Vec::with_capacity(ncols + 1);
            for (j, v) in arow.iter().enumerate() {
                mrow.push((&scale[j] / v.denom()) * v.numer() * q);
            }
            mrow.push(b.numer().clone());
            rows.push(mrow);
        }
        drop(a);
        let mut pivots = Vec::new();
        let mut prev = BigInt::one();
        let mut r = 0;
        for col in 0..ncols {
            if r >= nrows {
                break;
            }
            let Some(sel) = (r..nrows)
                .filter(|&i| !rows[i][col].is_zero())
                .min_by(|&i, &j| rows[i][col].magnitude().cmp(rows[j][col].magnitude()))
            else {
                continue;
            };
            rows.swap(r, sel);
            let (top, rest) = rows.split_at_mut(r + 1);
            let prow = top.last().unwrap();
            let piv = prow[col].clone();
            for mrow in rest.iter_mut() {
                let m = std::mem::replace(&mut mrow[col], BigInt::zero());
                for j in col + 1..=ncols {
                    let num = &piv * &mrow[j] - &m * &prow[j];
                    debug_assert!((&num % &prev).is_zero());
                    mrow[j] = num / &prev;
                }
            }
            prev = piv;
            pivots.push((r, col));
            r += 1;
        }
        PinnedSystem { rows, pivots, scale, ncols }
    }

    /// Back-substitute with the free coordinates held at the warm anchors.
    /// Returns None when the system is inconsistent.
    fn solve(&self, warm: &[Rat]) -> Option<Vec<Rat>> {
        use num::Zero;
        let rank = self.pivots.len();
        for row in &self.rows[rank..] {
            if !row[self.ncols].is_zero() {
                return None;
            }
        }
        let mut y: Vec<Rat> = warm
            .iter()
            .zip(&self.scale)
            .map(|(w, s)| w.clone() / Rat::from_integer(s.clone()))
            .collect();
        for &(row, col) in self.pivots.iter().rev() {
            let r = &self.rows[row];
            let mut acc = Rat::from_integer(r[self.ncols].clone());
            for j in col + 1..self.ncols {
                if !r[j].is_zero() {
                    acc -= Rat::from_integer(r[j].clone()) * y[j].clone();
                }
            }
            y[col] = acc / Rat::from_integer(r[col].clone());
        }
        Some(
            y.into_iter()
                .zip(&self.scale)
                .map(|(v, s)| v * Rat::from_integer(s.clone()))
                .collect(),
        )
    }
}

/// Round to a fraction whose denominator divides the (power of two) bound,
/// so that the anchors share denominators and sums over them stay compact.
fn dyadic_round(v: f64, max_den: u64) -> Rat {
    let scaled = v * max_den as f64;
    if !scaled.is_finite() {
        return round_f64_to_rat(v, max_den);
    }
    Rat::new(BigInt::from(scaled.round() as i128), BigInt::from(max_den))
}

struct Reduction {
    /// Complement basis, n rows by r columns.
    p: Vec<Vec<Rat>>,
    /// The same basis in f64, for warm starts and candidate screening.
    pf: Mat,
    r: usize,
}

enum Unknown {
    Part { part: usize, c: usize, d: usize },
    Free { slot: usize },
}

struct FreeUnknownSlot {
    f: usize,
    mono: Monomial,
    row: usize,
    col: usize,
}

/// The restriction of a certificate's Gram blocks to the rational complement
/// of their numerical kernels, together with the eliminated coefficient
/// constraint system and an unrounded anchor for every remaining unknown.
/// Built once per certificate; re-pinned cheaply at each denominator bound.
struct KernelSystem {
    reductions: Vec<Reduction>,
    unknowns: Vec<Unknown>,
    free_slots: Vec<FreeUnknownSlot>,
    pinned: PinnedSystem,
    warm: Vec<f64>,
}

impl KernelSystem {
    fn build(
        cert: &GramCertificate<f64>,
        target: &QMatPoly,
        eigs: &[SymEigen],
        cuts: &[f64],
    ) -> Option<KernelSystem> {
        let t = cert.t;
        let nvars = cert.nvars;
        let two_d = 2 * cert.degree;

        let mut reductions = Vec::with_capacity(cert.parts.len());
        for (pi, part) in cert.parts.iter().enumerate() {
            let n = part.side(t);
            let eig = &eigs[pi];
            let lmax = eig.values.first().copied().unwrap_or(0.0).max(1.0);
            let mut kernel: Vec<Vec<f64>> = Vec::new();
            for (k, &lam) in eig.values.iter().enumerate() {
                if lam.abs() <= cuts[pi] * lmax {
                    kernel.push((0..n).map(|i| eig.vectors[(i, k)]).collect());
                }
            }
            let p = if kernel.is_empty() {
                rat_nullspace(Vec::new(), n)
            } else {
                rational_complement(&kernel, n)
            };
            let r = p.first().map_or(0, Vec::len);
            let mut pf = Mat::zeros(n, r);
            for i in 0..n {
                for c in 0..r {
                    pf[(i, c)] = rat_to_f64(&p[i][c]);
                }
            }
            reductions.push(Reduction { p, pf, r });
        }

        let mut unknowns: Vec<Unknown> = Vec::new();
        for (pi, red) in reductions.iter().enumerate() {
            for c in 0..red.r {
                for d in c..red.r {
                    unknowns.push(Unknown::Part { part: pi, c, d });
                }
            }
        }
        let mut free_slots: Vec<FreeUnknownSlot> = Vec::new();
        for (fi, fp) in cert.free.iter().enumerate() {
            if fp.q.is_zero() || fp.q.degree() > two_d {
                continue;
            }
            for mono in monomials_up_to(nvars, two_d - fp.q.degree()) {
                for k in 0..t {
                    for l in k..t {
                        free_slots.push(FreeUnknownSlot {
                            f: fi,
                            mono: mono.clone(),
                            row: k,
                            col: l,
                        });
                        unknowns.push(Unknown::Free { slot: free_slots.len() - 1 });
                    }
                }
            }
        }

        let mut labels = Vec::new();
        for mono in monomials_up_to(nvars, two_d) {
            for k in 0..t {
                for l in k..t {
                    labels.push((mono.clone(), k, l));
                }
            }
        }
        let label_index: BTreeMap<(Monomial, usize, usize), usize> =
            labels.iter().cloned().enumerate().map(|(i, lab)| (lab, i)).collect();

        let zero = rat_int(0);
        let mut system: Vec<Vec<Rat>> = vec![vec![zero.clone(); unknowns.len()]; labels.len()];
        let rhs: Vec<Rat> = labels.iter().map(|(m, k, l)| target.coeff_at(m, *k, *l)).collect();

        for (ci, unk) in unknowns.iter().enumerate() {
            match unk {
                Unknown::Part { part, c, d } => {
                    let red = &reductions[*part];
                    let n = cert.parts[*part].side(t);
                    let mut e = vec![zero.clone(); n * n];
                    for i in 0..n {
                        for j in 0..n {
                            let mut v = red.p[i][*c].clone() * red.p[j][*d].clone();
                            if c != d {
                                v = v + red.p[i][*d].clone() * red.p[j][*c].clone();
                            }
                            e[i * n + j] = v;
                        }
                    }
                    let unit = replace_gram(&cert.parts[*part], e);
                    let poly = unit.poly(nvars, t);
                    for k in 0..t {
                        for l in k..t {
                            for (alpha, coeff) in poly.entry(k, l).terms() {
                                let row = label_index[&(alpha.clone(), k, l)];
                                system[row][ci] = system[row][ci].clone() + coeff.clone();
                            }
                        }
                    }
                }
                Unknown::Free { slot } => {
                    let s = &free_slots[*slot];
                    for (gamma, qc) in cert.free[s.f].q.terms() {
                        let alpha = s.mono.mul(gamma);
                        let row = label_index[&(alpha, s.row, s.col)];
                        system[row][ci] = system[row][ci].clone() + qc.clone();
                    }
                }
            }
        }

        let mut anchors = Vec::with_capacity(cert.parts.len());
        for (part, red) in cert.parts.iter().zip(&reductions) {
            let n = part.side(t);
            let gram = match part {
                GramPart::Scalar { gram, .. } => gram,
                GramPart::Matrix { gram, .. } => gram,
            };
            anchors.push(reduced_warm_start(gram, n, &red.pf, red.r)?);
        }
        let warm = unknowns
            .iter()
            .map(|unk| match unk {
                Unknown::Part { part, c, d } => anchors[*part][*c * reductions[*part].r + *d],
                Unknown::Free { slot } => {
                    let s = &free_slots[*slot];
                    cert.free[s.f].h.coeff_at(&s.mono, s.row, s.col)
                }
            })
            .collect();

        let ncols = unknowns.len();
        Some(KernelSystem {
            reductions,
            unknowns,
            free_slots,
            pinned: PinnedSystem::reduce(system, rhs, ncols),
            warm,
        })
    }

    fn solve_at(&self, cert: &GramCertificate<f64>, max_den: u64) -> Option<GramCertificate<Rat>> {
        let t = cert.t;
        let nvars = cert.nvars;
        let zero = rat_int(0);
        let warm: Vec<Rat> = self.warm.iter().map(|&v| dyadic_round(v, max_den)).collect();
        let sol = self.pinned.solve(&warm)?;

        let mut reduced_grams = Vec::with_capacity(cert.parts.len());
        let mut cursor = 0usize;
        for red in &self.reductions {
            let mut h = vec![zero.clone(); red.r * red.r];
            for c in 0..red.r {
                for d in c..red.r {
                    let v = sol[cursor].clone();
                    cursor += 1;
                    h[c * red.r + d] = v.clone();
                    h[d * red.r + c] = v;
                }
            }
            reduced_grams.push(h);
        }
        // Screen in f64 before lifting: an indefinite reduced block can never
        // verify, and the exact lift is the expensive step.
        for (red, h) in self.reductions.iter().zip(&reduced_grams) {
            if red.r == 0 {
                continue;
            }
            let mut hf = Mat::zeros(red.r, red.r);
            for c in 0..red.r {
                for d in 0..red.r {
                    hf[(c, d)] = rat_to_f64(&h[c * red.r + d]);
                }
            }
            let gf = red.pf.matmul(&hf).matmul(&red.pf.transpose());
            let scale = gf.data.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            if let Ok(lmin) = min_eig(&part_sym_f64(&gf.data, gf.rows)) {
                if lmin < -1e-9 * scale {
                    return None;
                }
            }
        }

        let mut new_parts = Vec::with_capacity(cert.parts.len());
        for (pi, part) in cert.parts.iter().enumerate() {
            let red = &self.reductions[pi];
            let h = &reduced_grams[pi];
            let n = part.side(t);
            let mut full = vec![zero.clone(); n * n];
            for i in 0..n {
                for j in 0..n {
                    let mut acc = zero.clone();
                    for c in 0..red.r {
                        if red.p[i][c] == zero {
                            continue;
                        }
                        for d in 0..red.r {
                            acc = acc
                                + red.p[i][c].clone()
                                    * h[c * red.r + d].clone()
                                    * red.p[j][d].clone();
                        }
                    }
                    full[i * n + j] = acc;
                }
            }
            new_parts.push(replace_gram(part, full));
        }
        let mut new_free: Vec<FreePart<Rat>> = cert
            .free
            .iter()
            .map(|fp| FreePart { q: fp.q.clone(), h: MatrixPoly::zero(nvars, t) })
            .collect();
        for (slot, s) in self.free_slots.iter().enumerate() {
            let ci = self
                .unknowns
                .iter()
                .position(|u| matches!(u, Unknown::Free { slot: s2 } if *s2 == slot))
                .unwrap();
            let v = sol[ci].clone();
            if !v.is_zero() {
                new_free[s.f].h.entry_mut(s.row, s.col).add_term(s.mono.clone(), v.clone());
                if s.row != s.col {
                    new_free[s.f].h.entry_mut(s.col, s.row).add_term(s.mono.clone(), v);
                }
            }
        }
        Some(GramCertificate {
            nvars,
            t,
            degree: cert.degree,
            parts: new_parts,
            free: new_free,
        })
    }
}

fn replace_gram(part: &GramPart<f64>, gram: Vec<Rat>) -> GramPart<Rat> {
    match part {
        GramPart::Scalar { sigma, basis, .. } => {
            GramPart::Scalar { sigma: sigma.clone(), basis: basis.clone(), gram }
        }
        GramPart::Matrix { g, basis, .. } => {
            GramPart::Matrix { g: g.clone(), basis: basis.clone(), gram }
        }
    }
}

/// Numeric projection of a Gram block into reduced coordinates:
/// H = (P^T P)^{-1} P^T G P (P^T P)^{-1}, so that P H P^T ~= G.
fn reduced_warm_start(gram: &[f64], n: usize, pf: &Mat, r: usize) -> Option<Vec<f64>> {
    if r == 0 {
        return Some(Vec::new());
    }
    let g = Mat { rows: n, cols: n, data: gram.to_vec() };
    let m = pf.transpose().matmul(pf);
    let tgp = pf.transpose().matmul(&g).matmul(pf);
    // Solve M H1 = T column by column, then M H^T = H1^T.
    let mut h1 = Mat::zeros(r, r);
    for col in 0..r {
        let b: Vec<f64> = (0..r).map(|i| tgp[(i, col)]).collect();
        let x = solve_linear(&m, &b).ok()?;
        for i in 0..r {
            h1[(i, col)] = x[i];
        }
    }
    let mut h = Mat::zeros(r, r);
    for row in 0..r {
        let b: Vec<f64> = (0..r).map(|j| h1[(row, j)]).collect();
        let x = solve_linear(&m, &b).ok()?;
        for j in 0..r {
            h[(row, j)] = x[j];
        }
    }
    h.symmetrize();
    Some(h.data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::rat;
    use crate::sdp::{solve, SdpOutcome, SdpSettings};

    fn x_poly(nvars: usize, i: usize) -> QPoly {
        ScalarPoly::var(nvars, i)
    }

    fn solve_feasible(enc: &MembershipEncoding) -> GramCertificate<f64> {
        let sol = solve(enc.instance(), &SdpSettings::default());
        match sol.outcome {
            SdpOutcome::Feasible { x, .. } => enc.certificate_from_solution(&x),
            other => panic!("expected a feasible solve, got {:?}", other),
        }
    }

    #[test]
    fn certifies_scalar_sos_numerically_and_exactly() {
        // f = (x+1)^2 + 1 = x^2 + 2x + 2.
        let x = x_poly(1, 0);
        let f = x.square().add(&x.scale(&rat_int(2))).add(&ScalarPoly::constant(1, rat_int(2)));
        let target = MatrixPoly::from_scalar(f);
        let module = ModulePresentation::unconstrained(1, 1);
        let enc = build_membership_sdp(&module, &target, 1, &[]).unwrap();
        let cert = solve_feasible(&enc);
        let report = verify_numeric(&cert, &target, 1e-7).unwrap();
        assert!(report.residual <= 1e-7 * report.residual_scale);
        assert!(report.min_gram_eig > 1e-3);

        let exact = rationalize(&cert, &target, &RationalizeOptions::default()).unwrap();
        verify_exact(&exact, &target).unwrap();
        let ff = factor_form_exact(&exact).unwrap();
        assert_eq!(ff.reconstruct(), target);
        for part in &ff.parts {
            for w in &part.weights {
                assert!(*w > rat_int(0));
            }
        }
    }

    #[test]
    fn matrix_generator_block_certifies_negative_identity() {
        // -I ∈ module of { (1-x^2) I, diag(-x-2, 1) }: the second generator is
        // genuinely matrix-valued, exercising the wide block layout. Witness:
        // -1 = -(x+2) + 1/2 (x+1)^2 + 1/2 (1-x^2) on the first diagonal entry.
        let x = x_poly(1, 0);
        let ball = ScalarPoly::one(1).sub(&x.square());
        let g1 = MatrixPoly::scalar_identity(&ball, 2);
        let mut g2 = MatrixPoly::zero(1, 2);
        *g2.entry_mut(0, 0) = x.neg().sub(&ScalarPoly::constant(1, rat_int(2)));
        *g2.entry_mut(1, 1) = ScalarPoly::one(1);
        let module = ModulePresentation::new(1, 2, vec![g1, g2]).unwrap();
        let target = MatrixPoly::identity(1, 2).neg();

        let enc = build_membership_sdp(&module, &target, 1, &[]).unwrap();
        let cert = solve_feasible(&enc);
        verify_numeric(&cert, &target, 1e-6).unwrap();

        let exact = rationalize(&cert, &target, &RationalizeOptions::default()).unwrap();
        verify_exact(&exact, &target).unwrap();

        let ff = factor_form_exact(&exact).unwrap();
        assert_eq!(ff.reconstruct(), target);
    }

    #[test]
    fn equality_multiplier_reaches_outside_the_cone() {
        // y = 1/2 (y+1)^2 - 1/2 (y^2+1): y is not a sum of squares, but is
        // one modulo the equality generator y^2 + 1.
        let y = x_poly(1, 0);
        let target = MatrixPoly::from_scalar(y.clone());
        let q = y.square().add(&ScalarPoly::one(1));
        let module = ModulePresentation::unconstrained(1, 1);
        let enc = build_membership_sdp(&module, &target, 1, &[q]).unwrap();
        let cert = solve_feasible(&enc);
        verify_numeric(&cert, &target, 1e-6).unwrap();
        assert!(cert.has_free_multipliers());

        let exact = rationalize(&cert, &target, &RationalizeOptions::default()).unwrap();
        verify_exact(&exact, &target).unwrap();
    }

    #[test]
    fn rejects_targets_above_the_degree_budget() {
        let x = x_poly(1, 0);
        let target = MatrixPoly::from_scalar(x.square().square());
        let module = ModulePresentation::unconstrained(1, 1);
        match build_membership_sdp(&module, &target, 1, &[]) {
            Err(GramError::DegreeTooSmall { target_deg: 4, relaxation: 1 }) => {}
            other => panic!("expected DegreeTooSmall, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn absorption_repairs_rounding_residue() {
        // Hand-built float certificate for x^2 + 2x + 2 with noisy entries.
        let x = x_poly(1, 0);
        let f = x.square().add(&x.scale(&rat_int(2))).add(&ScalarPoly::constant(1, rat_int(2)));
        let target = MatrixPoly::from_scalar(f);
        let cert = GramCertificate {
            nvars: 1,
            t: 1,
            degree: 1,
            parts: vec![GramPart::Scalar {
                sigma: ScalarPoly::one(1),
                basis: monomials_up_to(1, 1),
                gram: vec![2.0 + 3e-10, 1.0 - 2e-10, 1.0 - 2e-10, 1.0 + 1e-10],
            }],
            free: vec![],
        };
        let exact = rationalize(&cert, &target, &RationalizeOptions::default()).unwrap();
        verify_exact(&exact, &target).unwrap();
        assert_eq!(exact.reconstruct(), target);
    }

    #[test]
    fn kernel_pass_recovers_boundary_face() {
        // (1-x^2)^2 has a rank-one Gram face; the float input is indefinite
        // in a way designated-entry absorption cannot repair, so the kernel
        // restriction has to find the face. The single huge denominator
        // keeps continued fractions from snapping the noise away first.
        let x = x_poly(1, 0);
        let f = ScalarPoly::one(1).sub(&x.square()).square();
        let target = MatrixPoly::from_scalar(f);
        let cert = GramCertificate {
            nvars: 1,
            t: 1,
            degree: 2,
            parts: vec![GramPart::Scalar {
                sigma: ScalarPoly::one(1),
                basis: monomials_up_to(1, 2),
                gram: vec![
                    1.0 - 1e-7, 0.0, -1.0 - 1e-7,
                    0.0, 1e-7, 0.0,
                    -1.0 - 1e-7, 0.0, 1.0 - 1e-7,
                ],
            }],
            free: vec![],
        };
        let opts = RationalizeOptions {
            max_denominators: vec![1 << 52],
            kernel_tol: 1e-5,
        };
        let exact = rationalize(&cert, &target, &opts).unwrap();
        verify_exact(&exact, &target).unwrap();
    }

    #[test]
    fn ldl_classifies_rational_matrices() {
        let psd = vec![rat_int(2), rat_int(1), rat_int(1), rat_int(1)];
        let terms = rational_ldl(&psd, 2).unwrap();
        let mut recon = vec![rat_int(0); 4];
        for (d, c) in &terms {
            for i in 0..2 {
                for j in 0..2 {
                    recon[i * 2 + j] =
                        recon[i * 2 + j].clone() + d.clone() * c[i].clone() * c[j].clone();
                }
            }
        }
        assert_eq!(recon, psd);

        let indef = vec![rat_int(1), rat_int(2), rat_int(2), rat_int(1)];
        assert!(rational_ldl(&indef, 2).is_none());

        let singular = vec![rat_int(1), rat_int(1), rat_int(1), rat_int(1)];
        assert_eq!(rational_ldl(&singular, 2).unwrap().len(), 1);

        let hollow = vec![rat_int(0), rat_int(1), rat_int(1), rat_int(0)];
        assert!(rational_ldl(&hollow, 2).is_none());
    }

    #[test]
    fn partial_trace_reduces_matrix_certificates() {
        // diag(2+x^2, 2-2x+x^2) over the scalar generator 1-x^2; the traced
        // certificate must witness (1/2)tr = 2 - x + x^2.
        let x = x_poly(1, 0);
        let ball = ScalarPoly::one(1).sub(&x.square());
        let module =
            ModulePresentation::new(1, 2, vec![MatrixPoly::scalar_identity(&ball, 2)]).unwrap();
        let mut target = MatrixPoly::zero(1, 2);
        *target.entry_mut(0, 0) = x.square().add(&ScalarPoly::constant(1, rat_int(2)));
        *target.entry_mut(1, 1) =
            x.square().sub(&x.scale(&rat_int(2))).add(&ScalarPoly::constant(1, rat_int(2)));
        let enc = build_membership_sdp(&module, &target, 1, &[]).unwrap();
        let cert = solve_feasible(&enc);
        let exact = rationalize(&cert, &target, &RationalizeOptions::default()).unwrap();
        verify_exact(&exact, &target).unwrap();

        let traced = partial_trace(&exact).unwrap();
        let scalar_target = MatrixPoly::from_scalar(
            target.trace().scale(&rat(1, 2)),
        );
        verify_exact(&traced, &scalar_target).unwrap();
    }

    #[test]
    fn dual_labels_follow_grlex_then_position_order() {
        let module = ModulePresentation::unconstrained(2, 2);
        let target = MatrixPoly::identity(2, 2);
        let enc = build_membership_sdp(&module, &target, 1, &[]).unwrap();
        let labels = enc.labels();
        assert_eq!(labels.len(), enc.instance().num_constraints());
        assert_eq!(labels[0], (Monomial::one(2), 0, 0));
        assert_eq!(labels[1], (Monomial::one(2), 0, 1));
        assert_eq!(labels[2], (Monomial::one(2), 1, 1));
        assert_eq!(labels[3], (Monomial::var(2, 1), 0, 0));
        // Every monomial of degree <= 2 appears, each with 3 positions.
        assert_eq!(labels.len(), 6 * 3);
    }

    #[test]
    fn scalar_block_factor_batches_rows() {
        // I_2 · (x^2+1) has a rank-4 identity-generator Gram; the scalar
        // batching should emit ceil(4/2) = 2 transformers.
        let x = x_poly(1, 0);
        let f = x.square().add(&ScalarPoly::one(1));
        let target = MatrixPoly::scalar_identity(&f, 2);
        let module = ModulePresentation::unconstrained(1, 2);
        let enc = build_membership_sdp(&module, &target, 1, &[]).unwrap();
        let cert = solve_feasible(&enc);
        let ff = factor_form_numeric(&cert, 1e-8).unwrap();
        assert_eq!(ff.parts.len(), 1);
        assert!(ff.parts[0].transformers.len() <= 2);
        let recon = ff.reconstruct();
        let diff = recon.sub(&target.to_f64_poly());
        assert!(diff.max_abs_coeff() < 1e-6);
    }
}
