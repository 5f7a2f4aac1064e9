//! Degree-scheduled certificate searches.
//!
//! Each search loops a truncation degree d over the Gram encoding: the first
//! feasible degree yields a verified certificate, an infeasible degree
//! yields a separating functional valid at that truncation, and a schedule
//! that produces neither ends in ExhaustedDegrees. Searches never decide
//! non-membership outright; a separation is evidence at its degree only.

use std::time::{Duration, Instant};

use crate::gram::{
    build_membership_sdp, factor_form_exact, partial_trace, rationalize, verify_exact,
    verify_numeric, GramCertificate, GramError, MembershipEncoding, ModulePresentation,
    NumericReport, RationalizeOptions,
};
use crate::linalg::{sym_eigen, LinalgError, SymMat};
use crate::poly::{
    rat, rat_int, round_f64_to_rat, MatrixPoly, Monomial, QMatPoly, QPoly, Rat, ScalarPoly,
};
use crate::sdp::{farkas_ray_quality, solve, SdpOutcome, SdpSettings};
use crate::states::{purify_ray, PointEvaluation, SeparatingState, StateError};

#[derive(Debug, thiserror::Error)]
pub enum CertifyError {
    #[error("target matrix polynomial must be symmetric")]
    NotSymmetric,
    #[error("input has no positive eigenvalue")]
    NegativeSemidefiniteInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("{count} generators exceed the product limit of {max}")]
    TooManyGenerators { count: usize, max: usize },
    #[error("matrix identity does not survive back-substitution")]
    SubstitutionMismatch,
    #[error(transparent)]
    Gram(#[from] GramError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Knobs shared by every search.
#[derive(Clone, Debug)]
pub struct SearchOptions {
    /// Last degree of the schedule; defaults to d₀ + 4 where d₀ = ⌈deg/2⌉.
    pub d_max: Option<u32>,
    pub sdp: SdpSettings,
    /// Attempt to round the numeric certificate to an exact rational one.
    pub rationalize: bool,
    pub rationalize_opts: RationalizeOptions,
    /// Relative residual accepted when only numeric verification is
    /// available (ten times the solver feasibility tolerance by default).
    pub verify_tol: f64,
    /// Relative moment tolerance for point extraction from separations.
    pub extract_tol: f64,
    /// Probe for an archimedean witness before searches whose completeness
    /// depends on it, downgrading a miss to a warning.
    pub check_archimedean: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            d_max: None,
            sdp: SdpSettings::default(),
            rationalize: true,
            rationalize_opts: RationalizeOptions::default(),
            verify_tol: 1e-7,
            extract_tol: 1e-5,
            check_archimedean: false,
        }
    }
}

/// A verified membership certificate: the numeric Gram data the solver
/// produced plus, when rationalization succeeded, an exact rational form.
#[derive(Clone, Debug)]
pub struct MembershipCertificate {
    pub degree: u32,
    pub numeric: GramCertificate<f64>,
    pub numeric_report: NumericReport,
    pub exact: Option<GramCertificate<Rat>>,
}

/// A verified separation at a fixed truncation degree.
#[derive(Clone, Debug)]
pub struct Separation {
    pub degree: u32,
    pub ray: Vec<f64>,
    pub state: SeparatingState,
    /// Present when the state passed point extraction, possibly after ray
    /// purification.
    pub point: Option<PointEvaluation>,
}

#[derive(Clone, Debug)]
pub enum Verdict {
    CertificateFound(MembershipCertificate),
    Separated(Separation),
    ExhaustedDegrees,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub verdict: Verdict,
    pub degree_reached: u32,
    pub elapsed: Duration,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

enum StageOutcome {
    Proof(Box<MembershipCertificate>),
    Ray { enc: MembershipEncoding, ray: Vec<f64> },
    Skip,
}

fn run_degree(
    module: &ModulePresentation,
    target: &QMatPoly,
    equalities: &[QPoly],
    d: u32,
    opts: &SearchOptions,
    require_exact: bool,
    notes: &mut Vec<String>,
) -> Result<StageOutcome, CertifyError> {
    let enc = build_membership_sdp(module, target, d, equalities)?;
    let sol = solve(enc.instance(), &opts.sdp);
    match sol.outcome {
        SdpOutcome::Feasible { x, .. } => {
            let numeric = enc.certificate_from_solution(&x);
            let report = match verify_numeric(&numeric, target, opts.verify_tol) {
                Ok(r) => r,
                Err(e) => {
                    notes.push(format!(
                        "degree {}: solver claimed feasibility but verification failed: {}",
                        d, e
                    ));
                    return Ok(StageOutcome::Skip);
                }
            };
            let exact = if opts.rationalize || require_exact {
                match rationalize(&numeric, target, &opts.rationalize_opts) {
                    Ok(c) => Some(c),
                    Err(e) => {
                        notes.push(format!("degree {}: rationalization failed: {}", d, e));
                        None
                    }
                }
            } else {
                None
            };
            if require_exact && exact.is_none() {
                return Ok(StageOutcome::Skip);
            }
            Ok(StageOutcome::Proof(Box::new(MembershipCertificate {
                degree: d,
                numeric,
                numeric_report: report,
                exact,
            })))
        }
        SdpOutcome::Infeasible { ray } => {
            let (bu, lmin) = farkas_ray_quality(enc.instance(), &ray);
            if bu < 0.0 && lmin >= -1e-6 {
                Ok(StageOutcome::Ray { enc, ray })
            } else {
                notes.push(format!(
                    "degree {}: infeasibility ray failed verification (pairing {:.3e}, floor {:.3e})",
                    d, bu, lmin
                ));
                Ok(StageOutcome::Skip)
            }
        }
        SdpOutcome::Unknown { reason } => {
            notes.push(format!("degree {}: {}", d, reason));
            Ok(StageOutcome::Skip)
        }
    }
}

fn finish_separation(
    enc: &MembershipEncoding,
    ray: Vec<f64>,
    d: u32,
    opts: &SearchOptions,
    notes: &mut Vec<String>,
) -> Option<Separation> {
    let state = match SeparatingState::from_ray(enc, &ray) {
        Ok(s) => s,
        Err(e) => {
            notes.push(format!("degree {}: ray could not be normalized into a state: {}", d, e));
            return None;
        }
    };
    match state.extract_point(opts.extract_tol) {
        Ok(p) => return Some(Separation { degree: d, ray, state, point: Some(p) }),
        Err(_) => notes.push(format!(
            "degree {}: raw state is not a point evaluation; purifying",
            d
        )),
    }
    match purify_ray(enc, &ray, &opts.sdp) {
        Ok(refined) => match SeparatingState::from_ray(enc, &refined) {
            Ok(rs) => match rs.extract_point(opts.extract_tol) {
                Ok(p) => {
                    return Some(Separation { degree: d, ray: refined, state: rs, point: Some(p) })
                }
                Err(e) => notes.push(format!("degree {}: purified state still mixed: {}", d, e)),
            },
            Err(e) => notes.push(format!("degree {}: purified ray rejected: {}", d, e)),
        },
        Err(e) => notes.push(format!("degree {}: purification failed: {}", d, e)),
    }
    Some(Separation { degree: d, ray, state, point: None })
}

/// Search for a representation of `target` in the quadratic module, walking
/// the degree schedule d₀..d_max.
pub fn find_membership(
    target: &QMatPoly,
    module: &ModulePresentation,
    opts: &SearchOptions,
) -> Result<SearchOutcome, CertifyError> {
    find_membership_constrained(target, module, &[], opts)
}

/// Same search with scalar equality constraints: each q contributes a
/// sign-free multiplier h·q to the representation.
pub fn find_membership_constrained(
    target: &QMatPoly,
    module: &ModulePresentation,
    equalities: &[QPoly],
    opts: &SearchOptions,
) -> Result<SearchOutcome, CertifyError> {
    let start = Instant::now();
    if !target.is_symmetric() {
        return Err(CertifyError::NotSymmetric);
    }
    let d0 = (target.degree() + 1) / 2;
    let d_max = opts.d_max.unwrap_or(d0 + 4).max(d0);
    let mut notes = Vec::new();
    let mut last: Option<(u32, MembershipEncoding, Vec<f64>)> = None;
    for d in d0..=d_max {
        match run_degree(module, target, equalities, d, opts, false, &mut notes)? {
            StageOutcome::Proof(cert) => {
                return Ok(SearchOutcome {
                    verdict: Verdict::CertificateFound(*cert),
                    degree_reached: d,
                    elapsed: start.elapsed(),
                    warnings: Vec::new(),
                    notes,
                });
            }
            StageOutcome::Ray { enc, ray } => {
                notes.push(format!("degree {}: infeasible with a verified separating ray", d));
                last = Some((d, enc, ray));
            }
            StageOutcome::Skip => {}
        }
    }
    if let Some((d, enc, ray)) = last {
        if let Some(sep) = finish_separation(&enc, ray, d, opts, &mut notes) {
            return Ok(SearchOutcome {
                verdict: Verdict::Separated(sep),
                degree_reached: d_max,
                elapsed: start.elapsed(),
                warnings: Vec::new(),
                notes,
            });
        }
    }
    Ok(SearchOutcome {
        verdict: Verdict::ExhaustedDegrees,
        degree_reached: d_max,
        elapsed: start.elapsed(),
        warnings: Vec::new(),
        notes,
    })
}

/// A certificate that f is nowhere negative semidefinite on the region: an
/// exact identity Σᵢ wᵢ·pᵢᵀ f pᵢ − I ∈ M_G, stored as the weighted
/// transformer list plus a Gram certificate for the rearranged target.
#[derive(Clone, Debug)]
pub struct NnsdCertificate {
    pub degree: u32,
    /// The underlying proof that −I lies in the module extended by −f.
    pub raw: MembershipCertificate,
    pub weights: Vec<Rat>,
    pub transformers: Vec<QMatPoly>,
    /// Σᵢ wᵢ·pᵢᵀ f pᵢ − I, the polynomial the remainder certificate proves.
    pub rearranged_target: QMatPoly,
    pub remainder: GramCertificate<Rat>,
}

#[derive(Clone, Debug)]
pub enum NnsdVerdict {
    Found(NnsdCertificate),
    ExhaustedDegrees,
}

#[derive(Clone, Debug)]
pub struct NnsdOutcome {
    pub verdict: NnsdVerdict,
    pub degree_reached: u32,
    pub elapsed: Duration,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

/// Search for transformers pᵢ with Σᵢ wᵢ·pᵢᵀ f pᵢ ∈ I + M_G, proving that
/// f(x) has a positive direction at every point of the region. Implemented
/// by searching for −I in the module extended with −f and moving the
/// f-weighted terms across; the rearrangement is re-verified exactly, so
/// only degrees that rationalize can succeed. Infeasible truncations carry
/// no usable information here (every state is negative on −I), so they are
/// folded into ExhaustedDegrees rather than reported as separations.
pub fn find_nnsd_certificate(
    f: &QMatPoly,
    module: &ModulePresentation,
    opts: &SearchOptions,
) -> Result<NnsdOutcome, CertifyError> {
    let start = Instant::now();
    if !f.is_symmetric() {
        return Err(CertifyError::NotSymmetric);
    }
    if f.size() != module.size() {
        return Err(CertifyError::Dimension { expected: module.size(), got: f.size() });
    }
    if f.nvars() != module.nvars() {
        return Err(CertifyError::Dimension { expected: module.nvars(), got: f.nvars() });
    }
    let mut warnings = Vec::new();
    if opts.check_archimedean {
        if let Some(w) = archimedean_probe(module, opts)? {
            warnings.push(w);
        }
    }
    let nvars = module.nvars();
    let t = module.size();
    let minus_f = f.neg();
    let mut gens = module.generators().to_vec();
    gens.push(minus_f.clone());
    let extended = ModulePresentation::new(nvars, t, gens)?;
    let neg_identity = MatrixPoly::identity(nvars, t).neg();

    let d0 = (f.degree() + 1) / 2;
    let d_max = opts.d_max.unwrap_or(d0 + 4).max(d0);
    let mut notes = Vec::new();
    for d in d0..=d_max {
        match run_degree(&extended, &neg_identity, &[], d, opts, true, &mut notes)? {
            StageOutcome::Proof(cert) => {
                let exact = cert.exact.clone().expect("exact certificate required above");
                let form = factor_form_exact(&exact)?;
                let mut weights = Vec::new();
                let mut transformers = Vec::new();
                for part in &form.parts {
                    if part.generator == minus_f {
                        weights.extend(part.weights.iter().cloned());
                        transformers.extend(part.transformers.iter().cloned());
                    }
                }
                let remainder_parts: Vec<_> = exact
                    .parts
                    .iter()
                    .filter(|p| p.generator_poly(t) != minus_f)
                    .cloned()
                    .collect();
                let remainder = GramCertificate {
                    nvars,
                    t,
                    degree: exact.degree,
                    parts: remainder_parts,
                    free: exact.free.clone(),
                };
                let mut acc = MatrixPoly::zero(nvars, t);
                for (w, p) in weights.iter().zip(&transformers) {
                    acc = acc.add(&f.congruence(p).scale(w));
                }
                let rearranged_target = acc.sub(&MatrixPoly::identity(nvars, t));
                verify_exact(&remainder, &rearranged_target)?;
                return Ok(NnsdOutcome {
                    verdict: NnsdVerdict::Found(NnsdCertificate {
                        degree: d,
                        raw: *cert,
                        weights,
                        transformers,
                        rearranged_target,
                        remainder,
                    }),
                    degree_reached: d,
                    elapsed: start.elapsed(),
                    warnings,
                    notes,
                });
            }
            StageOutcome::Ray { .. } => {
                notes.push(format!("degree {}: no rearrangement at this truncation", d));
            }
            StageOutcome::Skip => {}
        }
    }
    Ok(NnsdOutcome {
        verdict: NnsdVerdict::ExhaustedDegrees,
        degree_reached: d_max,
        elapsed: start.elapsed(),
        warnings,
        notes,
    })
}

/// An exact identity Σᵢ w·BᵢᵀABᵢ = I for a constant symmetric matrix A
/// with a positive eigenvalue: Bᵢ = u·eᵢᵀ for a rational u with uᵀAu > 0
/// and w = 1/(uᵀAu).
#[derive(Clone, Debug)]
pub struct ConstantNnsdWitness {
    pub weight: Rat,
    pub frames: Vec<QMatPoly>,
    pub eigenvalue_estimate: f64,
}

pub fn constant_nnsd_witness(a: &QMatPoly) -> Result<ConstantNnsdWitness, CertifyError> {
    if !a.is_symmetric() {
        return Err(CertifyError::NotSymmetric);
    }
    if a.degree() != 0 {
        return Err(CertifyError::Dimension { expected: 0, got: a.degree() as usize });
    }
    let t = a.size();
    let nvars = a.nvars();
    let one = Monomial::one(nvars);
    let entry = |i: usize, j: usize| a.entry(i, j).coeff(&one);

    let mut sym = SymMat::zeros(t);
    for i in 0..t {
        for j in 0..=i {
            *sym.at_mut(i, j) = crate::poly::rat_to_f64(&entry(i, j));
        }
    }
    let eig = sym_eigen(&sym)?;
    let lam = eig.values[0];
    if lam <= 1e-12 {
        return Err(CertifyError::NegativeSemidefiniteInput);
    }

    let quad = |u: &[Rat]| -> Rat {
        let mut acc = rat_int(0);
        for i in 0..t {
            for j in 0..t {
                acc = acc + u[i].clone() * entry(i, j) * u[j].clone();
            }
        }
        acc
    };
    let zero = rat_int(0);
    for max_den in [1u64 << 8, 1 << 20, 1 << 40] {
        let u: Vec<Rat> = (0..t).map(|i| round_f64_to_rat(eig.vectors[(i, 0)], max_den)).collect();
        let r = quad(&u);
        if r > zero {
            let frames = (0..t)
                .map(|i| {
                    let mut rows = vec![vec![ScalarPoly::zero(nvars); t]; t];
                    for (row, coord) in u.iter().enumerate() {
                        rows[row][i] = ScalarPoly::constant(nvars, coord.clone());
                    }
                    MatrixPoly::from_rows(rows)
                })
                .collect();
            return Ok(ConstantNnsdWitness {
                weight: rat_int(1) / r,
                frames,
                eigenvalue_estimate: lam,
            });
        }
    }
    Err(CertifyError::NegativeSemidefiniteInput)
}

/// A bound witness: N together with a verified certificate that
/// (N − ΣᵢXᵢ²)·I lies in the module. Existence for some N makes the module
/// archimedean and confines the region to the ball of radius √N.
#[derive(Clone, Debug)]
pub struct ArchWitness {
    pub n: Rat,
    pub degree: u32,
    pub certificate: MembershipCertificate,
}

#[derive(Clone, Debug)]
pub struct ArchSearch {
    pub witness: Option<ArchWitness>,
    pub elapsed: Duration,
    pub notes: Vec<String>,
}

/// Search N ∈ {1, 2, 4, …, n_max}, running the membership schedule for each
/// candidate; the first verified certificate wins.
pub fn archimedean_witness(
    module: &ModulePresentation,
    n_max: u64,
    opts: &SearchOptions,
) -> Result<ArchSearch, CertifyError> {
    let start = Instant::now();
    let nvars = module.nvars();
    let t = module.size();
    let mut sum_sq = ScalarPoly::zero(nvars);
    for i in 0..nvars {
        sum_sq = sum_sq.add(&ScalarPoly::var(nvars, i).square());
    }
    let mut notes = Vec::new();
    let mut n = 1u64;
    loop {
        let body = ScalarPoly::constant(nvars, rat_int(n as i64)).sub(&sum_sq);
        let target = MatrixPoly::scalar_identity(&body, t);
        let out = find_membership(&target, module, opts)?;
        match out.verdict {
            Verdict::CertificateFound(cert) => {
                return Ok(ArchSearch {
                    witness: Some(ArchWitness {
                        n: rat_int(n as i64),
                        degree: cert.degree,
                        certificate: cert,
                    }),
                    elapsed: start.elapsed(),
                    notes,
                });
            }
            Verdict::Separated(sep) => {
                notes.push(format!("N = {}: separated at degree {}", n, sep.degree))
            }
            Verdict::ExhaustedDegrees => notes.push(format!("N = {}: exhausted degrees", n)),
        }
        if n >= n_max {
            break;
        }
        n = n.saturating_mul(2);
    }
    Ok(ArchSearch { witness: None, elapsed: start.elapsed(), notes })
}

fn archimedean_probe(
    module: &ModulePresentation,
    opts: &SearchOptions,
) -> Result<Option<String>, CertifyError> {
    let mut probe = opts.clone();
    probe.d_max = Some(2);
    probe.rationalize = false;
    probe.check_archimedean = false;
    let search = archimedean_witness(module, 16, &probe)?;
    if search.witness.is_some() {
        Ok(None)
    } else {
        Ok(Some(
            "no archimedean witness found up to N = 16; the search stays sound but \
             completeness is not guaranteed"
                .into(),
        ))
    }
}

/// The 2^m − 1 nontrivial products of scalar generators, in binary counting
/// order (mask 1 = g₁, mask 2 = g₂, mask 3 = g₁g₂, …).
pub fn product_module(gens: &[QPoly]) -> Result<Vec<QPoly>, CertifyError> {
    const MAX: usize = 20;
    if gens.len() > MAX {
        return Err(CertifyError::TooManyGenerators { count: gens.len(), max: MAX });
    }
    if gens.is_empty() {
        return Ok(Vec::new());
    }
    let nvars = gens[0].nvars();
    for g in gens {
        if g.nvars() != nvars {
            return Err(CertifyError::Dimension { expected: nvars, got: g.nvars() });
        }
    }
    let m = gens.len();
    let mut out = Vec::with_capacity((1usize << m) - 1);
    for mask in 1usize..(1usize << m) {
        let mut p = ScalarPoly::one(nvars);
        for (i, g) in gens.iter().enumerate() {
            if mask & (1 << i) != 0 {
                p = p.mul(g);
            }
        }
        out.push(p);
    }
    Ok(out)
}

/// The scalar certificate induced by averaging a matrix certificate over
/// the diagonal: (1/t)·tr(target) inherits a representation over the same
/// scalar generators, verified exactly.
#[derive(Clone, Debug)]
pub struct TraceReduction {
    pub scalar_target: QPoly,
    pub certificate: GramCertificate<Rat>,
}

pub fn trace_reduce(
    cert: &GramCertificate<Rat>,
    target: &QMatPoly,
) -> Result<TraceReduction, CertifyError> {
    if target.size() != cert.t {
        return Err(CertifyError::Dimension { expected: cert.t, got: target.size() });
    }
    let scalar_target = target.trace().scale(&rat(1, cert.t as i64));
    let reduced = partial_trace(cert)?;
    verify_exact(&reduced, &MatrixPoly::from_scalar(scalar_target.clone()))?;
    Ok(TraceReduction { scalar_target, certificate: reduced })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CharPolyKind {
    Characteristic,
    /// Reserved for a minimal-polynomial variant; not produced by
    /// [`char_poly`], which always returns the characteristic polynomial
    /// (it annihilates the matrix, which is all the certificate needs).
    Minimal,
}

/// A monic annihilating polynomial q(X̄, Y) of a square matrix polynomial,
/// with Y as the last variable.
#[derive(Clone, Debug)]
pub struct CharPolyResult {
    pub q: QPoly,
    pub kind: CharPolyKind,
}

/// Characteristic polynomial by the Faddeev–LeVerrier recurrence over
/// exact rationals. The annihilation identity q(X̄, f) = 0 is checked
/// before returning.
pub fn char_poly(f: &QMatPoly) -> CharPolyResult {
    let t = f.size();
    let nvars = f.nvars();
    let mut coeffs: Vec<QPoly> = vec![ScalarPoly::one(nvars)];
    let mut m = f.clone();
    for k in 1..=t {
        let a = m.trace().scale(&rat(-1, k as i64));
        coeffs.push(a.clone());
        if k < t {
            m = f.matmul(&m.add(&MatrixPoly::scalar_identity(&a, t)));
        }
    }
    let mut q = ScalarPoly::zero(nvars + 1);
    for (k, a) in coeffs.iter().enumerate() {
        let ypow = (t - k) as u32;
        for (mono, c) in a.terms() {
            let mut e = mono.exponents().to_vec();
            e.push(ypow);
            q.add_term(Monomial::from_exponents(e), c.clone());
        }
    }
    let check = substitute_matrix(&q, f);
    assert!(check.is_zero(), "characteristic polynomial must annihilate its matrix");
    CharPolyResult { q, kind: CharPolyKind::Characteristic }
}

/// Evaluate q(X̄, Y) at Y = f, where q has one more variable than f (Y
/// last). Powers of f are exact matrix products.
pub fn substitute_matrix(q: &QPoly, f: &QMatPoly) -> QMatPoly {
    let nvars = f.nvars();
    assert_eq!(q.nvars(), nvars + 1, "substitution expects exactly one extra variable");
    let t = f.size();
    let ymax = q.terms().map(|(m, _)| m.exponents()[nvars]).max().unwrap_or(0);
    let mut pows: Vec<QMatPoly> = vec![MatrixPoly::identity(nvars, t)];
    for _ in 0..ymax {
        pows.push(f.matmul(pows.last().expect("powers are never empty")));
    }
    let mut acc = MatrixPoly::zero(nvars, t);
    for (mono, c) in q.terms() {
        let e = mono.exponents();
        let xmono = Monomial::from_exponents(e[..nvars].to_vec());
        let s = ScalarPoly::term(nvars, xmono, c.clone());
        acc = acc.add(&pows[e[nvars] as usize].scale_poly(&s));
    }
    acc
}

fn lift_poly(p: &QPoly, new_nvars: usize) -> QPoly {
    let mut out = ScalarPoly::zero(new_nvars);
    for (mono, c) in p.terms() {
        let mut e = mono.exponents().to_vec();
        e.resize(new_nvars, 0);
        out.add_term(Monomial::from_exponents(e), c.clone());
    }
    out
}

/// An exact representation of f in the commutative module generated by G
/// and powers of f itself: a scalar certificate for Y over the generators
/// lifted to (X̄, Y), taken modulo the annihilating polynomial of f, whose
/// back-substitution Y ↦ f reproduces f exactly.
#[derive(Clone, Debug)]
pub struct RealEigCertificate {
    pub char_poly: CharPolyResult,
    pub degree: u32,
    pub scalar: GramCertificate<Rat>,
    /// The matrix polynomial obtained by substituting Y ↦ f into the
    /// square-and-generator part of the scalar identity; equals f.
    pub substituted: QMatPoly,
}

#[derive(Clone, Debug)]
pub enum RealEigVerdict {
    Found(RealEigCertificate),
    Separated(Separation),
    ExhaustedDegrees,
}

#[derive(Clone, Debug)]
pub struct RealEigOutcome {
    pub verdict: RealEigVerdict,
    pub degree_reached: u32,
    pub elapsed: Duration,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

/// Certify that every real eigenvalue of f(x) is nonnegative across the
/// region cut out by scalar generators. The fresh variable Y stands for an
/// eigenvalue of f: membership of Y in the lifted module modulo the
/// characteristic polynomial ideal is searched for, and a successful exact
/// identity is substituted back (Y ↦ f), where the ideal part vanishes by
/// the annihilation identity. f itself need not be symmetric.
pub fn real_eigenvalue_certificate(
    f: &QMatPoly,
    scalar_gens: &[QPoly],
    opts: &SearchOptions,
) -> Result<RealEigOutcome, CertifyError> {
    let start = Instant::now();
    let nvars = f.nvars();
    for g in scalar_gens {
        if g.nvars() != nvars {
            return Err(CertifyError::Dimension { expected: nvars, got: g.nvars() });
        }
    }
    let mut warnings = Vec::new();
    if opts.check_archimedean {
        let base = ModulePresentation::new(
            nvars,
            1,
            scalar_gens.iter().cloned().map(MatrixPoly::from_scalar).collect(),
        )?;
        if let Some(w) = archimedean_probe(&base, opts)? {
            warnings.push(w);
        }
    }
    let cp = char_poly(f);
    let lifted: Vec<QMatPoly> = scalar_gens
        .iter()
        .map(|g| MatrixPoly::from_scalar(lift_poly(g, nvars + 1)))
        .collect();
    let module = ModulePresentation::new(nvars + 1, 1, lifted)?;
    let target = MatrixPoly::from_scalar(ScalarPoly::var(nvars + 1, nvars));
    let equalities = [cp.q.clone()];

    let d0 = 1;
    let d_max = opts.d_max.unwrap_or(d0 + 4).max(d0);
    let mut notes = Vec::new();
    let mut last: Option<(u32, MembershipEncoding, Vec<f64>)> = None;
    for d in d0..=d_max {
        match run_degree(&module, &target, &equalities, d, opts, true, &mut notes)? {
            StageOutcome::Proof(cert) => {
                let exact = cert.exact.clone().expect("exact certificate required above");
                let parts_only = GramCertificate {
                    nvars: exact.nvars,
                    t: 1,
                    degree: exact.degree,
                    parts: exact.parts.clone(),
                    free: Vec::new(),
                };
                let scalar_identity = parts_only.reconstruct();
                let substituted = substitute_matrix(scalar_identity.entry(0, 0), f);
                if substituted != *f {
                    return Err(CertifyError::SubstitutionMismatch);
                }
                return Ok(RealEigOutcome {
                    verdict: RealEigVerdict::Found(RealEigCertificate {
                        char_poly: cp,
                        degree: d,
                        scalar: exact,
                        substituted,
                    }),
                    degree_reached: d,
                    elapsed: start.elapsed(),
                    warnings,
                    notes,
                });
            }
            StageOutcome::Ray { enc, ray } => {
                notes.push(format!("degree {}: infeasible with a verified separating ray", d));
                last = Some((d, enc, ray));
            }
            StageOutcome::Skip => {}
        }
    }
    if let Some((d, enc, ray)) = last {
        if let Some(sep) = finish_separation(&enc, ray, d, opts, &mut notes) {
            return Ok(RealEigOutcome {
                verdict: RealEigVerdict::Separated(sep),
                degree_reached: d_max,
                elapsed: start.elapsed(),
                warnings,
                notes,
            });
        }
    }
    Ok(RealEigOutcome {
        verdict: RealEigVerdict::ExhaustedDegrees,
        degree_reached: d_max,
        elapsed: start.elapsed(),
        warnings,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::verify_point;

    fn ball_module(nvars: usize, t: usize) -> ModulePresentation {
        let mut sum = ScalarPoly::zero(nvars);
        for i in 0..nvars {
            sum = sum.add(&ScalarPoly::var(nvars, i).square());
        }
        let body = ScalarPoly::one(nvars).sub(&sum);
        ModulePresentation::new(nvars, t, vec![MatrixPoly::scalar_identity(&body, t)]).unwrap()
    }

    #[test]
    fn constant_positive_target_certifies_at_degree_zero() {
        let target = MatrixPoly::identity(1, 2).scale(&rat_int(2));
        let out = find_membership(&target, &ball_module(1, 2), &SearchOptions::default()).unwrap();
        match out.verdict {
            Verdict::CertificateFound(cert) => {
                assert_eq!(cert.degree, 0);
                assert!(cert.exact.is_some());
            }
            other => panic!("expected a certificate, got {:?}", other),
        }
    }

    #[test]
    fn separation_lands_on_the_positive_boundary() {
        let x = ScalarPoly::<Rat>::var(1, 0);
        let target = MatrixPoly::from_scalar(x.neg());
        let module = ball_module(1, 1);
        let opts = SearchOptions { d_max: Some(2), ..SearchOptions::default() };
        let out = find_membership(&target, &module, &opts).unwrap();
        match out.verdict {
            Verdict::Separated(sep) => {
                let lf = sep.state.apply_matrix(&target.to_f64_poly()).unwrap();
                assert!(lf < 0.0);
                let p = sep.point.expect("extraction should succeed after purification");
                assert!(p.x[0] > 0.0 && p.x[0] <= 1.0 + 1e-6, "x = {}", p.x[0]);
                let report = verify_point(&target, &module, &p.x, &p.v).unwrap();
                assert!(report.passes(1e-6));
            }
            other => panic!("expected separation, got {:?}", other),
        }
    }

    #[test]
    fn nnsd_rearranges_the_diagonal_example() {
        // f = diag(X+2, -1) on [-1, 1]: the top-left entry stays ≥ 1.
        let x = ScalarPoly::<Rat>::var(1, 0);
        let f = MatrixPoly::from_rows(vec![
            vec![x.add(&ScalarPoly::constant(1, rat_int(2))), ScalarPoly::zero(1)],
            vec![ScalarPoly::zero(1), ScalarPoly::constant(1, rat_int(-1))],
        ]);
        let out = find_nnsd_certificate(&f, &ball_module(1, 2), &SearchOptions::default()).unwrap();
        match out.verdict {
            NnsdVerdict::Found(cert) => {
                assert!(!cert.transformers.is_empty());
                // Independent reconstruction of the rearranged identity.
                let mut acc = MatrixPoly::zero(1, 2);
                for (w, p) in cert.weights.iter().zip(&cert.transformers) {
                    acc = acc.add(&f.congruence(p).scale(w));
                }
                let lhs = acc.sub(&MatrixPoly::identity(1, 2));
                assert_eq!(lhs, cert.rearranged_target);
                assert_eq!(cert.remainder.reconstruct(), lhs);
            }
            NnsdVerdict::ExhaustedDegrees => panic!("expected a rearrangement"),
        }
    }

    #[test]
    fn nnsd_counterexample_exhausts_without_ball() {
        let x1 = ScalarPoly::<Rat>::var(2, 0);
        let x2 = ScalarPoly::<Rat>::var(2, 1);
        let f = MatrixPoly::from_rows(vec![
            vec![x1.clone(), ScalarPoly::zero(2), ScalarPoly::zero(2)],
            vec![ScalarPoly::zero(2), x2.clone(), ScalarPoly::zero(2)],
            vec![ScalarPoly::zero(2), ScalarPoly::zero(2), x1.mul(&x2).add(&ScalarPoly::one(2))],
        ]);
        let module = ModulePresentation::unconstrained(2, 3);
        let opts = SearchOptions { d_max: Some(2), ..SearchOptions::default() };
        let out = find_nnsd_certificate(&f, &module, &opts).unwrap();
        assert!(matches!(out.verdict, NnsdVerdict::ExhaustedDegrees));
    }

    #[test]
    fn archimedean_witness_for_the_ball_is_immediate() {
        let search = archimedean_witness(&ball_module(2, 2), 64, &SearchOptions::default()).unwrap();
        let w = search.witness.expect("ball module has the trivial witness");
        assert_eq!(w.n, rat_int(1));
        assert!(w.certificate.exact.is_some());

        let empty = ModulePresentation::unconstrained(1, 1);
        let opts = SearchOptions { d_max: Some(2), ..SearchOptions::default() };
        let missing = archimedean_witness(&empty, 4, &opts).unwrap();
        assert!(missing.witness.is_none());
    }

    #[test]
    fn product_module_enumerates_in_binary_order() {
        let g1 = ScalarPoly::<Rat>::var(1, 0);
        let g2 = ScalarPoly::one(1).sub(&g1);
        let prods = product_module(&[g1.clone(), g2.clone()]).unwrap();
        assert_eq!(prods, vec![g1.clone(), g2.clone(), g1.mul(&g2)]);

        let three = product_module(&[g1.clone(), g2.clone(), ScalarPoly::constant(1, rat_int(2))])
            .unwrap();
        assert_eq!(three.len(), 7);

        let many: Vec<QPoly> = (0..21).map(|_| ScalarPoly::one(1)).collect();
        assert!(matches!(
            product_module(&many),
            Err(CertifyError::TooManyGenerators { count: 21, max: 20 })
        ));
    }

    #[test]
    fn char_poly_matches_direct_determinants() {
        let zero = ScalarPoly::<Rat>::zero(1);
        let one = ScalarPoly::<Rat>::one(1);
        let x = ScalarPoly::<Rat>::var(1, 0);

        let nilpotent =
            MatrixPoly::from_rows(vec![vec![zero.clone(), one.clone()], vec![zero.clone(), zero.clone()]]);
        let y2 = ScalarPoly::<Rat>::term(2, Monomial::from_exponents(vec![0, 2]), rat_int(1));
        assert_eq!(char_poly(&nilpotent).q, y2);

        let shift = MatrixPoly::from_rows(vec![vec![zero.clone(), one.clone()], vec![x, zero.clone()]]);
        let expect = y2.sub(&ScalarPoly::term(2, Monomial::from_exponents(vec![1, 0]), rat_int(1)));
        assert_eq!(char_poly(&shift).q, expect);

        let rotation =
            MatrixPoly::from_rows(vec![vec![zero.clone(), one.neg()], vec![one.clone(), zero]]);
        let expect = y2.add(&ScalarPoly::one(2));
        assert_eq!(char_poly(&rotation).q, expect);
    }

    #[test]
    fn real_eigenvalue_certificate_for_the_rotation_matrix() {
        let zero = ScalarPoly::<Rat>::zero(1);
        let one = ScalarPoly::<Rat>::one(1);
        let f = MatrixPoly::from_rows(vec![vec![zero.clone(), one.neg()], vec![one.clone(), zero]]);
        let x = ScalarPoly::<Rat>::var(1, 0);
        let ball = ScalarPoly::one(1).sub(&x.square());
        let out = real_eigenvalue_certificate(&f, &[ball], &SearchOptions::default()).unwrap();
        match out.verdict {
            RealEigVerdict::Found(cert) => {
                assert_eq!(cert.substituted, f);
                let y2 = ScalarPoly::<Rat>::term(2, Monomial::from_exponents(vec![0, 2]), rat_int(1));
                assert_eq!(cert.char_poly.q, y2.add(&ScalarPoly::one(2)));
            }
            other => panic!("expected a certificate, got {:?}", other),
        }
    }

    #[test]
    fn real_eigenvalue_certificate_rejects_indefinite_spectrum() {
        let zero = ScalarPoly::<Rat>::zero(1);
        let one = ScalarPoly::<Rat>::one(1);
        let x = ScalarPoly::<Rat>::var(1, 0);
        let f = MatrixPoly::from_rows(vec![vec![one.clone(), x.clone()], vec![zero, one.neg()]]);
        let ball = ScalarPoly::one(1).sub(&x.square());
        let opts = SearchOptions { d_max: Some(3), ..SearchOptions::default() };
        let out = real_eigenvalue_certificate(&f, &[ball], &opts).unwrap();
        assert!(!matches!(out.verdict, RealEigVerdict::Found(_)));
    }

    #[test]
    fn trace_reduce_collapses_a_matrix_certificate() {
        let x = ScalarPoly::<Rat>::var(1, 0);
        let body = ScalarPoly::constant(1, rat_int(2)).sub(&x.square());
        let target = MatrixPoly::scalar_identity(&body, 2);
        let out = find_membership(&target, &ball_module(1, 2), &SearchOptions::default()).unwrap();
        let cert = match out.verdict {
            Verdict::CertificateFound(c) => c.exact.expect("rationalization should succeed"),
            other => panic!("expected a certificate, got {:?}", other),
        };
        let reduction = trace_reduce(&cert, &target).unwrap();
        assert_eq!(reduction.scalar_target, body);
        assert_eq!(
            reduction.certificate.reconstruct(),
            MatrixPoly::from_scalar(body)
        );
    }

    #[test]
    fn constant_witness_examples() {
        let idm = MatrixPoly::identity(0, 2);
        let w = constant_nnsd_witness(&idm).unwrap();
        let mut acc = MatrixPoly::zero(0, 2);
        for b in &w.frames {
            acc = acc.add(&idm.congruence(b).scale(&w.weight));
        }
        assert_eq!(acc, idm);

        let a = MatrixPoly::constant(0, 2, &[rat_int(1), rat_int(0), rat_int(0), rat_int(-5)]);
        let w = constant_nnsd_witness(&a).unwrap();
        let mut acc = MatrixPoly::zero(0, 2);
        for b in &w.frames {
            acc = acc.add(&a.congruence(b).scale(&w.weight));
        }
        assert_eq!(acc, MatrixPoly::identity(0, 2));

        let neg = MatrixPoly::identity(0, 3).neg();
        assert!(matches!(
            constant_nnsd_witness(&neg),
            Err(CertifyError::NegativeSemidefiniteInput)
        ));
    }
}
