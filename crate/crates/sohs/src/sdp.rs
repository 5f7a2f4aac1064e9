//! Self-contained semidefinite programming solver.
//!
//! Solves problems in standard primal form
//!
//! ```text
//!   minimize    <C, X>
//!   subject to  <A_k, X> = b_k   for k = 1..m
//!               X >= 0           (block-diagonal, symmetric PSD)
//! ```
//!
//! via a homogeneous self-dual embedding with Nesterov-Todd scaling and a
//! Mehrotra predictor-corrector step. The embedding makes infeasibility
//! detection a first-class outcome: instead of an optimal point the solver
//! can return a Farkas ray `u` with `sum_k u_k A_k >= 0` and `b . u < 0`,
//! which proves that no PSD solution exists. A ray is only ever reported
//! after it has been re-verified against the original data with fresh
//! eigenvalue computations, so downstream code can trust its sign
//! conditions up to the stated tolerances.
//!
//! The solver is deterministic: no randomness, no hashing, and a fixed
//! starting point, so a given instance always produces the same output.
//!
//! Problems with a zero objective are feasibility problems. For those the
//! central path converges to the analytic center of the solution set, which
//! is the most interior solution available; after the feasibility tolerance
//! is first met, iteration continues for a few more steps to push the
//! constraint residual well below the requested tolerance. That extra
//! headroom is what later makes rounding to exact rational certificates
//! succeed.

use crate::linalg::{cholesky, cholesky_solve, sym_eigen, sym_power, Mat, SymMat};
use serde::{Deserialize, Serialize};

/// Sparse symmetric matrix data for one block: entries `(i, j, v)` with
/// `i >= j`, describing both the `(i,j)` and `(j,i)` positions.
pub type SparseSym = Vec<(u32, u32, f64)>;

/// Block-diagonal symmetric matrix in sparse form, one entry list per block.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockSparse {
    pub blocks: Vec<SparseSym>,
}

impl BlockSparse {
    pub fn zero(nblocks: usize) -> Self {
        BlockSparse { blocks: vec![Vec::new(); nblocks] }
    }

    pub fn to_dense(&self, sizes: &[usize]) -> Vec<Mat> {
        let mut out: Vec<Mat> = sizes.iter().map(|&s| Mat::zeros(s, s)).collect();
        for (bi, entries) in self.blocks.iter().enumerate() {
            for &(i, j, v) in entries {
                let (i, j) = (i as usize, j as usize);
                out[bi][(i, j)] += v;
                if i != j {
                    out[bi][(j, i)] += v;
                }
            }
        }
        out
    }

    /// Frobenius inner product with dense symmetric blocks.
    pub fn dot(&self, x: &[Mat]) -> f64 {
        let mut acc = 0.0;
        for (bi, entries) in self.blocks.iter().enumerate() {
            let xb = &x[bi];
            for &(i, j, v) in entries {
                let (i, j) = (i as usize, j as usize);
                acc += if i == j { v * xb[(i, i)] } else { v * (xb[(i, j)] + xb[(j, i)]) };
            }
        }
        acc
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.iter().all(Vec::is_empty)
    }
}

/// One SDP instance: block structure, equality constraints, objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpInstance {
    pub block_sizes: Vec<usize>,
    pub constraints: Vec<BlockSparse>,
    pub rhs: Vec<f64>,
    pub objective: BlockSparse,
}

#[derive(Debug, thiserror::Error)]
pub enum SdpError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("malformed instance JSON: {0}")]
    Json(String),
}

impl SdpInstance {
    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        let nb = self.block_sizes.len();
        if self.block_sizes.iter().any(|&s| s == 0) {
            return Err(SdpError::InvalidInstance("zero-sized block".into()));
        }
        if self.rhs.len() != self.constraints.len() {
            return Err(SdpError::InvalidInstance(format!(
                "{} constraints but {} right-hand sides",
                self.constraints.len(),
                self.rhs.len()
            )));
        }
        let check = |mat: &BlockSparse, what: &str| -> Result<(), SdpError> {
            if mat.blocks.len() != nb {
                return Err(SdpError::InvalidInstance(format!(
                    "{what} has {} blocks, instance has {nb}",
                    mat.blocks.len()
                )));
            }
            for (bi, entries) in mat.blocks.iter().enumerate() {
                let s = self.block_sizes[bi];
                for &(i, j, v) in entries {
                    if (i as usize) >= s || j > i {
                        return Err(SdpError::InvalidInstance(format!(
                            "{what} block {bi}: entry ({i},{j}) out of lower triangle of size {s}"
                        )));
                    }
                    if !v.is_finite() {
                        return Err(SdpError::InvalidInstance(format!(
                            "{what} block {bi}: non-finite coefficient"
                        )));
                    }
                }
            }
            Ok(())
        };
        for (k, a) in self.constraints.iter().enumerate() {
            check(a, &format!("constraint {k}"))?;
            if a.is_empty() {
                return Err(SdpError::InvalidInstance(format!(
                    "constraint {k} has no coefficients"
                )));
            }
        }
        check(&self.objective, "objective")?;
        if self.rhs.iter().any(|v| !v.is_finite()) {
            return Err(SdpError::InvalidInstance("non-finite right-hand side".into()));
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self, SdpError> {
        serde_json::from_str(s).map_err(|e| SdpError::Json(e.to_string()))
    }
}

#[derive(Clone, Debug)]
pub struct SdpSettings {
    /// Relative tolerance for feasibility residuals and the duality gap.
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SdpSettings {
    fn default() -> Self {
        SdpSettings { feas_tol: 1e-8, max_iter: 200 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub mu: f64,
    pub tau: f64,
    pub kappa: f64,
}

#[derive(Clone, Debug)]
pub enum SdpOutcome {
    /// Primal-dual pair meeting all tolerances: `x` solves the constraints
    /// (PSD, within tolerance), `y`/`s` are the dual multipliers.
    Feasible { x: Vec<Mat>, y: Vec<f64>, s: Vec<Mat> },
    /// Unit-norm Farkas ray proving primal infeasibility:
    /// `sum_k ray_k A_k >= 0` and `b . ray < 0`, verified numerically.
    Infeasible { ray: Vec<f64> },
    Unknown { reason: String },
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub outcome: SdpOutcome,
    pub stats: SolveStats,
}

/// Quality of a candidate Farkas ray against the instance data.
///
/// Normalizes the ray to unit 2-norm and returns `(b . u, lambda_min)`
/// where `lambda_min` is the smallest eigenvalue over the blocks of
/// `sum_k u_k A_k`. A valid infeasibility proof has the first strictly
/// negative and the second (near) nonnegative.
pub fn farkas_ray_quality(inst: &SdpInstance, ray: &[f64]) -> (f64, f64) {
    let norm = vec_norm2(ray);
    if norm <= 0.0 || !norm.is_finite() {
        return (0.0, f64::NEG_INFINITY);
    }
    let u: Vec<f64> = ray.iter().map(|v| v / norm).collect();
    let bu = vec_dot(&inst.rhs, &u);
    let blocks = apply_at(inst, &u, &inst.block_sizes);
    let mut lmin = f64::INFINITY;
    for b in &blocks {
        match sym_eigen(&SymMat::from_mat(b)) {
            Ok(e) => lmin = lmin.min(e.values.last().copied().unwrap_or(0.0)),
            Err(_) => return (bu, f64::NEG_INFINITY),
        }
    }
    if blocks.is_empty() {
        lmin = 0.0;
    }
    (bu, lmin)
}

struct Scaling {
    r: Mat,
    omega: Mat,
    lam: Vec<f64>,
}

struct Direction {
    dx: Vec<Mat>,
    ds: Vec<Mat>,
    dlx: Vec<Mat>,
    dls: Vec<Mat>,
    dy: Vec<f64>,
    dtau: f64,
    dkappa: f64,
}

pub fn solve(inst: &SdpInstance, settings: &SdpSettings) -> SdpSolution {
    let mut stats = SolveStats::default();
    if let Err(e) = inst.validate() {
        return SdpSolution { outcome: SdpOutcome::Unknown { reason: e.to_string() }, stats };
    }
    let sizes: Vec<usize> = inst.block_sizes.clone();
    let nb = sizes.len();
    let m = inst.constraints.len();
    let nu: f64 = sizes.iter().map(|&s| s as f64).sum();
    let c_dense = inst.objective.to_dense(&sizes);
    let b = &inst.rhs;
    let b_norm = vec_norm2(b);
    let c_norm = blocks_frob(&c_dense);
    let tol = settings.feas_tol;

    if m == 0 {
        let x: Vec<Mat> = sizes.iter().map(|&s| Mat::zeros(s, s)).collect();
        stats.tau = 1.0;
        return SdpSolution {
            outcome: SdpOutcome::Feasible { x, y: vec![], s: c_dense },
            stats,
        };
    }

    // Which constraints touch which block, for the Schur complement build.
    let mut touching: Vec<Vec<usize>> = vec![Vec::new(); nb];
    for (k, a) in inst.constraints.iter().enumerate() {
        for (bi, entries) in a.blocks.iter().enumerate() {
            if !entries.is_empty() {
                touching[bi].push(k);
            }
        }
    }

    let mut x: Vec<Mat> = sizes.iter().map(|&s| Mat::identity(s)).collect();
    let mut s_blocks: Vec<Mat> = sizes.iter().map(|&s| Mat::identity(s)).collect();
    let mut y = vec![0.0; m];
    let mut tau = 1.0_f64;
    let mut kappa = 1.0_f64;

    let mut best_feasible: Option<(Vec<Mat>, Vec<f64>, Vec<Mat>)> = None;
    let mut best_merit = f64::INFINITY;
    let mut best_ray: Option<Vec<f64>> = None;
    let mut best_ray_score = f64::NEG_INFINITY;
    let mut no_improve = 0usize;
    let mut polishing = 0usize;
    let polish_budget = 40usize;
    let mut tiny_steps = 0usize;
    let mut fail_reason = String::from("iteration limit reached");

    'outer: for iter in 1..=settings.max_iter {
        // Residuals of the embedded system.
        let ax = apply_a(inst, &x);
        let rp: Vec<f64> = ax.iter().zip(b).map(|(a, bb)| a - tau * bb).collect();
        let aty = apply_at(inst, &y, &sizes);
        let rd: Vec<Mat> = (0..nb)
            .map(|bi| c_dense[bi].scale(tau).sub(&aty[bi]).sub(&s_blocks[bi]))
            .collect();
        let cx = inst.objective.dot(&x);
        let by = vec_dot(b, &y);
        let rg = by - cx - kappa;
        let xs = blocks_dot(&x, &s_blocks);
        let mu = (xs + tau * kappa) / (nu + 1.0);

        // Candidate solution checks on the de-homogenized point.
        let inv_tau = 1.0 / tau;
        let p_vec: Vec<f64> = ax.iter().zip(b).map(|(a, bb)| a * inv_tau - bb).collect();
        let p_rel = vec_norm2(&p_vec) / (1.0 + b_norm);
        let d_rel = blocks_frob(&rd) * inv_tau / (1.0 + c_norm);
        let cxh = cx * inv_tau;
        let byh = by * inv_tau;
        let gap_rel = (cxh - byh).abs() / (1.0 + cxh.abs() + byh.abs());
        stats.iterations = iter;
        stats.primal_residual = p_rel;
        stats.dual_residual = d_rel;
        stats.duality_gap = gap_rel;
        stats.mu = mu;
        stats.tau = tau;
        stats.kappa = kappa;

        if best_ray.is_none() && p_rel <= tol && d_rel <= tol && gap_rel <= tol {
            let merit = p_rel + d_rel + gap_rel;
            if merit < 0.9 * best_merit {
                no_improve = 0;
            } else {
                no_improve += 1;
            }
            if merit < best_merit {
                best_merit = merit;
                let xh: Vec<Mat> = x
                    .iter()
                    .map(|xb| {
                        let mut h = xb.scale(inv_tau);
                        h.symmetrize();
                        h
                    })
                    .collect();
                let sh: Vec<Mat> = s_blocks
                    .iter()
                    .map(|sb| {
                        let mut h = sb.scale(inv_tau);
                        h.symmetrize();
                        h
                    })
                    .collect();
                let yh: Vec<f64> = y.iter().map(|v| v * inv_tau).collect();
                best_feasible = Some((xh, yh, sh));
            }
        } else if best_feasible.is_none() && by > 0.0 {
            let cand: Vec<f64> = y.iter().map(|v| -v).collect();
            let (bu, lmin) = farkas_ray_quality(inst, &cand);
            if bu <= -10.0 * tol * (1.0 + b_norm) && lmin >= -tol {
                if lmin > best_ray_score + 1e-13 {
                    no_improve = 0;
                } else {
                    no_improve += 1;
                }
                if lmin > best_ray_score {
                    best_ray_score = lmin;
                    let n = vec_norm2(&cand);
                    best_ray = Some(cand.iter().map(|v| v / n).collect());
                }
            } else if best_ray.is_some() {
                no_improve += 1;
            }
        }

        if best_feasible.is_some() || best_ray.is_some() {
            polishing += 1;
            let polished_enough = best_feasible.is_some() && best_merit <= 1e-13;
            if polished_enough || polishing >= polish_budget || no_improve >= 6 {
                break 'outer;
            }
        }

        if tau < 1e-14 {
            fail_reason = "tau collapsed without a verified certificate".into();
            break 'outer;
        }

        // Nesterov-Todd scaling per block.
        let mut scal = Vec::with_capacity(nb);
        for bi in 0..nb {
            match nt_scaling(&x[bi], &s_blocks[bi]) {
                Some(sc) => scal.push(sc),
                None => {
                    fail_reason = "numerical breakdown computing the scaling point".into();
                    break 'outer;
                }
            }
        }

        // Schur complement and its factorization.
        let m_mat = build_schur(inst, &sizes, &scal, &touching);
        let chol_f = match factor_with_reg(&m_mat) {
            Some(l) => l,
            None => {
                fail_reason = "Schur complement factorization failed".into();
                break 'outer;
            }
        };

        let oco: Vec<Mat> = (0..nb)
            .map(|bi| scal[bi].omega.matmul(&c_dense[bi]).matmul(&scal[bi].omega))
            .collect();
        let a_oco = apply_a_dense(inst, &oco);
        let coc = inst.objective.dot(&oco);
        let u1: Vec<f64> = a_oco.iter().zip(b).map(|(a, bb)| a + bb).collect();
        let u2: Vec<f64> = b.iter().zip(&a_oco).map(|(bb, a)| bb - a).collect();
        let rho = coc + kappa / tau;
        let h = schur_solve(&chol_f, &m_mat, &u1);

        // Predictor (affine scaling) direction.
        let aff = match newton_pass(
            inst, &sizes, &c_dense, &scal, &chol_f, &m_mat, &h, &u2, rho, &rp, &rd, rg, tau,
            kappa, mu, 0.0, None,
        ) {
            Some(d) => d,
            None => {
                fail_reason = "Newton system breakdown in predictor".into();
                break 'outer;
            }
        };
        let alpha_aff = max_step(&scal, &aff.dlx, &aff.dls, tau, aff.dtau, kappa, aff.dkappa)
            .min(1.0);
        let mut xs_aff = 0.0;
        for bi in 0..nb {
            let xa = x[bi].add(&aff.dx[bi].scale(alpha_aff));
            let sa = s_blocks[bi].add(&aff.ds[bi].scale(alpha_aff));
            xs_aff += xa.dot(&sa);
        }
        let mu_aff = (xs_aff
            + (tau + alpha_aff * aff.dtau) * (kappa + alpha_aff * aff.dkappa))
            / (nu + 1.0);
        let gamma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector terms from the affine direction.
        let corr_blocks: Vec<Mat> = (0..nb)
            .map(|bi| {
                let p = aff.dlx[bi].matmul(&aff.dls[bi]);
                p.add(&p.transpose()).scale(0.5)
            })
            .collect();
        let corr_tk = aff.dtau * aff.dkappa;

        let dir = match newton_pass(
            inst, &sizes, &c_dense, &scal, &chol_f, &m_mat, &h, &u2, rho, &rp, &rd, rg, tau,
            kappa, mu, gamma, Some((&corr_blocks, corr_tk)),
        ) {
            Some(d) => d,
            None => {
                fail_reason = "Newton system breakdown in corrector".into();
                break 'outer;
            }
        };

        let alpha = (0.99
            * max_step(&scal, &dir.dlx, &dir.dls, tau, dir.dtau, kappa, dir.dkappa))
        .min(1.0);
        if alpha < 1e-10 {
            tiny_steps += 1;
            if tiny_steps >= 3 {
                fail_reason = "step length collapsed".into();
                break 'outer;
            }
        } else {
            tiny_steps = 0;
        }

        for bi in 0..nb {
            x[bi] = x[bi].add(&dir.dx[bi].scale(alpha));
            x[bi].symmetrize();
            s_blocks[bi] = s_blocks[bi].add(&dir.ds[bi].scale(alpha));
            s_blocks[bi].symmetrize();
        }
        for (yk, dk) in y.iter_mut().zip(&dir.dy) {
            *yk += alpha * dk;
        }
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;

        if !tau.is_finite()
            || !kappa.is_finite()
            || tau <= 0.0
            || kappa <= 0.0
            || x.iter().any(|b| !b.is_finite())
            || s_blocks.iter().any(|b| !b.is_finite())
            || y.iter().any(|v| !v.is_finite())
        {
            fail_reason = "iterate left the numerical domain".into();
            break 'outer;
        }
    }

    let outcome = if let Some((x, y, s)) = best_feasible {
        SdpOutcome::Feasible { x, y, s }
    } else if let Some(ray) = best_ray {
        SdpOutcome::Infeasible { ray }
    } else {
        SdpOutcome::Unknown { reason: fail_reason }
    };
    SdpSolution { outcome, stats }
}

/// NT scaling point for one block: returns R with R^-1 X R^-T = R^T S R =
/// diag(lam), plus Omega = R R^T (the metric geometric mean of X and
/// S^-1).
fn nt_scaling(x: &Mat, s: &Mat) -> Option<Scaling> {
    let pd = |vals: &[f64]| vals.last().copied().unwrap_or(0.0) > 0.0;

    let es = sym_eigen(&SymMat::from_mat(s)).ok()?;
    if !pd(&es.values) {
        return None;
    }
    let s_half = sym_power(&es, 0.5);
    let s_ihalf = sym_power(&es, -0.5);
    let t = s_half.matmul(x).matmul(&s_half);
    let et = sym_eigen(&SymMat::from_mat(&t)).ok()?;
    if !pd(&et.values) {
        return None;
    }
    let t_half = sym_power(&et, 0.5);
    let mut w = s_ihalf.matmul(&t_half).matmul(&s_ihalf);
    w.symmetrize();
    let ew = sym_eigen(&SymMat::from_mat(&w)).ok()?;
    if !pd(&ew.values) {
        return None;
    }
    let w_half = sym_power(&ew, 0.5);
    let mut lam_hat = w_half.matmul(s).matmul(&w_half);
    lam_hat.symmetrize();
    let el = sym_eigen(&SymMat::from_mat(&lam_hat)).ok()?;
    if !pd(&el.values) {
        return None;
    }
    let r = w_half.matmul(&el.vectors);
    Some(Scaling { r, omega: w, lam: el.values })
}

fn build_schur(
    inst: &SdpInstance,
    sizes: &[usize],
    scal: &[Scaling],
    touching: &[Vec<usize>],
) -> Mat {
    let m = inst.constraints.len();
    let mut mm = Mat::zeros(m, m);
    for (bi, &s) in sizes.iter().enumerate() {
        let omega = &scal[bi].omega;
        for &k in &touching[bi] {
            let u = congr_sparse(omega, &inst.constraints[k].blocks[bi], s);
            for &j in &touching[bi] {
                if j > k {
                    continue;
                }
                mm[(k, j)] += sparse_dot_dense(&inst.constraints[j].blocks[bi], &u);
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            mm[(j, i)] = mm[(i, j)];
        }
    }
    mm
}

/// Omega * A * Omega for sparse symmetric A, via rank-one updates.
fn congr_sparse(omega: &Mat, entries: &SparseSym, s: usize) -> Mat {
    let mut u = Mat::zeros(s, s);
    for &(i, j, v) in entries {
        let (i, j) = (i as usize, j as usize);
        if i == j {
            for r in 0..s {
                let a = v * omega[(r, i)];
                if a == 0.0 {
                    continue;
                }
                for c in 0..s {
                    u[(r, c)] += a * omega[(c, i)];
                }
            }
        } else {
            for r in 0..s {
                let a = v * omega[(r, i)];
                let bq = v * omega[(r, j)];
                for c in 0..s {
                    u[(r, c)] += a * omega[(c, j)] + bq * omega[(c, i)];
                }
            }
        }
    }
    u
}

fn sparse_dot_dense(entries: &SparseSym, u: &Mat) -> f64 {
    let mut acc = 0.0;
    for &(i, j, v) in entries {
        let (i, j) = (i as usize, j as usize);
        acc += if i == j { v * u[(i, i)] } else { v * (u[(i, j)] + u[(j, i)]) };
    }
    acc
}

fn factor_with_reg(mm: &Mat) -> Option<Mat> {
    let n = mm.rows;
    let base = (mm.trace().abs() / n.max(1) as f64).max(f64::MIN_POSITIVE);
    let mut delta = 0.0;
    for _ in 0..8 {
        let mut reg = mm.clone();
        if delta > 0.0 {
            for i in 0..n {
                reg[(i, i)] += delta;
            }
        }
        if let Ok(l) = cholesky(&reg) {
            return Some(l);
        }
        delta = if delta == 0.0 { 1e-14 * base } else { delta * 100.0 };
    }
    None
}

/// Solve with the (possibly regularized) factor, then iteratively refine
/// against the original matrix.
fn schur_solve(chol_f: &Mat, m_mat: &Mat, rhs: &[f64]) -> Vec<f64> {
    let mut x = cholesky_solve(chol_f, rhs);
    for _ in 0..2 {
        let mut r = m_mat.matvec(&x);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri -= bi;
        }
        let corr = cholesky_solve(chol_f, &r);
        for (xi, ci) in x.iter_mut().zip(&corr) {
            *xi -= ci;
        }
    }
    x
}

#[allow(clippy::too_many_arguments)]
fn newton_pass(
    inst: &SdpInstance,
    sizes: &[usize],
    c_dense: &[Mat],
    scal: &[Scaling],
    chol_f: &Mat,
    m_mat: &Mat,
    h: &[f64],
    u2: &[f64],
    rho: f64,
    rp: &[f64],
    rd: &[Mat],
    rg: f64,
    tau: f64,
    kappa: f64,
    mu: f64,
    gamma: f64,
    corr: Option<(&[Mat], f64)>,
) -> Option<Direction> {
    let eta = 1.0 - gamma;
    let nb = scal.len();
    let m = inst.constraints.len();

    let mut dd = Vec::with_capacity(nb);
    let mut odo = Vec::with_capacity(nb);
    for bi in 0..nb {
        let d = rd[bi].scale(-eta);
        let o = scal[bi].omega.matmul(&d).matmul(&scal[bi].omega);
        dd.push(d);
        odo.push(o);
    }

    let mut dtil = Vec::with_capacity(nb);
    let mut rdr = Vec::with_capacity(nb);
    for bi in 0..nb {
        let lam = &scal[bi].lam;
        let n = lam.len();
        let mut dc = Mat::zeros(n, n);
        for i in 0..n {
            dc[(i, i)] = gamma * mu - lam[i] * lam[i];
        }
        if let Some((cb, _)) = corr {
            let cbm = &cb[bi];
            for i in 0..n {
                for j in 0..n {
                    dc[(i, j)] -= cbm[(i, j)];
                }
            }
        }
        let mut dt = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let denom = 0.5 * (lam[i] + lam[j]);
                if denom <= 0.0 || !denom.is_finite() {
                    return None;
                }
                dt[(i, j)] = dc[(i, j)] / denom;
            }
        }
        let r = &scal[bi].r;
        let rr = r.matmul(&dt).matmul(&r.transpose());
        dtil.push(dt);
        rdr.push(rr);
    }
    let d_tk = match corr {
        Some((_, c)) => gamma * mu - tau * kappa - c,
        None => -tau * kappa,
    };

    let mut r1 = vec![0.0; m];
    for k in 0..m {
        let a = &inst.constraints[k];
        r1[k] = -eta * rp[k] - a.dot(&rdr) - a.dot(&odo);
    }
    let r2 = -eta * rg + inst.objective.dot(&rdr) + inst.objective.dot(&odo) + d_tk / tau;

    let g1 = schur_solve(chol_f, m_mat, &r1);
    let denom = rho + vec_dot(u2, h);
    if !denom.is_finite() || denom.abs() < 1e-300 {
        return None;
    }
    let dtau = (r2 - vec_dot(u2, &g1)) / denom;
    if !dtau.is_finite() {
        return None;
    }
    let dy: Vec<f64> = g1.iter().zip(h).map(|(a, hh)| a + dtau * hh).collect();
    let aty = apply_at(inst, &dy, sizes);

    let mut dx = Vec::with_capacity(nb);
    let mut ds = Vec::with_capacity(nb);
    let mut dlx = Vec::with_capacity(nb);
    let mut dls = Vec::with_capacity(nb);
    for bi in 0..nb {
        let mut dsb = c_dense[bi].scale(dtau).sub(&aty[bi]).sub(&dd[bi]);
        dsb.symmetrize();
        let dlsb = scal[bi].r.transpose().matmul(&dsb).matmul(&scal[bi].r);
        let dlxb = dtil[bi].sub(&dlsb);
        let mut dxb = scal[bi].r.matmul(&dlxb).matmul(&scal[bi].r.transpose());
        dxb.symmetrize();
        dx.push(dxb);
        ds.push(dsb);
        dlx.push(dlxb);
        dls.push(dlsb);
    }
    let dkappa = (d_tk - kappa * dtau) / tau;
    Some(Direction { dx, ds, dlx, dls, dy, dtau, dkappa })
}

/// Largest alpha keeping all cone variables inside (up to the boundary).
fn max_step(
    scal: &[Scaling],
    dlx: &[Mat],
    dls: &[Mat],
    tau: f64,
    dtau: f64,
    kappa: f64,
    dkappa: f64,
) -> f64 {
    let mut alpha = 1e30_f64;
    for (bi, sc) in scal.iter().enumerate() {
        alpha = alpha.min(block_step(&sc.lam, &dlx[bi]));
        alpha = alpha.min(block_step(&sc.lam, &dls[bi]));
    }
    if dtau < 0.0 {
        alpha = alpha.min(-tau / dtau);
    }
    if dkappa < 0.0 {
        alpha = alpha.min(-kappa / dkappa);
    }
    alpha
}

/// Largest alpha with diag(lam) + alpha * dl PSD, via the smallest
/// eigenvalue in the lambda-normalized metric.
fn block_step(lam: &[f64], dl: &Mat) -> f64 {
    let n = lam.len();
    if n == 0 {
        return 1e30;
    }
    let mut nmat = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let denom = (lam[i] * lam[j]).sqrt();
            if denom <= 0.0 || !denom.is_finite() {
                return 0.0;
            }
            nmat[(i, j)] = dl[(i, j)] / denom;
        }
    }
    nmat.symmetrize();
    match sym_eigen(&SymMat::from_mat(&nmat)) {
        Ok(e) => {
            let min = e.values.last().copied().unwrap_or(0.0);
            if min >= -1e-300 {
                1e30
            } else {
                -1.0 / min
            }
        }
        Err(_) => 0.0,
    }
}

fn apply_a(inst: &SdpInstance, x: &[Mat]) -> Vec<f64> {
    inst.constraints.iter().map(|a| a.dot(x)).collect()
}

fn apply_a_dense(inst: &SdpInstance, x: &[Mat]) -> Vec<f64> {
    apply_a(inst, x)
}

/// sum_k y_k A_k as dense symmetric blocks.
fn apply_at(inst: &SdpInstance, y: &[f64], sizes: &[usize]) -> Vec<Mat> {
    let mut out: Vec<Mat> = sizes.iter().map(|&s| Mat::zeros(s, s)).collect();
    for (k, a) in inst.constraints.iter().enumerate() {
        let yk = y[k];
        if yk == 0.0 {
            continue;
        }
        for (bi, entries) in a.blocks.iter().enumerate() {
            for &(i, j, v) in entries {
                let (i, j) = (i as usize, j as usize);
                out[bi][(i, j)] += yk * v;
                if i != j {
                    out[bi][(j, i)] += yk * v;
                }
            }
        }
    }
    out
}

fn vec_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn vec_norm2(a: &[f64]) -> f64 {
    vec_dot(a, a).sqrt()
}

fn blocks_dot(a: &[Mat], b: &[Mat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn blocks_frob(a: &[Mat]) -> f64 {
    a.iter().map(|m| {
        let f = m.frobenius_norm();
        f * f
    })
    .sum::<f64>()
    .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feasibility(
        sizes: &[usize],
        cons: Vec<(Vec<SparseSym>, f64)>,
    ) -> SdpInstance {
        let nb = sizes.len();
        let (constraints, rhs): (Vec<_>, Vec<_>) = cons
            .into_iter()
            .map(|(blocks, b)| {
                assert_eq!(blocks.len(), nb);
                (BlockSparse { blocks }, b)
            })
            .unzip();
        SdpInstance {
            block_sizes: sizes.to_vec(),
            constraints,
            rhs,
            objective: BlockSparse::zero(nb),
        }
    }

    #[test]
    fn pins_unique_scalar_point() {
        let inst = feasibility(&[1], vec![(vec![vec![(0, 0, 1.0)]], 2.0)]);
        let sol = solve(&inst, &SdpSettings::default());
        match sol.outcome {
            SdpOutcome::Feasible { x, .. } => {
                assert!((x[0][(0, 0)] - 2.0).abs() < 1e-6, "x = {:?}", x[0]);
            }
            other => panic!("expected Feasible, got {other:?}"),
        }
    }

    #[test]
    fn analytic_center_of_correlation_matrices() {
        // X PSD with unit diagonal; the most interior point has zero
        // off-diagonal.
        let inst = feasibility(
            &[2],
            vec![
                (vec![vec![(0, 0, 1.0)]], 1.0),
                (vec![vec![(1, 1, 1.0)]], 1.0),
            ],
        );
        let sol = solve(&inst, &SdpSettings::default());
        match sol.outcome {
            SdpOutcome::Feasible { x, .. } => {
                assert!((x[0][(0, 0)] - 1.0).abs() < 1e-6);
                assert!((x[0][(1, 1)] - 1.0).abs() < 1e-6);
                assert!(x[0][(0, 1)].abs() < 1e-5, "off-diagonal {:.3e}", x[0][(0, 1)]);
            }
            other => panic!("expected Feasible, got {other:?}"),
        }
    }

    #[test]
    fn detects_infeasible_negative_diagonal() {
        // X >= 0 scalar with X = -1.
        let inst = feasibility(&[1], vec![(vec![vec![(0, 0, 1.0)]], -1.0)]);
        let sol = solve(&inst, &SdpSettings::default());
        match sol.outcome {
            SdpOutcome::Infeasible { ray } => {
                let (bu, lmin) = farkas_ray_quality(&inst, &ray);
                assert!(bu < -0.5, "weak separation {bu}");
                assert!(lmin > -1e-7, "ray matrix not PSD: {lmin}");
            }
            other => panic!("expected Infeasible, got {other:?}"),
        }
    }

    #[test]
    fn gram_matrix_of_sos_polynomial() {
        // x^2 + 2x + 2 = (x+1)^2 + 1 over basis {1, x}: the Gram matrix is
        // fully pinned to [[2,1],[1,1]].
        let inst = feasibility(
            &[2],
            vec![
                (vec![vec![(0, 0, 1.0)]], 2.0),
                (vec![vec![(1, 0, 1.0)]], 2.0),
                (vec![vec![(1, 1, 1.0)]], 1.0),
            ],
        );
        let sol = solve(&inst, &SdpSettings::default());
        match sol.outcome {
            SdpOutcome::Feasible { x, .. } => {
                assert!((x[0][(0, 0)] - 2.0).abs() < 1e-6);
                assert!((x[0][(0, 1)] - 1.0).abs() < 1e-6);
                assert!((x[0][(1, 1)] - 1.0).abs() < 1e-6);
            }
            other => panic!("expected Feasible, got {other:?}"),
        }
    }

    #[test]
    fn refutes_non_sos_polynomial() {
        // 1 - x^2 is not a sum of squares; the ray is a moment vector with
        // M >= 0 and a negative value on the polynomial.
        let inst = feasibility(
            &[2],
            vec![
                (vec![vec![(0, 0, 1.0)]], 1.0),
                (vec![vec![(1, 0, 1.0)]], 0.0),
                (vec![vec![(1, 1, 1.0)]], -1.0),
            ],
        );
        let sol = solve(&inst, &SdpSettings::default());
        match sol.outcome {
            SdpOutcome::Infeasible { ray } => {
                let (bu, lmin) = farkas_ray_quality(&inst, &ray);
                assert!(bu <= -1e-7, "weak separation {bu}");
                assert!(lmin >= -1e-8, "moment matrix not PSD: {lmin}");
            }
            other => panic!("expected Infeasible, got {other:?}"),
        }
    }

    #[test]
    fn minimizes_trace_with_fixed_off_diagonal() {
        // min tr X s.t. X_01 = 1, X PSD: optimum 2 at [[1,1],[1,1]].
        let mut inst = feasibility(&[2], vec![(vec![vec![(1, 0, 0.5)]], 1.0)]);
        inst.objective = BlockSparse { blocks: vec![vec![(0, 0, 1.0), (1, 1, 1.0)]] };
        let sol = solve(&inst, &SdpSettings::default());
        match sol.outcome {
            SdpOutcome::Feasible { x, .. } => {
                let tr = x[0][(0, 0)] + x[0][(1, 1)];
                assert!((tr - 2.0).abs() < 1e-4, "trace {tr}");
                assert!((x[0][(0, 1)] - 1.0).abs() < 1e-6);
            }
            other => panic!("expected Feasible, got {other:?}"),
        }
    }

    #[test]
    fn free_variable_as_split_pair() {
        // u - v = 5 with u, v >= 0.
        let inst = feasibility(
            &[1, 1],
            vec![(vec![vec![(0, 0, 1.0)], vec![(0, 0, -1.0)]], 5.0)],
        );
        let sol = solve(&inst, &SdpSettings::default());
        match sol.outcome {
            SdpOutcome::Feasible { x, .. } => {
                let diff = x[0][(0, 0)] - x[1][(0, 0)];
                assert!((diff - 5.0).abs() < 1e-6, "difference {diff}");
            }
            other => panic!("expected Feasible, got {other:?}"),
        }
    }

    #[test]
    fn no_constraints_is_trivially_feasible() {
        let inst = SdpInstance {
            block_sizes: vec![2],
            constraints: vec![],
            rhs: vec![],
            objective: BlockSparse::zero(1),
        };
        let sol = solve(&inst, &SdpSettings::default());
        assert!(matches!(sol.outcome, SdpOutcome::Feasible { .. }));
    }

    #[test]
    fn instance_json_round_trip() {
        let mut inst = feasibility(&[2, 1], vec![(vec![vec![(1, 0, 0.25)], vec![]], 1.5)]);
        inst.objective = BlockSparse { blocks: vec![vec![(0, 0, -1.0)], vec![(0, 0, 2.0)]] };
        let s = inst.to_json_string();
        let back = SdpInstance::from_json_str(&s).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn validation_rejects_malformed_instances() {
        // Upper-triangle entry.
        let bad = feasibility(&[2], vec![(vec![vec![(0, 1, 1.0)]], 0.0)]);
        assert!(bad.validate().is_err());
        // Constraint with no coefficients.
        let empty = feasibility(&[2], vec![(vec![vec![]], 1.0)]);
        assert!(empty.validate().is_err());
        // Index out of range.
        let oob = feasibility(&[2], vec![(vec![vec![(2, 0, 1.0)]], 0.0)]);
        assert!(oob.validate().is_err());
    }
}
