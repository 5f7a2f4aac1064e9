//! Symmetric diagonalization of matrix polynomials by congruence, with
//! branching over pivot choices.
//!
//! Over the polynomial ring a chosen pivot may vanish on a subvariety, so
//! instead of computing varieties the elimination branches on every
//! admissible pivot. Each branch carries an exact congruence C with
//! CᵀfC = D diagonal; jointly the branches reflect pointwise
//! semidefiniteness of f away from a measure-zero set.
//!
//! Division is avoided by scaling the remaining columns with the pivot
//! itself: eliminating pivot p sends the trailing block F to p·(p·F − ffᵀ)
//! in the usual rank-one pattern, which keeps every entry polynomial and
//! produces diagonals like diag(a, a·det f) for 2×2 inputs.

use num::bigint::BigInt;
use num::{Integer, Signed, Zero};

use crate::poly::{rat_int, MatrixPoly, QMatPoly, QPoly, Rat, ScalarPoly};

#[derive(Debug, thiserror::Error)]
pub enum DiagError {
    #[error("input matrix polynomial must be symmetric")]
    NotSymmetric,
    #[error("more than {cap} branches; partial results attached")]
    BranchCapExceeded { cap: usize, partial: Vec<DiagBranch> },
}

/// One congruence branch: CᵀfC = D holds exactly, D diagonal.
#[derive(Clone, Debug)]
pub struct DiagBranch {
    pub c: QMatPoly,
    pub d: QMatPoly,
    /// Pivot history: `p{j}` picks the working diagonal entry j, `r{k}`
    /// repairs a zero diagonal by mixing in column k first.
    pub label: String,
}

struct Work {
    c: QMatPoly,
    f: QMatPoly,
    stage: usize,
    label: Vec<String>,
}

/// Diagonalize a symmetric matrix polynomial by congruence, branching over
/// every admissible pivot at each stage. Branches are deduplicated by the
/// content-normalized diagonal and returned sorted by pivot history.
pub fn diagonalize_branching(f: &QMatPoly, cap: usize) -> Result<Vec<DiagBranch>, DiagError> {
    if !f.is_symmetric() {
        return Err(DiagError::NotSymmetric);
    }
    let t = f.size();
    let nvars = f.nvars();
    let mut results: Vec<DiagBranch> = Vec::new();
    let mut seen: Vec<Vec<QPoly>> = Vec::new();
    let mut stack = vec![Work {
        c: MatrixPoly::identity(nvars, t),
        f: f.clone(),
        stage: 0,
        label: Vec::new(),
    }];

    while let Some(mut w) = stack.pop() {
        loop {
            let s = w.stage;
            if s >= t || trailing_is_diagonal(&w.f, s) {
                let d_entries: Vec<QPoly> = (0..t).map(|i| w.f.entry(i, i).clone()).collect();
                let key = normalize_diag(&d_entries);
                if !seen.contains(&key) {
                    seen.push(key);
                    if results.len() == cap {
                        return Err(DiagError::BranchCapExceeded { cap, partial: results });
                    }
                    let mut d = MatrixPoly::zero(nvars, t);
                    for (i, e) in d_entries.into_iter().enumerate() {
                        *d.entry_mut(i, i) = e;
                    }
                    results.push(DiagBranch { c: w.c, d, label: w.label.join(";") });
                }
                break;
            }
            if (s..t).all(|k| w.f.entry(s, k).is_zero()) {
                w.stage += 1;
                continue;
            }
            let mut pivots: Vec<usize> =
                (s..t).filter(|&j| !w.f.entry(j, j).is_zero()).collect();
            if !pivots.is_empty() {
                pivots.sort_by_key(|&j| {
                    let p = w.f.entry(j, j);
                    let has_const = !p.coeff(&crate::poly::Monomial::one(nvars)).is_zero();
                    (if has_const { 0u8 } else { 1u8 }, p.degree(), j)
                });
                for &j in pivots.iter().rev() {
                    let mut child = Work {
                        c: w.c.clone(),
                        f: w.f.clone(),
                        stage: s,
                        label: w.label.clone(),
                    };
                    child.label.push(format!("p{}", j));
                    eliminate(&mut child, j, t, nvars);
                    child.stage = s + 1;
                    stack.push(child);
                }
                break;
            }
            let repairs: Vec<usize> =
                ((s + 1)..t).filter(|&k| !w.f.entry(s, k).is_zero()).collect();
            for &k in repairs.iter().rev() {
                let mut child = Work {
                    c: w.c.clone(),
                    f: w.f.clone(),
                    stage: s,
                    label: w.label.clone(),
                };
                child.label.push(format!("r{}", k));
                repair(&mut child, k, t, nvars);
                stack.push(child);
            }
            break;
        }
    }
    results.sort_by(|a, b| a.label.cmp(&b.label));
    Ok(results)
}

fn trailing_is_diagonal(f: &QMatPoly, s: usize) -> bool {
    let t = f.size();
    for i in s..t {
        for j in (i + 1)..t {
            if !f.entry(i, j).is_zero() {
                return false;
            }
        }
    }
    true
}

/// Swap pivot j into position s, then clear row and column s with the
/// division-free update: column k becomes p·e_k − F_sk·e_s for k > s.
fn eliminate(w: &mut Work, j: usize, t: usize, nvars: usize) {
    let s = w.stage;
    if j != s {
        let mut p = MatrixPoly::identity(nvars, t);
        *p.entry_mut(s, s) = ScalarPoly::zero(nvars);
        *p.entry_mut(j, j) = ScalarPoly::zero(nvars);
        *p.entry_mut(s, j) = ScalarPoly::one(nvars);
        *p.entry_mut(j, s) = ScalarPoly::one(nvars);
        w.c = w.c.matmul(&p);
        w.f = w.f.congruence(&p);
    }
    let pivot = w.f.entry(s, s).clone();
    let mut e = MatrixPoly::identity(nvars, t);
    for k in (s + 1)..t {
        *e.entry_mut(k, k) = pivot.clone();
        *e.entry_mut(s, k) = w.f.entry(s, k).neg();
    }
    w.c = w.c.matmul(&e);
    w.f = w.f.congruence(&e);
}

/// All trailing diagonal entries vanish identically but F_sk does not:
/// conjugate by I + E_ks so the new (s, s) entry is 2·F_sk.
fn repair(w: &mut Work, k: usize, t: usize, nvars: usize) {
    let s = w.stage;
    let mut c = MatrixPoly::identity(nvars, t);
    *c.entry_mut(k, s) = ScalarPoly::one(nvars);
    w.c = w.c.matmul(&c);
    w.f = w.f.congruence(&c);
}

/// Scale each diagonal entry by the inverse of its positive content so
/// branches differing only by positive rational factors collide.
fn normalize_diag(d: &[QPoly]) -> Vec<QPoly> {
    d.iter()
        .map(|p| {
            if p.is_zero() {
                return p.clone();
            }
            let mut num_gcd = BigInt::from(0);
            let mut den_lcm = BigInt::from(1);
            for (_, c) in p.terms() {
                num_gcd = num_gcd.gcd(&c.numer().abs());
                den_lcm = den_lcm.lcm(c.denom());
            }
            let content = Rat::new(num_gcd, den_lcm);
            p.scale(&(rat_int(1) / content))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{min_eig, SymMat};
    use crate::poly::{rat, Monomial};
    use rand::{Rng, SeedableRng};

    fn check_congruence(f: &QMatPoly, branches: &[DiagBranch]) {
        for b in branches {
            assert_eq!(f.congruence(&b.c), b.d, "branch {} breaks the congruence", b.label);
            for i in 0..b.d.size() {
                for j in 0..b.d.size() {
                    if i != j {
                        assert!(b.d.entry(i, j).is_zero());
                    }
                }
            }
        }
    }

    #[test]
    fn already_diagonal_input_passes_through() {
        let x = ScalarPoly::<Rat>::var(1, 0);
        let f = MatrixPoly::from_rows(vec![
            vec![x.clone(), ScalarPoly::zero(1)],
            vec![ScalarPoly::zero(1), ScalarPoly::one(1).sub(&x)],
        ]);
        let branches = diagonalize_branching(&f, 64).unwrap();
        assert_eq!(branches.len(), 1);
        assert_eq!(branches[0].c, MatrixPoly::identity(1, 2));
        assert_eq!(branches[0].d, f);
    }

    #[test]
    fn symbolic_two_by_two_produces_both_pivot_branches() {
        // f = [[a, b], [b, c]] in three variables.
        let a = ScalarPoly::<Rat>::var(3, 0);
        let b = ScalarPoly::<Rat>::var(3, 1);
        let c = ScalarPoly::<Rat>::var(3, 2);
        let f = MatrixPoly::from_rows(vec![
            vec![a.clone(), b.clone()],
            vec![b.clone(), c.clone()],
        ]);
        let branches = diagonalize_branching(&f, 64).unwrap();
        assert_eq!(branches.len(), 2);
        check_congruence(&f, &branches);

        let det = a.mul(&c).sub(&b.square());
        let zero = ScalarPoly::zero(3);
        let by_a = MatrixPoly::from_rows(vec![
            vec![a.clone(), zero.clone()],
            vec![zero.clone(), a.mul(&det)],
        ]);
        let by_c = MatrixPoly::from_rows(vec![
            vec![c.clone(), zero.clone()],
            vec![zero.clone(), c.mul(&det)],
        ]);
        assert!(branches.iter().any(|br| br.d == by_a));
        assert!(branches.iter().any(|br| br.d == by_c));

        let c_by_a = MatrixPoly::from_rows(vec![
            vec![ScalarPoly::one(3), b.neg()],
            vec![zero.clone(), a.clone()],
        ]);
        let picked = branches.iter().find(|br| br.d == by_a).unwrap();
        assert_eq!(picked.c, c_by_a);
        let c_by_c = MatrixPoly::from_rows(vec![
            vec![zero.clone(), c.clone()],
            vec![ScalarPoly::one(3), b.neg()],
        ]);
        let picked = branches.iter().find(|br| br.d == by_c).unwrap();
        assert_eq!(picked.c, c_by_c);
    }

    #[test]
    fn zero_diagonal_is_repaired() {
        let one = ScalarPoly::<Rat>::one(1);
        let zero = ScalarPoly::<Rat>::zero(1);
        let f = MatrixPoly::from_rows(vec![
            vec![zero.clone(), one.clone()],
            vec![one, zero.clone()],
        ]);
        let branches = diagonalize_branching(&f, 64).unwrap();
        assert_eq!(branches.len(), 1);
        check_congruence(&f, &branches);
        let d = &branches[0].d;
        assert_eq!(d.entry(0, 0), &ScalarPoly::constant(1, rat_int(2)));
        assert_eq!(d.entry(1, 1), &ScalarPoly::constant(1, rat_int(-2)));
        assert!(branches[0].label.starts_with('r'));
    }

    #[test]
    fn diagonal_entries_are_unit_conjugations_of_d() {
        // d_j * I = sum_k adjoint(E_jk) D E_jk for diagonal D.
        let x = ScalarPoly::<Rat>::var(2, 0);
        let y = ScalarPoly::<Rat>::var(2, 1);
        let f = MatrixPoly::from_rows(vec![
            vec![x.square().add(&ScalarPoly::one(2)), y.clone()],
            vec![y.clone(), x.mul(&y)],
        ]);
        let branches = diagonalize_branching(&f, 64).unwrap();
        check_congruence(&f, &branches);
        let b = &branches[0];
        let t = 2;
        let j = 1;
        let mut acc = MatrixPoly::zero(2, t);
        for k in 0..t {
            let mut e = MatrixPoly::zero(2, t);
            *e.entry_mut(j, k) = ScalarPoly::one(2);
            acc = acc.add(&b.d.congruence(&e));
        }
        assert_eq!(acc, MatrixPoly::scalar_identity(b.d.entry(j, j), t));
    }

    fn random_symmetric(
        rng: &mut impl Rng,
        nvars: usize,
        t: usize,
        deg: u32,
    ) -> QMatPoly {
        let monos = crate::poly::monomials_up_to(nvars, deg);
        let mut m = MatrixPoly::zero(nvars, t);
        for i in 0..t {
            for j in 0..=i {
                let mut p = ScalarPoly::zero(nvars);
                for mono in &monos {
                    if rng.gen_bool(0.5) {
                        p.add_term(mono.clone(), rat_int(rng.gen_range(-3..=3)));
                    }
                }
                *m.entry_mut(i, j) = p.clone();
                *m.entry_mut(j, i) = p;
            }
        }
        m
    }

    fn eval_min_eig(f: &MatrixPoly<f64>, x: &[f64]) -> f64 {
        let t = f.size();
        let vals = f.eval(x);
        let mut m = SymMat::zeros(t);
        for i in 0..t {
            for j in 0..=i {
                *m.at_mut(i, j) = 0.5 * (vals[i * t + j] + vals[j * t + i]);
            }
        }
        min_eig(&m).unwrap()
    }

    #[test]
    fn sampled_equivalence_on_random_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..6 {
            let t = rng.gen_range(2..=3);
            let f = random_symmetric(&mut rng, 2, t, 2);
            let branches = match diagonalize_branching(&f, 64) {
                Ok(b) => b,
                Err(DiagError::BranchCapExceeded { .. }) => continue,
                Err(e) => panic!("{}", e),
            };
            check_congruence(&f, &branches);
            let ff = f.to_f64_poly();
            let scale = f.max_abs_coeff().max(1.0);
            let dd: Vec<MatrixPoly<f64>> = branches.iter().map(|b| b.d.to_f64_poly()).collect();
            for _ in 0..200 {
                let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let fmin = eval_min_eig(&ff, &x);
                let all_d_psd = dd.iter().all(|d| {
                    (0..d.size()).all(|i| d.entry(i, i).eval(&x) >= -1e-9 * scale)
                });
                // Skip boundary-ambiguous points.
                if fmin.abs() < 1e-7 * scale {
                    continue;
                }
                if fmin > 0.0 {
                    assert!(all_d_psd, "psd point {:?} rejected by a branch", x);
                } else {
                    assert!(!all_d_psd, "non-psd point {:?} accepted by all branches", x);
                }
            }
        }
    }

    #[test]
    fn branch_cap_is_enforced() {
        // A 4x4 symbolic matrix with distinct variables on the diagonal
        // branches factorially; cap it low and expect the error.
        let n = 10;
        let vars: Vec<ScalarPoly<Rat>> = (0..n).map(|i| ScalarPoly::var(n, i)).collect();
        let mut f = MatrixPoly::zero(n, 4);
        let mut vi = 0;
        for i in 0..4 {
            for j in 0..=i {
                *f.entry_mut(i, j) = vars[vi].clone();
                *f.entry_mut(j, i) = vars[vi].clone();
                vi += 1;
            }
        }
        match diagonalize_branching(&f, 3) {
            Err(DiagError::BranchCapExceeded { cap, partial }) => {
                assert_eq!(cap, 3);
                assert_eq!(partial.len(), 3);
            }
            other => panic!("expected cap error, got {:?}", other.map(|b| b.len())),
        }
    }

    #[test]
    fn dedup_collapses_scaled_duplicates() {
        // f = [[z, 1], [1, z]]: both pivots give diag(z, z^3 - z) up to
        // positive content, so a single branch survives.
        let z = ScalarPoly::<Rat>::var(1, 0);
        let one = ScalarPoly::<Rat>::one(1);
        let f = MatrixPoly::from_rows(vec![
            vec![z.clone(), one.clone()],
            vec![one, z.clone()],
        ]);
        let branches = diagonalize_branching(&f, 64).unwrap();
        check_congruence(&f, &branches);
        assert_eq!(branches.len(), 1);
    }

    #[test]
    fn content_normalization_keeps_sign() {
        let x = ScalarPoly::<Rat>::var(1, 0);
        let p = x.scale(&rat(-4, 6));
        let n = normalize_diag(&[p]);
        assert_eq!(n[0], x.neg());
        let mono = Monomial::one(1);
        assert_eq!(n[0].coeff(&mono), rat_int(0));
    }
}
