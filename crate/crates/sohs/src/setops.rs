//! Numeric oracle for the region cut out by a module's generators:
//! membership tests, rejection sampling, and min-eigenvalue statistics.
//! Everything here is floating-point evidence used to cross-validate
//! certificates and counterexamples; emptiness of the region is never
//! decided here, only suspected.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gram::ModulePresentation;
use crate::linalg::{min_eig, SymMat};
use crate::poly::{FMatPoly, MatrixPoly};

#[derive(Debug, thiserror::Error)]
pub enum SetopsError {
    #[error("no samples accepted after {draws} draws (box empty, degenerate, or region likely empty)")]
    EmptyBoxOrNoSamples { draws: usize },
    #[error("point has {got} coordinates, module has {expected} variables")]
    Dimension { expected: usize, got: usize },
}

fn eval_min_eig(g: &FMatPoly, x: &[f64]) -> f64 {
    let t = g.size();
    let vals = g.eval(x);
    let mut m = SymMat::zeros(t);
    for i in 0..t {
        for j in 0..=i {
            *m.at_mut(i, j) = 0.5 * (vals[i * t + j] + vals[j * t + i]);
        }
    }
    min_eig(&m).unwrap_or(f64::NEG_INFINITY)
}

/// True iff every generator satisfies λ_min(g(x)) ≥ −tol. An empty
/// generator list accepts every point.
pub fn in_region(module: &ModulePresentation, x: &[f64], tol: f64) -> bool {
    assert_eq!(x.len(), module.nvars(), "point dimension mismatch");
    module
        .generators()
        .iter()
        .all(|g| eval_min_eig(&g.to_f64_poly(), x) >= -tol)
}

#[derive(Clone, Debug)]
pub struct SampleReport {
    pub points: Vec<Vec<f64>>,
    pub draws: usize,
    pub accepted: usize,
    pub acceptance_rate: f64,
}

/// Rejection-sample up to `count` region points uniformly from the box,
/// deterministically for a fixed seed. The draw budget is
/// max(10⁵, 1000·count); zero acceptances over the whole budget is
/// reported as an error, everything else (including a short yield) as a
/// report with the observed acceptance rate.
pub fn sample_region(
    module: &ModulePresentation,
    count: usize,
    bounds: &[(f64, f64)],
    seed: u64,
) -> Result<SampleReport, SetopsError> {
    let n = module.nvars();
    if bounds.len() != n {
        return Err(SetopsError::Dimension { expected: n, got: bounds.len() });
    }
    if bounds.iter().any(|(lo, hi)| !lo.is_finite() || !hi.is_finite() || lo > hi) {
        return Err(SetopsError::EmptyBoxOrNoSamples { draws: 0 });
    }
    let gens: Vec<FMatPoly> =
        module.generators().iter().map(MatrixPoly::to_f64_poly).collect();
    let tol = 1e-9;
    let budget = 100_000usize.max(count.saturating_mul(1000));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut draws = 0usize;
    while points.len() < count && draws < budget {
        let x: Vec<f64> = bounds
            .iter()
            .map(|&(lo, hi)| if lo == hi { lo } else { rng.gen_range(lo..hi) })
            .collect();
        draws += 1;
        if gens.iter().all(|g| eval_min_eig(g, &x) >= -tol) {
            points.push(x);
        }
    }
    let accepted = points.len();
    if accepted == 0 && count > 0 {
        return Err(SetopsError::EmptyBoxOrNoSamples { draws });
    }
    let acceptance_rate = if draws == 0 { 0.0 } else { accepted as f64 / draws as f64 };
    Ok(SampleReport { points, draws, accepted, acceptance_rate })
}

#[derive(Clone, Debug)]
pub struct MinEigStats {
    pub min: f64,
    pub max: f64,
    pub argmin: Vec<f64>,
    /// Ten equal-width buckets over [min, max]; a constant sample lands
    /// entirely in the first bucket.
    pub histogram: [usize; 10],
}

/// Reduce λ_min(f(x)) over the given points. Returns None for an empty
/// point list.
pub fn min_eig_stats(f: &FMatPoly, points: &[Vec<f64>]) -> Option<MinEigStats> {
    let values: Vec<f64> = points.iter().map(|x| eval_min_eig(f, x)).collect();
    let (mut min, mut max, mut arg) = (f64::INFINITY, f64::NEG_INFINITY, 0usize);
    for (i, &v) in values.iter().enumerate() {
        if v < min {
            min = v;
            arg = i;
        }
        if v > max {
            max = v;
        }
    }
    if values.is_empty() {
        return None;
    }
    let mut histogram = [0usize; 10];
    let width = (max - min) / 10.0;
    for &v in &values {
        let b = if width > 0.0 { (((v - min) / width) as usize).min(9) } else { 0 };
        histogram[b] += 1;
    }
    Some(MinEigStats { min, max, argmin: points[arg].clone(), histogram })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{rat_int, Monomial, QMatPoly, Rat, ScalarPoly};

    fn ball_module(nvars: usize, t: usize) -> ModulePresentation {
        let mut sum = ScalarPoly::zero(nvars);
        for i in 0..nvars {
            sum = sum.add(&ScalarPoly::var(nvars, i).square());
        }
        let body = ScalarPoly::one(nvars).sub(&sum);
        ModulePresentation::new(nvars, t, vec![MatrixPoly::scalar_identity(&body, t)]).unwrap()
    }

    #[test]
    fn membership_examples() {
        let empty = ModulePresentation::unconstrained(2, 1);
        assert!(in_region(&empty, &[5.0, -3.0], 1e-9));

        let interval = ball_module(1, 1);
        assert!(!in_region(&interval, &[2.0], 1e-9));

        let ball2 = ball_module(1, 2);
        assert!(in_region(&ball2, &[0.5], 1e-9));
    }

    #[test]
    fn ball_acceptance_rate_matches_volume() {
        let m = ball_module(2, 1);
        let report =
            sample_region(&m, 2000, &[(-2.0, 2.0), (-2.0, 2.0)], 42).unwrap();
        assert_eq!(report.points.len(), 2000);
        for p in &report.points {
            assert!(in_region(&m, p, 1e-9));
        }
        let expect = std::f64::consts::PI / 16.0;
        let sigma = (expect * (1.0 - expect) / report.draws as f64).sqrt();
        assert!(
            (report.acceptance_rate - expect).abs() <= 3.0 * sigma + 1e-3,
            "rate {} vs {}",
            report.acceptance_rate,
            expect
        );
    }

    #[test]
    fn impossible_generator_yields_no_samples() {
        let neg = MatrixPoly::constant(1, 1, &[rat_int(-1)]);
        let m = ModulePresentation::new(1, 1, vec![neg]).unwrap();
        match sample_region(&m, 10, &[(-1.0, 1.0)], 7) {
            Err(SetopsError::EmptyBoxOrNoSamples { draws }) => assert_eq!(draws, 100_000),
            other => panic!("expected empty report, got {:?}", other),
        }
    }

    #[test]
    fn fixed_seed_reproduces_samples() {
        let m = ball_module(2, 1);
        let a = sample_region(&m, 50, &[(-2.0, 2.0), (-2.0, 2.0)], 9).unwrap();
        let b = sample_region(&m, 50, &[(-2.0, 2.0), (-2.0, 2.0)], 9).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.draws, b.draws);
    }

    #[test]
    fn stats_of_identity_are_constant_one() {
        let f = MatrixPoly::<f64>::identity(1, 3);
        let pts: Vec<Vec<f64>> = (0..25).map(|i| vec![i as f64 / 25.0]).collect();
        let s = min_eig_stats(&f, &pts).unwrap();
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 1.0);
        assert_eq!(s.histogram[0], 25);
    }

    #[test]
    fn diagonal_interval_example_has_large_direction_everywhere() {
        // f = diag(X, 1-X) on [0, 1]: λ_max(f(x)) ≥ 1/2, checked through −f.
        let x = ScalarPoly::<Rat>::var(1, 0);
        let f: QMatPoly = MatrixPoly::from_rows(vec![
            vec![x.clone(), ScalarPoly::zero(1)],
            vec![ScalarPoly::zero(1), ScalarPoly::one(1).sub(&x)],
        ]);
        let neg = f.neg().to_f64_poly();
        let pts: Vec<Vec<f64>> = (0..=100).map(|i| vec![i as f64 / 100.0]).collect();
        let s = min_eig_stats(&neg, &pts).unwrap();
        assert!(s.max <= -0.5 + 1e-12, "max {}", s.max);
        assert!((s.max + 0.5).abs() <= 1e-12);
    }

    #[test]
    fn motzkin_minimum_sits_at_the_corners() {
        let m = |ex: u32, ey: u32, c: i64| {
            ScalarPoly::<Rat>::term(2, Monomial::from_exponents(vec![ex, ey]), rat_int(c))
        };
        let motzkin = m(2, 4, 1).add(&m(4, 2, 1)).add(&m(2, 2, -3)).add(&m(0, 0, 1));
        let f = MatrixPoly::from_scalar(motzkin).to_f64_poly();
        let mut pts = Vec::new();
        for i in 0..=200 {
            for j in 0..=200 {
                pts.push(vec![-2.0 + i as f64 * 0.02, -2.0 + j as f64 * 0.02]);
            }
        }
        let s = min_eig_stats(&f, &pts).unwrap();
        assert!(s.min.abs() <= 1e-12, "min {}", s.min);
        assert!((s.argmin[0].abs() - 1.0).abs() <= 1e-9);
        assert!((s.argmin[1].abs() - 1.0).abs() <= 1e-9);
    }
}
