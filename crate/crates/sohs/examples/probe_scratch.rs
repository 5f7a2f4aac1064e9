//! Scratch probe, not part of the repo surface.

use std::time::Instant;

use num::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sohs::gram::{
    build_membership_sdp, rationalize, ModulePresentation, RationalizeOptions,
};
use sohs::linalg::{sym_eigen, SymMat};
use sohs::poly::{monomials_up_to, MatrixPoly, QMatPoly, Rat, ScalarPoly};
use sohs::sdp::{solve, SdpOutcome, SdpSettings};

fn r(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

fn random_square(rng: &mut ChaCha8Rng, t: usize, deg: u32) -> QMatPoly {
    loop {
        let monos = monomials_up_to(1, deg);
        let mut g = MatrixPoly::zero(1, t);
        for i in 0..t {
            for j in 0..t {
                let mut p = ScalarPoly::zero(1);
                for m in &monos {
                    if rng.gen_bool(0.4) {
                        let c = rng.gen_range(-2..=2i64);
                        if c != 0 {
                            p.add_term(m.clone(), r(c));
                        }
                    }
                }
                *g.entry_mut(i, j) = p;
            }
        }
        if !g.is_zero() {
            return g;
        }
    }
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..50 {
        let t = rng.gen_range(1..=4usize);
        let deg = rng.gen_range(0..=6u32);
        let g = random_square(&mut rng, t, deg);
        let f = g.adjoint().matmul(&g);
        // only look at the interesting (slow or failing) shapes
        if !matches!(case, 1 | 3 | 4 | 6 | 17 | 26 | 30 | 47 | 49) {
            continue;
        }
        let d = f.degree() / 2;
        let module = ModulePresentation::unconstrained(1, t);
        let enc = build_membership_sdp(&module, &f, d, &[]).unwrap();
        let t0 = Instant::now();
        let sol = solve(enc.instance(), &SdpSettings::default());
        let t_solve = t0.elapsed().as_secs_f64();
        let x = match sol.outcome {
            SdpOutcome::Feasible { x, .. } => x,
            other => {
                println!("case {case}: solver said {other:?}");
                continue;
            }
        };
        let cert = enc.certificate_from_solution(&x);
        // eigenvalues of the gram block
        let side = match &cert.parts[0] {
            sohs::gram::GramPart::Scalar { gram, basis, .. } => {
                let n = basis.len() * t;
                let mut m = SymMat::zeros(n);
                for i in 0..n {
                    for j in 0..=i {
                        *m.at_mut(i, j) = 0.5 * (gram[i * n + j] + gram[j * n + i]);
                    }
                }
                let eig = sym_eigen(&m).unwrap();
                let vals: Vec<String> =
                    eig.values.iter().map(|v| format!("{:.1e}", v)).collect();
                println!("case {case} t={t} degf={} side={n} eigs=[{}]", f.degree(), vals.join(" "));
                n
            }
            _ => unreachable!(),
        };
        let t1 = Instant::now();
        let ex = rationalize(&cert, &f, &RationalizeOptions::default());
        let t_rat = t1.elapsed().as_secs_f64();
        match ex {
            Ok(_) => println!(
                "  side={side} solve={t_solve:.2}s rationalize={t_rat:.2}s -> OK"
            ),
            Err(e) => println!(
                "  side={side} solve={t_solve:.2}s rationalize={t_rat:.2}s -> ERR {e}"
            ),
        }
    }
}
