//! Writes the bundled instance files under fixtures/ together with
//! manifest.json, which lists one CLI invocation per instance and the exit
//! code it must produce. Run from anywhere:
//!
//!     cargo run -p sohs --example generate_fixtures
//!
//! The Gram certificate inside trace_det_bundle.json is re-verified exactly
//! before it is written.

use std::fs;
use std::path::PathBuf;

use num::BigInt;
use serde_json::{json, Value};

use sohs::gram::{verify_exact, GramCertificate, GramPart, ModulePresentation};
use sohs::poly::{monomials_up_to, MatrixPoly, Monomial, QMatPoly, QPoly, Rat, ScalarPoly};

fn r(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

fn c(nvars: usize, n: i64) -> QPoly {
    ScalarPoly::constant(nvars, r(n))
}

fn x(nvars: usize, i: usize) -> QPoly {
    ScalarPoly::var(nvars, i)
}

fn write(dir: &PathBuf, name: &str, doc: &Value) {
    let mut text = serde_json::to_string_pretty(doc).unwrap();
    text.push('\n');
    fs::write(dir.join(name), text).unwrap_or_else(|e| panic!("writing {name}: {e}"));
    println!("wrote {name}");
}

fn module(nvars: usize, t: usize, gens: Vec<QMatPoly>) -> Value {
    ModulePresentation::new(nvars, t, gens).unwrap().to_json()
}

fn motzkin() -> QPoly {
    // X^2 Y^4 + X^4 Y^2 - 3 X^2 Y^2 + 1
    let m = |ex, ey, co: i64| {
        ScalarPoly::term(2, Monomial::from_exponents(vec![ex, ey]), r(co))
    };
    m(2, 4, 1).add(&m(4, 2, 1)).add(&m(2, 2, -3)).add(&c(2, 1))
}

/// The two-transformer identity C1^T f C1 + C2^T f C2 = diag(tr f, tr f * det f)
/// for symbolic f = [[a, b], [b, c]], packaged as a rank-two Gram block over
/// the matrix generator f.
fn trace_det_bundle() -> Value {
    let (a, b, cc) = (x(3, 0), x(3, 1), x(3, 2));
    let zero = ScalarPoly::<Rat>::zero(3);
    let one = ScalarPoly::<Rat>::one(3);
    let f = MatrixPoly::from_rows(vec![
        vec![a.clone(), b.clone()],
        vec![b.clone(), cc.clone()],
    ]);
    let c1 = MatrixPoly::from_rows(vec![
        vec![one.clone(), b.neg()],
        vec![zero.clone(), a.clone()],
    ]);
    let c2 = MatrixPoly::from_rows(vec![
        vec![zero, cc.neg()],
        vec![one, b.clone()],
    ]);

    let trace = a.add(&cc);
    let det = a.mul(&cc).sub(&b.square());
    let z3 = ScalarPoly::<Rat>::zero(3);
    let target = MatrixPoly::from_rows(vec![
        vec![trace.clone(), z3.clone()],
        vec![z3, trace.mul(&det)],
    ]);

    let t = 2usize;
    let basis = monomials_up_to(3, 1);
    let bl = basis.len();
    let side = bl * t * t;
    let vecof = |p: &QMatPoly| -> Vec<Rat> {
        let mut w = vec![r(0); side];
        for (ai, m) in basis.iter().enumerate() {
            for u in 0..t {
                for k in 0..t {
                    w[(ai * t + u) * t + k] = p.entry(u, k).coeff(m);
                }
            }
        }
        w
    };
    let mut gram = vec![r(0); side * side];
    for w in [vecof(&c1), vecof(&c2)] {
        for i in 0..side {
            for j in 0..side {
                gram[i * side + j] = gram[i * side + j].clone() + w[i].clone() * w[j].clone();
            }
        }
    }
    let cert = GramCertificate {
        nvars: 3,
        t,
        degree: 1,
        parts: vec![GramPart::Matrix { g: f, basis, gram }],
        free: vec![],
    };
    verify_exact(&cert, &target).expect("bundled certificate must verify");
    json!({
        "format": "sohs.bundle",
        "version": 1,
        "target": target.to_json(),
        "certificate": cert.to_json(),
    })
}

fn main() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    fs::create_dir_all(&dir).unwrap();

    // scalar instances in two variables
    write(&dir, "motzkin.json", &MatrixPoly::from_scalar(motzkin()).to_json());
    write(
        &dir,
        "motzkin_plus_quarter.json",
        &MatrixPoly::from_scalar(motzkin().add(&ScalarPoly::constant(2, Rat::new(1.into(), 4.into()))))
            .to_json(),
    );
    let disk = c(2, 1).sub(&x(2, 0).square()).sub(&x(2, 1).square());
    write(&dir, "disk.json", &module(2, 1, vec![MatrixPoly::from_scalar(disk.clone())]));

    // univariate interval instances
    let ival = c(1, 1).sub(&x(1, 0).square());
    write(&dir, "interval.json", &module(1, 1, vec![MatrixPoly::from_scalar(ival.clone())]));
    write(&dir, "interval_i2.json", &module(1, 2, vec![MatrixPoly::scalar_identity(&ival, 2)]));
    write(&dir, "x_plus_two.json", &MatrixPoly::from_scalar(x(1, 0).add(&c(1, 2))).to_json());
    write(&dir, "neg_x.json", &MatrixPoly::from_scalar(x(1, 0).neg()).to_json());
    write(
        &dir,
        "neg_x_point.json",
        &json!({ "format": "sohs.point", "version": 1, "x": [1.0], "v": [1.0] }),
    );
    write(
        &dir,
        "four_interval.json",
        &module(1, 1, vec![MatrixPoly::from_scalar(c(1, 4).sub(&x(1, 0).square()))]),
    );
    write(&dir, "empty_module.json", &module(1, 1, vec![]));
    write(
        &dir,
        "impossible.json",
        &module(1, 1, vec![MatrixPoly::from_scalar(c(1, -1).sub(&x(1, 0).square()))]),
    );
    write(
        &dir,
        "scalar_pair.json",
        &module(
            1,
            1,
            vec![
                MatrixPoly::from_scalar(x(1, 0)),
                MatrixPoly::from_scalar(c(1, 1).sub(&x(1, 0))),
            ],
        ),
    );

    // diagonal target whose positive direction flips at x = 1/2
    let z1 = ScalarPoly::<Rat>::zero(1);
    write(
        &dir,
        "minus_diag.json",
        &MatrixPoly::from_rows(vec![
            vec![x(1, 0).neg(), z1.clone()],
            vec![z1.clone(), x(1, 0).sub(&c(1, 1))],
        ])
        .to_json(),
    );

    // rearrangement target with one negative diagonal entry
    write(
        &dir,
        "nnsd_diag.json",
        &MatrixPoly::from_rows(vec![
            vec![x(1, 0).add(&c(1, 2)), z1.clone()],
            vec![z1.clone(), c(1, -1)],
        ])
        .to_json(),
    );

    // three-by-three diagonal obstruction and the ball that removes it
    let z2 = ScalarPoly::<Rat>::zero(2);
    write(
        &dir,
        "counterexample.json",
        &MatrixPoly::from_rows(vec![
            vec![x(2, 0), z2.clone(), z2.clone()],
            vec![z2.clone(), x(2, 1), z2.clone()],
            vec![z2.clone(), z2.clone(), x(2, 0).mul(&x(2, 1)).add(&c(2, 1))],
        ])
        .to_json(),
    );
    write(
        &dir,
        "ball_i3.json",
        &module(2, 3, vec![MatrixPoly::scalar_identity(&disk, 3)]),
    );

    // matrices with complex and with mixed-sign spectra
    write(
        &dir,
        "rotation.json",
        &MatrixPoly::from_rows(vec![
            vec![z1.clone(), c(1, -1)],
            vec![c(1, 1), z1.clone()],
        ])
        .to_json(),
    );
    write(
        &dir,
        "indefinite.json",
        &MatrixPoly::from_rows(vec![
            vec![c(1, 1), x(1, 0)],
            vec![z1.clone(), c(1, -1)],
        ])
        .to_json(),
    );

    // univariate factorization instances
    write(
        &dir,
        "univar_textbook.json",
        &MatrixPoly::from_rows(vec![
            vec![x(1, 0).square().add(&c(1, 1)), x(1, 0)],
            vec![x(1, 0), c(1, 1)],
        ])
        .to_json(),
    );
    write(
        &dir,
        "univar_odd.json",
        &MatrixPoly::from_rows(vec![
            vec![x(1, 0), z1.clone()],
            vec![z1.clone(), c(1, 1)],
        ])
        .to_json(),
    );

    // diagonalization instances
    write(
        &dir,
        "symbolic_2x2.json",
        &MatrixPoly::from_rows(vec![
            vec![x(3, 0), x(3, 1)],
            vec![x(3, 1), x(3, 2)],
        ])
        .to_json(),
    );
    write(
        &dir,
        "zero_diag.json",
        &MatrixPoly::from_rows(vec![
            vec![z1.clone(), c(1, 1)],
            vec![c(1, 1), z1],
        ])
        .to_json(),
    );

    write(&dir, "trace_det_bundle.json", &trace_det_bundle());

    let manifest = json!({
        "format": "sohs.fixtures",
        "version": 1,
        "cases": [
            { "name": "trace-det-exact-verify",
              "args": ["verify", "trace_det_bundle.json", "--exact"],
              "exit": 0,
              "note": "two-transformer congruence identity onto diag(tr f, tr f * det f), checked in exact arithmetic" },
            { "name": "x-plus-two-interval",
              "args": ["check-membership", "x_plus_two.json", "-g", "interval.json", "--dmax", "1"],
              "exit": 0,
              "note": "X+2 = ((X+1)^2 + 2)/2 + (1-X^2)/2" },
            { "name": "motzkin-plus-quarter-disk",
              "args": ["check-membership", "motzkin_plus_quarter.json", "-g", "disk.json", "--dmax", "4"],
              "exit": 0,
              "note": "the Motzkin polynomial stays above -1/4 on the unit disk" },
            { "name": "motzkin-unconstrained",
              "args": ["check-membership", "motzkin.json", "--dmax", "3"],
              "exit": 1,
              "note": "nonnegative on the plane but not a sum of squares; the dual ray separates" },
            { "name": "neg-x-separation",
              "args": ["check-membership", "neg_x.json", "-g", "interval.json"],
              "exit": 1,
              "note": "-X is negative on (0, 1]; the extracted point lands on the boundary" },
            { "name": "verify-point-neg-x",
              "args": ["verify-point", "neg_x.json", "neg_x_point.json", "-g", "interval.json", "--tol", "1e-6"],
              "exit": 0,
              "note": "x = 1, v = 1 gives <f(x)v, v> = -1 inside the interval" },
            { "name": "nnsd-diag",
              "args": ["nnsd", "nnsd_diag.json", "-g", "interval_i2.json"],
              "exit": 0,
              "note": "diag(X+2, -1) has the positive direction e1 everywhere on [-1, 1]" },
            { "name": "nnsd-counterexample-empty",
              "args": ["nnsd", "counterexample.json", "--dmax", "3"],
              "exit": 2,
              "note": "diag(X1, X2, X1 X2 + 1) admits no rearrangement over an empty generator set" },
            { "name": "nnsd-counterexample-ball",
              "args": ["nnsd", "counterexample.json", "-g", "ball_i3.json", "--dmax", "4"],
              "exit": 0,
              "note": "adding the ball makes the module archimedean and the rearrangement appears" },
            { "name": "arch-ball",
              "args": ["arch-witness", "-g", "ball_i3.json"],
              "exit": 0,
              "note": "1 - X1^2 - X2^2 itself witnesses N = 1" },
            { "name": "arch-four-interval",
              "args": ["arch-witness", "-g", "four_interval.json"],
              "exit": 0,
              "note": "4 - X^2 itself witnesses N = 4 and nothing smaller works on [-2, 2]" },
            { "name": "arch-empty",
              "args": ["arch-witness", "-g", "empty_module.json", "--nmax", "16"],
              "exit": 2,
              "note": "no bound exists over an empty generator set" },
            { "name": "rotation-real-eig",
              "args": ["real-eig-cert", "rotation.json", "-g", "interval.json"],
              "exit": 0,
              "note": "the rotation matrix has no real eigenvalues, so the claim holds vacuously" },
            { "name": "indefinite-real-eig",
              "args": ["real-eig-cert", "indefinite.json", "-g", "interval.json", "--dmax", "3"],
              "exit": 1,
              "note": "eigenvalues 1 and -1 everywhere; no certificate exists at any degree" },
            { "name": "univar-textbook",
              "args": ["factor-univariate", "univar_textbook.json"],
              "exit": 0,
              "note": "[[Z^2+1, Z], [Z, 1]] = g^T g for g = [[Z, 1], [1, 0]]" },
            { "name": "univar-odd",
              "args": ["factor-univariate", "univar_odd.json"],
              "exit": 1,
              "note": "odd leading behavior forces a negative eigenvalue far out on the line" },
            { "name": "diagonalize-symbolic",
              "args": ["diagonalize", "symbolic_2x2.json"],
              "exit": 0,
              "note": "both diagonal entries can serve as the pivot, giving diag(a, a det f) and diag(c, c det f)" },
            { "name": "diagonalize-repair",
              "args": ["diagonalize", "zero_diag.json"],
              "exit": 0,
              "note": "zero diagonal is repaired by adding row 2 to row 1 before pivoting" },
            { "name": "sample-disk",
              "args": ["sample", "disk.json", "--count", "200", "--seed", "1", "--bounds", "-2:2"],
              "exit": 0,
              "note": "acceptance rate approximates pi/16, the disk volume fraction of the box" },
            { "name": "sample-impossible",
              "args": ["sample", "impossible.json", "--count", "10", "--seed", "1"],
              "exit": 2,
              "note": "-1 - X^2 is nowhere positive semidefinite, so nothing is ever accepted" },
            { "name": "sample-eval-interval",
              "args": ["sample", "scalar_pair.json", "--count", "100", "--seed", "3", "--bounds", "0:1", "--eval", "minus_diag.json"],
              "exit": 0,
              "note": "on [0, 1] the larger eigenvalue of diag(X, 1-X) stays at least 1/2" },
            { "name": "product-pair",
              "args": ["product-module", "scalar_pair.json"],
              "exit": 0,
              "note": "two generators expand to the three products g1, g2, g1 g2" }
        ]
    });
    write(&dir, "manifest.json", &manifest);
}
