//! Command-line driver: search commands, verification commands, and the
//! sampling/expansion utilities, all speaking the JSON file formats of the
//! library.
//!
//! Exit codes are a stable contract: 0 certificate found / verified,
//! 1 separated / refuted, 2 exhausted / unknown, 3 usage or input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::exit;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use sohs::certify::{
    archimedean_witness, find_membership, find_nnsd_certificate, product_module,
    real_eigenvalue_certificate, MembershipCertificate, NnsdVerdict, RealEigVerdict,
    SearchOptions, Separation, Verdict,
};
use sohs::diag::{diagonalize_branching, DiagError};
use sohs::gram::{
    verify_exact, verify_numeric, FreePart, GramCertificate, GramPart, ModulePresentation,
    NumericReport,
};
use sohs::json::rat_to_json;
use sohs::poly::{scalar_to_json, Coeff, MatrixPoly, Monomial, QMatPoly, QPoly, Rat, ScalarPoly};
use sohs::setops::{min_eig_stats, sample_region, SetopsError};
use sohs::states::{verify_point, PointEvaluation};
use sohs::univar::{jakubovic_factor, UnivarError};

#[derive(Parser)]
#[command(name = "sohs", version, about = "Positivity certificates for symmetric matrix polynomials")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Largest truncation degree of the search schedule
    #[arg(long, global = true)]
    dmax: Option<u32>,

    /// Numeric tolerance for the solver and for floating-point verification
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Seed for the sampling commands
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Insist on exact rational arithmetic
    #[arg(long, global = true, conflicts_with = "numeric")]
    exact: bool,

    /// Stay in floating point, skipping rationalization
    #[arg(long, global = true)]
    numeric: bool,

    /// Bound on the number of diagonalization branches
    #[arg(long = "branch-cap", global = true)]
    branch_cap: Option<usize>,

    /// Largest bound N tried by the boundedness-witness search
    #[arg(long, global = true)]
    nmax: Option<u64>,

    /// Number of region points to sample
    #[arg(long, global = true)]
    count: Option<usize>,

    /// Sampling box: lo:hi for every coordinate, or lo:hi,lo:hi,... per coordinate
    #[arg(long, global = true, allow_hyphen_values = true)]
    bounds: Option<String>,

    /// Also write the outcome as a JSON document to this path
    #[arg(long, global = true)]
    json: Option<PathBuf>,

    /// key=value file supplying defaults for the flags above
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Search for a quadratic-module membership certificate for a target
    CheckMembership {
        /// Target matrix polynomial (JSON)
        target: PathBuf,
        /// Module presentation; omitted means no constraints
        #[arg(short = 'g', long = "generators")]
        module: Option<PathBuf>,
    },
    /// Search for transformers p_i with sum p_i^T f p_i in 1 + module
    Nnsd {
        target: PathBuf,
        #[arg(short = 'g', long = "generators")]
        module: Option<PathBuf>,
    },
    /// Factor a univariate matrix polynomial as g^T g, or refute it on the line
    FactorUnivariate { target: PathBuf },
    /// Branching symmetric diagonalization C^T F C = D
    Diagonalize { target: PathBuf },
    /// Search for a bound N with N - sum X_i^2 in the module
    ArchWitness {
        #[arg(short = 'g', long = "generators")]
        module: PathBuf,
    },
    /// Certify that the real eigenvalues of the target are positive on the region
    RealEigCert {
        target: PathBuf,
        /// Scalar constraints as a size-1 module presentation
        #[arg(short = 'g', long = "generators")]
        module: Option<PathBuf>,
    },
    /// Re-check a {target, certificate} bundle
    Verify { bundle: PathBuf },
    /// Evaluate a separating pair (x, v) against a target and region
    VerifyPoint {
        target: PathBuf,
        point: PathBuf,
        #[arg(short = 'g', long = "generators")]
        module: Option<PathBuf>,
    },
    /// Rejection-sample points from the region of a module presentation
    Sample {
        module: PathBuf,
        /// Also report min-eigenvalue statistics of this polynomial over the sample
        #[arg(long)]
        eval: Option<PathBuf>,
    },
    /// Expand scalar generators into their 2^m - 1 products
    ProductModule { module: PathBuf },
}

#[derive(Clone, Default)]
struct Knobs {
    dmax: Option<u32>,
    tol: Option<f64>,
    seed: Option<u64>,
    exact: Option<bool>,
    branch_cap: Option<usize>,
    nmax: Option<u64>,
    count: Option<usize>,
    bounds: Option<String>,
    json: Option<PathBuf>,
}

fn parse_config(path: &Path) -> Result<Knobs, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut k = Knobs::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, val) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key=value", path.display(), i + 1))?;
        let key = key.trim().replace('-', "_");
        let val = val.trim();
        let bad = |what: &str| format!("{}:{}: bad {what} value {val:?}", path.display(), i + 1);
        match key.as_str() {
            "dmax" => k.dmax = Some(val.parse().map_err(|_| bad("dmax"))?),
            "tol" => k.tol = Some(val.parse().map_err(|_| bad("tol"))?),
            "seed" => k.seed = Some(val.parse().map_err(|_| bad("seed"))?),
            "exact" => k.exact = Some(val.parse().map_err(|_| bad("exact"))?),
            "numeric" => {
                let b: bool = val.parse().map_err(|_| bad("numeric"))?;
                k.exact = Some(!b);
            }
            "branch_cap" => k.branch_cap = Some(val.parse().map_err(|_| bad("branch_cap"))?),
            "nmax" => k.nmax = Some(val.parse().map_err(|_| bad("nmax"))?),
            "count" => k.count = Some(val.parse().map_err(|_| bad("count"))?),
            "bounds" => k.bounds = Some(val.to_string()),
            "json" => k.json = Some(PathBuf::from(val)),
            _ => return Err(format!("{}:{}: unknown key {key:?}", path.display(), i + 1)),
        }
    }
    Ok(k)
}

fn resolve(cli: &Cli) -> Result<Knobs, String> {
    let mut k = match &cli.config {
        Some(p) => parse_config(p)?,
        None => Knobs::default(),
    };
    if let Some(v) = cli.dmax {
        k.dmax = Some(v);
    }
    if let Some(v) = cli.tol {
        k.tol = Some(v);
    }
    if let Some(v) = cli.seed {
        k.seed = Some(v);
    }
    if cli.exact {
        k.exact = Some(true);
    }
    if cli.numeric {
        k.exact = Some(false);
    }
    if let Some(v) = cli.branch_cap {
        k.branch_cap = Some(v);
    }
    if let Some(v) = cli.nmax {
        k.nmax = Some(v);
    }
    if let Some(v) = cli.count {
        k.count = Some(v);
    }
    if let Some(v) = &cli.bounds {
        k.bounds = Some(v.clone());
    }
    if let Some(v) = &cli.json {
        k.json = Some(v.clone());
    }
    Ok(k)
}

fn read_value(path: &Path) -> Result<Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_poly(path: &Path) -> Result<QMatPoly, String> {
    MatrixPoly::from_json(&read_value(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_module(path: &Path) -> Result<ModulePresentation, String> {
    ModulePresentation::from_json(&read_value(path)?)
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn module_or_empty(
    path: Option<&PathBuf>,
    nvars: usize,
    t: usize,
) -> Result<ModulePresentation, String> {
    match path {
        Some(p) => {
            let m = load_module(p)?;
            if m.nvars() != nvars || m.size() != t {
                return Err(format!(
                    "{}: module has {} variables and size {}, expected {} and {}",
                    p.display(),
                    m.nvars(),
                    m.size(),
                    nvars,
                    t
                ));
            }
            Ok(m)
        }
        None => Ok(ModulePresentation::unconstrained(nvars, t)),
    }
}

fn emit(k: &Knobs, doc: &Value) -> Result<(), String> {
    if let Some(path) = &k.json {
        let mut text =
            serde_json::to_string_pretty(doc).map_err(|e| format!("serializing output: {e}"))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(())
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

fn result_doc(command: &str, outcome: &str) -> Value {
    json!({
        "format": "sohs.result",
        "version": 1,
        "command": command,
        "outcome": outcome,
    })
}

fn insert(doc: &mut Value, key: &str, v: Value) {
    doc.as_object_mut().unwrap().insert(key.to_string(), v);
}

fn report_json(r: &NumericReport) -> Value {
    json!({
        "residual": num(r.residual),
        "residual_scale": num(r.residual_scale),
        "min_gram_eig": num(r.min_gram_eig),
    })
}

fn cert_json(c: &MembershipCertificate) -> Value {
    match &c.exact {
        Some(e) => e.to_json(),
        None => c.numeric.to_json(),
    }
}

fn separation_json(s: &Separation) -> Value {
    json!({
        "degree": s.degree,
        "ray": s.ray,
        "state": s.state.to_json(),
        "point": s.point.as_ref().map(PointEvaluation::to_json).unwrap_or(Value::Null),
    })
}

fn cert_to_f64(c: &GramCertificate<Rat>) -> GramCertificate<f64> {
    GramCertificate {
        nvars: c.nvars,
        t: c.t,
        degree: c.degree,
        parts: c
            .parts
            .iter()
            .map(|p| match p {
                GramPart::Scalar { sigma, basis, gram } => GramPart::Scalar {
                    sigma: sigma.clone(),
                    basis: basis.clone(),
                    gram: gram.iter().map(Coeff::to_f64).collect(),
                },
                GramPart::Matrix { g, basis, gram } => GramPart::Matrix {
                    g: g.clone(),
                    basis: basis.clone(),
                    gram: gram.iter().map(Coeff::to_f64).collect(),
                },
            })
            .collect(),
        free: c
            .free
            .iter()
            .map(|fp| FreePart { q: fp.q.clone(), h: fp.h.map_coeff(|c| c.to_f64()) })
            .collect(),
    }
}

fn search_opts(k: &Knobs) -> SearchOptions {
    let mut o = SearchOptions::default();
    o.d_max = k.dmax;
    if let Some(t) = k.tol {
        o.sdp.feas_tol = t;
        o.verify_tol = 10.0 * t;
    }
    if k.exact == Some(false) {
        o.rationalize = false;
    }
    o
}

fn print_point(p: &PointEvaluation) {
    println!("point x = {:?}", p.x);
    println!("direction v = {:?}", p.v);
}

fn cmd_check_membership(
    target: &Path,
    module: Option<&PathBuf>,
    k: &Knobs,
) -> Result<i32, String> {
    let f = load_poly(target)?;
    let m = module_or_empty(module, f.nvars(), f.size())?;
    let out = find_membership(&f, &m, &search_opts(k)).map_err(|e| e.to_string())?;
    for w in &out.warnings {
        println!("warning: {w}");
    }
    let (mut doc, code) = match &out.verdict {
        Verdict::CertificateFound(c) => {
            println!("outcome: certificate found at degree {}", c.degree);
            println!(
                "residual {:.3e} of scale {:.3e}, smallest gram eigenvalue {:.3e}",
                c.numeric_report.residual,
                c.numeric_report.residual_scale,
                c.numeric_report.min_gram_eig
            );
            println!("exact rational form: {}", if c.exact.is_some() { "yes" } else { "no" });
            let mut doc = result_doc("check-membership", "certificate-found");
            insert(&mut doc, "degree", json!(c.degree));
            insert(&mut doc, "exact", json!(c.exact.is_some()));
            insert(&mut doc, "report", report_json(&c.numeric_report));
            insert(&mut doc, "certificate", cert_json(c));
            (doc, 0)
        }
        Verdict::Separated(s) => {
            println!("outcome: separated at degree {}", s.degree);
            match &s.point {
                Some(p) => print_point(p),
                None => println!("the separating state did not collapse to a point"),
            }
            let mut doc = result_doc("check-membership", "separated");
            insert(&mut doc, "separation", separation_json(s));
            (doc, 1)
        }
        Verdict::ExhaustedDegrees => {
            println!("outcome: degree schedule exhausted without certificate or separation");
            (result_doc("check-membership", "exhausted-degrees"), 2)
        }
    };
    insert(&mut doc, "degree_reached", json!(out.degree_reached));
    insert(&mut doc, "notes", json!(out.notes));
    insert(&mut doc, "warnings", json!(out.warnings));
    println!("elapsed: {:.2?}", out.elapsed);
    emit(k, &doc)?;
    Ok(code)
}

fn cmd_nnsd(target: &Path, module: Option<&PathBuf>, k: &Knobs) -> Result<i32, String> {
    let f = load_poly(target)?;
    let m = module_or_empty(module, f.nvars(), f.size())?;
    let out = find_nnsd_certificate(&f, &m, &search_opts(k)).map_err(|e| e.to_string())?;
    for w in &out.warnings {
        println!("warning: {w}");
    }
    let (mut doc, code) = match &out.verdict {
        NnsdVerdict::Found(c) => {
            println!(
                "outcome: rearrangement found at degree {} with {} transformers",
                c.degree,
                c.transformers.len()
            );
            println!("exact remainder verified");
            let mut doc = result_doc("nnsd", "certificate-found");
            insert(&mut doc, "degree", json!(c.degree));
            insert(&mut doc, "weights", Value::Array(c.weights.iter().map(rat_to_json).collect()));
            insert(
                &mut doc,
                "transformers",
                Value::Array(c.transformers.iter().map(|p| p.to_json()).collect()),
            );
            insert(&mut doc, "rearranged_target", c.rearranged_target.to_json());
            insert(&mut doc, "remainder", c.remainder.to_json());
            (doc, 0)
        }
        NnsdVerdict::ExhaustedDegrees => {
            println!("outcome: degree schedule exhausted without a rearrangement");
            (result_doc("nnsd", "exhausted-degrees"), 2)
        }
    };
    insert(&mut doc, "degree_reached", json!(out.degree_reached));
    insert(&mut doc, "notes", json!(out.notes));
    insert(&mut doc, "warnings", json!(out.warnings));
    println!("elapsed: {:.2?}", out.elapsed);
    emit(k, &doc)?;
    Ok(code)
}

fn univar_dense(p: &ScalarPoly<f64>) -> Value {
    let coeffs: Vec<Value> =
        (0..=p.degree()).map(|i| num(p.coeff(&Monomial::from_exponents(vec![i])))).collect();
    Value::Array(coeffs)
}

fn cmd_factor_univariate(target: &Path, k: &Knobs) -> Result<i32, String> {
    let f = load_poly(target)?;
    let tol = k.tol.unwrap_or(1e-8);
    match jakubovic_factor(&f, tol) {
        Ok(fac) => {
            println!(
                "outcome: factored through {} rows, residual {:.3e} of scale {:.3e}",
                fac.g.rows(),
                fac.residual,
                fac.scale
            );
            println!("exact rational form: {}", if fac.exact.is_some() { "yes" } else { "no" });
            let mut doc = result_doc("factor-univariate", "factored");
            let rows: Vec<Value> = (0..fac.g.rows())
                .map(|i| {
                    Value::Array((0..fac.g.cols()).map(|j| univar_dense(fac.g.entry(i, j))).collect())
                })
                .collect();
            insert(
                &mut doc,
                "g",
                json!({ "rows": fac.g.rows(), "cols": fac.g.cols(), "entries": rows }),
            );
            insert(&mut doc, "residual", num(fac.residual));
            insert(&mut doc, "scale", num(fac.scale));
            if let Some(e) = &fac.exact {
                let rows: Vec<Value> = e
                    .rows
                    .iter()
                    .map(|r| Value::Array(r.iter().map(scalar_to_json).collect()))
                    .collect();
                insert(
                    &mut doc,
                    "exact",
                    json!({
                        "weights": e.weights.iter().map(rat_to_json).collect::<Vec<_>>(),
                        "rows": rows,
                    }),
                );
            }
            emit(k, &doc)?;
            Ok(0)
        }
        Err(UnivarError::NotPsdOnLine { z, min_eig }) => {
            println!(
                "outcome: not positive semidefinite on the line, eigenvalue {min_eig:.3e} at z = {z}"
            );
            let mut doc = result_doc("factor-univariate", "not-psd-on-line");
            insert(&mut doc, "z", num(z));
            insert(&mut doc, "min_eig", num(min_eig));
            emit(k, &doc)?;
            Ok(1)
        }
        Err(e @ (UnivarError::NotUnivariate { .. } | UnivarError::NotSymmetric)) => {
            Err(e.to_string())
        }
        Err(e) => {
            println!("outcome: factorization failed: {e}");
            let mut doc = result_doc("factor-univariate", "unknown");
            insert(&mut doc, "reason", json!(e.to_string()));
            emit(k, &doc)?;
            Ok(2)
        }
    }
}

fn cmd_diagonalize(target: &Path, k: &Knobs) -> Result<i32, String> {
    let f = load_poly(target)?;
    let cap = k.branch_cap.unwrap_or(64);
    let branch_json = |branches: &[sohs::diag::DiagBranch]| -> Value {
        Value::Array(
            branches
                .iter()
                .map(|b| {
                    json!({ "label": b.label, "c": b.c.to_json(), "d": b.d.to_json() })
                })
                .collect(),
        )
    };
    let print_branches = |branches: &[sohs::diag::DiagBranch]| {
        for b in branches {
            let diag: Vec<String> =
                (0..b.d.size()).map(|i| b.d.entry(i, i).to_string()).collect();
            println!("branch {}: diag({})", b.label, diag.join(", "));
        }
    };
    match diagonalize_branching(&f, cap) {
        Ok(branches) => {
            println!("outcome: {} branches", branches.len());
            print_branches(&branches);
            let mut doc = result_doc("diagonalize", "diagonalized");
            insert(&mut doc, "branches", branch_json(&branches));
            emit(k, &doc)?;
            Ok(0)
        }
        Err(DiagError::BranchCapExceeded { cap, partial }) => {
            println!("outcome: branch cap {cap} exceeded, {} branches kept", partial.len());
            print_branches(&partial);
            let mut doc = result_doc("diagonalize", "branch-cap-exceeded");
            insert(&mut doc, "cap", json!(cap));
            insert(&mut doc, "branches", branch_json(&partial));
            emit(k, &doc)?;
            Ok(2)
        }
        Err(e) => Err(e.to_string()),
    }
}

fn cmd_arch_witness(module: &Path, k: &Knobs) -> Result<i32, String> {
    let m = load_module(module)?;
    let nmax = k.nmax.unwrap_or(4096);
    let out = archimedean_witness(&m, nmax, &search_opts(k)).map_err(|e| e.to_string())?;
    let (mut doc, code) = match &out.witness {
        Some(w) => {
            println!("outcome: witness N = {} at degree {}", w.n, w.degree);
            println!(
                "exact rational form: {}",
                if w.certificate.exact.is_some() { "yes" } else { "no" }
            );
            let mut doc = result_doc("arch-witness", "witness-found");
            insert(&mut doc, "n", rat_to_json(&w.n));
            insert(&mut doc, "degree", json!(w.degree));
            insert(&mut doc, "exact", json!(w.certificate.exact.is_some()));
            insert(&mut doc, "certificate", cert_json(&w.certificate));
            (doc, 0)
        }
        None => {
            println!("outcome: no witness found up to N = {nmax}");
            (result_doc("arch-witness", "not-found"), 2)
        }
    };
    insert(&mut doc, "notes", json!(out.notes));
    println!("elapsed: {:.2?}", out.elapsed);
    emit(k, &doc)?;
    Ok(code)
}

fn cmd_real_eig_cert(target: &Path, module: Option<&PathBuf>, k: &Knobs) -> Result<i32, String> {
    let f = load_poly(target)?;
    let m = module_or_empty(module, f.nvars(), 1)?;
    let gens: Vec<QPoly> = m.generators().iter().map(|g| g.entry(0, 0).clone()).collect();
    let out = real_eigenvalue_certificate(&f, &gens, &search_opts(k)).map_err(|e| e.to_string())?;
    for w in &out.warnings {
        println!("warning: {w}");
    }
    let (mut doc, code) = match &out.verdict {
        RealEigVerdict::Found(c) => {
            println!("outcome: certificate found at degree {}", c.degree);
            println!("matrix identity re-verified exactly");
            let mut doc = result_doc("real-eig-cert", "certificate-found");
            insert(
                &mut doc,
                "char_poly",
                json!({ "n": c.char_poly.q.nvars(), "terms": scalar_to_json(&c.char_poly.q) }),
            );
            insert(&mut doc, "degree", json!(c.degree));
            insert(&mut doc, "certificate", c.scalar.to_json());
            insert(&mut doc, "substituted", c.substituted.to_json());
            (doc, 0)
        }
        RealEigVerdict::Separated(s) => {
            println!("outcome: separated at degree {}", s.degree);
            match &s.point {
                Some(p) => print_point(p),
                None => println!("the separating state did not collapse to a point"),
            }
            let mut doc = result_doc("real-eig-cert", "separated");
            insert(&mut doc, "separation", separation_json(s));
            (doc, 1)
        }
        RealEigVerdict::ExhaustedDegrees => {
            println!("outcome: degree schedule exhausted without certificate or separation");
            (result_doc("real-eig-cert", "exhausted-degrees"), 2)
        }
    };
    insert(&mut doc, "degree_reached", json!(out.degree_reached));
    insert(&mut doc, "notes", json!(out.notes));
    insert(&mut doc, "warnings", json!(out.warnings));
    println!("elapsed: {:.2?}", out.elapsed);
    emit(k, &doc)?;
    Ok(code)
}

fn cmd_verify(bundle: &Path, k: &Knobs) -> Result<i32, String> {
    let v = read_value(bundle)?;
    match v.get("format").and_then(Value::as_str) {
        Some("sohs.bundle") => {}
        Some(f) => return Err(format!("{}: expected a sohs.bundle, found {f:?}", bundle.display())),
        None => return Err(format!("{}: missing format field", bundle.display())),
    }
    if v.get("version").and_then(Value::as_u64) != Some(1) {
        return Err(format!("{}: unsupported version", bundle.display()));
    }
    let target = MatrixPoly::from_json(
        v.get("target").ok_or_else(|| format!("{}: missing target", bundle.display()))?,
    )
    .map_err(|e| format!("{}: {e}", bundle.display()))?;
    let cert_v = v
        .get("certificate")
        .ok_or_else(|| format!("{}: missing certificate", bundle.display()))?;
    let arithmetic = cert_v.get("arithmetic").and_then(Value::as_str).unwrap_or("");
    let want_exact = k.exact.unwrap_or(arithmetic == "rational");
    let tol = k.tol.unwrap_or(1e-8);

    let (mut doc, code) = if want_exact {
        if arithmetic != "rational" {
            return Err("exact verification needs a rational certificate".into());
        }
        let cert = GramCertificate::<Rat>::from_json(cert_v)
            .map_err(|e| format!("{}: {e}", bundle.display()))?;
        match verify_exact(&cert, &target) {
            Ok(()) => {
                println!("outcome: verified exactly, residual 0");
                let mut doc = result_doc("verify", "verified");
                insert(&mut doc, "mode", json!("exact"));
                (doc, 0)
            }
            Err(e) => {
                println!("outcome: refuted: {e}");
                let mut doc = result_doc("verify", "refuted");
                insert(&mut doc, "mode", json!("exact"));
                insert(&mut doc, "reason", json!(e.to_string()));
                (doc, 1)
            }
        }
    } else {
        let cert = if arithmetic == "rational" {
            cert_to_f64(
                &GramCertificate::<Rat>::from_json(cert_v)
                    .map_err(|e| format!("{}: {e}", bundle.display()))?,
            )
        } else {
            GramCertificate::<f64>::from_json(cert_v)
                .map_err(|e| format!("{}: {e}", bundle.display()))?
        };
        match verify_numeric(&cert, &target, tol) {
            Ok(r) => {
                println!(
                    "outcome: verified numerically, residual {:.3e} of scale {:.3e}",
                    r.residual, r.residual_scale
                );
                let mut doc = result_doc("verify", "verified");
                insert(&mut doc, "mode", json!("numeric"));
                insert(&mut doc, "report", report_json(&r));
                (doc, 0)
            }
            Err(e) => {
                println!("outcome: refuted: {e}");
                let mut doc = result_doc("verify", "refuted");
                insert(&mut doc, "mode", json!("numeric"));
                insert(&mut doc, "reason", json!(e.to_string()));
                (doc, 1)
            }
        }
    };
    insert(&mut doc, "arithmetic", json!(arithmetic));
    emit(k, &doc)?;
    Ok(code)
}

fn cmd_verify_point(
    target: &Path,
    point: &Path,
    module: Option<&PathBuf>,
    k: &Knobs,
) -> Result<i32, String> {
    let f = load_poly(target)?;
    let p = PointEvaluation::from_json(&read_value(point)?)
        .map_err(|e| format!("{}: {e}", point.display()))?;
    let m = module_or_empty(module, f.nvars(), f.size())?;
    let rep = verify_point(&f, &m, &p.x, &p.v).map_err(|e| e.to_string())?;
    let tol = k.tol.unwrap_or(1e-8);
    let ok = rep.passes(tol);
    println!("quadratic form <f(x)v, v> = {:.6e}", rep.objective);
    println!("smallest generator eigenvalue at x = {:.6e}", rep.min_generator_eig);
    println!("outcome: {}", if ok { "separation verified" } else { "pair does not separate" });
    let mut doc = result_doc("verify-point", if ok { "verified" } else { "refuted" });
    insert(&mut doc, "objective", num(rep.objective));
    insert(&mut doc, "min_generator_eig", num(rep.min_generator_eig));
    insert(&mut doc, "tol", num(tol));
    emit(k, &doc)?;
    Ok(if ok { 0 } else { 1 })
}

fn parse_bounds(spec: &str, n: usize) -> Result<Vec<(f64, f64)>, String> {
    let parse_one = |s: &str| -> Result<(f64, f64), String> {
        let (lo, hi) =
            s.split_once(':').ok_or_else(|| format!("bad bounds component {s:?}, want lo:hi"))?;
        let lo: f64 = lo.trim().parse().map_err(|_| format!("bad bound {lo:?}"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| format!("bad bound {hi:?}"))?;
        Ok((lo, hi))
    };
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() == 1 {
        let b = parse_one(parts[0])?;
        return Ok(vec![b; n]);
    }
    if parts.len() != n {
        return Err(format!("bounds list has {} components, expected {n}", parts.len()));
    }
    parts.into_iter().map(parse_one).collect()
}

fn cmd_sample(module: &Path, eval: Option<&PathBuf>, k: &Knobs) -> Result<i32, String> {
    let m = load_module(module)?;
    let bounds = parse_bounds(k.bounds.as_deref().unwrap_or("-1:1"), m.nvars())?;
    let count = k.count.unwrap_or(100);
    let seed = k.seed.unwrap_or(0);
    match sample_region(&m, count, &bounds, seed) {
        Ok(rep) => {
            println!(
                "accepted {} of {} draws (rate {:.4})",
                rep.accepted, rep.draws, rep.acceptance_rate
            );
            let mut doc = result_doc("sample", "sampled");
            insert(&mut doc, "seed", json!(seed));
            insert(&mut doc, "points", json!(rep.points));
            insert(&mut doc, "draws", json!(rep.draws));
            insert(&mut doc, "accepted", json!(rep.accepted));
            insert(&mut doc, "acceptance_rate", num(rep.acceptance_rate));
            if let Some(path) = eval {
                let f = load_poly(path)?.to_f64_poly();
                if let Some(s) = min_eig_stats(&f, &rep.points) {
                    println!(
                        "min eigenvalue over the sample: range [{:.6e}, {:.6e}], argmin {:?}",
                        s.min, s.max, s.argmin
                    );
                    insert(
                        &mut doc,
                        "stats",
                        json!({
                            "min": num(s.min),
                            "max": num(s.max),
                            "argmin": s.argmin,
                            "histogram": s.histogram.to_vec(),
                        }),
                    );
                }
            }
            emit(k, &doc)?;
            Ok(0)
        }
        Err(SetopsError::EmptyBoxOrNoSamples { draws }) => {
            println!("outcome: no points accepted in {draws} draws");
            let mut doc = result_doc("sample", "no-samples");
            insert(&mut doc, "draws", json!(draws));
            emit(k, &doc)?;
            Ok(2)
        }
        Err(e) => Err(e.to_string()),
    }
}

fn cmd_product_module(module: &Path, k: &Knobs) -> Result<i32, String> {
    let m = load_module(module)?;
    if m.size() != 1 {
        return Err("product expansion is defined for scalar generators (size-1 modules)".into());
    }
    let gens: Vec<QPoly> = m.generators().iter().map(|g| g.entry(0, 0).clone()).collect();
    let products = product_module(&gens).map_err(|e| e.to_string())?;
    println!("expanded {} generators into {} products", gens.len(), products.len());
    let out = ModulePresentation::new(
        m.nvars(),
        1,
        products.into_iter().map(MatrixPoly::from_scalar).collect(),
    )
    .map_err(|e| e.to_string())?;
    emit(k, &out.to_json())?;
    if k.json.is_none() {
        println!("{}", out.to_json_string());
    }
    Ok(0)
}

fn run(cli: &Cli) -> Result<i32, String> {
    let k = resolve(cli)?;
    match &cli.cmd {
        Cmd::CheckMembership { target, module } => {
            cmd_check_membership(target, module.as_ref(), &k)
        }
        Cmd::Nnsd { target, module } => cmd_nnsd(target, module.as_ref(), &k),
        Cmd::FactorUnivariate { target } => cmd_factor_univariate(target, &k),
        Cmd::Diagonalize { target } => cmd_diagonalize(target, &k),
        Cmd::ArchWitness { module } => cmd_arch_witness(module, &k),
        Cmd::RealEigCert { target, module } => cmd_real_eig_cert(target, module.as_ref(), &k),
        Cmd::Verify { bundle } => cmd_verify(bundle, &k),
        Cmd::VerifyPoint { target, point, module } => {
            cmd_verify_point(target, point, module.as_ref(), &k)
        }
        Cmd::Sample { module, eval } => cmd_sample(module, eval.as_ref(), &k),
        Cmd::ProductModule { module } => cmd_product_module(module, &k),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            exit(code);
        }
    };
    match run(&cli) {
        Ok(code) => exit(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            exit(3);
        }
    }
}
