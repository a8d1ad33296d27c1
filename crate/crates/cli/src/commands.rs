use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use flagcrit::critpoints::{
    enumerate_ca, enumerate_cca, enumerate_hetero_diag_3_2, enumerate_iso, enumerate_multi_eigen, CaPoints,
    CountFormula, MultiEigenModel, PointRepr, ProblemSpec,
};
use flagcrit::homotopy::{self, group_sign_orbits, TrackerConfig};
use flagcrit::numkit::{Matrix, RANK_TOL};
use flagcrit::polysys::{build_heterogeneous_lagrange, build_lo_system, LoModel, PolySystem};
use flagcrit::random::seeded_rng;
use flagcrit::reproduce::{self, dense_input, generic_spectrum, hetero_matrices, symmetric_inputs, Target};
use flagcrit::varieties::{convert, generators, random_point, stiefel_dimension, FlagPoint, FlagSignature, Model};
use num_complex::Complex64 as Complex;
use serde_json::{json, Value};

use crate::report::{Outcome, RunReport};
use crate::{Cli, Command, EnumerateArgs, EnumerateProblem, SolveArgs, SolveProblem};

/// Largest Bézout number `solve` accepts.
const BEZOUT_BUDGET: u64 = 1 << 20;

pub fn run(cli: &Cli) -> Result<Outcome> {
    let (name, mut parameters) = match serde_json::to_value(&cli.command)? {
        Value::Object(m) if m.len() == 1 => m.into_iter().next().expect("one entry"),
        other => bail!("unexpected command encoding {other}"),
    };
    if let (Some(tol), Value::Object(m)) = (cli.tol, &mut parameters) {
        m.insert("tol".into(), json!(tol));
    }
    let mut report = RunReport::new(&name, parameters, cli.seed);
    let outcome = match &cli.command {
        Command::Dim { sig } => dim(&mut report, sig),
        Command::Generators { model, sig, spectrum } => gens(&mut report, cli, *model, sig, spectrum.as_deref()),
        Command::Convert { input, sig, to, spectrum } => {
            convert_cmd(&mut report, cli, input.as_deref(), sig.as_ref(), *to, spectrum.as_deref())
        }
        Command::Enumerate(args) => enumerate(&mut report, cli, args),
        Command::Solve(args) => solve(&mut report, cli, args),
        Command::Verify { points, problem } => verify(&mut report, cli, points, problem.as_deref()),
        Command::Reproduce { target, fast } => reproduce_cmd(&mut report, cli, target, *fast),
    }?;
    report.emit(cli.json.as_deref(), cli.quiet)?;
    Ok(outcome)
}

fn tol(cli: &Cli) -> f64 {
    cli.tol.unwrap_or(RANK_TOL)
}

fn tracker(cli: &Cli) -> TrackerConfig {
    TrackerConfig { threads: cli.threads, ..TrackerConfig::with_seed(cli.seed) }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// A single matrix, a list of matrices, or an object holding them under `matrices`.
fn read_matrices(path: &Path) -> Result<Vec<Matrix>> {
    let mut v = read_json(path)?;
    if let Value::Object(m) = &mut v {
        v = m.remove("matrices").ok_or_else(|| anyhow!("{}: expected a `matrices` field", path.display()))?;
    }
    if let Ok(m) = serde_json::from_value::<Matrix>(v.clone()) {
        return Ok(vec![m]);
    }
    serde_json::from_value(v).with_context(|| format!("{}: expected row-major matrices", path.display()))
}

fn need(value: Option<usize>, flag: &str) -> Result<usize> {
    value.ok_or_else(|| anyhow!("--{flag} is required"))
}

fn dim(report: &mut RunReport, sig: &FlagSignature) -> Result<Outcome> {
    report.results = json!({
        "sig": sig,
        "flag_dim": sig.flag_dimension(),
        "stiefel_dim": stiefel_dimension(sig.n(), sig.top())?,
        "ambient": {
            "stiefel": sig.ambient_stiefel(),
            "pluecker": sig.ambient_pluecker(),
            "projection": sig.ambient_projection(),
            "isospectral": sig.ambient_isospectral(),
        },
    });
    Ok(Outcome::Success)
}

fn spectrum_for(sig: &FlagSignature, given: Option<&[f64]>, seed: u64) -> Vec<f64> {
    given.map_or_else(|| generic_spectrum(sig, seed), <[f64]>::to_vec)
}

fn gens(report: &mut RunReport, cli: &Cli, model: Model, sig: &FlagSignature, spectrum: Option<&[f64]>) -> Result<Outcome> {
    let spec = (model == Model::Isospectral).then(|| spectrum_for(sig, spectrum, cli.seed));
    let sys = report.time("build", || generators(model, sig, spec.as_deref()))?;
    report.results = json!({
        "model": model,
        "sig": sig,
        "spectrum": spec,
        "count": sys.len(),
        "nvars": sys.nvars(),
        "degrees": sys.degrees(),
        "system": sys,
    });
    Ok(Outcome::Success)
}

fn convert_cmd(
    report: &mut RunReport,
    cli: &Cli,
    input: Option<&Path>,
    sig: Option<&FlagSignature>,
    to: Model,
    spectrum: Option<&[f64]>,
) -> Result<Outcome> {
    let point: FlagPoint = match input {
        Some(p) => serde_json::from_value(read_json(p)?).context("parsing point")?,
        None => {
            let sig = sig.ok_or_else(|| anyhow!("--sig is required without --input"))?;
            random_point(Model::Stiefel, sig, None, &mut seeded_rng(cli.seed))?
        }
    };
    let spec = (to == Model::Isospectral).then(|| spectrum_for(point.sig(), spectrum, cli.seed));
    let out = report.time("convert", || convert(&point, to, spec.as_deref()))?;
    report.results = json!({ "input": point, "output": out, "residual": out.residual()? });
    Ok(Outcome::Success)
}

fn single_input(args_input: Option<&Path>, fallback: impl FnOnce() -> Result<Matrix>) -> Result<Matrix> {
    match args_input {
        Some(p) => read_matrices(p)?.into_iter().next().ok_or_else(|| anyhow!("no matrix in input")),
        None => fallback(),
    }
}

/// Certifies `x` and merges `extra` fields into the certificate object.
fn certified_entry(spec: &ProblemSpec, x: &[Complex], tol: f64, extra: Value) -> Result<(Value, bool)> {
    let cert = spec.certify(x, tol)?;
    let pass = cert.pass;
    let mut v = serde_json::to_value(cert)?;
    if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
        m.extend(e);
    }
    Ok((v, pass))
}

fn real(x: &[f64]) -> Vec<Complex> {
    x.iter().map(|&v| Complex::new(v, 0.0)).collect()
}

fn enumerate(report: &mut RunReport, cli: &Cli, args: &EnumerateArgs) -> Result<Outcome> {
    let seed = cli.seed;
    let tol = tol(cli);
    let input = args.input.as_deref();
    let mut entries = Vec::new();
    let mut all_pass = true;
    let mut push = |entry: (Value, bool)| {
        all_pass &= entry.1;
        entries.push(entry.0);
    };
    let (spec, expected) = match args.problem {
        EnumerateProblem::MultiEigen => {
            let a = single_input(input, || Ok(symmetric_inputs(1, need(args.n, "n")?, seed).remove(0)))?;
            let k = need(args.k, "k")?;
            let model: MultiEigenModel = args.model.into();
            let pts = report.time("enumerate", || enumerate_multi_eigen(&a, k, model))?;
            let spec = match model {
                MultiEigenModel::Projection => ProblemSpec::LoPgr { a: a.clone(), k },
                MultiEigenModel::StiefelOrbitReps => ProblemSpec::MultiEigen { a: a.clone(), k },
            };
            let t = std::time::Instant::now();
            for p in &pts {
                push(certified_entry(&spec, &real(&p.point.coordinates()), tol, json!({ "subset": p.subset, "eigenvalues": p.eigenvalues }))?);
            }
            report.timings.insert("certify".into(), t.elapsed().as_secs_f64() * 1e3);
            (spec, CountFormula::LoPgr { n: a.rows() as u64, k: k as u64 }.evaluate()?)
        }
        EnumerateProblem::Iso => {
            let sig = match (&args.sig, args.n) {
                (Some(s), _) => s.clone(),
                (None, Some(n)) => FlagSignature::complete(n)?,
                (None, None) => bail!("--sig or --n is required"),
            };
            let a = single_input(input, || Ok(symmetric_inputs(1, sig.n(), seed).remove(0)))?;
            let c = spectrum_for(&sig, args.spectrum.as_deref(), seed);
            let pts = report.time("enumerate", || enumerate_iso(&a, &sig, &c, args.samples, seed))?;
            let spec = ProblemSpec::LoIso { a: a.clone(), sig: sig.clone(), spectrum: c };
            for p in &pts {
                push(certified_entry(&spec, &real(&p.point.coordinates()), tol, json!({ "labels": p.labels, "invariance": p.invariance }))?);
            }
            (spec, CountFormula::LoIso { sig }.evaluate()?)
        }
        EnumerateProblem::HeteroDiag32 => {
            let a = match input {
                Some(p) => read_matrices(p)?,
                None => hetero_matrices(3, 2, true, seed),
            };
            if a.len() != 2 {
                bail!("expected two diagonal 3 x 3 matrices, got {}", a.len());
            }
            let pts = report.time("enumerate", || enumerate_hetero_diag_3_2(&a[0], &a[1]))?;
            let lagrange = build_heterogeneous_lagrange(&a)?;
            let spec = ProblemSpec::Heterogeneous { a: a.clone() };
            for x in &pts {
                let residual = lagrange.residual(x)?;
                let (mut entry, pass) = certified_entry(&spec, x, tol, json!({ "lagrange_residual": residual }))?;
                // Report the full Lagrange vector rather than the frame alone.
                entry["point"] = serde_json::to_value(PointRepr::from_complex(x))?;
                push((entry, pass && residual < 1e-10));
            }
            (spec, 40)
        }
        EnumerateProblem::Cca => {
            let a = single_input(input, || Ok(dense_input(need(args.p, "p")?, need(args.q, "q")?, seed)))?;
            let k = need(args.k, "k")?;
            let pts = report.time("enumerate", || enumerate_cca(&a, k))?;
            let spec = ProblemSpec::Cca { a: a.clone(), k };
            for p in &pts {
                let x: Vec<f64> = (0..k).flat_map(|j| p.u.column(j)).chain((0..k).flat_map(|j| p.v.column(j))).collect();
                push(certified_entry(&spec, &real(&x), tol, json!({ "triples": p.triples, "signs": p.signs }))?);
            }
            (spec, CountFormula::Cca { p: a.rows() as u64, q: a.cols() as u64, k: k as u64 }.evaluate()?)
        }
        EnumerateProblem::Ca => {
            let a = single_input(input, || Ok(dense_input(need(args.n, "n")?, need(args.p, "p")?, seed)))?;
            let k = need(args.k, "k")?;
            let pts = report.time("enumerate", || enumerate_ca(&a, k, args.mode.into()))?;
            let spec = match &pts {
                CaPoints::MatrixForm(ms) => {
                    let spec = ProblemSpec::CaMatrix { a: a.clone(), k };
                    for m in ms {
                        push(certified_entry(&spec, &real(m.m.as_slice()), tol, json!({ "subset": m.subset }))?);
                    }
                    spec
                }
                CaPoints::OrbitReps(ps) => {
                    let spec = ProblemSpec::CaPairs { a: a.clone(), k };
                    for p in ps {
                        let x: Vec<f64> = (0..k).flat_map(|j| p.u.column(j)).chain((0..k).flat_map(|j| p.v.column(j))).collect();
                        push(certified_entry(&spec, &real(&x), tol, json!({ "subset": p.subset }))?);
                    }
                    spec
                }
            };
            (spec, CountFormula::Ca { n: a.rows() as u64, k: k as u64 }.evaluate()?)
        }
    };
    let count = entries.len();
    let pass = all_pass && count as u64 == expected;
    report.results = json!({
        "problem": spec,
        "count": count,
        "expected": expected,
        "all_pass": pass,
        "points": entries,
    });
    Ok(Outcome::from_pass(pass))
}

fn guard(sys: &PolySystem) -> Result<u64> {
    let b = sys.bezout_number()?;
    if b > BEZOUT_BUDGET {
        bail!("refusing to track {b} paths: the Bézout number exceeds the budget of {BEZOUT_BUDGET}");
    }
    Ok(b)
}

fn solve(report: &mut RunReport, cli: &Cli, args: &SolveArgs) -> Result<Outcome> {
    let cfg = tracker(cli);
    let seed = cli.seed;
    let inputs = args.input.as_deref().map(read_matrices).transpose()?;
    let results = match args.problem {
        SolveProblem::Hetero => {
            let a = match inputs {
                Some(a) => a,
                None => hetero_matrices(need(args.n, "n")?, need(args.k, "k")?, args.diagonal, seed),
            };
            let (n, k) = (a.first().map_or(0, Matrix::rows), a.len());
            let sys = report.time("build", || build_heterogeneous_lagrange(&a))?;
            let bezout = guard(&sys)?;
            let set = report.time("solve", || homotopy::solve(&sys, &cfg, None))?;
            let orbits = group_sign_orbits(&set.solutions, n, k, cfg.dedup_tol);
            let mut out = serde_json::to_value(homotopy::RunReport::new(&set, &cfg, bezout, Some(orbits)))?;
            out["inputs"] = serde_json::to_value(&a)?;
            if k == 2 {
                out["conjecture"] = json!(CountFormula::HeteroK2Conjecture { n: n as u64 }.evaluate()?);
            }
            out
        }
        SolveProblem::LoPgr | SolveProblem::LoIso => {
            let (sig, model) = if args.problem == SolveProblem::LoPgr {
                (FlagSignature::grassmannian(need(args.k, "k")?, need(args.n, "n")?)?, LoModel::Projection)
            } else {
                let sig = match (&args.sig, args.n) {
                    (Some(s), _) => s.clone(),
                    (None, Some(n)) => FlagSignature::complete(n)?,
                    (None, None) => bail!("--sig or --n is required"),
                };
                let c = spectrum_for(&sig, args.spectrum.as_deref(), seed);
                (sig, LoModel::Isospectral { spectrum: c })
            };
            let count = if matches!(model, LoModel::Projection) { sig.r() } else { 1 };
            let objectives = inputs.unwrap_or_else(|| symmetric_inputs(count, sig.n(), seed));
            let lo = report.time("build", || build_lo_system(&model, &sig, &objectives, seed))?;
            let bezout = guard(&lo.system)?;
            let set = report.time("solve", || homotopy::solve(&lo.system, &cfg, Some(&lo.generators)))?;
            let mut out = serde_json::to_value(homotopy::RunReport::new(&set, &cfg, bezout, None))?;
            let expected = match &model {
                LoModel::Projection => CountFormula::LoPgr { n: sig.n() as u64, k: sig.top() as u64 },
                LoModel::Isospectral { .. } => CountFormula::LoIso { sig: sig.clone() },
            };
            out["inputs"] = serde_json::to_value(&objectives)?;
            out["expected_on_variety"] = json!(expected.evaluate()?);
            if let LoModel::Isospectral { spectrum } = &model {
                out["spectrum"] = json!(spectrum);
            }
            out
        }
    };
    report.results = results;
    Ok(Outcome::Success)
}

fn verify(report: &mut RunReport, cli: &Cli, points: &Path, problem: Option<&Path>) -> Result<Outcome> {
    let mut doc = read_json(points)?;
    if let Some(r) = doc.get_mut("results") {
        doc = r.take();
    }
    let spec_value = match problem {
        Some(p) => {
            let v = read_json(p)?;
            v.get("problem").cloned().unwrap_or(v)
        }
        None => doc.get("problem").cloned().ok_or_else(|| anyhow!("{}: no `problem` field", points.display()))?,
    };
    let spec: ProblemSpec = serde_json::from_value(spec_value).context("parsing problem")?;
    let items = doc
        .get("points")
        .and_then(Value::as_array)
        .ok_or_else(|| anyhow!("{}: no `points` array", points.display()))?;
    let tol = tol(cli);
    let mut certs = Vec::with_capacity(items.len());
    let mut passed = 0;
    for (i, item) in items.iter().enumerate() {
        let raw = item.get("point").unwrap_or(item);
        let repr: PointRepr = serde_json::from_value(raw.clone()).with_context(|| format!("point {i}"))?;
        let cert = spec.certify(&repr.to_complex()?, tol).with_context(|| format!("point {i}"))?;
        passed += usize::from(cert.pass);
        certs.push(cert);
    }
    report.results = json!({
        "problem": spec,
        "count": certs.len(),
        "passed": passed,
        "certificates": certs,
    });
    Ok(Outcome::from_pass(passed == certs.len()))
}

fn reproduce_cmd(report: &mut RunReport, cli: &Cli, target: &str, fast: bool) -> Result<Outcome> {
    let target: Target = target.parse()?;
    let opts = reproduce::Options { seed: cli.seed, threads: cli.threads, include_slow: !fast };
    let (rep, timings) = reproduce::run(target, &opts);
    if !cli.quiet {
        for c in &rep.checks {
            let status = if c.skipped { "skip" } else if c.pass { "pass" } else { "FAIL" };
            eprintln!("{status}  {:<40} expected {}  observed {}", c.name, c.expected, c.observed);
        }
    }
    report.timings = timings;
    let pass = rep.pass;
    report.results = serde_json::to_value(rep)?;
    Ok(Outcome::from_pass(pass))
}
