//! Desk-scale reproduction runs reported as expected-versus-observed tables.
//!
//! Every instance is built from a single seed, so a run is reproducible from
//! its target name and seed. Failures are recorded in the table, never raised.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::critpoints::{
    cca_residual, enumerate_ca, enumerate_cca, enumerate_hetero_diag_3_2, enumerate_iso, enumerate_multi_eigen,
    CaMode, CaPoints, CountFormula, FirstOrderProblem, MultiEigenModel,
};
use crate::error::{Error, Result};
use crate::homotopy::{group_sign_orbits, hausdorff, solve, OrbitSummary, SolutionSet, TrackerConfig};
use crate::numkit::{Matrix, RANK_TOL};
use crate::polysys::{build_heterogeneous_lagrange, build_lo_system, LoModel, LoSystem};
use crate::random::{random_diagonal, random_matrix, random_symmetric, substream, SeededRng};
use crate::varieties::generators::{generators, relation_coefficients};
use crate::varieties::smooth::smoothness_check;
use crate::varieties::{convert, random_point, FlagPoint, FlagSignature, Model};

const TAG_DATA: u64 = 0x4441;
const TAG_SPECTRUM: u64 = 0x5350;
const TAG_POINTS: u64 = 0x5054;

/// Seeded generic input matrices for the heterogeneous quadratics problem.
pub fn hetero_matrices(n: usize, k: usize, diagonal: bool, seed: u64) -> Vec<Matrix> {
    let mut rng = substream(seed, TAG_DATA);
    (0..k).map(|_| if diagonal { random_diagonal(&mut rng, n) } else { random_symmetric(&mut rng, n) }).collect()
}

/// Seeded symmetric objective matrices.
pub fn symmetric_inputs(count: usize, n: usize, seed: u64) -> Vec<Matrix> {
    let mut rng = substream(seed, TAG_DATA);
    (0..count).map(|_| random_symmetric(&mut rng, n)).collect()
}

/// Seeded dense `rows × cols` input.
pub fn dense_input(rows: usize, cols: usize, seed: u64) -> Matrix {
    random_matrix(&mut substream(seed, TAG_DATA), rows, cols)
}

/// Seeded generic spectrum with the block pattern of `sig`.
pub fn generic_spectrum(sig: &FlagSignature, seed: u64) -> Vec<f64> {
    sig.generic_spectrum(&mut substream(seed, TAG_SPECTRUM))
}

fn point_rng(seed: u64) -> SeededRng {
    substream(seed, TAG_POINTS)
}

/// Solves the Lagrange system of the heterogeneous problem and groups sign orbits.
pub fn solve_hetero(a_list: &[Matrix], cfg: &TrackerConfig) -> Result<(SolutionSet, OrbitSummary)> {
    let sys = build_heterogeneous_lagrange(a_list)?;
    let set = solve(&sys, cfg, None)?;
    let n = a_list.first().map_or(0, Matrix::rows);
    let orbits = group_sign_orbits(&set.solutions, n, a_list.len(), cfg.dedup_tol);
    Ok((set, orbits))
}

/// Solves the linear-objective Lagrange system, marking on-variety solutions.
pub fn solve_lo(model: &LoModel, sig: &FlagSignature, objectives: &[Matrix], cfg: &TrackerConfig) -> Result<(LoSystem, SolutionSet)> {
    let lo = build_lo_system(model, sig, objectives, cfg.seed)?;
    let set = solve(&lo.system, cfg, Some(&lo.generators))?;
    Ok((lo, set))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Table1Small,
    Degrees,
    Conversions,
    Statistics,
}

impl Target {
    pub const ALL: [Target; 4] = [Target::Table1Small, Target::Degrees, Target::Conversions, Target::Statistics];

    pub fn name(self) -> &'static str {
        match self {
            Target::Table1Small => "table1-small",
            Target::Degrees => "degrees",
            Target::Conversions => "conversions",
            Target::Statistics => "statistics",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Target::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown target '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: Value,
    pub observed: Value,
    pub pass: bool,
    /// Slow instances left out of a fast run.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub skipped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Reproduction {
    pub target: Target,
    pub checks: Vec<Check>,
    /// All checks that ran passed.
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct Options {
    pub seed: u64,
    pub threads: Option<usize>,
    pub include_slow: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self { seed: 1, threads: None, include_slow: true }
    }
}

impl Options {
    fn tracker(&self) -> TrackerConfig {
        TrackerConfig { threads: self.threads, ..TrackerConfig::with_seed(self.seed) }
    }
}

struct Runner<'a> {
    opts: &'a Options,
    checks: Vec<Check>,
    timings: BTreeMap<String, f64>,
}

/// Observed value and pass flag of one check.
type Outcome = Result<(Value, bool)>;

impl Runner<'_> {
    fn check(&mut self, name: &str, expected: Value, slow: bool, f: impl FnOnce() -> Outcome) {
        if slow && !self.opts.include_slow {
            self.checks.push(Check { name: name.into(), expected, observed: Value::Null, pass: false, skipped: true });
            return;
        }
        let t = Instant::now();
        let (observed, pass) = match f() {
            Ok(r) => r,
            Err(e) => (json!({ "error": e.to_string() }), false),
        };
        self.timings.insert(name.into(), t.elapsed().as_secs_f64() * 1e3);
        self.checks.push(Check { name: name.into(), expected, observed, pass, skipped: false });
    }
}

/// Runs every check of `target`; returns the table and per-check milliseconds.
pub fn run(target: Target, opts: &Options) -> (Reproduction, BTreeMap<String, f64>) {
    let mut r = Runner { opts, checks: Vec::new(), timings: BTreeMap::new() };
    match target {
        Target::Table1Small => table1(&mut r),
        Target::Degrees => degrees(&mut r),
        Target::Conversions => conversions(&mut r),
        Target::Statistics => statistics(&mut r),
    }
    let pass = r.checks.iter().all(|c| c.pass || c.skipped);
    (Reproduction { target, checks: r.checks, pass }, r.timings)
}

fn hetero_outcome(n: usize, k: usize, diagonal: bool, opts: &Options, distinct: usize, orbits: usize) -> Outcome {
    let a = hetero_matrices(n, k, diagonal, opts.seed);
    let (set, o) = solve_hetero(&a, &opts.tracker())?;
    let c = &set.counts;
    let pass = c.distinct == distinct && c.distinct_nonsingular == distinct && o.orbits == orbits && o.free == orbits;
    Ok((json!({ "distinct": c.distinct, "nonsingular": c.distinct_nonsingular, "orbits": o.orbits, "failed_paths": c.paths.failed }), pass))
}

fn table1(r: &mut Runner<'_>) {
    let opts = r.opts;
    for (k, n, distinct, orbits, slow) in [(2, 2, 8, 2, false), (2, 3, 40, 10, false), (3, 3, 80, 10, true)] {
        r.check(&format!("hetero k={k} n={n}"), json!({ "distinct": distinct, "orbits": orbits }), slow, || {
            hetero_outcome(n, k, false, opts, distinct, orbits)
        });
    }
    r.check("hetero k=2 n=3 diagonal", json!({ "distinct": 40, "orbits": 10 }), false, || {
        hetero_outcome(3, 2, true, opts, 40, 10)
    });
    r.check("hetero k=2 conjecture n=2..4", json!([8, 40, 112]), false, || {
        let mut observed = Vec::new();
        let mut pass = true;
        for n in 2..=4u64 {
            let expected = CountFormula::HeteroK2Conjecture { n }.evaluate()? as usize;
            let a = hetero_matrices(n as usize, 2, false, opts.seed);
            let (set, _) = solve_hetero(&a, &opts.tracker())?;
            pass &= set.counts.distinct == expected;
            observed.push(set.counts.distinct);
        }
        Ok((json!(observed), pass))
    });
    r.check("diagonal closed form vs solver", json!({ "points": 40, "hausdorff_below": 1e-6, "residual_below": 1e-10 }), false, || {
        let a = hetero_matrices(3, 2, true, opts.seed);
        let closed = enumerate_hetero_diag_3_2(&a[0], &a[1])?;
        let sys = build_heterogeneous_lagrange(&a)?;
        let residual = closed.iter().map(|x| sys.residual(x)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
        let set = solve(&sys, &opts.tracker(), None)?;
        let solved: Vec<Vec<Complex64>> = set.solutions.iter().map(|s| s.x.clone()).collect();
        let d = hausdorff(&closed, &solved);
        Ok((json!({ "points": closed.len(), "hausdorff": d, "residual": residual }), closed.len() == 40 && d < 1e-6 && residual < 1e-10))
    });
}

/// Candidates from `pool` passing the problem's certificate.
fn certified(problem: &FirstOrderProblem, pool: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for x in pool {
        if problem.certify_real(x, RANK_TOL)?.pass {
            out.push(x.clone());
        }
    }
    Ok(out)
}

fn unmatched(a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) -> usize {
    a.iter()
        .filter(|x| !b.iter().any(|y| x.iter().zip(y.iter()).all(|(u, v)| (u - v).abs() <= tol)))
        .count()
}

fn degrees(r: &mut Runner<'_>) {
    let opts = r.opts;
    let seed = opts.seed;
    r.check("lo-pgr n=2 k=1 solve", json!({ "on_variety": 2 }), false, || {
        let sig = FlagSignature::grassmannian(1, 2)?;
        let (_, set) = solve_lo(&LoModel::Projection, &sig, &symmetric_inputs(1, 2, seed), &opts.tracker())?;
        let v = set.counts.on_variety.unwrap_or(0);
        Ok((json!({ "on_variety": v }), v == 2))
    });
    r.check("lo-pgr n=4 k=2 solve", json!({ "on_variety": 6 }), true, || {
        let sig = FlagSignature::grassmannian(2, 4)?;
        let (_, set) = solve_lo(&LoModel::Projection, &sig, &symmetric_inputs(1, 4, seed), &opts.tracker())?;
        let v = set.counts.on_variety.unwrap_or(0);
        Ok((json!({ "on_variety": v, "paths": set.counts.paths }), v == 6))
    });
    for (n, k) in [(4, 2), (5, 2)] {
        let expected = CountFormula::LoPgr { n: n as u64, k: k as u64 }.evaluate().unwrap_or(0);
        r.check(&format!("lo-pgr n={n} k={k} enumerate"), json!({ "points": expected, "certified": expected, "random_certified": 0 }), false, || {
            let a = &symmetric_inputs(1, n, seed)[0];
            let problem = FirstOrderProblem::linear_on_projection_grassmannian(a, k)?;
            let pts: Vec<Vec<f64>> = enumerate_multi_eigen(a, k, MultiEigenModel::Projection)?.iter().map(|p| p.point.coordinates()).collect();
            let sig = FlagSignature::grassmannian(k, n)?;
            let mut rng = point_rng(seed);
            let random = (0..20)
                .map(|_| random_point(Model::Projection, &sig, None, &mut rng).map(|p| p.coordinates()))
                .collect::<Result<Vec<_>>>()?;
            let (good, bad) = (certified(&problem, &pts)?.len(), certified(&problem, &random)?.len());
            Ok((json!({ "points": pts.len(), "certified": good, "random_certified": bad }), pts.len() as u64 == expected && good == pts.len() && bad == 0))
        });
    }
    r.check("lo-iso complete n=3 enumerate", json!({ "points": 6, "distinct_objectives": 6, "certified": 6 }), false, || {
        let sig = FlagSignature::complete(3)?;
        let c = generic_spectrum(&sig, seed);
        let a = &symmetric_inputs(1, 3, seed)[0];
        let pts = enumerate_iso(a, &sig, &c, 5, seed)?;
        let problem = FirstOrderProblem::linear_on_isospectral(a, &sig, &c)?;
        let coords: Vec<Vec<f64>> = pts.iter().map(|p| p.point.coordinates()).collect();
        let good = certified(&problem, &coords)?.len();
        let mut obj: Vec<f64> = pts.iter().map(|p| p.objective).collect();
        obj.sort_by(f64::total_cmp);
        obj.dedup_by(|x, y| (*x - *y).abs() <= 1e-8);
        let formula = CountFormula::LoIso { sig }.evaluate()? as usize;
        let invariance = pts.iter().map(|p| p.invariance).fold(0.0, f64::max);
        Ok((
            json!({ "points": pts.len(), "distinct_objectives": obj.len(), "certified": good, "formula": formula, "invariance": invariance }),
            pts.len() == 6 && obj.len() == 6 && good == 6 && formula == 6 && invariance < 1e-10,
        ))
    });
    r.check("lo-iso complete n=3 solve", json!({ "on_variety": 6 }), true, || {
        let sig = FlagSignature::complete(3)?;
        let c = generic_spectrum(&sig, seed);
        let (_, set) = solve_lo(&LoModel::Isospectral { spectrum: c }, &sig, &symmetric_inputs(1, 3, seed), &opts.tracker())?;
        let v = set.counts.on_variety.unwrap_or(0);
        Ok((json!({ "on_variety": v, "paths": set.counts.paths }), v == 6))
    });
    r.check("ed equals lo on iso 1,2:3", json!({ "lo": 6, "ed": 6, "symmetric_difference": 0, "trace_sq_spread_below": 1e-10 }), false, || {
        let sig: FlagSignature = "1,2:3".parse()?;
        let c = generic_spectrum(&sig, seed);
        let a = &symmetric_inputs(1, 3, seed)[0];
        let mut pool: Vec<Vec<f64>> = enumerate_iso(a, &sig, &c, 5, seed)?.iter().map(|p| p.point.coordinates()).collect();
        let mut rng = point_rng(seed);
        let mut spread = 0.0f64;
        let target: f64 = c.iter().map(|v| v * v).sum();
        for i in 0..100 {
            let p = random_point(Model::Isospectral, &sig, Some(&c), &mut rng)?;
            if let FlagPoint::Isospectral { matrix, .. } = &p {
                spread = spread.max(((matrix * matrix).trace() - target).abs());
            }
            if i < 20 {
                pool.push(p.coordinates());
            }
        }
        let lo = certified(&FirstOrderProblem::linear_on_isospectral(a, &sig, &c)?, &pool)?;
        let ed = certified(&FirstOrderProblem::distance_on_isospectral(a, &sig, &c)?, &pool)?;
        let diff = unmatched(&lo, &ed, 1e-8) + unmatched(&ed, &lo, 1e-8);
        Ok((
            json!({ "lo": lo.len(), "ed": ed.len(), "symmetric_difference": diff, "trace_sq_spread": spread }),
            lo.len() == 6 && ed.len() == 6 && diff == 0 && spread < 1e-10,
        ))
    });
}

fn grid() -> Vec<FlagSignature> {
    ["1:3", "2:4", "1,2:3", "1,2:4", "1,2,3:4"].iter().map(|s| s.parse().expect("valid signature")).collect()
}

fn conversions(r: &mut Runner<'_>) {
    let seed = r.opts.seed;
    for model in Model::ALL {
        r.check(
            &format!("ideal and smoothness {model}"),
            json!({ "points_below_1e-10": 500, "smooth": 100 }),
            false,
            || {
                let mut rng = point_rng(seed);
                let (mut ok, mut smooth) = (0, 0);
                for sig in grid() {
                    let spectrum = generic_spectrum(&sig, seed);
                    let spec = (model == Model::Isospectral).then_some(spectrum.as_slice());
                    for i in 0..100 {
                        let p = random_point(model, &sig, spec, &mut rng)?;
                        if p.residual()? < 1e-10 {
                            ok += 1;
                        }
                        if i < 20 && smoothness_check(&p, RANK_TOL)?.pass {
                            smooth += 1;
                        }
                    }
                }
                Ok((json!({ "points_below_1e-10": ok, "smooth": smooth }), ok == 500 && smooth == 100))
            },
        );
    }
    r.check("pluecker relation 1,2:3", json!({ "relations": ["x1*x23 - x2*x13 + x3*x12"], "max_residual_below": 1e-12 }), false, || {
        let sig: FlagSignature = "1,2:3".parse()?;
        let g = generators(Model::Pluecker, &sig, None)?;
        // Variables: x1, x2, x3, x12, x13, x23.
        let expected = [(vec![1, 0, 0, 0, 0, 1], 1.0), (vec![0, 1, 0, 0, 1, 0], -1.0), (vec![0, 0, 1, 1, 0, 0], 1.0)];
        let matches = g.len() == 1 && {
            let terms = relation_coefficients(&g.polys()[0]);
            let lead = terms.iter().find(|(e, _)| e == &expected[0].0).map(|t| t.1);
            terms.len() == 3
                && lead.is_some_and(|l| {
                    expected.iter().all(|(e, v)| terms.iter().any(|(te, tc)| te == e && (tc / l - v).norm() < 1e-12))
                })
        };
        let mut rng = point_rng(seed);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            worst = worst.max(random_point(Model::Pluecker, &sig, None, &mut rng)?.residual()?);
        }
        Ok((json!({ "relations": g.len(), "matches": matches, "max_residual": worst }), matches && worst < 1e-12))
    });
    for s in ["1,2:3", "1,2:4"] {
        r.check(&format!("commutativity {s}"), json!({ "max_difference_below": 1e-10 }), false, || {
            let sig: FlagSignature = s.parse()?;
            let c = generic_spectrum(&sig, seed);
            let mut rng = point_rng(seed);
            let mut worst = 0.0f64;
            for _ in 0..100 {
                let p = random_point(Model::Stiefel, &sig, None, &mut rng)?;
                let direct = convert(&p, Model::Isospectral, Some(&c))?;
                let routed = convert(&convert(&p, Model::Projection, None)?, Model::Isospectral, Some(&c))?;
                if let (FlagPoint::Isospectral { matrix: a, .. }, FlagPoint::Isospectral { matrix: b, .. }) = (&direct, &routed) {
                    worst = worst.max(a.max_abs_diff(b));
                }
            }
            Ok((json!({ "max_difference": worst }), worst < 1e-10))
        });
    }
}

fn statistics(r: &mut Runner<'_>) {
    let seed = r.opts.seed;
    for (p, q, k) in [(2, 2, 1), (3, 3, 2), (4, 3, 2)] {
        let expected = CountFormula::Cca { p, q, k }.evaluate().unwrap_or(0);
        r.check(&format!("cca p={p} q={q} k={k}"), json!({ "points": expected, "max_residual_below": 1e-10, "perturbed_failing": 20 }), false, || {
            let a = dense_input(p as usize, q as usize, seed);
            let pts = enumerate_cca(&a, k as usize)?;
            let worst = pts.iter().map(|pt| cca_residual(&a, &pt.u, &pt.v)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
            let mut rng = point_rng(seed);
            let mut failing = 0;
            for i in 0..20 {
                let pt = &pts[i % pts.len()];
                let u = &pt.u + &random_matrix(&mut rng, pt.u.rows(), pt.u.cols()).scale(1e-3);
                if cca_residual(&a, &u, &pt.v)? > 1e-10 {
                    failing += 1;
                }
            }
            Ok((
                json!({ "points": pts.len(), "max_residual": worst, "perturbed_failing": failing }),
                pts.len() as u64 == expected && worst < 1e-10 && failing == 20,
            ))
        });
    }
    for (n, p, k) in [(2, 3, 1), (3, 4, 2)] {
        let expected = CountFormula::Ca { n: n as u64, k: k as u64 }.evaluate().unwrap_or(0);
        r.check(&format!("ca matrix form n={n} p={p} k={k}"), json!({ "points": expected, "certified": expected, "max_residual_below": 1e-10 }), false, || {
            let a = dense_input(n, p, seed);
            let CaPoints::MatrixForm(pts) = enumerate_ca(&a, k, CaMode::MatrixForm)? else {
                return Err(Error::Consistency("wrong mode".into()));
            };
            let gens = generators(Model::Projection, &FlagSignature::grassmannian(k, p)?, None)?;
            let problem = FirstOrderProblem::ca_matrix(&a, k)?;
            let mut worst = 0.0f64;
            let mut good = 0;
            for pt in &pts {
                let mmt = (&pt.m * &pt.m.transpose()).symmetrized();
                worst = worst.max(gens.residual_f64(&crate::varieties::sym_to_vec(&mmt))?);
                if problem.certify_real(pt.m.as_slice(), RANK_TOL)?.pass {
                    good += 1;
                }
            }
            Ok((
                json!({ "points": pts.len(), "certified": good, "max_residual": worst }),
                pts.len() as u64 == expected && good == pts.len() && worst < 1e-10,
            ))
        });
    }
    r.check("ca orbit representatives n=3 p=4 k=2", json!({ "points": 3, "certified": 3 }), false, || {
        let a = dense_input(3, 4, seed);
        let CaPoints::OrbitReps(pts) = enumerate_ca(&a, 2, CaMode::OrbitReps)? else {
            return Err(Error::Consistency("wrong mode".into()));
        };
        let problem = FirstOrderProblem::ca_pairs(&a, 2)?;
        let mut good = 0;
        for pt in &pts {
            let x: Vec<f64> = (0..2).flat_map(|j| pt.u.column(j)).chain((0..2).flat_map(|j| pt.v.column(j))).collect();
            if problem.certify_real(&x, RANK_TOL)?.pass {
                good += 1;
            }
        }
        Ok((json!({ "points": pts.len(), "certified": good }), pts.len() == 3 && good == 3))
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_names_round_trip() {
        for t in Target::ALL {
            assert_eq!(t.name().parse::<Target>().unwrap(), t);
            assert_eq!(serde_json::to_value(t).unwrap(), json!(t.name()));
        }
        assert!("table2".parse::<Target>().is_err());
    }

    #[test]
    fn conversions_and_statistics_pass() {
        let opts = Options::default();
        for t in [Target::Conversions, Target::Statistics] {
            let (rep, _) = run(t, &opts);
            assert!(rep.pass, "{}", serde_json::to_string_pretty(&rep).unwrap());
        }
    }

    #[test]
    fn slow_checks_are_skipped_on_request() {
        let opts = Options { include_slow: false, ..Options::default() };
        let (rep, timings) = run(Target::Degrees, &opts);
        let skipped: Vec<&str> = rep.checks.iter().filter(|c| c.skipped).map(|c| c.name.as_str()).collect();
        assert_eq!(skipped, ["lo-pgr n=4 k=2 solve", "lo-iso complete n=3 solve"]);
        assert!(rep.pass, "{}", serde_json::to_string_pretty(&rep).unwrap());
        assert!(!timings.contains_key("lo-pgr n=4 k=2 solve"));
    }
}
