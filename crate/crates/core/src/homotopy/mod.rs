//! Total-degree homotopy continuation.
//!
//! [`solve`] builds the start system `x_i^{d_i} − r_i`, tracks every start
//! root to the target with [`tracker`], polishes the endpoints and merges
//! them into a deduplicated [`SolutionSet`]. Paths run in parallel on a rayon
//! pool and are merged by start index, so results do not depend on the
//! number of threads.

pub mod tracker;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polysys::{CompiledSystem, PolySystem, Polynomial, VarBlock};
use crate::random::{random_unit_complex, substream};

pub use tracker::{PathResult, PathStatus};

const TAG_START: u64 = 1;
const TAG_GAMMA: u64 = 2;
const TAG_CHART: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailurePolicy {
    Report,
    RetrySmallerStep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub corrector_tol: f64,
    pub max_corrector_iters: usize,
    pub endpoint_tol: f64,
    pub dedup_tol: f64,
    pub real_tol: f64,
    pub on_variety_tol: f64,
    pub singular_tol: f64,
    pub polish_iters: usize,
    pub divergence_cutoff: f64,
    pub failure_policy: FailurePolicy,
    pub seed: u64,
    /// Worker threads; `None` uses the global rayon pool.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            initial_step: 0.05,
            min_step: 1e-7,
            max_step: 0.2,
            corrector_tol: 1e-10,
            max_corrector_iters: 5,
            endpoint_tol: 1e-10,
            dedup_tol: 1e-6,
            real_tol: 1e-8,
            on_variety_tol: 1e-6,
            singular_tol: 1e-8,
            polish_iters: 20,
            divergence_cutoff: 1e10,
            failure_policy: FailurePolicy::RetrySmallerStep,
            seed: 0,
            threads: None,
        }
    }
}

impl TrackerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let steps_ok = 0.0 < self.min_step
            && self.min_step <= self.initial_step
            && self.initial_step <= self.max_step
            && self.max_step < 1.0;
        if !steps_ok {
            return Err(Error::Config("need 0 < min step <= initial step <= max step < 1".into()));
        }
        let tols = [
            self.corrector_tol,
            self.endpoint_tol,
            self.dedup_tol,
            self.real_tol,
            self.on_variety_tol,
            self.singular_tol,
        ];
        if tols.iter().any(|&t| !(t > 0.0)) || !(self.divergence_cutoff > 1.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.max_corrector_iters == 0 {
            return Err(Error::Config("need at least one corrector iteration".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("thread count must be positive".into()));
        }
        Ok(())
    }
}

/// Start system `x_i^{d_i} − r_i` with its `∏ d_i` roots.
#[derive(Clone, Debug)]
pub struct StartSystem {
    pub degrees: Vec<u32>,
    pub constants: Vec<Complex64>,
}

impl StartSystem {
    pub fn new(sys: &PolySystem, seed: u64) -> Result<Self> {
        sys.bezout_number()?;
        let degrees = sys.degrees();
        if degrees.contains(&0) {
            return Err(Error::Contract("a target equation is constant".into()));
        }
        let mut rng = substream(seed, TAG_START);
        let constants = degrees.iter().map(|_| random_unit_complex(&mut rng)).collect();
        Ok(Self { degrees, constants })
    }

    pub fn len(&self) -> usize {
        self.degrees.iter().map(|&d| d as usize).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Root number `index` in mixed radix over the degrees (first variable fastest).
    pub fn root(&self, index: usize) -> Vec<Complex64> {
        let mut rem = index;
        self.degrees
            .iter()
            .zip(&self.constants)
            .map(|(&d, &r)| {
                let j = rem % d as usize;
                rem /= d as usize;
                let base = r.powf(1.0 / f64::from(d));
                base * Complex64::from_polar(1.0, std::f64::consts::TAU * j as f64 / f64::from(d))
            })
            .collect()
    }

    pub fn system(&self, blocks: Vec<VarBlock>) -> PolySystem {
        let n = self.degrees.len();
        let polys = self
            .degrees
            .iter()
            .zip(&self.constants)
            .enumerate()
            .map(|(i, (&d, &r))| &Polynomial::var(n, i).pow(d) - &Polynomial::constant(n, r))
            .collect();
        PolySystem::new(blocks, polys, "total-degree-start").expect("arity matches")
    }
}

/// Start system for `sys` and all its roots.
pub fn start_system(sys: &PolySystem, seed: u64) -> Result<(PolySystem, Vec<Vec<Complex64>>)> {
    let s = StartSystem::new(sys, seed)?;
    let roots = (0..s.len()).map(|i| s.root(i)).collect();
    Ok((s.system(sys.blocks().to_vec()), roots))
}

fn chart_and_gamma(n: usize, seed: u64) -> (Vec<Complex64>, Complex64) {
    let mut rng = substream(seed, TAG_CHART);
    let chart = (0..=n).map(|_| random_unit_complex(&mut rng)).collect();
    let gamma = random_unit_complex(&mut substream(seed, TAG_GAMMA));
    (chart, gamma)
}

/// Tracks one path of `γ(1−t)·start + t·target` from `x0` at `t = 0`.
pub fn track_path(target: &PolySystem, start: &PolySystem, x0: &[Complex64], cfg: &TrackerConfig) -> Result<PathResult> {
    cfg.validate()?;
    if !target.is_square() {
        return Err(Error::NotSquare { equations: target.len(), variables: target.nvars() });
    }
    if start.degrees() != target.degrees() || start.nvars() != target.nvars() {
        return Err(Error::Contract("start and target systems must have the same shape and degrees".into()));
    }
    if x0.len() != target.nvars() {
        return Err(Error::DimensionMismatch { expected: target.nvars(), got: x0.len() });
    }
    let (ct, cs) = (CompiledSystem::new(target), CompiledSystem::new(start));
    let (chart, gamma) = chart_and_gamma(target.nvars(), cfg.seed);
    let hom = tracker::Homotopy { target: &ct, start: &cs, gamma, chart: &chart };
    Ok(tracker::track_homogeneous(&hom, 0, x0, cfg))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Solution {
    #[serde(serialize_with = "ser_complex_vec")]
    pub x: Vec<Complex64>,
    pub start_index: usize,
    /// Number of converged paths that landed here.
    pub multiplicity: usize,
    pub singular: bool,
    pub real: bool,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub on_variety: Option<bool>,
}

impl Solution {
    /// Suspected non-isolated or multiple root.
    pub fn multiplicity_suspect(&self) -> bool {
        self.singular || self.multiplicity > 1
    }
}

fn ser_complex_vec<S: serde::Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("ComplexVector", 2)?;
    st.serialize_field("re", &v.iter().map(|z| z.re).collect::<Vec<_>>())?;
    st.serialize_field("im", &v.iter().map(|z| z.im).collect::<Vec<_>>())?;
    st.end()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PathCounts {
    pub converged: usize,
    pub diverged: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SolutionCounts {
    pub raw_paths: usize,
    pub paths: PathCounts,
    pub distinct: usize,
    pub distinct_nonsingular: usize,
    pub distinct_real: usize,
    pub singular: usize,
    pub on_variety: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionSet {
    pub solutions: Vec<Solution>,
    pub paths: Vec<PathResult>,
    pub counts: SolutionCounts,
}

impl SolutionSet {
    /// Solutions passing the attached filter (all solutions when none was given).
    pub fn on_variety(&self) -> impl Iterator<Item = &Solution> {
        self.solutions.iter().filter(|s| s.on_variety != Some(false))
    }

    /// Sorted, rounded copy of the solution coordinates, for determinism checks.
    pub fn fingerprint(&self) -> Vec<Vec<(i64, i64)>> {
        let mut v: Vec<Vec<(i64, i64)>> = self
            .solutions
            .iter()
            .map(|s| s.x.iter().map(|z| ((z.re * 1e8).round() as i64, (z.im * 1e8).round() as i64)).collect())
            .collect();
        v.sort();
        v
    }
}

fn max_dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// Greedy clustering by coordinate-wise max distance; returns cluster
/// representatives as indices into `points`, ordered by first member.
pub fn cluster(points: &[&[Complex64]], tol: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    let key = |i: usize| points[i].first().map_or(0.0, |z| z.re);
    order.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
    // Clusters sorted by the key of their representative.
    let mut reps: Vec<(f64, usize)> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut rep_cluster: Vec<usize> = Vec::new();
    for &i in &order {
        let k = key(i);
        let found = reps
            .iter()
            .enumerate()
            .rev()
            .take_while(|(_, &(rk, _))| rk >= k - tol)
            .find(|(_, &(_, r))| max_dist(points[r], points[i]) < tol)
            .map(|(c, _)| rep_cluster[c]);
        match found {
            Some(c) => members[c].push(i),
            None => {
                reps.push((k, i));
                rep_cluster.push(members.len());
                members.push(vec![i]);
            }
        }
    }
    members.iter_mut().for_each(|m| m.sort_unstable());
    members.sort_by_key(|m| m[0]);
    members
}

/// Solves the square system `sys` by total-degree homotopy.
///
/// When `filter` is given, each solution is marked on-variety if the filter
/// system (same variables) has residual below `cfg.on_variety_tol` there.
pub fn solve(sys: &PolySystem, cfg: &TrackerConfig, filter: Option<&PolySystem>) -> Result<SolutionSet> {
    cfg.validate()?;
    if !sys.is_square() {
        return Err(Error::NotSquare { equations: sys.len(), variables: sys.nvars() });
    }
    if let Some(f) = filter {
        if f.nvars() != sys.nvars() {
            return Err(Error::DimensionMismatch { expected: sys.nvars(), got: f.nvars() });
        }
    }
    let start = StartSystem::new(sys, cfg.seed)?;
    let start_sys = start.system(sys.blocks().to_vec());
    let (ct, cs) = (CompiledSystem::new(sys), CompiledSystem::new(&start_sys));
    let (chart, gamma) = chart_and_gamma(sys.nvars(), cfg.seed);
    let hom = tracker::Homotopy { target: &ct, start: &cs, gamma, chart: &chart };
    let run = || -> Vec<PathResult> {
        (0..start.len())
            .into_par_iter()
            .map(|i| tracker::track_homogeneous(&hom, i, &start.root(i), cfg))
            .collect()
    };
    let paths = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run),
        None => run(),
    };
    Ok(assemble(paths, cfg, filter))
}

fn assemble(paths: Vec<PathResult>, cfg: &TrackerConfig, filter: Option<&PolySystem>) -> SolutionSet {
    let mut counts = PathCounts::default();
    for p in &paths {
        match p.status {
            PathStatus::Converged => counts.converged += 1,
            PathStatus::Diverged => counts.diverged += 1,
            PathStatus::Failed => counts.failed += 1,
        }
    }
    let converged: Vec<&PathResult> = paths.iter().filter(|p| p.status == PathStatus::Converged).collect();
    let points: Vec<&[Complex64]> = converged.iter().map(|p| p.endpoint.as_slice()).collect();
    let solutions: Vec<Solution> = cluster(&points, cfg.dedup_tol)
        .into_iter()
        .map(|members| {
            // Representative: the member with the smallest residual, ties by start index.
            let best = *members
                .iter()
                .min_by(|&&a, &&b| converged[a].residual.total_cmp(&converged[b].residual))
                .expect("nonempty cluster");
            let p = converged[best];
            let on_variety = filter.map(|f| f.residual(&p.endpoint).is_ok_and(|r| r < cfg.on_variety_tol));
            Solution {
                x: p.endpoint.clone(),
                start_index: converged[members[0]].start_index,
                multiplicity: members.len(),
                singular: members.iter().any(|&m| converged[m].singular),
                real: p.endpoint.iter().all(|z| z.im.abs() < cfg.real_tol),
                residual: p.residual,
                on_variety,
            }
        })
        .collect();
    let counts = SolutionCounts {
        raw_paths: paths.len(),
        paths: counts,
        distinct: solutions.len(),
        distinct_nonsingular: solutions.iter().filter(|s| !s.singular).count(),
        distinct_real: solutions.iter().filter(|s| s.real).count(),
        singular: solutions.iter().filter(|s| s.singular).count(),
        on_variety: filter.map(|_| solutions.iter().filter(|s| s.on_variety == Some(true)).count()),
    };
    SolutionSet { solutions, paths, counts }
}

/// Symmetric Hausdorff distance between finite point sets in the max norm.
pub fn hausdorff(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let dist = |x: &[Complex64], y: &[Complex64]| {
        if x.len() != y.len() {
            return f64::INFINITY;
        }
        x.iter().zip(y).fold(0.0f64, |m, (u, v)| m.max((u - v).norm()))
    };
    let directed = |p: &[Vec<Complex64>], q: &[Vec<Complex64>]| {
        p.iter()
            .map(|x| q.iter().map(|y| dist(x, y)).fold(f64::INFINITY, f64::min))
            .fold(0.0f64, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrbitSummary {
    pub orbits: usize,
    /// Orbits of full size `2^k`.
    pub free: usize,
    pub non_free: usize,
}

/// Flips column signs of the `n × k` frame stored column-major at the start
/// of `x` so that the first non-negligible entry of each column is
/// "positive" (positive real part, or positive imaginary part if real part vanishes).
pub fn canonical_signs(x: &[Complex64], n: usize, k: usize) -> (Vec<Complex64>, bool) {
    let mut out = x.to_vec();
    let mut free = true;
    for j in 0..k {
        let col = &mut out[j * n..(j + 1) * n];
        let scale = col.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if scale < 1e-8 {
            free = false;
            continue;
        }
        let lead = col.iter().find(|z| z.norm() > 1e-6 * scale).copied().unwrap_or(col[0]);
        let positive = if lead.re.abs() > 1e-9 * scale { lead.re > 0.0 } else { lead.im > 0.0 };
        if !positive {
            col.iter_mut().for_each(|z| *z = -*z);
        }
    }
    (out[..n * k].to_vec(), free)
}

/// Partitions solutions into orbits of the column-sign action on the frame block.
pub fn group_sign_orbits(solutions: &[Solution], n: usize, k: usize, tol: f64) -> OrbitSummary {
    let canon: Vec<(Vec<Complex64>, bool)> = solutions.iter().map(|s| canonical_signs(&s.x, n, k)).collect();
    let points: Vec<&[Complex64]> = canon.iter().map(|(c, _)| c.as_slice()).collect();
    let groups = cluster(&points, tol);
    let full = 1usize << k;
    let free = groups.iter().filter(|g| g.len() == full && g.iter().all(|&i| canon[i].1)).count();
    OrbitSummary { orbits: groups.len(), free, non_free: groups.len() - free }
}

/// Machine-readable run summary.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub config: TrackerConfig,
    pub bezout: u64,
    pub paths: PathCounts,
    pub distinct: usize,
    pub distinct_nonsingular: usize,
    pub distinct_real: usize,
    pub on_variety: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orbits: Option<OrbitSummary>,
    pub solutions: Vec<Solution>,
}

impl RunReport {
    pub fn new(set: &SolutionSet, cfg: &TrackerConfig, bezout: u64, orbits: Option<OrbitSummary>) -> Self {
        Self {
            config: cfg.clone(),
            bezout,
            paths: set.counts.paths.clone(),
            distinct: set.counts.distinct,
            distinct_nonsingular: set.counts.distinct_nonsingular,
            distinct_real: set.counts.distinct_real,
            on_variety: set.counts.on_variety,
            orbits,
            solutions: set.solutions.clone(),
        }
    }
}
