//! Predictor–corrector tracking of one path in homogenized coordinates.
//!
//! The target `F` and start `G` are homogenized with the extra coordinate
//! `x₀` stored last. Points live in a random affine chart `a·X = 1`, so paths
//! heading to infinity stay bounded and show up as `x₀ → 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::TrackerConfig;
use crate::numkit::{complex_singular_values, lu_solve_in_place, CMatrix};
use crate::polysys::CompiledSystem;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const MAX_STEPS: usize = 20_000;
/// Where the size of the homogenizing coordinate is sampled for the trend test.
const TREND_T: f64 = 0.99;
/// A stalled path whose `|x₀|` shrank by this factor since `TREND_T` is heading to infinity.
const TREND_DROP: f64 = 0.25;
/// Largest accepted first Newton update relative to the point, guarding against path jumping.
const MAX_FIRST_CORRECTION: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathStatus {
    Converged,
    Diverged,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathResult {
    pub start_index: usize,
    /// Affine endpoint; for diverged paths the last finite estimate.
    pub endpoint: Vec<Complex64>,
    pub status: PathStatus,
    pub residual: f64,
    pub steps: usize,
    pub singular: bool,
    /// Final `t` reached (1 when tracking completed).
    pub t: f64,
}

/// Shared, read-only data of one homotopy `γ(1−t)G + tF`.
pub(crate) struct Homotopy<'a> {
    pub target: &'a CompiledSystem,
    pub start: &'a CompiledSystem,
    pub gamma: Complex64,
    pub chart: &'a [Complex64],
}

struct Run {
    t: f64,
    steps: usize,
    finished: bool,
    /// `|x₀| / ‖X‖` when `t` first passed `TREND_T`.
    trend: Option<f64>,
}

struct Workspace {
    n: usize,
    ft: Vec<Complex64>,
    jt: Vec<Complex64>,
    fs: Vec<Complex64>,
    js: Vec<Complex64>,
    mat: Vec<Complex64>,
    rhs: Vec<Complex64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let w = n + 1;
        Self {
            n,
            ft: vec![ZERO; n],
            jt: vec![ZERO; n * w],
            fs: vec![ZERO; n],
            js: vec![ZERO; n * w],
            mat: vec![ZERO; w * w],
            rhs: vec![ZERO; w],
        }
    }
}

fn norm_inf(v: &[Complex64]) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

impl Homotopy<'_> {
    /// Fills `mat` with `[H_X; a]` at `(x, t)` and `rhs` with `-[H; a·X − 1]`.
    /// With `tangent`, `rhs` instead holds `-[H_t; 0]`.
    fn assemble(&self, ws: &mut Workspace, x: &[Complex64], t: f64, tangent: bool) {
        let n = ws.n;
        let w = n + 1;
        self.target.eval_homogeneous(x, &mut ws.ft, &mut ws.jt);
        self.start.eval_homogeneous(x, &mut ws.fs, &mut ws.js);
        let gs = self.gamma * (1.0 - t);
        for i in 0..n {
            for j in 0..w {
                ws.mat[i * w + j] = gs * ws.js[i * w + j] + ws.jt[i * w + j] * t;
            }
            ws.rhs[i] = if tangent {
                -(ws.ft[i] - self.gamma * ws.fs[i])
            } else {
                -(gs * ws.fs[i] + ws.ft[i] * t)
            };
        }
        ws.mat[n * w..].copy_from_slice(self.chart);
        ws.rhs[n] = if tangent {
            ZERO
        } else {
            ONE - self.chart.iter().zip(x).map(|(a, b)| a * b).sum::<Complex64>()
        };
    }

    /// Newton iterations at fixed `t`; returns the number used or `None` on failure.
    fn correct(&self, ws: &mut Workspace, x: &mut [Complex64], t: f64, cfg: &TrackerConfig) -> Option<usize> {
        let mut prev = f64::INFINITY;
        for it in 0..cfg.max_corrector_iters {
            self.assemble(ws, x, t, false);
            if !lu_solve_in_place(ws.n + 1, &mut ws.mat, &mut ws.rhs) {
                return None;
            }
            let dn = norm_inf(&ws.rhs);
            let scale = 1.0 + norm_inf(x);
            if !dn.is_finite() || (it == 0 && dn > MAX_FIRST_CORRECTION * scale) || (it > 0 && dn > 0.5 * prev) {
                return None;
            }
            x.iter_mut().zip(&ws.rhs).for_each(|(xi, d)| *xi += d);
            if dn <= cfg.corrector_tol * scale {
                return Some(it + 1);
            }
            prev = dn;
        }
        None
    }

    fn x0_ratio(x: &[Complex64]) -> f64 {
        let n = x.len() - 1;
        x[n].norm() / norm_inf(x).max(f64::MIN_POSITIVE)
    }

    /// Tracks from the start point `x` (homogeneous, in the chart) to `t = 1`.
    fn run(&self, x: &mut [Complex64], cfg: &TrackerConfig, initial: f64, max: f64) -> Run {
        let n = x.len() - 1;
        let mut ws = Workspace::new(n);
        let mut t = 0.0;
        let mut h = initial;
        let mut streak = 0;
        let mut steps = 0;
        let mut trial = x.to_vec();
        let cutoff = 1.0 / cfg.divergence_cutoff;
        let mut trend = None;
        while t < 1.0 && steps < MAX_STEPS {
            steps += 1;
            let dt = h.min(1.0 - t);
            self.assemble(&mut ws, x, t, true);
            let ok = lu_solve_in_place(n + 1, &mut ws.mat, &mut ws.rhs);
            if ok {
                trial.iter_mut().zip(x.iter().zip(&ws.rhs)).for_each(|(y, (xi, d))| *y = xi + d * dt);
            }
            let t_next = if 1.0 - t - dt < 1e-14 { 1.0 } else { t + dt };
            if ok && self.correct(&mut ws, &mut trial, t_next, cfg).is_some() {
                x.copy_from_slice(&trial);
                t = t_next;
                streak += 1;
                if streak >= 3 {
                    h = (2.0 * h).min(max);
                    streak = 0;
                }
                let ratio = Self::x0_ratio(x);
                if trend.is_none() && t >= TREND_T {
                    trend = Some(ratio);
                }
                if ratio < cutoff {
                    return Run { t, steps, finished: true, trend };
                }
            } else {
                streak = 0;
                h *= 0.5;
                if h < cfg.min_step {
                    return Run { t, steps, finished: false, trend };
                }
            }
        }
        Run { t, steps, finished: t >= 1.0, trend }
    }
}

/// Newton on the affine target; returns the final residual.
fn polish(target: &CompiledSystem, x: &mut [Complex64], iters: usize) -> f64 {
    let n = x.len();
    let mut f = vec![ZERO; n];
    let mut j = vec![ZERO; n * n];
    let mut best = x.to_vec();
    target.eval_values(x, &mut f);
    let mut best_res = norm_inf(&f);
    for _ in 0..iters {
        target.eval_affine(x, &mut f, &mut j);
        f.iter_mut().for_each(|v| *v = -*v);
        if !lu_solve_in_place(n, &mut j, &mut f) {
            break;
        }
        let dn = norm_inf(&f);
        x.iter_mut().zip(&f).for_each(|(xi, d)| *xi += d);
        target.eval_values(x, &mut f);
        let res = norm_inf(&f);
        if !res.is_finite() {
            break;
        }
        if res < best_res {
            best_res = res;
            best.copy_from_slice(x);
        }
        if dn <= 1e-15 * (1.0 + norm_inf(x)) {
            break;
        }
    }
    x.copy_from_slice(&best);
    best_res
}

/// Smallest singular value of the affine Jacobian relative to `max(1, σ_max)`.
pub(crate) fn relative_sigma_min(target: &CompiledSystem, x: &[Complex64]) -> f64 {
    let n = x.len();
    let mut f = vec![ZERO; target.len()];
    let mut j = vec![ZERO; target.len() * n];
    target.eval_affine(x, &mut f, &mut j);
    let m = CMatrix::from_row_major(target.len(), n, j).expect("shape");
    match complex_singular_values(&m) {
        Ok(s) if !s.is_empty() => s[s.len() - 1] / s[0].max(1.0),
        _ => 0.0,
    }
}

pub(crate) fn track_homogeneous(
    hom: &Homotopy<'_>,
    start_index: usize,
    start_affine: &[Complex64],
    cfg: &TrackerConfig,
) -> PathResult {
    let attempt = |initial: f64, max: f64| {
        let mut x: Vec<Complex64> = start_affine.to_vec();
        x.push(ONE);
        let s: Complex64 = hom.chart.iter().zip(&x).map(|(a, b)| a * b).sum();
        x.iter_mut().for_each(|v| *v /= s);
        let run = hom.run(&mut x, cfg, initial, max);
        (x, run)
    };
    let (mut x, mut run) = attempt(cfg.initial_step, cfg.max_step);
    let steps = run.steps;
    if !run.finished && !heading_to_infinity(&x, &run) && cfg.failure_policy == super::FailurePolicy::RetrySmallerStep {
        let (x2, run2) = attempt(cfg.initial_step / 8.0, cfg.max_step / 4.0);
        if run2.finished || run2.t > run.t {
            x = x2;
            run = run2;
        }
        run.steps += steps;
    }
    classify(hom.target, start_index, &x, &run, cfg)
}

fn heading_to_infinity(x: &[Complex64], run: &Run) -> bool {
    run.t >= TREND_T && run.trend.is_some_and(|r0| Homotopy::x0_ratio(x) < TREND_DROP * r0)
}

fn classify(target: &CompiledSystem, start_index: usize, xh: &[Complex64], run: &Run, cfg: &TrackerConfig) -> PathResult {
    let n = xh.len() - 1;
    let ratio = Homotopy::x0_ratio(xh);
    let mut x: Vec<Complex64> = xh[..n].iter().map(|v| v / xh[n]).collect();
    let tracked = x.clone();
    let unfinished = |status| PathResult {
        start_index,
        endpoint: tracked.clone(),
        status,
        residual: f64::INFINITY,
        steps: run.steps,
        singular: false,
        t: run.t,
    };
    let finite = x.iter().all(|v| v.re.is_finite() && v.im.is_finite());
    if ratio < 1.0 / cfg.divergence_cutoff || !finite || (!run.finished && heading_to_infinity(xh, run)) {
        return unfinished(PathStatus::Diverged);
    }
    // Paths that stall close to t = 1 still get a chance to land on a (singular) solution.
    if !run.finished && run.t < 1.0 - 1e-3 {
        return unfinished(PathStatus::Failed);
    }
    let residual = polish(target, &mut x, cfg.polish_iters);
    let scale = 1.0 + norm_inf(&tracked);
    let moved = tracked.iter().zip(&x).fold(0.0, |m, (a, b)| f64::max(m, (a - b).norm()));
    if norm_inf(&x) > cfg.divergence_cutoff {
        return unfinished(PathStatus::Diverged);
    }
    if residual >= cfg.endpoint_tol || (!run.finished && moved > 1e-4 * scale) {
        return unfinished(PathStatus::Failed);
    }
    let singular = relative_sigma_min(target, &x) < cfg.singular_tol;
    PathResult { start_index, endpoint: x, status: PathStatus::Converged, residual, steps: run.steps, singular, t: run.t }
}
