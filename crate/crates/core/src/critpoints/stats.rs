//! Canonical correlation and correspondence analysis critical points.

use serde::{Deserialize, Serialize};

use super::GENERICITY_TOL;
use crate::combinat::{permutations, subsets_colex};
use crate::error::{Error, Result};
use crate::numkit::{svd, Matrix, SvdFactors};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CcaPoint {
    /// Singular-triple index placed in each column.
    pub triples: Vec<usize>,
    /// Sign applied to each column pair.
    pub signs: Vec<i8>,
    pub u: Matrix,
    pub v: Matrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaMode {
    OrbitReps,
    MatrixForm,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaPair {
    pub subset: Vec<usize>,
    pub u: Matrix,
    pub v: Matrix,
    /// `trace(Uᵀ A V)`.
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaMatrix {
    pub subset: Vec<usize>,
    /// `M = V_S U_Sᵀ`, `p × n`.
    pub m: Matrix,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", content = "points", rename_all = "snake_case")]
pub enum CaPoints {
    OrbitReps(Vec<CaPair>),
    MatrixForm(Vec<CaMatrix>),
}

impl CaPoints {
    pub fn len(&self) -> usize {
        match self {
            CaPoints::OrbitReps(v) => v.len(),
            CaPoints::MatrixForm(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// SVD with distinct nonzero singular values.
fn generic_svd(a: &Matrix) -> Result<SvdFactors> {
    let f = svd(a)?;
    let norm = f.singulars.first().copied().unwrap_or(0.0);
    if norm == 0.0 {
        return Err(Error::Genericity("matrix is zero".into()));
    }
    for w in f.singulars.windows(2) {
        if w[0] - w[1] <= GENERICITY_TOL * norm {
            return Err(Error::Genericity(format!("repeated singular value {:.6e}", w[0])));
        }
    }
    if f.singulars.last().is_some_and(|&s| s <= GENERICITY_TOL * norm) {
        return Err(Error::Genericity("zero singular value".into()));
    }
    Ok(f)
}

fn check_k(k: usize, m: usize) -> Result<()> {
    if k == 0 || k > m {
        return Err(Error::Contract(format!("need 1 <= k <= {m}, got {k}")));
    }
    Ok(())
}

/// All `binom(min(p,q), k) · k! · 2^k` critical pairs: subsets in colex order,
/// then permutations in lexicographic order, then sign masks.
pub fn enumerate_cca(a: &Matrix, k: usize) -> Result<Vec<CcaPoint>> {
    let m = a.rows().min(a.cols());
    check_k(k, m)?;
    let f = generic_svd(a)?;
    let perms = permutations(k);
    let mut out = Vec::new();
    for subset in subsets_colex(m, k) {
        for perm in &perms {
            let triples: Vec<usize> = perm.iter().map(|&i| subset[i]).collect();
            for mask in 0u32..(1 << k) {
                let signs: Vec<i8> = (0..k).map(|j| if mask >> j & 1 == 1 { -1 } else { 1 }).collect();
                let mut u = f.left.select_columns(&triples);
                let mut v = f.right.select_columns(&triples);
                for (j, &s) in signs.iter().enumerate() {
                    if s < 0 {
                        u.set_column(j, &u.column(j).iter().map(|x| -x).collect::<Vec<_>>());
                        v.set_column(j, &v.column(j).iter().map(|x| -x).collect::<Vec<_>>());
                    }
                }
                out.push(CcaPoint { triples: triples.clone(), signs, u, v });
            }
        }
    }
    Ok(out)
}

/// Max violation of orthonormality of `U`, `V` and of `A vᵢ = λᵢ uᵢ`,
/// `Aᵀ uᵢ = ηᵢ vᵢ` with the least-squares scalars.
pub fn cca_residual(a: &Matrix, u: &Matrix, v: &Matrix) -> Result<f64> {
    if u.cols() != v.cols() || u.rows() != a.rows() || v.rows() != a.cols() {
        return Err(Error::DimensionMismatch { expected: a.rows(), got: u.rows() });
    }
    let k = u.cols();
    let eye = Matrix::identity(k);
    let mut worst = (&u.transpose() * u).max_abs_diff(&eye).max((&v.transpose() * v).max_abs_diff(&eye));
    let at = a.transpose();
    for i in 0..k {
        let (ui, vi) = (u.column(i), v.column(i));
        for (map, src, dst) in [(a, &vi, &ui), (&at, &ui, &vi)] {
            let img = map.mul_vec(src)?;
            let nd: f64 = dst.iter().map(|x| x * x).sum();
            let lambda = img.iter().zip(dst).map(|(x, y)| x * y).sum::<f64>() / nd.max(f64::MIN_POSITIVE);
            let r = img.iter().zip(dst).fold(0.0f64, |m, (x, y)| m.max((x - lambda * y).abs()));
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// Correspondence analysis for `A` of size `n × p` with `p > n`: one orbit
/// representative `(U_S, V_S)` or one matrix `M = V_S U_Sᵀ` per subset `S`.
pub fn enumerate_ca(a: &Matrix, k: usize, mode: CaMode) -> Result<CaPoints> {
    let (n, p) = (a.rows(), a.cols());
    if p <= n {
        return Err(Error::Contract(format!("need p > n, got n = {n}, p = {p}")));
    }
    check_k(k, n)?;
    let f = generic_svd(a)?;
    let subsets = subsets_colex(n, k);
    let objective = |s: &[usize]| s.iter().map(|&i| f.singulars[i]).sum::<f64>();
    Ok(match mode {
        CaMode::OrbitReps => CaPoints::OrbitReps(
            subsets
                .into_iter()
                .map(|s| CaPair {
                    u: f.left.select_columns(&s),
                    v: f.right.select_columns(&s),
                    objective: objective(&s),
                    subset: s,
                })
                .collect(),
        ),
        CaMode::MatrixForm => CaPoints::MatrixForm(
            subsets
                .into_iter()
                .map(|s| CaMatrix {
                    m: &f.right.select_columns(&s) * &f.left.select_columns(&s).transpose(),
                    objective: objective(&s),
                    subset: s,
                })
                .collect(),
        ),
    })
}
