//! Eigenvector critical points on the Stiefel, projection and isospectral models.

use serde::{Deserialize, Serialize};

use super::GENERICITY_TOL;
use crate::combinat::{multiset_permutations, subsets_colex};
use crate::error::{Error, Result};
use crate::numkit::{sym_eig, Matrix, SpectralDecomposition};
use crate::random::{random_orthogonal, seeded_rng};
use crate::varieties::{FlagPoint, FlagSignature};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiEigenModel {
    StiefelOrbitReps,
    Projection,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenCritical {
    /// Indices into the ascending eigenvalues of `A`.
    pub subset: Vec<usize>,
    pub eigenvalues: Vec<f64>,
    pub point: FlagPoint,
    /// `trace(A P)`, the sum of the chosen eigenvalues.
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsoCritical {
    /// Block index placed on each eigenvector of `A`.
    pub labels: Vec<usize>,
    pub point: FlagPoint,
    pub objective: f64,
    /// Max deviation of `U σ R X₀ Rᵀ σᵀ Uᵀ` from the point over the sampled `R`.
    pub invariance: f64,
}

/// Eigendecomposition with eigenvalue gaps checked against [`GENERICITY_TOL`].
pub(crate) fn generic_eig(a: &Matrix) -> Result<SpectralDecomposition> {
    if !a.is_square() || !a.is_symmetric() {
        return Err(Error::Contract("matrix must be square and symmetric".into()));
    }
    let eig = sym_eig(a)?;
    let norm = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if norm == 0.0 {
        return Err(Error::Genericity("matrix is zero".into()));
    }
    for w in eig.values.windows(2) {
        if w[1] - w[0] <= GENERICITY_TOL * norm {
            return Err(Error::Genericity(format!("repeated eigenvalue {:.6e}", w[0])));
        }
    }
    let mut vectors = eig.vectors;
    for j in 0..vectors.cols() {
        let mut col = vectors.column(j);
        canonical_sign(&mut col);
        vectors.set_column(j, &col);
    }
    Ok(SpectralDecomposition { values: eig.values, vectors })
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub(crate) fn canonical_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(lead) = v.iter().find(|x| x.abs() > (1.0 - 1e-9) * scale) {
        if *lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn outer_sum(u: &Matrix, cols: &[usize]) -> Matrix {
    let n = u.rows();
    let mut p = Matrix::from_fn(n, n, |i, j| cols.iter().map(|&c| u[(i, c)] * u[(j, c)]).sum());
    for i in 0..n {
        for j in 0..i {
            p[(i, j)] = p[(j, i)];
        }
    }
    p
}

/// All `binom(n, k)` critical points of `trace(Zᵀ A Z)` / `trace(A P)`,
/// one per eigenvector subset in colex order.
pub fn enumerate_multi_eigen(a: &Matrix, k: usize, model: MultiEigenModel) -> Result<Vec<EigenCritical>> {
    let n = a.rows();
    let sig = FlagSignature::grassmannian(k, n)?;
    let eig = generic_eig(a)?;
    Ok(subsets_colex(n, k)
        .into_iter()
        .map(|subset| {
            let eigenvalues: Vec<f64> = subset.iter().map(|&i| eig.values[i]).collect();
            let point = match model {
                MultiEigenModel::StiefelOrbitReps => {
                    FlagPoint::Stiefel { sig: sig.clone(), frame: eig.vectors.select_columns(&subset) }
                }
                MultiEigenModel::Projection => {
                    FlagPoint::Projection { sig: sig.clone(), projections: vec![outer_sum(&eig.vectors, &subset)] }
                }
            };
            EigenCritical { objective: eigenvalues.iter().sum(), subset, eigenvalues, point }
        })
        .collect())
}

/// Block-diagonal orthogonal matrix with independent random blocks.
fn random_block_orthogonal(sig: &FlagSignature, seed: u64) -> Matrix {
    let mut rng = seeded_rng(seed);
    let n = sig.n();
    let mut r = Matrix::zeros(n, n);
    let mut start = 0;
    for size in sig.block_sizes() {
        let q = random_orthogonal(&mut rng, size);
        for i in 0..size {
            for j in 0..size {
                r[(start + i, start + j)] = q[(i, j)];
            }
        }
        start += size;
    }
    r
}

/// One critical point `S = U diag(σ·c) Uᵀ` of `trace(A S)` per coset of the
/// block permutation group, in lexicographic order of the block labels.
/// Each is checked against `samples_per_orbit` seeded block-orthogonal `R`.
pub fn enumerate_iso(
    a: &Matrix,
    sig: &FlagSignature,
    c: &[f64],
    samples_per_orbit: usize,
    seed: u64,
) -> Result<Vec<IsoCritical>> {
    let n = sig.n();
    if a.rows() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.rows() });
    }
    sig.block_values(c)?;
    let eig = generic_eig(a)?;
    let sizes = sig.block_sizes();
    let x0 = Matrix::from_diag(c);
    let samples: Vec<Matrix> = (0..samples_per_orbit).map(|s| random_block_orthogonal(sig, seed.wrapping_add(s as u64))).collect();
    let base_labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b, s)).collect();
    // Position of the first entry of each block inside `c`.
    let offsets: Vec<usize> = sizes.iter().scan(0, |acc, &s| {
        let o = *acc;
        *acc += s;
        Some(o)
    }).collect();
    let mut out = Vec::new();
    for labels in multiset_permutations(&base_labels) {
        // Permutation matrix sending block slots of X₀ to eigenvector positions.
        let mut next = offsets.clone();
        let mut perm = Matrix::zeros(n, n);
        for (pos, &b) in labels.iter().enumerate() {
            perm[(pos, next[b])] = 1.0;
            next[b] += 1;
        }
        let q = &eig.vectors * &perm;
        let s = (&(&q * &x0) * &q.transpose()).symmetrized();
        let invariance = samples
            .iter()
            .map(|r| {
                let qr = &q * r;
                (&(&qr * &x0) * &qr.transpose()).max_abs_diff(&s)
            })
            .fold(0.0, f64::max);
        let objective = (a * &s).trace();
        out.push(IsoCritical {
            labels,
            point: FlagPoint::Isospectral { sig: sig.clone(), spectrum: c.to_vec(), matrix: s },
            objective,
            invariance,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critpoints::{CountFormula, FirstOrderProblem};
    use crate::numkit::RANK_TOL;
    use crate::random::random_symmetric;

    #[test]
    fn diagonal_k1() {
        let a = Matrix::from_diag(&[1.0, 2.0, 3.0]);
        let pts = enumerate_multi_eigen(&a, 1, MultiEigenModel::Projection).unwrap();
        assert_eq!(pts.len(), 3);
        for (i, p) in pts.iter().enumerate() {
            let FlagPoint::Projection { projections, .. } = &p.point else { panic!() };
            let mut e = Matrix::zeros(3, 3);
            e[(i, i)] = 1.0;
            assert!(projections[0].max_abs_diff(&e) < 1e-14);
        }
    }

    #[test]
    fn repeated_eigenvalue_rejected() {
        let a = Matrix::from_diag(&[1.0, 1.0, 3.0]);
        assert!(matches!(enumerate_multi_eigen(&a, 1, MultiEigenModel::Projection), Err(Error::Genericity(_))));
    }

    #[test]
    fn projection_points_certify_and_random_points_fail() {
        let a = random_symmetric(&mut seeded_rng(3), 5);
        let problem = FirstOrderProblem::linear_on_projection_grassmannian(&a, 2).unwrap();
        let pts = enumerate_multi_eigen(&a, 2, MultiEigenModel::Projection).unwrap();
        assert_eq!(pts.len() as u64, CountFormula::LoPgr { n: 5, k: 2 }.evaluate().unwrap());
        for p in &pts {
            let cert = problem.certify_real(&p.point.coordinates(), RANK_TOL).unwrap();
            assert!(cert.pass, "{cert:?}");
            assert!((cert.objective - p.objective).abs() < 1e-10);
        }
        let sig = FlagSignature::grassmannian(2, 5).unwrap();
        let mut rng = seeded_rng(4);
        for _ in 0..20 {
            let x = crate::varieties::random_point(crate::varieties::Model::Projection, &sig, None, &mut rng).unwrap();
            assert!(!problem.certify_real(&x.coordinates(), RANK_TOL).unwrap().pass);
        }
    }

    #[test]
    fn stiefel_reps_certify() {
        let a = random_symmetric(&mut seeded_rng(8), 4);
        let problem = FirstOrderProblem::multi_eigen_stiefel(&a, 2).unwrap();
        for p in enumerate_multi_eigen(&a, 2, MultiEigenModel::StiefelOrbitReps).unwrap() {
            assert!(problem.certify_real(&p.point.coordinates(), RANK_TOL).unwrap().pass);
        }
    }

    #[test]
    fn orbit_components_have_orthogonal_group_dimension() {
        for (n, k) in [(3, 2), (4, 2), (4, 3)] {
            let a = random_symmetric(&mut seeded_rng(n as u64), n);
            let sys = crate::polysys::build_heterogeneous_lagrange(&vec![a.clone(); k]).unwrap();
            for p in enumerate_multi_eigen(&a, k, MultiEigenModel::StiefelOrbitReps).unwrap() {
                let mut x = p.point.coordinates();
                for i in 0..k {
                    for j in i..k {
                        x.push(if i == j { p.eigenvalues[i] } else { 0.0 });
                    }
                }
                assert!(sys.residual_f64(&x).unwrap() < 1e-12);
                let jac = sys.jacobian_real(&x).unwrap();
                let nullity = jac.cols() - crate::numkit::numerical_rank(&jac, RANK_TOL);
                assert_eq!(nullity, k * (k - 1) / 2);
            }
        }
    }

    #[test]
    fn minimum_is_sum_of_smallest_eigenvalues() {
        let a = random_symmetric(&mut seeded_rng(5), 6);
        let pts = enumerate_multi_eigen(&a, 3, MultiEigenModel::Projection).unwrap();
        let ev = sym_eig(&a).unwrap().values;
        let min = pts.iter().map(|p| p.objective).fold(f64::INFINITY, f64::min);
        let max = pts.iter().map(|p| p.objective).fold(f64::NEG_INFINITY, f64::max);
        assert!((min - ev[..3].iter().sum::<f64>()).abs() < 1e-10);
        assert!((max - ev[3..].iter().sum::<f64>()).abs() < 1e-10);
    }

    #[test]
    fn iso_complete_three() {
        let sig = FlagSignature::complete(3).unwrap();
        let c = [3.0, 2.0, 1.0];
        let a = random_symmetric(&mut seeded_rng(1), 3);
        let pts = enumerate_iso(&a, &sig, &c, 5, 9).unwrap();
        assert_eq!(pts.len(), 6);
        let mut obj: Vec<f64> = pts.iter().map(|p| p.objective).collect();
        obj.sort_by(f64::total_cmp);
        assert!(obj.windows(2).all(|w| w[1] - w[0] > 1e-8));
        let problem = FirstOrderProblem::linear_on_isospectral(&a, &sig, &c).unwrap();
        for p in &pts {
            assert!(p.invariance < 1e-10);
            assert!(problem.certify_real(&p.point.coordinates(), RANK_TOL).unwrap().pass);
        }
    }

    #[test]
    fn iso_partial_flag_invariance() {
        let sig: FlagSignature = "1,2:3".parse().unwrap();
        let c = [3.0, 2.0, 1.0];
        let a = random_symmetric(&mut seeded_rng(2), 3);
        let pts = enumerate_iso(&a, &sig, &c, 5, 1).unwrap();
        assert_eq!(pts.len(), 6);
        let sig: FlagSignature = "2:4".parse().unwrap();
        let c = [2.0, 2.0, 1.0, 1.0];
        let a = random_symmetric(&mut seeded_rng(2), 4);
        let pts = enumerate_iso(&a, &sig, &c, 5, 1).unwrap();
        assert_eq!(pts.len(), 6);
        assert!(pts.iter().all(|p| p.invariance < 1e-10));
    }

    #[test]
    fn iso_grassmannian_matches_projection_points() {
        let sig: FlagSignature = "1:2".parse().unwrap();
        let a = random_symmetric(&mut seeded_rng(6), 2);
        let iso = enumerate_iso(&a, &sig, &[1.0, 0.0], 5, 0).unwrap();
        let proj = enumerate_multi_eigen(&a, 1, MultiEigenModel::Projection).unwrap();
        assert_eq!(iso.len(), 2);
        for (s, p) in iso.iter().zip(&proj) {
            let FlagPoint::Isospectral { matrix, .. } = &s.point else { panic!() };
            let FlagPoint::Projection { projections, .. } = &p.point else { panic!() };
            assert!(matrix.max_abs_diff(&projections[0]) < 1e-12);
        }
    }
}
