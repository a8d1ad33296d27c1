//! Closed-form critical points of the heterogeneous quadratics problem for two
//! diagonal 3 × 3 matrices.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::polysys::{build_heterogeneous_lagrange, c};

const N: usize = 3;
/// Generated sign patterns above this Lagrange residual are discarded.
const REJECT_TOL: f64 = 1e-8;

fn diagonal(a: &Matrix) -> Result<[f64; N]> {
    if a.rows() != N || a.cols() != N {
        return Err(Error::DimensionMismatch { expected: N, got: a.rows() });
    }
    for i in 0..N {
        for j in 0..N {
            if i != j && a[(i, j)] != 0.0 {
                return Err(Error::Contract("matrix must be diagonal".into()));
            }
        }
    }
    Ok([a[(0, 0)], a[(1, 1)], a[(2, 2)]])
}

/// Lagrange-system vector `(Z column-major, μ₁₁, μ₁₂, μ₂₂)`.
fn pack(z1: [Complex64; N], z2: [Complex64; N], mu: [Complex64; 3]) -> Vec<Complex64> {
    z1.into_iter().chain(z2).chain(mu).collect()
}

/// All 40 critical points as Lagrange-system vectors: first the 24 coordinate
/// solutions `Z₁ = ±e_i, Z₂ = ±e_j`, then the 16 solutions with full support.
pub fn enumerate_hetero_diag_3_2(a1: &Matrix, a2: &Matrix) -> Result<Vec<Vec<Complex64>>> {
    let p = diagonal(a1)?;
    let q = diagonal(a2)?;
    let alpha = p[0] * q[1] - p[0] * q[2] + p[1] * q[2] - p[1] * q[0] + p[2] * q[0] - p[2] * q[1];
    let scale = p.iter().chain(&q).fold(1.0f64, |m, v| m.max(v.abs()));
    if alpha.abs() <= 1e-12 * scale * scale {
        return Err(Error::Degenerate("alpha = 0".into()));
    }
    let lagrange = build_heterogeneous_lagrange(&[a1.clone(), a2.clone()])?;

    let zero = c(0.0);
    let mut out = Vec::with_capacity(40);
    for i in 0..N {
        for j in 0..N {
            if i == j {
                continue;
            }
            for s1 in [1.0, -1.0] {
                for s2 in [1.0, -1.0] {
                    let mut z1 = [zero; N];
                    let mut z2 = [zero; N];
                    z1[i] = c(s1);
                    z2[j] = c(s2);
                    out.push(pack(z1, z2, [c(p[i]), zero, c(q[j])]));
                }
            }
        }
    }

    let sqrt = |v: f64| Complex64::new(v, 0.0).sqrt();
    let mut x = [zero; N];
    let mut y = [zero; N];
    for j in 0..N {
        let (l, m) = match j {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let outer = sqrt(p[m] - p[l] + q[l] - q[m]) / alpha;
        x[j] = outer * sqrt(-(p[l] - p[m]) * (q[j] - q[l]) * (q[j] - q[m]));
        y[j] = outer * sqrt((q[l] - q[m]) * (p[j] - p[l]) * (p[j] - p[m]));
    }
    let q11 = (-p[0] * p[1] * (q[0] - q[1]) + p[0] * p[2] * (q[0] - q[2]) - p[1] * p[2] * (q[1] - q[2])) / alpha;
    let q22 = (q[0] * q[1] * (p[0] - p[1]) - q[0] * q[2] * (p[0] - p[2]) + q[1] * q[2] * (p[1] - p[2])) / alpha;
    let q12 = sqrt(-(p[0] - p[1]) * (p[0] - p[2]) * (p[1] - p[2]) * (q[0] - q[1]) * (q[0] - q[2]) * (q[1] - q[2])) / alpha;

    let mut generic: Vec<Vec<Complex64>> = Vec::with_capacity(16);
    for mask in 0u32..128 {
        let sign = |bit: u32| if mask >> bit & 1 == 1 { -1.0 } else { 1.0 };
        let z1: [Complex64; N] = std::array::from_fn(|j| x[j] * sign(j as u32));
        let z2: [Complex64; N] = std::array::from_fn(|j| y[j] * sign(N as u32 + j as u32));
        let v = pack(z1, z2, [c(q11), q12 * sign(6), c(q22)]);
        if lagrange.residual(&v)? >= REJECT_TOL {
            continue;
        }
        let duplicate = generic.iter().any(|w| w.iter().zip(&v).all(|(a, b)| (a - b).norm() <= 1e-10 * scale));
        if !duplicate {
            generic.push(v);
        }
    }
    if generic.len() != 16 {
        return Err(Error::Genericity(format!("closed form produced {} full-support solutions, expected 16", generic.len())));
    }
    out.extend(generic);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homotopy::canonical_signs;

    fn example() -> (Matrix, Matrix) {
        (Matrix::from_diag(&[1.0, 2.0, 4.0]), Matrix::from_diag(&[1.0, 3.0, 9.0]))
    }

    /// Full-support solutions from the 2 × 2 determinant conditions, solved as
    /// two linear systems (independent of the closed form).
    fn oracle(p: [f64; 3], q: [f64; 3]) -> Vec<Vec<Complex64>> {
        let solve3 = |m: [[f64; 3]; 3], b: [f64; 3]| -> [f64; 3] {
            let mat = Matrix::from_rows(&m.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
            let sol = crate::numkit::lstsq(&mat, &b, 1e-14).unwrap();
            [sol[0], sol[1], sol[2]]
        };
        let [q22, q11, w] = solve3(
            [[p[0], q[0], -1.0], [p[1], q[1], -1.0], [p[2], q[2], -1.0]],
            [p[0] * q[0], p[1] * q[1], p[2] * q[2]],
        );
        let qq = q11 * q22 - w;
        let d: Vec<f64> = p.iter().map(|a| a - q11).collect();
        let wts = solve3([[1.0; 3], [d[0], d[1], d[2]], [d[0] * d[0], d[1] * d[1], d[2] * d[2]]], [1.0, 0.0, qq]);
        let q12 = Complex64::new(qq, 0.0).sqrt();
        let mut out = Vec::new();
        for mask in 0..16u32 {
            let s = |b: u32| if mask >> b & 1 == 1 { -1.0 } else { 1.0 };
            let q12s = q12 * s(3);
            let xs: Vec<Complex64> = (0..3).map(|j| Complex64::new(wts[j], 0.0).sqrt() * s(j as u32)).collect();
            let ys: Vec<Complex64> = (0..3).map(|j| d[j] * xs[j] / q12s).collect();
            out.push(xs.into_iter().chain(ys).chain([c(q11), q12s, c(q22)]).collect());
        }
        out
    }

    #[test]
    fn forty_points_with_small_residual() {
        let (a1, a2) = example();
        let pts = enumerate_hetero_diag_3_2(&a1, &a2).unwrap();
        assert_eq!(pts.len(), 40);
        let sys = build_heterogeneous_lagrange(&[a1, a2]).unwrap();
        for v in &pts {
            assert!(sys.residual(v).unwrap() < 1e-10);
        }
        let coordinate = pts.iter().filter(|v| v[..6].iter().filter(|z| z.norm() > 0.0).count() == 2).count();
        assert_eq!(coordinate, 24);
    }

    #[test]
    fn matches_independent_oracle() {
        let (a1, a2) = example();
        let pts = enumerate_hetero_diag_3_2(&a1, &a2).unwrap();
        let expected = oracle([1.0, 2.0, 4.0], [1.0, 3.0, 9.0]);
        for e in &expected {
            let hit = pts[24..].iter().any(|v| v.iter().zip(e).all(|(a, b)| (a - b).norm() < 1e-9));
            assert!(hit, "oracle point {e:?} missing");
        }
    }

    #[test]
    fn ten_sign_orbits() {
        let (a1, a2) = example();
        let pts = enumerate_hetero_diag_3_2(&a1, &a2).unwrap();
        let mut canon: Vec<Vec<Complex64>> = Vec::new();
        for v in &pts {
            let (cz, _) = canonical_signs(v, 3, 2);
            if !canon.iter().any(|w| w.iter().zip(&cz).all(|(a, b)| (a - b).norm() < 1e-9)) {
                canon.push(cz);
            }
        }
        assert_eq!(canon.len(), 10);
    }

    #[test]
    fn degenerate_alpha() {
        let a = Matrix::from_diag(&[1.0, 2.0, 3.0]);
        assert!(matches!(enumerate_hetero_diag_3_2(&a, &a), Err(Error::Degenerate(_))));
    }
}
