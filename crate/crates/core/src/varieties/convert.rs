//! Moves between the coordinate models.
//!
//! Direct edges: Stiefel to every other model, Projection to Stiefel and
//! Isospectral, Isospectral to Stiefel. Other requests route through the
//! Stiefel frame; Plücker input is not convertible.

use super::{FlagPoint, FlagSignature, Model, TAU_VAR};
use crate::combinat::subsets_lex;
use crate::error::{Error, Result};
use crate::numkit::{det, orthonormal_complete, sym_eig, Matrix};

/// Converts `p` into `target`; `spectrum` is needed when the target is isospectral.
pub fn convert(p: &FlagPoint, target: Model, spectrum: Option<&[f64]>) -> Result<FlagPoint> {
    let out = match (p, target) {
        (_, t) if t == p.model() && t != Model::Isospectral => return Ok(p.clone()),
        (FlagPoint::Pluecker { .. }, t) => {
            return Err(Error::UnsupportedEdge { from: Model::Pluecker.to_string(), to: t.to_string() })
        }
        (FlagPoint::Stiefel { sig, frame }, Model::Pluecker) => stiefel_to_pluecker(sig, frame)?,
        (FlagPoint::Stiefel { sig, frame }, Model::Projection) => stiefel_to_projection(sig, frame),
        (FlagPoint::Stiefel { sig, frame }, Model::Isospectral) => {
            stiefel_to_isospectral(sig, frame, require_spectrum(spectrum)?)?
        }
        (FlagPoint::Projection { sig, projections }, Model::Isospectral) => {
            projection_to_isospectral(sig, projections, require_spectrum(spectrum)?)?
        }
        (FlagPoint::Projection { sig, projections }, Model::Stiefel) => projection_to_stiefel(sig, projections)?,
        (FlagPoint::Isospectral { sig, spectrum: c, matrix }, Model::Stiefel) => {
            isospectral_to_stiefel(sig, c, matrix)?
        }
        (FlagPoint::Isospectral { spectrum: own, .. }, Model::Isospectral) => {
            let frame = convert(p, Model::Stiefel, None)?;
            return convert(&frame, Model::Isospectral, Some(spectrum.unwrap_or(own)));
        }
        (_, t) => {
            let frame = convert(p, Model::Stiefel, None)?;
            return convert(&frame, t, spectrum);
        }
    };
    check(out)
}

fn require_spectrum(spectrum: Option<&[f64]>) -> Result<&[f64]> {
    spectrum.ok_or_else(|| Error::InvalidSpectrum("isospectral target needs a spectrum".into()))
}

fn check(out: FlagPoint) -> Result<FlagPoint> {
    let residual = out.residual()?;
    if !(residual <= TAU_VAR) {
        return Err(Error::Consistency(format!("{} point has generator residual {residual:.3e}", out.model())));
    }
    Ok(out)
}

fn check_frame(sig: &FlagSignature, frame: &Matrix) -> Result<()> {
    if frame.rows() != sig.n() || frame.cols() != sig.top() {
        return Err(Error::DimensionMismatch { expected: sig.n() * sig.top(), got: frame.rows() * frame.cols() });
    }
    Ok(())
}

/// Maximal minors of the leading `k_s` columns, one block per step.
fn stiefel_to_pluecker(sig: &FlagSignature, frame: &Matrix) -> Result<FlagPoint> {
    check_frame(sig, frame)?;
    let cols: Vec<usize> = (0..sig.top()).collect();
    let coords = sig
        .steps()
        .iter()
        .map(|&k| {
            subsets_lex(sig.n(), k)
                .iter()
                .map(|rows| det(&frame.select_rows(rows).select_columns(&cols[..k])))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(FlagPoint::Pluecker { sig: sig.clone(), coords })
}

/// `Z Zᵀ` for a frame, mirrored so the result is exactly symmetric.
fn gram_outer(z: &Matrix) -> Matrix {
    (z * &z.transpose()).symmetrized()
}

fn stiefel_to_projection(sig: &FlagSignature, frame: &Matrix) -> FlagPoint {
    let projections = sig.steps().iter().map(|&k| gram_outer(&frame.leading_columns(k))).collect();
    FlagPoint::Projection { sig: sig.clone(), projections }
}

fn stiefel_to_isospectral(sig: &FlagSignature, frame: &Matrix, c: &[f64]) -> Result<FlagPoint> {
    check_frame(sig, frame)?;
    sig.block_values(c)?;
    let q = orthonormal_complete(frame)?;
    let s = (&(&q * &Matrix::from_diag(c)) * &q.transpose()).symmetrized();
    Ok(FlagPoint::Isospectral { sig: sig.clone(), spectrum: c.to_vec(), matrix: s })
}

/// `S = b_r Id + Σ_i (b_{i−1} − b_i) P_i` with block values `b_0, …, b_r`.
fn projection_to_isospectral(sig: &FlagSignature, projections: &[Matrix], c: &[f64]) -> Result<FlagPoint> {
    let b = sig.block_values(c)?;
    let n = sig.n();
    // A full flag (k_r = n) has r blocks, not r + 1; the top projection is then Id.
    let last = *b.last().unwrap();
    let mut s = Matrix::identity(n).scale(last);
    for (i, p) in projections.iter().enumerate() {
        let w = b.get(i + 1).map_or(0.0, |&next| b[i] - next);
        s = &s + &p.scale(w);
    }
    Ok(FlagPoint::Isospectral { sig: sig.clone(), spectrum: c.to_vec(), matrix: s.symmetrized() })
}

/// Columns of block i are the eigenvalue-one eigenvectors of `P_i − P_{i−1}`.
fn projection_to_stiefel(sig: &FlagSignature, projections: &[Matrix]) -> Result<FlagPoint> {
    let n = sig.n();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(sig.top());
    let mut prev = Matrix::zeros(n, n);
    let mut prev_k = 0;
    for (p, &k) in projections.iter().zip(sig.steps()) {
        let e = sym_eig(&(p - &prev))?;
        for j in (n - (k - prev_k))..n {
            columns.push(e.vectors.column(j));
        }
        prev = p.clone();
        prev_k = k;
    }
    let frame = Matrix::from_columns(&columns)?;
    let gram = &frame.transpose() * &frame;
    if gram.max_abs_diff(&Matrix::identity(sig.top())) > 1e-8 {
        return Err(Error::Consistency("recovered frame is not orthonormal".into()));
    }
    Ok(FlagPoint::Stiefel { sig: sig.clone(), frame })
}

/// Eigenvectors of `S` grouped by the nearest block value, in block order.
fn isospectral_to_stiefel(sig: &FlagSignature, c: &[f64], s: &Matrix) -> Result<FlagPoint> {
    let b = sig.block_values(c)?;
    let e = sym_eig(s)?;
    let mut groups: Vec<Vec<Vec<f64>>> = vec![Vec::new(); b.len()];
    for (j, &lambda) in e.values.iter().enumerate() {
        let nearest = (0..b.len())
            .min_by(|&x, &y| (b[x] - lambda).abs().total_cmp(&(b[y] - lambda).abs()))
            .expect("at least one block");
        groups[nearest].push(e.vectors.column(j));
    }
    let sizes: Vec<usize> = sig.block_sizes().into_iter().filter(|&s| s > 0).collect();
    for (g, &size) in groups.iter().zip(&sizes) {
        if g.len() != size {
            return Err(Error::Consistency("eigenvalue multiplicities do not match the flag type".into()));
        }
    }
    let columns: Vec<Vec<f64>> = groups.into_iter().flatten().take(sig.top()).collect();
    Ok(FlagPoint::Stiefel { sig: sig.clone(), frame: Matrix::from_columns(&columns)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_stiefel, seeded_rng};

    fn sig(s: &str) -> FlagSignature {
        s.parse().unwrap()
    }

    fn coordinate_frame() -> FlagPoint {
        let frame = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        FlagPoint::stiefel(sig("1,2:3"), frame).unwrap()
    }

    #[test]
    fn coordinate_frame_to_pluecker() {
        match convert(&coordinate_frame(), Model::Pluecker, None).unwrap() {
            FlagPoint::Pluecker { coords, .. } => {
                assert_eq!(coords, vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn coordinate_frame_to_projection() {
        let ps = coordinate_frame().projections().unwrap();
        assert_eq!(ps[0], Matrix::from_diag(&[1.0, 0.0, 0.0]));
        assert_eq!(ps[1], Matrix::from_diag(&[1.0, 1.0, 0.0]));
    }

    #[test]
    fn pluecker_to_projection_is_unsupported() {
        let p = convert(&coordinate_frame(), Model::Pluecker, None).unwrap();
        assert!(matches!(convert(&p, Model::Projection, None), Err(Error::UnsupportedEdge { .. })));
    }

    #[test]
    fn isospectral_target_needs_spectrum() {
        assert!(matches!(convert(&coordinate_frame(), Model::Isospectral, None), Err(Error::InvalidSpectrum(_))));
    }

    #[test]
    fn triangle_commutes() {
        let mut rng = seeded_rng(2);
        for text in ["1,2:3", "1,2:4", "2:4", "1,2,3:4", "1,2,3:3"] {
            let s = sig(text);
            let c = s.generic_spectrum(&mut rng);
            for _ in 0..20 {
                let p = FlagPoint::stiefel(s.clone(), random_stiefel(&mut rng, s.n(), s.top())).unwrap();
                let direct = convert(&p, Model::Isospectral, Some(&c)).unwrap();
                let proj = convert(&p, Model::Projection, None).unwrap();
                let routed = convert(&proj, Model::Isospectral, Some(&c)).unwrap();
                match (direct, routed) {
                    (FlagPoint::Isospectral { matrix: a, .. }, FlagPoint::Isospectral { matrix: b, .. }) => {
                        assert!(a.max_abs_diff(&b) < 1e-10, "{text}");
                    }
                    _ => unreachable!(),
                }
            }
        }
    }

    #[test]
    fn round_trips_preserve_the_flag() {
        let mut rng = seeded_rng(3);
        for text in ["1:3", "1,2:3", "1,2:4", "1,2,3:4"] {
            let s = sig(text);
            let c = s.generic_spectrum(&mut rng);
            for _ in 0..20 {
                let p = FlagPoint::stiefel(s.clone(), random_stiefel(&mut rng, s.n(), s.top())).unwrap();
                let want = p.projections().unwrap();
                for via in [Model::Projection, Model::Isospectral] {
                    let there = convert(&p, via, Some(&c)).unwrap();
                    let back = convert(&there, Model::Stiefel, None).unwrap();
                    for (a, b) in back.projections().unwrap().iter().zip(&want) {
                        assert!(a.max_abs_diff(b) < 1e-10, "{text} via {via}");
                    }
                }
            }
        }
    }
}
