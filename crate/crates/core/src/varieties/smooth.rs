//! Numerical smoothness: generator Jacobian rank against the codimension.

use serde::Serialize;

use super::{generators, FlagPoint, FlagSignature, Model, TAU_VAR};
use crate::error::{Error, Result};
use crate::numkit::numerical_rank;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothnessReport {
    pub model: Model,
    pub ambient: usize,
    pub codim: usize,
    pub rank: usize,
    pub residual: f64,
    pub pass: bool,
}

/// Codimension of the variety cut out by the model's generators.
///
/// The Stiefel model describes the frame manifold itself, and the Plücker
/// model is taken as the affine cone over the product of projective spaces.
pub fn codimension(model: Model, sig: &FlagSignature) -> usize {
    let ambient = sig.ambient(model);
    match model {
        Model::Stiefel => sig.top() * (sig.top() + 1) / 2,
        Model::Projection | Model::Isospectral => ambient - sig.flag_dimension(),
        Model::Pluecker => ambient - sig.flag_dimension() - sig.r(),
    }
}

/// Rank of the generator Jacobian at `point` with relative tolerance `tol`.
pub fn smoothness_check(point: &FlagPoint, tol: f64) -> Result<SmoothnessReport> {
    let model = point.model();
    let sig = point.sig();
    let sys = generators(model, sig, point.spectrum())?;
    let x = point.coordinates();
    let residual = sys.residual_f64(&x)?;
    if !(residual <= TAU_VAR) {
        return Err(Error::OffVariety { residual });
    }
    let jac = sys.jacobian_real(&x)?;
    let rank = numerical_rank(&jac, tol);
    let codim = codimension(model, sig);
    Ok(SmoothnessReport { model, ambient: sig.ambient(model), codim, rank, residual, pass: rank == codim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{Matrix, RANK_TOL};
    use crate::random::seeded_rng;
    use crate::varieties::random_point;

    fn sig(s: &str) -> FlagSignature {
        s.parse().unwrap()
    }

    #[test]
    fn stiefel_coordinate_frame() {
        let frame = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let r = smoothness_check(&FlagPoint::stiefel(sig("2:3"), frame).unwrap(), RANK_TOL).unwrap();
        assert_eq!((r.rank, r.codim, r.pass), (3, 3, true));
    }

    #[test]
    fn stiefel_jacobian_rank_in_4_space() {
        let frame = Matrix::from_fn(4, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        let r = smoothness_check(&FlagPoint::stiefel(sig("2:4"), frame).unwrap(), RANK_TOL).unwrap();
        assert_eq!(r.rank, 3);
    }

    #[test]
    fn coordinate_projection_flag() {
        let s = sig("1,2:3");
        let p = FlagPoint::Projection {
            sig: s,
            projections: vec![Matrix::from_diag(&[1.0, 0.0, 0.0]), Matrix::from_diag(&[1.0, 1.0, 0.0])],
        };
        let r = smoothness_check(&p, RANK_TOL).unwrap();
        assert_eq!((r.ambient, r.rank, r.codim), (12, 9, 9));
    }

    #[test]
    fn diagonal_isospectral_point() {
        let s = sig("1,2:3");
        let c = vec![3.004, 1.997, 1.002];
        let p = FlagPoint::Isospectral { sig: s, spectrum: c.clone(), matrix: Matrix::from_diag(&c) };
        let r = smoothness_check(&p, RANK_TOL).unwrap();
        assert_eq!((r.rank, r.codim), (3, 3));
    }

    #[test]
    fn off_variety_is_rejected() {
        let frame = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let p = FlagPoint::stiefel(sig("2:3"), frame).unwrap();
        assert!(matches!(smoothness_check(&p, RANK_TOL), Err(Error::OffVariety { .. })));
    }

    #[test]
    fn random_points_are_smooth() {
        let mut rng = seeded_rng(11);
        for text in ["1:3", "2:4", "1,2:3", "1,2:4", "1,2,3:4"] {
            let s = sig(text);
            let c = s.generic_spectrum(&mut rng);
            for model in Model::ALL {
                for _ in 0..3 {
                    let p = random_point(model, &s, Some(&c), &mut rng).unwrap();
                    let r = smoothness_check(&p, RANK_TOL).unwrap();
                    assert!(r.pass, "{model} {text}: rank {} codim {}", r.rank, r.codim);
                }
            }
        }
    }
}
