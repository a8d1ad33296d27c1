//! Lagrange and commutator systems for the optimization problems.

use num_complex::Complex64;

use super::{c, PolySystem, Polynomial, VarBlock};
use crate::error::{Error, Result};
use crate::numkit::{lstsq, Matrix};
use crate::random::{random_complex_normal, substream};
use crate::varieties::generators::{frame_var_matrix, isospectral_generators, projection_generators};
use crate::varieties::{sym_index, sym_len, FlagSignature};

fn check_objectives(a_list: &[Matrix]) -> Result<usize> {
    let first = a_list.first().ok_or_else(|| Error::Contract("no objective matrices given".into()))?;
    let n = first.rows();
    for a in a_list {
        if a.rows() != n || a.cols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a.rows().max(a.cols()) });
        }
        if !a.is_symmetric() {
            return Err(Error::Contract("objective matrix is not symmetric".into()));
        }
    }
    Ok(n)
}

/// Lagrange system of `min Σ Z_iᵀ A_i Z_i` over the Stiefel manifold.
///
/// Variables: `Z` (column-major, `nk`) then `mu` (upper triangle of the
/// symmetric multiplier matrix, row-major). Equations: `A_i Z_i − Σ_j μ_ij Z_j`
/// for each column, then the upper triangle of `ZᵀZ − Id`.
pub fn build_heterogeneous_lagrange(a_list: &[Matrix]) -> Result<PolySystem> {
    let n = check_objectives(a_list)?;
    let k = a_list.len();
    if k > n {
        return Err(Error::Contract(format!("k = {k} columns exceed n = {n}")));
    }
    let nz = n * k;
    let nvars = nz + sym_len(k);
    let z = frame_var_matrix(nvars, 0, n, k);
    let mu = |i: usize, j: usize| Polynomial::var(nvars, nz + sym_index(k, i, j));
    let mut polys = Vec::with_capacity(nvars);
    for (i, a) in a_list.iter().enumerate() {
        for row in 0..n {
            let mut p = Polynomial::zero(nvars);
            for col in 0..n {
                if a[(row, col)] != 0.0 {
                    p = &p + &z[col][i].scale(c(a[(row, col)]));
                }
            }
            for j in 0..k {
                p = &p - &(&mu(i, j) * &z[row][j]);
            }
            polys.push(p);
        }
    }
    polys.extend(orthonormality(&z, nvars, n, k));
    let blocks = vec![VarBlock::new("Z", nz), VarBlock::new("mu", sym_len(k))];
    PolySystem::new(blocks, polys, "heterogeneous-lagrange")
}

fn orthonormality(z: &[Vec<Polynomial>], nvars: usize, n: usize, k: usize) -> Vec<Polynomial> {
    let mut out = Vec::with_capacity(sym_len(k));
    for i in 0..k {
        for j in i..k {
            let mut p = (0..n).fold(Polynomial::zero(nvars), |acc, r| &acc + &(&z[r][i] * &z[r][j]));
            if i == j {
                p = &p - &Polynomial::constant(nvars, c(1.0));
            }
            out.push(p);
        }
    }
    out
}

/// Multiplier-free form: strict upper triangle of `B Zᵀ − Z Bᵀ` with
/// `B = [A₁Z₁ … A_kZ_k]`, plus the upper triangle of `ZᵀZ − Id`.
pub fn build_commutator_system(a_list: &[Matrix], n: usize, k: usize) -> Result<PolySystem> {
    let m = check_objectives(a_list)?;
    if m != n {
        return Err(Error::DimensionMismatch { expected: n, got: m });
    }
    if a_list.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: a_list.len() });
    }
    let nvars = n * k;
    let z = frame_var_matrix(nvars, 0, n, k);
    let b: Vec<Vec<Polynomial>> = (0..n)
        .map(|row| {
            (0..k)
                .map(|i| {
                    (0..n).fold(Polynomial::zero(nvars), |acc, col| {
                        let v = a_list[i][(row, col)];
                        if v == 0.0 {
                            acc
                        } else {
                            &acc + &z[col][i].scale(c(v))
                        }
                    })
                })
                .collect()
        })
        .collect();
    let mut polys = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = (0..k).fold(Polynomial::zero(nvars), |acc, l| {
                &(&acc + &(&b[i][l] * &z[j][l])) - &(&z[i][l] * &b[j][l])
            });
            polys.push(p);
        }
    }
    polys.extend(orthonormality(&z, nvars, n, k));
    PolySystem::new(vec![VarBlock::new("Z", nvars)], polys, "commutator")
}

/// Variety model for the linear-objective system.
#[derive(Clone, Debug, PartialEq)]
pub enum LoModel {
    Projection,
    Isospectral { spectrum: Vec<f64> },
}

/// Square Lagrange system for a linear objective on the projection or isospectral model.
#[derive(Clone, Debug)]
pub struct LoSystem {
    /// Equations in `x` (ambient coordinates) then `lambda`.
    pub system: PolySystem,
    /// Full generator set in the same variable space, for on-variety filtering.
    pub generators: PolySystem,
    /// Randomized generators `R·g` in the ambient variables only.
    pub sliced: Vec<Polynomial>,
    /// Constant objective gradient in the ambient coordinates.
    pub gradient: Vec<f64>,
    pub ambient: usize,
    pub multipliers: usize,
}

/// Builds `∇f − λᵀ Jac(R·g) = 0, R·g = 0` with `f = Σ_i trace(C_i X_i)` and a seeded
/// complex `R` of shape `codim × #generators`.
///
/// `objectives` holds one symmetric matrix per matrix block: `r` for the
/// projection model, one for the isospectral model.
pub fn build_lo_system(model: &LoModel, sig: &FlagSignature, objectives: &[Matrix], seed: u64) -> Result<LoSystem> {
    let n = check_objectives(objectives)?;
    if n != sig.n() {
        return Err(Error::DimensionMismatch { expected: sig.n(), got: n });
    }
    let g = match model {
        LoModel::Projection => projection_generators(sig),
        LoModel::Isospectral { spectrum } => isospectral_generators(sig, spectrum)?,
    };
    let blocks = g.blocks().len();
    if objectives.len() != blocks {
        return Err(Error::DimensionMismatch { expected: blocks, got: objectives.len() });
    }
    let ambient = g.nvars();
    let codim = ambient - sig.flag_dimension();
    let nvars = ambient + codim;

    let m = sym_len(n);
    let mut gradient = vec![0.0; ambient];
    for (b, cm) in objectives.iter().enumerate() {
        for i in 0..n {
            for j in i..n {
                gradient[b * m + sym_index(n, i, j)] = if i == j { cm[(i, i)] } else { 2.0 * cm[(i, j)] };
            }
        }
    }

    let mut rng = substream(seed, 0x4c4f);
    let r: Vec<Vec<Complex64>> =
        (0..codim).map(|_| (0..g.len()).map(|_| random_complex_normal(&mut rng)).collect()).collect();
    let sliced: Vec<Polynomial> = r
        .iter()
        .map(|row| row.iter().zip(g.polys()).fold(Polynomial::zero(ambient), |acc, (&w, p)| &acc + &p.scale(w)))
        .collect();

    let lifted: Vec<Polynomial> = sliced.iter().map(|p| p.extend_vars(nvars)).collect();
    let mut polys = Vec::with_capacity(nvars);
    for a in 0..ambient {
        let mut eq = Polynomial::constant(nvars, c(gradient[a]));
        for (l, gl) in lifted.iter().enumerate() {
            eq = &eq - &(&Polynomial::var(nvars, ambient + l) * &gl.derivative(a));
        }
        polys.push(eq);
    }
    polys.extend(lifted);
    let mut all_blocks = g.blocks().to_vec();
    all_blocks.push(VarBlock::new("lambda", codim));
    let origin = match model {
        LoModel::Projection => "lo-projection",
        LoModel::Isospectral { .. } => "lo-isospectral",
    };
    let system = PolySystem::new(all_blocks, polys, origin)?;
    let generators = g.with_extra_blocks(vec![VarBlock::new("lambda", codim)]);
    Ok(LoSystem { system, generators, sliced, gradient, ambient, multipliers: codim })
}

impl LoSystem {
    /// Least-squares multipliers at an ambient point `x`.
    pub fn multipliers_at(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        if x.len() != self.ambient {
            return Err(Error::DimensionMismatch { expected: self.ambient, got: x.len() });
        }
        let (na, nc) = (self.ambient, self.multipliers);
        // Real embedding of the complex system Jac(R·g)ᵀ λ = ∇f.
        let jac: Vec<Vec<Complex64>> =
            self.sliced.iter().map(|p| (0..na).map(|a| p.derivative(a).evaluate_f64(x)).collect()).collect();
        let mut m = Matrix::zeros(2 * na, 2 * nc);
        for a in 0..na {
            for l in 0..nc {
                let v = jac[l][a];
                m[(a, l)] = v.re;
                m[(a, nc + l)] = -v.im;
                m[(na + a, l)] = v.im;
                m[(na + a, nc + l)] = v.re;
            }
        }
        let mut rhs = self.gradient.clone();
        rhs.extend(std::iter::repeat_n(0.0, na));
        let sol = lstsq(&m, &rhs, 1e-12)?;
        Ok((0..nc).map(|l| Complex64::new(sol[l], sol[nc + l])).collect())
    }

    /// Full-system residual at `(x, λ*)` with least-squares multipliers `λ*`.
    pub fn stationarity_residual(&self, x: &[f64]) -> Result<f64> {
        let lambda = self.multipliers_at(x)?;
        let mut full: Vec<Complex64> = x.iter().map(|&v| c(v)).collect();
        full.extend(lambda);
        self.system.residual(&full)
    }
}
