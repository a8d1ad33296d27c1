//! Closed-form critical points and first-order certificates.
//!
//! The enumerators build every critical point of the problems from the
//! spectral data of the input matrices. [`FirstOrderProblem::certify`]
//! checks a candidate independently: the point must satisfy the constraints
//! and the objective gradient must lie in the row span of the constraint
//! Jacobian (a rank test).

pub mod eigen;
pub mod hetero;
pub mod stats;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::combinat::{binomial, factorial, multinomial};
use crate::error::{Error, Result};
use crate::numkit::{complex_singular_values, CMatrix, Matrix};
use crate::polysys::{c, PolySystem, Polynomial, VarBlock};
use crate::varieties::generators::{
    frame_var_matrix, isospectral_generators, projection_generators, stiefel_generators,
};
use crate::varieties::{sym_index, sym_len, FlagSignature, TAU_VAR};

pub use eigen::{enumerate_iso, enumerate_multi_eigen, EigenCritical, IsoCritical, MultiEigenModel};
pub use hetero::enumerate_hetero_diag_3_2;
pub use stats::{cca_residual, CaMatrix, CaPair, CcaPoint, enumerate_ca, enumerate_cca, CaMode, CaPoints};

/// Eigenvalue and singular-value gaps must exceed this times the spectral norm.
pub const GENERICITY_TOL: f64 = 1e-8;

/// A point with the outcome of the first-order test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalPointCertificate {
    pub point: PointRepr,
    /// Max constraint value at the point.
    pub residual: f64,
    pub rank_jacobian: usize,
    pub rank_augmented: usize,
    /// `rank [Jac g; ∇f] − rank Jac g`.
    pub rank_gap: usize,
    pub pass: bool,
    pub objective: f64,
}

/// Real points serialize as plain arrays, complex ones as `{re, im}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointRepr {
    Real(Vec<f64>),
    Complex { re: Vec<f64>, im: Vec<f64> },
}

impl PointRepr {
    pub fn from_complex(x: &[Complex64]) -> Self {
        if x.iter().all(|z| z.im == 0.0) {
            PointRepr::Real(x.iter().map(|z| z.re).collect())
        } else {
            PointRepr::Complex { re: x.iter().map(|z| z.re).collect(), im: x.iter().map(|z| z.im).collect() }
        }
    }

    pub fn to_complex(&self) -> Result<Vec<Complex64>> {
        match self {
            PointRepr::Real(v) => Ok(v.iter().map(|&r| c(r)).collect()),
            PointRepr::Complex { re, im } => {
                if re.len() != im.len() {
                    return Err(Error::DimensionMismatch { expected: re.len(), got: im.len() });
                }
                Ok(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect())
            }
        }
    }
}

fn complex_rank(m: &CMatrix, tol: f64) -> Result<usize> {
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(0);
    }
    let s = complex_singular_values(m)?;
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > tol * smax).count())
}

/// Ranks of `Jac g` and `[Jac g; ∇f]`. With a known codimension the Jacobian
/// rank is capped there, so points slightly off the variety (where the
/// Jacobian gains rank) still show a gap when the gradient is not normal.
fn rank_pair(jac: &CMatrix, grad: &[Complex64], codim: Option<usize>, tol: f64) -> Result<(usize, usize)> {
    let mut rows = jac.to_rows();
    rows.push(grad.to_vec());
    let aug = CMatrix::from_rows(&rows)?;
    let rj = complex_rank(jac, tol)?;
    let ra = complex_rank(&aug, tol)?;
    Ok(match codim {
        Some(c) => {
            let rj = rj.min(c);
            (rj, ra.min(rj + 1))
        }
        None => (rj, ra),
    })
}

/// Low-level first-order test at a real point on the constraint set.
///
/// Errors with [`Error::OffVariety`] when the constraint residual exceeds
/// [`TAU_VAR`]; the certificate's objective field is left at 0.
pub fn verify_first_order(
    gradient: &[f64],
    constraints: &PolySystem,
    point: &[f64],
    tol: f64,
) -> Result<CriticalPointCertificate> {
    if gradient.len() != constraints.nvars() {
        return Err(Error::DimensionMismatch { expected: constraints.nvars(), got: gradient.len() });
    }
    let residual = constraints.residual_f64(point)?;
    if !(residual <= TAU_VAR) {
        return Err(Error::OffVariety { residual });
    }
    let jac = constraints.jacobian_real(point)?.to_complex();
    let grad: Vec<Complex64> = gradient.iter().map(|&g| c(g)).collect();
    let (rj, ra) = rank_pair(&jac, &grad, None, tol)?;
    Ok(CriticalPointCertificate {
        point: PointRepr::Real(point.to_vec()),
        residual,
        rank_jacobian: rj,
        rank_augmented: ra,
        rank_gap: ra - rj,
        pass: ra == rj,
        objective: 0.0,
    })
}

/// A polynomial objective over a constraint set with known codimension.
#[derive(Clone, Debug)]
pub struct FirstOrderProblem {
    pub name: String,
    pub constraints: PolySystem,
    pub objective: Polynomial,
    pub codim: Option<usize>,
}

impl FirstOrderProblem {
    pub fn new(name: impl Into<String>, constraints: PolySystem, objective: Polynomial, codim: Option<usize>) -> Result<Self> {
        if objective.nvars() != constraints.nvars() {
            return Err(Error::DimensionMismatch { expected: constraints.nvars(), got: objective.nvars() });
        }
        Ok(Self { name: name.into(), constraints, objective, codim })
    }

    pub fn nvars(&self) -> usize {
        self.constraints.nvars()
    }

    pub fn gradient(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.nvars()).map(|j| self.objective.derivative(j).evaluate(x)).collect()
    }

    /// Certificate at a (possibly complex, possibly off-variety) point; off-variety points fail.
    pub fn certify(&self, x: &[Complex64], tol: f64) -> Result<CriticalPointCertificate> {
        let residual = self.constraints.residual(x)?;
        let jac = self.constraints.jacobian_at(x)?;
        let (rj, ra) = rank_pair(&jac, &self.gradient(x), self.codim, tol)?;
        let pass = residual <= TAU_VAR && ra == rj;
        Ok(CriticalPointCertificate {
            point: PointRepr::from_complex(x),
            residual,
            rank_jacobian: rj,
            rank_augmented: ra,
            rank_gap: ra - rj,
            pass,
            objective: self.objective.evaluate(x).re,
        })
    }

    pub fn certify_real(&self, x: &[f64], tol: f64) -> Result<CriticalPointCertificate> {
        let xc: Vec<Complex64> = x.iter().map(|&v| c(v)).collect();
        self.certify(&xc, tol)
    }

    /// `trace(A P)` over the projection Grassmannian `pGr(k, n)`.
    pub fn linear_on_projection_grassmannian(a: &Matrix, k: usize) -> Result<Self> {
        let sig = FlagSignature::grassmannian(k, square_dim(a)?)?;
        let g = projection_generators(&sig);
        let f = sym_linear_objective(a, g.nvars(), 0);
        let codim = sig.ambient_projection() - sig.flag_dimension();
        Self::new("lo-pgr", g, f, Some(codim))
    }

    /// `trace(Zᵀ A Z)` over the Stiefel manifold `V_{k,n}`.
    pub fn multi_eigen_stiefel(a: &Matrix, k: usize) -> Result<Self> {
        let n = square_dim(a)?;
        Self::heterogeneous(&vec![a.clone(); k]).map(|p| Self { name: "multi-eigen".into(), ..p }).and_then(|p| {
            if k > n {
                Err(Error::Contract(format!("k = {k} exceeds n = {n}")))
            } else {
                Ok(p)
            }
        })
    }

    /// `Σ Z_iᵀ A_i Z_i` over the Stiefel manifold.
    pub fn heterogeneous(a_list: &[Matrix]) -> Result<Self> {
        let n = square_dim(a_list.first().ok_or_else(|| Error::Contract("no matrices given".into()))?)?;
        let k = a_list.len();
        let sig = FlagSignature::grassmannian(k, n)?;
        let g = stiefel_generators(&sig);
        let nvars = g.nvars();
        let z = frame_var_matrix(nvars, 0, n, k);
        let mut f = Polynomial::zero(nvars);
        for (i, a) in a_list.iter().enumerate() {
            if a.rows() != n || a.cols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: a.rows() });
            }
            for r in 0..n {
                for s in 0..n {
                    if a[(r, s)] != 0.0 {
                        f = &f + &(&z[r][i] * &z[s][i]).scale(c(a[(r, s)]));
                    }
                }
            }
        }
        Self::new("heterogeneous", g, f, Some(k * (k + 1) / 2))
    }

    /// `trace(A S)` over the isospectral model.
    pub fn linear_on_isospectral(a: &Matrix, sig: &FlagSignature, spectrum: &[f64]) -> Result<Self> {
        let g = isospectral_generators(sig, spectrum)?;
        let f = sym_linear_objective(a, g.nvars(), 0);
        let codim = sig.ambient_isospectral() - sig.flag_dimension();
        Self::new("lo-iso", g, f, Some(codim))
    }

    /// `‖A − S‖²_F` over the isospectral model.
    pub fn distance_on_isospectral(a: &Matrix, sig: &FlagSignature, spectrum: &[f64]) -> Result<Self> {
        let n = square_dim(a)?;
        let g = isospectral_generators(sig, spectrum)?;
        let nvars = g.nvars();
        let mut f = Polynomial::zero(nvars);
        for i in 0..n {
            for j in i..n {
                let d = &Polynomial::constant(nvars, c(a[(i, j)])) - &Polynomial::var(nvars, sym_index(n, i, j));
                let w = if i == j { 1.0 } else { 2.0 };
                f = &f + &(&d * &d).scale(c(w));
            }
        }
        let codim = sig.ambient_isospectral() - sig.flag_dimension();
        Self::new("ed-iso", g, f, Some(codim))
    }

    /// `trace(Uᵀ A V)` over `V_{k,n} × V_{k,p}`; variables `U` then `V`, column-major.
    pub fn ca_pairs(a: &Matrix, k: usize) -> Result<Self> {
        let (n, p) = (a.rows(), a.cols());
        let nvars = n * k + p * k;
        let u = frame_var_matrix(nvars, 0, n, k);
        let v = frame_var_matrix(nvars, n * k, p, k);
        let mut polys = orthonormality_polys(&u, nvars, k);
        polys.extend(orthonormality_polys(&v, nvars, k));
        let mut f = Polynomial::zero(nvars);
        for j in 0..k {
            for r in 0..n {
                for s in 0..p {
                    f = &f + &(&u[r][j] * &v[s][j]).scale(c(a[(r, s)]));
                }
            }
        }
        let g = PolySystem::new(vec![VarBlock::new("U", n * k), VarBlock::new("V", p * k)], polys, "ca-pairs")?;
        Self::new("ca-pairs", g, f, Some(k * (k + 1)))
    }

    /// `trace(A M)` over `p × n` matrices with `M Mᵀ ∈ pGr(k, p)`; `M` row-major.
    ///
    /// Constraints: every entry of `M Mᵀ M − M` and `trace(M Mᵀ) − k`.
    pub fn ca_matrix(a: &Matrix, k: usize) -> Result<Self> {
        let (n, p) = (a.rows(), a.cols());
        let nvars = p * n;
        let m: Vec<Vec<Polynomial>> =
            (0..p).map(|r| (0..n).map(|s| Polynomial::var(nvars, r * n + s)).collect()).collect();
        let mt: Vec<Vec<Polynomial>> = (0..n).map(|s| (0..p).map(|r| m[r][s].clone()).collect()).collect();
        let mmt = crate::varieties::generators::poly_matmul(&m, &mt, nvars);
        let mmtm = crate::varieties::generators::poly_matmul(&mmt, &m, nvars);
        let mut polys = Vec::with_capacity(nvars + 1);
        for r in 0..p {
            for s in 0..n {
                polys.push(&mmtm[r][s] - &m[r][s]);
            }
        }
        let tr = (0..p).fold(Polynomial::zero(nvars), |acc, r| &acc + &mmt[r][r]);
        polys.push(&tr - &Polynomial::constant(nvars, c(k as f64)));
        let mut f = Polynomial::zero(nvars);
        for r in 0..p {
            for s in 0..n {
                if a[(s, r)] != 0.0 {
                    f = &f + &m[r][s].scale(c(a[(s, r)]));
                }
            }
        }
        let dim = (n + p) * k - (3 * k * k + k) / 2;
        let g = PolySystem::new(vec![VarBlock::new("M", nvars)], polys, "ca-matrix")?;
        Self::new("ca-matrix", g, f, Some(nvars - dim))
    }
}

impl FirstOrderProblem {
    /// `uᵀ A v` subject to `uᵀu = vᵀv = 1` and, for every earlier pair
    /// `(u_j, v_j)`, `uᵀu_j = uᵀA v_j = vᵀAᵀu_j = vᵀv_j = 0`. Variables `u` then `v`.
    pub fn cca_column(a: &Matrix, earlier_u: &[Vec<f64>], earlier_v: &[Vec<f64>]) -> Result<Self> {
        let (p, q) = (a.rows(), a.cols());
        if earlier_u.len() != earlier_v.len() {
            return Err(Error::DimensionMismatch { expected: earlier_u.len(), got: earlier_v.len() });
        }
        let nvars = p + q;
        let u: Vec<Polynomial> = (0..p).map(|i| Polynomial::var(nvars, i)).collect();
        let v: Vec<Polynomial> = (0..q).map(|i| Polynomial::var(nvars, p + i)).collect();
        let linear = |vars: &[Polynomial], w: &[f64]| {
            vars.iter().zip(w).fold(Polynomial::zero(nvars), |acc, (x, &c0)| &acc + &x.scale(c(c0)))
        };
        let one = Polynomial::constant(nvars, c(1.0));
        let sq = |vars: &[Polynomial]| vars.iter().fold(Polynomial::zero(nvars), |acc, x| &acc + &(x * x));
        let mut polys = vec![&sq(&u) - &one, &sq(&v) - &one];
        let at = a.transpose();
        for (uj, vj) in earlier_u.iter().zip(earlier_v) {
            if uj.len() != p || vj.len() != q {
                return Err(Error::DimensionMismatch { expected: p, got: uj.len() });
            }
            polys.push(linear(&u, uj));
            polys.push(linear(&u, &a.mul_vec(vj)?));
            polys.push(linear(&v, &at.mul_vec(uj)?));
            polys.push(linear(&v, vj));
        }
        let mut f = Polynomial::zero(nvars);
        for r in 0..p {
            for s in 0..q {
                if a[(r, s)] != 0.0 {
                    f = &f + &(&u[r] * &v[s]).scale(c(a[(r, s)]));
                }
            }
        }
        let g = PolySystem::new(vec![VarBlock::new("u", p), VarBlock::new("v", q)], polys, "cca-column")?;
        Self::new("cca-column", g, f, None)
    }
}

/// Certifies every column of a canonical correlation pair in turn, each with
/// the earlier columns fixed. The result carries the worst column.
pub fn certify_cca(a: &Matrix, u: &Matrix, v: &Matrix, tol: f64) -> Result<CriticalPointCertificate> {
    if u.cols() != v.cols() || u.rows() != a.rows() || v.rows() != a.cols() {
        return Err(Error::DimensionMismatch { expected: a.rows(), got: u.rows() });
    }
    let k = u.cols();
    let point: Vec<f64> = (0..k).flat_map(|j| u.column(j)).chain((0..k).flat_map(|j| v.column(j))).collect();
    let mut out = CriticalPointCertificate {
        point: PointRepr::Real(point),
        residual: 0.0,
        rank_jacobian: 0,
        rank_augmented: 0,
        rank_gap: 0,
        pass: true,
        objective: 0.0,
    };
    let (us, vs): (Vec<Vec<f64>>, Vec<Vec<f64>>) = (0..k).map(|j| (u.column(j), v.column(j))).unzip();
    for i in 0..k {
        let problem = FirstOrderProblem::cca_column(a, &us[..i], &vs[..i])?;
        let x: Vec<f64> = us[i].iter().chain(&vs[i]).copied().collect();
        let cert = problem.certify_real(&x, tol)?;
        if cert.rank_gap >= out.rank_gap {
            out.rank_jacobian = cert.rank_jacobian;
            out.rank_augmented = cert.rank_augmented;
            out.rank_gap = cert.rank_gap;
        }
        out.residual = out.residual.max(cert.residual);
        out.pass &= cert.pass;
        out.objective += cert.objective;
    }
    Ok(out)
}

/// Serializable description of a problem to certify points against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    /// Points: upper triangle of `P`, row-major.
    LoPgr { a: Matrix, k: usize },
    /// Points: `Z` column-major.
    MultiEigen { a: Matrix, k: usize },
    /// Points: upper triangle of `S`, row-major.
    LoIso { a: Matrix, sig: FlagSignature, spectrum: Vec<f64> },
    EdIso { a: Matrix, sig: FlagSignature, spectrum: Vec<f64> },
    /// Points: `Z` column-major, optionally followed by the multipliers.
    Heterogeneous { a: Vec<Matrix> },
    /// Points: `M` row-major.
    CaMatrix { a: Matrix, k: usize },
    /// Points: `U` then `V`, column-major.
    CaPairs { a: Matrix, k: usize },
    /// Points: `U` then `V`, column-major.
    Cca { a: Matrix, k: usize },
}

impl ProblemSpec {
    pub fn problem(&self) -> Result<Option<FirstOrderProblem>> {
        Ok(Some(match self {
            ProblemSpec::LoPgr { a, k } => FirstOrderProblem::linear_on_projection_grassmannian(a, *k)?,
            ProblemSpec::MultiEigen { a, k } => FirstOrderProblem::multi_eigen_stiefel(a, *k)?,
            ProblemSpec::LoIso { a, sig, spectrum } => FirstOrderProblem::linear_on_isospectral(a, sig, spectrum)?,
            ProblemSpec::EdIso { a, sig, spectrum } => FirstOrderProblem::distance_on_isospectral(a, sig, spectrum)?,
            ProblemSpec::Heterogeneous { a } => FirstOrderProblem::heterogeneous(a)?,
            ProblemSpec::CaMatrix { a, k } => FirstOrderProblem::ca_matrix(a, *k)?,
            ProblemSpec::CaPairs { a, k } => FirstOrderProblem::ca_pairs(a, *k)?,
            ProblemSpec::Cca { .. } => return Ok(None),
        }))
    }

    pub fn certify(&self, x: &[Complex64], tol: f64) -> Result<CriticalPointCertificate> {
        if let ProblemSpec::Cca { a, k } = self {
            let (p, q) = (a.rows(), a.cols());
            if x.len() != (p + q) * k {
                return Err(Error::DimensionMismatch { expected: (p + q) * k, got: x.len() });
            }
            if x.iter().any(|z| z.im != 0.0) {
                return Err(Error::Contract("canonical correlation points must be real".into()));
            }
            let re: Vec<f64> = x.iter().map(|z| z.re).collect();
            let u = Matrix::from_fn(p, *k, |i, j| re[j * p + i]);
            let v = Matrix::from_fn(q, *k, |i, j| re[p * k + j * q + i]);
            return certify_cca(a, &u, &v, tol);
        }
        let problem = self.problem()?.expect("non-cca problem");
        let n = problem.nvars();
        if x.len() < n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        if x.len() > n && !matches!(self, ProblemSpec::Heterogeneous { .. }) {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        problem.certify(&x[..n], tol)
    }
}

fn square_dim(a: &Matrix) -> Result<usize> {
    if !a.is_square() {
        return Err(Error::Contract("matrix must be square".into()));
    }
    if !a.is_symmetric() {
        return Err(Error::Contract("matrix must be symmetric".into()));
    }
    Ok(a.rows())
}

/// `trace(A X)` for the symmetric variable matrix stored from `offset`.
pub(crate) fn sym_linear_objective(a: &Matrix, nvars: usize, offset: usize) -> Polynomial {
    let n = a.rows();
    let mut f = Polynomial::zero(nvars);
    for i in 0..n {
        for j in i..n {
            let w = if i == j { a[(i, i)] } else { 2.0 * a[(i, j)] };
            if w != 0.0 {
                f = &f + &Polynomial::var(nvars, offset + sym_index(n, i, j)).scale(c(w));
            }
        }
    }
    debug_assert!(offset + sym_len(n) <= nvars);
    f
}

fn orthonormality_polys(z: &[Vec<Polynomial>], nvars: usize, k: usize) -> Vec<Polynomial> {
    let mut out = Vec::new();
    for i in 0..k {
        for j in i..k {
            let mut p = z.iter().fold(Polynomial::zero(nvars), |acc, row| &acc + &(&row[i] * &row[j]));
            if i == j {
                p = &p - &Polynomial::constant(nvars, c(1.0));
            }
            out.push(p);
        }
    }
    out
}

/// Closed-form critical point counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum CountFormula {
    /// `binom(n, k)` orbit components of the multi-eigenvector problem.
    MultiEigenGr { n: u64, k: u64 },
    /// LO degree of `pGr(k, n)`: `binom(n, k)`.
    LoPgr { n: u64, k: u64 },
    /// Multinomial `n! / ∏ (k_i − k_{i−1})!` for the isospectral model.
    LoIso { sig: FlagSignature },
    /// `binom(min(p,q), k) · k! · 2^k`.
    Cca { p: u64, q: u64, k: u64 },
    /// `binom(n, k)` for the matrix form of correspondence analysis.
    Ca { n: u64, k: u64 },
    /// `8 Σ_{j=1}^{n−1} j²`.
    HeteroK2Conjecture { n: u64 },
}

impl CountFormula {
    pub fn evaluate(&self) -> Result<u64> {
        let overflow = || Error::Overflow("count formula".into());
        let check_k = |n: u64, k: u64| {
            if k == 0 || k > n {
                Err(Error::Contract(format!("need 1 <= k <= {n}, got {k}")))
            } else {
                Ok(())
            }
        };
        match self {
            CountFormula::MultiEigenGr { n, k } | CountFormula::LoPgr { n, k } | CountFormula::Ca { n, k } => {
                check_k(*n, *k)?;
                binomial(*n, *k).ok_or_else(overflow)
            }
            CountFormula::LoIso { sig } => {
                let parts: Vec<u64> = sig.block_sizes().iter().map(|&s| s as u64).collect();
                multinomial(&parts).ok_or_else(overflow)
            }
            CountFormula::Cca { p, q, k } => {
                let m = (*p).min(*q);
                check_k(m, *k)?;
                let pow = 1u64.checked_shl(u32::try_from(*k).map_err(|_| overflow())?).ok_or_else(overflow)?;
                binomial(m, *k)
                    .and_then(|b| b.checked_mul(factorial(*k)?))
                    .and_then(|b| b.checked_mul(pow))
                    .ok_or_else(overflow)
            }
            CountFormula::HeteroK2Conjecture { n } => {
                if *n < 2 {
                    return Err(Error::Contract("need n >= 2".into()));
                }
                (1..*n)
                    .try_fold(0u64, |acc, j| acc.checked_add(j.checked_mul(j)?))
                    .and_then(|s| s.checked_mul(8))
                    .ok_or_else(overflow)
            }
        }
    }
}

pub fn count_formula(f: &CountFormula) -> Result<u64> {
    f.evaluate()
}
