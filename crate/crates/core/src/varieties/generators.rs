//! Defining polynomials of each coordinate model.

use std::collections::BTreeSet;

use num_complex::Complex64;

use super::{sym_index, sym_len, FlagSignature, Model};
use crate::combinat::{sort_with_sign, subsets_lex};
use crate::error::{Error, Result};
use crate::polysys::{c, PolySystem, Polynomial, VarBlock};

pub(crate) type PolyMatrix = Vec<Vec<Polynomial>>;

pub(crate) fn poly_matmul(a: &PolyMatrix, b: &PolyMatrix, nvars: usize) -> PolyMatrix {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    (0..inner).fold(Polynomial::zero(nvars), |acc, l| &acc + &(&row[l] * &b[l][j]))
                })
                .collect()
        })
        .collect()
}

pub(crate) fn poly_sub_scaled_identity(a: &PolyMatrix, s: f64, nvars: usize) -> PolyMatrix {
    let mut out = a.clone();
    for (i, row) in out.iter_mut().enumerate() {
        row[i] = &row[i] - &Polynomial::constant(nvars, c(s));
    }
    out
}

/// Symmetric matrix whose upper triangle is the variables `offset..offset + n(n+1)/2`.
pub(crate) fn sym_var_matrix(nvars: usize, offset: usize, n: usize) -> PolyMatrix {
    (0..n)
        .map(|i| (0..n).map(|j| Polynomial::var(nvars, offset + sym_index(n, i, j))).collect())
        .collect()
}

/// `n × k` matrix of variables stored column-major from `offset`.
pub(crate) fn frame_var_matrix(nvars: usize, offset: usize, n: usize, k: usize) -> PolyMatrix {
    (0..n).map(|i| (0..k).map(|j| Polynomial::var(nvars, offset + j * n + i)).collect()).collect()
}

pub(crate) fn upper_entries(m: PolyMatrix) -> Vec<Polynomial> {
    let mut out = Vec::new();
    for (i, row) in m.into_iter().enumerate() {
        out.extend(row.into_iter().skip(i));
    }
    out
}

fn trace(m: &PolyMatrix, nvars: usize) -> Polynomial {
    m.iter().enumerate().fold(Polynomial::zero(nvars), |acc, (i, row)| &acc + &row[i])
}

/// Generator system of `model` for `sig`; `spectrum` is required for the isospectral model.
pub fn generators(model: Model, sig: &FlagSignature, spectrum: Option<&[f64]>) -> Result<PolySystem> {
    match model {
        Model::Stiefel => Ok(stiefel_generators(sig)),
        Model::Projection => Ok(projection_generators(sig)),
        Model::Isospectral => {
            let c = spectrum.ok_or_else(|| Error::InvalidSpectrum("isospectral model needs a spectrum".into()))?;
            isospectral_generators(sig, c)
        }
        Model::Pluecker => Ok(pluecker_generators(sig)),
    }
}

/// Upper triangle of `ZᵀZ − Id`.
pub fn stiefel_generators(sig: &FlagSignature) -> PolySystem {
    let (n, k) = (sig.n(), sig.top());
    let nvars = n * k;
    let z = frame_var_matrix(nvars, 0, n, k);
    let mut polys = Vec::with_capacity(k * (k + 1) / 2);
    for i in 0..k {
        for j in i..k {
            let mut p = (0..n).fold(Polynomial::zero(nvars), |acc, r| &acc + &(&z[r][i] * &z[r][j]));
            if i == j {
                p = &p - &Polynomial::constant(nvars, c(1.0));
            }
            polys.push(p);
        }
    }
    PolySystem::new(vec![VarBlock::new("Z", nvars)], polys, "stiefel-generators").expect("consistent arity")
}

/// Idempotency (upper triangle), incidence `P_iP_{i−1} − P_{i−1}` (all entries) and traces.
///
/// The incidence products are not symmetric as polynomials, so every entry is kept.
pub fn projection_generators(sig: &FlagSignature) -> PolySystem {
    let n = sig.n();
    let m = sym_len(n);
    let nvars = sig.r() * m;
    let ps: Vec<PolyMatrix> = (0..sig.r()).map(|i| sym_var_matrix(nvars, i * m, n)).collect();
    let mut polys = Vec::new();
    for (i, p) in ps.iter().enumerate() {
        let sq = poly_matmul(p, p, nvars);
        let diff: PolyMatrix =
            sq.iter().zip(p).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
        polys.extend(upper_entries(diff));
        if i > 0 {
            let prod = poly_matmul(p, &ps[i - 1], nvars);
            for (row, prow) in prod.iter().zip(&ps[i - 1]) {
                for (x, y) in row.iter().zip(prow) {
                    polys.push(x - y);
                }
            }
        }
        polys.push(&trace(p, nvars) - &Polynomial::constant(nvars, c(sig.steps()[i] as f64)));
    }
    let blocks = (0..sig.r()).map(|i| VarBlock::new(format!("P{}", i + 1), m)).collect();
    PolySystem::new(blocks, polys, "projection-generators").expect("consistent arity")
}

/// Upper triangle of `∏_j (S − b_j Id)` over the distinct block values `b_j`, and `trace(S) − Σ c`.
pub fn isospectral_generators(sig: &FlagSignature, spectrum: &[f64]) -> Result<PolySystem> {
    let n = sig.n();
    let values = sig.block_values(spectrum)?;
    let nvars = sym_len(n);
    let s = sym_var_matrix(nvars, 0, n);
    let mut prod = poly_sub_scaled_identity(&s, values[0], nvars);
    for &v in &values[1..] {
        prod = poly_matmul(&prod, &poly_sub_scaled_identity(&s, v, nvars), nvars);
    }
    let mut polys = upper_entries(prod);
    let total: f64 = spectrum.iter().sum();
    polys.push(&trace(&s, nvars) - &Polynomial::constant(nvars, c(total)));
    PolySystem::new(vec![VarBlock::new("S", nvars)], polys, "isospectral-generators")
}

/// One-term exchange quadrics for all block pairs `s ≤ t`.
///
/// For `|I| = k_t ≥ |J| = k_s` and each choice of the leading entry `j` of `J`,
/// `x_I x_J − Σ_l x_{I[l ← j]} x_{(i_l, J∖j)}`, with index tuples sorted by
/// permutation sign. Zero relations and duplicates up to scaling are dropped.
pub fn pluecker_generators(sig: &FlagSignature) -> PolySystem {
    let n = sig.n();
    let sizes = sig.ambient_pluecker();
    let nvars: usize = sizes.iter().sum();
    let offsets: Vec<usize> = sizes.iter().scan(0, |acc, &s| Some(std::mem::replace(acc, *acc + s))).collect();
    let index: Vec<std::collections::BTreeMap<Vec<usize>, usize>> = sig
        .steps()
        .iter()
        .map(|&k| subsets_lex(n, k).into_iter().enumerate().map(|(i, s)| (s, i)).collect())
        .collect();

    // Signed variable for an arbitrary index tuple of block `b`.
    let coord = |b: usize, tuple: &[usize]| -> Option<(usize, f64)> {
        let mut t = tuple.to_vec();
        let sign = sort_with_sign(&mut t);
        (sign != 0).then(|| (offsets[b] + index[b][&t], f64::from(sign)))
    };
    let product = |a: Option<(usize, f64)>, b: Option<(usize, f64)>| -> Polynomial {
        match (a, b) {
            (Some((va, sa)), Some((vb, sb))) => {
                let mut e = vec![0u32; nvars];
                e[va] += 1;
                e[vb] += 1;
                let mut p = Polynomial::zero(nvars);
                p.add_term(e, c(sa * sb));
                p
            }
            _ => Polynomial::zero(nvars),
        }
    };

    let mut seen = BTreeSet::new();
    let mut polys = Vec::new();
    for s in 0..sig.r() {
        for t in s..sig.r() {
            let (ks, kt) = (sig.steps()[s], sig.steps()[t]);
            for big in subsets_lex(n, kt) {
                for small in subsets_lex(n, ks) {
                    for lead in 0..ks {
                        let mut jt = vec![small[lead]];
                        jt.extend(small.iter().enumerate().filter(|&(i, _)| i != lead).map(|(_, &v)| v));
                        let mut rel = product(coord(t, &big), coord(s, &jt));
                        for l in 0..kt {
                            let mut i2 = big.clone();
                            i2[l] = jt[0];
                            let mut j2 = jt.clone();
                            j2[0] = big[l];
                            rel = &rel - &product(coord(t, &i2), coord(s, &j2));
                        }
                        if rel.is_zero() {
                            continue;
                        }
                        let monic = rel.monic();
                        let key: Vec<(Vec<u32>, i64)> =
                            monic.terms().map(|(e, v)| (e.to_vec(), (v.re * 1e9).round() as i64)).collect();
                        if seen.insert(key) {
                            polys.push(monic);
                        }
                    }
                }
            }
        }
    }
    let blocks = sizes.iter().enumerate().map(|(i, &s)| VarBlock::new(format!("x{}", i + 1), s)).collect();
    PolySystem::new(blocks, polys, "pluecker-generators").expect("consistent arity")
}

/// Coefficient helper for tests and callers comparing relations.
pub fn relation_coefficients(p: &Polynomial) -> Vec<(Vec<u32>, Complex64)> {
    p.terms().map(|(e, v)| (e.to_vec(), v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Matrix;
    use crate::random::seeded_rng;
    use crate::varieties::{random_point, FlagPoint};

    fn sig(s: &str) -> FlagSignature {
        s.parse().unwrap()
    }

    #[test]
    fn stiefel_generator_count_and_frame() {
        let g = stiefel_generators(&sig("2:3"));
        assert_eq!(g.len(), 3);
        assert!(g.degrees().iter().all(|&d| d == 2));
        let frame = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let p = FlagPoint::stiefel(sig("2:3"), frame).unwrap();
        assert_eq!(g.residual_f64(&p.coordinates()).unwrap(), 0.0);
    }

    #[test]
    fn single_relation_for_point_line_flags_in_3_space() {
        let g = pluecker_generators(&sig("1,2:3"));
        assert_eq!(g.len(), 1);
        // Variables: x1, x2, x3, then x12, x13, x23.
        let v = |i| Polynomial::var(6, i);
        let expected = &(&(&v(0) * &v(5)) - &(&v(1) * &v(4))) + &(&v(2) * &v(3));
        let got = &g.polys()[0];
        let sum = got + &expected;
        let diff = got - &expected;
        assert!(sum.is_zero() || diff.is_zero() || got.monic() == expected.monic());
    }

    #[test]
    fn grassmannian_2_4_has_one_quadric() {
        let g = pluecker_generators(&sig("2:4"));
        assert_eq!(g.len(), 1);
        assert_eq!(g.polys()[0].num_terms(), 3);
    }

    #[test]
    fn projective_space_has_no_relations() {
        assert!(pluecker_generators(&sig("1:3")).is_empty());
    }

    #[test]
    fn isospectral_line_case_is_idempotency() {
        let g = isospectral_generators(&sig("1:2"), &[1.0, 0.0]).unwrap();
        assert_eq!(g.len(), 4);
        // S = [[a, b], [b, d]]: (S − I)S upper entries.
        let v = |i| Polynomial::var(3, i);
        let one = Polynomial::constant(3, c(1.0));
        let a_entry = &(&(&v(0) * &v(0)) + &(&v(1) * &v(1))) - &v(0);
        assert_eq!(g.polys()[0], a_entry);
        assert_eq!(g.polys()[3], &(&v(0) + &v(2)) - &one);
    }

    #[test]
    fn isospectral_requires_spectrum() {
        assert!(generators(Model::Isospectral, &sig("1:2"), None).is_err());
        assert!(generators(Model::Isospectral, &sig("1:2"), Some(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn projection_generator_count() {
        let s = sig("1,2:3");
        let g = projection_generators(&s);
        assert_eq!(g.nvars(), 12);
        assert_eq!(g.len(), 2 * 6 + 9 + 2);
    }

    #[test]
    fn generators_vanish_on_random_points() {
        let mut rng = seeded_rng(17);
        for text in ["1:3", "2:4", "1,2:3", "1,2:4", "1,2,3:4"] {
            let s = sig(text);
            let c = s.default_spectrum();
            for model in Model::ALL {
                let g = generators(model, &s, Some(&c)).unwrap();
                for _ in 0..10 {
                    let p = random_point(model, &s, Some(&c), &mut rng).unwrap();
                    let res = g.residual_f64(&p.coordinates()).unwrap();
                    assert!(res < 1e-10, "{model} {text}: {res}");
                }
            }
        }
    }
}
