//! Multivariate polynomials with complex coefficients and systems of them.
//!
//! A [`Polynomial`] is a map from dense exponent vectors to coefficients; a
//! [`PolySystem`] is a list of polynomials over one variable space that is
//! split into named blocks (`Z` before `mu`, `x` before `lambda`). The
//! [`CompiledSystem`] form flattens the terms for fast repeated evaluation of
//! values and Jacobians inside the path tracker.

pub mod builders;

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{CMatrix, Matrix};

pub use builders::{
    build_commutator_system, build_heterogeneous_lagrange, build_lo_system, LoModel, LoSystem,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn cpow(z: Complex64, e: u32) -> Complex64 {
    let mut acc = ONE;
    for _ in 0..e {
        acc *= z;
    }
    acc
}

/// Sparse multivariate polynomial in a fixed number of variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Complex64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, value: Complex64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], value);
        p
    }

    pub fn var(nvars: usize, index: usize) -> Self {
        assert!(index < nvars, "variable {index} out of range for {nvars} variables");
        let mut e = vec![0; nvars];
        e[index] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, ONE);
        p
    }

    /// Adds `coef · x^exps`, merging with an existing term and dropping exact zeros.
    pub fn add_term(&mut self, exps: Vec<u32>, coef: Complex64) {
        assert_eq!(exps.len(), self.nvars, "exponent arity");
        if coef == ZERO {
            return;
        }
        let entry = self.terms.entry(exps);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coef);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = *o.get() + coef;
                if sum == ZERO {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], Complex64)> {
        self.terms.iter().map(|(e, &c)| (e.as_slice(), c))
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, &c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        (0..e).fold(Self::constant(self.nvars, ONE), |acc, _| &acc * self)
    }

    /// Partial derivative with respect to variable `j`.
    pub fn derivative(&self, j: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, &c) in &self.terms {
            if e[j] > 0 {
                let mut d = e.clone();
                d[j] -= 1;
                out.add_term(d, c * f64::from(e[j]));
            }
        }
        out
    }

    pub fn evaluate(&self, x: &[Complex64]) -> Complex64 {
        debug_assert_eq!(x.len(), self.nvars);
        self.terms
            .iter()
            .map(|(e, &c)| {
                e.iter().zip(x).fold(c, |acc, (&k, &xi)| if k == 0 { acc } else { acc * cpow(xi, k) })
            })
            .sum()
    }

    pub fn evaluate_f64(&self, x: &[f64]) -> Complex64 {
        let xc: Vec<Complex64> = x.iter().map(|&v| c(v)).collect();
        self.evaluate(&xc)
    }

    /// Re-embeds the polynomial in a larger variable space; new variables are appended.
    pub fn extend_vars(&self, nvars: usize) -> Self {
        assert!(nvars >= self.nvars);
        let mut out = Self::zero(nvars);
        for (e, &c) in &self.terms {
            let mut ext = e.clone();
            ext.resize(nvars, 0);
            out.add_term(ext, c);
        }
        out
    }

    /// Renames variables: variable `i` of `self` becomes `map[i]` in a space of `nvars`.
    pub fn remap_vars(&self, map: &[usize], nvars: usize) -> Self {
        assert_eq!(map.len(), self.nvars);
        let mut out = Self::zero(nvars);
        for (e, &c) in &self.terms {
            let mut ext = vec![0; nvars];
            for (i, &k) in e.iter().enumerate() {
                ext[map[i]] += k;
            }
            out.add_term(ext, c);
        }
        out
    }

    /// Scales so that the leading term (largest exponent vector) has coefficient 1.
    pub fn monic(&self) -> Self {
        match self.terms.iter().next_back() {
            Some((_, &lead)) => self.scale(ONE / lead),
            None => self.clone(),
        }
    }

    /// Largest coefficient modulus.
    pub fn coefficient_norm(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.norm()))
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = self.clone();
        for (e, &c) in &rhs.terms {
            out.add_term(e.clone(), c);
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = self.clone();
        for (e, &c) in &rhs.terms {
            out.add_term(e.clone(), -c);
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = Polynomial::zero(self.nvars);
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &rhs.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-ONE)
    }
}

/// Named contiguous range of variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarBlock {
    pub name: String,
    pub size: usize,
}

impl VarBlock {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Self { name: name.into(), size }
    }
}

/// A list of polynomials sharing one block-structured variable space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PolySystemJson", try_from = "PolySystemJson")]
pub struct PolySystem {
    blocks: Vec<VarBlock>,
    polys: Vec<Polynomial>,
    origin: String,
}

/// Per-entry polynomial Jacobian: `entries[i][j] = ∂poly_i/∂x_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyJacobian {
    pub entries: Vec<Vec<Polynomial>>,
}

impl PolyJacobian {
    pub fn evaluate(&self, x: &[Complex64]) -> CMatrix {
        let rows = self.entries.len();
        let cols = self.entries.first().map_or(0, Vec::len);
        CMatrix::from_fn(rows, cols, |i, j| self.entries[i][j].evaluate(x))
    }
}

impl PolySystem {
    pub fn new(blocks: Vec<VarBlock>, polys: Vec<Polynomial>, origin: impl Into<String>) -> Result<Self> {
        let nvars: usize = blocks.iter().map(|b| b.size).sum();
        for p in &polys {
            if p.nvars() != nvars {
                return Err(Error::DimensionMismatch { expected: nvars, got: p.nvars() });
            }
        }
        Ok(Self { blocks, polys, origin: origin.into() })
    }

    pub fn nvars(&self) -> usize {
        self.blocks.iter().map(|b| b.size).sum()
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    pub fn polys(&self) -> &[Polynomial] {
        &self.polys
    }

    pub fn blocks(&self) -> &[VarBlock] {
        &self.blocks
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    /// Offset and size of the named block.
    pub fn block(&self, name: &str) -> Option<(usize, usize)> {
        let mut off = 0;
        for b in &self.blocks {
            if b.name == name {
                return Some((off, b.size));
            }
            off += b.size;
        }
        None
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.polys.iter().map(Polynomial::degree).collect()
    }

    pub fn is_square(&self) -> bool {
        self.len() == self.nvars()
    }

    fn check_arity(&self, len: usize) -> Result<()> {
        if len != self.nvars() {
            return Err(Error::DimensionMismatch { expected: self.nvars(), got: len });
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_arity(x.len())?;
        Ok(self.polys.iter().map(|p| p.evaluate(x)).collect())
    }

    pub fn evaluate_f64(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        let xc: Vec<Complex64> = x.iter().map(|&v| c(v)).collect();
        self.evaluate(&xc)
    }

    /// Max modulus of the system values at `x`.
    pub fn residual(&self, x: &[Complex64]) -> Result<f64> {
        Ok(self.evaluate(x)?.iter().fold(0.0, |m, v| m.max(v.norm())))
    }

    pub fn residual_f64(&self, x: &[f64]) -> Result<f64> {
        Ok(self.evaluate_f64(x)?.iter().fold(0.0, |m, v| m.max(v.norm())))
    }

    pub fn jacobian(&self) -> PolyJacobian {
        let n = self.nvars();
        PolyJacobian {
            entries: self.polys.iter().map(|p| (0..n).map(|j| p.derivative(j)).collect()).collect(),
        }
    }

    /// Numeric Jacobian at a complex point.
    pub fn jacobian_at(&self, x: &[Complex64]) -> Result<CMatrix> {
        self.check_arity(x.len())?;
        let compiled = CompiledSystem::new(self);
        let mut vals = vec![ZERO; self.len()];
        let mut jac = vec![ZERO; self.len() * self.nvars()];
        compiled.eval_affine(x, &mut vals, &mut jac);
        CMatrix::from_row_major(self.len(), self.nvars(), jac)
    }

    /// Real part of the Jacobian at a real point (systems with real coefficients).
    pub fn jacobian_real(&self, x: &[f64]) -> Result<Matrix> {
        let xc: Vec<Complex64> = x.iter().map(|&v| c(v)).collect();
        Ok(self.jacobian_at(&xc)?.real_part())
    }

    /// Product of total degrees, the number of total-degree homotopy paths.
    pub fn bezout_number(&self) -> Result<u64> {
        if !self.is_square() {
            return Err(Error::NotSquare { equations: self.len(), variables: self.nvars() });
        }
        self.degrees().iter().try_fold(1u64, |acc, &d| {
            acc.checked_mul(u64::from(d)).ok_or_else(|| Error::Overflow("Bezout number".into()))
        })
    }

    /// Same polynomials in a larger space with extra trailing blocks.
    pub fn with_extra_blocks(&self, extra: Vec<VarBlock>) -> Self {
        let mut blocks = self.blocks.clone();
        blocks.extend(extra);
        let n: usize = blocks.iter().map(|b| b.size).sum();
        let polys = self.polys.iter().map(|p| p.extend_vars(n)).collect();
        Self { blocks, polys, origin: self.origin.clone() }
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    exps: Vec<u32>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct PolyJson {
    terms: Vec<TermJson>,
}

#[derive(Serialize, Deserialize)]
struct PolySystemJson {
    blocks: Vec<VarBlock>,
    polys: Vec<PolyJson>,
    origin: String,
    degrees: Vec<u32>,
}

impl From<PolySystem> for PolySystemJson {
    fn from(s: PolySystem) -> Self {
        let degrees = s.degrees();
        let polys = s
            .polys
            .iter()
            .map(|p| PolyJson {
                terms: p.terms().map(|(e, c)| TermJson { exps: e.to_vec(), re: c.re, im: c.im }).collect(),
            })
            .collect();
        Self { blocks: s.blocks, polys, origin: s.origin, degrees }
    }
}

impl TryFrom<PolySystemJson> for PolySystem {
    type Error = Error;
    fn try_from(j: PolySystemJson) -> Result<Self> {
        let n: usize = j.blocks.iter().map(|b| b.size).sum();
        let mut polys = Vec::with_capacity(j.polys.len());
        for pj in j.polys {
            let mut p = Polynomial::zero(n);
            for t in pj.terms {
                if t.exps.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: t.exps.len() });
                }
                p.add_term(t.exps, Complex64::new(t.re, t.im));
            }
            polys.push(p);
        }
        let sys = PolySystem::new(j.blocks, polys, j.origin)?;
        if sys.degrees() != j.degrees {
            return Err(Error::Parse("stored degrees disagree with the polynomials".into()));
        }
        Ok(sys)
    }
}

#[derive(Clone, Debug)]
struct CompiledTerm {
    coef: Complex64,
    degree: u32,
    factors: Vec<(usize, u32)>,
}

/// Flattened system for repeated evaluation of values and Jacobians.
#[derive(Clone, Debug)]
pub struct CompiledSystem {
    nvars: usize,
    degrees: Vec<u32>,
    polys: Vec<Vec<CompiledTerm>>,
}

impl CompiledSystem {
    pub fn new(sys: &PolySystem) -> Self {
        let polys = sys
            .polys()
            .iter()
            .map(|p| {
                p.terms()
                    .map(|(e, coef)| CompiledTerm {
                        coef,
                        degree: e.iter().sum(),
                        factors: e.iter().enumerate().filter(|(_, &k)| k > 0).map(|(i, &k)| (i, k)).collect(),
                    })
                    .collect()
            })
            .collect();
        Self { nvars: sys.nvars(), degrees: sys.degrees(), polys }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    /// Values and row-major Jacobian (`len × nvars`) at `x`.
    pub fn eval_affine(&self, x: &[Complex64], vals: &mut [Complex64], jac: &mut [Complex64]) {
        let n = self.nvars;
        jac.iter_mut().for_each(|v| *v = ZERO);
        for (i, terms) in self.polys.iter().enumerate() {
            let mut f = ZERO;
            let row = &mut jac[i * n..(i + 1) * n];
            for t in terms {
                let (v, _) = term_value_and_grad(t, x, ONE, 0, row);
                f += v;
            }
            vals[i] = f;
        }
    }

    /// Values only.
    pub fn eval_values(&self, x: &[Complex64], vals: &mut [Complex64]) {
        for (i, terms) in self.polys.iter().enumerate() {
            vals[i] = terms
                .iter()
                .map(|t| t.factors.iter().fold(t.coef, |acc, &(v, k)| acc * cpow(x[v], k)))
                .sum();
        }
    }

    /// Homogenized values and Jacobian at `x = (x_1..x_n, x_0)`; the
    /// homogenizing coordinate is last. `jac` is `len × (nvars + 1)`.
    pub fn eval_homogeneous(&self, x: &[Complex64], vals: &mut [Complex64], jac: &mut [Complex64]) {
        let n = self.nvars;
        let w = n + 1;
        let x0 = x[n];
        jac.iter_mut().for_each(|v| *v = ZERO);
        for (i, terms) in self.polys.iter().enumerate() {
            let d = self.degrees[i];
            let mut f = ZERO;
            let row = &mut jac[i * w..(i + 1) * w];
            for t in terms {
                let extra = d - t.degree;
                let h = cpow(x0, extra);
                let (v, mono) = term_value_and_grad(t, x, h, extra, row);
                f += v;
                if extra > 0 {
                    row[n] += t.coef * mono * f64::from(extra) * cpow(x0, extra - 1);
                }
            }
            vals[i] = f;
        }
    }
}

/// Accumulates `scale · ∂term` into `row` and returns `(scale · term, bare monomial)`.
fn term_value_and_grad(
    t: &CompiledTerm,
    x: &[Complex64],
    scale: Complex64,
    _extra: u32,
    row: &mut [Complex64],
) -> (Complex64, Complex64) {
    let mono = t.factors.iter().fold(ONE, |acc, &(v, k)| acc * cpow(x[v], k));
    for (a, &(va, ka)) in t.factors.iter().enumerate() {
        let mut g = t.coef * scale * f64::from(ka) * cpow(x[va], ka - 1);
        for (b, &(vb, kb)) in t.factors.iter().enumerate() {
            if a != b {
                g *= cpow(x[vb], kb);
            }
        }
        row[va] += g;
    }
    (t.coef * scale * mono, mono)
}
