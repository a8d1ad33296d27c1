//! Flag varieties in four coordinate models.
//!
//! A flag of type `(k₁ < … < k_r; n)` can be stored as an orthonormal frame
//! (Stiefel), as the tuple of its Plücker vectors, as a tuple of nested
//! orthogonal projections, or as one symmetric matrix with a prescribed
//! spectrum (isospectral). This module holds the signature, the tagged point
//! type and the checks shared by [`generators`], [`convert`] and [`smooth`].

pub mod convert;
pub mod generators;
pub mod smooth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::combinat::binomial;
use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::random::{random_stiefel, uniform_symmetric, SeededRng};

pub use convert::convert;
pub use generators::generators;
pub use smooth::{smoothness_check, SmoothnessReport};

/// Default tolerance for "lies on the variety".
pub const TAU_VAR: f64 = 1e-8;

/// Position of `(i, j)`, `i ≤ j`, in the row-major upper triangle of an `n × n` matrix.
pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

pub fn sym_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Upper-triangular entries of a symmetric matrix, row-major.
pub fn sym_to_vec(m: &Matrix) -> Vec<f64> {
    let n = m.rows();
    let mut v = Vec::with_capacity(sym_len(n));
    for i in 0..n {
        for j in i..n {
            v.push(m[(i, j)]);
        }
    }
    v
}

pub fn vec_to_sym(v: &[f64], n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| v[sym_index(n, i, j)])
}

/// Type `(k₁ < … < k_r; n)` of a flag variety.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FlagSignature {
    steps: Vec<usize>,
    n: usize,
}

impl FlagSignature {
    pub fn new(steps: Vec<usize>, n: usize) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidSignature("no steps given".into()));
        }
        if steps[0] == 0 {
            return Err(Error::InvalidSignature("steps must be positive".into()));
        }
        if steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSignature(format!("steps {steps:?} are not strictly increasing")));
        }
        if *steps.last().unwrap() > n {
            return Err(Error::InvalidSignature(format!("last step exceeds n = {n}")));
        }
        Ok(Self { steps, n })
    }

    pub fn grassmannian(k: usize, n: usize) -> Result<Self> {
        Self::new(vec![k], n)
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new((1..n).collect(), n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn r(&self) -> usize {
        self.steps.len()
    }

    pub fn top(&self) -> usize {
        *self.steps.last().unwrap()
    }

    /// Sizes `k₁, k₂ − k₁, …, n − k_r` of the r + 1 blocks (the last may be 0).
    pub fn block_sizes(&self) -> Vec<usize> {
        let mut prev = 0;
        let mut out = Vec::with_capacity(self.r() + 1);
        for &k in &self.steps {
            out.push(k - prev);
            prev = k;
        }
        out.push(self.n - prev);
        out
    }

    /// Σ (k_i − k_{i−1})(n − k_i).
    pub fn flag_dimension(&self) -> usize {
        let mut prev = 0;
        self.steps
            .iter()
            .map(|&k| {
                let d = (k - prev) * (self.n - k);
                prev = k;
                d
            })
            .sum()
    }

    pub fn ambient_stiefel(&self) -> usize {
        self.n * self.top()
    }

    pub fn ambient_projection(&self) -> usize {
        self.r() * sym_len(self.n)
    }

    pub fn ambient_isospectral(&self) -> usize {
        sym_len(self.n)
    }

    pub fn ambient_pluecker(&self) -> Vec<usize> {
        self.steps
            .iter()
            .map(|&k| binomial(self.n as u64, k as u64).expect("desk-scale binomial") as usize)
            .collect()
    }

    pub fn ambient(&self, model: Model) -> usize {
        match model {
            Model::Stiefel => self.ambient_stiefel(),
            Model::Pluecker => self.ambient_pluecker().iter().sum(),
            Model::Projection => self.ambient_projection(),
            Model::Isospectral => self.ambient_isospectral(),
        }
    }

    /// Spectrum `(r+1, r, …, 1)` repeated over the blocks.
    pub fn default_spectrum(&self) -> Vec<f64> {
        let r = self.r();
        self.expand_block_values(&(0..=r).map(|j| (r + 1 - j) as f64).collect::<Vec<_>>())
    }

    /// Default spectrum with each block value shifted by seeded noise in `[-0.01, 0.01)`.
    pub fn generic_spectrum(&self, rng: &mut SeededRng) -> Vec<f64> {
        let r = self.r();
        let values: Vec<f64> = (0..=r).map(|j| (r + 1 - j) as f64 + 1e-2 * uniform_symmetric(rng)).collect();
        self.expand_block_values(&values)
    }

    /// Repeats one value per block into a length-n spectrum.
    pub fn expand_block_values(&self, values: &[f64]) -> Vec<f64> {
        self.block_sizes().iter().zip(values).flat_map(|(&s, &v)| std::iter::repeat_n(v, s)).collect()
    }

    /// Checks the repetition pattern of `c` and returns the distinct value of
    /// each nonempty block.
    pub fn block_values(&self, c: &[f64]) -> Result<Vec<f64>> {
        if c.len() != self.n {
            return Err(Error::InvalidSpectrum(format!("expected {} entries, got {}", self.n, c.len())));
        }
        let scale = c.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut values = Vec::new();
        let mut start = 0;
        for size in self.block_sizes() {
            if size == 0 {
                continue;
            }
            let block = &c[start..start + size];
            if block.iter().any(|&v| (v - block[0]).abs() > 1e-12 * scale) {
                return Err(Error::InvalidSpectrum(format!("entries {start}..{} are not equal", start + size)));
            }
            values.push(block[0]);
            start += size;
        }
        for (a, va) in values.iter().enumerate() {
            for vb in &values[a + 1..] {
                if (va - vb).abs() <= 1e-8 * scale {
                    return Err(Error::InvalidSpectrum("two blocks share a value".into()));
                }
            }
        }
        Ok(values)
    }
}

impl fmt::Display for FlagSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let steps: Vec<String> = self.steps.iter().map(ToString::to_string).collect();
        write!(f, "{}:{}", steps.join(","), self.n)
    }
}

impl FromStr for FlagSignature {
    type Err = Error;

    /// Parses `k1,k2,...:n`.
    fn from_str(s: &str) -> Result<Self> {
        let (steps, n) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidSignature(format!("'{s}' is not of the form k1,k2,...:n")))?;
        let parse = |t: &str| {
            t.trim().parse::<usize>().map_err(|_| Error::InvalidSignature(format!("'{t}' is not an integer")))
        };
        let steps = steps.split(',').map(parse).collect::<Result<Vec<_>>>()?;
        Self::new(steps, parse(n)?)
    }
}

impl Serialize for FlagSignature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FlagSignature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `nk − binom(k+1, 2)`.
pub fn stiefel_dimension(n: usize, k: usize) -> Result<usize> {
    if k == 0 || k > n {
        return Err(Error::InvalidSignature(format!("Stiefel manifold needs 1 <= k <= n, got k = {k}, n = {n}")));
    }
    Ok(n * k - k * (k + 1) / 2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Stiefel,
    Pluecker,
    Projection,
    Isospectral,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::Stiefel, Model::Pluecker, Model::Projection, Model::Isospectral];

    pub fn name(self) -> &'static str {
        match self {
            Model::Stiefel => "stiefel",
            Model::Pluecker => "pluecker",
            Model::Projection => "projection",
            Model::Isospectral => "isospectral",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stiefel" => Ok(Model::Stiefel),
            "pluecker" | "plucker" | "plücker" => Ok(Model::Pluecker),
            "projection" | "proj" => Ok(Model::Projection),
            "isospectral" | "iso" => Ok(Model::Isospectral),
            other => Err(Error::Parse(format!("unknown model '{other}'"))),
        }
    }
}

/// A flag in one of the four coordinate models.
#[derive(Clone, Debug, PartialEq)]
pub enum FlagPoint {
    Stiefel { sig: FlagSignature, frame: Matrix },
    Pluecker { sig: FlagSignature, coords: Vec<Vec<f64>> },
    Projection { sig: FlagSignature, projections: Vec<Matrix> },
    Isospectral { sig: FlagSignature, spectrum: Vec<f64>, matrix: Matrix },
}

impl FlagPoint {
    pub fn stiefel(sig: FlagSignature, frame: Matrix) -> Result<Self> {
        if frame.rows() != sig.n() || frame.cols() != sig.top() {
            return Err(Error::DimensionMismatch { expected: sig.n() * sig.top(), got: frame.rows() * frame.cols() });
        }
        Ok(FlagPoint::Stiefel { sig, frame })
    }

    pub fn model(&self) -> Model {
        match self {
            FlagPoint::Stiefel { .. } => Model::Stiefel,
            FlagPoint::Pluecker { .. } => Model::Pluecker,
            FlagPoint::Projection { .. } => Model::Projection,
            FlagPoint::Isospectral { .. } => Model::Isospectral,
        }
    }

    pub fn sig(&self) -> &FlagSignature {
        match self {
            FlagPoint::Stiefel { sig, .. }
            | FlagPoint::Pluecker { sig, .. }
            | FlagPoint::Projection { sig, .. }
            | FlagPoint::Isospectral { sig, .. } => sig,
        }
    }

    pub fn spectrum(&self) -> Option<&[f64]> {
        match self {
            FlagPoint::Isospectral { spectrum, .. } => Some(spectrum),
            _ => None,
        }
    }

    /// Coordinates in the variable order used by [`generators`].
    pub fn coordinates(&self) -> Vec<f64> {
        match self {
            FlagPoint::Stiefel { frame, .. } => {
                (0..frame.cols()).flat_map(|j| frame.column(j)).collect()
            }
            FlagPoint::Pluecker { coords, .. } => coords.concat(),
            FlagPoint::Projection { projections, .. } => projections.iter().flat_map(sym_to_vec).collect(),
            FlagPoint::Isospectral { matrix, .. } => sym_to_vec(matrix),
        }
    }

    /// Max absolute generator value at this point.
    pub fn residual(&self) -> Result<f64> {
        let sys = generators(self.model(), self.sig(), self.spectrum())?;
        sys.residual_f64(&self.coordinates())
    }

    /// Checks the model invariants: shapes, exact symmetry where required,
    /// and generator residual at most `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let sig = self.sig();
        let n = sig.n();
        match self {
            FlagPoint::Stiefel { frame, .. } => {
                if frame.rows() != n || frame.cols() != sig.top() {
                    return Err(Error::DimensionMismatch { expected: n * sig.top(), got: frame.rows() * frame.cols() });
                }
            }
            FlagPoint::Pluecker { coords, .. } => {
                let sizes = sig.ambient_pluecker();
                if coords.len() != sizes.len() {
                    return Err(Error::DimensionMismatch { expected: sizes.len(), got: coords.len() });
                }
                for (c, &s) in coords.iter().zip(&sizes) {
                    if c.len() != s {
                        return Err(Error::DimensionMismatch { expected: s, got: c.len() });
                    }
                    if c.iter().all(|&v| v == 0.0) {
                        return Err(Error::Contract("Plücker block is the zero vector".into()));
                    }
                }
            }
            FlagPoint::Projection { projections, .. } => {
                if projections.len() != sig.r() {
                    return Err(Error::DimensionMismatch { expected: sig.r(), got: projections.len() });
                }
                for p in projections {
                    if p.rows() != n || p.cols() != n {
                        return Err(Error::DimensionMismatch { expected: n * n, got: p.rows() * p.cols() });
                    }
                    if !p.is_symmetric() {
                        return Err(Error::Contract("projection matrix is not symmetric".into()));
                    }
                }
            }
            FlagPoint::Isospectral { spectrum, matrix, .. } => {
                sig.block_values(spectrum)?;
                if matrix.rows() != n || matrix.cols() != n {
                    return Err(Error::DimensionMismatch { expected: n * n, got: matrix.rows() * matrix.cols() });
                }
                if !matrix.is_symmetric() {
                    return Err(Error::Contract("isospectral matrix is not symmetric".into()));
                }
            }
        }
        let residual = self.residual()?;
        if !(residual <= tol) {
            return Err(Error::OffVariety { residual });
        }
        Ok(())
    }

    /// Projection tuple of the flag, the model-independent comparison key.
    pub fn projections(&self) -> Result<Vec<Matrix>> {
        match convert(self, Model::Projection, None)? {
            FlagPoint::Projection { projections, .. } => Ok(projections),
            _ => unreachable!("conversion returns the requested model"),
        }
    }
}

/// Point on the variety from a seeded random orthonormal frame.
pub fn random_point(
    model: Model,
    sig: &FlagSignature,
    spectrum: Option<&[f64]>,
    rng: &mut SeededRng,
) -> Result<FlagPoint> {
    let frame = random_stiefel(rng, sig.n(), sig.top());
    let p = FlagPoint::Stiefel { sig: sig.clone(), frame };
    convert(&p, model, spectrum)
}

#[derive(Serialize, Deserialize)]
struct FlagPointJson {
    model: Model,
    sig: FlagSignature,
    data: Value,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    spectrum: Option<Vec<f64>>,
}

fn parse_matrix(v: &Value) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = serde_json::from_value(v.clone()).map_err(|e| Error::Parse(e.to_string()))?;
    Matrix::from_rows(&rows)
}

impl Serialize for FlagPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let data = match self {
            FlagPoint::Stiefel { frame, .. } => serde_json::to_value(frame.to_rows()),
            FlagPoint::Pluecker { coords, .. } => serde_json::to_value(coords),
            FlagPoint::Projection { projections, .. } => {
                serde_json::to_value(projections.iter().map(Matrix::to_rows).collect::<Vec<_>>())
            }
            FlagPoint::Isospectral { matrix, .. } => serde_json::to_value(matrix.to_rows()),
        }
        .map_err(serde::ser::Error::custom)?;
        FlagPointJson {
            model: self.model(),
            sig: self.sig().clone(),
            data,
            spectrum: self.spectrum().map(<[f64]>::to_vec),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FlagPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = FlagPointJson::deserialize(d)?;
        let point = (|| -> Result<FlagPoint> {
            let sig = j.sig;
            Ok(match j.model {
                Model::Stiefel => FlagPoint::Stiefel { sig, frame: parse_matrix(&j.data)? },
                Model::Pluecker => FlagPoint::Pluecker {
                    sig,
                    coords: serde_json::from_value(j.data).map_err(|e| Error::Parse(e.to_string()))?,
                },
                Model::Projection => {
                    let items = j.data.as_array().ok_or_else(|| Error::Parse("expected a list of matrices".into()))?;
                    FlagPoint::Projection { sig, projections: items.iter().map(parse_matrix).collect::<Result<_>>()? }
                }
                Model::Isospectral => FlagPoint::Isospectral {
                    spectrum: j.spectrum.ok_or_else(|| Error::Parse("isospectral point needs a spectrum".into()))?,
                    sig,
                    matrix: parse_matrix(&j.data)?,
                },
            })
        })();
        point.map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::seeded_rng;

    fn sig(s: &str) -> FlagSignature {
        s.parse().unwrap()
    }

    #[test]
    fn dimensions() {
        assert_eq!(sig("1,2:3").flag_dimension(), 3);
        assert_eq!(FlagSignature::complete(5).unwrap().flag_dimension(), 10);
        assert_eq!(sig("2:4").flag_dimension(), 4);
        assert_eq!(stiefel_dimension(3, 2).unwrap(), 3);
        assert_eq!(stiefel_dimension(4, 4).unwrap(), 6);
        assert_eq!(stiefel_dimension(5, 1).unwrap(), 4);
        assert!(stiefel_dimension(2, 3).is_err());
    }

    #[test]
    fn ambient_counts() {
        let s = sig("1,2:3");
        assert_eq!(s.ambient_pluecker(), vec![3, 3]);
        assert_eq!(s.ambient_projection(), 12);
        assert_eq!(s.ambient_isospectral(), 6);
    }

    #[test]
    fn signature_parsing() {
        assert_eq!(sig(" 1, 2 :3").steps(), &[1, 2]);
        assert_eq!(sig("1,2:3").to_string(), "1,2:3");
        for bad in ["2,1:3", "0:3", "4:3", "1,2", "a:3", ":3", "1,1:3"] {
            assert!(matches!(bad.parse::<FlagSignature>(), Err(Error::InvalidSignature(_))), "{bad}");
        }
    }

    #[test]
    fn spectra() {
        let s = sig("1,2:3");
        assert_eq!(s.default_spectrum(), vec![3.0, 2.0, 1.0]);
        assert_eq!(sig("1:2").default_spectrum(), vec![2.0, 1.0]);
        assert_eq!(sig("2:4").block_values(&[5.0, 5.0, 1.0, 1.0]).unwrap(), vec![5.0, 1.0]);
        assert!(sig("2:4").block_values(&[5.0, 4.0, 1.0, 1.0]).is_err());
        assert!(sig("2:4").block_values(&[1.0, 1.0, 1.0, 1.0]).is_err());
        assert_eq!(sig("2:2").block_values(&[3.0, 3.0]).unwrap(), vec![3.0]);
        let g = s.generic_spectrum(&mut seeded_rng(1));
        assert!(s.block_values(&g).is_ok());
        assert!(g.iter().zip(s.default_spectrum()).all(|(a, b)| (a - b).abs() <= 1e-2));
    }

    #[test]
    fn sym_indexing_round_trip() {
        let n = 4;
        let mut seen = vec![false; sym_len(n)];
        for i in 0..n {
            for j in i..n {
                seen[sym_index(n, i, j)] = true;
                assert_eq!(sym_index(n, i, j), sym_index(n, j, i));
            }
        }
        assert!(seen.iter().all(|&b| b));
        let m = vec_to_sym(&(0..10).map(f64::from).collect::<Vec<_>>(), 4);
        assert_eq!(sym_to_vec(&m), (0..10).map(f64::from).collect::<Vec<_>>());
    }

    #[test]
    fn json_round_trip_every_model() {
        let s = sig("1,2:4");
        let mut rng = seeded_rng(5);
        let c = s.default_spectrum();
        for model in Model::ALL {
            let p = random_point(model, &s, Some(&c), &mut rng).unwrap();
            let text = serde_json::to_string(&p).unwrap();
            assert!(text.contains(&format!("\"model\":\"{}\"", model.name())));
            let back: FlagPoint = serde_json::from_str(&text).unwrap();
            assert_eq!(back, p);
        }
    }

    #[test]
    fn validation_rejects_off_variety() {
        let s = sig("1,2:3");
        let frame = Matrix::from_rows(&[vec![1.0, 0.1], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let p = FlagPoint::stiefel(s, frame).unwrap();
        assert!(matches!(p.validate(TAU_VAR), Err(Error::OffVariety { .. })));
    }
}
