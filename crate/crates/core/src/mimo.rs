//! K-user MIMO interference channel scenarios.
//!
//! A scenario is `∏ (M_i × N_i, d_i)`: user `i` transmits `d_i` streams from
//! `M_i` antennas to a receiver with `N_i` antennas. The optimization vector
//! packs every precoder `V_i` (`M_i × d_i`) and every conjugate-transposed
//! decoder `U_i^H` (`d_i × N_i`), column-stacked, with each complex scalar
//! stored as an interleaved `(re, im)` pair:
//!
//! ```text
//! x = [vec(V_1), …, vec(V_K), vec(U_1^H), …, vec(U_K^H)]
//! ```

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

pub type CMatrix = DMatrix<Complex64>;

/// A per-user count given either once for every user or user by user.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerUser {
    Scalar(usize),
    List(Vec<usize>),
}

impl PerUser {
    fn broadcast(&self, k: usize, what: &str) -> Result<Vec<usize>> {
        match self {
            PerUser::Scalar(v) => Ok(vec![*v; k]),
            PerUser::List(v) if v.len() == k => Ok(v.clone()),
            PerUser::List(v) => Err(Error::InvalidDimensions(format!(
                "{what} lists {} users, expected {k}",
                v.len()
            ))),
        }
    }
}

impl From<usize> for PerUser {
    fn from(v: usize) -> Self {
        PerUser::Scalar(v)
    }
}

impl From<Vec<usize>> for PerUser {
    fn from(v: Vec<usize>) -> Self {
        PerUser::List(v)
    }
}

impl From<&[usize]> for PerUser {
    fn from(v: &[usize]) -> Self {
        PerUser::List(v.to_vec())
    }
}

/// Whether [`ProblemSpec::new`] rejects systems with fewer variables than
/// alignment equations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Properness {
    #[default]
    Require,
    Allow,
}

/// Scenario parameters with their derived dimension counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProblemSpec {
    k: usize,
    m: Vec<usize>,
    n: Vec<usize>,
    d: Vec<usize>,
    nv_complex: usize,
    ne_complex: usize,
    dim_real: usize,
    v_offsets: Vec<usize>,
    uh_offsets: Vec<usize>,
}

/// Builds a scenario, rejecting improper systems.
pub fn make_problem(
    k: usize,
    m: impl Into<PerUser>,
    n: impl Into<PerUser>,
    d: impl Into<PerUser>,
) -> Result<ProblemSpec> {
    ProblemSpec::new(k, m, n, d, Properness::Require)
}

impl ProblemSpec {
    pub fn new(
        k: usize,
        m: impl Into<PerUser>,
        n: impl Into<PerUser>,
        d: impl Into<PerUser>,
        properness: Properness,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidDimensions("K must be at least 1".into()));
        }
        let m = m.into().broadcast(k, "M")?;
        let n = n.into().broadcast(k, "N")?;
        let d = d.into().broadcast(k, "d")?;
        for i in 0..k {
            if m[i] == 0 || n[i] == 0 || d[i] == 0 {
                return Err(Error::InvalidDimensions(format!(
                    "user {}: counts must be positive (M={}, N={}, d={})",
                    i + 1,
                    m[i],
                    n[i],
                    d[i]
                )));
            }
            if d[i] > m[i].min(n[i]) {
                return Err(Error::InvalidDimensions(format!(
                    "user {}: d={} exceeds min(M={}, N={})",
                    i + 1,
                    d[i],
                    m[i],
                    n[i]
                )));
            }
        }

        let nv_complex: usize = (0..k).map(|i| (m[i] + n[i]) * d[i]).sum();
        let total_d: usize = d.iter().sum();
        let ne_complex: usize = d.iter().map(|&di| di * (total_d - di)).sum();
        if properness == Properness::Require && nv_complex < ne_complex {
            return Err(Error::ImproperSystem {
                nv: nv_complex,
                ne: ne_complex,
            });
        }

        let mut v_offsets = Vec::with_capacity(k);
        let mut offset = 0;
        for i in 0..k {
            v_offsets.push(offset);
            offset += m[i] * d[i];
        }
        let mut uh_offsets = Vec::with_capacity(k);
        for i in 0..k {
            uh_offsets.push(offset);
            offset += n[i] * d[i];
        }
        debug_assert_eq!(offset, nv_complex);

        Ok(ProblemSpec {
            k,
            m,
            n,
            d,
            nv_complex,
            ne_complex,
            dim_real: 2 * nv_complex,
            v_offsets,
            uh_offsets,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> &[usize] {
        &self.m
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    pub fn d(&self) -> &[usize] {
        &self.d
    }

    pub fn nv_complex(&self) -> usize {
        self.nv_complex
    }

    pub fn ne_complex(&self) -> usize {
        self.ne_complex
    }

    pub fn dim_real(&self) -> usize {
        self.dim_real
    }

    pub fn is_proper(&self) -> bool {
        self.nv_complex >= self.ne_complex
    }

    /// Complex index of `V_i[0, 0]` in the packed vector.
    pub fn v_offset(&self, i: usize) -> usize {
        self.v_offsets[i]
    }

    /// Complex index of `U_i^H[0, 0]` in the packed vector.
    pub fn uh_offset(&self, i: usize) -> usize {
        self.uh_offsets[i]
    }

    /// Resolves a complex index of the packed vector to the matrix entry it
    /// stores.
    pub fn locate(&self, complex_index: usize) -> Option<Slot> {
        if complex_index >= self.nv_complex {
            return None;
        }
        for i in 0..self.k {
            let len = self.m[i] * self.d[i];
            let off = self.v_offsets[i];
            if complex_index < off + len {
                let local = complex_index - off;
                return Some(Slot::Precoder {
                    user: i,
                    row: local % self.m[i],
                    col: local / self.m[i],
                });
            }
        }
        for i in 0..self.k {
            let len = self.n[i] * self.d[i];
            let off = self.uh_offsets[i];
            if complex_index < off + len {
                let local = complex_index - off;
                return Some(Slot::DecoderHermitian {
                    user: i,
                    row: local % self.d[i],
                    col: local / self.d[i],
                });
            }
        }
        unreachable!("offsets cover the whole vector")
    }
}

/// Matrix entry addressed by one complex scalar of the packed vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    /// `V_user[row, col]`.
    Precoder { user: usize, row: usize, col: usize },
    /// `U_user^H[row, col]`, i.e. the conjugate of `U_user[col, row]`.
    DecoderHermitian { user: usize, row: usize, col: usize },
}

/// The `K × K` grid of channel matrices; `get(i, j)` is `H_ij`, receiver `i`
/// and transmitter `j`, of shape `N_i × M_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    k: usize,
    seed: u64,
    h: Vec<CMatrix>,
}

impl ChannelSet {
    /// Wraps explicit matrices given receiver-major (`h[i * K + j] = H_ij`).
    pub fn from_matrices(spec: &ProblemSpec, seed: u64, h: Vec<CMatrix>) -> Result<Self> {
        let k = spec.k();
        if h.len() != k * k {
            return Err(Error::ShapeMismatch(format!(
                "expected {} channel matrices, got {}",
                k * k,
                h.len()
            )));
        }
        for i in 0..k {
            for j in 0..k {
                let hij = &h[i * k + j];
                if hij.shape() != (spec.n()[i], spec.m()[j]) {
                    return Err(Error::ShapeMismatch(format!(
                        "H[{i}][{j}] is {:?}, expected {:?}",
                        hij.shape(),
                        (spec.n()[i], spec.m()[j])
                    )));
                }
                if hij.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::InvalidDimensions(format!("H[{i}][{j}] is not finite")));
                }
            }
        }
        Ok(ChannelSet { k, seed, h })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get(&self, rx: usize, tx: usize) -> &CMatrix {
        &self.h[rx * self.k + tx]
    }

    pub fn iter(&self) -> impl Iterator<Item = &CMatrix> {
        self.h.iter()
    }

    /// Checks that the grid matches `spec`.
    pub fn check(&self, spec: &ProblemSpec) -> Result<()> {
        if self.k != spec.k() {
            return Err(Error::DimensionMismatch(format!(
                "channel set has K={}, scenario has K={}",
                self.k,
                spec.k()
            )));
        }
        for i in 0..self.k {
            for j in 0..self.k {
                if self.get(i, j).shape() != (spec.n()[i], spec.m()[j]) {
                    return Err(Error::DimensionMismatch(format!(
                        "H[{i}][{j}] is {:?}, expected {:?}",
                        self.get(i, j).shape(),
                        (spec.n()[i], spec.m()[j])
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Draws i.i.d. zero-mean unit-variance circular complex Gaussian channels.
///
/// Real and imaginary parts are each `Normal(0, 1/2)`. Matrices are filled
/// receiver-major, column by column, real part first.
pub fn generate_channels(spec: &ProblemSpec, seed: u64) -> ChannelSet {
    let mut rng = stream_rng(seed, Stream::Channel);
    let k = spec.k();
    let mut h = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let (rows, cols) = (spec.n()[i], spec.m()[j]);
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                data.push(Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2));
            }
            h.push(CMatrix::from_vec(rows, cols, data));
        }
    }
    ChannelSet { k, seed, h }
}

/// The flat real optimization vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SolutionVector(pub Vec<f64>);

impl SolutionVector {
    pub fn zeros(spec: &ProblemSpec) -> Self {
        SolutionVector(vec![0.0; spec.dim_real()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for SolutionVector {
    fn from(v: Vec<f64>) -> Self {
        SolutionVector(v)
    }
}

impl AsRef<[f64]> for SolutionVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Precoders `V_i` (`M_i × d_i`) and decoders `U_i` (`N_i × d_i`).
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixBundle {
    pub v: Vec<CMatrix>,
    pub u: Vec<CMatrix>,
}

impl MatrixBundle {
    pub fn zeros(spec: &ProblemSpec) -> Self {
        MatrixBundle {
            v: (0..spec.k())
                .map(|i| CMatrix::zeros(spec.m()[i], spec.d()[i]))
                .collect(),
            u: (0..spec.k())
                .map(|i| CMatrix::zeros(spec.n()[i], spec.d()[i]))
                .collect(),
        }
    }
}

#[inline]
pub(crate) fn complex_at(x: &[f64], index: usize) -> Complex64 {
    Complex64::new(x[2 * index], x[2 * index + 1])
}

pub fn unpack(x: &[f64], spec: &ProblemSpec) -> Result<MatrixBundle> {
    if x.len() != spec.dim_real() {
        return Err(Error::LengthMismatch {
            expected: spec.dim_real(),
            actual: x.len(),
        });
    }
    let mut bundle = MatrixBundle::zeros(spec);
    for i in 0..spec.k() {
        let (m, n, d) = (spec.m()[i], spec.n()[i], spec.d()[i]);
        let off = spec.v_offset(i);
        for col in 0..d {
            for row in 0..m {
                bundle.v[i][(row, col)] = complex_at(x, off + col * m + row);
            }
        }
        // vec(U_i^H) walks the d × N conjugate transpose column by column.
        let off = spec.uh_offset(i);
        for a in 0..n {
            for s in 0..d {
                bundle.u[i][(a, s)] = complex_at(x, off + a * d + s).conj();
            }
        }
    }
    Ok(bundle)
}

pub fn pack(bundle: &MatrixBundle, spec: &ProblemSpec) -> Result<SolutionVector> {
    let k = spec.k();
    if bundle.v.len() != k || bundle.u.len() != k {
        return Err(Error::ShapeMismatch(format!(
            "bundle has {} precoders and {} decoders, expected {k} each",
            bundle.v.len(),
            bundle.u.len()
        )));
    }
    let mut x = vec![0.0; spec.dim_real()];
    let mut put = |index: usize, z: Complex64| {
        x[2 * index] = z.re;
        x[2 * index + 1] = z.im;
    };
    for i in 0..k {
        let (m, n, d) = (spec.m()[i], spec.n()[i], spec.d()[i]);
        if bundle.v[i].shape() != (m, d) {
            return Err(Error::ShapeMismatch(format!(
                "V_{} is {:?}, expected {:?}",
                i + 1,
                bundle.v[i].shape(),
                (m, d)
            )));
        }
        if bundle.u[i].shape() != (n, d) {
            return Err(Error::ShapeMismatch(format!(
                "U_{} is {:?}, expected {:?}",
                i + 1,
                bundle.u[i].shape(),
                (n, d)
            )));
        }
        let off = spec.v_offset(i);
        for col in 0..d {
            for row in 0..m {
                put(off + col * m + row, bundle.v[i][(row, col)]);
            }
        }
        let off = spec.uh_offset(i);
        for a in 0..n {
            for s in 0..d {
                put(off + a * d + s, bundle.u[i][(a, s)].conj());
            }
        }
    }
    Ok(SolutionVector(x))
}
