//! Ising and QUBO problem models.
//!
//! An [`IsingModel`] is the optimization target
//!
//! ```text
//! H(s) = -1/2 * sum_ij J[i][j] s_i s_j - sum_i h[i] s_i + offset
//! ```
//!
//! over bipolar spins `s_i in {-1, +1}`, with `J` symmetric and
//! zero-diagonal. The `offset` is a constant energy shift used by the
//! problem encoders so that the problem-level objective is recoverable
//! from `H` alone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Asymmetry (or diagonal magnitude) up to this bound is repaired silently.
pub const SYMMETRY_SILENT_TOLERANCE: f64 = 1e-12;
/// Asymmetry (or diagonal magnitude) above this bound is a hard error.
pub const SYMMETRY_ERROR_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model must have at least one spin")]
    EmptyModel,
    #[error("J must be an n*n matrix: expected {expected} entries, got {got}")]
    BadCouplingShape { expected: usize, got: usize },
    #[error("h has length {got}, expected {expected}")]
    BadFieldLength { expected: usize, got: usize },
    #[error("non-finite coupling entry at ({row}, {col})")]
    NonFiniteCoupling { row: usize, col: usize },
    #[error("non-finite field entry at {index}")]
    NonFiniteField { index: usize },
    #[error("non-finite offset")]
    NonFiniteOffset,
    #[error("J is asymmetric at ({row}, {col}): |J[i][j] - J[j][i]| = {delta:.3e}")]
    Asymmetric { row: usize, col: usize, delta: f64 },
    #[error("J has a non-zero diagonal entry at {index}: {value:.3e}")]
    NonZeroDiagonal { index: usize, value: f64 },
    #[error("spin vector has length {got}, model has {expected} spins")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("spin value at {index} is {value}, must be -1 or +1")]
    InvalidSpin { index: usize, value: i8 },
}

/// A vector of bipolar spins; every entry is exactly -1 or +1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinVector(Vec<i8>);

impl SpinVector {
    pub fn new(spins: Vec<i8>) -> Result<Self, ModelError> {
        for (index, &value) in spins.iter().enumerate() {
            if value != -1 && value != 1 {
                return Err(ModelError::InvalidSpin { index, value });
            }
        }
        Ok(Self(spins))
    }

    /// Spin readout of a real vector: `sign(0) = +1`.
    pub fn from_signs(x: &[f64]) -> Self {
        Self(x.iter().map(|&v| if v < 0.0 { -1 } else { 1 }).collect())
    }

    pub fn all_down(n: usize) -> Self {
        Self(vec![-1; n])
    }

    pub fn all_up(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    /// Copy with one extra spin appended (used to fix an ancilla).
    pub fn with_appended(&self, spin: i8) -> Result<Self, ModelError> {
        let mut v = self.0.clone();
        v.push(spin);
        Self::new(v)
    }

    /// Copy of the first `n` spins.
    pub fn truncated(&self, n: usize) -> Self {
        Self(self.0[..n].to_vec())
    }

    pub fn flipped(&self) -> Self {
        Self(self.0.iter().map(|s| -s).collect())
    }
}

impl std::ops::Index<usize> for SpinVector {
    type Output = i8;
    fn index(&self, i: usize) -> &i8 {
        &self.0[i]
    }
}

/// Symmetric zero-diagonal Ising model; immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    n: usize,
    j: Vec<f64>, // row-major n*n
    h: Vec<f64>,
    offset: f64,
}

impl IsingModel {
    /// Builds a model from a row-major coupling matrix, field vector and
    /// constant offset.
    ///
    /// Small asymmetries and diagonal residue (parser rounding) are repaired
    /// by symmetrizing `(J + J^T)/2` and zeroing the diagonal; anything above
    /// [`SYMMETRY_ERROR_TOLERANCE`] is rejected. Repairs above
    /// [`SYMMETRY_SILENT_TOLERANCE`] log a warning.
    pub fn new(n: usize, j: Vec<f64>, h: Vec<f64>, offset: f64) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::EmptyModel);
        }
        if j.len() != n * n {
            return Err(ModelError::BadCouplingShape {
                expected: n * n,
                got: j.len(),
            });
        }
        if h.len() != n {
            return Err(ModelError::BadFieldLength {
                expected: n,
                got: h.len(),
            });
        }
        if !offset.is_finite() {
            return Err(ModelError::NonFiniteOffset);
        }
        for (index, v) in h.iter().enumerate() {
            if !v.is_finite() {
                return Err(ModelError::NonFiniteField { index });
            }
        }

        let mut j = j;
        let mut worst_asym = 0.0f64;
        for row in 0..n {
            for col in 0..n {
                let v = j[row * n + col];
                if !v.is_finite() {
                    return Err(ModelError::NonFiniteCoupling { row, col });
                }
                if row == col && v != 0.0 {
                    if v.abs() > SYMMETRY_ERROR_TOLERANCE {
                        return Err(ModelError::NonZeroDiagonal {
                            index: row,
                            value: v,
                        });
                    }
                    worst_asym = worst_asym.max(v.abs());
                    j[row * n + col] = 0.0;
                }
            }
        }
        for row in 0..n {
            for col in (row + 1)..n {
                let a = j[row * n + col];
                let b = j[col * n + row];
                let delta = (a - b).abs();
                if delta > SYMMETRY_ERROR_TOLERANCE {
                    return Err(ModelError::Asymmetric { row, col, delta });
                }
                if delta > 0.0 {
                    worst_asym = worst_asym.max(delta);
                    let avg = 0.5 * (a + b);
                    j[row * n + col] = avg;
                    j[col * n + row] = avg;
                }
            }
        }
        if worst_asym > SYMMETRY_SILENT_TOLERANCE {
            log::warn!(
                "coupling matrix repaired: worst asymmetry/diagonal residue {worst_asym:.3e}"
            );
        }

        Ok(Self { n, j, h, offset })
    }

    /// Like [`IsingModel::new`] but stores `field_scale * h`, folding an
    /// external field strength into the field vector.
    pub fn new_with_field_scale(
        n: usize,
        j: Vec<f64>,
        h: Vec<f64>,
        field_scale: f64,
        offset: f64,
    ) -> Result<Self, ModelError> {
        let scaled = h.into_iter().map(|v| field_scale * v).collect();
        Self::new(n, j, scaled, offset)
    }

    pub fn zero(n: usize) -> Self {
        Self {
            n,
            j: vec![0.0; n * n],
            h: vec![0.0; n],
            offset: 0.0,
        }
    }

    /// Internal constructor for matrices that are symmetric and
    /// zero-diagonal by construction.
    pub(crate) fn from_parts_unchecked(n: usize, j: Vec<f64>, h: Vec<f64>, offset: f64) -> Self {
        debug_assert_eq!(j.len(), n * n);
        debug_assert_eq!(h.len(), n);
        Self { n, j, h, offset }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coupling(&self) -> &[f64] {
        &self.j
    }

    pub fn coupling_row(&self, i: usize) -> &[f64] {
        &self.j[i * self.n..(i + 1) * self.n]
    }

    pub fn coupling_at(&self, i: usize, j: usize) -> f64 {
        self.j[i * self.n + j]
    }

    pub fn field(&self) -> &[f64] {
        &self.h
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn has_field(&self) -> bool {
        self.h.iter().any(|&v| v != 0.0)
    }

    /// Largest row sum of |J|, the worst-case coupling force magnitude.
    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| self.coupling_row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Evaluates `H(s)` in double precision regardless of solver backend.
    pub fn energy(&self, spins: &SpinVector) -> Result<f64, ModelError> {
        if spins.len() != self.n {
            return Err(ModelError::DimensionMismatch {
                expected: self.n,
                got: spins.len(),
            });
        }
        let s = spins.as_slice();
        let mut quad = 0.0;
        for i in 0..self.n {
            let mut acc = 0.0;
            for (jv, sv) in self.coupling_row(i).iter().zip(s.iter()) {
                acc += jv * f64::from(*sv);
            }
            quad += acc * f64::from(s[i]);
        }
        let field: f64 = self
            .h
            .iter()
            .zip(s.iter())
            .map(|(hv, sv)| hv * f64::from(*sv))
            .sum();
        Ok(-0.5 * quad - field + self.offset)
    }

    /// Folds the field vector into an enlarged coupling matrix: returns an
    /// `(n+1)`-spin model with `J'[i][n] = J'[n][i] = h[i]`, zero field and
    /// the same offset. Fixing the extra (ancilla) spin to +1 reproduces the
    /// original energies exactly.
    pub fn embed_field(&self) -> IsingModel {
        let n = self.n;
        let m = n + 1;
        let mut j = vec![0.0; m * m];
        for i in 0..n {
            j[i * m..i * m + n].copy_from_slice(self.coupling_row(i));
            j[i * m + n] = self.h[i];
            j[n * m + i] = self.h[i];
        }
        IsingModel::from_parts_unchecked(m, j, vec![0.0; m], self.offset)
    }
}

/// Quadratic model over unipolar binaries `q_i in {0, 1}`:
/// `value(q) = sum_ij Q[i][j] q_i q_j + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboModel {
    n: usize,
    q: Vec<f64>, // row-major n*n
    offset: f64,
}

#[derive(Debug, Error)]
pub enum QuboError {
    #[error("model must have at least one variable")]
    Empty,
    #[error("Q must be an n*n matrix: expected {expected} entries, got {got}")]
    BadShape { expected: usize, got: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("assignment has length {got}, model has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },
}

impl QuboModel {
    pub fn new(n: usize, q: Vec<f64>, offset: f64) -> Result<Self, QuboError> {
        if n == 0 {
            return Err(QuboError::Empty);
        }
        if q.len() != n * n {
            return Err(QuboError::BadShape {
                expected: n * n,
                got: q.len(),
            });
        }
        for row in 0..n {
            for col in 0..n {
                if !q[row * n + col].is_finite() {
                    return Err(QuboError::NonFinite { row, col });
                }
            }
        }
        Ok(Self { n, q, offset })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &[f64] {
        &self.q
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn value(&self, bits: &[u8]) -> Result<f64, QuboError> {
        if bits.len() != self.n {
            return Err(QuboError::DimensionMismatch {
                expected: self.n,
                got: bits.len(),
            });
        }
        let mut acc = 0.0;
        for i in 0..self.n {
            if bits[i] == 0 {
                continue;
            }
            for j in 0..self.n {
                if bits[j] != 0 {
                    acc += self.q[i * self.n + j];
                }
            }
        }
        Ok(acc + self.offset)
    }

    /// Exact translation to an Ising model via `s = 2q - 1`: for every
    /// assignment, `value(q) == energy(s(q))`, with constants absorbed into
    /// the model offset.
    pub fn to_ising(&self) -> IsingModel {
        let n = self.n;
        // Work on the symmetrized matrix; q_i q_j is order-insensitive.
        let sym = |i: usize, j: usize| 0.5 * (self.q[i * n + j] + self.q[j * n + i]);

        let mut j_out = vec![0.0; n * n];
        let mut h_out = vec![0.0; n];
        let mut diag_sum = 0.0;
        let mut total_sum = 0.0;
        for i in 0..n {
            let mut row_sum = 0.0;
            for k in 0..n {
                let v = sym(i, k);
                row_sum += v;
                total_sum += v;
                if i == k {
                    diag_sum += v;
                } else {
                    j_out[i * n + k] = -0.5 * v;
                }
            }
            h_out[i] = -0.5 * row_sum;
        }
        let offset = self.offset + 0.25 * total_sum + 0.25 * diag_sum;
        IsingModel::from_parts_unchecked(n, j_out, h_out, offset)
    }
}

/// Maps a unipolar assignment to its bipolar image `s = 2q - 1`.
pub fn bits_to_spins(bits: &[u8]) -> SpinVector {
    SpinVector(bits.iter().map(|&b| if b == 0 { -1 } else { 1 }).collect())
}
