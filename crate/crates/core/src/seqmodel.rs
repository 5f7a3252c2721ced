//! Declarative bounded invertible matrix sequences `n ↦ A(n)` on the integers.
//!
//! A [`MatrixSequence`] is built from a serializable [`SequenceDescription`]
//! and compiled once into dense matrices, so evaluation in hot loops does not
//! re-parse nested row arrays.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, spectral_norm};

/// Row-major nested rows.
pub type Rows = Vec<Vec<f64>>;

/// A one-dimensional sequence `u: ℤ → ℝ∖{0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalarSequence {
    Constant { value: f64 },
    Periodic { values: Vec<f64> },
    /// `negative` governs `n < 0` and `nonnegative` governs `n >= 0`; each
    /// side repeats with its own period, phase anchored at `n = 0`.
    Piecewise {
        negative: Vec<f64>,
        nonnegative: Vec<f64>,
    },
}

impl ScalarSequence {
    pub fn evaluate(&self, n: i64) -> f64 {
        match self {
            ScalarSequence::Constant { value } => *value,
            ScalarSequence::Periodic { values } => values[n.rem_euclid(values.len() as i64) as usize],
            ScalarSequence::Piecewise {
                negative,
                nonnegative,
            } => {
                if n < 0 {
                    negative[n.rem_euclid(negative.len() as i64) as usize]
                } else {
                    nonnegative[n.rem_euclid(nonnegative.len() as i64) as usize]
                }
            }
        }
    }

    /// Evaluates and rejects zero values, naming the coordinate.
    pub fn evaluate_nonzero(&self, coordinate: usize, n: i64) -> Result<f64> {
        let v = self.evaluate(n);
        if v == 0.0 || !v.is_finite() {
            return Err(Error::ZeroScalar { coordinate, n });
        }
        Ok(v)
    }

    /// Period of the whole sequence if it is periodic on all of ℤ.
    pub fn period(&self) -> Option<usize> {
        match self {
            ScalarSequence::Constant { .. } => Some(1),
            ScalarSequence::Periodic { values } => Some(values.len()),
            ScalarSequence::Piecewise { .. } => None,
        }
    }

    /// The 1×1 matrix sequence with this scalar on the diagonal.
    pub fn to_matrix_sequence(&self) -> Result<MatrixSequence> {
        MatrixSequence::new(SequenceDescription {
            dimension: 1,
            kind: SequenceKind::Diagonal {
                entries: vec![self.clone()],
            },
            bound_cap: None,
        })
    }

    fn check_shape(&self, allow_zero: bool) -> Result<()> {
        let values: Vec<f64> = match self {
            ScalarSequence::Constant { value } => vec![*value],
            ScalarSequence::Periodic { values } => values.clone(),
            ScalarSequence::Piecewise {
                negative,
                nonnegative,
            } => {
                if negative.is_empty() || nonnegative.is_empty() {
                    return Err(Error::InvalidSequence(
                        "piecewise scalar sides must be nonempty".into(),
                    ));
                }
                negative.iter().chain(nonnegative).copied().collect()
            }
        };
        if values.is_empty() {
            return Err(Error::InvalidSequence("periodic scalar needs at least one value".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSequence("scalar values must be finite".into()));
        }
        if !allow_zero && values.contains(&0.0) {
            return Err(Error::InvalidSequence("diagonal scalar values must be nonzero".into()));
        }
        Ok(())
    }
}

/// Off-diagonal entry sequence of an upper-triangular system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffDiagonalEntry {
    pub row: usize,
    pub col: usize,
    pub values: ScalarSequence,
}

/// Generator for `A(n) = D(n) + ε N(n)`: `D(n)` diagonal with entry `i` drawn
/// uniformly from `bands[i]`, `N(n)` with entries uniform in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub bands: Vec<[f64; 2]>,
    pub epsilon: f64,
    /// When set, `A(n) = A(n mod period)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
}

impl GeneratorSpec {
    /// ε actually used: capped by half the smallest band gap and by
    /// `min lo / (2d)` so that every draw stays invertible.
    pub fn effective_epsilon(&self) -> f64 {
        let d = self.bands.len().max(1) as f64;
        let mut sorted = self.bands.clone();
        sorted.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let min_gap = sorted
            .windows(2)
            .map(|w| w[1][0] - w[0][1])
            .fold(f64::INFINITY, f64::min);
        let min_lo = sorted.first().map_or(1.0, |b| b[0]);
        self.epsilon
            .max(0.0)
            .min(0.5 * min_gap)
            .min(min_lo / (2.0 * d))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SequenceKind {
    Constant {
        matrix: Rows,
    },
    Periodic {
        matrices: Vec<Rows>,
    },
    /// Two periodic halves joined at `n = 0`; `nonnegative` governs `n >= 0`.
    Piecewise {
        negative: Vec<Rows>,
        nonnegative: Vec<Rows>,
    },
    Diagonal {
        entries: Vec<ScalarSequence>,
    },
    UpperTriangular {
        diagonal: Vec<ScalarSequence>,
        #[serde(default)]
        off_diagonal: Vec<OffDiagonalEntry>,
    },
    SeededRandom {
        generator: GeneratorSpec,
    },
    /// Matrices `A(start), A(start+1), …` valid only on that finite window.
    Tabulated {
        start: i64,
        matrices: Vec<Rows>,
    },
}

/// Serializable description of a matrix sequence (the scenario-file form).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceDescription {
    pub dimension: usize,
    #[serde(flatten)]
    pub kind: SequenceKind,
    /// Warn when the observed bound exceeds this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_cap: Option<f64>,
}

#[derive(Clone, Debug)]
enum Compiled {
    Constant(DMatrix<f64>),
    Periodic(Vec<DMatrix<f64>>),
    Piecewise {
        negative: Vec<DMatrix<f64>>,
        nonnegative: Vec<DMatrix<f64>>,
    },
    Diagonal(Vec<ScalarSequence>),
    UpperTriangular {
        diagonal: Vec<ScalarSequence>,
        off_diagonal: Vec<OffDiagonalEntry>,
    },
    SeededRandom {
        generator: GeneratorSpec,
        epsilon: f64,
    },
    Tabulated {
        start: i64,
        matrices: Vec<DMatrix<f64>>,
    },
}

/// An immutable, validated matrix sequence.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "SequenceDescription", into = "SequenceDescription")]
pub struct MatrixSequence {
    description: SequenceDescription,
    compiled: Compiled,
}

impl PartialEq for MatrixSequence {
    fn eq(&self, other: &Self) -> bool {
        self.description == other.description
    }
}

impl TryFrom<SequenceDescription> for MatrixSequence {
    type Error = Error;

    fn try_from(description: SequenceDescription) -> Result<Self> {
        MatrixSequence::new(description)
    }
}

impl From<MatrixSequence> for SequenceDescription {
    fn from(seq: MatrixSequence) -> Self {
        seq.description
    }
}

/// Result of [`MatrixSequence::validate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    /// `max(‖A(n)‖, ‖A⁻¹(n)‖)` over the scanned indices.
    pub m_hat: f64,
    pub worst_n: i64,
    /// True when the scan covered a full period, so `m_hat` holds on all of ℤ.
    pub exact_for_all_n: bool,
    pub warnings: Vec<String>,
}

/// Scans longer than this are refused by [`MatrixSequence::validate`].
pub const VALIDATION_SCAN_CAP: u64 = 1_000_000;

fn compile_rows(d: usize, rows: &Rows, what: &str) -> Result<DMatrix<f64>> {
    let m = linalg::from_rows(rows)
        .ok_or_else(|| Error::InvalidSequence(format!("{what}: ragged rows")))?;
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::InvalidSequence(format!(
            "{what}: expected {d}x{d}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidSequence(format!("{what}: non-finite entry")));
    }
    Ok(m)
}

fn compile_list(d: usize, list: &[Rows], what: &str) -> Result<Vec<DMatrix<f64>>> {
    if list.is_empty() {
        return Err(Error::InvalidSequence(format!("{what}: empty matrix list")));
    }
    list.iter()
        .enumerate()
        .map(|(i, r)| compile_rows(d, r, &format!("{what}[{i}]")))
        .collect()
}

/// Invertibility test on the row-equilibrated matrix.
fn check_invertible(m: &DMatrix<f64>, n: i64) -> Result<()> {
    let mut scaled = m.clone();
    for mut row in scaled.row_iter_mut() {
        let max = row.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        if max == 0.0 {
            return Err(Error::Singular { n });
        }
        row /= max;
    }
    let det = scaled.determinant();
    if !det.is_finite() || det.abs() < 1e-13 {
        return Err(Error::Singular { n });
    }
    Ok(())
}

impl MatrixSequence {
    pub fn new(description: SequenceDescription) -> Result<Self> {
        let d = description.dimension;
        if d == 0 {
            return Err(Error::InvalidSequence("dimension must be positive".into()));
        }
        if let Some(cap) = description.bound_cap {
            if !(cap > 0.0) {
                return Err(Error::InvalidSequence("bound_cap must be positive".into()));
            }
        }
        let compiled = match &description.kind {
            SequenceKind::Constant { matrix } => Compiled::Constant(compile_rows(d, matrix, "matrix")?),
            SequenceKind::Periodic { matrices } => Compiled::Periodic(compile_list(d, matrices, "matrices")?),
            SequenceKind::Piecewise {
                negative,
                nonnegative,
            } => Compiled::Piecewise {
                negative: compile_list(d, negative, "negative")?,
                nonnegative: compile_list(d, nonnegative, "nonnegative")?,
            },
            SequenceKind::Diagonal { entries } => {
                if entries.len() != d {
                    return Err(Error::InvalidSequence(format!(
                        "diagonal: expected {d} entries, got {}",
                        entries.len()
                    )));
                }
                for e in entries {
                    e.check_shape(false)?;
                }
                Compiled::Diagonal(entries.clone())
            }
            SequenceKind::UpperTriangular {
                diagonal,
                off_diagonal,
            } => {
                if diagonal.len() != d {
                    return Err(Error::InvalidSequence(format!(
                        "upper-triangular: expected {d} diagonal entries, got {}",
                        diagonal.len()
                    )));
                }
                for e in diagonal {
                    e.check_shape(false)?;
                }
                for e in off_diagonal {
                    if e.row >= e.col || e.col >= d {
                        return Err(Error::InvalidSequence(format!(
                            "off-diagonal entry ({}, {}) is not strictly upper triangular",
                            e.row, e.col
                        )));
                    }
                    e.values.check_shape(true)?;
                }
                Compiled::UpperTriangular {
                    diagonal: diagonal.clone(),
                    off_diagonal: off_diagonal.clone(),
                }
            }
            SequenceKind::SeededRandom { generator } => {
                if generator.bands.len() != d {
                    return Err(Error::InvalidSequence(format!(
                        "seeded-random: expected {d} bands, got {}",
                        generator.bands.len()
                    )));
                }
                if generator.bands.iter().any(|b| !(b[0] > 0.0 && b[1] >= b[0] && b[1].is_finite())) {
                    return Err(Error::InvalidSequence(
                        "seeded-random: bands must satisfy 0 < lo <= hi < inf".into(),
                    ));
                }
                let mut sorted = generator.bands.clone();
                sorted.sort_by(|a, b| a[0].total_cmp(&b[0]));
                if sorted.windows(2).any(|w| w[1][0] < w[0][1]) {
                    return Err(Error::InvalidSequence("seeded-random: bands overlap".into()));
                }
                if generator.period == Some(0) {
                    return Err(Error::InvalidSequence("seeded-random: period must be >= 1".into()));
                }
                Compiled::SeededRandom {
                    epsilon: generator.effective_epsilon(),
                    generator: generator.clone(),
                }
            }
            SequenceKind::Tabulated { start, matrices } => Compiled::Tabulated {
                start: *start,
                matrices: compile_list(d, matrices, "matrices")?,
            },
        };
        Ok(MatrixSequence {
            description,
            compiled,
        })
    }

    pub fn from_kind(dimension: usize, kind: SequenceKind) -> Result<Self> {
        Self::new(SequenceDescription {
            dimension,
            kind,
            bound_cap: None,
        })
    }

    pub fn constant(matrix: &DMatrix<f64>) -> Result<Self> {
        Self::from_kind(
            matrix.nrows(),
            SequenceKind::Constant {
                matrix: linalg::to_rows(matrix),
            },
        )
    }

    pub fn periodic(matrices: &[DMatrix<f64>]) -> Result<Self> {
        let d = matrices.first().map_or(0, |m| m.nrows());
        Self::from_kind(
            d,
            SequenceKind::Periodic {
                matrices: matrices.iter().map(linalg::to_rows).collect(),
            },
        )
    }

    pub fn diagonal(entries: Vec<ScalarSequence>) -> Result<Self> {
        Self::from_kind(entries.len(), SequenceKind::Diagonal { entries })
    }

    pub fn tabulated(start: i64, matrices: &[DMatrix<f64>]) -> Result<Self> {
        let d = matrices.first().map_or(0, |m| m.nrows());
        Self::from_kind(
            d,
            SequenceKind::Tabulated {
                start,
                matrices: matrices.iter().map(linalg::to_rows).collect(),
            },
        )
    }

    pub fn description(&self) -> &SequenceDescription {
        &self.description
    }

    pub fn dimension(&self) -> usize {
        self.description.dimension
    }

    pub fn kind(&self) -> &SequenceKind {
        &self.description.kind
    }

    /// Period on all of ℤ, if the sequence is known to be periodic.
    pub fn period(&self) -> Option<usize> {
        match &self.compiled {
            Compiled::Constant(_) => Some(1),
            Compiled::Periodic(m) => Some(m.len()),
            Compiled::SeededRandom { generator, .. } => generator.period,
            Compiled::Diagonal(entries) => lcm_periods(entries.iter().map(ScalarSequence::period)),
            Compiled::UpperTriangular {
                diagonal,
                off_diagonal,
            } => lcm_periods(
                diagonal
                    .iter()
                    .chain(off_diagonal.iter().map(|e| &e.values))
                    .map(ScalarSequence::period),
            ),
            Compiled::Piecewise { .. } | Compiled::Tabulated { .. } => None,
        }
    }

    /// Indices on which the sequence is defined, if finite.
    pub fn domain(&self) -> Option<(i64, i64)> {
        match &self.compiled {
            Compiled::Tabulated { start, matrices } => Some((*start, start + matrices.len() as i64 - 1)),
            _ => None,
        }
    }

    /// Diagonal scalar sequences for diagonal and upper-triangular kinds.
    pub fn diagonal_scalars(&self) -> Option<&[ScalarSequence]> {
        match &self.compiled {
            Compiled::Diagonal(e) => Some(e),
            Compiled::UpperTriangular { diagonal, .. } => Some(diagonal),
            _ => None,
        }
    }

    /// `A(n)` without the invertibility check.
    fn raw(&self, n: i64) -> Result<DMatrix<f64>> {
        let d = self.dimension();
        Ok(match &self.compiled {
            Compiled::Constant(m) => m.clone(),
            Compiled::Periodic(ms) => ms[n.rem_euclid(ms.len() as i64) as usize].clone(),
            Compiled::Piecewise {
                negative,
                nonnegative,
            } => {
                let side = if n < 0 { negative } else { nonnegative };
                side[n.rem_euclid(side.len() as i64) as usize].clone()
            }
            Compiled::Diagonal(entries) => {
                let diag: Result<Vec<f64>> = entries
                    .iter()
                    .enumerate()
                    .map(|(i, e)| e.evaluate_nonzero(i, n))
                    .collect();
                DMatrix::from_diagonal(&DVector::from_vec(diag?))
            }
            Compiled::UpperTriangular {
                diagonal,
                off_diagonal,
            } => {
                let mut m = DMatrix::zeros(d, d);
                for (i, e) in diagonal.iter().enumerate() {
                    m[(i, i)] = e.evaluate_nonzero(i, n)?;
                }
                for e in off_diagonal {
                    m[(e.row, e.col)] = e.values.evaluate(n);
                }
                m
            }
            Compiled::SeededRandom { generator, epsilon } => {
                let index = match generator.period {
                    Some(p) => n.rem_euclid(p as i64),
                    None => n,
                };
                let mut rng = ChaCha8Rng::seed_from_u64(generator.seed);
                rng.set_stream(index as u64);
                let mut m = DMatrix::zeros(d, d);
                for (i, band) in generator.bands.iter().enumerate() {
                    m[(i, i)] = band[0] + (band[1] - band[0]) * rng.random::<f64>();
                }
                for i in 0..d {
                    for j in 0..d {
                        m[(i, j)] += epsilon * rng.random_range(-1.0..=1.0);
                    }
                }
                m
            }
            Compiled::Tabulated { start, matrices } => {
                let hi = start + matrices.len() as i64 - 1;
                if n < *start || n > hi {
                    return Err(Error::OutOfWindow { n, lo: *start, hi });
                }
                matrices[(n - start) as usize].clone()
            }
        })
    }

    /// `A(n)`; fails if `A(n)` is singular.
    pub fn evaluate(&self, n: i64) -> Result<DMatrix<f64>> {
        let m = self.raw(n)?;
        check_invertible(&m, n)?;
        Ok(m)
    }

    /// `A(n)⁻¹` with a residual check `‖A·A⁻¹ − I‖ ≤ 16·d·ε·cond(A)`.
    pub fn inverse_at(&self, n: i64) -> Result<DMatrix<f64>> {
        let m = self.evaluate(n)?;
        invert_checked(&m, n)
    }

    /// Scans `range` (collapsed to one period for periodic kinds) and returns
    /// the observed bound `max(‖A(n)‖, ‖A⁻¹(n)‖)`.
    pub fn validate(&self, range: (i64, i64)) -> Result<BoundReport> {
        let (lo, hi) = range;
        if hi < lo {
            return Err(Error::InvalidParams(format!("empty range [{lo}, {hi}]")));
        }
        let (scan_lo, scan_hi, exact) = match self.period() {
            Some(p) if (p as u64) <= VALIDATION_SCAN_CAP => (0, p as i64 - 1, true),
            _ => (lo, hi, false),
        };
        let len = (scan_hi - scan_lo) as u64 + 1;
        if len > VALIDATION_SCAN_CAP {
            return Err(Error::WindowCap {
                len,
                cap: VALIDATION_SCAN_CAP,
            });
        }
        let mut m_hat = 0.0f64;
        let mut worst_n = scan_lo;
        for n in scan_lo..=scan_hi {
            let a = self.evaluate(n)?;
            let inv = invert_checked(&a, n)?;
            let bound = spectral_norm(&a).max(spectral_norm(&inv));
            if bound > m_hat {
                m_hat = bound;
                worst_n = n;
            }
        }
        let mut warnings = Vec::new();
        if let Some(cap) = self.description.bound_cap {
            if m_hat > cap {
                warnings.push(format!(
                    "observed bound {m_hat} at n = {worst_n} exceeds bound_cap {cap}"
                ));
            }
        }
        Ok(BoundReport {
            m_hat,
            worst_n,
            exact_for_all_n: exact,
            warnings,
        })
    }
}

pub(crate) fn invert_checked(m: &DMatrix<f64>, n: i64) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    let inv = m.clone().try_inverse().ok_or(Error::Singular { n })?;
    let residual = spectral_norm(&(m * &inv - DMatrix::identity(d, d)));
    let cond = spectral_norm(m) * spectral_norm(&inv);
    if !residual.is_finite() || residual > 16.0 * d as f64 * f64::EPSILON * cond.max(1.0) {
        return Err(Error::NumericallySingular { n, residual });
    }
    Ok(inv)
}

fn lcm_periods(periods: impl Iterator<Item = Option<usize>>) -> Option<usize> {
    let mut acc = 1usize;
    for p in periods {
        let p = p?;
        acc = acc / gcd(acc, p) * p;
    }
    Some(acc)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
