//! Seeded system families with known spectra, used by the verification
//! harness, the CLI and the test suites.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{condition_number, to_rows};
use crate::seqmodel::{GeneratorSpec, MatrixSequence, OffDiagonalEntry, ScalarSequence, SequenceKind};

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A diagonal system together with the exact scalar spectrum of each coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandedDiagonal {
    pub system: MatrixSequence,
    /// `[lo, hi]` for each coordinate, in coordinate order.
    pub bands: Vec<(f64, f64)>,
}

impl BandedDiagonal {
    /// Bands sorted ascending: the exact dichotomy spectrum.
    pub fn spectrum(&self) -> Vec<(f64, f64)> {
        let mut b = self.bands.clone();
        b.sort_by(|x, y| x.0.total_cmp(&y.0));
        b
    }
}

/// Minimal ratio between consecutive bands of [`banded_diagonal`].
pub const BAND_SEPARATION: f64 = 1.5;

/// Diagonal system whose coordinates are constant, periodic (period ≤ 4) or
/// piecewise scalar sequences with pairwise separated spectra.
pub fn banded_diagonal(seed: u64, d: usize) -> Result<BandedDiagonal> {
    let mut rng = rng_for(seed, 11);
    let mut x: f64 = -1.0 + rng.random_range(0.0..0.2);
    let mut entries = Vec::with_capacity(d);
    for _ in 0..d {
        let (entry, width) = match rng.random_range(0..3) {
            0 => (ScalarSequence::Constant { value: x.exp() }, 0.0),
            1 => {
                let p = rng.random_range(2..=4);
                let mut dev: Vec<f64> = (0..p).map(|_| rng.random_range(-0.5..0.5)).collect();
                let mean = dev.iter().sum::<f64>() / p as f64;
                dev.iter_mut().for_each(|v| *v -= mean);
                let values = dev.iter().map(|v| (x + v).exp()).collect();
                (ScalarSequence::Periodic { values }, 0.0)
            }
            _ => {
                let w: f64 = rng.random_range(0.2..0.6);
                let (lo, hi) = (x.exp(), (x + w).exp());
                let entry = if rng.random_bool(0.5) {
                    ScalarSequence::Piecewise { negative: vec![lo], nonnegative: vec![hi] }
                } else {
                    ScalarSequence::Piecewise { negative: vec![hi], nonnegative: vec![lo] }
                };
                (entry, w)
            }
        };
        entries.push((entry, (x.exp(), (x + width).exp())));
        x += width + BAND_SEPARATION.ln() + rng.random_range(0.05..0.3);
    }
    entries.shuffle(&mut rng);
    let (scalars, bands): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
    Ok(BandedDiagonal {
        system: MatrixSequence::diagonal(scalars)?,
        bands,
    })
}

fn well_conditioned(rng: &mut ChaCha8Rng, d: usize, max_cond: f64) -> DMatrix<f64> {
    loop {
        let m = DMatrix::from_fn(d, d, |i, j| {
            let g: f64 = rng.sample(StandardNormal);
            0.6 * g + if i == j { 1.0 } else { 0.0 }
        });
        if condition_number(&m) <= max_cond {
            return m;
        }
    }
}

/// Full periodic system with `p` random matrices of condition number ≤ 8.
pub fn random_periodic(seed: u64, d: usize, p: usize) -> Result<MatrixSequence> {
    let mut rng = rng_for(seed, 12);
    let mats: Vec<DMatrix<f64>> = (0..p).map(|_| well_conditioned(&mut rng, d, 8.0)).collect();
    MatrixSequence::periodic(&mats)
}

/// Non-periodic seeded random system `D(n) + ε N(n)` with separated bands.
pub fn random_banded(seed: u64, d: usize) -> Result<MatrixSequence> {
    let mut rng = rng_for(seed, 13);
    let mut lo: f64 = rng.random_range(0.3..0.5);
    let mut bands = Vec::with_capacity(d);
    for _ in 0..d {
        let hi = lo * rng.random_range(1.1..1.4);
        bands.push([lo, hi]);
        lo = hi * rng.random_range(1.5..2.0);
    }
    bands.shuffle(&mut rng);
    MatrixSequence::from_kind(
        d,
        SequenceKind::SeededRandom {
            generator: GeneratorSpec {
                seed,
                bands,
                epsilon: 0.05,
                period: None,
            },
        },
    )
}

/// One system of every kind in turn (`index` modulo 7), dimension `d`.
pub fn kind_zoo(seed: u64, index: usize, d: usize) -> Result<MatrixSequence> {
    let mut rng = rng_for(seed, 14 + index as u64);
    let scalar = |rng: &mut ChaCha8Rng| -> ScalarSequence {
        let v = |rng: &mut ChaCha8Rng| rng.random_range(0.4f64..2.5) * if rng.random_bool(0.2) { -1.0 } else { 1.0 };
        match rng.random_range(0..3) {
            0 => ScalarSequence::Constant { value: v(rng) },
            1 => ScalarSequence::Periodic {
                values: (0..rng.random_range(2..=4)).map(|_| v(rng)).collect(),
            },
            _ => ScalarSequence::Piecewise {
                negative: vec![v(rng)],
                nonnegative: vec![v(rng)],
            },
        }
    };
    let kind = match index % 7 {
        0 => SequenceKind::Constant {
            matrix: to_rows(&well_conditioned(&mut rng, d, 8.0)),
        },
        1 => SequenceKind::Periodic {
            matrices: (0..rng.random_range(2..=4))
                .map(|_| to_rows(&well_conditioned(&mut rng, d, 8.0)))
                .collect(),
        },
        2 => SequenceKind::Piecewise {
            negative: vec![to_rows(&well_conditioned(&mut rng, d, 8.0))],
            nonnegative: (0..2).map(|_| to_rows(&well_conditioned(&mut rng, d, 8.0))).collect(),
        },
        3 => SequenceKind::Diagonal {
            entries: (0..d).map(|_| scalar(&mut rng)).collect(),
        },
        4 => {
            let diagonal = (0..d).map(|_| scalar(&mut rng)).collect();
            let mut off_diagonal = Vec::new();
            for row in 0..d {
                for col in row + 1..d {
                    off_diagonal.push(OffDiagonalEntry {
                        row,
                        col,
                        values: ScalarSequence::Piecewise {
                            negative: vec![rng.random_range(-1.0..1.0)],
                            nonnegative: vec![rng.random_range(-1.0..1.0)],
                        },
                    });
                }
            }
            SequenceKind::UpperTriangular {
                diagonal,
                off_diagonal,
            }
        }
        5 => return random_banded(rng.random(), d),
        _ => SequenceKind::Tabulated {
            start: -400,
            matrices: (0..801).map(|_| to_rows(&well_conditioned(&mut rng, d, 8.0))).collect(),
        },
    };
    MatrixSequence::from_kind(d, kind)
}
