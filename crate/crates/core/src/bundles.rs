//! Invariant projectors along ℤ, spectral bundle fibers at `n = 0`, and the
//! Whitney-sum check.

use std::collections::BTreeMap;
use std::sync::Mutex;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dichotomy::{Certificate, DichotomyVerdict, SpectrumEstimate};
use crate::error::{Error, Result};
use crate::linalg::{from_rows, min_principal_angle, null_space, smallest_singular_value, to_rows};
use crate::seqmodel::{MatrixSequence, Rows};
use crate::transition::transition;

/// Drift below this is accepted as is.
pub const DRIFT_SILENT: f64 = 1e-9;
/// Drift up to this is repaired with a warning; beyond it is an error.
pub const DRIFT_REPAIR: f64 = 1e-6;
/// Relative singular-value cutoff for subspace intersections.
pub const INTERSECTION_CUTOFF: f64 = 1e-8;
/// Default transversality threshold of the Whitney-sum check.
pub const WHITNEY_THRESHOLD: f64 = 1e-3;

/// `P(n) = X(n, 0) P(0) X(0, n)` for a dichotomy projector `P(0)`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ProjectorFamily {
    pub gamma: f64,
    pub base: Rows,
    pub rank: usize,
    #[serde(skip)]
    cache: Mutex<BTreeMap<i64, DMatrix<f64>>>,
}

impl Clone for ProjectorFamily {
    fn clone(&self) -> Self {
        ProjectorFamily {
            gamma: self.gamma,
            base: self.base.clone(),
            rank: self.rank,
            cache: Mutex::new(self.cache.lock().expect("cache lock").clone()),
        }
    }
}

impl ProjectorFamily {
    pub fn new(gamma: f64, base: &DMatrix<f64>, rank: usize) -> Self {
        ProjectorFamily {
            gamma,
            base: to_rows(base),
            rank,
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn from_certificate(gamma: f64, cert: &Certificate) -> Self {
        Self::new(gamma, &cert.projector(), cert.rank)
    }

    pub fn base_matrix(&self) -> DMatrix<f64> {
        from_rows(&self.base).expect("rectangular projector")
    }
}

/// Idempotency and trace defect of a would-be rank-`rank` projector.
pub fn projector_drift(p: &DMatrix<f64>, rank: usize) -> f64 {
    let idem = crate::linalg::spectral_norm(&(p * p - p));
    idem.max((p.trace() - rank as f64).abs())
}

/// Nearest-structure repair: keep the rank-`rank` range and co-range of `p`
/// and rebuild the oblique projector `Q (YᵀQ)⁻¹ Yᵀ` between them.
fn repair_projector(p: &DMatrix<f64>, rank: usize) -> Option<DMatrix<f64>> {
    let d = p.nrows();
    if rank == 0 {
        return Some(DMatrix::zeros(d, d));
    }
    if rank == d {
        return Some(DMatrix::identity(d, d));
    }
    let svd = p.clone().svd(true, true);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = svd.u.as_ref()?;
    let v_t = svd.v_t.as_ref()?;
    let q = DMatrix::from_fn(d, rank, |i, j| u[(i, order[j])]);
    let y = DMatrix::from_fn(d, rank, |i, j| v_t[(order[j], i)]);
    let inner = (y.transpose() * &q).try_inverse()?;
    Some(q * inner * y.transpose())
}

/// `P(n)` by conjugation with scaled transition matrices. Results are cached
/// per family.
pub fn projector_at(fam: &ProjectorFamily, seq: &MatrixSequence, n: i64) -> Result<DMatrix<f64>> {
    if let Some(p) = fam.cache.lock().expect("cache lock").get(&n) {
        return Ok(p.clone());
    }
    let base = fam.base_matrix();
    if base.nrows() != seq.dimension() {
        return Err(Error::DimensionMismatch {
            expected: seq.dimension(),
            got: base.nrows(),
        });
    }
    let p = if n == 0 {
        base
    } else {
        let forward = transition(seq, n, 0)?;
        let backward = transition(seq, 0, n)?;
        let scale = (forward.log_scale() + backward.log_scale()).exp();
        let p = forward.core() * base * backward.core() * scale;
        let drift = projector_drift(&p, fam.rank);
        if drift <= DRIFT_SILENT {
            p
        } else if drift <= DRIFT_REPAIR {
            log::warn!("projector at n = {n} drifted by {drift:.3e}; repaired");
            repair_projector(&p, fam.rank).ok_or(Error::ProjectorDrift { n, drift })?
        } else {
            return Err(Error::ProjectorDrift { n, drift });
        }
    };
    fam.cache.lock().expect("cache lock").insert(n, p.clone());
    Ok(p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralBundleFiber {
    /// `i` of `W_i`, counting spectral intervals from 1.
    pub index: usize,
    /// Orthonormal columns spanning `W_i(0)`, as rows.
    pub basis: Rows,
    pub dimension: usize,
}

impl SpectralBundleFiber {
    pub fn basis_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.basis.len(), self.dimension, |i, j| self.basis[i][j])
    }
}

/// Orthonormal basis of the intersection of two column spans (both given
/// by orthonormal columns).
pub fn intersect_subspaces(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.nrows();
    let eye = DMatrix::<f64>::identity(d, d);
    let mut stacked = DMatrix::zeros(2 * d, d);
    stacked.rows_mut(0, d).copy_from(&(&eye - a * a.transpose()));
    stacked.rows_mut(d, d).copy_from(&(&eye - b * b.transpose()));
    null_space(&stacked, INTERSECTION_CUTOFF)
}

fn fibers_from_splittings(splittings: &[(DMatrix<f64>, DMatrix<f64>)], d: usize) -> Result<Vec<SpectralBundleFiber>> {
    let fibers: Vec<SpectralBundleFiber> = (1..splittings.len())
        .into_par_iter()
        .map(|i| {
            let kernel = &splittings[i - 1].1;
            let image = &splittings[i].0;
            let basis = intersect_subspaces(kernel, image);
            SpectralBundleFiber {
                index: i,
                dimension: basis.ncols(),
                basis: to_rows(&basis),
            }
        })
        .collect();
    let total: usize = fibers.iter().map(|f| f.dimension).sum();
    if total != d {
        return Err(Error::DimensionMismatch { expected: d, got: total });
    }
    Ok(fibers)
}

/// `W_i(0) = ker P_{γ_{i−1}}(0) ∩ im P_{γ_i}(0)` for `i = 1 … ℓ`, from one
/// certificate per resolvent gap, left to right.
pub fn bundle_fibers(spectrum: &SpectrumEstimate, certs: &[DichotomyVerdict]) -> Result<Vec<SpectralBundleFiber>> {
    if certs.len() != spectrum.intervals.len() + 1 {
        return Err(Error::InvalidParams(format!(
            "need {} gap certificates, got {}",
            spectrum.intervals.len() + 1,
            certs.len()
        )));
    }
    let mut splittings = Vec::with_capacity(certs.len());
    let mut d = 0;
    for (i, v) in certs.iter().enumerate() {
        let c = v.certificate().ok_or_else(|| {
            Error::InvalidParams(format!("gap {i} verdict at γ = {} is not a certificate", v.gamma))
        })?;
        if c.rank != spectrum.gap_ranks[i] {
            return Err(Error::InvalidParams(format!(
                "gap {i}: certificate rank {} differs from estimated rank {}",
                c.rank, spectrum.gap_ranks[i]
            )));
        }
        d = c.stable_basis.len();
        splittings.push((c.stable(), c.unstable()));
    }
    fibers_from_splittings(&splittings, d)
}

/// Fibers at an arbitrary `n` from the projectors `P_{γ_0}(n), …, P_{γ_ℓ}(n)`.
pub fn fibers_from_projectors(projectors: &[DMatrix<f64>]) -> Result<Vec<SpectralBundleFiber>> {
    let d = projectors.first().map_or(0, |p| p.nrows());
    let splittings: Vec<_> = projectors
        .iter()
        .map(|p| {
            let image = range_basis(p);
            let kernel = null_space(p, INTERSECTION_CUTOFF);
            (image, kernel)
        })
        .collect();
    fibers_from_splittings(&splittings, d)
}

fn range_basis(p: &DMatrix<f64>) -> DMatrix<f64> {
    let d = p.nrows();
    let svd = p.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let scale = svd.singular_values.iter().fold(1.0f64, |a, &s| a.max(s));
    let cols: Vec<_> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > INTERSECTION_CUTOFF * scale)
        .map(|i| u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairAngle {
    pub first: usize,
    pub second: usize,
    pub angle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhitneyReport {
    pub dimension: usize,
    pub dimension_sum: usize,
    pub smallest_singular_value: f64,
    pub threshold: f64,
    pub pairwise_angles: Vec<PairAngle>,
    pub pass: bool,
}

pub fn whitney_sum_check(fibers: &[SpectralBundleFiber]) -> WhitneyReport {
    whitney_sum_check_with(fibers, WHITNEY_THRESHOLD)
}

pub fn whitney_sum_check_with(fibers: &[SpectralBundleFiber], threshold: f64) -> WhitneyReport {
    let d = fibers.first().map_or(0, |f| f.basis.len());
    let dimension_sum: usize = fibers.iter().map(|f| f.dimension).sum();
    let bases: Vec<DMatrix<f64>> = fibers.iter().map(SpectralBundleFiber::basis_matrix).collect();
    let mut stacked = DMatrix::zeros(d, dimension_sum);
    let mut col = 0;
    for b in &bases {
        stacked.columns_mut(col, b.ncols()).copy_from(b);
        col += b.ncols();
    }
    let smallest = if dimension_sum == 0 { 0.0 } else { smallest_singular_value(&stacked) };
    let mut pairwise_angles = Vec::new();
    for i in 0..fibers.len() {
        for j in i + 1..fibers.len() {
            pairwise_angles.push(PairAngle {
                first: fibers[i].index,
                second: fibers[j].index,
                angle: min_principal_angle(&bases[i], &bases[j]),
            });
        }
    }
    WhitneyReport {
        dimension: d,
        dimension_sum,
        smallest_singular_value: smallest,
        threshold,
        pairwise_angles,
        pass: dimension_sum == d && d > 0 && smallest >= threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dichotomy::{estimate_spectrum, gap_certificates, DichotomyAnalyzer, SpectrumParams, DichotomyParams};
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn fiber(index: usize, v: &[f64]) -> SpectralBundleFiber {
        SpectralBundleFiber {
            index,
            basis: v.iter().map(|&x| vec![x]).collect(),
            dimension: 1,
        }
    }

    #[test]
    fn whitney_examples() {
        let ok = whitney_sum_check(&[fiber(1, &[1.0, 0.0]), fiber(2, &[0.0, 1.0])]);
        assert!(ok.pass);
        assert_relative_eq!(ok.smallest_singular_value, 1.0, epsilon = 1e-14);
        let dup = whitney_sum_check(&[fiber(1, &[1.0, 0.0]), fiber(2, &[1.0, 0.0])]);
        assert!(!dup.pass);
        assert_eq!(dup.dimension_sum, 2);
        assert!(dup.smallest_singular_value < 1e-12);
    }

    #[test]
    fn repair_recovers_projector() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let noisy = &p + DMatrix::from_element(2, 2, 1e-8);
        let fixed = repair_projector(&noisy, 1).unwrap();
        assert!(projector_drift(&fixed, 1) < 1e-14);
        assert!((fixed - p).norm() < 1e-7);
    }

    #[test]
    fn diagonal_fibers_and_projectors() {
        let seq = MatrixSequence::constant(&DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5]))).unwrap();
        let params = SpectrumParams {
            dichotomy: DichotomyParams {
                window: 128,
                ..DichotomyParams::default()
            },
            ..SpectrumParams::default()
        };
        let analyzer = DichotomyAnalyzer::new(&seq, &params.dichotomy).unwrap();
        let spec = estimate_spectrum(&seq, &params).unwrap();
        let certs = gap_certificates(&analyzer, &spec);
        let fibers = bundle_fibers(&spec, &certs).unwrap();
        assert_eq!(fibers.len(), 2);
        assert_relative_eq!(fibers[0].basis[1][0].abs(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(fibers[1].basis[0][0].abs(), 1.0, epsilon = 1e-12);

        let fam = ProjectorFamily::from_certificate(1.0, certs[1].certificate().unwrap());
        for n in [-5, 0, 9] {
            let p = projector_at(&fam, &seq, n).unwrap();
            assert_relative_eq!(p, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]), epsilon = 1e-12);
        }
    }
}
