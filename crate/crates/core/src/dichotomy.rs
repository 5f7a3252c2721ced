//! Finite-window exponential dichotomy certificates for the scaled systems
//! `x(n+1) = γ⁻¹ A(n) x(n)` and the dichotomy spectrum built from them.
//!
//! The analysis runs two orthogonal sweeps over `[−N, N]`:
//!
//! * the adjoint cocycle `Aᵀ` backward from `N`, whose QR flags give, for every
//!   rank `r`, an exactly invariant family `S_n` of the `r` slowest forward
//!   directions together with the restricted cocycle on it;
//! * the inverse adjoint `A⁻ᵀ` forward from `−N`, giving the invariant family
//!   `U_n` of directions that decay backward.
//!
//! Both families and all sampled norms are independent of `γ`; scaling only
//! shifts log-norms by `g·log γ`, so one [`DichotomyAnalyzer`] answers every
//! `γ` query for a system.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, min_principal_angle, qr_positive, random_orthogonal, spectral_norm};
use crate::report::{csv, fmt_f64};
use crate::seqmodel::{MatrixSequence, Rows, ScalarSequence};
use crate::transition::{transition, SampledWindow};
use crate::bohl::{scalar_bohl, BohlParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomyParams {
    /// Half-width `N` of the analysis window `[−N, N]`.
    pub window: usize,
    /// Minimal angle (radians) between stable and unstable subspaces.
    pub theta_min: f64,
    /// A direction counts as decaying when its singular value of
    /// `X_γ(±N, 0)` is below `rho_split^N`.
    pub rho_split: f64,
    /// Certificates need a fitted `ρ ≤ 1 − delta_fit`.
    pub delta_fit: f64,
    /// Spacing of base points `l` used for decay samples.
    pub base_stride: usize,
    /// Spacing of recorded gaps `|k − l|`.
    pub gap_stride: usize,
    /// Seed of the random orthogonal start frames of both sweeps.
    pub seed: u64,
}

impl Default for DichotomyParams {
    fn default() -> Self {
        DichotomyParams {
            window: 1024,
            theta_min: 1e-3,
            rho_split: 1.0,
            delta_fit: 1e-4,
            base_stride: 16,
            gap_stride: 4,
            seed: 0x5eed,
        }
    }
}

impl DichotomyParams {
    pub fn check(&self) -> Result<()> {
        if self.window < 16 {
            return Err(Error::InvalidParams("dichotomy window must be at least 16".into()));
        }
        if self.base_stride == 0 || self.gap_stride == 0 {
            return Err(Error::InvalidParams("strides must be positive".into()));
        }
        if !(self.rho_split > 0.0 && self.rho_split <= 1.0) {
            return Err(Error::InvalidParams("rho_split must lie in (0, 1]".into()));
        }
        if !(self.delta_fit >= 0.0 && self.delta_fit < 1.0) {
            return Err(Error::InvalidParams("delta_fit must lie in [0, 1)".into()));
        }
        if !(self.theta_min >= 0.0) {
            return Err(Error::InvalidParams("theta_min must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One decay observation: `log ‖·‖` of a transition over `gap` steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySample {
    pub gap: u64,
    pub log_norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub k: f64,
    pub rho: f64,
    /// Root-mean-square residual of the least-squares line.
    pub residual: f64,
    pub max_gap: u64,
}

/// Least squares on `log ‖·‖ ≈ log K + gap · log ρ`, then `log K` is raised to
/// the largest residual so every sample lies on or below the line. Samples
/// sharing a gap are first reduced to their maximum: the bound has to hold
/// uniformly in the base point, so only the worst one matters.
pub fn fit_decay_constants(samples: &[DecaySample]) -> Result<DecayFit> {
    if samples.len() < 8 {
        return Err(Error::InvalidParams(format!(
            "decay fit needs at least 8 samples, got {}",
            samples.len()
        )));
    }
    let mut worst: BTreeMap<u64, f64> = BTreeMap::new();
    for s in samples {
        let e = worst.entry(s.gap).or_insert(f64::NEG_INFINITY);
        *e = e.max(s.log_norm);
    }
    if worst.len() < 2 {
        return Err(Error::InvalidParams("decay samples must span several gaps".into()));
    }
    let n = worst.len() as f64;
    let mean_g = worst.keys().map(|&g| g as f64).sum::<f64>() / n;
    let mean_y = worst.values().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&g, &y) in &worst {
        let dg = g as f64 - mean_g;
        sxx += dg * dg;
        sxy += dg * (y - mean_y);
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::FitFailed { slope });
    }
    let intercept = mean_y - slope * mean_g;
    let mut log_k = f64::NEG_INFINITY;
    let mut ss = 0.0;
    for (&g, &y) in &worst {
        let r = y - intercept - slope * g as f64;
        ss += r * r;
        log_k = log_k.max(intercept + r);
    }
    Ok(DecayFit {
        k: log_k.exp(),
        rho: slope.exp(),
        residual: (ss / n).sqrt(),
        max_gap: *worst.keys().next_back().unwrap_or(&0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    /// Singular values adjacent to the split are within a factor 2.
    SplittingDegenerate,
    /// Stable and unstable candidate dimensions do not add up to `d`.
    DimensionMismatch,
    DecayFitFailed,
    TransversalityLost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Orthonormal columns spanning `S(0) = im P(0)`, as rows.
    pub stable_basis: Rows,
    /// Orthonormal columns spanning `U(0) = ker P(0)`, as rows.
    pub unstable_basis: Rows,
    pub rank: usize,
    pub k: f64,
    pub rho: f64,
    pub window: usize,
    pub fit_residual: f64,
    /// Per-step log slack `−log ρ − log K / max_gap`, the smaller over the
    /// stable and unstable fits.
    pub margin: f64,
    pub min_angle: f64,
}

impl Certificate {
    pub fn stable(&self) -> DMatrix<f64> {
        basis_from_rows(&self.stable_basis, self.rank)
    }

    pub fn unstable(&self) -> DMatrix<f64> {
        let d = self.stable_basis.len().max(self.unstable_basis.len());
        basis_from_rows(&self.unstable_basis, d - self.rank)
    }

    /// `P(0)`: projection onto `S(0)` along `U(0)`.
    pub fn projector(&self) -> DMatrix<f64> {
        let s = self.stable();
        let u = self.unstable();
        let d = s.nrows();
        if self.rank == 0 {
            return DMatrix::zeros(d, d);
        }
        if self.rank == d {
            return DMatrix::identity(d, d);
        }
        let mut b = DMatrix::zeros(d, d);
        b.columns_mut(0, self.rank).copy_from(&s);
        b.columns_mut(self.rank, d - self.rank).copy_from(&u);
        let inv = b.clone().try_inverse().expect("transversal splitting");
        &s * inv.rows(0, self.rank)
    }
}

fn basis_from_rows(rows: &Rows, cols: usize) -> DMatrix<f64> {
    let d = rows.len();
    if cols == 0 {
        return DMatrix::zeros(d, 0);
    }
    DMatrix::from_fn(d, cols, |i, j| rows[i][j])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InSpectrum {
    pub reason: FailureReason,
    pub margin: f64,
    pub low_confidence: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Outcome {
    Certificate(Certificate),
    InSpectrum(InSpectrum),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomyVerdict {
    pub gamma: f64,
    #[serde(flatten)]
    pub outcome: Outcome,
}

impl DichotomyVerdict {
    pub fn certificate(&self) -> Option<&Certificate> {
        match &self.outcome {
            Outcome::Certificate(c) => Some(c),
            Outcome::InSpectrum(_) => None,
        }
    }

    pub fn rank(&self) -> Option<usize> {
        self.certificate().map(|c| c.rank)
    }

    pub fn is_certificate(&self) -> bool {
        self.certificate().is_some()
    }

    pub fn margin(&self) -> f64 {
        match &self.outcome {
            Outcome::Certificate(c) => c.margin,
            Outcome::InSpectrum(s) => s.margin,
        }
    }
}

/// γ-independent decay data for one candidate rank.
#[derive(Clone, Debug)]
struct RankData {
    stable: Vec<DecaySample>,
    unstable: Vec<DecaySample>,
    min_angle: f64,
}

/// Precomputed sweeps and decay samples for one system.
#[derive(Clone, Debug)]
pub struct DichotomyAnalyzer {
    params: DichotomyParams,
    dimension: usize,
    m_hat: f64,
    /// `Z_n` for `n ∈ [−N, N]`; trailing columns span the slow forward flags.
    z: Vec<DMatrix<f64>>,
    /// `W_n` for `n ∈ [−N, N]`; trailing columns span backward-decaying flags.
    w: Vec<DMatrix<f64>>,
    /// Forward log growth over N steps per flag direction, ≈ `log σ_i(X(N, 0))`.
    forward_logs: Vec<f64>,
    /// Same for the backward direction, ≈ `log σ_i(X(−N, 0))`.
    backward_logs: Vec<f64>,
    ranks: Vec<RankData>,
}

/// `log ‖M‖` tracker for short products of small matrices.
struct LogProduct {
    m: DMatrix<f64>,
    scale: f64,
}

impl LogProduct {
    fn new(m: DMatrix<f64>) -> Self {
        let mut p = LogProduct { m, scale: 0.0 };
        p.renormalize();
        p
    }

    fn left_mul(&mut self, a: nalgebra::DMatrixView<'_, f64>) {
        self.m = a * &self.m;
        self.renormalize();
    }

    fn renormalize(&mut self) {
        let f = self.m.norm();
        if f > 0.0 && !(0.5..=2.0).contains(&f) {
            self.m /= f;
            self.scale += f.ln();
        }
    }

    fn log_norm(&self) -> f64 {
        self.scale + spectral_norm(&self.m).ln()
    }
}

impl DichotomyAnalyzer {
    pub fn new(seq: &MatrixSequence, params: &DichotomyParams) -> Result<Self> {
        params.check()?;
        let n = params.window as i64;
        let d = seq.dimension();
        let window = SampledWindow::new(seq, -n, n - 1)?;
        let idx = |k: i64| (k + n) as usize;
        let len = (2 * n + 1) as usize;

        // Backward sweep of the adjoint: Aᵀ(k) Z_{k+1} = Z_k R'_k.
        let mut z = vec![DMatrix::zeros(0, 0); len];
        let mut rp = vec![DMatrix::zeros(0, 0); len - 1];
        z[idx(n)] = random_orthogonal(d, params.seed, 1);
        for k in (-n..n).rev() {
            let (q, r) = qr_positive(&(window.a(k).transpose() * &z[idx(k + 1)]));
            z[idx(k)] = q;
            rp[idx(k)] = r;
        }
        // Forward sweep of the inverse adjoint: A⁻ᵀ(k) W_k = W_{k+1} R''_k.
        let mut w = vec![DMatrix::zeros(0, 0); len];
        let mut rpp = vec![DMatrix::zeros(0, 0); len - 1];
        w[idx(-n)] = random_orthogonal(d, params.seed, 2);
        for k in -n..n {
            let (q, r) = qr_positive(&(window.a_inv(k).transpose() * &w[idx(k)]));
            w[idx(k + 1)] = q;
            rpp[idx(k)] = r;
        }
        // Rates are read off the half of each sweep farthest from its random
        // start frame, then scaled back to N steps. Whole periods only, so the
        // converged periodic QR flow gives exact Floquet rates.
        let mut half = n / 2;
        if let Some(p) = seq.period().map(|p| p as i64) {
            if p <= half {
                half -= half % p;
            }
        }
        let to_window = n as f64 / half as f64;
        let forward_logs: Vec<f64> = (0..d)
            .map(|i| to_window * (0..half).map(|k| rp[idx(k)][(i, i)].ln()).sum::<f64>())
            .collect();
        let backward_logs: Vec<f64> = (0..d)
            .map(|i| to_window * (-half..0).map(|k| rpp[idx(k)][(i, i)].ln()).sum::<f64>())
            .collect();

        let core_lo = -n / 2;
        let core_hi = n / 2;
        let ranks: Vec<RankData> = (0..=d)
            .into_par_iter()
            .map(|r| {
                let mut stable = Vec::new();
                let mut unstable = Vec::new();
                let gs = params.gap_stride as i64;
                for l in (core_lo..=core_hi).step_by(params.base_stride) {
                    let mut b = DMatrix::zeros(d, d);
                    b.columns_mut(0, r).copy_from(&z[idx(l)].columns(d - r, r));
                    b.columns_mut(r, d - r).copy_from(&w[idx(l)].columns(r, d - r));
                    let Some(inv) = b.try_inverse() else {
                        continue;
                    };
                    if r > 0 {
                        let mut p = LogProduct::new(inv.rows(0, r).into_owned());
                        stable.push(DecaySample { gap: 0, log_norm: p.log_norm() });
                        for k in l..core_hi {
                            let block = rp[idx(k)].view((d - r, d - r), (r, r)).transpose();
                            p.left_mul(block.as_view());
                            let g = k + 1 - l;
                            if g % gs == 0 {
                                stable.push(DecaySample { gap: g as u64, log_norm: p.log_norm() });
                            }
                        }
                    }
                    if r < d {
                        let mut p = LogProduct::new(inv.rows(r, d - r).into_owned());
                        unstable.push(DecaySample { gap: 0, log_norm: p.log_norm() });
                        for m in (core_lo..l).rev() {
                            let block = rpp[idx(m)].view((r, r), (d - r, d - r)).transpose();
                            p.left_mul(block.as_view());
                            let g = l - m;
                            if g % gs == 0 {
                                unstable.push(DecaySample { gap: g as u64, log_norm: p.log_norm() });
                            }
                        }
                    }
                }
                let min_angle = if r == 0 || r == d {
                    std::f64::consts::FRAC_PI_2
                } else {
                    min_principal_angle(
                        &z[idx(0)].columns(d - r, r).into_owned(),
                        &w[idx(0)].columns(r, d - r).into_owned(),
                    )
                };
                RankData {
                    stable,
                    unstable,
                    min_angle,
                }
            })
            .collect();

        Ok(DichotomyAnalyzer {
            params: *params,
            dimension: d,
            m_hat: window.bound(),
            z,
            w,
            forward_logs,
            backward_logs,
            ranks,
        })
    }

    pub fn params(&self) -> &DichotomyParams {
        &self.params
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Observed `max(‖A(n)‖, ‖A⁻¹(n)‖)` on the analysis window.
    pub fn m_hat(&self) -> f64 {
        self.m_hat
    }

    /// Estimated forward growth rates `σ_i(X(N, 0))^{1/N}`.
    pub fn forward_rates(&self) -> Vec<f64> {
        let n = self.params.window as f64;
        self.forward_logs.iter().map(|l| (l / n).exp()).collect()
    }

    /// Orthonormal basis of the rank-`r` stable family at `n ∈ [−N, N]`.
    pub fn stable_basis_at(&self, r: usize, n: i64) -> DMatrix<f64> {
        let d = self.dimension;
        self.z[(n + self.params.window as i64) as usize]
            .columns(d - r, r)
            .into_owned()
    }

    /// Orthonormal basis of the unstable family complementary to rank `r` at `n`.
    pub fn unstable_basis_at(&self, r: usize, n: i64) -> DMatrix<f64> {
        let d = self.dimension;
        self.w[(n + self.params.window as i64) as usize]
            .columns(r, d - r)
            .into_owned()
    }

    /// Certify or refute an exponential dichotomy of the `γ`-scaled system.
    pub fn verdict(&self, gamma: f64) -> DichotomyVerdict {
        let d = self.dimension;
        let n = self.params.window as f64;
        let lg = gamma.ln();
        let threshold = n * self.params.rho_split.ln();
        let trailing = |logs: &[f64], shift: f64| {
            logs.iter()
                .rev()
                .take_while(|&&l| l + shift < threshold)
                .count()
        };
        let s = trailing(&self.forward_logs, -n * lg);
        let u = trailing(&self.backward_logs, n * lg);
        let in_spectrum = |reason, margin, low_confidence| DichotomyVerdict {
            gamma,
            outcome: Outcome::InSpectrum(InSpectrum {
                reason,
                margin,
                low_confidence,
            }),
        };

        let degenerate = |logs: &[f64], count: usize| {
            count > 0 && count < d && (logs[d - count - 1] - logs[d - count]).abs() < 2f64.ln()
        };
        if degenerate(&self.forward_logs, s) || degenerate(&self.backward_logs, u) {
            return in_spectrum(FailureReason::SplittingDegenerate, 0.0, true);
        }
        if s + u != d {
            // Distance in log-rate from γ to the nearest observed rate.
            let nearest = self
                .forward_logs
                .iter()
                .map(|l| (l / n - lg).abs())
                .chain(self.backward_logs.iter().map(|l| (l / n + lg).abs()))
                .fold(f64::INFINITY, f64::min);
            return in_spectrum(FailureReason::DimensionMismatch, -nearest, false);
        }
        let rank = s;
        let data = &self.ranks[rank];
        if data.min_angle < self.params.theta_min {
            return in_spectrum(FailureReason::TransversalityLost, data.min_angle - self.params.theta_min, false);
        }

        let shifted = |samples: &[DecaySample], sign: f64| -> Vec<DecaySample> {
            samples
                .iter()
                .map(|s| DecaySample {
                    gap: s.gap,
                    log_norm: s.log_norm + sign * s.gap as f64 * lg,
                })
                .collect()
        };
        let mut fits = Vec::new();
        if rank > 0 {
            fits.push(fit_decay_constants(&shifted(&data.stable, -1.0)));
        }
        if rank < d {
            fits.push(fit_decay_constants(&shifted(&data.unstable, 1.0)));
        }
        // Each half must resolve its own decay: K_j ρ_j^{g_max} < 1.
        let mut k = 0.0f64;
        let mut rho = 0.0f64;
        let mut residual = 0.0f64;
        let mut margin = f64::INFINITY;
        for fit in fits {
            match fit {
                Ok(f) => {
                    k = k.max(f.k);
                    rho = rho.max(f.rho);
                    residual = residual.max(f.residual);
                    margin = margin.min(-f.rho.ln() - f.k.ln() / f.max_gap.max(1) as f64);
                }
                Err(Error::FitFailed { slope }) => {
                    return in_spectrum(FailureReason::DecayFitFailed, -slope, false);
                }
                Err(_) => return in_spectrum(FailureReason::DecayFitFailed, f64::NEG_INFINITY, true),
            }
        }
        if rho > 1.0 - self.params.delta_fit || margin <= 0.0 {
            return in_spectrum(FailureReason::DecayFitFailed, margin, false);
        }
        DichotomyVerdict {
            gamma,
            outcome: Outcome::Certificate(Certificate {
                stable_basis: linalg::to_rows(&self.stable_basis_at(rank, 0)),
                unstable_basis: linalg::to_rows(&self.unstable_basis_at(rank, 0)),
                rank,
                k,
                rho,
                window: self.params.window,
                fit_residual: residual,
                margin,
                min_angle: data.min_angle,
            }),
        }
    }
}

/// Single-γ dichotomy test.
pub fn test_dichotomy(seq: &MatrixSequence, gamma: f64, params: &DichotomyParams) -> Result<DichotomyVerdict> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParams(format!("gamma must be positive, got {gamma}")));
    }
    Ok(DichotomyAnalyzer::new(seq, params)?.verdict(gamma))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams {
    pub dichotomy: DichotomyParams,
    /// Number of logarithmically spaced γ values in the initial grid.
    pub grid_points: usize,
    /// Endpoint brackets are refined until narrower than this (absolute).
    pub refine_tol: f64,
    /// Extra log-margin of the grid beyond `[1/M̂, M̂]`.
    pub grid_margin: f64,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        SpectrumParams {
            dichotomy: DichotomyParams::default(),
            grid_points: 64,
            refine_tol: 1e-3,
            grid_margin: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralInterval {
    pub lower: f64,
    pub upper: f64,
    pub low_confidence: bool,
}

impl SpectralInterval {
    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lower - tol && x <= self.upper + tol
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub gamma: f64,
    pub certified: bool,
    pub rank: Option<usize>,
    pub rho: Option<f64>,
    pub k: Option<f64>,
    pub margin: f64,
    pub reason: Option<FailureReason>,
}

impl From<&DichotomyVerdict> for GridPoint {
    fn from(v: &DichotomyVerdict) -> Self {
        match &v.outcome {
            Outcome::Certificate(c) => GridPoint {
                gamma: v.gamma,
                certified: true,
                rank: Some(c.rank),
                rho: Some(c.rho),
                k: Some(c.k),
                margin: c.margin,
                reason: None,
            },
            Outcome::InSpectrum(s) => GridPoint {
                gamma: v.gamma,
                certified: false,
                rank: None,
                rho: None,
                k: None,
                margin: s.margin,
                reason: Some(s.reason),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub intervals: Vec<SpectralInterval>,
    /// Projector rank in each resolvent gap, left to right (`ℓ + 1` entries).
    pub gap_ranks: Vec<usize>,
    /// A certified γ inside each gap (the one with the largest margin).
    pub gap_gammas: Vec<f64>,
    /// Every γ evaluated, sorted ascending.
    pub grid: Vec<GridPoint>,
    pub refine_tol: f64,
    pub window: usize,
    pub m_hat: f64,
    pub low_confidence: bool,
    pub diagnostics: Vec<String>,
}

impl SpectrumEstimate {
    /// CSV with columns `gamma, outcome, rank, rho, K`.
    pub fn grid_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        csv(
            &["gamma", "outcome", "rank", "rho", "K"],
            self.grid.iter().map(|p| {
                vec![
                    fmt_f64(p.gamma),
                    if p.certified { "certificate" } else { "in-spectrum" }.to_string(),
                    p.rank.map(|r| r.to_string()).unwrap_or_default(),
                    opt(p.rho),
                    opt(p.k),
                ]
            }),
        )
    }

    /// Index of the interval containing `x` within `tol`.
    pub fn interval_of(&self, x: f64, tol: f64) -> Option<usize> {
        self.intervals.iter().position(|iv| iv.contains(x, tol))
    }
}

/// Sweep γ over a logarithmic grid, bisect every verdict change down to
/// `refine_tol / 4`, and group in-spectrum runs into intervals.
pub fn estimate_spectrum(seq: &MatrixSequence, params: &SpectrumParams) -> Result<SpectrumEstimate> {
    let analyzer = DichotomyAnalyzer::new(seq, &params.dichotomy)?;
    estimate_spectrum_with(&analyzer, params)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Class {
    Spectrum,
    Resolvent(usize),
}

fn class_of(v: &DichotomyVerdict) -> Class {
    match v.rank() {
        Some(r) => Class::Resolvent(r),
        None => Class::Spectrum,
    }
}

pub fn estimate_spectrum_with(analyzer: &DichotomyAnalyzer, params: &SpectrumParams) -> Result<SpectrumEstimate> {
    if params.grid_points < 2 {
        return Err(Error::InvalidParams("grid_points must be at least 2".into()));
    }
    if !(params.refine_tol > 0.0) {
        return Err(Error::InvalidParams("refine_tol must be positive".into()));
    }
    let d = analyzer.dimension();
    let m_hat = analyzer.m_hat();
    let lo = -m_hat.ln() - params.grid_margin;
    let hi = m_hat.ln() + params.grid_margin;
    let step = (hi - lo) / (params.grid_points - 1) as f64;
    let mut points: Vec<DichotomyVerdict> = (0..params.grid_points)
        .into_par_iter()
        .map(|i| analyzer.verdict((lo + step * i as f64).exp()))
        .collect();

    let resolution = params.refine_tol / 4.0;
    loop {
        let mids: Vec<f64> = points
            .windows(2)
            .filter(|w| class_of(&w[0]) != class_of(&w[1]) && w[1].gamma - w[0].gamma > resolution)
            .map(|w| (w[0].gamma * w[1].gamma).sqrt())
            .collect();
        if mids.is_empty() {
            break;
        }
        let fresh: Vec<DichotomyVerdict> = mids.into_par_iter().map(|g| analyzer.verdict(g)).collect();
        points.extend(fresh);
        points.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    }

    let mut diagnostics = Vec::new();
    let mut low_confidence = false;

    // Raw intervals: in-spectrum runs, plus unresolved rank jumps between
    // adjacent certificates.
    struct Raw {
        lower: f64,
        upper: f64,
        low_confidence: bool,
    }
    let mut raw: Vec<Raw> = Vec::new();
    // Certified point indices per gap (gap i lies left of raw interval i).
    let mut gaps: Vec<Vec<usize>> = vec![Vec::new()];
    let mut i = 0;
    while i < points.len() {
        match class_of(&points[i]) {
            Class::Resolvent(r) => {
                gaps.last_mut().unwrap().push(i);
                if let Some(next) = points.get(i + 1) {
                    if let Class::Resolvent(r2) = class_of(next) {
                        if r2 != r {
                            raw.push(Raw {
                                lower: points[i].gamma,
                                upper: next.gamma,
                                low_confidence: false,
                            });
                            gaps.push(Vec::new());
                        }
                    }
                }
                i += 1;
            }
            Class::Spectrum => {
                let start = i;
                let mut low = false;
                while i < points.len() && class_of(&points[i]) == Class::Spectrum {
                    if let Outcome::InSpectrum(s) = &points[i].outcome {
                        low |= s.low_confidence;
                    }
                    i += 1;
                }
                let lower = if start > 0 { points[start - 1].gamma } else { points[0].gamma };
                let upper = if i < points.len() { points[i].gamma } else { points[i - 1].gamma };
                raw.push(Raw {
                    lower,
                    upper,
                    low_confidence: low,
                });
                gaps.push(Vec::new());
            }
        }
    }

    if raw.is_empty() {
        diagnostics.push("no spectral interval found on the grid".into());
        low_confidence = true;
    }
    let mut gap_ranks: Vec<Option<usize>> = gaps
        .iter()
        .map(|g| g.first().and_then(|&j| points[j].rank()))
        .collect();
    // Drop empty gaps at the ends (spectrum reaching the grid boundary).
    if gap_ranks.first() == Some(&None) {
        diagnostics.push("spectrum reaches the lower end of the γ grid".into());
        low_confidence = true;
    }
    if gap_ranks.last() == Some(&None) && gap_ranks.len() > 1 {
        diagnostics.push("spectrum reaches the upper end of the γ grid".into());
        low_confidence = true;
    }

    // Merge pass: every interval must raise the rank.
    loop {
        let mut changed = false;
        for j in 0..raw.len() {
            let (Some(left), Some(right)) = (gap_ranks[j], gap_ranks[j + 1]) else {
                continue;
            };
            if right > left {
                continue;
            }
            if right < left {
                let gammas = gaps[j]
                    .iter()
                    .chain(&gaps[j + 1])
                    .map(|&k| points[k].gamma)
                    .collect();
                return Err(Error::NonMonotoneRanks { gammas });
            }
            // Interval j does not change the rank: absorb it into the nearer neighbor.
            let left_dist = if j > 0 { Some((raw[j].lower / raw[j - 1].upper).ln()) } else { None };
            let right_dist = if j + 1 < raw.len() { Some((raw[j + 1].lower / raw[j].upper).ln()) } else { None };
            let merge_left = match (left_dist, right_dist) {
                (Some(a), Some(b)) => a <= b,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => {
                    diagnostics.push(format!(
                        "interval [{}, {}] does not change the projector rank",
                        fmt_f64(raw[j].lower),
                        fmt_f64(raw[j].upper)
                    ));
                    raw[j].low_confidence = true;
                    low_confidence = true;
                    continue;
                }
            };
            let (a, b) = if merge_left { (j - 1, j) } else { (j, j + 1) };
            diagnostics.push(format!(
                "merged intervals [{}, {}] and [{}, {}]: rank does not increase between them",
                fmt_f64(raw[a].lower),
                fmt_f64(raw[a].upper),
                fmt_f64(raw[b].lower),
                fmt_f64(raw[b].upper)
            ));
            raw[a].upper = raw[b].upper;
            raw[a].low_confidence = true;
            raw.remove(b);
            let absorbed = gaps.remove(b);
            gap_ranks.remove(b);
            let _ = absorbed;
            low_confidence = true;
            changed = true;
            break;
        }
        if !changed {
            break;
        }
    }

    let lower_bound = 1.0 / m_hat;
    let intervals: Vec<SpectralInterval> = raw
        .iter()
        .map(|r| SpectralInterval {
            lower: r.lower.max(lower_bound).min(m_hat),
            upper: r.upper.min(m_hat).max(lower_bound),
            low_confidence: r.low_confidence,
        })
        .collect();

    let mut ranks = Vec::with_capacity(gap_ranks.len());
    for (j, r) in gap_ranks.iter().enumerate() {
        ranks.push(match r {
            Some(r) => *r,
            None if j == 0 => 0,
            None => d,
        });
    }
    if ranks.first().copied() != Some(0) || ranks.last().copied() != Some(d) {
        diagnostics.push(format!("outer gap ranks {ranks:?} differ from (0, …, {d})"));
        low_confidence = true;
    }
    let gap_gammas = gaps
        .iter()
        .map(|g| {
            g.iter()
                .map(|&k| &points[k])
                .max_by(|a, b| a.margin().total_cmp(&b.margin()))
                .map_or(f64::NAN, |v| v.gamma)
        })
        .collect();

    Ok(SpectrumEstimate {
        intervals,
        gap_ranks: ranks,
        gap_gammas,
        grid: points.iter().map(GridPoint::from).collect(),
        refine_tol: params.refine_tol,
        window: analyzer.params().window,
        m_hat,
        low_confidence,
        diagnostics,
    })
}

/// Verdicts at the representative γ of every gap, left to right.
pub fn gap_certificates(analyzer: &DichotomyAnalyzer, spectrum: &SpectrumEstimate) -> Vec<DichotomyVerdict> {
    spectrum
        .gap_gammas
        .iter()
        .filter(|g| g.is_finite())
        .map(|&g| analyzer.verdict(g))
        .collect()
}

/// `{|λ|^{1/p}}` over the eigenvalues `λ` of the monodromy matrix `X(p, 0)`,
/// ascending with duplicates removed.
pub fn periodic_spectrum_oracle(seq: &MatrixSequence, period: usize) -> Result<Vec<f64>> {
    match seq.period() {
        Some(q) if period > 0 && period.is_multiple_of(q) => {}
        _ => {
            return Err(Error::InvalidParams(format!(
                "sequence is not periodic with period {period}"
            )))
        }
    }
    let monodromy = transition(seq, period as i64, 0)?;
    let log_scale = monodromy.log_scale();
    let p = period as f64;
    let mut points: Vec<f64> = monodromy
        .core()
        .complex_eigenvalues()
        .iter()
        .map(|z| ((z.norm().ln() + log_scale) / p).exp())
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    Ok(points)
}

/// `Σ(u) = [β̲(u), β̄(u)]` from whole-line window products.
pub fn scalar_spectrum(u: &ScalarSequence, params: &BohlParams) -> Result<(f64, f64)> {
    let two_sided = BohlParams {
        two_sided: true,
        ..*params
    };
    scalar_bohl(u, &two_sided)
}
