//! Finite-window Bohl exponents of solutions and the senior/junior general
//! exponents of the whole system.
//!
//! For a trajectory with log-norms `ℓ(k)`, the growth rate of the window
//! `[m, m+g]` is `exp((ℓ(m+g) − ℓ(m)) / g)`. For every gap `g ∈ [L, N]` the
//! extremal rates over admissible `m` form the gap envelope; the limsup and
//! liminf are approximated by the extremes of the envelope over the largest
//! `tail_fraction` of gaps.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{qr_positive, random_orthogonal};
use crate::report::{csv, fmt_f64};
use crate::seqmodel::{MatrixSequence, ScalarSequence};
use crate::transition::{orbit_lognorms, SampledWindow, ScaledMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BohlParams {
    /// Window length `N`.
    pub window: usize,
    /// Smallest gap `L`.
    pub gap_min: usize,
    pub tail_fraction: f64,
    /// Let `m` range over `[−N, N−g]` instead of `[0, N−g]`.
    pub two_sided: bool,
}

impl Default for BohlParams {
    fn default() -> Self {
        BohlParams {
            window: 2048,
            gap_min: 16,
            tail_fraction: 0.2,
            two_sided: false,
        }
    }
}

impl BohlParams {
    pub fn check(&self) -> Result<()> {
        if self.gap_min == 0 {
            return Err(Error::InvalidParams("gap_min must be at least 1".into()));
        }
        if self.window < 2 * self.gap_min {
            return Err(Error::InvalidParams(format!(
                "window {} must be at least twice gap_min {}",
                self.window, self.gap_min
            )));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 1.0) {
            return Err(Error::InvalidParams("tail_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }

    fn m_lo(&self) -> i64 {
        if self.two_sided {
            -(self.window as i64)
        } else {
            0
        }
    }

    /// Smallest gap counted in the tail.
    pub fn tail_start(&self) -> usize {
        let gaps = self.window - self.gap_min + 1;
        let count = ((self.tail_fraction * gaps as f64).ceil() as usize).clamp(1, gaps);
        self.window + 1 - count
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapEnvelope {
    pub gap: usize,
    pub min_rate: f64,
    pub max_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BohlEstimate {
    pub upper: f64,
    pub lower: f64,
    pub gap_envelopes: Vec<GapEnvelope>,
    pub window: usize,
    pub gap_min: usize,
    pub tail_fraction: f64,
    pub two_sided: bool,
}

impl BohlEstimate {
    /// `max_rate − min_rate` at the largest gap `N`.
    pub fn spread_at_largest_gap(&self) -> f64 {
        self.gap_envelopes
            .last()
            .map_or(0.0, |e| e.max_rate - e.min_rate)
    }

    /// CSV with columns `g, min_rate, max_rate`.
    pub fn envelopes_csv(&self) -> String {
        csv(
            &["g", "min_rate", "max_rate"],
            self.gap_envelopes
                .iter()
                .map(|e| vec![e.gap.to_string(), fmt_f64(e.min_rate), fmt_f64(e.max_rate)]),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralExponents {
    /// Senior upper general exponent Ω⁰.
    pub senior: f64,
    /// Junior lower general exponent ω₀.
    pub junior: f64,
    pub window: usize,
    pub gap_min: usize,
    pub tail_fraction: f64,
    pub two_sided: bool,
}

/// Envelope computation over a log-trajectory `logs[k] = ℓ(m_lo + k)` for
/// `k = 0 ..= N − m_lo`.
fn estimate_from_logs(logs: &[f64], params: &BohlParams) -> BohlEstimate {
    let n = params.window;
    let m_lo = params.m_lo();
    let offset = |m: i64| (m - m_lo) as usize;
    let gap_envelopes: Vec<GapEnvelope> = (params.gap_min..=n)
        .into_par_iter()
        .map(|g| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for m in m_lo..=(n - g) as i64 {
                let diff = logs[offset(m) + g] - logs[offset(m)];
                lo = lo.min(diff);
                hi = hi.max(diff);
            }
            GapEnvelope {
                gap: g,
                min_rate: (lo / g as f64).exp(),
                max_rate: (hi / g as f64).exp(),
            }
        })
        .collect();
    let tail = params.tail_start();
    let (mut upper, mut lower) = (f64::NEG_INFINITY, f64::INFINITY);
    for e in gap_envelopes.iter().filter(|e| e.gap >= tail) {
        upper = upper.max(e.max_rate);
        lower = lower.min(e.min_rate);
    }
    BohlEstimate {
        upper,
        lower,
        gap_envelopes,
        window: params.window,
        gap_min: params.gap_min,
        tail_fraction: params.tail_fraction,
        two_sided: params.two_sided,
    }
}

/// Upper and lower Bohl exponents of the solution through `xi` at `k = 0`.
pub fn bohl_exponents(seq: &MatrixSequence, xi: &[f64], params: &BohlParams) -> Result<BohlEstimate> {
    params.check()?;
    let v = DVector::from_column_slice(xi);
    let norm = v.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    let unit = v / norm;
    let orbit = orbit_lognorms(seq, unit.as_slice(), (params.m_lo(), params.window as i64))?;
    Ok(estimate_from_logs(&orbit.lognorms, params))
}

/// Solutions confined to an invariant subbundle.
///
/// Inside a spectral fiber that is not the fastest, forward rounding errors
/// pick up faster directions and swamp the orbit within a few hundred steps.
/// The flow instead carries coordinates with respect to the slow flags of a
/// QR sweep (forward in time) and the fast flags (backward in time), where
/// the contamination cannot appear.
#[derive(Clone, Debug)]
pub struct BundleFlow {
    params: BohlParams,
    dimension: usize,
    /// Basis at `n = 0` and restricted cocycle blocks for `n ∈ [0, N)`.
    forward: Option<(DMatrix<f64>, Vec<DMatrix<f64>>)>,
    /// Basis at `n = 0` and restricted inverse blocks for `n ∈ [−N, 0)`,
    /// indexed by `n + N`.
    backward: Option<(DMatrix<f64>, Vec<DMatrix<f64>>)>,
    window: SampledWindow,
}

impl BundleFlow {
    /// `ranks = (r_lo, r_hi)`: forward orbits stay in the rank-`r_hi` slow
    /// family, backward orbits in the complement of the rank-`r_lo` one.
    pub fn new(seq: &MatrixSequence, ranks: (usize, usize), params: &BohlParams, seed: u64) -> Result<Self> {
        params.check()?;
        let d = seq.dimension();
        let (r_lo, r_hi) = ranks;
        if r_lo > r_hi || r_hi > d {
            return Err(Error::InvalidParams(format!("invalid fiber ranks ({r_lo}, {r_hi}) in dimension {d}")));
        }
        let n = params.window as i64;
        // Extra sweep length lets the flags converge before the window.
        let t = n + n / 2;
        let lo = if params.two_sided { -t } else { 0 };
        let window = SampledWindow::new(seq, lo, t - 1)?;
        let forward = (r_hi < d).then(|| {
            let mut z = random_orthogonal(d, seed, 3);
            let mut blocks = vec![DMatrix::zeros(0, 0); n as usize];
            for k in (0..t).rev() {
                let (q, r) = qr_positive(&(window.a(k).transpose() * &z));
                if k < n {
                    blocks[k as usize] = r.view((d - r_hi, d - r_hi), (r_hi, r_hi)).transpose();
                }
                z = q;
            }
            (z.columns(d - r_hi, r_hi).into_owned(), blocks)
        });
        let backward = (params.two_sided && r_lo > 0).then(|| {
            let mut w = random_orthogonal(d, seed, 4);
            let mut blocks = vec![DMatrix::zeros(0, 0); n as usize];
            for k in -t..0 {
                let (q, r) = qr_positive(&(window.a_inv(k).transpose() * &w));
                if k >= -n {
                    blocks[(k + n) as usize] = r.view((r_lo, r_lo), (d - r_lo, d - r_lo)).transpose();
                }
                w = q;
            }
            (w.columns(r_lo, d - r_lo).into_owned(), blocks)
        });
        Ok(BundleFlow {
            params: *params,
            dimension: d,
            forward,
            backward,
            window,
        })
    }

    pub fn bohl_exponents(&self, xi: &[f64]) -> Result<BohlEstimate> {
        if xi.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: xi.len(),
            });
        }
        let v = DVector::from_column_slice(xi);
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroVector);
        }
        let unit = v / norm;
        let n = self.params.window as i64;
        let m_lo = self.params.m_lo();
        let zero = (-m_lo) as usize;
        let mut logs = vec![0.0; (n - m_lo + 1) as usize];

        let step = |x: &mut DVector<f64>, acc: &mut f64, y: DVector<f64>| {
            let r = y.norm();
            *acc += r.ln();
            *x = y / r;
        };
        match &self.forward {
            Some((basis, blocks)) => {
                let c = basis.transpose() * &unit;
                let mut acc = c.norm().ln();
                let mut x = &c / c.norm();
                logs[zero] = acc;
                for k in 0..n {
                    let y = &blocks[k as usize] * &x;
                    step(&mut x, &mut acc, y);
                    logs[zero + k as usize + 1] = acc;
                }
            }
            None => {
                let (mut x, mut acc) = (unit.clone(), 0.0);
                for k in 0..n {
                    let y = self.window.a(k) * &x;
                    step(&mut x, &mut acc, y);
                    logs[zero + k as usize + 1] = acc;
                }
            }
        }
        if m_lo < 0 {
            let base = logs[zero];
            match &self.backward {
                Some((basis, blocks)) => {
                    let e = basis.transpose() * &unit;
                    let mut acc = base;
                    let mut x = &e / e.norm();
                    for k in (m_lo..0).rev() {
                        let y = &blocks[(k + n) as usize] * &x;
                        step(&mut x, &mut acc, y);
                        logs[(k - m_lo) as usize] = acc;
                    }
                }
                None => {
                    let (mut x, mut acc) = (unit, base);
                    for k in (m_lo..0).rev() {
                        let y = self.window.a_inv(k) * &x;
                        step(&mut x, &mut acc, y);
                        logs[(k - m_lo) as usize] = acc;
                    }
                }
            }
        }
        Ok(estimate_from_logs(&logs, &self.params))
    }
}

/// Envelope-level Bohl estimate of a scalar equation `y(n+1) = u(n) y(n)`;
/// the rates are geometric means of `|u|` over windows.
pub fn scalar_bohl_estimate(u: &ScalarSequence, params: &BohlParams) -> Result<BohlEstimate> {
    scalar_bohl_estimate_with(|k| u.evaluate_nonzero(0, k), params)
}

/// [`scalar_bohl_estimate`] for coefficients given as a function of `n`,
/// e.g. the diagonal of a tabulated triangular system.
pub fn scalar_bohl_estimate_with(u: impl Fn(i64) -> Result<f64>, params: &BohlParams) -> Result<BohlEstimate> {
    params.check()?;
    let m_lo = params.m_lo();
    let hi = params.window as i64;
    let mut logs = Vec::with_capacity((hi - m_lo + 1) as usize);
    let mut acc = 0.0;
    logs.push(acc);
    for k in m_lo..hi {
        acc += u(k)?.abs().ln();
        logs.push(acc);
    }
    Ok(estimate_from_logs(&logs, params))
}

/// `(lower, upper)` Bohl exponents of a scalar equation; independent of the
/// initial condition.
pub fn scalar_bohl(u: &ScalarSequence, params: &BohlParams) -> Result<(f64, f64)> {
    let est = scalar_bohl_estimate(u, params)?;
    Ok((est.lower, est.upper))
}

/// Ω⁰ from `‖X(m+g, m)‖^{1/g}` and ω₀ from `‖X(m, m+g)‖^{−1/g}`, both over the
/// tail gaps.
pub fn general_exponents(seq: &MatrixSequence, params: &BohlParams) -> Result<GeneralExponents> {
    params.check()?;
    let n = params.window as i64;
    let m_lo = params.m_lo();
    let tail = params.tail_start() as i64;
    let window = SampledWindow::new(seq, m_lo, n - 1)?;
    let d = seq.dimension();
    let extremes: Vec<(f64, f64)> = (m_lo..=n - tail)
        .into_par_iter()
        .map(|m| {
            let mut forward = ScaledMatrix::identity(d);
            let mut backward = ScaledMatrix::identity(d);
            let mut senior = f64::NEG_INFINITY;
            let mut junior = f64::INFINITY;
            for k in m..n {
                forward.left_mul(window.a(k));
                backward.right_mul(window.a_inv(k));
                let g = k + 1 - m;
                if g >= tail {
                    senior = senior.max(forward.log_norm() / g as f64);
                    junior = junior.min(-backward.log_norm() / g as f64);
                }
            }
            (senior, junior)
        })
        .collect();
    let senior = extremes.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    let junior = extremes.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    Ok(GeneralExponents {
        senior: senior.exp(),
        junior: junior.exp(),
        window: params.window,
        gap_min: params.gap_min,
        tail_fraction: params.tail_fraction,
        two_sided: params.two_sided,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn small() -> BohlParams {
        BohlParams {
            window: 256,
            gap_min: 8,
            ..BohlParams::default()
        }
    }

    #[test]
    fn param_checks() {
        let mut p = small();
        p.window = 10;
        assert!(p.check().is_err());
        let mut p = small();
        p.tail_fraction = 1.0;
        assert!(p.check().is_err());
    }

    #[test]
    fn tail_start_counts_gaps() {
        let p = BohlParams {
            window: 100,
            gap_min: 1,
            tail_fraction: 0.2,
            two_sided: false,
        };
        assert_eq!(p.tail_start(), 81);
    }

    #[test]
    fn geometric_orbit() {
        let seq =
            MatrixSequence::constant(&DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5]))).unwrap();
        let est = bohl_exponents(&seq, &[1.0, 0.0], &small()).unwrap();
        assert_relative_eq!(est.upper, 2.0, epsilon = 1e-12);
        assert_relative_eq!(est.lower, 2.0, epsilon = 1e-12);
        assert!(matches!(
            bohl_exponents(&seq, &[0.0, 0.0], &small()),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn constant_scalar() {
        let (lo, hi) = scalar_bohl(&ScalarSequence::Constant { value: 3.0 }, &small()).unwrap();
        assert_relative_eq!(lo, 3.0, epsilon = 1e-12);
        assert_relative_eq!(hi, 3.0, epsilon = 1e-12);
        let (lo, hi) = scalar_bohl(&ScalarSequence::Constant { value: -3.0 }, &small()).unwrap();
        assert_relative_eq!(lo, 3.0, epsilon = 1e-12);
        assert_relative_eq!(hi, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_scalar_rejected() {
        let u = ScalarSequence::Periodic { values: vec![1.0, 0.0] };
        assert!(matches!(
            scalar_bohl(&u, &small()),
            Err(Error::ZeroScalar { .. }) | Err(Error::InvalidSequence(_))
        ));
    }

    #[test]
    fn general_exponents_of_constant_diagonal() {
        let seq =
            MatrixSequence::constant(&DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5]))).unwrap();
        let g = general_exponents(&seq, &small()).unwrap();
        assert_relative_eq!(g.senior, 2.0, epsilon = 1e-12);
        assert_relative_eq!(g.junior, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn envelope_csv_header() {
        let est = scalar_bohl_estimate(&ScalarSequence::Constant { value: 2.0 }, &small()).unwrap();
        let text = est.envelopes_csv();
        assert!(text.starts_with("g,min_rate,max_rate\n"));
        assert_eq!(text.lines().count(), 1 + 256 - 8 + 1);
        assert_eq!(est.spread_at_largest_gap(), 0.0);
    }
}
