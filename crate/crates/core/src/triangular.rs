//! Kinematic similarity to upper-triangular form by discrete QR, and the
//! diagonal-significance check.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bohl::{scalar_bohl_estimate_with, BohlParams};
use crate::dichotomy::{estimate_spectrum, SpectralInterval, SpectrumParams};
use crate::error::{Error, Result};
use crate::linalg::qr_positive;
use crate::report::{csv, fmt_f64};
use crate::seqmodel::{MatrixSequence, SequenceKind};
use crate::transition::SampledWindow;

/// `A(n) F(n) = F(n+1) U(n)` on a window, with `F(0) = I` orthogonal and `U`
/// upper triangular with positive diagonal.
#[derive(Clone, Debug)]
pub struct KinematicPair {
    /// Tabulated on `[lo, hi]`.
    pub u: MatrixSequence,
    /// `F(lo) … F(hi + 1)`.
    f: Vec<DMatrix<f64>>,
    lo: i64,
    hi: i64,
}

impl KinematicPair {
    /// Window `[lo, hi]` on which `U` is defined.
    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    /// `F(n)` for `n ∈ [lo, hi + 1]`.
    pub fn f(&self, n: i64) -> Result<&DMatrix<f64>> {
        if n < self.lo || n > self.hi + 1 {
            return Err(Error::OutOfWindow {
                n,
                lo: self.lo,
                hi: self.hi + 1,
            });
        }
        Ok(&self.f[(n - self.lo) as usize])
    }

    /// `max_n ‖A(n)F(n) − F(n+1)U(n)‖` over the window.
    pub fn similarity_residual(&self, seq: &MatrixSequence) -> Result<f64> {
        let mut worst = 0.0f64;
        for n in self.lo..=self.hi {
            let lhs = seq.evaluate(n)? * self.f(n)?;
            let rhs = self.f(n + 1)? * self.u.evaluate(n)?;
            worst = worst.max((lhs - rhs).amax());
        }
        Ok(worst)
    }

    /// `max_n ‖F(n)ᵀF(n) − I‖`.
    pub fn orthogonality_defect(&self) -> f64 {
        self.f
            .iter()
            .map(|f| {
                let d = f.nrows();
                (f.transpose() * f - DMatrix::<f64>::identity(d, d)).amax()
            })
            .fold(0.0, f64::max)
    }

    /// CSV with columns `n, u_1, …, u_d` (diagonal of `U`).
    pub fn diagonal_csv(&self) -> Result<String> {
        let d = self.u.dimension();
        let mut header = vec!["n".to_string()];
        header.extend((1..=d).map(|i| format!("u_{i}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut rows = Vec::new();
        for n in self.lo..=self.hi {
            let u = self.u.evaluate(n)?;
            let mut row = vec![n.to_string()];
            row.extend((0..d).map(|i| fmt_f64(u[(i, i)])));
            rows.push(row);
        }
        Ok(csv(&header, rows))
    }
}

/// Forward QR of `A(n)F(n)` for `n ≥ 0` and backward QR of `A(n−1)⁻¹F(n)` for
/// `n ≤ 0`, anchored at `F(0) = I`. `window = (lo, hi)` with `lo ≤ 0 ≤ hi`.
pub fn qr_triangularize(seq: &MatrixSequence, window: (i64, i64)) -> Result<KinematicPair> {
    let (lo, hi) = window;
    if lo > 0 || hi < 0 {
        return Err(Error::InvalidParams(format!("window [{lo}, {hi}] must contain 0")));
    }
    let d = seq.dimension();
    let sampled = SampledWindow::new(seq, lo, hi)?;
    let len = (hi - lo + 2) as usize;
    let mut f = vec![DMatrix::zeros(d, d); len];
    let mut u = vec![DMatrix::zeros(d, d); (hi - lo + 1) as usize];
    let at = |n: i64| (n - lo) as usize;
    f[at(0)] = DMatrix::identity(d, d);
    for n in 0..=hi {
        let (q, r) = qr_positive(&(sampled.a(n) * &f[at(n)]));
        f[at(n + 1)] = q;
        u[at(n)] = r;
    }
    let eye = DMatrix::<f64>::identity(d, d);
    for n in (lo + 1..=0).rev() {
        let (q, r) = qr_positive(&(sampled.a_inv(n - 1) * &f[at(n)]));
        f[at(n - 1)] = q;
        u[at(n - 1)] = r
            .solve_upper_triangular(&eye)
            .ok_or(Error::Singular { n: n - 1 })?;
    }
    for m in &mut u {
        m.fill_lower_triangle(0.0, 1);
    }
    Ok(KinematicPair {
        u: MatrixSequence::tabulated(lo, &u)?,
        f,
        lo,
        hi,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceParams {
    pub spectrum: SpectrumParams,
    pub bohl: BohlParams,
    /// Hausdorff tolerance for set equality.
    pub tol: f64,
}

impl Default for SignificanceParams {
    fn default() -> Self {
        SignificanceParams {
            spectrum: SpectrumParams::default(),
            bohl: BohlParams::default(),
            tol: 5e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub sigma_u: Vec<SpectralInterval>,
    /// `Σ(u_ii)` for each coordinate, in coordinate order.
    pub per_coordinate: Vec<(f64, f64)>,
    /// Union of the scalar spectra as disjoint sorted intervals.
    pub union: Vec<(f64, f64)>,
    pub hausdorff: f64,
    pub symmetric_difference: f64,
    pub tol: f64,
    pub significant: bool,
}

/// Whether `u` is upper triangular on `range`, and its diagonal accessor.
fn diagonal_of(u: &MatrixSequence, range: (i64, i64)) -> Result<Vec<Vec<f64>>> {
    let d = u.dimension();
    let triangular_kind = matches!(
        u.kind(),
        SequenceKind::Diagonal { .. } | SequenceKind::UpperTriangular { .. }
    );
    let mut diag = vec![Vec::with_capacity((range.1 - range.0 + 1) as usize); d];
    for n in range.0..=range.1 {
        let m = u.evaluate(n)?;
        if !triangular_kind && (0..d).any(|i| (0..i).any(|j| m[(i, j)] != 0.0)) {
            return Err(Error::Unsupported(format!("sequence is not upper triangular at n = {n}")));
        }
        for (i, col) in diag.iter_mut().enumerate() {
            if m[(i, i)] == 0.0 {
                return Err(Error::ZeroScalar { coordinate: i, n });
            }
            col.push(m[(i, i)]);
        }
    }
    Ok(diag)
}

/// `Σ(U)` against `⋃ Σ(u_ii)` with scalar spectra from two-sided Bohl
/// exponents. The Bohl window shrinks to fit a tabulated `U`.
pub fn diagonal_significance(u: &MatrixSequence, params: &SignificanceParams) -> Result<SignificanceReport> {
    let mut bohl = BohlParams {
        two_sided: true,
        ..params.bohl
    };
    if let Some((lo, hi)) = u.domain() {
        let fit = (-lo).min(hi + 1).max(0) as usize;
        bohl.window = bohl.window.min(fit);
    }
    bohl.check()?;
    let n = bohl.window as i64;
    let diag = diagonal_of(u, (-n, n - 1))?;
    let per_coordinate = diag
        .iter()
        .map(|values| {
            let est = scalar_bohl_estimate_with(|k| Ok(values[(k + n) as usize]), &bohl)?;
            Ok((est.lower, est.upper))
        })
        .collect::<Result<Vec<_>>>()?;
    let union = merge_intervals(&per_coordinate);
    let spectrum = estimate_spectrum(u, &params.spectrum)?;
    let sigma: Vec<(f64, f64)> = spectrum.intervals.iter().map(|i| (i.lower, i.upper)).collect();
    let hausdorff = hausdorff_distance(&sigma, &union);
    let symmetric_difference = symmetric_difference(&sigma, &union);
    Ok(SignificanceReport {
        sigma_u: spectrum.intervals,
        per_coordinate,
        union,
        hausdorff,
        symmetric_difference,
        tol: params.tol,
        significant: hausdorff <= params.tol,
    })
}

/// Sorted disjoint union of closed intervals.
pub fn merge_intervals(intervals: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in sorted {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

fn distance_to(x: f64, set: &[(f64, f64)]) -> f64 {
    set.iter()
        .map(|&(a, b)| if x < a { a - x } else if x > b { x - b } else { 0.0 })
        .fold(f64::INFINITY, f64::min)
}

/// `sup_{s ∈ S} dist(s, T)`: attained at an endpoint of `S` or at a gap
/// midpoint of `T` lying inside `S`.
fn directed_hausdorff(s: &[(f64, f64)], t: &[(f64, f64)]) -> f64 {
    let t = merge_intervals(t);
    let mut candidates: Vec<f64> = s.iter().flat_map(|&(a, b)| [a, b]).collect();
    for w in t.windows(2) {
        let mid = 0.5 * (w[0].1 + w[1].0);
        if s.iter().any(|&(a, b)| a <= mid && mid <= b) {
            candidates.push(mid);
        }
    }
    candidates
        .into_iter()
        .map(|x| distance_to(x, &t))
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two finite unions of closed intervals.
pub fn hausdorff_distance(s: &[(f64, f64)], t: &[(f64, f64)]) -> f64 {
    if s.is_empty() || t.is_empty() {
        return if s.is_empty() && t.is_empty() { 0.0 } else { f64::INFINITY };
    }
    directed_hausdorff(s, t).max(directed_hausdorff(t, s))
}

fn measure(set: &[(f64, f64)]) -> f64 {
    merge_intervals(set).iter().map(|(a, b)| b - a).sum()
}

/// Lebesgue measure of the symmetric difference.
pub fn symmetric_difference(s: &[(f64, f64)], t: &[(f64, f64)]) -> f64 {
    let s = merge_intervals(s);
    let t = merge_intervals(t);
    let mut common = 0.0;
    for &(a, b) in &s {
        for &(c, e) in &t {
            common += (b.min(e) - a.max(c)).max(0.0);
        }
    }
    measure(&s) + measure(&t) - 2.0 * common
}
