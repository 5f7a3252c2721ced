//! Overflow-safe transition operators `X(m, n)` and solution log-norm
//! trajectories.
//!
//! Products are accumulated factor by factor as a [`ScaledMatrix`]: a core
//! with spectral norm in `[1/2, 2]` and a separate natural-log scale.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::report::fmt_f64;
use crate::seqmodel::{invert_checked, MatrixSequence};

/// Default cap on `|m - n|` for a single transition product.
pub const DEFAULT_WINDOW_CAP: u64 = 1_000_000;

/// `e^{log_scale} · core`, with `‖core‖ ∈ [1/2, 2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledMatrix {
    core: DMatrix<f64>,
    log_scale: f64,
}

impl ScaledMatrix {
    pub fn identity(d: usize) -> Self {
        ScaledMatrix {
            core: DMatrix::identity(d, d),
            log_scale: 0.0,
        }
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        let mut s = ScaledMatrix {
            core: m,
            log_scale: 0.0,
        };
        s.rescale();
        s
    }

    pub fn core(&self) -> &DMatrix<f64> {
        &self.core
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// `log ‖X‖`.
    pub fn log_norm(&self) -> f64 {
        self.log_scale + spectral_norm(&self.core).ln()
    }

    /// Dense value; overflows to infinity for very long products.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        &self.core * self.log_scale.exp()
    }

    /// `self ← a · self`.
    pub fn left_mul(&mut self, a: &DMatrix<f64>) {
        self.core = a * &self.core;
        self.rescale();
    }

    /// `self ← self · a`.
    pub fn right_mul(&mut self, a: &DMatrix<f64>) {
        self.core = &self.core * a;
        self.rescale();
    }

    pub fn mul(&self, rhs: &ScaledMatrix) -> ScaledMatrix {
        let mut out = ScaledMatrix {
            core: &self.core * &rhs.core,
            log_scale: self.log_scale + rhs.log_scale,
        };
        out.rescale();
        out
    }

    /// `‖self − other‖ / ‖other‖`, evaluated in `other`'s scale.
    pub fn relative_distance(&self, other: &ScaledMatrix) -> f64 {
        let diff = &self.core * (self.log_scale - other.log_scale).exp() - &other.core;
        spectral_norm(&diff) / spectral_norm(&other.core)
    }

    fn rescale(&mut self) {
        let d = self.core.nrows().max(1) as f64;
        let fro = self.core.norm();
        // spectral ≤ fro ≤ √d · spectral
        if fro <= 2.0 && fro / d.sqrt() >= 0.5 {
            return;
        }
        let s = spectral_norm(&self.core);
        if s == 0.0 || !s.is_finite() {
            return;
        }
        if !(0.5..=2.0).contains(&s) {
            self.core /= s;
            self.log_scale += s.ln();
        }
    }
}

fn check_span(m: i64, n: i64, cap: u64) -> Result<()> {
    let len = m.abs_diff(n);
    if len > cap {
        return Err(Error::WindowCap { len, cap });
    }
    Ok(())
}

/// `X(m, n)`: `A(m−1)⋯A(n)` for `m > n`, `I` for `m = n`, and
/// `A⁻¹(m)⋯A⁻¹(n−1)` for `m < n`.
pub fn transition(seq: &MatrixSequence, m: i64, n: i64) -> Result<ScaledMatrix> {
    transition_with_cap(seq, m, n, DEFAULT_WINDOW_CAP)
}

pub fn transition_with_cap(seq: &MatrixSequence, m: i64, n: i64, cap: u64) -> Result<ScaledMatrix> {
    check_span(m, n, cap)?;
    let mut x = ScaledMatrix::identity(seq.dimension());
    if m > n {
        for k in n..m {
            x.left_mul(&seq.evaluate(k)?);
        }
    } else if m < n {
        for k in (m..n).rev() {
            x.left_mul(&seq.inverse_at(k)?);
        }
    }
    Ok(x)
}

/// `A(n)` and `A⁻¹(n)` evaluated once on `[lo, hi]`.
#[derive(Clone, Debug)]
pub struct SampledWindow {
    lo: i64,
    mats: Vec<DMatrix<f64>>,
    invs: Vec<DMatrix<f64>>,
}

impl SampledWindow {
    pub fn new(seq: &MatrixSequence, lo: i64, hi: i64) -> Result<Self> {
        if hi < lo {
            return Err(Error::InvalidParams(format!("empty window [{lo}, {hi}]")));
        }
        check_span(lo, hi, DEFAULT_WINDOW_CAP)?;
        let mut mats = Vec::with_capacity((hi - lo + 1) as usize);
        let mut invs = Vec::with_capacity(mats.capacity());
        for n in lo..=hi {
            let a = seq.evaluate(n)?;
            invs.push(invert_checked(&a, n)?);
            mats.push(a);
        }
        Ok(SampledWindow { lo, mats, invs })
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.mats.len() as i64 - 1
    }

    pub fn dimension(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn a(&self, n: i64) -> &DMatrix<f64> {
        &self.mats[(n - self.lo) as usize]
    }

    pub fn a_inv(&self, n: i64) -> &DMatrix<f64> {
        &self.invs[(n - self.lo) as usize]
    }

    /// `X(m, n)` from cached factors; both ends must be within one step of
    /// the window.
    pub fn transition(&self, m: i64, n: i64) -> ScaledMatrix {
        let mut x = ScaledMatrix::identity(self.dimension());
        if m > n {
            for k in n..m {
                x.left_mul(self.a(k));
            }
        } else {
            for k in (m..n).rev() {
                x.left_mul(self.a_inv(k));
            }
        }
        x
    }

    /// Largest `max(‖A(n)‖, ‖A⁻¹(n)‖)` over the window.
    pub fn bound(&self) -> f64 {
        self.mats
            .iter()
            .zip(&self.invs)
            .map(|(a, b)| spectral_norm(a).max(spectral_norm(b)))
            .fold(0.0, f64::max)
    }
}

/// The solution `n ↦ X(n, 0)ξ` on a window, stored as log-norms and unit
/// directions.
#[derive(Clone, Debug, Serialize)]
pub struct OrbitLog {
    pub base: Vec<f64>,
    pub range: (i64, i64),
    pub lognorms: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
}

impl OrbitLog {
    pub fn lognorm(&self, n: i64) -> f64 {
        self.lognorms[(n - self.range.0) as usize]
    }

    pub fn direction(&self, n: i64) -> &[f64] {
        &self.directions[(n - self.range.0) as usize]
    }

    /// CSV with columns `n, lognorm, dir_0, …, dir_{d-1}`.
    pub fn to_csv(&self) -> String {
        let d = self.base.len();
        let mut out = String::from("n,lognorm");
        for i in 0..d {
            out.push_str(&format!(",dir_{i}"));
        }
        out.push('\n');
        for (k, (l, dir)) in self.lognorms.iter().zip(&self.directions).enumerate() {
            out.push_str(&format!("{},{}", self.range.0 + k as i64, fmt_f64(*l)));
            for x in dir {
                out.push(',');
                out.push_str(&fmt_f64(*x));
            }
            out.push('\n');
        }
        out
    }
}

/// Iterates `x ← A(n)x` forward and `x ← A⁻¹(n−1)x` backward from `ξ`,
/// renormalizing every step.
pub fn orbit_lognorms(seq: &MatrixSequence, xi: &[f64], range: (i64, i64)) -> Result<OrbitLog> {
    let (lo, hi) = range;
    if lo > 0 || hi < 0 {
        return Err(Error::InvalidParams(format!(
            "orbit range [{lo}, {hi}] must contain 0"
        )));
    }
    check_span(lo, hi, DEFAULT_WINDOW_CAP)?;
    if xi.len() != seq.dimension() {
        return Err(Error::InvalidParams(format!(
            "base vector has length {}, expected {}",
            xi.len(),
            seq.dimension()
        )));
    }
    let xi_v = DVector::from_column_slice(xi);
    let xi_norm = xi_v.norm();
    if xi_norm == 0.0 || !xi_norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    let len = (hi - lo + 1) as usize;
    let mut lognorms = vec![0.0; len];
    let mut directions = vec![Vec::new(); len];
    let zero = (-lo) as usize;
    let unit = &xi_v / xi_norm;
    lognorms[zero] = xi_norm.ln();
    directions[zero] = unit.as_slice().to_vec();

    let mut x = unit.clone();
    let mut acc = xi_norm.ln();
    for n in 0..hi {
        let y = seq.evaluate(n)? * &x;
        let r = y.norm();
        acc += r.ln();
        x = y / r;
        let idx = (n + 1 - lo) as usize;
        lognorms[idx] = acc;
        directions[idx] = x.as_slice().to_vec();
    }
    let mut x = unit;
    let mut acc = xi_norm.ln();
    for n in (lo + 1..=0).rev() {
        let y = seq.inverse_at(n - 1)? * &x;
        let r = y.norm();
        acc += r.ln();
        x = y / r;
        let idx = (n - 1 - lo) as usize;
        lognorms[idx] = acc;
        directions[idx] = x.as_slice().to_vec();
    }
    Ok(OrbitLog {
        base: xi.to_vec(),
        range,
        lognorms,
        directions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag_seq() -> MatrixSequence {
        MatrixSequence::constant(&DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5]))).unwrap()
    }

    #[test]
    fn identity_when_equal() {
        let x = transition(&diag_seq(), 7, 7).unwrap();
        assert_eq!(x.log_scale(), 0.0);
        assert_eq!(x.core(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn power_of_constant() {
        let x = transition(&diag_seq(), 3, 0).unwrap().to_matrix();
        assert_relative_eq!(
            x,
            DMatrix::from_diagonal(&DVector::from_vec(vec![8.0, 0.125])),
            epsilon = 1e-13
        );
        let back = transition(&diag_seq(), 0, 3).unwrap().to_matrix();
        assert_relative_eq!(
            back,
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.125, 8.0])),
            epsilon = 1e-13
        );
    }

    #[test]
    fn core_norm_stays_in_band() {
        let x = transition(&diag_seq(), 2000, 0).unwrap();
        let s = spectral_norm(x.core());
        assert!((0.5..=2.0).contains(&s));
        assert_relative_eq!(x.log_norm(), 2000.0 * 2f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn window_cap_is_enforced() {
        assert!(matches!(
            transition_with_cap(&diag_seq(), 11, 0, 10),
            Err(Error::WindowCap { .. })
        ));
    }

    #[test]
    fn orbit_of_coordinate_directions() {
        let orbit = orbit_lognorms(&diag_seq(), &[1.0, 0.0], (-3, 3)).unwrap();
        for n in -3..=3 {
            assert_relative_eq!(orbit.lognorm(n), n as f64 * 2f64.ln(), epsilon = 1e-14);
        }
        let orbit = orbit_lognorms(&diag_seq(), &[0.0, 1.0], (-3, 3)).unwrap();
        for n in -3..=3 {
            assert_relative_eq!(orbit.lognorm(n), -(n as f64) * 2f64.ln(), epsilon = 1e-14);
        }
        assert!(orbit.to_csv().starts_with("n,lognorm,dir_0,dir_1\n"));
    }

    #[test]
    fn zero_base_rejected() {
        assert!(matches!(
            orbit_lognorms(&diag_seq(), &[0.0, 0.0], (0, 3)),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn sampled_window_matches_direct() {
        let seq = diag_seq();
        let w = SampledWindow::new(&seq, -5, 5).unwrap();
        let a = w.transition(4, -3);
        let b = transition(&seq, 4, -3).unwrap();
        assert!(a.relative_distance(&b) < 1e-14);
        assert_relative_eq!(w.bound(), 2.0, epsilon = 1e-14);
    }
}
