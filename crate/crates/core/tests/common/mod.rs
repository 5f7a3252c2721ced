#![allow(dead_code)]

use dichospec::{MatrixSequence, ScalarSequence};
use nalgebra::DMatrix;

pub fn diag(values: &[f64]) -> MatrixSequence {
    MatrixSequence::diagonal(values.iter().map(|&value| ScalarSequence::Constant { value }).collect()).unwrap()
}

pub fn piecewise(neg: f64, nonneg: f64) -> ScalarSequence {
    ScalarSequence::Piecewise {
        negative: vec![neg],
        nonnegative: vec![nonneg],
    }
}

pub fn periodic(values: &[f64]) -> ScalarSequence {
    ScalarSequence::Periodic { values: values.to_vec() }
}

/// `X(m, n)` by plain dense multiplication, inverting each factor.
pub fn dense_product(seq: &MatrixSequence, m: i64, n: i64) -> DMatrix<f64> {
    let d = seq.dimension();
    let mut x = DMatrix::identity(d, d);
    if m >= n {
        for k in n..m {
            x = seq.evaluate(k).unwrap() * x;
        }
    } else {
        for k in m..n {
            x *= seq.evaluate(k).unwrap().try_inverse().unwrap();
        }
    }
    x
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Bohl envelopes by enumerating every window product `|u(m)⋯u(m+g−1)|^{1/g}`
/// for `m ∈ [m_lo, N − g]`, over the tail gaps `g ≥ tail`.
pub fn window_product_bohl(u: impl Fn(i64) -> f64, m_lo: i64, n: i64, tail: i64) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for g in tail..=n {
        for m in m_lo..=(n - g) {
            let p: f64 = (m..m + g).map(|k| u(k).abs()).product();
            let r = p.powf(1.0 / g as f64);
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (lo, hi)
}

/// Smallest principal-angle sine between two column spaces of equal dimension.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let proj = &qb * qb.transpose();
    (&qa - &proj * &qa).norm()
}
