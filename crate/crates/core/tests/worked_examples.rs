//! Worked examples for each module, checked against closed forms or
//! independent computations in `common`.

mod common;

use approx::assert_relative_eq;
use common::*;
use dichospec::bohl::{bohl_exponents, general_exponents, scalar_bohl, BohlParams};
use dichospec::bundles::{
    bundle_fibers, projector_at, whitney_sum_check, ProjectorFamily, SpectralBundleFiber,
};
use dichospec::dichotomy::{
    estimate_spectrum, estimate_spectrum_with, fit_decay_constants, gap_certificates, periodic_spectrum_oracle,
    scalar_spectrum, test_dichotomy, DecaySample, DichotomyAnalyzer, DichotomyParams, SpectrumParams,
};
use dichospec::families::{banded_diagonal, random_periodic};
use dichospec::theorems::{verify_endpoint_attainability, verify_theorem1, verify_theorem2, AttainabilityStatus, HarnessParams};
use dichospec::transition::{orbit_lognorms, transition};
use dichospec::triangular::{diagonal_significance, qr_triangularize, SignificanceParams};
use dichospec::{MatrixSequence, ScalarSequence};
use nalgebra::{dmatrix, DMatrix};

fn small_spectrum() -> SpectrumParams {
    SpectrumParams {
        dichotomy: DichotomyParams {
            window: 256,
            ..DichotomyParams::default()
        },
        ..SpectrumParams::default()
    }
}

#[test]
fn evaluation_by_kind() {
    let id = MatrixSequence::constant(&DMatrix::identity(2, 2)).unwrap();
    assert_eq!(id.evaluate(5).unwrap(), DMatrix::identity(2, 2));

    let a0 = dmatrix![1.0, 2.0; 0.0, 1.0];
    let a1 = dmatrix![3.0, 0.0; 1.0, 1.0];
    let p = MatrixSequence::periodic(&[a0, a1.clone()]).unwrap();
    assert_eq!(p.evaluate(3).unwrap(), a1);

    let u = piecewise(0.5, 2.0).to_matrix_sequence().unwrap();
    assert_eq!(u.evaluate(-1).unwrap()[(0, 0)], 0.5);
    assert_eq!(u.evaluate(0).unwrap()[(0, 0)], 2.0);
}

#[test]
fn observed_bounds() {
    assert_relative_eq!(diag(&[2.0, 0.5]).validate((-50, 50)).unwrap().m_hat, 2.0, epsilon = 1e-12);
    let s = periodic(&[2.0, 0.5]).to_matrix_sequence().unwrap();
    assert_relative_eq!(s.validate((-50, 50)).unwrap().m_hat, 2.0, epsilon = 1e-12);

    // brute-force scan of max(‖A(n)‖, ‖A(n)⁻¹‖)
    let seq = dichospec::families::random_banded(3, 3).unwrap();
    let report = seq.validate((-64, 64)).unwrap();
    let mut scan = 0.0f64;
    for n in -64..=64 {
        let a = seq.evaluate(n).unwrap();
        let ai = a.clone().try_inverse().unwrap();
        scan = scan.max(a.svd(false, false).singular_values.max());
        scan = scan.max(ai.svd(false, false).singular_values.max());
    }
    assert_relative_eq!(report.m_hat, scan, max_relative = 1e-10);
}

#[test]
fn inverses() {
    assert_eq!(diag(&[2.0, 0.5]).inverse_at(0).unwrap(), dmatrix![0.5, 0.0; 0.0, 2.0]);
    let r = MatrixSequence::constant(&dmatrix![0.0, -1.0; 1.0, 0.0]).unwrap();
    assert_relative_eq!(r.inverse_at(4).unwrap(), dmatrix![0.0, 1.0; -1.0, 0.0], epsilon = 1e-15);
    let seq = random_periodic(9, 2, 1).unwrap();
    let prod = seq.evaluate(0).unwrap() * seq.inverse_at(0).unwrap();
    assert!((prod - DMatrix::identity(2, 2)).amax() <= 1e-12);
}

#[test]
fn transitions() {
    let seq = random_periodic(4, 2, 3).unwrap();
    let x = transition(&seq, 7, 7).unwrap();
    assert_eq!(x.log_scale(), 0.0);
    assert_eq!(x.to_matrix(), DMatrix::identity(2, 2));

    let x = transition(&diag(&[2.0, 0.5]), 3, 0).unwrap().to_matrix();
    assert_relative_eq!(x, dmatrix![8.0, 0.0; 0.0, 0.125], epsilon = 1e-12);

    let lhs = transition(&seq, 5, 2).unwrap().mul(&transition(&seq, 2, -1).unwrap());
    let rhs = dense_product(&seq, 5, -1);
    assert!(rel_err(&lhs.to_matrix(), &rhs) <= 1e-10);
}

#[test]
fn orbit_lognorms_match_transitions() {
    let d = diag(&[2.0, 0.5]);
    let up = orbit_lognorms(&d, &[1.0, 0.0], (-3, 3)).unwrap();
    let down = orbit_lognorms(&d, &[0.0, 1.0], (-3, 3)).unwrap();
    for n in -3..=3 {
        assert_relative_eq!(up.lognorm(n), n as f64 * 2f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(down.lognorm(n), -n as f64 * 2f64.ln(), epsilon = 1e-12);
    }

    let seq = random_periodic(2, 2, 2).unwrap();
    let xi = [0.3, -1.1];
    let orbit = orbit_lognorms(&seq, &xi, (-40, 40)).unwrap();
    for n in -40..=40 {
        let x = transition(&seq, n, 0).unwrap();
        let v = x.core() * nalgebra::DVector::from_column_slice(&xi);
        let expected = v.norm().ln() + x.log_scale();
        assert_relative_eq!(orbit.lognorm(n), expected, max_relative = 1e-10);
    }
}

#[test]
fn bohl_exponents_of_simple_orbits() {
    let p = BohlParams::default();
    let est = bohl_exponents(&diag(&[2.0, 0.5]), &[1.0, 0.0], &p).unwrap();
    assert_relative_eq!(est.upper, 2.0, epsilon = 1e-12);
    assert_relative_eq!(est.lower, 2.0, epsilon = 1e-12);

    let n = p.window as f64;
    let s = periodic(&[2.0, 0.5]).to_matrix_sequence().unwrap();
    let est = bohl_exponents(&s, &[-3.0], &p).unwrap();
    assert!((est.upper - 1.0).abs() <= 2.0 / n && (est.lower - 1.0).abs() <= 2.0 / n);
}

#[test]
fn bohl_window_products_agree_with_enumeration() {
    for (u, two_sided) in [
        (periodic(&[2.0, 0.5]), false),
        (periodic(&[3.0, 0.5, 0.7]), true),
        (piecewise(0.5, 2.0), false),
        (piecewise(0.5, 2.0), true),
    ] {
        let p = BohlParams {
            window: 96,
            gap_min: 8,
            tail_fraction: 0.25,
            two_sided,
        };
        let m_lo = if two_sided { -96 } else { 0 };
        let tail = p.tail_start() as i64;
        let (lo, hi) = window_product_bohl(|k| u.evaluate(k), m_lo, 96, tail);
        let seq = u.to_matrix_sequence().unwrap();
        let est = bohl_exponents(&seq, &[1.0], &p).unwrap();
        assert_relative_eq!(est.lower, lo, max_relative = 1e-12);
        assert_relative_eq!(est.upper, hi, max_relative = 1e-12);
    }
}

#[test]
fn half_line_versus_whole_line_bohl() {
    let u = piecewise(0.5, 2.0);
    let p = BohlParams::default();
    let (lo, hi) = scalar_bohl(&u, &p).unwrap();
    let tol = 2.0 / p.window as f64;
    assert!((lo - 2.0).abs() <= tol && (hi - 2.0).abs() <= tol, "{lo} {hi}");

    let two = BohlParams { two_sided: true, ..p };
    let est = bohl_exponents(&u.to_matrix_sequence().unwrap(), &[1.0], &two).unwrap();
    assert_relative_eq!(est.lower, 0.5, epsilon = 1e-12);
    assert_relative_eq!(est.upper, 2.0, epsilon = 1e-12);
    let (lo, hi) = scalar_bohl(&u, &two).unwrap();
    assert_relative_eq!(lo, 0.5, epsilon = 1e-12);
    assert_relative_eq!(hi, 2.0, epsilon = 1e-12);
}

#[test]
fn scalar_bohl_examples() {
    let p = BohlParams::default();
    let tol = 2.0 / p.window as f64;
    let (lo, hi) = scalar_bohl(&ScalarSequence::Constant { value: 3.0 }, &p).unwrap();
    assert_relative_eq!(lo, 3.0, epsilon = 1e-12);
    assert_relative_eq!(hi, 3.0, epsilon = 1e-12);
    let (lo, hi) = scalar_bohl(&periodic(&[2.0, 0.5]), &p).unwrap();
    assert!((lo - 1.0).abs() <= tol && (hi - 1.0).abs() <= tol);
}

#[test]
fn general_exponent_examples() {
    let p = BohlParams::default();
    let g = general_exponents(&diag(&[2.0, 0.5]), &p).unwrap();
    assert_relative_eq!(g.senior, 2.0, epsilon = 1e-10);
    assert_relative_eq!(g.junior, 0.5, epsilon = 1e-10);

    let g = general_exponents(&periodic(&[2.0, 0.5]).to_matrix_sequence().unwrap(), &p).unwrap();
    let tol = 2.0 / p.window as f64;
    assert!((g.senior - 1.0).abs() <= tol && (g.junior - 1.0).abs() <= tol);

    let two = BohlParams { two_sided: true, ..p };
    let g = general_exponents(&piecewise(0.5, 2.0).to_matrix_sequence().unwrap(), &two).unwrap();
    assert_relative_eq!(g.senior, 2.0, epsilon = 1e-10);
    assert_relative_eq!(g.junior, 0.5, epsilon = 1e-10);
}

#[test]
fn dichotomy_verdicts() {
    let params = DichotomyParams {
        window: 256,
        ..DichotomyParams::default()
    };
    let d = diag(&[2.0, 0.5]);
    let v = test_dichotomy(&d, 1.0, &params).unwrap();
    let c = v.certificate().expect("certificate at gamma = 1");
    assert_eq!(c.rank, 1);
    assert!(subspace_distance(&c.stable(), &dmatrix![0.0; 1.0]) <= 1e-10);
    assert!((c.rho - 0.5).abs() <= 1e-6, "{}", c.rho);
    assert!((c.k - 1.0).abs() <= 1e-6, "{}", c.k);

    assert!(!test_dichotomy(&d, 2.0, &params).unwrap().is_certificate());

    // the scalar orbit grows in both time directions from n = 0
    let u = piecewise(0.5, 2.0).to_matrix_sequence().unwrap();
    let orbit = orbit_lognorms(&u, &[1.0], (-256, 256)).unwrap();
    assert!(orbit.lognorm(256) > 0.0 && orbit.lognorm(-256) > 0.0);
    assert!(!test_dichotomy(&u, 1.0, &params).unwrap().is_certificate());
}

#[test]
fn decay_fits() {
    let exact = |k: f64, rho: f64| -> Vec<DecaySample> {
        (0..40u64)
            .map(|g| DecaySample {
                gap: g,
                log_norm: k.ln() + g as f64 * rho.ln(),
            })
            .collect()
    };
    let f = fit_decay_constants(&exact(1.0, 0.5)).unwrap();
    assert_relative_eq!(f.k, 1.0, epsilon = 1e-10);
    assert_relative_eq!(f.rho, 0.5, epsilon = 1e-12);
    assert!(f.residual.abs() <= 1e-10);
    let f = fit_decay_constants(&exact(3.0, 0.8)).unwrap();
    assert_relative_eq!(f.k, 3.0, epsilon = 1e-10);
    assert_relative_eq!(f.rho, 0.8, epsilon = 1e-10);

    // noisy samples from the stable direction of diag(2, 1/2), γ = 1
    let d = diag(&[2.0, 0.5]);
    let p = test_dichotomy(&d, 1.0, &DichotomyParams { window: 256, ..Default::default() })
        .unwrap()
        .certificate()
        .unwrap()
        .projector();
    let mut samples = Vec::new();
    for l in (-64i64..64).step_by(8) {
        for g in (0..64u64).step_by(4) {
            let x = transition(&d, l + g as i64, l).unwrap();
            let noise = 1e-3 * (((l * 31 + g as i64 * 17) % 7) as f64 - 3.0);
            samples.push(DecaySample {
                gap: g,
                log_norm: (x.core() * &p).norm().ln() + x.log_scale() + noise,
            });
        }
    }
    let f = fit_decay_constants(&samples).unwrap();
    assert!((0.49..=0.51).contains(&f.rho), "{}", f.rho);
}

#[test]
fn spectrum_examples() {
    let spec = estimate_spectrum(&diag(&[2.0, 0.5]), &small_spectrum()).unwrap();
    assert_eq!(spec.intervals.len(), 2);
    assert!(spec.intervals[0].contains(0.5, 1e-12) && spec.intervals[1].contains(2.0, 1e-12));
    assert!(spec.intervals.iter().all(|i| i.width() <= 2e-3));
    assert_eq!(spec.gap_ranks, vec![0, 1, 2]);

    let seq = random_periodic(21, 2, 2).unwrap();
    let spec = estimate_spectrum(&seq, &small_spectrum()).unwrap();
    let points = periodic_spectrum_oracle(&seq, 2).unwrap();
    for p in &points {
        assert!(spec.interval_of(*p, 5e-3).is_some(), "{p} not in {:?}", spec.intervals);
    }
    for iv in &spec.intervals {
        assert!(points.iter().any(|&p| iv.contains(p, 5e-3)));
    }

    let spec = estimate_spectrum(&piecewise(0.5, 2.0).to_matrix_sequence().unwrap(), &small_spectrum()).unwrap();
    assert_eq!(spec.intervals.len(), 1);
    assert!((spec.intervals[0].lower - 0.5).abs() <= 1e-3 && (spec.intervals[0].upper - 2.0).abs() <= 1e-3);
}

#[test]
fn floquet_points() {
    let pts = periodic_spectrum_oracle(&diag(&[2.0, 0.5]), 1).unwrap();
    assert_eq!(pts.len(), 2);
    assert_relative_eq!(pts[0], 0.5, epsilon = 1e-12);
    assert_relative_eq!(pts[1], 2.0, epsilon = 1e-12);
    let pts = periodic_spectrum_oracle(&periodic(&[2.0, 0.5]).to_matrix_sequence().unwrap(), 2).unwrap();
    assert_eq!(pts.len(), 1);
    assert_relative_eq!(pts[0], 1.0, epsilon = 1e-12);

    // 2×2 monodromy eigenvalues from the characteristic polynomial
    let seq = random_periodic(33, 2, 3).unwrap();
    let m = dense_product(&seq, 3, 0);
    let (tr, det) = (m[(0, 0)] + m[(1, 1)], m.determinant());
    let disc = tr * tr - 4.0 * det;
    let mut moduli = if disc >= 0.0 {
        vec![((tr - disc.sqrt()) / 2.0).abs(), ((tr + disc.sqrt()) / 2.0).abs()]
    } else {
        vec![det.abs().sqrt(); 2]
    };
    moduli.sort_by(f64::total_cmp);
    moduli.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    let expected: Vec<f64> = moduli.iter().map(|x| x.cbrt()).collect();
    let pts = periodic_spectrum_oracle(&seq, 3).unwrap();
    assert_eq!(pts.len(), expected.len());
    for (p, e) in pts.iter().zip(&expected) {
        assert_relative_eq!(*p, *e, max_relative = 1e-10);
    }
    let spec = estimate_spectrum(&seq, &small_spectrum()).unwrap();
    for p in &pts {
        assert!(spec.interval_of(*p, 5e-3).is_some());
    }
}

#[test]
fn scalar_spectrum_examples() {
    let p = BohlParams::default();
    let (lo, hi) = scalar_spectrum(&ScalarSequence::Constant { value: 3.0 }, &p).unwrap();
    assert_relative_eq!(lo, 3.0, epsilon = 1e-12);
    assert_relative_eq!(hi, 3.0, epsilon = 1e-12);
    let (lo, hi) = scalar_spectrum(&periodic(&[2.0, 0.5]), &p).unwrap();
    let tol = 2.0 / p.window as f64;
    assert!((lo - 1.0).abs() <= tol && (hi - 1.0).abs() <= tol);
    let (lo, hi) = scalar_spectrum(&piecewise(0.5, 2.0), &p).unwrap();
    assert_relative_eq!(lo, 0.5, epsilon = 1e-12);
    assert_relative_eq!(hi, 2.0, epsilon = 1e-12);
}

#[test]
fn projector_examples() {
    let params = DichotomyParams { window: 256, ..Default::default() };
    let d = diag(&[2.0, 0.5]);
    let v = test_dichotomy(&d, 1.0, &params).unwrap();
    let fam = ProjectorFamily::from_certificate(1.0, v.certificate().unwrap());
    for n in [-5, 0, 3, 40] {
        let p = projector_at(&fam, &d, n).unwrap();
        assert!((p - dmatrix![0.0, 0.0; 0.0, 1.0]).amax() <= 1e-10);
    }

    let seq = random_periodic(5, 2, 2).unwrap();
    let analyzer = DichotomyAnalyzer::new(&seq, &params).unwrap();
    let spec = estimate_spectrum_with(&analyzer, &small_spectrum()).unwrap();
    let certs = gap_certificates(&analyzer, &spec);
    let inner = certs.iter().find(|c| matches!(c.rank(), Some(r) if r > 0 && r < 2));
    let v = inner.expect("a gap with a nontrivial splitting");
    let fam = ProjectorFamily::from_certificate(v.gamma, v.certificate().unwrap());
    assert_eq!(projector_at(&fam, &seq, 0).unwrap(), fam.base_matrix());
    let p7 = projector_at(&fam, &seq, 7).unwrap();
    let x = dense_product(&seq, 7, 0);
    let p0 = fam.base_matrix();
    assert!((&p7 * &x - &x * &p0).amax() <= 1e-8);
}

#[test]
fn fiber_examples() {
    let d = diag(&[2.0, 0.5]);
    let params = small_spectrum();
    let analyzer = DichotomyAnalyzer::new(&d, &params.dichotomy).unwrap();
    let spec = estimate_spectrum_with(&analyzer, &params).unwrap();
    let fibers = bundle_fibers(&spec, &gap_certificates(&analyzer, &spec)).unwrap();
    assert_eq!(fibers.len(), 2);
    assert!(subspace_distance(&fibers[0].basis_matrix(), &dmatrix![0.0; 1.0]) <= 1e-10);
    assert!(subspace_distance(&fibers[1].basis_matrix(), &dmatrix![1.0; 0.0]) <= 1e-10);

    let u = piecewise(0.5, 2.0).to_matrix_sequence().unwrap();
    let analyzer = DichotomyAnalyzer::new(&u, &params.dichotomy).unwrap();
    let spec = estimate_spectrum_with(&analyzer, &params).unwrap();
    let fibers = bundle_fibers(&spec, &gap_certificates(&analyzer, &spec)).unwrap();
    assert_eq!(fibers.len(), 1);
    assert_eq!(fibers[0].dimension, 1);

    let sys = banded_diagonal(12, 3).unwrap();
    let analyzer = DichotomyAnalyzer::new(&sys.system, &params.dichotomy).unwrap();
    let spec = estimate_spectrum_with(&analyzer, &params).unwrap();
    let fibers = bundle_fibers(&spec, &gap_certificates(&analyzer, &spec)).unwrap();
    assert_eq!(fibers.len(), 3);
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&i, &j| sys.bands[i].0.total_cmp(&sys.bands[j].0));
    for (fiber, &axis) in fibers.iter().zip(&order) {
        let e = DMatrix::from_fn(3, 1, |i, _| if i == axis { 1.0 } else { 0.0 });
        assert!(subspace_distance(&fiber.basis_matrix(), &e) <= 1e-6);
    }
    let w = whitney_sum_check(&fibers);
    assert!(w.pass && w.smallest_singular_value >= 0.9);
}

#[test]
fn whitney_examples() {
    let fiber = |index, v: Vec<f64>| SpectralBundleFiber {
        index,
        dimension: 1,
        basis: v.into_iter().map(|x| vec![x]).collect(),
    };
    let w = whitney_sum_check(&[fiber(1, vec![1.0, 0.0]), fiber(2, vec![0.0, 1.0])]);
    assert!(w.pass);
    assert_relative_eq!(w.smallest_singular_value, 1.0, epsilon = 1e-12);
    let w = whitney_sum_check(&[fiber(1, vec![1.0, 0.0]), fiber(2, vec![1.0, 0.0])]);
    assert!(!w.pass);
    assert_eq!(w.dimension_sum, 2);
    assert!(w.smallest_singular_value <= 1e-12);
}

#[test]
fn containment_examples() {
    let d = diag(&[2.0, 0.5]);
    let params = small_spectrum();
    let analyzer = DichotomyAnalyzer::new(&d, &params.dichotomy).unwrap();
    let spec = estimate_spectrum_with(&analyzer, &params).unwrap();
    let fibers = bundle_fibers(&spec, &gap_certificates(&analyzer, &spec)).unwrap();
    let harness = HarnessParams::default();
    let t1 = verify_theorem1("diag", &d, &spec, &fibers, &harness).unwrap();
    assert!(t1.all_passed());
    for row in &t1.rows {
        let expected = if row.fiber == Some(1) { 0.5 } else { 2.0 };
        assert_relative_eq!(row.upper, expected, epsilon = 1e-9);
        assert_relative_eq!(row.lower, expected, epsilon = 1e-9);
    }
    let t2 = verify_theorem2("diag", &d, &spec, &harness).unwrap();
    assert!(t2.all_passed());
    let generic = bohl_exponents(&d, &[0.3, -0.7], &harness.bohl).unwrap();
    assert_relative_eq!(generic.upper, 2.0, max_relative = 1e-6);

    let u = piecewise(0.5, 2.0).to_matrix_sequence().unwrap();
    let spec = estimate_spectrum(&u, &params).unwrap();
    assert!(verify_theorem2("pw", &u, &spec, &harness).unwrap().all_passed());

    let seq = random_periodic(8, 2, 2).unwrap();
    let spec = estimate_spectrum(&seq, &params).unwrap();
    assert!(verify_theorem2("per", &seq, &spec, &harness).unwrap().all_passed());
}

#[test]
fn attainability_examples() {
    let bohl = BohlParams::default();
    let params = small_spectrum();
    let d = diag(&[2.0, 0.5]);
    let spec = estimate_spectrum(&d, &params).unwrap();
    let r = verify_endpoint_attainability(&d, &spec, None, &bohl, 5e-3).unwrap();
    assert_eq!(r.status, AttainabilityStatus::AllAttained);

    let mixed = MatrixSequence::diagonal(vec![piecewise(0.5, 2.0), ScalarSequence::Constant { value: 3.0 }]).unwrap();
    let spec = estimate_spectrum(&mixed, &params).unwrap();
    assert_eq!(spec.intervals.len(), 2);
    let r = verify_endpoint_attainability(&mixed, &spec, None, &bohl, 5e-3).unwrap();
    assert_eq!(r.status, AttainabilityStatus::AllAttained);
}

#[test]
fn triangularization_examples() {
    let t = MatrixSequence::constant(&dmatrix![2.0, 1.0; 0.0, 0.5]).unwrap();
    let pair = qr_triangularize(&t, (-20, 20)).unwrap();
    for n in -20..=20 {
        assert!((pair.f(n).unwrap() - DMatrix::<f64>::identity(2, 2)).amax() <= 1e-12);
        assert!((pair.u.evaluate(n).unwrap() - t.evaluate(n).unwrap()).amax() <= 1e-12);
    }

    let rot = dmatrix![0.0, -1.0; 1.0, 0.0];
    let r = MatrixSequence::constant(&rot).unwrap();
    let pair = qr_triangularize(&r, (-8, 8)).unwrap();
    for n in -8i64..=8 {
        let mut expected = DMatrix::<f64>::identity(2, 2);
        let step = if n >= 0 { rot.clone() } else { rot.transpose() };
        for _ in 0..n.abs() {
            expected = &step * expected;
        }
        assert!((pair.f(n).unwrap() - expected).amax() <= 1e-12);
        assert!((pair.u.evaluate(n).unwrap() - DMatrix::<f64>::identity(2, 2)).amax() <= 1e-12);
    }

    let seq = random_periodic(6, 2, 2).unwrap();
    let pair = qr_triangularize(&seq, (-128, 127)).unwrap();
    assert!(pair.similarity_residual(&seq).unwrap() <= 1e-10);
}

#[test]
fn significance_examples() {
    let params = SignificanceParams {
        spectrum: small_spectrum(),
        ..SignificanceParams::default()
    };
    let r = diagonal_significance(&diag(&[2.0, 0.5]), &params).unwrap();
    assert!(r.significant);
    assert_eq!(r.union.len(), 2);
    for (&(a, b), x) in r.union.iter().zip([0.5, 2.0]) {
        assert_relative_eq!(a, x, epsilon = 1e-12);
        assert_relative_eq!(b, x, epsilon = 1e-12);
    }

    let t = MatrixSequence::constant(&dmatrix![2.0, 1.0; 0.0, 0.5]).unwrap();
    let r = diagonal_significance(&t, &params).unwrap();
    assert!(r.significant);
    assert_eq!(r.sigma_u.len(), 2);

    let coupled = MatrixSequence::from_kind(
        2,
        dichospec::SequenceKind::UpperTriangular {
            diagonal: vec![piecewise(0.5, 2.0), ScalarSequence::Constant { value: 1.0 }],
            off_diagonal: vec![dichospec::seqmodel::OffDiagonalEntry {
                row: 0,
                col: 1,
                values: piecewise(0.0, 1.0),
            }],
        },
    )
    .unwrap();
    let r = diagonal_significance(&coupled, &params).unwrap();
    assert!(r.hausdorff.is_finite() && r.symmetric_difference.is_finite());
}
