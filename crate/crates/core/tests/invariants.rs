use dichospec::dichotomy::{estimate_spectrum_with, DichotomyAnalyzer, DichotomyParams, SpectrumParams};
use dichospec::families::{banded_diagonal, random_banded, random_periodic};
use dichospec::MatrixSequence;

fn params() -> SpectrumParams {
    SpectrumParams {
        dichotomy: DichotomyParams {
            window: 256,
            ..DichotomyParams::default()
        },
        ..SpectrumParams::default()
    }
}

fn systems() -> Vec<MatrixSequence> {
    let mut out = Vec::new();
    for s in 0..4 {
        out.push(random_periodic(40 + s, 1 + s as usize % 3, 1 + s as usize % 4).unwrap());
        out.push(banded_diagonal(60 + s, 3).unwrap().system);
        out.push(random_banded(80 + s, 2).unwrap());
    }
    out
}

#[test]
fn ranks_increase_across_gaps_and_along_the_grid() {
    for seq in systems() {
        let analyzer = DichotomyAnalyzer::new(&seq, &params().dichotomy).unwrap();
        let spec = estimate_spectrum_with(&analyzer, &params()).unwrap();
        let d = seq.dimension();
        assert_eq!(spec.gap_ranks.first(), Some(&0));
        assert_eq!(spec.gap_ranks.last(), Some(&d));
        assert!(spec.gap_ranks.windows(2).all(|w| w[0] < w[1]));
        assert!(spec.intervals.len() <= d);
        let ranks: Vec<usize> = spec.grid.iter().filter_map(|p| p.rank).collect();
        assert!(ranks.windows(2).all(|w| w[0] <= w[1]));
        for w in spec.intervals.windows(2) {
            assert!(w[0].upper < w[1].lower);
        }
        for iv in &spec.intervals {
            assert!(iv.lower >= 1.0 / spec.m_hat * (1.0 - 1e-12) && iv.upper <= spec.m_hat * (1.0 + 1e-12));
        }
    }
}

#[test]
fn certificates_with_margin_survive_small_perturbations() {
    let tol = params().refine_tol;
    for seq in systems() {
        let analyzer = DichotomyAnalyzer::new(&seq, &params().dichotomy).unwrap();
        let spec = estimate_spectrum_with(&analyzer, &params()).unwrap();
        for (g, &gamma) in spec.gap_gammas.iter().enumerate() {
            let v = analyzer.verdict(gamma);
            assert!(v.margin() > 0.0);
            for factor in [1.0 - tol / 2.0, 1.0 + tol / 2.0] {
                let w = analyzer.verdict(gamma * factor);
                assert_eq!(w.rank(), Some(spec.gap_ranks[g]), "gamma {gamma} factor {factor}");
            }
        }
    }
}
