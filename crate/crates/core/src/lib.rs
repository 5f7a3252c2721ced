//! Exponents, exponential dichotomies and the dichotomy spectrum of
//! nonautonomous linear difference systems `x(n+1) = A(n) x(n)` on ℤ.

// `!(x > 0.0)` deliberately rejects NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bohl;
pub mod bundles;
pub mod dichotomy;
pub mod error;
pub mod families;
pub mod linalg;
pub mod report;
pub mod scenario;
pub mod seqmodel;
pub mod theorems;
pub mod transition;
pub mod triangular;

pub use bohl::{bohl_exponents, general_exponents, scalar_bohl, BohlEstimate, BohlParams, GeneralExponents};
pub use dichotomy::{
    estimate_spectrum, fit_decay_constants, periodic_spectrum_oracle, scalar_spectrum, test_dichotomy,
    DichotomyAnalyzer, DichotomyParams, DichotomyVerdict, SpectralInterval, SpectrumEstimate, SpectrumParams,
};
pub use error::{Error, Result};
pub use seqmodel::{MatrixSequence, ScalarSequence, SequenceKind};
pub use theorems::{verify_system, VerificationReport, VerifyParams};
pub use transition::{orbit_lognorms, transition, ScaledMatrix};
