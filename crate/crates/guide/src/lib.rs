//! The book's chapters, compiled as doc-tests so the snippets cannot rot.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/sequences.md")]
pub mod sequences {}
#[doc = include_str!("../../../book/src/transitions.md")]
pub mod transitions {}
#[doc = include_str!("../../../book/src/bohl.md")]
pub mod bohl {}
#[doc = include_str!("../../../book/src/dichotomy.md")]
pub mod dichotomy {}
#[doc = include_str!("../../../book/src/spectrum.md")]
pub mod spectrum {}
#[doc = include_str!("../../../book/src/bundles.md")]
pub mod bundles {}
#[doc = include_str!("../../../book/src/theorems.md")]
pub mod theorems {}
#[doc = include_str!("../../../book/src/triangular.md")]
pub mod triangular {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
