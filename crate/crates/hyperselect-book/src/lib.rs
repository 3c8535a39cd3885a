//! Runs the code listings of the guide in `book/` as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod chapter0 {}

#[doc = include_str!("../../../book/src/proximal-operators.md")]
pub mod chapter1 {}

#[doc = include_str!("../../../book/src/models.md")]
pub mod chapter2 {}

#[doc = include_str!("../../../book/src/solver.md")]
pub mod chapter3 {}

#[doc = include_str!("../../../book/src/baselines.md")]
pub mod chapter4 {}

#[doc = include_str!("../../../book/src/data.md")]
pub mod chapter5 {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod chapter6 {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod chapter7 {}
