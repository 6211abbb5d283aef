//! The user guide, bound into rustdoc so its examples compile and run with
//! the test suite. The same sources render as a standalone book with
//! mdbook from the `book/` directory.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/plane-sets.md")]
pub mod plane_sets {}

#[doc = include_str!("../../../book/src/circle-maps.md")]
pub mod circle_maps {}

#[doc = include_str!("../../../book/src/koopman-towers.md")]
pub mod koopman_towers {}

#[doc = include_str!("../../../book/src/budgeted-limits.md")]
pub mod budgeted_limits {}

#[doc = include_str!("../../../book/src/finite-problems.md")]
pub mod finite_problems {}

#[doc = include_str!("../../../book/src/exact-machines.md")]
pub mod exact_machines {}

#[doc = include_str!("../../../book/src/command-line.md")]
pub mod command_line {}
