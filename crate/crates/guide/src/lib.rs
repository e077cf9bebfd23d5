//! The chapters of `book/`, included verbatim. `cargo test -p reduced-schwarz-guide`
//! runs every code sample in the book.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/grid.md")]
pub mod grid {}

#[doc = include_str!("../../../book/src/local-solves.md")]
pub mod local_solves {}

#[doc = include_str!("../../../book/src/decomposition.md")]
pub mod decomposition {}

#[doc = include_str!("../../../book/src/low-rank.md")]
pub mod low_rank {}

#[doc = include_str!("../../../book/src/schwarz.md")]
pub mod schwarz {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
