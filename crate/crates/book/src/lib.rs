//! The guide's chapters as doc-tests, so `cargo test` keeps them honest.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/document.md")]
pub mod document {}
#[doc = include_str!("../../../book/src/fragments.md")]
pub mod fragments {}
#[doc = include_str!("../../../book/src/lenses.md")]
pub mod lenses {}
#[doc = include_str!("../../../book/src/containers.md")]
pub mod containers {}
#[doc = include_str!("../../../book/src/brushes.md")]
pub mod brushes {}
#[doc = include_str!("../../../book/src/scheduling.md")]
pub mod scheduling {}
#[doc = include_str!("../../../book/src/protocol.md")]
pub mod protocol {}
#[doc = include_str!("../../../book/src/adapters.md")]
pub mod adapters {}
