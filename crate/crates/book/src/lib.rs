//! The guide in `book/src`, included chapter by chapter so that every Rust
//! snippet runs as a doc-test. One module per chapter keeps failures
//! traceable to their file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}
#[doc = include_str!("../../../book/src/auctions.md")]
pub mod auctions {}
#[doc = include_str!("../../../book/src/pacing.md")]
pub mod pacing {}
#[doc = include_str!("../../../book/src/equilibrium.md")]
pub mod equilibrium {}
#[doc = include_str!("../../../book/src/certificates.md")]
pub mod certificates {}
#[doc = include_str!("../../../book/src/data.md")]
pub mod data {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
