// mdbook cannot run Rust listings against a workspace crate, so every chapter
// is pulled in here as module documentation and `cargo test --doc` runs its
// code blocks. One module per chapter keeps failures attributable.

#[cfg(doctest)]
#[doc = include_str!("src/vocabulary.md")]
pub mod vocabulary {}
#[cfg(doctest)]
#[doc = include_str!("src/suggestions.md")]
pub mod suggestions {}
#[cfg(doctest)]
#[doc = include_str!("src/corpus.md")]
pub mod corpus {}
#[cfg(doctest)]
#[doc = include_str!("src/agreement.md")]
pub mod agreement {}
#[cfg(doctest)]
#[doc = include_str!("src/eval_norm.md")]
pub mod eval_norm {}
#[cfg(doctest)]
#[doc = include_str!("src/eval_e2e.md")]
pub mod eval_e2e {}
#[cfg(doctest)]
#[doc = include_str!("src/service.md")]
pub mod service {}
#[cfg(doctest)]
#[doc = include_str!("src/cli.md")]
pub mod cli {}
