//! Core library for the CUI annotation workbench: vocabulary indexing, concept
//! suggestion, corpus management and linting, inter-annotator agreement, and
//! the normalization and end-to-end evaluators.
//!
//! ```
//! use cuiwb_core::{vocabulary, suggestion};
//!
//! let tsv = "C0004096\tAsthma\t1\tT047\tSNOMED\nC0349790\tAsthma exacerbation\t1\tT046\tSNOMED\n";
//! let concepts = vocabulary::parse_vocab_file(tsv.as_bytes()).unwrap();
//! let index = vocabulary::build_index(concepts).unwrap();
//! let result = suggestion::suggest(&index, "asthma", 10);
//! assert_eq!(result.direct[0].cui.as_str(), "C0004096");
//! assert_eq!(result.partial[0].cui.as_str(), "C0349790");
//! ```

pub mod agreement;
pub mod corpus;
pub mod cui;
pub mod eval_e2e;
pub mod eval_norm;
pub mod formats;
pub mod porter;
pub mod render;
pub mod suggestion;
pub mod text;
pub mod vocabulary;

pub use cui::{Cui, Label, CUI_LESS};
