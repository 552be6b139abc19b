//! Test support: seeded random instance generators and reference scorers
//! written as plainly as possible (nested loops over every pair, no
//! indexes), so that they can be trusted independently of the library's
//! optimized implementations.

pub mod gen;
pub mod oracle;
