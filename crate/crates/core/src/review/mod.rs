//! Human comparison of summary pairs: serving items, recording verdicts,
//! agreement between raters and reconciliation.

mod ops;
pub mod server;
pub mod terminal;
mod verdict;

pub use ops::*;
pub use verdict::*;
