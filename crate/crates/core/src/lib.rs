//! Exact search-based model integration for SMT(LRA) problems whose primal
//! graph is a tree.

pub mod bench;
pub mod engine;
pub mod exact;
pub mod oracle;
pub mod pieces;
pub mod reduce;
pub mod theory;
