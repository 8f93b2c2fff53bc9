//! Large embeddings shared by unit tests; each is built once per test binary.

use std::sync::OnceLock;

use crate::embed::{make_embedding, Embedding};
use crate::schema::Schema;

/// 100 plain tokens, attributes `next, arg1, arg2, arg3`, `d = 2000`.
pub fn tree_embedding() -> &'static Embedding {
    static E: OnceLock<Embedding> = OnceLock::new();
    E.get_or_init(|| make_embedding(&Schema::generated(100, 4).unwrap(), 2000, 17).unwrap())
}

/// The balanced-parentheses schema at `d = 1000`.
pub fn parens_embedding() -> &'static Embedding {
    static E: OnceLock<Embedding> = OnceLock::new();
    E.get_or_init(|| make_embedding(&crate::parse::balanced_parens_schema(), 1000, 23).unwrap())
}
