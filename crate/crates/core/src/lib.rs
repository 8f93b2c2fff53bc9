//! Reversible embeddings of labeled trees into high-dimensional vectors.
//!
//! Each token of a schema is assigned a random unit vector and each attribute
//! a random orthogonal matrix. A tree is encoded as the sum over its nodes of
//! the node's token vector multiplied by the attribute matrices along its root
//! path. The crate provides the encoder, a threshold decoder, a transformer
//! built in closed form that performs the same decoding along a path, a parser
//! that rewrites encoded token sequences into encoded parse trees, and an
//! experiment harness.

pub mod decode;
pub mod embed;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod parse;
pub mod rng;
pub mod schema;
pub mod transformer;
pub mod tree;

#[cfg(test)]
mod testutil;

pub use decode::{decode, decode_token, decode_traced, DecodeConfig, DecodeReport};
pub use embed::{
    attach, bt_encode, cardinality_estimate, encode_list, make_embedding, push, BTVector, Embedding,
};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use schema::{validate_schema, AttrId, Schema, SchemaDescription, TokenId};
pub use tree::{Path, Tree};
