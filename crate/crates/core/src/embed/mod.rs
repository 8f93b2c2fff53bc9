//! Random embeddings and the tree encoding built on them.
//!
//! Each token maps to a uniform random unit vector and each attribute to a
//! Haar random orthogonal matrix. A tree encodes to the sum over its nodes of
//! the node's token vector transformed by the attribute matrices along the
//! node's path, multiplied root-first from the left.

mod haar;
pub mod io;

use std::sync::Arc;

use sha2::{Digest, Sha256};

pub use haar::haar_orthogonal;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::{self, GENERATOR_NAME};
use crate::schema::{AttrId, Schema, TokenId};
use crate::tree::{Path, Tree};

/// A vector in embedding space, tagged with the fingerprint of the embedding
/// that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct BTVector {
    data: Vec<f64>,
    fingerprint: u64,
}

impl BTVector {
    pub fn new(data: Vec<f64>, fingerprint: u64) -> Self {
        Self { data, fingerprint }
    }

    pub fn zeros(dim: usize, fingerprint: u64) -> Self {
        Self::new(vec![0.0; dim], fingerprint)
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn norm_sq(&self) -> f64 {
        linalg::norm_sq(&self.data)
    }

    pub fn dot(&self, other: &BTVector) -> f64 {
        linalg::dot(&self.data, &other.data)
    }

    fn same_space(&self, other: &BTVector) -> Result<()> {
        if self.fingerprint != other.fingerprint || self.dim() != other.dim() {
            return Err(Error::SchemaMismatch(format!(
                "vectors from different embeddings ({:016x}/{} vs {:016x}/{})",
                self.fingerprint,
                self.dim(),
                other.fingerprint,
                other.dim()
            )));
        }
        Ok(())
    }

    /// Elementwise sum of two vectors from the same embedding.
    pub fn try_add(&self, other: &BTVector) -> Result<BTVector> {
        self.same_space(other)?;
        Ok(BTVector::new(
            linalg::add(&self.data, &other.data),
            self.fingerprint,
        ))
    }
}

/// Random data for one schema: token vectors, attribute matrices, and the
/// seed that produced them.
#[derive(Clone, Debug)]
pub struct Embedding {
    schema: Schema,
    dim: usize,
    seed: u64,
    generator: String,
    fingerprint: u64,
    tokens: Arc<Matrix>,
    attrs: Vec<Arc<Matrix>>,
}

/// Hash of `(schema, dim, seed, generator)` identifying an embedding.
pub fn fingerprint(schema: &Schema, dim: usize, seed: u64, generator: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(schema.to_json().as_bytes());
    h.update((dim as u64).to_le_bytes());
    h.update(seed.to_le_bytes());
    h.update(generator.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Draws a fresh embedding. Token vectors come first in the random stream,
/// then one orthogonal matrix per attribute in schema order.
pub fn make_embedding(schema: &Schema, dim: usize, seed: u64) -> Result<Embedding> {
    if dim < 2 {
        return Err(Error::DimensionTooSmall(dim));
    }
    let mut rng = rng::generator(seed);
    let rows: Vec<Vec<f64>> = (0..schema.token_count())
        .map(|_| rng::unit_vector(dim, &mut rng))
        .collect();
    let tokens = Matrix::from_rows(&rows);
    let attrs = (0..schema.attribute_count())
        .map(|_| Arc::new(haar_orthogonal(dim, &mut rng)))
        .collect();
    Ok(Embedding {
        schema: schema.clone(),
        dim,
        seed,
        generator: GENERATOR_NAME.to_string(),
        fingerprint: fingerprint(schema, dim, seed, GENERATOR_NAME),
        tokens: Arc::new(tokens),
        attrs,
    })
}

impl Embedding {
    /// Assembles an embedding from stored parts, checking shapes.
    pub fn from_parts(
        schema: Schema,
        dim: usize,
        seed: u64,
        generator: String,
        tokens: Matrix,
        attrs: Vec<Matrix>,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionTooSmall(dim));
        }
        if tokens.rows() != schema.token_count() || tokens.cols() != dim {
            return Err(Error::Format(format!(
                "token matrix is {}x{}, expected {}x{dim}",
                tokens.rows(),
                tokens.cols(),
                schema.token_count()
            )));
        }
        if attrs.len() != schema.attribute_count()
            || attrs.iter().any(|m| m.rows() != dim || m.cols() != dim)
        {
            return Err(Error::Format(
                "attribute matrices do not match schema".into(),
            ));
        }
        let fp = fingerprint(&schema, dim, seed, &generator);
        Ok(Self {
            schema,
            dim,
            seed,
            generator,
            fingerprint: fp,
            tokens: Arc::new(tokens),
            attrs: attrs.into_iter().map(Arc::new).collect(),
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn generator(&self) -> &str {
        &self.generator
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// `|T| × d`, one unit token vector per row.
    pub fn token_matrix(&self) -> &Arc<Matrix> {
        &self.tokens
    }

    pub fn token_vector(&self, t: TokenId) -> &[f64] {
        self.tokens.row(t.0)
    }

    pub fn attribute_matrix(&self, a: AttrId) -> &Arc<Matrix> {
        &self.attrs[a.0]
    }

    pub fn attribute_matrices(&self) -> &[Arc<Matrix>] {
        &self.attrs
    }

    /// `M_a · x`
    pub fn apply(&self, a: AttrId, x: &[f64]) -> Vec<f64> {
        self.attrs[a.0].mul_vec(x)
    }

    /// `M_a⁻¹ · x`, computed as `M_aᵀ · x`.
    pub fn apply_inverse(&self, a: AttrId, x: &[f64]) -> Vec<f64> {
        self.attrs[a.0].mul_vec_transposed(x)
    }

    pub fn zero_vector(&self) -> BTVector {
        BTVector::zeros(self.dim, self.fingerprint)
    }

    /// Wraps raw coordinates as a vector of this embedding.
    pub fn vector(&self, data: Vec<f64>) -> Result<BTVector> {
        if data.len() != self.dim {
            return Err(Error::SchemaMismatch(format!(
                "vector has {} coordinates, embedding dimension is {}",
                data.len(),
                self.dim
            )));
        }
        Ok(BTVector::new(data, self.fingerprint))
    }

    pub fn token_bt(&self, t: TokenId) -> Result<BTVector> {
        self.check_token(t)?;
        Ok(BTVector::new(
            self.token_vector(t).to_vec(),
            self.fingerprint,
        ))
    }

    /// Rejects vectors produced by a different embedding.
    pub fn check(&self, v: &BTVector) -> Result<()> {
        if v.fingerprint != self.fingerprint {
            return Err(Error::SchemaMismatch(format!(
                "vector fingerprint {:016x} does not match embedding {:016x}",
                v.fingerprint, self.fingerprint
            )));
        }
        if v.dim() != self.dim {
            return Err(Error::SchemaMismatch(format!(
                "vector dimension {} does not match embedding dimension {}",
                v.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    pub(crate) fn check_token(&self, t: TokenId) -> Result<()> {
        if self.schema.contains_token(t) {
            Ok(())
        } else {
            Err(Error::SchemaMismatch(format!("{t} not in schema")))
        }
    }

    pub(crate) fn check_attribute(&self, a: AttrId) -> Result<()> {
        if self.schema.contains_attribute(a) {
            Ok(())
        } else {
            Err(Error::SchemaMismatch(format!("{a} not in schema")))
        }
    }
}

/// Encodes a tree: one matrix-vector product per edge, bottom-up.
pub fn bt_encode(t: &Tree, e: &Embedding) -> Result<BTVector> {
    t.check_schema(e.schema())?;
    fn go(t: &Tree, e: &Embedding) -> Vec<f64> {
        let mut acc = e.token_vector(t.label()).to_vec();
        for (a, child) in t.children() {
            let sub = go(child, e);
            linalg::axpy(1.0, &e.apply(*a, &sub), &mut acc);
        }
        acc
    }
    Ok(BTVector::new(go(t, e), e.fingerprint()))
}

/// Node-count estimate `round(‖v‖²)`.
pub fn cardinality_estimate(v: &BTVector) -> usize {
    v.norm_sq().round() as usize
}

/// Encoding of `τ₁` with `τ₂` hung under the node at `at` via `attr`, computed
/// from the two encodings alone: `v1 + M_{p1}⋯M_{pk}·M_attr·v2`.
pub fn attach(
    v1: &BTVector,
    at: &Path,
    attr: AttrId,
    v2: &BTVector,
    e: &Embedding,
) -> Result<BTVector> {
    e.check(v1)?;
    e.check(v2)?;
    e.check_attribute(attr)?;
    for a in at.attrs() {
        e.check_attribute(*a)?;
    }
    let mut x = e.apply(attr, v2.as_slice());
    for a in at.attrs().iter().rev() {
        x = e.apply(*a, &x);
    }
    linalg::axpy(1.0, v1.as_slice(), &mut x);
    Ok(BTVector::new(x, e.fingerprint()))
}

/// `Σ_i A_next^{i-1} E(t_i)`, evaluated by Horner's rule from the tail.
pub fn encode_list(tokens: &[TokenId], e: &Embedding, next: AttrId) -> Result<BTVector> {
    e.check_attribute(next)?;
    let (last, rest) = tokens
        .split_last()
        .ok_or_else(|| Error::InvalidInput("cannot encode an empty list".into()))?;
    e.check_token(*last)?;
    let mut acc = e.token_vector(*last).to_vec();
    for t in rest.iter().rev() {
        e.check_token(*t)?;
        acc = e.apply(next, &acc);
        linalg::axpy(1.0, e.token_vector(*t), &mut acc);
    }
    Ok(BTVector::new(acc, e.fingerprint()))
}

/// Prepends `t` to an encoded list: `E(t) + A_next·v`.
pub fn push(v: &BTVector, t: TokenId, e: &Embedding, next: AttrId) -> Result<BTVector> {
    e.check(v)?;
    e.check_token(t)?;
    e.check_attribute(next)?;
    let mut acc = e.apply(next, v.as_slice());
    linalg::axpy(1.0, e.token_vector(t), &mut acc);
    Ok(BTVector::new(acc, e.fingerprint()))
}
