//! Token and attribute alphabets.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Index of a token in [`Schema::tokens`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenId(pub usize);

/// Index of an attribute in [`Schema::attributes`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AttrId(pub usize);

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "token#{}", self.0)
    }
}

impl fmt::Display for AttrId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "attr#{}", self.0)
    }
}

/// On-disk schema description, `{ "tokens": [...], "attributes": [...] }`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaDescription {
    pub tokens: Vec<String>,
    pub attributes: Vec<String>,
}

/// A validated reflexive schema: every attribute name is also a token.
#[derive(Clone, Debug)]
pub struct Schema {
    tokens: Vec<String>,
    attributes: Vec<String>,
    attr_tokens: Vec<TokenId>,
    token_index: HashMap<String, TokenId>,
    attr_index: HashMap<String, AttrId>,
}

impl PartialEq for Schema {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens && self.attributes == other.attributes
    }
}

impl Eq for Schema {}

/// Checks a raw description against the schema invariants.
pub fn validate_schema(raw: &SchemaDescription) -> Result<Schema> {
    if raw.tokens.is_empty() {
        return Err(Error::EmptyAlphabet("token"));
    }
    if raw.attributes.is_empty() {
        return Err(Error::EmptyAlphabet("attribute"));
    }
    let mut token_index = HashMap::with_capacity(raw.tokens.len());
    for (i, name) in raw.tokens.iter().enumerate() {
        if token_index.insert(name.clone(), TokenId(i)).is_some() {
            return Err(Error::DuplicateName(name.clone()));
        }
    }
    let mut attr_index = HashMap::with_capacity(raw.attributes.len());
    for (i, name) in raw.attributes.iter().enumerate() {
        if attr_index.insert(name.clone(), AttrId(i)).is_some() {
            return Err(Error::DuplicateName(name.clone()));
        }
    }
    let attr_tokens = raw
        .attributes
        .iter()
        .map(|a| {
            token_index
                .get(a)
                .copied()
                .ok_or_else(|| Error::NonReflexive(a.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Schema {
        tokens: raw.tokens.clone(),
        attributes: raw.attributes.clone(),
        attr_tokens,
        token_index,
        attr_index,
    })
}

impl Schema {
    pub fn new<S: Into<String>>(
        tokens: impl IntoIterator<Item = S>,
        attributes: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        validate_schema(&SchemaDescription {
            tokens: tokens.into_iter().map(Into::into).collect(),
            attributes: attributes.into_iter().map(Into::into).collect(),
        })
    }

    /// Tokens `t0..t{n-1}` followed by the attribute tokens `next, arg1, .., arg{m-1}`.
    pub fn generated(plain_tokens: usize, attributes: usize) -> Result<Self> {
        if attributes == 0 {
            return Err(Error::EmptyAlphabet("attribute"));
        }
        let attrs = generated_attribute_names(attributes);
        let tokens = (0..plain_tokens)
            .map(|i| format!("t{i}"))
            .chain(attrs.iter().cloned())
            .collect::<Vec<_>>();
        Self::new(tokens, attrs)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: SchemaDescription = serde_json::from_str(text)?;
        validate_schema(&raw)
    }

    pub fn description(&self) -> SchemaDescription {
        SchemaDescription {
            tokens: self.tokens.clone(),
            attributes: self.attributes.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.description()).expect("schema serializes")
    }

    /// First 8 bytes of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> u64 {
        let digest = Sha256::digest(self.to_json().as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn attribute_count(&self) -> usize {
        self.attributes.len()
    }

    pub fn token(&self, name: &str) -> Option<TokenId> {
        self.token_index.get(name).copied()
    }

    pub fn attribute(&self, name: &str) -> Option<AttrId> {
        self.attr_index.get(name).copied()
    }

    pub fn require_token(&self, name: &str) -> Result<TokenId> {
        self.token(name)
            .ok_or_else(|| Error::UnknownToken(name.to_string()))
    }

    pub fn require_attribute(&self, name: &str) -> Result<AttrId> {
        self.attribute(name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    pub fn token_name(&self, id: TokenId) -> &str {
        &self.tokens[id.0]
    }

    pub fn attribute_name(&self, id: AttrId) -> &str {
        &self.attributes[id.0]
    }

    /// The token carrying the same name as `attr`.
    pub fn attribute_token(&self, attr: AttrId) -> TokenId {
        self.attr_tokens[attr.0]
    }

    /// Inverse of [`Schema::attribute_token`].
    pub fn token_attribute(&self, token: TokenId) -> Option<AttrId> {
        self.attr_tokens
            .iter()
            .position(|&t| t == token)
            .map(AttrId)
    }

    pub fn attribute_ids(&self) -> impl Iterator<Item = AttrId> {
        (0..self.attributes.len()).map(AttrId)
    }

    pub fn contains_token(&self, id: TokenId) -> bool {
        id.0 < self.tokens.len()
    }

    pub fn contains_attribute(&self, id: AttrId) -> bool {
        id.0 < self.attributes.len()
    }
}

/// `next, arg1, .., arg{m-1}`.
pub fn generated_attribute_names(count: usize) -> Vec<String> {
    (0..count)
        .map(|i| {
            if i == 0 {
                "next".to_string()
            } else {
                format!("arg{i}")
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc(tokens: &[&str], attrs: &[&str]) -> SchemaDescription {
        SchemaDescription {
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            attributes: attrs.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn balanced_parentheses_schema_is_valid() {
        let s = validate_schema(&desc(
            &["L", "R", "E", "next", "arg1", "arg2", "arg3"],
            &["next", "arg1", "arg2", "arg3"],
        ))
        .unwrap();
        assert_eq!(s.token_count(), 7);
        assert_eq!(s.attribute_count(), 4);
        assert_eq!(s.attribute_token(AttrId(2)), TokenId(5));
        assert_eq!(s.token_attribute(TokenId(6)), Some(AttrId(3)));
        assert_eq!(s.token_attribute(TokenId(0)), None);
    }

    #[test]
    fn rejects_non_reflexive() {
        let err = validate_schema(&desc(&["a"], &["b"])).unwrap_err();
        assert!(matches!(err, Error::NonReflexive(ref n) if n == "b"));
    }

    #[test]
    fn rejects_duplicates() {
        let err = validate_schema(&desc(&["a", "a"], &["a"])).unwrap_err();
        assert!(matches!(err, Error::DuplicateName(ref n) if n == "a"));
        let err = validate_schema(&desc(&["a", "b"], &["a", "a"])).unwrap_err();
        assert!(matches!(err, Error::DuplicateName(_)));
    }

    #[test]
    fn rejects_empty_lists() {
        assert!(matches!(
            validate_schema(&desc(&[], &["a"])),
            Err(Error::EmptyAlphabet(_))
        ));
        assert!(matches!(
            validate_schema(&desc(&["a"], &[])),
            Err(Error::EmptyAlphabet(_))
        ));
    }

    #[test]
    fn generated_schema_appends_attribute_tokens() {
        let s = Schema::generated(3, 3).unwrap();
        assert_eq!(s.tokens(), &["t0", "t1", "t2", "next", "arg1", "arg2"]);
        assert_eq!(s.attributes(), &["next", "arg1", "arg2"]);
        assert!(Schema::generated(3, 0).is_err());
    }

    #[test]
    fn json_round_trip_and_hash() {
        let s = Schema::generated(5, 2).unwrap();
        let back = Schema::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
        assert_eq!(s.hash(), back.hash());
        assert_ne!(s.hash(), Schema::generated(6, 2).unwrap().hash());
    }
}
