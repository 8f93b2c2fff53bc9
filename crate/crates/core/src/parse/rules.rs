use serde::{Deserialize, Serialize};

use super::engine::{pattern_arity, Rule, RuleSet};
use crate::embed::{encode_list, Embedding};
use crate::error::{Error, Result};
use crate::schema::{AttrId, Schema, TokenId};

/// A production over token ids: `pattern → replacement`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrammarRule {
    pub pattern: Vec<TokenId>,
    pub replacement: TokenId,
}

/// Rules file entry: `{ "pattern": [...], "replacement": "..." }`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub pattern: Vec<String>,
    pub replacement: String,
}

pub fn grammar_from_specs(specs: &[RuleSpec], schema: &Schema) -> Result<Vec<GrammarRule>> {
    specs
        .iter()
        .map(|s| {
            Ok(GrammarRule {
                pattern: s
                    .pattern
                    .iter()
                    .map(|t| schema.require_token(t))
                    .collect::<Result<_>>()?,
                replacement: schema.require_token(&s.replacement)?,
            })
        })
        .collect()
}

pub fn grammar_from_json(json: &str, schema: &Schema) -> Result<Vec<GrammarRule>> {
    let specs: Vec<RuleSpec> = serde_json::from_str(json)?;
    grammar_from_specs(&specs, schema)
}

/// Tokens `L R E` with the attributes `next, arg1, arg2, arg3`.
pub fn balanced_parens_schema() -> Schema {
    let attrs = ["next", "arg1", "arg2", "arg3"];
    Schema::new(["L", "R", "E"].iter().chain(&attrs).copied(), attrs)
        .expect("fixed schema is valid")
}

/// `L R → E`, `L E R → E`, `E E → E`.
pub fn balanced_parens_rules() -> Vec<RuleSpec> {
    let rule = |p: &[&str]| RuleSpec {
        pattern: p.iter().map(|s| s.to_string()).collect(),
        replacement: "E".into(),
    };
    vec![rule(&["L", "R"]), rule(&["L", "E", "R"]), rule(&["E", "E"])]
}

/// The `next` attribute and `arg1, arg2, …` for as long as they exist.
pub fn distinguished_attributes(schema: &Schema) -> Result<(AttrId, Vec<AttrId>)> {
    let next = schema
        .attribute("next")
        .ok_or_else(|| Error::SchemaMismatch("schema has no `next` attribute".into()))?;
    let args = (1..)
        .map_while(|k| schema.attribute(&format!("arg{k}")))
        .collect();
    Ok((next, args))
}

/// Encodes each pattern as a `next`-chained list and each replacement as its
/// token vector. The squared norm of every pattern must round to its length.
pub fn compile_rules(
    grammar: &[GrammarRule],
    e: &Embedding,
    next: AttrId,
    args: &[AttrId],
) -> Result<RuleSet> {
    for a in std::iter::once(&next).chain(args) {
        if !e.schema().contains_attribute(*a) {
            return Err(Error::SchemaMismatch(format!("{a} not in schema")));
        }
    }
    let mut rules = Vec::with_capacity(grammar.len());
    for g in grammar {
        if g.pattern.len() > args.len() {
            return Err(Error::ArityExceeded {
                arity: g.pattern.len(),
                max: args.len(),
            });
        }
        let pattern = encode_list(&g.pattern, e, next)?;
        let arity = pattern_arity(&pattern);
        if arity != g.pattern.len() {
            return Err(Error::ArityMismatch {
                expected: g.pattern.len(),
                measured: arity,
            });
        }
        rules.push(Rule {
            pattern,
            replacement: e.token_bt(g.replacement)?,
            arity,
        });
    }
    let arg_mats = args
        .iter()
        .map(|a| e.attribute_matrix(*a).clone())
        .collect();
    RuleSet::from_parts(rules, e.attribute_matrix(next).clone(), arg_mats)
}
