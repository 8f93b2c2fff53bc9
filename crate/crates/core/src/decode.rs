//! Recovering trees from encodings by recursive nearest-token search.
//!
//! At each candidate node the vector is compared against every token vector;
//! if the best inner product clears the threshold the token is placed there and
//! the vector, transformed by the inverse of each attribute matrix, is probed
//! for children. Candidates at one depth are processed together so the
//! attribute products run as matrix-matrix multiplies; the resulting tree does
//! not depend on evaluation order.

use std::collections::BTreeMap;

use crate::embed::{BTVector, Embedding};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::schema::TokenId;
use crate::tree::{Path, Tree};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodeConfig {
    /// Minimum inner product for a token to be accepted.
    pub threshold: f64,
    /// Deepest path that may be emitted before giving up.
    pub max_depth: usize,
    /// Largest tree that may be emitted before giving up.
    pub max_nodes: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            max_depth: 64,
            max_nodes: 4096,
        }
    }
}

impl DecodeConfig {
    pub fn with_threshold(threshold: f64) -> Self {
        Self {
            threshold,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidInput(format!(
                "threshold {} must lie strictly between 0 and 1",
                self.threshold
            )));
        }
        if self.max_depth == 0 || self.max_nodes == 0 {
            return Err(Error::InvalidInput("decode caps must be positive".into()));
        }
        Ok(())
    }
}

/// Best and second-best token inner products for one probe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TokenScore {
    pub token: TokenId,
    pub best: f64,
    pub runner_up: f64,
}

/// Argmax over `scores`; the lowest index wins ties.
fn best_of(scores: &[f64]) -> TokenScore {
    let mut best = (0usize, f64::NEG_INFINITY);
    let mut runner_up = f64::NEG_INFINITY;
    for (i, &s) in scores.iter().enumerate() {
        if s > best.1 {
            runner_up = best.1;
            best = (i, s);
        } else if s > runner_up {
            runner_up = s;
        }
    }
    TokenScore {
        token: TokenId(best.0),
        best: best.1,
        runner_up,
    }
}

/// Inner products of `v` with every token vector.
pub fn token_scores(v: &BTVector, e: &Embedding) -> Result<TokenScore> {
    e.check(v)?;
    Ok(best_of(&e.token_matrix().mul_vec(v.as_slice())))
}

/// Single non-recursive probe: the argmax token if it clears `threshold`.
pub fn decode_token(v: &BTVector, e: &Embedding, threshold: f64) -> Result<Option<TokenId>> {
    let score = token_scores(v, e)?;
    Ok((score.best > threshold).then_some(score.token))
}

/// One accepted node with the margins it was accepted on.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeTrace {
    pub path: Path,
    pub token: TokenId,
    pub best: f64,
    pub runner_up: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeReport {
    pub tree: Option<Tree>,
    /// Number of candidate nodes probed.
    pub probes: usize,
    /// Token inner products evaluated (`probes × |T|`).
    pub inner_products: usize,
    /// Accepted nodes in the order they were found.
    pub nodes: Vec<NodeTrace>,
}

pub fn decode(v: &BTVector, e: &Embedding, cfg: &DecodeConfig) -> Result<Option<Tree>> {
    decode_traced(v, e, cfg).map(|r| r.tree)
}

pub fn decode_traced(v: &BTVector, e: &Embedding, cfg: &DecodeConfig) -> Result<DecodeReport> {
    cfg.validate()?;
    e.check(v)?;
    let token_count = e.schema().token_count();
    let mut frontier: Vec<(Path, Vec<f64>)> = vec![(Path::root(), v.as_slice().to_vec())];
    let mut nodes: Vec<NodeTrace> = Vec::new();
    let mut probes = 0usize;
    let mut depth = 0usize;

    while !frontier.is_empty() {
        let xs = Matrix::from_rows(
            &frontier
                .iter()
                .map(|(_, x)| x.as_slice())
                .collect::<Vec<_>>(),
        );
        let scores = e.token_matrix().mul_rows(&xs);
        probes += frontier.len();

        let mut live: Vec<usize> = Vec::new();
        for (b, (path, _)) in frontier.iter().enumerate() {
            let s = best_of(scores.row(b));
            if s.best > cfg.threshold {
                if depth > cfg.max_depth {
                    return Err(Error::BudgetExceeded(format!(
                        "node accepted at depth {depth} beyond cap {}",
                        cfg.max_depth
                    )));
                }
                nodes.push(NodeTrace {
                    path: path.clone(),
                    token: s.token,
                    best: s.best,
                    runner_up: s.runner_up,
                });
                live.push(b);
            }
        }
        if nodes.len() > cfg.max_nodes {
            return Err(Error::BudgetExceeded(format!(
                "more than {} nodes decoded",
                cfg.max_nodes
            )));
        }
        if live.is_empty() {
            break;
        }

        let live_xs = Matrix::from_rows(
            &live
                .iter()
                .map(|&b| frontier[b].1.as_slice())
                .collect::<Vec<_>>(),
        );
        let mut next: Vec<(Path, Vec<f64>)> =
            Vec::with_capacity(live.len() * e.schema().attribute_count());
        let transformed: Vec<Matrix> = e
            .attribute_matrices()
            .iter()
            .map(|m| m.mul_rows_transposed(&live_xs))
            .collect();
        for (row, &b) in live.iter().enumerate() {
            for a in e.schema().attribute_ids() {
                next.push((frontier[b].0.child(a), transformed[a.0].row(row).to_vec()));
            }
        }
        frontier = next;
        depth += 1;
    }

    let tree = if nodes.is_empty() {
        None
    } else {
        let labels: BTreeMap<Path, TokenId> =
            nodes.iter().map(|n| (n.path.clone(), n.token)).collect();
        Some(assemble(&Path::root(), &labels, e))
    };
    Ok(DecodeReport {
        tree,
        probes,
        inner_products: probes * token_count,
        nodes,
    })
}

fn assemble(path: &Path, labels: &BTreeMap<Path, TokenId>, e: &Embedding) -> Tree {
    let children = e
        .schema()
        .attribute_ids()
        .filter_map(|a| {
            let p = path.child(a);
            labels
                .contains_key(&p)
                .then(|| (a, assemble(&p, labels, e)))
        })
        .collect::<Vec<_>>();
    Tree::new(labels[path], children).expect("one child per attribute by construction")
}
