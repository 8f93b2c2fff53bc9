//! Reference parser over symbolic trees, using the same scan order as the
//! vector engine.

use super::rules::GrammarRule;
use crate::error::{Error, Result};
use crate::schema::{AttrId, TokenId};
use crate::tree::Tree;

/// Parses `tokens` to a tree whose internal nodes are replacement tokens with
/// the matched items under `args[0], args[1], …`.
pub fn symbolic_parse(
    tokens: &[TokenId],
    grammar: &[GrammarRule],
    args: &[AttrId],
    max_steps: usize,
) -> Result<Tree> {
    if tokens.is_empty() {
        return Err(Error::InvalidInput("cannot parse an empty sequence".into()));
    }
    if grammar.iter().any(|g| g.pattern.is_empty()) {
        return Err(Error::InvalidInput("rule pattern is empty".into()));
    }
    if let Some(g) = grammar.iter().find(|g| g.pattern.len() > args.len()) {
        return Err(Error::ArityExceeded {
            arity: g.pattern.len(),
            max: args.len(),
        });
    }
    let mut items: Vec<Tree> = tokens.iter().map(|&t| Tree::leaf(t)).collect();
    let mut steps = 0usize;
    loop {
        let found = grammar.iter().find_map(|g| {
            let m = g.pattern.len();
            (m <= items.len())
                .then(|| {
                    (0..=items.len() - m).find(|&j| {
                        items[j..j + m]
                            .iter()
                            .zip(&g.pattern)
                            .all(|(item, &p)| item.label() == p)
                    })
                })
                .flatten()
                .map(|j| (g, j))
        });
        let Some((g, j)) = found else { break };
        if steps >= max_steps {
            return Err(Error::StepBudgetExceeded(max_steps));
        }
        let m = g.pattern.len();
        let children: Vec<(AttrId, Tree)> =
            args.iter().copied().zip(items.drain(j..j + m)).collect();
        let node = Tree::new(g.replacement, children).expect("argument attributes are distinct");
        items.insert(j, node);
        steps += 1;
    }
    if items.len() != 1 {
        return Err(Error::NoParse { slots: items.len() });
    }
    Ok(items.pop().expect("one item"))
}
