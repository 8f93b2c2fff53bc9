//! Rewriting encoded token sequences with encoded production rules.
//!
//! Everything here works from the input vectors, the compiled rules and the
//! `next`/`arg` matrices alone; no token table or schema is consulted.

use std::collections::HashMap;
use std::sync::Arc;

use crate::embed::BTVector;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// One compiled production: a `next`-chained pattern list and a single
/// replacement token vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub pattern: BTVector,
    pub replacement: BTVector,
    /// Pattern length, `round(‖pattern‖²)`.
    pub arity: usize,
}

/// Squared-norm arity estimate of an encoded pattern.
pub fn pattern_arity(p: &BTVector) -> usize {
    p.norm_sq().round() as usize
}

#[derive(Clone, Debug)]
pub struct RuleSet {
    rules: Vec<Rule>,
    next: Arc<Matrix>,
    args: Vec<Arc<Matrix>>,
    fingerprint: u64,
}

impl RuleSet {
    pub fn from_parts(rules: Vec<Rule>, next: Arc<Matrix>, args: Vec<Arc<Matrix>>) -> Result<Self> {
        let first = rules
            .first()
            .ok_or_else(|| Error::InvalidInput("rule set is empty".into()))?;
        let fingerprint = first.pattern.fingerprint();
        let d = first.pattern.dim();
        for r in &rules {
            for v in [&r.pattern, &r.replacement] {
                if v.fingerprint() != fingerprint || v.dim() != d {
                    return Err(Error::SchemaMismatch(
                        "rules come from different embeddings".into(),
                    ));
                }
            }
            if r.arity == 0 {
                return Err(Error::InvalidInput("rule pattern is empty".into()));
            }
            if r.arity > args.len() {
                return Err(Error::ArityExceeded {
                    arity: r.arity,
                    max: args.len(),
                });
            }
        }
        for m in std::iter::once(&next).chain(&args) {
            if m.rows() != d || m.cols() != d {
                return Err(Error::SchemaMismatch(format!(
                    "matrix is {}×{}, rules have dimension {d}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        Ok(Self {
            rules,
            next,
            args,
            fingerprint,
        })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn next_matrix(&self) -> &Arc<Matrix> {
        &self.next
    }

    pub fn arg_matrices(&self) -> &[Arc<Matrix>] {
        &self.args
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn dim(&self) -> usize {
        self.next.rows()
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Slot {
    id: u64,
    x: BTVector,
}

/// The current sentential form.
#[derive(Clone, Debug, PartialEq)]
pub struct ParseState {
    slots: Vec<Slot>,
    next_id: u64,
    steps: usize,
}

impl ParseState {
    pub fn new(inputs: Vec<BTVector>) -> Self {
        let slots: Vec<Slot> = inputs
            .into_iter()
            .enumerate()
            .map(|(i, x)| Slot { id: i as u64, x })
            .collect();
        Self {
            next_id: slots.len() as u64,
            slots,
            steps: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot(&self, j: usize) -> &BTVector {
        &self.slots[j].x
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn window_ids(&self, j: usize, m: usize) -> Vec<u64> {
        self.slots[j..j + m].iter().map(|s| s.id).collect()
    }
}

/// `Σ_{k=1..m} A_next^{k-1} x_{j+k-1}`, by Horner's rule from the last slot.
pub fn window_vector(state: &ParseState, j: usize, m: usize, rules: &RuleSet) -> Vec<f64> {
    assert!(m >= 1 && j + m <= state.len(), "window out of range");
    let mut acc = state.slot(j + m - 1).as_slice().to_vec();
    for k in (j..j + m - 1).rev() {
        acc = rules.next.mul_vec(&acc);
        linalg::axpy(1.0, state.slot(k).as_slice(), &mut acc);
    }
    acc
}

fn matches(rule: &Rule, window: &[f64]) -> bool {
    linalg::dot(rule.pattern.as_slice(), window) > rule.arity as f64 - 0.5
}

/// Whether `rule` matches the `arity` slots starting at `j`.
pub fn match_window(rule: &Rule, state: &ParseState, j: usize, rules: &RuleSet) -> bool {
    matches(rule, &window_vector(state, j, rule.arity, rules))
}

/// Replaces the window at `j` with `r + Σ_k A_arg_k x_{j+k-1}`.
pub fn apply_replacement(rule: &Rule, state: &ParseState, j: usize, rules: &RuleSet) -> ParseState {
    let m = rule.arity;
    assert!(j + m <= state.len(), "window out of range");
    let mut out = rule.replacement.as_slice().to_vec();
    for k in 0..m {
        let term = rules.args[k].mul_vec(state.slot(j + k).as_slice());
        linalg::axpy(1.0, &term, &mut out);
    }
    let mut next = state.clone();
    next.slots.splice(
        j..j + m,
        std::iter::once(Slot {
            id: state.next_id,
            x: BTVector::new(out, rules.fingerprint),
        }),
    );
    next.next_id += 1;
    next.steps += 1;
    next
}

/// One applied rewrite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Application {
    pub rule: usize,
    pub at: usize,
    pub slots_before: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParseOutcome {
    pub vector: BTVector,
    pub steps: usize,
    pub applications: Vec<Application>,
}

/// Runs rewrites to a fixed point: rules in order, windows left to right,
/// first match applied, then the scan restarts.
pub fn parse_vectors(
    inputs: Vec<BTVector>,
    rules: &RuleSet,
    max_steps: usize,
) -> Result<ParseOutcome> {
    if inputs.is_empty() {
        return Err(Error::InvalidInput("cannot parse an empty sequence".into()));
    }
    for x in &inputs {
        if x.fingerprint() != rules.fingerprint || x.dim() != rules.dim() {
            return Err(Error::SchemaMismatch(
                "input vector does not match the rule set".into(),
            ));
        }
    }
    let mut state = ParseState::new(inputs);
    let mut cache: HashMap<Vec<u64>, Vec<f64>> = HashMap::new();
    let mut applications = Vec::new();
    loop {
        let mut found = None;
        'scan: for (i, rule) in rules.rules.iter().enumerate() {
            let m = rule.arity;
            if m > state.len() {
                continue;
            }
            for j in 0..=state.len() - m {
                let key = state.window_ids(j, m);
                let window = cache
                    .entry(key)
                    .or_insert_with(|| window_vector(&state, j, m, rules));
                if matches(rule, window) {
                    found = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((i, j)) = found else { break };
        if state.steps >= max_steps {
            return Err(Error::StepBudgetExceeded(max_steps));
        }
        applications.push(Application {
            rule: i,
            at: j,
            slots_before: state.len(),
        });
        state = apply_replacement(&rules.rules[i], &state, j, rules);
    }
    if state.len() != 1 {
        return Err(Error::NoParse { slots: state.len() });
    }
    Ok(ParseOutcome {
        steps: state.steps,
        vector: state.slots.swap_remove(0).x,
        applications,
    })
}
