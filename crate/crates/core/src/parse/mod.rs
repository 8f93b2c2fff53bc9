//! Parsing encoded token sequences into encoded parse trees.

mod engine;
mod rules;
mod symbolic;

pub use engine::{
    apply_replacement, match_window, parse_vectors, pattern_arity, window_vector, Application,
    ParseOutcome, ParseState, Rule, RuleSet,
};
pub use rules::{
    balanced_parens_rules, balanced_parens_schema, compile_rules, distinguished_attributes,
    grammar_from_json, grammar_from_specs, GrammarRule, RuleSpec,
};
pub use symbolic::symbolic_parse;

use crate::embed::{BTVector, Embedding};
use crate::error::{Error, Result};
use crate::schema::TokenId;

/// Step budget used when none is given: `4·n²` for `n` input tokens.
pub fn default_max_steps(len: usize) -> usize {
    4 * len * len
}

/// Encodes `tokens` and rewrites them with `rules` until one slot remains.
pub fn parse(
    tokens: &[TokenId],
    rules: &RuleSet,
    e: &Embedding,
    max_steps: Option<usize>,
) -> Result<BTVector> {
    parse_traced(tokens, rules, e, max_steps).map(|o| o.vector)
}

pub fn parse_traced(
    tokens: &[TokenId],
    rules: &RuleSet,
    e: &Embedding,
    max_steps: Option<usize>,
) -> Result<ParseOutcome> {
    if rules.fingerprint() != e.fingerprint() {
        return Err(Error::SchemaMismatch(
            "rules were compiled against a different embedding".into(),
        ));
    }
    let inputs = tokens
        .iter()
        .map(|&t| e.token_bt(t))
        .collect::<Result<Vec<_>>>()?;
    parse_vectors(
        inputs,
        rules,
        max_steps.unwrap_or_else(|| default_max_steps(tokens.len())),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::{decode, DecodeConfig};
    use crate::embed::make_embedding;
    use crate::harness::sampling::random_dyck;
    use crate::linalg::{self, max_abs_diff, Matrix};
    use crate::schema::AttrId;
    use crate::testutil;
    use crate::tree::Tree;
    use rand::Rng;

    struct Fixture {
        e: &'static Embedding,
        grammar: Vec<GrammarRule>,
        rules: RuleSet,
        args: Vec<AttrId>,
        l: TokenId,
        r: TokenId,
        big_e: TokenId,
    }

    fn fixture() -> Fixture {
        let e = testutil::parens_embedding();
        let s = e.schema();
        let grammar = grammar_from_specs(&balanced_parens_rules(), s).unwrap();
        let (next, args) = distinguished_attributes(s).unwrap();
        let rules = compile_rules(&grammar, e, next, &args).unwrap();
        Fixture {
            e,
            grammar,
            rules,
            args,
            l: s.token("L").unwrap(),
            r: s.token("R").unwrap(),
            big_e: s.token("E").unwrap(),
        }
    }

    fn tokens(f: &Fixture, s: &str) -> Vec<TokenId> {
        s.chars()
            .map(|c| match c {
                'L' => f.l,
                'R' => f.r,
                'E' => f.big_e,
                _ => panic!("bad symbol {c}"),
            })
            .collect()
    }

    #[test]
    fn compiled_patterns_are_next_chained_lists() {
        let f = fixture();
        let e = f.e;
        let next = e.schema().attribute("next").unwrap();
        let want_lr = linalg::add(e.token_vector(f.l), &e.apply(next, e.token_vector(f.r)));
        assert!(max_abs_diff(f.rules.rules()[0].pattern.as_slice(), &want_lr) < 1e-12);
        let a2r = e.apply(next, &e.apply(next, e.token_vector(f.r)));
        let want_ler = linalg::add(
            &linalg::add(e.token_vector(f.l), &e.apply(next, e.token_vector(f.big_e))),
            &a2r,
        );
        assert!(max_abs_diff(f.rules.rules()[1].pattern.as_slice(), &want_ler) < 1e-9);
        assert_eq!(
            f.rules.rules()[1].replacement.as_slice(),
            e.token_vector(f.big_e)
        );
        assert_eq!(
            f.rules.rules().iter().map(|r| r.arity).collect::<Vec<_>>(),
            vec![2, 3, 2]
        );

        let single = vec![GrammarRule {
            pattern: vec![f.l],
            replacement: f.big_e,
        }];
        let rs = compile_rules(&single, e, next, &f.args).unwrap();
        assert_eq!(rs.rules()[0].arity, 1);
        assert_eq!(rs.rules()[0].pattern.as_slice(), e.token_vector(f.l));
    }

    #[test]
    fn arity_from_squared_norm() {
        let f = fixture();
        assert_eq!(pattern_arity(&f.e.token_bt(f.l).unwrap()), 1);
        assert_eq!(pattern_arity(&f.rules.rules()[1].pattern), 3);
        assert_eq!(pattern_arity(&f.e.zero_vector()), 0);
    }

    #[test]
    fn compile_errors() {
        let f = fixture();
        let next = f.e.schema().attribute("next").unwrap();
        assert!(matches!(
            compile_rules(&f.grammar, f.e, next, &f.args[..2]),
            Err(Error::ArityExceeded { arity: 3, max: 2 })
        ));
        // with A_next = I the pattern `L L` encodes to 2·E(L), of squared norm 4
        let s = balanced_parens_schema();
        let base = make_embedding(&s, 32, 1).unwrap();
        let mut mats: Vec<Matrix> = base
            .attribute_matrices()
            .iter()
            .map(|m| (**m).clone())
            .collect();
        mats[0] = Matrix::identity(32);
        let e = Embedding::from_parts(
            s.clone(),
            32,
            1,
            "fixed".into(),
            (**base.token_matrix()).clone(),
            mats,
        )
        .unwrap();
        let l = s.token("L").unwrap();
        let g = vec![GrammarRule {
            pattern: vec![l, l],
            replacement: l,
        }];
        assert!(matches!(
            compile_rules(&g, &e, AttrId(0), &[AttrId(1), AttrId(2)]),
            Err(Error::ArityMismatch {
                expected: 2,
                measured: 4
            })
        ));
    }

    #[test]
    fn windows_match_exactly_when_tokens_agree() {
        let f = fixture();
        let mut rng = crate::rng::generator(8);
        let alphabet = [f.l, f.r, f.big_e];
        for _ in 0..300 {
            let len: usize = rng.gen_range(2..=5);
            let toks: Vec<TokenId> = (0..len).map(|_| alphabet[rng.gen_range(0..3)]).collect();
            let state = ParseState::new(toks.iter().map(|&t| f.e.token_bt(t).unwrap()).collect());
            for (rule, g) in f.rules.rules().iter().zip(&f.grammar) {
                for j in (0..len).filter(|j| j + rule.arity <= len) {
                    let symbolic = toks[j..j + rule.arity] == g.pattern[..];
                    assert_eq!(
                        match_window(rule, &state, j, &f.rules),
                        symbolic,
                        "{toks:?} at {j}"
                    );
                }
            }
        }
        let state = ParseState::new(
            tokens(&f, "LER")
                .iter()
                .map(|&t| f.e.token_bt(t).unwrap())
                .collect(),
        );
        let ip = linalg::dot(
            f.rules.rules()[1].pattern.as_slice(),
            &window_vector(&state, 0, 3, &f.rules),
        );
        assert!((ip - 3.0).abs() < 0.5);
    }

    #[test]
    fn replacement_stores_matched_slots_under_args() {
        let f = fixture();
        let state = ParseState::new(
            tokens(&f, "LRL")
                .iter()
                .map(|&t| f.e.token_bt(t).unwrap())
                .collect(),
        );
        let out = apply_replacement(&f.rules.rules()[0], &state, 0, &f.rules);
        assert_eq!(out.len(), 2);
        assert_eq!(out.steps(), 1);
        let want = linalg::add(
            &linalg::add(
                f.e.token_vector(f.big_e),
                &f.e.apply(f.args[0], f.e.token_vector(f.l)),
            ),
            &f.e.apply(f.args[1], f.e.token_vector(f.r)),
        );
        assert!(max_abs_diff(out.slot(0).as_slice(), &want) < 1e-12);
        assert_eq!(out.slot(1), state.slot(2));

        let next = f.e.schema().attribute("next").unwrap();
        let unary = compile_rules(
            &[GrammarRule {
                pattern: vec![f.r],
                replacement: f.big_e,
            }],
            f.e,
            next,
            &f.args,
        )
        .unwrap();
        let out = apply_replacement(&unary.rules()[0], &state, 1, &unary);
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn example_inputs() {
        let f = fixture();
        let cfg = DecodeConfig::default();
        let v = parse(&tokens(&f, "LR"), &f.rules, f.e, None).unwrap();
        let want = Tree::new(
            f.big_e,
            [(f.args[0], Tree::leaf(f.l)), (f.args[1], Tree::leaf(f.r))],
        )
        .unwrap();
        assert_eq!(decode(&v, f.e, &cfg).unwrap(), Some(want));

        let out = parse_traced(&tokens(&f, "E"), &f.rules, f.e, None).unwrap();
        assert_eq!(out.steps, 0);
        assert_eq!(out.vector.as_slice(), f.e.token_vector(f.big_e));

        let toks = tokens(&f, "LLRR");
        let v = parse(&toks, &f.rules, f.e, None).unwrap();
        let oracle = symbolic_parse(&toks, &f.grammar, &f.args, 64).unwrap();
        assert_eq!(oracle.node_count(), 6);
        assert_eq!(decode(&v, f.e, &cfg).unwrap(), Some(oracle));
    }

    #[test]
    fn agrees_with_symbolic_parser_on_random_balanced_strings() {
        let f = fixture();
        let mut rng = crate::rng::generator(31);
        for _ in 0..30 {
            let len = 2 * rng.gen_range(1..=4);
            let word = random_dyck(len, &mut rng);
            let toks: Vec<TokenId> = word.iter().map(|&o| if o { f.l } else { f.r }).collect();
            let out = parse_traced(&toks, &f.rules, f.e, None).unwrap();
            for a in &out.applications {
                assert!(a.slots_before >= f.rules.rules()[a.rule].arity);
            }
            let shrink: usize = out
                .applications
                .iter()
                .map(|a| f.rules.rules()[a.rule].arity - 1)
                .sum();
            assert_eq!(shrink, len - 1);
            let oracle = symbolic_parse(&toks, &f.grammar, &f.args, 1000).unwrap();
            assert_eq!(
                decode(&out.vector, f.e, &DecodeConfig::default()).unwrap(),
                Some(oracle)
            );
        }
    }

    #[test]
    fn failures_and_budgets() {
        let f = fixture();
        assert!(matches!(
            parse(&tokens(&f, "LL"), &f.rules, f.e, None),
            Err(Error::NoParse { slots: 2 })
        ));
        assert!(matches!(
            symbolic_parse(&tokens(&f, "LL"), &f.grammar, &f.args, 10),
            Err(Error::NoParse { slots: 2 })
        ));
        let next = f.e.schema().attribute("next").unwrap();
        let cycle = vec![GrammarRule {
            pattern: vec![f.big_e],
            replacement: f.big_e,
        }];
        let rs = compile_rules(&cycle, f.e, next, &f.args).unwrap();
        assert!(matches!(
            parse(&tokens(&f, "E"), &rs, f.e, Some(7)),
            Err(Error::StepBudgetExceeded(7))
        ));
        assert!(matches!(
            symbolic_parse(&tokens(&f, "E"), &cycle, &f.args, 7),
            Err(Error::StepBudgetExceeded(7))
        ));
        let other = make_embedding(f.e.schema(), 1000, 24).unwrap();
        assert!(matches!(
            parse(&tokens(&f, "LR"), &f.rules, &other, None),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn output_is_bit_identical_across_runs() {
        let f = fixture();
        let toks = tokens(&f, "LRLLRR");
        let a = parse(&toks, &f.rules, f.e, None).unwrap();
        let b = parse(&toks, &f.rules, f.e, None).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn engine_runs_without_a_token_table() {
        // Only the compiled rules and the four matrices are handed over.
        let src = include_str!("engine.rs");
        assert!(!src.contains("Embedding"));
        assert!(
            !src.contains("crate::schema")
                && !src.contains("crate::tree")
                && !src.contains("crate::decode")
        );
        let f = fixture();
        let restricted = RuleSet::from_parts(
            f.rules.rules().to_vec(),
            f.rules.next_matrix().clone(),
            f.rules.arg_matrices().to_vec(),
        )
        .unwrap();
        let inputs: Vec<BTVector> = tokens(&f, "LLRR")
            .iter()
            .map(|&t| f.e.token_bt(t).unwrap())
            .collect();
        let via_parts = parse_vectors(inputs, &restricted, 64).unwrap();
        let direct = parse(&tokens(&f, "LLRR"), &f.rules, f.e, None).unwrap();
        assert_eq!(via_parts.vector, direct);
    }
}
