use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampling::{random_dyck, random_list, random_tree};
use crate::decode::{decode, DecodeConfig};
use crate::embed::{bt_encode, cardinality_estimate, encode_list, make_embedding, Embedding};
use crate::error::{Error, Result};
use crate::parse::{
    balanced_parens_rules, balanced_parens_schema, compile_rules, distinguished_attributes,
    grammar_from_specs, parse, symbolic_parse, GrammarRule, RuleSet,
};
use crate::rng::{derive_seed, generator};
use crate::schema::{AttrId, Schema, TokenId};
use crate::tree::Tree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Lists,
    Trees,
    Parse,
    Separation,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Lists => "lists",
            SweepKind::Trees => "trees",
            SweepKind::Parse => "parse",
            SweepKind::Separation => "separation",
        }
    }

    fn tag(self) -> u64 {
        match self {
            SweepKind::Lists => 1,
            SweepKind::Trees => 2,
            SweepKind::Parse => 3,
            SweepKind::Separation => 4,
        }
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lists" => Ok(SweepKind::Lists),
            "trees" => Ok(SweepKind::Trees),
            "parse" => Ok(SweepKind::Parse),
            "separation" => Ok(SweepKind::Separation),
            other => Err(Error::InvalidSpec(format!(
                "unknown experiment kind `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub dims: Vec<usize>,
    /// List lengths, tree sizes, or string lengths.
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Plain (label) tokens; the attribute tokens come on top.
    pub tokens: usize,
    pub attrs: usize,
}

impl SweepSpec {
    /// Default schema sizes: 100 tokens with one
    /// attribute for lists and four for trees.
    pub fn new(
        kind: SweepKind,
        dims: Vec<usize>,
        sizes: Vec<usize>,
        trials: usize,
        seed: u64,
    ) -> Self {
        let attrs = match kind {
            SweepKind::Lists => 1,
            _ => 4,
        };
        Self {
            kind,
            dims,
            sizes,
            trials,
            seed,
            tokens: 100,
            attrs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.sizes.is_empty() {
            return Err(Error::InvalidSpec(
                "dims and sizes must be non-empty".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::InvalidSpec("trials must be at least 1".into()));
        }
        if let Some(d) = self.dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidSpec(format!("dimension {d} is below 2")));
        }
        if self.sizes.contains(&0) {
            return Err(Error::InvalidSpec("sizes must be positive".into()));
        }
        match self.kind {
            SweepKind::Lists | SweepKind::Trees if self.tokens == 0 || self.attrs == 0 => Err(
                Error::InvalidSpec("token and attribute counts must be positive".into()),
            ),
            SweepKind::Parse if self.sizes.iter().any(|l| l % 2 == 1) => Err(Error::InvalidSpec(
                "balanced strings have even length".into(),
            )),
            SweepKind::Separation => Err(Error::InvalidSpec(
                "separation is measured with run_separation_probe, not as a sweep".into(),
            )),
            _ => Ok(()),
        }
    }

    fn embedding_seed(&self, d: usize) -> u64 {
        derive_seed(self.seed, &[self.kind.tag(), d as u64])
    }

    fn trial_seed(&self, d: usize, l: usize, trial: usize) -> u64 {
        derive_seed(
            self.seed,
            &[self.kind.tag(), d as u64, l as u64, trial as u64],
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellResult {
    pub d: usize,
    pub l: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Trials where `round(‖v‖²)` equalled the structure's node count.
    pub cardinality_matches: usize,
    pub wall_time_ms: f64,
}

/// Outcome of a single trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Trial {
    success: bool,
    cardinality: bool,
}

/// Everything a trial needs that depends only on the dimension.
struct Context {
    e: Embedding,
    parse: Option<ParseContext>,
}

struct ParseContext {
    grammar: Vec<GrammarRule>,
    /// `None` when the rules could not be compiled at this dimension.
    rules: Option<RuleSet>,
    args: Vec<AttrId>,
    open: TokenId,
    close: TokenId,
}

fn context(spec: &SweepSpec, d: usize) -> Result<Context> {
    let seed = spec.embedding_seed(d);
    match spec.kind {
        SweepKind::Parse => {
            let s = balanced_parens_schema();
            let e = make_embedding(&s, d, seed)?;
            let grammar = grammar_from_specs(&balanced_parens_rules(), &s)?;
            let (next, args) = distinguished_attributes(&s)?;
            // at tiny d the pattern norms no longer round to their arity
            let rules = match compile_rules(&grammar, &e, next, &args) {
                Ok(r) => Some(r),
                Err(Error::ArityMismatch { .. }) => None,
                Err(other) => return Err(other),
            };
            let (l, r) = (s.token("L").expect("L"), s.token("R").expect("R"));
            Ok(Context {
                e,
                parse: Some(ParseContext {
                    grammar,
                    rules,
                    args,
                    open: l,
                    close: r,
                }),
            })
        }
        _ => Ok(Context {
            e: make_embedding(&Schema::generated(spec.tokens, spec.attrs)?, d, seed)?,
            parse: None,
        }),
    }
}

fn run_trial(spec: &SweepSpec, ctx: &Context, d: usize, l: usize, trial: usize) -> Result<Trial> {
    let mut rng = generator(spec.trial_seed(d, l, trial));
    let e = &ctx.e;
    let cfg = DecodeConfig::default();
    let attempt = |v: &crate::embed::BTVector, want: &Tree| -> Trial {
        // budget overruns count as failures
        let got = decode(v, e, &cfg).ok().flatten();
        Trial {
            success: got.as_ref() == Some(want),
            cardinality: cardinality_estimate(v) == want.node_count(),
        }
    };
    match spec.kind {
        SweepKind::Lists => {
            let next = AttrId(0);
            let tokens = random_list(l, spec.tokens, &mut rng);
            let v = encode_list(&tokens, e, next)?;
            Ok(attempt(&v, &Tree::chain(&tokens, next)))
        }
        SweepKind::Trees => {
            let t = random_tree(l, spec.tokens, spec.attrs, &mut rng);
            let v = bt_encode(&t, e)?;
            Ok(attempt(&v, &t))
        }
        SweepKind::Parse => {
            let pc = ctx.parse.as_ref().expect("parse context");
            let tokens: Vec<TokenId> = random_dyck(l, &mut rng)
                .into_iter()
                .map(|open| if open { pc.open } else { pc.close })
                .collect();
            let max_steps = crate::parse::default_max_steps(tokens.len());
            let want = symbolic_parse(&tokens, &pc.grammar, &pc.args, max_steps)?;
            let Some(rules) = &pc.rules else {
                return Ok(Trial {
                    success: false,
                    cardinality: false,
                });
            };
            match parse(&tokens, rules, e, Some(max_steps)) {
                Ok(v) => Ok(attempt(&v, &want)),
                Err(Error::NoParse { .. } | Error::StepBudgetExceeded(_)) => Ok(Trial {
                    success: false,
                    cardinality: false,
                }),
                Err(other) => Err(other),
            }
        }
        SweepKind::Separation => unreachable!("rejected by validate"),
    }
}

fn run_cell(spec: &SweepSpec, ctx: &Context, d: usize, l: usize) -> Result<CellResult> {
    let start = Instant::now();
    let trials: Vec<Trial> = (0..spec.trials)
        .into_par_iter()
        .map(|i| run_trial(spec, ctx, d, l, i))
        .collect::<Result<_>>()?;
    let successes = trials.iter().filter(|t| t.success).count();
    Ok(CellResult {
        d,
        l,
        trials: spec.trials,
        successes,
        success_rate: successes as f64 / spec.trials as f64,
        cardinality_matches: trials.iter().filter(|t| t.cardinality).count(),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Runs every `(d, l)` cell in `dims × sizes` order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<CellResult>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.dims.len() * spec.sizes.len());
    for &d in &spec.dims {
        let ctx = context(spec, d)?;
        for &l in &spec.sizes {
            out.push(run_cell(spec, &ctx, d, l)?);
        }
    }
    Ok(out)
}

fn require_kind(spec: &SweepSpec, kind: SweepKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::InvalidSpec(format!(
            "expected a {} sweep, got {}",
            kind.name(),
            spec.kind.name()
        )));
    }
    Ok(())
}

pub fn run_list_sweep(spec: &SweepSpec) -> Result<Vec<CellResult>> {
    require_kind(spec, SweepKind::Lists)?;
    run_sweep(spec)
}

pub fn run_tree_sweep(spec: &SweepSpec) -> Result<Vec<CellResult>> {
    require_kind(spec, SweepKind::Trees)?;
    run_sweep(spec)
}

pub fn run_parse_sweep(spec: &SweepSpec) -> Result<Vec<CellResult>> {
    require_kind(spec, SweepKind::Parse)?;
    run_sweep(spec)
}

/// Smallest `d` in `[lo, hi]` (to within `resolution`) whose success rate at
/// size `l` reaches `target`, assuming the rate grows with `d`. `None` if `hi`
/// itself falls short. Only `spec.kind`, `trials`, `seed` and the schema sizes
/// of `spec` are used.
pub fn boundary_search(
    spec: &SweepSpec,
    l: usize,
    lo: usize,
    hi: usize,
    resolution: usize,
    target: f64,
) -> Result<Option<usize>> {
    if lo < 2 || lo > hi || resolution == 0 {
        return Err(Error::InvalidSpec(
            "boundary search needs 2 <= lo <= hi and resolution >= 1".into(),
        ));
    }
    let probe = |d: usize| -> Result<bool> {
        let cell_spec = SweepSpec {
            dims: vec![d],
            sizes: vec![l],
            ..spec.clone()
        };
        cell_spec.validate()?;
        let ctx = context(&cell_spec, d)?;
        Ok(run_cell(&cell_spec, &ctx, d, l)?.success_rate >= target)
    };
    if !probe(hi)? {
        return Ok(None);
    }
    if probe(lo)? {
        return Ok(Some(lo));
    }
    // invariant: lo fails, hi passes
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > resolution {
        let mid = lo + (hi - lo) / 2;
        if probe(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Writes `kind,d,l,trials,successes,success_rate[,wall_time_ms]`. Timing is
/// off by default so identical specs give identical bytes.
pub fn write_cells_csv<W: Write>(
    kind: SweepKind,
    cells: &[CellResult],
    out: W,
    timing: bool,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["kind", "d", "l", "trials", "successes", "success_rate"];
    if timing {
        header.push("wall_time_ms");
    }
    w.write_record(&header)?;
    for c in cells {
        let mut row = vec![
            kind.name().to_string(),
            c.d.to_string(),
            c.l.to_string(),
            c.trials.to_string(),
            c.successes.to_string(),
            c.success_rate.to_string(),
        ];
        if timing {
            row.push(format!("{:.3}", c.wall_time_ms));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `kind,l,d_star`, with `NA` where no dimension in range succeeded.
pub fn write_boundary_csv<W: Write>(
    kind: SweepKind,
    rows: &[(usize, Option<usize>)],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "l", "d_star"])?;
    for (l, d) in rows {
        w.write_record([
            kind.name().to_string(),
            l.to_string(),
            d.map_or_else(|| "NA".to_string(), |d| d.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
