use std::fs;
use std::io::{self, Write};
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use btembed::decode::{decode, DecodeConfig};
use btembed::embed::io::{load_embedding, load_vector, save_embedding, save_vector};
use btembed::embed::{bt_encode, encode_list, make_embedding, Embedding};
use btembed::harness::{
    boundary_search, run_separation_probe, run_sweep, write_boundary_csv, write_cells_csv,
    write_separation_csv, SeparationSpec, SweepKind, SweepSpec,
};
use btembed::parse::{compile_rules, distinguished_attributes, grammar_from_json, parse};
use btembed::transformer::{Transformer, XfConfig};
use btembed::{Error, Path, Schema, TokenId, Tree};
use clap::{Parser, Subcommand, ValueEnum};

const EXIT_OTHER: u8 = 1;
const EXIT_SCHEMA_MISMATCH: u8 = 3;
const EXIT_ABSENT: u8 = 4;
const EXIT_NO_PARSE: u8 = 5;
const EXIT_BUDGET: u8 = 6;

/// Reversible tree embeddings: encode, decode, parse and experiment.
#[derive(Parser)]
#[command(name = "btembed", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a schema with tokens t0..t{N-1} plus `next, arg1, ..` attributes.
    GenSchema {
        /// Number of plain tokens.
        #[arg(long)]
        tokens: usize,
        /// Number of attributes (the first is `next`).
        #[arg(long)]
        attrs: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Draw a random embedding for a schema.
    Embed {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Encode a tree file, or a token list, into a vector file.
    Encode {
        #[arg(long)]
        embedding: PathBuf,
        /// Tree JSON file.
        #[arg(long, conflicts_with = "list", required_unless_present = "list")]
        tree: Option<PathBuf>,
        /// Whitespace-separated tokens, chained with `next`.
        #[arg(long)]
        list: Option<String>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Recover a tree from a vector file.
    Decode {
        #[arg(long)]
        embedding: PathBuf,
        #[arg(long = "vec")]
        vector: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, default_value_t = 64)]
        max_depth: usize,
        #[arg(long, default_value_t = 4096)]
        max_nodes: usize,
        /// Tree JSON output; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Parse a token sequence with encoded production rules.
    Parse {
        #[arg(long)]
        embedding: PathBuf,
        /// JSON list of {"pattern": [...], "replacement": "..."}.
        #[arg(long)]
        rules: PathBuf,
        /// Whitespace-separated input tokens.
        #[arg(long)]
        input: String,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(short, long)]
        output: PathBuf,
        /// Also decode the result and print the tree JSON.
        #[arg(long)]
        decode: bool,
        /// Write the decoded tree here instead of stdout.
        #[arg(long, requires = "decode")]
        tree_output: Option<PathBuf>,
    },
    /// Read the labels along a path with the closed-form transformer.
    TransformerQuery {
        #[arg(long)]
        embedding: PathBuf,
        #[arg(long = "vec")]
        vector: PathBuf,
        /// Comma-separated attribute names; empty for the root.
        #[arg(long, default_value = "")]
        path: String,
        #[arg(long, default_value_t = 64)]
        k: usize,
        #[arg(long, default_value_t = 100.0)]
        sharpness: f64,
        #[arg(long = "gate-c", default_value_t = 1e4)]
        gate_c: f64,
        /// Seed for the position codes.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the weight tensors and a manifest into this directory.
        #[arg(long)]
        dump_weights: Option<PathBuf>,
    },
    /// Run a decoding or parsing sweep and write CSV.
    Experiment {
        kind: ExperimentKind,
        /// Comma-separated dimensions.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        /// Comma-separated sizes (list length, tree size or string length).
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Plain tokens in the generated schema.
        #[arg(long)]
        tokens: Option<usize>,
        /// Attributes in the generated schema.
        #[arg(long)]
        attrs: Option<usize>,
        /// Add a wall_time_ms column (makes the output run-dependent).
        #[arg(long)]
        timing: bool,
        /// Instead of the grid, binary-search the smallest d in
        /// [min(dims), max(dims)] reaching a 0.99 success rate for each size.
        #[arg(long)]
        boundary: bool,
        /// Resolution of the boundary search.
        #[arg(long, default_value_t = 50)]
        resolution: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Measure pairwise inner products among random elements of Γ_l·V.
    Separation {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        tokens: usize,
        #[arg(long, default_value_t = 4)]
        attrs: usize,
        /// Independent runs with seeds seed, seed+1, ...
        #[arg(long, default_value_t = 1)]
        runs: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Lists,
    Trees,
    Parse,
}

impl From<ExperimentKind> for SweepKind {
    fn from(k: ExperimentKind) -> Self {
        match k {
            ExperimentKind::Lists => SweepKind::Lists,
            ExperimentKind::Trees => SweepKind::Trees,
            ExperimentKind::Parse => SweepKind::Parse,
        }
    }
}

/// Non-error outcomes that still need a distinct exit status.
enum Status {
    Ok,
    Absent,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Absent) => {
            eprintln!("no token clears the threshold at the root");
            ExitCode::from(EXIT_ABSENT)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::SchemaMismatch(_) => EXIT_SCHEMA_MISMATCH,
                Error::NoParse { .. } => EXIT_NO_PARSE,
                Error::BudgetExceeded(_) | Error::StepBudgetExceeded(_) => EXIT_BUDGET,
                _ => EXIT_OTHER,
            })
        }
    }
}

fn read(path: &FsPath) -> btembed::Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn tokens_of(text: &str, schema: &Schema) -> btembed::Result<Vec<TokenId>> {
    text.split_whitespace()
        .map(|t| schema.require_token(t))
        .collect()
}

fn write_text(path: Option<&FsPath>, text: &str) -> btembed::Result<()> {
    match path {
        Some(p) => fs::write(p, format!("{text}\n"))?,
        None => writeln!(io::stdout(), "{text}")?,
    }
    Ok(())
}

fn load_pair(
    embedding: &FsPath,
    vector: &FsPath,
) -> btembed::Result<(Embedding, btembed::BTVector)> {
    let e = load_embedding(embedding)?;
    let v = load_vector(vector)?;
    e.check(&v)?;
    Ok((e, v))
}

fn run(command: Command) -> btembed::Result<Status> {
    match command {
        Command::GenSchema {
            tokens,
            attrs,
            output,
        } => {
            let s = Schema::generated(tokens, attrs)?;
            fs::write(
                output,
                serde_json::to_string_pretty(&s.description())? + "\n",
            )?;
        }
        Command::Embed {
            schema,
            dim,
            seed,
            output,
        } => {
            let s = Schema::from_json(&read(&schema)?)?;
            save_embedding(&make_embedding(&s, dim, seed)?, output)?;
        }
        Command::Encode {
            embedding,
            tree,
            list,
            output,
        } => {
            let e = load_embedding(embedding)?;
            let v = match (tree, list) {
                (Some(t), _) => bt_encode(&Tree::from_json(&read(&t)?, e.schema())?, &e)?,
                (None, Some(l)) => {
                    let next = e.schema().attribute("next").ok_or_else(|| {
                        Error::SchemaMismatch("schema has no `next` attribute".into())
                    })?;
                    encode_list(&tokens_of(&l, e.schema())?, &e, next)?
                }
                (None, None) => unreachable!("clap requires one of --tree/--list"),
            };
            save_vector(&v, output)?;
        }
        Command::Decode {
            embedding,
            vector,
            threshold,
            max_depth,
            max_nodes,
            output,
        } => {
            let (e, v) = load_pair(&embedding, &vector)?;
            let cfg = DecodeConfig {
                threshold,
                max_depth,
                max_nodes,
            };
            match decode(&v, &e, &cfg)? {
                Some(t) => write_text(output.as_deref(), &t.to_json_pretty(e.schema()))?,
                None => return Ok(Status::Absent),
            }
        }
        Command::Parse {
            embedding,
            rules,
            input,
            max_steps,
            output,
            decode: also_decode,
            tree_output,
        } => {
            let e = load_embedding(embedding)?;
            let grammar = grammar_from_json(&read(&rules)?, e.schema())?;
            let (next, args) = distinguished_attributes(e.schema())?;
            let ruleset = compile_rules(&grammar, &e, next, &args)?;
            let tokens = tokens_of(&input, e.schema())?;
            let v = parse(&tokens, &ruleset, &e, max_steps)?;
            save_vector(&v, output)?;
            if also_decode {
                match decode(&v, &e, &DecodeConfig::default())? {
                    Some(t) => write_text(tree_output.as_deref(), &t.to_json_pretty(e.schema()))?,
                    None => return Ok(Status::Absent),
                }
            }
        }
        Command::TransformerQuery {
            embedding,
            vector,
            path,
            k,
            sharpness,
            gate_c,
            seed,
            dump_weights,
        } => {
            let (e, v) = load_pair(&embedding, &vector)?;
            let path = Path::parse(&path, e.schema())?;
            let cfg = XfConfig {
                k,
                attn_sharpness: sharpness,
                gate_constant: gate_c,
                seed,
                ..XfConfig::default()
            };
            let model = Transformer::build(&e, path.len() + 1, cfg)?;
            if let Some(dir) = dump_weights {
                model.dump_weights(dir)?;
            }
            let mut out = io::stdout().lock();
            for label in model.run(&e, &v, &path)? {
                match label {
                    Some(t) => writeln!(out, "{}", e.schema().token_name(t))?,
                    None => writeln!(out, "-")?,
                }
            }
        }
        Command::Experiment {
            kind,
            dims,
            sizes,
            trials,
            seed,
            tokens,
            attrs,
            timing,
            boundary,
            resolution,
            output,
        } => {
            let mut spec = SweepSpec::new(kind.into(), dims, sizes, trials, seed);
            spec.tokens = tokens.unwrap_or(spec.tokens);
            spec.attrs = attrs.unwrap_or(spec.attrs);
            let file = io::BufWriter::new(fs::File::create(&output)?);
            if boundary {
                spec.validate()?;
                let lo = *spec.dims.iter().min().expect("validated");
                let hi = *spec.dims.iter().max().expect("validated");
                let rows = spec
                    .sizes
                    .iter()
                    .map(|&l| Ok((l, boundary_search(&spec, l, lo, hi, resolution, 0.99)?)))
                    .collect::<btembed::Result<Vec<_>>>()?;
                write_boundary_csv(spec.kind, &rows, file)?;
            } else {
                write_cells_csv(spec.kind, &run_sweep(&spec)?, file, timing)?;
            }
        }
        Command::Separation {
            dim,
            depth,
            samples,
            seed,
            tokens,
            attrs,
            runs,
            output,
        } => {
            let reports = (0..runs.max(1))
                .map(|i| {
                    run_separation_probe(&SeparationSpec {
                        d: dim,
                        depth,
                        tokens,
                        attrs,
                        samples,
                        seed: seed.wrapping_add(i),
                    })
                })
                .collect::<btembed::Result<Vec<_>>>()?;
            write_separation_csv(&reports, io::BufWriter::new(fs::File::create(output)?))?;
        }
    }
    Ok(Status::Ok)
}
