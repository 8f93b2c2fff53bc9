//! Pairwise inner products among random elements of `Γ_l · V`: token vectors
//! hit by products of at most `l` attribute matrices.

use std::collections::HashSet;
use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::embed::haar_orthogonal;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{derive_seed, generator, unit_vector};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationSpec {
    pub d: usize,
    pub depth: usize,
    pub tokens: usize,
    pub attrs: usize,
    pub samples: usize,
    pub seed: u64,
}

impl SeparationSpec {
    /// 100 tokens and 4 attributes, as in the tree experiments.
    pub fn new(d: usize, depth: usize, samples: usize, seed: u64) -> Self {
        Self {
            d,
            depth,
            tokens: 100,
            attrs: 4,
            samples,
            seed,
        }
    }

    /// Number of distinct `(word, token)` pairs available.
    pub fn population(&self) -> u128 {
        let words: u128 = (0..=self.depth as u32)
            .map(|k| (self.attrs as u128).saturating_pow(k))
            .fold(0u128, |a, b| a.saturating_add(b));
        words.saturating_mul(self.tokens as u128)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationReport {
    pub d: usize,
    pub depth: usize,
    pub samples: usize,
    pub max_abs_ip: f64,
    pub mean_abs_ip: f64,
    pub p99_abs_ip: f64,
    /// `4·sqrt(ln n / d)`.
    pub jl_bound: f64,
    /// `sqrt(32·ln n / d)`.
    pub doubled_bound: f64,
    /// Pairs with `|⟨x, y⟩| ≥ jl_bound`.
    pub violations: usize,
}

/// A reduced word (identity factors dropped), applied root-first, and a token.
type Element = (Vec<usize>, usize);

fn sample_elements<R: Rng + ?Sized>(spec: &SeparationSpec, rng: &mut R) -> Vec<Element> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(spec.samples);
    while out.len() < spec.samples {
        // each of the `depth` letters is one attribute or the identity
        let word: Vec<usize> = (0..spec.depth)
            .filter_map(|_| {
                let x = rng.gen_range(0..=spec.attrs);
                (x < spec.attrs).then_some(x)
            })
            .collect();
        let element = (word, rng.gen_range(0..spec.tokens));
        if seen.insert(element.clone()) {
            out.push(element);
        }
    }
    out
}

pub fn run_separation_probe(spec: &SeparationSpec) -> Result<SeparationReport> {
    if spec.samples < 2 || spec.d < 2 || spec.tokens == 0 || (spec.depth > 0 && spec.attrs == 0) {
        return Err(Error::InvalidSpec(
            "separation needs at least 2 samples, d >= 2, tokens, and attributes when depth > 0"
                .into(),
        ));
    }
    if spec.population() < spec.samples as u128 {
        return Err(Error::InvalidSpec(format!(
            "only {} distinct elements exist, {} requested",
            spec.population(),
            spec.samples
        )));
    }
    let d = spec.d;
    let mut rng = generator(derive_seed(spec.seed, &[d as u64, spec.depth as u64]));
    let tokens: Vec<Vec<f64>> = (0..spec.tokens).map(|_| unit_vector(d, &mut rng)).collect();
    let mats: Vec<Matrix> = if spec.depth == 0 {
        Vec::new()
    } else {
        (0..spec.attrs)
            .map(|_| haar_orthogonal(d, &mut rng))
            .collect()
    };
    let elements = sample_elements(spec, &mut rng);

    // Apply the words right to left, batching every row that needs the same
    // matrix at the same position into one product.
    let n = elements.len();
    let mut xs = Matrix::from_rows(
        &elements
            .iter()
            .map(|(_, t)| tokens[*t].as_slice())
            .collect::<Vec<_>>(),
    );
    let longest = elements.iter().map(|(w, _)| w.len()).max().unwrap_or(0);
    for back in 0..longest {
        for (a, m) in mats.iter().enumerate() {
            let rows: Vec<usize> = (0..n)
                .filter(|&i| {
                    let w = &elements[i].0;
                    w.len() > back && w[w.len() - 1 - back] == a
                })
                .collect();
            if rows.is_empty() {
                continue;
            }
            let batch = Matrix::from_rows(&rows.iter().map(|&i| xs.row(i)).collect::<Vec<_>>());
            let moved = m.mul_rows(&batch);
            for (k, &i) in rows.iter().enumerate() {
                xs.row_mut(i).copy_from_slice(moved.row(k));
            }
        }
    }

    let gram = xs.mul_rows(&xs);
    let mut ips: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            ips.push(gram.get(i, j).abs());
        }
    }
    let ln_n = (n as f64).ln();
    let jl_bound = 4.0 * (ln_n / d as f64).sqrt();
    let doubled_bound = (32.0 * ln_n / d as f64).sqrt();
    let violations = ips.iter().filter(|&&x| x >= jl_bound).count();
    let mean_abs_ip = ips.iter().sum::<f64>() / ips.len() as f64;
    let max_abs_ip = ips.iter().cloned().fold(0.0, f64::max);
    ips.sort_by(f64::total_cmp);
    let p99_abs_ip = ips[((ips.len() as f64 * 0.99).ceil() as usize).clamp(1, ips.len()) - 1];
    Ok(SeparationReport {
        d,
        depth: spec.depth,
        samples: n,
        max_abs_ip,
        mean_abs_ip,
        p99_abs_ip,
        jl_bound,
        doubled_bound,
        violations,
    })
}

/// Writes `d,depth,samples,max_abs_ip,jl_bound,violations`.
pub fn write_separation_csv<W: Write>(reports: &[SeparationReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "d",
        "depth",
        "samples",
        "max_abs_ip",
        "jl_bound",
        "violations",
    ])?;
    for r in reports {
        w.write_record([
            r.d.to_string(),
            r.depth.to_string(),
            r.samples.to_string(),
            r.max_abs_ip.to_string(),
            r.jl_bound.to_string(),
            r.violations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
