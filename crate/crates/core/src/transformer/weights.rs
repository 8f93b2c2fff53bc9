//! Affine maps stored as a sum of structured blocks.
//!
//! The transformer's weight matrices are mostly zero with a few dense blocks
//! copied from the embedding, so each map is kept as a list of blocks placed
//! at `(row, col)` offsets inside the full matrix plus a bias. `to_dense`
//! recovers the plain matrix.

use std::sync::Arc;

use crate::linalg::{dot, gemm_acc, is_zero, Matrix, View};

#[derive(Clone, Debug)]
pub enum BlockKind {
    /// `scale · M` (or `scale · Mᵀ` when `transpose` is set).
    Dense {
        m: Arc<Matrix>,
        transpose: bool,
        scale: f64,
    },
    /// `scale · I_n`.
    Identity { n: usize, scale: f64 },
    /// `left · rightᵀ`.
    RankOne { left: Vec<f64>, right: Vec<f64> },
}

impl BlockKind {
    /// `(output rows, input cols)` of the block.
    pub fn shape(&self) -> (usize, usize) {
        match self {
            BlockKind::Dense { m, transpose, .. } => {
                if *transpose {
                    (m.cols(), m.rows())
                } else {
                    (m.rows(), m.cols())
                }
            }
            BlockKind::Identity { n, .. } => (*n, *n),
            BlockKind::RankOne { left, right } => (left.len(), right.len()),
        }
    }

    fn dense(&self) -> Matrix {
        match self {
            BlockKind::Dense {
                m,
                transpose,
                scale,
            } => {
                let base = if *transpose {
                    m.transpose()
                } else {
                    (**m).clone()
                };
                Matrix::from_vec(
                    base.rows(),
                    base.cols(),
                    base.as_slice().iter().map(|x| x * scale).collect(),
                )
            }
            BlockKind::Identity { n, scale } => {
                let mut out = Matrix::zeros(*n, *n);
                for i in 0..*n {
                    out.set(i, i, *scale);
                }
                out
            }
            BlockKind::RankOne { left, right } => {
                let mut out = Matrix::zeros(left.len(), right.len());
                for (i, l) in left.iter().enumerate() {
                    for (j, r) in right.iter().enumerate() {
                        out.set(i, j, l * r);
                    }
                }
                out
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Block {
    pub row: usize,
    pub col: usize,
    pub kind: BlockKind,
}

/// `x ↦ W x + b` with `W` assembled from blocks; overlapping blocks add.
#[derive(Clone, Debug)]
pub struct BlockLinear {
    rows: usize,
    cols: usize,
    blocks: Vec<Block>,
    bias: Vec<f64>,
}

impl BlockLinear {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            blocks: Vec::new(),
            bias: vec![0.0; rows],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn push(&mut self, row: usize, col: usize, kind: BlockKind) {
        let (h, w) = kind.shape();
        assert!(
            row + h <= self.rows && col + w <= self.cols,
            "block out of range"
        );
        self.blocks.push(Block { row, col, kind });
    }

    pub fn set_bias(&mut self, offset: usize, values: &[f64]) {
        self.bias[offset..offset + values.len()].copy_from_slice(values);
    }

    pub fn fill_bias(&mut self, offset: usize, len: usize, value: f64) {
        self.bias[offset..offset + len].fill(value);
    }

    pub fn to_dense(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols);
        for b in &self.blocks {
            let d = b.kind.dense();
            for i in 0..d.rows() {
                for j in 0..d.cols() {
                    let cur = out.get(b.row + i, b.col + j);
                    out.set(b.row + i, b.col + j, cur + d.get(i, j));
                }
            }
        }
        out
    }

    /// Applies the map to every row of `xs` (`batch × cols`), returning
    /// `batch × rows`. Rows whose input to a block is exactly zero skip it.
    pub fn apply_batch(&self, xs: &Matrix) -> Matrix {
        assert_eq!(xs.cols(), self.cols, "input width mismatch");
        let batch = xs.rows();
        let mut out = Matrix::zeros(batch, self.rows);
        for r in 0..batch {
            out.row_mut(r).copy_from_slice(&self.bias);
        }
        for b in &self.blocks {
            let (h, w) = b.kind.shape();
            let live: Vec<usize> = (0..batch)
                .filter(|&r| !is_zero(&xs.row(r)[b.col..b.col + w]))
                .collect();
            if live.is_empty() {
                continue;
            }
            match &b.kind {
                BlockKind::Dense {
                    m,
                    transpose,
                    scale,
                } => {
                    let mut input = Vec::with_capacity(live.len() * w);
                    for &r in &live {
                        input.extend_from_slice(&xs.row(r)[b.col..b.col + w]);
                    }
                    let a = View::new(&input, live.len(), w, w as isize, 1);
                    // out_sub = input · Mᵀ, or input · M when transposed
                    let mv = if *transpose {
                        View::new(m.as_slice(), w, h, m.cols() as isize, 1)
                    } else {
                        View::new(m.as_slice(), w, h, 1, m.cols() as isize)
                    };
                    let mut tmp = vec![0.0; live.len() * h];
                    gemm_acc(*scale, a, mv, &mut tmp, h);
                    for (i, &r) in live.iter().enumerate() {
                        let dst = &mut out.row_mut(r)[b.row..b.row + h];
                        for (d, s) in dst.iter_mut().zip(&tmp[i * h..(i + 1) * h]) {
                            *d += s;
                        }
                    }
                }
                BlockKind::Identity { scale, .. } => {
                    for &r in &live {
                        let src = &xs.row(r)[b.col..b.col + w];
                        let dst = &mut out.row_mut(r)[b.row..b.row + h];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += scale * s;
                        }
                    }
                }
                BlockKind::RankOne { left, right } => {
                    for &r in &live {
                        let c = dot(right, &xs.row(r)[b.col..b.col + w]);
                        let dst = &mut out.row_mut(r)[b.row..b.row + h];
                        for (d, l) in dst.iter_mut().zip(left) {
                            *d += c * l;
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::generator;
    use rand::Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = generator(seed);
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
    }

    #[test]
    fn blocked_product_matches_dense() {
        let m = Arc::new(random(3, 4, 1));
        let mut f = BlockLinear::new(9, 10);
        f.push(
            0,
            0,
            BlockKind::Dense {
                m: m.clone(),
                transpose: false,
                scale: 2.0,
            },
        );
        f.push(
            3,
            6,
            BlockKind::Dense {
                m,
                transpose: true,
                scale: -1.0,
            },
        );
        f.push(1, 2, BlockKind::Identity { n: 5, scale: 0.5 });
        f.push(
            7,
            1,
            BlockKind::RankOne {
                left: vec![1.0, -3.0],
                right: vec![0.5, 0.25, 2.0],
            },
        );
        f.set_bias(2, &[1.0, 2.0, 3.0]);
        let mut xs = random(4, 10, 2);
        // a row that is zero on some blocks' inputs
        for j in 0..6 {
            xs.set(2, j, 0.0);
        }
        let got = f.apply_batch(&xs);
        let dense = f.to_dense();
        for r in 0..4 {
            let mut want = dense.mul_vec(xs.row(r));
            for (w, b) in want.iter_mut().zip(f.bias()) {
                *w += b;
            }
            assert!(crate::linalg::max_abs_diff(&want, got.row(r)) < 1e-12);
        }
    }
}
