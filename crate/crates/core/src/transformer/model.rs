use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use super::position::{build_position_codes, PositionCodes};
use super::weights::{BlockKind, BlockLinear};
use crate::decode::decode_token;
use crate::embed::{encode_list, BTVector, Embedding};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::generator;
use crate::schema::{AttrId, TokenId};
use crate::tree::Path;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XfConfig {
    /// Position code dimension.
    pub k: usize,
    /// Multiplier on attention logits.
    pub attn_sharpness: f64,
    /// Gate constant `C` in the feed-forward layers.
    pub gate_constant: f64,
    /// Upper bound on `|⟨p_i, p_j⟩|` for distinct positions.
    pub position_bound: f64,
    pub position_retries: usize,
    /// Seed for the position codes.
    pub seed: u64,
}

impl Default for XfConfig {
    fn default() -> Self {
        Self {
            k: 64,
            attn_sharpness: 100.0,
            gate_constant: 1e4,
            position_bound: 0.1,
            position_retries: 100,
            seed: 0,
        }
    }
}

impl XfConfig {
    pub fn validate(&self) -> Result<()> {
        let positive =
            self.attn_sharpness > 0.0 && self.gate_constant > 0.0 && self.position_bound > 0.0;
        if self.k < 2 || !positive {
            return Err(Error::InvalidInput(
                "transformer constants must be positive and k at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// One of the five components of a slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotPart {
    P,
    V,
    W,
    R,
    T,
}

/// `n` slots of width `k + 4d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeqState {
    k: usize,
    d: usize,
    x: Matrix,
}

impl SeqState {
    pub fn zeros(n: usize, k: usize, d: usize) -> Self {
        Self {
            k,
            d,
            x: Matrix::zeros(n, k + 4 * d),
        }
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn width(&self) -> usize {
        self.x.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.x
    }

    fn range(&self, part: SlotPart) -> std::ops::Range<usize> {
        let (k, d) = (self.k, self.d);
        match part {
            SlotPart::P => 0..k,
            SlotPart::V => k..k + d,
            SlotPart::W => k + d..k + 2 * d,
            SlotPart::R => k + 2 * d..k + 3 * d,
            SlotPart::T => k + 3 * d..k + 4 * d,
        }
    }

    pub fn part(&self, slot: usize, part: SlotPart) -> &[f64] {
        let r = self.range(part);
        &self.x.row(slot)[r]
    }

    pub fn part_mut(&mut self, slot: usize, part: SlotPart) -> &mut [f64] {
        let r = self.range(part);
        &mut self.x.row_mut(slot)[r]
    }
}

/// Per-block observations used to check the construction's invariants.
#[derive(Clone, Debug, PartialEq)]
pub struct XfStepTrace {
    /// Slot that became active in this block (0-based).
    pub slot: usize,
    /// Attention weight that slot put on its predecessor.
    pub attention_on_previous: f64,
    /// Token decoded from that slot's `r` component.
    pub path_head: Option<TokenId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct XfTrace {
    pub labels: Vec<Option<TokenId>>,
    /// Token decoded from slot 1's `r` after initialization.
    pub initial_path_head: Option<TokenId>,
    pub steps: Vec<XfStepTrace>,
    pub final_state: SeqState,
}

/// The decoder with all weights materialized for up to `capacity` slots.
#[derive(Clone, Debug)]
pub struct Transformer {
    cfg: XfConfig,
    d: usize,
    fingerprint: u64,
    next: AttrId,
    codes: PositionCodes,
    m_next: Arc<Matrix>,
    attr_tokens: Vec<TokenId>,
    wq: BlockLinear,
    wk: BlockLinear,
    wv: BlockLinear,
    f1_in: BlockLinear,
    f1_out: BlockLinear,
    f2_in: BlockLinear,
    f2_out: BlockLinear,
}

impl Transformer {
    pub fn build(e: &Embedding, capacity: usize, cfg: XfConfig) -> Result<Self> {
        cfg.validate()?;
        let schema = e.schema();
        let next = schema
            .attribute("next")
            .ok_or_else(|| Error::SchemaMismatch("schema has no `next` attribute".into()))?;
        let codes = build_position_codes(
            capacity.max(1),
            cfg.k,
            cfg.position_bound,
            cfg.position_retries,
            &mut generator(cfg.seed),
        )?;
        let (k, d) = (cfg.k, e.dim());
        let width = k + 4 * d;
        let (pv, vv, wv_, rv, tv) = (0, k, k + d, k + 2 * d, k + 3 * d);
        let c = cfg.gate_constant;
        let n_attrs = schema.attribute_count();
        let n_tokens = schema.token_count();
        let attr_tokens: Vec<TokenId> = schema
            .attribute_ids()
            .map(|a| schema.attribute_token(a))
            .collect();

        // attention
        let mut wq = BlockLinear::new(k, width);
        wq.push(
            0,
            pv,
            BlockKind::Dense {
                m: Arc::new(codes.z.clone()),
                transpose: true,
                scale: 1.0,
            },
        );
        let mut wk = BlockLinear::new(k, width);
        wk.push(0, pv, BlockKind::Identity { n: k, scale: 1.0 });
        let mut wv = BlockLinear::new(width, width);
        wv.push(vv, wv_, BlockKind::Identity { n: d, scale: 1.0 });
        wv.push(
            rv,
            rv,
            BlockKind::Dense {
                m: e.attribute_matrix(next).clone(),
                transpose: true,
                scale: 1.0,
            },
        );

        // F1 hidden: [relu(v) | relu(-v) | relu(w) | relu(-w) | g_1..g_A | q_1..q_A]
        let (hvp, hvn, hwp, hwn, hg) = (0, d, 2 * d, 3 * d, 4 * d);
        let hq = hg + n_attrs * d;
        let h1 = hq + n_attrs;
        let mut f1_in = BlockLinear::new(h1, width);
        f1_in.push(hvp, vv, BlockKind::Identity { n: d, scale: 1.0 });
        f1_in.push(hvn, vv, BlockKind::Identity { n: d, scale: -1.0 });
        f1_in.push(hwp, wv_, BlockKind::Identity { n: d, scale: 1.0 });
        f1_in.push(hwn, wv_, BlockKind::Identity { n: d, scale: -1.0 });
        for (j, &tok) in attr_tokens.iter().enumerate() {
            let e_j = e.token_vector(tok).to_vec();
            let g = hg + j * d;
            // g_j = relu(C·⟨e_j, r⟩ − C/2 + (M_jᵀ − I) v), the gate broadcast over d units
            f1_in.push(
                g,
                rv,
                BlockKind::RankOne {
                    left: vec![c; d],
                    right: e_j.clone(),
                },
            );
            f1_in.push(
                g,
                vv,
                BlockKind::Dense {
                    m: e.attribute_matrix(AttrId(j)).clone(),
                    transpose: true,
                    scale: 1.0,
                },
            );
            f1_in.push(g, vv, BlockKind::Identity { n: d, scale: -1.0 });
            f1_in.fill_bias(g, d, -c / 2.0);
            f1_in.push(
                hq + j,
                rv,
                BlockKind::RankOne {
                    left: vec![c],
                    right: e_j,
                },
            );
            f1_in.fill_bias(hq + j, 1, -c / 2.0);
        }
        let mut f1_out = BlockLinear::new(width, h1);
        f1_out.push(wv_, hvp, BlockKind::Identity { n: d, scale: 1.0 });
        f1_out.push(wv_, hvn, BlockKind::Identity { n: d, scale: -1.0 });
        f1_out.push(wv_, hwp, BlockKind::Identity { n: d, scale: -1.0 });
        f1_out.push(wv_, hwn, BlockKind::Identity { n: d, scale: 1.0 });
        for j in 0..n_attrs {
            f1_out.push(wv_, hg + j * d, BlockKind::Identity { n: d, scale: 1.0 });
            f1_out.push(
                wv_,
                hq + j,
                BlockKind::RankOne {
                    left: vec![-1.0; d],
                    right: vec![1.0],
                },
            );
        }

        // F2 hidden: [relu(v) | relu(-v) | relu(z + 1) | relu(z)] with z = C(E w − 1/2)
        let (gvp, gvn, gzp, gzz) = (0, d, 2 * d, 2 * d + n_tokens);
        let h2 = gzz + n_tokens;
        let tokens = e.token_matrix().clone();
        let mut f2_in = BlockLinear::new(h2, width);
        f2_in.push(gvp, vv, BlockKind::Identity { n: d, scale: 1.0 });
        f2_in.push(gvn, vv, BlockKind::Identity { n: d, scale: -1.0 });
        f2_in.push(
            gzp,
            wv_,
            BlockKind::Dense {
                m: tokens.clone(),
                transpose: false,
                scale: c,
            },
        );
        f2_in.fill_bias(gzp, n_tokens, 1.0 - c / 2.0);
        f2_in.push(
            gzz,
            wv_,
            BlockKind::Dense {
                m: tokens.clone(),
                transpose: false,
                scale: c,
            },
        );
        f2_in.fill_bias(gzz, n_tokens, -c / 2.0);
        let mut f2_out = BlockLinear::new(width, h2);
        f2_out.push(vv, gvp, BlockKind::Identity { n: d, scale: -1.0 });
        f2_out.push(vv, gvn, BlockKind::Identity { n: d, scale: 1.0 });
        f2_out.push(
            tv,
            gzp,
            BlockKind::Dense {
                m: tokens.clone(),
                transpose: true,
                scale: 1.0,
            },
        );
        f2_out.push(
            tv,
            gzz,
            BlockKind::Dense {
                m: tokens.clone(),
                transpose: true,
                scale: -1.0,
            },
        );

        Ok(Self {
            cfg,
            d,
            fingerprint: e.fingerprint(),
            next,
            codes,
            m_next: e.attribute_matrix(next).clone(),
            attr_tokens,
            wq,
            wk,
            wv,
            f1_in,
            f1_out,
            f2_in,
            f2_out,
        })
    }

    pub fn config(&self) -> &XfConfig {
        &self.cfg
    }

    pub fn capacity(&self) -> usize {
        self.codes.len()
    }

    pub fn codes(&self) -> &PositionCodes {
        &self.codes
    }

    /// Initial state for `n` slots: `(p_1, v, 0, M_next·r, 0)` then `(p_i, 0, 0, 0, 0)`.
    pub fn init_state(&self, v: &BTVector, r: Option<&BTVector>, n: usize) -> Result<SeqState> {
        if v.fingerprint() != self.fingerprint || v.dim() != self.d {
            return Err(Error::SchemaMismatch(
                "input vector does not belong to this model's embedding".into(),
            ));
        }
        if n == 0 || n > self.capacity() {
            return Err(Error::PathTooLong {
                len: n.saturating_sub(1),
                capacity: self.capacity().saturating_sub(1),
            });
        }
        let mut s = SeqState::zeros(n, self.cfg.k, self.d);
        for i in 0..n {
            s.part_mut(i, SlotPart::P)
                .copy_from_slice(self.codes.p.row(i));
        }
        s.part_mut(0, SlotPart::V).copy_from_slice(v.as_slice());
        if let Some(r) = r {
            if r.fingerprint() != self.fingerprint {
                return Err(Error::SchemaMismatch(
                    "path vector does not belong to this model's embedding".into(),
                ));
            }
            let shifted = self.m_next.mul_vec(r.as_slice());
            s.part_mut(0, SlotPart::R).copy_from_slice(&shifted);
        }
        Ok(s)
    }

    /// Causal attention weights (`n × n`, row `i` over `j < i`; row 0 is zero).
    pub fn attention_weights(&self, s: &SeqState) -> Matrix {
        let q = self.wq.apply_batch(s.matrix());
        let kk = self.wk.apply_batch(s.matrix());
        let n = s.len();
        let mut weights = Matrix::zeros(n, n);
        for i in 1..n {
            let logits: Vec<f64> = (0..i)
                .map(|j| self.cfg.attn_sharpness * linalg::dot(q.row(i), kk.row(j)))
                .collect();
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            for (j, x) in exps.iter().enumerate() {
                weights.set(i, j, x / total);
            }
        }
        weights
    }

    /// `x + A(x)`.
    pub fn attention_step(&self, s: &SeqState) -> SeqState {
        let weights = self.attention_weights(s);
        let values = self.wv.apply_batch(s.matrix());
        let mut out = s.clone();
        for i in 1..s.len() {
            let row = out.x.row_mut(i);
            for j in 0..i {
                linalg::axpy(weights.get(i, j), values.row(j), row);
            }
        }
        out
    }

    fn ffn(s: &SeqState, m_in: &BlockLinear, m_out: &BlockLinear) -> SeqState {
        let mut hidden = m_in.apply_batch(s.matrix());
        for h in hidden.as_mut_slice() {
            *h = h.max(0.0);
        }
        let delta = m_out.apply_batch(&hidden);
        let mut out = s.clone();
        for (o, dlt) in out.x.as_mut_slice().iter_mut().zip(delta.as_slice()) {
            *o += dlt;
        }
        out
    }

    /// `F1`: writes the input transformed by the path head's inverse matrix into `w`.
    pub fn ffn1(&self, s: &SeqState) -> SeqState {
        Self::ffn(s, &self.f1_in, &self.f1_out)
    }

    /// `F2`: adds the thresholded argmax token of `w` to `t` and clears `v`.
    pub fn ffn2(&self, s: &SeqState) -> SeqState {
        Self::ffn(s, &self.f2_in, &self.f2_out)
    }

    pub fn block(&self, s: &SeqState) -> SeqState {
        self.ffn2(&self.ffn1(&self.attention_step(s)))
    }

    fn path_vector(&self, e: &Embedding, path: &Path) -> Result<Option<BTVector>> {
        if path.is_empty() {
            return Ok(None);
        }
        let tokens: Vec<TokenId> = path
            .attrs()
            .iter()
            .map(|a| e.schema().attribute_token(*a))
            .collect();
        encode_list(&tokens, e, self.next).map(Some)
    }

    fn slot_token(
        &self,
        e: &Embedding,
        s: &SeqState,
        slot: usize,
        part: SlotPart,
    ) -> Option<TokenId> {
        let x = BTVector::new(s.part(slot, part).to_vec(), self.fingerprint);
        decode_token(&x, e, 0.5).expect("state vectors carry the model's fingerprint")
    }

    /// Labels along `path`: entry `i` is the label at the length-`i` prefix.
    pub fn run(&self, e: &Embedding, v: &BTVector, path: &Path) -> Result<Vec<Option<TokenId>>> {
        self.run_traced(e, v, path).map(|t| t.labels)
    }

    pub fn run_traced(&self, e: &Embedding, v: &BTVector, path: &Path) -> Result<XfTrace> {
        if e.fingerprint() != self.fingerprint {
            return Err(Error::SchemaMismatch(
                "embedding differs from the one the model was built from".into(),
            ));
        }
        let n = path.len() + 1;
        if n > self.capacity() {
            return Err(Error::PathTooLong {
                len: path.len(),
                capacity: self.capacity() - 1,
            });
        }
        let r = self.path_vector(e, path)?;
        let mut s = self.init_state(v, r.as_ref(), n)?;
        let initial_path_head = self.slot_token(e, &s, 0, SlotPart::R);
        s = self.ffn2(&self.ffn1(&s));
        let mut steps = Vec::with_capacity(n - 1);
        for slot in 1..n {
            let weights = self.attention_weights(&s);
            let attended = self.attention_step(&s);
            steps.push(XfStepTrace {
                slot,
                attention_on_previous: weights.get(slot, slot - 1),
                path_head: self.slot_token(e, &attended, slot, SlotPart::R),
            });
            s = self.ffn2(&self.ffn1(&attended));
        }
        let labels = (0..n)
            .map(|i| self.slot_token(e, &s, i, SlotPart::T))
            .collect();
        Ok(XfTrace {
            labels,
            initial_path_head,
            steps,
            final_state: s,
        })
    }

    /// Attribute tokens in attribute order, as used by the `F1` gates.
    pub fn attribute_tokens(&self) -> &[TokenId] {
        &self.attr_tokens
    }

    /// Named affine maps making up the model.
    pub fn layers(&self) -> Vec<(&'static str, &BlockLinear)> {
        vec![
            ("attention.wq", &self.wq),
            ("attention.wk", &self.wk),
            ("attention.wv", &self.wv),
            ("ffn1.in", &self.f1_in),
            ("ffn1.out", &self.f1_out),
            ("ffn2.in", &self.f2_in),
            ("ffn2.out", &self.f2_out),
        ]
    }

    /// Writes every block and bias as a little-endian `f64` tensor into
    /// `dir/weights.bin`, described by `dir/manifest.json`.
    pub fn dump_weights(&self, dir: impl AsRef<std::path::Path>) -> Result<()> {
        #[derive(Serialize)]
        struct Tensor {
            name: String,
            kind: &'static str,
            row: usize,
            col: usize,
            shape: Vec<usize>,
            offset: usize,
            len: usize,
        }
        #[derive(Serialize)]
        struct Layer {
            rows: usize,
            cols: usize,
            tensors: Vec<Tensor>,
        }
        #[derive(Serialize)]
        struct Manifest {
            dtype: &'static str,
            slot_width: usize,
            k: usize,
            d: usize,
            attn_sharpness: f64,
            gate_constant: f64,
            position_codes: Tensor,
            layers: BTreeMap<&'static str, Layer>,
        }
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut data: Vec<f64> = Vec::new();
        let mut put = |values: &[f64]| {
            let offset = data.len();
            data.extend_from_slice(values);
            (offset, values.len())
        };
        let (offset, len) = put(self.codes.p.as_slice());
        let position_codes = Tensor {
            name: "positions".into(),
            kind: "dense",
            row: 0,
            col: 0,
            shape: vec![self.codes.p.rows(), self.codes.p.cols()],
            offset,
            len,
        };
        let mut layers = BTreeMap::new();
        for (name, layer) in self.layers() {
            let mut tensors = Vec::new();
            for (i, b) in layer.blocks().iter().enumerate() {
                let (h, w) = b.kind.shape();
                let (kind, values): (&'static str, Vec<f64>) = match &b.kind {
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
                        ("dense", base.as_slice().iter().map(|x| x * scale).collect())
                    }
                    BlockKind::Identity { scale, .. } => ("scaled_identity", vec![*scale]),
                    BlockKind::RankOne { left, right } => (
                        "rank_one",
                        left.iter().chain(right.iter()).copied().collect(),
                    ),
                };
                let (offset, len) = put(&values);
                tensors.push(Tensor {
                    name: format!("{name}.block{i}"),
                    kind,
                    row: b.row,
                    col: b.col,
                    shape: vec![h, w],
                    offset,
                    len,
                });
            }
            let (offset, len) = put(layer.bias());
            tensors.push(Tensor {
                name: format!("{name}.bias"),
                kind: "bias",
                row: 0,
                col: 0,
                shape: vec![layer.rows()],
                offset,
                len,
            });
            layers.insert(
                name,
                Layer {
                    rows: layer.rows(),
                    cols: layer.cols(),
                    tensors,
                },
            );
        }
        let manifest = Manifest {
            dtype: "f64le",
            slot_width: self.cfg.k + 4 * self.d,
            k: self.cfg.k,
            d: self.d,
            attn_sharpness: self.cfg.attn_sharpness,
            gate_constant: self.cfg.gate_constant,
            position_codes,
            layers,
        };
        let mut w = std::io::BufWriter::new(fs::File::create(dir.join("weights.bin"))?);
        for x in &data {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
        fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(())
    }
}

/// Builds a model sized for `path` and runs it once.
pub fn run_decoder(
    v: &BTVector,
    path: &Path,
    e: &Embedding,
    cfg: &XfConfig,
) -> Result<Vec<Option<TokenId>>> {
    e.check(v)?;
    Transformer::build(e, path.len() + 1, *cfg)?.run(e, v, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{bt_encode, make_embedding};
    use crate::harness::sampling::random_tree;
    use crate::linalg::max_abs_diff;
    use crate::rng::unit_vector;
    use crate::schema::Schema;
    use crate::testutil;
    use rand::Rng;

    fn small() -> (Embedding, Transformer) {
        let e = make_embedding(&Schema::generated(20, 4).unwrap(), 300, 5).unwrap();
        let m = Transformer::build(&e, 4, XfConfig::default()).unwrap();
        (e, m)
    }

    fn state_with(m: &Transformer, e: &Embedding, n: usize) -> SeqState {
        m.init_state(&e.zero_vector(), None, n).unwrap()
    }

    #[test]
    fn attention_copies_the_predecessor() {
        let (e, m) = small();
        let mut rng = crate::rng::generator(1);
        let mut s = state_with(&m, &e, 3);
        let ws: Vec<Vec<f64>> = (0..3).map(|_| unit_vector(e.dim(), &mut rng)).collect();
        for (i, w) in ws.iter().enumerate() {
            s.part_mut(i, SlotPart::W).copy_from_slice(w);
        }
        let out = m.attention_step(&s);
        assert!(max_abs_diff(out.part(2, SlotPart::V), &ws[1]) < 1e-3);
        assert!(max_abs_diff(out.part(1, SlotPart::V), &ws[0]) < 1e-12);
        assert!(out.part(0, SlotPart::V).iter().all(|&x| x == 0.0));

        // exact softmax oracle for slot 3
        let q = m.codes().z.mul_vec_transposed(m.codes().p.row(2));
        let logits: Vec<f64> = (0..2)
            .map(|j| 100.0 * linalg::dot(&q, m.codes().p.row(j)))
            .collect();
        let mx = logits[0].max(logits[1]);
        let ex: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
        let want: Vec<f64> = (0..e.dim())
            .map(|c| (ex[0] * ws[0][c] + ex[1] * ws[1][c]) / (ex[0] + ex[1]))
            .collect();
        assert!(max_abs_diff(out.part(2, SlotPart::V), &want) < 1e-12);
    }

    #[test]
    fn zero_values_leave_state_unchanged() {
        let (e, m) = small();
        let s = state_with(&m, &e, 4);
        assert_eq!(m.attention_step(&s), s);
    }

    #[test]
    fn ffn1_transforms_by_the_path_head() {
        let (e, m) = small();
        let mut rng = crate::rng::generator(2);
        let v = unit_vector(e.dim(), &mut rng);

        let mut s = state_with(&m, &e, 1);
        s.part_mut(0, SlotPart::V).copy_from_slice(&v);
        s.part_mut(0, SlotPart::W)
            .copy_from_slice(&unit_vector(e.dim(), &mut rng));
        assert!(max_abs_diff(m.ffn1(&s).part(0, SlotPart::W), &v) < 1e-9);

        for a in e.schema().attribute_ids() {
            let mut s = s.clone();
            let head = e.token_vector(e.schema().attribute_token(a)).to_vec();
            s.part_mut(0, SlotPart::R).copy_from_slice(&head);
            let want = e.apply_inverse(a, &v);
            assert!(max_abs_diff(m.ffn1(&s).part(0, SlotPart::W), &want) < 1e-6);

            s.part_mut(0, SlotPart::V).fill(0.0);
            assert!(m
                .ffn1(&s)
                .part(0, SlotPart::W)
                .iter()
                .all(|x| x.abs() < 1e-9));
        }
    }

    #[test]
    fn ffn2_emits_the_thresholded_token() {
        let (e, m) = small();
        let t5 = e.token_vector(TokenId(5)).to_vec();
        let mut s = state_with(&m, &e, 1);
        s.part_mut(0, SlotPart::V).copy_from_slice(&t5);
        s.part_mut(0, SlotPart::W).copy_from_slice(&t5);
        let out = m.ffn2(&s);
        assert!(max_abs_diff(out.part(0, SlotPart::T), &t5) < 1e-6);
        assert!(out.part(0, SlotPart::V).iter().all(|&x| x == 0.0));

        s.part_mut(0, SlotPart::W)
            .copy_from_slice(&linalg::scale(0.4, &t5));
        assert!(m
            .ffn2(&s)
            .part(0, SlotPart::T)
            .iter()
            .all(|x| x.abs() < 1e-9));
        s.part_mut(0, SlotPart::W).fill(0.0);
        assert!(m
            .ffn2(&s)
            .part(0, SlotPart::T)
            .iter()
            .all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn empty_path_reads_the_root() {
        let (e, m) = small();
        for t in [0, 7, 19] {
            let v = e.token_bt(TokenId(t)).unwrap();
            let want = decode_token(&v, &e, 0.5).unwrap();
            assert_eq!(m.run(&e, &v, &Path::root()).unwrap(), vec![want]);
        }
        assert_eq!(
            m.run(&e, &e.zero_vector(), &Path::root()).unwrap(),
            vec![None]
        );
    }

    #[test]
    fn long_paths_and_foreign_vectors_are_rejected() {
        let (e, m) = small();
        let v = e.token_bt(TokenId(1)).unwrap();
        let long = Path::new(vec![AttrId(1); 4]);
        assert!(matches!(
            m.run(&e, &v, &long),
            Err(Error::PathTooLong {
                len: 4,
                capacity: 3
            })
        ));
        let other = make_embedding(e.schema(), 300, 6).unwrap();
        assert!(matches!(
            m.run(&e, &other.zero_vector(), &Path::root()),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn reads_labels_along_random_paths_with_decodable_internal_state() {
        let e = testutil::tree_embedding();
        let m = Transformer::build(e, 6, XfConfig::default()).unwrap();
        let mut rng = crate::rng::generator(77);
        for _ in 0..12 {
            let t = random_tree(10, 100, 4, &mut rng);
            let candidates: Vec<Path> = t
                .nodes()
                .into_iter()
                .map(|(p, _)| p)
                .filter(|p| p.len() <= 5)
                .collect();
            let path = candidates[rng.gen_range(0..candidates.len())].clone();
            let v = bt_encode(&t, e).unwrap();
            let trace = m.run_traced(e, &v, &path).unwrap();
            let want: Vec<Option<TokenId>> = (0..=path.len())
                .map(|i| t.node_at(&path.prefix(i)))
                .collect();
            assert_eq!(trace.labels, want);
            assert_eq!(trace.initial_path_head, None);
            for step in &trace.steps {
                assert!(step.attention_on_previous >= 1.0 - 1e-3);
                let attr = path.attrs()[step.slot - 1];
                assert_eq!(step.path_head, Some(e.schema().attribute_token(attr)));
            }
        }
    }

    #[test]
    fn weight_dump_covers_every_tensor() {
        let e = make_embedding(&Schema::generated(6, 2).unwrap(), 12, 1).unwrap();
        let cfg = XfConfig {
            k: 8,
            position_bound: 0.9,
            ..XfConfig::default()
        };
        let m = Transformer::build(&e, 2, cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        m.dump_weights(dir.path()).unwrap();
        let manifest: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("manifest.json")).unwrap(),
        )
        .unwrap();
        let layers = manifest["layers"].as_object().unwrap();
        assert_eq!(layers.len(), 7);
        let total: u64 = std::iter::once(&manifest["position_codes"])
            .chain(
                layers
                    .values()
                    .flat_map(|l| l["tensors"].as_array().unwrap()),
            )
            .map(|t| t["len"].as_u64().unwrap())
            .sum();
        let bytes = std::fs::metadata(dir.path().join("weights.bin"))
            .unwrap()
            .len();
        assert_eq!(bytes, total * 8);
        assert_eq!(manifest["slot_width"], 8 + 4 * 12);
    }
}
