//! Relative-position multi-head self-attention.
//!
//! For a sequence `x_1..x_L` of `d`-dimensional tokens, head `h` scores query
//! `q` against key `k` with
//!
//! ```text
//! A[q,k] = x_q W_Q W_K^T x_k + x_q W_Q Ŵ_K^T r(k-q) + u W_K^T x_k + v Ŵ_K^T r(k-q)
//! ```
//!
//! where `r(δ)` is a row of the learnable relative-position table. Scores are
//! softmax-normalized over keys and each head's weights are applied to `x W_O`,
//! heads are summed and `b_O` added.

use super::{glorot, LayerError};
use crate::tensor::{Result as TResult, Tape, Tensor, Var};
use rand::Rng;

/// Width of each relative-position encoding `r(δ)`.
pub const REL_DIM: usize = 2;

/// Default logit concentration for convolution-style initialization.
pub const DEFAULT_CONCENTRATION: f64 = 100.0;

/// Attention weights. Per-head blocks are stacked along the last axis:
/// head `h` owns columns `h * key_dim .. (h + 1) * key_dim` of `w_q`, `w_k`
/// and `w_k_rel`, and columns `h * out_dim .. (h + 1) * out_dim` of `w_o`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub heads: usize,
    /// Length of the attended axis.
    pub len: usize,
    pub in_dim: usize,
    pub key_dim: usize,
    pub out_dim: usize,
    /// `(in_dim, heads * key_dim)`
    pub w_q: Tensor,
    /// `(in_dim, heads * key_dim)`
    pub w_k: Tensor,
    /// Relative-position key weights Ŵ_K, `(REL_DIM, heads * key_dim)`.
    pub w_k_rel: Tensor,
    /// Relative-position encodings δ_R, one row per offset `-(len-1)..=len-1`.
    pub rel: Tensor,
    /// `(heads, key_dim)`
    pub u: Tensor,
    /// `(heads, key_dim)`
    pub v: Tensor,
    /// `(in_dim, heads * out_dim)`
    pub w_o: Tensor,
    /// `(out_dim)`
    pub b_o: Tensor,
}

/// Key width used for a given input width.
pub fn key_dim_for(in_dim: usize) -> usize {
    in_dim.max(REL_DIM)
}

fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(-bound..=bound)).collect(),
    )
    .expect("shape matches")
}

impl AttentionParams {
    /// Randomly initialized weights.
    pub fn random(heads: usize, len: usize, in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let dk = key_dim_for(in_dim);
        AttentionParams {
            heads,
            len,
            in_dim,
            key_dim: dk,
            out_dim,
            w_q: uniform(&[in_dim, heads * dk], glorot(in_dim, dk), rng),
            w_k: uniform(&[in_dim, heads * dk], glorot(in_dim, dk), rng),
            w_k_rel: uniform(&[REL_DIM, heads * dk], glorot(REL_DIM, dk), rng),
            rel: uniform(&[2 * len - 1, REL_DIM], 1.0, rng),
            u: uniform(&[heads, dk], glorot(dk, 1), rng),
            v: uniform(&[heads, dk], glorot(dk, 1), rng),
            w_o: uniform(&[in_dim, heads * out_dim], glorot(in_dim, out_dim), rng),
            b_o: Tensor::zeros(&[out_dim]),
        }
    }

    /// Tensors in the fixed order used by [`AttentionParams::from_tensors`].
    pub fn into_tensors(self) -> Vec<Tensor> {
        vec![
            self.w_q,
            self.w_k,
            self.w_k_rel,
            self.rel,
            self.u,
            self.v,
            self.w_o,
            self.b_o,
        ]
    }

    pub fn tensors(&self) -> [&Tensor; 8] {
        [
            &self.w_q,
            &self.w_k,
            &self.w_k_rel,
            &self.rel,
            &self.u,
            &self.v,
            &self.w_o,
            &self.b_o,
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// Relative offset assigned to head `h` by convolution initialization
    /// with the given kernel size; `None` for heads beyond the kernel.
    pub fn conv_offset(h: usize, kernel_size: usize) -> Option<isize> {
        (h < kernel_size).then(|| h as isize - (kernel_size / 2) as isize)
    }

    /// Re-initializes so that head `h < kernel_size` attends (almost) only to
    /// relative offset `h - kernel_size / 2`, making the layer compute a
    /// convolution of width `kernel_size` whose taps are the heads' slices of
    /// `w_o`. Content projections and `u` are zeroed; `w_o` is redrawn at
    /// small scale and heads beyond the kernel get zero output weights.
    pub fn conv_init(&mut self, kernel_size: usize, concentration: f64, rng: &mut impl Rng) -> Result<(), LayerError> {
        if kernel_size == 0 || self.heads < kernel_size {
            return Err(LayerError::Config(format!(
                "convolution initialization needs heads >= kernel size, got {} < {kernel_size}",
                self.heads
            )));
        }
        let (dk, out) = (self.key_dim, self.out_dim);
        self.w_q = Tensor::zeros(self.w_q.shape());
        self.w_k = Tensor::zeros(self.w_k.shape());
        self.u = Tensor::zeros(self.u.shape());
        let mut w_k_rel = Tensor::zeros(self.w_k_rel.shape());
        let mut v = Tensor::zeros(self.v.shape());
        for h in 0..self.heads {
            w_k_rel.data_mut()[h * dk] = 1.0;
            w_k_rel.data_mut()[self.heads * dk + h * dk + 1] = 1.0;
            let shift = Self::conv_offset(h, kernel_size).unwrap_or(0) as f64;
            // v·(δ², δ) = -c (δ - shift)² + c shift²
            v.data_mut()[h * dk] = -concentration;
            v.data_mut()[h * dk + 1] = 2.0 * concentration * shift;
        }
        let mut rel = Tensor::zeros(self.rel.shape());
        for r in 0..2 * self.len - 1 {
            let delta = r as f64 - (self.len - 1) as f64;
            rel.data_mut()[r * REL_DIM] = delta * delta;
            rel.data_mut()[r * REL_DIM + 1] = delta;
        }
        let bound = glorot(self.in_dim * kernel_size, out);
        let mut w_o = uniform(self.w_o.shape(), bound, rng);
        for h in kernel_size..self.heads {
            for i in 0..self.in_dim {
                for o in 0..out {
                    w_o.data_mut()[i * self.heads * out + h * out + o] = 0.0;
                }
            }
        }
        self.w_k_rel = w_k_rel;
        self.v = v;
        self.rel = rel;
        self.w_o = w_o;
        self.b_o = Tensor::zeros(&[out]);
        Ok(())
    }
}

/// Tape handles for the eight attention tensors, same order as
/// [`AttentionParams::into_tensors`].
#[derive(Debug, Clone, Copy)]
pub struct AttentionVars {
    pub w_q: Var,
    pub w_k: Var,
    pub w_k_rel: Var,
    pub rel: Var,
    pub u: Var,
    pub v: Var,
    pub w_o: Var,
    pub b_o: Var,
}

impl AttentionVars {
    pub fn from_slice(vars: &[Var]) -> Self {
        AttentionVars {
            w_q: vars[0],
            w_k: vars[1],
            w_k_rel: vars[2],
            rel: vars[3],
            u: vars[4],
            v: vars[5],
            w_o: vars[6],
            b_o: vars[7],
        }
    }

    pub fn register(tape: &mut Tape, p: &AttentionParams) -> Self {
        let v: Vec<Var> = p.tensors().iter().map(|t| tape.param((*t).clone())).collect();
        Self::from_slice(&v)
    }
}

/// Dimensions needed by the forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionDims {
    pub heads: usize,
    pub key_dim: usize,
    pub out_dim: usize,
}

impl From<&AttentionParams> for AttentionDims {
    fn from(p: &AttentionParams) -> Self {
        AttentionDims {
            heads: p.heads,
            key_dim: p.key_dim,
            out_dim: p.out_dim,
        }
    }
}

/// Pre-softmax scores `(G, heads, L, L)` for a batch of sequences `x (G, L, d)`.
pub fn attention_scores(tape: &mut Tape, p: &AttentionVars, dims: AttentionDims, x: Var) -> TResult<Var> {
    let s = tape.shape(x).to_vec();
    let (g, l, d) = (s[0], s[1], s[2]);
    let AttentionDims {
        heads: nh, key_dim: dk, ..
    } = dims;

    let xf = tape.reshape(x, &[g * l, d])?;
    let project = |tape: &mut Tape, w: Var| -> TResult<Var> {
        let y = tape.matmul(xf, w)?;
        let y = tape.reshape(y, &[g, l, nh, dk])?;
        tape.permute(y, &[0, 2, 1, 3])
    };
    let q = project(tape, p.w_q)?; // (G, h, L, dk)
    let k = project(tape, p.w_k)?;

    // content-content
    let qb = tape.reshape(q, &[g * nh, l, dk])?;
    let kt = tape.permute(k, &[0, 1, 3, 2])?;
    let kt = tape.reshape(kt, &[g * nh, dk, l])?;
    let t1 = tape.bmm(qb, kt)?;
    let t1 = tape.reshape(t1, &[g, nh, l, l])?;

    // relative keys per head, gathered to (h, L, L, dk)
    let r = tape.matmul(p.rel, p.w_k_rel)?;
    let r = tape.reshape(r, &[2 * l - 1, nh, dk])?;
    let r = tape.permute(r, &[1, 0, 2])?;
    let rg = tape.relative_gather(r, l)?;

    // content-position
    let qp = tape.permute(q, &[1, 2, 0, 3])?;
    let qp = tape.reshape(qp, &[nh * l, g, dk])?;
    let rgt = tape.reshape(rg, &[nh * l, l, dk])?;
    let rgt = tape.permute(rgt, &[0, 2, 1])?;
    let t2 = tape.bmm(qp, rgt)?;
    let t2 = tape.reshape(t2, &[nh, l, g, l])?;
    let t2 = tape.permute(t2, &[2, 0, 1, 3])?;

    // global content bias
    let kp = tape.permute(k, &[1, 0, 2, 3])?;
    let kp = tape.reshape(kp, &[nh, g * l, dk])?;
    let ucol = tape.reshape(p.u, &[nh, dk, 1])?;
    let t3 = tape.bmm(kp, ucol)?;
    let t3 = tape.reshape(t3, &[nh, g, 1, l])?;
    let t3 = tape.permute(t3, &[1, 0, 2, 3])?;
    let t3 = tape.broadcast_to(t3, &[g, nh, l, l])?;

    // global position bias
    let rgr = tape.reshape(rg, &[nh, l * l, dk])?;
    let vcol = tape.reshape(p.v, &[nh, dk, 1])?;
    let t4 = tape.bmm(rgr, vcol)?;
    let t4 = tape.reshape(t4, &[1, nh, l, l])?;
    let t4 = tape.broadcast_to(t4, &[g, nh, l, l])?;

    let s = tape.add(t1, t2)?;
    let s = tape.add(s, t3)?;
    tape.add(s, t4)
}

/// Attention over the middle axis of `x (G, L, d)`, returning `(G, L, out)`.
pub fn attention_forward(tape: &mut Tape, p: &AttentionVars, dims: AttentionDims, x: Var) -> TResult<Var> {
    let s = tape.shape(x).to_vec();
    let (g, l, d) = (s[0], s[1], s[2]);
    let AttentionDims {
        heads: nh,
        out_dim: out,
        ..
    } = dims;

    let scores = attention_scores(tape, p, dims, x)?;
    let probs = tape.softmax(scores, 3)?;

    let xf = tape.reshape(x, &[g * l, d])?;
    let vals = tape.matmul(xf, p.w_o)?;
    let vals = tape.reshape(vals, &[g, l, nh, out])?;
    let vals = tape.permute(vals, &[0, 2, 1, 3])?;
    let vals = tape.reshape(vals, &[g * nh, l, out])?;
    let pb = tape.reshape(probs, &[g * nh, l, l])?;
    let o = tape.bmm(pb, vals)?;
    let o = tape.reshape(o, &[g, nh, l, out])?;
    let o = tape.sum_axis(o, 1)?;
    let o = tape.reshape(o, &[g, l, out])?;
    let b = tape.reshape(p.b_o, &[1, 1, out])?;
    let b = tape.broadcast_to(b, &[g, l, out])?;
    tape.add(o, b)
}

/// Convenience wrapper evaluating attention on plain tensors.
pub fn attention(p: &AttentionParams, x: &Tensor) -> Result<Tensor, LayerError> {
    let s = x.shape();
    if s.len() != 3 || s[1] != p.len || s[2] != p.in_dim {
        return Err(LayerError::Shape {
            kind: "self_attention",
            expected: format!("(G, {}, {})", p.len, p.in_dim),
            shape: s.to_vec(),
        });
    }
    let mut tape = Tape::new();
    let vars = AttentionVars::register(&mut tape, p);
    let xv = tape.constant(x.clone());
    let y = attention_forward(&mut tape, &vars, p.into(), xv)?;
    let out = tape.value(y).clone();
    if !out.is_finite() {
        return Err(LayerError::NonFinite("self_attention"));
    }
    Ok(out)
}

/// Softmax-normalized attention weights `(G, heads, L, L)`.
pub fn attention_probabilities(p: &AttentionParams, x: &Tensor) -> Result<Tensor, LayerError> {
    let mut tape = Tape::new();
    let vars = AttentionVars::register(&mut tape, p);
    let xv = tape.constant(x.clone());
    let s = attention_scores(&mut tape, &vars, p.into(), xv)?;
    let pr = tape.softmax(s, 3)?;
    Ok(tape.value(pr).clone())
}
