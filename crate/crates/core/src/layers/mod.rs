//! Candidate operations available at DAG nodes.
//!
//! Shapes handled here are per sample. Nodes of the 2D graph see
//! `[H, W, C]` (time steps, feature width, channels); nodes of the 1D graph
//! see flat vectors `[N]`. Operations that produce channels in the 1D graph
//! (convolution, attention) flatten their output channel-major, so the 1D
//! graph stays rank 1 throughout.

pub mod attention;
pub mod combine;

pub use attention::{AttentionParams, AttentionVars};
pub use combine::{combine, combined_shape, CombinerKind};

use crate::tensor::{Padding, PoolKind, Tape, Tensor, TensorError, Var};
use attention::AttentionDims;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NORM_EPS: f64 = 1e-5;
pub const BATCH_NORM_MOMENTUM: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayerError {
    #[error("{kind} expects {expected}, got shape {shape:?}")]
    Shape {
        kind: &'static str,
        expected: String,
        shape: Vec<usize>,
    },
    #[error("combiner inputs have mismatched ranks or batch sizes: {0:?}")]
    RankMismatch(Vec<Vec<usize>>),
    #[error("combiner needs at least one input")]
    EmptyCombine,
    #[error("invalid layer configuration: {0}")]
    Config(String),
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Which of the two graphs a node lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DagDim {
    /// Operations over the `[H, W, C]` daily matrix.
    Two,
    /// Operations over flat vectors.
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionAxis {
    /// Scores between time steps, independently per feature column.
    Temporal,
    /// Scores between features, independently per time step.
    Spatial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionInit {
    Convolution,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Batch,
    Layer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// One layer of the search space with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Identity,
    Mlp {
        output_shape: usize,
    },
    SelfAttention {
        /// Attended axis; present exactly in the 2D graph.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dimension: Option<AttentionAxis>,
        init: AttentionInit,
        heads: usize,
        output_dim: usize,
    },
    Conv1d {
        kernel_size: usize,
        output_dim: usize,
    },
    Conv2d {
        kernel_size: usize,
        output_dim: usize,
    },
    Pool1d {
        size: usize,
        pool_type: PoolKind,
    },
    Pool2d {
        size: usize,
        pool_type: PoolKind,
    },
    Norm1d {
        norm_type: NormKind,
    },
    Norm2d {
        norm_type: NormKind,
    },
    Dropout {
        rate: f64,
    },
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Identity => "identity",
            LayerSpec::Mlp { .. } => "mlp",
            LayerSpec::SelfAttention { .. } => "self_attention",
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Pool1d { .. } => "pool1d",
            LayerSpec::Pool2d { .. } => "pool2d",
            LayerSpec::Norm1d { .. } => "norm1d",
            LayerSpec::Norm2d { .. } => "norm2d",
            LayerSpec::Dropout { .. } => "dropout",
        }
    }

    /// Whether this layer may appear in the graph of dimensionality `dim`.
    pub fn legal_in(&self, dim: DagDim) -> bool {
        match self {
            LayerSpec::Identity | LayerSpec::Mlp { .. } | LayerSpec::Dropout { .. } => true,
            LayerSpec::SelfAttention { dimension, .. } => dimension.is_some() == (dim == DagDim::Two),
            LayerSpec::Conv1d { .. } | LayerSpec::Pool1d { .. } | LayerSpec::Norm1d { .. } => dim == DagDim::One,
            LayerSpec::Conv2d { .. } | LayerSpec::Pool2d { .. } | LayerSpec::Norm2d { .. } => dim == DagDim::Two,
        }
    }

    /// Hyperparameter range checks (integers at least 1, dropout in `[0, 1)`).
    pub fn check_params(&self) -> Result<(), String> {
        let positive = |name: &str, v: usize| {
            if v >= 1 {
                Ok(())
            } else {
                Err(format!("{} {name} must be >= 1", self.name()))
            }
        };
        match *self {
            LayerSpec::Identity | LayerSpec::Norm1d { .. } | LayerSpec::Norm2d { .. } => Ok(()),
            LayerSpec::Mlp { output_shape } => positive("output_shape", output_shape),
            LayerSpec::SelfAttention { heads, output_dim, .. } => {
                positive("heads", heads)?;
                positive("output_dim", output_dim)
            }
            LayerSpec::Conv1d {
                kernel_size,
                output_dim,
            }
            | LayerSpec::Conv2d {
                kernel_size,
                output_dim,
            } => {
                positive("kernel_size", kernel_size)?;
                positive("output_dim", output_dim)
            }
            LayerSpec::Pool1d { size, .. } | LayerSpec::Pool2d { size, .. } => positive("size", size),
            LayerSpec::Dropout { rate } => {
                if (0.0..1.0).contains(&rate) {
                    Ok(())
                } else {
                    Err(format!("dropout rate {rate} outside [0, 1)"))
                }
            }
        }
    }

    pub fn has_params(&self) -> bool {
        !matches!(self, LayerSpec::Identity)
    }
}

/// Glorot-uniform bound.
pub fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(-bound..=bound)).collect(),
    )
    .expect("shape matches")
}

fn expect_rank(spec: &LayerSpec, in_shape: &[usize], dim: DagDim) -> Result<(), LayerError> {
    let rank = match dim {
        DagDim::Two => 3,
        DagDim::One => 1,
    };
    if in_shape.len() != rank || !spec.legal_in(dim) {
        return Err(LayerError::Shape {
            kind: spec.name(),
            expected: match dim {
                DagDim::Two => "a per-sample [H, W, C] input in the 2D graph".into(),
                DagDim::One => "a per-sample [N] input in the 1D graph".into(),
            },
            shape: in_shape.to_vec(),
        });
    }
    Ok(())
}

fn dim_of(in_shape: &[usize]) -> DagDim {
    if in_shape.len() == 3 {
        DagDim::Two
    } else {
        DagDim::One
    }
}

/// Per-sample output shape.
pub fn output_shape(spec: &LayerSpec, in_shape: &[usize]) -> Result<Vec<usize>, LayerError> {
    let dim = dim_of(in_shape);
    expect_rank(spec, in_shape, dim)?;
    spec.check_params().map_err(LayerError::Config)?;
    let s = in_shape;
    Ok(match (*spec, dim) {
        (LayerSpec::Identity | LayerSpec::Dropout { .. } | LayerSpec::Norm1d { .. } | LayerSpec::Norm2d { .. }, _) => {
            s.to_vec()
        }
        (LayerSpec::Mlp { output_shape }, DagDim::Two) => vec![s[0], s[1], output_shape],
        (LayerSpec::Mlp { output_shape }, DagDim::One) => vec![output_shape],
        (LayerSpec::SelfAttention { output_dim, .. }, DagDim::Two) => vec![s[0], s[1], output_dim],
        (LayerSpec::SelfAttention { output_dim, .. }, DagDim::One) => vec![output_dim * s[0]],
        (LayerSpec::Conv2d { output_dim, .. }, _) => vec![s[0], s[1], output_dim],
        (LayerSpec::Conv1d { output_dim, .. }, _) => vec![output_dim * s[0]],
        (LayerSpec::Pool2d { size, .. }, _) => vec![s[0] / size.min(s[0]), s[1] / size.min(s[1]), s[2]],
        (LayerSpec::Pool1d { size, .. }, _) => vec![s[0] / size.min(s[0])],
    })
}

/// Multiply-accumulate count per sample, used as a training cost estimate.
pub fn macs(spec: &LayerSpec, in_shape: &[usize]) -> Result<usize, LayerError> {
    let out = output_shape(spec, in_shape)?;
    let size: usize = in_shape.iter().product();
    let attn = |groups: usize, len: usize, d: usize, heads: usize, out: usize| {
        let dk = attention::key_dim_for(d);
        groups * len * d * heads * (2 * dk + out) + groups * heads * len * len * (2 * dk + 2 + out)
    };
    Ok(match *spec {
        LayerSpec::Identity => 0,
        LayerSpec::Dropout { .. } => size,
        LayerSpec::Norm1d { .. } | LayerSpec::Norm2d { .. } => 4 * size,
        LayerSpec::Pool1d { .. } | LayerSpec::Pool2d { .. } => size,
        LayerSpec::Mlp { output_shape } => size * output_shape,
        LayerSpec::Conv2d { kernel_size, .. } => {
            out.iter().product::<usize>() * kernel_size * kernel_size * in_shape[2]
        }
        LayerSpec::Conv1d { kernel_size, .. } => out[0] * kernel_size,
        LayerSpec::SelfAttention {
            dimension,
            heads,
            output_dim,
            ..
        } => match dimension {
            Some(AttentionAxis::Temporal) => attn(in_shape[1], in_shape[0], in_shape[2], heads, output_dim),
            Some(AttentionAxis::Spatial) => attn(in_shape[0], in_shape[1], in_shape[2], heads, output_dim),
            None => attn(1, in_shape[0], 1, heads, output_dim),
        },
    })
}

/// Per-sample trainable parameter count.
pub fn param_count(spec: &LayerSpec, in_shape: &[usize]) -> Result<usize, LayerError> {
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    let (_, params, _) = build_layer(spec, in_shape, &mut rng)?;
    Ok(params.iter().map(Tensor::len).sum())
}

#[derive(Debug, Clone, PartialEq)]
enum Plan {
    Identity,
    Dense {
        fan_in: usize,
        out: usize,
    },
    Conv {
        spatial_rank: usize,
        flatten: bool,
    },
    Pool {
        window: Vec<usize>,
        kind: PoolKind,
    },
    Norm {
        kind: NormKind,
        channels: usize,
    },
    Dropout {
        rate: f64,
    },
    Attention {
        axis: Option<AttentionAxis>,
        dims: AttentionDims,
    },
}

/// An instantiated layer: shapes resolved, ready to run on a tape.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub in_shape: Vec<usize>,
    pub out_shape: Vec<usize>,
    plan: Plan,
}

/// Mutable state threaded through a forward pass.
pub struct ForwardCtx<'a> {
    pub tape: &'a mut Tape,
    pub mode: Mode,
    pub rng: &'a mut ChaCha8Rng,
}

/// Resolves shapes and draws initial parameters. Returns the layer, its
/// trainable tensors and its non-trainable buffers (batch-norm statistics).
pub fn build_layer(
    spec: &LayerSpec,
    in_shape: &[usize],
    rng: &mut impl Rng,
) -> Result<(Layer, Vec<Tensor>, Vec<Tensor>), LayerError> {
    let out_shape = output_shape(spec, in_shape)?;
    let dim = dim_of(in_shape);
    let mut params = Vec::new();
    let mut buffers = Vec::new();
    let plan = match (*spec, dim) {
        (LayerSpec::Identity, _) => Plan::Identity,
        (LayerSpec::Mlp { output_shape }, _) => {
            let fan_in = *in_shape.last().unwrap();
            let fan_in = if dim == DagDim::Two { fan_in } else { in_shape[0] };
            params.push(uniform(&[fan_in, output_shape], glorot(fan_in, output_shape), rng));
            params.push(Tensor::zeros(&[output_shape]));
            Plan::Dense {
                fan_in,
                out: output_shape,
            }
        }
        (
            LayerSpec::Conv2d {
                kernel_size: k,
                output_dim,
            },
            _,
        ) => {
            let cin = in_shape[2];
            params.push(uniform(
                &[k, k, cin, output_dim],
                glorot(k * k * cin, k * k * output_dim),
                rng,
            ));
            params.push(Tensor::zeros(&[output_dim]));
            Plan::Conv {
                spatial_rank: 2,
                flatten: false,
            }
        }
        (
            LayerSpec::Conv1d {
                kernel_size: k,
                output_dim,
            },
            _,
        ) => {
            params.push(uniform(&[k, 1, output_dim], glorot(k, k * output_dim), rng));
            params.push(Tensor::zeros(&[output_dim]));
            Plan::Conv {
                spatial_rank: 1,
                flatten: true,
            }
        }
        (LayerSpec::Pool2d { size, pool_type }, _) => Plan::Pool {
            window: vec![size.min(in_shape[0]), size.min(in_shape[1])],
            kind: pool_type,
        },
        (LayerSpec::Pool1d { size, pool_type }, _) => Plan::Pool {
            window: vec![size.min(in_shape[0])],
            kind: pool_type,
        },
        (LayerSpec::Norm1d { norm_type } | LayerSpec::Norm2d { norm_type }, _) => {
            let channels = *in_shape.last().unwrap();
            params.push(Tensor::full(&[channels], 1.0));
            params.push(Tensor::zeros(&[channels]));
            if norm_type == NormKind::Batch {
                buffers.push(Tensor::zeros(&[channels]));
                buffers.push(Tensor::full(&[channels], 1.0));
            }
            Plan::Norm {
                kind: norm_type,
                channels,
            }
        }
        (LayerSpec::Dropout { rate }, _) => Plan::Dropout { rate },
        (
            LayerSpec::SelfAttention {
                dimension,
                init,
                heads,
                output_dim,
            },
            _,
        ) => {
            let (len, d) = match dimension {
                Some(AttentionAxis::Temporal) => (in_shape[0], in_shape[2]),
                Some(AttentionAxis::Spatial) => (in_shape[1], in_shape[2]),
                None => (in_shape[0], 1),
            };
            let mut p = AttentionParams::random(heads, len, d, output_dim, rng);
            if init == AttentionInit::Convolution {
                p.conv_init(heads, attention::DEFAULT_CONCENTRATION, rng)?;
            }
            let dims = AttentionDims::from(&p);
            params.extend(p.into_tensors());
            Plan::Attention { axis: dimension, dims }
        }
    };
    Ok((
        Layer {
            spec: *spec,
            in_shape: in_shape.to_vec(),
            out_shape,
            plan,
        },
        params,
        buffers,
    ))
}

impl Layer {
    /// Runs the layer on a batched input `[B, ..in_shape]`.
    pub fn forward(
        &self,
        ctx: &mut ForwardCtx<'_>,
        params: &[Var],
        buffers: &mut [Tensor],
        x: Var,
    ) -> Result<Var, LayerError> {
        let shape = ctx.tape.shape(x).to_vec();
        if shape.len() != self.in_shape.len() + 1 || shape[1..] != self.in_shape[..] {
            return Err(LayerError::Shape {
                kind: self.spec.name(),
                expected: format!("[B, {:?}]", self.in_shape),
                shape,
            });
        }
        let b = shape[0];
        let tape = &mut *ctx.tape;
        let y = match &self.plan {
            Plan::Identity => x,
            Plan::Dense { fan_in, out } => {
                let rows = shape.iter().product::<usize>() / fan_in;
                let xf = tape.reshape(x, &[rows, *fan_in])?;
                let y = tape.matmul(xf, params[0])?;
                let bias = tape.reshape(params[1], &[1, *out])?;
                let bias = tape.broadcast_to(bias, &[rows, *out])?;
                let y = tape.add(y, bias)?;
                let mut out_shape = vec![b];
                out_shape.extend(&self.out_shape);
                tape.reshape(y, &out_shape)?
            }
            Plan::Conv { spatial_rank, flatten } => {
                let xin = if *flatten {
                    tape.reshape(x, &[b, self.in_shape[0], 1])?
                } else {
                    x
                };
                let y = tape.convolution(xin, params[0], *spatial_rank, Padding::Same)?;
                let ys = tape.shape(y).to_vec();
                let cout = *ys.last().unwrap();
                let mut bshape = vec![1; ys.len()];
                bshape[ys.len() - 1] = cout;
                let bias = tape.reshape(params[1], &bshape)?;
                let bias = tape.broadcast_to(bias, &ys)?;
                let y = tape.add(y, bias)?;
                if *flatten {
                    let y = tape.permute(y, &[0, 2, 1])?;
                    tape.reshape(y, &[b, self.out_shape[0]])?
                } else {
                    y
                }
            }
            Plan::Pool { window, kind } => {
                if window.len() == 1 {
                    let xin = tape.reshape(x, &[b, self.in_shape[0], 1])?;
                    let y = tape.pooling(xin, window, *kind)?;
                    tape.reshape(y, &[b, self.out_shape[0]])?
                } else {
                    tape.pooling(x, window, *kind)?
                }
            }
            Plan::Norm { kind, channels } => norm_forward(tape, ctx.mode, *kind, *channels, params, buffers, x)?,
            Plan::Dropout { rate } => {
                if ctx.mode == Mode::Eval || *rate == 0.0 {
                    x
                } else {
                    let keep = 1.0 - rate;
                    let n = tape.value(x).len();
                    let mask: Vec<f64> = (0..n)
                        .map(|_| {
                            if ctx.rng.random::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    tape.const_mul(x, mask)?
                }
            }
            Plan::Attention { axis, dims } => {
                let vars = AttentionVars::from_slice(params);
                let out = dims.out_dim;
                match axis {
                    Some(AttentionAxis::Temporal) => {
                        let (h, w, c) = (shape[1], shape[2], shape[3]);
                        let xp = tape.permute(x, &[0, 2, 1, 3])?;
                        let xs = tape.reshape(xp, &[b * w, h, c])?;
                        let y = attention::attention_forward(tape, &vars, *dims, xs)?;
                        let y = tape.reshape(y, &[b, w, h, out])?;
                        tape.permute(y, &[0, 2, 1, 3])?
                    }
                    Some(AttentionAxis::Spatial) => {
                        let (h, w, c) = (shape[1], shape[2], shape[3]);
                        let xs = tape.reshape(x, &[b * h, w, c])?;
                        let y = attention::attention_forward(tape, &vars, *dims, xs)?;
                        tape.reshape(y, &[b, h, w, out])?
                    }
                    None => {
                        let n = shape[1];
                        let xs = tape.reshape(x, &[b, n, 1])?;
                        let y = attention::attention_forward(tape, &vars, *dims, xs)?;
                        let y = tape.permute(y, &[0, 2, 1])?;
                        tape.reshape(y, &[b, out * n])?
                    }
                }
            }
        };
        if !tape.value(y).is_finite() {
            return Err(LayerError::NonFinite(self.spec.name()));
        }
        Ok(y)
    }
}

fn norm_forward(
    tape: &mut Tape,
    mode: Mode,
    kind: NormKind,
    channels: usize,
    params: &[Var],
    buffers: &mut [Tensor],
    x: Var,
) -> Result<Var, LayerError> {
    let shape = tape.shape(x).to_vec();
    let n = tape.value(x).len();
    let rows = n / channels;
    let xn = match (kind, mode) {
        (NormKind::Layer, _) => {
            let b = shape[0];
            let xf = tape.reshape(x, &[b, n / b])?;
            let y = tape.standardize_rows(xf, NORM_EPS)?;
            tape.reshape(y, &shape)?
        }
        (NormKind::Batch, Mode::Train) => {
            // channel statistics over every other axis
            let data = tape.value(x).data();
            let mut mean = vec![0.0; channels];
            let mut var = vec![0.0; channels];
            for r in 0..rows {
                for c in 0..channels {
                    mean[c] += data[r * channels + c];
                }
            }
            mean.iter_mut().for_each(|m| *m /= rows as f64);
            for r in 0..rows {
                for c in 0..channels {
                    let d = data[r * channels + c] - mean[c];
                    var[c] += d * d;
                }
            }
            var.iter_mut().for_each(|v| *v /= rows as f64);
            let m = BATCH_NORM_MOMENTUM;
            for (rm, bm) in buffers[0].data_mut().iter_mut().zip(&mean) {
                *rm = (1.0 - m) * *rm + m * bm;
            }
            for (rv, bv) in buffers[1].data_mut().iter_mut().zip(&var) {
                *rv = (1.0 - m) * *rv + m * bv;
            }
            let xf = tape.reshape(x, &[rows, channels])?;
            let xt = tape.permute(xf, &[1, 0])?;
            let y = tape.standardize_rows(xt, NORM_EPS)?;
            let y = tape.permute(y, &[1, 0])?;
            tape.reshape(y, &shape)?
        }
        (NormKind::Batch, Mode::Eval) => {
            let rm = buffers[0].data();
            let rv = buffers[1].data();
            let shift: Vec<f64> = (0..n).map(|i| rm[i % channels]).collect();
            let scale: Vec<f64> = (0..n).map(|i| 1.0 / (rv[i % channels] + NORM_EPS).sqrt()).collect();
            let shift = tape.constant(Tensor::new(shape.clone(), shift)?);
            let centered = tape.sub(x, shift)?;
            tape.const_mul(centered, scale)?
        }
    };
    let mut pshape = vec![1; shape.len()];
    pshape[shape.len() - 1] = channels;
    let gamma = tape.reshape(params[0], &pshape)?;
    let gamma = tape.broadcast_to(gamma, &shape)?;
    let beta = tape.reshape(params[1], &pshape)?;
    let beta = tape.broadcast_to(beta, &shape)?;
    let y = tape.mul(xn, gamma)?;
    Ok(tape.add(y, beta)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn run(spec: &LayerSpec, in_shape: &[usize], batch: usize, mode: Mode, seed: u64) -> (Tensor, Tensor) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (layer, params, mut buffers) = build_layer(spec, in_shape, &mut rng).unwrap();
        let mut shape = vec![batch];
        shape.extend(in_shape);
        let n = shape.iter().product();
        let x = Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let mut tape = Tape::new();
        let pv: Vec<Var> = params.into_iter().map(|p| tape.param(p)).collect();
        let xv = tape.constant(x.clone());
        let mut ctx = ForwardCtx {
            tape: &mut tape,
            mode,
            rng: &mut rng,
        };
        let y = layer.forward(&mut ctx, &pv, &mut buffers, xv).unwrap();
        (x, tape.value(y).clone())
    }

    #[test]
    fn identity_passes_through() {
        let (x, y) = run(&LayerSpec::Identity, &[4, 3, 2], 2, Mode::Train, 0);
        assert_eq!(x, y);
    }

    #[test]
    fn mlp_output_width() {
        let spec = LayerSpec::Mlp { output_shape: 7 };
        let (_, y) = run(&spec, &[5], 3, Mode::Eval, 1);
        assert_eq!(y.shape(), &[3, 7]);
        let (_, y) = run(&spec, &[4, 2, 5], 3, Mode::Eval, 1);
        assert_eq!(y.shape(), &[3, 4, 2, 7]);
    }

    #[test]
    fn zero_dropout_is_identity_in_train() {
        let (x, y) = run(&LayerSpec::Dropout { rate: 0.0 }, &[6], 4, Mode::Train, 2);
        assert_eq!(x, y);
        let (x, y) = run(&LayerSpec::Dropout { rate: 0.5 }, &[6], 4, Mode::Eval, 2);
        assert_eq!(x, y);
    }

    #[test]
    fn dropout_scales_kept_units() {
        let (x, y) = run(&LayerSpec::Dropout { rate: 0.25 }, &[200], 2, Mode::Train, 3);
        for (a, b) in x.data().iter().zip(y.data()) {
            assert!(*b == 0.0 || (b - a / 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_contracts_per_kind() {
        let cases: Vec<(LayerSpec, Vec<usize>, Vec<usize>)> = vec![
            (
                LayerSpec::Conv2d {
                    kernel_size: 3,
                    output_dim: 4,
                },
                vec![6, 5, 2],
                vec![6, 5, 4],
            ),
            (
                LayerSpec::Conv1d {
                    kernel_size: 3,
                    output_dim: 4,
                },
                vec![10],
                vec![40],
            ),
            (
                LayerSpec::Pool2d {
                    size: 4,
                    pool_type: PoolKind::Max,
                },
                vec![6, 3, 2],
                vec![1, 1, 2],
            ),
            (
                LayerSpec::Pool1d {
                    size: 3,
                    pool_type: PoolKind::Average,
                },
                vec![10],
                vec![3],
            ),
            (
                LayerSpec::SelfAttention {
                    dimension: Some(AttentionAxis::Spatial),
                    init: AttentionInit::Random,
                    heads: 2,
                    output_dim: 3,
                },
                vec![4, 5, 2],
                vec![4, 5, 3],
            ),
            (
                LayerSpec::SelfAttention {
                    dimension: Some(AttentionAxis::Temporal),
                    init: AttentionInit::Convolution,
                    heads: 3,
                    output_dim: 2,
                },
                vec![4, 5, 2],
                vec![4, 5, 2],
            ),
            (
                LayerSpec::SelfAttention {
                    dimension: None,
                    init: AttentionInit::Random,
                    heads: 2,
                    output_dim: 3,
                },
                vec![6],
                vec![18],
            ),
            (
                LayerSpec::Norm2d {
                    norm_type: NormKind::Batch,
                },
                vec![3, 3, 2],
                vec![3, 3, 2],
            ),
        ];
        for (spec, inp, out) in cases {
            assert_eq!(output_shape(&spec, &inp).unwrap(), out, "{spec:?}");
            let (_, y) = run(&spec, &inp, 2, Mode::Train, 4);
            assert_eq!(&y.shape()[1..], &out[..], "{spec:?}");
        }
    }

    #[test]
    fn kind_dimensionality_is_enforced() {
        let conv2 = LayerSpec::Conv2d {
            kernel_size: 2,
            output_dim: 2,
        };
        assert!(matches!(output_shape(&conv2, &[5]), Err(LayerError::Shape { .. })));
        let attn = LayerSpec::SelfAttention {
            dimension: Some(AttentionAxis::Temporal),
            init: AttentionInit::Random,
            heads: 1,
            output_dim: 2,
        };
        assert!(attn.legal_in(DagDim::Two) && !attn.legal_in(DagDim::One));
        assert!(LayerSpec::Dropout { rate: 1.0 }.check_params().is_err());
        assert!(LayerSpec::Mlp { output_shape: 0 }.check_params().is_err());
    }

    #[test]
    fn eval_is_deterministic() {
        let specs = [
            LayerSpec::Norm1d {
                norm_type: NormKind::Batch,
            },
            LayerSpec::Dropout { rate: 0.3 },
            LayerSpec::Mlp { output_shape: 3 },
        ];
        for spec in specs {
            let a = run(&spec, &[8], 4, Mode::Eval, 9).1;
            let b = run(&spec, &[8], 4, Mode::Eval, 9).1;
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn layer_spec_json_is_tagged() {
        let spec = LayerSpec::Pool1d {
            size: 2,
            pool_type: PoolKind::Average,
        };
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(s, r#"{"kind":"pool1d","size":2,"pool_type":"average"}"#);
        assert!(serde_json::from_str::<LayerSpec>(r#"{"kind":"lstm"}"#).is_err());
    }
}
