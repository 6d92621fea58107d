use super::{DagSpec, Genotype, GenotypeError, GAMMA1, GAMMA2};
use crate::layers::{self, combine, combined_shape, CombinerKind, ForwardCtx, Layer, LayerError, Mode};
use crate::tensor::{Tape, Tensor, UnaryFn, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::ops::Range;

const HEAD: &str = "head";

#[derive(Debug, Clone)]
struct Built {
    preds: Vec<usize>,
    op: Option<Op>,
}

#[derive(Debug, Clone)]
struct Op {
    combiner: CombinerKind,
    layer: Layer,
    activation: UnaryFn,
    params: Range<usize>,
    buffers: Range<usize>,
}

/// A genotype instantiated for `f` input features, with its weights.
#[derive(Debug, Clone)]
pub struct Network {
    pub genotype: Genotype,
    pub f: usize,
    /// Trainable tensors in a fixed order; the dense head comes last.
    pub params: Vec<Tensor>,
    /// Non-trainable state (batch-norm running statistics).
    pub buffers: Vec<Tensor>,
    g1: Vec<Built>,
    g2: Vec<Built>,
    flat: usize,
    head_in: usize,
}

fn build_dag(
    d: &DagSpec,
    dag: &'static str,
    input: &[usize],
    params: &mut Vec<Tensor>,
    buffers: &mut Vec<Tensor>,
    rng: &mut impl Rng,
) -> Result<(Vec<Built>, Vec<usize>), GenotypeError> {
    let m = d.m();
    let mut shapes = vec![input.to_vec()];
    let mut built = Vec::with_capacity(m - 1);
    for node in 1..m {
        let preds = d.predecessors(node);
        let in_shapes: Vec<Vec<usize>> = preds.iter().map(|&p| shapes[p].clone()).collect();
        let err = |source| GenotypeError::Build { dag, node, source };
        if node == m - 1 {
            shapes.push(combined_shape(&in_shapes, CombinerKind::Add).map_err(err)?);
            built.push(Built { preds, op: None });
            break;
        }
        let spec = d.node(node);
        let merged = combined_shape(&in_shapes, spec.combiner).map_err(err)?;
        let (layer, p, b) = layers::build_layer(&spec.layer, &merged, rng).map_err(err)?;
        shapes.push(layer.out_shape.clone());
        let op = Op {
            combiner: spec.combiner,
            layer,
            activation: spec.activation,
            params: params.len()..params.len() + p.len(),
            buffers: buffers.len()..buffers.len() + b.len(),
        };
        params.extend(p);
        buffers.extend(b);
        built.push(Built { preds, op: Some(op) });
    }
    Ok((built, shapes.pop().unwrap()))
}

/// Instantiates `g` for `f` features with weights drawn from `seed`.
pub fn build_network(g: &Genotype, f: usize, seed: u64) -> Result<Network, GenotypeError> {
    g.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::new();
    let mut buffers = Vec::new();
    let (g1, out1) = build_dag(&g.gamma1, GAMMA1, &[g.h, f, 1], &mut params, &mut buffers, &mut rng)?;
    let flat = out1.iter().product();
    let (g2, out2) = build_dag(&g.gamma2, GAMMA2, &[flat], &mut params, &mut buffers, &mut rng)?;
    let head_in = out2[0];
    let bound = layers::glorot(head_in, g.h);
    let w: Vec<f64> = (0..head_in * g.h).map(|_| rng.random_range(-bound..=bound)).collect();
    params.push(Tensor::new(vec![head_in, g.h], w).expect("head shape"));
    params.push(Tensor::zeros(&[g.h]));
    Ok(Network {
        genotype: g.clone(),
        f,
        params,
        buffers,
        g1,
        g2,
        flat,
        head_in,
    })
}

fn run_dag(
    nodes: &[Built],
    dag: &'static str,
    ctx: &mut ForwardCtx<'_>,
    pvars: &[Var],
    buffers: &mut [Tensor],
    x: Var,
) -> Result<Var, GenotypeError> {
    let mut outs = vec![x];
    for (i, n) in nodes.iter().enumerate() {
        let node = i + 1;
        let err = |source| GenotypeError::Build { dag, node, source };
        let inputs: Vec<Var> = n.preds.iter().map(|&p| outs[p]).collect();
        let y = match &n.op {
            None => combine(ctx.tape, &inputs, CombinerKind::Add).map_err(err)?,
            Some(op) => {
                let merged = combine(ctx.tape, &inputs, op.combiner).map_err(err)?;
                let y = op
                    .layer
                    .forward(ctx, &pvars[op.params.clone()], &mut buffers[op.buffers.clone()], merged)
                    .map_err(err)?;
                let y = ctx.tape.unary(y, op.activation);
                if !ctx.tape.value(y).is_finite() {
                    return Err(err(LayerError::NonFinite("activation")));
                }
                y
            }
        };
        outs.push(y);
    }
    Ok(*outs.last().unwrap())
}

impl Network {
    pub fn h(&self) -> usize {
        self.genotype.h
    }

    /// Width of the flattened 2D-graph output.
    pub fn flat_width(&self) -> usize {
        self.flat
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Records a forward pass of `x (B, H, F)` on `tape`. Returns the
    /// `(B, H)` prediction and the tape handles of `self.params`.
    pub fn forward(
        &mut self,
        tape: &mut Tape,
        x: Var,
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Var, Vec<Var>), GenotypeError> {
        let shape = tape.shape(x).to_vec();
        let (h, f) = (self.h(), self.f);
        if shape.len() != 3 || shape[1] != h || shape[2] != f {
            return Err(GenotypeError::Build {
                dag: GAMMA1,
                node: 0,
                source: LayerError::Shape {
                    kind: "input",
                    expected: format!("[B, {h}, {f}]"),
                    shape,
                },
            });
        }
        let b = shape[0];
        let pvars: Vec<Var> = self.params.iter().map(|p| tape.param(p.clone())).collect();
        let head_err = |source| GenotypeError::Build {
            dag: HEAD,
            node: 0,
            source,
        };
        let mut ctx = ForwardCtx { tape, mode, rng };
        let x4 = ctx.tape.reshape(x, &[b, h, f, 1]).map_err(|e| head_err(e.into()))?;
        let y1 = run_dag(&self.g1, GAMMA1, &mut ctx, &pvars, &mut self.buffers, x4)?;
        let flat = ctx.tape.reshape(y1, &[b, self.flat]).map_err(|e| head_err(e.into()))?;
        let y2 = run_dag(&self.g2, GAMMA2, &mut ctx, &pvars, &mut self.buffers, flat)?;
        let tape = ctx.tape;
        let n = pvars.len();
        let out = (|| {
            let y = tape.matmul(y2, pvars[n - 2])?;
            let bias = tape.reshape(pvars[n - 1], &[1, h])?;
            let bias = tape.broadcast_to(bias, &[b, h])?;
            tape.add(y, bias)
        })()
        .map_err(|e| head_err(e.into()))?;
        debug_assert_eq!(tape.shape(y2)[1], self.head_in);
        if !tape.value(out).is_finite() {
            return Err(head_err(LayerError::NonFinite("output")));
        }
        Ok((out, pvars))
    }

    /// Eval-mode prediction for a batch `x (B, H, F)`.
    pub fn predict(&mut self, x: &Tensor) -> Result<Tensor, GenotypeError> {
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let xv = tape.constant(x.clone());
        let (y, _) = self.forward(&mut tape, xv, Mode::Eval, &mut rng)?;
        Ok(tape.value(y).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genotype::{cnn_mlp_seed, random_genotype, NodeSpec, M_INIT_MAX};
    use crate::layers::LayerSpec;

    fn input(b: usize, h: usize, f: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::new(
            vec![b, h, f],
            (0..b * h * f).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    fn identity_genotype(h: usize) -> Genotype {
        let id = NodeSpec {
            combiner: CombinerKind::Add,
            layer: LayerSpec::Identity,
            activation: UnaryFn::Identity,
        };
        Genotype {
            h,
            gamma1: DagSpec::from_edges(vec![id], &[(0, 1), (1, 2)]),
            gamma2: DagSpec::from_edges(vec![id], &[(0, 1), (1, 2)]),
        }
    }

    #[test]
    fn paper_scale_output_width() {
        let mut net = build_network(&cnn_mlp_seed(48, 34), 34, 0).unwrap();
        let y = net.predict(&input(1, 48, 34, 1)).unwrap();
        assert_eq!(y.shape(), &[1, 48]);
    }

    #[test]
    fn identity_graph_flattens_to_h_times_f() {
        let net = build_network(&identity_genotype(6), 5, 0).unwrap();
        assert_eq!(net.flat_width(), 30);
        assert_eq!(net.params[0].shape(), &[30, 6]);
    }

    #[test]
    fn identity_chain_is_the_head_on_flattened_input() {
        let (h, f, b) = (3, 2, 4);
        let mut net = build_network(&identity_genotype(h), f, 5).unwrap();
        let x = input(b, h, f, 2);
        let y = net.predict(&x).unwrap();
        let w = net.params[0].data();
        let bias = net.params[1].data();
        for s in 0..b {
            for o in 0..h {
                let mut acc = bias[o];
                for i in 0..h * f {
                    acc += x.data()[s * h * f + i] * w[i * h + o];
                }
                assert!((acc - y.data()[s * h + o]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_mlp_node_matches_composition() {
        let (h, f, b, width) = (2, 3, 2, 4);
        let mut g = identity_genotype(h);
        g.gamma2.nodes[0] = NodeSpec {
            combiner: CombinerKind::Add,
            layer: LayerSpec::Mlp { output_shape: width },
            activation: UnaryFn::Tanh,
        };
        let mut net = build_network(&g, f, 9).unwrap();
        let x = input(b, h, f, 3);
        let y = net.predict(&x).unwrap();
        let (w1, b1, w2, b2) = (
            net.params[0].data(),
            net.params[1].data(),
            net.params[2].data(),
            net.params[3].data(),
        );
        let n = h * f;
        for s in 0..b {
            let xs = &x.data()[s * n..(s + 1) * n];
            let hidden: Vec<f64> = (0..width)
                .map(|j| (b1[j] + (0..n).map(|i| xs[i] * w1[i * width + j]).sum::<f64>()).tanh())
                .collect();
            for o in 0..h {
                let expect = b2[o] + (0..width).map(|j| hidden[j] * w2[j * h + o]).sum::<f64>();
                assert!((expect - y.data()[s * h + o]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn batch_of_four_days() {
        let mut net = build_network(&cnn_mlp_seed(24, 7), 7, 0).unwrap();
        let y = net.predict(&input(4, 24, 7, 0)).unwrap();
        assert_eq!(y.shape(), &[4, 24]);
    }

    #[test]
    fn eval_is_bitwise_repeatable() {
        for seed in 0..20 {
            let g = random_genotype(seed, 6, 5, M_INIT_MAX);
            let mut net = build_network(&g, 5, seed).unwrap();
            let x = input(3, 6, 5, seed);
            let a = net.predict(&x).unwrap();
            let b = net.predict(&x).unwrap();
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn random_genotypes_forward_at_many_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..40 {
            let h = rng.random_range(1..=12);
            let f = rng.random_range(1..=10);
            let g = random_genotype(seed, h, f, M_INIT_MAX);
            if g.macs(f).unwrap() > 2_000_000 {
                continue;
            }
            let mut net = build_network(&g, f, seed).unwrap();
            let y = net.predict(&input(2, h, f, seed)).unwrap();
            assert_eq!(y.shape(), &[2, h], "seed {seed}");
        }
    }

    #[test]
    fn wrong_input_shape_is_structural() {
        let mut net = build_network(&identity_genotype(3), 2, 0).unwrap();
        assert!(matches!(
            net.predict(&input(1, 3, 4, 0)),
            Err(GenotypeError::Build { node: 0, .. })
        ));
    }
}
