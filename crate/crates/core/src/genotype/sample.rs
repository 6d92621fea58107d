use super::{DagSpec, Genotype, NodeSpec};
use crate::layers::{AttentionAxis, AttentionInit, CombinerKind, DagDim, LayerSpec, NormKind};
use crate::tensor::{PoolKind, UnaryFn};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) const WIDTH: std::ops::RangeInclusive<usize> = 4..=64;
pub(crate) const WINDOW: std::ops::RangeInclusive<usize> = 2..=5;
pub(crate) const HEADS: std::ops::RangeInclusive<usize> = 1..=4;
const EXTRA_EDGE_PROB: f64 = 0.2;

/// Draws a layer legal in `dim`, kind uniform, parameters uniform in range.
pub fn sample_layer(dim: DagDim, rng: &mut impl Rng) -> LayerSpec {
    match rng.random_range(0..7) {
        0 => LayerSpec::Identity,
        1 => LayerSpec::Mlp {
            output_shape: rng.random_range(WIDTH),
        },
        2 => {
            let dimension = match dim {
                DagDim::Two if rng.random_bool(0.5) => Some(AttentionAxis::Temporal),
                DagDim::Two => Some(AttentionAxis::Spatial),
                DagDim::One => None,
            };
            LayerSpec::SelfAttention {
                dimension,
                init: if rng.random_bool(0.5) {
                    AttentionInit::Convolution
                } else {
                    AttentionInit::Random
                },
                heads: rng.random_range(HEADS),
                output_dim: rng.random_range(WIDTH),
            }
        }
        3 => {
            let kernel_size = rng.random_range(WINDOW);
            let output_dim = rng.random_range(WIDTH);
            match dim {
                DagDim::Two => LayerSpec::Conv2d {
                    kernel_size,
                    output_dim,
                },
                DagDim::One => LayerSpec::Conv1d {
                    kernel_size,
                    output_dim,
                },
            }
        }
        4 => {
            let size = rng.random_range(WINDOW);
            let pool_type = if rng.random_bool(0.5) {
                PoolKind::Max
            } else {
                PoolKind::Average
            };
            match dim {
                DagDim::Two => LayerSpec::Pool2d { size, pool_type },
                DagDim::One => LayerSpec::Pool1d { size, pool_type },
            }
        }
        5 => {
            let norm_type = if rng.random_bool(0.5) {
                NormKind::Batch
            } else {
                NormKind::Layer
            };
            match dim {
                DagDim::Two => LayerSpec::Norm2d { norm_type },
                DagDim::One => LayerSpec::Norm1d { norm_type },
            }
        }
        _ => LayerSpec::Dropout {
            rate: rng.random_range(0.0..=0.5),
        },
    }
}

pub(crate) fn sample_node(dim: DagDim, rng: &mut impl Rng) -> NodeSpec {
    NodeSpec {
        combiner: *CombinerKind::ALL.choose(rng).unwrap(),
        layer: sample_layer(dim, rng),
        activation: *UnaryFn::ALL.choose(rng).unwrap(),
    }
}

/// Random valid DAG with `interior` interior nodes. Every node gets one
/// random predecessor, every node left without a successor gets one, and a
/// few extra forward edges are sprinkled in.
pub fn random_dag(dim: DagDim, interior: usize, rng: &mut impl Rng) -> DagSpec {
    let m = interior + 2;
    let nodes = (0..interior).map(|_| sample_node(dim, rng)).collect();
    let mut d = DagSpec::empty(m);
    d.nodes = nodes;
    for to in 1..m {
        let from = rng.random_range(0..to);
        d.set_edge(from, to, true);
    }
    for from in 0..m - 1 {
        if d.successors(from).is_empty() {
            let to = rng.random_range(from + 1..m);
            d.set_edge(from, to, true);
        }
    }
    for from in 0..m - 1 {
        for to in from + 1..m {
            if rng.random_bool(EXTRA_EDGE_PROB) {
                d.set_edge(from, to, true);
            }
        }
    }
    d
}

/// Small random genotype; each DAG has between 2 and `m_init_max` nodes.
pub fn random_genotype(seed: u64, h: usize, _f: usize, m_init_max: usize) -> Genotype {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_genotype_with(&mut rng, h, m_init_max)
}

pub fn random_genotype_with(rng: &mut impl Rng, h: usize, m_init_max: usize) -> Genotype {
    assert!(m_init_max >= 2, "m_init_max must be at least 2");
    let n1 = rng.random_range(0..=m_init_max - 2);
    let gamma1 = random_dag(DagDim::Two, n1, rng);
    let n2 = rng.random_range(0..=m_init_max - 2);
    let gamma2 = random_dag(DagDim::One, n2, rng);
    Genotype { h, gamma1, gamma2 }
}
