//! Two-DAG genotypes: encoding, validation, JSON schema, sampling, the
//! CNN/MLP seed, and instantiation into trainable networks.

mod network;
mod sample;

pub use network::{build_network, Network};
pub use sample::{random_dag, random_genotype, random_genotype_with, sample_layer};
pub(crate) use sample::{sample_node, HEADS, WIDTH, WINDOW};

use crate::layers::{self, combined_shape, CombinerKind, DagDim, LayerError, LayerSpec};
use crate::tensor::{PoolKind, UnaryFn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest node count per DAG, anchors included.
pub const M_MAX: usize = 12;
/// Largest node count per DAG for freshly sampled genotypes.
pub const M_INIT_MAX: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenotypeError {
    #[error("{dag}: edge {from}->{to} is not strictly upper-triangular")]
    Cyclic { dag: &'static str, from: usize, to: usize },
    #[error("{dag}: node {node} has no incoming edge")]
    Disconnected { dag: &'static str, node: usize },
    #[error("{dag}: node {node} has no outgoing edge")]
    Dangling { dag: &'static str, node: usize },
    #[error("{dag}: node {node} uses {kind}, which is not allowed in this graph")]
    IllegalKind {
        dag: &'static str,
        node: usize,
        kind: &'static str,
    },
    #[error("{dag}: node {node}: {reason}")]
    InvalidParams {
        dag: &'static str,
        node: usize,
        reason: String,
    },
    #[error("{dag}: node count m={m} outside [2, {max}]")]
    Size { dag: &'static str, m: usize, max: usize },
    #[error("{dag}: m={m} requires {expected} interior node specs, found {found}")]
    NodeCount {
        dag: &'static str,
        m: usize,
        expected: usize,
        found: usize,
    },
    #[error("{dag}: node {node}: {source}")]
    Build {
        dag: &'static str,
        node: usize,
        source: LayerError,
    },
    #[error("output width h must be >= 1")]
    OutputWidth,
    #[error("genotype parse error: {0}")]
    Parse(String),
}

/// Interior node: combiner, then layer, then activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub combiner: CombinerKind,
    pub layer: LayerSpec,
    pub activation: UnaryFn,
}

/// Adjacency matrix plus interior node list. Node 0 is the input anchor,
/// node `m - 1` the output anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "DagRepr", try_from = "DagRepr")]
pub struct DagSpec {
    adj: Vec<Vec<bool>>,
    pub nodes: Vec<NodeSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DagRepr {
    m: usize,
    edges: Vec<[usize; 2]>,
    nodes: Vec<NodeSpec>,
}

impl From<DagSpec> for DagRepr {
    fn from(d: DagSpec) -> Self {
        DagRepr {
            m: d.m(),
            edges: d.edges().into_iter().map(|(a, b)| [a, b]).collect(),
            nodes: d.nodes,
        }
    }
}

impl TryFrom<DagRepr> for DagSpec {
    type Error = String;

    fn try_from(r: DagRepr) -> Result<Self, String> {
        let mut d = DagSpec::empty(r.m);
        for [a, b] in r.edges {
            if a >= r.m || b >= r.m {
                return Err(format!("edge [{a}, {b}] references a node outside 0..{}", r.m));
            }
            d.adj[a][b] = true;
        }
        d.nodes = r.nodes;
        Ok(d)
    }
}

impl DagSpec {
    /// `m` nodes, no edges, no interior specs.
    pub fn empty(m: usize) -> Self {
        DagSpec {
            adj: vec![vec![false; m]; m],
            nodes: Vec::new(),
        }
    }

    /// Builds a DAG from interior nodes and an edge list.
    pub fn from_edges(nodes: Vec<NodeSpec>, edges: &[(usize, usize)]) -> Self {
        let m = nodes.len() + 2;
        let mut d = DagSpec::empty(m);
        for &(a, b) in edges {
            d.adj[a][b] = true;
        }
        d.nodes = nodes;
        d
    }

    pub fn m(&self) -> usize {
        self.adj.len()
    }

    pub fn interior(&self) -> usize {
        self.m().saturating_sub(2)
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.adj[from][to]
    }

    pub fn set_edge(&mut self, from: usize, to: usize, on: bool) {
        self.adj[from][to] = on;
    }

    /// Edges in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let m = self.m();
        (0..m)
            .flat_map(|a| (0..m).map(move |b| (a, b)))
            .filter(|&(a, b)| self.adj[a][b])
            .collect()
    }

    pub fn predecessors(&self, node: usize) -> Vec<usize> {
        (0..self.m()).filter(|&a| self.adj[a][node]).collect()
    }

    pub fn successors(&self, node: usize) -> Vec<usize> {
        (0..self.m()).filter(|&b| self.adj[node][b]).collect()
    }

    /// Spec of DAG node `i` (1-based interior index).
    pub fn node(&self, i: usize) -> &NodeSpec {
        &self.nodes[i - 1]
    }

    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adj
    }

    /// Inserts a fresh interior node so that it becomes DAG node `at`
    /// (`1 <= at <= m - 1`); existing edges are shifted.
    pub fn insert_node(&mut self, at: usize, spec: NodeSpec) {
        for row in &mut self.adj {
            row.insert(at, false);
        }
        let m = self.adj.len() + 1;
        self.adj.insert(at, vec![false; m]);
        self.nodes.insert(at - 1, spec);
    }

    /// Removes interior DAG node `at` with its edges.
    pub fn remove_node(&mut self, at: usize) {
        self.adj.remove(at);
        for row in &mut self.adj {
            row.remove(at);
        }
        self.nodes.remove(at - 1);
    }

    /// Checks every structural rule; reports the first violation.
    pub fn validate(&self, dag: &'static str, dim: DagDim) -> Result<(), GenotypeError> {
        let m = self.m();
        if !(2..=M_MAX).contains(&m) {
            return Err(GenotypeError::Size { dag, m, max: M_MAX });
        }
        if self.nodes.len() != m - 2 {
            return Err(GenotypeError::NodeCount {
                dag,
                m,
                expected: m - 2,
                found: self.nodes.len(),
            });
        }
        for (from, to) in self.edges() {
            if to <= from {
                return Err(GenotypeError::Cyclic { dag, from, to });
            }
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if !n.layer.legal_in(dim) {
                return Err(GenotypeError::IllegalKind {
                    dag,
                    node: i + 1,
                    kind: n.layer.name(),
                });
            }
            if let Err(reason) = n.layer.check_params() {
                return Err(GenotypeError::InvalidParams {
                    dag,
                    node: i + 1,
                    reason,
                });
            }
        }
        for node in 1..m {
            if !(0..node).any(|a| self.adj[a][node]) {
                return Err(GenotypeError::Disconnected { dag, node });
            }
        }
        for node in 0..m - 1 {
            if !(node + 1..m).any(|b| self.adj[node][b]) {
                return Err(GenotypeError::Dangling { dag, node });
            }
        }
        Ok(())
    }

    /// Per-sample shapes of every node output, anchors included.
    pub fn propagate(&self, dag: &'static str, input: &[usize]) -> Result<Vec<Vec<usize>>, GenotypeError> {
        let m = self.m();
        let mut shapes: Vec<Vec<usize>> = vec![input.to_vec()];
        for node in 1..m {
            let preds: Vec<Vec<usize>> = self.predecessors(node).into_iter().map(|p| shapes[p].clone()).collect();
            let build = |source| GenotypeError::Build { dag, node, source };
            let shape = if node == m - 1 {
                combined_shape(&preds, CombinerKind::Add).map_err(build)?
            } else {
                let spec = self.node(node);
                let merged = combined_shape(&preds, spec.combiner).map_err(build)?;
                layers::output_shape(&spec.layer, &merged).map_err(build)?
            };
            shapes.push(shape);
        }
        Ok(shapes)
    }
}

/// A candidate architecture: 2D graph, flatten, 1D graph, dense head of width `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Genotype {
    pub h: usize,
    pub gamma1: DagSpec,
    pub gamma2: DagSpec,
}

pub const GAMMA1: &str = "gamma1";
pub const GAMMA2: &str = "gamma2";

impl Genotype {
    pub fn validate(&self) -> Result<(), GenotypeError> {
        if self.h == 0 {
            return Err(GenotypeError::OutputWidth);
        }
        self.gamma1.validate(GAMMA1, DagDim::Two)?;
        self.gamma2.validate(GAMMA2, DagDim::One)
    }

    /// Per-sample multiply-accumulate estimate for `f` input features.
    pub fn macs(&self, f: usize) -> Result<usize, GenotypeError> {
        let mut total = 0;
        let s1 = self.gamma1.propagate(GAMMA1, &[self.h, f, 1])?;
        total += dag_macs(&self.gamma1, &s1, GAMMA1)?;
        let flat = s1.last().unwrap().iter().product::<usize>();
        let s2 = self.gamma2.propagate(GAMMA2, &[flat])?;
        total += dag_macs(&self.gamma2, &s2, GAMMA2)?;
        Ok(total + s2.last().unwrap()[0] * self.h)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("genotype serializes")
    }

    /// Parses and validates a genotype in the JSON schema.
    pub fn from_json(text: &str) -> Result<Self, GenotypeError> {
        let g: Genotype = serde_json::from_str(text).map_err(|e| GenotypeError::Parse(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }
}

fn dag_macs(d: &DagSpec, shapes: &[Vec<usize>], dag: &'static str) -> Result<usize, GenotypeError> {
    let mut total = 0;
    for node in 1..d.m() - 1 {
        let preds: Vec<Vec<usize>> = d.predecessors(node).into_iter().map(|p| shapes[p].clone()).collect();
        let spec = d.node(node);
        let merged = combined_shape(&preds, spec.combiner).expect("propagated");
        total += layers::macs(&spec.layer, &merged).map_err(|source| GenotypeError::Build { dag, node, source })?;
    }
    Ok(total)
}

pub fn serialize_genotype(g: &Genotype) -> String {
    g.to_json()
}

pub fn deserialize_genotype(text: &str) -> Result<Genotype, GenotypeError> {
    Genotype::from_json(text)
}

/// Hand-built CNN/MLP architecture: identity 2D graph, then two
/// convolution/average-pool branches and one dense branch over the flattened
/// input, concatenated and fed to a final dense node.
pub fn cnn_mlp_seed(h: usize, _f: usize) -> Genotype {
    let node = |combiner, layer| NodeSpec {
        combiner,
        layer,
        activation: UnaryFn::Relu,
    };
    let gamma1 = DagSpec::from_edges(
        vec![NodeSpec {
            combiner: CombinerKind::Add,
            layer: LayerSpec::Identity,
            activation: UnaryFn::Identity,
        }],
        &[(0, 1), (1, 2)],
    );
    let add = CombinerKind::Add;
    let pool = LayerSpec::Pool1d {
        size: 4,
        pool_type: PoolKind::Average,
    };
    let nodes = vec![
        node(
            add,
            LayerSpec::Conv1d {
                kernel_size: 3,
                output_dim: 4,
            },
        ),
        NodeSpec {
            activation: UnaryFn::Identity,
            ..node(add, pool)
        },
        node(
            add,
            LayerSpec::Conv1d {
                kernel_size: 5,
                output_dim: 4,
            },
        ),
        NodeSpec {
            activation: UnaryFn::Identity,
            ..node(add, pool)
        },
        node(add, LayerSpec::Mlp { output_shape: 32 }),
        NodeSpec {
            combiner: CombinerKind::Concat,
            layer: LayerSpec::Identity,
            activation: UnaryFn::Identity,
        },
        node(add, LayerSpec::Mlp { output_shape: 32 }),
    ];
    let gamma2 = DagSpec::from_edges(
        nodes,
        &[
            (0, 1),
            (1, 2),
            (0, 3),
            (3, 4),
            (0, 5),
            (2, 6),
            (4, 6),
            (5, 6),
            (6, 7),
            (7, 8),
        ],
    );
    Genotype { h, gamma1, gamma2 }
}
