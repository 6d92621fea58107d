//! Mutation, crossover and tournament selection over genotypes.

use crate::genotype::{sample_node, DagSpec, Genotype, NodeSpec, HEADS, M_MAX, WIDTH, WINDOW};
use crate::layers::{AttentionAxis, AttentionInit, CombinerKind, DagDim, LayerSpec, NormKind};
use crate::tensor::{PoolKind, UnaryFn};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MutationKind {
    InsertNode,
    DeleteNode,
    AddEdge,
    RemoveEdge,
    ChangeLayerKind,
    PerturbParams,
    ChangeCombiner,
    ChangeActivation,
}

impl MutationKind {
    pub const ALL: [MutationKind; 8] = [
        MutationKind::InsertNode,
        MutationKind::DeleteNode,
        MutationKind::AddEdge,
        MutationKind::RemoveEdge,
        MutationKind::ChangeLayerKind,
        MutationKind::PerturbParams,
        MutationKind::ChangeCombiner,
        MutationKind::ChangeActivation,
    ];
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VariationError {
    #[error("tournament over an empty population")]
    EmptyPopulation,
    #[error("tournament size {k} outside [1, {n}]")]
    TournamentSize { k: usize, n: usize },
}

/// Adds the missing edges that make `d` valid: a predecessor for every node
/// without one, a successor for every node without one. Drops entries on or
/// below the diagonal.
pub fn repair(d: &mut DagSpec, rng: &mut impl Rng) {
    let m = d.m();
    for a in 0..m {
        for b in 0..=a {
            d.set_edge(a, b, false);
        }
    }
    for to in 1..m {
        if d.predecessors(to).is_empty() {
            let from = rng.random_range(0..to);
            d.set_edge(from, to, true);
        }
    }
    for from in 0..m - 1 {
        if d.successors(from).is_empty() {
            let to = rng.random_range(from + 1..m);
            d.set_edge(from, to, true);
        }
    }
}

fn removable_edges(d: &DagSpec) -> Vec<(usize, usize)> {
    d.edges()
        .into_iter()
        .filter(|&(a, b)| d.successors(a).len() > 1 && d.predecessors(b).len() > 1)
        .collect()
}

fn absent_edges(d: &DagSpec) -> Vec<(usize, usize)> {
    let m = d.m();
    (0..m)
        .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
        .filter(|&(a, b)| !d.has_edge(a, b))
        .collect()
}

fn applicable(d: &DagSpec, kind: MutationKind) -> bool {
    let interior = d.interior();
    match kind {
        MutationKind::InsertNode => d.m() < M_MAX,
        MutationKind::DeleteNode => interior > 0,
        MutationKind::AddEdge => !absent_edges(d).is_empty(),
        MutationKind::RemoveEdge => !removable_edges(d).is_empty(),
        MutationKind::PerturbParams => d.nodes.iter().any(|n| n.layer.has_params()),
        MutationKind::ChangeLayerKind | MutationKind::ChangeCombiner | MutationKind::ChangeActivation => interior > 0,
    }
}

fn resample<T: PartialEq + Copy, R: Rng + ?Sized>(current: T, rng: &mut R, mut draw: impl FnMut(&mut R) -> T) -> T {
    for _ in 0..16 {
        let v = draw(rng);
        if v != current {
            return v;
        }
    }
    current
}

fn flip<T: PartialEq + Copy>(current: T, a: T, b: T) -> T {
    if current == a {
        b
    } else {
        a
    }
}

/// Redraws one hyperparameter of `layer` (kind unchanged).
pub fn perturb_layer(layer: LayerSpec, rng: &mut impl Rng) -> LayerSpec {
    let width = |cur: usize, rng: &mut dyn rand::RngCore| resample(cur, rng, |r| r.random_range(WIDTH));
    let window = |cur: usize, rng: &mut dyn rand::RngCore| resample(cur, rng, |r| r.random_range(WINDOW));
    match layer {
        LayerSpec::Identity => layer,
        LayerSpec::Mlp { output_shape } => LayerSpec::Mlp {
            output_shape: width(output_shape, rng),
        },
        LayerSpec::SelfAttention {
            dimension,
            init,
            heads,
            output_dim,
        } => {
            let mut l = (dimension, init, heads, output_dim);
            let choices = if dimension.is_some() { 4 } else { 3 };
            match rng.random_range(0..choices) {
                0 => l.1 = flip(init, AttentionInit::Convolution, AttentionInit::Random),
                1 => l.2 = resample(heads, rng, |r| r.random_range(HEADS)),
                2 => l.3 = width(output_dim, rng),
                _ => l.0 = dimension.map(|a| flip(a, AttentionAxis::Temporal, AttentionAxis::Spatial)),
            }
            LayerSpec::SelfAttention {
                dimension: l.0,
                init: l.1,
                heads: l.2,
                output_dim: l.3,
            }
        }
        LayerSpec::Conv1d {
            kernel_size,
            output_dim,
        }
        | LayerSpec::Conv2d {
            kernel_size,
            output_dim,
        } => {
            let (k, o) = if rng.random_bool(0.5) {
                (window(kernel_size, rng), output_dim)
            } else {
                (kernel_size, width(output_dim, rng))
            };
            match layer {
                LayerSpec::Conv1d { .. } => LayerSpec::Conv1d {
                    kernel_size: k,
                    output_dim: o,
                },
                _ => LayerSpec::Conv2d {
                    kernel_size: k,
                    output_dim: o,
                },
            }
        }
        LayerSpec::Pool1d { size, pool_type } | LayerSpec::Pool2d { size, pool_type } => {
            let (s, t) = if rng.random_bool(0.5) {
                (window(size, rng), pool_type)
            } else {
                (size, flip(pool_type, PoolKind::Max, PoolKind::Average))
            };
            match layer {
                LayerSpec::Pool1d { .. } => LayerSpec::Pool1d { size: s, pool_type: t },
                _ => LayerSpec::Pool2d { size: s, pool_type: t },
            }
        }
        LayerSpec::Norm1d { norm_type } => LayerSpec::Norm1d {
            norm_type: flip(norm_type, NormKind::Batch, NormKind::Layer),
        },
        LayerSpec::Norm2d { norm_type } => LayerSpec::Norm2d {
            norm_type: flip(norm_type, NormKind::Batch, NormKind::Layer),
        },
        LayerSpec::Dropout { rate } => LayerSpec::Dropout {
            rate: resample(rate, rng, |r| r.random_range(0.0..=0.5)),
        },
    }
}

fn apply(d: &mut DagSpec, dim: DagDim, kind: MutationKind, rng: &mut impl Rng) {
    let m = d.m();
    let interior_node = |rng: &mut dyn rand::RngCore| rng.random_range(1..m - 1);
    match kind {
        MutationKind::InsertNode => {
            let at = rng.random_range(1..m);
            d.insert_node(at, sample_node(dim, rng));
            let from = rng.random_range(0..at);
            let to = rng.random_range(at + 1..m + 1);
            d.set_edge(from, at, true);
            d.set_edge(at, to, true);
        }
        MutationKind::DeleteNode => {
            let at = interior_node(rng);
            let preds = d.predecessors(at);
            let succs = d.successors(at);
            // bypass keeps every neighbour connected
            for &p in &preds {
                for &s in &succs {
                    d.set_edge(p, s, true);
                }
            }
            d.remove_node(at);
        }
        MutationKind::AddEdge => {
            let (a, b) = *absent_edges(d).choose(rng).unwrap();
            d.set_edge(a, b, true);
        }
        MutationKind::RemoveEdge => {
            let (a, b) = *removable_edges(d).choose(rng).unwrap();
            d.set_edge(a, b, false);
        }
        MutationKind::ChangeLayerKind => {
            let at = interior_node(rng);
            let current = d.node(at).layer;
            let mut layer = current;
            for _ in 0..32 {
                layer = sample_node(dim, rng).layer;
                if layer.name() != current.name() {
                    break;
                }
            }
            d.nodes[at - 1].layer = layer;
        }
        MutationKind::PerturbParams => {
            let with_params: Vec<usize> = (1..m - 1).filter(|&i| d.node(i).layer.has_params()).collect();
            let at = *with_params.choose(rng).unwrap();
            d.nodes[at - 1].layer = perturb_layer(d.node(at).layer, rng);
        }
        MutationKind::ChangeCombiner => {
            let at = interior_node(rng);
            let cur = d.node(at).combiner;
            let others: Vec<CombinerKind> = CombinerKind::ALL.into_iter().filter(|&c| c != cur).collect();
            d.nodes[at - 1].combiner = *others.choose(rng).unwrap();
        }
        MutationKind::ChangeActivation => {
            let at = interior_node(rng);
            let cur = d.node(at).activation;
            let others: Vec<UnaryFn> = UnaryFn::ALL.into_iter().filter(|&a| a != cur).collect();
            d.nodes[at - 1].activation = *others.choose(rng).unwrap();
        }
    }
    repair(d, rng);
}

/// Applies one mutation drawn uniformly from the kinds in `kinds` that are
/// applicable to `d`. Returns the kind applied, if any.
pub fn mutate_dag(d: &mut DagSpec, dim: DagDim, kinds: &[MutationKind], rng: &mut impl Rng) -> Option<MutationKind> {
    let usable: Vec<MutationKind> = kinds.iter().copied().filter(|&k| applicable(d, k)).collect();
    let kind = *usable.choose(rng)?;
    apply(d, dim, kind, rng);
    Some(kind)
}

/// One mutation per DAG, kinds uniform over those applicable.
pub fn mutate(g: &Genotype, rng: &mut impl Rng) -> Genotype {
    mutate_with(g, &MutationKind::ALL, rng)
}

pub fn mutate_with(g: &Genotype, kinds: &[MutationKind], rng: &mut impl Rng) -> Genotype {
    let mut child = g.clone();
    mutate_dag(&mut child.gamma1, DagDim::Two, kinds, rng);
    mutate_dag(&mut child.gamma2, DagDim::One, kinds, rng);
    child
}

pub fn mutate_seeded(g: &Genotype, seed: u64) -> Genotype {
    mutate(g, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Pads `d` to `n` nodes with edge-less placeholders before the output anchor.
fn aligned(d: &DagSpec, n: usize) -> (Vec<Vec<bool>>, Vec<Option<NodeSpec>>) {
    let m = d.m();
    let map = |i: usize| if i == m - 1 { n - 1 } else { i };
    let mut adj = vec![vec![false; n]; n];
    for (a, b) in d.edges() {
        adj[map(a)][map(b)] = true;
    }
    let mut slots: Vec<Option<NodeSpec>> = d.nodes.iter().copied().map(Some).collect();
    slots.resize(n - 2, None);
    (adj, slots)
}

fn unalign(adj: Vec<Vec<bool>>, slots: Vec<Option<NodeSpec>>, rng: &mut impl Rng) -> DagSpec {
    let n = adj.len();
    let keep: Vec<usize> = std::iter::once(0)
        .chain((1..n - 1).filter(|&i| slots[i - 1].is_some()))
        .chain(std::iter::once(n - 1))
        .collect();
    let nodes: Vec<NodeSpec> = slots.into_iter().flatten().collect();
    let mut d = DagSpec::empty(keep.len());
    for (i, &a) in keep.iter().enumerate() {
        for (j, &b) in keep.iter().enumerate() {
            if adj[a][b] {
                d.set_edge(i, j, true);
            }
        }
    }
    d.nodes = nodes;
    repair(&mut d, rng);
    d
}

/// Exchanges a contiguous interior index range between two aligned DAGs.
pub fn crossover_dag(a: &DagSpec, b: &DagSpec, rng: &mut impl Rng) -> (DagSpec, DagSpec) {
    let n = a.m().max(b.m());
    if n <= 2 {
        return (a.clone(), b.clone());
    }
    let (mut adj_a, mut slots_a) = aligned(a, n);
    let (mut adj_b, mut slots_b) = aligned(b, n);
    let lo = rng.random_range(1..n - 1);
    let hi = rng.random_range(lo..n - 1);
    for i in lo..=hi {
        std::mem::swap(&mut slots_a[i - 1], &mut slots_b[i - 1]);
        std::mem::swap(&mut adj_a[i], &mut adj_b[i]);
        for j in 0..n {
            if !(lo..=hi).contains(&j) {
                let t = adj_a[j][i];
                adj_a[j][i] = adj_b[j][i];
                adj_b[j][i] = t;
            }
        }
    }
    (unalign(adj_a, slots_a, rng), unalign(adj_b, slots_b, rng))
}

/// Two children; each DAG independently exchanges one index range.
pub fn crossover(g1: &Genotype, g2: &Genotype, rng: &mut impl Rng) -> (Genotype, Genotype) {
    let (a1, b1) = crossover_dag(&g1.gamma1, &g2.gamma1, rng);
    let (a2, b2) = crossover_dag(&g1.gamma2, &g2.gamma2, rng);
    (
        Genotype {
            h: g1.h,
            gamma1: a1,
            gamma2: a2,
        },
        Genotype {
            h: g2.h,
            gamma1: b1,
            gamma2: b2,
        },
    )
}

pub fn crossover_seeded(g1: &Genotype, g2: &Genotype, seed: u64) -> (Genotype, Genotype) {
    crossover(g1, g2, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Index of the fittest (lowest) of `k` distinct uniformly drawn entries.
/// Ties go to the earlier draw.
pub fn tournament_index(fitness: &[f64], k: usize, rng: &mut impl Rng) -> Result<usize, VariationError> {
    let n = fitness.len();
    if n == 0 {
        return Err(VariationError::EmptyPopulation);
    }
    if k == 0 || k > n {
        return Err(VariationError::TournamentSize { k, n });
    }
    let picks = rand::seq::index::sample(rng, n, k);
    let mut best = picks.index(0);
    for i in picks.iter().skip(1) {
        if fitness[i].total_cmp(&fitness[best]).is_lt() {
            best = i;
        }
    }
    Ok(best)
}

pub fn tournament_select<'a, T>(
    population: &'a [T],
    k: usize,
    fitness: impl Fn(&T) -> f64,
    rng: &mut impl Rng,
) -> Result<&'a T, VariationError> {
    let f: Vec<f64> = population.iter().map(fitness).collect();
    Ok(&population[tournament_index(&f, k, rng)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genotype::{cnn_mlp_seed, random_genotype, M_INIT_MAX};

    #[test]
    fn mutations_stay_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for seed in 0..500 {
            let mut g = random_genotype(seed, 24, 20, M_INIT_MAX);
            for _ in 0..4 {
                g = mutate(&g, &mut rng);
                g.validate().unwrap();
            }
        }
    }

    #[test]
    fn perturb_only_keeps_adjacency() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for seed in 0..200 {
            let g = random_genotype(seed, 12, 6, M_INIT_MAX);
            let c = mutate_with(&g, &[MutationKind::PerturbParams], &mut rng);
            assert_eq!(c.gamma1.adjacency(), g.gamma1.adjacency());
            assert_eq!(c.gamma2.adjacency(), g.gamma2.adjacency());
        }
    }

    #[test]
    fn mutation_is_seed_deterministic() {
        let g = cnn_mlp_seed(24, 20);
        assert_eq!(mutate_seeded(&g, 5), mutate_seeded(&g, 5));
    }

    #[test]
    fn mutation_changes_the_genotype() {
        let g = cnn_mlp_seed(24, 20);
        let changed = (0..50).filter(|&s| mutate_seeded(&g, s) != g).count();
        assert_eq!(changed, 50);
    }

    #[test]
    fn insert_and_delete_reach_every_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut g = random_genotype(0, 8, 4, M_INIT_MAX);
        for target in (2..=M_MAX).chain((2..M_MAX).rev()) {
            while g.gamma2.m() != target {
                let kind = if g.gamma2.m() < target {
                    MutationKind::InsertNode
                } else {
                    MutationKind::DeleteNode
                };
                assert_eq!(mutate_dag(&mut g.gamma2, DagDim::One, &[kind], &mut rng), Some(kind));
                g.validate().unwrap();
            }
        }
        assert_eq!(
            mutate_dag(&mut g.gamma2, DagDim::One, &[MutationKind::DeleteNode], &mut rng),
            None
        );
    }

    #[test]
    fn identical_parents_give_identical_children() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for seed in 0..100 {
            let g = random_genotype(seed, 24, 20, M_INIT_MAX);
            let (a, b) = crossover(&g, &g, &mut rng);
            assert_eq!(a, g);
            assert_eq!(b, g);
        }
    }

    #[test]
    fn crossovers_stay_valid_and_deterministic() {
        for seed in 0..500 {
            let g1 = random_genotype(2 * seed, 24, 20, M_INIT_MAX);
            let g2 = random_genotype(2 * seed + 1, 24, 20, M_INIT_MAX);
            let (a, b) = crossover_seeded(&g1, &g2, seed);
            a.validate().unwrap();
            b.validate().unwrap();
            assert_eq!((a, b), crossover_seeded(&g1, &g2, seed));
        }
        let (a, b) = crossover_seeded(&cnn_mlp_seed(24, 20), &random_genotype(9, 24, 20, 3), 1);
        a.validate().unwrap();
        b.validate().unwrap();
    }

    #[test]
    fn full_tournament_returns_the_best() {
        let f = [0.4, 0.1, 0.9, 0.1, f64::INFINITY];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let i = tournament_index(&f, f.len(), &mut rng).unwrap();
            assert_eq!(f[i], 0.1);
        }
    }

    #[test]
    fn unit_tournament_is_uniform() {
        let f = [1.0; 4];
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut counts = [0usize; 4];
        for _ in 0..4000 {
            counts[tournament_index(&f, 1, &mut rng).unwrap()] += 1;
        }
        assert!(counts.iter().all(|&c| (850..1150).contains(&c)), "{counts:?}");
    }

    #[test]
    fn tournament_contract_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(tournament_index(&[], 1, &mut rng), Err(VariationError::EmptyPopulation));
        assert_eq!(
            tournament_index(&[1.0], 2, &mut rng),
            Err(VariationError::TournamentSize { k: 2, n: 1 })
        );
        let pop = ["a", "b", "c"];
        let pick = tournament_select(&pop, 2, |s| s.len() as f64, &mut rng).unwrap();
        assert!(pop.contains(pick));
    }
}
