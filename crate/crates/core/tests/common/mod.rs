#![allow(dead_code)]

use dagforecast_core::data::{split_blocks, standardize, synth_generate, LoadDataset, SynthConfig};
use dagforecast_core::genotype::{build_network, random_genotype, sample_layer, Genotype};
use dagforecast_core::layers::attention::{attention_probabilities, AttentionParams};
use dagforecast_core::layers::{build_layer, DagDim, ForwardCtx, LayerSpec, Mode};
use dagforecast_core::tensor::{Padding, PoolKind, Tape, Tensor};
use dagforecast_core::trainer::{compute_metrics, masked_input};
use dagforecast_core::variation::{crossover_seeded, mutate_seeded};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

pub fn rand_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Denominator floor, so that roundoff on (near-)zero gradients is not read
/// as relative error.
pub const REL_FLOOR: f64 = 1e-4;

/// `|a - b| / max(|a|, |b|, REL_FLOOR)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

const FD_STEP: f64 = 1e-5;
/// Coordinates checked per tensor; larger tensors are subsampled.
const FD_COORDS: usize = 60;

/// Five-point central-difference check of `f` at `inputs` against `grads`;
/// returns the worst relative error over the sampled coordinates.
pub fn check_gradients(inputs: &[Tensor], grads: &[Vec<f64>], f: &dyn Fn(&[Tensor]) -> f64, rng: &mut impl Rng) -> f64 {
    let mut worst = 0.0f64;
    for (t, g) in grads.iter().enumerate() {
        let n = inputs[t].len();
        let coords: Vec<usize> = if n <= FD_COORDS {
            (0..n).collect()
        } else {
            (0..FD_COORDS).map(|_| rng.random_range(0..n)).collect()
        };
        for i in coords {
            let at = |k: f64| {
                let mut p = inputs.to_vec();
                p[t].data_mut()[i] += k * FD_STEP;
                f(&p)
            };
            let fd = (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * FD_STEP);
            worst = worst.max(rel_err(g[i], fd));
        }
    }
    worst
}

/// Per-sample input shape for a random small case in `dim`.
fn small_shape(dim: DagDim, rng: &mut impl Rng) -> Vec<usize> {
    match dim {
        DagDim::Two => vec![
            rng.random_range(2..=5),
            rng.random_range(2..=5),
            rng.random_range(1..=3),
        ],
        DagDim::One => vec![rng.random_range(3..=10)],
    }
}

/// Worst relative error of one layer on one random shape, or `None` when the
/// sampled spec does not apply to the shape.
pub fn layer_case(spec: &LayerSpec, in_shape: &[usize], seed: u64) -> Option<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (layer, params, buffers) = build_layer(spec, in_shape, &mut rng).ok()?;
    let batch = 3;
    let mut shape = vec![batch];
    shape.extend_from_slice(in_shape);
    let x = rand_tensor(&shape, &mut rng);
    let mut out_shape = vec![batch];
    out_shape.extend_from_slice(&layer.out_shape);
    let r = rand_tensor(&out_shape, &mut rng);

    let mut inputs = params.clone();
    inputs.push(x);
    let run = |inputs: &[Tensor], want_grads: bool| -> (f64, Vec<Vec<f64>>) {
        let mut tape = Tape::new();
        let vars: Vec<_> = inputs.iter().map(|t| tape.param(t.clone())).collect();
        let mut bufs = buffers.clone();
        let mut drop_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd0);
        let mut ctx = ForwardCtx {
            tape: &mut tape,
            mode: Mode::Train,
            rng: &mut drop_rng,
        };
        let n = vars.len();
        let y = layer.forward(&mut ctx, &vars[..n - 1], &mut bufs, vars[n - 1]).unwrap();
        let rv = tape.constant(r.clone());
        let prod = tape.mul(y, rv).unwrap();
        let loss = tape.sum(prod);
        let value = tape.value(loss).data()[0];
        if !want_grads {
            return (value, vec![]);
        }
        let g = tape.backward(loss).unwrap();
        (value, vars.iter().map(|&v| g.wrt(v)).collect())
    };
    let (_, grads) = run(&inputs, true);
    Some(check_gradients(&inputs, &grads, &|p| run(p, false).0, &mut rng))
}

/// Gradient check of `X ⊙ sigmoid(w)` followed by a small network.
pub fn mask_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, f) = (rng.random_range(2..=4), rng.random_range(1..=4));
    let g = random_genotype(seed, h, f, 4);
    let mut net = build_network(&g, f, seed).unwrap();
    let x = rand_tensor(&[2, h, f], &mut rng);
    let w = rand_tensor(&[f], &mut rng);
    let r = rand_tensor(&[2, h], &mut rng);
    let run = |inputs: &[Tensor], net: &mut dagforecast_core::genotype::Network, want: bool| {
        let mut tape = Tape::new();
        let xv = tape.param(inputs[0].clone());
        let wv = tape.param(inputs[1].clone());
        let xm = masked_input(&mut tape, xv, wv).unwrap();
        let (y, _) = net
            .forward(&mut tape, xm, Mode::Eval, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        let rv = tape.constant(r.clone());
        let p = tape.mul(y, rv).unwrap();
        let loss = tape.sum(p);
        let value = tape.value(loss).data()[0];
        if !want {
            return (value, vec![]);
        }
        let gr = tape.backward(loss).unwrap();
        (value, vec![gr.wrt(xv), gr.wrt(wv)])
    };
    let inputs = vec![x, w];
    let (_, grads) = run(&inputs, &mut net, true);
    let net = std::cell::RefCell::new(net);
    check_gradients(&inputs, &grads, &|p| run(p, &mut net.borrow_mut(), false).0, &mut rng)
}

pub struct GradientReport {
    /// Cases and worst error per layer kind, plus `feature_mask`.
    pub per_kind: BTreeMap<String, (usize, f64)>,
}

impl GradientReport {
    pub fn worst(&self) -> f64 {
        self.per_kind.values().map(|v| v.1).fold(0.0, f64::max)
    }

    pub fn min_cases(&self) -> usize {
        self.per_kind.values().map(|v| v.0).min().unwrap_or(0)
    }
}

pub const LAYER_KINDS: [&str; 10] = [
    "identity",
    "mlp",
    "self_attention",
    "conv1d",
    "conv2d",
    "pool1d",
    "pool2d",
    "norm1d",
    "norm2d",
    "dropout",
];

/// Samples random specs and shapes until every layer kind has `per_kind`
/// checked cases, then adds `per_kind` feature-mask cases.
pub fn gradient_suite(per_kind: usize, seed: u64) -> GradientReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    let mut attempts = 0;
    while LAYER_KINDS.iter().any(|k| per.get(*k).map_or(0, |v| v.0) < per_kind) {
        attempts += 1;
        assert!(attempts < 100_000, "could not sample enough cases");
        let dim = if rng.random_bool(0.5) { DagDim::Two } else { DagDim::One };
        let spec = sample_layer(dim, &mut rng);
        if per.get(spec.name()).map_or(0, |v| v.0) >= per_kind {
            continue;
        }
        let shape = small_shape(dim, &mut rng);
        if let Some(err) = layer_case(&spec, &shape, rng.random()) {
            let e = per.entry(spec.name().to_string()).or_insert((0, 0.0));
            e.0 += 1;
            e.1 = e.1.max(err);
        }
    }
    let mut worst = 0.0f64;
    for i in 0..per_kind {
        worst = worst.max(mask_case(seed.wrapping_add(i as u64)));
    }
    per.insert("feature_mask".into(), (per_kind, worst));
    GradientReport { per_kind: per }
}

/// Direct-loop cross-correlation, channels last.
pub fn naive_conv(x: &Tensor, k: &Tensor, spatial: usize, padding: Padding) -> Tensor {
    let xs = x.shape();
    let ks = k.shape();
    let (b, h, w, cin) = if spatial == 1 {
        (xs[0], 1, xs[1], xs[2])
    } else {
        (xs[0], xs[1], xs[2], xs[3])
    };
    let (kh, kw, cout) = if spatial == 1 {
        (1, ks[0], ks[2])
    } else {
        (ks[0], ks[1], ks[3])
    };
    let (ph, pw) = match padding {
        Padding::Valid => (0isize, 0isize),
        Padding::Same => (((kh - 1) / 2) as isize, ((kw - 1) / 2) as isize),
    };
    let (oh, ow) = match padding {
        Padding::Valid => (h + 1 - kh, w + 1 - kw),
        Padding::Same => (h, w),
    };
    let mut out = vec![0.0; b * oh * ow * cout];
    for n in 0..b {
        for i in 0..oh {
            for j in 0..ow {
                for o in 0..cout {
                    let mut s = 0.0;
                    for a in 0..kh {
                        for c in 0..kw {
                            let (yi, xj) = (i as isize + a as isize - ph, j as isize + c as isize - pw);
                            if yi < 0 || xj < 0 || yi >= h as isize || xj >= w as isize {
                                continue;
                            }
                            for ci in 0..cin {
                                let xv = x.data()[((n * h + yi as usize) * w + xj as usize) * cin + ci];
                                let kv = k.data()[((a * kw + c) * cin + ci) * cout + o];
                                s += xv * kv;
                            }
                        }
                    }
                    out[((n * oh + i) * ow + j) * cout + o] = s;
                }
            }
        }
    }
    let shape = if spatial == 1 {
        vec![b, ow, cout]
    } else {
        vec![b, oh, ow, cout]
    };
    Tensor::new(shape, out).unwrap()
}

/// Direct-loop non-overlapping pooling, channels last, partial windows dropped.
pub fn naive_pool(x: &Tensor, window: &[usize], kind: PoolKind) -> Tensor {
    let xs = x.shape();
    let (b, h, w, c) = if window.len() == 1 {
        (xs[0], 1, xs[1], xs[2])
    } else {
        (xs[0], xs[1], xs[2], xs[3])
    };
    let (wh, ww) = if window.len() == 1 {
        (1, window[0])
    } else {
        (window[0], window[1])
    };
    let (oh, ow) = (h / wh, w / ww);
    let mut out = Vec::with_capacity(b * oh * ow * c);
    for n in 0..b {
        for i in 0..oh {
            for j in 0..ow {
                for ch in 0..c {
                    let mut vals = Vec::new();
                    for a in 0..wh {
                        for d in 0..ww {
                            vals.push(x.data()[((n * h + i * wh + a) * w + j * ww + d) * c + ch]);
                        }
                    }
                    out.push(match kind {
                        PoolKind::Max => vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                        PoolKind::Average => vals.iter().sum::<f64>() / vals.len() as f64,
                    });
                }
            }
        }
    }
    let shape = if window.len() == 1 {
        vec![b, ow, c]
    } else {
        vec![b, oh, ow, c]
    };
    Tensor::new(shape, out).unwrap()
}

/// Softmax-normalized relative attention weights by direct loops:
/// `score(i, j) = q_i·k_j + q_i·r_{j-i} + u·k_j + v·r_{j-i}` per head.
pub fn naive_attention_probs(p: &AttentionParams, x: &Tensor) -> Vec<f64> {
    let (g, l, d) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (nh, dk) = (p.heads, p.key_dim);
    let rel_dim = p.rel.shape()[1];
    let cols = nh * dk;
    let proj = |w: &Tensor, row: &[f64], col: usize| -> f64 {
        (0..row.len()).map(|a| row[a] * w.data()[a * cols + col]).sum()
    };
    let mut out = vec![0.0; g * nh * l * l];
    for gi in 0..g {
        let row = |i: usize| &x.data()[(gi * l + i) * d..(gi * l + i + 1) * d];
        for hd in 0..nh {
            for i in 0..l {
                let mut scores = vec![0.0; l];
                for (j, s) in scores.iter_mut().enumerate() {
                    let rrow = &p.rel.data()[(j + l - 1 - i) * rel_dim..(j + l - i) * rel_dim];
                    for c in 0..dk {
                        let col = hd * dk + c;
                        let q = proj(&p.w_q, row(i), col);
                        let k = proj(&p.w_k, row(j), col);
                        let r = proj(&p.w_k_rel, rrow, col);
                        let u = p.u.data()[hd * dk + c];
                        let v = p.v.data()[hd * dk + c];
                        *s += q * k + q * r + u * k + v * r;
                    }
                }
                let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
                for j in 0..l {
                    out[((gi * nh + hd) * l + i) * l + j] = (scores[j] - m).exp() / z;
                }
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub struct OracleReport {
    pub conv: f64,
    pub pool: f64,
    pub attention: f64,
    pub metrics: f64,
}

/// Worst absolute deviation from the direct-loop oracles over `cases`
/// random instances of each kind.
pub fn oracle_suite(cases: usize, seed: u64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = OracleReport {
        conv: 0.0,
        pool: 0.0,
        attention: 0.0,
        metrics: 0.0,
    };
    for _ in 0..cases {
        let spatial = rng.random_range(1..=2);
        let padding = if rng.random_bool(0.5) {
            Padding::Same
        } else {
            Padding::Valid
        };
        let (b, cin, cout) = (
            rng.random_range(1..=3),
            rng.random_range(1..=3),
            rng.random_range(1..=4),
        );
        let k = rng.random_range(1..=4);
        let (x, kern) = if spatial == 1 {
            let l = rng.random_range(k..=k + 6);
            (
                rand_tensor(&[b, l, cin], &mut rng),
                rand_tensor(&[k, cin, cout], &mut rng),
            )
        } else {
            let (h, w) = (rng.random_range(k..=k + 4), rng.random_range(k..=k + 4));
            (
                rand_tensor(&[b, h, w, cin], &mut rng),
                rand_tensor(&[k, k, cin, cout], &mut rng),
            )
        };
        let got = x.convolution(&kern, spatial, padding).unwrap();
        let want = naive_conv(&x, &kern, spatial, padding);
        assert_eq!(got.shape(), want.shape());
        rep.conv = rep.conv.max(max_abs_diff(got.data(), want.data()));

        let window: Vec<usize> = (0..spatial).map(|_| rng.random_range(1..=3)).collect();
        let kind = if rng.random_bool(0.5) {
            PoolKind::Max
        } else {
            PoolKind::Average
        };
        let got = x.pooling(&window, kind);
        if let Ok(got) = got {
            let want = naive_pool(&x, &window, kind);
            assert_eq!(got.shape(), want.shape());
            rep.pool = rep.pool.max(max_abs_diff(got.data(), want.data()));
        }

        let (heads, l, d, out) = (
            rng.random_range(1..=3),
            rng.random_range(1..=6),
            rng.random_range(1..=4),
            rng.random_range(1..=3),
        );
        let p = AttentionParams::random(heads, l, d, out, &mut rng);
        let xa = rand_tensor(&[rng.random_range(1..=3), l, d], &mut rng);
        let got = attention_probabilities(&p, &xa).unwrap();
        rep.attention = rep
            .attention
            .max(max_abs_diff(got.data(), &naive_attention_probs(&p, &xa)));

        let n = rng.random_range(1..=10_000);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..100.0)).collect();
        let yh: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..120.0)).collect();
        let m = compute_metrics(&y, &yh).unwrap();
        let (mut se, mut ape) = (0.0, 0.0);
        for i in 0..n {
            se += (y[i] - yh[i]) * (y[i] - yh[i]);
            ape += ((y[i] - yh[i]) / y[i]).abs();
        }
        let (mse, mape) = (se / n as f64, ape / n as f64);
        let d = [
            (m.mse - mse).abs() / mse.max(1.0),
            (m.mape - mape).abs(),
            (m.rmse - mse.sqrt()).abs(),
        ];
        rep.metrics = d.iter().cloned().fold(rep.metrics, f64::max);
    }
    rep
}

/// Offspring above this many multiply-accumulates per sample are only
/// shape-checked and never become parents, as under search, where the
/// trainer rejects them before allocating. Some would need gigabytes of
/// parameters or attention scores.
pub const FORWARD_MAC_CEILING: usize = 2_000_000;

#[derive(Debug, Default)]
pub struct ClosureReport {
    pub total: usize,
    /// Validated and shape-propagated.
    pub valid: usize,
    /// Built and ran a finite forward pass.
    pub ran: usize,
    /// Valid but above [`FORWARD_MAC_CEILING`].
    pub oversized: usize,
}

impl ClosureReport {
    pub fn all_ok(&self) -> bool {
        self.valid == self.total && self.ran + self.oversized == self.total
    }
}

/// Runs `mutations` seeded mutations and `crossovers` seeded crossovers on
/// random genotypes at `(h, f)`.
pub fn closure_suite(mutations: usize, crossovers: usize, h: usize, f: usize, seed: u64) -> ClosureReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = rand_tensor(&[1, h, f], &mut rng);
    let mut rep = ClosureReport::default();
    // True when `g` may become a parent.
    let mut check = |g: &Genotype| -> bool {
        rep.total += 1;
        let Ok(macs) = g.validate().and_then(|_| g.macs(f)) else {
            return false;
        };
        rep.valid += 1;
        if macs > FORWARD_MAC_CEILING {
            rep.oversized += 1;
            return false;
        }
        let ran = build_network(g, f, 0)
            .ok()
            .and_then(|mut n| n.predict(&x).ok())
            .is_some_and(|y| y.shape() == [1, h] && y.is_finite());
        rep.ran += usize::from(ran);
        ran
    };
    let mut pool: Vec<Genotype> = (0..32).map(|i| random_genotype(seed + i, h, f, 5)).collect();
    for i in 0..mutations {
        let parent = &pool[rng.random_range(0..pool.len())];
        let child = mutate_seeded(parent, rng.random());
        if check(&child) {
            let slot = i % pool.len();
            pool[slot] = child;
        }
    }
    for _ in 0..crossovers {
        let a = rng.random_range(0..pool.len());
        let b = rng.random_range(0..pool.len());
        let (c, d) = crossover_seeded(&pool[a], &pool[b], rng.random());
        if check(&c) {
            pool[a] = c;
        }
        if check(&d) {
            pool[b] = d;
        }
    }
    rep
}

/// Standardized synthetic benchmark at the given size.
pub fn bench_data(cfg: SynthConfig) -> LoadDataset {
    let d = synth_generate(&cfg).unwrap();
    standardize(&split_blocks(d, (0.7, 0.15, 0.15)).unwrap()).unwrap().0
}

/// Identity graphs and the dense head: a purely linear map `(H, F) -> H`.
pub fn linear_genotype(h: usize) -> Genotype {
    use dagforecast_core::genotype::{DagSpec, NodeSpec};
    use dagforecast_core::layers::CombinerKind;
    use dagforecast_core::tensor::UnaryFn;
    let identity = || {
        DagSpec::from_edges(
            vec![NodeSpec {
                combiner: CombinerKind::Add,
                layer: LayerSpec::Identity,
                activation: UnaryFn::Identity,
            }],
            &[(0, 1), (1, 2)],
        )
    };
    Genotype {
        h,
        gamma1: identity(),
        gamma2: identity(),
    }
}

/// Dataset with standard-normal features where `load(day, instant)` is
/// `target(features of that day)`; split 60/20/20, not standardized.
pub fn dataset_from(t: usize, h: usize, f: usize, seed: u64, target: impl Fn(&[f64], usize) -> f64) -> LoadDataset {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..t * h * f).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut y = Vec::with_capacity(t * h);
    for d in 0..t {
        let day = &x[d * h * f..(d + 1) * h * f];
        for i in 0..h {
            y.push(target(day, i));
        }
    }
    let names = (0..f).map(|j| format!("x{j}")).collect();
    let dates = (0..t).map(|d| format!("day{d}")).collect();
    split_blocks(LoadDataset::new(h, names, dates, x, y).unwrap(), (0.6, 0.2, 0.2)).unwrap()
}
