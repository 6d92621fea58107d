//! Forward and backward numeric kernels on raw row-major buffers.

use super::{check_shape, strides, Result, Tensor, TensorError};
use crate::exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Only windows fully inside the input.
    Valid,
    /// Zero padding so each spatial extent is preserved.
    Same,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    Max,
    Average,
}

/// `out (m×n) += a (m×k) · b (k×n)`.
pub(crate) fn gemm_acc(out: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(out.len(), m * n);
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    exec::for_each_chunk(out, n, m * k * n, |i, row| {
        let arow = &a[i * k..(i + 1) * k];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    });
}

pub(crate) fn transpose2(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = a[r * cols + c];
        }
    }
    t
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
        return Err(TensorError::Shape {
            op: "matmul",
            lhs: sa.to_vec(),
            rhs: sb.to_vec(),
        });
    }
    let (m, k, n) = (sa[0], sa[1], sb[1]);
    let mut out = vec![0.0; m * n];
    gemm_acc(&mut out, a.data(), b.data(), m, k, n);
    Tensor::new(vec![m, n], out)
}

/// Gradients of `a·b` given upstream `g`, accumulated into `ga` / `gb`.
pub(crate) fn matmul_backward(
    a: &[f64],
    b: &[f64],
    g: &[f64],
    (m, k, n): (usize, usize, usize),
    ga: Option<&mut [f64]>,
    gb: Option<&mut [f64]>,
) {
    if let Some(ga) = ga {
        let bt = transpose2(b, k, n);
        gemm_acc(ga, g, &bt, m, n, k);
    }
    if let Some(gb) = gb {
        let at = transpose2(a, m, k);
        gemm_acc(gb, &at, g, k, m, n);
    }
}

pub fn bmm(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] || sa[2] != sb[1] {
        return Err(TensorError::Shape {
            op: "bmm",
            lhs: sa.to_vec(),
            rhs: sb.to_vec(),
        });
    }
    let (g, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
    let mut out = vec![0.0; g * m * n];
    let (ad, bd) = (a.data(), b.data());
    exec::for_each_chunk(&mut out, m * n, g * m * k * n, |i, o| {
        let ai = &ad[i * m * k..(i + 1) * m * k];
        let bi = &bd[i * k * n..(i + 1) * k * n];
        for r in 0..m {
            let orow = &mut o[r * n..(r + 1) * n];
            for (p, &av) in ai[r * k..(r + 1) * k].iter().enumerate() {
                for (x, &bv) in orow.iter_mut().zip(&bi[p * n..(p + 1) * n]) {
                    *x += av * bv;
                }
            }
        }
    });
    Tensor::new(vec![g, m, n], out)
}

pub(crate) fn bmm_backward(
    a: &[f64],
    b: &[f64],
    g: &[f64],
    (batch, m, k, n): (usize, usize, usize, usize),
    mut ga: Option<&mut [f64]>,
    mut gb: Option<&mut [f64]>,
) {
    for i in 0..batch {
        let ai = &a[i * m * k..(i + 1) * m * k];
        let bi = &b[i * k * n..(i + 1) * k * n];
        let gi = &g[i * m * n..(i + 1) * m * n];
        matmul_backward(
            ai,
            bi,
            gi,
            (m, k, n),
            ga.as_deref_mut().map(|s| &mut s[i * m * k..(i + 1) * m * k]),
            gb.as_deref_mut().map(|s| &mut s[i * k * n..(i + 1) * k * n]),
        );
    }
}

/// Splits `shape` around `axis` into (outer, len, inner).
pub(crate) fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

pub fn softmax(x: &Tensor, axis: usize) -> Result<Tensor> {
    if axis >= x.rank() {
        return Err(TensorError::Axis {
            op: "softmax",
            axis,
            rank: x.rank(),
        });
    }
    let (outer, len, inner) = axis_split(x.shape(), axis);
    let xd = x.data();
    let mut out = vec![0.0; xd.len()];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * len * inner + i;
            let mut mx = f64::NEG_INFINITY;
            for j in 0..len {
                mx = mx.max(xd[base + j * inner]);
            }
            let mut sum = 0.0;
            for j in 0..len {
                let e = (xd[base + j * inner] - mx).exp();
                out[base + j * inner] = e;
                sum += e;
            }
            for j in 0..len {
                out[base + j * inner] /= sum;
            }
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

pub(crate) fn softmax_backward(y: &[f64], g: &[f64], shape: &[usize], axis: usize, gx: &mut [f64]) {
    let (outer, len, inner) = axis_split(shape, axis);
    for o in 0..outer {
        for i in 0..inner {
            let base = o * len * inner + i;
            let mut dot = 0.0;
            for j in 0..len {
                dot += y[base + j * inner] * g[base + j * inner];
            }
            for j in 0..len {
                let idx = base + j * inner;
                gx[idx] += y[idx] * (g[idx] - dot);
            }
        }
    }
}

/// Geometry of a channels-last 2D convolution (1D is the `h = 1` case).
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub h: usize,
    pub w: usize,
    pub cin: usize,
    pub kh: usize,
    pub kw: usize,
    pub cout: usize,
    pub oh: usize,
    pub ow: usize,
    pub pad_h: usize,
    pub pad_w: usize,
}

pub(crate) fn conv_geom(xs: &[usize], ks: &[usize], spatial_rank: usize, padding: Padding) -> Result<ConvGeom> {
    let bad = || TensorError::Shape {
        op: "convolution",
        lhs: xs.to_vec(),
        rhs: ks.to_vec(),
    };
    let (batch, h, w, cin, kh, kw, kcin, cout) = match spatial_rank {
        1 if xs.len() == 3 && ks.len() == 3 => (xs[0], 1, xs[1], xs[2], 1, ks[0], ks[1], ks[2]),
        2 if xs.len() == 4 && ks.len() == 4 => (xs[0], xs[1], xs[2], xs[3], ks[0], ks[1], ks[2], ks[3]),
        _ => return Err(bad()),
    };
    if kcin != cin {
        return Err(bad());
    }
    let (oh, ow, pad_h, pad_w) = match padding {
        Padding::Same => (h, w, (kh - 1) / 2, (kw - 1) / 2),
        Padding::Valid => {
            if kh > h || kw > w {
                return Err(bad());
            }
            (h - kh + 1, w - kw + 1, 0, 0)
        }
    };
    Ok(ConvGeom {
        batch,
        h,
        w,
        cin,
        kh,
        kw,
        cout,
        oh,
        ow,
        pad_h,
        pad_w,
    })
}

/// Cross-correlation over the spatial axes of a channels-last input.
///
/// `spatial_rank = 1`: `x (B, L, Cin)`, `kernel (K, Cin, Cout)`.
/// `spatial_rank = 2`: `x (B, H, W, Cin)`, `kernel (KH, KW, Cin, Cout)`.
pub fn convolution(x: &Tensor, kernel: &Tensor, spatial_rank: usize, padding: Padding) -> Result<Tensor> {
    let g = conv_geom(x.shape(), kernel.shape(), spatial_rank, padding)?;
    let out = conv_forward(x.data(), kernel.data(), &g);
    let shape = if spatial_rank == 1 {
        vec![g.batch, g.ow, g.cout]
    } else {
        vec![g.batch, g.oh, g.ow, g.cout]
    };
    Tensor::new(shape, out)
}

#[inline]
fn src_index(o: usize, k: usize, pad: usize, n: usize) -> Option<usize> {
    let i = (o + k).checked_sub(pad)?;
    (i < n).then_some(i)
}

pub(crate) fn conv_forward(x: &[f64], k: &[f64], g: &ConvGeom) -> Vec<f64> {
    let per_batch = g.oh * g.ow * g.cout;
    let mut out = vec![0.0; g.batch * per_batch];
    let work = g.batch * per_batch * g.kh * g.kw * g.cin;
    exec::for_each_chunk(&mut out, per_batch, work, |b, ob| {
        let xb = &x[b * g.h * g.w * g.cin..(b + 1) * g.h * g.w * g.cin];
        for oh in 0..g.oh {
            for ow in 0..g.ow {
                let orow = &mut ob[(oh * g.ow + ow) * g.cout..(oh * g.ow + ow + 1) * g.cout];
                for kh in 0..g.kh {
                    let Some(ih) = src_index(oh, kh, g.pad_h, g.h) else {
                        continue;
                    };
                    for kw in 0..g.kw {
                        let Some(iw) = src_index(ow, kw, g.pad_w, g.w) else {
                            continue;
                        };
                        let xrow = &xb[(ih * g.w + iw) * g.cin..(ih * g.w + iw + 1) * g.cin];
                        let kbase = (kh * g.kw + kw) * g.cin * g.cout;
                        for (ci, &xv) in xrow.iter().enumerate() {
                            let krow = &k[kbase + ci * g.cout..kbase + (ci + 1) * g.cout];
                            for (o, &kv) in orow.iter_mut().zip(krow) {
                                *o += xv * kv;
                            }
                        }
                    }
                }
            }
        }
    });
    out
}

pub(crate) fn conv_backward(
    x: &[f64],
    k: &[f64],
    gout: &[f64],
    g: &ConvGeom,
    gx: Option<&mut [f64]>,
    gk: Option<&mut [f64]>,
) {
    let per_in = g.h * g.w * g.cin;
    let per_out = g.oh * g.ow * g.cout;
    let work = g.batch * per_out * g.kh * g.kw * g.cin;
    if let Some(gx) = gx {
        exec::for_each_chunk(gx, per_in, work, |b, gxb| {
            let gb = &gout[b * per_out..(b + 1) * per_out];
            for oh in 0..g.oh {
                for ow in 0..g.ow {
                    let grow = &gb[(oh * g.ow + ow) * g.cout..(oh * g.ow + ow + 1) * g.cout];
                    for kh in 0..g.kh {
                        let Some(ih) = src_index(oh, kh, g.pad_h, g.h) else {
                            continue;
                        };
                        for kw in 0..g.kw {
                            let Some(iw) = src_index(ow, kw, g.pad_w, g.w) else {
                                continue;
                            };
                            let kbase = (kh * g.kw + kw) * g.cin * g.cout;
                            let xi = (ih * g.w + iw) * g.cin;
                            for ci in 0..g.cin {
                                let krow = &k[kbase + ci * g.cout..kbase + (ci + 1) * g.cout];
                                let mut acc = 0.0;
                                for (&gv, &kv) in grow.iter().zip(krow) {
                                    acc += gv * kv;
                                }
                                gxb[xi + ci] += acc;
                            }
                        }
                    }
                }
            }
        });
    }
    if let Some(gk) = gk {
        // One chunk per kernel tap; each sums over batch and positions in a fixed order.
        exec::for_each_chunk(gk, g.cin * g.cout, work, |tap, gkt| {
            let (kh, kw) = (tap / g.kw, tap % g.kw);
            for b in 0..g.batch {
                let xb = &x[b * per_in..(b + 1) * per_in];
                let gb = &gout[b * per_out..(b + 1) * per_out];
                for oh in 0..g.oh {
                    let Some(ih) = src_index(oh, kh, g.pad_h, g.h) else {
                        continue;
                    };
                    for ow in 0..g.ow {
                        let Some(iw) = src_index(ow, kw, g.pad_w, g.w) else {
                            continue;
                        };
                        let grow = &gb[(oh * g.ow + ow) * g.cout..(oh * g.ow + ow + 1) * g.cout];
                        let xrow = &xb[(ih * g.w + iw) * g.cin..(ih * g.w + iw + 1) * g.cin];
                        for (ci, &xv) in xrow.iter().enumerate() {
                            let dst = &mut gkt[ci * g.cout..(ci + 1) * g.cout];
                            for (d, &gv) in dst.iter_mut().zip(grow) {
                                *d += xv * gv;
                            }
                        }
                    }
                }
            }
        });
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PoolGeom {
    pub batch: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub wh: usize,
    pub ww: usize,
    pub oh: usize,
    pub ow: usize,
}

pub(crate) fn pool_geom(xs: &[usize], window: &[usize]) -> Result<PoolGeom> {
    let bad = || TensorError::Shape {
        op: "pooling",
        lhs: xs.to_vec(),
        rhs: window.to_vec(),
    };
    let (batch, h, w, c, wh, ww) = match (xs.len(), window.len()) {
        (3, 1) => (xs[0], 1, xs[1], xs[2], 1, window[0]),
        (4, 2) => (xs[0], xs[1], xs[2], xs[3], window[0], window[1]),
        _ => return Err(bad()),
    };
    if wh == 0 || ww == 0 || wh > h || ww > w {
        return Err(bad());
    }
    Ok(PoolGeom {
        batch,
        h,
        w,
        c,
        wh,
        ww,
        oh: h / wh,
        ow: w / ww,
    })
}

/// Non-overlapping pooling (stride = window) over the spatial axes of a
/// channels-last input: `(B, L, C)` with a 1-element window or
/// `(B, H, W, C)` with a 2-element window. Trailing partial windows are dropped.
pub fn pooling(x: &Tensor, window: &[usize], kind: PoolKind) -> Result<Tensor> {
    let g = pool_geom(x.shape(), window)?;
    let out = pool_forward(x.data(), &g, kind);
    let shape = if window.len() == 1 {
        vec![g.batch, g.ow, g.c]
    } else {
        vec![g.batch, g.oh, g.ow, g.c]
    };
    Tensor::new(shape, out)
}

pub(crate) fn pool_forward(x: &[f64], g: &PoolGeom, kind: PoolKind) -> Vec<f64> {
    let mut out = vec![0.0; g.batch * g.oh * g.ow * g.c];
    let area = (g.wh * g.ww) as f64;
    for b in 0..g.batch {
        for oh in 0..g.oh {
            for ow in 0..g.ow {
                for ch in 0..g.c {
                    let mut acc = match kind {
                        PoolKind::Max => f64::NEG_INFINITY,
                        PoolKind::Average => 0.0,
                    };
                    for i in 0..g.wh {
                        for j in 0..g.ww {
                            let v = x[((b * g.h + oh * g.wh + i) * g.w + ow * g.ww + j) * g.c + ch];
                            match kind {
                                PoolKind::Max => {
                                    if v > acc {
                                        acc = v
                                    }
                                }
                                PoolKind::Average => acc += v,
                            }
                        }
                    }
                    if kind == PoolKind::Average {
                        acc /= area;
                    }
                    out[((b * g.oh + oh) * g.ow + ow) * g.c + ch] = acc;
                }
            }
        }
    }
    out
}

pub(crate) fn pool_backward(x: &[f64], gout: &[f64], g: &PoolGeom, kind: PoolKind, gx: &mut [f64]) {
    let area = (g.wh * g.ww) as f64;
    for b in 0..g.batch {
        for oh in 0..g.oh {
            for ow in 0..g.ow {
                for ch in 0..g.c {
                    let gv = gout[((b * g.oh + oh) * g.ow + ow) * g.c + ch];
                    let idx = |i: usize, j: usize| ((b * g.h + oh * g.wh + i) * g.w + ow * g.ww + j) * g.c + ch;
                    match kind {
                        PoolKind::Average => {
                            for i in 0..g.wh {
                                for j in 0..g.ww {
                                    gx[idx(i, j)] += gv / area;
                                }
                            }
                        }
                        PoolKind::Max => {
                            // first maximum in scan order takes the gradient
                            let mut best = idx(0, 0);
                            for i in 0..g.wh {
                                for j in 0..g.ww {
                                    if x[idx(i, j)] > x[best] {
                                        best = idx(i, j);
                                    }
                                }
                            }
                            gx[best] += gv;
                        }
                    }
                }
            }
        }
    }
}

/// Maps each output linear index of `permute(shape, perm)` to its source index.
pub(crate) fn permute_index_map(shape: &[usize], perm: &[usize]) -> Vec<usize> {
    let src_strides = strides(shape);
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let n: usize = shape.iter().product();
    let mut map = Vec::with_capacity(n);
    let mut idx = vec![0usize; out_shape.len()];
    for _ in 0..n {
        let src: usize = idx.iter().zip(perm).map(|(&i, &p)| i * src_strides[p]).sum();
        map.push(src);
        for d in (0..idx.len()).rev() {
            idx[d] += 1;
            if idx[d] < out_shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    map
}

pub(crate) fn check_perm(shape: &[usize], perm: &[usize]) -> Result<()> {
    let mut seen = vec![false; shape.len()];
    let ok = perm.len() == shape.len()
        && perm
            .iter()
            .all(|&p| p < shape.len() && !std::mem::replace(&mut seen[p], true));
    if ok {
        Ok(())
    } else {
        Err(TensorError::Shape {
            op: "permute",
            lhs: shape.to_vec(),
            rhs: perm.to_vec(),
        })
    }
}

/// Source index for every element of `to` when broadcasting `from` (same rank,
/// extents equal or 1).
pub(crate) fn broadcast_index_map(from: &[usize], to: &[usize]) -> Result<Vec<usize>> {
    if from.len() != to.len() || from.iter().zip(to).any(|(&f, &t)| f != t && f != 1) {
        return Err(TensorError::Shape {
            op: "broadcast",
            lhs: from.to_vec(),
            rhs: to.to_vec(),
        });
    }
    check_shape(to)?;
    let fs = strides(from);
    let n: usize = to.iter().product();
    let mut map = Vec::with_capacity(n);
    let mut idx = vec![0usize; to.len()];
    for _ in 0..n {
        let src: usize = (0..to.len())
            .map(|d| if from[d] == 1 { 0 } else { idx[d] * fs[d] })
            .sum();
        map.push(src);
        for d in (0..idx.len()).rev() {
            idx[d] += 1;
            if idx[d] < to[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(map)
}

/// Sum over `axis`, keeping it with extent 1.
pub(crate) fn sum_axis(x: &[f64], shape: &[usize], axis: usize) -> Vec<f64> {
    let (outer, len, inner) = axis_split(shape, axis);
    let mut out = vec![0.0; outer * inner];
    for o in 0..outer {
        for j in 0..len {
            let src = &x[(o * len + j) * inner..(o * len + j + 1) * inner];
            for (d, &v) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                *d += v;
            }
        }
    }
    out
}

/// Index map placing each element of `small` inside a zero-initialized `big`
/// (same rank, `small[d] <= big[d]`, aligned at the origin).
pub(crate) fn pad_index_map(small: &[usize], big: &[usize]) -> Result<Vec<usize>> {
    if small.len() != big.len() || small.iter().zip(big).any(|(s, b)| s > b) {
        return Err(TensorError::Shape {
            op: "pad",
            lhs: small.to_vec(),
            rhs: big.to_vec(),
        });
    }
    let bs = strides(big);
    let n: usize = small.iter().product();
    let mut map = Vec::with_capacity(n);
    let mut idx = vec![0usize; small.len()];
    for _ in 0..n {
        map.push(idx.iter().zip(&bs).map(|(i, s)| i * s).sum());
        for d in (0..idx.len()).rev() {
            idx[d] += 1;
            if idx[d] < small[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(map)
}

/// `table (P, 2L-1, C)` to `(P, L, L, C)` with `out[p, q, k] = table[p, k - q + L - 1]`.
pub(crate) fn relative_gather(table: &[f64], p: usize, l: usize, c: usize) -> Vec<f64> {
    let span = 2 * l - 1;
    let mut out = vec![0.0; p * l * l * c];
    for pi in 0..p {
        for q in 0..l {
            for k in 0..l {
                let r = k + l - 1 - q;
                let src = &table[(pi * span + r) * c..(pi * span + r + 1) * c];
                out[((pi * l + q) * l + k) * c..((pi * l + q) * l + k + 1) * c].copy_from_slice(src);
            }
        }
    }
    out
}

pub(crate) fn relative_scatter(g: &[f64], p: usize, l: usize, c: usize, gt: &mut [f64]) {
    let span = 2 * l - 1;
    for pi in 0..p {
        for q in 0..l {
            for k in 0..l {
                let r = k + l - 1 - q;
                let src = &g[((pi * l + q) * l + k) * c..((pi * l + q) * l + k + 1) * c];
                for (d, &v) in gt[(pi * span + r) * c..(pi * span + r + 1) * c].iter_mut().zip(src) {
                    *d += v;
                }
            }
        }
    }
}

/// Per-row standardization of an `(R, M)` buffer. Returns outputs and each
/// row's inverse standard deviation.
pub(crate) fn standardize_rows(x: &[f64], rows: usize, m: usize, eps: f64) -> (Vec<f64>, Vec<f64>) {
    let mut y = vec![0.0; x.len()];
    let mut inv = vec![0.0; rows];
    for r in 0..rows {
        let xr = &x[r * m..(r + 1) * m];
        let mean = xr.iter().sum::<f64>() / m as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
        let is = 1.0 / (var + eps).sqrt();
        inv[r] = is;
        for (d, &v) in y[r * m..(r + 1) * m].iter_mut().zip(xr) {
            *d = (v - mean) * is;
        }
    }
    (y, inv)
}

pub(crate) fn standardize_rows_backward(y: &[f64], inv: &[f64], g: &[f64], m: usize, gx: &mut [f64]) {
    for (r, &is) in inv.iter().enumerate() {
        let yr = &y[r * m..(r + 1) * m];
        let gr = &g[r * m..(r + 1) * m];
        let mg = gr.iter().sum::<f64>() / m as f64;
        let mgy = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / m as f64;
        for ((d, &gv), &yv) in gx[r * m..(r + 1) * m].iter_mut().zip(gr).zip(yr) {
            *d += is * (gv - mg - yv * mgy);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn matmul_identity_and_scalar() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(&[3, 3], &mut rng);
        assert_eq!(Tensor::eye(3).matmul(&a).unwrap(), a);
        let p = Tensor::new(vec![1, 1], vec![2.0]).unwrap();
        let q = Tensor::new(vec![1, 1], vec![3.0]).unwrap();
        assert_eq!(p.matmul(&q).unwrap().data(), &[6.0]);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(&[4, 3], &mut rng);
        let b = random(&[3, 5], &mut rng);
        let c = a.matmul(&b).unwrap();
        for i in 0..4 {
            for j in 0..5 {
                let mut s = 0.0;
                for p in 0..3 {
                    s += a.data()[i * 3 + p] * b.data()[p * 5 + j];
                }
                assert!((c.data()[i * 5 + j] - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matmul_shape_error_names_both() {
        let err = Tensor::zeros(&[2, 3]).matmul(&Tensor::zeros(&[4, 2])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[4, 2]"), "{msg}");
    }

    #[test]
    fn conv_valid_length_and_delta_kernel() {
        let x = Tensor::from_vec((0..8).map(f64::from).collect())
            .reshape(&[1, 8, 1])
            .unwrap();
        let k = Tensor::from_vec(vec![1.0, 1.0, 1.0]).reshape(&[3, 1, 1]).unwrap();
        let y = x.convolution(&k, 1, Padding::Valid).unwrap();
        assert_eq!(y.shape(), &[1, 6, 1]);
        assert_eq!(y.data()[0], 3.0);
        // size-1 kernel mixes channels only
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(&[2, 5, 3], &mut rng);
        let k = random(&[1, 3, 2], &mut rng);
        let y = x.convolution(&k, 1, Padding::Valid).unwrap();
        let mix = x
            .clone()
            .reshape(&[10, 3])
            .unwrap()
            .matmul(&k.clone().reshape(&[3, 2]).unwrap())
            .unwrap();
        for (a, b) in y.data().iter().zip(mix.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_rejects_oversized_kernel() {
        let x = Tensor::zeros(&[1, 2, 1]);
        let k = Tensor::zeros(&[3, 1, 1]);
        assert!(x.convolution(&k, 1, Padding::Valid).is_err());
        assert!(x.convolution(&k, 1, Padding::Same).is_ok());
    }

    #[test]
    fn pooling_examples() {
        let x = Tensor::from_vec(vec![1.0, 5.0, 2.0, 9.0]).reshape(&[1, 4, 1]).unwrap();
        assert_eq!(x.pooling(&[2], PoolKind::Max).unwrap().data(), &[5.0, 9.0]);
        let c = Tensor::full(&[2, 4, 6, 3], 1.7);
        let p = c.pooling(&[2, 3], PoolKind::Average).unwrap();
        assert_eq!(p.shape(), &[2, 2, 2, 3]);
        assert!(p.data().iter().all(|v| (v - 1.7).abs() < 1e-15));
        assert!(x.pooling(&[5], PoolKind::Max).is_err());
    }

    #[test]
    fn softmax_examples() {
        let u = Tensor::full(&[2, 4], 0.3).softmax(1).unwrap();
        assert!(u.data().iter().all(|v| (v - 0.25).abs() < 1e-15));
        let r = Tensor::from_vec(vec![0.0, 3f64.ln()]).softmax(0).unwrap();
        assert!((r.data()[0] - 0.25).abs() < 1e-12 && (r.data()[1] - 0.75).abs() < 1e-12);
        assert!(r.softmax(1).is_err());
    }

    #[test]
    fn relative_gather_roundtrip_counts() {
        let l = 3;
        let table: Vec<f64> = (0..(2 * l - 1)).map(|v| v as f64).collect();
        let out = relative_gather(&table, 1, l, 1);
        // out[q][k] = k - q + 2
        assert_eq!(out, vec![2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 0.0, 1.0, 2.0]);
        let mut gt = vec![0.0; 2 * l - 1];
        relative_scatter(&vec![1.0; 9], 1, l, 1, &mut gt);
        assert_eq!(gt, vec![1.0, 2.0, 3.0, 2.0, 1.0]);
    }
}
