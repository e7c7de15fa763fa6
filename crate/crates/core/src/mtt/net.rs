//! Forward and reverse-mode passes for [`MttModel`].

use super::MttModel;
use crate::error::{Error, Result};
use crate::graph::HetGraph;

const LN_EPS: f64 = 1e-5;

/// Values recorded by a forward pass and consumed by [`MttModel::backward`].
#[derive(Debug, Default, Clone)]
pub struct Tape {
    cache: Option<Cache>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_recorded(&self) -> bool {
        self.cache.is_some()
    }

    pub fn clear(&mut self) {
        self.cache = None;
    }
}

/// Incoming neighbours of one destination node under one relation.
#[derive(Debug, Clone)]
struct Group {
    dst: usize,
    srcs: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Structure {
    n: usize,
    type_of: Vec<usize>,
    /// Per configured relation: groups plus the distinct destination and source nodes.
    groups: Vec<Vec<Group>>,
    dsts: Vec<Vec<usize>>,
    srcs: Vec<Vec<usize>>,
    actions: Vec<usize>,
    mask: Vec<bool>,
}

#[derive(Debug, Clone)]
struct LnCache {
    xhat: Vec<f64>,
    rstd: Vec<f64>,
}

#[derive(Debug, Clone)]
struct AttnCache {
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// Per group, `srcs.len() * heads` weights, source-major.
    alpha: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    ln1: LnCache,
    u: Vec<f64>,
    attn: Vec<AttnCache>,
    ln2: LnCache,
    w: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Cache {
    structure: Structure,
    features: Vec<Vec<f64>>,
    layers: Vec<LayerCache>,
    out: Vec<f64>,
}

fn gelu(x: f64) -> f64 {
    const A: f64 = 0.797_884_560_802_865_4;
    0.5 * x * (1.0 + (A * (x + 0.044_715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    const A: f64 = 0.797_884_560_802_865_4;
    let t = (A * (x + 0.044_715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * A * (1.0 + 3.0 * 0.044_715 * x * x)
}

/// `out = W x` for a row-major `rows x cols` matrix.
fn matvec(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

/// `dx += W^T dy` and `dW += dy x^T`.
fn linear_backward(w: &[f64], dw: &mut [f64], cols: usize, x: &[f64], dy: &[f64], dx: &mut [f64]) {
    for (r, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        let drow = &mut dw[r * cols..(r + 1) * cols];
        for c in 0..cols {
            dx[c] += row[c] * g;
            drow[c] += x[c] * g;
        }
    }
}

fn layer_norm(x: &[f64], d: usize, gain: &[f64], bias: &[f64]) -> (Vec<f64>, LnCache) {
    let n = x.len() / d;
    let mut y = vec![0.0; x.len()];
    let mut xhat = vec![0.0; x.len()];
    let mut rstd = vec![0.0; n];
    for i in 0..n {
        let row = &x[i * d..(i + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let r = 1.0 / (var + LN_EPS).sqrt();
        rstd[i] = r;
        for c in 0..d {
            let xh = (row[c] - mean) * r;
            xhat[i * d + c] = xh;
            y[i * d + c] = gain[c] * xh + bias[c];
        }
    }
    (y, LnCache { xhat, rstd })
}

/// Adds the input gradient to `dx` and accumulates gain/bias gradients.
fn layer_norm_backward(
    cache: &LnCache,
    d: usize,
    gain: &[f64],
    dy: &[f64],
    dgain: &mut [f64],
    dbias: &mut [f64],
    dx: &mut [f64],
) {
    let n = cache.rstd.len();
    let mut dxhat = vec![0.0; d];
    for i in 0..n {
        let xh = &cache.xhat[i * d..(i + 1) * d];
        let g = &dy[i * d..(i + 1) * d];
        for c in 0..d {
            dgain[c] += g[c] * xh[c];
            dbias[c] += g[c];
            dxhat[c] = g[c] * gain[c];
        }
        let mean_dxhat = dxhat.iter().sum::<f64>() / d as f64;
        let mean_dxhat_xhat = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
        for c in 0..d {
            dx[i * d + c] += cache.rstd[i] * (dxhat[c] - mean_dxhat - xh[c] * mean_dxhat_xhat);
        }
    }
}

impl MttModel {
    fn structure(&self, graph: &HetGraph) -> Result<Structure> {
        let n = graph.nodes.len();
        let type_of = graph
            .nodes
            .iter()
            .map(|node| {
                self.type_index(node.ty).ok_or_else(|| {
                    Error::MissingType(format!("node type {} is not configured", node.ty.name()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let n_rel = self.config.relations.len();
        // Per relation, per destination: incoming sources in edge order.
        let mut incoming: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); n]; n_rel];
        for e in &graph.edges {
            if e.src >= n || e.dst >= n {
                return Err(Error::InvalidArgument(format!("edge {e:?} references a missing node")));
            }
            let (s, t) = (graph.nodes[e.src].ty, graph.nodes[e.dst].ty);
            let r = self.relation_index(s, t).ok_or_else(|| {
                Error::MissingType(format!("attention type {}->{} is not configured", s.name(), t.name()))
            })?;
            incoming[r][e.dst].push(e.src);
        }
        let mut groups = Vec::with_capacity(n_rel);
        let mut dsts = Vec::with_capacity(n_rel);
        let mut srcs = Vec::with_capacity(n_rel);
        for per_dst in incoming {
            let mut g = Vec::new();
            let mut seen_src = vec![false; n];
            for (dst, s) in per_dst.into_iter().enumerate() {
                if s.is_empty() {
                    continue;
                }
                s.iter().for_each(|&j| seen_src[j] = true);
                g.push(Group { dst, srcs: s });
            }
            dsts.push(g.iter().map(|g| g.dst).collect());
            srcs.push((0..n).filter(|&j| seen_src[j]).collect());
            groups.push(g);
        }
        if graph.actions.len() != graph.mask.len() || graph.actions.iter().any(|&a| a >= n) {
            return Err(Error::InvalidArgument("malformed action list".into()));
        }
        Ok(Structure {
            n,
            type_of,
            groups,
            dsts,
            srcs,
            actions: graph.actions.clone(),
            mask: graph.mask.clone(),
        })
    }

    /// Action logits; masked actions score `-inf`.
    pub fn forward(&self, graph: &HetGraph) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        self.forward_with_tape(graph, &mut tape)
    }

    /// As [`forward`](Self::forward), recording what the backward pass needs.
    pub fn forward_with_tape(&self, graph: &HetGraph, tape: &mut Tape) -> Result<Vec<f64>> {
        tape.clear();
        let st = self.structure(graph)?;
        let d = self.config.embed_dim;
        let heads = self.config.n_heads;
        let hd = d / heads;
        let scale = 1.0 / (hd as f64).sqrt();
        let p = &self.params;
        let lay = &self.layout;
        let n = st.n;

        let mut h = vec![0.0; n * d];
        for (i, node) in graph.nodes.iter().enumerate() {
            let slots = lay.embed[st.type_of[i]];
            let width = node.ty.feature_width();
            if node.features.len() != width {
                return Err(Error::InvalidArgument(format!(
                    "node {i} has {} features, expected {width}",
                    node.features.len()
                )));
            }
            let out = &mut h[i * d..(i + 1) * d];
            matvec(&p[slots.weight..slots.weight + d * width], width, &node.features, out);
            for (o, b) in out.iter_mut().zip(&p[slots.bias..slots.bias + d]) {
                *o += b;
            }
        }

        let mut layers = Vec::with_capacity(lay.layers.len());
        for ls in &lay.layers {
            let (u, ln1) = layer_norm(&h, d, &p[ls.norm1_gain..][..d], &p[ls.norm1_bias..][..d]);
            let mut mid = h.clone();
            let mut attn = Vec::with_capacity(ls.attn.len());
            for (r, slots) in ls.attn.iter().enumerate() {
                let mut q = vec![0.0; n * d];
                let mut k = vec![0.0; n * d];
                let mut v = vec![0.0; n * d];
                for &i in &st.dsts[r] {
                    matvec(&p[slots.query..][..d * d], d, &u[i * d..][..d], &mut q[i * d..][..d]);
                }
                for &j in &st.srcs[r] {
                    matvec(&p[slots.key..][..d * d], d, &u[j * d..][..d], &mut k[j * d..][..d]);
                    matvec(&p[slots.value..][..d * d], d, &u[j * d..][..d], &mut v[j * d..][..d]);
                }
                let mut alpha = Vec::with_capacity(st.groups[r].len());
                for g in &st.groups[r] {
                    let mut a = vec![0.0; g.srcs.len() * heads];
                    for hh in 0..heads {
                        let qi = &q[g.dst * d + hh * hd..][..hd];
                        let mut max = f64::NEG_INFINITY;
                        for (s, &j) in g.srcs.iter().enumerate() {
                            let kj = &k[j * d + hh * hd..][..hd];
                            let e = scale * qi.iter().zip(kj).map(|(x, y)| x * y).sum::<f64>();
                            a[s * heads + hh] = e;
                            max = max.max(e);
                        }
                        let mut z = 0.0;
                        for s in 0..g.srcs.len() {
                            let e = (a[s * heads + hh] - max).exp();
                            a[s * heads + hh] = e;
                            z += e;
                        }
                        for (s, &j) in g.srcs.iter().enumerate() {
                            let w = a[s * heads + hh] / z;
                            a[s * heads + hh] = w;
                            let vj = &v[j * d + hh * hd..][..hd];
                            for (m, x) in mid[g.dst * d + hh * hd..][..hd].iter_mut().zip(vj) {
                                *m += w * x;
                            }
                        }
                    }
                    alpha.push(a);
                }
                attn.push(AttnCache { q, k, v, alpha });
            }

            let (w, ln2) = layer_norm(&mid, d, &p[ls.norm2_gain..][..d], &p[ls.norm2_bias..][..d]);
            let mut pre = vec![0.0; n * 2 * d];
            let mut act = vec![0.0; n * 2 * d];
            let mut out = mid.clone();
            let mut ff = vec![0.0; d];
            for i in 0..n {
                let pre_i = &mut pre[i * 2 * d..][..2 * d];
                matvec(&p[ls.ffn_w1..][..2 * d * d], d, &w[i * d..][..d], pre_i);
                for (x, b) in pre_i.iter_mut().zip(&p[ls.ffn_b1..][..2 * d]) {
                    *x += b;
                }
                let act_i = &mut act[i * 2 * d..][..2 * d];
                for (a, x) in act_i.iter_mut().zip(pre_i.iter()) {
                    *a = gelu(*x);
                }
                matvec(&p[ls.ffn_w2..][..2 * d * d], 2 * d, act_i, &mut ff);
                for ((o, f), b) in out[i * d..][..d].iter_mut().zip(&ff).zip(&p[ls.ffn_b2..][..d]) {
                    *o += f + b;
                }
            }
            layers.push(LayerCache { ln1, u, attn, ln2, w, pre, act });
            h = out;
        }

        let head_w = &p[lay.head_weight..][..d];
        let head_b = p[lay.head_bias];
        let mut logits = Vec::with_capacity(st.actions.len());
        for (&node, &ok) in st.actions.iter().zip(&st.mask) {
            let s = head_w.iter().zip(&h[node * d..][..d]).map(|(a, b)| a * b).sum::<f64>() + head_b;
            if s.is_nan() {
                return Err(Error::NumericalFault(format!("NaN logit at node {node}")));
            }
            logits.push(if ok { s } else { f64::NEG_INFINITY });
        }

        tape.cache = Some(Cache {
            structure: st,
            features: graph.nodes.iter().map(|n| n.features.clone()).collect(),
            layers,
            out: h,
        });
        Ok(logits)
    }

    /// Gradient of a scalar loss with respect to every parameter, given the
    /// loss gradient with respect to the logits. Entries for masked actions
    /// are ignored.
    pub fn backward(&self, tape: &Tape, dlogits: &[f64]) -> Result<Vec<f64>> {
        let mut grads = vec![0.0; self.layout.total];
        self.backward_into(tape, dlogits, &mut grads)?;
        Ok(grads)
    }

    /// As [`backward`](Self::backward), accumulating into `grads`.
    pub fn backward_into(&self, tape: &Tape, dlogits: &[f64], grads: &mut [f64]) -> Result<()> {
        let cache = tape
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("backward called without a recorded forward pass".into()))?;
        let st = &cache.structure;
        if dlogits.len() != st.actions.len() {
            return Err(Error::InvalidArgument(format!(
                "{} logit gradients for {} actions",
                dlogits.len(),
                st.actions.len()
            )));
        }
        if grads.len() != self.layout.total {
            return Err(Error::InvalidArgument("gradient buffer has the wrong length".into()));
        }
        let d = self.config.embed_dim;
        let heads = self.config.n_heads;
        let hd = d / heads;
        let scale = 1.0 / (hd as f64).sqrt();
        let p = &self.params;
        let lay = &self.layout;
        let n = st.n;

        let mut dh = vec![0.0; n * d];
        {
            let head_w = &p[lay.head_weight..][..d];
            for ((&node, &ok), &g) in st.actions.iter().zip(&st.mask).zip(dlogits) {
                if !ok || g == 0.0 {
                    continue;
                }
                grads[lay.head_bias] += g;
                for c in 0..d {
                    grads[lay.head_weight + c] += g * cache.out[node * d + c];
                    dh[node * d + c] += g * head_w[c];
                }
            }
        }

        for (ls, lc) in lay.layers.iter().zip(&cache.layers).rev() {
            // Feed-forward block: out = mid + W2 gelu(W1 ln2(mid) + b1) + b2.
            let mut dmid = dh.clone();
            let mut dw = vec![0.0; n * d];
            let mut dact = vec![0.0; 2 * d];
            let mut dpre = vec![0.0; 2 * d];
            for i in 0..n {
                let g = &dh[i * d..][..d];
                if g.iter().all(|&x| x == 0.0) {
                    continue;
                }
                for c in 0..d {
                    grads[ls.ffn_b2 + c] += g[c];
                }
                dact.iter_mut().for_each(|x| *x = 0.0);
                let (w2, dw2) = split_param(p, grads, ls.ffn_w2, 2 * d * d);
                linear_backward(w2, dw2, 2 * d, &lc.act[i * 2 * d..][..2 * d], g, &mut dact);
                for c in 0..2 * d {
                    dpre[c] = dact[c] * gelu_grad(lc.pre[i * 2 * d + c]);
                    grads[ls.ffn_b1 + c] += dpre[c];
                }
                let (w1, dw1) = split_param(p, grads, ls.ffn_w1, 2 * d * d);
                linear_backward(w1, dw1, d, &lc.w[i * d..][..d], &dpre, &mut dw[i * d..][..d]);
            }
            {
                let (gain, dgain, dbias) = ln_params(p, grads, ls.norm2_gain, ls.norm2_bias, d);
                layer_norm_backward(&lc.ln2, d, gain, &dw, dgain, dbias, &mut dmid);
            }

            // Attention block: mid = h + sum over relations of messages from ln1(h).
            let mut dprev = dmid.clone();
            let mut du = vec![0.0; n * d];
            for (r, (slots, ac)) in ls.attn.iter().zip(&lc.attn).enumerate() {
                let mut dq = vec![0.0; n * d];
                let mut dk = vec![0.0; n * d];
                let mut dv = vec![0.0; n * d];
                for (g, alpha) in st.groups[r].iter().zip(&ac.alpha) {
                    let dm = &dmid[g.dst * d..][..d];
                    for hh in 0..heads {
                        let dm_h = &dm[hh * hd..][..hd];
                        let mut dalpha = vec![0.0; g.srcs.len()];
                        for (s, &j) in g.srcs.iter().enumerate() {
                            let a = alpha[s * heads + hh];
                            let vj = &ac.v[j * d + hh * hd..][..hd];
                            dalpha[s] = dm_h.iter().zip(vj).map(|(x, y)| x * y).sum();
                            for (x, y) in dv[j * d + hh * hd..][..hd].iter_mut().zip(dm_h) {
                                *x += a * y;
                            }
                        }
                        let dot: f64 = (0..g.srcs.len()).map(|s| alpha[s * heads + hh] * dalpha[s]).sum();
                        for (s, &j) in g.srcs.iter().enumerate() {
                            let de = alpha[s * heads + hh] * (dalpha[s] - dot) * scale;
                            if de == 0.0 {
                                continue;
                            }
                            for c in 0..hd {
                                dq[g.dst * d + hh * hd + c] += de * ac.k[j * d + hh * hd + c];
                                dk[j * d + hh * hd + c] += de * ac.q[g.dst * d + hh * hd + c];
                            }
                        }
                    }
                }
                for &i in &st.dsts[r] {
                    let (wq, dwq) = split_param(p, grads, slots.query, d * d);
                    linear_backward(wq, dwq, d, &lc.u[i * d..][..d], &dq[i * d..][..d], &mut du[i * d..][..d]);
                }
                for &j in &st.srcs[r] {
                    let (wk, dwk) = split_param(p, grads, slots.key, d * d);
                    linear_backward(wk, dwk, d, &lc.u[j * d..][..d], &dk[j * d..][..d], &mut du[j * d..][..d]);
                    let (wv, dwv) = split_param(p, grads, slots.value, d * d);
                    linear_backward(wv, dwv, d, &lc.u[j * d..][..d], &dv[j * d..][..d], &mut du[j * d..][..d]);
                }
            }
            {
                let (gain, dgain, dbias) = ln_params(p, grads, ls.norm1_gain, ls.norm1_bias, d);
                layer_norm_backward(&lc.ln1, d, gain, &du, dgain, dbias, &mut dprev);
            }
            dh = dprev;
        }

        for (i, x) in cache.features.iter().enumerate() {
            let slots = lay.embed[st.type_of[i]];
            let width = x.len();
            let g = &dh[i * d..][..d];
            for r in 0..d {
                grads[slots.bias + r] += g[r];
                for c in 0..width {
                    grads[slots.weight + r * width + c] += g[r] * x[c];
                }
            }
        }
        Ok(())
    }
}

fn split_param<'a>(p: &'a [f64], grads: &'a mut [f64], offset: usize, len: usize) -> (&'a [f64], &'a mut [f64]) {
    (&p[offset..offset + len], &mut grads[offset..offset + len])
}

fn ln_params<'a>(
    p: &'a [f64],
    grads: &'a mut [f64],
    gain: usize,
    bias: usize,
    d: usize,
) -> (&'a [f64], &'a mut [f64], &'a mut [f64]) {
    // Layout places each bias directly after its gain.
    debug_assert_eq!(bias, gain + d);
    let (dg, db) = grads[gain..gain + 2 * d].split_at_mut(d);
    (&p[gain..gain + d], dg, db)
}
