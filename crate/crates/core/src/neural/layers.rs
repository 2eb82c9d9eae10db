//! Layers with hand-written backward passes. Sequences are row-major
//! `n x dim` slices holding only real (non-PAD) positions.

use rand_chacha::ChaCha8Rng;
use rand::Rng;

use super::tensor::{matvec, matvec_t, outer_add, sigmoid, softmax_in_place, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn new(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        Linear {
            weight: Tensor::glorot(outputs, inputs, rng),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.bias.data().to_vec();
        matvec(self.weight.data(), self.outputs(), self.inputs(), x, &mut y);
        y
    }

    pub fn backward(&mut self, x: &[f64], dy: &[f64]) -> Vec<f64> {
        let (rows, cols) = (self.outputs(), self.inputs());
        let mut dx = vec![0.0; cols];
        matvec_t(self.weight.data(), rows, cols, dy, &mut dx);
        outer_add(self.weight.grad_mut(), dy, x);
        for (g, d) in self.bias.grad_mut().iter_mut().zip(dy) {
            *g += d;
        }
        dx
    }
}

/// One filter width: ReLU convolution followed by max-over-time pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvPool {
    pub width: usize,
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    /// winning window start per map
    argmax: Vec<usize>,
    out: Vec<f64>,
}

impl ConvPool {
    pub fn new(width: usize, maps: usize, dim: usize, rng: &mut ChaCha8Rng) -> Self {
        ConvPool {
            width,
            weight: Tensor::glorot(maps, width * dim, rng),
            bias: Tensor::zeros(&[maps]),
        }
    }

    pub fn maps(&self) -> usize {
        self.weight.shape()[0]
    }

    fn dim(&self) -> usize {
        self.weight.shape()[1] / self.width
    }

    /// Window starting at `p`; rows past the sequence end read as zero.
    fn window(&self, x: &[f64], n: usize, p: usize) -> Vec<f64> {
        let d = self.dim();
        let mut w = vec![0.0; self.width * d];
        for j in 0..self.width {
            if p + j < n {
                w[j * d..(j + 1) * d].copy_from_slice(&x[(p + j) * d..(p + j + 1) * d]);
            }
        }
        w
    }

    fn positions(&self, n: usize) -> usize {
        (n + 1).saturating_sub(self.width).max(1)
    }

    pub fn forward(&self, x: &[f64], n: usize) -> (Vec<f64>, ConvCache) {
        let maps = self.maps();
        let cols = self.weight.shape()[1];
        let mut out = vec![f64::NEG_INFINITY; maps];
        let mut argmax = vec![0; maps];
        for p in 0..self.positions(n) {
            let win = self.window(x, n, p);
            let mut h = self.bias.data().to_vec();
            matvec(self.weight.data(), maps, cols, &win, &mut h);
            for m in 0..maps {
                let v = h[m].max(0.0);
                if v > out[m] {
                    out[m] = v;
                    argmax[m] = p;
                }
            }
        }
        (out.clone(), ConvCache { argmax, out })
    }

    pub fn backward(&mut self, x: &[f64], n: usize, cache: &ConvCache, dout: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let cols = self.weight.shape()[1];
        let mut dx = vec![0.0; n * d];
        for m in 0..self.maps() {
            if cache.out[m] <= 0.0 || dout[m] == 0.0 {
                continue;
            }
            let p = cache.argmax[m];
            let win = self.window(x, n, p);
            let g = dout[m];
            for (gw, xv) in self.weight.grad_mut()[m * cols..(m + 1) * cols].iter_mut().zip(&win) {
                *gw += g * xv;
            }
            self.bias.grad_mut()[m] += g;
            let wrow = &self.weight.data()[m * cols..(m + 1) * cols];
            for j in 0..self.width {
                if p + j < n {
                    for k in 0..d {
                        dx[(p + j) * d + k] += g * wrow[j * d + k];
                    }
                }
            }
        }
        dx
    }
}

/// Unidirectional LSTM with gate order input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub wx: Tensor,
    pub wh: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    /// per step: activated gates `[i f g o]` (4u)
    gates: Vec<Vec<f64>>,
    cells: Vec<Vec<f64>>,
    pub hidden: Vec<Vec<f64>>,
}

impl Lstm {
    pub fn new(inputs: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut bias = Tensor::zeros(&[4 * hidden]);
        bias.data_mut()[hidden..2 * hidden].fill(1.0);
        Lstm {
            wx: Tensor::glorot(4 * hidden, inputs, rng),
            wh: Tensor::glorot(4 * hidden, hidden, rng),
            bias,
        }
    }

    pub fn hidden(&self) -> usize {
        self.wh.shape()[1]
    }

    fn inputs(&self) -> usize {
        self.wx.shape()[1]
    }

    /// Runs over `order` (positions of `x`), returning states in that order.
    pub fn forward(&self, x: &[f64], order: &[usize]) -> LstmCache {
        let (u, m) = (self.hidden(), self.inputs());
        let mut h = vec![0.0; u];
        let mut c = vec![0.0; u];
        let mut cache = LstmCache {
            gates: Vec::with_capacity(order.len()),
            cells: Vec::with_capacity(order.len()),
            hidden: Vec::with_capacity(order.len()),
        };
        for &t in order {
            let mut a = self.bias.data().to_vec();
            matvec(self.wx.data(), 4 * u, m, &x[t * m..(t + 1) * m], &mut a);
            matvec(self.wh.data(), 4 * u, u, &h, &mut a);
            for k in 0..u {
                a[k] = sigmoid(a[k]);
                a[u + k] = sigmoid(a[u + k]);
                a[2 * u + k] = a[2 * u + k].tanh();
                a[3 * u + k] = sigmoid(a[3 * u + k]);
            }
            for k in 0..u {
                c[k] = a[u + k] * c[k] + a[k] * a[2 * u + k];
                h[k] = a[3 * u + k] * c[k].tanh();
            }
            cache.gates.push(a);
            cache.cells.push(c.clone());
            cache.hidden.push(h.clone());
        }
        cache
    }

    /// Backpropagation through time. `dh[s]` is the loss gradient of the
    /// state at step `s` of `order`; returns the gradient for `x`.
    pub fn backward(&mut self, x: &[f64], order: &[usize], cache: &LstmCache, dh: &[Vec<f64>]) -> Vec<f64> {
        let (u, m) = (self.hidden(), self.inputs());
        let mut dx = vec![0.0; x.len()];
        let mut dh_next = vec![0.0; u];
        let mut dc_next = vec![0.0; u];
        let zeros = vec![0.0; u];
        for s in (0..order.len()).rev() {
            let t = order[s];
            let a = &cache.gates[s];
            let c = &cache.cells[s];
            let c_prev = if s > 0 { &cache.cells[s - 1] } else { &zeros };
            let h_prev = if s > 0 { &cache.hidden[s - 1] } else { &zeros };
            let mut da = vec![0.0; 4 * u];
            for k in 0..u {
                let (i, f, g, o) = (a[k], a[u + k], a[2 * u + k], a[3 * u + k]);
                let dhk = dh[s][k] + dh_next[k];
                let tc = c[k].tanh();
                let dc = dhk * o * (1.0 - tc * tc) + dc_next[k];
                da[k] = dc * g * i * (1.0 - i);
                da[u + k] = dc * c_prev[k] * f * (1.0 - f);
                da[2 * u + k] = dc * i * (1.0 - g * g);
                da[3 * u + k] = dhk * tc * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
            let xt = &x[t * m..(t + 1) * m];
            outer_add(self.wx.grad_mut(), &da, xt);
            outer_add(self.wh.grad_mut(), &da, h_prev);
            for (g, d) in self.bias.grad_mut().iter_mut().zip(&da) {
                *g += d;
            }
            matvec_t(self.wx.data(), 4 * u, m, &da, &mut dx[t * m..(t + 1) * m]);
            dh_next.fill(0.0);
            matvec_t(self.wh.data(), 4 * u, u, &da, &mut dh_next);
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub forward: Lstm,
    pub backward: Lstm,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    fwd: LstmCache,
    bwd: LstmCache,
    /// `n x 2u`, forward state then backward state at each position
    pub states: Vec<f64>,
}

impl BiLstm {
    pub fn new(inputs: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        BiLstm {
            forward: Lstm::new(inputs, hidden, rng),
            backward: Lstm::new(inputs, hidden, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden()
    }

    pub fn run(&self, x: &[f64], n: usize) -> BiLstmCache {
        let u = self.hidden();
        let order: Vec<usize> = (0..n).collect();
        let rev: Vec<usize> = (0..n).rev().collect();
        let fwd = self.forward.forward(x, &order);
        let bwd = self.backward.forward(x, &rev);
        let mut states = vec![0.0; n * 2 * u];
        for t in 0..n {
            states[t * 2 * u..t * 2 * u + u].copy_from_slice(&fwd.hidden[t]);
            states[t * 2 * u + u..(t + 1) * 2 * u].copy_from_slice(&bwd.hidden[n - 1 - t]);
        }
        BiLstmCache { fwd, bwd, states }
    }

    /// `dstates` is `n x 2u`.
    pub fn backprop(&mut self, x: &[f64], n: usize, cache: &BiLstmCache, dstates: &[f64]) -> Vec<f64> {
        let u = self.hidden();
        let order: Vec<usize> = (0..n).collect();
        let rev: Vec<usize> = (0..n).rev().collect();
        let dh_f: Vec<Vec<f64>> = (0..n).map(|t| dstates[t * 2 * u..t * 2 * u + u].to_vec()).collect();
        let dh_b: Vec<Vec<f64>> = (0..n)
            .map(|s| {
                let t = n - 1 - s;
                dstates[t * 2 * u + u..(t + 1) * 2 * u].to_vec()
            })
            .collect();
        let mut dx = self.forward.backward(x, &order, &cache.fwd, &dh_f);
        let dxb = self.backward.backward(x, &rev, &cache.bwd, &dh_b);
        for (a, b) in dx.iter_mut().zip(dxb) {
            *a += b;
        }
        dx
    }
}

/// Structured self-attention: `A = rowsoftmax(W2 tanh(W1 H^T))`, `M = A H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub w1: Tensor,
    pub w2: Tensor,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    /// `d_a x n`
    s1: Vec<f64>,
    /// `r x n`
    pub a: Vec<f64>,
    n: usize,
}

impl Attention {
    pub fn new(inputs: usize, hidden: usize, rows: usize, rng: &mut ChaCha8Rng) -> Self {
        Attention {
            w1: Tensor::glorot(hidden, inputs, rng),
            w2: Tensor::glorot(rows, hidden, rng),
        }
    }

    pub fn rows(&self) -> usize {
        self.w2.shape()[0]
    }

    fn hidden(&self) -> usize {
        self.w1.shape()[0]
    }

    fn inputs(&self) -> usize {
        self.w1.shape()[1]
    }

    /// Returns `M` (`r x inputs`) and the cache holding `A`.
    pub fn forward(&self, h: &[f64], n: usize) -> (Vec<f64>, AttentionCache) {
        let (da, r, e) = (self.hidden(), self.rows(), self.inputs());
        let mut s1 = vec![0.0; da * n];
        for t in 0..n {
            let mut z = vec![0.0; da];
            matvec(self.w1.data(), da, e, &h[t * e..(t + 1) * e], &mut z);
            for k in 0..da {
                s1[k * n + t] = z[k].tanh();
            }
        }
        let mut a = vec![0.0; r * n];
        for i in 0..r {
            let w2 = &self.w2.data()[i * da..(i + 1) * da];
            for t in 0..n {
                a[i * n + t] = (0..da).map(|k| w2[k] * s1[k * n + t]).sum();
            }
            softmax_in_place(&mut a[i * n..(i + 1) * n]);
        }
        let mut m = vec![0.0; r * e];
        for i in 0..r {
            for t in 0..n {
                let w = a[i * n + t];
                for j in 0..e {
                    m[i * e + j] += w * h[t * e + j];
                }
            }
        }
        (m, AttentionCache { s1, a, n })
    }

    /// `||A A^T - I||_F^2` and its gradient with respect to `A`.
    pub fn penalty(a: &[f64], r: usize, n: usize) -> (f64, Vec<f64>) {
        let mut p = vec![0.0; r * r];
        for i in 0..r {
            for j in 0..r {
                let dot: f64 = (0..n).map(|t| a[i * n + t] * a[j * n + t]).sum();
                p[i * r + j] = dot - if i == j { 1.0 } else { 0.0 };
            }
        }
        let value = p.iter().map(|x| x * x).sum();
        let mut grad = vec![0.0; r * n];
        for i in 0..r {
            for t in 0..n {
                grad[i * n + t] = 4.0 * (0..r).map(|j| p[i * r + j] * a[j * n + t]).sum::<f64>();
            }
        }
        (value, grad)
    }

    /// `dm` is `r x inputs`; `penalty_coef` adds the redundancy penalty's gradient.
    pub fn backward(&mut self, h: &[f64], cache: &AttentionCache, dm: &[f64], penalty_coef: f64) -> Vec<f64> {
        let (da, r, e, n) = (self.hidden(), self.rows(), self.inputs(), cache.n);
        let a = &cache.a;
        let mut dh = vec![0.0; n * e];
        let mut d_a = vec![0.0; r * n];
        for i in 0..r {
            for t in 0..n {
                let mut s = 0.0;
                for j in 0..e {
                    s += dm[i * e + j] * h[t * e + j];
                    dh[t * e + j] += a[i * n + t] * dm[i * e + j];
                }
                d_a[i * n + t] = s;
            }
        }
        if penalty_coef != 0.0 {
            let (_, g) = Attention::penalty(a, r, n);
            for (x, y) in d_a.iter_mut().zip(g) {
                *x += penalty_coef * y;
            }
        }
        // softmax rows
        let mut ds = vec![0.0; r * n];
        for i in 0..r {
            let dot: f64 = (0..n).map(|t| a[i * n + t] * d_a[i * n + t]).sum();
            for t in 0..n {
                ds[i * n + t] = a[i * n + t] * (d_a[i * n + t] - dot);
            }
        }
        let mut dz1 = vec![0.0; da * n];
        {
            let w2 = self.w2.data().to_vec();
            let g2 = self.w2.grad_mut();
            for i in 0..r {
                for k in 0..da {
                    let mut s = 0.0;
                    for t in 0..n {
                        s += ds[i * n + t] * cache.s1[k * n + t];
                        dz1[k * n + t] += w2[i * da + k] * ds[i * n + t];
                    }
                    g2[i * da + k] += s;
                }
            }
        }
        for k in 0..da {
            for t in 0..n {
                let s = cache.s1[k * n + t];
                dz1[k * n + t] *= 1.0 - s * s;
            }
        }
        let w1 = self.w1.data().to_vec();
        let g1 = self.w1.grad_mut();
        for k in 0..da {
            for t in 0..n {
                let d = dz1[k * n + t];
                if d == 0.0 {
                    continue;
                }
                for j in 0..e {
                    g1[k * e + j] += d * h[t * e + j];
                    dh[t * e + j] += d * w1[k * e + j];
                }
            }
        }
        dh
    }
}

/// Inverted dropout mask: kept units are scaled by `1 / (1 - rate)`.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if rate <= 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn attention_rows_sum_to_one() {
        let mut rng = seed::rng(1);
        let att = Attention::new(4, 3, 2, &mut rng);
        let h: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let (_, cache) = att.forward(&h, 5);
        for i in 0..2 {
            let s: f64 = cache.a[i * 5..(i + 1) * 5].iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn penalty_vanishes_for_orthonormal_rows() {
        let a = [1.0, 0.0, 0.0, 1.0];
        let (v, g) = Attention::penalty(&a, 2, 2);
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn short_input_still_has_one_window() {
        let mut rng = seed::rng(2);
        let conv = ConvPool::new(5, 3, 2, &mut rng);
        let (out, _) = conv.forward(&[0.1, 0.2, 0.3, 0.4], 2);
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn dropout_keeps_expectation_scale() {
        let mut rng = seed::rng(3);
        let m = dropout_mask(10_000, 0.5, &mut rng);
        assert!(m.iter().all(|v| *v == 0.0 || *v == 2.0));
        let mean = m.iter().sum::<f64>() / 10_000.0;
        assert!((mean - 1.0).abs() < 0.05);
    }
}
