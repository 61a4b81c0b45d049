//! Dense tanh MLP over a flat parameter slice, with manual backprop.
//!
//! Layer `l` stores `W_l` row-major as `[out][in]`, followed by `b_l`.

use rand_distr::{Distribution, Normal};

use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    /// Layer widths including input and output, e.g. `[5, 64, 64, 1]`.
    pub sizes: Vec<usize>,
}

/// Pre-activations are not needed: tanh' is recovered from the outputs.
#[derive(Debug, Clone, Default)]
pub struct Cache {
    /// `acts[0]` is the input; `acts[l]` the output of layer `l`.
    pub acts: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn new(sizes: Vec<usize>) -> Self {
        assert!(sizes.len() >= 2);
        Self { sizes }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("nonempty")
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// `(in, out)` per layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        self.sizes.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Gaussian init scaled by `1/sqrt(fan_in)`, zero biases; the last layer
    /// is further scaled by `out_gain`.
    pub fn init(&self, rng: &mut Rng, out_gain: f64) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        let n = self.sizes.len() - 1;
        for (l, (i, o)) in self.layer_shapes().into_iter().enumerate() {
            let gain = if l + 1 == n { out_gain } else { 1.0 };
            let d = Normal::new(0.0, gain / (i as f64).sqrt()).expect("valid std");
            p.extend((0..i * o).map(|_| d.sample(rng)));
            p.extend(std::iter::repeat_n(0.0, o));
        }
        p
    }

    pub fn forward(&self, params: &[f64], x: &[f64], cache: &mut Cache) -> Vec<f64> {
        debug_assert_eq!(params.len(), self.param_count());
        let n = self.sizes.len() - 1;
        cache.acts.resize(n + 1, Vec::new());
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(x);
        let mut off = 0;
        for l in 0..n {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            let (w, rest) = params[off..].split_at(i * o);
            let b = &rest[..o];
            off += i * o + o;
            let (prev, next) = cache.acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut next[0];
            out.clear();
            for j in 0..o {
                let row = &w[j * i..(j + 1) * i];
                let z = b[j] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                out.push(if l + 1 < n { z.tanh() } else { z });
            }
        }
        cache.acts[n].clone()
    }

    /// Accumulate `dL/dparams` into `grad` given `dL/doutput`.
    pub fn backward(&self, params: &[f64], cache: &Cache, d_out: &[f64], grad: &mut [f64]) {
        let n = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n);
        let mut off = 0;
        for l in 0..n {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut delta = d_out.to_vec();
        for l in (0..n).rev() {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            if l + 1 < n {
                // Through tanh: y' = 1 - y^2.
                for (d, y) in delta.iter_mut().zip(&cache.acts[l + 1]) {
                    *d *= 1.0 - y * y;
                }
            }
            let base = offsets[l];
            let input = &cache.acts[l];
            let (gw, gb) = grad[base..base + i * o + o].split_at_mut(i * o);
            for j in 0..o {
                let dj = delta[j];
                gb[j] += dj;
                for (g, x) in gw[j * i..(j + 1) * i].iter_mut().zip(input) {
                    *g += dj * x;
                }
            }
            if l > 0 {
                let w = &params[base..base + i * o];
                let mut prev = vec![0.0; i];
                for j in 0..o {
                    let dj = delta[j];
                    for (p, wv) in prev.iter_mut().zip(&w[j * i..(j + 1) * i]) {
                        *p += wv * dj;
                    }
                }
                delta = prev;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn backward_matches_finite_differences() {
        let net = Mlp::new(vec![3, 5, 4, 2]);
        let mut rng = seed::rng(1, &[]);
        let p = net.init(&mut rng, 1.0);
        let x = [0.3, -0.7, 1.1];
        let w = [0.6, -1.3];
        let loss = |p: &[f64]| {
            let y = net.forward(p, &x, &mut Cache::default());
            y[0] * w[0] + y[1] * w[1]
        };
        let mut cache = Cache::default();
        net.forward(&p, &x, &mut cache);
        let mut g = vec![0.0; p.len()];
        net.backward(&p, &cache, &w, &mut g);
        for k in 0..p.len() {
            let h = 1e-6;
            let mut a = p.clone();
            let mut b = p.clone();
            a[k] += h;
            b[k] -= h;
            let fd = (loss(&a) - loss(&b)) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-7 + 1e-5 * fd.abs(), "param {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn param_count_matches_layout() {
        let net = Mlp::new(vec![5, 64, 64, 1]);
        assert_eq!(net.param_count(), 5 * 64 + 64 + 64 * 64 + 64 + 64 + 1);
    }
}
