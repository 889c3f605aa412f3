//! Dense feed-forward networks with hand-written backprop, Adam, soft target
//! updates and a small binary checkpoint format.

use std::io::{Read, Write};

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CKPT_HEADER: &str = "vecmec-ckpt-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Sigmoid,
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Sigmoid => z.mapv_inplace(|v| 1.0 / (1.0 + (-v).exp())),
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Linear => {}
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }

    fn code(self) -> u32 {
        match self {
            Activation::Sigmoid => 0,
            Activation::Relu => 1,
            Activation::Linear => 2,
        }
    }

    fn from_code(c: u32) -> Result<Self> {
        match c {
            0 => Ok(Activation::Sigmoid),
            1 => Ok(Activation::Relu),
            2 => Ok(Activation::Linear),
            _ => Err(Error::Checkpoint(format!("unknown activation code {c}"))),
        }
    }
}

/// `w` is stored fan_in × fan_out so a batch forward is `x·w + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub act: Activation,
}

impl Layer {
    pub fn fan_in(&self) -> usize {
        self.w.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.w.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    pub layers: Vec<Layer>,
}

/// Activations saved by [`DenseNet::forward_cached`]; `acts[0]` is the input.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    acts: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("cache holds the input at least")
    }
}

/// Parameter gradients, one `(dw, db)` per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Grads {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.w.raw_dim()), Array1::zeros(l.b.raw_dim())))
                .collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (dw, db) in &self.layers {
            out.extend(dw.iter());
            out.extend(db.iter());
        }
        out
    }
}

impl DenseNet {
    /// `sizes` has one more entry than `acts`. Weights and biases are drawn
    /// uniformly from ±1/√fan_in.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], acts: &[Activation], rng: &mut R) -> Self {
        assert_eq!(sizes.len(), acts.len() + 1, "one activation per layer");
        let layers = sizes
            .windows(2)
            .zip(acts)
            .map(|(d, &act)| {
                let bound = 1.0 / (d[0] as f64).sqrt();
                Layer {
                    w: Array2::from_shape_fn((d[0], d[1]), |_| rng.gen_range(-bound..=bound)),
                    b: Array1::from_shape_fn(d[1], |_| rng.gen_range(-bound..=bound)),
                    act,
                }
            })
            .collect();
        Self { layers }
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map_or(0, Layer::fan_out)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(x.ncols(), self.input_len(), "input width");
        let mut h = x.to_owned();
        for l in &self.layers {
            let mut z = h.dot(&l.w) + &l.b;
            l.act.apply(&mut z);
            h = z;
        }
        h
    }

    /// Single-sample convenience wrapper.
    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        let x = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        self.forward(x).into_raw_vec_and_offset().0
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> ForwardCache {
        assert_eq!(x.ncols(), self.input_len(), "input width");
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for l in &self.layers {
            let mut z = acts.last().unwrap().dot(&l.w) + &l.b;
            l.act.apply(&mut z);
            acts.push(z);
        }
        ForwardCache { acts }
    }

    /// Reverse pass for a scalar loss whose gradient w.r.t. the output batch
    /// is `grad_out`. Returns parameter gradients and the input gradient.
    pub fn backward(&self, cache: &ForwardCache, grad_out: ArrayView2<f64>) -> (Grads, Array2<f64>) {
        assert_eq!(cache.acts.len(), self.layers.len() + 1, "cache from this net");
        let mut g = grad_out.to_owned();
        let mut layers = Vec::with_capacity(self.layers.len());
        for (k, l) in self.layers.iter().enumerate().rev() {
            let y = &cache.acts[k + 1];
            if l.act != Activation::Linear {
                g.zip_mut_with(y, |gv, &yv| *gv *= l.act.grad_from_output(yv));
            }
            let x = &cache.acts[k];
            let dw = x.t().dot(&g);
            let db = g.sum_axis(Axis(0));
            let gx = g.dot(&l.w.t());
            layers.push((dw, db));
            g = gx;
        }
        layers.reverse();
        (Grads { layers }, g)
    }

    /// Parameters flattened layer by layer, weights row-major then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count(), "parameter count");
        let mut k = 0;
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = p[k];
                k += 1;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    /// `self ← τ·main + (1−τ)·self`.
    pub fn soft_update(&mut self, main: &DenseNet, tau: f64) {
        assert_eq!(self.layers.len(), main.layers.len(), "layer count");
        for (t, m) in self.layers.iter_mut().zip(&main.layers) {
            t.w.zip_mut_with(&m.w, |a, &b| *a = tau * b + (1.0 - tau) * *a);
            t.b.zip_mut_with(&m.b, |a, &b| *a = tau * b + (1.0 - tau) * *a);
        }
    }

    /// Largest absolute parameter difference.
    pub fn max_abs_diff(&self, other: &DenseNet) -> f64 {
        self.params()
            .iter()
            .zip(other.params())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(CKPT_HEADER.as_bytes())?;
        out.write_all(b"\n")?;
        out.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for l in &self.layers {
            for v in [l.fan_in() as u32, l.fan_out() as u32, l.act.code()] {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        for v in self.params() {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self> {
        let mut header = vec![0u8; CKPT_HEADER.len() + 1];
        input.read_exact(&mut header)?;
        if &header[..CKPT_HEADER.len()] != CKPT_HEADER.as_bytes() || header[CKPT_HEADER.len()] != b'\n' {
            return Err(Error::Checkpoint("bad header".into()));
        }
        let mut u32s = |n: usize| -> Result<Vec<u32>> {
            let mut buf = vec![0u8; 4 * n];
            input.read_exact(&mut buf)?;
            Ok(buf.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect())
        };
        let n = u32s(1)?[0] as usize;
        let dims = u32s(3 * n)?;
        let mut layers = Vec::with_capacity(n);
        for d in dims.chunks_exact(3) {
            let (fi, fo) = (d[0] as usize, d[1] as usize);
            if let Some(prev) = layers.last().map(Layer::fan_out) {
                if prev != fi {
                    return Err(Error::Checkpoint(format!("layer sizes do not chain: {prev} -> {fi}")));
                }
            }
            layers.push(Layer { w: Array2::zeros((fi, fo)), b: Array1::zeros(fo), act: Activation::from_code(d[2])? });
        }
        let mut net = DenseNet { layers };
        let mut buf = vec![0u8; 8 * net.param_count()];
        input.read_exact(&mut buf)?;
        let p: Vec<f64> = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        net.set_params(&p);
        Ok(net)
    }
}

/// Adam with the usual (0.9, 0.999, 1e-8) constants.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Grads,
    v: Grads,
}

impl Adam {
    pub fn new(net: &DenseNet, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: Grads::zeros_like(net), v: Grads::zeros_like(net) }
    }

    /// Descends along `grads`.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Grads) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let (lr, eps) = (self.lr, self.eps);
        let update = |p: f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            p - lr * (*m / c1) / ((*v / c2).sqrt() + eps)
        };
        for (k, l) in net.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[k];
            let (mw, mb) = &mut self.m.layers[k];
            let (vw, vb) = &mut self.v.layers[k];
            ndarray::Zip::from(&mut l.w).and(gw).and(mw).and(vw).for_each(|p, &g, m, v| *p = update(*p, g, m, v));
            ndarray::Zip::from(&mut l.b).and(gb).and(mb).and(vb).for_each(|p, &g, m, v| *p = update(*p, g, m, v));
        }
    }
}

/// Layer widths of a centralized critic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CriticShape {
    pub state_in: usize,
    pub action_in: usize,
    pub state_hidden: usize,
    pub action_hidden: usize,
    pub hidden: usize,
}

/// Two-branch Q network: state branch (two ReLU layers) and action branch
/// (one ReLU layer) concatenated into two ReLU layers and a linear scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub state: DenseNet,
    pub action: DenseNet,
    pub head: DenseNet,
}

#[derive(Debug, Clone)]
pub struct CriticCache {
    state: ForwardCache,
    action: ForwardCache,
    head: ForwardCache,
}

impl CriticCache {
    pub fn q(&self) -> &Array2<f64> {
        self.head.output()
    }
}

#[derive(Debug, Clone)]
pub struct CriticGrads {
    pub state: Grads,
    pub action: Grads,
    pub head: Grads,
}

impl CriticGrads {
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.state.flat();
        v.extend(self.action.flat());
        v.extend(self.head.flat());
        v
    }
}

impl Critic {
    pub fn new<R: Rng + ?Sized>(shape: CriticShape, rng: &mut R) -> Self {
        use Activation::*;
        let CriticShape { state_in, action_in, state_hidden: sh, action_hidden: ah, hidden: h } = shape;
        Self {
            state: DenseNet::new(&[state_in, sh, sh], &[Relu, Relu], rng),
            action: DenseNet::new(&[action_in, ah], &[Relu], rng),
            head: DenseNet::new(&[sh + ah, h, h, 1], &[Relu, Relu, Linear], rng),
        }
    }

    pub fn forward(&self, s: ArrayView2<f64>, a: ArrayView2<f64>) -> Array2<f64> {
        let hs = self.state.forward(s);
        let ha = self.action.forward(a);
        self.head.forward(concatenate![Axis(1), hs, ha].view())
    }

    pub fn forward_cached(&self, s: ArrayView2<f64>, a: ArrayView2<f64>) -> CriticCache {
        let state = self.state.forward_cached(s);
        let action = self.action.forward_cached(a);
        let joined = concatenate![Axis(1), *state.output(), *action.output()];
        let head = self.head.forward_cached(joined.view());
        CriticCache { state, action, head }
    }

    /// Returns parameter gradients and the gradient w.r.t. the action input.
    pub fn backward(&self, cache: &CriticCache, grad_q: ArrayView2<f64>) -> (CriticGrads, Array2<f64>) {
        let (head, gj) = self.head.backward(&cache.head, grad_q);
        let sh = self.state.output_len();
        let (state, _) = self.state.backward(&cache.state, gj.slice(s![.., ..sh]));
        let (action, ga) = self.action.backward(&cache.action, gj.slice(s![.., sh..]));
        (CriticGrads { state, action, head }, ga)
    }

    pub fn soft_update(&mut self, main: &Critic, tau: f64) {
        self.state.soft_update(&main.state, tau);
        self.action.soft_update(&main.action, tau);
        self.head.soft_update(&main.head, tau);
    }

    pub fn params(&self) -> Vec<f64> {
        let mut v = self.state.params();
        v.extend(self.action.params());
        v.extend(self.head.params());
        v
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let a = self.state.param_count();
        let b = a + self.action.param_count();
        self.state.set_params(&p[..a]);
        self.action.set_params(&p[a..b]);
        self.head.set_params(&p[b..]);
    }

    pub fn is_finite(&self) -> bool {
        self.state.is_finite() && self.action.is_finite() && self.head.is_finite()
    }
}

/// Adam state for the three critic parts.
#[derive(Debug, Clone)]
pub struct CriticAdam {
    state: Adam,
    action: Adam,
    head: Adam,
}

impl CriticAdam {
    pub fn new(c: &Critic, lr: f64) -> Self {
        Self { state: Adam::new(&c.state, lr), action: Adam::new(&c.action, lr), head: Adam::new(&c.head, lr) }
    }

    pub fn step(&mut self, c: &mut Critic, g: &CriticGrads) {
        self.state.step(&mut c.state, &g.state);
        self.action.step(&mut c.action, &g.action);
        self.head.step(&mut c.head, &g.head);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_batch(r: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, d), |_| r.gen_range(-1.0..1.0))
    }

    /// Plain per-sample loops, no ndarray products.
    fn naive_forward(net: &DenseNet, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for l in &net.layers {
            let mut out = vec![0.0; l.fan_out()];
            for (j, o) in out.iter_mut().enumerate() {
                let mut z = l.b[j];
                for (i, hi) in h.iter().enumerate() {
                    z += hi * l.w[[i, j]];
                }
                *o = match l.act {
                    Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
                    Activation::Relu => z.max(0.0),
                    Activation::Linear => z,
                };
            }
            h = out;
        }
        h
    }

    #[test]
    fn zero_net_with_sigmoid_outputs_half() {
        let mut net = DenseNet::new(&[3, 4, 2], &[Activation::Sigmoid, Activation::Sigmoid], &mut rng(0));
        net.set_params(&vec![0.0; net.param_count()]);
        assert_eq!(net.forward_one(&[1.0, -2.0, 3.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn identity_layer() {
        let mut net = DenseNet::new(&[3, 3], &[Activation::Linear], &mut rng(0));
        net.layers[0].w = Array2::eye(3);
        net.layers[0].b.fill(0.0);
        assert_eq!(net.forward_one(&[0.25, -7.0, 3.5]), vec![0.25, -7.0, 3.5]);
    }

    #[test]
    fn matches_naive_evaluation() {
        let mut r = rng(1);
        let net = DenseNet::new(&[5, 7, 6, 3], &[Activation::Sigmoid, Activation::Relu, Activation::Linear], &mut r);
        let x = random_batch(&mut r, 100, 5);
        let y = net.forward(x.view());
        for (row, out) in x.rows().into_iter().zip(y.rows()) {
            let want = naive_forward(&net, row.as_slice().unwrap());
            for (a, b) in out.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn linear_squared_loss_closed_form() {
        let mut r = rng(2);
        let net = DenseNet::new(&[3, 2], &[Activation::Linear], &mut r);
        let x = array![[0.5, -1.0, 2.0]];
        let y = array![[1.0, -1.0]];
        let cache = net.forward_cached(x.view());
        let resid = cache.output() - &y;
        let (g, _) = net.backward(&cache, (2.0 * &resid).view());
        // 2(Wx+b−y)xᵀ, transposed to the fan_in × fan_out layout
        let want = x.t().dot(&(2.0 * &resid));
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-14);
        assert!(close(g.layers[0].0.as_slice().unwrap(), want.as_slice().unwrap()));
        assert!(close(g.layers[0].1.as_slice().unwrap(), (2.0 * &resid.row(0)).as_slice().unwrap()));
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut r = rng(3);
        let net = DenseNet::new(&[4, 5, 2], &[Activation::Sigmoid, Activation::Sigmoid], &mut r);
        let cache = net.forward_cached(random_batch(&mut r, 3, 4).view());
        let (g, gx) = net.backward(&cache, Array2::zeros((3, 2)).view());
        assert!(g.flat().iter().all(|&v| v == 0.0));
        assert!(gx.iter().all(|&v| v == 0.0));
    }

    fn fd_check(loss: impl Fn(&[f64]) -> f64, p: &[f64], analytic: &[f64]) -> f64 {
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let mut q = p.to_vec();
        for k in 0..p.len() {
            q[k] = p[k] + h;
            let up = loss(&q);
            q[k] = p[k] - h;
            let dn = loss(&q);
            q[k] = p[k];
            let fd = (up - dn) / (2.0 * h);
            let err = (fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(1e-6);
            worst = worst.max(err);
        }
        worst
    }

    #[test]
    fn actor_gradients_match_finite_differences() {
        let mut r = rng(4);
        for _ in 0..10 {
            let net = DenseNet::new(&[6, 8, 8, 3], &[Activation::Sigmoid; 3], &mut r);
            let x = random_batch(&mut r, 4, 6);
            let c = random_batch(&mut r, 4, 3);
            let cache = net.forward_cached(x.view());
            let (g, gx) = net.backward(&cache, c.view());
            let loss_p = |p: &[f64]| {
                let mut n = net.clone();
                n.set_params(p);
                (n.forward(x.view()) * &c).sum()
            };
            assert!(fd_check(loss_p, &net.params(), &g.flat()) < 1e-4);
            let loss_x = |v: &[f64]| {
                let xv = Array2::from_shape_vec((4, 6), v.to_vec()).unwrap();
                (net.forward(xv.view()) * &c).sum()
            };
            let xs: Vec<f64> = x.iter().copied().collect();
            assert!(fd_check(loss_x, &xs, &gx.iter().copied().collect::<Vec<_>>()) < 1e-4);
        }
    }

    #[test]
    fn critic_gradients_match_finite_differences() {
        let mut r = rng(5);
        let shape = CriticShape { state_in: 5, action_in: 4, state_hidden: 6, action_hidden: 3, hidden: 7 };
        for _ in 0..10 {
            let critic = Critic::new(shape, &mut r);
            let s = random_batch(&mut r, 3, 5);
            let a = random_batch(&mut r, 3, 4);
            let c = random_batch(&mut r, 3, 1);
            let cache = critic.forward_cached(s.view(), a.view());
            let (g, ga) = critic.backward(&cache, c.view());
            let loss_p = |p: &[f64]| {
                let mut n = critic.clone();
                n.set_params(p);
                (n.forward(s.view(), a.view()) * &c).sum()
            };
            assert!(fd_check(loss_p, &critic.params(), &g.flat()) < 1e-4);
            let loss_a = |v: &[f64]| {
                let av = Array2::from_shape_vec((3, 4), v.to_vec()).unwrap();
                (critic.forward(s.view(), av.view()) * &c).sum()
            };
            let av: Vec<f64> = a.iter().copied().collect();
            assert!(fd_check(loss_a, &av, &ga.iter().copied().collect::<Vec<_>>()) < 1e-4);
        }
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut net = DenseNet::new(&[1, 1], &[Activation::Linear], &mut rng(6));
        net.set_params(&[0.0, 0.0]);
        let mut opt = Adam::new(&net, 1e-3);
        let g = Grads { layers: vec![(array![[3.7]], array![-0.2])] };
        opt.step(&mut net, &g);
        let p = net.params();
        assert!((p[0] + 1e-3).abs() < 1e-9);
        assert!((p[1] - 1e-3).abs() < 1e-9);
        assert_eq!(opt.t, 1);
        let before = net.params();
        let mut fresh = Adam::new(&net, 1e-3);
        let zero = Grads::zeros_like(&net);
        fresh.step(&mut net, &zero);
        assert_eq!(net.params(), before);
    }

    #[test]
    fn adam_descends_quadratic_bowl() {
        let mut net = DenseNet::new(&[1, 4], &[Activation::Linear], &mut rng(7));
        let target: Vec<f64> = (0..net.param_count()).map(|k| k as f64 * 0.1 - 0.3).collect();
        let mut opt = Adam::new(&net, 0.01);
        let loss = |p: &[f64]| p.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let mut prev = f64::INFINITY;
        for step in 0..500 {
            let p = net.params();
            let l = loss(&p);
            if step >= 20 {
                assert!(l <= prev + 1e-12, "step {step}: {l} > {prev}");
            }
            prev = l;
            let grad: Vec<f64> = p.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
            let mut g = Grads::zeros_like(&net);
            let (dw, db) = &mut g.layers[0];
            dw.iter_mut().chain(db.iter_mut()).zip(&grad).for_each(|(d, v)| *d = *v);
            opt.step(&mut net, &g);
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn soft_update_law() {
        let mut r = rng(8);
        let main = DenseNet::new(&[2, 3], &[Activation::Relu], &mut r);
        let mut target = main.clone();
        target.set_params(&vec![0.0; main.param_count()]);
        let mut one = main.clone();
        one.set_params(&vec![1.0; main.param_count()]);
        let mut t1 = target.clone();
        t1.soft_update(&one, 0.005);
        assert!(t1.params().iter().all(|&v| (v - 0.005).abs() < 1e-15));

        let mut same = main.clone();
        same.soft_update(&main, 0.005);
        assert_eq!(same, main);

        let d0 = target.max_abs_diff(&main);
        for k in 1..=200 {
            target.soft_update(&main, 0.005);
            let want = d0 * 0.995f64.powi(k);
            assert!((target.max_abs_diff(&main) - want).abs() <= 1e-9 * want);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let net = DenseNet::new(&[4, 5, 2], &[Activation::Sigmoid, Activation::Linear], &mut rng(9));
        let mut buf = Vec::new();
        net.write_to(&mut buf).unwrap();
        assert!(buf.starts_with(b"vecmec-ckpt-v1\n"));
        let back = DenseNet::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, net);
        buf[0] = b'x';
        assert!(matches!(DenseNet::read_from(&mut buf.as_slice()), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn same_seed_same_weights() {
        let a = DenseNet::new(&[3, 4], &[Activation::Relu], &mut rng(10));
        let b = DenseNet::new(&[3, 4], &[Activation::Relu], &mut rng(10));
        assert_eq!(a, b);
    }
}
