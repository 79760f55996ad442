//! Two-hidden-layer perceptron with exact GELU activations, trained with
//! binary cross-entropy on logits.
//!
//! All parameters live in one flat vector (`w1, b1, w2, b2, w3, b3`, weight
//! matrices row-major with one row per output unit) so the optimizer and the
//! finite-difference checks can treat them uniformly.

use std::ops::Range;

use rand::Rng;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `x * Phi(x)` with `Phi` the standard normal CDF.
pub fn gelu(x: f64) -> f64 {
    x * normal_cdf(x)
}

pub fn gelu_grad(x: f64) -> f64 {
    normal_cdf(x) + x * FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

/// Numerically stable `-[y ln s(l) + (1-y) ln(1 - s(l))]`.
pub fn bce_with_logits(logit: f64, y: f64) -> f64 {
    logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tensor {
    W1,
    B1,
    W2,
    B2,
    W3,
    B3,
}

impl Tensor {
    pub const ALL: [Tensor; 6] = [
        Tensor::W1,
        Tensor::B1,
        Tensor::W2,
        Tensor::B2,
        Tensor::W3,
        Tensor::B3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tensor::W1 => "w1",
            Tensor::B1 => "b1",
            Tensor::W2 => "w2",
            Tensor::B2 => "b2",
            Tensor::W3 => "w3",
            Tensor::B3 => "b3",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    in_dim: usize,
    h1: usize,
    h2: usize,
    params: Vec<f64>,
}

/// Scratch buffers for one forward/backward pass.
#[derive(Debug, Clone)]
pub struct Workspace {
    a1: Vec<f64>,
    z1: Vec<f64>,
    a2: Vec<f64>,
    z2: Vec<f64>,
    d2: Vec<f64>,
    d1: Vec<f64>,
}

impl Mlp {
    pub fn param_count(in_dim: usize, h1: usize, h2: usize) -> usize {
        h1 * in_dim + h1 + h2 * h1 + h2 + h2 + 1
    }

    pub fn zeros(in_dim: usize, h1: usize, h2: usize) -> Self {
        Mlp {
            in_dim,
            h1,
            h2,
            params: vec![0.0; Self::param_count(in_dim, h1, h2)],
        }
    }

    /// Every weight and bias of a layer uniform in `±1/sqrt(fan_in)`.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, h1: usize, h2: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(in_dim, h1, h2);
        for (t, fan_in) in [
            (Tensor::W1, in_dim),
            (Tensor::B1, in_dim),
            (Tensor::W2, h1),
            (Tensor::B2, h1),
            (Tensor::W3, h2),
            (Tensor::B3, h2),
        ] {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            let r = m.range(t);
            for p in &mut m.params[r] {
                *p = rng.random_range(-bound..=bound);
            }
        }
        m
    }

    /// Rebuilds a network from a flat parameter vector.
    pub fn from_params(in_dim: usize, h1: usize, h2: usize, params: Vec<f64>) -> Option<Self> {
        (params.len() == Self::param_count(in_dim, h1, h2)).then_some(Mlp {
            in_dim,
            h1,
            h2,
            params,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn hidden(&self) -> (usize, usize) {
        (self.h1, self.h2)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn range(&self, t: Tensor) -> Range<usize> {
        let (i, h1, h2) = (self.in_dim, self.h1, self.h2);
        let w1 = 0..h1 * i;
        let b1 = w1.end..w1.end + h1;
        let w2 = b1.end..b1.end + h2 * h1;
        let b2 = w2.end..w2.end + h2;
        let w3 = b2.end..b2.end + h2;
        let b3 = w3.end..w3.end + 1;
        match t {
            Tensor::W1 => w1,
            Tensor::B1 => b1,
            Tensor::W2 => w2,
            Tensor::B2 => b2,
            Tensor::W3 => w3,
            Tensor::B3 => b3,
        }
    }

    pub fn tensor(&self, t: Tensor) -> &[f64] {
        &self.params[self.range(t)]
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            a1: vec![0.0; self.h1],
            z1: vec![0.0; self.h1],
            a2: vec![0.0; self.h2],
            z2: vec![0.0; self.h2],
            d2: vec![0.0; self.h2],
            d1: vec![0.0; self.h1],
        }
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut ws = self.workspace();
        self.forward_with(x, &mut ws)
    }

    /// Forward pass keeping pre- and post-activations in `ws`.
    pub fn forward_with(&self, x: &[f64], ws: &mut Workspace) -> f64 {
        debug_assert_eq!(x.len(), self.in_dim);
        let w1 = self.tensor(Tensor::W1);
        let b1 = self.tensor(Tensor::B1);
        for j in 0..self.h1 {
            let row = &w1[j * self.in_dim..(j + 1) * self.in_dim];
            let a = b1[j] + dot(row, x);
            ws.a1[j] = a;
            ws.z1[j] = gelu(a);
        }
        let w2 = self.tensor(Tensor::W2);
        let b2 = self.tensor(Tensor::B2);
        for k in 0..self.h2 {
            let row = &w2[k * self.h1..(k + 1) * self.h1];
            let a = b2[k] + dot(row, &ws.z1);
            ws.a2[k] = a;
            ws.z2[k] = gelu(a);
        }
        self.tensor(Tensor::B3)[0] + dot(self.tensor(Tensor::W3), &ws.z2)
    }

    /// Adds `dlogit * d(logit)/d(params)` into `grad`, using the activations
    /// left in `ws` by the preceding `forward_with(x, ws)`.
    pub fn backward_with(&self, x: &[f64], dlogit: f64, ws: &mut Workspace, grad: &mut [f64]) {
        let (h1, h2, n_in) = (self.h1, self.h2, self.in_dim);
        let r_w1 = self.range(Tensor::W1);
        let r_b1 = self.range(Tensor::B1);
        let r_w2 = self.range(Tensor::W2);
        let r_b2 = self.range(Tensor::B2);
        let r_w3 = self.range(Tensor::W3);
        let r_b3 = self.range(Tensor::B3);

        grad[r_b3.start] += dlogit;
        let w3 = self.tensor(Tensor::W3);
        let g_w3 = &mut grad[r_w3];
        for k in 0..h2 {
            g_w3[k] += dlogit * ws.z2[k];
            ws.d2[k] = dlogit * w3[k] * gelu_grad(ws.a2[k]);
        }
        for (g, d) in grad[r_b2].iter_mut().zip(&ws.d2) {
            *g += d;
        }

        let w2 = self.tensor(Tensor::W2);
        ws.d1.iter_mut().for_each(|v| *v = 0.0);
        {
            let g_w2 = &mut grad[r_w2];
            for k in 0..h2 {
                let dk = ws.d2[k];
                if dk == 0.0 {
                    continue;
                }
                let g_row = &mut g_w2[k * h1..(k + 1) * h1];
                axpy(dk, &ws.z1, g_row);
                axpy(dk, &w2[k * h1..(k + 1) * h1], &mut ws.d1);
            }
        }
        for j in 0..h1 {
            ws.d1[j] *= gelu_grad(ws.a1[j]);
        }
        for (g, d) in grad[r_b1].iter_mut().zip(&ws.d1) {
            *g += d;
        }
        let g_w1 = &mut grad[r_w1];
        for j in 0..h1 {
            let dj = ws.d1[j];
            if dj == 0.0 {
                continue;
            }
            axpy(dj, x, &mut g_w1[j * n_in..(j + 1) * n_in]);
        }
    }

    /// Mean BCE-with-logits over the batch; overwrites `grad` with its gradient.
    pub fn loss_and_grad(&self, xs: &[&[f64]], ys: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut ws = self.workspace();
        let scale = 1.0 / xs.len() as f64;
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let logit = self.forward_with(x, &mut ws);
            loss += bce_with_logits(logit, y);
            let dlogit = (crate::simworld::sigmoid(logit) - y) * scale;
            self.backward_with(x, dlogit, &mut ws, grad);
        }
        loss * scale
    }

    /// Mean BCE-with-logits without gradients.
    pub fn loss(&self, xs: &[&[f64]], ys: &[f64]) -> f64 {
        let mut ws = self.workspace();
        let total: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, &y)| bce_with_logits(self.forward_with(x, &mut ws), y))
            .sum();
        total / xs.len() as f64
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Per-tensor relative error between backprop and central differences.
///
/// `coords` optionally restricts the check to a subset of flat parameter
/// indices (all indices when `None`). Error is `|g_bp - g_fd| / max(|g_bp|, |g_fd|)`
/// over the checked coordinates of each tensor, with Euclidean norms.
pub fn gradient_check(
    model: &Mlp,
    xs: &[&[f64]],
    ys: &[f64],
    step: f64,
    coords: Option<&[usize]>,
) -> Vec<(Tensor, f64)> {
    let mut grad = vec![0.0; model.params().len()];
    model.loss_and_grad(xs, ys, &mut grad);
    let mut probe = model.clone();
    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..model.params().len()).collect();
            &all
        }
    };
    Tensor::ALL
        .iter()
        .map(|&t| {
            let r = model.range(t);
            let (mut diff2, mut bp2, mut fd2) = (0.0, 0.0, 0.0);
            for &i in coords.iter().filter(|&&i| r.contains(&i)) {
                let orig = probe.params[i];
                probe.params[i] = orig + step;
                let up = probe.loss(xs, ys);
                probe.params[i] = orig - step;
                let down = probe.loss(xs, ys);
                probe.params[i] = orig;
                let fd = (up - down) / (2.0 * step);
                diff2 += (fd - grad[i]).powi(2);
                bp2 += grad[i].powi(2);
                fd2 += fd * fd;
            }
            let denom = bp2.sqrt().max(fd2.sqrt());
            let rel = if denom == 0.0 {
                0.0
            } else {
                diff2.sqrt() / denom
            };
            (t, rel)
        })
        .collect()
}
