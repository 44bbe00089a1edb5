use super::{Dims, Example, ModelParams, Task};
use crate::corpus::Vocab;

/// Per-thread activations reused across examples.
pub struct Scratch {
    x: Vec<f64>,
    h: Vec<f64>,
    probs: Vec<f64>,
    dh: Vec<f64>,
    dx: Vec<f64>,
}

impl Scratch {
    pub fn new(dims: &Dims) -> Self {
        Self {
            x: vec![0.0; dims.input_width()],
            h: vec![0.0; dims.hidden],
            probs: vec![0.0; dims.outputs()],
            dh: vec![0.0; dims.hidden],
            dx: vec![0.0; dims.input_width()],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Runs the network on `ex`, leaving activations in `s`; returns
/// `-ln p(target)`.
pub(super) fn forward(p: &ModelParams, ex: &Example, s: &mut Scratch) -> f64 {
    let dims = &p.dims;
    let l = dims.layout();
    let d = dims.embed;
    let emb = &p.theta[l.embedding.clone()];

    match dims.task {
        Task::LanguageModel => {
            debug_assert_eq!(ex.context.len(), dims.context);
            for (k, &tok) in ex.context.iter().enumerate() {
                let row = &emb[tok as usize * d..(tok as usize + 1) * d];
                s.x[k * d..(k + 1) * d].copy_from_slice(row);
            }
        }
        Task::Classifier => {
            s.x.iter_mut().for_each(|v| *v = 0.0);
            let inv = 1.0 / ex.context.len().max(1) as f64;
            for &tok in &ex.context {
                let row = &emb[tok as usize * d..(tok as usize + 1) * d];
                for (xi, ri) in s.x.iter_mut().zip(row) {
                    *xi += ri * inv;
                }
            }
        }
    }

    let in_w = dims.input_width();
    let wh = &p.theta[l.hidden_w.clone()];
    let bh = &p.theta[l.hidden_b.clone()];
    for j in 0..dims.hidden {
        let row = &wh[j * in_w..(j + 1) * in_w];
        let pre: f64 = bh[j] + row.iter().zip(&s.x).map(|(w, x)| w * x).sum::<f64>();
        s.h[j] = pre.tanh();
    }

    let wo = &p.theta[l.output_w.clone()];
    let bo = &p.theta[l.output_b.clone()];
    let hd = dims.hidden;
    let mut max = f64::NEG_INFINITY;
    for i in 0..dims.outputs() {
        let row = &wo[i * hd..(i + 1) * hd];
        let logit = bo[i] + row.iter().zip(&s.h).map(|(w, h)| w * h).sum::<f64>();
        s.probs[i] = logit;
        max = max.max(logit);
    }
    let target_logit = s.probs[ex.target as usize];
    let mut z = 0.0;
    for v in &s.probs {
        z += (v - max).exp();
    }
    let lse = max + z.ln();
    for v in &mut s.probs {
        *v = (*v - lse).exp();
    }
    lse - target_logit
}

/// Adds `scale × ∇(-ln p(target))` into `grad`, using the activations left by
/// [`forward`] for the same example.
pub(super) fn backward(p: &ModelParams, ex: &Example, s: &mut Scratch, grad: &mut [f64], scale: f64) {
    let dims = &p.dims;
    let l = dims.layout();
    let hd = dims.hidden;
    let in_w = dims.input_width();
    let d = dims.embed;

    // Output layer: d logits = probs - onehot(target).
    let wo = &p.theta[l.output_w.clone()];
    s.dh.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..dims.outputs() {
        let mut dl = s.probs[i];
        if i == ex.target as usize {
            dl -= 1.0;
        }
        if dl == 0.0 {
            continue;
        }
        let dl = dl * scale;
        grad[l.output_b.start + i] += dl;
        let gw = &mut grad[l.output_w.start + i * hd..l.output_w.start + (i + 1) * hd];
        for (g, h) in gw.iter_mut().zip(&s.h) {
            *g += dl * h;
        }
        let row = &wo[i * hd..(i + 1) * hd];
        for (dh, w) in s.dh.iter_mut().zip(row) {
            *dh += dl * w;
        }
    }

    // Hidden layer through tanh.
    let wh = &p.theta[l.hidden_w.clone()];
    s.dx.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..hd {
        let dpre = s.dh[j] * (1.0 - s.h[j] * s.h[j]);
        if dpre == 0.0 {
            continue;
        }
        grad[l.hidden_b.start + j] += dpre;
        let gw = &mut grad[l.hidden_w.start + j * in_w..l.hidden_w.start + (j + 1) * in_w];
        for (g, x) in gw.iter_mut().zip(&s.x) {
            *g += dpre * x;
        }
        let row = &wh[j * in_w..(j + 1) * in_w];
        for (dx, w) in s.dx.iter_mut().zip(row) {
            *dx += dpre * w;
        }
    }

    // Embedding rows; the <pad> row stays frozen.
    let ge = l.embedding.start;
    match dims.task {
        Task::LanguageModel => {
            for (k, &tok) in ex.context.iter().enumerate() {
                if tok == Vocab::PAD {
                    continue;
                }
                let g = &mut grad[ge + tok as usize * d..ge + (tok as usize + 1) * d];
                for (gi, dxi) in g.iter_mut().zip(&s.dx[k * d..(k + 1) * d]) {
                    *gi += dxi;
                }
            }
        }
        Task::Classifier => {
            let inv = 1.0 / ex.context.len().max(1) as f64;
            for &tok in &ex.context {
                if tok == Vocab::PAD {
                    continue;
                }
                let g = &mut grad[ge + tok as usize * d..ge + (tok as usize + 1) * d];
                for (gi, dxi) in g.iter_mut().zip(&s.dx) {
                    *gi += dxi * inv;
                }
            }
        }
    }
}
