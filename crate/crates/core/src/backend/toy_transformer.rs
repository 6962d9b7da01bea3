use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::truncation::{TokenId, TokenSequence};

use super::hashing::{HashTokenizer, CLS_ID, SEP_ID};
use super::{BackendError, Encoder, EncoderBackend, Tokenizer};

/// Single-layer, single-head transformer encoder whose output at the
/// sequence-start position is the pooled representation.
///
/// Only the start position's query is needed for that output, so the
/// layer computes attention from position 0 over the whole sequence,
/// followed by a residual ReLU feed-forward block. Gradients are
/// hand-derived.
#[derive(Debug, Clone)]
pub struct ToyTransformer {
    vocab_size: usize,
    d_model: usize,
    d_ff: usize,
    max_positions: usize,
}

impl ToyTransformer {
    pub fn new(vocab_size: usize, d_model: usize, d_ff: usize, max_positions: usize) -> Result<Self, BackendError> {
        HashTokenizer::new(vocab_size)?;
        if d_model == 0 || d_ff == 0 {
            return Err(BackendError::Config("toy-transformer dimensions must be positive".into()));
        }
        if max_positions < 3 {
            return Err(BackendError::Config("toy-transformer needs at least 3 positions".into()));
        }
        Ok(Self { vocab_size, d_model, d_ff, max_positions })
    }

    pub fn encoder(&self, seed: u64) -> ToyTransformerEncoder {
        ToyTransformerEncoder::new(self, seed)
    }
}

impl EncoderBackend for ToyTransformer {
    fn id(&self) -> String {
        format!("toy-transformer-v{}-d{}-f{}", self.vocab_size, self.d_model, self.d_ff)
    }

    fn n_special(&self) -> usize {
        2
    }

    fn build(&self, seed: u64) -> Result<Box<dyn Encoder>, BackendError> {
        Ok(Box::new(self.encoder(seed)))
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    d: usize,
    f: usize,
    embed: usize,
    pos: usize,
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    total: usize,
}

impl Layout {
    fn new(vocab: usize, d: usize, f: usize, positions: usize) -> Self {
        let embed = 0;
        let pos = embed + vocab * d;
        let wq = pos + positions * d;
        let wk = wq + d * d;
        let wv = wk + d * d;
        let wo = wv + d * d;
        let w1 = wo + d * d;
        let b1 = w1 + f * d;
        let w2 = b1 + f;
        let b2 = w2 + d * f;
        Self { d, f, embed, pos, wq, wk, wv, wo, w1, b1, w2, b2, total: b2 + d }
    }
}

/// `W x` for a row-major `rows x cols` block at `w`.
fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    (0..rows).map(|r| w[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// `W^T y` for a row-major `rows x cols` block at `w`.
fn matvec_t(w: &[f64], rows: usize, cols: usize, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * y[r];
        }
    }
    out
}

/// `G += y x^T`.
fn outer_acc(g: &mut [f64], cols: usize, y: &[f64], x: &[f64]) {
    for (r, yr) in y.iter().enumerate() {
        for (gc, xc) in g[r * cols..(r + 1) * cols].iter_mut().zip(x) {
            *gc += yr * xc;
        }
    }
}

fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (o, v) in acc.iter_mut().zip(x) {
        *o += a * v;
    }
}

struct Forward {
    ids: Vec<TokenId>,
    xs: Vec<Vec<f64>>,
    q: Vec<f64>,
    ks: Vec<Vec<f64>>,
    vs: Vec<Vec<f64>>,
    attn: Vec<f64>,
    z: Vec<f64>,
    h: Vec<f64>,
    u: Vec<f64>,
    r: Vec<f64>,
    out: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ToyTransformerEncoder {
    tokenizer: HashTokenizer,
    layout: Layout,
    max_positions: usize,
    params: Vec<f64>,
    grads: Vec<f64>,
}

impl ToyTransformerEncoder {
    fn new(cfg: &ToyTransformer, seed: u64) -> Self {
        let layout = Layout::new(cfg.vocab_size, cfg.d_model, cfg.d_ff, cfg.max_positions);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; layout.total];
        let d = cfg.d_model as f64;
        let f = cfg.d_ff as f64;
        // uniform(-a, a) has std a / sqrt(3)
        let mut fill = |range: std::ops::Range<usize>, std: f64| {
            let a = std * 3f64.sqrt();
            for p in &mut params[range] {
                *p = rng.gen_range(-a..a);
            }
        };
        fill(layout.embed..layout.pos, 1.0 / d.sqrt());
        fill(layout.pos..layout.wq, 0.02);
        fill(layout.wq..layout.w1, 1.0 / d.sqrt());
        fill(layout.w1..layout.b1, 1.0 / d.sqrt());
        fill(layout.w2..layout.b2, 0.5 / f.sqrt());
        Self {
            tokenizer: HashTokenizer::new(cfg.vocab_size).expect("validated vocab"),
            layout,
            max_positions: cfg.max_positions,
            grads: vec![0.0; layout.total],
            params,
        }
    }

    fn block(&self, start: usize, len: usize) -> &[f64] {
        &self.params[start..start + len]
    }

    fn forward(&self, tokens: &[TokenId]) -> Result<Forward, BackendError> {
        let l = self.layout;
        let (d, f) = (l.d, l.f);
        let mut ids = Vec::with_capacity(tokens.len() + 2);
        ids.push(CLS_ID);
        ids.extend_from_slice(tokens);
        ids.push(SEP_ID);
        if ids.len() > self.max_positions {
            return Err(BackendError::SequenceTooLong { len: ids.len(), max: self.max_positions });
        }
        let vocab = self.tokenizer.vocab_size();
        let xs: Vec<Vec<f64>> = ids
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let t = (t as usize).min(vocab - 1);
                let e = self.block(l.embed + t * d, d);
                let p = self.block(l.pos + i * d, d);
                e.iter().zip(p).map(|(a, b)| a + b).collect()
            })
            .collect();

        let wq = self.block(l.wq, d * d);
        let wk = self.block(l.wk, d * d);
        let wv = self.block(l.wv, d * d);
        let q = matvec(wq, d, d, &xs[0]);
        let ks: Vec<Vec<f64>> = xs.iter().map(|x| matvec(wk, d, d, x)).collect();
        let vs: Vec<Vec<f64>> = xs.iter().map(|x| matvec(wv, d, d, x)).collect();
        let scale = 1.0 / (d as f64).sqrt();
        let scores: Vec<f64> = ks.iter().map(|k| scale * q.iter().zip(k).map(|(a, b)| a * b).sum::<f64>()).collect();
        let attn = crate::imbalance::softmax(&scores);
        let mut z = vec![0.0; d];
        for (a, v) in attn.iter().zip(&vs) {
            axpy(&mut z, *a, v);
        }
        let mut h = matvec(self.block(l.wo, d * d), d, d, &z);
        axpy(&mut h, 1.0, &xs[0]);
        let mut u = matvec(self.block(l.w1, f * d), f, d, &h);
        axpy(&mut u, 1.0, self.block(l.b1, f));
        let r: Vec<f64> = u.iter().map(|&x| x.max(0.0)).collect();
        let mut out = matvec(self.block(l.w2, d * f), d, f, &r);
        axpy(&mut out, 1.0, self.block(l.b2, d));
        axpy(&mut out, 1.0, &h);
        Ok(Forward { ids, xs, q, ks, vs, attn, z, h, u, r, out })
    }
}

impl Tokenizer for ToyTransformerEncoder {
    fn tokenize(&self, text: &str) -> Result<TokenSequence, BackendError> {
        self.tokenizer.tokenize(text)
    }
}

impl Encoder for ToyTransformerEncoder {
    fn dim(&self) -> usize {
        self.layout.d
    }

    fn encode(&self, tokens: &[TokenId]) -> Result<Vec<f64>, BackendError> {
        Ok(self.forward(tokens)?.out)
    }

    fn is_trainable(&self) -> bool {
        true
    }

    fn accumulate_grad(&mut self, tokens: &[TokenId], g_out: &[f64]) -> Result<(), BackendError> {
        let fw = self.forward(tokens)?;
        let l = self.layout;
        let (d, f) = (l.d, l.f);
        let vocab = self.tokenizer.vocab_size();
        let params = &self.params;
        let g = &mut self.grads;

        // out = h + W2 r + b2
        axpy(&mut g[l.b2..l.b2 + d], 1.0, g_out);
        outer_acc(&mut g[l.w2..l.w2 + d * f], f, g_out, &fw.r);
        let g_r = matvec_t(&params[l.w2..l.w2 + d * f], d, f, g_out);
        let g_u: Vec<f64> = g_r.iter().zip(&fw.u).map(|(gr, &u)| if u > 0.0 { *gr } else { 0.0 }).collect();
        axpy(&mut g[l.b1..l.b1 + f], 1.0, &g_u);
        outer_acc(&mut g[l.w1..l.w1 + f * d], d, &g_u, &fw.h);
        let mut g_h = matvec_t(&params[l.w1..l.w1 + f * d], f, d, &g_u);
        axpy(&mut g_h, 1.0, g_out);

        // h = x0 + Wo z
        outer_acc(&mut g[l.wo..l.wo + d * d], d, &g_h, &fw.z);
        let g_z = matvec_t(&params[l.wo..l.wo + d * d], d, d, &g_h);
        let mut g_xs: Vec<Vec<f64>> = vec![vec![0.0; d]; fw.xs.len()];
        axpy(&mut g_xs[0], 1.0, &g_h);

        // z = sum_i a_i v_i, a = softmax(q . k_i / sqrt(d))
        let g_a: Vec<f64> = fw.vs.iter().map(|v| v.iter().zip(&g_z).map(|(a, b)| a * b).sum()).collect();
        let dot: f64 = fw.attn.iter().zip(&g_a).map(|(a, b)| a * b).sum();
        let scale = 1.0 / (d as f64).sqrt();
        let mut g_q = vec![0.0; d];
        for i in 0..fw.xs.len() {
            let g_v: Vec<f64> = g_z.iter().map(|x| fw.attn[i] * x).collect();
            let g_s = fw.attn[i] * (g_a[i] - dot);
            axpy(&mut g_q, g_s * scale, &fw.ks[i]);
            let g_k: Vec<f64> = fw.q.iter().map(|x| g_s * scale * x).collect();
            outer_acc(&mut g[l.wk..l.wk + d * d], d, &g_k, &fw.xs[i]);
            outer_acc(&mut g[l.wv..l.wv + d * d], d, &g_v, &fw.xs[i]);
            let back_k = matvec_t(&params[l.wk..l.wk + d * d], d, d, &g_k);
            let back_v = matvec_t(&params[l.wv..l.wv + d * d], d, d, &g_v);
            axpy(&mut g_xs[i], 1.0, &back_k);
            axpy(&mut g_xs[i], 1.0, &back_v);
        }
        outer_acc(&mut g[l.wq..l.wq + d * d], d, &g_q, &fw.xs[0]);
        let back_q = matvec_t(&params[l.wq..l.wq + d * d], d, d, &g_q);
        axpy(&mut g_xs[0], 1.0, &back_q);

        // x_i = E[t_i] + P[i]
        for (i, (&t, gx)) in fw.ids.iter().zip(&g_xs).enumerate() {
            let t = (t as usize).min(vocab - 1);
            axpy(&mut g[l.embed + t * d..l.embed + (t + 1) * d], 1.0, gx);
            axpy(&mut g[l.pos + i * d..l.pos + (i + 1) * d], 1.0, gx);
        }
        Ok(())
    }

    fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }

    fn params_and_grads(&mut self) -> (&mut [f64], &[f64]) {
        (&mut self.params, &self.grads)
    }

    fn params(&self) -> &[f64] {
        &self.params
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ToyTransformerEncoder {
        ToyTransformer::new(16, 4, 6, 8).unwrap().encoder(5)
    }

    /// Scalar probe loss `c . encode(tokens)`.
    fn probe(enc: &ToyTransformerEncoder, tokens: &[TokenId], c: &[f64]) -> f64 {
        enc.encode(tokens).unwrap().iter().zip(c).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut enc = tiny();
        let tokens = [3, 7, 7, 12];
        let c = [0.3, -1.2, 0.7, 0.5];
        enc.zero_grad();
        enc.accumulate_grad(&tokens, &c).unwrap();
        let analytic = enc.grads.clone();
        let step = 1e-6;
        let mut checked = 0;
        for i in 0..enc.params.len() {
            let orig = enc.params[i];
            enc.params[i] = orig + step;
            let up = probe(&enc, &tokens, &c);
            enc.params[i] = orig - step;
            let down = probe(&enc, &tokens, &c);
            enc.params[i] = orig;
            let numeric = (up - down) / (2.0 * step);
            let err = (numeric - analytic[i]).abs();
            assert!(err <= 1e-6 + 1e-4 * numeric.abs(), "param {i}: numeric {numeric} analytic {}", analytic[i]);
            if numeric.abs() > 1e-8 {
                checked += 1;
            }
        }
        assert!(checked > 50, "too few non-zero gradients checked: {checked}");
    }

    #[test]
    fn rejects_over_long_sequences() {
        let enc = tiny();
        assert!(enc.encode(&[3; 6]).is_ok());
        assert!(matches!(enc.encode(&[3; 7]), Err(BackendError::SequenceTooLong { len: 9, max: 8 })));
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let a = ToyTransformer::new(16, 4, 6, 8).unwrap().encoder(1);
        let b = ToyTransformer::new(16, 4, 6, 8).unwrap().encoder(1);
        let c = ToyTransformer::new(16, 4, 6, 8).unwrap().encoder(2);
        assert_eq!(a.params, b.params);
        assert_ne!(a.params, c.params);
    }
}
