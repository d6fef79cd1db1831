//! Backpropagation, gradient-descent training and finite-difference checks.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dot, matvec, softmax_in_place, Params, ToySeq2Seq};
use crate::error::{Error, Result};
use crate::types::{TokenId, TokenSeq};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub rng_seed: u64,
    pub grad_clip: f64,
    /// Pairs per gradient update.
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 30,
            rng_seed: 1,
            grad_clip: 5.0,
            batch_size: 1,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be > 0"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::invalid("grad_clip must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-token negative log-likelihood of each epoch, measured during the pass.
    pub epoch_loss: Vec<f64>,
}

/// Activations kept from a forward pass over one (source, target) pair.
struct Trace {
    x: Vec<Vec<f64>>,      // source embeddings
    frames: Vec<Vec<f64>>, // encoder outputs
    inputs: Vec<TokenId>,  // consumed tokens: BOS, y_1, ..., y_n
    outputs: Vec<TokenId>, // predicted tokens: y_1, ..., y_n, EOS
    states: Vec<Vec<f64>>, // s_0 .. s_n
    alphas: Vec<Vec<f64>>,
    ctxs: Vec<Vec<f64>>,
    probs: Vec<Vec<f64>>,
    loss: f64, // summed NLL
}

impl ToySeq2Seq {
    fn forward_trace(&self, source: &TokenSeq, target: &TokenSeq) -> Result<Trace> {
        let enc = self.encode(source)?;
        self.tgt_vocab.validate(target)?;
        let d = self.d;
        let h = self.h;
        let v = self.tgt_vocab.len();
        let x: Vec<Vec<f64>> = source
            .ids()
            .iter()
            .map(|&t| self.p.src_embed[t as usize * d..(t as usize + 1) * d].to_vec())
            .collect();
        let frames = enc.frames().to_vec();

        let mut inputs = vec![self.tgt_vocab.bos()];
        inputs.extend_from_slice(target.ids());
        let mut outputs = target.ids().to_vec();
        outputs.push(self.tgt_vocab.eos());

        let mut states = Vec::with_capacity(inputs.len());
        let mut alphas = Vec::with_capacity(inputs.len());
        let mut ctxs = Vec::with_capacity(inputs.len());
        let mut probs = Vec::with_capacity(inputs.len());
        let mut loss = 0.0;
        let mut prev = vec![0.0; h];
        let mut out_in = vec![0.0; h + d];
        for (step, &tok) in inputs.iter().enumerate() {
            let s = self.recur(&prev, tok);
            let q = self.embed_tgt(tok);
            let mut alpha: Vec<f64> = frames.iter().map(|f| dot(q, f)).collect();
            softmax_in_place(&mut alpha);
            let mut ctx = vec![0.0; d];
            for (a, f) in alpha.iter().zip(&frames) {
                for (c, fv) in ctx.iter_mut().zip(f) {
                    *c += a * fv;
                }
            }
            out_in[..h].copy_from_slice(&s);
            out_in[h..].copy_from_slice(&ctx);
            let mut z = vec![0.0; v];
            matvec(&self.p.w_out, v, h + d, &out_in, &mut z);
            for (zi, b) in z.iter_mut().zip(&self.p.b_out) {
                *zi += b;
            }
            softmax_in_place(&mut z);
            let pt = z[outputs[step] as usize];
            loss -= pt.ln();
            prev = s.clone();
            states.push(s);
            alphas.push(alpha);
            ctxs.push(ctx);
            probs.push(z);
        }
        Ok(Trace {
            x,
            frames,
            inputs,
            outputs,
            states,
            alphas,
            ctxs,
            probs,
            loss,
        })
    }

    /// Summed NLL over `target + EOS`, accumulating `scale * dLoss/dParam` into `grad`.
    fn backward(
        &self,
        source: &TokenSeq,
        target: &TokenSeq,
        scale: f64,
        grad: &mut Params,
    ) -> Result<f64> {
        let tr = self.forward_trace(source, target)?;
        let d = self.d;
        let h = self.h;
        let v = self.tgt_vocab.len();
        let n_frames = tr.frames.len();
        let mut d_frames = vec![vec![0.0; d]; n_frames];
        let mut ds_next = vec![0.0; h];
        let mut dz = vec![0.0; v];
        let mut d_in = vec![0.0; h + d];

        for step in (0..tr.inputs.len()).rev() {
            let s = &tr.states[step];
            let ctx = &tr.ctxs[step];
            let alpha = &tr.alphas[step];
            let tok = tr.inputs[step] as usize;

            // output layer
            dz.copy_from_slice(&tr.probs[step]);
            dz[tr.outputs[step] as usize] -= 1.0;
            for dzi in dz.iter_mut() {
                *dzi *= scale;
            }
            d_in.iter_mut().for_each(|x| *x = 0.0);
            for (r, &g) in dz.iter().enumerate() {
                grad.b_out[r] += g;
                let row = r * (h + d);
                let wrow = &self.p.w_out[row..row + h + d];
                let grow = &mut grad.w_out[row..row + h + d];
                for j in 0..h {
                    grow[j] += g * s[j];
                }
                for j in 0..d {
                    grow[h + j] += g * ctx[j];
                }
                for (di, w) in d_in.iter_mut().zip(wrow) {
                    *di += g * w;
                }
            }
            let (ds_out, dctx) = d_in.split_at(h);

            // attention: ctx = sum_t alpha_t f_t, alpha = softmax(q . f_t), q = E_tgt[tok]
            let q = &self.p.tgt_embed[tok * d..(tok + 1) * d];
            let dalpha: Vec<f64> = tr.frames.iter().map(|f| dot(dctx, f)).collect();
            let mean: f64 = alpha.iter().zip(&dalpha).map(|(a, g)| a * g).sum();
            let mut dq = vec![0.0; d];
            for t in 0..n_frames {
                let da = alpha[t] * (dalpha[t] - mean);
                let f = &tr.frames[t];
                for j in 0..d {
                    d_frames[t][j] += alpha[t] * dctx[j] + da * q[j];
                    dq[j] += da * f[j];
                }
            }

            // recurrence: s = tanh(W_prev e + W_state s_prev)
            let s_prev: Vec<f64> = if step == 0 {
                vec![0.0; h]
            } else {
                tr.states[step - 1].clone()
            };
            let mut dpre = vec![0.0; h];
            for j in 0..h {
                dpre[j] = (ds_out[j] + ds_next[j]) * (1.0 - s[j] * s[j]);
            }
            let mut ds_prev = vec![0.0; h];
            for r in 0..h {
                let g = dpre[r];
                if g == 0.0 {
                    continue;
                }
                let wp = &self.p.w_prev[r * d..(r + 1) * d];
                let gp = &mut grad.w_prev[r * d..(r + 1) * d];
                for j in 0..d {
                    gp[j] += g * q[j];
                    dq[j] += g * wp[j];
                }
                let ws = &self.p.w_state[r * h..(r + 1) * h];
                let gs = &mut grad.w_state[r * h..(r + 1) * h];
                for j in 0..h {
                    gs[j] += g * s_prev[j];
                    ds_prev[j] += g * ws[j];
                }
            }
            let ge = &mut grad.tgt_embed[tok * d..(tok + 1) * d];
            for j in 0..d {
                ge[j] += dq[j];
            }
            ds_next = ds_prev;
        }

        // encoder: f = tanh(W_enc x + b)
        for (t, &src_tok) in source.ids().iter().enumerate() {
            let f = &tr.frames[t];
            let x = &tr.x[t];
            let mut dx = vec![0.0; d];
            for r in 0..d {
                let g = d_frames[t][r] * (1.0 - f[r] * f[r]);
                grad.enc_b[r] += g;
                let w = &self.p.enc_w[r * d..(r + 1) * d];
                let gw = &mut grad.enc_w[r * d..(r + 1) * d];
                for j in 0..d {
                    gw[j] += g * x[j];
                    dx[j] += g * w[j];
                }
            }
            let row = src_tok as usize * d;
            for j in 0..d {
                grad.src_embed[row + j] += dx[j];
            }
        }
        Ok(tr.loss)
    }

    /// Summed NLL of `target + EOS` given `source`.
    pub fn pair_loss(&self, source: &TokenSeq, target: &TokenSeq) -> Result<f64> {
        Ok(self.forward_trace(source, target)?.loss)
    }

    /// Mean per-token NLL over a dataset.
    pub fn mean_loss(&self, data: &[(TokenSeq, TokenSeq)]) -> Result<f64> {
        let mut total = 0.0;
        let mut tokens = 0usize;
        for (s, t) in data {
            total += self.pair_loss(s, t)?;
            tokens += t.len() + 1;
        }
        Ok(total / tokens.max(1) as f64)
    }

    fn zero_grad(&self) -> Params {
        Params::zeros(self.src_vocab.len(), self.tgt_vocab.len(), self.d, self.h)
    }
}

fn clip_and_step(params: &mut Params, grad: &Params, lr: f64, clip: f64) {
    let norm: f64 = grad
        .tensors()
        .iter()
        .flat_map(|t| t.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    let factor = if norm > clip { clip / norm } else { 1.0 };
    for (p, g) in params.tensors_mut().into_iter().zip(grad.tensors()) {
        for (pv, gv) in p.iter_mut().zip(g.iter()) {
            *pv -= lr * factor * gv;
        }
    }
}

fn run_epochs(
    model: &ToySeq2Seq,
    data: &[(TokenSeq, TokenSeq)],
    config: &TrainConfig,
) -> Result<(ToySeq2Seq, TrainReport)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    for (src, tgt) in data {
        if src.is_empty() {
            return Err(Error::EmptySource);
        }
        model.src_vocab.validate(src)?;
        model.tgt_vocab.validate(tgt)?;
    }
    let mut model = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_loss = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut token_sum = 0usize;
        for batch in order.chunks(config.batch_size) {
            let tokens: usize = batch.iter().map(|&i| data[i].1.len() + 1).sum();
            let scale = 1.0 / tokens as f64;
            let mut grad = model.zero_grad();
            for &i in batch {
                let (src, tgt) = &data[i];
                // inputs were validated above, so failures here are numeric
                loss_sum += model
                    .backward(src, tgt, scale, &mut grad)
                    .map_err(|_| Error::TrainingDiverged)?;
            }
            token_sum += tokens;
            clip_and_step(&mut model.p, &grad, config.learning_rate, config.grad_clip);
            if !loss_sum.is_finite() || !model.p.all_finite() {
                return Err(Error::TrainingDiverged);
            }
        }
        let mean = loss_sum / token_sum as f64;
        if !mean.is_finite() || !model.p.all_finite() {
            return Err(Error::TrainingDiverged);
        }
        epoch_loss.push(mean);
    }
    Ok((model, TrainReport { epoch_loss }))
}

/// Gradient descent on mean per-token NLL with per-update norm clipping.
/// Data order is reshuffled each epoch from `config.rng_seed`.
pub fn train(
    model: &ToySeq2Seq,
    data: &[(TokenSeq, TokenSeq)],
    config: &TrainConfig,
) -> Result<(ToySeq2Seq, TrainReport)> {
    run_epochs(model, data, config)
}

/// Continues training an already trained model on a (gender-partitioned) subset
/// at a constant learning rate.
pub fn fine_tune(
    model: &ToySeq2Seq,
    subset: &[(TokenSeq, TokenSeq)],
    config: &TrainConfig,
) -> Result<(ToySeq2Seq, TrainReport)> {
    if subset.is_empty() {
        return Err(Error::invalid("fine-tuning subset is empty"));
    }
    run_epochs(model, subset, config)
}

/// Max relative error between backprop and central finite differences over
/// every parameter, `|g_a - g_n| / max(|g_a|, |g_n|, 1e-8)`.
pub fn numerical_grad_check(
    model: &ToySeq2Seq,
    pair: (&TokenSeq, &TokenSeq),
    epsilon: f64,
) -> Result<f64> {
    if !(1e-6..=1e-3).contains(&epsilon) {
        return Err(Error::invalid("epsilon must lie in [1e-6, 1e-3]"));
    }
    let (src, tgt) = pair;
    let mut analytic = model.zero_grad();
    model.backward(src, tgt, 1.0, &mut analytic)?;
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for ti in 0..8 {
        let len = analytic.tensors()[ti].len();
        for i in 0..len {
            let orig = probe.p.tensors()[ti][i];
            probe.p.tensors_mut()[ti][i] = orig + epsilon;
            let plus = probe.pair_loss(src, tgt)?;
            probe.p.tensors_mut()[ti][i] = orig - epsilon;
            let minus = probe.pair_loss(src, tgt)?;
            probe.p.tensors_mut()[ti][i] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic.tensors()[ti][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
