//! A small attention encoder-decoder used as the base translation model.
//!
//! Encoder: each source token is embedded and projected independently,
//! `f_t = tanh(W_enc · E_src[x_t] + b_enc)`. There is no positional signal,
//! so the encoding is a bag of frames and attention is order-invariant.
//!
//! Decoder: a plain tanh recurrence over the target prefix,
//! `s_t = tanh(W_prev · E_tgt[y_{t-1}] + W_state · s_{t-1})`, whose state
//! never sees the source. The source enters only through dot-product
//! attention queried by the embedding of the last consumed token, and the
//! output layer reads `[s_t; context_t]`. Because the state is
//! source-independent it can be cached across decoders that differ only in
//! the encoder output, which is how the ILM (fed with a single averaged
//! frame) shares work with the base model during decoding.

mod io;
mod train;

pub use train::{fine_tune, numerical_grad_check, train, TrainConfig, TrainReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{LogProbDist, TokenId, TokenSeq, Vocabulary};

pub const DEFAULT_EMBED_DIM: usize = 16;
pub const DEFAULT_HIDDEN_DIM: usize = 32;

/// Encoder frames for one source sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    dim: usize,
    frames: Vec<Vec<f64>>,
}

impl EncoderOutput {
    pub fn new(frames: Vec<Vec<f64>>) -> Result<Self> {
        let dim = frames
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("encoder output needs at least one frame"))?;
        for f in &frames {
            if f.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: f.len(),
                });
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite encoder frame"));
            }
        }
        Ok(Self { dim, frames })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }
}

/// Decoder recurrence state after consuming some prefix (BOS included).
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    hidden: Vec<f64>,
    last: TokenId,
}

impl DecoderState {
    pub fn hidden(&self) -> &[f64] {
        &self.hidden
    }

    pub fn last_token(&self) -> TokenId {
        self.last
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToySeq2Seq {
    pub(crate) src_vocab: Vocabulary,
    pub(crate) tgt_vocab: Vocabulary,
    pub(crate) d: usize,
    pub(crate) h: usize,
    pub(crate) seed: u64,
    pub(crate) p: Params,
}

/// All trainable tensors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Params {
    pub src_embed: Vec<f64>, // E_src x d
    pub enc_w: Vec<f64>,     // d x d
    pub enc_b: Vec<f64>,     // d
    pub tgt_embed: Vec<f64>, // V x d
    pub w_prev: Vec<f64>,    // h x d
    pub w_state: Vec<f64>,   // h x h
    pub w_out: Vec<f64>,     // V x (h + d)
    pub b_out: Vec<f64>,     // V
}

pub(crate) const TENSOR_NAMES: [&str; 8] = [
    "src_embed",
    "enc_w",
    "enc_b",
    "tgt_embed",
    "w_prev",
    "w_state",
    "w_out",
    "b_out",
];

impl Params {
    pub fn zeros(src_v: usize, tgt_v: usize, d: usize, h: usize) -> Self {
        Self {
            src_embed: vec![0.0; src_v * d],
            enc_w: vec![0.0; d * d],
            enc_b: vec![0.0; d],
            tgt_embed: vec![0.0; tgt_v * d],
            w_prev: vec![0.0; h * d],
            w_state: vec![0.0; h * h],
            w_out: vec![0.0; tgt_v * (h + d)],
            b_out: vec![0.0; tgt_v],
        }
    }

    pub fn shapes(src_v: usize, tgt_v: usize, d: usize, h: usize) -> [(usize, usize); 8] {
        [
            (src_v, d),
            (d, d),
            (1, d),
            (tgt_v, d),
            (h, d),
            (h, h),
            (tgt_v, h + d),
            (1, tgt_v),
        ]
    }

    pub fn tensors(&self) -> [&Vec<f64>; 8] {
        [
            &self.src_embed,
            &self.enc_w,
            &self.enc_b,
            &self.tgt_embed,
            &self.w_prev,
            &self.w_state,
            &self.w_out,
            &self.b_out,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 8] {
        [
            &mut self.src_embed,
            &mut self.enc_w,
            &mut self.enc_b,
            &mut self.tgt_embed,
            &mut self.w_prev,
            &mut self.w_state,
            &mut self.w_out,
            &mut self.b_out,
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

pub(crate) fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        let row = &w[r * cols..(r + 1) * cols];
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// In-place softmax; returns the log-normalizer.
pub(crate) fn softmax_in_place(v: &mut [f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
    max + sum.ln()
}

impl ToySeq2Seq {
    /// Model with every parameter set to zero.
    pub fn zeros(src_vocab: Vocabulary, tgt_vocab: Vocabulary, d: usize, h: usize) -> Self {
        let p = Params::zeros(src_vocab.len(), tgt_vocab.len(), d, h);
        Self {
            src_vocab,
            tgt_vocab,
            d,
            h,
            seed: 0,
            p,
        }
    }

    /// Glorot-uniform initialization, `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
    /// Biases start at zero.
    pub fn new(src_vocab: Vocabulary, tgt_vocab: Vocabulary, d: usize, h: usize, seed: u64) -> Self {
        let mut model = Self::zeros(src_vocab, tgt_vocab, d, h);
        model.seed = seed;
        let shapes = Params::shapes(model.src_vocab.len(), model.tgt_vocab.len(), d, h);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, tensor) in model.p.tensors_mut().into_iter().enumerate() {
            if matches!(TENSOR_NAMES[i], "enc_b" | "b_out") {
                continue;
            }
            let (rows, cols) = shapes[i];
            let a = (6.0 / (rows + cols) as f64).sqrt();
            for v in tensor.iter_mut() {
                *v = rng.gen_range(-a..a);
            }
        }
        model
    }

    pub fn src_vocab(&self) -> &Vocabulary {
        &self.src_vocab
    }

    pub fn tgt_vocab(&self) -> &Vocabulary {
        &self.tgt_vocab
    }

    pub fn embed_dim(&self) -> usize {
        self.d
    }

    pub fn hidden_dim(&self) -> usize {
        self.h
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_params(&self) -> usize {
        self.p.tensors().iter().map(|t| t.len()).sum()
    }

    /// Flat copy of every parameter, in tensor order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.p.tensors().iter().flat_map(|t| t.iter().copied()).collect()
    }

    pub fn encode(&self, source: &TokenSeq) -> Result<EncoderOutput> {
        if source.is_empty() {
            return Err(Error::EmptySource);
        }
        self.src_vocab.validate(source)?;
        let d = self.d;
        let mut frames = Vec::with_capacity(source.len());
        for &tok in source.ids() {
            let x = &self.p.src_embed[tok as usize * d..(tok as usize + 1) * d];
            let mut f = vec![0.0; d];
            matvec(&self.p.enc_w, d, d, x, &mut f);
            for (v, b) in f.iter_mut().zip(&self.p.enc_b) {
                *v = (*v + b).tanh();
            }
            frames.push(f);
        }
        EncoderOutput::new(frames)
    }

    fn embed_tgt(&self, tok: TokenId) -> &[f64] {
        &self.p.tgt_embed[tok as usize * self.d..(tok as usize + 1) * self.d]
    }

    fn recur(&self, prev_hidden: &[f64], tok: TokenId) -> Vec<f64> {
        let (d, h) = (self.d, self.h);
        let mut a = vec![0.0; h];
        let mut b = vec![0.0; h];
        matvec(&self.p.w_prev, h, d, self.embed_tgt(tok), &mut a);
        matvec(&self.p.w_state, h, h, prev_hidden, &mut b);
        a.iter().zip(&b).map(|(x, y)| (x + y).tanh()).collect()
    }

    /// State after consuming BOS.
    pub fn start(&self) -> DecoderState {
        let bos = self.tgt_vocab.bos();
        DecoderState {
            hidden: self.recur(&vec![0.0; self.h], bos),
            last: bos,
        }
    }

    pub fn advance(&self, state: &DecoderState, tok: TokenId) -> DecoderState {
        DecoderState {
            hidden: self.recur(&state.hidden, tok),
            last: tok,
        }
    }

    pub fn state_for(&self, prefix: &TokenSeq) -> Result<DecoderState> {
        self.tgt_vocab.validate(prefix)?;
        let mut st = self.start();
        for &tok in prefix.ids() {
            st = self.advance(&st, tok);
        }
        Ok(st)
    }

    fn check_enc(&self, enc: &EncoderOutput) -> Result<()> {
        if enc.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: enc.dim(),
            });
        }
        Ok(())
    }

    /// Softmax attention weights of `state`'s query over `enc`'s frames.
    pub fn attention(&self, state: &DecoderState, enc: &EncoderOutput) -> Result<Vec<f64>> {
        self.check_enc(enc)?;
        let q = self.embed_tgt(state.last);
        let mut w: Vec<f64> = enc.frames().iter().map(|f| dot(q, f)).collect();
        softmax_in_place(&mut w);
        Ok(w)
    }

    /// Next-token distribution given a decoder state and encoder output.
    pub fn next_dist(&self, state: &DecoderState, enc: &EncoderOutput) -> Result<LogProbDist> {
        let alpha = self.attention(state, enc)?;
        let d = self.d;
        let mut input = Vec::with_capacity(self.h + d);
        input.extend_from_slice(&state.hidden);
        let mut ctx = vec![0.0; d];
        for (a, f) in alpha.iter().zip(enc.frames()) {
            for (c, v) in ctx.iter_mut().zip(f) {
                *c += a * v;
            }
        }
        input.extend_from_slice(&ctx);
        let v = self.tgt_vocab.len();
        let mut logits = vec![0.0; v];
        matvec(&self.p.w_out, v, self.h + d, &input, &mut logits);
        for (z, b) in logits.iter_mut().zip(&self.p.b_out) {
            *z += b;
        }
        LogProbDist::from_logits(&logits)
    }

    /// Next-token distribution after `prefix` (BOS implied), attending over `enc`.
    pub fn decoder_logprob_dist(
        &self,
        prefix: &TokenSeq,
        enc: &EncoderOutput,
    ) -> Result<LogProbDist> {
        self.check_enc(enc)?;
        let st = self.state_for(prefix)?;
        self.next_dist(&st, enc)
    }

    /// `log p(target + EOS | source)` by the chain rule.
    pub fn sequence_logprob(&self, source: &TokenSeq, target: &TokenSeq) -> Result<f64> {
        let enc = self.encode(source)?;
        self.sequence_logprob_with(&enc, target)
    }

    /// Chain-rule score of `target + EOS` against a fixed encoder output.
    pub fn sequence_logprob_with(&self, enc: &EncoderOutput, target: &TokenSeq) -> Result<f64> {
        self.check_enc(enc)?;
        self.tgt_vocab.validate(target)?;
        let mut st = self.start();
        let mut total = 0.0;
        for &tok in target.ids() {
            total += self.next_dist(&st, enc)?.get(tok);
            st = self.advance(&st, tok);
        }
        total += self.next_dist(&st, enc)?.get(self.tgt_vocab.eos());
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::log_sum_exp;
    use proptest::prelude::*;

    pub(crate) fn tiny_vocabs(src: usize, tgt: usize) -> (Vocabulary, Vocabulary) {
        (
            Vocabulary::with_specials((0..src).map(|i| format!("s{i}"))).unwrap(),
            Vocabulary::with_specials((0..tgt).map(|i| format!("t{i}"))).unwrap(),
        )
    }

    fn model(seed: u64) -> ToySeq2Seq {
        let (s, t) = tiny_vocabs(5, 4);
        ToySeq2Seq::new(s, t, 6, 8, seed)
    }

    #[test]
    fn zero_model_encodes_to_zero() {
        let (s, t) = tiny_vocabs(3, 3);
        let m = ToySeq2Seq::zeros(s, t, 4, 5);
        let enc = m.encode(&TokenSeq::new(vec![3, 4, 5])).unwrap();
        assert!(enc.frames().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn encode_preserves_length_and_is_deterministic() {
        let src = TokenSeq::new(vec![3, 4, 5, 6, 7]);
        let a = model(7).encode(&src).unwrap();
        let b = model(7).encode(&src).unwrap();
        assert_eq!(a.len(), 5);
        for (x, y) in a.frames().iter().flatten().zip(b.frames().iter().flatten()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn empty_source_rejected() {
        let err = model(1).encode(&TokenSeq::empty()).unwrap_err();
        assert_eq!(err.to_string(), "empty source");
    }

    #[test]
    fn single_frame_attention_is_one() {
        let m = model(3);
        let enc = EncoderOutput::new(vec![vec![0.3, -0.2, 0.9, 0.0, 0.1, 0.5]]).unwrap();
        assert_eq!(m.attention(&m.start(), &enc).unwrap(), vec![1.0]);
    }

    #[test]
    fn dim_mismatch_is_error() {
        let m = model(3);
        let enc = EncoderOutput::new(vec![vec![0.0; 5]]).unwrap();
        assert!(matches!(
            m.decoder_logprob_dist(&TokenSeq::empty(), &enc),
            Err(Error::DimensionMismatch { expected: 6, got: 5 })
        ));
    }

    #[test]
    fn duplicated_frames_match_single_frame() {
        let m = model(11);
        let f = vec![0.4, -0.7, 0.1, 0.25, -0.05, 0.6];
        let one = EncoderOutput::new(vec![f.clone()]).unwrap();
        let two = EncoderOutput::new(vec![f.clone(), f]).unwrap();
        let prefix = TokenSeq::new(vec![3, 5]);
        let a = m.decoder_logprob_dist(&prefix, &one).unwrap();
        let b = m.decoder_logprob_dist(&prefix, &two).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    /// 2-token target vocabulary is impossible with reserved specials, so the
    /// check uses the smallest real case: V = 4 (BOS, EOS, UNK, t0), d = h = 1,
    /// and recomputes one step with scalar arithmetic.
    #[test]
    fn one_step_by_hand() {
        let (s, t) = tiny_vocabs(1, 1);
        let mut m = ToySeq2Seq::zeros(s, t, 1, 1);
        m.p.src_embed = vec![0.0, 0.0, 0.0, 0.5];
        m.p.enc_w = vec![2.0];
        m.p.enc_b = vec![0.1];
        m.p.tgt_embed = vec![0.3, -0.4, 0.0, 0.8];
        m.p.w_prev = vec![1.5];
        m.p.w_state = vec![-0.5];
        m.p.w_out = vec![0.2, 0.1, -0.3, 0.4, 0.0, 0.0, 1.0, -1.0];
        m.p.b_out = vec![0.0, 0.05, 0.0, -0.1];

        let frame = (2.0f64 * 0.5 + 0.1).tanh();
        // step 0 consumes BOS (embedding 0.3), predicts t0
        let s0 = (1.5f64 * 0.3).tanh();
        let ctx0 = frame;
        let logits0 = [
            0.2 * s0 + 0.1 * ctx0,
            -0.3 * s0 + 0.4 * ctx0 + 0.05,
            0.0,
            1.0 * s0 - 1.0 * ctx0 - 0.1,
        ];
        // step 1 consumes t0 (embedding 0.8), predicts EOS
        let s1 = (1.5f64 * 0.8 - 0.5 * s0).tanh();
        let logits1 = [
            0.2 * s1 + 0.1 * frame,
            -0.3 * s1 + 0.4 * frame + 0.05,
            0.0,
            1.0 * s1 - 1.0 * frame - 0.1,
        ];
        let lse = |z: &[f64]| z.iter().map(|v| v.exp()).sum::<f64>().ln();
        let want = (logits0[3] - lse(&logits0)) + (logits1[1] - lse(&logits1));

        let got = m
            .sequence_logprob(&TokenSeq::new(vec![3]), &TokenSeq::new(vec![3]))
            .unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    fn arb_case() -> impl Strategy<Value = (u64, Vec<u32>, Vec<u32>)> {
        (
            0u64..1000,
            proptest::collection::vec(3u32..8, 1..6),
            proptest::collection::vec(3u32..7, 0..5),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn dist_normalized((seed, src, tgt) in arb_case()) {
            let m = model(seed);
            let enc = m.encode(&TokenSeq::new(src)).unwrap();
            let d = m.decoder_logprob_dist(&TokenSeq::new(tgt), &enc).unwrap();
            prop_assert!(log_sum_exp(d.values()).unwrap().abs() < 1e-6);
        }

        #[test]
        fn attention_is_a_distribution((seed, src, tgt) in arb_case()) {
            let m = model(seed);
            let enc = m.encode(&TokenSeq::new(src)).unwrap();
            let st = m.state_for(&TokenSeq::new(tgt)).unwrap();
            let w = m.attention(&st, &enc).unwrap();
            prop_assert!(w.iter().all(|&a| a >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn frame_order_irrelevant((seed, src, tgt) in arb_case()) {
            let m = model(seed);
            let mut rev = src.clone();
            rev.reverse();
            let a = m.encode(&TokenSeq::new(src)).unwrap();
            let b = m.encode(&TokenSeq::new(rev)).unwrap();
            let p = TokenSeq::new(tgt);
            let da = m.decoder_logprob_dist(&p, &a).unwrap();
            let db = m.decoder_logprob_dist(&p, &b).unwrap();
            for (x, y) in da.values().iter().zip(db.values()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn sequence_logprob_chain_rule((seed, src, tgt) in arb_case()) {
            let m = model(seed);
            let src = TokenSeq::new(src);
            let enc = m.encode(&src).unwrap();
            let mut sum = 0.0;
            for i in 0..=tgt.len() {
                let next = if i < tgt.len() { tgt[i] } else { m.tgt_vocab().eos() };
                sum += m.decoder_logprob_dist(&TokenSeq::new(tgt[..i].to_vec()), &enc).unwrap().get(next);
            }
            let whole = m.sequence_logprob(&src, &TokenSeq::new(tgt)).unwrap();
            prop_assert!((whole - sum).abs() < 1e-9);
            prop_assert!(whole <= 0.0);
        }
    }
}
