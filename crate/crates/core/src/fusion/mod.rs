//! ILM estimation, log-linear fusion and search.
//!
//! Every candidate token `y_t` is ranked by the per-step score
//!
//! ```text
//! log p_base(y_t | y_<t, x) - beta_ilm * log p_ilm(y_t | y_<t) + beta_elm * log p_elm(y_t | y_<t)
//! ```
//!
//! summed over the sequence, EOS included unless `fuse_eos` is off. Scores
//! are never renormalized after fusion.

mod beam;
mod exhaustive;

pub use beam::{beam_search, beam_search_base, CachedSource, Hypothesis};
pub use exhaustive::{exhaustive_decode, EXHAUSTIVE_LIMIT};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ngram::NGramLM;
use crate::seq2seq::{DecoderState, EncoderOutput, ToySeq2Seq};
use crate::types::{FusionWeights, LogProbDist, TokenId, TokenSeq};

pub const DEFAULT_BEAM: usize = 5;
pub const DEFAULT_MAX_LEN: usize = 10;

/// Grand mean of encoder frames over a set of training sources.
#[derive(Debug, Clone, PartialEq)]
pub struct IlmContext {
    pub c: Vec<f64>,
    pub frames_total: usize,
    pub samples_total: usize,
    enc: EncoderOutput,
}

impl IlmContext {
    pub fn new(c: Vec<f64>, frames_total: usize, samples_total: usize) -> Result<Self> {
        if samples_total == 0 || frames_total < samples_total {
            return Err(Error::invalid(
                "ILM context needs frames_total >= samples_total >= 1",
            ));
        }
        let enc = EncoderOutput::new(vec![c.clone()])?;
        Ok(Self {
            c,
            frames_total,
            samples_total,
            enc,
        })
    }

    /// `c = (1 / sum_n T_n) * sum_n sum_t h_{n,t}`: one mean over all frames,
    /// not a mean of per-sample means.
    pub fn from_encoder_outputs(outputs: &[EncoderOutput]) -> Result<Self> {
        let first = outputs.first().ok_or(Error::EmptyCorpus)?;
        let dim = first.dim();
        let mut sum = vec![0.0; dim];
        let mut frames = 0usize;
        for out in outputs {
            if out.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: out.dim(),
                });
            }
            for f in out.frames() {
                for (s, v) in sum.iter_mut().zip(f) {
                    *s += v;
                }
                frames += 1;
            }
        }
        let c = sum.into_iter().map(|s| s / frames as f64).collect();
        Self::new(c, frames, outputs.len())
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// The single-frame encoder output `[c]` fed to the decoder.
    pub fn as_encoder_output(&self) -> &EncoderOutput {
        &self.enc
    }

    pub fn to_text(&self) -> String {
        let vals: Vec<String> = self.c.iter().map(|v| format!("{v:.16e}")).collect();
        format!(
            "ILMCTX v1 {} {} {}\n{}\n",
            self.c.len(),
            self.frames_total,
            self.samples_total,
            vals.join(" ")
        )
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(origin, 1, "missing ILMCTX header"))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 5 || f[0] != "ILMCTX" || f[1] != "v1" {
            return Err(Error::parse(origin, 1, format!("bad header {header:?}")));
        }
        let num = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::parse(origin, 1, format!("bad integer {s:?}")))
        };
        let (dim, frames, samples) = (num(f[2])?, num(f[3])?, num(f[4])?);
        let body = lines
            .next()
            .ok_or_else(|| Error::parse(origin, 2, "missing context vector"))?;
        let c: Vec<f64> = body
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(origin, 2, "bad number"))?;
        if c.len() != dim {
            return Err(Error::parse(
                origin,
                2,
                format!("expected {dim} values, got {}", c.len()),
            ));
        }
        Self::new(c, frames, samples).map_err(|e| Error::parse(origin, 1, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}

/// Encodes every training source and averages all frames.
pub fn compute_ilm_context(model: &ToySeq2Seq, training_sources: &[TokenSeq]) -> Result<IlmContext> {
    if training_sources.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let outputs = training_sources
        .iter()
        .map(|s| model.encode(s))
        .collect::<Result<Vec<_>>>()?;
    IlmContext::from_encoder_outputs(&outputs)
}

/// `p_ilm(. | prefix)`: the base decoder attending over the single frame `c`.
pub fn ilm_logprob_dist(
    model: &ToySeq2Seq,
    ctx: &IlmContext,
    prefix: &TokenSeq,
) -> Result<LogProbDist> {
    model.decoder_logprob_dist(prefix, ctx.as_encoder_output())
}

/// Unnormalized per-token fused scores `base - beta_ilm * ilm + beta_elm * elm`.
pub fn fused_step_scores(
    base: &LogProbDist,
    ilm: &LogProbDist,
    elm: &LogProbDist,
    w: FusionWeights,
) -> Result<Vec<f64>> {
    if ilm.len() != base.len() {
        return Err(Error::DimensionMismatch {
            expected: base.len(),
            got: ilm.len(),
        });
    }
    if elm.len() != base.len() {
        return Err(Error::DimensionMismatch {
            expected: base.len(),
            got: elm.len(),
        });
    }
    Ok(base
        .values()
        .iter()
        .zip(ilm.values())
        .zip(elm.values())
        .map(|((&b, &i), &e)| fuse(b, i, e, w))
        .collect())
}

#[inline]
pub(crate) fn fuse(base: f64, ilm: f64, elm: f64, w: FusionWeights) -> f64 {
    base - w.beta_ilm * ilm + w.beta_elm * elm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeOptions {
    pub beam: usize,
    pub max_len: usize,
    /// Rank finished hypotheses by fused score divided by length (EOS included).
    pub length_norm: bool,
    /// Apply the ILM and ELM terms to the EOS step too.
    pub fuse_eos: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            beam: DEFAULT_BEAM,
            max_len: DEFAULT_MAX_LEN,
            length_norm: false,
            fuse_eos: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Surface tokens, EOS stripped.
    pub tokens: TokenSeq,
    pub fused_score: f64,
    pub base_score: f64,
    pub elm_score: f64,
    pub ilm_score: f64,
}

impl DecodeResult {
    pub fn recombined(&self, w: FusionWeights) -> f64 {
        fuse(self.base_score, self.ilm_score, self.elm_score, w)
    }
}

/// Everything the fused objective needs besides the source and weights.
#[derive(Debug, Clone, Copy)]
pub struct FusionSystem<'a> {
    pub model: &'a ToySeq2Seq,
    pub ilm: &'a IlmContext,
    pub elm: &'a NGramLM,
}

impl<'a> FusionSystem<'a> {
    pub fn new(model: &'a ToySeq2Seq, ilm: &'a IlmContext, elm: &'a NGramLM) -> Result<Self> {
        if ilm.dim() != model.embed_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.embed_dim(),
                got: ilm.dim(),
            });
        }
        if elm.vocab_size() != model.tgt_vocab().len() {
            return Err(Error::DimensionMismatch {
                expected: model.tgt_vocab().len(),
                got: elm.vocab_size(),
            });
        }
        Ok(Self { model, ilm, elm })
    }

    pub fn decode(
        &self,
        source: &TokenSeq,
        w: FusionWeights,
        opts: &DecodeOptions,
    ) -> Result<DecodeResult> {
        beam_search(self.model, self.ilm, self.elm, source, w, opts)
    }
}

/// Per-step component log-probs for one hypothesis.
pub(crate) struct StepDists {
    pub base: LogProbDist,
    pub ilm: LogProbDist,
    pub elm: LogProbDist,
}

pub(crate) fn step_dists(
    sys: &FusionSystem<'_>,
    state: &DecoderState,
    prefix: &[TokenId],
    enc: &EncoderOutput,
) -> Result<StepDists> {
    Ok(StepDists {
        base: sys.model.next_dist(state, enc)?,
        ilm: sys.model.next_dist(state, sys.ilm.as_encoder_output())?,
        elm: sys.elm.logprob_dist(prefix),
    })
}

/// Component increments `(base, ilm, elm, fused)` for appending `tok`.
pub(crate) fn step_increment(
    d: &StepDists,
    tok: TokenId,
    eos: TokenId,
    w: FusionWeights,
    fuse_eos: bool,
) -> (f64, f64, f64, f64) {
    let b = d.base.get(tok);
    if tok == eos && !fuse_eos {
        return (b, 0.0, 0.0, b);
    }
    let i = d.ilm.get(tok);
    let e = d.elm.get(tok);
    (b, i, e, fuse(b, i, e, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Vocabulary;

    fn enc(frames: &[&[f64]]) -> EncoderOutput {
        EncoderOutput::new(frames.iter().map(|f| f.to_vec()).collect()).unwrap()
    }

    #[test]
    fn two_frame_average() {
        let ctx = IlmContext::from_encoder_outputs(&[enc(&[&[1.0, 0.0], &[0.0, 1.0]])]).unwrap();
        assert_eq!(ctx.c, vec![0.5, 0.5]);
        assert_eq!((ctx.frames_total, ctx.samples_total), (2, 1));
    }

    #[test]
    fn grand_mean_not_mean_of_means() {
        let ctx = IlmContext::from_encoder_outputs(&[
            enc(&[&[2.0]]),
            enc(&[&[0.0], &[0.0], &[0.0]]),
        ])
        .unwrap();
        // per-sample means would give (2 + 0) / 2 = 1.0
        assert_eq!(ctx.c, vec![0.5]);
        assert_eq!((ctx.frames_total, ctx.samples_total), (4, 2));
    }

    #[test]
    fn constant_frames_average_to_themselves() {
        let f: &[f64] = &[0.25, -0.75, 0.5];
        let ctx = IlmContext::from_encoder_outputs(&[enc(&[f, f]), enc(&[f])]).unwrap();
        assert_eq!(ctx.c, f.to_vec());
    }

    #[test]
    fn empty_sources_rejected() {
        assert!(IlmContext::from_encoder_outputs(&[]).is_err());
        let (s, t) = (
            Vocabulary::with_specials(["a"]).unwrap(),
            Vocabulary::with_specials(["b"]).unwrap(),
        );
        let m = ToySeq2Seq::new(s, t, 3, 3, 1);
        assert!(compute_ilm_context(&m, &[]).is_err());
    }

    #[test]
    fn ilm_ctx_text_roundtrip() {
        let ctx = IlmContext::new(vec![0.1, -1.0 / 3.0], 7, 3).unwrap();
        let back = IlmContext::from_text(&ctx.to_text(), "c").unwrap();
        assert_eq!(back, ctx);
        assert!(ctx.to_text().starts_with("ILMCTX v1 2 7 3\n"));
    }

    fn dist(p: &[f64]) -> LogProbDist {
        LogProbDist::from_log_probs(p.iter().map(|v| v.ln()).collect()).unwrap()
    }

    #[test]
    fn zero_weights_return_base() {
        let base = dist(&[0.2, 0.5, 0.3]);
        let ilm = dist(&[0.6, 0.2, 0.2]);
        let elm = dist(&[0.1, 0.1, 0.8]);
        let out = fused_step_scores(&base, &ilm, &elm, FusionWeights::OFF).unwrap();
        assert_eq!(out, base.values().to_vec());
    }

    #[test]
    fn uniform_elm_shifts_by_constant() {
        let base = dist(&[0.2, 0.5, 0.3]);
        let ilm = dist(&[0.6, 0.2, 0.2]);
        let elm = dist(&[1.0 / 3.0; 3]);
        let w = FusionWeights::new(0.0, 1.0).unwrap();
        let out = fused_step_scores(&base, &ilm, &elm, w).unwrap();
        let shift = -(3.0f64).ln();
        for (o, b) in out.iter().zip(base.values()) {
            assert!((o - (b + shift)).abs() < 1e-12);
        }
        let argmax = |v: &[f64]| {
            v.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        assert_eq!(argmax(&out), argmax(base.values()));
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn hand_weights_en_es_feminine() {
        // beta_ilm = 0.285, beta_elm = 0.390
        let base = dist(&[0.2, 0.5, 0.3]);
        let ilm = dist(&[0.6, 0.2, 0.2]);
        let elm = dist(&[0.1, 0.1, 0.8]);
        let w = FusionWeights::new(0.285, 0.390).unwrap();
        let out = fused_step_scores(&base, &ilm, &elm, w).unwrap();
        // ln values computed by hand:
        // ln .2 = -1.6094379, ln .5 = -0.6931472, ln .3 = -1.2039728
        // ln .6 = -0.5108256, ln .1 = -2.3025851, ln .8 = -0.2231436
        let want = [
            -1.6094379 + 0.285 * 0.5108256 - 0.390 * 2.3025851,
            -0.6931472 + 0.285 * 1.6094379 - 0.390 * 2.3025851,
            -1.2039728 + 0.285 * 1.6094379 - 0.390 * 0.2231436,
        ];
        for (o, w) in out.iter().zip(want) {
            assert!((o - w).abs() < 1e-6, "{o} vs {w}");
        }
        // the ELM flips the ranking towards token 2
        assert!(out[2] > out[1]);
        assert!(base.get(1) > base.get(2));
    }

    #[test]
    fn length_mismatch_rejected() {
        let a = dist(&[0.5, 0.5]);
        let b = dist(&[0.2, 0.3, 0.5]);
        assert!(fused_step_scores(&a, &a, &b, FusionWeights::OFF).is_err());
        assert!(fused_step_scores(&a, &b, &a, FusionWeights::OFF).is_err());
    }
}
