use super::beam::rank;
use super::{step_dists, step_increment, DecodeResult, FusionSystem, IlmContext};
use crate::error::{Error, Result};
use crate::ngram::NGramLM;
use crate::seq2seq::{DecoderState, EncoderOutput};
use crate::seq2seq::ToySeq2Seq;
use crate::types::{FusionWeights, TokenId, TokenSeq};

/// Upper bound on `V^max_len` accepted by [`exhaustive_decode`].
pub const EXHAUSTIVE_LIMIT: f64 = 1e6;

struct Walk<'a> {
    sys: FusionSystem<'a>,
    enc: EncoderOutput,
    w: FusionWeights,
    max_len: usize,
    fuse_eos: bool,
    alphabet: Vec<TokenId>,
    eos: TokenId,
    best: Option<DecodeResult>,
}

impl Walk<'_> {
    fn visit(
        &mut self,
        prefix: &mut Vec<TokenId>,
        state: &DecoderState,
        acc: (f64, f64, f64, f64),
    ) -> Result<()> {
        let dists = step_dists(&self.sys, state, prefix, &self.enc)?;

        let (b, i, e, f) = step_increment(&dists, self.eos, self.eos, self.w, self.fuse_eos);
        let done = DecodeResult {
            tokens: TokenSeq::new(prefix.clone()),
            base_score: acc.0 + b,
            ilm_score: acc.1 + i,
            elm_score: acc.2 + e,
            fused_score: acc.3 + f,
        };
        let better = match &self.best {
            None => true,
            Some(cur) => rank(
                done.fused_score,
                done.tokens.ids(),
                cur.fused_score,
                cur.tokens.ids(),
            )
            .is_lt(),
        };
        if better {
            self.best = Some(done);
        }

        if prefix.len() == self.max_len {
            return Ok(());
        }
        for k in 0..self.alphabet.len() {
            let tok = self.alphabet[k];
            let (b, i, e, f) = step_increment(&dists, tok, self.eos, self.w, self.fuse_eos);
            let next = self.sys.model.advance(state, tok);
            prefix.push(tok);
            self.visit(prefix, &next, (acc.0 + b, acc.1 + i, acc.2 + e, acc.3 + f))?;
            prefix.pop();
        }
        Ok(())
    }
}

/// Brute-force argmax of the fused objective over every EOS-terminated
/// sequence with at most `max_len` surface tokens (BOS and EOS never appear
/// as surface tokens). Ties follow the beam-search rule.
pub fn exhaustive_decode(
    model: &ToySeq2Seq,
    ctx: &IlmContext,
    elm: &NGramLM,
    source: &TokenSeq,
    w: FusionWeights,
    max_len: usize,
    fuse_eos: bool,
) -> Result<DecodeResult> {
    let v = model.tgt_vocab().len() as f64;
    let space = v.powi(max_len as i32);
    if space > EXHAUSTIVE_LIMIT {
        return Err(Error::SearchSpaceTooLarge(space));
    }
    let sys = FusionSystem::new(model, ctx, elm)?;
    let vocab = model.tgt_vocab();
    let alphabet = (0..vocab.len() as TokenId)
        .filter(|&t| t != vocab.bos() && t != vocab.eos())
        .collect();
    let mut walk = Walk {
        sys,
        enc: model.encode(source)?,
        w,
        max_len,
        fuse_eos,
        alphabet,
        eos: vocab.eos(),
        best: None,
    };
    walk.visit(&mut Vec::new(), &model.start(), (0.0, 0.0, 0.0, 0.0))?;
    Ok(walk.best.expect("the empty sequence is always scored"))
}
