use std::cmp::Ordering;
use std::collections::HashMap;
use std::rc::Rc;

use super::{step_dists, step_increment, StepDists, DecodeOptions, DecodeResult, FusionSystem, IlmContext};
use crate::error::{Error, Result};
use crate::ngram::NGramLM;
use crate::seq2seq::{DecoderState, EncoderOutput, ToySeq2Seq};
use crate::types::{FusionWeights, TokenId, TokenSeq};

/// A partial or finished beam entry.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    /// Surface tokens (EOS never stored here).
    pub prefix: Vec<TokenId>,
    pub base: f64,
    pub ilm: f64,
    pub elm: f64,
    /// Sum of per-step fused scores.
    pub fused: f64,
    pub state: DecoderState,
    pub finished: bool,
}

impl Hypothesis {
    fn into_result(self) -> DecodeResult {
        DecodeResult {
            tokens: TokenSeq::new(self.prefix),
            fused_score: self.fused,
            base_score: self.base,
            elm_score: self.elm,
            ilm_score: self.ilm,
        }
    }

    fn final_score(&self, length_norm: bool) -> f64 {
        if length_norm {
            self.fused / (self.prefix.len() + 1) as f64
        } else {
            self.fused
        }
    }
}

/// Higher score first; ties go to the lexicographically smaller token
/// sequence, and a proper prefix sorts before its extensions.
pub(crate) fn rank(a_score: f64, a_seq: &[TokenId], b_score: f64, b_seq: &[TokenId]) -> Ordering {
    b_score
        .partial_cmp(&a_score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a_seq.cmp(b_seq))
}

struct Candidate {
    parent: usize,
    tok: TokenId,
    inc: (f64, f64, f64, f64),
    fused: f64,
}

fn candidate_seq<'a>(
    live: &'a [Hypothesis],
    c: &Candidate,
    eos: TokenId,
) -> impl Iterator<Item = TokenId> + 'a {
    let tail = (c.tok != eos).then_some(c.tok);
    live[c.parent].prefix.iter().copied().chain(tail)
}

type DistCache = HashMap<Vec<TokenId>, Rc<StepDists>>;

enum Scoring<'a, 'c> {
    Fused {
        sys: FusionSystem<'a>,
        w: FusionWeights,
        cache: Option<&'c mut DistCache>,
    },
    BaseOnly,
}

fn search(
    model: &ToySeq2Seq,
    mut scoring: Scoring<'_, '_>,
    enc: &EncoderOutput,
    opts: &DecodeOptions,
) -> Result<DecodeResult> {
    if opts.beam == 0 {
        return Err(Error::invalid("beam must be >= 1"));
    }
    if opts.max_len == 0 {
        return Err(Error::invalid("max_len must be >= 1"));
    }
    let vocab = model.tgt_vocab();
    let (bos, eos) = (vocab.bos(), vocab.eos());
    let v = vocab.len() as TokenId;

    let mut live = vec![Hypothesis {
        prefix: Vec::new(),
        base: 0.0,
        ilm: 0.0,
        elm: 0.0,
        fused: 0.0,
        state: model.start(),
        finished: false,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();

    for step in 0..=opts.max_len {
        if live.is_empty() {
            break;
        }
        let forced = step == opts.max_len;
        let mut cands: Vec<Candidate> = Vec::with_capacity(live.len() * v as usize);
        for (pi, hyp) in live.iter().enumerate() {
            let toks: Box<dyn Iterator<Item = TokenId>> = if forced {
                Box::new(std::iter::once(eos))
            } else {
                Box::new((0..v).filter(|&t| t != bos))
            };
            match &mut scoring {
                Scoring::Fused { sys, w, cache } => {
                    let dists = match cache {
                        Some(c) => match c.get(&hyp.prefix) {
                            Some(d) => Rc::clone(d),
                            None => {
                                let d = Rc::new(step_dists(sys, &hyp.state, &hyp.prefix, enc)?);
                                c.insert(hyp.prefix.clone(), Rc::clone(&d));
                                d
                            }
                        },
                        None => Rc::new(step_dists(sys, &hyp.state, &hyp.prefix, enc)?),
                    };
                    for tok in toks {
                        let inc = step_increment(&dists, tok, eos, *w, opts.fuse_eos);
                        cands.push(Candidate {
                            parent: pi,
                            tok,
                            inc,
                            fused: hyp.fused + inc.3,
                        });
                    }
                }
                Scoring::BaseOnly => {
                    let base = model.next_dist(&hyp.state, enc)?;
                    for tok in toks {
                        let b = base.get(tok);
                        cands.push(Candidate {
                            parent: pi,
                            tok,
                            inc: (b, 0.0, 0.0, b),
                            fused: hyp.fused + b,
                        });
                    }
                }
            }
        }

        cands.sort_by(|a, b| {
            b.fused
                .partial_cmp(&a.fused)
                .unwrap_or(Ordering::Equal)
                .then_with(|| candidate_seq(&live, a, eos).cmp(candidate_seq(&live, b, eos)))
        });
        if !forced {
            cands.truncate(opts.beam);
        }

        let mut next = Vec::with_capacity(cands.len());
        for c in cands {
            let parent = &live[c.parent];
            let (db, di, de, _) = c.inc;
            let mut hyp = Hypothesis {
                prefix: parent.prefix.clone(),
                base: parent.base + db,
                ilm: parent.ilm + di,
                elm: parent.elm + de,
                fused: c.fused,
                state: parent.state.clone(),
                finished: c.tok == eos,
            };
            if hyp.finished {
                finished.push(hyp);
            } else {
                hyp.prefix.push(c.tok);
                hyp.state = model.advance(&parent.state, c.tok);
                next.push(hyp);
            }
        }
        live = next;
    }

    finished
        .into_iter()
        .min_by(|a, b| {
            rank(
                a.final_score(opts.length_norm),
                &a.prefix,
                b.final_score(opts.length_norm),
                &b.prefix,
            )
        })
        .map(Hypothesis::into_result)
        .ok_or_else(|| Error::invalid("beam search produced no hypothesis"))
}

/// Beam search over the fused objective. Every live hypothesis is expanded
/// with all non-BOS tokens; the best `beam` expansions survive, those ending in
/// EOS move to the finished pool, and hypotheses reaching `max_len` tokens are
/// closed with a scored EOS step.
pub fn beam_search(
    model: &ToySeq2Seq,
    ctx: &IlmContext,
    elm: &NGramLM,
    source: &TokenSeq,
    w: FusionWeights,
    opts: &DecodeOptions,
) -> Result<DecodeResult> {
    let sys = FusionSystem::new(model, ctx, elm)?;
    let enc = model.encode(source)?;
    search(model, Scoring::Fused { sys, w, cache: None }, &enc, opts)
}

/// The same search ranking by the base model alone; component scores other
/// than `base_score` are zero.
pub fn beam_search_base(
    model: &ToySeq2Seq,
    source: &TokenSeq,
    opts: &DecodeOptions,
) -> Result<DecodeResult> {
    search(model, Scoring::BaseOnly, &model.encode(source)?, opts)
}

/// One source sentence prepared for decoding under many weight pairs.
/// Component distributions depend only on the prefix, so they are computed
/// once and shared by every later [`CachedSource::decode`] call; results are
/// bit-identical to [`beam_search`].
pub struct CachedSource<'a> {
    sys: FusionSystem<'a>,
    enc: EncoderOutput,
    cache: DistCache,
}

impl<'a> CachedSource<'a> {
    pub fn new(sys: FusionSystem<'a>, source: &TokenSeq) -> Result<Self> {
        Ok(Self {
            enc: sys.model.encode(source)?,
            sys,
            cache: HashMap::new(),
        })
    }

    pub fn decode(&mut self, w: FusionWeights, opts: &DecodeOptions) -> Result<DecodeResult> {
        let scoring = Scoring::Fused {
            sys: self.sys,
            w,
            cache: Some(&mut self.cache),
        };
        search(self.sys.model, scoring, &self.enc, opts)
    }

    /// Number of distinct prefixes scored so far.
    pub fn cached_prefixes(&self) -> usize {
        self.cache.len()
    }
}
