//! Beam search with `base - beta_ilm * ilm + beta_elm * elm`, compared with
//! the exhaustive oracle.

use fusedec::fusion::{beam_search, compute_ilm_context, exhaustive_decode, DecodeOptions};
use fusedec::ngram::train_ngram_for;
use fusedec::seq2seq::{train, ToySeq2Seq, TrainConfig};
use fusedec::types::{FusionWeights, TokenSeq, Vocabulary};

fn main() -> fusedec::Result<()> {
    let sv = Vocabulary::with_specials(["I", "am", "new"])?;
    let tv = Vocabulary::with_specials(["soy", "nueva", "nuevo"])?;
    // the parallel data prefers the masculine form 3:1
    let pairs: Vec<_> = ["soy nuevo", "soy nuevo", "soy nuevo", "soy nueva"]
        .iter()
        .map(|t| (sv.encode("I am new"), tv.encode(t)))
        .collect();
    let (model, _) = train(&ToySeq2Seq::new(sv.clone(), tv.clone(), 6, 8, 1), &pairs, &TrainConfig { epochs: 40, ..TrainConfig::default() })?;
    let sources: Vec<TokenSeq> = pairs.iter().map(|p| p.0.clone()).collect();
    let ctx = compute_ilm_context(&model, &sources)?;
    let elm_f = train_ngram_for(&tv, &[tv.encode("soy nueva")], 2, 0.1)?;

    let src = sv.encode("I am new");
    let opts = DecodeOptions::default();
    for (bi, be) in [(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (1.0, 1.0)] {
        let w = FusionWeights::new(bi, be)?;
        let r = beam_search(&model, &ctx, &elm_f, &src, w, &opts)?;
        println!(
            "{w}  {:<10} fused {:>8.4}  base {:>8.4}  ilm {:>8.4}  elm {:>8.4}",
            tv.decode(&r.tokens),
            r.fused_score,
            r.base_score,
            r.ilm_score,
            r.elm_score
        );
    }

    let w = FusionWeights::new(0.3, 0.7)?;
    let wide = DecodeOptions { beam: 256, max_len: 3, ..opts };
    let b = beam_search(&model, &ctx, &elm_f, &src, w, &wide)?;
    let x = exhaustive_decode(&model, &ctx, &elm_f, &src, w, 3, true)?;
    println!("beam {:?} = exhaustive {:?}: {}", tv.decode(&b.tokens), tv.decode(&x.tokens), b.tokens == x.tokens);
    Ok(())
}
