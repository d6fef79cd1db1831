//! The ILM context is the grand mean of every encoder frame in the training
//! set, and the ILM is the decoder attending to that single frame.

use fusedec::fusion::{compute_ilm_context, ilm_logprob_dist, IlmContext};
use fusedec::seq2seq::{EncoderOutput, ToySeq2Seq};
use fusedec::types::{TokenSeq, Vocabulary};

fn frames(v: &[f64]) -> EncoderOutput {
    EncoderOutput::new(v.iter().map(|&x| vec![x]).collect()).unwrap()
}

fn main() -> fusedec::Result<()> {
    // per-sample means would average to 1.0
    let ctx = IlmContext::from_encoder_outputs(&[frames(&[2.0]), frames(&[0.0, 0.0, 0.0])])?;
    println!("grand mean {:?} over {} frames", ctx.c, ctx.frames_total);

    let sv = Vocabulary::with_specials(["a", "b", "c"])?;
    let tv = Vocabulary::with_specials(["x", "y"])?;
    let model = ToySeq2Seq::new(sv.clone(), tv.clone(), 4, 6, 3);
    let sources: Vec<TokenSeq> = ["a b", "c", "a a c b"].iter().map(|s| sv.encode(s)).collect();
    let ctx = compute_ilm_context(&model, &sources)?;
    println!("c = {:?}", ctx.c.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());

    let prefix = tv.encode("x");
    let ilm = ilm_logprob_dist(&model, &ctx, &prefix)?;
    for s in &sources {
        let enc = model.encode(s)?;
        let base = model.decoder_logprob_dist(&prefix, &enc)?;
        println!("source {:<8} base p(y|x) {:.6}  ilm p(y|x) {:.6}", sv.decode(s), base.get(tv.id("y").unwrap()).exp(), ilm.get(tv.id("y").unwrap()).exp());
    }
    Ok(())
}
