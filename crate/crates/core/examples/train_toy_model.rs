//! Train the attention encoder-decoder on a tiny copy-like task and check
//! gradients against finite differences.

use fusedec::fusion::{beam_search_base, DecodeOptions};
use fusedec::seq2seq::{numerical_grad_check, train, ToySeq2Seq, TrainConfig};
use fusedec::types::Vocabulary;

fn main() -> fusedec::Result<()> {
    let sv = Vocabulary::with_specials(["I", "am", "new", "tired"])?;
    let tv = Vocabulary::with_specials(["soy", "estoy", "nueva", "cansada"])?;
    let pairs: Vec<_> = [("I am new", "soy nueva"), ("I am tired", "estoy cansada")]
        .iter()
        .map(|(s, t)| (sv.encode(s), tv.encode(t)))
        .collect();

    let init = ToySeq2Seq::new(sv.clone(), tv.clone(), 8, 12, 7);
    let err = numerical_grad_check(&init, (&pairs[0].0, &pairs[0].1), 1e-4)?;
    println!("gradient check max relative error {err:.2e}");

    let cfg = TrainConfig { epochs: 60, ..TrainConfig::default() };
    let (model, report) = train(&init, &pairs, &cfg)?;
    println!("loss {:.4} -> {:.4}", report.epoch_loss[0], report.epoch_loss.last().unwrap());

    for (src, _) in &pairs {
        let out = beam_search_base(&model, src, &DecodeOptions::default())?;
        println!("{:<12} -> {}", sv.decode(src), tv.decode(&out.tokens));
    }
    Ok(())
}
