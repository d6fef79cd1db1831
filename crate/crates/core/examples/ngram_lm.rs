//! Add-k smoothed n-gram LM over a target vocabulary.

use fusedec::ngram::train_ngram_for;
use fusedec::types::{TokenSeq, Vocabulary};

fn main() -> fusedec::Result<()> {
    let vocab = Vocabulary::with_specials(["soy", "estoy", "nueva", "cansada", "nuevo", "cansado"])?;
    let corpus: Vec<TokenSeq> = ["soy nueva", "estoy cansada", "soy nueva", "estoy cansada"]
        .iter()
        .map(|s| vocab.encode(s))
        .collect();
    let lm = train_ngram_for(&vocab, &corpus, 3, 0.1)?;

    for text in ["soy nueva", "soy nuevo", "estoy cansado"] {
        let seq = vocab.encode(text);
        println!("{text:<14} log p = {:.4}", lm.sequence_logprob(&seq));
    }
    let dist = lm.logprob_dist(vocab.encode("soy").ids());
    let sum: f64 = dist.values().iter().map(|v| v.exp()).sum();
    println!("p(. | soy) sums to {sum:.12}");
    println!("p(nueva | soy) = {:.4}", dist.get(vocab.id("nueva").unwrap()).exp());

    let back = fusedec::ngram::NGramLM::from_text(&lm.to_text(), "memory")?;
    assert_eq!(back.sequence_logprob(&vocab.encode("soy nueva")), lm.sequence_logprob(&vocab.encode("soy nueva")));
    Ok(())
}
