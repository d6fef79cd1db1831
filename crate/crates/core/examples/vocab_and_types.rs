//! Vocabularies, token sequences, log-prob distributions and fusion weights.

use fusedec::types::{FusionWeights, LogProbDist, Vocabulary};

fn main() -> fusedec::Result<()> {
    let vocab = Vocabulary::with_specials(["soy", "nueva", "nuevo", "aquí"])?;
    let ids = vocab.encode("soy nueva en aquí");
    println!("ids {:?}", ids.ids());
    println!("round trip {:?}", vocab.decode(&ids));
    print!("{}", vocab.to_text());

    let dist = LogProbDist::from_logits(&[0.0, 1.0, 2.0, -1.0, 0.5, 0.5, 0.0])?;
    println!("argmax {} ({:?})", dist.argmax(), vocab.token(dist.argmax()));

    let w = FusionWeights::new(0.2, 0.6)?;
    println!("weights {w}, off {}", FusionWeights::OFF);
    assert!(FusionWeights::new(1.5, 0.0).is_err());
    Ok(())
}
