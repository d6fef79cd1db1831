//! BLEU plus term coverage and gender accuracy on an annotated set.

use fusedec::eval::{bleu_corpus, AnnotatedSentence, AnnotatedTerm, EvalReport, EvalSet};
use fusedec::types::Gender;

fn main() -> fusedec::Result<()> {
    let set = EvalSet::new(vec![
        AnnotatedSentence {
            id: "1".into(),
            source: "I'm new in this area.".into(),
            reference: "Soy nueva en esta zona.".into(),
            terms: vec![AnnotatedTerm::new("nueva", "nuevo", Gender::F)?],
        },
        AnnotatedSentence {
            id: "2".into(),
            source: "I'm tired of waiting.".into(),
            reference: "Estoy cansado de esperar.".into(),
            terms: vec![AnnotatedTerm::new("cansado", "cansada", Gender::M)?],
        },
        AnnotatedSentence {
            id: "3".into(),
            source: "I had to be true to myself.".into(),
            reference: "Debía ser fiel a mí misma.".into(),
            terms: vec![AnnotatedTerm::new("misma", "mismo", Gender::F)?],
        },
    ])?;
    let hyps = ["Soy nuevo en esta zona.", "Estoy cansado de esperar.", "Debía ser leal conmigo."];

    println!("BLEU {:.2}", bleu_corpus(&hyps, &set.references())?);
    let report = EvalReport::compute(&hyps, &set)?;
    print!("{}", report.to_key_values());

    print!("{}", set.to_text());
    Ok(())
}
