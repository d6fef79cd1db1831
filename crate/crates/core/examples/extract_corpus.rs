//! Split a monolingual corpus into feminine and masculine first-person lines.

use fusedec::extract::{corpus_stats, extract, PatternSet, ES_PATTERNS};

fn main() -> fusedec::Result<()> {
    let patterns = PatternSet::from_toml(ES_PATTERNS)?;
    let corpus = [
        "Soy nueva en esta zona.",
        "Estoy cansado de esperar.",
        "Hoy me siento sola.",
        "Ella está cansada.",
        "Soy nuevo, pero estoy contenta.",
        "ESTOY SEGURO DE ELLO.",
    ];
    for line in corpus {
        println!("{:<34} {:?}", line, patterns.classify(line));
    }
    let ex = extract(&corpus, &patterns);
    println!("{:?}", ex.counts);
    print!("{}", corpus_stats(&ex.f, &ex.m).to_table());

    let again = extract(&ex.f, &patterns);
    assert_eq!(again.f, ex.f);
    Ok(())
}
