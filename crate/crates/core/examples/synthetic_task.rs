//! The synthetic gender-bias task: skewed speakers, a voice marker on the
//! source and gendered first-person tokens on the target.

use fusedec::synth::{generate_eval, generate_monolingual, generate_parallel, Condition, SynthTaskConfig};
use fusedec::types::Gender;

fn main() -> fusedec::Result<()> {
    let cfg = SynthTaskConfig { n_train: 2000, n_eval: 6, n_mono: 3, ..SynthTaskConfig::default() };
    print!("{}", cfg.to_toml());

    let train = generate_parallel(&cfg)?;
    let male = train.iter().filter(|s| s.speaker_gender == Gender::M).count();
    let matched = train.iter().filter(|s| s.speaker_gender == s.voice).count();
    println!("train: {male}/{} male speakers, {matched} with a matching voice", train.len());
    for s in &train[..3] {
        println!("  [{} voice {}] {}  =>  {}", s.speaker_gender, s.voice, s.source, s.target);
    }

    for g in Gender::BOTH {
        println!("mono {g}: {:?}", generate_monolingual(&cfg, g)?);
    }
    for c in Condition::BOTH {
        let set = generate_eval(&cfg, c)?;
        println!("eval {}:", c.as_str());
        for s in &set.sentences[..2] {
            let t = &s.terms[0];
            println!("  {}  =>  {}  (correct {} / wrong {})", s.source, s.reference, t.correct_form, t.wrong_form);
        }
    }
    Ok(())
}
