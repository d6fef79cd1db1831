//! Synthetic translation task with a controllable speaker-gender skew.
//!
//! A source sentence is a voice marker (`VF`/`VM`) followed by two content
//! words and one ungendered lemma per gendered slot, in shuffled order. The
//! target lays the translations out in a fixed template:
//!
//! ```text
//! source:  VF  n1  s3  s14  n5         (order shuffled after the voice)
//! target:  c3  g1_F  c14  g5_F
//! ```
//!
//! Slot `k` draws its lemma from the `k`-th block of [`LEMMAS_PER_SLOT`]
//! lemmas; lemma `n{i}` translates to `g{i}_F` or `g{i}_M` according to the
//! speaker gender. The first content word comes from the lower half of the
//! lexicon and the second from the upper half, so the template order is
//! recoverable from the bag of source words.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{AnnotatedSentence, AnnotatedTerm, EvalSet};
use crate::types::{Gender, TokenSeq, Vocabulary};

pub const LEMMAS_PER_SLOT: usize = 4;

/// Offsets mixed into the seed so every generated artifact has its own
/// stream.
const STREAM_PARALLEL: u64 = 0x7061_7261;
const STREAM_MONO_F: u64 = 0x6d6f_6e66;
const STREAM_MONO_M: u64 = 0x6d6f_6e6d;
const STREAM_EVAL: u64 = 0x6576_616c;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthTaskConfig {
    pub rng_seed: u64,
    pub n_train: usize,
    /// Fraction of male-speaker training samples.
    pub skew_rho: f64,
    /// Probability that the voice marker agrees with the speaker gender in
    /// the parallel training data.
    pub voice_match_q: f64,
    pub lexicon_size: usize,
    /// Each sentence has between 1 and this many gendered slots.
    pub gendered_slots: usize,
    pub n_eval: usize,
    /// Sentences per gender-pure monolingual corpus.
    pub n_mono: usize,
}

impl Default for SynthTaskConfig {
    fn default() -> Self {
        Self {
            rng_seed: 13,
            n_train: 10_000,
            skew_rho: 0.8,
            voice_match_q: 0.8,
            lexicon_size: 20,
            gendered_slots: 2,
            n_eval: 300,
            n_mono: 5_000,
        }
    }
}

impl SynthTaskConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("skew_rho", self.skew_rho), ("voice_match_q", self.voice_match_q)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        for (name, n) in [
            ("n_train", self.n_train),
            ("gendered_slots", self.gendered_slots),
            ("n_eval", self.n_eval),
            ("n_mono", self.n_mono),
        ] {
            if n == 0 {
                return Err(Error::invalid(format!("{name} must be >= 1")));
            }
        }
        if self.lexicon_size < 2 {
            return Err(Error::invalid("lexicon_size must be >= 2"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn lemma_count(&self) -> usize {
        self.gendered_slots * LEMMAS_PER_SLOT
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.rng_seed ^ stream.rotate_left(17))
    }
}

pub fn voice_token(g: Gender) -> String {
    format!("V{g}")
}

pub fn gendered_token(lemma: usize, g: Gender) -> String {
    format!("g{lemma}_{g}")
}

/// Source and target vocabularies for `cfg`.
pub fn vocabularies(cfg: &SynthTaskConfig) -> Result<(Vocabulary, Vocabulary)> {
    let mut src: Vec<String> = Gender::BOTH.iter().map(|&g| voice_token(g)).collect();
    src.extend((0..cfg.lexicon_size).map(|i| format!("s{i}")));
    src.extend((0..cfg.lemma_count()).map(|i| format!("n{i}")));
    let mut tgt: Vec<String> = (0..cfg.lexicon_size).map(|i| format!("c{i}")).collect();
    for g in Gender::BOTH {
        tgt.extend((0..cfg.lemma_count()).map(|i| gendered_token(i, g)));
    }
    Ok((Vocabulary::with_specials(src)?, Vocabulary::with_specials(tgt)?))
}

/// Content of one sentence before rendering.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Skeleton {
    content: [usize; 2],
    lemmas: Vec<usize>,
    source_order: Vec<usize>,
}

impl Skeleton {
    fn draw(cfg: &SynthTaskConfig, rng: &mut ChaCha8Rng) -> Self {
        let half = cfg.lexicon_size / 2;
        let content = [rng.gen_range(0..half), rng.gen_range(half..cfg.lexicon_size)];
        let slots = rng.gen_range(1..=cfg.gendered_slots);
        let lemmas: Vec<usize> = (0..slots)
            .map(|k| k * LEMMAS_PER_SLOT + rng.gen_range(0..LEMMAS_PER_SLOT))
            .collect();
        let mut source_order: Vec<usize> = (0..2 + slots).collect();
        source_order.shuffle(rng);
        Self {
            content,
            lemmas,
            source_order,
        }
    }

    fn source(&self, voice: Gender) -> String {
        let words: Vec<String> = self
            .content
            .iter()
            .map(|c| format!("s{c}"))
            .chain(self.lemmas.iter().map(|l| format!("n{l}")))
            .collect();
        let mut out = voice_token(voice);
        for &i in &self.source_order {
            out.push(' ');
            out.push_str(&words[i]);
        }
        out
    }

    fn target(&self, g: Gender) -> String {
        let mut toks = vec![format!("c{}", self.content[0])];
        for (k, &l) in self.lemmas.iter().enumerate() {
            toks.push(gendered_token(l, g));
            if k == 0 {
                toks.push(format!("c{}", self.content[1]));
            }
        }
        toks.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSample {
    pub source: String,
    pub target: String,
    pub speaker_gender: Gender,
    pub voice: Gender,
}

impl SynthSample {
    pub fn encode(&self, src: &Vocabulary, tgt: &Vocabulary) -> (TokenSeq, TokenSeq) {
        (src.encode(&self.source), tgt.encode(&self.target))
    }
}

/// `n_train` parallel samples; the speaker is male with probability
/// `skew_rho` and the voice marker matches the speaker with probability
/// `voice_match_q`.
pub fn generate_parallel(cfg: &SynthTaskConfig) -> Result<Vec<SynthSample>> {
    cfg.validate()?;
    let mut rng = cfg.rng(STREAM_PARALLEL);
    Ok((0..cfg.n_train)
        .map(|_| {
            let speaker = if rng.gen_bool(cfg.skew_rho) { Gender::M } else { Gender::F };
            let voice = if rng.gen_bool(cfg.voice_match_q) { speaker } else { speaker.opposite() };
            let sk = Skeleton::draw(cfg, &mut rng);
            SynthSample {
                source: sk.source(voice),
                target: sk.target(speaker),
                speaker_gender: speaker,
                voice,
            }
        })
        .collect())
}

/// `n_mono` target-side sentences whose gendered slots all carry `gender`.
pub fn generate_monolingual(cfg: &SynthTaskConfig, gender: Gender) -> Result<Vec<String>> {
    cfg.validate()?;
    let mut rng = cfg.rng(match gender {
        Gender::F => STREAM_MONO_F,
        Gender::M => STREAM_MONO_M,
    });
    Ok((0..cfg.n_mono)
        .map(|_| Skeleton::draw(cfg, &mut rng).target(gender))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Aligned,
    Swapped,
}

impl Condition {
    pub const BOTH: [Condition; 2] = [Condition::Aligned, Condition::Swapped];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Aligned => "aligned",
            Condition::Swapped => "swapped",
        }
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aligned" => Ok(Condition::Aligned),
            "swapped" => Ok(Condition::Swapped),
            other => Err(Error::invalid(format!("unknown condition {other:?}"))),
        }
    }
}

/// Annotated evaluation set. Voices alternate F, M, F, ... by index. In the
/// swapped condition the references and term annotations carry the gender
/// opposite to the voice; sources are identical across conditions.
pub fn generate_eval(cfg: &SynthTaskConfig, condition: Condition) -> Result<EvalSet> {
    cfg.validate()?;
    let mut rng = cfg.rng(STREAM_EVAL);
    let sentences = (0..cfg.n_eval)
        .map(|i| {
            let voice = if i % 2 == 0 { Gender::F } else { Gender::M };
            let g = match condition {
                Condition::Aligned => voice,
                Condition::Swapped => voice.opposite(),
            };
            let sk = Skeleton::draw(cfg, &mut rng);
            let terms = sk
                .lemmas
                .iter()
                .map(|&l| AnnotatedTerm {
                    correct_form: gendered_token(l, g),
                    wrong_form: gendered_token(l, g.opposite()),
                    gender: g,
                })
                .collect();
            AnnotatedSentence {
                id: format!("synth-{i:05}"),
                source: sk.source(voice),
                reference: sk.target(g),
                terms,
            }
        })
        .collect();
    EvalSet::new(sentences)
}

/// Flips every gendered form and annotation of `set`; sources stay as they are.
pub fn swap_eval(set: &EvalSet) -> EvalSet {
    let sentences = set
        .sentences
        .iter()
        .map(|s| {
            let mut reference: Vec<String> = s.reference.split(' ').map(str::to_string).collect();
            for t in &s.terms {
                if let Some(tok) = reference.iter_mut().find(|w| **w == t.correct_form) {
                    *tok = t.wrong_form.clone();
                }
            }
            AnnotatedSentence {
                id: s.id.clone(),
                source: s.source.clone(),
                reference: reference.join(" "),
                terms: s.terms.iter().map(AnnotatedTerm::swapped).collect(),
            }
        })
        .collect();
    EvalSet { sentences }
}

/// Voice gender of a synthetic source sentence.
pub fn voice_of(source: &str) -> Option<Gender> {
    match source.split_whitespace().next()? {
        "VF" => Some(Gender::F),
        "VM" => Some(Gender::M),
        _ => None,
    }
}

/// Files written by [`write_task`], relative to the output directory.
pub mod files {
    pub const CONFIG: &str = "task.toml";
    pub const TRAIN_SRC: &str = "train.src";
    pub const TRAIN_TGT: &str = "train.tgt";
    pub const TRAIN_SPEAKER: &str = "train.speaker";
    pub const MONO_F: &str = "mono.F.txt";
    pub const MONO_M: &str = "mono.M.txt";
    pub const EVAL_ALIGNED: &str = "eval.aligned.tsv";
    pub const EVAL_SWAPPED: &str = "eval.swapped.tsv";
    pub const SRC_VOCAB: &str = "src.vocab";
    pub const TGT_VOCAB: &str = "tgt.vocab";
    pub const PATTERNS: &str = "patterns.toml";
}

fn lines<S: AsRef<str>>(items: impl IntoIterator<Item = S>) -> String {
    let mut out = String::new();
    for s in items {
        let _ = writeln!(out, "{}", s.as_ref());
    }
    out
}

/// Writes the full task (config, vocabularies, parallel data, both monolingual
/// corpora, both eval sets and the demonstration pattern file) into `dir`.
/// Returns the written paths, in a fixed order.
pub fn write_task(cfg: &SynthTaskConfig, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (src_vocab, tgt_vocab) = vocabularies(cfg)?;
    let parallel = generate_parallel(cfg)?;
    let outputs: Vec<(&str, String)> = vec![
        (files::CONFIG, cfg.to_toml()),
        (files::SRC_VOCAB, src_vocab.to_text()),
        (files::TGT_VOCAB, tgt_vocab.to_text()),
        (files::TRAIN_SRC, lines(parallel.iter().map(|s| &s.source))),
        (files::TRAIN_TGT, lines(parallel.iter().map(|s| &s.target))),
        (
            files::TRAIN_SPEAKER,
            lines(parallel.iter().map(|s| s.speaker_gender.as_str())),
        ),
        (files::MONO_F, lines(generate_monolingual(cfg, Gender::F)?)),
        (files::MONO_M, lines(generate_monolingual(cfg, Gender::M)?)),
        (files::EVAL_ALIGNED, generate_eval(cfg, Condition::Aligned)?.to_text()),
        (files::EVAL_SWAPPED, generate_eval(cfg, Condition::Swapped)?.to_text()),
        (files::PATTERNS, crate::extract::SYNTH_PATTERNS.to_string()),
    ];
    let mut written = Vec::new();
    for (name, text) in outputs {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small(seed: u64) -> SynthTaskConfig {
        SynthTaskConfig {
            rng_seed: seed,
            n_train: 200,
            n_eval: 20,
            n_mono: 50,
            ..Default::default()
        }
    }

    #[test]
    fn full_skew_is_all_masculine() {
        let cfg = SynthTaskConfig { skew_rho: 1.0, ..small(1) };
        let data = generate_parallel(&cfg).unwrap();
        assert!(data.iter().all(|s| s.speaker_gender == Gender::M));
        assert!(data.iter().all(|s| !s.target.contains("_F")));
    }

    #[test]
    fn skew_fraction_concentrates() {
        // binomial sd at n = 10000, p = 0.8 is 0.004
        let cfg = SynthTaskConfig::default();
        let data = generate_parallel(&cfg).unwrap();
        let m = data.iter().filter(|s| s.speaker_gender == Gender::M).count();
        let frac = m as f64 / data.len() as f64;
        assert!((frac - 0.8).abs() <= 0.02, "{frac}");
    }

    #[test]
    fn voice_mismatch_rate() {
        let cfg = SynthTaskConfig { voice_match_q: 0.7, n_train: 5000, ..small(2) };
        let data = generate_parallel(&cfg).unwrap();
        let agree = data.iter().filter(|s| s.voice == s.speaker_gender).count() as f64 / 5000.0;
        assert!((agree - 0.7).abs() < 0.03, "{agree}");
        for s in &data {
            assert_eq!(voice_of(&s.source), Some(s.voice));
        }
    }

    #[test]
    fn seeded_determinism() {
        let cfg = small(3);
        assert_eq!(generate_parallel(&cfg).unwrap(), generate_parallel(&cfg).unwrap());
        assert_eq!(
            generate_monolingual(&cfg, Gender::F).unwrap(),
            generate_monolingual(&cfg, Gender::F).unwrap()
        );
        assert_ne!(generate_parallel(&cfg).unwrap(), generate_parallel(&small(4)).unwrap());
    }

    #[test]
    fn monolingual_purity() {
        let cfg = small(5);
        for g in Gender::BOTH {
            let other = format!("_{}", g.opposite());
            for line in generate_monolingual(&cfg, g).unwrap() {
                assert!(!line.contains(&other), "{line}");
                assert!(line.contains(&format!("_{g}")));
            }
        }
    }

    #[test]
    fn eval_conditions() {
        let cfg = small(6);
        let aligned = generate_eval(&cfg, Condition::Aligned).unwrap();
        let swapped = generate_eval(&cfg, Condition::Swapped).unwrap();
        for (a, s) in aligned.sentences.iter().zip(&swapped.sentences) {
            let voice = voice_of(&a.source).unwrap();
            assert!(a.terms.iter().all(|t| t.gender == voice));
            assert!(s.terms.iter().all(|t| t.gender == voice.opposite()));
            assert_eq!(a.id, s.id);
            assert_eq!(a.source, s.source);
            let ca: Vec<&str> = a.reference.split(' ').filter(|w| w.starts_with('c')).collect();
            let cs: Vec<&str> = s.reference.split(' ').filter(|w| w.starts_with('c')).collect();
            assert_eq!(ca, cs);
        }
        assert_eq!(swap_eval(&aligned), swapped);
        assert_eq!(swap_eval(&swapped), aligned);
        assert_eq!(aligned.indices_of(Gender::F).len(), 10);
    }

    #[test]
    fn no_gendered_token_in_sources() {
        let cfg = small(7);
        let (src, tgt) = vocabularies(&cfg).unwrap();
        for s in generate_parallel(&cfg).unwrap() {
            let (x, y) = s.encode(&src, &tgt);
            assert!(!x.ids().contains(&src.unk()));
            assert!(!y.ids().contains(&tgt.unk()));
            assert!(!s.source.contains("_F") && !s.source.contains("_M"));
        }
    }

    #[test]
    fn config_toml_roundtrip() {
        let cfg = small(8);
        assert_eq!(SynthTaskConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert!(SynthTaskConfig::from_toml("skew_rho = 2.0").is_err());
    }

    proptest! {
        #[test]
        fn lexicon_is_bijective(seed in 0u64..1000) {
            // content word s{i} always translates to c{i}
            let cfg = small(seed);
            for s in generate_parallel(&cfg).unwrap() {
                let mut src: Vec<&str> = s.source.split(' ').filter(|w| w.starts_with('s')).map(|w| &w[1..]).collect();
                let mut tgt: Vec<&str> = s.target.split(' ').filter(|w| w.starts_with('c')).map(|w| &w[1..]).collect();
                src.sort();
                tgt.sort();
                prop_assert_eq!(src, tgt);
                let lem: Vec<&str> = s.source.split(' ').filter(|w| w.starts_with('n')).map(|w| &w[1..]).collect();
                let gen: Vec<&str> = s.target.split(' ').filter(|w| w.starts_with('g')).map(|w| &w[1..w.len() - 2]).collect();
                let mut lem = lem; lem.sort();
                let mut gen = gen; gen.sort();
                prop_assert_eq!(lem, gen);
            }
        }
    }
}
