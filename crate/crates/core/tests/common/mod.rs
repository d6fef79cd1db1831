#![allow(dead_code)]

use fusedec::fusion::{compute_ilm_context, IlmContext};
use fusedec::ngram::{train_ngram_for, NGramLM};
use fusedec::seq2seq::ToySeq2Seq;
use fusedec::types::{FusionWeights, TokenSeq, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A randomly initialized model, ILM context, ELM, source and weights.
pub struct Instance {
    pub model: ToySeq2Seq,
    pub ctx: IlmContext,
    pub elm: NGramLM,
    pub src: TokenSeq,
    pub weights: FusionWeights,
}

/// `tgt_words` surface words plus the three specials.
pub fn random_instance(seed: u64, tgt_words: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sv = Vocabulary::with_specials(["a", "b", "c", "d"]).unwrap();
    let tv = Vocabulary::with_specials((0..tgt_words).map(|i| format!("t{i}"))).unwrap();
    let model = ToySeq2Seq::new(sv.clone(), tv.clone(), 4, 5, rng.gen());
    let random_src = |rng: &mut ChaCha8Rng| {
        let n = rng.gen_range(1..=4);
        let words: Vec<&str> = (0..n).map(|_| ["a", "b", "c", "d"][rng.gen_range(0..4)]).collect();
        sv.encode(&words.join(" "))
    };
    let train: Vec<TokenSeq> = (0..6).map(|_| random_src(&mut rng)).collect();
    let ctx = compute_ilm_context(&model, &train).unwrap();
    let corpus: Vec<TokenSeq> = (0..8)
        .map(|_| {
            let n = rng.gen_range(0..=3);
            let words: Vec<String> = (0..n).map(|_| format!("t{}", rng.gen_range(0..tgt_words))).collect();
            tv.encode(&words.join(" "))
        })
        .collect();
    let elm = train_ngram_for(&tv, &corpus, 2, 0.5).unwrap();
    let src = random_src(&mut rng);
    let weights = FusionWeights::new(rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0)).unwrap();
    Instance { model, ctx, elm, src, weights }
}

/// Smallest beam that keeps every candidate at every step.
pub fn exhaustive_beam(vocab_size: usize, max_len: usize) -> usize {
    (vocab_size - 1).pow(max_len as u32 + 1)
}

pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["fusedec".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = fusedec::cli::run(&argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub fn kv(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in:\n{text}"))
        .to_string()
}

/// Paths of a small task trained end to end through the CLI.
pub struct Pipeline {
    pub dir: std::path::PathBuf,
}

impl Pipeline {
    pub fn path(&self, name: &str) -> String {
        self.dir.join(name).display().to_string()
    }

    pub fn build(dir: &std::path::Path) -> Pipeline {
        let p = Pipeline { dir: dir.to_path_buf() };
        let d = p.path("");
        let ok = |args: &[&str]| {
            let (code, out, err) = run_cli(args);
            assert_eq!(code, 0, "{args:?}\n{out}\n{err}");
        };
        ok(&["gen-task", "--out", &d, "--n-train", "1500", "--n-eval", "40", "--n-mono", "800"]);
        ok(&[
            "train-base", "--src", &p.path("train.src"), "--tgt", &p.path("train.tgt"),
            "--src-vocab", &p.path("src.vocab"), "--tgt-vocab", &p.path("tgt.vocab"),
            "--out", &p.path("base.model"), "--epochs", "4",
        ]);
        ok(&["train-elm", "--corpus", &p.path("mono.F.txt"), "--vocab", &p.path("tgt.vocab"), "--out", &p.path("elm.F")]);
        ok(&["estimate-ilm", "--model", &p.path("base.model"), "--src", &p.path("train.src"), "--out", &p.path("ilm.ctx")]);
        p
    }

    /// Source column of the aligned eval set, one per line.
    pub fn eval_sources(&self) -> String {
        let set = fusedec::eval::parse_eval_set(std::path::Path::new(&self.path("eval.aligned.tsv"))).unwrap();
        let path = self.path("eval.src");
        let text: String = set.sentences.iter().map(|s| format!("{}\n", s.source)).collect();
        std::fs::write(&path, text).unwrap();
        path
    }
}
