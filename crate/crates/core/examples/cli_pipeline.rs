//! The `fusedec` subcommands chained in-process, writing into a temp dir.

use fusedec::cli::run;

fn fusedec(args: &[&str]) {
    let argv: Vec<String> = std::iter::once("fusedec").chain(args.iter().copied()).map(String::from).collect();
    println!("$ {}", argv.join(" "));
    let mut out = Vec::new();
    let code = run(&argv, &mut out, &mut std::io::stderr());
    let text = String::from_utf8_lossy(&out);
    for line in text.lines().take(12) {
        println!("  {line}");
    }
    assert_eq!(code, 0);
}

fn main() {
    let dir = std::env::temp_dir().join(format!("fusedec-pipeline-{}", std::process::id()));
    let p = |n: &str| dir.join(n).display().to_string();
    let d = p("");

    fusedec(&["gen-task", "--out", &d, "--n-train", "2000", "--n-eval", "40", "--n-mono", "1000"]);
    fusedec(&[
        "train-base", "--src", &p("train.src"), "--tgt", &p("train.tgt"), "--src-vocab", &p("src.vocab"),
        "--tgt-vocab", &p("tgt.vocab"), "--out", &p("base.model"), "--epochs", "6",
    ]);
    fusedec(&["extract-corpus", "--patterns", &p("patterns.toml"), "--input", &p("mono.F.txt"), "--out-f", &p("elm.F.txt"), "--out-m", &p("junk.txt")]);
    fusedec(&["train-elm", "--corpus", &p("elm.F.txt"), "--vocab", &p("tgt.vocab"), "--out", &p("elm.F")]);
    fusedec(&["estimate-ilm", "--model", &p("base.model"), "--src", &p("train.src"), "--out", &p("ilm.ctx")]);
    fusedec(&[
        "tune-betas", "--model", &p("base.model"), "--ilm", &p("ilm.ctx"), "--elm", &p("elm.F"),
        "--eval-set", &p("eval.aligned.tsv"), "--gender", "F", "--step", "0.1", "--folds", "5",
        "--heatmap", &p("heatmap.F.csv"), "--hyp-out", &p("cv.F.hyp"),
    ]);

    let set = fusedec::eval::parse_eval_set(std::path::Path::new(&p("eval.aligned.tsv"))).unwrap();
    let sources: String = set.sentences.iter().map(|s| format!("{}\n", s.source)).collect();
    std::fs::write(p("eval.src"), sources).unwrap();
    fusedec(&["decode", "--model", &p("base.model"), "--input", &p("eval.src"), "--output", &p("base.hyp")]);
    fusedec(&[
        "decode", "--model", &p("base.model"), "--input", &p("eval.src"), "--output", &p("fused.hyp"),
        "--ilm-context", &p("ilm.ctx"), "--elm", &p("elm.F"), "--beta-ilm", "0.3", "--beta-elm", "0.5",
    ]);
    for hyp in ["base.hyp", "fused.hyp"] {
        fusedec(&["evaluate", "--eval-set", &p("eval.aligned.tsv"), "--hyp", &p(hyp)]);
    }
    std::fs::remove_dir_all(&dir).ok();
}
