mod common;

use common::{kv, run_cli, Pipeline};
use fusedec::cli::{EXIT_DATA, EXIT_OK, EXIT_USAGE};

#[test]
fn evaluate_references_against_themselves() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display().to_string();
    let (code, _, err) = run_cli(&["gen-task", "--out", &d, "--n-train", "10", "--n-eval", "20", "--n-mono", "10"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let set_path = dir.path().join("eval.aligned.tsv");
    let set = fusedec::eval::parse_eval_set(&set_path).unwrap();
    let hyp = dir.path().join("refs.txt");
    std::fs::write(&hyp, set.references().join("\n") + "\n").unwrap();
    let (code, out, err) = run_cli(&["evaluate", "--eval-set", set_path.to_str().unwrap(), "--hyp", hyp.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(kv(&out, "bleu"), "100.0000");
    assert_eq!(kv(&out, "accuracy_f"), "1.0000");
    assert_eq!(kv(&out, "accuracy_m"), "1.0000");
    assert_eq!(kv(&out, "coverage_f"), "1.0000");
}

#[test]
fn zero_weight_decode_matches_base_decode() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::build(dir.path());
    let src = p.eval_sources();
    let (c1, _, e1) = run_cli(&["decode", "--model", &p.path("base.model"), "--input", &src, "--output", &p.path("base.hyp")]);
    let (c2, _, e2) = run_cli(&[
        "decode", "--model", &p.path("base.model"), "--input", &src, "--output", &p.path("zero.hyp"),
        "--ilm-context", &p.path("ilm.ctx"), "--elm", &p.path("elm.F"), "--beta-ilm", "0", "--beta-elm", "0",
    ]);
    assert_eq!((c1, c2), (EXIT_OK, EXIT_OK), "{e1}{e2}");
    assert_eq!(std::fs::read(p.path("base.hyp")).unwrap(), std::fs::read(p.path("zero.hyp")).unwrap());

    let (c3, _, _) = run_cli(&[
        "decode", "--model", &p.path("base.model"), "--input", &src, "--out", &p.path("f.hyp"),
        "--ilm", &p.path("ilm.ctx"), "--elm", &p.path("elm.F"), "--beta-ilm", "0.2", "--beta-elm", "0.6",
        "--scores", &p.path("f.scores"),
    ]);
    assert_eq!(c3, EXIT_OK);
    let scores = std::fs::read_to_string(p.path("f.scores")).unwrap();
    for line in scores.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let f = |k: &str| v[k].as_f64().unwrap();
        assert!((f("fused") - (f("base") - 0.2 * f("ilm") + 0.6 * f("elm"))).abs() < 1e-9);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing").display().to_string();
    assert_eq!(run_cli(&["no-such-command"]).0, EXIT_USAGE);
    assert_eq!(run_cli(&["evaluate", "--hyp", "x"]).0, EXIT_USAGE);
    assert_eq!(run_cli(&["--help"]).0, EXIT_OK);
    let bad_weight = run_cli(&[
        "decode", "--model", &missing, "--input", &missing, "--output", &missing, "--beta-elm", "1.5",
    ]);
    assert_eq!(bad_weight.0, EXIT_USAGE, "{}", bad_weight.2);
    let (code, _, err) = run_cli(&["evaluate", "--eval-set", &missing, "--hyp", &missing]);
    assert_eq!(code, EXIT_DATA);
    assert!(err.contains("missing"), "{err}");

    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "MUSTSHE-LIKE v1\nid\tsource\treference\tterms\nonly-two\tcolumns\n").unwrap();
    let hyp = dir.path().join("h.txt");
    std::fs::write(&hyp, "x\n").unwrap();
    let (code, _, err) = run_cli(&["evaluate", "--eval-set", bad.to_str().unwrap(), "--hyp", hyp.to_str().unwrap()]);
    assert_eq!(code, EXIT_DATA);
    assert!(err.contains(":3"), "{err}");
}

#[test]
fn extract_corpus_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let path = |n: &str| dir.path().join(n).display().to_string();
    std::fs::write(path("p.toml"), fusedec::extract::ES_PATTERNS).unwrap();
    let lines = [
        "Soy nueva en esta zona.",
        "Estoy cansado.",
        "Hola a todos.",
        "Soy nueva y estoy cansado.",
        "Hoy me siento sola.",
        "",
    ];
    std::fs::write(path("in.txt"), lines.join("\n") + "\n").unwrap();
    let (code, out, err) = run_cli(&[
        "extract-corpus", "--patterns", &path("p.toml"), "--input", &path("in.txt"),
        "--out-f", &path("f.txt"), "--out-m", &path("m.txt"), "--stats", &path("stats.txt"),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(kv(&out, "lines"), "6");
    assert_eq!((kv(&out, "f"), kv(&out, "m"), kv(&out, "ambiguous"), kv(&out, "unmatched")), ("2".into(), "1".into(), "1".into(), "2".into()));
    let f = std::fs::read_to_string(path("f.txt")).unwrap();
    assert_eq!(f, "Soy nueva en esta zona.\nHoy me siento sola.\n");

    let (code, out, _) = run_cli(&[
        "extract-corpus", "--patterns", &path("p.toml"), "--input", &path("f.txt"),
        "--out-f", &path("f2.txt"), "--out-m", &path("m2.txt"),
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(kv(&out, "m"), "0");
    assert_eq!(std::fs::read_to_string(path("f2.txt")).unwrap(), f);

    std::fs::write(path("broken.toml"), "language = \"x\"\nf = ['(']\nm = ['a']\n").unwrap();
    let (code, _, err) = run_cli(&[
        "extract-corpus", "--patterns", &path("broken.toml"), "--input", &path("in.txt"),
        "--out-f", &path("f3.txt"), "--out-m", &path("m3.txt"),
    ]);
    assert_eq!(code, EXIT_DATA);
    assert!(err.contains("0"), "{err}");
}

#[test]
fn fine_tune_filters_by_speaker() {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::build(dir.path());
    let (code, out, err) = run_cli(&[
        "fine-tune", "--model", &p.path("base.model"), "--src", &p.path("train.src"), "--tgt", &p.path("train.tgt"),
        "--speaker", &p.path("train.speaker"), "--gender", "F", "--out", &p.path("sp.F.model"), "--epochs", "1",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let speakers = std::fs::read_to_string(p.path("train.speaker")).unwrap();
    let n_f = speakers.lines().filter(|l| l.trim() == "F").count();
    assert_eq!(kv(&out.replace(' ', "="), "pairs"), n_f.to_string());
    assert!(std::path::Path::new(&p.path("sp.F.model")).exists());
}
