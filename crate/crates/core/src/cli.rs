//! Command-line front end. Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::eval::{parse_eval_set, EvalReport, EvalSet};
use crate::experiment::{run_experiment, sha256_hex, write_report, ExperimentConfig};
use crate::extract::{extract_stream, load_patterns, CorpusStats};
use crate::fusion::{beam_search, beam_search_base, compute_ilm_context, DecodeOptions, IlmContext};
use crate::ngram::{train_ngram_for, NGramLM, DEFAULT_K, DEFAULT_ORDER};
use crate::seq2seq::{fine_tune, train, ToySeq2Seq, TrainConfig, DEFAULT_EMBED_DIM, DEFAULT_HIDDEN_DIM};
use crate::synth::{write_task, SynthTaskConfig};
use crate::tune::{
    cross_validate, cv_report_jsonl, decode_grid, grid_weights, heatmap_csv, Decoder, GridAxes,
    DEFAULT_FOLDS, DEFAULT_GRID_STEP,
};
use crate::types::{FusionWeights, Gender, TokenSeq, Vocabulary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fusedec", version, about = "Gender-controlled decoding with LM fusion and ILM subtraction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic task: parallel data, ELM corpora, eval sets
    GenTask(GenTaskArgs),
    /// Train the base encoder-decoder
    TrainBase(TrainBaseArgs),
    /// Continue training a model on a (gender-specific) subset
    FineTune(FineTuneArgs),
    /// Train an n-gram external LM
    TrainElm(TrainElmArgs),
    /// Average encoder frames over training sources into the ILM context
    EstimateIlm(EstimateIlmArgs),
    /// Beam-search decode with optional fusion
    Decode(DecodeArgs),
    /// BLEU, term coverage and gender accuracy of hypotheses
    Evaluate(EvaluateArgs),
    /// Grid sweep, cross-validated weight selection and heatmap CSV
    TuneBetas(TuneBetasArgs),
    /// Split a corpus into feminine / masculine sentences by regex
    ExtractCorpus(ExtractArgs),
    /// End-to-end synthetic experiment report
    RunExperiment(RunExperimentArgs),
}

#[derive(Debug, Args)]
pub struct GenTaskArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// TOML task config; flags below override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_eval: Option<usize>,
    #[arg(long)]
    pub n_mono: Option<usize>,
    #[arg(long)]
    pub skew_rho: Option<f64>,
    #[arg(long)]
    pub voice_match_q: Option<f64>,
    #[arg(long)]
    pub lexicon_size: Option<usize>,
    #[arg(long)]
    pub gendered_slots: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainingFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Shuffling seed
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub grad_clip: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

impl TrainingFlags {
    fn apply(&self, mut cfg: TrainConfig) -> TrainConfig {
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.seed {
            cfg.rng_seed = v;
        }
        if let Some(v) = self.grad_clip {
            cfg.grad_clip = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        cfg
    }
}

#[derive(Debug, Args)]
pub struct TrainBaseArgs {
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub tgt: PathBuf,
    #[arg(long)]
    pub src_vocab: PathBuf,
    #[arg(long)]
    pub tgt_vocab: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EMBED_DIM)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = DEFAULT_HIDDEN_DIM)]
    pub hidden_dim: usize,
    /// Initialization seed
    #[arg(long, default_value_t = 1)]
    pub model_seed: u64,
    #[command(flatten)]
    pub training: TrainingFlags,
}

#[derive(Debug, Args)]
pub struct FineTuneArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub tgt: PathBuf,
    /// One speaker gender per line, aligned with --src/--tgt
    #[arg(long, requires = "gender")]
    pub speaker: Option<PathBuf>,
    /// Keep only pairs whose speaker has this gender
    #[arg(long, requires = "speaker")]
    pub gender: Option<Gender>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub training: TrainingFlags,
}

#[derive(Debug, Args)]
pub struct TrainElmArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    pub order: usize,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: f64,
}

#[derive(Debug, Args)]
pub struct EstimateIlmArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Training sources, one per line
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct SearchFlags {
    #[arg(long, default_value_t = crate::fusion::DEFAULT_BEAM)]
    pub beam: usize,
    #[arg(long, default_value_t = crate::fusion::DEFAULT_MAX_LEN)]
    pub max_len: usize,
    #[arg(long)]
    pub length_norm: bool,
    /// Score EOS with the base model only
    #[arg(long)]
    pub no_fuse_eos: bool,
}

impl SearchFlags {
    fn options(&self) -> DecodeOptions {
        DecodeOptions {
            beam: self.beam,
            max_len: self.max_len,
            length_norm: self.length_norm,
            fuse_eos: !self.no_fuse_eos,
        }
    }
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Source sentences, one per line
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long = "output", visible_alias = "out")]
    pub out: PathBuf,
    #[arg(long = "ilm-context", visible_alias = "ilm")]
    pub ilm: Option<PathBuf>,
    #[arg(long)]
    pub elm: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub beta_ilm: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta_elm: f64,
    /// JSON-lines per-sentence score breakdown
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[command(flatten)]
    pub search: SearchFlags,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub eval_set: PathBuf,
    #[arg(long)]
    pub hyp: PathBuf,
    /// Append a JSON record to this file
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneBetasArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub ilm: PathBuf,
    #[arg(long)]
    pub elm: PathBuf,
    #[arg(long)]
    pub eval_set: PathBuf,
    /// Restrict to sentences whose terms carry this gender
    #[arg(long)]
    pub gender: Option<Gender>,
    #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
    pub step: f64,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub folds: usize,
    /// Pin beta_ilm to 0
    #[arg(long)]
    pub elm_only: bool,
    #[arg(long)]
    pub heatmap: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Stitched cross-validated hypotheses
    #[arg(long)]
    pub hyp_out: Option<PathBuf>,
    #[command(flatten)]
    pub search: SearchFlags,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub patterns: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_f: PathBuf,
    #[arg(long)]
    pub out_m: PathBuf,
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunExperimentArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// TOML experiment config
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the task seed
    #[arg(long)]
    pub seed: Option<u64>,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CliResult = std::result::Result<(), Failure>;

fn read_lines(path: &Path) -> Result<Vec<String>, Error> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(f)
        .lines()
        .enumerate()
        .map(|(i, l)| l.map_err(|e| Error::parse(path.display().to_string(), i + 1, e.to_string())))
        .collect()
}

fn write_lines<S: AsRef<str>>(path: &Path, lines: &[S]) -> Result<(), Error> {
    let mut text = String::new();
    for l in lines {
        text.push_str(l.as_ref());
        text.push('\n');
    }
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn weights(beta_ilm: f64, beta_elm: f64) -> std::result::Result<FusionWeights, Failure> {
    FusionWeights::new(beta_ilm, beta_elm).map_err(|e| Failure::Usage(e.to_string()))
}

fn load_pairs(
    src: &Path,
    tgt: &Path,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
) -> Result<Vec<(TokenSeq, TokenSeq)>, Error> {
    let s = read_lines(src)?;
    let t = read_lines(tgt)?;
    if s.len() != t.len() {
        return Err(Error::invalid(format!(
            "{} has {} lines but {} has {}",
            src.display(),
            s.len(),
            tgt.display(),
            t.len()
        )));
    }
    Ok(s.iter()
        .zip(&t)
        .map(|(a, b)| (src_vocab.encode(a), tgt_vocab.encode(b)))
        .collect())
}

fn gen_task(a: &GenTaskArgs, out: &mut dyn Write) -> CliResult {
    let mut cfg = match &a.config {
        Some(p) => SynthTaskConfig::from_toml(&read_text(p)?)?,
        None => SynthTaskConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.rng_seed = v;
    }
    if let Some(v) = a.n_train {
        cfg.n_train = v;
    }
    if let Some(v) = a.n_eval {
        cfg.n_eval = v;
    }
    if let Some(v) = a.n_mono {
        cfg.n_mono = v;
    }
    if let Some(v) = a.skew_rho {
        cfg.skew_rho = v;
    }
    if let Some(v) = a.voice_match_q {
        cfg.voice_match_q = v;
    }
    if let Some(v) = a.lexicon_size {
        cfg.lexicon_size = v;
    }
    if let Some(v) = a.gendered_slots {
        cfg.gendered_slots = v;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let written = write_task(&cfg, &a.out)?;
    let mut files = BTreeMap::new();
    for p in &written {
        let name = p.file_name().expect("file").to_string_lossy().into_owned();
        files.insert(name, sha256_hex(&std::fs::read(p).map_err(|e| Error::io(p, e))?));
    }
    let manifest = serde_json::json!({ "command": "gen-task", "config": cfg, "files": files });
    let text = serde_json::to_string_pretty(&manifest).expect("json") + "\n";
    write_text(&a.out.join("manifest.json"), &text)?;
    let _ = writeln!(out, "wrote {} files to {}", written.len() + 1, a.out.display());
    Ok(())
}

fn report_losses(out: &mut dyn Write, losses: &[f64]) {
    for (i, l) in losses.iter().enumerate() {
        let _ = writeln!(out, "epoch {} loss {:.6}", i + 1, l);
    }
}

fn train_base(a: &TrainBaseArgs, out: &mut dyn Write) -> CliResult {
    let sv = Vocabulary::load(&a.src_vocab)?;
    let tv = Vocabulary::load(&a.tgt_vocab)?;
    let pairs = load_pairs(&a.src, &a.tgt, &sv, &tv)?;
    let init = ToySeq2Seq::new(sv, tv, a.embed_dim, a.hidden_dim, a.model_seed);
    let (model, rep) = train(&init, &pairs, &a.training.apply(TrainConfig::default()))?;
    model.save(&a.out)?;
    report_losses(out, &rep.epoch_loss);
    Ok(())
}

fn fine_tune_cmd(a: &FineTuneArgs, out: &mut dyn Write) -> CliResult {
    let model = ToySeq2Seq::load(&a.model)?;
    let mut pairs = load_pairs(&a.src, &a.tgt, model.src_vocab(), model.tgt_vocab())?;
    if let (Some(sp), Some(g)) = (&a.speaker, a.gender) {
        let speakers = read_lines(sp)?;
        if speakers.len() != pairs.len() {
            return Err(Error::invalid("speaker file is not aligned with the parallel data").into());
        }
        let keep = speakers
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.trim()
                    .parse::<Gender>()
                    .map_err(|e| Error::parse(sp.display().to_string(), i + 1, e.to_string()))
                    .map(|sg| sg == g)
            })
            .collect::<Result<Vec<bool>, Error>>()?;
        pairs = pairs.into_iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| p).collect();
    }
    let defaults = ExperimentConfig::default().fine_tune;
    let (model, rep) = fine_tune(&model, &pairs, &a.training.apply(defaults))?;
    model.save(&a.out)?;
    let _ = writeln!(out, "pairs {}", pairs.len());
    report_losses(out, &rep.epoch_loss);
    Ok(())
}

fn train_elm(a: &TrainElmArgs, out: &mut dyn Write) -> CliResult {
    let vocab = Vocabulary::load(&a.vocab)?;
    let corpus: Vec<TokenSeq> = read_lines(&a.corpus)?.iter().map(|l| vocab.encode(l)).collect();
    let lm = train_ngram_for(&vocab, &corpus, a.order, a.k)?;
    lm.save(&a.out)?;
    let _ = writeln!(out, "sentences {} order {} k {}", corpus.len(), a.order, a.k);
    Ok(())
}

fn estimate_ilm(a: &EstimateIlmArgs, out: &mut dyn Write) -> CliResult {
    let model = ToySeq2Seq::load(&a.model)?;
    let sources: Vec<TokenSeq> = read_lines(&a.src)?.iter().map(|l| model.src_vocab().encode(l)).collect();
    let ctx = compute_ilm_context(&model, &sources)?;
    ctx.save(&a.out)?;
    let _ = writeln!(out, "samples {} frames {}", ctx.samples_total, ctx.frames_total);
    Ok(())
}

fn decode(a: &DecodeArgs, _out: &mut dyn Write) -> CliResult {
    let w = weights(a.beta_ilm, a.beta_elm)?;
    let opts = a.search.options();
    let model = ToySeq2Seq::load(&a.model)?;
    let fused = match (&a.ilm, &a.elm) {
        (Some(i), Some(e)) => Some((IlmContext::load(i)?, NGramLM::load(e)?)),
        (None, None) if w.is_off() => None,
        _ => return Err(Failure::Usage("--ilm-context and --elm are required together for fused decoding".into())),
    };
    let mut hyps = Vec::new();
    let mut scores = String::new();
    for (i, line) in read_lines(&a.input)?.iter().enumerate() {
        let src = model.src_vocab().encode(line);
        let res = match &fused {
            Some((ctx, elm)) => beam_search(&model, ctx, elm, &src, w, &opts)?,
            None => beam_search_base(&model, &src, &opts)?,
        };
        hyps.push(model.tgt_vocab().decode(&res.tokens));
        let rec = serde_json::json!({
            "line": i + 1,
            "fused": res.fused_score,
            "base": res.base_score,
            "ilm": res.ilm_score,
            "elm": res.elm_score,
        });
        scores.push_str(&format!("{rec}\n"));
    }
    write_lines(&a.out, &hyps)?;
    if let Some(p) = &a.scores {
        write_text(p, &scores)?;
    }
    Ok(())
}

fn evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> CliResult {
    let set = parse_eval_set(&a.eval_set)?;
    let hyps = read_lines(&a.hyp)?;
    let rep = EvalReport::compute(&hyps, &set)?;
    let _ = write!(out, "{}", rep.to_key_values());
    if let Some(p) = &a.json {
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(p)
            .map_err(|e| Error::io(p, e))?;
        let rec = serde_json::json!({ "eval_set": a.eval_set, "hyp": a.hyp, "report": rep });
        writeln!(f, "{rec}").map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn tune_betas(a: &TuneBetasArgs, out: &mut dyn Write) -> CliResult {
    let model = ToySeq2Seq::load(&a.model)?;
    let ilm = IlmContext::load(&a.ilm)?;
    let elm = NGramLM::load(&a.elm)?;
    let mut set: EvalSet = parse_eval_set(&a.eval_set)?;
    if let Some(g) = a.gender {
        set = set.select(&set.indices_of(g));
    }
    let axes = if a.elm_only { GridAxes::ElmOnly } else { GridAxes::Full };
    let grid = grid_weights(a.step, axes).map_err(|e| Failure::Usage(e.to_string()))?;
    let dec = Decoder {
        model: &model,
        ilm: &ilm,
        elm: &elm,
        opts: a.search.options(),
    };
    let decodes = decode_grid(&dec, &set, &grid)?;
    let cv = cross_validate(&decodes, &set, a.folds)?;
    write_text(&a.heatmap, &heatmap_csv(&cv.sweep))?;
    if let Some(p) = &a.report {
        let label = a.gender.map_or("all".to_string(), |g| g.to_string());
        write_text(p, &cv_report_jsonl(&label, &cv)?)?;
    }
    if let Some(p) = &a.hyp_out {
        write_lines(p, &cv.hypotheses)?;
    }
    let _ = writeln!(out, "grid_points={}", cv.sweep.len());
    let _ = writeln!(out, "mean_beta_ilm={:.4}", cv.stitched.weights.beta_ilm);
    let _ = writeln!(out, "mean_beta_elm={:.4}", cv.stitched.weights.beta_elm);
    let _ = writeln!(out, "stitched_bleu={:.4}", cv.stitched.bleu);
    let _ = writeln!(out, "stitched_accuracy={:.4}", cv.stitched.accuracy);
    Ok(())
}

fn extract_corpus(a: &ExtractArgs, out: &mut dyn Write) -> CliResult {
    let patterns = load_patterns(&a.patterns)?;
    let input = File::open(&a.input).map_err(|e| Error::io(&a.input, e))?;
    for p in [&a.out_f, &a.out_m] {
        if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let create = |p: &PathBuf| File::create(p).map(BufWriter::new).map_err(|e| Error::io(p, e));
    let mut wf = create(&a.out_f)?;
    let mut wm = create(&a.out_m)?;
    let mut stats = CorpusStats::default();
    let counts = extract_stream(BufReader::new(input), &a.input.display().to_string(), &patterns, |g, line| {
        let words = line.split_whitespace().count() as u64;
        let (w, path) = match g {
            Gender::F => {
                stats.sentences_f += 1;
                stats.words_f += words;
                (&mut wf, &a.out_f)
            }
            Gender::M => {
                stats.sentences_m += 1;
                stats.words_m += words;
                (&mut wm, &a.out_m)
            }
        };
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))
    })?;
    wf.flush().map_err(|e| Error::io(&a.out_f, e))?;
    wm.flush().map_err(|e| Error::io(&a.out_m, e))?;
    let summary = format!(
        "lines={}\nf={}\nm={}\nambiguous={}\nunmatched={}\n{}",
        counts.lines,
        counts.f,
        counts.m,
        counts.ambiguous,
        counts.unmatched,
        stats.to_table()
    );
    if let Some(p) = &a.stats {
        write_text(p, &summary)?;
    }
    let _ = write!(out, "{summary}");
    Ok(())
}

fn run_experiment_cmd(a: &RunExperimentArgs, argv: &[String], out: &mut dyn Write) -> CliResult {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_toml(&read_text(p)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.task.rng_seed = s;
    }
    // the output directory is left out so reports from different locations compare equal
    let command = format!(
        "run-experiment{}{}",
        a.seed.map_or(String::new(), |s| format!(" --seed {s}")),
        a.config.as_ref().map_or(String::new(), |_| " --config <file>".to_string())
    );
    let report = run_experiment(&cfg, &command)?;
    write_report(&report, &a.out)?;
    write_text(&a.out.join("config.toml"), &cfg.to_toml())?;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let run = serde_json::json!({ "argv": argv, "unix_time": stamp, "report_sha256": sha256_hex(report.to_table().as_bytes()) });
    write_text(&a.out.join("run.json"), &format!("{run}\n"))?;
    let _ = write!(out, "{}", report.to_table());
    Ok(())
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// exit code. Diagnostics go to `err`.
pub fn run(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match &cli.command {
        Command::GenTask(a) => gen_task(a, out),
        Command::TrainBase(a) => train_base(a, out),
        Command::FineTune(a) => fine_tune_cmd(a, out),
        Command::TrainElm(a) => train_elm(a, out),
        Command::EstimateIlm(a) => estimate_ilm(a, out),
        Command::Decode(a) => decode(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::TuneBetas(a) => tune_betas(a, out),
        Command::ExtractCorpus(a) => extract_corpus(a, out),
        Command::RunExperiment(a) => run_experiment_cmd(a, argv, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Lib(e)) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_numeric() {
                EXIT_NUMERIC
            } else {
                EXIT_DATA
            }
        }
    }
}

/// Entry point used by the `fusedec` binary.
pub fn main() -> ! {
    let argv: Vec<String> = std::env::args().collect();
    let code = run(&argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code)
}
