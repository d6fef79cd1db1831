//! End-to-end synthetic experiment comparing M_B, M_SP, M_B+ELM and
//! M_B-ILM+ELM on aligned and swapped evaluation sets.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{EvalReport, EvalSet};
use crate::extract::{corpus_stats, extract, CorpusStats, PatternSet, SYNTH_PATTERNS};
use crate::fusion::{compute_ilm_context, DecodeOptions, IlmContext};
use crate::ngram::{train_ngram_for, NGramLM, DEFAULT_K, DEFAULT_ORDER};
use crate::seq2seq::{fine_tune, train, ToySeq2Seq, TrainConfig, DEFAULT_EMBED_DIM, DEFAULT_HIDDEN_DIM};
use crate::synth::{self, Condition, SynthTaskConfig};
use crate::tune::{
    cross_validated_tune, grid_sweep, heatmap_csv, mean_betas, translate_base, Decoder,
    GridAxes, DEFAULT_FOLDS, DEFAULT_GRID_STEP,
};
use crate::types::{FusionWeights, Gender, TokenSeq};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: SynthTaskConfig,
    pub model_seed: u64,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub train: TrainConfig,
    /// Continued training of M_B on one speaker gender's parallel data.
    pub fine_tune: TrainConfig,
    pub elm_order: usize,
    pub elm_k: f64,
    pub decode: DecodeOptions,
    pub grid_step: f64,
    pub folds: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: SynthTaskConfig::default(),
            model_seed: 1,
            embed_dim: DEFAULT_EMBED_DIM,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            train: TrainConfig::default(),
            fine_tune: TrainConfig {
                learning_rate: 0.05,
                epochs: 5,
                ..TrainConfig::default()
            },
            elm_order: DEFAULT_ORDER,
            elm_k: DEFAULT_K,
            decode: DecodeOptions::default(),
            grid_step: DEFAULT_GRID_STEP,
            folds: DEFAULT_FOLDS,
        }
    }
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::invalid(e.to_string()))?;
        cfg.task.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum System {
    #[serde(rename = "M_B")]
    Base,
    #[serde(rename = "M_SP")]
    Specialized,
    #[serde(rename = "M_B+ELM")]
    Elm,
    #[serde(rename = "M_B-ILM+ELM")]
    IlmElm,
}

impl System {
    pub const ALL: [System; 4] = [System::Base, System::Specialized, System::Elm, System::IlmElm];

    pub fn label(self) -> &'static str {
        match self {
            System::Base => "M_B",
            System::Specialized => "M_SP",
            System::Elm => "M_B+ELM",
            System::IlmElm => "M_B-ILM+ELM",
        }
    }
}

/// How the fusion weights of a row were chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// No fusion.
    None,
    /// Each fold decoded with the pair selected on the other folds.
    CrossValidated,
    /// Every sentence decoded with the fold-averaged pair of the aligned
    /// subset of the same gender.
    MeanBetas,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub condition: Condition,
    /// Gender of the annotated (reference) forms.
    pub gender: Gender,
    pub system: System,
    pub weighting: Weighting,
    pub weights: FusionWeights,
    pub bleu: f64,
    pub coverage: f64,
    /// Accuracy on `gender`'s terms, in [0, 1].
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedBetas {
    /// Condition of the subset the weights were selected on.
    pub condition: Condition,
    pub gender: Gender,
    pub system: System,
    pub selections: Vec<FusionWeights>,
    pub mean: FusionWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub command: String,
    pub config: ExperimentConfig,
    /// SHA-256 of every produced artifact's serialized form.
    pub artifacts: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub manifest: ExperimentManifest,
    pub corpus: CorpusStats,
    pub final_train_loss: f64,
    pub tuned: Vec<TunedBetas>,
    pub rows: Vec<ResultRow>,
    /// Sorted sweep over both weights for each gender's aligned subset.
    #[serde(skip)]
    pub heatmaps: BTreeMap<Gender, String>,
}

impl ExperimentReport {
    pub fn row(&self, c: Condition, g: Gender, s: System, w: Weighting) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.condition == c && r.gender == g && r.system == s && r.weighting == w)
    }

    /// The row reported for `s`: cross-validated output for fused systems.
    pub fn headline(&self, c: Condition, g: Gender, s: System) -> Option<&ResultRow> {
        let w = match s {
            System::Base | System::Specialized => Weighting::None,
            System::Elm | System::IlmElm => Weighting::CrossValidated,
        };
        self.row(c, g, s, w)
    }

    pub fn tuned_for(&self, c: Condition, g: Gender, s: System) -> Option<&TunedBetas> {
        self.tuned.iter().find(|t| t.condition == c && t.gender == g && t.system == s)
    }

    /// Aligned plain-text tables; contains nothing run-dependent.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# fusedec synthetic experiment");
        let _ = writeln!(out, "# command: {}", self.manifest.command);
        for (name, hash) in &self.manifest.artifacts {
            let _ = writeln!(out, "# sha256 {name} {hash}");
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "ELM corpora");
        out.push_str(&self.corpus.to_table());
        let _ = writeln!(out);
        let _ = writeln!(out, "final base training loss {:.6}", self.final_train_loss);
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<8} {:<3} {:<12} {:<10} {:>6} {:>6} {:>8} {:>8} {:>8}",
            "cond", "gdr", "system", "weighting", "b_ilm", "b_elm", "BLEU", "cov%", "acc%"
        );
        for r in &self.rows {
            let weighting = match r.weighting {
                Weighting::None => "-",
                Weighting::CrossValidated => "cross-val",
                Weighting::MeanBetas => "mean-betas",
            };
            let _ = writeln!(
                out,
                "{:<8} {:<3} {:<12} {:<10} {:>6.3} {:>6.3} {:>8.2} {:>8.2} {:>8.2}",
                r.condition.as_str(),
                r.gender,
                r.system.label(),
                weighting,
                r.weights.beta_ilm,
                r.weights.beta_elm,
                r.bleu,
                r.coverage * 100.0,
                r.accuracy * 100.0
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "mean tuned betas over folds");
        for t in &self.tuned {
            let _ = writeln!(
                out,
                "{:<8} {:<3} {:<12} beta_ilm {:.3} beta_elm {:.3}",
                t.condition.as_str(),
                t.gender,
                t.system.label(),
                t.mean.beta_ilm,
                t.mean.beta_elm
            );
        }
        out
    }

    /// Manifest record, then one record per result row and tuned pair.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let manifest = serde_json::json!({ "record": "manifest", "manifest": self.manifest });
        let _ = writeln!(out, "{manifest}");
        let corpus = serde_json::json!({ "record": "corpus", "stats": self.corpus });
        let _ = writeln!(out, "{corpus}");
        for r in &self.rows {
            let _ = writeln!(out, "{}", serde_json::json!({ "record": "result", "row": r }));
        }
        for t in &self.tuned {
            let _ = writeln!(out, "{}", serde_json::json!({ "record": "tuned", "betas": t }));
        }
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn encode_lines(vocab: &crate::types::Vocabulary, lines: &[String]) -> Vec<TokenSeq> {
    lines.iter().map(|l| vocab.encode(l)).collect()
}

/// Trained artifacts shared by every system in the experiment.
pub struct Artifacts {
    pub base: ToySeq2Seq,
    pub specialized: BTreeMap<Gender, ToySeq2Seq>,
    pub ilm: IlmContext,
    pub elms: BTreeMap<Gender, NGramLM>,
    pub aligned: EvalSet,
    pub swapped: EvalSet,
    pub corpus: CorpusStats,
    pub final_train_loss: f64,
}

/// Generates the task and trains M_B, both M_SP, the ILM context and both ELMs.
pub fn build_artifacts(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let task = &cfg.task;
    let (src_vocab, tgt_vocab) = synth::vocabularies(task)?;
    let parallel = synth::generate_parallel(task)?;
    let pairs: Vec<(TokenSeq, TokenSeq)> = parallel.iter().map(|s| s.encode(&src_vocab, &tgt_vocab)).collect();

    let init = ToySeq2Seq::new(src_vocab.clone(), tgt_vocab.clone(), cfg.embed_dim, cfg.hidden_dim, cfg.model_seed);
    let (base, report) = train(&init, &pairs, &cfg.train)?;

    let mut specialized = BTreeMap::new();
    for g in Gender::BOTH {
        let subset: Vec<(TokenSeq, TokenSeq)> = parallel
            .iter()
            .zip(&pairs)
            .filter(|(s, _)| s.speaker_gender == g)
            .map(|(_, p)| p.clone())
            .collect();
        specialized.insert(g, fine_tune(&base, &subset, &cfg.fine_tune)?.0);
    }

    let sources: Vec<TokenSeq> = pairs.iter().map(|p| p.0.clone()).collect();
    let ilm = compute_ilm_context(&base, &sources)?;

    // gender-pure corpora go through the same regex filter a real corpus would
    let patterns = PatternSet::from_toml(SYNTH_PATTERNS)?;
    let mut mono = synth::generate_monolingual(task, Gender::F)?;
    mono.extend(synth::generate_monolingual(task, Gender::M)?);
    let ex = extract(&mono, &patterns);
    let corpus = corpus_stats(&ex.f, &ex.m);
    let mut elms = BTreeMap::new();
    for (g, lines) in [(Gender::F, &ex.f), (Gender::M, &ex.m)] {
        elms.insert(g, train_ngram_for(&tgt_vocab, &encode_lines(&tgt_vocab, lines), cfg.elm_order, cfg.elm_k)?);
    }

    Ok(Artifacts {
        base,
        specialized,
        ilm,
        elms,
        aligned: synth::generate_eval(task, Condition::Aligned)?,
        swapped: synth::generate_eval(task, Condition::Swapped)?,
        corpus,
        final_train_loss: *report.epoch_loss.last().expect("at least one epoch"),
    })
}

fn row(
    condition: Condition,
    gender: Gender,
    system: System,
    weighting: Weighting,
    weights: FusionWeights,
    hyps: &[String],
    set: &EvalSet,
) -> Result<ResultRow> {
    let rep = EvalReport::compute(hyps, set)?;
    let c = rep.gender.get(gender);
    Ok(ResultRow {
        condition,
        gender,
        system,
        weighting,
        weights,
        bleu: rep.bleu,
        coverage: c.coverage().unwrap_or(0.0),
        accuracy: c.accuracy().unwrap_or(0.0),
    })
}

/// Runs every system on both conditions. Fused systems are tuned per
/// gender on the aligned subset; the swapped subset reuses the mean betas of
/// its reference gender and that gender's ELM.
pub fn run_experiment(cfg: &ExperimentConfig, command: &str) -> Result<ExperimentReport> {
    let art = build_artifacts(cfg)?;
    let mut rows = Vec::new();
    let mut tuned = Vec::new();
    let mut heatmaps = BTreeMap::new();

    for g in Gender::BOTH {
        let aligned = art.aligned.select(&art.aligned.indices_of(g));
        let swapped = art.swapped.select(&art.swapped.indices_of(g));
        let dec = Decoder {
            model: &art.base,
            ilm: &art.ilm,
            elm: &art.elms[&g],
            opts: cfg.decode,
        };

        for (cond, set) in [(Condition::Aligned, &aligned), (Condition::Swapped, &swapped)] {
            let hyps = translate_base(&art.base, set, &cfg.decode)?;
            rows.push(row(cond, g, System::Base, Weighting::None, FusionWeights::OFF, &hyps, set)?);
            let hyps = translate_base(&art.specialized[&g], set, &cfg.decode)?;
            rows.push(row(cond, g, System::Specialized, Weighting::None, FusionWeights::OFF, &hyps, set)?);
        }

        for (system, axes) in [(System::Elm, GridAxes::ElmOnly), (System::IlmElm, GridAxes::Full)] {
            let cv = cross_validated_tune(&dec, &aligned, cfg.folds, cfg.grid_step, axes)?;
            let mean = mean_betas(&cv.selections)?;
            if axes == GridAxes::Full {
                heatmaps.insert(g, heatmap_csv(&cv.sweep));
            }
            rows.push(row(Condition::Aligned, g, system, Weighting::CrossValidated, mean, &cv.hypotheses, &aligned)?);
            for (cond, set) in [(Condition::Aligned, &aligned), (Condition::Swapped, &swapped)] {
                let hyps = dec.translate_all(set, mean)?;
                rows.push(row(cond, g, system, Weighting::MeanBetas, mean, &hyps, set)?);
            }
            tuned.push(TunedBetas {
                condition: Condition::Aligned,
                gender: g,
                system,
                selections: cv.selections,
                mean,
            });

            let cv = cross_validated_tune(&dec, &swapped, cfg.folds, cfg.grid_step, axes)?;
            let mean = mean_betas(&cv.selections)?;
            rows.push(row(Condition::Swapped, g, system, Weighting::CrossValidated, mean, &cv.hypotheses, &swapped)?);
            tuned.push(TunedBetas {
                condition: Condition::Swapped,
                gender: g,
                system,
                selections: cv.selections,
                mean,
            });
        }
    }
    rows.sort_by(|a, b| {
        (a.condition.as_str(), a.gender, a.system, a.weighting).cmp(&(b.condition.as_str(), b.gender, b.system, b.weighting))
    });

    let mut artifacts = BTreeMap::new();
    artifacts.insert("base.model".to_string(), sha256_hex(art.base.to_text().as_bytes()));
    for g in Gender::BOTH {
        artifacts.insert(format!("sp.{g}.model"), sha256_hex(art.specialized[&g].to_text().as_bytes()));
        artifacts.insert(format!("elm.{g}"), sha256_hex(art.elms[&g].to_text().as_bytes()));
    }
    artifacts.insert("ilm.ctx".to_string(), sha256_hex(art.ilm.to_text().as_bytes()));
    artifacts.insert("eval.aligned".to_string(), sha256_hex(art.aligned.to_text().as_bytes()));
    artifacts.insert("eval.swapped".to_string(), sha256_hex(art.swapped.to_text().as_bytes()));

    Ok(ExperimentReport {
        manifest: ExperimentManifest {
            command: command.to_string(),
            config: cfg.clone(),
            artifacts,
        },
        corpus: art.corpus,
        final_train_loss: art.final_train_loss,
        tuned,
        rows,
        heatmaps,
    })
}

/// Writes `report.txt`, `report.jsonl` and one heatmap CSV per gender.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![
        ("report.txt".to_string(), report.to_table()),
        ("report.jsonl".to_string(), report.to_jsonl()),
    ];
    for (g, csv) in &report.heatmaps {
        files.push((format!("heatmap.{g}.csv"), csv.clone()));
    }
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Sweep of both weights over `set` with the given decoder, as heatmap CSV.
pub fn sweep_csv(dec: &Decoder<'_>, set: &EvalSet, step: f64) -> Result<String> {
    Ok(heatmap_csv(&grid_sweep(dec, set, step, GridAxes::Full)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            task: SynthTaskConfig {
                n_train: 300,
                n_eval: 12,
                n_mono: 100,
                lexicon_size: 6,
                ..SynthTaskConfig::default()
            },
            embed_dim: 4,
            hidden_dim: 6,
            train: TrainConfig { epochs: 2, ..TrainConfig::default() },
            fine_tune: TrainConfig { epochs: 1, ..TrainConfig::default() },
            grid_step: 0.5,
            folds: 3,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn config_roundtrip() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn tiny_run_has_table_shape() {
        let rep = run_experiment(&tiny(), "test").unwrap();
        for c in Condition::BOTH {
            for g in Gender::BOTH {
                for s in System::ALL {
                    assert!(rep.headline(c, g, s).is_some(), "{c:?} {g} {s:?}");
                }
            }
        }
        assert_eq!(rep.tuned.len(), 8);
        assert!(rep.tuned_for(Condition::Aligned, Gender::F, System::Elm).unwrap().selections.iter().all(|w| w.beta_ilm == 0.0));
        assert_eq!(rep.heatmaps[&Gender::F].lines().count(), 1 + 9);
        let again = run_experiment(&tiny(), "test").unwrap();
        assert_eq!(rep.to_table(), again.to_table());
        assert_eq!(rep.to_jsonl(), again.to_jsonl());
    }
}
