//! Regex filtering of a monolingual corpus into feminine and masculine
//! first-person sub-corpora.
//!
//! Pattern files are TOML:
//!
//! ```toml
//! language = "es"
//! case_insensitive = true          # default for plain string entries
//! f = ['\bsoy nueva\b', { regex = 'Cansada', case_insensitive = false }]
//! m = ['\bsoy nuevo\b']
//! ```

use std::io::BufRead;
use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Gender;

/// Demonstration patterns for the synthetic task's gendered tokens.
pub const SYNTH_PATTERNS: &str = r#"language = "synth"
case_insensitive = false
f = ['\bg\d+_F\b']
m = ['\bg\d+_M\b']
"#;

/// A small Spanish-like example set.
pub const ES_PATTERNS: &str = r#"language = "es"
case_insensitive = true
f = [
  '\b(soy|estoy) (nueva|cansada|sola|segura|contenta)\b',
  '\bme siento (cansada|sola|segura|contenta)\b',
]
m = [
  '\b(soy|estoy) (nuevo|cansado|solo|seguro|contento)\b',
  '\bme siento (cansado|solo|seguro|contento)\b',
]
"#;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatternEntry {
    Plain(String),
    Flagged {
        regex: String,
        case_insensitive: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternFile {
    pub language: String,
    #[serde(default)]
    pub case_insensitive: bool,
    pub f: Vec<PatternEntry>,
    pub m: Vec<PatternEntry>,
}

#[derive(Debug, Clone)]
pub struct PatternSet {
    pub source: PatternFile,
    f: Vec<Regex>,
    m: Vec<Regex>,
}

impl PatternSet {
    pub fn compile(source: PatternFile) -> Result<Self> {
        if source.f.is_empty() || source.m.is_empty() {
            return Err(Error::invalid("pattern lists f and m must both be non-empty"));
        }
        let build = |entries: &[PatternEntry], offset: usize| -> Result<Vec<Regex>> {
            entries
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let (text, ci) = match e {
                        PatternEntry::Plain(s) => (s.as_str(), source.case_insensitive),
                        PatternEntry::Flagged { regex, case_insensitive } => (regex.as_str(), *case_insensitive),
                    };
                    RegexBuilder::new(text)
                        .case_insensitive(ci)
                        .build()
                        .map_err(|err| Error::InvalidPattern {
                            index: offset + i,
                            msg: err.to_string(),
                        })
                })
                .collect()
        };
        let f = build(&source.f, 0)?;
        let m = build(&source.m, source.f.len())?;
        Ok(Self { source, f, m })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: PatternFile = toml::from_str(text).map_err(|e| Error::invalid(e.to_string()))?;
        Self::compile(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.source).expect("pattern file serializes")
    }

    pub fn language(&self) -> &str {
        &self.source.language
    }

    /// Bucket for one line.
    pub fn classify(&self, line: &str) -> Classification {
        let f = self.f.iter().any(|r| r.is_match(line));
        let m = self.m.iter().any(|r| r.is_match(line));
        match (f, m) {
            (true, false) => Classification::Gendered(Gender::F),
            (false, true) => Classification::Gendered(Gender::M),
            (true, true) => Classification::Ambiguous,
            (false, false) => Classification::Unmatched,
        }
    }
}

/// Indices of patterns in error messages count F patterns first, then M.
pub fn load_patterns(path: &Path) -> Result<PatternSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    PatternSet::from_toml(&text).map_err(|e| match e {
        Error::InvalidArgument(msg) => Error::parse(path.display().to_string(), 0, msg),
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Gendered(Gender),
    Ambiguous,
    Unmatched,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractCounts {
    pub lines: u64,
    pub f: u64,
    pub m: u64,
    pub ambiguous: u64,
    pub unmatched: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extraction {
    pub f: Vec<String>,
    pub m: Vec<String>,
    pub counts: ExtractCounts,
}

/// Streams `input` line by line, calling `sink` for every gendered line.
pub fn extract_stream<R: BufRead>(
    input: R,
    origin: &str,
    patterns: &PatternSet,
    mut sink: impl FnMut(Gender, &str) -> Result<()>,
) -> Result<ExtractCounts> {
    let mut counts = ExtractCounts::default();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(origin, i + 1, e.to_string()))?;
        counts.lines += 1;
        match patterns.classify(&line) {
            Classification::Gendered(g) => {
                match g {
                    Gender::F => counts.f += 1,
                    Gender::M => counts.m += 1,
                }
                sink(g, &line)?;
            }
            Classification::Ambiguous => counts.ambiguous += 1,
            Classification::Unmatched => counts.unmatched += 1,
        }
    }
    Ok(counts)
}

/// In-memory [`extract_stream`].
pub fn extract<S: AsRef<str>>(lines: &[S], patterns: &PatternSet) -> Extraction {
    let mut out = Extraction::default();
    for line in lines {
        let line = line.as_ref();
        out.counts.lines += 1;
        match patterns.classify(line) {
            Classification::Gendered(Gender::F) => {
                out.counts.f += 1;
                out.f.push(line.to_string());
            }
            Classification::Gendered(Gender::M) => {
                out.counts.m += 1;
                out.m.push(line.to_string());
            }
            Classification::Ambiguous => out.counts.ambiguous += 1,
            Classification::Unmatched => out.counts.unmatched += 1,
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub sentences_f: u64,
    pub sentences_m: u64,
    pub words_f: u64,
    pub words_m: u64,
}

impl CorpusStats {
    pub fn add(&mut self, o: &CorpusStats) {
        self.sentences_f += o.sentences_f;
        self.sentences_m += o.sentences_m;
        self.words_f += o.words_f;
        self.words_m += o.words_m;
    }

    pub fn to_table(&self) -> String {
        format!(
            "        {:>10} {:>10}\nSent.   {:>10} {:>10}\nWords   {:>10} {:>10}\n",
            "F", "M", self.sentences_f, self.sentences_m, self.words_f, self.words_m
        )
    }
}

pub fn corpus_stats<S: AsRef<str>>(f_corpus: &[S], m_corpus: &[S]) -> CorpusStats {
    let words = |c: &[S]| c.iter().map(|l| l.as_ref().split_whitespace().count() as u64).sum();
    CorpusStats {
        sentences_f: f_corpus.len() as u64,
        sentences_m: m_corpus.len() as u64,
        words_f: words(f_corpus),
        words_m: words(m_corpus),
    }
}
