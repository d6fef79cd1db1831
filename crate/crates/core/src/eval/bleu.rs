//! Corpus BLEU with signature `case:mixed|eff:no|tok:13a|smooth:exp`.
//!
//! 13a tokenization rules, applied in order to ` line `:
//!
//! | step | rule |
//! |------|------|
//! | 1 | drop `<skipped>`, join `-\n` hyphenation, newlines become spaces |
//! | 2 | unescape `&quot;` `&amp;` `&lt;` `&gt;` |
//! | 3 | pad every char in `{|}~ [\]^_` space-`&` `(`-`+` `:`-`@` `/` with spaces |
//! | 4 | split `.`/`,` from a preceding non-digit |
//! | 5 | split `.`/`,` from a following non-digit |
//! | 6 | split `-` from a preceding digit |
//! | 7 | collapse whitespace |

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_NGRAM_ORDER: usize = 4;
pub const BLEU_SIGNATURE: &str = "nrefs:1|case:mixed|eff:no|tok:13a|smooth:exp";

struct Rules {
    punct: Regex,
    period_after: Regex,
    period_before: Regex,
    dash: Regex,
}

fn rules() -> &'static Rules {
    static RULES: OnceLock<Rules> = OnceLock::new();
    RULES.get_or_init(|| Rules {
        punct: Regex::new(r"([\{-\~\[-` -\&\(-\+:-@/])").unwrap(),
        period_after: Regex::new(r"([^0-9])([\.,])").unwrap(),
        period_before: Regex::new(r"([\.,])([^0-9])").unwrap(),
        dash: Regex::new(r"([0-9])(-)").unwrap(),
    })
}

/// mteval-v13a compatible tokenization.
pub fn tokenize_13a(text: &str) -> Vec<String> {
    let mut line = text
        .replace("<skipped>", "")
        .replace("-\n", "")
        .replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let r = rules();
    let line = format!(" {line} ");
    let line = r.punct.replace_all(&line, " ${1} ");
    let line = r.period_after.replace_all(&line, "${1} ${2} ");
    let line = r.period_before.replace_all(&line, " ${1} ${2}");
    let line = r.dash.replace_all(&line, "${1} ${2} ");
    line.split_whitespace().map(str::to_string).collect()
}

/// Sufficient statistics for corpus BLEU.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuStats {
    pub correct: [u64; MAX_NGRAM_ORDER],
    pub total: [u64; MAX_NGRAM_ORDER],
    pub sys_len: u64,
    pub ref_len: u64,
}

fn ngram_counts(tokens: &[String]) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    for n in 1..=MAX_NGRAM_ORDER {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

impl BleuStats {
    pub fn segment(hypothesis: &str, reference: &str) -> Self {
        let hyp = tokenize_13a(hypothesis.trim_end());
        let reference = tokenize_13a(reference.trim_end());
        let ref_counts = ngram_counts(&reference);
        let mut stats = BleuStats {
            sys_len: hyp.len() as u64,
            ref_len: reference.len() as u64,
            ..Default::default()
        };
        for (gram, count) in ngram_counts(&hyp) {
            let n = gram.len() - 1;
            stats.total[n] += count;
            if let Some(&r) = ref_counts.get(gram) {
                stats.correct[n] += count.min(r);
            }
        }
        stats
    }

    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..MAX_NGRAM_ORDER {
            self.correct[n] += other.correct[n];
            self.total[n] += other.total[n];
        }
        self.sys_len += other.sys_len;
        self.ref_len += other.ref_len;
    }

    /// `exp(1 - r/c)` when the hypothesis side is shorter, else 1.
    pub fn brevity_penalty(&self) -> f64 {
        if self.sys_len >= self.ref_len {
            1.0
        } else if self.sys_len > 0 {
            (1.0 - self.ref_len as f64 / self.sys_len as f64).exp()
        } else {
            0.0
        }
    }

    /// BLEU in [0, 100] with exponential smoothing of zero-match orders.
    pub fn score(&self) -> f64 {
        let bp = self.brevity_penalty();
        if self.correct.iter().all(|&c| c == 0) {
            return 0.0;
        }
        let mut precisions = [0.0f64; MAX_NGRAM_ORDER];
        let mut smooth = 1.0;
        for n in 0..MAX_NGRAM_ORDER {
            if self.total[n] == 0 {
                break;
            }
            precisions[n] = if self.correct[n] == 0 {
                smooth *= 2.0;
                100.0 / (smooth * self.total[n] as f64)
            } else {
                100.0 * self.correct[n] as f64 / self.total[n] as f64
            };
        }
        // an order with no hypothesis n-grams leaves a zero precision, which
        // drives the geometric mean to (numerically) zero
        let log_sum: f64 = precisions
            .iter()
            .map(|&p| if p == 0.0 { -9_999_999_999.0 } else { p.ln() })
            .sum();
        bp * (log_sum / MAX_NGRAM_ORDER as f64).exp()
    }
}

/// Corpus-level BLEU over aligned hypothesis/reference lists.
pub fn bleu_corpus<H, R>(hypotheses: &[H], references: &[R]) -> Result<f64>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    Ok(corpus_stats(hypotheses, references)?.score())
}

pub fn corpus_stats<H, R>(hypotheses: &[H], references: &[R]) -> Result<BleuStats>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    if hypotheses.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if hypotheses.len() != references.len() {
        return Err(Error::invalid(format!(
            "{} hypotheses vs {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    let mut stats = BleuStats::default();
    for (h, r) in hypotheses.iter().zip(references) {
        stats.add(&BleuStats::segment(h.as_ref(), r.as_ref()));
    }
    Ok(stats)
}
