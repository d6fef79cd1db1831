//! Shared vocabulary, sequence and log-probability types.
//!
//! All scores in the crate live in the natural-log domain. Zero-probability
//! events are floored at [`LOG_PROB_FLOOR`] so fused arithmetic stays finite.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TokenId = u32;

/// Sentinel log-probability for events that would otherwise be `-inf`.
pub const LOG_PROB_FLOOR: f64 = -1e9;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// `log(sum(exp(values)))` using the max-shift trick.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyVector);
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// A closed, ordered token alphabet with reserved BOS/EOS/UNK entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    bos_id: TokenId,
    eos_id: TokenId,
    unk_id: TokenId,
}

impl Vocabulary {
    pub fn new(
        tokens: Vec<String>,
        bos_id: TokenId,
        eos_id: TokenId,
        unk_id: TokenId,
    ) -> Result<Self> {
        let size = tokens.len();
        for id in [bos_id, eos_id, unk_id] {
            if id as usize >= size {
                return Err(Error::TokenOutOfRange { id, size });
            }
        }
        if bos_id == eos_id || bos_id == unk_id || eos_id == unk_id {
            return Err(Error::invalid("bos, eos and unk ids must be distinct"));
        }
        let mut index = HashMap::with_capacity(size);
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!("invalid token surface {tok:?}")));
            }
            if index.insert(tok.clone(), i as TokenId).is_some() {
                return Err(Error::invalid(format!("duplicate token {tok:?}")));
            }
        }
        Ok(Self {
            tokens,
            index,
            bos_id,
            eos_id,
            unk_id,
        })
    }

    /// Builds a vocabulary with `<s>`, `</s>`, `<unk>` at ids 0, 1, 2 followed by `words`.
    pub fn with_specials<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens = vec![BOS.to_string(), EOS.to_string(), UNK.to_string()];
        tokens.extend(words.into_iter().map(Into::into));
        Self::new(tokens, 0, 1, 2)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn bos(&self) -> TokenId {
        self.bos_id
    }

    pub fn eos(&self) -> TokenId {
        self.eos_id
    }

    pub fn unk(&self) -> TokenId {
        self.unk_id
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        id == self.bos_id || id == self.eos_id || id == self.unk_id
    }

    /// Whitespace tokenization; unknown surfaces map to UNK.
    pub fn encode(&self, text: &str) -> TokenSeq {
        TokenSeq::new(
            text.split_whitespace()
                .map(|w| self.id(w).unwrap_or(self.unk_id))
                .collect(),
        )
    }

    /// Joins surface forms with single spaces, dropping BOS and EOS.
    pub fn decode(&self, seq: &TokenSeq) -> String {
        let mut out = String::new();
        for &id in seq.ids() {
            if id == self.bos_id || id == self.eos_id {
                continue;
            }
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(self.token(id).unwrap_or(UNK));
        }
        out
    }

    pub fn validate(&self, seq: &TokenSeq) -> Result<()> {
        seq.validate(self.len())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "VOCAB v1 {} {} {} {}\n",
            self.len(),
            self.bos_id,
            self.eos_id,
            self.unk_id
        );
        for tok in &self.tokens {
            out.push_str(tok);
            out.push('\n');
        }
        out
    }

    /// Parses a `VOCAB v1` block from the front of `lines`, consuming exactly
    /// the header plus `V` token lines.
    pub(crate) fn parse_lines<'a, I>(lines: &mut I, origin: &str, first_line: usize) -> Result<Self>
    where
        I: Iterator<Item = &'a str>,
    {
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(origin, first_line, "missing VOCAB header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != "VOCAB" || fields[1] != "v1" {
            return Err(Error::parse(
                origin,
                first_line,
                format!("bad vocabulary header {header:?}"),
            ));
        }
        let num = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::parse(origin, first_line, format!("bad integer {s:?}")))
        };
        let size = num(fields[2])?;
        let (bos, eos, unk) = (num(fields[3])?, num(fields[4])?, num(fields[5])?);
        let mut tokens = Vec::with_capacity(size);
        for i in 0..size {
            let line = lines.next().ok_or_else(|| {
                Error::parse(origin, first_line + i + 1, "truncated vocabulary")
            })?;
            tokens.push(line.to_string());
        }
        Self::new(tokens, bos as TokenId, eos as TokenId, unk as TokenId)
            .map_err(|e| Error::parse(origin, first_line, e.to_string()))
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines();
        let vocab = Self::parse_lines(&mut lines, origin, 1)?;
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::parse(
                origin,
                vocab.len() + 2,
                "trailing content after vocabulary",
            ));
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}

/// A sequence of token ids over some [`Vocabulary`].
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenSeq(Vec<TokenId>);

impl TokenSeq {
    pub fn new(ids: Vec<TokenId>) -> Self {
        Self(ids)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, id: TokenId) {
        self.0.push(id);
    }

    pub fn into_inner(self) -> Vec<TokenId> {
        self.0
    }

    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        match self.0.iter().find(|&&id| id as usize >= vocab_size) {
            Some(&id) => Err(Error::TokenOutOfRange {
                id,
                size: vocab_size,
            }),
            None => Ok(()),
        }
    }
}

impl From<Vec<TokenId>> for TokenSeq {
    fn from(ids: Vec<TokenId>) -> Self {
        Self(ids)
    }
}

/// A normalized next-token distribution in natural-log space.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbDist(Vec<f64>);

impl LogProbDist {
    /// Log-softmax of unnormalized scores, floored at [`LOG_PROB_FLOOR`].
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        let lse = log_sum_exp(logits)?;
        if !lse.is_finite() {
            return Err(Error::invalid("logits must contain a finite maximum"));
        }
        Ok(Self(
            logits
                .iter()
                .map(|&z| (z - lse).max(LOG_PROB_FLOOR))
                .collect(),
        ))
    }

    /// Wraps values that are already log-probabilities, checking normalization.
    pub fn from_log_probs(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| v.is_nan() || *v > 1e-9) {
            return Err(Error::invalid("log-probabilities must be <= 0"));
        }
        let floored: Vec<f64> = values.into_iter().map(|v| v.max(LOG_PROB_FLOOR)).collect();
        let lse = log_sum_exp(&floored)?;
        if lse.abs() >= 1e-6 {
            return Err(Error::invalid(format!(
                "distribution not normalized: log-sum-exp = {lse}"
            )));
        }
        Ok(Self(floored))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, id: TokenId) -> f64 {
        self.0[id as usize]
    }

    pub fn argmax(&self) -> TokenId {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = i;
            }
        }
        best as TokenId
    }
}

/// Interpolation weights for ILM subtraction and ELM addition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub beta_ilm: f64,
    pub beta_elm: f64,
}

impl FusionWeights {
    pub const OFF: FusionWeights = FusionWeights {
        beta_ilm: 0.0,
        beta_elm: 0.0,
    };

    pub fn new(beta_ilm: f64, beta_elm: f64) -> Result<Self> {
        for (name, v) in [("beta_ilm", beta_ilm), ("beta_elm", beta_elm)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(Self { beta_ilm, beta_elm })
    }

    pub fn is_off(&self) -> bool {
        self.beta_ilm == 0.0 && self.beta_elm == 0.0
    }
}

impl fmt::Display for FusionWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3})", self.beta_ilm, self.beta_elm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    F,
    M,
}

impl Gender {
    pub const BOTH: [Gender; 2] = [Gender::F, Gender::M];

    pub fn opposite(self) -> Self {
        match self {
            Gender::F => Gender::M,
            Gender::M => Gender::F,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::F => "F",
            Gender::M => "M",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F" => Ok(Gender::F),
            "M" => Ok(Gender::M),
            other => Err(Error::invalid(format!("bad gender label {other:?}"))),
        }
    }
}
