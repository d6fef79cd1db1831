//! Count-based n-gram language model with add-k smoothing.
//!
//! This is the external LM: trained on gender-pure monolingual text, it
//! scores the next target token from the last `order - 1` tokens of the
//! BOS-padded prefix.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{LogProbDist, TokenId, TokenSeq, Vocabulary};

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_K: f64 = 0.1;

#[derive(Debug, Clone, Default, PartialEq)]
struct ContextCounts {
    total: u64,
    next: HashMap<TokenId, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramLM {
    order: usize,
    k: f64,
    vocab_size: usize,
    bos: TokenId,
    eos: TokenId,
    counts: HashMap<Vec<TokenId>, ContextCounts>,
}

/// Trains an add-k n-gram model over BOS-padded, EOS-terminated sentences.
pub fn train_ngram(
    corpus: &[TokenSeq],
    order: usize,
    k: f64,
    vocab_size: usize,
    bos: TokenId,
    eos: TokenId,
) -> Result<NGramLM> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut lm = NGramLM::empty(order, k, vocab_size, bos, eos)?;
    for seq in corpus {
        lm.add_sentence(seq)?;
    }
    Ok(lm)
}

/// [`train_ngram`] with the specials and size taken from `vocab`.
pub fn train_ngram_for(
    vocab: &Vocabulary,
    corpus: &[TokenSeq],
    order: usize,
    k: f64,
) -> Result<NGramLM> {
    train_ngram(corpus, order, k, vocab.len(), vocab.bos(), vocab.eos())
}

impl NGramLM {
    fn empty(order: usize, k: f64, vocab_size: usize, bos: TokenId, eos: TokenId) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("n-gram order must be >= 1"));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::invalid(format!("smoothing constant k = {k} must be > 0")));
        }
        if bos as usize >= vocab_size || eos as usize >= vocab_size {
            return Err(Error::invalid("bos/eos ids outside the vocabulary"));
        }
        Ok(Self {
            order,
            k,
            vocab_size,
            bos,
            eos,
            counts: HashMap::new(),
        })
    }

    fn add_sentence(&mut self, seq: &TokenSeq) -> Result<()> {
        seq.validate(self.vocab_size)?;
        let mut padded = vec![self.bos; self.order - 1];
        padded.extend_from_slice(seq.ids());
        padded.push(self.eos);
        for end in (self.order - 1)..padded.len() {
            let ctx = padded[end + 1 - self.order..end].to_vec();
            let entry = self.counts.entry(ctx).or_default();
            entry.total += 1;
            *entry.next.entry(padded[end]).or_insert(0) += 1;
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn bos(&self) -> TokenId {
        self.bos
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }

    fn context_of(&self, prefix: &[TokenId]) -> Vec<TokenId> {
        let n = self.order - 1;
        let mut ctx = Vec::with_capacity(n);
        let take = prefix.len().min(n);
        ctx.resize(n - take, self.bos);
        ctx.extend_from_slice(&prefix[prefix.len() - take..]);
        ctx
    }

    /// Smoothed `p(token | context)` with `context` already of length `order - 1`.
    fn prob(&self, ctx: &[TokenId], token: TokenId) -> f64 {
        let denom_k = self.k * self.vocab_size as f64;
        match self.counts.get(ctx) {
            Some(c) => {
                let n = c.next.get(&token).copied().unwrap_or(0);
                (n as f64 + self.k) / (c.total as f64 + denom_k)
            }
            None => 1.0 / self.vocab_size as f64,
        }
    }

    /// Next-token distribution after `prefix` (BOS not included in `prefix`).
    pub fn logprob_dist(&self, prefix: &[TokenId]) -> LogProbDist {
        let ctx = self.context_of(prefix);
        let v = self.vocab_size as f64;
        let values = match self.counts.get(&ctx) {
            Some(c) => {
                let denom = c.total as f64 + self.k * v;
                let mut out = vec![(self.k / denom).ln(); self.vocab_size];
                for (&tok, &n) in &c.next {
                    out[tok as usize] = ((n as f64 + self.k) / denom).ln();
                }
                out
            }
            None => vec![-(v.ln()); self.vocab_size],
        };
        LogProbDist::from_log_probs(values).expect("add-k distribution is normalized")
    }

    /// Log-probability of one token after `prefix`.
    pub fn token_logprob(&self, prefix: &[TokenId], token: TokenId) -> f64 {
        self.prob(&self.context_of(prefix), token).ln()
    }

    /// Sum of per-step log-probs over `seq` followed by EOS.
    pub fn sequence_logprob(&self, seq: &TokenSeq) -> f64 {
        let ids = seq.ids();
        let mut total = 0.0;
        for i in 0..=ids.len() {
            let next = if i < ids.len() { ids[i] } else { self.eos };
            total += self.logprob_dist(&ids[..i]).get(next);
        }
        total
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "NGRAM v1 {} {:?} {} {} {}\n",
            self.order, self.k, self.vocab_size, self.bos, self.eos
        );
        let mut rows: BTreeMap<(&[TokenId], TokenId), u64> = BTreeMap::new();
        for (ctx, c) in &self.counts {
            for (&tok, &n) in &c.next {
                rows.insert((ctx.as_slice(), tok), n);
            }
        }
        for ((ctx, tok), n) in rows {
            for id in ctx {
                out.push_str(&id.to_string());
                out.push(' ');
            }
            out.push_str(&format!("{tok} {n}\n"));
        }
        out
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, 1, "missing NGRAM header"))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 7 || f[0] != "NGRAM" || f[1] != "v1" {
            return Err(Error::parse(origin, 1, format!("bad header {header:?}")));
        }
        let bad = |what: &str| Error::parse(origin, 1, format!("bad {what} in header"));
        let order: usize = f[2].parse().map_err(|_| bad("order"))?;
        let k: f64 = f[3].parse().map_err(|_| bad("k"))?;
        let vocab_size: usize = f[4].parse().map_err(|_| bad("vocab size"))?;
        let bos: TokenId = f[5].parse().map_err(|_| bad("bos"))?;
        let eos: TokenId = f[6].parse().map_err(|_| bad("eos"))?;
        let mut lm = Self::empty(order, k, vocab_size, bos, eos)
            .map_err(|e| Error::parse(origin, 1, e.to_string()))?;
        for (i, line) in lines {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let nums: Vec<u64> = line
                .split_whitespace()
                .map(|s| s.parse::<u64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(origin, lineno, "non-integer field"))?;
            if nums.len() != order + 1 {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("expected {} fields, got {}", order + 1, nums.len()),
                ));
            }
            let count = nums[order];
            if count == 0 {
                return Err(Error::parse(origin, lineno, "stored counts must be >= 1"));
            }
            if nums[..order].iter().any(|&id| id as usize >= vocab_size) {
                return Err(Error::parse(origin, lineno, "token id out of range"));
            }
            let ctx: Vec<TokenId> = nums[..order - 1].iter().map(|&x| x as TokenId).collect();
            let tok = nums[order - 1] as TokenId;
            let entry = lm.counts.entry(ctx).or_default();
            if entry.next.insert(tok, count).is_some() {
                return Err(Error::parse(origin, lineno, "duplicate entry"));
            }
            entry.total += count;
        }
        Ok(lm)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}
