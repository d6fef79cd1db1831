//! `TOYS2S v1` text serialization.
//!
//! Layout: a `TOYS2S v1 <d> <h> <seed>` header, the source then target
//! `VOCAB v1` blocks, then one `<name> <rows> <cols>` line per tensor
//! followed by `rows` lines of space-separated values printed with 17
//! significant digits.

use std::fmt::Write as _;
use std::path::Path;

use super::{Params, ToySeq2Seq, TENSOR_NAMES};
use crate::error::{Error, Result};
use crate::types::Vocabulary;

impl ToySeq2Seq {
    pub fn to_text(&self) -> String {
        let mut out = format!("TOYS2S v1 {} {} {}\n", self.d, self.h, self.seed);
        out.push_str(&self.src_vocab.to_text());
        out.push_str(&self.tgt_vocab.to_text());
        let shapes = Params::shapes(self.src_vocab.len(), self.tgt_vocab.len(), self.d, self.h);
        for (i, tensor) in self.p.tensors().iter().enumerate() {
            let (rows, cols) = shapes[i];
            let _ = writeln!(out, "{} {} {}", TENSOR_NAMES[i], rows, cols);
            for r in 0..rows {
                let row = &tensor[r * cols..(r + 1) * cols];
                let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let all: Vec<&str> = text.lines().collect();
        let header = all
            .first()
            .ok_or_else(|| Error::parse(origin, 1, "missing TOYS2S header"))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 5 || f[0] != "TOYS2S" || f[1] != "v1" {
            return Err(Error::parse(origin, 1, format!("bad header {header:?}")));
        }
        let bad = |what: &str| Error::parse(origin, 1, format!("bad {what}"));
        let d: usize = f[2].parse().map_err(|_| bad("embedding dim"))?;
        let h: usize = f[3].parse().map_err(|_| bad("hidden dim"))?;
        let seed: u64 = f[4].parse().map_err(|_| bad("seed"))?;

        let mut iter = all[1..].iter().copied();
        let src_vocab = Vocabulary::parse_lines(&mut iter, origin, 2)?;
        let tgt_line = 3 + src_vocab.len();
        let tgt_vocab = Vocabulary::parse_lines(&mut iter, origin, tgt_line)?;
        let mut lineno = tgt_line + tgt_vocab.len();

        let mut model = ToySeq2Seq::zeros(src_vocab, tgt_vocab, d, h);
        model.seed = seed;
        let shapes = Params::shapes(model.src_vocab.len(), model.tgt_vocab.len(), d, h);
        for (i, tensor) in model.p.tensors_mut().into_iter().enumerate() {
            lineno += 1;
            let head = iter
                .next()
                .ok_or_else(|| Error::parse(origin, lineno, "truncated model"))?;
            let expect = format!("{} {} {}", TENSOR_NAMES[i], shapes[i].0, shapes[i].1);
            if head.trim() != expect {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("expected {expect:?}, got {head:?}"),
                ));
            }
            let (rows, cols) = shapes[i];
            for r in 0..rows {
                lineno += 1;
                let line = iter
                    .next()
                    .ok_or_else(|| Error::parse(origin, lineno, "truncated tensor"))?;
                let vals: Vec<f64> = line
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::parse(origin, lineno, "bad number"))?;
                if vals.len() != cols {
                    return Err(Error::parse(
                        origin,
                        lineno,
                        format!("expected {cols} values, got {}", vals.len()),
                    ));
                }
                if vals.iter().any(|v| !v.is_finite()) {
                    return Err(Error::parse(origin, lineno, "non-finite parameter"));
                }
                tensor[r * cols..(r + 1) * cols].copy_from_slice(&vals);
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}
