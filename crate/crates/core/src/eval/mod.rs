//! Gender-translation evaluation: term coverage, gender accuracy, BLEU and
//! the harmonic-mean tuning objective.
//!
//! Coverage is the share of annotated terms that the hypothesis produces in
//! either gender form; accuracy is the share of those measurable terms that
//! carry the annotated (correct) form.

pub mod bleu;

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub use bleu::{bleu_corpus, tokenize_13a, BleuStats, BLEU_SIGNATURE};

use crate::error::{Error, Result};
use crate::types::Gender;

pub const EVAL_SET_MAGIC: &str = "MUSTSHE-LIKE v1";
const COLUMNS: &str = "id\tsource\treference\tterms";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedTerm {
    pub correct_form: String,
    pub wrong_form: String,
    pub gender: Gender,
}

impl AnnotatedTerm {
    pub fn new(correct: impl Into<String>, wrong: impl Into<String>, gender: Gender) -> Result<Self> {
        let term = Self {
            correct_form: correct.into(),
            wrong_form: wrong.into(),
            gender,
        };
        term.validate()?;
        Ok(term)
    }

    fn validate(&self) -> Result<()> {
        for form in [&self.correct_form, &self.wrong_form] {
            if form.is_empty() {
                return Err(Error::invalid("empty term form"));
            }
            if form.chars().any(|c| c.is_whitespace() || c == '|' || c == ';') {
                return Err(Error::invalid(format!(
                    "term form {form:?} must be a single token without '|' or ';'"
                )));
            }
        }
        if self.correct_form == self.wrong_form {
            return Err(Error::invalid("correct and wrong forms are identical"));
        }
        Ok(())
    }

    /// The same term with the gender reading flipped.
    pub fn swapped(&self) -> Self {
        Self {
            correct_form: self.wrong_form.clone(),
            wrong_form: self.correct_form.clone(),
            gender: self.gender.opposite(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub id: String,
    pub source: String,
    pub reference: String,
    pub terms: Vec<AnnotatedTerm>,
}

impl AnnotatedSentence {
    /// The gender shared by all of the sentence's terms, if any.
    pub fn gender(&self) -> Option<Gender> {
        let first = self.terms.first()?.gender;
        self.terms.iter().all(|t| t.gender == first).then_some(first)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalSet {
    pub sentences: Vec<AnnotatedSentence>,
}

impl EvalSet {
    pub fn new(sentences: Vec<AnnotatedSentence>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &sentences {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::invalid(format!("duplicate sentence id {:?}", s.id)));
            }
        }
        Ok(Self { sentences })
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn references(&self) -> Vec<&str> {
        self.sentences.iter().map(|s| s.reference.as_str()).collect()
    }

    /// Sub-set of sentences at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> EvalSet {
        EvalSet {
            sentences: indices.iter().map(|&i| self.sentences[i].clone()).collect(),
        }
    }

    /// Indices of sentences whose terms all carry gender `g`.
    pub fn indices_of(&self, g: Gender) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.sentences[i].gender() == Some(g))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{EVAL_SET_MAGIC}\n{COLUMNS}\n");
        for s in &self.sentences {
            let terms: Vec<String> = s
                .terms
                .iter()
                .map(|t| format!("{}|{}|{}", t.correct_form, t.wrong_form, t.gender))
                .collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                s.id,
                s.source,
                s.reference,
                terms.join(";")
            );
        }
        out
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim_end() == EVAL_SET_MAGIC => {}
            _ => return Err(Error::parse(origin, 1, format!("expected {EVAL_SET_MAGIC:?} header"))),
        }
        match lines.next() {
            Some((_, l)) if l.trim_end() == COLUMNS => {}
            _ => return Err(Error::parse(origin, 2, "expected column header id/source/reference/terms")),
        }
        let mut seen = HashSet::new();
        let mut sentences = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("expected 4 tab-separated columns, got {}", cols.len()),
                ));
            }
            let id = cols[0].to_string();
            if id.is_empty() {
                return Err(Error::parse(origin, lineno, "empty sentence id"));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::parse(origin, lineno, format!("duplicate id {id:?}")));
            }
            let mut terms = Vec::new();
            if !cols[3].trim().is_empty() {
                for triple in cols[3].split(';') {
                    let parts: Vec<&str> = triple.split('|').collect();
                    if parts.len() != 3 {
                        return Err(Error::parse(
                            origin,
                            lineno,
                            format!("term {triple:?} is not correct|wrong|G"),
                        ));
                    }
                    let gender: Gender = parts[2]
                        .parse()
                        .map_err(|e: Error| Error::parse(origin, lineno, e.to_string()))?;
                    let term = AnnotatedTerm::new(parts[0], parts[1], gender)
                        .map_err(|e| Error::parse(origin, lineno, e.to_string()))?;
                    terms.push(term);
                }
            }
            sentences.push(AnnotatedSentence {
                id,
                source: cols[1].to_string(),
                reference: cols[2].to_string(),
                terms,
            });
        }
        Ok(Self { sentences })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Reads and validates an eval-set file.
pub fn parse_eval_set(path: &Path) -> Result<EvalSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EvalSet::from_text(&text, &path.display().to_string())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenderCounts {
    pub terms_total: u64,
    pub terms_correct: u64,
    pub terms_wrong: u64,
}

impl GenderCounts {
    pub fn measurable(&self) -> u64 {
        self.terms_correct + self.terms_wrong
    }

    pub fn unmeasured(&self) -> u64 {
        self.terms_total - self.measurable()
    }

    pub fn coverage(&self) -> Option<f64> {
        (self.terms_total > 0).then(|| self.measurable() as f64 / self.terms_total as f64)
    }

    /// Absent when no term was measurable.
    pub fn accuracy(&self) -> Option<f64> {
        let m = self.measurable();
        (m > 0).then(|| self.terms_correct as f64 / m as f64)
    }

    fn add(&mut self, o: &GenderCounts) {
        self.terms_total += o.terms_total;
        self.terms_correct += o.terms_correct;
        self.terms_wrong += o.terms_wrong;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenderScores {
    pub f: GenderCounts,
    pub m: GenderCounts,
}

impl GenderScores {
    pub fn get(&self, g: Gender) -> &GenderCounts {
        match g {
            Gender::F => &self.f,
            Gender::M => &self.m,
        }
    }

    fn get_mut(&mut self, g: Gender) -> &mut GenderCounts {
        match g {
            Gender::F => &mut self.f,
            Gender::M => &mut self.m,
        }
    }

    /// Accuracy over the measurable terms of both genders.
    pub fn pooled(&self) -> GenderCounts {
        let mut all = self.f;
        all.add(&self.m);
        all
    }

    pub fn add(&mut self, other: &GenderScores) {
        self.f.add(&other.f);
        self.m.add(&other.m);
    }
}

fn boundary_punct() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\p{P}+|\p{P}+$").unwrap())
}

/// Lowercases and strips leading/trailing punctuation from one token.
pub fn normalize_token(tok: &str) -> String {
    boundary_punct().replace_all(&tok.to_lowercase(), "").into_owned()
}

/// Term outcomes for one hypothesis. Each hypothesis token can be consumed
/// by at most one term; terms are matched in annotation order.
pub fn score_sentence(hypothesis: &str, sentence: &AnnotatedSentence) -> GenderScores {
    let mut pool: BTreeMap<String, usize> = BTreeMap::new();
    for tok in hypothesis.split_whitespace() {
        let norm = normalize_token(tok);
        if !norm.is_empty() {
            *pool.entry(norm).or_insert(0) += 1;
        }
    }
    let mut take = |form: &str| -> bool {
        match pool.get_mut(&normalize_token(form)) {
            Some(n) if *n > 0 => {
                *n -= 1;
                true
            }
            _ => false,
        }
    };
    let mut scores = GenderScores::default();
    for term in &sentence.terms {
        let c = scores.get_mut(term.gender);
        c.terms_total += 1;
        if take(&term.correct_form) {
            c.terms_correct += 1;
        } else if take(&term.wrong_form) {
            c.terms_wrong += 1;
        }
    }
    scores
}

/// Per-gender coverage/accuracy counts over a whole set.
pub fn score_gender<H: AsRef<str>>(hypotheses: &[H], eval_set: &EvalSet) -> Result<GenderScores> {
    if hypotheses.len() != eval_set.len() {
        return Err(Error::invalid(format!(
            "{} hypotheses for {} eval sentences",
            hypotheses.len(),
            eval_set.len()
        )));
    }
    let mut total = GenderScores::default();
    for (h, s) in hypotheses.iter().zip(&eval_set.sentences) {
        total.add(&score_sentence(h.as_ref(), s));
    }
    Ok(total)
}

/// `2ab / (a + b)`, zero when both are zero.
pub fn harmonic_mean(a: f64, b: f64) -> Result<f64> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::invalid(format!(
            "harmonic mean needs nonnegative inputs, got ({a}, {b})"
        )));
    }
    if a + b == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * a * b / (a + b))
}

/// BLEU and gender metrics for one system output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub sentences: usize,
    pub bleu: f64,
    pub bleu_signature: String,
    pub gender: GenderScores,
}

impl EvalReport {
    pub fn compute<H: AsRef<str>>(hypotheses: &[H], eval_set: &EvalSet) -> Result<Self> {
        let gender = score_gender(hypotheses, eval_set)?;
        let bleu = bleu_corpus(hypotheses, &eval_set.references())?;
        Ok(Self {
            sentences: eval_set.len(),
            bleu,
            bleu_signature: BLEU_SIGNATURE.to_string(),
            gender,
        })
    }

    /// Deterministic `key=value` lines; absent metrics print as `NA`.
    pub fn to_key_values(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{:.4}", x));
        let mut out = String::new();
        let _ = writeln!(out, "sentences={}", self.sentences);
        let _ = writeln!(out, "bleu={:.4}", self.bleu);
        let _ = writeln!(out, "bleu_signature={}", self.bleu_signature);
        for g in Gender::BOTH {
            let c = self.gender.get(g);
            let k = g.as_str().to_lowercase();
            let _ = writeln!(out, "terms_total_{k}={}", c.terms_total);
            let _ = writeln!(out, "terms_correct_{k}={}", c.terms_correct);
            let _ = writeln!(out, "terms_wrong_{k}={}", c.terms_wrong);
            let _ = writeln!(out, "coverage_{k}={}", opt(c.coverage()));
            let _ = writeln!(out, "accuracy_{k}={}", opt(c.accuracy()));
        }
        let _ = writeln!(out, "accuracy_pooled={}", opt(self.gender.pooled().accuracy()));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sent(id: &str, terms: &[(&str, &str, Gender)]) -> AnnotatedSentence {
        AnnotatedSentence {
            id: id.into(),
            source: "src".into(),
            reference: "ref".into(),
            terms: terms
                .iter()
                .map(|(c, w, g)| AnnotatedTerm::new(*c, *w, *g).unwrap())
                .collect(),
        }
    }

    #[test]
    fn one_correct_one_missing() {
        let s = sent("1", &[("nueva", "nuevo", Gender::F), ("cansada", "cansado", Gender::F)]);
        let sc = score_sentence("Soy nueva aquí", &s);
        assert_eq!(sc.f.coverage(), Some(0.5));
        assert_eq!(sc.f.accuracy(), Some(1.0));
        assert_eq!(sc.m.accuracy(), None);
    }

    #[test]
    fn wrong_form_counts_for_coverage() {
        let s = sent("1", &[("nueva", "nuevo", Gender::F)]);
        let sc = score_sentence("soy nuevo.", &s);
        assert_eq!(sc.f.coverage(), Some(1.0));
        assert_eq!(sc.f.accuracy(), Some(0.0));
    }

    #[test]
    fn each_token_consumed_once() {
        let s = sent("1", &[("sola", "solo", Gender::F), ("sola", "solo", Gender::F)]);
        let sc = score_sentence("estoy sola", &s);
        assert_eq!(sc.f, GenderCounts { terms_total: 2, terms_correct: 1, terms_wrong: 0 });
        let sc = score_sentence("sola y sola", &s);
        assert_eq!(sc.f.terms_correct, 2);
    }

    #[test]
    fn matching_ignores_case_and_edge_punctuation() {
        let s = sent("1", &[("Nueva", "nuevo", Gender::F)]);
        let sc = score_sentence("¡NUEVA!", &s);
        assert_eq!(sc.f.terms_correct, 1);
    }

    #[test]
    fn length_mismatch_is_error() {
        let set = EvalSet::new(vec![sent("1", &[])]).unwrap();
        assert!(score_gender::<&str>(&[], &set).is_err());
    }

    #[test]
    fn harmonic_mean_cases() {
        assert_eq!(harmonic_mean(7.0, 7.0).unwrap(), 7.0);
        assert_eq!(harmonic_mean(0.0, 55.0).unwrap(), 0.0);
        assert_eq!(harmonic_mean(0.0, 0.0).unwrap(), 0.0);
        assert!((harmonic_mean(30.0, 60.0).unwrap() - 40.0).abs() < 1e-12);
        assert!(harmonic_mean(-1.0, 2.0).is_err());
    }

    #[test]
    fn parse_empty_terms_and_errors() {
        let text = "MUSTSHE-LIKE v1\nid\tsource\treference\tterms\n\
                    a\tI am new\tSoy nueva\tnueva|nuevo|F\n\
                    b\thello\thola\t\n";
        let set = EvalSet::from_text(text, "e.tsv").unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.sentences[1].terms.is_empty());
        assert_eq!(set.sentences[0].gender(), Some(Gender::F));

        let bad = text.replace("nueva|nuevo|F", "nueva|nuevo|X");
        let err = EvalSet::from_text(&bad, "e.tsv").unwrap_err();
        assert!(err.to_string().starts_with("e.tsv:3:"), "{err}");

        let dup = format!("{text}a\tx\ty\t\n");
        assert!(EvalSet::from_text(&dup, "e.tsv").unwrap_err().to_string().starts_with("e.tsv:5:"));

        let empty_form = text.replace("nueva|nuevo|F", "|nuevo|F");
        assert!(EvalSet::from_text(&empty_form, "e.tsv").is_err());
        let same = text.replace("nueva|nuevo|F", "nuevo|nuevo|F");
        assert!(EvalSet::from_text(&same, "e.tsv").is_err());
    }

    fn arb_set() -> impl Strategy<Value = EvalSet> {
        let term = ("[a-z]{1,5}", "[a-z]{1,5}", prop::bool::ANY).prop_filter_map("distinct", |(c, w, f)| {
            (c != w).then(|| AnnotatedTerm::new(c, w, if f { Gender::F } else { Gender::M }).unwrap())
        });
        proptest::collection::vec(
            ("[a-z ]{0,12}", "[a-z ]{0,12}", proptest::collection::vec(term, 0..3)),
            0..6,
        )
        .prop_map(|rows| {
            EvalSet::new(
                rows.into_iter()
                    .enumerate()
                    .map(|(i, (s, r, terms))| AnnotatedSentence {
                        id: format!("s{i}"),
                        source: s,
                        reference: r,
                        terms,
                    })
                    .collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn eval_set_roundtrip(set in arb_set()) {
            let back = EvalSet::from_text(&set.to_text(), "mem").unwrap();
            prop_assert_eq!(back, set);
        }

        #[test]
        fn counts_partition_terms(set in arb_set(), hyp in "[a-z ]{0,30}") {
            let hyps = vec![hyp; set.len()];
            let sc = score_gender(&hyps, &set).unwrap();
            for g in Gender::BOTH {
                let c = sc.get(g);
                prop_assert_eq!(c.terms_correct + c.terms_wrong + c.unmeasured(), c.terms_total);
            }
        }

        #[test]
        fn coverage_monotone(set in arb_set(), hyp in "[a-z ]{0,30}", pick in 0usize..10, use_wrong in prop::bool::ANY) {
            let terms: Vec<&AnnotatedTerm> = set.sentences.iter().flat_map(|s| s.terms.iter()).collect();
            prop_assume!(!terms.is_empty());
            let t = terms[pick % terms.len()];
            let hyps = vec![hyp.clone(); set.len()];
            let extra = format!("{hyp} {}", if use_wrong { &t.wrong_form } else { &t.correct_form });
            let more = vec![extra; set.len()];
            let a = score_gender(&hyps, &set).unwrap();
            let b = score_gender(&more, &set).unwrap();
            for g in Gender::BOTH {
                prop_assert!(b.get(g).measurable() >= a.get(g).measurable());
            }
        }

        #[test]
        fn harmonic_mean_bounds(a in 0.0f64..100.0, b in 0.0f64..100.0) {
            let h = harmonic_mean(a, b).unwrap();
            prop_assert!(h >= a.min(b) - 1e-9 && h <= a.max(b) + 1e-9);
            if (a - b).abs() > 1e-6 && a.min(b) > 0.0 {
                prop_assert!(h > a.min(b) && h < a.max(b));
            }
        }
    }
}
