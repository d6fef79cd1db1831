//! Grid search and cross-validated selection of fusion weights.
//!
//! Every grid point is decoded once per sentence; per-sentence BLEU
//! statistics and term counts are additive, so sweep metrics and the
//! metrics of any fold subset are assembled from the same cached decodes.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{harmonic_mean, score_sentence, BleuStats, EvalSet, GenderScores};
use crate::fusion::{beam_search, beam_search_base, CachedSource, DecodeOptions, FusionSystem, IlmContext};
use crate::ngram::NGramLM;
use crate::seq2seq::ToySeq2Seq;
use crate::types::FusionWeights;

pub const DEFAULT_GRID_STEP: f64 = 0.05;
pub const DEFAULT_FOLDS: usize = 10;
pub const THREADS_ENV: &str = "FUSEDEC_THREADS";

/// Everything needed to decode a source sentence under any weights.
#[derive(Debug, Clone, Copy)]
pub struct Decoder<'a> {
    pub model: &'a ToySeq2Seq,
    pub ilm: &'a IlmContext,
    pub elm: &'a NGramLM,
    pub opts: DecodeOptions,
}

impl Decoder<'_> {
    /// Detokenized hypothesis for one source line.
    pub fn translate(&self, source: &str, w: FusionWeights) -> Result<String> {
        let src = self.model.src_vocab().encode(source);
        let out = beam_search(self.model, self.ilm, self.elm, &src, w, &self.opts)?;
        Ok(self.model.tgt_vocab().decode(&out.tokens))
    }

    pub fn translate_all(&self, set: &EvalSet, w: FusionWeights) -> Result<Vec<String>> {
        set.sentences.iter().map(|s| self.translate(&s.source, w)).collect()
    }
}

/// Base-model-only decoding of every source in `set`.
pub fn translate_base(model: &ToySeq2Seq, set: &EvalSet, opts: &DecodeOptions) -> Result<Vec<String>> {
    set.sentences
        .iter()
        .map(|s| {
            let out = beam_search_base(model, &model.src_vocab().encode(&s.source), opts)?;
            Ok(model.tgt_vocab().decode(&out.tokens))
        })
        .collect()
}

/// Which weights the sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridAxes {
    /// Both `beta_ilm` and `beta_elm`.
    Full,
    /// `beta_ilm` pinned to 0 (shallow fusion without ILM removal).
    ElmOnly,
}

/// `{0, step, 2 step, ..., 1}`; `step` must divide 1 into whole steps.
pub fn grid_values(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::invalid(format!("grid step must be in (0, 1], got {step}")));
    }
    let n = (1.0 / step).round();
    if ((n * step) - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("grid step {step} does not divide 1")));
    }
    let n = n as usize;
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

pub fn grid_weights(step: f64, axes: GridAxes) -> Result<Vec<FusionWeights>> {
    let values = grid_values(step)?;
    let ilm_axis = match axes {
        GridAxes::Full => values.clone(),
        GridAxes::ElmOnly => vec![0.0],
    };
    let mut out = Vec::with_capacity(ilm_axis.len() * values.len());
    for &bi in &ilm_axis {
        for &be in &values {
            out.push(FusionWeights::new(bi, be)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub weights: FusionWeights,
    pub bleu: f64,
    /// Pooled gender accuracy in [0, 1]; 0 when nothing was measurable.
    pub accuracy: f64,
    pub hmean: f64,
}

impl GridPoint {
    pub fn from_stats(weights: FusionWeights, bleu: &BleuStats, gender: &GenderScores) -> Result<Self> {
        let bleu = bleu.score();
        let accuracy = gender.pooled().accuracy().unwrap_or(0.0);
        Ok(Self {
            weights,
            bleu,
            accuracy,
            hmean: harmonic_mean(bleu, accuracy * 100.0)?,
        })
    }
}

/// Decodes and per-sentence statistics for one grid point.
#[derive(Debug, Clone)]
pub struct PointDecodes {
    pub weights: FusionWeights,
    pub hypotheses: Vec<String>,
    bleu: Vec<BleuStats>,
    gender: Vec<GenderScores>,
}

impl PointDecodes {
    fn new(weights: FusionWeights, hypotheses: Vec<String>, set: &EvalSet) -> Self {
        let bleu = hypotheses
            .iter()
            .zip(&set.sentences)
            .map(|(h, s)| BleuStats::segment(h, &s.reference))
            .collect();
        let gender = hypotheses
            .iter()
            .zip(&set.sentences)
            .map(|(h, s)| score_sentence(h, s))
            .collect();
        Self {
            weights,
            hypotheses,
            bleu,
            gender,
        }
    }

    /// Metrics restricted to the sentences at `indices`.
    pub fn point_on(&self, indices: &[usize]) -> Result<GridPoint> {
        if indices.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut b = BleuStats::default();
        let mut g = GenderScores::default();
        for &i in indices {
            b.add(&self.bleu[i]);
            g.add(&self.gender[i]);
        }
        GridPoint::from_stats(self.weights, &b, &g)
    }

    pub fn point(&self) -> Result<GridPoint> {
        self.point_on(&(0..self.hypotheses.len()).collect::<Vec<_>>())
    }
}

/// Worker count from `FUSEDEC_THREADS`, else the available parallelism.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Decodes `set` at every weight pair. Sentences are processed in parallel,
/// each sharing its component distributions across all pairs. The result is
/// in the order of `weights`.
pub fn decode_grid(dec: &Decoder<'_>, set: &EvalSet, weights: &[FusionWeights]) -> Result<Vec<PointDecodes>> {
    if set.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let sys = FusionSystem::new(dec.model, dec.ilm, dec.elm)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let per_sentence: Vec<Vec<String>> = pool.install(|| {
        set.sentences
            .par_iter()
            .map(|s| {
                let mut cached = CachedSource::new(sys, &dec.model.src_vocab().encode(&s.source))?;
                weights
                    .iter()
                    .map(|&w| Ok(dec.model.tgt_vocab().decode(&cached.decode(w, &dec.opts)?.tokens)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(weights
        .iter()
        .enumerate()
        .map(|(j, &w)| {
            let hyps = per_sentence.iter().map(|row| row[j].clone()).collect();
            PointDecodes::new(w, hyps, set)
        })
        .collect())
}

/// Metrics at every grid point, sorted by `(beta_ilm, beta_elm)`.
pub fn grid_sweep(dec: &Decoder<'_>, set: &EvalSet, step: f64, axes: GridAxes) -> Result<Vec<GridPoint>> {
    let decodes = decode_grid(dec, set, &grid_weights(step, axes)?)?;
    let mut points = decodes.iter().map(PointDecodes::point).collect::<Result<Vec<_>>>()?;
    sort_points(&mut points);
    Ok(points)
}

fn sort_points(points: &mut [GridPoint]) {
    points.sort_by(|a, b| {
        a.weights
            .beta_ilm
            .total_cmp(&b.weights.beta_ilm)
            .then(a.weights.beta_elm.total_cmp(&b.weights.beta_elm))
    });
}

/// Highest harmonic mean; ties go to lower `beta_elm`, then lower `beta_ilm`.
pub fn select_best(points: &[GridPoint]) -> Result<GridPoint> {
    points
        .iter()
        .copied()
        .min_by(|a, b| {
            b.hmean
                .total_cmp(&a.hmean)
                .then(a.weights.beta_elm.total_cmp(&b.weights.beta_elm))
                .then(a.weights.beta_ilm.total_cmp(&b.weights.beta_ilm))
        })
        .ok_or(Error::EmptyVector)
}

/// Round-robin fold membership by sentence index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn round_robin(n: usize, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid("need at least 2 folds"));
        }
        if k > n {
            return Err(Error::invalid(format!("{k} folds for {n} sentences")));
        }
        Ok(Self {
            k,
            fold_of: (0..n).map(|i| i % k).collect(),
        })
    }

    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn complement(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub folds: FoldAssignment,
    /// Weights chosen for each held-out fold.
    pub selections: Vec<FusionWeights>,
    /// Full-set hypotheses, each fold decoded with its own selection.
    pub hypotheses: Vec<String>,
    /// Metrics of the stitched hypotheses; `weights` holds the mean selection.
    pub stitched: GridPoint,
    /// The sweep over the full set, sorted.
    pub sweep: Vec<GridPoint>,
}

/// K-fold selection from cached grid decodes.
pub fn cross_validate(decodes: &[PointDecodes], set: &EvalSet, k: usize) -> Result<CvOutcome> {
    if decodes.is_empty() {
        return Err(Error::EmptyVector);
    }
    let folds = FoldAssignment::round_robin(set.len(), k)?;
    let mut hypotheses = vec![String::new(); set.len()];
    let mut stitched_b = BleuStats::default();
    let mut stitched_g = GenderScores::default();
    let mut selections = Vec::with_capacity(k);
    for fold in 0..k {
        let train = folds.complement(fold);
        let points = decodes
            .iter()
            .map(|d| d.point_on(&train))
            .collect::<Result<Vec<_>>>()?;
        let best = select_best(&points)?;
        let chosen = decodes
            .iter()
            .find(|d| d.weights == best.weights)
            .expect("selected point comes from the grid");
        for i in folds.members(fold) {
            hypotheses[i] = chosen.hypotheses[i].clone();
            stitched_b.add(&chosen.bleu[i]);
            stitched_g.add(&chosen.gender[i]);
        }
        selections.push(best.weights);
    }
    let stitched = GridPoint::from_stats(FusionWeights::OFF, &stitched_b, &stitched_g)?;
    let mut sweep = decodes.iter().map(PointDecodes::point).collect::<Result<Vec<_>>>()?;
    sort_points(&mut sweep);
    let stitched = GridPoint {
        weights: mean_betas(&selections)?,
        ..stitched
    };
    Ok(CvOutcome {
        folds,
        selections,
        hypotheses,
        stitched,
        sweep,
    })
}

/// Sweep plus K-fold cross-validated selection over `set`.
pub fn cross_validated_tune(
    dec: &Decoder<'_>,
    set: &EvalSet,
    k: usize,
    step: f64,
    axes: GridAxes,
) -> Result<CvOutcome> {
    FoldAssignment::round_robin(set.len(), k)?;
    let decodes = decode_grid(dec, set, &grid_weights(step, axes)?)?;
    cross_validate(&decodes, set, k)
}

/// Component-wise arithmetic mean.
pub fn mean_betas(selections: &[FusionWeights]) -> Result<FusionWeights> {
    if selections.is_empty() {
        return Err(Error::EmptyVector);
    }
    let n = selections.len() as f64;
    // offset by the first entry so identical selections average to themselves exactly
    let first = selections[0];
    let bi = first.beta_ilm + selections.iter().map(|w| w.beta_ilm - first.beta_ilm).sum::<f64>() / n;
    let be = first.beta_elm + selections.iter().map(|w| w.beta_elm - first.beta_elm).sum::<f64>() / n;
    FusionWeights::new(bi.clamp(0.0, 1.0), be.clamp(0.0, 1.0))
}

pub const HEATMAP_HEADER: &str = "beta_ilm,beta_elm,bleu,accuracy,hmean";

/// Heatmap rows sorted by `(beta_ilm, beta_elm)`, four decimals.
pub fn heatmap_csv(points: &[GridPoint]) -> String {
    let mut sorted = points.to_vec();
    sort_points(&mut sorted);
    let mut out = format!("{HEATMAP_HEADER}\n");
    for p in &sorted {
        let _ = writeln!(
            out,
            "{:.4},{:.4},{:.4},{:.4},{:.4}",
            p.weights.beta_ilm, p.weights.beta_elm, p.bleu, p.accuracy, p.hmean
        );
    }
    out
}

/// JSON-lines tuning report: one record per fold, then the summary.
pub fn cv_report_jsonl(label: &str, cv: &CvOutcome) -> Result<String> {
    let mut out = String::new();
    for (fold, w) in cv.selections.iter().enumerate() {
        let rec = serde_json::json!({
            "record": "fold",
            "label": label,
            "fold": fold,
            "beta_ilm": w.beta_ilm,
            "beta_elm": w.beta_elm,
        });
        let _ = writeln!(out, "{rec}");
    }
    let mean = mean_betas(&cv.selections)?;
    let rec = serde_json::json!({
        "record": "summary",
        "label": label,
        "folds": cv.folds.k,
        "mean_beta_ilm": mean.beta_ilm,
        "mean_beta_elm": mean.beta_elm,
        "stitched_bleu": cv.stitched.bleu,
        "stitched_accuracy": cv.stitched.accuracy,
        "stitched_hmean": cv.stitched.hmean,
    });
    let _ = writeln!(out, "{rec}");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gp(bi: f64, be: f64, hmean: f64) -> GridPoint {
        GridPoint {
            weights: FusionWeights::new(bi, be).unwrap(),
            bleu: hmean,
            accuracy: hmean / 100.0,
            hmean,
        }
    }

    #[test]
    fn grid_cardinality() {
        assert_eq!(grid_weights(0.5, GridAxes::Full).unwrap().len(), 9);
        assert_eq!(grid_weights(0.05, GridAxes::Full).unwrap().len(), 441);
        assert_eq!(grid_weights(0.05, GridAxes::ElmOnly).unwrap().len(), 21);
        assert!(grid_values(0.3).is_err());
        assert!(grid_values(0.0).is_err());
        let v = grid_values(0.05).unwrap();
        assert_eq!(v[1], 0.05);
        assert_eq!(*v.last().unwrap(), 1.0);
    }

    #[test]
    fn select_best_cases() {
        assert!(select_best(&[]).is_err());
        let p = gp(0.1, 0.2, 5.0);
        assert_eq!(select_best(&[p]).unwrap(), p);
        let best = select_best(&[gp(0.0, 0.6, 50.0), gp(0.9, 0.3, 50.0), gp(0.2, 0.3, 50.0)]).unwrap();
        assert_eq!(best.weights, FusionWeights::new(0.2, 0.3).unwrap());
        let best = select_best(&[gp(0.0, 0.0, 10.0), gp(0.5, 0.5, 60.0), gp(1.0, 1.0, 20.0)]).unwrap();
        assert_eq!(best.hmean, 60.0);
    }

    #[test]
    fn mean_betas_cases() {
        assert!(mean_betas(&[]).is_err());
        let a = FusionWeights::new(0.2, 0.3).unwrap();
        assert_eq!(mean_betas(&[a, a, a]).unwrap(), a);
        let m = mean_betas(&[a, FusionWeights::new(0.3, 0.5).unwrap()]).unwrap();
        assert!((m.beta_ilm - 0.25).abs() < 1e-12 && (m.beta_elm - 0.40).abs() < 1e-12);
    }

    #[test]
    fn folds_round_robin() {
        let f = FoldAssignment::round_robin(7, 3).unwrap();
        assert_eq!(f.members(0), [0, 3, 6]);
        assert_eq!(f.complement(2), [0, 1, 3, 4, 6]);
        assert!(FoldAssignment::round_robin(2, 3).is_err());
        assert!(FoldAssignment::round_robin(5, 1).is_err());
    }

    #[test]
    fn heatmap_sorted_with_header() {
        let csv = heatmap_csv(&[gp(0.5, 0.0, 1.0), gp(0.0, 0.5, 2.0), gp(0.0, 0.0, 3.0)]);
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], HEATMAP_HEADER);
        assert_eq!(rows[1], "0.0000,0.0000,3.0000,0.0300,3.0000");
        assert!(rows[2].starts_with("0.0000,0.5000"));
        assert!(rows[3].starts_with("0.5000,0.0000"));
    }

    proptest! {
        #[test]
        fn fold_sizes_balanced(n in 2usize..200, k in 2usize..20) {
            prop_assume!(k <= n);
            let f = FoldAssignment::round_robin(n, k).unwrap();
            let sizes: Vec<usize> = (0..k).map(|j| f.members(j).len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        }

        #[test]
        fn selection_ignores_order(hs in proptest::collection::vec(0u8..5, 1..20), seed in 0u64..100) {
            let grid = grid_weights(0.25, GridAxes::Full).unwrap();
            let mut pts: Vec<GridPoint> = hs.iter().zip(&grid).map(|(&h, w)| GridPoint {
                weights: *w, bleu: h as f64, accuracy: 0.0, hmean: h as f64,
            }).collect();
            let a = select_best(&pts).unwrap();
            let r = (seed as usize) % pts.len();
            pts.rotate_left(r);
            prop_assert_eq!(select_best(&pts).unwrap(), a);
            prop_assert!(grid.contains(&a.weights));
        }
    }
}
