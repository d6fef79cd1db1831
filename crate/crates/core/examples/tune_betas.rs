//! Grid sweep over (beta_ilm, beta_elm) and 10-fold cross-validated selection
//! on a small synthetic task.

use fusedec::experiment::{build_artifacts, ExperimentConfig};
use fusedec::synth::SynthTaskConfig;
use fusedec::tune::{cross_validated_tune, heatmap_csv, select_best, Decoder, GridAxes};
use fusedec::types::Gender;

fn main() -> fusedec::Result<()> {
    let cfg = ExperimentConfig {
        task: SynthTaskConfig { n_train: 3000, n_eval: 60, n_mono: 1500, ..SynthTaskConfig::default() },
        ..ExperimentConfig::default()
    };
    let art = build_artifacts(&cfg)?;
    let female = art.aligned.select(&art.aligned.indices_of(Gender::F));
    let dec = Decoder { model: &art.base, ilm: &art.ilm, elm: &art.elms[&Gender::F], opts: cfg.decode };

    let cv = cross_validated_tune(&dec, &female, 10, 0.1, GridAxes::Full)?;
    let best = select_best(&cv.sweep)?;
    println!("{} grid points; best on the full set {} hmean {:.2}", cv.sweep.len(), best.weights, best.hmean);
    for (fold, w) in cv.selections.iter().enumerate() {
        println!("fold {fold}: {w}");
    }
    println!(
        "stitched: BLEU {:.2}  accuracy {:.3}  mean betas {}",
        cv.stitched.bleu, cv.stitched.accuracy, cv.stitched.weights
    );
    let csv = heatmap_csv(&cv.sweep);
    for line in csv.lines().take(4) {
        println!("{line}");
    }
    Ok(())
}
