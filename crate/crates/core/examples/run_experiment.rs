//! End-to-end experiment. Runs a reduced task by default; pass `full` for the
//! default configuration (about a minute and a half on one core).

use fusedec::experiment::{run_experiment, ExperimentConfig};
use fusedec::synth::SynthTaskConfig;

fn main() -> fusedec::Result<()> {
    let full = std::env::args().any(|a| a == "full");
    let cfg = if full {
        ExperimentConfig::default()
    } else {
        ExperimentConfig {
            task: SynthTaskConfig { n_train: 3000, n_eval: 80, n_mono: 1500, ..SynthTaskConfig::default() },
            grid_step: 0.1,
            folds: 5,
            ..ExperimentConfig::default()
        }
    };
    let t = std::time::Instant::now();
    let report = run_experiment(&cfg, if full { "example full" } else { "example quick" })?;
    print!("{}", report.to_table());
    eprintln!("took {:.1}s", t.elapsed().as_secs_f64());
    Ok(())
}
