// Interrupts a toy3 tuning run, resumes it from the checkpoint on disk and
// checks the records against an uninterrupted run.
//
// ```bash
// cargo run --release --example checkpoint_resume
// ```

use gridtune::config::load_config;
use gridtune::orchestrator::{resume, run, Checkpoint, IterationRecord, RunSettings};

pub const CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/toy3_loadstep.json");

/// Records with the wall-clock column cleared.
pub fn timeless(records: &[IterationRecord]) -> Vec<IterationRecord> {
    records.iter().cloned().map(|r| IterationRecord { wall_ms: 0.0, ..r }).collect()
}

/// Returns true when the resumed run reproduces the reference exactly.
pub fn run_example(iterations: u64, interrupt_at: u64, seed: u64) -> anyhow::Result<bool> {
    let mut config = load_config(CONFIG)?;
    config.hyperparameters.max_iterations = iterations;
    let prepared = config.prepare()?;
    let settings = RunSettings::new(config.hyperparameters, seed);
    let reference = run(&prepared.oracle, &prepared.x0, &settings)?;

    let dir = tempfile::tempdir()?;
    let interrupted = RunSettings {
        checkpoint_dir: Some(dir.path().to_path_buf()),
        stop_after: Some(interrupt_at),
        ..settings.clone()
    };
    run(&prepared.oracle, &prepared.x0, &interrupted)?;
    let checkpoint = Checkpoint::load(dir.path().join(format!("k{interrupt_at:04}.json")))?;
    let resumed = resume(&prepared.oracle, &prepared.x0, checkpoint, &settings)?;

    Ok(timeless(&resumed.records) == timeless(&reference.records)
        && resumed.x == reference.x
        && resumed.final_objective == reference.final_objective)
}

fn main() -> anyhow::Result<()> {
    let same = run_example(20, 10, 5)?;
    println!("resumed run identical to the reference: {same}");
    Ok(())
}
