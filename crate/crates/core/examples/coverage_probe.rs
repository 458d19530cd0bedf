//! Trains one single-kind model on the sine benchmark and prints the five cells.
//!
//! Usage: coverage_probe <kind> <steps> <base_lr> <seed> [checkpoint_out]

use std::time::Instant;

use tsad_core::data::{generate_sine_dataset, NormStats, SineConfig};
use tsad_core::degradation::{DegradationConfig, OutlierKind};
use tsad_core::evaluation::{evaluate_slices, CoverageCell};
use tsad_core::training::{TrainConfig, Trainer};
use tsad_core::ModelConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let kind: OutlierKind = args.get(1).map_or("soft", String::as_str).parse()?;
    let steps: u64 = args.get(2).map_or(Ok(1000), |s| s.parse())?;
    let lr: f64 = args.get(3).map_or(Ok(1e-4), |s| s.parse())?;
    let seed: u64 = args.get(4).map_or(Ok(0), |s| s.parse())?;

    let data = generate_sine_dataset(&SineConfig::default())?;
    let stats = NormStats::fit(&data.train)?;
    let train = stats.apply(&data.train)?;
    let model = ModelConfig::simplified(1);
    let cfg = TrainConfig {
        max_steps: steps,
        base_lr: lr,
        seed,
        checkpoint_every: 0,
        log_every: 50,
        ..Default::default()
    };
    let degr = DegradationConfig::for_patch(model.patch_size).only(kind, 0.8);
    let t0 = Instant::now();
    let out = Trainer::<f64>::new(&model, &train, &cfg, &degr)?.run(|e| {
        eprintln!("step {} loss {:.4} lr {:.2e} gnorm {:.3} t {:.0}s", e.step, e.loss, e.lr, e.grad_norm, e.seconds)
    })?;
    eprintln!("trained in {:.0}s", t0.elapsed().as_secs_f64());
    if let Some(path) = args.get(5) {
        out.checkpoint().save(std::path::Path::new(path))?;
    }
    println!("{}", CoverageCell::CSV_HEADER);
    for c in evaluate_slices(kind, &out.params, &data, &stats, 16)? {
        println!("{}", c.csv_row());
    }
    Ok(())
}
