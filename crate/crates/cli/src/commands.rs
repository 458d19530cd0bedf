use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use tsad_core::data::{
    generate_sine_dataset, labels_path, load_series, read_single_column, save_series, NormStats, SineDataset,
    TimeSeries, TypicalKind,
};
use tsad_core::evaluation::{
    best_f1_search, coverage_matrix, sliding_scores, AnomalyScores, CoverageCell, CoverageSetup, MetricReport,
};
use tsad_core::training::{TrainLog, Trainer};
use tsad_core::{Checkpoint, Error, Result};

use crate::config::RunConfig;
use crate::plot::score_svg;

pub const MODEL_FILE: &str = "model.bin";
pub const NORM_FILE: &str = "normalization.csv";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const PLOT_FILE: &str = "scores.svg";
pub const METRICS_FILE: &str = "metrics.csv";
pub const COVERAGE_FILE: &str = "coverage.csv";
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const ECHO_FILE: &str = "config.echo";

/// Exit status for an error: 2 configuration, 3 data, 4 numeric failure.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        e if e.is_numeric() => 4,
        _ => 3,
    }
}

/// Creates `out`, refusing to reuse a non-empty directory unless `force`.
pub fn prepare_out_dir(out: &Path, force: bool) -> Result<()> {
    if out.is_file() {
        return Err(Error::Config(format!("output path {} is a file", out.display())));
    }
    let occupied = out.is_dir() && fs::read_dir(out)?.next().is_some();
    if occupied && !force {
        return Err(Error::Config(format!(
            "output directory {} is not empty; pass --force to overwrite",
            out.display()
        )));
    }
    fs::create_dir_all(out)?;
    Ok(())
}

fn write_echo(cfg: &RunConfig, out: &Path) -> Result<()> {
    fs::write(out.join(ECHO_FILE), cfg.text.as_bytes())?;
    Ok(())
}

fn required<'a>(what: &str, p: &'a Option<PathBuf>) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("{what} is not set")))
}

pub fn test_file_name(kind: TypicalKind) -> String {
    format!("test_{kind}.csv")
}

pub fn cmd_generate_sine(cfg: &RunConfig, out: &Path) -> Result<()> {
    let sine = cfg.sine_config();
    let data = generate_sine_dataset(&sine)?;
    write_echo(cfg, out)?;
    save_series(&data.train, &out.join("train.csv"))?;
    let mut manifest = String::from("file,kind,rows,anomalies\n");
    manifest.push_str(&format!("train.csv,normal,{},0\n", data.train.len()));
    for (kind, series) in &data.tests {
        let name = test_file_name(*kind);
        save_series(series, &out.join(&name))?;
        let anomalies = series.labels().map_or(0, |l| l.iter().filter(|&&v| v != 0).count());
        manifest.push_str(&format!("{name},{kind},{},{anomalies}\n", series.len()));
    }
    fs::write(out.join(MANIFEST_FILE), manifest)?;
    log::info!("wrote sine dataset to {}", out.display());
    Ok(())
}

/// Loads the sine dataset written by [`cmd_generate_sine`].
pub fn load_sine_dir(dir: &Path) -> Result<SineDataset> {
    let train = load_series(&dir.join("train.csv"))?;
    let tests = TypicalKind::ALL
        .iter()
        .map(|&k| Ok((k, load_series(&dir.join(test_file_name(k)))?)))
        .collect::<Result<_>>()?;
    Ok(SineDataset { train, tests })
}

pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<Checkpoint<f64>> {
    let raw = load_series(required("data.train", &cfg.train_data)?)?;
    let train = if cfg.normalize {
        let stats = NormStats::fit(&raw)?;
        fs::write(out.join(NORM_FILE), stats.to_csv())?;
        stats.apply(&raw)?
    } else {
        raw
    };
    let model = cfg.model(train.dim())?;
    let degradation = cfg.degradation_for(&model);
    let mut tc = cfg.train_config();
    tc.checkpoint_dir = Some(out.join("checkpoints"));
    if tc.checkpoint_every > 0 {
        fs::create_dir_all(out.join("checkpoints"))?;
    }
    write_echo(cfg, out)?;
    fs::write(
        out.join("run.txt"),
        format!(
            "normalization={}\nmodel={model:?}\ndegradation={degradation:?}\n",
            if cfg.normalize { "per-column standardization, training statistics" } else { "none" }
        ),
    )?;

    let trainer = match &cfg.resume {
        Some(path) => {
            let ck = Checkpoint::<f64>::load(path)?;
            if ck.params.config() != &model {
                return Err(Error::Checkpoint(format!(
                    "checkpoint {} has model {:?}, config asks for {model:?}",
                    path.display(),
                    ck.params.config()
                )));
            }
            log::info!("resuming from step {}", ck.step);
            Trainer::resume(ck, &train, &tc, &degradation)?
        }
        None => Trainer::new(&model, &train, &tc, &degradation)?,
    };
    let log_path = out.join(TRAIN_LOG_FILE);
    let mut log_file = fs::OpenOptions::new().create(true).append(true).open(&log_path)?;
    if log_file.metadata()?.len() == 0 {
        writeln!(log_file, "{}", TrainLog::CSV_HEADER)?;
    }
    let outcome = trainer.run(|e| {
        log::info!("step {} loss {:.5} lr {:.3e} grad_norm {:.4}", e.step, e.loss, e.lr, e.grad_norm);
        if let Err(err) = writeln!(log_file, "{}", TrainLog::csv_row(e)) {
            log::warn!("cannot append to {}: {err}", log_path.display());
        }
    })?;
    let ck = outcome.checkpoint();
    ck.save(&out.join(MODEL_FILE))?;
    Ok(ck)
}

/// Scores `test` with the checkpoint, applying the training normalization
/// stored next to it when present.
pub fn score_series(checkpoint: &Path, test: &TimeSeries, stride: usize) -> Result<AnomalyScores> {
    let ck = Checkpoint::<f64>::load(checkpoint)?;
    let model = ck.params.config();
    if test.dim() != model.data_dim {
        return Err(Error::Data(format!(
            "test data has {} columns but the model was trained on {}",
            test.dim(),
            model.data_dim
        )));
    }
    let norm = checkpoint.with_file_name(NORM_FILE);
    let test = if norm.exists() {
        NormStats::from_csv(&fs::read_to_string(&norm)?)?.apply(test)?
    } else {
        test.clone()
    };
    sliding_scores(&ck.params, &test, stride)
}

pub fn cmd_score(cfg: &RunConfig, out: &Path) -> Result<AnomalyScores> {
    let checkpoint = required("score checkpoint (--checkpoint or score.checkpoint)", &cfg.checkpoint)?;
    let test_path = required("test data (--test or data.test)", &cfg.test_data)?;
    let test = load_series(test_path)?;
    let scores = score_series(checkpoint, &test, cfg.stride)?;
    write_echo(cfg, out)?;
    fs::write(out.join(SCORES_FILE), scores.to_csv())?;
    let threshold = test
        .labels()
        .map(|l| best_f1_search(&scores.scores, l, false))
        .transpose()
        .unwrap_or(None)
        .map(|(t, _)| t);
    let title = format!("{} anomaly scores", test.name);
    fs::write(out.join(PLOT_FILE), score_svg(&title, &scores.scores, test.labels(), threshold))?;
    Ok(scores)
}

pub fn cmd_evaluate(cfg: &RunConfig, out: &Path) -> Result<MetricReport> {
    let scores: Vec<f64> = read_single_column(required("scores (--scores or evaluate.scores)", &cfg.scores)?)?;
    let labels_file = match (&cfg.labels, &cfg.test_data) {
        (Some(l), _) => l.clone(),
        (None, Some(t)) => labels_path(t),
        (None, None) => return Err(Error::Config("labels (--labels or evaluate.labels) is not set".into())),
    };
    let labels: Vec<u8> = read_single_column(&labels_file)?;
    if scores.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let report = MetricReport::compute(&scores, &labels)?;
    write_echo(cfg, out)?;
    fs::write(out.join(METRICS_FILE), report.to_csv())?;
    Ok(report)
}

pub fn cmd_coverage(cfg: &RunConfig, out: &Path) -> Result<Vec<CoverageCell>> {
    let data = match &cfg.coverage_data_dir {
        Some(dir) => load_sine_dir(dir)?,
        None => generate_sine_dataset(&cfg.sine_config())?,
    };
    let model = cfg.model(data.train.dim())?;
    let mut setup = CoverageSetup::new(model.clone(), cfg.train_config());
    setup.degradation = cfg.degradation_for(&model);
    setup.total_prob = cfg.coverage_total_prob;
    setup.stride = cfg.stride;
    write_echo(cfg, out)?;
    let cells = coverage_matrix::<f64>(&data, &cfg.coverage_kinds, &setup)?;
    let mut csv = String::from(CoverageCell::CSV_HEADER);
    csv.push('\n');
    for c in &cells {
        csv.push_str(&c.csv_row());
        csv.push('\n');
    }
    fs::write(out.join(COVERAGE_FILE), csv)?;
    Ok(cells)
}
