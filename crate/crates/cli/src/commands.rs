//! The six subcommand implementations. Each takes the resolved pipeline
//! configuration, reads and writes the formats in [`crate::formats`], and
//! reports failures as [`CliError`] so `main` can map them to exit codes.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use matclass_core::classifier::{fit, predict, ModelDocument};
use matclass_core::digest::json_digest;
use matclass_core::domain::{Dataset, MaterialClass};
use matclass_core::evaluation::{confusion_matrix, report, EvalReport};
use matclass_core::features::extract_dataset;
use matclass_core::simulator::generate_dataset;

use crate::config::PipelineConfig;
use crate::formats;
use crate::CliError;

/// The demo exits with the gate code when held-out accuracy is below this.
pub const DEMO_ACCURACY_GATE: f64 = 0.95;

macro_rules! say {
    ($quiet:expr, $($arg:tt)*) => {
        if !$quiet {
            println!($($arg)*);
        }
    };
}

pub fn generate(
    config: &PipelineConfig,
    out: Option<&Path>,
    quiet: bool,
) -> Result<(), CliError> {
    for class in MaterialClass::ALL {
        if config.counts.for_class(class) == 0 {
            eprintln!("warning: zero {class} windows requested; the class will be absent");
        }
    }
    let set = generate_dataset(&config.simulator, &config.counts)?;
    let path = out.unwrap_or(&config.paths.windows);
    formats::write_windows(&set, path)?;
    for class in MaterialClass::ALL {
        say!(quiet, "{:>8} {}", config.counts.for_class(class), class);
    }
    say!(quiet, "wrote {} windows to {}", set.len(), path.display());
    Ok(())
}

pub fn extract(
    config: &PipelineConfig,
    windows: Option<&Path>,
    out: Option<&Path>,
    quiet: bool,
) -> Result<(), CliError> {
    let input = windows.unwrap_or(&config.paths.windows);
    let set = formats::read_windows(input)?;
    let dataset = extract_dataset(&set, &config.features)?;
    let path = out.unwrap_or(&config.paths.features);
    formats::write_features(&dataset, path)?;
    say!(quiet, "extracted {} feature rows to {}", dataset.len(), path.display());
    Ok(())
}

pub fn train(
    config: &PipelineConfig,
    features: Option<&Path>,
    out: Option<&Path>,
    quiet: bool,
) -> Result<(), CliError> {
    let input = features.unwrap_or(&config.paths.features);
    let dataset = formats::read_features(input)?;
    let train_config = config.train_config();
    let outcome = fit(&dataset, &train_config)?;

    let doc = ModelDocument::from_model(
        &outcome.model,
        json_digest(&train_config),
        Some(outcome.test_indices.clone()),
    );
    let path = out.unwrap_or(&config.paths.model);
    formats::write_model(&doc, path)?;

    let train_acc = accuracy_on(&outcome.model, &dataset, &outcome.train_indices)?;
    let test_acc = accuracy_on(&outcome.model, &dataset, &outcome.test_indices)?;
    say!(
        quiet,
        "trained on {} rows, held out {}",
        outcome.train_indices.len(),
        outcome.test_indices.len()
    );
    say!(
        quiet,
        "loss {:.4} -> {:.4} over {} epochs",
        outcome.epoch_losses.first().copied().unwrap_or(f64::NAN),
        outcome.epoch_losses.last().copied().unwrap_or(f64::NAN),
        outcome.epoch_losses.len()
    );
    say!(quiet, "train accuracy {train_acc:.4}, test accuracy {test_acc:.4}");
    say!(quiet, "wrote model to {}", path.display());
    Ok(())
}

pub fn eval(
    config: &PipelineConfig,
    model: Option<&Path>,
    features: Option<&Path>,
    out: Option<&Path>,
    all_rows: bool,
    quiet: bool,
) -> Result<(), CliError> {
    let model_path = model.unwrap_or(&config.paths.model);
    let doc = formats::read_model(model_path)?;
    let model = doc.to_model()?;
    check_class_order(&model)?;

    let features_path = features.unwrap_or(&config.paths.features);
    let dataset = formats::read_features(features_path)?;

    let (indices, which): (Vec<usize>, &str) = if all_rows {
        ((0..dataset.len()).collect(), "all rows")
    } else {
        match &doc.test_indices {
            Some(test) => (test.clone(), "the model's held-out rows"),
            None => ((0..dataset.len()).collect(), "all rows (model records no split)"),
        }
    };
    for &i in &indices {
        if i >= dataset.len() {
            return Err(CliError::data(format!(
                "model holds out row {i}, but {} has only {} rows; evaluate the \
                 features file the model was trained on, or pass --all-rows",
                features_path.display(),
                dataset.len()
            )));
        }
    }

    let rep = evaluate_rows(&model, &dataset, &indices)?;
    let path = out.unwrap_or(&config.paths.report);
    formats::write_report(&rep, path)?;
    say!(quiet, "evaluated {} of {} rows ({which})", indices.len(), dataset.len());
    say!(quiet, "{rep}");
    say!(quiet, "wrote report to {}", path.display());
    Ok(())
}

pub fn predict_windows(
    config: &PipelineConfig,
    model: Option<&Path>,
    windows: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let model_path = model.unwrap_or(&config.paths.model);
    let doc = formats::read_model(model_path)?;
    let model = doc.to_model()?;
    check_class_order(&model)?;

    let input = windows.unwrap_or(&config.paths.windows);
    let set = formats::read_windows(input)?;

    let mut lines = String::new();
    for item in &set.items {
        let fv = matclass_core::features::extract_features(&item.window, &config.features)?;
        let (class, probs) = predict(&model, &fv)?;
        lines.push_str(class.name());
        for p in probs {
            lines.push_str(&format!(" {p:.6}"));
        }
        lines.push('\n');
    }
    match out {
        Some(path) => std::fs::write(path, lines)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?,
        None => std::io::stdout()
            .write_all(lines.as_bytes())
            .map_err(|e| CliError::data(format!("cannot write stdout: {e}")))?,
    }
    Ok(())
}

pub fn demo(config: &PipelineConfig, out: Option<&Path>, quiet: bool) -> Result<(), CliError> {
    let started = Instant::now();
    let (_keep_alive, dir): (Option<tempfile::TempDir>, PathBuf) = match out {
        Some(d) => {
            std::fs::create_dir_all(d)
                .map_err(|e| CliError::data(format!("cannot create {}: {e}", d.display())))?;
            (None, d.to_path_buf())
        }
        None => {
            let tmp = tempfile::tempdir()
                .map_err(|e| CliError::data(format!("cannot create temp dir: {e}")))?;
            let path = tmp.path().to_path_buf();
            (Some(tmp), path)
        }
    };
    say!(quiet, "demo artifacts in {}", dir.display());

    let stage = |name: &str, e: CliError| CliError::data(format!("demo stage {name}: {e}"));

    let set = generate_dataset(&config.simulator, &config.counts)
        .map_err(|e| stage("generate", e.into()))?;
    formats::write_windows(&set, &dir.join("windows.jsonl"))
        .map_err(|e| stage("generate", e))?;
    say!(quiet, "generated {} windows", set.len());

    let dataset = extract_dataset(&set, &config.features)
        .map_err(|e| stage("extract", e.into()))?;
    formats::write_features(&dataset, &dir.join("features.csv"))
        .map_err(|e| stage("extract", e))?;
    say!(quiet, "extracted {} feature rows", dataset.len());

    let train_config = config.train_config();
    let outcome = fit(&dataset, &train_config).map_err(|e| stage("train", e.into()))?;
    let doc = ModelDocument::from_model(
        &outcome.model,
        json_digest(&train_config),
        Some(outcome.test_indices.clone()),
    );
    formats::write_model(&doc, &dir.join("model.json")).map_err(|e| stage("train", e))?;
    say!(
        quiet,
        "trained on {} rows, loss {:.4} -> {:.4}",
        outcome.train_indices.len(),
        outcome.epoch_losses.first().copied().unwrap_or(f64::NAN),
        outcome.epoch_losses.last().copied().unwrap_or(f64::NAN)
    );

    let rep = evaluate_rows(&outcome.model, &dataset, &outcome.test_indices)
        .map_err(|e| stage("eval", e))?;
    formats::write_report(&rep, &dir.join("report.json")).map_err(|e| stage("eval", e))?;
    say!(quiet, "{rep}");
    say!(
        quiet,
        "held-out accuracy {:.4} on {} windows in {:.2} s",
        rep.accuracy,
        outcome.test_indices.len(),
        started.elapsed().as_secs_f64()
    );

    if rep.accuracy < DEMO_ACCURACY_GATE {
        return Err(CliError::Gate { accuracy: rep.accuracy, threshold: DEMO_ACCURACY_GATE });
    }
    Ok(())
}

/// Models produced by other tools must agree with this build's class table
/// before their probabilities can be interpreted.
fn check_class_order(model: &matclass_core::classifier::MlpModel) -> Result<(), CliError> {
    if model.class_order() != MaterialClass::ALL {
        return Err(CliError::data(format!(
            "class-order mismatch: model orders classes {:?}, this build expects {:?}",
            model.class_order().iter().map(|c| c.name()).collect::<Vec<_>>(),
            MaterialClass::ALL.iter().map(|c| c.name()).collect::<Vec<_>>()
        )));
    }
    Ok(())
}

fn accuracy_on(
    model: &matclass_core::classifier::MlpModel,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<f64, CliError> {
    if indices.is_empty() {
        return Ok(f64::NAN);
    }
    let mut correct = 0usize;
    for &i in indices {
        let (fv, label) = &dataset.records[i];
        let (class, _) = predict(model, fv)?;
        if class == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / indices.len() as f64)
}

fn evaluate_rows(
    model: &matclass_core::classifier::MlpModel,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<EvalReport, CliError> {
    let mut actuals = Vec::with_capacity(indices.len());
    let mut preds = Vec::with_capacity(indices.len());
    for &i in indices {
        let (fv, label) = &dataset.records[i];
        actuals.push(*label);
        preds.push(predict(model, fv)?.0);
    }
    let cm = confusion_matrix(&actuals, &preds)?;
    Ok(report(&cm)?)
}
