//! On-disk formats owned by the CLI: newline-delimited JSON for windows,
//! CSV for features, JSON documents for models and reports. All numeric
//! text round-trips f64 values exactly, so identical data means identical
//! bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use matclass_core::classifier::ModelDocument;
use matclass_core::domain::{
    ClassificationWindow, Dataset, FeatureVector, Frame, MaterialClass, Provenance, RangeAxis,
    NUM_FEATURES,
};
use matclass_core::evaluation::EvalReport;
use matclass_core::simulator::{LabeledWindow, WindowSet};

use crate::CliError;

pub const WINDOWS_FORMAT_VERSION: u32 = 1;
pub const FEATURES_FORMAT_VERSION: u32 = 1;
pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct WindowsHeader {
    format_version: u32,
    kind: String,
    seed: u64,
    config_digest: String,
    count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct WindowRecord {
    label: String,
    container: u32,
    axis: RangeAxis,
    frames: Vec<Vec<f64>>,
}

/// Writes a window corpus: one JSON header line, then one JSON record per
/// window (label, container ordinal, axis, frame amplitude rows).
pub fn write_windows(set: &WindowSet, path: &Path) -> Result<(), CliError> {
    let file = create(path)?;
    let mut w = BufWriter::new(file);
    let header = WindowsHeader {
        format_version: WINDOWS_FORMAT_VERSION,
        kind: "windows".into(),
        seed: set.seed,
        config_digest: set.config_digest.clone(),
        count: set.items.len(),
    };
    write_json_line(&mut w, path, &header)?;
    for item in &set.items {
        let record = WindowRecord {
            label: item.label.name().into(),
            container: item.container,
            axis: item.window.axis().clone(),
            frames: item
                .window
                .frames()
                .iter()
                .map(|f| f.amplitudes().to_vec())
                .collect(),
        };
        write_json_line(&mut w, path, &record)?;
    }
    w.flush().map_err(|e| write_error(path, e))?;
    Ok(())
}

/// Reads a windows file, failing fast on version or kind mismatches and
/// naming the offending line on malformed records.
pub fn read_windows(path: &Path) -> Result<WindowSet, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let header_line = match lines.next() {
        Some((_, Ok(line))) => line,
        Some((_, Err(e))) => return Err(read_error(path, e)),
        None => return Err(CliError::data(format!("{}: empty windows file", path.display()))),
    };
    let header: WindowsHeader = serde_json::from_str(&header_line)
        .map_err(|e| CliError::data(format!("{} line 1: bad header: {e}", path.display())))?;
    if header.kind != "windows" {
        return Err(CliError::data(format!(
            "{}: kind {:?} is not a windows file",
            path.display(),
            header.kind
        )));
    }
    if header.format_version != WINDOWS_FORMAT_VERSION {
        return Err(CliError::data(format!(
            "{}: windows format_version {} unsupported, this build reads {}",
            path.display(),
            header.format_version,
            WINDOWS_FORMAT_VERSION
        )));
    }

    let mut items = Vec::with_capacity(header.count);
    for (idx, line) in lines {
        let line = line.map_err(|e| read_error(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let at = |msg: String| CliError::data(format!("{} line {line_no}: {msg}", path.display()));

        let record: WindowRecord =
            serde_json::from_str(&line).map_err(|e| at(format!("bad record: {e}")))?;
        record.axis.validate().map_err(|e| at(e.to_string()))?;
        let label = MaterialClass::from_name(&record.label).map_err(|e| at(e.to_string()))?;
        let mut frames = Vec::with_capacity(record.frames.len());
        for row in record.frames {
            frames.push(Frame::new(row, &record.axis).map_err(|e| at(e.to_string()))?);
        }
        let window = ClassificationWindow::new(frames, record.axis)
            .map_err(|e| at(e.to_string()))?;
        items.push(LabeledWindow { window, label, container: record.container });
    }
    if items.len() != header.count {
        return Err(CliError::data(format!(
            "{}: header promises {} windows, file has {}",
            path.display(),
            header.count,
            items.len()
        )));
    }
    Ok(WindowSet { items, seed: header.seed, config_digest: header.config_digest })
}

/// Writes features as CSV: a provenance comment line, a header row, then
/// one row per window with full-precision values and the label.
pub fn write_features(dataset: &Dataset, path: &Path) -> Result<(), CliError> {
    let file = create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "# matclass-features v{FEATURES_FORMAT_VERSION} seed={} config={}",
        dataset.provenance.seed, dataset.provenance.config_digest
    )
    .map_err(|e| write_error(path, e))?;

    let mut csv = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = FeatureVector::COLUMN_NAMES.to_vec();
    header.push("label");
    csv.write_record(&header).map_err(|e| CliError::data(e.to_string()))?;
    for (fv, label) in &dataset.records {
        let mut row: Vec<String> = fv.as_array().iter().map(|v| format!("{v}")).collect();
        row.push(label.name().into());
        csv.write_record(&row).map_err(|e| CliError::data(e.to_string()))?;
    }
    csv.flush().map_err(|e| write_error(path, e))?;
    Ok(())
}

/// Reads a features CSV produced by [`write_features`].
pub fn read_features(path: &Path) -> Result<Dataset, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let marker = format!("# matclass-features v{FEATURES_FORMAT_VERSION} ");
    let first = lines.next().unwrap_or_default();
    if !first.starts_with(&marker) {
        return Err(CliError::data(format!(
            "{}: missing '{}' marker line; not a features file this build reads",
            path.display(),
            marker.trim_end()
        )));
    }
    let mut provenance = Provenance::external();
    for token in first.trim_start_matches('#').split_whitespace() {
        if let Some(seed) = token.strip_prefix("seed=") {
            provenance.seed = seed
                .parse()
                .map_err(|_| CliError::data(format!("{}: bad seed in marker line", path.display())))?;
        } else if let Some(digest) = token.strip_prefix("config=") {
            provenance.config_digest = digest.to_string();
        }
    }

    let body: String = lines.collect::<Vec<_>>().join("\n");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(body.as_bytes());

    let expected: Vec<&str> = FeatureVector::COLUMN_NAMES
        .iter()
        .copied()
        .chain(std::iter::once("label"))
        .collect();
    let header = reader
        .headers()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(CliError::data(format!(
            "{}: header row {:?} does not match {:?}",
            path.display(),
            header,
            expected
        )));
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 3;
        let at = |msg: String| CliError::data(format!("{} line {row_no}: {msg}", path.display()));
        let row = row.map_err(|e| at(e.to_string()))?;
        if row.len() != NUM_FEATURES + 1 {
            return Err(at(format!("expected {} fields, got {}", NUM_FEATURES + 1, row.len())));
        }
        let mut values = [0.0; NUM_FEATURES];
        for (j, v) in values.iter_mut().enumerate() {
            *v = row[j]
                .parse::<f64>()
                .map_err(|_| at(format!("field {:?} is not a number", &row[j])))?;
            if !v.is_finite() || *v < 0.0 {
                return Err(at(format!("feature value {v} must be finite and >= 0")));
            }
        }
        let label = MaterialClass::from_name(&row[NUM_FEATURES])
            .map_err(|e| at(e.to_string()))?;
        records.push((FeatureVector::from_array(values), label));
    }
    Ok(Dataset::new(records, provenance))
}

pub fn write_model(doc: &ModelDocument, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, doc.to_json_pretty()).map_err(|e| write_error(path, e))
}

pub fn read_model(path: &Path) -> Result<ModelDocument, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    ModelDocument::from_json(&text)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Evaluation results as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub format_version: u32,
    #[serde(flatten)]
    pub report: EvalReport,
}

pub fn write_report(report: &EvalReport, path: &Path) -> Result<(), CliError> {
    let doc = ReportDocument { format_version: REPORT_FORMAT_VERSION, report: report.clone() };
    let json = serde_json::to_string_pretty(&doc).expect("report serializes");
    std::fs::write(path, json).map_err(|e| write_error(path, e))
}

pub fn read_report(path: &Path) -> Result<ReportDocument, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    let doc: ReportDocument = serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("{}: bad report: {e}", path.display())))?;
    if doc.format_version != REPORT_FORMAT_VERSION {
        return Err(CliError::data(format!(
            "{}: report format_version {} unsupported, this build reads {}",
            path.display(),
            doc.format_version,
            REPORT_FORMAT_VERSION
        )));
    }
    Ok(doc)
}

fn create(path: &Path) -> Result<File, CliError> {
    File::create(path).map_err(|e| write_error(path, e))
}

fn write_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::data(format!("cannot write {}: {e}", path.display()))
}

fn read_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::data(format!("cannot read {}: {e}", path.display()))
}

fn write_json_line<T: Serialize>(
    w: &mut impl Write,
    path: &Path,
    value: &T,
) -> Result<(), CliError> {
    serde_json::to_writer(&mut *w, value)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    writeln!(w).map_err(|e| write_error(path, e))
}
