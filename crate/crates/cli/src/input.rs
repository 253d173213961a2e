//! Datasets and solution files.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use cic_core::preprocess::{self, CsvOptions, PreprocessSpec, CRABS_CSV};
use cic_core::{CrispAssignment, Dataset};

use crate::args::{Builtin, InputArgs};
use crate::error::{CliError, CliResult};

/// Digest of the bundled crab measurements.
pub const CRABS_SHA256: &str = "c112a5e147591d8e04f32dbf3f3e2be2eb74860119c6f6b5e33191ef84ee16aa";

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Tab for `.tsv` and `.tab` files, comma otherwise.
pub fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv" | "tab") => b'\t',
        _ => b',',
    }
}

/// Where an input came from, for the run manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub source: String,
    pub sha256: String,
}

#[derive(Debug, Clone)]
pub struct Input {
    pub data: Dataset,
    pub columns: Vec<String>,
    pub labels: Option<CrispAssignment>,
    pub label_levels: Vec<String>,
    pub provenance: Provenance,
}

pub fn load(args: &InputArgs) -> CliResult<Input> {
    match (&args.source.input, args.source.builtin) {
        (Some(path), None) => {
            let bytes = std::fs::read(path)?;
            let options = CsvOptions {
                delimiter: delimiter_for(path),
                header: true,
                label_columns: args.label_col.clone(),
                ignore_columns: args.ignore_col.clone(),
                id_column: args.id_col.clone(),
            };
            let loaded = preprocess::read_csv(bytes.as_slice(), &options)?;
            Ok(Input {
                data: loaded.data,
                columns: loaded.columns,
                labels: loaded.labels,
                label_levels: loaded.label_levels,
                provenance: Provenance {
                    source: path.display().to_string(),
                    sha256: sha256_hex(&bytes),
                },
            })
        }
        (None, Some(Builtin::Crabs)) => {
            let loaded = preprocess::crabs()?;
            let cw = loaded.columns.iter().position(|c| c == "CW").expect("CW column");
            let (data, params) = preprocess::preprocess(&loaded.data, &PreprocessSpec::ratio_sphere(cw))?;
            Ok(Input {
                data,
                columns: preprocess::output_columns(&loaded.columns, &params),
                labels: loaded.labels,
                label_levels: loaded.label_levels,
                provenance: Provenance {
                    source: "builtin:crabs".into(),
                    sha256: sha256_hex(CRABS_CSV.as_bytes()),
                },
            })
        }
        _ => Err(CliError::Config("give exactly one of --input and --builtin".into())),
    }
}

/// A labelling read from one or more columns of a delimited file; several
/// columns are joined with `/`.
#[derive(Debug, Clone)]
pub struct LabelFile {
    pub assignment: CrispAssignment,
    pub levels: Vec<String>,
    pub provenance: Provenance,
}

pub fn read_labels(path: &Path, columns: &[String]) -> CliResult<LabelFile> {
    let bytes = std::fs::read(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter_for(path))
        .from_reader(bytes.as_slice());
    let header = reader.headers().map_err(|e| csv_error(&e, 1))?.clone();
    let positions = columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| CliError::Config(format!("{}: no column `{c}`", path.display())))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut codes = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(&e, i + 2))?;
        let parts: Vec<&str> = positions.iter().map(|&p| record.get(p).unwrap_or("")).collect();
        codes.push(parts.join("/"));
    }
    if codes.is_empty() {
        return Err(cic_core::Error::InvalidData(format!("{}: no cases", path.display())).into());
    }
    let assignment = CrispAssignment::from_codes(&codes);
    let mut levels = vec![String::new(); assignment.k()];
    for (code, &l) in codes.iter().zip(assignment.labels()) {
        levels[l].clone_from(code);
    }
    Ok(LabelFile {
        assignment,
        levels,
        provenance: Provenance {
            source: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        },
    })
}

fn csv_error(e: &csv::Error, line: usize) -> CliError {
    let line = e.position().map_or(line, |p| p.line() as usize);
    cic_core::Error::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
    .into()
}
