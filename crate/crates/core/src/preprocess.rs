//! Data ingestion and feature transforms.
//!
//! Line and column numbers in parse errors are 1-based positions in the file.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{CrispAssignment, Dataset};

/// Eigenvalues below this are treated as zero and their components dropped.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// The crab morphology data: species and sex codes, a running index and five
/// measurements (mm) for 200 specimens.
pub const CRABS_CSV: &str = include_str!("../data/crabs.csv");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub header: bool,
    /// Columns whose joined values form the true class of each case.
    pub label_columns: Vec<String>,
    /// Non-numeric or irrelevant columns to skip.
    pub ignore_columns: Vec<String>,
    /// Column holding case identifiers; line numbers otherwise.
    pub id_column: Option<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            header: true,
            label_columns: Vec::new(),
            ignore_columns: Vec::new(),
            id_column: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub data: Dataset,
    pub columns: Vec<String>,
    pub labels: Option<CrispAssignment>,
    /// Class names in label order.
    pub label_levels: Vec<String>,
}

pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Loaded> {
    read_csv(std::fs::File::open(path)?, options)
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

pub fn read_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<Loaded> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let first = match records.next() {
        None => return Err(parse_err(1, 1, "empty file")),
        Some(r) => r.map_err(|e| parse_err(1, 1, e.to_string()))?,
    };
    let width = first.len();
    let names: Vec<String> = if options.header {
        first.iter().map(|s| s.trim().to_string()).collect()
    } else {
        (1..=width).map(|j| j.to_string()).collect()
    };
    let find = |name: &str| {
        names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidConfig(format!("no column named `{name}`")))
    };
    let label_idx = options
        .label_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;
    let ignore_idx = options
        .ignore_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;
    let id_idx = options.id_column.as_deref().map(find).transpose()?;
    let feature_idx: Vec<usize> = (0..width)
        .filter(|j| !label_idx.contains(j) && !ignore_idx.contains(j) && id_idx != Some(*j))
        .collect();
    if feature_idx.is_empty() {
        return Err(Error::InvalidData("no feature columns left".into()));
    }

    let mut values = Vec::new();
    let mut ids = Vec::new();
    let mut codes = Vec::new();
    let body = (!options.header).then_some(Ok(first)).into_iter().chain(records);
    for (row, rec) in body.enumerate() {
        let line = row + 1 + usize::from(options.header);
        let rec = rec.map_err(|e| parse_err(line, 1, e.to_string()))?;
        if rec.len() != width {
            return Err(parse_err(
                line,
                rec.len().min(width) + 1,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        for &j in &feature_idx {
            let cell = rec[j].trim();
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, j + 1, format!("`{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { line, column: j + 1 });
            }
            values.push(v);
        }
        ids.push(match id_idx {
            Some(j) => rec[j].trim().to_string(),
            None => (row + 1).to_string(),
        });
        if !label_idx.is_empty() {
            codes.push(label_idx.iter().map(|&j| rec[j].trim()).collect::<Vec<_>>().join("/"));
        }
    }
    if ids.is_empty() {
        return Err(parse_err(1 + usize::from(options.header), 1, "no data rows"));
    }
    let n = ids.len();
    let data = Dataset::with_ids(values, n, feature_idx.len(), ids)?;
    let (labels, label_levels) = if codes.is_empty() {
        (None, Vec::new())
    } else {
        let assignment = CrispAssignment::from_codes(&codes);
        let mut levels = vec![String::new(); assignment.k()];
        for (c, &l) in codes.iter().zip(assignment.labels()) {
            levels[l].clone_from(c);
        }
        (Some(assignment), levels)
    };
    Ok(Loaded {
        data,
        columns: feature_idx.iter().map(|&j| names[j].clone()).collect(),
        labels,
        label_levels,
    })
}

/// Comma-separated matrix with a header row. Values are written in their
/// shortest exact decimal form, so reading them back is lossless.
pub fn write_csv<W: Write>(data: &Dataset, columns: &[String], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    out.write_record(columns).map_err(to_io)?;
    for row in data.rows() {
        out.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(to_io)?;
    }
    out.flush()?;
    Ok(())
}

/// Tab-separated matrix with a leading `case` column of row ids.
pub fn write_tsv<W: Write>(data: &Dataset, columns: &[String], mut w: W) -> std::io::Result<()> {
    write!(w, "case")?;
    for c in columns {
        write!(w, "\t{c}")?;
    }
    writeln!(w)?;
    for (id, row) in data.row_ids().iter().zip(data.rows()) {
        write!(w, "{id}")?;
        for v in row {
            write!(w, "\t{v:?}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn rebuild(data: &Dataset, values: Vec<f64>, n_cols: usize) -> Result<Dataset> {
    Dataset::with_ids(values, data.n_rows(), n_cols, data.row_ids().to_vec())
}

/// Divides every column except `denominator` by it; the denominator column is
/// kept as is.
pub fn ratio_transform(data: &Dataset, denominator: usize) -> Result<Dataset> {
    let m = data.n_cols();
    if denominator >= m {
        return Err(Error::InvalidConfig(format!("column {denominator} out of range")));
    }
    let mut values = Vec::with_capacity(data.values().len());
    for (i, row) in data.rows().enumerate() {
        let d = row[denominator];
        if d == 0.0 {
            return Err(Error::DivisionByZero(i));
        }
        values.extend(
            row.iter()
                .enumerate()
                .map(|(j, &v)| if j == denominator { v } else { v / d }),
        );
    }
    rebuild(data, values, m)
}

/// Column means and sample standard deviations.
pub fn column_moments(data: &Dataset) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = data.n_rows() as f64;
    let mut means = Vec::with_capacity(data.n_cols());
    let mut sds = Vec::with_capacity(data.n_cols());
    for j in 0..data.n_cols() {
        let col = data.column(j);
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if var.sqrt() <= f64::EPSILON * mean.abs().max(1.0) {
            return Err(Error::ConstantColumn(j));
        }
        means.push(mean);
        sds.push(var.sqrt());
    }
    Ok((means, sds))
}

/// Zero mean and unit variance per column.
pub fn standardize(data: &Dataset) -> Result<(Dataset, Vec<f64>, Vec<f64>)> {
    let (means, sds) = column_moments(data)?;
    let values = data
        .rows()
        .flat_map(|row| row.iter().zip(&means).zip(&sds).map(|((v, m), s)| (v - m) / s))
        .collect();
    Ok((rebuild(data, values, data.n_cols())?, means, sds))
}

/// Fitted principal-component projection of standardized data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereParams {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// Retained eigenvalues of the correlation matrix, largest first.
    pub eigenvalues: Vec<f64>,
    /// One unit eigenvector per retained component, in the same order.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Scale each component to unit variance.
    pub whiten: bool,
}

impl SphereParams {
    /// Projects new cases with the fitted parameters.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.n_cols() != self.means.len() {
            return Err(Error::LengthMismatch {
                left: data.n_cols(),
                right: self.means.len(),
            });
        }
        let mut values = Vec::with_capacity(data.n_rows() * self.eigenvalues.len());
        let mut z = vec![0.0; data.n_cols()];
        for row in data.rows() {
            for (j, zj) in z.iter_mut().enumerate() {
                *zj = (row[j] - self.means[j]) / self.sds[j];
            }
            for (vec, &lambda) in self.eigenvectors.iter().zip(&self.eigenvalues) {
                let score: f64 = vec.iter().zip(&z).map(|(a, b)| a * b).sum();
                values.push(if self.whiten { score / lambda.sqrt() } else { score });
            }
        }
        rebuild(data, values, self.eigenvalues.len())
    }

    pub fn component_names(&self) -> Vec<String> {
        (1..=self.eigenvalues.len()).map(|c| format!("PC{c}")).collect()
    }
}

/// Principal components of the correlation matrix. With `whiten` every
/// component is scaled to unit variance, so the output has identity sample
/// covariance. Each eigenvector is signed so that its largest-magnitude entry
/// is positive.
pub fn sphere(data: &Dataset, whiten: bool) -> Result<(Dataset, SphereParams)> {
    let (z, means, sds) = standardize(data)?;
    let (n, m) = (z.n_rows(), z.n_cols());
    let zm = DMatrix::from_row_slice(n, m, z.values());
    let corr = zm.transpose() * &zm / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(corr);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut eigenvalues = Vec::new();
    let mut eigenvectors = Vec::new();
    for &c in &order {
        let lambda = eig.eigenvalues[c];
        if lambda < EIGEN_FLOOR {
            log::warn!("dropping component with eigenvalue {lambda:e}");
            continue;
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (j, x)| if x.abs() > v[best].abs() { j } else { best });
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        eigenvalues.push(lambda);
        eigenvectors.push(v);
    }
    let params = SphereParams {
        means,
        sds,
        eigenvalues,
        eigenvectors,
        whiten,
    };
    Ok((params.apply(data)?, params))
}

/// Pipeline settings. Sphering subsumes standardization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSpec {
    pub ratio_column: Option<usize>,
    pub standardize: bool,
    pub sphere: bool,
    /// With `sphere`, rescale components to unit variance.
    pub whiten: bool,
    pub keep_components: Option<usize>,
}

impl PreprocessSpec {
    /// Ratios to a column, then whitened correlation PCA.
    pub fn ratio_sphere(column: usize) -> Self {
        Self {
            ratio_column: Some(column),
            standardize: false,
            sphere: true,
            whiten: true,
            keep_components: None,
        }
    }
}

/// Everything needed to replay a pipeline on new cases.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreprocessParams {
    pub spec: PreprocessSpec,
    pub means: Option<Vec<f64>>,
    pub sds: Option<Vec<f64>>,
    pub sphere: Option<SphereParams>,
}

impl PreprocessParams {
    /// Replays the fitted pipeline on new cases.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let out = match self.spec.ratio_column {
            Some(c) => ratio_transform(data, c)?,
            None => data.clone(),
        };
        if let Some(s) = &self.sphere {
            return s.apply(&out);
        }
        let (Some(means), Some(sds)) = (&self.means, &self.sds) else {
            return Ok(out);
        };
        if out.n_cols() != means.len() {
            return Err(Error::LengthMismatch {
                left: out.n_cols(),
                right: means.len(),
            });
        }
        let values = out
            .rows()
            .flat_map(|row| row.iter().zip(means).zip(sds).map(|((v, m), s)| (v - m) / s))
            .collect();
        rebuild(&out, values, out.n_cols())
    }
}

pub fn preprocess(data: &Dataset, spec: &PreprocessSpec) -> Result<(Dataset, PreprocessParams)> {
    let mut out = match spec.ratio_column {
        Some(c) => ratio_transform(data, c)?,
        None => data.clone(),
    };
    let mut params = PreprocessParams {
        spec: spec.clone(),
        ..Default::default()
    };
    if spec.sphere {
        let (mut s, mut p) = sphere(&out, spec.whiten)?;
        if let Some(keep) = spec.keep_components {
            let keep = keep.clamp(1, p.eigenvalues.len());
            p.eigenvalues.truncate(keep);
            p.eigenvectors.truncate(keep);
            s = p.apply(&out)?;
        }
        out = s;
        params.sphere = Some(p);
    } else if spec.standardize {
        let (s, means, sds) = standardize(&out)?;
        out = s;
        params.means = Some(means);
        params.sds = Some(sds);
    }
    Ok((out, params))
}

/// Column names after a pipeline.
pub fn output_columns(input: &[String], params: &PreprocessParams) -> Vec<String> {
    match (&params.sphere, params.spec.ratio_column) {
        (Some(s), _) => s.component_names(),
        (None, Some(c)) => input
            .iter()
            .enumerate()
            .map(|(j, n)| if j == c { n.clone() } else { format!("{n}/{}", input[c]) })
            .collect(),
        (None, None) => input.to_vec(),
    }
}

/// The crab measurements with species/sex classes.
pub fn crabs() -> Result<Loaded> {
    let options = CsvOptions {
        label_columns: vec!["sp".into(), "sex".into()],
        ignore_columns: vec!["index".into()],
        ..CsvOptions::default()
    };
    read_csv(CRABS_CSV.as_bytes(), &options)
}

/// Crab measurements as ratios to carapace width, then whitened correlation
/// PCA, with the four species/sex classes.
pub fn crabs_sphered() -> Result<(Dataset, CrispAssignment)> {
    let loaded = crabs()?;
    let cw = loaded.columns.iter().position(|c| c == "CW").expect("CW column");
    let (data, _) = preprocess(&loaded.data, &PreprocessSpec::ratio_sphere(cw))?;
    Ok((data, loaded.labels.expect("crab classes")))
}
