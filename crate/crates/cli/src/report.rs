//! Output files and the run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use cic_core::cic::CicBreakdown;
use cic_core::metrics::agreement;
use cic_core::sweep::{ModelRecord, SweepReport};
use cic_core::CrispAssignment;

use crate::error::{CliError, CliResult};
use crate::input::{sha256_hex, Provenance};

/// Tolerance for the emitted `cic = information - uncertainty` identity.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to reproduce a run. The thread count is left out since
/// it never changes the outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub inputs: Vec<Provenance>,
    pub config: serde_json::Value,
    pub outputs: Vec<OutputEntry>,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>, inputs: Vec<Provenance>, config: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            inputs,
            config,
            outputs: Vec::new(),
        }
    }
}

/// An output directory that remembers what was written to it.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `rel` (slash separated) through a buffered writer.
    pub fn file<F>(&mut self, rel: &str, f: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> CliResult<()>,
    {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        self.written.push(rel.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        self.file(rel, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    /// Writes `manifest.json` listing every output with its digest.
    pub fn finish(self, mut manifest: Manifest) -> CliResult<PathBuf> {
        for rel in &self.written {
            let bytes = std::fs::read(self.root.join(rel))?;
            manifest.outputs.push(OutputEntry {
                path: rel.clone(),
                sha256: sha256_hex(&bytes),
            });
        }
        let path = self.root.join("manifest.json");
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        writeln!(w)?;
        w.flush()?;
        Ok(path)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| x.to_string())
}

/// Fails when a finite row breaks `cic = information - uncertainty`.
pub fn check_identity(b: &CicBreakdown) -> CliResult<()> {
    let gap = b.cic - (b.information - b.uncertainty);
    if b.cic.is_finite() && gap.abs() > IDENTITY_TOLERANCE {
        return Err(CliError::Check(format!(
            "k = {}: cic differs from information - uncertainty by {gap}",
            b.k
        )));
    }
    Ok(())
}

/// Columns `k, silhouette, information, uncertainty, cic, degenerate`.
pub fn write_cic_table<W: Write>(models: &[ModelRecord], mut w: W) -> CliResult<()> {
    writeln!(w, "k\tsilhouette\tinformation\tuncertainty\tcic\tdegenerate")?;
    for m in models {
        check_identity(&m.breakdown)?;
        let b = &m.breakdown;
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            m.k,
            opt(m.silhouette),
            b.information,
            b.uncertainty,
            b.cic,
            m.degenerate
        )?;
    }
    Ok(())
}

/// Per case: 1-based majority label, GSD and the row sum of the cellwise CIC.
pub fn write_case_diagnostics<W: Write>(m: &ModelRecord, mut w: W) -> CliResult<()> {
    writeln!(w, "case\tlabel\tgsd\tcellwise_cic")?;
    let sums = m.breakdown.cellwise_row_sums();
    for (i, &l) in m.majority.labels().iter().enumerate() {
        writeln!(w, "{}\t{}\t{}\t{}", i + 1, l + 1, m.breakdown.gsd[i], sums[i])?;
    }
    Ok(())
}

/// Two columns, `case` and the 1-based `label`.
pub fn write_labels<W: Write>(a: &CrispAssignment, mut w: W) -> CliResult<()> {
    writeln!(w, "case\tlabel")?;
    for (i, &l) in a.labels().iter().enumerate() {
        writeln!(w, "{}\t{}", i + 1, l + 1)?;
    }
    Ok(())
}

/// Agreement of each model's majority with the true classes.
pub fn write_agreement_table<W: Write>(models: &[ModelRecord], truth: &CrispAssignment, mut w: W) -> CliResult<()> {
    writeln!(w, "k\tfraction_matched\tkappa\trand\tcrand")?;
    for m in models {
        let r = agreement(&m.majority, truth)?;
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            m.k, r.fraction_matched, r.kappa, r.rand, r.crand
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ModelSummary<'a> {
    k: usize,
    degenerate: bool,
    silhouette: Option<f64>,
    rounds_used: usize,
    degenerate_rounds: usize,
    breakdown: &'a CicBreakdown,
    probs: serde_json::Value,
    votes: Option<serde_json::Value>,
}

#[derive(Serialize)]
struct Selection {
    selected_k: Option<usize>,
    status: cic_core::sweep::SweepStatus,
}

/// Writes the full report of one sweep under `prefix`, which is empty or ends
/// with a slash. `standard` holds full-sample solutions by `K`.
pub fn write_sweep(
    out: &mut OutDir,
    prefix: &str,
    report: &SweepReport,
    truth: Option<&CrispAssignment>,
    standard: &[(usize, CrispAssignment)],
) -> CliResult<()> {
    out.file(&format!("{prefix}cic_table.tsv"), |w| {
        write_cic_table(&report.models, w)
    })?;
    if let Some(t) = truth {
        out.file(&format!("{prefix}agreement.tsv"), |w| {
            write_agreement_table(&report.models, t, w)
        })?;
    }
    out.json(
        &format!("{prefix}selection.json"),
        &Selection {
            selected_k: report.selected_k,
            status: report.status,
        },
    )?;
    for m in &report.models {
        let dir = format!("{prefix}k{}", m.k);
        out.file(&format!("{dir}/probs.tsv"), |w| Ok(m.probs.write_tsv(w)?))?;
        out.file(&format!("{dir}/diagnostics.tsv"), |w| write_case_diagnostics(m, w))?;
        if let Some(res) = &m.mmcc {
            out.file(&format!("{dir}/votes.tsv"), |w| Ok(res.votes.write_tsv(w)?))?;
            out.file(&format!("{dir}/trace.tsv"), |w| Ok(res.write_trace_tsv(w)?))?;
        }
        if let Some((_, s)) = standard.iter().find(|(k, _)| *k == m.k) {
            out.file(&format!("{dir}/standard.tsv"), |w| write_labels(s, w))?;
        }
        out.json(
            &format!("{dir}/model.json"),
            &ModelSummary {
                k: m.k,
                degenerate: m.degenerate,
                silhouette: m.silhouette,
                rounds_used: m.mmcc.as_ref().map_or(0, |r| r.rounds_used),
                degenerate_rounds: m.mmcc.as_ref().map_or(0, |r| r.degenerate_rounds),
                breakdown: &m.breakdown,
                probs: m.probs.to_json(),
                votes: m.mmcc.as_ref().map(|r| r.votes.to_json()),
            },
        )?;
    }
    Ok(())
}

/// Human-readable table for the terminal.
pub fn format_table(report: &SweepReport) -> String {
    let mut s = String::from("k\tsilhouette\tinformation\tuncertainty\tcic\n");
    for m in &report.models {
        let b = &m.breakdown;
        s.push_str(&format!(
            "{}{}\t{}\t{:.3}\t{:.3}\t{:.3}\n",
            m.k,
            if m.degenerate { "*" } else { "" },
            m.silhouette.map_or_else(|| "NA".into(), |x| format!("{x:.3}")),
            b.information,
            b.uncertainty,
            b.cic
        ));
    }
    s
}
