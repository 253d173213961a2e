//! Subcommand implementations.

use std::io::Write;

use serde::Serialize;
use serde_json::json;

use cic_core::baselearn::BaseKind;
use cic_core::generate::{generate as generate_shape, Shape};
use cic_core::metrics::{
    agreement as agreement_report, convergence_study, failure_codes, reference_agreement, resample_pair_agreement,
    silhouette, simulate_null_agreement, summarize, write_distribution_tsv, AgreementReport, DistributionSummary,
    FailureCode, NullSimConfig,
};
use cic_core::mmcc::mmcc_fit;
use cic_core::par::{map_range, Execution};
use cic_core::preprocess::{self, PreprocessParams, PreprocessSpec};
use cic_core::sweep::{full_sample_fit, run_sweep, SweepConfig, SweepReport, SweepStatus};
use cic_core::{CrispAssignment, Dataset};

use crate::args::{
    AgreementArgs, Command, ConvergenceArgs, GenerateArgs, NullArgs, PreprocessArgs, SilhouetteArgs, SweepArgs,
};
use crate::error::{CliError, CliResult};
use crate::input::{self, read_labels, Input};
use crate::report::{format_table, write_sweep, Manifest, OutDir};

/// Printed whenever CIC values of different base learners are put side by
/// side.
pub const CROSS_LEARNER_CAVEAT: &str = "note: CIC values are only comparable within one base learner; \
    CIC tends to favour less flexible learners, and no correction is applied";

pub fn dispatch(command: &Command) -> CliResult<()> {
    match command {
        Command::Sweep(a) => sweep(a).map(|_| ()),
        Command::Silhouette(a) => silhouette_cmd(a),
        Command::Agreement(a) => agreement(a),
        Command::ValidateNull(a) => validate_null(a),
        Command::Convergence(a) => convergence(a),
        Command::Generate(a) => generate(a),
        Command::Preprocess(a) => preprocess_cmd(a),
    }
}

/// Full-sample solutions per `K`, fitted in parallel.
pub fn standard_solutions(
    data: &Dataset,
    base: BaseKind,
    ks: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Vec<(usize, CrispAssignment)> {
    let (lo, hi) = (*ks.start(), *ks.end());
    map_range(Execution::Parallel, lo.max(2), hi + 1, |k| {
        (k, full_sample_fit(data, &base, k, seed).assignment)
    })
}

/// Mean silhouette width of the full-sample solution for each `K >= 2`.
pub fn silhouette_baseline(
    data: &Dataset,
    base: BaseKind,
    ks: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Vec<(usize, f64)> {
    standard_solutions(data, base, ks, seed)
        .into_iter()
        .map(|(k, s)| (k, silhouette(data, s.labels())))
        .collect()
}

fn sweep_config(a: &SweepArgs, base: BaseKind) -> SweepConfig {
    SweepConfig {
        k_min: a.kmin,
        k_max: a.kmax,
        template: a.model.config(2, base),
        silhouette: !a.no_silhouette,
    }
}

/// Runs one sweep per requested base learner and writes the reports. Fails
/// with [`CliError::AllDegenerate`] after writing when no learner produced a
/// usable model.
pub fn sweep(a: &SweepArgs) -> CliResult<Vec<(BaseKind, SweepReport)>> {
    let input = input::load(&a.input)?;
    let mut bases = vec![a.model.base];
    for b in &a.compare {
        if !bases.contains(b) {
            bases.push(*b);
        }
    }
    if bases.len() > 1 {
        eprintln!("{CROSS_LEARNER_CAVEAT}");
    }
    for &base in &bases {
        sweep_config(a, base).validate()?;
    }
    let mut out = OutDir::create(&a.out)?;
    let mut reports = Vec::new();
    for &base in &bases {
        let cfg = sweep_config(a, base);
        let report = run_sweep(&input.data, &cfg)?;
        let standard = if cfg.silhouette {
            standard_solutions(&input.data, base, cfg.ks(), cfg.template.seed)
        } else {
            Vec::new()
        };
        let prefix = if bases.len() > 1 {
            format!("{base}/")
        } else {
            String::new()
        };
        write_sweep(&mut out, &prefix, &report, input.labels.as_ref(), &standard)?;
        if bases.len() > 1 {
            println!("base learner {base}");
        }
        print!("{}", format_table(&report));
        match report.selected_k {
            Some(k) => println!("selected k = {k}"),
            None => println!("no model selected ({:?})", report.status),
        }
        reports.push((base, report));
    }
    let config = json!({
        "k_min": a.kmin,
        "k_max": a.kmax,
        "bases": bases,
        "template": a.model.config(2, a.model.base),
        "silhouette": !a.no_silhouette,
        "input": {
            "label_columns": a.input.label_col,
            "ignore_columns": a.input.ignore_col,
            "id_column": a.input.id_col,
        },
    });
    out.finish(Manifest::new(
        "sweep",
        Some(a.model.seed),
        vec![input.provenance.clone()],
        config,
    ))?;
    if reports.iter().all(|(_, r)| r.status == SweepStatus::AllDegenerate) {
        return Err(CliError::AllDegenerate);
    }
    Ok(reports)
}

fn silhouette_cmd(a: &SilhouetteArgs) -> CliResult<()> {
    if a.kmin < 2 || a.kmin > a.kmax {
        return Err(CliError::Config(format!(
            "need 2 <= kmin <= kmax, got {} and {}",
            a.kmin, a.kmax
        )));
    }
    let input = input::load(&a.input)?;
    let rows = silhouette_baseline(&input.data, a.base, a.kmin..=a.kmax, a.seed);
    let mut table = String::from("k\tsilhouette\n");
    for (k, s) in &rows {
        table.push_str(&format!("{k}\t{s}\n"));
    }
    print!("{table}");
    if let Some(path) = &a.out {
        std::fs::write(path, table)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct FailureCounts {
    o: usize,
    s: usize,
    t: usize,
    x: usize,
}

#[derive(Debug, Serialize)]
struct AgreementOutput {
    a_vs_b: Option<AgreementReport>,
    a_vs_truth: Option<AgreementReport>,
    b_vs_truth: Option<AgreementReport>,
    failures: Option<FailureCounts>,
}

fn agreement(a: &AgreementArgs) -> CliResult<()> {
    let first = read_labels(&a.a, &a.a_col)?;
    let second = a.b.as_ref().map(|p| read_labels(p, &a.b_col)).transpose()?;
    let truth = a.truth.as_ref().map(|p| read_labels(p, &a.truth_col)).transpose()?;
    let fa = &first.assignment;
    let vs = |x: &CrispAssignment, y: &CrispAssignment| agreement_report(x, y);
    let codes = match (&second, &truth) {
        (Some(s), Some(t)) => Some(failure_codes(fa, &s.assignment, &t.assignment)?),
        _ => None,
    };
    let output = AgreementOutput {
        a_vs_b: second.as_ref().map(|s| vs(fa, &s.assignment)).transpose()?,
        a_vs_truth: truth.as_ref().map(|t| vs(fa, &t.assignment)).transpose()?,
        b_vs_truth: match (&second, &truth) {
            (Some(s), Some(t)) => Some(vs(&s.assignment, &t.assignment)?),
            _ => None,
        },
        failures: codes.as_ref().map(|c| {
            let count = |code| c.iter().filter(|&&x| x == code).count();
            FailureCounts {
                o: count(FailureCode::BothOk),
                s: count(FailureCode::FirstFails),
                t: count(FailureCode::SecondFails),
                x: count(FailureCode::BothFail),
            }
        }),
    };
    println!("{}", serde_json::to_string_pretty(&output)?);
    if let Some(dir) = &a.out {
        let mut out = OutDir::create(dir)?;
        out.json("agreement.json", &output)?;
        if let Some(c) = &codes {
            out.file("failures.tsv", |w| {
                writeln!(w, "case\tcode")?;
                for (i, code) in c.iter().enumerate() {
                    writeln!(w, "{}\t{}", i + 1, code.symbol())?;
                }
                Ok(())
            })?;
        }
        let inputs = std::iter::once(first.provenance.clone())
            .chain(second.map(|s| s.provenance))
            .chain(truth.map(|t| t.provenance))
            .collect();
        let config = json!({ "a_columns": a.a_col, "b_columns": a.b_col, "truth_columns": a.truth_col });
        out.finish(Manifest::new("agreement", None, inputs, config))?;
    }
    Ok(())
}

/// The four agreement distributions behind the null-model check.
#[derive(Debug, Clone)]
pub struct NullStudy {
    pub null_pairs: Vec<f64>,
    pub resample_pairs: Vec<f64>,
    pub standard_reference: Vec<f64>,
    pub truecluster_reference: Vec<f64>,
}

impl NullStudy {
    pub fn named(&self) -> [(&'static str, &[f64]); 4] {
        [
            ("null_pairs", &self.null_pairs),
            ("resample_pairs", &self.resample_pairs),
            ("standard_reference", &self.standard_reference),
            ("truecluster_reference", &self.truecluster_reference),
        ]
    }
}

pub fn null_study(input: &Input, a: &NullArgs) -> CliResult<NullStudy> {
    let cfg = a.model.config(a.k, a.model.base);
    cfg.validate()?;
    let null = NullSimConfig {
        draws: a.draws,
        n: a.null_n,
        k: a.k,
        base: a.model.base,
        predictor: a.model.predict,
        seed: a.model.seed,
        execution: Execution::Parallel,
    };
    let data = &input.data;
    let standard = full_sample_fit(data, &a.model.base, a.k, a.model.seed).assignment;
    let aggregated = mmcc_fit(data, &cfg)?.majority;
    Ok(NullStudy {
        null_pairs: simulate_null_agreement(data, &null)?,
        resample_pairs: resample_pair_agreement(data, &cfg, a.rounds)?,
        standard_reference: reference_agreement(data, &cfg, &standard, a.rounds)?,
        truecluster_reference: reference_agreement(data, &cfg, &aggregated, a.rounds)?,
    })
}

fn validate_null(a: &NullArgs) -> CliResult<()> {
    let input = input::load(&a.input)?;
    let study = null_study(&input, a)?;
    let mut out = OutDir::create(&a.out)?;
    let mut summaries: Vec<(&str, Option<DistributionSummary>)> = Vec::new();
    println!("distribution\tcount\tmedian");
    for (name, values) in study.named() {
        out.file(&format!("{name}.tsv"), |w| Ok(write_distribution_tsv(values, w)?))?;
        let s = summarize(values);
        println!(
            "{name}\t{}\t{}",
            values.len(),
            s.as_ref().map_or(f64::NAN, |s| s.median)
        );
        summaries.push((name, s));
    }
    let summary: serde_json::Map<String, serde_json::Value> = summaries
        .into_iter()
        .map(|(n, s)| Ok((n.to_string(), serde_json::to_value(s)?)))
        .collect::<CliResult<_>>()?;
    out.json("summary.json", &summary)?;
    let config = json!({
        "k": a.k,
        "draws": a.draws,
        "null_n": a.null_n,
        "rounds": a.rounds,
        "model": a.model.config(a.k, a.model.base),
    });
    out.finish(Manifest::new(
        "validate-null",
        Some(a.model.seed),
        vec![input.provenance],
        config,
    ))?;
    Ok(())
}

fn convergence(a: &ConvergenceArgs) -> CliResult<()> {
    let input = input::load(&a.input)?;
    let cfg = SweepConfig {
        k_min: a.kmin,
        k_max: a.kmax,
        template: a.model.config(2, a.model.base),
        silhouette: false,
    };
    let study = convergence_study(&input.data, &cfg, a.repetitions)?;
    let mut out = OutDir::create(&a.out)?;
    out.file("convergence.tsv", |w| Ok(study.write_tsv(w)?))?;
    out.json("selected.json", &study.selected)?;
    if let Some(last) = study.fractions.last() {
        println!("k\tfraction selected after {} rounds", study.fractions.len());
        for (k, f) in study.ks.iter().zip(last) {
            println!("{k}\t{f}");
        }
    }
    let config = json!({ "k_min": a.kmin, "k_max": a.kmax, "repetitions": a.repetitions, "template": cfg.template });
    out.finish(Manifest::new(
        "convergence",
        Some(a.model.seed),
        vec![input.provenance],
        config,
    ))?;
    Ok(())
}

fn generate(a: &GenerateArgs) -> CliResult<()> {
    let shape = Shape::parse(&a.shape, a.k)?;
    let g = generate_shape(shape, a.n, a.noise, a.seed)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    g.write_csv(std::io::BufWriter::new(std::fs::File::create(&a.out)?))?;
    Ok(())
}

fn preprocess_cmd(a: &PreprocessArgs) -> CliResult<()> {
    if a.input.source.builtin.is_some() {
        return Err(CliError::Config("preprocess reads --input files only".into()));
    }
    let input = input::load(&a.input)?;
    let (data, params) = match &a.apply {
        Some(path) => {
            let params: PreprocessParams = serde_json::from_slice(&std::fs::read(path)?)?;
            (params.apply(&input.data)?, params)
        }
        None => {
            let ratio_column = a
                .ratio_col
                .as_ref()
                .map(|c| {
                    input
                        .columns
                        .iter()
                        .position(|x| x == c)
                        .ok_or_else(|| CliError::Config(format!("no numeric column `{c}`")))
                })
                .transpose()?;
            let spec = PreprocessSpec {
                ratio_column,
                standardize: a.standardize,
                sphere: a.sphere,
                whiten: a.whiten,
                keep_components: a.keep,
            };
            preprocess::preprocess(&input.data, &spec)?
        }
    };
    let columns = preprocess::output_columns(&input.columns, &params);
    let mut w = csv::Writer::from_path(&a.out).map_err(|e| std::io::Error::other(e.to_string()))?;
    let mut header = columns.clone();
    if input.labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    for (i, row) in data.rows().enumerate() {
        let mut record: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        if let Some(l) = &input.labels {
            record.push(input.label_levels[l.labels()[i]].clone());
        }
        w.write_record(&record)
            .map_err(|e| std::io::Error::other(e.to_string()))?;
    }
    w.flush()?;
    if let Some(path) = &a.params {
        std::fs::write(path, serde_json::to_string_pretty(&params)? + "\n")?;
    }
    Ok(())
}
