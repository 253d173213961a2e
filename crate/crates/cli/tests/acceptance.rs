//! Acceptance suite. Prints one PASS or FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! Positional arguments select criteria by number; no arguments runs all.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::Instant;

use clap::Parser;
use rand::Rng;
use rand_distr::StandardNormal;

use cic_cli::args::{Cli, Command};
use cic_cli::commands::null_study;
use cic_cli::input;
use cic_core::baselearn::{BaseKind, NearestNeighborIndex, ResampleScheme};
use cic_core::cic::{cic, entropy, pseudo_log2_likelihood};
use cic_core::generate::{generate, Shape};
use cic_core::matching::{max_trace_permutation, ContingencyTable, Permutation};
use cic_core::metrics::{agreement, median, rand_indices};
use cic_core::mmcc::MmccConfig;
use cic_core::preprocess::{crabs_sphered, CRABS_CSV};
use cic_core::rng::{stream_rng, SimRng};
use cic_core::sweep::{run_sweep, SweepConfig, SweepReport};
use cic_core::types::sq_dist;
use cic_core::{CrispAssignment, Dataset, ProbabilityMatrix};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rng(case: u64) -> SimRng {
    stream_rng(20_070_101, &[case])
}

fn random_probs(rng: &mut SimRng, n: usize, k: usize) -> ProbabilityMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (0..k)
                .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() })
                .collect();
            if row.iter().all(|&v| v == 0.0) {
                row[rng.random_range(0..k)] = 1.0;
            }
            let s: f64 = row.iter().sum();
            row.iter().map(|v| v / s).collect()
        })
        .collect();
    ProbabilityMatrix::from_rows(&rows).expect("valid rows")
}

fn random_partition(rng: &mut SimRng, n: usize, k: usize) -> CrispAssignment {
    CrispAssignment::new((0..n).map(|_| rng.random_range(0..k)).collect(), k).expect("labels in range")
}

fn c01_entropy_fixed_points() -> Outcome {
    let a = entropy(&[0.25, 0.75]).unwrap();
    let b = entropy(&[0.5, 0.5]).unwrap();
    let c = entropy(&[0.25; 4]).unwrap();
    let pass = (a - 0.8113).abs() <= 1e-4 && (b - 1.0).abs() <= 1e-12 && (c - 2.0).abs() <= 1e-12;
    outcome(pass, format!("H(1/4,3/4) = {a:.6}, H(1/2,1/2) = {b}, H(4 x 1/4) = {c}"))
}

fn c02_cic_identities() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (n, k) = (rng.random_range(2..=200), rng.random_range(1..=10));
        let b = cic(&random_probs(&mut rng, n, k));
        let cellwise_mean = b.cellwise_row_sums().iter().sum::<f64>() / n as f64;
        worst = worst
            .max((b.cic - (b.information - b.uncertainty)).abs())
            .max((b.cic - cellwise_mean).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-10 && secs < 5.0,
        format!("max deviation {worst:.2e} over 1000 matrices in {secs:.2} s"),
    )
}

fn c03_crisp_reduction() -> Outcome {
    let mut rng = rng(3);
    let (mut uncertainty_ok, mut likelihood_ok, mut worst) = (true, true, 0.0f64);
    for _ in 0..500 {
        let (n, k) = (rng.random_range(2..=200), rng.random_range(1..=10));
        let probs = ProbabilityMatrix::crisp(&random_partition(&mut rng, n, k));
        let b = cic(&probs);
        uncertainty_ok &= b.uncertainty == 0.0;
        likelihood_ok &= pseudo_log2_likelihood(&probs) == 0.0;
        if k > 1 {
            let mean_d = b.d_matrix.iter().sum::<f64>() / n as f64;
            worst = worst.max((mean_d - b.entropy_of_marginals).abs());
        }
    }
    outcome(
        uncertainty_ok && likelihood_ok && worst <= 1e-12,
        format!("uncertainty all zero: {uncertainty_ok}, likelihood all zero: {likelihood_ok}, max |mean D - H| {worst:.2e}"),
    )
}

fn c04_example_matrix() -> Outcome {
    let rows: Vec<Vec<f64>> = (0..16)
        .map(|i| (0..4).map(|j| if i / 4 == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let b = cic(&ProbabilityMatrix::from_rows(&rows).unwrap());
    let pass = (b.information - 1.6).abs() <= 1e-12
        && b.uncertainty.abs() <= 1e-12
        && (b.cic - 1.6).abs() <= 1e-12
        && (b.rmc - 0.2).abs() <= 1e-12;
    outcome(
        pass,
        format!(
            "information {}, uncertainty {}, cic {}, rmc {}",
            b.information, b.uncertainty, b.cic, b.rmc
        ),
    )
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn c05_matching_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(5);
    let mut mismatches = 0;
    for case in 0..500 {
        let k = rng.random_range(1..=6);
        // small counts give many tied optima
        let hi = if case % 2 == 0 { 3 } else { 50 };
        let counts: Vec<u64> = (0..k * k).map(|_| rng.random_range(0..=hi)).collect();
        let table = ContingencyTable::from_counts(k, counts);
        let best = permutations(k)
            .into_iter()
            .map(|p| table.trace_under(&Permutation::new(p).unwrap()))
            .max()
            .unwrap();
        if table.trace_under(&max_trace_permutation(&table)) != best {
            mismatches += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && secs < 10.0,
        format!("{mismatches} mismatches in 500 instances, {secs:.2} s"),
    )
}

/// Pair counts by visiting every pair: same cluster in both, only in `a`,
/// only in `b`.
fn pair_counts(a: &[usize], b: &[usize]) -> (u64, u64, u64, u64) {
    let (mut both, mut only_a, mut only_b, mut total) = (0, 0, 0, 0);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let (sa, sb) = (a[i] == a[j], b[i] == b[j]);
            both += u64::from(sa && sb);
            only_a += u64::from(sa && !sb);
            only_b += u64::from(!sa && sb);
            total += 1;
        }
    }
    (both, only_a, only_b, total)
}

fn c06_rand_oracle() -> Outcome {
    let mut rng = rng(6);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.random_range(2..=60);
        let (ka, kb) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let (a, b) = (random_partition(&mut rng, n, ka), random_partition(&mut rng, n, kb));
        let (both, only_a, only_b, total) = pair_counts(a.labels(), b.labels());
        let neither = total - both - only_a - only_b;
        let total = total as f64;
        let rand = (both + neither) as f64 / total;
        let (sa, sb) = ((both + only_a) as f64, (both + only_b) as f64);
        let expected = sa * sb / total;
        let max = 0.5 * (sa + sb);
        let crand = if max == expected {
            1.0
        } else {
            (both as f64 - expected) / (max - expected)
        };
        if rand_indices(&a, &b).unwrap() != (rand, crand) {
            mismatches += 1;
        }
    }
    let draws = 4000;
    let mean = (0..draws)
        .map(|_| {
            let n = rng.random_range(20..=60);
            let k = rng.random_range(2..=5);
            let (a, b) = (random_partition(&mut rng, n, k), random_partition(&mut rng, n, k));
            rand_indices(&a, &b).unwrap().1
        })
        .sum::<f64>()
        / f64::from(draws);
    outcome(
        mismatches == 0 && mean.abs() <= 0.02,
        format!("{mismatches} mismatches in 200 pairs, mean crand under independence {mean:+.4}"),
    )
}

fn c07_kdtree_exactness() -> Outcome {
    let mut rng = rng(7);
    let mut mismatches = 0;
    for case in 0..1000 {
        let m = [1, 2, 5, 20][case % 4];
        let n = rng.random_range(2..=200);
        let grid = case % 3 == 0;
        let point = |rng: &mut SimRng| -> Vec<f64> {
            (0..m)
                .map(|_| {
                    if grid {
                        f64::from(rng.random_range(0..4u8))
                    } else {
                        rng.sample(StandardNormal)
                    }
                })
                .collect()
        };
        let rows: Vec<Vec<f64>> = (0..n).map(|_| point(&mut rng)).collect();
        let data = Dataset::from_rows(&rows).unwrap();
        let index = NearestNeighborIndex::with_leaf_size(&data, rng.random_range(1..=32));
        for q in 0..10 {
            let query = if q % 3 == 0 {
                rows[rng.random_range(0..n)].clone()
            } else {
                point(&mut rng)
            };
            let mut best = (0, f64::INFINITY);
            for (i, r) in rows.iter().enumerate() {
                let d = sq_dist(&query, r);
                if d < best.1 {
                    best = (i, d);
                }
            }
            if index.nearest(&query).map(|x| x.0) != Some(best.0) {
                mismatches += 1;
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} mismatches over 1000 configurations x 10 queries"),
    )
}

const REPETITIONS: u64 = 20;

struct CrabRuns {
    bootstrap: Vec<SweepReport>,
    subsample: Vec<SweepReport>,
    truth: CrispAssignment,
    secs: f64,
}

fn crab_runs() -> CrabRuns {
    let start = Instant::now();
    let (data, truth) = crabs_sphered().unwrap();
    let run = |scheme, size, seed| {
        let template = MmccConfig {
            scheme,
            resample_size: size,
            seed,
            ..MmccConfig::new(2)
        };
        let cfg = SweepConfig {
            silhouette: false,
            ..SweepConfig::new(2, 10, template)
        };
        run_sweep(&data, &cfg).unwrap()
    };
    let bootstrap = (1..=REPETITIONS)
        .map(|s| run(ResampleScheme::Bootstrap, Some(200), s))
        .collect();
    let subsample = (1..=REPETITIONS)
        .map(|s| run(ResampleScheme::Subsample, Some(100), s))
        .collect();
    CrabRuns {
        bootstrap,
        subsample,
        truth,
        secs: start.elapsed().as_secs_f64(),
    }
}

fn share_selecting(reports: &[SweepReport], k: usize) -> f64 {
    reports.iter().filter(|r| r.selected_k == Some(k)).count() as f64 / reports.len() as f64
}

fn selections(reports: &[SweepReport]) -> String {
    let mut counts: BTreeMap<Option<usize>, usize> = BTreeMap::new();
    for r in reports {
        *counts.entry(r.selected_k).or_default() += 1;
    }
    counts
        .iter()
        .map(|(k, c)| format!("{}:{c}", k.map_or("none".into(), |k| k.to_string())))
        .collect::<Vec<_>>()
        .join(" ")
}

fn c08_crab_selection(runs: &CrabRuns) -> Outcome {
    let boot = share_selecting(&runs.bootstrap, 4);
    let sub = share_selecting(&runs.subsample, 4);
    outcome(
        boot >= 0.80 && sub >= 0.95,
        format!(
            "K = 4 chosen in {:.0}% of bootstrap runs [{}] and {:.0}% of subsample runs [{}], {:.0} s",
            100.0 * boot,
            selections(&runs.bootstrap),
            100.0 * sub,
            selections(&runs.subsample),
            runs.secs
        ),
    )
}

fn c09_crab_agreement(runs: &CrabRuns) -> Outcome {
    let reports: Vec<_> = runs
        .bootstrap
        .iter()
        .map(|r| agreement(&r.model(4).unwrap().majority, &runs.truth).unwrap())
        .collect();
    let crand = median(&reports.iter().map(|r| r.crand).collect::<Vec<_>>());
    let matched = median(&reports.iter().map(|r| r.fraction_matched).collect::<Vec<_>>());
    outcome(
        (crand - 0.765).abs() <= 0.05 && (matched - 0.905).abs() <= 0.04,
        format!(
            "median over {REPETITIONS} bootstrap runs: crand {crand:.4} (0.765 +- 0.05), fraction matched {matched:.4} (0.905 +- 0.04)"
        ),
    )
}

fn c10_crab_table(runs: &CrabRuns) -> Outcome {
    let per_k = |k: usize, f: &dyn Fn(&cic_core::cic::CicBreakdown) -> f64| {
        median(
            &runs
                .bootstrap
                .iter()
                .map(|r| f(&r.model(k).unwrap().breakdown))
                .collect::<Vec<_>>(),
        )
    };
    let info2 = per_k(2, &|b| b.information);
    let unc2 = per_k(2, &|b| b.uncertainty);
    let c: Vec<f64> = (2..=5).map(|k| per_k(k, &|b| b.cic)).collect();
    let signs = c[0] < 0.0 && 0.0 < c[2] && c[2] > c[1] && c[2] > c[3];
    outcome(
        (info2 - 0.406).abs() <= 0.08 && (unc2 - 0.736).abs() <= 0.08 && signs,
        format!(
            "K = 2 information {info2:.3}, uncertainty {unc2:.3}; median CIC K = 2..5: {:.3} {:.3} {:.3} {:.3}",
            c[0], c[1], c[2], c[3]
        ),
    )
}

fn c11_null_ordering() -> Outcome {
    let out = tempfile::tempdir().unwrap();
    let cli = Cli::try_parse_from([
        "cic",
        "validate-null",
        "--builtin",
        "crabs",
        "--k",
        "4",
        "--scheme",
        "subsample",
        "--resample-size",
        "100",
        "--draws",
        "1001",
        "--null-n",
        "100",
        "--rounds",
        "1001",
        "--seed",
        "11",
        "--out",
        out.path().to_str().unwrap(),
    ])
    .unwrap();
    let Command::ValidateNull(args) = cli.command else {
        unreachable!()
    };
    let study = null_study(&input::load(&args.input).unwrap(), &args).unwrap();
    let null = median(&study.null_pairs);
    let pairs = median(&study.resample_pairs);
    let standard = median(&study.standard_reference);
    let aggregated = median(&study.truecluster_reference);
    outcome(
        pairs - null > 0.02 && aggregated >= standard,
        format!(
            "median rand: null pairs {null:.4}, resample pairs {pairs:.4}, standard reference {standard:.4}, aggregated reference {aggregated:.4}"
        ),
    )
}

fn shape_sweep(shape: Shape, noise: f64, base: BaseKind) -> (cic_core::generate::Generated, SweepReport) {
    let g = generate(shape, 400, noise, 1).unwrap();
    let template = MmccConfig {
        base,
        seed: 12,
        ..MmccConfig::new(2)
    };
    let cfg = SweepConfig {
        silhouette: false,
        ..SweepConfig::new(2, 6, template)
    };
    let report = run_sweep(&g.data, &cfg).unwrap();
    (g, report)
}

fn c12_shape_recovery() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for (shape, noise) in [(Shape::Ring, 0.15), (Shape::Spiral, 0.1)] {
        let (g, report) = shape_sweep(shape, noise, BaseKind::SingleLink);
        let crand = report
            .selected_k
            .map(|k| agreement(&report.model(k).unwrap().majority, &g.labels).unwrap().crand);
        pass &= report.selected_k == Some(2) && crand.is_some_and(|c| c >= 0.99);
        notes.push(format!(
            "{} K = {:?} crand {:.4}",
            shape.name(),
            report.selected_k,
            crand.unwrap_or(f64::NAN)
        ));
    }
    // flipper: pairs of clusters centered at y = +-1.2 touch along y = 0
    let (g, report) = shape_sweep(Shape::Flipper4, 0.6, BaseKind::Pam);
    let gsd = &report.model(4).unwrap().breakdown.gsd;
    let med = median(gsd);
    let border: Vec<usize> = (0..g.data.n_rows()).filter(|&i| g.data.row(i)[1].abs() < 0.2).collect();
    let below = border.iter().filter(|&&i| gsd[i] < med).count();
    pass &= report.selected_k == Some(4) && !border.is_empty() && below == border.len();
    notes.push(format!(
        "flipper4 K = {:?}, {below} of {} border cases below median GSD {med:.3}",
        report.selected_k,
        border.len()
    ));
    outcome(pass, notes.join("; "))
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

fn run_cli(args: &[&str]) {
    let status = Process::new(env!("CARGO_BIN_EXE_cic"))
        .args(args)
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "cic {args:?} failed");
}

fn c13_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("crabs.csv");
    std::fs::write(&input, CRABS_CSV).unwrap();
    let input = input.to_str().unwrap();
    let mut identical = true;
    let mut files = 0;
    for (name, args) in [
        (
            "sweep",
            vec![
                "sweep",
                "--input",
                input,
                "--label-col",
                "sp,sex",
                "--ignore-col",
                "index",
                "--kmin",
                "2",
                "--kmax",
                "6",
                "--resamples",
                "200",
                "--seed",
                "13",
            ],
        ),
        (
            "null",
            vec![
                "validate-null",
                "--builtin",
                "crabs",
                "--scheme",
                "subsample",
                "--draws",
                "101",
                "--rounds",
                "101",
                "--resamples",
                "200",
                "--seed",
                "13",
            ],
        ),
    ] {
        let mut trees = Vec::new();
        for (run, threads) in ["1", "2", "8", "2"].iter().enumerate() {
            let out = dir.path().join(format!("{name}-{run}"));
            let mut full = args.clone();
            full.extend(["--threads", threads, "--out", out.to_str().unwrap()]);
            run_cli(&full);
            trees.push(tree(&out));
        }
        files += trees[0].len();
        identical &= !trees[0].is_empty() && trees.iter().all(|t| *t == trees[0]);
    }
    outcome(
        identical,
        format!("{files} output files byte-identical across threads 1, 2, 8 and a rerun: {identical}"),
    )
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let filtered = std::env::args().skip(1).any(|a| !a.starts_with('-'));
    let wanted = |id: usize| !filtered || selected.contains(&id);
    let mut results: Vec<(usize, &str, bool)> = Vec::new();
    let mut report = |id: usize, name: &'static str, f: &dyn Fn() -> Outcome| {
        if !wanted(id) {
            return;
        }
        let o = f();
        println!(
            "criterion {id:>2} {}: {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o.pass));
    };
    report(1, "entropy fixed points", &c01_entropy_fixed_points);
    report(2, "CIC identities", &c02_cic_identities);
    report(3, "crisp reduction", &c03_crisp_reduction);
    report(4, "example matrix hand value", &c04_example_matrix);
    report(5, "matching oracle", &c05_matching_oracle);
    report(6, "rand/crand oracle", &c06_rand_oracle);
    report(7, "kd-tree exactness", &c07_kdtree_exactness);
    if [8, 9, 10].into_iter().any(wanted) {
        let runs = crab_runs();
        report(8, "crab model selection", &|| c08_crab_selection(&runs));
        report(9, "crab agreement with true classes", &|| c09_crab_agreement(&runs));
        report(10, "crab CIC table", &|| c10_crab_table(&runs));
    }
    report(11, "null-model ordering", &c11_null_ordering);
    report(12, "recovery of generated shapes", &c12_shape_recovery);
    report(13, "determinism across thread counts", &c13_determinism);

    let failed: Vec<usize> = results.iter().filter(|r| !r.2).map(|r| r.0).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
