//! CIC sweep over the sphered crab data.
//!
//! `cargo run --release -p cic-core --example crab_sweep -- [seed] [subsample]`

use cic_core::baselearn::{BaseKind, ResampleScheme};
use cic_core::metrics::agreement;
use cic_core::mmcc::MmccConfig;
use cic_core::preprocess::crabs_sphered;
use cic_core::sweep::{full_sample_fit, run_sweep, SweepConfig};

fn main() -> cic_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let subsample = args.next().is_some_and(|s| s == "subsample");
    let (data, truth) = crabs_sphered()?;
    let template = MmccConfig {
        seed,
        scheme: if subsample {
            ResampleScheme::Subsample
        } else {
            ResampleScheme::Bootstrap
        },
        resample_size: subsample.then_some(100),
        ..MmccConfig::new(2)
    };
    let start = std::time::Instant::now();
    let report = run_sweep(&data, &SweepConfig::new(2, 10, template))?;
    println!("k\tsilhouette\tinformation\tuncertainty\tcic\tdegenerate");
    for m in &report.models {
        let b = &m.breakdown;
        println!(
            "{}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{}",
            m.k,
            m.silhouette.unwrap_or(f64::NAN),
            b.information,
            b.uncertainty,
            b.cic,
            m.degenerate
        );
    }
    println!("selected k = {:?} in {:.1?}", report.selected_k, start.elapsed());
    if let Some(m) = report.model(4) {
        println!("{:?}", agreement(&m.majority, &truth)?);
    }
    let standard = full_sample_fit(&data, &BaseKind::Pam, 4, seed);
    println!("standard {:?}", agreement(&standard.assignment, &truth)?);
    Ok(())
}
