//! Three-way comparison of all-open, on/off and variable-rate spraying on
//! the builtin orchard row.
//!
//! ```text
//! cargo run --example field_comparison [seed,seed,...]
//! ```

use std::time::Instant;

use spraysim::harness::report::compare_controls;
use spraysim::harness::{naju_default, prepare_frames, TrialConfig};

fn main() -> spraysim::Result<()> {
    let seeds: Vec<u64> = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "1,2,3".into())
        .split(',')
        .map(|s| s.trim().parse().expect("seeds are integers"))
        .collect();
    let scenario = naju_default();
    let cfg = TrialConfig::default();

    let started = Instant::now();
    let frames = prepare_frames(&scenario, &cfg)?;
    let (report, results) = compare_controls(&scenario, &frames, &cfg, &seeds, 5.0, None)?;
    print!("{}", report.to_csv());

    for check in &report.bleed {
        println!(
            "gap segment {} under {}: mean R_p {:.2} ({})",
            check.segment,
            check.mode,
            check.mean_rp,
            if check.within_tolerance { "within tolerance" } else { "over tolerance" }
        );
    }
    let deposited: u64 = results.iter().map(|r| r.deposited).sum();
    println!(
        "{} trials, {} droplets landed, {:.1} s",
        results.len(),
        deposited,
        started.elapsed().as_secs_f64()
    );
    Ok(())
}
