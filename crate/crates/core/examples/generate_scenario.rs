//! Write the builtin orchard row as raster files plus a manifest, then load
//! it back and check every frame against its segment tag.
//!
//! ```text
//! cargo run --example generate_scenario [out_dir]
//! ```

use std::path::PathBuf;

use spraysim::harness::{generate_scenario, naju_default, prepare_frames, Scenario, TrialConfig};

fn main() -> spraysim::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("spraysim-naju"));
    let template = naju_default();
    let spec = template.generator.expect("builtin scenario is generated");
    let written = generate_scenario(&template, &spec, &dir)?;
    println!("{} frames written under {}", written.frames.len(), dir.display());

    let loaded = Scenario::load(&dir.join("scenario.toml"))?;
    let frames = prepare_frames(&loaded, &TrialConfig::default())?;
    let above = frames
        .features
        .iter()
        .filter(|zones| zones.iter().any(|z| z.a_p > 0.10))
        .count();
    println!(
        "{} of {} frames have a zone over the threshold; {} papers",
        above,
        frames.len(),
        loaded.papers.len()
    );
    Ok(())
}
