//! Duties produced by the three control modes for a few canopy readings.
//!
//! ```text
//! cargo run --example control_laws
//! ```

use spraysim::control::{command_frame, ControlMode, ControllerConfig};
use spraysim::perception::ZoneFeatures;

fn zone(i: usize, a_p: f64, d_c: f64) -> ZoneFeatures {
    ZoneFeatures {
        zone_index: i,
        a_p,
        d_c,
        v_p: 0.5,
        valid_pixel_count: if a_p > 0.0 { 1 } else { 0 },
    }
}

fn main() -> spraysim::Result<()> {
    // Sparse top, near middle, deep bottom, empty ground strip.
    let frame = [
        zone(0, 0.05, 1.4),
        zone(1, 0.5, 0.8),
        zone(2, 0.8, 1.3),
        zone(3, 0.0, f64::INFINITY),
    ];
    println!("zone a_p  d_c  | all    onoff  variable");
    let per_mode: Vec<Vec<f64>> = ControlMode::ALL
        .iter()
        .map(|&m| {
            let cfg = ControllerConfig::default().with_mode(m);
            command_frame(&frame, &cfg, 0).map(|c| c.iter().map(|c| c.duty).collect())
        })
        .collect::<spraysim::Result<_>>()?;
    for (i, z) in frame.iter().enumerate() {
        println!(
            "{i:>4} {:.2} {:>4.1} | {:>5.1}  {:>5.1}  {:>8.1}",
            z.a_p, z.d_c, per_mode[0][i], per_mode[1][i], per_mode[2][i]
        );
    }
    Ok(())
}
