//! Valve response to a duty schedule: plunger opening, flow and dispensed
//! volume, written as CSV to stdout.
//!
//! ```text
//! cargo run --example valve_trace [waveform|averaged] > trace.csv
//! ```

use spraysim::valve::{integrate_volume, trace_csv, PwmMode, PwmSettings, ValveParams};

fn main() -> spraysim::Result<()> {
    let mode = match std::env::args().nth(1).as_deref() {
        Some("waveform") => PwmMode::Waveform,
        _ => PwmMode::Averaged,
    };
    let pwm = PwmSettings {
        mode,
        ..Default::default()
    };
    let dt = pwm.dt();
    let params = ValveParams::default();

    // Two nozzles for one second: 100 % then 75 %, and off then 80 %.
    let steps = (1.0 / dt).round() as usize;
    let schedule: Vec<Vec<f64>> = (0..steps)
        .map(|k| if k < steps / 2 { vec![100.0, 0.0] } else { vec![75.0, 80.0] })
        .collect();
    let samples = integrate_volume(&schedule, dt, &params, &pwm)?;
    print!("{}", trace_csv(&samples));

    let last = samples.last().expect("non-empty schedule");
    eprintln!(
        "{} steps of {dt} s, full flow {:.4} L/s per nozzle, {:.4} L dispensed",
        samples.len(),
        params.full_flow() * 1000.0,
        last.volume_accum
    );
    Ok(())
}
