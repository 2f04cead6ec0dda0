//! Distance sweep: adhesion rate against target distance for duties 75..100 %.
//!
//! ```text
//! cargo run --example calibrate_pe2 [droplet_rate] [trials]
//! ```

use spraysim::spray::calibrate::{replicate_pe2, SweepSetup};
use spraysim::spray::PlumeModel;
use spraysim::valve::ValveParams;

fn main() -> spraysim::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut model = PlumeModel::default();
    let mut setup = SweepSetup::pe2();
    if let Some(rate) = args.next() {
        model.droplet_rate = rate.parse().expect("droplet rate must be a number");
    }
    if let Some(trials) = args.next() {
        setup.trials = trials.parse().expect("trials must be an integer");
    }

    let table = replicate_pe2(&setup, &model, &ValveParams::default())?;
    print!("{}", table.to_csv());
    eprintln!(
        "largest rise with distance: {:.3} points",
        table.worst_key_increase()
    );
    Ok(())
}
