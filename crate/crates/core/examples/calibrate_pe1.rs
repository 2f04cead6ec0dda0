//! Coverage sweep: adhesion rate against canopy share for duties 75..100 %.
//!
//! ```text
//! cargo run --example calibrate_pe1 [droplet_rate] [trials]
//! ```

use spraysim::spray::calibrate::{replicate_pe1, SweepSetup};
use spraysim::spray::PlumeModel;
use spraysim::valve::ValveParams;

fn main() -> spraysim::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut model = PlumeModel::default();
    let mut setup = SweepSetup::pe1();
    if let Some(rate) = args.next() {
        model.droplet_rate = rate.parse().expect("droplet rate must be a number");
    }
    if let Some(trials) = args.next() {
        setup.trials = trials.parse().expect("trials must be an integer");
    }

    let table = replicate_pe1(&setup, &model, &ValveParams::default())?;
    print!("{}", table.to_csv());
    eprintln!(
        "largest drop with rising duty: {:.3} points",
        table.worst_duty_decrease()
    );
    Ok(())
}
