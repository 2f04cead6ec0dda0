//! The `spraysim` command line.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 scenario
//! validation failure (including a missing manifest), 3 runtime failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{parse_seeds, Overrides, SimConfig};
use crate::control::ControlMode;
use crate::error::{Error, Result};
use crate::harness::report::{compare_controls, duty_plot_data, run_all, summarize};
use crate::harness::{prepare_frames, Scenario, TrialResult};
use crate::io::{write_atomic, write_atomic_str};
use crate::perception::format::encode_class_raster;
use crate::spray::calibrate::{replicate, Experiment};
use crate::valve::{push_trace_rows, TRACE_HEADER};

#[derive(Debug, Parser)]
#[command(name = "spraysim", version, about = "Variable-rate orchard sprayer simulator")]
struct Cli {
    /// TOML config file layered over the defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Scenario manifest, or `naju_default`.
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// Control mode: all, onoff or variable.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Seed list, comma separated.
    #[arg(long, global = true, alias = "seeds")]
    seed: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    show_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one control mode over a scenario for every seed.
    Run,
    /// Run all three modes and write the comparison report.
    Compare,
    /// Replay a preliminary sweep: pe1 (coverage) or pe2 (distance).
    Calibrate { which: String },
    /// Print the effective configuration.
    ShowConfig,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 1,
        Error::Scenario(_) => 2,
        _ => 3,
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "spraysim: error: {e}");
            exit_code(&e)
        }
    }
}

fn effective_config(cli: &Cli) -> Result<SimConfig> {
    let mut cfg = match &cli.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    let overrides = Overrides {
        scenario: cli.scenario.clone(),
        mode: cli.mode.as_deref().map(str::parse::<ControlMode>).transpose()?,
        seeds: cli.seed.as_deref().map(parse_seeds).transpose()?,
        out: cli.out.clone(),
        jobs: cli.jobs,
    };
    cfg.apply(&overrides)?;
    Ok(cfg)
}

fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let cfg = effective_config(&cli)?;
    if cli.show_config || matches!(cli.command, Some(Command::ShowConfig)) {
        return print(stdout, &cfg.to_toml()?);
    }
    match cli.command {
        None => Err(Error::Config(
            "no command given; use run, compare, calibrate or show-config".into(),
        )),
        Some(Command::ShowConfig) => unreachable!("handled above"),
        Some(Command::Run) => cmd_run(&cfg, stdout),
        Some(Command::Compare) => cmd_compare(&cfg, stdout, stderr),
        Some(Command::Calibrate { which }) => {
            let which: Experiment = which.parse()?;
            cmd_calibrate(&cfg, which, stdout)
        }
    }
}

fn print(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn papers_csv(scenario: &Scenario, r: &TrialResult) -> String {
    let mut out = String::from("paper,segment,zone,tag,along,height,distance,r_p\n");
    for p in &r.papers {
        let s = &scenario.papers[p.index];
        out.push_str(&format!(
            "{},{},{},{},{:.3},{:.3},{:.3},{:.4}\n",
            p.index, p.segment, p.zone, p.tag, s.along, s.height, s.distance, p.r_p
        ));
    }
    out
}

fn commands_csv(r: &TrialResult) -> String {
    let mut out = String::from("frame_id,along");
    for n in 0..crate::control::MAX_NOZZLES {
        out.push_str(&format!(",duty_{n}"));
    }
    out.push('\n');
    for f in &r.frame_duties {
        out.push_str(&format!("{},{:.3}", f.frame_id, f.along));
        for d in &f.duties {
            out.push_str(&format!(",{d:.4}"));
        }
        out.push('\n');
    }
    out
}

fn write_trial(dir: &Path, scenario: &Scenario, r: &TrialResult) -> Result<()> {
    ensure_dir(&dir.join("papers"))?;
    write_atomic_str(&dir.join("papers.csv"), &papers_csv(scenario, r))?;
    write_atomic_str(&dir.join("commands.csv"), &commands_csv(r))?;
    if !r.trace.is_empty() {
        let mut trace = String::from(TRACE_HEADER);
        for s in &r.trace {
            push_trace_rows(&mut trace, s);
        }
        write_atomic_str(&dir.join("flow.csv"), &trace)?;
    }
    for (i, paper) in r.rasters.iter().enumerate() {
        let path = dir.join("papers").join(format!("paper_{i:02}.seg"));
        write_atomic(&path, &encode_class_raster(&paper.to_raster()))?;
    }
    let summary = serde_json::json!({
        "mode": r.mode,
        "seed": r.seed,
        "volume_l": r.volume_l,
        "segment_volume_l": r.segment_volume_l,
        "emitted": r.emitted,
        "deposited": r.deposited,
        "papers": r.papers,
    });
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Runtime(format!("cannot encode trial summary: {e}")))?;
    write_atomic_str(&dir.join("summary.json"), &text)
}

fn cmd_run(cfg: &SimConfig, stdout: &mut dyn Write) -> Result<()> {
    let scenario = Scenario::resolve(&cfg.run.scenario)?;
    let trial_cfg = cfg.trial_config(cfg.run.write_traces);
    let frames = prepare_frames(&scenario, &trial_cfg)?;
    let mode = cfg.controller.mode;
    let results = run_all(&scenario, &frames, &trial_cfg, &[mode], &cfg.run.seeds, cfg.run.jobs)?;
    let out = &cfg.run.out;
    ensure_dir(out)?;
    for r in &results {
        write_trial(&out.join(format!("run_{}_seed{}", r.mode, r.seed)), &scenario, r)?;
    }
    let report = summarize(&scenario.name, &results)?;
    report.verify()?;
    let csv = report.to_csv();
    write_atomic_str(&out.join(format!("report_{mode}.csv")), &csv)?;
    write_atomic_str(&out.join(format!("report_{mode}.json")), &report.to_json()?)?;
    print(stdout, &csv)
}

fn cmd_compare(cfg: &SimConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let scenario = Scenario::resolve(&cfg.run.scenario)?;
    let trial_cfg = cfg.trial_config(false);
    let frames = prepare_frames(&scenario, &trial_cfg)?;
    let (report, results) = compare_controls(
        &scenario,
        &frames,
        &trial_cfg,
        &cfg.run.seeds,
        cfg.harness.bleed_tolerance,
        cfg.run.jobs,
    )?;
    let out = &cfg.run.out;
    ensure_dir(out)?;
    let csv = report.to_csv();
    write_atomic_str(&out.join("compare.csv"), &csv)?;
    write_atomic_str(&out.join("compare.json"), &report.to_json()?)?;
    let first_seed: Vec<TrialResult> = results
        .into_iter()
        .filter(|r| r.seed == cfg.run.seeds[0])
        .collect();
    write_atomic_str(&out.join("duty_plot.dat"), &duty_plot_data(&first_seed))?;
    for b in report.bleed.iter().filter(|b| !b.within_tolerance) {
        let _ = writeln!(
            stderr,
            "spraysim: warning: gap segment {} under {} collects {:.2} points, over the {:.2} bleed tolerance",
            b.segment, b.mode, b.mean_rp, report.bleed_tolerance
        );
    }
    print(stdout, &csv)
}

fn cmd_calibrate(cfg: &SimConfig, which: Experiment, stdout: &mut dyn Write) -> Result<()> {
    let (setup, name) = match which {
        Experiment::Pe1 => (&cfg.pe1, "pe1"),
        Experiment::Pe2 => (&cfg.pe2, "pe2"),
    };
    let run = || replicate(which, setup, &cfg.plume, &cfg.valve);
    let table = match cfg.run.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Runtime(format!("cannot start worker pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let out = &cfg.run.out;
    ensure_dir(out)?;
    let csv = table.to_csv();
    write_atomic_str(&out.join(format!("{name}.csv")), &csv)?;
    write_atomic_str(&out.join(format!("{name}.dat")), &table.plot_data())?;
    print(stdout, &csv)
}
