//! `rdlab`: run the group laboratory's checks from a config file.
//!
//! Exit status is 0 when every check passed, 1 when an exact identity
//! failed or an asserted inequality was violated, and 2 on usage, config
//! or resource errors.

mod commands;
mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use rdlab::config::{ExperimentConfig, ReportFormat};
use rdlab::group::Descriptor;

use commands::{CliError, Runner, COMMANDS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Command {
    Growth,
    RdProfile,
    Opnorm,
    Section,
    Cocycles,
    DecomposeCheck,
    LengthIneq,
    Distortion,
    AutGrowth,
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Growth => "growth",
            Command::RdProfile => "rd-profile",
            Command::Opnorm => "opnorm",
            Command::Section => "section",
            Command::Cocycles => "cocycles",
            Command::DecomposeCheck => "decompose-check",
            Command::LengthIneq => "length-ineq",
            Command::Distortion => "distortion",
            Command::AutGrowth => "aut-growth",
            Command::All => "all",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Parser, Debug)]
#[command(
    name = "rdlab",
    version,
    about = "Word metrics, operator norms and extension checks on finite balls"
)]
struct Args {
    /// Subcommand to run; `all` runs every subcommand that applies to the group.
    #[arg(value_enum, required_unless_present = "print_config")]
    command: Option<Command>,
    /// Experiment config file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for report files.
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: Option<u64>,
    /// Overrides the ball, section and automorphism radii.
    #[arg(long)]
    radius: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Group descriptor such as `Heisenberg` or `BS1m m=2`.
    #[arg(long)]
    group: Option<String>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

fn load_config(args: &Args) -> Result<ExperimentConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            ExperimentConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(g) = &args.group {
        cfg.descriptor = Descriptor::parse(g).map_err(|e| format!("--group: {e}"))?;
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(r) = args.radius {
        if r == 0 {
            return Err("--radius: expected a positive integer".into());
        }
        cfg.ball_radius = r;
        cfg.section_radius = r;
        cfg.aut_radius = r;
    }
    if let Some(f) = args.format {
        cfg.format = match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        };
    }
    Ok(cfg)
}

fn run(args: &Args) -> Result<bool, CliError> {
    let cfg = load_config(args).map_err(CliError::Usage)?;
    if args.print_config {
        print!("{}", cfg.to_text());
        return Ok(true);
    }
    let command = args.command.expect("clap requires a command");
    let digest = cfg.digest();
    let (out, format) = (PathBuf::from(&cfg.out), cfg.format);
    let cache = std::env::var_os("RDLAB_CACHE_DIR").map(PathBuf::from);
    let runner = Runner::new(cfg, cache)?;
    fs::create_dir_all(&out).map_err(|e| CliError::Usage(format!("{}: {e}", out.display())))?;

    let names: Vec<&str> = match command {
        Command::All => COMMANDS.to_vec(),
        c => vec![c.name()],
    };
    let mut ok = true;
    for name in names {
        let start = Instant::now();
        let report = match runner.run(name) {
            Ok(r) => r,
            Err(CliError::Unsupported(why)) if command == Command::All => {
                println!("[{name}]\nskipped: {why}");
                continue;
            }
            Err(e) => return Err(e),
        };
        let path = out.join(report.file_name(format));
        fs::write(&path, report.render(format, &digest))
            .map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
        print!("{}", report.summary_text());
        eprintln!("{name}: {:.2?}", start.elapsed());
        ok &= report.ok;
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("rdlab: {e}");
            ExitCode::from(2)
        }
    }
}
