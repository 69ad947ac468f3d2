use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use photonpool::engine::units::{parse_quantity, Quantity};
use photonpool_cli::netlists::{HomMode, HomSource};
use photonpool_cli::theory::MziSettings;
use photonpool_cli::{cmd_hom, cmd_mzi, cmd_run, CommonOptions, HomOptions, MziOptions, Report};

#[derive(Parser)]
#[command(name = "photonpool", version, about = "Fock-basis discrete-event simulator for QKD optics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mach-Zehnder phase sweep compared against (1 + cos φ)/2.
    Mzi(MziArgs),
    /// Hong-Ou-Mandel dip over polarization or delay.
    Hom(HomArgs),
    /// Run the experiment declared in a netlist file.
    Run(RunArgs),
}

#[derive(Args)]
struct Common {
    /// Trials per sweep point.
    #[arg(long)]
    trials: Option<u64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "PHOTONPOOL_OUT", default_value = "photonpool-out")]
    out: PathBuf,
    /// Report exact probabilities instead of sampling.
    #[arg(long)]
    analytic: bool,
}

impl Common {
    fn options(&self, default_trials: Option<u64>, default_seed: Option<u64>) -> CommonOptions {
        CommonOptions {
            trials: self.trials.or(default_trials),
            seed: self.seed.or(default_seed),
            out: self.out.clone(),
            analytic: self.analytic,
        }
    }
}

fn angle(s: &str) -> Result<f64, String> {
    quantity(s, Quantity::Angle)
}

fn time(s: &str) -> Result<f64, String> {
    quantity(s, Quantity::Time)
}

fn loss(s: &str) -> Result<f64, String> {
    quantity(s, Quantity::Loss)
}

fn angular_frequency(s: &str) -> Result<f64, String> {
    quantity(s, Quantity::AngularFrequency)
}

/// Bare numbers are taken in SI units (dB for losses).
fn quantity(s: &str, kind: Quantity) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(x) => Ok(x),
        Err(_) => parse_quantity(s, kind),
    }
}

#[derive(Args)]
struct MziArgs {
    #[arg(long, value_parser = angle, default_value = "0", allow_hyphen_values = true)]
    phase_start: f64,
    #[arg(long, value_parser = angle, default_value = "2 pi", allow_hyphen_values = true)]
    phase_end: f64,
    #[arg(long, default_value_t = 32)]
    points: usize,
    /// Transmittance of the first beam splitter.
    #[arg(long, default_value_t = 0.5)]
    bs1_t: f64,
    /// Transmittance of the second beam splitter.
    #[arg(long, default_value_t = 0.5)]
    bs2_t: f64,
    /// Attenuator in the upper arm, dB.
    #[arg(long, value_parser = loss, default_value = "0")]
    arm1_loss: f64,
    /// Insertion loss of the phase modulator arm, dB.
    #[arg(long, value_parser = loss, default_value = "0")]
    arm2_loss: f64,
    /// Detection efficiency of both detectors.
    #[arg(long, default_value_t = 1.0)]
    efficiency: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum HomModeArg {
    Pol,
    Delay,
}

#[derive(Args)]
struct HomArgs {
    #[arg(long, value_enum, default_value = "pol")]
    mode: HomModeArg,
    /// Sweep start: an angle in pol mode, a time in delay mode.
    #[arg(long, allow_hyphen_values = true)]
    start: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    end: Option<String>,
    #[arg(long)]
    points: Option<usize>,
    /// Spectral width σ, rad/s or a unit string such as "65 GHz".
    #[arg(long, value_parser = angular_frequency)]
    sigma: Option<f64>,
    /// Use weak-coherent sources with this mean photon number.
    #[arg(long)]
    mu: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RunArgs {
    /// Netlist file.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
}

fn hom_options(args: &HomArgs) -> Result<HomOptions, String> {
    let mode = match args.mode {
        HomModeArg::Pol => HomMode::Polarization,
        HomModeArg::Delay => HomMode::Delay,
    };
    let mut opts = HomOptions::new(mode, args.common.out.clone());
    let parse = |s: &str| match mode {
        HomMode::Polarization => angle(s),
        HomMode::Delay => time(s),
    };
    if let Some(s) = &args.start {
        opts.start = parse(s)?;
    }
    if let Some(s) = &args.end {
        opts.end = parse(s)?;
    }
    if let Some(p) = args.points {
        opts.points = p;
    }
    if let Some(s) = args.sigma {
        opts.sigma = s;
    }
    if let Some(mu) = args.mu {
        opts.source = HomSource::WeakCoherent { mean_photon_number: mu };
    }
    opts.common = args.common.options(Some(10_000), Some(1));
    Ok(opts)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let text = e.render().to_string();
            eprint!("{text}");
            if !text.contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Mzi(a) => {
            let mut opts = MziOptions::new(a.common.out.clone());
            opts.phase_start = a.phase_start;
            opts.phase_end = a.phase_end;
            opts.points = a.points;
            opts.settings = MziSettings {
                bs1_t: a.bs1_t,
                bs2_t: a.bs2_t,
                arm1_loss_db: a.arm1_loss,
                arm2_loss_db: a.arm2_loss,
                efficiency: a.efficiency,
            };
            opts.common = a.common.options(Some(10_000), Some(1));
            cmd_mzi(&opts)
        }
        Command::Hom(a) => match hom_options(a) {
            Ok(opts) => cmd_hom(&opts),
            Err(e) => Err(photonpool_cli::CliError::Usage(e)),
        },
        Command::Run(a) => cmd_run(&a.config, &a.common.options(None, None)),
    };
    match result {
        Ok(Report { summary, passed, .. }) => {
            println!("{summary}");
            match passed {
                Some(false) => ExitCode::from(1),
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
