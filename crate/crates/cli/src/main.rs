//! `mcav`: command-line front end for the membrane-cavity toolkit.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit codes: 0 success, 1 runtime or precondition failure, 2 usage error,
/// 3 outputs written but a fit did not converge.
#[derive(Parser, Debug)]
#[command(
    name = "mcav",
    version,
    about = "Fiber-cavity / diamond-membrane simulation and analysis"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Output directory.
    #[arg(long, global = true, env = "MCAV_OUT_DIR", default_value = "mcav-out")]
    pub out: PathBuf,
    /// Seed for every random draw a command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct ModelFiles {
    /// Assembly JSON; the built-in device when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Emitter JSON (zpl_wavelength_nm, host_index, debye_waller, emitter_quality, implant_depth_nm).
    #[arg(long)]
    pub emitter: Option<PathBuf>,
    /// Loss budget JSON (t1_ppm, t2_ppm, loss1_ppm, loss2_ppm, scattering_ppm, other_ppm).
    #[arg(long)]
    pub budget: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Mode geometry, finesse, Q and membrane loss at a resonance.
    Metrics {
        #[command(flatten)]
        files: ModelFiles,
        /// Wavelength to tune the fiber gap to (default: emitter line).
        #[arg(long)]
        wavelength: Option<f64>,
    },
    /// Transmission map, resonance list and dispersion fit.
    Dispersion(DispersionArgs),
    /// Purcell factor and predicted lifetime over fiber gaps.
    Purcell(PurcellArgs),
    /// Lorentzian or equal-width doublet fit of a spectrum CSV (x, y[, sigma]).
    FitSpectrum {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = SpectrumModel::Doublet)]
        model: SpectrumModel,
    },
    /// Decay-model fits of a histogram CSV (t_ns, counts).
    FitDecay {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = DecayModel::All)]
        model: DecayModel,
    },
    /// v0 + c·T³ fit of a temperature series CSV (T_K, value[, sigma]).
    FitTdep {
        #[arg(long)]
        data: PathBuf,
    },
    /// τ0 and η_QE from lifetimes vs effective length (l_eff_um, tau_ns, sigma_ns).
    FitLifetime {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        files: ModelFiles,
        /// Pin η_QE instead of fitting it.
        #[arg(long)]
        eta_fixed: Option<f64>,
    },
    /// Peak detection and finesse of a length scan CSV (x, transmission).
    AnalyzeScan {
        #[arg(long)]
        data: PathBuf,
        /// Minimum prominence as a fraction of the trace range.
        #[arg(long, default_value_t = 0.05)]
        prominence: f64,
        /// Peaks below this fraction of the tallest are treated as higher-order modes.
        #[arg(long, default_value_t = 0.6)]
        rel_height: f64,
    },
    /// Side-of-fringe length deviation, suppression and noise spectra.
    AnalyzeLock(LockArgs),
    /// Seeded fixture generator.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct DispersionArgs {
    #[command(flatten)]
    pub files: ModelFiles,
    /// Measured resonances CSV (gap_proxy_nm, wavelength_nm); self-generated from the config when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 11_000.0)]
    pub gap_start: f64,
    #[arg(long, default_value_t = 12_500.0)]
    pub gap_stop: f64,
    #[arg(long, default_value_t = 31)]
    pub gap_steps: usize,
    #[arg(long, default_value_t = 700.0)]
    pub lambda_min: f64,
    #[arg(long, default_value_t = 780.0)]
    pub lambda_max: f64,
    #[arg(long, default_value_t = 801)]
    pub lambda_steps: usize,
    /// Fit with the parasitic gap frozen at zero as the primary result.
    #[arg(long)]
    pub no_second_gap: bool,
    /// Skip the dispersion fit.
    #[arg(long)]
    pub no_fit: bool,
    #[arg(long, default_value_t = 1400.0)]
    pub guess_membrane_nm: f64,
    #[arg(long, default_value_t = 200.0)]
    pub guess_gap2_nm: f64,
    /// Wavelength noise of self-generated data, nm.
    #[arg(long, default_value_t = 0.05)]
    pub synth_noise_nm: f64,
    /// Offset between gap proxy and true gap in self-generated data, nm.
    #[arg(long, default_value_t = 0.0)]
    pub synth_offset_nm: f64,
}

#[derive(Args, Debug)]
pub struct PurcellArgs {
    #[command(flatten)]
    pub files: ModelFiles,
    /// Comma-separated fiber gaps, nm.
    #[arg(long, conflicts_with = "gap_range")]
    pub gaps: Option<String>,
    /// start:stop:step in nm.
    #[arg(long, default_value = "8000:42000:368.625")]
    pub gap_range: String,
    #[arg(long, default_value_t = 1.36)]
    pub tau0: f64,
    #[arg(long, default_value_t = 0.51)]
    pub eta: f64,
    /// Print β = F_p/(1 + F_p) for this Purcell factor and exit.
    #[arg(long)]
    pub fp: Option<f64>,
}

#[derive(Args, Debug)]
pub struct LockArgs {
    /// Locked trace CSV (t_s, transmission).
    #[arg(long)]
    pub locked: PathBuf,
    /// Unlocked trace CSV (t_s, transmission).
    #[arg(long)]
    pub unlocked: PathBuf,
    /// Lock metadata JSON (wavelength_nm, finesse, setpoint_fraction, peak_transmission, clip_fraction).
    #[arg(long, conflicts_with_all = ["wavelength", "finesse"])]
    pub meta: Option<PathBuf>,
    #[arg(long, default_value_t = 780.0)]
    pub wavelength: f64,
    #[arg(long, default_value_t = 150.0)]
    pub finesse: f64,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub kind: SynthKind,
    /// Sample count for lock traces (rounded to a power of two).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Assembly JSON used by `dispersion` and `lifetimes`.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumModel {
    Lorentz,
    Doublet,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayModel {
    Mono,
    Kohlrausch,
    Emg,
    All,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Doublet,
    Decay,
    Tdep,
    Lifetimes,
    Scan,
    Lock,
    Dispersion,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(report) => {
            match report.outputs.commit(&cli.common.out) {
                Ok(paths) => {
                    print!("{}", report.summary);
                    for p in paths {
                        println!("wrote {}", p.display());
                    }
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(1);
                }
            }
            if report.converged {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: at least one fit did not converge");
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<commands::UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
