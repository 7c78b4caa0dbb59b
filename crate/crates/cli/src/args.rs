use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lrk_core::format::fingerprint;
use lrk_core::quadrature::QuadratureConfig;
use lrk_core::resolvent::Side;
use lrk_core::Potential;

use crate::error::{usage, CliError};
use crate::parse::{parse_grid, parse_side, potential_canonical, Grid};

#[derive(Debug, Parser)]
#[command(
    name = "lrk",
    version,
    about = "Lattice Green's functions, threshold states and limiting-absorption diagnostics for H0 + V on Z^d"
)]
pub struct Cli {
    /// Worker threads for the numerical kernels.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Report destination (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Exit with status 3 when any entry is flagged as unconverged.
    #[arg(long, global = true)]
    pub strict: bool,

    /// Accept kernel tables with unconverged entries.
    #[arg(long, global = true)]
    pub allow_unconverged: bool,

    /// Torus grid points per axis for the singular quadrature.
    #[arg(long = "N", global = true, default_value_t = 64)]
    pub n: usize,

    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn quadrature(&self) -> Result<QuadratureConfig, CliError> {
        let q = QuadratureConfig { n: self.n, ..QuadratureConfig::default() };
        q.validate()?;
        Ok(q)
    }

    /// Fingerprint of everything that determines the report contents.
    /// Thread count and output path are excluded, and a potential enters
    /// through its parsed entries rather than the way it was given.
    pub fn config_fingerprint(&self, quad: &QuadratureConfig, potential: Option<&Potential>, extra: &str) -> String {
        let mut cmd = self.command.clone();
        let canonical = potential.map(potential_canonical);
        match &mut cmd {
            Command::Resonance(a) => a.potential = canonical.unwrap_or_default(),
            Command::Lap(a) => a.potential = canonical,
            _ => {}
        }
        fingerprint(&format!("{cmd:?}|{}|{extra}", quad.canonical()))
    }
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Tabulate the kernel K_l of H0^{-l/2} on a box.
    Kernel(KernelArgs),
    /// Zero-energy threshold couplings and states of a finitely supported potential.
    Resonance(ResonanceArgs),
    /// Compare both sides of the Stone formula.
    Stone(StoneArgs),
    /// Weighted resolvent norms on a lambda grid, or the Birman-Schwinger nullity scan.
    Lap(LapArgs),
    /// Lattice-sum and weighted-norm inequality audits.
    Audit(AuditArgs),
}

#[derive(Clone, Debug, Args)]
pub struct KernelArgs {
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    #[arg(long, default_value_t = 2.0)]
    pub l: f64,
    /// Box radius.
    #[arg(long = "L", default_value_t = 16)]
    pub radius: i64,
}

#[derive(Clone, Debug, Args)]
pub struct ResonanceArgs {
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// `x1,..,xd:value` entries separated by `;`, a file of `x1 .. xd value`
    /// lines, or `none`.
    #[arg(long)]
    pub potential: String,
    /// Radius of the dense box holding each state (default depends on d).
    #[arg(long = "L")]
    pub radius: Option<i64>,
    /// Shell range `r1:r2` for the decay fit and asymptote check
    /// (default: the upper half of the box).
    #[arg(long)]
    pub shells: Option<String>,
}

#[derive(Clone, Debug, Args)]
pub struct StoneArgs {
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    #[arg(long, conflicts_with = "grid")]
    pub lambda: Option<f64>,
    /// `lo:hi:step`.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<Grid>,
    #[arg(long, default_value = "+", value_parser = parse_side, allow_hyphen_values = true)]
    pub side: Side,
    /// `delta0`, `delta0+e1`, or `x1,..,xd:value` entries separated by `;`.
    #[arg(long, default_value = "delta0")]
    pub f: String,
    /// Level-set mesh points per chart axis.
    #[arg(long, default_value_t = 400)]
    pub mesh: usize,
    /// Gradient cutoff below which mesh samples are excised.
    #[arg(long, default_value_t = lrk_core::levelset::DEFAULT_CUTOFF)]
    pub cutoff: f64,
    /// Relative-gap tolerance (default 1e-2, or 5e-2 at thresholds).
    #[arg(long)]
    pub tol: Option<f64>,
}

impl StoneArgs {
    pub fn lambdas(&self) -> Result<Vec<f64>, CliError> {
        match (&self.lambda, &self.grid) {
            (Some(l), None) => Ok(vec![*l]),
            (None, Some(g)) => Ok(g.0.clone()),
            _ => usage("give exactly one of --lambda or --grid"),
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct LapArgs {
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// `lo:hi:step`.
    #[arg(long, value_parser = parse_grid, default_value = "0.25:11.75:0.25")]
    pub grid: Grid,
    #[arg(long, default_value = "+", value_parser = parse_side, allow_hyphen_values = true)]
    pub side: Side,
    /// Potential as for `resonance`; the free resolvent when absent.
    #[arg(long)]
    pub potential: Option<String>,
    /// Weight exponent.
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    /// Box radii, increasing.
    #[arg(long, value_delimiter = ',', default_value = "12,16")]
    pub boxes: Vec<i64>,
    /// Largest accepted relative growth between the last two boxes.
    #[arg(long, default_value_t = 0.10)]
    pub growth_tol: f64,
    /// Report the smallest singular value of the Birman-Schwinger system instead of norms.
    #[arg(long)]
    pub nullity: bool,
    /// Smallest accepted singular value in nullity mode.
    #[arg(long, default_value_t = 0.5)]
    pub sigma_tol: f64,
    /// Cap on Lanczos steps per norm.
    #[arg(long, default_value_t = 60)]
    pub iters: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AuditRegime {
    /// Growth of the weighted convolution sum in one of its four regimes.
    Intcal,
    /// Dyadic envelope of |K_l(x)| <x>^{d-l}.
    Kernel,
    /// Weighted norm of H0^{-1} across boxes.
    Hls,
    /// A single convolution sum with its certified tail.
    Sum,
}

#[derive(Clone, Debug, Args)]
pub struct AuditArgs {
    #[arg(long, value_enum)]
    pub regime: AuditRegime,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    #[arg(long, default_value_t = 2.0)]
    pub k: f64,
    #[arg(long, default_value_t = 2.0)]
    pub l: f64,
    /// Envelope slack in the borderline regime.
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub delta: f64,
    /// Largest sampled |x| for `intcal`.
    #[arg(long = "R", default_value_t = 64)]
    pub r_max: i64,
    /// Kernel box radius for `kernel`.
    #[arg(long = "L", default_value_t = 40)]
    pub radius: i64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Box radii for `hls`, increasing.
    #[arg(long, value_delimiter = ',', default_value = "16,24")]
    pub boxes: Vec<i64>,
    /// Largest accepted relative growth for `hls`.
    #[arg(long, default_value_t = 0.05)]
    pub tol: f64,
    /// Also run the Fourier-side estimate for `hls` (d = 3).
    #[arg(long)]
    pub oracle: bool,
    /// Largest accepted relative gap to the Fourier-side estimate.
    #[arg(long, default_value_t = 0.10)]
    pub oracle_tol: f64,
    /// Evaluation site for `sum`, comma separated (default: the origin).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Vec<i64>,
    /// Cube radius of the explicit part of `sum`.
    #[arg(long, default_value_t = 256)]
    pub tail: i64,
    /// Cap on Lanczos steps per norm.
    #[arg(long, default_value_t = 60)]
    pub iters: usize,
}
