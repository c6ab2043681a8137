use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fieldprep::digitize::DEFAULT_AMPLITUDE_BUDGET;
use fieldprep::interacting::PiMode;
use fieldprep::{Boundary, GradientStencil, LatticeSpec};
use serde::Serialize;

use crate::CliError;

#[derive(Parser, Debug, Serialize)]
#[command(
    name = "fieldprep",
    version,
    about = "Ground-state preparation circuits for 1D lattice scalar fields"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Directory for output files and the run manifest; results go to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryArg {
    Periodic,
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StencilArg {
    S1,
    S3,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompositionArg {
    /// Plain θ angles, no reorganization.
    Theta,
    Full,
    Sitewise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PiModeArg {
    Spectral,
    CentralDifference,
}

impl From<PiModeArg> for PiMode {
    fn from(p: PiModeArg) -> Self {
        match p {
            PiModeArg::Spectral => PiMode::SpectralPeriodic,
            PiModeArg::CentralDifference => PiMode::CentralDifference,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelArg {
    Bessel,
    PowerExp,
    PureExp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    /// Infidelity against the largest control count kept.
    Hscan,
    /// α versus θ truncation over an (h_max, tau) grid.
    Budget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Render {
    Text,
    Qasm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Target {
    #[value(name = "fig1")]
    Fig1,
    #[value(name = "fig2")]
    Fig2,
    #[value(name = "fig4")]
    Fig4,
    #[value(name = "fig5")]
    Fig5,
    #[value(name = "fig6")]
    Fig6,
    #[value(name = "table1")]
    Table1,
    #[value(name = "appendixF-K")]
    AppendixFK,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct LatticeArgs {
    /// Number of lattice sites N.
    #[arg(long)]
    pub sites: Option<usize>,
    /// Lattice mass m̂.
    #[arg(long, allow_negative_numbers = true)]
    pub mass: Option<f64>,
    /// Qubits per site n_Q.
    #[arg(long, default_value_t = 2)]
    pub qubits: u32,
    /// Field cutoff φ_max.
    #[arg(long, default_value_t = 3.5, allow_negative_numbers = true)]
    pub phimax: f64,
    /// Quartic coupling λ.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub coupling: f64,
    /// Defaults to periodic, or open for `interacting`.
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryArg>,
    #[arg(long, value_enum, default_value_t = StencilArg::S1)]
    pub stencil: StencilArg,
    /// Largest number of amplitudes any state may hold.
    #[arg(long, default_value_t = DEFAULT_AMPLITUDE_BUDGET)]
    pub budget: u64,
}

impl LatticeArgs {
    pub fn spec(&self, default_boundary: Boundary) -> Result<LatticeSpec, CliError> {
        let n = self
            .sites
            .ok_or_else(|| CliError::usage("--sites is required"))?;
        let m = self.mass.ok_or_else(|| CliError::usage("--mass is required"))?;
        let boundary = match self.boundary {
            Some(BoundaryArg::Periodic) => Boundary::Periodic,
            Some(BoundaryArg::Open) => Boundary::Open,
            None => default_boundary,
        };
        let stencil = match self.stencil {
            StencilArg::S1 => GradientStencil::s1(),
            StencilArg::S3 => GradientStencil::s3(),
            StencilArg::Zero => GradientStencil::zero(),
        };
        let spec = LatticeSpec::new(n, m)
            .with_qubits(self.qubits)
            .with_phi_max(self.phimax)
            .with_coupling(self.coupling)
            .with_boundary(boundary)
            .with_stencil(stencil);
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Free-field kernel K, mode energies and optional two-point table.
    Kmatrix {
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Also tabulate ⟨φ_0 φ_r⟩ in this form.
        #[arg(long, value_parser = ["finite_lattice", "infinite_volume_lattice", "continuum", "asymptotic"])]
        two_point: Option<String>,
    },
    /// Decay of |K|, two-point function, mutual information and negativity with separation.
    Correlations {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, default_value_t = 15)]
        rmin: usize,
        #[arg(long, default_value_t = 30)]
        rmax: usize,
    },
    /// Digitized free ground state written in the binary state format.
    Groundstate {
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Path of the state file.
        #[arg(long)]
        state: PathBuf,
    },
    /// Rotation angles of the ground state (or of a saved state).
    Angles {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, value_enum, default_value_t = DecompositionArg::Sitewise)]
        decomposition: DecompositionArg,
        /// Read the state from this file instead of building the free ground state.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Drop rotations by control count, magnitude or count and report the fidelity.
    Truncate {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, value_enum, default_value_t = DecompositionArg::Sitewise)]
        decomposition: DecompositionArg,
        #[arg(long)]
        hmax: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        max_rotations: Option<usize>,
    },
    /// Fidelity grids over truncation parameters, with exponential fits.
    FidelityScan {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, value_enum, default_value_t = ScanMode::Hscan)]
        mode: ScanMode,
        #[arg(long, value_enum, default_value_t = DecompositionArg::Full)]
        decomposition: DecompositionArg,
        /// Control counts for `hscan`.
        #[arg(long, value_delimiter = ',', default_values_t = [4usize, 6, 8, 10, 12, 14])]
        h: Vec<usize>,
        /// h_max values for `budget`.
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3, 4, 5])]
        hmax: Vec<usize>,
        /// tau values for `budget`.
        #[arg(long, value_delimiter = ',', default_values_t = [0.1f64, 0.03, 0.01, 0.001])]
        tau: Vec<f64>,
    },
    /// Largest |α| at each control distance, with a decay fit.
    Envelope {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, value_enum, default_value_t = DecompositionArg::Sitewise)]
        decomposition: DecompositionArg,
        #[arg(long, value_enum, default_value_t = ModelArg::Bessel)]
        model: ModelArg,
        /// Power p of the c·e^{−Mr}/r^p model.
        #[arg(long, default_value_t = 1.5)]
        power: f64,
        #[arg(long, default_value_t = 1)]
        rmin: usize,
        #[arg(long)]
        rmax: Option<usize>,
    },
    /// Lowest even and odd states of the λφ⁴ Hamiltonian by Lanczos.
    Interacting {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, value_enum, default_value_t = PiModeArg::Spectral)]
        pi_mode: PiModeArg,
        #[arg(long, value_enum, default_value_t = DecompositionArg::Full)]
        decomposition: DecompositionArg,
        /// Lanczos residual target; far-distance α angles need well below 1e-8.
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
        #[arg(long, default_value_t = 2000)]
        max_iterations: usize,
        /// Write both states into the output directory.
        #[arg(long)]
        save_states: bool,
    },
    /// Render a circuit from a schedule file or from the free ground state.
    Emit {
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Schedule JSON as written by `angles`.
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = DecompositionArg::Sitewise)]
        decomposition: DecompositionArg,
        #[arg(long, value_enum, default_value_t = Render::Text)]
        render: Render,
    },
    /// Fixed-parameter reference datasets.
    Reproduce {
        #[arg(value_enum)]
        target: Target,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Kmatrix { .. } => "kmatrix",
            Command::Correlations { .. } => "correlations",
            Command::Groundstate { .. } => "groundstate",
            Command::Angles { .. } => "angles",
            Command::Truncate { .. } => "truncate",
            Command::FidelityScan { .. } => "fidelity-scan",
            Command::Envelope { .. } => "envelope",
            Command::Interacting { .. } => "interacting",
            Command::Emit { .. } => "emit",
            Command::Reproduce { .. } => "reproduce",
        }
    }
}
