//! `forgecut`: demos, verification suites and the distributed harness.
//!
//! Exit codes: 0 success, 2 input error, 3 verification failure, 4 transport
//! failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "forgecut",
    version,
    about = "Circuit cutting by entanglement forging"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Checks Bell and Schmidt pseudomixtures against their target states.
    VerifyForging(VerifyForgingArgs),
    /// Cuts every nonlocal gate and evaluates an observable.
    Cut(CutArgs),
    /// Teleports a single-qubit state through the forged Bell pair.
    TeleportDemo(TeleportArgs),
    /// Expands a two-qubit gate in the control Pauli basis and runs its
    /// teleportation.
    GateTeleportCheck(GateArgs),
    /// Runs one worker on a TCP port for a single session.
    Serve(ServeArgs),
    /// Runs a coordinator session against two workers.
    Coordinate(CoordinateArgs),
    /// Schema audit of a transcript file.
    Audit(TranscriptArgs),
    /// Reruns a transcript against its recorded worker replies.
    Replay(TranscriptArgs),
    /// Readout-error mitigation of a cut circuit.
    MitigateDemo(MitigateArgs),
    /// Writes a seeded random two-party circuit.
    Generate(GenerateArgs),
}

/// Options shared by every command that runs something.
#[derive(Args, Debug, Clone)]
pub struct RunConfig {
    /// RNG seed; every result is a function of it.
    #[arg(long, env = "FORGECUT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Also write the result as JSON to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyForgingArgs {
    /// Extra Schmidt state to check, as comma-separated weights λ_i².
    #[arg(long, value_delimiter = ',')]
    pub schmidt: Option<Vec<f64>>,
    /// Perturbs one Bell coefficient so the reconstruction check fails.
    #[arg(long, hide = true)]
    pub corrupt: bool,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutMode {
    Exact,
    Sample,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Owner {
    Alice,
    Bob,
}

#[derive(Args, Debug)]
pub struct CutArgs {
    #[arg(value_enum)]
    pub mode: CutMode,
    #[arg(long)]
    pub circuit: PathBuf,
    /// Pauli observable, e.g. `ZZ` or `0.5*X0 Z2`.
    #[arg(long)]
    pub observable: String,
    #[arg(long, default_value_t = 100_000)]
    pub shots: u64,
    /// Party that owns the cut wires.
    #[arg(long, value_enum, default_value_t = Owner::Alice)]
    pub owner: Owner,
    /// Compare with the full-circuit simulation.
    #[arg(long)]
    pub oracle: bool,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Args, Debug)]
pub struct TeleportArgs {
    /// Polar angle of the Bloch vector.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub theta: f64,
    /// Azimuthal angle of the Bloch vector.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phi: f64,
    /// Bloch vector length; below 1 gives a mixed state.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Args, Debug)]
pub struct GateArgs {
    /// Gate name: cnot, cz, swap, crz, controlled-rz, ...
    pub gate: String,
    /// Gate parameters, e.g. the angle of crz.
    #[arg(allow_hyphen_values = true)]
    pub params: Vec<f64>,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, value_enum)]
    pub role: Owner,
    #[arg(long, env = "FORGECUT_LISTEN", default_value = "127.0.0.1:7400")]
    pub listen: String,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransportKind {
    Loopback,
    Tcp,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SessionKind {
    Exact,
    State,
    Sample,
}

#[derive(Args, Debug)]
pub struct CoordinateArgs {
    #[arg(long, value_enum, default_value_t = TransportKind::Loopback)]
    pub transport: TransportKind,
    /// Worker addresses, Alice first then Bob (tcp only).
    #[arg(long)]
    pub connect: Vec<String>,
    #[arg(long, value_enum, default_value_t = SessionKind::Exact)]
    pub mode: SessionKind,
    #[arg(long)]
    pub circuit: PathBuf,
    #[arg(long)]
    pub observable: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    pub shots: u64,
    /// Write the session transcript here.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    #[arg(long)]
    pub oracle: bool,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Args, Debug)]
pub struct TranscriptArgs {
    pub path: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MitigationMode {
    Exact,
    Sampled,
}

#[derive(Args, Debug)]
pub struct MitigateArgs {
    /// Symmetric readout flip probability on every measured bit.
    #[arg(long, default_value_t = 0.05, allow_hyphen_values = true)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub shots: u64,
    #[arg(long, value_enum, default_value_t = MitigationMode::Exact)]
    pub mode: MitigationMode,
    /// Defaults to the bundled Bell circuit.
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    #[arg(long, default_value = "ZZ")]
    pub observable: String,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 2)]
    pub alice: usize,
    #[arg(long, default_value_t = 2)]
    pub bob: usize,
    #[arg(long, default_value_t = 1)]
    pub gates: usize,
    #[arg(long, env = "FORGECUT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Circuit file to write; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<(), Failure> = match cli.command {
        Command::VerifyForging(a) => commands::verify_forging(&a),
        Command::Cut(a) => commands::cut(&a),
        Command::TeleportDemo(a) => commands::teleport_demo(&a),
        Command::GateTeleportCheck(a) => commands::gate_teleport_check(&a),
        Command::Serve(a) => commands::serve(&a),
        Command::Coordinate(a) => commands::coordinate(&a),
        Command::Audit(a) => commands::audit(&a),
        Command::Replay(a) => commands::replay(&a),
        Command::MitigateDemo(a) => commands::mitigate_demo(&a),
        Command::Generate(a) => commands::generate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
