use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sgqed::runner::{
    parse_angle, resolve_layers, run_scenario, run_steady_state, run_wigner, run_wtd, Angle, Overrides, RunPlan,
    ScenarioResult,
};

#[derive(Parser)]
#[command(name = "sgqed", version, about = "Driven Jaynes-Cummings trajectories and master-equation observables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steady state, waiting times and a seeded trajectory ensemble.
    Run(Flags),
    /// Steady state and its diagnostics.
    SteadyState(Flags),
    /// Waiting-time density of atomic clicks.
    Wtd(Flags),
    /// Steady-state field Wigner function.
    Wigner(Flags),
}

#[derive(Args)]
struct Flags {
    /// Flat key-value file with the same keys as these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// fig2, fig3, fig4 or custom.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    g: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    epsilon: Option<f64>,
    /// Local-oscillator phase in [0, pi); accepts forms like `pi/3`.
    #[arg(long, value_parser = angle, allow_negative_numbers = true)]
    theta: Option<f64>,
    /// homodyne, heterodyne or none.
    #[arg(long)]
    detection: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    bandwidth: Option<f64>,
    /// Report atomic clicks (defaults to on when gamma > 0).
    #[arg(long)]
    counting: Option<bool>,
    #[arg(long, allow_negative_numbers = true)]
    tfinal: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    #[arg(long)]
    fock_cutoff: Option<usize>,
    /// Comma-separated snapshot times.
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<f64>>,
    #[arg(long)]
    ntraj: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Keep every k-th integration step in trajectory files.
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    grid_half_width: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    tau_max: Option<f64>,
    #[arg(long)]
    tau_points: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    bin_width: Option<f64>,
    #[arg(long)]
    memory_cap_mb: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn angle(s: &str) -> Result<f64, String> {
    parse_angle(s).ok_or_else(|| format!("cannot parse angle `{s}`"))
}

impl Flags {
    fn plan(self) -> sgqed::Result<RunPlan> {
        let flags = Overrides {
            scenario: self.scenario,
            g: self.g,
            kappa: self.kappa,
            gamma: self.gamma,
            epsilon: self.epsilon,
            theta: self.theta.map(Angle::Number),
            detection: self.detection,
            bandwidth: self.bandwidth,
            counting: self.counting,
            tfinal: self.tfinal,
            dt: self.dt,
            fock_cutoff: self.fock_cutoff,
            snapshots: self.snapshots,
            ntraj: self.ntraj,
            seed: self.seed,
            record_every: self.record_every,
            grid_half_width: self.grid_half_width,
            grid_points: self.grid_points,
            tau_max: self.tau_max,
            tau_points: self.tau_points,
            bin_width: self.bin_width,
            memory_cap_mb: self.memory_cap_mb,
            out: self.out,
        };
        resolve_layers(self.config.as_deref(), flags)
    }
}

fn report(result: &ScenarioResult) {
    let m = &result.manifest;
    println!("wrote {} files to {}", m.files.len() + 1, result.out_dir.display());
    if let Some(ss) = &m.steady_state {
        println!(
            "steady state: residual {:.2e}, <a> = {:.4} {:+.4}i, Bloch ({:.4}, {:.4}, {:.4})",
            ss.residual, ss.field_mean[0], ss.field_mean[1], ss.bloch[0], ss.bloch[1], ss.bloch[2]
        );
    }
    if !m.records.is_empty() {
        println!(
            "{} trajectories; max top-level population {:.2e}, max norm drift {:.2e}",
            m.records.len(),
            m.invariants.max_top_population,
            m.invariants.max_norm_drift
        );
    }
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
    println!("wall time {:.1} s", m.wall_time_s);
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(f) => f.plan().and_then(|p| run_scenario(&p)),
        Command::SteadyState(f) => f.plan().and_then(|p| run_steady_state(&p)),
        Command::Wtd(f) => f.plan().and_then(|p| run_wtd(&p)),
        Command::Wigner(f) => f.plan().and_then(|p| run_wigner(&p)),
    };
    match outcome {
        Ok(result) => {
            report(&result);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
