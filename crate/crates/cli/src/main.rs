use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use clock_squeeze_cli::config::{
    logspace, Format, Scenario, ScenarioConfig, DEFAULT_ALPHA, DESK_N_MEAN, OMEGA_N_MAX,
    FULL_N_MEAN,
};
use clock_squeeze_cli::emit::emit;
use clock_squeeze_cli::scenarios::{run, Table};

#[derive(Parser)]
#[command(name = "clock-squeeze", version, about = "Squeezed Ramsey clock scenarios")]
struct Cli {
    #[command(subcommand)]
    scenario: Command,

    /// Mean atom number (default 1e4 for Monte Carlo, 1e5 for analytic curves)
    #[arg(long, global = true)]
    nbar: Option<f64>,

    /// Total-number variance (default: equal to the mean)
    #[arg(long, global = true)]
    sigma2: Option<f64>,

    /// Squeezing strength gamma = alpha^2 Omega^2 M; repeat for several
    #[arg(long, global = true)]
    gamma: Vec<f64>,

    #[arg(long, global = true, default_value_t = 0.0, allow_negative_numbers = true)]
    theta_min: f64,

    #[arg(long, global = true, default_value_t = std::f64::consts::PI, allow_negative_numbers = true)]
    theta_max: f64,

    #[arg(long, global = true, default_value_t = 181)]
    theta_count: usize,

    /// Number of repeated measurements
    #[arg(long, global = true, default_value_t = 1)]
    m: u64,

    /// Monte Carlo records per gamma (qnd-demo defaults to 1, others to 0)
    #[arg(long, global = true)]
    records: Option<u64>,

    /// Coherent probe amplitude
    #[arg(long, global = true, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,

    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Output file (stdout when omitted)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,

    /// Run Monte Carlo records at 1e5 atoms
    #[arg(long, global = true)]
    paper_scale: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Sensitivity against phase for several squeezing strengths
    Fig1,
    /// Optimal phase and sensitivity against squeezing strength
    Fig2,
    /// One squeezing record: prior, analytic and posterior curves
    QndDemo,
    /// Quantum Fisher information of Fock inputs
    QfiTable,
    /// Sensitivity curves for the given gammas at a single atom number
    Sweep,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

fn build_config(cli: &Cli) -> ScenarioConfig {
    let scenario = match cli.scenario {
        Command::Fig1 => Scenario::Fig1,
        Command::Fig2 => Scenario::Fig2,
        Command::QndDemo => Scenario::QndDemo,
        Command::QfiTable => Scenario::QfiTable,
        Command::Sweep => Scenario::Sweep,
    };
    let mc_n = cli
        .nbar
        .unwrap_or(if cli.paper_scale { FULL_N_MEAN } else { DESK_N_MEAN });
    let analytic_n = cli.nbar.unwrap_or(FULL_N_MEAN);
    let gamma_list = if !cli.gamma.is_empty() {
        cli.gamma.clone()
    } else {
        match scenario {
            Scenario::Fig1 => [0.0, 1e-5, 1e-4, 1e-3, 1e-2]
                .iter()
                .map(|g| g * std::f64::consts::PI)
                .collect(),
            Scenario::Fig2 => logspace(1e-8, 1e-1, 15),
            Scenario::QndDemo => vec![10.0 / (2.0 * mc_n)],
            Scenario::QfiTable | Scenario::Sweep => vec![0.0],
        }
    };
    let records = cli
        .records
        .unwrap_or(if scenario == Scenario::QndDemo { 1 } else { 0 });
    ScenarioConfig {
        scenario,
        n_mean: mc_n,
        analytic_n_mean: analytic_n,
        sigma2: cli.sigma2,
        gamma_list,
        theta_grid: (cli.theta_min, cli.theta_max, cli.theta_count),
        m: cli.m,
        records,
        alpha: cli.alpha,
        omega_n_max: OMEGA_N_MAX,
        seed: cli.seed,
        format: match cli.format {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = build_config(&cli);
    let result = run(&cfg).and_then(|out| {
        for note in &out.notes {
            eprintln!("{note}");
        }
        match &out.table {
            Table::Curves(rows) => emit(rows, &cfg, cli.out.as_deref()),
            Table::Qfi(rows) => emit(rows, &cfg, cli.out.as_deref()),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
