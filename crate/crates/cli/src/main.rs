use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sao_adapter::{run_loop, AdapterClient, Baseline, RemotePlanner, RunOutput, Server};
use sao_cli::{CliError, ExperimentPlan, Transport};
use sao_core::{DetectionAlgorithm, Framework, SelectionMethod};

#[derive(Parser)]
#[command(
    name = "sao",
    version,
    about = "Self-aware optimization of platooning coordination strategies"
)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment cell: the framework (or a baseline) against the simulator, per seed.
    Run {
        #[arg(long)]
        ddm: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// RuleBased, OPTICS, DBSCAN or kMeans. Defaults to the DDM's algorithm.
        #[arg(long, value_parser = parse_detection)]
        detection: Option<DetectionAlgorithm>,
        /// hypervolume or threshold. Defaults to the DDM's method.
        #[arg(long, value_parser = parse_trigger)]
        trigger: Option<SelectionMethod>,
        /// BestDistance, BestVelocity or Rules. Runs without the framework.
        #[arg(long, value_parser = parse_baseline)]
        baseline: Option<Baseline>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Route observations and decisions through the REST service.
        #[arg(long)]
        http: bool,
    },
    /// Compare finished runs: HV-AUC series, plot and metric summary.
    Report {
        /// Cell directories, or directories containing cells.
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the framework over HTTP until Ctrl-C.
    Serve {
        #[arg(long)]
        ddm: PathBuf,
        #[arg(long, value_parser = parse_detection)]
        detection: Option<DetectionAlgorithm>,
        #[arg(long, value_parser = parse_trigger)]
        trigger: Option<SelectionMethod>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Where to write the store and decision log on shutdown.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the simulator as a separate process against a running service.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        url: String,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn parse_detection(s: &str) -> Result<DetectionAlgorithm, String> {
    DetectionAlgorithm::ALL
        .into_iter()
        .find(|a| a.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown detection `{s}` (RuleBased, OPTICS, DBSCAN, kMeans)"))
}

fn parse_trigger(s: &str) -> Result<SelectionMethod, String> {
    SelectionMethod::from_name(&s.to_ascii_lowercase())
        .ok_or_else(|| format!("unknown trigger `{s}` (hypervolume, threshold)"))
}

fn parse_baseline(s: &str) -> Result<Baseline, String> {
    Baseline::from_name(s).ok_or_else(|| format!("unknown baseline `{s}` (BestDistance, BestVelocity, Rules)"))
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            ddm,
            scenario,
            detection,
            trigger,
            baseline,
            seeds,
            out,
            http,
        } => {
            let plan = ExperimentPlan {
                ddm,
                scenario,
                detection,
                trigger,
                baseline,
                seeds,
                out,
                transport: if http { Transport::Http } else { Transport::InProcess },
            };
            let cell = sao_cli::run(&plan)?;
            println!("{}", cell.display());
        }
        Command::Report { runs, out } => {
            let report = sao_cli::report(&runs, &out)?;
            for row in &report.summary {
                println!(
                    "{:<40} HV-AUC {:>12.1} ± {:<10.1} mean HV {:.4}",
                    row.cell, row.auc.mean, row.auc.std, row.hypervolume.mean
                );
            }
            println!("{}", out.display());
        }
        Command::Serve {
            ddm,
            detection,
            trigger,
            seed,
            bind,
            port,
            out,
        } => {
            let plan = ExperimentPlan {
                ddm,
                scenario: PathBuf::new(),
                detection,
                trigger,
                baseline: None,
                seeds: vec![seed],
                out: out.clone().unwrap_or_default(),
                transport: Transport::Http,
            };
            if !plan.ddm.is_file() {
                return Err(CliError::ConfigNotFound(plan.ddm));
            }
            let framework = Framework::new(plan.load_ddm()?, plan.base_dir(), seed)?;
            let server = Server::start(framework, SocketAddr::new(bind, port))?;
            eprintln!("listening on http://{}", server.addr());
            let framework = server.run_until_ctrl_c()?;
            if let Some(dir) = out {
                RunOutput::Framework(Box::new(framework))
                    .write_to(&dir)
                    .map_err(|e| CliError::harness(seed, e))?;
                println!("{}", dir.display());
            }
        }
        Command::Simulate { scenario, url, seed } => {
            if !scenario.is_file() {
                return Err(CliError::ConfigNotFound(scenario));
            }
            let mut s = sao_platoon::Scenario::from_path(&scenario)?;
            if let Some(seed) = seed {
                s = s.with_seed(seed);
            }
            let mut planner = RemotePlanner::new(AdapterClient::new(url));
            let windows = run_loop(&s, &mut planner).map_err(|e| CliError::harness(s.seed, e))?;
            println!(
                "{windows} observations sent, {} decisions applied",
                planner.received.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
