use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use epiweights::coevolve::grouping_probability;
use epiweights::dynamics::{integrate, objective_value, trace, WeightProblem};
use epiweights::experiment::{self, read_runs, read_schedule_csv, run_experiment_on, write_campaign, Algorithm, ExperimentConfig};
use epiweights::graph::{epidemic_threshold, generate_ba, spectral_radius, topology_stats, Network, DEFAULT_POWER_TOL};
use epiweights::stats::{summarize, write_summary_csv};
use epiweights::{baselines, Error};

#[derive(Parser)]
#[command(name = "epiweights", version, about = "Constrained weight adaptation for SIS epidemic networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptAlgo {
    Nsde,
    #[value(name = "nsde-c3")]
    NsdeC3,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineMode {
    None,
    Constant,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Barabási–Albert network and write it as i,j,w CSV.
    GenNet {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m0: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate the dynamics under a schedule (no adaptation when omitted).
    Simulate {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the t,I,W trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run independent optimizations and write their artifacts.
    Optimize {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        algo: OptAlgo,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Evaluate a reference strategy.
    Baseline {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: BaselineMode,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Mean ± std and rank-sum p-values over campaign directories.
    Stats {
        #[arg(long, num_args = 1.., required = true)]
        indir: Vec<PathBuf>,
        #[arg(long = "ref", default_value = "nsde-c3")]
        reference: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Probability that two variables share a group in at least k of the cycles.
    GroupProb {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        cycles: usize,
        #[arg(long)]
        ns: usize,
    },
}

fn load_config(path: Option<&Path>) -> epiweights::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_json_file(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn load_network(path: &Path) -> epiweights::Result<Network> {
    Network::read_csv(File::open(path)?, None)
}

fn report_campaign(campaign: &experiment::Campaign) {
    for r in &campaign.records {
        eprintln!(
            "{} run {:>3}: ofv {:.4} violation {:.3e} evaluations {} ({:.1}s)",
            campaign.algorithm,
            r.run,
            r.ofv,
            r.violation,
            r.evaluations,
            r.wall_time.as_secs_f64()
        );
    }
    for (run, msg) in &campaign.failures {
        eprintln!("{} run {run} failed: {msg}", campaign.algorithm);
    }
}

fn run(cli: Cli) -> epiweights::Result<()> {
    match cli.command {
        Command::GenNet { n, m0, m, seed, out } => {
            let net = generate_ba(n, m0, m, seed)?;
            net.write_csv(BufWriter::new(File::create(&out)?))?;
            let s = topology_stats(&net);
            let rho = spectral_radius(net.initial_weights(), DEFAULT_POWER_TOL)?;
            eprintln!(
                "N={n} edges={} <k>={:.3} <C>={:.3} d={:.3} lambda_max={:.4} tau_c={:.4}",
                net.edge_count(),
                s.avg_degree,
                s.avg_clustering,
                s.density,
                rho,
                epidemic_threshold(&net)?
            );
        }
        Command::Simulate { net, config, schedule, out, trace: trace_out } => {
            let cfg = load_config(config.as_deref())?;
            let net = load_network(&net)?;
            let params = cfg.epidemic_params(net.node_count())?;
            let sched = match schedule {
                Some(p) => read_schedule_csv(File::open(p)?, &net, cfg.horizon)?,
                None => baselines::no_adaptation_schedule(&net, cfg.horizon)?,
            };
            let traj = integrate(&net, &params, &sched)?;
            traj.write_csv(BufWriter::new(File::create(&out)?))?;
            if let Some(p) = trace_out {
                trace(&traj, &sched, &net)?.write_csv(BufWriter::new(File::create(p)?))?;
            }
            let eval = WeightProblem::new(net, params, cfg.budget)?.evaluate_schedule(&sched)?;
            eprintln!("ofv {:.4} (trapezoid {:.4}) g {:.4}", eval.f, objective_value(&traj), eval.g);
        }
        Command::Optimize { net, config, algo, runs, seed, outdir } => {
            let mut cfg = load_config(config.as_deref())?;
            cfg.algorithm = match algo {
                OptAlgo::Nsde => Algorithm::Nsde,
                OptAlgo::NsdeC3 => Algorithm::NsdeC3,
            };
            if let Some(r) = runs {
                cfg.runs = r;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            cfg.validate()?;
            let campaign = run_experiment_on(load_network(&net)?, &cfg)?;
            report_campaign(&campaign);
            write_campaign(&campaign, &outdir)?;
            if campaign.records.is_empty() {
                return Err(Error::AllRunsFailed(campaign.failures.len()));
            }
        }
        Command::Baseline { net, config, mode, outdir } => {
            let mut cfg = load_config(config.as_deref())?;
            cfg.algorithm = match mode {
                BaselineMode::None => Algorithm::None,
                BaselineMode::Constant => Algorithm::Constant,
            };
            let campaign = run_experiment_on(load_network(&net)?, &cfg)?;
            report_campaign(&campaign);
            write_campaign(&campaign, &outdir)?;
        }
        Command::Stats { indir, reference, out } => {
            let samples = indir.iter().map(|d| read_runs(d)).collect::<epiweights::Result<Vec<_>>>()?;
            let rows = summarize(&samples, &reference)?;
            write_summary_csv(&rows, BufWriter::new(File::create(&out)?))?;
            write_summary_csv(&rows, std::io::stdout())?;
        }
        Command::GroupProb { k, cycles, ns } => {
            println!("{:.4}", grouping_probability(k, cycles, ns)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
