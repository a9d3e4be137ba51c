//! Experiment campaigns: configuration, independent runs, and CSV artifacts.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{constant_adaptation_schedule, no_adaptation_schedule};
use crate::coevolve::{run_c3, run_nsde, write_history_csv, C3Config, EpsilonSettings, HistoryRow, OptimizerOutcome};
use crate::de::{Bounds, DeConfig};
use crate::dynamics::{decode_candidate, integrate, trace, EpidemicParams, Trace, WeightProblem, WeightSchedule};
use crate::error::{Error, Result};
use crate::graph::{generate_ba, Network};
use crate::rng::run_seed;
use crate::stats::AlgorithmSample;

/// Violations at or below this count as feasible in reports.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "nsde")]
    Nsde,
    #[serde(rename = "nsde_c3", alias = "nsde-c3")]
    NsdeC3,
    #[serde(rename = "none")]
    None,
    #[serde(rename = "constant")]
    Constant,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Nsde => "nsde",
            Algorithm::NsdeC3 => "nsde-c3",
            Algorithm::None => "none",
            Algorithm::Constant => "constant",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, Algorithm::None | Algorithm::Constant)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nsde" => Ok(Algorithm::Nsde),
            "nsde-c3" | "nsde_c3" => Ok(Algorithm::NsdeC3),
            "none" => Ok(Algorithm::None),
            "constant" => Ok(Algorithm::Constant),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Every knob of a campaign. Defaults reproduce the reference setup
/// (20-node BA network, β = 0.4, γ = 0.3, p(0) = 0.153, T = 10, C = 700,
/// NP = 350, Cr = 0.9, 6.3e6 evaluations, 25 runs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m0: usize,
    pub m: usize,
    pub net_seed: u64,

    pub beta: f64,
    pub gamma: f64,
    pub p0: f64,
    pub horizon: usize,
    pub substeps: usize,

    pub budget: f64,
    pub algorithm: Algorithm,

    pub np: usize,
    pub cr: f64,
    pub fp: f64,
    /// Group size; `N (N - 1)` when absent.
    pub ds: Option<usize>,
    /// Evaluations per group visit; `10 · np` when absent.
    pub sub_fes: Option<usize>,
    pub total_fes: usize,
    /// Derived from `total_fes` when absent.
    pub cycles: Option<usize>,
    pub count_bookkeeping: bool,
    pub gc_fraction: f64,
    pub lambda: f64,

    pub runs: usize,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 20,
            m0: 5,
            m: 5,
            net_seed: 1,
            beta: 0.4,
            gamma: 0.3,
            p0: 0.153,
            horizon: 10,
            substeps: crate::dynamics::DEFAULT_SUBSTEPS,
            budget: 700.0,
            algorithm: Algorithm::NsdeC3,
            np: 350,
            cr: 0.9,
            fp: 0.5,
            ds: None,
            sub_fes: None,
            total_fes: 6_300_000,
            cycles: None,
            count_bookkeeping: true,
            gc_fraction: crate::epsilon::DEFAULT_GC_FRACTION,
            lambda: crate::epsilon::DEFAULT_LAMBDA,
            runs: 25,
            master_seed: 0,
        }
    }
}

pub const DEFAULT_SUB_GENERATIONS: usize = 10;

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let mut s = String::new();
        fs::File::open(path)?.read_to_string(&mut s)?;
        Self::from_json_str(&s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if self.m == 0 || self.m > self.m0 || self.m0 > self.n {
            return Err(Error::Config(format!("need 1 <= m <= m0 <= n, got n={}, m0={}, m={}", self.n, self.m0, self.m)));
        }
        if !(self.budget >= 0.0 && self.budget.is_finite()) {
            return Err(Error::Config(format!("budget must be finite and nonnegative, got {}", self.budget)));
        }
        EpidemicParams::uniform(self.n, self.beta, self.gamma, self.p0, self.horizon, self.substeps)
            .map_err(|e| Error::Config(e.to_string()))?;
        if !self.algorithm.is_baseline() {
            self.de_config().validate().map_err(|e| Error::Config(e.to_string()))?;
            if !(self.gc_fraction > 0.0 && self.gc_fraction < 1.0) {
                return Err(Error::Config(format!("gc_fraction must lie in (0,1), got {}", self.gc_fraction)));
            }
        }
        Ok(())
    }

    pub fn epidemic_params(&self, n: usize) -> Result<EpidemicParams> {
        EpidemicParams::uniform(n, self.beta, self.gamma, self.p0, self.horizon, self.substeps)
    }

    pub fn de_config(&self) -> DeConfig {
        DeConfig { np: self.np, cr: self.cr, fp: self.fp, bounds: Bounds::UNIT }
    }

    pub fn epsilon(&self) -> EpsilonSettings {
        EpsilonSettings { gc_fraction: self.gc_fraction, lambda: self.lambda }
    }

    pub fn c3_config(&self, n: usize) -> C3Config {
        C3Config {
            ds: self.ds.unwrap_or(n * n.saturating_sub(1)),
            sub_fes: self.sub_fes.unwrap_or(DEFAULT_SUB_GENERATIONS * self.np),
            total_budget: self.total_fes,
            cycles: self.cycles,
            count_bookkeeping: self.count_bookkeeping,
            epsilon: self.epsilon(),
        }
    }

    pub fn build_network(&self) -> Result<Network> {
        generate_ba(self.n, self.m0, self.m, self.net_seed)
    }
}

/// Outcome of one independent run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub ofv: f64,
    pub violation: f64,
    pub history: Vec<HistoryRow>,
    pub schedule: WeightSchedule,
    pub trace: Trace,
    pub evaluations: usize,
    pub wall_time: Duration,
}

impl RunRecord {
    pub fn feasible(&self) -> bool {
        self.violation <= FEASIBILITY_TOL
    }
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub algorithm: Algorithm,
    pub network: Network,
    pub records: Vec<RunRecord>,
    /// Runs that aborted, with their diagnostics.
    pub failures: Vec<(usize, String)>,
}

impl Campaign {
    pub fn sample(&self) -> AlgorithmSample {
        AlgorithmSample {
            algorithm: self.algorithm.label().to_string(),
            ofv: self.records.iter().map(|r| r.ofv).collect(),
            infeasible_runs: self.records.iter().filter(|r| !r.feasible()).count(),
        }
    }
}

fn finish_record(
    problem: &WeightProblem,
    run: usize,
    seed: u64,
    schedule: WeightSchedule,
    history: Vec<HistoryRow>,
    evaluations: usize,
    started: Instant,
) -> Result<RunRecord> {
    let net = problem.network();
    let traj = integrate(net, problem.params(), &schedule)?;
    let eval = problem.evaluate_schedule(&schedule)?;
    let trace = trace(&traj, &schedule, net)?;
    Ok(RunRecord {
        run,
        seed,
        ofv: eval.f,
        violation: eval.violation,
        history,
        schedule,
        trace,
        evaluations,
        wall_time: started.elapsed(),
    })
}

fn optimize_once(cfg: &ExperimentConfig, problem: &WeightProblem, run: usize) -> Result<RunRecord> {
    let started = Instant::now();
    let seed = run_seed(cfg.master_seed, run as u64);
    let evaluate = |x: &[f64]| problem.evaluate(x);
    let dim = problem.dimension();
    let de = cfg.de_config();
    let out: OptimizerOutcome = match cfg.algorithm {
        Algorithm::NsdeC3 => run_c3(&evaluate, dim, &cfg.c3_config(problem.network().node_count()), &de, seed)?,
        Algorithm::Nsde => run_nsde(&evaluate, dim, cfg.total_fes, &de, cfg.epsilon(), seed)?,
        _ => unreachable!("baselines are not optimized"),
    };
    let schedule = decode_candidate(&out.best.genes, problem.network().node_count(), cfg.horizon)?;
    finish_record(problem, run, seed, schedule, out.history, out.evaluations, started)
}

/// Runs a campaign on the network described by `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Campaign> {
    run_experiment_on(cfg.build_network()?, cfg)
}

/// Runs a campaign on a given network.
///
/// Baselines yield a single deterministic record. Optimizer runs execute in
/// parallel with seeds derived from `master_seed`; a run whose evaluation
/// fails is reported in `failures` and the others continue.
pub fn run_experiment_on(net: Network, cfg: &ExperimentConfig) -> Result<Campaign> {
    cfg.validate()?;
    let params = cfg.epidemic_params(net.node_count())?;
    let problem = WeightProblem::new(net.clone(), params, cfg.budget)?;
    let algorithm = cfg.algorithm;
    if algorithm.is_baseline() {
        let started = Instant::now();
        let schedule = match algorithm {
            Algorithm::None => no_adaptation_schedule(&net, cfg.horizon)?,
            _ => constant_adaptation_schedule(&net, cfg.horizon, cfg.budget)?,
        };
        let record = finish_record(&problem, 0, 0, schedule, Vec::new(), 0, started)?;
        return Ok(Campaign { algorithm, network: net, records: vec![record], failures: Vec::new() });
    }
    if algorithm == Algorithm::NsdeC3 {
        cfg.c3_config(net.node_count())
            .resolve(problem.dimension(), &cfg.de_config())
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let results: Vec<Result<RunRecord>> = (0..cfg.runs).into_par_iter().map(|r| optimize_once(cfg, &problem, r)).collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(rec) => records.push(rec),
            Err(e) if e.is_config() => return Err(e),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    Ok(Campaign { algorithm, network: net, records, failures })
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Schedule as `t,i,j,w` rows, one per off-diagonal entry of every block.
pub fn write_schedule_csv<W: Write>(sched: &WeightSchedule, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["t", "i", "j", "w"])?;
    for (t, b) in sched.blocks().iter().enumerate() {
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                if i != j {
                    wtr.write_record([(t + 1).to_string(), i.to_string(), j.to_string(), b[(i, j)].to_string()])?;
                }
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a `t,i,j,w` schedule. Entries not listed keep their initial weight.
pub fn read_schedule_csv<R: Read>(input: R, net: &Network, horizon: usize) -> Result<WeightSchedule> {
    let n = net.node_count();
    let mut blocks = vec![net.initial_weights().clone(); horizon.saturating_sub(1)];
    let mut rdr = csv::Reader::from_reader(input);
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["t", "i", "j", "w"] {
        return Err(Error::Config("schedule header must be t,i,j,w".into()));
    }
    for rec in rdr.records() {
        let rec = rec?;
        let field = |k: usize| rec[k].trim().to_string();
        let bad = |what: &str| Error::Config(format!("bad schedule {what} in row {:?}", rec.iter().collect::<Vec<_>>()));
        let t: usize = field(0).parse().map_err(|_| bad("t"))?;
        let i: usize = field(1).parse().map_err(|_| bad("i"))?;
        let j: usize = field(2).parse().map_err(|_| bad("j"))?;
        let w: f64 = field(3).parse().map_err(|_| bad("w"))?;
        if t == 0 || t >= horizon || i >= n || j >= n || i == j {
            return Err(bad("index"));
        }
        blocks[t - 1][(i, j)] = w;
    }
    WeightSchedule::new(blocks)
}

/// Generation-wise mean over runs; shorter histories stop contributing when they end.
pub fn mean_history(records: &[RunRecord]) -> Vec<HistoryRow> {
    let len = records.iter().map(|r| r.history.len()).max().unwrap_or(0);
    (0..len)
        .map(|g| {
            let rows: Vec<&HistoryRow> = records.iter().filter_map(|r| r.history.get(g)).collect();
            let k = rows.len() as f64;
            HistoryRow {
                generation: rows[0].generation,
                cycle: rows[0].cycle,
                group: rows[0].group,
                best_f: rows.iter().map(|r| r.best_f).sum::<f64>() / k,
                best_violation: rows.iter().map(|r| r.best_violation).sum::<f64>() / k,
                epsilon: rows.iter().map(|r| r.epsilon).sum::<f64>() / k,
            }
        })
        .collect()
}

pub fn mean_trace(records: &[RunRecord]) -> Option<Trace> {
    let first = &records.first()?.trace;
    let k = records.len() as f64;
    let avg = |get: fn(&Trace) -> &Vec<f64>| -> Vec<f64> {
        (0..first.times.len())
            .map(|i| records.iter().map(|r| get(&r.trace)[i]).sum::<f64>() / k)
            .collect()
    };
    Some(Trace { times: first.times.clone(), infected: avg(|t| &t.infected), weights: avg(|t| &t.weights) })
}

/// Writes every artifact of a campaign under `dir`.
///
/// Top level: `runs.csv` (one row per run), and run-averaged `history.csv`,
/// `trace_I.csv`, `trace_W.csv`. Each `run_NNN/` holds that run's history,
/// traces and best schedule.
pub fn write_campaign(campaign: &Campaign, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut wtr = csv::Writer::from_writer(create(&dir.join("runs.csv"))?);
    wtr.write_record(["algorithm", "run", "seed", "ofv", "violation", "feasible", "evaluations"])?;
    for r in &campaign.records {
        wtr.write_record([
            campaign.algorithm.label().to_string(),
            r.run.to_string(),
            r.seed.to_string(),
            r.ofv.to_string(),
            r.violation.to_string(),
            r.feasible().to_string(),
            r.evaluations.to_string(),
        ])?;
    }
    wtr.flush()?;

    write_history_csv(&mean_history(&campaign.records), create(&dir.join("history.csv"))?)?;
    if let Some(t) = mean_trace(&campaign.records) {
        t.write_infected_csv(create(&dir.join("trace_I.csv"))?)?;
        t.write_weights_csv(create(&dir.join("trace_W.csv"))?)?;
    }
    for r in &campaign.records {
        let sub = dir.join(format!("run_{:03}", r.run));
        fs::create_dir_all(&sub)?;
        write_history_csv(&r.history, create(&sub.join("history.csv"))?)?;
        r.trace.write_infected_csv(create(&sub.join("trace_I.csv"))?)?;
        r.trace.write_weights_csv(create(&sub.join("trace_W.csv"))?)?;
        write_schedule_csv(&r.schedule, create(&sub.join("schedule.csv"))?)?;
    }
    if !campaign.failures.is_empty() {
        let mut f = create(&dir.join("failures.txt"))?;
        for (run, msg) in &campaign.failures {
            writeln!(f, "run {run}: {msg}")?;
        }
    }
    Ok(())
}

/// Reads the `runs.csv` of a campaign directory back into a sample.
pub fn read_runs(dir: &Path) -> Result<AlgorithmSample> {
    #[derive(Deserialize)]
    struct Row {
        algorithm: String,
        ofv: f64,
        feasible: bool,
    }
    let mut rdr = csv::Reader::from_path(dir.join("runs.csv"))?;
    let mut algorithm = None;
    let mut ofv = Vec::new();
    let mut infeasible_runs = 0;
    for row in rdr.deserialize() {
        let row: Row = row?;
        match &algorithm {
            None => algorithm = Some(row.algorithm),
            Some(a) if *a != row.algorithm => {
                return Err(Error::Config(format!("{} mixes algorithms {a} and {}", dir.display(), row.algorithm)))
            }
            _ => {}
        }
        ofv.push(row.ofv);
        infeasible_runs += usize::from(!row.feasible);
    }
    let algorithm = algorithm.ok_or_else(|| Error::Config(format!("{} has no runs", dir.display())))?;
    Ok(AlgorithmSample { algorithm, ofv, infeasible_runs })
}
