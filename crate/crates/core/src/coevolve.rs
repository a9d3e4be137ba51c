//! Constrained cooperative coevolution.
//!
//! Each cycle draws a fresh random partition of the decision variables into
//! `ns` groups of `ds` indices and optimizes the groups one after another with
//! NSDE. A subpopulation member is scored by splicing its genes into the
//! current best full vector (the context vector). After each group the evolved
//! columns are written back, the whole population is re-evaluated and the
//! best member refreshed.

use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::de::{evaluate_all, init_population, nsde_generation, Candidate, DeConfig};
use crate::dynamics::Evaluation;
use crate::epsilon::{best_index, EpsilonSchedule, DEFAULT_GC_FRACTION, DEFAULT_LAMBDA};
use crate::error::{Error, Result};
use crate::rng::{substream, Rng, TAG_GROUPING, TAG_INIT};

/// A random partition of `[0, D)` into `ns` equal groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupingPlan {
    perm: Vec<usize>,
    ns: usize,
    ds: usize,
}

impl GroupingPlan {
    /// Plan from an explicit permutation.
    pub fn from_permutation(perm: Vec<usize>, ns: usize) -> Result<Self> {
        let d = perm.len();
        if ns == 0 || d % ns != 0 {
            return Err(Error::InvalidParameter(format!("{ns} groups do not divide dimension {d}")));
        }
        let mut seen = vec![false; d];
        for &p in &perm {
            if p >= d || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidParameter("grouping is not a permutation".into()));
            }
        }
        Ok(Self { perm, ns, ds: d / ns })
    }

    pub fn identity(d: usize, ns: usize) -> Result<Self> {
        Self::from_permutation((0..d).collect(), ns)
    }

    pub fn group_count(&self) -> usize {
        self.ns
    }

    pub fn group_dim(&self) -> usize {
        self.ds
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Variable indices of group `j` (0-based).
    pub fn group(&self, j: usize) -> &[usize] {
        &self.perm[j * self.ds..(j + 1) * self.ds]
    }
}

pub fn random_grouping(d: usize, ns: usize, rng: &mut Rng) -> Result<GroupingPlan> {
    if ns == 0 || d % ns != 0 {
        return Err(Error::InvalidParameter(format!("{ns} groups do not divide dimension {d}")));
    }
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(rng);
    GroupingPlan::from_permutation(perm, ns)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// Probability that two given variables share a group in at least `k` of
/// `cycles` independent groupings into `ns` groups:
/// `Σ_{l=k}^{K} C(K,l) (1/ns)^l (1 - 1/ns)^(K-l)`, summed in log domain.
pub fn grouping_probability(k: usize, cycles: usize, ns: usize) -> Result<f64> {
    if k == 0 || k > cycles || ns == 0 {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= K and ns >= 1, got k={k}, K={cycles}, ns={ns}")));
    }
    if ns == 1 {
        return Ok(1.0);
    }
    let p = 1.0 / ns as f64;
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let total = (k..=cycles)
        .map(|l| (ln_choose(cycles as u64, l as u64) + l as f64 * lp + (cycles - l) as f64 * lq).exp())
        .sum::<f64>();
    Ok(total.min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSettings {
    pub gc_fraction: f64,
    pub lambda: f64,
}

impl Default for EpsilonSettings {
    fn default() -> Self {
        Self { gc_fraction: DEFAULT_GC_FRACTION, lambda: DEFAULT_LAMBDA }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C3Config {
    /// Variables per group.
    pub ds: usize,
    /// Evaluations spent by NSDE per group visit; a multiple of the population size.
    pub sub_fes: usize,
    pub total_budget: usize,
    /// Derived from the budget when `None`.
    pub cycles: Option<usize>,
    /// Count context seeding and full-population refreshes against the budget.
    pub count_bookkeeping: bool,
    pub epsilon: EpsilonSettings,
}

impl C3Config {
    /// Evaluations charged per group visit.
    pub fn visit_cost(&self, np: usize) -> usize {
        self.sub_fes + if self.count_bookkeeping { 2 * np } else { 0 }
    }

    /// Validates against a problem dimension and returns `(ns, cycles)`.
    pub fn resolve(&self, dim: usize, de: &DeConfig) -> Result<(usize, usize)> {
        de.validate()?;
        if self.ds == 0 || dim % self.ds != 0 {
            return Err(Error::Config(format!("group size {} does not divide dimension {dim}", self.ds)));
        }
        if self.sub_fes < de.np || self.sub_fes % de.np != 0 {
            return Err(Error::Config(format!("sub_fes {} must be a positive multiple of np {}", self.sub_fes, de.np)));
        }
        let ns = dim / self.ds;
        let per_cycle = ns * self.visit_cost(de.np);
        let cycles = match self.cycles {
            Some(c) => c,
            None => self.total_budget.saturating_sub(de.np) / per_cycle,
        };
        if cycles == 0 || de.np + cycles * per_cycle > self.total_budget {
            return Err(Error::Config(format!(
                "budget {} cannot cover {} cycle(s) of {ns} groups at {} evaluations each plus {} initial",
                self.total_budget,
                cycles.max(1),
                self.visit_cost(de.np),
                de.np
            )));
        }
        Ok((ns, cycles))
    }
}

/// One line of the convergence log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub generation: usize,
    pub cycle: usize,
    pub group: usize,
    pub best_f: f64,
    pub best_violation: f64,
    pub epsilon: f64,
}

pub fn write_history_csv<W: Write>(rows: &[HistoryRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["generation", "cycle", "group", "best_f", "best_violation", "epsilon"])?;
    for r in rows {
        wtr.write_record([
            r.generation.to_string(),
            r.cycle.to_string(),
            r.group.to_string(),
            r.best_f.to_string(),
            r.best_violation.to_string(),
            r.epsilon.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOutcome {
    /// Feasibility-first best of the final population.
    pub best: Candidate,
    pub population: Vec<Candidate>,
    pub history: Vec<HistoryRow>,
    pub evaluations: usize,
    pub generations: usize,
}

/// Mutable state of one optimizer run.
#[derive(Debug, Clone)]
pub struct SearchState {
    pub population: Vec<Candidate>,
    /// Index of the current ε-best member, used as the context vector.
    pub best: usize,
    pub schedule: EpsilonSchedule,
    pub seed: u64,
    pub generation: usize,
    pub evaluations: usize,
    pub cycle: usize,
    pub history: Vec<HistoryRow>,
}

impl SearchState {
    /// Uniform initial population, evaluated, with ε₀ set to its largest violation.
    pub fn initialize<E>(evaluate: &E, dim: usize, de: &DeConfig, gmax: usize, eps: EpsilonSettings, seed: u64) -> Result<Self>
    where
        E: Fn(&[f64]) -> Result<Evaluation> + Sync,
    {
        de.validate()?;
        let genes = init_population(de, dim, &mut substream(seed, TAG_INIT, 0, 0));
        let population = evaluate_all(genes, evaluate)?;
        let eps0 = population.iter().map(|c| c.violation).fold(0.0, f64::max);
        let schedule = EpsilonSchedule::with_fraction(eps0, eps.gc_fraction, gmax, eps.lambda)?;
        let best = best_index(&population, schedule.epsilon_at(0)).expect("non-empty population");
        Ok(Self {
            evaluations: population.len(),
            population,
            best,
            schedule,
            seed,
            generation: 0,
            cycle: 0,
            history: Vec::new(),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.schedule.epsilon_at(self.generation)
    }

    pub fn best(&self) -> &Candidate {
        &self.population[self.best]
    }

    fn log(&mut self, group: usize, members: &[Candidate], eps: f64) {
        let b = &members[best_index(members, 0.0).expect("non-empty")];
        self.history.push(HistoryRow {
            generation: self.generation,
            cycle: self.cycle,
            group,
            best_f: b.f,
            best_violation: b.violation,
            epsilon: eps,
        });
    }

    fn finish(self) -> OptimizerOutcome {
        let best = self.population[best_index(&self.population, 0.0).expect("non-empty")].clone();
        OptimizerOutcome {
            best,
            population: self.population,
            history: self.history,
            evaluations: self.evaluations,
            generations: self.generation,
        }
    }
}

/// Optimizes group `j` of `plan` in the context of the current best.
///
/// Returns the number of evaluations the NSDE generations consumed (always
/// `cfg.sub_fes`); bookkeeping evaluations are charged to `state.evaluations`
/// only when `cfg.count_bookkeeping` is set.
pub fn optimize_subcomponent<E>(
    state: &mut SearchState,
    plan: &GroupingPlan,
    j: usize,
    evaluate: &E,
    cfg: &C3Config,
    de: &DeConfig,
) -> Result<usize>
where
    E: Fn(&[f64]) -> Result<Evaluation> + Sync,
{
    if j >= plan.group_count() {
        return Err(Error::InvalidParameter(format!("group {j} out of range")));
    }
    let generations = cfg.sub_fes / de.np;
    if generations == 0 {
        return Err(Error::Config(format!("sub_fes {} allows no generation at np {}", cfg.sub_fes, de.np)));
    }
    let idx = plan.group(j);
    let context = state.best().genes.clone();
    let in_context = |sub: &[f64]| {
        let mut full = context.clone();
        for (&k, &v) in idx.iter().zip(sub) {
            full[k] = v;
        }
        evaluate(&full)
    };

    let sub_genes: Vec<Vec<f64>> = state
        .population
        .iter()
        .map(|c| idx.iter().map(|&k| c.genes[k]).collect())
        .collect();
    let mut subpop = evaluate_all(sub_genes, &in_context)?;
    let mut charged = if cfg.count_bookkeeping { de.np } else { 0 };

    let mut used = 0;
    for _ in 0..generations {
        let eps = state.epsilon();
        used += nsde_generation(&mut subpop, &in_context, eps, de, state.seed, state.generation as u64)?.evaluations;
        state.generation += 1;
        state.log(j, &subpop, eps);
    }

    let genes: Vec<Vec<f64>> = state
        .population
        .iter()
        .zip(&subpop)
        .map(|(c, s)| {
            let mut g = c.genes.clone();
            for (&k, &v) in idx.iter().zip(&s.genes) {
                g[k] = v;
            }
            g
        })
        .collect();
    state.population = evaluate_all(genes, evaluate)?;
    if cfg.count_bookkeeping {
        charged += de.np;
    }
    state.best = best_index(&state.population, state.epsilon()).expect("non-empty");
    state.evaluations += used + charged;
    Ok(used)
}

/// NSDE under the cooperative coevolution framework.
pub fn run_c3<E>(evaluate: &E, dim: usize, cfg: &C3Config, de: &DeConfig, seed: u64) -> Result<OptimizerOutcome>
where
    E: Fn(&[f64]) -> Result<Evaluation> + Sync,
{
    let (ns, cycles) = cfg.resolve(dim, de)?;
    let gmax = cfg.total_budget / de.np;
    let mut state = SearchState::initialize(evaluate, dim, de, gmax, cfg.epsilon, seed)?;
    let visit = cfg.visit_cost(de.np);
    'cycles: for cycle in 1..=cycles {
        state.cycle = cycle;
        let plan = random_grouping(dim, ns, &mut substream(seed, TAG_GROUPING, cycle as u64, 0))?;
        for j in 0..ns {
            if state.evaluations + visit > cfg.total_budget {
                break 'cycles;
            }
            optimize_subcomponent(&mut state, &plan, j, evaluate, cfg, de)?;
        }
    }
    Ok(state.finish())
}

/// NSDE with ε constraint handling on the undivided problem.
pub fn run_nsde<E>(
    evaluate: &E,
    dim: usize,
    total_budget: usize,
    de: &DeConfig,
    eps: EpsilonSettings,
    seed: u64,
) -> Result<OptimizerOutcome>
where
    E: Fn(&[f64]) -> Result<Evaluation> + Sync,
{
    if total_budget < 2 * de.np {
        return Err(Error::Config(format!("budget {total_budget} allows no generation at np {}", de.np)));
    }
    let mut state = SearchState::initialize(evaluate, dim, de, total_budget / de.np, eps, seed)?;
    while state.evaluations + de.np <= total_budget {
        let e = state.epsilon();
        state.evaluations += nsde_generation(&mut state.population, evaluate, e, de, seed, state.generation as u64)?.evaluations;
        state.generation += 1;
        let pop = std::mem::take(&mut state.population);
        state.log(0, &pop, e);
        state.population = pop;
    }
    Ok(state.finish())
}
