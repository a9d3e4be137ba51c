//! Differential evolution machinery: population setup, NSDE scale factors,
//! DE/current-to-best/1 mutation, binomial crossover, and one synchronous
//! generation under the ε comparator.

use rand::Rng;
use rand_distr::{Cauchy, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Evaluation;
use crate::epsilon::{best_index, better_than, Scored};
use crate::error::{Error, Result};
use crate::rng::{substream, TAG_GENERATION};

/// A decision vector with its cached evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub genes: Vec<f64>,
    pub f: f64,
    pub violation: f64,
}

impl Candidate {
    pub fn new(genes: Vec<f64>, eval: Evaluation) -> Self {
        Self { genes, f: eval.f, violation: eval.violation }
    }
}

impl Scored for Candidate {
    fn objective(&self) -> f64 {
        self.f
    }

    fn violation(&self) -> f64 {
        self.violation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const UNIT: Bounds = Bounds { lower: 0.0, upper: 1.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    pub np: usize,
    pub cr: f64,
    pub fp: f64,
    pub bounds: Bounds,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self { np: 350, cr: 0.9, fp: 0.5, bounds: Bounds::UNIT }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.np < 4 {
            return Err(Error::PopulationTooSmall(self.np));
        }
        if !(0.0..=1.0).contains(&self.cr) || !(0.0..=1.0).contains(&self.fp) {
            return Err(Error::InvalidParameter(format!("cr and fp must lie in [0,1], got {} and {}", self.cr, self.fp)));
        }
        if !(self.bounds.lower <= self.bounds.upper) {
            return Err(Error::InvalidParameter("lower bound exceeds upper bound".into()));
        }
        Ok(())
    }
}

pub fn init_population<R: Rng + ?Sized>(cfg: &DeConfig, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let Bounds { lower, upper } = cfg.bounds;
    (0..cfg.np)
        .map(|_| (0..dim).map(|_| lower + rng.gen::<f64>() * (upper - lower)).collect())
        .collect()
}

/// Which NSDE branch produced a scale factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleBranch {
    Gaussian,
    Cauchy,
}

/// NSDE scale factor with its branch: `N(0.5, 0.5)` with probability `fp`,
/// otherwise a standard Cauchy draw.
pub fn sample_scale_factor_tagged<R: Rng + ?Sized>(fp: f64, rng: &mut R) -> (f64, ScaleBranch) {
    if rng.gen::<f64>() < fp {
        let normal = Normal::new(0.5, 0.5).expect("valid normal");
        (normal.sample(rng), ScaleBranch::Gaussian)
    } else {
        let cauchy = Cauchy::new(0.0, 1.0).expect("valid cauchy");
        (cauchy.sample(rng), ScaleBranch::Cauchy)
    }
}

pub fn sample_scale_factor<R: Rng + ?Sized>(fp: f64, rng: &mut R) -> f64 {
    sample_scale_factor_tagged(fp, rng).0
}

/// Two distinct donor indices, both different from `i`.
pub fn pick_donors<R: Rng + ?Sized>(i: usize, np: usize, rng: &mut R) -> Result<(usize, usize)> {
    if np < 4 {
        return Err(Error::PopulationTooSmall(np));
    }
    let r1 = loop {
        let r = rng.gen_range(0..np);
        if r != i {
            break r;
        }
    };
    let r2 = loop {
        let r = rng.gen_range(0..np);
        if r != i && r != r1 {
            break r;
        }
    };
    Ok((r1, r2))
}

/// `v = x + F (best - x) + F (r1 - r2)`
pub fn current_to_best_1(x: &[f64], best: &[f64], r1: &[f64], r2: &[f64], f: f64) -> Vec<f64> {
    x.iter()
        .zip(best)
        .zip(r1.iter().zip(r2))
        .map(|((&xi, &bi), (&a, &b))| xi + f * (bi - xi) + f * (a - b))
        .collect()
}

pub fn mutate_current_to_best_1<R: Rng + ?Sized>(
    i: usize,
    population: &[Vec<f64>],
    best: &[f64],
    f: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let (r1, r2) = pick_donors(i, population.len(), rng)?;
    Ok(current_to_best_1(&population[i], best, &population[r1], &population[r2], f))
}

pub fn binomial_crossover<R: Rng + ?Sized>(target: &[f64], mutant: &[f64], cr: f64, rng: &mut R) -> Result<Vec<f64>> {
    if target.len() != mutant.len() {
        return Err(Error::DimensionMismatch { expected: target.len(), actual: mutant.len() });
    }
    if target.is_empty() {
        return Ok(Vec::new());
    }
    let forced = rng.gen_range(0..target.len());
    Ok(target
        .iter()
        .zip(mutant)
        .enumerate()
        .map(|(j, (&x, &v))| if rng.gen::<f64>() <= cr || j == forced { v } else { x })
        .collect())
}

pub fn repair_bounds(mut v: Vec<f64>, bounds: Bounds) -> Vec<f64> {
    for x in &mut v {
        *x = x.clamp(bounds.lower, bounds.upper);
    }
    v
}

/// Evaluates every vector, in parallel, preserving order.
pub fn evaluate_all<E>(genes: Vec<Vec<f64>>, evaluate: &E) -> Result<Vec<Candidate>>
where
    E: Fn(&[f64]) -> Result<Evaluation> + Sync,
{
    genes
        .into_par_iter()
        .map(|g| {
            let e = evaluate(&g)?;
            Ok(Candidate::new(g, e))
        })
        .collect()
}

/// Per-individual record of one trial, kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialInfo {
    pub donors: (usize, usize),
    pub scale: f64,
    pub replaced: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationReport {
    pub evaluations: usize,
    pub trials: Vec<TrialInfo>,
}

/// One NSDE generation over `pop`.
///
/// Trials are built from the population as it stood at the start of the
/// generation, each from its own random substream keyed by
/// `(seed, generation, index)`, and evaluated in parallel. Replacement is
/// applied afterwards in index order, so the outcome does not depend on the
/// number of worker threads.
pub fn nsde_generation<E>(
    pop: &mut [Candidate],
    evaluate: &E,
    eps: f64,
    cfg: &DeConfig,
    seed: u64,
    generation: u64,
) -> Result<GenerationReport>
where
    E: Fn(&[f64]) -> Result<Evaluation> + Sync,
{
    let np = pop.len();
    if np < 4 {
        return Err(Error::PopulationTooSmall(np));
    }
    let best = &pop[best_index(pop, eps).expect("non-empty population")].genes;
    let snapshot: &[Candidate] = pop;
    let trials: Vec<(Candidate, usize, usize, f64)> = (0..np)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, TAG_GENERATION, generation, i as u64);
            let f = sample_scale_factor(cfg.fp, &mut rng);
            let (r1, r2) = pick_donors(i, np, &mut rng)?;
            let x = &snapshot[i].genes;
            let v = current_to_best_1(x, best, &snapshot[r1].genes, &snapshot[r2].genes, f);
            let u = repair_bounds(binomial_crossover(x, &v, cfg.cr, &mut rng)?, cfg.bounds);
            let eval = evaluate(&u)?;
            Ok((Candidate::new(u, eval), r1, r2, f))
        })
        .collect::<Result<_>>()?;

    let mut info = Vec::with_capacity(np);
    for (slot, (trial, r1, r2, f)) in pop.iter_mut().zip(trials) {
        let replaced = better_than(&trial, slot, eps);
        if replaced {
            *slot = trial;
        }
        info.push(TrialInfo { donors: (r1, r2), scale: f, replaced });
    }
    Ok(GenerationReport { evaluations: np, trials: info })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epsilon::best_index;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(np: usize) -> DeConfig {
        DeConfig { np, ..DeConfig::default() }
    }

    fn sphere(x: &[f64]) -> Result<Evaluation> {
        Ok(Evaluation::new(x.iter().map(|v| v * v).sum(), -1.0))
    }

    #[test]
    fn degenerate_bounds_give_constant_population() {
        let c = DeConfig { np: 5, bounds: Bounds { lower: 0.0, upper: 0.0 }, ..DeConfig::default() };
        let pop = init_population(&c, 7, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(pop.iter().flatten().all(|&g| g == 0.0));
    }

    #[test]
    fn init_is_uniform_and_deterministic() {
        let c = cfg(10_000);
        let pop = init_population(&c, 3, &mut ChaCha8Rng::seed_from_u64(2));
        for j in 0..3 {
            let mean = pop.iter().map(|x| x[j]).sum::<f64>() / 10_000.0;
            assert!((mean - 0.5).abs() < 0.02, "gene {j} mean {mean}");
        }
        assert!(pop.iter().flatten().all(|g| (0.0..=1.0).contains(g)));
        let again = init_population(&c, 3, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(pop, again);
    }

    #[test]
    fn gaussian_branch_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws: Vec<f64> = (0..100_000).map(|_| sample_scale_factor(1.0, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
        assert!((var.sqrt() - 0.5).abs() < 0.01, "std {}", var.sqrt());
    }

    #[test]
    fn cauchy_branch_median() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut draws: Vec<f64> = (0..100_000).map(|_| sample_scale_factor(0.0, &mut rng)).collect();
        draws.sort_by(f64::total_cmp);
        let median = 0.5 * (draws[49_999] + draws[50_000]);
        assert!(median.abs() < 0.02, "median {median}");
    }

    #[test]
    fn half_of_the_draws_are_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gaussian = (0..100_000)
            .filter(|_| sample_scale_factor_tagged(0.5, &mut rng).1 == ScaleBranch::Gaussian)
            .count();
        assert!((gaussian as f64 / 1e5 - 0.5).abs() < 0.01);
    }

    #[test]
    fn mutation_arithmetic() {
        let v = current_to_best_1(&[0.2], &[0.6], &[0.4], &[0.2], 0.5);
        assert!((v[0] - 0.5).abs() < 1e-15);
        assert_eq!(current_to_best_1(&[0.2, 0.7], &[0.6, 0.1], &[0.4, 0.3], &[0.2, 0.9], 0.0), vec![0.2, 0.7]);
        assert_eq!(current_to_best_1(&[0.3], &[0.3], &[0.8], &[0.8], 123.0), vec![0.3]);
    }

    #[test]
    fn mutation_needs_four_members() {
        let pop = vec![vec![0.0]; 3];
        let err = mutate_current_to_best_1(0, &pop, &[0.0], 0.5, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(err, Err(Error::PopulationTooSmall(3))));
    }

    #[test]
    fn donors_are_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10_000 {
            let i = rng.gen_range(0..5);
            let (a, b) = pick_donors(i, 5, &mut rng).unwrap();
            assert!(a != b && a != i && b != i);
        }
    }

    #[test]
    fn crossover_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = vec![0.0; 50];
        let v = vec![1.0; 50];
        assert_eq!(binomial_crossover(&x, &v, 1.0, &mut rng).unwrap(), v);
        for _ in 0..100 {
            let u = binomial_crossover(&x, &v, 0.0, &mut rng).unwrap();
            assert_eq!(u.iter().filter(|&&g| g == 1.0).count(), 1);
        }
        assert!(binomial_crossover(&x, &v[..3], 0.5, &mut rng).is_err());
    }

    #[test]
    fn crossover_rate_is_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = vec![0.0; 1000];
        let v = vec![1.0; 1000];
        let mut total = 0usize;
        for _ in 0..20 {
            total += binomial_crossover(&x, &v, 0.9, &mut rng).unwrap().iter().filter(|&&g| g == 1.0).count();
        }
        assert!((total as f64 / 20_000.0 - 0.9).abs() < 0.01);
    }

    #[test]
    fn repair_examples() {
        assert_eq!(repair_bounds(vec![-0.3, 0.5, 1.7], Bounds::UNIT), vec![0.0, 0.5, 1.0]);
        assert_eq!(repair_bounds(vec![0.1, 0.9], Bounds::UNIT), vec![0.1, 0.9]);
        let once = repair_bounds(vec![-2.0, 0.4, 3.0], Bounds::UNIT);
        assert_eq!(repair_bounds(once.clone(), Bounds::UNIT), once);
    }

    #[test]
    fn sphere_smoke() {
        let c = cfg(30);
        let start: Vec<Vec<f64>> = init_population(&c, 10, &mut ChaCha8Rng::seed_from_u64(9));
        let mut pop = evaluate_all(start, &sphere).unwrap();
        let mut best = pop[best_index(&pop, 0.0).unwrap()].f;
        for g in 0..200 {
            let rep = nsde_generation(&mut pop, &sphere, 0.0, &c, 9, g).unwrap();
            assert_eq!(rep.evaluations, 30);
            for (i, t) in rep.trials.iter().enumerate() {
                assert!(t.donors.0 != t.donors.1 && t.donors.0 != i && t.donors.1 != i);
            }
            assert!(pop.iter().flat_map(|c| &c.genes).all(|g| (0.0..=1.0).contains(g)));
            let now = pop[best_index(&pop, 0.0).unwrap()].f;
            assert!(now <= best);
            best = now;
        }
        assert!(best < 1e-2, "best {best}");
    }

    #[test]
    fn single_gene_trials_without_scaling() {
        let c = DeConfig { np: 6, cr: 0.0, fp: 1.0, bounds: Bounds::UNIT };
        let start = init_population(&c, 4, &mut ChaCha8Rng::seed_from_u64(10));
        let mut pop = evaluate_all(start, &sphere).unwrap();
        let before = pop.clone();
        // fp = 1 with cr = 0: each trial copies the mutant in exactly one gene.
        let rep = nsde_generation(&mut pop, &sphere, 0.0, &c, 10, 0).unwrap();
        for (i, (old, new)) in before.iter().zip(&pop).enumerate() {
            let changed = old.genes.iter().zip(&new.genes).filter(|(a, b)| a != b).count();
            assert!(changed <= 1);
            if rep.trials[i].replaced {
                assert!(new.f < old.f);
            } else {
                assert_eq!(old, new);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let c = cfg(12);
        let start = init_population(&c, 5, &mut ChaCha8Rng::seed_from_u64(11));
        let mut a = evaluate_all(start.clone(), &sphere).unwrap();
        let mut b = evaluate_all(start, &sphere).unwrap();
        nsde_generation(&mut a, &sphere, 0.0, &c, 11, 3).unwrap();
        nsde_generation(&mut b, &sphere, 0.0, &c, 11, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn epsilon_best_never_gets_worse() {
        // Constrained sphere: g = sum(x) - 1.
        let problem = |x: &[f64]| Ok(Evaluation::new(x.iter().map(|v| (v - 0.8).powi(2)).sum(), x.iter().sum::<f64>() - 1.0));
        let c = cfg(20);
        let start = init_population(&c, 6, &mut ChaCha8Rng::seed_from_u64(12));
        let mut pop = evaluate_all(start, &problem).unwrap();
        for (g, eps) in [(0u64, 2.0), (1, 2.0), (2, 0.5), (3, 0.5), (4, 0.0), (5, 0.0)] {
            let before = pop[best_index(&pop, eps).unwrap()].clone();
            nsde_generation(&mut pop, &problem, eps, &c, 12, g).unwrap();
            let after = &pop[best_index(&pop, eps).unwrap()];
            assert!(!better_than(&before, after, eps));
        }
    }
}
