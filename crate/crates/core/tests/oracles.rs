//! Independent oracles and property tests for the model layers.

use epiweights::coevolve::{grouping_probability, random_grouping};
use epiweights::dynamics::{
    constraint_value, decision_dimension, decode_candidate, integrate, objective_value, EpidemicParams, WeightProblem,
    WeightSchedule,
};
use epiweights::graph::{generate_ba, spectral_radius, topology_stats, Network};
use epiweights::matrix::SquareMatrix;
use epiweights::stats::{exact_p, midranks, normal_p};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dense(m: &SquareMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.dim(), m.dim(), m.as_slice())
}

fn random_schedule(net: &Network, horizon: usize, rng: &mut ChaCha8Rng) -> WeightSchedule {
    let x: Vec<f64> = (0..decision_dimension(net.node_count(), horizon)).map(|_| rng.gen()).collect();
    decode_candidate(&x, net.node_count(), horizon).unwrap()
}

// Plain RK4 on a dense weight matrix, written separately from the library.
fn reference_trajectory(w: &[Vec<f64>], beta: f64, gamma: f64, p0: f64, horizon: f64, steps: usize) -> Vec<Vec<f64>> {
    let n = w.len();
    let rhs = |p: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let force: f64 = (0..n).map(|j| w[i][j] * beta * p[j]).sum();
                (1.0 - p[i]) * force - gamma * p[i]
            })
            .collect()
    };
    let h = horizon / steps as f64;
    let mut p = vec![p0; n];
    let mut out = vec![p.clone()];
    for _ in 0..steps {
        let k1 = rhs(&p);
        let y2: Vec<f64> = (0..n).map(|i| p[i] + 0.5 * h * k1[i]).collect();
        let k2 = rhs(&y2);
        let y3: Vec<f64> = (0..n).map(|i| p[i] + 0.5 * h * k2[i]).collect();
        let k3 = rhs(&y3);
        let y4: Vec<f64> = (0..n).map(|i| p[i] + h * k3[i]).collect();
        let k4 = rhs(&y4);
        for i in 0..n {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(p.clone());
    }
    out
}

#[test]
fn spectral_radius_matches_dense_eigensolver() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..200 {
        let n = rng.gen_range(1..=6);
        let mut m = SquareMatrix::zeros(n);
        let symmetric = trial % 2 == 0;
        for i in 0..n {
            for j in 0..n {
                if i == j || (symmetric && j < i) {
                    continue;
                }
                let v = if rng.gen_bool(0.7) { rng.gen::<f64>() } else { 0.0 };
                m[(i, j)] = v;
                if symmetric {
                    m[(j, i)] = v;
                }
            }
        }
        if m.sum() == 0.0 {
            continue;
        }
        let oracle = if symmetric {
            dense(&m).symmetric_eigen().eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()))
        } else {
            dense(&m).complex_eigenvalues().iter().fold(0.0f64, |a, v| a.max(v.norm()))
        };
        if oracle < 1e-6 {
            continue;
        }
        let rho = spectral_radius(&m, 1e-13).unwrap();
        assert!((rho - oracle).abs() <= 1e-8, "trial {trial}: {rho} vs {oracle}");
    }
}

#[test]
fn rk4_matches_fine_reference_on_two_nodes() {
    let net = Network::from_edges(2, [(0, 1)]).unwrap();
    let params = EpidemicParams::uniform(2, 0.4, 0.3, 0.153, 10, 20).unwrap();
    let sched = WeightSchedule::repeated(net.initial_weights(), 10).unwrap();
    let traj = integrate(&net, &params, &sched).unwrap();
    let w = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    let fine = reference_trajectory(&w, 0.4, 0.3, 0.153, 10.0, 20_000);
    let mut sup = 0.0f64;
    for (k, row) in traj.p.iter().enumerate() {
        for (a, b) in row.iter().zip(&fine[k * 100]) {
            sup = sup.max((a - b).abs());
        }
    }
    assert!(sup <= 1e-5, "sup-norm error {sup}");
}

#[test]
fn rk4_matches_reference_on_ba_graph() {
    let net = generate_ba(8, 3, 2, 4).unwrap();
    let params = EpidemicParams::uniform(8, 0.4, 0.3, 0.153, 5, 20).unwrap();
    let sched = WeightSchedule::repeated(net.initial_weights(), 5).unwrap();
    let traj = integrate(&net, &params, &sched).unwrap();
    let w: Vec<Vec<f64>> = (0..8).map(|i| net.initial_weights().row(i).to_vec()).collect();
    let fine = reference_trajectory(&w, 0.4, 0.3, 0.153, 5.0, 10_000);
    for (k, row) in traj.p.iter().enumerate() {
        for (a, b) in row.iter().zip(&fine[k * 100]) {
            assert!((a - b).abs() <= 1e-5);
        }
    }
}

#[test]
fn scaling_weights_never_raises_the_objective() {
    let net = generate_ba(20, 5, 5, 3).unwrap();
    let problem = WeightProblem::new(net.clone(), EpidemicParams::uniform(20, 0.4, 0.3, 0.153, 10, 20).unwrap(), 700.0)
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let sched = random_schedule(&net, 10, &mut rng);
        let c = rng.gen_range(0.0..1.0);
        let scaled = WeightSchedule::new(sched.blocks().iter().map(|b| b.scaled(c)).collect()).unwrap();
        let f = problem.evaluate_schedule(&sched).unwrap().f;
        let fc = problem.evaluate_schedule(&scaled).unwrap().f;
        assert!(fc <= f + 1e-9, "c={c}: {fc} > {f}");
    }
}

#[test]
fn constraint_is_invariant_under_block_permutation() {
    let net = generate_ba(12, 4, 3, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let sched = random_schedule(&net, 6, &mut rng);
        let mut blocks = sched.blocks().to_vec();
        blocks.reverse();
        let shift = rng.gen_range(0..blocks.len());
        blocks.rotate_left(shift);
        let permuted = WeightSchedule::new(blocks).unwrap();
        let a = constraint_value(&sched, &net, 100.0).unwrap();
        let b = constraint_value(&permuted, &net, 100.0).unwrap();
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }
}

#[test]
fn co_grouping_frequency_matches_binomial_tail() {
    // Position-pair sampling: two fixed variables land in a uniformly random
    // pair of distinct positions of the permutation.
    let (d, ns, cycles, runs) = (3420usize, 9usize, 50usize, 100_000usize);
    let ds = d / ns;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut hits = vec![0usize; cycles + 1];
    for _ in 0..runs {
        let mut together = 0;
        for _ in 0..cycles {
            let a = rng.gen_range(0..d);
            let mut b = rng.gen_range(0..d - 1);
            if b >= a {
                b += 1;
            }
            together += usize::from(a / ds == b / ds);
        }
        hits[together] += 1;
    }
    for k in 1..=4 {
        let empirical = hits[k..].iter().sum::<usize>() as f64 / runs as f64;
        let analytic = grouping_probability(k, cycles, ns).unwrap();
        assert!((empirical - analytic).abs() <= 0.005, "k={k}: {empirical} vs {analytic}");
    }
}

#[test]
fn random_grouping_co_grouping_rate() {
    let (d, ns) = (60usize, 6usize);
    let mut rng = epiweights::rng::substream(3, 99, 0, 0);
    let trials = 20_000;
    let mut together = 0;
    for _ in 0..trials {
        let plan = random_grouping(d, ns, &mut rng).unwrap();
        let pos = |v: usize| plan.permutation().iter().position(|&x| x == v).unwrap() / plan.group_dim();
        together += usize::from(pos(0) == pos(1));
    }
    let expected = (d / ns - 1) as f64 / (d - 1) as f64;
    assert!((together as f64 / trials as f64 - expected).abs() < 0.01);
}

#[test]
fn exact_and_normal_rank_sum_agree_for_moderate_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let pooled: Vec<f64> = (0..12).map(|i| rng.gen::<f64>() + if i < 6 { 0.3 } else { 0.0 }).collect();
        let ranks = midranks(&pooled);
        let w: f64 = ranks[..6].iter().sum();
        assert!((exact_p(&ranks, 6, w) - normal_p(&ranks, 6, w)).abs() <= 0.02);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ba_edge_count_formula(m in 1usize..5, extra in 0usize..4, added in 0usize..30, seed in any::<u64>()) {
        let m0 = m + extra;
        let n = m0 + added;
        let net = generate_ba(n, m0, m, seed).unwrap();
        prop_assert_eq!(net.edge_count(), m0 * (m0 - 1) / 2 + (n - m0) * m);
        prop_assert!(net.initial_weights().is_symmetric());
        prop_assert_eq!(net.degrees().iter().sum::<usize>(), 2 * net.edge_count());
        prop_assert_eq!(generate_ba(n, m0, m, seed).unwrap(), net);
        let s = topology_stats(&generate_ba(n, m0, m, seed).unwrap());
        prop_assert!((0.0..=1.0).contains(&s.avg_clustering));
    }

    #[test]
    fn trajectories_stay_in_unit_cube(seed in any::<u64>(), beta in 0.0f64..2.0, gamma in 0.0f64..2.0, p0 in 0.0f64..=1.0) {
        let net = generate_ba(10, 3, 2, seed).unwrap();
        let params = EpidemicParams::uniform(10, beta, gamma, p0, 4, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sched = random_schedule(&net, 4, &mut rng);
        let traj = integrate(&net, &params, &sched).unwrap();
        prop_assert!(traj.p.iter().flatten().all(|p| (0.0..=1.0).contains(p)));
        prop_assert!(objective_value(&traj) >= 0.0);
    }

    #[test]
    fn encode_decode_round_trip(seed in any::<u64>()) {
        let net = generate_ba(7, 3, 2, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sched = random_schedule(&net, 3, &mut rng);
        prop_assert_eq!(decode_candidate(&sched.encode(), 7, 3).unwrap(), sched);
    }
}
