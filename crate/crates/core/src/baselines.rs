//! Reference strategies: keep the initial weights, or scale them uniformly so
//! the adaptation budget is used exactly.

use crate::dynamics::WeightSchedule;
use crate::error::{Error, Result};
use crate::graph::Network;

pub fn no_adaptation_schedule(net: &Network, horizon: usize) -> Result<WeightSchedule> {
    WeightSchedule::repeated(net.initial_weights(), horizon)
}

/// Ratio `c` with `Σ_{t=1}^{T-1} Σ_ij (c w0 - w0)² = C`, i.e.
/// `c = 1 - sqrt(C / ((T-1) S))` where `S = Σ_ij w0²`.
pub fn constant_adaptation_ratio(net: &Network, horizon: usize, budget: f64) -> Result<f64> {
    let s = net.initial_weights().sum_of_squares();
    if s <= 0.0 {
        return Err(Error::InvalidParameter("network has no weights to adapt".into()));
    }
    if horizon < 2 {
        return Err(Error::InvalidParameter(format!("horizon must be >= 2, got {horizon}")));
    }
    if !(budget >= 0.0) {
        return Err(Error::InvalidParameter(format!("budget must be nonnegative, got {budget}")));
    }
    let max = (horizon - 1) as f64 * s;
    if budget > max {
        return Err(Error::InfeasibleBudget { budget, max });
    }
    Ok(1.0 - (budget / max).sqrt())
}

pub fn constant_adaptation_schedule(net: &Network, horizon: usize, budget: f64) -> Result<WeightSchedule> {
    let c = constant_adaptation_ratio(net, horizon, budget)?;
    WeightSchedule::repeated(&net.initial_weights().scaled(c), horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{constraint_value, integrate, objective_value, total_weights, EpidemicParams, WeightProblem};
    use crate::graph::generate_ba;
    use approx::assert_abs_diff_eq;

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        // f decreasing on [lo, hi]
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn ratio_endpoints() {
        let net = generate_ba(20, 5, 5, 1).unwrap();
        assert_eq!(constant_adaptation_ratio(&net, 10, 0.0).unwrap(), 1.0);
        assert_eq!(constant_adaptation_ratio(&net, 10, 1530.0).unwrap(), 0.0);
        assert!(matches!(constant_adaptation_ratio(&net, 10, 1530.5), Err(Error::InfeasibleBudget { .. })));
    }

    #[test]
    fn ratio_at_reference_setup() {
        let net = generate_ba(20, 5, 5, 1).unwrap();
        let c = constant_adaptation_ratio(&net, 10, 700.0).unwrap();
        assert_abs_diff_eq!(c, 1.0 - (700.0f64 / 1530.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(c, 0.3236, epsilon = 5e-4);
    }

    #[test]
    fn ratio_is_the_root_of_the_budget_equation() {
        for (seed, budget) in [(1u64, 700.0), (2, 10.0), (3, 1500.0), (4, 333.3)] {
            let net = generate_ba(20, 5, 5, seed).unwrap();
            let s = net.initial_weights().sum_of_squares();
            let excess = |c: f64| 9.0 * (1.0 - c).powi(2) * s - budget;
            let root = bisect(excess, 0.0, 1.0);
            assert_abs_diff_eq!(constant_adaptation_ratio(&net, 10, budget).unwrap(), root, epsilon = 1e-10);
        }
    }

    #[test]
    fn schedules_against_the_budget() {
        let net = generate_ba(20, 5, 5, 2).unwrap();
        let none = no_adaptation_schedule(&net, 10).unwrap();
        assert_eq!(constraint_value(&none, &net, 700.0).unwrap(), -700.0);
        let constant = constant_adaptation_schedule(&net, 10, 700.0).unwrap();
        assert_abs_diff_eq!(constraint_value(&constant, &net, 700.0).unwrap(), 0.0, epsilon = 1e-9);
        let c = constant_adaptation_ratio(&net, 10, 700.0).unwrap();
        for t in 0..10 {
            let t = t as f64;
            assert_eq!(total_weights(&none, &net, t).unwrap(), 170.0);
            let expect = if t < 1.0 { 170.0 } else { 170.0 * c };
            assert_abs_diff_eq!(total_weights(&constant, &net, t).unwrap(), expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn constant_beats_no_adaptation() {
        let net = generate_ba(20, 5, 5, 3).unwrap();
        let params = EpidemicParams::uniform(20, 0.4, 0.3, 0.153, 10, 20).unwrap();
        let problem = WeightProblem::new(net.clone(), params.clone(), 700.0).unwrap();
        let none = no_adaptation_schedule(&net, 10).unwrap();
        let constant = constant_adaptation_schedule(&net, 10, 700.0).unwrap();
        let f_none = problem.evaluate_schedule(&none).unwrap().f;
        let f_const = problem.evaluate_schedule(&constant).unwrap().f;
        assert_eq!(f_none, objective_value(&integrate(&net, &params, &none).unwrap()));
        assert!(f_const < f_none);
    }
}
