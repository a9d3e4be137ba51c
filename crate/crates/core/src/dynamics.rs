//! NIMFA SIS dynamics under a piecewise-constant weight schedule, the decision
//! vector encoding, and the objective/constraint pair of the weight adaptation
//! problem.
//!
//! Time runs over `[0, T]`. On `[0, 1)` the network keeps its initial weights
//! `w0`; block `t` of the schedule (for `t = 1..T-1`) is active on `[t, t+1)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Network;
use crate::matrix::SquareMatrix;

/// Per-node epidemic rates, initial state and integration grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub p0: Vec<f64>,
    pub horizon: usize,
    pub substeps: usize,
}

pub const DEFAULT_SUBSTEPS: usize = 20;

impl EpidemicParams {
    /// Same rates and initial probability on every node.
    pub fn uniform(n: usize, beta: f64, gamma: f64, p0: f64, horizon: usize, substeps: usize) -> Result<Self> {
        let params = Self {
            beta: vec![beta; n],
            gamma: vec![gamma; n],
            p0: vec![p0; n],
            horizon,
            substeps,
        };
        params.validate(n)?;
        Ok(params)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for (name, v) in [("beta", &self.beta), ("gamma", &self.gamma), ("p0", &self.p0)] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: v.len() });
            }
            if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and nonnegative")));
            }
        }
        if self.p0.iter().any(|&p| p > 1.0) {
            return Err(Error::InvalidParameter("p0 must lie in [0,1]".into()));
        }
        if self.horizon < 2 {
            return Err(Error::InvalidParameter(format!("horizon must be >= 2, got {}", self.horizon)));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidParameter("substeps must be >= 1".into()));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.p0.len()
    }

    pub fn step(&self) -> f64 {
        1.0 / self.substeps as f64
    }

    /// The `k`-th point of the integration grid.
    pub fn grid_time(&self, k: usize) -> f64 {
        k as f64 / self.substeps as f64
    }

    pub fn grid_len(&self) -> usize {
        self.horizon * self.substeps + 1
    }
}

/// Weight matrices for the adaptation window `[1, T)`, one per unit interval.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSchedule {
    blocks: Vec<SquareMatrix>,
}

impl WeightSchedule {
    pub fn new(blocks: Vec<SquareMatrix>) -> Result<Self> {
        let Some(n) = blocks.first().map(SquareMatrix::dim) else {
            return Err(Error::InvalidParameter("schedule needs at least one block".into()));
        };
        for b in &blocks {
            if b.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: b.dim() });
            }
            if (0..n).any(|i| b[(i, i)] != 0.0) {
                return Err(Error::InvalidParameter("schedule blocks must have zero diagonal".into()));
            }
            if b.as_slice().iter().any(|w| !(0.0..=1.0).contains(w)) {
                return Err(Error::InvalidParameter("schedule weights must lie in [0,1]".into()));
            }
        }
        Ok(Self { blocks })
    }

    /// `horizon - 1` copies of `w`.
    pub fn repeated(w: &SquareMatrix, horizon: usize) -> Result<Self> {
        Self::new(vec![w.clone(); horizon.saturating_sub(1)])
    }

    pub fn blocks(&self) -> &[SquareMatrix] {
        &self.blocks
    }

    pub fn node_count(&self) -> usize {
        self.blocks[0].dim()
    }

    /// Number of unit intervals covered, including the fixed `[0, 1)`.
    pub fn horizon(&self) -> usize {
        self.blocks.len() + 1
    }

    /// Matrix in force on `[t, t+1)`; `w0` for `t = 0`.
    pub fn matrix_at<'a>(&'a self, net: &'a Network, interval: usize) -> &'a SquareMatrix {
        if interval == 0 {
            net.initial_weights()
        } else {
            &self.blocks[interval - 1]
        }
    }

    /// Flat decision vector: time-major, then row-major over off-diagonal entries.
    pub fn encode(&self) -> Vec<f64> {
        let n = self.node_count();
        let mut x = Vec::with_capacity(decision_dimension(n, self.horizon()));
        for b in &self.blocks {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        x.push(b[(i, j)]);
                    }
                }
            }
        }
        x
    }

    fn check_shape(&self, net: &Network, horizon: usize) -> Result<()> {
        if self.node_count() != net.node_count() {
            return Err(Error::DimensionMismatch { expected: net.node_count(), actual: self.node_count() });
        }
        if self.horizon() != horizon {
            return Err(Error::DimensionMismatch { expected: horizon - 1, actual: self.blocks.len() });
        }
        Ok(())
    }
}

/// `D = N (N - 1) (T - 1)`
pub fn decision_dimension(n: usize, horizon: usize) -> usize {
    n * n.saturating_sub(1) * horizon.saturating_sub(1)
}

pub fn decode_candidate(x: &[f64], n: usize, horizon: usize) -> Result<WeightSchedule> {
    let d = decision_dimension(n, horizon);
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: x.len() });
    }
    let blocks = x
        .chunks_exact(n * (n - 1))
        .map(|chunk| {
            let mut b = SquareMatrix::zeros(n);
            fill_off_diagonal(chunk, n, |i, j, w| b[(i, j)] = w);
            b
        })
        .collect();
    WeightSchedule::new(blocks)
}

#[inline]
fn fill_off_diagonal(chunk: &[f64], n: usize, mut put: impl FnMut(usize, usize, f64)) {
    let mut k = 0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                put(i, j, chunk[k]);
                k += 1;
            }
        }
    }
}

/// Infection probabilities sampled on the integration grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub p: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn node_count(&self) -> usize {
        self.p.first().map_or(0, Vec::len)
    }

    fn index_of(&self, t: f64) -> Result<usize> {
        const GRID_TOL: f64 = 1e-9;
        let last = *self.times.last().ok_or(Error::InvalidInstant(t))?;
        let k = (t / last * (self.times.len() - 1) as f64).round();
        if !(0.0..self.times.len() as f64).contains(&k) {
            return Err(Error::InvalidInstant(t));
        }
        let k = k as usize;
        if (self.times[k] - t).abs() > GRID_TOL {
            return Err(Error::InvalidInstant(t));
        }
        Ok(k)
    }

    /// CSV with header `t,p_0,...,p_{N-1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.node_count()).map(|i| format!("p_{i}")));
        wtr.write_record(&header)?;
        for (t, row) in self.times.iter().zip(&self.p) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(f64::to_string));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Objective, signed constraint value and its violation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub f: f64,
    pub g: f64,
    pub violation: f64,
}

impl Evaluation {
    pub fn new(f: f64, g: f64) -> Self {
        Self { f, g, violation: g.max(0.0) }
    }
}

/// Fixed-step RK4 over `[0, T]` with `K` substeps per unit time.
///
/// `rates[t]` is the row-major matrix `W(t) B` for interval `[t, t+1)`.
/// `visit(k, p)` is called at every grid point, including `k = 0`.
fn rk4<V: FnMut(usize, &[f64])>(params: &EpidemicParams, rates: &[Vec<f64>], mut visit: V) -> Result<()> {
    let n = params.node_count();
    let h = params.step();
    let gamma = &params.gamma;
    let mut p = params.p0.clone();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    let deriv = |m: &[f64], p: &[f64], out: &mut [f64]| {
        for (i, (o, row)) in out.iter_mut().zip(m.chunks_exact(n)).enumerate() {
            let pressure: f64 = row.iter().zip(p).map(|(a, b)| a * b).sum();
            *o = (1.0 - p[i]) * pressure - gamma[i] * p[i];
        }
    };

    visit(0, &p);
    let mut k = 0;
    for m in rates {
        for _ in 0..params.substeps {
            deriv(m, &p, &mut k1);
            for i in 0..n {
                tmp[i] = p[i] + 0.5 * h * k1[i];
            }
            deriv(m, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = p[i] + 0.5 * h * k2[i];
            }
            deriv(m, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = p[i] + h * k3[i];
            }
            deriv(m, &tmp, &mut k4);
            k += 1;
            for i in 0..n {
                let next = p[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                if !next.is_finite() {
                    return Err(Error::IntegrationFailure { t: params.grid_time(k) });
                }
                p[i] = next.clamp(0.0, 1.0);
            }
            visit(k, &p);
        }
    }
    Ok(())
}

fn rate_matrix(w: &[f64], beta: &[f64]) -> Vec<f64> {
    let n = beta.len();
    let mut m = w.to_vec();
    for row in m.chunks_exact_mut(n) {
        for (x, b) in row.iter_mut().zip(beta) {
            *x *= b;
        }
    }
    m
}

fn check_params(net: &Network, params: &EpidemicParams) -> Result<()> {
    params.validate(net.node_count())
}

pub fn integrate(net: &Network, params: &EpidemicParams, sched: &WeightSchedule) -> Result<Trajectory> {
    check_params(net, params)?;
    sched.check_shape(net, params.horizon)?;
    let rates: Vec<Vec<f64>> = (0..params.horizon)
        .map(|t| rate_matrix(sched.matrix_at(net, t).as_slice(), &params.beta))
        .collect();
    let mut times = Vec::with_capacity(params.grid_len());
    let mut p = Vec::with_capacity(params.grid_len());
    rk4(params, &rates, |k, state| {
        times.push(params.grid_time(k));
        p.push(state.to_vec());
    })?;
    Ok(Trajectory { times, p })
}

#[inline]
fn sqrt_sum(p: &[f64]) -> f64 {
    p.iter().map(|x| x.sqrt()).sum()
}

/// `∫₀ᵀ Σᵢ √pᵢ(t) dt` by the composite trapezoid rule on the sample grid.
pub fn objective_value(traj: &Trajectory) -> f64 {
    let mut total = 0.0;
    for (w, pair) in traj.times.windows(2).zip(traj.p.windows(2)) {
        total += 0.5 * (w[1] - w[0]) * (sqrt_sum(&pair[0]) + sqrt_sum(&pair[1]));
    }
    total
}

/// `Σ_t Σ_ij (w_ij(t) - w0_ij)² - C` over the adaptation window.
pub fn constraint_value(sched: &WeightSchedule, net: &Network, budget: f64) -> Result<f64> {
    if sched.node_count() != net.node_count() {
        return Err(Error::DimensionMismatch { expected: net.node_count(), actual: sched.node_count() });
    }
    let w0 = net.initial_weights().as_slice();
    let cost: f64 = sched
        .blocks()
        .iter()
        .map(|b| b.as_slice().iter().zip(w0).map(|(w, w0)| (w - w0) * (w - w0)).sum::<f64>())
        .sum();
    Ok(cost - budget)
}

/// Mean infection probability `I(t)` at a grid instant.
pub fn infected_level(traj: &Trajectory, t: f64) -> Result<f64> {
    let k = traj.index_of(t)?;
    let row = &traj.p[k];
    Ok(row.iter().sum::<f64>() / row.len() as f64)
}

/// Total off-diagonal weight `W(t)` of the matrix in force at `t ∈ [0, T)`.
pub fn total_weights(sched: &WeightSchedule, net: &Network, t: f64) -> Result<f64> {
    if !(0.0..sched.horizon() as f64).contains(&t) {
        return Err(Error::InvalidInstant(t));
    }
    let m = sched.matrix_at(net, t.floor() as usize);
    let diag: f64 = (0..m.dim()).map(|i| m[(i, i)]).sum();
    Ok(m.sum() - diag)
}

/// One `(t, I(t), W(t))` row per grid point with `t < T`, plus `t = T` for `I`
/// with `W` held at the last block.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub times: Vec<f64>,
    pub infected: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn trace(traj: &Trajectory, sched: &WeightSchedule, net: &Network) -> Result<Trace> {
    let horizon = sched.horizon();
    let mut out = Trace { times: Vec::new(), infected: Vec::new(), weights: Vec::new() };
    for (t, row) in traj.times.iter().zip(&traj.p) {
        let interval = (t.floor() as usize).min(horizon - 1);
        out.times.push(*t);
        out.infected.push(row.iter().sum::<f64>() / row.len() as f64);
        out.weights.push(total_weights(sched, net, interval as f64)?);
    }
    Ok(out)
}

impl Trace {
    /// CSV with header `t,I,W`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["t", "I", "W"])?;
        for ((t, i), w) in self.times.iter().zip(&self.infected).zip(&self.weights) {
            wtr.write_record([t.to_string(), i.to_string(), w.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_infected_csv<W: Write>(&self, out: W) -> Result<()> {
        write_series(out, "I", &self.times, &self.infected)
    }

    pub fn write_weights_csv<W: Write>(&self, out: W) -> Result<()> {
        let horizon = self.times.last().copied().unwrap_or(0.0);
        let keep = self.times.iter().take_while(|&&t| t < horizon).count();
        write_series(out, "W", &self.times[..keep], &self.weights[..keep])
    }
}

fn write_series<W: Write>(out: W, name: &str, t: &[f64], v: &[f64]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["t", name])?;
    for (t, v) in t.iter().zip(v) {
        wtr.write_record([t.to_string(), v.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// The budget-constrained weight adaptation problem on a fixed network.
#[derive(Debug, Clone)]
pub struct WeightProblem {
    net: Network,
    params: EpidemicParams,
    budget: f64,
    w0_rates: Vec<f64>,
}

impl WeightProblem {
    pub fn new(net: Network, params: EpidemicParams, budget: f64) -> Result<Self> {
        check_params(&net, &params)?;
        if !budget.is_finite() || budget < 0.0 {
            return Err(Error::InvalidParameter(format!("budget must be finite and nonnegative, got {budget}")));
        }
        let w0_rates = rate_matrix(net.initial_weights().as_slice(), &params.beta);
        Ok(Self { net, params, budget, w0_rates })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn params(&self) -> &EpidemicParams {
        &self.params
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn dimension(&self) -> usize {
        decision_dimension(self.net.node_count(), self.params.horizon)
    }

    /// Decode, integrate, and score a decision vector.
    ///
    /// Equivalent to `decode_candidate` + `integrate` + `objective_value` +
    /// `constraint_value` without materializing the trajectory.
    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        let n = self.net.node_count();
        let d = self.dimension();
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: x.len() });
        }
        if x.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidParameter("decision variables must lie in [0,1]".into()));
        }
        let w0 = self.net.initial_weights().as_slice();
        let beta = &self.params.beta;
        let mut cost = 0.0;
        let mut rates = Vec::with_capacity(self.params.horizon);
        rates.push(self.w0_rates.clone());
        for chunk in x.chunks_exact(n * (n - 1)) {
            let mut m = vec![0.0; n * n];
            fill_off_diagonal(chunk, n, |i, j, w| {
                let dw = w - w0[i * n + j];
                cost += dw * dw;
                m[i * n + j] = w * beta[j];
            });
            rates.push(m);
        }
        // Diagonal of w0 is zero, so diagonal deviations never contribute.
        let h = self.params.step();
        let last = self.params.grid_len() - 1;
        let mut f = 0.0;
        rk4(&self.params, &rates, |k, p| {
            let s = sqrt_sum(p);
            f += if k == 0 || k == last { 0.5 * h * s } else { h * s };
        })?;
        Ok(Evaluation::new(f, cost - self.budget))
    }

    pub fn evaluate_schedule(&self, sched: &WeightSchedule) -> Result<Evaluation> {
        let traj = integrate(&self.net, &self.params, sched)?;
        let g = constraint_value(sched, &self.net, self.budget)?;
        Ok(Evaluation::new(objective_value(&traj), g))
    }
}

pub fn evaluate_candidate(x: &[f64], net: &Network, params: &EpidemicParams, budget: f64) -> Result<Evaluation> {
    WeightProblem::new(net.clone(), params.clone(), budget)?.evaluate(x)
}
