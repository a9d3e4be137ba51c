//! Two-sided Wilcoxon rank-sum test and the per-algorithm summary table.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Largest combined sample size handled by exact enumeration.
pub const EXACT_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankSumMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumTest {
    /// Sum of the midranks of the first sample.
    pub statistic: f64,
    pub p_value: f64,
    pub method: RankSumMethod,
}

/// Midranks (1-based, ties averaged) of the concatenation `a ++ b`.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

fn tie_term(ranks: &[f64]) -> f64 {
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .chunk_by(|x, y| x == y)
        .map(|g| {
            let t = g.len() as f64;
            t * t * t - t
        })
        .sum()
}

pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<RankSumTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let n1 = a.len();
    let total = n1 + b.len();
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let w: f64 = ranks[..n1].iter().sum();
    if total <= EXACT_LIMIT {
        Ok(RankSumTest { statistic: w, p_value: exact_p(&ranks, n1, w), method: RankSumMethod::Exact })
    } else {
        Ok(RankSumTest { statistic: w, p_value: normal_p(&ranks, n1, w), method: RankSumMethod::Normal })
    }
}

/// Exact two-sided p-value: share of all `C(N, n1)` rank assignments whose
/// rank sum lies at least as far from its mean as the observed one.
pub fn exact_p(ranks: &[f64], n1: usize, observed: f64) -> f64 {
    let n = ranks.len();
    let mean = n1 as f64 * (n + 1) as f64 / 2.0;
    let dev = (observed - mean).abs() - 1e-9;
    let mut extreme = 0u64;
    let mut count = 0u64;
    let mut pick: Vec<usize> = (0..n1).collect();
    loop {
        let s: f64 = pick.iter().map(|&k| ranks[k]).sum();
        count += 1;
        if (s - mean).abs() >= dev {
            extreme += 1;
        }
        // Next combination in lexicographic order.
        let Some(pos) = (0..n1).rev().find(|&i| pick[i] < n - n1 + i) else { break };
        pick[pos] += 1;
        for i in pos + 1..n1 {
            pick[i] = pick[i - 1] + 1;
        }
    }
    extreme as f64 / count as f64
}

/// Normal approximation with tie and continuity corrections.
pub fn normal_p(ranks: &[f64], n1: usize, observed: f64) -> f64 {
    let n = ranks.len() as f64;
    let (n1f, n2f) = (n1 as f64, n - n1 as f64);
    let u = observed - n1f * (n1f + 1.0) / 2.0;
    let mean = n1f * n2f / 2.0;
    let var = n1f * n2f / 12.0 * ((n + 1.0) - tie_term(ranks) / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Final objective values of one algorithm's runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSample {
    pub algorithm: String,
    pub ofv: Vec<f64>,
    pub infeasible_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub mean_ofv: f64,
    pub std: f64,
    /// `None` for the reference algorithm itself.
    pub p_value: Option<f64>,
    pub best: bool,
    pub infeasible_runs: usize,
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean ± std per algorithm and rank-sum p-values against `reference`.
///
/// A deterministic strategy reported as a single value is replicated to the
/// size of the sample it is compared with.
pub fn summarize(samples: &[AlgorithmSample], reference: &str) -> Result<Vec<SummaryRow>> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if samples.iter().any(|s| s.ofv.is_empty()) {
        return Err(Error::EmptySample);
    }
    let reference = samples.iter().find(|s| s.algorithm == reference);
    let mut rows: Vec<SummaryRow> = samples
        .iter()
        .map(|s| {
            let (mean_ofv, std) = mean_std(&s.ofv);
            let p_value = match reference {
                Some(r) if r.algorithm != s.algorithm => {
                    let (x, y) = match (r.ofv.len(), s.ofv.len()) {
                        (1, m) if m > 1 => (vec![r.ofv[0]; m], s.ofv.clone()),
                        (m, 1) if m > 1 => (r.ofv.clone(), vec![s.ofv[0]; m]),
                        _ => (r.ofv.clone(), s.ofv.clone()),
                    };
                    Some(wilcoxon_rank_sum(&x, &y)?.p_value)
                }
                _ => None,
            };
            Ok(SummaryRow {
                algorithm: s.algorithm.clone(),
                mean_ofv,
                std,
                p_value,
                best: false,
                infeasible_runs: s.infeasible_runs,
            })
        })
        .collect::<Result<_>>()?;
    if let Some(best) = rows
        .iter_mut()
        .min_by(|a, b| a.mean_ofv.total_cmp(&b.mean_ofv))
    {
        best.best = true;
    }
    Ok(rows)
}

/// `algorithm,mean_ofv,std,p_value,best,infeasible_runs`; the reference row has `-` as p-value.
pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["algorithm", "mean_ofv", "std", "p_value", "best", "infeasible_runs"])?;
    for r in rows {
        wtr.write_record([
            r.algorithm.clone(),
            format!("{:.4}", r.mean_ofv),
            format!("{:.4}", r.std),
            r.p_value.map_or_else(|| "-".to_string(), |p| format!("{p:.4e}")),
            r.best.to_string(),
            r.infeasible_runs.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
