//! Contact networks: Barabási–Albert generation, topology metrics, spectral
//! radius and the NIMFA epidemic threshold.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::rng::substream;

/// Undirected contact network with its initial weight matrix.
///
/// `edges` holds unordered pairs as `(i, j)` with `i < j`, sorted. `w0[(i, j)]`
/// is the weight of the link from `j` to `i`; it is positive exactly on edges
/// and zero on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    n: usize,
    edges: Vec<(usize, usize)>,
    w0: SquareMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyStats {
    pub avg_degree: f64,
    pub avg_clustering: f64,
    pub density: f64,
}

impl Network {
    /// Builds a unit-weight network from an edge list.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidParameter(format!("edge ({a},{b}) out of range for {n} nodes")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidParameter(format!("duplicate edge ({a},{b})")));
            }
        }
        let mut w0 = SquareMatrix::zeros(n);
        for &(i, j) in &set {
            w0[(i, j)] = 1.0;
            w0[(j, i)] = 1.0;
        }
        Ok(Self { n, edges: set.into_iter().collect(), w0 })
    }

    /// Builds a network from a symmetric weight matrix with entries in `[0, 1]`.
    pub fn from_weights(w0: SquareMatrix) -> Result<Self> {
        let n = w0.dim();
        let mut edges = Vec::new();
        for i in 0..n {
            if w0[(i, i)] != 0.0 {
                return Err(Error::NetworkFormat(format!("nonzero diagonal at node {i}")));
            }
            for j in 0..n {
                let w = w0[(i, j)];
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::NetworkFormat(format!("weight {w} at ({i},{j}) outside [0,1]")));
                }
                if w != w0[(j, i)] {
                    return Err(Error::NetworkFormat(format!("asymmetric weight at ({i},{j})")));
                }
                if i < j && w > 0.0 {
                    edges.push((i, j));
                }
            }
        }
        Ok(Self { n, edges, w0 })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn initial_weights(&self) -> &SquareMatrix {
        &self.w0
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors().iter().map(Vec::len).collect()
    }

    /// Writes the `i,j,w` CSV: one row per directed nonzero weight.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["i", "j", "w"])?;
        for i in 0..self.n {
            for j in 0..self.n {
                let w = self.w0[(i, j)];
                if w > 0.0 {
                    wtr.write_record([i.to_string(), j.to_string(), w.to_string()])?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the `i,j,w` CSV. The node count is one more than the largest id
    /// seen unless `n` is given.
    pub fn read_csv<R: Read>(input: R, n: Option<usize>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["i", "j", "w"] {
            return Err(Error::NetworkFormat(format!("expected header i,j,w, found {:?}", headers)));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse_id = |k: usize| {
                rec[k].trim().parse::<usize>().map_err(|e| Error::NetworkFormat(format!("bad node id {:?}: {e}", &rec[k])))
            };
            let w: f64 = rec[2]
                .trim()
                .parse()
                .map_err(|e| Error::NetworkFormat(format!("bad weight {:?}: {e}", &rec[2])))?;
            rows.push((parse_id(0)?, parse_id(1)?, w));
        }
        let max_id = rows.iter().map(|&(i, j, _)| i.max(j) + 1).max().unwrap_or(0);
        let n = n.unwrap_or(max_id);
        if max_id > n {
            return Err(Error::NetworkFormat(format!("node id {} exceeds node count {n}", max_id - 1)));
        }
        let mut w0 = SquareMatrix::zeros(n);
        for (i, j, w) in rows {
            if w <= 0.0 {
                return Err(Error::NetworkFormat(format!("non-positive weight listed at ({i},{j})")));
            }
            if w0[(i, j)] != 0.0 {
                return Err(Error::NetworkFormat(format!("duplicate row ({i},{j})")));
            }
            w0[(i, j)] = w;
        }
        Self::from_weights(w0)
    }
}

/// Barabási–Albert preferential attachment.
///
/// Starts from `m0` fully connected nodes; every later node links to `m`
/// distinct existing nodes drawn with probability proportional to degree.
/// A draw that hits an already chosen target is discarded and redrawn, so the
/// edge count is always `m0(m0-1)/2 + (n-m0)m`.
pub fn generate_ba(n: usize, m0: usize, m: usize, seed: u64) -> Result<Network> {
    if m == 0 || m > m0 || m0 > n {
        return Err(Error::InvalidParameter(format!("need 1 <= m <= m0 <= n, got n={n}, m0={m0}, m={m}")));
    }
    let mut rng = substream(seed, 0xBA, n as u64, ((m0 as u64) << 32) | m as u64);
    let mut edges = Vec::with_capacity(m0 * (m0 - 1) / 2 + (n - m0) * m);
    // Each node appears once per incident edge, so a uniform pick from this
    // list is a degree-proportional pick.
    let mut endpoints: Vec<usize> = Vec::new();
    for i in 0..m0 {
        for j in i + 1..m0 {
            edges.push((i, j));
            endpoints.push(i);
            endpoints.push(j);
        }
    }
    for v in m0..n {
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        while targets.len() < m {
            // m0 == 1 leaves no edges to sample from; attach uniformly.
            let t = if endpoints.is_empty() {
                rng.gen_range(0..v)
            } else {
                endpoints[rng.gen_range(0..endpoints.len())]
            };
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for t in targets {
            edges.push((t, v));
            endpoints.push(t);
            endpoints.push(v);
        }
    }
    Network::from_edges(n, edges)
}

pub fn topology_stats(net: &Network) -> TopologyStats {
    let n = net.node_count();
    let m = net.edge_count() as f64;
    let adj = net.neighbors();
    let w = net.initial_weights();
    let clustering: f64 = adj
        .iter()
        .map(|nbrs| {
            let k = nbrs.len();
            if k < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (a, &u) in nbrs.iter().enumerate() {
                for &v in &nbrs[a + 1..] {
                    if w[(u, v)] > 0.0 {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (k * (k - 1)) as f64
        })
        .sum();
    let nf = n as f64;
    TopologyStats {
        avg_degree: 2.0 * m / nf,
        avg_clustering: clustering / nf,
        density: if n < 2 { 0.0 } else { 2.0 * m / (nf * (nf - 1.0)) },
    }
}

pub const DEFAULT_POWER_TOL: f64 = 1e-10;
pub const POWER_ITERATION_CAP: usize = 10_000;

/// Largest eigenvalue (Perron root) of a nonnegative matrix by power iteration.
///
/// Iterates on `A + I` from the all-ones vector; the unit shift keeps
/// bipartite and otherwise periodic matrices from oscillating. The estimate is
/// the 1-norm growth ratio, which is exact at the Perron vector.
pub fn spectral_radius(a: &SquareMatrix, tol: f64) -> Result<f64> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    if a.as_slice().iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidParameter("matrix must be finite and nonnegative".into()));
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut y = vec![0.0; n];
    let mut estimate = f64::NAN;
    for _ in 0..POWER_ITERATION_CAP {
        a.mul_vec_into(&x, &mut y);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi += xi;
        }
        let norm: f64 = y.iter().sum();
        let next = norm - 1.0;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
        if (next - estimate).abs() <= tol * next.abs().max(1.0) {
            return Ok(next.max(0.0));
        }
        estimate = next;
    }
    Err(Error::NotConverged { iterations: POWER_ITERATION_CAP, estimate })
}

/// NIMFA epidemic threshold `1 / λ_max(W0)`.
pub fn epidemic_threshold(net: &Network) -> Result<f64> {
    let rho = spectral_radius(net.initial_weights(), DEFAULT_POWER_TOL)?;
    if rho <= 0.0 {
        return Err(Error::ZeroSpectralRadius);
    }
    Ok(1.0 / rho)
}
