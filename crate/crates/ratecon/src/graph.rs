//! Random geometric network topologies on the unit torus and the symmetric
//! doubly stochastic weight matrices used for consensus averaging.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{role, stream};
use crate::Real;

/// Attempts at regenerating a disconnected random draw before giving up.
const MAX_REGENERATION_ATTEMPTS: usize = 64;

/// A random geometric graph on the unit torus `[0,1)^2`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "TopologyWire<T>", into = "TopologyWire<T>")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct Topology<T: Real> {
    m: usize,
    rho_c: T,
    seed: Option<u64>,
    positions: Vec<[T; 2]>,
    adjacency: Vec<bool>,
    degrees: Vec<usize>,
}

/// Wire format: edges as index pairs rather than a dense boolean matrix.
#[derive(Serialize, Deserialize)]
struct TopologyWire<T> {
    m: usize,
    rho_c: T,
    seed: Option<u64>,
    positions: Vec<[T; 2]>,
    edges: Vec<[usize; 2]>,
}

impl<T: Real> From<Topology<T>> for TopologyWire<T> {
    fn from(t: Topology<T>) -> Self {
        TopologyWire {
            m: t.m,
            rho_c: t.rho_c,
            seed: t.seed,
            edges: t.edges(),
            positions: t.positions,
        }
    }
}

impl<T: Real> TryFrom<TopologyWire<T>> for Topology<T> {
    type Error = Error;
    fn try_from(w: TopologyWire<T>) -> Result<Self> {
        if w.positions.len() != w.m {
            return Err(Error::InvalidConfig(format!(
                "topology lists {} positions for m={}",
                w.positions.len(),
                w.m
            )));
        }
        let mut t = Topology::from_positions(w.positions, w.rho_c)?;
        t.seed = w.seed;
        // the edge list is re-derived from positions; reject documents whose
        // stored edges disagree with the geometry
        if t.edges() != w.edges {
            return Err(Error::InvalidConfig(
                "topology edge list inconsistent with positions and rho_c".into(),
            ));
        }
        Ok(t)
    }
}

/// Distance on the unit torus: per-coordinate wrap `min(|d|, 1-|d|)`.
pub fn toroidal_distance<T: Real>(a: [T; 2], b: [T; 2]) -> T {
    let mut acc = T::zero();
    for k in 0..2 {
        let d = (a[k] - b[k]).abs();
        let d = d.min(T::one() - d);
        acc = acc + d * d;
    }
    acc.sqrt()
}

impl<T: Real> Topology<T> {
    /// Build a topology from explicit positions; adjacency follows from the
    /// toroidal metric and `rho_c`. Radii beyond the torus diameter
    /// `sqrt(2)/2` clamp to the complete graph.
    pub fn from_positions(positions: Vec<[T; 2]>, rho_c: T) -> Result<Self> {
        let m = positions.len();
        if m == 0 {
            return Err(Error::InvalidConfig("node count m must be positive".into()));
        }
        if rho_c < T::zero() {
            return Err(Error::InvalidConfig("rho_c must be nonnegative".into()));
        }
        let diameter = T::of(std::f64::consts::SQRT_2 / 2.0);
        let rho_c = rho_c.min(diameter);
        let mut adjacency = vec![false; m * m];
        for i in 0..m {
            for j in (i + 1)..m {
                if toroidal_distance(positions[i], positions[j]) <= rho_c {
                    adjacency[i * m + j] = true;
                    adjacency[j * m + i] = true;
                }
            }
        }
        let degrees = (0..m)
            .map(|i| (0..m).filter(|&j| adjacency[i * m + j]).count())
            .collect();
        Ok(Topology { m, rho_c, seed: None, positions, adjacency, degrees })
    }

    pub fn node_count(&self) -> usize {
        self.m
    }

    pub fn rho_c(&self) -> T {
        self.rho_c
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn positions(&self) -> &[[T; 2]] {
        &self.positions
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.m + j]
    }

    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut out = Vec::new();
        for i in 0..self.m {
            for j in (i + 1)..self.m {
                if self.has_edge(i, j) {
                    out.push([i, j]);
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.degrees.iter().sum::<usize>() / 2
    }
}

/// Generate a connected random geometric graph with positions drawn i.i.d.
/// uniform on `[0,1)^2` from a counter-based stream keyed by `seed`.
///
/// Disconnected draws are rejected and regenerated with an incremented
/// sub-seed; deterministic for a fixed seed.
pub fn generate_rgg_torus<T: Real>(m: usize, rho_c: T, seed: u64) -> Result<Topology<T>> {
    if m == 0 {
        return Err(Error::InvalidConfig("node count m must be positive".into()));
    }
    for attempt in 0..MAX_REGENERATION_ATTEMPTS {
        let mut rng = stream(seed, &[role::POSITION, attempt as u64]);
        let positions: Vec<[T; 2]> = (0..m)
            .map(|_| [T::of(rng.gen::<f64>()), T::of(rng.gen::<f64>())])
            .collect();
        let mut topo = Topology::from_positions(positions, rho_c)?;
        topo.seed = Some(seed);
        if is_connected(&topo) {
            return Ok(topo);
        }
    }
    Err(Error::GenerationFailed(MAX_REGENERATION_ATTEMPTS))
}

/// Breadth-first reachability from node 0.
pub fn is_connected<T: Real>(t: &Topology<T>) -> bool {
    let m = t.node_count();
    let mut seen = vec![false; m];
    let mut queue = std::collections::VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for j in 0..m {
            if !seen[j] && t.has_edge(i, j) {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count == m
}

/// Symmetric doubly stochastic consensus averaging matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct WeightMatrix<T: Real> {
    w: Matrix<T>,
    alpha: Option<T>,
}

impl<T: Real> WeightMatrix<T> {
    pub fn matrix(&self) -> &Matrix<T> {
        &self.w
    }

    pub fn alpha(&self) -> Option<T> {
        self.alpha
    }

    pub fn size(&self) -> usize {
        self.w.rows()
    }

    /// Largest row/column-sum deviation from 1 and worst asymmetry.
    pub fn stochasticity_defect(&self) -> T {
        let n = self.size();
        let mut worst = self.w.max_abs_asymmetry();
        for i in 0..n {
            let rs: T = (0..n).map(|j| self.w[(i, j)]).sum();
            let cs: T = (0..n).map(|j| self.w[(j, i)]).sum();
            worst = worst.max((rs - T::one()).abs()).max((cs - T::one()).abs());
        }
        worst
    }

    /// Second-largest eigenvalue modulus; below 1 iff consensus converges.
    pub fn slem(&self) -> T {
        let eigs = self.w.symmetric_eigenvalues();
        let n = eigs.len();
        // drop the single eigenvalue closest to 1
        let mut best = T::infinity();
        let mut drop = 0;
        for (k, &e) in eigs.iter().enumerate() {
            let d = (e - T::one()).abs();
            if d < best {
                best = d;
                drop = k;
            }
        }
        (0..n)
            .filter(|&k| k != drop)
            .map(|k| eigs[k].abs())
            .fold(T::zero(), T::max)
    }

    fn validated(w: Matrix<T>, alpha: Option<T>) -> Result<Self> {
        let wm = WeightMatrix { w, alpha };
        let tol = T::epsilon() * T::of(1e3);
        if wm.stochasticity_defect() > tol {
            return Err(Error::Numerical(format!(
                "weight matrix defect {} exceeds tolerance",
                wm.stochasticity_defect()
            )));
        }
        Ok(wm)
    }
}

/// Max-degree weights: `W = I - alpha L` with `alpha = 0.9 / max_i deg i`.
pub fn max_degree_weights<T: Real>(t: &Topology<T>) -> Result<WeightMatrix<T>> {
    let max_deg = *t.degrees().iter().max().unwrap();
    if max_deg == 0 || !is_connected(t) {
        return Err(Error::Disconnected);
    }
    let m = t.node_count();
    let alpha = T::of(0.9) / T::of(max_deg as f64);
    let w = Matrix::from_fn(m, m, |i, j| {
        if i == j {
            T::one() - alpha * T::of(t.degrees()[i] as f64)
        } else if t.has_edge(i, j) {
            alpha
        } else {
            T::zero()
        }
    });
    WeightMatrix::validated(w, Some(alpha))
}

/// Metropolis-Hastings weights: `w_ij = 1/(1 + max(deg i, deg j))` on edges,
/// diagonal absorbing the residual.
pub fn metropolis_weights<T: Real>(t: &Topology<T>) -> Result<WeightMatrix<T>> {
    if !is_connected(t) || t.edge_count() == 0 {
        return Err(Error::Disconnected);
    }
    let m = t.node_count();
    let mut w = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if i != j && t.has_edge(i, j) {
                let d = t.degrees()[i].max(t.degrees()[j]);
                w[(i, j)] = T::one() / T::of(1.0 + d as f64);
            }
        }
    }
    for i in 0..m {
        let off: T = (0..m).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = T::one() - off;
    }
    WeightMatrix::validated(w, None)
}
