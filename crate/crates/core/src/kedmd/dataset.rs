use std::collections::HashSet;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dde::Trajectory;
use crate::discretize::DiscretizationGrid;
use crate::error::{Error, Result};

/// Ordered transition pairs (z, z⁺) of discretized states harvested from
/// trajectories at the sampling interval Δ, with per-pair provenance
/// (trajectory index, step index).
#[derive(Debug, Clone)]
pub struct TransitionDataset {
    n: usize,
    m: usize,
    delta: f64,
    delay: f64,
    predecessors: Vec<DVector<f64>>,
    successors: Vec<DVector<f64>>,
    provenance: Vec<(usize, usize)>,
}

impl TransitionDataset {
    /// Assembles a dataset directly from pairs (used for synthetic dynamics
    /// and oracle-generated studies).
    pub fn from_pairs(
        n: usize,
        m: usize,
        delta: f64,
        delay: f64,
        predecessors: Vec<DVector<f64>>,
        successors: Vec<DVector<f64>>,
        provenance: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if predecessors.len() != successors.len() || predecessors.len() != provenance.len() {
            return Err(Error::LengthMismatch(format!(
                "{} predecessors, {} successors, {} provenance entries",
                predecessors.len(),
                successors.len(),
                provenance.len()
            )));
        }
        for z in predecessors.iter().chain(successors.iter()) {
            if z.len() != n * m {
                return Err(Error::DimensionMismatch {
                    expected: n * m,
                    got: z.len(),
                });
            }
        }
        Ok(Self {
            n,
            m,
            delta,
            delay,
            predecessors,
            successors,
            provenance,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// nM, the ambient dimension of the discretized states.
    pub fn ambient_dim(&self) -> usize {
        self.n * self.m
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    /// Number of transition pairs N.
    pub fn len(&self) -> usize {
        self.predecessors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predecessors.is_empty()
    }

    pub fn predecessors(&self) -> &[DVector<f64>] {
        &self.predecessors
    }

    pub fn successors(&self) -> &[DVector<f64>] {
        &self.successors
    }

    pub fn pair(&self, i: usize) -> (&DVector<f64>, &DVector<f64>) {
        (&self.predecessors[i], &self.successors[i])
    }

    pub fn provenance(&self, i: usize) -> (usize, usize) {
        self.provenance[i]
    }

    /// Indices of the first occurrence of each distinct predecessor state
    /// (exact bit equality), in dataset order.
    pub fn distinct_predecessor_indices(&self) -> Vec<usize> {
        let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(self.len());
        let mut out = Vec::new();
        for (i, z) in self.predecessors.iter().enumerate() {
            let key: Vec<u64> = z.iter().map(|v| v.to_bits()).collect();
            if seen.insert(key) {
                out.push(i);
            }
        }
        out
    }
}

/// Builds the dataset of pairs (Q(φ_k), Q(φ_{k+1})) from every consecutive
/// segment pair of every trajectory.
pub fn build_dataset(
    trajectories: &[Trajectory],
    grid: &DiscretizationGrid,
) -> Result<TransitionDataset> {
    let first = trajectories.first().ok_or_else(|| {
        Error::InconsistentTrajectories("no trajectories provided".into())
    })?;
    let n = first.state_dim();
    let delta = first.delta();
    let delay = first.delay();
    for (i, t) in trajectories.iter().enumerate() {
        if t.state_dim() != n || t.delta() != delta || t.delay() != delay {
            return Err(Error::InconsistentTrajectories(format!(
                "trajectory {i} disagrees on (n, delta, tau_d)"
            )));
        }
    }
    if (grid.delay() - delay).abs() > 1e-9 * delay {
        return Err(Error::InconsistentTrajectories(format!(
            "grid delay {} vs trajectory delay {delay}",
            grid.delay()
        )));
    }

    let m = grid.m();
    let mut predecessors = Vec::new();
    let mut successors = Vec::new();
    let mut provenance = Vec::new();
    for (traj_id, traj) in trajectories.iter().enumerate() {
        let n_steps = traj.n_steps();
        let mut states: Vec<DVector<f64>> = Vec::with_capacity(n_steps + 1);
        for k in 0..=n_steps {
            let t_k = traj.sample_time(k);
            let mut z = DVector::zeros(n * m);
            for j in 0..m {
                z.rows_mut(j * n, n)
                    .copy_from(&traj.dense_eval(t_k + grid.theta(j)));
            }
            states.push(z);
        }
        for k in 0..n_steps {
            predecessors.push(states[k].clone());
            successors.push(states[k + 1].clone());
            provenance.push((traj_id, k));
        }
    }
    TransitionDataset::from_pairs(n, m, delta, delay, predecessors, successors, provenance)
}

/// Center selection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterStrategy {
    /// k-center greedy: start at the state nearest the cloud centroid, then
    /// repeatedly add the point maximizing the min-distance to the chosen
    /// set (2-approximation of the optimal fill distance). Deterministic;
    /// the seed is unused.
    GreedyFarthest,
    /// Snap the nodes of an axis-aligned grid over the bounding box to their
    /// nearest distinct predecessors, topping up greedily if collisions leave
    /// fewer than p.
    Grid,
    /// Uniform random sample of distinct predecessors.
    Random,
}

impl std::str::FromStr for CenterStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy_farthest" | "greedy" => Ok(Self::GreedyFarthest),
            "grid" => Ok(Self::Grid),
            "random" => Ok(Self::Random),
            other => Err(Error::Config(format!("unknown center strategy '{other}'"))),
        }
    }
}

/// Selects p pairwise-distinct centers from the dataset's predecessor states.
pub fn select_centers(
    dataset: &TransitionDataset,
    p: usize,
    strategy: CenterStrategy,
    seed: u64,
) -> Result<Vec<DVector<f64>>> {
    let distinct = dataset.distinct_predecessor_indices();
    let cloud: Vec<&DVector<f64>> = distinct.iter().map(|&i| &dataset.predecessors()[i]).collect();
    let picked = select_indices_from_cloud(&cloud, p, strategy, seed)?;
    Ok(picked.into_iter().map(|i| cloud[i].clone()).collect())
}

/// Center selection over an arbitrary point cloud (already deduplicated).
/// Returns indices into the cloud.
pub(crate) fn select_indices_from_cloud(
    cloud: &[&DVector<f64>],
    p: usize,
    strategy: CenterStrategy,
    seed: u64,
) -> Result<Vec<usize>> {
    if cloud.len() < p {
        return Err(Error::InsufficientData {
            requested: p,
            available: cloud.len(),
        });
    }
    Ok(match strategy {
        CenterStrategy::GreedyFarthest => greedy_indices(cloud, p),
        CenterStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::index::sample(&mut rng, cloud.len(), p).into_vec()
        }
        CenterStrategy::Grid => grid_indices(cloud, p),
    })
}

fn greedy_indices(cloud: &[&DVector<f64>], p: usize) -> Vec<usize> {
    let dim = cloud[0].len();
    let mut centroid = DVector::zeros(dim);
    for z in cloud {
        centroid += *z;
    }
    centroid /= cloud.len() as f64;
    let first = argmin_by(cloud.len(), |i| (cloud[i] - &centroid).norm());
    let mut chosen = Vec::with_capacity(p);
    chosen.push(first);
    let mut min_dist: Vec<f64> = cloud.iter().map(|z| (*z - cloud[first]).norm()).collect();
    while chosen.len() < p {
        let next = argmax_by(cloud.len(), |i| min_dist[i]);
        chosen.push(next);
        for (i, d) in min_dist.iter_mut().enumerate() {
            let nd = (cloud[i] - cloud[next]).norm();
            if nd < *d {
                *d = nd;
            }
        }
    }
    chosen
}

/// Greedy continuation used for fill-distance matching: extends the greedy
/// sequence until the max-min distance over the cloud drops to `target`, or
/// `p_max` centers are reached. Returns the chosen indices into the distinct
/// predecessor list and the achieved fill distance.
pub(crate) fn greedy_until_fill(
    dataset: &TransitionDataset,
    target: f64,
    p_max: usize,
) -> Result<(Vec<DVector<f64>>, f64)> {
    let distinct = dataset.distinct_predecessor_indices();
    if distinct.is_empty() {
        return Err(Error::InsufficientData {
            requested: 1,
            available: 0,
        });
    }
    let cloud: Vec<&DVector<f64>> = distinct.iter().map(|&i| &dataset.predecessors()[i]).collect();
    let dim = cloud[0].len();
    let mut centroid = DVector::zeros(dim);
    for z in &cloud {
        centroid += *z;
    }
    centroid /= cloud.len() as f64;
    let first = argmin_by(cloud.len(), |i| (cloud[i] - &centroid).norm());
    let mut chosen = vec![first];
    let mut min_dist: Vec<f64> = cloud.iter().map(|z| (*z - cloud[first]).norm()).collect();
    loop {
        let next = argmax_by(cloud.len(), |i| min_dist[i]);
        let fill = min_dist[next];
        if fill <= target || chosen.len() >= p_max.min(cloud.len()) {
            let centers = chosen.iter().map(|&i| cloud[i].clone()).collect();
            return Ok((centers, fill));
        }
        chosen.push(next);
        for (i, d) in min_dist.iter_mut().enumerate() {
            let nd = (cloud[i] - cloud[next]).norm();
            if nd < *d {
                *d = nd;
            }
        }
    }
}

fn grid_indices(cloud: &[&DVector<f64>], p: usize) -> Vec<usize> {
    let dim = cloud[0].len();
    let per_axis = (p as f64).powf(1.0 / dim as f64).ceil() as usize;
    let per_axis = per_axis.max(2);
    let mut lo = cloud[0].clone();
    let mut hi = cloud[0].clone();
    for z in cloud {
        for d in 0..dim {
            lo[d] = lo[d].min(z[d]);
            hi[d] = hi[d].max(z[d]);
        }
    }
    // enumerate grid nodes in lexicographic order, snap to nearest cloud point
    let mut chosen: Vec<usize> = Vec::new();
    let mut used = vec![false; cloud.len()];
    let total = per_axis.pow(dim as u32);
    for node_id in 0..total {
        if chosen.len() == p {
            break;
        }
        let mut node = DVector::zeros(dim);
        let mut rem = node_id;
        for d in 0..dim {
            let idx = rem % per_axis;
            rem /= per_axis;
            node[d] = lo[d] + (hi[d] - lo[d]) * idx as f64 / (per_axis - 1) as f64;
        }
        let nearest = argmin_by(cloud.len(), |i| (cloud[i] - &node).norm());
        if !used[nearest] {
            used[nearest] = true;
            chosen.push(nearest);
        }
    }
    // top up greedily if grid snapping collided
    while chosen.len() < p {
        let next = argmax_by(cloud.len(), |i| {
            if used[i] {
                f64::NEG_INFINITY
            } else {
                chosen
                    .iter()
                    .map(|&c| (cloud[i] - cloud[c]).norm())
                    .fold(f64::INFINITY, f64::min)
            }
        });
        used[next] = true;
        chosen.push(next);
    }
    chosen
}

fn argmin_by(len: usize, f: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_val = f(0);
    for i in 1..len {
        let v = f(i);
        if v < best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

fn argmax_by(len: usize, f: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_val = f(0);
    for i in 1..len {
        let v = f(i);
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}
