//! Target clustering by proximity-graph clique cover.
//!
//! Targets whose pairwise distances stay within δ form cliques of the
//! proximity graph; each clique fits in one workspace ball, so a minimum
//! clique cover minimizes base placements. Minimum clique cover being
//! NP-complete, we greedily color the complement graph (a color class of
//! the complement is a clique of the original) in connected-sequential BFS
//! order. A verification pass then enforces the geometric guarantee the
//! planner relies on: the minimum enclosing ball of every cluster must not
//! exceed the reachable ball diameter, splitting oversize clusters when the
//! planar δ bound is too optimistic for 3D target sets.

use crate::error::{Error, Result};
use crate::geometry::{min_enclosing_ball, Vec3};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// How δ is derived from the ball diameter `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaMode {
    /// δ = (√3/2)·d — tight for planar target sets; 3D sets may need the
    /// verification split.
    Paper,
    /// δ = √(2/3)·d — Jung's bound in ℝ³; clusters never need splitting.
    Safe,
}

/// Clique threshold for ball diameter `d` under the chosen mode.
pub fn delta_from_diameter(d: f64, mode: DeltaMode) -> Result<f64> {
    if !(d.is_finite() && d >= 0.0) {
        return Err(Error::invalid(format!("diameter must be ≥ 0, got {d}")));
    }
    Ok(match mode {
        DeltaMode::Paper => 3.0_f64.sqrt() / 2.0 * d,
        DeltaMode::Safe => (2.0_f64 / 3.0).sqrt() * d,
    })
}

/// Undirected graph with an edge wherever two targets are within δ.
#[derive(Debug, Clone)]
pub struct ProximityGraph {
    positions: Vec<Vec3>,
    delta: f64,
    adj: Vec<Vec<usize>>,
}

impl ProximityGraph {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Builds the proximity graph with the inclusive rule ‖x_i − x_j‖ ≤ δ.
pub fn build_graph(positions: &[Vec3], delta: f64) -> Result<ProximityGraph> {
    if positions.is_empty() {
        return Err(Error::invalid("proximity graph needs at least one node"));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::invalid(format!("delta must be ≥ 0, got {delta}")));
    }
    let n = positions.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if positions[i].distance(positions[j]) <= delta {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    Ok(ProximityGraph {
        positions: positions.to_vec(),
        delta,
        adj,
    })
}

/// One workspace cluster: a clique of targets plus its minimum enclosing
/// ball (center and radius).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub members: Vec<usize>,
    pub center: Vec3,
    pub radius: f64,
}

fn cluster_from_members(mut members: Vec<usize>, positions: &[Vec3]) -> Result<Cluster> {
    members.sort_unstable();
    let pts: Vec<Vec3> = members.iter().map(|&i| positions[i]).collect();
    let ball = min_enclosing_ball(&pts)?;
    Ok(Cluster {
        members,
        center: ball.center,
        radius: ball.radius,
    })
}

/// BFS order over the *complement* graph, component by component, starting
/// each component at its lowest-index unvisited node.
fn complement_bfs_order(g: &ProximityGraph) -> Vec<usize> {
    let n = g.len();
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    for root in 0..n {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            // Complement neighbors: every unvisited node NOT adjacent in g,
            // enumerated in ascending index for determinism.
            for (u, seen) in visited.iter_mut().enumerate() {
                if !*seen && u != v && !g.adjacent(v, u) {
                    *seen = true;
                    queue.push_back(u);
                }
            }
        }
    }
    order
}

/// Greedy-colors the complement graph in connected-sequential BFS order;
/// each color class is a clique of `g` and becomes one cluster. Clusters
/// are emitted in order of their lowest member index.
pub fn clique_cover(g: &ProximityGraph) -> Result<Vec<Cluster>> {
    let n = g.len();
    let order = complement_bfs_order(g);
    let mut color_of = vec![usize::MAX; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for &v in &order {
        // A color is allowed iff v is g-adjacent to every current member
        // (no complement edge into the class). Count adjacent members per
        // class via v's neighbor list instead of scanning the dense
        // complement.
        let mut adjacent_in = vec![0usize; classes.len()];
        for &u in g.neighbors(v) {
            if color_of[u] != usize::MAX {
                adjacent_in[color_of[u]] += 1;
            }
        }
        let choice = (0..classes.len()).find(|&c| adjacent_in[c] == classes[c].len());
        match choice {
            Some(c) => {
                color_of[v] = c;
                classes[c].push(v);
            }
            None => {
                color_of[v] = classes.len();
                classes.push(vec![v]);
            }
        }
    }
    classes.sort_by_key(|members| members.iter().copied().min());
    classes
        .into_iter()
        .map(|members| cluster_from_members(members, g.positions()))
        .collect()
}

/// Enforces the enclosing-ball bound: while a cluster's minimum enclosing
/// ball exceeds diameter `d`, its farthest-from-center members spill into a
/// new cluster (processed recursively). Every returned cluster carries its
/// final MEB center and radius.
pub fn verify_and_split(clusters: &[Cluster], positions: &[Vec3], d: f64) -> Result<Vec<Cluster>> {
    if !(d.is_finite() && d >= 0.0) {
        return Err(Error::invalid(format!("diameter must be ≥ 0, got {d}")));
    }
    let mut queue: VecDeque<Vec<usize>> =
        clusters.iter().map(|c| c.members.clone()).collect();
    let mut out = Vec::new();
    while let Some(mut members) = queue.pop_front() {
        if members.is_empty() {
            return Err(Error::invalid("clusters must be nonempty"));
        }
        let mut spilled = Vec::new();
        loop {
            let cluster = cluster_from_members(members.clone(), positions)?;
            if 2.0 * cluster.radius <= d + 1e-9 {
                out.push(cluster);
                break;
            }
            // Remove the farthest member (ties: lowest index) and retry.
            let (far_pos, _) = members
                .iter()
                .enumerate()
                .map(|(k, &i)| (k, positions[i].distance(cluster.center)))
                .max_by(|(ka, da), (kb, db)| {
                    da.partial_cmp(db)
                        .unwrap()
                        .then(kb.cmp(ka))
                })
                .expect("nonempty cluster");
            spilled.push(members.remove(far_pos));
        }
        if !spilled.is_empty() {
            spilled.sort_unstable();
            queue.push_back(spilled);
        }
    }
    Ok(out)
}
