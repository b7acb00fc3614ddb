//! Visit-order optimization: base tour, target sequence, IK assignment.
//!
//! Three stages run after base placement. (1) The depot-to-depot order of
//! cluster base poses is a small TSP solved with nearest-neighbor
//! construction plus 2-opt. (2) Targets are ordered by a minimum-length
//! Hamiltonian path over a *stack of clusters*: each cluster's targets are
//! translated onto a private slot along a virtual axis, spaced h apart, so
//! any optimal path stays cluster-contiguous while intra-cluster order is
//! still optimized geometrically. (3) Joint configurations are picked by a
//! shortest path through the layered graph of per-target IK solution sets.

use crate::clustering::Cluster;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::kinematics::JointConfig;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Closed depot → clusters → depot visiting order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseTour {
    /// Cluster indices in visit order (depot implicit at both ends).
    pub order: Vec<usize>,
    pub depot: Vec3,
    /// Total closed-tour length.
    pub length: f64,
}

fn tour_length(positions: &[Vec3], depot: Vec3, order: &[usize]) -> f64 {
    let mut len = 0.0;
    let mut prev = depot;
    for &i in order {
        len += prev.distance(positions[i]);
        prev = positions[i];
    }
    len + prev.distance(depot)
}

fn nearest_neighbor_order(positions: &[Vec3], depot: Vec3) -> Vec<usize> {
    let n = positions.len();
    let mut order = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let mut at = depot;
    for _ in 0..n {
        let next = (0..n)
            .filter(|&i| !used[i])
            .min_by(|&a, &b| {
                at.distance(positions[a])
                    .partial_cmp(&at.distance(positions[b]))
                    .unwrap()
                    .then(a.cmp(&b))
            })
            .unwrap();
        used[next] = true;
        at = positions[next];
        order.push(next);
    }
    order
}

/// Repeated first-improvement 2-opt on the closed tour (depot fixed).
fn two_opt_closed(positions: &[Vec3], depot: Vec3, order: &mut [usize]) {
    let n = order.len();
    if n < 2 {
        return;
    }
    loop {
        let mut improved = false;
        for i in 0..n - 1 {
            for j in i + 1..n {
                let a = if i == 0 { depot } else { positions[order[i - 1]] };
                let b = positions[order[i]];
                let c = positions[order[j]];
                let d = if j + 1 == n { depot } else { positions[order[j + 1]] };
                let before = a.distance(b) + c.distance(d);
                let after = a.distance(c) + b.distance(d);
                if after + 1e-12 < before {
                    order[i..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

/// Depot-anchored TSP over cluster base positions: nearest-neighbor start
/// plus one seeded shuffled restart, each refined by 2-opt; the shorter
/// tour wins (nearest-neighbor on a tie).
pub fn base_tour_2opt(positions: &[Vec3], depot: Vec3, seed: u64) -> BaseTour {
    let mut best = nearest_neighbor_order(positions, depot);
    two_opt_closed(positions, depot, &mut best);
    let mut best_len = tour_length(positions, depot, &best);

    if positions.len() > 2 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x2097_70a7);
        let mut alt: Vec<usize> = (0..positions.len()).collect();
        alt.shuffle(&mut rng);
        two_opt_closed(positions, depot, &mut alt);
        let alt_len = tour_length(positions, depot, &alt);
        if alt_len + 1e-12 < best_len {
            best = alt;
            best_len = alt_len;
        }
    }
    BaseTour {
        order: best,
        depot,
        length: best_len,
    }
}

/// Targets translated onto per-cluster slots along the virtual +x axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedTargets {
    /// Stacked points: index 0 = virtual start, 1..=n targets, n+1 = end.
    pub points: Vec<Vec3>,
    /// Original target index of each interior point.
    pub original: Vec<usize>,
    /// Slot spacing along the stacking axis.
    pub h: f64,
    /// World positions the virtual endpoints stand for.
    pub start_world: Vec3,
    pub end_world: Vec3,
}

/// Builds the stack: cluster k in tour order moves, relative to its own
/// center, to offset (k+1)·h on the axis; the virtual start sits at offset
/// 0 and the end at (c+1)·h. With all-singleton clusters the intra-cluster
/// diameter is 0, so `fallback_h` (typically the ball diameter) keeps the
/// slots apart.
pub fn stack_clusters(
    clusters: &[Cluster],
    tour: &BaseTour,
    targets: &[Vec3],
    h_scale: f64,
    start: Vec3,
    end: Vec3,
    fallback_h: f64,
) -> Result<StackedTargets> {
    if !(h_scale.is_finite() && h_scale >= 1.0) {
        return Err(Error::invalid(format!("h_scale must be ≥ 1, got {h_scale}")));
    }
    if tour.order.len() != clusters.len() {
        return Err(Error::invalid("tour must cover every cluster exactly once"));
    }
    let mut max_diam = 0.0_f64;
    for c in clusters {
        for (a, &i) in c.members.iter().enumerate() {
            for &j in &c.members[a + 1..] {
                max_diam = max_diam.max(targets[i].distance(targets[j]));
            }
        }
    }
    let h = if max_diam > 0.0 {
        h_scale * max_diam
    } else {
        if !(fallback_h.is_finite() && fallback_h > 0.0) {
            return Err(Error::invalid(
                "all clusters are singletons and no positive fallback spacing is available",
            ));
        }
        fallback_h
    };
    let n: usize = clusters.iter().map(|c| c.members.len()).sum();
    let mut points = Vec::with_capacity(n + 2);
    let mut original = Vec::with_capacity(n);
    points.push(Vec3::zero());
    for (k, &ci) in tour.order.iter().enumerate() {
        let c = &clusters[ci];
        let offset = Vec3::new((k + 1) as f64 * h, 0.0, 0.0);
        for &t in &c.members {
            points.push(targets[t] - c.center + offset);
            original.push(t);
        }
    }
    points.push(Vec3::new((clusters.len() + 1) as f64 * h, 0.0, 0.0));
    Ok(StackedTargets {
        points,
        original,
        h,
        start_world: start,
        end_world: end,
    })
}

/// Target visiting order (original indices) with the stacked path length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSequence {
    pub order: Vec<usize>,
    pub stacked_length: f64,
}

const EXACT_PATH_LIMIT: usize = 14;

/// Exact fixed-endpoint Hamiltonian path by Held-Karp DP over interior
/// nodes; deterministic tie-break by keeping the first (lowest-index)
/// optimum found.
fn held_karp_path(points: &[Vec3]) -> Vec<usize> {
    let n = points.len() - 2; // interior count
    let start = 0usize;
    let end = n + 1;
    if n == 0 {
        return Vec::new();
    }
    let full = (1usize << n) - 1;
    let mut dp = vec![vec![f64::INFINITY; n]; full + 1];
    let mut parent = vec![vec![usize::MAX; n]; full + 1];
    for j in 0..n {
        dp[1 << j][j] = points[start].distance(points[1 + j]);
    }
    for mask in 1..=full {
        for j in 0..n {
            if mask >> j & 1 == 0 || dp[mask][j].is_infinite() {
                continue;
            }
            let base = dp[mask][j];
            for k in 0..n {
                if mask >> k & 1 == 1 {
                    continue;
                }
                let cand = base + points[1 + j].distance(points[1 + k]);
                let next = mask | 1 << k;
                if cand + 1e-15 < dp[next][k] {
                    dp[next][k] = cand;
                    parent[next][k] = j;
                }
            }
        }
    }
    let mut best_j = 0;
    let mut best = f64::INFINITY;
    for j in 0..n {
        let cand = dp[full][j] + points[1 + j].distance(points[end]);
        if cand + 1e-15 < best {
            best = cand;
            best_j = j;
        }
    }
    let mut rev = Vec::with_capacity(n);
    let mut mask = full;
    let mut j = best_j;
    while j != usize::MAX {
        rev.push(j);
        let p = parent[mask][j];
        mask &= !(1 << j);
        j = p;
    }
    rev.reverse();
    rev.into_iter().map(|j| 1 + j).collect()
}

/// Heuristic fixed-endpoint path: nearest-neighbor then 2-opt restricted to
/// interior reversals.
fn heuristic_path(points: &[Vec3]) -> Vec<usize> {
    let n = points.len() - 2;
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let mut at = points[0];
    for _ in 0..n {
        let next = (0..n)
            .filter(|&i| !used[i])
            .min_by(|&a, &b| {
                at.distance(points[1 + a])
                    .partial_cmp(&at.distance(points[1 + b]))
                    .unwrap()
                    .then(a.cmp(&b))
            })
            .unwrap();
        used[next] = true;
        at = points[1 + next];
        order.push(1 + next);
    }
    let end = points.len() - 1;
    loop {
        let mut improved = false;
        for i in 0..n.saturating_sub(1) {
            for j in i + 1..n {
                let a = if i == 0 { points[0] } else { points[order[i - 1]] };
                let d = if j == n - 1 { points[end] } else { points[order[j + 1]] };
                let before = a.distance(points[order[i]]) + points[order[j]].distance(d);
                let after = a.distance(points[order[j]]) + points[order[i]].distance(d);
                if after + 1e-12 < before {
                    order[i..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    order
}

/// Minimum-length Hamiltonian path over the stacked targets from the
/// virtual start to the virtual end, exact up to 14 interior points.
pub fn hamiltonian_path(st: &StackedTargets) -> TargetSequence {
    let n = st.original.len();
    let visit = if n <= EXACT_PATH_LIMIT {
        held_karp_path(&st.points)
    } else {
        heuristic_path(&st.points)
    };
    let mut length = 0.0;
    let mut prev = st.points[0];
    for &p in &visit {
        length += prev.distance(st.points[p]);
        prev = st.points[p];
    }
    length += prev.distance(st.points[st.points.len() - 1]);
    TargetSequence {
        order: visit.into_iter().map(|p| st.original[p - 1]).collect(),
        stacked_length: length,
    }
}

/// Joint configurations chosen per sequence position, plus path lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSequence {
    /// One configuration per layer, including the start and goal layers.
    pub configs: Vec<JointConfig>,
    pub leg_lengths: Vec<f64>,
    pub total: f64,
}

/// Shortest path through the layered IK graph: layer 0 and the last layer
/// must hold exactly one configuration (start/goal); every interior layer
/// holds that target's IK solutions. Edges connect consecutive layers with
/// weighted joint-space distance. An empty interior layer i means sequence
/// target i is unreachable.
pub fn config_shortest_path(
    ik_sets: &[Vec<JointConfig>],
    weights: &[f64; 6],
) -> Result<ConfigSequence> {
    if ik_sets.len() < 2 {
        return Err(Error::invalid("need at least start and goal layers"));
    }
    if ik_sets[0].len() != 1 || ik_sets[ik_sets.len() - 1].len() != 1 {
        return Err(Error::invalid("start and goal layers must hold exactly one configuration"));
    }
    for (i, layer) in ik_sets[1..ik_sets.len() - 1].iter().enumerate() {
        if layer.is_empty() {
            return Err(Error::UnreachableTarget { index: i });
        }
    }
    let mut cost: Vec<Vec<f64>> = Vec::with_capacity(ik_sets.len());
    let mut from: Vec<Vec<usize>> = Vec::with_capacity(ik_sets.len());
    cost.push(vec![0.0]);
    from.push(vec![usize::MAX]);
    for li in 1..ik_sets.len() {
        let prev = &ik_sets[li - 1];
        let here = &ik_sets[li];
        let mut c = vec![f64::INFINITY; here.len()];
        let mut f = vec![usize::MAX; here.len()];
        for (j, q) in here.iter().enumerate() {
            for (i, p) in prev.iter().enumerate() {
                let cand = cost[li - 1][i] + p.weighted_distance(q, weights);
                // Strict improvement keeps the lowest-index predecessor on
                // ties, making the returned path deterministic.
                if cand < c[j] {
                    c[j] = cand;
                    f[j] = i;
                }
            }
        }
        cost.push(c);
        from.push(f);
    }
    let last = ik_sets.len() - 1;
    let mut picks = vec![0usize; ik_sets.len()];
    picks[last] = 0;
    for li in (1..=last).rev() {
        picks[li - 1] = from[li][picks[li]];
    }
    let configs: Vec<JointConfig> = picks
        .iter()
        .enumerate()
        .map(|(li, &j)| ik_sets[li][j])
        .collect();
    let leg_lengths: Vec<f64> = configs
        .windows(2)
        .map(|w| w[0].weighted_distance(&w[1], weights))
        .collect();
    let total = leg_lengths.iter().sum();
    Ok(ConfigSequence {
        configs,
        leg_lengths,
        total,
    })
}
