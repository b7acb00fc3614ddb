//! Acceptance suite: one test per release criterion, each ending with a
//! single printed PASS line (shown under `--nocapture`). Every numeric
//! claim is checked against an oracle that is independent of the code under
//! test: grid search for the ball fit, branch-and-bound for the maximal
//! convex subset, and brute-force enumeration for the sequencing stages.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reachplan::clustering::{
    build_graph, clique_cover, delta_from_diameter, verify_and_split, Cluster, DeltaMode,
};
use reachplan::fkr::bounding_directions;
use reachplan::geometry::{min_enclosing_ball, UnitVec3, Vec3};
use reachplan::hull::{convex_hull, IVec};
use reachplan::kinematics::{JointConfig, SphereModel};
use reachplan::macs::{find_macs, is_digitally_convex, ConvexPolytope, DigitalSet, Halfspace};
use reachplan::pipeline::{run, PipelineConfig};
use reachplan::sequencing::{
    base_tour_2opt, config_shortest_path, hamiltonian_path, stack_clusters, BaseTour,
};
use reachplan::targets::{gen_targets, GenParams, Target, TargetKind};
use reachplan::{fit_ball_segment, BallSegment, CollisionPlanes, Error};
use std::collections::{BTreeSet, HashSet};
use std::time::Instant;

fn report(criterion: usize, what: &str) {
    println!("[acceptance] criterion {criterion:2} PASS — {what}");
}

/// Sphere-backend pipeline configuration used by all end-to-end criteria.
fn sphere_config() -> PipelineConfig {
    PipelineConfig {
        sphere_model: Some(SphereModel {
            shoulder: Vec3::new(0.0, 0.0, 0.6),
            r_min: 0.25,
            r_max: 0.75,
        }),
        region_min: [0.1, -0.6, 0.0],
        region_max: [0.9, 0.6, 1.2],
        resolution: 0.1,
        stable_output: true,
        ..PipelineConfig::default()
    }
}

fn wall_targets(n: usize, seed: u64) -> Vec<Target> {
    gen_targets(&GenParams {
        kind: TargetKind::CurvedWall,
        n,
        seed,
        extent: 3.0,
        z_range: (0.5, 0.9),
        curvature: 0.2,
        ..GenParams::default()
    })
    .expect("generator accepts these parameters")
}

// ---------------------------------------------------------------- 1

#[test]
fn criterion_01_delta_formula() {
    for d in [0.5, 1.0, 2.0] {
        let delta = delta_from_diameter(d, DeltaMode::Paper).unwrap();
        let expect = 3.0_f64.sqrt() / 2.0 * d;
        assert!(
            (delta - expect).abs() < 1e-12,
            "δ({d}) = {delta}, expected {expect}"
        );
    }
    report(1, "δ = (√3/2)·d for d ∈ {0.5, 1, 2} within 1e-12");
}

// ---------------------------------------------------------------- 2

#[test]
fn criterion_02_pyramid_directions() {
    let theta = 10.0_f64.to_radians();
    let (s, c) = theta.sin_cos();
    let expect = [
        [c, 0.0, s],
        [c, 0.0, -s],
        [c, s, 0.0],
        [c, -s, 0.0],
    ];
    let dirs = bounding_directions(theta).unwrap();
    assert_eq!(dirs.len(), 4, "four pyramid directions");
    for (got, want) in dirs.iter().zip(&expect) {
        let g = got.as_vec3();
        for (a, b) in [g.x, g.y, g.z].iter().zip(want) {
            assert!((a - b).abs() < 1e-9, "component {a} vs {b}");
        }
    }
    report(2, "bounding_directions(10°) matches the four pyramid vectors within 1e-9");
}

// ---------------------------------------------------------------- 3

fn assert_valid_clustering(clusters: &[Cluster], positions: &[Vec3], delta: f64, d: f64) {
    let mut seen = vec![false; positions.len()];
    for c in clusters {
        for &i in &c.members {
            assert!(!seen[i], "target {i} clustered twice");
            seen[i] = true;
        }
        for (a, &i) in c.members.iter().enumerate() {
            for &j in &c.members[a + 1..] {
                assert!(
                    positions[i].distance(positions[j]) <= delta + 1e-12,
                    "members {i},{j} exceed δ"
                );
            }
        }
        let pts: Vec<Vec3> = c.members.iter().map(|&i| positions[i]).collect();
        let meb = min_enclosing_ball(&pts).unwrap();
        assert!(
            2.0 * meb.radius <= d + 1e-9,
            "cluster MEB diameter {} exceeds {}",
            2.0 * meb.radius,
            d
        );
    }
    assert!(seen.iter().all(|&s| s), "clusters must partition the targets");
}

#[test]
fn criterion_03_clustering_properties_and_speed() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc3_0003);
    let d = 1.0;
    let delta = delta_from_diameter(d, DeltaMode::Paper).unwrap();
    for _ in 0..200 {
        let n = rng.random_range(1..=300);
        let extent = rng.random_range(0.5..4.0);
        let positions: Vec<Vec3> = (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(0.0..extent),
                    rng.random_range(0.0..extent),
                    rng.random_range(0.0..extent),
                )
            })
            .collect();
        let graph = build_graph(&positions, delta).unwrap();
        let pre = clique_cover(&graph).unwrap();
        let clusters = verify_and_split(&pre, &positions, d).unwrap();
        assert_valid_clustering(&clusters, &positions, delta, d);
    }

    let time_clustering = |n: usize| -> (f64, usize) {
        let targets = wall_targets(n, 42);
        let positions: Vec<Vec3> = targets.iter().map(|t| t.position).collect();
        let d = 0.45;
        let delta = delta_from_diameter(d, DeltaMode::Paper).unwrap();
        let t0 = Instant::now();
        let graph = build_graph(&positions, delta).unwrap();
        let pre = clique_cover(&graph).unwrap();
        let clusters = verify_and_split(&pre, &positions, d).unwrap();
        (t0.elapsed().as_secs_f64(), clusters.len())
    };
    let (t183, c183) = time_clustering(183);
    assert!(t183 < 1.0, "n=183 clustering took {t183:.3} s (limit 1 s)");
    let (t2211, c2211) = time_clustering(2211);
    assert!(t2211 < 60.0, "n=2211 clustering took {t2211:.3} s (limit 60 s)");
    report(
        3,
        &format!(
            "200 random sets partition/clique/MEB-bound hold; n=183 in {t183:.3} s \
             ({c183} clusters), n=2211 in {t2211:.3} s ({c2211} clusters)"
        ),
    );
}

// ---------------------------------------------------------------- 4

#[test]
fn criterion_04_sequencing_speed() {
    let targets = wall_targets(183, 7);
    let positions: Vec<Vec3> = targets.iter().map(|t| t.position).collect();
    let d = 0.45;
    let delta = delta_from_diameter(d, DeltaMode::Paper).unwrap();
    let graph = build_graph(&positions, delta).unwrap();
    let clusters = verify_and_split(&clique_cover(&graph).unwrap(), &positions, d).unwrap();
    let centers: Vec<Vec3> = clusters
        .iter()
        .map(|c| Vec3::new(c.center.x, c.center.y, 0.0))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc3_0004);
    let mut ik_sets: Vec<Vec<JointConfig>> = Vec::with_capacity(targets.len() + 2);
    ik_sets.push(vec![JointConfig::zeros()]);
    for _ in 0..targets.len() {
        let sols = (0..4)
            .map(|_| JointConfig(std::array::from_fn(|_| rng.random_range(-3.0..3.0))))
            .collect();
        ik_sets.push(sols);
    }
    ik_sets.push(vec![JointConfig::zeros()]);

    let t0 = Instant::now();
    let tour = base_tour_2opt(&centers, Vec3::zero(), 99);
    let stacked =
        stack_clusters(&clusters, &tour, &positions, 1.5, Vec3::zero(), Vec3::zero(), d).unwrap();
    let sequence = hamiltonian_path(&stacked);
    let configs = config_shortest_path(&ik_sets, &[1.0; 6]).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    assert_eq!(sequence.order.len(), 183, "sequence covers every target");
    assert_eq!(configs.configs.len(), 185, "one pick per layer");
    assert!(elapsed < 10.0, "tour finding took {elapsed:.3} s (limit 10 s)");
    report(
        4,
        &format!("n=183 full tour finding in {elapsed:.3} s across {} clusters", clusters.len()),
    );
}

// ---------------------------------------------------------------- 5

type I128Vec = [i128; 3];

fn to128(p: IVec) -> I128Vec {
    [p[0] as i128, p[1] as i128, p[2] as i128]
}

fn isub(a: I128Vec, b: I128Vec) -> I128Vec {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn icross(a: I128Vec, b: I128Vec) -> I128Vec {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn idot(a: I128Vec, b: I128Vec) -> i128 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn iorient(a: IVec, b: IVec, c: IVec, d: IVec) -> i128 {
    let (a, b, c, d) = (to128(a), to128(b), to128(c), to128(d));
    idot(icross(isub(b, a), isub(c, a)), isub(d, a))
}

fn on_segment(p: IVec, a: IVec, b: IVec) -> bool {
    let d = isub(to128(b), to128(a));
    if d == [0, 0, 0] {
        return false;
    }
    let w = isub(to128(p), to128(a));
    icross(w, d) == [0, 0, 0] && idot(w, d) >= 0 && idot(w, d) <= idot(d, d)
}

fn in_triangle(p: IVec, a: IVec, b: IVec, c: IVec) -> bool {
    let n = icross(isub(to128(b), to128(a)), isub(to128(c), to128(a)));
    if n == [0, 0, 0] || idot(n, isub(to128(p), to128(a))) != 0 {
        return false;
    }
    let e1 = idot(n, icross(isub(to128(b), to128(a)), isub(to128(p), to128(a))));
    let e2 = idot(n, icross(isub(to128(c), to128(b)), isub(to128(p), to128(b))));
    let e3 = idot(n, icross(isub(to128(a), to128(c)), isub(to128(p), to128(c))));
    e1 >= 0 && e2 >= 0 && e3 >= 0
}

fn in_tetra(p: IVec, a: IVec, b: IVec, c: IVec, d: IVec) -> bool {
    let o = iorient(a, b, c, d);
    if o == 0 {
        return false;
    }
    let s = o.signum();
    s * iorient(p, b, c, d).signum() >= 0
        && s * iorient(a, p, c, d).signum() >= 0
        && s * iorient(a, b, p, d).signum() >= 0
        && s * iorient(a, b, c, p).signum() >= 0
}

/// Lattice points of hull(members) missing from the member set.
fn violators(members: &[IVec]) -> Vec<IVec> {
    let set: BTreeSet<IVec> = members.iter().copied().collect();
    let hull = convex_hull(members).expect("hull of nonempty set");
    hull.lattice_points()
        .into_iter()
        .filter(|p| !set.contains(p))
        .collect()
}

/// Up to four member indices whose hull contains `v` (Carathéodory).
fn certificate(members: &[IVec], v: IVec) -> Vec<usize> {
    let n = members.len();
    for i in 0..n {
        for j in i + 1..n {
            if on_segment(v, members[i], members[j]) {
                return vec![i, j];
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if in_triangle(v, members[i], members[j], members[k]) {
                    return vec![i, j, k];
                }
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                for l in k + 1..n {
                    if in_tetra(v, members[i], members[j], members[k], members[l]) {
                        return vec![i, j, k, l];
                    }
                }
            }
        }
    }
    panic!("violator {v:?} must lie in the hull of the members");
}

/// Exhaustive branch-and-bound optimum for the maximal digitally convex
/// subset, seeded with the size of a known convex subset (a valid lower
/// bound, so only strictly larger subsets need visiting). Any convex
/// subset survives along some branch because a branch removes one point of
/// a Carathéodory certificate of a violator. Pair and triangle
/// certificates are tabulated per bounding-box cell up front; a node with
/// no tabulated violation gets the authoritative hull check, which also
/// catches tetrahedron-only violations. Each pairwise-disjoint set of
/// violated certificates forces that many removals, which bounds the
/// subtree.
fn macs_optimum(input: &[IVec], known_convex_size: usize) -> usize {
    let n = input.len();
    assert!(n <= 64, "oracle uses u64 masks");
    let lo = [0, 1, 2].map(|a| input.iter().map(|p| p[a]).min().unwrap());
    let hi = [0, 1, 2].map(|a| input.iter().map(|p| p[a]).max().unwrap());
    let mut cells: Vec<IVec> = Vec::new();
    for x in lo[0]..=hi[0] {
        for y in lo[1]..=hi[1] {
            for z in lo[2]..=hi[2] {
                cells.push([x, y, z]);
            }
        }
    }
    assert!(cells.len() <= 64, "oracle assumes a small bounding box");
    let member_at: Vec<Option<usize>> = cells
        .iter()
        .map(|c| input.iter().position(|p| p == c))
        .collect();
    let mut certs: Vec<Vec<u64>> = vec![Vec::new(); cells.len()];
    for (ci, &x) in cells.iter().enumerate() {
        for i in 0..n {
            for j in i + 1..n {
                if x != input[i] && x != input[j] && on_segment(x, input[i], input[j]) {
                    certs[ci].push(1u64 << i | 1u64 << j);
                }
            }
        }
        for i in 0..n {
            if x == input[i] {
                continue;
            }
            for j in i + 1..n {
                if x == input[j] {
                    continue;
                }
                for k in j + 1..n {
                    if x != input[k] && in_triangle(x, input[i], input[j], input[k]) {
                        certs[ci].push(1u64 << i | 1u64 << j | 1u64 << k);
                    }
                }
            }
        }
    }

    let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut best = known_convex_size;
    let mut seen: HashSet<u64> = HashSet::new();
    let mut stack = vec![full];
    while let Some(mask) = stack.pop() {
        let size = mask.count_ones() as usize;
        if size <= best || !seen.insert(mask) || mask == 0 {
            continue;
        }
        let mut violated: Vec<u64> = Vec::new();
        for (ci, cell_certs) in certs.iter().enumerate() {
            if member_at[ci].is_some_and(|p| mask >> p & 1 == 1) {
                continue;
            }
            violated.extend(cell_certs.iter().filter(|&&c| c & mask == c));
        }
        let cert = if violated.is_empty() {
            let idx: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            let members: Vec<IVec> = idx.iter().map(|&i| input[i]).collect();
            match violators(&members).first() {
                None => None,
                Some(&v) => {
                    let local = certificate(&members, v);
                    Some(local.into_iter().fold(0u64, |m, c| m | 1u64 << idx[c]))
                }
            }
        } else {
            let mut packed = 0u64;
            let mut forced = 0usize;
            for &c in &violated {
                if c & packed == 0 {
                    packed |= c;
                    forced += 1;
                }
            }
            if size - forced <= best {
                continue;
            }
            Some(violated[0])
        };
        match cert {
            None => best = size,
            Some(cert) => {
                for i in (0..n).filter(|&i| cert >> i & 1 == 1) {
                    stack.push(mask & !(1u64 << i));
                }
            }
        }
    }
    best
}

#[test]
fn criterion_05_macs_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc3_0005);
    let mut worst_ratio = f64::INFINITY;
    for case in 0..50 {
        let dims = [
            rng.random_range(2..=4usize),
            rng.random_range(2..=4usize),
            rng.random_range(2..=4usize),
        ];
        let density = rng.random_range(0.3..0.9);
        let mut voxels: BTreeSet<IVec> = BTreeSet::new();
        for x in 0..dims[0] {
            for y in 0..dims[1] {
                for z in 0..dims[2] {
                    if rng.random::<f64>() < density {
                        voxels.insert([x as i64, y as i64, z as i64]);
                    }
                }
            }
        }
        if voxels.is_empty() {
            voxels.insert([0, 0, 0]);
        }
        let input_list: Vec<IVec> = voxels.iter().copied().collect();
        let set = DigitalSet::new(voxels, Vec3::zero(), 0.05).unwrap();
        let (kept, _hull) = find_macs(&set).unwrap();

        assert!(
            is_digitally_convex(&kept).unwrap(),
            "case {case}: output must be digitally convex"
        );
        for v in kept.voxels() {
            assert!(set.contains(v), "case {case}: output must be a subset");
        }
        let (again, _) = find_macs(&kept).unwrap();
        assert_eq!(
            kept.voxels().collect::<Vec<_>>(),
            again.voxels().collect::<Vec<_>>(),
            "case {case}: find_macs must be idempotent"
        );
        // kept is verified convex and a subset above, so its size seeds
        // the oracle as a sound lower bound.
        let optimum = macs_optimum(&input_list, kept.len());
        let ratio = kept.len() as f64 / optimum as f64;
        assert!(
            ratio >= 0.8,
            "case {case}: kept {} of optimum {optimum} (ratio {ratio:.3})",
            kept.len()
        );
        worst_ratio = worst_ratio.min(ratio);
    }
    report(
        5,
        &format!("50 random sets: convex, subset, idempotent; worst optimum ratio {worst_ratio:.3}"),
    );
}

// ---------------------------------------------------------------- 6

fn boxed_hull(x: (f64, f64), y: (f64, f64), z: (f64, f64)) -> ConvexPolytope {
    let faces = [
        (Vec3::new(1.0, 0.0, 0.0), x.1),
        (Vec3::new(-1.0, 0.0, 0.0), -x.0),
        (Vec3::new(0.0, 1.0, 0.0), y.1),
        (Vec3::new(0.0, -1.0, 0.0), -y.0),
        (Vec3::new(0.0, 0.0, 1.0), z.1),
        (Vec3::new(0.0, 0.0, -1.0), -z.0),
    ];
    ConvexPolytope {
        halfspaces: faces
            .into_iter()
            .map(|(n, b)| Halfspace {
                normal: UnitVec3::normalize(n).unwrap(),
                offset: b,
            })
            .collect(),
    }
}

/// Best diameter for an axis-aligned box by grid search over the shared
/// center column at 0.05 m steps.
fn box_grid_oracle(x: (f64, f64), y: (f64, f64), z: (f64, f64), z_min: f64, z_max: f64) -> f64 {
    let steps = |lo: f64, hi: f64| {
        let n = ((hi - lo) / 0.05).round() as usize;
        (0..=n).map(move |i| lo + 0.05 * i as f64)
    };
    let mut best = f64::NEG_INFINITY;
    for cx in steps(x.0, x.1) {
        for cy in steps(y.0, y.1) {
            let r = [cx - x.0, x.1 - cx, cy - y.0, y.1 - cy, z_min - z.0, z.1 - z_max]
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            best = best.max(2.0 * r);
        }
    }
    best
}

#[test]
fn criterion_06_ballfit_exactness() {
    let hull = boxed_hull((0.0, 10.0), (0.0, 10.0), (0.0, 10.0));
    let seg: BallSegment =
        fit_ball_segment(&hull, 3.0, 7.0, &CollisionPlanes::default()).unwrap();
    let oracle = box_grid_oracle((0.0, 10.0), (0.0, 10.0), (0.0, 10.0), 3.0, 7.0);
    assert!((seg.d - 6.0).abs() < 1e-6, "diameter {} vs 6", seg.d);
    assert!((seg.d - oracle).abs() < 1e-6, "diameter {} vs oracle {oracle}", seg.d);
    assert!(seg.max_violation(&hull) <= 1e-8, "11-point containment");

    // Containment must hold on every fit, not just the worked example.
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc3_0006);
    for case in 0..25 {
        let x0 = rng.random_range(-2.0..0.0);
        let y0 = rng.random_range(-2.0..0.0);
        let z0 = rng.random_range(-1.0..0.0);
        let x = (x0, x0 + rng.random_range(2.0..8.0));
        let y = (y0, y0 + rng.random_range(2.0..8.0));
        let z = (z0, z0 + rng.random_range(3.0..8.0));
        let mid = (z.0 + z.1) / 2.0;
        let span = rng.random_range(0.0..(z.1 - z.0) / 4.0);
        let hull = boxed_hull(x, y, z);
        let seg = fit_ball_segment(&hull, mid - span, mid + span, &CollisionPlanes::default())
            .unwrap();
        assert!(
            seg.max_violation(&hull) <= 1e-8,
            "case {case}: sampled containment violated"
        );
        let oracle = box_grid_oracle(x, y, z, mid - span, mid + span);
        assert!(
            seg.d >= oracle - 1e-6,
            "case {case}: fit {} below grid oracle {oracle}",
            seg.d
        );
    }
    report(6, "box fit d = 6 within 1e-6 of the grid oracle; 11-point containment ≤ 1e-8 on every fit");
}

// ---------------------------------------------------------------- 7

/// Exact fixed-endpoint shortest Hamiltonian path by pruned permutation
/// search over the interior points.
fn brute_force_path(points: &[Vec3]) -> f64 {
    fn recurse(
        points: &[Vec3],
        remaining: &mut Vec<usize>,
        at: usize,
        len: f64,
        end: usize,
        best: &mut f64,
    ) {
        if len >= *best {
            return;
        }
        if remaining.is_empty() {
            *best = (*best).min(len + points[at].distance(points[end]));
            return;
        }
        for i in 0..remaining.len() {
            let next = remaining.remove(i);
            recurse(
                points,
                remaining,
                next,
                len + points[at].distance(points[next]),
                end,
                best,
            );
            remaining.insert(i, next);
        }
    }
    let n = points.len() - 2;
    let mut remaining: Vec<usize> = (1..=n).collect();
    let mut best = f64::INFINITY;
    recurse(points, &mut remaining, 0, 0.0, n + 1, &mut best);
    best
}

/// Exhaustive minimum over all layer picks, with pruning.
fn brute_force_config_total(layers: &[Vec<JointConfig>], weights: &[f64; 6]) -> f64 {
    fn recurse(
        layers: &[Vec<JointConfig>],
        li: usize,
        prev: &JointConfig,
        acc: f64,
        weights: &[f64; 6],
        best: &mut f64,
    ) {
        if acc >= *best {
            return;
        }
        if li == layers.len() {
            *best = acc;
            return;
        }
        for q in &layers[li] {
            recurse(
                layers,
                li + 1,
                q,
                acc + prev.weighted_distance(q, weights),
                weights,
                best,
            );
        }
    }
    let mut best = f64::INFINITY;
    for q0 in &layers[0] {
        recurse(layers, 1, q0, 0.0, weights, &mut best);
    }
    best
}

/// Random single-member clusters at the given positions, plus a tour in
/// the given visiting order (helper for stacked-path instances).
fn singleton_instance(
    rng: &mut ChaCha8Rng,
    n_clusters: usize,
    max_per_cluster: usize,
) -> (Vec<Cluster>, Vec<Vec3>, BaseTour) {
    let mut clusters = Vec::with_capacity(n_clusters);
    let mut positions: Vec<Vec3> = Vec::new();
    for _ in 0..n_clusters {
        let center = Vec3::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(0.2..1.0),
        );
        let k = rng.random_range(1..=max_per_cluster);
        let mut members = Vec::with_capacity(k);
        for _ in 0..k {
            members.push(positions.len());
            positions.push(
                center
                    + Vec3::new(
                        rng.random_range(-0.1..0.1),
                        rng.random_range(-0.1..0.1),
                        rng.random_range(-0.1..0.1),
                    ),
            );
        }
        let pts: Vec<Vec3> = members.iter().map(|&i| positions[i]).collect();
        let meb = min_enclosing_ball(&pts).unwrap();
        clusters.push(Cluster {
            members,
            center: meb.center,
            radius: meb.radius,
        });
    }
    let centers: Vec<Vec3> = clusters
        .iter()
        .map(|c| Vec3::new(c.center.x, c.center.y, 0.0))
        .collect();
    let tour = base_tour_2opt(&centers, Vec3::zero(), rng.random());
    (clusters, positions, tour)
}

#[test]
fn criterion_07_sequencing_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc3_0007);

    // Hamiltonian paths: heuristic-exact equality on every instance with
    // at most 9 clusters and 10 targets.
    for case in 0..40 {
        let n_clusters = rng.random_range(1..=9usize);
        let max_per = (10 / n_clusters).clamp(1, 3);
        let (clusters, positions, tour) = singleton_instance(&mut rng, n_clusters, max_per);
        assert!(positions.len() <= 10, "instance size bound");
        let stacked =
            stack_clusters(&clusters, &tour, &positions, 1.5, Vec3::zero(), Vec3::zero(), 0.5)
                .unwrap();
        let sequence = hamiltonian_path(&stacked);
        let oracle = brute_force_path(&stacked.points);
        assert!(
            (sequence.stacked_length - oracle).abs() <= 1e-9,
            "case {case}: path {} vs oracle {oracle}",
            sequence.stacked_length
        );
    }

    // Layered configuration paths: DP total equals exhaustive enumeration
    // for ≤ 4 IK solutions per target.
    for case in 0..40 {
        let interior = rng.random_range(1..=6usize);
        let mut layers: Vec<Vec<JointConfig>> = Vec::with_capacity(interior + 2);
        layers.push(vec![JointConfig::zeros()]);
        for _ in 0..interior {
            let k = rng.random_range(1..=4usize);
            layers.push(
                (0..k)
                    .map(|_| JointConfig(std::array::from_fn(|_| rng.random_range(-3.0..3.0))))
                    .collect(),
            );
        }
        layers.push(vec![JointConfig::zeros()]);
        let weights = std::array::from_fn(|_| rng.random_range(0.5..2.0));
        let got = config_shortest_path(&layers, &weights).unwrap();
        let oracle = brute_force_config_total(&layers, &weights);
        assert!(
            (got.total - oracle).abs() <= 1e-9,
            "case {case}: total {} vs oracle {oracle}",
            got.total
        );
        assert!(
            (got.leg_lengths.iter().sum::<f64>() - got.total).abs() <= 1e-9,
            "case {case}: legs sum to total"
        );
    }
    let mut broken: Vec<Vec<JointConfig>> = vec![
        vec![JointConfig::zeros()],
        vec![JointConfig([1.0; 6])],
        Vec::new(),
        vec![JointConfig::zeros()],
    ];
    match config_shortest_path(&broken, &[1.0; 6]) {
        Err(Error::UnreachableTarget { index }) => assert_eq!(index, 1, "empty layer position"),
        other => panic!("expected UnreachableTarget, got {other:?}"),
    }
    broken[2].push(JointConfig([2.0; 6]));
    assert!(config_shortest_path(&broken, &[1.0; 6]).is_ok());

    // Tours: 2-opt local optimality and never worse than nearest neighbor,
    // on 100 random instances.
    for case in 0..100 {
        let n = rng.random_range(1..=15usize);
        let positions: Vec<Vec3> = (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                    0.0,
                )
            })
            .collect();
        let depot = Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), 0.0);
        let tour = base_tour_2opt(&positions, depot, case as u64);

        // Independent nearest-neighbor construction.
        let mut used = vec![false; n];
        let mut at = depot;
        let mut nn_len = 0.0;
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
            nn_len += at.distance(positions[next]);
            at = positions[next];
        }
        nn_len += at.distance(depot);
        assert!(
            tour.length <= nn_len + 1e-9,
            "case {case}: tour {} worse than nearest neighbor {nn_len}",
            tour.length
        );

        // No single 2-opt reversal may improve the returned tour.
        let order = &tour.order;
        for i in 0..n.saturating_sub(1) {
            for j in i + 1..n {
                let a = if i == 0 { depot } else { positions[order[i - 1]] };
                let b = positions[order[i]];
                let c = positions[order[j]];
                let d = if j + 1 == n { depot } else { positions[order[j + 1]] };
                let delta = (a.distance(c) + b.distance(d)) - (a.distance(b) + c.distance(d));
                assert!(
                    delta >= -1e-9,
                    "case {case}: reversal ({i}, {j}) improves by {delta}"
                );
            }
        }
    }
    report(
        7,
        "paths match brute-force/DP oracles (≤ 9 clusters, ≤ 10 targets, ≤ 4 IK); \
         100 tours 2-opt-optimal and ≤ nearest neighbor",
    );
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_08_base_pose_coincidence() {
    let config = sphere_config();
    let layouts: [(&str, Vec<Target>); 3] = [
        ("curved-wall", wall_targets(60, 3)),
        (
            "grid",
            gen_targets(&GenParams {
                kind: TargetKind::Grid,
                n: 40,
                seed: 11,
                extent: 2.5,
                z_range: (0.5, 0.9),
                ..GenParams::default()
            })
            .unwrap(),
        ),
        (
            "random-shell",
            gen_targets(&GenParams {
                kind: TargetKind::RandomShell,
                n: 50,
                seed: 19,
                extent: 2.0,
                z_range: (0.5, 0.9),
                ..GenParams::default()
            })
            .unwrap(),
        ),
    ];
    for (name, targets) in &layouts {
        let result = run(&config, targets).unwrap();
        let d = result.ball_segment.d;
        for (ci, cluster) in result.clusters.iter().enumerate() {
            let pose = result.base_poses[ci].transform();
            let mapped = pose.transform_point(result.matched_balls[ci]);
            assert!(
                mapped.distance(cluster.center) < 1e-9,
                "{name}: cluster {ci} center coincidence off by {}",
                mapped.distance(cluster.center)
            );
            let world_to_base = pose.inverse();
            for &t in &cluster.members {
                let local = world_to_base.transform_point(targets[t].position);
                let dist = local.distance(result.matched_balls[ci]);
                assert!(
                    dist <= d / 2.0 + 1e-9,
                    "{name}: target {t} at {dist} from matched center (budget {})",
                    d / 2.0
                );
            }
        }
    }
    report(8, "ball-center coincidence within 1e-9 and targets within d/2 across three layouts");
}

// ---------------------------------------------------------------- 9

#[test]
fn criterion_09_reproducibility() {
    let config = sphere_config();
    let targets = wall_targets(50, 23);
    let a = run(&config, &targets).unwrap().to_json();
    let b = run(&config, &targets).unwrap().to_json();
    assert!(!a.is_empty());
    assert_eq!(a.as_bytes(), b.as_bytes(), "stable-output JSON must be byte-identical");
    report(9, "two runs with a fixed seed produce byte-identical stable-output JSON");
}

// ---------------------------------------------------------------- 10

#[test]
fn criterion_10_published_count_substitution() {
    let config = sphere_config();
    let targets = wall_targets(183, 0);
    let result = run(&config, &targets).unwrap();
    let positions: Vec<Vec3> = targets.iter().map(|t| t.position).collect();
    let delta = delta_from_diameter(result.ball_segment.d, DeltaMode::Paper).unwrap();
    assert_valid_clustering(&result.clusters, &positions, delta, result.ball_segment.d);
    assert!(!result.clusters.is_empty());
    report(
        10,
        &format!(
            "published cluster counts need the original robot and target layout, which are \
             not available; substituted by the property checks of criteria 3 and 8 \
             (this 183-target stand-in yields {} clusters)",
            result.clusters.len()
        ),
    );
}

// ---------------------------------------------------------------- shared

/// Shuffling the target order must not break any cross-stage invariant
/// (guards the index bookkeeping the criteria above rely on).
#[test]
fn shuffled_inputs_keep_cross_stage_consistency() {
    let config = sphere_config();
    let mut targets = wall_targets(30, 31);
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc3_aaaa);
    targets.shuffle(&mut rng);
    let result = run(&config, &targets).unwrap();
    let mut order = result.target_sequence.order.clone();
    order.sort_unstable();
    assert_eq!(order, (0..targets.len()).collect::<Vec<_>>());
    assert_eq!(result.base_poses.len(), result.clusters.len());
    assert_eq!(result.validation.len(), result.clusters.len());
    for report in &result.validation {
        assert!(report.all_in_ball, "validation containment");
    }
}
