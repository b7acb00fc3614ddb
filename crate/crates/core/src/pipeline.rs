//! End-to-end orchestration: reachability → convex region → ball segment →
//! clusters → base poses → tours and configurations.
//!
//! `run` executes the whole planning pipeline on a target set, failing fast
//! with the stage name attached to any stage error and recording per-stage
//! wall-clock timings. With `stable_output` set the timings are zeroed so
//! identical inputs serialize to byte-identical result JSON.

use crate::ballfit::{fit_ball_segment, BallSegment, CollisionPlanes};
use crate::baseplacement::{
    base_transform, match_ball, validate_reachability, BasePose, ClusterFrame, ReachabilityReport,
};
use crate::clustering::{
    build_graph, clique_cover, delta_from_diameter, verify_and_split, Cluster, DeltaMode,
};
use crate::error::{Error, Result};
use crate::fkr::{bounding_directions, build_fkr, load_fkr, Aabb, FkrDatabase};
use crate::geometry::Vec3;
use crate::kinematics::{
    IkBackend, IkParams, JointConfig, KinematicChain, SphereModel, TaskPoint,
};
use crate::macs::{find_macs, DigitalSet};
use crate::sequencing::{
    base_tour_2opt, config_shortest_path, hamiltonian_path, stack_clusters, BaseTour,
    ConfigSequence, TargetSequence,
};
use crate::targets::Target;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Full pipeline configuration; every field has a default so a config file
/// may specify only what it changes. Flat key-value JSON on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Kinematic chain JSON path; `None` uses the bundled generic chain.
    pub chain_file: Option<String>,
    /// Closed-form stand-in backend; set, it replaces the chain entirely.
    pub sphere_model: Option<SphereModel>,
    /// Prebuilt reachability database path; `None` builds one from scratch.
    pub fkr_file: Option<String>,
    /// Sampled workspace region (base frame, meters).
    pub region_min: [f64; 3],
    pub region_max: [f64; 3],
    /// Voxel edge length (meters).
    pub resolution: f64,
    /// Approach-cone half-angle (degrees).
    pub theta_deg: f64,
    /// Collision plane offsets; `None` omits the constraint.
    pub x_offset: Option<f64>,
    pub z_offset: Option<f64>,
    /// Optional ball diameter override; must not exceed the fitted value.
    pub diameter_override: Option<f64>,
    pub delta_mode: DeltaMode,
    /// Stack spacing factor (≥ 1).
    pub h_scale: f64,
    pub joint_weights: [f64; 6],
    pub seed: u64,
    /// World-frame depot the base tour starts and ends at.
    pub depot: [f64; 3],
    /// Zero out timings so result JSON is byte-stable across runs.
    pub stable_output: bool,
    /// IK search knobs (see kinematics::IkParams).
    pub roll_samples: usize,
    pub ik_restarts: usize,
    pub ik_max_iters: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let ik = IkParams::default();
        PipelineConfig {
            chain_file: None,
            sphere_model: None,
            fkr_file: None,
            region_min: [0.1, -0.4, 0.1],
            region_max: [0.9, 0.4, 0.9],
            resolution: 0.04,
            theta_deg: 10.0,
            x_offset: None,
            z_offset: None,
            diameter_override: None,
            delta_mode: DeltaMode::Paper,
            h_scale: 1.5,
            joint_weights: [1.0; 6],
            seed: 0,
            depot: [0.0, 0.0, 0.0],
            stable_output: false,
            roll_samples: ik.roll_samples,
            ik_restarts: ik.restarts,
            ik_max_iters: ik.max_iters,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Parse(format!("config file: {e}")))
    }

    pub fn theta(&self) -> f64 {
        self.theta_deg.to_radians()
    }

    pub fn ik_params(&self) -> IkParams {
        IkParams {
            roll_samples: self.roll_samples,
            restarts: self.ik_restarts,
            max_iters: self.ik_max_iters,
            seed: self.seed,
            ..IkParams::default()
        }
    }

    /// Instantiates the configured IK backend.
    pub fn backend(&self) -> Result<Box<dyn IkBackend>> {
        if let Some(s) = self.sphere_model {
            return Ok(Box::new(s));
        }
        match &self.chain_file {
            Some(path) => {
                let json = std::fs::read_to_string(path)?;
                Ok(Box::new(KinematicChain::from_json(&json)?))
            }
            None => Ok(Box::new(KinematicChain::bundled())),
        }
    }
}

/// Wall-clock seconds per stage, mirroring the offline/online split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub fkr_s: f64,
    pub macs_s: f64,
    pub ballfit_s: f64,
    pub clustering_s: f64,
    pub base_placement_s: f64,
    pub sequencing_s: f64,
    pub total_s: f64,
}

/// Everything the pipeline produced, serializable as the result JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineResult {
    pub ball_segment: BallSegment,
    pub clusters: Vec<Cluster>,
    /// One base pose per cluster, aligned with `clusters`.
    pub base_poses: Vec<BasePose>,
    /// Matched base-frame ball center per cluster, aligned with `clusters`.
    pub matched_balls: Vec<Vec3>,
    pub base_tour: BaseTour,
    pub target_sequence: TargetSequence,
    pub config_sequence: ConfigSequence,
    pub validation: Vec<ReachabilityReport>,
    pub timings: Timings,
}

impl PipelineResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result always serializes")
    }
}

/// Attaches the failing stage to message-carrying errors.
fn tag(stage: &str, e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("{stage}: {m}")),
        Error::Parse(m) => Error::Parse(format!("{stage}: {m}")),
        Error::Format(m) => Error::Format(format!("{stage}: {m}")),
        Error::Infeasible(m) => Error::Infeasible(format!("{stage}: {m}")),
        Error::InvariantViolation(m) => Error::InvariantViolation(format!("{stage}: {m}")),
        other => other,
    }
}

/// Analytic base placement for every cluster: one matched ball center (in
/// the manipulator base frame) and one world pose each.
pub fn place_bases(
    clusters: &[Cluster],
    directions: &[crate::geometry::UnitVec3],
    segment: &BallSegment,
) -> Result<(Vec<BasePose>, Vec<Vec3>)> {
    let mut base_poses = Vec::with_capacity(clusters.len());
    let mut matched_balls = Vec::with_capacity(clusters.len());
    for (ci, cluster) in clusters.iter().enumerate() {
        if cluster.members.iter().any(|&i| i >= directions.len()) {
            return Err(Error::invalid(format!(
                "cluster {ci} references a target index beyond the target set"
            )));
        }
        let mean = cluster
            .members
            .iter()
            .fold(Vec3::zero(), |acc, &i| acc + directions[i].as_vec3());
        let stage = format!("base-pose (cluster {ci})");
        let frame = ClusterFrame::new(cluster.center, mean).map_err(|e| tag(&stage, e))?;
        let ball = match_ball(cluster.center.z, segment).map_err(|e| tag(&stage, e))?;
        let pose = base_transform(&frame, ball).map_err(|e| tag(&stage, e))?;
        base_poses.push(pose);
        matched_balls.push(ball);
    }
    Ok((base_poses, matched_balls))
}

/// Base tour, stacked target sequence, and joint-configuration path for
/// already-placed clusters. `fallback_h` is the stack spacing when every
/// cluster is a singleton (the ball diameter in the full pipeline).
pub fn plan_sequence(
    config: &PipelineConfig,
    backend: &dyn IkBackend,
    targets: &[Target],
    clusters: &[Cluster],
    base_poses: &[BasePose],
    fallback_h: f64,
) -> Result<(BaseTour, TargetSequence, ConfigSequence)> {
    if clusters.len() != base_poses.len() {
        return Err(Error::invalid(
            "plan_sequence: clusters and base poses must align",
        ));
    }
    let positions: Vec<Vec3> = targets.iter().map(|t| t.position).collect();
    let directions: Vec<_> = targets.iter().map(|t| t.direction).collect();
    let ik = config.ik_params();
    let depot = Vec3::from(config.depot);
    let base_positions: Vec<Vec3> = base_poses
        .iter()
        .map(|p| Vec3::new(p.x, p.y, 0.0))
        .collect();
    let base_tour = base_tour_2opt(&base_positions, depot, config.seed);
    let stacked = stack_clusters(
        clusters,
        &base_tour,
        &positions,
        config.h_scale,
        depot,
        depot,
        fallback_h,
    )
    .map_err(|e| tag("sequencing", e))?;
    let target_sequence = hamiltonian_path(&stacked);

    let mut cluster_of = vec![usize::MAX; targets.len()];
    for (ci, c) in clusters.iter().enumerate() {
        for &t in &c.members {
            if t >= targets.len() {
                return Err(Error::invalid(format!(
                    "cluster {ci} references a target index beyond the target set"
                )));
            }
            if cluster_of[t] != usize::MAX {
                return Err(Error::invariant(format!(
                    "sequencing: target {t} belongs to two clusters"
                )));
            }
            cluster_of[t] = ci;
        }
    }
    if cluster_of.contains(&usize::MAX) {
        return Err(Error::invariant("sequencing: a target was never clustered"));
    }

    let home = vec![JointConfig::zeros()];
    let mut layers: Vec<Vec<JointConfig>> = Vec::with_capacity(targets.len() + 2);
    layers.push(home.clone());
    for &t in &target_sequence.order {
        let pose = &base_poses[cluster_of[t]];
        let world_to_base = pose.transform().inverse();
        let task = TaskPoint {
            position: world_to_base.transform_point(positions[t]),
            direction: crate::geometry::UnitVec3::normalize(
                world_to_base.transform_vector(directions[t].as_vec3()),
            )
            .map_err(|e| tag("sequencing", e))?,
        };
        let params = IkParams {
            seed: config.seed ^ (t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
            ..ik
        };
        layers.push(backend.ik_solutions(&task, &params));
    }
    layers.push(home);
    let config_sequence = config_shortest_path(&layers, &config.joint_weights).map_err(|e| {
        match e {
            // Map the sequence position back to the original target index.
            Error::UnreachableTarget { index } => Error::UnreachableTarget {
                index: target_sequence.order[index],
            },
            other => tag("sequencing", other),
        }
    })?;
    Ok((base_tour, target_sequence, config_sequence))
}

/// Runs the full pipeline over `targets`. See the module docs for stage
/// order; every stage error is tagged with its stage name.
pub fn run(config: &PipelineConfig, targets: &[Target]) -> Result<PipelineResult> {
    let t_total = Instant::now();
    if targets.is_empty() {
        return Err(Error::invalid("run: target set is empty"));
    }
    let positions: Vec<Vec3> = targets.iter().map(|t| t.position).collect();
    let directions: Vec<_> = targets.iter().map(|t| t.direction).collect();
    let backend = config.backend().map_err(|e| tag("backend", e))?;

    // Stage 1: reachability database (load or build).
    let t0 = Instant::now();
    let db: FkrDatabase = match &config.fkr_file {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| tag("fkr-load", e.into()))?;
            load_fkr(&bytes).map_err(|e| tag("fkr-load", e))?
        }
        None => {
            let region = Aabb::new(Vec3::from(config.region_min), Vec3::from(config.region_max))
                .map_err(|e| tag("fkr-build", e))?;
            let dirs = bounding_directions(config.theta()).map_err(|e| tag("fkr-build", e))?;
            build_fkr(backend.as_ref(), region, config.resolution, &dirs, &config.ik_params())
                .map_err(|e| tag("fkr-build", e))?
        }
    };
    let fkr_s = t0.elapsed().as_secs_f64();

    // Stage 2: maximal digitally convex subset.
    let t0 = Instant::now();
    let digital = DigitalSet::from_grid(&db.grid);
    if digital.is_empty() {
        return Err(Error::Infeasible(
            "macs: reachability database has no marked voxels".into(),
        ));
    }
    let (_macs_set, hull) = find_macs(&digital).map_err(|e| tag("macs", e))?;
    let macs_s = t0.elapsed().as_secs_f64();

    // Stage 3: ball segment over the target height span.
    let t0 = Instant::now();
    let z_min = positions.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    let z_max = positions.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max);
    let planes = CollisionPlanes {
        x_offset: config.x_offset,
        z_offset: config.z_offset,
    };
    let mut segment =
        fit_ball_segment(&hull, z_min, z_max, &planes).map_err(|e| tag("ballfit", e))?;
    if let Some(d) = config.diameter_override {
        segment = segment.shrink_diameter(d).map_err(|e| tag("ballfit", e))?;
    }
    let ballfit_s = t0.elapsed().as_secs_f64();

    // Stage 4: clustering.
    let t0 = Instant::now();
    let delta =
        delta_from_diameter(segment.d, config.delta_mode).map_err(|e| tag("clustering", e))?;
    let graph = build_graph(&positions, delta).map_err(|e| tag("clustering", e))?;
    let pre = clique_cover(&graph).map_err(|e| tag("clustering", e))?;
    let clusters = verify_and_split(&pre, &positions, segment.d).map_err(|e| tag("clustering", e))?;
    let clustering_s = t0.elapsed().as_secs_f64();

    // Stage 5: analytic base placement per cluster.
    let t0 = Instant::now();
    let (base_poses, matched_balls) = place_bases(&clusters, &directions, &segment)?;
    let base_placement_s = t0.elapsed().as_secs_f64();

    // Stage 6: base tour, target sequence, configuration sequence.
    let t0 = Instant::now();
    let (base_tour, target_sequence, config_sequence) = plan_sequence(
        config,
        backend.as_ref(),
        targets,
        &clusters,
        &base_poses,
        segment.d,
    )?;
    let sequencing_s = t0.elapsed().as_secs_f64();

    // Validation: per-cluster reachability report; ball containment is an
    // invariant, the rest is informational.
    let mut validation = Vec::with_capacity(clusters.len());
    for (ci, cluster) in clusters.iter().enumerate() {
        let report = validate_reachability(
            cluster,
            &positions,
            &directions,
            &base_poses[ci],
            matched_balls[ci],
            segment.d,
            &db,
        );
        if !report.all_in_ball {
            return Err(Error::invariant(format!(
                "validation: cluster {ci} has a target outside its matched ball"
            )));
        }
        validation.push(report);
    }

    let mut seen = vec![false; targets.len()];
    for &t in &target_sequence.order {
        if seen[t] {
            return Err(Error::invariant(format!(
                "validation: target {t} sequenced twice"
            )));
        }
        seen[t] = true;
    }
    if !seen.iter().all(|&s| s) {
        return Err(Error::invariant("validation: sequence misses a target"));
    }

    let timings = if config.stable_output {
        Timings::default()
    } else {
        Timings {
            fkr_s,
            macs_s,
            ballfit_s,
            clustering_s,
            base_placement_s,
            sequencing_s,
            total_s: t_total.elapsed().as_secs_f64(),
        }
    };
    Ok(PipelineResult {
        ball_segment: segment,
        clusters,
        base_poses,
        matched_balls,
        base_tour,
        target_sequence,
        config_sequence,
        validation,
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{gen_targets, GenParams, TargetKind};

    /// Sphere-model configuration whose reachable shell comfortably covers
    /// a small curved-wall scene.
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
        .unwrap()
    }

    #[test]
    fn tight_triplet_yields_one_cluster() {
        let config = sphere_config();
        let dir = crate::geometry::UnitVec3::normalize(Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let targets: Vec<Target> = [
            Vec3::new(2.0, 0.0, 0.7),
            Vec3::new(2.02, 0.03, 0.72),
            Vec3::new(1.98, -0.03, 0.68),
        ]
        .into_iter()
        .map(|position| Target {
            position,
            direction: dir,
        })
        .collect();
        let result = run(&config, &targets).unwrap();
        assert_eq!(result.clusters.len(), 1, "one ball suffices");
        assert_eq!(result.base_poses.len(), 1);
        assert_eq!(result.target_sequence.order.len(), 3);
        assert_eq!(result.config_sequence.configs.len(), 5, "start + 3 + goal");
    }

    #[test]
    fn full_run_covers_and_sequences_every_target() {
        let config = sphere_config();
        let targets = wall_targets(60, 3);
        let result = run(&config, &targets).unwrap();
        assert!(result.clusters.len() > 1, "spread wall needs several bases");
        let mut sorted = result.target_sequence.order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..60).collect::<Vec<_>>(), "sequence permutation");
        assert_eq!(result.base_poses.len(), result.clusters.len());
        assert_eq!(result.validation.len(), result.clusters.len());
        for report in &result.validation {
            assert!(report.all_in_ball);
        }
        // Base-pose coincidence: pose × matched ball = cluster center.
        for (ci, cluster) in result.clusters.iter().enumerate() {
            let mapped = result.base_poses[ci]
                .transform()
                .transform_point(result.matched_balls[ci]);
            assert!(
                mapped.distance(cluster.center) < 1e-9,
                "cluster {ci} coincidence"
            );
        }
    }

    #[test]
    fn stable_output_is_byte_identical() {
        let config = sphere_config();
        let targets = wall_targets(40, 11);
        let a = run(&config, &targets).unwrap().to_json();
        let b = run(&config, &targets).unwrap().to_json();
        assert_eq!(a, b, "reproducible stable output");
    }

    #[test]
    fn empty_targets_are_rejected() {
        assert!(run(&sphere_config(), &[]).is_err());
    }

    #[test]
    fn unreachable_heights_fail_in_the_ballfit_stage() {
        let config = sphere_config();
        let dir = crate::geometry::UnitVec3::normalize(Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let targets = vec![Target {
            position: Vec3::new(2.0, 0.0, 5.0),
            direction: dir,
        }];
        match run(&config, &targets) {
            Err(Error::HeightNotCovered { height, .. }) => {
                assert!((height - 5.0).abs() < 1e-9)
            }
            other => panic!("expected HeightNotCovered, got {other:?}"),
        }
    }

    #[test]
    fn config_defaults_parse_from_empty_object() {
        let c = PipelineConfig::from_json("{}").unwrap();
        assert_eq!(c.resolution, 0.04);
        assert_eq!(c.theta_deg, 10.0);
        assert_eq!(c.h_scale, 1.5);
        assert!(PipelineConfig::from_json("{\"not_a_field\": 1}").is_err());
    }

    #[test]
    fn diameter_override_shrinks_the_balls() {
        let config = PipelineConfig {
            diameter_override: Some(0.2),
            ..sphere_config()
        };
        let targets = wall_targets(30, 5);
        let result = run(&config, &targets).unwrap();
        assert!((result.ball_segment.d - 0.2).abs() < 1e-12);
        for c in &result.clusters {
            assert!(2.0 * c.radius <= 0.2 + 1e-9, "clusters honor the override");
        }
    }
}
