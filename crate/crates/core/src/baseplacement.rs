//! Analytic base placement: one pose per cluster, no sampling.
//!
//! Every cluster's enclosing ball is matched by height to a ball of the
//! reachable segment; forcing the two balls to coincide determines the
//! mobile base pose in closed form: ^wT_base = ^wT_ci · translation(b)⁻¹,
//! where ^wT_ci is the cluster frame (origin at the cluster center, x-axis
//! facing the mean approach direction) and b is the matched ball center in
//! the manipulator base frame.

use crate::ballfit::BallSegment;
use crate::clustering::Cluster;
use crate::error::{Error, Result};
use crate::fkr::FkrDatabase;
use crate::geometry::{RigidTransform, UnitVec3, Vec3};
use serde::{Deserialize, Serialize};

/// World-frame cluster frame ^wT_ci: origin at the cluster center, x-axis
/// along the horizontal projection of the mean approach direction, z up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterFrame {
    pub transform: RigidTransform,
}

impl ClusterFrame {
    /// Builds the frame; errors when the mean direction is so close to
    /// vertical that no yaw is principled.
    pub fn new(center: Vec3, mean_direction: Vec3) -> Result<Self> {
        let horizontal = Vec3::new(mean_direction.x, mean_direction.y, 0.0);
        if horizontal.norm() < 1e-6 {
            return Err(Error::Infeasible(
                "cluster mean approach direction is near-vertical; no base yaw is \
                 principled — widen theta or re-orient the targets"
                    .into(),
            ));
        }
        let x = UnitVec3::normalize(horizontal)?;
        let z = UnitVec3::normalize(Vec3::new(0.0, 0.0, 1.0))?;
        let y = UnitVec3::normalize(z.as_vec3().cross(x.as_vec3()))?;
        let transform = RigidTransform::from_axes(x, y, z, center)?;
        Ok(ClusterFrame { transform })
    }
}

/// Planar mobile-base pose; the full transform is yaw about world z plus a
/// floor-level translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasePose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl BasePose {
    pub fn transform(&self) -> RigidTransform {
        RigidTransform::from_yaw_translation(self.yaw, Vec3::new(self.x, self.y, 0.0))
    }
}

/// Matches a cluster center to the segment ball sharing its height:
/// b = b_bottom + t·(b_top − b_bottom) with t from linear interpolation in
/// z (t = 0 for a degenerate segment).
pub fn match_ball(c_i_z: f64, seg: &BallSegment) -> Result<Vec3> {
    let lo = seg.b_bottom.z;
    let hi = seg.b_top.z;
    if c_i_z < lo - 1e-9 || c_i_z > hi + 1e-9 {
        return Err(Error::HeightNotCovered {
            height: c_i_z,
            lo,
            hi,
        });
    }
    if hi - lo <= 0.0 {
        return Ok(seg.b_bottom);
    }
    let t = ((c_i_z - lo) / (hi - lo)).clamp(0.0, 1.0);
    Ok(seg.center_at(t))
}

/// Derives the base pose that makes the matched base-frame ball center `b`
/// coincide with the cluster center: ^wT_base = ^wT_ci · translation(b)⁻¹.
pub fn base_transform(frame: &ClusterFrame, b: Vec3) -> Result<BasePose> {
    let t = frame
        .transform
        .compose(&RigidTransform::from_translation(-b));
    let pos = t.translation();
    if pos.z.abs() > 1e-6 {
        return Err(Error::invariant(format!(
            "base pose left the floor plane (z = {:.3e}); cluster height and ball \
             matching disagree with the floor-level base convention",
            pos.z
        )));
    }
    Ok(BasePose {
        x: pos.x,
        y: pos.y,
        yaw: t.yaw(),
    })
}

/// Per-target verification outcome for one placed cluster.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReachabilityEntry {
    pub target: usize,
    /// Base-frame position within d/2 of the matched ball center.
    pub in_ball: bool,
    /// Containing voxel marked in the reachability database.
    pub voxel_marked: bool,
    /// Direction within θ of the cluster mean (inside the approach cone).
    pub direction_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReachabilityReport {
    pub entries: Vec<ReachabilityEntry>,
    pub all_in_ball: bool,
    pub all_marked: bool,
    pub all_directions_ok: bool,
}

/// Checks, per target of a placed cluster: containment in the matched ball,
/// reachability-database occupancy of its voxel, and approach-cone
/// membership of its direction. Report-only; never fails.
pub fn validate_reachability(
    cluster: &Cluster,
    positions: &[Vec3],
    directions: &[UnitVec3],
    pose: &BasePose,
    ball_center: Vec3,
    d: f64,
    db: &FkrDatabase,
) -> ReachabilityReport {
    let world_to_base = pose.transform().inverse();
    let mean = cluster
        .members
        .iter()
        .fold(Vec3::zero(), |acc, &i| acc + directions[i].as_vec3());
    let mut entries = Vec::with_capacity(cluster.members.len());
    for &i in &cluster.members {
        let base_pos = world_to_base.transform_point(positions[i]);
        let in_ball = base_pos.distance(ball_center) <= d / 2.0 + 1e-9;
        let voxel_marked = db
            .grid
            .voxel_of(base_pos)
            .map(|v| db.grid.is_marked(v))
            .unwrap_or(false);
        let direction_ok = if mean.norm() < 1e-12 {
            false
        } else {
            let cosang = directions[i]
                .as_vec3()
                .dot(mean.scale(1.0 / mean.norm()))
                .clamp(-1.0, 1.0);
            cosang.acos() <= db.theta + 1e-9
        };
        entries.push(ReachabilityEntry {
            target: i,
            in_ball,
            voxel_marked,
            direction_ok,
        });
    }
    ReachabilityReport {
        all_in_ball: entries.iter().all(|e| e.in_ball),
        all_marked: entries.iter().all(|e| e.voxel_marked),
        all_directions_ok: entries.iter().all(|e| e.direction_ok),
        entries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fkr::VoxelGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn segment() -> BallSegment {
        BallSegment {
            b_bottom: Vec3::new(0.6, 0.0, 0.4),
            b_top: Vec3::new(0.5, 0.1, 1.0),
            d: 0.4,
        }
    }

    #[test]
    fn match_ball_interpolates_by_height() {
        let seg = segment();
        assert_eq!(match_ball(0.4, &seg).unwrap(), seg.b_bottom, "bottom end");
        let mid = match_ball(0.7, &seg).unwrap();
        assert!(mid.distance(seg.center_at(0.5)) < 1e-12, "midpoint");
        assert_eq!(match_ball(1.0, &seg).unwrap(), seg.b_top, "top end");
    }

    #[test]
    fn degenerate_segment_returns_bottom() {
        let seg = BallSegment {
            b_bottom: Vec3::new(0.6, 0.0, 0.5),
            b_top: Vec3::new(0.6, 0.0, 0.5),
            d: 0.4,
        };
        assert_eq!(match_ball(0.5, &seg).unwrap(), seg.b_bottom);
    }

    #[test]
    fn out_of_range_height_is_reported() {
        let seg = segment();
        match match_ball(1.5, &seg) {
            Err(Error::HeightNotCovered { height, lo, hi }) => {
                assert!((height - 1.5).abs() < 1e-12);
                assert!((lo - 0.4).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
            }
            other => panic!("expected HeightNotCovered, got {other:?}"),
        }
    }

    #[test]
    fn coincident_frames_give_the_origin_pose() {
        let b = Vec3::new(0.5, 0.0, 0.6);
        let frame = ClusterFrame {
            transform: RigidTransform::from_translation(b),
        };
        let pose = base_transform(&frame, b).unwrap();
        assert!(pose.x.abs() < 1e-12 && pose.y.abs() < 1e-12 && pose.yaw.abs() < 1e-12);
    }

    #[test]
    fn worked_examples_match_hand_transforms() {
        let b = Vec3::new(1.0, 0.0, 1.0);
        // Mean direction +x: base sits 1 m behind the cluster, facing it.
        let frame = ClusterFrame::new(Vec3::new(5.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let pose = base_transform(&frame, b).unwrap();
        assert!((pose.x - 4.0).abs() < 1e-9 && pose.y.abs() < 1e-9, "({}, {})", pose.x, pose.y);
        assert!(pose.yaw.abs() < 1e-9, "yaw {}", pose.yaw);

        // Mean direction +y: the base rotates 90° and sits at (5, −1).
        let frame = ClusterFrame::new(Vec3::new(5.0, 0.0, 1.0), Vec3::new(0.0, 1.0, 0.0)).unwrap();
        let pose = base_transform(&frame, b).unwrap();
        assert!((pose.x - 5.0).abs() < 1e-9 && (pose.y + 1.0).abs() < 1e-9);
        assert!((pose.yaw - std::f64::consts::FRAC_PI_2).abs() < 1e-9, "yaw {}", pose.yaw);
    }

    #[test]
    fn pose_maps_ball_center_onto_cluster_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xba5e);
        for case in 0..50 {
            let center = Vec3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(0.3..1.0),
            );
            let dir = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-0.3..0.3),
            );
            if Vec3::new(dir.x, dir.y, 0.0).norm() < 1e-3 {
                continue;
            }
            let b = Vec3::new(
                rng.random_range(0.3..0.8),
                rng.random_range(-0.2..0.2),
                center.z,
            );
            let frame = ClusterFrame::new(center, dir).unwrap();
            let pose = base_transform(&frame, b).unwrap();
            let mapped = pose.transform().transform_point(b);
            assert!(
                mapped.distance(center) < 1e-9,
                "case {case}: coincidence violated by {}",
                mapped.distance(center)
            );
        }
    }

    #[test]
    fn world_yaw_rotation_rotates_the_pose() {
        let center = Vec3::new(3.0, 2.0, 0.8);
        let dir = Vec3::new(0.8, 0.5, 0.1);
        let b = Vec3::new(0.5, 0.1, 0.8);
        let pose = base_transform(&ClusterFrame::new(center, dir).unwrap(), b).unwrap();
        let phi = 0.7;
        let rot = RigidTransform::from_yaw_translation(phi, Vec3::zero());
        let center2 = rot.transform_point(center);
        let dir2 = rot.transform_vector(dir);
        let pose2 = base_transform(&ClusterFrame::new(center2, dir2).unwrap(), b).unwrap();
        let expect = rot.compose(&pose.transform());
        assert!(
            pose2.transform().max_deviation(&expect) < 1e-9,
            "whole-world yaw equivariance"
        );
    }

    #[test]
    fn near_vertical_direction_is_rejected() {
        let err = ClusterFrame::new(Vec3::zero(), Vec3::new(1e-9, 0.0, 1.0));
        assert!(matches!(err, Err(Error::Infeasible(_))));
    }

    fn all_marked_db(theta: f64) -> FkrDatabase {
        let mut grid = VoxelGrid::new(Vec3::new(0.0, -1.0, 0.0), 0.1, [20, 20, 15]).unwrap();
        for v in (0..20usize)
            .flat_map(|x| (0..20usize).map(move |y| (x, y)))
            .flat_map(|(x, y)| (0..15usize).map(move |z| [x, y, z]))
        {
            grid.set_marked(v, true);
        }
        FkrDatabase {
            grid,
            r_ext: crate::fkr::bounding_directions(theta).unwrap(),
            theta,
            chain_id: "test".into(),
            version: crate::fkr::FKR_FORMAT_VERSION,
        }
    }

    #[test]
    fn validation_report_flags_each_failure_mode() {
        let theta = 10.0_f64.to_radians();
        let db = all_marked_db(theta);
        let d = 0.4;
        let dir = UnitVec3::normalize(Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let positions = vec![
            Vec3::new(5.0, 0.0, 0.8),
            Vec3::new(5.1, 0.1, 0.8),
            // Third target displaced a full diameter from the center.
            Vec3::new(5.0 + d, 0.0, 0.8),
            Vec3::new(5.0, 0.1, 0.85),
        ];
        let tilt = theta * 2.0;
        let directions = vec![
            dir,
            dir,
            dir,
            UnitVec3::normalize(Vec3::new(tilt.cos(), 0.0, tilt.sin())).unwrap(),
        ];

        // All-pass cluster: the first two targets only.
        let ok_cluster = Cluster {
            members: vec![0, 1],
            center: Vec3::new(5.05, 0.05, 0.8),
            radius: 0.08,
        };
        let frame = ClusterFrame::new(ok_cluster.center, Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let ball = Vec3::new(0.6, 0.0, 0.8);
        let pose = base_transform(&frame, ball).unwrap();
        let report = validate_reachability(&ok_cluster, &positions, &directions, &pose, ball, d, &db);
        assert!(report.all_in_ball && report.all_marked && report.all_directions_ok);

        // Cluster with the displaced and the tilted target.
        let bad_cluster = Cluster {
            members: vec![0, 2, 3],
            center: Vec3::new(5.0, 0.0, 0.8),
            radius: 0.2,
        };
        let frame = ClusterFrame::new(bad_cluster.center, Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let pose = base_transform(&frame, ball).unwrap();
        let report =
            validate_reachability(&bad_cluster, &positions, &directions, &pose, ball, d, &db);
        assert!(!report.all_in_ball, "displaced target must fail containment");
        let displaced = report.entries.iter().find(|e| e.target == 2).unwrap();
        assert!(!displaced.in_ball);
        let tilted = report.entries.iter().find(|e| e.target == 3).unwrap();
        assert!(!tilted.direction_ok, "2θ tilt must fall outside the cone");
    }
}
