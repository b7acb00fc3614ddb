//! Workspace clustering, analytic base placement, and task sequencing for
//! mobile manipulators.
//!
//! Given a set of task-space targets (position + approach direction), this
//! crate plans how a mobile base with a 6-DOF arm should visit all of them:
//!
//! 1. Build a focused kinematic reachability database `V_fkr`: the voxels
//!    reachable from every extreme approach direction (module [`fkr`]).
//! 2. Extract a maximal digitally convex subset `M_fkr` of those voxels and
//!    express it as half-spaces (module [`macs`]).
//! 3. Fit the largest-diameter segment of balls inside `M_fkr` by linear
//!    programming (module [`ballfit`]).
//! 4. Cluster the targets so each cluster fits one ball of that diameter,
//!    via proximity-graph clique cover (module [`clustering`]).
//! 5. Derive one base pose per cluster analytically (module [`baseplacement`]).
//! 6. Sequence base poses, targets, and joint configurations (module
//!    [`sequencing`]), minimizing base travel and manipulator joint motion.
//!
//! The [`pipeline`] module composes the stages; the `reachplan` binary in the
//! companion CLI crate exposes each stage as a subcommand.

pub mod ballfit;
pub mod baseplacement;
pub mod clustering;
pub mod error;
pub mod fkr;
pub mod geometry;
pub mod hull;
pub mod kinematics;
pub mod lp;
pub mod macs;
pub mod pipeline;
pub mod sequencing;
pub mod targets;

pub use ballfit::{fit_ball_segment, BallSegment, CollisionPlanes};
pub use baseplacement::{base_transform, match_ball, validate_reachability, BasePose, ClusterFrame};
pub use clustering::{
    build_graph, clique_cover, delta_from_diameter, verify_and_split, Cluster, DeltaMode,
    ProximityGraph,
};
pub use error::{Error, Result};
pub use fkr::{bounding_directions, build_fkr, load_fkr, save_fkr, Aabb, FkrDatabase, VoxelGrid};
pub use geometry::{
    min_enclosing_ball, transform_compose, transform_invert, Ball, RigidTransform, UnitVec3, Vec3,
};
pub use kinematics::{
    forward_kinematics, ik_solutions, IkBackend, IkParams, JointConfig, KinematicChain,
    SphereModel, TaskPoint,
};
pub use lp::{solve_lp, LpProblem, LpSolution, LpStatus};
pub use macs::{find_macs, is_digitally_convex, ConvexPolytope, DigitalSet, Halfspace};
pub use pipeline::{place_bases, plan_sequence, run, PipelineConfig, PipelineResult, Timings};
pub use sequencing::{
    base_tour_2opt, config_shortest_path, hamiltonian_path, stack_clusters, BaseTour,
    ConfigSequence, StackedTargets, TargetSequence,
};
pub use targets::{gen_targets, load_targets, save_targets, GenParams, Target, TargetKind};
