//! Kinematic backends: forward kinematics and IK solution sets for a 6-DOF
//! serial chain, plus a closed-form "sphere model" stand-in.
//!
//! The reachability database and the configuration sequencing both consume
//! the same interface: "give me the IK solutions for this task point". The
//! serial chain answers with damped least-squares iterations from seeded
//! random restarts (tool roll discretized, since the task constrains only
//! the tool axis); the sphere model answers from pure geometry so tests can
//! verify voxel marking against an exact oracle.

use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, UnitVec3, Vec3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One joint in classic Denavit–Hartenberg convention, plus limits.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DhJoint {
    /// Link length (meters).
    pub a: f64,
    /// Link twist (radians).
    pub alpha: f64,
    /// Link offset (meters).
    pub d: f64,
    /// Constant added to the joint variable (radians).
    #[serde(default)]
    pub theta_offset: f64,
    /// Joint limits (radians).
    pub lower: f64,
    pub upper: f64,
}

/// A 6-revolute-joint serial chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ChainRepr", into = "ChainRepr")]
pub struct KinematicChain {
    name: String,
    joints: Vec<DhJoint>,
}

#[derive(Serialize, Deserialize)]
struct ChainRepr {
    name: String,
    joints: Vec<DhJoint>,
}

impl TryFrom<ChainRepr> for KinematicChain {
    type Error = Error;
    fn try_from(r: ChainRepr) -> Result<Self> {
        KinematicChain::new(r.name, r.joints)
    }
}

impl From<KinematicChain> for ChainRepr {
    fn from(c: KinematicChain) -> Self {
        ChainRepr {
            name: c.name,
            joints: c.joints,
        }
    }
}

impl KinematicChain {
    pub fn new(name: String, joints: Vec<DhJoint>) -> Result<Self> {
        if joints.len() != 6 {
            return Err(Error::invalid(format!(
                "chain must have exactly 6 joints, got {}",
                joints.len()
            )));
        }
        for (i, j) in joints.iter().enumerate() {
            let finite =
                [j.a, j.alpha, j.d, j.theta_offset, j.lower, j.upper].iter().all(|v| v.is_finite());
            if !finite {
                return Err(Error::invalid(format!("joint {i}: non-finite parameter")));
            }
            if j.lower >= j.upper {
                return Err(Error::invalid(format!(
                    "joint {i}: lower limit {} must be below upper limit {}",
                    j.lower, j.upper
                )));
            }
        }
        Ok(KinematicChain { name, joints })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Parse(format!("chain file: {e}")))
    }

    /// The generic 6R chain bundled with the crate (≈0.87 m reach).
    pub fn bundled() -> Self {
        Self::from_json(include_str!("../data/generic6r.json"))
            .expect("bundled chain fixture must parse")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn joints(&self) -> &[DhJoint] {
        &self.joints
    }

    pub fn within_limits(&self, q: &JointConfig) -> bool {
        self.joints
            .iter()
            .zip(q.0.iter())
            .all(|(j, &v)| v >= j.lower - 1e-12 && v <= j.upper + 1e-12)
    }

    /// Conservative outer bound on reach from the base origin.
    pub fn reach_bound(&self) -> f64 {
        self.joints.iter().map(|j| j.a.abs() + j.d.abs()).sum()
    }
}

/// A joint-space configuration (radians), serialized as a plain array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfig(pub [f64; 6]);

impl JointConfig {
    pub fn zeros() -> Self {
        JointConfig([0.0; 6])
    }

    pub fn max_abs_diff(&self, other: &JointConfig) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Euclidean distance with per-joint weights.
    pub fn weighted_distance(&self, other: &JointConfig, weights: &[f64; 6]) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .zip(weights.iter())
            .map(|((a, b), w)| (w * (a - b)).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// A task-space goal: tool position and approach axis in the planning frame.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TaskPoint {
    pub position: Vec3,
    pub direction: UnitVec3,
}

/// Tunables for the iterative IK search.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IkParams {
    /// Discretization of the free tool roll.
    pub roll_samples: usize,
    /// Random restarts per roll value.
    pub restarts: usize,
    pub seed: u64,
    /// Accept a solution when FK lands within this position error (meters).
    pub pos_tol: f64,
    /// ... and the tool axis within this angle (radians).
    pub ang_tol: f64,
    /// Solutions closer than this (max joint difference) are duplicates.
    pub dedup_tol: f64,
    /// Iteration cap per damped-least-squares descent.
    pub max_iters: usize,
}

impl Default for IkParams {
    fn default() -> Self {
        IkParams {
            roll_samples: 8,
            restarts: 4,
            seed: 0,
            pos_tol: 1e-4,
            ang_tol: 1e-3,
            dedup_tol: 1e-2,
            max_iters: 150,
        }
    }
}

/// Anything that can answer IK queries. Implementations must be pure
/// functions of (self, target, params) so reachability builds parallelize.
pub trait IkBackend: Sync {
    /// All distinct IK solutions, deduplicated and canonically sorted.
    fn ik_solutions(&self, target: &TaskPoint, params: &IkParams) -> Vec<JointConfig>;

    /// Existence check; backends may answer faster than enumerating.
    fn reachable(&self, target: &TaskPoint, params: &IkParams) -> bool {
        !self.ik_solutions(target, params).is_empty()
    }

    /// Stable identifier recorded in reachability databases.
    fn id(&self) -> String;
}

/// Closed-form stand-in backend: a point is reachable iff its distance from
/// a fixed shoulder lies in [r_min, r_max]; the approach direction is
/// ignored. Lets voxel marking be verified against exact shell geometry.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SphereModel {
    pub shoulder: Vec3,
    pub r_min: f64,
    pub r_max: f64,
}

impl IkBackend for SphereModel {
    fn ik_solutions(&self, target: &TaskPoint, _params: &IkParams) -> Vec<JointConfig> {
        let r = self.shoulder.distance(target.position);
        if r >= self.r_min && r <= self.r_max {
            vec![JointConfig::zeros()]
        } else {
            Vec::new()
        }
    }

    fn id(&self) -> String {
        format!(
            "sphere[{:.6},{:.6},{:.6};{:.6}..{:.6}]",
            self.shoulder.x, self.shoulder.y, self.shoulder.z, self.r_min, self.r_max
        )
    }
}

type Mat3 = [[f64; 3]; 3];

fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

fn mat3_mul_vec(a: &Mat3, v: Vec3) -> Vec3 {
    Vec3::new(
        a[0][0] * v.x + a[0][1] * v.y + a[0][2] * v.z,
        a[1][0] * v.x + a[1][1] * v.y + a[1][2] * v.z,
        a[2][0] * v.x + a[2][1] * v.y + a[2][2] * v.z,
    )
}

/// Pose as plain rotation + translation, used in the inner IK loop where
/// the validated `RigidTransform` wrapper would be needless overhead.
#[derive(Clone, Copy)]
struct Pose {
    r: Mat3,
    t: Vec3,
}

impl Pose {
    fn identity() -> Self {
        Pose {
            r: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            t: Vec3::zero(),
        }
    }

    fn mul(&self, o: &Pose) -> Pose {
        Pose {
            r: mat3_mul(&self.r, &o.r),
            t: mat3_mul_vec(&self.r, o.t) + self.t,
        }
    }

    fn z_axis(&self) -> Vec3 {
        Vec3::new(self.r[0][2], self.r[1][2], self.r[2][2])
    }
}

/// Classic DH joint transform for joint variable `theta`.
fn dh_pose(j: &DhJoint, theta: f64) -> Pose {
    let th = theta + j.theta_offset;
    let (st, ct) = th.sin_cos();
    let (sa, ca) = j.alpha.sin_cos();
    Pose {
        r: [
            [ct, -st * ca, st * sa],
            [st, ct * ca, -ct * sa],
            [0.0, sa, ca],
        ],
        t: Vec3::new(j.a * ct, j.a * st, j.d),
    }
}

fn fk_pose(chain: &KinematicChain, q: &[f64; 6]) -> Pose {
    let mut t = Pose::identity();
    for (j, &qi) in chain.joints.iter().zip(q.iter()) {
        t = t.mul(&dh_pose(j, qi));
    }
    t
}

/// End-effector pose in the chain base frame. The tool axis is the z column
/// of the returned rotation.
pub fn forward_kinematics(chain: &KinematicChain, q: &JointConfig) -> Result<RigidTransform> {
    if !chain.within_limits(q) {
        return Err(Error::invalid("joint configuration violates limits"));
    }
    let p = fk_pose(chain, &q.0);
    RigidTransform::new(p.r, p.t)
}

/// Geometric Jacobian (6×6): rows 0–2 linear, rows 3–5 angular.
fn jacobian(chain: &KinematicChain, q: &[f64; 6], ee: &Pose) -> [[f64; 6]; 6] {
    let mut jac = [[0.0; 6]; 6];
    let mut cur = Pose::identity();
    for i in 0..6 {
        let axis = cur.z_axis();
        let origin = cur.t;
        let lin = axis.cross(ee.t - origin);
        jac[0][i] = lin.x;
        jac[1][i] = lin.y;
        jac[2][i] = lin.z;
        jac[3][i] = axis.x;
        jac[4][i] = axis.y;
        jac[5][i] = axis.z;
        cur = cur.mul(&dh_pose(&chain.joints[i], q[i]));
    }
    jac
}

/// Rotation vector (axis × angle) of `r`, robust near 0 and π.
fn rotation_log(r: &Mat3) -> Vec3 {
    let tr = (r[0][0] + r[1][1] + r[2][2]).clamp(-1.0, 3.0);
    let angle = ((tr - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
    let w = Vec3::new(
        0.5 * (r[2][1] - r[1][2]),
        0.5 * (r[0][2] - r[2][0]),
        0.5 * (r[1][0] - r[0][1]),
    );
    let s = w.norm();
    if s > 1e-9 {
        return w.scale(angle / s);
    }
    if angle < 1e-6 {
        return w.scale(2.0); // first-order approximation near identity
    }
    // Near π: recover the axis from the symmetric part.
    let xx = ((r[0][0] + 1.0) / 2.0).max(0.0).sqrt();
    let yy = ((r[1][1] + 1.0) / 2.0).max(0.0).sqrt();
    let zz = ((r[2][2] + 1.0) / 2.0).max(0.0).sqrt();
    let axis = if xx >= yy && xx >= zz {
        Vec3::new(xx, r[0][1] / (2.0 * xx + 1e-300), r[0][2] / (2.0 * xx + 1e-300))
    } else if yy >= zz {
        Vec3::new(r[0][1] / (2.0 * yy + 1e-300), yy, r[1][2] / (2.0 * yy + 1e-300))
    } else {
        Vec3::new(r[0][2] / (2.0 * zz + 1e-300), r[1][2] / (2.0 * zz + 1e-300), zz)
    };
    let n = axis.norm();
    if n < 1e-12 {
        return Vec3::new(angle, 0.0, 0.0);
    }
    axis.scale(angle / n)
}

/// Orthonormal frame whose z column equals `dir`, rolled by `roll` around it.
fn direction_frame(dir: UnitVec3, roll: f64) -> Mat3 {
    let d = dir.as_vec3();
    let reference = if d.z.abs() < 0.9 {
        Vec3::new(0.0, 0.0, 1.0)
    } else {
        Vec3::new(1.0, 0.0, 0.0)
    };
    let y0 = reference.cross(d);
    let y0 = y0.scale(1.0 / y0.norm());
    let x0 = y0.cross(d);
    let (sr, cr) = roll.sin_cos();
    let xr = x0.scale(cr) + y0.scale(sr);
    let yr = x0.scale(-sr) + y0.scale(cr);
    [
        [xr.x, yr.x, d.x],
        [xr.y, yr.y, d.y],
        [xr.z, yr.z, d.z],
    ]
}

/// One damped-least-squares descent toward a full target pose.
fn dls_descent(
    chain: &KinematicChain,
    target_pos: Vec3,
    target_rot: &Mat3,
    mut q: [f64; 6],
    max_iters: usize,
) -> [f64; 6] {
    use nalgebra::{Matrix6, Vector6};
    const LAMBDA: f64 = 0.08;
    const STEP_CAP: f64 = 0.4;
    for _ in 0..max_iters {
        let ee = fk_pose(chain, &q);
        let e_pos = target_pos - ee.t;
        // R_err maps current orientation onto the target.
        let mut rt = [[0.0; 3]; 3];
        for (i, row) in rt.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = ee.r[j][i];
            }
        }
        let e_rot = rotation_log(&mat3_mul(target_rot, &rt));
        if e_pos.norm() < 5e-6 && e_rot.norm() < 5e-5 {
            break;
        }
        let jac = jacobian(chain, &q, &ee);
        let j = Matrix6::from_fn(|r, c| jac[r][c]);
        let jjt = j * j.transpose() + Matrix6::identity() * (LAMBDA * LAMBDA);
        let e = Vector6::new(e_pos.x, e_pos.y, e_pos.z, e_rot.x, e_rot.y, e_rot.z);
        let Some(y) = jjt.lu().solve(&e) else { break };
        let dq = j.transpose() * y;
        for i in 0..6 {
            let step = dq[i].clamp(-STEP_CAP, STEP_CAP);
            q[i] = (q[i] + step).clamp(chain.joints[i].lower, chain.joints[i].upper);
        }
    }
    q
}

/// Stream seed for one (roll, restart) attempt: restart streams are stable,
/// so doubling `restarts` re-runs the same attempts plus new ones, which
/// gives the solution-set monotonicity property.
fn attempt_seed(seed: u64, roll_idx: usize, restart: usize) -> u64 {
    // SplitMix64-style mixing of the three inputs.
    let mut z = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((roll_idx as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add((restart as u64).wrapping_mul(0x94d0_49bb_1331_11eb));
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn verify_solution(
    chain: &KinematicChain,
    target: &TaskPoint,
    params: &IkParams,
    q: &[f64; 6],
) -> bool {
    let ee = fk_pose(chain, q);
    if (target.position - ee.t).norm() > params.pos_tol {
        return false;
    }
    let axis = ee.z_axis();
    let cosang = axis.dot(target.direction.as_vec3()).clamp(-1.0, 1.0);
    cosang.acos() <= params.ang_tol
}

/// All distinct IK solutions for `target`, deduplicated (max joint distance
/// above `dedup_tol`) and sorted lexicographically by joint values.
/// Unreachable targets return an empty list — that emptiness is exactly the
/// signal the reachability database consumes.
pub fn ik_solutions(
    chain: &KinematicChain,
    target: &TaskPoint,
    params: &IkParams,
) -> Vec<JointConfig> {
    collect_solutions(chain, target, params, false)
}

/// Early-exit existence check used by reachability sampling.
pub fn ik_reachable(chain: &KinematicChain, target: &TaskPoint, params: &IkParams) -> bool {
    !collect_solutions(chain, target, params, true).is_empty()
}

fn collect_solutions(
    chain: &KinematicChain,
    target: &TaskPoint,
    params: &IkParams,
    first_only: bool,
) -> Vec<JointConfig> {
    if params.roll_samples == 0 || params.restarts == 0 {
        return Vec::new();
    }
    // Fast reject: beyond any possible reach (plus slack for the tolerance).
    if target.position.norm() > chain.reach_bound() + params.pos_tol {
        return Vec::new();
    }
    let mut found: Vec<[f64; 6]> = Vec::new();
    'search: for roll_idx in 0..params.roll_samples {
        let roll = 2.0 * std::f64::consts::PI * roll_idx as f64 / params.roll_samples as f64;
        let rot = direction_frame(target.direction, roll);
        for restart in 0..params.restarts {
            let mut rng =
                ChaCha8Rng::seed_from_u64(attempt_seed(params.seed, roll_idx, restart));
            let mut q0 = [0.0; 6];
            for (i, j) in chain.joints.iter().enumerate() {
                q0[i] = rng.random_range(j.lower..j.upper);
            }
            let q = dls_descent(chain, target.position, &rot, q0, params.max_iters);
            if verify_solution(chain, target, params, &q) {
                found.push(q);
                if first_only {
                    break 'search;
                }
            }
        }
    }
    // Canonical order first, then greedy dedup, so the output never depends
    // on discovery order.
    found.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out: Vec<JointConfig> = Vec::new();
    for q in found {
        let q = JointConfig(q);
        if out.iter().all(|kept| kept.max_abs_diff(&q) > params.dedup_tol) {
            out.push(q);
        }
    }
    out
}

impl IkBackend for KinematicChain {
    fn ik_solutions(&self, target: &TaskPoint, params: &IkParams) -> Vec<JointConfig> {
        ik_solutions(self, target, params)
    }

    fn reachable(&self, target: &TaskPoint, params: &IkParams) -> bool {
        ik_reachable(self, target, params)
    }

    fn id(&self) -> String {
        format!("chain:{}", self.name)
    }
}
