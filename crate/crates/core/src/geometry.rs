//! Vectors, rigid transforms, and the exact minimum enclosing ball.
//!
//! Positions are meters. Rotations are stored as row-major 3×3 matrices
//! because every pose equation downstream is written as a transform product.

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Deref, Mul, Neg, Sub};

/// Tolerance for unit-norm and orthonormality invariants.
pub const UNIT_TOL: f64 = 1e-9;

/// A 3D vector / point, serialized as `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub const fn zero() -> Self {
        Vec3::new(0.0, 0.0, 0.0)
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        self.scale(s)
    }
}

/// A direction vector with unit Euclidean norm, serialized as `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    /// Wraps a vector that must already be unit-norm within [`UNIT_TOL`].
    pub fn new(v: Vec3) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::invalid("direction has non-finite components"));
        }
        if (v.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::invalid(format!(
                "direction norm {} differs from 1 by more than {UNIT_TOL}",
                v.norm()
            )));
        }
        Ok(UnitVec3(v))
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalize(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::invalid("cannot normalize a (near-)zero direction"));
        }
        Ok(UnitVec3(v.scale(1.0 / n)))
    }

    /// Accepts a vector whose norm is within `tol` of 1 and renormalizes it;
    /// rejects anything further off. Used when reading target files.
    pub fn renormalize(v: Vec3, tol: f64) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || (n - 1.0).abs() > tol {
            return Err(Error::invalid(format!(
                "direction norm {n} differs from 1 by more than {tol}"
            )));
        }
        // Already unit at machine precision: keep the bits untouched so
        // serialization round trips are exact.
        if (n - 1.0).abs() <= 1e-12 {
            return Ok(UnitVec3(v));
        }
        Ok(UnitVec3(v.scale(1.0 / n)))
    }

    pub fn as_vec3(self) -> Vec3 {
        self.0
    }

    /// Angle in radians to another unit vector, in [0, π].
    pub fn angle_to(self, o: UnitVec3) -> f64 {
        self.0.dot(o.0).clamp(-1.0, 1.0).acos()
    }
}

impl Deref for UnitVec3 {
    type Target = Vec3;
    fn deref(&self) -> &Vec3 {
        &self.0
    }
}

impl TryFrom<[f64; 3]> for UnitVec3 {
    type Error = Error;
    fn try_from(a: [f64; 3]) -> Result<Self> {
        // Serialized unit vectors may carry a few ulps of drift; anything
        // grossly non-unit is rejected rather than silently normalized.
        UnitVec3::renormalize(Vec3::from(a), 1e-6)
    }
}

impl From<UnitVec3> for [f64; 3] {
    fn from(u: UnitVec3) -> Self {
        u.0.to_array()
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

fn mat3_transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[j][i];
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

fn mat3_det(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// An SE(3) pose: orthonormal rotation (det +1) plus translation.
///
/// Fields are private so every constructed value satisfies the invariant;
/// use [`RigidTransform::new`] for validated construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RigidTransformRepr", into = "RigidTransformRepr")]
pub struct RigidTransform {
    rotation: Mat3,
    translation: Vec3,
}

#[derive(Serialize, Deserialize)]
struct RigidTransformRepr {
    rotation: Mat3,
    translation: [f64; 3],
}

impl TryFrom<RigidTransformRepr> for RigidTransform {
    type Error = Error;
    fn try_from(r: RigidTransformRepr) -> Result<Self> {
        RigidTransform::new(r.rotation, Vec3::from(r.translation))
    }
}

impl From<RigidTransform> for RigidTransformRepr {
    fn from(t: RigidTransform) -> Self {
        RigidTransformRepr {
            rotation: t.rotation,
            translation: t.translation.to_array(),
        }
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: Vec3::zero(),
        }
    }

    /// Validated constructor: `rotation` must be orthonormal with det +1.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        let rt = mat3_transpose(&rotation);
        let prod = mat3_mul(&rotation, &rt);
        for (i, row) in prod.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                if !v.is_finite() || (v - expect).abs() > 1e-6 {
                    return Err(Error::invariant(
                        "rotation matrix is not orthonormal within tolerance",
                    ));
                }
            }
        }
        if (mat3_det(&rotation) - 1.0).abs() > 1e-6 {
            return Err(Error::invariant("rotation matrix determinant is not +1"));
        }
        if !translation.is_finite() {
            return Err(Error::invariant("translation has non-finite components"));
        }
        Ok(RigidTransform {
            rotation,
            translation,
        })
    }

    /// Pure translation.
    pub fn from_translation(t: Vec3) -> Self {
        RigidTransform {
            rotation: RigidTransform::identity().rotation,
            translation: t,
        }
    }

    /// Rotation about the world z axis by `yaw` radians, then translation.
    pub fn from_yaw_translation(yaw: f64, t: Vec3) -> Self {
        let (s, c) = yaw.sin_cos();
        RigidTransform {
            rotation: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
            translation: t,
        }
    }

    /// Builds a pose from three orthonormal column axes and an origin.
    pub fn from_axes(x: UnitVec3, y: UnitVec3, z: UnitVec3, origin: Vec3) -> Result<Self> {
        let rotation = [
            [x.as_vec3().x, y.as_vec3().x, z.as_vec3().x],
            [x.as_vec3().y, y.as_vec3().y, z.as_vec3().y],
            [x.as_vec3().z, y.as_vec3().z, z.as_vec3().z],
        ];
        RigidTransform::new(rotation, origin)
    }

    /// Internal constructor for products of already-valid transforms.
    fn from_parts(rotation: Mat3, translation: Vec3) -> Self {
        RigidTransform {
            rotation,
            translation,
        }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform::from_parts(
            mat3_mul(&self.rotation, &other.rotation),
            mat3_mul_vec(&self.rotation, other.translation) + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = mat3_transpose(&self.rotation);
        RigidTransform::from_parts(rt, -mat3_mul_vec(&rt, self.translation))
    }

    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        mat3_mul_vec(&self.rotation, p) + self.translation
    }

    pub fn transform_vector(&self, v: Vec3) -> Vec3 {
        mat3_mul_vec(&self.rotation, v)
    }

    /// Rotation angle about +z, assuming the x axis stays horizontal.
    pub fn yaw(&self) -> f64 {
        self.rotation[1][0].atan2(self.rotation[0][0])
    }

    /// Column `i` of the rotation matrix (the image of basis vector `i`).
    pub fn rotation_column(&self, i: usize) -> Vec3 {
        Vec3::new(self.rotation[0][i], self.rotation[1][i], self.rotation[2][i])
    }

    /// Max absolute entry-wise deviation from another transform
    /// (rotation entries and translation components together).
    pub fn max_deviation(&self, other: &RigidTransform) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                m = m.max((self.rotation[i][j] - other.rotation[i][j]).abs());
            }
        }
        m.max((self.translation - other.translation).norm())
    }
}

/// `compose(a, b)` applies `b` first, then `a`.
pub fn transform_compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}

/// The unique inverse: `compose(t, invert(t))` is the identity.
pub fn transform_invert(t: &RigidTransform) -> RigidTransform {
    t.inverse()
}

/// A ball given by center and radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec3,
    pub radius: f64,
}

impl Ball {
    pub fn contains(&self, p: Vec3, tol: f64) -> bool {
        self.center.distance(p) <= self.radius + tol
    }
}

/// Exact minimum enclosing ball (Welzl's move-to-front algorithm).
///
/// The returned ball contains every input point within 1e-9 and its radius is
/// minimal. Deterministic: the internal shuffle uses a fixed seed.
pub fn min_enclosing_ball(points: &[Vec3]) -> Result<Ball> {
    if points.is_empty() {
        return Err(Error::invalid("minimum enclosing ball of an empty set"));
    }
    for p in points {
        if !p.is_finite() {
            return Err(Error::invalid("minimum enclosing ball of non-finite points"));
        }
    }
    let mut pts = points.to_vec();
    // A fixed-seed shuffle keeps the expected-linear-time behavior of the
    // randomized algorithm while making the output order-independent only of
    // adversarial input orderings, not of the input itself (results are
    // identical across runs).
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d65_6221);
    pts.shuffle(&mut rng);
    let mut support: Vec<Vec3> = Vec::with_capacity(4);
    let n = pts.len();
    Ok(welzl_mtf(&mut pts, n, &mut support))
}

/// Move-to-front Welzl recursion; depth is bounded by the support size (≤ 4).
fn welzl_mtf(pts: &mut [Vec3], end: usize, support: &mut Vec<Vec3>) -> Ball {
    let mut ball = ball_from_support(support);
    if support.len() == 4 {
        return ball;
    }
    for i in 0..end {
        let p = pts[i];
        if !welzl_contains(&ball, p) {
            support.push(p);
            ball = welzl_mtf(pts, i, support);
            support.pop();
            pts[..=i].rotate_right(1);
        }
    }
    ball
}

fn welzl_contains(b: &Ball, p: Vec3) -> bool {
    if b.radius < 0.0 {
        return false;
    }
    let r2 = b.radius * b.radius;
    (p - b.center).norm_squared() <= r2 * (1.0 + 1e-10) + 1e-18
}

/// Smallest ball determined by 0–4 support points.
/// Degenerate (collinear / coplanar) supports fall back to smaller subsets.
fn ball_from_support(support: &[Vec3]) -> Ball {
    match support.len() {
        0 => Ball {
            center: Vec3::zero(),
            radius: -1.0,
        },
        1 => Ball {
            center: support[0],
            radius: 0.0,
        },
        2 => ball_from_two(support[0], support[1]),
        3 => ball_from_three(support[0], support[1], support[2]),
        4 => ball_from_four(support[0], support[1], support[2], support[3]),
        _ => unreachable!("support size exceeds 4"),
    }
}

fn ball_from_two(a: Vec3, b: Vec3) -> Ball {
    let center = (a + b).scale(0.5);
    Ball {
        center,
        radius: center.distance(a),
    }
}

fn ball_from_three(a: Vec3, b: Vec3, c: Vec3) -> Ball {
    // Smallest of the three pair balls that covers the remaining point wins;
    // otherwise the circumcircle of the (non-degenerate) triangle.
    let mut best: Option<Ball> = None;
    for (p, q, r) in [(a, b, c), (a, c, b), (b, c, a)] {
        let ball = ball_from_two(p, q);
        if welzl_contains(&ball, r) && best.is_none_or(|bb| ball.radius < bb.radius) {
            best = Some(ball);
        }
    }
    if let Some(ball) = best {
        return ball;
    }
    circumcircle(a, b, c).unwrap_or_else(|| ball_from_two(a, b))
}

fn ball_from_four(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> Ball {
    let mut best: Option<Ball> = None;
    for (p, q, r, s) in [(a, b, c, d), (a, b, d, c), (a, c, d, b), (b, c, d, a)] {
        let ball = ball_from_three(p, q, r);
        if welzl_contains(&ball, s) && best.is_none_or(|bb| ball.radius < bb.radius) {
            best = Some(ball);
        }
    }
    if let Some(ball) = best {
        return ball;
    }
    circumsphere(a, b, c, d).unwrap_or_else(|| ball_from_three(a, b, c))
}

/// Circumscribed circle of a triangle in 3D; `None` when (near-)collinear.
fn circumcircle(a: Vec3, b: Vec3, c: Vec3) -> Option<Ball> {
    let ab = b - a;
    let ac = c - a;
    let n = ab.cross(ac);
    let denom = 2.0 * n.norm_squared();
    if denom < 1e-24 {
        return None;
    }
    let center =
        a + (n.cross(ab).scale(ac.norm_squared()) + ac.cross(n).scale(ab.norm_squared()))
            .scale(1.0 / denom);
    Some(Ball {
        center,
        radius: center.distance(a),
    })
}

/// Circumscribed sphere of a tetrahedron; `None` when (near-)coplanar.
fn circumsphere(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> Option<Ball> {
    use nalgebra::{Matrix3, Vector3};
    let rows = [b - a, c - a, d - a];
    let m = Matrix3::new(
        rows[0].x, rows[0].y, rows[0].z, //
        rows[1].x, rows[1].y, rows[1].z, //
        rows[2].x, rows[2].y, rows[2].z,
    );
    let rhs = Vector3::new(
        0.5 * rows[0].norm_squared(),
        0.5 * rows[1].norm_squared(),
        0.5 * rows[2].norm_squared(),
    );
    let lu = m.lu();
    let sol = lu.solve(&rhs)?;
    if !sol.iter().all(|v| v.is_finite()) {
        return None;
    }
    // Reject ill-conditioned solves (nearly coplanar tetrahedra): the result
    // must actually be equidistant from all four points.
    let center = a + Vec3::new(sol[0], sol[1], sol[2]);
    let radius = center.distance(a);
    for p in [b, c, d] {
        if (center.distance(p) - radius).abs() > 1e-6 * radius.max(1.0) {
            return None;
        }
    }
    Some(Ball { center, radius })
}
