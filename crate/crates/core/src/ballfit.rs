//! Largest ball segment inside the convex reachable region.
//!
//! A *ball segment* is the family of equal-diameter balls whose centers
//! sweep a straight segment from `b_bottom` up to `b_top`. The fit
//! maximizes the common diameter subject to: every ball stays inside the
//! half-space hull with clearance d/2, optional robot-body collision
//! planes, and the two endpoint heights pinned to the task's height span.
//! Because all constraints are convex, checking the two endpoint balls
//! suffices for every intermediate ball.
//!
//! The maximizer is generally not unique, so two deterministic tie-break
//! stages follow the main LP: a Chebyshev stage pushing both centers away
//! from the side walls, then lexicographic pinning of the remaining free
//! coordinates.

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::lp::{solve_lp, LpProblem, LpSolution, LpStatus};
use crate::macs::ConvexPolytope;
use serde::{Deserialize, Serialize};

/// The fitted family of balls, in the manipulator base frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSegment {
    pub b_bottom: Vec3,
    pub b_top: Vec3,
    /// Common ball diameter (meters).
    pub d: f64,
}

impl BallSegment {
    /// Center of the ball at parameter `t` ∈ [0, 1] along the segment.
    pub fn center_at(&self, t: f64) -> Vec3 {
        self.b_bottom + (self.b_top - self.b_bottom).scale(t)
    }

    /// Worst constraint violation over 11 evenly spaced segment balls.
    pub fn max_violation(&self, hull: &ConvexPolytope) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..=10 {
            let c = self.center_at(i as f64 / 10.0);
            for h in &hull.halfspaces {
                worst = worst.max(h.violation(c) + self.d / 2.0);
            }
        }
        worst
    }

    /// The same segment with a smaller diameter (e.g. a configured
    /// override); shrinking preserves every containment constraint.
    pub fn shrink_diameter(&self, d: f64) -> Result<BallSegment> {
        if !(d.is_finite() && d > 0.0 && d <= self.d) {
            return Err(Error::invalid(format!(
                "override diameter {d} must lie in (0, {}]",
                self.d
            )));
        }
        Ok(BallSegment { d, ..*self })
    }
}

/// Robot-body collision planes: `−c_x + d/2 ≤ x_offset` and
/// `−c_z + d/2 ≤ z_offset` for every ball center c. `None` omits the row.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct CollisionPlanes {
    pub x_offset: Option<f64>,
    pub z_offset: Option<f64>,
}

/// Variable layout of the fit LPs: [bbx, bby, bbz, btx, bty, btz, r].
const NV: usize = 7;
const R: usize = 6;

struct FitRows {
    a_ub: Vec<Vec<f64>>,
    b_ub: Vec<f64>,
    /// Rows whose gradient touches an x or y coordinate; only these take
    /// part in the Chebyshev tie-break.
    side_rows: Vec<bool>,
}

fn fit_rows(hull: &ConvexPolytope, planes: &CollisionPlanes) -> Result<FitRows> {
    let mut a_ub = Vec::new();
    let mut b_ub = Vec::new();
    let mut side_rows = Vec::new();
    for h in &hull.halfspaces {
        if !h.offset.is_finite() {
            return Err(Error::invalid("hull offsets must be finite"));
        }
        let n = h.normal.as_vec3();
        let side = n.x.abs() > 1e-12 || n.y.abs() > 1e-12;
        for center in 0..2 {
            let mut row = vec![0.0; NV];
            row[3 * center] = n.x;
            row[3 * center + 1] = n.y;
            row[3 * center + 2] = n.z;
            row[R] = 1.0;
            a_ub.push(row);
            b_ub.push(h.offset);
            side_rows.push(side);
        }
    }
    for (coord, offset) in [(0usize, planes.x_offset), (2usize, planes.z_offset)] {
        let Some(off) = offset else { continue };
        if !off.is_finite() {
            return Err(Error::invalid("collision plane offsets must be finite"));
        }
        for center in 0..2 {
            let mut row = vec![0.0; NV];
            row[3 * center + coord] = -1.0;
            row[R] = 1.0;
            a_ub.push(row);
            b_ub.push(off);
            side_rows.push(coord == 0);
        }
    }
    // Keep the radius meaningful; a zero-radius optimum is diagnosed below.
    let mut nonneg = vec![0.0; NV];
    nonneg[R] = -1.0;
    a_ub.push(nonneg);
    b_ub.push(0.0);
    side_rows.push(false);
    Ok(FitRows {
        a_ub,
        b_ub,
        side_rows,
    })
}

fn z_equalities(z_min: f64, z_max: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut bb = vec![0.0; NV];
    bb[2] = 1.0;
    let mut bt = vec![0.0; NV];
    bt[5] = 1.0;
    (vec![bb, bt], vec![z_min, z_max])
}

fn solved(p: &LpProblem) -> Result<Option<LpSolution>> {
    let sol = solve_lp(p)?;
    match sol.status {
        LpStatus::Optimal => Ok(Some(sol)),
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::invalid("hull must be a bounded polytope")),
    }
}

/// Extreme z reachable inside the hull, for infeasibility diagnostics.
fn hull_z_range(hull: &ConvexPolytope) -> Result<(f64, f64)> {
    let mut lo = f64::NAN;
    let mut hi = f64::NAN;
    for (sign, out) in [(1.0, &mut lo), (-1.0, &mut hi)] {
        let p = LpProblem {
            objective: vec![0.0, 0.0, sign, 0.0, 0.0, 0.0, 0.0],
            a_ub: hull
                .halfspaces
                .iter()
                .map(|h| {
                    let n = h.normal.as_vec3();
                    vec![n.x, n.y, n.z, 0.0, 0.0, 0.0, 0.0]
                })
                .collect(),
            b_ub: hull.halfspaces.iter().map(|h| h.offset).collect(),
            a_eq: Vec::new(),
            b_eq: Vec::new(),
        };
        match solved(&p)? {
            Some(s) => *out = sign * s.objective,
            None => return Err(Error::Infeasible("hull has no interior".into())),
        }
    }
    Ok((lo, hi))
}

/// Why did the fit fail? Checks the height equalities without clearance,
/// then the clearance without collision planes, and names the first group
/// that cannot be satisfied.
fn diagnose(hull: &ConvexPolytope, z_min: f64, z_max: f64) -> Result<BallSegment> {
    let (lo, hi) = hull_z_range(hull)?;
    for height in [z_min, z_max] {
        if height < lo - 1e-9 || height > hi + 1e-9 {
            return Err(Error::HeightNotCovered { height, lo, hi });
        }
    }
    let no_planes = CollisionPlanes::default();
    let relaxed = fit_rows(hull, &no_planes)?;
    let (a_eq, b_eq) = z_equalities(z_min, z_max);
    let mut objective = vec![0.0; NV];
    objective[R] = -1.0;
    let p = LpProblem {
        objective,
        a_ub: relaxed.a_ub,
        b_ub: relaxed.b_ub,
        a_eq,
        b_eq,
    };
    let relaxed_d = solved(&p)?.map(|s| 2.0 * s.x[R]);
    match relaxed_d {
        Some(d) if d > 1e-9 => Err(Error::Infeasible(format!(
            "collision planes leave no room for a positive-diameter ball \
             (without them d = {d:.6})"
        ))),
        _ => Err(Error::Infeasible(
            "hull is too thin for a positive-diameter ball at the required heights".into(),
        )),
    }
}

/// Maximize the ball diameter for the height span [z_min, z_max]; see the
/// module docs for the constraint system and the tie-break stages.
pub fn fit_ball_segment(
    hull: &ConvexPolytope,
    z_min: f64,
    z_max: f64,
    planes: &CollisionPlanes,
) -> Result<BallSegment> {
    if hull.halfspaces.is_empty() {
        return Err(Error::invalid("hull has no half-spaces"));
    }
    if !(z_min.is_finite() && z_max.is_finite()) {
        return Err(Error::invalid("height span must be finite"));
    }
    if z_min > z_max {
        return Err(Error::invalid(format!(
            "z_min {z_min} must not exceed z_max {z_max}"
        )));
    }
    let rows = fit_rows(hull, planes)?;
    let (a_eq, b_eq) = z_equalities(z_min, z_max);

    // Stage 1: maximize the radius.
    let mut objective = vec![0.0; NV];
    objective[R] = -1.0;
    let p1 = LpProblem {
        objective,
        a_ub: rows.a_ub.clone(),
        b_ub: rows.b_ub.clone(),
        a_eq: a_eq.clone(),
        b_eq: b_eq.clone(),
    };
    let Some(s1) = solved(&p1)? else {
        return diagnose(hull, z_min, z_max);
    };
    let r = s1.x[R];
    if r <= 1e-9 {
        return diagnose(hull, z_min, z_max);
    }

    // Stage 2: with r fixed, maximize the common slack of the side rows
    // (the ones with an x/y gradient) — a Chebyshev-style tie-break.
    // Variables: [bbx, bby, bbz, btx, bty, btz, s].
    let mut a2: Vec<Vec<f64>> = Vec::new();
    let mut b2: Vec<f64> = Vec::new();
    for ((row, &rhs), &side) in rows.a_ub.iter().zip(&rows.b_ub).zip(&rows.side_rows) {
        if row[R] < 0.0 {
            continue; // the r ≥ 0 guard row has no center variables
        }
        let mut r2 = row[..R].to_vec();
        r2.push(if side { 1.0 } else { 0.0 });
        a2.push(r2);
        b2.push(rhs - row[R] * r);
    }
    let mut snn = vec![0.0; NV];
    snn[R] = -1.0;
    a2.push(snn);
    b2.push(0.0);
    let eq2: Vec<Vec<f64>> = a_eq.iter().map(|row| row[..R].iter().chain([&0.0]).copied().collect()).collect();
    let mut obj2 = vec![0.0; NV];
    obj2[R] = -1.0;
    let p2 = LpProblem {
        objective: obj2,
        a_ub: a2.clone(),
        b_ub: b2.clone(),
        a_eq: eq2.clone(),
        b_eq: b_eq.clone(),
    };
    let s2 = solved(&p2)?
        .ok_or_else(|| Error::invariant("tie-break stage lost feasibility"))?;
    let slack = s2.x[R];

    // Stage 3: pin remaining degeneracy lexicographically, smallest
    // bbx, then bby, btx, bty, with the achieved slack now an equality.
    let mut a3 = a2;
    let mut b3 = b2;
    let mut eq3 = eq2;
    let mut beq3 = b_eq.clone();
    let mut srow = vec![0.0; NV];
    srow[R] = 1.0;
    eq3.push(srow);
    beq3.push(slack);
    let mut x = s2.x.clone();
    for coord in [0usize, 1, 3, 4] {
        let mut obj = vec![0.0; NV];
        obj[coord] = 1.0;
        let p = LpProblem {
            objective: obj,
            a_ub: a3.clone(),
            b_ub: b3.clone(),
            a_eq: eq3.clone(),
            b_eq: beq3.clone(),
        };
        let s = solved(&p)?
            .ok_or_else(|| Error::invariant("lexicographic stage lost feasibility"))?;
        x = s.x.clone();
        let mut pin = vec![0.0; NV];
        pin[coord] = 1.0;
        eq3.push(pin);
        beq3.push(x[coord]);
        let _ = &mut a3;
        let _ = &mut b3;
    }

    let segment = BallSegment {
        b_bottom: Vec3::new(x[0], x[1], z_min),
        b_top: Vec3::new(x[3], x[4], z_max),
        d: 2.0 * r,
    };
    let violation = segment.max_violation(hull);
    if violation > 1e-8 {
        return Err(Error::invariant(format!(
            "fitted segment violates the hull by {violation:.3e}"
        )));
    }
    Ok(segment)
}
