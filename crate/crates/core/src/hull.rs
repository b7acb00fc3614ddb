//! Exact convex hulls of integer lattice points.
//!
//! Digital convexity ("does this voxel set contain every lattice point of its
//! own hull?") cannot tolerate floating-point fuzz on flat or collinear
//! inputs, so everything here runs on integer coordinates with i128
//! predicates. Degenerate inputs (points, segments, planar sets) get their
//! own exact representations instead of being perturbed.
//!
//! The full-dimensional case uses an incremental hull with strict visibility
//! tests; coplanar triangles are merged into polygonal facets afterwards by
//! grouping on their (gcd-reduced) supporting plane.

use crate::error::{Error, Result};
use std::collections::{BTreeMap, BTreeSet, HashSet};

/// An integer lattice point (voxel index).
pub type IVec = [i64; 3];

/// Outward half-space `normal · x ≤ offset` with gcd-reduced integer normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Facet {
    pub normal: IVec,
    pub offset: i64,
}

/// Coordinates are bounded so that every predicate and offset fits i64/i128
/// without overflow.
const COORD_BOUND: i64 = 1 << 17;

fn to128(v: IVec) -> [i128; 3] {
    [v[0] as i128, v[1] as i128, v[2] as i128]
}

fn sub(a: IVec, b: IVec) -> [i128; 3] {
    [
        a[0] as i128 - b[0] as i128,
        a[1] as i128 - b[1] as i128,
        a[2] as i128 - b[2] as i128,
    ]
}

fn cross(a: [i128; 3], b: [i128; 3]) -> [i128; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [i128; 3], b: [i128; 3]) -> i128 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Sign of the signed volume of tetrahedron (a, b, c, d):
/// `((b−a)×(c−a))·(d−a)`. Positive means d is on the normal side of (a,b,c).
fn orient(a: IVec, b: IVec, c: IVec, d: IVec) -> i128 {
    dot(cross(sub(b, a), sub(c, a)), sub(d, a))
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Divides out the gcd of the components; input must be nonzero.
fn reduce(n: [i128; 3]) -> IVec {
    let g = gcd(gcd(n[0], n[1]), n[2]);
    debug_assert!(g > 0, "cannot reduce the zero vector");
    let r = [n[0] / g, n[1] / g, n[2] / g];
    [r[0] as i64, r[1] as i64, r[2] as i64]
}

/// floor(a / b) for b ≠ 0.
fn floor_div(a: i128, b: i128) -> i128 {
    if b > 0 {
        a.div_euclid(b)
    } else {
        (-a).div_euclid(-b)
    }
}

/// ceil(a / b) for b ≠ 0.
fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}

#[derive(Debug, Clone)]
enum Shape {
    /// Single point.
    Point,
    /// All points on one line; `a`, `b` are the extreme endpoints.
    Segment { a: IVec, b: IVec },
    /// All points in one plane; `verts` is the boundary polygon, oriented
    /// counterclockwise as seen from the tip of `normal`.
    Polygon { normal: IVec, verts: Vec<IVec> },
    /// Full-dimensional polytope.
    Polytope { facets: Vec<Facet>, verts: Vec<IVec> },
}

/// Convex hull of a set of lattice points, with exact containment queries
/// and lattice-point enumeration.
#[derive(Debug, Clone)]
pub struct LatticeHull {
    bbox_min: IVec,
    bbox_max: IVec,
    shape: Shape,
}

/// Builds the hull. Errors on empty input or coordinates beyond ±2^17
/// (the bound that keeps all integer predicates overflow-free).
pub fn convex_hull(points: &[IVec]) -> Result<LatticeHull> {
    if points.is_empty() {
        return Err(Error::invalid("convex hull of an empty point set"));
    }
    for p in points {
        if p.iter().any(|&c| c.abs() > COORD_BOUND) {
            return Err(Error::invalid(format!(
                "lattice coordinate beyond ±{COORD_BOUND} (overflow guard)"
            )));
        }
    }
    let mut pts: Vec<IVec> = points.to_vec();
    pts.sort_unstable();
    pts.dedup();

    let mut bbox_min = pts[0];
    let mut bbox_max = pts[0];
    for p in &pts {
        for a in 0..3 {
            bbox_min[a] = bbox_min[a].min(p[a]);
            bbox_max[a] = bbox_max[a].max(p[a]);
        }
    }

    let shape = classify(&pts);
    Ok(LatticeHull {
        bbox_min,
        bbox_max,
        shape,
    })
}

/// Detects the affine dimension and dispatches to the right construction.
fn classify(pts: &[IVec]) -> Shape {
    let p0 = pts[0];
    let Some(&p1) = pts.iter().find(|&&p| p != p0) else {
        return Shape::Point;
    };
    let Some(&p2) = pts
        .iter()
        .find(|&&p| cross(sub(p1, p0), sub(p, p0)) != [0, 0, 0])
    else {
        // Collinear: endpoints are the extremes along the line direction.
        let d = sub(p1, p0);
        let (mut lo, mut hi) = (p0, p0);
        let (mut tlo, mut thi) = (0i128, 0i128);
        for &p in pts {
            let t = dot(sub(p, p0), d);
            if t < tlo {
                tlo = t;
                lo = p;
            }
            if t > thi {
                thi = t;
                hi = p;
            }
        }
        return Shape::Segment { a: lo, b: hi };
    };
    let normal = cross(sub(p1, p0), sub(p2, p0));
    let p3 = pts.iter().position(|&p| dot(normal, sub(p, p0)) != 0);
    match p3 {
        None => Shape::Polygon {
            normal: reduce(normal),
            verts: planar_hull(pts, normal),
        },
        Some(i3) => {
            let i0 = 0;
            let i1 = pts.iter().position(|&p| p == p1).expect("p1 present");
            let i2 = pts.iter().position(|&p| p == p2).expect("p2 present");
            hull_3d(pts, [i0, i1, i2, i3])
        }
    }
}

/// Monotone chain on coplanar points. `pts` must be sorted lexicographically;
/// the result is the boundary polygon, counterclockwise w.r.t. `normal`.
fn planar_hull(pts: &[IVec], normal: [i128; 3]) -> Vec<IVec> {
    // Turn sign of (o→a, o→b) as seen from the tip of `normal`.
    let side = |o: IVec, a: IVec, b: IVec| dot(normal, cross(sub(a, o), sub(b, o)));
    let mut lower: Vec<IVec> = Vec::new();
    for &p in pts {
        while lower.len() >= 2 && side(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<IVec> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && side(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

#[derive(Debug, Clone, Copy)]
struct Tri {
    v: [usize; 3],
    alive: bool,
}

/// Incremental hull over full-dimensional input. `init` indexes four
/// affinely independent points.
fn hull_3d(pts: &[IVec], init: [usize; 4]) -> Shape {
    let [i0, mut i1, mut i2, i3] = init;
    if orient(pts[i0], pts[i1], pts[i2], pts[i3]) < 0 {
        std::mem::swap(&mut i1, &mut i2);
    }
    let mut tris: Vec<Tri> = Vec::new();
    // Orient each starting face so the remaining vertex is on its inside.
    for (f, d) in [
        ([i0, i1, i2], i3),
        ([i0, i1, i3], i2),
        ([i0, i2, i3], i1),
        ([i1, i2, i3], i0),
    ] {
        let t = if orient(pts[f[0]], pts[f[1]], pts[f[2]], pts[d]) > 0 {
            [f[0], f[2], f[1]]
        } else {
            f
        };
        tris.push(Tri { v: t, alive: true });
    }

    let initial: HashSet<usize> = init.into_iter().collect();
    for (pi, &p) in pts.iter().enumerate() {
        if initial.contains(&pi) {
            continue;
        }
        // Strictly visible faces. A point inside or on the current hull
        // boundary sees none and is skipped (it cannot be a hull vertex).
        let visible: Vec<usize> = tris
            .iter()
            .enumerate()
            .filter(|(_, t)| t.alive && orient(pts[t.v[0]], pts[t.v[1]], pts[t.v[2]], p) > 0)
            .map(|(i, _)| i)
            .collect();
        if visible.is_empty() {
            continue;
        }
        let mut vis_edges: Vec<(usize, usize)> = Vec::with_capacity(visible.len() * 3);
        for &ti in &visible {
            let [a, b, c] = tris[ti].v;
            vis_edges.extend([(a, b), (b, c), (c, a)]);
        }
        let edge_set: HashSet<(usize, usize)> = vis_edges.iter().copied().collect();
        for &ti in &visible {
            tris[ti].alive = false;
        }
        // Horizon edges are those whose mirror twin is not visible; coning
        // the new point onto them (keeping edge direction) stays outward.
        for &(u, v) in &vis_edges {
            if !edge_set.contains(&(v, u)) {
                tris.push(Tri {
                    v: [u, v, pi],
                    alive: true,
                });
            }
        }
    }

    // Merge coplanar triangles into facets: on a convex polytope each
    // supporting plane carries exactly one facet, so the reduced plane
    // equation is a complete facet key.
    let mut planes: BTreeMap<(IVec, i64), Vec<usize>> = BTreeMap::new();
    let mut on_hull: BTreeSet<usize> = BTreeSet::new();
    for t in tris.iter().filter(|t| t.alive) {
        let [a, b, c] = t.v;
        let n = reduce(cross(sub(pts[b], pts[a]), sub(pts[c], pts[a])));
        let off = dot(to128(n), to128(pts[a]));
        let off = i64::try_from(off).expect("offset fits i64 under the coordinate bound");
        planes.entry((n, off)).or_default();
        on_hull.extend(t.v);
    }
    let facets: Vec<Facet> = planes
        .keys()
        .map(|&(normal, offset)| Facet { normal, offset })
        .collect();

    // A boundary point is a vertex exactly when its tight facet normals span
    // all of R^3 (1 tight plane: facet interior; 2: edge; ≥3 spanning: corner).
    let verts: Vec<IVec> = on_hull
        .iter()
        .map(|&i| pts[i])
        .filter(|&p| {
            let tight: Vec<IVec> = facets
                .iter()
                .filter(|f| dot(to128(f.normal), to128(p)) == f.offset as i128)
                .map(|f| f.normal)
                .collect();
            normals_span_rank3(&tight)
        })
        .collect();

    Shape::Polytope { facets, verts }
}

/// True when the given integer vectors span rank 3.
fn normals_span_rank3(normals: &[IVec]) -> bool {
    let Some(&n1) = normals.iter().find(|&&n| n != [0, 0, 0]) else {
        return false;
    };
    let Some(w) = normals
        .iter()
        .map(|&n| cross(to128(n1), to128(n)))
        .find(|&c| c != [0, 0, 0])
    else {
        return false;
    };
    normals.iter().any(|&n| dot(w, to128(n)) != 0)
}

impl LatticeHull {
    /// Affine dimension of the hull: 0, 1, 2, or 3.
    pub fn dim(&self) -> usize {
        match &self.shape {
            Shape::Point => 0,
            Shape::Segment { .. } => 1,
            Shape::Polygon { .. } => 2,
            Shape::Polytope { .. } => 3,
        }
    }

    /// Extreme points of the hull.
    pub fn vertices(&self) -> Vec<IVec> {
        match &self.shape {
            Shape::Point => vec![self.bbox_min],
            Shape::Segment { a, b } => vec![*a, *b],
            Shape::Polygon { verts, .. } => verts.clone(),
            Shape::Polytope { verts, .. } => verts.clone(),
        }
    }

    /// Supporting facet planes. Empty for hulls of dimension < 3; use
    /// [`LatticeHull::halfspaces`] for a representation that is always
    /// bounded.
    pub fn facets(&self) -> &[Facet] {
        match &self.shape {
            Shape::Polytope { facets, .. } => facets,
            _ => &[],
        }
    }

    /// A finite half-space list whose intersection is exactly the hull,
    /// bounded in every dimension (degenerate hulls get sandwich planes).
    pub fn halfspaces(&self) -> Vec<Facet> {
        let facet = |normal: [i128; 3], through: IVec| {
            let n = reduce(normal);
            Facet {
                normal: n,
                offset: i64::try_from(dot(to128(n), to128(through)))
                    .expect("offset fits i64 under the coordinate bound"),
            }
        };
        match &self.shape {
            Shape::Point => {
                let p = self.bbox_min;
                let mut out = Vec::with_capacity(6);
                for a in 0..3 {
                    let mut n = [0i128; 3];
                    n[a] = 1;
                    out.push(facet(n, p));
                    n[a] = -1;
                    out.push(facet(n, p));
                }
                out
            }
            Shape::Segment { a, b } => {
                let d = sub(*b, *a);
                // Two caps along the line plus two sandwich pairs across it.
                let k = (0..3).min_by_key(|&i| d[i].abs()).expect("three axes");
                let mut e = [0i128; 3];
                e[k] = 1;
                let u = cross(d, e);
                let v = cross(d, u);
                let mut out = vec![
                    facet(d, *b),
                    facet([-d[0], -d[1], -d[2]], *a),
                    facet(u, *a),
                    facet([-u[0], -u[1], -u[2]], *a),
                ];
                if v != [0, 0, 0] {
                    out.push(facet(v, *a));
                    out.push(facet([-v[0], -v[1], -v[2]], *a));
                }
                out
            }
            Shape::Polygon { normal, verts } => {
                let n = to128(*normal);
                let mut out = vec![
                    facet(n, verts[0]),
                    facet([-n[0], -n[1], -n[2]], verts[0]),
                ];
                for i in 0..verts.len() {
                    let u = verts[i];
                    let v = verts[(i + 1) % verts.len()];
                    // Outward in-plane edge normal for a CCW polygon.
                    out.push(facet(cross(sub(v, u), n), u));
                }
                out
            }
            Shape::Polytope { facets, .. } => facets.clone(),
        }
    }

    /// Exact membership test for a lattice point.
    pub fn contains(&self, p: IVec) -> bool {
        match &self.shape {
            Shape::Point => p == self.bbox_min,
            Shape::Segment { a, b } => {
                let d = sub(*b, *a);
                let w = sub(p, *a);
                if cross(w, d) != [0, 0, 0] {
                    return false;
                }
                let t = dot(w, d);
                t >= 0 && t <= dot(d, d)
            }
            Shape::Polygon { normal, verts } => {
                let n = to128(*normal);
                if dot(n, sub(p, verts[0])) != 0 {
                    return false;
                }
                (0..verts.len()).all(|i| {
                    let u = verts[i];
                    let v = verts[(i + 1) % verts.len()];
                    dot(n, cross(sub(v, u), sub(p, u))) >= 0
                })
            }
            Shape::Polytope { facets, .. } => facets
                .iter()
                .all(|f| dot(to128(f.normal), to128(p)) <= f.offset as i128),
        }
    }

    /// Every lattice point inside the hull (boundary included).
    ///
    /// Full-dimensional hulls are scanned column-by-column with exact
    /// rational z-interval bounds; degenerate hulls scan their (thin)
    /// bounding box.
    pub fn lattice_points(&self) -> Vec<IVec> {
        match &self.shape {
            Shape::Point => vec![self.bbox_min],
            Shape::Segment { a, b } => {
                let d = sub(*b, *a);
                let g = gcd(gcd(d[0], d[1]), d[2]);
                if g == 0 {
                    return vec![*a];
                }
                let step = [d[0] / g, d[1] / g, d[2] / g];
                (0..=g)
                    .map(|t| {
                        [
                            (a[0] as i128 + step[0] * t) as i64,
                            (a[1] as i128 + step[1] * t) as i64,
                            (a[2] as i128 + step[2] * t) as i64,
                        ]
                    })
                    .collect()
            }
            Shape::Polygon { .. } => {
                let mut out = Vec::new();
                for x in self.bbox_min[0]..=self.bbox_max[0] {
                    for y in self.bbox_min[1]..=self.bbox_max[1] {
                        for z in self.bbox_min[2]..=self.bbox_max[2] {
                            if self.contains([x, y, z]) {
                                out.push([x, y, z]);
                            }
                        }
                    }
                }
                out
            }
            Shape::Polytope { facets, .. } => {
                let mut out = Vec::new();
                for x in self.bbox_min[0]..=self.bbox_max[0] {
                    for y in self.bbox_min[1]..=self.bbox_max[1] {
                        let mut zlo = self.bbox_min[2] as i128;
                        let mut zhi = self.bbox_max[2] as i128;
                        let mut feasible = true;
                        for f in facets {
                            let b = f.offset as i128
                                - f.normal[0] as i128 * x as i128
                                - f.normal[1] as i128 * y as i128;
                            let nz = f.normal[2] as i128;
                            if nz == 0 {
                                if b < 0 {
                                    feasible = false;
                                    break;
                                }
                            } else if nz > 0 {
                                zhi = zhi.min(floor_div(b, nz));
                            } else {
                                zlo = zlo.max(ceil_div(b, nz));
                            }
                        }
                        if feasible {
                            for z in zlo..=zhi {
                                out.push([x, y, z as i64]);
                            }
                        }
                    }
                }
                out
            }
        }
    }

    /// Number of lattice points inside the hull without materializing them.
    pub fn lattice_point_count(&self) -> u64 {
        match &self.shape {
            Shape::Polytope { facets, .. } => {
                let mut count = 0u64;
                for x in self.bbox_min[0]..=self.bbox_max[0] {
                    for y in self.bbox_min[1]..=self.bbox_max[1] {
                        let mut zlo = self.bbox_min[2] as i128;
                        let mut zhi = self.bbox_max[2] as i128;
                        let mut feasible = true;
                        for f in facets {
                            let b = f.offset as i128
                                - f.normal[0] as i128 * x as i128
                                - f.normal[1] as i128 * y as i128;
                            let nz = f.normal[2] as i128;
                            if nz == 0 {
                                if b < 0 {
                                    feasible = false;
                                    break;
                                }
                            } else if nz > 0 {
                                zhi = zhi.min(floor_div(b, nz));
                            } else {
                                zlo = zlo.max(ceil_div(b, nz));
                            }
                        }
                        if feasible && zhi >= zlo {
                            count += (zhi - zlo + 1) as u64;
                        }
                    }
                }
                count
            }
            _ => self.lattice_points().len() as u64,
        }
    }
}

/// Keeps, per (x, y) column, only the extreme-z members of the set. Every
/// hull vertex is a per-column extreme (otherwise it would be a convex
/// combination of two same-column points), so the hull is unchanged while
/// interior bulk drops out. Used to shrink hull inputs for big voxel sets.
pub fn column_extremes(points: &[IVec]) -> Vec<IVec> {
    let mut cols: BTreeMap<(i64, i64), (i64, i64)> = BTreeMap::new();
    for p in points {
        let e = cols.entry((p[0], p[1])).or_insert((p[2], p[2]));
        e.0 = e.0.min(p[2]);
        e.1 = e.1.max(p[2]);
    }
    let mut out = Vec::with_capacity(cols.len() * 2);
    for ((x, y), (zlo, zhi)) in cols {
        out.push([x, y, zlo]);
        if zhi != zlo {
            out.push([x, y, zhi]);
        }
    }
    out
}
