//! Maximal digitally convex subset extraction (3D digital potato peeling).
//!
//! The reachability voxel set is generally nonconvex, but the downstream
//! ball-segment fit needs a convex region described by half-spaces. This
//! module reduces the voxel set until it is *digitally convex* — it
//! contains every lattice point of its own convex hull. Small sets are
//! solved exhaustively; larger ones are peeled with greedy half-space cuts
//! followed by a restore pass. The result's hull facets are converted to
//! metric unit-normal half-spaces.

use crate::error::{Error, Result};
use crate::fkr::VoxelGrid;
use crate::geometry::{UnitVec3, Vec3};
use crate::hull::{column_extremes, convex_hull, Facet, IVec, LatticeHull};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet};

/// A finite set of voxel indices plus the metric interpretation of the
/// owning grid (voxel center = origin + resolution · (index + ½)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DigitalSetRepr", into = "DigitalSetRepr")]
pub struct DigitalSet {
    voxels: BTreeSet<IVec>,
    origin: Vec3,
    resolution: f64,
}

#[derive(Serialize, Deserialize)]
struct DigitalSetRepr {
    origin: [f64; 3],
    resolution: f64,
    voxels: Vec<IVec>,
}

impl TryFrom<DigitalSetRepr> for DigitalSet {
    type Error = Error;
    fn try_from(r: DigitalSetRepr) -> Result<Self> {
        DigitalSet::new(r.voxels.into_iter().collect(), Vec3::from(r.origin), r.resolution)
    }
}

impl From<DigitalSet> for DigitalSetRepr {
    fn from(s: DigitalSet) -> Self {
        DigitalSetRepr {
            origin: s.origin.into(),
            resolution: s.resolution,
            voxels: s.voxels.into_iter().collect(),
        }
    }
}

impl DigitalSet {
    pub fn new(voxels: BTreeSet<IVec>, origin: Vec3, resolution: f64) -> Result<Self> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::invalid("resolution must be positive"));
        }
        Ok(DigitalSet {
            voxels,
            origin,
            resolution,
        })
    }

    /// The marked voxels of a reachability grid as a digital set.
    pub fn from_grid(grid: &VoxelGrid) -> Self {
        let voxels = grid
            .marked_voxels()
            .into_iter()
            .map(|v| [v[0] as i64, v[1] as i64, v[2] as i64])
            .collect();
        DigitalSet {
            voxels,
            origin: grid.origin(),
            resolution: grid.resolution(),
        }
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn contains(&self, v: IVec) -> bool {
        self.voxels.contains(&v)
    }

    pub fn voxels(&self) -> impl Iterator<Item = IVec> + '_ {
        self.voxels.iter().copied()
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Metric center of a voxel index.
    pub fn center(&self, v: IVec) -> Vec3 {
        Vec3::new(
            self.origin.x + self.resolution * (v[0] as f64 + 0.5),
            self.origin.y + self.resolution * (v[1] as f64 + 0.5),
            self.origin.z + self.resolution * (v[2] as f64 + 0.5),
        )
    }
}

/// Half-space `normal · x ≤ offset` in meters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: UnitVec3,
    pub offset: f64,
}

impl Halfspace {
    /// Signed distance of `p` beyond the boundary (≤ 0 means inside).
    pub fn violation(&self, p: Vec3) -> f64 {
        self.normal.as_vec3().dot(p) - self.offset
    }
}

/// Bounded convex region as an intersection of unit-normal half-spaces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexPolytope {
    pub halfspaces: Vec<Halfspace>,
}

impl ConvexPolytope {
    pub fn contains(&self, p: Vec3, tol: f64) -> bool {
        self.halfspaces.iter().all(|h| h.violation(p) <= tol)
    }
}

fn hull_of(set: &BTreeSet<IVec>) -> Result<LatticeHull> {
    let pts: Vec<IVec> = set.iter().copied().collect();
    convex_hull(&column_extremes(&pts))
}

/// Lattice points of the hull of `set` that are missing from `set`.
fn violators_of(set: &BTreeSet<IVec>) -> Result<Vec<IVec>> {
    let hull = hull_of(set)?;
    Ok(hull
        .lattice_points()
        .into_iter()
        .filter(|p| !set.contains(p))
        .collect())
}

/// True iff the set contains every lattice point of its own convex hull.
pub fn is_digitally_convex(s: &DigitalSet) -> Result<bool> {
    if s.is_empty() {
        return Err(Error::invalid("digital convexity of an empty set"));
    }
    Ok(violators_of(&s.voxels)?.is_empty())
}

/// The 26 axis/diagonal digital directions, fixed candidate cuts alongside
/// the hull facet normals.
fn digital_directions() -> Vec<IVec> {
    let mut out = Vec::with_capacity(26);
    for x in -1..=1i64 {
        for y in -1..=1i64 {
            for z in -1..=1i64 {
                if (x, y, z) != (0, 0, 0) {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out
}

fn idot(n: IVec, p: IVec) -> i128 {
    n[0] as i128 * p[0] as i128 + n[1] as i128 * p[1] as i128 + n[2] as i128 * p[2] as i128
}

/// One greedy peeling cut: among all candidate directions, remove the
/// cheapest member layer that strictly separates at least one violator.
/// Returns the removed voxels (never empty while violators exist).
fn best_cut(set: &BTreeSet<IVec>, violators: &[IVec], facets: &[Facet]) -> Vec<IVec> {
    let mut directions: Vec<IVec> = facets.iter().map(|f| f.normal).collect();
    directions.extend(digital_directions());
    directions.sort_unstable();
    directions.dedup();

    let mut best: Option<Vec<IVec>> = None;
    for n in directions {
        // The cheapest effective threshold along n is the most extreme
        // violator level: removal cost only shrinks as t grows, and any
        // effective cut must sit at or below that level.
        let Some(t) = violators.iter().map(|&v| idot(n, v)).max() else {
            continue;
        };
        let removed: Vec<IVec> = set.iter().copied().filter(|&p| idot(n, p) >= t).collect();
        if removed.is_empty() {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => removed.len() < b.len() || (removed.len() == b.len() && removed < *b),
        };
        if better {
            best = Some(removed);
        }
    }
    best.expect("a violator inside the hull always admits a separating cut")
}

/// Largest input size still solved by exhaustive branch-and-bound; the
/// search state is a u64 membership mask, so 64 is also a hard cap.
const EXACT_LIMIT: usize = 64;

/// Whether the exhaustive search applies: at most [`EXACT_LIMIT`] voxels
/// spanning at most [`EXACT_LIMIT`] bounding-box cells (the certificate
/// tables index cells with u64 masks too).
fn small_enough_for_exact(voxels: &BTreeSet<IVec>) -> bool {
    if voxels.is_empty() || voxels.len() > EXACT_LIMIT {
        return false;
    }
    let mut lo = [i64::MAX; 3];
    let mut hi = [i64::MIN; 3];
    for v in voxels {
        for a in 0..3 {
            lo[a] = lo[a].min(v[a]);
            hi[a] = hi[a].max(v[a]);
        }
    }
    (0..3)
        .map(|a| hi[a] - lo[a] + 1)
        .try_fold(1i64, |acc, d| acc.checked_mul(d))
        .is_some_and(|cells| cells <= EXACT_LIMIT as i64)
}

/// Reduce `s` to a digitally convex subset and return it with the metric
/// half-space description of its hull. Small inputs (at most
/// [`EXACT_LIMIT`] voxels in as many bounding-box cells) are solved
/// exactly (maximum cardinality); larger inputs use greedy minimum-removal
/// cuts until no hull lattice point is missing, then restore every peeled
/// voxel that can rejoin without breaking convexity (lexicographic passes
/// to a fixed point).
pub fn find_macs(s: &DigitalSet) -> Result<(DigitalSet, ConvexPolytope)> {
    if s.is_empty() {
        return Err(Error::invalid("cannot peel an empty set"));
    }
    let current = if small_enough_for_exact(&s.voxels) {
        exact_macs(&s.voxels)?
    } else {
        greedy_macs(&s.voxels)?
    };
    let hull = hull_of(&current)?;
    let polytope = metric_polytope(&hull, s.origin, s.resolution)?;
    let m = DigitalSet {
        voxels: current,
        origin: s.origin,
        resolution: s.resolution,
    };
    Ok((m, polytope))
}

/// Greedy peel for large sets: minimum-removal half-space cuts, then a
/// restore pass (a cut can overshoot, so peeled voxels get a second look).
fn greedy_macs(voxels: &BTreeSet<IVec>) -> Result<BTreeSet<IVec>> {
    let mut current = voxels.clone();
    let mut removed: BTreeSet<IVec> = BTreeSet::new();
    loop {
        let violators = violators_of(&current)?;
        if violators.is_empty() {
            break;
        }
        let hull = hull_of(&current)?;
        let cut = best_cut(&current, &violators, &hull.halfspaces());
        for v in cut {
            current.remove(&v);
            removed.insert(v);
        }
        if current.is_empty() {
            return Err(Error::invariant("peeling removed every voxel"));
        }
    }
    loop {
        let mut changed = false;
        for &v in removed.clone().iter() {
            current.insert(v);
            if violators_of(&current)?.is_empty() {
                removed.remove(&v);
                changed = true;
            } else {
                current.remove(&v);
            }
        }
        if !changed {
            break;
        }
    }
    Ok(current)
}

/// Precomputed violation certificates for the exhaustive search. One
/// entry per bounding-box cell: point-index masks of member pairs whose
/// segment passes through the cell and of member triples holding the cell
/// strictly inside their triangle. A state violates digital convexity at a
/// cell when the cell is absent but one of its certificates is fully
/// present. Tetrahedron-only violations are not tabulated; the search
/// falls back to the authoritative hull check for those.
struct CertTables {
    /// Point index occupying each cell, if any.
    member_at_cell: Vec<Option<usize>>,
    /// Certificate masks per cell, segment certificates first.
    certs: Vec<Vec<u64>>,
}

fn gcd3(d: IVec) -> i64 {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    gcd(gcd(d[0].abs(), d[1].abs()), d[2].abs())
}

impl CertTables {
    fn build(points: &[IVec]) -> CertTables {
        let n = points.len();
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let dims = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
        let cell = |p: IVec| -> usize {
            (((p[0] - lo[0]) * dims[1] + (p[1] - lo[1])) * dims[2] + (p[2] - lo[2])) as usize
        };
        let n_cells = (dims[0] * dims[1] * dims[2]) as usize;
        let mut member_at_cell = vec![None; n_cells];
        for (i, &p) in points.iter().enumerate() {
            member_at_cell[cell(p)] = Some(i);
        }
        let mut certs: Vec<Vec<u64>> = vec![Vec::new(); n_cells];
        // Segment certificates: lattice points strictly between a pair.
        for i in 0..n {
            for j in i + 1..n {
                let d = [
                    points[j][0] - points[i][0],
                    points[j][1] - points[i][1],
                    points[j][2] - points[i][2],
                ];
                let g = gcd3(d);
                if g < 2 {
                    continue;
                }
                let step = [d[0] / g, d[1] / g, d[2] / g];
                for k in 1..g {
                    let x = [
                        points[i][0] + k * step[0],
                        points[i][1] + k * step[1],
                        points[i][2] + k * step[2],
                    ];
                    certs[cell(x)].push(1u64 << i | 1u64 << j);
                }
            }
        }
        // Triangle certificates: lattice points strictly inside a triple.
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let (a, b, c) = (points[i], points[j], points[k]);
                    let nrm = wcross(wsub(wide(b), wide(a)), wsub(wide(c), wide(a)));
                    if nrm == [0, 0, 0] {
                        continue;
                    }
                    let blo =
                        [0, 1, 2].map(|t| a[t].min(b[t]).min(c[t]));
                    let bhi =
                        [0, 1, 2].map(|t| a[t].max(b[t]).max(c[t]));
                    for x0 in blo[0]..=bhi[0] {
                        for x1 in blo[1]..=bhi[1] {
                            for x2 in blo[2]..=bhi[2] {
                                let x = [x0, x1, x2];
                                if wdot(nrm, wsub(wide(x), wide(a))) != 0 {
                                    continue;
                                }
                                let inside = [(a, b), (b, c), (c, a)].iter().all(|&(u, v)| {
                                    wdot(nrm, wcross(wsub(wide(v), wide(u)), wsub(wide(x), wide(u))))
                                        > 0
                                });
                                if inside {
                                    certs[cell(x)].push(1u64 << i | 1u64 << j | 1u64 << k);
                                }
                            }
                        }
                    }
                }
            }
        }
        CertTables {
            member_at_cell,
            certs,
        }
    }

    /// All tabulated violations of `mask`: certificates fully present
    /// whose cell is absent. Cells scan in index order, certificates in
    /// insertion order (segments before triangles), so the result is
    /// deterministic.
    fn violated_certs(&self, mask: u64) -> Vec<u64> {
        let mut out = Vec::new();
        for (cell, certs) in self.certs.iter().enumerate() {
            if certs.is_empty() {
                continue;
            }
            if let Some(p) = self.member_at_cell[cell] {
                if mask >> p & 1 == 1 {
                    continue;
                }
            }
            for &cert in certs {
                if cert & mask == cert {
                    out.push(cert);
                }
            }
        }
        out
    }
}

/// Greedy pairwise-disjoint packing size: each packed certificate forces
/// at least one removal, so the packing bounds the removals still needed.
fn disjoint_packing(violated: &[u64]) -> usize {
    let mut used = 0u64;
    let mut count = 0;
    for &cert in violated {
        if cert & used == 0 {
            used |= cert;
            count += 1;
        }
    }
    count
}

/// Branching certificate: smallest first (fewest children), then the one
/// whose points overlap the most other violations (most constrained),
/// then first listed. `violated` must be nonempty.
fn branch_cert(violated: &[u64]) -> u64 {
    let mut freq = [0u32; 64];
    for &cert in violated {
        let mut m = cert;
        while m != 0 {
            freq[m.trailing_zeros() as usize] += 1;
            m &= m - 1;
        }
    }
    let overlap = |cert: u64| -> u32 {
        let mut m = cert;
        let mut sum = 0;
        while m != 0 {
            sum += freq[m.trailing_zeros() as usize];
            m &= m - 1;
        }
        sum
    };
    let mut best = violated[0];
    let mut best_key = (best.count_ones(), u32::MAX - overlap(best));
    for &cert in &violated[1..] {
        let key = (cert.count_ones(), u32::MAX - overlap(cert));
        if key < best_key {
            best = cert;
            best_key = key;
        }
    }
    best
}

/// Exhaustive maximum digitally convex subset for small inputs:
/// branch-and-bound over u64 membership masks, seeded with the greedy
/// solution as the incumbent. A branch removes one point of a certificate
/// whose cell is missing; every convex subset of the input survives along
/// at least one branch, so only subsets strictly larger than the incumbent
/// need visiting and the largest convex subset found is a true maximum.
/// Memoization collapses subsets reached along different removal orders.
fn exact_macs(voxels: &BTreeSet<IVec>) -> Result<BTreeSet<IVec>> {
    let points: Vec<IVec> = voxels.iter().copied().collect();
    let n = points.len();
    let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let tables = CertTables::build(&points);
    let greedy = greedy_macs(voxels)?;
    let mut best_mask = 0u64;
    for (i, p) in points.iter().enumerate() {
        if greedy.contains(p) {
            best_mask |= 1u64 << i;
        }
    }
    let mut best_size = greedy.len();
    let mut seen: HashSet<u64> = HashSet::new();
    let mut stack = vec![full];
    while let Some(mask) = stack.pop() {
        let size = mask.count_ones() as usize;
        if size <= best_size || mask == 0 || !seen.insert(mask) {
            continue;
        }
        let violated = tables.violated_certs(mask);
        let cert = if violated.is_empty() {
            // Tables cover segments and triangles; confirm with the hull
            // check to catch tetrahedron-interior violations.
            let idx: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            let members: BTreeSet<IVec> = idx.iter().map(|&i| points[i]).collect();
            match violators_of(&members)?.first() {
                None => None,
                Some(&v) => {
                    let list: Vec<IVec> = idx.iter().map(|&i| points[i]).collect();
                    let local = caratheodory_certificate(&list, v)?;
                    Some(local.into_iter().fold(0u64, |m, c| m | 1u64 << idx[c]))
                }
            }
        } else {
            if size - disjoint_packing(&violated) <= best_size {
                continue;
            }
            Some(branch_cert(&violated))
        };
        match cert {
            None => {
                best_size = size;
                best_mask = mask;
            }
            Some(cert) => {
                for i in (0..n).filter(|&i| cert >> i & 1 == 1) {
                    stack.push(mask & !(1u64 << i));
                }
            }
        }
    }
    Ok((0..n)
        .filter(|&i| best_mask >> i & 1 == 1)
        .map(|i| points[i])
        .collect())
}

fn wide(p: IVec) -> [i128; 3] {
    [p[0] as i128, p[1] as i128, p[2] as i128]
}

fn wsub(a: [i128; 3], b: [i128; 3]) -> [i128; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn wcross(a: [i128; 3], b: [i128; 3]) -> [i128; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn wdot(a: [i128; 3], b: [i128; 3]) -> i128 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Signed volume sign of tetrahedron (a, b, c, d), exact.
fn worient(a: IVec, b: IVec, c: IVec, d: IVec) -> i128 {
    let (a, b, c, d) = (wide(a), wide(b), wide(c), wide(d));
    wdot(wcross(wsub(b, a), wsub(c, a)), wsub(d, a))
}

/// Whether `p` lies on the closed segment from `a` to `b` (a ≠ b).
fn seg_contains(p: IVec, a: IVec, b: IVec) -> bool {
    let d = wsub(wide(b), wide(a));
    if d == [0, 0, 0] {
        return false;
    }
    let w = wsub(wide(p), wide(a));
    wcross(w, d) == [0, 0, 0] && wdot(w, d) >= 0 && wdot(w, d) <= wdot(d, d)
}

/// Whether `p` lies in the closed non-degenerate triangle (a, b, c).
fn tri_contains(p: IVec, a: IVec, b: IVec, c: IVec) -> bool {
    let n = wcross(wsub(wide(b), wide(a)), wsub(wide(c), wide(a)));
    if n == [0, 0, 0] || wdot(n, wsub(wide(p), wide(a))) != 0 {
        return false;
    }
    wdot(n, wcross(wsub(wide(b), wide(a)), wsub(wide(p), wide(a)))) >= 0
        && wdot(n, wcross(wsub(wide(c), wide(b)), wsub(wide(p), wide(b)))) >= 0
        && wdot(n, wcross(wsub(wide(a), wide(c)), wsub(wide(p), wide(c)))) >= 0
}

/// Whether `p` lies in the closed non-degenerate tetrahedron (a, b, c, d).
fn tet_contains(p: IVec, a: IVec, b: IVec, c: IVec, d: IVec) -> bool {
    let o = worient(a, b, c, d);
    if o == 0 {
        return false;
    }
    let s = o.signum();
    s * worient(p, b, c, d).signum() >= 0
        && s * worient(a, p, c, d).signum() >= 0
        && s * worient(a, b, p, d).signum() >= 0
        && s * worient(a, b, c, p).signum() >= 0
}

/// Indices of at most four members whose convex hull contains `v`. Exists
/// for every point of the members' hull (Carathéodory in 3D); degenerate
/// simplices are skipped because the minimal containing simplex is found
/// by the loop of its own dimension.
fn caratheodory_certificate(members: &[IVec], v: IVec) -> Result<Vec<usize>> {
    let n = members.len();
    for i in 0..n {
        for j in i + 1..n {
            if seg_contains(v, members[i], members[j]) {
                return Ok(vec![i, j]);
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if tri_contains(v, members[i], members[j], members[k]) {
                    return Ok(vec![i, j, k]);
                }
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                for l in k + 1..n {
                    if tet_contains(v, members[i], members[j], members[k], members[l]) {
                        return Ok(vec![i, j, k, l]);
                    }
                }
            }
        }
    }
    Err(Error::invariant(
        "hull lattice point admits no Carathéodory certificate",
    ))
}

/// Converts integer index-space half-spaces `n·i ≤ b` into metric unit
/// half-spaces over voxel centers `x = origin + res·(i + ½)`.
fn metric_polytope(hull: &LatticeHull, origin: Vec3, resolution: f64) -> Result<ConvexPolytope> {
    let mut halfspaces = Vec::new();
    for f in hull.halfspaces() {
        let n = Vec3::new(f.normal[0] as f64, f.normal[1] as f64, f.normal[2] as f64);
        let len = n.norm();
        let normal = UnitVec3::normalize(n)?;
        let sum: i64 = f.normal.iter().sum();
        let offset =
            (n.dot(origin) + resolution * (f.offset as f64 + 0.5 * sum as f64)) / len;
        halfspaces.push(Halfspace { normal, offset });
    }
    Ok(ConvexPolytope { halfspaces })
}
