//! Focused kinematic reachability database: a voxelized map of the positions
//! the manipulator can reach from *every* bounding approach direction.
//!
//! Task directions are assumed to stay within a cone of half-angle θ around
//! the base-frame +x axis. Four extreme directions spanning that cone (a
//! pyramid) bound it; a voxel is marked reachable only if IK succeeds for
//! all of them. The marked set is persisted in a small binary format so the
//! expensive sampling runs once, offline.

use crate::error::{Error, Result};
use crate::geometry::{UnitVec3, Vec3};
use crate::kinematics::{IkBackend, IkParams, TaskPoint};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const MAGIC: &[u8; 6] = b"FKRDB\0";
pub const FKR_FORMAT_VERSION: u32 = 1;
/// Refuse to allocate grids beyond this many voxels.
const MAX_VOXELS: u64 = 1 << 30;

/// Axis-aligned box in the chain base frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        let finite = [min.x, min.y, min.z, max.x, max.y, max.z].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("region bounds must be finite"));
        }
        if min.x >= max.x || min.y >= max.y || min.z >= max.z {
            return Err(Error::invalid(
                "region must have positive extent on every axis",
            ));
        }
        Ok(Aabb { min, max })
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }
}

/// Dense boolean occupancy over a regular voxel grid. Voxel (ix,iy,iz) has
/// its center at origin + resolution·(i + 1/2) on each axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    origin: Vec3,
    resolution: f64,
    dims: [usize; 3],
    words: Vec<u64>,
}

impl VoxelGrid {
    pub fn new(origin: Vec3, resolution: f64, dims: [usize; 3]) -> Result<Self> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::invalid("resolution must be positive"));
        }
        if dims.contains(&0) {
            return Err(Error::invalid("grid dims must be positive"));
        }
        let total = dims.iter().map(|&d| d as u64).product::<u64>();
        if total > MAX_VOXELS {
            return Err(Error::invalid(format!("grid too large: {total} voxels")));
        }
        let words = vec![0u64; (total as usize).div_ceil(64)];
        Ok(VoxelGrid {
            origin,
            resolution,
            dims,
            words,
        })
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.marked_count() == 0
    }

    fn linear(&self, v: [usize; 3]) -> usize {
        (v[0] * self.dims[1] + v[1]) * self.dims[2] + v[2]
    }

    fn unlinear(&self, i: usize) -> [usize; 3] {
        let z = i % self.dims[2];
        let rest = i / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], z]
    }

    pub fn is_marked(&self, v: [usize; 3]) -> bool {
        let i = self.linear(v);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set_marked(&mut self, v: [usize; 3], marked: bool) {
        let i = self.linear(v);
        if marked {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    /// Metric center of a voxel.
    pub fn center(&self, v: [usize; 3]) -> Vec3 {
        Vec3::new(
            self.origin.x + self.resolution * (v[0] as f64 + 0.5),
            self.origin.y + self.resolution * (v[1] as f64 + 0.5),
            self.origin.z + self.resolution * (v[2] as f64 + 0.5),
        )
    }

    /// The voxel containing a metric point, if inside the grid.
    pub fn voxel_of(&self, p: Vec3) -> Option<[usize; 3]> {
        let mut v = [0usize; 3];
        for (axis, (lo, coord)) in [
            (self.origin.x, p.x),
            (self.origin.y, p.y),
            (self.origin.z, p.z),
        ]
        .into_iter()
        .enumerate()
        {
            let f = ((coord - lo) / self.resolution).floor();
            if f < 0.0 || f >= self.dims[axis] as f64 {
                return None;
            }
            v[axis] = f as usize;
        }
        Some(v)
    }

    pub fn marked_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn marked_voxels(&self) -> Vec<[usize; 3]> {
        (0..self.len())
            .filter(|&i| self.words[i / 64] >> (i % 64) & 1 == 1)
            .map(|i| self.unlinear(i))
            .collect()
    }
}

/// The persisted reachability database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkrDatabase {
    pub grid: VoxelGrid,
    pub r_ext: Vec<UnitVec3>,
    pub theta: f64,
    pub chain_id: String,
    pub version: u32,
}

/// The four extreme directions of the approach cone: a pyramid of half-angle
/// `theta` around +x. θ = 0 degenerates to the single axis direction.
pub fn bounding_directions(theta: f64) -> Result<Vec<UnitVec3>> {
    if !(theta.is_finite() && (0.0..std::f64::consts::FRAC_PI_2).contains(&theta)) {
        return Err(Error::invalid(format!(
            "theta must lie in [0, pi/2), got {theta}"
        )));
    }
    let (s, c) = theta.sin_cos();
    let raw = [
        Vec3::new(c, 0.0, s),
        Vec3::new(c, 0.0, -s),
        Vec3::new(c, s, 0.0),
        Vec3::new(c, -s, 0.0),
    ];
    let mut out: Vec<UnitVec3> = Vec::new();
    for v in raw {
        let u = UnitVec3::normalize(v)?;
        if !out.iter().any(|w| w.as_vec3() == u.as_vec3()) {
            out.push(u);
        }
    }
    Ok(out)
}

/// Per-voxel IK seed: SplitMix64 over the global seed and voxel index, so
/// evaluation order and thread scheduling cannot change any outcome.
fn voxel_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sample the region and mark every voxel whose center has IK solutions for
/// all directions in `r_ext`. Voxels are tested at their centers only.
pub fn build_fkr(
    backend: &dyn IkBackend,
    region: Aabb,
    resolution: f64,
    r_ext: &[UnitVec3],
    params: &IkParams,
) -> Result<FkrDatabase> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::invalid("resolution must be positive"));
    }
    if r_ext.is_empty() {
        return Err(Error::invalid("r_ext must contain at least one direction"));
    }
    let mut dims = [0usize; 3];
    for (axis, extent) in [
        region.max.x - region.min.x,
        region.max.y - region.min.y,
        region.max.z - region.min.z,
    ]
    .into_iter()
    .enumerate()
    {
        // Shave float dust so exact multiples of the resolution don't gain
        // a spurious extra layer.
        dims[axis] = ((extent / resolution - 1e-9).ceil().max(1.0)) as usize;
    }
    let mut grid = VoxelGrid::new(region.min, resolution, dims)?;
    let n = grid.len();
    let marks: Vec<bool> = (0..n)
        .into_par_iter()
        .map(|i| {
            let v = grid.unlinear(i);
            let center = grid.center(v);
            let vparams = IkParams {
                seed: voxel_seed(params.seed, i as u64),
                ..*params
            };
            r_ext.iter().all(|&dir| {
                let target = TaskPoint {
                    position: center,
                    direction: dir,
                };
                backend.reachable(&target, &vparams)
            })
        })
        .collect();
    for (i, &m) in marks.iter().enumerate() {
        if m {
            grid.set_marked(grid.unlinear(i), true);
        }
    }
    Ok(FkrDatabase {
        grid,
        r_ext: r_ext.to_vec(),
        theta: cone_half_angle(r_ext),
        chain_id: backend.id(),
        version: FKR_FORMAT_VERSION,
    })
}

/// Largest angle any direction makes with +x (the recorded cone half-angle).
fn cone_half_angle(r_ext: &[UnitVec3]) -> f64 {
    r_ext
        .iter()
        .map(|d| d.x.clamp(-1.0, 1.0).acos())
        .fold(0.0, f64::max)
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format("reachability database truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Serialize a database to the stable binary format.
pub fn save_fkr(db: &FkrDatabase) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(db.version);
    w.u32(db.chain_id.len() as u32);
    w.0.extend_from_slice(db.chain_id.as_bytes());
    w.f64(db.theta);
    w.u32(db.r_ext.len() as u32);
    for d in &db.r_ext {
        w.f64(d.x);
        w.f64(d.y);
        w.f64(d.z);
    }
    let g = &db.grid;
    w.f64(g.origin.x);
    w.f64(g.origin.y);
    w.f64(g.origin.z);
    w.f64(g.resolution);
    for &d in &g.dims {
        w.u64(d as u64);
    }
    let nbits = g.len();
    let mut byte = 0u8;
    for i in 0..nbits {
        if g.words[i / 64] >> (i % 64) & 1 == 1 {
            byte |= 1 << (i % 8);
        }
        if i % 8 == 7 {
            w.0.push(byte);
            byte = 0;
        }
    }
    if !nbits.is_multiple_of(8) {
        w.0.push(byte);
    }
    w.0
}

/// Parse the binary format back; rejects bad magic, unknown versions,
/// truncation, and trailing bytes.
pub fn load_fkr(bytes: &[u8]) -> Result<FkrDatabase> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Format("bad reachability database magic".into()));
    }
    let version = r.u32()?;
    if version != FKR_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported reachability database version {version}"
        )));
    }
    let id_len = r.u32()? as usize;
    let chain_id = std::str::from_utf8(r.take(id_len)?)
        .map_err(|_| Error::Format("chain identifier is not UTF-8".into()))?
        .to_string();
    let theta = r.f64()?;
    let ndirs = r.u32()? as usize;
    if ndirs == 0 {
        return Err(Error::Format("r_ext list is empty".into()));
    }
    let mut r_ext = Vec::with_capacity(ndirs);
    for _ in 0..ndirs {
        let v = Vec3::new(r.f64()?, r.f64()?, r.f64()?);
        r_ext.push(
            UnitVec3::renormalize(v, 1e-6)
                .map_err(|_| Error::Format("non-unit direction in r_ext".into()))?,
        );
    }
    let origin = Vec3::new(r.f64()?, r.f64()?, r.f64()?);
    let resolution = r.f64()?;
    let mut dims = [0usize; 3];
    for d in &mut dims {
        let v = r.u64()?;
        if v == 0 || v > MAX_VOXELS {
            return Err(Error::Format(format!("bad grid dimension {v}")));
        }
        *d = v as usize;
    }
    let mut grid = VoxelGrid::new(origin, resolution, dims)
        .map_err(|e| Error::Format(format!("bad grid header: {e}")))?;
    let nbits = grid.len();
    let payload = r.take(nbits.div_ceil(8))?;
    for (i, word) in grid.words.iter_mut().enumerate() {
        for b in 0..64 {
            let bit = i * 64 + b;
            if bit >= nbits {
                break;
            }
            if payload[bit / 8] >> (bit % 8) & 1 == 1 {
                *word |= 1 << b;
            }
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after occupancy payload".into()));
    }
    Ok(FkrDatabase {
        grid,
        r_ext,
        theta,
        chain_id,
        version,
    })
}
