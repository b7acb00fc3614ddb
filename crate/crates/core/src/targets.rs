//! Target file I/O and synthetic target generation.
//!
//! A target is a task-space position plus a unit approach direction. Files
//! are JSON arrays of `{"position": [x,y,z], "direction": [dx,dy,dz]}` in
//! meters; directions are renormalized within a 1e-6 tolerance and rejected
//! beyond it. Three deterministic generators cover the layouts used in
//! tests and demos: a curved wall, a flat grid, and a random shell patch.

use crate::error::{Error, Result};
use crate::geometry::{UnitVec3, Vec3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One task target: where the tool tip goes and which way it points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub position: Vec3,
    pub direction: UnitVec3,
}

/// Parses a targets JSON file; an empty array is rejected.
pub fn load_targets(json: &str) -> Result<Vec<Target>> {
    let targets: Vec<Target> =
        serde_json::from_str(json).map_err(|e| Error::Parse(format!("targets file: {e}")))?;
    if targets.is_empty() {
        return Err(Error::Parse("targets file contains no targets".into()));
    }
    Ok(targets)
}

/// Serializes targets to the JSON file format.
pub fn save_targets(targets: &[Target]) -> String {
    serde_json::to_string_pretty(targets).expect("targets always serialize")
}

/// Synthetic layout families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    /// Points on a parabolic wall curving away from the work area.
    CurvedWall,
    /// Regular grid on a flat vertical wall.
    Grid,
    /// Random patch of an inward-facing spherical shell.
    RandomShell,
}

/// Generator parameters. `theta_spread` bounds how far any direction may
/// deviate from the layout's mean approach direction (+x); it must stay
/// within the pyramid half-angle `theta` the reachability database uses.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GenParams {
    pub kind: TargetKind,
    pub n: usize,
    pub seed: u64,
    /// Maximum direction deviation (radians).
    pub theta_spread: f64,
    /// Pyramid half-angle the directions must respect (radians).
    pub theta: f64,
    /// Lateral extent of the layout (meters).
    pub extent: f64,
    /// Height band [lo, hi] (meters).
    pub z_range: (f64, f64),
    /// Wall curvature for the curved layout (1/meters).
    pub curvature: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            kind: TargetKind::CurvedWall,
            n: 183,
            seed: 0,
            theta_spread: 5.0_f64.to_radians(),
            theta: 10.0_f64.to_radians(),
            extent: 2.0,
            z_range: (0.4, 1.2),
            curvature: 0.3,
        }
    }
}

/// Direction at angle `tilt` from `axis`, rotated by `azimuth` around it.
fn cone_direction(axis: Vec3, tilt: f64, azimuth: f64) -> Vec3 {
    let reference = if axis.z.abs() < 0.9 {
        Vec3::new(0.0, 0.0, 1.0)
    } else {
        Vec3::new(0.0, 1.0, 0.0)
    };
    let u = reference.cross(axis);
    let u = u.scale(1.0 / u.norm());
    let w = axis.cross(u);
    axis.scale(tilt.cos()) + (u.scale(azimuth.cos()) + w.scale(azimuth.sin())).scale(tilt.sin())
}

/// Generates a deterministic target set; see `GenParams` for the knobs.
pub fn gen_targets(params: &GenParams) -> Result<Vec<Target>> {
    if params.n == 0 {
        return Err(Error::invalid("need at least one target"));
    }
    if !(params.theta_spread.is_finite() && params.theta_spread >= 0.0) {
        return Err(Error::invalid("theta_spread must be ≥ 0"));
    }
    if params.theta_spread > params.theta {
        return Err(Error::invalid(format!(
            "theta_spread {:.4} exceeds the pyramid half-angle theta {:.4}; directions \
             would leave the reachable cone",
            params.theta_spread, params.theta
        )));
    }
    if !(params.extent.is_finite() && params.extent > 0.0) {
        return Err(Error::invalid("extent must be positive"));
    }
    let (z_lo, z_hi) = params.z_range;
    if !(z_lo.is_finite() && z_hi.is_finite() && z_lo <= z_hi) {
        return Err(Error::invalid("z_range must be an ordered finite interval"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mean = Vec3::new(1.0, 0.0, 0.0);
    let sample_direction = |rng: &mut ChaCha8Rng| -> UnitVec3 {
        let tilt = rng.random_range(0.0..=params.theta_spread.max(f64::MIN_POSITIVE));
        let tilt = tilt.min(params.theta_spread);
        let azimuth = rng.random_range(0.0..std::f64::consts::TAU);
        UnitVec3::normalize(cone_direction(mean, tilt, azimuth))
            .expect("cone directions are unit length")
    };
    let mut targets = Vec::with_capacity(params.n);
    match params.kind {
        TargetKind::CurvedWall => {
            for _ in 0..params.n {
                let u = rng.random_range(-params.extent / 2.0..=params.extent / 2.0);
                let z = rng.random_range(z_lo..=z_hi);
                let x = params.curvature * u * u;
                let direction = sample_direction(&mut rng);
                targets.push(Target {
                    position: Vec3::new(x, u, z),
                    direction,
                });
            }
        }
        TargetKind::Grid => {
            let cols = (params.n as f64).sqrt().ceil() as usize;
            let rows = params.n.div_ceil(cols);
            for i in 0..params.n {
                let (r, c) = (i / cols, i % cols);
                let fy = if cols > 1 { c as f64 / (cols - 1) as f64 } else { 0.5 };
                let fz = if rows > 1 { r as f64 / (rows - 1) as f64 } else { 0.5 };
                let y = -params.extent / 2.0 + params.extent * fy;
                let z = z_lo + (z_hi - z_lo) * fz;
                let direction = sample_direction(&mut rng);
                targets.push(Target {
                    position: Vec3::new(0.0, y, z),
                    direction,
                });
            }
        }
        TargetKind::RandomShell => {
            let radius = params.extent;
            let center = Vec3::new(radius, 0.0, (z_lo + z_hi) / 2.0);
            for _ in 0..params.n {
                let direction = sample_direction(&mut rng);
                let mut position = center - direction.as_vec3().scale(radius);
                position.z = position.z.clamp(z_lo, z_hi);
                targets.push(Target {
                    position,
                    direction,
                });
            }
        }
    }
    Ok(targets)
}
