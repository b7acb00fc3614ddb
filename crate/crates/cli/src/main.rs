//! `reachplan`: every pipeline stage as a subcommand with JSON on stdin or
//! stdout, plus `run` for the whole planner in one shot.
//!
//! A flat JSON config file (`--config`) supplies defaults; individual flags
//! override it. Exit codes: 0 success, 2 bad input, 3 geometrically
//! infeasible, 4 internal invariant violation.

use clap::{Parser, Subcommand};
use reachplan::clustering::DeltaMode;
use reachplan::fkr::{bounding_directions, build_fkr, load_fkr, save_fkr, Aabb};
use reachplan::geometry::Vec3;
use reachplan::macs::{find_macs, ConvexPolytope, DigitalSet};
use reachplan::pipeline::{place_bases, plan_sequence, PipelineConfig};
use reachplan::targets::{gen_targets, load_targets, save_targets, GenParams, TargetKind};
use reachplan::{BallSegment, BasePose, BaseTour, Cluster, CollisionPlanes, ConfigSequence, Error,
    Result, TargetSequence};
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "reachplan",
    version,
    about = "Plan multi-target visits for a mobile manipulator",
    long_about = "Clusters task-space targets into reachable-workspace balls, derives one \
                  mobile-base pose per cluster analytically, and sequences base poses, \
                  targets, and joint configurations. Each stage is a subcommand with JSON \
                  input and output so stages can be piped; `run` executes them all."
)]
struct Cli {
    /// Flat JSON config file; the flags below override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// RNG seed for every seeded step.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Voxel edge length in meters.
    #[arg(long, global = true, value_name = "METERS")]
    resolution: Option<f64>,

    /// Approach-cone half-angle in degrees.
    #[arg(long, global = true, value_name = "DEGREES")]
    theta_deg: Option<f64>,

    /// Clique threshold rule: paper = planar bound δ = (√3/2)·d (clusters
    /// may need splitting), safe = δ = √(2/3)·d (never splits).
    #[arg(long, global = true, value_parser = ["paper", "safe"])]
    delta_mode: Option<String>,

    /// Stack spacing factor for target sequencing (> 1).
    #[arg(long, global = true)]
    h_scale: Option<f64>,

    /// Collision plane x ≥ offset through the base, meters.
    #[arg(long, global = true, value_name = "METERS", allow_hyphen_values = true)]
    x_offset: Option<f64>,

    /// Collision plane z ≥ offset below the base, meters.
    #[arg(long, global = true, value_name = "METERS", allow_hyphen_values = true)]
    z_offset: Option<f64>,

    /// Ball diameter in meters: the cluster diameter for `cluster`, an
    /// override (shrink only) for `run`.
    #[arg(long, global = true, value_name = "METERS")]
    diameter: Option<f64>,

    /// Kinematic chain JSON file; defaults to the bundled 6-DOF chain.
    #[arg(long, global = true, value_name = "FILE")]
    chain: Option<String>,

    /// Prebuilt reachability database for `run` (skips build-fkr).
    #[arg(long, global = true, value_name = "FILE")]
    fkr_file: Option<String>,

    /// Zero timings so result JSON is byte-stable across runs.
    #[arg(long, global = true)]
    stable_output: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic target set as targets JSON.
    GenTargets {
        /// Layout family.
        #[arg(long, value_parser = ["curved-wall", "grid", "random-shell"],
              default_value = "curved-wall")]
        kind: String,
        /// Number of targets.
        #[arg(long, default_value_t = 183)]
        n: usize,
        /// Maximum direction deviation from +x, degrees.
        #[arg(long, default_value_t = 5.0)]
        spread_deg: f64,
        /// Lateral extent of the layout, meters.
        #[arg(long, default_value_t = 2.0)]
        extent: f64,
        /// Lowest target height, meters.
        #[arg(long, default_value_t = 0.4)]
        z_min: f64,
        /// Highest target height, meters.
        #[arg(long, default_value_t = 1.2)]
        z_max: f64,
        /// Wall curvature for curved-wall, 1/meters.
        #[arg(long, default_value_t = 0.3)]
        curvature: f64,
        /// Output file; stdout when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Build the focused reachability database and save it (binary).
    BuildFkr {
        /// Output database file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Extract the maximal digitally convex subset of a database.
    Macs {
        /// Reachability database from build-fkr.
        #[arg(long, value_name = "FILE")]
        fkr: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Fit the widest ball segment into a convex region.
    FitBalls {
        /// macs output JSON (or a bare half-space list); `-` for stdin.
        #[arg(long, value_name = "FILE")]
        hull: String,
        /// Bottom ball center height, meters.
        #[arg(long, allow_hyphen_values = true)]
        z_min: f64,
        /// Top ball center height, meters.
        #[arg(long, allow_hyphen_values = true)]
        z_max: f64,
        /// Output file; stdout when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Cluster targets so every cluster fits one ball.
    Cluster {
        /// Targets JSON; `-` for stdin.
        #[arg(long, value_name = "FILE")]
        targets: String,
        /// Ball segment JSON from fit-balls (or use --diameter).
        #[arg(long, value_name = "FILE")]
        segment: Option<String>,
        /// Output file; stdout when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Place bases and sequence clusters, targets, and configurations.
    Sequence {
        /// Targets JSON; `-` for stdin.
        #[arg(long, value_name = "FILE")]
        targets: String,
        /// Cluster JSON from cluster.
        #[arg(long, value_name = "FILE")]
        clusters: String,
        /// Ball segment JSON from fit-balls.
        #[arg(long, value_name = "FILE")]
        segment: String,
        /// Output file; stdout when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Run the whole pipeline: targets JSON in, result JSON out.
    Run {
        /// Targets JSON; `-` for stdin.
        #[arg(long, value_name = "FILE")]
        targets: String,
        /// Output file; stdout when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

/// `macs` subcommand output: the kept set plus its half-space hull.
#[derive(Serialize, Deserialize)]
struct MacsOutput {
    input_voxels: usize,
    kept: usize,
    removed: usize,
    macs: DigitalSet,
    hull: ConvexPolytope,
}

/// `cluster` subcommand output.
#[derive(Serialize, Deserialize)]
struct ClusterOutput {
    d: f64,
    delta: f64,
    clusters: Vec<Cluster>,
}

/// `sequence` subcommand output.
#[derive(Serialize, Deserialize)]
struct SequenceOutput {
    base_poses: Vec<BasePose>,
    matched_balls: Vec<Vec3>,
    base_tour: BaseTour,
    target_sequence: TargetSequence,
    config_sequence: ConfigSequence,
}

/// Reads a text input; `-` means stdin.
fn read_input(path: &str) -> Result<String> {
    if path == "-" {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf)?;
        Ok(buf)
    } else {
        Ok(std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{path}: {e}"))))?)
    }
}

/// Writes text to a file or, without `--out`, to stdout.
fn write_output(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, content)?;
            Ok(())
        }
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output always serializes")
}

/// Config file merged with the override flags.
fn effective_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut c = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Io(std::io::Error::new(
                    e.kind(),
                    format!("{}: {e}", path.display()),
                ))
            })?;
            PipelineConfig::from_json(&text)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(v) = cli.seed {
        c.seed = v;
    }
    if let Some(v) = cli.resolution {
        c.resolution = v;
    }
    if let Some(v) = cli.theta_deg {
        c.theta_deg = v;
    }
    if let Some(v) = &cli.delta_mode {
        c.delta_mode = match v.as_str() {
            "safe" => DeltaMode::Safe,
            _ => DeltaMode::Paper,
        };
    }
    if let Some(v) = cli.h_scale {
        c.h_scale = v;
    }
    if let Some(v) = cli.x_offset {
        c.x_offset = Some(v);
    }
    if let Some(v) = cli.z_offset {
        c.z_offset = Some(v);
    }
    if let Some(v) = cli.diameter {
        c.diameter_override = Some(v);
    }
    if let Some(v) = &cli.chain {
        c.chain_file = Some(v.clone());
    }
    if let Some(v) = &cli.fkr_file {
        c.fkr_file = Some(v.clone());
    }
    if cli.stable_output {
        c.stable_output = true;
    }
    Ok(c)
}

fn parse_kind(kind: &str) -> TargetKind {
    match kind {
        "grid" => TargetKind::Grid,
        "random-shell" => TargetKind::RandomShell,
        _ => TargetKind::CurvedWall,
    }
}

fn real_main(cli: &Cli) -> Result<()> {
    let config = effective_config(cli)?;
    match &cli.command {
        Command::GenTargets {
            kind,
            n,
            spread_deg,
            extent,
            z_min,
            z_max,
            curvature,
            out,
        } => {
            let params = GenParams {
                kind: parse_kind(kind),
                n: *n,
                seed: config.seed,
                theta_spread: spread_deg.to_radians(),
                theta: config.theta(),
                extent: *extent,
                z_range: (*z_min, *z_max),
                curvature: *curvature,
            };
            let targets = gen_targets(&params)?;
            write_output(out, &save_targets(&targets))
        }
        Command::BuildFkr { out } => {
            let backend = config.backend()?;
            let region = Aabb::new(
                Vec3::from(config.region_min),
                Vec3::from(config.region_max),
            )?;
            let dirs = bounding_directions(config.theta())?;
            let db = build_fkr(
                backend.as_ref(),
                region,
                config.resolution,
                &dirs,
                &config.ik_params(),
            )?;
            std::fs::write(out, save_fkr(&db))?;
            let summary = serde_json::json!({
                "file": out.display().to_string(),
                "dims": db.grid.dims(),
                "voxels": db.grid.len(),
                "marked": db.grid.marked_count(),
            });
            println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
            Ok(())
        }
        Command::Macs { fkr, out } => {
            let bytes = std::fs::read(fkr).map_err(|e| {
                Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", fkr.display())))
            })?;
            let db = load_fkr(&bytes)?;
            let digital = DigitalSet::from_grid(&db.grid);
            if digital.is_empty() {
                return Err(Error::Infeasible(
                    "reachability database has no marked voxels".into(),
                ));
            }
            let input_voxels = digital.len();
            let (kept, hull) = find_macs(&digital)?;
            let output = MacsOutput {
                input_voxels,
                kept: kept.len(),
                removed: input_voxels - kept.len(),
                macs: kept,
                hull,
            };
            write_output(out, &to_json(&output))
        }
        Command::FitBalls {
            hull,
            z_min,
            z_max,
            out,
        } => {
            let text = read_input(hull)?;
            let polytope = match serde_json::from_str::<MacsOutput>(&text) {
                Ok(m) => m.hull,
                Err(_) => serde_json::from_str::<ConvexPolytope>(&text)
                    .map_err(|e| Error::Parse(format!("hull file: {e}")))?,
            };
            let planes = CollisionPlanes {
                x_offset: config.x_offset,
                z_offset: config.z_offset,
            };
            let segment = reachplan::fit_ball_segment(&polytope, *z_min, *z_max, &planes)?;
            write_output(out, &to_json(&segment))
        }
        Command::Cluster {
            targets,
            segment,
            out,
        } => {
            let target_set = load_targets(&read_input(targets)?)?;
            let d = match (cli.diameter, segment) {
                (Some(d), _) => d,
                (None, Some(path)) => {
                    let seg: BallSegment = serde_json::from_str(&read_input(path)?)
                        .map_err(|e| Error::Parse(format!("segment file: {e}")))?;
                    seg.d
                }
                (None, None) => {
                    return Err(Error::invalid(
                        "cluster needs --diameter or --segment for the ball diameter",
                    ))
                }
            };
            let positions: Vec<Vec3> = target_set.iter().map(|t| t.position).collect();
            let delta = reachplan::delta_from_diameter(d, config.delta_mode)?;
            let graph = reachplan::build_graph(&positions, delta)?;
            let pre = reachplan::clique_cover(&graph)?;
            let clusters = reachplan::verify_and_split(&pre, &positions, d)?;
            write_output(out, &to_json(&ClusterOutput { d, delta, clusters }))
        }
        Command::Sequence {
            targets,
            clusters,
            segment,
            out,
        } => {
            let target_set = load_targets(&read_input(targets)?)?;
            let cluster_output: ClusterOutput = serde_json::from_str(&read_input(clusters)?)
                .map_err(|e| Error::Parse(format!("clusters file: {e}")))?;
            let seg: BallSegment = serde_json::from_str(&read_input(segment)?)
                .map_err(|e| Error::Parse(format!("segment file: {e}")))?;
            let directions: Vec<_> = target_set.iter().map(|t| t.direction).collect();
            let (base_poses, matched_balls) =
                place_bases(&cluster_output.clusters, &directions, &seg)?;
            let backend = config.backend()?;
            let (base_tour, target_sequence, config_sequence) = plan_sequence(
                &config,
                backend.as_ref(),
                &target_set,
                &cluster_output.clusters,
                &base_poses,
                seg.d,
            )?;
            let output = SequenceOutput {
                base_poses,
                matched_balls,
                base_tour,
                target_sequence,
                config_sequence,
            };
            write_output(out, &to_json(&output))
        }
        Command::Run { targets, out } => {
            let target_set = load_targets(&read_input(targets)?)?;
            let result = reachplan::run(&config, &target_set)?;
            write_output(out, &result.to_json())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
