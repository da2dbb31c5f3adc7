use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lasersim::camera::Distortion;
use lasersim::extract::ExtractParams;
use lasersim_cli::commands::{
    cmd_calib_dataset, cmd_calibrate_camera, cmd_calibrate_laser, cmd_evaluate, cmd_extract, cmd_poses,
    cmd_reconstruct, cmd_render, cmd_scan, Method, RenderOverrides,
};
use lasersim_cli::config::{PassName, ScanConfig};
use lasersim_cli::dataset::CalibSetup;
use lasersim_cli::{parse_json, CliError, Result};

#[derive(Parser)]
#[command(name = "lasersim", version, about = "Virtual line-laser scanner")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render all frames of a scan config.
    Render {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated subset of rgb,depth,normals,mask.
        #[arg(long)]
        passes: Option<String>,
        /// Warp RGB with lens distortion "k1,k2,p1,p2,k3".
        #[arg(long, allow_hyphen_values = true)]
        distort: Option<String>,
    },
    /// Render checkerboard images for camera and laser calibration.
    CalibDataset {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Calibrate the camera from a calibration dataset.
    CalibrateCamera {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also estimate lens distortion.
        #[arg(long)]
        distortion: bool,
    },
    /// Fit the laser plane from a dataset and a camera calibration.
    CalibrateLaser {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract stripe profiles from rendered frames.
    Extract {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// rgb or mask.
        #[arg(long, default_value = "rgb")]
        method: String,
    },
    /// Triangulate rendered frames into a PLY point cloud.
    Reconstruct {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Plane JSON from calibrate-laser; defaults to the ground truth.
        #[arg(long)]
        plane: Option<PathBuf>,
        #[arg(long, default_value = "rgb")]
        method: String,
    },
    /// Compare reconstructions against ground-truth depth.
    Evaluate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plane: Option<PathBuf>,
        #[arg(long, default_value = "rgb,mask")]
        methods: String,
    },
    /// Render a sweep and write the assembled cloud to OUT/scan.ply.
    Scan {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        plane: Option<PathBuf>,
    },
    /// Generate random checkerboard poses.
    Poses {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 38)]
        count: usize,
    },
}

fn load_scan(path: Option<&Path>) -> Result<ScanConfig> {
    match path {
        Some(p) => ScanConfig::load(p),
        None => Ok(ScanConfig::default()),
    }
}

fn load_setup(path: Option<&Path>) -> Result<CalibSetup> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            parse_json(&text, &p.display().to_string())
        }
        None => Ok(CalibSetup::default()),
    }
}

fn parse_distortion(s: &str) -> Result<Distortion> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::Config(format!("--distort: {e}")))?;
    let [k1, k2, p1, p2, k3] = v[..] else {
        return Err(CliError::Config("--distort needs k1,k2,p1,p2,k3".into()));
    };
    Ok(Distortion { k1, k2, k3, p1, p2 })
}

fn single_method(s: &str) -> Result<Method> {
    match Method::parse_list(s)?[..] {
        [m] if m != Method::Gt => Ok(m),
        _ => Err(CliError::Config(format!("method must be rgb or mask, got '{s}'"))),
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let params = ExtractParams::default();
    match cli.command {
        Command::Render {
            config,
            out,
            seed,
            passes,
            distort,
        } => {
            let cfg = load_scan(config.as_deref())?;
            let ov = RenderOverrides {
                seed,
                passes: passes.as_deref().map(PassName::parse_list).transpose()?,
                distort: distort.as_deref().map(parse_distortion).transpose()?,
            };
            let dirs = cmd_render(&cfg, &out, &ov)?;
            println!("rendered {} frame(s) into {}", dirs.len(), out.display());
        }
        Command::CalibDataset { config, out, seed } => {
            let mut setup = load_setup(config.as_deref())?;
            if let Some(s) = seed {
                setup.seed = s;
            }
            let path = cmd_calib_dataset(&setup, &out)?;
            println!("wrote {}", path.display());
        }
        Command::CalibrateCamera { input, out, distortion } => {
            let c = cmd_calibrate_camera(&input, &out, distortion)?;
            let k = c.intrinsics;
            println!(
                "fx {:.4} fy {:.4} cx {:.4} cy {:.4} rms {:.4} px",
                k.fx, k.fy, k.cx, k.cy, c.rms
            );
        }
        Command::CalibrateLaser {
            input,
            calibration,
            out,
        } => {
            let p = cmd_calibrate_laser(&input, &calibration, &out)?;
            println!("phi {:?} from {} points", p.phi, p.point_count);
            if let Some(e) = p.angle_error_mrad {
                println!("normal error {e:.4} mrad");
            }
        }
        Command::Extract { input, out, method } => {
            let profiles = cmd_extract(&input, &out, single_method(&method)?, &params)?;
            println!("extracted {} profile(s)", profiles.len());
        }
        Command::Reconstruct {
            input,
            out,
            plane,
            method,
        } => {
            let cloud = cmd_reconstruct(&input, plane.as_deref(), single_method(&method)?, &out, &params)?;
            println!("{} valid points written to {}", cloud.valid_count(), out.display());
        }
        Command::Evaluate {
            input,
            out,
            plane,
            methods,
        } => {
            let methods = Method::parse_list(&methods)?;
            for (m, r) in cmd_evaluate(&input, plane.as_deref(), &methods, &out, &params)? {
                println!(
                    "{:<4} n {:>6} mean {:+.3e} rms {:.3e} max|e| {:.3e} m",
                    m.name(),
                    r.count,
                    r.mean,
                    r.rms,
                    r.max_abs
                );
            }
        }
        Command::Scan {
            config,
            out,
            seed,
            plane,
        } => {
            let cfg = load_scan(config.as_deref())?;
            let ov = RenderOverrides {
                seed,
                ..Default::default()
            };
            let cloud = cmd_scan(&cfg, &out, &ov, plane.as_deref())?;
            println!("{} valid points", cloud.valid_count());
        }
        Command::Poses {
            config,
            out,
            seed,
            count,
        } => {
            let setup = load_setup(config.as_deref())?;
            let list = cmd_poses(&setup, seed, count, &out)?;
            println!("wrote {} poses", list.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
