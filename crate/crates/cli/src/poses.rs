//! Random checkerboard poses in front of a fixed camera.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use lasersim::camera::Intrinsics;
use lasersim::geom::{PlaneParams, Pose, Vec3};
use lasersim::scene::CheckerboardSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoseConstraints {
    pub min_distance: f64,
    pub max_distance: f64,
    /// Largest angle between the board normal and the optical axis.
    pub max_tilt: f64,
    /// Largest in-plane rotation of the board about its normal.
    pub max_roll: f64,
    /// Projected corners stay this many pixels inside the image.
    pub margin: f64,
    /// Require the stripe of this laser plane (camera frame) to cross the
    /// pattern along at least `min_stripe_fraction` of its height.
    pub laser_plane: Option<[f64; 4]>,
    pub min_stripe_fraction: f64,
    pub max_attempts: usize,
}

impl Default for PoseConstraints {
    fn default() -> Self {
        Self {
            min_distance: 0.6,
            max_distance: 1.1,
            max_tilt: 45f64.to_radians(),
            max_roll: 30f64.to_radians(),
            margin: 20.0,
            laser_plane: None,
            min_stripe_fraction: 0.6,
            max_attempts: 100_000,
        }
    }
}

/// Board-to-camera poses. The board frame has `x` along the pattern width,
/// `y` along its height and `z` pointing away from the camera.
pub fn generate_poses(
    seed: u64,
    count: usize,
    k: &Intrinsics,
    board: &CheckerboardSpec,
    c: &PoseConstraints,
) -> Result<Vec<Pose>, String> {
    if c.max_tilt > 60f64.to_radians() {
        return Err("board tilt is limited to 60 degrees".into());
    }
    if !(c.min_distance > 0.0 && c.max_distance >= c.min_distance) {
        return Err("invalid distance range".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > c.max_attempts {
            return Err(format!("only {} of {count} poses found", out.len()));
        }
        let pose = sample_pose(&mut rng, k, c);
        if board_in_frame(&pose, k, board, c.margin) && stripe_ok(&pose, board, c) {
            out.push(pose);
        }
    }
    Ok(out)
}

fn sample_pose(rng: &mut ChaCha8Rng, k: &Intrinsics, c: &PoseConstraints) -> Pose {
    let tilt = c.max_tilt * rng.gen::<f64>().sqrt();
    let tilt_dir = rng.gen_range(0.0..std::f64::consts::TAU);
    let roll = rng.gen_range(-c.max_roll..=c.max_roll);
    let axis = Vec3::new(tilt_dir.cos(), tilt_dir.sin(), 0.0);
    let r_tilt = Pose::from_axis_angle(&axis, tilt, Vec3::zeros()).rotation;
    let r_roll = Pose::from_axis_angle(&Vec3::z(), roll, Vec3::zeros()).rotation;
    let z = rng.gen_range(c.min_distance..=c.max_distance);
    // Board centre somewhere over the central part of the view.
    let u = rng.gen_range(0.25..0.75) * k.width as f64;
    let v = rng.gen_range(0.25..0.75) * k.height as f64;
    let n = k.to_normalized(&Vector2::new(u, v));
    Pose {
        rotation: r_tilt * r_roll,
        translation: Vec3::new(n.x * z, n.y * z, z),
    }
}

/// Every inner corner projects inside the image with `margin` to spare.
pub fn board_in_frame(pose: &Pose, k: &Intrinsics, board: &CheckerboardSpec, margin: f64) -> bool {
    board.corners_local().iter().all(|c| {
        let p = pose.transform_point(&Vec3::new(c[0], c[1], 0.0));
        match k.project_camera_point(&p) {
            Ok(px) => {
                px.x >= margin
                    && px.y >= margin
                    && px.x <= k.width as f64 - 1.0 - margin
                    && px.y <= k.height as f64 - 1.0 - margin
            }
            Err(_) => false,
        }
    })
}

/// Tilt of the board normal from the optical axis.
pub fn tilt_angle(pose: &Pose) -> f64 {
    pose.rotation.column(2).z.clamp(-1.0, 1.0).acos()
}

fn stripe_ok(pose: &Pose, board: &CheckerboardSpec, c: &PoseConstraints) -> bool {
    let Some(phi) = c.laser_plane else {
        return true;
    };
    // Laser plane in board coordinates; its trace on z = 0 is the stripe.
    let plane = PlaneParams::new(phi[0], phi[1], phi[2], phi[3]).transformed(&pose.inverse());
    let (a, b, d) = (plane.a, plane.b, plane.d);
    let (pw, ph) = board.pattern_size();
    let (hw, hh) = (pw / 2.0, ph / 2.0);
    if a.abs() < 1e-9 {
        return false;
    }
    // x where the stripe crosses sampled rows of the pattern.
    let steps = 20;
    let inside = (0..=steps)
        .filter(|i| {
            let y = -hh + ph * *i as f64 / steps as f64;
            let x = -(b * y + d) / a;
            x.abs() < hw * 0.9
        })
        .count();
    inside as f64 / (steps + 1) as f64 >= c.min_stripe_fraction
}
