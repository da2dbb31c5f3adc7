//! Render, extract and triangulate small scenes end to end.

use lasersim::calib::{fit_laser_plane, PlaneFitOptions};
use lasersim::camera::{CameraRig, Intrinsics};
use lasersim::extract::{extract_profile, ground_truth_profile, ExtractParams, LaserColor};
use lasersim::geom::{PlaneParams, Pose, Vec3};
use lasersim::laser::{side_mounted_pose, LaserModel, DEFAULT_LASER_COLOR};
use lasersim::recon::{assemble_scan, evaluate, ground_truth_cloud, triangulate_frame, CoordFrame};
use lasersim::render::{render, RenderOutput, RenderSettings};
use lasersim::scene::{plane_quad, Material, Scene};

fn intrinsics() -> Intrinsics {
    Intrinsics::new(900.0, 900.0, 0.0, 240.0, 200.0, 480, 400).unwrap()
}

fn laser_cam() -> Pose {
    side_mounted_pose(0.2, 13f64.to_radians())
}

/// Camera moved to `offset` (world), laser rigidly attached, wall at `depth`
/// tilted about the world y axis.
fn scene(offset: Vec3, laser_in_cam: &Pose, depth: f64, tilt: f64) -> Scene {
    let pose_wc = Pose::from_translation(offset);
    let laser = LaserModel::new(
        pose_wc.compose(laser_in_cam),
        DEFAULT_LASER_COLOR,
        20.0,
        0.004,
        60f64.to_radians(),
    )
    .unwrap();
    let normal = Vec3::new(tilt.sin(), 0.0, -tilt.cos());
    let wall = plane_quad(
        &Vec3::new(0.0, 0.0, depth),
        &normal,
        &Vec3::x(),
        3.0,
        3.0,
        Material::diffuse([0.8, 0.8, 0.8]),
    );
    let mut s = Scene::new(CameraRig::new(intrinsics(), pose_wc.inverse()), laser).with_mesh(wall);
    s.ambient = 0.2;
    s
}

fn draw(s: &Scene) -> RenderOutput {
    render(
        s,
        &RenderSettings {
            spp: 4,
            ..Default::default()
        },
    )
    .unwrap()
}

fn phi_gt() -> PlaneParams {
    LaserModel::new(laser_cam(), DEFAULT_LASER_COLOR, 20.0, 0.004, 1.0)
        .unwrap()
        .laser_plane()
}

#[test]
fn swept_plane_assembles_flat() {
    let params = ExtractParams::default();
    let frames: Vec<_> = (0..10)
        .map(|i| {
            let offset = Vec3::new(0.005 * i as f64, 0.0, 0.0);
            let out = draw(&scene(offset, &laser_cam(), 1.0, 0.3));
            let profile = extract_profile(out.rgb.as_ref().unwrap(), LaserColor::Blue, &params);
            let cloud = triangulate_frame(&profile, &intrinsics(), None, &phi_gt(), i).unwrap();
            (cloud, Pose::from_translation(offset))
        })
        .collect();
    let world = assemble_scan(&frames).unwrap();
    assert_eq!(world.frame, CoordFrame::World);
    let pts: Vec<Vec3> = world.valid_points().map(|p| p.point).collect();
    assert!(pts.len() > 3000, "{} points", pts.len());
    let fit = fit_laser_plane(&pts, &PlaneFitOptions::default()).unwrap();
    assert!(fit.rms_distance < 1e-3, "rms {}", fit.rms_distance);
    // And it is the wall that was rendered.
    let wall = PlaneParams::from_point_normal(&Vec3::new(0.0, 0.0, 1.0), &Vec3::new(0.3f64.sin(), 0.0, -0.3f64.cos()));
    assert!(fit.plane.normal_angle_to(&wall) < 1e-3);
    let worst = pts.iter().map(|p| wall.signed_distance(p).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-3, "worst {worst}");
}

#[test]
fn shifted_laser_biases_along_rays() {
    // Laser physically 5 mm further out than the calibration says.
    let moved = Pose {
        translation: laser_cam().translation + Vec3::new(0.005, 0.0, 0.0),
        ..laser_cam()
    };
    let out = draw(&scene(Vec3::zeros(), &moved, 0.6, 0.0));
    let params = ExtractParams::default();
    let profile = extract_profile(out.rgb.as_ref().unwrap(), LaserColor::Blue, &params);
    let cloud = triangulate_frame(&profile, &intrinsics(), None, &phi_gt(), 0).unwrap();
    let gt = ground_truth_profile(out.laser_mask.as_ref().unwrap(), out.depth.as_ref().unwrap(), &params);
    let truth = ground_truth_cloud(&gt, &intrinsics(), 0);
    let report = evaluate(&cloud, &truth).unwrap();
    let dir = report.mean_direction.unwrap();
    assert!(dir[0].abs() > 0.05, "{dir:?}");
    assert!(report.mean.abs() > 5e-3, "mean {}", report.mean);

    // The same render triangulated with the true plane is unbiased.
    let true_plane = LaserModel::new(moved, DEFAULT_LASER_COLOR, 20.0, 0.004, 1.0)
        .unwrap()
        .laser_plane();
    let fixed = triangulate_frame(&profile, &intrinsics(), None, &true_plane, 0).unwrap();
    let r = evaluate(&fixed, &truth).unwrap();
    assert!(r.mean.abs() < 2e-4, "mean {}", r.mean);
}

#[test]
fn mask_and_depth_agree_on_every_row() {
    let out = draw(&scene(Vec3::zeros(), &laser_cam(), 0.9, -0.2));
    let params = ExtractParams::default();
    let gt = ground_truth_profile(out.laser_mask.as_ref().unwrap(), out.depth.as_ref().unwrap(), &params);
    let truth = ground_truth_cloud(&gt, &intrinsics(), 0);
    let mask_cloud = triangulate_frame(&gt.profile, &intrinsics(), None, &phi_gt(), 0).unwrap();
    let r = evaluate(&mask_cloud, &truth).unwrap();
    assert_eq!(r.count, 400);
    assert!(r.max_abs < 1e-4, "max {}", r.max_abs);
}
