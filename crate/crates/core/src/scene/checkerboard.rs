use crate::geom::{Pose, Vec3};

use super::{Albedo, Material, SceneError, Shading, TriMesh};

const WHITE: f64 = 0.9;

/// Planar checkerboard target. The pattern has `(inner_cols + 1) x
/// (inner_rows + 1)` squares centred on a larger white sheet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckerboardSpec {
    pub inner_cols: usize,
    pub inner_rows: usize,
    pub square_size: f64,
    pub sheet_w: f64,
    pub sheet_h: f64,
    /// 1 gives black squares, 0 makes them as bright as the white ones.
    pub saturation: f64,
}

impl Default for CheckerboardSpec {
    /// 13 x 9 squares of 25 mm on a 400 x 300 mm sheet.
    fn default() -> Self {
        Self {
            inner_cols: 12,
            inner_rows: 8,
            square_size: 0.025,
            sheet_w: 0.4,
            sheet_h: 0.3,
            saturation: 0.7,
        }
    }
}

impl CheckerboardSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.inner_cols < 2 || self.inner_rows < 2 {
            return Err(SceneError::InvalidCheckerboard(
                "need at least 2 x 2 inner corners".into(),
            ));
        }
        if !(self.square_size > 0.0) {
            return Err(SceneError::InvalidCheckerboard(
                "square size must be positive".into(),
            ));
        }
        let (pw, ph) = self.pattern_size();
        if pw > self.sheet_w || ph > self.sheet_h {
            return Err(SceneError::InvalidCheckerboard(format!(
                "pattern {pw} x {ph} m does not fit on a {} x {} m sheet",
                self.sheet_w, self.sheet_h
            )));
        }
        if !(0.0..=1.0).contains(&self.saturation) {
            return Err(SceneError::InvalidCheckerboard(
                "saturation must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn pattern_size(&self) -> (f64, f64) {
        (
            (self.inner_cols + 1) as f64 * self.square_size,
            (self.inner_rows + 1) as f64 * self.square_size,
        )
    }

    pub fn corner_count(&self) -> usize {
        self.inner_cols * self.inner_rows
    }

    /// Inner corners on the board plane (`z = 0`), row-major with the column
    /// index running along board x.
    pub fn corners_local(&self) -> Vec<[f64; 2]> {
        let (pw, ph) = self.pattern_size();
        let s = self.square_size;
        let mut out = Vec::with_capacity(self.corner_count());
        for j in 0..self.inner_rows {
            for i in 0..self.inner_cols {
                out.push([
                    -pw / 2.0 + (i + 1) as f64 * s,
                    -ph / 2.0 + (j + 1) as f64 * s,
                ]);
            }
        }
        out
    }

    pub fn texture(&self) -> CheckerTexture {
        CheckerTexture {
            square_size: self.square_size,
            squares_x: self.inner_cols + 1,
            squares_y: self.inner_rows + 1,
            white: WHITE,
            black: WHITE * (1.0 - self.saturation),
        }
    }
}

/// Procedural checker albedo in board coordinates (metres, pattern centred
/// at the origin). Outside the pattern the sheet is white.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckerTexture {
    pub square_size: f64,
    pub squares_x: usize,
    pub squares_y: usize,
    pub white: f64,
    pub black: f64,
}

impl CheckerTexture {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let fx = (x + self.squares_x as f64 * self.square_size / 2.0) / self.square_size;
        let fy = (y + self.squares_y as f64 * self.square_size / 2.0) / self.square_size;
        if fx < 0.0 || fy < 0.0 || fx >= self.squares_x as f64 || fy >= self.squares_y as f64 {
            return self.white;
        }
        let (i, j) = (fx.floor() as usize, fy.floor() as usize);
        if (i + j) % 2 == 0 {
            self.black
        } else {
            self.white
        }
    }
}

/// Textured board quad in the world and its inner corners (world frame,
/// row-major). `board_pose` maps board coordinates to world.
pub fn checkerboard_scene(
    spec: &CheckerboardSpec,
    board_pose: &Pose,
) -> Result<(TriMesh, Vec<Vec3>), SceneError> {
    spec.validate()?;
    let (hw, hh) = (spec.sheet_w / 2.0, spec.sheet_h / 2.0);
    let local = [[-hw, -hh], [hw, -hh], [hw, hh], [-hw, hh]];
    let vertices = local
        .iter()
        .map(|p| board_pose.transform_point(&Vec3::new(p[0], p[1], 0.0)))
        .collect();
    let material = Material {
        albedo: Albedo::Checker(spec.texture()),
        specular_weight: 0.0,
        roughness: 1.0,
    };
    let mesh = TriMesh::with_materials(
        vertices,
        vec![[0, 1, 2], [0, 2, 3]],
        vec![0, 0],
        vec![material],
        Some(local.to_vec()),
        Shading::Flat,
    )?;
    let corners = spec
        .corners_local()
        .into_iter()
        .map(|c| board_pose.transform_point(&Vec3::new(c[0], c[1], 0.0)))
        .collect();
    Ok((mesh, corners))
}
