//! Minimal ASCII OFF mesh format: an `OFF` line, a `vertices faces edges`
//! count line, one `x y z` line per vertex, then faces as `n i0 i1 ...`.
//! Polygons with more than three vertices are fanned into triangles.
//! Blank lines and `#` comments are ignored.

use std::fmt::Write as _;

use crate::geom::Vec3;

use super::{Material, SceneError, Shading, TriMesh};

pub fn read_off(text: &str, material: Material, shading: Shading) -> Result<TriMesh, SceneError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let err = |line: usize, msg: &str| SceneError::Parse {
        line,
        msg: msg.to_string(),
    };

    let (ln, header) = lines.next().ok_or_else(|| err(0, "empty file"))?;
    let mut counts_line = None;
    if header != "OFF" {
        if let Some(rest) = header.strip_prefix("OFF") {
            counts_line = Some((ln, rest.trim()));
        } else {
            return Err(err(ln, "missing OFF header"));
        }
    }
    let (ln, counts) = match counts_line {
        Some(c) => c,
        None => lines.next().ok_or_else(|| err(ln, "missing counts"))?,
    };
    let nums: Vec<usize> = counts
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| err(ln, "bad count")))
        .collect::<Result<_, _>>()?;
    if nums.len() < 2 {
        return Err(err(ln, "expected vertex and face counts"));
    }
    let (nv, nf) = (nums[0], nums[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| err(ln, "truncated vertex list"))?;
        let c: Vec<f64> = l
            .split_whitespace()
            .take(3)
            .map(|s| s.parse().map_err(|_| err(ln, "bad coordinate")))
            .collect::<Result<_, _>>()?;
        if c.len() != 3 {
            return Err(err(ln, "vertex needs three coordinates"));
        }
        vertices.push(Vec3::new(c[0], c[1], c[2]));
    }

    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines.next().ok_or_else(|| err(ln, "truncated face list"))?;
        let idx: Vec<usize> = l
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| err(ln, "bad index")))
            .collect::<Result<_, _>>()?;
        let n = *idx.first().ok_or_else(|| err(ln, "empty face"))?;
        if n < 3 || idx.len() < n + 1 {
            return Err(err(ln, "face needs at least three indices"));
        }
        let poly = &idx[1..=n];
        for k in 1..n - 1 {
            triangles.push([poly[0], poly[k], poly[k + 1]]);
        }
    }
    TriMesh::new(vertices, triangles, material, shading)
}

pub fn write_off(mesh: &TriMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "OFF");
    let _ = writeln!(s, "{} {} 0", mesh.vertices.len(), mesh.triangles.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE_FACE: &str = "OFF
# a unit square split as a quad
4 1 0
0 0 0
1 0 0
1 1 0
0 1 0
4 0 1 2 3
";

    #[test]
    fn reads_quad_as_two_triangles() {
        let m = read_off(CUBE_FACE, Material::default(), Shading::Flat).unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        let again = read_off(&write_off(&m), Material::default(), Shading::Flat).unwrap();
        assert_eq!(again.vertices, m.vertices);
        assert_eq!(again.triangles, m.triangles);
    }

    #[test]
    fn reports_bad_index_line() {
        let bad = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n";
        match read_off(bad, Material::default(), Shading::Flat) {
            Err(SceneError::IndexOutOfRange { index: 7, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let bad = "OFF\n3 1 0\n0 0 0\n1 x 0\n";
        assert!(matches!(
            read_off(bad, Material::default(), Shading::Flat),
            Err(SceneError::Parse { line: 4, .. })
        ));
    }
}
