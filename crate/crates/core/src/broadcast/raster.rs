//! Software depth rasterizer and depth-image files.
//!
//! Depth is planar: the distance along the camera +z axis. Pixels without a
//! surface hold [`NO_HIT`]. Back faces are drawn like front faces.
//!
//! A depth file is a text header followed by a little-endian `f32`
//! row-major payload:
//!
//! ```text
//! DEPTHF32
//! # no-hit 0
//! # depth planar meters along camera z
//! # camera W H HFOV VFOV NEAR FAR tx ty tz qx qy qz qw
//! W H
//! <W·H f32>
//! ```

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rayon::prelude::*;

use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::geom::{Point3, Pose};
use crate::trimesh::TriMesh;

pub const NO_HIT: f64 = 0.0;

const MAGIC: &str = "DEPTHF32";
const BAND_ROWS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub camera: CameraModel,
    /// Row-major, `width · height` values.
    pub depth: Vec<f64>,
}

impl DepthImage {
    pub fn empty(camera: CameraModel) -> Self {
        Self {
            depth: vec![NO_HIT; camera.width as usize * camera.height as usize],
            camera,
        }
    }

    pub fn width(&self) -> u32 {
        self.camera.width
    }

    pub fn height(&self) -> u32 {
        self.camera.height
    }

    pub fn get(&self, u: u32, v: u32) -> Option<f64> {
        let d = self.depth[v as usize * self.camera.width as usize + u as usize];
        (d != NO_HIT).then_some(d)
    }

    pub fn hit_count(&self) -> usize {
        self.depth.iter().filter(|&&d| d != NO_HIT).count()
    }
}

/// Clips a camera-frame polygon to `z >= near`.
fn clip_near(poly: &[Point3], near: f64) -> Vec<Point3> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (ina, inb) = (a.z >= near, b.z >= near);
        if ina {
            out.push(a);
        }
        if ina != inb {
            let t = (near - a.z) / (b.z - a.z);
            let mut p = a + (b - a) * t;
            p.z = near;
            out.push(p);
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct ScreenTri {
    xy: [[f64; 2]; 3],
    inv_z: [f64; 3],
    inv_area: f64,
    rows: (usize, usize),
    cols: (usize, usize),
}

fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

fn setup(camera: &CameraModel, tri: [Point3; 3]) -> Option<ScreenTri> {
    let xy = tri.map(|p| camera.project_camera_point(&p));
    let area = edge(xy[0], xy[1], xy[2]);
    if !area.is_finite() || area.abs() < 1e-12 {
        return None;
    }
    let (w, h) = (camera.width as f64, camera.height as f64);
    let lo = |k: usize| xy.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
    let hi = |k: usize| xy.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
    let c0 = (lo(0) - 0.5).ceil().max(0.0);
    let c1 = (hi(0) - 0.5).floor().min(w - 1.0);
    let r0 = (lo(1) - 0.5).ceil().max(0.0);
    let r1 = (hi(1) - 0.5).floor().min(h - 1.0);
    if c0 > c1 || r0 > r1 {
        return None;
    }
    Some(ScreenTri {
        xy,
        inv_z: tri.map(|p| 1.0 / p.z),
        inv_area: 1.0 / area,
        rows: (r0 as usize, r1 as usize),
        cols: (c0 as usize, c1 as usize),
    })
}

/// Z-buffered rasterization of `mesh` into a depth image for `camera`.
/// Triangles are clipped at the near plane; depths beyond `far` are dropped.
pub fn rasterize_depth(mesh: &TriMesh, camera: &CameraModel) -> DepthImage {
    let (w, h) = (camera.width as usize, camera.height as usize);
    let local: Vec<Point3> = mesh.vertices.iter().map(|p| camera.pose.inverse_transform_point(p)).collect();
    let tris: Vec<ScreenTri> = mesh
        .faces
        .par_iter()
        .flat_map_iter(|f| {
            let poly = clip_near(&f.map(|i| local[i as usize]), camera.near);
            let n = poly.len();
            (1..n.saturating_sub(1)).filter_map(move |k| setup(camera, [poly[0], poly[k], poly[k + 1]]))
        })
        .collect();
    let bands = h.div_ceil(BAND_ROWS);
    let mut binned: Vec<Vec<u32>> = vec![Vec::new(); bands];
    for (i, t) in tris.iter().enumerate() {
        for b in binned.iter_mut().take(t.rows.1 / BAND_ROWS + 1).skip(t.rows.0 / BAND_ROWS) {
            b.push(i as u32);
        }
    }
    let mut img = DepthImage::empty(*camera);
    img.depth
        .par_chunks_mut(BAND_ROWS * w)
        .zip(binned.par_iter())
        .enumerate()
        .for_each(|(band, (buf, list))| {
            let row0 = band * BAND_ROWS;
            let rows = buf.len() / w;
            for &ti in list {
                let t = &tris[ti as usize];
                let (ra, rb) = (t.rows.0.max(row0), t.rows.1.min(row0 + rows - 1));
                for v in ra..=rb {
                    for u in t.cols.0..=t.cols.1 {
                        let p = [u as f64 + 0.5, v as f64 + 0.5];
                        let b0 = edge(t.xy[1], t.xy[2], p) * t.inv_area;
                        let b1 = edge(t.xy[2], t.xy[0], p) * t.inv_area;
                        let b2 = edge(t.xy[0], t.xy[1], p) * t.inv_area;
                        if b0 < 0.0 || b1 < 0.0 || b2 < 0.0 {
                            continue;
                        }
                        let inv_z = b0 * t.inv_z[0] + b1 * t.inv_z[1] + b2 * t.inv_z[2];
                        let z = 1.0 / inv_z;
                        if !(z > 0.0 && z <= camera.far) {
                            continue;
                        }
                        let cell = &mut buf[(v - row0) * w + u];
                        if *cell == NO_HIT || z < *cell {
                            *cell = z;
                        }
                    }
                }
            }
        });
    img
}

/// World-frame point for every pixel with a hit, in row-major order.
pub fn reinforce_points(depth: &DepthImage) -> Vec<Point3> {
    let w = depth.camera.width as usize;
    depth
        .depth
        .iter()
        .enumerate()
        .filter(|(_, &d)| d != NO_HIT)
        .map(|(i, &d)| depth.camera.unproject((i % w) as u32, (i / w) as u32, d))
        .collect()
}

pub fn write_depth(path: &Path, img: &DepthImage) -> Result<()> {
    let c = &img.camera;
    let t = c.pose.translation();
    let q = c.pose.quaternion();
    let mut bytes = format!(
        "{MAGIC}\n# no-hit 0\n# depth planar meters along camera z\n# camera {} {} {:?} {:?} {:?} {:?} {:?} {:?} {:?} {:?} {:?} {:?} {:?}\n{} {}\n",
        c.width, c.height, c.hfov_deg, c.vfov_deg, c.near, c.far, t.x, t.y, t.z, q.i, q.j, q.k, q.w, c.width, c.height
    )
    .into_bytes();
    bytes.reserve(img.depth.len() * 4);
    for &d in &img.depth {
        bytes.extend_from_slice(&(d as f32).to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_depth(path: &Path) -> Result<DepthImage> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut camera = None;
    let mut line_no = 0;
    let mut line = String::new();
    let mut read_line = |line: &mut String, n: &mut usize| -> Result<()> {
        line.clear();
        *n += 1;
        if r.read_line(line).map_err(|e| Error::io(path, e))? == 0 {
            return Err(Error::parse(path, *n, "unexpected end of header"));
        }
        Ok(())
    };
    read_line(&mut line, &mut line_no)?;
    if line.trim_end() != MAGIC {
        return Err(Error::parse(path, 1, "not a depth file"));
    }
    let (w, h) = loop {
        read_line(&mut line, &mut line_no)?;
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["#", "camera", rest @ ..] => {
                let v: Vec<f64> = rest
                    .iter()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
                if v.len() != 13 {
                    return Err(Error::parse(path, line_no, "camera line needs 13 values"));
                }
                let pose = Pose::from_translation_quaternion([v[6], v[7], v[8]], [v[9], v[10], v[11], v[12]])
                    .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
                let cam = CameraModel::new(v[0] as u32, v[1] as u32, v[2], v[3], pose)
                    .and_then(|c| c.with_range(v[4], v[5]))
                    .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
                camera = Some(cam);
            }
            ["#", ..] => {}
            [a, b] => {
                let p = |s: &str| s.parse::<u32>().map_err(|e| Error::parse(path, line_no, e.to_string()));
                break (p(a)?, p(b)?);
            }
            _ => return Err(Error::parse(path, line_no, "bad header line")),
        }
    };
    let camera = camera.ok_or_else(|| Error::parse(path, line_no, "missing camera line"))?;
    if (camera.width, camera.height) != (w, h) {
        return Err(Error::parse(path, line_no, "size line disagrees with camera"));
    }
    let mut payload = Vec::new();
    r.read_to_end(&mut payload).map_err(|e| Error::io(path, e))?;
    if payload.len() != w as usize * h as usize * 4 {
        return Err(Error::parse(path, line_no, format!("payload holds {} bytes, expected {}", payload.len(), w * h * 4)));
    }
    let depth = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(DepthImage { camera, depth })
}
