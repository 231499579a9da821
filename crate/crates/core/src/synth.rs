//! Analytic test scenes, simulated depth scans, and ground-truth sampling.
//!
//! Scene files are plain text, one primitive per line (`#` starts a comment):
//!
//! ```text
//! bounds   xmin ymin zmin xmax ymax zmax
//! quad     ox oy oz  ux uy uz  vx vy vz        # o + s·u + t·v, s,t in [0,1]
//! box      xmin ymin zmin xmax ymax zmax [grounded]
//! triangle ax ay az  bx by bz  cx cy cz
//! ```
//!
//! A `grounded` box has no bottom face. Scan scripts use the same style;
//! `resolution`, `fov`, and `range` apply to the poses that follow them:
//!
//! ```text
//! resolution W H
//! fov        HFOV_DEG VFOV_DEG
//! range      NEAR FAR
//! sigma      METERS
//! seed       N
//! pose       tx ty tz qx qy qz qw      # camera-to-world
//! lookat     ex ey ez tx ty tz         # +z toward target, image y toward -z
//! ```

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::frame::ScanFrame;
use crate::geom::{Point3, Pose, Vec3};
use crate::trimesh::TriMesh;

/// Ray hits closer than this are ignored.
const RAY_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    /// Parallelogram `origin + s·u + t·v`.
    Quad { origin: Point3, u: Vec3, v: Vec3 },
    /// Axis-aligned box surface.
    Box { min: Point3, max: Point3, grounded: bool },
    Triangle { a: Point3, b: Point3, c: Point3 },
}

/// Planar surface piece: a parallelogram or a triangle spanned by two edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub origin: Point3,
    pub e1: Vec3,
    pub e2: Vec3,
    pub triangle: bool,
}

fn segment_distance(p: &Point3, a: &Point3, b: &Point3) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

impl Face {
    fn inside(&self, s: f64, t: f64, eps: f64) -> bool {
        if self.triangle {
            s >= -eps && t >= -eps && s + t <= 1.0 + eps
        } else {
            (-eps..=1.0 + eps).contains(&s) && (-eps..=1.0 + eps).contains(&t)
        }
    }

    pub fn area(&self) -> f64 {
        let a = self.e1.cross(&self.e2).norm();
        if self.triangle {
            0.5 * a
        } else {
            a
        }
    }

    pub fn normal(&self) -> Vec3 {
        self.e1.cross(&self.e2).normalize()
    }

    /// Ray parameter of the first hit with `t > RAY_EPSILON`.
    pub fn intersect(&self, o: &Point3, d: &Vec3) -> Option<f64> {
        let pvec = d.cross(&self.e2);
        let det = self.e1.dot(&pvec);
        if det.abs() < 1e-300 {
            return None;
        }
        let inv = 1.0 / det;
        let tvec = o - self.origin;
        let s = tvec.dot(&pvec) * inv;
        let qvec = tvec.cross(&self.e1);
        let t2 = d.dot(&qvec) * inv;
        if !self.inside(s, t2, 0.0) {
            return None;
        }
        let t = self.e2.dot(&qvec) * inv;
        (t > RAY_EPSILON).then_some(t)
    }

    /// Euclidean distance from `p` to the face.
    pub fn distance(&self, p: &Point3) -> f64 {
        let w = p - self.origin;
        let (uu, uv, vv) = (self.e1.dot(&self.e1), self.e1.dot(&self.e2), self.e2.dot(&self.e2));
        let (wu, wv) = (w.dot(&self.e1), w.dot(&self.e2));
        let det = uu * vv - uv * uv;
        let s = (wu * vv - wv * uv) / det;
        let t = (wv * uu - wu * uv) / det;
        if self.inside(s, t, 0.0) {
            return w.dot(&self.normal()).abs();
        }
        let a = self.origin;
        let b = a + self.e1;
        let c = a + self.e2;
        if self.triangle {
            segment_distance(p, &a, &b).min(segment_distance(p, &b, &c)).min(segment_distance(p, &c, &a))
        } else {
            let d = b + self.e2;
            segment_distance(p, &a, &b)
                .min(segment_distance(p, &b, &d))
                .min(segment_distance(p, &d, &c))
                .min(segment_distance(p, &c, &a))
        }
    }

    /// Lattice samples at spacing `res` in a frame aligned with `e1`, offset
    /// by half a cell, kept where they fall on the face.
    pub fn sample(&self, res: f64) -> Vec<Point3> {
        let n = self.normal();
        let x = self.e1.normalize();
        let y = n.cross(&x);
        let corners: Vec<[f64; 2]> = {
            let mut c = vec![[0.0, 0.0], [self.e1.dot(&x), self.e1.dot(&y)], [self.e2.dot(&x), self.e2.dot(&y)]];
            if !self.triangle {
                let d = self.e1 + self.e2;
                c.push([d.dot(&x), d.dot(&y)]);
            }
            c
        };
        let lo = [corners.iter().map(|c| c[0]).fold(f64::INFINITY, f64::min), corners.iter().map(|c| c[1]).fold(f64::INFINITY, f64::min)];
        let hi = [corners.iter().map(|c| c[0]).fold(f64::NEG_INFINITY, f64::max), corners.iter().map(|c| c[1]).fold(f64::NEG_INFINITY, f64::max)];
        let nx = ((hi[0] - lo[0]) / res).ceil() as usize;
        let ny = ((hi[1] - lo[1]) / res).ceil() as usize;
        let (uu, uv, vv) = (self.e1.dot(&self.e1), self.e1.dot(&self.e2), self.e2.dot(&self.e2));
        let det = uu * vv - uv * uv;
        let mut out = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let px = lo[0] + (i as f64 + 0.5) * res;
                let py = lo[1] + (j as f64 + 0.5) * res;
                let w = x * px + y * py;
                let (wu, wv) = (w.dot(&self.e1), w.dot(&self.e2));
                let s = (wu * vv - wv * uv) / det;
                let t = (wv * uu - wu * uv) / det;
                if self.inside(s, t, 1e-12) {
                    out.push(self.origin + self.e1 * s + self.e2 * t);
                }
            }
        }
        out
    }
}

impl Primitive {
    pub fn faces(&self) -> Vec<Face> {
        match *self {
            Primitive::Quad { origin, u, v } => vec![Face {
                origin,
                e1: u,
                e2: v,
                triangle: false,
            }],
            Primitive::Triangle { a, b, c } => vec![Face {
                origin: a,
                e1: b - a,
                e2: c - a,
                triangle: true,
            }],
            Primitive::Box { min, max, grounded } => {
                let d = max - min;
                let (dx, dy, dz) = (Vec3::new(d.x, 0.0, 0.0), Vec3::new(0.0, d.y, 0.0), Vec3::new(0.0, 0.0, d.z));
                let quad = |origin: Point3, e1: Vec3, e2: Vec3| Face {
                    origin,
                    e1,
                    e2,
                    triangle: false,
                };
                let mut f = vec![
                    quad(min + dz, dx, dy),
                    quad(min, dz, dy),
                    quad(min + dx, dy, dz),
                    quad(min, dx, dz),
                    quad(min + dy, dz, dx),
                ];
                if !grounded {
                    f.push(quad(min, dy, dx));
                }
                f
            }
        }
    }

    /// Closed-box containment; false for open primitives.
    pub fn encloses(&self, p: &Point3, eps: f64) -> bool {
        match self {
            Primitive::Box { min, max, .. } => (0..3).all(|k| p[k] >= min[k] - eps && p[k] <= max[k] + eps),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub primitives: Vec<Primitive>,
    pub bounds: (Point3, Point3),
    faces: Vec<(usize, Face)>,
}

impl Scene {
    pub fn new(primitives: Vec<Primitive>, bounds: (Point3, Point3)) -> Self {
        let faces = primitives
            .iter()
            .enumerate()
            .flat_map(|(i, p)| p.faces().into_iter().map(move |f| (i, f)))
            .collect();
        Self {
            primitives,
            bounds,
            faces,
        }
    }

    pub fn faces(&self) -> impl Iterator<Item = &Face> {
        self.faces.iter().map(|(_, f)| f)
    }

    /// 20 × 10 × 8 m block with a ground plane and three grounded boxes.
    pub fn box_town() -> Self {
        let bx = |a: [f64; 3], b: [f64; 3]| Primitive::Box {
            min: Point3::from(a),
            max: Point3::from(b),
            grounded: true,
        };
        Self::new(
            vec![
                Primitive::Quad {
                    origin: Point3::origin(),
                    u: Vec3::new(20.0, 0.0, 0.0),
                    v: Vec3::new(0.0, 10.0, 0.0),
                },
                bx([3.0, 2.0, 0.0], [6.0, 5.0, 4.0]),
                bx([9.0, 6.0, 0.0], [12.0, 8.5, 6.0]),
                bx([14.0, 1.5, 0.0], [17.0, 4.0, 3.0]),
            ],
            (Point3::origin(), Point3::new(20.0, 10.0, 8.0)),
        )
    }

    /// A single 10 × 10 m ground quad.
    pub fn plane_only() -> Self {
        Self::new(
            vec![Primitive::Quad {
                origin: Point3::origin(),
                u: Vec3::new(10.0, 0.0, 0.0),
                v: Vec3::new(0.0, 10.0, 0.0),
            }],
            (Point3::origin(), Point3::new(10.0, 10.0, 5.0)),
        )
    }

    /// A straight street `length` meters long along +x with blocks of
    /// buildings on both sides; sizes come from a fixed-seed generator.
    pub fn street(length: f64, seed: u64) -> Self {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut prims = vec![Primitive::Quad {
            origin: Point3::new(0.0, -12.0, 0.0),
            u: Vec3::new(length, 0.0, 0.0),
            v: Vec3::new(0.0, 24.0, 0.0),
        }];
        for side in [-1.0, 1.0] {
            let mut x = 1.0;
            while x < length - 4.0 {
                let w = rng.gen_range(3.0..7.0f64).min(length - 1.0 - x);
                let depth = rng.gen_range(3.0..6.0);
                let h = rng.gen_range(3.0..9.0);
                let near = rng.gen_range(4.0..6.0);
                let (y0, y1) = if side > 0.0 { (near, near + depth) } else { (-near - depth, -near) };
                prims.push(Primitive::Box {
                    min: Point3::new(x, y0, 0.0),
                    max: Point3::new(x + w, y1, h),
                    grounded: true,
                });
                x += w + rng.gen_range(1.0..3.0);
            }
        }
        Self::new(prims, (Point3::new(0.0, -12.0, 0.0), Point3::new(length, 12.0, 10.0)))
    }

    /// Nearest hit parameter along `o + t·d`.
    pub fn intersect(&self, o: &Point3, d: &Vec3) -> Option<f64> {
        self.faces
            .iter()
            .filter_map(|(_, f)| f.intersect(o, d))
            .min_by(f64::total_cmp)
    }

    /// Distance from `p` to the nearest surface.
    pub fn distance(&self, p: &Point3) -> f64 {
        self.faces.iter().map(|(_, f)| f.distance(p)).fold(f64::INFINITY, f64::min)
    }

    pub fn surface_area(&self) -> f64 {
        self.faces.iter().map(|(_, f)| f.area()).sum()
    }

    /// Exact triangulation of every face; quads split along `e1 + e2`.
    pub fn to_mesh(&self) -> TriMesh {
        let mut mesh = TriMesh::default();
        for (_, f) in &self.faces {
            let base = mesh.vertices.len() as u32;
            mesh.vertices.extend([f.origin, f.origin + f.e1, f.origin + f.e2]);
            mesh.faces.push([base, base + 1, base + 2]);
            if !f.triangle {
                mesh.vertices.push(f.origin + f.e1 + f.e2);
                mesh.faces.push([base + 1, base + 3, base + 2]);
            }
        }
        mesh
    }

    /// Lattice samples of every face at spacing `res`, minus samples lying
    /// on or inside a different closed box (such as ground under a building).
    pub fn ground_truth_points(&self, res: f64) -> Vec<Point3> {
        assert!(res > 0.0, "resolution must be positive");
        let mut out = Vec::new();
        for (owner, face) in &self.faces {
            out.extend(face.sample(res).into_iter().filter(|p| {
                !self
                    .primitives
                    .iter()
                    .enumerate()
                    .any(|(i, prim)| i != *owner && prim.encloses(p, 1e-9))
            }));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let f = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        let (lo, hi) = self.bounds;
        let mut s = format!("bounds {}\n", f(&[lo.x, lo.y, lo.z, hi.x, hi.y, hi.z]));
        for p in &self.primitives {
            match p {
                Primitive::Quad { origin: o, u, v } => {
                    s += &format!("quad {}\n", f(&[o.x, o.y, o.z, u.x, u.y, u.z, v.x, v.y, v.z]));
                }
                Primitive::Box { min, max, grounded } => {
                    s += &format!(
                        "box {}{}\n",
                        f(&[min.x, min.y, min.z, max.x, max.y, max.z]),
                        if *grounded { " grounded" } else { "" }
                    );
                }
                Primitive::Triangle { a, b, c } => {
                    s += &format!("triangle {}\n", f(&[a.x, a.y, a.z, b.x, b.y, b.z, c.x, c.y, c.z]));
                }
            }
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut prims = Vec::new();
        let mut bounds = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tok = line.split_whitespace();
            let kind = tok.next().unwrap();
            let rest: Vec<&str> = tok.collect();
            let err = |m: String| Error::parse(path, n + 1, m);
            let (nums, flags): (Vec<&str>, Vec<&str>) = rest.iter().partition(|t| t.parse::<f64>().is_ok());
            let v: Vec<f64> = nums.iter().map(|t| t.parse().unwrap()).collect();
            if v.iter().any(|x| !x.is_finite()) {
                return Err(err("non-finite value".into()));
            }
            let want = |k: usize| {
                if v.len() == k {
                    Ok(())
                } else {
                    Err(err(format!("`{kind}` takes {k} numbers, found {}", v.len())))
                }
            };
            let p = |i: usize| Point3::new(v[i], v[i + 1], v[i + 2]);
            match kind {
                "bounds" => {
                    want(6)?;
                    bounds = Some((p(0), p(3)));
                }
                "quad" => {
                    want(9)?;
                    let (u, w) = (p(3).coords, p(6).coords);
                    if u.cross(&w).norm() == 0.0 {
                        return Err(err("degenerate quad".into()));
                    }
                    prims.push(Primitive::Quad { origin: p(0), u, v: w });
                }
                "box" => {
                    want(6)?;
                    let (lo, hi) = (p(0), p(3));
                    if (0..3).any(|k| lo[k] >= hi[k]) {
                        return Err(err("box min must be below max on every axis".into()));
                    }
                    prims.push(Primitive::Box {
                        min: lo,
                        max: hi,
                        grounded: flags.contains(&"grounded"),
                    });
                }
                "triangle" => {
                    want(9)?;
                    if (p(3) - p(0)).cross(&(p(6) - p(0))).norm() == 0.0 {
                        return Err(err("degenerate triangle".into()));
                    }
                    prims.push(Primitive::Triangle {
                        a: p(0),
                        b: p(3),
                        c: p(6),
                    });
                }
                other => return Err(err(format!("unknown primitive `{other}`"))),
            }
            if let Some(flag) = flags.iter().find(|f| !(kind == "box" && **f == "grounded")) {
                return Err(err(format!("unexpected token `{flag}`")));
            }
        }
        let bounds = bounds.unwrap_or_else(|| bounds_of(&prims));
        Ok(Self::new(prims, bounds))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

fn bounds_of(prims: &[Primitive]) -> (Point3, Point3) {
    let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for f in prims.iter().flat_map(|p| p.faces()) {
        let corners = [f.origin, f.origin + f.e1, f.origin + f.e2, f.origin + f.e1 + f.e2];
        for c in corners.iter().take(if f.triangle { 3 } else { 4 }) {
            for k in 0..3 {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
    }
    if prims.is_empty() {
        (Point3::origin(), Point3::origin())
    } else {
        (lo, hi)
    }
}

/// Ray-casts one depth scan. Points are returned in the camera frame; the
/// frame's pose is the camera pose. With `sigma > 0` each range is perturbed
/// by Gaussian noise drawn from a stream keyed by `(seed, scan_index, pixel)`.
pub fn render_scan(scene: &Scene, camera: &CameraModel, sigma: f64, seed: u64, scan_index: u64) -> ScanFrame {
    let w = camera.width as usize;
    let rows: Vec<Vec<Point3>> = (0..camera.height)
        .into_par_iter()
        .map(|v| {
            let mut row = Vec::with_capacity(w);
            let origin = camera.pose.position();
            for u in 0..camera.width {
                let ray = camera.pixel_ray(u, v);
                let dir = camera.pose.transform_vector(&ray);
                let Some(mut t) = scene.intersect(&origin, &dir) else { continue };
                if sigma > 0.0 {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(scan_index);
                    rng.set_word_pos((v as u128 * w as u128 + u as u128) * 4);
                    let n: f64 = StandardNormal.sample(&mut rng);
                    t += sigma * n / ray.norm();
                    if t <= 0.0 {
                        continue;
                    }
                }
                row.push(Point3::from(ray * t));
            }
            row
        })
        .collect();
    ScanFrame::new(scan_index as f64 * 0.1, rows.into_iter().flatten().collect(), camera.pose)
}

/// A sequence of cameras plus noise settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanScript {
    pub cameras: Vec<CameraModel>,
    pub sigma: f64,
    pub seed: u64,
}

impl ScanScript {
    /// Eight cameras at 7 m around the edge of [`Scene::box_town`], each
    /// looking at the middle of the block.
    pub fn box_town(width: u32, height: u32) -> Self {
        let target = Point3::new(10.0, 5.0, 0.0);
        let eyes = [
            (1.0, 1.0),
            (10.0, 0.5),
            (19.0, 1.0),
            (19.5, 5.0),
            (19.0, 9.0),
            (10.0, 9.5),
            (1.0, 9.0),
            (0.5, 5.0),
        ];
        let cameras = eyes
            .iter()
            .map(|&(x, y)| {
                let pose = Pose::look_at(Point3::new(x, y, 7.0), target, -Vec3::z()).unwrap();
                CameraModel::new(width, height, 120.0, 80.0, pose).unwrap()
            })
            .collect();
        Self {
            cameras,
            sigma: 0.0,
            seed: 0,
        }
    }

    /// Cameras looking straight down at [`Scene::plane_only`] from 3 m.
    pub fn plane_only(width: u32, height: u32) -> Self {
        let cameras = [(3.0, 3.0), (7.0, 3.0), (7.0, 7.0), (3.0, 7.0), (5.0, 5.0)]
            .iter()
            .map(|&(x, y)| {
                let pose = Pose::look_at(Point3::new(x, y, 3.0), Point3::new(x, y, 0.0), Vec3::y()).unwrap();
                CameraModel::new(width, height, 90.0, 70.0, pose).unwrap()
            })
            .collect();
        Self {
            cameras,
            sigma: 0.0,
            seed: 0,
        }
    }

    /// `frames` cameras on an ellipse inside [`Scene::box_town`], looking
    /// across the block.
    pub fn box_town_orbit(frames: usize, width: u32, height: u32) -> Self {
        let cameras = (0..frames)
            .map(|i| {
                let a = i as f64 / frames as f64 * std::f64::consts::TAU;
                let eye = Point3::new(10.0 + 8.5 * a.cos(), 5.0 + 4.0 * a.sin(), 6.5 + 0.5 * (3.0 * a).sin());
                let target = Point3::new(10.0 - 3.0 * a.cos(), 5.0 - 1.5 * a.sin(), 0.0);
                let pose = Pose::look_at(eye, target, -Vec3::z()).unwrap();
                CameraModel::new(width, height, 120.0, 80.0, pose).unwrap()
            })
            .collect();
        Self {
            cameras,
            sigma: 0.0,
            seed: 0,
        }
    }

    /// A camera driving down [`Scene::street`], one meter per frame, looking
    /// ahead and slightly down.
    pub fn street_drive(frames: usize, width: u32, height: u32) -> Self {
        let cameras = (0..frames)
            .map(|i| {
                let x = 2.0 + i as f64;
                let eye = Point3::new(x, 0.0, 2.0);
                let target = Point3::new(x + 10.0, 0.0, 0.5);
                let pose = Pose::look_at(eye, target, -Vec3::z()).unwrap();
                CameraModel::new(width, height, 120.0, 80.0, pose).unwrap()
            })
            .collect();
        Self {
            cameras,
            sigma: 0.0,
            seed: 0,
        }
    }

    pub fn render(&self, scene: &Scene) -> Vec<ScanFrame> {
        self.cameras
            .iter()
            .enumerate()
            .map(|(i, cam)| render_scan(scene, cam, self.sigma, self.seed, i as u64))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("sigma {:?}\nseed {}\n", self.sigma, self.seed);
        let mut last: Option<(u32, u32, f64, f64, f64, f64)> = None;
        for c in &self.cameras {
            let cur = (c.width, c.height, c.hfov_deg, c.vfov_deg, c.near, c.far);
            if last != Some(cur) {
                s += &format!(
                    "resolution {} {}\nfov {:?} {:?}\nrange {:?} {:?}\n",
                    c.width, c.height, c.hfov_deg, c.vfov_deg, c.near, c.far
                );
                last = Some(cur);
            }
            let t = c.pose.translation();
            let q = c.pose.quaternion();
            s += &format!("pose {:?} {:?} {:?} {:?} {:?} {:?} {:?}\n", t.x, t.y, t.z, q.i, q.j, q.k, q.w);
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut script = ScanScript {
            cameras: Vec::new(),
            sigma: 0.0,
            seed: 0,
        };
        let (mut w, mut h, mut hfov, mut vfov) = (640u32, 480u32, 120.0, 80.0);
        let (mut near, mut far) = (CameraModel::DEFAULT_NEAR, CameraModel::DEFAULT_FAR);
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| Error::parse(path, n + 1, m);
            let mut tok = line.split_whitespace();
            let kind = tok.next().unwrap();
            let rest: Vec<&str> = tok.collect();
            let nums = || -> Result<Vec<f64>> {
                rest.iter()
                    .map(|t| t.parse::<f64>().map_err(|e| err(format!("`{t}`: {e}"))))
                    .collect()
            };
            let want = |v: &Vec<f64>, k: usize| {
                if v.len() == k && v.iter().all(|x| x.is_finite()) {
                    Ok(())
                } else {
                    Err(err(format!("`{kind}` takes {k} finite numbers")))
                }
            };
            let camera = |pose: Pose| {
                CameraModel::new(w, h, hfov, vfov, pose)
                    .and_then(|c| c.with_range(near, far))
                    .map_err(|e| err(e.to_string()))
            };
            match kind {
                "resolution" => {
                    let parsed: Vec<u32> = rest
                        .iter()
                        .map(|t| t.parse::<u32>().map_err(|e| err(format!("`{t}`: {e}"))))
                        .collect::<Result<_>>()?;
                    if parsed.len() != 2 {
                        return Err(err("`resolution` takes 2 integers".into()));
                    }
                    (w, h) = (parsed[0], parsed[1]);
                }
                "fov" => {
                    let v = nums()?;
                    want(&v, 2)?;
                    (hfov, vfov) = (v[0], v[1]);
                }
                "range" => {
                    let v = nums()?;
                    want(&v, 2)?;
                    (near, far) = (v[0], v[1]);
                }
                "sigma" => {
                    let v = nums()?;
                    want(&v, 1)?;
                    if v[0] < 0.0 {
                        return Err(err("sigma must be >= 0".into()));
                    }
                    script.sigma = v[0];
                }
                "seed" => {
                    script.seed = rest
                        .first()
                        .filter(|_| rest.len() == 1)
                        .ok_or_else(|| err("`seed` takes 1 integer".into()))?
                        .parse()
                        .map_err(|e| err(format!("{e}")))?;
                }
                "pose" => {
                    let v = nums()?;
                    want(&v, 7)?;
                    let pose = Pose::from_translation_quaternion([v[0], v[1], v[2]], [v[3], v[4], v[5], v[6]])
                        .map_err(|e| err(e.to_string()))?;
                    script.cameras.push(camera(pose)?);
                }
                "lookat" => {
                    let v = nums()?;
                    want(&v, 6)?;
                    let pose = Pose::look_at(Point3::new(v[0], v[1], v[2]), Point3::new(v[3], v[4], v[5]), -Vec3::z())
                        .map_err(|e| err(e.to_string()))?;
                    script.cameras.push(camera(pose)?);
                }
                other => return Err(err(format!("unknown directive `{other}`"))),
            }
        }
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}
