//! Basic geometric value types: points, rigid poses, and per-voxel plane
//! statistics with a closed 3x3 symmetric eigensolver.

use nalgebra::{Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3, Vector4};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = Vector3<f64>;

/// Tolerance used when validating rotation matrices.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

#[inline]
pub fn is_finite_point(p: &Point3) -> bool {
    p.x.is_finite() && p.y.is_finite() && p.z.is_finite()
}

/// Rigid transform mapping sensor-frame coordinates into the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Builds a pose from a rotation matrix, rejecting anything that is not
    /// a proper rotation.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        let pose = Self {
            rotation,
            translation,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn from_quaternion(q: UnitQuaternion<f64>, translation: Vec3) -> Result<Self> {
        Self::new(q.to_rotation_matrix().into_inner(), translation)
    }

    /// Quaternion given in `(qx, qy, qz, qw)` order. The quaternion is
    /// normalized; a zero or non-finite quaternion is rejected.
    pub fn from_translation_quaternion(t: [f64; 3], q: [f64; 4]) -> Result<Self> {
        let raw = nalgebra::Quaternion::new(q[3], q[0], q[1], q[2]);
        let norm = raw.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::InvalidPose(format!("degenerate quaternion {q:?}")));
        }
        Self::from_quaternion(UnitQuaternion::from_quaternion(raw), Vec3::from(t))
    }

    /// Camera-style pose at `eye` whose +z axis points at `target`; +y points
    /// as close to `down` as possible.
    pub fn look_at(eye: Point3, target: Point3, down: Vec3) -> Result<Self> {
        let forward = target - eye;
        if forward.norm() < 1e-12 {
            return Err(Error::InvalidPose("look_at with eye == target".into()));
        }
        let z = forward.normalize();
        let x = down.cross(&z);
        if x.norm() < 1e-9 {
            return Err(Error::InvalidPose("look_at direction parallel to up".into()));
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let rotation = Matrix3::from_columns(&[x, y, z]);
        Self::new(rotation, eye.coords)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rotation.iter().all(|v| v.is_finite()) || !self.translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidPose("non-finite entries".into()));
        }
        let gram = self.rotation.transpose() * self.rotation;
        let off = (gram - Matrix3::identity()).abs().max();
        let det = self.rotation.determinant();
        if off > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::InvalidPose(format!(
                "rotation not orthonormal (|RᵀR - I| = {off:.3e}, det = {det})"
            )));
        }
        Ok(())
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn position(&self) -> Point3 {
        Point3::from(self.translation)
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation))
    }

    #[inline]
    pub fn transform_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    #[inline]
    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// Maps world coordinates back into this pose's local frame.
    #[inline]
    pub fn inverse_transform_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation.transpose() * (p.coords - self.translation))
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

/// `R·p + t`.
#[inline]
pub fn transform_point(pose: &Pose, p: &Point3) -> Point3 {
    pose.transform_point(p)
}

/// Homogeneous-coordinate counterpart of [`transform_point`], kept for
/// cross-checking.
pub fn transform_point_homogeneous(pose: &Pose, p: &Point3) -> Point3 {
    let h = pose.to_homogeneous() * Vector4::new(p.x, p.y, p.z, 1.0);
    Point3::new(h.x / h.w, h.y / h.w, h.z / h.w)
}

/// Eigen-decomposition of a symmetric 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEigen3 {
    /// Sorted descending.
    pub values: [f64; 3],
    /// `vectors[i]` pairs with `values[i]`.
    pub vectors: [Vec3; 3],
}

/// Cyclic Jacobi sweeps on a symmetric 3x3 matrix. Eigenvalues are returned
/// in descending order; each eigenvector is signed so that its z-component
/// (or its first nonzero component) is positive.
pub fn eig_sym3(a: &Matrix3<f64>) -> SymEigen3 {
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = Matrix3::<f64>::identity();
    let scale = m.abs().max();
    if scale > 0.0 && scale.is_finite() {
        for _sweep in 0..64 {
            let off = m[(0, 1)].powi(2) + m[(0, 2)].powi(2) + m[(1, 2)].powi(2);
            if off == 0.0 {
                break;
            }
            for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
                let apq = m[(p, q)];
                // Negligible against the diagonal: annihilate outright.
                if apq.abs() <= 1e-18 * (m[(p, p)].abs() + m[(q, q)].abs()).max(scale) {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // m <- Jᵀ m J for the Givens rotation J in the (p, q) plane.
                for k in 0..3 {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..3 {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..3 {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.map(|i| m[(i, i)]);
    let vectors = order.map(|i| canonical_sign(v.column(i).into_owned().normalize()));
    SymEigen3 { values, vectors }
}

fn canonical_sign(u: Vec3) -> Vec3 {
    let pivot = if u.z.abs() > 1e-12 {
        u.z
    } else if u.x.abs() > 1e-12 {
        u.x
    } else {
        u.y
    };
    if pivot < 0.0 {
        -u
    } else {
        u
    }
}

/// Running first and second moments of a voxel's points plus the cached
/// principal axes.
///
/// Sums are accumulated relative to the first point ever added, which keeps
/// the covariance well conditioned far from the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneStats {
    count: usize,
    origin: Vec3,
    sum: Vec3,
    sum_outer: Matrix3<f64>,
    mean: Vec3,
    covariance: Matrix3<f64>,
    eigen: SymEigen3,
}

impl Default for PlaneStats {
    fn default() -> Self {
        Self::new()
    }
}

impl PlaneStats {
    pub fn new() -> Self {
        Self {
            count: 0,
            origin: Vec3::zeros(),
            sum: Vec3::zeros(),
            sum_outer: Matrix3::zeros(),
            mean: Vec3::zeros(),
            covariance: Matrix3::zeros(),
            eigen: eig_sym3(&Matrix3::zeros()),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Self {
        let mut s = Self::new();
        s.add_points(points);
        s
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Point3 {
        Point3::from(self.mean)
    }

    pub fn covariance(&self) -> &Matrix3<f64> {
        &self.covariance
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        self.eigen.values
    }

    pub fn eigenvectors(&self) -> [Vec3; 3] {
        self.eigen.vectors
    }

    /// Plane normal: the eigenvector of the smallest eigenvalue.
    pub fn normal(&self) -> Vec3 {
        self.eigen.vectors[2]
    }

    fn accumulate(&mut self, p: &Point3) {
        if self.count == 0 {
            self.origin = p.coords;
        }
        let d = p.coords - self.origin;
        self.count += 1;
        self.sum += d;
        self.sum_outer += d * d.transpose();
    }

    fn refresh(&mut self) {
        if self.count == 0 {
            self.mean = Vec3::zeros();
            self.covariance = Matrix3::zeros();
        } else {
            let n = self.count as f64;
            let local_mean = self.sum / n;
            self.mean = self.origin + local_mean;
            let cov = self.sum_outer / n - local_mean * local_mean.transpose();
            self.covariance = (cov + cov.transpose()) * 0.5;
        }
        self.eigen = eig_sym3(&self.covariance);
    }

    pub fn add_point(&mut self, p: &Point3) {
        self.accumulate(p);
        self.refresh();
    }

    pub fn add_points<'a>(&mut self, points: impl IntoIterator<Item = &'a Point3>) {
        for p in points {
            self.accumulate(p);
        }
        self.refresh();
    }

    /// Combines two independent accumulations.
    pub fn merge(&mut self, other: &PlaneStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        // Re-express the other sums relative to our origin.
        let shift = other.origin - self.origin;
        let n = other.count as f64;
        let sum = other.sum + shift * n;
        let sum_outer = other.sum_outer
            + other.sum * shift.transpose()
            + shift * other.sum.transpose()
            + shift * shift.transpose() * n;
        self.count += other.count;
        self.sum += sum;
        self.sum_outer += sum_outer;
        self.refresh();
    }
}

/// Returns `stats` extended with `new_points`.
pub fn incremental_plane_stats(stats: &PlaneStats, new_points: &[Point3]) -> PlaneStats {
    let mut out = stats.clone();
    out.add_points(new_points);
    out
}
