//! Pinhole cameras, rigid poses and the conical frustum test.
//!
//! Conventions: the world frame is z-up. Camera frames follow the usual
//! vision layout (x right, y down, z forward), and a [`Pose`] maps camera
//! coordinates into the world. Yaw is measured in the world xy-plane from
//! +x towards +y; pitch is positive looking up. Angles are degrees at every
//! public boundary and radians internally.

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type Vec3 = Vector3<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Square-pixel camera whose horizontal field of view is `fov_deg`.
    pub fn from_fov(width: usize, height: usize, fov_deg: f64) -> Result<Self> {
        if !(fov_deg > 0.0 && fov_deg < 180.0) {
            return Err(invalid(format!("fov {fov_deg} outside (0, 180)")));
        }
        let f = (width as f64 / 2.0) / (fov_deg.to_radians() / 2.0).tan();
        Self::new(f, f, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(invalid("focal lengths must be finite and positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(invalid("image size must be at least 1x1"));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(invalid("principal point outside the image"));
        }
        Ok(())
    }

    /// Continuous coordinate of the center of pixel `(u, v)`.
    #[inline]
    pub fn pixel_center(u: usize, v: usize) -> Pixel {
        Pixel {
            x: u as f64 + 0.5,
            y: v as f64 + 0.5,
        }
    }

    /// Unnormalized camera-frame ray `K⁻¹ x̃` (z component is 1).
    #[inline]
    pub fn unproject_ray(&self, pixel: Pixel) -> Vec3 {
        Vec3::new(
            (pixel.x - self.cx) / self.fx,
            (pixel.y - self.cy) / self.fy,
            1.0,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub x: f64,
    pub y: f64,
}

impl Pixel {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Rigid camera-to-world transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    rotation: Rotation3<f64>,
    translation: Vec3,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Builds a pose from a rotation matrix, rejecting anything that is not
    /// orthonormal with determinant +1 (within 1e-6).
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(invalid("pose contains non-finite values"));
        }
        let gram = rotation.transpose() * rotation;
        if (gram - Matrix3::identity()).abs().max() > 1e-6 {
            return Err(invalid("rotation is not orthonormal"));
        }
        if (rotation.determinant() - 1.0).abs() > 1e-6 {
            return Err(invalid("rotation determinant is not +1"));
        }
        Ok(Self {
            rotation: Rotation3::from_matrix_unchecked(rotation),
            translation,
        })
    }

    pub fn from_parts(rotation: Rotation3<f64>, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Camera at `position` looking along the direction given by yaw/pitch
    /// (degrees), with no roll relative to the world z-up axis.
    pub fn from_yaw_pitch(position: Vec3, yaw_deg: f64, pitch_deg: f64) -> Self {
        let (yaw, pitch) = (yaw_deg.to_radians(), pitch_deg.to_radians());
        let forward = Vec3::new(pitch.cos() * yaw.cos(), pitch.cos() * yaw.sin(), pitch.sin());
        let right = Vec3::new(yaw.sin(), -yaw.cos(), 0.0);
        let down = forward.cross(&right);
        let m = Matrix3::from_columns(&[right, down, forward]);
        Self {
            rotation: Rotation3::from_matrix_unchecked(m),
            translation: position,
        }
    }

    pub fn rotation(&self) -> &Rotation3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    pub fn forward(&self) -> Vec3 {
        self.rotation.matrix().column(2).into_owned()
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let r_inv = self.rotation.inverse();
        Pose {
            rotation: r_inv,
            translation: -(r_inv * self.translation),
        }
    }

    #[inline]
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// World point expressed in the camera frame.
    #[inline]
    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation.inverse_transform_vector(&(p - self.translation))
    }
}

/// Viewing cone: full opening angle plus near/far depth limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrustumSpec {
    pub fov_deg: f64,
    pub min_depth: f64,
    pub max_depth: f64,
}

impl Default for FrustumSpec {
    fn default() -> Self {
        Self {
            fov_deg: 90.0,
            min_depth: 0.05,
            max_depth: 5.0,
        }
    }
}

impl FrustumSpec {
    pub fn new(fov_deg: f64, min_depth: f64, max_depth: f64) -> Result<Self> {
        let spec = Self {
            fov_deg,
            min_depth,
            max_depth,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(invalid(format!("fov {} outside (0, 180)", self.fov_deg)));
        }
        if !(self.min_depth > 0.0 && self.min_depth < self.max_depth && self.max_depth.is_finite()) {
            return Err(invalid("depth range must satisfy 0 < min_depth < max_depth"));
        }
        Ok(())
    }

    pub fn half_angle(&self) -> f64 {
        (self.fov_deg / 2.0).to_radians()
    }

    pub fn cos_half_angle(&self) -> f64 {
        self.half_angle().cos()
    }
}

/// Back-projects a pixel at the given camera-frame depth into the world.
pub fn back_project(
    pixel: Pixel,
    depth: f64,
    intrinsics: &CameraIntrinsics,
    pose: &Pose,
) -> Result<Vec3> {
    if !(depth.is_finite() && depth > 0.0) {
        return Err(invalid(format!("depth must be finite and positive, got {depth}")));
    }
    if !(pixel.x.is_finite() && pixel.y.is_finite()) {
        return Err(invalid("pixel coordinates must be finite"));
    }
    Ok(pose.transform_point(&(intrinsics.unproject_ray(pixel) * depth)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Projection {
    Visible { pixel: Pixel, depth: f64 },
    BehindCamera,
}

pub fn project(point: &Vec3, intrinsics: &CameraIntrinsics, pose: &Pose) -> Projection {
    let pc = pose.to_camera(point);
    if pc.z <= 0.0 {
        return Projection::BehindCamera;
    }
    Projection::Visible {
        pixel: Pixel {
            x: intrinsics.fx * pc.x / pc.z + intrinsics.cx,
            y: intrinsics.fy * pc.y / pc.z + intrinsics.cy,
        },
        depth: pc.z,
    }
}

/// Conical frustum membership: camera-frame depth within the depth range
/// and angle to the optical axis at most half the field of view.
#[inline]
pub fn in_frustum(point: &Vec3, pose: &Pose, spec: &FrustumSpec) -> bool {
    let pc = pose.to_camera(point);
    if pc.z < spec.min_depth || pc.z > spec.max_depth {
        return false;
    }
    pc.z >= pc.norm() * spec.cos_half_angle()
}

/// Yaw and pitch (degrees) of a world direction; yaw in `[0, 360)`.
pub fn yaw_pitch_of(direction: &Vec3) -> (f64, f64) {
    let horiz = (direction.x * direction.x + direction.y * direction.y).sqrt();
    let yaw = direction.y.atan2(direction.x).to_degrees().rem_euclid(360.0);
    let pitch = direction.z.atan2(horiz).to_degrees();
    (yaw, pitch)
}

/// Smallest absolute difference between two angles in degrees.
pub fn angle_diff_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}
