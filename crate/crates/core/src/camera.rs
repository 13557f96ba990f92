//! Pinhole camera with deterministic per-sample jitter.

use thiserror::Error;

use crate::vec3::Vec3;

const WORLD_UP: Vec3 = Vec3::new(0.0, 1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CameraError {
    #[error("look_at must differ from the camera position")]
    ZeroViewDirection,
    #[error("view direction is parallel to world up (0,1,0)")]
    ParallelToUp,
    #[error("vertical fov must lie in (0, pi) radians, got {0}")]
    BadFov(f64),
    #[error("image dimensions must be >= 1, got {0}x{1}")]
    BadDimensions(u32, u32),
    #[error("spp (samples per pixel) must be >= 1")]
    BadSpp,
    #[error("camera position and look_at must be finite")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    position: Vec3,
    look_at: Vec3,
    vertical_fov: f64,
    width: u32,
    height: u32,
    forward: Vec3,
    right: Vec3,
    up: Vec3,
    tan_half_x: f64,
    tan_half_y: f64,
}

impl Camera {
    pub fn new(position: Vec3, look_at: Vec3, vertical_fov: f64, width: u32, height: u32) -> Result<Self, CameraError> {
        if !position.is_finite() || !look_at.is_finite() {
            return Err(CameraError::NonFinite);
        }
        if !(vertical_fov > 0.0 && vertical_fov < std::f64::consts::PI) {
            return Err(CameraError::BadFov(vertical_fov));
        }
        if width == 0 || height == 0 {
            return Err(CameraError::BadDimensions(width, height));
        }
        let view = look_at - position;
        if view.norm() == 0.0 {
            return Err(CameraError::ZeroViewDirection);
        }
        let forward = view.normalized();
        let side = forward.cross(WORLD_UP);
        if side.norm() < 1e-9 {
            return Err(CameraError::ParallelToUp);
        }
        let right = side.normalized();
        let up = right.cross(forward);
        let tan_half_y = (vertical_fov / 2.0).tan();
        let aspect = f64::from(width) / f64::from(height);
        Ok(Self {
            position,
            look_at,
            vertical_fov,
            width,
            height,
            forward,
            right,
            up,
            tan_half_x: aspect * tan_half_y,
            tan_half_y,
        })
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }

    pub fn look_at(&self) -> Vec3 {
        self.look_at
    }

    pub fn vertical_fov(&self) -> f64 {
        self.vertical_fov
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Orthonormal `(forward, right, up)` frame.
    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        (self.forward, self.right, self.up)
    }

    /// Primary ray through pixel `(px, py)` for antialiasing sample `sample`.
    /// Row 0 is the top of the image.
    pub fn generate_ray(&self, px: u32, py: u32, sample: u32, spec: &SampleSpec) -> (Vec3, Vec3) {
        let (sx, sy) = if spec.spp > 1 {
            sample_offset(spec.seed, px, py, sample)
        } else {
            (0.5, 0.5)
        };
        self.ray_through(
            (f64::from(px) + sx) / f64::from(self.width),
            (f64::from(py) + sy) / f64::from(self.height),
        )
    }

    /// Ray through normalized image coordinates `(u, v)` in `[0, 1]²`.
    pub fn ray_through(&self, u: f64, v: f64) -> (Vec3, Vec3) {
        let dir = self.forward
            + ((2.0 * u - 1.0) * self.tan_half_x) * self.right
            + ((1.0 - 2.0 * v) * self.tan_half_y) * self.up;
        (self.position, dir.normalized())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSpec {
    pub spp: u32,
    pub seed: u64,
}

impl SampleSpec {
    pub fn new(spp: u32, seed: u64) -> Result<Self, CameraError> {
        if spp == 0 {
            return Err(CameraError::BadSpp);
        }
        Ok(Self { spp, seed })
    }
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self { spp: 1, seed: 0 }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn unit_float(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Stateless sub-pixel offset in `[0, 1)²` keyed by `(seed, px, py, sample)`.
pub fn sample_offset(seed: u64, px: u32, py: u32, sample: u32) -> (f64, f64) {
    let key = splitmix(splitmix(splitmix(seed ^ u64::from(px)) ^ u64::from(py)) ^ u64::from(sample));
    (unit_float(splitmix(key)), unit_float(splitmix(key ^ 0xD1B5_4A32_D192_ED03)))
}
