use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type Vec3<T> = [T; 3];

#[inline]
pub fn sub3<T: Scalar>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn norm3<T: Scalar>(a: Vec3<T>) -> T {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

#[inline]
pub fn normalize3<T: Scalar>(a: Vec3<T>) -> Vec3<T> {
    let n = norm3(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

#[inline]
pub fn cross3<T: Scalar>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray<T> {
    pub origin: Vec3<T>,
    pub dir: Vec3<T>,
}

impl<T: Scalar> Ray<T> {
    #[inline]
    pub fn at(&self, depth: T) -> Vec3<T> {
        [
            self.origin[0] + depth * self.dir[0],
            self.origin[1] + depth * self.dir[1],
            self.origin[2] + depth * self.dir[2],
        ]
    }
}

/// Pinhole camera. The pose is camera-to-world; the camera looks down its
/// local -z axis with +y up and +x right.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera<T> {
    pub width: u32,
    pub height: u32,
    pub focal: T,
    pub cx: T,
    pub cy: T,
    pub pose: [[T; 4]; 4],
    pub near: T,
    pub far: T,
}

impl<T: Scalar> Camera<T> {
    pub fn new(width: u32, height: u32, focal: T, pose: [[T; 4]; 4], near: T, far: T) -> Result<Self> {
        let cam = Self {
            width,
            height,
            focal,
            cx: T::lit(f64::from(width) / 2.0),
            cy: T::lit(f64::from(height) / 2.0),
            pose,
            near,
            far,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Focal length from the horizontal field of view.
    pub fn from_fov(width: u32, height: u32, fov_x: T, pose: [[T; 4]; 4], near: T, far: T) -> Result<Self> {
        let focal = T::lit(0.5 * f64::from(width)) / (fov_x * T::lit(0.5)).tan();
        Self::new(width, height, focal, pose, near, far)
    }

    pub fn fov_x(&self) -> T {
        T::lit(2.0) * (T::lit(0.5 * f64::from(self.width)) / self.focal).atan()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.near > T::zero() && self.near < self.far) {
            return Err(Error::Argument(format!(
                "need 0 < near < far, got {} / {}",
                self.near, self.far
            )));
        }
        if !(self.focal > T::zero()) || self.width == 0 || self.height == 0 {
            return Err(Error::Argument("camera needs positive focal length and resolution".into()));
        }
        let r = |i: usize, j: usize| self.pose[i][j].as_f64();
        let tol = 1e-6;
        for a in 0..3 {
            for b in 0..3 {
                let d: f64 = (0..3).map(|k| r(k, a) * r(k, b)).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                if (d - want).abs() > tol {
                    return Err(Error::Argument("camera rotation is not orthonormal".into()));
                }
            }
        }
        let det = r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) - r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0))
            + r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
        if (det - 1.0).abs() > tol {
            return Err(Error::Argument(format!("camera rotation has determinant {det}")));
        }
        Ok(())
    }

    pub fn position(&self) -> Vec3<T> {
        [self.pose[0][3], self.pose[1][3], self.pose[2][3]]
    }

    /// Ray through the centre of pixel `(x, y)`.
    pub fn ray(&self, x: u32, y: u32) -> Result<Ray<T>> {
        if x >= self.width || y >= self.height {
            return Err(Error::Argument(format!(
                "pixel ({x}, {y}) outside {}x{}",
                self.width, self.height
            )));
        }
        let half = T::lit(0.5);
        let local = [
            (T::lit(f64::from(x)) + half - self.cx) / self.focal,
            -(T::lit(f64::from(y)) + half - self.cy) / self.focal,
            -T::one(),
        ];
        let p = &self.pose;
        let world = [
            p[0][0] * local[0] + p[0][1] * local[1] + p[0][2] * local[2],
            p[1][0] * local[0] + p[1][1] * local[1] + p[1][2] * local[2],
            p[2][0] * local[0] + p[2][1] * local[1] + p[2][2] * local[2],
        ];
        Ok(Ray {
            origin: self.position(),
            dir: normalize3(world),
        })
    }

    /// Rays for each listed pixel, in order.
    pub fn rays(&self, pixels: &[(u32, u32)]) -> Result<Vec<Ray<T>>> {
        pixels.iter().map(|&(x, y)| self.ray(x, y)).collect()
    }

    /// Every pixel, row-major.
    pub fn all_rays(&self) -> Vec<Ray<T>> {
        let mut out = Vec::with_capacity((self.width * self.height) as usize);
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(self.ray(x, y).expect("pixel in range"));
            }
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> Camera<U> {
        let c = |v: T| U::lit(v.as_f64());
        Camera {
            width: self.width,
            height: self.height,
            focal: c(self.focal),
            cx: c(self.cx),
            cy: c(self.cy),
            pose: self.pose.map(|row| row.map(c)),
            near: c(self.near),
            far: c(self.far),
        }
    }
}

/// Free-function form of [`Camera::rays`].
pub fn camera_rays<T: Scalar>(camera: &Camera<T>, pixels: &[(u32, u32)]) -> Result<Vec<Ray<T>>> {
    camera.rays(pixels)
}

/// Camera-to-world pose at `eye` looking at `target`.
pub fn look_at<T: Scalar>(eye: Vec3<T>, target: Vec3<T>, up: Vec3<T>) -> [[T; 4]; 4] {
    let back = normalize3(sub3(eye, target));
    let right = normalize3(cross3(up, back));
    let true_up = cross3(back, right);
    let z = T::zero();
    [
        [right[0], true_up[0], back[0], eye[0]],
        [right[1], true_up[1], back[1], eye[1]],
        [right[2], true_up[2], back[2], eye[2]],
        [z, z, z, T::one()],
    ]
}

pub fn identity_pose<T: Scalar>() -> [[T; 4]; 4] {
    let (o, z) = (T::one(), T::zero());
    [[o, z, z, z], [z, o, z, z], [z, z, o, z], [z, z, z, o]]
}
