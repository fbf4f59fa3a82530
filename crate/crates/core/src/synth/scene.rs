use crate::error::{Error, Result};
use crate::radiance::{composite_segment, sample_deltas, stratified_samples, Camera, Vec3};
use crate::scalar::Scalar;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    Sphere { radius: f64 },
    Box { half_extents: [f64; 3] },
}

impl Shape {
    fn contains(&self, p: Vec3<f64>) -> bool {
        match self {
            Shape::Sphere { radius } => p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= radius * radius,
            Shape::Box { half_extents: h } => (0..3).all(|i| p[i].abs() <= h[i]),
        }
    }

    fn bounding_radius(&self) -> f64 {
        match self {
            Shape::Sphere { radius } => *radius,
            Shape::Box { half_extents: h } => (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt(),
        }
    }
}

/// Rigid pose at time `t`: rotation by `yaw` radians about +y, then translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub t: f64,
    pub translation: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Primitive {
    pub shape: Shape,
    pub albedo: f64,
    pub density: f64,
    pub keyframes: Vec<Keyframe>,
}

impl Primitive {
    pub fn fixed(shape: Shape, albedo: f64, density: f64, at: [f64; 3]) -> Self {
        Self {
            shape,
            albedo,
            density,
            keyframes: vec![Keyframe {
                t: 0.0,
                translation: at,
                yaw: 0.0,
            }],
        }
    }

    /// Pose at `t`, linearly interpolated between keyframes and held
    /// constant outside them.
    pub fn pose(&self, t: f64) -> Keyframe {
        let k = &self.keyframes;
        let i = k.partition_point(|f| f.t <= t);
        if i == 0 {
            return Keyframe { t, ..k[0] };
        }
        if i == k.len() {
            return Keyframe { t, ..k[k.len() - 1] };
        }
        let (a, b) = (k[i - 1], k[i]);
        let s = (t - a.t) / (b.t - a.t);
        let lerp = |u: f64, v: f64| u + s * (v - u);
        Keyframe {
            t,
            translation: [0, 1, 2].map(|j| lerp(a.translation[j], b.translation[j])),
            yaw: lerp(a.yaw, b.yaw),
        }
    }

    fn to_local(&self, x: Vec3<f64>, t: f64) -> Vec3<f64> {
        let pose = self.pose(t);
        let d = [0, 1, 2].map(|j| x[j] - pose.translation[j]);
        let (s, c) = pose.yaw.sin_cos();
        [c * d[0] - s * d[2], d[1], s * d[0] + c * d[2]]
    }
}

/// Closed-form dynamic scene inside the origin-centred box of edge `bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticScene {
    pub bound: f64,
    pub primitives: Vec<Primitive>,
}

impl AnalyticScene {
    pub fn new(bound: f64, primitives: Vec<Primitive>) -> Result<Self> {
        let scene = Self { bound, primitives };
        scene.validate()?;
        Ok(scene)
    }

    pub fn empty(bound: f64) -> Self {
        Self {
            bound,
            primitives: Vec::new(),
        }
    }

    /// Opaque sphere sliding along +x across the middle of the box.
    pub fn translating_sphere() -> Self {
        let k = |t: f64, x: f64| Keyframe {
            t,
            translation: [x, 0.0, 0.0],
            yaw: 0.0,
        };
        Self {
            bound: 4.0,
            primitives: vec![Primitive {
                shape: Shape::Sphere { radius: 0.6 },
                albedo: 0.8,
                density: 40.0,
                keyframes: vec![k(0.0, -0.8), k(1.0, 0.8)],
            }],
        }
    }

    /// Cube that slides along +x while turning a quarter turn.
    pub fn translating_box() -> Self {
        Self {
            bound: 4.0,
            primitives: vec![Primitive {
                shape: Shape::Box {
                    half_extents: [0.45, 0.45, 0.45],
                },
                albedo: 0.7,
                density: 40.0,
                keyframes: vec![
                    Keyframe {
                        t: 0.0,
                        translation: [-0.8, 0.0, 0.0],
                        yaw: 0.0,
                    },
                    Keyframe {
                        t: 1.0,
                        translation: [0.8, 0.0, 0.0],
                        yaw: std::f64::consts::FRAC_PI_2,
                    },
                ],
            }],
        }
    }

    pub fn static_sphere() -> Self {
        Self {
            bound: 4.0,
            primitives: vec![Primitive::fixed(Shape::Sphere { radius: 0.6 }, 0.8, 40.0, [0.0; 3])],
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "translating_sphere" => Ok(Self::translating_sphere()),
            "translating_box" => Ok(Self::translating_box()),
            "static_sphere" => Ok(Self::static_sphere()),
            "empty" => Ok(Self::empty(4.0)),
            other => Err(Error::Config(format!(
                "unknown scene preset {other:?} (translating_sphere, translating_box, static_sphere, empty)"
            ))),
        }
    }

    /// Checks keyframes and that every primitive stays inside the box.
    /// Linear interpolation keeps the extremes at keyframes, and yaw never
    /// changes the bounding radius.
    pub fn validate(&self) -> Result<()> {
        if !(self.bound > 0.0) {
            return Err(Error::Argument("scene bound must be positive".into()));
        }
        let half = self.bound / 2.0;
        for (i, p) in self.primitives.iter().enumerate() {
            if p.keyframes.is_empty() {
                return Err(Error::Argument(format!("primitive {i} has no keyframes")));
            }
            if p.keyframes.windows(2).any(|w| !(w[0].t < w[1].t)) {
                return Err(Error::Argument(format!("primitive {i}: keyframe times must increase")));
            }
            if !(0.0..=1.0).contains(&p.albedo) || !(p.density >= 0.0) {
                return Err(Error::Argument(format!("primitive {i}: albedo outside [0,1] or negative density")));
            }
            let r = p.shape.bounding_radius();
            for k in &p.keyframes {
                if k.translation.iter().any(|c| c.abs() + r >= half) {
                    return Err(Error::Argument(format!(
                        "primitive {i} leaves the scene box at t = {}",
                        k.t
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when nothing moves, so every view sees a constant image.
    pub fn is_static(&self) -> bool {
        self.primitives.iter().all(|p| {
            p.keyframes
                .windows(2)
                .all(|w| w[0].translation == w[1].translation && w[0].yaw == w[1].yaw)
        })
    }
}

/// `(albedo, density)` of the first primitive containing `x` at time `t`,
/// `(0, 0)` in empty space.
pub fn gt_query(scene: &AnalyticScene, x: Vec3<f64>, t: f64) -> (f64, f64) {
    for p in &scene.primitives {
        if p.shape.contains(p.to_local(x, t)) {
            return (p.albedo, p.density);
        }
    }
    (0.0, 0.0)
}

/// Ground-truth intensity image at `t`, using the same stratum-midpoint
/// quadrature and compositing kernel as the learned renderer.
pub fn gt_render<T: Scalar>(scene: &AnalyticScene, camera: &Camera<T>, t: f64, samples_per_ray: usize) -> Result<Vec<T>> {
    let rays = camera.all_rays();
    rays.par_iter()
        .map(|ray| {
            let depths = stratified_samples::<T, ChaCha8Rng>(camera.near, camera.far, samples_per_ray, None);
            let deltas = sample_deltas(&depths, camera.near, camera.far);
            let mut sigma = Vec::with_capacity(depths.len());
            let mut color = Vec::with_capacity(depths.len());
            for d in &depths {
                let p = ray.at(*d).map(|v| v.as_f64());
                let (c, s) = gt_query(scene, p, t);
                sigma.push(T::lit(s));
                color.push(T::lit(c));
            }
            composite_segment(&sigma, &color, &deltas)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radiance::look_at;
    use rand::{Rng, SeedableRng};

    #[test]
    fn query_inside_and_outside() {
        let s = AnalyticScene::static_sphere();
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(gt_query(&s, [0.1, 0.2, -0.3], t), (0.8, 40.0));
            assert_eq!(gt_query(&s, [1.5, 0.0, 0.0], t), (0.0, 0.0));
        }
    }

    #[test]
    fn rigid_translation_identity() {
        let k = |t: f64, x: f64| Keyframe {
            t,
            translation: [x, 0.0, 0.0],
            yaw: 0.0,
        };
        let s = AnalyticScene::new(
            4.0,
            vec![Primitive {
                shape: Shape::Sphere { radius: 0.5 },
                albedo: 0.6,
                density: 3.0,
                keyframes: vec![k(0.0, -0.5), k(1.0, 0.5)],
            }],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let p = [rng.gen_range(-1.5..1.5), rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7)];
            let t: f64 = rng.gen();
            assert_eq!(gt_query(&s, p, t), gt_query(&s, [p[0] - t, p[1], p[2]], 0.0));
        }
    }

    #[test]
    fn yaw_rotates_box_corners() {
        let s = AnalyticScene::translating_box();
        // at t = 1 the cube has turned 90 degrees, which maps it onto itself
        let c = s.primitives[0].pose(1.0).translation;
        assert_eq!(gt_query(&s, [c[0] + 0.44, 0.44, c[2] + 0.44], 1.0).1, 40.0);
        // at t = 0.5 it has turned 45 degrees, so the axis-aligned corner is empty
        let c = s.primitives[0].pose(0.5).translation;
        assert_eq!(gt_query(&s, [c[0] + 0.44, 0.0, c[2] + 0.44], 0.5).1, 0.0);
        assert_eq!(gt_query(&s, [c[0] + 0.6, 0.0, c[2]], 0.5).1, 40.0);
    }

    #[test]
    fn rejects_escaping_primitive() {
        let p = Primitive::fixed(Shape::Sphere { radius: 0.5 }, 0.5, 1.0, [1.6, 0.0, 0.0]);
        assert!(AnalyticScene::new(4.0, vec![p]).is_err());
        assert!(AnalyticScene::preset("nope").is_err());
    }

    fn camera(w: u32) -> Camera<f64> {
        let pose = look_at([0.0, 0.0, 4.0], [0.0; 3], [0.0, 1.0, 0.0]);
        Camera::from_fov(w, w, 40f64.to_radians(), pose, 1.0, 7.0).unwrap()
    }

    #[test]
    fn empty_scene_renders_black() {
        let img = gt_render(&AnalyticScene::empty(4.0), &camera(16), 0.5, 32).unwrap();
        assert!(img.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sphere_silhouette_matches_projection() {
        let cam = camera(64);
        let scene = AnalyticScene::new(
            4.0,
            vec![Primitive::fixed(Shape::Sphere { radius: 0.6 }, 1.0, 1e4, [0.0; 3])],
        )
        .unwrap();
        let img = gt_render(&scene, &cam, 0.0, 512).unwrap();
        // tangent cone of a sphere of radius r seen from distance D
        let (r, dist) = (0.6f64, 4.0f64);
        let pixel_radius = cam.focal * (r / (dist * dist - r * r).sqrt());
        for y in 0..64 {
            for x in 0..64 {
                let dx = x as f64 + 0.5 - 32.0;
                let dy = y as f64 + 0.5 - 32.0;
                let rr = (dx * dx + dy * dy).sqrt();
                let v = img[y * 64 + x];
                if rr < pixel_radius - 1.0 {
                    assert!(v > 0.99, "inside pixel ({x},{y}) = {v}");
                } else if rr > pixel_radius + 1.0 {
                    assert_eq!(v, 0.0, "outside pixel ({x},{y})");
                }
            }
        }
        let again = gt_render(&scene, &cam, 0.0, 512).unwrap();
        assert_eq!(img, again);
    }
}
