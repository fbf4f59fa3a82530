use super::camera::Vec3;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Every quantity along one rendered ray.
#[derive(Debug, Clone, PartialEq)]
pub struct RaySampleSet<T> {
    pub positions: Vec<Vec3<T>>,
    pub deltas: Vec<T>,
    pub sigma: Vec<T>,
    pub color: Vec<T>,
    pub transmittance: Vec<T>,
    pub alpha: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Scalar> RaySampleSet<T> {
    /// Fills transmittance, alpha and weights from densities and spacings.
    pub fn new(positions: Vec<Vec3<T>>, deltas: Vec<T>, sigma: Vec<T>, color: Vec<T>) -> Result<Self> {
        let n = sigma.len();
        if deltas.len() != n || color.len() != n || (!positions.is_empty() && positions.len() != n) {
            return Err(Error::Shape("ray sample arrays differ in length".into()));
        }
        check_inputs(&sigma, &deltas)?;
        let mut transmittance = Vec::with_capacity(n);
        let mut alpha = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut t = T::one();
        let mut used = T::zero();
        for i in 0..n {
            let e = (-(sigma[i] * deltas[i])).exp();
            let next = t * e;
            let w = bounded_weight(t - next, used);
            used += w;
            transmittance.push(t);
            alpha.push(T::one() - e);
            weights.push(w);
            t = next;
        }
        Ok(Self {
            positions,
            deltas,
            sigma,
            color,
            transmittance,
            alpha,
            weights,
        })
    }

    pub fn intensity(&self) -> T {
        let mut c = T::zero();
        for (w, ci) in self.weights.iter().zip(&self.color) {
            c += *w * *ci;
        }
        c
    }
}

/// Pixel intensity `sum_i T_i alpha_i c_i` of a sampled ray.
pub fn composite<T: Scalar>(samples: &RaySampleSet<T>) -> Result<T> {
    composite_segment(&samples.sigma, &samples.color, &samples.deltas)
}

fn check_inputs<T: Scalar>(sigma: &[T], deltas: &[T]) -> Result<()> {
    if let Some(i) = sigma.iter().position(|s| !(*s >= T::zero())) {
        return Err(Error::Contract(format!("density {} at sample {i} is negative", sigma[i])));
    }
    if let Some(i) = deltas.iter().position(|d| !(*d > T::zero())) {
        return Err(Error::Contract(format!("sample spacing {} at {i} is not positive", deltas[i])));
    }
    Ok(())
}

/// `T_i - T_{i+1}` telescopes to at most one in exact arithmetic; rounding
/// can overshoot by an ulp, so the weight is capped by the remaining room.
#[inline]
fn bounded_weight<T: Scalar>(w: T, used: T) -> T {
    w.min(T::one() - used)
}

/// Compositing kernel shared by the learned and analytic renderers.
///
/// Uses `T_{i+1} = T_i exp(-sigma_i delta_i)` and `w_i = T_i - T_{i+1}`,
/// so `T` never increases and the weights sum to `1 - T_{n+1}`.
pub fn composite_segment<T: Scalar>(sigma: &[T], color: &[T], deltas: &[T]) -> Result<T> {
    check_inputs(sigma, deltas)?;
    let mut t = T::one();
    let mut c = T::zero();
    let mut used = T::zero();
    for i in 0..sigma.len() {
        let next = t * (-(sigma[i] * deltas[i])).exp();
        let w = bounded_weight(t - next, used);
        debug_assert!(next <= t && w >= T::zero());
        used += w;
        c += w * color[i];
        t = next;
    }
    debug_assert!(used <= T::one(), "compositing weights sum to {used}");
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_scene_is_black() {
        let c = composite_segment(&[0.0f64; 8], &[0.7; 8], &[0.1; 8]).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn opaque_first_sample_takes_its_color() {
        let c = composite_segment(&[1e6f64, 3.0], &[0.3, 0.9], &[1.0, 1.0]).unwrap();
        assert_eq!(c, 0.3);
    }

    #[test]
    fn two_half_alpha_samples() {
        // alpha = 0.5 when sigma * delta = ln 2
        let s = std::f64::consts::LN_2;
        let c = composite_segment(&[s, s], &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!((c - 0.75).abs() < 1e-15);
    }

    #[test]
    fn negative_density_is_a_contract_violation() {
        assert!(matches!(
            composite_segment(&[0.1f64, -0.1], &[0.5, 0.5], &[1.0, 1.0]),
            Err(Error::Contract(_))
        ));
    }

    proptest! {
        #[test]
        fn weights_behave(
            sigma in proptest::collection::vec(0.0f64..50.0, 1..32),
            seed in 0.0f64..1.0,
        ) {
            let n = sigma.len();
            let deltas: Vec<f64> = (0..n).map(|i| 0.01 + ((i as f64 + seed) * 0.37).fract() * 0.2).collect();
            let color: Vec<f64> = (0..n).map(|i| ((i as f64 + seed) * 0.61).fract()).collect();
            let set = RaySampleSet::new(vec![], deltas, sigma, color).unwrap();
            prop_assert_eq!(set.transmittance[0], 1.0);
            prop_assert!(set.transmittance.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(set.alpha.iter().all(|a| (0.0..=1.0).contains(a)));
            prop_assert!(set.weights.iter().sum::<f64>() <= 1.0);
            let c = composite(&set).unwrap();
            prop_assert!((0.0..=1.0).contains(&c));
            prop_assert_eq!(c, set.intensity());
        }
    }
}
