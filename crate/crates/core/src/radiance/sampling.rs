use crate::scalar::Scalar;
use rand::Rng;

/// `count` depths in `[near, far]`, one per equal sub-interval: the
/// midpoint without jitter, a uniform draw with it.
pub fn stratified_samples<T: Scalar, R: Rng>(near: T, far: T, count: usize, jitter: Option<&mut R>) -> Vec<T> {
    let count = count.max(2);
    let step = (far - near) / T::lit(count as f64);
    match jitter {
        None => (0..count)
            .map(|i| near + step * (T::lit(i as f64) + T::lit(0.5)))
            .collect(),
        Some(rng) => (0..count)
            .map(|i| {
                let u: f64 = rng.gen();
                near + step * (T::lit(i as f64) + T::lit(u))
            })
            .collect(),
    }
}

/// Spacing to the next sample; the last sample uses the nominal stratum width.
pub fn sample_deltas<T: Scalar>(depths: &[T], near: T, far: T) -> Vec<T> {
    let nominal = (far - near) / T::lit(depths.len().max(1) as f64);
    let mut out: Vec<T> = depths.windows(2).map(|w| w[1] - w[0]).collect();
    out.push(nominal);
    // jittered neighbours can land arbitrarily close; keep spacings positive
    let floor = nominal * T::lit(1e-6);
    out.iter_mut().for_each(|d| *d = d.max(floor));
    out
}
