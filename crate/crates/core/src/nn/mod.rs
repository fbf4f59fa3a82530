//! Differentiable building blocks: the tape, multilayer perceptrons,
//! Fourier-feature positional encoding and the Adam optimizer.

mod adam;
mod mlp;
mod tape;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use mlp::{mlp_forward, Activation, Layer, MlpParams};
pub use tape::{Adjoints, LayerGrad, LayerSlot, Mat, NodeId, ParamGrads, Tape};

use crate::scalar::Scalar;

/// Output width of [`positional_encode`] for a `dim`-vector.
pub fn encoded_len(dim: usize, n_freq: usize, include_input: bool) -> usize {
    dim * (usize::from(include_input) + 2 * n_freq)
}

/// `[v] ++ [sin(2^k pi v), cos(2^k pi v)]` for `k = 0..n_freq`, where each
/// sin/cos block spans all dimensions of `v`.
pub fn positional_encode<T: Scalar>(v: &[T], n_freq: usize, include_input: bool) -> Vec<T> {
    let mut out = vec![T::zero(); encoded_len(v.len(), n_freq, include_input)];
    encode_into(v, n_freq, include_input, &mut out);
    out
}

pub(crate) fn encode_into<T: Scalar>(v: &[T], n_freq: usize, include_input: bool, out: &mut [T]) {
    let dim = v.len();
    let mut off = 0;
    if include_input {
        out[..dim].copy_from_slice(v);
        off = dim;
    }
    let pi = T::lit(std::f64::consts::PI);
    let two = T::lit(2.0);
    for (j, &x) in v.iter().enumerate() {
        let mut o = off + j;
        let (mut s, mut c) = (T::zero(), T::one());
        for k in 0..n_freq {
            // double-angle steps, re-anchored every few octaves to bound drift
            if k % RESEED == 0 {
                (s, c) = (pi * T::lit(f64::from(1u32 << k)) * x).sin_cos();
            } else {
                (s, c) = (two * s * c, (c - s) * (c + s));
            }
            out[o] = s;
            out[o + dim] = c;
            o += 2 * dim;
        }
    }
}

/// Octaves between exact `sin_cos` evaluations in [`encode_into`].
const RESEED: usize = 4;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matches_direct_trigonometry() {
        let v = [0.37f64, -1.91, 1.999];
        let e = positional_encode(&v, 10, true);
        let e32 = positional_encode(&v.map(|x| x as f32), 10, true);
        assert_eq!(&e[..3], &v);
        for k in 0..10 {
            for j in 0..3 {
                let a = std::f64::consts::PI * f64::from(1u32 << k) * v[j];
                let base = 3 + 6 * k;
                assert!((e[base + j] - a.sin()).abs() < 1e-11);
                assert!((e[base + 3 + j] - a.cos()).abs() < 1e-11);
                assert!((f64::from(e32[base + j]) - a.sin()).abs() < 2e-3);
            }
        }
    }

    #[test]
    fn zero_vector_encodes_to_sin0_cos1() {
        let e = positional_encode(&[0.0f64; 3], 4, false);
        for k in 0..4 {
            assert!(e[k * 6..k * 6 + 3].iter().all(|&v| v == 0.0));
            assert!(e[k * 6 + 3..k * 6 + 6].iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn standard_width() {
        assert_eq!(positional_encode(&[0.1f64, 0.2, 0.3], 10, true).len(), 63);
    }

    #[test]
    fn half_gives_quarter_turn() {
        let e = positional_encode(&[0.5f64], 1, false);
        assert!((e[0] - 1.0).abs() < 1e-15);
        assert!(e[1].abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn lipschitz_bound(a in -2.0f64..2.0, b in -2.0f64..2.0, n in 0usize..8) {
            let (ea, eb) = (positional_encode(&[a], n, true), positional_encode(&[b], n, true));
            let bound = 2f64.powi(n as i32) * std::f64::consts::PI;
            for (x, y) in ea.iter().zip(&eb) {
                prop_assert!((x - y).abs() <= bound.max(1.0) * (a - b).abs() + 1e-12);
            }
            prop_assert_eq!(positional_encode(&[a], n, true), ea);
        }
    }
}
