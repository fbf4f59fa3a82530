//! Dead-zone event loss.
//!
//! A target `dl` and its signed threshold `c` define a quantization bin:
//! `[dl, dl + c)` for a positive `c` and `(dl + c, dl]` for a negative one.
//! Predictions inside the bin cost nothing; outside it the cost is the
//! squared distance to the bin centre `dl + c / 2`. The threshold follows
//! the target's polarity, or the prediction's when the target is zero, so
//! a zero target is free exactly on `(c_neg, c_pos)`.

use crate::error::{Error, Result};
use crate::events::Thresholds;
use crate::scalar::Scalar;

/// `(loss, d loss / d pred)` for one pixel.
#[inline]
pub fn deadzone_term<T: Scalar>(pred: T, target: T, th: &Thresholds<T>) -> (T, T) {
    let positive = if target.is_zero() { pred >= T::zero() } else { target > T::zero() };
    let c = if positive { th.c_pos } else { th.c_neg };
    let inside = if positive {
        target <= pred && pred < target + c
    } else {
        target + c < pred && pred <= target
    };
    if inside {
        (T::zero(), T::zero())
    } else {
        let d = pred - (target + c * T::lit(0.5));
        (d * d, d + d)
    }
}

/// Mean dead-zone loss over aligned predictions and targets.
pub fn deadzone_loss<T: Scalar>(pred: &[T], target: &[T], th: &Thresholds<T>) -> Result<T> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!("{} predictions vs {} targets", pred.len(), target.len())));
    }
    if let Some(i) = pred.iter().chain(target).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("loss input {i}")));
    }
    if pred.is_empty() {
        return Ok(T::zero());
    }
    let sum: T = pred.iter().zip(target).map(|(&p, &y)| deadzone_term(p, y, th).0).sum();
    Ok(sum / T::lit(pred.len() as f64))
}
