//! Floating-point scalar abstraction shared by every numeric module.

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Real scalar used by the differentiable core: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Tolerance used when snapping a quotient to the nearest integer
    /// during event counting. Roughly the square root of machine epsilon.
    const SNAP: Self;

    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `c = alpha * a * b + beta * c` with `a` m x k, `b` k x n, `c` m x n,
    /// each given as `(row stride, column stride)`.
    fn gemm(dims: (usize, usize, usize), alpha: Self, a: Strided<Self>, b: Strided<Self>, beta: Self, c: StridedMut<Self>);
}

/// Read-only matrix view: data plus `(row stride, column stride)`.
pub type Strided<'a, T> = (&'a [T], (usize, usize));
pub type StridedMut<'a, T> = (&'a mut [T], (usize, usize));

fn check_view(len: usize, rows: usize, cols: usize, (rs, cs): (usize, usize)) {
    if rows > 0 && cols > 0 {
        assert!((rows - 1) * rs + (cols - 1) * cs < len, "matrix view exceeds its buffer");
    }
}

macro_rules! impl_gemm {
    ($t:ty, $f:path) => {
        fn gemm((m, k, n): (usize, usize, usize), alpha: $t, a: Strided<$t>, b: Strided<$t>, beta: $t, c: StridedMut<$t>) {
            check_view(a.0.len(), m, k, a.1);
            check_view(b.0.len(), k, n, b.1);
            check_view(c.0.len(), m, n, c.1);
            if m == 0 || n == 0 {
                return;
            }
            // SAFETY: every index the kernel touches was bounds-checked above.
            unsafe {
                $f(
                    m,
                    k,
                    n,
                    alpha,
                    a.0.as_ptr(),
                    a.1 .0 as isize,
                    a.1 .1 as isize,
                    b.0.as_ptr(),
                    b.1 .0 as isize,
                    b.1 .1 as isize,
                    beta,
                    c.0.as_mut_ptr(),
                    c.1 .0 as isize,
                    c.1 .1 as isize,
                );
            }
        }
    };
}

impl Scalar for f32 {
    const SNAP: f32 = 3.5e-4;
    impl_gemm!(f32, matrixmultiply::sgemm);
}

impl Scalar for f64 {
    const SNAP: f64 = 1.5e-8;
    impl_gemm!(f64, matrixmultiply::dgemm);
}

/// Numerically stable `ln(1 + e^x)`.
#[inline]
pub fn softplus<T: Scalar>(x: T) -> T {
    if x > T::lit(30.0) {
        x
    } else if x < T::lit(-30.0) {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Dot product with eight independent accumulators so the compiler can
/// keep the reduction in vector registers.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail += *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += a * x`
#[inline]
pub fn axpy<T: Scalar>(a: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * *xi;
    }
}
