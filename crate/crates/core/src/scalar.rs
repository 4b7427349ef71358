//! Floating-point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Scalar type the solvers are generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only if the target type cannot hold finite values.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count not representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon as `f64`, for tolerance computations.
    #[inline]
    fn eps_f64() -> f64 {
        Self::epsilon().to_f64_lossy()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Small fixed-size vector helpers on `[T; 3]` points (2D meshes keep `z = 0`).
pub mod vec3 {
    use super::Real;

    pub type Vec3<T> = [T; 3];

    #[inline]
    pub fn zero<T: Real>() -> Vec3<T> {
        [T::zero(); 3]
    }

    #[inline]
    pub fn sub<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }

    #[inline]
    pub fn add<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    }

    #[inline]
    pub fn scale<T: Real>(a: &Vec3<T>, s: T) -> Vec3<T> {
        [a[0] * s, a[1] * s, a[2] * s]
    }

    #[inline]
    pub fn dot<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> T {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    #[inline]
    pub fn cross<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }

    #[inline]
    pub fn norm<T: Real>(a: &Vec3<T>) -> T {
        dot(a, a).sqrt()
    }

    #[inline]
    pub fn normalize<T: Real>(a: &Vec3<T>) -> Vec3<T> {
        let n = norm(a);
        scale(a, T::one() / n)
    }
}
