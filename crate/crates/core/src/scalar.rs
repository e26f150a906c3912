//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All signal models, kernels and solvers are written against [`Real`] so the
//! same code runs in `f32` (fast previews) and `f64` (reference accuracy).

use nalgebra as na;
use num_complex::Complex;
use num_traits as nt;

/// Floating point scalar usable by the simulation, kernel and recovery code.
pub trait Real:
    Copy + nt::FloatConst + nt::FromPrimitive + nt::ToPrimitive + na::RealField + na::Scalar + Send + Sync + Default
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over a [`Real`] scalar.
pub type Cplx<T> = Complex<T>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in target scalar")
}

/// Converts a count or index into `T`.
#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("usize representable in target scalar")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn two_pi<T: Real>() -> T {
    T::TAU()
}

/// `e^{j theta}`.
#[inline]
pub fn cis<T: Real>(theta: T) -> Cplx<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// Trapezoidal weight for node `i` of an `n`-node rule.
#[inline]
pub(crate) fn trapz_weight<T: Real>(i: usize, n: usize) -> T {
    if n >= 2 && (i == 0 || i + 1 == n) {
        lit(0.5)
    } else {
        T::one()
    }
}

#[inline]
pub fn cabs<T: Real>(z: Cplx<T>) -> T {
    z.re.hypot(z.im)
}

#[inline]
pub fn carg<T: Real>(z: Cplx<T>) -> T {
    z.im.atan2(z.re)
}
