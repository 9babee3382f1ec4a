//! Scalar abstraction: every amplitude and operator entry is `Complex<T>`
//! for some floating-point `T`.

use num_complex::Complex;

/// Floating-point scalar used for amplitudes, probabilities and phase-space
/// values: `f32` or `f64`.
///
/// All tolerances quoted in this crate assume `f64`; the `f32` instantiation
/// is useful for quick scans but will not meet the tighter bounds.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssignOps
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` literal. Panics only for non-finite input, which is
    /// a programming error here.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("finite literal")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl<T> Real for T where
    T: num_traits::Float
        + num_traits::FloatConst
        + num_traits::FromPrimitive
        + num_traits::ToPrimitive
        + num_traits::NumAssignOps
        + std::iter::Sum
        + std::fmt::Debug
        + std::fmt::Display
        + Send
        + Sync
        + 'static
{
}

/// Complex scalar shorthand.
pub type C<T> = Complex<T>;

pub(crate) fn c<T: Real>(re: f64, im: f64) -> C<T> {
    Complex::new(T::lit(re), T::lit(im))
}

pub(crate) fn cr<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}

pub(crate) fn ci<T: Real>(im: T) -> C<T> {
    Complex::new(T::zero(), im)
}

/// `exp(i phase)`.
pub(crate) fn phase_factor<T: Real>(phase: T) -> C<T> {
    Complex::new(phase.cos(), phase.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip() {
        let x: f64 = Real::lit(0.25);
        assert_eq!(x, 0.25);
        let y: f32 = Real::lit(0.5);
        assert_eq!(y, 0.5f32);
    }

    #[test]
    fn phase_factor_is_unit_modulus() {
        let z = phase_factor::<f64>(1.234);
        assert!((z.norm() - 1.0).abs() < 1e-15);
    }
}
