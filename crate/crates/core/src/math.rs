//! Thin wrappers over `libm` so the same code paths run with and without `std`.

pub use core::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}
#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}
#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}
#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}
#[inline]
pub fn tan(x: f64) -> f64 {
    libm::tan(x)
}
#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}
#[inline]
pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}
#[inline]
pub fn ln1p(x: f64) -> f64 {
    libm::log1p(x)
}
#[inline]
pub fn log10(x: f64) -> f64 {
    libm::log10(x)
}
#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}
#[inline]
pub fn powi(x: f64, k: i32) -> f64 {
    libm::pow(x, k as f64)
}
#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}
#[inline]
pub fn sinh(x: f64) -> f64 {
    libm::sinh(x)
}
#[inline]
pub fn cosh(x: f64) -> f64 {
    libm::cosh(x)
}
#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}
#[inline]
pub fn atan(x: f64) -> f64 {
    libm::atan(x)
}
#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// `log(cosh(x))` without overflow for large `|x|`.
pub fn ln_cosh(x: f64) -> f64 {
    let a = abs(x);
    a + ln1p(exp(-2.0 * a)) - core::f64::consts::LN_2
}

/// `sech(x)^2`, accurate for large `|x|`.
pub fn sech2(x: f64) -> f64 {
    let a = abs(x);
    let e = exp(-2.0 * a);
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// `1 - tanh(x)` for `x >= 0` without cancellation.
pub fn one_minus_tanh(x: f64) -> f64 {
    let e = exp(-2.0 * x);
    2.0 * e / (1.0 + e)
}

/// Maximum of a slice, `-inf` when empty.
pub fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Minimum of a slice, `+inf` when empty.
pub fn min_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Maximum absolute value of a slice.
pub fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, &x| f64::max(m, abs(x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_cosh_matches_direct_evaluation_in_range() {
        for &x in &[-3.0, -0.5, 0.0, 0.25, 2.0, 10.0] {
            assert!((ln_cosh(x) - ln(cosh(x))).abs() < 1e-14);
        }
        // cosh(800) overflows, the stable form does not
        assert!((ln_cosh(800.0) - (800.0 - core::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn tanh_complement_is_accurate_far_out() {
        let x = 30.0;
        let expected = 2.0 * exp(-60.0) / (1.0 + exp(-60.0));
        assert!((one_minus_tanh(x) - expected).abs() / expected < 1e-15);
        assert_eq!(1.0 - tanh(x), 0.0);
    }
}
