//! Scalar primitives shared by every control law: the two saturation
//! functions, the finite-time sign function, angle wrapping and planar
//! relative geometry.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent of the finite-time sign function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MathConfig {
    pub gamma: f64,
}

impl Default for MathConfig {
    fn default() -> Self {
        Self { gamma: 0.5 }
    }
}

impl MathConfig {
    pub fn new(gamma: f64) -> Result<Self> {
        let cfg = Self { gamma };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!(
                "math.gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// A point in the plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Position) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    /// Arithmetic mean of a set of points; `None` when the set is empty.
    pub fn centroid<I: IntoIterator<Item = Position>>(points: I) -> Option<Position> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for p in points {
            sx += p.x;
            sy += p.y;
            n += 1;
        }
        (n > 0).then(|| Position::new(sx / n as f64, sy / n as f64))
    }
}

/// Lower clamp at zero, upper clamp at `y`.
pub fn sat(x: f64, y: f64) -> Result<f64> {
    if y < 0.0 || y.is_nan() {
        return Err(Error::Domain(format!("sat upper bound must be >= 0, got {y}")));
    }
    Ok(if x <= 0.0 {
        0.0
    } else if x <= y {
        x
    } else {
        y
    })
}

/// Floor at `y`: returns `y` when `x <= y`, else `x`.
pub fn sat2(x: f64, y: f64) -> f64 {
    if x <= y {
        y
    } else {
        x
    }
}

/// Sign with `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Finite-time sign function bounded by `sigma`.
///
/// Returns `sigma * sign(x)` when `|x| > sigma^(1/gamma)` and
/// `sign(x) * |x|^gamma` otherwise. The two branches meet at the threshold,
/// so the result is continuous and never exceeds `sigma` in magnitude.
pub fn sgn_fin(x: f64, sigma: f64, gamma: f64) -> Result<f64> {
    if sigma < 0.0 || sigma.is_nan() {
        return Err(Error::Domain(format!("sgn sigma must be >= 0, got {sigma}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("sgn gamma must lie in (0, 1), got {gamma}")));
    }
    let threshold = sigma.powf(1.0 / gamma);
    let mag = x.abs();
    Ok(if mag > threshold {
        sigma * sign(x)
    } else {
        sign(x) * mag.powf(gamma)
    })
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::Domain(format!("cannot wrap non-finite angle {a}")));
    }
    Ok(wrap_finite(a))
}

pub(crate) fn wrap_finite(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Four-quadrant orientation of the vector `from -> to`, in `(-pi, pi]`.
pub fn rel_angle(from: Position, to: Position) -> Result<f64> {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "relative angle undefined for coincident points ({}, {})",
            from.x, from.y
        )));
    }
    let a = dy.atan2(dx);
    // atan2 can return -pi for (-x, -0.0).
    Ok(if a <= -PI { PI } else { a })
}

/// `pi/2 - atan(x)`, the inverse cotangent with range `(0, pi)`.
pub fn acot_pos(x: f64) -> f64 {
    FRAC_PI_2 - x.atan()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn sat_branches() {
        assert_eq!(sat(-1.0, 5.0).unwrap(), 0.0);
        assert_eq!(sat(3.0, 5.0).unwrap(), 3.0);
        assert_eq!(sat(7.0, 5.0).unwrap(), 5.0);
        assert!(matches!(sat(1.0, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn sat2_branches() {
        assert_eq!(sat2(0.2, 0.36), 0.36);
        assert_eq!(sat2(0.5, 0.36), 0.5);
        assert_eq!(sat2(0.36, 0.36), 0.36);
    }

    #[test]
    fn sgn_fin_values() {
        assert_eq!(sgn_fin(5.0, 2.0, 0.5).unwrap(), 2.0);
        assert_abs_diff_eq!(sgn_fin(0.25, 2.0, 0.5).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(sgn_fin(0.0, 2.0, 0.5).unwrap(), 0.0);
        assert_eq!(sgn_fin(-5.0, 2.0, 0.5).unwrap(), -2.0);
        assert!(sgn_fin(1.0, -1.0, 0.5).is_err());
        // exactly at the threshold the power branch is taken; both agree
        assert_abs_diff_eq!(sgn_fin(4.0, 2.0, 0.5).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn wrap_examples() {
        assert_abs_diff_eq!(wrap_angle(3.0 * PI).unwrap(), PI, epsilon = 1e-12);
        assert_eq!(wrap_angle(-PI).unwrap(), PI);
        assert_eq!(wrap_angle(0.3).unwrap(), 0.3);
        assert_eq!(wrap_angle(PI).unwrap(), PI);
        assert_eq!(wrap_angle(0.0).unwrap(), 0.0);
        assert!(wrap_angle(f64::NAN).is_err());
        assert!(wrap_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn rel_angle_examples() {
        let o = Position::new(0.0, 0.0);
        assert_abs_diff_eq!(
            rel_angle(o, Position::new(1.0, 1.0)).unwrap(),
            PI / 4.0,
            epsilon = 1e-15
        );
        assert_eq!(rel_angle(o, Position::new(-1.0, 0.0)).unwrap(), PI);
        assert_eq!(rel_angle(o, Position::new(-1.0, -0.0)).unwrap(), PI);
        assert_abs_diff_eq!(
            rel_angle(Position::new(2.0, 3.0), Position::new(2.0, 2.0)).unwrap(),
            -PI / 2.0,
            epsilon = 1e-15
        );
        assert!(matches!(rel_angle(o, o), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn acot_examples() {
        assert_eq!(acot_pos(0.0), FRAC_PI_2);
        assert_abs_diff_eq!(acot_pos(1.0), PI / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(acot_pos(2.5), 0.380506377, epsilon = 1e-6);
        assert_abs_diff_eq!(acot_pos(2.5), (1.0f64 / 2.5).atan(), epsilon = 1e-15);
    }

    #[test]
    fn gamma_validation() {
        assert!(MathConfig::new(0.0).is_err());
        assert!(MathConfig::new(1.0).is_err());
        assert!(MathConfig::new(0.7).is_ok());
    }

    proptest! {
        #[test]
        fn sat_idempotent_and_monotone(x in -10.0..10.0f64, dx in 0.0..5.0f64, y in 0.0..5.0f64) {
            let s = sat(x, y).unwrap();
            prop_assert!((0.0..=y).contains(&s));
            prop_assert_eq!(sat(s, y).unwrap(), s);
            prop_assert!(sat(x + dx, y).unwrap() >= s);
        }

        #[test]
        fn sat2_is_max(x in -1e6..1e6f64, y in -1e6..1e6f64) {
            prop_assert_eq!(sat2(x, y), x.max(y));
        }

        #[test]
        fn sgn_fin_bounded_and_odd(x in -50.0..50.0f64, sigma in 0.0..4.0f64, gamma in 0.05..0.95f64) {
            let s = sgn_fin(x, sigma, gamma).unwrap();
            prop_assert!(s.abs() <= sigma + 1e-12);
            prop_assert_eq!(sgn_fin(-x, sigma, gamma).unwrap(), -s);
        }

        #[test]
        fn sgn_fin_continuous_at_threshold(sigma in 0.01..4.0f64, gamma in 0.05..0.95f64) {
            let th = sigma.powf(1.0 / gamma);
            let below = sgn_fin(th, sigma, gamma).unwrap();
            let above = sgn_fin(th * (1.0 + 1e-15) + f64::MIN_POSITIVE, sigma, gamma).unwrap();
            prop_assert!((below - above).abs() <= 1e-12);
        }

        #[test]
        fn wrap_is_periodic(a in -20.0..20.0f64, k in -5i32..5) {
            let w = wrap_angle(a).unwrap();
            prop_assert!(w > -PI && w <= PI);
            let shifted = wrap_angle(a + TAU * k as f64).unwrap();
            let d = (w - shifted).abs();
            // +-pi may land on either side after rounding
            prop_assert!(d < 1e-9 || (d - TAU).abs() < 1e-9);
            let diff = (a - w) / TAU;
            prop_assert!((diff - diff.round()).abs() < 1e-9);
        }

        #[test]
        fn acot_symmetry_and_decreasing(x in -100.0..100.0f64, dx in 1e-3..10.0f64) {
            prop_assert!((acot_pos(x) + acot_pos(-x) - PI).abs() < 1e-12);
            prop_assert!(acot_pos(x + dx) < acot_pos(x));
            let a = acot_pos(x);
            prop_assert!(a > 0.0 && a < PI);
        }
    }
}
