//! Smooth regularizations of the Heaviside step, the Dirac delta, the
//! absolute value and the sign function.
//!
//! The transition profile `ω` is a clamped odd-symmetric polynomial, so
//! `H_ε(x) = ω(x/ε)` is exactly 0 for `x ≤ -ε`, exactly 1 for `x ≥ ε`, and its
//! derivative `δ_ε` is an even bump supported in `(-ε, ε)` with unit mass.

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Shape of the transition profile `ω` on `[-1, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Transition {
    /// `ω(z) = 1/2 + 15/16 z - 5/8 z³ + 3/16 z⁵`, with `ω' = 15/16 (1 - z²)²`. C².
    #[default]
    QuinticSmoothstep,
    /// `ω(z) = 1/2 + 35/32 z - 35/32 z³ + 21/32 z⁵ - 5/32 z⁷`, with
    /// `ω' = 35/32 (1 - z²)³`. C³.
    SepticSmoothstep,
}

impl Transition {
    /// `ω(z)`, clamped to 0 / 1 outside `(-1, 1)`.
    pub fn value<T: Real>(self, z: T) -> T {
        if z <= -T::one() {
            return T::zero();
        }
        if z >= T::one() {
            return T::one();
        }
        let z2 = z * z;
        let half = lit::<T>(0.5);
        match self {
            Transition::QuinticSmoothstep => {
                half + z * (lit::<T>(15.0 / 16.0) - z2 * (lit::<T>(5.0 / 8.0) - lit::<T>(3.0 / 16.0) * z2))
            }
            Transition::SepticSmoothstep => {
                half + z
                    * (lit::<T>(35.0 / 32.0)
                        - z2 * (lit::<T>(35.0 / 32.0)
                            - z2 * (lit::<T>(21.0 / 32.0) - lit::<T>(5.0 / 32.0) * z2)))
            }
        }
    }

    /// `ω'(z)`; zero outside `(-1, 1)`. Depends on `z` only through `z²`.
    pub fn slope<T: Real>(self, z: T) -> T {
        if z.abs() >= T::one() {
            return T::zero();
        }
        let q = T::one() - z * z;
        match self {
            Transition::QuinticSmoothstep => lit::<T>(15.0 / 16.0) * q * q,
            Transition::SepticSmoothstep => lit::<T>(35.0 / 32.0) * q * q * q,
        }
    }
}

/// A family `{H_ε}` at a fixed width `ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifierFamily<T> {
    transition: Transition,
    eps: T,
}

impl<T: Real> MollifierFamily<T> {
    /// Default (quintic) family of width `eps`.
    pub fn new(eps: T) -> Result<Self> {
        Self::with_transition(eps, Transition::default())
    }

    pub fn with_transition(eps: T, transition: Transition) -> Result<Self> {
        if !(eps.is_finite() && eps > T::zero()) {
            return Err(Error::Domain(format!("mollifier width must be positive, got {eps}")));
        }
        Ok(Self { transition, eps })
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn transition(&self) -> Transition {
        self.transition
    }

    /// `H_ε(x) = ω(x/ε)`.
    pub fn heaviside(&self, x: T) -> Result<T> {
        finite(x)?;
        Ok(self.transition.value(x / self.eps))
    }

    /// `δ_ε(x) = H_ε'(x) = ω'(x/ε)/ε`.
    pub fn delta(&self, x: T) -> Result<T> {
        finite(x)?;
        Ok(self.transition.slope(x / self.eps) / self.eps)
    }
}

fn finite<T: Real>(x: T) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("argument must be finite, got {x}")))
    }
}

fn positive_width<T: Real>(eps: T) -> Result<()> {
    if eps.is_finite() && eps > T::zero() {
        Ok(())
    } else {
        Err(Error::Domain(format!("regularization width must be positive, got {eps}")))
    }
}

/// Mollified Heaviside `H_ε(x)`.
pub fn heaviside_eps<T: Real>(x: T, fam: &MollifierFamily<T>) -> Result<T> {
    fam.heaviside(x)
}

/// Mollified delta `δ_ε(x)`.
pub fn delta_eps<T: Real>(x: T, fam: &MollifierFamily<T>) -> Result<T> {
    fam.delta(x)
}

/// Regularized absolute value `|x|_ε`: `|x|` outside `(-ε, ε)` and the C²
/// sextic blend `3/8 x⁶/ε⁵ - 5/4 x⁴/ε³ + 15/8 x²/ε` inside.
pub fn reg_abs<T: Real>(x: T, eps: T) -> Result<T> {
    positive_width(eps)?;
    if x.abs() >= eps {
        return Ok(x.abs());
    }
    let r = (x / eps) * (x / eps);
    Ok(eps * r * (lit::<T>(15.0 / 8.0) - r * (lit::<T>(5.0 / 4.0) - lit::<T>(3.0 / 8.0) * r)))
}

/// `sgn_ε(x) = (|x|_ε)'`. The outer branch `±1` is used at `|x| = ε` exactly.
pub fn sgn_eps<T: Real>(x: T, eps: T) -> Result<T> {
    positive_width(eps)?;
    if x.abs() >= eps {
        return Ok(x.signum());
    }
    let q = x / eps;
    let q2 = q * q;
    Ok(q * (lit::<T>(15.0 / 4.0) - q2 * (lit::<T>(5.0) - lit::<T>(9.0 / 4.0) * q2)))
}

/// `(|x|_ε)''`, zero outside `(-ε, ε)`.
pub fn reg_abs_curvature<T: Real>(x: T, eps: T) -> Result<T> {
    positive_width(eps)?;
    if x.abs() >= eps {
        return Ok(T::zero());
    }
    let q2 = (x / eps) * (x / eps);
    Ok((lit::<T>(15.0 / 4.0) - q2 * (lit::<T>(15.0) - lit::<T>(45.0 / 4.0) * q2)) / eps)
}

/// `1` for `x > 0`, else `0`.
pub fn sgn_plus<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

/// `-1` for `x < 0`, else `0`.
pub fn sgn_minus<T: Real>(x: T) -> T {
    if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Width schedules of the concentration weight: `a(ε) = ε^p` and `σ(ε) = ε^{1/4}`.
///
/// `p ∈ (0, 1/2)` keeps `a` increasing with `a(0) = 0` and makes
/// `ε / a(ε)² = ε^{1-2p}` vanish as `ε → 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightSchedule<T> {
    exponent: T,
}

impl<T: Real> Default for WeightSchedule<T> {
    fn default() -> Self {
        Self {
            exponent: lit(1.0 / 3.0),
        }
    }
}

impl<T: Real> WeightSchedule<T> {
    pub fn new(exponent: T) -> Result<Self> {
        if !(exponent > T::zero() && exponent < lit(0.5)) {
            return Err(Error::Domain(format!(
                "schedule exponent must lie in (0, 1/2), got {exponent}"
            )));
        }
        Ok(Self { exponent })
    }

    pub fn exponent(&self) -> T {
        self.exponent
    }

    pub fn a(&self, eps: T) -> T {
        eps.powf(self.exponent)
    }

    pub fn sigma(&self, eps: T) -> T {
        eps.powf(lit(0.25))
    }

    /// `ε / a(ε)²`.
    pub fn decay_ratio(&self, eps: T) -> T {
        let a = self.a(eps);
        eps / (a * a)
    }

    /// True when `ε / a(ε)²` strictly decreases along a strictly decreasing
    /// `ε` sweep.
    pub fn decays_along(&self, sweep: &[T]) -> bool {
        sweep
            .windows(2)
            .all(|w| w[1] < w[0] && self.decay_ratio(w[1]) < self.decay_ratio(w[0]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fam(eps: f64) -> MollifierFamily<f64> {
        MollifierFamily::new(eps).unwrap()
    }

    #[test]
    fn heaviside_saturates_outside_band() {
        let f = fam(0.1);
        assert_eq!(heaviside_eps(0.2, &f).unwrap(), 1.0);
        assert_eq!(heaviside_eps(-0.2, &f).unwrap(), 0.0);
        assert_eq!(heaviside_eps(0.1, &f).unwrap(), 1.0);
        assert_eq!(heaviside_eps(-0.1, &f).unwrap(), 0.0);
        assert_eq!(heaviside_eps(0.0, &f).unwrap(), 0.5);
    }

    #[test]
    fn non_finite_arguments_are_domain_errors() {
        let f = fam(0.1);
        assert!(matches!(heaviside_eps(f64::NAN, &f), Err(Error::Domain(_))));
        assert!(matches!(delta_eps(f64::INFINITY, &f), Err(Error::Domain(_))));
        assert!(MollifierFamily::new(0.0f64).is_err());
        assert!(matches!(reg_abs(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(sgn_eps(1.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn delta_support_and_symmetry() {
        let f = fam(0.1);
        assert_eq!(delta_eps(0.15, &f).unwrap(), 0.0);
        assert_eq!(delta_eps(0.03, &f).unwrap(), delta_eps(-0.03, &f).unwrap());
        assert!(delta_eps(0.0, &f).unwrap() > 0.0);
    }

    #[test]
    fn delta_has_unit_mass() {
        // 10⁴-point trapezoid over [-ε, ε]
        for t in [Transition::QuinticSmoothstep, Transition::SepticSmoothstep] {
            let f = MollifierFamily::with_transition(0.1, t).unwrap();
            let n = 10_000;
            let h = 0.2 / (n - 1) as f64;
            let mut s = 0.0;
            for i in 0..n {
                let x = -0.1 + i as f64 * h;
                let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                s += w * delta_eps(x, &f).unwrap();
            }
            assert!((s * h - 1.0).abs() < 1e-8, "{t:?}: {}", s * h);
        }
    }

    #[test]
    fn reg_abs_reference_values() {
        assert_eq!(reg_abs(0.0, 0.1).unwrap(), 0.0);
        assert_eq!(reg_abs(2.0, 0.1).unwrap(), 2.0);
        assert!((reg_abs(0.05f64, 0.1).unwrap() - 0.0396484375).abs() < 1e-12);
        assert_eq!(reg_abs(0.1, 0.1).unwrap(), 0.1);
    }

    #[test]
    fn sgn_eps_reference_values() {
        assert_eq!(sgn_eps(0.0, 0.1).unwrap(), 0.0);
        assert_eq!(sgn_eps(0.1, 0.1).unwrap(), 1.0);
        assert_eq!(sgn_eps(-0.5, 0.1).unwrap(), -1.0);
        // inner polynomial evaluated just below the seam
        let below = sgn_eps(0.1f64 * (1.0 - 1e-12), 0.1).unwrap();
        assert!((below - 1.0).abs() < 1e-10);
    }

    #[test]
    fn one_sided_signs() {
        assert_eq!(sgn_plus(3.0), 1.0);
        assert_eq!(sgn_plus(0.0), 0.0);
        assert_eq!(sgn_plus(-1.0), 0.0);
        assert_eq!(sgn_minus(-2.0), -1.0);
        assert_eq!(sgn_minus(0.0), 0.0);
        assert_eq!(sgn_minus(4.0), 0.0);
    }

    #[test]
    fn reg_abs_is_c2_at_the_seam() {
        for eps in [1e-3f64, 0.1, 1.0, 7.5] {
            for sign in [-1.0, 1.0] {
                let x = sign * eps;
                let (v_in, d_in, c_in) = {
                    let r = (x / eps) * (x / eps);
                    let q = x / eps;
                    (
                        eps * r * (15.0 / 8.0 - r * (5.0 / 4.0 - 3.0 / 8.0 * r)),
                        q * (15.0 / 4.0 - q * q * (5.0 - 9.0 / 4.0 * q * q)),
                        (15.0 / 4.0 - r * (15.0 - 45.0 / 4.0 * r)) / eps,
                    )
                };
                let scale = eps.max(1.0);
                assert!((v_in - reg_abs(x, eps).unwrap()).abs() <= 1e-12 * eps);
                assert!((d_in - sgn_eps(x, eps).unwrap()).abs() <= 1e-12);
                assert!((c_in - reg_abs_curvature(x, eps).unwrap()).abs() <= 1e-12 * scale / eps);
            }
        }
    }

    #[test]
    fn transition_is_c2_at_plus_minus_one() {
        for t in [Transition::QuinticSmoothstep, Transition::SepticSmoothstep] {
            let h = 1e-7;
            for z in [-1.0f64, 1.0] {
                let inside = z - z.signum() * h;
                assert!((t.value(inside) - t.value(z)).abs() < 1e-12);
                assert!(t.slope(inside).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn schedule_defaults_and_decay() {
        let s = WeightSchedule::<f64>::default();
        assert!((s.a(1e-3) - 0.1).abs() < 1e-12);
        assert!((s.sigma(1e-3) - 1e-3f64.powf(0.25)).abs() < 1e-15);
        assert!(s.decays_along(&[0.1, 0.05, 0.025]));
        assert!(!s.decays_along(&[0.05, 0.1]));
        assert!(WeightSchedule::new(0.5f64).is_err());
        assert!(WeightSchedule::new(0.0f64).is_err());
        assert!(WeightSchedule::new(0.25f64).is_ok());
    }

    #[test]
    fn works_in_single_precision() {
        let f = MollifierFamily::new(0.1f32).unwrap();
        assert_eq!(f.heaviside(0.0).unwrap(), 0.5);
        assert_eq!(f.heaviside(0.2).unwrap(), 1.0);
        assert!((reg_abs(0.05f32, 0.1).unwrap() - 0.039_648_44).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn reg_abs_close_to_abs(x in -3.0f64..3.0, eps in 1e-3f64..2.0) {
            let r = reg_abs(x, eps).unwrap();
            prop_assert!(r >= 0.0);
            prop_assert!((r - x.abs()).abs() <= eps);
            prop_assert_eq!(r, reg_abs(-x, eps).unwrap());
            // the inner polynomial peaks at |z| = 1/√3 with value 7√3/9
            prop_assert!(sgn_eps(x, eps).unwrap().abs() <= 7.0 * 3f64.sqrt() / 9.0 + 1e-12);
            prop_assert_eq!(sgn_eps(-x, eps).unwrap(), -sgn_eps(x, eps).unwrap());
        }

        #[test]
        fn reg_abs_slope_matches_sgn_eps(t in -2.0f64..2.0, eps in 0.05f64..1.0) {
            let x = t * eps;
            let h = 1e-4;
            let fd = (reg_abs(x + h, eps).unwrap() - reg_abs(x - h, eps).unwrap()) / (2.0 * h);
            // third derivative of |x|_ε is O(1/ε²)
            let scale = 1.0 / (eps * eps);
            prop_assert!((fd - sgn_eps(x, eps).unwrap()).abs() <= 10.0 * h * h * scale + 1e-9);
        }

        #[test]
        fn heaviside_slope_matches_delta(t in -2.0f64..2.0, eps in 0.05f64..1.0) {
            let f = fam(eps);
            let x = t * eps;
            let h = 1e-4;
            let fd = (f.heaviside(x + h).unwrap() - f.heaviside(x - h).unwrap()) / (2.0 * h);
            let scale = 1.0 / (eps * eps * eps);
            prop_assert!((fd - f.delta(x).unwrap()).abs() <= 10.0 * h * h * scale + 1e-9);
        }

        #[test]
        fn delta_even_and_heaviside_complementary(x in -1.0f64..1.0, eps in 1e-3f64..1.0) {
            let f = fam(eps);
            prop_assert_eq!(f.delta(x).unwrap().to_bits(), f.delta(-x).unwrap().to_bits());
            prop_assert!((f.heaviside(x).unwrap() + f.heaviside(-x).unwrap() - 1.0).abs() <= 4.0 * f64::EPSILON);
            let h = f.heaviside(x).unwrap();
            prop_assert!((0.0..=1.0).contains(&h));
        }

        #[test]
        fn heaviside_monotone(a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let f = fam(0.3);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(f.heaviside(lo).unwrap() <= f.heaviside(hi).unwrap());
        }
    }
}
