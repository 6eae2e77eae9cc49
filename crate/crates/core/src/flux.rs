//! Left/right flux pairs, the mollified combined flux, the non-alignment
//! validators and the Riemann-to-zero-data reduction.
//!
//! Each flux side is transversally separable,
//! `f(x̂, λ) = amplitude(x̂)·profile(λ + shift) + offset(x̂)`,
//! which covers every built-in fixture, gives closed-form envelopes over `λ`
//! when the profile is bounded, and lets the solver evaluate the nonlinear
//! profile once per cell instead of once per face.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{lattice, transverse, BoxDomain, InterfaceSurface, Orientation};
use crate::mollifier::MollifierFamily;
use crate::scalar::{count, linspace, lit, Real};

/// Nonlinear dependence of a flux side on the unknown.
#[derive(Clone)]
pub enum Profile<T> {
    /// `atan(λ)`, range `(-π/2, π/2)`.
    Arctan,
    /// `tanh(λ)`, range `(-1, 1)`.
    Tanh,
    /// `λ`; unbounded, used for solver verification.
    Linear,
    /// A user-supplied profile with no analytic derivative or range.
    Custom(Arc<dyn Fn(T) -> T + Send + Sync>),
}

impl<T> fmt::Debug for Profile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Arctan => f.write_str("Arctan"),
            Profile::Tanh => f.write_str("Tanh"),
            Profile::Linear => f.write_str("Linear"),
            Profile::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl<T> PartialEq for Profile<T> {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Profile::Arctan, Profile::Arctan)
            | (Profile::Tanh, Profile::Tanh)
            | (Profile::Linear, Profile::Linear) => true,
            (Profile::Custom(a), Profile::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl<T: Real> Profile<T> {
    pub fn eval(&self, lambda: T) -> T {
        match self {
            Profile::Arctan => lambda.atan(),
            Profile::Tanh => lambda.tanh(),
            Profile::Linear => lambda,
            Profile::Custom(f) => f(lambda),
        }
    }

    /// Analytic derivative, when one is known.
    pub fn derivative(&self, lambda: T) -> Option<T> {
        match self {
            Profile::Arctan => Some(T::one() / (T::one() + lambda * lambda)),
            Profile::Tanh => {
                let t = lambda.tanh();
                Some(T::one() - t * t)
            }
            Profile::Linear => Some(T::one()),
            Profile::Custom(_) => None,
        }
    }

    /// Central difference with step `1e-6·max(1, |λ|)`.
    pub fn fd_derivative(&self, lambda: T) -> T {
        let h = lit::<T>(1e-6) * T::one().max(lambda.abs());
        (self.eval(lambda + h) - self.eval(lambda - h)) / (h + h)
    }

    /// `(inf, sup)` over `λ ∈ ℝ`, when bounded and known.
    pub fn range(&self) -> Option<(T, T)> {
        match self {
            Profile::Arctan => Some((-T::FRAC_PI_2(), T::FRAC_PI_2())),
            Profile::Tanh => Some((-T::one(), T::one())),
            Profile::Linear | Profile::Custom(_) => None,
        }
    }
}

/// Transverse factor of a flux side, a function of `x̂_k`.
#[derive(Clone)]
pub enum Transverse<T> {
    Constant(T),
    /// `scale·exp(-|x̂|²)`.
    Gaussian { scale: T },
    Custom(Arc<dyn Fn(&[T]) -> T + Send + Sync>),
}

impl<T: fmt::Debug> fmt::Debug for Transverse<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transverse::Constant(c) => write!(f, "Constant({c:?})"),
            Transverse::Gaussian { scale } => write!(f, "Gaussian {{ scale: {scale:?} }}"),
            Transverse::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl<T: Real> Transverse<T> {
    pub fn eval(&self, xhat: &[T]) -> T {
        match self {
            Transverse::Constant(c) => *c,
            Transverse::Gaussian { scale } => {
                let r2 = xhat.iter().fold(T::zero(), |acc, &x| acc + x * x);
                *scale * (-r2).exp()
            }
            Transverse::Custom(f) => f(xhat),
        }
    }
}

/// One side (`L` or `R`) of one flux component.
#[derive(Clone, Debug)]
pub struct FluxSide<T> {
    pub amplitude: Transverse<T>,
    pub offset: Transverse<T>,
    pub profile: Profile<T>,
    /// Riemann shift: the side is evaluated at `λ + shift`.
    pub shift: T,
}

impl<T: Real> FluxSide<T> {
    pub fn new(amplitude: Transverse<T>, profile: Profile<T>, offset: Transverse<T>) -> Self {
        Self {
            amplitude,
            offset,
            profile,
            shift: T::zero(),
        }
    }

    #[inline]
    pub(crate) fn shifted(&self, lambda: T) -> T {
        // skipping the add keeps a zero shift bit-exact (-0.0 + 0.0 = +0.0)
        if self.shift == T::zero() {
            lambda
        } else {
            lambda + self.shift
        }
    }

    pub fn eval(&self, xhat: &[T], lambda: T) -> T {
        self.amplitude.eval(xhat) * self.profile.eval(self.shifted(lambda)) + self.offset.eval(xhat)
    }

    pub fn derivative(&self, xhat: &[T], lambda: T) -> Option<T> {
        self.profile
            .derivative(self.shifted(lambda))
            .map(|d| self.amplitude.eval(xhat) * d)
    }

    /// `(inf_λ, sup_λ)` of this side at `x̂`, when the profile is bounded.
    pub fn envelope(&self, xhat: &[T]) -> Option<(T, T)> {
        let (lo, hi) = self.profile.range()?;
        let a = self.amplitude.eval(xhat);
        let c = self.offset.eval(xhat);
        let (p, q) = (a * lo + c, a * hi + c);
        Some((p.min(q), p.max(q)))
    }
}

#[derive(Clone, Debug)]
pub struct FluxComponent<T> {
    pub left: FluxSide<T>,
    pub right: FluxSide<T>,
}

/// How `∂F/∂u` is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DerivativeMode {
    /// Analytic profile derivative where available, else central differences.
    #[default]
    Analytic,
    /// Always central differences.
    FiniteDifference,
}

/// The pair `(f_L, f_R)` with one component per spatial axis.
#[derive(Clone, Debug)]
pub struct FluxPair<T> {
    dim: usize,
    components: Vec<FluxComponent<T>>,
    bound: Option<T>,
    derivative_mode: DerivativeMode,
}

impl<T: Real> FluxPair<T> {
    pub fn new(components: Vec<FluxComponent<T>>, bound: Option<T>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Usage("a flux pair needs at least one component".into()));
        }
        Ok(Self {
            dim: components.len(),
            components,
            bound,
            derivative_mode: DerivativeMode::default(),
        })
    }

    /// One-dimensional fixture `f_L = atan λ - gap/2`, `f_R = atan λ + gap/2`.
    pub fn arctan_gap(gap: T) -> Self {
        let half = gap * lit(0.5);
        let side = |c: T| FluxSide::new(Transverse::Constant(T::one()), Profile::Arctan, Transverse::Constant(c));
        Self {
            dim: 1,
            components: vec![FluxComponent {
                left: side(-half),
                right: side(half),
            }],
            bound: Some(T::FRAC_PI_2() + half.abs()),
            derivative_mode: DerivativeMode::default(),
        }
    }

    /// `f^k_{L,R}(x̂_k, λ) = exp(-|x̂_k|²)·(atan λ ∓ gap/2)`.
    ///
    /// `orientation[j]` is the orientation of transverse axis `j + 1`; on an
    /// increasing axis the gap sign of that component is reversed so that the
    /// opposite-inequality form of the non-alignment condition holds.
    pub fn gauss_arctan(dim: usize, gap: T, orientation: &[Orientation]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Usage("dimension must be at least 1".into()));
        }
        if orientation.len() != dim - 1 {
            return Err(Error::Usage(format!(
                "expected {} orientation tags, got {}",
                dim - 1,
                orientation.len()
            )));
        }
        let half = gap * lit(0.5);
        let side = |c: T| {
            FluxSide::new(
                Transverse::Gaussian { scale: T::one() },
                Profile::Arctan,
                Transverse::Gaussian { scale: c },
            )
        };
        let components = (0..dim)
            .map(|k| {
                let flip = k > 0 && orientation[k - 1] == Orientation::Increasing;
                let h = if flip { -half } else { half };
                FluxComponent {
                    left: side(-h),
                    right: side(h),
                }
            })
            .collect();
        Ok(Self {
            dim,
            components,
            bound: Some(T::FRAC_PI_2() + half.abs()),
            derivative_mode: DerivativeMode::default(),
        })
    }

    /// `f_L = f_R = speed·λ` on every axis (continuous linear flux).
    pub fn linear(dim: usize, speed: T) -> Self {
        let side = FluxSide::new(Transverse::Constant(speed), Profile::Linear, Transverse::Constant(T::zero()));
        Self {
            dim,
            components: vec![
                FluxComponent {
                    left: side.clone(),
                    right: side,
                };
                dim
            ],
            bound: None,
            derivative_mode: DerivativeMode::default(),
        }
    }

    /// Identically zero flux.
    pub fn zero(dim: usize) -> Self {
        let mut fp = Self::linear(dim, T::zero());
        fp.bound = Some(T::zero());
        fp
    }

    pub fn with_derivative_mode(mut self, mode: DerivativeMode) -> Self {
        self.derivative_mode = mode;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[FluxComponent<T>] {
        &self.components
    }

    pub fn component(&self, axis: usize) -> &FluxComponent<T> {
        &self.components[axis]
    }

    pub fn bound(&self) -> Option<T> {
        self.bound
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        self.derivative_mode
    }

    pub fn left(&self, axis: usize, xhat: &[T], lambda: T) -> T {
        self.components[axis].left.eval(xhat, lambda)
    }

    pub fn right(&self, axis: usize, xhat: &[T], lambda: T) -> T {
        self.components[axis].right.eval(xhat, lambda)
    }

    /// `(f_L^k(x̂, 0), f_R^k(x̂, 0))`.
    pub fn zero_trace(&self, axis: usize, xhat: &[T]) -> (T, T) {
        (self.left(axis, xhat, T::zero()), self.right(axis, xhat, T::zero()))
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis < self.dim {
            Ok(())
        } else {
            Err(Error::Usage(format!("axis {axis} out of range for dimension {}", self.dim)))
        }
    }

    /// Largest `|f|` over a sample lattice; compare against the declared bound.
    pub fn sampled_max_abs(&self, points: &[Vec<T>], lambdas: &[T]) -> T {
        let mut m = T::zero();
        for (k, comp) in self.components.iter().enumerate() {
            for x in points {
                let xhat = transverse(x, k);
                for &l in lambdas {
                    m = m.max(comp.left.eval(&xhat, l).abs()).max(comp.right.eval(&xhat, l).abs());
                }
            }
        }
        m
    }

    /// `∫ sup_z |f^k_{L,R}(x̂, z)| dx̂` over the truncated transverse box for
    /// each axis, using analytic envelopes or the sampled `λ` grid.
    pub fn transverse_sup_integral(&self, domain: &BoxDomain<T>, sampling: &EnvelopeSampling<T>) -> Result<Vec<T>> {
        let lambdas = sampling.lambda_grid()?;
        let m = self.dim - 1;
        Ok(self
            .components
            .iter()
            .map(|comp| {
                trapezoid(domain.half_width(), m, sampling.quad_points, |xhat| {
                    let sup_abs = |side: &FluxSide<T>| match side.envelope(xhat) {
                        Some((lo, hi)) => lo.abs().max(hi.abs()),
                        None => lambdas
                            .iter()
                            .fold(T::zero(), |acc, &l| acc.max(side.eval(xhat, l).abs())),
                    };
                    sup_abs(&comp.left).max(sup_abs(&comp.right))
                })
            })
            .collect())
    }
}

/// `F^k(x, u) = f_L^k(x̂_k, u)·H_ε(-s) + f_R^k(x̂_k, u)·H_ε(s)`, `s = x₁ - φ(x̂₁)`.
pub fn combined_flux<T: Real>(
    axis: usize,
    x: &[T],
    u: T,
    fp: &FluxPair<T>,
    surf: &InterfaceSurface<T>,
    fam: &MollifierFamily<T>,
) -> Result<T> {
    fp.check_axis(axis)?;
    if !u.is_finite() {
        return Err(Error::Numeric(format!("flux evaluated at non-finite state {u}")));
    }
    let s = surf.signed_offset(x)?;
    let xhat = transverse(x, axis);
    let comp = fp.component(axis);
    Ok(comp.left.eval(&xhat, u) * fam.heaviside(-s)? + comp.right.eval(&xhat, u) * fam.heaviside(s)?)
}

/// `∂F^k/∂u`, analytic when every profile involved has a derivative and the
/// pair is in analytic mode, else a central difference of [`combined_flux`]
/// with step `1e-6·max(1, |u|)`.
pub fn flux_u_derivative<T: Real>(
    axis: usize,
    x: &[T],
    u: T,
    fp: &FluxPair<T>,
    surf: &InterfaceSurface<T>,
    fam: &MollifierFamily<T>,
) -> Result<T> {
    fp.check_axis(axis)?;
    let s = surf.signed_offset(x)?;
    let xhat = transverse(x, axis);
    let comp = fp.component(axis);
    if fp.derivative_mode() == DerivativeMode::Analytic {
        if let (Some(dl), Some(dr)) = (comp.left.derivative(&xhat, u), comp.right.derivative(&xhat, u)) {
            return Ok(dl * fam.heaviside(-s)? + dr * fam.heaviside(s)?);
        }
    }
    let h = lit::<T>(1e-6) * T::one().max(u.abs());
    let up = combined_flux(axis, x, u + h, fp, surf, fam)?;
    let dn = combined_flux(axis, x, u - h, fp, surf, fam)?;
    Ok((up - dn) / (h + h))
}

/// Sampling parameters for envelope estimation and transverse quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeSampling<T> {
    /// `Λ`: the `λ` grid covers `[-Λ, Λ]`.
    pub lambda_max: T,
    pub lambda_points: usize,
    /// Trapezoid nodes per transverse axis.
    pub quad_points: usize,
    /// Margin required beyond zero for a pass.
    pub tolerance: T,
}

impl<T: Real> Default for EnvelopeSampling<T> {
    fn default() -> Self {
        Self {
            lambda_max: lit(1000.0),
            lambda_points: 2001,
            quad_points: 201,
            tolerance: lit(1e-6),
        }
    }
}

impl<T: Real> EnvelopeSampling<T> {
    pub fn lambda_grid(&self) -> Result<Vec<T>> {
        if self.lambda_points < 2 || !(self.lambda_max > T::zero()) {
            return Err(Error::Usage(format!(
                "lambda grid needs Λ > 0 and at least 2 points (got Λ = {}, {} points)",
                self.lambda_max, self.lambda_points
            )));
        }
        Ok(linspace(-self.lambda_max, self.lambda_max, self.lambda_points))
    }
}

/// Which form of the non-alignment condition applies to an axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConditionForm {
    /// `∫ (sup f_L - inf f_R) ≤ -tol` and `f_L(·,0) ≤ f_R(·,0)`.
    Standard,
    /// `∫ (inf f_L - sup f_R) ≥ tol` and `f_L(·,0) ≥ f_R(·,0)`; used on
    /// transverse axes where `φ` increases.
    Opposite,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NonAlignmentEntry<T> {
    pub axis: usize,
    pub form: ConditionForm,
    pub sampled_margin: T,
    pub analytic_margin: Option<T>,
    pub tolerance: T,
    /// Margin clause, decided on the analytic value when available.
    pub margin_pass: bool,
    /// Ordering of the zero traces on the quadrature lattice.
    pub zero_order_pass: bool,
    /// Worst violation of the zero-trace ordering (≤ 0 when it holds).
    pub zero_order_worst: T,
}

impl<T: Real> NonAlignmentEntry<T> {
    pub fn pass(&self) -> bool {
        self.margin_pass && self.zero_order_pass
    }

    /// The margin used for the verdict.
    pub fn margin(&self) -> T {
        self.analytic_margin.unwrap_or(self.sampled_margin)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NonAlignmentReport<T> {
    pub entries: Vec<NonAlignmentEntry<T>>,
    pub sampling: EnvelopeSampling<T>,
    /// Orientation tags disagree across axes: outside the stated hypotheses.
    /// Reported, not failed.
    pub outside_hypotheses: bool,
}

impl<T: Real> NonAlignmentReport<T> {
    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass())
    }
}

fn form_for<T: Real>(axis: usize, surf: &InterfaceSurface<T>) -> ConditionForm {
    if axis > 0 && surf.orientation().get(axis - 1) == Some(&Orientation::Increasing) {
        ConditionForm::Opposite
    } else {
        ConditionForm::Standard
    }
}

/// Evaluates the non-alignment condition integral for one axis, by grid
/// search over `λ ∈ [-Λ, Λ]` and tensor trapezoid over the transverse box,
/// plus the analytic value when both sides have closed-form envelopes.
pub fn nonalignment_margin<T: Real>(
    axis: usize,
    fp: &FluxPair<T>,
    surf: &InterfaceSurface<T>,
    domain: &BoxDomain<T>,
    sampling: &EnvelopeSampling<T>,
) -> Result<NonAlignmentEntry<T>> {
    fp.check_axis(axis)?;
    if fp.dim() != surf.dim() || fp.dim() != domain.dim() {
        return Err(Error::Usage(format!(
            "dimension mismatch: flux {}, surface {}, box {}",
            fp.dim(),
            surf.dim(),
            domain.dim()
        )));
    }
    let lambdas = sampling.lambda_grid()?;
    let form = form_for(axis, surf);
    let comp = fp.component(axis);
    let m = fp.dim() - 1;
    let k = domain.half_width();

    let sampled_margin = trapezoid(k, m, sampling.quad_points, |xhat| {
        let (mut l_min, mut l_max) = (T::infinity(), T::neg_infinity());
        let (mut r_min, mut r_max) = (T::infinity(), T::neg_infinity());
        for &l in &lambdas {
            let fl = comp.left.eval(xhat, l);
            let fr = comp.right.eval(xhat, l);
            l_min = l_min.min(fl);
            l_max = l_max.max(fl);
            r_min = r_min.min(fr);
            r_max = r_max.max(fr);
        }
        match form {
            ConditionForm::Standard => l_max - r_min,
            ConditionForm::Opposite => l_min - r_max,
        }
    });

    let analytic_margin = if comp.left.profile.range().is_some() && comp.right.profile.range().is_some() {
        Some(trapezoid(k, m, sampling.quad_points, |xhat| {
            let (l_lo, l_hi) = comp.left.envelope(xhat).expect("bounded profile");
            let (r_lo, r_hi) = comp.right.envelope(xhat).expect("bounded profile");
            match form {
                ConditionForm::Standard => l_hi - r_lo,
                ConditionForm::Opposite => l_lo - r_hi,
            }
        }))
    } else {
        None
    };

    let decisive = analytic_margin.unwrap_or(sampled_margin);
    let margin_pass = decisive.is_finite()
        && match form {
            ConditionForm::Standard => decisive <= -sampling.tolerance,
            ConditionForm::Opposite => decisive >= sampling.tolerance,
        };

    let mut zero_order_worst = T::neg_infinity();
    for xhat in lattice(k, m, sampling.quad_points) {
        let (l0, r0) = fp.zero_trace(axis, &xhat);
        let violation = match form {
            ConditionForm::Standard => l0 - r0,
            ConditionForm::Opposite => r0 - l0,
        };
        zero_order_worst = zero_order_worst.max(violation);
    }

    Ok(NonAlignmentEntry {
        axis,
        form,
        sampled_margin,
        analytic_margin,
        tolerance: sampling.tolerance,
        margin_pass,
        zero_order_pass: zero_order_worst <= T::zero(),
        zero_order_worst,
    })
}

/// Non-alignment check on every axis.
pub fn nonalignment_report<T: Real>(
    fp: &FluxPair<T>,
    surf: &InterfaceSurface<T>,
    domain: &BoxDomain<T>,
    sampling: &EnvelopeSampling<T>,
) -> Result<NonAlignmentReport<T>> {
    let entries = (0..fp.dim())
        .map(|k| nonalignment_margin(k, fp, surf, domain, sampling))
        .collect::<Result<Vec<_>>>()?;
    Ok(NonAlignmentReport {
        entries,
        sampling: *sampling,
        outside_hypotheses: surf.has_mixed_orientation(),
    })
}

/// `G = Σ_k ∫ |f_L^k(x̂_k, 0) - f_R^k(x̂_k, 0)| dx̂_k` over the truncated
/// transverse box; the growth rate bound of `‖u_ε(t)‖_{L¹}`.
pub fn zero_trace_gap<T: Real>(fp: &FluxPair<T>, domain: &BoxDomain<T>, quad_points: usize) -> Result<T> {
    if quad_points < 2 {
        return Err(Error::Usage(format!("quadrature needs at least 2 points per axis, got {quad_points}")));
    }
    let m = fp.dim() - 1;
    Ok((0..fp.dim()).fold(T::zero(), |acc, k| {
        acc + trapezoid(domain.half_width(), m, quad_points, |xhat| {
            let (l, r) = fp.zero_trace(k, xhat);
            (l - r).abs()
        })
    }))
}

/// `g_L(x̂, λ) = f_L(x̂, λ + u_left)`, `g_R(x̂, λ) = f_R(x̂, λ + u_right)`.
///
/// Constant Riemann data `u_left | u_right` across the interface becomes
/// zero initial data for the shifted pair. Envelopes over `λ ∈ ℝ` are
/// unchanged; zero traces move to the shifted states.
pub fn riemann_reduce<T: Real>(fp: &FluxPair<T>, u_left: T, u_right: T) -> FluxPair<T> {
    let mut out = fp.clone();
    for comp in &mut out.components {
        comp.left.shift += u_left;
        comp.right.shift += u_right;
    }
    out
}

/// Tensor-product trapezoid rule over `[-K, K]^dims`; `dims = 0` evaluates
/// `f` at the empty point.
pub fn trapezoid<T: Real>(half_width: T, dims: usize, points: usize, mut f: impl FnMut(&[T]) -> T) -> T {
    if dims == 0 {
        return f(&[]);
    }
    let nodes = linspace(-half_width, half_width, points);
    let h = (half_width + half_width) / count::<T>(points - 1);
    let mut idx = vec![0usize; dims];
    let mut x = vec![nodes[0]; dims];
    let mut acc = T::zero();
    loop {
        let mut w = T::one();
        for &i in &idx {
            if i == 0 || i == points - 1 {
                w *= lit(0.5);
            }
        }
        acc += w * f(&x);
        let mut j = dims;
        loop {
            if j == 0 {
                return acc * h.powi(dims as i32);
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < points {
                x[j] = nodes[idx[j]];
                break;
            }
            idx[j] = 0;
            x[j] = nodes[0];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn fam(eps: f64) -> MollifierFamily<f64> {
        MollifierFamily::new(eps).unwrap()
    }

    fn gauss2() -> (FluxPair<f64>, InterfaceSurface<f64>, BoxDomain<f64>) {
        (
            FluxPair::gauss_arctan(2, 4.0, &[Orientation::Decreasing]).unwrap(),
            InterfaceSurface::affine(vec![-1.0], 0.0),
            BoxDomain::new(5.0, 2).unwrap(),
        )
    }

    #[test]
    fn combined_flux_is_one_sided_outside_the_band() {
        let fp = FluxPair::arctan_gap(4.0);
        let surf = InterfaceSurface::point(0.0);
        let f = fam(0.1);
        for u in [-3.0, 0.0, 0.7] {
            assert_eq!(combined_flux(0, &[-0.1], u, &fp, &surf, &f).unwrap(), fp.left(0, &[], u));
            assert_eq!(combined_flux(0, &[-2.0], u, &fp, &surf, &f).unwrap(), fp.left(0, &[], u));
            assert_eq!(combined_flux(0, &[0.1], u, &fp, &surf, &f).unwrap(), fp.right(0, &[], u));
        }
        assert!(matches!(
            combined_flux(0, &[0.0], f64::NAN, &fp, &surf, &f),
            Err(Error::Numeric(_))
        ));
        assert!(combined_flux(1, &[0.0], 0.0, &fp, &surf, &f).is_err());
    }

    #[test]
    fn combined_flux_of_identical_sides_is_the_flux() {
        let fp = FluxPair::linear(1, 2.5);
        let surf = InterfaceSurface::point(0.0);
        let f = fam(0.1);
        for x in [-0.09, -0.03, 0.0, 0.04, 0.099] {
            let v = combined_flux(0, &[x], 1.2, &fp, &surf, &f).unwrap();
            assert!((v - 3.0).abs() < 1e-14, "{x}: {v}");
        }
    }

    #[test]
    fn flux_derivative_paths_agree() {
        let fp = FluxPair::arctan_gap(4.0);
        let fd = fp.clone().with_derivative_mode(DerivativeMode::FiniteDifference);
        let surf = InterfaceSurface::point(0.0);
        let f = fam(0.1);
        assert!((flux_u_derivative(0, &[0.5], 0.0, &fp, &surf, &f).unwrap() - 1.0).abs() < 1e-15);
        for x in [-0.5, -0.05, 0.0, 0.03, 0.5] {
            for u in [-20.0, -1.0, 0.0, 0.4, 3.0] {
                let a = flux_u_derivative(0, &[x], u, &fp, &surf, &f).unwrap();
                let b = flux_u_derivative(0, &[x], u, &fd, &surf, &f).unwrap();
                assert!((a - b).abs() < 1e-6, "x={x} u={u}: {a} vs {b}");
            }
        }
        let zero = FluxPair::<f64>::zero(1);
        assert_eq!(flux_u_derivative(0, &[0.0], 5.0, &zero, &surf, &f).unwrap(), 0.0);

        // custom profile without a derivative falls back to differences
        let custom = FluxSide::new(
            Transverse::Constant(1.0),
            Profile::Custom(Arc::new(|l: f64| l.sin())),
            Transverse::Constant(0.0),
        );
        let fp = FluxPair::new(vec![FluxComponent { left: custom.clone(), right: custom }], None).unwrap();
        let d = flux_u_derivative(0, &[0.2], 0.3, &fp, &surf, &f).unwrap();
        assert!((d - 0.3f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn arctan_gap_margin() {
        let fp = FluxPair::arctan_gap(4.0);
        let surf = InterfaceSurface::point(0.0);
        let b = BoxDomain::new(5.0, 1).unwrap();
        let e = nonalignment_margin(0, &fp, &surf, &b, &EnvelopeSampling::default()).unwrap();
        assert_eq!(e.form, ConditionForm::Standard);
        assert!((e.analytic_margin.unwrap() - (PI - 4.0)).abs() < 1e-12);
        assert!((e.sampled_margin - (PI - 4.0)).abs() < 2e-3);
        assert!(e.sampled_margin <= e.analytic_margin.unwrap());
        assert!(e.pass());
        assert_eq!(e.zero_order_worst, -4.0);
    }

    #[test]
    fn sampled_margin_increases_toward_analytic() {
        let fp = FluxPair::arctan_gap(4.0);
        let surf = InterfaceSurface::point(0.0);
        let b = BoxDomain::new(5.0, 1).unwrap();
        let mut last = f64::NEG_INFINITY;
        for lam in [1.0, 10.0, 100.0, 1000.0] {
            let s = EnvelopeSampling {
                lambda_max: lam,
                ..EnvelopeSampling::default()
            };
            let e = nonalignment_margin(0, &fp, &surf, &b, &s).unwrap();
            assert!(e.sampled_margin >= last);
            assert!(e.sampled_margin <= PI - 4.0);
            last = e.sampled_margin;
        }
    }

    #[test]
    fn gauss_arctan_margin_and_gap() {
        let (fp, surf, b) = gauss2();
        let s = EnvelopeSampling::default();
        let report = nonalignment_report(&fp, &surf, &b, &s).unwrap();
        let expect = (PI - 4.0) * PI.sqrt();
        for e in &report.entries {
            assert!((e.analytic_margin.unwrap() - expect).abs() < 0.01 * expect.abs());
            assert!((e.sampled_margin - expect).abs() < 0.01 * expect.abs());
        }
        assert!(report.pass());
        assert!(!report.outside_hypotheses);

        let g = zero_trace_gap(&fp, &b, 201).unwrap();
        let per_axis = 4.0 * PI.sqrt();
        assert!((g - 2.0 * per_axis).abs() < 0.01 * 2.0 * per_axis);
    }

    #[test]
    fn zero_trace_gap_examples() {
        let b = BoxDomain::new(5.0, 1).unwrap();
        assert_eq!(zero_trace_gap(&FluxPair::arctan_gap(4.0), &b, 2).unwrap(), 4.0);
        assert_eq!(zero_trace_gap(&FluxPair::<f64>::linear(1, 3.0), &b, 2).unwrap(), 0.0);
        assert!(zero_trace_gap(&FluxPair::arctan_gap(4.0), &b, 1).is_err());
    }

    #[test]
    fn zero_gap_and_reversed_gap_fail() {
        let surf = InterfaceSurface::point(0.0);
        let b = BoxDomain::new(5.0, 1).unwrap();
        let s = EnvelopeSampling::default();
        let e0 = nonalignment_margin(0, &FluxPair::arctan_gap(0.0), &surf, &b, &s).unwrap();
        assert!(!e0.pass());
        assert!(e0.zero_order_pass);
        let neg = nonalignment_margin(0, &FluxPair::arctan_gap(-1.0), &surf, &b, &s).unwrap();
        assert!(!neg.zero_order_pass);
        assert!(!neg.pass());
    }

    #[test]
    fn increasing_axis_uses_opposite_form() {
        let surf = InterfaceSurface::affine(vec![1.0], 0.0);
        let b = BoxDomain::new(5.0, 2).unwrap();
        let s = EnvelopeSampling::default();
        let fp = FluxPair::gauss_arctan(2, 4.0, surf.orientation()).unwrap();
        let r = nonalignment_report(&fp, &surf, &b, &s).unwrap();
        assert_eq!(r.entries[0].form, ConditionForm::Standard);
        assert_eq!(r.entries[1].form, ConditionForm::Opposite);
        let expect = (4.0 - PI) * PI.sqrt();
        assert!((r.entries[1].margin() - expect).abs() < 0.01 * expect);
        assert!(r.pass());

        // the decreasing-orientation flux does not satisfy the opposite form
        let wrong = FluxPair::gauss_arctan(2, 4.0, &[Orientation::Decreasing]).unwrap();
        let r = nonalignment_report(&wrong, &surf, &b, &s).unwrap();
        assert!(!r.entries[1].pass());
    }

    #[test]
    fn empty_lambda_grid_is_usage_error() {
        let s = EnvelopeSampling {
            lambda_points: 0,
            ..EnvelopeSampling::default()
        };
        let r = nonalignment_margin(
            0,
            &FluxPair::arctan_gap(4.0),
            &InterfaceSurface::point(0.0),
            &BoxDomain::new(5.0, 1).unwrap(),
            &s,
        );
        assert!(matches!(r, Err(Error::Usage(_))));
    }

    #[test]
    fn riemann_reduction() {
        let fp = FluxPair::arctan_gap(4.0);
        let same = riemann_reduce(&fp, 0.0, 0.0);
        for l in [-2.0f64, -0.0, 0.0, 1.5] {
            assert_eq!(same.left(0, &[], l).to_bits(), fp.left(0, &[], l).to_bits());
            assert_eq!(same.right(0, &[], l).to_bits(), fp.right(0, &[], l).to_bits());
        }
        let g = riemann_reduce(&fp, 1.0, -0.5);
        assert_eq!(g.left(0, &[], 0.0), fp.left(0, &[], 1.0));
        assert_eq!(g.right(0, &[], 0.0), fp.right(0, &[], -0.5));
        assert_eq!(g.component(0).left.envelope(&[]), fp.component(0).left.envelope(&[]));
        let back = riemann_reduce(&g, -1.0, 0.5);
        for l in [-3.0, 0.25, 2.0] {
            assert_eq!(back.left(0, &[], l), fp.left(0, &[], l));
            assert_eq!(back.right(0, &[], l), fp.right(0, &[], l));
        }
    }

    #[test]
    fn fixtures_are_bounded_and_integrable() {
        let (fp, _, b) = gauss2();
        let pts = lattice(5.0, 2, 21);
        let lambdas = linspace(-50.0, 50.0, 101);
        assert!(fp.sampled_max_abs(&pts, &lambdas) <= fp.bound().unwrap());
        let ints = fp.transverse_sup_integral(&b, &EnvelopeSampling::default()).unwrap();
        for v in ints {
            assert!(v.is_finite());
            assert!((v - (PI / 2.0 + 2.0) * PI.sqrt()).abs() < 1e-6);
        }
    }

    #[test]
    fn trapezoid_integrates_gaussian() {
        let v: f64 = trapezoid(5.0, 2, 201, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        assert!((v - PI).abs() < 1e-9);
        assert_eq!(trapezoid(5.0f64, 0, 3, |_| 7.0), 7.0);
    }
}
