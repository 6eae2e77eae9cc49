//! Discontinuity surface `x₁ = φ(x̂₁)`, the signed offset `s(x) = x₁ - φ(x̂₁)`,
//! and box/band subsets of the domain.
//!
//! Axes are 0-based throughout: axis 0 is `x₁`, and the transverse point
//! `x̂_k` is `x` with axis `k` removed.

use crate::error::{Error, Result};
use crate::scalar::{count, lit, Real};

/// Sign of `∂φ/∂x_k` on a transverse coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// `∂φ/∂x_k < 0`, the default hypothesis.
    Decreasing,
    /// `∂φ/∂x_k > 0`; the opposite-inequality form of the non-alignment
    /// condition applies to this coordinate.
    Increasing,
}

impl Orientation {
    pub fn sign<T: Real>(self) -> T {
        match self {
            Orientation::Decreasing => -T::one(),
            Orientation::Increasing => T::one(),
        }
    }

    fn from_slope<T: Real>(slope: T) -> Self {
        if slope > T::zero() {
            Orientation::Increasing
        } else {
            Orientation::Decreasing
        }
    }
}

/// Built-in interface profiles with analytic derivatives.
#[derive(Clone, Debug, PartialEq)]
pub enum SurfaceShape<T> {
    /// `φ ≡ offset`. In one dimension this is the point interface `x₁ = offset`.
    Constant { offset: T },
    /// `φ(x̂) = Σ slopes[j]·x̂_j + intercept`.
    Affine { slopes: Vec<T>, intercept: T },
    /// `φ(x̂) = intercept + Σ amplitudes[j]·atan(x̂_j / width)`.
    ArctanProfile {
        amplitudes: Vec<T>,
        width: T,
        intercept: T,
    },
    /// `φ(x̂) = intercept + curvature·|x̂|²`. Not monotone; kept as a negative
    /// fixture for the monotonicity validator.
    Paraboloid { curvature: T, intercept: T },
}

/// The interface `D = {x : x₁ = φ(x̂₁)}` in `ℝ^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceSurface<T> {
    dim: usize,
    shape: SurfaceShape<T>,
    orientation: Vec<Orientation>,
}

impl<T: Real> InterfaceSurface<T> {
    /// One-dimensional point interface at `x₁ = offset`.
    pub fn point(offset: T) -> Self {
        Self {
            dim: 1,
            shape: SurfaceShape::Constant { offset },
            orientation: Vec::new(),
        }
    }

    /// `φ ≡ offset` in `dim` dimensions.
    pub fn constant(dim: usize, offset: T) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            shape: SurfaceShape::Constant { offset },
            orientation: vec![Orientation::Decreasing; dim - 1],
        })
    }

    /// Affine interface over `d = slopes.len() + 1` dimensions; orientation tags
    /// follow the slope signs.
    pub fn affine(slopes: Vec<T>, intercept: T) -> Self {
        let orientation = slopes.iter().map(|&c| Orientation::from_slope(c)).collect();
        Self {
            dim: slopes.len() + 1,
            shape: SurfaceShape::Affine { slopes, intercept },
            orientation,
        }
    }

    pub fn arctan_profile(amplitudes: Vec<T>, width: T, intercept: T) -> Result<Self> {
        if !(width > T::zero()) {
            return Err(Error::Domain(format!("arctan profile width must be positive, got {width}")));
        }
        let orientation = amplitudes.iter().map(|&c| Orientation::from_slope(c)).collect();
        Ok(Self {
            dim: amplitudes.len() + 1,
            shape: SurfaceShape::ArctanProfile {
                amplitudes,
                width,
                intercept,
            },
            orientation,
        })
    }

    /// Paraboloid with declared orientation tags (the validator will find
    /// them violated on any lattice straddling the vertex).
    pub fn paraboloid(dim: usize, curvature: T, intercept: T, declared: Orientation) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            shape: SurfaceShape::Paraboloid { curvature, intercept },
            orientation: vec![declared; dim - 1],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &SurfaceShape<T> {
        &self.shape
    }

    /// Orientation tags for transverse coordinates `x_2..x_d` (index `j` is axis `j + 1`).
    pub fn orientation(&self) -> &[Orientation] {
        &self.orientation
    }

    /// True when the orientation tags do not all agree.
    pub fn has_mixed_orientation(&self) -> bool {
        self.orientation.windows(2).any(|w| w[0] != w[1])
    }

    /// `φ(x̂₁)`.
    pub fn phi(&self, xhat: &[T]) -> T {
        debug_assert_eq!(xhat.len(), self.dim - 1);
        match &self.shape {
            SurfaceShape::Constant { offset } => *offset,
            SurfaceShape::Affine { slopes, intercept } => slopes
                .iter()
                .zip(xhat)
                .fold(*intercept, |acc, (&c, &x)| acc + c * x),
            SurfaceShape::ArctanProfile {
                amplitudes,
                width,
                intercept,
            } => amplitudes
                .iter()
                .zip(xhat)
                .fold(*intercept, |acc, (&a, &x)| acc + a * (x / *width).atan()),
            SurfaceShape::Paraboloid { curvature, intercept } => {
                *intercept + *curvature * xhat.iter().fold(T::zero(), |acc, &x| acc + x * x)
            }
        }
    }

    /// `∂φ/∂x_k` for the transverse coordinates, in order.
    pub fn grad_phi(&self, xhat: &[T]) -> Vec<T> {
        debug_assert_eq!(xhat.len(), self.dim - 1);
        match &self.shape {
            SurfaceShape::Constant { .. } => vec![T::zero(); xhat.len()],
            SurfaceShape::Affine { slopes, .. } => slopes.clone(),
            SurfaceShape::ArctanProfile {
                amplitudes, width, ..
            } => amplitudes
                .iter()
                .zip(xhat)
                .map(|(&a, &x)| {
                    let r = x / *width;
                    a / (*width * (T::one() + r * r))
                })
                .collect(),
            SurfaceShape::Paraboloid { curvature, .. } => {
                xhat.iter().map(|&x| lit::<T>(2.0) * *curvature * x).collect()
            }
        }
    }

    /// `∂²φ/∂x_k²` for the transverse coordinates, in order.
    pub fn hess_diag_phi(&self, xhat: &[T]) -> Vec<T> {
        debug_assert_eq!(xhat.len(), self.dim - 1);
        match &self.shape {
            SurfaceShape::Constant { .. } | SurfaceShape::Affine { .. } => vec![T::zero(); xhat.len()],
            SurfaceShape::ArctanProfile {
                amplitudes, width, ..
            } => amplitudes
                .iter()
                .zip(xhat)
                .map(|(&a, &x)| {
                    let r = x / *width;
                    let q = T::one() + r * r;
                    -lit::<T>(2.0) * a * r / (*width * *width * q * q)
                })
                .collect(),
            SurfaceShape::Paraboloid { curvature, .. } => vec![lit::<T>(2.0) * *curvature; xhat.len()],
        }
    }

    /// `s(x) = x₁ - φ(x̂₁)`; zero exactly on the interface.
    pub fn signed_offset(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim {
            return Err(Error::Usage(format!(
                "point has dimension {}, interface lives in dimension {}",
                x.len(),
                self.dim
            )));
        }
        Ok(x[0] - self.phi(&x[1..]))
    }

    /// Membership in the band `A_η = {x : |s(x)| < η}`.
    pub fn band_indicator(&self, x: &[T], eta: T) -> Result<bool> {
        Ok(self.signed_offset(x)?.abs() < eta)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::Usage("dimension must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Signed offset of `x` from the interface.
pub fn signed_offset<T: Real>(x: &[T], surf: &InterfaceSurface<T>) -> Result<T> {
    surf.signed_offset(x)
}

/// Band membership `|s(x)| < η`.
pub fn band_indicator<T: Real>(x: &[T], eta: T, surf: &InterfaceSurface<T>) -> Result<bool> {
    surf.band_indicator(x, eta)
}

/// `[a, x̂_k]`: `x` with component `axis` replaced by `a`.
pub fn replace_component<T: Real>(x: &[T], axis: usize, a: T) -> Result<Vec<T>> {
    if axis >= x.len() {
        return Err(Error::Usage(format!(
            "axis {axis} out of range for a point of dimension {}",
            x.len()
        )));
    }
    let mut y = x.to_vec();
    y[axis] = a;
    Ok(y)
}

/// `x̂_k`: `x` with component `axis` removed.
pub fn transverse<T: Real>(x: &[T], axis: usize) -> Vec<T> {
    x.iter()
        .enumerate()
        .filter_map(|(j, &v)| (j != axis).then_some(v))
        .collect()
}

/// The cube `Q^d(K) = [-K, K]^d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxDomain<T> {
    half_width: T,
    dim: usize,
}

impl<T: Real> BoxDomain<T> {
    pub fn new(half_width: T, dim: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > T::zero()) {
            return Err(Error::Domain(format!("box half-width must be positive, got {half_width}")));
        }
        check_dim(dim)?;
        Ok(Self { half_width, dim })
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim && x.iter().all(|v| v.abs() <= self.half_width)
    }

    /// Deterministic lattice over the transverse box `[-K, K]^{d-1}`, with
    /// `per_axis` points per coordinate (a single empty point when `d = 1`).
    pub fn transverse_lattice(&self, per_axis: usize) -> Vec<Vec<T>> {
        lattice(self.half_width, self.dim - 1, per_axis)
    }
}

/// Row-major lattice over `[-K, K]^dims`.
pub fn lattice<T: Real>(half_width: T, dims: usize, per_axis: usize) -> Vec<Vec<T>> {
    let axis = crate::scalar::linspace(-half_width, half_width, per_axis);
    let mut points = vec![Vec::with_capacity(dims)];
    for _ in 0..dims {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    points
}

/// Monotonicity findings for one transverse coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisMonotonicity<T> {
    /// Axis index in `x` (1 ..= d-1).
    pub axis: usize,
    pub min_slope: T,
    pub max_slope: T,
    /// Smallest `|∂φ/∂x_k|` seen; reported, not enforced.
    pub min_abs_slope: T,
    pub declared: Orientation,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityReport<T> {
    pub axes: Vec<AxisMonotonicity<T>>,
    pub samples: usize,
    /// Orientation tags disagree across coordinates.
    pub mixed_orientation: bool,
    pub pass: bool,
}

/// Checks that every `∂φ/∂x_k` keeps the declared strict sign over the sample
/// points (transverse coordinates `x̂₁`, each of length `d - 1`).
pub fn validate_monotonicity<T: Real>(
    surf: &InterfaceSurface<T>,
    samples: &[Vec<T>],
) -> Result<MonotonicityReport<T>> {
    if samples.is_empty() {
        return Err(Error::Usage("monotonicity check needs at least one sample".into()));
    }
    let m = surf.dim() - 1;
    if let Some(bad) = samples.iter().find(|p| p.len() != m) {
        return Err(Error::Usage(format!(
            "transverse sample has dimension {}, expected {m}",
            bad.len()
        )));
    }
    let mut axes: Vec<AxisMonotonicity<T>> = surf
        .orientation()
        .iter()
        .enumerate()
        .map(|(j, &declared)| AxisMonotonicity {
            axis: j + 1,
            min_slope: T::infinity(),
            max_slope: T::neg_infinity(),
            min_abs_slope: T::infinity(),
            declared,
            pass: true,
        })
        .collect();
    for p in samples {
        for (entry, g) in axes.iter_mut().zip(surf.grad_phi(p)) {
            entry.min_slope = entry.min_slope.min(g);
            entry.max_slope = entry.max_slope.max(g);
            entry.min_abs_slope = entry.min_abs_slope.min(g.abs());
        }
    }
    for entry in &mut axes {
        entry.pass = match entry.declared {
            Orientation::Decreasing => entry.max_slope < T::zero(),
            Orientation::Increasing => entry.min_slope > T::zero(),
        };
    }
    let pass = axes.iter().all(|a| a.pass);
    Ok(MonotonicityReport {
        axes,
        samples: samples.len(),
        mixed_orientation: surf.has_mixed_orientation(),
        pass,
    })
}

/// Central-difference gradient of `φ`; used to cross-check the analytic one.
pub fn fd_grad_phi<T: Real>(surf: &InterfaceSurface<T>, xhat: &[T], h: T) -> Vec<T> {
    (0..xhat.len())
        .map(|j| {
            let mut p = xhat.to_vec();
            let mut q = xhat.to_vec();
            p[j] += h;
            q[j] -= h;
            (surf.phi(&p) - surf.phi(&q)) / (count::<T>(2) * h)
        })
        .collect()
}
