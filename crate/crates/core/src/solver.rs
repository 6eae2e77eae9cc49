//! Conservative finite-volume solver for the viscous regularized equation
//!
//! ```text
//! ∂_t u + Σ_k ∂_k [ f_L^k(x̂_k, u)·H_ε(-s) + f_R^k(x̂_k, u)·H_ε(s) ] = ε Δu,   u(0) = 0
//! ```
//!
//! on a uniform grid over `[-K, K]^d`: Rusanov (local Lax-Friedrichs)
//! advective flux plus a centered diffusive flux, forward Euler in time,
//! homogeneous Dirichlet ghost cells. Every face carries a single total flux,
//! so the interior mass changes only through the boundary faces; each step
//! records that balance in a ledger entry.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flux::{DerivativeMode, FluxPair, FluxSide, Profile};
use crate::geometry::{transverse, InterfaceSurface};
use crate::mollifier::MollifierFamily;
use crate::scalar::{count, linspace, lit, neumaier_sum, par_sum_by, Real};

/// Minimum items per rayon task.
const PAR_MIN: usize = 1 << 12;
/// Floor on the wave-speed bound when choosing the advective time step.
const ALPHA_FLOOR: f64 = 1e-12;
/// Safety factor on the local wave-speed bound in the Rusanov flux.
const ALPHA_SAFETY: f64 = 1.1;
/// Boundary-layer guard: `max |u|` on boundary cells relative to `max |u|`.
const BOUNDARY_GUARD: f64 = 1e-6;

/// Uniform grid of `n^d` cells on `[-K, K]^d`, flattened row-major with
/// axis 0 (`x₁`) slowest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<T> {
    dim: usize,
    half_width: T,
    cells: usize,
    spacing: T,
}

impl<T: Real> Grid<T> {
    pub fn new(dim: usize, half_width: T, cells: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Usage("grid dimension must be at least 1".into()));
        }
        if !(half_width.is_finite() && half_width > T::zero()) {
            return Err(Error::Domain(format!("grid half-width must be positive, got {half_width}")));
        }
        if cells < 8 {
            return Err(Error::Usage(format!("grid needs at least 8 cells per axis, got {cells}")));
        }
        Ok(Self {
            dim,
            half_width,
            cells,
            spacing: (half_width + half_width) / count(cells),
        })
    }

    /// Cells per axis giving `h ≈ ε/5`: `n = ceil(2K / (ε/5))`.
    pub fn auto_cells(half_width: T, eps: T) -> usize {
        ((half_width + half_width) / (eps / lit(5.0)))
            .ceil()
            .to_usize()
            .expect("cell count fits in usize")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    /// Cells per axis.
    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    /// Total number of cells, `n^d`.
    pub fn len(&self) -> usize {
        self.cells.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> T {
        self.spacing.powi(self.dim as i32)
    }

    pub fn face_area(&self) -> T {
        self.spacing.powi(self.dim as i32 - 1)
    }

    /// Center coordinate of cell `i` along any axis.
    pub fn center(&self, i: usize) -> T {
        -self.half_width + (count::<T>(i) + lit(0.5)) * self.spacing
    }

    /// Coordinate of face `j` (`0..=n`) along any axis.
    pub fn face(&self, j: usize) -> T {
        -self.half_width + count::<T>(j) * self.spacing
    }

    /// Number of cells in a flat block after `axis` (row-major stride of `axis`).
    pub fn stride(&self, axis: usize) -> usize {
        self.cells.pow((self.dim - 1 - axis) as u32)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for slot in idx.iter_mut().rev() {
            *slot = flat % self.cells;
            flat /= self.cells;
        }
        idx
    }

    pub fn cell_center(&self, flat: usize) -> Vec<T> {
        self.multi_index(flat).into_iter().map(|i| self.center(i)).collect()
    }

    /// `h ≤ ε/4`: the mollifier band `2ε` spans at least 8 cells.
    pub fn resolves(&self, eps: T) -> bool {
        self.spacing <= eps / lit(4.0)
    }

    fn boundary_cells(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&c| self.multi_index(c).iter().any(|&i| i == 0 || i + 1 == self.cells))
            .collect()
    }
}

/// Cell averages of the unknown at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: Grid<T>,
    values: Vec<T>,
    time: T,
}

impl<T: Real> Field<T> {
    pub fn zeros(grid: Grid<T>) -> Self {
        Self {
            values: vec![T::zero(); grid.len()],
            grid,
            time: T::zero(),
        }
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: Grid<T>, f: impl Fn(&[T]) -> T) -> Self {
        let values = (0..grid.len()).map(|c| f(&grid.cell_center(c))).collect();
        Self {
            grid,
            values,
            time: T::zero(),
        }
    }

    pub fn from_values(grid: Grid<T>, values: Vec<T>, time: T) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Usage(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, time })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `Σ u·h^d`, compensated and chunked so the result does not depend on
    /// the thread count.
    pub fn mass(&self) -> T {
        par_sum_by(&self.values, |_, v| v) * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Snapshot dump: a `# t=.. d=.. n=.. K=.. eps=..` header, then one
    /// `x1 [x2 ..] u` record per cell in row-major order.
    pub fn write_snapshot<W: std::io::Write>(&self, out: &mut W, eps: T) -> std::io::Result<()> {
        writeln!(
            out,
            "# t={} d={} n={} K={} eps={}",
            self.time,
            self.grid.dim,
            self.grid.cells,
            self.grid.half_width,
            eps
        )?;
        for (c, v) in self.values.iter().enumerate() {
            for x in self.grid.cell_center(c) {
                write!(out, "{x} ")?;
            }
            writeln!(out, "{v}")?;
        }
        Ok(())
    }
}

/// Time-stepping parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeConfig<T> {
    pub cfl_advective: T,
    pub diffusion_safety: T,
    /// Viscosity `ε` multiplying the Laplacian.
    pub viscosity: T,
    pub end_time: T,
    /// Number of evenly spaced probe times over `[0, T]`, endpoints included.
    pub probe_count: usize,
}

impl<T: Real> SchemeConfig<T> {
    pub fn new(viscosity: T, end_time: T) -> Self {
        Self {
            cfl_advective: lit(0.45),
            diffusion_safety: lit(0.45),
            viscosity,
            end_time,
            probe_count: 21,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let half = lit::<T>(0.5);
        for (name, v) in [("cfl_advective", self.cfl_advective), ("diffusion_safety", self.diffusion_safety)] {
            if !(v > T::zero() && v < half) {
                return Err(Error::Domain(format!("{name} must lie in (0, 0.5), got {v}")));
            }
        }
        if !(self.viscosity.is_finite() && self.viscosity > T::zero()) {
            return Err(Error::Domain(format!("viscosity must be positive, got {}", self.viscosity)));
        }
        if !(self.end_time.is_finite() && self.end_time >= T::zero()) {
            return Err(Error::Domain(format!("end time must be nonnegative, got {}", self.end_time)));
        }
        Ok(())
    }

    pub fn probe_times(&self) -> Vec<T> {
        linspace(T::zero(), self.end_time, self.probe_count.max(1))
    }
}

/// Mass balance of one step: `mass_after - mass_before` should equal
/// `dt · boundary_inflow`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LedgerEntry<T> {
    pub step: usize,
    /// Time at the end of the step.
    pub time: T,
    pub dt: T,
    pub mass_before: T,
    pub mass_after: T,
    /// Net rate of mass entering through the boundary faces (advective plus
    /// diffusive flux).
    pub boundary_inflow: T,
}

impl<T: Real> LedgerEntry<T> {
    pub fn mass_change(&self) -> T {
        self.mass_after - self.mass_before
    }

    /// `|Δmass - dt·inflow| / max(|Δmass|, dt·|inflow|, 1e-300)`.
    pub fn relative_residual(&self) -> T {
        let dm = self.mass_change();
        let flux = self.dt * self.boundary_inflow;
        let scale = dm.abs().max(flux.abs()).max(T::min_positive_value());
        (dm - flux).abs() / scale
    }
}

#[derive(Clone, Debug)]
struct AxisFaces<T> {
    left_profile: usize,
    right_profile: usize,
    /// Per face: `H_ε(-s)·amp_L`, `H_ε(s)·amp_R`, `H_ε(-s)·off_L + H_ε(s)·off_R`.
    coeff: Vec<[T; 3]>,
    /// Cells per axis-line block after this axis.
    inner: usize,
}

#[derive(Clone, Debug)]
struct ProfileTable<T> {
    profile: Profile<T>,
    shift: T,
    analytic: bool,
    values: Vec<T>,
    slopes: Vec<T>,
    ghost: (T, T),
}

impl<T: Real> ProfileTable<T> {
    fn new(side: &FluxSide<T>, analytic: bool, cells: usize) -> Self {
        let mut table = Self {
            profile: side.profile.clone(),
            shift: side.shift,
            analytic,
            values: vec![T::zero(); cells],
            slopes: vec![T::zero(); cells],
            ghost: (T::zero(), T::zero()),
        };
        table.ghost = table.eval(T::zero());
        table
    }

    fn eval(&self, u: T) -> (T, T) {
        Self::point(&self.profile, self.shift, self.analytic)(u)
    }

    /// Value and slope of the shifted profile at state `u`.
    fn point(profile: &Profile<T>, shift: T, analytic: bool) -> impl Fn(T) -> (T, T) + Sync + '_ {
        move |u| {
            let l = if shift == T::zero() { u } else { u + shift };
            let d = if analytic {
                profile.derivative(l).unwrap_or_else(|| profile.fd_derivative(l))
            } else {
                profile.fd_derivative(l)
            };
            (profile.eval(l), d)
        }
    }

    fn matches(&self, side: &FluxSide<T>) -> bool {
        self.profile == side.profile && self.shift.to_f64().map(f64::to_bits) == side.shift.to_f64().map(f64::to_bits)
    }

    fn refresh(&mut self, u: &[T]) {
        let Self {
            profile,
            shift,
            analytic,
            values,
            slopes,
            ..
        } = self;
        let point = Self::point(profile, *shift, *analytic);
        values
            .par_iter_mut()
            .zip(slopes.par_iter_mut())
            .zip(u.par_iter())
            .with_min_len(PAR_MIN)
            .for_each(|((v, s), &x)| (*v, *s) = point(x));
    }
}

/// Everything a run produces besides the probe observations.
#[derive(Clone, Debug)]
pub struct RunSummary<T> {
    pub final_field: Field<T>,
    pub ledger: Vec<LedgerEntry<T>>,
    pub steps: usize,
    /// Boundary-guard ("domain too small") notices, one per offending probe.
    pub warnings: Vec<String>,
}

/// Snapshots at the probe times plus the step ledger.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub snapshots: Vec<Field<T>>,
    pub ledger: Vec<LedgerEntry<T>>,
    pub steps: usize,
    pub warnings: Vec<String>,
}

/// Explicit solver bound to one flux, interface, mollifier and grid.
#[derive(Clone, Debug)]
pub struct Solver<T> {
    grid: Grid<T>,
    scheme: SchemeConfig<T>,
    tables: Vec<ProfileTable<T>>,
    axes: Vec<AxisFaces<T>>,
    face_flux: Vec<Vec<T>>,
    next: Vec<T>,
    boundary: Vec<usize>,
    fault: Option<(usize, T)>,
}

impl<T: Real> Solver<T> {
    pub fn new(
        grid: Grid<T>,
        flux: &FluxPair<T>,
        surface: &InterfaceSurface<T>,
        mollifier: &MollifierFamily<T>,
        scheme: SchemeConfig<T>,
    ) -> Result<Self> {
        scheme.validate()?;
        if flux.dim() != grid.dim() || surface.dim() != grid.dim() {
            return Err(Error::Usage(format!(
                "dimension mismatch: grid {}, flux {}, surface {}",
                grid.dim(),
                flux.dim(),
                surface.dim()
            )));
        }
        let analytic = flux.derivative_mode() == DerivativeMode::Analytic;
        let mut tables: Vec<ProfileTable<T>> = Vec::new();
        let mut table_for = |side: &FluxSide<T>| -> usize {
            if let Some(i) = tables.iter().position(|t| t.matches(side)) {
                return i;
            }
            tables.push(ProfileTable::new(side, analytic, grid.len()));
            tables.len() - 1
        };
        let n = grid.cells_per_axis();
        let mut axes = Vec::with_capacity(grid.dim());
        for (k, comp) in flux.components().iter().enumerate() {
            let left_profile = table_for(&comp.left);
            let right_profile = table_for(&comp.right);
            let inner = grid.stride(k);
            let faces = grid.len() / n * (n + 1);
            let coeff = (0..faces)
                .into_par_iter()
                .with_min_len(PAR_MIN)
                .map(|f| {
                    let x = face_center(&grid, k, inner, f);
                    let s = surface.signed_offset(&x)?;
                    let xhat = transverse(&x, k);
                    let hl = mollifier.heaviside(-s)?;
                    let hr = mollifier.heaviside(s)?;
                    Ok([
                        hl * comp.left.amplitude.eval(&xhat),
                        hr * comp.right.amplitude.eval(&xhat),
                        hl * comp.left.offset.eval(&xhat) + hr * comp.right.offset.eval(&xhat),
                    ])
                })
                .collect::<Result<Vec<_>>>()?;
            axes.push(AxisFaces {
                left_profile,
                right_profile,
                coeff,
                inner,
            });
        }
        let face_flux = axes.iter().map(|a| vec![T::zero(); a.coeff.len()]).collect();
        Ok(Self {
            grid,
            scheme,
            tables,
            axes,
            face_flux,
            next: vec![T::zero(); grid.len()],
            boundary: grid.boundary_cells(),
            fault: None,
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn scheme(&self) -> &SchemeConfig<T> {
        &self.scheme
    }

    /// Test hook: adds `delta` to `cell` after the next update, before the
    /// ledger is written, so ledger checks can be shown to detect it.
    #[doc(hidden)]
    pub fn inject_fault(&mut self, cell: usize, delta: T) {
        self.fault = Some((cell, delta));
    }

    /// Fills the face fluxes for `u` and returns the per-axis maximum wave-speed
    /// bound.
    fn compute_faces(&mut self, u: &[T]) -> Vec<T> {
        for t in &mut self.tables {
            t.refresh(u);
        }
        let n = self.grid.cells_per_axis();
        let h = self.grid.spacing();
        let nu_over_h = self.scheme.viscosity / h;
        let half = lit::<T>(0.5);
        let safety = lit::<T>(ALPHA_SAFETY);
        let tables = &self.tables;
        self.axes
            .iter()
            .zip(self.face_flux.iter_mut())
            .map(|(axis, out)| {
                let lp = &tables[axis.left_profile];
                let rp = &tables[axis.right_profile];
                let inner = axis.inner;
                let coeff = &axis.coeff;
                let state = |c: usize| (u[c], lp.values[c], lp.slopes[c], rp.values[c], rp.slopes[c]);
                let ghost = (T::zero(), lp.ghost.0, lp.ghost.1, rp.ghost.0, rp.ghost.1);
                let rows_per_task = (PAR_MIN / inner).max(1);
                out.par_chunks_mut(inner * rows_per_task)
                    .enumerate()
                    .map(|(task, chunk)| {
                        let first = task * rows_per_task;
                        let (mut o, mut j) = (first / (n + 1), first % (n + 1));
                        let mut f = first * inner;
                        let mut amax = T::zero();
                        for row in chunk.chunks_mut(inner) {
                            let lo = (j > 0).then(|| (o * n + j - 1) * inner);
                            let hi = (j < n).then(|| (o * n + j) * inner);
                            for (q, g) in row.iter_mut().enumerate() {
                                let a = lo.map_or(ghost, |b| state(b + q));
                                let b = hi.map_or(ghost, |b| state(b + q));
                                let [wl, wr, off] = coeff[f];
                                let fa = wl * a.1 + wr * a.3 + off;
                                let fb = wl * b.1 + wr * b.3 + off;
                                let da = (wl * a.2 + wr * a.4).abs();
                                let db = (wl * b.2 + wr * b.4).abs();
                                let alpha = safety * da.max(db);
                                let jump = b.0 - a.0;
                                *g = half * (fa + fb) - half * alpha * jump - nu_over_h * jump;
                                amax = amax.max(alpha);
                                f += 1;
                            }
                            j += 1;
                            if j > n {
                                j = 0;
                                o += 1;
                            }
                        }
                        amax
                    })
                    .reduce(T::zero, T::max)
            })
            .collect()
    }

    fn dt_from_alpha(&self, alpha: &[T]) -> T {
        let h = self.grid.spacing();
        let floor = lit::<T>(ALPHA_FLOOR);
        let advective = alpha
            .iter()
            .fold(T::infinity(), |m, &a| m.min(self.scheme.cfl_advective * h / a.max(floor)));
        let diffusive =
            self.scheme.diffusion_safety * h * h / (count::<T>(2 * self.grid.dim()) * self.scheme.viscosity);
        advective.min(diffusive)
    }

    /// `min_k (cfl·h / max α^k, safety·h² / (2dε))`.
    pub fn stable_dt(&mut self, u: &Field<T>) -> T {
        let alpha = self.compute_faces(&u.values);
        self.dt_from_alpha(&alpha)
    }

    /// One forward-Euler step of length `min(stable_dt, max_dt)`, in place.
    /// When `max_dt` is the binding limit the time lands exactly on
    /// `u.time + max_dt`.
    pub fn advance(&mut self, u: &mut Field<T>, max_dt: T, step: usize) -> Result<LedgerEntry<T>> {
        if u.grid != self.grid {
            return Err(Error::Usage("field grid does not match solver grid".into()));
        }
        let alpha = self.compute_faces(&u.values);
        let stable = self.dt_from_alpha(&alpha);
        let (dt, landing) = if max_dt <= stable {
            (max_dt, Some(u.time + max_dt))
        } else {
            (stable, None)
        };

        let n = self.grid.cells_per_axis();
        let ratio = dt / self.grid.spacing();
        // `next` first accumulates the flux divergence axis by axis.
        for (k, (axis, g)) in self.axes.iter().zip(&self.face_flux).enumerate() {
            let inner = axis.inner;
            let rows_per_task = (PAR_MIN / inner).max(1);
            self.next
                .par_chunks_mut(inner * rows_per_task)
                .enumerate()
                .for_each(|(task, chunk)| {
                    let first = task * rows_per_task;
                    // row r = o·n + i has its low faces at row r + o of the face array
                    let mut o = first / n;
                    let mut i = first % n;
                    for (r, row) in (first..).zip(chunk.chunks_mut(inner)) {
                        let lo = (r + o) * inner;
                        for (q, d) in row.iter_mut().enumerate() {
                            let diff = g[lo + inner + q] - g[lo + q];
                            if k == 0 {
                                *d = diff;
                            } else {
                                *d += diff;
                            }
                        }
                        i += 1;
                        if i == n {
                            i = 0;
                            o += 1;
                        }
                    }
                });
        }
        let old = &u.values;
        self.next
            .par_iter_mut()
            .with_min_len(PAR_MIN)
            .zip(old.par_iter())
            .for_each(|(d, &v)| *d = v - ratio * *d);
        if let Some((cell, delta)) = self.fault.take() {
            self.next[cell] += delta;
        }
        if let Some(cell) = self.next.iter().position(|v| !v.is_finite()) {
            return Err(Error::Instability {
                step,
                time: u.time.to_f64().unwrap_or(f64::NAN),
                cell,
                value: self.next[cell].to_f64().unwrap_or(f64::NAN),
                max_abs_before: u.max_abs().to_f64().unwrap_or(f64::NAN),
            });
        }

        let mut boundary = Vec::with_capacity(4 * self.axes.len());
        for (axis, g) in self.axes.iter().zip(&self.face_flux) {
            let inner = axis.inner;
            let lines = g.len() / ((n + 1) * inner);
            for o in 0..lines {
                for q in 0..inner {
                    let base = o * (n + 1) * inner + q;
                    boundary.push(g[base]);
                    boundary.push(-g[base + n * inner]);
                }
            }
        }
        let boundary_inflow = neumaier_sum(boundary) * self.grid.face_area();

        let mass_before = u.mass();
        std::mem::swap(&mut u.values, &mut self.next);
        u.time = landing.unwrap_or(u.time + dt);
        Ok(LedgerEntry {
            step,
            time: u.time,
            dt,
            mass_before,
            mass_after: u.mass(),
            boundary_inflow,
        })
    }

    /// Functional form of [`Solver::advance`] with the stable time step.
    pub fn step(&mut self, u: &Field<T>) -> Result<Field<T>> {
        let mut next = u.clone();
        self.advance(&mut next, T::infinity(), 0)?;
        Ok(next)
    }

    /// Integrates from `initial` to the configured end time, landing exactly
    /// on each probe time and handing the field to `observer` there.
    ///
    /// Probe times must be ascending and lie in `[initial.time, T]`.
    pub fn run_from<F>(&mut self, initial: Field<T>, probe_times: &[T], mut observer: F) -> Result<RunSummary<T>>
    where
        F: FnMut(&Field<T>) -> Result<()>,
    {
        let end = self.scheme.end_time;
        if probe_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Usage("probe times must be ascending".into()));
        }
        if probe_times.iter().any(|&t| t < initial.time || t > end) {
            return Err(Error::Usage("probe times must lie within the run interval".into()));
        }
        let mut u = initial;
        let mut ledger = Vec::new();
        let mut warnings = Vec::new();
        let mut next_probe = 0;
        loop {
            while next_probe < probe_times.len() && probe_times[next_probe] <= u.time {
                observer(&u)?;
                if let Some(w) = self.boundary_warning(&u) {
                    warnings.push(w);
                }
                next_probe += 1;
            }
            if u.time >= end {
                break;
            }
            let target = probe_times.get(next_probe).copied().unwrap_or(end).min(end);
            let max_dt = target - u.time;
            let entry = self.advance(&mut u, max_dt, ledger.len())?;
            ledger.push(entry);
        }
        Ok(RunSummary {
            final_field: u,
            steps: ledger.len(),
            ledger,
            warnings,
        })
    }

    /// Zero initial data, snapshots kept at every probe time.
    pub fn run(&mut self, probe_times: &[T]) -> Result<Trajectory<T>> {
        let mut snapshots = Vec::with_capacity(probe_times.len());
        let summary = self.run_from(Field::zeros(self.grid), probe_times, |f| {
            snapshots.push(f.clone());
            Ok(())
        })?;
        Ok(Trajectory {
            snapshots,
            ledger: summary.ledger,
            steps: summary.steps,
            warnings: summary.warnings,
        })
    }

    fn boundary_warning(&self, u: &Field<T>) -> Option<String> {
        let peak = u.max_abs();
        let edge = self.boundary.iter().fold(T::zero(), |m, &c| m.max(u.values[c].abs()));
        (peak > T::zero() && edge > lit::<T>(BOUNDARY_GUARD) * peak).then(|| {
            let edge = edge.to_f64().unwrap_or(f64::NAN);
            let peak = peak.to_f64().unwrap_or(f64::NAN);
            format!(
                "domain too small at t = {}: boundary |u| = {edge:e} exceeds {BOUNDARY_GUARD:e} x max |u| = {peak:e}",
                u.time
            )
        })
    }
}

fn face_center<T: Real>(grid: &Grid<T>, axis: usize, inner: usize, f: usize) -> Vec<T> {
    let n = grid.cells_per_axis();
    let line = f / inner;
    let q = f % inner;
    let o = line / (n + 1);
    let j = line % (n + 1);
    let dim = grid.dim();
    let mut x = vec![T::zero(); dim];
    let mut rest = o;
    for a in (0..axis).rev() {
        x[a] = grid.center(rest % n);
        rest /= n;
    }
    x[axis] = grid.face(j);
    let mut rest = q;
    for a in (axis + 1..dim).rev() {
        x[a] = grid.center(rest % n);
        rest /= n;
    }
    x
}

/// Smooth advection-diffusion verification problem:
/// `u_t + c u_x = ν u_xx` with a Gaussian initial profile, whose exact
/// solution is the advected heat kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct MmsProblem<T> {
    pub speed: T,
    pub viscosity: T,
    pub amplitude: T,
    pub center: T,
    /// Standard deviation of the initial Gaussian.
    pub width: T,
    pub half_width: T,
    pub end_time: T,
    pub resolutions: Vec<usize>,
}

impl<T: Real> Default for MmsProblem<T> {
    fn default() -> Self {
        Self {
            speed: T::one(),
            viscosity: lit(0.1),
            amplitude: T::one(),
            center: lit(-1.0),
            width: lit(0.5),
            half_width: lit(5.0),
            end_time: T::one(),
            resolutions: vec![400, 800],
        }
    }
}

impl<T: Real> MmsProblem<T> {
    pub fn initial(&self, x: T) -> T {
        let z = (x - self.center) / self.width;
        self.amplitude * (-lit::<T>(0.5) * z * z).exp()
    }

    pub fn exact(&self, x: T, t: T) -> T {
        let var = self.width * self.width + lit::<T>(2.0) * self.viscosity * t;
        let z = x - self.center - self.speed * t;
        self.amplitude * self.width / var.sqrt() * (-z * z / (lit::<T>(2.0) * var)).exp()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow<T> {
    pub cells: usize,
    pub spacing: T,
    pub l1_error: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable<T> {
    pub rows: Vec<ConvergenceRow<T>>,
    /// `log2`-style observed orders between consecutive rows.
    pub orders: Vec<T>,
}

impl<T: Real> ConvergenceTable<T> {
    pub fn min_order(&self) -> Option<T> {
        self.orders.iter().copied().reduce(T::min)
    }
}

/// Runs the verification problem at each resolution and reports `L¹` errors
/// against the exact solution and the observed orders.
pub fn run_mms<T: Real>(problem: &MmsProblem<T>) -> Result<ConvergenceTable<T>> {
    if problem.resolutions.len() < 2 {
        return Err(Error::Usage("convergence study needs at least two resolutions".into()));
    }
    let flux = FluxPair::linear(1, problem.speed);
    let surface = InterfaceSurface::point(T::zero());
    let mollifier = MollifierFamily::new(T::one())?;
    let scheme = SchemeConfig::new(problem.viscosity, problem.end_time);
    let mut rows = Vec::with_capacity(problem.resolutions.len());
    for &cells in &problem.resolutions {
        let grid = Grid::new(1, problem.half_width, cells)?;
        let mut solver = Solver::new(grid, &flux, &surface, &mollifier, scheme)?;
        let initial = Field::from_fn(grid, |x| problem.initial(x[0]));
        let summary = solver.run_from(initial, &[], |_| Ok(()))?;
        let u = &summary.final_field;
        let l1_error = neumaier_sum(
            u.values()
                .iter()
                .enumerate()
                .map(|(i, &v)| (v - problem.exact(grid.center(i), u.time())).abs()),
        ) * grid.spacing();
        rows.push(ConvergenceRow {
            cells,
            spacing: grid.spacing(),
            l1_error,
        });
    }
    let orders = rows
        .windows(2)
        .map(|w| (w[0].l1_error / w[1].l1_error).ln() / (w[0].spacing / w[1].spacing).ln())
        .collect();
    Ok(ConvergenceTable { rows, orders })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Orientation;

    fn arctan_solver(eps: f64, cells: usize, end: f64) -> Solver<f64> {
        let grid = Grid::new(1, 5.0, cells).unwrap();
        Solver::new(
            grid,
            &FluxPair::arctan_gap(4.0),
            &InterfaceSurface::point(0.0),
            &MollifierFamily::new(eps).unwrap(),
            SchemeConfig::new(eps, end),
        )
        .unwrap()
    }

    #[test]
    fn grid_geometry() {
        let g = Grid::new(2, 5.0, 10).unwrap();
        assert_eq!(g.len(), 100);
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.center(0), -4.5);
        assert_eq!(g.face(10), 5.0);
        assert_eq!(g.multi_index(23), vec![2, 3]);
        assert_eq!(g.cell_center(23), vec![-2.5, -1.5]);
        assert_eq!(g.stride(0), 10);
        assert_eq!(g.stride(1), 1);
        assert!(Grid::new(1, 5.0, 7).is_err());
        assert_eq!(Grid::auto_cells(5.0, 0.1), 500);
        assert_eq!(Grid::auto_cells(5.0, 0.025), 2000);
        assert_eq!(g.boundary_cells().len(), 36);
    }

    #[test]
    fn face_centers_follow_row_major_layout() {
        let g = Grid::new(2, 1.0, 8).unwrap();
        // axis 0 faces: (n+1) x n; face (j=3, q=5)
        let x = face_center(&g, 0, g.stride(0), 3 * 8 + 5);
        assert_eq!(x, vec![g.face(3), g.center(5)]);
        // axis 1 faces: n x (n+1); face (o=2, j=8)
        let x = face_center(&g, 1, g.stride(1), 2 * 9 + 8);
        assert_eq!(x, vec![g.center(2), g.face(8)]);
    }

    #[test]
    fn zero_flux_keeps_zero_field() {
        let grid = Grid::new(2, 1.0, 16).unwrap();
        let mut s = Solver::new(
            grid,
            &FluxPair::zero(2),
            &InterfaceSurface::affine(vec![-1.0], 0.0),
            &MollifierFamily::new(0.5).unwrap(),
            SchemeConfig::new(0.1, 1.0),
        )
        .unwrap();
        let u = s.step(&Field::zeros(grid)).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
        // odd flux with vanishing zero traces
        let mut s = Solver::new(
            Grid::new(1, 1.0, 16).unwrap(),
            &FluxPair::linear(1, 2.0),
            &InterfaceSurface::point(0.0),
            &MollifierFamily::new(0.5).unwrap(),
            SchemeConfig::new(0.1, 1.0),
        )
        .unwrap();
        let u = s.step(&Field::zeros(Grid::new(1, 1.0, 16).unwrap())).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn first_step_is_negative_only_in_the_band() {
        let eps = 0.1;
        let mut s = arctan_solver(eps, 500, 1.0);
        let g = *s.grid();
        let u = s.step(&Field::zeros(g)).unwrap();
        let h = g.spacing();
        let mut inside = 0;
        for (i, &v) in u.values().iter().enumerate() {
            let x = g.center(i);
            if x.abs() < eps - h / 2.0 {
                assert!(v < 0.0, "x={x} v={v}");
                inside += 1;
            } else if x.abs() >= eps + h {
                assert_eq!(v, 0.0, "x={x}");
            }
        }
        assert!(inside >= 8);
    }

    #[test]
    fn pure_diffusion_obeys_maximum_principle_and_sign() {
        let grid = Grid::new(1, 1.0, 64).unwrap();
        let mut s = Solver::new(
            grid,
            &FluxPair::zero(1),
            &InterfaceSurface::point(0.0),
            &MollifierFamily::new(0.1).unwrap(),
            SchemeConfig::new(0.05, 1.0),
        )
        .unwrap();
        let mut u = Field::from_fn(grid, |x: &[f64]| if x[0].abs() < 0.3 { -1.0 - x[0] } else { -0.01 });
        for step in 0..200 {
            let lo = u.values().iter().cloned().fold(f64::INFINITY, f64::min).min(0.0);
            let hi = u.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
            s.advance(&mut u, f64::INFINITY, step).unwrap();
            for &v in u.values() {
                assert!(v >= lo - 1e-15 && v <= hi + 1e-15);
                assert!(v <= 0.0);
            }
        }
    }

    #[test]
    fn stable_dt_examples() {
        let grid = Grid::new(1, 5.0, 1000).unwrap();
        let mut s = Solver::new(
            grid,
            &FluxPair::zero(1),
            &InterfaceSurface::point(0.0),
            &MollifierFamily::new(0.025).unwrap(),
            SchemeConfig::new(0.025, 1.0),
        )
        .unwrap();
        let dt: f64 = s.stable_dt(&Field::zeros(grid));
        assert!((dt - 9e-4).abs() < 1e-15);

        let fast = Solver::new(
            grid,
            &FluxPair::linear(1, 1000.0),
            &InterfaceSurface::point(0.0),
            &MollifierFamily::new(0.025).unwrap(),
            SchemeConfig::new(0.025, 1.0),
        );
        let dt: f64 = fast.unwrap().stable_dt(&Field::zeros(grid));
        assert!((dt - 0.45 * 0.01 / 1100.0).abs() < 1e-15);

        let coarse = arctan_solver(0.1, 200, 1.0).stable_dt(&Field::zeros(Grid::new(1, 5.0, 200).unwrap()));
        let fine = arctan_solver(0.1, 400, 1.0).stable_dt(&Field::zeros(Grid::new(1, 5.0, 400).unwrap()));
        assert!(fine < coarse);
    }

    #[test]
    fn ledger_balances_each_step() {
        let mut s = arctan_solver(0.1, 500, 0.2);
        let traj = s.run(&[0.0, 0.1, 0.2]).unwrap();
        assert_eq!(traj.snapshots.len(), 3);
        assert_eq!(traj.snapshots[1].time(), 0.1);
        assert_eq!(traj.snapshots[2].time(), 0.2);
        for e in &traj.ledger {
            assert!(e.relative_residual() <= 1e-10, "{e:?}");
            assert!((e.boundary_inflow + 4.0).abs() < 1e-12);
        }
        let mass = traj.snapshots[2].mass();
        assert!((mass + 0.8).abs() < 1e-9, "{mass}");
    }

    #[test]
    fn fault_injection_breaks_the_ledger() {
        let mut s = arctan_solver(0.1, 500, 0.1);
        let mut u = Field::zeros(*s.grid());
        s.advance(&mut u, f64::INFINITY, 0).unwrap();
        s.inject_fault(250, 1e-3);
        let e = s.advance(&mut u, f64::INFINITY, 1).unwrap();
        assert!(e.relative_residual() > 1e-3);
    }

    #[test]
    fn instability_is_reported() {
        let mut s = arctan_solver(0.1, 100, 0.1);
        let mut u = Field::zeros(*s.grid());
        s.inject_fault(3, f64::NAN);
        match s.advance(&mut u, f64::INFINITY, 7) {
            Err(Error::Instability { step, cell, .. }) => {
                assert_eq!(step, 7);
                assert_eq!(cell, 3);
            }
            other => panic!("expected instability, got {other:?}"),
        }
    }

    #[test]
    fn zero_end_time_gives_a_single_zero_snapshot() {
        let mut s = arctan_solver(0.1, 100, 0.0);
        let traj = s.run(&[0.0]).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert!(traj.snapshots[0].values().iter().all(|&v| v == 0.0));
        assert!(traj.ledger.is_empty());
    }

    #[test]
    fn runs_are_bit_identical() {
        let a = arctan_solver(0.1, 300, 0.1).run(&[0.1]).unwrap();
        let b = arctan_solver(0.1, 300, 0.1).run(&[0.1]).unwrap();
        let bits = |t: &Trajectory<f64>| t.snapshots[0].values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn two_dimensional_run_conserves_and_stays_nonpositive() {
        let eps = 0.4;
        let grid = Grid::new(2, 3.0, 60).unwrap();
        let surf = InterfaceSurface::affine(vec![-1.0], 0.0);
        let fp = FluxPair::gauss_arctan(2, 4.0, &[Orientation::Decreasing]).unwrap();
        let mut s = Solver::new(grid, &fp, &surf, &MollifierFamily::new(eps).unwrap(), SchemeConfig::new(eps, 0.2))
            .unwrap();
        let traj = s.run(&[0.0, 0.2]).unwrap();
        assert!(traj.ledger.iter().all(|e| e.relative_residual() <= 1e-10));
        assert!(traj.snapshots[1].values().iter().all(|&v| v <= 1e-12));
        assert!(traj.snapshots[1].mass() < 0.0);
    }

    #[test]
    fn single_precision_solver_runs() {
        let grid = Grid::new(1, 5.0f32, 200).unwrap();
        let mut s = Solver::new(
            grid,
            &FluxPair::arctan_gap(4.0f32),
            &InterfaceSurface::point(0.0),
            &MollifierFamily::new(0.2f32).unwrap(),
            SchemeConfig::new(0.2f32, 0.1),
        )
        .unwrap();
        let traj = s.run(&[0.1]).unwrap();
        assert!((traj.snapshots[0].mass() + 0.4).abs() < 1e-4);
    }

    #[test]
    fn heat_kernel_converges() {
        let p = MmsProblem {
            speed: 0.0,
            resolutions: vec![100, 200],
            end_time: 0.5,
            ..MmsProblem::default()
        };
        let t = run_mms(&p).unwrap();
        assert!(t.rows[0].l1_error / t.rows[1].l1_error >= 1.8, "{t:?}");
    }

    #[test]
    fn snapshot_format() {
        let grid = Grid::new(2, 1.0, 8).unwrap();
        let f = Field::zeros(grid);
        let mut buf = Vec::new();
        f.write_snapshot(&mut buf, 0.1).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# t=0 d=2 n=8 K=1 eps=0.1");
        assert_eq!(lines.next().unwrap(), "-0.875 -0.875 0");
        assert_eq!(lines.next().unwrap(), "-0.875 -0.625 0");
        assert_eq!(text.lines().count(), 65);
    }
}
