//! Functionals evaluated on solver snapshots: `L¹` norm, signed mass,
//! positivity excursion, band masses around the interface, the weighted
//! concentration integrand `W(t)` and its running time integral `I(t)`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::InterfaceSurface;
use crate::mollifier::{reg_abs, WeightSchedule};
use crate::scalar::{lit, neumaier_sum, par_sum_by, Real};
use crate::solver::{Field, Grid, LedgerEntry};

pub fn l1_norm<T: Real>(u: &Field<T>) -> T {
    par_sum_by(u.values(), |_, v| v.abs()) * u.grid().cell_volume()
}

pub fn total_mass<T: Real>(u: &Field<T>) -> T {
    u.mass()
}

/// Largest cell value, `-∞` for an empty field.
pub fn max_value<T: Real>(u: &Field<T>) -> T {
    u.values().iter().fold(T::neg_infinity(), |m, &v| m.max(v))
}

/// `max(0, max u)`.
pub fn positivity_violation<T: Real>(u: &Field<T>) -> T {
    max_value(u).max(T::zero())
}

/// Signed mass of the cells whose center satisfies `|s| < η`.
pub fn band_mass<T: Real>(u: &Field<T>, eta: T, surf: &InterfaceSurface<T>) -> Result<T> {
    positive("eta", eta)?;
    let offsets = cell_offsets(u.grid(), surf)?;
    Ok(par_sum_by(u.values(), |c, v| if offsets[c] < eta { v } else { T::zero() }) * u.grid().cell_volume())
}

/// `exp(-|s / a(ε)|_{σ(ε)})`, in `(0, 1]` and equal to 1 on the interface.
pub fn concentration_weight<T: Real>(
    x: &[T],
    eps: T,
    sched: &WeightSchedule<T>,
    surf: &InterfaceSurface<T>,
) -> Result<T> {
    positive("eps", eps)?;
    let s = surf.signed_offset(x)?;
    Ok((-reg_abs(s / sched.a(eps), sched.sigma(eps))?).exp())
}

fn positive<T: Real>(name: &str, v: T) -> Result<()> {
    if v.is_finite() && v > T::zero() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {v}")))
    }
}

fn cell_offsets<T: Real>(grid: &Grid<T>, surf: &InterfaceSurface<T>) -> Result<Vec<T>> {
    (0..grid.len())
        .map(|c| surf.signed_offset(&grid.cell_center(c)).map(T::abs))
        .collect()
}

/// Cumulative trapezoid integral, starting at 0.
pub fn cumulative_trapezoid<T: Real>(t: &[T], w: &[T]) -> Result<Vec<T>> {
    if t.len() != w.len() {
        return Err(Error::Usage(format!("{} times but {} samples", t.len(), w.len())));
    }
    let half = lit::<T>(0.5);
    let mut out = Vec::with_capacity(t.len());
    let mut acc = T::zero();
    for j in 0..t.len() {
        if j > 0 {
            acc += half * (t[j] - t[j - 1]) * (w[j] + w[j - 1]);
        }
        out.push(acc);
    }
    Ok(out)
}

/// Reductions of one snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSample<T> {
    pub time: T,
    pub l1: T,
    pub mass: T,
    pub max_u: T,
    /// `W(t) = Σ u·weight·h^d`.
    pub weighted_mass: T,
    /// One entry per configured `η`.
    pub band_masses: Vec<T>,
}

/// Per-grid precomputation of `|s|` and the concentration weight so a probe
/// costs a handful of passes over the field.
#[derive(Clone, Debug)]
pub struct Probe<T> {
    grid: Grid<T>,
    offsets: Vec<T>,
    weights: Vec<T>,
    etas: Vec<T>,
}

impl<T: Real> Probe<T> {
    pub fn new(
        grid: Grid<T>,
        surf: &InterfaceSurface<T>,
        eps: T,
        sched: &WeightSchedule<T>,
        etas: &[T],
    ) -> Result<Self> {
        positive("eps", eps)?;
        for &eta in etas {
            positive("eta", eta)?;
        }
        let offsets = cell_offsets(&grid, surf)?;
        let (a, sigma) = (sched.a(eps), sched.sigma(eps));
        let weights = offsets
            .iter()
            .map(|&s| reg_abs(s / a, sigma).map(|r| (-r).exp()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            offsets,
            weights,
            etas: etas.to_vec(),
        })
    }

    pub fn etas(&self) -> &[T] {
        &self.etas
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn sample(&self, u: &Field<T>) -> Result<ProbeSample<T>> {
        if *u.grid() != self.grid {
            return Err(Error::Usage("snapshot grid does not match probe grid".into()));
        }
        let vol = self.grid.cell_volume();
        let values = u.values();
        let band_masses = self
            .etas
            .iter()
            .map(|&eta| par_sum_by(values, |c, v| if self.offsets[c] < eta { v } else { T::zero() }) * vol)
            .collect();
        Ok(ProbeSample {
            time: u.time(),
            l1: l1_norm(u),
            mass: u.mass(),
            max_u: max_value(u),
            weighted_mass: par_sum_by(values, |c, v| v * self.weights[c]) * vol,
            band_masses,
        })
    }
}

/// Probe samples of one run with the cumulative concentration functional and
/// the per-step ledger residuals.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsSeries<T> {
    etas: Vec<T>,
    samples: Vec<ProbeSample<T>>,
    cumulative: Vec<T>,
    ledger_residuals: Vec<T>,
}

impl<T: Real> DiagnosticsSeries<T> {
    pub fn new(etas: Vec<T>, samples: Vec<ProbeSample<T>>, ledger: &[LedgerEntry<T>]) -> Result<Self> {
        if samples.iter().any(|s| s.band_masses.len() != etas.len()) {
            return Err(Error::Usage("band mass count differs from eta count".into()));
        }
        let t: Vec<T> = samples.iter().map(|s| s.time).collect();
        let w: Vec<T> = samples.iter().map(|s| s.weighted_mass).collect();
        Ok(Self {
            cumulative: cumulative_trapezoid(&t, &w)?,
            etas,
            samples,
            ledger_residuals: ledger.iter().map(LedgerEntry::relative_residual).collect(),
        })
    }

    pub fn etas(&self) -> &[T] {
        &self.etas
    }

    pub fn samples(&self) -> &[ProbeSample<T>] {
        &self.samples
    }

    pub fn times(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.time).collect()
    }

    /// `I(t_j)`.
    pub fn concentration(&self) -> &[T] {
        &self.cumulative
    }

    pub fn ledger_residuals(&self) -> &[T] {
        &self.ledger_residuals
    }

    /// Largest ledger residual, 0 for a run without steps.
    pub fn ledger_max(&self) -> T {
        self.ledger_residuals.iter().fold(T::zero(), |m, &r| m.max(r))
    }

    pub fn max_positivity_violation(&self) -> T {
        self.samples.iter().fold(T::zero(), |m, s| m.max(s.max_u))
    }

    /// `max_{t > 0} l1(t) / (t·G)`; `None` when no sample has `t > 0` or
    /// `G = 0`.
    pub fn l1_margin(&self, gap: T) -> Option<T> {
        self.samples
            .iter()
            .filter(|s| s.time > T::zero() && gap > T::zero())
            .map(|s| s.l1 / (s.time * gap))
            .reduce(T::max)
    }

    /// `band_mass(η_i) / mass` at the last sample.
    pub fn final_band_fraction(&self, eta_index: usize) -> Option<T> {
        let last = self.samples.last()?;
        let band = *last.band_masses.get(eta_index)?;
        (last.mass != T::zero()).then(|| band / last.mass)
    }

    /// Fits `I ≈ -β t²` on the samples with `t ≥ t0`.
    pub fn fit_from(&self, t0: T) -> Result<QuadraticFit<T>> {
        let (t, i): (Vec<T>, Vec<T>) = self
            .samples
            .iter()
            .zip(&self.cumulative)
            .filter(|(s, _)| s.time >= t0)
            .map(|(s, &i)| (s.time, i))
            .unzip();
        fit_quadratic_decay(&t, &i)
    }

    /// Column layout `t,l1,mass,max_u,W,I,band_mass_<η>...`, then a trailing
    /// `# ledger_max_rel=<v>` line.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write!(out, "t,l1,mass,max_u,W,I")?;
        for eta in &self.etas {
            write!(out, ",band_mass_{eta}")?;
        }
        writeln!(out)?;
        for (s, i) in self.samples.iter().zip(&self.cumulative) {
            write!(out, "{},{},{},{},{},{}", s.time, s.l1, s.mass, s.max_u, s.weighted_mass, i)?;
            for b in &s.band_masses {
                write!(out, ",{b}")?;
            }
            writeln!(out)?;
        }
        writeln!(out, "# ledger_max_rel={}", self.ledger_max())
    }
}

/// `W(t_j)` and `I(t_j)` for a list of snapshots.
pub fn concentration_series<T: Real>(
    trajectory: &[Field<T>],
    eps: T,
    sched: &WeightSchedule<T>,
    surf: &InterfaceSurface<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let Some(first) = trajectory.first() else {
        return Ok((Vec::new(), Vec::new()));
    };
    let probe = Probe::new(*first.grid(), surf, eps, sched, &[])?;
    let w = trajectory
        .iter()
        .map(|u| probe.sample(u).map(|s| s.weighted_mass))
        .collect::<Result<Vec<_>>>()?;
    let t: Vec<T> = trajectory.iter().map(Field::time).collect();
    let i = cumulative_trapezoid(&t, &w)?;
    Ok((w, i))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticFit<T> {
    pub beta: T,
    /// `None` when the samples carry no variance to explain.
    pub r_squared: Option<T>,
    pub samples: usize,
}

/// Least-squares fit of `I(t) ≈ -β t²` through the origin:
/// `β = -Σ I t² / Σ t⁴`, with `r² = 1 - SS_res / SS_tot`.
pub fn fit_quadratic_decay<T: Real>(t: &[T], i: &[T]) -> Result<QuadraticFit<T>> {
    if t.len() != i.len() {
        return Err(Error::Usage(format!("{} times but {} samples", t.len(), i.len())));
    }
    if t.len() < 5 {
        return Err(Error::Usage(format!("quadratic fit needs at least 5 samples, got {}", t.len())));
    }
    if t.iter().any(|&x| !(x > T::zero())) {
        return Err(Error::Usage("quadratic fit window must start after t = 0".into()));
    }
    let n = t.len();
    let t2 = |k: usize| t[k] * t[k];
    let num = neumaier_sum((0..n).map(|k| i[k] * t2(k)));
    let den = neumaier_sum((0..n).map(|k| t2(k) * t2(k)));
    let beta = -num / den;
    let mean = neumaier_sum(i.iter().copied()) / lit::<T>(n as f64);
    let ss_tot = neumaier_sum(i.iter().map(|&v| (v - mean) * (v - mean)));
    let ss_res = neumaier_sum((0..n).map(|k| {
        let r = i[k] + beta * t2(k);
        r * r
    }));
    let r_squared = (ss_tot > T::zero()).then(|| T::one() - ss_res / ss_tot);
    Ok(QuadraticFit {
        beta: if num == T::zero() { T::zero() } else { beta },
        r_squared,
        samples: n,
    })
}

/// Largest relative residual over a nonempty ledger.
pub fn ledger_check<T: Real>(ledger: &[LedgerEntry<T>]) -> Result<T> {
    if ledger.is_empty() {
        return Err(Error::Usage("ledger is empty".into()));
    }
    Ok(ledger
        .iter()
        .map(LedgerEntry::relative_residual)
        .fold(T::zero(), T::max))
}
