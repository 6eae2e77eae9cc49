//! Run configurations, ε sweeps and their reports.
//!
//! A configuration is a flat JSON object:
//!
//! ```json
//! {
//!   "dim": 1, "K": 5, "n": "auto", "eps": [0.1, 0.05, 0.025], "T": 1,
//!   "probes": 21, "fixture": "arctan_gap", "fixture_params": { "gap": 4 },
//!   "etas": [0.2], "schedule_p": 0.3333333333333333,
//!   "u_left": 0, "u_right": 0, "out_dir": "out"
//! }
//! ```
//!
//! Required keys are `dim`, `K`, `eps`, `T` and `fixture`. The harness works
//! in `f64`.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::diagnostics::{DiagnosticsSeries, Probe, QuadraticFit};
use crate::error::{Error, Result};
use crate::flux::{nonalignment_report, riemann_reduce, zero_trace_gap, EnvelopeSampling, FluxPair, NonAlignmentReport};
use crate::geometry::{validate_monotonicity, BoxDomain, InterfaceSurface, MonotonicityReport, Orientation};
use crate::mollifier::{MollifierFamily, WeightSchedule};
use crate::scalar::linspace;
use crate::solver::{Field, Grid, SchemeConfig, Solver};

/// β trend band: `β(ε_{i+1}) ≥ BETA_TREND·β(ε_i)`.
pub const BETA_TREND: f64 = 0.9;
pub const POSITIVITY_TOL: f64 = 1e-6;
pub const L1_FACTOR: f64 = 1.1;
pub const LEDGER_TOL: f64 = 1e-10;
/// Minimum probe count over `[0, T]`.
pub const MIN_PROBES: usize = 20;
/// Upper bound on `n^d` for a single run.
pub const MAX_CELLS: usize = 1 << 24;
/// Transverse lattice nodes per axis for the monotonicity check.
const MONOTONICITY_NODES: usize = 41;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixture {
    /// `d = 1`: `f_{L,R} = atan λ ∓ gap/2`.
    ArctanGap,
    /// Any `d`: `f_{L,R}^k = exp(-|x̂_k|²)(atan λ ∓ gap/2)`.
    GaussArctan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceKind {
    /// `φ ≡ intercept`.
    Constant,
    /// `φ = slope·Σ x_j + intercept`.
    Affine,
    /// `φ = Σ amplitude·atan(x_j / width) + intercept`.
    Arctan,
    /// `φ = curvature·|x̂|² + intercept`.
    Paraboloid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureParams {
    #[serde(default = "default_gap")]
    pub gap: f64,
    /// Defaults to `constant` for `d = 1` and `affine` otherwise.
    #[serde(default)]
    pub interface: Option<InterfaceKind>,
    #[serde(default = "default_slope")]
    pub slope: f64,
    #[serde(default)]
    pub intercept: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default = "one")]
    pub curvature: f64,
    /// `+1` or `-1`: flux orientation of `gauss_arctan` and the declared
    /// orientation of a paraboloid. Defaults to the surface orientation.
    #[serde(default)]
    pub orientation: Option<i32>,
}

impl Default for FixtureParams {
    fn default() -> Self {
        Self {
            gap: default_gap(),
            interface: None,
            slope: default_slope(),
            intercept: 0.0,
            amplitude: 1.0,
            width: 1.0,
            curvature: 1.0,
            orientation: None,
        }
    }
}

fn default_gap() -> f64 {
    4.0
}
fn default_slope() -> f64 {
    -1.0
}
fn one() -> f64 {
    1.0
}
fn default_probes() -> usize {
    21
}
fn default_etas() -> Vec<f64> {
    vec![0.2]
}
fn default_schedule_p() -> f64 {
    1.0 / 3.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dim: usize,
    #[serde(rename = "K")]
    half_width: f64,
    #[serde(default)]
    n: Option<Value>,
    eps: Vec<f64>,
    #[serde(rename = "T")]
    end_time: f64,
    #[serde(default = "default_probes")]
    probes: usize,
    fixture: Fixture,
    #[serde(default)]
    fixture_params: FixtureParams,
    #[serde(default = "default_etas")]
    etas: Vec<f64>,
    #[serde(default = "default_schedule_p")]
    schedule_p: f64,
    #[serde(default)]
    u_left: f64,
    #[serde(default)]
    u_right: f64,
    #[serde(default)]
    out_dir: Option<PathBuf>,
}

/// Cells per axis: fixed, or `ceil(2K / (ε/5))` per ε.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum CellSpec {
    Fixed(usize),
    #[serde(serialize_with = "auto_tag")]
    Auto,
}

fn auto_tag<S: serde::Serializer>(s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str("auto")
}

/// A validated sweep configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub dim: usize,
    #[serde(rename = "K")]
    pub half_width: f64,
    pub n: CellSpec,
    pub eps: Vec<f64>,
    #[serde(rename = "T")]
    pub end_time: f64,
    pub probes: usize,
    pub fixture: Fixture,
    pub fixture_params: FixtureParams,
    pub etas: Vec<f64>,
    pub schedule_p: f64,
    pub u_left: f64,
    pub u_right: f64,
    pub out_dir: Option<PathBuf>,
}

/// Parses and validates a configuration. Errors name the offending key.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| {
        let message = e.to_string();
        let key = message
            .split('`')
            .nth(1)
            .filter(|_| message.contains("field"))
            .unwrap_or("<document>")
            .to_string();
        Error::config(key, message)
    })?;
    let n = match raw.n {
        None => CellSpec::Auto,
        Some(Value::String(s)) if s == "auto" => CellSpec::Auto,
        Some(Value::Number(v)) => match v.as_u64() {
            Some(n) => CellSpec::Fixed(n as usize),
            None => return Err(Error::config("n", format!("expected a positive integer or \"auto\", got {v}"))),
        },
        Some(other) => return Err(Error::config("n", format!("expected a positive integer or \"auto\", got {other}"))),
    };
    let cfg = RunConfig {
        dim: raw.dim,
        half_width: raw.half_width,
        n,
        eps: raw.eps,
        end_time: raw.end_time,
        probes: raw.probes,
        fixture: raw.fixture,
        fixture_params: raw.fixture_params,
        etas: raw.etas,
        schedule_p: raw.schedule_p,
        u_left: raw.u_left,
        u_right: raw.u_right,
        out_dir: raw.out_dir,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("dim", "must be at least 1"));
        }
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return Err(Error::config("K", format!("must be positive, got {}", self.half_width)));
        }
        if self.eps.is_empty() {
            return Err(Error::config("eps", "eps list must not be empty"));
        }
        if self.eps.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
            return Err(Error::config("eps", "eps values must be positive"));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("eps", "eps list must be strictly decreasing"));
        }
        if !(self.end_time.is_finite() && self.end_time > 0.0) {
            return Err(Error::config("T", format!("must be positive, got {}", self.end_time)));
        }
        if self.probes < MIN_PROBES {
            return Err(Error::config(
                "probes",
                format!("need at least {MIN_PROBES} probes over [0, T], got {}", self.probes),
            ));
        }
        if self.etas.is_empty() || self.etas.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
            return Err(Error::config("etas", "eta list must be nonempty and positive"));
        }
        if self.etas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("etas", "eta list must be strictly ascending"));
        }
        WeightSchedule::new(self.schedule_p).map_err(|e| Error::config("schedule_p", e.to_string()))?;
        for (key, v) in [("u_left", self.u_left), ("u_right", self.u_right)] {
            if !v.is_finite() {
                return Err(Error::config(key, "must be finite"));
            }
        }
        if self.fixture == Fixture::ArctanGap && self.dim != 1 {
            return Err(Error::config("fixture", "arctan_gap is one-dimensional; use gauss_arctan for dim > 1"));
        }
        if let Some(o) = self.fixture_params.orientation {
            if o != 1 && o != -1 {
                return Err(Error::config("fixture_params", format!("orientation must be +1 or -1, got {o}")));
            }
        }
        for &eps in &self.eps {
            let n = self.cells_for(eps);
            if n < 8 {
                return Err(Error::config("n", format!("need at least 8 cells per axis, got {n}")));
            }
            let h = 2.0 * self.half_width / n as f64;
            if h > eps / 4.0 {
                return Err(Error::config(
                    "n",
                    format!("resolution error: h = {h} exceeds eps/4 = {} for eps = {eps}", eps / 4.0),
                ));
            }
            if n.checked_pow(self.dim as u32).is_none_or(|c| c > MAX_CELLS) {
                return Err(Error::config(
                    "n",
                    format!("{n}^{} cells for eps = {eps} exceeds the budget of {MAX_CELLS}", self.dim),
                ));
            }
        }
        self.surface()?;
        self.base_flux()?;
        Ok(())
    }

    pub fn cells_for(&self, eps: f64) -> usize {
        match self.n {
            CellSpec::Fixed(n) => n,
            CellSpec::Auto => Grid::auto_cells(self.half_width, eps),
        }
    }

    pub fn schedule(&self) -> WeightSchedule<f64> {
        WeightSchedule::new(self.schedule_p).expect("validated schedule exponent")
    }

    pub fn domain(&self) -> BoxDomain<f64> {
        BoxDomain::new(self.half_width, self.dim).expect("validated box")
    }

    fn interface_kind(&self) -> InterfaceKind {
        self.fixture_params.interface.unwrap_or(if self.dim == 1 {
            InterfaceKind::Constant
        } else {
            InterfaceKind::Affine
        })
    }

    fn declared_orientation(&self) -> Option<Orientation> {
        self.fixture_params.orientation.map(|o| {
            if o > 0 {
                Orientation::Increasing
            } else {
                Orientation::Decreasing
            }
        })
    }

    pub fn surface(&self) -> Result<InterfaceSurface<f64>> {
        let p = &self.fixture_params;
        let m = self.dim - 1;
        let surf = match self.interface_kind() {
            InterfaceKind::Constant if self.dim == 1 => InterfaceSurface::point(p.intercept),
            InterfaceKind::Constant => InterfaceSurface::constant(self.dim, p.intercept)?,
            InterfaceKind::Affine => InterfaceSurface::affine(vec![p.slope; m], p.intercept),
            InterfaceKind::Arctan => InterfaceSurface::arctan_profile(vec![p.amplitude; m], p.width, p.intercept)?,
            InterfaceKind::Paraboloid => InterfaceSurface::paraboloid(
                self.dim,
                p.curvature,
                p.intercept,
                self.declared_orientation().unwrap_or(Orientation::Decreasing),
            )?,
        };
        if surf.dim() != self.dim {
            return Err(Error::config(
                "fixture_params",
                format!("interface has dimension {}, config has dim = {}", surf.dim(), self.dim),
            ));
        }
        Ok(surf)
    }

    /// The fixture flux before the Riemann shift.
    pub fn base_flux(&self) -> Result<FluxPair<f64>> {
        let gap = self.fixture_params.gap;
        if !gap.is_finite() {
            return Err(Error::config("fixture_params", "gap must be finite"));
        }
        match self.fixture {
            Fixture::ArctanGap => Ok(FluxPair::arctan_gap(gap)),
            Fixture::GaussArctan => {
                let orientation = match self.declared_orientation() {
                    Some(o) => vec![o; self.dim - 1],
                    None => self.surface()?.orientation().to_vec(),
                };
                FluxPair::gauss_arctan(self.dim, gap, &orientation)
            }
        }
    }

    /// The flux actually simulated: the fixture shifted by `(u_left, u_right)`.
    pub fn flux(&self) -> Result<FluxPair<f64>> {
        Ok(riemann_reduce(&self.base_flux()?, self.u_left, self.u_right))
    }

    pub fn probe_times(&self) -> Vec<f64> {
        linspace(0.0, self.end_time, self.probes)
    }

    /// Canonical JSON echo of the configuration.
    pub fn echo(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Flux and geometry findings of a dry run.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub nonalignment: NonAlignmentReport<f64>,
    /// `None` in one dimension (no transverse coordinates).
    pub monotonicity: Option<MonotonicityReport<f64>>,
    pub zero_trace_gap: f64,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.nonalignment.pass() && self.monotonicity.as_ref().is_none_or(|m| m.pass)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "non-alignment:")?;
        for e in &self.nonalignment.entries {
            let analytic = e.analytic_margin.map_or("n/a".to_string(), |m| format!("{m:.6}"));
            writeln!(
                f,
                "  axis {} ({:?} form): sampled margin {:.6}, analytic {analytic}, ordering at zero worst {:.6} -> {}",
                e.axis,
                e.form,
                e.sampled_margin,
                e.zero_order_worst,
                pass_fail(e.pass())
            )?;
        }
        if self.nonalignment.outside_hypotheses {
            writeln!(f, "  mixed orientations: outside the stated hypotheses (not failed)")?;
        }
        match &self.monotonicity {
            None => writeln!(f, "monotonicity: no transverse coordinates")?,
            Some(m) => {
                writeln!(f, "monotonicity ({} samples):", m.samples)?;
                for a in &m.axes {
                    writeln!(
                        f,
                        "  axis {} declared {:?}: slope range [{:.6}, {:.6}] -> {}",
                        a.axis,
                        a.declared,
                        a.min_slope,
                        a.max_slope,
                        pass_fail(a.pass)
                    )?;
                }
            }
        }
        writeln!(f, "zero-trace gap G = {:.6}", self.zero_trace_gap)?;
        write!(f, "overall: {}", pass_fail(self.pass()))
    }
}

fn pass_fail(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Runs the flux and geometry validators on the simulated flux, without any
/// PDE solve.
pub fn validate_only(cfg: &RunConfig) -> Result<ValidationReport> {
    let surf = cfg.surface()?;
    let flux = cfg.flux()?;
    let domain = cfg.domain();
    let sampling = EnvelopeSampling::default();
    let nonalignment = nonalignment_report(&flux, &surf, &domain, &sampling)?;
    let monotonicity = if cfg.dim > 1 {
        Some(validate_monotonicity(&surf, &domain.transverse_lattice(MONOTONICITY_NODES))?)
    } else {
        None
    };
    Ok(ValidationReport {
        nonalignment,
        monotonicity,
        zero_trace_gap: zero_trace_gap(&flux, &domain, sampling.quad_points)?,
    })
}

/// Outcome of one sweep member.
#[derive(Clone, Debug)]
pub struct EpsRun {
    pub eps: f64,
    pub cells: usize,
    pub spacing: f64,
    pub steps: usize,
    pub series: DiagnosticsSeries<f64>,
    /// Fit of `I ≈ -β t²` on `[T/4, T]`.
    pub fit: QuadraticFit<f64>,
    /// `I(T) / I(T/2)`, with `I(T/2)` linearly interpolated if needed.
    pub concentration_ratio: f64,
    pub max_positivity: f64,
    pub l1_margin: f64,
    pub ledger_max: f64,
    /// `band_mass(η)/mass` at `T`, one per configured `η`.
    pub band_fractions: Vec<f64>,
    pub warnings: Vec<String>,
    pub wall_seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    InsufficientData,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::InsufficientData => "insufficient data",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerdictLine {
    pub label: char,
    pub rule: String,
    pub verdict: Verdict,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub config: RunConfig,
    pub validation: ValidationReport,
    pub runs: Vec<EpsRun>,
    pub verdicts: Vec<VerdictLine>,
}

impl SweepReport {
    pub fn pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.verdict != Verdict::Fail)
    }

    /// 0 when no verdict failed, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.pass() {
            0
        } else {
            2
        }
    }

    pub fn verdict(&self, label: char) -> Option<Verdict> {
        self.verdicts.iter().find(|v| v.label == label).map(|v| v.verdict)
    }
}

/// Derives the five cross-run verdicts from the per-ε rows.
pub fn verdicts(runs: &[EpsRun]) -> Vec<VerdictLine> {
    let all = |ok: bool| if ok { Verdict::Pass } else { Verdict::Fail };
    let trend = |positive: bool, pairs_ok: bool| {
        if !positive {
            Verdict::Fail
        } else if runs.len() < 2 {
            Verdict::InsufficientData
        } else {
            all(pairs_ok)
        }
    };
    let betas: Vec<f64> = runs.iter().map(|r| r.fit.beta).collect();
    let fractions: Vec<f64> = runs
        .iter()
        .map(|r| r.band_fractions.first().copied().unwrap_or(f64::NAN))
        .collect();
    vec![
        VerdictLine {
            label: 'a',
            rule: format!("beta > 0 for every eps and beta(eps_i+1) >= {BETA_TREND} beta(eps_i)"),
            verdict: trend(
                betas.iter().all(|&b| b > 0.0),
                betas.windows(2).all(|w| w[1] >= BETA_TREND * w[0]),
            ),
        },
        VerdictLine {
            label: 'b',
            rule: "band_mass(eta_min)/mass at T nondecreasing as eps decreases".into(),
            verdict: trend(true, fractions.windows(2).all(|w| w[1] >= w[0])),
        },
        VerdictLine {
            label: 'c',
            rule: format!("max positivity violation <= {POSITIVITY_TOL:e}"),
            verdict: all(runs.iter().all(|r| r.max_positivity <= POSITIVITY_TOL)),
        },
        VerdictLine {
            label: 'd',
            rule: format!("l1(t) <= {L1_FACTOR} t G at every probe"),
            verdict: all(runs.iter().all(|r| r.l1_margin <= L1_FACTOR)),
        },
        VerdictLine {
            label: 'e',
            rule: format!("ledger relative residual <= {LEDGER_TOL:e}"),
            verdict: all(runs.iter().all(|r| r.ledger_max <= LEDGER_TOL)),
        },
    ]
}

/// Sweep execution options.
#[derive(Clone, Debug, Default)]
pub struct SweepOptions {
    /// Concurrent runs; 0 or 1 runs them one after another.
    pub jobs: usize,
    /// Overrides the configured output directory. Nothing is written when
    /// both are unset.
    pub out_dir: Option<PathBuf>,
}

/// Validates the hypotheses, runs every ε, derives the verdicts and, when an
/// output directory is known, writes per-run CSVs and the reports.
pub fn run_sweep(cfg: &RunConfig, opts: &SweepOptions) -> Result<SweepReport> {
    cfg.validate()?;
    let validation = validate_only(cfg)?;
    if !validation.pass() {
        return Err(Error::Hypothesis(validation.to_string()));
    }
    let gap = validation.zero_trace_gap;
    let run = |&eps: &f64| run_one(cfg, eps, gap).map_err(|e| Error::Run { eps, source: Box::new(e) });
    let runs = if opts.jobs > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::Usage(format!("cannot start {} jobs: {e}", opts.jobs)))?
            .install(|| cfg.eps.par_iter().map(run).collect::<Result<Vec<_>>>())?
    } else {
        cfg.eps.iter().map(run).collect::<Result<Vec<_>>>()?
    };
    let report = SweepReport {
        verdicts: verdicts(&runs),
        config: cfg.clone(),
        validation,
        runs,
    };
    if let Some(dir) = opts.out_dir.as_ref().or(cfg.out_dir.as_ref()) {
        write_outputs(&report, dir)?;
    }
    Ok(report)
}

/// One sweep member: solve to `T` with probes and reduce to diagnostics.
pub fn run_one(cfg: &RunConfig, eps: f64, gap: f64) -> Result<EpsRun> {
    let start = Instant::now();
    let cells = cfg.cells_for(eps);
    let grid = Grid::new(cfg.dim, cfg.half_width, cells)?;
    if !grid.resolves(eps) {
        return Err(Error::config("n", format!("grid spacing {} does not resolve eps = {eps}", grid.spacing())));
    }
    let surf = cfg.surface()?;
    let flux = cfg.flux()?;
    let mollifier = MollifierFamily::new(eps)?;
    let mut scheme = SchemeConfig::new(eps, cfg.end_time);
    scheme.probe_count = cfg.probes;
    let mut solver = Solver::new(grid, &flux, &surf, &mollifier, scheme)?;
    let probe = Probe::new(grid, &surf, eps, &cfg.schedule(), &cfg.etas)?;
    let mut samples = Vec::with_capacity(cfg.probes);
    let summary = solver.run_from(Field::zeros(grid), &scheme.probe_times(), |u| {
        samples.push(probe.sample(u)?);
        Ok(())
    })?;
    let series = DiagnosticsSeries::new(cfg.etas.clone(), samples, &summary.ledger)?;
    let fit = series.fit_from(cfg.end_time / 4.0)?;
    let times = series.times();
    let i = series.concentration();
    let i_end = *i.last().expect("probes include T");
    let concentration_ratio = i_end / interpolate(&times, i, cfg.end_time / 2.0);
    Ok(EpsRun {
        eps,
        cells,
        spacing: grid.spacing(),
        steps: summary.steps,
        fit,
        concentration_ratio,
        max_positivity: series.max_positivity_violation(),
        l1_margin: series.l1_margin(gap).unwrap_or(f64::NAN),
        ledger_max: series.ledger_max(),
        band_fractions: (0..cfg.etas.len())
            .map(|k| series.final_band_fraction(k).unwrap_or(f64::NAN))
            .collect(),
        series,
        warnings: summary.warnings,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn interpolate(t: &[f64], v: &[f64], at: f64) -> f64 {
    match t.iter().position(|&x| x >= at) {
        Some(0) => v[0],
        Some(j) if t[j] == at => v[j],
        Some(j) => v[j - 1] + (v[j] - v[j - 1]) * (at - t[j - 1]) / (t[j] - t[j - 1]),
        None => *v.last().unwrap_or(&f64::NAN),
    }
}

/// File name of the per-run CSV for `eps`.
pub fn run_csv_name(eps: f64) -> String {
    format!("run_eps_{eps}.csv")
}

fn write_outputs(report: &SweepReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for run in &report.runs {
        let mut f = fs::File::create(dir.join(run_csv_name(run.eps)))?;
        run.series.write_csv(&mut f)?;
    }
    let mut f = fs::File::create(dir.join("sweep_report.csv"))?;
    write_report_csv(report, &mut f)?;
    let mut f = fs::File::create(dir.join("sweep_report.md"))?;
    write_report_md(report, &mut f)?;
    let mut f = fs::File::create(dir.join("timings.txt"))?;
    for run in &report.runs {
        writeln!(f, "eps={} wall_seconds={:.3} steps={}", run.eps, run.wall_seconds, run.steps)?;
    }
    Ok(())
}

/// One row per ε, full precision.
pub fn write_report_csv<W: Write>(report: &SweepReport, out: &mut W) -> std::io::Result<()> {
    write!(
        out,
        "eps,n,h,steps,beta,r2,conc_ratio,max_positivity,l1_margin,ledger_max_rel"
    )?;
    for eta in &report.config.etas {
        write!(out, ",band_fraction_{eta}")?;
    }
    writeln!(out)?;
    for r in &report.runs {
        let r2 = r.fit.r_squared.map_or("nan".to_string(), |v| v.to_string());
        write!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.eps, r.cells, r.spacing, r.steps, r.fit.beta, r2, r.concentration_ratio, r.max_positivity, r.l1_margin, r.ledger_max
        )?;
        for b in &r.band_fractions {
            write!(out, ",{b}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Human-readable report. Wall times live in `timings.txt` so this file is
/// reproducible byte for byte.
pub fn write_report_md<W: Write>(report: &SweepReport, out: &mut W) -> std::io::Result<()> {
    let cfg = &report.config;
    writeln!(out, "# Sweep report\n")?;
    writeln!(out, "## Runs\n")?;
    write!(out, "| eps | n | steps | beta | r2 | I(T)/I(T/2) | max u+ | l1 margin | ledger |")?;
    for eta in &cfg.etas {
        write!(out, " band({eta}) |")?;
    }
    writeln!(out)?;
    write!(out, "|---|---|---|---|---|---|---|---|---|")?;
    for _ in &cfg.etas {
        write!(out, "---|")?;
    }
    writeln!(out)?;
    for r in &report.runs {
        let r2 = r.fit.r_squared.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        write!(
            out,
            "| {} | {} | {} | {:.6} | {r2} | {:.4} | {:.3e} | {:.4} | {:.3e} |",
            r.eps, r.cells, r.steps, r.fit.beta, r.concentration_ratio, r.max_positivity, r.l1_margin, r.ledger_max
        )?;
        for b in &r.band_fractions {
            write!(out, " {b:.4} |")?;
        }
        writeln!(out)?;
    }
    writeln!(out, "\n## Verdicts\n")?;
    for v in &report.verdicts {
        writeln!(out, "- ({}) {}: {}", v.label, v.rule, v.verdict)?;
    }
    let warnings: Vec<String> = report
        .runs
        .iter()
        .flat_map(|r| r.warnings.iter().map(move |w| format!("eps = {}: {w}", r.eps)))
        .collect();
    if !warnings.is_empty() {
        writeln!(out, "\n## Warnings\n")?;
        for w in warnings {
            writeln!(out, "- {w}")?;
        }
    }
    writeln!(out, "\n## Hypotheses\n")?;
    writeln!(out, "```text\n{}\n```", report.validation)?;
    writeln!(out, "\n## Provenance\n")?;
    writeln!(out, "- tool: vvflux-core {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "- wall times: timings.txt")?;
    writeln!(out, "- configuration:\n\n```json\n{}\n```", cfg.echo())
}
