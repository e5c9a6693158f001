//! Bistable traveling waves by iterate-and-recenter.
//!
//! In the transformed frame a wave is a pair `(phi, psi)` with
//! `U_n(x) = phi(x + c n)`, `V_n(x) = psi(x + c n)`, increasing from `(0,0)`
//! to `(1,1)`. One operator step therefore moves the profile left by `c`.
//! The solver evolves monotone initial data, and after every step shifts the
//! state so that the `phi = 1/2` crossing returns to `x = 0`. The shift is an
//! integer number of cells plus a fraction applied by linear interpolation,
//! which keeps every iterate monotone. At convergence the per-step shift is
//! the wave speed.

use crate::error::{Error, Result};
use crate::kernels::{validate_hypotheses, DiscreteKernel};
use crate::model::{require_admissible, Frame, ModelParams};
use crate::operator::{ConvolutionMethod, Grid, Operator, SpatialState};
use crate::report::CheckReport;
use crate::speeds::{counter_propagation, level_crossing};

/// Level whose crossing pins the profile at `x = 0`.
pub const PIN_LEVEL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveOptions {
    /// Sup-norm change between consecutive recentered profiles.
    pub profile_tol: f64,
    /// Spread (max - min) of the trailing per-step displacements.
    pub speed_tol: f64,
    pub max_steps: usize,
    /// Number of trailing steps averaged into the speed.
    pub speed_window: usize,
    /// Width of the sigmoid initial data.
    pub initial_width: f64,
    /// Cells by which the initial data is translated before iterating.
    pub initial_shift: i64,
    pub method: ConvolutionMethod,
}

impl Default for WaveOptions {
    fn default() -> Self {
        Self {
            profile_tol: 1e-6,
            speed_tol: 1e-4,
            max_steps: 2000,
            speed_window: 20,
            initial_width: 1.0,
            initial_shift: 0,
            method: ConvolutionMethod::Fft,
        }
    }
}

/// Per-step diagnostics of the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// `-x_c`: how far the front moved left this step.
    pub displacement: f64,
    /// Whole cells of the recentering shift.
    pub shift_cells: i64,
    /// Fractional cell of the recentering shift, in `[0, 1)`.
    pub shift_fraction: f64,
    /// Sup-norm change from the previous recentered profile.
    pub profile_change: f64,
    /// Largest decrease between neighbouring samples (0 for monotone data).
    pub monotonicity_defect: f64,
    /// All samples within `[0, 1]`.
    pub squeezed: bool,
}

/// Accumulated recentering shifts.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DisplacementLedger {
    pub whole_cells: i64,
    pub fractional_cells: f64,
}

impl DisplacementLedger {
    /// Total leftward displacement of the front, in length units.
    pub fn total(&self, dx: f64) -> f64 {
        -(self.whole_cells as f64 + self.fractional_cells) * dx
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceFailure {
    pub steps: usize,
    pub history: Vec<StepRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveProfile {
    pub grid: Grid,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    /// Wave speed `c` in length per step (`t = x + c n`).
    pub speed: f64,
    /// Sup-norm defect of the traveling-wave equations, `NaN` if unevaluated.
    pub residual: f64,
    /// Cells excluded at each edge when evaluating the residual and tails.
    pub window_margin: usize,
    pub history: Vec<StepRecord>,
    pub ledger: DisplacementLedger,
}

impl WaveProfile {
    /// A bare profile with no solver history.
    pub fn new(grid: Grid, phi: Vec<f64>, psi: Vec<f64>, speed: f64, window_margin: usize) -> Self {
        Self {
            grid,
            phi,
            psi,
            speed,
            residual: f64::NAN,
            window_margin,
            history: Vec::new(),
            ledger: DisplacementLedger::default(),
        }
    }

    pub fn state(&self) -> Result<SpatialState> {
        SpatialState::new(
            self.grid,
            Frame::Transformed,
            self.phi.clone(),
            self.psi.clone(),
        )
    }

    /// `(x, U, V)` rows in the requested frame.
    pub fn rows(&self, frame: Frame) -> Vec<[f64; 3]> {
        (0..self.grid.len())
            .map(|i| {
                let u = match frame {
                    Frame::Transformed => self.phi[i],
                    Frame::Original => 1.0 - self.phi[i],
                };
                [self.grid.x(i), u, self.psi[i]]
            })
            .collect()
    }
}

/// Both components equal `1 / (1 + e^{-x/w})`.
pub fn step_initial_data(grid: Grid, width: f64) -> Result<SpatialState> {
    if !(width > 0.0) {
        return Err(Error::Parameter(format!(
            "ramp width must be positive, got {width}"
        )));
    }
    SpatialState::from_fn(grid, Frame::Transformed, |x| {
        let s = 1.0 / (1.0 + (-x / width).exp());
        [s, s]
    })
}

/// Samples at fractional index `i + pos`, constant beyond the edges.
fn shift_field(f: &[f64], whole: i64, frac: f64) -> Vec<f64> {
    let last = f.len() as i64 - 1;
    (0..f.len() as i64)
        .map(|i| {
            let a = f[(i + whole).clamp(0, last) as usize];
            let b = f[(i + whole + 1).clamp(0, last) as usize];
            if frac == 0.0 {
                a
            } else {
                (1.0 - frac) * a + frac * b
            }
        })
        .collect()
}

fn monotonicity_defect(f: &[f64]) -> f64 {
    f.windows(2)
        .map(|w| (w[0] - w[1]).max(0.0))
        .fold(0.0, f64::max)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn check_preconditions(p: &ModelParams, k1: &DiscreteKernel, k2: &DiscreteKernel) -> Result<()> {
    require_admissible(p)?;
    for k in [k1, k2] {
        let report = validate_hypotheses(k.parent());
        let failure = report
            .failures()
            .next()
            .map(|c| format!("{}: {}", c.clause, c.detail));
        if let Some(msg) = failure {
            return Err(Error::Parameter(msg));
        }
    }
    let cp = counter_propagation(p, k1.parent(), k2.parent())?;
    if !cp.passed() {
        return Err(Error::Parameter(format!(
            "counter-propagation fails: sums {} and {}",
            cp.sum_f1(),
            cp.sum_f2()
        )));
    }
    Ok(())
}

/// Locates the monotone wave joining `(0,0)` and `(1,1)`.
pub fn find_bistable_wave(
    p: &ModelParams,
    k1: &DiscreteKernel,
    k2: &DiscreteKernel,
    grid: Grid,
    opts: &WaveOptions,
) -> Result<WaveProfile> {
    check_preconditions(p, k1, k2)?;
    let op = Operator::new(*p, k1, k2, grid, opts.method)?;
    let dx = grid.dx();

    let mut state = step_initial_data(grid, opts.initial_width)?;
    if opts.initial_shift != 0 {
        state = crate::operator::translate(&state, opts.initial_shift)?;
    }

    let mut history: Vec<StepRecord> = Vec::new();
    let mut ledger = DisplacementLedger::default();
    let window = opts.speed_window.max(1);

    for n in 1..=opts.max_steps {
        let next = op.apply(&state)?;
        let xc = level_crossing(&grid, &next.u, PIN_LEVEL, f64::NEG_INFINITY, f64::INFINITY)
            .ok_or_else(|| {
                Error::DegenerateData(format!("phi does not cross {PIN_LEVEL} at step {n}"))
            })?;
        let pos = xc / dx;
        let whole = pos.floor();
        let frac = pos - whole;
        let whole = whole as i64;
        let u = shift_field(&next.u, whole, frac);
        let v = shift_field(&next.v, whole, frac);

        let record = StepRecord {
            step: n,
            displacement: -xc,
            shift_cells: whole,
            shift_fraction: frac,
            profile_change: sup_diff(&u, &state.u).max(sup_diff(&v, &state.v)),
            monotonicity_defect: monotonicity_defect(&u).max(monotonicity_defect(&v)),
            squeezed: u.iter().chain(v.iter()).all(|x| (0.0..=1.0).contains(x)),
        };
        ledger.whole_cells += whole;
        ledger.fractional_cells += frac;
        history.push(record);
        state = SpatialState {
            grid,
            frame: Frame::Transformed,
            u,
            v,
            step: n,
        };

        if history.len() >= window {
            let tail = &history[history.len() - window..];
            let (lo, hi) = tail
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r.displacement), hi.max(r.displacement))
                });
            if record.profile_change < opts.profile_tol && hi - lo < opts.speed_tol {
                let speed = tail.iter().map(|r| r.displacement).sum::<f64>() / window as f64;
                let mut wave = WaveProfile {
                    grid,
                    phi: state.u,
                    psi: state.v,
                    speed,
                    residual: f64::NAN,
                    window_margin: op.reach(),
                    history,
                    ledger,
                };
                wave.residual = wave_residual(&wave, p, k1, k2)?;
                log::debug!("wave converged after {n} steps, c = {speed}");
                return Ok(wave);
            }
        }
    }
    Err(Error::Convergence(Box::new(ConvergenceFailure {
        steps: opts.max_steps,
        history,
    })))
}

/// Sup-norm defect of `phi(t + c) = Q[phi, psi](t)` (and likewise for
/// `psi`) on the grid interior, with the shift by `c` applied by linear
/// interpolation.
pub fn wave_residual(
    wp: &WaveProfile,
    p: &ModelParams,
    k1: &DiscreteKernel,
    k2: &DiscreteKernel,
) -> Result<f64> {
    let op = Operator::new(*p, k1, k2, wp.grid, ConvolutionMethod::Fft)?;
    let stepped = op.apply(&wp.state()?)?;
    let pos = -wp.speed / wp.grid.dx();
    if !pos.is_finite() {
        return Err(Error::Window(format!("speed {} is not finite", wp.speed)));
    }
    let whole = pos.floor();
    let frac = pos - whole;
    let margin = op.reach() + whole.abs() as usize + 2;
    let range = wp.grid.interior(margin);
    if range.is_empty() {
        return Err(Error::Window(format!(
            "|c| = {} leaves no interior window on a grid of {} points",
            wp.speed.abs(),
            wp.grid.len()
        )));
    }
    let u = shift_field(&stepped.u, whole as i64, frac);
    let v = shift_field(&stepped.v, whole as i64, frac);
    Ok(range
        .map(|i| (u[i] - wp.phi[i]).abs().max((v[i] - wp.psi[i]).abs()))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationTolerances {
    /// Allowed decrease between neighbouring samples.
    pub monotone_slack: f64,
    /// Allowed distance from the limit states in the tail bands.
    pub tail_tol: f64,
    /// Fraction of the interior window forming each tail band.
    pub tail_fraction: f64,
    pub max_residual: f64,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        Self {
            monotone_slack: 1e-10,
            tail_tol: 1e-3,
            tail_fraction: 0.1,
            max_residual: 1e-4,
        }
    }
}

/// Checks monotonicity, limits, range and residual of a profile.
pub fn validate_profile(wp: &WaveProfile, tols: &ValidationTolerances) -> CheckReport {
    let mut report = CheckReport::new();

    let defect = monotonicity_defect(&wp.phi).max(monotonicity_defect(&wp.psi));
    report.push(
        "monotone",
        defect <= tols.monotone_slack,
        format!("largest decrease {defect:e}"),
    );

    let range = wp.grid.interior(wp.window_margin);
    let band = ((range.len() as f64 * tols.tail_fraction).ceil() as usize).max(1);
    if range.len() < 2 * band {
        report.push("left tail", false, "interior window too small");
        report.push("right tail", false, "interior window too small");
    } else {
        let left = range.start..range.start + band;
        let right = range.end - band..range.end;
        let left_dev = left
            .map(|i| wp.phi[i].abs().max(wp.psi[i].abs()))
            .fold(0.0, f64::max);
        let right_dev = right
            .map(|i| (1.0 - wp.phi[i]).abs().max((1.0 - wp.psi[i]).abs()))
            .fold(0.0, f64::max);
        report.push(
            "left tail",
            left_dev <= tols.tail_tol,
            format!("max distance from (0,0): {left_dev:e}"),
        );
        report.push(
            "right tail",
            right_dev <= tols.tail_tol,
            format!("max distance from (1,1): {right_dev:e}"),
        );
    }

    let in_range = wp
        .phi
        .iter()
        .chain(wp.psi.iter())
        .all(|x| (0.0..=1.0).contains(x));
    report.push("range", in_range, "samples within [0,1]");
    report.push(
        "residual",
        wp.residual <= tols.max_residual,
        format!("{:e} (limit {:e})", wp.residual, tols.max_residual),
    );
    report
}
