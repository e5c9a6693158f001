//! Spreading speeds of the monostable subsystems.
//!
//! Scalar speeds come from the linear-determinacy formula
//! `inf_{mu>0} (r + ln M(mu)) / mu`. Away from the coexistence state the
//! two species stay coupled and the speed bound uses the Perron root of the
//! 2x2 linearization `B_mu` instead. Both objectives blow up as `mu -> 0+`
//! and are minimized by forward doubling followed by golden-section search.
//!
//! Leftward and rightward speeds share one objective because every kernel
//! here is symmetric, so `M(mu) = M(-mu)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::kernels::{validate_hypotheses, DiscreteKernel, Kernel};
use crate::model::{coexistence, require_admissible, Matrix2, ModelParams};
use crate::operator::{Component, ConvolutionMethod, Convolver, Grid, SpatialState};

/// First trial point of the bracketing search.
pub const MU_START: f64 = 1e-3;
/// Smallest `mu` the search may evaluate.
pub const MU_FLOOR: f64 = 1e-6;
/// Relative bracket width at which golden-section search stops.
pub const MU_TOL: f64 = 1e-8;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpeedKind {
    /// Leftward speed on the order interval `[F1, F3]`.
    MinusF1F3,
    /// Rightward speed on `[F0, F1]`.
    PlusF0F1,
    /// Leftward speed on `[F2, F3]`.
    MinusF2F3,
    /// Rightward speed on `[F0, F2]`.
    PlusF0F2,
}

impl SpeedKind {
    pub const ALL: [SpeedKind; 4] = [
        SpeedKind::MinusF1F3,
        SpeedKind::PlusF0F1,
        SpeedKind::MinusF2F3,
        SpeedKind::PlusF0F2,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            SpeedKind::MinusF1F3 => "cminus_F1F3",
            SpeedKind::PlusF0F1 => "cplus_F0F1",
            SpeedKind::MinusF2F3 => "cminus_F2F3",
            SpeedKind::PlusF0F2 => "cplus_F0F2",
        }
    }
}

impl fmt::Display for SpeedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeedMethod {
    ScalarFormula,
    MatrixEigenvalue,
    Empirical,
}

impl fmt::Display for SpeedMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpeedMethod::ScalarFormula => "scalar-formula",
            SpeedMethod::MatrixEigenvalue => "matrix-eigenvalue",
            SpeedMethod::Empirical => "empirical",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedReport {
    /// Speed in length per step.
    pub value: f64,
    /// Minimizing `mu`; `NaN` for empirical speeds.
    pub argmin: f64,
    /// `(mu, objective)` samples around the minimum.
    pub curve: Vec<(f64, f64)>,
    pub method: SpeedMethod,
}

/// What to compute, with the inputs it needs.
#[derive(Debug, Clone)]
pub struct SpeedQuery<'a> {
    pub which: SpeedKind,
    pub params: ModelParams,
    pub kernels: (&'a Kernel, &'a Kernel),
}

pub fn spreading_speed(query: &SpeedQuery<'_>) -> Result<SpeedReport> {
    let (l1, l2) = query.kernels;
    let p = &query.params;
    require_admissible(p)?;
    match query.which {
        SpeedKind::MinusF1F3 => scalar_speed(p.r2, l2),
        SpeedKind::PlusF0F1 => scalar_speed(p.r1, l1),
        which => system_speed_bound(p, l1, l2, which),
    }
}

/// Golden-section minimization after doubling from [`MU_START`] until the
/// objective turns upward.
pub fn minimize_over_mu(objective: impl Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let eval = |mu: f64| -> Result<f64> {
        match objective(mu) {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(v) => Err(Error::Search(format!("objective is {v} at mu = {mu}"))),
            Err(Error::MgfOverflow { mu }) => Err(Error::Search(format!(
                "no minimum bracketed before the MGF overflows at mu = {mu}"
            ))),
            Err(e) => Err(e),
        }
    };

    let (mut lo, mut mid) = (MU_START, 2.0 * MU_START);
    let f_lo = eval(lo)?;
    let mut f_mid = eval(mid)?;
    let (a, b) = if f_mid > f_lo {
        // the minimum sits below MU_START
        let f_floor = eval(MU_FLOOR)?;
        if f_floor <= f_lo {
            return Err(Error::Search(format!(
                "objective still decreasing at the lower guard mu = {MU_FLOOR}"
            )));
        }
        (MU_FLOOR, mid)
    } else {
        loop {
            let hi = 2.0 * mid;
            let f_hi = eval(hi)?;
            if f_hi > f_mid {
                break (lo, hi);
            }
            lo = mid;
            mid = hi;
            f_mid = f_hi;
        }
    };

    let (mut a, mut b) = (a, b);
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let (mut f1, mut f2) = (eval(x1)?, eval(x2)?);
    for _ in 0..400 {
        if b - a <= MU_TOL * 0.5 * (a + b) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = eval(x2)?;
        }
    }
    let (mu, val) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    Ok((mu, val))
}

fn sample_curve(objective: impl Fn(f64) -> Result<f64>, argmin: f64) -> Vec<(f64, f64)> {
    (1..=200)
        .map(|k| argmin * k as f64 / 50.0)
        .filter_map(|mu| {
            objective(mu)
                .ok()
                .filter(|v| v.is_finite())
                .map(|v| (mu, v))
        })
        .collect()
}

fn require_kernel(k: &Kernel) -> Result<()> {
    let report = validate_hypotheses(k);
    if let Some(c) = report.failures().next() {
        return Err(Error::Parameter(format!(
            "kernel {k}: {} violated: {}",
            c.clause, c.detail
        )));
    }
    Ok(())
}

/// `(r + ln M(mu)) / mu`.
pub fn scalar_objective(r: f64, k: &Kernel, mu: f64) -> Result<f64> {
    Ok((r + k.mgf(mu)?.ln()) / mu)
}

/// Spreading speed of the scalar recursion `p -> l * (p e^{r(1-p)})`.
pub fn scalar_speed(r: f64, k: &Kernel) -> Result<SpeedReport> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Parameter(format!(
            "growth rate must lie in (0,1), got {r}"
        )));
    }
    require_kernel(k)?;
    let objective = |mu: f64| scalar_objective(r, k, mu);
    let (argmin, value) = minimize_over_mu(objective)?;
    Ok(SpeedReport {
        value,
        argmin,
        curve: sample_curve(objective, argmin),
        method: SpeedMethod::ScalarFormula,
    })
}

/// Sup-norm gap between one step of the deficit recursion
/// `q -> 1 - l * ((1-q) e^{r q})` and one step of the Ricker recursion
/// `w -> l * (w e^{r(1-w)})` run on `w = 1 - q` and mapped back.
pub fn w_transform_check(r: f64, kernel: &Convolver, q: &[f64]) -> f64 {
    let deficit: Vec<f64> = q.iter().map(|&q| (1.0 - q) * (r * q).exp()).collect();
    let direct: Vec<f64> = kernel.convolve(&deficit).iter().map(|c| 1.0 - c).collect();

    let w: Vec<f64> = q.iter().map(|q| 1.0 - q).collect();
    let growth: Vec<f64> = w.iter().map(|&w| w * (r * (1.0 - w)).exp()).collect();
    let via_w: Vec<f64> = kernel.convolve(&growth).iter().map(|w| 1.0 - w).collect();

    direct
        .iter()
        .zip(via_w.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// `B_mu` of the linearization at the coexistence state:
/// `[[(1 - r1 k1) M1, a1 r1 k1 M2], [a2 r2 k2 M1, (1 - r2 k2) M2]]`.
pub fn linearization_matrix(p: &ModelParams, l1: &Kernel, l2: &Kernel, mu: f64) -> Result<Matrix2> {
    if !(mu >= 0.0) {
        return Err(Error::Domain(format!("mu must be nonnegative, got {mu}")));
    }
    let (k1, k2) = coexistence(p)?;
    let m1 = l1.mgf(mu)?;
    let m2 = l2.mgf(mu)?;
    Ok([
        [(1.0 - p.r1 * k1) * m1, p.a1 * p.r1 * k1 * m2],
        [p.a2 * p.r2 * k2 * m1, (1.0 - p.r2 * k2) * m2],
    ])
}

/// Perron root of an entrywise positive 2x2 matrix.
pub fn principal_eigenvalue(b: &Matrix2) -> Result<f64> {
    if !b.iter().flatten().all(|x| *x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!(
            "matrix {b:?} is not entrywise positive"
        )));
    }
    let diff = b[0][0] - b[1][1];
    let disc = diff * diff + 4.0 * b[0][1] * b[1][0];
    Ok(0.5 * (b[0][0] + b[1][1] + disc.sqrt()))
}

/// Perron root with its positive eigenvector `(b, λ - a)`.
pub fn perron_pair(b: &Matrix2) -> Result<(f64, [f64; 2])> {
    let lambda = principal_eigenvalue(b)?;
    Ok((lambda, [b[0][1], lambda - b[0][0]]))
}

pub fn system_objective(p: &ModelParams, l1: &Kernel, l2: &Kernel, mu: f64) -> Result<f64> {
    Ok(principal_eigenvalue(&linearization_matrix(p, l1, l2, mu)?)?.ln() / mu)
}

/// `inf_{mu>0} ln λ(B_mu) / mu` for the two speeds at the coexistence state.
pub fn system_speed_bound(
    p: &ModelParams,
    l1: &Kernel,
    l2: &Kernel,
    which: SpeedKind,
) -> Result<SpeedReport> {
    if !matches!(which, SpeedKind::MinusF2F3 | SpeedKind::PlusF0F2) {
        return Err(Error::Parameter(format!(
            "{which} is not a coexistence-state speed"
        )));
    }
    require_admissible(p)?;
    require_kernel(l1)?;
    require_kernel(l2)?;
    let lambda0 = principal_eigenvalue(&linearization_matrix(p, l1, l2, 0.0)?)?;
    if !(lambda0 > 1.0) {
        return Err(Error::Search(format!(
            "lambda(B_0) = {lambda0} does not exceed 1"
        )));
    }
    let objective = |mu: f64| system_objective(p, l1, l2, mu);
    let (argmin, value) = minimize_over_mu(objective)?;
    Ok(SpeedReport {
        value,
        argmin,
        curve: sample_curve(objective, argmin),
        method: SpeedMethod::MatrixEigenvalue,
    })
}

/// The four monostable speeds and the two counter-propagation sums.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterPropagation {
    pub minus_f1f3: SpeedReport,
    pub plus_f0f1: SpeedReport,
    pub minus_f2f3: SpeedReport,
    pub plus_f0f2: SpeedReport,
    /// `λ(B_0)`.
    pub lambda_b0: f64,
}

impl CounterPropagation {
    /// `c-(F1,F3) + c+(F0,F1)`.
    pub fn sum_f1(&self) -> f64 {
        self.minus_f1f3.value + self.plus_f0f1.value
    }

    /// `c-(F2,F3) + c+(F0,F2)`.
    pub fn sum_f2(&self) -> f64 {
        self.minus_f2f3.value + self.plus_f0f2.value
    }

    pub fn passed(&self) -> bool {
        self.sum_f1() > 0.0 && self.sum_f2() > 0.0
    }

    pub fn report(&self, which: SpeedKind) -> &SpeedReport {
        match which {
            SpeedKind::MinusF1F3 => &self.minus_f1f3,
            SpeedKind::PlusF0F1 => &self.plus_f0f1,
            SpeedKind::MinusF2F3 => &self.minus_f2f3,
            SpeedKind::PlusF0F2 => &self.plus_f0f2,
        }
    }
}

pub fn counter_propagation(
    p: &ModelParams,
    l1: &Kernel,
    l2: &Kernel,
) -> Result<CounterPropagation> {
    require_admissible(p)?;
    let minus_f1f3 = scalar_speed(p.r2, l2)?;
    let plus_f0f1 = scalar_speed(p.r1, l1)?;
    let minus_f2f3 = system_speed_bound(p, l1, l2, SpeedKind::MinusF2F3)?;
    // same B_mu by kernel symmetry
    let plus_f0f2 = minus_f2f3.clone();
    let lambda_b0 = principal_eigenvalue(&linearization_matrix(p, l1, l2, 0.0)?)?;
    Ok(CounterPropagation {
        minus_f1f3,
        plus_f0f1,
        minus_f2f3,
        plus_f0f2,
        lambda_b0,
    })
}

/// Steps and spatial extent over which a front is tracked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitWindow {
    pub first_step: usize,
    /// Inclusive.
    pub last_step: usize,
    pub x_min: f64,
    pub x_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontFit {
    /// Least-squares slope of crossing position against step, length per step.
    pub speed: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the linear fit.
    pub rms_residual: f64,
    /// `(step, crossing position)` pairs used in the fit.
    pub crossings: Vec<(usize, f64)>,
}

/// First crossing of `level` inside `[x_min, x_max]`, linearly interpolated.
pub fn level_crossing(
    grid: &Grid,
    field: &[f64],
    level: f64,
    x_min: f64,
    x_max: f64,
) -> Option<f64> {
    let dx = grid.dx();
    let first = (0..grid.len()).find(|&i| grid.x(i) >= x_min)?;
    let mut i = first;
    while i + 1 < grid.len() && grid.x(i + 1) <= x_max {
        let (a, b) = (field[i] - level, field[i + 1] - level);
        if a == 0.0 {
            return Some(grid.x(i));
        }
        if a * b < 0.0 || (b == 0.0 && a != 0.0) {
            let t = (level - field[i]) / (field[i + 1] - field[i]);
            return Some(grid.x(i) + t * dx);
        }
        i += 1;
    }
    None
}

fn least_squares(points: &[(usize, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 as f64 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 as f64 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0 as f64).powi(2))
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Front speed from `(step, field)` snapshots on a common grid.
pub fn measure_level_speed<'a>(
    grid: &Grid,
    snapshots: impl IntoIterator<Item = (usize, &'a [f64])>,
    level: f64,
    window: FitWindow,
) -> Result<FrontFit> {
    let mut crossings = Vec::new();
    for (step, field) in snapshots {
        if step < window.first_step || step > window.last_step {
            continue;
        }
        match level_crossing(grid, field, level, window.x_min, window.x_max) {
            Some(x) => crossings.push((step, x)),
            None => {
                return Err(Error::Measurement(format!(
                    "level {level} not crossed inside [{}, {}] at step {step}",
                    window.x_min, window.x_max
                )))
            }
        }
    }
    if crossings.len() < 2 {
        return Err(Error::Measurement(format!(
            "need at least two snapshots in steps {}..={}, found {}",
            window.first_step,
            window.last_step,
            crossings.len()
        )));
    }
    let (speed, intercept, rms_residual) = least_squares(&crossings);
    Ok(FrontFit {
        speed,
        intercept,
        rms_residual,
        crossings,
    })
}

/// Front speed of one component of a two-species trajectory.
pub fn measure_front_speed(
    trajectory: &[SpatialState],
    component: Component,
    level: f64,
    window: FitWindow,
) -> Result<FrontFit> {
    let grid = trajectory
        .first()
        .ok_or_else(|| Error::Measurement("empty trajectory".into()))?
        .grid;
    measure_level_speed(
        &grid,
        trajectory.iter().map(|s| (s.step, s.component(component))),
        level,
        window,
    )
}

/// Scalar monostable recursions used to check the speed formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarRecursion {
    /// `p -> l * (p e^{r(1-p)})`.
    Ricker,
    /// `q -> 1 - l * ((1-q) e^{r q})`.
    Deficit,
}

impl ScalarRecursion {
    pub fn step(&self, r: f64, kernel: &Convolver, field: &[f64]) -> Vec<f64> {
        match self {
            ScalarRecursion::Ricker => {
                let g: Vec<f64> = field.iter().map(|&p| p * (r * (1.0 - p)).exp()).collect();
                kernel
                    .convolve(&g)
                    .into_iter()
                    .map(|x| x.clamp(0.0, 1.0))
                    .collect()
            }
            ScalarRecursion::Deficit => {
                let g: Vec<f64> = field.iter().map(|&q| (1.0 - q) * (r * q).exp()).collect();
                kernel
                    .convolve(&g)
                    .into_iter()
                    .map(|x| (1.0 - x).clamp(0.0, 1.0))
                    .collect()
            }
        }
    }

    /// All snapshots `0..=steps` of the recursion.
    pub fn run(
        &self,
        r: f64,
        kernel: &Convolver,
        initial: Vec<f64>,
        steps: usize,
    ) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(steps + 1);
        out.push(initial);
        for n in 0..steps {
            let next = self.step(r, kernel, &out[n]);
            out.push(next);
        }
        out
    }
}

/// Empirical invasion speed of the scalar Ricker recursion.
///
/// Starts from the step `p = 1` on `x <= 0`, `p = 0` beyond, and fits the
/// `level` crossing over the second half of the run, keeping `kernel reach
/// + 20` cells away from the grid edges.
///
/// The state `p = 0` ahead of the front is unstable, so any absolute
/// round-off there grows by `e^r` per step. The FFT path leaves noise near
/// `1e-16` everywhere, which overtakes the front within about `37 / r`
/// steps; [`ConvolutionMethod::Direct`] keeps the leading edge exact.
pub fn empirical_scalar_speed(
    r: f64,
    kernel: &DiscreteKernel,
    grid: &Grid,
    steps: usize,
    level: f64,
    method: ConvolutionMethod,
) -> Result<(SpeedReport, FrontFit)> {
    if (kernel.dx() - grid.dx()).abs() > 1e-12 * grid.dx() {
        return Err(Error::Configuration(
            "kernel and grid spacing differ".into(),
        ));
    }
    let conv = Convolver::new(kernel, grid.len(), method);
    let initial: Vec<f64> = grid
        .points()
        .map(|x| if x <= 0.0 { 1.0 } else { 0.0 })
        .collect();
    let snaps = ScalarRecursion::Ricker.run(r, &conv, initial, steps);
    let margin = (kernel.half_width() + 20) as f64 * grid.dx();
    let window = FitWindow {
        first_step: steps / 2,
        last_step: steps,
        x_min: -grid.half_length() + margin,
        x_max: grid.half_length() - margin,
    };
    let fit = measure_level_speed(
        grid,
        snaps.iter().enumerate().map(|(n, f)| (n, f.as_slice())),
        level,
        window,
    )?;
    Ok((
        SpeedReport {
            value: fit.speed,
            argmin: f64::NAN,
            curve: Vec::new(),
            method: SpeedMethod::Empirical,
        },
        fit,
    ))
}
