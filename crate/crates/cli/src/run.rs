//! Subcommand execution and the run report.

use std::fmt;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use ricker_ide::kernels::{discretize, make_kernel, validate_hypotheses, DiscreteKernel, Kernel};
use ricker_ide::model::{
    classify_stability, equilibria, strong_stability_vectors, validate_params, Frame, ModelParams,
};
use ricker_ide::operator::{translate, ConvolutionMethod, Grid, Operator, SpatialState};
use ricker_ide::report::CheckReport;
use ricker_ide::speeds::{counter_propagation, level_crossing, SpeedKind};
use ricker_ide::waves::{find_bistable_wave, step_initial_data, validate_profile};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};
use crate::output::{sig12, write_csv};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Model(#[from] ricker_ide::Error),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("writing artifacts: {0}")]
    Io(#[from] std::io::Error),

    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Equilibria,
    Speeds { curve: bool },
    Simulate { frame: Frame },
    Wave { frame: Frame },
    Sweep,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Equilibria => "equilibria",
            Command::Speeds { .. } => "speeds",
            Command::Simulate { .. } => "simulate",
            Command::Wave { .. } => "wave",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads for `sweep`; 0 lets the pool decide.
    pub jobs: usize,
    /// Seed for the randomized property checks of `validate`.
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub command: &'static str,
    pub checks: CheckReport,
    pub artifacts: Vec<PathBuf>,
    /// Headline results, e.g. the wave speed.
    pub summary: Vec<(String, String)>,
    pub timings: Vec<(String, Duration)>,
}

impl RunReport {
    fn new(command: &'static str) -> Self {
        Self {
            command,
            checks: CheckReport::new(),
            artifacts: Vec::new(),
            summary: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.passed()
    }

    fn note(&mut self, key: &str, value: impl fmt::Display) {
        self.summary.push((key.to_string(), value.to_string()));
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "== {} ==", self.command)?;
        for (k, v) in &self.summary {
            writeln!(f, "{k}: {v}")?;
        }
        write!(f, "{}", self.checks)?;
        for a in &self.artifacts {
            writeln!(f, "wrote {}", a.display())?;
        }
        for (phase, t) in &self.timings {
            writeln!(f, "time {phase}: {:.3} s", t.as_secs_f64())?;
        }
        let verdict = if self.passed() {
            "all checks passed"
        } else {
            "checks FAILED"
        };
        writeln!(f, "{verdict}")
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    comment: String,
}

impl Context<'_> {
    fn csv(
        &self,
        report: &mut RunReport,
        name: &str,
        header: &[&str],
        rows: Vec<Vec<String>>,
    ) -> Result<(), RunError> {
        let path = write_csv(&self.cfg.output_dir, name, &self.comment, header, rows)?;
        report.artifacts.push(path);
        Ok(())
    }

    fn grid(&self) -> Result<Grid, RunError> {
        Ok(Grid::new(self.cfg.half_length, self.cfg.dx)?)
    }

    fn discrete(&self, k: &Kernel) -> Result<DiscreteKernel, RunError> {
        Ok(discretize(k, self.cfg.dx, self.cfg.truncation)?)
    }
}

fn kernels(cfg: &ExperimentConfig) -> Result<(Kernel, Kernel), RunError> {
    Ok((
        make_kernel(&cfg.kernel1.spec()?)?,
        make_kernel(&cfg.kernel2.spec()?)?,
    ))
}

fn hypotheses(p: &ModelParams, k1: &Kernel, k2: &Kernel) -> CheckReport {
    let mut report = validate_params(p);
    for (name, k) in [("kernel1", k1), ("kernel2", k2)] {
        for mut c in validate_hypotheses(k).checks {
            c.clause = format!("{name} {}", c.clause);
            report.checks.push(c);
        }
    }
    report
}

fn frame_name(frame: Frame) -> &'static str {
    match frame {
        Frame::Original => "original",
        Frame::Transformed => "transformed",
    }
}

/// Runs one subcommand and writes its artifacts under `cfg.output_dir`.
pub fn run(cmd: Command, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport, RunError> {
    cfg.validate()?;
    let started = Instant::now();
    let ctx = Context {
        cfg,
        comment: format!("ricker-ide {} config-sha256 {}", cmd.name(), cfg.digest()),
    };
    let mut report = RunReport::new(cmd.name());

    if cmd == Command::Sweep {
        sweep(&ctx, opts, &mut report)?;
    } else {
        let (k1, k2) = kernels(cfg)?;
        report.checks = hypotheses(&cfg.model, &k1, &k2);
        if report.passed() || cmd == Command::Validate {
            match cmd {
                Command::Validate => validate(&ctx, opts, &k1, &k2, &mut report)?,
                Command::Equilibria => equilibria_cmd(&ctx, &mut report)?,
                Command::Speeds { curve } => speeds(&ctx, &k1, &k2, curve, &mut report)?,
                Command::Simulate { frame } => simulate(&ctx, &k1, &k2, frame, &mut report)?,
                Command::Wave { frame } => wave(&ctx, &k1, &k2, frame, &mut report)?,
                Command::Sweep => unreachable!(),
            }
        }
    }

    let rows = report
        .checks
        .checks
        .iter()
        .map(|c| vec![c.clause.clone(), c.passed.to_string(), c.detail.clone()])
        .collect();
    ctx.csv(
        &mut report,
        &format!("{}_checks.csv", cmd.name()),
        &["clause", "passed", "detail"],
        rows,
    )?;
    report.timings.push(("total".into(), started.elapsed()));
    Ok(report)
}

fn random_state(rng: &mut ChaCha8Rng, grid: Grid) -> Result<SpatialState, RunError> {
    let u = (0..grid.len()).map(|_| rng.gen::<f64>()).collect();
    let v = (0..grid.len()).map(|_| rng.gen::<f64>()).collect();
    Ok(SpatialState::new(grid, Frame::Transformed, u, v)?)
}

const PROPERTY_TRIALS: usize = 100;

fn validate(
    ctx: &Context<'_>,
    opts: &RunOptions,
    k1: &Kernel,
    k2: &Kernel,
    report: &mut RunReport,
) -> Result<(), RunError> {
    if !report.passed() {
        return Ok(());
    }
    let p = ctx.cfg.model;
    let grid = ctx.grid()?;
    let (d1, d2) = (ctx.discrete(k1)?, ctx.discrete(k2)?);
    let op = Operator::new(p, &d1, &d2, grid, ConvolutionMethod::Fft)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut a1: f64 = 0.0;
    for _ in 0..10 {
        let shift = rng.gen_range(-50i64..=50);
        let s = random_state(&mut rng, grid)?;
        let lhs = op.apply(&translate(&s, shift)?)?;
        let rhs = translate(&op.apply(&s)?, shift)?;
        let margin = op.reach() + shift.unsigned_abs() as usize + 1;
        a1 = a1.max(lhs.sup_distance(&rhs, grid.interior(margin)));
    }
    report.checks.push(
        "A1 translation commutes",
        a1 <= 1e-12,
        format!("interior defect {a1:e} over 10 random states"),
    );

    let mut a3: f64 = 0.0;
    for _ in 0..PROPERTY_TRIALS {
        let lo = random_state(&mut rng, grid)?;
        let hu =
            lo.u.iter()
                .map(|x| x + (1.0 - x) * rng.gen::<f64>())
                .collect();
        let hv =
            lo.v.iter()
                .map(|x| x + (1.0 - x) * rng.gen::<f64>())
                .collect();
        let hi = SpatialState::new(grid, Frame::Transformed, hu, hv)?;
        let (ql, qh) = (op.apply(&lo)?, op.apply(&hi)?);
        for i in 0..grid.len() {
            a3 = a3.max(ql.u[i] - qh.u[i]).max(ql.v[i] - qh.v[i]);
        }
    }
    report.checks.push(
        "A3 order preserved",
        a3 <= 1e-12,
        format!("largest violation {a3:e} over {PROPERTY_TRIALS} ordered pairs"),
    );

    match strong_stability_vectors(&p) {
        Ok(cert) => {
            report.checks.push(
                "A5 strong stability certificate",
                true,
                format!(
                    "E4 = {:?}, E5 = {:?}, delta = {}",
                    cert.e4, cert.e5, cert.delta
                ),
            );
            report.checks.push(
                "A5 F1, F2 unordered",
                cert.intermediates_unordered,
                "intermediate equilibria are not comparable",
            );
        }
        Err(e) => report
            .checks
            .push("A5 strong stability certificate", false, e.to_string()),
    }

    let cp = counter_propagation(&p, k1, k2)?;
    report.checks.push(
        "A6 counter-propagation",
        cp.passed(),
        format!("sums {} and {}", sig12(cp.sum_f1()), sig12(cp.sum_f2())),
    );
    report.note("seed", opts.seed);
    Ok(())
}

fn equilibria_cmd(ctx: &Context<'_>, report: &mut RunReport) -> Result<(), RunError> {
    let p = ctx.cfg.model;
    let eq = equilibria(&p)?;
    let mut rows = Vec::new();
    for (frame, prefix, points, residuals) in [
        (Frame::Original, "E", eq.original, eq.original_residuals),
        (
            Frame::Transformed,
            "F",
            eq.transformed,
            eq.transformed_residuals,
        ),
    ] {
        for (i, (pt, res)) in points.iter().zip(residuals).enumerate() {
            let st = classify_stability(&p, *pt, frame)?;
            rows.push(vec![
                format!("{prefix}{i}"),
                frame_name(frame).to_string(),
                sig12(pt[0]),
                sig12(pt[1]),
                sig12(res),
                st.kind.to_string(),
                sig12(st.spectral_radius),
            ]);
        }
    }
    let worst = eq.max_residual();
    report.checks.push(
        "fixed-point residuals",
        worst < 1e-12,
        format!("max residual {worst:e}"),
    );
    report.note("k1", sig12(eq.k1));
    report.note("k2", sig12(eq.k2));
    ctx.csv(
        report,
        "equilibria.csv",
        &[
            "name",
            "frame",
            "u",
            "v",
            "residual",
            "stability",
            "spectral_radius",
        ],
        rows,
    )
}

fn speeds(
    ctx: &Context<'_>,
    k1: &Kernel,
    k2: &Kernel,
    curve: bool,
    report: &mut RunReport,
) -> Result<(), RunError> {
    let cp = counter_propagation(&ctx.cfg.model, k1, k2)?;
    let rows = SpeedKind::ALL
        .iter()
        .map(|&which| {
            let r = cp.report(which);
            vec![
                which.label().to_string(),
                sig12(r.value),
                sig12(r.argmin),
                r.method.to_string(),
            ]
        })
        .collect();
    ctx.csv(
        report,
        "speeds.csv",
        &["speed", "value", "argmin_mu", "method"],
        rows,
    )?;
    if curve {
        let rows = SpeedKind::ALL
            .iter()
            .flat_map(|&which| {
                cp.report(which)
                    .curve
                    .iter()
                    .map(move |(mu, obj)| vec![which.label().to_string(), sig12(*mu), sig12(*obj)])
            })
            .collect();
        ctx.csv(
            report,
            "speeds_curve.csv",
            &["speed", "mu", "objective"],
            rows,
        )?;
    }
    report.checks.push(
        "A6 sum at F1 positive",
        cp.sum_f1() > 0.0,
        sig12(cp.sum_f1()).to_string(),
    );
    report.checks.push(
        "A6 sum at F2 positive",
        cp.sum_f2() > 0.0,
        sig12(cp.sum_f2()).to_string(),
    );
    report.checks.push(
        "lambda(B0) > 1",
        cp.lambda_b0 > 1.0,
        sig12(cp.lambda_b0).to_string(),
    );
    report.note("sum_F1", sig12(cp.sum_f1()));
    report.note("sum_F2", sig12(cp.sum_f2()));
    Ok(())
}

fn simulate(
    ctx: &Context<'_>,
    k1: &Kernel,
    k2: &Kernel,
    frame: Frame,
    report: &mut RunReport,
) -> Result<(), RunError> {
    let grid = ctx.grid()?;
    let (d1, d2) = (ctx.discrete(k1)?, ctx.discrete(k2)?);
    let op = Operator::new(ctx.cfg.model, &d1, &d2, grid, ConvolutionMethod::Fft)?;
    let start = step_initial_data(grid, ctx.cfg.wave.initial_width)?;
    let t = Instant::now();
    let snaps = op.iterate(&start, ctx.cfg.steps, ctx.cfg.thin)?;
    report.timings.push(("iterate".into(), t.elapsed()));

    let mut rows = Vec::with_capacity(snaps.len() * grid.len());
    let mut fronts = Vec::with_capacity(snaps.len());
    let mut in_range = true;
    let mut defect: f64 = 0.0;
    for s in &snaps {
        for w in [&s.u, &s.v] {
            in_range &= w.iter().all(|x| (0.0..=1.0).contains(x));
            defect = w
                .windows(2)
                .map(|p| (p[0] - p[1]).max(0.0))
                .fold(defect, f64::max);
        }
        let cross = |f: &[f64]| {
            level_crossing(&grid, f, 0.5, f64::NEG_INFINITY, f64::INFINITY)
                .map_or_else(|| "NaN".to_string(), sig12)
        };
        fronts.push(vec![s.step.to_string(), cross(&s.u), cross(&s.v)]);
        let out = match frame {
            Frame::Transformed => s.clone(),
            Frame::Original => s.change_coordinates(),
        };
        for i in 0..grid.len() {
            rows.push(vec![
                s.step.to_string(),
                sig12(grid.x(i)),
                sig12(out.u[i]),
                sig12(out.v[i]),
            ]);
        }
    }
    report
        .checks
        .push("range preserved", in_range, "all snapshots within [0,1]");
    report.checks.push(
        "monotonicity preserved",
        defect <= ctx.cfg.tolerances.monotone_slack,
        format!("largest decrease {defect:e}"),
    );
    report.note("frame", frame_name(frame));
    report.note("snapshots", snaps.len());
    ctx.csv(report, "simulate.csv", &["step", "x", "u", "v"], rows)?;
    ctx.csv(
        report,
        "simulate_front.csv",
        &["step", "x_phi", "x_psi"],
        fronts,
    )
}

fn wave(
    ctx: &Context<'_>,
    k1: &Kernel,
    k2: &Kernel,
    frame: Frame,
    report: &mut RunReport,
) -> Result<(), RunError> {
    let grid = ctx.grid()?;
    let (d1, d2) = (ctx.discrete(k1)?, ctx.discrete(k2)?);
    let t = Instant::now();
    let wp = find_bistable_wave(&ctx.cfg.model, &d1, &d2, grid, &ctx.cfg.wave)?;
    report.timings.push(("wave solve".into(), t.elapsed()));
    report
        .checks
        .extend(validate_profile(&wp, &ctx.cfg.tolerances));
    report.note("speed", sig12(wp.speed));
    report.note("residual", sig12(wp.residual));
    report.note("steps", wp.history.len());
    report.note("frame", frame_name(frame));

    let rows = wp
        .rows(frame)
        .iter()
        .map(|r| r.iter().map(|x| sig12(*x)).collect())
        .collect();
    ctx.csv(report, "wave.csv", &["x", "u", "v"], rows)?;
    let history = wp
        .history
        .iter()
        .map(|h| {
            vec![
                h.step.to_string(),
                sig12(h.displacement),
                h.shift_cells.to_string(),
                sig12(h.shift_fraction),
                sig12(h.profile_change),
                sig12(h.monotonicity_defect),
                h.squeezed.to_string(),
            ]
        })
        .collect();
    ctx.csv(
        report,
        "wave_history.csv",
        &[
            "step",
            "displacement",
            "shift_cells",
            "shift_fraction",
            "profile_change",
            "monotonicity_defect",
            "squeezed",
        ],
        history,
    )
}

struct SweepCell {
    params: ModelParams,
    sigma: Option<f64>,
}

fn sweep(ctx: &Context<'_>, opts: &RunOptions, report: &mut RunReport) -> Result<(), RunError> {
    let [r1s, r2s, a1s, a2s] = ctx.cfg.sweep_lattice()?;
    let sigmas: Vec<Option<f64>> = match &ctx.cfg.sweep.sigma {
        Some(v) => v.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let mut cells = Vec::new();
    for &r1 in &r1s {
        for &r2 in &r2s {
            for &a1 in &a1s {
                for &a2 in &a2s {
                    for &sigma in &sigmas {
                        cells.push(SweepCell {
                            params: ModelParams::new(r1, r2, a1, a2),
                            sigma,
                        });
                    }
                }
            }
        }
    }
    let (base1, base2) = kernels(ctx.cfg)?;
    let evaluate = |cell: &SweepCell| -> Result<(f64, f64, f64), String> {
        let (k1, k2) = match cell.sigma {
            Some(s) => {
                let g = Kernel::gaussian(s).map_err(|e| e.to_string())?;
                (g.clone(), g)
            }
            None => (base1.clone(), base2.clone()),
        };
        let hyp = hypotheses(&cell.params, &k1, &k2);
        if let Some(c) = hyp.failures().next() {
            return Err(format!("{}: {}", c.clause, c.detail));
        }
        let cp = counter_propagation(&cell.params, &k1, &k2).map_err(|e| e.to_string())?;
        Ok((cp.sum_f1(), cp.sum_f2(), cp.lambda_b0))
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    let t = Instant::now();
    let results: Vec<_> = pool.install(|| cells.par_iter().map(evaluate).collect());
    report.timings.push(("sweep".into(), t.elapsed()));

    let mut rows = Vec::with_capacity(cells.len());
    for (i, (cell, res)) in cells.iter().zip(&results).enumerate() {
        let p = &cell.params;
        let sigma = cell.sigma.map_or_else(|| "config".to_string(), sig12);
        let clause = format!("A6 cell {i}");
        let (s1, s2, lb, ok) = match res {
            Ok((s1, s2, lb)) => {
                let ok = *s1 > 0.0 && *s2 > 0.0;
                report.checks.push(
                    clause,
                    ok,
                    format!("{p:?} sigma {sigma}: sums {} {}", sig12(*s1), sig12(*s2)),
                );
                (*s1, *s2, *lb, ok)
            }
            Err(msg) => {
                report
                    .checks
                    .push(clause, false, format!("{p:?} sigma {sigma}: {msg}"));
                (f64::NAN, f64::NAN, f64::NAN, false)
            }
        };
        rows.push(vec![
            i.to_string(),
            sig12(p.r1),
            sig12(p.r2),
            sig12(p.a1),
            sig12(p.a2),
            sigma,
            sig12(s1),
            sig12(s2),
            sig12(lb),
            ok.to_string(),
        ]);
    }
    report.note("cells", cells.len());
    ctx.csv(
        report,
        "sweep.csv",
        &[
            "index",
            "r1",
            "r2",
            "a1",
            "a2",
            "sigma",
            "sum_f1",
            "sum_f2",
            "lambda_b0",
            "passed",
        ],
        rows,
    )
}
