//! Dispersal kernels, their moment generating functions and grid weights.
//!
//! Built-in families are the Gaussian and the uniform density. Tabulated
//! kernels are piecewise linear between samples on a grid symmetric about the
//! origin and vanish outside it. A table may be tagged as the truncation of a
//! density with unbounded support, in which case the finiteness of its moment
//! generating function for every real argument cannot be certified and the
//! hypothesis check reports it.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::report::CheckReport;

/// Default truncation tolerance for [`discretize`].
pub const DEFAULT_TRUNCATION: f64 = 1e-12;

/// Default grid spacing.
pub const DEFAULT_DX: f64 = 0.1;

/// Widening applied to the smallest support that meets the truncation
/// tolerance. Tail mass alone under-resolves exponentially weighted moments,
/// which the speed computations depend on.
pub const SUPPORT_GUARD: f64 = 1.25;

const MAX_HALF_WIDTH: usize = 10_000_000;

/// Largest `ln M` that still fits an `f64`.
const LN_MAX: f64 = 709.782_712_893_384;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableSupport {
    /// The samples describe the whole density.
    Compact,
    /// The samples truncate a density whose true support is unbounded.
    Unbounded,
}

/// Piecewise linear density on a symmetric sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TableKernel {
    offsets: Vec<f64>,
    density: Vec<f64>,
    support: TableSupport,
    symmetrized: bool,
}

impl TableKernel {
    /// Builds a table from `(offset, density)` samples.
    ///
    /// Offsets must be strictly increasing and mirror each other about zero.
    /// Densities are symmetrized (`d(y) <- (d(y) + d(-y)) / 2`) and rescaled to
    /// unit mass under the trapezoid rule, which is exact for the piecewise
    /// linear interpolant.
    pub fn new(offsets: Vec<f64>, density: Vec<f64>, support: TableSupport) -> Result<Self> {
        let n = offsets.len();
        if n != density.len() {
            return Err(Error::Parameter(format!(
                "table has {n} offsets but {} densities",
                density.len()
            )));
        }
        if n < 3 {
            return Err(Error::Parameter("table needs at least 3 samples".into()));
        }
        if offsets.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter(
                "table offsets must be strictly increasing".into(),
            ));
        }
        let scale = offsets[n - 1].abs().max(offsets[0].abs());
        for i in 0..n {
            let mirror = offsets[n - 1 - i];
            if (offsets[i] + mirror).abs() > 1e-9 * scale {
                return Err(Error::Parameter(format!(
                    "table offsets are not symmetric about zero: {} vs {}",
                    offsets[i], mirror
                )));
            }
        }
        if let Some(d) = density.iter().find(|d| !d.is_finite() || **d < 0.0) {
            return Err(Error::Parameter(format!(
                "table density {d} is negative or not finite"
            )));
        }

        let mut symmetrized = false;
        let mut sym = density.clone();
        for i in 0..n {
            let j = n - 1 - i;
            if density[i] != density[j] {
                symmetrized = true;
            }
            sym[i] = 0.5 * (density[i] + density[j]);
        }
        // exact mirror of the offsets as well
        let mut offsets = offsets;
        for i in 0..n / 2 {
            let h = 0.5 * (offsets[n - 1 - i] - offsets[i]);
            offsets[i] = -h;
            offsets[n - 1 - i] = h;
        }
        if n % 2 == 1 {
            offsets[n / 2] = 0.0;
        }

        let mass: f64 = (0..n - 1)
            .map(|i| 0.5 * (sym[i] + sym[i + 1]) * (offsets[i + 1] - offsets[i]))
            .sum();
        if !(mass > 0.0) {
            return Err(Error::Parameter("table density has zero mass".into()));
        }
        for d in &mut sym {
            *d /= mass;
        }
        Ok(Self {
            offsets,
            density: sym,
            support,
            symmetrized,
        })
    }

    /// Parses two-column text (`offset density`, whitespace or comma
    /// separated). Lines starting with `#` are comments, except the directive
    /// `# support: unbounded` which tags the table as a truncated heavy tail.
    pub fn parse(text: &str) -> Result<Self> {
        let mut offsets = Vec::new();
        let mut density = Vec::new();
        let mut support = TableSupport::Compact;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim().to_ascii_lowercase();
                if let Some(v) = comment.strip_prefix("support:") {
                    support = match v.trim() {
                        "unbounded" => TableSupport::Unbounded,
                        "compact" => TableSupport::Compact,
                        other => {
                            return Err(Error::Parameter(format!(
                                "line {}: unknown support tag '{other}'",
                                lineno + 1
                            )))
                        }
                    };
                }
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(Error::Parameter(format!(
                    "line {}: expected two columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parameter(format!("line {}: bad number '{s}'", lineno + 1)))
            };
            offsets.push(parse(cols[0])?);
            density.push(parse(cols[1])?);
        }
        Self::new(offsets, density, support)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn density_samples(&self) -> &[f64] {
        &self.density
    }

    pub fn support(&self) -> TableSupport {
        self.support
    }

    /// True when the input samples were asymmetric and had to be averaged.
    pub fn was_symmetrized(&self) -> bool {
        self.symmetrized
    }

    fn half_extent(&self) -> f64 {
        self.offsets[self.offsets.len() - 1]
    }

    fn density(&self, y: f64) -> f64 {
        let ys = &self.offsets;
        let n = ys.len();
        if y < ys[0] || y > ys[n - 1] {
            return 0.0;
        }
        let i = match ys.partition_point(|&o| o <= y) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        };
        let t = (y - ys[i]) / (ys[i + 1] - ys[i]);
        self.density[i] * (1.0 - t) + self.density[i + 1] * t
    }

    /// `ln ∫ l(y) e^{mu y} dy` by 5-point Gauss-Legendre on each segment,
    /// factoring out the largest exponential to stay finite.
    fn ln_mgf(&self, mu: f64) -> f64 {
        if mu == 0.0 {
            return 0.0;
        }
        let pivot = mu.abs() * self.half_extent();
        let mut acc = 0.0;
        for i in 0..self.offsets.len() - 1 {
            let (a, b) = (self.offsets[i], self.offsets[i + 1]);
            let (da, db) = (self.density[i], self.density[i + 1]);
            let panels = ((mu.abs() * (b - a)) / 0.25).ceil().max(1.0) as usize;
            acc += composite_gauss_legendre(a, b, panels, |y| {
                let t = (y - a) / (b - a);
                (da * (1.0 - t) + db * t) * (mu * y - pivot).exp()
            });
        }
        pivot + acc.ln()
    }

    /// Mass outside `[-x, x]`, exact for the linear interpolant.
    fn tail_mass(&self, x: f64) -> f64 {
        let x = x.abs();
        let mut right = 0.0;
        for i in 0..self.offsets.len() - 1 {
            let (a, b) = (self.offsets[i], self.offsets[i + 1]);
            if b <= x {
                continue;
            }
            let lo = a.max(x);
            right += 0.5 * (self.density(lo) + self.density(b)) * (b - lo);
        }
        2.0 * right
    }
}

/// A symmetric, nonnegative dispersal density with unit mass.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Gaussian { sigma: f64 },
    Uniform { half_width: f64 },
    Table(TableKernel),
}

/// Description of a kernel as read from configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Gaussian {
        sigma: f64,
    },
    Uniform {
        half_width: f64,
    },
    TableFile(PathBuf),
    Table {
        offsets: Vec<f64>,
        density: Vec<f64>,
        support: TableSupport,
    },
}

pub fn make_kernel(spec: &KernelSpec) -> Result<Kernel> {
    match spec {
        KernelSpec::Gaussian { sigma } => Kernel::gaussian(*sigma),
        KernelSpec::Uniform { half_width } => Kernel::uniform(*half_width),
        KernelSpec::TableFile(path) => Ok(Kernel::Table(TableKernel::load(path)?)),
        KernelSpec::Table {
            offsets,
            density,
            support,
        } => Ok(Kernel::Table(TableKernel::new(
            offsets.clone(),
            density.clone(),
            *support,
        )?)),
    }
}

impl Kernel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Parameter(format!(
                "Gaussian sigma must be positive, got {sigma}"
            )));
        }
        Ok(Kernel::Gaussian { sigma })
    }

    pub fn uniform(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Parameter(format!(
                "uniform half-width must be positive, got {half_width}"
            )));
        }
        Ok(Kernel::Uniform { half_width })
    }

    pub fn density(&self, y: f64) -> f64 {
        match self {
            Kernel::Gaussian { sigma } => {
                let z = y / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            Kernel::Uniform { half_width } => {
                if y.abs() <= *half_width {
                    0.5 / half_width
                } else {
                    0.0
                }
            }
            Kernel::Table(t) => t.density(y),
        }
    }

    /// Natural log of the moment generating function. Never overflows.
    pub fn ln_mgf(&self, mu: f64) -> f64 {
        match self {
            Kernel::Gaussian { sigma } => 0.5 * sigma * sigma * mu * mu,
            Kernel::Uniform { half_width } => ln_sinhc(half_width * mu.abs()),
            Kernel::Table(t) => t.ln_mgf(mu),
        }
    }

    /// `M(mu) = ∫ e^{mu y} l(y) dy`.
    pub fn mgf(&self, mu: f64) -> Result<f64> {
        if !mu.is_finite() {
            return Err(Error::MgfOverflow { mu });
        }
        let ln = self.ln_mgf(mu);
        if ln >= LN_MAX {
            return Err(Error::MgfOverflow { mu });
        }
        Ok(ln.exp())
    }

    /// Total mass under the reference quadrature.
    pub fn mass(&self) -> f64 {
        match self {
            Kernel::Gaussian { sigma } => {
                let lim = 40.0 * sigma;
                composite_gauss_legendre(-lim, lim, 800, |y| self.density(y))
            }
            Kernel::Uniform { half_width } => {
                composite_gauss_legendre(-half_width, *half_width, 4, |y| self.density(y))
            }
            Kernel::Table(t) => {
                let ys = &t.offsets;
                (0..ys.len() - 1)
                    .map(|i| 0.5 * (t.density[i] + t.density[i + 1]) * (ys[i + 1] - ys[i]))
                    .sum()
            }
        }
    }

    /// Mass outside `[-x, x]`.
    pub fn tail_mass(&self, x: f64) -> f64 {
        let x = x.abs();
        match self {
            Kernel::Gaussian { sigma } => libm::erfc(x / (sigma * std::f64::consts::SQRT_2)),
            Kernel::Uniform { half_width } => (1.0 - x / half_width).max(0.0),
            Kernel::Table(t) => t.tail_mass(x),
        }
    }

    /// Whether the MGF is finite for every real argument, decided by family.
    pub fn has_entire_mgf(&self) -> bool {
        match self {
            Kernel::Gaussian { .. } | Kernel::Uniform { .. } => true,
            Kernel::Table(t) => t.support == TableSupport::Compact,
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Gaussian { sigma } => write!(f, "gaussian(sigma={sigma})"),
            Kernel::Uniform { half_width } => write!(f, "uniform(halfwidth={half_width})"),
            Kernel::Table(t) => write!(f, "table({} samples)", t.offsets.len()),
        }
    }
}

/// `ln(sinh(x)/x)` for `x >= 0`, stable at both ends.
fn ln_sinhc(x: f64) -> f64 {
    if x < 1e-4 {
        let x2 = x * x;
        (x2 / 6.0) * (1.0 - x2 / 30.0)
    } else if x < 20.0 {
        (x.sinh() / x).ln()
    } else {
        x - std::f64::consts::LN_2 - x.ln() + (-(-2.0 * x).exp()).ln_1p()
    }
}

const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683,
    0.538_469_310_105_683,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

fn gauss_legendre(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    half * GL_NODES
        .iter()
        .zip(GL_WEIGHTS.iter())
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
}

fn composite_gauss_legendre(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| gauss_legendre(a + i as f64 * h, a + (i + 1) as f64 * h, &f))
        .sum()
}

/// Kernel weights on the integer offsets `-J..=J` of a grid with spacing `dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    weights: Vec<f64>,
    dx: f64,
    half_width: usize,
    min_half_width: usize,
    truncated_mass: f64,
    parent: Kernel,
}

impl DiscreteKernel {
    /// Weights in offset order `-J..=J`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, offset: i64) -> f64 {
        if offset.unsigned_abs() as usize > self.half_width {
            0.0
        } else {
            self.weights[(offset + self.half_width as i64) as usize]
        }
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// `J`: the largest offset carrying weight.
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Smallest `J` meeting the truncation tolerance, before the guard band.
    pub fn min_half_width(&self) -> usize {
        self.min_half_width
    }

    /// Kernel mass outside `[-(J+1/2)dx, (J+1/2)dx]` at the minimal `J`.
    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    pub fn parent(&self) -> &Kernel {
        &self.parent
    }

    /// Moment generating function of the weights, `sum_j w_j e^{mu j dx}`.
    pub fn mgf(&self, mu: f64) -> f64 {
        let j0 = self.half_width as f64;
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * (mu * (i as f64 - j0) * self.dx).exp())
            .sum()
    }
}

/// Midpoint-rule discretization: `w_j ∝ l(j dx) dx`, symmetrized, normalized.
///
/// The support `J` is the smallest integer with mass outside
/// `[-(J+1/2)dx, (J+1/2)dx]` below `eps_trunc`, widened by [`SUPPORT_GUARD`];
/// trailing zero weights of compactly supported kernels are then dropped. The
/// weights sum to exactly `1.0` when added in offset order.
pub fn discretize(kernel: &Kernel, dx: f64, eps_trunc: f64) -> Result<DiscreteKernel> {
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(Error::Parameter(format!(
            "grid spacing must be positive, got {dx}"
        )));
    }
    if !(eps_trunc > 0.0 && eps_trunc < 1.0) {
        return Err(Error::Parameter(format!(
            "truncation tolerance must lie in (0, 1), got {eps_trunc}"
        )));
    }

    let tail = |j: usize| kernel.tail_mass((j as f64 + 0.5) * dx);
    // doubling then bisection; the tail is nonincreasing in j
    let mut hi = 1usize;
    while tail(hi) >= eps_trunc {
        hi *= 2;
        if hi > MAX_HALF_WIDTH {
            return Err(Error::DegenerateKernel(format!(
                "support exceeds {MAX_HALF_WIDTH} cells at dx = {dx}"
            )));
        }
    }
    let mut lo = 0usize;
    if tail(0) < eps_trunc {
        hi = 0;
    }
    while hi > lo + 1 {
        let mid = (lo + hi) / 2;
        if tail(mid) < eps_trunc {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let min_half_width = hi;
    if min_half_width == 0 {
        return Err(Error::DegenerateKernel(format!(
            "dx = {dx} puts all kernel mass in the central cell"
        )));
    }
    let truncated_mass = tail(min_half_width);

    let mut half_width = (min_half_width as f64 * SUPPORT_GUARD).ceil() as usize;
    while half_width > 0 && kernel.density(half_width as f64 * dx) == 0.0 {
        half_width -= 1;
    }
    if half_width == 0 {
        return Err(Error::DegenerateKernel(format!(
            "dx = {dx} leaves no weight off the central cell"
        )));
    }

    let len = 2 * half_width + 1;
    let mut weights: Vec<f64> = (0..len)
        .map(|i| kernel.density((i as f64 - half_width as f64) * dx) * dx)
        .collect();
    for i in 0..half_width {
        let avg = 0.5 * (weights[i] + weights[len - 1 - i]);
        weights[i] = avg;
        weights[len - 1 - i] = avg;
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    for _ in 0..16 {
        let s: f64 = weights.iter().sum();
        if s == 1.0 {
            break;
        }
        weights[half_width] += 1.0 - s;
    }

    Ok(DiscreteKernel {
        weights,
        dx,
        half_width,
        min_half_width,
        truncated_mass,
        parent: kernel.clone(),
    })
}

/// Checks the kernel's integrability (H2) and symmetry (H3) hypotheses.
pub fn validate_hypotheses(kernel: &Kernel) -> CheckReport {
    let mut report = CheckReport::new();
    match kernel {
        Kernel::Table(t) if t.support == TableSupport::Unbounded => report.push(
            "H2",
            false,
            "table truncates an unbounded-support density; MGF finiteness for all mu is not established",
        ),
        _ => report.push("H2", true, format!("{kernel}: MGF finite for every real mu")),
    }
    let (nonneg, detail) = match kernel {
        Kernel::Table(t) => {
            let ok = t.density.iter().all(|d| *d >= 0.0);
            let note = if t.symmetrized {
                "input samples were asymmetric and have been symmetrized"
            } else {
                "symmetric nonnegative samples"
            };
            (ok, note.to_string())
        }
        _ => (true, "symmetric nonnegative density".to_string()),
    };
    report.push("H3", nonneg, detail);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_nonpositive_shapes() {
        assert!(matches!(Kernel::gaussian(0.0), Err(Error::Parameter(_))));
        assert!(matches!(Kernel::gaussian(-1.0), Err(Error::Parameter(_))));
        assert!(matches!(Kernel::uniform(0.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn closed_form_mgfs() {
        let g = Kernel::gaussian(1.0).unwrap();
        assert_eq!(g.mgf(0.0).unwrap(), 1.0);
        assert_relative_eq!(
            g.mgf(1.0).unwrap(),
            1.648_721_270_700_128,
            max_relative = 1e-14
        );
        let u = Kernel::uniform(1.0).unwrap();
        assert_eq!(u.mgf(0.0).unwrap(), 1.0);
        assert_relative_eq!(u.mgf(2.0).unwrap(), 2f64.sinh() / 2.0, max_relative = 1e-14);
        assert_relative_eq!(u.mgf(2.0).unwrap(), 1.813_430_2, epsilon = 1e-6);
    }

    #[test]
    fn uniform_density_values() {
        let u = Kernel::uniform(1.0).unwrap();
        assert_eq!(u.density(0.5), 0.5);
        assert_eq!(u.density(2.0), 0.0);
    }

    #[test]
    fn uniform_ln_mgf_branches_agree() {
        let u = Kernel::uniform(1.0).unwrap();
        for x in [5e-5f64, 1e-4, 19.999, 20.0, 20.001] {
            let direct = (x.sinh() / x).ln();
            assert_relative_eq!(u.ln_mgf(x), direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn mgf_overflow_names_mu() {
        let g = Kernel::gaussian(1.0).unwrap();
        match g.mgf(40.0) {
            Err(Error::MgfOverflow { mu }) => assert_eq!(mu, 40.0),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn unit_mass() {
        for k in [
            Kernel::gaussian(0.5).unwrap(),
            Kernel::gaussian(2.0).unwrap(),
            Kernel::uniform(0.7).unwrap(),
        ] {
            assert!((k.mass() - 1.0).abs() < 1e-10, "{k}: {}", k.mass());
        }
    }

    #[test]
    fn asymmetric_table_is_symmetrized_and_flagged() {
        let t = TableKernel::new(
            vec![-1.0, -0.5, 0.0, 0.5, 1.0],
            vec![0.0, 0.2, 1.0, 0.6, 0.0],
            TableSupport::Compact,
        )
        .unwrap();
        assert!(t.was_symmetrized());
        let d = t.density_samples();
        assert_eq!(d[1], d[3]);
        let k = Kernel::Table(t);
        assert!((k.mass() - 1.0).abs() < 1e-12);
        let report = validate_hypotheses(&k);
        assert!(report.get("H3").unwrap().detail.contains("symmetrized"));
        assert!(report.passed());
    }

    #[test]
    fn table_rejects_bad_inputs() {
        let asym_grid = TableKernel::new(
            vec![-1.0, 0.0, 2.0],
            vec![0.1, 1.0, 0.1],
            TableSupport::Compact,
        );
        assert!(asym_grid.is_err());
        let negative = TableKernel::new(
            vec![-1.0, 0.0, 1.0],
            vec![-0.1, 1.0, 0.1],
            TableSupport::Compact,
        );
        assert!(negative.is_err());
        assert!(TableKernel::parse("0 1\n1\n").is_err());
    }

    #[test]
    fn table_parse_and_support_tag() {
        let text = "# support: unbounded\n-2, 0.01\n-1 0.2\n0 1\n1 0.2\n2 0.01\n";
        let t = TableKernel::parse(text).unwrap();
        assert_eq!(t.support(), TableSupport::Unbounded);
        let k = Kernel::Table(t);
        let report = validate_hypotheses(&k);
        assert!(!report.get("H2").unwrap().passed);
        assert!(report.get("H3").unwrap().passed);
    }

    #[test]
    fn table_mgf_matches_hand_integral() {
        // triangle on [-1, 1]: M(mu) = 2 (cosh mu - 1) / mu^2
        let t = TableKernel::new(
            vec![-1.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
            TableSupport::Compact,
        )
        .unwrap();
        let k = Kernel::Table(t);
        for mu in [0.5f64, 1.0, 3.0, -2.0] {
            let exact = 2.0 * (mu.cosh() - 1.0) / (mu * mu);
            assert_relative_eq!(k.mgf(mu).unwrap(), exact, max_relative = 1e-10);
        }
        assert_relative_eq!(k.tail_mass(0.5), 0.25, max_relative = 1e-14);
    }

    #[test]
    fn hypotheses_for_builtin_families() {
        assert!(validate_hypotheses(&Kernel::gaussian(2.0).unwrap()).passed());
        assert!(validate_hypotheses(&Kernel::uniform(0.5).unwrap()).passed());
    }

    #[test]
    fn mgf_even_and_at_least_one() {
        let table = Kernel::Table(
            TableKernel::new(
                vec![-1.0, -0.5, 0.0, 0.5, 1.0],
                vec![0.1, 0.5, 1.0, 0.5, 0.1],
                TableSupport::Compact,
            )
            .unwrap(),
        );
        for k in [
            Kernel::gaussian(1.3).unwrap(),
            Kernel::uniform(0.8).unwrap(),
            table,
        ] {
            for i in -3..=3 {
                let mu = i as f64;
                let (p, m) = (k.mgf(mu).unwrap(), k.mgf(-mu).unwrap());
                assert!((p - m).abs() <= 1e-10 * p, "{k} mu={mu}");
            }
            for i in 1..=60 {
                let mu = i as f64 * 0.05;
                assert!(k.mgf(mu).unwrap() > 1.0, "{k} mu={mu}");
            }
            assert_eq!(k.mgf(0.0).unwrap(), 1.0);
        }
    }

    /// Independent Gaussian tail: Simpson integration of the density.
    fn gaussian_tail_oracle(x: f64) -> f64 {
        let n = 20_000;
        let b = x + 20.0;
        let h = (b - x) / n as f64;
        let f = |y: f64| (-0.5 * y * y).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = f(x) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(x + i as f64 * h);
        }
        2.0 * s * h / 3.0
    }

    #[test]
    fn gaussian_support_matches_tail_oracle() {
        let k = Kernel::gaussian(1.0).unwrap();
        let dk = discretize(&k, 0.1, 1e-12).unwrap();
        let oracle_j = (0..200)
            .find(|&j| gaussian_tail_oracle((j as f64 + 0.5) * 0.1) < 1e-12)
            .unwrap();
        assert_eq!(oracle_j, 71);
        assert_eq!(dk.min_half_width(), oracle_j);
        assert_eq!(dk.half_width(), 89);
        assert!(dk.truncated_mass() < 1e-12);
    }

    #[test]
    fn uniform_compact_weights() {
        let dk = discretize(&Kernel::uniform(1.0).unwrap(), 0.5, 1e-12).unwrap();
        assert_eq!(dk.half_width(), 2);
        assert_eq!(dk.weights().len(), 5);
        assert_eq!(dk.weights().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn weights_sum_to_one_and_are_symmetric() {
        for (k, dx) in [
            (Kernel::gaussian(1.0).unwrap(), 0.1),
            (Kernel::gaussian(0.37).unwrap(), 0.03),
            (Kernel::uniform(0.9).unwrap(), 0.07),
        ] {
            let dk = discretize(&k, dx, 1e-12).unwrap();
            assert_eq!(dk.weights().iter().sum::<f64>(), 1.0);
            let w = dk.weights();
            for i in 0..w.len() {
                assert_eq!(w[i], w[w.len() - 1 - i]);
                assert!(w[i] >= 0.0);
            }
        }
    }

    #[test]
    fn degenerate_spacing() {
        let res = discretize(&Kernel::uniform(0.3).unwrap(), 0.5, 1e-12);
        assert!(matches!(res, Err(Error::DegenerateKernel(_))));
        let res = discretize(&Kernel::gaussian(1e-3).unwrap(), 1.0, 1e-12);
        assert!(matches!(res, Err(Error::DegenerateKernel(_))));
    }

    #[test]
    fn discrete_gaussian_mgf_matches_closed_form() {
        let k = Kernel::gaussian(1.0).unwrap();
        let dk = discretize(&k, 0.1, 1e-12).unwrap();
        for i in -30..=30 {
            let mu = i as f64 * 0.1;
            let exact = k.mgf(mu).unwrap();
            assert!((dk.mgf(mu) / exact - 1.0).abs() < 1e-6, "mu={mu}");
        }
    }
}
