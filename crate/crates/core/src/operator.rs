//! The discretized evolution operator on a uniform 1-D grid.
//!
//! One step evaluates the pointwise growth at every source point and then
//! disperses it with the kernel weights. Outside `[-L, L]` each field is
//! continued by its edge value, which keeps spatially constant states exact
//! fixed points and lets fronts joining two different constants sit on the
//! grid without wrap-around.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::kernels::DiscreteKernel;
use crate::model::{Frame, ModelParams, Pair};

/// Excursions outside the invariant range larger than this are logged.
const RANGE_SLACK: f64 = 1e-14;

/// Uniform grid `x_i = (i - m) dx`, `i = 0..2m+1`, covering `[-L, L]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    half_length: f64,
    dx: f64,
    half_points: usize,
}

impl Grid {
    pub fn new(half_length: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) || !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::Parameter(format!(
                "grid needs positive L and dx, got L = {half_length}, dx = {dx}"
            )));
        }
        let q = half_length / dx;
        // L = 200, dx = 0.1 gives 1999.9999999999998
        let m = if (q - q.round()).abs() <= 1e-9 * q.max(1.0) {
            q.round()
        } else {
            q.floor()
        };
        if m < 1.0 {
            return Err(Error::Parameter(format!(
                "grid with L = {half_length}, dx = {dx} has fewer than 3 points"
            )));
        }
        Ok(Self {
            half_length,
            dx,
            half_points: m as usize,
        })
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    /// Number of points `N = 2m + 1`.
    pub fn len(&self) -> usize {
        2 * self.half_points + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `x = 0`.
    pub fn center(&self) -> usize {
        self.half_points
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.half_points as f64) * self.dx
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.x(i))
    }

    /// Indices at least `margin` cells from either edge.
    pub fn interior(&self, margin: usize) -> std::ops::Range<usize> {
        let n = self.len();
        if 2 * margin >= n {
            0..0
        } else {
            margin..n - margin
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    U,
    V,
}

/// Paired fields on a grid, tagged with their coordinate frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialState {
    pub grid: Grid,
    pub frame: Frame,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of operator applications since the initial data.
    pub step: usize,
}

impl SpatialState {
    /// Checks lengths and the frame's range invariant.
    pub fn new(grid: Grid, frame: Frame, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != grid.len() || v.len() != grid.len() {
            return Err(Error::Configuration(format!(
                "fields of length {}/{} on a grid of {} points",
                u.len(),
                v.len(),
                grid.len()
            )));
        }
        let in_range = |x: &f64| match frame {
            Frame::Transformed => (0.0..=1.0).contains(x),
            Frame::Original => *x >= 0.0 && x.is_finite(),
        };
        if let Some(bad) = u.iter().chain(v.iter()).find(|x| !in_range(x)) {
            return Err(Error::Domain(format!(
                "sample {bad} violates the {frame}-frame range"
            )));
        }
        Ok(Self {
            grid,
            frame,
            u,
            v,
            step: 0,
        })
    }

    pub fn constant(grid: Grid, frame: Frame, value: Pair) -> Result<Self> {
        Self::new(
            grid,
            frame,
            vec![value[0]; grid.len()],
            vec![value[1]; grid.len()],
        )
    }

    pub fn from_fn(grid: Grid, frame: Frame, f: impl Fn(f64) -> Pair) -> Result<Self> {
        let (u, v) = grid
            .points()
            .map(|x| {
                let p = f(x);
                (p[0], p[1])
            })
            .unzip();
        Self::new(grid, frame, u, v)
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn component(&self, c: Component) -> &[f64] {
        match c {
            Component::U => &self.u,
            Component::V => &self.v,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// The same state in the other frame (`u -> 1 - u`).
    pub fn change_coordinates(&self) -> Self {
        let frame = match self.frame {
            Frame::Original => Frame::Transformed,
            Frame::Transformed => Frame::Original,
        };
        Self {
            grid: self.grid,
            frame,
            u: self.u.iter().map(|x| 1.0 - x).collect(),
            v: self.v.clone(),
            step: self.step,
        }
    }

    /// Largest pointwise difference over both components on `range`.
    pub fn sup_distance(&self, other: &Self, range: std::ops::Range<usize>) -> f64 {
        range
            .map(|i| {
                (self.u[i] - other.u[i])
                    .abs()
                    .max((self.v[i] - other.v[i]).abs())
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionMethod {
    /// Zero-padded FFT, `O(N log N)`.
    #[default]
    Fft,
    /// Reference `O(N J)` summation.
    Direct,
}

/// Convolution of a grid field with fixed kernel weights under constant
/// continuation at both edges.
#[derive(Clone)]
pub struct Convolver {
    weights: Vec<f64>,
    half_width: usize,
    len: usize,
    method: ConvolutionMethod,
    fft: Option<FftPlan>,
}

#[derive(Clone)]
struct FftPlan {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Kernel spectrum, pre-scaled by `1/size`.
    spectrum: Vec<Complex<f64>>,
}

impl fmt::Debug for Convolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Convolver")
            .field("half_width", &self.half_width)
            .field("len", &self.len)
            .field("method", &self.method)
            .field("fft_size", &self.fft.as_ref().map(|p| p.size))
            .finish()
    }
}

/// Smallest `2^a 3^b 5^c` not below `n`.
fn smooth_size(n: usize) -> usize {
    let mut best = usize::MAX;
    let mut p2 = 1usize;
    while p2 < 2 * n {
        let mut p3 = p2;
        while p3 < 2 * n {
            let mut p5 = p3;
            while p5 < 2 * n {
                if p5 >= n && p5 < best {
                    best = p5;
                }
                p5 *= 5;
            }
            p3 *= 3;
        }
        p2 *= 2;
    }
    best
}

impl Convolver {
    pub fn new(kernel: &DiscreteKernel, len: usize, method: ConvolutionMethod) -> Self {
        let half_width = kernel.half_width();
        let weights = kernel.weights().to_vec();
        let fft = match method {
            ConvolutionMethod::Direct => None,
            ConvolutionMethod::Fft => {
                let size = smooth_size(len + 2 * half_width);
                let mut planner = FftPlanner::new();
                let forward = planner.plan_fft_forward(size);
                let inverse = planner.plan_fft_inverse(size);
                let mut spectrum = vec![Complex::new(0.0, 0.0); size];
                let scale = 1.0 / size as f64;
                for (i, w) in weights.iter().enumerate() {
                    spectrum[i] = Complex::new(w * scale, 0.0);
                }
                forward.process(&mut spectrum);
                Some(FftPlan {
                    size,
                    forward,
                    inverse,
                    spectrum,
                })
            }
        };
        Self {
            weights,
            half_width,
            len,
            method,
            fft,
        }
    }

    pub fn method(&self) -> ConvolutionMethod {
        self.method
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// `out_i = sum_j w_j f(x_i - j dx)` with `f` continued by its edge values.
    pub fn convolve(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(
            f.len(),
            self.len,
            "field length does not match the convolver"
        );
        let first = f[0];
        if f.iter().all(|&x| x == first) {
            return vec![first; f.len()];
        }
        match &self.fft {
            Some(plan) => self.convolve_fft(plan, f),
            None => self.convolve_direct(f),
        }
    }

    /// Reference summation, available whatever the configured method.
    pub fn convolve_direct(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        let jw = self.half_width as i64;
        let last = n as i64 - 1;
        (0..n as i64)
            .map(|i| {
                let mut acc = 0.0;
                for (k, w) in self.weights.iter().enumerate() {
                    let j = k as i64 - jw;
                    let src = (i - j).clamp(0, last) as usize;
                    acc += w * f[src];
                }
                acc
            })
            .collect()
    }

    fn convolve_fft(&self, plan: &FftPlan, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        let jw = self.half_width;
        let mut buf = vec![Complex::new(0.0, 0.0); plan.size];
        // extended field e[k] = f[clamp(k - J)], k in 0..n+2J
        for (k, slot) in buf.iter_mut().take(n + 2 * jw).enumerate() {
            let src = k.saturating_sub(jw).min(n - 1);
            slot.re = f[src];
        }
        plan.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(plan.spectrum.iter()) {
            *b *= s;
        }
        plan.inverse.process(&mut buf);
        // circular wrap only touches indices below 2J
        buf[2 * jw..2 * jw + n].iter().map(|c| c.re).collect()
    }
}

/// The evolution operator for fixed parameters, kernels and grid.
#[derive(Debug, Clone)]
pub struct Operator {
    params: ModelParams,
    grid: Grid,
    first: Convolver,
    second: Convolver,
}

fn check_spacing(grid: &Grid, kernel: &DiscreteKernel, which: &str) -> Result<()> {
    if (kernel.dx() - grid.dx()).abs() > 1e-12 * grid.dx() {
        return Err(Error::Configuration(format!(
            "{which} kernel discretized at dx = {} but grid has dx = {}",
            kernel.dx(),
            grid.dx()
        )));
    }
    Ok(())
}

impl Operator {
    pub fn new(
        params: ModelParams,
        k1: &DiscreteKernel,
        k2: &DiscreteKernel,
        grid: Grid,
        method: ConvolutionMethod,
    ) -> Result<Self> {
        check_spacing(&grid, k1, "first")?;
        check_spacing(&grid, k2, "second")?;
        Ok(Self {
            params,
            grid,
            first: Convolver::new(k1, grid.len(), method),
            second: Convolver::new(k2, grid.len(), method),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Largest kernel half-width in cells.
    pub fn reach(&self) -> usize {
        self.first.half_width().max(self.second.half_width())
    }

    /// One step of the recursion in the state's frame.
    pub fn apply(&self, s: &SpatialState) -> Result<SpatialState> {
        if s.grid != self.grid {
            return Err(Error::Configuration(
                "state and operator grids differ".into(),
            ));
        }
        let p = &self.params;
        let n = s.len();
        let mut g1 = Vec::with_capacity(n);
        let mut g2 = Vec::with_capacity(n);
        for (&u, &v) in s.u.iter().zip(s.v.iter()) {
            let g = match s.frame {
                Frame::Original => p.original_growth(u, v),
                Frame::Transformed => p.transformed_growth(u, v),
            };
            g1.push(g[0]);
            g2.push(g[1]);
        }
        let c1 = self.first.convolve(&g1);
        let c2 = self.second.convolve(&g2);
        let (u, v) = match s.frame {
            Frame::Transformed => (
                c1.iter().map(|c| clamp_unit(1.0 - c)).collect(),
                c2.into_iter().map(clamp_unit).collect(),
            ),
            Frame::Original => (
                c1.into_iter().map(clamp_nonneg).collect(),
                c2.into_iter().map(clamp_nonneg).collect(),
            ),
        };
        Ok(SpatialState {
            grid: s.grid,
            frame: s.frame,
            u,
            v,
            step: s.step + 1,
        })
    }

    /// Applies the operator `n_steps` times, keeping the initial state, every
    /// `thin`-th step and the final state.
    pub fn iterate(
        &self,
        s: &SpatialState,
        n_steps: usize,
        thin: usize,
    ) -> Result<Vec<SpatialState>> {
        let thin = thin.max(1);
        let mut out = vec![s.clone()];
        let mut cur = s.clone();
        for k in 1..=n_steps {
            cur = self.apply(&cur)?;
            if k % thin == 0 || k == n_steps {
                out.push(cur.clone());
            }
        }
        Ok(out)
    }
}

fn clamp_unit(x: f64) -> f64 {
    if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&x) {
        log::warn!("operator output {x:e} left [0,1] beyond rounding slack; clamped");
    }
    x.clamp(0.0, 1.0)
}

fn clamp_nonneg(x: f64) -> f64 {
    if x < -RANGE_SLACK {
        log::warn!("operator output {x:e} negative beyond rounding slack; clamped");
    }
    x.max(0.0)
}

/// One step with a transient [`Operator`] using the FFT path.
pub fn apply_q(
    s: &SpatialState,
    p: &ModelParams,
    k1: &DiscreteKernel,
    k2: &DiscreteKernel,
) -> Result<SpatialState> {
    Operator::new(*p, k1, k2, s.grid, ConvolutionMethod::Fft)?.apply(s)
}

pub fn iterate(
    s: &SpatialState,
    p: &ModelParams,
    k1: &DiscreteKernel,
    k2: &DiscreteKernel,
    n_steps: usize,
    thin: usize,
) -> Result<Vec<SpatialState>> {
    Operator::new(*p, k1, k2, s.grid, ConvolutionMethod::Fft)?.iterate(s, n_steps, thin)
}

/// Shifts both fields by `cells` grid cells, `out(x) = s(x - cells dx)`.
/// Vacated cells take the nearest edge value.
pub fn translate(s: &SpatialState, cells: i64) -> Result<SpatialState> {
    let n = s.len();
    if cells.unsigned_abs() as usize >= n {
        return Err(Error::Range {
            shift: cells,
            len: n,
        });
    }
    let shift = |f: &[f64]| -> Vec<f64> {
        (0..n as i64)
            .map(|i| f[(i - cells).clamp(0, n as i64 - 1) as usize])
            .collect()
    };
    Ok(SpatialState {
        grid: s.grid,
        frame: s.frame,
        u: shift(&s.u),
        v: shift(&s.v),
        step: s.step,
    })
}

/// Componentwise order between two states or points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Equal,
    /// First argument `<=` second everywhere, not equal.
    Less,
    /// First argument `>=` second everywhere, not equal.
    Greater,
    Unordered,
}

fn order_of(pairs: impl Iterator<Item = (f64, f64)>) -> Order {
    let (mut below, mut above) = (false, false);
    for (a, b) in pairs {
        if a < b {
            below = true;
        } else if a > b {
            above = true;
        }
        if below && above {
            return Order::Unordered;
        }
    }
    match (below, above) {
        (false, false) => Order::Equal,
        (true, false) => Order::Less,
        (false, true) => Order::Greater,
        (true, true) => Order::Unordered,
    }
}

/// Exact componentwise, pointwise comparison.
pub fn compare(a: &SpatialState, b: &SpatialState) -> Result<Order> {
    if a.grid != b.grid || a.frame != b.frame {
        return Err(Error::Configuration(
            "cannot compare states on different grids or frames".into(),
        ));
    }
    Ok(order_of(
        a.u.iter()
            .zip(b.u.iter())
            .chain(a.v.iter().zip(b.v.iter()))
            .map(|(x, y)| (*x, *y)),
    ))
}

pub fn compare_points(a: Pair, b: Pair) -> Order {
    order_of(a.into_iter().zip(b))
}
