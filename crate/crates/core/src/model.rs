//! Space-free Ricker competition maps in both coordinate frames.
//!
//! The original frame is the competition map
//! `(u, v) -> (u e^{r1(1-u-a1 v)}, v e^{r2(1-v-a2 u)})`. Flipping the first
//! species (`u -> 1-u`) turns it into a cooperative, order-preserving map on
//! `[0,1]^2` whose two exclusion states become the ordered pair `(0,0)` and
//! `(1,1)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::report::CheckReport;

/// A point of the phase plane, `[u, v]`.
pub type Pair = [f64; 2];

/// Row-major 2x2 matrix.
pub type Matrix2 = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    /// Population densities `(U, V)` as in the competition model.
    Original,
    /// `(1 - U, V)`: the order-preserving frame.
    Transformed,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::Original => "original",
            Frame::Transformed => "transformed",
        })
    }
}

/// Growth rates and competition coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub r1: f64,
    pub r2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl ModelParams {
    pub fn new(r1: f64, r2: f64, a1: f64, a2: f64) -> Self {
        Self { r1, r2, a1, a2 }
    }

    /// Pre-dispersal terms of the original-frame recursion.
    #[inline]
    pub fn original_growth(&self, u: f64, v: f64) -> Pair {
        [
            u * (self.r1 * (1.0 - u - self.a1 * v)).exp(),
            v * (self.r2 * (1.0 - v - self.a2 * u)).exp(),
        ]
    }

    /// Pre-dispersal terms of the transformed-frame recursion: the first
    /// entry is the dispersed deficit `(1-u) e^{r1(u - a1 v)}`, so the new
    /// first component is one minus its convolution.
    #[inline]
    pub fn transformed_growth(&self, u: f64, v: f64) -> Pair {
        [
            (1.0 - u) * (self.r1 * (u - self.a1 * v)).exp(),
            v * (self.r2 * (1.0 - self.a2 - v + self.a2 * u)).exp(),
        ]
    }

    /// Map of `frame` without domain checks.
    pub fn map(&self, frame: Frame, p: Pair) -> Pair {
        match frame {
            Frame::Original => self.original_growth(p[0], p[1]),
            Frame::Transformed => {
                let g = self.transformed_growth(p[0], p[1]);
                [1.0 - g[0], g[1]]
            }
        }
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::new(0.5, 0.5, 2.0, 3.0)
    }
}

/// Checks `r1, r2 ∈ (0,1)` and `a1, a2 ∈ (1,∞)` clause by clause.
pub fn validate_params(p: &ModelParams) -> CheckReport {
    let mut report = CheckReport::new();
    for (name, value) in [("r1", p.r1), ("r2", p.r2)] {
        let ok = value > 0.0 && value < 1.0;
        report.push(
            format!("H1 {name} in (0,1)"),
            ok,
            format!("{name} = {value}"),
        );
    }
    for (name, value) in [("a1", p.a1), ("a2", p.a2)] {
        let ok = value > 1.0 && value.is_finite();
        report.push(
            format!("H1 {name} in (1,inf)"),
            ok,
            format!("{name} = {value}"),
        );
    }
    report
}

pub(crate) fn require_admissible(p: &ModelParams) -> Result<()> {
    let report = validate_params(p);
    let failure = report.failures().next().cloned();
    match failure {
        None => Ok(()),
        Some(c) => Err(Error::Parameter(format!(
            "{} violated: {}",
            c.clause, c.detail
        ))),
    }
}

/// The original-frame competition map.
pub fn ricker_map(p: &ModelParams, point: Pair) -> Pair {
    p.map(Frame::Original, point)
}

/// The transformed-frame map on `[0,1]^2`.
pub fn transformed_map(p: &ModelParams, point: Pair) -> Result<Pair> {
    if !point.iter().all(|x| (0.0..=1.0).contains(x)) {
        return Err(Error::Domain(format!(
            "({}, {}) lies outside [0,1]^2",
            point[0], point[1]
        )));
    }
    let [u, v] = p.map(Frame::Transformed, point);
    Ok([u.clamp(0.0, 1.0), v.clamp(0.0, 1.0)])
}

/// `(u, v) -> (1 - u, v)`. Its own inverse, so the direction is immaterial.
pub fn change_coordinates(point: Pair) -> Pair {
    [1.0 - point[0], point[1]]
}

/// The four equilibria in both frames and the coexistence coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSet {
    pub k1: f64,
    pub k2: f64,
    /// `E0, E1, E2, E3`.
    pub original: [Pair; 4],
    /// `F0, F1, F2, F3`.
    pub transformed: [Pair; 4],
    /// Sup-norm fixed-point residuals, same order as above.
    pub original_residuals: [f64; 4],
    pub transformed_residuals: [f64; 4],
}

impl EquilibriumSet {
    pub fn max_residual(&self) -> f64 {
        self.original_residuals
            .iter()
            .chain(self.transformed_residuals.iter())
            .fold(0.0, |m, r| m.max(*r))
    }
}

/// Coexistence coordinates `k_i = (1 - a_i) / (1 - a1 a2)`.
///
/// Evaluated through `a_i - 1` so that nearly neutral competition
/// (`a_i → 1`) does not cancel catastrophically.
pub fn coexistence(p: &ModelParams) -> Result<(f64, f64)> {
    let d1 = p.a1 - 1.0;
    let d2 = p.a2 - 1.0;
    let denom = d1 + d2 + d1 * d2;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::Singular(format!(
            "a1 a2 = 1 (a1 = {}, a2 = {})",
            p.a1, p.a2
        )));
    }
    Ok((d1 / denom, d2 / denom))
}

fn residual(p: &ModelParams, frame: Frame, x: Pair) -> f64 {
    let y = p.map(frame, x);
    (y[0] - x[0]).abs().max((y[1] - x[1]).abs())
}

pub fn equilibria(p: &ModelParams) -> Result<EquilibriumSet> {
    let (k1, k2) = coexistence(p)?;
    let original = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [k1, k2]];
    // E1 -> F0, E0 -> F1, E3 -> F2, E2 -> F3
    let transformed = [1, 0, 3, 2].map(|i| change_coordinates(original[i]));
    Ok(EquilibriumSet {
        k1,
        k2,
        original_residuals: original.map(|e| residual(p, Frame::Original, e)),
        transformed_residuals: transformed.map(|e| residual(p, Frame::Transformed, e)),
        original,
        transformed,
    })
}

/// Analytic Jacobian of the frame's map.
pub fn jacobian(p: &ModelParams, point: Pair, frame: Frame) -> Matrix2 {
    let [u, v] = point;
    match frame {
        Frame::Original => {
            let e1 = (p.r1 * (1.0 - u - p.a1 * v)).exp();
            let e2 = (p.r2 * (1.0 - v - p.a2 * u)).exp();
            [
                [e1 * (1.0 - p.r1 * u), -u * p.r1 * p.a1 * e1],
                [-v * p.r2 * p.a2 * e2, e2 * (1.0 - p.r2 * v)],
            ]
        }
        Frame::Transformed => {
            let g1 = (p.r1 * (u - p.a1 * v)).exp();
            let g2 = (p.r2 * (1.0 - p.a2 - v + p.a2 * u)).exp();
            [
                [g1 * (1.0 - p.r1 * (1.0 - u)), (1.0 - u) * p.r1 * p.a1 * g1],
                [v * p.r2 * p.a2 * g2, g2 * (1.0 - p.r2 * v)],
            ]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eigenvalues {
    Real(f64, f64),
    /// Conjugate pair `re ± i im`.
    Complex {
        re: f64,
        im: f64,
    },
}

impl Eigenvalues {
    pub fn spectral_radius(&self) -> f64 {
        match *self {
            Eigenvalues::Real(a, b) => a.abs().max(b.abs()),
            Eigenvalues::Complex { re, im } => re.hypot(im),
        }
    }
}

/// Roots of `λ² - tr λ + det`, larger real root first.
pub fn eigenvalues(m: &Matrix2) -> Eigenvalues {
    let tr = m[0][0] + m[1][1];
    // (a-d)² + 4bc avoids the cancellation in tr² - 4 det
    let diff = m[0][0] - m[1][1];
    let disc = diff * diff + 4.0 * m[0][1] * m[1][0];
    if disc >= 0.0 {
        let s = disc.sqrt();
        // stable quadratic formula
        let big = 0.5 * (tr + tr.signum() * s);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let small = if big != 0.0 {
            det / big
        } else {
            0.5 * (tr - s)
        };
        let (hi, lo) = if big >= small {
            (big, small)
        } else {
            (small, big)
        };
        Eigenvalues::Real(hi, lo)
    } else {
        Eigenvalues::Complex {
            re: 0.5 * tr,
            im: 0.5 * (-disc).sqrt(),
        }
    }
}

/// Half-width of the band around spectral radius 1 reported as marginal.
pub const MARGINAL_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityKind {
    Stable,
    Unstable,
    Marginal,
}

impl fmt::Display for StabilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StabilityKind::Stable => "stable",
            StabilityKind::Unstable => "unstable",
            StabilityKind::Marginal => "marginal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    pub kind: StabilityKind,
    pub spectral_radius: f64,
    pub eigenvalues: Eigenvalues,
}

/// Linear stability of a fixed point of the frame's map.
pub fn classify_stability(p: &ModelParams, point: Pair, frame: Frame) -> Result<Stability> {
    let res = residual(p, frame, point);
    if !(res <= 1e-10) {
        return Err(Error::Domain(format!(
            "({}, {}) is not a fixed point of the {frame} map (residual {res:e})",
            point[0], point[1]
        )));
    }
    let eigenvalues = eigenvalues(&jacobian(p, point, frame));
    let rho = eigenvalues.spectral_radius();
    let kind = if rho < 1.0 - MARGINAL_BAND {
        StabilityKind::Stable
    } else if rho > 1.0 + MARGINAL_BAND {
        StabilityKind::Unstable
    } else {
        StabilityKind::Marginal
    };
    Ok(Stability {
        kind,
        spectral_radius: rho,
        eigenvalues,
    })
}

/// One row of the dyadic `eta` sweep behind a [`StabilityCertificate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateRow {
    pub eta: f64,
    /// Image of `eta E4`; must lie strictly below `eta E4`.
    pub lower_image: Pair,
    /// Image of `(1,1) - eta E5`; must lie strictly above it.
    pub upper_image: Pair,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

/// Evidence that `(0,0)` is strongly stable from above and `(1,1)` from
/// below for the transformed map.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate {
    pub e4: Pair,
    pub e5: Pair,
    pub delta: f64,
    pub rows: Vec<CertificateRow>,
    /// `F1` and `F2` are not comparable.
    pub intermediates_unordered: bool,
}

fn normalize(v: Pair) -> Pair {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

fn certificate_row(p: &ModelParams, e4: Pair, e5: Pair, eta: f64) -> CertificateRow {
    let low = [eta * e4[0], eta * e4[1]];
    let high = [1.0 - eta * e5[0], 1.0 - eta * e5[1]];
    let lower_image = p.map(Frame::Transformed, low);
    let upper_image = p.map(Frame::Transformed, high);
    CertificateRow {
        eta,
        lower_image,
        upper_image,
        lower_ok: lower_image[0] < low[0] && lower_image[1] < low[1],
        upper_ok: upper_image[0] > high[0] && upper_image[1] > high[1],
    }
}

/// Builds the bistability certificate with `E4 ∝ (1, 1/(2 a1))` and
/// `E5 ∝ (1/(2 a2), 1)`, taking the largest `delta = 2^-k`, `k = 1..=20`,
/// for which the strict inequalities hold at `delta`, `delta/2`, `delta/4`.
pub fn strong_stability_vectors(p: &ModelParams) -> Result<StabilityCertificate> {
    require_admissible(p)?;
    let e4 = normalize([1.0, 0.5 / p.a1]);
    let e5 = normalize([0.5 / p.a2, 1.0]);
    let eq = equilibria(p)?;
    let f1 = eq.transformed[1];
    let f2 = eq.transformed[2];
    let intermediates_unordered =
        crate::operator::compare_points(f1, f2) == crate::operator::Order::Unordered;

    for k in 1..=20 {
        let delta = 0.5f64.powi(k);
        let rows: Vec<CertificateRow> = [delta, delta / 2.0, delta / 4.0]
            .iter()
            .map(|&eta| certificate_row(p, e4, e5, eta))
            .collect();
        if rows.iter().all(|r| r.lower_ok && r.upper_ok) {
            return Ok(StabilityCertificate {
                e4,
                e5,
                delta,
                rows,
                intermediates_unordered,
            });
        }
    }
    Err(Error::Certificate(format!(
        "strict inequalities fail for every delta = 2^-k, k <= 20, at {p:?}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p0() -> ModelParams {
        ModelParams::new(0.5, 0.5, 2.0, 3.0)
    }

    #[test]
    fn h1_box() {
        assert!(validate_params(&p0()).passed());
        let bad_r = validate_params(&ModelParams::new(1.5, 0.5, 2.0, 3.0));
        let failed: Vec<_> = bad_r.failures().map(|c| c.clause.clone()).collect();
        assert_eq!(failed, vec!["H1 r1 in (0,1)"]);
        let bad_a = validate_params(&ModelParams::new(0.5, 0.5, 0.5, 3.0));
        let failed: Vec<_> = bad_a.failures().map(|c| c.clause.clone()).collect();
        assert_eq!(failed, vec!["H1 a1 in (1,inf)"]);
        // r = 1 is outside the strict box
        assert!(!validate_params(&ModelParams::new(1.0, 0.5, 2.0, 3.0)).passed());
    }

    #[test]
    fn ricker_fixed_points() {
        let p = p0();
        let e3 = ricker_map(&p, [0.2, 0.4]);
        assert_abs_diff_eq!(e3[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(e3[1], 0.4, epsilon = 1e-15);
        assert_eq!(ricker_map(&p, [0.0, 0.0]), [0.0, 0.0]);
        assert_eq!(ricker_map(&p, [1.0, 0.0]), [1.0, 0.0]);
    }

    #[test]
    fn transformed_map_values() {
        let p = p0();
        let y = transformed_map(&p, [0.5, 0.5]).unwrap();
        // independent evaluation: 1 - 0.5 e^{-0.25}, 0.5 e^{-0.5}
        assert_abs_diff_eq!(y[0], 0.610_599_608_464_297_5, epsilon = 1e-12);
        assert_abs_diff_eq!(y[1], 0.303_265_329_856_316_7, epsilon = 1e-12);
        assert_eq!(transformed_map(&p, [0.0, 0.0]).unwrap(), [0.0, 0.0]);
        assert_eq!(transformed_map(&p, [1.0, 1.0]).unwrap(), [1.0, 1.0]);
        let f2 = transformed_map(&p, [0.8, 0.4]).unwrap();
        assert_abs_diff_eq!(f2[0], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(f2[1], 0.4, epsilon = 1e-15);
        assert!(matches!(
            transformed_map(&p, [1.2, 0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn coordinate_change() {
        assert_eq!(change_coordinates([1.0, 0.0]), [0.0, 0.0]);
        assert_eq!(change_coordinates([0.0, 1.0]), [1.0, 1.0]);
        assert_eq!(change_coordinates([0.2, 0.4]), [0.8, 0.4]);
    }

    proptest! {
        #[test]
        fn coordinate_change_is_involution(u in 0.0f64..1.0, v in 0.0f64..1.0) {
            // 1 - (1 - u) is exact for u in [0.5, 1] but not below; compare to
            // rounding of the two subtractions
            let back = change_coordinates(change_coordinates([u, v]));
            prop_assert!((back[0] - u).abs() <= f64::EPSILON);
            prop_assert_eq!(back[1], v);
        }
    }

    #[test]
    fn coexistence_values() {
        let eq = equilibria(&p0()).unwrap();
        assert_abs_diff_eq!(eq.k1, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(eq.k2, 0.4, epsilon = 1e-15);
        let sym = equilibria(&ModelParams::new(0.5, 0.5, 2.0, 2.0)).unwrap();
        assert_abs_diff_eq!(sym.k1, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sym.k2, 1.0 / 3.0, epsilon = 1e-15);
        assert!(eq.max_residual() < 1e-12);
    }

    #[test]
    fn near_neutral_competition_is_well_conditioned() {
        let a = 1.0 + 1e-9;
        let eq = equilibria(&ModelParams::new(0.5, 0.5, a, a)).unwrap();
        // d = a - 1 is exact; k = d / (2d + d²) = 1 / (2 + d)
        let d = a - 1.0;
        let oracle = 1.0 / (2.0 + d);
        assert!((eq.k1 - oracle).abs() < 1e-15, "{} vs {}", eq.k1, oracle);
        assert_eq!(eq.k1, eq.k2);
        // the textbook form loses about seven digits here
        let naive = (1.0 - a) / (1.0 - a * a);
        assert!((naive - oracle).abs() > 1e-12);
    }

    #[test]
    fn singular_competition() {
        let p = ModelParams::new(0.5, 0.5, 0.5, 2.0);
        assert!(matches!(equilibria(&p), Err(Error::Singular(_))));
    }

    fn fd_jacobian(p: &ModelParams, x: Pair, frame: Frame) -> Matrix2 {
        let h = 1e-6;
        let mut j = [[0.0; 2]; 2];
        for col in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[col] += h;
            xm[col] -= h;
            let (fp, fm) = (p.map(frame, xp), p.map(frame, xm));
            for row in 0..2 {
                j[row][col] = (fp[row] - fm[row]) / (2.0 * h);
            }
        }
        j
    }

    #[test]
    fn jacobian_examples() {
        let p = p0();
        let fd0 = fd_jacobian(&p, [0.0, 0.0], Frame::Transformed);
        let expected0 = [[0.5, 1.0], [0.0, (-1.0f64).exp()]];
        let fd3 = fd_jacobian(&p, [1.0, 1.0], Frame::Transformed);
        let expected3 = [[(-0.5f64).exp(), 0.0], [1.5, 0.5]];
        let j0 = jacobian(&p, [0.0, 0.0], Frame::Transformed);
        let j3 = jacobian(&p, [1.0, 1.0], Frame::Transformed);
        for r in 0..2 {
            for c in 0..2 {
                assert_abs_diff_eq!(fd0[r][c], expected0[r][c], epsilon = 1e-6);
                assert_abs_diff_eq!(fd3[r][c], expected3[r][c], epsilon = 1e-6);
                assert_abs_diff_eq!(j0[r][c], expected0[r][c], epsilon = 1e-15);
                assert_abs_diff_eq!(j3[r][c], expected3[r][c], epsilon = 1e-15);
            }
        }
        let je0 = jacobian(&p, [0.0, 0.0], Frame::Original);
        assert_eq!(je0, [[0.5f64.exp(), 0.0], [0.0, 0.5f64.exp()]]);
    }

    #[test]
    fn jacobian_matches_finite_differences_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p = ModelParams::new(
                rng.gen_range(0.05..0.95),
                rng.gen_range(0.05..0.95),
                rng.gen_range(1.05..4.0),
                rng.gen_range(1.05..4.0),
            );
            let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            for frame in [Frame::Original, Frame::Transformed] {
                let a = jacobian(&p, x, frame);
                let f = fd_jacobian(&p, x, frame);
                for r in 0..2 {
                    for c in 0..2 {
                        assert!((a[r][c] - f[r][c]).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn stability_table() {
        let p = p0();
        let eq = equilibria(&p).unwrap();
        let kinds: Vec<_> = eq
            .transformed
            .iter()
            .map(|f| classify_stability(&p, *f, Frame::Transformed).unwrap().kind)
            .collect();
        use StabilityKind::*;
        assert_eq!(kinds, vec![Stable, Unstable, Unstable, Stable]);
        let kinds: Vec<_> = eq
            .original
            .iter()
            .map(|e| classify_stability(&p, *e, Frame::Original).unwrap().kind)
            .collect();
        assert_eq!(kinds, vec![Unstable, Stable, Stable, Unstable]);

        let e0 = classify_stability(&p, [0.0, 0.0], Frame::Original).unwrap();
        assert_abs_diff_eq!(e0.spectral_radius, 0.5f64.exp(), epsilon = 1e-15);
        // E3 is a saddle: one root above 1, one inside the unit disc
        match classify_stability(&p, [0.2, 0.4], Frame::Original)
            .unwrap()
            .eigenvalues
        {
            Eigenvalues::Real(hi, lo) => {
                assert!(hi > 1.0 && lo.abs() < 1.0, "{hi} {lo}");
            }
            other => panic!("saddle expected, got {other:?}"),
        }
    }

    #[test]
    fn stability_rejects_non_fixed_points() {
        assert!(matches!(
            classify_stability(&p0(), [0.5, 0.5], Frame::Transformed),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn eigenvalues_closed_form() {
        match eigenvalues(&[[0.9, 0.2], [0.6, 0.8]]) {
            Eigenvalues::Real(hi, lo) => {
                assert_abs_diff_eq!(hi, 1.2, epsilon = 1e-15);
                assert_abs_diff_eq!(lo, 0.5, epsilon = 1e-15);
            }
            other => panic!("{other:?}"),
        }
        let rot = eigenvalues(&[[0.0, -1.0], [1.0, 0.0]]);
        assert_abs_diff_eq!(rot.spectral_radius(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn stability_agrees_with_forward_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..20 {
            let p = ModelParams::new(
                rng.gen_range(0.2..0.95),
                rng.gen_range(0.2..0.95),
                rng.gen_range(1.2..4.0),
                rng.gen_range(1.2..4.0),
            );
            let eq = equilibria(&p).unwrap();
            for (frame, points) in [
                (Frame::Original, eq.original),
                (Frame::Transformed, eq.transformed),
            ] {
                for x in points {
                    let st = classify_stability(&p, x, frame).unwrap();
                    // perturb into the invariant box
                    let dir = [
                        if x[0] >= 0.5 { -1.0 } else { 1.0 },
                        if x[1] >= 0.5 { -1.0 } else { 1.0 },
                    ];
                    let eps = 1e-3;
                    let mut y = [
                        x[0] + eps * dir[0] * rng.gen_range(0.3..1.0),
                        x[1] + eps * dir[1] * rng.gen_range(0.3..1.0),
                    ];
                    let d0 = (y[0] - x[0]).abs().max((y[1] - x[1]).abs());
                    for _ in 0..200 {
                        y = p.map(frame, y);
                    }
                    let d = (y[0] - x[0]).abs().max((y[1] - x[1]).abs());
                    match st.kind {
                        StabilityKind::Stable => assert!(d < 0.5 * d0, "{p:?} {x:?} {frame}"),
                        StabilityKind::Unstable => assert!(d > 2.0 * d0, "{p:?} {x:?} {frame}"),
                        StabilityKind::Marginal => panic!("marginal at {p:?} {x:?}"),
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn transformed_map_is_monotone(
            u in 0.0f64..=1.0, v in 0.0f64..=1.0,
            du in 0.0f64..=1.0, dv in 0.0f64..=1.0,
            r1 in 0.01f64..0.99, r2 in 0.01f64..0.99,
            a1 in 1.01f64..6.0, a2 in 1.01f64..6.0,
        ) {
            let p = ModelParams::new(r1, r2, a1, a2);
            let lo = [u, v];
            let hi = [u + du * (1.0 - u), v + dv * (1.0 - v)];
            let (flo, fhi) = (transformed_map(&p, lo).unwrap(), transformed_map(&p, hi).unwrap());
            prop_assert!(flo[0] <= fhi[0] + 1e-15 && flo[1] <= fhi[1] + 1e-15);
            prop_assert!(fhi.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn certificate_for_reference_parameters() {
        let cert = strong_stability_vectors(&p0()).unwrap();
        assert_abs_diff_eq!(cert.e4[1] / cert.e4[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(cert.e5[0] / cert.e5[1], 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cert.e4[0].hypot(cert.e4[1]), 1.0, epsilon = 1e-15);
        assert!(cert.delta > 0.0);
        assert_eq!(cert.rows.len(), 3);
        assert!(cert.intermediates_unordered);
    }

    #[test]
    fn linearized_certificate_direction() {
        // J(F0) (1, eps) < (1, eps) componentwise iff eps < 1/a1
        let p = p0();
        let j = jacobian(&p, [0.0, 0.0], Frame::Transformed);
        let e = [1.0, 0.5 / p.a1];
        let img = [
            j[0][0] * e[0] + j[0][1] * e[1],
            j[1][0] * e[0] + j[1][1] * e[1],
        ];
        assert!(img[0] < e[0] && img[1] < e[1]);
        let e_bad = [1.0, 1.5 / p.a1];
        let img_bad = j[0][0] * e_bad[0] + j[0][1] * e_bad[1];
        assert!(img_bad > 1.0);
    }

    #[test]
    fn certificate_requires_h1() {
        assert!(strong_stability_vectors(&ModelParams::new(0.5, 0.5, 0.8, 3.0)).is_err());
    }
}
