//! Sphere integrals along the interpolation `p_t = t p + (1-t) P_d`.
//!
//! All integrals are evaluated in the principal frame of `p`: rule nodes are
//! read as eigen-coordinates, so integrands depend only on the spectrum. With
//! eigenvalues sorted in decreasing order the small (or vanishing) directions
//! land on the last coordinates, which the rules resolve best.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};

use crate::cone::{ParabolaCone, TBar, PSD_TOL, TRACE_TOL, UNIT_TOL};
use crate::error::{Error, Result};
use crate::quadrature::{wallis, QuadEstimate, RulePair, SphereRule, ROUNDOFF_FACTOR};

/// Values of `p_t` below this are treated as lying on the kernel.
pub const KERNEL_FLOOR: f64 = 1e-14;
/// Distance to the symmetric cones below which a cone counts as symmetric.
pub const SYMMETRIC_TOL: f64 = 1e-8;
/// Multiplier applied to the quadrature error in every verdict.
pub const ERROR_MULTIPLIER: f64 = 10.0;
/// Number of points in the concavity and equivalence scans.
pub const SCAN_POINTS: usize = 33;

/// Deterministic generator for sample `stream` of a run seeded with `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn direct_terms(mu: &[f64], d: usize, xi: &[f64]) -> [f64; 2] {
    let mut p = 0.0;
    let mut g2 = 0.0;
    for (m, x) in mu.iter().zip(xi) {
        let x2 = x * x;
        p += m * x2;
        g2 += m * m * x2;
    }
    p *= 0.5;
    if p < KERNEL_FLOOR {
        return [0.0, 0.0];
    }
    let c = 0.5 / d as f64;
    let ratio = g2 / p;
    [ratio * (p - c), ratio * (p + c)]
}

/// `[|∇_τ p|², (p - P_d)², |∇_τ p|² / p_t]` at a frame point.
fn expanded_terms(lambda: &[f64], mu: &[f64], d: usize, xi: &[f64]) -> [f64; 3] {
    let mut m = 0.0;
    let mut pt = 0.0;
    for ((l, u), x) in lambda.iter().zip(mu).zip(xi) {
        let x2 = x * x;
        m += l * x2;
        pt += u * x2;
    }
    pt *= 0.5;
    let tang: f64 = lambda.iter().zip(xi).map(|(l, x)| x * x * (l - m) * (l - m)).sum();
    let dev = 0.5 * (m - 1.0 / d as f64);
    let ratio = if pt < KERNEL_FLOOR { 0.0 } else { tang / pt };
    [tang, dev * dev, ratio]
}

fn curvature_term(lambda: &[f64], mu: &[f64], d: usize, xi: &[f64]) -> f64 {
    let mut m = 0.0;
    let mut pt = 0.0;
    for ((l, u), x) in lambda.iter().zip(mu).zip(xi) {
        let x2 = x * x;
        m += l * x2;
        pt += u * x2;
    }
    pt *= 0.5;
    let p3 = pt * pt * pt;
    if p3 < KERNEL_FLOOR {
        return 0.0;
    }
    let tang: f64 = lambda.iter().zip(xi).map(|(l, x)| x * x * (l - m) * (l - m)).sum();
    let dev = 0.5 * (m - 1.0 / d as f64);
    tang * dev * dev / p3
}

/// `(|A x|² / p(x)) (p(x) - 1/(2d))` for `p = ½ x·Ax`, zero on the kernel floor.
pub fn q_integrand(matrix: &DMatrix<f64>, x: &[f64]) -> Result<f64> {
    let d = matrix.nrows();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnit { norm });
    }
    let cone = ParabolaCone::new(matrix.clone())?;
    let xi = cone.spectrum().to_frame(x);
    Ok(direct_terms(cone.eigenvalues(), d, &xi)[0])
}

/// Spectra of `p` and `p_t`, after checking that `t` is admissible.
fn spectra(cone: &ParabolaCone, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Negative(format!("interpolation parameter t = {t}")));
    }
    let interp = cone.interpolate(t);
    if !interp.is_valid() {
        return Err(Error::BeyondTBar {
            t,
            t_bar: cone.t_bar().value(),
        });
    }
    Ok((cone.eigenvalues().to_vec(), interp.eigenvalues().to_vec()))
}

fn require_interior(cone: &ParabolaCone, t: f64) -> Result<()> {
    let t_bar = cone.t_bar().value();
    if !(t > 0.0 && t < t_bar) {
        return Err(Error::NotInterior { t, t_bar });
    }
    Ok(())
}

fn is_line(cone: &ParabolaCone) -> bool {
    cone.dim() == 1
}

/// `Q(t) = ∫ (|∇p_t|²/p_t)(p_t - 1/(2d))` on one rule.
pub fn q_direct(cone: &ParabolaCone, t: f64, rule: &SphereRule) -> Result<f64> {
    let (_, mu) = spectra(cone, t)?;
    if is_line(cone) {
        return Ok(0.0);
    }
    let d = cone.dim();
    Ok(rule.integrate(|xi| direct_terms(&mu, d, xi)[0]))
}

/// `Q(t)` through the tangential-gradient expansion on one rule.
pub fn q_expanded(cone: &ParabolaCone, t: f64, rule: &SphereRule) -> Result<f64> {
    Ok(t * t * q_value(cone, t, rule)?)
}

/// `q(t) = Q(t)/t²`; at `t = 0` the limit `4∫(p - P_d)²`.
pub fn q_value(cone: &ParabolaCone, t: f64, rule: &SphereRule) -> Result<f64> {
    let (lambda, mu) = spectra(cone, t)?;
    if is_line(cone) {
        return Ok(0.0);
    }
    let d = cone.dim();
    let [a, b, c] = rule.integrate_many::<3>(|xi| expanded_terms(&lambda, &mu, d, xi));
    if t == 0.0 {
        return Ok(4.0 * b);
    }
    Ok(a + 4.0 * b - c / (2.0 * d as f64))
}

/// `q''(t) = -(1/d) ∫ |∇_τ p|² (p - P_d)² / p_t³` for `0 < t < t_bar`.
pub fn q_second_derivative(cone: &ParabolaCone, t: f64, rule: &SphereRule) -> Result<f64> {
    require_interior(cone, t)?;
    let (lambda, mu) = spectra(cone, t)?;
    if is_line(cone) {
        return Ok(0.0);
    }
    let d = cone.dim();
    Ok(-rule.integrate(|xi| curvature_term(&lambda, &mu, d, xi)) / d as f64)
}

fn combine(lo: f64, hi: f64, mass: f64) -> QuadEstimate {
    QuadEstimate {
        value: hi,
        error: (hi - lo).abs() + ROUNDOFF_FACTOR * mass,
    }
}

fn exact_zero() -> QuadEstimate {
    QuadEstimate {
        value: 0.0,
        error: 0.0,
    }
}

/// Two-level estimate of `Q(t)` by the direct formula.
pub fn q_direct_estimate(cone: &ParabolaCone, t: f64, pair: &RulePair) -> Result<QuadEstimate> {
    check_pair(cone, pair)?;
    let (_, mu) = spectra(cone, t)?;
    if is_line(cone) {
        return Ok(exact_zero());
    }
    let d = cone.dim();
    let (lo, hi) = pair.integrate_both::<2>(|xi| direct_terms(&mu, d, xi));
    Ok(combine(lo[0], hi[0], hi[1]))
}

/// Two-level estimate of `q(t)` by the expansion (the `t = 0` limit included).
pub fn q_value_estimate(cone: &ParabolaCone, t: f64, pair: &RulePair) -> Result<QuadEstimate> {
    check_pair(cone, pair)?;
    let (lambda, mu) = spectra(cone, t)?;
    if is_line(cone) {
        return Ok(exact_zero());
    }
    let d = cone.dim();
    let half_inv = 1.0 / (2.0 * d as f64);
    let (lo, hi) = pair.integrate_both::<3>(|xi| expanded_terms(&lambda, &mu, d, xi));
    if t == 0.0 {
        return Ok(combine(4.0 * lo[1], 4.0 * hi[1], 4.0 * hi[1]));
    }
    let q = |v: [f64; 3]| v[0] + 4.0 * v[1] - half_inv * v[2];
    let mass = hi[0] + 4.0 * hi[1] + half_inv * hi[2];
    Ok(combine(q(lo), q(hi), mass))
}

/// Two-level estimate of `Q(t) = t² q(t)` by the expansion.
pub fn q_expanded_estimate(cone: &ParabolaCone, t: f64, pair: &RulePair) -> Result<QuadEstimate> {
    let q = q_value_estimate(cone, t, pair)?;
    Ok(QuadEstimate {
        value: t * t * q.value,
        error: t * t * q.error,
    })
}

/// Two-level estimate of `q''(t)`.
pub fn q_second_derivative_estimate(
    cone: &ParabolaCone,
    t: f64,
    pair: &RulePair,
) -> Result<QuadEstimate> {
    check_pair(cone, pair)?;
    require_interior(cone, t)?;
    let (lambda, mu) = spectra(cone, t)?;
    if is_line(cone) {
        return Ok(exact_zero());
    }
    let d = cone.dim();
    let (lo, hi) = pair.integrate_both::<1>(|xi| [curvature_term(&lambda, &mu, d, xi)]);
    let s = -1.0 / d as f64;
    Ok(combine(s * lo[0], s * hi[0], -s * hi[0]))
}

fn check_pair(cone: &ParabolaCone, pair: &RulePair) -> Result<()> {
    if cone.dim() != pair.dim() {
        return Err(Error::DimensionMismatch {
            expected: cone.dim(),
            got: pair.dim(),
        });
    }
    Ok(())
}

/// Both expressions of `Q(t)` with a shared error budget.
#[derive(Debug, Clone)]
pub struct QReport {
    pub cone: ParabolaCone,
    pub t: f64,
    pub q_direct: f64,
    pub q_expanded: f64,
    /// Sum of the two estimates' errors, a bound for their difference.
    pub quad_error: f64,
    pub rule_level: usize,
}

impl QReport {
    pub fn compute(cone: &ParabolaCone, t: f64, pair: &RulePair) -> Result<Self> {
        let direct = q_direct_estimate(cone, t, pair)?;
        let expanded = q_expanded_estimate(cone, t, pair)?;
        Ok(Self {
            cone: cone.clone(),
            t,
            q_direct: direct.value,
            q_expanded: expanded.value,
            quad_error: direct.error + expanded.error,
            rule_level: pair.hi().level(),
        })
    }

    pub fn agrees(&self) -> bool {
        (self.q_direct - self.q_expanded).abs() <= ERROR_MULTIPLIER * self.quad_error
    }
}

/// Outcome of testing the main inequality on one cone.
#[derive(Debug, Clone)]
pub struct InequalityVerdict {
    pub cone: ParabolaCone,
    pub q1: f64,
    pub quad_error: f64,
    pub margin: f64,
    pub is_equality_case: bool,
    pub nearest_k: usize,
    pub dist_to_sp: f64,
    /// The equality flag and the symmetry test disagree.
    pub anomaly: bool,
}

impl InequalityVerdict {
    /// `Q(1)` is below `-10·quad_error`.
    pub fn violates(&self) -> bool {
        self.margin < -ERROR_MULTIPLIER * self.quad_error
    }
}

/// Evaluates `Q(1)` and classifies the cone.
pub fn verify_inequality(cone: &ParabolaCone, pair: &RulePair) -> Result<InequalityVerdict> {
    let q1 = q_direct_estimate(cone, 1.0, pair)?;
    let fit = cone.nearest_symmetric();
    let is_equality_case = q1.value.abs() <= ERROR_MULTIPLIER * q1.error;
    let symmetric = fit.distance <= SYMMETRIC_TOL;
    Ok(InequalityVerdict {
        cone: cone.clone(),
        q1: q1.value,
        quad_error: q1.error,
        margin: q1.value,
        is_equality_case,
        nearest_k: fit.k,
        dist_to_sp: fit.distance,
        anomaly: is_equality_case != symmetric,
    })
}

/// `((d-1)/d) W_{d-2}`.
pub fn alpha_predicted(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidCone(format!(
            "dimension reduction needs d >= 2, got {d}"
        )));
    }
    Ok((d as f64 - 1.0) / d as f64 * wallis(d as i64 - 2)?)
}

/// Measured and predicted constants of the dimension reduction.
#[derive(Debug, Clone)]
pub struct DimensionReduction {
    /// `None` when the lower-dimensional integral is within its error of zero.
    pub alpha_measured: Option<f64>,
    pub alpha_predicted: f64,
    pub lifted: QuadEstimate,
    pub base: QuadEstimate,
}

/// Compares `Q(1)` of `x ↦ q(x_1, …, x_{d-1})` on `S^{d-1}` with `Q(1)` of
/// `q` on `S^{d-2}`.
pub fn dimension_reduction_check(
    base_cone: &ParabolaCone,
    pair_d: &RulePair,
    pair_dm1: &RulePair,
) -> Result<DimensionReduction> {
    let lifted_cone = base_cone.lift();
    let d = lifted_cone.dim();
    let lifted = q_direct_estimate(&lifted_cone, 1.0, pair_d)?;
    let base = q_direct_estimate(base_cone, 1.0, pair_dm1)?;
    let alpha_measured = if base.value.abs() > ERROR_MULTIPLIER * base.error {
        Some(lifted.value / base.value)
    } else {
        None
    };
    Ok(DimensionReduction {
        alpha_measured,
        alpha_predicted: alpha_predicted(d)?,
        lifted,
        base,
    })
}

/// The cone restricted to the orthogonal complement of its kernel direction,
/// when it has one.
pub fn restrict_to_complement(cone: &ParabolaCone) -> Option<ParabolaCone> {
    let d = cone.dim();
    if d < 2 || cone.spectrum().min() > PSD_TOL {
        return None;
    }
    let head = &cone.eigenvalues()[..d - 1];
    let sum: f64 = head.iter().sum();
    if (sum - 1.0).abs() > 1e3 * TRACE_TOL {
        return None;
    }
    let values: Vec<f64> = head.iter().map(|v| v.max(0.0) / sum).collect();
    ParabolaCone::diagonal(&values).ok()
}

/// Sampling families for random cones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `G Gᵀ / tr(G Gᵀ)` with a square Gaussian `G`.
    Interior,
    /// Same with `r < d` columns, so at least one eigenvalue vanishes.
    Boundary,
    /// A rotated `P_k` spectrum with entries perturbed by at most `1e-3`.
    NearSymmetric,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Interior => "interior",
            Family::Boundary => "boundary",
            Family::NearSymmetric => "near_symmetric",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interior" => Ok(Family::Interior),
            "boundary" => Ok(Family::Boundary),
            "near_symmetric" | "near-symmetric" => Ok(Family::NearSymmetric),
            other => Err(Error::Parse(format!(
                "unknown family `{other}` (expected interior, boundary or near_symmetric)"
            ))),
        }
    }
}

/// Perturbation size of the near-symmetric family.
pub const NEAR_SYMMETRIC_PERTURBATION: f64 = 1e-3;

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

fn normalized_gram(g: &DMatrix<f64>) -> Result<ParabolaCone> {
    let gram = g * g.transpose();
    let gram = (&gram + gram.transpose()) * 0.5;
    let trace = gram.trace();
    ParabolaCone::new(gram / trace)
}

/// Haar-distributed rotation from the QR factorization of a Gaussian matrix.
pub fn random_rotation(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, d, d).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Random cone of rank `rank`, `1 <= rank <= d`.
pub fn random_parabola_with_rank(d: usize, rng: &mut ChaCha8Rng, rank: usize) -> Result<ParabolaCone> {
    if rank == 0 || rank > d {
        return Err(Error::InvalidCone(format!("rank must lie in 1..={d}, got {rank}")));
    }
    normalized_gram(&gaussian_matrix(rng, d, rank))
}

/// Draws one cone of the given family from `rng`.
pub fn random_parabola_from(d: usize, rng: &mut ChaCha8Rng, family: Family) -> Result<ParabolaCone> {
    if d == 0 {
        return Err(Error::InvalidCone("dimension must be positive".into()));
    }
    if d == 1 {
        return ParabolaCone::diagonal(&[1.0]);
    }
    match family {
        Family::Interior => random_parabola_with_rank(d, rng, d),
        Family::Boundary => {
            let rank = rng.random_range(1..d);
            random_parabola_with_rank(d, rng, rank)
        }
        Family::NearSymmetric => {
            let k = rng.random_range(1..=d);
            let spread = Uniform::new_inclusive(-NEAR_SYMMETRIC_PERTURBATION, NEAR_SYMMETRIC_PERTURBATION)
                .expect("finite bounds");
            let mut values: Vec<f64> = (0..d)
                .map(|i| {
                    let base = if i < k { 1.0 / k as f64 } else { 0.0 };
                    (base + rng.sample(spread)).max(0.0)
                })
                .collect();
            let sum: f64 = values.iter().sum();
            values.iter_mut().for_each(|v| *v /= sum);
            let rotation = random_rotation(rng, d);
            ParabolaCone::from_spectrum(&values, &rotation)
        }
    }
}

/// Deterministic cone for `(seed, family)`.
pub fn random_parabola(d: usize, seed: u64, family: Family) -> Result<ParabolaCone> {
    random_parabola_from(d, &mut rng_for(seed, 0), family)
}

/// `n` Chebyshev–Lobatto points on `[a, b]`, increasing.
pub fn chebyshev_points(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n)
        .map(|i| {
            let c = (std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
            a + (b - a) * 0.5 * (1.0 - c)
        })
        .collect()
}

/// Points strictly inside `(0, t_bar)`, kept `t_bar·1e-3` from both ends.
pub fn concavity_grid(t_bar: TBar, n: usize) -> Vec<f64> {
    let end = t_bar.finite().unwrap_or(4.0);
    chebyshev_points(1e-3 * end, (1.0 - 1e-3) * end, n)
}

/// Points on `[0, min(t_bar, 4)]`, endpoints included.
pub fn equivalence_grid(t_bar: TBar, n: usize) -> Vec<f64> {
    chebyshev_points(0.0, t_bar.value().min(4.0), n)
}

/// Default finite-difference step for `q''`.
pub const FD_STEP: f64 = 1e-3;

/// Second central difference of `q` at `t`, with the step shrunk so that the
/// stencil stays in `[0, t_bar]`.
pub fn q_second_difference(cone: &ParabolaCone, t: f64, pair: &RulePair) -> Result<f64> {
    let t_bar = cone.t_bar().value();
    let h = FD_STEP.min(0.5 * t).min(0.5 * (t_bar - t));
    if !(h > 0.0) {
        return Err(Error::NotInterior { t, t_bar });
    }
    let q = |s: f64| q_value_estimate(cone, s, pair).map(|e| e.value);
    Ok((q(t + h)? - 2.0 * q(t)? + q(t - h)?) / (h * h))
}

/// One point of a `q` curve.
#[derive(Debug, Clone, Copy)]
pub struct CurvePoint {
    pub t: f64,
    pub q_direct: QuadEstimate,
    pub q_expanded: QuadEstimate,
    pub q: QuadEstimate,
    pub q_dd_formula: QuadEstimate,
    pub q_dd_finite_diff: f64,
}

impl CurvePoint {
    pub fn formulas_agree(&self) -> bool {
        (self.q_direct.value - self.q_expanded.value).abs()
            <= ERROR_MULTIPLIER * (self.q_direct.error + self.q_expanded.error)
    }

    pub fn is_concave(&self) -> bool {
        self.q_dd_formula.value <= ERROR_MULTIPLIER * self.q_dd_formula.error
    }

    /// Formula and finite difference agree to `1e-4·max(1, |formula|)`.
    pub fn curvature_matches(&self) -> bool {
        let f = self.q_dd_formula.value;
        (f - self.q_dd_finite_diff).abs() <= 1e-4 * f.abs().max(1.0)
    }
}

/// `t / t_bar` window in which the finite difference is compared.
pub const INTERIOR_WINDOW: (f64, f64) = (0.05, 0.95);

/// A sampled `q` curve with its endpoint values.
#[derive(Debug, Clone)]
pub struct QCurve {
    pub t_bar: TBar,
    pub points: Vec<CurvePoint>,
    pub q_start: QuadEstimate,
    /// `q(t_bar)`, absent for the radial cone.
    pub q_end: Option<QuadEstimate>,
}

impl QCurve {
    pub fn compute(cone: &ParabolaCone, pair: &RulePair, n: usize) -> Result<Self> {
        let t_bar = cone.t_bar();
        let mut points = Vec::with_capacity(n);
        for t in concavity_grid(t_bar, n) {
            points.push(CurvePoint {
                t,
                q_direct: q_direct_estimate(cone, t, pair)?,
                q_expanded: q_expanded_estimate(cone, t, pair)?,
                q: q_value_estimate(cone, t, pair)?,
                q_dd_formula: q_second_derivative_estimate(cone, t, pair)?,
                q_dd_finite_diff: q_second_difference(cone, t, pair)?,
            });
        }
        let q_start = q_value_estimate(cone, 0.0, pair)?;
        let q_end = match t_bar {
            TBar::Finite(tb) => Some(q_value_estimate(cone, tb, pair)?),
            TBar::Infinite => None,
        };
        Ok(Self {
            t_bar,
            points,
            q_start,
            q_end,
        })
    }

    fn in_window(&self, t: f64) -> bool {
        let end = self.t_bar.finite().unwrap_or(4.0);
        let r = t / end;
        r >= INTERIOR_WINDOW.0 && r <= INTERIOR_WINDOW.1
    }

    pub fn formulas_agree(&self) -> bool {
        self.points.iter().all(CurvePoint::formulas_agree)
    }

    pub fn is_concave(&self) -> bool {
        self.points.iter().all(CurvePoint::is_concave)
    }

    pub fn curvature_matches(&self) -> bool {
        self.points
            .iter()
            .filter(|p| self.in_window(p.t))
            .all(CurvePoint::curvature_matches)
    }

    /// `q(0) >= 0` and `q(t_bar) >= -10·error`.
    pub fn endpoints_nonnegative(&self) -> bool {
        self.q_start.value >= 0.0
            && self
                .q_end
                .is_none_or(|e| e.value >= -ERROR_MULTIPLIER * e.error)
    }

    /// Every sampled `q(t)` lies above the smaller endpoint value.
    pub fn chord_holds(&self) -> bool {
        let Some(end) = self.q_end else {
            return true;
        };
        let floor = self.q_start.value.min(end.value) * (1.0 - 1e-6);
        self.points
            .iter()
            .all(|p| p.q.value >= floor - ERROR_MULTIPLIER * (p.q.error + end.error + self.q_start.error))
    }
}
