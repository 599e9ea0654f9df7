//! Closed-form cone families of the obstacle and Alt-Phillips problems.
//!
//! Parabola cones `p(x) = ½ x·Ax` (A ⪰ 0, trace 1) carry a cached, sorted
//! eigendecomposition; every spectral operation (interpolation toward the
//! radial cone, the degeneration parameter `t_bar`, distances to the symmetric
//! cones `P_k`) reads from that cache.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Absolute tolerance on eigenvalues below which a matrix is not PSD.
pub const PSD_TOL: f64 = 1e-12;
/// Absolute tolerance on `trace(A) - 1`.
pub const TRACE_TOL: f64 = 1e-12;
/// Largest admissible `|A_ij - A_ji|`.
pub const SYMMETRY_TOL: f64 = 1e-14;
/// Max-entry error allowed when the cached eigendecomposition rebuilds `A`.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
/// Tolerance on `|e| - 1` for direction vectors.
pub const UNIT_TOL: f64 = 1e-12;

/// The Alt-Phillips exponent together with its scaling parameter
/// `beta = 2/(2-gamma)` and the flat-cone coefficient `c_gamma`, the positive
/// solution of `c^(2-gamma) = (2-gamma)^2/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent {
    gamma: f64,
    beta: f64,
    c_gamma: f64,
}

impl Exponent {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(0.5..=1.5).contains(&gamma) {
            return Err(Error::GammaOutOfRange { gamma });
        }
        let two_minus = 2.0 - gamma;
        let beta = 2.0 / two_minus;
        let c_gamma = (two_minus * two_minus / 2.0).powf(1.0 / two_minus);
        Ok(Self {
            gamma,
            beta,
            c_gamma,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn c_gamma(&self) -> f64 {
        self.c_gamma
    }

    /// True for the classical obstacle problem.
    pub fn is_obstacle(&self) -> bool {
        self.gamma == 1.0
    }

    /// Coefficient `(2-gamma)/(2 gamma)` of the transformed flat cone.
    pub fn transformed_flat_scale(&self) -> f64 {
        (2.0 - self.gamma) / (2.0 * self.gamma)
    }

    /// Maps a minimizer value `v` to the transformed value
    /// `v^(2/beta) / (gamma (2-gamma))`.
    pub fn transform(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        v.powf(2.0 / self.beta) / (self.gamma * (2.0 - self.gamma))
    }

    /// Inverse of [`Exponent::transform`].
    pub fn inverse_transform(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        (self.gamma * (2.0 - self.gamma) * u).powf(self.beta / 2.0)
    }
}

/// Builds an [`Exponent`] from `gamma`.
pub fn make_exponent(gamma: f64) -> Result<Exponent> {
    Exponent::new(gamma)
}

/// Eigenvalues sorted in decreasing order with matching orthonormal
/// eigenvectors stored as matrix columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl Spectrum {
    fn of(matrix: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(matrix.clone());
        let d = matrix.nrows();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
        Self { values, vectors }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Orthonormal eigenvectors as columns, in the order of [`Spectrum::values`].
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    /// Coordinates of `x` in the eigenbasis, `Vᵀ x`.
    pub fn to_frame(&self, x: &[f64]) -> Vec<f64> {
        let d = self.values.len();
        (0..d)
            .map(|c| (0..d).map(|r| self.vectors[(r, c)] * x[r]).sum())
            .collect()
    }

    fn rebuild(&self) -> DMatrix<f64> {
        let diag = DMatrix::from_diagonal(&DVector::from_column_slice(&self.values));
        &self.vectors * diag * self.vectors.transpose()
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn quadratic_form(matrix: &DMatrix<f64>, x: &[f64]) -> f64 {
    let d = x.len();
    let mut acc = 0.0;
    for i in 0..d {
        let mut row = 0.0;
        for j in 0..d {
            row += matrix[(i, j)] * x[j];
        }
        acc += x[i] * row;
    }
    acc
}

fn mat_vec(matrix: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d)
        .map(|i| (0..d).map(|j| matrix[(i, j)] * x[j]).sum())
        .collect()
}

/// A parabola solution `p(x) = ½ x·Ax` of the obstacle problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ParabolaCone {
    matrix: DMatrix<f64>,
    spectrum: Spectrum,
}

impl ParabolaCone {
    /// Validates `matrix` (symmetric, PSD, trace one) and caches its spectrum.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidCone(format!(
                "matrix must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCone("matrix has non-finite entries".into()));
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(Error::InvalidCone(format!(
                "matrix is not symmetric (max |A_ij - A_ji| = {asym:e})"
            )));
        }
        let spectrum = Spectrum::of(&matrix);
        Self::from_parts(matrix, spectrum)
    }

    fn from_parts(matrix: DMatrix<f64>, spectrum: Spectrum) -> Result<Self> {
        let trace = matrix.trace();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidCone(format!(
                "trace must equal 1, got {trace} (deviation {:e})",
                trace - 1.0
            )));
        }
        if spectrum.min() < -PSD_TOL {
            return Err(Error::InvalidCone(format!(
                "matrix is not positive semidefinite (smallest eigenvalue {:e})",
                spectrum.min()
            )));
        }
        let err = (spectrum.rebuild() - &matrix).amax();
        if err > RECONSTRUCTION_TOL {
            return Err(Error::InvalidCone(format!(
                "eigendecomposition reconstructs A only to {err:e}"
            )));
        }
        Ok(Self { matrix, spectrum })
    }

    /// `A = diag(values)`.
    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let d = values.len();
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(values)))
            .map_err(|e| match e {
                Error::InvalidCone(msg) => Error::InvalidCone(format!("diag of dim {d}: {msg}")),
                other => other,
            })
    }

    /// `A = V diag(values) Vᵀ` for an orthogonal `rotation = V`.
    pub fn from_spectrum(values: &[f64], rotation: &DMatrix<f64>) -> Result<Self> {
        let d = values.len();
        check_dim(d, rotation.nrows())?;
        check_dim(d, rotation.ncols())?;
        let diag = DMatrix::from_diagonal(&DVector::from_column_slice(values));
        let a = rotation * diag * rotation.transpose();
        let sym = (&a + a.transpose()) * 0.5;
        Self::new(sym)
    }

    /// The radial cone `P_d = |x|²/(2d)`.
    pub fn radial(d: usize) -> Self {
        Self::diagonal(&vec![1.0 / d as f64; d]).expect("I/d is a valid cone")
    }

    /// The symmetric cone `P_k` in standard coordinates, `1 <= k <= d`.
    pub fn symmetric(d: usize, k: usize) -> Result<Self> {
        if k == 0 || k > d {
            return Err(Error::InvalidCone(format!(
                "P_k needs 1 <= k <= d, got k = {k}, d = {d}"
            )));
        }
        let values: Vec<f64> = (0..d)
            .map(|i| if i < k { 1.0 / k as f64 } else { 0.0 })
            .collect();
        Self::diagonal(&values)
    }

    /// The cone `x ↦ p(x_1, …, x_d)` in one more dimension, invariant along
    /// the new last axis.
    pub fn lift(&self) -> Self {
        let d = self.dim();
        let mut m = DMatrix::zeros(d + 1, d + 1);
        m.view_mut((0, 0), (d, d)).copy_from(&self.matrix);
        Self::new(m).expect("lifting preserves trace, symmetry and PSD")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.spectrum.values()
    }

    /// `½ x·Ax`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(0.5 * quadratic_form(&self.matrix, x))
    }

    /// `∇p(x) = Ax`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(mat_vec(&self.matrix, x))
    }

    /// Gradient along the sphere at a unit point: `Ax - (x·Ax) x`.
    pub fn tangential_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let r = norm(x);
        if (r - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnit { norm: r });
        }
        let ax = mat_vec(&self.matrix, x);
        let radial = dot(x, &ax);
        Ok(ax.iter().zip(x).map(|(g, xi)| g - radial * xi).collect())
    }

    /// `A_t = tA + (1-t) I/d`, the matrix of `p_t = t p + (1-t) P_d`.
    pub fn interpolate(&self, t: f64) -> Interpolated {
        let d = self.dim();
        let iso = (1.0 - t) / d as f64;
        let mut matrix = &self.matrix * t;
        for i in 0..d {
            matrix[(i, i)] += iso;
        }
        let values: Vec<f64> = self.spectrum.values.iter().map(|l| t * l + iso).collect();
        let valid = values.last().copied().unwrap_or(0.0) >= -PSD_TOL;
        Interpolated {
            t,
            matrix,
            spectrum: Spectrum {
                values,
                vectors: self.spectrum.vectors.clone(),
            },
            valid,
        }
    }

    /// `sup { t : A_t ⪰ 0 }`.
    pub fn t_bar(&self) -> TBar {
        t_bar_from_min(self.dim(), self.spectrum.min())
    }

    /// Closest symmetric cone `P_k ∘ R` in `L∞(B_1)`, found by matching the
    /// sorted spectrum against `(1/k, …, 1/k, 0, …, 0)`.
    pub fn nearest_symmetric(&self) -> SymmetricFit {
        let d = self.dim();
        let mut best: Option<(usize, f64)> = None;
        for k in 1..=d {
            let dist = 0.5
                * self
                    .spectrum
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, l)| {
                        let mu = if i < k { 1.0 / k as f64 } else { 0.0 };
                        (l - mu).abs()
                    })
                    .fold(0.0, f64::max);
            if best.is_none_or(|(_, b)| dist < b) {
                best = Some((k, dist));
            }
        }
        let (k, distance) = best.expect("d >= 1");
        SymmetricFit {
            k,
            rotation: self.spectrum.vectors.transpose(),
            distance,
        }
    }

    /// `sup_{|x|<=1} |p(x) - q(x)|`.
    pub fn linf_distance(&self, other: &ParabolaCone) -> Result<f64> {
        linf_distance_quadratics(self, other)
    }

    /// Row-major upper triangle of `A`, decimal17, space separated.
    pub fn to_text(&self) -> String {
        let d = self.dim();
        let mut parts = Vec::with_capacity(d * (d + 1) / 2);
        for i in 0..d {
            for j in i..d {
                parts.push(format!("{:.16e}", self.matrix[(i, j)]));
            }
        }
        parts.join(" ")
    }

    /// Inverse of [`ParabolaCone::to_text`].
    pub fn from_text(d: usize, text: &str) -> Result<Self> {
        let vals: Vec<f64> = text
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}"))))
            .collect::<Result<_>>()?;
        if vals.len() != d * (d + 1) / 2 {
            return Err(Error::Parse(format!(
                "expected {} upper-triangle entries for d = {d}, got {}",
                d * (d + 1) / 2,
                vals.len()
            )));
        }
        let mut m = DMatrix::zeros(d, d);
        let mut it = vals.into_iter();
        for i in 0..d {
            for j in i..d {
                let v = it.next().expect("length checked");
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self::new(m)
    }
}

fn t_bar_from_min(d: usize, lambda_min: f64) -> TBar {
    let iso = 1.0 / d as f64;
    let gap = iso - lambda_min.max(0.0);
    if gap <= 1e-14 {
        TBar::Infinite
    } else {
        TBar::Finite(iso / gap)
    }
}

/// `sup_{|x|<=1} |½x·(A-B)x| = ½ ρ(A-B)`.
pub fn linf_distance_quadratics(a: &ParabolaCone, b: &ParabolaCone) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let diff = a.matrix() - b.matrix();
    let diff = (&diff + diff.transpose()) * 0.5;
    let eig = SymmetricEigen::new(diff);
    Ok(0.5 * eig.eigenvalues.amax())
}

/// `c_gamma [(x·e)_+]^beta`.
pub fn flat_cone_eval(exp: &Exponent, e: &[f64], x: &[f64]) -> Result<f64> {
    check_dim(e.len(), x.len())?;
    let r = norm(e);
    if (r - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnit { norm: r });
    }
    let s = dot(x, e);
    if s <= 0.0 {
        return Ok(0.0);
    }
    Ok(exp.c_gamma() * s.powf(exp.beta()))
}

/// The interpolated quadratic `p_t`. Its matrix always has trace one; it is a
/// parabola cone exactly when `valid` (smallest eigenvalue ≥ -1e-12).
#[derive(Debug, Clone)]
pub struct Interpolated {
    t: f64,
    matrix: DMatrix<f64>,
    spectrum: Spectrum,
    valid: bool,
}

impl Interpolated {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.spectrum.values()
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }

    /// The interpolant as a cone, reusing the cached spectrum.
    pub fn into_cone(self) -> Option<ParabolaCone> {
        if !self.valid {
            return None;
        }
        ParabolaCone::from_parts(self.matrix, self.spectrum).ok()
    }
}

/// Upper end of the interpolation range. `Infinite` only for `A = I/d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TBar {
    Finite(f64),
    Infinite,
}

impl TBar {
    pub fn is_finite(&self) -> bool {
        matches!(self, TBar::Finite(_))
    }

    /// The value as a float; `f64::INFINITY` for the radial cone.
    pub fn value(&self) -> f64 {
        match self {
            TBar::Finite(t) => *t,
            TBar::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            TBar::Finite(t) => Some(*t),
            TBar::Infinite => None,
        }
    }
}

impl fmt::Display for TBar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TBar::Finite(t) => write!(f, "{t:.16e}"),
            TBar::Infinite => f.write_str("inf"),
        }
    }
}

/// Result of [`ParabolaCone::nearest_symmetric`].
#[derive(Debug, Clone)]
pub struct SymmetricFit {
    pub k: usize,
    /// Rows are the sorted eigenvectors, so `P_k(R x)` is the aligned cone.
    pub rotation: DMatrix<f64>,
    pub distance: f64,
}

impl SymmetricFit {
    pub fn cone(&self) -> SymmetricCone {
        SymmetricCone {
            k: self.k,
            rotation: self.rotation.clone(),
        }
    }
}

/// `P_k ∘ R`: for `k >= 1` the cone `(1/2k) Σ_{j<=k} (Rx)_j²`, for `k = 0`
/// the half-space form `½ [(Rx)_1]_+²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricCone {
    k: usize,
    rotation: DMatrix<f64>,
}

impl SymmetricCone {
    pub fn new(k: usize, rotation: DMatrix<f64>) -> Result<Self> {
        if !rotation.is_square() {
            return Err(Error::InvalidCone("rotation must be square".into()));
        }
        let d = rotation.nrows();
        if k > d {
            return Err(Error::InvalidCone(format!("k = {k} exceeds d = {d}")));
        }
        let defect = (rotation.transpose() * &rotation - DMatrix::identity(d, d)).amax();
        if defect > 1e-10 {
            return Err(Error::InvalidCone(format!(
                "rotation is not orthogonal (defect {defect:e})"
            )));
        }
        Ok(Self { k, rotation })
    }

    /// `P_k` in standard coordinates.
    pub fn standard(d: usize, k: usize) -> Result<Self> {
        Self::new(k, DMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.rotation.nrows()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let row = |j: usize| -> f64 { (0..x.len()).map(|c| self.rotation[(j, c)] * x[c]).sum() };
        if self.k == 0 {
            let y = row(0).max(0.0);
            return Ok(0.5 * y * y);
        }
        let s: f64 = (0..self.k).map(|j| row(j).powi(2)).sum();
        Ok(s / (2.0 * self.k as f64))
    }

    /// Parabola-cone form for `k >= 1`; eigenvalues `1/k` (k times) and 0.
    pub fn to_parabola(&self) -> Option<ParabolaCone> {
        if self.k == 0 {
            return None;
        }
        let d = self.dim();
        let values: Vec<f64> = (0..d)
            .map(|i| if i < self.k { 1.0 / self.k as f64 } else { 0.0 })
            .collect();
        ParabolaCone::from_spectrum(&values, &self.rotation.transpose()).ok()
    }
}

/// `scale · [(x·e)_+]²`; scale ½ is the obstacle half-space solution.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaceCone {
    direction: Vec<f64>,
    scale: f64,
}

impl HalfSpaceCone {
    pub fn new(direction: Vec<f64>, scale: f64) -> Result<Self> {
        let r = norm(&direction);
        if (r - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnit { norm: r });
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidCone(format!("scale must be positive, got {scale}")));
        }
        Ok(Self { direction, scale })
    }

    /// The half-space solution `½ [(x·e)_+]²`.
    pub fn obstacle(direction: Vec<f64>) -> Result<Self> {
        Self::new(direction, 0.5)
    }

    /// The transformed flat cone `((2-γ)/2γ) [(x·e)_+]²`.
    pub fn transformed_flat(exp: &Exponent, direction: Vec<f64>) -> Result<Self> {
        Self::new(direction, exp.transformed_flat_scale())
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let s = dot(x, &self.direction).max(0.0);
        Ok(self.scale * s * s)
    }
}

/// The flat cone `c_gamma [(x·e)_+]^beta` of an exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatCone {
    exponent: Exponent,
    direction: Vec<f64>,
}

impl FlatCone {
    pub fn new(exponent: Exponent, direction: Vec<f64>) -> Result<Self> {
        let r = norm(&direction);
        if (r - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnit { norm: r });
        }
        Ok(Self { exponent, direction })
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        flat_cone_eval(&self.exponent, &self.direction, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(lo) < 0.0) == (f(mid) < 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn exponent_at_one_is_obstacle() {
        let e = make_exponent(1.0).unwrap();
        assert_eq!(e.beta(), 2.0);
        assert_eq!(e.c_gamma(), 0.5);
        assert!(e.is_obstacle());
        assert_eq!(e.transform(0.3), 0.3);
    }

    #[test]
    fn exponent_half_matches_bisection() {
        let e = make_exponent(0.5).unwrap();
        assert!((e.beta() - 4.0 / 3.0).abs() < 1e-15);
        let c = bisect(0.0, 4.0, |c| c.powf(1.5) - 9.0 / 8.0);
        assert!((e.c_gamma() - c).abs() < 1e-13);
        assert!((e.c_gamma() - 1.0817).abs() < 1e-4);
    }

    #[test]
    fn exponent_rejects_out_of_range() {
        let err = make_exponent(1.6).unwrap_err();
        assert!(err.to_string().contains("[1/2, 3/2]"));
        assert!(make_exponent(0.49).is_err());
        assert!(make_exponent(f64::NAN).is_err());
    }

    #[test]
    fn transform_round_trip() {
        let e = make_exponent(0.8).unwrap();
        for v in [0.0, 1e-6, 0.3, 2.0] {
            let back = e.inverse_transform(e.transform(v));
            assert!((back - v).abs() <= 1e-14 * (1.0 + v));
        }
    }

    #[test]
    fn eval_examples() {
        let p = ParabolaCone::radial(3);
        let x = [1.0 / 3f64.sqrt(); 3];
        assert!((p.eval(&x).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        let p = ParabolaCone::diagonal(&[1.0, 0.0]).unwrap();
        assert_eq!(p.eval(&[0.0, 1.0]).unwrap(), 0.0);
        let p = ParabolaCone::diagonal(&[0.7, 0.3]).unwrap();
        let s = 0.5f64.sqrt();
        assert!((p.eval(&[s, s]).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(
            p.eval(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn gradient_examples() {
        let p = ParabolaCone::radial(2);
        assert_eq!(p.gradient(&[0.4, -1.0]).unwrap(), vec![0.2, -0.5]);
        let p = ParabolaCone::diagonal(&[1.0, 0.0]).unwrap();
        assert_eq!(p.gradient(&[0.0, 1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn tangential_gradient_examples() {
        let p = ParabolaCone::radial(3);
        let x = [0.6, 0.0, 0.8];
        assert!(p.tangential_gradient(&x).unwrap().iter().all(|v| v.abs() < 1e-16));
        let p = ParabolaCone::diagonal(&[1.0, 0.0]).unwrap();
        assert_eq!(p.tangential_gradient(&[1.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let s = 0.5f64.sqrt();
        let g = p.tangential_gradient(&[s, s]).unwrap();
        assert!((norm(&g) - 0.5).abs() < 1e-15);
        assert!(matches!(
            p.tangential_gradient(&[1.0, 1.0]),
            Err(Error::NotUnit { .. })
        ));
    }

    #[test]
    fn construction_rejects_bad_matrices() {
        assert!(ParabolaCone::diagonal(&[0.7, 0.2]).is_err());
        assert!(ParabolaCone::diagonal(&[1.2, -0.2]).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1 + 1e-12, 0.5]);
        assert!(ParabolaCone::new(m).is_err());
    }

    #[test]
    fn interpolation_examples() {
        let p = ParabolaCone::diagonal(&[0.7, 0.3]).unwrap();
        let radial = p.interpolate(0.0);
        assert!((radial.matrix() - ParabolaCone::radial(2).matrix()).amax() < 1e-16);
        assert_eq!(p.interpolate(1.0).matrix(), p.matrix());
        let edge = p.interpolate(2.5);
        assert!(edge.is_valid());
        assert!((edge.matrix()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(edge.matrix()[(1, 1)].abs() < 1e-15);
        assert!(!p.interpolate(2.6).is_valid());
        assert!(p.interpolate(2.6).into_cone().is_none());
    }

    #[test]
    fn t_bar_examples() {
        assert_eq!(ParabolaCone::diagonal(&[1.0, 0.0]).unwrap().t_bar(), TBar::Finite(1.0));
        assert_eq!(ParabolaCone::radial(4).t_bar(), TBar::Infinite);
        assert_eq!(TBar::Infinite.to_string(), "inf");
        let p = ParabolaCone::diagonal(&[0.7, 0.3]).unwrap();
        let oracle = bisect(1.0, 10.0, |t| {
            let l = p.interpolate(t).eigenvalues()[1];
            if l >= 0.0 {
                -1.0
            } else {
                1.0
            }
        });
        let tb = p.t_bar().value();
        assert!((tb - 2.5).abs() < 1e-14);
        assert!((tb - oracle).abs() < 1e-12);
    }

    #[test]
    fn nearest_symmetric_examples() {
        let p = ParabolaCone::diagonal(&[0.5, 0.5, 0.0]).unwrap();
        let fit = p.nearest_symmetric();
        assert_eq!((fit.k, fit.distance), (2, 0.0));
        let fit = ParabolaCone::radial(3).nearest_symmetric();
        assert_eq!(fit.k, 3);
        assert!(fit.distance < 1e-15);
        let fit = ParabolaCone::diagonal(&[0.6, 0.4]).unwrap().nearest_symmetric();
        assert_eq!(fit.k, 2);
        assert!((fit.distance - 0.05).abs() < 1e-15);
    }

    /// Brute force over k and a dense grid of planar rotations, with the sup
    /// over the unit disk sampled on the circle (the difference is 2-homogeneous).
    #[test]
    fn nearest_symmetric_matches_rotation_grid() {
        let p = ParabolaCone::diagonal(&[0.6, 0.4]).unwrap();
        let mut best = f64::INFINITY;
        for k in 1..=2 {
            for i in 0..720 {
                let a = std::f64::consts::PI * i as f64 / 720.0;
                let r = DMatrix::from_row_slice(2, 2, &[a.cos(), -a.sin(), a.sin(), a.cos()]);
                let q = SymmetricCone::new(k, r).unwrap();
                let mut sup: f64 = 0.0;
                for j in 0..720 {
                    let th = std::f64::consts::TAU * j as f64 / 720.0;
                    let x = [th.cos(), th.sin()];
                    sup = sup.max((p.eval(&x).unwrap() - q.eval(&x).unwrap()).abs());
                }
                best = best.min(sup);
            }
        }
        assert!((best - 0.05).abs() < 1e-6, "brute force {best}");
    }

    fn sampled_sup(a: &ParabolaCone, b: &ParabolaCone) -> f64 {
        let mut sup: f64 = 0.0;
        for j in 0..100_000 {
            let th = std::f64::consts::TAU * j as f64 / 100_000.0;
            let x = [th.cos(), th.sin()];
            sup = sup.max((a.eval(&x).unwrap() - b.eval(&x).unwrap()).abs());
        }
        sup
    }

    #[test]
    fn linf_distance_examples() {
        let a = ParabolaCone::diagonal(&[1.0, 0.0]).unwrap();
        let b = ParabolaCone::diagonal(&[0.0, 1.0]).unwrap();
        assert_eq!(linf_distance_quadratics(&a, &a).unwrap(), 0.0);
        let d = linf_distance_quadratics(&a, &b).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        assert!((d - sampled_sup(&a, &b)).abs() < 1e-9);
        let c = ParabolaCone::diagonal(&[0.6, 0.4]).unwrap();
        let r = ParabolaCone::radial(2);
        let d = c.linf_distance(&r).unwrap();
        assert!((d - 0.05).abs() < 1e-15);
        assert!((d - sampled_sup(&c, &r)).abs() < 1e-9);
        assert!(c.linf_distance(&ParabolaCone::radial(3)).is_err());
    }

    #[test]
    fn flat_cone_examples() {
        let one = make_exponent(1.0).unwrap();
        assert_eq!(flat_cone_eval(&one, &[1.0, 0.0], &[1.0, 0.3]).unwrap(), 0.5);
        let half = make_exponent(0.5).unwrap();
        assert_eq!(flat_cone_eval(&half, &[0.0, 1.0], &[0.3, -0.1]).unwrap(), 0.0);
        let v = flat_cone_eval(&half, &[1.0], &[1.0]).unwrap();
        assert!((v - (9.0f64 / 8.0).powf(2.0 / 3.0)).abs() < 1e-15);
        assert!(flat_cone_eval(&half, &[2.0], &[1.0]).is_err());
    }

    #[test]
    fn half_space_and_symmetric_cones() {
        let h = HalfSpaceCone::obstacle(vec![0.0, 1.0]).unwrap();
        assert_eq!(h.eval(&[5.0, -0.1]).unwrap(), 0.0);
        assert_eq!(h.eval(&[5.0, 2.0]).unwrap(), 2.0);
        let p0 = SymmetricCone::standard(2, 0).unwrap();
        assert_eq!(p0.eval(&[2.0, 1.0]).unwrap(), 2.0);
        assert_eq!(p0.eval(&[-2.0, 1.0]).unwrap(), 0.0);
        let p2 = SymmetricCone::standard(3, 2).unwrap();
        let cone = p2.to_parabola().unwrap();
        let spec = cone.eigenvalues();
        assert!((spec[0] - 0.5).abs() < 1e-15 && (spec[1] - 0.5).abs() < 1e-15);
        assert!(spec[2].abs() < 1e-15);
        assert!(p0.to_parabola().is_none());
    }

    #[test]
    fn text_round_trip() {
        let p = ParabolaCone::from_spectrum(
            &[0.5, 0.3, 0.2],
            &DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.6, 0.0, 0.8, 0.8, 0.0, -0.6]),
        )
        .unwrap();
        let back = ParabolaCone::from_text(3, &p.to_text()).unwrap();
        assert_eq!(back.matrix(), p.matrix());
    }
}
