use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::cone::{Exponent, FlatCone, HalfSpaceCone, ParabolaCone, SymmetricCone};
use crate::error::{Error, Result};
use crate::quadrature::{QuadEstimate, RulePair, SphereRule, ROUNDOFF_FACTOR};

use super::grid::{GridField, NodeKind, MAX_GRID_DIM};

/// Free-boundary threshold `10 h²`.
pub fn default_threshold(h: f64) -> f64 {
    10.0 * h * h
}

fn laplacian(field: &GridField, i: usize) -> f64 {
    let g = field.grid();
    let u = field.values();
    let mut s = 0.0;
    for axis in 0..g.dim() {
        let st = g.stride(axis);
        s += u[i + st] + u[i - st] - 2.0 * u[i];
    }
    s / (g.h() * g.h())
}

fn central_gradient_sq(field: &GridField, i: usize) -> f64 {
    let g = field.grid();
    let u = field.values();
    (0..g.dim())
        .map(|axis| {
            let st = g.stride(axis);
            ((u[i + st] - u[i - st]) / (2.0 * g.h())).powi(2)
        })
        .sum()
}

/// `sup |Δ_h u - γ u^{γ-1}|` over interior nodes with `u > threshold`.
pub fn el_residual(field: &GridField, exp: &Exponent, threshold: f64) -> f64 {
    let u = field.values();
    field
        .grid()
        .interior()
        .iter()
        .filter(|&&i| u[i] > threshold)
        .map(|&i| (laplacian(field, i) - exp.gamma() * u[i].powf(exp.gamma() - 1.0)).abs())
        .fold(0.0, f64::max)
}

/// Pointwise `u = v^{2/β} / (γ(2-γ))`.
pub fn transform_field(v: &GridField, exp: &Exponent) -> GridField {
    v.map(|x| exp.transform(x))
}

/// `sup |Δ_h u + ((β-2)/2) |∇_h u|²/u - 1|` over interior nodes with `u > threshold`.
pub fn transformed_residual(u: &GridField, exp: &Exponent, threshold: f64) -> f64 {
    let vals = u.values();
    let c = (exp.beta() - 2.0) / 2.0;
    u.grid()
        .interior()
        .iter()
        .filter(|&&i| vals[i] > threshold)
        .map(|&i| (laplacian(u, i) + c * central_gradient_sq(u, i) / vals[i] - 1.0).abs())
        .fold(0.0, f64::max)
}

/// `max |r^{-β} u(r x) - u(x)|` for `r ∈ {1/4, 1/2}` over nodes with
/// `|x| <= 1/2` whose image `r x` is itself a node.
pub fn homogeneity_defect(field: &GridField, beta: f64) -> f64 {
    let g = field.grid();
    let u = field.values();
    let c = g.center() as i64;
    let mut worst: f64 = 0.0;
    for i in g.active() {
        let x = g.point(i);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 > 0.25 + 1e-12 {
            continue;
        }
        let m = g.multi_index(i);
        for (scale, r) in [(4i64, 0.25f64), (2, 0.5)] {
            let mut scaled = [0i64; MAX_GRID_DIM];
            let mut aligned = true;
            for axis in 0..g.dim() {
                let off = m[axis] as i64 - c;
                if off % scale != 0 {
                    aligned = false;
                    break;
                }
                scaled[axis] = c + off / scale;
            }
            if !aligned {
                continue;
            }
            let j = g.flat_index(&scaled[..g.dim()]).expect("scaled node lies in the grid");
            worst = worst.max((r.powf(-beta) * u[j] - u[i]).abs());
        }
    }
    worst
}

/// Fraction of interior nodes with `u <= threshold`.
pub fn contact_fraction(field: &GridField, threshold: f64) -> f64 {
    let interior = field.grid().interior();
    if interior.is_empty() {
        return 0.0;
    }
    let u = field.values();
    interior.iter().filter(|&&i| u[i] <= threshold).count() as f64 / interior.len() as f64
}

/// Anything that can be compared with a field pointwise.
pub trait ConeFunction {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
}

impl ConeFunction for ParabolaCone {
    fn dim(&self) -> usize {
        ParabolaCone::dim(self)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x).expect("dimension checked by caller")
    }
}

impl ConeFunction for SymmetricCone {
    fn dim(&self) -> usize {
        SymmetricCone::dim(self)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x).expect("dimension checked by caller")
    }
}

impl ConeFunction for FlatCone {
    fn dim(&self) -> usize {
        FlatCone::dim(self)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x).expect("dimension checked by caller")
    }
}

impl ConeFunction for HalfSpaceCone {
    fn dim(&self) -> usize {
        HalfSpaceCone::dim(self)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x).expect("dimension checked by caller")
    }
}

/// `max |field - cone|` over interior and Dirichlet nodes.
pub fn linf_distance_to_cone(field: &GridField, cone: &dyn ConeFunction) -> Result<f64> {
    let g = field.grid();
    if cone.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: cone.dim(),
        });
    }
    let u = field.values();
    Ok(g.active()
        .map(|i| {
            let x = g.point(i);
            (u[i] - cone.value(&x[..g.dim()])).abs()
        })
        .fold(0.0, f64::max))
}

/// Multilinear interpolation of a field and of its nodal finite-difference
/// gradient (central where both neighbours are in the ball, one-sided otherwise).
#[derive(Debug, Clone)]
pub struct FieldInterpolator<'a> {
    field: &'a GridField,
    gradient: Vec<[f64; MAX_GRID_DIM]>,
}

impl<'a> FieldInterpolator<'a> {
    pub fn new(field: &'a GridField) -> Self {
        let g = field.grid();
        let u = field.values();
        let h = g.h();
        let n = g.n();
        let mut gradient = vec![[0.0; MAX_GRID_DIM]; g.len()];
        for i in g.active() {
            let m = g.multi_index(i);
            for axis in 0..g.dim() {
                let st = g.stride(axis);
                let back = m[axis] > 0 && g.kind(i - st) != NodeKind::Exterior;
                let fwd = m[axis] + 1 < n && g.kind(i + st) != NodeKind::Exterior;
                gradient[i][axis] = match (back, fwd) {
                    (true, true) => (u[i + st] - u[i - st]) / (2.0 * h),
                    (true, false) => (u[i] - u[i - st]) / h,
                    (false, true) => (u[i + st] - u[i]) / h,
                    (false, false) => 0.0,
                };
            }
        }
        Self { field, gradient }
    }

    fn corners(&self, x: &[f64]) -> ([usize; 8], [f64; 8], usize) {
        let g = self.field.grid();
        let d = g.dim();
        let h = g.h();
        let mut base = [0usize; MAX_GRID_DIM];
        let mut frac = [0.0; MAX_GRID_DIM];
        for axis in 0..d {
            let s = (x[axis] + 1.0) / h;
            let i0 = (s.floor().max(0.0) as usize).min(g.n() - 2);
            base[axis] = i0;
            frac[axis] = (s - i0 as f64).clamp(0.0, 1.0);
        }
        let count = 1 << d;
        let mut idx = [0usize; 8];
        let mut w = [0.0; 8];
        for corner in 0..count {
            let mut flat = 0;
            let mut weight = 1.0;
            for axis in 0..d {
                let bit = (corner >> axis) & 1;
                flat += (base[axis] + bit) * g.stride(axis);
                weight *= if bit == 1 { frac[axis] } else { 1.0 - frac[axis] };
            }
            idx[corner] = flat;
            w[corner] = weight;
        }
        (idx, w, count)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let (idx, w, count) = self.corners(x);
        let u = self.field.values();
        (0..count).map(|c| w[c] * u[idx[c]]).sum()
    }

    pub fn gradient(&self, x: &[f64]) -> [f64; MAX_GRID_DIM] {
        let (idx, w, count) = self.corners(x);
        let mut out = [0.0; MAX_GRID_DIM];
        for c in 0..count {
            for (o, gv) in out.iter_mut().zip(&self.gradient[idx[c]]) {
                *o += w[c] * gv;
            }
        }
        out
    }
}

/// Both sides of the sphere identity
/// `((2-β)/2) ∫ (|∇u|²/u)(p - |x|²/2d) = ∫ (p - |x|²/2d) χ_{u=0}`.
#[derive(Debug, Clone, Copy)]
pub struct GreenIdentity {
    pub lhs: QuadEstimate,
    pub rhs: QuadEstimate,
    /// Radius of the sphere on which `u` was sampled.
    pub radius: f64,
}

impl GreenIdentity {
    pub fn gap(&self) -> f64 {
        (self.lhs.value - self.rhs.value).abs()
    }

    pub fn quad_error(&self) -> f64 {
        self.lhs.error + self.rhs.error
    }
}

fn green_terms(
    interp: &FieldInterpolator<'_>,
    p: &ParabolaCone,
    exp: &Exponent,
    radius: f64,
    threshold: f64,
    xi: &[f64],
) -> [f64; 4] {
    let d = xi.len();
    let mut y = [0.0; MAX_GRID_DIM];
    for (yk, xk) in y.iter_mut().zip(xi) {
        *yk = radius * xk;
    }
    let weight = p.eval(xi).expect("dimension checked") - 0.5 / d as f64;
    let u = interp.value(&y[..d]);
    if u <= threshold {
        return [0.0, 0.0, weight, weight.abs()];
    }
    let grad = interp.gradient(&y[..d]);
    let g2: f64 = grad[..d].iter().map(|v| v * v).sum();
    let lhs = 0.5 * (2.0 - exp.beta()) * g2 / u * weight;
    [lhs, lhs.abs(), 0.0, 0.0]
}

fn green_setup(u: &GridField, p: &ParabolaCone, exp: &Exponent, d_rule: usize) -> Result<(f64, f64)> {
    if exp.is_obstacle() {
        return Err(Error::VacuousGreenIdentity);
    }
    if p.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            got: p.dim(),
        });
    }
    if d_rule != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            got: d_rule,
        });
    }
    Ok((1.0 - 2.0 * u.h(), default_threshold(u.h())))
}

/// Sides of the identity on one rule, sampled on the sphere of radius `1 - 2h`.
pub fn green_identity_check(
    u: &GridField,
    p: &ParabolaCone,
    exp: &Exponent,
    rule: &SphereRule,
) -> Result<(f64, f64)> {
    let (radius, threshold) = green_setup(u, p, exp, rule.dim())?;
    let interp = FieldInterpolator::new(u);
    let [lhs, _, rhs, _] = rule.integrate_many::<4>(|xi| green_terms(&interp, p, exp, radius, threshold, xi));
    Ok((lhs, rhs))
}

/// Two-level version of [`green_identity_check`].
pub fn green_identity_estimate(
    u: &GridField,
    p: &ParabolaCone,
    exp: &Exponent,
    pair: &RulePair,
) -> Result<GreenIdentity> {
    let (radius, threshold) = green_setup(u, p, exp, pair.dim())?;
    let interp = FieldInterpolator::new(u);
    let (lo, hi) = pair.integrate_both::<4>(|xi| green_terms(&interp, p, exp, radius, threshold, xi));
    let est = |k: usize| QuadEstimate {
        value: hi[k],
        error: (hi[k] - lo[k]).abs() + ROUNDOFF_FACTOR * hi[k + 1],
    };
    Ok(GreenIdentity {
        lhs: est(0),
        rhs: est(2),
        radius,
    })
}

/// Least-squares Hessian `H` of `u ≈ ½ x·Hx` over active nodes with `|x| <= radius`.
pub fn quadratic_fit(field: &GridField, radius: f64) -> Result<DMatrix<f64>> {
    let g = field.grid();
    let d = g.dim();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    let p = pairs.len();
    let mut normal = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut rows = 0usize;
    let u = field.values();
    let mut feat = vec![0.0; p];
    for i in g.active() {
        let x = g.point(i);
        if x[..d].iter().map(|v| v * v).sum::<f64>() > radius * radius + 1e-12 {
            continue;
        }
        rows += 1;
        for (f, &(a, b)) in feat.iter_mut().zip(&pairs) {
            *f = if a == b { 0.5 * x[a] * x[a] } else { x[a] * x[b] };
        }
        for r in 0..p {
            rhs[r] += feat[r] * u[i];
            for c in 0..p {
                normal[(r, c)] += feat[r] * feat[c];
            }
        }
    }
    if rows < p {
        return Err(Error::InvalidGrid(format!(
            "only {rows} nodes inside radius {radius} for a {p}-parameter fit"
        )));
    }
    let coef = normal
        .cholesky()
        .ok_or_else(|| Error::InvalidGrid("degenerate quadratic fit".into()))?
        .solve(&rhs);
    let mut h = DMatrix::zeros(d, d);
    for (c, &(a, b)) in coef.iter().zip(&pairs) {
        h[(a, b)] = *c;
        h[(b, a)] = *c;
    }
    Ok(h)
}

/// Distances from a field to the aligned symmetric cones.
#[derive(Debug, Clone)]
pub struct SymmetricDistance {
    /// `distances[k]` for `k = 0..=d`; `k = 0` is the better of the two signs.
    pub distances: Vec<f64>,
    pub k_best: usize,
    pub dist_best: f64,
    /// Rows are the fitted principal directions, largest curvature first.
    pub rotation: DMatrix<f64>,
}

/// Aligns `P_0, …, P_d` to the eigenbasis of the fitted Hessian on `|x| <= 1/2`
/// and measures each against the field.
pub fn symmetric_distance(field: &GridField) -> Result<SymmetricDistance> {
    let d = field.dim();
    let hess = quadratic_fit(field, 0.5)?;
    let eig = SymmetricEigen::new(hess);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let rotation = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(c, order[r])]);
    let mut distances = Vec::with_capacity(d + 1);
    let mut flipped = rotation.clone();
    for c in 0..d {
        flipped[(0, c)] = -flipped[(0, c)];
    }
    let half_plus = linf_distance_to_cone(field, &SymmetricCone::new(0, rotation.clone())?)?;
    let half_minus = linf_distance_to_cone(field, &SymmetricCone::new(0, flipped)?)?;
    distances.push(half_plus.min(half_minus));
    for k in 1..=d {
        distances.push(linf_distance_to_cone(field, &SymmetricCone::new(k, rotation.clone())?)?);
    }
    let (k_best, dist_best) = distances
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (k, v)| if v < best.1 { (k, v) } else { best });
    Ok(SymmetricDistance {
        distances,
        k_best,
        dist_best,
        rotation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::make_exponent;
    use crate::quadrature::RuleKind;
    use crate::solver::grid::Grid;

    fn p2(g: &Grid) -> GridField {
        GridField::sample(g.clone(), |x| 0.25 * (x[0] * x[0] + x[1] * x[1])).unwrap()
    }

    #[test]
    fn residuals_vanish_on_exact_cones() {
        let one = make_exponent(1.0).unwrap();
        let g = Grid::new(2, 41).unwrap();
        let f = p2(&g);
        let thr = default_threshold(g.h());
        assert!(el_residual(&f, &one, thr) <= 1e-10);
        assert!(transformed_residual(&f, &one, thr) <= 1e-10);
        let g1 = Grid::new(1, 41).unwrap();
        let flat = GridField::sample(g1, |x| 0.5 * x[0].max(0.0).powi(2)).unwrap();
        assert!(el_residual(&flat, &one, default_threshold(0.05)) <= 1e-10);
    }

    #[test]
    fn transformed_flat_cone_identity() {
        for gamma in [0.6, 0.8, 1.2, 1.4] {
            let exp = make_exponent(gamma).unwrap();
            let g = Grid::new(2, 41).unwrap();
            let a = exp.transformed_flat_scale();
            let u = GridField::sample(g.clone(), |x| a * x[0].max(0.0).powi(2)).unwrap();
            assert!(transformed_residual(&u, &exp, default_threshold(g.h())) <= 1e-10);
        }
    }

    #[test]
    fn transform_examples() {
        let g = Grid::new(1, 21).unwrap();
        let exp = make_exponent(0.7).unwrap();
        let v = GridField::sample(g.clone(), |x| exp.c_gamma() * x[0].max(0.0).powf(exp.beta())).unwrap();
        let u = transform_field(&v, &exp);
        let a = exp.transformed_flat_scale();
        for i in 0..g.len() {
            let x = g.point(i)[0];
            assert!((u.values()[i] - a * x.max(0.0).powi(2)).abs() < 1e-14);
        }
        let one = make_exponent(1.0).unwrap();
        assert_eq!(transform_field(&v, &one), v);
        let zero = GridField::zeros(g);
        assert_eq!(transform_field(&zero, &exp), zero);
    }

    #[test]
    fn homogeneity_of_exact_cones() {
        let g = Grid::new(2, 81).unwrap();
        assert!(homogeneity_defect(&p2(&g), 2.0) <= 1e-10);
        let exp = make_exponent(0.8).unwrap();
        let flat = GridField::sample(g.clone(), |x| exp.c_gamma() * x[0].max(0.0).powf(exp.beta())).unwrap();
        assert!(homogeneity_defect(&flat, exp.beta()) <= 1e-12);
        let bumpy = GridField::sample(g, |x| 0.25 * (x[0] * x[0] + x[1] * x[1]) + 0.01).unwrap();
        assert!(homogeneity_defect(&bumpy, 2.0) > 0.01);
    }

    #[test]
    fn contact_fraction_examples() {
        let g = Grid::new(2, 101).unwrap();
        let thr = default_threshold(g.h());
        assert!(contact_fraction(&p2(&g), thr) < 0.03);
        let half = GridField::sample(g.clone(), |x| 0.5 * x[0].max(0.0).powi(2)).unwrap();
        let frac = contact_fraction(&half, thr);
        assert!(frac > 0.5 && frac < 0.65, "{frac}");
    }

    #[test]
    fn distances_to_symmetric_cones() {
        let g = Grid::new(2, 41).unwrap();
        let f = p2(&g);
        let k2 = SymmetricCone::standard(2, 2).unwrap();
        assert!(linf_distance_to_cone(&f, &k2).unwrap() < 1e-15);
        let k1 = SymmetricCone::standard(2, 1).unwrap();
        assert!((linf_distance_to_cone(&f, &k1).unwrap() - 0.25).abs() < 1e-12);
        let fit = symmetric_distance(&f).unwrap();
        assert_eq!(fit.k_best, 2);
        assert!(fit.dist_best < 1e-12);
        assert!(linf_distance_to_cone(&f, &ParabolaCone::radial(3)).is_err());
    }

    #[test]
    fn rotated_half_space_is_found() {
        let g = Grid::new(2, 61).unwrap();
        let e = [0.6, -0.8];
        let f = GridField::sample(g, |x| 0.5 * (x[0] * e[0] + x[1] * e[1]).max(0.0).powi(2)).unwrap();
        let fit = symmetric_distance(&f).unwrap();
        assert_eq!(fit.k_best, 0);
        assert!(fit.dist_best < 1e-10, "{:?}", fit.distances);
    }

    #[test]
    fn green_identity_rejects_obstacle_case() {
        let g = Grid::new(2, 21).unwrap();
        let rule = SphereRule::build(2, 8).unwrap();
        let err = green_identity_check(&p2(&g), &ParabolaCone::radial(2), &make_exponent(1.0).unwrap(), &rule);
        assert!(matches!(err, Err(Error::VacuousGreenIdentity)));
    }

    #[test]
    fn green_identity_on_transformed_flat_cone() {
        // u = a (x_1)_+², p = P_1: both sides are ∫_{x_1<0} (x_1²/2 - 1/4) on the
        // circle up to the factor relating them; here the lhs integrand vanishes
        // on the contact side and the rhs integrand vanishes on the positive side.
        let exp = make_exponent(0.8).unwrap();
        let a = exp.transformed_flat_scale();
        let pair = RulePair::new(2, 64, RuleKind::Uniform).unwrap();
        let p = ParabolaCone::diagonal(&[1.0, 0.0]).unwrap();
        let mut gaps = Vec::new();
        for n in [101, 201] {
            let g = Grid::new(2, n).unwrap();
            let u = GridField::sample(g.clone(), |x| a * x[0].max(0.0).powi(2)).unwrap();
            let id = green_identity_estimate(&u, &p, &exp, &pair).unwrap();
            gaps.push(id.gap());
            assert!(id.gap() <= 5.0 * (g.h() + id.quad_error()));
        }
        assert!(gaps[1] < gaps[0]);
    }
}
