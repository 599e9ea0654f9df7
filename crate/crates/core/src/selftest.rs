use std::f64::consts::PI;

use crate::cone::{make_exponent, HalfSpaceCone, ParabolaCone, SymmetricCone};
use crate::inequality::{random_parabola, Family};
use crate::quadrature::{sphere_area, wallis, SphereRule, MAX_DIM};
use crate::report::Check;
use crate::solver::{default_threshold, el_residual, linf_distance_to_cone, transformed_residual, Grid, GridField};

const MOMENT_TOL: f64 = 1e-8;
const WALLIS_TOL: f64 = 1e-14;
const RESIDUAL_TOL: f64 = 1e-10;

/// Built-in consistency checks over a set of sphere rules.
#[derive(Debug, Clone)]
pub struct SelfTest {
    rules: Vec<SphereRule>,
}

impl SelfTest {
    /// Level-8 rules in every supported dimension.
    pub fn standard() -> Self {
        let rules = (1..=MAX_DIM)
            .map(|d| SphereRule::build(d, 8).expect("level 8 is supported"))
            .collect();
        Self { rules }
    }

    pub fn with_rules(rules: Vec<SphereRule>) -> Self {
        Self { rules }
    }

    pub fn run(&self) -> Vec<Check> {
        let mut checks = Vec::new();
        checks.push(self.sum_of_weights());
        checks.push(self.even_moments());
        checks.push(self.odd_moments());
        checks.extend(wallis_checks());
        checks.extend(cone_checks());
        checks.extend(exact_cone_residuals());
        checks
    }

    fn sum_of_weights(&self) -> Check {
        let mut worst: f64 = 0.0;
        let mut detail = String::new();
        for rule in &self.rules {
            let area = sphere_area(rule.dim());
            let rel = (rule.integrate(|_| 1.0) - area).abs() / area;
            if rel > worst {
                worst = rel;
                detail = format!("d = {}: relative error {rel:.3e}", rule.dim());
            }
        }
        Check::new("sum-of-weights", worst <= MOMENT_TOL, detail)
    }

    /// `∫ x_i² = |S|/d`, `∫ x_i⁴ = 3|S|/(d(d+2))`, `∫ x_i² x_j² = |S|/(d(d+2))`.
    fn even_moments(&self) -> Check {
        let mut worst: f64 = 0.0;
        let mut detail = String::new();
        for rule in self.rules.iter().filter(|r| r.exactness_degree() >= 4 && r.dim() >= 2) {
            let d = rule.dim() as f64;
            let area = sphere_area(rule.dim());
            let cases = [
                (rule.integrate(|x| x[0] * x[0]), area / d),
                (rule.integrate(|x| x[1].powi(4)), 3.0 * area / (d * (d + 2.0))),
                (rule.integrate(|x| x[0] * x[0] * x[1] * x[1]), area / (d * (d + 2.0))),
            ];
            for (got, want) in cases {
                let rel = (got - want).abs() / want;
                if rel > worst {
                    worst = rel;
                    detail = format!("d = {}: relative error {rel:.3e}", rule.dim());
                }
            }
        }
        Check::new("even-moments", worst <= MOMENT_TOL, detail)
    }

    fn odd_moments(&self) -> Check {
        let mut worst: f64 = 0.0;
        for rule in &self.rules {
            worst = worst.max(rule.integrate(|x| x[0]).abs());
            worst = worst.max(rule.integrate(|x| x[0].powi(3) * x.last().unwrap().powi(2)).abs());
        }
        Check::new("odd-moments", worst <= 1e-10, format!("largest |integral| {worst:.3e}"))
    }
}

fn wallis_checks() -> Vec<Check> {
    let w0 = wallis(0).expect("m = 0");
    let w2 = wallis(2).expect("m = 2");
    let base = (w0 - PI).abs() <= 1e-15 && (w2 - PI / 2.0).abs() <= 1e-15;
    let mut worst: f64 = 0.0;
    for m in 2..=12 {
        let lhs = wallis(m).expect("m >= 0");
        let rhs = (m as f64 - 1.0) / m as f64 * wallis(m - 2).expect("m >= 0");
        worst = worst.max((lhs - rhs).abs() / rhs);
    }
    vec![
        Check::new("wallis-base", base, format!("W_0 = {w0:.17}, W_2 = {w2:.17}")),
        Check::new(
            "wallis-recursion",
            worst <= WALLIS_TOL,
            format!("largest relative defect {worst:.3e}"),
        ),
    ]
}

fn cone_checks() -> Vec<Check> {
    let mut exponent_defect: f64 = 0.0;
    for k in 0..=20 {
        let gamma = 0.5 + k as f64 / 20.0;
        let e = make_exponent(gamma).expect("gamma in range");
        let want = (2.0 - gamma).powi(2) / 2.0;
        exponent_defect = exponent_defect.max((e.c_gamma().powf(2.0 - gamma) - want).abs() / want);
    }
    let mut spectrum_ok = true;
    for d in 1..=MAX_DIM {
        for k in 1..=d {
            let p = ParabolaCone::symmetric(d, k).expect("valid k");
            let ev = p.eigenvalues();
            let ones = ev.iter().filter(|&&v| (v - 1.0 / k as f64).abs() <= 1e-12).count();
            let zeros = ev.iter().filter(|&&v| v.abs() <= 1e-12).count();
            spectrum_ok &= ones == k && zeros == d - k;
            let fit = p.nearest_symmetric();
            spectrum_ok &= fit.k == k && fit.distance <= 1e-12;
        }
    }
    let mut t_bar_ok = true;
    for seed in 0..20 {
        let p = random_parabola(3, seed, Family::Interior).expect("valid sample");
        let t = p.t_bar();
        t_bar_ok &= t.is_finite() && t.value() > 1.0;
        if let Some(tb) = t.finite() {
            let at_end = p.interpolate(tb);
            t_bar_ok &= at_end.is_valid() && at_end.eigenvalues().last().is_some_and(|v| v.abs() <= 1e-10);
        }
    }
    vec![
        Check::new(
            "exponent-invariants",
            exponent_defect <= 1e-12,
            format!("largest relative defect {exponent_defect:.3e}"),
        ),
        Check::new("symmetric-cone-spectrum", spectrum_ok, "P_k eigenvalues and self-classification"),
        Check::new("t-bar-degeneracy", t_bar_ok, "p_t at t_bar has a kernel direction"),
    ]
}

fn exact_cone_residuals() -> Vec<Check> {
    let one = make_exponent(1.0).expect("gamma = 1");
    let grid = Grid::new(2, 41).expect("valid grid");
    let thr = default_threshold(grid.h());
    let p2 = GridField::sample(grid.clone(), |x| 0.25 * (x[0] * x[0] + x[1] * x[1])).expect("nonnegative");
    let k2 = SymmetricCone::standard(2, 2).expect("valid cone");
    let mut worst = el_residual(&p2, &one, thr)
        .max(transformed_residual(&p2, &one, thr))
        .max(linf_distance_to_cone(&p2, &k2).expect("dims match"));
    let half = HalfSpaceCone::obstacle(vec![1.0, 0.0]).expect("unit direction");
    let flat = GridField::sample(grid, |x| half.eval(x).expect("dims match")).expect("nonnegative");
    worst = worst.max(el_residual(&flat, &one, thr));
    vec![Check::new(
        "exact-cone-residual",
        worst <= RESIDUAL_TOL,
        format!("largest residual {worst:.3e}"),
    )]
}
