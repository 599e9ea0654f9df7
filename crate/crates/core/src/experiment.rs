use rayon::prelude::*;

use crate::cone::{make_exponent, ParabolaCone};
use crate::error::{Error, Result};
use crate::inequality::{random_parabola_from, rng_for, verify_inequality, Family, QCurve};
use crate::quadrature::{RuleKind, RulePair, MAX_DIM};
use crate::report::{join_floats, Cell, Check, RunReport};
use crate::selftest::SelfTest;
use crate::solver::{
    contact_fraction, default_threshold, discrete_energy, el_residual, green_identity_estimate,
    homogeneity_defect, minimize, symmetric_distance, transform_field, BoundarySpec, Grid, GridField,
    SolverConfig,
};

pub const VERIFY_COLUMNS: [&str; 8] = [
    "sample_id",
    "eigenvalues",
    "Q1",
    "quad_error",
    "margin",
    "nearest_k",
    "dist_to_SP",
    "anomaly",
];
pub const Q_CURVE_COLUMNS: [&str; 6] = ["t", "Q_direct", "Q_expanded", "q", "q_dd_formula", "q_dd_finite_diff"];
pub const SOLVE_COLUMNS: [&str; 7] = [
    "gamma",
    "n",
    "energy",
    "el_residual",
    "homogeneity_defect",
    "contact_fraction",
    "converged",
];
pub const CONCENTRATE_COLUMNS: [&str; 8] = [
    "gamma",
    "beta",
    "dist_best",
    "k_best",
    "green_lhs",
    "green_rhs",
    "el_residual",
    "contact_fraction",
];

/// Rule level of the Green-identity quadrature in `concentrate`.
pub const GREEN_LEVEL: usize = 64;

/// Inputs of `verify-inequality`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub dim: usize,
    pub samples: u64,
    pub level: usize,
    pub seed: u64,
    pub family: Family,
}

/// Which parabola a `q-curve` run follows.
#[derive(Debug, Clone, PartialEq)]
pub enum ConeSource {
    Spec(BoundarySpec),
    Random { seed: u64, family: Family },
}

fn check_inequality_dim(dim: usize) -> Result<()> {
    if !(2..=MAX_DIM).contains(&dim) {
        return Err(Error::InvalidConfig(format!("dimension must lie in 2..={MAX_DIM}, got {dim}")));
    }
    Ok(())
}

pub fn cmd_selftest() -> RunReport {
    selftest_report(&SelfTest::standard())
}

pub fn selftest_report(suite: &SelfTest) -> RunReport {
    let mut report = RunReport::new("selftest", 0, 0, &["check", "passed", "detail"]);
    for check in suite.run() {
        report.push_row(vec![check.name.as_str().into(), check.passed.into(), check.detail.as_str().into()]);
        report.check(check);
    }
    report
}

/// Samples `samples` cones of one family and checks the main inequality on each.
pub fn cmd_verify_inequality(opts: &VerifyOptions) -> Result<RunReport> {
    check_inequality_dim(opts.dim)?;
    let pair = RulePair::new(opts.dim, opts.level, RuleKind::Graded)?;
    let mut report = RunReport::new("verify-inequality", opts.seed, opts.dim, &VERIFY_COLUMNS);
    report
        .param("family", opts.family.name())
        .param("level", opts.level)
        .param("samples", opts.samples);
    let verdicts: Vec<_> = (0..opts.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(opts.seed, i);
            let cone = random_parabola_from(opts.dim, &mut rng, opts.family)?;
            verify_inequality(&cone, &pair).map(|v| (i, v))
        })
        .collect::<Result<_>>()?;
    for (i, v) in verdicts {
        report.push_row(vec![
            i.into(),
            join_floats(v.cone.eigenvalues()).into(),
            v.q1.into(),
            v.quad_error.into(),
            v.margin.into(),
            v.nearest_k.into(),
            v.dist_to_sp.into(),
            v.anomaly.into(),
        ]);
        if v.violates() {
            report.summary.fail_count += 1;
        } else {
            report.summary.pass_count += 1;
        }
        if v.anomaly {
            report.summary.anomaly_count += 1;
        }
    }
    Ok(report)
}

fn resolve_parabola(source: &ConeSource, dim: usize) -> Result<ParabolaCone> {
    match source {
        ConeSource::Spec(BoundarySpec::Flat(_)) => Err(Error::Parse(
            "q-curve needs a parabola (parabola:… or symmetric:k), not flat data".into(),
        )),
        ConeSource::Spec(spec) => Ok(spec.resolve(dim)?.reference_parabola()),
        ConeSource::Random { seed, family } => random_parabola_from(dim, &mut rng_for(*seed, 0), *family),
    }
}

/// Scans `q` over the concavity grid of one cone and checks the curve invariants.
pub fn cmd_q_curve(dim: usize, source: &ConeSource, level: usize, t_points: usize) -> Result<RunReport> {
    check_inequality_dim(dim)?;
    if t_points < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 t-points, got {t_points}")));
    }
    let cone = resolve_parabola(source, dim)?;
    let pair = RulePair::new(dim, level, RuleKind::Graded)?;
    let curve = QCurve::compute(&cone, &pair, t_points)?;
    let seed = match source {
        ConeSource::Random { seed, .. } => *seed,
        ConeSource::Spec(_) => 0,
    };
    let mut report = RunReport::new("q-curve", seed, dim, &Q_CURVE_COLUMNS);
    report
        .param("eigenvalues", join_floats(cone.eigenvalues()))
        .param("level", level)
        .param("t_bar", Cell::from(curve.t_bar.value()).render())
        .param("t_points", t_points);
    for p in &curve.points {
        report.push_row(vec![
            p.t.into(),
            p.q_direct.value.into(),
            p.q_expanded.value.into(),
            p.q.value.into(),
            p.q_dd_formula.value.into(),
            p.q_dd_finite_diff.into(),
        ]);
    }
    report.check(Check::new(
        "formula-equivalence",
        curve.formulas_agree(),
        "|Q_direct - Q_expanded| <= 10 quad_error",
    ));
    report.check(Check::new("concavity", curve.is_concave(), "q'' <= 10 quad_error"));
    report.check(Check::new(
        "curvature-consistency",
        curve.curvature_matches(),
        "formula and finite difference agree away from the endpoints",
    ));
    report.check(Check::new(
        "endpoint-signs",
        curve.endpoints_nonnegative(),
        format!(
            "q(0) = {:.6e}, q(t_bar) = {}",
            curve.q_start.value,
            curve.q_end.map_or("n/a".to_string(), |e| format!("{:.6e}", e.value))
        ),
    ));
    report.check(Check::new("chord", curve.chord_holds(), "q stays above the smaller endpoint"));
    Ok(report)
}

fn check_solver_dim(dim: usize, allowed: std::ops::RangeInclusive<usize>) -> Result<()> {
    if !allowed.contains(&dim) {
        return Err(Error::InvalidConfig(format!(
            "dimension must lie in {}..={}, got {dim}",
            allowed.start(),
            allowed.end()
        )));
    }
    Ok(())
}

/// Solves one Dirichlet problem; returns the diagnostics row and the field.
pub fn cmd_solve(dim: usize, gamma: f64, n: usize, boundary: &BoundarySpec) -> Result<(RunReport, GridField)> {
    check_solver_dim(dim, 1..=3)?;
    let exp = make_exponent(gamma)?;
    let resolved = boundary.resolve(dim)?;
    let grid = Grid::new(dim, n)?;
    let solution = minimize(&grid, |x| resolved.data(&exp, x), &SolverConfig::new(exp))?;
    let field = solution.field;
    let diag = solution.diagnostics;
    let thr = default_threshold(grid.h());
    let mut report = RunReport::new("solve", 0, dim, &SOLVE_COLUMNS);
    report
        .param("boundary", boundary)
        .param("gamma", gamma)
        .param("n", n)
        .param("sweeps", format!("{:?}", diag.sweeps))
        .param("final_residual", format!("{:.6e}", diag.final_residual));
    report.push_row(vec![
        gamma.into(),
        n.into(),
        discrete_energy(&field, &exp).into(),
        el_residual(&field, &exp, thr).into(),
        homogeneity_defect(&field, exp.beta()).into(),
        contact_fraction(&transform_field(&field, &exp), thr).into(),
        diag.converged.into(),
    ]);
    report.unconverged = !diag.converged;
    Ok((report, field))
}

struct ConcentrationRow {
    gamma: f64,
    beta: f64,
    dist_best: f64,
    k_best: usize,
    green_lhs: f64,
    green_rhs: f64,
    green_error: f64,
    el_residual: f64,
    contact_fraction: f64,
    converged: bool,
}

fn concentration_row(dim: usize, gamma: f64, n: usize, boundary: &BoundarySpec, pair: &RulePair) -> Result<ConcentrationRow> {
    let exp = make_exponent(gamma)?;
    let resolved = boundary.resolve(dim)?;
    let grid = Grid::new(dim, n)?;
    let solution = minimize(&grid, |x| resolved.data(&exp, x), &SolverConfig::new(exp))?;
    let v = solution.field;
    let u = transform_field(&v, &exp);
    let fit = symmetric_distance(&u)?;
    let green = green_identity_estimate(&u, &resolved.reference_parabola(), &exp, pair)?;
    let thr = default_threshold(grid.h());
    Ok(ConcentrationRow {
        gamma,
        beta: exp.beta(),
        dist_best: fit.dist_best,
        k_best: fit.k_best,
        green_lhs: green.lhs.value,
        green_rhs: green.rhs.value,
        green_error: green.quad_error(),
        el_residual: el_residual(&v, &exp, thr),
        contact_fraction: contact_fraction(&u, thr),
        converged: solution.diagnostics.converged,
    })
}

/// Solves for every `γ`, measures the distance of the transformed solution to
/// the symmetric cones and checks that it does not grow as `γ → 1` on each side.
pub fn cmd_concentrate(dim: usize, gammas: &[f64], n: usize, boundary: &BoundarySpec) -> Result<RunReport> {
    check_solver_dim(dim, 2..=3)?;
    if gammas.is_empty() {
        return Err(Error::InvalidConfig("empty gamma list".into()));
    }
    if let Some(g) = gammas.iter().find(|&&g| g == 1.0) {
        return Err(Error::InvalidConfig(format!("gamma = {g} is excluded from concentrate")));
    }
    for &g in gammas {
        make_exponent(g)?;
    }
    boundary.resolve(dim)?;
    Grid::new(dim, n)?;
    let pair = RulePair::new(dim, GREEN_LEVEL, RuleKind::Uniform)?;
    let rows: Vec<ConcentrationRow> = gammas
        .par_iter()
        .map(|&g| concentration_row(dim, g, n, boundary, &pair))
        .collect::<Result<_>>()?;
    let h = 2.0 / (n - 1) as f64;
    let mut report = RunReport::new("concentrate", 0, dim, &CONCENTRATE_COLUMNS);
    report
        .param("boundary", boundary)
        .param("gammas", gammas.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(","))
        .param("n", n);
    for r in &rows {
        report.push_row(vec![
            r.gamma.into(),
            r.beta.into(),
            r.dist_best.into(),
            r.k_best.into(),
            r.green_lhs.into(),
            r.green_rhs.into(),
            r.el_residual.into(),
            r.contact_fraction.into(),
        ]);
    }
    for (side, below) in [("below", true), ("above", false)] {
        let mut group: Vec<&ConcentrationRow> = rows.iter().filter(|r| (r.gamma < 1.0) == below).collect();
        if group.len() < 2 {
            continue;
        }
        group.sort_by(|a, b| (b.gamma - 1.0).abs().total_cmp(&(a.gamma - 1.0).abs()));
        let mut ok = true;
        let mut detail = Vec::new();
        for w in group.windows(2) {
            let slack = 2.0 * (h + w[0].green_error.max(w[1].green_error));
            ok &= w[1].dist_best <= w[0].dist_best + slack;
            detail.push(format!(
                "gamma {} -> {}: {:.6e} -> {:.6e} (slack {:.3e})",
                w[0].gamma, w[1].gamma, w[0].dist_best, w[1].dist_best, slack
            ));
        }
        report.check(Check::new(format!("monotone-{side}"), ok, detail.join("; ")));
    }
    report.unconverged = rows.iter().any(|r| !r.converged);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verify(samples: u64, seed: u64, family: Family) -> RunReport {
        verify_at(samples, seed, family, 16)
    }

    fn verify_at(samples: u64, seed: u64, family: Family, level: usize) -> RunReport {
        cmd_verify_inequality(&VerifyOptions {
            dim: 3,
            samples,
            level,
            seed,
            family,
        })
        .unwrap()
    }

    #[test]
    fn verify_zero_samples() {
        let r = verify(0, 1, Family::Interior);
        assert!(r.rows.is_empty());
        assert_eq!(r.outcome().exit_code(), 0);
        assert_eq!(r.csv_string().unwrap(), format!("{}\n", VERIFY_COLUMNS.join(",")));
    }

    #[test]
    fn verify_is_deterministic() {
        let a = verify(12, 5, Family::Interior).csv_string().unwrap();
        let b = verify(12, 5, Family::Interior).csv_string().unwrap();
        assert_eq!(a, b);
        assert_ne!(a, verify(12, 6, Family::Interior).csv_string().unwrap());
    }

    #[test]
    fn near_symmetric_family_is_small_but_admissible() {
        let r = verify(10, 3, Family::NearSymmetric);
        assert_eq!(r.summary.fail_count, 0);
        for row in &r.rows {
            let (Cell::Float(q1), Cell::Float(err), Cell::Float(dist), Cell::Bool(anomaly)) =
                (&row[2], &row[3], &row[6], &row[7])
            else {
                panic!()
            };
            assert!(*dist > 0.0 && *dist < 1e-2, "{dist}");
            // an unresolved small positive Q1 inside the error band is flagged, not hidden
            if *anomaly {
                assert!(*q1 > 0.0 && *q1 <= 10.0 * err);
            }
        }
    }

    #[test]
    fn verify_rejects_bad_dimension() {
        let opts = VerifyOptions {
            dim: 6,
            samples: 1,
            level: 16,
            seed: 0,
            family: Family::Interior,
        };
        assert!(cmd_verify_inequality(&opts).is_err());
    }

    #[test]
    fn q_curve_of_radial_cone_is_zero() {
        let spec: BoundarySpec = "parabola:0.5,0.5".parse().unwrap();
        let r = cmd_q_curve(2, &ConeSource::Spec(spec), 16, 9).unwrap();
        assert_eq!(r.outcome().exit_code(), 0);
        for row in &r.rows {
            for cell in &row[1..] {
                let Cell::Float(v) = cell else { panic!() };
                assert!(v.abs() < 1e-12, "{v}");
            }
        }
    }

    #[test]
    fn q_curve_of_rank_one_cone_stops_at_one() {
        let spec: BoundarySpec = "parabola:1,0".parse().unwrap();
        let r = cmd_q_curve(2, &ConeSource::Spec(spec), 16, 9).unwrap();
        assert_eq!(r.params["t_bar"], "1.0000000000000000e0");
        assert!(r.rows.iter().all(|row| matches!(row[0], Cell::Float(t) if t < 1.0)));
        assert_eq!(r.outcome().exit_code(), 0, "{:?}", r.checks);
    }

    #[test]
    fn q_curve_rejects_bad_trace() {
        let spec: BoundarySpec = "parabola:0.7,0.2".parse().unwrap();
        let err = cmd_q_curve(2, &ConeSource::Spec(spec), 16, 9).unwrap_err();
        assert!(err.to_string().contains("deviation"));
    }

    #[test]
    fn solve_recovers_small_radial_cone() {
        let (r, field) = cmd_solve(2, 1.0, 41, &BoundarySpec::Symmetric(2)).unwrap();
        assert_eq!(r.outcome().exit_code(), 0);
        assert_eq!(field.n(), 41);
        let Cell::Float(res) = r.rows[0][3] else { panic!() };
        assert!(res <= 1e-8);
    }

    #[test]
    fn concentrate_rejects_gamma_one() {
        assert!(cmd_concentrate(2, &[0.9, 1.0], 41, &BoundarySpec::Symmetric(2)).is_err());
        assert!(cmd_concentrate(1, &[0.9], 41, &BoundarySpec::Symmetric(1)).is_err());
    }

    #[test]
    fn concentrate_on_symmetric_data() {
        let r = cmd_concentrate(2, &[0.8, 0.9], 41, &BoundarySpec::Symmetric(2)).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.checks.len(), 1);
        for row in &r.rows {
            let Cell::Float(dist) = row[2] else { panic!() };
            assert!(dist < 0.05, "{dist}");
        }
    }
}
